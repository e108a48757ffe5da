//! Adaptive Dormand-Prince 5(4) integrator with optional early stop.

/// Error-control settings shared by every integration in the crate.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct Tolerances {
    pub atol: f64,
    pub rtol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            atol: 1e-12,
            rtol: 1e-10,
        }
    }
}

impl Tolerances {
    /// Environment variable overriding both tolerances at once.
    pub const ENV_BOTH: &'static str = "MONODROMY_TOL";
    pub const ENV_ATOL: &'static str = "MONODROMY_ATOL";
    pub const ENV_RTOL: &'static str = "MONODROMY_RTOL";

    /// Defaults, overridden by `MONODROMY_TOL`, `MONODROMY_ATOL` and
    /// `MONODROMY_RTOL` when set to a positive number.
    pub fn from_env() -> Self {
        let read = |name: &str| {
            std::env::var(name)
                .ok()
                .and_then(|v| v.trim().parse::<f64>().ok())
                .filter(|v| v.is_finite() && *v > 0.0)
        };
        let mut tol = Self::default();
        if let Some(v) = read(Self::ENV_BOTH) {
            tol.atol = v;
            tol.rtol = v;
        }
        if let Some(v) = read(Self::ENV_ATOL) {
            tol.atol = v;
        }
        if let Some(v) = read(Self::ENV_RTOL) {
            tol.rtol = v;
        }
        tol
    }

    /// Noise level expected for a quantity of magnitude `scale`.
    pub fn floor(&self, scale: f64) -> f64 {
        self.atol + self.rtol * scale.abs()
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OdeError {
    #[error("step size underflow at t = {t}")]
    StepUnderflow { t: f64 },
    #[error("too many steps ({steps}) before reaching t = {target}")]
    TooManySteps { steps: usize, target: f64 },
}

#[derive(Clone, Debug)]
pub struct OdeResult {
    pub t: f64,
    pub y: Vec<f64>,
    pub steps: usize,
    /// True when the stop predicate ended the integration early.
    pub stopped: bool,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Integrates `y' = f(t, y)` from `t0` to `t1` (either direction).
///
/// `stop(t, y)` is consulted after every accepted step; returning true ends
/// the integration there. A right-hand side producing non-finite values is
/// treated as a failed step and retried with a smaller step.
pub fn integrate<F, S>(
    mut f: F,
    t0: f64,
    y0: &[f64],
    t1: f64,
    tol: Tolerances,
    mut stop: S,
) -> Result<OdeResult, OdeError>
where
    F: FnMut(f64, &[f64], &mut [f64]),
    S: FnMut(f64, &[f64]) -> bool,
{
    const MAX_STEPS: usize = 200_000;
    let dim = y0.len();
    let span = t1 - t0;
    let dir = if span >= 0.0 { 1.0 } else { -1.0 };
    let mut t = t0;
    let mut y = y0.to_vec();
    if span == 0.0 {
        return Ok(OdeResult {
            t,
            y,
            steps: 0,
            stopped: false,
        });
    }
    let mut k1 = vec![0.0; dim];
    let mut k2 = vec![0.0; dim];
    let mut k3 = vec![0.0; dim];
    let mut k4 = vec![0.0; dim];
    let mut k5 = vec![0.0; dim];
    let mut k6 = vec![0.0; dim];
    let mut k7 = vec![0.0; dim];
    let mut tmp = vec![0.0; dim];
    let mut ynew = vec![0.0; dim];
    f(t, &y, &mut k1);

    let mut h = dir * (span.abs() * 1e-3).min(initial_step(&y, &k1, tol));
    let h_min = span.abs() * 1e-14;
    let mut steps = 0;
    let mut rejected_last = false;
    loop {
        if steps >= MAX_STEPS {
            return Err(OdeError::TooManySteps { steps, target: t1 });
        }
        let remaining = t1 - t;
        if remaining * dir <= 0.0 {
            break;
        }
        if (h - remaining) * dir > 0.0 {
            h = remaining;
        }
        for i in 0..dim {
            tmp[i] = y[i] + h * A21 * k1[i];
        }
        f(t + C2 * h, &tmp, &mut k2);
        for i in 0..dim {
            tmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        f(t + C3 * h, &tmp, &mut k3);
        for i in 0..dim {
            tmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        f(t + C4 * h, &tmp, &mut k4);
        for i in 0..dim {
            tmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        f(t + C5 * h, &tmp, &mut k5);
        for i in 0..dim {
            tmp[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        f(t + h, &tmp, &mut k6);
        for i in 0..dim {
            ynew[i] = y[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        f(t + h, &ynew, &mut k7);

        let mut err = 0.0;
        let mut finite = true;
        for i in 0..dim {
            let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = tol.atol + tol.rtol * y[i].abs().max(ynew[i].abs());
            let q = e / sc;
            if !q.is_finite() || !ynew[i].is_finite() || !k7[i].is_finite() {
                finite = false;
            }
            err += q * q;
        }
        let err = (err / dim as f64).sqrt();
        if !finite {
            h *= 0.25;
            rejected_last = true;
            if h.abs() < h_min {
                return Err(OdeError::StepUnderflow { t });
            }
            continue;
        }
        steps += 1;
        if err <= 1.0 {
            t += h;
            std::mem::swap(&mut y, &mut ynew);
            std::mem::swap(&mut k1, &mut k7);
            if stop(t, &y) {
                return Ok(OdeResult {
                    t,
                    y,
                    steps,
                    stopped: true,
                });
            }
            let mut fac = if err == 0.0 { 10.0 } else { 0.9 * err.powf(-0.2) };
            fac = fac.clamp(0.2, 10.0);
            if rejected_last {
                fac = fac.min(1.0);
            }
            h *= fac;
            rejected_last = false;
        } else {
            h *= (0.9 * err.powf(-0.2)).max(0.2);
            rejected_last = true;
            if h.abs() < h_min {
                return Err(OdeError::StepUnderflow { t });
            }
        }
    }
    Ok(OdeResult {
        t,
        y,
        steps,
        stopped: false,
    })
}

fn initial_step(y: &[f64], dy: &[f64], tol: Tolerances) -> f64 {
    let mut d0 = 0.0;
    let mut d1 = 0.0;
    for (a, b) in y.iter().zip(dy) {
        let sc = tol.atol + tol.rtol * a.abs();
        d0 += (a / sc).powi(2);
        d1 += (b / sc).powi(2);
    }
    let n = y.len() as f64;
    let (d0, d1) = ((d0 / n).sqrt(), (d1 / n).sqrt());
    if d0 < 1e-5 || d1 < 1e-5 || !d1.is_finite() {
        1e-4
    } else {
        (0.01 * d0 / d1).max(1e-8)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_growth() {
        let r = integrate(
            |_, y, dy| dy[0] = y[0],
            0.0,
            &[1.0],
            2.0,
            Tolerances::default(),
            |_, _| false,
        )
        .unwrap();
        assert!((r.y[0] - 2f64.exp()).abs() < 1e-9);
        assert!(!r.stopped);
    }

    #[test]
    fn harmonic_oscillator_backwards() {
        let r = integrate(
            |_, y, dy| {
                dy[0] = -y[1];
                dy[1] = y[0];
            },
            0.0,
            &[1.0, 0.0],
            -1.0,
            Tolerances::default(),
            |_, _| false,
        )
        .unwrap();
        assert!((r.y[0] - 1f64.cos()).abs() < 1e-9);
        assert!((r.y[1] + 1f64.sin()).abs() < 1e-9);
    }

    #[test]
    fn stop_predicate() {
        let r = integrate(
            |_, _, dy| dy[0] = 1.0,
            0.0,
            &[0.0],
            10.0,
            Tolerances::default(),
            |_, y| y[0] > 1.0,
        )
        .unwrap();
        assert!(r.stopped);
        assert!(r.t < 10.0);
    }

    #[test]
    fn blow_up_is_reported() {
        let r = integrate(
            |_, y, dy| dy[0] = y[0] * y[0],
            0.0,
            &[1.0],
            2.0,
            Tolerances::default(),
            |_, _| false,
        );
        assert!(r.is_err());
    }
}
