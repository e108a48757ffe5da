//! Lyapunov's generalized trigonometric functions.
//!
//! `(Cs θ, Sn θ)` is the solution of `x' = -y`, `y' = x^{2n-1}` with
//! `x(0) = 1`, `y(0) = 0`. It is periodic with period
//! `T_n = 2 sqrt(pi/n) Gamma(1/(2n)) / Gamma((n+1)/(2n))` and satisfies
//! `Cs^{2n} + n Sn^2 = 1`. For `n = 1` these are `cos` and `sin`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use crate::ode::{integrate, OdeError, Tolerances};

/// Agreement required between the Gamma formula and the integrated return
/// time.
pub const PERIOD_AGREEMENT: f64 = 1e-8;

const NODES: usize = 512;
const ORDER: usize = 20;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GenTrigError {
    #[error("generalized trigonometric index must be at least 1, got {0}")]
    InvalidIndex(u32),
    #[error(
        "period cross-check failed for n = {n}: Gamma formula {gamma_formula}, return time {return_time} (difference {diff:e})"
    )]
    PeriodMismatch {
        n: u32,
        gamma_formula: f64,
        return_time: f64,
        diff: f64,
    },
    #[error("return-time integration failed: {0}")]
    Integration(#[from] OdeError),
}

/// Cached Taylor expansions of `(Cs, Sn)` at equally spaced nodes over one
/// period. Immutable once built.
#[derive(Debug)]
pub struct GenTrigTable {
    n: u32,
    period: f64,
    return_time: f64,
    step: f64,
    /// Taylor coefficients of Cs and Sn at each node, node `k` at `k * step`.
    cs: Vec<[f64; ORDER + 1]>,
    sn: Vec<[f64; ORDER + 1]>,
    tol: Tolerances,
}

impl GenTrigTable {
    /// Builds the table and cross-checks the period against an independent
    /// adaptive integration run with tolerances derived from `tol`.
    pub fn build(n: u32, tol: Tolerances) -> Result<Self, GenTrigError> {
        if n < 1 {
            return Err(GenTrigError::InvalidIndex(n));
        }
        let period = period_formula(n);
        let step = period / NODES as f64;
        let mut cs = Vec::with_capacity(NODES + 1);
        let mut sn = Vec::with_capacity(NODES + 1);
        let (mut x, mut y) = (1.0, 0.0);
        for _ in 0..=NODES {
            let (cx, cy) = taylor_coefficients(n, x, y);
            x = horner(&cx, step);
            y = horner(&cy, step);
            cs.push(cx);
            sn.push(cy);
        }
        let return_time = return_time(n, period, tol)?;
        let diff = (return_time - period).abs();
        if diff > PERIOD_AGREEMENT || !diff.is_finite() {
            return Err(GenTrigError::PeriodMismatch {
                n,
                gamma_formula: period,
                return_time,
                diff,
            });
        }
        Ok(Self {
            n,
            period,
            return_time,
            step,
            cs,
            sn,
            tol,
        })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    /// `T_n` from the Gamma formula; all angle reduction uses this value.
    pub fn period(&self) -> f64 {
        self.period
    }

    /// First return time to `(1, 0)` found by direct integration.
    pub fn return_time(&self) -> f64 {
        self.return_time
    }

    pub fn tolerances(&self) -> Tolerances {
        self.tol
    }

    /// `(Cs θ, Sn θ)`.
    pub fn eval(&self, theta: f64) -> (f64, f64) {
        if self.n == 1 {
            return (theta.cos(), theta.sin());
        }
        let t = theta.rem_euclid(self.period);
        let k = ((t / self.step).round() as usize).min(NODES);
        let dt = t - k as f64 * self.step;
        (horner(&self.cs[k], dt), horner(&self.sn[k], dt))
    }
}

fn horner(c: &[f64; ORDER + 1], t: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, v| acc * t + v)
}

/// Taylor coefficients of the solution through `(x0, y0)`.
fn taylor_coefficients(n: u32, x0: f64, y0: f64) -> ([f64; ORDER + 1], [f64; ORDER + 1]) {
    let alpha = (2 * n - 1) as usize;
    let mut x = [0.0; ORDER + 1];
    let mut y = [0.0; ORDER + 1];
    x[0] = x0;
    y[0] = y0;
    // powers[j] holds the series of x^{j+1}
    let mut powers = vec![[0.0; ORDER + 1]; alpha];
    for k in 0..ORDER {
        powers[0][k] = x[k];
        for j in 1..alpha {
            let mut s = 0.0;
            for i in 0..=k {
                s += x[i] * powers[j - 1][k - i];
            }
            powers[j][k] = s;
        }
        let kp1 = (k + 1) as f64;
        x[k + 1] = -y[k] / kp1;
        y[k + 1] = powers[alpha - 1][k] / kp1;
    }
    (x, y)
}

/// `2 sqrt(pi/n) Gamma(1/(2n)) / Gamma((n+1)/(2n))`.
pub fn period_formula(n: u32) -> f64 {
    let nf = f64::from(n);
    2.0 * (PI / nf).sqrt() * gamma(1.0 / (2.0 * nf)) / gamma((nf + 1.0) / (2.0 * nf))
}

/// Period `T_n`, validated against the integrated return time.
pub fn period_tn(n: u32) -> Result<f64, GenTrigError> {
    Ok(table(n)?.period())
}

/// `(Cs θ, Sn θ)` from the shared table for `n`.
pub fn gen_trig(n: u32, theta: f64) -> Result<(f64, f64), GenTrigError> {
    Ok(table(n)?.eval(theta))
}

/// Shared table for `n` built with tolerances from the environment.
pub fn table(n: u32) -> Result<Arc<GenTrigTable>, GenTrigError> {
    static CACHE: OnceLock<Mutex<HashMap<u32, Arc<GenTrigTable>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(t) = cache.lock().expect("table cache poisoned").get(&n) {
        return Ok(t.clone());
    }
    let built = Arc::new(GenTrigTable::build(n, Tolerances::from_env())?);
    let mut guard = cache.lock().expect("table cache poisoned");
    Ok(guard.entry(n).or_insert(built).clone())
}

/// Integrates the defining system until `Sn` turns from negative to
/// positive again, then polishes the crossing with Newton steps.
fn return_time(n: u32, guess: f64, tol: Tolerances) -> Result<f64, GenTrigError> {
    let alpha = (2 * n - 1) as i32;
    let tight = Tolerances {
        atol: tol.atol.min(tol.rtol) * 1e-2,
        rtol: tol.atol.min(tol.rtol) * 1e-2,
    };
    let rhs = move |_: f64, s: &[f64], d: &mut [f64]| {
        d[0] = -s[1];
        d[1] = s[0].powi(alpha);
    };
    let mut seen_negative = false;
    let run = integrate(rhs, 0.0, &[1.0, 0.0], 2.0 * guess, tight, |t, s| {
        if t > 0.5 * guess && s[1] < 0.0 {
            seen_negative = true;
        }
        seen_negative && s[1] >= 0.0
    })?;
    let mut t = run.t;
    let mut state = run.y;
    for _ in 0..3 {
        let slope = state[0].powi(alpha);
        if slope == 0.0 {
            break;
        }
        let dt = -state[1] / slope;
        if dt == 0.0 {
            break;
        }
        let r = integrate(rhs, t, &state, t + dt, tight, |_, _| false)?;
        t = r.t;
        state = r.y;
    }
    Ok(t)
}

/// Lanczos approximation (g = 7, 9 terms) with reflection for `x < 1/2`.
pub fn gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        return PI / ((PI * x).sin() * gamma(1.0 - x));
    }
    let x = x - 1.0;
    let mut a = COEF[0];
    let t = x + G + 0.5;
    for (i, c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    (2.0 * PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * a
}
