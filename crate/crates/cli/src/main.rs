//! `monodromy` command-line front end.
//!
//! Exit codes: 0 success, 1 error, 2 the theory abstained (no verdict).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use monodromy::algebra::{parse_rational, Rational};
use monodromy::bifurcation::{
    admissible_eps_max, build_family, search_sign_patterns, sweep, BifurcationError, Coefficients, FamilyParams,
    FamilyTag, PerturbationFamily, EPS_MAX,
};
use monodromy::expr::parse_system;
use monodromy::ode::Tolerances;
use monodromy::presets::{self, EX3_FAMILY};
use monodromy::report::{analyze, AnalysisError, AnalyzeOptions, BifurcationReport, ChartChoice, MSource, ToolInfo};
use monodromy::selftest::{self, SelftestOptions};

#[derive(Parser, Debug)]
#[command(
    name = "monodromy",
    version,
    about = "Cyclicity analysis of monodromic singular points"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ChartArg {
    Polar,
    Genpolar,
    Direct,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FamilyArg {
    Degp1,
    Degp2,
    Nilp1,
    Nilp2,
    #[value(name = "preset-ex3")]
    PresetEx3,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum CoefficientArg {
    Constructive,
    Alternating,
    Search,
}

#[derive(clap::Args, Debug)]
struct InputArgs {
    /// File holding the system, e.g. `x' = -y + x^3; y' = x + y^3`.
    system: Option<PathBuf>,
    /// Use a built-in example instead of (or as defaults for) a file.
    #[arg(long)]
    preset: Option<String>,
    /// File holding an inverse integrating factor candidate V0(x, y).
    #[arg(long)]
    iif: Option<PathBuf>,
    /// Parameter binding `name=value` with a rational value.
    #[arg(long = "param", value_name = "K=V")]
    params: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Classify, lift and bound the cyclicity of the origin.
    Analyze {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, value_enum)]
        chart: Option<ChartArg>,
        /// Treat the origin as a focus without numeric evidence.
        #[arg(long)]
        assert_focus: bool,
        /// Write the JSON report here instead of standard output.
        #[arg(long)]
        json: Option<PathBuf>,
        /// Write the displacement samples `r0,pi,dpi,d` here.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Also sweep this perturbation family (requires --eps).
        #[arg(long, value_enum)]
        family: Option<FamilyArg>,
        #[arg(long)]
        eps: Option<String>,
    },
    /// Count limit cycles bifurcating from the origin over an ε grid.
    Bifurcate {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, value_enum)]
        family: FamilyArg,
        /// Comma-separated values, `geom:START:STOP:COUNT`, or `auto`.
        #[arg(long, allow_hyphen_values = true)]
        eps: String,
        /// Vanishing multiplicity of the base system; computed when omitted.
        #[arg(long)]
        m: Option<i32>,
        #[arg(long, value_enum, default_value = "constructive")]
        coefficients: CoefficientArg,
        /// Explicit coefficients, comma-separated (overrides --coefficients).
        #[arg(long, allow_hyphen_values = true)]
        values: Option<String>,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Run the acceptance checks on the built-in examples.
    Selftest {
        /// Largest generalized trigonometric index to exercise.
        #[arg(long, default_value_t = 5)]
        n_max: u32,
        #[arg(long)]
        json: Option<PathBuf>,
    },
}

/// Error with a stable kind for the JSON error object.
#[derive(Debug)]
struct Failure {
    kind: &'static str,
    error: anyhow::Error,
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        let error = e.into();
        let kind = if let Some(a) = error.downcast_ref::<AnalysisError>() {
            a.kind()
        } else if error.downcast_ref::<BifurcationError>().is_some() {
            "bifurcation"
        } else {
            "error"
        };
        Failure { kind, error }
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure {
        kind: "usage",
        error: anyhow!(msg.into()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            let message = error_message(&f.error);
            let obj = json!({
                "error": {
                    "kind": f.kind,
                    "message": message,
                },
                "tool": { "name": ToolInfo::default().name, "version": ToolInfo::default().version },
            });
            println!(
                "{}",
                serde_json::to_string_pretty(&obj).expect("error object serializes")
            );
            eprintln!("error: {message}");
            ExitCode::from(1)
        }
    }
}

/// The error chain joined by `: `, skipping causes whose text the message
/// already contains.
fn error_message(e: &anyhow::Error) -> String {
    let mut msg = String::new();
    for cause in e.chain() {
        let text = cause.to_string();
        if !msg.contains(&text) {
            if !msg.is_empty() {
                msg.push_str(": ");
            }
            msg.push_str(&text);
        }
    }
    msg
}

fn run(cli: Cli) -> Result<u8, Failure> {
    match cli.command {
        Command::Analyze {
            input,
            chart,
            assert_focus,
            json,
            csv,
            family,
            eps,
        } => {
            let (system, mut opts) = resolve_input(&input)?;
            opts.assert_focus = assert_focus;
            opts.chart = chart.map(|c| match c {
                ChartArg::Polar => ChartChoice::Polar,
                ChartArg::Genpolar => ChartChoice::GenPolar,
                ChartArg::Direct => ChartChoice::Direct,
            });
            let mut report = analyze(&system, &opts)?;
            match (family, eps) {
                (Some(f), Some(e)) => {
                    let grid = parse_eps_grid(&e)?;
                    let m = report
                        .m
                        .ok_or_else(|| usage("no multiplicity available for the family"))?;
                    let sys = parse_system(&system, &opts.params)?;
                    let fam = build_family(
                        family_tag(f),
                        &sys,
                        FamilyParams {
                            m,
                            coefficients: Coefficients::Constructive,
                            tol: opts.tolerances,
                        },
                    )?;
                    let grid = resolve_auto(&fam, grid)?;
                    report.bifurcation.push(sweep(&fam, &grid, None)?);
                }
                (None, None) => {}
                _ => return Err(usage("--family and --eps go together")),
            }
            if let Some(path) = &csv {
                let file = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
                report.profile.write_csv(file)?;
            }
            emit(&report.to_json(), json.as_deref())?;
            Ok(report.exit_code() as u8)
        }
        Command::Bifurcate {
            input,
            family,
            eps,
            m,
            coefficients,
            values,
            csv,
            json,
        } => {
            let grid = parse_eps_grid(&eps)?;
            let (system, opts) = resolve_input(&input)?;
            let sys = parse_system(&system, &opts.params)?;
            let tag = family_tag(family);
            let (m, m_source) = match m {
                Some(m) => (m, MSource::User),
                None => {
                    let r = analyze(&system, &opts)?;
                    let m = r.m.ok_or_else(|| usage("multiplicity unavailable; pass --m"))?;
                    (m, r.m_source)
                }
            };
            let rule = match (values, coefficients) {
                (Some(v), _) => Coefficients::Explicit {
                    values: v
                        .split(',')
                        .map(|s| s.trim().parse::<f64>())
                        .collect::<Result<_, _>>()
                        .map_err(|e| usage(format!("bad --values: {e}")))?,
                },
                (None, CoefficientArg::Alternating) => Coefficients::Alternating,
                (None, _) => Coefficients::Constructive,
            };
            let params = |coefficients| FamilyParams {
                m,
                coefficients,
                tol: opts.tolerances,
            };
            let fam = match (coefficients, build_family(tag.clone(), &sys, params(rule.clone()))) {
                (CoefficientArg::Search, _) => search_sign_patterns(tag.clone(), &sys, m, EPS_MAX, opts.tolerances)?.0,
                (_, Ok(f)) => f,
                // the constructive rule needs a clean multiplicity estimate
                (CoefficientArg::Constructive, Err(BifurcationError::Construction(_))) => {
                    search_sign_patterns(tag.clone(), &sys, m, EPS_MAX, opts.tolerances)?.0
                }
                (_, Err(e)) => return Err(e.into()),
            };
            let rule = fam.coefficient_rule.clone();
            let auto = grid.is_none();
            let grid = resolve_auto(&fam, grid)?;
            let table = sweep(&fam, &grid, None)?;
            if let Some(path) = &csv {
                let file = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
                table.write_csv(file)?;
            }
            let report = BifurcationReport {
                tool: ToolInfo::default(),
                tolerances: opts.tolerances,
                system: sys.to_string(),
                family: tag,
                m,
                m_source,
                coefficient_rule: rule,
                eps_max_admissible: auto.then(|| grid[0]),
                table,
            };
            emit(&report.to_json(), json.as_deref())?;
            Ok(0)
        }
        Command::Selftest { n_max, json } => {
            let results = selftest::run_all(&SelftestOptions {
                n_max,
                tol: Tolerances::from_env(),
            });
            for r in &results {
                println!("{}", r.summary_line());
                for c in r.checks.iter().filter(|c| !c.passed) {
                    println!("    {}: {}", c.name, c.detail);
                }
            }
            let ok = selftest::all_passed(&results);
            println!(
                "{}",
                if ok {
                    "selftest: all criteria passed"
                } else {
                    "selftest: FAILED"
                }
            );
            if let Some(path) = json {
                std::fs::write(&path, monodromy::report::canonical_json(&results))
                    .with_context(|| format!("writing {}", path.display()))?;
            }
            Ok(if ok { 0 } else { 1 })
        }
    }
}

fn family_tag(f: FamilyArg) -> FamilyTag {
    match f {
        FamilyArg::Degp1 => FamilyTag::DegP1,
        FamilyArg::Degp2 => FamilyTag::DegP2,
        FamilyArg::Nilp1 => FamilyTag::NilP1,
        FamilyArg::Nilp2 => FamilyTag::NilP2,
        FamilyArg::PresetEx3 => FamilyTag::Custom {
            text: EX3_FAMILY.to_string(),
        },
    }
}

/// System text and analysis options from a file and/or a preset.
fn resolve_input(input: &InputArgs) -> Result<(String, AnalyzeOptions), Failure> {
    let preset = match &input.preset {
        Some(name) => Some(presets::find(name).ok_or_else(|| {
            usage(format!(
                "unknown preset `{name}`; known: {}",
                presets::names().join(", ")
            ))
        })?),
        None => None,
    };
    let system = match (&input.system, preset) {
        (Some(path), _) => read(path)?,
        (None, Some(p)) => p.system.to_string(),
        (None, None) => return Err(usage("give a system file or --preset")),
    };
    let mut params: BTreeMap<String, Rational> = preset.map(|p| p.param_map()).unwrap_or_default();
    for kv in &input.params {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| usage(format!("--param expects name=value, got `{kv}`")))?;
        let value = parse_rational(v.trim()).ok_or_else(|| usage(format!("`{v}` is not a rational number")))?;
        params.insert(k.trim().to_string(), value);
    }
    let iif = match (&input.iif, preset) {
        (Some(path), _) => Some(read(path)?.trim().to_string()),
        (None, Some(p)) => p.iif.map(String::from),
        (None, None) => None,
    };
    Ok((
        system,
        AnalyzeOptions {
            iif,
            params,
            preset: preset.map(|p| p.name.to_string()),
            tolerances: Tolerances::from_env(),
            ..AnalyzeOptions::default()
        },
    ))
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn emit(text: &str, path: Option<&Path>) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// `None` stands for `auto`.
fn parse_eps_grid(text: &str) -> Result<Option<Vec<f64>>, Failure> {
    let text = text.trim();
    if text == "auto" {
        return Ok(None);
    }
    let grid: Vec<f64> = if let Some(spec) = text.strip_prefix("geom:") {
        let parts: Vec<&str> = spec.split(':').collect();
        let [a, b, n] = parts[..] else {
            return Err(usage("geom grid is geom:START:STOP:COUNT"));
        };
        let (a, b): (f64, f64) = (num(a)?, num(b)?);
        let n: usize = n.trim().parse().map_err(|_| usage(format!("bad count `{n}`")))?;
        if n == 0 || a == 0.0 || b == 0.0 || a.signum() != b.signum() {
            return Err(usage("geom grid needs COUNT >= 1 and nonzero endpoints of one sign"));
        }
        if n == 1 {
            vec![a]
        } else {
            (0..n).map(|k| a * (b / a).powf(k as f64 / (n - 1) as f64)).collect()
        }
    } else {
        text.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(num)
            .collect::<Result<_, _>>()?
    };
    if grid.is_empty() {
        return Err(usage("empty ε grid"));
    }
    Ok(Some(grid))
}

fn num(s: &str) -> Result<f64, Failure> {
    s.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| usage(format!("`{s}` is not a number")))
}

fn resolve_auto(fam: &PerturbationFamily, grid: Option<Vec<f64>>) -> Result<Vec<f64>, Failure> {
    match grid {
        Some(g) => Ok(g),
        None => {
            let top = admissible_eps_max(fam, EPS_MAX)?;
            Ok((0..3).map(|k| top * 10f64.powi(-k)).collect())
        }
    }
}
