use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use qtqme::conditioning::{random_relative_perturbations, PerturbationBase};
use qtqme::fixedpoint::{self, FpConfig, SolveReport, DEFAULT_EPS_RESIDUAL};
use qtqme::models::parse_model_spec;
use qtqme::newton::{fixed_point_warm_start, newton_solve, NewtonConfig};
use qtqme::symbolsolve::{compute_symbol, noise_floor};
use qtqme::QbdModel;

#[derive(Parser, Debug)]
#[command(name = "qtqme", version, about = "Minimal nonnegative solutions of quadratic equations with quasi-Toeplitz coefficients")]
struct Cli {
    /// Directory for the output files.
    #[arg(long, global = true, env = "QTQME_OUT_DIR", default_value = ".")]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Interpolate the symbol g(z) and write its coefficients.
    Symbol {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 1e-14)]
        eps: f64,
    },
    /// Run one fixed-point iteration.
    Solve {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_enum, default_value_t = VariantArg::F3)]
        variant: VariantArg,
        #[arg(long, value_enum, default_value_t = StartArg::Zero)]
        start: StartArg,
        #[arg(long, value_enum, default_value_t = ModeArg::Whole)]
        mode: ModeArg,
        #[arg(long, default_value_t = DEFAULT_EPS_RESIDUAL)]
        eps: f64,
        #[arg(long, default_value_t = 10_000)]
        max_iter: usize,
        /// Tolerance of the symbol computation used by Toeplitz starts.
        #[arg(long, default_value_t = 1e-14)]
        symbol_eps: f64,
    },
    /// Run Newton's iteration.
    Newton {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = DEFAULT_EPS_RESIDUAL)]
        eps: f64,
        #[arg(long, default_value_t = 50)]
        max_iter: usize,
        /// Start from a few F3 steps instead of zero.
        #[arg(long)]
        warm_start: bool,
    },
    /// Conditioning and one rate perturbation per Jackson case.
    Condition {
        /// Only `jackson` is supported.
        #[arg(long, default_value = "jackson")]
        family: String,
        /// Cases to run; all ten when omitted.
        #[arg(long = "case", value_parser = clap::value_parser!(u32).range(1..=10))]
        cases: Vec<u32>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Iteration counts of every variant and start.
    Compare {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = DEFAULT_EPS_RESIDUAL)]
        eps: f64,
        #[arg(long, default_value_t = 10_000)]
        max_iter: usize,
        #[arg(long, default_value_t = 1e-14)]
        symbol_eps: f64,
    },
}

#[derive(Args, Debug)]
struct ModelArgs {
    /// Model description file of `key=value` lines.
    #[arg(long, conflicts_with_all = ["family", "case", "param"])]
    model: Option<PathBuf>,
    /// Model family: jackson, idle or rwqp.
    #[arg(long)]
    family: Option<String>,
    /// Jackson case number.
    #[arg(long)]
    case: Option<u32>,
    /// Extra `key=value` entries of the model description.
    #[arg(long = "param", value_name = "KEY=VALUE")]
    param: Vec<String>,
}

impl ModelArgs {
    fn load(&self) -> Result<QbdModel> {
        let text = match (&self.model, &self.family) {
            (Some(path), _) => fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?,
            (None, Some(family)) => {
                let mut text = format!("family={family}\n");
                if let Some(case) = self.case {
                    writeln!(text, "case={case}").unwrap();
                }
                for p in &self.param {
                    writeln!(text, "{p}").unwrap();
                }
                text
            }
            (None, None) => bail!("give either --model or --family"),
        };
        Ok(parse_model_spec(&text)?)
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum VariantArg {
    F1,
    F2,
    F3,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum StartArg {
    Zero,
    Identity,
    Toeplitz,
    ToeplitzStochastic,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Whole,
    Correction,
}

impl From<VariantArg> for fixedpoint::Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::F1 => Self::F1,
            VariantArg::F2 => Self::F2,
            VariantArg::F3 => Self::F3,
        }
    }
}

impl From<StartArg> for fixedpoint::Start {
    fn from(s: StartArg) -> Self {
        match s {
            StartArg::Zero => Self::Zero,
            StartArg::Identity => Self::Identity,
            StartArg::Toeplitz => Self::ToeplitzOnly,
            StartArg::ToeplitzStochastic => Self::ToeplitzStochastic,
        }
    }
}

impl From<ModeArg> for fixedpoint::Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Whole => Self::Whole,
            ModeArg::Correction => Self::CorrectionOnly,
        }
    }
}

fn start_name(s: fixedpoint::Start) -> &'static str {
    match s {
        fixedpoint::Start::Zero => "zero",
        fixedpoint::Start::Identity => "identity",
        fixedpoint::Start::ToeplitzOnly => "toeplitz",
        fixedpoint::Start::ToeplitzStochastic => "toeplitz-stochastic",
    }
}

/// 17 significant digits; negative zero prints as zero.
fn num(x: f64) -> String {
    format!("{:.16e}", x + 0.0)
}

/// Writes through a temporary file so readers never see a partial file.
fn write_atomic(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    let tmp = dir.join(format!(".{name}.tmp"));
    fs::write(&tmp, contents).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, &path).with_context(|| format!("renaming to {}", path.display()))?;
    Ok(path)
}

fn history_csv(r: &SolveReport) -> String {
    let mut s = String::from("iter,residual,corr_rows,corr_cols\n");
    for (k, (res, (rows, cols))) in r.residuals.iter().zip(&r.correction_dims_history).enumerate() {
        writeln!(s, "{k},{},{rows},{cols}", num(*res)).unwrap();
    }
    s
}

fn newton_csv(r: &SolveReport) -> String {
    let mut s = String::from("iter,residual,corr_rows,corr_cols,step_norm,sylvester_terms,sylvester_check\n");
    for (k, (res, (rows, cols))) in r.residuals.iter().zip(&r.correction_dims_history).enumerate() {
        let step = match (r.step_norms.get(k), r.sylvester_terms.get(k), r.sylvester_residuals.get(k)) {
            (Some(z), Some(t), Some(c)) => format!("{},{t},{}", num(*z), num(*c)),
            _ => ",,".into(),
        };
        writeln!(s, "{k},{},{rows},{cols},{step}", num(*res)).unwrap();
    }
    s
}

fn run(cli: Cli) -> Result<()> {
    let out = &cli.out_dir;
    match cli.command {
        Command::Symbol { model, eps } => {
            let m = model.load()?;
            let r = compute_symbol(&m, eps)?;
            let mut g = r.g_hat.clone();
            g.trim_below(noise_floor(&r.g_hat));
            let mut s = String::from("exponent,coefficient\n");
            for (e, c) in g.terms() {
                writeln!(s, "{e},{}", num(c)).unwrap();
            }
            let path = write_atomic(out, "symbol.csv", &s)?;
            println!(
                "points={} delta_m={} g(1)={} g'(1)={} g''(1)={} roundoff_limited={} -> {}",
                2 * r.n,
                num(r.delta_m),
                num(r.g1),
                num(r.gp1),
                num(r.gpp1),
                r.roundoff_limited,
                path.display()
            );
        }
        Command::Solve { model, variant, start, mode, eps, max_iter, symbol_eps } => {
            let m = model.load()?;
            let mut cfg = FpConfig::new(variant.into(), start.into());
            cfg.mode = mode.into();
            cfg.eps_residual = eps;
            cfg.max_iter = max_iter;
            let symbol = match start {
                StartArg::Toeplitz | StartArg::ToeplitzStochastic => Some(compute_symbol(&m, symbol_eps)?.g_hat),
                _ => None,
            };
            let r = fixedpoint::solve(&m, &cfg, symbol.as_ref())?;
            write_atomic(out, "residuals.csv", &history_csv(&r))?;
            write_atomic(out, "solution.txt", &r.solution.to_text())?;
            println!("{:?} after {} steps, residual {}", r.stop_reason, r.iterations, num(r.final_residual()));
        }
        Command::Newton { model, eps, max_iter, warm_start } => {
            let m = model.load()?;
            let warm = if warm_start { Some(fixed_point_warm_start(&m)?) } else { None };
            let cfg = NewtonConfig { eps_residual: eps, max_iter, sylvester_tol: eps / 100.0, warm_start: warm, ..NewtonConfig::default() };
            let r = newton_solve(&m, &cfg)?;
            write_atomic(out, "newton.csv", &newton_csv(&r))?;
            write_atomic(out, "solution.txt", &r.solution.to_text())?;
            println!("{:?} after {} steps, residual {}", r.stop_reason, r.iterations, num(r.final_residual()));
        }
        Command::Condition { family, cases, seed } => {
            if family != "jackson" {
                bail!("the perturbation experiment is defined for the jackson family only, got `{family}`");
            }
            let cases: Vec<usize> = if cases.is_empty() { (1..=10).collect() } else { cases.iter().map(|&c| c as usize).collect() };
            let mut s = String::from("case,cond_upper,cond_estimate,delta_g,delta_g_bound,delta_G,delta_G_bound\n");
            for case in cases {
                let base = PerturbationBase::new(case)?;
                let r = base.run(random_relative_perturbations(seed))?;
                writeln!(
                    s,
                    "{case},{},{},{},{},{},{}",
                    num(base.report.cond_upper),
                    num(base.report.cond_estimate),
                    num(r.delta_g),
                    num(r.delta_g_bound),
                    num(r.delta_big_g),
                    num(r.delta_big_g_bound)
                )
                .unwrap();
                println!("case {case}: conditioning {:.4}", base.report.cond_upper);
            }
            write_atomic(out, "condition.csv", &s)?;
        }
        Command::Compare { model, eps, max_iter, symbol_eps } => {
            let m = model.load()?;
            let g_hat = compute_symbol(&m, symbol_eps)?.g_hat;
            let mut s = String::from("variant,start,iterations,final_residual,stop_reason,corr_rows,corr_cols\n");
            for start in fixedpoint::Start::ALL {
                for variant in fixedpoint::Variant::ALL {
                    let mut cfg = FpConfig::new(variant, start);
                    cfg.eps_residual = eps;
                    cfg.max_iter = max_iter;
                    let line = match fixedpoint::solve(&m, &cfg, Some(&g_hat)) {
                        Ok(r) => {
                            let (rows, cols) = r.solution.correction().dims();
                            format!("{},{},{:?},{rows},{cols}", r.iterations, num(r.final_residual()), r.stop_reason)
                        }
                        Err(e) => format!(",,error: {},,", e.to_string().replace(',', ";")),
                    };
                    writeln!(s, "{variant:?},{},{line}", start_name(start)).unwrap();
                }
            }
            write_atomic(out, "compare.csv", &s)?;
            print!("{s}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
