//! Command-line interface.
//!
//! Exit codes: 0 on success, 1 for invalid invocations or configurations,
//! 2 when a run fails or a verification does not hold.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use qkl_core::experiments::{
    self, EntanglerKind, ExperimentConfig, ExperimentId, LambdaPolicy, SeedPath, Stream,
};
use qkl_core::kernels::KernelKind;

use crate::error::{QklError, Result};
use crate::manifest::RunManifest;
use crate::records::emit_csv;
use crate::svg::{self, emit_svg, PlotData};
use crate::{oracle, runner};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Parser)]
#[command(name = "qkl", version, about = "Quantum kernel spectra and generalization experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train/test MSE of each kernel against the number of qubits.
    Generalization(RunArgs),
    /// Leading eigenvalues of the biased kernel's Gram matrix.
    Spectrum(RunArgs),
    /// Kernel-target alignment and cumulative task-model alignment.
    Alignment(RunArgs),
    /// Monte Carlo check of first and second Haar moments.
    VerifyHaar(RunArgs),
    /// Concentration of the reduced density matrix and the shot cost it implies.
    VerifyConcentration(RunArgs),
    /// Closed-form checks of the one-qubit integral operator.
    SpectralOracle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EntanglerArg {
    Haar,
    Layers,
}

/// Qubit counts given as `a..b` (inclusive), `a`, or `a,b,c`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QubitRange(pub Vec<usize>);

impl std::str::FromStr for QubitRange {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let num = |t: &str| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| format!("invalid qubit count {t:?}"))
        };
        let values: Vec<usize> = if let Some((a, b)) = s.split_once("..") {
            let (a, b) = (num(a)?, num(b.trim_start_matches('='))?);
            if a > b {
                return Err(format!("empty qubit range {s:?}"));
            }
            (a..=b).collect()
        } else {
            s.split(',').map(num).collect::<std::result::Result<_, _>>()?
        };
        if values.is_empty() || values.contains(&0) {
            return Err("qubit counts must be at least 1".into());
        }
        Ok(QubitRange(values))
    }
}

/// Comma-separated kernel tags.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KernelList(pub Vec<KernelKind>);

impl std::str::FromStr for KernelList {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        parse_kernels(s).map(KernelList)
    }
}

fn parse_kernels(s: &str) -> std::result::Result<Vec<KernelKind>, String> {
    let kinds: Vec<KernelKind> = s
        .split(',')
        .map(|t| {
            let t = t.trim();
            KernelKind::from_tag(if t == "q_w" { "qw" } else { t })
                .ok_or_else(|| format!("unknown kernel {t:?} (expected q, qw, k, rbf)"))
        })
        .collect::<std::result::Result<_, _>>()?;
    if kinds.is_empty() {
        return Err("kernel list is empty".into());
    }
    Ok(kinds)
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Qubit counts: `a..b`, `a` or `a,b,c`.
    #[arg(long)]
    pub qubits: Option<QubitRange>,
    /// Data points per run.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Number of seeds per qubit count.
    #[arg(long)]
    pub seeds: Option<usize>,
    /// Variance of the Gaussian label noise.
    #[arg(long = "noise-var")]
    pub noise_var: Option<f64>,
    /// Ridge parameter for every kernel (default: per-kernel).
    #[arg(long, conflicts_with = "lambda_grid")]
    pub lambda: Option<f64>,
    /// Sweep the 15-point grid 1e-6..1e4 and flag the best test MSE.
    #[arg(long = "lambda-grid")]
    pub lambda_grid: bool,
    /// Comma-separated subset of q, qw, k, rbf.
    #[arg(long)]
    pub kernels: Option<KernelList>,
    #[arg(long, value_enum)]
    pub entangler: Option<EntanglerArg>,
    /// Output directory.
    #[arg(long, default_value = "qkl-out")]
    pub out: PathBuf,
    /// Master seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also render SVG figures.
    #[arg(long)]
    pub svg: bool,
    /// Unitaries sampled by the verification commands.
    #[arg(long)]
    pub unitaries: Option<usize>,
}

impl RunArgs {
    fn config(&self, d_default: &[usize], seeds_default: usize) -> Result<ExperimentConfig> {
        let base = ExperimentConfig::default();
        let config = ExperimentConfig {
            d_range: self.qubits.clone().map_or_else(|| d_default.to_vec(), |q| q.0),
            n: self.samples.unwrap_or(base.n),
            seeds: (0..self.seeds.unwrap_or(seeds_default) as u64).collect(),
            noise_variance: self.noise_var.unwrap_or(base.noise_variance),
            lambda_policy: if self.lambda_grid {
                LambdaPolicy::Grid
            } else {
                LambdaPolicy::Fixed(self.lambda)
            },
            kernels: self.kernels.clone().map_or(base.kernels, |k| k.0),
            entangler: match self.entangler {
                Some(EntanglerArg::Layers) => EntanglerKind::Layers,
                _ => EntanglerKind::Haar,
            },
            master_seed: self.seed,
            ..base
        };
        config.validate().map_err(|e| QklError::Validation(e.to_string()))?;
        Ok(config)
    }

    fn prepare_out(&self) -> Result<&Path> {
        std::fs::create_dir_all(&self.out).map_err(|e| QklError::io(&self.out, e))?;
        Ok(&self.out)
    }
}

fn config_json(config: &ExperimentConfig) -> serde_json::Value {
    json!({
        "d_range": config.d_range,
        "n": config.n,
        "seeds": config.seeds,
        "noise_variance": config.noise_variance,
        "train_fraction": config.train_fraction,
        "lambda_policy": match config.lambda_policy {
            LambdaPolicy::Grid => json!({"grid": experiments::lambda_grid()}),
            LambdaPolicy::Fixed(None) => json!({"fixed": "per-kernel default"}),
            LambdaPolicy::Fixed(Some(l)) => json!({"fixed": l}),
        },
        "kernels": config.kernels.iter().map(|k| k.tag()).collect::<Vec<_>>(),
        "entangler": config.entangler.tag(),
        "master_seed": config.master_seed,
    })
}

fn write_plot(out: &Path, plot: &PlotData, manifest: &mut RunManifest) -> Result<()> {
    let name = plot.kind.file_name();
    emit_svg(plot, &out.join(name))?;
    manifest.add_file(out, name)
}

fn timed<T>(manifest: &mut RunManifest, stage: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    let start = Instant::now();
    let value = f()?;
    manifest.wall_clock.insert(stage.to_string(), start.elapsed().as_secs_f64());
    Ok(value)
}

fn generalization(args: &RunArgs, stdout: &mut dyn Write) -> Result<()> {
    let config = args.config(&(1..=7).collect::<Vec<_>>(), 10)?;
    let out = args.prepare_out()?;
    let pool = runner::thread_pool()?;
    let mut manifest = RunManifest::new("generalization", config_json(&config), config.master_seed);
    let rows = timed(&mut manifest, "generalization", || runner::generalization(&pool, &config))?;
    emit_csv(&rows, &out.join("generalization.csv"))?;
    manifest.add_file(out, "generalization.csv")?;
    if args.svg {
        write_plot(out, &svg::mse_vs_qubits(&rows), &mut manifest)?;
    }
    manifest.write(&out.join(MANIFEST))?;
    writeln!(stdout, "{:>3} {:>4} {:>12} {:>12}", "d", "kind", "train_mse", "test_mse")?;
    for d in &config.d_range {
        for kind in config.kernels_at(*d) {
            let sel: Vec<_> = rows.iter().filter(|r| r.d == *d && r.kernel == kind && r.best_test).collect();
            let n = sel.len().max(1) as f64;
            writeln!(
                stdout,
                "{d:>3} {:>4} {:>12.4e} {:>12.4e}",
                kind.tag(),
                sel.iter().map(|r| r.train_mse).sum::<f64>() / n,
                sel.iter().map(|r| r.test_mse).sum::<f64>() / n
            )?;
        }
    }
    writeln!(stdout, "wrote {} rows to {}", rows.len(), out.join("generalization.csv").display())?;
    Ok(())
}

fn spectrum(args: &RunArgs, stdout: &mut dyn Write) -> Result<()> {
    let config = args.config(&(5..=10).collect::<Vec<_>>(), 10)?;
    let out = args.prepare_out()?;
    let pool = runner::thread_pool()?;
    let mut manifest = RunManifest::new("spectrum", config_json(&config), config.master_seed);
    let (rows, cells) = timed(&mut manifest, "spectrum", || runner::spectrum(&pool, &config))?;
    emit_csv(&rows, &out.join("spectrum.csv"))?;
    manifest.add_file(out, "spectrum.csv")?;
    if args.svg {
        write_plot(out, &svg::spectrum_vs_qubits(&rows), &mut manifest)?;
    }
    manifest.write(&out.join(MANIFEST))?;
    for d in &config.d_range {
        let mean = |rank: usize| {
            let v: Vec<f64> = rows.iter().filter(|r| r.d == *d && r.rank == rank).map(|r| r.eigenvalue).collect();
            v.iter().sum::<f64>() / v.len().max(1) as f64
        };
        writeln!(stdout, "d={d}: gamma_1 {:.4} gamma_2..4 {:.3e} {:.3e} {:.3e}", mean(1), mean(2), mean(3), mean(4))?;
    }
    let violations = cells.iter().filter(|c| !c.bound.holds).count();
    writeln!(stdout, "purity bound holds in {}/{} runs", cells.len() - violations, cells.len())?;
    Ok(())
}

fn alignment(args: &RunArgs, stdout: &mut dyn Write) -> Result<()> {
    let config = args.config(&[1, 3, 5, 7], 50)?;
    let out = args.prepare_out()?;
    let pool = runner::thread_pool()?;
    let mut manifest = RunManifest::new("alignment", config_json(&config), config.master_seed);
    let (scores, curves) = timed(&mut manifest, "alignment", || runner::alignment(&pool, &config))?;
    emit_csv(&scores, &out.join("alignment.csv"))?;
    emit_csv(&curves, &out.join("alignment_curve.csv"))?;
    manifest.add_file(out, "alignment.csv")?;
    manifest.add_file(out, "alignment_curve.csv")?;
    if args.svg {
        write_plot(out, &svg::kta_histogram(&scores), &mut manifest)?;
        write_plot(out, &svg::cumulative_alignment(&curves), &mut manifest)?;
    }
    manifest.write(&out.join(MANIFEST))?;
    for d in &config.d_range {
        for kind in config.kernels_at(*d) {
            let v: Vec<f64> = scores.iter().filter(|r| r.d == *d && r.kernel == kind).map(|r| r.kta).collect();
            writeln!(stdout, "d={d} {:>3}: mean KTA {:.3}", kind.tag(), v.iter().sum::<f64>() / v.len().max(1) as f64)?;
        }
    }
    Ok(())
}

fn verify_haar(args: &RunArgs, stdout: &mut dyn Write) -> Result<()> {
    let d_range = args.qubits.clone().map_or(vec![2], |q| q.0);
    let &[d] = d_range.as_slice() else {
        return Err(QklError::Validation("verify-haar takes a single qubit count".into()));
    };
    if d > 4 {
        return Err(QklError::Validation("verify-haar supports at most 4 qubits".into()));
    }
    let unitaries = args.unitaries.unwrap_or(10_000);
    if unitaries < 2 {
        return Err(QklError::Validation("need at least two unitaries".into()));
    }
    let out = args.prepare_out()?;
    let mut manifest = RunManifest::new(
        "verify-haar",
        json!({"d": d, "unitaries": unitaries, "master_seed": args.seed}),
        args.seed,
    );
    let mut rng = SeedPath::new(args.seed, ExperimentId::HaarMoments, d, 0).rng(Stream::Unitary);
    let report = timed(&mut manifest, "verify-haar", || Ok(experiments::verify_haar_moments(d, unitaries, &mut rng)?))?;
    emit_csv(&report.rows, &out.join("haar.csv"))?;
    manifest.add_file(out, "haar.csv")?;
    manifest.write(&out.join(MANIFEST))?;
    writeln!(
        stdout,
        "first-moment max error {:.3e}, second-moment max error {:.3e}, max 5-SE tolerance {:.3e}",
        report.first_moment_max_err, report.second_moment_max_err, report.tolerance
    )?;
    writeln!(
        stdout,
        "{} second-moment tuples, Weingarten terms exercised {:?}",
        report.second_moment_tuples, report.terms_exercised
    )?;
    let ok = report.within_tolerance && report.terms_exercised.iter().all(|&t| t);
    writeln!(stdout, "{}", if ok { "PASS" } else { "FAIL" })?;
    if ok {
        Ok(())
    } else {
        Err(QklError::CheckFailed("Haar moments outside 5 standard errors".into()))
    }
}

/// Unitaries used for the shot-cost estimate.
pub const SHOT_COST_UNITARIES: usize = 100;

fn verify_concentration(args: &RunArgs, stdout: &mut dyn Write) -> Result<()> {
    let d_range = args.qubits.clone().map_or((5..=8).collect(), |q| q.0);
    if d_range.iter().any(|&d| d > 12) {
        return Err(QklError::Validation("verify-concentration supports at most 12 qubits".into()));
    }
    let unitaries = args.unitaries.unwrap_or(1000);
    if unitaries < 2 {
        return Err(QklError::Validation("need at least two unitaries".into()));
    }
    let out = args.prepare_out()?;
    let pool = runner::thread_pool()?;
    let mut manifest = RunManifest::new(
        "verify-concentration",
        json!({"d_range": d_range, "unitaries": unitaries, "probe": "pi/2", "master_seed": args.seed}),
        args.seed,
    );
    let rows = timed(&mut manifest, "concentration", || runner::concentration(&pool, &d_range, unitaries, args.seed))?;
    let shots = timed(&mut manifest, "shot_cost", || {
        runner::shot_cost(&pool, &d_range, unitaries.min(SHOT_COST_UNITARIES), args.seed)
    })?;
    emit_csv(&rows, &out.join("concentration.csv"))?;
    emit_csv(&shots, &out.join("shot_cost.csv"))?;
    manifest.add_file(out, "concentration.csv")?;
    manifest.add_file(out, "shot_cost.csv")?;
    manifest.write(&out.join(MANIFEST))?;
    let mut ok = true;
    for r in &rows {
        let centered = r.mean_dev.abs() <= 5.0 * r.stderr;
        ok &= centered;
        writeln!(
            stdout,
            "d={}: mean deviation {:+.2e} (5 SE {:.2e}) variance {:.3e}",
            r.d,
            r.mean_dev,
            5.0 * r.stderr,
            r.variance
        )?;
    }
    for w in rows.windows(2) {
        let ratio = w[1].variance / w[0].variance;
        let halves = (1.0 / 2.8..=1.0 / 1.4).contains(&ratio);
        ok &= w[1].d != w[0].d + 1 || halves;
        writeln!(stdout, "variance ratio d={}->{}: {ratio:.3}", w[0].d, w[1].d)?;
    }
    for s in &shots {
        writeln!(stdout, "d={}: signal {:.3e}, shots for 10% error {:.3e}", s.d, s.signal, s.shots_needed)?;
    }
    writeln!(stdout, "{}", if ok { "PASS" } else { "FAIL" })?;
    if ok {
        Ok(())
    } else {
        Err(QklError::CheckFailed("concentration checks failed".into()))
    }
}

fn spectral_oracle(stdout: &mut dyn Write) -> Result<()> {
    let checks = oracle::spectral_oracle()?;
    for c in &checks {
        writeln!(stdout, "{}", c.line())?;
    }
    let ok = checks.iter().all(|c| c.passed);
    writeln!(stdout, "{}", if ok { "PASS" } else { "FAIL" })?;
    if ok {
        Ok(())
    } else {
        Err(QklError::CheckFailed("spectral oracle failed".into()))
    }
}

pub fn run(cli: &Cli, stdout: &mut dyn Write) -> Result<()> {
    match &cli.command {
        Command::Generalization(a) => generalization(a, stdout),
        Command::Spectrum(a) => spectrum(a, stdout),
        Command::Alignment(a) => alignment(a, stdout),
        Command::VerifyHaar(a) => verify_haar(a, stdout),
        Command::VerifyConcentration(a) => verify_concentration(a, stdout),
        Command::SpectralOracle => spectral_oracle(stdout),
    }
}

/// Parses `args` (including the program name) and runs; returns the exit code.
pub fn main_with_args<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(stderr, "{text}");
                1
            } else {
                let _ = write!(stdout, "{text}");
                0
            };
        }
    };
    match run(&cli, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}
