mod config;

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use levy_kle::kle_basis::{uniform_grid, variance_capture, BasisTable, KleBasis};
use levy_kle::monte_carlo::mc_mean_study;
use levy_kle::shot_noise::{extend_dimension, sample_coeffs_indexed, CoefficientSample, ShotConfig};
use levy_kle::special_fn::{
    build_e1_inverse, e1_inverse_from_rows, exp_integral_e1, E1_INVERSE_DOMAIN_HI, E1_INVERSE_DOMAIN_LO,
    E1_INVERSE_POINTS,
};
use levy_kle::validation::{run_all, ValidationOptions};
use rayon::prelude::*;

use crate::config::{ExperimentConfig, Overrides};

#[derive(Parser)]
#[command(name = "levy-kle", version, about = "Karhunen-Loeve simulation of Levy processes")]
struct Cli {
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true, env = "LEVY_KLE_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write reconstructed sample paths, one CSV per dimension.
    SimulatePaths {
        #[command(flatten)]
        overrides: Overrides,
        /// Also dump the coefficient vectors of the largest dimension.
        #[arg(long)]
        coefficients: bool,
    },
    /// Monte Carlo means of the truncated expansion against `mean_rate * t`.
    McMean {
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run the oracle suites and write a JSON report.
    Validate {
        #[command(flatten)]
        overrides: Overrides,
        /// Report file; printed to stdout when omitted.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Fraction of variance captured by the first d terms.
    VarianceCapture {
        #[arg(long, value_delimiter = ',', default_value = "2,5,21")]
        d_list: Vec<usize>,
    },
    /// Build, dump or check the E1 inverse table.
    E1Table {
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = TableFormat::Csv)]
        format: TableFormat,
        #[arg(long, default_value_t = E1_INVERSE_POINTS)]
        points: usize,
        #[arg(long, default_value_t = E1_INVERSE_DOMAIN_LO)]
        domain_lo: f64,
        #[arg(long, default_value_t = E1_INVERSE_DOMAIN_HI)]
        domain_hi: f64,
        /// Load a dumped table and report its round-trip error instead.
        #[arg(long)]
        load: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TableFormat {
    Csv,
    Bin,
}

/// Failure classes mapped to exit codes.
enum Failure {
    Config(anyhow::Error),
    Run(anyhow::Error),
    Validation,
}

const BIN_MAGIC: &[u8; 8] = b"E1INVTB1";

fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

fn write_file(path: &Path, body: &str) -> anyhow::Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
    }
    fs::write(path, body).with_context(|| format!("writing {}", path.display()))
}

fn simulate_paths(cfg: &ExperimentConfig, coefficients: bool) -> anyhow::Result<Vec<PathBuf>> {
    let model = cfg.model.build()?;
    let shot = ShotConfig {
        retain_record: true,
        ..cfg.shot()
    };
    let d0 = cfg.d_list[0];
    let basis0 = KleBasis::new(cfg.horizon, d0, model.alpha())?;
    let grid = uniform_grid(cfg.horizon, cfg.grid_n);
    // smallest dimension drawn once, larger ones grown from the same arrivals
    let nested: Vec<Vec<CoefficientSample>> = (0..cfg.n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut s = sample_coeffs_indexed(&model, &basis0, &shot, i)?;
            let mut out = Vec::with_capacity(cfg.d_list.len());
            for &d in &cfg.d_list {
                s = extend_dimension(&s, d)?;
                out.push(s.clone());
            }
            Ok(out)
        })
        .collect::<levy_kle::Result<_>>()?;
    let mut written = Vec::new();
    for (di, &d) in cfg.d_list.iter().enumerate() {
        let basis = KleBasis::new(cfg.horizon, d, model.alpha())?;
        let table = BasisTable::new(&basis, &grid)?;
        let mut body = String::new();
        body.push_str(if cfg.n_paths == 1 { "t,value\n" } else { "path_id,t,value\n" });
        let mut values = vec![0.0; grid.len()];
        for (p, samples) in nested.iter().enumerate() {
            table.evaluate_into(&samples[di].z, cfg.mode, model.mean_rate, &mut values)?;
            for (t, v) in grid.iter().zip(&values) {
                if cfg.n_paths > 1 {
                    write!(body, "{p},")?;
                }
                writeln!(body, "{},{}", fmt_f64(*t), fmt_f64(*v))?;
            }
        }
        let path = cfg.output_dir.join(format!("paths_d{d}.csv"));
        write_file(&path, &body)?;
        written.push(path);
    }
    if coefficients {
        let mut body = String::from("sample_id,k,z_k,n_terms_pos,n_terms_neg,seed\n");
        for (p, samples) in nested.iter().enumerate() {
            let s = samples.last().expect("d_list is nonempty");
            for (k, z) in s.z.iter().enumerate() {
                writeln!(body, "{p},{},{},{},{},{}", k + 1, fmt_f64(*z), s.n_terms_pos, s.n_terms_neg, s.seed)?;
            }
        }
        let path = cfg.output_dir.join("coefficients.csv");
        write_file(&path, &body)?;
        written.push(path);
    }
    Ok(written)
}

fn mc_mean(cfg: &ExperimentConfig) -> anyhow::Result<Vec<PathBuf>> {
    let model = cfg.model.build()?;
    let grid = uniform_grid(cfg.horizon, cfg.grid_n);
    if cfg.n_paths < 2 {
        bail!("mc-mean needs n_paths >= 2");
    }
    let study = mc_mean_study(&model, cfg.horizon, &cfg.d_list, &cfg.shot(), &grid, cfg.n_paths, cfg.mode)?;
    let mut written = Vec::new();
    for (d, rows) in study {
        let mut body = String::from("t,mc_mean,expected,abs_err,stderr\n");
        for r in rows {
            writeln!(
                body,
                "{},{},{},{},{}",
                fmt_f64(r.t),
                fmt_f64(r.mc_mean),
                fmt_f64(r.expected),
                fmt_f64(r.abs_err),
                fmt_f64(r.stderr)
            )?;
        }
        let path = cfg.output_dir.join(format!("mc_mean_d{d}.csv"));
        write_file(&path, &body)?;
        written.push(path);
    }
    Ok(written)
}

fn validate(cfg: &ExperimentConfig, report: Option<&Path>) -> anyhow::Result<bool> {
    let model = cfg.model.build()?;
    let opts = ValidationOptions {
        horizon: cfg.horizon,
        n_samples: cfg.n_paths.max(2),
        ks_samples: cfg.ks_samples,
        ks_dim: cfg.ks_dim,
        seed: cfg.seed,
        shot: cfg.shot(),
        ..ValidationOptions::default()
    };
    let rep = run_all(&model, &opts)?;
    let json = serde_json::to_string_pretty(&rep)?;
    match report {
        Some(p) => write_file(p, &(json + "\n"))?,
        None => println!("{json}"),
    }
    Ok(rep.passed)
}

fn e1_table(
    out: Option<&Path>,
    format: TableFormat,
    points: usize,
    lo: f64,
    hi: f64,
    load: Option<&Path>,
) -> anyhow::Result<()> {
    if let Some(path) = load {
        let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        let (xs, ys) = if bytes.starts_with(BIN_MAGIC) {
            read_bin(&bytes[BIN_MAGIC.len()..])?
        } else {
            read_csv(std::str::from_utf8(&bytes)?)?
        };
        let table = e1_inverse_from_rows(xs, ys)?;
        let (xl, xh) = (table.breakpoints()[0], *table.breakpoints().last().unwrap());
        let mut worst: f64 = 0.0;
        for i in 0..=1000 {
            let x = xl * (xh / xl).powf(i as f64 / 1000.0);
            let back = table.invert(exp_integral_e1(x)?);
            worst = worst.max((back - x).abs() / x.max(1.0));
        }
        println!("points,{}", table.len());
        println!("max_value_gap,{}", fmt_f64(table.max_value_gap()));
        println!("max_roundtrip_error,{}", fmt_f64(worst));
        return Ok(());
    }
    let table = build_e1_inverse(lo, hi, points)?;
    let mut sink: Box<dyn Write> = match out {
        Some(p) => Box::new(io::BufWriter::new(
            fs::File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    };
    match format {
        TableFormat::Csv => {
            writeln!(sink, "x,e1")?;
            for (x, y) in table.breakpoints().iter().zip(table.values()) {
                writeln!(sink, "{},{}", fmt_f64(*x), fmt_f64(*y))?;
            }
        }
        TableFormat::Bin => {
            sink.write_all(BIN_MAGIC)?;
            sink.write_all(&(table.len() as u64).to_le_bytes())?;
            for (x, y) in table.breakpoints().iter().zip(table.values()) {
                sink.write_all(&x.to_le_bytes())?;
                sink.write_all(&y.to_le_bytes())?;
            }
        }
    }
    sink.flush()?;
    Ok(())
}

fn read_bin(bytes: &[u8]) -> anyhow::Result<(Vec<f64>, Vec<f64>)> {
    let word = |i: usize| -> anyhow::Result<[u8; 8]> {
        bytes
            .get(8 * i..8 * i + 8)
            .and_then(|b| b.try_into().ok())
            .context("truncated table file")
    };
    let n = u64::from_le_bytes(word(0)?) as usize;
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    for i in 0..n {
        xs.push(f64::from_le_bytes(word(1 + 2 * i)?));
        ys.push(f64::from_le_bytes(word(2 + 2 * i)?));
    }
    Ok((xs, ys))
}

fn read_csv(text: &str) -> anyhow::Result<(Vec<f64>, Vec<f64>)> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for line in text.lines().skip(1).filter(|l| !l.is_empty()) {
        let (x, y) = line.split_once(',').context("expected two columns")?;
        xs.push(x.trim().parse()?);
        ys.push(y.trim().parse()?);
    }
    Ok((xs, ys))
}

fn load(overrides: &Overrides) -> Result<ExperimentConfig, Failure> {
    ExperimentConfig::load(&overrides.config, overrides).map_err(Failure::Config)
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Config(e.into()))?;
    }
    match cli.command {
        Command::SimulatePaths { overrides, coefficients } => {
            let cfg = load(&overrides)?;
            for p in simulate_paths(&cfg, coefficients).map_err(Failure::Run)? {
                println!("{}", p.display());
            }
        }
        Command::McMean { overrides } => {
            let cfg = load(&overrides)?;
            for p in mc_mean(&cfg).map_err(Failure::Run)? {
                println!("{}", p.display());
            }
        }
        Command::Validate { overrides, report } => {
            let cfg = load(&overrides)?;
            if !validate(&cfg, report.as_deref()).map_err(Failure::Run)? {
                return Err(Failure::Validation);
            }
        }
        Command::VarianceCapture { d_list } => {
            if d_list.is_empty() || d_list.contains(&0) {
                return Err(Failure::Config(anyhow::anyhow!("d_list must hold positive integers")));
            }
            println!("d,capture");
            for d in d_list {
                println!("{d},{}", fmt_f64(variance_capture(d)));
            }
        }
        Command::E1Table {
            out,
            format,
            points,
            domain_lo,
            domain_hi,
            load,
        } => e1_table(out.as_deref(), format, points, domain_lo, domain_hi, load.as_deref()).map_err(Failure::Run)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation) => {
            eprintln!("validation failed");
            ExitCode::from(1)
        }
        Err(Failure::Config(e)) => {
            eprintln!("config error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}
