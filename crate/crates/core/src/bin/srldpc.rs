use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use srldpc::amp::{decode, DecodeParams};
use srldpc::codec::{awgn, index_codeword, transmit};
use srldpc::config::SimConfig;
use srldpc::se::{tune_rate, PsiTable, RateSweep};
use srldpc::sim::{self, System};
use srldpc::Error;

#[derive(Parser)]
#[command(name = "srldpc", version, about = "Sparse regression LDPC codes: simulation and analysis")]
struct Cli {
    /// Master seed; replaces every seed in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// BER/CER sweep over the configured Eb/N0 points.
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// State-evolution prediction of the residual variance.
    Se {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        ebno: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Measured residual variance against the state-evolution prediction.
    SeVsTruth {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        ebno: f64,
        #[arg(long)]
        trials: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// State evolution across outer-code rates at fixed B and n.
    TuneRate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', required = true)]
        rates: Vec<f64>,
        /// Defaults to the first configured Eb/N0.
        #[arg(long)]
        ebno: Option<f64>,
        #[arg(long, default_value_t = 20)]
        iters: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Encode a bit file into channel samples, optionally through AWGN.
    Encode {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        bits: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        ebno: Option<f64>,
        /// Noise stream index.
        #[arg(long, default_value_t = 0)]
        index: u64,
    },
    /// Decode channel samples into information bits.
    Decode {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        obs: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Used only to set the residual floor.
        #[arg(long)]
        ebno: Option<f64>,
    },
}

fn load_config(path: Option<&Path>, seed: Option<u64>) -> srldpc::Result<SimConfig> {
    let mut c = match path {
        Some(p) => SimConfig::load(p)?,
        None => SimConfig::default(),
    };
    if let Some(s) = seed {
        c.reseed(s);
    }
    Ok(c)
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn sink(path: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(create(p)?),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn read_bits(path: &Path) -> anyhow::Result<Vec<u8>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.chars()
        .filter(|c| !c.is_whitespace())
        .map(|c| match c {
            '0' => Ok(0),
            '1' => Ok(1),
            _ => Err(anyhow::anyhow!(Error::Parse(format!("bad bit character {c:?}")))),
        })
        .collect()
}

fn read_samples(path: &Path) -> anyhow::Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.split_whitespace()
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| anyhow::anyhow!(Error::Parse(format!("bad sample {t:?}"))))
        })
        .collect()
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    let seed = cli.seed;
    match cli.cmd {
        Cmd::Simulate { config, out } => {
            let c = load_config(config.as_deref(), seed)?;
            let system = System::build(&c)?;
            let mut rows = Vec::new();
            for &e in &c.ebno_db {
                let p = sim::run_point(&system, e)?;
                eprintln!("{}", p.row.csv_line());
                rows.push(p.row);
            }
            let mut w = create(&out)?;
            sim::write_results_csv(&rows, &mut w)?;
            w.flush()?;
            let name = out.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            let mut w = create(&with_suffix(&out, ".plot.json"))?;
            serde_json::to_writer_pretty(&mut w, &sim::plot_config(&name))?;
            w.flush()?;
            let mut w = create(&with_suffix(&out, ".meta.json"))?;
            serde_json::to_writer_pretty(&mut w, &sim::metadata(&system))?;
            w.flush()?;
        }
        Cmd::Se { config, ebno, out } => {
            let c = load_config(config.as_deref(), seed)?;
            let system = System::build(&c)?;
            let psi = PsiTable::build_with(
                c.q(),
                srldpc::se::PSI_TAU2_MIN,
                srldpc::se::PSI_TAU2_MAX,
                srldpc::se::DEFAULT_PSI_POINTS,
                c.psi_samples,
                c.seed,
            )?;
            let trace = sim::se_prediction(&system, ebno, &psi)?;
            let mut w = create(&out)?;
            sim::write_se_csv(&trace, &mut w)?;
            w.flush()?;
            if matches!(c.schedule, srldpc::bp::Schedule::Bp1Kg) {
                eprintln!("note: prediction uses fresh graph messages each iteration");
            }
            eprintln!("converged: {}", trace.converged);
        }
        Cmd::SeVsTruth { config, ebno, trials, out } => {
            let c = load_config(config.as_deref(), seed)?;
            if trials < 2 {
                return Err(Error::Config("--trials must be at least 2".into()).into());
            }
            let system = System::build(&c)?;
            let psi = PsiTable::build_with(
                c.q(),
                srldpc::se::PSI_TAU2_MIN,
                srldpc::se::PSI_TAU2_MAX,
                srldpc::se::DEFAULT_PSI_POINTS,
                c.psi_samples,
                c.seed,
            )?;
            let rows = sim::se_vs_truth(&system, ebno, trials, &psi)?;
            let mut w = sink(out.as_deref())?;
            sim::write_se_vs_truth_csv(&rows, &mut w)?;
            w.flush()?;
        }
        Cmd::TuneRate { config, rates, ebno, iters, out } => {
            let c = load_config(config.as_deref(), seed)?;
            let psi = PsiTable::build_with(
                c.q(),
                srldpc::se::PSI_TAU2_MIN,
                srldpc::se::PSI_TAU2_MAX,
                srldpc::se::DEFAULT_PSI_POINTS,
                c.psi_samples,
                c.seed,
            )?;
            let sweep = RateSweep {
                m: c.m,
                k: c.l - c.p,
                n: c.n,
                dv: c.dv,
                ebno_db: ebno.unwrap_or(c.ebno_db[0]),
                iters,
                schedule: c.schedule.clone(),
                graph_seed: c.graph_seed,
                rates,
            };
            let table = tune_rate(&sweep, &psi)?;
            for (r, why) in &table.skipped {
                eprintln!("warning: skipped rate {r}: {why}");
            }
            let mut w = sink(out.as_deref())?;
            sim::write_rate_csv(&table, &mut w)?;
            w.flush()?;
            if let Some(b) = table.best() {
                eprintln!("best: R_ldpc = {:.6} (L = {}, P = {})", b.r_ldpc, b.l, b.p);
            }
        }
        Cmd::Encode { config, bits, out, ebno, index } => {
            let c = load_config(config.as_deref(), seed)?;
            let system = System::build(&c)?;
            let bits = read_bits(&bits)?;
            let v = system.code.encode_bits(&bits)?;
            let s = index_codeword(&v, c.q())?;
            let a = system.matrix(index);
            let mut x = transmit(&s, &a)?;
            if let Some(e) = ebno {
                x = awgn(&x, system.sigma2(e), c.noise_seed, index)?;
            }
            let mut w = create(&out)?;
            for v in x {
                writeln!(w, "{v:.17e}")?;
            }
            w.flush()?;
        }
        Cmd::Decode { config, obs, out, ebno } => {
            let c = load_config(config.as_deref(), seed)?;
            let system = System::build(&c)?;
            let y = read_samples(&obs)?;
            let a = system.matrix(0);
            let params = match ebno {
                Some(e) => system.decode_params(e),
                None => DecodeParams {
                    amp_iters: c.amp_iters,
                    final_bp_iters: c.final_bp_iters,
                    schedule: c.schedule.clone(),
                    ..DecodeParams::new(0.0)
                },
            };
            let res = decode(&y, &a, &system.code, &params)?;
            let mut w = create(&out)?;
            let text: String = res.bits.iter().map(|b| if *b == 1 { '1' } else { '0' }).collect();
            writeln!(w, "{text}")?;
            w.flush()?;
            eprintln!(
                "success: {} ({}, {} AMP iterations)",
                res.success,
                res.termination.as_str(),
                res.iterations_used
            );
        }
    }
    Ok(())
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
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let config_error = matches!(
                e.downcast_ref::<Error>(),
                Some(Error::Config(_) | Error::Parse(_))
            );
            ExitCode::from(if config_error { 1 } else { 2 })
        }
    }
}
