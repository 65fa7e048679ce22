//! Monte-Carlo experiments: end-to-end trials, SNR sweeps, and comparison
//! of measured residual variances with state evolution.
//!
//! Trial `i` draws its message from `(message_seed, i)`, its noise from
//! `(noise_seed, i)` and, under the per-trial matrix policy, its matrix from
//! `(matrix_seed, i)`. The same trial index therefore sees the same message
//! and the same unit noise at every SNR and under every schedule.

use std::borrow::Cow;
use std::io::Write;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::amp::{decode, DecodeParams, Termination};
use crate::codec::{awgn, index_codeword, snr_to_sigma2, transmit, DesignMatrix};
use crate::config::{MatrixPolicy, SimConfig};
use crate::error::{Error, Result};
use crate::gf::GaloisField;
use crate::ldpc::SystematicCode;
use crate::rng::{self, derive_seed, Stream};
use crate::se::{approximate_se, PsiTable, SeTrace};

pub const RESULTS_HEADER: &str =
    "ebno_db,trials,bit_errors,ber,codeword_errors,cer,mean_amp_iters,mean_tau2_final,wall_s";

/// Trials decoded together between early-stop checks.
const BATCH: usize = 16;

/// Code and matrix shared by every trial of a run.
#[derive(Debug, Clone)]
pub struct System {
    pub config: SimConfig,
    pub code: SystematicCode,
    fixed_matrix: Option<DesignMatrix>,
}

impl System {
    pub fn build(config: &SimConfig) -> Result<Self> {
        config.validate()?;
        let field = GaloisField::new(config.m)?;
        let code = SystematicCode::random(field, config.l, config.p, config.dv, config.graph_seed)?;
        let fixed_matrix = match config.matrix_policy {
            MatrixPolicy::Fixed => Some(DesignMatrix::new(
                config.n,
                config.q() * config.l,
                config.matrix_seed,
            )),
            MatrixPolicy::PerTrial => None,
        };
        Ok(Self {
            config: config.clone(),
            code,
            fixed_matrix,
        })
    }

    pub fn matrix(&self, trial: u64) -> Cow<'_, DesignMatrix> {
        match &self.fixed_matrix {
            Some(a) => Cow::Borrowed(a),
            None => Cow::Owned(DesignMatrix::new(
                self.config.n,
                self.config.q() * self.config.l,
                derive_seed(self.config.matrix_seed, trial),
            )),
        }
    }

    pub fn sigma2(&self, ebno_db: f64) -> f64 {
        snr_to_sigma2(ebno_db, self.code.info_bits(), self.config.l)
    }

    pub fn decode_params(&self, ebno_db: f64) -> DecodeParams {
        let c = &self.config;
        DecodeParams {
            amp_iters: c.amp_iters,
            final_bp_iters: c.final_bp_iters,
            schedule: c.schedule.clone(),
            ..DecodeParams::new(self.sigma2(ebno_db))
        }
    }

    pub fn message_bits(&self, trial: u64) -> Vec<u8> {
        let mut rng = rng::stream(self.config.message_seed, Stream::Message, trial);
        (0..self.code.info_bits()).map(|_| rng.gen_range(0..2u8)).collect()
    }

    /// Channel output for `trial`, with the transmitted bits and symbols.
    pub fn observation(&self, ebno_db: f64, trial: u64) -> Result<(Vec<u8>, Vec<u16>, Vec<f64>)> {
        let bits = self.message_bits(trial);
        let v = self.code.encode_bits(&bits)?;
        let s = index_codeword(&v, self.config.q())?;
        let x = transmit(&s, &self.matrix(trial))?;
        let y = awgn(&x, self.sigma2(ebno_db), self.config.noise_seed, trial)?;
        Ok((bits, v, y))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialOutcome {
    pub trial: u64,
    pub bit_errors: usize,
    pub symbol_errors: usize,
    pub codeword_error: bool,
    pub amp_iters: usize,
    pub tau2_final: f64,
    pub aborted: bool,
    pub tau2_trace: Vec<f64>,
}

pub fn run_trial(system: &System, ebno_db: f64, trial: u64, params: &DecodeParams) -> Result<TrialOutcome> {
    let (bits, v, y) = system.observation(ebno_db, trial)?;
    let a = system.matrix(trial);
    let res = decode(&y, &a, &system.code, params)?;
    let bit_errors = res.bits.iter().zip(&bits).filter(|(a, b)| a != b).count();
    let symbol_errors = res.symbols.iter().zip(&v).filter(|(a, b)| a != b).count();
    let aborted = res.termination == Termination::NonFinite;
    Ok(TrialOutcome {
        trial,
        bit_errors,
        symbol_errors,
        codeword_error: symbol_errors > 0 || aborted,
        amp_iters: res.iterations_used,
        tau2_final: *res.tau2_trace.last().unwrap(),
        aborted,
        tau2_trace: res.tau2_trace,
    })
}

/// One line of the results table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimRow {
    pub ebno_db: f64,
    pub trials: usize,
    pub bit_errors: usize,
    pub ber: f64,
    pub codeword_errors: usize,
    pub cer: f64,
    pub mean_amp_iters: f64,
    pub mean_tau2_final: f64,
    pub wall_s: f64,
    pub aborts: usize,
}

impl SimRow {
    pub fn from_outcomes(ebno_db: f64, info_bits: usize, outcomes: &[TrialOutcome], wall_s: f64) -> Self {
        let t = outcomes.len();
        let bit_errors = outcomes.iter().map(|o| o.bit_errors).sum();
        let codeword_errors = outcomes.iter().filter(|o| o.codeword_error).count();
        let tf = t.max(1) as f64;
        Self {
            ebno_db,
            trials: t,
            bit_errors,
            ber: bit_errors as f64 / (tf * info_bits as f64),
            codeword_errors,
            cer: codeword_errors as f64 / tf,
            mean_amp_iters: outcomes.iter().map(|o| o.amp_iters as f64).sum::<f64>() / tf,
            mean_tau2_final: outcomes.iter().map(|o| o.tau2_final).sum::<f64>() / tf,
            wall_s,
            aborts: outcomes.iter().filter(|o| o.aborted).count(),
        }
    }

    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{:.6e},{},{:.6e},{:.4},{:.6e},{:.3}",
            self.ebno_db,
            self.trials,
            self.bit_errors,
            self.ber,
            self.codeword_errors,
            self.cer,
            self.mean_amp_iters,
            self.mean_tau2_final,
            self.wall_s
        )
    }
}

#[derive(Debug, Clone)]
pub struct PointResult {
    pub row: SimRow,
    pub outcomes: Vec<TrialOutcome>,
}

/// Trials at one SNR until `trials` are done or `target_errors` codeword
/// errors have been seen. The set of trials run does not depend on the
/// thread count.
pub fn run_point(system: &System, ebno_db: f64) -> Result<PointResult> {
    let params = system.decode_params(ebno_db);
    run_point_with(system, ebno_db, &params)
}

pub fn run_point_with(system: &System, ebno_db: f64, params: &DecodeParams) -> Result<PointResult> {
    let start = Instant::now();
    let c = &system.config;
    let mut outcomes = Vec::new();
    let mut errors = 0;
    'outer: while outcomes.len() < c.trials {
        let lo = outcomes.len();
        let hi = (lo + BATCH).min(c.trials);
        let batch = (lo..hi)
            .into_par_iter()
            .map(|i| run_trial(system, ebno_db, i as u64, params))
            .collect::<Result<Vec<_>>>()?;
        for o in batch {
            errors += o.codeword_error as usize;
            outcomes.push(o);
            if errors >= c.target_errors {
                break 'outer;
            }
        }
    }
    let row = SimRow::from_outcomes(ebno_db, system.code.info_bits(), &outcomes, start.elapsed().as_secs_f64());
    Ok(PointResult { row, outcomes })
}

pub fn sweep(system: &System) -> Result<Vec<PointResult>> {
    system
        .config
        .ebno_db
        .iter()
        .map(|&e| run_point(system, e))
        .collect()
}

pub fn write_results_csv(rows: &[SimRow], mut w: impl Write) -> Result<()> {
    writeln!(w, "{RESULTS_HEADER}")?;
    for r in rows {
        writeln!(w, "{}", r.csv_line())?;
    }
    Ok(())
}

/// Declarative description of the BER/CER plot for `csv_name`.
pub fn plot_config(csv_name: &str) -> serde_json::Value {
    json!({
        "data": csv_name,
        "x": {"column": "ebno_db", "label": "Eb/N0 (dB)", "scale": "linear"},
        "y": [
            {"column": "ber", "label": "BER", "scale": "log"},
            {"column": "cer", "label": "CER", "scale": "log"}
        ]
    })
}

/// Run metadata: configuration, seeds, field and code facts, source version.
pub fn metadata(system: &System) -> serde_json::Value {
    let code = &system.code.code;
    json!({
        "config": system.config,
        "q": system.config.q(),
        "field_polynomial": format!("{:#x}", code.field().polynomial()),
        "info_bits": system.code.info_bits(),
        "overall_rate": system.config.overall_rate(),
        "outer_rate": system.code.encoder.k() as f64 / system.config.l as f64,
        "girth": code.girth(),
        "matrix_policy": system.config.matrix_policy.as_str(),
        "git_describe": git_describe(),
        "version": env!("CARGO_PKG_VERSION"),
    })
}

fn git_describe() -> String {
    std::process::Command::new("git")
        .args(["describe", "--always", "--dirty", "--tags"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| s.trim().to_string())
        .unwrap_or_else(|| "unknown".into())
}

/// State-evolution prediction for the system's graph at `ebno_db`.
pub fn se_prediction(system: &System, ebno_db: f64, psi: &PsiTable) -> Result<SeTrace> {
    let c = &system.config;
    approximate_se(&system.code.code, c.n, system.sigma2(ebno_db), c.amp_iters, &c.schedule, psi)
}

pub fn write_se_csv(trace: &SeTrace, mut w: impl Write) -> Result<()> {
    writeln!(w, "t,tau2_predicted")?;
    for (t, v) in trace.tau2.iter().enumerate() {
        writeln!(w, "{t},{v:.9e}")?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeVsTruthRow {
    pub t: usize,
    pub tau2_mc: f64,
    pub tau2_mc_se: f64,
    pub tau2_predicted: f64,
    pub rel_err: f64,
}

/// Mean measured `‖z_t‖²/n` over `trials` full-length decodes next to the
/// state-evolution prediction.
pub fn se_vs_truth(system: &System, ebno_db: f64, trials: usize, psi: &PsiTable) -> Result<Vec<SeVsTruthRow>> {
    if trials < 2 {
        return Err(Error::Config("se-vs-truth needs at least 2 trials".into()));
    }
    let mut params = system.decode_params(ebno_db);
    params.early_exit = false;
    params.final_bp_iters = 0;
    let outcomes = (0..trials as u64)
        .into_par_iter()
        .map(|i| run_trial(system, ebno_db, i, &params))
        .collect::<Result<Vec<_>>>()?;
    let pred = se_prediction(system, ebno_db, psi)?;
    let len = outcomes.iter().map(|o| o.tau2_trace.len()).min().unwrap_or(0).min(pred.tau2.len());
    let nt = trials as f64;
    Ok((0..len)
        .map(|t| {
            let mean = outcomes.iter().map(|o| o.tau2_trace[t]).sum::<f64>() / nt;
            let var = outcomes.iter().map(|o| (o.tau2_trace[t] - mean).powi(2)).sum::<f64>() / (nt - 1.0);
            let p = pred.tau2[t];
            SeVsTruthRow {
                t,
                tau2_mc: mean,
                tau2_mc_se: (var / nt).sqrt(),
                tau2_predicted: p,
                rel_err: (p - mean).abs() / mean,
            }
        })
        .collect())
}

pub fn write_se_vs_truth_csv(rows: &[SeVsTruthRow], mut w: impl Write) -> Result<()> {
    writeln!(w, "t,tau2_mc,tau2_mc_se,tau2_predicted,rel_err")?;
    for r in rows {
        writeln!(
            w,
            "{},{:.9e},{:.9e},{:.9e},{:.6}",
            r.t, r.tau2_mc, r.tau2_mc_se, r.tau2_predicted, r.rel_err
        )?;
    }
    Ok(())
}

pub fn write_rate_csv(table: &crate::se::RateTable, mut w: impl Write) -> Result<()> {
    writeln!(w, "R_ldpc,L,P,tau2_final_minus_sigma2")?;
    for r in &table.rows {
        writeln!(w, "{:.6},{},{},{:.9e}", r.r_ldpc, r.l, r.p, r.tau2_final_minus_sigma2)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SimConfig {
        let mut c = SimConfig::with_seed(3);
        c.l = 32;
        c.p = 4;
        c.n = 160;
        c.trials = 20;
        c.target_errors = 3;
        c.ebno_db = vec![2.0, 8.0];
        c
    }

    #[test]
    fn high_snr_point_is_clean() {
        let sys = System::build(&small()).unwrap();
        let p = run_point(&sys, 12.0).unwrap();
        assert_eq!(p.row.trials, 20);
        assert_eq!(p.row.codeword_errors, 0);
        assert_eq!(p.row.ber, 0.0);
    }

    #[test]
    fn early_stop_counts_exact_trials() {
        let sys = System::build(&small()).unwrap();
        let p = run_point(&sys, -5.0).unwrap();
        assert_eq!(p.row.codeword_errors, 3);
        assert_eq!(p.outcomes.len(), p.row.trials);
        assert!(p.outcomes.last().unwrap().codeword_error);
        let bits: usize = p.outcomes.iter().map(|o| o.bit_errors).sum();
        assert_eq!(p.row.bit_errors, bits);
        assert_eq!(p.row.ber, bits as f64 / (p.row.trials * sys.code.info_bits()) as f64);
    }

    #[test]
    fn reruns_are_identical() {
        let sys = System::build(&small()).unwrap();
        let a = run_point(&sys, 4.0).unwrap();
        let b = run_point(&sys, 4.0).unwrap();
        assert_eq!(a.outcomes, b.outcomes);
    }

    #[test]
    fn per_trial_matrices_differ() {
        let mut c = small();
        c.matrix_policy = MatrixPolicy::PerTrial;
        let sys = System::build(&c).unwrap();
        assert_ne!(sys.matrix(0).column(0), sys.matrix(1).column(0));
        let fixed = System::build(&small()).unwrap();
        assert_eq!(fixed.matrix(0).column(0), fixed.matrix(1).column(0));
    }

    #[test]
    fn csv_schema() {
        let sys = System::build(&small()).unwrap();
        let rows: Vec<SimRow> = sweep(&sys).unwrap().into_iter().map(|p| p.row).collect();
        let mut out = Vec::new();
        write_results_csv(&rows, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], RESULTS_HEADER);
        assert_eq!(lines.len(), 3);
        assert!(lines[1..].iter().all(|l| l.split(',').count() == 9));
    }
}
