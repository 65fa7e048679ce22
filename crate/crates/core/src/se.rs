//! Scalar state evolution for the BP-denoised AMP decoder, and rate sweeps
//! built on it.
//!
//! Graph messages are tracked as the expected belief mass on the true
//! symbol. Check nodes combine these masses in closed form; variable nodes
//! convert them to equivalent Gaussian noise variances through `Ψ` and add
//! precisions.

use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::bp::Schedule;
use crate::error::{Error, Result};
use crate::gf::GaloisField;
use crate::ldpc::LdpcCode;
use crate::rng::{self, Stream};
use rand::Rng;

pub const DEFAULT_PSI_SAMPLES: usize = 200_000;
pub const DEFAULT_PSI_POINTS: usize = 64;
pub const PSI_TAU2_MIN: f64 = 1e-4;
pub const PSI_TAU2_MAX: f64 = 1e3;
/// Error level below which the union bound replaces the sampled error.
pub const TAIL_SWITCH: f64 = 1e-3;

/// Monte-Carlo table of `Ψ(τ²) = E[α(0)]` for `r = e₀ + τζ`.
///
/// The table holds `log(1 − Ψ)` so that the residual error stays resolved
/// when `Ψ` is within rounding of one. Where the error is too rare to
/// sample (union bound below [`TAIL_SWITCH`]) the union bound itself,
/// `q − 1` times a two-symbol error computed by quadrature, is used; it is
/// tight to second order there. Below the grid the error is extrapolated
/// as `exp(−c/τ²)`.
#[derive(Debug, Clone)]
pub struct PsiTable {
    q: usize,
    samples: usize,
    seed: u64,
    log_tau2: Vec<f64>,
    log_mse: Vec<f64>,
    std_errors: Vec<f64>,
    slopes: Vec<f64>,
}

impl PsiTable {
    pub fn build(q: usize, seed: u64) -> Result<Self> {
        Self::build_with(q, PSI_TAU2_MIN, PSI_TAU2_MAX, DEFAULT_PSI_POINTS, DEFAULT_PSI_SAMPLES, seed)
    }

    pub fn build_with(
        q: usize,
        tau2_min: f64,
        tau2_max: f64,
        points: usize,
        samples: usize,
        seed: u64,
    ) -> Result<Self> {
        if q < 2 || !q.is_power_of_two() {
            return Err(Error::Domain(format!("q must be a power of two ≥ 2, got {q}")));
        }
        if points < 2 || !(tau2_min > 0.0 && tau2_max > tau2_min) {
            return Err(Error::Domain("bad Ψ grid".into()));
        }
        if samples < 100 {
            return Err(Error::Domain(format!("too few Ψ samples: {samples}")));
        }
        // differences ζ_g − ζ_0 shared by every grid point
        let mut rng = rng::stream(seed, Stream::Psi, q as u64);
        let mut diffs = Vec::with_capacity(samples * (q - 1));
        for _ in 0..samples {
            let z0: f64 = rng.sample(StandardNormal);
            for _ in 1..q {
                let z: f64 = rng.sample(StandardNormal);
                diffs.push(z - z0);
            }
        }
        let (lo, hi) = (tau2_min.ln(), tau2_max.ln());
        let log_tau2: Vec<f64> = (0..points)
            .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
            .collect();
        let raw: Vec<(f64, f64)> = log_tau2
            .par_iter()
            .map(|&lt| {
                let tau2 = lt.exp();
                let (lm, se) = log_mean_error(&diffs, q, tau2);
                let union = ((q - 1) as f64).ln() + log_pairwise_error(tau2);
                if union < TAIL_SWITCH.ln() {
                    (union, se)
                } else {
                    (lm, se)
                }
            })
            .collect();
        let (log_mse, std_errors): (Vec<f64>, Vec<f64>) = raw.into_iter().unzip();
        let neg: Vec<f64> = log_mse.iter().map(|x| -x).collect();
        let log_mse: Vec<f64> = isotonic_decreasing(&neg).into_iter().map(|x| -x).collect();
        let slopes = pchip_slopes(&log_tau2, &log_mse);
        Ok(Self {
            q,
            samples,
            seed,
            log_tau2,
            log_mse,
            std_errors,
            slopes,
        })
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// `(τ², Ψ, standard error)` at each grid point.
    pub fn grid(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.log_tau2
            .iter()
            .zip(&self.log_mse)
            .zip(&self.std_errors)
            .map(|((l, v), s)| (l.exp(), 1.0 - v.exp(), *s))
    }

    pub fn tau2_range(&self) -> (f64, f64) {
        (self.log_tau2[0].exp(), self.log_tau2[self.log_tau2.len() - 1].exp())
    }

    fn max_mse(&self) -> f64 {
        (self.q as f64 - 1.0) / self.q as f64
    }

    /// `log(1 − Ψ(τ²))` for finite positive `τ²`.
    fn log_mse_at(&self, tau2: f64) -> f64 {
        let x = tau2.ln();
        let n = self.log_tau2.len();
        if x <= self.log_tau2[0] {
            return self.log_mse[0] * (self.log_tau2[0] - x).exp();
        }
        if x >= self.log_tau2[n - 1] {
            return self.log_mse[n - 1];
        }
        let i = match self.log_tau2.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
            Ok(i) => return self.log_mse[i],
            Err(i) => i - 1,
        };
        let (x0, x1) = (self.log_tau2[i], self.log_tau2[i + 1]);
        let h = x1 - x0;
        let t = (x - x0) / h;
        let (y0, y1) = (self.log_mse[i], self.log_mse[i + 1]);
        let (m0, m1) = (self.slopes[i], self.slopes[i + 1]);
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * y0
            + (t3 - 2.0 * t2 + t) * h * m0
            + (-2.0 * t3 + 3.0 * t2) * y1
            + (t3 - t2) * h * m1
    }

    /// `1 − Ψ(τ²)`, the section MSE at effective variance `τ²`.
    pub fn mse(&self, tau2: f64) -> f64 {
        if tau2 <= 0.0 {
            return 0.0;
        }
        if tau2.is_infinite() {
            return self.max_mse();
        }
        self.log_mse_at(tau2).exp().min(self.max_mse())
    }

    pub fn psi(&self, tau2: f64) -> f64 {
        1.0 - self.mse(tau2)
    }

    /// Inverse of [`mse`](Self::mse). Errors at or above the right end of
    /// the table map to `∞` (no information).
    pub fn mse_inv(&self, e: f64) -> f64 {
        if e <= 0.0 {
            return 0.0;
        }
        let n = self.log_mse.len();
        let le = e.ln();
        if le >= self.log_mse[n - 1] {
            return f64::INFINITY;
        }
        if le <= self.log_mse[0] {
            // invert the exp(−c/τ²) tail
            return (self.log_tau2[0] + (self.log_mse[0] / le).ln()).exp();
        }
        let (mut lo, mut hi) = (self.log_tau2[0], self.log_tau2[n - 1]);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.log_mse_at(mid.exp()) < le {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-13 {
                break;
            }
        }
        (0.5 * (lo + hi)).exp()
    }

    /// `Ψ⁻¹(x)`.
    pub fn psi_inv(&self, x: f64) -> f64 {
        self.mse_inv(1.0 - x)
    }
}

/// `log E[1 − α(0)]` at `τ²` and the standard error of the `α(0)` mean.
fn log_mean_error(diffs: &[f64], q: usize, tau2: f64) -> (f64, f64) {
    let tau = tau2.sqrt();
    let inv = 1.0 / tau2;
    let n = diffs.len() / (q - 1);
    let mut logs = Vec::with_capacity(n);
    let mut sum = 0.0;
    let mut sum2 = 0.0;
    for d in diffs.chunks_exact(q - 1) {
        // exponents of α(g)/α(0), g ≠ 0
        let mut m = f64::NEG_INFINITY;
        for &x in d {
            m = m.max((tau * x - 1.0) * inv);
        }
        let mut s = 0.0;
        for &x in d {
            s += ((tau * x - 1.0) * inv - m).exp();
        }
        let lse_rest = m + s.ln();
        // log(1 − α(0)) = lse_rest − log(1 + exp(lse_rest))
        let l = if lse_rest > 0.0 {
            -(-lse_rest).exp().ln_1p()
        } else {
            lse_rest - lse_rest.exp().ln_1p()
        };
        logs.push(l);
        let err = l.exp();
        sum += err;
        sum2 += err * err;
    }
    let mx = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lm = mx + (logs.iter().map(|l| (l - mx).exp()).sum::<f64>() / n as f64).ln();
    let mean = sum / n as f64;
    let var = (sum2 / n as f64 - mean * mean).max(0.0);
    (lm, (var / n as f64).sqrt())
}

/// `log E[σ((τd − 1)/τ²)]` with `d ~ N(0, 2)`: the error of a two-symbol
/// decision, by log-domain quadrature.
fn log_pairwise_error(tau2: f64) -> f64 {
    let tau = tau2.sqrt();
    // integrand peaks near d = 1/τ; d = √2 x
    let centre = 1.0 / (std::f64::consts::SQRT_2 * tau);
    let (lo, hi) = ((-12.0f64).min(centre - 12.0), centre + 12.0);
    let steps = (((hi - lo) / 0.005).ceil() as usize).max(1000);
    let h = (hi - lo) / steps as f64;
    let log_norm = -0.5 * (2.0 * std::f64::consts::PI).ln();
    let terms: Vec<f64> = (0..=steps)
        .map(|i| {
            let x = lo + h * i as f64;
            let u = (tau * std::f64::consts::SQRT_2 * x - 1.0) / tau2;
            // log σ(u) = −log(1 + e^{−u})
            let log_sig = if u > 0.0 { -(-u).exp().ln_1p() } else { u - u.exp().ln_1p() };
            let w: f64 = if i == 0 || i == steps { 0.5 } else { 1.0 };
            log_norm - 0.5 * x * x + log_sig + w.ln()
        })
        .collect();
    let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln() + h.ln()
}

/// Pool-adjacent-violators fit to a non-increasing sequence.
fn isotonic_decreasing(v: &[f64]) -> Vec<f64> {
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(v.len());
    for &x in v {
        blocks.push((x, 1));
        while blocks.len() > 1 {
            let (b, nb) = blocks[blocks.len() - 1];
            let (a, na) = blocks[blocks.len() - 2];
            if a >= b {
                break;
            }
            blocks.pop();
            let tot = na + nb;
            *blocks.last_mut().unwrap() = ((a * na as f64 + b * nb as f64) / tot as f64, tot);
        }
    }
    blocks
        .into_iter()
        .flat_map(|(x, n)| std::iter::repeat_n(x, n))
        .collect()
}

/// Fritsch–Carlson slopes for a monotone cubic Hermite interpolant.
fn pchip_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let d: Vec<f64> = (0..n - 1)
        .map(|i| (y[i + 1] - y[i]) / (x[i + 1] - x[i]))
        .collect();
    let mut m = vec![0.0; n];
    m[0] = d[0];
    m[n - 1] = d[n - 2];
    for i in 1..n - 1 {
        m[i] = if d[i - 1] * d[i] <= 0.0 {
            0.0
        } else {
            let h0 = x[i] - x[i - 1];
            let h1 = x[i + 1] - x[i];
            let w1 = 2.0 * h1 + h0;
            let w2 = h1 + 2.0 * h0;
            (w1 + w2) / (w1 / d[i - 1] + w2 / d[i])
        };
    }
    for i in 0..n - 1 {
        if d[i] == 0.0 {
            m[i] = 0.0;
            m[i + 1] = 0.0;
        }
    }
    m
}

/// Check-node rule in the belief-mass domain.
///
/// Returns `(E‖μ_out‖², MSE)` with `E‖μ_out‖² = 1/q + (q/(q−1))^{d−1}
/// Π(in − 1/q)` and `MSE = 1 − E‖μ_out‖²`.
pub fn se_check_mse(incoming: &[f64], q: usize) -> Result<(f64, f64)> {
    if incoming.is_empty() {
        return Err(Error::Domain("check rule needs at least one input".into()));
    }
    let u = 1.0 / q as f64;
    let tol = 1e-9;
    if let Some(x) = incoming.iter().find(|&&x| !(x >= u - tol && x <= 1.0 + tol)) {
        return Err(Error::Domain(format!("belief mass {x} outside [1/q, 1]")));
    }
    let errors: Vec<f64> = incoming.iter().map(|x| 1.0 - x).collect();
    let e = check_error(&errors, q);
    Ok((1.0 - e, e))
}

/// The same rule on error masses `1 − in`, accurate when they are tiny:
/// `e_out = (q−1)/q · (1 − Π(1 − q e_j/(q−1)))`.
fn check_error(errors: &[f64], q: usize) -> f64 {
    let qf = q as f64;
    let emax = (qf - 1.0) / qf;
    let log_prod: f64 = errors
        .iter()
        .map(|&e| (-(e / emax).clamp(0.0, 1.0)).ln_1p())
        .sum();
    (emax * -log_prod.exp_m1()).clamp(0.0, emax)
}

/// Effective variance `1 / (1/τ² + Σ 1/τ²_i)`; infinite inputs carry no
/// information.
pub fn se_variable_tau(tau2_amp: f64, incoming: &[f64]) -> f64 {
    let prec: f64 = 1.0 / tau2_amp + incoming.iter().map(|t| 1.0 / t).sum::<f64>();
    1.0 / prec
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeTrace {
    pub sigma2: f64,
    /// Predicted `τ_t²` for `t = 0 ..= T`.
    pub tau2: Vec<f64>,
    /// Check-to-variable belief masses after the last iteration, per edge.
    pub edge_messages: Vec<f64>,
    /// Per-section MSE after the last iteration.
    pub section_mse: Vec<f64>,
    pub converged: bool,
}

impl SeTrace {
    pub fn final_tau2(&self) -> f64 {
        *self.tau2.last().expect("trace is never empty")
    }

    pub fn final_excess(&self) -> f64 {
        self.final_tau2() - self.sigma2
    }
}

/// Approximate state evolution on a concrete graph with `n` channel uses.
///
/// Graph messages restart from uniform beliefs at every AMP iteration.
/// Under a message-retaining schedule this is a fresh-schedule proxy.
pub fn approximate_se(
    code: &LdpcCode,
    n: usize,
    sigma2: f64,
    iters: usize,
    schedule: &Schedule,
    psi: &PsiTable,
) -> Result<SeTrace> {
    let q = code.q();
    if psi.q() != q {
        return Err(Error::Domain(format!("Ψ table is for q = {}, code has q = {q}", psi.q())));
    }
    if n == 0 || !(sigma2 >= 0.0) {
        return Err(Error::Domain("need n > 0 and sigma2 ≥ 0".into()));
    }
    let l = code.num_vars();
    let e = code.num_edges();
    // messages are held as error masses 1 − E‖μ‖²
    let emax = (q as f64 - 1.0) / q as f64;
    let mut tau2 = sigma2 + l as f64 / n as f64;
    let mut trace = vec![tau2];
    let mut c2v = vec![emax; e];
    let mut v2c = vec![emax; e];
    let mut section_mse = vec![psi.mse(tau2); l];
    for t in 0..iters {
        let tau_eff = tau2.max(1e-300);
        c2v.iter_mut().for_each(|x| *x = emax);
        for _ in 0..schedule.rounds(t) {
            for v in 0..l {
                let edges = code.var_edges(v);
                for &ei in edges {
                    let others: Vec<f64> = edges
                        .iter()
                        .filter(|&&o| o != ei)
                        .map(|&o| psi.mse_inv(c2v[o]))
                        .collect();
                    v2c[ei] = psi.mse(se_variable_tau(tau_eff, &others));
                }
            }
            for p in 0..code.num_checks() {
                let range = code.check_range(p);
                for ei in range.clone() {
                    let others: Vec<f64> = range.clone().filter(|&o| o != ei).map(|o| v2c[o]).collect();
                    c2v[ei] = if others.is_empty() { emax } else { check_error(&others, q) };
                }
            }
        }
        for (v, mse) in section_mse.iter_mut().enumerate() {
            let incoming: Vec<f64> = code.var_edges(v).iter().map(|&o| psi.mse_inv(c2v[o])).collect();
            *mse = psi.mse(se_variable_tau(tau_eff, &incoming));
        }
        tau2 = sigma2 + section_mse.iter().sum::<f64>() / n as f64;
        trace.push(tau2);
    }
    let last = *trace.last().unwrap();
    let converged = last - sigma2 < 1e-4 * sigma2.max(1e-12);
    Ok(SeTrace {
        sigma2,
        tau2: trace,
        edge_messages: c2v.iter().map(|e| 1.0 - e).collect(),
        section_mse,
        converged,
    })
}

/// `(L, P)` realizing outer rate `k/L ≈ rate` with `k` message symbols, or
/// `None` when the rate cannot be built with variable degree `dv`.
pub fn rate_to_dims(k: usize, rate: f64, dv: usize) -> Option<(usize, usize)> {
    if !(rate > 0.0 && rate <= 1.0) || k == 0 {
        return None;
    }
    let l = (k as f64 / rate).round() as usize;
    if l < k {
        return None;
    }
    let p = l - k;
    if p == 0 {
        return Some((l, 0));
    }
    if p < dv {
        return None;
    }
    Some((l, p))
}

#[derive(Debug, Clone)]
pub struct RateSweep {
    pub m: u32,
    /// Message symbols per codeword.
    pub k: usize,
    pub n: usize,
    pub dv: usize,
    pub ebno_db: f64,
    pub iters: usize,
    pub schedule: Schedule,
    pub graph_seed: u64,
    pub rates: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateRow {
    pub r_ldpc: f64,
    pub l: usize,
    pub p: usize,
    pub sigma2: f64,
    pub tau2_final_minus_sigma2: f64,
    /// `Σ_t (τ_t² − σ²)`; breaks ties between rates that both converge.
    pub cumulative_excess: f64,
    pub best: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateTable {
    /// Sorted by increasing outer rate.
    pub rows: Vec<RateRow>,
    pub skipped: Vec<(f64, String)>,
}

impl RateTable {
    pub fn best(&self) -> Option<&RateRow> {
        self.rows.iter().find(|r| r.best)
    }
}

/// State evolution at each candidate outer rate with `B = k·m` and `n`
/// held fixed.
pub fn tune_rate(sweep: &RateSweep, psi: &PsiTable) -> Result<RateTable> {
    let field = GaloisField::new(sweep.m)?;
    let info_bits = sweep.k * sweep.m as usize;
    let mut skipped = Vec::new();
    let mut dims = Vec::new();
    for &r in &sweep.rates {
        match rate_to_dims(sweep.k, r, sweep.dv) {
            Some(d) if !dims.iter().any(|(_, e)| *e == d) => dims.push((r, d)),
            Some(_) => skipped.push((r, "duplicate (L, P) after rounding".to_string())),
            None => skipped.push((r, format!("no (L, P) with dv = {} realizes this rate", sweep.dv))),
        }
    }
    let results: Vec<std::result::Result<RateRow, (f64, String)>> = dims
        .par_iter()
        .map(|&(r, (l, p))| {
            let code = if p == 0 {
                LdpcCode::uncoded(field.clone(), l)
            } else {
                LdpcCode::peg(field.clone(), l, p, sweep.dv, sweep.graph_seed).map_err(|e| (r, e.to_string()))?
            };
            let sigma2 = crate::codec::snr_to_sigma2(sweep.ebno_db, info_bits, l);
            let tr = approximate_se(&code, sweep.n, sigma2, sweep.iters, &sweep.schedule, psi)
                .map_err(|e| (r, e.to_string()))?;
            Ok(RateRow {
                r_ldpc: sweep.k as f64 / l as f64,
                l,
                p,
                sigma2,
                tau2_final_minus_sigma2: tr.final_excess(),
                cumulative_excess: tr.tau2.iter().map(|t| t - sigma2).sum(),
                best: false,
            })
        })
        .collect();
    let mut rows = Vec::new();
    for r in results {
        match r {
            Ok(row) => rows.push(row),
            Err(s) => skipped.push(s),
        }
    }
    rows.sort_by(|a, b| a.r_ldpc.partial_cmp(&b.r_ldpc).unwrap());
    let key = |r: &RateRow| (r.tau2_final_minus_sigma2, r.cumulative_excess);
    if let Some(i) = (0..rows.len()).min_by(|&a, &b| key(&rows[a]).partial_cmp(&key(&rows[b])).unwrap()) {
        rows[i].best = true;
    }
    Ok(RateTable { rows, skipped })
}
