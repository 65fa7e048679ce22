//! Belief-propagation denoiser for the outer GF(q) code.
//!
//! Each call turns the effective observation into local posteriors, runs a
//! scheduled number of flooding BP rounds on the Tanner graph, and returns
//! the section-wise posterior estimate (local posterior times every incoming
//! check message). Check updates run in the Walsh–Hadamard domain.

use std::fmt;
use std::str::FromStr;

use crate::codec::SparseState;
use crate::error::{Error, Result};
use crate::gf::{fq_convolve_fast, fwht_in_place, BeliefVec, FieldElem, GaloisField};
use crate::ldpc::LdpcCode;

/// Entries of a normalized graph message are clamped to at least this value.
pub const MESSAGE_FLOOR: f64 = 1e-30;

/// Number of BP rounds per AMP iteration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Schedule {
    /// No BP; the denoiser is the section-wise posterior mean.
    Bp0,
    /// `t + 1` fresh rounds at AMP iteration `t`.
    BpN,
    /// One round per iteration, graph messages kept between iterations.
    Bp1Kg,
    /// Explicit round counts; the last entry repeats.
    Explicit(Vec<usize>),
}

impl Schedule {
    pub fn rounds(&self, t: usize) -> usize {
        match self {
            Schedule::Bp0 => 0,
            Schedule::BpN => t + 1,
            Schedule::Bp1Kg => 1,
            Schedule::Explicit(v) => v.get(t).or(v.last()).copied().unwrap_or(0),
        }
    }

    pub fn keeps_graph(&self) -> bool {
        matches!(self, Schedule::Bp1Kg)
    }
}

impl fmt::Display for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Schedule::Bp0 => write!(f, "bp0"),
            Schedule::BpN => write!(f, "bpn"),
            Schedule::Bp1Kg => write!(f, "bp1kg"),
            Schedule::Explicit(v) => {
                let parts: Vec<String> = v.iter().map(|x| x.to_string()).collect();
                write!(f, "list:{}", parts.join(","))
            }
        }
    }
}

impl FromStr for Schedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        match lower.as_str() {
            "bp0" | "bp-0" => Ok(Schedule::Bp0),
            "bpn" | "bp-n" => Ok(Schedule::BpN),
            "bp1kg" | "bp-1-kg" => Ok(Schedule::Bp1Kg),
            other => {
                let list = other
                    .strip_prefix("list:")
                    .ok_or_else(|| Error::Parse(format!("unknown schedule {s:?}")))?;
                let v = list
                    .split(',')
                    .map(|x| {
                        x.trim()
                            .parse::<usize>()
                            .map_err(|_| Error::Parse(format!("bad round count {x:?}")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                if v.is_empty() {
                    return Err(Error::Parse("empty schedule list".into()));
                }
                Ok(Schedule::Explicit(v))
            }
        }
    }
}

/// Softmax `α(g) ∝ exp(r(g)/τ²)` of one section.
pub fn local_posterior(r: &[f64], tau2: f64) -> Result<BeliefVec> {
    if !(tau2 > 0.0) {
        return Err(Error::Domain(format!("tau2 must be positive, got {tau2}")));
    }
    let mut out = vec![0.0; r.len()];
    softmax_into(r, tau2, &mut out);
    Ok(BeliefVec(out))
}

fn softmax_into(r: &[f64], tau2: f64, out: &mut [f64]) {
    let max = r.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let inv = 1.0 / tau2;
    let mut sum = 0.0;
    for (o, &x) in out.iter_mut().zip(r) {
        *o = ((x - max) * inv).exp();
        sum += *o;
    }
    let s = 1.0 / sum;
    out.iter_mut().for_each(|o| *o *= s);
}

/// Clamp, normalize and floor a message. Returns `false` when the mass
/// vanished and the message was reset to uniform.
fn finalize_message(v: &mut [f64]) -> bool {
    let mut sum = 0.0;
    for x in v.iter_mut() {
        if *x < 0.0 {
            *x = 0.0;
        }
        sum += *x;
    }
    if !(sum > 0.0 && sum.is_finite()) {
        let u = 1.0 / v.len() as f64;
        v.iter_mut().for_each(|x| *x = u);
        return false;
    }
    let inv = 1.0 / sum;
    let mut sum2 = 0.0;
    for x in v.iter_mut() {
        *x = (*x * inv).max(MESSAGE_FLOOR);
        sum2 += *x;
    }
    let inv2 = 1.0 / sum2;
    v.iter_mut().for_each(|x| *x *= inv2);
    true
}

/// Check-to-variable message from the other neighbours of a check.
///
/// `incoming` holds `(μ_{v_j→c}, ω_j)` for every neighbour except the
/// target, whose label is `out_label`. The second return value is `false`
/// if the output underflowed and was reset to uniform.
pub fn check_update(
    field: &GaloisField,
    incoming: &[(BeliefVec, FieldElem)],
    out_label: FieldElem,
) -> Result<(BeliefVec, bool)> {
    if incoming.is_empty() {
        return Err(Error::Domain("check update needs at least one input".into()));
    }
    let absorbed = incoming
        .iter()
        .map(|(b, w)| b.times_g(field, field.inv(*w)?))
        .collect::<Result<Vec<_>>>()?;
    let conv = fq_convolve_fast(&absorbed)?;
    // over GF(2^m), −ω = ω
    let mut out = conv.times_g(field, out_label)?;
    let ok = finalize_message(&mut out.0);
    Ok((out, ok))
}

/// Variable-to-check message: `α` times every incoming check message except
/// `exclude`, normalized. Returns `false` on the uniform fallback.
pub fn variable_update(
    alpha: &BeliefVec,
    incoming: &[BeliefVec],
    exclude: Option<usize>,
) -> (BeliefVec, bool) {
    let mut out = alpha.0.clone();
    for (i, m) in incoming.iter().enumerate() {
        if Some(i) == exclude {
            continue;
        }
        out.iter_mut().zip(&m.0).for_each(|(o, x)| *o *= x);
    }
    let ok = finalize_message(&mut out);
    (BeliefVec(out), ok)
}

/// `(‖ŝ‖₁, ‖ŝ‖₂²)` over the whole state vector.
pub fn divergence_terms(s: &SparseState) -> (f64, f64) {
    s.as_slice()
        .iter()
        .fold((0.0, 0.0), |(l1, l2), &x| (l1 + x.abs(), l2 + x * x))
}

/// Per-call bookkeeping of the denoiser.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DenoiseReport {
    pub rounds: usize,
    /// Messages or estimates that underflowed and were reset to uniform.
    pub underflows: usize,
    /// More rounds than half the girth were run in this call.
    pub exceeds_sub_girth: bool,
}

/// Mutable BP working set bound to one code.
#[derive(Debug, Clone)]
pub struct BpDenoiser<'a> {
    code: &'a LdpcCode,
    q: usize,
    /// `mul_perm[g * q + h] = h ⊗ g`
    mul_perm: Vec<u16>,
    inv_label: Vec<FieldElem>,
    alpha: Vec<f64>,
    v2c: Vec<f64>,
    c2v: Vec<f64>,
    extrinsic: bool,
    work_fwd: Vec<f64>,
    work_out: Vec<f64>,
    underflows: usize,
}

impl<'a> BpDenoiser<'a> {
    pub fn new(code: &'a LdpcCode) -> Self {
        let field = code.field();
        let q = field.q();
        let mut mul_perm = vec![0u16; q * q];
        for g in 0..q {
            for h in 0..q {
                mul_perm[g * q + h] = field.mul(h as FieldElem, g as FieldElem);
            }
        }
        let inv_label = code
            .edges()
            .iter()
            .map(|e| field.inv(e.label).expect("edge labels are nonzero"))
            .collect();
        let e = code.num_edges();
        let max_deg = (0..code.num_checks())
            .map(|p| code.check_range(p).len())
            .max()
            .unwrap_or(0);
        let u = 1.0 / q as f64;
        Self {
            code,
            q,
            mul_perm,
            inv_label,
            alpha: vec![u; code.num_vars() * q],
            v2c: vec![u; e * q],
            c2v: vec![u; e * q],
            extrinsic: false,
            work_fwd: vec![0.0; max_deg * q],
            work_out: vec![0.0; max_deg * q],
            underflows: 0,
        }
    }

    /// Emit the extrinsic estimate (check messages only) instead of the
    /// intrinsic one. Diagnostic use.
    pub fn set_extrinsic(&mut self, on: bool) {
        self.extrinsic = on;
    }

    pub fn code(&self) -> &LdpcCode {
        self.code
    }

    /// Uniform messages in both directions.
    pub fn reset_messages(&mut self) {
        let u = 1.0 / self.q as f64;
        self.v2c.iter_mut().for_each(|x| *x = u);
        self.c2v.iter_mut().for_each(|x| *x = u);
    }

    /// Recompute every local posterior from `r`.
    pub fn set_observation(&mut self, r: &SparseState, tau2: f64) -> Result<()> {
        if !(tau2 > 0.0) {
            return Err(Error::Domain(format!("tau2 must be positive, got {tau2}")));
        }
        if r.q() != self.q || r.num_sections() != self.code.num_vars() {
            return Err(Error::Dimension {
                expected: self.q * self.code.num_vars(),
                got: r.as_slice().len(),
            });
        }
        for (a, sec) in self.alpha.chunks_exact_mut(self.q).zip(r.sections()) {
            softmax_into(sec, tau2, a);
        }
        Ok(())
    }

    pub fn alpha(&self, l: usize) -> &[f64] {
        &self.alpha[l * self.q..(l + 1) * self.q]
    }

    pub fn check_to_var(&self, edge: usize) -> &[f64] {
        &self.c2v[edge * self.q..(edge + 1) * self.q]
    }

    pub fn var_to_check(&self, edge: usize) -> &[f64] {
        &self.v2c[edge * self.q..(edge + 1) * self.q]
    }

    /// One flooding round: all variable updates, then all check updates.
    pub fn round(&mut self) {
        self.variable_updates();
        self.check_updates();
    }

    fn variable_updates(&mut self) {
        let q = self.q;
        for v in 0..self.code.num_vars() {
            let edges = self.code.var_edges(v);
            let alpha = &self.alpha[v * q..(v + 1) * q];
            for &e in edges {
                let out = &mut self.v2c[e * q..(e + 1) * q];
                out.copy_from_slice(alpha);
                for &other in edges {
                    if other != e {
                        let m = &self.c2v[other * q..(other + 1) * q];
                        out.iter_mut().zip(m).for_each(|(o, x)| *o *= x);
                    }
                }
                if !finalize_message(out) {
                    self.underflows += 1;
                }
            }
        }
    }

    fn check_updates(&mut self) {
        let q = self.q;
        for p in 0..self.code.num_checks() {
            let range = self.code.check_range(p);
            let d = range.len();
            let fwd = &mut self.work_fwd[..d * q];
            let out = &mut self.work_out[..d * q];
            // absorb labels and transform: F_j(h) = WHT[μ_j(h ⊗ ω_j⁻¹)]
            for (j, e) in range.clone().enumerate() {
                let perm = &self.mul_perm[self.inv_label[e] as usize * q..][..q];
                let src = &self.v2c[e * q..(e + 1) * q];
                let f = &mut fwd[j * q..(j + 1) * q];
                for (x, &idx) in f.iter_mut().zip(perm) {
                    *x = src[idx as usize];
                }
                fwht_in_place(f);
            }
            // leave-one-out products via running prefix and suffix
            let mut run = vec![1.0; q];
            for j in 0..d {
                out[j * q..(j + 1) * q].copy_from_slice(&run);
                run.iter_mut()
                    .zip(&fwd[j * q..(j + 1) * q])
                    .for_each(|(r, f)| *r *= f);
            }
            run.iter_mut().for_each(|r| *r = 1.0);
            for j in (0..d).rev() {
                out[j * q..(j + 1) * q]
                    .iter_mut()
                    .zip(&run)
                    .for_each(|(o, r)| *o *= r);
                run.iter_mut()
                    .zip(&fwd[j * q..(j + 1) * q])
                    .for_each(|(r, f)| *r *= f);
            }
            for (j, e) in range.enumerate() {
                let o = &mut out[j * q..(j + 1) * q];
                fwht_in_place(o);
                // μ_{c→v}(g) = μ̄(g ⊗ ω); the 1/q of the inverse is absorbed
                // by the normalization below
                let label = self.code.edges()[e].label as usize;
                let perm = &self.mul_perm[label * q..][..q];
                let dst = &mut self.c2v[e * q..(e + 1) * q];
                for (x, &idx) in dst.iter_mut().zip(perm) {
                    *x = o[idx as usize];
                }
                if !finalize_message(dst) {
                    self.underflows += 1;
                }
            }
        }
    }

    /// Section-wise posterior estimate from the current messages.
    pub fn estimate(&mut self) -> SparseState {
        let q = self.q;
        let mut s = SparseState::zeros(q, self.code.num_vars());
        for v in 0..self.code.num_vars() {
            let out = s.section_mut(v);
            if self.extrinsic {
                out.iter_mut().for_each(|x| *x = 1.0);
            } else {
                out.copy_from_slice(&self.alpha[v * q..(v + 1) * q]);
            }
            for &e in self.code.var_edges(v) {
                let m = &self.c2v[e * q..(e + 1) * q];
                out.iter_mut().zip(m).for_each(|(o, x)| *o *= x);
            }
            let sum: f64 = out.iter().sum();
            if sum > 0.0 && sum.is_finite() {
                let inv = 1.0 / sum;
                out.iter_mut().for_each(|x| *x *= inv);
            } else {
                self.underflows += 1;
                out.iter_mut().for_each(|x| *x = 1.0 / q as f64);
            }
        }
        s
    }

    /// The denoiser for AMP iteration `t` under `schedule`.
    pub fn denoise(
        &mut self,
        r: &SparseState,
        tau2: f64,
        t: usize,
        schedule: &Schedule,
    ) -> Result<(SparseState, DenoiseReport)> {
        self.set_observation(r, tau2)?;
        let rounds = schedule.rounds(t);
        let keep = schedule.keeps_graph();
        if !keep {
            self.reset_messages();
        }
        self.underflows = 0;
        let exceeds_sub_girth = self.code.girth().is_some_and(|g| 2 * rounds > g);
        let est = if rounds == 0 && !keep {
            SparseState::from_vec(self.q, self.alpha.clone())?
        } else {
            for _ in 0..rounds {
                self.round();
            }
            self.estimate()
        };
        Ok((
            est,
            DenoiseReport {
                rounds,
                underflows: self.underflows,
                exceeds_sub_girth,
            },
        ))
    }
}
