//! AMP decoding loop with the BP denoiser.

use crate::bp::{divergence_terms, BpDenoiser, DenoiseReport, Schedule};
use crate::codec::{hard_decision, DesignMatrix, SparseState};
use crate::error::{Error, Result};
use crate::gf::FieldElem;
use crate::ldpc::{LdpcCode, SystematicCode};

/// Residual correction `z_prev · (l1 − l2sq) / (n τ²)`.
pub fn onsager(z_prev: &[f64], l1: f64, l2sq: f64, tau2: f64, n: usize) -> Result<Vec<f64>> {
    let c = onsager_coefficient(l1, l2sq, tau2, n)?;
    Ok(z_prev.iter().map(|z| z * c).collect())
}

pub fn onsager_coefficient(l1: f64, l2sq: f64, tau2: f64, n: usize) -> Result<f64> {
    if !(tau2 > 0.0) || n == 0 {
        return Err(Error::Domain(format!("onsager needs tau2 > 0 and n > 0 (tau2 = {tau2}, n = {n})")));
    }
    Ok((l1 - l2sq) / (n as f64 * tau2))
}

/// `max(‖z‖²/n, floor)`.
pub fn estimate_tau2(z: &[f64], floor: f64) -> f64 {
    let e = z.iter().map(|x| x * x).sum::<f64>() / z.len().max(1) as f64;
    e.max(floor)
}

/// Lower bound on the residual variance used by the decoder.
pub fn tau2_floor(sigma2: f64) -> f64 {
    (1e-6 * sigma2).max(1e-12)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeParams {
    pub amp_iters: usize,
    pub final_bp_iters: usize,
    pub schedule: Schedule,
    pub tau2_floor: f64,
    /// Stop as soon as the hard decision satisfies every check.
    pub early_exit: bool,
    pub extrinsic: bool,
}

impl DecodeParams {
    pub fn new(sigma2: f64) -> Self {
        Self {
            amp_iters: 25,
            final_bp_iters: 100,
            schedule: Schedule::BpN,
            tau2_floor: tau2_floor(sigma2),
            early_exit: true,
            extrinsic: false,
        }
    }

    pub fn with_schedule(mut self, schedule: Schedule) -> Self {
        self.schedule = schedule;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// Valid codeword found during the AMP phase.
    AmpSyndrome,
    /// Valid codeword found during the final BP rounds.
    FinalBpSyndrome,
    /// Ran out of iterations.
    Exhausted,
    /// A non-finite value appeared in the state.
    NonFinite,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::AmpSyndrome => "amp_syndrome",
            Termination::FinalBpSyndrome => "final_bp_syndrome",
            Termination::Exhausted => "exhausted",
            Termination::NonFinite => "non_finite",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeResult {
    pub bits: Vec<u8>,
    pub symbols: Vec<FieldElem>,
    pub success: bool,
    pub iterations_used: usize,
    pub final_bp_rounds: usize,
    /// `τ_t²` for `t = 0 ..= iterations_used`.
    pub tau2_trace: Vec<f64>,
    pub termination: Termination,
    pub underflows: usize,
    pub exceeded_sub_girth: bool,
}

/// What one AMP iteration produced.
#[derive(Debug, Clone, Copy)]
pub struct StepReport {
    pub denoise: DenoiseReport,
    pub onsager_coefficient: f64,
}

/// Iteration state of one decode.
///
/// Starts from `ŝ = 0`, `z = y`. Each [`step`](Self::step) forms
/// `r = Aᵀz + ŝ`, denoises it at the current `τ²`, updates the residual
/// with the correction term and re-estimates `τ²`.
pub struct AmpDecoder<'a> {
    y: &'a [f64],
    a: &'a DesignMatrix,
    bp: BpDenoiser<'a>,
    schedule: Schedule,
    floor: f64,
    z: Vec<f64>,
    s: SparseState,
    tau2: f64,
    t: usize,
}

impl<'a> AmpDecoder<'a> {
    pub fn new(
        y: &'a [f64],
        a: &'a DesignMatrix,
        code: &'a LdpcCode,
        schedule: Schedule,
        floor: f64,
    ) -> Result<Self> {
        let q = code.q();
        if a.rows() != y.len() {
            return Err(Error::Dimension { expected: a.rows(), got: y.len() });
        }
        if a.cols() != q * code.num_vars() {
            return Err(Error::Dimension { expected: q * code.num_vars(), got: a.cols() });
        }
        if !(floor > 0.0) {
            return Err(Error::Domain(format!("tau2 floor must be positive, got {floor}")));
        }
        Ok(Self {
            y,
            a,
            bp: BpDenoiser::new(code),
            schedule,
            floor,
            z: y.to_vec(),
            s: SparseState::zeros(q, code.num_vars()),
            tau2: estimate_tau2(y, floor),
            t: 0,
        })
    }

    pub fn z(&self) -> &[f64] {
        &self.z
    }

    pub fn estimate(&self) -> &SparseState {
        &self.s
    }

    pub fn tau2(&self) -> f64 {
        self.tau2
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn denoiser(&mut self) -> &mut BpDenoiser<'a> {
        &mut self.bp
    }

    /// `Aᵀz + ŝ` for the current state.
    pub fn effective_observation(&self) -> Result<SparseState> {
        let mut r = self.a.mul_transpose(&self.z)?;
        r.iter_mut().zip(self.s.as_slice()).for_each(|(x, s)| *x += s);
        SparseState::from_vec(self.s.q(), r)
    }

    pub fn step(&mut self) -> Result<StepReport> {
        let r = self.effective_observation()?;
        if r.as_slice().iter().any(|x| !x.is_finite()) {
            return Err(Error::Numerical(format!("non-finite observation at iteration {}", self.t)));
        }
        let (s, denoise) = self.bp.denoise(&r, self.tau2, self.t, &self.schedule)?;
        let (l1, l2sq) = divergence_terms(&s);
        let c = onsager_coefficient(l1, l2sq, self.tau2, self.y.len())?;
        let as_ = self.a.mul(s.as_slice())?;
        let z: Vec<f64> = self
            .y
            .iter()
            .zip(&as_)
            .zip(&self.z)
            .map(|((y, a), zp)| y - a + c * zp)
            .collect();
        if z.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numerical(format!("non-finite residual at iteration {}", self.t)));
        }
        self.tau2 = estimate_tau2(&z, self.floor);
        self.z = z;
        self.s = s;
        self.t += 1;
        Ok(StepReport { denoise, onsager_coefficient: c })
    }
}

/// Full decode: AMP iterations, then standalone BP rounds on the last local
/// posteriors with the graph messages carried over.
pub fn decode(
    y: &[f64],
    a: &DesignMatrix,
    code: &SystematicCode,
    params: &DecodeParams,
) -> Result<DecodeResult> {
    let graph = &code.code;
    // an uncoded system has no checks, so every word is "valid"
    let can_exit = params.early_exit && graph.num_checks() > 0;
    let mut dec = AmpDecoder::new(y, a, graph, params.schedule.clone(), params.tau2_floor)?;
    dec.denoiser().set_extrinsic(params.extrinsic);
    let mut trace = vec![dec.tau2()];
    let mut underflows = 0;
    let mut exceeded = false;
    let mut termination = Termination::Exhausted;
    let mut symbols = vec![0; graph.num_vars()];
    let mut final_rounds = 0;

    for _ in 0..params.amp_iters {
        match dec.step() {
            Ok(rep) => {
                underflows += rep.denoise.underflows;
                exceeded |= rep.denoise.exceeds_sub_girth;
            }
            Err(Error::Numerical(_)) => {
                termination = Termination::NonFinite;
                break;
            }
            Err(e) => return Err(e),
        }
        trace.push(dec.tau2());
        symbols = hard_decision(dec.estimate());
        if can_exit && graph.syndrome_check(&symbols) {
            termination = Termination::AmpSyndrome;
            break;
        }
    }

    if termination == Termination::Exhausted && params.final_bp_iters > 0 && graph.num_checks() > 0 {
        let bp = dec.denoiser();
        for _ in 0..params.final_bp_iters {
            bp.round();
            final_rounds += 1;
            let s = bp.estimate();
            if s.as_slice().iter().any(|x| !x.is_finite()) {
                termination = Termination::NonFinite;
                break;
            }
            symbols = hard_decision(&s);
            if params.early_exit && graph.syndrome_check(&symbols) {
                termination = Termination::FinalBpSyndrome;
                break;
            }
        }
    }

    let success = termination != Termination::NonFinite && graph.syndrome_check(&symbols);
    Ok(DecodeResult {
        bits: code.decode_bits(&symbols),
        symbols,
        success,
        iterations_used: trace.len() - 1,
        final_bp_rounds: final_rounds,
        tau2_trace: trace,
        termination,
        underflows,
        exceeded_sub_girth: exceeded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::{awgn, index_codeword, snr_to_sigma2, transmit};
    use crate::gf::GaloisField;
    use crate::rng::{stream, Stream};
    use rand::Rng;

    #[test]
    fn onsager_examples() {
        let z = vec![1.0, -2.0, 0.5];
        let s = index_codeword(&[3, 1], 4).unwrap();
        let (l1, l2) = divergence_terms(&s);
        assert!(onsager(&z, l1, l2, 0.3, 10).unwrap().iter().all(|&x| x == 0.0));
        let u = SparseState::from_vec(4, vec![0.25; 8]).unwrap();
        let (l1, l2) = divergence_terms(&u);
        let c = onsager_coefficient(l1, l2, 0.5, 10).unwrap();
        assert!((c - (2.0 - 0.5) / (10.0 * 0.5)).abs() < 1e-15);
        assert!(onsager(&z, 1.0, 0.5, 0.0, 10).is_err());
        assert!(onsager(&z, 1.0, 0.5, 1.0, 0).is_err());
    }

    #[test]
    fn tau2_estimator() {
        assert_eq!(estimate_tau2(&[0.0; 10], 1e-9), 1e-9);
        let mut rng = stream(5, Stream::Test, 0);
        let z: Vec<f64> = (0..100_000)
            .map(|_| 0.7 * rng.sample::<f64, _>(rand_distr::StandardNormal))
            .collect();
        let e = estimate_tau2(&z, 1e-12);
        assert!((e / 0.49 - 1.0).abs() < 0.02, "{e}");
        assert_eq!(tau2_floor(0.0), 1e-12);
        assert_eq!(tau2_floor(1.0), 1e-6);
    }

    fn setup(l: usize, p: usize, n: usize, seed: u64) -> (SystematicCode, DesignMatrix) {
        let f = GaloisField::new(4).unwrap();
        let code = SystematicCode::random(f, l, p, 3, seed).unwrap();
        let a = DesignMatrix::new(n, 16 * l, seed);
        (code, a)
    }

    fn random_word(code: &SystematicCode, seed: u64) -> Vec<FieldElem> {
        let mut rng = stream(seed, Stream::Message, 0);
        let bits: Vec<u8> = (0..code.info_bits()).map(|_| rng.gen_range(0..2)).collect();
        code.encode_bits(&bits).unwrap()
    }

    #[test]
    fn first_step_starts_from_y() {
        let (code, a) = setup(32, 4, 150, 1);
        let v = random_word(&code, 2);
        let s = index_codeword(&v, 16).unwrap();
        let y = awgn(&transmit(&s, &a).unwrap(), 0.01, 3, 0).unwrap();
        let dec = AmpDecoder::new(&y, &a, &code.code, Schedule::BpN, 1e-12).unwrap();
        assert_eq!(dec.z(), &y[..]);
        let r = dec.effective_observation().unwrap();
        assert_eq!(r.as_slice(), &a.mul_transpose(&y).unwrap()[..]);
        assert_eq!(dec.tau2(), estimate_tau2(&y, 1e-12));
    }

    #[test]
    fn noiseless_decode_succeeds() {
        let (code, a) = setup(64, 4, 300, 4);
        let v = random_word(&code, 5);
        let s = index_codeword(&v, 16).unwrap();
        let y = transmit(&s, &a).unwrap();
        let res = decode(&y, &a, &code, &DecodeParams::new(0.0)).unwrap();
        assert!(res.success);
        assert_eq!(res.symbols, v);
        assert!(res.iterations_used <= 10, "{}", res.iterations_used);
    }

    #[test]
    fn hopeless_channel_fails_within_baseline() {
        let (code, a) = setup(32, 4, 150, 6);
        let v = random_word(&code, 7);
        let s = index_codeword(&v, 16).unwrap();
        let bits = code.decode_bits(&v);
        let y = awgn(&transmit(&s, &a).unwrap(), 1e4, 8, 0).unwrap();
        let res = decode(&y, &a, &code, &DecodeParams::new(1e4)).unwrap();
        assert!(!res.success || res.symbols != v);
        let errs = res.bits.iter().zip(&bits).filter(|(a, b)| a != b).count();
        // a coin flip per bit; allow generous sampling slack
        assert!((errs as f64) < 0.75 * bits.len() as f64);
    }

    #[test]
    fn decode_is_deterministic() {
        let (code, a) = setup(32, 4, 150, 9);
        let v = random_word(&code, 10);
        let s = index_codeword(&v, 16).unwrap();
        let sigma2 = snr_to_sigma2(3.0, code.info_bits(), 32);
        let y = awgn(&transmit(&s, &a).unwrap(), sigma2, 11, 0).unwrap();
        let p = DecodeParams::new(sigma2);
        assert_eq!(decode(&y, &a, &code, &p).unwrap(), decode(&y, &a, &code, &p).unwrap());
    }

    #[test]
    fn one_hot_state_is_stationary() {
        // y = A s exactly and ŝ = s: the residual stays zero
        let (code, a) = setup(32, 4, 400, 12);
        let v = random_word(&code, 13);
        let s = index_codeword(&v, 16).unwrap();
        let y = transmit(&s, &a).unwrap();
        let mut dec = AmpDecoder::new(&y, &a, &code.code, Schedule::BpN, 1e-12).unwrap();
        for _ in 0..12 {
            dec.step().unwrap();
        }
        assert_eq!(hard_decision(dec.estimate()), v);
        let tau_before = dec.tau2();
        assert!(tau_before < 1e-8, "{tau_before}");
        dec.step().unwrap();
        assert!(dec.tau2() <= tau_before.max(1e-12) * 1.01);
    }

    #[test]
    fn dimension_errors() {
        let (code, a) = setup(32, 4, 150, 14);
        let y = vec![0.0; 149];
        assert!(AmpDecoder::new(&y, &a, &code.code, Schedule::BpN, 1e-12).is_err());
        let y = vec![0.0; 150];
        assert!(AmpDecoder::new(&y, &a, &code.code, Schedule::BpN, 0.0).is_err());
    }
}
