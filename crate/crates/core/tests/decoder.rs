use rand::Rng;
use rand_distr::StandardNormal;

use srldpc::amp::{decode, AmpDecoder, DecodeParams};
use srldpc::bp::{divergence_terms, BpDenoiser, Schedule};
use srldpc::codec::{awgn, index_codeword, snr_to_sigma2, transmit, DesignMatrix, SparseState};
use srldpc::gf::GaloisField;
use srldpc::ldpc::SystematicCode;
use srldpc::rng::{stream, Stream};

struct Setup {
    code: SystematicCode,
    a: DesignMatrix,
    y: Vec<f64>,
    sigma2: f64,
}

fn setup(l: usize, p: usize, n: usize, ebno: f64, seed: u64) -> Setup {
    let f = GaloisField::new(4).unwrap();
    let code = SystematicCode::random(f, l, p, 3, seed).unwrap();
    let a = DesignMatrix::new(n, 16 * l, seed);
    let mut rng = stream(seed, Stream::Test, 0);
    let bits: Vec<u8> = (0..code.info_bits()).map(|_| rng.gen_range(0..2)).collect();
    let s = index_codeword(&code.encode_bits(&bits).unwrap(), 16).unwrap();
    let sigma2 = snr_to_sigma2(ebno, code.info_bits(), l);
    let y = awgn(&transmit(&s, &a).unwrap(), sigma2, seed, 0).unwrap();
    Setup { code, a, y, sigma2 }
}

/// Plain AMP with the section-wise posterior mean, written against a dense
/// copy of the matrix.
fn reference_bp0(y: &[f64], a: &DesignMatrix, q: usize, iters: usize, floor: f64) -> (Vec<f64>, Vec<f64>) {
    let (n, cols) = (a.rows(), a.cols());
    let dense: Vec<Vec<f64>> = (0..cols).map(|j| a.column(j).iter().map(|&x| x as f64).collect()).collect();
    let mut z = y.to_vec();
    let mut s = vec![0.0; cols];
    let norm = |z: &[f64]| (z.iter().map(|x| x * x).sum::<f64>() / n as f64).max(floor);
    let mut tau2 = norm(&z);
    let mut trace = vec![tau2];
    for _ in 0..iters {
        let r: Vec<f64> = (0..cols)
            .map(|j| dense[j].iter().zip(&z).map(|(a, z)| a * z).sum::<f64>() + s[j])
            .collect();
        for sec in 0..cols / q {
            let part = &r[sec * q..(sec + 1) * q];
            let max = part.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let w: Vec<f64> = part.iter().map(|x| ((x - max) / tau2).exp()).collect();
            let total: f64 = w.iter().sum();
            for g in 0..q {
                s[sec * q + g] = w[g] / total;
            }
        }
        let div: f64 = s.iter().map(|x| x - x * x).sum::<f64>() / (n as f64 * tau2);
        let mut z_new = y.to_vec();
        for (j, col) in dense.iter().enumerate() {
            for (zi, a) in z_new.iter_mut().zip(col) {
                *zi -= a * s[j];
            }
        }
        for (zn, zp) in z_new.iter_mut().zip(&z) {
            *zn += div * zp;
        }
        z = z_new;
        tau2 = norm(&z);
        trace.push(tau2);
    }
    (trace, s)
}

#[test]
fn posterior_mean_denoiser_matches_reference_amp() {
    let st = setup(32, 4, 160, 3.0, 11);
    let mut params = DecodeParams::new(st.sigma2).with_schedule(Schedule::Bp0);
    params.early_exit = false;
    params.final_bp_iters = 0;
    params.amp_iters = 12;
    let res = decode(&st.y, &st.a, &st.code, &params).unwrap();
    let (trace, _) = reference_bp0(&st.y, &st.a, 16, 12, params.tau2_floor);
    assert_eq!(res.tau2_trace.len(), trace.len());
    for (t, (a, b)) in res.tau2_trace.iter().zip(&trace).enumerate() {
        assert!((a - b).abs() <= 1e-9 * b, "t = {t}: {a} vs {b}");
    }
}

fn fd_divergence(bp: &BpDenoiser, r: &SparseState, tau2: f64, t: usize, schedule: &Schedule) -> (f64, f64) {
    let h = 1e-5;
    let q = r.q();
    let eta = |x: &[f64]| {
        let mut b = bp.clone();
        b.denoise(&SparseState::from_vec(q, x.to_vec()).unwrap(), tau2, t, schedule).unwrap().0
    };
    let (l1, l2) = divergence_terms(&eta(r.as_slice()));
    let analytic = (l1 - l2) / tau2;
    let mut fd = 0.0;
    for i in 0..r.as_slice().len() {
        let mut up = r.as_slice().to_vec();
        let mut dn = up.clone();
        up[i] += h;
        dn[i] -= h;
        fd += (eta(&up).as_slice()[i] - eta(&dn).as_slice()[i]) / (2.0 * h);
    }
    (analytic, fd)
}

#[test]
fn divergence_formula_holds_along_the_iterations() {
    let st = setup(16, 4, 100, 2.0, 5);
    for schedule in [Schedule::Explicit(vec![1]), Schedule::Bp1Kg, Schedule::Bp0] {
        let mut dec = AmpDecoder::new(&st.y, &st.a, &st.code.code, schedule.clone(), 1e-9).unwrap();
        for t in 0..4 {
            let r = dec.effective_observation().unwrap();
            let tau2 = dec.tau2();
            let bp = dec.denoiser().clone();
            let (analytic, fd) = fd_divergence(&bp, &r, tau2, t, &schedule);
            assert!(
                (analytic - fd).abs() < 1e-4 * analytic.abs(),
                "{schedule} t = {t}: {analytic} vs {fd}"
            );
            dec.step().unwrap();
        }
    }
}

#[test]
fn decoding_is_reproducible_and_rejects_bad_input() {
    let st = setup(32, 4, 160, 4.0, 3);
    let params = DecodeParams::new(st.sigma2);
    let a = decode(&st.y, &st.a, &st.code, &params).unwrap();
    let b = decode(&st.y, &st.a, &st.code, &params).unwrap();
    assert_eq!(a.tau2_trace, b.tau2_trace);
    assert_eq!(a.bits, b.bits);
    assert!(decode(&st.y[1..], &st.a, &st.code, &params).is_err());

    let mut rng = stream(9, Stream::Test, 1);
    let junk: Vec<f64> = (0..st.y.len()).map(|_| 1e3 * rng.sample::<f64, _>(StandardNormal)).collect();
    let res = decode(&junk, &st.a, &st.code, &params).unwrap();
    assert!(res.tau2_trace.iter().all(|t| t.is_finite()));
}
