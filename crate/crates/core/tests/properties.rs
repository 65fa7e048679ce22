use proptest::prelude::*;
use proptest::test_runner::RngSeed;

use srldpc::amp::{decode, DecodeParams};
use srldpc::bp::{check_update, local_posterior, BpDenoiser, Schedule};
use srldpc::codec::{index_codeword, transmit, DesignMatrix, SparseState};
use srldpc::gf::{fq_convolve, fq_convolve_fast, fwht, BeliefVec, FieldElem, GaloisField};
use srldpc::ldpc::{bits_to_symbols, symbols_to_bits, SystematicCode};

fn field_and_elems() -> impl Strategy<Value = (u32, u32, u32, u32)> {
    (1u32..=8).prop_flat_map(|m| {
        let q = 1u32 << m;
        (Just(m), 0..q, 0..q, 0..q)
    })
}

fn positive_vec(q: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(1e-6f64..1.0, q)
}

/// Fixed seed so every run checks the same cases.
fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        rng_seed: RngSeed::Fixed(0x51d0),
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

proptest! {
    #![proptest_config(config(256))]

    #[test]
    fn field_axioms((m, a, b, c) in field_and_elems()) {
        let f = GaloisField::new(m).unwrap();
        let (a, b, c) = (a as FieldElem, b as FieldElem, c as FieldElem);
        prop_assert_eq!(f.mul(a, f.mul(b, c)), f.mul(f.mul(a, b), c));
        prop_assert_eq!(f.mul(a, f.add(b, c)), f.add(f.mul(a, b), f.mul(a, c)));
        prop_assert_eq!(f.mul(a, b), f.mul_slow(a, b));
        if a != 0 {
            prop_assert_eq!(f.mul(a, f.inv(a).unwrap()), 1);
        }
    }

    #[test]
    fn transform_round_trip(logq in 0u32..=8, seed in any::<u64>()) {
        let q = 1usize << logq;
        let v: Vec<f64> = (0..q).map(|i| ((seed.wrapping_mul(i as u64 + 1) % 1000) as f64) / 500.0 - 1.0).collect();
        let back = fwht(&fwht(&v, false).unwrap(), true).unwrap();
        for (x, y) in v.iter().zip(&back) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn fast_convolution_matches_direct(a in positive_vec(16), b in positive_vec(16), c in positive_vec(16)) {
        let (a, b, c) = (BeliefVec(a), BeliefVec(b), BeliefVec(c));
        let direct = fq_convolve(&fq_convolve(&a, &b).unwrap(), &c).unwrap();
        let fast = fq_convolve_fast(&[a.clone(), b.clone(), c.clone()]).unwrap();
        let swapped = fq_convolve_fast(&[c, a, b]).unwrap();
        for ((x, y), z) in direct.0.iter().zip(&fast.0).zip(&swapped.0) {
            prop_assert!((x - y).abs() < 1e-12 * x.max(1.0));
            prop_assert!((y - z).abs() < 1e-12 * y.max(1.0));
        }
    }

    #[test]
    fn check_messages_are_distributions(
        msgs in prop::collection::vec(positive_vec(8), 1..5),
        labels in prop::collection::vec(1u16..8, 5),
    ) {
        let f = GaloisField::new(3).unwrap();
        let incoming: Vec<(BeliefVec, FieldElem)> = msgs
            .into_iter()
            .zip(&labels)
            .map(|(v, &w)| {
                let mut b = BeliefVec(v);
                b.normalize();
                (b, w)
            })
            .collect();
        let (out, ok) = check_update(&f, &incoming, labels[4]).unwrap();
        prop_assert!(ok);
        prop_assert!(out.is_probability(1e-12));
    }

    #[test]
    fn posterior_is_shift_equivariant(r in prop::collection::vec(-3.0f64..3.0, 8), g in 0u16..8, tau2 in 0.05f64..5.0) {
        let shifted: Vec<f64> = (0..8).map(|h| r[h ^ g as usize]).collect();
        let a = local_posterior(&r, tau2).unwrap();
        let b = local_posterior(&shifted, tau2).unwrap();
        prop_assert!(a.is_probability(1e-12));
        for (x, y) in a.plus_g(g).0.iter().zip(&b.0) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn bits_survive_symbol_packing(m in 1u32..=8, bits in prop::collection::vec(0u8..2, 0..64)) {
        let len = bits.len() / m as usize * m as usize;
        let bits = &bits[..len];
        let sym = bits_to_symbols(bits, m).unwrap();
        prop_assert_eq!(symbols_to_bits(&sym, m), bits.to_vec());
    }
}

proptest! {
    #![proptest_config(config(24))]

    #[test]
    fn encoded_words_satisfy_checks(seed in any::<u64>(), bits_seed in any::<u64>(), m in 1u32..=5) {
        let f = GaloisField::new(m).unwrap();
        let code = match SystematicCode::random(f, 20, 6, 3, seed) {
            Ok(c) => c,
            // binary labels cannot repair a dependent row set
            Err(srldpc::Error::RankDeficient { .. }) if m == 1 => return Ok(()),
            Err(e) => panic!("{e}"),
        };
        let bits: Vec<u8> = (0..code.info_bits()).map(|i| ((bits_seed >> (i % 64)) & 1) as u8).collect();
        let v = code.encode_bits(&bits).unwrap();
        prop_assert!(code.code.syndrome_check(&v));
        prop_assert_eq!(code.decode_bits(&v), bits);
    }

    #[test]
    fn denoiser_outputs_distributions(seed in any::<u64>(), tau2 in 0.05f64..4.0, rounds in 0usize..6) {
        let f = GaloisField::new(2).unwrap();
        let code = SystematicCode::random(f, 12, 4, 2, seed).unwrap();
        let r: Vec<f64> = (0..48).map(|i| ((seed.rotate_left(i) % 997) as f64) / 400.0 - 1.0).collect();
        let r = SparseState::from_vec(4, r).unwrap();
        let mut bp = BpDenoiser::new(&code.code);
        let (s, _) = bp.denoise(&r, tau2, 0, &Schedule::Explicit(vec![rounds])).unwrap();
        for sec in s.sections() {
            let total: f64 = sec.iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-9);
            prop_assert!(sec.iter().all(|&x| (0.0..=1.0).contains(&x)));
        }
    }

    #[test]
    fn noiseless_channel_decodes(seed in any::<u64>()) {
        let f = GaloisField::new(4).unwrap();
        let code = SystematicCode::random(f, 32, 8, 3, seed).unwrap();
        let bits: Vec<u8> = (0..code.info_bits()).map(|i| ((seed >> (i % 64)) & 1) as u8).collect();
        let v = code.encode_bits(&bits).unwrap();
        let a = DesignMatrix::new(160, 512, seed ^ 1);
        let y = transmit(&index_codeword(&v, 16).unwrap(), &a).unwrap();
        let res = decode(&y, &a, &code, &DecodeParams::new(1e-4)).unwrap();
        prop_assert!(res.success);
        prop_assert_eq!(res.bits, bits);
    }
}
