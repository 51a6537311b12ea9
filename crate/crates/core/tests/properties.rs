use exmo_core::autoencoder::{decode_model, encode_model, fold_partition, Model, NetworkConfig};
use exmo_core::data::{stride_phases, FrameSequence, GrayFrame};
use exmo_core::evaluation::{plcc, PairedObservations};
use exmo_core::ops::{concat_channels, conv2d, euclidean_loss, maxpool2, maxpool2_backward, split_channels, FilterBank};
use exmo_core::scoring::{frame_error, motion_score, percentile_nearest_rank};
use exmo_core::ssq::{score_response, ExposurePhase, SsqResponse, N_SYMPTOMS};
use exmo_core::Tensor;
use proptest::prelude::*;

fn tensor64(shape: &'static [usize]) -> impl Strategy<Value = Tensor<f64>> {
    let n: usize = shape.iter().product();
    prop::collection::vec(-1.0f64..1.0, n).prop_map(move |d| Tensor::from_vec(shape, d).unwrap())
}

fn tensor32(shape: &'static [usize]) -> impl Strategy<Value = Tensor<f32>> {
    let n: usize = shape.iter().product();
    prop::collection::vec(-1.0f32..1.0, n).prop_map(move |d| Tensor::from_vec(shape, d).unwrap())
}

fn ratings() -> impl Strategy<Value = [u8; N_SYMPTOMS]> {
    prop::array::uniform16(0u8..=3)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn conv_is_linear(x in tensor64(&[2, 5, 6]), y in tensor64(&[2, 5, 6]),
                      w in tensor64(&[3, 2, 3, 3]), a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let fb = FilterBank { weights: w, bias: Tensor::zeros(&[3]) };
        let mix = Tensor::from_vec(&[2, 5, 6], x.data().iter().zip(y.data()).map(|(p, q)| a * p + b * q).collect()).unwrap();
        let lhs = conv2d(&mix, &fb).unwrap();
        let (cx, cy) = (conv2d(&x, &fb).unwrap(), conv2d(&y, &fb).unwrap());
        for i in 0..lhs.len() {
            let rhs = a * cx.data()[i] + b * cy.data()[i];
            prop_assert!((lhs.data()[i] - rhs).abs() < 1e-10);
        }
    }

    #[test]
    fn pool_backward_conserves_mass(x in tensor64(&[3, 6, 8]), g in tensor64(&[3, 3, 4])) {
        let (_, idx) = maxpool2(&x).unwrap();
        let gi = maxpool2_backward(&g, &idx, x.shape()).unwrap();
        prop_assert!((gi.data().iter().sum::<f64>() - g.data().iter().sum::<f64>()).abs() < 1e-12);
    }

    #[test]
    fn concat_then_split_is_exact(a in tensor32(&[2, 4, 3]), b in tensor32(&[3, 4, 3])) {
        let c = concat_channels(&a, &b).unwrap();
        let (p, q) = split_channels(&c, 2).unwrap();
        prop_assert_eq!(p.data(), a.data());
        prop_assert_eq!(q.data(), b.data());
    }

    #[test]
    fn loss_nonnegative_and_zero_iff_equal(x in tensor32(&[5, 4, 4]), y in tensor32(&[5, 4, 4])) {
        let l = euclidean_loss(&[x.clone()], &[y.clone()]).unwrap().value;
        prop_assert!(l >= 0.0);
        prop_assert_eq!(l == 0.0, x.data() == y.data());
        prop_assert_eq!(euclidean_loss(&[x.clone()], &[x.clone()]).unwrap().value, 0.0);
    }

    #[test]
    fn ssq_total_is_weighted_rating_sum(r in ratings()) {
        let s = score_response(&SsqResponse::new("s", "c", ExposurePhase::Post, r).unwrap()).unwrap();
        let sum: u32 = r.iter().map(|&v| v as u32).sum();
        prop_assert!((s.total - 3.74 * sum as f64).abs() < 1e-9);
    }

    #[test]
    fn ssq_total_monotone(r in ratings(), i in 0usize..N_SYMPTOMS) {
        prop_assume!(r[i] < 3);
        let mut up = r;
        up[i] += 1;
        let lo = score_response(&SsqResponse::new("s", "c", ExposurePhase::Post, r).unwrap()).unwrap();
        let hi = score_response(&SsqResponse::new("s", "c", ExposurePhase::Post, up).unwrap()).unwrap();
        prop_assert!(hi.total > lo.total);
        prop_assert!(hi.nausea_raw >= lo.nausea_raw);
        prop_assert!(hi.oculomotor_raw >= lo.oculomotor_raw);
        prop_assert!(hi.disorientation_raw >= lo.disorientation_raw);
    }

    #[test]
    fn plcc_bounded_and_affine_invariant(
        pts in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 3..30),
        a in 0.1f64..10.0, b in -5.0f64..5.0, c in 0.1f64..10.0, d in -5.0f64..5.0,
    ) {
        let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
        let Ok(obs) = PairedObservations::from_vectors(&x, &y) else { return Ok(()) };
        let Ok(r) = plcc(&obs) else { return Ok(()) };
        prop_assert!(r.abs() <= 1.0);
        let xs: Vec<f64> = x.iter().map(|v| a * v + b).collect();
        let ys: Vec<f64> = y.iter().map(|v| c * v + d).collect();
        let r2 = plcc(&PairedObservations::from_vectors(&xs, &ys).unwrap()).unwrap();
        prop_assert!((r - r2).abs() < 1e-12, "{r} vs {r2}");
    }

    #[test]
    fn motion_score_is_error_over_sqrt_area(
        px in prop::collection::vec((0.0f32..1.0, 0.0f32..1.0), 64), k in 0.0f64..100.0
    ) {
        let (a, b): (Vec<f32>, Vec<f32>) = px.into_iter().unzip();
        let e = frame_error(&a, &b).unwrap();
        prop_assert!((motion_score(e, 8, 8) - e / 8.0).abs() < 1e-12);
        prop_assert!((motion_score(k * e, 8, 8) - k * motion_score(e, 8, 8)).abs() < 1e-9);
    }

    #[test]
    fn stride_phases_partition_frames(len in 0usize..40, s in 1usize..6) {
        let phases = stride_phases(len, s);
        if len < s {
            prop_assert!(phases.is_empty());
            return Ok(());
        }
        let mut all: Vec<usize> = phases.iter().flatten().copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..len).collect::<Vec<_>>());
        for p in &phases {
            prop_assert!(p.windows(2).all(|w| w[1] - w[0] == s));
        }
    }

    #[test]
    fn folds_partition(n in 2usize..50, k in 2usize..8, seed in any::<u64>()) {
        prop_assume!(n >= k);
        let parts = fold_partition(n, k, seed).unwrap();
        let mut all: Vec<usize> = parts.concat();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
    }

    #[test]
    fn percentile_within_range(v in prop::collection::vec(-1e3f64..1e3, 1..50), p in 0.0f64..=100.0) {
        let q = percentile_nearest_rank(&v, p).unwrap();
        prop_assert!(v.contains(&q));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn model_bytes_round_trip(base in 1usize..4, seed in any::<u64>()) {
        let config = NetworkConfig { input_size: 32, ..NetworkConfig::with_base(base, seed) };
        let m = Model::build(config).unwrap();
        let bytes = encode_model(&m);
        let back = decode_model(&bytes).unwrap();
        prop_assert_eq!(encode_model(&back), bytes);
        let x = Tensor::full(&[5, 32, 32], 0.3f32);
        prop_assert_eq!(m.forward(&x).unwrap(), back.forward(&x).unwrap());
    }
}

#[test]
fn sequence_rejects_out_of_range_pixels() {
    let f = GrayFrame::new(2, 1, vec![0.0, 1.5]).unwrap();
    assert!(FrameSequence::new("x", vec![f]).is_err());
}
