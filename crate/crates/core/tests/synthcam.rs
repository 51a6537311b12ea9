use exmo_core::synthcam::{generate, mean_interframe_difference, SynthSpec, Texture};
use exmo_core::GrayFrame;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

/// Horizontal shift from `a` to `b` via the phase of the row-summed
/// cross-power spectrum at the lowest frequency bin carrying energy.
fn estimate_shift(a: &GrayFrame, b: &GrayFrame) -> f64 {
    let n = a.width;
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n);
    let mut cross = vec![Complex64::new(0.0, 0.0); n / 2];
    let mut power = vec![0.0; n / 2];
    for y in 0..a.height {
        let mut ra: Vec<Complex64> = (0..n).map(|x| Complex64::new(a.at(y, x) as f64, 0.0)).collect();
        let mut rb: Vec<Complex64> = (0..n).map(|x| Complex64::new(b.at(y, x) as f64, 0.0)).collect();
        fft.process(&mut ra);
        fft.process(&mut rb);
        for k in 1..n / 2 {
            cross[k] += rb[k] * ra[k].conj();
            power[k] += ra[k].norm_sqr();
        }
    }
    let peak = power.iter().cloned().fold(0.0, f64::max);
    let k = (1..n / 2).find(|&k| power[k] > 1e-3 * peak).unwrap();
    -cross[k].arg() * n as f64 / (2.0 * std::f64::consts::PI * k as f64)
}

#[test]
fn recovered_velocity_matches_requested() {
    for tex in [Texture::Noise, Texture::Gradient, Texture::Checker] {
        for v in [0.0, 0.5, 1.0, 1.5, 2.0, 3.25, 4.0, 8.0] {
            let seq = generate(&SynthSpec::new(tex, v, 6, 17)).unwrap();
            for w in seq.frames.windows(2) {
                let est = estimate_shift(&w[0], &w[1]);
                assert!((est - v).abs() <= 0.1, "{tex:?} v={v}: estimated {est}");
            }
        }
    }
}

#[test]
fn interframe_difference_grows_with_velocity() {
    for tex in [Texture::Noise, Texture::Gradient, Texture::Checker] {
        let diffs: Vec<f64> = [0.0, 1.0, 2.0, 4.0, 8.0]
            .iter()
            .map(|&v| mean_interframe_difference(&generate(&SynthSpec::new(tex, v, 6, 5)).unwrap()))
            .collect();
        assert_eq!(diffs[0], 0.0);
        assert!(diffs.windows(2).all(|w| w[1] >= w[0]), "{tex:?}: {diffs:?}");
    }
}
