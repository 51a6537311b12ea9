//! Central finite-difference checks for every differentiable operator.
//!
//! Each check builds a random scalar functional `L = Σ w_i · y_i` of the
//! operator output, back-propagates `w` through the analytic backward pass
//! and compares every input/parameter coordinate against
//! `(L(x + h) − L(x − h)) / 2h`.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ops::{
    activation, activation_backward, concat_channels, conv2d, conv2d_backward, deconv2d,
    deconv2d_backward, euclidean_loss, maxpool2, maxpool2_backward, Activation, FilterBank,
};
use crate::tensor::{Real, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    Single,
    Double,
}

impl Precision {
    pub fn as_str(self) -> &'static str {
        match self {
            Precision::Single => "single",
            Precision::Double => "double",
        }
    }

    pub fn threshold(self) -> f64 {
        match self {
            Precision::Single => 1e-2,
            Precision::Double => 1e-4,
        }
    }

    fn step(self) -> f64 {
        match self {
            Precision::Single => 1e-2,
            Precision::Double => 1e-5,
        }
    }

    // Denominator floor so coordinates whose true gradient is ~0 are judged
    // on absolute error instead of blowing up.
    fn floor(self) -> f64 {
        match self {
            Precision::Single => 1e-2,
            Precision::Double => 1e-6,
        }
    }
}

impl std::str::FromStr for Precision {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "single" | "f32" => Ok(Precision::Single),
            "double" | "f64" => Ok(Precision::Double),
            other => Err(Error::Argument(format!("unknown precision `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GradcheckRow {
    pub operator: String,
    pub precision: Precision,
    pub coordinates: usize,
    pub max_rel_error: f64,
    pub threshold: f64,
    pub passed: bool,
}

pub const OPERATORS: [&str; 7] = ["conv2d", "deconv2d", "maxpool2", "relu", "sigmoid", "euclidean_loss", "concat"];

fn rel_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

fn random_tensor<T: Real>(rng: &mut ChaCha8Rng, shape: &[usize], lo: f64, hi: f64) -> Tensor<T> {
    let n = shape.iter().product();
    let data = (0..n).map(|_| T::of(rng.gen_range(lo..hi))).collect();
    Tensor::from_vec(shape, data).expect("shape matches length")
}

/// Values bounded away from zero, so ReLU never straddles its kink under a
/// finite-difference step.
fn away_from_zero<T: Real>(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor<T> {
    let n = shape.iter().product();
    let data = (0..n)
        .map(|_| {
            let m: f64 = rng.gen_range(0.1..1.0);
            T::of(if rng.gen_bool(0.5) { m } else { -m })
        })
        .collect();
    Tensor::from_vec(shape, data).expect("shape matches length")
}

/// Pairwise-distinct values spaced well beyond the step, so the pooling
/// argmax is stable under perturbation.
fn distinct<T: Real>(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor<T> {
    let n: usize = shape.iter().product();
    let mut levels: Vec<f64> = (0..n).map(|i| (i as f64 - n as f64 / 2.0) * 0.05).collect();
    levels.shuffle(rng);
    Tensor::from_vec(shape, levels.into_iter().map(T::of).collect()).expect("shape matches length")
}

fn weighted_sum<T: Real>(y: &Tensor<T>, w: &Tensor<T>) -> f64 {
    y.data().iter().zip(w.data()).map(|(a, b)| a.to_f64_lossy() * b.to_f64_lossy()).sum()
}

struct Probe {
    max: f64,
    count: usize,
}

impl Probe {
    fn new() -> Self {
        Self { max: 0.0, count: 0 }
    }

    /// Perturbs every coordinate of `x` in place and compares against `analytic`.
    fn run<T: Real>(&mut self, x: &mut Tensor<T>, analytic: &Tensor<T>, p: Precision, f: impl Fn(&Tensor<T>) -> f64) {
        let h = p.step();
        for i in 0..x.len() {
            let orig = x.data()[i];
            x.data_mut()[i] = T::of(orig.to_f64_lossy() + h);
            let plus = f(x);
            x.data_mut()[i] = T::of(orig.to_f64_lossy() - h);
            let minus = f(x);
            x.data_mut()[i] = orig;
            // the realised step differs from h once rounded to T
            let hp = T::of(orig.to_f64_lossy() + h).to_f64_lossy() - T::of(orig.to_f64_lossy() - h).to_f64_lossy();
            let numeric = (plus - minus) / hp;
            let e = rel_error(analytic.data()[i].to_f64_lossy(), numeric, p.floor());
            self.max = self.max.max(e);
            self.count += 1;
        }
    }
}

fn check_filtered<T: Real>(
    p: Precision,
    rng: &mut ChaCha8Rng,
    out_scale: usize,
    fwd: fn(&Tensor<T>, &FilterBank<T>) -> Result<Tensor<T>>,
    bwd: fn(&Tensor<T>, &Tensor<T>, &FilterBank<T>) -> Result<(Tensor<T>, FilterBank<T>)>,
) -> Result<Probe> {
    let (cin, cout, hw) = (2, 3, 6);
    let mut x = random_tensor::<T>(rng, &[cin, hw, hw], -1.0, 1.0);
    let mut fb = FilterBank {
        weights: random_tensor(rng, &[cout, cin, 3, 3], -0.5, 0.5),
        bias: random_tensor(rng, &[cout], -0.5, 0.5),
    };
    let w = random_tensor::<T>(rng, &[cout, hw * out_scale, hw * out_scale], -1.0, 1.0);
    let y = fwd(&x, &fb)?;
    let (gx, gf) = bwd(&w, &x, &fb)?;
    let mut probe = Probe::new();
    {
        let fb = fb.clone();
        probe.run(&mut x, &gx, p, |xx| weighted_sum(&fwd(xx, &fb).expect("shapes fixed"), &w));
    }
    debug_assert_eq!(y.shape(), w.shape());
    let xc = x.clone();
    let mut weights = fb.weights.clone();
    let bias = fb.bias.clone();
    probe.run(&mut weights, &gf.weights, p, |ww| {
        let f = FilterBank { weights: ww.clone(), bias: bias.clone() };
        weighted_sum(&fwd(&xc, &f).expect("shapes fixed"), &w)
    });
    let weights = fb.weights.clone();
    probe.run(&mut fb.bias, &gf.bias, p, |bb| {
        let f = FilterBank { weights: weights.clone(), bias: bb.clone() };
        weighted_sum(&fwd(&xc, &f).expect("shapes fixed"), &w)
    });
    Ok(probe)
}

fn check_operator<T: Real>(name: &str, p: Precision, seed: u64) -> Result<Probe> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match name {
        "conv2d" => check_filtered::<T>(p, &mut rng, 1, conv2d, conv2d_backward),
        "deconv2d" => check_filtered::<T>(p, &mut rng, 2, deconv2d, deconv2d_backward),
        "maxpool2" => {
            let mut x = distinct::<T>(&mut rng, &[2, 8, 8]);
            let (_, idx) = maxpool2(&x)?;
            let w = random_tensor::<T>(&mut rng, &[2, 4, 4], -1.0, 1.0);
            let g = maxpool2_backward(&w, &idx, x.shape())?;
            let mut probe = Probe::new();
            probe.run(&mut x, &g, p, |xx| weighted_sum(&maxpool2(xx).expect("shape fixed").0, &w));
            Ok(probe)
        }
        "relu" | "sigmoid" => {
            let kind = if name == "relu" { Activation::Relu } else { Activation::Sigmoid };
            let mut x = if kind == Activation::Relu {
                away_from_zero::<T>(&mut rng, &[2, 8, 8])
            } else {
                random_tensor::<T>(&mut rng, &[2, 8, 8], -3.0, 3.0)
            };
            let y = activation(&x, kind);
            let w = random_tensor::<T>(&mut rng, &[2, 8, 8], -1.0, 1.0);
            let g = activation_backward(&w, &y, kind)?;
            let mut probe = Probe::new();
            probe.run(&mut x, &g, p, |xx| weighted_sum(&activation(xx, kind), &w));
            Ok(probe)
        }
        "euclidean_loss" => {
            let inputs: Vec<Tensor<T>> = (0..2).map(|_| random_tensor(&mut rng, &[2, 8, 8], 0.0, 1.0)).collect();
            let mut outputs: Vec<Tensor<T>> = (0..2).map(|_| random_tensor(&mut rng, &[2, 8, 8], 0.0, 1.0)).collect();
            let grads = euclidean_loss(&inputs, &outputs)?.grads;
            let mut probe = Probe::new();
            for k in 0..outputs.len() {
                let mut item = outputs[k].clone();
                let rest = outputs.clone();
                probe.run(&mut item, &grads[k], p, |yk| {
                    let mut all = rest.clone();
                    all[k] = yk.clone();
                    euclidean_loss(&inputs, &all).expect("shapes fixed").value
                });
                outputs[k] = item;
            }
            Ok(probe)
        }
        "concat" => {
            let mut a = random_tensor::<T>(&mut rng, &[2, 8, 8], -1.0, 1.0);
            let mut b = random_tensor::<T>(&mut rng, &[1, 8, 8], -1.0, 1.0);
            let w = random_tensor::<T>(&mut rng, &[3, 8, 8], -1.0, 1.0);
            let (ga, gb) = crate::ops::split_channels(&w, 2)?;
            let mut probe = Probe::new();
            let bc = b.clone();
            probe.run(&mut a, &ga, p, |aa| weighted_sum(&concat_channels(aa, &bc).expect("shape fixed"), &w));
            let ac = a.clone();
            probe.run(&mut b, &gb, p, |bb| weighted_sum(&concat_channels(&ac, bb).expect("shape fixed"), &w));
            Ok(probe)
        }
        other => Err(Error::Argument(format!("unknown operator `{other}`"))),
    }
}

/// Checks one operator at the given precision.
pub fn check(name: &str, precision: Precision, seed: u64) -> Result<GradcheckRow> {
    let probe = match precision {
        Precision::Single => check_operator::<f32>(name, precision, seed)?,
        Precision::Double => check_operator::<f64>(name, precision, seed)?,
    };
    let threshold = precision.threshold();
    Ok(GradcheckRow {
        operator: name.to_string(),
        precision,
        coordinates: probe.count,
        max_rel_error: probe.max,
        threshold,
        passed: probe.max < threshold,
    })
}

pub fn check_all(precision: Precision, seed: u64) -> Result<Vec<GradcheckRow>> {
    OPERATORS.iter().map(|op| check(op, precision, seed)).collect()
}

pub fn format_table(rows: &[GradcheckRow]) -> String {
    let mut s = format!("{:<16} {:<8} {:>7} {:>14} {:>10}  result\n", "operator", "prec", "coords", "max_rel_err", "threshold");
    for r in rows {
        s.push_str(&format!(
            "{:<16} {:<8} {:>7} {:>14.3e} {:>10.0e}  {}\n",
            r.operator,
            r.precision.as_str(),
            r.coordinates,
            r.max_rel_error,
            r.threshold,
            if r.passed { "PASS" } else { "FAIL" }
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn double_precision_passes() {
        for row in check_all(Precision::Double, 3).unwrap() {
            assert!(row.passed, "{row:?}");
            assert!(row.coordinates > 0);
        }
    }

    #[test]
    fn single_precision_passes() {
        for row in check_all(Precision::Single, 3).unwrap() {
            assert!(row.passed, "{row:?}");
        }
    }

    #[test]
    fn activations_tight_in_double() {
        for op in ["relu", "sigmoid"] {
            let row = check(op, Precision::Double, 11).unwrap();
            assert!(row.max_rel_error < 1e-6, "{row:?}");
        }
    }

    #[test]
    fn unknown_operator() {
        assert!(check("softmax", Precision::Double, 0).is_err());
    }
}
