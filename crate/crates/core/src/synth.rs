//! Deterministic synthetic activation tensors.
//!
//! A fraction `rho` of the samples is exactly `0.0` (the spike); the rest
//! follow an exponential tail. With [`Style::Leaky`] the tail is two-sided
//! and negative values are scaled by [`LEAKY_SLOPE`], so after quantization
//! the spike lands on a small positive level rather than level 0.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use crate::error::{Error, Result};
use crate::tensor::FeatureTensor;

/// Negative-side slope of the leaky style.
pub const LEAKY_SLOPE: f32 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Style {
    /// Non-negative tail above the spike.
    Relu,
    /// Two-sided tail, negatives shrunk by [`LEAKY_SLOPE`].
    Leaky,
}

impl FromStr for Style {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Style::Relu),
            "leaky" => Ok(Style::Leaky),
            _ => Err(Error::InvalidTensor(format!(
                "unknown style {s:?}, expected relu or leaky"
            ))),
        }
    }
}

impl fmt::Display for Style {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Style::Relu => "relu",
            Style::Leaky => "leaky",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub rows: usize,
    pub cols: usize,
    pub channels: usize,
    pub style: Style,
    /// Fraction of samples equal to the spike, in `[0, 1]`.
    pub rho: f64,
    /// Mean of the exponential tail; must be positive.
    pub tail_scale: f64,
    pub seed: u64,
}

impl SynthSpec {
    /// Number of spike samples: `round(rho * len)`.
    pub fn spike_count(&self) -> usize {
        (self.rho * (self.rows * self.cols * self.channels) as f64).round() as usize
    }

    pub fn generate(&self) -> Result<FeatureTensor> {
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(Error::InvalidTensor(format!(
                "spike fraction {} outside [0, 1]",
                self.rho
            )));
        }
        if !(self.tail_scale.is_finite() && self.tail_scale > 0.0) {
            return Err(Error::InvalidTensor(format!(
                "tail scale {} must be positive",
                self.tail_scale
            )));
        }
        let len = self.rows * self.cols * self.channels;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let tail = Exp::new(1.0 / self.tail_scale).expect("rate is positive and finite");

        let mut order: Vec<usize> = (0..len).collect();
        order.shuffle(&mut rng);
        let mut data = vec![0.0f32; len];
        for &i in &order[self.spike_count()..] {
            // Exp can return exactly 0; keep tail samples off the spike
            let v = (tail.sample(&mut rng) as f32).max(f32::MIN_POSITIVE);
            data[i] = match self.style {
                Style::Relu => v,
                Style::Leaky if rng.random_bool(0.5) => -LEAKY_SLOPE * v,
                Style::Leaky => v,
            };
        }
        FeatureTensor::new(self.rows, self.cols, self.channels, data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::histogram;
    use crate::tensor::quantize;

    fn spec(style: Style, rho: f64, seed: u64) -> SynthSpec {
        SynthSpec {
            rows: 16,
            cols: 16,
            channels: 8,
            style,
            rho,
            tail_scale: 1.0,
            seed,
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let a = spec(Style::Leaky, 0.8, 7).generate().unwrap();
        let b = spec(Style::Leaky, 0.8, 7).generate().unwrap();
        let c = spec(Style::Leaky, 0.8, 8).generate().unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn spike_fraction_is_exact() {
        for rho in [0.0, 0.25, 0.8, 1.0] {
            for style in [Style::Relu, Style::Leaky] {
                let s = spec(style, rho, 1);
                let t = s.generate().unwrap();
                let zeros = t.data().iter().filter(|&&v| v == 0.0).count();
                assert_eq!(zeros, s.spike_count());
                assert!((zeros as f64 / t.len() as f64 - rho).abs() <= 0.02);
            }
        }
    }

    #[test]
    fn relu_is_non_negative_leaky_is_two_sided() {
        let r = spec(Style::Relu, 0.5, 3).generate().unwrap();
        assert!(r.v_min() >= 0.0);
        let l = spec(Style::Leaky, 0.5, 3).generate().unwrap();
        assert!(l.v_min() < 0.0 && l.v_max() > 0.0);
        assert!(l.v_max() > -l.v_min());
    }

    #[test]
    fn leaky_spike_is_a_positive_level() {
        let t = spec(Style::Leaky, 0.8, 5).generate().unwrap();
        let q = quantize(&t, 8).unwrap();
        let h = histogram(q.data());
        let peak = (0..256).max_by_key(|&v| h[v]).unwrap();
        assert!(peak > 0);
        assert!(h[peak] as f64 >= 0.8 * q.len() as f64);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(spec(Style::Relu, 1.5, 0).generate().is_err());
        let mut s = spec(Style::Relu, 0.5, 0);
        s.tail_scale = 0.0;
        assert!(s.generate().is_err());
    }

    #[test]
    fn style_names() {
        assert_eq!("leaky".parse::<Style>().unwrap(), Style::Leaky);
        assert_eq!(Style::Relu.to_string(), "relu");
        assert!("tanh".parse::<Style>().is_err());
    }
}
