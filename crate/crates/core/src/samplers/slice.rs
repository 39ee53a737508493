//! Univariate slice sampling with stepping out and shrinkage, applied to each
//! coordinate in turn.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SliceSpec {
    /// Initial bracket width, shared by all coordinates.
    pub width: f64,
    #[serde(default = "SliceSpec::default_max_stepout")]
    pub max_stepout: usize,
    #[serde(default = "SliceSpec::default_max_shrink")]
    pub max_shrink: usize,
}

impl SliceSpec {
    fn default_max_stepout() -> usize {
        50
    }

    fn default_max_shrink() -> usize {
        100
    }

    pub fn new(width: f64) -> Self {
        Self {
            width,
            max_stepout: Self::default_max_stepout(),
            max_shrink: Self::default_max_shrink(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.width > 0.0 && self.width.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "slice width must be positive, got {}",
                self.width
            )));
        }
        if self.max_stepout == 0 || self.max_shrink == 0 {
            return Err(Error::InvalidArgument(
                "slice step-out and shrink limits must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SliceOutcome {
    pub state: Vec<f64>,
    pub log_target: f64,
    /// Coordinates left unchanged because shrinkage ran out of attempts.
    pub shrink_failures: usize,
    pub evaluations: usize,
}

/// One sweep over all coordinates. Every returned coordinate update satisfies
/// `log_target(new) > log_target(old) + log u`.
pub fn slice_step<F, R>(
    theta: &[f64],
    current: f64,
    mut log_target: F,
    spec: &SliceSpec,
    rng: &mut R,
) -> Result<SliceOutcome>
where
    F: FnMut(&[f64]) -> Result<f64>,
    R: Rng + ?Sized,
{
    let mut x = theta.to_vec();
    let mut fx = current;
    let mut shrink_failures = 0;
    let mut evaluations = 0;
    let w = spec.width;
    for d in 0..x.len() {
        let level = fx + rng.random::<f64>().ln();
        let x0 = x[d];
        let mut eval_at = |v: f64, x: &mut Vec<f64>| -> Result<f64> {
            x[d] = v;
            evaluations += 1;
            let f = log_target(x)?;
            Ok(if f.is_nan() { f64::NEG_INFINITY } else { f })
        };

        let mut lo = x0 - w * rng.random::<f64>();
        let mut hi = lo + w;
        let mut left = (spec.max_stepout as f64 * rng.random::<f64>()).floor() as usize;
        let mut right = spec.max_stepout - 1 - left;
        while left > 0 && eval_at(lo, &mut x)? > level {
            lo -= w;
            left -= 1;
        }
        while right > 0 && eval_at(hi, &mut x)? > level {
            hi += w;
            right -= 1;
        }

        let mut accepted = None;
        for _ in 0..spec.max_shrink {
            let v = lo + rng.random::<f64>() * (hi - lo);
            let f = eval_at(v, &mut x)?;
            if f > level {
                accepted = Some((v, f));
                break;
            }
            if v < x0 {
                lo = v;
            } else {
                hi = v;
            }
        }
        match accepted {
            Some((v, f)) => {
                x[d] = v;
                fx = f;
            }
            None => {
                x[d] = x0;
                shrink_failures += 1;
            }
        }
    }
    Ok(SliceOutcome {
        state: x,
        log_target: fx,
        shrink_failures,
        evaluations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn uniform_0_10(x: &[f64]) -> Result<f64> {
        Ok(if (0.0..=10.0).contains(&x[0]) {
            0.0
        } else {
            f64::NEG_INFINITY
        })
    }

    #[test]
    fn kolmogorov_smirnov_on_uniform() {
        let spec = SliceSpec::new(10.0);
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let mut x = vec![5.0];
        let mut fx = 0.0;
        let mut draws = Vec::new();
        for _ in 0..10_000 {
            let out = slice_step(&x, fx, uniform_0_10, &spec, &mut rng).unwrap();
            x = out.state;
            fx = out.log_target;
            assert!(fx.is_finite());
            draws.push(x[0]);
        }
        draws.sort_by(f64::total_cmp);
        let n = draws.len() as f64;
        let d = draws
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let cdf = v / 10.0;
                (cdf - i as f64 / n).abs().max(((i + 1) as f64 / n - cdf).abs())
            })
            .fold(0.0, f64::max);
        // asymptotic critical value at alpha = 0.01
        let crit = 1.628 / n.sqrt();
        assert!(d < crit, "D = {d}, critical {crit}");
    }

    #[test]
    fn standard_normal_moments() {
        let spec = SliceSpec::new(1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let target = |x: &[f64]| Ok(-0.5 * x[0] * x[0]);
        let mut x = vec![0.0];
        let mut fx = 0.0;
        let mut draws = Vec::new();
        for i in 0..20_000 {
            let out = slice_step(&x, fx, target, &spec, &mut rng).unwrap();
            x = out.state;
            fx = out.log_target;
            if i % 2 == 0 {
                draws.push(x[0]);
            }
        }
        let n = draws.len() as f64;
        let mean = draws.iter().sum::<f64>() / n;
        let var = draws.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        assert!(mean.abs() < 4.0 / n.sqrt(), "{mean}");
        assert!((var - 1.0).abs() < 4.0 * (2.0 / n).sqrt(), "{var}");
    }

    #[test]
    fn accepted_points_are_on_the_slice() {
        let spec = SliceSpec::new(0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let target = |x: &[f64]| Ok(-(x[0].powi(4) + (x[1] - 1.0).powi(2)));
        let mut x = vec![0.5, 0.5];
        let mut fx = target(&x).unwrap();
        for _ in 0..2000 {
            let out = slice_step(&x, fx, target, &spec, &mut rng).unwrap();
            assert_eq!(out.log_target, target(&out.state).unwrap());
            x = out.state;
            fx = out.log_target;
        }
    }

    #[test]
    fn exhausted_shrinkage_keeps_state() {
        // a spike of zero width: nothing but the current point is on the slice
        let spec = SliceSpec {
            width: 1.0,
            max_stepout: 3,
            max_shrink: 5,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let spike = |x: &[f64]| Ok(if x[0] == 0.25 { 0.0 } else { f64::NEG_INFINITY });
        let out = slice_step(&[0.25], 0.0, spike, &spec, &mut rng).unwrap();
        assert_eq!(out.state, vec![0.25]);
        assert_eq!(out.shrink_failures, 1);
    }
}
