//! Time-domain descriptors: moments, percentiles and Hjorth parameters.

use crate::error::{Error, Result};
use crate::scalar::Real;

fn mean<T: Real>(x: &[T]) -> T {
    if x.is_empty() {
        return T::zero();
    }
    x.iter().copied().sum::<T>() / T::from_usize_lossy(x.len())
}

/// Population variance about the mean.
fn variance<T: Real>(x: &[T]) -> T {
    if x.is_empty() {
        return T::zero();
    }
    let m = mean(x);
    x.iter().map(|&v| (v - m) * (v - m)).sum::<T>() / T::from_usize_lossy(x.len())
}

/// True when the spread is zero up to rounding of the mean.
fn negligible<T: Real>(var: T, x: &[T]) -> bool {
    let scale = x.iter().fold(T::zero(), |acc, v| acc.max(v.abs()));
    let tiny = T::epsilon() * T::lit(16.0) * scale;
    var <= tiny * tiny
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Moments<T> {
    pub mean: T,
    pub std: T,
    pub skewness: T,
    /// Excess (Fisher) kurtosis.
    pub kurtosis: T,
}

/// Population moments. Skewness and kurtosis are 0 for a constant signal.
pub fn moments<T: Real>(x: &[T]) -> Moments<T> {
    let m = mean(x);
    let var = variance(x);
    if x.is_empty() || negligible(var, x) {
        return Moments {
            mean: m,
            std: T::zero(),
            skewness: T::zero(),
            kurtosis: T::zero(),
        };
    }
    let n = T::from_usize_lossy(x.len());
    let m3 = x.iter().map(|&v| (v - m).powi(3)).sum::<T>() / n;
    let m4 = x.iter().map(|&v| (v - m).powi(4)).sum::<T>() / n;
    Moments {
        mean: m,
        std: var.sqrt(),
        skewness: m3 / var.powf(T::lit(1.5)),
        kurtosis: m4 / (var * var) - T::lit(3.0),
    }
}

/// Linear-interpolation percentile of already sorted data, `q` in [0, 100].
pub fn percentile<T: Real>(sorted: &[T], q: f64) -> T {
    if sorted.is_empty() {
        return T::zero();
    }
    let pos = q.clamp(0.0, 100.0) / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = T::lit(pos - lo as f64);
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

fn sorted<T: Real>(x: impl Iterator<Item = T>) -> Vec<T> {
    let mut v: Vec<T> = x.collect();
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
    v
}

pub fn iqr<T: Real>(x: &[T]) -> T {
    let s = sorted(x.iter().copied());
    percentile(&s, 75.0) - percentile(&s, 25.0)
}

/// 95th percentile of the absolute amplitude.
pub fn p95_abs<T: Real>(x: &[T]) -> T {
    percentile(&sorted(x.iter().map(|v| v.abs())), 95.0)
}

/// Sign changes of the mean-removed signal; exact zeros are skipped.
pub fn zero_crossings<T: Real>(x: &[T]) -> usize {
    let m = mean(x);
    let mut last: Option<bool> = None;
    let mut count = 0;
    for &v in x {
        let d = v - m;
        if d == T::zero() {
            continue;
        }
        let positive = d > T::zero();
        if last.is_some_and(|p| p != positive) {
            count += 1;
        }
        last = Some(positive);
    }
    count
}

pub fn abs_energy<T: Real>(x: &[T]) -> T {
    x.iter().map(|&v| v * v).sum()
}

pub fn rms<T: Real>(x: &[T]) -> T {
    if x.is_empty() {
        return T::zero();
    }
    (abs_energy(x) / T::from_usize_lossy(x.len())).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hjorth<T> {
    pub activity: T,
    pub mobility: T,
    pub complexity: T,
}

fn diff<T: Real>(x: &[T]) -> Vec<T> {
    x.windows(2).map(|w| w[1] - w[0]).collect()
}

fn mobility_of<T: Real>(x: &[T], var_x: T) -> (T, Vec<T>, T) {
    let dx = diff(x);
    let var_dx = variance(&dx);
    let mob = if negligible(var_x, x) || var_x <= T::zero() {
        T::zero()
    } else {
        (var_dx / var_x).sqrt()
    };
    (mob, dx, var_dx)
}

/// Hjorth activity, mobility and complexity using first differences as
/// derivatives. A zero-variance signal yields `(0, 0, 0)`.
pub fn hjorth<T: Real>(x: &[T]) -> Result<Hjorth<T>> {
    if x.len() < 3 {
        return Err(Error::Signal(format!(
            "Hjorth parameters need 3 samples, got {}",
            x.len()
        )));
    }
    let var_x = variance(x);
    if negligible(var_x, x) {
        return Ok(Hjorth {
            activity: T::zero(),
            mobility: T::zero(),
            complexity: T::zero(),
        });
    }
    let (mob_x, dx, var_dx) = mobility_of(x, var_x);
    let (mob_dx, _, _) = mobility_of(&dx, var_dx);
    let complexity = if mob_x > T::zero() { mob_dx / mob_x } else { T::zero() };
    Ok(Hjorth {
        activity: var_x,
        mobility: mob_x,
        complexity,
    })
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    use super::*;

    #[test]
    fn sinusoid_mobility_matches_difference_gain() {
        // A first difference scales a sinusoid of omega rad/sample by 2 sin(omega / 2).
        for omega in [0.1f64, 0.4, 1.0, 2.0] {
            let x: Vec<f64> = (0..20_000).map(|i| (omega * i as f64).sin()).collect();
            let h = hjorth(&x).unwrap();
            let expected = 2.0 * (omega / 2.0).sin();
            assert!(
                (h.mobility - expected).abs() < 1e-3,
                "omega {omega}: {} vs {expected}",
                h.mobility
            );
            assert!((h.complexity - 1.0).abs() < 1e-2);
        }
    }

    #[test]
    fn white_noise_is_complex() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x: Vec<f64> = (0..5000).map(|_| StandardNormal.sample(&mut rng)).collect();
        assert!(hjorth(&x).unwrap().complexity > 1.0);
    }

    #[test]
    fn constant_signal_sentinels() {
        let x = vec![0.1f64; 3000];
        assert_eq!(
            hjorth(&x).unwrap(),
            Hjorth {
                activity: 0.0,
                mobility: 0.0,
                complexity: 0.0
            }
        );
        let m = moments(&x);
        assert_eq!((m.std, m.skewness, m.kurtosis), (0.0, 0.0, 0.0));
        assert_eq!(zero_crossings(&x), 0);
        assert!(hjorth(&[1.0f64, 2.0]).is_err());
    }

    #[test]
    fn percentiles_interpolate() {
        let s = [1.0f64, 2.0, 3.0, 4.0];
        assert_eq!(percentile(&s, 50.0), 2.5);
        assert_eq!(iqr(&[4.0f64, 1.0, 3.0, 2.0]), 1.5);
        assert_eq!(zero_crossings(&[1.0f64, -1.0, 1.0, -1.0]), 3);
    }
}
