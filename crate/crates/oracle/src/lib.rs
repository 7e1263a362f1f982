//! Reference computations for the test suites, written for clarity rather
//! than speed and sharing no code with the library under test.
//!
//! Exact results use arbitrary-precision rationals; every `f64` input is
//! converted without rounding, so the only rounding happens on output.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

fn exact(v: f64) -> BigRational {
    BigRational::from_float(v).expect("finite input")
}

fn to_f64(v: &BigRational) -> f64 {
    v.to_f64().expect("representable")
}

/// Solves the square system `a x = b` (several right-hand sides) exactly by
/// Gauss-Jordan elimination with nonzero pivoting. Returns `None` if singular.
pub fn solve_exact(mut a: Vec<Vec<BigRational>>, mut b: Vec<Vec<BigRational>>) -> Option<Vec<Vec<BigRational>>> {
    let n = a.len();
    for col in 0..n {
        let pivot = (col..n).find(|&r| !a[r][col].is_zero())?;
        a.swap(col, pivot);
        b.swap(col, pivot);
        let inv = a[col][col].recip();
        for v in a[col].iter_mut() {
            *v *= &inv;
        }
        for v in b[col].iter_mut() {
            *v *= &inv;
        }
        for r in 0..n {
            if r == col || a[r][col].is_zero() {
                continue;
            }
            let factor = a[r][col].clone();
            for c in 0..n {
                let d = &factor * &a[col][c];
                a[r][c] -= d;
            }
            for c in 0..b[r].len() {
                let d = &factor * &b[col][c];
                b[r][c] -= d;
            }
        }
    }
    Some(b)
}

/// Splits a finite `f64` into `(m, e)` with `v = m * 2^e` exactly.
fn dyadic(v: f64) -> (BigInt, i32) {
    assert!(v.is_finite(), "finite input");
    let (mantissa, exponent, sign) = num_traits::Float::integer_decode(v);
    (BigInt::from(sign) * BigInt::from(mantissa), i32::from(exponent))
}

/// Integer matrix `m` with `values = m * 2^-shift` exactly.
fn to_integers(values: &[Vec<f64>]) -> (Vec<Vec<BigInt>>, u32) {
    let parts: Vec<Vec<(BigInt, i32)>> = values.iter().map(|r| r.iter().map(|&v| dyadic(v)).collect()).collect();
    let min_exp = parts.iter().flatten().map(|p| p.1).min().unwrap_or(0).min(0);
    let ints = parts
        .into_iter()
        .map(|r| r.into_iter().map(|(m, e)| m << (e - min_exp) as u32).collect())
        .collect();
    (ints, (-min_exp) as u32)
}

/// Solves the square integer system `a x = b` exactly. Forward elimination is
/// fraction-free (Bareiss), so every intermediate stays an integer; only the
/// back substitution uses rationals. Returns `None` if singular.
pub fn solve_exact_integer(mut a: Vec<Vec<BigInt>>, mut b: Vec<Vec<BigInt>>) -> Option<Vec<Vec<BigRational>>> {
    let n = a.len();
    let m = b.first().map_or(0, Vec::len);
    let mut prev = BigInt::one();
    for k in 0..n {
        let pivot = (k..n).find(|&r| !a[r][k].is_zero())?;
        a.swap(k, pivot);
        b.swap(k, pivot);
        for i in k + 1..n {
            for j in k + 1..n {
                a[i][j] = (&a[k][k] * &a[i][j] - &a[i][k] * &a[k][j]) / &prev;
            }
            for j in 0..m {
                b[i][j] = (&a[k][k] * &b[i][j] - &a[i][k] * &b[k][j]) / &prev;
            }
            a[i][k] = BigInt::zero();
        }
        prev = a[k][k].clone();
    }
    let mut x = vec![vec![BigRational::zero(); m]; n];
    for j in 0..m {
        for i in (0..n).rev() {
            let mut s = BigRational::from_integer(b[i][j].clone());
            for c in i + 1..n {
                s -= BigRational::from_integer(a[i][c].clone()) * &x[c][j];
            }
            x[i][j] = s / BigRational::from_integer(a[i][i].clone());
        }
    }
    Some(x)
}

/// Ridge coefficients `(EᵀE + λI)⁻¹ EᵀF` from the exact normal equations.
/// `e` is `n x d` and `f` is `n x p`, both row-major; the result is `d x p`.
///
/// With `E = Ei 2^-a`, `F = Fi 2^-b` and `λ = L 2^-c` the system is scaled by
/// `2^(2a+c)` to `(2^c EiᵀEi + 2^2a L I) T = 2^(a+c-b) EiᵀFi`, which is solved
/// with right-hand side `EiᵀFi` and rescaled.
pub fn ridge_normal_equations(e: &[Vec<f64>], f: &[Vec<f64>], lambda: f64) -> Option<Vec<Vec<f64>>> {
    let d = e.first().map_or(0, Vec::len);
    let p = f.first().map_or(0, Vec::len);
    let (ei, a) = to_integers(e);
    let (fi, b) = to_integers(f);
    let (lm, le) = dyadic(lambda);
    let (lam, c) = if le >= 0 {
        (lm << le as u32, 0u32)
    } else {
        (lm, (-le) as u32)
    };
    let mut gram = vec![vec![BigInt::zero(); d]; d];
    let mut rhs = vec![vec![BigInt::zero(); p]; d];
    for (er, fr) in ei.iter().zip(&fi) {
        for i in 0..d {
            for j in 0..d {
                gram[i][j] += &er[i] * &er[j];
            }
            for j in 0..p {
                rhs[i][j] += &er[i] * &fr[j];
            }
        }
    }
    for (i, row) in gram.iter_mut().enumerate() {
        for v in row.iter_mut() {
            *v <<= c;
        }
        row[i] += &lam << (2 * a);
    }
    let t = solve_exact_integer(gram, rhs)?;
    let scale = BigRational::from_integer(BigInt::one() << (a + c)) / BigRational::from_integer(BigInt::one() << b);
    Some(
        t.iter()
            .map(|r| r.iter().map(|v| to_f64(&(v * &scale))).collect())
            .collect(),
    )
}

/// One-way ANOVA F from the exact sums-of-squares decomposition
/// `SS_total = SS_between + SS_within`. Returns `None` when the within-group
/// sum of squares is zero or fewer than two groups are present.
pub fn anova_f_exact(values: &[f64], groups: &[usize]) -> Option<f64> {
    let n = values.len();
    let x: Vec<BigRational> = values.iter().map(|&v| exact(v)).collect();
    let mut labels: Vec<usize> = groups.to_vec();
    labels.sort_unstable();
    labels.dedup();
    let k = labels.len();
    if k < 2 || n <= k {
        return None;
    }
    let count = |n: usize| BigRational::from_integer(BigInt::from(n));
    let grand = x.iter().fold(BigRational::zero(), |a, v| a + v) / count(n);
    let ss_total = x
        .iter()
        .fold(BigRational::zero(), |a, v| a + (v - &grand) * (v - &grand));
    let mut ss_within = BigRational::zero();
    for &g in &labels {
        let members: Vec<&BigRational> = x.iter().zip(groups).filter(|(_, &h)| h == g).map(|(v, _)| v).collect();
        let mean = members.iter().fold(BigRational::zero(), |a, v| a + *v) / count(members.len());
        ss_within += members
            .iter()
            .fold(BigRational::zero(), |a, v| a + (*v - &mean) * (*v - &mean));
    }
    if ss_within.is_zero() {
        return None;
    }
    let ss_between = ss_total - &ss_within;
    let f = (ss_between / count(k - 1)) / (ss_within / count(n - k));
    Some(to_f64(&f))
}

/// Central finite-difference gradient of `f` at `x` with step `h`.
pub fn central_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Mean of the squared mean-removed signal (its population variance).
pub fn mean_square_power(signal: &[f64]) -> f64 {
    let n = signal.len() as f64;
    let mean = signal.iter().sum::<f64>() / n;
    signal.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
}

/// `|X_k|²` of the length-`n` DFT by direct summation, for `k = 0..=n/2`.
pub fn dft_power(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    (0..=n / 2)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (t, &v) in x.iter().enumerate() {
                let angle = -2.0 * std::f64::consts::PI * ((k * t) % n) as f64 / n as f64;
                re += v * angle.cos();
                im += v * angle.sin();
            }
            re * re + im * im
        })
        .collect()
}

/// Best root split of a classification tree by exhaustive enumeration.
///
/// Every feature and every midpoint between consecutive distinct values is
/// tried; impurity is recomputed from scratch for each candidate. Returns
/// `(feature, threshold, weighted Gini decrease)`; ties keep the first
/// candidate in (feature, threshold) order.
pub fn best_gini_split(x: &[Vec<f64>], y: &[usize], min_leaf: usize) -> Option<(usize, f64, f64)> {
    fn gini_mass(labels: &[usize]) -> f64 {
        if labels.is_empty() {
            return 0.0;
        }
        let n = labels.len() as f64;
        let mut counts = std::collections::BTreeMap::new();
        for &l in labels {
            *counts.entry(l).or_insert(0usize) += 1;
        }
        n * (1.0 - counts.values().map(|&c| (c as f64 / n).powi(2)).sum::<f64>())
    }
    let p = x.first().map_or(0, Vec::len);
    let parent = gini_mass(y);
    let mut best: Option<(usize, f64, f64)> = None;
    for j in 0..p {
        let mut vals: Vec<f64> = x.iter().map(|r| r[j]).collect();
        vals.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        vals.dedup();
        for w in vals.windows(2) {
            let thr = w[0] + (w[1] - w[0]) / 2.0;
            let thr = if thr >= w[1] { w[0] } else { thr };
            let left: Vec<usize> = x.iter().zip(y).filter(|(r, _)| r[j] <= thr).map(|(_, &l)| l).collect();
            let right: Vec<usize> = x.iter().zip(y).filter(|(r, _)| r[j] > thr).map(|(_, &l)| l).collect();
            if left.len() < min_leaf || right.len() < min_leaf {
                continue;
            }
            let gain = parent - gini_mass(&left) - gini_mass(&right);
            if best.is_none_or(|(_, _, g)| gain > g + 1e-12) {
                best = Some((j, thr, gain));
            }
        }
    }
    best
}

/// Shapley values by averaging marginal contributions over all `p!`
/// orderings. `value(mask)` gives the coalition value for a bitmask of
/// present players. Feasible for `p <= 8`.
pub fn shapley_all_permutations(p: usize, value: impl Fn(u32) -> f64) -> Vec<f64> {
    assert!(p <= 10, "permutation oracle is limited to 10 players");
    let mut phi = vec![0.0; p];
    let mut perm: Vec<usize> = (0..p).collect();
    let mut count = 0u64;
    let mut cache = std::collections::HashMap::new();
    let mut v = |mask: u32| *cache.entry(mask).or_insert_with(|| value(mask));
    loop {
        let mut mask = 0u32;
        let mut prev = v(0);
        for &j in &perm {
            mask |= 1 << j;
            let cur = v(mask);
            phi[j] += cur - prev;
            prev = cur;
        }
        count += 1;
        if !next_permutation(&mut perm) {
            break;
        }
    }
    phi.iter().map(|s| s / count as f64).collect()
}

fn next_permutation(v: &mut [usize]) -> bool {
    let Some(i) = (1..v.len()).rev().find(|&i| v[i - 1] < v[i]) else {
        return false;
    };
    let j = (i..v.len()).rev().find(|&j| v[j] > v[i - 1]).expect("successor exists");
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

/// Cohen's κ computed from label pairs with exact rational arithmetic.
pub fn kappa_exact(pairs: &[(usize, usize)], n_classes: usize) -> f64 {
    let n = BigRational::from_integer(BigInt::from(pairs.len()));
    let mut agree = BigRational::zero();
    let mut rows = vec![BigRational::zero(); n_classes];
    let mut cols = vec![BigRational::zero(); n_classes];
    for &(t, p) in pairs {
        if t == p {
            agree += BigRational::one();
        }
        rows[t] += BigRational::one();
        cols[p] += BigRational::one();
    }
    let p_o = agree / &n;
    let p_e = rows.iter().zip(&cols).fold(BigRational::zero(), |a, (r, c)| a + r * c) / (&n * &n);
    if p_e == BigRational::one() {
        return 0.0;
    }
    to_f64(&((p_o - &p_e) / (BigRational::one() - p_e)))
}

/// Largest absolute entrywise difference.
pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Largest absolute value, for relative tolerances.
pub fn max_abs(a: &[f64]) -> f64 {
    a.iter().map(|v| v.abs()).fold(0.0, f64::max)
}

/// A signal for [`edf_bytes`], given directly as digital samples.
#[derive(Clone, Debug)]
pub struct FixtureSignal {
    pub label: String,
    pub samples_per_record: usize,
    pub physical_min: f64,
    pub physical_max: f64,
    pub digital_min: i16,
    pub digital_max: i16,
    pub digital: Vec<i16>,
}

/// The EDF calibration map from a digital sample to physical units.
pub fn calibrate(d: i16, s: &FixtureSignal) -> f64 {
    let (dmin, dmax) = (s.digital_min as f64, s.digital_max as f64);
    (d as f64 - dmin) / (dmax - dmin) * (s.physical_max - s.physical_min) + s.physical_min
}

fn field(out: &mut Vec<u8>, text: &str, width: usize) {
    let mut bytes = text.as_bytes().to_vec();
    bytes.resize(width, b' ');
    out.extend_from_slice(&bytes[..width]);
}

/// Builds EDF bytes field by field. `n_records_field` is written verbatim
/// into the header (e.g. `-1`); data records are interleaved per record.
pub fn edf_bytes(patient: &str, n_records_field: &str, record_duration: &str, signals: &[FixtureSignal]) -> Vec<u8> {
    let ns = signals.len();
    let mut h = Vec::new();
    field(&mut h, "0", 8);
    field(&mut h, patient, 80);
    field(&mut h, "Startdate 01-JAN-2000 X X X", 80);
    field(&mut h, "01.01.00", 8);
    field(&mut h, "00.00.00", 8);
    field(&mut h, &(256 * (ns + 1)).to_string(), 8);
    field(&mut h, "", 44);
    field(&mut h, n_records_field, 8);
    field(&mut h, record_duration, 8);
    field(&mut h, &ns.to_string(), 4);
    type Field = Box<dyn Fn(&FixtureSignal) -> String>;
    let per_signal: [(usize, Field); 10] = [
        (16, Box::new(|s| s.label.clone())),
        (80, Box::new(|_| String::new())),
        (8, Box::new(|_| "uV".into())),
        (8, Box::new(|s| s.physical_min.to_string())),
        (8, Box::new(|s| s.physical_max.to_string())),
        (8, Box::new(|s| s.digital_min.to_string())),
        (8, Box::new(|s| s.digital_max.to_string())),
        (80, Box::new(|_| String::new())),
        (8, Box::new(|s| s.samples_per_record.to_string())),
        (32, Box::new(|_| String::new())),
    ];
    for (width, text) in &per_signal {
        for s in signals {
            field(&mut h, &text(s), *width);
        }
    }
    assert_eq!(h.len(), 256 * (ns + 1));
    let n_records = signals.first().map_or(0, |s| s.digital.len() / s.samples_per_record);
    for r in 0..n_records {
        for s in signals {
            for &d in &s.digital[r * s.samples_per_record..(r + 1) * s.samples_per_record] {
                h.extend_from_slice(&d.to_le_bytes());
            }
        }
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_solve_small_system() {
        let t = ridge_normal_equations(&[vec![1.0, 0.0], vec![0.0, 2.0]], &[vec![3.0], vec![4.0]], 0.0).unwrap();
        assert_eq!(t, vec![vec![3.0], vec![2.0]]);
        assert!(ridge_normal_equations(&[vec![1.0, 1.0], vec![1.0, 1.0]], &[vec![1.0], vec![1.0]], 0.0).is_none());
    }

    #[test]
    fn anova_hand_example() {
        // Groups {1,2,3} and {5,6,7}: SSB = 24, SSW = 4, F = 24 / (4/4) = 24.
        assert_eq!(
            anova_f_exact(&[1.0, 2.0, 3.0, 5.0, 6.0, 7.0], &[0, 0, 0, 1, 1, 1]),
            Some(24.0)
        );
        assert_eq!(anova_f_exact(&[1.0, 1.0, 2.0, 2.0], &[0, 0, 1, 1]), None);
    }

    #[test]
    fn permutation_shapley_of_product_game() {
        let phi = shapley_all_permutations(3, |m| if m == 0b111 { 6.0 } else { 0.0 });
        assert!(phi.iter().all(|v| (v - 2.0).abs() < 1e-12));
    }

    #[test]
    fn dft_of_cosine() {
        let x: Vec<f64> = (0..8)
            .map(|t| (2.0 * std::f64::consts::PI * t as f64 / 8.0).cos())
            .collect();
        let p = dft_power(&x);
        assert!((p[1] - 16.0).abs() < 1e-9 && p[0].abs() < 1e-9);
    }

    #[test]
    fn kappa_hand_example() {
        let mut pairs = vec![(0, 0); 40];
        pairs.extend(vec![(0, 1); 10]);
        pairs.extend(vec![(1, 0); 10]);
        pairs.extend(vec![(1, 1); 40]);
        assert!((kappa_exact(&pairs, 2) - 0.6).abs() < 1e-15);
    }

    #[test]
    fn fixture_layout() {
        let s = FixtureSignal {
            label: "EEG".into(),
            samples_per_record: 2,
            physical_min: -100.0,
            physical_max: 100.0,
            digital_min: -2048,
            digital_max: 2047,
            digital: vec![-2048, 2047, 0, 1],
        };
        let b = edf_bytes("P1", "2", "1", std::slice::from_ref(&s));
        assert_eq!(b.len(), 512 + 8);
        assert_eq!(&b[236..244], b"2       ");
        assert_eq!(calibrate(-2048, &s), -100.0);
        assert_eq!(calibrate(2047, &s), 100.0);
    }

    #[test]
    fn gini_split_enumeration() {
        let x = vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]];
        assert_eq!(best_gini_split(&x, &[0, 0, 1, 1], 1), Some((0, 1.5, 2.0)));
    }
}
