//! Linear eigenvalue statistics: traces of powers, spectra, resolvent traces
//! and a spectral-norm estimate.

mod band;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{DMatrix, Schur};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matgen::BandMatrix;

type AnalyticFn = Arc<dyn Fn(Complex64) -> Complex64 + Send + Sync>;

/// Test function `f` of a linear eigenvalue statistic.
#[derive(Clone)]
pub enum TestFunction {
    /// `z^l`, `l ≥ 1`.
    Monomial(u32),
    /// `Σ_k a_k z^k`, coefficients indexed by degree.
    Polynomial(Vec<Complex64>),
    /// Analytic on the disk of the given radius.
    Analytic {
        name: String,
        radius: f64,
        f: AnalyticFn,
    },
}

impl TestFunction {
    pub fn monomial(l: u32) -> Result<Self> {
        if l == 0 {
            return Err(Error::Domain("monomial degree must be at least 1".into()));
        }
        Ok(TestFunction::Monomial(l))
    }

    pub fn polynomial(coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.is_empty() || coeffs.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::Domain("polynomial needs finite coefficients".into()));
        }
        Ok(TestFunction::Polynomial(coeffs))
    }

    pub fn analytic(
        name: impl Into<String>,
        radius: f64,
        f: impl Fn(Complex64) -> Complex64 + Send + Sync + 'static,
    ) -> Result<Self> {
        if radius.is_nan() || radius <= 0.0 {
            return Err(Error::Domain("analyticity radius must be positive".into()));
        }
        Ok(TestFunction::Analytic {
            name: name.into(),
            radius,
            f: Arc::new(f),
        })
    }

    /// Taylor coefficients when `f` is a polynomial.
    pub fn coefficients(&self) -> Option<Vec<Complex64>> {
        match self {
            TestFunction::Monomial(l) => {
                let mut c = vec![Complex64::new(0.0, 0.0); *l as usize + 1];
                c[*l as usize] = Complex64::new(1.0, 0.0);
                Some(c)
            }
            TestFunction::Polynomial(c) => Some(c.clone()),
            TestFunction::Analytic { .. } => None,
        }
    }

    /// Polynomial degree, `None` for analytic functions.
    pub fn degree(&self) -> Option<usize> {
        self.coefficients().map(|c| c.len() - 1)
    }

    /// Radius of analyticity (infinite for polynomials).
    pub fn radius(&self) -> f64 {
        match self {
            TestFunction::Analytic { radius, .. } => *radius,
            _ => f64::INFINITY,
        }
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        match self {
            TestFunction::Monomial(l) => z.powu(*l),
            TestFunction::Polynomial(c) => c.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, a| acc * z + a),
            TestFunction::Analytic { f, .. } => f(z),
        }
    }
}

impl fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TestFunction({self})")
    }
}

impl PartialEq for TestFunction {
    fn eq(&self, other: &Self) -> bool {
        self.to_string() == other.to_string()
    }
}

impl fmt::Display for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TestFunction::Monomial(1) => write!(f, "z"),
            TestFunction::Monomial(l) => write!(f, "z{l}"),
            TestFunction::Polynomial(c) => {
                write!(f, "poly:")?;
                for (k, a) in c.iter().enumerate() {
                    if k > 0 {
                        write!(f, ";")?;
                    }
                    write_complex(f, *a)?;
                }
                Ok(())
            }
            TestFunction::Analytic { name, .. } => write!(f, "{name}"),
        }
    }
}

fn write_complex(f: &mut fmt::Formatter<'_>, a: Complex64) -> fmt::Result {
    if a.im == 0.0 {
        write!(f, "{}", a.re)
    } else if a.im < 0.0 || a.im.is_sign_negative() {
        write!(f, "{}{}i", a.re, a.im)
    } else {
        write!(f, "{}+{}i", a.re, a.im)
    }
}

/// Parses `3`, `-2.5`, `1.5i`, `1-2i`, `0.5+1e-3i`.
pub fn parse_complex(s: &str) -> Result<Complex64> {
    let s = s.trim();
    let bad = || Error::Config(format!("cannot parse complex number {s:?}"));
    if let Some(body) = s.strip_suffix('i') {
        // Split at the last sign that is not part of an exponent or leading.
        let bytes = body.as_bytes();
        let split = (1..bytes.len())
            .rev()
            .find(|&k| (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
        let (re, im) = match split {
            Some(k) => (body[..k].parse::<f64>().map_err(|_| bad())?, &body[k..]),
            None => (0.0, body),
        };
        let im = match im {
            "" | "+" => 1.0,
            "-" => -1.0,
            other => other.parse::<f64>().map_err(|_| bad())?,
        };
        Ok(Complex64::new(re, im))
    } else {
        Ok(Complex64::new(s.parse::<f64>().map_err(|_| bad())?, 0.0))
    }
}

impl FromStr for TestFunction {
    type Err = Error;

    /// Accepts `z`, `z<l>`, `z^<l>`, `exp`, `sin`, `cos`, `const:<c>` and
    /// `poly:<a0>;<a1>;...` (coefficients by ascending degree).
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::Config(format!("unknown test function {s:?}"));
        if s == "z" {
            return TestFunction::monomial(1);
        }
        if let Some(rest) = s.strip_prefix('z') {
            let rest = rest.strip_prefix('^').unwrap_or(rest);
            let l: u32 = rest.parse().map_err(|_| bad())?;
            return TestFunction::monomial(l).map_err(|e| Error::Config(e.to_string()));
        }
        if let Some(rest) = s.strip_prefix("const:") {
            return TestFunction::polynomial(vec![parse_complex(rest)?]);
        }
        if let Some(rest) = s.strip_prefix("poly:") {
            let coeffs = rest.split(';').map(parse_complex).collect::<Result<Vec<_>>>()?;
            return TestFunction::polynomial(coeffs).map_err(|e| Error::Config(e.to_string()));
        }
        match s {
            "exp" => TestFunction::analytic("exp", f64::INFINITY, |z: Complex64| z.exp()),
            "sin" => TestFunction::analytic("sin", f64::INFINITY, |z: Complex64| z.sin()),
            "cos" => TestFunction::analytic("cos", f64::INFINITY, |z: Complex64| z.cos()),
            _ => Err(bad()),
        }
    }
}

impl Serialize for TestFunction {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for TestFunction {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One realization of `√(c_n/n) · (Σ f(λ_i) − n f(0))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LesSample {
    pub value: Complex64,
    pub replicate: u64,
    pub function: String,
}

/// `tr M^l`; `l = 0` gives `n`.
pub fn trace_power(m: &BandMatrix, l: usize) -> Complex64 {
    if l == 0 {
        return Complex64::new(m.n() as f64, 0.0);
    }
    band::trace_powers(m, l)[l - 1]
}

/// `tr M^l` for `l = 1..=lmax`, entry `l - 1`.
pub fn trace_powers(m: &BandMatrix, lmax: usize) -> Vec<Complex64> {
    band::trace_powers(m, lmax)
}

fn scale(m: &BandMatrix) -> f64 {
    (m.spec().c_n() as f64 / m.n() as f64).sqrt()
}

/// Centered, scaled statistic for one test function.
pub fn les_delta(m: &BandMatrix, f: &TestFunction, dense_limit: usize) -> Result<LesSample> {
    let mut v = les_deltas(m, std::slice::from_ref(f), dense_limit)?;
    Ok(v.remove(0))
}

/// Centered, scaled statistics for several test functions sharing one set of
/// trace powers and at most one eigendecomposition.
pub fn les_deltas(m: &BandMatrix, fs: &[TestFunction], dense_limit: usize) -> Result<Vec<LesSample>> {
    let lmax = fs.iter().filter_map(|f| f.degree()).max().unwrap_or(0);
    let traces = trace_powers(m, lmax);
    let needs_spectrum = fs.iter().any(|f| f.degree().is_none());
    let spec = if needs_spectrum {
        Some(spectrum(m, dense_limit)?)
    } else {
        None
    };
    let s = scale(m);
    let replicate = m.origin().map_or(0, |o| o.replicate);
    fs.iter()
        .map(|f| {
            let raw = match f.coefficients() {
                Some(c) => c
                    .iter()
                    .enumerate()
                    .skip(1)
                    .map(|(l, a)| a * traces[l - 1])
                    .sum::<Complex64>(),
                None => {
                    let f0 = f.eval(Complex64::new(0.0, 0.0));
                    spec.as_ref()
                        .expect("spectrum computed for analytic functions")
                        .iter()
                        .map(|&lam| f.eval(lam) - f0)
                        .sum()
                }
            };
            let value = raw * s;
            if !(value.re.is_finite() && value.im.is_finite()) {
                return Err(Error::Domain(format!("non-finite statistic for {f}")));
            }
            Ok(LesSample {
                value,
                replicate,
                function: f.to_string(),
            })
        })
        .collect()
}

/// Eigenvalues of the densified matrix (order unspecified).
pub fn spectrum(m: &BandMatrix, dense_limit: usize) -> Result<Vec<Complex64>> {
    let dense = m.to_dense(dense_limit)?;
    let n = dense.nrows();
    let schur = Schur::try_new(dense, f64::EPSILON, 200 * n.max(10)).ok_or(Error::EigenNoConvergence {
        replicate: m.origin().map(|o| o.replicate),
    })?;
    let (_, t) = schur.unpack();
    Ok((0..n).map(|i| t[(i, i)]).collect())
}

/// `tr (zI − M)^{-1} − n/z` by LU factorization.
pub fn resolvent_trace(m: &BandMatrix, z: Complex64, dense_limit: usize) -> Result<Complex64> {
    let n = m.n();
    let a = DMatrix::from_diagonal_element(n, n, z) - m.to_dense(dense_limit)?;
    let inv = a
        .lu()
        .try_inverse()
        .ok_or_else(|| Error::Singular(format!("zI - M is singular at z = {z}")))?;
    Ok(inv.trace() - Complex64::new(n as f64, 0.0) / z)
}

/// `Σ_{l=1}^{terms} z^{−l−1} tr M^l`, the Neumann expansion of the centered
/// resolvent trace (valid for `|z| > ‖M‖`).
pub fn resolvent_trace_neumann(m: &BandMatrix, z: Complex64, terms: usize) -> Complex64 {
    let inv = z.inv();
    let mut zp = inv * inv;
    let mut acc = Complex64::new(0.0, 0.0);
    for t in trace_powers(m, terms) {
        acc += t * zp;
        zp *= inv;
    }
    acc
}

/// Row `i` as contiguous runs `(first slot, first column, length)`; at most
/// three, split where the band wraps around (or is cut off at) the edges.
fn row_segments(m: &BandMatrix, i: usize) -> impl Iterator<Item = (usize, usize, usize)> {
    let spec = m.spec();
    let n = m.n() as isize;
    let b = spec.half_bandwidth() as isize;
    let periodic = spec.topology().is_periodic();
    let lo = i as isize - b;
    let hi = i as isize + b + 1;
    let runs = [(lo, hi.min(0), n), (lo.max(0), hi.min(n), 0), (lo.max(n), hi, -n)];
    runs.into_iter()
        .filter(move |&(start, end, shift)| end > start && (shift == 0 || periodic))
        .map(move |(start, end, shift)| ((start - lo) as usize, (start + shift) as usize, (end - start) as usize))
}

fn band_mul(m: &BandMatrix, v: &[Complex64], out: &mut [Complex64]) {
    for (i, o) in out.iter_mut().enumerate() {
        let row = m.row(i);
        *o = row_segments(m, i)
            .map(|(s, j, len)| {
                row[s..s + len]
                    .iter()
                    .zip(&v[j..j + len])
                    .map(|(a, x)| a * x)
                    .sum::<Complex64>()
            })
            .sum();
    }
}

fn band_mul_adjoint(m: &BandMatrix, u: &[Complex64], out: &mut [Complex64]) {
    out.fill(Complex64::new(0.0, 0.0));
    for (i, ui) in u.iter().enumerate() {
        let row = m.row(i);
        for (s, j, len) in row_segments(m, i) {
            for (o, a) in out[j..j + len].iter_mut().zip(&row[s..s + len]) {
                *o += a.conj() * ui;
            }
        }
    }
}

fn norm2(v: &[Complex64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Power iteration on `M*M` from a start vector seeded by `seed`; returns
/// `‖M v‖` for the final unit vector `v`, a lower bound on `‖M‖`.
pub fn spectral_norm(m: &BandMatrix, iters: usize, seed: u64) -> Result<f64> {
    if iters < 10 {
        return Err(Error::Domain("spectral_norm needs at least 10 iterations".into()));
    }
    let n = m.n();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut v: Vec<Complex64> = (0..n)
        .map(|_| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            Complex64::new(re, im)
        })
        .collect();
    let mut w = vec![Complex64::new(0.0, 0.0); n];
    let mut estimate = 0.0;
    for _ in 0..iters {
        let nv = norm2(&v);
        if nv == 0.0 {
            return Ok(0.0);
        }
        v.iter_mut().for_each(|x| *x /= nv);
        band_mul(m, &v, &mut w);
        estimate = norm2(&w);
        if estimate == 0.0 {
            return Ok(0.0);
        }
        band_mul_adjoint(m, &w, &mut v);
    }
    Ok(estimate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matgen::{sample, BandSpec, EntryLaw, Topology};
    use crate::profiles::{PeriodizedProfile, VarianceProfile};

    fn spec(n: usize, b: usize, topology: Topology) -> BandSpec {
        let nu = if topology == Topology::PeriodicNu {
            (2 * b + 1) as f64 / n as f64
        } else {
            0.0
        };
        BandSpec::new(
            n,
            b,
            topology,
            PeriodizedProfile::new(VarianceProfile::uniform(), nu).unwrap(),
        )
        .unwrap()
    }

    fn rel(a: Complex64, b: Complex64) -> f64 {
        (a - b).norm() / b.norm().max(1.0)
    }

    #[test]
    fn parses_test_functions() {
        assert_eq!("z".parse::<TestFunction>().unwrap(), TestFunction::Monomial(1));
        assert_eq!("z3".parse::<TestFunction>().unwrap(), TestFunction::Monomial(3));
        assert_eq!("z^4".parse::<TestFunction>().unwrap(), TestFunction::Monomial(4));
        assert!("z0".parse::<TestFunction>().is_err());
        assert!("q".parse::<TestFunction>().is_err());
        let p: TestFunction = "poly:1;0;2-1.5i".parse().unwrap();
        assert_eq!(
            p.coefficients().unwrap(),
            vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0), Complex64::new(2.0, -1.5)]
        );
        assert_eq!(p.to_string().parse::<TestFunction>().unwrap(), p);
        assert_eq!(parse_complex("1e-3+2i").unwrap(), Complex64::new(1e-3, 2.0));
        assert_eq!(parse_complex("-i").unwrap(), Complex64::new(0.0, -1.0));
        assert_eq!(parse_complex("2.5e+1").unwrap(), Complex64::new(25.0, 0.0));
        let e: TestFunction = "exp".parse().unwrap();
        assert!((e.eval(Complex64::new(1.0, 0.0)).re - std::f64::consts::E).abs() < 1e-15);
    }

    #[test]
    fn trace_power_simple_cases() {
        let s = spec(8, 2, Topology::PeriodicZero);
        let m = sample(&s, EntryLaw::ComplexGaussian, 3, 0);
        let diag: Complex64 = (0..8).map(|i| m.get(i, i)).sum();
        assert!((trace_power(&m, 1) - diag).norm() < 1e-14);
        assert_eq!(trace_power(&m, 0), Complex64::new(8.0, 0.0));
        let z = BandMatrix::zeros(s);
        for l in 1..6 {
            assert_eq!(trace_power(&z, l), Complex64::new(0.0, 0.0));
        }
    }

    #[test]
    fn trace_power_matches_triple_loop() {
        let s = spec(6, 2, Topology::PeriodicZero);
        let m = sample(&s, EntryLaw::ComplexGaussian, 11, 0);
        let d = m.to_dense(64).unwrap();
        let mut naive = Complex64::new(0.0, 0.0);
        for a in 0..6 {
            for b in 0..6 {
                for c in 0..6 {
                    naive += d[(a, b)] * d[(b, c)] * d[(c, a)];
                }
            }
        }
        assert!(rel(trace_power(&m, 3), naive) < 1e-10);
    }

    #[test]
    fn trace_powers_match_dense_powers() {
        for topo in [Topology::PeriodicNu, Topology::PeriodicZero, Topology::NonperiodicZero] {
            for (n, b) in [(9, 1), (12, 2), (10, 4), (7, 3)] {
                let m = sample(&spec(n, b, topo), EntryLaw::ComplexGaussian, 5, 1);
                let d = m.to_dense(64).unwrap();
                let mut p = d.clone();
                let t = trace_powers(&m, 9);
                for (l, tl) in t.iter().enumerate() {
                    assert!(rel(*tl, p.trace()) < 1e-10, "{topo:?} n={n} b={b} l={}", l + 1);
                    p = &p * &d;
                }
            }
        }
    }

    #[test]
    fn les_delta_definitions() {
        let s = spec(6, 1, Topology::PeriodicZero);
        let m = sample(&s, EntryLaw::ComplexGaussian, 2, 0);
        let sc = (3.0_f64 / 6.0).sqrt();
        let z = les_delta(&m, &TestFunction::Monomial(1), 64).unwrap();
        assert!((z.value - trace_power(&m, 1) * sc).norm() < 1e-14);
        let c = les_delta(&m, &"const:2.5".parse().unwrap(), 64).unwrap();
        assert_eq!(c.value, Complex64::new(0.0, 0.0));
        let z2 = les_delta(&m, &TestFunction::Monomial(2), 64).unwrap();
        let eig: Complex64 = spectrum(&m, 64).unwrap().iter().map(|l| l * l).sum();
        assert!(rel(z2.value, eig * sc) < 1e-8);
        let e = les_delta(&m, &"exp".parse().unwrap(), 64).unwrap();
        assert!(e.value.re.is_finite());
        assert!(matches!(
            les_delta(&m, &"exp".parse().unwrap(), 4),
            Err(Error::DenseLimit { .. })
        ));
    }

    #[test]
    fn spectrum_special_matrices() {
        let s = spec(6, 0, Topology::NonperiodicZero);
        let d = BandMatrix::from_fn(s, |i, _| Complex64::new(i as f64, -(i as f64)));
        let mut ev = spectrum(&d, 64).unwrap();
        ev.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap());
        for (i, e) in ev.iter().enumerate() {
            assert!((e - Complex64::new(i as f64, -(i as f64))).norm() < 1e-12);
        }
        let s = spec(6, 1, Topology::NonperiodicZero);
        let nil = BandMatrix::from_fn(s, |i, j| {
            if j == i + 1 {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        assert!(spectrum(&nil, 64).unwrap().iter().all(|e| e.norm() < 1e-6));
        let m = sample(&spec(6, 2, Topology::PeriodicZero), EntryLaw::ComplexGaussian, 8, 0);
        let sum: Complex64 = spectrum(&m, 64).unwrap().iter().sum();
        assert!((sum - trace_power(&m, 1)).norm() < 1e-9);
    }

    #[test]
    fn resolvent_examples() {
        let s = spec(6, 1, Topology::PeriodicZero);
        let two = Complex64::new(2.0, 0.0);
        assert!(resolvent_trace(&BandMatrix::zeros(s.clone()), two, 64).unwrap().norm() < 1e-15);
        let d = BandMatrix::from_fn(s.clone(), |i, j| {
            if i == j {
                Complex64::new(0.1 * i as f64, 0.2)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        let z = Complex64::new(1.5, 0.5);
        let expect: Complex64 = (0..6)
            .map(|i| (z - Complex64::new(0.1 * i as f64, 0.2)).inv())
            .sum::<Complex64>()
            - Complex64::new(6.0, 0.0) / z;
        assert!((resolvent_trace(&d, z, 64).unwrap() - expect).norm() < 1e-12);
        let m = sample(&s, EntryLaw::ComplexGaussian, 4, 0);
        let three = Complex64::new(3.0, 0.0);
        let lu = resolvent_trace(&m, three, 64).unwrap();
        let neu = resolvent_trace_neumann(&m, three, 40);
        assert!((lu - neu).norm() < 1e-8);
        let singular = BandMatrix::from_fn(s, |i, j| {
            if i == j {
                two
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        assert!(matches!(resolvent_trace(&singular, two, 64), Err(Error::Singular(_))));
    }

    #[test]
    fn spectral_norm_examples() {
        let s = spec(8, 0, Topology::PeriodicZero);
        let c = Complex64::new(0.6, -0.8) * 2.0;
        let d = BandMatrix::from_fn(s.clone(), |_, _| c);
        assert!((spectral_norm(&d, 20, 1).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(spectral_norm(&BandMatrix::zeros(s.clone()), 20, 1).unwrap(), 0.0);
        assert!(spectral_norm(&d, 5, 1).is_err());
    }
}
