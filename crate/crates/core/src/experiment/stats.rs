//! Sample moments and normality diagnostics for complex samples.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fewest samples accepted by [`normality_diagnostics`].
pub const MIN_DIAGNOSTIC_SAMPLES: usize = 50;

/// Probabilities reported by [`quantiles`].
pub const QUANTILE_LEVELS: [f64; 7] = [0.01, 0.05, 0.25, 0.5, 0.75, 0.95, 0.99];

/// Location and spread of a complex sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexMoments {
    pub mean: Complex64,
    /// `Σ |X − X̄|² / (N − 1)`.
    pub variance: f64,
    /// `Σ (X − X̄)² / (N − 1)`.
    pub pseudo_variance: Complex64,
    /// `mean |X − X̄|⁴ / (mean |X − X̄|²)²`; 2 for a circular Gaussian.
    pub kurtosis: f64,
}

pub fn mean(xs: &[Complex64]) -> Complex64 {
    xs.iter().sum::<Complex64>() / xs.len() as f64
}

pub fn moments(xs: &[Complex64]) -> Result<ComplexMoments> {
    let n = xs.len();
    if n < 2 {
        return Err(Error::Diagnostics("need at least two samples".into()));
    }
    let m = mean(xs);
    let mut s2 = 0.0;
    let mut s4 = 0.0;
    let mut pseudo = Complex64::new(0.0, 0.0);
    for x in xs {
        let d = x - m;
        let a = d.norm_sqr();
        s2 += a;
        s4 += a * a;
        pseudo += d * d;
    }
    let nf = n as f64;
    let m2 = s2 / nf;
    Ok(ComplexMoments {
        mean: m,
        variance: s2 / (nf - 1.0),
        pseudo_variance: pseudo / (nf - 1.0),
        kurtosis: if m2 > 0.0 { (s4 / nf) / (m2 * m2) } else { f64::NAN },
    })
}

/// `Σ (X − X̄) conj(Y − Ȳ) / (N − 1)`.
pub fn cross_covariance(xs: &[Complex64], ys: &[Complex64]) -> Result<Complex64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::Diagnostics("cross-covariance needs two equal samples of size >= 2".into()));
    }
    let (mx, my) = (mean(xs), mean(ys));
    let s: Complex64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my).conj()).sum();
    Ok(s / (xs.len() as f64 - 1.0))
}

/// `(σ̂² − σ²) / (σ² √((κ̂ − 1)/N))`: the sample variance against a target,
/// standardized by the large-sample spread of a sample variance.
pub fn variance_z_score(sample_variance: f64, kurtosis: f64, theory: f64, n: usize) -> Option<f64> {
    let spread = theory * ((kurtosis - 1.0) / n as f64).sqrt();
    (spread.is_finite() && spread > 0.0).then(|| (sample_variance - theory) / spread)
}

/// Shape statistics of one real component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartDiagnostics {
    pub variance: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    /// `N/6 · (S² + K²/4)`, asymptotically χ²₂ under normality.
    pub jarque_bera: f64,
}

/// Gaussianity diagnostics of a complex sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub samples: usize,
    pub re: PartDiagnostics,
    pub im: PartDiagnostics,
    pub covariance_re_im: f64,
    pub correlation_re_im: f64,
    /// `Var(Re) / Var(Im)`.
    pub variance_ratio: f64,
}

fn part(xs: &[f64]) -> Result<PartDiagnostics> {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for x in xs {
        let d = x - m;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    if !(m2 > 0.0) {
        return Err(Error::Diagnostics("zero variance".into()));
    }
    let skewness = m3 / m2.powf(1.5);
    let excess_kurtosis = m4 / (m2 * m2) - 3.0;
    Ok(PartDiagnostics {
        variance: m2 * n / (n - 1.0),
        skewness,
        excess_kurtosis,
        jarque_bera: n / 6.0 * (skewness * skewness + excess_kurtosis * excess_kurtosis / 4.0),
    })
}

/// Skewness, excess kurtosis and Jarque–Bera of each part, plus the
/// real–imaginary covariance and variance ratio.
pub fn normality_diagnostics(xs: &[Complex64]) -> Result<Diagnostics> {
    if xs.len() < MIN_DIAGNOSTIC_SAMPLES {
        return Err(Error::Diagnostics(format!(
            "need at least {MIN_DIAGNOSTIC_SAMPLES} samples, got {}",
            xs.len()
        )));
    }
    let re: Vec<f64> = xs.iter().map(|x| x.re).collect();
    let im: Vec<f64> = xs.iter().map(|x| x.im).collect();
    let pr = part(&re)?;
    let pi = part(&im)?;
    let n = xs.len() as f64;
    let (mr, mi) = (re.iter().sum::<f64>() / n, im.iter().sum::<f64>() / n);
    let cov = re.iter().zip(&im).map(|(a, b)| (a - mr) * (b - mi)).sum::<f64>() / (n - 1.0);
    Ok(Diagnostics {
        samples: xs.len(),
        re: pr,
        im: pi,
        covariance_re_im: cov,
        correlation_re_im: cov / (pr.variance * pi.variance).sqrt(),
        variance_ratio: pr.variance / pi.variance,
    })
}

/// Empirical quantiles at [`QUANTILE_LEVELS`] (linear interpolation between
/// order statistics).
pub fn quantiles(xs: &[f64]) -> Vec<f64> {
    if xs.is_empty() {
        return Vec::new();
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    QUANTILE_LEVELS
        .iter()
        .map(|p| {
            let pos = p * (v.len() - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
        })
        .collect()
}
