//! Limiting quantities: monomial variances, the covariance kernel, limiting
//! (pseudo-)covariances and the combinatorial identities behind them.

mod combinatorics;
mod contour;
mod fourier;
mod kernel;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use combinatorics::{
    eulerian, eulerian_variance_exact, irwin_hall_pdf, sinc_power_integral,
    sinc_power_integral_exact, uniform_narrow_variance_exact,
};
pub use contour::{limiting_covariance, pseudo_covariance, series_covariance};
pub use kernel::{kernel, CovarianceKernel, KernelParams};

use crate::error::{Error, Result};
use crate::profiles::{PeriodizedProfile, ProfileKind, VarianceProfile};

/// Target absolute accuracy for adaptive truncation.
pub const TARGET_ERROR: f64 = 1e-12;
/// Largest Fourier index used by the adaptive series.
pub const MAX_SERIES_TERMS: usize = 1_000_000;
const START_SERIES_TERMS: usize = 1024;
/// Convolution grid resolution, cells per unit length.
const CONVOLUTION_CELLS_PER_UNIT: f64 = 4096.0;

/// How a theory value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    FourierSeries,
    FourierIntegral,
    ConvolutionSeries,
    ContourQuadrature,
    ClosedForm,
}

/// Truncation parameters actually used.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Truncation {
    /// Fourier series `|k| ≤ K`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub series_terms: Option<usize>,
    /// Transform integral over `[−T, T]`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub integral_cutoff: Option<f64>,
    /// Convolution grid cells.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_cells: Option<usize>,
    /// Trapezoid nodes per contour.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub contour_nodes: Option<usize>,
    /// Highest power kept in a power series in `1/(zη̄)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub power_terms: Option<usize>,
}

/// A limiting variance or covariance with its provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryVariance {
    pub value: Complex64,
    pub method: Method,
    pub truncation: Truncation,
    pub trunc_error: f64,
    /// Independent evaluation of the same quantity, when one is available.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cross_check: Option<Box<TheoryVariance>>,
}

impl TheoryVariance {
    fn exact(value: f64) -> Self {
        Self {
            value: Complex64::new(value, 0.0),
            method: Method::ClosedForm,
            truncation: Truncation::default(),
            trunc_error: 0.0,
            cross_check: None,
        }
    }
}

/// Limiting variance `V_ν(z^l)` of the scaled statistic for `f = z^l`.
///
/// `nu > 0` sums the Fourier series with a jump-based tail correction, `nu = 0`
/// uses the exact rational value for the uniform profile and the convolution
/// route otherwise; `l = 1` is `w(0)` in every regime.
pub fn monomial_variance(profile: &VarianceProfile, nu: f64, l: u32) -> Result<TheoryVariance> {
    if l == 0 {
        return Err(Error::Domain("monomial degree must be at least 1".into()));
    }
    let p = PeriodizedProfile::new(profile.clone(), nu)?;
    if l == 1 {
        return Ok(TheoryVariance::exact(profile.value(0.0)));
    }
    if p.is_periodic() {
        return monomial_variance_fourier(&p, l);
    }
    if matches!(profile.kind(), ProfileKind::Uniform) {
        let exact = uniform_narrow_variance_exact(l)?;
        return Ok(TheoryVariance::exact(combinatorics::to_f64(&exact)));
    }
    monomial_variance_convolution(&p, l)
}

/// `l ν Σ_k ŵ_ν(k)^l` for `nu > 0`, or `l ∫ ŵ_0(t)^l dt` for `nu = 0`.
pub fn monomial_variance_fourier(p: &PeriodizedProfile, l: u32) -> Result<TheoryVariance> {
    if l == 0 {
        return Err(Error::Domain("monomial degree must be at least 1".into()));
    }
    if p.is_periodic() {
        let e = fourier::discrete_variance(p, l, START_SERIES_TERMS, MAX_SERIES_TERMS, TARGET_ERROR)?;
        Ok(TheoryVariance {
            value: e.value,
            method: Method::FourierSeries,
            truncation: Truncation {
                series_terms: Some(e.terms),
                ..Default::default()
            },
            trunc_error: e.error,
            cross_check: None,
        })
    } else {
        let e = fourier::continuous_variance(p.base(), l, 64.0, 32)?;
        Ok(TheoryVariance {
            value: e.value,
            method: Method::FourierIntegral,
            truncation: Truncation {
                integral_cutoff: Some(e.cutoff),
                ..Default::default()
            },
            trunc_error: e.error,
            cross_check: None,
        })
    }
}

/// Convolution-grid size used for order `l`.
fn convolution_grid(p: &PeriodizedProfile, l: u32) -> usize {
    let width = p.convolution_domain(l);
    ((width * CONVOLUTION_CELLS_PER_UNIT).round() as usize).max(256)
}

/// `l · w_ν^{(l)}(0)`, the `l`-fold self-convolution at the origin. The error
/// estimate is the change from halving the grid.
pub fn monomial_variance_convolution(p: &PeriodizedProfile, l: u32) -> Result<TheoryVariance> {
    if l == 0 {
        return Err(Error::Domain("monomial degree must be at least 1".into()));
    }
    let grid = convolution_grid(p, l);
    let fine = p.self_convolution_at_zero(l, grid)?;
    let coarse = p.self_convolution_at_zero(l, (grid / 2).max(256))?;
    let lf = l as f64;
    Ok(TheoryVariance {
        value: Complex64::new(lf * fine, 0.0),
        method: Method::ConvolutionSeries,
        truncation: Truncation {
            grid_cells: Some(grid),
            ..Default::default()
        },
        trunc_error: lf * (fine - coarse).abs() + 1e-13 * lf,
        cross_check: None,
    })
}
