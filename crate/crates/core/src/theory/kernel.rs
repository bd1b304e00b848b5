//! The covariance kernel `σ(z, η̄)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::fourier::{series_tail, series_tail_bound, JumpExpansion};
use super::{Method, TheoryVariance, Truncation};
use crate::error::{Error, Result};
use crate::profiles::PeriodizedProfile;

/// `|zη̄|` must exceed `1 + KERNEL_MARGIN`.
pub const KERNEL_MARGIN: f64 = 0.05;
/// Power-series terms are dropped once their total is below this.
const POWER_SERIES_TOL: f64 = 1e-15;
/// Convolution grid resolution for kernel coefficients, cells per unit length.
const KERNEL_CELLS_PER_UNIT: f64 = 256.0;

/// Numerical parameters of the kernel and the contour integrals built on it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub profile: PeriodizedProfile,
    /// Fourier series truncation `K` (`nu > 0`).
    pub series_terms: usize,
    /// Transform integral cutoff `T` (`nu = 0` cross-checks).
    pub integral_cutoff: f64,
    /// Quadrature nodes per unit length for transform integrals.
    pub nodes_per_unit: usize,
    /// Contour radius `1 + ε`.
    pub contour_radius: f64,
    /// Trapezoid nodes per contour.
    pub contour_nodes: usize,
}

impl KernelParams {
    pub fn new(profile: PeriodizedProfile) -> Self {
        Self {
            profile,
            series_terms: 4096,
            integral_cutoff: 64.0,
            nodes_per_unit: 32,
            contour_radius: 1.25,
            contour_nodes: 512,
        }
    }

    pub fn nu(&self) -> f64 {
        self.profile.nu()
    }

    pub fn validate(&self) -> Result<()> {
        if self.profile.is_periodic() {
            if self.series_terms < 64 {
                return Err(Error::Domain("series truncation K must be at least 64".into()));
            }
        } else if self.integral_cutoff < 50.0 || self.nodes_per_unit < 32 {
            return Err(Error::Domain(
                "integral cutoff T must be >= 50 and nodes per unit >= 32".into(),
            ));
        }
        if self.contour_radius.is_nan() || self.contour_radius <= 1.0 {
            return Err(Error::Domain(format!(
                "contour radius {} must exceed 1",
                self.contour_radius
            )));
        }
        if self.contour_nodes < 8 || self.contour_nodes % 2 == 1 {
            return Err(Error::Domain("contour nodes must be even and at least 8".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
enum Route {
    /// `w(0)/a² + ν Σ_{|k|≤K} ŵ²(2a−ŵ)/(a²(a−ŵ)²) + Σ_{l≥2} l a^{−l−1} T_l(K)`.
    Fourier {
        nu: f64,
        w0: f64,
        coeffs: Vec<Complex64>,
        tails: Vec<(Complex64, f64)>,
    },
    /// `Σ_{l≥1} a^{−l−1} V_l` with `V_l = l w^{(l)}(0)`.
    PowerSeries { v: Vec<f64>, err: Vec<f64> },
}

/// `σ` prepared for repeated evaluation with `|zη̄| ≥ min_abs`.
#[derive(Debug, Clone)]
pub struct CovarianceKernel {
    route: Route,
    min_abs: f64,
    bound: f64,
    truncation: Truncation,
}

fn check_abs(a: f64) -> Result<()> {
    if !(a > 1.0 + KERNEL_MARGIN) {
        return Err(Error::Domain(format!(
            "|z·conj(eta)| = {a} must exceed {}",
            1.0 + KERNEL_MARGIN
        )));
    }
    Ok(())
}

impl CovarianceKernel {
    /// Fourier series for `nu > 0`, power series for `nu = 0`.
    pub fn new(params: &KernelParams, min_abs: f64) -> Result<Self> {
        params.validate()?;
        check_abs(min_abs)?;
        if params.profile.is_periodic() {
            Self::fourier(params, min_abs)
        } else {
            Self::power_series(params, min_abs)
        }
    }

    fn fourier(params: &KernelParams, min_abs: f64) -> Result<Self> {
        let p = &params.profile;
        let nu = p.nu();
        let base = p.base();
        let k = params.series_terms;
        let coeffs: Vec<Complex64> = (-(k as i64)..=k as i64)
            .map(|j| base.fourier(j as f64 * nu))
            .collect();
        let jumps = base.jumps();
        let tv = base.total_variation();
        let mut tails = Vec::new();
        for l in 2..64u32 {
            let t = match &jumps {
                Some(j) => series_tail(&JumpExpansion::new(j, l), nu, l, k),
                None => (Complex64::new(0.0, 0.0), series_tail_bound(tv, nu, l, k)),
            };
            let size = series_tail_bound(tv, nu, l, k);
            tails.push(t);
            if l as f64 * size * min_abs.powi(-(l as i32) - 1) < 1e-18 {
                break;
            }
        }
        Ok(Self {
            route: Route::Fourier {
                nu,
                w0: base.value(0.0),
                coeffs,
                tails,
            },
            min_abs,
            bound: 0.0,
            truncation: Truncation {
                series_terms: Some(k),
                ..Default::default()
            },
        })
    }

    /// Power series in `1/(zη̄)` with coefficients from a convolution grid
    /// (`nu > 0` uses the circular convolution over one period).
    pub fn power_series(params: &KernelParams, min_abs: f64) -> Result<Self> {
        params.validate()?;
        check_abs(min_abs)?;
        let p = &params.profile;
        let base = p.base();
        let omega = base.sup_w().max(1.0);
        let r = 1.0 / min_abs;
        // |V_l| ≤ l ω, so the remainder after L terms is at most ω Σ_{l>L} l r^{l+1}.
        let remainder = |big_l: usize| {
            let lf = big_l as f64;
            omega * r.powf(lf + 2.0) * ((lf + 1.0) * (1.0 - r) + r) / (1.0 - r).powi(2)
        };
        let mut big_l = 2usize;
        while remainder(big_l) > POWER_SERIES_TOL {
            big_l += 1;
        }
        let lmax = big_l as u32;
        let width = p.convolution_domain(lmax);
        let grid = ((width * KERNEL_CELLS_PER_UNIT).round() as usize).max(512);
        let fine = p.self_convolutions_at_zero(lmax, grid)?;
        let coarse = p.self_convolutions_at_zero(lmax, grid / 2)?;
        let v: Vec<f64> = fine.iter().enumerate().map(|(i, c)| (i + 1) as f64 * c).collect();
        let err: Vec<f64> = fine
            .iter()
            .zip(&coarse)
            .enumerate()
            .map(|(i, (f, c))| (i + 1) as f64 * (f - c).abs())
            .collect();
        Ok(Self {
            route: Route::PowerSeries { v, err },
            min_abs,
            bound: remainder(big_l),
            truncation: Truncation {
                grid_cells: Some(grid),
                power_terms: Some(big_l),
                ..Default::default()
            },
        })
    }

    pub fn method(&self) -> Method {
        match self.route {
            Route::Fourier { .. } => Method::FourierSeries,
            Route::PowerSeries { .. } => Method::ConvolutionSeries,
        }
    }

    pub fn truncation(&self) -> Truncation {
        self.truncation
    }

    /// `σ` at `a = zη̄` with an error estimate.
    pub fn eval(&self, a: Complex64) -> Result<(Complex64, f64)> {
        if a.norm() < self.min_abs * (1.0 - 1e-12) {
            check_abs(a.norm())?;
            return Err(Error::Domain(format!(
                "|z·conj(eta)| = {} is below the prepared bound {}",
                a.norm(),
                self.min_abs
            )));
        }
        let inv = a.inv();
        match &self.route {
            Route::Fourier {
                nu,
                w0,
                coeffs,
                tails,
            } => {
                let a2 = a * a;
                let mut acc = Complex64::new(0.0, 0.0);
                for w in coeffs {
                    let d = a - w;
                    acc += w * w * (a * 2.0 - w) / (a2 * d * d);
                }
                let mut value = *w0 * inv * inv + acc * *nu;
                let mut err = 0.0;
                let mut pw = inv * inv * inv;
                for (i, (t, e)) in tails.iter().enumerate() {
                    let l = (i + 2) as f64;
                    value += pw * *t * l;
                    err += l * e * pw.norm();
                    pw *= inv;
                }
                err += 1e-15 * value.norm() * (coeffs.len() as f64).sqrt();
                Ok((value, err))
            }
            Route::PowerSeries { v, err } => {
                let mut value = Complex64::new(0.0, 0.0);
                let mut e = self.bound;
                let mut pw = inv * inv;
                for (vl, el) in v.iter().zip(err) {
                    value += pw * *vl;
                    e += el * pw.norm();
                    pw *= inv;
                }
                Ok((value, e + 1e-16 * value.norm()))
            }
        }
    }
}

/// `σ(z, η̄)`.
pub fn kernel(params: &KernelParams, z: Complex64, eta: Complex64) -> Result<TheoryVariance> {
    let a = z * eta.conj();
    check_abs(a.norm())?;
    let k = CovarianceKernel::new(params, a.norm())?;
    let (value, err) = k.eval(a)?;
    Ok(TheoryVariance {
        value,
        method: k.method(),
        truncation: k.truncation(),
        trunc_error: err,
        cross_check: None,
    })
}
