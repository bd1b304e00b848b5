//! Variance profiles and their Fourier data.
//!
//! A profile `w` is a non-negative function supported on `[-1/2, 1/2]` with unit
//! integral. A [`PeriodizedProfile`] pairs it with the band fraction `nu`: for
//! `nu > 0` the profile is extended `1/nu`-periodically, for `nu == 0` it is used
//! as-is on the real line. The two cases are separate code paths throughout.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `∫ w = 1` at construction.
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// Smallest number of grid cells allowed across the unit support in the
/// convolution routines.
const MIN_CELLS_PER_SUPPORT: f64 = 8.0;

/// `sin(x)/x`, with the removable singularity filled in.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-6 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// Shape of a profile. Also the JSON form used in experiment configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ProfileKind {
    /// `w ≡ 1` on `[-1/2, 1/2]`.
    Uniform,
    /// Constant `values[i]` on `[breaks[i], breaks[i+1])`.
    #[serde(rename = "piecewise")]
    PiecewiseConstant { breaks: Vec<f64>, values: Vec<f64> },
    /// Samples on a uniform grid spanning `[-1/2, 1/2]`, linearly interpolated.
    Tabulated { grid: Vec<f64> },
}

const UNIFORM_BREAKS: [f64; 2] = [-0.5, 0.5];
const UNIFORM_VALUES: [f64; 1] = [1.0];

/// A validated variance profile `w`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ProfileKind", into = "ProfileKind")]
pub struct VarianceProfile {
    kind: ProfileKind,
    normalization: f64,
    sup_w: f64,
}

impl TryFrom<ProfileKind> for VarianceProfile {
    type Error = Error;

    fn try_from(kind: ProfileKind) -> Result<Self> {
        VarianceProfile::new(kind)
    }
}

impl From<VarianceProfile> for ProfileKind {
    fn from(p: VarianceProfile) -> Self {
        p.kind
    }
}

impl VarianceProfile {
    pub fn uniform() -> Self {
        Self {
            kind: ProfileKind::Uniform,
            normalization: 1.0,
            sup_w: 1.0,
        }
    }

    pub fn piecewise(breaks: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        Self::new(ProfileKind::PiecewiseConstant { breaks, values })
    }

    pub fn tabulated(grid: Vec<f64>) -> Result<Self> {
        Self::new(ProfileKind::Tabulated { grid })
    }

    /// Validates `kind` and computes its normalization and supremum.
    pub fn new(kind: ProfileKind) -> Result<Self> {
        let invalid = |msg: String| Err(Error::InvalidProfile(msg));
        let (normalization, sup_w) = match &kind {
            ProfileKind::Uniform => (1.0, 1.0),
            ProfileKind::PiecewiseConstant { breaks, values } => {
                if breaks.len() < 2 || values.len() + 1 != breaks.len() {
                    return invalid(format!(
                        "need k+1 breaks for k values, got {} breaks and {} values",
                        breaks.len(),
                        values.len()
                    ));
                }
                if breaks.iter().chain(values).any(|v| !v.is_finite()) {
                    return invalid("non-finite break or value".into());
                }
                if breaks.windows(2).any(|w| w[1] <= w[0]) {
                    return invalid("breaks must be strictly increasing".into());
                }
                if breaks[0] < -0.5 || breaks[breaks.len() - 1] > 0.5 {
                    return invalid("breaks must lie in [-1/2, 1/2]".into());
                }
                if values.iter().any(|&v| v < 0.0) {
                    return invalid("profile values must be non-negative".into());
                }
                // Continuity at 0 when 0 is an interior break.
                if let Some(i) = breaks[1..breaks.len() - 1].iter().position(|&b| b == 0.0) {
                    if (values[i] - values[i + 1]).abs() > NORMALIZATION_TOL {
                        return invalid("profile must be continuous at 0".into());
                    }
                }
                let total: f64 = breaks
                    .windows(2)
                    .zip(values)
                    .map(|(b, v)| (b[1] - b[0]) * v)
                    .sum();
                let sup = values.iter().cloned().fold(0.0, f64::max);
                (total, sup)
            }
            ProfileKind::Tabulated { grid } => {
                if grid.len() < 3 {
                    return invalid("tabulated profile needs at least 3 grid values".into());
                }
                if grid.iter().any(|v| !v.is_finite() || *v < 0.0) {
                    return invalid("grid values must be finite and non-negative".into());
                }
                let h = 1.0 / (grid.len() - 1) as f64;
                let total = h * (grid.iter().sum::<f64>() - 0.5 * (grid[0] + grid[grid.len() - 1]));
                let sup = grid.iter().cloned().fold(0.0, f64::max);
                (total, sup)
            }
        };
        if (normalization - 1.0).abs() > NORMALIZATION_TOL {
            return invalid(format!("profile integrates to {normalization}, expected 1"));
        }
        Ok(Self {
            kind,
            normalization,
            sup_w,
        })
    }

    pub fn kind(&self) -> &ProfileKind {
        &self.kind
    }

    /// `∫ w` as computed at construction.
    pub fn normalization(&self) -> f64 {
        self.normalization
    }

    /// `ω = sup w`.
    pub fn sup_w(&self) -> f64 {
        self.sup_w
    }

    fn pieces(&self) -> Option<(&[f64], &[f64])> {
        match &self.kind {
            ProfileKind::Uniform => Some((&UNIFORM_BREAKS, &UNIFORM_VALUES)),
            ProfileKind::PiecewiseConstant { breaks, values } => Some((breaks, values)),
            ProfileKind::Tabulated { .. } => None,
        }
    }

    /// `w(x)`; zero outside the support.
    pub fn value(&self, x: f64) -> f64 {
        if let Some((breaks, values)) = self.pieces() {
            let last = breaks[breaks.len() - 1];
            if x < breaks[0] || x > last {
                return 0.0;
            }
            if x == last {
                return values[values.len() - 1];
            }
            let i = breaks.partition_point(|&b| b <= x) - 1;
            return values[i];
        }
        let ProfileKind::Tabulated { grid } = &self.kind else {
            unreachable!()
        };
        if !(-0.5..=0.5).contains(&x) {
            return 0.0;
        }
        let segs = grid.len() - 1;
        let t = (x + 0.5) * segs as f64;
        let i = (t.floor() as usize).min(segs - 1);
        let frac = t - i as f64;
        grid[i] + frac * (grid[i + 1] - grid[i])
    }

    /// Exact `∫_a^b w(x) dx`.
    pub fn integrate(&self, a: f64, b: f64) -> f64 {
        let (lo, hi) = (a.max(-0.5), b.min(0.5));
        if hi <= lo {
            return 0.0;
        }
        if let Some((breaks, values)) = self.pieces() {
            return breaks
                .windows(2)
                .zip(values)
                .map(|(br, v)| {
                    let overlap = hi.min(br[1]) - lo.max(br[0]);
                    if overlap > 0.0 {
                        overlap * v
                    } else {
                        0.0
                    }
                })
                .sum();
        }
        let ProfileKind::Tabulated { grid } = &self.kind else {
            unreachable!()
        };
        let segs = grid.len() - 1;
        let h = 1.0 / segs as f64;
        let first = (((lo + 0.5) / h).floor() as usize).min(segs - 1);
        let mut total = 0.0;
        for i in first..segs {
            let x0 = -0.5 + i as f64 * h;
            if x0 >= hi {
                break;
            }
            let (u, v) = (lo.max(x0), hi.min(x0 + h));
            if v > u {
                // Trapezoid is exact on a linear piece.
                total += (v - u) * 0.5 * (self.value(u) + self.value(v));
            }
        }
        total
    }

    /// `∫ w(x) e^{2πi·freq·x} dx`, in closed form for every kind.
    pub fn fourier(&self, freq: f64) -> Complex64 {
        if let Some((breaks, values)) = self.pieces() {
            return breaks
                .windows(2)
                .zip(values)
                .map(|(br, &v)| {
                    let len = br[1] - br[0];
                    let mid = 0.5 * (br[0] + br[1]);
                    Complex64::from_polar(v * len * sinc(PI * freq * len), 2.0 * PI * freq * mid)
                })
                .sum();
        }
        let ProfileKind::Tabulated { grid } = &self.kind else {
            unreachable!()
        };
        let h = 1.0 / (grid.len() - 1) as f64;
        let theta = PI * freq * h;
        let even = h * sinc(theta);
        // ∫_{-h/2}^{h/2} u e^{2πi f u} du = i (h²/2) (sin θ − θ cos θ)/θ²
        let odd = if theta.abs() < 1e-3 {
            let t2 = theta * theta;
            0.5 * h * h * theta * (1.0 / 3.0 - t2 / 30.0 + t2 * t2 / 840.0)
        } else {
            0.5 * h * h * (theta.sin() - theta * theta.cos()) / (theta * theta)
        };
        grid.windows(2)
            .enumerate()
            .map(|(i, y)| {
                let mid = -0.5 + (i as f64 + 0.5) * h;
                let mean = 0.5 * (y[0] + y[1]);
                let slope = (y[1] - y[0]) / h;
                Complex64::from_polar(1.0, 2.0 * PI * freq * mid)
                    * Complex64::new(mean * even, slope * odd)
            })
            .sum()
    }

    /// Jump points `(x, w(x+) − w(x−))` of a piecewise-constant profile; `None`
    /// for tabulated profiles.
    pub fn jumps(&self) -> Option<Vec<(f64, f64)>> {
        let (breaks, values) = self.pieces()?;
        let mut out = Vec::with_capacity(breaks.len());
        let mut prev = 0.0;
        for (i, &b) in breaks.iter().enumerate() {
            let next = values.get(i).copied().unwrap_or(0.0);
            if next != prev {
                out.push((b, next - prev));
            }
            prev = next;
        }
        Some(out)
    }

    /// Total variation of `w` over the real line, jumps at the support edges included.
    pub fn total_variation(&self) -> f64 {
        match self.jumps() {
            Some(j) => j.iter().map(|(_, s)| s.abs()).sum(),
            None => {
                let ProfileKind::Tabulated { grid } = &self.kind else {
                    unreachable!()
                };
                grid[0]
                    + grid[grid.len() - 1]
                    + grid.windows(2).map(|w| (w[1] - w[0]).abs()).sum::<f64>()
            }
        }
    }
}

/// A profile together with its band fraction `nu`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodizedProfile {
    base: VarianceProfile,
    nu: f64,
}

impl PeriodizedProfile {
    /// `nu` must lie in `[0, 1]`; `nu == 0` selects the non-periodized profile.
    pub fn new(base: VarianceProfile, nu: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&nu) {
            return Err(Error::InvalidProfile(format!("nu = {nu} outside [0, 1]")));
        }
        Ok(Self { base, nu })
    }

    pub fn non_periodic(base: VarianceProfile) -> Self {
        Self { base, nu: 0.0 }
    }

    pub fn base(&self) -> &VarianceProfile {
        &self.base
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn is_periodic(&self) -> bool {
        self.nu > 0.0
    }

    /// `1/nu`, or `None` for the non-periodized profile.
    pub fn period(&self) -> Option<f64> {
        self.is_periodic().then(|| 1.0 / self.nu)
    }

    /// `w_ν(x)` (or `w_0(x)` when `nu == 0`).
    pub fn evaluate(&self, x: f64) -> f64 {
        match self.period() {
            Some(p) => {
                let reduced = x - p * ((x + 0.5 * p) / p).floor();
                self.base.value(reduced)
            }
            None => self.base.value(x),
        }
    }

    /// Fourier coefficient `ŵ_ν(k) = ∫ w(x) e^{2πikνx} dx`.
    pub fn fourier_coeff(&self, k: i64) -> Result<Complex64> {
        if !self.is_periodic() {
            return Err(Error::Domain(
                "fourier_coeff needs nu > 0; use fourier_transform for nu = 0".into(),
            ));
        }
        Ok(self.base.fourier(k as f64 * self.nu))
    }

    /// Fourier transform `ŵ_0(t) = ∫ w(x) e^{2πitx} dx`.
    pub fn fourier_transform(&self, t: f64) -> Result<Complex64> {
        if self.is_periodic() {
            return Err(Error::Domain(
                "fourier_transform needs nu = 0; use fourier_coeff for nu > 0".into(),
            ));
        }
        Ok(self.base.fourier(t))
    }

    /// `w^{(l)}(0)`: the `l`-fold self-convolution at the origin, circular over one
    /// period for `nu > 0` and linear for `nu == 0`.
    pub fn self_convolution_at_zero(&self, l: u32, grid_size: usize) -> Result<f64> {
        if l == 0 {
            return Err(Error::Domain("convolution order must be >= 1".into()));
        }
        let all = self.self_convolutions_at_zero(l, grid_size)?;
        Ok(all[l as usize - 1])
    }

    /// Domain width used by the convolution grid for orders up to `lmax`.
    pub(crate) fn convolution_domain(&self, lmax: u32) -> f64 {
        match self.period() {
            Some(p) => p,
            None => ((lmax as usize + 1).next_power_of_two().max(2)) as f64,
        }
    }

    /// `[w^{(1)}(0), …, w^{(lmax)}(0)]` from one grid.
    ///
    /// The profile is replaced by its cell averages on `grid_size` cells, and the
    /// convolution powers of that step function are evaluated exactly: the
    /// discrete convolution of the cell masses is combined with the cardinal
    /// B-spline of order `l`. Step profiles whose breaks fall on cell edges are
    /// therefore reproduced up to rounding.
    pub(crate) fn self_convolutions_at_zero(&self, lmax: u32, grid_size: usize) -> Result<Vec<f64>> {
        if lmax == 0 {
            return Ok(Vec::new());
        }
        if grid_size < 256 {
            return Err(Error::Domain(format!("grid size {grid_size} must be at least 256")));
        }
        let width = self.convolution_domain(lmax);
        let h = width / grid_size as f64;
        if 1.0 / h < MIN_CELLS_PER_SUPPORT {
            return Err(Error::Domain(format!(
                "grid of {grid_size} cells over width {width} does not resolve the unit support"
            )));
        }
        let n = grid_size as i64;
        // Cell s covers [s h, (s+1) h) for s in [-n/2, n/2), stored at s mod n.
        let mut cells: Vec<Complex64> = vec![Complex64::new(0.0, 0.0); grid_size];
        for s in -n / 2..n / 2 {
            let mass = self.base.integrate(s as f64 * h, (s + 1) as f64 * h);
            cells[s.rem_euclid(n) as usize] = Complex64::new(mass, 0.0);
        }
        let mut planner = FftPlanner::<f64>::new();
        let forward = planner.plan_fft_forward(grid_size);
        let inverse = planner.plan_fft_inverse(grid_size);
        forward.process(&mut cells);
        let spectrum = cells;
        let mut power = spectrum.clone();
        let mut work = vec![Complex64::new(0.0, 0.0); grid_size];
        let mut out = Vec::with_capacity(lmax as usize);
        for l in 1..=lmax {
            if l > 1 {
                power.iter_mut().zip(&spectrum).for_each(|(p, s)| *p *= s);
            }
            work.copy_from_slice(&power);
            inverse.process(&mut work);
            let spline = cardinal_bspline_at_integers(l);
            let mut acc = 0.0;
            for (m, &b) in spline.iter().enumerate().take(l as usize) {
                if b != 0.0 {
                    let idx = (-(m as i64)).rem_euclid(n) as usize;
                    acc += work[idx].re / grid_size as f64 * b;
                }
            }
            out.push(acc / h);
        }
        Ok(out)
    }
}

/// Values `M_l(0), …, M_l(l)` of the order-`l` cardinal B-spline supported on
/// `[0, l]` (Cox–de Boor recursion; `M_1` is the indicator of `[0, 1)`).
pub(crate) fn cardinal_bspline_at_integers(l: u32) -> Vec<f64> {
    let l = l as usize;
    let mut cur = vec![0.0; l + 1];
    cur[0] = 1.0;
    for k in 2..=l {
        let mut next = vec![0.0; l + 1];
        for (m, slot) in next.iter_mut().enumerate().take(k + 1) {
            let x = m as f64;
            let left = cur[m];
            let right = if m >= 1 { cur[m - 1] } else { 0.0 };
            *slot = (x * left + (k as f64 - x) * right) / (k as f64 - 1.0);
        }
        cur = next;
    }
    cur
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn uniform(nu: f64) -> PeriodizedProfile {
        PeriodizedProfile::new(VarianceProfile::uniform(), nu).unwrap()
    }

    fn stepped() -> VarianceProfile {
        VarianceProfile::piecewise(vec![-0.5, -0.25, 0.25, 0.5], vec![0.5, 1.5, 0.5]).unwrap()
    }

    #[test]
    fn evaluate_uniform() {
        assert_eq!(uniform(0.5).evaluate(0.0), 1.0);
        assert_eq!(uniform(0.5).evaluate(2.0), 1.0);
        assert_eq!(uniform(0.0).evaluate(0.7), 0.0);
        // Gap between copies for nu = 1/2.
        assert_eq!(uniform(0.5).evaluate(0.75), 0.0);
    }

    #[test]
    fn rejects_bad_profiles() {
        assert!(VarianceProfile::piecewise(vec![-0.5, 0.5], vec![0.9]).is_err());
        assert!(VarianceProfile::piecewise(vec![-0.5, 0.5], vec![0.0]).is_err());
        assert!(VarianceProfile::piecewise(vec![-0.5, 0.0, 0.5], vec![0.5, 1.5]).is_err());
        assert!(VarianceProfile::piecewise(vec![-0.6, 0.4], vec![1.0]).is_err());
        assert!(VarianceProfile::piecewise(vec![-0.5, 0.5], vec![-1.0]).is_err());
        assert!(VarianceProfile::tabulated(vec![1.0, 1.0]).is_err());
        assert!(VarianceProfile::tabulated(vec![0.5, 0.5, 0.5]).is_err());
        assert!(PeriodizedProfile::new(VarianceProfile::uniform(), 1.5).is_err());
    }

    #[test]
    fn tabulated_normalization_and_value() {
        // Tent 2 - 4|x| integrates to 1.
        let p = VarianceProfile::tabulated(vec![0.0, 2.0, 0.0]).unwrap();
        assert_abs_diff_eq!(p.value(0.0), 2.0);
        assert_abs_diff_eq!(p.value(0.25), 1.0);
        assert_abs_diff_eq!(p.integrate(-0.5, 0.5), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.integrate(0.0, 0.25), 0.375, epsilon = 1e-15);
    }

    #[test]
    fn fourier_coeff_examples() {
        assert_abs_diff_eq!(uniform(0.3).fourier_coeff(0).unwrap().re, 1.0);
        let c = uniform(0.5).fourier_coeff(1).unwrap();
        assert_abs_diff_eq!(c.re, 2.0 / PI, epsilon = 1e-15);
        assert_abs_diff_eq!(uniform(1.0).fourier_coeff(1).unwrap().norm(), 0.0, epsilon = 1e-15);
        assert!(uniform(0.0).fourier_coeff(1).is_err());
    }

    #[test]
    fn fourier_transform_examples() {
        let p = uniform(0.0);
        assert_abs_diff_eq!(p.fourier_transform(0.0).unwrap().re, 1.0);
        assert_abs_diff_eq!(p.fourier_transform(1.0).unwrap().norm(), 0.0, epsilon = 1e-15);
        // sin(π/2)/(π/2)
        assert_abs_diff_eq!(p.fourier_transform(0.5).unwrap().re, 2.0 / PI, epsilon = 1e-15);
        assert!(uniform(0.5).fourier_transform(0.5).is_err());
    }

    #[test]
    fn tabulated_fourier_matches_quadrature() {
        let p = VarianceProfile::tabulated(vec![0.2, 1.0, 1.6, 1.2, 0.2]).unwrap();
        for &f in &[0.0, 0.37, 3.0, 11.5] {
            // Midpoint rule on a fine grid as an independent check.
            let m = 200_000;
            let h = 1.0 / m as f64;
            let q: Complex64 = (0..m)
                .map(|i| {
                    let x = -0.5 + (i as f64 + 0.5) * h;
                    Complex64::from_polar(p.value(x) * h, 2.0 * PI * f * x)
                })
                .sum();
            let c = p.fourier(f);
            assert!((c - q).norm() < 1e-9, "f = {f}: {c} vs {q}");
        }
    }

    #[test]
    fn even_profile_has_real_coefficients() {
        let p = PeriodizedProfile::new(stepped(), 0.37).unwrap();
        for k in -50..50 {
            assert!(p.fourier_coeff(k).unwrap().im.abs() < 1e-14);
        }
    }

    #[test]
    fn bspline_values() {
        assert_eq!(cardinal_bspline_at_integers(1), vec![1.0, 0.0]);
        assert_eq!(cardinal_bspline_at_integers(2), vec![0.0, 1.0, 0.0]);
        let m3 = cardinal_bspline_at_integers(3);
        assert_abs_diff_eq!(m3[1], 0.5);
        assert_abs_diff_eq!(m3[2], 0.5);
        let m4 = cardinal_bspline_at_integers(4);
        assert_abs_diff_eq!(m4[1], 1.0 / 6.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m4[2], 4.0 / 6.0, epsilon = 1e-15);
    }

    #[test]
    fn self_convolution_examples() {
        let p = uniform(0.0);
        assert_abs_diff_eq!(p.self_convolution_at_zero(1, 4096).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.self_convolution_at_zero(2, 4096).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.self_convolution_at_zero(3, 4096).unwrap(), 0.75, epsilon = 1e-12);
        // Circular convolution of the constant 1 on a unit circle stays 1.
        assert_abs_diff_eq!(uniform(1.0).self_convolution_at_zero(5, 1024).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn self_convolution_grid_checks() {
        assert!(uniform(0.0).self_convolution_at_zero(2, 128).is_err());
        // Any size works; 3·1024 cells over a period of 3 align with the support edges.
        assert_abs_diff_eq!(uniform(1.0 / 3.0).self_convolution_at_zero(4, 3072).unwrap(), 2.0 / 3.0, epsilon = 1e-12);
        // 256 cells over width 64 is 4 cells per unit.
        assert!(uniform(0.0).self_convolution_at_zero(40, 256).is_err());
        assert!(uniform(0.0).self_convolution_at_zero(0, 256).is_err());
    }

    #[test]
    fn self_convolution_stepped_profile_brute_force() {
        // w^{(2)}(0) = ∫ w(x) w(-x) dx = ∫ w² for an even profile.
        let p = PeriodizedProfile::non_periodic(stepped());
        let expect = 0.25 * 0.25 * 2.0 + 0.5 * 1.5 * 1.5;
        assert_abs_diff_eq!(p.self_convolution_at_zero(2, 1024).unwrap(), expect, epsilon = 1e-12);
    }
}
