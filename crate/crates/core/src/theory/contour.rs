//! Limiting covariances as double contour integrals against the kernel.
//!
//! With `z = r e^{iθ}` and `ζ = η̄ = r e^{iφ}` both traversed counterclockwise,
//! `Σ_ij = (1/N²) Σ_{p,q} f_i(z_p) z_p · conj(f_j(η_q)) ζ_q · σ(z_p ζ_q)`,
//! the trapezoid rule applied to `−(1/4π²) ∮∮ f_i(z) conj(f_j(η)) σ dz dζ`.
//! Under this orientation `f = z^k` in the full-band case gives `+k`.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::kernel::{CovarianceKernel, KernelParams};
use super::{monomial_variance, Method, TheoryVariance, Truncation};
use crate::error::{Error, Result};
use crate::les::TestFunction;
use crate::matgen::EntryLaw;

fn check_functions(f_i: &TestFunction, f_j: &TestFunction, r: f64) -> Result<()> {
    for f in [f_i, f_j] {
        if f.radius() <= r {
            return Err(Error::Domain(format!(
                "{f} is analytic only on radius {}, contour radius is {r}",
                f.radius()
            )));
        }
    }
    Ok(())
}

fn nodes(r: f64, n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|p| Complex64::from_polar(r, 2.0 * PI * p as f64 / n as f64))
        .collect()
}

/// `(1/N²) Σ_{p,q} F_p G_q S_{(p+q) mod N}`.
fn bilinear(f: &[Complex64], g: &[Complex64], s: &[Complex64]) -> Complex64 {
    let n = f.len();
    let mut acc = Complex64::new(0.0, 0.0);
    for (m, sm) in s.iter().enumerate() {
        let mut conv = Complex64::new(0.0, 0.0);
        for (p, fp) in f.iter().enumerate() {
            conv += fp * g[(m + n - p) % n];
        }
        acc += conv * sm;
    }
    acc / (n * n) as f64
}

fn quadrature(
    f_i: &TestFunction,
    f_j: &TestFunction,
    kernel: &CovarianceKernel,
    r: f64,
    n: usize,
) -> Result<(Complex64, f64)> {
    let z = nodes(r, n);
    let f: Vec<Complex64> = z.iter().map(|&zp| f_i.eval(zp) * zp).collect();
    let g: Vec<Complex64> = z.iter().map(|&zq| f_j.eval(zq.conj()).conj() * zq).collect();
    let mut s = Vec::with_capacity(n);
    let mut kernel_err: f64 = 0.0;
    for w in nodes(r * r, n) {
        let (v, e) = kernel.eval(w)?;
        s.push(v);
        kernel_err = kernel_err.max(e);
    }
    let mass = |v: &[Complex64]| v.iter().map(|x| x.norm()).sum::<f64>() / n as f64;
    Ok((bilinear(&f, &g, &s), kernel_err * mass(&f) * mass(&g)))
}

/// `Σ_ij` by trapezoid quadrature on circles of radius `1 + ε`; polynomial
/// pairs also carry the series value `Σ_l a_l conj(b_l) V_l` as a cross-check.
pub fn limiting_covariance(
    f_i: &TestFunction,
    f_j: &TestFunction,
    params: &KernelParams,
) -> Result<TheoryVariance> {
    params.validate()?;
    let r = params.contour_radius;
    check_functions(f_i, f_j, r)?;
    let kernel = CovarianceKernel::new(params, r * r)?;
    let n = params.contour_nodes;
    let (fine, kerr) = quadrature(f_i, f_j, &kernel, r, n)?;
    let (coarse, _) = quadrature(f_i, f_j, &kernel, r, n / 2)?;
    let cross_check = match series_covariance(f_i, f_j, params) {
        Ok(s) => Some(Box::new(s)),
        Err(_) => None,
    };
    let mut truncation = kernel.truncation();
    truncation.contour_nodes = Some(n);
    Ok(TheoryVariance {
        value: fine,
        method: Method::ContourQuadrature,
        truncation,
        trunc_error: (fine - coarse).norm() + kerr + 1e-14 * fine.norm().max(1.0),
        cross_check,
    })
}

/// `Σ_l a_l conj(b_l) V_l` for polynomial test functions; distinct powers do
/// not correlate and constants do not contribute.
pub fn series_covariance(
    f_i: &TestFunction,
    f_j: &TestFunction,
    params: &KernelParams,
) -> Result<TheoryVariance> {
    let (Some(a), Some(b)) = (f_i.coefficients(), f_j.coefficients()) else {
        return Err(Error::Domain("series covariance needs polynomial test functions".into()));
    };
    let base = params.profile.base();
    let nu = params.nu();
    let mut value = Complex64::new(0.0, 0.0);
    let mut err = 0.0;
    let mut method = Method::ClosedForm;
    let mut truncation = Truncation::default();
    for l in 1..a.len().min(b.len()) {
        let w = a[l] * b[l].conj();
        if w == Complex64::new(0.0, 0.0) {
            continue;
        }
        let v = monomial_variance(base, nu, l as u32)?;
        value += w * v.value;
        err += w.norm() * v.trunc_error;
        if v.method != Method::ClosedForm {
            method = v.method;
            truncation = v.truncation;
        }
    }
    Ok(TheoryVariance {
        value,
        method,
        truncation,
        trunc_error: err,
        cross_check: None,
    })
}

/// `Υ_ij`: the unconjugated analogue of [`limiting_covariance`]. Its kernel
/// carries a factor `E[x²]` per power and is identically zero for circularly
/// symmetric entries, so the quadrature sum vanishes term by term.
pub fn pseudo_covariance(
    f_i: &TestFunction,
    f_j: &TestFunction,
    params: &KernelParams,
    law: EntryLaw,
) -> Result<TheoryVariance> {
    params.validate()?;
    let r = params.contour_radius;
    check_functions(f_i, f_j, r)?;
    let n = params.contour_nodes;
    let tau = law.pseudo_second_moment();
    let truncation = Truncation {
        contour_nodes: Some(n),
        ..Default::default()
    };
    if tau != Complex64::new(0.0, 0.0) {
        return Err(Error::Domain(
            "pseudo-covariance is only available for circularly symmetric entries".into(),
        ));
    }
    Ok(TheoryVariance {
        value: Complex64::new(0.0, 0.0),
        method: Method::ContourQuadrature,
        truncation,
        trunc_error: 0.0,
        cross_check: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::{PeriodizedProfile, VarianceProfile};

    fn params(nu: f64) -> KernelParams {
        KernelParams::new(PeriodizedProfile::new(VarianceProfile::uniform(), nu).unwrap())
    }

    #[test]
    fn full_band_monomials_give_k() {
        let p = params(1.0);
        for k in 1..=6 {
            let f = TestFunction::Monomial(k);
            let v = limiting_covariance(&f, &f, &p).unwrap();
            assert!((v.value - Complex64::new(k as f64, 0.0)).norm() < 1e-8, "k={k}: {}", v.value);
            let s = v.cross_check.unwrap();
            assert!((s.value.re - k as f64).abs() < 1e-8);
        }
    }

    #[test]
    fn distinct_monomials_and_constants_vanish() {
        for nu in [0.0, 0.5, 1.0] {
            let p = params(nu);
            let z = TestFunction::Monomial(1);
            let z2 = TestFunction::Monomial(2);
            let c: TestFunction = "const:3".parse().unwrap();
            assert!(limiting_covariance(&z, &z2, &p).unwrap().value.norm() < 1e-10);
            assert!(limiting_covariance(&c, &c, &p).unwrap().value.norm() < 1e-10);
            assert!(limiting_covariance(&c, &z, &p).unwrap().value.norm() < 1e-10);
        }
    }

    #[test]
    fn exp_in_full_band_is_bessel_value() {
        // Σ_l V_l/(l!)² with V_l = l gives Σ_{l≥1} 1/(l!(l−1)!) = I_1(2).
        let f: TestFunction = "exp".parse().unwrap();
        let v = limiting_covariance(&f, &f, &params(1.0)).unwrap();
        assert!((v.value.re - 1.590_636_854_637_329).abs() < 1e-10, "{}", v.value);
        assert!(v.value.im.abs() < 1e-10);
    }

    #[test]
    fn pseudo_covariance_vanishes() {
        let z = TestFunction::Monomial(1);
        let v = pseudo_covariance(&z, &z, &params(1.0), EntryLaw::ComplexGaussian).unwrap();
        assert_eq!(v.value, Complex64::new(0.0, 0.0));
    }

    #[test]
    fn rejects_small_radius() {
        let mut p = params(0.5);
        p.contour_radius = 1.0;
        let z = TestFunction::Monomial(1);
        assert!(limiting_covariance(&z, &z, &p).is_err());
        let narrow = TestFunction::analytic("narrow", 1.1, |z| z).unwrap();
        assert!(limiting_covariance(&narrow, &z, &params(0.5)).is_err());
    }
}
