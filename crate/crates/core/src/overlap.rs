//! The focusing integral Υ and the three-beam Gaussian overlap I_SFG.
//!
//! Mode functions are M_m = √(k_m z_R/π)·(1/q)·e^{ik_m z}·e^{ik_m r²/2q},
//! q = z − iz_R, normalized on transverse planes, with the focus at the
//! crystal centre. Under that normalization I_SFG is dimensionless.
//!
//! Carrying the radial integral through exactly gives
//! I_SFG = (4i/k₊)·√(π k_p k_s k_i z_R)·Υ(κ, ζ_R, −R_k): the mismatch ratio
//! enters the physical overlap with a minus sign. [`i_sfg_direct3d`] checks
//! this by brute force.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{ensure, Error, Result};
use crate::quadrature::{gauss_legendre, integrate, QuadConfig};
use crate::quantities::{CrystalSpec, FocusParams, WaveTriple};

pub const DEFAULT_QUAD_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UpsilonResult {
    pub value: Complex64,
    pub abs_sq: f64,
    pub est_error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum OverlapMethod {
    Reduced1d,
    Direct3d,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OverlapResult {
    pub value: Complex64,
    pub method: OverlapMethod,
    /// Absolute error estimate on `value`.
    pub est_error: f64,
}

impl OverlapResult {
    pub fn abs_sq(&self) -> f64 {
        self.value.norm_sqr()
    }
}

pub(crate) fn check_tol(quad_tol: f64) -> Result<()> {
    ensure(quad_tol > 1e-14 && quad_tol < 1e-3, || format!("quad_tol must lie in (1e-14, 1e-3), got {quad_tol}"))
}

/// Υ = (ζ_R/2π) ∫_{−1/2}^{1/2} e^{−iκζ} / [(ζ − iζ_R)(R_kζ + iζ_R)] dζ.
///
/// ```
/// use spdc_core::overlap::upsilon_raw;
/// let u = upsilon_raw(0.0, 0.5, 0.0, 1e-10).unwrap();
/// assert!((u.value.re - 0.25).abs() < 1e-10);
/// ```
pub fn upsilon_raw(kappa: f64, zeta_r: f64, r_k: f64, quad_tol: f64) -> Result<UpsilonResult> {
    check_tol(quad_tol)?;
    ensure(zeta_r.is_finite() && zeta_r > 0.0, || format!("zeta_R must be positive, got {zeta_r}"))?;
    ensure(r_k.abs() < 1.0, || format!("|R_k| must be < 1, got {r_k}"))?;
    ensure(kappa.is_finite(), || "kappa must be finite".into())?;
    if zeta_r < 1e-8 {
        return Err(Error::NonConvergence(format!("zeta_R = {zeta_r:e} is too small to resolve")));
    }
    let i = Complex64::i();
    let integrand = |z: f64| {
        let phase = Complex64::from_polar(1.0, -kappa * z);
        phase / ((z - i * zeta_r) * (r_k * z + i * zeta_r))
    };
    let scale = zeta_r / (2.0 * PI);
    // The quadrature tolerance applies to Υ itself, so rescale the absolute floor.
    let cfg = QuadConfig { rel_tol: quad_tol, abs_tol: 1e-15 / scale, max_subdivisions: 4000 };
    let out = integrate(integrand, -0.5, 0.5, &cfg)?;
    let value = out.value * scale;
    Ok(UpsilonResult { value, abs_sq: value.norm_sqr(), est_error: out.est_error * scale })
}

pub fn upsilon(fp: &FocusParams, quad_tol: f64) -> Result<UpsilonResult> {
    upsilon_raw(fp.kappa, fp.zeta_r, fp.r_k, quad_tol)
}

/// The brightness figure of merit ζ_R·|Υ|².
pub fn focus_objective(kappa: f64, zeta_r: f64, r_k: f64, quad_tol: f64) -> Result<f64> {
    Ok(zeta_r * upsilon_raw(kappa, zeta_r, r_k, quad_tol)?.abs_sq)
}

pub(crate) fn check_geometry(waves: &WaveTriple, crystal: &CrystalSpec, fp: &FocusParams) -> Result<()> {
    let zr = fp.zeta_r * crystal.length();
    ensure((zr - fp.rayleigh_range).abs() <= 1e-9 * fp.rayleigh_range, || {
        format!("zeta_R * L = {zr:e} m disagrees with z_R = {:e} m", fp.rayleigh_range)
    })?;
    let rk = waves.wavenumber_ratio();
    ensure((rk - fp.r_k).abs() <= 1e-9, || format!("R_k = {} does not match the waves (R_k = {rk})", fp.r_k))
}

/// Prefactor (4i/k₊)·√(π k_p k_s k_i z_R).
fn sfg_prefactor(waves: &WaveTriple, z_r: f64) -> Complex64 {
    let kp = waves.pump().wavenumber();
    let ks = waves.signal().wavenumber();
    let ki = waves.idler().wavenumber();
    Complex64::new(0.0, 4.0 / waves.k_plus()) * (PI * kp * ks * ki * z_r).sqrt()
}

/// I_SFG through the 1D reduction. The residual mismatch is `fp.kappa`;
/// `fp.r_k` and `fp.zeta_r` must agree with `waves` and `crystal`.
/// For degenerate waves this is I_SHG.
pub fn i_sfg_gaussian(
    waves: &WaveTriple,
    crystal: &CrystalSpec,
    fp: &FocusParams,
    quad_tol: f64,
) -> Result<OverlapResult> {
    check_geometry(waves, crystal, fp)?;
    let u = upsilon_raw(fp.kappa, fp.zeta_r, -fp.r_k, quad_tol)?;
    let pre = sfg_prefactor(waves, fp.rayleigh_range);
    Ok(OverlapResult { value: pre * u.value, method: OverlapMethod::Reduced1d, est_error: pre.norm() * u.est_error })
}

/// Tensor Gauss–Legendre grid for the brute-force overlap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Direct3dGrid {
    /// Longitudinal panels; `None` picks a count from κ and ζ_R.
    pub z_panels: Option<usize>,
    pub z_nodes: usize,
    pub r_panels: usize,
    pub r_nodes: usize,
    /// Radial cut-off in units of the local combined 1/e field radius.
    pub r_extent: f64,
}

impl Default for Direct3dGrid {
    fn default() -> Self {
        Direct3dGrid { z_panels: None, z_nodes: 24, r_panels: 2, r_nodes: 40, r_extent: 7.0 }
    }
}

fn gauss_mode(k: f64, z_r: f64, r2: f64, z: f64) -> Complex64 {
    let q = Complex64::new(z, -z_r);
    let amp = (k * z_r / PI).sqrt();
    let phase = Complex64::new(0.0, k * z) + Complex64::new(0.0, k * r2 * 0.5) / q;
    amp / q * phase.exp()
}

/// Brute-force ∫d³x M_p* e^{iQz} M_s M_i by nested Gauss–Legendre quadrature
/// over r and z, with all three Rayleigh ranges equal to `fp.rayleigh_range`.
pub fn i_sfg_direct3d(
    waves: &WaveTriple,
    crystal: &CrystalSpec,
    fp: &FocusParams,
    grid: &Direct3dGrid,
) -> Result<OverlapResult> {
    check_geometry(waves, crystal, fp)?;
    let z = fp.rayleigh_range;
    i_sfg_direct3d_general(waves, crystal.length(), fp.kappa, [z, z, z], grid)
}

/// As [`i_sfg_direct3d`] with separate Rayleigh ranges `[pump, signal, idler]`
/// (all foci at the crystal centre).
pub fn i_sfg_direct3d_general(
    waves: &WaveTriple,
    length: f64,
    kappa: f64,
    z_rs: [f64; 3],
    grid: &Direct3dGrid,
) -> Result<OverlapResult> {
    ensure(z_rs.iter().all(|z| *z > 0.0 && z.is_finite()), || "Rayleigh ranges must be positive".into())?;
    ensure(grid.z_nodes > 0 && grid.r_nodes > 0 && grid.r_panels > 0 && grid.r_extent > 0.0, || {
        "grid sizes must be positive".into()
    })?;
    let kp = waves.pump().wavenumber();
    let ks = waves.signal().wavenumber();
    let ki = waves.idler().wavenumber();
    let q_eff = waves.k_minus() - kappa / length;
    let zr_min = z_rs.iter().cloned().fold(f64::INFINITY, f64::min) / length;
    let z_panels =
        grid.z_panels.unwrap_or_else(|| 8 + (kappa.abs() / PI).ceil() as usize + (2.0 / zr_min).ceil() as usize);
    ensure(z_panels > 0, || "need at least one z panel".into())?;
    let (zx, zw) = gauss_legendre(grid.z_nodes);
    let (rx, rw) = gauss_legendre(grid.r_nodes);

    let mut total = Complex64::new(0.0, 0.0);
    let panel = length / z_panels as f64;
    for pz in 0..z_panels {
        let a = -0.5 * length + pz as f64 * panel;
        for (xz, wz) in zx.iter().zip(&zw) {
            let zz = a + 0.5 * panel * (xz + 1.0);
            // Local 1/e field radius of the product M_p* M_s M_i.
            let inv_w2: f64 = [kp, ks, ki].iter().zip(&z_rs).map(|(k, zr)| k * zr / (2.0 * (zz * zz + zr * zr))).sum();
            let w = inv_w2.recip().sqrt();
            let r_max = grid.r_extent * w;
            let rp = r_max / grid.r_panels as f64;
            let mut radial = Complex64::new(0.0, 0.0);
            for pr in 0..grid.r_panels {
                let ra = pr as f64 * rp;
                for (xr, wr) in rx.iter().zip(&rw) {
                    let r = ra + 0.5 * rp * (xr + 1.0);
                    let r2 = r * r;
                    let f = gauss_mode(kp, z_rs[0], r2, zz).conj()
                        * gauss_mode(ks, z_rs[1], r2, zz)
                        * gauss_mode(ki, z_rs[2], r2, zz);
                    radial += f * (2.0 * PI * r * wr * 0.5 * rp);
                }
            }
            total += radial * Complex64::from_polar(1.0, q_eff * zz) * (wz * 0.5 * panel);
        }
    }
    Ok(OverlapResult { value: total, method: OverlapMethod::Direct3d, est_error: f64::NAN })
}

/// Thin-crystal overlap Φ(Δk) = ∫dz∫dxdy e^{iΔkz} U_pU_sU_i with
/// U_m = e^{−r²/W_m²}: (π/ΣW_m⁻²)·L·sinc(ΔkL/2).
pub fn phi_thin_crystal(length: f64, waists: [f64; 3], delta_k: f64) -> Result<Complex64> {
    ensure(length > 0.0 && waists.iter().all(|w| *w > 0.0), || "length and waists must be positive".into())?;
    let transverse = PI / waists.iter().map(|w| w.powi(-2)).sum::<f64>();
    Ok(Complex64::new(transverse * length * sinc(0.5 * delta_k * length), 0.0))
}

/// α_m = √(2/(πW_m²)), the plane normalization of a Gaussian of 1/e field radius W.
pub fn alpha(waist: f64) -> f64 {
    (2.0 / (PI * waist * waist)).sqrt()
}

pub fn sinc(u: f64) -> f64 {
    if u.abs() < 1e-8 {
        1.0 - u * u / 6.0
    } else {
        u.sin() / u
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantities::{solve_poling_period, OpticalWave};
    use proptest::prelude::*;

    fn geometry(kappa: f64, zeta_r: f64, r_k: f64) -> (WaveTriple, CrystalSpec, FocusParams) {
        let s = OpticalWave::new(800e-9, 1.8).unwrap();
        let i = OpticalWave::new(800e-9, 1.8).unwrap();
        let p = OpticalWave::new(400e-9, 1.8 * (1.0 + r_k) / (1.0 - r_k)).unwrap();
        let w = WaveTriple::new(p, s, i).unwrap();
        let l = 0.01;
        let c = CrystalSpec::new(l, None, 1e-12, "t").unwrap();
        let fp = FocusParams::new(zeta_r * l, kappa, zeta_r, w.wavenumber_ratio()).unwrap();
        (w, c, fp)
    }

    #[test]
    fn closed_form_quarter() {
        let u = upsilon_raw(0.0, 0.5, 0.0, 1e-12).unwrap();
        assert!((u.value - Complex64::new(0.25, 0.0)).norm() < 1e-12);
        assert!((u.abs_sq - u.value.norm_sqr()).abs() < 1e-16);
    }

    #[test]
    fn published_optimum_value() {
        let v = focus_objective(-3.0, 0.18, 0.04, 1e-10).unwrap();
        assert!((v - 0.054).abs() < 0.054 * 0.05, "{v}");
    }

    #[test]
    fn tiny_zeta_is_rejected() {
        assert!(matches!(upsilon_raw(0.0, 1e-9, 0.0, 1e-9), Err(Error::NonConvergence(_))));
        assert!(upsilon_raw(0.0, 0.5, 0.0, 1e-2).is_err());
    }

    #[test]
    fn riemann_lebesgue_decay() {
        let mut prev = f64::INFINITY;
        for kappa in [50.0, 200.0, 800.0, 3200.0] {
            let a = upsilon_raw(kappa, 0.3, 0.05, 1e-9).unwrap().value.norm();
            assert!(a < prev);
            prev = a;
        }
        assert!(prev < 1e-3);
    }

    #[test]
    fn reduced_matches_direct_at_ppktp_optimum() {
        let w = WaveTriple::from_signal_idler(800e-9, 1.844, 800e-9, 1.757, 1.964).unwrap();
        let l = 0.01;
        let period = solve_poling_period(&w, l, -3.484).unwrap();
        let c = CrystalSpec::new(l, Some(period), 2.4e-12, "ppktp").unwrap();
        let fp = crate::quantities::derive_focus_params(&w, &c, 0.17808 * l).unwrap();
        let a = i_sfg_gaussian(&w, &c, &fp, 1e-10).unwrap();
        let b = i_sfg_direct3d(&w, &c, &fp, &Direct3dGrid::default()).unwrap();
        assert!((a.value - b.value).norm() < 1e-6 * a.value.norm(), "{} vs {}", a.value, b.value);
    }

    #[test]
    fn geometry_mismatch_rejected() {
        let (w, c, mut fp) = geometry(0.0, 0.5, 0.02);
        fp.r_k = 0.03;
        assert!(i_sfg_gaussian(&w, &c, &fp, 1e-9).is_err());
        let (w, c, mut fp) = geometry(0.0, 0.5, 0.02);
        fp.rayleigh_range *= 2.0;
        assert!(i_sfg_gaussian(&w, &c, &fp, 1e-9).is_err());
    }

    #[test]
    fn phi_spot_values() {
        let w = 30e-6;
        let phi = phi_thin_crystal(0.01, [w, w, w], 0.0).unwrap();
        assert!((phi.re - 0.01 * PI * w * w / 3.0).abs() < 1e-24);
        let zero = phi_thin_crystal(0.01, [w, w, w], 2.0 * PI / 0.01).unwrap();
        assert!(zero.norm() < 1e-24);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        // Substituting ζ → −ζ and conjugating maps the integral onto itself,
        // so Υ is real for real arguments.
        #[test]
        fn upsilon_is_real(kappa in -20.0f64..20.0, zeta_r in 0.02f64..5.0, r_k in -0.3f64..0.3) {
            let u = upsilon_raw(kappa, zeta_r, r_k, 1e-10).unwrap();
            prop_assert!(u.value.im.abs() <= 1e-9 * u.value.norm() + 1e-14);
        }

        #[test]
        fn error_bound_respects_tolerance(kappa in -20.0f64..20.0, zeta_r in 0.01f64..5.0, r_k in 0.0f64..0.2, e in 4i32..12) {
            let tol = 10f64.powi(-e);
            let u = upsilon_raw(kappa, zeta_r, r_k, tol).unwrap();
            prop_assert!(u.est_error <= tol * u.value.norm() + 1e-15);
        }

        #[test]
        fn depends_only_on_dimensionless_groups(kappa in -10.0f64..5.0, zeta_r in 0.05f64..3.0, r_k in 0.0f64..0.2, scale in 0.2f64..5.0) {
            // Two crystals of different length with the same (κ, ζ_R, R_k).
            let (w, _, _) = geometry(kappa, zeta_r, r_k);
            let l1 = 0.01;
            let l2 = 0.01 * scale;
            let f1 = FocusParams::dimensionless(kappa, zeta_r, w.wavenumber_ratio(), l1).unwrap();
            let f2 = FocusParams::dimensionless(kappa, zeta_r, w.wavenumber_ratio(), l2).unwrap();
            let u1 = upsilon(&f1, 1e-10).unwrap().value;
            let u2 = upsilon(&f2, 1e-10).unwrap().value;
            prop_assert_eq!(u1, u2);
        }

        #[test]
        fn thin_crystal_asymptote(kappa in -12.0f64..12.0, zeta_r in 50.0f64..400.0, r_k in 0.0f64..0.05) {
            let u = upsilon_raw(kappa, zeta_r, r_k, 1e-10).unwrap().value;
            let scaled = u * (2.0 * PI * zeta_r);
            prop_assert!((scaled - Complex64::new(sinc(kappa / 2.0), 0.0)).norm() < 1e-2);
        }

        #[test]
        fn detuning_suppresses_overlap(zeta_r in 0.05f64..2.0, r_k in 0.0f64..0.2) {
            let (w, c, fp) = geometry(-3.0, zeta_r, r_k);
            let near = i_sfg_gaussian(&w, &c, &fp, 1e-9).unwrap().abs_sq();
            let far_fp = FocusParams { kappa: 400.0, ..fp };
            let far = i_sfg_gaussian(&w, &c, &far_fp, 1e-9).unwrap().abs_sq();
            prop_assert!(far < near);
        }
    }
}
