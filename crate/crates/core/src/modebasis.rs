//! Laguerre–Gauss (l = 0) projections of the DFG / APG source.
//!
//! The power radiated by a time-independent source into the far field equals
//! the sum of its squared projections onto any complete set of transverse
//! modes. With circular Gaussian pump and seed only l = 0 modes contribute, and
//! with the basis waist equal to the collection mode the p = 0 term is |I_SFG|².
//!
//! Each projection reduces to one longitudinal integral: the radial integral
//! is done analytically through ∫₀^∞ e^{−Bu} L_p(au) du = (B − a)^p / B^{p+1}.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{ensure, Error, Result};
use crate::overlap::{check_geometry, check_tol};
use crate::quadrature::{integrate, QuadConfig};
use crate::quantities::{Arm, CrystalSpec, FocusParams, OpticalWave, WaveTriple};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LgBasisSpec {
    pub wavelength: f64,
    pub index: f64,
    pub rayleigh_range: f64,
    /// Number of radial orders kept (p = 0 .. P−1).
    pub max_radial_order: usize,
}

impl LgBasisSpec {
    pub fn new(wavelength: f64, index: f64, rayleigh_range: f64, max_radial_order: usize) -> Result<Self> {
        ensure(wavelength > 0.0 && index >= 1.0 && rayleigh_range > 0.0, || {
            "basis wavelength, index and Rayleigh range must be physical".into()
        })?;
        ensure(max_radial_order >= 1, || "basis needs at least one radial order".into())?;
        Ok(LgBasisSpec { wavelength, index, rayleigh_range, max_radial_order })
    }

    /// Basis whose p = 0 mode is the collection mode of `wave`.
    pub fn collection_mode(wave: &OpticalWave, rayleigh_range: f64, max_radial_order: usize) -> Result<Self> {
        Self::new(wave.vacuum_wavelength(), wave.refractive_index(), rayleigh_range, max_radial_order)
    }

    pub fn wavenumber(&self) -> f64 {
        2.0 * PI * self.index / self.wavelength
    }
}

/// N_p(r, z) = u₀(r, z)·L_p(2r²/w²)·(−q*/q)^p with u₀ the normalized Gaussian.
pub fn lg_mode(p: usize, k: f64, z_r: f64, r: f64, z: f64) -> Complex64 {
    let q = Complex64::new(z, -z_r);
    let u0 = (k * z_r / PI).sqrt() / q * (Complex64::new(0.0, k * z) + Complex64::new(0.0, 0.5 * k * r * r) / q).exp();
    let w2 = 2.0 * q.norm_sqr() / (k * z_r);
    u0 * laguerre(p, 2.0 * r * r / w2) * (-q.conj() / q).powu(p as u32)
}

pub fn laguerre(p: usize, x: f64) -> f64 {
    let (mut l0, mut l1) = (1.0, 1.0 - x);
    if p == 0 {
        return l0;
    }
    for n in 1..p {
        let l2 = ((2 * n + 1) as f64 - x) * l1 / (n as f64 + 1.0) - n as f64 * l0 / (n as f64 + 1.0);
        l0 = l1;
        l1 = l2;
    }
    l1
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParsevalSum {
    /// |c_p|² for p = 0 .. P−1.
    pub terms: Vec<f64>,
    pub total: f64,
    /// Geometric extrapolation of the neglected tail, relative to `total`.
    pub tail_estimate: f64,
}

impl ParsevalSum {
    /// Partial sums Σ_{p<n} for n = 1..=P.
    pub fn partial_sums(&self) -> Vec<f64> {
        self.terms
            .iter()
            .scan(0.0, |acc, t| {
                *acc += t;
                Some(*acc)
            })
            .collect()
    }

    /// Relative tail estimate after only the first `n` terms.
    pub fn tail_after(&self, n: usize) -> f64 {
        tail_estimate(&self.terms[..n])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParsevalOptions {
    pub quad_tol: f64,
    pub tail_threshold: f64,
}

impl Default for ParsevalOptions {
    fn default() -> Self {
        ParsevalOptions { quad_tol: 1e-9, tail_threshold: 1e-4 }
    }
}

pub const DEFAULT_BASIS_ORDER: usize = 40;

// Terms this small relative to the total are at the quadrature noise floor.
const RESOLUTION_FLOOR: f64 = 1e-14;
const TAIL_WINDOW: usize = 6;

fn tail_estimate(terms: &[f64]) -> f64 {
    let total: f64 = terms.iter().sum();
    if total == 0.0 {
        return 0.0;
    }
    let n = terms.len();
    if n < TAIL_WINDOW {
        return f64::INFINITY;
    }
    let last = &terms[n - TAIL_WINDOW..];
    let biggest = last.iter().cloned().fold(0.0, f64::max);
    if biggest <= RESOLUTION_FLOOR * total {
        return 0.0;
    }
    // Least-squares slope of ln(term) against p. The terms alternate between
    // even and odd orders, so the window holds an even number of them and the
    // extrapolation starts from the window mean rather than the last term.
    let floor = RESOLUTION_FLOOR * total * 1e-6;
    let ys: Vec<f64> = last.iter().map(|t| t.max(floor).ln()).collect();
    let m = TAIL_WINDOW as f64;
    let xm = (m - 1.0) / 2.0;
    let ym = ys.iter().sum::<f64>() / m;
    let sxx: f64 = (0..TAIL_WINDOW).map(|j| (j as f64 - xm).powi(2)).sum();
    let slope = ys.iter().enumerate().map(|(j, y)| (j as f64 - xm) * (y - ym)).sum::<f64>() / sxx;
    let ratio = slope.exp();
    if ratio >= 1.0 {
        return f64::INFINITY;
    }
    // Fitted value at the last order, then the geometric series beyond it.
    let fitted_last = (ym + slope * (m - 1.0 - xm)).exp();
    fitted_last * ratio / (1.0 - ratio) / total
}

/// Projection of e^{−iQz}·M_a·M_c* onto N_p* over the crystal, in the
/// dimensionless form
/// c_p = −(2i/√π)·ζ_R·√(K z_Rb k̂_a k̂_b k̂_c)·∫dζ e^{iκζ}(−v/v*)^p ρ^p / (u u* v* Ê)
/// with u = ζ − iζ_R, v = ζ − iζ_b, Ê = k̂_c/u* + k̂_b/v* − k̂_a/u and
/// ρ = 1 + 2i k̂_b ζ_b/(|v|² Ê).
#[allow(clippy::too_many_arguments)]
fn projection(
    p: usize,
    k_a: f64,
    k_b: f64,
    k_c: f64,
    length: f64,
    zeta_r: f64,
    zeta_b: f64,
    kappa: f64,
    cfg: &QuadConfig,
) -> Result<Complex64> {
    let kk = k_a + k_b + k_c;
    let (ka, kb, kc) = (k_a / kk, k_b / kk, k_c / kk);
    let i = Complex64::i();
    let integrand = |z: f64| {
        let u = Complex64::new(z, -zeta_r);
        let v = Complex64::new(z, -zeta_b);
        let e = kc / u.conj() + kb / v.conj() - ka / u;
        let rho = 1.0 + 2.0 * i * kb * zeta_b / (v.norm_sqr() * e);
        let gouy = -v / v.conj();
        Complex64::from_polar(1.0, kappa * z) * (gouy * rho).powu(p as u32) / (u * u.conj() * v.conj() * e)
    };
    let out = integrate(integrand, -0.5, 0.5, cfg)?;
    let pre = -2.0 * i / PI.sqrt() * zeta_r * (kk * zeta_b * length * ka * kb * kc).sqrt();
    Ok(pre * out.value)
}

fn parseval(
    k_pump: f64,
    k_seed: f64,
    basis: &LgBasisSpec,
    crystal: &CrystalSpec,
    fp: &FocusParams,
    opts: &ParsevalOptions,
) -> Result<ParsevalSum> {
    check_tol(opts.quad_tol)?;
    let l = crystal.length();
    let k_b = basis.wavenumber();
    let zeta_b = basis.rayleigh_range / l;
    let base = QuadConfig { rel_tol: opts.quad_tol, abs_tol: 1e-15, max_subdivisions: 4000 };
    let c0 = projection(0, k_pump, k_b, k_seed, l, fp.zeta_r, zeta_b, fp.kappa, &base)?;
    // Higher orders are judged against the leading coefficient, not their own size.
    let cfg = QuadConfig { abs_tol: opts.quad_tol * 1e-3 * c0.norm().max(1e-300), ..base };
    let rest: Vec<Result<f64>> = (1..basis.max_radial_order)
        .into_par_iter()
        .map(|p| projection(p, k_pump, k_b, k_seed, l, fp.zeta_r, zeta_b, fp.kappa, &cfg).map(|c| c.norm_sqr()))
        .collect();
    let mut terms = vec![c0.norm_sqr()];
    for t in rest {
        terms.push(t?);
    }
    let total = terms.iter().sum();
    let tail = tail_estimate(&terms);
    if tail > opts.tail_threshold {
        return Err(Error::NonConvergence(format!(
            "mode sum tail {tail:e} above {:e} after {} radial orders",
            opts.tail_threshold, basis.max_radial_order
        )));
    }
    Ok(ParsevalSum { terms, total, tail_estimate: tail })
}

fn check_basis(basis: &LgBasisSpec, generated: &OpticalWave) -> Result<()> {
    let kb = basis.wavenumber();
    let kg = generated.wavenumber();
    ensure(((kb - kg) / kg).abs() <= 1e-9, || {
        format!("basis wavenumber {kb:e} does not match the generated field ({kg:e})")
    })
}

/// |I_DFG|² for the given heralding arm: pump and that arm are injected and the
/// partner field is generated. `Arm::Signal` is |I_DFG^(s)|² (idler generated).
pub fn i_dfg_sq(
    waves: &WaveTriple,
    crystal: &CrystalSpec,
    fp: &FocusParams,
    arm: Arm,
    basis: &LgBasisSpec,
    opts: &ParsevalOptions,
) -> Result<ParsevalSum> {
    check_geometry(waves, crystal, fp)?;
    let (seed, generated) = match arm {
        Arm::Signal => (waves.signal(), waves.idler()),
        Arm::Idler => (waves.idler(), waves.signal()),
    };
    check_basis(basis, generated)?;
    parseval(waves.pump().wavenumber(), seed.wavenumber(), basis, crystal, fp, opts)
}

/// |I_APG|²: degenerate analogue with the signal both injected and generated.
pub fn i_apg_sq(
    waves: &WaveTriple,
    crystal: &CrystalSpec,
    fp: &FocusParams,
    basis: &LgBasisSpec,
    opts: &ParsevalOptions,
) -> Result<ParsevalSum> {
    ensure(
        (waves.signal().angular_frequency() - waves.idler().angular_frequency()).abs()
            <= 1e-9 * waves.signal().angular_frequency(),
        || "average parametric gain needs signal and idler at one frequency".into(),
    )?;
    check_geometry(waves, crystal, fp)?;
    check_basis(basis, waves.signal())?;
    parseval(waves.pump().wavenumber(), waves.signal().wavenumber(), basis, crystal, fp, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::overlap::i_sfg_gaussian;
    use crate::quadrature::gauss_legendre;
    use crate::quantities::{derive_focus_params, solve_poling_period};
    use proptest::prelude::*;

    fn ppktp(kappa: f64, zeta_r: f64) -> (WaveTriple, CrystalSpec, FocusParams) {
        let w = WaveTriple::from_signal_idler(800e-9, 1.844, 800e-9, 1.757, 1.964).unwrap();
        let l = 0.01;
        let c = CrystalSpec::new(l, Some(solve_poling_period(&w, l, kappa).unwrap()), 2.4e-12, "ppktp").unwrap();
        let fp = derive_focus_params(&w, &c, zeta_r * l).unwrap();
        (w, c, fp)
    }

    #[test]
    fn laguerre_values() {
        assert_eq!(laguerre(0, 3.0), 1.0);
        assert_eq!(laguerre(1, 3.0), -2.0);
        assert!((laguerre(2, 3.0) - (9.0 - 12.0 + 2.0) / 2.0).abs() < 1e-14);
        assert!((laguerre(3, 1.5) - (-3.375 + 9.0 * 2.25 - 18.0 * 1.5 + 6.0) / 6.0).abs() < 1e-14);
    }

    #[test]
    fn gram_matrix_is_identity() {
        let k: f64 = 1.4e7;
        let zr: f64 = 2e-3;
        let (x, w) = gauss_legendre(200);
        for z in [0.0f64, 1.3e-3, -4e-3] {
            let wz: f64 = (2.0 * (z * z + zr * zr) / (k * zr)).sqrt();
            let rmax = 12.0 * wz;
            let p_max = 12;
            let modes: Vec<Vec<Complex64>> = (0..p_max)
                .map(|p| x.iter().map(|xi| lg_mode(p, k, zr, 0.5 * rmax * (xi + 1.0), z)).collect())
                .collect();
            for a in 0..p_max {
                for b in 0..p_max {
                    let g: Complex64 = (0..x.len())
                        .map(|j| {
                            let r = 0.5 * rmax * (x[j] + 1.0);
                            modes[a][j].conj() * modes[b][j] * (2.0 * PI * r * w[j] * 0.5 * rmax)
                        })
                        .sum();
                    let expect = if a == b { 1.0 } else { 0.0 };
                    assert!((g - expect).norm() < 1e-8, "z={z} ({a},{b}) -> {g}");
                }
            }
        }
    }

    #[test]
    fn leading_term_is_sfg_overlap() {
        let (w, c, fp) = ppktp(-3.484, 0.17808);
        let basis = LgBasisSpec::collection_mode(w.idler(), fp.rayleigh_range, DEFAULT_BASIS_ORDER).unwrap();
        let sum = i_dfg_sq(&w, &c, &fp, Arm::Signal, &basis, &ParsevalOptions::default()).unwrap();
        let sfg = i_sfg_gaussian(&w, &c, &fp, 1e-10).unwrap().abs_sq();
        assert!((sum.terms[0] - sfg).abs() < 1e-8 * sfg);
        assert!(sum.tail_estimate < 1e-4);
        // Frozen from an independent angular-spectrum evaluation.
        assert!((sum.total - 48_472.907_7).abs() < 1e-3 * sum.total, "{}", sum.total);
    }

    #[test]
    fn tail_estimate_shrinks_with_order() {
        let (w, c, fp) = ppktp(-3.484, 0.17808);
        let basis = LgBasisSpec::collection_mode(w.idler(), fp.rayleigh_range, DEFAULT_BASIS_ORDER).unwrap();
        let sum = i_dfg_sq(&w, &c, &fp, Arm::Signal, &basis, &ParsevalOptions::default()).unwrap();
        let tails: Vec<f64> = (8..=DEFAULT_BASIS_ORDER).map(|n| sum.tail_after(n)).collect();
        // Even and odd orders alternate in size, so compare across four orders.
        assert!(tails.windows(5).all(|t| t[4] <= t[0]), "{tails:?}");
        assert!(tails[0] < 1e-4);
    }

    #[test]
    fn truncated_basis_reports_non_convergence() {
        let (w, c, fp) = ppktp(-3.484, 0.17808);
        let basis = LgBasisSpec::collection_mode(w.idler(), fp.rayleigh_range, 3).unwrap();
        let r = i_dfg_sq(&w, &c, &fp, Arm::Signal, &basis, &ParsevalOptions::default());
        assert!(matches!(r, Err(Error::NonConvergence(_))));
    }

    #[test]
    fn wrong_basis_wavelength_rejected() {
        let (w, c, fp) = ppktp(-3.0, 0.2);
        let basis = LgBasisSpec::new(810e-9, 1.757, fp.rayleigh_range, 40).unwrap();
        assert!(i_dfg_sq(&w, &c, &fp, Arm::Signal, &basis, &ParsevalOptions::default()).is_err());
    }

    #[test]
    fn apg_equals_dfg_when_fields_coincide() {
        let p = OpticalWave::new(400e-9, 1.9).unwrap();
        let s = OpticalWave::new(800e-9, 1.8).unwrap();
        let w = WaveTriple::degenerate(p, s).unwrap();
        let l = 0.01;
        let c = CrystalSpec::new(l, Some(solve_poling_period(&w, l, -2.0).unwrap()), 1e-12, "t").unwrap();
        let fp = derive_focus_params(&w, &c, 0.3 * l).unwrap();
        let basis = LgBasisSpec::collection_mode(w.signal(), fp.rayleigh_range, 40).unwrap();
        let o = ParsevalOptions::default();
        let apg = i_apg_sq(&w, &c, &fp, &basis, &o).unwrap();
        let dfg = i_dfg_sq(&w, &c, &fp, Arm::Signal, &basis, &o).unwrap();
        assert_eq!(apg, dfg);
        let shg = i_sfg_gaussian(&w, &c, &fp, 1e-10).unwrap().abs_sq();
        assert!((apg.terms[0] - shg).abs() < 1e-8 * shg);
    }

    #[test]
    fn any_basis_waist_gives_the_same_total() {
        let (w, c, fp) = ppktp(-2.0, 0.4);
        let o = ParsevalOptions::default();
        let a = i_dfg_sq(
            &w,
            &c,
            &fp,
            Arm::Signal,
            &LgBasisSpec::collection_mode(w.idler(), fp.rayleigh_range, 40).unwrap(),
            &o,
        )
        .unwrap();
        let b = i_dfg_sq(
            &w,
            &c,
            &fp,
            Arm::Signal,
            &LgBasisSpec::collection_mode(w.idler(), 1.3 * fp.rayleigh_range, 60).unwrap(),
            &o,
        )
        .unwrap();
        assert!((a.total - b.total).abs() < 2e-4 * a.total, "{} {}", a.total, b.total);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn sums_are_monotone_and_bound_sfg(kappa in -8.0f64..4.0, zeta_r in 0.1f64..3.0, idler in any::<bool>()) {
            let (w, c, fp) = ppktp(kappa, zeta_r);
            let arm = if idler { Arm::Idler } else { Arm::Signal };
            let gen = if idler { w.signal() } else { w.idler() };
            let basis = LgBasisSpec::collection_mode(gen, fp.rayleigh_range, DEFAULT_BASIS_ORDER).unwrap();
            let sum = i_dfg_sq(&w, &c, &fp, arm, &basis, &ParsevalOptions::default()).unwrap();
            prop_assert!(sum.terms.iter().all(|t| *t >= 0.0));
            let partial = sum.partial_sums();
            prop_assert!(partial.windows(2).all(|p| p[1] >= p[0]));
            let sfg = i_sfg_gaussian(&w, &c, &fp, 1e-10).unwrap().abs_sq();
            let ratio = sfg / sum.total;
            prop_assert!(ratio > 0.0 && ratio <= 1.0 + 1e-9);
        }
    }
}
