//! Independent oracles for the main computational paths.
//!
//! Nothing here calls the adaptive Gauss–Kronrod integrator or the mode-sum
//! code: the oracles use fixed composite Gauss–Legendre rules, their own
//! Gaussian mode functions and their own Bessel J0.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::classical::{bk_shg_power, q_shg};
use crate::error::{ensure, Error, Result};
use crate::filters::{gamma_eff_pair, gamma_eff_spectral, FilterSpec};
use crate::modebasis::{i_dfg_sq, LgBasisSpec, ParsevalOptions, DEFAULT_BASIS_ORDER};
use crate::overlap::{i_sfg_direct3d, i_sfg_gaussian, phi_thin_crystal, upsilon_raw, Direct3dGrid};
use crate::quadrature::gauss_legendre;
use crate::quantities::{
    derive_focus_params, solve_poling_period, Arm, CrystalSpec, FocusParams, OpticalWave, WaveTriple, C, EPSILON_0,
};
use crate::quantum::pair_rate;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub quantity: String,
    pub main_value: f64,
    pub oracle_value: f64,
    pub relative_diff: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl OracleReport {
    /// Relative difference against the oracle; absolute when the oracle is zero.
    pub fn new(quantity: impl Into<String>, main_value: f64, oracle_value: f64, tolerance: f64) -> Self {
        let diff = (main_value - oracle_value).abs();
        let relative_diff = if oracle_value == 0.0 { diff } else { diff / oracle_value.abs() };
        OracleReport {
            quantity: quantity.into(),
            main_value,
            oracle_value,
            relative_diff,
            tolerance,
            pass: relative_diff <= tolerance,
        }
    }
}

/// Υ(κ = 0, ζ_R, R_k = 0) = (1/2πi)·log[(1/2 − iζ_R)/(−1/2 − iζ_R)], principal branch.
///
/// ```
/// use spdc_core::validation::oracle_upsilon_closed_form;
/// assert!((oracle_upsilon_closed_form(0.5).re - 0.25).abs() < 1e-15);
/// ```
pub fn oracle_upsilon_closed_form(zeta_r: f64) -> Complex64 {
    let i = Complex64::i();
    let ratio = (0.5 - i * zeta_r) / (-0.5 - i * zeta_r);
    ratio.ln() / (2.0 * PI * i)
}

/// Bessel J0: power series below 12, Hankel asymptotic expansion above.
pub fn bessel_j0(x: f64) -> f64 {
    let x = x.abs();
    if x < 12.0 {
        let q = 0.25 * x * x;
        let (mut term, mut sum) = (1.0, 1.0);
        for k in 1..80 {
            term *= -q / (k * k) as f64;
            sum += term;
            if term.abs() < 1e-17 * sum.abs().max(1e-300) {
                break;
            }
        }
        return sum;
    }
    let y = 8.0 * x;
    let (mut p, mut q) = (1.0, 0.0);
    let mut term = 1.0;
    let mut prev = f64::INFINITY;
    for k in 1..60 {
        let j = (2 * k - 1) as f64;
        term *= -j * j / (k as f64 * y);
        if term.abs() > prev {
            break;
        }
        prev = term.abs();
        // Even orders feed P with alternating signs, odd orders feed Q.
        let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
        if k % 2 == 0 {
            p += sign * term;
        } else {
            q += sign * term;
        }
        if term.abs() < 1e-17 {
            break;
        }
    }
    let phase = x - FRAC_PI_4;
    (2.0 / (PI * x)).sqrt() * (p * phase.cos() - q * phase.sin())
}

fn composite_gl(a: f64, b: f64, panels: usize, nodes: usize) -> Vec<(f64, f64)> {
    let (x, w) = gauss_legendre(nodes);
    let h = (b - a) / panels as f64;
    (0..panels)
        .flat_map(|j| {
            let lo = a + j as f64 * h;
            x.iter().zip(&w).map(move |(xi, wi)| (lo + 0.5 * h * (xi + 1.0), 0.5 * h * wi)).collect::<Vec<_>>()
        })
        .collect()
}

/// Normalized Gaussian √(kz_R/π)(1/q)e^{ikz}e^{ikr²/2q}, q = z − iz_R.
fn oracle_mode(k: f64, z_r: f64, r: f64, z: f64) -> Complex64 {
    let q = Complex64::new(z, -z_r);
    let phase = Complex64::i() * (k * z) + Complex64::i() * (0.5 * k * r * r) / q;
    (k * z_r / PI).sqrt() / q * phase.exp()
}

/// Radial/longitudinal/angular sampling for the Fresnel oracle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FresnelGrid {
    pub z_panels: usize,
    pub z_nodes: usize,
    pub r_panels: usize,
    pub r_nodes: usize,
    /// Source radius cut-off in units of its local 1/e field radius.
    pub r_extent: f64,
    pub theta_panels: usize,
    pub theta_nodes: usize,
    /// Output angular cut-off in units of the narrowest source's diffraction angle.
    pub theta_extent: f64,
    /// Output plane distance from the crystal centre, in crystal lengths.
    pub distance: f64,
}

impl Default for FresnelGrid {
    fn default() -> Self {
        FresnelGrid {
            z_panels: 16,
            z_nodes: 12,
            r_panels: 4,
            r_nodes: 16,
            r_extent: 6.5,
            theta_panels: 12,
            theta_nodes: 12,
            theta_extent: 5.0,
            distance: 100.0,
        }
    }
}

impl FresnelGrid {
    /// Twice the panels along every axis, same extents.
    pub fn refined(&self) -> Self {
        FresnelGrid {
            z_panels: 2 * self.z_panels,
            r_panels: 2 * self.r_panels,
            theta_panels: 2 * self.theta_panels,
            ..*self
        }
    }
}

/// ∫d²ρ|E(ρ)|² on the output plane z₀ for a source s(r, z) radiating at
/// wavenumber `k`, E(ρ) = Σ_j w_j ∫d²r K(ρ, r; z₀ − z_j) s(r, z_j), with the
/// paraxial kernel K = (−ik/2πΔz)e^{ikΔz}e^{ik|ρ−r|²/2Δz}. The azimuthal
/// integral gives 2πJ0(kρr/Δz) for circular sources.
///
/// `radius(z)` is the 1/e field radius of |s| in slice z; `theta_max` the
/// largest output angle kept.
#[allow(clippy::too_many_arguments)]
pub fn fresnel_plane_power(
    k: f64,
    slices: &[(f64, f64)],
    source: impl Fn(f64, f64) -> Complex64 + Sync,
    radius: impl Fn(f64) -> f64 + Sync,
    z0: f64,
    theta_max: f64,
    grid: &FresnelGrid,
) -> f64 {
    let i = Complex64::i();
    // Source samples and their radial weights, per slice.
    let sampled: Vec<(f64, f64, Vec<(f64, Complex64)>)> = slices
        .iter()
        .map(|&(z, wz)| {
            let r_max = grid.r_extent * radius(z);
            let pts = composite_gl(0.0, r_max, grid.r_panels, grid.r_nodes)
                .into_iter()
                .map(|(r, wr)| {
                    let dz = z0 - z;
                    let v = source(r, z) * (i * (0.5 * k * r * r / dz)).exp() * (r * wr);
                    (r, v)
                })
                .collect();
            (z, wz, pts)
        })
        .collect();
    let thetas = composite_gl(0.0, theta_max, grid.theta_panels, grid.theta_nodes);
    let power: f64 = thetas
        .par_iter()
        .map(|&(theta, wt)| {
            let rho = theta * z0;
            let mut e = Complex64::new(0.0, 0.0);
            for (z, wz, pts) in &sampled {
                let dz = z0 - z;
                let radial: Complex64 = pts.iter().map(|(r, v)| v * bessel_j0(k * rho * r / dz)).sum();
                let kernel = -i * (k / dz) * (i * (k * dz + 0.5 * k * rho * rho / dz)).exp();
                e += kernel * radial * *wz;
            }
            e.norm_sqr() * rho * wt
        })
        .collect::<Vec<_>>()
        .into_iter()
        .sum();
    2.0 * PI * power * z0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FresnelOracle {
    pub value: f64,
    /// Same integral on the refined grid.
    pub refined: f64,
    pub resolution_change: f64,
}

/// Upper bound on the relative change between a grid and its refinement.
pub const FRESNEL_RESOLUTION_TOL: f64 = 1e-3;

/// |I_DFG|² for heralding on `arm` by slicing the crystal, propagating each
/// slice's source e^{−iQz}M_p M_seed* to a distant plane with the Fresnel
/// kernel, summing coherently and integrating |E|² over the plane.
pub fn oracle_dfg_fresnel(
    waves: &WaveTriple,
    crystal: &CrystalSpec,
    fp: &FocusParams,
    arm: Arm,
    grid: &FresnelGrid,
) -> Result<FresnelOracle> {
    ensure(grid.z_panels > 0 && grid.z_nodes > 0 && grid.r_panels > 0 && grid.r_nodes > 0, || {
        "Fresnel grid sizes must be positive".into()
    })?;
    ensure(grid.theta_panels > 0 && grid.theta_nodes > 0 && grid.distance > 1.0, || {
        "Fresnel output grid must be positive and the plane outside the crystal".into()
    })?;
    let (seed, generated) = match arm {
        Arm::Signal => (waves.signal(), waves.idler()),
        Arm::Idler => (waves.idler(), waves.signal()),
    };
    let l = crystal.length();
    let z_r = fp.rayleigh_range;
    let (kp, ks, kg) = (waves.pump().wavenumber(), seed.wavenumber(), generated.wavenumber());
    let q = crystal.qpm_wavenumber();
    let source = move |r: f64, z: f64| {
        Complex64::from_polar(1.0, -q * z) * oracle_mode(kp, z_r, r, z) * oracle_mode(ks, z_r, r, z).conj()
    };
    let radius = move |z: f64| (2.0 * (z * z + z_r * z_r) / ((kp + ks) * z_r)).sqrt();
    let theta_max = grid.theta_extent * 2.0 / (kg * radius(0.0));
    let z0 = grid.distance * l;
    let run = |g: &FresnelGrid| {
        let slices = composite_gl(-0.5 * l, 0.5 * l, g.z_panels, g.z_nodes);
        fresnel_plane_power(kg, &slices, source, radius, z0, theta_max, g)
    };
    let value = run(grid);
    let refined = run(&grid.refined());
    let resolution_change = ((refined - value) / refined).abs();
    if !(resolution_change < FRESNEL_RESOLUTION_TOL) {
        return Err(Error::NonConvergence(format!(
            "Fresnel oracle changes by {resolution_change:e} when the grid is refined"
        )));
    }
    Ok(FresnelOracle { value: refined, refined, resolution_change }).map(|o| FresnelOracle { value, ..o })
}

/// (2/π)∫T_s(Ω)T_i(−Ω)dΩ by fixed composite Gauss–Legendre.
pub fn oracle_gamma_eff(fs: &FilterSpec, fi: &FilterSpec) -> Result<f64> {
    Ok(2.0 / PI * oracle_filter_overlap(fs, fi)?)
}

fn oracle_filter_overlap(fs: &FilterSpec, fi: &FilterSpec) -> Result<f64> {
    use FilterSpec::*;
    let f = |o: f64| fs.transmission(o) * fi.transmission(-o);
    match (fs, fi) {
        (Unfiltered, Unfiltered) => Err(Error::invalid("both arms unfiltered: overlap diverges")),
        (Tabulated { .. }, _) | (_, Tabulated { .. }) => {
            // Breakpoints of both tables; the product is smooth in between.
            let mut cuts: Vec<f64> = Vec::new();
            let mut support = (f64::NEG_INFINITY, f64::INFINITY);
            if let Tabulated { omega, .. } = fs {
                cuts.extend(omega.iter().cloned());
                support = (support.0.max(omega[0]), support.1.min(omega[omega.len() - 1]));
            }
            if let Tabulated { omega, .. } = fi {
                cuts.extend(omega.iter().map(|o| -o));
                support = (support.0.max(-omega[omega.len() - 1]), support.1.min(-omega[0]));
            }
            if support.0 >= support.1 {
                return Ok(0.0);
            }
            cuts.retain(|c| *c >= support.0 && *c <= support.1);
            cuts.extend([support.0, support.1]);
            cuts.sort_by(f64::total_cmp);
            cuts.dedup();
            // A Lorentzian partner is integrated in t with Ω = g·tan t on
            // each segment, so a line narrower than the table stays resolved.
            let g = [fs, fi]
                .iter()
                .filter_map(|s| match s {
                    Lorentzian { gamma } => Some(0.5 * gamma),
                    _ => None,
                })
                .next();
            Ok(cuts
                .windows(2)
                .map(|w| match g {
                    Some(g) => composite_gl((w[0] / g).atan(), (w[1] / g).atan(), 16, 16)
                        .into_iter()
                        .map(|(t, wt)| {
                            let c = t.cos();
                            f(g * t.tan()) * g / (c * c) * wt
                        })
                        .sum::<f64>(),
                    None => composite_gl(w[0], w[1], 1, 8).into_iter().map(|(o, wt)| f(o) * wt).sum(),
                })
                .sum())
        }
        _ => {
            let widths: Vec<f64> = [fs, fi]
                .iter()
                .filter_map(|s| match s {
                    Lorentzian { gamma } => Some(0.5 * gamma),
                    _ => None,
                })
                .collect();
            let h = widths.iter().product::<f64>().powf(1.0 / widths.len() as f64);
            // Ω = h·tan t maps the Lorentzian tails onto a finite interval; the
            // geometric-mean scale keeps both peaks resolved in t.
            Ok(composite_gl(-FRAC_PI_2, FRAC_PI_2, 64, 16)
                .into_iter()
                .map(|(t, w)| {
                    let c = t.cos();
                    f(h * t.tan()) * h / (c * c) * w
                })
                .sum())
        }
    }
}

/// Overlap length of two unit-height rectangular passbands, the idler one mirrored:
/// ∫T_s(Ω)T_i(−Ω)dΩ.
pub fn rect_overlap(center_s: f64, width_s: f64, center_i: f64, width_i: f64) -> f64 {
    let (a0, a1) = (center_s - 0.5 * width_s, center_s + 0.5 * width_s);
    let (b0, b1) = (-center_i - 0.5 * width_i, -center_i + 0.5 * width_i);
    (a1.min(b1) - a0.max(b0)).max(0.0)
}

/// Thin-crystal rate of the collimated-beam model,
/// R = ω_sω_i d²P_p|α_pα_sα_iΦ|²∫T_sT_i dΩ/(πc³ε₀n_pn_sn_i),
/// with Φ integrated here by Gauss–Legendre and W_m = √(2z_R/k_m).
pub fn ling_rate(
    waves: &WaveTriple,
    crystal: &CrystalSpec,
    z_r: f64,
    pump_power: f64,
    fs: &FilterSpec,
    fi: &FilterSpec,
) -> Result<f64> {
    let l = crystal.length();
    let ks = [waves.pump().wavenumber(), waves.signal().wavenumber(), waves.idler().wavenumber()];
    let waists = ks.map(|k| (2.0 * z_r / k).sqrt());
    let alpha3: f64 = waists.iter().map(|w| (2.0 / (PI * w * w)).sqrt()).product();
    let dk = waves.k_minus() - crystal.qpm_wavenumber();
    let long: Complex64 =
        composite_gl(-0.5 * l, 0.5 * l, 8, 32).into_iter().map(|(z, w)| Complex64::from_polar(w, dk * z)).sum();
    let phi = PI / waists.iter().map(|w| w.powi(-2)).sum::<f64>() * long;
    let n = waves.pump().refractive_index() * waves.signal().refractive_index() * waves.idler().refractive_index();
    let (ws, wi) = (waves.signal().angular_frequency(), waves.idler().angular_frequency());
    let overlap = oracle_filter_overlap(fs, fi)?;
    Ok(ws * wi * crystal.d_eff().powi(2) * pump_power * (alpha3 * phi).norm_sqr() * overlap
        / (PI * C.powi(3) * EPSILON_0 * n))
}

/// Pair rate from the main path against [`ling_rate`] for the same
/// configuration. Meaningful for ζ_R ≫ 1, where both describe the same beams.
pub fn ling_comparator(
    waves: &WaveTriple,
    crystal: &CrystalSpec,
    z_r: f64,
    pump_power: f64,
    fs: &FilterSpec,
    fi: &FilterSpec,
) -> Result<OracleReport> {
    let fp = derive_focus_params(waves, crystal, z_r)?;
    let i2 = i_sfg_gaussian(waves, crystal, &fp, 1e-12)?.abs_sq();
    let q = crate::classical::q_sfg(waves, crystal, i2)?;
    let main = pair_rate(waves, pump_power, q, gamma_eff_pair(fs, fi)?)?;
    let oracle = ling_rate(waves, crystal, z_r, pump_power, fs, fi)?;
    Ok(OracleReport::new(format!("pair rate vs thin-crystal model (zeta_R = {})", fp.zeta_r), main, oracle, 1e-3))
}

fn ppktp(kappa: f64, zeta_r: f64) -> Result<(WaveTriple, CrystalSpec, FocusParams)> {
    let w = WaveTriple::from_signal_idler(800e-9, 1.844, 800e-9, 1.757, 1.964)?;
    let l = 0.01;
    let c = CrystalSpec::new(l, Some(solve_poling_period(&w, l, kappa)?), 2.4e-12, "PPKTP-800-typeII")?;
    let fp = derive_focus_params(&w, &c, zeta_r * l)?;
    Ok((w, c, fp))
}

fn nondegenerate(kappa: f64, zeta_r: f64) -> Result<(WaveTriple, CrystalSpec, FocusParams)> {
    let w = WaveTriple::from_signal_idler(780e-9, 1.84, 830e-9, 1.76, 1.95)?;
    let l = 0.02;
    let c = CrystalSpec::new(l, Some(solve_poling_period(&w, l, kappa)?), 3e-12, "test")?;
    let fp = derive_focus_params(&w, &c, zeta_r * l)?;
    Ok((w, c, fp))
}

/// Configurations the mode sum is checked against the Fresnel oracle on.
pub fn fresnel_cases() -> Result<Vec<(String, WaveTriple, CrystalSpec, FocusParams, Arm)>> {
    let mut out = Vec::new();
    let (w, c, f) = ppktp(-3.484, 0.17808)?;
    out.push(("PPKTP optimum, signal arm".to_string(), w, c.clone(), f, Arm::Signal));
    out.push(("PPKTP optimum, idler arm".to_string(), w, c, f, Arm::Idler));
    let (w, c, f) = ppktp(0.0, 0.5)?;
    out.push(("PPKTP kappa = 0, zeta_R = 0.5".to_string(), w, c, f, Arm::Signal));
    let (w, c, f) = ppktp(-1.0, 1.5)?;
    out.push(("PPKTP kappa = -1, zeta_R = 1.5".to_string(), w, c, f, Arm::Signal));
    let (w, c, f) = nondegenerate(-2.5, 0.3)?;
    out.push(("780/830 nm, kappa = -2.5, zeta_R = 0.3".to_string(), w, c, f, Arm::Idler));
    Ok(out)
}

/// The shipped oracle set, in a fixed order.
pub fn run_all() -> Result<Vec<OracleReport>> {
    let mut out = Vec::new();

    for zeta in [0.5, 1.0] {
        let main = upsilon_raw(0.0, zeta, 0.0, 1e-12)?.value;
        let oracle = oracle_upsilon_closed_form(zeta);
        let mut rep = OracleReport::new(format!("Upsilon(0, {zeta}, 0) closed form"), main.re, oracle.re, 1e-10);
        rep.pass &= (main - oracle).norm() <= 1e-10 * oracle.norm();
        out.push(rep);
    }

    let grid = Direct3dGrid::default();
    let (w, c, f) = ppktp(-3.484, 0.17808)?;
    let a = i_sfg_gaussian(&w, &c, &f, 1e-12)?.value;
    let b = i_sfg_direct3d(&w, &c, &f, &grid)?.value;
    let mut rep = OracleReport::new("|I_SFG| reduced vs direct 3D (PPKTP optimum)", a.norm(), b.norm(), 1e-4);
    rep.pass &= (a - b).norm() <= 1e-4 * b.norm();
    out.push(rep);

    // Thin-crystal limit of the brute-force overlap.
    let (w, c, f) = ppktp(0.0, 100.0)?;
    let d3 = i_sfg_direct3d(&w, &c, &f, &grid)?.value.norm();
    let ks = [w.pump().wavenumber(), w.signal().wavenumber(), w.idler().wavenumber()];
    let waists = ks.map(|k| (2.0 * f.rayleigh_range / k).sqrt());
    let alpha3: f64 = waists.iter().map(|x| (2.0 / (PI * x * x)).sqrt()).product();
    let thin = alpha3 * phi_thin_crystal(c.length(), waists, 0.0)?.norm();
    out.push(OracleReport::new("|alpha^3 Phi| vs direct 3D (zeta_R = 100)", thin, d3, 1e-3));

    let opts = ParsevalOptions::default();
    for (name, w, c, f, arm) in fresnel_cases()? {
        let generated = match arm {
            Arm::Signal => w.idler(),
            Arm::Idler => w.signal(),
        };
        let basis = LgBasisSpec::collection_mode(generated, f.rayleigh_range, DEFAULT_BASIS_ORDER)?;
        let main = i_dfg_sq(&w, &c, &f, arm, &basis, &opts)?.total;
        let oracle = oracle_dfg_fresnel(&w, &c, &f, arm, &FresnelGrid::default())?;
        out.push(OracleReport::new(format!("|I_DFG|^2 mode sum vs Fresnel ({name})"), main, oracle.refined, 1e-3));
    }

    let (w, c, f) = ppktp(0.0, 100.0)?;
    let g = 2.0 * PI * 1e6;
    let (fs, fi) = (FilterSpec::lorentzian(g)?, FilterSpec::lorentzian(2.5 * g)?);
    out.push(ling_comparator(&w, &c, f.rayleigh_range, 1e-3, &fs, &fi)?);

    out.push(OracleReport::new(
        "Gamma_eff closed form vs spectral integral",
        gamma_eff_pair(&fs, &fi)?,
        oracle_gamma_eff(&fs, &fi)?,
        1e-6,
    ));

    let (rs, ri) = (rect_table(0.3 * g, g)?, rect_table(-0.1 * g, 1.5 * g)?);
    out.push(OracleReport::new(
        "rectangular filter overlap, numeric vs closed form",
        gamma_eff_spectral(&rs, &ri)?,
        2.0 / PI * rect_overlap(0.3 * g, g, -0.1 * g, 1.5 * g),
        1e-3,
    ));

    let p = OpticalWave::new(532e-9, 1.0)?;
    let s = OpticalWave::new(1064e-9, 1.0)?;
    let d = WaveTriple::degenerate(p, s)?;
    let c = CrystalSpec::new(0.02, None, 5e-12, "unpoled")?;
    let f = derive_focus_params(&d, &c, 0.35 * 0.02)?;
    let i2 = i_sfg_gaussian(&d, &c, &f, 1e-12)?.abs_sq();
    let u2 = upsilon_raw(f.kappa, f.zeta_r, 0.0, 1e-12)?.abs_sq;
    out.push(OracleReport::new(
        "SHG power: Q_SHG vs Boyd-Kleinman form",
        q_shg(&d, &c, i2)?,
        bk_shg_power(&d, &c, f.rayleigh_range, u2, 1.0),
        1e-10,
    ));
    Ok(out)
}

/// Unit-height rectangle of full width `width` centred on `center` (rad/s),
/// with edges one part in 10⁶ of the width wide.
pub fn rect_table(center: f64, width: f64) -> Result<FilterSpec> {
    let e = 1e-6 * width;
    let (a, b) = (center - 0.5 * width, center + 0.5 * width);
    FilterSpec::tabulated(vec![a - e, a, b, b + e], vec![0.0, 1.0, 1.0, 0.0])
}
