//! Classical χ⁽²⁾ conversion efficiencies from overlap magnitudes.
//!
//! Overlaps are passed in, never recomputed here, so callers can cache the
//! quadrature across sweeps.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{ensure, Result};
use crate::quantities::{Arm, CrystalSpec, WaveTriple, C, EPSILON_0};

fn check_overlap(v: f64) -> Result<()> {
    ensure(v.is_finite() && v >= 0.0, || format!("overlap magnitude must be non-negative, got {v}"))
}

fn denom(n: f64) -> f64 {
    C.powi(3) * EPSILON_0 * n
}

/// Q_SFG = P_p/(P_s P_i) = 2ω_p²d²|I_SFG|²/(c³ε₀ n_p n_s n_i), in W⁻¹.
pub fn q_sfg(waves: &WaveTriple, crystal: &CrystalSpec, i_sfg_sq: f64) -> Result<f64> {
    ensure(!waves.is_degenerate(), || "degenerate fields: use q_shg".into())?;
    check_overlap(i_sfg_sq)?;
    let wp = waves.pump().angular_frequency();
    let n = waves.pump().refractive_index() * waves.signal().refractive_index() * waves.idler().refractive_index();
    Ok(2.0 * wp * wp * crystal.d_eff().powi(2) * i_sfg_sq / denom(n))
}

/// Q_SHG = P_p/P_s² = ω_p²d²|I_SHG|²/(2c³ε₀ n_p n_s²).
pub fn q_shg(waves: &WaveTriple, crystal: &CrystalSpec, i_shg_sq: f64) -> Result<f64> {
    ensure(waves.is_degenerate(), || "non-degenerate fields: use q_sfg".into())?;
    check_overlap(i_shg_sq)?;
    let wp = waves.pump().angular_frequency();
    let n = waves.pump().refractive_index() * waves.signal().refractive_index().powi(2);
    Ok(wp * wp * crystal.d_eff().powi(2) * i_shg_sq / (2.0 * denom(n)))
}

/// Q_DFG for heralding on `arm`: the partner field at ω_g is generated,
/// Q_DFG = 2ω_g²d²|I_DFG|²/(c³ε₀ n_s n_i n_p).
pub fn q_dfg(waves: &WaveTriple, crystal: &CrystalSpec, arm: Arm, i_dfg_sq: f64) -> Result<f64> {
    ensure(!waves.is_degenerate(), || "degenerate fields: use q_apg".into())?;
    check_overlap(i_dfg_sq)?;
    let wg = match arm {
        Arm::Signal => waves.idler().angular_frequency(),
        Arm::Idler => waves.signal().angular_frequency(),
    };
    let n = waves.pump().refractive_index() * waves.signal().refractive_index() * waves.idler().refractive_index();
    Ok(2.0 * wg * wg * crystal.d_eff().powi(2) * i_dfg_sq / denom(n))
}

/// Q_APG = 2ω_s²d²|I_APG|²/(c³ε₀ n_s² n_p).
pub fn q_apg(waves: &WaveTriple, crystal: &CrystalSpec, i_apg_sq: f64) -> Result<f64> {
    ensure(waves.is_degenerate(), || "non-degenerate fields: use q_dfg".into())?;
    check_overlap(i_apg_sq)?;
    let ws = waves.signal().angular_frequency();
    let n = waves.pump().refractive_index() * waves.signal().refractive_index().powi(2);
    Ok(2.0 * ws * ws * crystal.d_eff().powi(2) * i_apg_sq / denom(n))
}

/// Second-harmonic power from the Boyd–Kleinman form written in these
/// variables, P₂ = 4πk_sω_s²z_R d²|Υ|² P_s²/(c³ε₀ n_s² n_p), for Q = 0 and R_k = 0.
pub fn bk_shg_power(waves: &WaveTriple, crystal: &CrystalSpec, z_r: f64, upsilon_abs_sq: f64, p_s: f64) -> f64 {
    let s = waves.signal();
    let n = s.refractive_index().powi(2) * waves.pump().refractive_index();
    4.0 * PI
        * s.wavenumber()
        * s.angular_frequency().powi(2)
        * z_r
        * crystal.d_eff().powi(2)
        * upsilon_abs_sq
        * p_s
        * p_s
        / denom(n)
}

/// All efficiencies for one configuration, with the overlaps they came from.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct EfficiencyReport {
    pub q_sfg: Option<f64>,
    pub q_shg: Option<f64>,
    pub q_dfg_signal: Option<f64>,
    pub q_dfg_idler: Option<f64>,
    pub q_apg: Option<f64>,
    pub i_sfg_sq: f64,
    pub i_dfg_sq_signal: Option<f64>,
    pub i_dfg_sq_idler: Option<f64>,
}

impl EfficiencyReport {
    /// The efficiency that sets the pair rate: Q_SFG, or Q_SHG for degenerate fields.
    pub fn pair_efficiency(&self) -> f64 {
        self.q_sfg.or(self.q_shg).unwrap_or(0.0)
    }
}
