//! Absolute SPDC pair and singles rates and heralding efficiency in the
//! narrow-band limit (filter bandwidths far below the phase-matching
//! bandwidth; the caller is responsible for that condition).
//!
//! For degenerate fields the pair rate is W⁽²⁾ = Γ_eff(ω_s²/ω_p²)P_pQ_SHG,
//! which is the non-degenerate formula with Q_SFG → 4Q_SHG. This keeps
//! η ≡ W⁽²⁾/W⁽¹⁾ exact in both cases.

use serde::Serialize;

use crate::classical::EfficiencyReport;
use crate::error::{ensure, Error, Result};
use crate::overlap::{OverlapResult, UpsilonResult};
use crate::quantities::{Arm, FocusParams, WaveTriple, C, EPSILON_0, HBAR};

fn check_non_negative(name: &str, v: f64) -> Result<()> {
    ensure(v.is_finite() && v >= 0.0, || format!("{name} must be non-negative, got {v}"))
}

/// Coincidence rate W⁽²⁾ in s⁻¹. `efficiency` is Q_SFG (or Q_SHG for
/// degenerate fields) in W⁻¹, `gamma_eff` in rad/s.
///
/// ```
/// use spdc_core::quantities::WaveTriple;
/// use spdc_core::quantum::pair_rate;
/// let w = WaveTriple::from_signal_idler(800e-9, 1.844, 800e-9, 1.757, 1.964).unwrap();
/// // ω_iω_s/4ω_p² = 1/16 at frequency degeneracy.
/// let r = pair_rate(&w, 1e-3, 2.0e-3, 2.0 * std::f64::consts::PI * 1e6).unwrap();
/// assert!((r - 0.785).abs() < 1e-3);
/// ```
pub fn pair_rate(waves: &WaveTriple, pump_power: f64, efficiency: f64, gamma_eff: f64) -> Result<f64> {
    check_non_negative("pump power", pump_power)?;
    check_non_negative("efficiency", efficiency)?;
    check_non_negative("gamma_eff", gamma_eff)?;
    let wp = waves.pump().angular_frequency();
    let ws = waves.signal().angular_frequency();
    let wi = waves.idler().angular_frequency();
    let ratio = if waves.is_degenerate() { ws * ws / (wp * wp) } else { wi * ws / (4.0 * wp * wp) };
    Ok(gamma_eff * ratio * pump_power * efficiency)
}

/// Singles rate W⁽¹⁾ in the collected mode of `arm`. `efficiency` is
/// Q_DFG for that arm (Q_APG when degenerate), `gamma_eff_arm` is Γ_eff,s or Γ_eff,i.
pub fn singles_rate(waves: &WaveTriple, arm: Arm, pump_power: f64, efficiency: f64, gamma_eff_arm: f64) -> Result<f64> {
    check_non_negative("pump power", pump_power)?;
    check_non_negative("efficiency", efficiency)?;
    check_non_negative("single-arm linewidth", gamma_eff_arm)?;
    let ws = waves.signal().angular_frequency();
    let wi = waves.idler().angular_frequency();
    let ratio = match (waves.is_degenerate(), arm) {
        (true, _) => 0.25,
        (false, Arm::Signal) => ws / (4.0 * wi),
        (false, Arm::Idler) => wi / (4.0 * ws),
    };
    Ok(ratio * gamma_eff_arm * pump_power * efficiency)
}

/// η = (Γ_eff/Γ_eff,arm)·|I_SFG|²/|I_DFG|²: probability that the partner of a
/// photon detected in `arm` is also collected.
pub fn conditional_efficiency(gamma_eff: f64, gamma_eff_arm: f64, i_sfg_sq: f64, i_dfg_sq: f64) -> Result<f64> {
    check_non_negative("gamma_eff", gamma_eff)?;
    check_non_negative("i_sfg_sq", i_sfg_sq)?;
    if !(gamma_eff_arm > 0.0 && i_dfg_sq > 0.0) {
        return Err(Error::invalid("singles rate is zero: heralding efficiency undefined"));
    }
    Ok(gamma_eff / gamma_eff_arm * i_sfg_sq / i_dfg_sq)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CorrelationAmplitude {
    /// |𝒜|² (J² s² m⁻² units folded; see the guide).
    pub amplitude_sq: f64,
    /// W⁽²⁾(τ) = density_prefactor·|f(τ)|², in s⁻¹ per (s⁻²·s).
    pub density_prefactor: f64,
}

/// |𝒜|² = ħ²ω_i²ω_s²/(4c²ε₀²n_sn_iω_p²)·P_pQ_SFG and the matching
/// prefactor (ω_sω_i/ω_p²)P_pQ_SFG for W⁽²⁾(τ). Degenerate fields use
/// (4ω_s²/ω_p²)P_pQ_SHG.
pub fn correlation_amplitude_sq(waves: &WaveTriple, pump_power: f64, efficiency: f64) -> Result<CorrelationAmplitude> {
    check_non_negative("pump power", pump_power)?;
    check_non_negative("efficiency", efficiency)?;
    let wp = waves.pump().angular_frequency();
    let ws = waves.signal().angular_frequency();
    let wi = waves.idler().angular_frequency();
    let factor = if waves.is_degenerate() { 4.0 } else { 1.0 };
    let density_prefactor = factor * ws * wi / (wp * wp) * pump_power * efficiency;
    let n = waves.signal().refractive_index() * waves.idler().refractive_index();
    // W⁽²⁾ = (n_sn_ic²ε₀²/ħ²ω_sω_i)|𝒜|²Γ_eff with Γ_eff = 4∫|f|².
    let amplitude_sq = HBAR * HBAR * ws * wi / (n * C * C * EPSILON_0 * EPSILON_0) * density_prefactor / 4.0;
    Ok(CorrelationAmplitude { amplitude_sq, density_prefactor })
}

/// Everything computed for one source design.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SourceReport {
    pub focus: FocusParams,
    /// Υ(κ, ζ_R, R_k) as defined.
    pub upsilon: UpsilonResult,
    pub i_sfg: OverlapResult,
    pub efficiencies: EfficiencyReport,
    pub pump_power: f64,
    pub gamma_eff: f64,
    pub gamma_eff_s: Option<f64>,
    pub gamma_eff_i: Option<f64>,
    pub pair_rate: f64,
    /// W⁽²⁾ per (mW of pump · MHz of ordinary-frequency Γ_eff).
    pub pair_brightness: f64,
    pub singles_rate_signal: Option<f64>,
    pub singles_rate_idler: Option<f64>,
    pub eta_signal: Option<f64>,
    pub eta_idler: Option<f64>,
    pub mode_sum_tail_signal: Option<f64>,
    pub mode_sum_tail_idler: Option<f64>,
    /// Γ_eff exceeds the supplied phase-matching bandwidth estimate.
    pub narrowband_warning: bool,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantities::OpticalWave;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn nondeg(ls: f64, li: f64) -> WaveTriple {
        WaveTriple::from_signal_idler(ls, 1.8, li, 1.75, 1.95).unwrap()
    }

    #[test]
    fn published_brightness_arithmetic() {
        let w = nondeg(800e-9, 800e-9);
        let r = pair_rate(&w, 1e-3, 2.0e-3, 2.0 * PI * 1e6).unwrap();
        assert!((r - 0.785).abs() < 1e-3, "{r}");
    }

    #[test]
    fn zero_and_negative_inputs() {
        let w = nondeg(800e-9, 800e-9);
        assert_eq!(pair_rate(&w, 0.0, 1e-3, 1e6).unwrap(), 0.0);
        assert_eq!(singles_rate(&w, Arm::Signal, 0.0, 1e-3, 1e6).unwrap(), 0.0);
        assert!(pair_rate(&w, -1.0, 1e-3, 1e6).is_err());
        assert!(singles_rate(&w, Arm::Idler, 1.0, -1e-3, 1e6).is_err());
        assert!(conditional_efficiency(1.0, 0.0, 1.0, 1.0).is_err());
        assert!(conditional_efficiency(1.0, 1.0, 1.0, 0.0).is_err());
        let a = correlation_amplitude_sq(&w, 0.0, 1e-3).unwrap();
        assert_eq!(a.amplitude_sq, 0.0);
    }

    #[test]
    fn matched_filters_halve_heralding() {
        assert_eq!(conditional_efficiency(0.5, 1.0, 7.0, 7.0).unwrap(), 0.5);
        // Unfiltered partner: Γ_eff = Γ_arm.
        assert_eq!(conditional_efficiency(2.0, 2.0, 3.0, 4.0).unwrap(), 0.75);
    }

    #[test]
    fn perfect_heralding_limit() {
        let w = nondeg(780e-9, 830e-9);
        let qs = 3e-3;
        let wi = w.idler().angular_frequency();
        let wp = w.pump().angular_frequency();
        let qd = (wi / wp).powi(2) * qs;
        let g = 1e7;
        let w2 = pair_rate(&w, 2e-3, qs, g).unwrap();
        let w1 = singles_rate(&w, Arm::Signal, 2e-3, qd, g).unwrap();
        assert!((w1 / w2 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn matched_peak_density() {
        let w = nondeg(800e-9, 800e-9);
        let g = 2.0 * PI * 1e6;
        let a = correlation_amplitude_sq(&w, 1e-3, 2e-3).unwrap();
        let peak = a.density_prefactor * (g / 4.0).powi(2);
        let ws = w.signal().angular_frequency();
        let wp = w.pump().angular_frequency();
        let want = ws * ws / (wp * wp) * 1e-3 * 2e-3 * g * g / 16.0;
        assert!((peak / want - 1.0).abs() < 1e-14);
    }

    #[test]
    fn degenerate_and_nondegenerate_pair_rates_coincide() {
        let p = OpticalWave::new(400e-9, 1.9).unwrap();
        let s = OpticalWave::new(800e-9, 1.8).unwrap();
        let nd = WaveTriple::new(p, s, s).unwrap();
        let d = WaveTriple::degenerate(p, s).unwrap();
        let q_shg = 1.7e-3;
        let a = pair_rate(&nd, 1e-3, 4.0 * q_shg, 1e7).unwrap();
        let b = pair_rate(&d, 1e-3, q_shg, 1e7).unwrap();
        assert!((a / b - 1.0).abs() < 1e-14);
        let ca = correlation_amplitude_sq(&nd, 1e-3, 4.0 * q_shg).unwrap();
        let cb = correlation_amplitude_sq(&d, 1e-3, q_shg).unwrap();
        assert!((ca.density_prefactor / cb.density_prefactor - 1.0).abs() < 1e-14);
    }

    proptest! {
        // The amplitude chain: ∫W⁽²⁾(τ)dτ with Γ_eff = 4∫|f|² reproduces W⁽²⁾.
        #[test]
        fn amplitude_chain(ls in 700e-9f64..900e-9, li in 700e-9f64..1600e-9, q in 1e-5f64..1e-1, p in 1e-5f64..1.0, g in 1e5f64..1e9) {
            let w = nondeg(ls, li);
            let a = correlation_amplitude_sq(&w, p, q).unwrap();
            let integral = a.density_prefactor * g / 4.0;
            let direct = pair_rate(&w, p, q, g).unwrap();
            prop_assert!((integral / direct - 1.0).abs() < 1e-13);
            let n = w.signal().refractive_index() * w.idler().refractive_index();
            let ws = w.signal().angular_frequency();
            let wi = w.idler().angular_frequency();
            let via_a = n * C * C * EPSILON_0 * EPSILON_0 / (HBAR * HBAR * ws * wi) * a.amplitude_sq * g;
            prop_assert!((via_a / direct - 1.0).abs() < 1e-12);
        }

        #[test]
        fn linear_in_gamma(g in 1e3f64..1e10) {
            let w = nondeg(810e-9, 790e-9);
            let a = pair_rate(&w, 1e-3, 1e-3, g).unwrap();
            let b = pair_rate(&w, 1e-3, 1e-3, 2.0 * g).unwrap();
            prop_assert!((b / a - 2.0).abs() < 1e-14);
        }
    }
}
