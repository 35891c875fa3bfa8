//! End-to-end evaluation of one source design: overlaps, efficiencies,
//! linewidths, rates and heralding efficiencies.

use serde::Serialize;

use crate::classical::{q_apg, q_dfg, q_sfg, q_shg, EfficiencyReport};
use crate::error::{ensure, Result};
use crate::filters::{gamma_eff_pair, gamma_eff_single, FilterSpec};
use crate::modebasis::{i_apg_sq, i_dfg_sq, LgBasisSpec, ParsevalOptions, ParsevalSum, DEFAULT_BASIS_ORDER};
use crate::overlap::{i_sfg_gaussian, upsilon, OverlapResult, UpsilonResult, DEFAULT_QUAD_TOL};
use crate::quantities::{derive_focus_params, Arm, CrystalSpec, FocusParams, WaveTriple};
use crate::quantum::{conditional_efficiency, pair_rate, singles_rate, SourceReport};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SourceConfig {
    pub name: String,
    pub waves: WaveTriple,
    pub crystal: CrystalSpec,
    /// Common Rayleigh range of pump and collection modes (m).
    pub rayleigh_range: f64,
    /// W
    pub pump_power: f64,
    pub filter_signal: FilterSpec,
    pub filter_idler: FilterSpec,
    /// Optional estimate of the phase-matching bandwidth in rad/s.
    pub phase_matching_bandwidth: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EvalOptions {
    pub quad_tol: f64,
    pub basis_order: usize,
    pub tail_threshold: f64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions { quad_tol: DEFAULT_QUAD_TOL, basis_order: DEFAULT_BASIS_ORDER, tail_threshold: 1e-4 }
    }
}

impl SourceConfig {
    pub fn focus_params(&self) -> Result<FocusParams> {
        derive_focus_params(&self.waves, &self.crystal, self.rayleigh_range)
    }
}

/// |I_DFG|² (or |I_APG|²) for one heralding arm, projected onto the
/// collection mode of the generated partner.
pub fn dfg_overlap(cfg: &SourceConfig, fp: &FocusParams, arm: Arm, opts: &EvalOptions) -> Result<ParsevalSum> {
    let popts = ParsevalOptions { quad_tol: opts.quad_tol, tail_threshold: opts.tail_threshold };
    let w = &cfg.waves;
    if w.is_degenerate() {
        let basis = LgBasisSpec::collection_mode(w.signal(), cfg.rayleigh_range, opts.basis_order)?;
        return i_apg_sq(w, &cfg.crystal, fp, &basis, &popts);
    }
    let generated = match arm {
        Arm::Signal => w.idler(),
        Arm::Idler => w.signal(),
    };
    let basis = LgBasisSpec::collection_mode(generated, cfg.rayleigh_range, opts.basis_order)?;
    i_dfg_sq(w, &cfg.crystal, fp, arm, &basis, &popts)
}

struct ArmResult {
    gamma: f64,
    i_dfg_sq: f64,
    q: f64,
    singles: f64,
    eta: f64,
    tail: f64,
}

fn evaluate_arm(
    cfg: &SourceConfig,
    fp: &FocusParams,
    arm: Arm,
    filter: &FilterSpec,
    gamma_eff: f64,
    i_sfg_sq: f64,
    opts: &EvalOptions,
) -> Result<Option<ArmResult>> {
    // No filter on this arm means no finite singles linewidth.
    if matches!(filter, FilterSpec::Unfiltered) {
        return Ok(None);
    }
    let gamma = gamma_eff_single(filter)?;
    let sum = dfg_overlap(cfg, fp, arm, opts)?;
    let q = if cfg.waves.is_degenerate() {
        q_apg(&cfg.waves, &cfg.crystal, sum.total)?
    } else {
        q_dfg(&cfg.waves, &cfg.crystal, arm, sum.total)?
    };
    let singles = singles_rate(&cfg.waves, arm, cfg.pump_power, q, gamma)?;
    let eta = conditional_efficiency(gamma_eff, gamma, i_sfg_sq, sum.total)?;
    Ok(Some(ArmResult { gamma, i_dfg_sq: sum.total, q, singles, eta, tail: sum.tail_estimate }))
}

/// The coincidence side of a design only: no mode sums.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairReport {
    pub focus: FocusParams,
    /// Υ(κ, ζ_R, R_k) as defined.
    pub upsilon: UpsilonResult,
    pub i_sfg: OverlapResult,
    /// Q_SFG, or Q_SHG for degenerate fields (W⁻¹).
    pub efficiency: f64,
    pub gamma_eff: f64,
    pub pair_rate: f64,
    /// W⁽²⁾ per (mW · MHz of ordinary-frequency Γ_eff).
    pub pair_brightness: f64,
    pub narrowband_warning: bool,
}

/// Overlap, efficiency, Γ_eff and W⁽²⁾ for `cfg`.
pub fn evaluate_pairs(cfg: &SourceConfig, quad_tol: f64) -> Result<PairReport> {
    ensure(cfg.pump_power.is_finite() && cfg.pump_power >= 0.0, || {
        format!("pump power must be non-negative, got {}", cfg.pump_power)
    })?;
    let fp = cfg.focus_params()?;
    let ups = upsilon(&fp, quad_tol)?;
    let i_sfg = i_sfg_gaussian(&cfg.waves, &cfg.crystal, &fp, quad_tol)?;
    let i2 = i_sfg.abs_sq();
    let q = if cfg.waves.is_degenerate() {
        q_shg(&cfg.waves, &cfg.crystal, i2)?
    } else {
        q_sfg(&cfg.waves, &cfg.crystal, i2)?
    };
    let gamma_eff = gamma_eff_pair(&cfg.filter_signal, &cfg.filter_idler)?;
    let w2 = pair_rate(&cfg.waves, cfg.pump_power, q, gamma_eff)?;
    let gamma_mhz = gamma_eff / (2.0 * std::f64::consts::PI * 1e6);
    let p_mw = cfg.pump_power * 1e3;
    Ok(PairReport {
        focus: fp,
        upsilon: ups,
        i_sfg,
        efficiency: q,
        gamma_eff,
        pair_rate: w2,
        pair_brightness: if p_mw > 0.0 { w2 / (p_mw * gamma_mhz) } else { 0.0 },
        narrowband_warning: cfg.phase_matching_bandwidth.is_some_and(|b| gamma_eff > b),
    })
}

/// Runs the full pipeline for `cfg`.
pub fn evaluate(cfg: &SourceConfig, opts: &EvalOptions) -> Result<SourceReport> {
    let pairs = evaluate_pairs(cfg, opts.quad_tol)?;
    let fp = pairs.focus;
    let i2 = pairs.i_sfg.abs_sq();
    let degenerate = cfg.waves.is_degenerate();
    let q_pair = pairs.efficiency;
    let gamma_eff = pairs.gamma_eff;

    let sig = evaluate_arm(cfg, &fp, Arm::Signal, &cfg.filter_signal, gamma_eff, i2, opts)?;
    let idl = evaluate_arm(cfg, &fp, Arm::Idler, &cfg.filter_idler, gamma_eff, i2, opts)?;

    let mut eff = EfficiencyReport { i_sfg_sq: i2, ..Default::default() };
    if degenerate {
        eff.q_shg = Some(q_pair);
        eff.q_apg = sig.as_ref().or(idl.as_ref()).map(|a| a.q);
    } else {
        eff.q_sfg = Some(q_pair);
        eff.q_dfg_signal = sig.as_ref().map(|a| a.q);
        eff.q_dfg_idler = idl.as_ref().map(|a| a.q);
    }
    eff.i_dfg_sq_signal = sig.as_ref().map(|a| a.i_dfg_sq);
    eff.i_dfg_sq_idler = idl.as_ref().map(|a| a.i_dfg_sq);

    Ok(SourceReport {
        focus: fp,
        upsilon: pairs.upsilon,
        i_sfg: pairs.i_sfg,
        efficiencies: eff,
        pump_power: cfg.pump_power,
        gamma_eff,
        gamma_eff_s: sig.as_ref().map(|a| a.gamma),
        gamma_eff_i: idl.as_ref().map(|a| a.gamma),
        pair_rate: pairs.pair_rate,
        pair_brightness: pairs.pair_brightness,
        singles_rate_signal: sig.as_ref().map(|a| a.singles),
        singles_rate_idler: idl.as_ref().map(|a| a.singles),
        eta_signal: sig.as_ref().map(|a| a.eta),
        eta_idler: idl.as_ref().map(|a| a.eta),
        mode_sum_tail_signal: sig.as_ref().map(|a| a.tail),
        mode_sum_tail_idler: idl.as_ref().map(|a| a.tail),
        narrowband_warning: pairs.narrowband_warning,
    })
}
