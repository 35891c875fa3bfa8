//! Narrow-band filters: effective linewidths and the signal–idler
//! correlation amplitude f(τ), τ = t_s − t_i.
//!
//! Γ is the angular-frequency FWHM of the Lorentzian power transmission
//! T(Ω) = Γ²/(Γ² + 4Ω²). Tabulated filters are assumed to have zero spectral
//! phase, i.e. amplitude response √T(Ω).

use std::cell::RefCell;
use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{ensure, Error, Result};
use crate::quadrature::{integrate_real_line, QuadConfig};
use crate::quantities::Unit;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum FilterSpec {
    Lorentzian { gamma: f64 },
    Tabulated { omega: Vec<f64>, transmission: Vec<f64> },
    Unfiltered,
}

impl FilterSpec {
    pub fn lorentzian(gamma: f64) -> Result<Self> {
        ensure(gamma.is_finite() && gamma > 0.0, || format!("Lorentzian width must be positive, got {gamma}"))?;
        Ok(FilterSpec::Lorentzian { gamma })
    }

    pub fn tabulated(omega: Vec<f64>, transmission: Vec<f64>) -> Result<Self> {
        ensure(omega.len() == transmission.len() && omega.len() >= 2, || {
            "tabulated filter needs at least two (omega, T) rows".into()
        })?;
        ensure(omega.windows(2).all(|w| w[1] > w[0]) && omega.iter().all(|o| o.is_finite()), || {
            "filter frequency grid must be strictly increasing".into()
        })?;
        ensure(transmission.iter().all(|t| (0.0..=1.0).contains(t)), || "transmission must lie in [0, 1]".into())?;
        Ok(FilterSpec::Tabulated { omega, transmission })
    }

    pub fn transmission(&self, omega: f64) -> f64 {
        match self {
            FilterSpec::Lorentzian { gamma } => gamma * gamma / (gamma * gamma + 4.0 * omega * omega),
            FilterSpec::Tabulated { omega: grid, transmission } => interp(grid, transmission, omega),
            FilterSpec::Unfiltered => 1.0,
        }
    }

    /// Complex amplitude response F̂(Ω); |F̂|² = T.
    pub fn amplitude(&self, omega: f64) -> Complex64 {
        match self {
            FilterSpec::Lorentzian { gamma } => {
                let h = 0.5 * gamma;
                Complex64::new(h, 0.0) / Complex64::new(h, -omega)
            }
            FilterSpec::Tabulated { .. } => Complex64::new(self.transmission(omega).sqrt(), 0.0),
            FilterSpec::Unfiltered => Complex64::new(1.0, 0.0),
        }
    }

    /// Frequency scale used for the sampling check on τ grids.
    fn bandwidth(&self) -> Option<f64> {
        match self {
            FilterSpec::Lorentzian { gamma } => Some(*gamma),
            FilterSpec::Tabulated { omega, transmission } => omega
                .iter()
                .zip(transmission)
                .filter(|(_, t)| **t > 0.0)
                .map(|(o, _)| o.abs())
                .fold(None, |m: Option<f64>, o| Some(m.map_or(o, |m| m.max(o)))),
            FilterSpec::Unfiltered => None,
        }
    }

    fn support(&self) -> Option<(f64, f64)> {
        match self {
            FilterSpec::Tabulated { omega, .. } => Some((omega[0], omega[omega.len() - 1])),
            _ => None,
        }
    }

    fn min_spacing(&self) -> Option<f64> {
        match self {
            FilterSpec::Tabulated { omega, .. } => omega.windows(2).map(|w| w[1] - w[0]).reduce(f64::min),
            _ => None,
        }
    }
}

fn interp(grid: &[f64], values: &[f64], x: f64) -> f64 {
    if x < grid[0] || x > grid[grid.len() - 1] {
        return 0.0;
    }
    let j = grid.partition_point(|g| *g <= x).clamp(1, grid.len() - 1);
    let (x0, x1) = (grid[j - 1], grid[j]);
    let t = (x - x0) / (x1 - x0);
    values[j - 1] * (1.0 - t) + values[j] * t
}

/// Uniform grid covering the overlap of the signal support and the mirrored
/// idler support, or `None` when neither filter is tabulated.
fn product_grid(fs: &FilterSpec, fi: &FilterSpec) -> Option<Vec<f64>> {
    let s = fs.support();
    let i = fi.support().map(|(a, b)| (-b, -a));
    let (lo, hi) = match (s, i) {
        (None, None) => return None,
        (Some(x), None) | (None, Some(x)) => x,
        (Some(a), Some(b)) => (a.0.max(b.0), a.1.min(b.1)),
    };
    if hi <= lo {
        return Some(Vec::new());
    }
    let step = [fs.min_spacing(), fi.min_spacing()].into_iter().flatten().fold(f64::INFINITY, f64::min) / 2.0;
    let n = (((hi - lo) / step).ceil() as usize).clamp(1, 200_000);
    let mut grid: Vec<f64> = (0..=n).map(|j| lo + (hi - lo) * j as f64 / n as f64).collect();
    // A Lorentzian narrower than the table spacing needs its own nodes:
    // Ω = (Γ/2)tan θ with θ uniform puts them where the line lives.
    for f in [fs, fi] {
        if let FilterSpec::Lorentzian { gamma } = f {
            let m = LORENTZ_NODES;
            grid.extend(
                (1..m).map(|j| 0.5 * gamma * (PI * (j as f64 / m as f64 - 0.5)).tan()).filter(|o| *o > lo && *o < hi),
            );
        }
    }
    for (f, sign) in [(fs, 1.0), (fi, -1.0)] {
        if let FilterSpec::Tabulated { omega, .. } = f {
            grid.extend(omega.iter().map(|o| sign * o).filter(|o| *o > lo && *o < hi));
        }
    }
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    Some(grid)
}

const LORENTZ_NODES: usize = 4000;

/// ∫T_s(Ω)T_i(−Ω)dΩ when at least one filter is tabulated. Between
/// breakpoints a table is linear, so each segment is integrated exactly:
/// Simpson for table × table, closed-form moments for table × Lorentzian.
fn piecewise_overlap(fs: &FilterSpec, fi: &FilterSpec) -> f64 {
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    let mut cuts = Vec::new();
    for (f, sign) in [(fs, 1.0), (fi, -1.0)] {
        if let FilterSpec::Tabulated { omega, .. } = f {
            let (a, b) = (sign * omega[0], sign * omega[omega.len() - 1]);
            lo = lo.max(a.min(b));
            hi = hi.min(a.max(b));
            cuts.extend(omega.iter().map(|o| sign * o));
        }
    }
    if hi <= lo {
        return 0.0;
    }
    cuts.retain(|c| *c > lo && *c < hi);
    cuts.extend([lo, hi]);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let line = [(fs, 1.0), (fi, -1.0)].into_iter().find_map(|(f, _)| match f {
        FilterSpec::Lorentzian { gamma } => Some(*gamma),
        _ => None,
    });
    // The tabulated factor (or product of factors) on one segment.
    let table = |o: f64| {
        let ts = if matches!(fs, FilterSpec::Lorentzian { .. }) { 1.0 } else { fs.transmission(o) };
        let ti = if matches!(fi, FilterSpec::Lorentzian { .. }) { 1.0 } else { fi.transmission(-o) };
        ts * ti
    };
    cuts.windows(2)
        .map(|w| {
            let (a, b) = (w[0], w[1]);
            match line {
                None => (b - a) / 6.0 * (table(a) + 4.0 * table(0.5 * (a + b)) + table(b)),
                Some(g) => {
                    // T_L = Γ²/(Γ² + 4Ω²) is even, so mirroring the idler changes nothing.
                    let (x, y) = (2.0 * a / g, 2.0 * b / g);
                    let i0 = 0.5 * g * (y - x).atan2(1.0 + x * y);
                    let i1 = g * g / 8.0 * (4.0 * (b * b - a * a) / (g * g + 4.0 * a * a)).ln_1p();
                    let (ta, tb) = (table(a), table(b));
                    let slope = (tb - ta) / (b - a);
                    ta * i0 + slope * (i1 - a * i0)
                }
            }
        })
        .sum()
}

fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2).zip(y.windows(2)).map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1])).sum()
}

fn quad_cfg() -> QuadConfig {
    QuadConfig { rel_tol: 1e-11, abs_tol: 0.0, max_subdivisions: 4000 }
}

/// Γ_eff = (2/π)∫T_s(Ω)T_i(−Ω)dΩ evaluated numerically, whatever the filter kinds.
pub fn gamma_eff_spectral(fs: &FilterSpec, fi: &FilterSpec) -> Result<f64> {
    if matches!((fs, fi), (FilterSpec::Unfiltered, FilterSpec::Unfiltered)) {
        return Err(Error::invalid("both arms unfiltered: the effective linewidth is undefined"));
    }
    let integral = match product_grid(fs, fi) {
        Some(_) => piecewise_overlap(fs, fi),
        None => {
            integrate_real_line(|o| Complex64::new(fs.transmission(o) * fi.transmission(-o), 0.0), &quad_cfg())?
                .value
                .re
        }
    };
    Ok(2.0 / PI * integral)
}

/// Joint effective linewidth Γ_eff in rad/s.
///
/// ```
/// use spdc_core::filters::{gamma_eff_pair, FilterSpec};
/// let g = 2.0 * std::f64::consts::PI * 1e6;
/// let f = FilterSpec::lorentzian(g).unwrap();
/// assert_eq!(gamma_eff_pair(&f, &f).unwrap(), g / 2.0);
/// ```
pub fn gamma_eff_pair(fs: &FilterSpec, fi: &FilterSpec) -> Result<f64> {
    use FilterSpec::*;
    match (fs, fi) {
        (Lorentzian { gamma: a }, Lorentzian { gamma: b }) => Ok(a * b / (a + b)),
        (Lorentzian { gamma }, Unfiltered) | (Unfiltered, Lorentzian { gamma }) => Ok(*gamma),
        _ => gamma_eff_spectral(fs, fi),
    }
}

/// Single-arm effective linewidth Γ_eff,s = 4∫|F(t)|²dt = (2/π)∫T(Ω)dΩ.
pub fn gamma_eff_single(f: &FilterSpec) -> Result<f64> {
    match f {
        FilterSpec::Lorentzian { gamma } => Ok(*gamma),
        FilterSpec::Tabulated { omega, transmission } => Ok(2.0 / PI * trapezoid(omega, transmission)),
        FilterSpec::Unfiltered => Err(Error::invalid("unfiltered arm: single-arm linewidth is undefined")),
    }
}

/// f(τ) at one delay, closed form where one exists.
pub fn correlation_at(fs: &FilterSpec, fi: &FilterSpec, tau: f64) -> Result<Complex64> {
    use FilterSpec::*;
    let real = |v: f64| Ok(Complex64::new(v, 0.0));
    match (fs, fi) {
        (Unfiltered, Unfiltered) => Err(Error::invalid("both arms unfiltered: f(tau) is not a function")),
        (Lorentzian { gamma: gs }, Lorentzian { gamma: gi }) => {
            let pre = gs * gi / (2.0 * (gs + gi));
            if tau >= 0.0 {
                real(pre * (-0.5 * gs * tau).exp())
            } else {
                real(pre * (0.5 * gi * tau).exp())
            }
        }
        // Unfiltered signal: the idler always arrives later (τ ≤ 0). The
        // jump at τ = 0 takes its midpoint value.
        (Unfiltered, Lorentzian { gamma }) => real(if tau > 0.0 {
            0.0
        } else if tau < 0.0 {
            0.5 * gamma * (0.5 * gamma * tau).exp()
        } else {
            0.25 * gamma
        }),
        (Lorentzian { gamma }, Unfiltered) => real(if tau < 0.0 {
            0.0
        } else if tau > 0.0 {
            0.5 * gamma * (-0.5 * gamma * tau).exp()
        } else {
            0.25 * gamma
        }),
        _ => {
            let grid = product_grid(fs, fi).expect("one filter is tabulated");
            let y: Vec<Complex64> = grid
                .iter()
                .map(|o| fs.amplitude(*o) * fi.amplitude(-o) * Complex64::from_polar(1.0, -o * tau))
                .collect();
            let sum: Complex64 =
                grid.windows(2).zip(y.windows(2)).map(|(x, y)| (y[0] + y[1]) * (0.5 * (x[1] - x[0]))).sum();
            Ok(sum / (2.0 * PI))
        }
    }
}

/// 4∫|f(τ)|²dτ by adaptive quadrature over the whole delay axis.
pub fn temporal_gamma_eff(fs: &FilterSpec, fi: &FilterSpec) -> Result<f64> {
    let scale = [fs.bandwidth(), fi.bandwidth()]
        .into_iter()
        .flatten()
        .fold(None, |m: Option<f64>, g| Some(m.map_or(g, |m| m.min(g))))
        .ok_or_else(|| Error::invalid("both arms unfiltered"))?;
    // Integrate in units of 1/Γ so the mapping to (−1, 1) is well scaled.
    let t = 1.0 / scale;
    let err = RefCell::new(None);
    let out = integrate_real_line(
        |x| match correlation_at(fs, fi, x * t) {
            Ok(f) => Complex64::new(f.norm_sqr(), 0.0),
            Err(e) => {
                err.borrow_mut().get_or_insert(e);
                Complex64::new(0.0, 0.0)
            }
        },
        &quad_cfg(),
    )?;
    if let Some(e) = err.into_inner() {
        return Err(e);
    }
    Ok(4.0 * out.value.re * t)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationTrace {
    /// Delays τ = t_s − t_i (s).
    pub tau: Vec<f64>,
    /// f(τ) in s⁻¹.
    pub f: Vec<Complex64>,
    /// rad/s
    pub gamma_eff: f64,
    /// W⁽²⁾(τ) in s⁻², once a rate prefactor is attached.
    pub pair_density: Option<Vec<f64>>,
}

impl CorrelationTrace {
    /// Attach W⁽²⁾(τ) = prefactor·|f(τ)|², prefactor in s⁻¹ per unit |f|²·s.
    pub fn with_rate_prefactor(mut self, prefactor: f64) -> Self {
        self.pair_density = Some(self.f.iter().map(|f| prefactor * f.norm_sqr()).collect());
        self
    }

    /// 4∫|f|²dτ on the trace's own grid (trapezoid).
    pub fn gamma_eff_from_grid(&self) -> f64 {
        let y: Vec<f64> = self.f.iter().map(|f| f.norm_sqr()).collect();
        4.0 * trapezoid(&self.tau, &y)
    }

    /// Full width at half maximum of |f|², by linear interpolation on the grid.
    pub fn fwhm(&self) -> Option<f64> {
        let y: Vec<f64> = self.f.iter().map(|f| f.norm_sqr()).collect();
        let (imax, &peak) = y.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1))?;
        let half = 0.5 * peak;
        let left = (1..=imax).rev().find(|&j| y[j - 1] < half).map(|j| {
            let t = (half - y[j - 1]) / (y[j] - y[j - 1]);
            self.tau[j - 1] + t * (self.tau[j] - self.tau[j - 1])
        })?;
        let right = (imax..y.len() - 1).find(|&j| y[j + 1] < half).map(|j| {
            let t = (y[j] - half) / (y[j] - y[j + 1]);
            self.tau[j] + t * (self.tau[j + 1] - self.tau[j])
        })?;
        Some(right - left)
    }
}

/// Sample f(τ) on `tau` (strictly increasing, spacing ≤ π/Γ_max).
pub fn correlation_shape(fs: &FilterSpec, fi: &FilterSpec, tau: &[f64]) -> Result<CorrelationTrace> {
    ensure(tau.len() >= 2, || "need at least two delays".into())?;
    ensure(tau.windows(2).all(|w| w[1] > w[0]) && tau.iter().all(|t| t.is_finite()), || {
        "delay grid must be strictly increasing".into()
    })?;
    let gamma_eff = gamma_eff_pair(fs, fi)?;
    let g_max = [fs.bandwidth(), fi.bandwidth()].into_iter().flatten().fold(0.0, f64::max);
    let dt = tau.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    if g_max > 0.0 {
        ensure(dt <= PI / g_max, || {
            format!("delay grid too coarse: step {dt:e} s exceeds pi/Gamma_max = {:e} s", PI / g_max)
        })?;
    }
    let f = tau.iter().map(|t| correlation_at(fs, fi, *t)).collect::<Result<Vec<_>>>()?;
    Ok(CorrelationTrace { tau: tau.to_vec(), f, gamma_eff, pair_density: None })
}

/// `n` evenly spaced delays on [−span, span].
pub fn symmetric_grid(span: f64, n: usize) -> Vec<f64> {
    let n = n.max(2);
    (0..n).map(|j| -span + 2.0 * span * j as f64 / (n - 1) as f64).collect()
}

/// Two-column filter table. The first non-comment line is a header naming
/// the frequency column and its unit, e.g. `offset_MHz transmission` or
/// `omega_rad_per_s transmission`. Ordinary frequencies become angular.
pub fn parse_filter_table(text: &str) -> Result<FilterSpec> {
    let mut unit: Option<Unit> = None;
    let mut omega = Vec::new();
    let mut trans = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let cols: Vec<&str> =
            content.split(|c: char| c == ',' || c.is_whitespace()).filter(|s| !s.is_empty()).collect();
        if cols.len() != 2 {
            return Err(Error::parse(line, format!("expected two columns, found {}", cols.len())));
        }
        match unit {
            None => {
                let u = match cols[0] {
                    "omega_rad_per_s" => Unit::RadPerSecond,
                    "offset_Hz" => Unit::Hertz,
                    "offset_kHz" => Unit::Kilohertz,
                    "offset_MHz" => Unit::Megahertz,
                    "offset_GHz" => Unit::Gigahertz,
                    other => return Err(Error::parse(line, format!("unknown frequency column `{other}`"))),
                };
                if cols[1] != "transmission" {
                    return Err(Error::parse(line, "second column must be `transmission`"));
                }
                unit = Some(u);
            }
            Some(u) => {
                let num = |s: &str| s.parse::<f64>().map_err(|_| Error::parse(line, format!("`{s}` is not a number")));
                omega.push(u.to_si(num(cols[0])?));
                trans.push(num(cols[1])?);
            }
        }
    }
    if unit.is_none() {
        return Err(Error::parse(0, "filter table has no header"));
    }
    FilterSpec::tabulated(omega, trans)
}

pub fn load_filter_table(path: impl AsRef<Path>) -> Result<FilterSpec> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_filter_table(&text)
}
