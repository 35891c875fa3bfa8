//! Focusing optimization over (κ, ζ_R) and parameter sweeps of the full pipeline.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{ensure, Error, Result};
use crate::filters::FilterSpec;
use crate::overlap::focus_objective;
use crate::quantities::{parse_quantity, solve_poling_period, Dimension, C};
use crate::quantum::SourceReport;
use crate::source::{evaluate, EvalOptions, SourceConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FocusBounds {
    pub kappa: (f64, f64),
    pub zeta_r: (f64, f64),
}

impl Default for FocusBounds {
    fn default() -> Self {
        FocusBounds { kappa: (-20.0, 5.0), zeta_r: (0.02, 5.0) }
    }
}

impl FocusBounds {
    fn check(&self) -> Result<()> {
        let ok = |(lo, hi): (f64, f64)| lo.is_finite() && hi.is_finite() && lo <= hi;
        ensure(ok(self.kappa) && ok(self.zeta_r), || format!("bounds must be finite with lo <= hi: {self:?}"))?;
        ensure(self.zeta_r.0 >= 0.01, || format!("zeta_R lower bound must be >= 0.01, got {}", self.zeta_r.0))
    }

    fn lower(&self) -> [f64; 2] {
        [self.kappa.0, self.zeta_r.0]
    }

    fn width(&self) -> [f64; 2] {
        [self.kappa.1 - self.kappa.0, self.zeta_r.1 - self.zeta_r.0]
    }

    fn to_point(self, u: [f64; 2]) -> [f64; 2] {
        let (lo, w) = (self.lower(), self.width());
        [lo[0] + w[0] * u[0].clamp(0.0, 1.0), lo[1] + w[1] * u[1].clamp(0.0, 1.0)]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OptimizeOptions {
    /// Stop when the simplex spread is below tol·objective.
    pub tol: f64,
    pub quad_tol: f64,
    pub restarts: usize,
    pub seed: u64,
    /// Objective evaluations allowed per simplex run.
    pub max_evals: usize,
    /// Points per axis of the scan that seeds the first start.
    pub grid: usize,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        OptimizeOptions { tol: 1e-8, quad_tol: 1e-11, restarts: 5, seed: 0x5eed, max_evals: 2000, grid: 25 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizationResult {
    pub best_kappa: f64,
    pub best_zeta_r: f64,
    pub best_objective: f64,
    pub evaluations: usize,
    pub converged: bool,
    /// Every evaluated (κ, ζ_R, objective), grid scan first, then each run in start order.
    pub trace: Vec<(f64, f64, f64)>,
}

/// Maximize ζ_R|Υ(κ, ζ_R, R_k)|² inside `bounds`.
///
/// ```
/// use spdc_core::optimizer::{optimize_focus, FocusBounds};
/// let r = optimize_focus(0.04, FocusBounds::default(), 1e-6).unwrap();
/// assert!((r.best_objective - 0.054).abs() < 0.003);
/// ```
pub fn optimize_focus(r_k: f64, bounds: FocusBounds, tol: f64) -> Result<OptimizationResult> {
    optimize_focus_with(r_k, bounds, &OptimizeOptions { tol, ..Default::default() })
}

struct Run {
    best: ([f64; 2], f64),
    trace: Vec<(f64, f64, f64)>,
    converged: bool,
}

pub fn optimize_focus_with(r_k: f64, bounds: FocusBounds, opts: &OptimizeOptions) -> Result<OptimizationResult> {
    bounds.check()?;
    ensure(opts.tol > 0.0 && opts.tol < 1.0, || format!("tol must lie in (0, 1), got {}", opts.tol))?;
    ensure(r_k.abs() < 1.0, || format!("|R_k| must be < 1, got {r_k}"))?;
    let f = |p: [f64; 2]| focus_objective(p[0], p[1], r_k, opts.quad_tol);

    let w = bounds.width();
    if w[0] == 0.0 && w[1] == 0.0 {
        let p = bounds.lower();
        let v = f(p)?;
        return Ok(OptimizationResult {
            best_kappa: p[0],
            best_zeta_r: p[1],
            best_objective: v,
            evaluations: 1,
            converged: true,
            trace: vec![(p[0], p[1], v)],
        });
    }

    let n = opts.grid.max(2);
    let cells: Vec<[f64; 2]> =
        (0..n * n).map(|j| [(j / n) as f64 / (n - 1) as f64, (j % n) as f64 / (n - 1) as f64]).collect();
    let scan = cells.par_iter().map(|u| f(bounds.to_point(*u)).map(|v| (*u, v))).collect::<Result<Vec<_>>>()?;
    let mut trace: Vec<(f64, f64, f64)> = scan
        .iter()
        .map(|(u, v)| {
            let p = bounds.to_point(*u);
            (p[0], p[1], *v)
        })
        .collect();
    let grid_best = scan.iter().fold(scan[0], |a, b| if b.1 > a.1 { *b } else { a }).0;

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut starts = vec![grid_best];
    starts.extend((0..opts.restarts).map(|_| [rng.gen::<f64>(), rng.gen::<f64>()]));
    let runs = starts
        .par_iter()
        .map(|u0| nelder_mead(|u| f(bounds.to_point(u)), *u0, w, opts))
        .collect::<Result<Vec<Run>>>()?;

    let mut best = (grid_best, f64::NEG_INFINITY);
    let mut converged = false;
    for run in &runs {
        if run.best.1 > best.1 {
            best = run.best;
            converged = run.converged;
        }
        trace.extend(run.trace.iter().map(|(a, b, v)| {
            let p = bounds.to_point([*a, *b]);
            (p[0], p[1], *v)
        }));
    }
    let p = bounds.to_point(best.0);
    Ok(OptimizationResult {
        best_kappa: p[0],
        best_zeta_r: p[1],
        best_objective: best.1,
        evaluations: trace.len(),
        converged,
        trace,
    })
}

// Nelder–Mead on the unit square (maximizing). Degenerate axes (zero width)
// are frozen by giving them no simplex extent.
fn nelder_mead(
    f: impl Fn([f64; 2]) -> Result<f64>,
    u0: [f64; 2],
    width: [f64; 2],
    opts: &OptimizeOptions,
) -> Result<Run> {
    let clamp = |u: [f64; 2]| [u[0].clamp(0.0, 1.0), u[1].clamp(0.0, 1.0)];
    let mut trace = Vec::new();
    let eval = |u: [f64; 2], trace: &mut Vec<(f64, f64, f64)>| -> Result<([f64; 2], f64)> {
        let u = clamp(u);
        let v = f(u)?;
        trace.push((u[0], u[1], v));
        Ok((u, v))
    };
    let step = 0.05;
    let mut simplex = vec![eval(u0, &mut trace)?];
    for d in 0..2 {
        let mut u = u0;
        if width[d] > 0.0 {
            u[d] += if u[d] + step <= 1.0 { step } else { -step };
        }
        simplex.push(eval(u, &mut trace)?);
    }
    let mut converged = false;
    while trace.len() < opts.max_evals {
        simplex.sort_by(|a, b| b.1.total_cmp(&a.1));
        let (hi, lo) = (simplex[0].1, simplex[2].1);
        if (hi - lo).abs() <= opts.tol * hi.abs() {
            converged = true;
            break;
        }
        let c = [0.5 * (simplex[0].0[0] + simplex[1].0[0]), 0.5 * (simplex[0].0[1] + simplex[1].0[1])];
        let along = |t: f64| [c[0] + t * (simplex[2].0[0] - c[0]), c[1] + t * (simplex[2].0[1] - c[1])];
        let r = eval(along(-1.0), &mut trace)?;
        if r.1 > simplex[0].1 {
            let e = eval(along(-2.0), &mut trace)?;
            simplex[2] = if e.1 > r.1 { e } else { r };
        } else if r.1 > simplex[1].1 {
            simplex[2] = r;
        } else {
            let k = if r.1 > simplex[2].1 { eval(along(-0.5), &mut trace)? } else { eval(along(0.5), &mut trace)? };
            if k.1 > simplex[2].1.max(r.1) {
                simplex[2] = k;
            } else {
                let b = simplex[0].0;
                for v in simplex.iter_mut().skip(1) {
                    *v = eval([0.5 * (b[0] + v.0[0]), 0.5 * (b[1] + v.0[1])], &mut trace)?;
                }
            }
        }
    }
    simplex.sort_by(|a, b| b.1.total_cmp(&a.1));
    Ok(Run { best: simplex[0], trace, converged })
}

/// Sweepable inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum SweepParam {
    Kappa,
    ZetaR,
    Rk,
    RayleighRange,
    GammaS,
    GammaI,
    PumpPower,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Kappa => "kappa",
            SweepParam::ZetaR => "zeta_R",
            SweepParam::Rk => "R_k",
            SweepParam::RayleighRange => "z_R",
            SweepParam::GammaS => "gamma_s",
            SweepParam::GammaI => "gamma_i",
            SweepParam::PumpPower => "P_p",
        }
    }

    fn dimension(self) -> Dimension {
        match self {
            SweepParam::Kappa | SweepParam::ZetaR | SweepParam::Rk => Dimension::Dimensionless,
            SweepParam::RayleighRange => Dimension::Length,
            SweepParam::GammaS | SweepParam::GammaI => Dimension::AngularFrequency,
            SweepParam::PumpPower => Dimension::Power,
        }
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepParam {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim() {
            "kappa" => SweepParam::Kappa,
            "zeta_R" | "zeta_r" => SweepParam::ZetaR,
            "R_k" | "r_k" => SweepParam::Rk,
            "z_R" | "z_r" => SweepParam::RayleighRange,
            "gamma_s" => SweepParam::GammaS,
            "gamma_i" => SweepParam::GammaI,
            "P_p" | "p_p" | "pump_power" => SweepParam::PumpPower,
            other => return Err(Error::invalid(format!("unknown sweep parameter `{other}`"))),
        })
    }
}

/// One axis: a parameter and its SI values.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepAxis {
    pub param: SweepParam,
    pub values: Vec<f64>,
}

pub const MAX_SWEEP_POINTS: usize = 1_000_000;

impl SweepAxis {
    /// `name=start:stop:count [unit]` or `name=value [unit]`, e.g.
    /// `kappa=-10:2:200` or `gamma_i=0.5:5:10 MHz`. Dimensional parameters need a unit.
    ///
    /// ```
    /// use spdc_core::optimizer::{SweepAxis, SweepParam};
    /// let a = SweepAxis::parse("kappa=-10:2:5").unwrap();
    /// assert_eq!(a.param, SweepParam::Kappa);
    /// assert_eq!(a.values, vec![-10.0, -7.0, -4.0, -1.0, 2.0]);
    /// ```
    pub fn parse(text: &str) -> Result<Self> {
        let (name, rest) = text
            .split_once('=')
            .ok_or_else(|| Error::invalid(format!("sweep axis `{text}` must look like name=start:stop:count")))?;
        let param: SweepParam = name.parse()?;
        let rest = rest.trim();
        let (range, unit) = match rest.split_once(char::is_whitespace) {
            Some((r, u)) => (r, u.trim()),
            None => (rest, ""),
        };
        let scale = |v: f64| -> Result<f64> {
            let (si, dim) = parse_quantity(&format!("{v:e} {unit}"))?;
            ensure(dim == param.dimension(), || {
                format!("sweep parameter {param} needs a {:?} unit, got `{unit}`", param.dimension())
            })?;
            Ok(si)
        };
        let parts: Vec<&str> = range.split(':').collect();
        let num = |s: &str| -> Result<f64> {
            s.trim().parse::<f64>().map_err(|_| Error::invalid(format!("`{s}` in sweep axis `{text}` is not a number")))
        };
        let raw = match parts.as_slice() {
            [v] => vec![num(v)?],
            [a, b, n] => {
                let (a, b) = (num(a)?, num(b)?);
                let n: usize =
                    n.trim().parse().map_err(|_| Error::invalid(format!("point count `{n}` is not an integer")))?;
                ensure((1..=MAX_SWEEP_POINTS).contains(&n), || {
                    format!("point count must be in 1..={MAX_SWEEP_POINTS}")
                })?;
                if n == 1 {
                    ensure(a == b, || "a one-point axis needs start == stop".into())?;
                    vec![a]
                } else {
                    (0..n).map(|j| a + (b - a) * j as f64 / (n - 1) as f64).collect()
                }
            }
            _ => return Err(Error::invalid(format!("sweep axis `{text}` must look like name=start:stop:count"))),
        };
        let values = raw.into_iter().map(scale).collect::<Result<Vec<_>>>()?;
        ensure(values.iter().all(|v| v.is_finite()), || "sweep values must be finite".into())?;
        Ok(SweepAxis { param, values })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    /// Parameter values for this row, in axis order (SI units).
    pub point: Vec<(SweepParam, f64)>,
    pub report: Option<SourceReport>,
    pub error: Option<String>,
}

/// Apply one swept value to a configuration.
pub fn apply_param(cfg: &SourceConfig, param: SweepParam, value: f64) -> Result<SourceConfig> {
    let mut out = cfg.clone();
    let l = cfg.crystal.length();
    match param {
        SweepParam::Kappa => {
            let period = solve_poling_period(&cfg.waves, l, value)?;
            out.crystal = cfg.crystal.with_poling_period(Some(period))?;
        }
        SweepParam::ZetaR => {
            ensure(value > 0.0, || format!("zeta_R must be positive, got {value}"))?;
            out.rayleigh_range = value * l;
        }
        SweepParam::RayleighRange => {
            ensure(value > 0.0, || format!("z_R must be positive, got {value}"))?;
            out.rayleigh_range = value;
        }
        SweepParam::Rk => {
            ensure(value.abs() < 1.0, || format!("|R_k| must be < 1, got {value}"))?;
            let kappa = (cfg.waves.k_minus() - cfg.crystal.qpm_wavenumber()) * l;
            let k_si = cfg.waves.signal().wavenumber() + cfg.waves.idler().wavenumber();
            let k_p = (1.0 + value) / (1.0 - value) * k_si;
            let n_p = k_p * C / cfg.waves.pump().angular_frequency();
            out.waves = cfg.waves.with_pump_index(n_p)?;
            let period = solve_poling_period(&out.waves, l, kappa)?;
            out.crystal = cfg.crystal.with_poling_period(Some(period))?;
        }
        SweepParam::GammaS => out.filter_signal = FilterSpec::lorentzian(value)?,
        SweepParam::GammaI => out.filter_idler = FilterSpec::lorentzian(value)?,
        SweepParam::PumpPower => {
            ensure(value >= 0.0, || format!("pump power must be non-negative, got {value}"))?;
            out.pump_power = value;
        }
    }
    Ok(out)
}

/// Evaluate the pipeline on the product grid of one or two axes. Rows come
/// back in row-major order (last axis fastest); a failing point records its
/// error and the sweep carries on.
pub fn sweep(cfg: &SourceConfig, axes: &[SweepAxis], opts: &EvalOptions) -> Result<Vec<SweepRow>> {
    ensure(matches!(axes.len(), 1 | 2), || format!("sweep takes one or two axes, got {}", axes.len()))?;
    if let [a, b] = axes {
        ensure(a.param != b.param, || format!("axis {} given twice", a.param))?;
    }
    ensure(axes.iter().all(|a| !a.values.is_empty()), || "sweep axes must be non-empty".into())?;
    let total = axes.iter().map(|a| a.values.len()).product::<usize>();
    ensure(total <= MAX_SWEEP_POINTS, || format!("sweep has {total} points, limit is {MAX_SWEEP_POINTS}"))?;

    let rows = (0..total)
        .into_par_iter()
        .map(|idx| {
            let mut rem = idx;
            let mut point = vec![(axes[0].param, 0.0); axes.len()];
            for (k, axis) in axes.iter().enumerate().rev() {
                let n = axis.values.len();
                point[k] = (axis.param, axis.values[rem % n]);
                rem /= n;
            }
            let result = point
                .iter()
                .try_fold(cfg.clone(), |c, (p, v)| apply_param(&c, *p, *v))
                .and_then(|c| evaluate(&c, opts));
            match result {
                Ok(r) => SweepRow { point, report: Some(r), error: None },
                Err(e) => SweepRow { point, report: None, error: Some(e.to_string()) },
            }
        })
        .collect();
    Ok(rows)
}
