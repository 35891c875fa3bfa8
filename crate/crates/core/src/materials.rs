//! Crystal optical constants: fixed index triples or Sellmeier sets.
//!
//! # File format
//!
//! ```text
//! # one section per material
//! [PPKTP-800-typeII]
//! type = fixed
//! n_s = 1.844
//! n_i = 1.757
//! n_p = 1.964
//! d_eff_pm_per_V = 2.4
//! lambda_min_nm = 799
//! lambda_max_nm = 801
//!
//! [KTP]
//! type = sellmeier
//! # A, D, B1, C1, B2, C2, ...   n² = A − Dλ² + Σ Bλ²/(λ² − C), λ in µm
//! sellmeier_y = 2.19229, 0.01621, 0.83547, 0.04970
//! sellmeier_z = 2.25411, 0.02140, 1.06543, 0.05486
//! axis_s = z
//! axis_i = y
//! axis_p = z
//! d_eff_pm_per_V = 2.4
//! lambda_min_nm = 400
//! lambda_max_nm = 1600
//! ```
//!
//! A fixed record's wavelength window applies to signal and idler; the pump is
//! accepted on the halved window. Sellmeier windows apply to every field.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::textfmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Field {
    Signal,
    Idler,
    Pump,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    fn parse(s: &str) -> Option<Axis> {
        match s {
            "x" => Some(Axis::X),
            "y" => Some(Axis::Y),
            "z" => Some(Axis::Z),
            _ => None,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        }
    }
}

/// n² = A − Dλ² + Σ_j B_jλ²/(λ² − C_j), λ in µm.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sellmeier {
    pub a: f64,
    pub d: f64,
    pub poles: Vec<(f64, f64)>,
}

impl Sellmeier {
    /// From the flat list `A, D, B1, C1, ...`.
    pub fn from_list(coeffs: &[f64]) -> Option<Sellmeier> {
        if coeffs.len() < 2 || !coeffs.len().is_multiple_of(2) || coeffs.iter().any(|c| !c.is_finite()) {
            return None;
        }
        Some(Sellmeier { a: coeffs[0], d: coeffs[1], poles: coeffs[2..].chunks(2).map(|c| (c[0], c[1])).collect() })
    }

    pub fn to_list(&self) -> Vec<f64> {
        let mut v = vec![self.a, self.d];
        for &(b, c) in &self.poles {
            v.extend([b, c]);
        }
        v
    }

    pub fn n_squared(&self, wavelength: f64) -> f64 {
        let l2 = (wavelength * 1e6).powi(2);
        self.a - self.d * l2 + self.poles.iter().map(|&(b, c)| b * l2 / (l2 - c)).sum::<f64>()
    }

    pub fn index(&self, wavelength: f64) -> f64 {
        self.n_squared(wavelength).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum IndexModel {
    Fixed { n_s: f64, n_i: f64, n_p: f64 },
    Sellmeier { axes: BTreeMap<Axis, Sellmeier>, roles: BTreeMap<Field, Axis> },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaterialRecord {
    pub name: String,
    pub model: IndexModel,
    /// m/V
    pub d_eff: f64,
    /// (min, max) in metres.
    pub valid_range: (f64, f64),
}

impl MaterialRecord {
    fn validate(&self) -> std::result::Result<(), String> {
        let (lo, hi) = self.valid_range;
        if !(lo > 0.0 && hi > lo && hi.is_finite()) {
            return Err(format!("bad wavelength range [{lo}, {hi}]"));
        }
        if !(self.d_eff > 0.0 && self.d_eff.is_finite()) {
            return Err("d_eff must be positive".into());
        }
        match &self.model {
            IndexModel::Fixed { n_s, n_i, n_p } => {
                if [n_s, n_i, n_p].iter().any(|n| !(**n >= 1.0 && n.is_finite())) {
                    return Err("fixed indices must be >= 1".into());
                }
            }
            IndexModel::Sellmeier { axes, roles } => {
                for f in [Field::Signal, Field::Idler, Field::Pump] {
                    let ax = roles.get(&f).ok_or_else(|| format!("no axis assigned to {f:?}"))?;
                    if !axes.contains_key(ax) {
                        return Err(format!("{f:?} uses axis {} which has no coefficients", ax.name()));
                    }
                }
                for (ax, s) in axes {
                    let (lo_um, hi_um) = (lo * 1e6, hi * 1e6);
                    for &(_, c) in &s.poles {
                        if c > 0.0 && (lo_um..=hi_um).contains(&c.sqrt()) {
                            return Err(format!("axis {} has a resonance inside the valid range", ax.name()));
                        }
                    }
                    let steps = 2000;
                    for j in 0..=steps {
                        let lam = lo + (hi - lo) * j as f64 / steps as f64;
                        let n2 = s.n_squared(lam);
                        if !(n2 >= 1.0 && n2.is_finite()) {
                            return Err(format!("axis {} gives n^2 = {n2} < 1 at {:.1} nm", ax.name(), lam * 1e9));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Refractive index seen by `field` at `wavelength` (m).
pub fn index_at(record: &MaterialRecord, wavelength: f64, field: Field) -> Result<f64> {
    let (mut lo, mut hi) = record.valid_range;
    if matches!(record.model, IndexModel::Fixed { .. }) && field == Field::Pump {
        lo /= 2.0;
        hi /= 2.0;
    }
    // Ranges are stored from nm values; allow for the float round-trip.
    let slack = 1e-12 * hi;
    if !(wavelength >= lo - slack && wavelength <= hi + slack) {
        return Err(Error::invalid(format!(
            "{:.3} nm is outside the {:?} range [{:.3}, {:.3}] nm of `{}`",
            wavelength * 1e9,
            field,
            lo * 1e9,
            hi * 1e9,
            record.name
        )));
    }
    Ok(match &record.model {
        IndexModel::Fixed { n_s, n_i, n_p } => match field {
            Field::Signal => *n_s,
            Field::Idler => *n_i,
            Field::Pump => *n_p,
        },
        IndexModel::Sellmeier { axes, roles } => axes[&roles[&field]].index(wavelength),
    })
}

const KEYS: [&str; 13] = [
    "type",
    "n_s",
    "n_i",
    "n_p",
    "sellmeier_x",
    "sellmeier_y",
    "sellmeier_z",
    "axis_s",
    "axis_i",
    "axis_p",
    "d_eff_pm_per_V",
    "lambda_min_nm",
    "lambda_max_nm",
];

pub fn parse_material_db(text: &str) -> Result<Vec<MaterialRecord>> {
    let mut out: Vec<MaterialRecord> = Vec::new();
    for sec in textfmt::parse(text)? {
        let name = sec
            .name
            .clone()
            .ok_or_else(|| Error::parse(sec.entries[0].line, "entries before the first [material] header"))?;
        if out.iter().any(|r| r.name == name) {
            return Err(Error::parse(sec.line, format!("duplicate material `{name}`")));
        }
        for e in &sec.entries {
            if !KEYS.contains(&e.key.as_str()) {
                return Err(Error::parse(e.line, format!("unknown key `{}`", e.key)));
            }
        }
        let label = name.clone();
        let require =
            |key: &str| sec.get(key).ok_or_else(|| Error::parse(sec.line, format!("`{label}` is missing `{key}`")));
        let number = |key: &str| -> Result<f64> {
            let e = require(key)?;
            e.value.parse::<f64>().map_err(|_| Error::parse(e.line, format!("`{}` is not a number", e.value)))
        };
        let kind = require("type")?;
        let (model, allowed): (IndexModel, &[&str]) = match kind.value.as_str() {
            "fixed" => (
                IndexModel::Fixed { n_s: number("n_s")?, n_i: number("n_i")?, n_p: number("n_p")? },
                &["n_s", "n_i", "n_p"],
            ),
            "sellmeier" => {
                let mut axes = BTreeMap::new();
                for ax in [Axis::X, Axis::Y, Axis::Z] {
                    if let Some(e) = sec.get(&format!("sellmeier_{}", ax.name())) {
                        let list = textfmt::parse_list(&e.value, e.line)?;
                        let s = Sellmeier::from_list(&list)
                            .ok_or_else(|| Error::parse(e.line, "Sellmeier list must be A, D, then (B, C) pairs"))?;
                        axes.insert(ax, s);
                    }
                }
                let mut roles = BTreeMap::new();
                for (f, key) in [(Field::Signal, "axis_s"), (Field::Idler, "axis_i"), (Field::Pump, "axis_p")] {
                    let e = require(key)?;
                    let ax = Axis::parse(&e.value)
                        .ok_or_else(|| Error::parse(e.line, format!("axis must be x, y or z, got `{}`", e.value)))?;
                    roles.insert(f, ax);
                }
                (
                    IndexModel::Sellmeier { axes, roles },
                    &["sellmeier_x", "sellmeier_y", "sellmeier_z", "axis_s", "axis_i", "axis_p"],
                )
            }
            other => return Err(Error::parse(kind.line, format!("type must be fixed or sellmeier, got `{other}`"))),
        };
        for e in &sec.entries {
            let generic = matches!(e.key.as_str(), "type" | "d_eff_pm_per_V" | "lambda_min_nm" | "lambda_max_nm");
            if !generic && !allowed.contains(&e.key.as_str()) {
                return Err(Error::parse(e.line, format!("`{}` does not apply to type {}", e.key, kind.value)));
            }
        }
        let rec = MaterialRecord {
            name,
            model,
            d_eff: number("d_eff_pm_per_V")? / 1e12,
            valid_range: (number("lambda_min_nm")? / 1e9, number("lambda_max_nm")? / 1e9),
        };
        rec.validate().map_err(|m| Error::parse(sec.line, format!("`{}`: {m}", rec.name)))?;
        out.push(rec);
    }
    Ok(out)
}

pub fn load_material_db(path: impl AsRef<Path>) -> Result<Vec<MaterialRecord>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_material_db(&text)
}

pub fn serialize_material_db(records: &[MaterialRecord]) -> String {
    let mut s = String::new();
    for r in records {
        let _ = writeln!(s, "[{}]", r.name);
        match &r.model {
            IndexModel::Fixed { n_s, n_i, n_p } => {
                let _ = writeln!(s, "type = fixed\nn_s = {n_s}\nn_i = {n_i}\nn_p = {n_p}");
            }
            IndexModel::Sellmeier { axes, roles } => {
                s.push_str("type = sellmeier\n");
                for (ax, set) in axes {
                    let list: Vec<String> = set.to_list().iter().map(f64::to_string).collect();
                    let _ = writeln!(s, "sellmeier_{} = {}", ax.name(), list.join(", "));
                }
                for (f, key) in [(Field::Signal, "axis_s"), (Field::Idler, "axis_i"), (Field::Pump, "axis_p")] {
                    let _ = writeln!(s, "{key} = {}", roles[&f].name());
                }
            }
        }
        let _ = writeln!(
            s,
            "d_eff_pm_per_V = {}\nlambda_min_nm = {}\nlambda_max_nm = {}\n",
            scaled(r.d_eff, 1e12),
            scaled(r.valid_range.0, 1e9),
            scaled(r.valid_range.1, 1e9)
        );
    }
    s
}

// Shortest decimal for `v·scale` that parses back to exactly `v`.
fn scaled(v: f64, scale: f64) -> String {
    let x = v * scale;
    for prec in 0..17 {
        let s = format!("{x:.prec$e}");
        if s.parse::<f64>().map(|y| y / scale) == Ok(v) {
            return s.parse::<f64>().expect("just parsed").to_string();
        }
    }
    x.to_string()
}

const BUILTIN: &str = "\
[PPKTP-800-typeII]
type = fixed
n_s = 1.844
n_i = 1.757
n_p = 1.964
d_eff_pm_per_V = 2.4
lambda_min_nm = 799
lambda_max_nm = 801

[KTP-Fan]
type = sellmeier
sellmeier_y = 2.19229, 0.01621, 0.83547, 0.04970
sellmeier_z = 2.25411, 0.02140, 1.06543, 0.05486
axis_s = z
axis_i = y
axis_p = z
d_eff_pm_per_V = 2.4
lambda_min_nm = 400
lambda_max_nm = 1600
";

/// Records that ship with the library.
pub fn builtin_materials() -> Vec<MaterialRecord> {
    parse_material_db(BUILTIN).expect("built-in material table parses")
}

pub fn find_material<'a>(records: &'a [MaterialRecord], name: &str) -> Result<&'a MaterialRecord> {
    records.iter().find(|r| r.name == name).ok_or_else(|| Error::invalid(format!("no material named `{name}`")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn constant_record() -> MaterialRecord {
        parse_material_db(
            "[const]\ntype = sellmeier\nsellmeier_x = 2.25, 0\naxis_s = x\naxis_i = x\naxis_p = x\n\
             d_eff_pm_per_V = 1\nlambda_min_nm = 300\nlambda_max_nm = 3000\n",
        )
        .unwrap()
        .remove(0)
    }

    #[test]
    fn builtin_ppktp() {
        let db = builtin_materials();
        let r = find_material(&db, "PPKTP-800-typeII").unwrap();
        assert_eq!(index_at(r, 800e-9, Field::Signal).unwrap(), 1.844);
        assert_eq!(index_at(r, 800e-9, Field::Idler).unwrap(), 1.757);
        assert_eq!(index_at(r, 400e-9, Field::Pump).unwrap(), 1.964);
        assert!((r.d_eff - 2.4e-12).abs() < 1e-24);
        assert!(index_at(r, 810e-9, Field::Signal).is_err());
        assert!(index_at(r, 800e-9, Field::Pump).is_err());
    }

    #[test]
    fn ktp_sellmeier_matches_hand_evaluation() {
        let db = builtin_materials();
        let r = find_material(&db, "KTP-Fan").unwrap();
        assert!((index_at(r, 800e-9, Field::Idler).unwrap() - 1.757_193_091_273_787).abs() < 1e-12);
        assert!((index_at(r, 800e-9, Field::Signal).unwrap() - 1.845_463_018_469_309).abs() < 1e-12);
        assert!((index_at(r, 400e-9, Field::Pump).unwrap() - 1.967_749_115_151_322).abs() < 1e-12);
    }

    #[test]
    fn constant_sellmeier() {
        let r = constant_record();
        for lam in [300e-9, 500e-9, 1.55e-6, 3e-6] {
            assert_eq!(index_at(&r, lam, Field::Signal).unwrap(), 1.5);
        }
    }

    #[test]
    fn empty_file_is_empty_db() {
        assert!(parse_material_db("").unwrap().is_empty());
    }

    #[test]
    fn rejects_bad_files() {
        let base = "[m]\ntype = fixed\nn_s = 1.5\nn_i = 1.5\nn_p = 1.6\nd_eff_pm_per_V = 1\nlambda_min_nm = 700\nlambda_max_nm = 900\n";
        assert!(parse_material_db(base).is_ok());
        let typo = base.replace("n_p =", "np =");
        assert!(matches!(parse_material_db(&typo), Err(Error::Parse { line: 5, .. })));
        let dup = format!("{base}{base}");
        assert!(matches!(parse_material_db(&dup), Err(Error::Parse { line: 9, .. })));
        assert!(parse_material_db(&base.replace("1.6", "0.5")).is_err());
        let pole = "[p]\ntype = sellmeier\nsellmeier_x = 2, 0, 1, 0.36\naxis_s = x\naxis_i = x\naxis_p = x\n\
                    d_eff_pm_per_V = 1\nlambda_min_nm = 400\nlambda_max_nm = 900\n";
        assert!(parse_material_db(pole).is_err());
        let below_one = "[p]\ntype = sellmeier\nsellmeier_x = 0.5, 0\naxis_s = x\naxis_i = x\naxis_p = x\n\
                         d_eff_pm_per_V = 1\nlambda_min_nm = 400\nlambda_max_nm = 900\n";
        assert!(parse_material_db(below_one).is_err());
    }

    #[test]
    fn serialize_round_trip() {
        let db = builtin_materials();
        let text = serialize_material_db(&db);
        let again = parse_material_db(&text).unwrap();
        assert_eq!(again, db);
        assert_eq!(serialize_material_db(&again), text);
    }

    proptest! {
        // Ordinary dispersion alone exceeds 1e-6 per 0.01 nm in the blue, so
        // the fixed threshold is checked in the red and a jump test runs everywhere.
        #[test]
        fn ktp_has_no_jumps(lam_nm in 400.0f64..1599.98) {
            let db = builtin_materials();
            let r = find_material(&db, "KTP-Fan").unwrap();
            for f in [Field::Signal, Field::Idler, Field::Pump] {
                let n0 = index_at(r, lam_nm * 1e-9, f).unwrap();
                let n1 = index_at(r, (lam_nm + 0.01) * 1e-9, f).unwrap();
                let n2 = index_at(r, (lam_nm + 0.02) * 1e-9, f).unwrap();
                prop_assert!(((n2 - n1) - (n1 - n0)).abs() < 1e-8);
            }
        }

        #[test]
        fn ktp_is_continuous(lam_nm in 760.0f64..1599.99) {
            let db = builtin_materials();
            let r = find_material(&db, "KTP-Fan").unwrap();
            for f in [Field::Signal, Field::Idler] {
                let a = index_at(r, lam_nm * 1e-9, f).unwrap();
                let b = index_at(r, (lam_nm + 0.01) * 1e-9, f).unwrap();
                prop_assert!((a - b).abs() < 1e-6);
                prop_assert!(a >= 1.0);
            }
        }
    }
}
