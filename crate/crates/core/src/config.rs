//! Run configuration: one source design per file, every physical value with
//! an explicit unit.
//!
//! ```text
//! name = ppktp_800_typeII
//! material = PPKTP-800-typeII     # or n_s / n_i / n_p with d_eff
//! lambda_s = 800 nm
//! lambda_i = 800 nm
//! length = 1 cm
//! kappa = -3.484                  # or poling_period = 8.3 um, or auto_qpm = true
//! zeta_R = 0.178                  # or z_R = 1.78 mm
//! pump_power = 1 mW
//! filter_s = lorentzian 2 MHz     # or unfiltered, or table path/to/file.txt
//! filter_i = lorentzian 2 MHz
//! ```
//!
//! Optional keys: `d_eff`, `degenerate`, `material_db`,
//! `phase_matching_bandwidth`, `format`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::filters::{load_filter_table, FilterSpec};
use crate::materials::{builtin_materials, find_material, index_at, load_material_db, Field, MaterialRecord};
use crate::quantities::{parse_quantity, solve_poling_period, CrystalSpec, Dimension, OpticalWave, WaveTriple};
use crate::source::SourceConfig;
use crate::textfmt;

const KEYS: [&str; 20] = [
    "name",
    "material",
    "material_db",
    "n_s",
    "n_i",
    "n_p",
    "d_eff",
    "lambda_s",
    "lambda_i",
    "degenerate",
    "length",
    "poling_period",
    "auto_qpm",
    "kappa",
    "z_R",
    "zeta_R",
    "pump_power",
    "filter_s",
    "filter_i",
    "phase_matching_bandwidth",
];
const FORMAT_KEY: &str = "format";

pub const BUNDLED: [(&str, &str); 1] = [("ppktp_800_typeII", include_str!("../configs/ppktp_800_typeII.cfg"))];

/// Text of a configuration shipped with the library.
pub fn bundled_config(name: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum OutputFormat {
    Table,
    Csv,
    Ndjson,
}

impl FromStr for OutputFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "table" => Ok(OutputFormat::Table),
            "csv" => Ok(OutputFormat::Csv),
            "ndjson" => Ok(OutputFormat::Ndjson),
            other => Err(Error::invalid(format!("unknown output format `{other}` (table, csv, ndjson)"))),
        }
    }
}

impl fmt::Display for OutputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OutputFormat::Table => "table",
            OutputFormat::Csv => "csv",
            OutputFormat::Ndjson => "ndjson",
        })
    }
}

/// How the poling period was fixed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Poling {
    Period(f64),
    /// Solved for κ = 0.
    AutoQpm,
    /// Solved for the given residual mismatch.
    Kappa(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub source: SourceConfig,
    pub poling: Poling,
    pub format: Option<OutputFormat>,
}

struct Reader<'a> {
    entries: BTreeMap<&'a str, &'a textfmt::Entry>,
    errors: Vec<String>,
}

impl<'a> Reader<'a> {
    fn fail(&mut self, key: &str, msg: impl fmt::Display) {
        match self.entries.get(key) {
            Some(e) => self.errors.push(format!("line {}: {key}: {msg}", e.line)),
            None => self.errors.push(format!("{key}: {msg}")),
        }
    }

    fn has(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    fn text(&self, key: &str) -> Option<&'a str> {
        self.entries.get(key).map(|e| e.value.as_str())
    }

    fn quantity(&mut self, key: &str, dim: Dimension) -> Option<f64> {
        let text = self.text(key)?;
        match parse_quantity(text) {
            Ok((v, d)) if d == dim => Some(v),
            Ok((_, Dimension::Dimensionless)) if dim != Dimension::Dimensionless => {
                self.fail(key, format!("`{text}` needs a unit ({dim:?})"));
                None
            }
            Ok((_, d)) => {
                self.fail(key, format!("expected a {dim:?} value, got {d:?} `{text}`"));
                None
            }
            Err(e) => {
                self.fail(key, e);
                None
            }
        }
    }

    fn required(&mut self, key: &str, dim: Dimension) -> Option<f64> {
        if !self.has(key) {
            self.fail(key, "missing");
            return None;
        }
        self.quantity(key, dim)
    }

    fn flag(&mut self, key: &str) -> bool {
        match self.text(key) {
            None | Some("false") => false,
            Some("true") => true,
            Some(other) => {
                self.fail(key, format!("expected true or false, got `{other}`"));
                false
            }
        }
    }
}

fn parse_filter(text: &str, base: Option<&Path>) -> Result<FilterSpec> {
    let text = text.trim();
    if text == "unfiltered" {
        return Ok(FilterSpec::Unfiltered);
    }
    if let Some(rest) = text.strip_prefix("lorentzian") {
        let (g, dim) = parse_quantity(rest)?;
        if dim != Dimension::AngularFrequency {
            return Err(Error::invalid(format!("Lorentzian width `{}` needs a frequency unit", rest.trim())));
        }
        return FilterSpec::lorentzian(g);
    }
    if let Some(rest) = text.strip_prefix("table") {
        let p = PathBuf::from(rest.trim());
        let p = match base {
            Some(b) if p.is_relative() => b.join(p),
            _ => p,
        };
        return load_filter_table(p);
    }
    Err(Error::invalid(format!("filter `{text}`: expected `lorentzian <width>`, `unfiltered` or `table <path>`")))
}

/// Parse a configuration. Relative paths resolve against `base_dir`;
/// `auto_qpm` is the command-line switch and counts as a poling choice.
/// Every problem found is reported at once in [`Error::Config`].
///
/// ```
/// use spdc_core::config::{bundled_config, parse_run_config};
/// let cfg = parse_run_config(bundled_config("ppktp_800_typeII").unwrap(), None, false).unwrap();
/// assert_eq!(cfg.source.waves.signal().refractive_index(), 1.844);
/// ```
pub fn parse_run_config(text: &str, base_dir: Option<&Path>, auto_qpm: bool) -> Result<RunConfig> {
    let sections = textfmt::parse(text)?;
    let mut errors = Vec::new();
    if let Some(s) = sections.iter().find(|s| s.name.is_some()) {
        errors.push(format!("line {}: sections are not used in run configurations", s.line));
    }
    let empty = textfmt::Section { name: None, line: 0, entries: Vec::new() };
    let top = sections.iter().find(|s| s.name.is_none()).unwrap_or(&empty);
    for e in &top.entries {
        if !KEYS.contains(&e.key.as_str()) && e.key != FORMAT_KEY {
            errors.push(format!("line {}: unknown key `{}`", e.line, e.key));
        }
    }
    let mut r = Reader { entries: top.entries.iter().map(|e| (e.key.as_str(), e)).collect(), errors };

    let name = r.text("name").unwrap_or("config").to_string();
    let format = r.text(FORMAT_KEY).and_then(|f| match f.parse::<OutputFormat>() {
        Ok(v) => Some(v),
        Err(e) => {
            r.fail(FORMAT_KEY, e);
            None
        }
    });

    let lambda_s = r.required("lambda_s", Dimension::Length);
    let lambda_i = r.required("lambda_i", Dimension::Length);
    let length = r.required("length", Dimension::Length);
    let pump_power = r.required("pump_power", Dimension::Power);
    let degenerate = r.flag("degenerate");
    let d_eff_given = r.quantity("d_eff", Dimension::Nonlinearity);

    // Indices: a material record or all three inline.
    let inline = ["n_s", "n_i", "n_p"].iter().filter(|k| r.has(k)).count();
    let mut record: Option<MaterialRecord> = None;
    match (r.text("material"), inline) {
        (Some(_), n) if n > 0 => r.fail("material", "give either `material` or inline n_s/n_i/n_p, not both"),
        (None, 0) => r.fail("material", "missing (or give n_s, n_i, n_p)"),
        (None, 1 | 2) => r.fail("n_s", "inline indices need all of n_s, n_i, n_p"),
        (Some(m), _) => {
            let db = match r.text("material_db") {
                Some(p) => {
                    let p = base_dir.map(|b| b.join(p)).unwrap_or_else(|| PathBuf::from(p));
                    load_material_db(p).map(|mut v| {
                        v.extend(builtin_materials());
                        v
                    })
                }
                None => Ok(builtin_materials()),
            };
            match db.and_then(|db| find_material(&db, m).cloned()) {
                Ok(rec) => record = Some(rec),
                Err(e) => r.fail("material", e),
            }
        }
        _ => {}
    }
    if record.is_none() && inline == 3 && d_eff_given.is_none() && !r.has("d_eff") {
        r.fail("d_eff", "required with inline indices");
    }
    let indices = match (&record, lambda_s, lambda_i) {
        (Some(rec), Some(ls), Some(li)) => {
            let lp = crate::quantities::pump_wavelength(ls, li);
            let got = [(ls, Field::Signal), (li, Field::Idler), (lp, Field::Pump)].map(|(l, f)| index_at(rec, l, f));
            match got {
                [Ok(a), Ok(b), Ok(c)] => Some((a, b, c)),
                other => {
                    for e in other.into_iter().filter_map(|x| x.err()) {
                        r.fail("material", e);
                    }
                    None
                }
            }
        }
        (None, _, _) if inline == 3 => {
            let n_s = r.quantity("n_s", Dimension::Dimensionless);
            let n_i = r.quantity("n_i", Dimension::Dimensionless);
            let n_p = r.quantity("n_p", Dimension::Dimensionless);
            n_s.zip(n_i).zip(n_p).map(|((a, b), c)| (a, b, c))
        }
        _ => None,
    };
    let d_eff = d_eff_given.or(record.as_ref().map(|r| r.d_eff));

    let waves = match (lambda_s, lambda_i, indices) {
        (Some(ls), Some(li), Some((n_s, n_i, n_p))) => {
            let built = if degenerate {
                if ls != li || n_s != n_i {
                    Err(Error::invalid("degenerate = true needs equal signal and idler wavelengths and indices"))
                } else {
                    let lp = crate::quantities::pump_wavelength(ls, li);
                    OpticalWave::new(lp, n_p)
                        .and_then(|p| OpticalWave::new(ls, n_s).and_then(|s| WaveTriple::degenerate(p, s)))
                }
            } else {
                WaveTriple::from_signal_idler(ls, n_s, li, n_i, n_p)
            };
            match built {
                Ok(w) => Some(w),
                Err(e) => {
                    r.fail("lambda_s", e);
                    None
                }
            }
        }
        _ => None,
    };

    let explicit = [r.has("poling_period"), r.flag("auto_qpm"), r.has("kappa")];
    let given = explicit.iter().filter(|b| **b).count() + usize::from(auto_qpm);
    let poling = if given != 1 {
        r.fail(
            "poling_period",
            format!("exactly one of poling_period, auto_qpm, kappa (or --auto-qpm) is required, found {given}"),
        );
        None
    } else if auto_qpm || explicit[1] {
        Some(Poling::AutoQpm)
    } else if explicit[0] {
        r.quantity("poling_period", Dimension::Length).map(Poling::Period)
    } else {
        r.quantity("kappa", Dimension::Dimensionless).map(Poling::Kappa)
    };

    let z_r = match (r.has("z_R"), r.has("zeta_R")) {
        (true, false) => r.quantity("z_R", Dimension::Length),
        (false, true) => r.quantity("zeta_R", Dimension::Dimensionless).zip(length).map(|(z, l)| z * l),
        _ => {
            r.fail("z_R", "exactly one of z_R and zeta_R is required");
            None
        }
    };

    let mut filter = |key: &str| -> Option<FilterSpec> {
        match r.text(key) {
            None => {
                r.fail(key, "missing");
                None
            }
            Some(t) => match parse_filter(t, base_dir) {
                Ok(f) => Some(f),
                Err(e) => {
                    r.fail(key, e);
                    None
                }
            },
        }
    };
    let filter_signal = filter("filter_s");
    let filter_idler = filter("filter_i");
    let pmb = r.quantity("phase_matching_bandwidth", Dimension::AngularFrequency);

    let crystal = match (length, d_eff, waves, poling) {
        (Some(l), Some(d), Some(w), Some(p)) => {
            let period = match p {
                Poling::Period(v) => Ok(v),
                Poling::AutoQpm => solve_poling_period(&w, l, 0.0),
                Poling::Kappa(k) => solve_poling_period(&w, l, k),
            };
            let name = record.as_ref().map(|r| r.name.clone()).unwrap_or_else(|| "inline".into());
            match period.and_then(|p| CrystalSpec::new(l, Some(p), d, &name)) {
                Ok(c) => Some(c),
                Err(e) => {
                    r.fail("length", e);
                    None
                }
            }
        }
        _ => None,
    };

    if !r.errors.is_empty() {
        return Err(Error::Config(r.errors));
    }
    // Everything below was checked above.
    let (Some(waves), Some(crystal), Some(rayleigh_range), Some(pump_power), Some(fs), Some(fi), Some(poling)) =
        (waves, crystal, z_r, pump_power, filter_signal, filter_idler, poling)
    else {
        return Err(Error::Config(vec!["incomplete configuration".into()]));
    };
    let source = SourceConfig {
        name,
        waves,
        crystal,
        rayleigh_range,
        pump_power,
        filter_signal: fs,
        filter_idler: fi,
        phase_matching_bandwidth: pmb,
    };
    Ok(RunConfig { source, poling, format })
}

/// Read and parse a configuration file; relative paths inside it resolve
/// against its directory.
pub fn load_run_config(path: impl AsRef<Path>, auto_qpm: bool) -> Result<RunConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_run_config(&text, path.parent(), auto_qpm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    const INLINE: &str = "\
lambda_s = 810 nm
lambda_i = 790 nm
n_s = 1.84
n_i = 1.76
n_p = 1.96
d_eff = 2.4 pm/V
length = 10 mm
auto_qpm = true
z_R = 1.8 mm
pump_power = 2 mW
filter_s = lorentzian 1 MHz
filter_i = unfiltered
";

    #[test]
    fn bundled_parses() {
        let cfg = parse_run_config(bundled_config("ppktp_800_typeII").unwrap(), None, false).unwrap();
        let s = &cfg.source;
        assert_eq!(s.crystal.length(), 0.01);
        assert_eq!(s.crystal.d_eff(), 2.4e-12);
        assert_eq!(s.pump_power, 1e-3);
        assert!((s.rayleigh_range - 0.17808e-2).abs() < 1e-15);
        assert!((s.focus_params().unwrap().kappa + 3.484).abs() < 1e-9);
        assert!(!s.waves.is_degenerate());
        assert_eq!(cfg.poling, Poling::Kappa(-3.484));
    }

    #[test]
    fn inline_indices_and_auto_qpm() {
        let cfg = parse_run_config(INLINE, None, false).unwrap();
        assert_eq!(cfg.poling, Poling::AutoQpm);
        assert!(cfg.source.focus_params().unwrap().kappa.abs() < 1e-9);
        assert_eq!(cfg.source.filter_signal, FilterSpec::Lorentzian { gamma: 2.0 * PI * 1e6 });
        assert_eq!(cfg.source.filter_idler, FilterSpec::Unfiltered);
        // The command-line switch counts as a second poling choice here.
        assert!(parse_run_config(INLINE, None, true).is_err());
        let without = INLINE.replace("auto_qpm = true\n", "");
        assert!(parse_run_config(&without, None, true).is_ok());
        assert!(parse_run_config(&without, None, false).is_err());
    }

    #[test]
    fn all_errors_reported_together() {
        let bad = "\
lambda_s = 3 mW
lambda_i = 800
length = 1 cm
material = nope
z_R = 1 mm
zeta_R = 0.1
pump_power = 1 mW
filter_s = gaussian 1 MHz
filter_i = lorentzian 1 nm
colour = red
";
        let Err(Error::Config(list)) = parse_run_config(bad, None, false) else { panic!("expected config error") };
        let joined = list.join("\n");
        for needle in [
            "line 1: lambda_s",
            "line 2: lambda_i",
            "line 4: material",
            "z_R",
            "filter_s",
            "line 9: filter_i",
            "colour",
            "poling_period",
        ] {
            assert!(joined.contains(needle), "{needle} missing from\n{joined}");
        }
        assert!(list.len() >= 8);
    }

    #[test]
    fn material_out_of_range() {
        let text = bundled_config("ppktp_800_typeII").unwrap().replace("lambda_i = 800 nm", "lambda_i = 1550 nm");
        let Err(Error::Config(list)) = parse_run_config(&text, None, false) else { panic!() };
        assert!(list.iter().any(|e| e.contains("outside")));
    }

    #[test]
    fn sellmeier_material() {
        let text = INLINE
            .replace("n_s = 1.84\nn_i = 1.76\nn_p = 1.96\nd_eff = 2.4 pm/V\n", "material = KTP-Fan\n")
            .replace("810 nm", "1550 nm")
            .replace("790 nm", "1550 nm");
        let cfg = parse_run_config(&text, None, false).unwrap();
        let w = cfg.source.waves;
        assert!(w.signal().refractive_index() > 1.7 && w.signal().refractive_index() < 1.9);
        assert!(w.signal().refractive_index() != w.idler().refractive_index());
    }

    #[test]
    fn degenerate_flag() {
        let text = INLINE.replace("790 nm", "810 nm").replace("n_i = 1.76", "n_i = 1.84") + "degenerate = true\n";
        let cfg = parse_run_config(&text, None, false).unwrap();
        assert!(cfg.source.waves.is_degenerate());
        let text = INLINE.to_string() + "degenerate = true\n";
        assert!(parse_run_config(&text, None, false).is_err());
    }

    #[test]
    fn format_key() {
        let cfg = parse_run_config(&(INLINE.to_string() + "format = csv\n"), None, false).unwrap();
        assert_eq!(cfg.format, Some(OutputFormat::Csv));
        assert!(parse_run_config(&(INLINE.to_string() + "format = xml\n"), None, false).is_err());
    }
}
