//! Physical constants, lab units, and the per-field quantities every other
//! module is built on. Everything is stored in SI.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{ensure, Error, Result};

/// Speed of light in vacuum (m/s).
pub const C: f64 = 299_792_458.0;
/// Vacuum permittivity (F/m).
pub const EPSILON_0: f64 = 8.854_187_812_8e-12;
/// Reduced Planck constant (J s).
pub const HBAR: f64 = 1.054_571_817e-34;

const ENERGY_TOL: f64 = 1e-9;

/// What a unit measures. Used to reject e.g. `lambda_s = 3 mW`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Dimension {
    Length,
    Nonlinearity,
    Power,
    AngularFrequency,
    Dimensionless,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Unit {
    Nanometre,
    Micrometre,
    Millimetre,
    Centimetre,
    Metre,
    PicometrePerVolt,
    MetrePerVolt,
    Milliwatt,
    Watt,
    /// Ordinary frequencies; converted to angular frequency on the way in.
    Hertz,
    Kilohertz,
    Megahertz,
    Gigahertz,
    RadPerSecond,
    One,
}

impl Unit {
    // (multiplier, divisor); dividing by exact powers of ten keeps
    // `800 nm` equal to the literal 8e-7.
    fn factors(self) -> (f64, f64) {
        match self {
            Unit::Nanometre => (1.0, 1e9),
            Unit::Micrometre => (1.0, 1e6),
            Unit::Millimetre => (1.0, 1e3),
            Unit::Centimetre => (1.0, 1e2),
            Unit::PicometrePerVolt => (1.0, 1e12),
            Unit::Milliwatt => (1.0, 1e3),
            Unit::Hertz => (2.0 * PI, 1.0),
            Unit::Kilohertz => (2.0 * PI * 1e3, 1.0),
            Unit::Megahertz => (2.0 * PI * 1e6, 1.0),
            Unit::Gigahertz => (2.0 * PI * 1e9, 1.0),
            Unit::Metre | Unit::MetrePerVolt | Unit::Watt | Unit::RadPerSecond | Unit::One => (1.0, 1.0),
        }
    }

    pub fn dimension(self) -> Dimension {
        match self {
            Unit::Nanometre | Unit::Micrometre | Unit::Millimetre | Unit::Centimetre | Unit::Metre => Dimension::Length,
            Unit::PicometrePerVolt | Unit::MetrePerVolt => Dimension::Nonlinearity,
            Unit::Milliwatt | Unit::Watt => Dimension::Power,
            Unit::Hertz | Unit::Kilohertz | Unit::Megahertz | Unit::Gigahertz | Unit::RadPerSecond => {
                Dimension::AngularFrequency
            }
            Unit::One => Dimension::Dimensionless,
        }
    }

    pub fn to_si(self, value: f64) -> f64 {
        let (m, d) = self.factors();
        value * m / d
    }

    pub fn from_si(self, value: f64) -> f64 {
        let (m, d) = self.factors();
        value * d / m
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Unit::Nanometre => "nm",
            Unit::Micrometre => "um",
            Unit::Millimetre => "mm",
            Unit::Centimetre => "cm",
            Unit::Metre => "m",
            Unit::PicometrePerVolt => "pm/V",
            Unit::MetrePerVolt => "m/V",
            Unit::Milliwatt => "mW",
            Unit::Watt => "W",
            Unit::Hertz => "Hz",
            Unit::Kilohertz => "kHz",
            Unit::Megahertz => "MHz",
            Unit::Gigahertz => "GHz",
            Unit::RadPerSecond => "rad/s",
            Unit::One => "1",
        }
    }
}

impl FromStr for Unit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim() {
            "nm" => Unit::Nanometre,
            "um" | "µm" | "μm" => Unit::Micrometre,
            "mm" => Unit::Millimetre,
            "cm" => Unit::Centimetre,
            "m" => Unit::Metre,
            "pm/V" => Unit::PicometrePerVolt,
            "m/V" => Unit::MetrePerVolt,
            "mW" => Unit::Milliwatt,
            "W" => Unit::Watt,
            "Hz" => Unit::Hertz,
            "kHz" => Unit::Kilohertz,
            "MHz" => Unit::Megahertz,
            "GHz" => Unit::Gigahertz,
            "rad/s" => Unit::RadPerSecond,
            other => return Err(Error::UnknownUnit(other.to_string())),
        })
    }
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// Convert `value` given in `unit` (e.g. `"pm/V"`) to SI.
///
/// ```
/// use spdc_core::quantities::to_si;
/// assert_eq!(to_si(800.0, "nm").unwrap(), 8e-7);
/// assert!((to_si(1.0, "MHz").unwrap() - 2.0 * std::f64::consts::PI * 1e6).abs() < 1e-6);
/// ```
pub fn to_si(value: f64, unit: &str) -> Result<f64> {
    Ok(unit.parse::<Unit>()?.to_si(value))
}

/// Parse `"800 nm"` into an SI value and its dimension. A bare number is
/// dimensionless.
pub fn parse_quantity(text: &str) -> Result<(f64, Dimension)> {
    let text = text.trim();
    let split = text
        .char_indices()
        .find(|&(i, c)| c.is_whitespace() || (i > 0 && c.is_alphabetic() && !is_exponent(text, i)))
        .map(|(i, _)| i)
        .unwrap_or(text.len());
    let (num, unit) = text.split_at(split);
    let value: f64 = num.trim().parse().map_err(|_| Error::invalid(format!("`{text}` is not a number with a unit")))?;
    let unit = unit.trim();
    if unit.is_empty() {
        return Ok((value, Dimension::Dimensionless));
    }
    let u: Unit = unit.parse()?;
    Ok((u.to_si(value), u.dimension()))
}

// `1e-3` must not be split at the `e`.
fn is_exponent(text: &str, i: usize) -> bool {
    let b = text.as_bytes();
    (b[i] == b'e' || b[i] == b'E')
        && b[..i].last().is_some_and(|c| c.is_ascii_digit() || *c == b'.')
        && b.get(i + 1).is_some_and(|c| c.is_ascii_digit() || *c == b'-' || *c == b'+')
}

/// A monochromatic field: vacuum wavelength and the index it sees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OpticalWave {
    vacuum_wavelength: f64,
    refractive_index: f64,
    angular_frequency: f64,
    wavenumber: f64,
}

impl OpticalWave {
    pub fn new(vacuum_wavelength: f64, refractive_index: f64) -> Result<Self> {
        ensure(vacuum_wavelength.is_finite() && vacuum_wavelength > 0.0, || {
            format!("wavelength must be positive, got {vacuum_wavelength}")
        })?;
        ensure(refractive_index.is_finite() && refractive_index >= 1.0, || {
            format!("refractive index must be >= 1, got {refractive_index}")
        })?;
        let angular_frequency = 2.0 * PI * C / vacuum_wavelength;
        Ok(OpticalWave {
            vacuum_wavelength,
            refractive_index,
            angular_frequency,
            wavenumber: refractive_index * angular_frequency / C,
        })
    }

    pub fn vacuum_wavelength(&self) -> f64 {
        self.vacuum_wavelength
    }
    pub fn refractive_index(&self) -> f64 {
        self.refractive_index
    }
    pub fn angular_frequency(&self) -> f64 {
        self.angular_frequency
    }
    pub fn wavenumber(&self) -> f64 {
        self.wavenumber
    }
}

/// Pump, signal and idler. `degenerate` means the signal and idler are the
/// same field (type-0/I SHG geometry), not merely equal in frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WaveTriple {
    pump: OpticalWave,
    signal: OpticalWave,
    idler: OpticalWave,
    degenerate: bool,
}

impl WaveTriple {
    pub fn new(pump: OpticalWave, signal: OpticalWave, idler: OpticalWave) -> Result<Self> {
        let wp = pump.angular_frequency;
        let sum = signal.angular_frequency + idler.angular_frequency;
        ensure(((wp - sum) / wp).abs() <= ENERGY_TOL, || {
            format!("energy not conserved: omega_p = {wp:e}, omega_s + omega_i = {sum:e}")
        })?;
        Ok(WaveTriple { pump, signal, idler, degenerate: false })
    }

    /// Signal and idler are one field; pump index given separately.
    pub fn degenerate(pump: OpticalWave, signal: OpticalWave) -> Result<Self> {
        let mut w = Self::new(pump, signal, signal)?;
        w.degenerate = true;
        Ok(w)
    }

    /// Build from signal/idler wavelengths; the pump wavelength follows from
    /// energy conservation.
    pub fn from_signal_idler(lambda_s: f64, n_s: f64, lambda_i: f64, n_i: f64, n_p: f64) -> Result<Self> {
        let signal = OpticalWave::new(lambda_s, n_s)?;
        let idler = OpticalWave::new(lambda_i, n_i)?;
        let pump = OpticalWave::new(pump_wavelength(lambda_s, lambda_i), n_p)?;
        Self::new(pump, signal, idler)
    }

    pub fn pump(&self) -> &OpticalWave {
        &self.pump
    }
    pub fn signal(&self) -> &OpticalWave {
        &self.signal
    }
    pub fn idler(&self) -> &OpticalWave {
        &self.idler
    }
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    /// k₊ = k_p + k_s + k_i.
    pub fn k_plus(&self) -> f64 {
        self.pump.wavenumber + self.signal.wavenumber + self.idler.wavenumber
    }

    /// k₋ = k_p − k_s − k_i (material mismatch before poling).
    pub fn k_minus(&self) -> f64 {
        self.pump.wavenumber - self.signal.wavenumber - self.idler.wavenumber
    }

    pub fn wavenumber_ratio(&self) -> f64 {
        self.k_minus() / self.k_plus()
    }

    /// Same wavelengths with a new pump index.
    pub fn with_pump_index(&self, n_p: f64) -> Result<Self> {
        let pump = OpticalWave::new(self.pump.vacuum_wavelength, n_p)?;
        let mut w = Self::new(pump, self.signal, self.idler)?;
        w.degenerate = self.degenerate;
        Ok(w)
    }

    /// Signal and idler relabeled.
    pub fn swapped(&self) -> Self {
        WaveTriple { signal: self.idler, idler: self.signal, ..*self }
    }
}

pub fn pump_wavelength(lambda_s: f64, lambda_i: f64) -> f64 {
    1.0 / (1.0 / lambda_s + 1.0 / lambda_i)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrystalSpec {
    length: f64,
    poling_period: Option<f64>,
    d_eff: f64,
    material_name: String,
}

impl CrystalSpec {
    pub fn new(length: f64, poling_period: Option<f64>, d_eff: f64, material_name: impl Into<String>) -> Result<Self> {
        ensure(length.is_finite() && length > 0.0, || format!("crystal length must be positive, got {length}"))?;
        ensure(d_eff.is_finite() && d_eff > 0.0, || format!("d_eff must be positive, got {d_eff}"))?;
        if let Some(p) = poling_period {
            ensure(p.is_finite() && p > 0.0, || format!("poling period must be positive, got {p}"))?;
        }
        Ok(CrystalSpec { length, poling_period, d_eff, material_name: material_name.into() })
    }

    pub fn length(&self) -> f64 {
        self.length
    }
    pub fn poling_period(&self) -> Option<f64> {
        self.poling_period
    }
    pub fn d_eff(&self) -> f64 {
        self.d_eff
    }
    pub fn material_name(&self) -> &str {
        &self.material_name
    }

    /// Q = 2π/Λ, zero when unpoled.
    pub fn qpm_wavenumber(&self) -> f64 {
        self.poling_period.map_or(0.0, |p| 2.0 * PI / p)
    }

    pub fn with_poling_period(&self, poling_period: Option<f64>) -> Result<Self> {
        Self::new(self.length, poling_period, self.d_eff, self.material_name.clone())
    }

    pub fn with_d_eff(&self, d_eff: f64) -> Result<Self> {
        Self::new(self.length, self.poling_period, d_eff, self.material_name.clone())
    }
}

/// Poling period that leaves a residual mismatch κ = Δk·L.
pub fn solve_poling_period(waves: &WaveTriple, length: f64, kappa: f64) -> Result<f64> {
    let q = waves.k_minus() - kappa / length;
    ensure(q > 0.0, || {
        format!("no positive poling period gives kappa = {kappa} (k_p - k_s - k_i - kappa/L = {q:e} 1/m)")
    })?;
    Ok(2.0 * PI / q)
}

/// Which collected arm a singles rate or heralding efficiency refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Arm {
    Signal,
    Idler,
}

/// Dimensionless focusing geometry, plus the physical Rayleigh range it came from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FocusParams {
    pub rayleigh_range: f64,
    pub kappa: f64,
    pub zeta_r: f64,
    pub r_k: f64,
}

impl FocusParams {
    pub fn new(rayleigh_range: f64, kappa: f64, zeta_r: f64, r_k: f64) -> Result<Self> {
        ensure(zeta_r.is_finite() && zeta_r > 0.0, || format!("zeta_R must be positive, got {zeta_r}"))?;
        ensure(r_k.abs() < 1.0, || format!("|R_k| must be < 1, got {r_k}"))?;
        ensure(kappa.is_finite(), || "kappa must be finite".into())?;
        ensure(rayleigh_range.is_finite() && rayleigh_range > 0.0, || {
            format!("Rayleigh range must be positive, got {rayleigh_range}")
        })?;
        Ok(FocusParams { rayleigh_range, kappa, zeta_r, r_k })
    }

    /// Dimensionless groups only; the Rayleigh range is set to ζ_R·L.
    pub fn dimensionless(kappa: f64, zeta_r: f64, r_k: f64, length: f64) -> Result<Self> {
        Self::new(zeta_r * length, kappa, zeta_r, r_k)
    }
}

/// κ = (k_p − k_s − k_i − Q)L, ζ_R = z_R/L, R_k = k₋/k₊.
pub fn derive_focus_params(waves: &WaveTriple, crystal: &CrystalSpec, z_r: f64) -> Result<FocusParams> {
    ensure(z_r.is_finite() && z_r > 0.0, || format!("z_R must be positive, got {z_r}"))?;
    let l = crystal.length();
    let kappa = (waves.k_minus() - crystal.qpm_wavenumber()) * l;
    FocusParams::new(z_r, kappa, z_r / l, waves.wavenumber_ratio())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ppktp() -> WaveTriple {
        WaveTriple::from_signal_idler(800e-9, 1.844, 800e-9, 1.757, 1.964).unwrap()
    }

    #[test]
    fn ppktp_wavenumber_ratio() {
        let r = ppktp().wavenumber_ratio();
        assert!((r - 0.04).abs() < 0.005, "{r}");
        assert!((r - 0.043_432).abs() < 1e-5, "{r}");
    }

    #[test]
    fn perfect_qpm_gives_zero_kappa() {
        let w = ppktp();
        let period = solve_poling_period(&w, 0.01, 0.0).unwrap();
        let c = CrystalSpec::new(0.01, Some(period), 2.4e-12, "t").unwrap();
        let fp = derive_focus_params(&w, &c, 0.01).unwrap();
        assert!(fp.kappa.abs() < 1e-6);
        assert_eq!(fp.zeta_r, 1.0);
    }

    #[test]
    fn unit_spot_values() {
        assert_eq!(to_si(2.4, "pm/V").unwrap(), 2.4e-12);
        assert_eq!(to_si(800.0, "nm").unwrap(), 8e-7);
        assert!((to_si(1.0, "MHz").unwrap() / (2.0 * PI * 1e6) - 1.0).abs() < 1e-15);
        assert!(matches!(to_si(1.0, "furlong"), Err(Error::UnknownUnit(_))));
    }

    #[test]
    fn quantity_parsing() {
        assert_eq!(parse_quantity("800 nm").unwrap(), (8e-7, Dimension::Length));
        assert_eq!(parse_quantity("2.4pm/V").unwrap(), (2.4e-12, Dimension::Nonlinearity));
        assert_eq!(parse_quantity("1e-3 W").unwrap(), (1e-3, Dimension::Power));
        assert_eq!(parse_quantity("1e-3").unwrap(), (1e-3, Dimension::Dimensionless));
        assert_eq!(parse_quantity("-3.0").unwrap(), (-3.0, Dimension::Dimensionless));
        assert!(parse_quantity("abc nm").is_err());
        assert!(parse_quantity("1 parsec").is_err());
    }

    #[test]
    fn energy_conservation_enforced() {
        let p = OpticalWave::new(400e-9, 1.9).unwrap();
        let s = OpticalWave::new(800e-9, 1.8).unwrap();
        let i = OpticalWave::new(801e-9, 1.8).unwrap();
        assert!(WaveTriple::new(p, s, i).is_err());
        assert!(WaveTriple::new(p, s, s).is_ok());
        let d = WaveTriple::degenerate(p, s).unwrap();
        assert!(d.is_degenerate());
        assert_eq!(d.signal(), d.idler());
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(OpticalWave::new(-1.0, 1.5).is_err());
        assert!(OpticalWave::new(1e-6, 0.9).is_err());
        assert!(CrystalSpec::new(0.0, None, 1e-12, "x").is_err());
        assert!(CrystalSpec::new(1e-2, Some(-1.0), 1e-12, "x").is_err());
        let c = CrystalSpec::new(1e-2, None, 1e-12, "x").unwrap();
        assert!(derive_focus_params(&ppktp(), &c, 0.0).is_err());
    }

    const UNITS: [Unit; 14] = [
        Unit::Nanometre,
        Unit::Micrometre,
        Unit::Millimetre,
        Unit::Centimetre,
        Unit::Metre,
        Unit::PicometrePerVolt,
        Unit::MetrePerVolt,
        Unit::Milliwatt,
        Unit::Watt,
        Unit::Hertz,
        Unit::Kilohertz,
        Unit::Megahertz,
        Unit::Gigahertz,
        Unit::RadPerSecond,
    ];

    proptest! {
        #[test]
        fn unit_round_trip(v in -1e6f64..1e6, idx in 0usize..14) {
            let u = UNITS[idx];
            let back = u.from_si(u.to_si(v));
            prop_assert!((back - v).abs() <= 1e-12 * v.abs().max(1e-300));
            prop_assert_eq!(u.symbol().parse::<Unit>().unwrap(), u);
        }

        #[test]
        fn doubling_length_scales_kappa_and_zeta(l in 1e-3f64..5e-2, zr in 1e-4f64..1e-1, kappa in -10.0f64..2.0) {
            let w = ppktp();
            let p1 = solve_poling_period(&w, l, kappa).unwrap();
            let c1 = CrystalSpec::new(l, Some(p1), 2.4e-12, "t").unwrap();
            let c2 = CrystalSpec::new(2.0 * l, Some(p1), 2.4e-12, "t").unwrap();
            let f1 = derive_focus_params(&w, &c1, zr).unwrap();
            let f2 = derive_focus_params(&w, &c2, zr).unwrap();
            prop_assert!((f2.kappa - 2.0 * f1.kappa).abs() <= 1e-6 * (1.0 + f1.kappa.abs()));
            prop_assert!((f2.zeta_r - 0.5 * f1.zeta_r).abs() <= 1e-12 * f1.zeta_r);
        }

        #[test]
        fn wave_derived_fields_consistent(lambda in 2e-7f64..5e-6, n in 1.0f64..4.0) {
            let w = OpticalWave::new(lambda, n).unwrap();
            prop_assert!((w.angular_frequency() * lambda / (2.0 * PI * C) - 1.0).abs() < 1e-15);
            prop_assert!((w.wavenumber() * C / (n * w.angular_frequency()) - 1.0).abs() < 1e-15);
        }
    }
}
