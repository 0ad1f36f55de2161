//! Analytic field envelopes, pulse sequences, and the piecewise-constant
//! override channel used for optimized THz fields.
//!
//! The THz channel couples through the permanent dipole (−μ₀·cosθ·E). The
//! nonresonant laser channel is cycle-averaged and couples through the
//! polarizability anisotropy as −(Δα/4)·E_env²·cos²θ, so sequences report the
//! squared envelope rather than a carrier-resolved field.

use crate::error::{Result, RotorError};
use crate::units;

/// FWHM of a Gaussian divided by its σ: 2·sqrt(2·ln 2).
pub const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949_3;

/// Guess-pulse peak intensity in W/cm² (20 TW/cm²).
pub const GUESS_INTENSITY_WCM2: f64 = 20.0e12;

pub fn fwhm_to_sigma(fwhm: f64) -> f64 {
    fwhm / FWHM_PER_SIGMA
}

pub fn sigma_to_fwhm(sigma: f64) -> f64 {
    sigma * FWHM_PER_SIGMA
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PulseShape {
    /// Gaussian THz envelope with net area, coupling to the dipole.
    GaussianThz,
    /// Half-cycle pulse; same Gaussian envelope, separate name because the
    /// scenarios distinguish it from shaped guess fields.
    Hcp,
    /// Normalized Gaussian derivative: one positive and one negative lobe,
    /// exactly zero time-integrated area.
    SingleCycle,
    /// Nonresonant laser intensity envelope (contributes E² only).
    LaserKick,
}

impl PulseShape {
    pub fn is_thz(self) -> bool {
        !matches!(self, PulseShape::LaserKick)
    }
}

/// One analytically parameterized pulse. `peak` is a field amplitude in
/// atomic units (for laser kicks: the peak envelope field, whose square sets
/// the intensity scale); `center` and `width` (Gaussian σ) are in atomic
/// units of time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseSpec {
    pub shape: PulseShape,
    pub peak: f64,
    pub center: f64,
    pub width: f64,
}

impl PulseSpec {
    pub fn new(shape: PulseShape, peak: f64, center: f64, width: f64) -> Result<Self> {
        if !(peak >= 0.0) {
            return Err(RotorError::InvalidInput(format!(
                "pulse peak must be nonnegative, got {peak}"
            )));
        }
        if !(width > 0.0) {
            return Err(RotorError::InvalidInput(format!(
                "pulse width must be positive, got {width}"
            )));
        }
        Ok(Self {
            shape,
            peak,
            center,
            width,
        })
    }

    pub fn fwhm(&self) -> f64 {
        sigma_to_fwhm(self.width)
    }

    /// THz field contribution at time `t` (zero for laser kicks).
    fn thz_field(&self, t: f64) -> f64 {
        let u = (t - self.center) / self.width;
        match self.shape {
            PulseShape::GaussianThz | PulseShape::Hcp => self.peak * (-0.5 * u * u).exp(),
            PulseShape::SingleCycle => self.peak * (-u) * (-0.5 * u * u + 0.5).exp(),
            PulseShape::LaserKick => 0.0,
        }
    }

    /// Squared laser envelope at time `t` (zero for THz shapes).
    fn laser_envelope_sq(&self, t: f64) -> f64 {
        match self.shape {
            PulseShape::LaserKick => {
                let u = (t - self.center) / self.width;
                let e = self.peak * (-0.5 * u * u).exp();
                e * e
            }
            _ => 0.0,
        }
    }
}

/// Piecewise-constant THz samples on a uniform grid; sample `i` applies on
/// [t_start + i·dt, t_start + (i+1)·dt). Outside the window the override
/// contributes zero field.
#[derive(Debug, Clone, PartialEq)]
pub struct OverrideField {
    pub t_start: f64,
    pub dt: f64,
    pub samples: Vec<f64>,
}

impl OverrideField {
    pub fn new(t_start: f64, dt: f64, samples: Vec<f64>) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(RotorError::InvalidInput(format!(
                "override sample spacing must be positive, got {dt}"
            )));
        }
        if samples.is_empty() {
            return Err(RotorError::InvalidInput(
                "override field needs at least one sample".to_string(),
            ));
        }
        Ok(Self {
            t_start,
            dt,
            samples,
        })
    }

    pub fn sample_at(&self, t: f64) -> f64 {
        let idx = ((t - self.t_start) / self.dt).floor();
        if idx < 0.0 || idx >= self.samples.len() as f64 {
            0.0
        } else {
            self.samples[idx as usize]
        }
    }
}

/// Ordered list of pulses plus the optional override channel. When the
/// override is present it replaces the analytic THz channel entirely; laser
/// kicks still apply.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PulseSequence {
    pub pulses: Vec<PulseSpec>,
    pub override_field: Option<OverrideField>,
}

impl PulseSequence {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn new(pulses: Vec<PulseSpec>) -> Self {
        Self {
            pulses,
            override_field: None,
        }
    }

    pub fn with_override(mut self, field: OverrideField) -> Self {
        self.override_field = Some(field);
        self
    }

    /// True if any laser kick with nonzero amplitude is present (these need
    /// the molecule's polarizability anisotropy).
    pub fn needs_polarizability(&self) -> bool {
        self.pulses
            .iter()
            .any(|p| p.shape == PulseShape::LaserKick && p.peak > 0.0)
    }

    /// (THz field, squared laser envelope) at time `t`, both in atomic units.
    pub fn field_at(&self, t: f64) -> (f64, f64) {
        let e_thz = match &self.override_field {
            Some(ov) => ov.sample_at(t),
            None => self
                .pulses
                .iter()
                .filter(|p| p.shape.is_thz())
                .map(|p| p.thz_field(t))
                .sum(),
        };
        let i_env = self.pulses.iter().map(|p| p.laser_envelope_sq(t)).sum();
        (e_thz, i_env)
    }
}

/// The default guess for field optimization: a Gaussian THz pulse centered
/// at T_per/5 with σ = π/(50·B) and a 20 TW/cm² peak.
pub fn default_guess_pulse(t_per: f64, b: f64) -> Result<PulseSpec> {
    if !(b > 0.0) {
        return Err(RotorError::InvalidInput(format!(
            "rotational constant must be positive, got {b}"
        )));
    }
    if !(t_per > 0.0) {
        return Err(RotorError::InvalidInput(format!(
            "rotational period must be positive, got {t_per}"
        )));
    }
    let peak = units::intensity_to_field(GUESS_INTENSITY_WCM2)?;
    PulseSpec::new(
        PulseShape::GaussianThz,
        peak,
        t_per / 5.0,
        std::f64::consts::PI / (50.0 * b),
    )
}

/// Laser kick followed by a THz kick delayed by exactly T_per/4.
///
/// The laser is centered 4σ after the window start so its envelope is
/// numerically contained; all times and amplitudes are atomic units.
pub fn bipulse_sequence(
    t_per: f64,
    laser_intensity_wcm2: f64,
    laser_fwhm: f64,
    kick_shape: PulseShape,
    kick_peak: f64,
    kick_fwhm: f64,
) -> Result<PulseSequence> {
    if !(t_per > 0.0) {
        return Err(RotorError::InvalidInput(format!(
            "rotational period must be positive, got {t_per}"
        )));
    }
    if !kick_shape.is_thz() {
        return Err(RotorError::InvalidInput(
            "the second pulse of a bipulse must be a THz shape".to_string(),
        ));
    }
    let laser_sigma = fwhm_to_sigma(laser_fwhm);
    let laser_peak = units::intensity_to_field(laser_intensity_wcm2)?;
    let laser = PulseSpec::new(PulseShape::LaserKick, laser_peak, 4.0 * laser_sigma, laser_sigma)?;
    let kick = PulseSpec::new(
        kick_shape,
        kick_peak,
        laser.center + t_per / 4.0,
        fwhm_to_sigma(kick_fwhm),
    )?;
    Ok(PulseSequence::new(vec![laser, kick]))
}

/// Replace the single THz kick of a bipulse with a train of kicks spaced by
/// half a rotational period (the spacing is recovered from the stored
/// laser-to-kick delay of T_per/4), one amplitude per kick.
pub fn hcp_train_sequence(
    base: &PulseSequence,
    n_kicks: usize,
    amplitudes: &[f64],
) -> Result<PulseSequence> {
    if n_kicks == 0 {
        return Err(RotorError::InvalidInput(
            "a kick train needs at least one kick".to_string(),
        ));
    }
    if amplitudes.len() != n_kicks {
        return Err(RotorError::InvalidInput(format!(
            "expected {} amplitudes, got {}",
            n_kicks,
            amplitudes.len()
        )));
    }
    let laser = base
        .pulses
        .iter()
        .find(|p| p.shape == PulseShape::LaserKick)
        .ok_or_else(|| {
            RotorError::InvalidInput("base sequence has no laser kick".to_string())
        })?;
    let template = base
        .pulses
        .iter()
        .find(|p| p.shape.is_thz())
        .ok_or_else(|| {
            RotorError::InvalidInput("base sequence has no THz kick".to_string())
        })?;
    let delay = template.center - laser.center;
    if !(delay > 0.0) {
        return Err(RotorError::InvalidInput(
            "THz kick must follow the laser kick".to_string(),
        ));
    }
    let spacing = 2.0 * delay; // delay is T_per/4, kicks repeat every T_per/2
    let mut pulses = vec![*laser];
    for (n, &amp) in amplitudes.iter().enumerate() {
        pulses.push(PulseSpec::new(
            template.shape,
            amp,
            template.center + n as f64 * spacing,
            template.width,
        )?);
    }
    Ok(PulseSequence::new(pulses))
}
