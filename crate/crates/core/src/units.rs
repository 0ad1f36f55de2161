//! Conversions between spectroscopic/experimental units and the internal
//! atomic-unit system (ħ = 1), plus the molecular parameter set.
//!
//! Conversion factors are CODATA-2018 values pinned as named constants; the
//! digits quoted below are the ones tests rely on. Inverse conversions are
//! defined as exact reciprocals so round trips reproduce inputs to machine
//! precision.

use crate::basis::RotorKind;
use crate::error::{Result, RotorError};

/// Hartree expressed in cm⁻¹.
pub const HARTREE_IN_CM1: f64 = 219_474.631_363_2;
/// cm⁻¹ → hartree.
pub const CM1_TO_HARTREE: f64 = 1.0 / HARTREE_IN_CM1;
/// Atomic unit of electric dipole moment expressed in Debye.
pub const AU_DIPOLE_IN_DEBYE: f64 = 2.541_746_473;
/// Debye → e·a₀.
pub const DEBYE_TO_AU: f64 = 1.0 / AU_DIPOLE_IN_DEBYE;
/// Atomic unit of electric field strength in V/m.
pub const AU_FIELD_IN_VM: f64 = 5.142_206_747_63e11;
/// Atomic unit of time in seconds.
pub const AU_TIME_IN_S: f64 = 2.418_884_326_585_7e-17;
/// Femtoseconds → atomic units of time.
pub const FS_TO_AU: f64 = 1.0e-15 / AU_TIME_IN_S;
/// Picoseconds → atomic units of time.
pub const PS_TO_AU: f64 = 1.0e-12 / AU_TIME_IN_S;
/// Boltzmann constant in hartree/K.
pub const KB_HARTREE_PER_K: f64 = 3.166_811_563_455_6e-6;
/// Vacuum permittivity in F/m.
pub const VACUUM_PERMITTIVITY: f64 = 8.854_187_812_8e-12;
/// Speed of light in m/s (exact).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Bohr radius in Å.
pub const BOHR_IN_ANGSTROM: f64 = 0.529_177_210_903;
/// Å³ → a₀³ (polarizability volume).
pub const ANGSTROM3_TO_AU: f64 =
    1.0 / (BOHR_IN_ANGSTROM * BOHR_IN_ANGSTROM * BOHR_IN_ANGSTROM);

/// Convert an energy from cm⁻¹ to hartree.
pub fn wavenumber_to_au(x: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(RotorError::InvalidInput(format!(
            "wavenumber must be nonnegative, got {x}"
        )));
    }
    Ok(x * CM1_TO_HARTREE)
}

/// Convert an energy from hartree to cm⁻¹.
pub fn au_to_wavenumber(x: f64) -> f64 {
    x * HARTREE_IN_CM1
}

/// Convert a dipole moment from Debye to e·a₀.
pub fn debye_to_au(d: f64) -> Result<f64> {
    if !(d >= 0.0) {
        return Err(RotorError::InvalidInput(format!(
            "dipole must be nonnegative, got {d}"
        )));
    }
    Ok(d * DEBYE_TO_AU)
}

/// Convert a dipole moment from e·a₀ to Debye.
pub fn au_to_debye(d: f64) -> f64 {
    d * AU_DIPOLE_IN_DEBYE
}

/// Peak electric-field amplitude (atomic units) of a plane wave of the given
/// intensity in W/cm²: E = sqrt(2 I / (ε₀ c)).
pub fn intensity_to_field(intensity_wcm2: f64) -> Result<f64> {
    if !(intensity_wcm2 >= 0.0) {
        return Err(RotorError::InvalidInput(format!(
            "intensity must be nonnegative, got {intensity_wcm2}"
        )));
    }
    let intensity_wm2 = intensity_wcm2 * 1.0e4;
    let field_vm = (2.0 * intensity_wm2 / (VACUUM_PERMITTIVITY * SPEED_OF_LIGHT)).sqrt();
    Ok(field_vm / AU_FIELD_IN_VM)
}

/// Convert an electric-field amplitude from V/m to atomic units.
pub fn field_vm_to_au(e_vm: f64) -> Result<f64> {
    if !(e_vm >= 0.0) {
        return Err(RotorError::InvalidInput(format!(
            "field amplitude must be nonnegative, got {e_vm}"
        )));
    }
    Ok(e_vm / AU_FIELD_IN_VM)
}

/// Convert an electric field from atomic units to V/m.
pub fn field_au_to_vm(e_au: f64) -> f64 {
    e_au * AU_FIELD_IN_VM
}

/// Convert a duration from femtoseconds to atomic units of time.
pub fn fs_to_au(t_fs: f64) -> f64 {
    t_fs * FS_TO_AU
}

/// Convert a duration from atomic units of time to femtoseconds.
pub fn au_to_fs(t_au: f64) -> f64 {
    t_au / FS_TO_AU
}

/// Thermal energy k_B·T in hartree.
pub fn kelvin_to_hartree(t_kelvin: f64) -> Result<f64> {
    if !(t_kelvin >= 0.0) {
        return Err(RotorError::InvalidInput(format!(
            "temperature must be nonnegative, got {t_kelvin}"
        )));
    }
    Ok(t_kelvin * KB_HARTREE_PER_K)
}

/// Rotational period π/B of a linear rotor with rotational constant `b`
/// (atomic units of energy).
pub fn rotational_period(b: f64) -> Result<f64> {
    if !(b > 0.0) {
        return Err(RotorError::InvalidInput(format!(
            "rotational constant must be positive, got {b}"
        )));
    }
    Ok(std::f64::consts::PI / b)
}

/// Molecular constants in atomic units.
///
/// `b` is the rotational constant, `a` the axial constant (symmetric tops
/// only), `mu0` the permanent dipole along the symmetry axis, and `dalpha`
/// the polarizability anisotropy α∥ − α⊥ needed for nonresonant laser kicks.
#[derive(Debug, Clone, PartialEq)]
pub struct MoleculeParams {
    pub name: String,
    pub kind: RotorKind,
    pub b: f64,
    pub a: Option<f64>,
    pub mu0: f64,
    pub dalpha: Option<f64>,
}

impl MoleculeParams {
    pub fn linear(name: impl Into<String>, b: f64, mu0: f64) -> Result<Self> {
        Self::validate_common(b, mu0)?;
        Ok(Self {
            name: name.into(),
            kind: RotorKind::Linear,
            b,
            a: None,
            mu0,
            dalpha: None,
        })
    }

    pub fn symmetric_top(name: impl Into<String>, b: f64, a: f64, mu0: f64) -> Result<Self> {
        Self::validate_common(b, mu0)?;
        if !(a > 0.0) {
            return Err(RotorError::InvalidInput(format!(
                "axial constant A must be positive, got {a}"
            )));
        }
        Ok(Self {
            name: name.into(),
            kind: RotorKind::SymmetricTop,
            b,
            a: Some(a),
            mu0,
            dalpha: None,
        })
    }

    pub fn with_dalpha(mut self, dalpha: f64) -> Result<Self> {
        if !(dalpha >= 0.0) {
            return Err(RotorError::InvalidInput(format!(
                "polarizability anisotropy must be nonnegative, got {dalpha}"
            )));
        }
        self.dalpha = Some(dalpha);
        Ok(self)
    }

    fn validate_common(b: f64, mu0: f64) -> Result<()> {
        if !(b > 0.0) {
            return Err(RotorError::InvalidInput(format!(
                "rotational constant B must be positive, got {b}"
            )));
        }
        if !(mu0 >= 0.0) {
            return Err(RotorError::InvalidInput(format!(
                "permanent dipole must be nonnegative, got {mu0}"
            )));
        }
        Ok(())
    }

    /// Rotational period π/B.
    pub fn rotational_period(&self) -> f64 {
        std::f64::consts::PI / self.b
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_rel(x: f64, want: f64, tol: f64) {
        assert!(
            (x - want).abs() <= tol * want.abs().max(1e-300),
            "got {x}, want {want} (rel tol {tol})"
        );
    }

    #[test]
    fn wavenumber_conversion() {
        assert_eq!(wavenumber_to_au(0.0).unwrap(), 0.0);
        // CO rotational constant
        assert_rel(wavenumber_to_au(1.9313).unwrap(), 8.7996e-6, 1e-4);
        // one hartree worth of wavenumbers
        assert_rel(wavenumber_to_au(219_474.63).unwrap(), 1.0, 1e-7);
        assert!(wavenumber_to_au(-1.0).is_err());
    }

    #[test]
    fn dipole_conversion() {
        assert_eq!(debye_to_au(0.0).unwrap(), 0.0);
        assert_rel(debye_to_au(0.112).unwrap(), 0.044064, 1e-4);
        assert_rel(debye_to_au(2.5417).unwrap(), 1.0, 2e-5);
        assert!(debye_to_au(-0.1).is_err());
    }

    #[test]
    fn intensity_conversion() {
        assert_eq!(intensity_to_field(0.0).unwrap(), 0.0);
        // 20 TW/cm² in V/m and in atomic units
        let e_au = intensity_to_field(20.0e12).unwrap();
        assert_rel(field_au_to_vm(e_au), 1.227e10, 1e-3);
        assert_rel(e_au, 0.02387, 1e-3);
        assert_rel(field_vm_to_au(1.0e8).unwrap(), 1.9447e-4, 1e-4);
        assert!(intensity_to_field(-1.0).is_err());
    }

    #[test]
    fn intensity_sqrt_scaling_is_exact() {
        for &i in &[1.0, 3.7, 20.0e12, 5.5e13] {
            assert_eq!(
                intensity_to_field(4.0 * i).unwrap(),
                2.0 * intensity_to_field(i).unwrap()
            );
        }
    }

    #[test]
    fn rotational_period_values() {
        assert_rel(rotational_period(1.0).unwrap(), std::f64::consts::PI, 1e-15);
        assert_rel(rotational_period(std::f64::consts::PI).unwrap(), 1.0, 1e-15);
        // CO: π/B in seconds equals 1/(2 B~ c) with B~ in cm⁻¹
        let b = wavenumber_to_au(1.9313).unwrap();
        let t_s = rotational_period(b).unwrap() * AU_TIME_IN_S;
        let oracle = 1.0 / (2.0 * 1.9313 * SPEED_OF_LIGHT * 100.0);
        assert_rel(t_s, oracle, 1e-9);
        assert_rel(t_s, 8.64e-12, 1e-3);
        assert!(rotational_period(0.0).is_err());
        assert!(rotational_period(-1.0).is_err());
    }

    #[test]
    fn round_trips() {
        for &x in &[1.9313, 0.112, 3.5e-4, 42.0] {
            assert_rel(au_to_wavenumber(wavenumber_to_au(x).unwrap()), x, 1e-12);
            assert_rel(au_to_debye(debye_to_au(x).unwrap()), x, 1e-12);
            assert_rel(field_au_to_vm(field_vm_to_au(x).unwrap()), x, 1e-12);
            assert_rel(au_to_fs(fs_to_au(x)), x, 1e-12);
        }
    }

    #[test]
    fn molecule_params_validation() {
        assert!(MoleculeParams::linear("CO", 8.8e-6, 0.044).is_ok());
        assert!(MoleculeParams::linear("bad", -1.0, 0.044).is_err());
        assert!(MoleculeParams::linear("bad", 8.8e-6, -0.044).is_err());
        assert!(MoleculeParams::symmetric_top("CH3I", 1.1e-6, 2.4e-5, 0.64).is_ok());
        assert!(MoleculeParams::symmetric_top("bad", 1.1e-6, 0.0, 0.64).is_err());
        let p = MoleculeParams::linear("CO", 8.8e-6, 0.044).unwrap();
        assert!(p.clone().with_dalpha(3.6).is_ok());
        assert!(p.with_dalpha(-0.1).is_err());
    }

    #[test]
    fn kelvin_conversion() {
        assert_eq!(kelvin_to_hartree(0.0).unwrap(), 0.0);
        assert_rel(kelvin_to_hartree(1.0).unwrap(), 3.1668115e-6, 1e-6);
        assert!(kelvin_to_hartree(-5.0).is_err());
    }
}
