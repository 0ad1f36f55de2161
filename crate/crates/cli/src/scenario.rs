//! Command dispatch: build domain objects from the resolved configuration,
//! run the library, write CSV artifacts and the run manifest.

use std::path::{Path, PathBuf};

use rotor_core::basis::{RotorBasis, RotorKind};
use rotor_core::dynamics::{
    boltzmann_ensemble_with_spin_weights, free_evolve, propagate, propagate_ensemble, RotorState,
    TimeGrid, Trajectory,
};
use rotor_core::oct::{optimize, OctError, OctProblem, OctResult};
use rotor_core::pulses::{
    bipulse_sequence, hcp_train_sequence, default_guess_pulse, OverrideField, PulseSequence,
    PulseShape, PulseSpec,
};
use rotor_core::targets::{classical_scan, expectations, target_state, angular_density};
use rotor_core::units;
use rotor_core::units::MoleculeParams;

use crate::config::{Config, Resolver};
use crate::csvio::{fmt_e12, write_rows};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Config(String),
    Numeric(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Numeric(m) => write!(f, "numeric error: {m}"),
        }
    }
}

fn config_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

fn numeric_err(e: impl std::fmt::Display) -> CliError {
    CliError::Numeric(e.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    ClassicalScan,
    TargetScan,
    TargetState,
    FreeEvolve,
    Optimize,
    Bipulse,
    Train,
    Propagate,
}

impl Command {
    pub fn parse(name: &str) -> Result<Self, CliError> {
        match name {
            "classical-scan" => Ok(Self::ClassicalScan),
            "target-scan" => Ok(Self::TargetScan),
            "target-state" => Ok(Self::TargetState),
            "free-evolve" => Ok(Self::FreeEvolve),
            "optimize" => Ok(Self::Optimize),
            "bipulse" => Ok(Self::Bipulse),
            "train" => Ok(Self::Train),
            "propagate" => Ok(Self::Propagate),
            other => Err(CliError::Usage(format!("unknown command '{other}'"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::ClassicalScan => "classical-scan",
            Self::TargetScan => "target-scan",
            Self::TargetState => "target-state",
            Self::FreeEvolve => "free-evolve",
            Self::Optimize => "optimize",
            Self::Bipulse => "bipulse",
            Self::Train => "train",
            Self::Propagate => "propagate",
        }
    }
}

pub fn execute(
    command: Command,
    cfg: &Config,
    field_file: Option<&str>,
) -> Result<Vec<PathBuf>, CliError> {
    let resolver = Resolver::new(cfg);
    let prefix = resolver
        .require_str("output", "prefix")
        .map_err(config_err)?;
    if let Some(parent) = Path::new(&prefix).parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .map_err(|e| config_err(format!("cannot create output directory: {e}")))?;
        }
    }
    match command {
        Command::ClassicalScan => run_classical_scan(&resolver, &prefix),
        Command::TargetScan => run_target_scan(&resolver, &prefix),
        Command::TargetState => run_target_state(&resolver, &prefix),
        Command::FreeEvolve => run_free_evolve(&resolver, &prefix),
        Command::Optimize => run_optimize(&resolver, &prefix),
        Command::Bipulse => run_kicked_ensemble(&resolver, &prefix, false),
        Command::Train => run_kicked_ensemble(&resolver, &prefix, true),
        Command::Propagate => run_propagate(&resolver, &prefix, field_file),
    }
}

fn out_path(prefix: &str, suffix: &str) -> PathBuf {
    PathBuf::from(format!("{prefix}.{suffix}"))
}

fn write_manifest(
    prefix: &str,
    command: Command,
    resolver: &Resolver,
    notes: &[String],
) -> Result<PathBuf, CliError> {
    let path = out_path(prefix, "manifest.ini");
    let mut text = String::new();
    text.push_str("# rotorctl run manifest: resolved configuration\n");
    text.push_str("# re-run with `rotorctl <command> --config <this file>` to reproduce\n");
    text.push_str(&format!("# command: {}\n", command.name()));
    for note in notes {
        text.push_str(&format!("# resolved: {note}\n"));
    }
    let mut current = String::new();
    for (section, key, value) in resolver.manifest_entries() {
        if section != current {
            text.push_str(&format!("\n[{section}]\n"));
            current = section.clone();
        }
        text.push_str(&format!("{key} = {value}\n"));
    }
    std::fs::write(&path, text)
        .map_err(|e| config_err(format!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}

/// Molecular constants from the `[molecule]` section; exactly one unit
/// variant per constant may be present.
fn molecule_from(resolver: &Resolver, need_mu0: bool) -> Result<MoleculeParams, CliError> {
    let kind = resolver
        .require_str("molecule", "kind")
        .map_err(config_err)?;
    let name = resolver
        .str_value("molecule", "name")
        .unwrap_or_else(|| "molecule".to_string());

    let pick = |cm1_key: &str, au_key: &str| -> Result<Option<f64>, CliError> {
        let cm1 = resolver.f64_value("molecule", cm1_key).map_err(config_err)?;
        let au = resolver.f64_value("molecule", au_key).map_err(config_err)?;
        match (cm1, au) {
            (Some(_), Some(_)) => Err(config_err(format!(
                "[molecule] declares both {cm1_key} and {au_key}"
            ))),
            (Some(x), None) => Ok(Some(units::wavenumber_to_au(x).map_err(config_err)?)),
            (None, Some(x)) => Ok(Some(x)),
            (None, None) => Ok(None),
        }
    };

    let b = pick("B_cm1", "B_au")?
        .ok_or_else(|| config_err("[molecule] needs B_cm1 or B_au"))?;
    let mu0 = {
        let d = resolver.f64_value("molecule", "mu0_D").map_err(config_err)?;
        let au = resolver.f64_value("molecule", "mu0_au").map_err(config_err)?;
        match (d, au) {
            (Some(_), Some(_)) => {
                return Err(config_err("[molecule] declares both mu0_D and mu0_au"))
            }
            (Some(x), None) => Some(units::debye_to_au(x).map_err(config_err)?),
            (None, Some(x)) => Some(x),
            (None, None) => None,
        }
    };
    if need_mu0 && mu0.is_none() {
        return Err(config_err(
            "[molecule] needs mu0_D or mu0_au for this command",
        ));
    }
    let mu0 = mu0.unwrap_or(0.0);

    let mut params = match kind.as_str() {
        "linear" => MoleculeParams::linear(name, b, mu0).map_err(config_err)?,
        "symmetric-top" => {
            let a = pick("A_cm1", "A_au")?.ok_or_else(|| {
                config_err("[molecule] needs A_cm1 or A_au for a symmetric top")
            })?;
            MoleculeParams::symmetric_top(name, b, a, mu0).map_err(config_err)?
        }
        other => {
            return Err(config_err(format!(
                "[molecule].kind must be 'linear' or 'symmetric-top', got '{other}'"
            )))
        }
    };
    let dalpha = {
        let au = resolver
            .f64_value("molecule", "dalpha_au")
            .map_err(config_err)?;
        let a3 = resolver
            .f64_value("molecule", "dalpha_A3")
            .map_err(config_err)?;
        match (au, a3) {
            (Some(_), Some(_)) => {
                return Err(config_err(
                    "[molecule] declares both dalpha_au and dalpha_A3",
                ))
            }
            (Some(x), None) => Some(x),
            (None, Some(x)) => Some(x * units::ANGSTROM3_TO_AU),
            (None, None) => None,
        }
    };
    if let Some(d) = dalpha {
        params = params.with_dalpha(d).map_err(config_err)?;
    }
    Ok(params)
}

fn scan_a_grid(resolver: &Resolver) -> Result<Vec<f64>, CliError> {
    let a_min = resolver.require_f64("scan", "a_min").map_err(config_err)?;
    let a_max = resolver.require_f64("scan", "a_max").map_err(config_err)?;
    let a_step = resolver.require_f64("scan", "a_step").map_err(config_err)?;
    if !(a_step > 0.0) || a_max < a_min {
        return Err(config_err("[scan] needs a_max >= a_min and a_step > 0"));
    }
    let n = ((a_max - a_min) / a_step + 1e-9).floor() as usize + 1;
    Ok((0..n).map(|i| a_min + i as f64 * a_step).collect())
}

fn run_classical_scan(resolver: &Resolver, prefix: &str) -> Result<Vec<PathBuf>, CliError> {
    let grid = scan_a_grid(resolver)?;
    let rows = classical_scan(&grid).map_err(config_err)?;
    let csv = out_path(prefix, "csv");
    write_rows(
        &csv,
        "a,cos_theta,cos2_theta",
        rows.iter().map(|r| vec![r.a, r.cos_theta, r.cos2_theta]),
    )
    .map_err(CliError::Config)?;
    let manifest = write_manifest(prefix, Command::ClassicalScan, resolver, &[])?;
    Ok(vec![csv, manifest])
}

fn run_target_scan(resolver: &Resolver, prefix: &str) -> Result<Vec<PathBuf>, CliError> {
    let a_grid = scan_a_grid(resolver)?;
    let jmax_min = resolver.require_u32("scan", "jmax_min").map_err(config_err)?;
    let jmax_max = resolver.require_u32("scan", "jmax_max").map_err(config_err)?;
    if jmax_max < jmax_min {
        return Err(config_err("[scan] needs jmax_max >= jmax_min"));
    }
    let mut rows = Vec::new();
    for &a in &a_grid {
        for j_max in jmax_min..=jmax_max {
            let t = target_state(a, j_max).map_err(numeric_err)?;
            rows.push(vec![a, j_max as f64, t.lambda_max, t.cos_exp, t.cos2_exp]);
        }
    }
    let csv = out_path(prefix, "csv");
    write_rows(
        &csv,
        "a,j_max,lambda_max,cos_theta,cos2_theta",
        rows.into_iter(),
    )
    .map_err(CliError::Config)?;
    let manifest = write_manifest(prefix, Command::TargetScan, resolver, &[])?;
    Ok(vec![csv, manifest])
}

fn run_target_state(resolver: &Resolver, prefix: &str) -> Result<Vec<PathBuf>, CliError> {
    let a = resolver.require_f64("merit", "a").map_err(config_err)?;
    let j_max = resolver.require_u32("merit", "j_max").map_err(config_err)?;
    let theta_points = resolver
        .usize_or("density", "theta_points", 2001)
        .map_err(config_err)?;
    if theta_points < 2 {
        return Err(config_err("[density].theta_points must be at least 2"));
    }
    let t = target_state(a, j_max).map_err(numeric_err)?;

    let state_csv = out_path(prefix, "state.csv");
    write_rows(
        &state_csv,
        "j,coefficient",
        t.coefficients
            .iter()
            .enumerate()
            .map(|(j, &c)| vec![j as f64, c]),
    )
    .map_err(CliError::Config)?;

    let thetas: Vec<f64> = (0..theta_points)
        .map(|i| std::f64::consts::PI * i as f64 / (theta_points - 1) as f64)
        .collect();
    let density = angular_density(&t.to_state(), &thetas).map_err(numeric_err)?;
    let density_csv = out_path(prefix, "density.csv");
    write_rows(
        &density_csv,
        "theta_rad,density",
        thetas
            .iter()
            .zip(density.iter())
            .map(|(&th, &d)| vec![th, d]),
    )
    .map_err(CliError::Config)?;

    let notes = vec![
        format!("lambda_max = {}", fmt_e12(t.lambda_max)),
        format!("cos_theta = {}", fmt_e12(t.cos_exp)),
        format!("cos2_theta = {}", fmt_e12(t.cos2_exp)),
    ];
    let manifest = write_manifest(prefix, Command::TargetState, resolver, &notes)?;
    Ok(vec![state_csv, density_csv, manifest])
}

fn trajectory_csv(path: &Path, traj: &Trajectory) -> Result<(), CliError> {
    write_rows(
        path,
        "t_over_Tper,cos_theta,cos2_theta,norm",
        (0..traj.len()).map(|i| {
            vec![
                traj.t_over_tper[i],
                traj.cos_theta[i],
                traj.cos2_theta[i],
                traj.norm[i],
            ]
        }),
    )
    .map_err(CliError::Config)
}

fn run_free_evolve(resolver: &Resolver, prefix: &str) -> Result<Vec<PathBuf>, CliError> {
    let params = molecule_from(resolver, false)?;
    if params.kind != RotorKind::Linear {
        return Err(config_err("free-evolve targets are linear m = 0 states"));
    }
    let a = resolver.require_f64("merit", "a").map_err(config_err)?;
    let j_max = resolver.require_u32("merit", "j_max").map_err(config_err)?;
    let steps_per_period = resolver
        .usize_or("grid", "steps_per_period", 4096)
        .map_err(config_err)?;
    let periods = resolver.f64_or("grid", "periods", 2.0).map_err(config_err)?;

    let target = target_state(a, j_max).map_err(numeric_err)?;
    let state = target.to_state();
    let t_per = params.rotational_period();
    let grid =
        TimeGrid::from_period(t_per, periods, steps_per_period).map_err(config_err)?;

    let mut traj = Trajectory::default();
    for i in 0..=grid.steps() {
        let t = grid.point(i);
        let evolved = free_evolve(&state, &params, t).map_err(numeric_err)?;
        let (c, c2) = expectations(&evolved).map_err(numeric_err)?;
        traj.times.push(t);
        traj.t_over_tper.push(t / t_per);
        traj.cos_theta.push(c);
        traj.cos2_theta.push(c2);
        traj.norm.push(evolved.norm().powi(2));
    }
    let csv = out_path(prefix, "csv");
    trajectory_csv(&csv, &traj)?;
    let notes = vec![
        format!("B = {} hartree", fmt_e12(params.b)),
        format!("T_per = {} au", fmt_e12(t_per)),
    ];
    let manifest = write_manifest(prefix, Command::FreeEvolve, resolver, &notes)?;
    Ok(vec![csv, manifest])
}

fn run_optimize(resolver: &Resolver, prefix: &str) -> Result<Vec<PathBuf>, CliError> {
    let params = molecule_from(resolver, true)?;
    if params.kind != RotorKind::Linear {
        return Err(config_err("optimize supports linear molecules"));
    }
    let a = resolver.require_f64("merit", "a").map_err(config_err)?;
    let j_max = resolver.require_u32("merit", "j_max").map_err(config_err)?;
    let steps_per_period = resolver
        .usize_or("grid", "steps_per_period", 4096)
        .map_err(config_err)?;
    let traj_periods = resolver.f64_or("grid", "periods", 2.0).map_err(config_err)?;
    let j_cap = resolver.require_u32("grid", "j_cap").map_err(config_err)?;

    let horizon_periods = resolver
        .f64_or("oct", "horizon_periods", 1.0)
        .map_err(config_err)?;
    let penalty = resolver.f64_or("oct", "penalty", 0.0).map_err(config_err)?;
    let target_fidelity = resolver
        .f64_or("oct", "target_fidelity", 0.99)
        .map_err(config_err)?;
    let max_iterations = resolver
        .usize_or("oct", "max_iterations", 5000)
        .map_err(config_err)?;

    let t_per = params.rotational_period();
    let target = target_state(a, j_max).map_err(numeric_err)?;
    let steps = ((steps_per_period as f64) * horizon_periods).round() as usize;
    let mut problem = OctProblem::new(params.clone(), target)
        .map_err(config_err)?
        .with_horizon(horizon_periods * t_per)
        .map_err(config_err)?
        .with_steps(steps)
        .map_err(config_err)?
        .with_j_cap(j_cap)
        .map_err(config_err)?
        .with_penalty(penalty)
        .map_err(config_err)?
        .with_target_fidelity(target_fidelity)
        .map_err(config_err)?
        .with_max_iterations(max_iterations);

    if let Some(bound_vm) = resolver
        .f64_value("oct", "field_bound_Vm")
        .map_err(config_err)?
    {
        let bound = units::field_vm_to_au(bound_vm).map_err(config_err)?;
        problem = problem.with_field_bound(bound).map_err(config_err)?;
    }
    // custom guess pulse when any guess key is present
    let guess_keys_present = resolver.present("oct", "guess_intensity_TWcm2")
        || resolver.present("oct", "guess_center_periods")
        || resolver.present("oct", "guess_sigma_periods");
    if guess_keys_present {
        let intensity = resolver
            .f64_or("oct", "guess_intensity_TWcm2", 20.0)
            .map_err(config_err)?;
        let center = resolver
            .f64_or("oct", "guess_center_periods", 0.2)
            .map_err(config_err)?;
        let sigma = resolver
            .f64_or("oct", "guess_sigma_periods", 0.02)
            .map_err(config_err)?;
        let peak = units::intensity_to_field(intensity * 1.0e12).map_err(config_err)?;
        let guess = PulseSpec::new(PulseShape::GaussianThz, peak, center * t_per, sigma * t_per)
            .map_err(config_err)?;
        problem = problem.with_guess(guess);
    } else {
        problem = problem.with_guess(default_guess_pulse(t_per, params.b).map_err(config_err)?);
    }

    let (result, failure): (OctResult, Option<String>) = match optimize(&problem) {
        Ok(r) => (r, None),
        Err(OctError::Convergence { target, best }) => {
            let msg = format!(
                "optimization stalled at fidelity {:.6} after {} iterations (target {target}); best-so-far outputs written",
                best.fidelity, best.iterations
            );
            (best, Some(msg))
        }
        Err(OctError::Rotor(e)) => return Err(numeric_err(e)),
    };

    let dt = problem.dt();
    let field_csv = out_path(prefix, "field.csv");
    write_rows(
        &field_csv,
        "t_over_Tper,E_au,E_Vm",
        result.field.iter().enumerate().map(|(k, &e)| {
            vec![
                (k as f64 + 0.5) * dt / t_per,
                e,
                units::field_au_to_vm(e),
            ]
        }),
    )
    .map_err(CliError::Config)?;

    let fidelity_csv = out_path(prefix, "fidelity.csv");
    write_rows(
        &fidelity_csv,
        "iteration,fidelity",
        result
            .fidelity_history
            .iter()
            .enumerate()
            .map(|(i, &f)| vec![i as f64, f]),
    )
    .map_err(CliError::Config)?;

    // replay the optimized field and follow it with field-free evolution
    let seq = PulseSequence::empty().with_override(
        OverrideField::new(0.0, dt, result.field.clone()).map_err(config_err)?,
    );
    let basis = RotorBasis::linear(j_cap, 0).map_err(config_err)?;
    let psi0 = RotorState::basis_state(basis, 0).map_err(config_err)?;
    let n_steps = ((steps_per_period as f64) * traj_periods).round() as usize;
    let grid = TimeGrid::span(0.0, traj_periods * t_per, n_steps).map_err(config_err)?;
    let (_, traj) = propagate(&psi0, &params, &seq, &grid).map_err(numeric_err)?;
    let traj_csv = out_path(prefix, "csv");
    trajectory_csv(&traj_csv, &traj)?;

    let notes = vec![
        format!("B = {} hartree", fmt_e12(params.b)),
        format!("mu0 = {} au", fmt_e12(params.mu0)),
        format!("T_per = {} au", fmt_e12(t_per)),
        format!("fidelity = {}", fmt_e12(result.fidelity)),
        format!("iterations = {}", result.iterations),
    ];
    let manifest = write_manifest(prefix, Command::Optimize, resolver, &notes)?;
    if let Some(msg) = failure {
        return Err(CliError::Numeric(msg));
    }
    if result.fidelity < target_fidelity {
        return Err(CliError::Numeric(format!(
            "optimization stopped at fidelity {:.6} after {} iterations (target {target_fidelity}); outputs written",
            result.fidelity, result.iterations
        )));
    }
    Ok(vec![field_csv, fidelity_csv, traj_csv, manifest])
}

/// Shared body of `bipulse` and `train`.
fn run_kicked_ensemble(
    resolver: &Resolver,
    prefix: &str,
    with_train: bool,
) -> Result<Vec<PathBuf>, CliError> {
    let params = molecule_from(resolver, true)?;
    let temperature = resolver.require_f64("thermal", "T_K").map_err(config_err)?;
    let weight_tail = resolver
        .f64_or("thermal", "weight_tail", 1e-6)
        .map_err(config_err)?;
    let sw0 = resolver
        .f64_or("thermal", "spin_weight_kmod3_0", 1.0)
        .map_err(config_err)?;
    let sw1 = resolver
        .f64_or("thermal", "spin_weight_kmod3_other", 1.0)
        .map_err(config_err)?;
    let spin = if sw0 != 1.0 || sw1 != 1.0 {
        Some((sw0, sw1))
    } else {
        None
    };

    let steps_per_period = resolver
        .usize_or("grid", "steps_per_period", 4096)
        .map_err(config_err)?;
    let periods = resolver.f64_or("grid", "periods", 1.4).map_err(config_err)?;
    let j_cap = resolver.require_u32("grid", "j_cap").map_err(config_err)?;

    let laser_intensity = resolver
        .require_f64("laser", "intensity_TWcm2")
        .map_err(config_err)?;
    let laser_fwhm_fs = resolver.require_f64("laser", "fwhm_fs").map_err(config_err)?;
    if laser_intensity > 0.0 && params.dalpha.is_none() {
        return Err(config_err(
            "[molecule] needs dalpha_au or dalpha_A3 when the laser intensity is nonzero",
        ));
    }
    let kick_shape = match resolver.require_str("kick", "shape").map_err(config_err)?.as_str() {
        "hcp" => PulseShape::Hcp,
        "single-cycle" => PulseShape::SingleCycle,
        other => {
            return Err(config_err(format!(
                "[kick].shape must be 'hcp' or 'single-cycle', got '{other}'"
            )))
        }
    };
    let kick_peak_vm = resolver.require_f64("kick", "peak_Vm").map_err(config_err)?;
    let kick_fwhm_fs = resolver.require_f64("kick", "fwhm_fs").map_err(config_err)?;

    let t_per = params.rotational_period();
    let mut seq = bipulse_sequence(
        t_per,
        laser_intensity * 1.0e12,
        units::fs_to_au(laser_fwhm_fs),
        kick_shape,
        units::field_vm_to_au(kick_peak_vm).map_err(config_err)?,
        units::fs_to_au(kick_fwhm_fs),
    )
    .map_err(config_err)?;

    if with_train {
        let n_kicks = resolver.usize_or("train", "n_kicks", 1).map_err(config_err)?;
        let amplitudes_vm = resolver
            .f64_list("train", "amplitudes_Vm")
            .map_err(config_err)?
            .ok_or_else(|| config_err("missing required key [train].amplitudes_Vm"))?;
        let amplitudes: Vec<f64> = amplitudes_vm
            .iter()
            .map(|&v| units::field_vm_to_au(v))
            .collect::<Result<_, _>>()
            .map_err(config_err)?;
        seq = hcp_train_sequence(&seq, n_kicks, &amplitudes).map_err(config_err)?;
    }

    let ensemble =
        boltzmann_ensemble_with_spin_weights(&params, temperature, weight_tail, j_cap, spin)
            .map_err(numeric_err)?;
    let grid = TimeGrid::from_period(t_per, periods, steps_per_period).map_err(config_err)?;
    let (_, traj) = propagate_ensemble(&ensemble, &params, &seq, &grid).map_err(numeric_err)?;

    let csv = out_path(prefix, "csv");
    trajectory_csv(&csv, &traj)?;
    let command = if with_train {
        Command::Train
    } else {
        Command::Bipulse
    };
    let notes = vec![
        format!("B = {} hartree", fmt_e12(params.b)),
        format!("mu0 = {} au", fmt_e12(params.mu0)),
        format!("T_per = {} au", fmt_e12(t_per)),
        format!("ensemble members = {}", ensemble.members.len()),
        format!("kick center = {} au", fmt_e12(seq.pulses[1].center)),
    ];
    let manifest = write_manifest(prefix, command, resolver, &notes)?;
    Ok(vec![csv, manifest])
}

fn load_field_file(path: &str, t_per: f64) -> Result<OverrideField, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| config_err(format!("cannot read field file {path}: {e}")))?;
    let mut times = Vec::new();
    let mut samples = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 {
            if !line.starts_with("t_over_Tper") {
                return Err(config_err(format!(
                    "field file {path} lacks the t_over_Tper,E_au,E_Vm header"
                )));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let mut cols = line.split(',');
        let t: f64 = cols
            .next()
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| config_err(format!("field file line {}: bad time", i + 1)))?;
        let e: f64 = cols
            .next()
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| config_err(format!("field file line {}: bad field", i + 1)))?;
        times.push(t);
        samples.push(e);
    }
    if samples.len() < 2 {
        return Err(config_err(format!(
            "field file {path} needs at least two samples"
        )));
    }
    let dt = (times[1] - times[0]) * t_per;
    let t_start = (times[0] - (times[1] - times[0]) / 2.0) * t_per;
    OverrideField::new(t_start, dt, samples).map_err(config_err)
}

fn run_propagate(
    resolver: &Resolver,
    prefix: &str,
    field_file: Option<&str>,
) -> Result<Vec<PathBuf>, CliError> {
    let params = molecule_from(resolver, true)?;
    let steps_per_period = resolver
        .usize_or("grid", "steps_per_period", 4096)
        .map_err(config_err)?;
    let periods = resolver.f64_or("grid", "periods", 2.0).map_err(config_err)?;
    let j_cap = resolver.require_u32("grid", "j_cap").map_err(config_err)?;
    let t_per = params.rotational_period();

    let mut pulses = Vec::new();
    if resolver.present("laser", "intensity_TWcm2") {
        let intensity = resolver
            .require_f64("laser", "intensity_TWcm2")
            .map_err(config_err)?;
        let fwhm_fs = resolver.require_f64("laser", "fwhm_fs").map_err(config_err)?;
        if intensity > 0.0 && params.dalpha.is_none() {
            return Err(config_err(
                "[molecule] needs dalpha_au or dalpha_A3 when the laser intensity is nonzero",
            ));
        }
        let sigma = rotor_core::pulses::fwhm_to_sigma(units::fs_to_au(fwhm_fs));
        let peak = units::intensity_to_field(intensity * 1.0e12).map_err(config_err)?;
        pulses.push(
            PulseSpec::new(PulseShape::LaserKick, peak, 4.0 * sigma, sigma).map_err(config_err)?,
        );
    }
    if resolver.present("kick", "peak_Vm") {
        let shape = match resolver.require_str("kick", "shape").map_err(config_err)?.as_str() {
            "hcp" => PulseShape::Hcp,
            "single-cycle" => PulseShape::SingleCycle,
            other => {
                return Err(config_err(format!(
                    "[kick].shape must be 'hcp' or 'single-cycle', got '{other}'"
                )))
            }
        };
        let peak_vm = resolver.require_f64("kick", "peak_Vm").map_err(config_err)?;
        let fwhm_fs = resolver.require_f64("kick", "fwhm_fs").map_err(config_err)?;
        pulses.push(
            PulseSpec::new(
                shape,
                units::field_vm_to_au(peak_vm).map_err(config_err)?,
                t_per / 4.0,
                rotor_core::pulses::fwhm_to_sigma(units::fs_to_au(fwhm_fs)),
            )
            .map_err(config_err)?,
        );
    }
    let mut seq = PulseSequence::new(pulses);
    if let Some(path) = field_file {
        seq = seq.with_override(load_field_file(path, t_per)?);
    }

    let basis =
        RotorBasis::build(params.kind, j_cap, 0, Some(0)).map_err(config_err)?;
    let psi0 = RotorState::basis_state(basis, 0).map_err(config_err)?;
    let n_steps = ((steps_per_period as f64) * periods).round() as usize;
    let grid = TimeGrid::span(0.0, periods * t_per, n_steps).map_err(config_err)?;
    let (_, traj) = propagate(&psi0, &params, &seq, &grid).map_err(numeric_err)?;

    let csv = out_path(prefix, "csv");
    trajectory_csv(&csv, &traj)?;
    let notes = vec![
        format!("B = {} hartree", fmt_e12(params.b)),
        format!("T_per = {} au", fmt_e12(t_per)),
    ];
    let manifest = write_manifest(prefix, Command::Propagate, resolver, &notes)?;
    Ok(vec![csv, manifest])
}
