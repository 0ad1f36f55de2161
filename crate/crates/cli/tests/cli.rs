//! End-to-end runs of the rotorctl binary: exit codes, CSV schemas, manifest
//! round trips, and the optimize → propagate field-file pipe.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::atomic::{AtomicU32, Ordering};

static COUNTER: AtomicU32 = AtomicU32::new(0);

fn temp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!(
        "rotorctl-test-{}-{}-{tag}",
        std::process::id(),
        COUNTER.fetch_add(1, Ordering::Relaxed)
    ));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

struct RunResult {
    status: i32,
    stdout: String,
    stderr: String,
}

fn rotorctl(args: &[&str]) -> RunResult {
    let out = Command::new(env!("CARGO_BIN_EXE_rotorctl"))
        .args(args)
        .output()
        .expect("binary runs");
    RunResult {
        status: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

fn read_csv(path: &Path) -> (String, Vec<Vec<f64>>) {
    let text = std::fs::read_to_string(path).unwrap();
    assert!(!text.contains('\r'), "LF line endings expected");
    let mut lines = text.lines();
    let header = lines.next().unwrap().to_string();
    let rows = lines
        .map(|l| l.split(',').map(|x| x.parse::<f64>().unwrap()).collect())
        .collect();
    (header, rows)
}

#[test]
fn classical_scan_matches_library_and_round_trips() {
    let dir = temp_dir("classical");
    let prefix = dir.join("run1");
    let cfg = write_config(
        &dir,
        "scan.ini",
        &format!(
            "[output]\nprefix = {}\n[scan]\na_min = 0.5\na_max = 3.0\na_step = 0.25\n",
            prefix.display()
        ),
    );
    let run = rotorctl(&["classical-scan", "--config", cfg.to_str().unwrap()]);
    assert_eq!(run.status, 0, "stderr: {}", run.stderr);
    assert!(run.stdout.contains("wrote"));

    let (header, rows) = read_csv(&dir.join("run1.csv"));
    assert_eq!(header, "a,cos_theta,cos2_theta");
    assert_eq!(rows.len(), 11);
    for row in &rows {
        let want = rotor_core::targets::classical_optimum(row[0]).unwrap();
        assert!((row[1] - want.cos_theta).abs() < 1e-12);
        assert!((row[2] - want.cos2_theta).abs() < 1e-12);
    }

    // manifest re-fed as config reproduces the CSV byte for byte
    let manifest = dir.join("run1.manifest.ini");
    assert!(manifest.exists());
    let prefix2 = dir.join("run2");
    let run = rotorctl(&[
        "classical-scan",
        "--config",
        manifest.to_str().unwrap(),
        "--set",
        &format!("output.prefix={}", prefix2.display()),
    ]);
    assert_eq!(run.status, 0, "stderr: {}", run.stderr);
    let bytes1 = std::fs::read(dir.join("run1.csv")).unwrap();
    let bytes2 = std::fs::read(dir.join("run2.csv")).unwrap();
    assert_eq!(bytes1, bytes2);
}

#[test]
fn unknown_keys_are_config_errors() {
    let dir = temp_dir("badkey");
    let cfg = write_config(
        &dir,
        "bad.ini",
        "[output]\nprefix = x\n[scan]\na_min = 0.5\na_max = 1.0\na_step = 0.1\nbogus_key = 3\n",
    );
    let run = rotorctl(&["classical-scan", "--config", cfg.to_str().unwrap()]);
    assert_eq!(run.status, 2);
    assert!(run.stderr.contains("bogus_key"), "stderr: {}", run.stderr);
}

#[test]
fn bipulse_without_dalpha_is_a_config_error() {
    let dir = temp_dir("nodalpha");
    let prefix = dir.join("out");
    let cfg = write_config(
        &dir,
        "bipulse.ini",
        &format!(
            "[output]\nprefix = {}\n\
             [molecule]\nname = CO\nkind = linear\nB_cm1 = 1.9313\nmu0_D = 0.112\n\
             [thermal]\nT_K = 30\n\
             [grid]\nsteps_per_period = 256\nperiods = 0.5\nj_cap = 26\n\
             [laser]\nintensity_TWcm2 = 50\nfwhm_fs = 50\n\
             [kick]\nshape = hcp\npeak_Vm = 1e8\nfwhm_fs = 100\n",
            prefix.display()
        ),
    );
    let run = rotorctl(&["bipulse", "--config", cfg.to_str().unwrap()]);
    assert_eq!(run.status, 2, "stderr: {}", run.stderr);
    assert!(run.stderr.contains("dalpha"), "stderr: {}", run.stderr);
}

#[test]
fn usage_errors_exit_2() {
    let run = rotorctl(&[]);
    assert_eq!(run.status, 2);
    let run = rotorctl(&["definitely-not-a-command", "--config", "x.ini"]);
    assert_eq!(run.status, 2);
    let run = rotorctl(&["classical-scan"]);
    assert_eq!(run.status, 2);
    assert!(run.stderr.contains("--config"));
}

#[test]
fn free_evolve_trajectory_schema() {
    let dir = temp_dir("freeevolve");
    let prefix = dir.join("fe");
    let cfg = write_config(
        &dir,
        "fe.ini",
        &format!(
            "[output]\nprefix = {}\n\
             [molecule]\nname = fictive\nkind = linear\nB_au = 1.0\n\
             [merit]\na = 2.0\nj_max = 4\n\
             [grid]\nsteps_per_period = 256\nperiods = 1.0\n",
            prefix.display()
        ),
    );
    let run = rotorctl(&["free-evolve", "--config", cfg.to_str().unwrap()]);
    assert_eq!(run.status, 0, "stderr: {}", run.stderr);
    let (header, rows) = read_csv(&dir.join("fe.csv"));
    assert_eq!(header, "t_over_Tper,cos_theta,cos2_theta,norm");
    assert_eq!(rows.len(), 257);
    // revival: first and last rows agree
    assert!((rows[0][1] - rows[256][1]).abs() < 1e-10);
    assert!((rows[0][2] - rows[256][2]).abs() < 1e-10);
    for row in &rows {
        assert!((row[3] - 1.0).abs() < 1e-9);
    }
}

#[test]
fn target_state_outputs_normalized_density() {
    let dir = temp_dir("targetstate");
    let prefix = dir.join("ts");
    let cfg = write_config(
        &dir,
        "ts.ini",
        &format!(
            "[output]\nprefix = {}\n[merit]\na = 2.0\nj_max = 10\n[density]\ntheta_points = 20001\n",
            prefix.display()
        ),
    );
    let run = rotorctl(&["target-state", "--config", cfg.to_str().unwrap()]);
    assert_eq!(run.status, 0, "stderr: {}", run.stderr);
    let (header, rows) = read_csv(&dir.join("ts.state.csv"));
    assert_eq!(header, "j,coefficient");
    assert_eq!(rows.len(), 11);
    let norm: f64 = rows.iter().map(|r| r[1] * r[1]).sum();
    assert!((norm - 1.0).abs() < 1e-10);

    let (header, rows) = read_csv(&dir.join("ts.density.csv"));
    assert_eq!(header, "theta_rad,density");
    let h = rows[1][0] - rows[0][0];
    let mut integral = 0.0;
    for (i, row) in rows.iter().enumerate() {
        let w = if i == 0 || i == rows.len() - 1 { 0.5 } else { 1.0 };
        integral += w * row[1];
    }
    integral *= h;
    assert!((integral - 1.0).abs() < 1e-6, "integral = {integral}");
    // bowl shape: the density peaks between 60 and 90 degrees and most of the
    // probability sits on the oriented side
    let (imax, _) = rows
        .iter()
        .enumerate()
        .fold((0, 0.0), |acc, (i, r)| if r[1] > acc.1 { (i, r[1]) } else { acc });
    let theta_max = rows[imax][0].to_degrees();
    assert!((60.0..90.0).contains(&theta_max), "peak at {theta_max} deg");
    let upper: f64 = rows
        .iter()
        .enumerate()
        .filter(|(i, _)| rows[*i][0] <= std::f64::consts::FRAC_PI_2)
        .map(|(i, r)| {
            let w = if i == 0 { 0.5 } else { 1.0 };
            w * r[1] * h
        })
        .sum();
    assert!(upper > 0.8, "upper-hemisphere weight = {upper}");
}

#[test]
fn optimize_field_feeds_back_into_propagate() {
    let dir = temp_dir("octpipe");
    let prefix = dir.join("opt");
    let cfg = write_config(
        &dir,
        "opt.ini",
        &format!(
            "[output]\nprefix = {}\n\
             [molecule]\nname = fictive\nkind = linear\nB_au = 1.0\nmu0_au = 0.5\n\
             [merit]\na = 2.0\nj_max = 1\n\
             [grid]\nsteps_per_period = 256\nperiods = 2.0\nj_cap = 6\n\
             [oct]\nhorizon_periods = 1.0\nguess_intensity_TWcm2 = 0.05\nguess_center_periods = 0.2\nguess_sigma_periods = 0.05\n",
            prefix.display()
        ),
    );
    let run = rotorctl(&["optimize", "--config", cfg.to_str().unwrap()]);
    assert_eq!(run.status, 0, "stderr: {}", run.stderr);

    let (header, field_rows) = read_csv(&dir.join("opt.field.csv"));
    assert_eq!(header, "t_over_Tper,E_au,E_Vm");
    assert_eq!(field_rows.len(), 256);
    for row in &field_rows {
        assert!((row[2] - row[1] * rotor_core::units::AU_FIELD_IN_VM).abs() <= 1e-6 * row[2].abs().max(1e-30));
    }
    let (header, fid_rows) = read_csv(&dir.join("opt.fidelity.csv"));
    assert_eq!(header, "iteration,fidelity");
    assert!(fid_rows.last().unwrap()[1] >= 0.99);
    // monotone history
    for w in fid_rows.windows(2) {
        assert!(w[1][1] >= w[0][1] - 1e-12);
    }

    // consume the exported field and reproduce the trajectory (up to the
    // 12-digit precision of the field export)
    let prefix2 = dir.join("replay");
    let cfg2 = write_config(
        &dir,
        "replay.ini",
        &format!(
            "[output]\nprefix = {}\n\
             [molecule]\nname = fictive\nkind = linear\nB_au = 1.0\nmu0_au = 0.5\n\
             [grid]\nsteps_per_period = 256\nperiods = 2.0\nj_cap = 6\n",
            prefix2.display()
        ),
    );
    let field_file = dir.join("opt.field.csv");
    let run = rotorctl(&[
        "propagate",
        "--config",
        cfg2.to_str().unwrap(),
        "--field-file",
        field_file.to_str().unwrap(),
    ]);
    assert_eq!(run.status, 0, "stderr: {}", run.stderr);
    let (_, opt_rows) = read_csv(&dir.join("opt.csv"));
    let (_, replay_rows) = read_csv(&dir.join("replay.csv"));
    assert_eq!(opt_rows.len(), replay_rows.len());
    for (a, b) in opt_rows.iter().zip(replay_rows.iter()) {
        for (x, y) in a.iter().zip(b.iter()) {
            assert!((x - y).abs() < 1e-8, "trajectory mismatch: {x} vs {y}");
        }
    }
}

#[test]
fn optimize_with_zero_bound_exits_3_with_outputs() {
    let dir = temp_dir("octfail");
    let prefix = dir.join("stuck");
    let cfg = write_config(
        &dir,
        "stuck.ini",
        &format!(
            "[output]\nprefix = {}\n\
             [molecule]\nname = fictive\nkind = linear\nB_au = 1.0\nmu0_au = 0.5\n\
             [merit]\na = 2.0\nj_max = 2\n\
             [grid]\nsteps_per_period = 256\nperiods = 1.0\nj_cap = 6\n\
             [oct]\nhorizon_periods = 1.0\nfield_bound_Vm = 0\nmax_iterations = 5\n",
            prefix.display()
        ),
    );
    let run = rotorctl(&["optimize", "--config", cfg.to_str().unwrap()]);
    assert_eq!(run.status, 3, "stderr: {}", run.stderr);
    assert!(run.stderr.contains("stalled"), "stderr: {}", run.stderr);
    // best-so-far outputs still written
    assert!(dir.join("stuck.field.csv").exists());
    assert!(dir.join("stuck.csv").exists());
    assert!(dir.join("stuck.manifest.ini").exists());
}

#[test]
fn train_command_runs_and_matches_bipulse_when_degenerate() {
    let dir = temp_dir("train");
    let base = "[molecule]\nname = CO\nkind = linear\nB_cm1 = 1.9313\nmu0_D = 0.112\ndalpha_au = 3.58\n\
         [thermal]\nT_K = 5\nweight_tail = 1e-4\n\
         [grid]\nsteps_per_period = 512\nperiods = 1.0\nj_cap = 12\n\
         [laser]\nintensity_TWcm2 = 2\nfwhm_fs = 50\n\
         [kick]\nshape = hcp\npeak_Vm = 2e8\nfwhm_fs = 100\n"
        .to_string();
    let p1 = dir.join("bi");
    let cfg1 = write_config(
        &dir,
        "bi.ini",
        &format!("[output]\nprefix = {}\n{base}", p1.display()),
    );
    let run = rotorctl(&["bipulse", "--config", cfg1.to_str().unwrap()]);
    assert_eq!(run.status, 0, "stderr: {}", run.stderr);

    let p2 = dir.join("tr");
    let cfg2 = write_config(
        &dir,
        "tr.ini",
        &format!(
            "[output]\nprefix = {}\n{base}[train]\nn_kicks = 1\namplitudes_Vm = 2e8\n",
            p2.display()
        ),
    );
    let run = rotorctl(&["train", "--config", cfg2.to_str().unwrap()]);
    assert_eq!(run.status, 0, "stderr: {}", run.stderr);

    let bi = std::fs::read(dir.join("bi.csv")).unwrap();
    let tr = std::fs::read(dir.join("tr.csv")).unwrap();
    assert_eq!(bi, tr);

    // a second kick must change the trajectory
    let p3 = dir.join("tr2");
    let cfg3 = write_config(
        &dir,
        "tr2.ini",
        &format!(
            "[output]\nprefix = {}\n{base}[train]\nn_kicks = 2\namplitudes_Vm = 2e8, 1e8\n",
            p3.display()
        ),
    );
    let run = rotorctl(&["train", "--config", cfg3.to_str().unwrap()]);
    assert_eq!(run.status, 0, "stderr: {}", run.stderr);
    let tr2 = std::fs::read(dir.join("tr2.csv")).unwrap();
    assert_ne!(tr, tr2);
}
