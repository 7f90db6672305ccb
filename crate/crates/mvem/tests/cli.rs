//! Drives the installed binary end to end: mesh generation, cutting,
//! solving on saved meshes, config overrides, study CSV output, and the
//! failure modes a caller is most likely to hit.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use mvem::mesh::io::load_mesh;

fn mvem(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mvem"))
        .args(args)
        .output()
        .expect("binary launches")
}

fn run_ok(args: &[&str]) -> String {
    let out = mvem(args);
    assert!(
        out.status.success(),
        "command {:?} failed:\n{}",
        args,
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn run_err(args: &[&str]) -> String {
    let out = mvem(args);
    assert!(!out.status.success(), "command {:?} should fail", args);
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

#[test]
fn gen_export_and_solve_on_a_saved_mesh() {
    let tmp = tempfile::tempdir().unwrap();
    let gen_dir = tmp.path().join("grid");
    let stdout = run_ok(&[
        "mesh", "gen", "--nx", "2", "--ny", "2", "--out",
        gen_dir.to_str().unwrap(),
    ]);
    assert!(stdout.contains("4 cells"), "stdout: {stdout}");
    let mesh_file = path(&gen_dir, "mesh.json");
    assert!(gen_dir.join("mesh.vtk").is_file());
    assert_eq!(load_mesh(&mesh_file).unwrap().n_cells(), 4);

    let export_dir = tmp.path().join("render");
    run_ok(&["export", "--mesh", &mesh_file, "--out", export_dir.to_str().unwrap()]);
    let vtk = fs::read_to_string(export_dir.join("mesh.vtk")).unwrap();
    assert!(vtk.starts_with("# vtk DataFile Version 3.0"));

    let solve_dir = tmp.path().join("fields");
    let stdout = run_ok(&[
        "solve", "--problem", "patch", "--order", "1", "--mesh", &mesh_file,
        "--out", solve_dir.to_str().unwrap(),
    ]);
    assert!(stdout.contains("velocity"), "stdout: {stdout}");
    assert!(stdout.contains("residual"), "stdout: {stdout}");
    let solution = fs::read_to_string(solve_dir.join("solution.vtk")).unwrap();
    assert!(solution.contains("SCALARS pressure double 1"));
    assert!(solution.contains("VECTORS velocity double"));
}

#[test]
fn cut_meshes_load_back_with_both_regions()  {
    let tmp = tempfile::tempdir().unwrap();
    for geometry in ["curved", "straight"] {
        let dir = tmp.path().join(geometry);
        let stdout = run_ok(&[
            "mesh", "cut", "--problem", "interface", "--nx", "2",
            "--geometry", geometry, "--out", dir.to_str().unwrap(),
        ]);
        assert!(stdout.contains("5 cells"), "stdout: {stdout}");
        let mesh = load_mesh(dir.join("mesh.json")).unwrap();
        assert_eq!(mesh.n_cells(), 5);
        let regions: Vec<u32> = mesh.cells.iter().map(|c| c.region).collect();
        assert!(regions.contains(&1) && regions.contains(&2));
    }
}

#[test]
fn convergence_csv_is_well_formed_and_repeatable() {
    let tmp = tempfile::tempdir().unwrap();
    let mut runs = Vec::new();
    for name in ["a", "b"] {
        let dir = tmp.path().join(name);
        let stdout = run_ok(&[
            "convergence", "--problem", "patch", "--order", "1",
            "--family", "2,4", "--out", dir.to_str().unwrap(),
        ]);
        assert!(stdout.contains("exact"), "stdout: {stdout}");
        runs.push(fs::read_to_string(dir.join("patch_k1.csv")).unwrap());
    }

    let lines: Vec<&str> = runs[0].lines().collect();
    assert_eq!(
        lines[0],
        "level,h,NE,ndof_v,ndof_p,e_p,e_q,rate_p,rate_q,seconds"
    );
    assert_eq!(lines.len(), 3);
    for (level, line) in lines[1..].iter().enumerate() {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols.len(), 10);
        assert_eq!(cols[0], [2, 4][level].to_string());
        assert!(cols[1].parse::<f64>().unwrap() > 0.0);
        assert!(cols[2].parse::<usize>().unwrap() > 0);
        assert!(cols[5].parse::<f64>().unwrap() < 1e-12);
        // Errors at the exact floor leave the rate cells empty.
        assert_eq!(cols[7], "");
        assert_eq!(cols[8], "");
        cols[9].parse::<f64>().unwrap();
    }

    let strip_seconds = |csv: &str| -> Vec<String> {
        csv.lines()
            .map(|l| l.rsplit_once(',').unwrap().0.to_string())
            .collect()
    };
    assert_eq!(strip_seconds(&runs[0]), strip_seconds(&runs[1]));
}

#[test]
fn config_overrides_change_the_assembled_system() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("config.json");
    fs::write(
        &config,
        r#"{"mu": 3.0, "permeability": {"2": 0.5}, "oversample": 2}"#,
    )
    .unwrap();

    let mut triplets = Vec::new();
    for (name, extra) in [("plain", None), ("tuned", Some(&config))] {
        let dir = tmp.path().join(name);
        let mut args = vec![
            "solve", "--problem", "interface", "--order", "1", "--nx", "2",
            "--dump-triplets", "--out",
        ];
        let dir_s = dir.to_str().unwrap().to_string();
        args.push(&dir_s);
        let config_s;
        if let Some(c) = extra {
            config_s = c.to_str().unwrap().to_string();
            args.push("--config");
            args.push(&config_s);
        }
        run_ok(&args);
        triplets.push(fs::read_to_string(dir.join("triplets.txt")).unwrap());
    }

    for line in triplets[0].lines().take(5) {
        let cols: Vec<&str> = line.split_whitespace().collect();
        assert_eq!(cols.len(), 3);
        cols[0].parse::<usize>().unwrap();
        cols[1].parse::<usize>().unwrap();
        cols[2].parse::<f64>().unwrap();
    }
    assert_ne!(triplets[0], triplets[1], "overrides must reach the system");
}

#[test]
fn bad_inputs_fail_with_a_diagnostic() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let out_s = out.to_str().unwrap();

    let stderr = run_err(&["solve", "--problem", "perpetuum", "--out", out_s]);
    assert!(stderr.contains("perpetuum"), "stderr: {stderr}");

    let stderr = run_err(&[
        "mesh", "gen", "--nx", "2", "--ny", "2", "--bbox", "1,0,0,1", "--out", out_s,
    ]);
    assert!(stderr.contains("--bbox"), "stderr: {stderr}");

    let config = tmp.path().join("config.json");
    fs::write(&config, r#"{"viscosity": 1.0}"#).unwrap();
    let stderr = run_err(&[
        "solve", "--problem", "patch", "--config", config.to_str().unwrap(),
        "--out", out_s,
    ]);
    assert!(stderr.contains("config"), "stderr: {stderr}");

    run_err(&[
        "solve", "--problem", "patch", "--mesh", "m.json", "--nx", "2", "--out", out_s,
    ]);
}
