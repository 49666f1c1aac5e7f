mod common;

use std::fs;

use common::{deterministic_outputs, imc, ok, run_pipeline, write_small_config};

fn stderr(o: &std::process::Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn help_succeeds_and_unknown_subcommand_is_usage_error() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(imc(d.path(), &["--help"]).status.code(), Some(0));
    assert_eq!(imc(d.path(), &["frobnicate"]).status.code(), Some(2));
    assert_eq!(imc(d.path(), &["fit", "--bogus"]).status.code(), Some(2));
    assert_eq!(
        imc(d.path(), &["--jobs", "0", "report"]).status.code(),
        Some(2)
    );
}

#[test]
fn missing_inputs_name_the_producing_command() {
    let d = tempfile::tempdir().unwrap();
    let o = imc(d.path(), &["fit"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("imc oracle-gen"), "{}", stderr(&o));
    let o = imc(d.path(), &["explore"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("imc fit"), "{}", stderr(&o));
}

#[test]
fn bad_config_is_usage_error() {
    let d = tempfile::tempdir().unwrap();
    fs::write(d.path().join("c.json"), r#"{"n_mc_fitt": 3}"#).unwrap();
    let o = imc(d.path(), &["--config", "c.json", "report"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("n_mc_fitt"), "{}", stderr(&o));
    fs::write(d.path().join("c.json"), "{").unwrap();
    assert_eq!(
        imc(d.path(), &["--config", "c.json", "report"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn pipeline_produces_every_artifact_and_reports_from_stored_files() {
    let d = tempfile::tempdir().unwrap();
    run_pipeline(d.path(), "out", 2);
    let out = d.path().join("out");
    for f in [
        "dataset.csv",
        "holdout.csv",
        "model.json",
        "fit_report.json",
        "corners.csv",
        "selected.json",
        "pvt_fom.csv",
        "pvt_power.csv",
        "pvt_variation.csv",
        "mc_fom.csv",
        "mc_variation.csv",
        "lut_power.csv",
        "accuracy.csv",
        "bench.json",
        "report.md",
        "manifest_report.json",
    ] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let corners = fs::read_to_string(out.join("corners.csv")).unwrap();
    assert_eq!(corners.lines().count(), 1 + 8);

    // Removing the model does not affect the report: it reads stored results only.
    let before = fs::read_to_string(out.join("report.md")).unwrap();
    fs::remove_file(out.join("model.json")).unwrap();
    fs::remove_file(out.join("dataset.csv")).unwrap();
    ok(d.path(), &["--out", "out", "report"]);
    assert_eq!(fs::read_to_string(out.join("report.md")).unwrap(), before);
    for section in [
        "Model fit RMS",
        "Selected corners",
        "PVT sweeps",
        "Mismatch MC",
        "Classifier accuracy",
        "Speed",
    ] {
        assert!(before.contains(section), "report lacks {section}");
    }
}

#[test]
fn eval_writes_all_pairs_and_rejects_off_domain_corners() {
    let d = tempfile::tempdir().unwrap();
    write_small_config(d.path());
    ok(d.path(), &["--config", "config.json", "oracle-gen"]);
    ok(d.path(), &["--config", "config.json", "fit"]);
    ok(
        d.path(),
        &[
            "eval", "--tau0", "2e-10", "--vdac0", "0.3", "--vdacfs", "0.9", "--mode", "mc",
            "--n-mc", "16",
        ],
    );
    let pairs = fs::read_to_string(d.path().join("out/pairs_custom.csv")).unwrap();
    let mut lines = pairs.lines();
    assert!(lines.next().unwrap().ends_with("sigma_dv_v"));
    assert_eq!(lines.count(), 256);
    assert!(d.path().join("out/eval_custom.json").is_file());

    // Full scale far above the fitted word-line range.
    let o = imc(
        d.path(),
        &[
            "eval", "--tau0", "2e-10", "--vdac0", "0.3", "--vdacfs", "1.1",
        ],
    );
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(stderr(&o).contains("v_wl"), "{}", stderr(&o));
}

#[test]
fn selected_corner_needs_explore() {
    let d = tempfile::tempdir().unwrap();
    write_small_config(d.path());
    ok(d.path(), &["--config", "config.json", "oracle-gen"]);
    ok(d.path(), &["--config", "config.json", "fit"]);
    let o = imc(d.path(), &["pvt"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("imc explore"), "{}", stderr(&o));
}

#[test]
fn identical_manifests_give_identical_outputs_across_thread_counts() {
    let d = tempfile::tempdir().unwrap();
    run_pipeline(d.path(), "one", 1);
    run_pipeline(d.path(), "four", 4);
    let a = deterministic_outputs(&d.path().join("one"));
    let b = deterministic_outputs(&d.path().join("four"));
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.file_name(), y.file_name());
        assert!(
            fs::read(x).unwrap() == fs::read(y).unwrap(),
            "{} differs",
            x.display()
        );
    }
}
