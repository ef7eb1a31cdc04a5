use std::path::Path;
use std::process::{Command, Output};

fn streamdeq(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_streamdeq"))
        .args(args)
        .current_dir(dir)
        .env_remove("STREAMDEQ_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn field<'a>(text: &'a str, key: &str) -> &'a str {
    text.lines()
        .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix(": ")))
        .unwrap_or_else(|| panic!("no `{key}` in {text}"))
}

#[test]
fn solve_default_preset_converges() {
    let dir = tempfile::tempdir().unwrap();
    let o = streamdeq(&["solve", "--solver", "broyden", "--iters", "26"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert_eq!(field(&out, "converged"), "true");
    assert!(field(&out, "residual").parse::<f64>().unwrap() <= 1e-6);
}

#[test]
fn solve_zero_iterations_reports_start_residual() {
    let dir = tempfile::tempdir().unwrap();
    let o = streamdeq(&["solve", "--iters", "0"], dir.path());
    assert!(o.status.success());
    let out = stdout(&o);
    assert_eq!(field(&out, "iterations"), "0");
    assert_eq!(field(&out, "converged"), "false");
    assert!(field(&out, "residual").parse::<f64>().unwrap() > 0.0);
}

#[test]
fn unknown_flag_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(streamdeq(&["solve", "--bogus"], dir.path()).status.code(), Some(2));
    assert_eq!(streamdeq(&["bench", "--suite", "fig9"], dir.path()).status.code(), Some(2));
    assert_eq!(streamdeq(&["stream", "--policy", "warm", "--budget", "1"], dir.path()).status.code(), Some(2));
}

#[test]
fn stream_zero_writes_one_row_per_frame() {
    let dir = tempfile::tempdir().unwrap();
    let o = streamdeq(
        &["stream", "--policy", "stream-zero", "--budget", "2", "--frames", "40", "--refs", "--out", "s.csv"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = streamdeq::bench::read_csv(dir.path().join("s.csv")).unwrap();
    assert_eq!(rows.len(), 40);
    assert!(rows.iter().all(|r| r.budget == 2 && r.iterations_used == 2 && r.policy == "stream-zero"));
    let d: Vec<f64> = rows.iter().map(|r| r.sq_dist_to_reference.unwrap()).collect();
    let plateau = d[20..].iter().sum::<f64>() / 20.0;
    assert!(plateau < d[0], "plateau {plateau} vs first frame {}", d[0]);
}

#[test]
fn cold_stream_rows_do_not_depend_on_order() {
    let dir = tempfile::tempdir().unwrap();
    let gen = streamdeq(&["gen-sequence", "--frames", "6", "--out", "fwd.txt"], dir.path());
    assert!(gen.status.success());
    let text = std::fs::read_to_string(dir.path().join("fwd.txt")).unwrap();
    let reversed: Vec<&str> = text.lines().rev().collect();
    std::fs::write(dir.path().join("rev.txt"), reversed.join("\n") + "\n").unwrap();
    for (seq, out) in [("fwd.txt", "fwd.csv"), ("rev.txt", "rev.csv")] {
        let o = streamdeq(
            &["stream", "--policy", "cold", "--budget", "8", "--frames", "6", "--sequence", seq, "--refs", "--out", out],
            dir.path(),
        );
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let fwd = streamdeq::bench::read_csv(dir.path().join("fwd.csv")).unwrap();
    let rev = streamdeq::bench::read_csv(dir.path().join("rev.csv")).unwrap();
    for (i, r) in fwd.iter().enumerate() {
        let o = &rev[fwd.len() - 1 - i];
        assert_eq!(r.residual_norm, o.residual_norm);
        assert_eq!(r.sq_dist_to_reference, o.sq_dist_to_reference);
    }
}

#[test]
fn per_frame_schedule() {
    let dir = tempfile::tempdir().unwrap();
    let o = streamdeq(
        &["stream", "--policy", "stream-zero", "--schedule", "26,1,1,1", "--frames", "4", "--out", "s.csv"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = streamdeq::bench::read_csv(dir.path().join("s.csv")).unwrap();
    assert!(rows[0].residual_norm <= 1e-6);
    assert!(rows.iter().all(|r| r.budget == 0));
    assert_eq!(rows[1..].iter().map(|r| r.iterations_used).collect::<Vec<_>>(), [1, 1, 1]);
}

#[test]
fn schedule_length_mismatch_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = streamdeq(&["stream", "--policy", "cold", "--schedule", "1,2", "--frames", "4"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("2 entries"));
}

#[test]
fn static_eq_bench_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = streamdeq(&["bench", "--suite", "static-eq", "--seeds", "3", "--out", "out"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert!(out.contains("PASS static input"), "{out}");
    assert!(dir.path().join("out/static-equivalence.csv").is_file());
    assert!(dir.path().join("out/static-equivalence.svg").is_file());
}

#[test]
fn bench_out_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_streamdeq"))
        .args(["bench", "--suite", "shot-change", "--seeds", "2"])
        .current_dir(dir.path())
        .env("STREAMDEQ_OUT_DIR", dir.path().join("envout"))
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("recovered") || stdout(&o).contains("not recovered"));
    assert!(dir.path().join("envout/shot-change-analog.csv").is_file());
}

#[test]
fn fig3_zero_bench_row_count_and_reproducibility() {
    let dir = tempfile::tempdir().unwrap();
    for out in ["a", "b"] {
        let o = streamdeq(&["bench", "--suite", "fig3-zero", "--seeds", "20", "--out", out], dir.path());
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for file in ["fig3-zero-analog.csv", "fig3-zero-analog.svg", "fig3-zero-analog_baseline.csv"] {
        let a = std::fs::read(dir.path().join("a").join(file)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(file)).unwrap();
        assert_eq!(a, b, "{file}");
    }
    let rows = streamdeq::bench::read_csv(dir.path().join("a/fig3-zero-analog.csv")).unwrap();
    assert_eq!(rows.len(), 20 * 4 * 40);
}

#[test]
fn global_seed_changes_output_reproducibly() {
    let dir = tempfile::tempdir().unwrap();
    let run = |seed: &str| stdout(&streamdeq(&["--seed", seed, "solve", "--iters", "3", "--tol", "0"], dir.path()));
    assert_eq!(run("5"), run("5"));
    assert_ne!(run("5"), run("6"));
}

#[test]
fn gen_sequence_to_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let o = streamdeq(&["gen-sequence", "--sequence", "blob", "--frames", "3"], dir.path());
    assert!(o.status.success());
    let out = stdout(&o);
    assert_eq!(out.lines().count(), 3);
    assert_eq!(out.lines().next().unwrap().split(' ').count(), 64);
    assert_eq!(streamdeq(&["gen-sequence", "--sequence", "nope"], dir.path()).status.code(), Some(2));
}

#[test]
fn solve_reads_cell_and_input_files() {
    let dir = tempfile::tempdir().unwrap();
    let cell = streamdeq::make_random_cell(3, 8, 2, 0.9, streamdeq::ActivationKind::Identity).unwrap();
    cell.save(dir.path().join("cell.toml")).unwrap();
    std::fs::write(dir.path().join("x.txt"), "1 -1\n").unwrap();
    let o = streamdeq(
        &["solve", "--cell", "cell.toml", "--input", "x.txt", "--solver", "broyden", "--iters", "18", "--tol", "1e-10"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(field(&stdout(&o), "converged"), "true");
    let missing = streamdeq(&["solve", "--cell", "missing.toml"], dir.path());
    assert_eq!(missing.status.code(), Some(1));
}
