use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sha2::{Digest, Sha256};

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn punctum(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_punctum")).args(args).output().expect("spawn punctum")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("run.ini");
    std::fs::write(&p, text).unwrap();
    p
}

const SMALL: &str = "seed = 7\n[map]\nexpr = exp(z + 1/z)\n[window]\ncols = 64\nrows = 64\n[output]\nname = small\n";

fn render_bytes(cfg: &Path, out: &Path, threads: &str) -> Vec<Vec<u8>> {
    let o = punctum(&["render", cfg.to_str().unwrap(), "--threads", threads, "--output.dir", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    ["ppm", "fate", "txt"].iter().map(|ext| std::fs::read(out.join(format!("small.{ext}"))).unwrap()).collect()
}

#[test]
fn render_writes_three_artifacts_identical_across_threads() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    std::fs::create_dir(&a).unwrap();
    std::fs::create_dir(&b).unwrap();
    let one = render_bytes(&cfg, &a, "1");
    let eight = render_bytes(&cfg, &b, "8");
    assert!(one == eight, "artifacts differ between 1 and 8 threads");
    assert!(one[0].starts_with(b"P6\n"));
    let sidecar = String::from_utf8(one[2].clone()).unwrap();
    assert!(sidecar.contains("config.map.expr = exp(z + 1/z)"));
    assert!(!sidecar.contains("threads") && !sidecar.contains("output.dir"));
}

#[test]
fn render_into_missing_directory_fails_without_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let missing = dir.path().join("nope");
    let o = punctum(&["render", cfg.to_str().unwrap(), "--output.dir", missing.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!missing.exists());
    let names: Vec<_> = std::fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(names, ["run.ini"]);
}

#[test]
fn expz_basic_golden_ppm() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("expz_basic.ini");
    let o = punctum(&["render", cfg.to_str().unwrap(), "--output.dir", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let ppm = std::fs::read(dir.path().join("expz_basic.ppm")).unwrap();
    assert_eq!(hex::encode(Sha256::digest(&ppm)), GOLDEN_EXPZ_BASIC_PPM);
}

const GOLDEN_EXPZ_BASIC_PPM: &str = "dc349b04260f938d2ceb91542f79568098a391c1cc01489986f1f041ee5df680";

#[test]
fn mmseq_prints_the_constant_itinerary_sequence() {
    let cfg = config("expz_basic.ini");
    let o = punctum(&["mmseq", cfg.to_str().unwrap(), "--itinerary", "(0)*", "--r", "3", "--depth", "2"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "n,e_n,log_R_n,truncated");
    let values: Vec<f64> = rows[1..].iter().map(|r| r.split(',').nth(2).unwrap().parse().unwrap()).collect();
    let expected = [3f64.ln(), 10.0 / 3.0, 28.067298887873402];
    assert_eq!(values.len(), 3);
    for (v, e) in values.iter().zip(expected) {
        assert!((v - e).abs() <= 1e-9 * e, "{v} vs {e}");
    }

    let o = punctum(&["mmseq", cfg.to_str().unwrap(), "--depth", "0"]);
    assert_eq!(stdout(&o).lines().count(), 2);

    let o = punctum(&["mmseq", cfg.to_str().unwrap(), "--r", "1.5"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("precondition"));
}

#[test]
fn verify_exit_codes() {
    let o = punctum(&["verify", config("identity_degenerate.ini").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).starts_with("check=mmseq_lemma status=fail"));

    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[map]\nexpr = z\n[verify]\nchecks = no_such_check\n");
    assert_eq!(punctum(&["verify", cfg.to_str().unwrap()]).status.code(), Some(2));

    let cfg = write_config(dir.path(), "[map]\nexpr = exp(z + 1/z)\n[verify]\nchecks = remark_counterexample\n");
    let o = punctum(&["verify", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("check=remark_counterexample status=pass"));
}

#[test]
fn verify_reports_start_radius_below_r_f_as_skipped() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "[map]\nexpr = exp(exp(1/z) + z)\n[window]\ncols = 32\nrows = 32\n[verify]\nchecks = boundary_identities\n",
    );
    let o = punctum(&["verify", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("status=skipped reason=\"precondition violated: R_start = 3"));
}

#[test]
fn classify_points() {
    let cfg = config("expz_basic.ini");
    let o = punctum(&["classify", cfg.to_str().unwrap(), "--point", "30"]);
    assert!(o.status.success());
    let line = stdout(&o);
    assert!(line.starts_with("point=30 fate=FastEscapingCandidate itinerary=0,0,"), "{line}");
    assert!(line.contains("offset=0"));

    let o = punctum(&["classify", cfg.to_str().unwrap(), "--point", "0"]);
    assert_eq!(o.status.code(), Some(3));

    let id = config("identity_degenerate.ini");
    let o = punctum(&["classify", id.to_str().unwrap(), "--point", "5"]);
    let line = stdout(&o);
    let l: f64 = line.trim().strip_prefix("point=5 fate=BoundedCandidate L=").unwrap().parse().unwrap();
    assert!((l - 5.0).abs() < 1e-12, "{line}");
}

#[test]
fn unknown_config_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[map]\nexpr = z\nbogus = 1\n");
    let o = punctum(&["classify", cfg.to_str().unwrap(), "--point", "5"]);
    assert_eq!(o.status.code(), Some(2));
}
