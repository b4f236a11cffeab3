//! End-to-end runs of the binary: exit codes, stdout/stderr discipline, and
//! the resolve -> dockerize -> compendium pipeline over the fixture registry.

mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::fixture_path;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_chronoenv"));
    cmd.env("CHRONO_REGISTRY", fixture_path("registry"));
    cmd.env_remove("CHRONO_CACHE");
    cmd
}

fn run(args: &[&str], cwd: &Path) -> Output {
    bin()
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn stderr(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

#[test]
fn resolve_writes_a_lockfile_and_prints_the_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        &[
            "resolve",
            "quanteda",
            "--date",
            "2018-10-06",
            "--os",
            "ubuntu-18.04",
            "--output",
            "q.lock",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("r_version: 3.5.1"), "{text}");
    assert!(text.contains("snapshot_date: 2018-10-06"));
    assert!(text.contains("roots: 1"));
    let lock = std::fs::read_to_string(dir.path().join("q.lock")).unwrap();
    assert!(lock.contains("\"1.3.4\""));
}

#[test]
fn resolve_before_the_era_floor_exits_one_with_machine_readable_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["resolve", "xml2", "--date", "2001-08-30"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert!(err.contains("error: unsupported-era:"), "{err}");
    // data stream stays clean
    assert!(stdout(&out).is_empty());
}

#[test]
fn resolve_without_refs_or_scan_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["resolve", "--date", "2018-10-06"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("usage"));
}

#[test]
fn missing_required_date_flag_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["resolve", "quanteda"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn resolve_can_take_roots_from_a_scan() {
    let dir = tempfile::tempdir().unwrap();
    let scan_dir = fixture_path("scanproj");
    let out = run(
        &[
            "resolve",
            "--scan",
            scan_dir.to_str().unwrap(),
            "--date",
            "2018-10-06",
            "--output",
            "s.lock",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let lock = std::fs::read_to_string(dir.path().join("s.lock")).unwrap();
    assert!(lock.contains("\"xml2\""));
    assert!(lock.contains("cran::xml2"));
}

#[test]
fn dockerize_emits_the_build_context() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        &[
            "resolve",
            "quanteda",
            "--date",
            "2018-10-06",
            "--output",
            "q.lock",
        ],
        dir.path(),
    );
    assert!(out.status.success());
    let out = run(
        &[
            "dockerize",
            "--lock",
            "q.lock",
            "--out",
            "docker",
            "--lib",
            "anotherlibrary",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let listing = stdout(&out);
    for name in ["Dockerfile", "install.sh", "install_order.txt"] {
        assert!(listing.contains(name), "{listing}");
        assert!(dir.path().join("docker").join(name).exists());
    }
    let script = std::fs::read_to_string(dir.path().join("docker/install.sh")).unwrap();
    assert!(script.contains("/anotherlibrary"));

    // install.sh must be valid POSIX shell
    let check = Command::new("sh")
        .arg("-n")
        .arg(dir.path().join("docker/install.sh"))
        .output()
        .expect("sh is available");
    assert!(check.status.success());
}

#[test]
fn dockerize_with_missing_lock_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        &["dockerize", "--lock", "missing.lock", "--out", "d"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("error: io:"));
}

#[test]
fn dockerize_rejects_image_with_no_rocker() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        &[
            "resolve",
            "quanteda",
            "--date",
            "2018-10-06",
            "--output",
            "q.lock",
        ],
        dir.path(),
    );
    assert!(out.status.success());
    let out = run(
        &[
            "dockerize",
            "--lock",
            "q.lock",
            "--out",
            "d",
            "--image",
            "rstudio",
            "--no-rocker",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("error: option-conflict:"));
}

#[test]
fn scan_prints_one_canonical_ref_per_line() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = fixture_path("scan_corpus");
    let out = run(&["scan", corpus.to_str().unwrap()], dir.path());
    assert!(out.status.success());
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines.contains(&"cran::compute.es"), "{text}");
    assert!(lines.contains(&"bioc::S4Vectors"));
    assert!(lines.iter().all(|l| l.contains("::")));
}

#[test]
fn export_prints_dot_to_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        &[
            "resolve",
            "ptproc",
            "--date",
            "2004-07-01",
            "--output",
            "p.lock",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let out = run(
        &["export", "--lock", "p.lock", "--format", "dot"],
        dir.path(),
    );
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.starts_with("digraph dependencies {"));
    assert!(text.contains("\"ptproc\" [label=\"ptproc@1.1\"]"));

    let out = run(
        &["export", "--lock", "p.lock", "--format", "nope"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn compendium_writes_a_makefile_that_make_accepts() {
    let dir = tempfile::tempdir().unwrap();
    let materials = dir.path().join("meta-analysis");
    std::fs::create_dir(&materials).unwrap();
    std::fs::write(materials.join("README.Rmd"), "# analysis\n").unwrap();

    let out = run(
        &[
            "resolve",
            "quanteda",
            "--date",
            "2018-10-06",
            "--output",
            "q.lock",
        ],
        dir.path(),
    );
    assert!(out.status.success());
    let out = run(
        &[
            "compendium",
            "--lock",
            "q.lock",
            "--handle",
            "oser",
            "--materials",
            "meta-analysis",
            "--cache",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let makefile = std::fs::read_to_string(dir.path().join("Makefile")).unwrap();
    for target in [
        "all:", "resolve:", "build:", "render:", "export:", "rebuild:",
    ] {
        assert!(makefile.lines().any(|l| l.starts_with(target)), "{target}");
    }
    assert!(makefile.contains("handle=oser"));
    assert!(dir.path().join("oser.lock").exists());

    // make parses the Makefile and would run the CLI for `resolve`
    let check = Command::new("make")
        .args(["-n", "resolve"])
        .current_dir(dir.path())
        .output()
        .expect("make is available");
    assert!(
        check.status.success(),
        "make -n failed: {}",
        String::from_utf8_lossy(&check.stderr)
    );
    let plan_text = String::from_utf8_lossy(&check.stdout).into_owned();
    assert!(plan_text.contains("chronoenv dockerize --lock oser.lock --out oserdocker"));
    assert!(plan_text.contains("--cache"));
}

#[test]
fn sysreqs_table_is_overridable_by_flag() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("rules.json"),
        r#"[
            {"pattern": "c\\+\\+(11|14|17)", "os": "ubuntu-18.04", "packages": ["g++-7"]},
            {"pattern": "libxml2", "os": "ubuntu-18.04", "packages": ["libxml2-dev"]},
            {"pattern": "libicu|icu4c", "os": "ubuntu-18.04", "packages": ["libicu60"]},
            {"pattern": "gnu\\s+make", "os": "ubuntu-18.04", "packages": ["make"]}
        ]"#,
    )
    .unwrap();
    let out = run(
        &[
            "resolve",
            "quanteda",
            "--date",
            "2018-10-06",
            "--output",
            "q.lock",
        ],
        dir.path(),
    );
    assert!(out.status.success());
    let out = run(
        &[
            "dockerize",
            "--lock",
            "q.lock",
            "--out",
            "docker",
            "--sysreqs",
            "rules.json",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let dockerfile = std::fs::read_to_string(dir.path().join("docker/Dockerfile")).unwrap();
    assert!(dockerfile.contains("g++-7"), "{dockerfile}");
    assert!(dockerfile.contains("libicu60"));
}

#[test]
fn registry_flag_overrides_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let reg = fixture_path("registry");
    // deliberately point the env var somewhere broken; the flag must win
    let out = Command::new(env!("CARGO_BIN_EXE_chronoenv"))
        .env("CHRONO_REGISTRY", dir.path().join("does-not-exist"))
        .args([
            "resolve",
            "ptproc",
            "--registry",
            reg.to_str().unwrap(),
            "--date",
            "2004-07-01",
            "--output",
            "p.lock",
        ])
        .current_dir(dir.path())
        .output()
        .expect("binary runs");
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    assert!(stdout(&out).contains("r_version: 1.9.1"));
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["frobnicate"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn fixture_mode_ignores_unreachable_endpoints() {
    // with CHRONO_REGISTRY set, nothing may touch the network even when the
    // configured endpoints are unresolvable
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("cfg.toml"),
        "[endpoints]\ncran_db = \"http://chronoenv-test.invalid\"\n",
    )
    .unwrap();
    let out = run(
        &[
            "resolve",
            "quanteda",
            "--date",
            "2018-10-06",
            "--config",
            "cfg.toml",
            "--output",
            "q.lock",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "stderr: {}", stderr(&out));
}
