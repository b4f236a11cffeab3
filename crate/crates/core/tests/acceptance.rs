//! Acceptance suite: one test per criterion, each printing a PASS line.
//!
//! Run with `cargo test --test acceptance -- --nocapture` to see the lines.
//! Every tolerance and time budget is pinned here; the suite runs entirely
//! against checked-in fixtures and shipped data (no network).

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use chronoenv::container::{self, BaseImage, PlanOptions};
use chronoenv::metadata::{compare_versions, DepKind, DependencySpec, ReleaseRecord, Version};
use chronoenv::pkgref::{parse_ref, render_ref, BiocNames, PackageRef, Source};
use chronoenv::registry::SnapshotRegistry;
use chronoenv::resolver::{
    export_graph, install_order, load_lock, resolve, Edge, ExportFormat, ResolveOptions,
    ResolvedGraph, ResolvedNode,
};
use chronoenv::scanner::scan_dir;
use chronoenv::sysreqs::RuleTable;
use chronoenv::Error;

use common::{date, fixture_path, golden_path, main_registry, version};

fn cli() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_chronoenv"));
    cmd.env("CHRONO_REGISTRY", fixture_path("registry"));
    cmd.env_remove("CHRONO_CACHE");
    cmd
}

#[test]
fn criterion_1_quanteda_case() {
    let dir = tempfile::tempdir().unwrap();
    let started = Instant::now();
    let output = cli()
        .args([
            "resolve",
            "quanteda",
            "--date",
            "2018-10-06",
            "--os",
            "ubuntu-18.04",
            "--output",
            "q.lock",
        ])
        .current_dir(dir.path())
        .output()
        .expect("binary runs");
    let elapsed = started.elapsed();
    assert!(output.status.success());
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("r_version: 3.5.1"), "{stdout}");
    let graph = load_lock(&std::fs::read_to_string(dir.path().join("q.lock")).unwrap()).unwrap();
    assert_eq!(graph.nodes["quanteda"].version, version("1.3.4"));
    assert_eq!(graph.r_version, version("3.5.1"));
    assert!(elapsed < Duration::from_secs(1), "took {elapsed:?}");
    println!("PASS: criterion 1 (quanteda case): quanteda=1.3.4, r_version=3.5.1, {elapsed:?}");
}

#[test]
fn criterion_2_maxent_case() {
    let registry = main_registry();
    let root = parse_ref("cran/maxent", registry.bioc_names()).unwrap();
    let started = Instant::now();
    let graph = resolve(
        &[root],
        date("2012-06-10"),
        "ubuntu-18.04",
        &registry,
        &ResolveOptions::default(),
    )
    .unwrap();
    let elapsed = started.elapsed();
    assert_eq!(graph.r_version, version("2.15.0"));
    let plan = container::plan(
        &graph,
        PlanOptions {
            output_dir: std::env::temp_dir().join("unused"),
            ..PlanOptions::default()
        },
        RuleTable::shipped(),
    )
    .unwrap();
    assert!(matches!(plan.base, BaseImage::DebianSourceBuild { .. }));
    assert!(elapsed < Duration::from_secs(1), "took {elapsed:?}");
    println!(
        "PASS: criterion 2 (maxent case): r_version=2.15.0, base=debian_source_build, {elapsed:?}"
    );
}

#[test]
fn criterion_3_era_bound() {
    let registry = main_registry();
    for bad in ["2001-08-30", "1999-12-31", "1987-06-01"] {
        let err = resolve(
            &[PackageRef::cran("gee")],
            date(bad),
            "ubuntu-18.04",
            &registry,
            &ResolveOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::UnsupportedEra { .. }), "{bad}: {err}");
    }
    let graph = resolve(
        &[PackageRef::cran("gee")],
        date("2001-08-31"),
        "ubuntu-18.04",
        &registry,
        &ResolveOptions::default(),
    )
    .unwrap();
    assert_eq!(graph.r_version, version("1.3.1"));
    println!("PASS: criterion 3 (era bound): pre-2001-08-31 rejected, floor date gives r=1.3.1");
}

// ---------------------------------------------------------------------------
// criterion 4: resolve() equals a brute-force fixpoint oracle

fn random_store(
    rng: &mut ChaCha8Rng,
) -> (BTreeMap<String, Vec<ReleaseRecord>>, Vec<String>, NaiveDate) {
    let epoch = date("2002-01-01");
    let n_pkgs = rng.gen_range(1..=50);
    let names: Vec<String> = (0..n_pkgs).map(|i| format!("pkg{i:02}")).collect();
    let mut store = BTreeMap::new();
    for name in &names {
        let n_vers = rng.gen_range(1..=5);
        let mut releases = Vec::new();
        for v in 0..n_vers {
            let n_deps = rng.gen_range(0..=4);
            let deps = (0..n_deps)
                .map(|_| {
                    let target = &names[rng.gen_range(0..names.len())];
                    let kind = match rng.gen_range(0..10) {
                        0..=4 => DepKind::Imports,
                        5..=6 => DepKind::Depends,
                        7 => DepKind::LinkingTo,
                        8 => DepKind::Suggests,
                        _ => DepKind::Enhances,
                    };
                    DependencySpec {
                        name: target.clone(),
                        kind,
                        constraint: None,
                    }
                })
                .collect();
            releases.push(ReleaseRecord {
                name: name.clone(),
                version: Version::parse(&format!("{}.{}", v + 1, rng.gen_range(0..10))).unwrap(),
                published: epoch + chrono::Duration::days(rng.gen_range(0..6200)),
                deps,
                sysreqs: String::new(),
                r_constraint: None,
                commit: None,
            });
        }
        store.insert(name.clone(), releases);
    }
    let n_roots = rng.gen_range(1..=3.min(names.len()));
    let mut roots: Vec<String> = Vec::new();
    while roots.len() < n_roots {
        let cand = names[rng.gen_range(0..names.len())].clone();
        if !roots.contains(&cand) {
            roots.push(cand);
        }
    }
    let query = epoch + chrono::Duration::days(rng.gen_range(0..6600));
    (store, roots, query)
}

fn scan_latest(history: &[ReleaseRecord], at: NaiveDate) -> Option<&ReleaseRecord> {
    history.iter().filter(|r| r.published <= at).max_by(|a, b| {
        a.published
            .cmp(&b.published)
            .then_with(|| a.version.cmp(&b.version))
    })
}

/// Brute-force fixpoint oracle, independent of the resolver: repeatedly add
/// the date-pinned release of every strong dependency until stable. `None`
/// when a root is unresolvable (the resolver must error).
fn oracle_nodes(
    store: &BTreeMap<String, Vec<ReleaseRecord>>,
    roots: &[String],
    at: NaiveDate,
) -> Option<BTreeMap<String, Version>> {
    let mut chosen: BTreeMap<String, ReleaseRecord> = BTreeMap::new();
    for root in roots {
        let rec = store.get(root).and_then(|h| scan_latest(h, at))?;
        chosen.insert(root.clone(), rec.clone());
    }
    loop {
        let mut additions: Vec<ReleaseRecord> = Vec::new();
        for rec in chosen.values() {
            for dep in &rec.deps {
                if !dep.kind.is_strong() || chosen.contains_key(&dep.name) {
                    continue;
                }
                if additions.iter().any(|a| a.name == dep.name) {
                    continue;
                }
                if let Some(found) = store.get(&dep.name).and_then(|h| scan_latest(h, at)) {
                    additions.push(found.clone());
                }
            }
        }
        if additions.is_empty() {
            break;
        }
        for a in additions {
            chosen.insert(a.name.clone(), a);
        }
    }
    Some(
        chosen
            .into_iter()
            .map(|(name, rec)| (name, rec.version))
            .collect(),
    )
}

#[test]
fn criterion_4_oracle_equivalence() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_5eed);
    let mut resolved_cases = 0usize;
    let mut error_cases = 0usize;
    const CASES: usize = 1000;
    for case in 0..CASES {
        let (store, roots, at) = random_store(&mut rng);
        let registry = SnapshotRegistry::in_memory(store.clone());
        let refs: Vec<PackageRef> = roots.iter().map(|n| PackageRef::cran(n.clone())).collect();
        let got = resolve(
            &refs,
            at,
            "ubuntu-18.04",
            &registry,
            &ResolveOptions::default(),
        );
        match oracle_nodes(&store, &roots, at) {
            Some(expected) => {
                let graph = got.unwrap_or_else(|e| panic!("case {case}: resolver errored: {e}"));
                let got_nodes: BTreeMap<String, Version> = graph
                    .nodes
                    .iter()
                    .map(|(n, node)| (n.clone(), node.version.clone()))
                    .collect();
                assert_eq!(
                    got_nodes, expected,
                    "case {case}: node/version set mismatch"
                );
                resolved_cases += 1;
            }
            None => {
                assert!(
                    got.is_err(),
                    "case {case}: oracle says a root is unresolvable"
                );
                error_cases += 1;
            }
        }
    }
    let elapsed = started.elapsed();
    assert!(elapsed < Duration::from_secs(60), "took {elapsed:?}");
    println!(
        "PASS: criterion 4 (oracle equivalence): {CASES} registries \
         ({resolved_cases} resolved, {error_cases} root-error agreement), {elapsed:?}"
    );
}

// ---------------------------------------------------------------------------
// criterion 5: install order on random DAGs and cyclic graphs

fn graph_from_edges(n: usize, edges: &[(usize, usize)]) -> ResolvedGraph {
    let mut nodes = BTreeMap::new();
    for i in 0..n {
        nodes.insert(
            format!("node{i:02}"),
            ResolvedNode {
                source: Source::Cran,
                qualifier: String::new(),
                version: version("1.0"),
                published: date("2015-01-01"),
                sysreqs: String::new(),
                source_url: "https://example.invalid/x.tar.gz".to_string(),
            },
        );
    }
    ResolvedGraph {
        snapshot_date: date("2016-01-01"),
        r_version: version("3.2.3"),
        os: "ubuntu-18.04".to_string(),
        roots: vec![PackageRef::cran("node00")],
        nodes,
        edges: edges
            .iter()
            .map(|(from, to)| Edge {
                from: format!("node{from:02}"),
                to: format!("node{to:02}"),
                kind: DepKind::Imports,
            })
            .collect(),
        diagnostics: Vec::new(),
    }
}

#[test]
fn criterion_5_install_order() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x07de7);
    let mut acyclic_cases = 0usize;
    let mut cyclic_cases = 0usize;
    for case in 0..600 {
        let n = rng.gen_range(2..=30);
        // random topological shape: edges only from later to earlier ranks
        let mut rank: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            rank.swap(i, rng.gen_range(0..=i));
        }
        let mut edges = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if rank[i] > rank[j] && rng.gen_bool(0.15) {
                    edges.push((i, j));
                }
            }
        }
        let make_cycle = case % 4 == 3 && !edges.is_empty();
        if make_cycle {
            let &(from, to) = &edges[rng.gen_range(0..edges.len())];
            edges.push((to, from));
        }
        let graph = graph_from_edges(n, &edges);
        let ordering = install_order(&graph);

        let mut sorted = ordering.order.clone();
        sorted.sort();
        let mut names: Vec<String> = graph.nodes.keys().cloned().collect();
        names.sort();
        assert_eq!(
            sorted, names,
            "case {case}: order must be a complete permutation"
        );

        if make_cycle {
            assert!(
                !ordering.diagnostics.is_empty(),
                "case {case}: cycle must be diagnosed"
            );
            cyclic_cases += 1;
        } else {
            assert!(
                ordering.diagnostics.is_empty(),
                "case {case}: spurious cycle"
            );
            let position: BTreeMap<&String, usize> = ordering
                .order
                .iter()
                .enumerate()
                .map(|(i, name)| (name, i))
                .collect();
            for edge in &graph.edges {
                assert!(
                    position[&edge.to] < position[&edge.from],
                    "case {case}: {} must precede {}",
                    edge.to,
                    edge.from
                );
            }
            acyclic_cases += 1;
        }
    }
    println!(
        "PASS: criterion 5 (install order): {acyclic_cases} acyclic + {cyclic_cases} cyclic fixtures"
    );
}

#[test]
fn criterion_6_scanner_corpus() {
    let corpus = fixture_path("scan_corpus");
    let bioc: BiocNames = ["S4Vectors"].iter().map(|s| s.to_string()).collect();
    let cases: Vec<(&str, Vec<&str>)> = vec![
        ("2_analysis.R", vec!["cran::compute.es"]),
        ("0_data_aggregation.R", vec!["cran::car", "cran::dplyr"]),
        ("notes.Rmd", vec!["cran::metafor"]),
        ("DESCRIPTION", vec!["cran::pwr"]),
        ("strings_and_computed.R", vec![]),
        ("bioc_usage.R", vec!["bioc::S4Vectors"]),
    ];
    for (file_name, expected) in &cases {
        let dir = tempfile::tempdir().unwrap();
        std::fs::copy(corpus.join(file_name), dir.path().join(file_name)).unwrap();
        let outcome = scan_dir(dir.path(), &bioc).unwrap();
        let got: Vec<String> = outcome.refs.iter().map(ToString::to_string).collect();
        assert_eq!(&got, expected, "{file_name}");
    }
    println!(
        "PASS: criterion 6 (scanner corpus): {} files detected exactly, \
         commented-out loads ignored",
        cases.len()
    );
}

#[test]
fn criterion_7_determinism_goldens() {
    let registry = main_registry();
    let graph = resolve(
        &[PackageRef::cran("quanteda")],
        date("2018-10-06"),
        "ubuntu-18.04",
        &registry,
        &ResolveOptions::default(),
    )
    .unwrap();

    let lock = export_graph(&graph, ExportFormat::Lock);
    assert_eq!(
        lock,
        std::fs::read_to_string(golden_path("quanteda/quanteda.lock")).unwrap(),
        "lockfile deviates from golden"
    );

    let emit_into = |dir: &Path| {
        let plan = container::plan(
            &graph,
            PlanOptions {
                lib: Some("anotherlibrary".to_string()),
                output_dir: dir.to_path_buf(),
                ..PlanOptions::default()
            },
            RuleTable::shipped(),
        )
        .unwrap();
        container::emit(&plan).unwrap();
    };
    let run1 = tempfile::tempdir().unwrap();
    let run2 = tempfile::tempdir().unwrap();
    emit_into(&run1.path().join("d"));
    emit_into(&run2.path().join("d"));
    for name in ["Dockerfile", "install.sh", "install_order.txt"] {
        let a = std::fs::read(run1.path().join("d").join(name)).unwrap();
        let b = std::fs::read(run2.path().join("d").join(name)).unwrap();
        assert_eq!(a, b, "{name}: two runs differ");
        let golden = std::fs::read(golden_path("quanteda").join(name)).unwrap();
        assert_eq!(a, golden, "{name}: deviates from golden");
    }

    let plan = container::plan(
        &graph,
        PlanOptions {
            output_dir: run1.path().join("unused"),
            ..PlanOptions::default()
        },
        RuleTable::shipped(),
    )
    .unwrap();
    let makefile =
        container::emit_compendium(&plan, "oser", container::DEFAULT_RENDER_COMMAND).unwrap();
    assert_eq!(
        makefile,
        std::fs::read_to_string(golden_path("Makefile_oser")).unwrap(),
        "Makefile deviates from golden"
    );
    let targets: BTreeSet<&str> = makefile
        .lines()
        .filter(|l| {
            !l.starts_with('\t') && !l.starts_with('#') && l.contains(':') && !l.contains('=')
        })
        .map(|l| l.split(':').next().unwrap().trim())
        .collect();
    let expected: BTreeSet<&str> = ["all", "resolve", "build", "render", "export", "rebuild"]
        .into_iter()
        .collect();
    assert_eq!(targets, expected, "Makefile target set");
    assert!(makefile.contains("handle=oser"));
    println!(
        "PASS: criterion 7 (determinism goldens): 5 artifacts byte-identical and golden-equal"
    );
}

#[test]
fn criterion_8_hermeticity() {
    // Fixture mode must answer everything offline: point every endpoint at an
    // unresolvable host and run the whole pipeline.
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("cfg.toml"),
        r#"[endpoints]
cran_db = "http://nonexistent.invalid"
cran_mirror = "https://cran.r-project.org"
bioc = "https://bioconductor.org"
github_api = "http://nonexistent.invalid"
github_raw = "http://nonexistent.invalid"
github_codeload = "https://codeload.github.com"
"#,
    )
    .unwrap();
    let output = cli()
        .args([
            "resolve",
            "quanteda",
            "cran/maxent",
            "Sushi",
            "--date",
            "2018-10-06",
            "--config",
            "cfg.toml",
            "--output",
            "all.lock",
        ])
        .current_dir(dir.path())
        .output()
        .expect("binary runs");
    assert!(
        output.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    let output = cli()
        .args(["dockerize", "--lock", "all.lock", "--out", "docker"])
        .current_dir(dir.path())
        .output()
        .expect("binary runs");
    assert!(output.status.success());

    // and the registry reports the hermetic backend
    let registry = main_registry();
    assert!(registry.is_fixture());
    println!(
        "PASS: criterion 8 (hermeticity): full pipeline over CHRONO_REGISTRY fixtures \
         with unresolvable endpoints"
    );
}

// ---------------------------------------------------------------------------
// criterion 9: round-trip property suites (>= 10^4 cases, < 30 s)

fn random_name(rng: &mut ChaCha8Rng) -> String {
    const HEAD: &[u8] = b"abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ";
    const TAIL: &[u8] = b"abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789.";
    let len = rng.gen_range(1..10);
    let mut s = String::new();
    s.push(HEAD[rng.gen_range(0..HEAD.len())] as char);
    for _ in 1..len {
        s.push(TAIL[rng.gen_range(0..TAIL.len())] as char);
    }
    s
}

fn random_ref(rng: &mut ChaCha8Rng) -> PackageRef {
    let pin = if rng.gen_bool(0.4) {
        Some(format!(
            "{}.{}",
            rng.gen_range(0..20),
            rng.gen_range(0..100)
        ))
    } else {
        None
    };
    let r = match rng.gen_range(0..4) {
        0 => PackageRef::cran(random_name(rng)),
        1 => PackageRef::bioc(random_name(rng)),
        2 => PackageRef::github(&random_name(rng), &random_name(rng)),
        _ => {
            let depth = rng.gen_range(1..4);
            let segs: Vec<String> = (0..depth).map(|_| random_name(rng)).collect();
            PackageRef::local(&format!("./{}", segs.join("/"))).unwrap()
        }
    };
    match pin {
        Some(p) => r.with_pin(p),
        None => r,
    }
}

fn random_components(rng: &mut ChaCha8Rng) -> Vec<u64> {
    (0..rng.gen_range(1..6))
        .map(|_| rng.gen_range(0..1000))
        .collect()
}

fn padded_cmp(a: &[u64], b: &[u64]) -> std::cmp::Ordering {
    let width = a.len().max(b.len());
    let pad = |xs: &[u64]| {
        let mut out: Vec<i128> = xs.iter().map(|&x| x as i128).collect();
        out.resize(width, -1);
        out
    };
    pad(a).cmp(&pad(b))
}

fn random_lock_graph(rng: &mut ChaCha8Rng) -> ResolvedGraph {
    let n = rng.gen_range(1..8);
    let mut nodes = BTreeMap::new();
    for i in 0..n {
        let name = format!("{}{i}", random_name(rng));
        let source = match rng.gen_range(0..3) {
            0 => Source::Cran,
            1 => Source::Bioc,
            _ => Source::Github,
        };
        let qualifier = if source == Source::Github {
            format!("{}/{}", random_name(rng), name)
        } else {
            String::new()
        };
        let components = random_components(rng);
        let raw: Vec<String> = components.iter().map(u64::to_string).collect();
        nodes.insert(
            name.clone(),
            ResolvedNode {
                source,
                qualifier,
                version: Version::parse(&raw.join(".")).unwrap(),
                published: date("2002-01-01") + chrono::Duration::days(rng.gen_range(0..6000)),
                sysreqs: if rng.gen_bool(0.3) {
                    "GNU make".into()
                } else {
                    String::new()
                },
                source_url: format!("https://example.invalid/{name}.tar.gz"),
            },
        );
    }
    let names: Vec<String> = nodes.keys().cloned().collect();
    let mut edges = BTreeSet::new();
    for _ in 0..rng.gen_range(0..10) {
        let from = names[rng.gen_range(0..names.len())].clone();
        let to = names[rng.gen_range(0..names.len())].clone();
        edges.insert(Edge {
            from,
            to,
            kind: if rng.gen_bool(0.8) {
                DepKind::Imports
            } else {
                DepKind::Suggests
            },
        });
    }
    ResolvedGraph {
        snapshot_date: date("2002-01-01") + chrono::Duration::days(rng.gen_range(0..6000)),
        r_version: version("3.5.1"),
        os: "ubuntu-18.04".to_string(),
        roots: vec![PackageRef::cran(names[0].clone())],
        nodes,
        edges: edges.into_iter().collect(),
        diagnostics: Vec::new(),
    }
}

#[test]
fn criterion_9_round_trips() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x70a57);
    let empty = BiocNames::new();

    const REF_CASES: usize = 10_000;
    for _ in 0..REF_CASES {
        let r = random_ref(&mut rng);
        let rendered = render_ref(&r);
        let parsed = parse_ref(&rendered, &empty).unwrap();
        assert_eq!(parsed, r, "round-trip failed for {rendered}");
    }

    const VERSION_CASES: usize = 10_000;
    for _ in 0..VERSION_CASES {
        let a = random_components(&mut rng);
        let b = random_components(&mut rng);
        let raw = |xs: &[u64]| xs.iter().map(u64::to_string).collect::<Vec<_>>().join(".");
        let (va, vb) = (
            Version::parse(&raw(&a)).unwrap(),
            Version::parse(&raw(&b)).unwrap(),
        );
        assert_eq!(compare_versions(&va, &vb), padded_cmp(&a, &b));
        assert_eq!(
            compare_versions(&va, &vb),
            compare_versions(&vb, &va).reverse()
        );
    }

    const LOCK_CASES: usize = 300;
    for _ in 0..LOCK_CASES {
        let graph = random_lock_graph(&mut rng);
        let lock = export_graph(&graph, ExportFormat::Lock);
        let loaded = load_lock(&lock).unwrap();
        assert_eq!(loaded, graph);
        assert_eq!(export_graph(&loaded, ExportFormat::Lock), lock);
    }

    let elapsed = started.elapsed();
    assert!(elapsed < Duration::from_secs(30), "took {elapsed:?}");
    println!(
        "PASS: criterion 9 (round-trips): {REF_CASES} refs + {VERSION_CASES} version pairs \
         + {LOCK_CASES} lockfiles, {elapsed:?}"
    );
}
