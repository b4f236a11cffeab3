//! Command-line front end: resolve, dockerize, scan, export, compendium.
//!
//! Exit codes: 0 on success, 1 on operational failures (with a
//! machine-readable `error: <category>: <message>` line on stderr), 2 on
//! usage errors. Standard output carries data; diagnostics go to stderr.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};

use crate::config::{self, Config};
use crate::container::{self, PlanOptions, DEFAULT_RENDER_COMMAND};
use crate::error::{Error, Result};
use crate::pkgref::{parse_ref_with_diagnostics, PackageRef};
use crate::registry::SnapshotRegistry;
use crate::resolver::{self, ExportFormat, ResolveOptions};
use crate::scanner;
use crate::sysreqs::RuleTable;

const DEFAULT_OS: &str = "ubuntu-18.04";
const DEFAULT_LOCKFILE: &str = "chronoenv.lock";

#[derive(Parser)]
#[command(
    name = "chronoenv",
    version,
    about = "Reconstructs date-pinned R environments as container build recipes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Fixture registry directory (overrides CHRONO_REGISTRY).
    #[arg(long, global = true, value_name = "DIR")]
    registry: Option<PathBuf>,

    /// TOML config file with endpoint overrides.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Extra Bioconductor package names for shorthand disambiguation
    /// (one per line, # comments).
    #[arg(long, global = true, value_name = "FILE")]
    bioc_names: Option<PathBuf>,

    /// Alternate sysreqs rule table (JSON).
    #[arg(long, global = true, value_name = "FILE")]
    sysreqs: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Resolve the dependency graph at a snapshot date and write a lockfile.
    Resolve(ResolveArgs),
    /// Generate a container build context from a lockfile.
    Dockerize(DockerizeArgs),
    /// Scan a project directory and print one canonical reference per line.
    Scan(ScanArgs),
    /// Print a lockfile's graph as dot, edgelist, or canonical lock JSON.
    Export(ExportArgs),
    /// Write an executable-compendium Makefile next to a lockfile copy.
    Compendium(CompendiumArgs),
}

#[derive(Args)]
struct ResolveArgs {
    /// Package references (cran::pkg, bioc::pkg, owner/repo, local::path,
    /// bare shorthands).
    refs: Vec<String>,

    /// Snapshot date (YYYY-MM-DD). Required: a default would silently change
    /// results from day to day.
    #[arg(long)]
    date: NaiveDate,

    /// Target OS identifier for system-requirements mapping.
    #[arg(long, default_value = DEFAULT_OS)]
    os: String,

    /// Also scan this directory for package usage.
    #[arg(long, value_name = "DIR")]
    scan: Option<PathBuf>,

    /// Lockfile path to write.
    #[arg(long, default_value = DEFAULT_LOCKFILE, value_name = "FILE")]
    output: PathBuf,

    /// Follow Suggests/Enhances edges too.
    #[arg(long)]
    include_suggests: bool,
}

#[derive(Args)]
struct DockerizeArgs {
    /// Lockfile produced by `resolve`.
    #[arg(long, value_name = "FILE")]
    lock: PathBuf,

    /// Output directory for the build context.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,

    /// Download all source tarballs now and install from the copies.
    #[arg(long)]
    cache: bool,

    /// Install packages into a separate library of this name.
    #[arg(long, value_name = "NAME")]
    lib: Option<String>,

    /// Copy this directory into the image as /materials.
    #[arg(long, value_name = "DIR")]
    materials: Option<PathBuf>,

    /// Rocker image variant (r-ver, rstudio).
    #[arg(long, value_name = "NAME")]
    image: Option<String>,

    /// Use the Debian source build even when a Rocker image exists.
    #[arg(long)]
    no_rocker: bool,

    /// Overwrite a non-empty output directory.
    #[arg(long)]
    force: bool,

    /// Parallel cache downloads.
    #[arg(long, default_value_t = 4)]
    jobs: usize,
}

#[derive(Args)]
struct ScanArgs {
    /// Project directory.
    dir: PathBuf,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long, value_name = "FILE")]
    lock: PathBuf,

    /// dot, edgelist, or lock.
    #[arg(long)]
    format: String,
}

#[derive(Args)]
struct CompendiumArgs {
    #[arg(long, value_name = "FILE")]
    lock: PathBuf,

    /// Filename stem for the compendium (directory {handle}docker, image
    /// {handle}img).
    #[arg(long)]
    handle: String,

    /// Directory to write the Makefile and lockfile copy into.
    #[arg(long, default_value = ".", value_name = "DIR")]
    out: PathBuf,

    /// Materials directory the build context will copy.
    #[arg(long, value_name = "DIR")]
    materials: Option<PathBuf>,

    /// Command run inside the container by `make render`.
    #[arg(long, value_name = "RCODE")]
    render_cmd: Option<String>,

    #[arg(long)]
    cache: bool,

    #[arg(long, value_name = "NAME")]
    lib: Option<String>,

    #[arg(long, value_name = "NAME")]
    image: Option<String>,

    #[arg(long)]
    no_rocker: bool,
}

/// Parse arguments and run; the returned code is the process exit status.
pub fn run() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Resolve(args) => cmd_resolve(&cli, args),
        Command::Dockerize(args) => cmd_dockerize(&cli, args),
        Command::Scan(args) => cmd_scan(&cli, args),
        Command::Export(args) => cmd_export(args),
        Command::Compendium(args) => cmd_compendium(&cli, args),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}: {e}", e.category());
            ExitCode::from(1)
        }
    }
}

fn load_config(cli: &Cli) -> Result<Config> {
    match &cli.config {
        Some(path) => Config::load(path),
        None => Ok(Config::default()),
    }
}

fn build_registry(cli: &Cli) -> Result<SnapshotRegistry> {
    let cfg = load_config(cli)?;
    let mut registry = match cli.registry.clone().or_else(config::registry_dir_from_env) {
        Some(dir) => {
            let store = crate::registry::FixtureStore::load(&dir)?;
            SnapshotRegistry::from_store(store, cfg.endpoints)
        }
        None => SnapshotRegistry::live(cfg.endpoints, config::cache_dir_from_env()),
    };
    if let Some(path) = &cli.bioc_names {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        registry.add_bioc_names(crate::data::parse_bioc_names(&text));
    }
    Ok(registry)
}

fn rule_table(cli: &Cli) -> Result<std::borrow::Cow<'static, RuleTable>> {
    match &cli.sysreqs {
        Some(path) => Ok(std::borrow::Cow::Owned(RuleTable::from_file(path)?)),
        None => Ok(std::borrow::Cow::Borrowed(RuleTable::shipped())),
    }
}

fn warn_all(diagnostics: &[String]) {
    for d in diagnostics {
        eprintln!("warning: {d}");
    }
}

fn cmd_resolve(cli: &Cli, args: &ResolveArgs) -> Result<ExitCode> {
    let registry = build_registry(cli)?;
    warn_all(registry.store_diagnostics());

    let mut diagnostics = Vec::new();
    let mut refs: Vec<PackageRef> = Vec::new();
    for raw in &args.refs {
        let r = parse_ref_with_diagnostics(raw, registry.bioc_names(), &mut diagnostics)?;
        if !refs.contains(&r) {
            refs.push(r);
        }
    }
    if let Some(dir) = &args.scan {
        let outcome = scanner::scan_dir(dir, registry.bioc_names())?;
        diagnostics.extend(outcome.diagnostics);
        for r in outcome.refs {
            if !refs.contains(&r) {
                refs.push(r);
            }
        }
    }
    if refs.is_empty() {
        eprintln!("error: usage: provide package references or --scan DIR");
        return Ok(ExitCode::from(2));
    }
    warn_all(&diagnostics);

    let options = ResolveOptions {
        include_suggests: args.include_suggests,
        r_version_override: None,
    };
    let graph = resolver::resolve(&refs, args.date, &args.os, &registry, &options)?;
    warn_all(&graph.diagnostics);

    let lock = resolver::export_graph(&graph, ExportFormat::Lock);
    std::fs::write(&args.output, lock).map_err(|e| Error::io(&args.output, e))?;

    println!("snapshot_date: {}", graph.snapshot_date);
    println!("r_version: {}", graph.r_version);
    println!("roots: {}", graph.roots.len());
    println!("nodes: {}", graph.nodes.len());
    println!("lockfile: {}", args.output.display());
    Ok(ExitCode::SUCCESS)
}

fn load_graph(path: &Path) -> Result<resolver::ResolvedGraph> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    resolver::load_lock(&text)
}

fn cmd_dockerize(cli: &Cli, args: &DockerizeArgs) -> Result<ExitCode> {
    let graph = load_graph(&args.lock)?;
    warn_all(&graph.diagnostics);
    let rules = rule_table(cli)?;
    let options = PlanOptions {
        image: args.image.clone(),
        no_rocker: args.no_rocker,
        cache: args.cache,
        lib: args.lib.clone(),
        materials_dir: args.materials.clone(),
        output_dir: args.out.clone(),
        download_jobs: args.jobs,
        force: args.force,
    };
    let plan = container::plan(&graph, options, rules.as_ref())?;
    warn_all(&plan.diagnostics);
    let written = container::emit(&plan)?;
    for path in written {
        println!("{}", path.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_scan(cli: &Cli, args: &ScanArgs) -> Result<ExitCode> {
    // Scanning only needs the name list; avoid constructing a live registry.
    let mut bioc_names = crate::data::shipped_bioc_names().clone();
    if let Some(dir) = cli.registry.clone().or_else(config::registry_dir_from_env) {
        let store = crate::registry::FixtureStore::load(&dir)?;
        bioc_names.extend(store.bioc_package_names().cloned());
    }
    if let Some(path) = &cli.bioc_names {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        bioc_names.extend(crate::data::parse_bioc_names(&text));
    }
    let outcome = scanner::scan_dir(&args.dir, &bioc_names)?;
    warn_all(&outcome.diagnostics);
    for r in outcome.refs {
        println!("{r}");
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_export(args: &ExportArgs) -> Result<ExitCode> {
    let graph = load_graph(&args.lock)?;
    warn_all(&graph.diagnostics);
    let format: ExportFormat = args.format.parse()?;
    print!("{}", resolver::export_graph(&graph, format));
    Ok(ExitCode::SUCCESS)
}

fn cmd_compendium(cli: &Cli, args: &CompendiumArgs) -> Result<ExitCode> {
    let graph = load_graph(&args.lock)?;
    warn_all(&graph.diagnostics);
    let rules = rule_table(cli)?;
    let options = PlanOptions {
        image: args.image.clone(),
        no_rocker: args.no_rocker,
        cache: args.cache,
        lib: args.lib.clone(),
        materials_dir: args.materials.clone(),
        output_dir: args.out.join(format!("{}docker", args.handle)),
        download_jobs: 4,
        force: true,
    };
    let plan = container::plan(&graph, options, rules.as_ref())?;
    warn_all(&plan.diagnostics);
    let render_cmd = args
        .render_cmd
        .clone()
        .unwrap_or_else(|| DEFAULT_RENDER_COMMAND.to_string());
    let makefile = container::emit_compendium(&plan, &args.handle, &render_cmd)?;

    std::fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
    let makefile_path = args.out.join("Makefile");
    std::fs::write(&makefile_path, makefile).map_err(|e| Error::io(&makefile_path, e))?;
    let lock_copy = args.out.join(format!("{}.lock", args.handle));
    std::fs::copy(&args.lock, &lock_copy).map_err(|e| Error::io(&lock_copy, e))?;

    println!("{}", makefile_path.display());
    println!("{}", lock_copy.display());
    Ok(ExitCode::SUCCESS)
}
