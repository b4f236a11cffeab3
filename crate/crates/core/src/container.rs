//! Container build contexts: turn a resolved graph into a Dockerfile, an
//! install script, a cache manifest, a materials copy, and a compendium
//! Makefile.
//!
//! Emission is byte-deterministic given the plan: no timestamps, hostnames or
//! temporary paths appear in any output, so goldens can be compared bit for
//! bit and re-running over the same plan reproduces identical files.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::data;
use crate::error::{Error, Result};
use crate::metadata::Version;
use crate::pkgref::Source;
use crate::resolver::{install_order, ResolvedGraph};
use crate::sysreqs::{map_sysreqs, RuleTable};

/// Interpreter images come from the Rocker project for R >= 3.1; older
/// interpreters are compiled from source on an era-appropriate Debian.
const ROCKER_MIN_R: &str = "3.1";

/// Rocker image variants the plan accepts.
const ROCKER_IMAGES: &[&str] = &["r-ver", "rstudio"];

/// Base image choice for the build.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BaseImage {
    /// A Rocker project image (`rocker/{image}:{r_version}`).
    Rocker { image: String },
    /// Era-appropriate Debian plus an interpreter source build.
    DebianSourceBuild { from_ref: String },
}

impl BaseImage {
    pub fn is_rocker(&self) -> bool {
        matches!(self, BaseImage::Rocker { .. })
    }
}

/// One entry of the installation sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstallStep {
    pub name: String,
    pub version: String,
    /// Empty for local packages (installed from a copied directory).
    pub url: String,
    /// Source directory for local packages.
    pub local_path: Option<String>,
}

/// Options accepted by [`plan`].
#[derive(Debug, Clone)]
pub struct PlanOptions {
    /// Rocker image variant (`r-ver` when unset).
    pub image: Option<String>,
    /// Force the Debian source build even when a Rocker image exists.
    pub no_rocker: bool,
    /// Download every source tarball into `cache/` at emit time and install
    /// from the copy instead of the network.
    pub cache: bool,
    /// Install packages into this separate library inside the container.
    pub lib: Option<String>,
    /// Directory copied verbatim into the image as `/materials`.
    pub materials_dir: Option<PathBuf>,
    pub output_dir: PathBuf,
    /// Bounded parallelism for cache downloads.
    pub download_jobs: usize,
    /// Overwrite a non-empty output directory.
    pub force: bool,
}

impl Default for PlanOptions {
    fn default() -> Self {
        PlanOptions {
            image: None,
            no_rocker: false,
            cache: false,
            lib: None,
            materials_dir: None,
            output_dir: PathBuf::from("docker"),
            download_jobs: 4,
            force: false,
        }
    }
}

/// Everything needed to emit a build context.
#[derive(Debug, Clone)]
pub struct ContainerPlan {
    pub base: BaseImage,
    pub r_version: Version,
    pub os: String,
    /// Sorted OS package list (sysreqs mapping plus the build toolchain).
    pub os_packages: Vec<String>,
    /// Topological installation order with download locators.
    pub install_sequence: Vec<InstallStep>,
    pub cache: bool,
    pub lib: Option<String>,
    pub materials_dir: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub download_jobs: usize,
    pub force: bool,
    pub diagnostics: Vec<String>,
}

/// Decide the base image and assemble the installation plan for `graph`.
pub fn plan(
    graph: &ResolvedGraph,
    options: PlanOptions,
    rules: &RuleTable,
) -> Result<ContainerPlan> {
    if let Some(image) = &options.image {
        if !ROCKER_IMAGES.contains(&image.as_str()) {
            return Err(Error::InvalidOption(format!(
                "unknown image {image:?} (expected one of: {})",
                ROCKER_IMAGES.join(", ")
            )));
        }
        if options.no_rocker {
            return Err(Error::OptionConflict(
                "an image variant was requested together with no_rocker, \
                 but the Debian source build has no image variants"
                    .to_string(),
            ));
        }
    }
    if let Some(lib) = &options.lib {
        let p = Path::new(lib);
        if p.is_absolute() || lib.is_empty() {
            return Err(Error::InvalidOption(format!(
                "lib must be a relative directory name, got {lib:?}"
            )));
        }
        if p.components()
            .any(|c| matches!(c, std::path::Component::ParentDir))
        {
            return Err(Error::InvalidOption(format!(
                "lib may not contain '..' segments, got {lib:?}"
            )));
        }
    }
    if let Some(materials) = &options.materials_dir {
        if !materials.is_dir() {
            return Err(Error::io(
                materials,
                std::io::Error::new(std::io::ErrorKind::NotFound, "materials_dir not found"),
            ));
        }
    }

    let rocker_floor = Version::parse(ROCKER_MIN_R).expect("static version");
    let base = if options.no_rocker || graph.r_version < rocker_floor {
        let era = data::debian_era_for(&graph.r_version);
        let from_ref = match &era.digest {
            Some(digest) => format!("{}@{}", era.image, digest),
            None => era.image.clone(),
        };
        BaseImage::DebianSourceBuild { from_ref }
    } else {
        BaseImage::Rocker {
            image: options.image.clone().unwrap_or_else(|| "r-ver".to_string()),
        }
    };

    let mut diagnostics = Vec::new();

    let sysreq_texts: BTreeSet<&str> = graph
        .nodes
        .values()
        .map(|n| n.sysreqs.trim())
        .filter(|s| !s.is_empty())
        .collect();
    let texts: Vec<&str> = sysreq_texts.into_iter().collect();
    let mapping = map_sysreqs(&texts, &graph.os, rules)?;
    for text in &mapping.unmatched {
        diagnostics.push(format!("no OS package rule matched sysreqs {text:?}"));
    }
    let mut os_packages: BTreeSet<String> = mapping.packages.into_iter().collect();
    os_packages.insert("build-essential".to_string());

    let ordering = install_order(graph);
    diagnostics.extend(ordering.diagnostics.iter().cloned());
    let install_sequence = ordering
        .order
        .iter()
        .map(|name| {
            let node = &graph.nodes[name];
            InstallStep {
                name: name.clone(),
                version: node.version.raw().to_string(),
                url: node.source_url.clone(),
                local_path: (node.source == Source::Local).then(|| node.qualifier.clone()),
            }
        })
        .collect();

    Ok(ContainerPlan {
        base,
        r_version: graph.r_version.clone(),
        os: graph.os.clone(),
        os_packages: os_packages.into_iter().collect(),
        install_sequence,
        cache: options.cache,
        lib: options.lib,
        materials_dir: options.materials_dir,
        output_dir: options.output_dir,
        download_jobs: options.download_jobs.max(1),
        force: options.force,
        diagnostics,
    })
}

/// The full `rocker/{image}:{tag}` reference; isolated so a tag-scheme change
/// stays in one place.
fn rocker_image_ref(image: &str, r_version: &Version) -> String {
    format!("rocker/{image}:{}", r_version.raw())
}

/// Official source tarball location for an interpreter release. The 1.x
/// series was published as `.tgz`.
fn interpreter_source_url(cran_mirror: &str, r_version: &Version) -> String {
    let major = r_version.components().first().copied().unwrap_or(0);
    let ext = if major < 2 { "tgz" } else { "tar.gz" };
    format!(
        "{cran_mirror}/src/base/R-{major}/R-{}.{ext}",
        r_version.raw()
    )
}

/// Render the Dockerfile for `plan`.
pub fn dockerfile(plan: &ContainerPlan) -> String {
    let mut out = String::new();
    let apt_packages = {
        let mut pkgs: BTreeSet<&str> = plan.os_packages.iter().map(String::as_str).collect();
        pkgs.insert("ca-certificates");
        pkgs.insert("wget");
        pkgs
    };
    match &plan.base {
        BaseImage::Rocker { image } => {
            let _ = writeln!(out, "FROM {}", rocker_image_ref(image, &plan.r_version));
            out.push_str("ENV DEBIAN_FRONTEND=noninteractive\n");
            out.push_str(
                "RUN apt-get update \\\n    && apt-get install -y --no-install-recommends \\\n",
            );
            for pkg in &apt_packages {
                let _ = writeln!(out, "        {pkg} \\");
            }
            out.push_str("    && rm -rf /var/lib/apt/lists/*\n");
        }
        BaseImage::DebianSourceBuild { from_ref } => {
            let _ = writeln!(out, "FROM {from_ref}");
            out.push_str("ENV DEBIAN_FRONTEND=noninteractive\n");
            // Era toolchain for compiling the interpreter from source.
            let mut pkgs: BTreeSet<&str> = apt_packages;
            for extra in [
                "gfortran",
                "libbz2-dev",
                "libpcre3-dev",
                "libreadline-dev",
                "zlib1g-dev",
            ] {
                pkgs.insert(extra);
            }
            out.push_str("RUN apt-get update \\\n    && apt-get install -y --force-yes \\\n");
            for pkg in &pkgs {
                let _ = writeln!(out, "        {pkg} \\");
            }
            out.push_str("    && apt-get clean\n");
            let src = interpreter_source_url("https://cran.r-project.org", &plan.r_version);
            let tarball = src.rsplit('/').next().expect("url has a file name");
            let build_dir = format!("R-{}", plan.r_version.raw());
            let _ = writeln!(out, "RUN wget -q {src} \\");
            let _ = writeln!(out, "    && tar xzf {tarball} \\");
            let _ = writeln!(out, "    && cd {build_dir} \\");
            out.push_str("    && ./configure --prefix=/usr/local --without-x \\\n");
            out.push_str("    && make \\\n");
            out.push_str("    && make install \\\n");
            let _ = writeln!(out, "    && cd / \\\n    && rm -rf {build_dir} {tarball}");
        }
    }
    out.push_str("COPY install_order.txt /install_order.txt\n");
    out.push_str("COPY install.sh /install.sh\n");
    if plan.cache {
        out.push_str("COPY cache/ /cache/\n");
    }
    if plan.install_sequence.iter().any(|s| s.local_path.is_some()) {
        out.push_str("COPY local/ /local/\n");
    }
    out.push_str("RUN sh /install.sh\n");
    if plan.materials_dir.is_some() {
        out.push_str("COPY materials/ /materials/\n");
    }
    match &plan.base {
        BaseImage::Rocker { image } if image == "rstudio" => {
            // the rstudio image supplies its own init/entrypoint
            out.push_str("EXPOSE 8787\n");
        }
        _ => out.push_str("CMD [\"R\"]\n"),
    }
    out
}

/// Render the POSIX install script for `plan`.
///
/// The script walks `install_order.txt`, obtains each source tarball (from
/// `/cache` in cache mode, otherwise over the network), installs it with the
/// interpreter's own INSTALL entry point, and aborts on the first failure.
pub fn install_script(plan: &ContainerPlan) -> String {
    let mut out =
        String::from("#!/bin/sh\n# Installs pinned packages in dependency order.\nset -eu\n\n");
    let lib_flag = match &plan.lib {
        Some(lib) => {
            let _ = writeln!(out, "LIB_DIR=\"/{lib}\"");
            out.push_str("mkdir -p \"$LIB_DIR\"\n");
            out.push_str(
                "R_LIBS=\"$LIB_DIR\"\nR_LIBS_USER=\"$LIB_DIR\"\nexport R_LIBS R_LIBS_USER\n\n",
            );
            " -l \"$LIB_DIR\""
        }
        None => "",
    };
    out.push_str("while IFS=\"$(printf '\\t')\" read -r name version url; do\n");
    out.push_str("    [ -n \"$name\" ] || continue\n");
    out.push_str("    if [ -z \"$url\" ]; then\n");
    let _ = writeln!(out, "        R CMD INSTALL{lib_flag} \"/local/$name\"");
    out.push_str("        continue\n");
    out.push_str("    fi\n");
    out.push_str("    tarball=\"${name}_${version}.tar.gz\"\n");
    if plan.cache {
        out.push_str("    cp \"/cache/$tarball\" \"$tarball\"\n");
    } else {
        out.push_str("    wget -q -O \"$tarball\" \"$url\"\n");
    }
    let _ = writeln!(out, "    R CMD INSTALL{lib_flag} \"$tarball\"");
    out.push_str("    rm -f \"$tarball\"\ndone < /install_order.txt\n");
    out
}

/// Render `install_order.txt`: one `name<TAB>version<TAB>url` line per
/// package in installation order.
pub fn install_order_manifest(plan: &ContainerPlan) -> String {
    let mut out = String::new();
    for step in &plan.install_sequence {
        let _ = writeln!(out, "{}\t{}\t{}", step.name, step.version, step.url);
    }
    out
}

/// Emit the build context into `plan.output_dir`; returns the written files.
pub fn emit(plan: &ContainerPlan) -> Result<Vec<PathBuf>> {
    let out_dir = &plan.output_dir;
    if out_dir.exists() {
        let occupied = std::fs::read_dir(out_dir)
            .map_err(|e| Error::io(out_dir, e))?
            .next()
            .is_some();
        if occupied && !plan.force {
            return Err(Error::OutputCollision(out_dir.clone()));
        }
    }
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let mut written = Vec::new();

    write_atomic(&out_dir.join("Dockerfile"), dockerfile(plan).as_bytes())?;
    written.push(out_dir.join("Dockerfile"));
    write_atomic(&out_dir.join("install.sh"), install_script(plan).as_bytes())?;
    written.push(out_dir.join("install.sh"));
    write_atomic(
        &out_dir.join("install_order.txt"),
        install_order_manifest(plan).as_bytes(),
    )?;
    written.push(out_dir.join("install_order.txt"));

    if plan.cache {
        let cache_dir = out_dir.join("cache");
        std::fs::create_dir_all(&cache_dir).map_err(|e| Error::io(&cache_dir, e))?;
        let remote: Vec<&InstallStep> = plan
            .install_sequence
            .iter()
            .filter(|s| s.local_path.is_none())
            .collect();
        let bodies = download_all(&remote, plan.download_jobs)?;
        for (step, body) in remote.iter().zip(bodies) {
            let path = cache_dir.join(format!("{}_{}.tar.gz", step.name, step.version));
            write_atomic(&path, &body)?;
            written.push(path);
        }
    }

    let locals: Vec<&InstallStep> = plan
        .install_sequence
        .iter()
        .filter(|s| s.local_path.is_some())
        .collect();
    if !locals.is_empty() {
        let local_root = out_dir.join("local");
        for step in locals {
            let src = PathBuf::from(step.local_path.as_deref().expect("filtered on local_path"));
            copy_dir(&src, &local_root.join(&step.name), &mut written)?;
        }
    }

    if let Some(materials) = &plan.materials_dir {
        copy_dir(materials, &out_dir.join("materials"), &mut written)?;
    }

    written.sort();
    Ok(written)
}

/// Fetch every step's tarball with bounded parallelism; the first failure (in
/// sequence order) wins.
fn download_all(steps: &[&InstallStep], jobs: usize) -> Result<Vec<Vec<u8>>> {
    let mut results: Vec<Option<Result<Vec<u8>>>> = Vec::new();
    results.resize_with(steps.len(), || None);
    for wave in (0..steps.len()).collect::<Vec<_>>().chunks(jobs.max(1)) {
        std::thread::scope(|scope| {
            let mut handles = Vec::new();
            for &idx in wave {
                let step = steps[idx];
                handles.push((idx, scope.spawn(move || fetch_url(&step.url, &step.name))));
            }
            for (idx, handle) in handles {
                results[idx] = Some(handle.join().expect("download worker does not panic"));
            }
        });
    }
    results
        .into_iter()
        .map(|r| r.expect("every index populated"))
        .collect()
}

/// Fetch a source artifact. `file://` URLs read the local filesystem (useful
/// for mirrors and hermetic tests); anything else goes over HTTP.
fn fetch_url(url: &str, name: &str) -> Result<Vec<u8>> {
    let fail = |reason: String| Error::Download {
        name: name.to_string(),
        url: url.to_string(),
        reason,
    };
    if let Some(path) = url.strip_prefix("file://") {
        return std::fs::read(path).map_err(|e| fail(e.to_string()));
    }
    if !(url.starts_with("http://") || url.starts_with("https://")) {
        return Err(fail("unsupported URL scheme".to_string()));
    }
    let response = reqwest::blocking::get(url).map_err(|e| fail(e.to_string()))?;
    if !response.status().is_success() {
        return Err(fail(format!("server answered {}", response.status())));
    }
    response
        .bytes()
        .map(|b| b.to_vec())
        .map_err(|e| fail(e.to_string()))
}

/// Copy a directory tree verbatim (sorted traversal, atomic per file).
fn copy_dir(src: &Path, dst: &Path, written: &mut Vec<PathBuf>) -> Result<()> {
    std::fs::create_dir_all(dst).map_err(|e| Error::io(dst, e))?;
    let mut entries: Vec<_> = std::fs::read_dir(src)
        .map_err(|e| Error::io(src, e))?
        .collect::<std::io::Result<Vec<_>>>()
        .map_err(|e| Error::io(src, e))?;
    entries.sort_by_key(|e| e.file_name());
    for entry in entries {
        let from = entry.path();
        let to = dst.join(entry.file_name());
        if from.is_dir() {
            copy_dir(&from, &to, written)?;
        } else {
            let bytes = std::fs::read(&from).map_err(|e| Error::io(&from, e))?;
            write_atomic(&to, &bytes)?;
            written.push(to);
        }
    }
    Ok(())
}

/// Write via a sibling temp file and rename, so readers never see a partial
/// file.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let file_name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = path.with_file_name(format!(".{file_name}.tmp"));
    std::fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Default command the compendium Makefile runs inside the container.
pub const DEFAULT_RENDER_COMMAND: &str =
    "rmarkdown::render('materials/README.Rmd', output_file = '${output_file}')";

/// Render the executable-compendium Makefile.
///
/// Targets: `all` (resolve, build, render), `resolve` (regenerate the build
/// context from the lockfile), `build`, `render`, `export`, `rebuild`.
/// `handle` must be a bare filename stem; it names the docker directory
/// (`{handle}docker`), the image (`{handle}img`) and the saved image archive.
pub fn emit_compendium(plan: &ContainerPlan, handle: &str, render_command: &str) -> Result<String> {
    if handle.is_empty()
        || !handle
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-'))
    {
        return Err(Error::InvalidOption(format!(
            "handle must be a plain filename stem without path separators, got {handle:?}"
        )));
    }

    let mut resolve_flags = String::new();
    if plan.cache {
        resolve_flags.push_str(" --cache");
    }
    if let Some(lib) = &plan.lib {
        let _ = write!(resolve_flags, " --lib {lib}");
    }
    if let Some(materials) = &plan.materials_dir {
        let _ = write!(resolve_flags, " --materials {}", materials.display());
    }
    match &plan.base {
        BaseImage::Rocker { image } if image != "r-ver" => {
            let _ = write!(resolve_flags, " --image {image}");
        }
        BaseImage::Rocker { .. } => {}
        BaseImage::DebianSourceBuild { .. } => {
            let rocker_floor = Version::parse(ROCKER_MIN_R).expect("static version");
            if plan.r_version >= rocker_floor {
                resolve_flags.push_str(" --no-rocker");
            }
        }
    }

    let mut out = String::new();
    out.push_str("output_file=reproduced.html\n");
    let _ = writeln!(out, "r_cmd = \"{render_command}\"");
    let _ = writeln!(out, "handle={handle}");
    out.push_str("local_file=${handle}_README.html\n");
    out.push('\n');
    out.push_str("all: resolve build render\n");
    out.push_str("\techo \"finished\"\n\n");
    out.push_str("resolve:\n");
    let _ = writeln!(
        out,
        "\tchronoenv dockerize --lock ${{handle}}.lock --out ${{handle}}docker --force{resolve_flags}"
    );
    out.push('\n');
    out.push_str("build: ${handle}docker\n");
    out.push_str("\tdocker build -t ${handle}img ${handle}docker\n\n");
    out.push_str("render:\n");
    out.push_str("\tdocker run -d --rm --name \"${handle}container\" -ti ${handle}img\n");
    out.push_str("\tdocker exec ${handle}container Rscript -e ${r_cmd}\n");
    out.push_str("\tdocker cp ${handle}container:/materials/${output_file} ${local_file}\n");
    out.push_str("\tdocker stop ${handle}container\n\n");
    out.push_str("export:\n");
    out.push_str("\tdocker save ${handle}img | gzip > ${handle}img.tar.gz\n\n");
    out.push_str("rebuild: ${handle}img.tar.gz\n");
    out.push_str("\tdocker load < ${handle}img.tar.gz\n");
    Ok(out)
}
