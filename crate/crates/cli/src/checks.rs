//! One namespace over the core registry, the Itô checks and the CLI's layer
//! checks.

use std::path::Path;

use martlab_core::io::TreeFile;
use martlab_core::registry::{self, CheckConfig, CheckReport, FileCorpus};
use serde::Deserialize;

use crate::error::{CliError, Result};
use crate::layers;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Core,
    Ito,
    Layer,
}

pub fn family(name: &str) -> Option<Family> {
    if registry::check_info(name).is_some() {
        Some(Family::Core)
    } else if martlab_ito::check::is_ito_check(name) {
        Some(Family::Ito)
    } else if layers::is_layer_check(name) {
        Some(Family::Layer)
    } else {
        None
    }
}

/// `(name, summary)` for every check, grouped by layer.
pub fn list() -> Vec<(&'static str, &'static str)> {
    registry::CHECKS
        .iter()
        .map(|c| (c.name, c.summary))
        .chain(martlab_ito::check::CHECKS.iter().copied())
        .chain(layers::CHECKS.iter().copied())
        .collect()
}

pub fn require(name: &str) -> Result<Family> {
    family(name).ok_or_else(|| CliError::usage(format!("unknown check {name:?}; see `martlab list-checks`")))
}

pub fn run(cfg: &CheckConfig, corpus: Option<&FileCorpus>) -> Result<CheckReport> {
    let fam = require(&cfg.check)?;
    if corpus.is_some() && fam != Family::Core {
        return Err(CliError::usage(format!("check {} does not take a file corpus", cfg.check)));
    }
    match fam {
        Family::Core => registry::run_check_with(cfg, corpus).map_err(core_error),
        Family::Ito => martlab_ito::check::run_check(cfg).map_err(|e| match e {
            martlab_ito::Error::InvalidParameter(m) => CliError::Usage(m),
            e => e.into(),
        }),
        Family::Layer => layers::run_check(cfg),
    }
}

/// Parameter problems are usage errors; everything else stays as is.
fn core_error(e: martlab_core::Error) -> CliError {
    match e {
        martlab_core::Error::InvalidParameter(m) => CliError::Usage(m),
        martlab_core::Error::UnknownCheck(m) => CliError::Usage(format!("unknown check {m:?}")),
        e => e.into(),
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum CorpusFile {
    Many(Vec<TreeFile>),
    One(TreeFile),
}

/// A corpus file holds one tree file or a list of them; every process in
/// each file (in name order) becomes one trial.
pub fn load_corpus(path: &Path) -> Result<FileCorpus> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| CliError::File { path: path.display().to_string(), source })?;
    let files = match serde_json::from_str::<CorpusFile>(&text)? {
        CorpusFile::Many(v) => v,
        CorpusFile::One(f) => vec![f],
    };
    let mut processes = Vec::new();
    for f in &files {
        let (_, procs) = f.load()?;
        processes.extend(procs.into_values());
    }
    if processes.is_empty() {
        return Err(CliError::usage(format!("{}: corpus has no processes", path.display())));
    }
    Ok(FileCorpus { processes })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_are_unique_and_resolve() {
        let all = list();
        let mut names: Vec<_> = all.iter().map(|c| c.0).collect();
        names.sort_unstable();
        names.dedup();
        assert_eq!(names.len(), all.len());
        assert_eq!(family("doob"), Some(Family::Core));
        assert_eq!(family("ito_identities"), Some(Family::Ito));
        assert_eq!(family("rde"), Some(Family::Layer));
        assert!(matches!(require("nope"), Err(CliError::Usage(_))));
    }

    #[test]
    fn parameter_errors_are_usage_errors() {
        let c = CheckConfig::new("doob", 1).param("p", 0.5);
        assert!(matches!(run(&c, None), Err(CliError::Usage(_))));
        let c = CheckConfig::new("ito_bound", 1).param("r", 0.5);
        assert!(matches!(run(&c, None), Err(CliError::Usage(_))));
    }
}
