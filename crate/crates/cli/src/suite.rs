//! Suite configuration, flag overrides, and execution.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use martlab_core::generators::GeneratorSpec;
use martlab_core::registry::{CheckConfig, CheckReport};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::checks;
use crate::error::{CliError, Result};

/// One check in a suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteEntry {
    pub check: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    /// Generator override for checks that draw martingales.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corpus: Option<GeneratorSpec>,
    /// Tree-file corpus replacing the generator.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corpus_file: Option<PathBuf>,
}

impl SuiteEntry {
    pub fn new(check: &str) -> Self {
        Self {
            check: check.to_owned(),
            params: BTreeMap::new(),
            trials: None,
            depth: None,
            seed: None,
            tol: None,
            corpus: None,
            corpus_file: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// Global tolerance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    /// Per-check tolerance overrides.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub tolerances: BTreeMap<String, f64>,
    #[serde(default)]
    pub checks: Vec<SuiteEntry>,
}

/// Command-line values; each one set replaces the config's.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub depth: Option<usize>,
    pub tol: Option<f64>,
    pub out: Option<PathBuf>,
}

/// Checks run by `suite` without a config: everything except the
/// `aux_lemmas` aggregate, which repeats its parts.
pub fn default_suite() -> SuiteConfig {
    let checks = checks::list().into_iter().filter(|(n, _)| *n != "aux_lemmas").map(|(n, _)| SuiteEntry::new(n)).collect();
    SuiteConfig { checks, ..Default::default() }
}

impl SuiteConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| CliError::File { path: path.display().to_string(), source })?;
        serde_json::from_str(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
    }

    /// Apply flags, check names and tolerances, and produce one
    /// [`CheckConfig`] per entry.
    pub fn resolve(mut self, o: &Overrides) -> Result<ResolvedSuite> {
        if self.checks.is_empty() {
            return Err(CliError::usage("suite config lists no checks"));
        }
        let seed = o.seed.or(self.seed).ok_or_else(|| CliError::usage("--seed is required (or `seed` in the config)"))?;
        if let Some(out) = &o.out {
            self.out = Some(out.clone());
        }
        for (name, t) in &self.tolerances {
            checks::require(name)?;
            validate_tol(*t)?;
        }
        let mut entries = Vec::with_capacity(self.checks.len());
        for e in self.checks {
            checks::require(&e.check)?;
            let tol = o.tol.or(e.tol).or_else(|| self.tolerances.get(&e.check).copied()).or(self.tol);
            if let Some(t) = tol {
                validate_tol(t)?;
            }
            let cfg = CheckConfig {
                check: e.check,
                params: e.params,
                trials: o.trials.or(e.trials),
                depth: o.depth.or(e.depth),
                seed: o.seed.or(e.seed).unwrap_or(seed),
                tol,
                corpus: e.corpus,
            };
            entries.push((cfg, e.corpus_file));
        }
        Ok(ResolvedSuite { seed, out: self.out, entries })
    }
}

fn validate_tol(t: f64) -> Result<()> {
    if t >= 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(CliError::usage(format!("tolerance must be finite and nonnegative, got {t}")))
    }
}

#[derive(Debug, Clone)]
pub struct ResolvedSuite {
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub entries: Vec<(CheckConfig, Option<PathBuf>)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub seed: u64,
    pub passed: bool,
    pub violations: usize,
    pub reports: Vec<CheckReport>,
}

impl ResolvedSuite {
    /// Run every entry (in parallel); reports keep the config order. Corpus
    /// files are all loaded before any check starts.
    pub fn run(&self) -> Result<SuiteReport> {
        let corpora = self
            .entries
            .iter()
            .map(|(_, f)| f.as_deref().map(checks::load_corpus).transpose())
            .collect::<Result<Vec<_>>>()?;
        let reports = self
            .entries
            .par_iter()
            .zip(&corpora)
            .map(|((cfg, _), corpus)| checks::run(cfg, corpus.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        let violations = reports.iter().map(|r| r.violations).sum();
        Ok(SuiteReport { seed: self.seed, passed: violations == 0, violations, reports })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_or_unknown_is_a_usage_error() {
        let o = Overrides { seed: Some(1), ..Default::default() };
        assert!(matches!(SuiteConfig::default().resolve(&o), Err(CliError::Usage(_))));
        let c = SuiteConfig { checks: vec![SuiteEntry::new("dob")], ..Default::default() };
        assert!(matches!(c.resolve(&o), Err(CliError::Usage(_))));
        let c = SuiteConfig { checks: vec![SuiteEntry::new("doob")], ..Default::default() };
        assert!(matches!(c.resolve(&Overrides::default()), Err(CliError::Usage(_))));
    }

    #[test]
    fn flags_override_config() {
        let mut e = SuiteEntry::new("doob");
        e.trials = Some(10);
        e.seed = Some(4);
        e.tol = Some(1e-6);
        let c = SuiteConfig { seed: Some(3), tol: Some(1e-3), checks: vec![e, SuiteEntry::new("lepingle")], ..Default::default() };
        let r = c.clone().resolve(&Overrides::default()).unwrap();
        assert_eq!((r.entries[0].0.seed, r.entries[0].0.trials, r.entries[0].0.tol), (4, Some(10), Some(1e-6)));
        assert_eq!((r.entries[1].0.seed, r.entries[1].0.tol), (3, Some(1e-3)));
        let o = Overrides { seed: Some(9), trials: Some(5), depth: Some(3), tol: Some(0.0), out: Some("x.json".into()) };
        let r = c.resolve(&o).unwrap();
        assert!(r.entries.iter().all(|(c, _)| c.seed == 9 && c.trials == Some(5) && c.depth == Some(3) && c.tol == Some(0.0)));
        assert_eq!(r.out, Some(PathBuf::from("x.json")));
    }

    #[test]
    fn default_suite_covers_every_layer() {
        let s = default_suite();
        for name in ["doob", "lepingle", "ito_refinement", "rde", "bellman"] {
            assert!(s.checks.iter().any(|e| e.check == name), "{name}");
        }
        assert!(!s.checks.iter().any(|e| e.check == "aux_lemmas"));
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(serde_json::from_str::<SuiteConfig>(r#"{"checks": [], "sed": 1}"#).is_err());
        let c: SuiteConfig = serde_json::from_str(r#"{"seed": 2, "checks": [{"check": "doob", "params": {"p": 4}}]}"#).unwrap();
        assert_eq!(c.checks[0].params["p"], 4);
    }
}
