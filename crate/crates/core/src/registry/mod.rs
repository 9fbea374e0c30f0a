//! Named verification procedures. Each check draws (or loads) a corpus,
//! evaluates both sides of one or more inequalities on every trial, and
//! summarises the result in a [`CheckReport`].
//!
//! A trial's ratio is `max(lhs − 1e-10, 0) / (C · rhs)`, maximised over the
//! inequalities the trial asserts; it is a violation when the ratio exceeds
//! `1 + tol`. Quantities with unspecified constants are only measured and
//! land in `measurements`.

mod aux;
mod davis;
mod doob;
mod lepingle;
pub mod quad;
mod sampling;
mod vector;

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::generators::GeneratorSpec;
use crate::process::{Martingale, TreeProcess};
use crate::rng;

/// Absolute slack subtracted from the left-hand side before forming ratios.
pub const ABS_TOL: f64 = 1e-10;
/// Default relative tolerance on ratios.
pub const DEFAULT_TOL: f64 = 1e-9;

/// A real that serializes non-finite values as strings (`"inf"`, `"-inf"`,
/// `"nan"`), since JSON numbers cannot hold them.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct Real(pub f64);

impl Serialize for Real {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let v = self.0;
        if v.is_finite() {
            s.serialize_f64(v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }
}

impl<'de> Deserialize<'de> for Real {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Str(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(Real(v)),
            Repr::Str(s) => match s.as_str() {
                "inf" => Ok(Real(f64::INFINITY)),
                "-inf" => Ok(Real(f64::NEG_INFINITY)),
                "nan" => Ok(Real(f64::NAN)),
                other => Err(serde::de::Error::custom(format!("not a real: {other}"))),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub check: String,
    pub params: BTreeMap<String, Value>,
    pub trials: usize,
    pub violations: usize,
    pub hypothesis_failures: usize,
    pub worst_ratio: Real,
    pub constant_used: Real,
    pub seed: u64,
    pub runtime_ms: u64,
    /// Measured maxima (or counts) of quantities without an asserted constant.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub measurements: BTreeMap<String, Real>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }

    pub fn measurement(&self, key: &str) -> Option<f64> {
        self.measurements.get(key).map(|r| r.0)
    }
}

/// How a corpus of martingales is drawn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    #[serde(flatten)]
    pub generator: GeneratorSpec,
    pub trials: usize,
    pub seed: u64,
}

impl CorpusSpec {
    pub fn trial(&self, index: usize) -> Result<Martingale> {
        self.generator.trial(self.seed, index)
    }
}

/// One check invocation. Unset fields fall back to the check's defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CheckConfig {
    pub check: String,
    #[serde(default)]
    pub params: BTreeMap<String, Value>,
    #[serde(default)]
    pub trials: Option<usize>,
    #[serde(default)]
    pub depth: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub tol: Option<f64>,
    /// Overrides the check's default generator.
    #[serde(default)]
    pub corpus: Option<GeneratorSpec>,
}

impl CheckConfig {
    pub fn new(check: &str, seed: u64) -> Self {
        Self { check: check.to_owned(), seed, ..Default::default() }
    }

    pub fn param(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.params.insert(key.to_owned(), value.into());
        self
    }

    pub fn trials(mut self, n: usize) -> Self {
        self.trials = Some(n);
        self
    }

    pub fn depth(mut self, d: usize) -> Self {
        self.depth = Some(d);
        self
    }
}

/// Static description of a check.
#[derive(Debug, Clone, Copy)]
pub struct CheckInfo {
    pub name: &'static str,
    pub summary: &'static str,
    /// Whether a file corpus of martingales can replace the generator.
    pub accepts_corpus: bool,
}

pub const CHECKS: &[CheckInfo] = &[
    CheckInfo { name: "doob", summary: "||Mf||_p <= p' ||f||_p and the weak form at every level", accepts_corpus: true },
    CheckInfo { name: "square_weak", summary: "|{Sf > l}| <= 3 ||f||_1 / l and the stopped lookahead bound", accepts_corpus: true },
    CheckInfo { name: "davis_decomposition", summary: "f = f_pred + f_bv with |df_pred| <= 2 Mdf_{n-1}, E sum|df_bv| <= 2 E Mdf", accepts_corpus: true },
    CheckInfo { name: "davis_bdg", summary: "E Sf <= sqrt(3) E f*; BDG ratios measured", accepts_corpus: true },
    CheckInfo { name: "sharp_davis", summary: "E Sf <= sqrt(3) E f* and the expectation form of the sharp quotient inequality", accepts_corpus: true },
    CheckInfo { name: "pathwise_sharp", summary: "pathwise sharp square-function inequality and the Bellman chain", accepts_corpus: true },
    CheckInfo { name: "garsia_neveu", summary: "||A_inf||_p <= p ||xi||_p for predictable increasing A", accepts_corpus: false },
    CheckInfo { name: "sum_of_ek", summary: "E (sum E_{k-1} z_k)^p <= p^p E (sum z_k)^p", accepts_corpus: false },
    CheckInfo { name: "truncation", summary: "E Z^p <= 2 E W^p for p <= 1 under the truncated hypothesis", accepts_corpus: false },
    CheckInfo { name: "good_lambda", summary: "E g^p <= delta^-p / (beta^-p - eps) E f^p under the good-lambda hypothesis", accepts_corpus: false },
    CheckInfo { name: "predictable_square", summary: "||sf||_p <= (p/2)^(1/2) ||Sf||_p and ||Mf||_p <= 5^(1/p) ||sf||_p", accepts_corpus: true },
    CheckInfo { name: "layer_cake", summary: "quadrature of the layer-cake formulas behind Garsia-Neveu and truncation", accepts_corpus: false },
    CheckInfo { name: "aux_lemmas", summary: "all auxiliary lemmas together", accepts_corpus: false },
    CheckInfo { name: "lepingle", summary: "pathwise r-variation bound with constant 8; moment ratio measured", accepts_corpus: true },
    CheckInfo { name: "vector_valued", summary: "l^r-valued BDG and maximal inequalities; exact special cases asserted", accepts_corpus: false },
    CheckInfo { name: "weighted_doob", summary: "l w{Mf_n > l} <= int_{Mf_n > l} f_n Mw_n", accepts_corpus: true },
    CheckInfo { name: "paraproduct", summary: "Chen identity and two-parameter variation bound; paraproduct norms measured", accepts_corpus: false },
    CheckInfo { name: "optional_sampling", summary: "f_{sigma ^ tau} = E_sigma f_tau for random bounded stopping pairs", accepts_corpus: true },
];

pub fn check_info(name: &str) -> Option<&'static CheckInfo> {
    CHECKS.iter().find(|c| c.name == name)
}

/// Martingales loaded from a file, used in place of the generator. Entries
/// that fail the averaging property are kept as plain processes and count as
/// violations.
#[derive(Debug, Clone)]
pub struct FileCorpus {
    pub processes: Vec<TreeProcess>,
}

/// Run a check by name.
pub fn run_check(cfg: &CheckConfig) -> Result<CheckReport> {
    run_check_with(cfg, None)
}

pub fn run_check_with(cfg: &CheckConfig, corpus: Option<&FileCorpus>) -> Result<CheckReport> {
    let info = check_info(&cfg.check).ok_or_else(|| Error::UnknownCheck(cfg.check.clone()))?;
    if corpus.is_some() && !info.accepts_corpus {
        return Err(Error::InvalidParameter(format!("check {} does not take a file corpus", info.name)));
    }
    let ctx = Ctx::new(cfg, corpus)?;
    let start = Instant::now();
    let mut report = match info.name {
        "doob" => doob::doob(&ctx),
        "square_weak" => doob::square_weak(&ctx),
        "weighted_doob" => doob::weighted_doob(&ctx),
        "davis_decomposition" => davis::davis_decomposition(&ctx),
        "davis_bdg" => davis::davis_bdg(&ctx),
        "sharp_davis" => davis::sharp_davis(&ctx),
        "pathwise_sharp" => davis::pathwise_sharp(&ctx),
        "garsia_neveu" => aux::garsia_neveu(&ctx),
        "sum_of_ek" => aux::sum_of_ek(&ctx),
        "truncation" => aux::truncation(&ctx),
        "good_lambda" => aux::good_lambda(&ctx),
        "predictable_square" => aux::predictable_square(&ctx),
        "layer_cake" => aux::layer_cake(&ctx),
        "aux_lemmas" => aux::aux_lemmas(&ctx),
        "lepingle" => lepingle::lepingle(&ctx),
        "vector_valued" => vector::vector_valued(&ctx),
        "paraproduct" => vector::paraproduct(&ctx),
        "optional_sampling" => sampling::optional_sampling(&ctx),
        _ => unreachable!("every listed check is dispatched"),
    }?;
    report.runtime_ms = start.elapsed().as_millis() as u64;
    Ok(report)
}

/// Everything a check needs: parameters with defaults recorded, the corpus
/// source, and the tolerance.
pub(crate) struct Ctx<'a> {
    cfg: &'a CheckConfig,
    file: Option<&'a FileCorpus>,
    pub seed: u64,
    pub tol: f64,
    used: std::sync::Mutex<BTreeMap<String, Value>>,
}

impl<'a> Ctx<'a> {
    fn new(cfg: &'a CheckConfig, file: Option<&'a FileCorpus>) -> Result<Self> {
        let tol = cfg.tol.unwrap_or(DEFAULT_TOL);
        if !(tol >= 0.0) {
            return Err(Error::InvalidParameter(format!("tolerance must be nonnegative, got {tol}")));
        }
        Ok(Self { cfg, file, seed: cfg.seed, tol, used: Default::default() })
    }

    fn record(&self, key: &str, v: Value) {
        self.used.lock().expect("not poisoned").insert(key.to_owned(), v);
    }

    pub fn f64(&self, key: &str, default: f64) -> Result<f64> {
        let v = match self.cfg.params.get(key) {
            None => default,
            Some(v) => v
                .as_f64()
                .ok_or_else(|| Error::InvalidParameter(format!("parameter {key} must be a number")))?,
        };
        self.record(key, Value::from(v));
        Ok(v)
    }

    pub fn f64_list(&self, key: &str, default: &[f64]) -> Result<Vec<f64>> {
        let v = match self.cfg.params.get(key) {
            None => default.to_vec(),
            Some(Value::Array(a)) => a
                .iter()
                .map(|x| x.as_f64().ok_or_else(|| Error::InvalidParameter(format!("parameter {key} must be numbers"))))
                .collect::<Result<_>>()?,
            Some(v) => vec![v
                .as_f64()
                .ok_or_else(|| Error::InvalidParameter(format!("parameter {key} must be a number or a list")))?],
        };
        if v.is_empty() {
            return Err(Error::InvalidParameter(format!("parameter {key} is empty")));
        }
        self.record(key, Value::from(v.clone()));
        Ok(v)
    }

    pub fn usize(&self, key: &str, default: usize) -> Result<usize> {
        let v = match self.cfg.params.get(key) {
            None => default,
            Some(v) => v
                .as_u64()
                .ok_or_else(|| Error::InvalidParameter(format!("parameter {key} must be a nonnegative integer")))?
                as usize,
        };
        self.record(key, Value::from(v));
        Ok(v)
    }

    pub fn trials(&self, default: usize) -> usize {
        match self.file {
            Some(f) => f.processes.len(),
            None => self.cfg.trials.unwrap_or(default),
        }
    }

    pub fn depth(&self, default: usize) -> usize {
        let d = self.cfg.depth.unwrap_or(default);
        self.record("depth", Value::from(d));
        d
    }

    /// Sub-seed for a named purpose within this check.
    pub fn seed_for(&self, label: &str) -> u64 {
        rng::derive_seed(self.seed, &format!("{}/{label}", self.cfg.check))
    }

    /// The generator, honouring a configured override.
    pub fn generator(&self, default: GeneratorSpec) -> GeneratorSpec {
        let g = self.cfg.corpus.clone().unwrap_or(default);
        if self.file.is_none() {
            self.record("corpus", serde_json::to_value(&g).expect("serializable"));
        }
        g
    }

    /// Martingale corpus of `n` trials: the file corpus if one was given,
    /// otherwise the generator. `Err` entries are processes that failed the
    /// averaging property.
    pub fn martingale(&self, gen: &GeneratorSpec, index: usize) -> Result<std::result::Result<Martingale, TreeProcess>> {
        match self.file {
            Some(f) => {
                let p = f.processes[index].clone();
                Ok(Martingale::new(p.clone()).map_err(|_| p))
            }
            None => Ok(Ok(gen.trial(self.seed_for("corpus"), index)?)),
        }
    }

    pub fn report(&self, constant: f64, run: Run) -> CheckReport {
        let params = self.used.lock().expect("not poisoned").clone();
        let tol = self.tol;
        let mut violations = 0;
        let mut worst = 0.0f64;
        let mut trials = 0;
        let mut hyp = 0;
        let mut measurements: BTreeMap<String, f64> = BTreeMap::new();
        for o in &run.outcomes {
            for (k, v) in &o.counts {
                *measurements.entry(k.clone()).or_insert(0.0) += v;
            }
            match o.ratio {
                None => hyp += 1,
                Some(r) => {
                    trials += 1;
                    let r = if r.is_nan() { f64::INFINITY } else { r };
                    if r > 1.0 + tol {
                        violations += 1;
                    }
                    worst = worst.max(r);
                    for (k, v) in &o.maxima {
                        let e = measurements.entry(k.clone()).or_insert(f64::NEG_INFINITY);
                        if *v > *e || v.is_nan() {
                            *e = *v;
                        }
                    }
                }
            }
        }
        CheckReport {
            check: self.cfg.check.clone(),
            params,
            trials,
            violations,
            hypothesis_failures: hyp,
            worst_ratio: Real(worst),
            constant_used: Real(constant),
            seed: self.seed,
            runtime_ms: 0,
            measurements: measurements.into_iter().map(|(k, v)| (k, Real(v))).collect(),
        }
    }
}

/// Result of one trial. `ratio: None` marks a trial whose hypothesis failed.
#[derive(Debug, Clone, Default)]
pub(crate) struct Outcome {
    pub ratio: Option<f64>,
    pub maxima: Vec<(String, f64)>,
    pub counts: Vec<(String, f64)>,
}

impl Outcome {
    pub fn new() -> Self {
        Self { ratio: Some(0.0), ..Default::default() }
    }

    pub fn skipped() -> Self {
        Self::default()
    }

    /// Assert `lhs ≤ c · rhs`.
    pub fn assert_le(&mut self, lhs: f64, c: f64, rhs: f64) -> &mut Self {
        self.push_ratio(ratio(lhs, c, rhs))
    }

    /// Assert that a residual is at most `tol` (ratio `residual / tol`).
    pub fn assert_small(&mut self, residual: f64, tol: f64) -> &mut Self {
        let r = if residual.is_nan() { f64::INFINITY } else { residual.abs() / tol };
        self.push_ratio(r)
    }

    pub fn push_ratio(&mut self, r: f64) -> &mut Self {
        let cur = self.ratio.get_or_insert(0.0);
        if r > *cur || r.is_nan() {
            *cur = r;
        }
        self
    }

    pub fn measure(&mut self, key: impl Into<String>, v: f64) -> &mut Self {
        self.maxima.push((key.into(), v));
        self
    }

    pub fn count(&mut self, key: impl Into<String>, v: f64) -> &mut Self {
        self.counts.push((key.into(), v));
        self
    }

    /// A corpus entry that is not a martingale: an automatic violation.
    pub fn not_martingale() -> Self {
        let mut o = Self::new();
        o.push_ratio(f64::INFINITY).count("not_martingale", 1.0);
        o
    }
}

/// `max(lhs − 1e-10, 0) / (c · rhs)`, with `0` when both sides vanish and
/// `∞` when only the right side does.
pub fn ratio(lhs: f64, c: f64, rhs: f64) -> f64 {
    let num = (lhs - ABS_TOL).max(0.0);
    let den = c * rhs;
    if num == 0.0 {
        0.0
    } else if den > 0.0 {
        num / den
    } else {
        f64::INFINITY
    }
}

/// Plain quotient for measurements, `0/0 = 0`.
pub fn quotient(a: f64, b: f64) -> f64 {
    if a == 0.0 && b == 0.0 {
        0.0
    } else {
        a / b
    }
}

pub(crate) struct Run {
    pub outcomes: Vec<Outcome>,
}

/// Evaluate `trial(i)` for `i = 0..n` in parallel; results are kept in index
/// order so that the report does not depend on scheduling.
pub(crate) fn run_trials(n: usize, trial: impl Fn(usize) -> Result<Outcome> + Sync) -> Result<Run> {
    let outcomes = (0..n).into_par_iter().map(&trial).collect::<Result<Vec<_>>>()?;
    Ok(Run { outcomes })
}

/// Evaluate trials until `target` of them satisfy their hypothesis, giving
/// up after `cap` attempts. The qualifying set is always the first `target`
/// in index order.
pub(crate) fn run_qualifying(
    target: usize,
    cap: usize,
    trial: impl Fn(usize) -> Result<Outcome> + Sync,
) -> Result<Run> {
    let mut outcomes = Vec::new();
    let mut qualified = 0;
    let mut next = 0;
    while qualified < target && next < cap {
        let batch = (target - qualified).max(16).min(cap - next);
        let more = (next..next + batch).into_par_iter().map(&trial).collect::<Result<Vec<_>>>()?;
        next += batch;
        for o in more {
            if qualified == target {
                break;
            }
            if o.ratio.is_some() {
                qualified += 1;
            }
            outcomes.push(o);
        }
    }
    Ok(Run { outcomes })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratio_conventions() {
        assert_eq!(ratio(0.0, 2.0, 0.0), 0.0);
        assert_eq!(ratio(1.0, 2.0, 0.0), f64::INFINITY);
        assert!((ratio(1.0, 2.0, 1.0) - (1.0 - 1e-10) / 2.0).abs() < 1e-15);
        assert_eq!(ratio(5e-11, 1.0, 0.0), 0.0);
    }

    #[test]
    fn real_round_trip() {
        for v in [1.5, f64::INFINITY, f64::NEG_INFINITY] {
            let s = serde_json::to_string(&Real(v)).unwrap();
            let back: Real = serde_json::from_str(&s).unwrap();
            assert_eq!(back.0, v);
        }
        assert_eq!(serde_json::to_string(&Real(f64::INFINITY)).unwrap(), "\"inf\"");
        let nan: Real = serde_json::from_str("\"nan\"").unwrap();
        assert!(nan.0.is_nan());
    }

    #[test]
    fn unknown_check() {
        assert!(matches!(run_check(&CheckConfig::new("nope", 0)), Err(Error::UnknownCheck(_))));
    }

    #[test]
    fn qualifying_runner_is_exact() {
        // Every third trial fails its hypothesis.
        let run = run_qualifying(10, 100, |i| Ok(if i % 3 == 0 { Outcome::skipped() } else { Outcome::new() })).unwrap();
        let q = run.outcomes.iter().filter(|o| o.ratio.is_some()).count();
        assert_eq!(q, 10);
        assert!(run.outcomes.last().unwrap().ratio.is_some());
    }

    #[test]
    fn every_check_runs_small() {
        for info in CHECKS {
            let cfg = CheckConfig::new(info.name, 1).trials(3).depth(3);
            let rep = run_check(&cfg).unwrap_or_else(|e| panic!("{}: {e}", info.name));
            assert!(rep.trials > 0, "{}", info.name);
            assert!(rep.passed(), "{}: {rep:?}", info.name);
        }
    }
}
