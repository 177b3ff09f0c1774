//! Per-lemma verdicts: a sample size, an estimate, an interval and pass/fail.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::report::{wilson, Proportion, Z95};
use super::run::{run_experiment, ExperimentOutcome, TrialRecord};
use super::spec::{CellSpec, ExperimentSpec, IndelSpec};
use crate::error::{Error, Result};
use crate::io::write_json;
use crate::oracle::{
    adversarial_majority_success, simulate_adversarial_majority, stable_subtree_bound, verify_bias_concentration,
    verify_correlation_bound,
};
use crate::rng::{substream, Domain};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Lemma {
    Length,
    Radioactivity,
    Stable,
    Anchors,
    Majority,
    Bias,
    Domination,
}

impl Lemma {
    pub const ALL: [Lemma; 7] = [
        Lemma::Length,
        Lemma::Radioactivity,
        Lemma::Stable,
        Lemma::Anchors,
        Lemma::Majority,
        Lemma::Bias,
        Lemma::Domination,
    ];
}

impl FromStr for Lemma {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "length" => Lemma::Length,
            "radioactivity" => Lemma::Radioactivity,
            "stable" => Lemma::Stable,
            "anchors" => Lemma::Anchors,
            "majority" => Lemma::Majority,
            "bias" => Lemma::Bias,
            "domination" => Lemma::Domination,
            _ => return Err(Error::InvalidConfig(format!("unknown lemma {s:?}"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaVerdict {
    pub lemma: Lemma,
    pub samples: u64,
    pub estimate: f64,
    pub ci: [f64; 2],
    /// What the estimate is compared with.
    pub target: f64,
    pub criterion: String,
    pub pass: bool,
    pub details: serde_json::Value,
}

/// A cell and how many trees to draw from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialCell {
    pub trials: u64,
    pub cell: CellSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MajoritySettings {
    pub d: Vec<usize>,
    pub p_s: Vec<f64>,
    pub h0: usize,
    pub draws: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasSettings {
    /// Random fixtures for the correlation bound.
    pub fixtures: u64,
    pub m: usize,
    /// Bernoulli agreement vectors for the concentration inequalities.
    pub concentration_trials: u64,
    pub concentration_m: usize,
    pub beta_prime: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyConfig {
    pub seed: u64,
    pub length: TrialCell,
    /// Shared by the radioactivity and stable-subtree verdicts.
    pub radioactivity: TrialCell,
    pub anchors: TrialCell,
    pub domination: TrialCell,
    pub majority: MajoritySettings,
    pub bias: BiasSettings,
    pub min_node_samples: u64,
    pub min_anchor_samples: u64,
}

pub const DEFAULT_VERIFY_CONFIG: &str = include_str!("../../../../experiments/verify.json");

impl VerifyConfig {
    pub fn default_config() -> Self {
        serde_json::from_str(DEFAULT_VERIFY_CONFIG).expect("bundled verify config parses")
    }

    /// Replaces every trial count.
    pub fn with_trials(mut self, trials: u64) -> Self {
        for c in [&mut self.length, &mut self.radioactivity, &mut self.anchors, &mut self.domination] {
            c.trials = trials;
        }
        self
    }
}

struct Runner<'a> {
    config: &'a VerifyConfig,
    threads: Option<usize>,
    cache: BTreeMap<&'static str, ExperimentOutcome>,
}

impl Runner<'_> {
    fn records(&mut self, name: &'static str) -> Result<Vec<TrialRecord>> {
        if !self.cache.contains_key(name) {
            let tc = match name {
                "length" => &self.config.length,
                "radioactivity" => &self.config.radioactivity,
                "anchors" => &self.config.anchors,
                _ => &self.config.domination,
            };
            let mut spec = ExperimentSpec::new(name, self.config.seed, tc.trials, vec![tc.cell.clone()]);
            spec.threads = self.threads;
            let out = run_experiment(&spec)?;
            if let Some(c) = out.cells.first() {
                if let super::run::CellStatus::Infeasible { reason } = &c.status {
                    return Err(Error::InvalidConfig(format!("{name} cell is infeasible: {reason}")));
                }
            }
            self.cache.insert(name, out);
        }
        Ok(self.cache[name].records.clone())
    }
}

fn proportion_verdict(lemma: Lemma, p: Proportion, target: f64, criterion: &str, pass: bool) -> LemmaVerdict {
    LemmaVerdict {
        lemma,
        samples: p.n,
        estimate: p.estimate,
        ci: p.ci,
        target,
        criterion: criterion.into(),
        pass,
        details: serde_json::Value::Null,
    }
}

fn alpha_of(cell: &CellSpec) -> Result<f64> {
    match cell.indel {
        IndelSpec::AtBound { alpha, .. } => Ok(alpha),
        _ => Err(Error::InvalidConfig("radioactivity cell must set its indel rate at the bound".into())),
    }
}

/// Runs the requested verdicts in the given order.
pub fn verify(config: &VerifyConfig, lemmas: &[Lemma], threads: Option<usize>) -> Result<Vec<LemmaVerdict>> {
    let mut runner = Runner {
        config,
        threads,
        cache: BTreeMap::new(),
    };
    lemmas.iter().map(|&l| verdict(&mut runner, l)).collect()
}

fn count(records: &[TrialRecord], f: impl Fn(&TrialRecord) -> Option<bool>) -> Proportion {
    let (hit, n) = records
        .iter()
        .filter_map(&f)
        .fold((0, 0), |(h, n), x| (h + x as u64, n + 1));
    Proportion::new(hit, n)
}

fn verdict(runner: &mut Runner, lemma: Lemma) -> Result<LemmaVerdict> {
    let config = runner.config;
    Ok(match lemma {
        Lemma::Length => {
            let p = count(&runner.records("length")?, |r| Some(r.length_event));
            proportion_verdict(lemma, p, 0.99, "length-event frequency >= target", p.estimate >= 0.99)
        }
        Lemma::Radioactivity => {
            let recs = runner.records("radioactivity")?;
            let alpha = alpha_of(&config.radioactivity.cell)?;
            let hit: usize = recs.iter().filter_map(|r| r.true_radioactive_nodes).sum();
            let n: usize = recs.iter().map(|r| r.internal_nodes).sum();
            let p = Proportion::new(hit as u64, n as u64);
            let target = 1.1 * alpha;
            let pass = p.n >= config.min_node_samples && p.ci[1] < target;
            let mut v = proportion_verdict(lemma, p, target, "Wilson upper bound < 1.1 alpha", pass);
            v.details = json!({ "alpha": alpha, "min_node_samples": config.min_node_samples });
            v
        }
        Lemma::Stable => {
            let recs = runner.records("radioactivity")?;
            let cell = &config.radioactivity.cell;
            let hit: usize = recs.iter().filter_map(|r| r.true_radioactive_nodes).sum();
            let n: usize = recs.iter().map(|r| r.internal_nodes).sum();
            let alpha_hat = hit as f64 / n.max(1) as f64;
            let bound = stable_subtree_bound(alpha_hat, cell.d, cell.height);
            let p = count(&recs, |r| r.stable_event);
            let sigma = (bound * (1.0 - bound) / p.n.max(1) as f64).sqrt();
            let target = bound - 3.0 * sigma;
            let mut v = proportion_verdict(lemma, p, target, "frequency >= bound(alpha_hat) - 3 sigma", p.estimate >= target);
            v.details = json!({ "alpha_hat": alpha_hat, "bound": bound, "sigma": sigma });
            v
        }
        Lemma::Anchors => {
            let recs = runner.records("anchors")?;
            let n: usize = recs.iter().filter_map(|r| r.anchor_samples).sum();
            let hit: usize = recs.iter().filter_map(|r| r.anchor_separated).sum();
            let p = Proportion::new(hit as u64, n as u64);
            let pass = p.n >= config.min_anchor_samples && p.estimate >= 0.999;
            let mut v = proportion_verdict(lemma, p, 0.999, "separated fraction >= target", pass);
            v.details = json!({ "min_anchor_samples": config.min_anchor_samples });
            v
        }
        Lemma::Majority => majority_verdict(&config.majority, config.seed),
        Lemma::Bias => bias_verdict(&config.bias, config.seed)?,
        Lemma::Domination => {
            let recs = runner.records("domination")?;
            let e: Vec<&TrialRecord> = recs.iter().filter(|r| r.event_e == Some(true)).collect();
            let shift_checked: usize = e.iter().filter_map(|r| r.shift_checked).sum();
            let shift_bad: usize = e
                .iter()
                .filter(|r| r.shift_exact == Some(false))
                .count();
            let checked: usize = e.iter().filter_map(|r| r.domination_checked).sum();
            let bad: usize = e.iter().filter_map(|r| r.domination_violations).sum();
            let (lo, hi) = wilson(bad as u64, checked as u64, Z95);
            LemmaVerdict {
                lemma,
                samples: checked as u64,
                estimate: bad as f64 / checked.max(1) as f64,
                ci: [lo, hi],
                target: 0.0,
                criterion: "no violations on event-E trials, at least one such trial".into(),
                pass: !e.is_empty() && bad == 0 && shift_bad == 0,
                details: json!({
                    "trials": recs.len(),
                    "event_e_trials": e.len(),
                    "shift_checked": shift_checked,
                    "shift_inexact_trials": shift_bad,
                    "domination_violations": bad,
                }),
            }
        }
    })
}

fn majority_verdict(s: &MajoritySettings, seed: u64) -> LemmaVerdict {
    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    for (i, &d) in s.d.iter().enumerate() {
        for (j, &p_s) in s.p_s.iter().enumerate() {
            let mut rng = substream(seed, Domain::Fixture, (i * s.p_s.len() + j) as u64);
            let wins = (0..s.draws)
                .filter(|_| simulate_adversarial_majority(d, s.h0, p_s, &mut rng))
                .count();
            let freq = wins as f64 / s.draws as f64;
            let exact = adversarial_majority_success(d, s.h0, p_s);
            let sigma = (exact * (1.0 - exact) / s.draws as f64).sqrt();
            let z = if sigma > 0.0 { (freq - exact).abs() / sigma } else if freq == exact { 0.0 } else { f64::INFINITY };
            worst = worst.max(z);
            rows.push(json!({ "d": d, "p_s": p_s, "frequency": freq, "exact": exact, "sigma": sigma, "z": z }));
        }
    }
    LemmaVerdict {
        lemma: Lemma::Majority,
        samples: s.draws * rows.len() as u64,
        estimate: worst,
        ci: [0.0, worst],
        target: 3.0,
        criterion: "largest |frequency - exact| / sigma <= 3".into(),
        pass: worst <= 3.0,
        details: json!(rows),
    }
}

/// A random pair `(X, X̂)` with an agreement vector dominated by `X̂ = X`.
fn fixture(m: usize, rng: &mut impl Rng) -> (Vec<u8>, Vec<u8>, Vec<u8>) {
    let flip = rng.random_range(0.0..0.3);
    let keep = rng.random_range(0.5..1.0);
    let x: Vec<u8> = (0..m).map(|_| rng.random_range(0..2)).collect();
    let x_hat: Vec<u8> = x.iter().map(|&b| b ^ rng.random_bool(flip) as u8).collect();
    let lambda = x
        .iter()
        .zip(&x_hat)
        .map(|(a, b)| (a == b && rng.random_bool(keep)) as u8)
        .collect();
    (x, x_hat, lambda)
}

/// Checks the correlation bound on random fixtures; returns violations.
pub fn correlation_fixture_violations(fixtures: u64, m: usize, seed: u64) -> Result<u64> {
    let mut bad = 0;
    for i in 0..fixtures {
        let mut rng = substream(seed, Domain::Fixture, 1 << 32 | i);
        let (x, x_hat, lambda) = fixture(m, &mut rng);
        let (y, y_hat, theta) = fixture(m, &mut rng);
        bad += !verify_correlation_bound(&x, &y, &x_hat, &y_hat, &lambda, &theta)?.holds as u64;
    }
    Ok(bad)
}

fn bias_verdict(s: &BiasSettings, seed: u64) -> Result<LemmaVerdict> {
    let violations = correlation_fixture_violations(s.fixtures, s.m, seed)?;
    let mut held = 0;
    for i in 0..s.concentration_trials {
        let mut rng = substream(seed, Domain::Fixture, 2 << 32 | i);
        let mut draw = || -> Vec<u8> { (0..s.concentration_m).map(|_| rng.random_bool(1.0 - s.beta_prime) as u8).collect() };
        let (l, t) = (draw(), draw());
        held += verify_bias_concentration(&l, &t, s.beta, s.beta_prime)?.holds() as u64;
    }
    let p = Proportion::new(held, s.concentration_trials);
    Ok(LemmaVerdict {
        lemma: Lemma::Bias,
        samples: s.fixtures + s.concentration_trials,
        estimate: p.estimate,
        ci: p.ci,
        target: 0.999,
        criterion: "no correlation-bound violations; concentration frequency >= target".into(),
        pass: violations == 0 && p.estimate >= 0.999,
        details: json!({ "fixtures": s.fixtures, "bound_violations": violations, "concentration": p }),
    })
}

pub fn write_verdicts(path: &Path, verdicts: &[LemmaVerdict]) -> Result<()> {
    write_json(path, &verdicts)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> VerifyConfig {
        let mut c = VerifyConfig::default_config().with_trials(3);
        c.majority.draws = 2000;
        c.bias.fixtures = 20;
        c.bias.concentration_trials = 20;
        c.min_node_samples = 1;
        c.min_anchor_samples = 1;
        c
    }

    #[test]
    fn bundled_config_parses() {
        let c = VerifyConfig::default_config();
        assert_eq!(alpha_of(&c.radioactivity.cell).unwrap(), 0.2);
        assert!(c.majority.draws >= 100_000);
    }

    #[test]
    fn lemma_names_round_trip() {
        for l in Lemma::ALL {
            let name = serde_json::to_value(l).unwrap();
            assert_eq!(name.as_str().unwrap().parse::<Lemma>().unwrap(), l);
        }
        assert!("nope".parse::<Lemma>().is_err());
    }

    #[test]
    fn cheap_verdicts_pass() {
        let c = small();
        let v = verify(&c, &[Lemma::Majority, Lemma::Bias], Some(2)).unwrap();
        assert!(v.iter().all(|v| v.pass), "{v:#?}");
        assert_eq!(v[0].samples, 2000 * 9);
    }

    #[test]
    fn radioactivity_and_stable_share_a_run() {
        let c = small();
        let v = verify(&c, &[Lemma::Radioactivity, Lemma::Stable], Some(2)).unwrap();
        assert_eq!(v[0].samples, 3 * 6);
        assert_eq!(v[1].samples, 3);
    }

    #[test]
    fn fixtures_never_violate_the_bound() {
        assert_eq!(correlation_fixture_violations(200, 300, 9).unwrap(), 0);
    }
}
