//! Domain worlds and distributions over them.
//!
//! A domain spec says, per logvar, which constants may form its domain: a fixed list,
//! an explicit list of alternatives, or a binned beta-binomial distribution over domain
//! sizes on top of a set of guaranteed constants.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::model::{Constant, Logvar, TemplateModel};

/// One domain per logvar, optionally weighted.
#[derive(Clone, Debug, PartialEq)]
pub struct DomainWorld {
    domains: BTreeMap<Logvar, Vec<Constant>>,
    prob: Option<f64>,
}

impl DomainWorld {
    pub fn new(
        domains: impl IntoIterator<Item = (Logvar, Vec<Constant>)>,
        prob: Option<f64>,
    ) -> Result<Self> {
        let domains: BTreeMap<Logvar, Vec<Constant>> = domains.into_iter().collect();
        for (lv, consts) in &domains {
            if consts.is_empty() {
                return Err(Error::invalid(format!(
                    "domain of {lv} must contain at least one constant"
                )));
            }
            let unique: BTreeSet<&Constant> = consts.iter().collect();
            if unique.len() != consts.len() {
                return Err(Error::invalid(format!(
                    "duplicate constant in domain of {lv}"
                )));
            }
        }
        if let Some(p) = prob {
            check_prob(p)?;
        }
        Ok(DomainWorld { domains, prob })
    }

    pub fn domain(&self, lv: &Logvar) -> Option<&[Constant]> {
        self.domains.get(lv).map(Vec::as_slice)
    }

    pub fn domains(&self) -> &BTreeMap<Logvar, Vec<Constant>> {
        &self.domains
    }

    pub fn size(&self, lv: &Logvar) -> Option<usize> {
        self.domains.get(lv).map(Vec::len)
    }

    /// `None` when the world came from an unweighted set of alternatives.
    pub fn prob(&self) -> Option<f64> {
        self.prob
    }

    pub fn with_prob(mut self, prob: Option<f64>) -> Self {
        self.prob = prob;
        self
    }
}

fn check_prob(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid(format!("probability {p} outside [0, 1]")));
    }
    Ok(())
}

/// Probability of `k` successes out of `n` under a beta-binomial distribution:
/// `C(n, k) B(k + alpha, n - k + beta) / B(alpha, beta)`, evaluated in log space.
pub fn beta_binomial_pmf(k: u64, n: u64, alpha: f64, beta: f64) -> Result<f64> {
    if k > n {
        return Err(Error::invalid(format!("k = {k} exceeds n = {n}")));
    }
    if !(alpha > 0.0 && beta > 0.0 && alpha.is_finite() && beta.is_finite()) {
        return Err(Error::invalid(format!(
            "beta-binomial parameters must be positive, got alpha = {alpha}, beta = {beta}"
        )));
    }
    let (k, n) = (k as f64, n as f64);
    let ln_choose = ln_gamma(n + 1.0) - ln_gamma(k + 1.0) - ln_gamma(n - k + 1.0);
    Ok((ln_choose + ln_beta(k + alpha, n - k + beta) - ln_beta(alpha, beta)).exp())
}

fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BetaBinomialSpec {
    pub alpha: f64,
    pub beta: f64,
    /// Number of bins `n`; bin `k` (1..=n) is a domain of `step * k` constants.
    pub bins: u64,
    pub step: usize,
    #[serde(default)]
    pub guaranteed: Vec<String>,
    /// Prefix of synthetic constant names; defaults to the lowercased logvar name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prefix: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnumeratedEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constants: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size: Option<usize>,
    #[serde(default)]
    pub guaranteed: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prob: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogvarSpec {
    Fixed(Vec<String>),
    Enumerated(Vec<EnumeratedEntry>),
    BetaBinomial(BetaBinomialSpec),
}

/// Per-logvar description of the possible domains.
///
/// ```json
/// {"domains": {
///     "X": {"beta_binomial": {"alpha": 6, "beta": 15, "bins": 20, "step": 100}},
///     "T": {"fixed": ["t1", "t2", "t3"]}
/// }}
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub domains: BTreeMap<String, LogvarSpec>,
}

impl DomainSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let spec: DomainSpec = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        for (lv, spec) in &self.domains {
            match spec {
                LogvarSpec::Fixed(c) if c.is_empty() => {
                    return Err(Error::invalid(format!("fixed domain of {lv} is empty")))
                }
                LogvarSpec::Fixed(_) => {}
                LogvarSpec::Enumerated(entries) => {
                    if entries.is_empty() {
                        return Err(Error::invalid(format!("no domain alternatives for {lv}")));
                    }
                    let weighted = entries.iter().filter(|e| e.prob.is_some()).count();
                    if weighted != 0 && weighted != entries.len() {
                        return Err(Error::invalid(format!(
                            "either all or none of the alternatives for {lv} carry a probability"
                        )));
                    }
                    if weighted > 0 {
                        let mut total = 0.0;
                        for p in entries.iter().filter_map(|e| e.prob) {
                            check_prob(p)?;
                            total += p;
                        }
                        if (total - 1.0).abs() > 1e-9 {
                            return Err(Error::invalid(format!(
                                "domain probabilities for {lv} sum to {total}, not 1"
                            )));
                        }
                    }
                    for e in entries {
                        if e.constants.is_some() == e.size.is_some() {
                            return Err(Error::invalid(format!(
                                "each alternative for {lv} needs exactly one of `constants` or `size`"
                            )));
                        }
                    }
                }
                LogvarSpec::BetaBinomial(bb) => {
                    if bb.bins == 0 || bb.step == 0 {
                        return Err(Error::invalid(format!(
                            "beta-binomial spec for {lv} needs bins >= 1 and step >= 1"
                        )));
                    }
                    beta_binomial_pmf(0, bb.bins, bb.alpha, bb.beta)?;
                }
            }
        }
        Ok(())
    }
}

/// `guaranteed` followed by synthetic constants `prefix{i}` up to `size` constants.
fn synthesize(
    lv: &Logvar,
    guaranteed: &[String],
    prefix: &str,
    size: usize,
) -> Result<Vec<Constant>> {
    if guaranteed.len() > size {
        return Err(Error::invalid(format!(
            "{} guaranteed constants do not fit a domain of size {size} for {lv}",
            guaranteed.len()
        )));
    }
    let mut out: Vec<Constant> = guaranteed.iter().map(|c| Constant::new(c)).collect();
    out.extend((guaranteed.len() + 1..=size).map(|i| Constant::new(&format!("{prefix}{i}"))));
    let unique: BTreeSet<&Constant> = out.iter().collect();
    if unique.len() != out.len() {
        return Err(Error::invalid(format!(
            "guaranteed constants of {lv} collide with synthetic names `{prefix}<i>`"
        )));
    }
    Ok(out)
}

enum Weight {
    Neutral,
    Unweighted(usize),
    Prob(f64),
}

/// All domain worlds described by `spec` for the logvars of `tmpl`, ordered by domain
/// sizes (lexicographically in the template's logvar order).
///
/// Beta-binomial bin 0 is dropped and the remaining bins keep their unnormalised
/// probabilities. Distributions over several logvars combine as independent products.
pub fn enumerate_worlds(spec: &DomainSpec, tmpl: &TemplateModel) -> Result<Vec<DomainWorld>> {
    let mut per_logvar: Vec<Vec<(Vec<Constant>, Weight)>> = Vec::new();
    for lv in tmpl.logvars() {
        let s = spec
            .domains
            .get(lv.name())
            .ok_or_else(|| Error::MissingDomain(lv.to_string()))?;
        let options = match s {
            LogvarSpec::Fixed(c) => vec![(synthesize(lv, c, "", c.len())?, Weight::Neutral)],
            LogvarSpec::Enumerated(entries) => {
                let n = entries.len();
                let prefix = lv.name().to_lowercase();
                entries
                    .iter()
                    .map(|e| {
                        let consts = match (&e.constants, e.size) {
                            (Some(c), _) => synthesize(lv, c, "", c.len())?,
                            (None, Some(size)) => synthesize(lv, &e.guaranteed, &prefix, size)?,
                            (None, None) => unreachable!("validated"),
                        };
                        let w = e.prob.map_or(Weight::Unweighted(n), Weight::Prob);
                        Ok((consts, w))
                    })
                    .collect::<Result<Vec<_>>>()?
            }
            LogvarSpec::BetaBinomial(bb) => {
                let prefix = bb
                    .prefix
                    .clone()
                    .unwrap_or_else(|| lv.name().to_lowercase());
                (1..=bb.bins)
                    .map(|k| {
                        let consts = synthesize(lv, &bb.guaranteed, &prefix, bb.step * k as usize)?;
                        let p = beta_binomial_pmf(k, bb.bins, bb.alpha, bb.beta)?;
                        Ok((consts, Weight::Prob(p)))
                    })
                    .collect::<Result<Vec<_>>>()?
            }
        };
        for (c, _) in &options {
            if c.is_empty() {
                return Err(Error::invalid(format!("empty domain generated for {lv}")));
            }
        }
        per_logvar.push(options);
    }

    let any_prob = per_logvar
        .iter()
        .flatten()
        .any(|(_, w)| matches!(w, Weight::Prob(_)));
    let any_unweighted = per_logvar
        .iter()
        .flatten()
        .any(|(_, w)| matches!(w, Weight::Unweighted(_)));

    // Cartesian product over logvars
    let mut combos: Vec<(Vec<usize>, f64)> = vec![(Vec::new(), 1.0)];
    for options in &per_logvar {
        let mut next = Vec::with_capacity(combos.len() * options.len());
        for (idx, p) in &combos {
            for (i, (_, w)) in options.iter().enumerate() {
                let factor = match w {
                    Weight::Neutral => 1.0,
                    Weight::Unweighted(n) => 1.0 / *n as f64,
                    Weight::Prob(q) => *q,
                };
                let mut idx = idx.clone();
                idx.push(i);
                next.push((idx, p * factor));
            }
        }
        combos = next;
    }

    let logvars = tmpl.logvars();
    let mut worlds: Vec<(Vec<usize>, DomainWorld)> = combos
        .into_iter()
        .map(|(idx, p)| {
            let domains: Vec<(Logvar, Vec<Constant>)> = idx
                .iter()
                .enumerate()
                .map(|(l, &i)| (logvars[l].clone(), per_logvar[l][i].0.clone()))
                .collect();
            let sizes = domains.iter().map(|(_, c)| c.len()).collect();
            let prob = if any_unweighted && !any_prob {
                None
            } else {
                Some(p)
            };
            Ok((sizes, DomainWorld::new(domains, prob)?))
        })
        .collect::<Result<_>>()?;
    worlds.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(worlds.into_iter().map(|(_, w)| w).collect())
}

/// Threshold filter over weighted worlds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WorldFilter {
    threshold: f64,
    cascade: bool,
    cascade_threshold: Option<f64>,
}

impl WorldFilter {
    pub fn new(threshold: f64, cascade: bool) -> Result<Self> {
        check_threshold(threshold)?;
        Ok(WorldFilter {
            threshold,
            cascade,
            cascade_threshold: None,
        })
    }

    /// Use a different threshold for the combined weights in the cascaded step.
    pub fn with_cascade_threshold(mut self, t: f64) -> Result<Self> {
        check_threshold(t)?;
        self.cascade_threshold = Some(t);
        Ok(self)
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn cascade(&self) -> bool {
        self.cascade
    }

    pub fn cascade_threshold(&self) -> f64 {
        self.cascade_threshold.unwrap_or(self.threshold)
    }
}

fn check_threshold(t: f64) -> Result<()> {
    if !(0.0..1.0).contains(&t) {
        return Err(Error::invalid(format!("threshold {t} outside [0, 1)")));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct Filtered<T> {
    pub kept: Vec<(T, f64)>,
    /// Sum of the kept probabilities. Nothing is renormalised.
    pub retained_mass: f64,
    pub dropped: usize,
}

/// Keep the items whose probability is strictly above `threshold`, in order.
pub fn filter_worlds<T>(items: Vec<(T, f64)>, threshold: f64) -> Filtered<T> {
    let total = items.len();
    let kept: Vec<(T, f64)> = items.into_iter().filter(|(_, p)| *p > threshold).collect();
    Filtered {
        retained_mass: kept.iter().map(|(_, p)| p).sum(),
        dropped: total - kept.len(),
        kept,
    }
}
