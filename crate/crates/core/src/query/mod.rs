//! Queries over a weighted set of parameterised models.
//!
//! [`query_all`] answers one query per model. The remaining functions select entries of
//! the resulting [`AnswerSet`] by the probability of an event, by model probability or
//! both (skyline), or summarise how the event probability moves with domain size.

mod text;

use std::cmp::Ordering;
use std::collections::BTreeMap;

use rayon::prelude::*;

pub use text::parse_query;

use crate::error::{Error, Result};
use crate::lve::{lifted_query, MarginalDistribution, QuerySpec};
use crate::model::{GroundAtom, Logvar};
use crate::universe::WeightedModel;

/// `atom = value`, the event whose probability ranks the answers.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EventProbe {
    atom: GroundAtom,
    value: String,
}

impl EventProbe {
    pub fn new(atom: GroundAtom, value: impl Into<String>) -> Self {
        EventProbe {
            atom,
            value: value.into(),
        }
    }

    pub fn atom(&self) -> &GroundAtom {
        &self.atom
    }

    pub fn value(&self) -> &str {
        &self.value
    }
}

impl std::fmt::Display for EventProbe {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}={}", self.atom, self.value)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnswerEntry {
    /// Position of the model in the queried list.
    pub model: usize,
    pub domain_world: usize,
    pub constraint_world: usize,
    pub domain_sizes: BTreeMap<Logvar, usize>,
    pub model_prob: f64,
    pub answer: MarginalDistribution,
}

impl AnswerEntry {
    /// `X=200;T=3`
    pub fn size_label(&self) -> String {
        self.domain_sizes
            .iter()
            .map(|(l, n)| format!("{l}={n}"))
            .collect::<Vec<_>>()
            .join(";")
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Skipped {
    pub model: usize,
    pub reason: String,
}

/// One answer per queried model, in model order.
#[derive(Clone, Debug, PartialEq)]
pub struct AnswerSet {
    pub query: QuerySpec,
    pub entries: Vec<AnswerEntry>,
    pub skipped: Vec<Skipped>,
}

impl AnswerSet {
    /// Sum of the model probabilities of the answered models.
    pub fn retained_mass(&self) -> f64 {
        self.entries.iter().map(|e| e.model_prob).sum()
    }

    /// `P(e)` for every entry.
    pub fn event_probs(&self, e: &EventProbe) -> Result<Vec<f64>> {
        if !self.query.targets().contains(e.atom()) {
            return Err(Error::invalid(format!(
                "{} is not a query target",
                e.atom()
            )));
        }
        self.entries
            .iter()
            .map(|x| x.answer.event_prob(e.atom(), e.value()))
            .collect()
    }
}

/// Answer `q` on every model. Models that lack a queried atom, and degenerate models
/// unless `include_degenerate`, are skipped and listed.
pub fn query_all_with(
    models: &[WeightedModel],
    q: &QuerySpec,
    include_degenerate: bool,
) -> Result<AnswerSet> {
    let atoms: Vec<&GroundAtom> = q
        .targets()
        .iter()
        .chain(q.evidence().iter().map(|(a, _)| a))
        .collect();
    let results = models
        .par_iter()
        .enumerate()
        .map(|(i, wm)| {
            if wm.degenerate && !include_degenerate {
                return Ok(Err(Skipped {
                    model: i,
                    reason: "degenerate constraint world".into(),
                }));
            }
            if let Some(a) = atoms.iter().find(|a| !wm.model.contains(a)) {
                return Ok(Err(Skipped {
                    model: i,
                    reason: format!("{a} does not occur"),
                }));
            }
            let answer = lifted_query(&wm.model, q)?;
            Ok(Ok(AnswerEntry {
                model: i,
                domain_world: wm.domain_world,
                constraint_world: wm.constraint_world,
                domain_sizes: wm.domain_sizes.clone(),
                model_prob: wm.prob,
                answer,
            }))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut entries = Vec::new();
    let mut skipped = Vec::new();
    for r in results {
        match r {
            Ok(e) => entries.push(e),
            Err(s) => skipped.push(s),
        }
    }
    if entries.is_empty() && !models.is_empty() {
        let missing = atoms
            .iter()
            .find(|a| models.iter().all(|m| !m.model.contains(a)));
        if let Some(a) = missing {
            return Err(Error::UnknownAtom(a.to_string()));
        }
    }
    Ok(AnswerSet {
        query: q.clone(),
        entries,
        skipped,
    })
}

/// [`query_all_with`] skipping degenerate models.
pub fn query_all(models: &[WeightedModel], q: &QuerySpec) -> Result<AnswerSet> {
    query_all_with(models, q, false)
}

/// Entries picked from an [`AnswerSet`], as indices into `entries`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Selection {
    pub indices: Vec<usize>,
    /// `k` exceeded the number of entries, so all of them were returned.
    pub exhausted: bool,
}

fn desc(a: f64, b: f64) -> Ordering {
    b.total_cmp(&a)
}

fn top_k(n: usize, k: usize, cmp: impl Fn(&usize, &usize) -> Ordering) -> Result<Selection> {
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|a, b| cmp(a, b).then(a.cmp(b)));
    idx.truncate(k);
    Ok(Selection {
        indices: idx,
        exhausted: k > n,
    })
}

/// The `k` entries with the highest `P(e)`; ties go to the more probable model.
pub fn top_k_query_prob(a: &AnswerSet, e: &EventProbe, k: usize) -> Result<Selection> {
    let p = a.event_probs(e)?;
    let m: Vec<f64> = a.entries.iter().map(|x| x.model_prob).collect();
    top_k(a.entries.len(), k, |&i, &j| {
        desc(p[i], p[j]).then(desc(m[i], m[j]))
    })
}

/// The `k` most probable models.
pub fn top_k_model_prob(a: &AnswerSet, k: usize) -> Result<Selection> {
    let m: Vec<f64> = a.entries.iter().map(|x| x.model_prob).collect();
    top_k(a.entries.len(), k, |&i, &j| desc(m[i], m[j]))
}

/// Indices of the Pareto-optimal points when maximising both coordinates, ordered by
/// the first coordinate descending. A point is dropped iff another one is at least as
/// good in both coordinates and strictly better in one.
pub fn pareto_front(points: &[(f64, f64)]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..points.len()).collect();
    idx.sort_by(|&i, &j| {
        desc(points[i].0, points[j].0)
            .then(desc(points[i].1, points[j].1))
            .then(i.cmp(&j))
    });
    let mut out = Vec::new();
    // best second coordinate among points with a strictly larger first one
    let mut best = f64::NEG_INFINITY;
    let mut g = 0;
    while g < idx.len() {
        let x = points[idx[g]].0;
        let mut end = g;
        while end < idx.len() && points[idx[end]].0 == x {
            end += 1;
        }
        let top = points[idx[g]].1;
        if top > best {
            out.extend(idx[g..end].iter().copied().filter(|&i| points[i].1 == top));
            best = top;
        }
        g = end;
    }
    out
}

/// Entries not dominated in (model probability, `P(e)`), most probable model first.
pub fn skyline(a: &AnswerSet, e: &EventProbe) -> Result<Vec<usize>> {
    let p = a.event_probs(e)?;
    let points: Vec<(f64, f64)> = a
        .entries
        .iter()
        .zip(&p)
        .map(|(x, &pe)| (x.model_prob, pe))
        .collect();
    Ok(pareto_front(&points))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Trend {
    Increasing,
    Decreasing,
    Constant,
    NonMonotone,
    Insufficient,
}

impl std::fmt::Display for Trend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Trend::Increasing => "increasing",
            Trend::Decreasing => "decreasing",
            Trend::Constant => "constant",
            Trend::NonMonotone => "non-monotone",
            Trend::Insufficient => "insufficient",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrendReport {
    pub direction: Trend,
    /// Largest absolute difference between neighbours.
    pub max_delta: f64,
    /// Entry indices in ascending domain size.
    pub order: Vec<usize>,
    pub probs: Vec<f64>,
}

/// Differences below this are treated as equal.
pub const TREND_TOLERANCE: f64 = 1e-12;

pub fn classify(probs: &[f64]) -> (Trend, f64) {
    if probs.len() < 2 {
        return (Trend::Insufficient, 0.0);
    }
    let deltas: Vec<f64> = probs.windows(2).map(|w| w[1] - w[0]).collect();
    let max_delta = deltas.iter().map(|d| d.abs()).fold(0.0, f64::max);
    let up = deltas.iter().any(|&d| d > TREND_TOLERANCE);
    let down = deltas.iter().any(|&d| d < -TREND_TOLERANCE);
    let trend = match (up, down) {
        (false, false) => Trend::Constant,
        (true, false) => Trend::Increasing,
        (false, true) => Trend::Decreasing,
        (true, true) => Trend::NonMonotone,
    };
    (trend, max_delta)
}

/// How `P(e)` moves as the domains grow. Entries are ordered by their domain sizes
/// (compared logvar by logvar), keeping answer order among equal sizes.
pub fn trend_report(a: &AnswerSet, e: &EventProbe) -> Result<TrendReport> {
    let p = a.event_probs(e)?;
    let mut order: Vec<usize> = (0..a.entries.len()).collect();
    order.sort_by(|&i, &j| {
        let si: Vec<usize> = a.entries[i].domain_sizes.values().copied().collect();
        let sj: Vec<usize> = a.entries[j].domain_sizes.values().copied().collect();
        si.cmp(&sj)
    });
    let probs: Vec<f64> = order.iter().map(|&i| p[i]).collect();
    let (direction, max_delta) = classify(&probs);
    Ok(TrendReport {
        direction,
        max_delta,
        order,
        probs,
    })
}
