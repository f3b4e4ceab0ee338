//! Exact query answering on a single parameterised model.
//!
//! [`lifted_query`] runs a restricted lifted variable elimination (split, absorb,
//! lifted multiply, lifted sum-out) and grounds only the parfactors where a lifted
//! precondition fails. [`ground_ve`] is plain variable elimination over the grounding
//! and serves as the reference for the lifted path.

mod ground;
mod lifted;
mod pf;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

pub use ground::{ground_ve, ground_ve_traced, GroundStats};
pub use lifted::{lifted_query, lifted_query_traced, Op, OpLog};

use crate::error::{Error, Result};
use crate::model::{Constant, GroundAtom, Logvar, ParameterisedModel, Parfactor, Prv, Range};
use pf::Pf;

/// Observed values, at most one per ground atom.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Evidence(BTreeMap<GroundAtom, String>);

impl Evidence {
    pub fn new<S: Into<String>>(events: impl IntoIterator<Item = (GroundAtom, S)>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (atom, value) in events {
            let value = value.into();
            match map.get(&atom) {
                Some(v) if *v != value => {
                    return Err(Error::invalid(format!(
                        "contradictory evidence {atom} = {v} and {atom} = {value}"
                    )))
                }
                _ => {
                    map.insert(atom, value);
                }
            }
        }
        Ok(Evidence(map))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&GroundAtom, &str)> {
        self.0.iter().map(|(a, v)| (a, v.as_str()))
    }

    pub fn get(&self, atom: &GroundAtom) -> Option<&str> {
        self.0.get(atom).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// `P(targets | evidence)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QuerySpec {
    targets: Vec<GroundAtom>,
    evidence: Evidence,
}

impl QuerySpec {
    pub fn new(targets: Vec<GroundAtom>, evidence: Evidence) -> Result<Self> {
        if targets.is_empty() {
            return Err(Error::invalid("a query needs at least one target"));
        }
        let unique: BTreeSet<&GroundAtom> = targets.iter().collect();
        if unique.len() != targets.len() {
            return Err(Error::invalid("query targets must be distinct"));
        }
        if let Some(t) = targets.iter().find(|t| evidence.get(t).is_some()) {
            return Err(Error::invalid(format!("query target {t} is also observed")));
        }
        Ok(QuerySpec { targets, evidence })
    }

    pub fn marginal(target: GroundAtom) -> Self {
        QuerySpec {
            targets: vec![target],
            evidence: Evidence::default(),
        }
    }

    pub fn targets(&self) -> &[GroundAtom] {
        &self.targets
    }

    pub fn evidence(&self) -> &Evidence {
        &self.evidence
    }
}

impl fmt::Display for QuerySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let targets: Vec<String> = self.targets.iter().map(|t| t.to_string()).collect();
        write!(f, "P({}", targets.join(", "))?;
        if !self.evidence.is_empty() {
            let ev: Vec<String> = self
                .evidence
                .iter()
                .map(|(a, v)| format!("{a}={v}"))
                .collect();
            write!(f, " | {}", ev.join(", "))?;
        }
        write!(f, ")")
    }
}

/// Joint distribution over the query targets, row-major in target order.
#[derive(Clone, Debug, PartialEq)]
pub struct MarginalDistribution {
    targets: Vec<GroundAtom>,
    ranges: Vec<Range>,
    probs: Vec<f64>,
}

impl MarginalDistribution {
    pub(crate) fn new(targets: Vec<GroundAtom>, ranges: Vec<Range>, probs: Vec<f64>) -> Self {
        MarginalDistribution {
            targets,
            ranges,
            probs,
        }
    }

    pub fn targets(&self) -> &[GroundAtom] {
        &self.targets
    }

    pub fn ranges(&self) -> &[Range] {
        &self.ranges
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    fn dims(&self) -> Vec<usize> {
        self.ranges.iter().map(Range::len).collect()
    }

    /// Labels of each joint assignment in table order.
    pub fn assignments(&self) -> Vec<Vec<&str>> {
        let dims = self.dims();
        (0..self.probs.len())
            .map(|i| {
                crate::model::decode(&dims, i)
                    .iter()
                    .zip(&self.ranges)
                    .map(|(&v, r)| r.labels()[v].as_str())
                    .collect()
            })
            .collect()
    }

    /// Probability of the single event `atom = value`, marginalising the other targets.
    pub fn event_prob(&self, atom: &GroundAtom, value: &str) -> Result<f64> {
        let pos = self
            .targets
            .iter()
            .position(|t| t == atom)
            .ok_or_else(|| Error::invalid(format!("{atom} is not a query target")))?;
        let v = self.ranges[pos]
            .index_of(value)
            .ok_or_else(|| Error::invalid(format!("{value} is not in the range of {atom}")))?;
        let dims = self.dims();
        Ok(self
            .probs
            .iter()
            .enumerate()
            .filter(|(i, _)| crate::model::decode(&dims, *i)[pos] == v)
            .map(|(_, p)| p)
            .sum())
    }
}

/// Checked query: target ranges and evidence as range indices.
pub(crate) struct Resolved {
    pub ranges: Vec<Range>,
    pub evidence: BTreeMap<GroundAtom, usize>,
}

pub(crate) fn resolve(m: &ParameterisedModel, q: &QuerySpec) -> Result<Resolved> {
    let mut ranges = Vec::new();
    for t in q.targets() {
        let range = m.range_of(t)?;
        if !m.contains(t) {
            return Err(Error::UnknownAtom(t.to_string()));
        }
        ranges.push(range.clone());
    }
    let mut evidence = BTreeMap::new();
    for (atom, value) in q.evidence().iter() {
        let range = m.range_of(atom)?;
        if !m.contains(atom) {
            return Err(Error::UnknownAtom(atom.to_string()));
        }
        let idx = range
            .index_of(value)
            .ok_or_else(|| Error::invalid(format!("{value} is not in the range of {atom}")))?;
        evidence.insert(atom.clone(), idx);
    }
    Ok(Resolved { ranges, evidence })
}

/// Lifted product of two parfactors, joined on the logvars they share by name.
///
/// When one side has logvars the other lacks, its partner's potentials are raised to
/// one over the partner count, so grounding the result gives exactly the ground
/// factors of both inputs.
pub fn lift_multiply(g1: &Parfactor, g2: &Parfactor) -> Result<Parfactor> {
    let (product, _) = Pf::from_parfactor(g1)?.multiply(&Pf::from_parfactor(g2)?)?;
    product.to_parfactor(&format!("{}*{}", g1.name(), g2.name()))
}

/// Result of [`lift_sum_out`].
#[derive(Clone, Debug, PartialEq)]
pub struct SummedOut {
    pub parfactor: Parfactor,
    /// Number of indistinguishable instances folded into each potential.
    pub exponent: usize,
}

/// Sum `prv` out of `g` for a representative and raise the potentials to the number of
/// instances that collapse onto each remaining grounding.
pub fn lift_sum_out(g: &Parfactor, prv: &Prv) -> Result<SummedOut> {
    let arg = g
        .args()
        .iter()
        .position(|a| a == prv)
        .ok_or_else(|| Error::invalid(format!("{prv} is not an argument of {}", g.name())))?;
    let (pf, exponent) = Pf::from_parfactor(g)?.sum_out(arg)?;
    Ok(SummedOut {
        parfactor: pf.to_parfactor(g.name())?,
        exponent,
    })
}

/// Partition `g` by whether the value of `lv` is one of `constants`. Parts without
/// tuples come back as `None`.
pub fn split(
    g: &Parfactor,
    lv: &Logvar,
    constants: &BTreeSet<Constant>,
) -> Result<(Option<Parfactor>, Option<Parfactor>)> {
    let i = g
        .logvars()
        .iter()
        .position(|l| l == lv)
        .ok_or_else(|| Error::invalid(format!("logvar {lv} does not occur in {}", g.name())))?;
    let (inside, outside): (Vec<_>, Vec<_>) = g
        .constraint()
        .tuples()?
        .iter()
        .cloned()
        .partition(|t| constants.contains(&t[i]));
    let part = |tuples: Vec<_>| -> Result<Option<Parfactor>> {
        if tuples.is_empty() {
            return Ok(None);
        }
        let c = crate::model::Constraint::extensional(g.logvars().to_vec(), tuples)?;
        g.with_constraint(c).map(Some)
    };
    Ok((part(inside)?, part(outside)?))
}

/// Condition `g` on evidence. Every argument whose instances are all observed with one
/// shared value is fixed to it and dropped; arguments without observed instances are
/// left alone. A partially observed argument must be split first.
pub fn absorb(g: &Parfactor, ev: &Evidence) -> Result<Parfactor> {
    let mut pf = Pf::from_parfactor(g)?;
    let mut sliced = false;
    let mut i = 0;
    while i < pf.args.len() {
        let instances = pf.instances(i);
        let observed: BTreeSet<&str> = instances.iter().filter_map(|a| ev.get(a)).collect();
        let n_observed = instances.iter().filter(|a| ev.get(a).is_some()).count();
        if observed.is_empty() {
            i += 1;
            continue;
        }
        let arg = &pf.args[i];
        if observed.len() > 1 || n_observed != instances.len() {
            return Err(Error::ShatterFirst(format!(
                "instances of {arg} in {} are not uniformly observed",
                g.name()
            )));
        }
        let label = observed.into_iter().next().unwrap();
        let value = arg
            .range
            .index_of(label)
            .ok_or_else(|| Error::invalid(format!("{label} is not in the range of {arg}")))?;
        pf = pf.slice(i, value)?;
        sliced = true;
    }
    if !sliced {
        return Ok(g.clone());
    }
    pf.to_parfactor(g.name())
}

#[cfg(test)]
mod tests;
