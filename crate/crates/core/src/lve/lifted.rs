//! Elimination driver for the lifted path.

use std::collections::btree_map::Entry;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use super::pf::{Atom, Pf, Term};
use super::{resolve, MarginalDistribution, QuerySpec};
use crate::error::{Error, Result};
use crate::model::{decode, encode, Constraint, GroundAtom, Logvar, ParameterisedModel};

/// One step of a lifted run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Op {
    /// A parfactor was partitioned into `parts` pieces on the instances of `prv`.
    Split {
        prv: String,
        parts: usize,
    },
    Absorb {
        atom: String,
    },
    Multiply {
        prv: String,
    },
    SumOut {
        prv: String,
        exponent: usize,
    },
    /// Fallback: parfactors containing `prv` were replaced by `factors` ground ones.
    Ground {
        prv: String,
        factors: usize,
    },
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Op::Split { prv, parts } => write!(f, "split on {prv} into {parts}"),
            Op::Absorb { atom } => write!(f, "absorb {atom}"),
            Op::Multiply { prv } => write!(f, "multiply on {prv}"),
            Op::SumOut { prv, exponent } => write!(f, "sum out {prv} ^{exponent}"),
            Op::Ground { prv, factors } => write!(f, "ground {prv} into {factors}"),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct OpLog {
    pub ops: Vec<Op>,
}

impl OpLog {
    /// Operations other than grounding fallbacks.
    pub fn lifted_ops(&self) -> usize {
        self.ops
            .iter()
            .filter(|o| !matches!(o, Op::Ground { .. }))
            .count()
    }

    pub fn groundings(&self) -> usize {
        self.ops
            .iter()
            .filter(|o| matches!(o, Op::Ground { .. }))
            .count()
    }

    pub fn sum_outs(&self) -> Vec<(&str, usize)> {
        self.ops
            .iter()
            .filter_map(|o| match o {
                Op::SumOut { prv, exponent } => Some((prv.as_str(), *exponent)),
                _ => None,
            })
            .collect()
    }
}

type InstanceSet = Arc<BTreeSet<GroundAtom>>;

/// A randvar group: all instances share a name and the set is shattered.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
struct GroupKey {
    name: Arc<str>,
    set: InstanceSet,
}

struct Occurrence {
    pf: usize,
    arg: usize,
    key: GroupKey,
}

fn occurrences(pfs: &[Pf]) -> Vec<Occurrence> {
    let mut out = Vec::new();
    for (i, pf) in pfs.iter().enumerate() {
        for (j, a) in pf.args.iter().enumerate() {
            out.push(Occurrence {
                pf: i,
                arg: j,
                key: GroupKey {
                    name: a.name.clone(),
                    set: Arc::new(pf.instances(j)),
                },
            });
        }
    }
    out
}

fn intersects(a: &BTreeSet<GroundAtom>, b: &BTreeSet<GroundAtom>) -> bool {
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    small.iter().any(|x| large.contains(x))
}

struct Run<'a> {
    pfs: Vec<Pf>,
    pinned: &'a [GroundAtom],
    log: OpLog,
    fresh: usize,
    /// Log weight of parfactors whose arguments are all gone.
    constant: f64,
}

impl Run<'_> {
    /// Split parfactors until the instance sets of equally named arguments are equal
    /// or disjoint, and every pinned atom forms a group of its own.
    fn shatter(&mut self) -> Result<()> {
        loop {
            let occ = occurrences(&self.pfs);
            let mut sets: BTreeMap<Arc<str>, BTreeSet<InstanceSet>> = BTreeMap::new();
            for o in &occ {
                sets.entry(o.key.name.clone())
                    .or_default()
                    .insert(o.key.set.clone());
            }
            for a in self.pinned {
                if let Some(s) = sets.get_mut(a.name()) {
                    s.insert(Arc::new(BTreeSet::from([a.clone()])));
                }
            }
            let mut changed = false;
            for o in &occ {
                let others: Vec<&InstanceSet> = sets[&o.key.name]
                    .iter()
                    .filter(|s| **s != o.key.set && intersects(s, &o.key.set))
                    .collect();
                if others.is_empty() {
                    continue;
                }
                let pf = &self.pfs[o.pf];
                let lvs = pf.logvars();
                let mut parts: BTreeMap<Vec<bool>, Vec<_>> = BTreeMap::new();
                for t in pf.tuples() {
                    let inst = pf.args[o.arg].instance(lvs, t);
                    let sig = others.iter().map(|s| s.contains(&inst)).collect();
                    parts.entry(sig).or_default().push(t.clone());
                }
                if parts.len() < 2 {
                    continue;
                }
                let prv = pf.args[o.arg].to_string();
                let pieces = parts
                    .into_values()
                    .map(|tuples| pf.restrict(tuples).map(Pf::simplify))
                    .collect::<Result<Vec<_>>>()?;
                self.log.ops.push(Op::Split {
                    prv,
                    parts: pieces.len(),
                });
                self.pfs.splice(o.pf..=o.pf, pieces);
                changed = true;
                break;
            }
            if !changed {
                return Ok(());
            }
        }
    }

    fn absorb(&mut self, evidence: &BTreeMap<GroundAtom, usize>) -> Result<()> {
        let mut out = Vec::new();
        for mut pf in std::mem::take(&mut self.pfs) {
            let mut j = 0;
            while j < pf.args.len() {
                match pf.args[j]
                    .as_ground()
                    .and_then(|a| evidence.get(&a).map(|v| (a, *v)))
                {
                    Some((atom, value)) => {
                        pf = pf.slice(j, value)?;
                        self.log.ops.push(Op::Absorb {
                            atom: atom.to_string(),
                        });
                    }
                    None => j += 1,
                }
            }
            if pf.args.is_empty() {
                self.constant += pf.logt[0];
            } else {
                out.push(pf);
            }
        }
        self.pfs = out;
        Ok(())
    }

    fn groups(&self) -> BTreeMap<GroupKey, Vec<(usize, usize)>> {
        let mut groups: BTreeMap<GroupKey, Vec<(usize, usize)>> = BTreeMap::new();
        for o in occurrences(&self.pfs) {
            groups.entry(o.key).or_default().push((o.pf, o.arg));
        }
        groups
    }

    fn fresh_logvar(&mut self, base: &Logvar) -> Logvar {
        self.fresh += 1;
        Logvar::new(&format!("{base}#{}", self.fresh))
    }

    /// Rename `pf` so that its argument `arg` reads exactly like `target`, with all
    /// other logvars fresh.
    fn align(&mut self, pf: &Pf, arg: usize, target: &Atom) -> Result<Pf> {
        let mut map: BTreeMap<Logvar, Logvar> = BTreeMap::new();
        for (t, u) in pf.args[arg].terms.iter().zip(&target.terms) {
            match (t, u) {
                (Term::Var(a), Term::Var(b)) => {
                    if map.get(a).is_some_and(|m| m != b)
                        || map.iter().any(|(k, v)| v == b && k != a)
                    {
                        return Err(Error::NotLiftable(format!(
                            "{} cannot be aligned with {target}",
                            pf.args[arg]
                        )));
                    }
                    map.insert(a.clone(), b.clone());
                }
                (Term::Const(a), Term::Const(b)) if a == b => {}
                _ => {
                    return Err(Error::NotLiftable(format!(
                        "{} cannot be aligned with {target}",
                        pf.args[arg]
                    )))
                }
            }
        }
        for l in pf.logvars().to_vec() {
            if let Entry::Vacant(slot) = map.entry(l) {
                let f = self.fresh_logvar(slot.key());
                slot.insert(f);
            }
        }
        pf.rename(&map)
    }

    /// Multiply every parfactor mentioning `key` and sum it out. Returns the new
    /// parfactor list and the ops performed, leaving `self.pfs` untouched.
    fn try_eliminate(
        &mut self,
        key: &GroupKey,
        at: &[(usize, usize)],
    ) -> Result<(Vec<Pf>, Vec<Op>, f64)> {
        let mut members: Vec<usize> = at.iter().map(|&(p, _)| p).collect();
        members.dedup();
        // the product keeps every logvar its factors do not share through the target,
        // and sum-out needs the target to mention all of them
        for &(p, arg) in at {
            let pf = &self.pfs[p];
            let covered: BTreeSet<&Logvar> = pf.args[arg].vars().collect();
            if let Some(l) = pf.logvars().iter().find(|l| !covered.contains(l)) {
                return Err(Error::NotLiftable(format!(
                    "{} does not mention logvar {l}",
                    pf.args[arg]
                )));
            }
        }
        let (first, first_arg) = at[0];
        let target = self.pfs[first].args[first_arg].clone();
        let label = target.to_string();
        let mut ops = Vec::new();
        let mut product = self.pfs[first].clone();
        for &p in &members[1..] {
            let arg = at.iter().find(|&&(q, _)| q == p).unwrap().1;
            let other = self.pfs[p].clone();
            let aligned = self.align(&other, arg, &target)?;
            product = product.multiply(&aligned)?.0;
            ops.push(Op::Multiply { prv: label.clone() });
        }
        let hits: Vec<usize> = (0..product.args.len())
            .filter(|&j| product.args[j].name == key.name && product.instances(j) == *key.set)
            .collect();
        if hits.len() != 1 {
            return Err(Error::NotLiftable(format!(
                "{label} occurs {} times in one parfactor",
                hits.len()
            )));
        }
        let (summed, exponent) = product.sum_out(hits[0])?;
        ops.push(Op::SumOut {
            prv: label,
            exponent,
        });
        let mut pfs: Vec<Pf> = self
            .pfs
            .iter()
            .enumerate()
            .filter(|(i, _)| !members.contains(i))
            .map(|(_, p)| p.clone())
            .collect();
        let mut constant = 0.0;
        if summed.args.is_empty() {
            constant = summed.logt[0];
        } else {
            pfs.push(summed);
        }
        Ok((pfs, ops, constant))
    }

    fn eliminate_all(&mut self) -> Result<()> {
        loop {
            let groups = self.groups();
            let mut candidates: Vec<(&GroupKey, &Vec<(usize, usize)>)> = groups
                .iter()
                .filter(|(k, _)| {
                    !(k.set.len() == 1 && self.pinned.contains(k.set.iter().next().unwrap()))
                })
                .collect();
            if candidates.is_empty() {
                return Ok(());
            }
            candidates.sort_by(|a, b| {
                (a.0.set.len(), &a.0.name, a.0.set.iter().next()).cmp(&(
                    b.0.set.len(),
                    &b.0.name,
                    b.0.set.iter().next(),
                ))
            });
            let mut done = false;
            for (key, at) in &candidates {
                if let Ok((pfs, ops, constant)) = self.try_eliminate(key, at) {
                    self.pfs = pfs;
                    self.constant += constant;
                    self.log.ops.extend(ops);
                    done = true;
                    break;
                }
            }
            if done {
                continue;
            }
            let (key, at) = candidates[0];
            let mut members: Vec<usize> = at.iter().map(|&(p, _)| p).collect();
            members.dedup();
            if members.iter().all(|&p| self.pfs[p].logvars().is_empty()) {
                return Err(Error::NotLiftable(format!(
                    "no elimination possible for {}",
                    key.name
                )));
            }
            let prv = self.pfs[at[0].0].args[at[0].1].to_string();
            let mut grounded = Vec::new();
            let mut rest = Vec::new();
            for (i, pf) in std::mem::take(&mut self.pfs).into_iter().enumerate() {
                if members.contains(&i) {
                    grounded.extend(pf.ground());
                } else {
                    rest.push(pf);
                }
            }
            self.log.ops.push(Op::Ground {
                prv,
                factors: grounded.len(),
            });
            rest.extend(grounded);
            self.pfs = rest;
            self.shatter()?;
        }
    }
}

/// `P(q.targets | q.evidence)` by lifted variable elimination, grounding only where a
/// lifted step does not apply.
pub fn lifted_query(m: &ParameterisedModel, q: &QuerySpec) -> Result<MarginalDistribution> {
    lifted_query_traced(m, q).map(|(d, _)| d)
}

pub fn lifted_query_traced(
    m: &ParameterisedModel,
    q: &QuerySpec,
) -> Result<(MarginalDistribution, OpLog)> {
    let resolved = resolve(m, q)?;
    let mut pinned: Vec<GroundAtom> = q.targets().to_vec();
    pinned.extend(resolved.evidence.keys().cloned());
    let mut run = Run {
        pfs: m
            .parfactors()
            .iter()
            .map(|p| Pf::from_parfactor(p).map(Pf::simplify))
            .collect::<Result<_>>()?,
        pinned: &pinned,
        log: OpLog::default(),
        fresh: 0,
        constant: 0.0,
    };
    run.shatter()?;
    run.absorb(&resolved.evidence)?;
    run.eliminate_all()?;

    let mut joint = Pf {
        args: Vec::new(),
        logt: vec![0.0],
        constraint: Constraint::unit(),
    };
    for pf in &run.pfs {
        joint = joint.multiply(pf)?.0;
    }
    let positions: Vec<Option<usize>> = q
        .targets()
        .iter()
        .map(|t| {
            joint
                .args
                .iter()
                .position(|a| a.as_ground().as_ref() == Some(t))
        })
        .collect();
    if joint.args.len() != positions.iter().flatten().count() {
        return Err(Error::NotLiftable(
            "non-query randvars left after elimination".into(),
        ));
    }
    let dims: Vec<usize> = resolved.ranges.iter().map(|r| r.len()).collect();
    let joint_dims = joint.dims();
    let size: usize = dims.iter().product();
    let logp: Vec<f64> = (0..size)
        .map(|i| {
            let a = decode(&dims, i);
            let mut at = vec![0; joint.args.len()];
            for (k, p) in positions.iter().enumerate() {
                if let Some(p) = p {
                    at[*p] = a[k];
                }
            }
            joint.logt[encode(&joint_dims, &at)]
        })
        .collect();
    let max = logp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || max.is_nan() || run.constant == f64::NEG_INFINITY {
        return Err(Error::InconsistentEvidence);
    }
    let unnorm: Vec<f64> = logp.iter().map(|l| (l - max).exp()).collect();
    let z: f64 = unnorm.iter().sum();
    let probs = unnorm.into_iter().map(|p| p / z).collect();
    Ok((
        MarginalDistribution::new(q.targets().to_vec(), resolved.ranges, probs),
        run.log,
    ))
}
