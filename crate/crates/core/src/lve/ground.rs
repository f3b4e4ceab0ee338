//! Propositional variable elimination over the grounding of a model.

use std::collections::{BTreeMap, BTreeSet};

use super::{resolve, MarginalDistribution, QuerySpec};
use crate::error::{Error, Result};
use crate::model::{decode, encode, GroundAtom, ParameterisedModel};

/// Size of the propositional problem solved by [`ground_ve_traced`].
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct GroundStats {
    pub factors: usize,
    pub randvars: usize,
    /// Entries of the largest intermediate factor.
    pub max_factor_size: usize,
}

#[derive(Clone, Debug)]
struct Factor {
    vars: Vec<usize>,
    dims: Vec<usize>,
    values: Vec<f64>,
}

impl Factor {
    fn size(&self) -> usize {
        self.values.len()
    }

    fn scaled(mut self) -> Factor {
        let max = self.values.iter().copied().fold(0.0, f64::max);
        if max > 0.0 {
            for v in &mut self.values {
                *v /= max;
            }
        }
        self
    }

    /// Fix `var` to `value` and drop it.
    fn slice(&self, var: usize, value: usize) -> Factor {
        let Some(pos) = self.vars.iter().position(|&v| v == var) else {
            return self.clone();
        };
        let mut vars = self.vars.clone();
        let mut dims = self.dims.clone();
        vars.remove(pos);
        dims.remove(pos);
        let size: usize = dims.iter().product();
        let values = (0..size)
            .map(|i| {
                let mut full = decode(&dims, i);
                full.insert(pos, value);
                self.values[encode(&self.dims, &full)]
            })
            .collect();
        Factor { vars, dims, values }
    }

    fn product(&self, other: &Factor) -> Factor {
        let mut vars = self.vars.clone();
        let mut dims = self.dims.clone();
        for (v, d) in other.vars.iter().zip(&other.dims) {
            if !vars.contains(v) {
                vars.push(*v);
                dims.push(*d);
            }
        }
        let other_pos: Vec<usize> = other
            .vars
            .iter()
            .map(|v| vars.iter().position(|x| x == v).unwrap())
            .collect();
        let size: usize = dims.iter().product();
        let values = (0..size)
            .map(|i| {
                let full = decode(&dims, i);
                let a = encode(&self.dims, &full[..self.vars.len()]);
                let b: Vec<usize> = other_pos.iter().map(|&p| full[p]).collect();
                self.values[a] * other.values[encode(&other.dims, &b)]
            })
            .collect();
        Factor { vars, dims, values }
    }

    fn sum_out(&self, var: usize) -> Factor {
        let pos = self.vars.iter().position(|&v| v == var).unwrap();
        let mut vars = self.vars.clone();
        let mut dims = self.dims.clone();
        vars.remove(pos);
        dims.remove(pos);
        let size: usize = dims.iter().product();
        let values = (0..size)
            .map(|i| {
                let rest = decode(&dims, i);
                (0..self.dims[pos])
                    .map(|v| {
                        let mut full = rest.clone();
                        full.insert(pos, v);
                        self.values[encode(&self.dims, &full)]
                    })
                    .sum()
            })
            .collect();
        Factor { vars, dims, values }
    }
}

/// Variable elimination with a greedy order: the next variable is the one whose
/// factors span the fewest joint entries.
struct Elimination {
    factors: Vec<Option<Factor>>,
    /// Live factors mentioning each variable.
    occ: Vec<BTreeSet<usize>>,
    dims: Vec<usize>,
    stamp: Vec<usize>,
    round: usize,
}

impl Elimination {
    fn new(factors: Vec<Factor>, dims: Vec<usize>) -> Self {
        let mut occ = vec![BTreeSet::new(); dims.len()];
        for (i, f) in factors.iter().enumerate() {
            for &v in &f.vars {
                occ[v].insert(i);
            }
        }
        Elimination {
            factors: factors.into_iter().map(Some).collect(),
            occ,
            stamp: vec![0; dims.len()],
            dims,
            round: 0,
        }
    }

    fn score(&mut self, var: usize) -> usize {
        self.round += 1;
        let mut size = 1usize;
        for &f in &self.occ[var] {
            for &v in &self.factors[f].as_ref().expect("live").vars {
                if self.stamp[v] != self.round {
                    self.stamp[v] = self.round;
                    size = size.saturating_mul(self.dims[v]);
                }
            }
        }
        size
    }

    fn take(&mut self, f: usize) -> Factor {
        let factor = self.factors[f].take().expect("live");
        for &v in &factor.vars {
            self.occ[v].remove(&f);
        }
        factor
    }

    fn push(&mut self, factor: Factor) {
        let id = self.factors.len();
        for &v in &factor.vars {
            self.occ[v].insert(id);
        }
        self.factors.push(Some(factor));
    }

    fn run(&mut self, vars: &[usize], stats: &mut GroundStats) {
        let mut score: BTreeMap<usize, usize> = BTreeMap::new();
        let mut queue: BTreeSet<(usize, usize)> = BTreeSet::new();
        for &v in vars {
            let s = self.score(v);
            score.insert(v, s);
            queue.insert((s, v));
        }
        while let Some((_, var)) = queue.pop_first() {
            score.remove(&var);
            let ids: Vec<usize> = self.occ[var].iter().copied().collect();
            let with: Vec<Factor> = ids.into_iter().map(|f| self.take(f)).collect();
            let Some(product) = with.into_iter().reduce(|a, b| a.product(&b).scaled()) else {
                continue;
            };
            stats.max_factor_size = stats.max_factor_size.max(product.size());
            let summed = product.sum_out(var).scaled();
            let touched = summed.vars.clone();
            self.push(summed);
            for v in touched {
                if let Some(old) = score.get(&v).copied() {
                    let new = self.score(v);
                    queue.remove(&(old, v));
                    queue.insert((new, v));
                    score.insert(v, new);
                }
            }
        }
    }

    fn into_factors(self) -> Vec<Factor> {
        self.factors.into_iter().flatten().collect()
    }
}

/// Exact `P(q.targets | q.evidence)` by variable elimination on `gr(m)`.
pub fn ground_ve(m: &ParameterisedModel, q: &QuerySpec) -> Result<MarginalDistribution> {
    ground_ve_traced(m, q).map(|(d, _)| d)
}

pub fn ground_ve_traced(
    m: &ParameterisedModel,
    q: &QuerySpec,
) -> Result<(MarginalDistribution, GroundStats)> {
    let resolved = resolve(m, q)?;
    let mut ids: BTreeMap<GroundAtom, usize> = BTreeMap::new();
    let mut dims_of: Vec<usize> = Vec::new();
    let mut factors = Vec::new();
    for gf in m.ground()? {
        // a randvar repeated within one factor takes the diagonal
        let mut vars: Vec<usize> = Vec::new();
        let mut source = Vec::new();
        for (atom, prv) in gf.atoms.iter().zip(gf.table.args()) {
            let next = ids.len();
            let id = *ids.entry(atom.clone()).or_insert(next);
            if id == dims_of.len() {
                dims_of.push(prv.range().len());
            }
            match vars.iter().position(|&v| v == id) {
                Some(p) => source.push(p),
                None => {
                    source.push(vars.len());
                    vars.push(id);
                }
            }
        }
        let dims: Vec<usize> = vars.iter().map(|&v| dims_of[v]).collect();
        let table_dims = gf.table.dims();
        let size: usize = dims.iter().product();
        let values = (0..size)
            .map(|i| {
                let a = decode(&dims, i);
                let full: Vec<usize> = source.iter().map(|&s| a[s]).collect();
                gf.table.values()[encode(&table_dims, &full)]
            })
            .collect();
        factors.push(Factor { vars, dims, values });
    }
    let mut stats = GroundStats {
        factors: factors.len(),
        randvars: ids.len(),
        max_factor_size: factors.iter().map(Factor::size).max().unwrap_or(0),
    };

    let observed: BTreeMap<usize, usize> = resolved
        .evidence
        .iter()
        .map(|(atom, &value)| (ids[atom], value))
        .collect();
    for f in &mut factors {
        let hits: Vec<(usize, usize)> = f
            .vars
            .iter()
            .filter_map(|v| observed.get(v).map(|&x| (*v, x)))
            .collect();
        for (v, x) in hits {
            *f = f.slice(v, x);
        }
    }

    let targets: Vec<usize> = q.targets().iter().map(|t| ids[t]).collect();
    let mut elim = Elimination::new(factors, dims_of.clone());
    let order: Vec<usize> = (0..ids.len())
        .filter(|v| !targets.contains(v) && !observed.contains_key(v))
        .collect();
    elim.run(&order, &mut stats);
    let factors = elim.into_factors();

    let mut joint = Factor {
        vars: Vec::new(),
        dims: Vec::new(),
        values: vec![1.0],
    };
    for f in &factors {
        joint = joint.product(f).scaled();
    }
    stats.max_factor_size = stats.max_factor_size.max(joint.size());
    let dims: Vec<usize> = resolved.ranges.iter().map(|r| r.len()).collect();
    let size: usize = dims.iter().product();
    let mut probs: Vec<f64> = (0..size)
        .map(|i| {
            let a = decode(&dims, i);
            let at: Vec<usize> = joint
                .vars
                .iter()
                .map(|v| a[targets.iter().position(|t| t == v).unwrap()])
                .collect();
            joint.values[encode(&joint.dims, &at)]
        })
        .collect();
    let z: f64 = probs.iter().sum();
    if z <= 0.0 || !z.is_finite() {
        return Err(Error::InconsistentEvidence);
    }
    for p in &mut probs {
        *p /= z;
    }
    Ok((
        MarginalDistribution::new(q.targets().to_vec(), resolved.ranges, probs),
        stats,
    ))
}
