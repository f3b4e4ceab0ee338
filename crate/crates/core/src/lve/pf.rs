//! Working representation of parfactors during elimination.
//!
//! Unlike [`Parfactor`], an argument may mention constants as well as logvars, so a
//! parfactor split off for a single individual can name it directly (`Sick(x1)`).
//! Potentials are kept as natural logarithms.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::{
    decode, encode, join, Constant, Constraint, GroundAtom, Logvar, Parfactor, PotentialTable, Prv,
    Range, Tuple,
};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub(crate) enum Term {
    Var(Logvar),
    Const(Constant),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub(crate) struct Atom {
    pub name: Arc<str>,
    pub terms: Vec<Term>,
    pub range: Range,
}

impl Atom {
    pub fn vars(&self) -> impl Iterator<Item = &Logvar> {
        self.terms.iter().filter_map(|t| match t {
            Term::Var(v) => Some(v),
            Term::Const(_) => None,
        })
    }

    pub fn is_ground(&self) -> bool {
        self.vars().next().is_none()
    }

    /// The ground atom for a constraint tuple over `logvars`.
    pub fn instance(&self, logvars: &[Logvar], tuple: &[Constant]) -> GroundAtom {
        let args = self
            .terms
            .iter()
            .map(|t| match t {
                Term::Const(c) => c.clone(),
                Term::Var(v) => {
                    let i = logvars.iter().position(|l| l == v).expect("bound logvar");
                    tuple[i].clone()
                }
            })
            .collect();
        GroundAtom::new(&self.name, args)
    }

    pub fn as_ground(&self) -> Option<GroundAtom> {
        self.is_ground().then(|| self.instance(&[], &[]))
    }

    fn rename(&self, map: &BTreeMap<Logvar, Logvar>) -> Atom {
        Atom {
            name: self.name.clone(),
            range: self.range.clone(),
            terms: self
                .terms
                .iter()
                .map(|t| match t {
                    Term::Var(v) => Term::Var(map.get(v).cloned().unwrap_or_else(|| v.clone())),
                    c => c.clone(),
                })
                .collect(),
        }
    }

    fn substitute(&self, lv: &Logvar, c: &Constant) -> Atom {
        Atom {
            name: self.name.clone(),
            range: self.range.clone(),
            terms: self
                .terms
                .iter()
                .map(|t| match t {
                    Term::Var(v) if v == lv => Term::Const(c.clone()),
                    t => t.clone(),
                })
                .collect(),
        }
    }
}

impl std::fmt::Display for Atom {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.name)?;
        if !self.terms.is_empty() {
            let parts: Vec<String> = self
                .terms
                .iter()
                .map(|t| match t {
                    Term::Var(v) => v.to_string(),
                    Term::Const(c) => c.to_string(),
                })
                .collect();
            write!(f, "({})", parts.join(", "))?;
        }
        Ok(())
    }
}

/// Parfactor with log potentials. Invariant: the constraint's logvars are exactly the
/// logvars occurring in the arguments, and the constraint is extensional.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Pf {
    pub args: Vec<Atom>,
    pub logt: Vec<f64>,
    pub constraint: Constraint,
}

fn logsumexp(values: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.collect();
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

impl Pf {
    pub fn from_parfactor(p: &Parfactor) -> Result<Pf> {
        p.constraint().tuples()?;
        Ok(Pf {
            args: p
                .args()
                .iter()
                .map(|a| Atom {
                    name: a.name().into(),
                    terms: a.params().iter().cloned().map(Term::Var).collect(),
                    range: a.range().clone(),
                })
                .collect(),
            logt: p.table().values().iter().map(|v| v.ln()).collect(),
            constraint: p.constraint().clone(),
        })
    }

    pub fn to_parfactor(&self, name: &str) -> Result<Parfactor> {
        let mut args = Vec::new();
        for a in &self.args {
            let params = a
                .terms
                .iter()
                .map(|t| match t {
                    Term::Var(v) => Ok(v.clone()),
                    Term::Const(c) => Err(Error::NotLiftable(format!(
                        "argument {a} mentions constant {c}"
                    ))),
                })
                .collect::<Result<_>>()?;
            args.push(Prv::new(&a.name, params, a.range.clone()));
        }
        let table = PotentialTable::new(args, self.logt.iter().map(|l| l.exp()).collect())?;
        Parfactor::new(name, table, self.constraint.clone())
    }

    pub fn logvars(&self) -> &[Logvar] {
        self.constraint.logvars()
    }

    pub fn tuples(&self) -> &BTreeSet<Tuple> {
        self.constraint
            .tuples()
            .expect("working parfactors are extensional")
    }

    pub fn dims(&self) -> Vec<usize> {
        self.args.iter().map(|a| a.range.len()).collect()
    }

    pub fn instances(&self, arg: usize) -> BTreeSet<GroundAtom> {
        let lvs = self.logvars();
        self.tuples()
            .iter()
            .map(|t| self.args[arg].instance(lvs, t))
            .collect()
    }

    /// Logvars still used by the arguments, in constraint order.
    fn used_logvars(args: &[Atom], logvars: &[Logvar]) -> Vec<Logvar> {
        let used: BTreeSet<&Logvar> = args.iter().flat_map(|a| a.vars()).collect();
        logvars
            .iter()
            .filter(|l| used.contains(l))
            .cloned()
            .collect()
    }

    /// Same arguments and potentials over a subset of the tuples.
    pub fn restrict(&self, tuples: Vec<Tuple>) -> Result<Pf> {
        Ok(Pf {
            args: self.args.clone(),
            logt: self.logt.clone(),
            constraint: Constraint::extensional(self.logvars().to_vec(), tuples)?,
        })
    }

    pub fn rename(&self, map: &BTreeMap<Logvar, Logvar>) -> Result<Pf> {
        let logvars = self
            .logvars()
            .iter()
            .map(|l| map.get(l).cloned().unwrap_or_else(|| l.clone()))
            .collect();
        Ok(Pf {
            args: self.args.iter().map(|a| a.rename(map)).collect(),
            logt: self.logt.clone(),
            constraint: Constraint::extensional(logvars, self.tuples().iter().cloned())?,
        })
    }

    /// Substitute logvars bound to a single constant, then merge identical arguments.
    pub fn simplify(self) -> Pf {
        let lvs = self.logvars().to_vec();
        let mut singles = Vec::new();
        for (i, lv) in lvs.iter().enumerate() {
            let mut values = self.tuples().iter().map(|t| &t[i]);
            let first = values.next().expect("non-empty").clone();
            if values.all(|c| *c == first) {
                singles.push((lv.clone(), first));
            }
        }
        let mut pf = self;
        if !singles.is_empty() {
            let mut args = pf.args.clone();
            for (lv, c) in &singles {
                args = args.iter().map(|a| a.substitute(lv, c)).collect();
            }
            let keep: Vec<Logvar> = lvs
                .iter()
                .filter(|l| !singles.iter().any(|(s, _)| s == *l))
                .cloned()
                .collect();
            let constraint = pf.constraint.project(&keep).expect("subset");
            pf = Pf {
                args,
                logt: pf.logt,
                constraint,
            };
        }
        pf.merge_duplicate_args()
    }

    /// Identical arguments denote the same randvars: keep the first, restrict the table
    /// to the diagonal.
    fn merge_duplicate_args(self) -> Pf {
        let mut keep: Vec<usize> = Vec::new();
        let mut source: Vec<usize> = Vec::new();
        for (i, a) in self.args.iter().enumerate() {
            match keep.iter().position(|&k| self.args[k] == *a) {
                Some(pos) => source.push(pos),
                None => {
                    source.push(keep.len());
                    keep.push(i);
                }
            }
        }
        if keep.len() == self.args.len() {
            return self;
        }
        let old_dims = self.dims();
        let args: Vec<Atom> = keep.iter().map(|&k| self.args[k].clone()).collect();
        let dims: Vec<usize> = args.iter().map(|a| a.range.len()).collect();
        let size: usize = dims.iter().product();
        let logt = (0..size)
            .map(|idx| {
                let new = decode(&dims, idx);
                let old: Vec<usize> = source.iter().map(|&s| new[s]).collect();
                self.logt[encode(&old_dims, &old)]
            })
            .collect();
        Pf {
            args,
            logt,
            constraint: self.constraint,
        }
    }

    /// One fully ground parfactor per tuple.
    pub fn ground(&self) -> Vec<Pf> {
        self.tuples()
            .iter()
            .map(|t| {
                self.restrict(vec![t.clone()])
                    .expect("one tuple")
                    .simplify()
            })
            .collect()
    }

    /// Fix argument `arg` to `value` and drop it. Logvars that no longer occur in any
    /// argument are summed into the potentials as an exponent.
    pub fn slice(&self, arg: usize, value: usize) -> Result<Pf> {
        let dims = self.dims();
        let args: Vec<Atom> = self
            .args
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != arg)
            .map(|(_, a)| a.clone())
            .collect();
        let new_dims: Vec<usize> = args.iter().map(|a| a.range.len()).collect();
        let size: usize = new_dims.iter().product();
        let logt: Vec<f64> = (0..size)
            .map(|idx| {
                let mut full = decode(&new_dims, idx);
                full.insert(arg, value);
                self.logt[encode(&dims, &full)]
            })
            .collect();
        self.fold_unused(args, logt)
    }

    fn fold_unused(&self, args: Vec<Atom>, mut logt: Vec<f64>) -> Result<Pf> {
        let keep = Self::used_logvars(&args, self.logvars());
        if keep.len() == self.logvars().len() {
            return Ok(Pf {
                args,
                logt,
                constraint: self.constraint.clone(),
            });
        }
        let gone: Vec<Logvar> = self
            .logvars()
            .iter()
            .filter(|l| !keep.contains(l))
            .cloned()
            .collect();
        let n = self.constraint.conditional_count(&gone)?;
        for v in &mut logt {
            *v *= n as f64;
        }
        Ok(Pf {
            args,
            logt,
            constraint: self.constraint.project(&keep)?,
        })
    }

    /// Sum out argument `arg`. The argument must mention every logvar of the parfactor,
    /// so that each of its instances occurs in exactly one ground factor. Returns the
    /// exponent applied for the logvars that disappear.
    pub fn sum_out(&self, arg: usize) -> Result<(Pf, usize)> {
        let target = &self.args[arg];
        let covered: BTreeSet<&Logvar> = target.vars().collect();
        if let Some(l) = self.logvars().iter().find(|l| !covered.contains(l)) {
            return Err(Error::NotLiftable(format!(
                "{target} does not mention logvar {l}; its instances occur in several factors"
            )));
        }
        let dims = self.dims();
        let args: Vec<Atom> = self
            .args
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != arg)
            .map(|(_, a)| a.clone())
            .collect();
        let new_dims: Vec<usize> = args.iter().map(|a| a.range.len()).collect();
        let size: usize = new_dims.iter().product();
        let logt: Vec<f64> = (0..size)
            .map(|idx| {
                let rest = decode(&new_dims, idx);
                logsumexp((0..dims[arg]).map(|v| {
                    let mut full = rest.clone();
                    full.insert(arg, v);
                    self.logt[encode(&dims, &full)]
                }))
            })
            .collect();
        let keep = Self::used_logvars(&args, self.logvars());
        let gone: Vec<Logvar> = self
            .logvars()
            .iter()
            .filter(|l| !keep.contains(l))
            .cloned()
            .collect();
        let n = self.constraint.conditional_count(&gone)?;
        Ok((
            Pf {
                args,
                logt: logt.into_iter().map(|v| v * n as f64).collect(),
                constraint: self.constraint.project(&keep)?,
            },
            n,
        ))
    }

    /// Product of two parfactors joined on their shared logvars.
    ///
    /// Both constraints must agree on the shared logvars and be count-normalised w.r.t.
    /// the logvars the other side lacks; each side's potentials are raised to one over
    /// the number of partners a tuple finds on the other side, so the grounding of the
    /// product equals the union of both groundings. Identical arguments are merged.
    /// Returns the product and the positions of `other`'s arguments in it.
    pub fn multiply(&self, other: &Pf) -> Result<(Pf, Vec<usize>)> {
        let shared: Vec<Logvar> = self
            .logvars()
            .iter()
            .filter(|l| other.logvars().contains(l))
            .cloned()
            .collect();
        if self.constraint.project(&shared)? != other.constraint.project(&shared)? {
            return Err(Error::Misaligned(format!(
                "constraints differ on shared logvars ({})",
                join(&shared)
            )));
        }
        let own_only: Vec<Logvar> = self
            .logvars()
            .iter()
            .filter(|l| !shared.contains(l))
            .cloned()
            .collect();
        let other_only: Vec<Logvar> = other
            .logvars()
            .iter()
            .filter(|l| !shared.contains(l))
            .cloned()
            .collect();
        let own_count = self.constraint.conditional_count(&own_only)?;
        let other_count = other.constraint.conditional_count(&other_only)?;

        // join
        let other_shared_pos: Vec<usize> = shared
            .iter()
            .map(|s| other.logvars().iter().position(|l| l == s).unwrap())
            .collect();
        let other_only_pos: Vec<usize> = other_only
            .iter()
            .map(|s| other.logvars().iter().position(|l| l == s).unwrap())
            .collect();
        let own_shared_pos: Vec<usize> = shared
            .iter()
            .map(|s| self.logvars().iter().position(|l| l == s).unwrap())
            .collect();
        let mut index: HashMap<Vec<&Constant>, Vec<&Tuple>> = HashMap::new();
        for t in other.tuples() {
            index
                .entry(other_shared_pos.iter().map(|&i| &t[i]).collect())
                .or_default()
                .push(t);
        }
        let mut tuples = Vec::new();
        for t in self.tuples() {
            let key: Vec<&Constant> = own_shared_pos.iter().map(|&i| &t[i]).collect();
            for u in &index[&key] {
                let mut joined = t.clone();
                joined.extend(other_only_pos.iter().map(|&i| u[i].clone()));
                tuples.push(joined);
            }
        }
        let mut logvars = self.logvars().to_vec();
        logvars.extend(other_only);

        let mut args = self.args.clone();
        let mut positions = Vec::new();
        for a in &other.args {
            match args.iter().position(|x| x == a) {
                Some(p) => positions.push(p),
                None => {
                    positions.push(args.len());
                    args.push(a.clone());
                }
            }
        }
        let dims: Vec<usize> = args.iter().map(|a| a.range.len()).collect();
        let own_dims = self.dims();
        let other_dims = other.dims();
        let size: usize = dims.iter().product();
        let (own_exp, other_exp) = (1.0 / other_count as f64, 1.0 / own_count as f64);
        let logt = (0..size)
            .map(|idx| {
                let full = decode(&dims, idx);
                let own = encode(&own_dims, &full[..self.args.len()]);
                let oth: Vec<usize> = positions.iter().map(|&p| full[p]).collect();
                let oth = encode(&other_dims, &oth);
                let (a, b) = (self.logt[own], other.logt[oth]);
                a * own_exp + b * other_exp
            })
            .collect();
        Ok((
            Pf {
                args,
                logt,
                constraint: Constraint::extensional(logvars, tuples)?,
            },
            positions,
        ))
    }
}
