use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::{Constant, Logvar};
use crate::error::{Error, Result};

pub type Tuple = Vec<Constant>;

/// The tuple set of a constraint.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum ConstraintKind {
    /// An explicit, non-empty set of constant tuples.
    Extensional(BTreeSet<Tuple>),
    /// No restriction: the Cartesian product of the logvars' domains, once known.
    Top,
    /// No tuples at all (template models carry these).
    Empty,
}

/// A logvar sequence together with the constant tuples allowed for it.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Constraint {
    logvars: Vec<Logvar>,
    kind: ConstraintKind,
}

impl Constraint {
    pub fn extensional(
        logvars: Vec<Logvar>,
        tuples: impl IntoIterator<Item = Tuple>,
    ) -> Result<Self> {
        check_distinct(&logvars)?;
        let tuples: BTreeSet<Tuple> = tuples.into_iter().collect();
        if tuples.is_empty() {
            return Err(Error::invalid(
                "extensional constraint needs at least one tuple",
            ));
        }
        if let Some(t) = tuples.iter().find(|t| t.len() != logvars.len()) {
            return Err(Error::invalid(format!(
                "tuple of length {} for {} logvars",
                t.len(),
                logvars.len()
            )));
        }
        Ok(Constraint {
            logvars,
            kind: ConstraintKind::Extensional(tuples),
        })
    }

    pub fn top(logvars: Vec<Logvar>) -> Result<Self> {
        check_distinct(&logvars)?;
        Ok(Constraint {
            logvars,
            kind: ConstraintKind::Top,
        })
    }

    pub fn empty(logvars: Vec<Logvar>) -> Result<Self> {
        check_distinct(&logvars)?;
        Ok(Constraint {
            logvars,
            kind: ConstraintKind::Empty,
        })
    }

    /// The constraint over no logvars: exactly one (empty) tuple.
    pub fn unit() -> Self {
        Constraint {
            logvars: Vec::new(),
            kind: ConstraintKind::Extensional(BTreeSet::from([Vec::new()])),
        }
    }

    pub fn logvars(&self) -> &[Logvar] {
        &self.logvars
    }

    pub fn kind(&self) -> &ConstraintKind {
        &self.kind
    }

    pub fn is_extensional(&self) -> bool {
        matches!(self.kind, ConstraintKind::Extensional(_))
    }

    pub fn tuples(&self) -> Result<&BTreeSet<Tuple>> {
        match &self.kind {
            ConstraintKind::Extensional(t) => Ok(t),
            ConstraintKind::Top => Err(Error::NotGrounded(format!(
                "top constraint over ({}) has no domains attached",
                join(&self.logvars)
            ))),
            ConstraintKind::Empty => Err(Error::NotGrounded(format!(
                "empty constraint over ({})",
                join(&self.logvars)
            ))),
        }
    }

    /// Number of tuples; zero for `Top` and `Empty`.
    pub fn len(&self) -> usize {
        match &self.kind {
            ConstraintKind::Extensional(t) => t.len(),
            _ => 0,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn positions(&self, subset: &[Logvar]) -> Result<Vec<usize>> {
        subset
            .iter()
            .map(|lv| {
                self.logvars.iter().position(|l| l == lv).ok_or_else(|| {
                    Error::invalid(format!(
                        "logvar {lv} is not part of constraint over ({})",
                        join(&self.logvars)
                    ))
                })
            })
            .collect()
    }

    /// Distinct restrictions of the tuples to `keep`, in the order of `keep`.
    pub fn project(&self, keep: &[Logvar]) -> Result<Constraint> {
        check_distinct(keep)?;
        let pos = self.positions(keep)?;
        let tuples = self.tuples()?;
        let projected: BTreeSet<Tuple> = tuples
            .iter()
            .map(|t| pos.iter().map(|&i| t[i].clone()).collect())
            .collect();
        Ok(Constraint {
            logvars: keep.to_vec(),
            kind: ConstraintKind::Extensional(projected),
        })
    }

    /// The number of tuples every tuple over the remaining logvars extends to when
    /// `eliminate` is dropped. Fails if that number is not the same for all of them.
    pub fn conditional_count(&self, eliminate: &[Logvar]) -> Result<usize> {
        check_distinct(eliminate)?;
        self.positions(eliminate)?;
        let tuples = self.tuples()?;
        let keep_pos: Vec<usize> = (0..self.logvars.len())
            .filter(|&i| !eliminate.contains(&self.logvars[i]))
            .collect();
        let mut counts: BTreeMap<Vec<&Constant>, usize> = BTreeMap::new();
        for t in tuples {
            *counts
                .entry(keep_pos.iter().map(|&i| &t[i]).collect())
                .or_default() += 1;
        }
        let mut values = counts.values();
        let first = *values
            .next()
            .expect("extensional constraints are non-empty");
        if let Some(other) = values.find(|&&c| c != first) {
            return Err(Error::NotCountNormalized(format!(
                "eliminating ({}) from ({}) leaves groups of size {first} and {other}",
                join(eliminate),
                join(&self.logvars)
            )));
        }
        Ok(first)
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(({}), ", join(&self.logvars))?;
        match &self.kind {
            ConstraintKind::Top => write!(f, "top)"),
            ConstraintKind::Empty => write!(f, "empty)"),
            ConstraintKind::Extensional(tuples) => {
                write!(f, "{{")?;
                for (i, t) in tuples.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "({})", join(t))?;
                }
                write!(f, "}})")
            }
        }
    }
}

fn check_distinct(logvars: &[Logvar]) -> Result<()> {
    let set: BTreeSet<&Logvar> = logvars.iter().collect();
    if set.len() != logvars.len() {
        return Err(Error::invalid(format!(
            "duplicate logvar in ({})",
            join(logvars)
        )));
    }
    Ok(())
}

pub(crate) fn join<T: fmt::Display>(items: &[T]) -> String {
    items
        .iter()
        .map(|i| i.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}
