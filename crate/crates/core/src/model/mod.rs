//! Parameterised models: PRVs, constraints, potential tables and parfactors.
//!
//! A [`TemplateModel`] holds parfactors whose constraints are all empty. Giving each
//! parfactor a concrete constraint turns it into a [`ParameterisedModel`], which has
//! the usual meaning of the normalised product of all its ground factors.

mod constraint;
pub mod format;
mod table;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

pub(crate) use constraint::join;
pub use constraint::{Constraint, ConstraintKind, Tuple};
pub use table::{decode, encode, strides, PotentialTable};

use crate::domain::DomainWorld;
use crate::error::{Error, Result};

/// A logical variable.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Logvar(Arc<str>);

impl Logvar {
    pub fn new(name: &str) -> Self {
        Logvar(name.into())
    }

    pub fn name(&self) -> &str {
        &self.0
    }
}

/// An individual of the universe. Distinct names are distinct individuals.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Constant(Arc<str>);

impl Constant {
    pub fn new(name: &str) -> Self {
        Constant(name.into())
    }

    pub fn name(&self) -> &str {
        &self.0
    }
}

macro_rules! name_fmt {
    ($t:ty) => {
        impl fmt::Display for $t {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }
        impl fmt::Debug for $t {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }
    };
}
name_fmt!(Logvar);
name_fmt!(Constant);

/// Ordered list of the values a randvar can take.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Range(Arc<[String]>);

impl Range {
    pub fn new<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.len() < 2 {
            return Err(Error::invalid("a range needs at least two values"));
        }
        let unique: BTreeSet<&String> = labels.iter().collect();
        if unique.len() != labels.len() {
            return Err(Error::invalid(format!(
                "duplicate range label in [{}]",
                labels.join(", ")
            )));
        }
        Ok(Range(labels.into()))
    }

    /// `[false, true]`
    pub fn boolean() -> Self {
        Range(vec!["false".to_string(), "true".to_string()].into())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.0
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.0.iter().position(|l| l == label)
    }
}

/// A parameterised randvar `R(L1, ..., Ln)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Prv {
    name: Arc<str>,
    params: Vec<Logvar>,
    range: Range,
}

impl Prv {
    pub fn new(name: &str, params: Vec<Logvar>, range: Range) -> Self {
        Prv {
            name: name.into(),
            params,
            range,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn params(&self) -> &[Logvar] {
        &self.params
    }

    pub fn range(&self) -> &Range {
        &self.range
    }

    /// Instantiate the parameters from a tuple over `logvars`.
    pub fn instantiate(&self, logvars: &[Logvar], tuple: &[Constant]) -> GroundAtom {
        let args = self
            .params
            .iter()
            .map(|p| {
                let i = logvars
                    .iter()
                    .position(|l| l == p)
                    .expect("parameter covered by constraint");
                tuple[i].clone()
            })
            .collect();
        GroundAtom {
            name: self.name.clone(),
            args,
        }
    }
}

impl fmt::Display for Prv {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)?;
        if !self.params.is_empty() {
            write!(f, "({})", join(&self.params))?;
        }
        Ok(())
    }
}

/// A grounded randvar such as `Sick(alice)`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GroundAtom {
    name: Arc<str>,
    args: Vec<Constant>,
}

impl GroundAtom {
    pub fn new(name: &str, args: Vec<Constant>) -> Self {
        GroundAtom {
            name: name.into(),
            args,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn args(&self) -> &[Constant] {
        &self.args
    }
}

impl fmt::Display for GroundAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)?;
        if !self.args.is_empty() {
            write!(f, "({})", join(&self.args))?;
        }
        Ok(())
    }
}

impl fmt::Debug for GroundAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for GroundAtom {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, args) = split_atom(s)?;
        Ok(GroundAtom::new(
            &name,
            args.iter().map(|a| Constant::new(a)).collect(),
        ))
    }
}

/// Splits `name(a, b)` or `name` into its parts.
pub(crate) fn split_atom(text: &str) -> Result<(String, Vec<String>)> {
    let text = text.trim();
    let valid = |s: &str| {
        !s.is_empty()
            && s.chars()
                .all(|c| c.is_alphanumeric() || c == '_' || c == '-' || c == '\'')
    };
    let (name, args) = match text.find('(') {
        None => (text, Vec::new()),
        Some(open) => {
            let inner = text[open + 1..].strip_suffix(')').ok_or_else(|| {
                Error::invalid(format!("unbalanced parentheses in atom `{text}`"))
            })?;
            let args: Vec<String> = inner.split(',').map(|a| a.trim().to_string()).collect();
            (text[..open].trim(), args)
        }
    };
    if !valid(name) || !args.iter().all(|a| valid(a)) {
        return Err(Error::invalid(format!("malformed atom `{text}`")));
    }
    Ok((name.to_string(), args))
}

/// Declared arity and range of a randvar name.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RandvarDecl {
    pub arity: usize,
    pub range: Range,
}

pub type Signatures = BTreeMap<String, RandvarDecl>;

/// A single factor of the grounding `gr(g)` of a parfactor.
#[derive(Clone, Debug, PartialEq)]
pub struct GroundFactor {
    pub atoms: Vec<GroundAtom>,
    pub table: Arc<PotentialTable>,
}

/// `phi(A1, ..., An) | C`.
#[derive(Clone, Debug, PartialEq)]
pub struct Parfactor {
    name: String,
    table: Arc<PotentialTable>,
    constraint: Constraint,
}

impl Parfactor {
    pub fn new(name: &str, table: PotentialTable, constraint: Constraint) -> Result<Self> {
        let mut used: Vec<&Logvar> = Vec::new();
        for p in table.args().iter().flat_map(|a| a.params()) {
            if !used.contains(&p) {
                used.push(p);
            }
        }
        let declared: BTreeSet<&Logvar> = constraint.logvars().iter().collect();
        if declared.len() != used.len() || used.iter().any(|l| !declared.contains(l)) {
            return Err(Error::invalid(format!(
                "parfactor {name}: constraint logvars ({}) must equal the argument logvars ({})",
                join(constraint.logvars()),
                join(&used)
            )));
        }
        Ok(Parfactor {
            name: name.to_string(),
            table: Arc::new(table),
            constraint,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn table(&self) -> &PotentialTable {
        &self.table
    }

    pub fn args(&self) -> &[Prv] {
        self.table.args()
    }

    pub fn constraint(&self) -> &Constraint {
        &self.constraint
    }

    pub fn logvars(&self) -> &[Logvar] {
        self.constraint.logvars()
    }

    /// Same table, new constraint over the same logvars.
    pub fn with_constraint(&self, constraint: Constraint) -> Result<Self> {
        let same: BTreeSet<&Logvar> = constraint.logvars().iter().collect();
        let own: BTreeSet<&Logvar> = self.logvars().iter().collect();
        if same != own {
            return Err(Error::InvalidConstraintWorld(format!(
                "parfactor {} is over ({}) but the constraint is over ({})",
                self.name,
                join(self.logvars()),
                join(constraint.logvars())
            )));
        }
        Ok(Parfactor {
            name: self.name.clone(),
            table: self.table.clone(),
            constraint,
        })
    }

    /// One ground factor per constraint tuple, all sharing this parfactor's table.
    pub fn ground(&self) -> Result<Vec<GroundFactor>> {
        let tuples = self.constraint.tuples()?;
        let logvars = self.logvars();
        Ok(tuples
            .iter()
            .map(|t| GroundFactor {
                atoms: self
                    .args()
                    .iter()
                    .map(|a| a.instantiate(logvars, t))
                    .collect(),
                table: self.table.clone(),
            })
            .collect())
    }

    /// Replace a `Top` constraint by the Cartesian product of the logvars' domains.
    pub fn resolve_top(&self, world: &DomainWorld) -> Result<Parfactor> {
        if !matches!(self.constraint.kind(), ConstraintKind::Top) {
            return Err(Error::invalid(format!(
                "parfactor {} does not carry a top constraint",
                self.name
            )));
        }
        let mut tuples: Vec<Tuple> = vec![Vec::new()];
        for lv in self.logvars() {
            let domain = world
                .domain(lv)
                .ok_or_else(|| Error::MissingDomain(lv.to_string()))?;
            if domain.is_empty() {
                return Err(Error::invalid(format!("domain of {lv} is empty")));
            }
            tuples = tuples
                .into_iter()
                .flat_map(|t| {
                    domain.iter().map(move |c| {
                        let mut t = t.clone();
                        t.push(c.clone());
                        t
                    })
                })
                .collect();
        }
        self.with_constraint(Constraint::extensional(self.logvars().to_vec(), tuples)?)
    }

    /// Whether `atom` is one of the randvars in `gr(self)`.
    pub fn covers(&self, atom: &GroundAtom) -> bool {
        let Ok(tuples) = self.constraint.tuples() else {
            return false;
        };
        let logvars = self.logvars();
        self.args()
            .iter()
            .filter(|a| a.name() == atom.name() && a.params().len() == atom.args().len())
            .any(|a| tuples.iter().any(|t| &a.instantiate(logvars, t) == atom))
    }
}

fn check_signatures(signatures: &Signatures, parfactors: &[Parfactor]) -> Result<()> {
    let mut names = BTreeSet::new();
    for pf in parfactors {
        if !names.insert(pf.name()) {
            return Err(Error::invalid(format!(
                "duplicate parfactor name {}",
                pf.name()
            )));
        }
        for arg in pf.args() {
            let decl = signatures
                .get(arg.name())
                .ok_or_else(|| Error::invalid(format!("randvar {} is not declared", arg.name())))?;
            if decl.arity != arg.params().len() || &decl.range != arg.range() {
                return Err(Error::invalid(format!(
                    "PRV {arg} in {} does not match the declaration of {}",
                    pf.name(),
                    arg.name()
                )));
            }
        }
    }
    Ok(())
}

/// Parfactors with empty constraints: structure and potentials without a universe.
#[derive(Clone, Debug, PartialEq)]
pub struct TemplateModel {
    logvars: Vec<Logvar>,
    signatures: Signatures,
    parfactors: Vec<Parfactor>,
}

impl TemplateModel {
    pub fn new(
        logvars: Vec<Logvar>,
        signatures: Signatures,
        parfactors: Vec<Parfactor>,
    ) -> Result<Self> {
        check_signatures(&signatures, &parfactors)?;
        for pf in &parfactors {
            if !matches!(pf.constraint().kind(), ConstraintKind::Empty) {
                return Err(Error::invalid(format!(
                    "template parfactor {} must have an empty constraint",
                    pf.name()
                )));
            }
            if let Some(l) = pf.logvars().iter().find(|l| !logvars.contains(l)) {
                return Err(Error::invalid(format!("logvar {l} is not declared")));
            }
        }
        Ok(TemplateModel {
            logvars,
            signatures,
            parfactors,
        })
    }

    pub fn logvars(&self) -> &[Logvar] {
        &self.logvars
    }

    pub fn signatures(&self) -> &Signatures {
        &self.signatures
    }

    pub fn parfactors(&self) -> &[Parfactor] {
        &self.parfactors
    }

    pub fn parfactor_index(&self, name: &str) -> Option<usize> {
        self.parfactors.iter().position(|p| p.name() == name)
    }
}

/// A model whose parfactors all carry extensional constraints.
#[derive(Clone, Debug, PartialEq)]
pub struct ParameterisedModel {
    signatures: Signatures,
    parfactors: Vec<Parfactor>,
}

impl ParameterisedModel {
    pub fn new(signatures: Signatures, parfactors: Vec<Parfactor>) -> Result<Self> {
        check_signatures(&signatures, &parfactors)?;
        if let Some(pf) = parfactors.iter().find(|p| !p.constraint().is_extensional()) {
            return Err(Error::NotGrounded(format!(
                "parfactor {} has constraint {}",
                pf.name(),
                pf.constraint()
            )));
        }
        Ok(ParameterisedModel {
            signatures,
            parfactors,
        })
    }

    pub fn signatures(&self) -> &Signatures {
        &self.signatures
    }

    pub fn parfactors(&self) -> &[Parfactor] {
        &self.parfactors
    }

    pub fn contains(&self, atom: &GroundAtom) -> bool {
        self.parfactors.iter().any(|p| p.covers(atom))
    }

    pub fn range_of(&self, atom: &GroundAtom) -> Result<&Range> {
        match self.signatures.get(atom.name()) {
            Some(d) if d.arity == atom.args().len() => Ok(&d.range),
            _ => Err(Error::UnknownAtom(atom.to_string())),
        }
    }

    pub fn ground(&self) -> Result<Vec<GroundFactor>> {
        let mut out = Vec::new();
        for p in &self.parfactors {
            out.extend(p.ground()?);
        }
        Ok(out)
    }
}
