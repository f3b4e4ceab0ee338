//! JSON model files.
//!
//! ```json
//! {
//!   "randvars": [{"name": "Epid", "arity": 0}, {"name": "Sick", "arity": 1}],
//!   "logvars": ["X"],
//!   "parfactors": [
//!     {"name": "g0", "args": ["Epid"], "values": [1, 2], "constraint": "empty"},
//!     {"name": "g1", "args": ["Epid", "Sick(X)"], "values": "random", "constraint": "top"}
//!   ]
//! }
//! ```
//!
//! `range` defaults to `["false", "true"]`. `values` is either the flat row-major table
//! or the string `"random"`, which draws every potential uniformly from `[0.1, 1)` using
//! the seed passed to the loader. A constraint is `"empty"`, `"top"` or
//! `{"logvars": [...], "tuples": [[...], ...]}`; omitted `logvars` default to the order of
//! first appearance in `args`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    split_atom, Constant, Constraint, ConstraintKind, Logvar, ParameterisedModel, Parfactor,
    PotentialTable, Prv, RandvarDecl, Range, Signatures, TemplateModel,
};
use crate::domain::DomainWorld;
use crate::error::{Error, Result};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub randvars: Vec<RandvarEntry>,
    #[serde(default)]
    pub logvars: Vec<String>,
    pub parfactors: Vec<ParfactorEntry>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandvarEntry {
    pub name: String,
    #[serde(default)]
    pub arity: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<Vec<String>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParfactorEntry {
    pub name: String,
    pub args: Vec<String>,
    pub values: TableValues,
    pub constraint: ConstraintEntry,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TableValues {
    Explicit(Vec<f64>),
    Generated(String),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ConstraintEntry {
    Marker(String),
    Tuples {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        logvars: Option<Vec<String>>,
        tuples: Vec<Vec<String>>,
    },
}

impl ModelFile {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }

    fn signatures(&self) -> Result<Signatures> {
        let mut sigs = Signatures::new();
        for rv in &self.randvars {
            let range = match &rv.range {
                Some(labels) => Range::new(labels.iter().cloned())?,
                None => Range::boolean(),
            };
            let decl = RandvarDecl {
                arity: rv.arity,
                range,
            };
            if sigs.insert(rv.name.clone(), decl).is_some() {
                return Err(Error::invalid(format!(
                    "randvar {} declared twice",
                    rv.name
                )));
            }
        }
        Ok(sigs)
    }

    fn parfactors(
        &self,
        sigs: &Signatures,
        seed: u64,
    ) -> Result<Vec<(Parfactor, &ConstraintEntry)>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::new();
        for entry in &self.parfactors {
            let mut args = Vec::new();
            let mut arg_logvars: Vec<Logvar> = Vec::new();
            for text in &entry.args {
                let (name, params) = split_atom(text)?;
                let decl = sigs
                    .get(&name)
                    .ok_or_else(|| Error::invalid(format!("randvar {name} is not declared")))?;
                let params: Vec<Logvar> = params.iter().map(|p| Logvar::new(p)).collect();
                for p in &params {
                    if !self.logvars.is_empty() && !self.logvars.iter().any(|l| l == p.name()) {
                        return Err(Error::invalid(format!("logvar {p} is not declared")));
                    }
                    if !arg_logvars.contains(p) {
                        arg_logvars.push(p.clone());
                    }
                }
                args.push(Prv::new(&name, params, decl.range.clone()));
            }
            let size: usize = args.iter().map(|a| a.range().len()).product();
            let values = match &entry.values {
                TableValues::Explicit(v) => v.clone(),
                TableValues::Generated(kind) if kind == "random" => {
                    (0..size).map(|_| rng.gen_range(0.1..1.0)).collect()
                }
                TableValues::Generated(other) => {
                    return Err(Error::invalid(format!(
                        "parfactor {}: unknown table generator `{other}`",
                        entry.name
                    )))
                }
            };
            let table = PotentialTable::new(args, values)
                .map_err(|e| Error::invalid(format!("parfactor {}: {e}", entry.name)))?;
            let constraint = match &entry.constraint {
                ConstraintEntry::Marker(m) if m == "empty" => Constraint::empty(arg_logvars)?,
                ConstraintEntry::Marker(m) if m == "top" => Constraint::top(arg_logvars)?,
                ConstraintEntry::Marker(m) => {
                    return Err(Error::invalid(format!(
                        "parfactor {}: unknown constraint `{m}`",
                        entry.name
                    )))
                }
                ConstraintEntry::Tuples { logvars, tuples } => {
                    let logvars = match logvars {
                        Some(l) => l.iter().map(|s| Logvar::new(s)).collect(),
                        None => arg_logvars,
                    };
                    Constraint::extensional(
                        logvars,
                        tuples
                            .iter()
                            .map(|t| t.iter().map(|c| Constant::new(c)).collect()),
                    )?
                }
            };
            out.push((
                Parfactor::new(&entry.name, table, constraint)?,
                &entry.constraint,
            ));
        }
        Ok(out)
    }

    fn declared_logvars(&self, pfs: &[(Parfactor, &ConstraintEntry)]) -> Vec<Logvar> {
        if !self.logvars.is_empty() {
            return self.logvars.iter().map(|l| Logvar::new(l)).collect();
        }
        let mut out: Vec<Logvar> = Vec::new();
        for l in pfs.iter().flat_map(|(p, _)| p.logvars()) {
            if !out.contains(l) {
                out.push(l.clone());
            }
        }
        out
    }

    /// Load as a template model; every constraint must be `"empty"`.
    pub fn template(&self, seed: u64) -> Result<TemplateModel> {
        let sigs = self.signatures()?;
        let pfs = self.parfactors(&sigs, seed)?;
        let logvars = self.declared_logvars(&pfs);
        TemplateModel::new(logvars, sigs, pfs.into_iter().map(|(p, _)| p).collect())
    }

    /// Load as a parameterised model. `"top"` constraints are resolved against `domains`;
    /// parameterless parfactors marked `"empty"` or `"top"` get the unit constraint.
    pub fn model(&self, seed: u64, domains: Option<&DomainWorld>) -> Result<ParameterisedModel> {
        let sigs = self.signatures()?;
        let mut out = Vec::new();
        for (pf, _) in self.parfactors(&sigs, seed)? {
            let pf = match pf.constraint().kind() {
                ConstraintKind::Extensional(_) => pf,
                _ if pf.logvars().is_empty() => pf.with_constraint(Constraint::unit())?,
                ConstraintKind::Top => match domains {
                    Some(dw) => pf.resolve_top(dw)?,
                    None => return Err(Error::MissingDomain(pf.logvars()[0].to_string())),
                },
                ConstraintKind::Empty => {
                    return Err(Error::NotGrounded(format!(
                        "parfactor {} has an empty constraint",
                        pf.name()
                    )))
                }
            };
            out.push(pf);
        }
        ParameterisedModel::new(sigs, out)
    }
}
