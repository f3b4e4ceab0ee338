//! Models with an unknown universe and their expansion into weighted parameterised
//! models.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::domain::{enumerate_worlds, filter_worlds, DomainSpec, DomainWorld, WorldFilter};
use crate::error::{Error, Result};
use crate::model::{ConstraintKind, Logvar, ParameterisedModel, TemplateModel};
use crate::program::{evaluate, uniformize, ConstraintWorld, Program};

/// Template model, constraint program and domain specification, plus an optional
/// filter applied while expanding.
#[derive(Clone, Debug)]
pub struct UniverseModel {
    template: TemplateModel,
    program: Program,
    domains: DomainSpec,
    filter: Option<WorldFilter>,
}

impl UniverseModel {
    pub fn new(
        template: TemplateModel,
        program: Program,
        domains: DomainSpec,
        filter: Option<WorldFilter>,
    ) -> Result<Self> {
        domains.validate()?;
        if let Some(l) = template
            .logvars()
            .iter()
            .find(|l| !domains.domains.contains_key(l.name()))
        {
            return Err(Error::MissingDomain(l.to_string()));
        }
        for pf in template.parfactors() {
            if !pf.logvars().is_empty() && !program.bindings().contains_key(pf.name()) {
                return Err(Error::invalid(format!(
                    "parfactor {} has no binding",
                    pf.name()
                )));
            }
        }
        if let Some(id) = program
            .bindings()
            .keys()
            .find(|id| template.parfactor_index(id).is_none())
        {
            return Err(Error::invalid(format!(
                "binding for unknown parfactor {id}"
            )));
        }
        Ok(UniverseModel {
            template,
            program,
            domains,
            filter,
        })
    }

    pub fn template(&self) -> &TemplateModel {
        &self.template
    }

    pub fn program(&self) -> &Program {
        &self.program
    }

    pub fn domains(&self) -> &DomainSpec {
        &self.domains
    }

    pub fn filter(&self) -> Option<&WorldFilter> {
        self.filter.as_ref()
    }
}

/// Replace every empty constraint of `tmpl` by the matching constraint of `cw`.
pub fn instantiate(tmpl: &TemplateModel, cw: &ConstraintWorld) -> Result<ParameterisedModel> {
    if cw.is_degenerate() {
        return Err(Error::InvalidConstraintWorld(format!(
            "parfactors {:?} have empty constraints",
            cw.empty_parfactors()
        )));
    }
    instantiate_lenient(tmpl, cw)
}

/// Like [`instantiate`], but parfactors whose constraint is empty are left out.
fn instantiate_lenient(tmpl: &TemplateModel, cw: &ConstraintWorld) -> Result<ParameterisedModel> {
    if cw.constraints().len() != tmpl.parfactors().len() {
        return Err(Error::InvalidConstraintWorld(format!(
            "{} constraints for {} parfactors",
            cw.constraints().len(),
            tmpl.parfactors().len()
        )));
    }
    let mut pfs = Vec::new();
    for (pf, c) in tmpl.parfactors().iter().zip(cw.constraints()) {
        if matches!(c.kind(), ConstraintKind::Empty) {
            continue;
        }
        pfs.push(pf.with_constraint(c.clone())?);
    }
    ParameterisedModel::new(tmpl.signatures().clone(), pfs)
        .map_err(|e| Error::InvalidConstraintWorld(e.to_string()))
}

/// A parameterised model of the expansion with its weight `p_k * p_j`.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedModel {
    pub model: ParameterisedModel,
    pub prob: f64,
    pub domain_prob: f64,
    pub constraint_prob: f64,
    /// Index of the domain world among all enumerated ones.
    pub domain_world: usize,
    /// Index of the constraint world within its domain world.
    pub constraint_world: usize,
    pub domain_sizes: BTreeMap<Logvar, usize>,
    /// Some binding query had no answers; the affected parfactors are left out.
    pub degenerate: bool,
}

impl WeightedModel {
    /// `X=200;T=3`
    pub fn size_label(&self) -> String {
        self.domain_sizes
            .iter()
            .map(|(l, n)| format!("{l}={n}"))
            .collect::<Vec<_>>()
            .join(";")
    }
}

/// Result of [`expand`].
#[derive(Clone, Debug, PartialEq)]
pub struct Expansion {
    pub models: Vec<WeightedModel>,
    pub domain_worlds: usize,
    pub domain_worlds_kept: usize,
    /// Constraint worlds generated for the kept domain worlds, before cascading.
    pub constraint_worlds: usize,
    /// Total weight of the emitted models.
    pub retained_mass: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ManifestRow {
    pub world_id: usize,
    pub domain_sizes: String,
    pub domain_world: usize,
    pub constraint_world: usize,
    pub domain_prob: f64,
    pub constraint_prob: f64,
    pub weight: f64,
    pub degenerate: bool,
}

impl Expansion {
    pub fn manifest(&self) -> Vec<ManifestRow> {
        self.models
            .iter()
            .enumerate()
            .map(|(i, m)| ManifestRow {
                world_id: i,
                domain_sizes: m.size_label(),
                domain_world: m.domain_world,
                constraint_world: m.constraint_world,
                domain_prob: m.domain_prob,
                constraint_prob: m.constraint_prob,
                weight: m.prob,
                degenerate: m.degenerate,
            })
            .collect()
    }
}

fn sizes(dw: &DomainWorld) -> BTreeMap<Logvar, usize> {
    dw.domains()
        .iter()
        .map(|(l, d)| (l.clone(), d.len()))
        .collect()
}

/// Expand `u` into weighted parameterised models, ordered by domain world and then by
/// constraint world. Weights are never renormalised.
pub fn expand(u: &UniverseModel) -> Result<Expansion> {
    let dws = enumerate_worlds(&u.domains, &u.template)?;
    let l = dws.len();
    let items: Vec<((usize, DomainWorld), f64)> = dws
        .into_iter()
        .enumerate()
        .map(|(i, dw)| {
            let p = dw.prob().unwrap_or(1.0 / l as f64);
            ((i, dw), p)
        })
        .collect();
    let kept = match &u.filter {
        Some(f) => filter_worlds(items, f.threshold()).kept,
        None => items,
    };
    let per_world = kept
        .par_iter()
        .map(|((k, dw), pk)| {
            let mut cws = evaluate(&u.program, &u.template, dw)?;
            if !u.program.is_weighted() {
                cws = uniformize(cws);
            }
            let generated = cws.len();
            let weighted: Vec<((usize, ConstraintWorld), f64)> = cws
                .into_iter()
                .enumerate()
                .map(|(j, cw)| {
                    let p = pk * cw.prob().expect("weighted or uniformized");
                    ((j, cw), p)
                })
                .collect();
            let weighted = match &u.filter {
                Some(f) if f.cascade() => filter_worlds(weighted, f.cascade_threshold()).kept,
                _ => weighted,
            };
            let models = weighted
                .into_iter()
                .map(|((j, cw), p)| {
                    Ok(WeightedModel {
                        model: instantiate_lenient(&u.template, &cw)?,
                        prob: p,
                        domain_prob: *pk,
                        constraint_prob: cw.prob().unwrap(),
                        domain_world: *k,
                        constraint_world: j,
                        domain_sizes: sizes(dw),
                        degenerate: cw.is_degenerate(),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((generated, models))
        })
        .collect::<Result<Vec<_>>>()?;
    let constraint_worlds = per_world.iter().map(|(g, _)| g).sum();
    let models: Vec<WeightedModel> = per_world.into_iter().flat_map(|(_, m)| m).collect();
    Ok(Expansion {
        retained_mass: models.iter().map(|m| m.prob).sum(),
        domain_worlds: l,
        domain_worlds_kept: kept.len(),
        constraint_worlds,
        models,
    })
}
