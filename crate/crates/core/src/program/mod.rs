//! Constraint programs: non-recursive probabilistic Datalog that turns a domain world
//! into weighted constraint worlds, one constraint per template parfactor.
//!
//! ```text
//! element_of_c2(X, Y1) :- linked(X, Y1, Y2).
//! element_of_c2(X, Y2) :- linked(X, Y1, Y2).
//! linked(X, Y1, Y2) :- instance_of_x(X) & pair(Y1, Y2).
//! 0.7 pair(t1, t2).
//! 0.2 pair(t2, t3).
//! 0.1 pair(t1, t3).
//! populate instance_of_x/1 from X.
//! constraint g1 <- instance_of_x(X).
//! constraint g2 <- element_of_c2(X, T).
//! ```
//!
//! Probabilistic facts of one predicate are mutually exclusive alternatives; distinct
//! predicates are independent. `? fact.` declares an unweighted alternative, and a
//! program made of those yields worlds without probabilities (see [`uniformize`]).
//! Binding variables map positionally onto the parfactor's logvars. Parfactors
//! without logvars need no binding.

mod parse;

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;

use rayon::prelude::*;

use crate::domain::DomainWorld;
use crate::error::{Error, Result};
use crate::model::{Constant, Constraint, Logvar, TemplateModel, Tuple};
use parse::Statement;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PTerm {
    Var(String),
    Const(String),
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PAtom {
    pub pred: String,
    pub terms: Vec<PTerm>,
}

impl PAtom {
    fn vars(&self) -> impl Iterator<Item = &str> {
        self.terms.iter().filter_map(|t| match t {
            PTerm::Var(v) => Some(v.as_str()),
            PTerm::Const(_) => None,
        })
    }

    fn is_ground(&self) -> bool {
        self.vars().next().is_none()
    }

    fn ground_args(&self) -> Tuple {
        self.terms
            .iter()
            .map(|t| match t {
                PTerm::Const(c) => Constant::new(c),
                PTerm::Var(_) => unreachable!("ground atom"),
            })
            .collect()
    }
}

impl fmt::Display for PAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.pred)?;
        if !self.terms.is_empty() {
            let parts: Vec<&str> = self
                .terms
                .iter()
                .map(|t| match t {
                    PTerm::Var(s) | PTerm::Const(s) => s.as_str(),
                })
                .collect();
            write!(f, "({})", parts.join(", "))?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rule {
    pub head: PAtom,
    pub body: Vec<PAtom>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Binding {
    Top,
    Query(PAtom),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Populate {
    pub pred: String,
    pub logvar: String,
}

/// Mutually exclusive alternatives sharing one predicate.
#[derive(Clone, Debug, PartialEq)]
pub struct ChoiceGroup {
    pub predicate: String,
    pub alternatives: Vec<PAtom>,
    /// `None` for `? fact.` groups.
    pub probs: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Program {
    facts: Vec<PAtom>,
    choice_groups: Vec<ChoiceGroup>,
    rules: Vec<Rule>,
    bindings: BTreeMap<String, Binding>,
    populate: Vec<Populate>,
}

fn located(line: usize, column: usize, message: String) -> Error {
    Error::Parse {
        line,
        column,
        message,
    }
}

impl Program {
    pub fn parse(text: &str) -> Result<Program> {
        let mut facts = Vec::new();
        let mut groups: Vec<ChoiceGroup> = Vec::new();
        let mut rules = Vec::new();
        let mut bindings = BTreeMap::new();
        let mut populate = Vec::new();
        let mut arities: BTreeMap<String, usize> = BTreeMap::new();
        for s in parse::statements(text)? {
            let at = |m: String| located(s.line, s.column, m);
            let mut check_arity = |a: &PAtom| match arities.get(&a.pred) {
                Some(&n) if n != a.terms.len() => Err(at(format!(
                    "predicate `{}` used with arity {} and {n}",
                    a.pred,
                    a.terms.len()
                ))),
                _ => {
                    arities.insert(a.pred.clone(), a.terms.len());
                    Ok(())
                }
            };
            match s.statement {
                Statement::Fact(a) => {
                    check_arity(&a)?;
                    if !a.is_ground() {
                        return Err(at(format!("fact `{a}` contains variables")));
                    }
                    facts.push(a);
                }
                Statement::Choice(p, a) => {
                    check_arity(&a)?;
                    if !a.is_ground() {
                        return Err(at(format!("fact `{a}` contains variables")));
                    }
                    if let Some(p) = p {
                        if !(p > 0.0 && p <= 1.0) {
                            return Err(at(format!("probability {p} of `{a}` is not in (0, 1]")));
                        }
                    }
                    let group = match groups.iter_mut().find(|g| g.predicate == a.pred) {
                        Some(g) => g,
                        None => {
                            groups.push(ChoiceGroup {
                                predicate: a.pred.clone(),
                                alternatives: Vec::new(),
                                probs: p.map(|_| Vec::new()),
                            });
                            groups.last_mut().unwrap()
                        }
                    };
                    if group.alternatives.contains(&a) {
                        return Err(at(format!("alternative `{a}` listed twice")));
                    }
                    match (&mut group.probs, p) {
                        (Some(ps), Some(p)) => ps.push(p),
                        (None, None) => {}
                        _ => {
                            return Err(at(format!(
                                "group `{}` mixes weighted and unweighted alternatives",
                                a.pred
                            )))
                        }
                    }
                    group.alternatives.push(a);
                }
                Statement::Rule(r) => {
                    check_arity(&r.head)?;
                    for b in &r.body {
                        check_arity(b)?;
                    }
                    let body_vars: BTreeSet<&str> = r.body.iter().flat_map(|b| b.vars()).collect();
                    if let Some(v) = r.head.vars().find(|v| !body_vars.contains(v)) {
                        return Err(at(format!(
                            "variable {v} in the head of `{}` does not occur in its body",
                            r.head
                        )));
                    }
                    rules.push(r);
                }
                Statement::Binding(id, b) => {
                    if let Binding::Query(a) = &b {
                        check_arity(a)?;
                    }
                    if bindings.insert(id.clone(), b).is_some() {
                        return Err(at(format!("parfactor {id} is bound twice")));
                    }
                }
                Statement::Populate(p) => {
                    check_arity(&PAtom {
                        pred: p.pred.clone(),
                        terms: vec![PTerm::Var("_".into())],
                    })?;
                    populate.push(p);
                }
            }
        }
        let program = Program {
            facts,
            choice_groups: groups,
            rules,
            bindings,
            populate,
        };
        program.validate()?;
        Ok(program)
    }

    /// The program that binds every parfactor of `tmpl` to the Cartesian product.
    pub fn top(tmpl: &TemplateModel) -> Program {
        Program {
            facts: Vec::new(),
            choice_groups: Vec::new(),
            rules: Vec::new(),
            bindings: tmpl
                .parfactors()
                .iter()
                .map(|p| (p.name().to_string(), Binding::Top))
                .collect(),
            populate: Vec::new(),
        }
    }

    fn validate(&self) -> Result<()> {
        for g in &self.choice_groups {
            if let Some(ps) = &g.probs {
                let sum: f64 = ps.iter().sum();
                if (sum - 1.0).abs() > 1e-9 {
                    return Err(Error::invalid(format!(
                        "probabilities of `{}` sum to {sum}, not 1",
                        g.predicate
                    )));
                }
            }
            let clash = self.rules.iter().any(|r| r.head.pred == g.predicate)
                || self.facts.iter().any(|f| f.pred == g.predicate)
                || self.populate.iter().any(|p| p.pred == g.predicate);
            if clash {
                return Err(Error::invalid(format!(
                    "`{}` has probabilistic facts and is also defined elsewhere",
                    g.predicate
                )));
            }
        }
        let weighted = self
            .choice_groups
            .iter()
            .filter(|g| g.probs.is_some())
            .count();
        if weighted != 0 && weighted != self.choice_groups.len() {
            return Err(Error::invalid(
                "weighted and unweighted choice groups cannot be combined",
            ));
        }
        self.rule_order().map(|_| ())
    }

    /// Rule indices ordered so that every body predicate is complete before use.
    fn rule_order(&self) -> Result<Vec<usize>> {
        let mut deps: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
        for r in &self.rules {
            deps.entry(&r.head.pred)
                .or_default()
                .extend(r.body.iter().map(|b| b.pred.as_str()));
        }
        // depth-first with colours: 1 = on stack, 2 = done
        let mut state: BTreeMap<&str, u8> = BTreeMap::new();
        let mut order: Vec<&str> = Vec::new();
        fn visit<'a>(
            p: &'a str,
            deps: &BTreeMap<&'a str, BTreeSet<&'a str>>,
            state: &mut BTreeMap<&'a str, u8>,
            order: &mut Vec<&'a str>,
        ) -> Result<()> {
            match state.get(p) {
                Some(2) => return Ok(()),
                Some(1) => {
                    return Err(Error::invalid(format!(
                        "predicate `{p}` is defined recursively"
                    )))
                }
                _ => {}
            }
            state.insert(p, 1);
            if let Some(ds) = deps.get(p) {
                for d in ds {
                    visit(d, deps, state, order)?;
                }
            }
            state.insert(p, 2);
            order.push(p);
            Ok(())
        }
        for p in deps.keys() {
            visit(p, &deps, &mut state, &mut order)?;
        }
        let mut out = Vec::new();
        for p in order {
            out.extend((0..self.rules.len()).filter(|&i| self.rules[i].head.pred == p));
        }
        Ok(out)
    }

    pub fn facts(&self) -> &[PAtom] {
        &self.facts
    }

    pub fn choice_groups(&self) -> &[ChoiceGroup] {
        &self.choice_groups
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn bindings(&self) -> &BTreeMap<String, Binding> {
        &self.bindings
    }

    pub fn populate(&self) -> &[Populate] {
        &self.populate
    }

    /// Whether the program attaches probabilities to its worlds.
    pub fn is_weighted(&self) -> bool {
        self.choice_groups.iter().all(|g| g.probs.is_some())
    }
}

/// One constraint per template parfactor, in template order.
#[derive(Clone, Debug, PartialEq)]
pub struct ConstraintWorld {
    constraints: Vec<Constraint>,
    prob: Option<f64>,
    choices: Vec<usize>,
    empty: Vec<usize>,
}

impl ConstraintWorld {
    pub fn new(constraints: Vec<Constraint>, prob: Option<f64>) -> Result<Self> {
        if let Some(p) = prob {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::invalid(format!("constraint world probability {p}")));
            }
        }
        let empty = constraints
            .iter()
            .enumerate()
            .filter(|(_, c)| matches!(c.kind(), crate::model::ConstraintKind::Empty))
            .map(|(i, _)| i)
            .collect();
        Ok(ConstraintWorld {
            constraints,
            prob,
            choices: Vec::new(),
            empty,
        })
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn prob(&self) -> Option<f64> {
        self.prob
    }

    /// Index of the chosen alternative in each choice group.
    pub fn choices(&self) -> &[usize] {
        &self.choices
    }

    /// Parfactors whose binding query had no answers.
    pub fn empty_parfactors(&self) -> &[usize] {
        &self.empty
    }

    pub fn is_degenerate(&self) -> bool {
        !self.empty.is_empty()
    }
}

/// Assign `1/m` to each of `m` worlds.
pub fn uniformize(mut worlds: Vec<ConstraintWorld>) -> Vec<ConstraintWorld> {
    let m = worlds.len() as f64;
    for w in &mut worlds {
        w.prob = Some(1.0 / m);
    }
    worlds
}

type Db = HashMap<String, BTreeSet<Tuple>>;

/// Variable bindings; bodies have few variables, so a list beats a map.
type Sub<'a> = Vec<(&'a str, Constant)>;

fn lookup<'s>(sub: &'s Sub, var: &str) -> Option<&'s Constant> {
    sub.iter().find(|(v, _)| *v == var).map(|(_, c)| c)
}

fn unify<'a>(atom: &'a PAtom, fact: &Tuple, sub: &Sub<'a>) -> Option<Sub<'a>> {
    let mut out = sub.clone();
    for (t, c) in atom.terms.iter().zip(fact) {
        match t {
            PTerm::Const(k) => {
                if k != c.name() {
                    return None;
                }
            }
            PTerm::Var(v) => match lookup(&out, v) {
                Some(b) if b != c => return None,
                Some(_) => {}
                None => out.push((v, c.clone())),
            },
        }
    }
    Some(out)
}

fn substitute(atom: &PAtom, sub: &Sub) -> Tuple {
    atom.terms
        .iter()
        .map(|t| match t {
            PTerm::Const(c) => Constant::new(c),
            PTerm::Var(v) => lookup(sub, v).expect("range-restricted rule").clone(),
        })
        .collect()
}

enum Fixed<'a> {
    Const(Constant),
    Var(&'a str),
}

/// All substitutions satisfying `body` in `db`, joining left to right on the variables
/// bound so far.
fn answers<'a>(body: &'a [PAtom], db: &Db) -> Vec<Sub<'a>> {
    let mut subs: Vec<Sub<'a>> = vec![Vec::new()];
    let mut bound: BTreeSet<&str> = BTreeSet::new();
    for atom in body {
        let Some(facts) = db.get(&atom.pred) else {
            return Vec::new();
        };
        // positions fixed by a constant or an already bound variable
        let keyed: Vec<(usize, Fixed)> = atom
            .terms
            .iter()
            .enumerate()
            .filter_map(|(i, t)| match t {
                PTerm::Const(c) => Some((i, Fixed::Const(Constant::new(c)))),
                PTerm::Var(v) if bound.contains(v.as_str()) => Some((i, Fixed::Var(v))),
                PTerm::Var(_) => None,
            })
            .collect();
        let mut index: HashMap<Vec<&Constant>, Vec<&Tuple>> = HashMap::new();
        for f in facts.iter().filter(|f| f.len() == atom.terms.len()) {
            index
                .entry(keyed.iter().map(|(i, _)| &f[*i]).collect())
                .or_default()
                .push(f);
        }
        subs = subs
            .iter()
            .flat_map(|s| {
                let key: Vec<&Constant> = keyed
                    .iter()
                    .map(|(_, k)| match k {
                        Fixed::Const(c) => c,
                        Fixed::Var(v) => lookup(s, v).expect("bound"),
                    })
                    .collect();
                index
                    .get(&key)
                    .into_iter()
                    .flatten()
                    .filter_map(move |f| unify(atom, f, s))
            })
            .collect();
        if subs.is_empty() {
            break;
        }
        bound.extend(atom.vars());
    }
    subs
}

fn insert(db: &mut Db, pred: &str, tuple: Tuple) {
    match db.get_mut(pred) {
        Some(facts) => {
            facts.insert(tuple);
        }
        None => {
            db.insert(pred.to_string(), BTreeSet::from([tuple]));
        }
    }
}

struct Plan<'a> {
    /// Per template parfactor: logvars and how their tuples are produced.
    targets: Vec<(Vec<Logvar>, Option<&'a Binding>)>,
    order: Vec<usize>,
}

fn plan<'a>(prog: &'a Program, tmpl: &TemplateModel) -> Result<Plan<'a>> {
    if let Some(id) = prog
        .bindings
        .keys()
        .find(|id| tmpl.parfactor_index(id).is_none())
    {
        return Err(Error::invalid(format!(
            "binding for unknown parfactor {id}"
        )));
    }
    let mut targets = Vec::new();
    for pf in tmpl.parfactors() {
        let logvars = pf.logvars().to_vec();
        let binding = prog.bindings.get(pf.name());
        match binding {
            None if !logvars.is_empty() => {
                return Err(Error::invalid(format!(
                    "parfactor {} has no binding",
                    pf.name()
                )))
            }
            Some(Binding::Query(a)) => {
                let vars: BTreeSet<&str> = a.vars().collect();
                if a.terms.len() != logvars.len() || vars.len() != a.terms.len() {
                    return Err(Error::invalid(format!(
                        "binding `{a}` of {} must list {} distinct variables, one per logvar",
                        pf.name(),
                        logvars.len()
                    )));
                }
            }
            _ => {}
        }
        targets.push((logvars, binding));
    }
    Ok(Plan {
        targets,
        order: prog.rule_order()?,
    })
}

fn cartesian(logvars: &[Logvar], dw: &DomainWorld) -> Result<Vec<Tuple>> {
    let mut tuples: Vec<Tuple> = vec![Vec::new()];
    for lv in logvars {
        let domain = dw
            .domain(lv)
            .ok_or_else(|| Error::MissingDomain(lv.to_string()))?;
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
    Ok(tuples)
}

/// Derive all facts of `base` under the rules, bottom-up in dependency order.
fn saturate(prog: &Program, order: &[usize], mut db: Db) -> Db {
    for &i in order {
        let rule = &prog.rules[i];
        let heads: Vec<Tuple> = answers(&rule.body, &db)
            .iter()
            .map(|s| substitute(&rule.head, s))
            .collect();
        for h in heads {
            insert(&mut db, &rule.head.pred, h);
        }
    }
    db
}

fn world(
    prog: &Program,
    plan: &Plan,
    dw: &DomainWorld,
    base: &Db,
    choices: Vec<usize>,
) -> Result<ConstraintWorld> {
    let mut db = base.clone();
    let mut prob = prog.is_weighted().then_some(1.0);
    for (g, &k) in prog.choice_groups.iter().zip(&choices) {
        let alt = &g.alternatives[k];
        insert(&mut db, &alt.pred, alt.ground_args());
        if let (Some(p), Some(ps)) = (&mut prob, &g.probs) {
            *p *= ps[k];
        }
    }
    let db = saturate(prog, &plan.order, db);
    let mut constraints = Vec::new();
    for (logvars, binding) in &plan.targets {
        let c = match binding {
            _ if logvars.is_empty() && !matches!(binding, Some(Binding::Query(_))) => {
                Constraint::unit()
            }
            None | Some(Binding::Top) => {
                Constraint::extensional(logvars.clone(), cartesian(logvars, dw)?)?
            }
            Some(Binding::Query(a)) => {
                let tuples: BTreeSet<Tuple> = answers(std::slice::from_ref(a), &db)
                    .iter()
                    .map(|s| substitute(a, s))
                    .collect();
                for (i, lv) in logvars.iter().enumerate() {
                    let domain: HashSet<&Constant> = dw
                        .domain(lv)
                        .ok_or_else(|| Error::MissingDomain(lv.to_string()))?
                        .iter()
                        .collect();
                    if let Some(t) = tuples.iter().find(|t| !domain.contains(&t[i])) {
                        return Err(Error::InvalidConstraintWorld(format!(
                            "`{a}` yields {} for {lv}, which is not in its domain",
                            t[i]
                        )));
                    }
                }
                if tuples.is_empty() {
                    Constraint::empty(logvars.clone())?
                } else {
                    Constraint::extensional(logvars.clone(), tuples)?
                }
            }
        };
        constraints.push(c);
    }
    let mut cw = ConstraintWorld::new(constraints, prob)?;
    cw.choices = choices;
    Ok(cw)
}

/// All constraint worlds of `prog` for `tmpl` in domain world `dw`, most probable first.
pub fn evaluate(
    prog: &Program,
    tmpl: &TemplateModel,
    dw: &DomainWorld,
) -> Result<Vec<ConstraintWorld>> {
    let plan = plan(prog, tmpl)?;
    let mut base: Db = HashMap::new();
    for f in &prog.facts {
        insert(&mut base, &f.pred, f.ground_args());
    }
    for p in &prog.populate {
        let lv = Logvar::new(&p.logvar);
        let domain = dw
            .domain(&lv)
            .ok_or_else(|| Error::MissingDomain(p.logvar.clone()))?;
        for c in domain {
            insert(&mut base, &p.pred, vec![c.clone()]);
        }
    }
    let mut combos: Vec<Vec<usize>> = vec![Vec::new()];
    for g in &prog.choice_groups {
        combos = combos
            .into_iter()
            .flat_map(|c| {
                (0..g.alternatives.len()).map(move |k| {
                    let mut c = c.clone();
                    c.push(k);
                    c
                })
            })
            .collect();
    }
    let mut worlds = combos
        .into_par_iter()
        .map(|c| world(prog, &plan, dw, &base, c))
        .collect::<Result<Vec<_>>>()?;
    worlds.sort_by(|a, b| {
        let (pa, pb) = (a.prob.unwrap_or(0.0), b.prob.unwrap_or(0.0));
        pb.total_cmp(&pa).then_with(|| a.choices.cmp(&b.choices))
    });
    Ok(worlds)
}
