#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use unilift::model::format::ModelFile;
use unilift::model::{RandvarDecl, Signatures};
use unilift::{
    Constant, Constraint, DomainWorld, Evidence, GroundAtom, Logvar, ParameterisedModel, Parfactor,
    PotentialTable, Prv, QuerySpec, Range,
};

pub const G_EX: &str = r#"{
    "randvars": [
        {"name": "Epid"},
        {"name": "Sick", "arity": 1},
        {"name": "Travel", "arity": 1},
        {"name": "Treat", "arity": 2}
    ],
    "logvars": ["X", "T"],
    "parfactors": [
        {"name": "g0", "args": ["Epid"], "values": "random", "constraint": "top"},
        {"name": "g1", "args": ["Epid", "Sick(X)", "Travel(X)"], "values": "random", "constraint": "top"},
        {"name": "g2", "args": ["Epid", "Sick(X)", "Treat(X, T)"], "values": "random", "constraint": "top"}
    ]
}"#;

pub fn named(prefix: &str, n: usize) -> Vec<Constant> {
    (1..=n)
        .map(|i| Constant::new(&format!("{prefix}{i}")))
        .collect()
}

pub fn g_ex(x: usize, t: usize, seed: u64) -> ParameterisedModel {
    let dw = DomainWorld::new(
        [
            (Logvar::new("X"), named("x", x)),
            (Logvar::new("T"), named("t", t)),
        ],
        None,
    )
    .unwrap();
    ModelFile::parse(G_EX)
        .unwrap()
        .model(seed, Some(&dw))
        .unwrap()
}

pub fn atom(s: &str) -> GroundAtom {
    s.parse().unwrap()
}

pub fn marginal(target: &str) -> QuerySpec {
    QuerySpec::marginal(atom(target))
}

pub fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

struct Template {
    name: &'static str,
    params: &'static [&'static str],
}

const POOL: &[Template] = &[
    Template {
        name: "A",
        params: &[],
    },
    Template {
        name: "R",
        params: &["X"],
    },
    Template {
        name: "S",
        params: &["X"],
    },
    Template {
        name: "R",
        params: &["Y"],
    },
    Template {
        name: "S",
        params: &["Y"],
    },
    Template {
        name: "Q",
        params: &["X", "Y"],
    },
    Template {
        name: "Q",
        params: &["Y", "X"],
    },
    Template {
        name: "B",
        params: &[],
    },
];

fn range_of(name: &str) -> Range {
    match name {
        "S" => Range::new(["lo", "mid", "hi"]).unwrap(),
        _ => Range::boolean(),
    }
}

/// A random model over at most `max_randvars` ground randvars, with its ground atoms.
pub fn random_model(seed: u64, max_randvars: usize) -> (ParameterisedModel, Vec<GroundAtom>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let consts = named("c", rng.gen_range(1..=3));
        let n_pfs = rng.gen_range(1..=4);
        let mut pfs = Vec::new();
        for k in 0..n_pfs {
            let n_args = rng.gen_range(1..=3);
            let mut picks: Vec<&Template> = POOL.choose_multiple(&mut rng, n_args).collect();
            picks.dedup_by(|a, b| a.name == b.name && a.params == b.params);
            let args: Vec<Prv> = picks
                .iter()
                .map(|t| {
                    Prv::new(
                        t.name,
                        t.params.iter().map(|p| Logvar::new(p)).collect(),
                        range_of(t.name),
                    )
                })
                .collect();
            let mut logvars: Vec<Logvar> = Vec::new();
            for p in args.iter().flat_map(|a| a.params()) {
                if !logvars.contains(p) {
                    logvars.push(p.clone());
                }
            }
            let mut full: Vec<Vec<Constant>> = vec![Vec::new()];
            for _ in &logvars {
                full = full
                    .into_iter()
                    .flat_map(|t| {
                        consts.iter().map(move |c| {
                            let mut t = t.clone();
                            t.push(c.clone());
                            t
                        })
                    })
                    .collect();
            }
            // keep a random non-empty subset of the product
            let mut tuples: Vec<Vec<Constant>> =
                full.iter().filter(|_| rng.gen_bool(0.7)).cloned().collect();
            if tuples.is_empty() {
                tuples.push(full.choose(&mut rng).unwrap().clone());
            }
            let constraint = if logvars.is_empty() {
                Constraint::unit()
            } else {
                Constraint::extensional(logvars, tuples).unwrap()
            };
            let size: usize = args.iter().map(|a| a.range().len()).product();
            let values = (0..size)
                .map(|_| {
                    if rng.gen_bool(0.03) {
                        0.0
                    } else {
                        rng.gen_range(0.05..2.0)
                    }
                })
                .collect();
            let table = PotentialTable::new(args, values).unwrap();
            pfs.push(Parfactor::new(&format!("g{k}"), table, constraint).unwrap());
        }
        let mut sigs = Signatures::new();
        for p in &pfs {
            for a in p.args() {
                sigs.insert(
                    a.name().to_string(),
                    RandvarDecl {
                        arity: a.params().len(),
                        range: a.range().clone(),
                    },
                );
            }
        }
        let m = ParameterisedModel::new(sigs, pfs).unwrap();
        let atoms: BTreeSet<GroundAtom> = m
            .ground()
            .unwrap()
            .into_iter()
            .flat_map(|f| f.atoms)
            .collect();
        if atoms.len() <= max_randvars {
            return (m, atoms.into_iter().collect());
        }
    }
}

/// One target and up to `max_evidence` observed atoms, drawn from `atoms`.
pub fn random_query(
    seed: u64,
    m: &ParameterisedModel,
    atoms: &[GroundAtom],
    max_evidence: usize,
) -> QuerySpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut picked: Vec<&GroundAtom> = atoms.choose_multiple(&mut rng, atoms.len()).collect();
    let target = picked.remove(0).clone();
    let n_ev = rng.gen_range(0..=max_evidence.min(picked.len()));
    let evidence = Evidence::new(picked[..n_ev].iter().map(|a| {
        let labels = m.range_of(a).unwrap().labels();
        ((*a).clone(), labels[rng.gen_range(0..labels.len())].clone())
    }))
    .unwrap();
    QuerySpec::new(vec![target], evidence).unwrap()
}
