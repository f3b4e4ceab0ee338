use super::*;
use crate::domain::DomainWorld;
use crate::model::format::ModelFile;
use crate::model::tests::{consts, lv};
use crate::model::{Constraint, PotentialTable};

const G_EX: &str = r#"{
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

fn world(x: usize, t: usize) -> DomainWorld {
    let names = |p: &str, n: usize| (1..=n).map(|i| Constant::new(&format!("{p}{i}"))).collect();
    DomainWorld::new([(lv("X"), names("x", x)), (lv("T"), names("t", t))], None).unwrap()
}

fn g_ex(x: usize, t: usize, seed: u64) -> ParameterisedModel {
    ModelFile::parse(G_EX)
        .unwrap()
        .model(seed, Some(&world(x, t)))
        .unwrap()
}

fn atom(s: &str) -> GroundAtom {
    s.parse().unwrap()
}

fn query(target: &str, evidence: &[(&str, &str)]) -> QuerySpec {
    QuerySpec::new(
        vec![atom(target)],
        Evidence::new(evidence.iter().map(|(a, v)| (atom(a), *v))).unwrap(),
    )
    .unwrap()
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

fn bool_pf(name: &str, args: &[(&str, &[&str])], values: Vec<f64>, c: Constraint) -> Parfactor {
    let prvs = args
        .iter()
        .map(|(n, ps)| Prv::new(n, ps.iter().map(|p| lv(p)).collect(), Range::boolean()))
        .collect();
    Parfactor::new(name, PotentialTable::new(prvs, values).unwrap(), c).unwrap()
}

fn over_x(xs: &[&str]) -> Constraint {
    Constraint::extensional(vec![lv("X")], consts(xs).into_iter().map(|c| vec![c])).unwrap()
}

fn model_of(pfs: Vec<Parfactor>) -> ParameterisedModel {
    let mut sigs = crate::model::Signatures::new();
    for p in &pfs {
        for a in p.args() {
            sigs.insert(
                a.name().to_string(),
                crate::model::RandvarDecl {
                    arity: a.params().len(),
                    range: a.range().clone(),
                },
            );
        }
    }
    ParameterisedModel::new(sigs, pfs).unwrap()
}

/// Sum over every joint assignment of the grounding.
fn brute_force(m: &ParameterisedModel, q: &QuerySpec) -> Vec<f64> {
    let factors = m.ground().unwrap();
    let atoms: Vec<GroundAtom> = factors
        .iter()
        .flat_map(|f| f.atoms.iter().cloned())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let range_len: Vec<usize> = atoms.iter().map(|a| m.range_of(a).unwrap().len()).collect();
    let total: usize = range_len.iter().product();
    let target = atoms.iter().position(|a| *a == q.targets()[0]).unwrap();
    let mut out = vec![0.0; range_len[target]];
    for i in 0..total {
        let state = crate::model::decode(&range_len, i);
        let consistent = q.evidence().iter().all(|(a, v)| {
            let k = atoms.iter().position(|x| x == a).unwrap();
            m.range_of(a).unwrap().labels()[state[k]] == v
        });
        if !consistent {
            continue;
        }
        let w: f64 = factors
            .iter()
            .map(|f| {
                let at: Vec<usize> = f
                    .atoms
                    .iter()
                    .map(|a| state[atoms.iter().position(|x| x == a).unwrap()])
                    .collect();
                f.table.value(&at)
            })
            .product();
        out[state[target]] += w;
    }
    let z: f64 = out.iter().sum();
    out.iter().map(|v| v / z).collect()
}

#[test]
fn single_factor_normalises() {
    let m = model_of(vec![bool_pf(
        "g",
        &[("A", &[])],
        vec![1.0, 3.0],
        Constraint::unit(),
    )]);
    let q = query("A", &[]);
    assert!(close(
        ground_ve(&m, &q).unwrap().probs(),
        &[0.25, 0.75],
        1e-12
    ));
    assert!(close(
        lifted_query(&m, &q).unwrap().probs(),
        &[0.25, 0.75],
        1e-12
    ));
}

#[test]
fn disconnected_factors_ignore_domain_size() {
    let marginal = |n: usize| {
        let xs: Vec<String> = (0..n).map(|i| format!("c{i}")).collect();
        let xs: Vec<&str> = xs.iter().map(String::as_str).collect();
        let m = model_of(vec![bool_pf(
            "g",
            &[("R", &["X"])],
            vec![2.0, 5.0],
            over_x(&xs),
        )]);
        ground_ve(&m, &query("R(c0)", &[]))
            .unwrap()
            .probs()
            .to_vec()
    };
    assert!(close(&marginal(1), &marginal(7), 1e-12));
    assert!(close(&marginal(1), &[2.0 / 7.0, 5.0 / 7.0], 1e-12));
}

#[test]
fn ground_ve_matches_enumeration() {
    let m = g_ex(3, 2, 11);
    for q in [
        query("Epid", &[]),
        query("Sick(x2)", &[("Treat(x1, t2)", "true")]),
        query("Epid", &[("Sick(x3)", "true"), ("Travel(x1)", "false")]),
    ] {
        assert!(
            close(
                ground_ve(&m, &q).unwrap().probs(),
                &brute_force(&m, &q),
                1e-12
            ),
            "{q}"
        );
    }
}

#[test]
fn unknown_atoms_and_inconsistent_evidence() {
    let m = g_ex(2, 1, 0);
    assert!(matches!(
        ground_ve(&m, &query("Sick(x9)", &[])),
        Err(Error::UnknownAtom(_))
    ));
    assert!(matches!(
        lifted_query(&m, &query("Flu", &[])),
        Err(Error::UnknownAtom(_))
    ));
    assert!(ground_ve(&m, &query("Epid", &[("Sick(x1)", "maybe")])).is_err());

    let zero = model_of(vec![bool_pf(
        "g",
        &[("A", &[]), ("B", &[])],
        vec![1.0, 0.0, 1.0, 0.0],
        Constraint::unit(),
    )]);
    let q = query("A", &[("B", "true")]);
    assert_eq!(ground_ve(&zero, &q), Err(Error::InconsistentEvidence));
    assert_eq!(lifted_query(&zero, &q), Err(Error::InconsistentEvidence));
}

#[test]
fn query_spec_validation() {
    assert!(QuerySpec::new(vec![], Evidence::default()).is_err());
    assert!(QuerySpec::new(vec![atom("A"), atom("A")], Evidence::default()).is_err());
    let ev = Evidence::new([(atom("A"), "true")]).unwrap();
    assert!(QuerySpec::new(vec![atom("A")], ev).is_err());
    assert!(Evidence::new([(atom("A"), "true"), (atom("A"), "false")]).is_err());
    assert_eq!(
        Evidence::new([(atom("A"), "true"), (atom("A"), "true")])
            .unwrap()
            .len(),
        1
    );
}

#[test]
fn multiply_identical_constraints_is_pointwise() {
    let c = over_x(&["a", "b", "c"]);
    let g1 = bool_pf(
        "g1",
        &[("Epid", &[]), ("Sick", &["X"])],
        vec![1.0, 2.0, 3.0, 4.0],
        c.clone(),
    );
    let g2 = bool_pf(
        "g2",
        &[("Epid", &[]), ("Sick", &["X"])],
        vec![5.0, 6.0, 7.0, 8.0],
        c.clone(),
    );
    let p = lift_multiply(&g1, &g2).unwrap();
    assert_eq!(p.args().len(), 2);
    assert!(close(p.table().values(), &[5.0, 12.0, 21.0, 32.0], 1e-9));
    assert_eq!(p.constraint(), &c);

    let ones = bool_pf("one", &[("Epid", &[]), ("Sick", &["X"])], vec![1.0; 4], c);
    let same = lift_multiply(&g1, &ones).unwrap();
    assert!(close(same.table().values(), g1.table().values(), 1e-12));
}

#[test]
fn multiply_disjoint_matches_ground_ve() {
    let c = over_x(&["a", "b"]);
    let g1 = bool_pf("g1", &[("R", &["X"])], vec![1.0, 4.0], c);
    let g2 = bool_pf("g2", &[("S", &[])], vec![2.0, 3.0], Constraint::unit());
    let product = lift_multiply(&g1, &g2).unwrap();
    let separate = model_of(vec![g1, g2]);
    let joined = model_of(vec![product]);
    for q in [query("S", &[]), query("R(b)", &[("S", "false")])] {
        let a = ground_ve(&separate, &q).unwrap();
        let b = ground_ve(&joined, &q).unwrap();
        assert!(close(a.probs(), b.probs(), 1e-12));
    }
}

#[test]
fn multiply_rejects_misaligned_constraints() {
    let g1 = bool_pf("g1", &[("R", &["X"])], vec![1.0, 2.0], over_x(&["a", "b"]));
    let g2 = bool_pf("g2", &[("S", &["X"])], vec![1.0, 2.0], over_x(&["a", "c"]));
    assert!(matches!(lift_multiply(&g1, &g2), Err(Error::Misaligned(_))));
}

#[test]
fn sum_out_sick_over_three_constants() {
    // (f,f)=3 (f,t)=1 (t,f)=1 (t,t)=2
    let g = bool_pf(
        "g12",
        &[("Epid", &[]), ("Sick", &["X"])],
        vec![3.0, 1.0, 1.0, 2.0],
        over_x(&["x1", "x2", "x3"]),
    );
    let out = lift_sum_out(&g, &g.args()[1].clone()).unwrap();
    assert_eq!(out.exponent, 3);
    assert!(close(out.parfactor.table().values(), &[64.0, 27.0], 1e-9));
    assert!(out.parfactor.logvars().is_empty());
}

#[test]
fn sum_out_exponents_follow_counts() {
    let m = g_ex(3, 2, 5);
    let g1 = &m.parfactors()[1];
    let g2 = &m.parfactors()[2];
    let travel = lift_sum_out(g1, &g1.args()[2]).unwrap();
    assert_eq!(travel.exponent, 1);
    assert_eq!(travel.parfactor.constraint().len(), 3);
    let treat = lift_sum_out(g2, &g2.args()[2]).unwrap();
    assert_eq!(treat.exponent, 2);
    assert_eq!(treat.parfactor.logvars(), &[lv("X")]);
    assert_eq!(treat.parfactor.constraint().len(), 3);
    // Sick(X) does not mention T, so its instances sit in two factors each
    assert!(matches!(
        lift_sum_out(g2, &g2.args()[1]),
        Err(Error::NotLiftable(_))
    ));
    let absent = Prv::new("Flu", vec![], Range::boolean());
    assert!(lift_sum_out(g2, &absent).is_err());
}

#[test]
fn sum_out_commutes_with_grounding() {
    for n in 1..=4 {
        let xs: Vec<String> = (0..n).map(|i| format!("c{i}")).collect();
        let xs: Vec<&str> = xs.iter().map(String::as_str).collect();
        let values = vec![0.3, 1.7, 2.2, 0.9];
        let g = bool_pf(
            "g",
            &[("E", &[]), ("R", &["X"])],
            values.clone(),
            over_x(&xs),
        );
        let lifted = lift_sum_out(&g, &g.args()[1]).unwrap().parfactor;
        // propositional: product over constants of the per-constant sum
        let expected: Vec<f64> = (0..2)
            .map(|e| (values[2 * e] + values[2 * e + 1]).powi(n))
            .collect();
        let grounded: Vec<f64> = lifted
            .ground()
            .unwrap()
            .iter()
            .fold(vec![1.0, 1.0], |acc, f| {
                acc.iter()
                    .zip(f.table.values())
                    .map(|(a, b)| a * b)
                    .collect()
            });
        assert!(close(&grounded, &expected, 1e-9 * expected[1].max(1.0)));
    }
}

#[test]
fn split_partitions_tuples() {
    let m = g_ex(3, 2, 0);
    let g1 = &m.parfactors()[1];
    let eve = BTreeSet::from([Constant::new("x3")]);
    let (inside, outside) = split(g1, &lv("X"), &eve).unwrap();
    let (inside, outside) = (inside.unwrap(), outside.unwrap());
    assert_eq!(inside.constraint().len(), 1);
    assert_eq!(outside.constraint().len(), 2);
    let mut union = inside.ground().unwrap();
    union.extend(outside.ground().unwrap());
    let mut all = g1.ground().unwrap();
    let key = |f: &crate::model::GroundFactor| f.atoms.clone();
    union.sort_by_key(key);
    all.sort_by_key(key);
    assert_eq!(union, all);

    let none = BTreeSet::from([Constant::new("zed")]);
    let (a, b) = split(g1, &lv("X"), &none).unwrap();
    assert!(a.is_none());
    assert_eq!(b.unwrap(), *g1);
}

#[test]
fn absorb_slices_observed_arguments() {
    let m = g_ex(3, 2, 3);
    let g1 = &m.parfactors()[1];
    let (eve, _) = split(g1, &lv("X"), &BTreeSet::from([Constant::new("x3")])).unwrap();
    let eve = eve.unwrap();
    let ev = Evidence::new([(atom("Sick(x3)"), "true")]).unwrap();
    let sliced = absorb(&eve, &ev).unwrap();
    // Sick is dropped, X vanishes with its single tuple
    assert_eq!(sliced.args().len(), 2);
    let t = eve.table();
    for e in 0..2 {
        for tr in 0..2 {
            assert!((sliced.table().value(&[e, tr]) - t.value(&[e, 1, tr])).abs() < 1e-12);
        }
    }

    let unrelated = Evidence::new([(atom("Treat(x1, t1)"), "true")]).unwrap();
    assert_eq!(absorb(g1, &unrelated).unwrap(), *g1);

    let partial = Evidence::new([(atom("Sick(x1)"), "true")]).unwrap();
    assert!(matches!(absorb(g1, &partial), Err(Error::ShatterFirst(_))));
    let mixed = Evidence::new([
        (atom("Sick(x1)"), "true"),
        (atom("Sick(x2)"), "false"),
        (atom("Sick(x3)"), "true"),
    ])
    .unwrap();
    assert!(matches!(absorb(g1, &mixed), Err(Error::ShatterFirst(_))));
}

#[test]
fn lifted_matches_ground_on_g_ex() {
    let m = g_ex(3, 2, 42);
    for q in [
        query("Epid", &[]),
        query("Epid", &[("Sick(x3)", "true")]),
        query("Sick(x1)", &[]),
        query(
            "Travel(x2)",
            &[("Treat(x2, t1)", "false"), ("Epid", "true")],
        ),
        query("Treat(x1, t2)", &[("Sick(x1)", "true")]),
    ] {
        let lifted = lifted_query(&m, &q).unwrap();
        let ground = ground_ve(&m, &q).unwrap();
        assert!(close(lifted.probs(), ground.probs(), 1e-9), "{q}");
    }
}

#[test]
fn lifted_run_on_g_ex_stays_lifted() {
    let (_, log) = lifted_query_traced(&g_ex(3, 2, 1), &query("Epid", &[])).unwrap();
    assert_eq!(log.groundings(), 0);
    assert_eq!(
        log.sum_outs(),
        vec![("Travel(X)", 1), ("Treat(X, T)", 2), ("Sick(X)", 3)]
    );
    let counts: Vec<usize> = [2, 5, 20, 200]
        .iter()
        .map(|&n| {
            lifted_query_traced(&g_ex(n, 2, 1), &query("Epid", &[]))
                .unwrap()
                .1
                .lifted_ops()
        })
        .collect();
    assert!(counts.iter().all(|&c| c == counts[0]), "{counts:?}");
}

#[test]
fn lifted_sweeps_domain_sizes() {
    for n in 2..=6 {
        let m = g_ex(n, 2, 9);
        let q = query("Sick(x1)", &[]);
        let lifted = lifted_query(&m, &q).unwrap();
        assert!(
            close(lifted.probs(), ground_ve(&m, &q).unwrap().probs(), 1e-9),
            "n = {n}"
        );
    }
}

#[test]
fn representatives_are_exchangeable() {
    let m = g_ex(5, 2, 17);
    let first = lifted_query(&m, &query("Sick(x1)", &[])).unwrap();
    for i in 2..=5 {
        let other = lifted_query(&m, &query(&format!("Sick(x{i})"), &[])).unwrap();
        assert!(close(first.probs(), other.probs(), 1e-12));
    }
}

#[test]
fn joint_targets_and_event_probs() {
    let m = g_ex(2, 2, 4);
    let q = QuerySpec::new(vec![atom("Sick(x1)"), atom("Epid")], Evidence::default()).unwrap();
    let lifted = lifted_query(&m, &q).unwrap();
    let ground = ground_ve(&m, &q).unwrap();
    assert!(close(lifted.probs(), ground.probs(), 1e-9));
    assert_eq!(lifted.assignments()[1], vec!["false", "true"]);
    let single = ground_ve(&m, &query("Epid", &[])).unwrap();
    let p = lifted.event_prob(&atom("Epid"), "true").unwrap();
    assert!((p - single.probs()[1]).abs() < 1e-9);
}

#[test]
fn ground_fallback_stays_exact() {
    // R(X, Y) and R(Y, X) in one parfactor cannot be eliminated with the lifted steps
    let xs = consts(&["a", "b", "c"]);
    let mut tuples = Vec::new();
    for x in &xs {
        for y in &xs {
            tuples.push(vec![x.clone(), y.clone()]);
        }
    }
    let c = Constraint::extensional(vec![lv("X"), lv("Y")], tuples).unwrap();
    let b = Range::boolean();
    let args = vec![
        Prv::new("R", vec![lv("X"), lv("Y")], b.clone()),
        Prv::new("R", vec![lv("Y"), lv("X")], b.clone()),
        Prv::new("E", vec![], b),
    ];
    let values = (1..=8).map(|v| v as f64 / 3.0).collect();
    let g = Parfactor::new("g", PotentialTable::new(args, values).unwrap(), c).unwrap();
    let m = model_of(vec![g]);
    for q in [query("E", &[]), query("R(a, b)", &[("R(c, c)", "true")])] {
        let (lifted, log) = lifted_query_traced(&m, &q).unwrap();
        assert!(log.groundings() > 0);
        assert!(
            close(lifted.probs(), ground_ve(&m, &q).unwrap().probs(), 1e-9),
            "{q}"
        );
    }
}
