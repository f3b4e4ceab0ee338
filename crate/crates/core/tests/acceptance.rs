//! Acceptance criteria 1-9. Runs without the libtest harness so every criterion prints
//! exactly one PASS/FAIL line; exits non-zero if any fails.

mod common;

use std::collections::BTreeSet;
use std::panic::{self, AssertUnwindSafe};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use unilift::domain::DomainSpec;
use unilift::lve::ground_ve_traced;
use unilift::model::format::ModelFile;
use unilift::model::Tuple;
use unilift::query::{pareto_front, query_all};
use unilift::{
    beta_binomial_pmf, evaluate, expand, ground_ve, lifted_query, lifted_query_traced, parse_query,
    uniformize, Constant, DomainWorld, Evidence, GroundAtom, Logvar, Program, QuerySpec,
    TemplateModel, UniverseModel, WorldFilter,
};

use common::{g_ex, marginal, max_diff, named};

const TEMPLATE: &str = r#"{
    "randvars": [
        {"name": "Epid"}, {"name": "Sick", "arity": 1},
        {"name": "Travel", "arity": 1}, {"name": "Treat", "arity": 2}
    ],
    "logvars": ["X", "T"],
    "parfactors": [
        {"name": "g0", "args": ["Epid"], "values": "random", "constraint": "empty"},
        {"name": "g1", "args": ["Epid", "Sick(X)", "Travel(X)"], "values": "random", "constraint": "empty"},
        {"name": "g2", "args": ["Epid", "Sick(X)", "Treat(X, T)"], "values": "random", "constraint": "empty"}
    ]
}"#;

const PROGRAM: &str = "
    element_of_c2(X,Y1) :- linked(X,Y1,Y2).
    element_of_c2(X,Y2) :- linked(X,Y1,Y2).
    linked(X,Y1,Y2) :- instance_of_x(X) & pair(Y1,Y2).
    0.7 pair(t1,t2).
    0.2 pair(t2,t3).
    0.1 pair(t1,t3).
    populate instance_of_x/1 from X.
    constraint g1 <- instance_of_x(X).
    constraint g2 <- element_of_c2(X, T).
";

const BETA: &str = r#"{"domains": {
    "X": {"beta_binomial": {"alpha": 6, "beta": 15, "bins": 20, "step": 100}},
    "T": {"fixed": ["t1", "t2", "t3"]}
}}"#;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome, f64);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn template() -> TemplateModel {
    ModelFile::parse(TEMPLATE).unwrap().template(0).unwrap()
}

fn universe(filter: Option<WorldFilter>) -> UniverseModel {
    UniverseModel::new(
        template(),
        Program::parse(PROGRAM).unwrap(),
        DomainSpec::parse(BETA).unwrap(),
        filter,
    )
    .unwrap()
}

fn pmf(k: u64) -> f64 {
    beta_binomial_pmf(k, 20, 6.0, 15.0).unwrap()
}

fn c1_beta_binomial() -> Outcome {
    let p20 = pmf(20);
    let p5 = pmf(5);
    ensure(rel(p20, 3.85e-7) < 0.01, || format!("pmf(20) = {p20:e}"))?;
    ensure(rel(p5, 1.42e-1) < 0.01, || format!("pmf(5) = {p5:e}"))?;
    let argmax = (1..=20).max_by(|&a, &b| pmf(a).total_cmp(&pmf(b))).unwrap();
    ensure(argmax == 5, || format!("argmax k = {argmax}"))?;
    Ok(format!("pmf(20)={p20:.3e}, pmf(5)={p5:.3e}, mode k=5"))
}

fn c2_world_counts() -> Outcome {
    let e = expand(&universe(Some(WorldFilter::new(0.05, true).unwrap()))).unwrap();
    ensure(e.domain_worlds_kept == 8, || {
        format!("{} domain worlds kept", e.domain_worlds_kept)
    })?;
    ensure(e.constraint_worlds == 24, || {
        format!("{} constraint worlds", e.constraint_worlds)
    })?;
    ensure(e.models.len() == 7, || {
        format!("{} models after cascade", e.models.len())
    })?;
    let ts: BTreeSet<Constant> = ["t1", "t2"].iter().map(|c| Constant::new(c)).collect();
    for (i, m) in e.models.iter().enumerate() {
        let d = m.domain_sizes[&Logvar::new("X")];
        ensure(d == 200 + 100 * i, || format!("model {i} has size {d}"))?;
        let expected = pmf(d as u64 / 100) * 0.7;
        ensure(rel(m.prob, expected) < 1e-12, || {
            format!("weight {} at d={d}", m.prob)
        })?;
        let g2 = m.model.parfactors()[2].constraint().tuples().unwrap();
        let shape: BTreeSet<Constant> = g2.iter().map(|t| t[1].clone()).collect();
        ensure(shape == ts && g2.len() == 2 * d, || {
            format!("g2 constraint at d={d}")
        })?;
    }
    // without the cascade the kept sizes are 200..900
    let e8 = expand(&universe(Some(WorldFilter::new(0.05, false).unwrap()))).unwrap();
    let sizes: BTreeSet<usize> = e8
        .models
        .iter()
        .map(|m| m.domain_sizes[&Logvar::new("X")])
        .collect();
    ensure(sizes == (2..=9).map(|k| 100 * k).collect(), || {
        format!("sizes {sizes:?}")
    })?;
    let all = expand(&universe(None)).unwrap();
    let w100 = all
        .models
        .iter()
        .find(|m| m.domain_sizes[&Logvar::new("X")] == 100 && m.constraint_prob == 0.7)
        .unwrap()
        .prob;
    ensure(rel(w100, 3.56e-2 * 0.7) < 0.01, || {
        format!("d=100 weight {w100:e}")
    })?;
    Ok(format!(
        "8 domain worlds, 24 constraint worlds, 7 models; d=100 weight {w100:.4e}"
    ))
}

fn c3_constraint_program() -> Outcome {
    let people: Vec<Constant> = ["alice", "bob", "eve"]
        .iter()
        .map(|c| Constant::new(c))
        .collect();
    let dw = DomainWorld::new(
        [
            (Logvar::new("X"), people.clone()),
            (Logvar::new("T"), named("t", 3)),
        ],
        None,
    )
    .unwrap();
    let worlds = evaluate(&Program::parse(PROGRAM).unwrap(), &template(), &dw).unwrap();
    let probs: Vec<f64> = worlds.iter().map(|w| w.prob().unwrap()).collect();
    ensure(probs == [0.7, 0.2, 0.1], || format!("probs {probs:?}"))?;
    for (w, (a, b)) in worlds
        .iter()
        .zip([("t1", "t2"), ("t2", "t3"), ("t1", "t3")])
    {
        let expected: BTreeSet<Tuple> = people
            .iter()
            .flat_map(|p| [a, b].map(|t| vec![p.clone(), Constant::new(t)]))
            .collect();
        let got = w.constraints()[2].tuples().unwrap();
        ensure(*got == expected, || {
            format!("constraint for pair({a},{b}): {:?}", got)
        })?;
        let c1: BTreeSet<Tuple> = people.iter().map(|p| vec![p.clone()]).collect();
        ensure(*w.constraints()[1].tuples().unwrap() == c1, || {
            "C1 differs".into()
        })?;
    }
    Ok("3 worlds (0.7, 0.2, 0.1) with C12, C22, C32 exact".into())
}

fn c4_exponents() -> Outcome {
    let m = g_ex(3, 2, 11);
    let (_, log) = lifted_query_traced(&m, &marginal("Epid")).unwrap();
    let mut sums = log.sum_outs();
    sums.sort();
    let expected = vec![("Sick(X)", 3), ("Travel(X)", 1), ("Treat(X, T)", 2)];
    ensure(sums == expected, || format!("sum-outs {sums:?}"))?;
    ensure(log.groundings() == 0, || "grounding fallback used".into())?;
    Ok("Treat ^2, Travel ^1, Sick ^3".into())
}

fn random_query(rng: &mut ChaCha8Rng, x: usize, t: usize) -> QuerySpec {
    let mut atoms: Vec<GroundAtom> = vec!["Epid".parse().unwrap()];
    for i in 1..=x {
        atoms.push(format!("Sick(x{i})").parse().unwrap());
        atoms.push(format!("Travel(x{i})").parse().unwrap());
        for j in 1..=t {
            atoms.push(format!("Treat(x{i}, t{j})").parse().unwrap());
        }
    }
    fn pick(rng: &mut ChaCha8Rng, atoms: &mut Vec<GroundAtom>) -> GroundAtom {
        atoms.swap_remove(rng.gen_range(0..atoms.len()))
    }
    let n_targets = if atoms.len() > 2 && rng.gen_bool(0.2) {
        2
    } else {
        1
    };
    let targets: Vec<GroundAtom> = (0..n_targets).map(|_| pick(rng, &mut atoms)).collect();
    let n_ev = rng.gen_range(0..=2usize).min(atoms.len());
    let mut evidence = Vec::new();
    for _ in 0..n_ev {
        let a = pick(rng, &mut atoms);
        evidence.push((a, if rng.gen_bool(0.5) { "true" } else { "false" }));
    }
    QuerySpec::new(targets, Evidence::new(evidence).unwrap()).unwrap()
}

fn c5_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let cases = 600;
    let mut worst: f64 = 0.0;
    for case in 0..cases {
        let x = rng.gen_range(1..=4);
        let t = rng.gen_range(1..=3);
        let m = g_ex(x, t, case);
        let q = random_query(&mut rng, x, t);
        let lifted = lifted_query(&m, &q).map_err(|e| format!("case {case} {q}: {e}"))?;
        let exact = ground_ve(&m, &q).map_err(|e| format!("case {case} {q}: {e}"))?;
        let d = max_diff(lifted.probs(), exact.probs());
        ensure(d <= 1e-9, || format!("case {case} {q}: difference {d:e}"))?;
        worst = worst.max(d);
    }
    Ok(format!("{cases} models, max difference {worst:.1e}"))
}

fn c6_scaling() -> Outcome {
    let mut ops = Vec::new();
    let mut factors = Vec::new();
    for n in [10, 100, 1000] {
        let m = g_ex(n, 2, 5);
        let (_, log) = lifted_query_traced(&m, &marginal("Epid")).unwrap();
        ops.push(log.lifted_ops());
        ensure(log.groundings() == 0, || format!("grounding at n={n}"))?;
        let (_, stats) = ground_ve_traced(&m, &marginal("Epid")).unwrap();
        factors.push(stats.factors);
    }
    ensure(ops.iter().all(|&o| o == ops[0]), || {
        format!("lifted ops {ops:?}")
    })?;
    // one factor for Epid plus n for g1 and 2n for g2
    let linear: Vec<usize> = [10, 100, 1000].iter().map(|n| 1 + 3 * n).collect();
    ensure(factors == linear, || format!("ground factors {factors:?}"))?;
    Ok(format!("lifted ops {ops:?}, ground factors {factors:?}"))
}

fn brute_skyline(points: &[(f64, f64)]) -> Vec<usize> {
    (0..points.len())
        .filter(|&i| {
            let p = points[i];
            !points
                .iter()
                .any(|q| q.0 >= p.0 && q.1 >= p.1 && (q.0 > p.0 || q.1 > p.1))
        })
        .collect()
}

fn c7_skyline() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let sets = 1200;
    for s in 0..sets {
        let n = rng.gen_range(0..=200);
        // every third set draws from a coarse grid so that ties are frequent
        let coarse = s % 3 == 0;
        let mut draw = || {
            if coarse {
                rng.gen_range(0..10) as f64 / 10.0
            } else {
                rng.gen::<f64>()
            }
        };
        let points: Vec<(f64, f64)> = (0..n).map(|_| (draw(), draw())).collect();
        let mut fast = pareto_front(&points);
        let ordered = fast.windows(2).all(|w| points[w[0]].0 >= points[w[1]].0);
        ensure(ordered, || format!("set {s}: not ordered by model prob"))?;
        fast.sort();
        ensure(fast == brute_skyline(&points), || {
            format!("set {s}: frontier differs")
        })?;
    }
    Ok(format!("{sets} sets of up to 200 points"))
}

fn c8_mass() -> Outcome {
    // both sides weighted and nothing filtered
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let raw: Vec<f64> = (0..4).map(|_| rng.gen_range(0.1..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut px: Vec<f64> = raw.iter().map(|w| w / total).collect();
    px[3] = 1.0 - px[..3].iter().sum::<f64>();
    let entries: Vec<String> = px
        .iter()
        .enumerate()
        .map(|(i, p)| format!(r#"{{"size": {}, "prob": {p:e}}}"#, i + 1))
        .collect();
    let spec = format!(
        r#"{{"domains": {{"X": {{"enumerated": [{}]}}, "T": {{"fixed": ["t1", "t2", "t3"]}}}}}}"#,
        entries.join(", ")
    );
    let u = UniverseModel::new(
        template(),
        Program::parse(PROGRAM).unwrap(),
        DomainSpec::parse(&spec).unwrap(),
        None,
    )
    .unwrap();
    let e = expand(&u).unwrap();
    ensure(e.models.len() == 12, || {
        format!("{} models", e.models.len())
    })?;
    let sum: f64 = e.models.iter().map(|m| m.prob).sum();
    ensure((sum - 1.0).abs() < 1e-9, || format!("weights sum to {sum}"))?;
    for m in &e.models {
        let pk = px[m.domain_sizes[&Logvar::new("X")] - 1];
        let pj = [0.7, 0.2, 0.1][m.constraint_world];
        ensure(rel(m.prob, pk * pj) < 1e-12, || {
            format!("weight {} vs {}", m.prob, pk * pj)
        })?;
    }
    // beta-binomial domains drop the empty-domain bin without renormalising
    let bb = expand(&universe(None)).unwrap();
    let bb_sum: f64 = bb.models.iter().map(|m| m.prob).sum();
    ensure((bb_sum - (1.0 - pmf(0))).abs() < 1e-9, || {
        format!("beta-binomial mass {bb_sum}")
    })?;

    let dw = DomainWorld::new(
        [
            (Logvar::new("X"), named("x", 2)),
            (Logvar::new("T"), named("t", 3)),
        ],
        None,
    )
    .unwrap();
    for m in 1..=5 {
        let text: String = (0..m)
            .map(|i| format!("? mode(v{i}). "))
            .collect::<String>()
            + "constraint g1 <- top. constraint g2 <- top.";
        let worlds =
            uniformize(evaluate(&Program::parse(&text).unwrap(), &template(), &dw).unwrap());
        ensure(
            worlds.iter().all(|w| w.prob() == Some(1.0 / m as f64)),
            || format!("uniformisation with m={m}"),
        )?;
    }
    Ok(format!(
        "sum {sum:.12}, products p_k*p_j exact, uniform 1/m for m=1..5"
    ))
}

fn c9_determinism() -> Outcome {
    let q = parse_query("P(Sick(x1) | Travel(x2)=true)").unwrap();
    let render = |threads: usize| -> String {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        pool.install(|| {
            let e = expand(&universe(Some(WorldFilter::new(0.05, false).unwrap()))).unwrap();
            let mut out = serde_json::to_string(&e.manifest()).unwrap();
            let a = query_all(&e.models, &q).unwrap();
            for entry in &a.entries {
                out.push_str(&format!("\n{} {:?}", entry.model, entry.answer.probs()));
            }
            out
        })
    };
    let first = render(1);
    let second = render(4);
    let third = render(4);
    ensure(first == second && second == third, || {
        "outputs differ".into()
    })?;
    Ok(format!(
        "{} bytes identical across 3 runs (1 and 4 threads)",
        first.len()
    ))
}

fn main() {
    // (name, check, runtime budget in seconds)
    let criteria: [Criterion; 9] = [
        ("beta-binomial fidelity", c1_beta_binomial, 0.1),
        ("world counts", c2_world_counts, 1.0),
        ("constraint program", c3_constraint_program, 0.1),
        ("lifted sum-out exponents", c4_exponents, 0.1),
        ("lifted = ground oracle", c5_oracle, 60.0),
        ("lifted scaling", c6_scaling, 10.0),
        ("skyline = brute force", c7_skyline, 10.0),
        ("probability mass", c8_mass, 1.0),
        ("determinism", c9_determinism, 5.0),
    ];
    let mut failed = 0;
    for (i, (name, f, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome =
            panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        let outcome = outcome.and_then(|d| {
            if secs < *budget {
                Ok(d)
            } else {
                Err(format!("over the {budget}s budget ({d})"))
            }
        });
        match outcome {
            Ok(detail) => println!("criterion {}: PASS  {name} ({detail}) [{secs:.2}s]", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL  {name}: {why} [{secs:.2}s]", i + 1);
            }
        }
    }
    println!("{} of 9 criteria passed", 9 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
