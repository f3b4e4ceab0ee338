//! Fixtures shared by the benchmarks in `benches/`.

use unilift::domain::DomainSpec;
use unilift::model::format::ModelFile;
use unilift::{
    Constant, DomainWorld, Logvar, ParameterisedModel, Program, UniverseModel, WorldFilter,
};

pub const MODEL: &str = include_str!("../../../data/epidemic/model.json");
pub const PROGRAM: &str = include_str!("../../../data/epidemic/program.dl");
pub const DOMAINS: &str = include_str!("../../../data/epidemic/domains.json");

fn named(prefix: &str, n: usize) -> Vec<Constant> {
    (1..=n)
        .map(|i| Constant::new(&format!("{prefix}{i}")))
        .collect()
}

/// The epidemic model with `x` people and `t` treatments and every parfactor unconstrained.
pub fn epidemic(x: usize, t: usize) -> ParameterisedModel {
    let dw = DomainWorld::new(
        [
            (Logvar::new("X"), named("x", x)),
            (Logvar::new("T"), named("t", t)),
        ],
        None,
    )
    .unwrap();
    let tmpl = ModelFile::parse(MODEL).unwrap().template(0).unwrap();
    let program = Program::top(&tmpl);
    let worlds = unilift::evaluate(&program, &tmpl, &dw).unwrap();
    unilift::instantiate(&tmpl, &worlds[0]).unwrap()
}

/// The epidemic universe, optionally filtered at `threshold` with cascading.
pub fn universe(threshold: Option<f64>) -> UniverseModel {
    let tmpl = ModelFile::parse(MODEL).unwrap().template(0).unwrap();
    let program = Program::parse(PROGRAM).unwrap();
    let domains = DomainSpec::parse(DOMAINS).unwrap();
    let filter = threshold.map(|t| WorldFilter::new(t, true).unwrap());
    UniverseModel::new(tmpl, program, domains, filter).unwrap()
}
