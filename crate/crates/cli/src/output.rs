//! CSV and JSON writers. Probabilities go to CSV with 12 significant digits and to JSON
//! as exact doubles.

use clap::ValueEnum;
use serde::Serialize;
use unilift::query::{AnswerEntry, AnswerSet, TrendReport};
use unilift::Expansion;

use crate::{input, Failure};

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

fn num(x: f64) -> String {
    format!("{x:.11e}")
}

fn csv_bytes(header: &[String], rows: Vec<Vec<String>>) -> Result<Vec<u8>, Failure> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let fail = |e: csv::Error| input(format!("csv: {e}"));
    w.write_record(header).map_err(fail)?;
    for r in rows {
        w.write_record(&r).map_err(fail)?;
    }
    w.into_inner().map_err(|e| input(format!("csv: {e}")))
}

fn json_bytes<T: Serialize>(v: &T) -> Result<Vec<u8>, Failure> {
    let mut out = serde_json::to_vec_pretty(v).map_err(|e| input(format!("json: {e}")))?;
    out.push(b'\n');
    Ok(out)
}

#[derive(Serialize)]
struct ManifestFile<'a> {
    domain_worlds: usize,
    domain_worlds_kept: usize,
    constraint_worlds: usize,
    retained_mass: f64,
    worlds: &'a [unilift::universe::ManifestRow],
}

pub fn manifest(e: &Expansion, format: Format) -> Result<Vec<u8>, Failure> {
    let rows = e.manifest();
    match format {
        Format::Json => json_bytes(&ManifestFile {
            domain_worlds: e.domain_worlds,
            domain_worlds_kept: e.domain_worlds_kept,
            constraint_worlds: e.constraint_worlds,
            retained_mass: e.retained_mass,
            worlds: &rows,
        }),
        Format::Csv => {
            let header = [
                "world_id",
                "domain_size",
                "domain_world",
                "constraint_world",
                "domain_prob",
                "constraint_prob",
                "weight",
                "degenerate",
            ]
            .map(String::from);
            let body = rows
                .iter()
                .map(|r| {
                    vec![
                        r.world_id.to_string(),
                        r.domain_sizes.clone(),
                        r.domain_world.to_string(),
                        r.constraint_world.to_string(),
                        num(r.domain_prob),
                        num(r.constraint_prob),
                        num(r.weight),
                        r.degenerate.to_string(),
                    ]
                })
                .collect();
            csv_bytes(&header, body)
        }
    }
}

#[derive(Serialize)]
pub struct Row {
    world_id: usize,
    domain_size: String,
    model_prob: f64,
    probs: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    reason: Option<String>,
}

impl Row {
    pub fn new(e: &AnswerEntry, reason: Option<String>) -> Self {
        Row {
            world_id: e.model,
            domain_size: e.size_label(),
            model_prob: e.model_prob,
            probs: e.answer.probs().to_vec(),
            reason,
        }
    }
}

/// `p_<target>=<value>` for every joint assignment of the targets.
fn prob_columns(a: &AnswerSet) -> Vec<String> {
    let Some(first) = a.entries.first() else {
        return Vec::new();
    };
    let d = &first.answer;
    d.assignments()
        .into_iter()
        .map(|vals| {
            let parts: Vec<String> = d
                .targets()
                .iter()
                .zip(vals)
                .map(|(t, v)| format!("{t}={v}"))
                .collect();
            format!("p_{}", parts.join(","))
        })
        .collect()
}

#[derive(Serialize)]
struct Skip {
    world_id: usize,
    reason: String,
}

#[derive(Serialize)]
struct Trend {
    direction: String,
    max_delta: f64,
}

#[derive(Serialize)]
struct AnswerFile {
    query: String,
    retained_mass: f64,
    columns: Vec<String>,
    rows: Vec<Row>,
    skipped: Vec<Skip>,
    #[serde(skip_serializing_if = "Option::is_none")]
    trend: Option<Trend>,
}

/// Answer table; `with_reason` adds the `reason` column of derived outputs.
pub fn answers(
    a: &AnswerSet,
    rows: Vec<Row>,
    with_reason: bool,
    trend: Option<&TrendReport>,
    format: Format,
) -> Result<Vec<u8>, Failure> {
    let columns = prob_columns(a);
    match format {
        Format::Json => json_bytes(&AnswerFile {
            query: a.query.to_string(),
            retained_mass: a.retained_mass(),
            columns,
            rows,
            skipped: a
                .skipped
                .iter()
                .map(|s| Skip {
                    world_id: s.model,
                    reason: s.reason.clone(),
                })
                .collect(),
            trend: trend.map(|t| Trend {
                direction: t.direction.to_string(),
                max_delta: t.max_delta,
            }),
        }),
        Format::Csv => {
            let mut header: Vec<String> = ["world_id", "domain_size", "model_prob"]
                .map(String::from)
                .to_vec();
            header.extend(columns);
            if with_reason {
                header.push("reason".into());
            }
            let body = rows
                .into_iter()
                .map(|r| {
                    let mut rec = vec![r.world_id.to_string(), r.domain_size, num(r.model_prob)];
                    rec.extend(r.probs.iter().map(|&p| num(p)));
                    if let Some(reason) = r.reason {
                        rec.push(reason);
                    }
                    rec
                })
                .collect();
            csv_bytes(&header, body)
        }
    }
}
