//! Text forms of queries and event probes.

use super::EventProbe;
use crate::error::{Error, Result};
use crate::lve::{Evidence, QuerySpec};
use crate::model::GroundAtom;

/// Split on `sep` outside parentheses.
fn split_top(s: &str, sep: char) -> Result<Vec<&str>> {
    let mut depth = 0i32;
    let mut start = 0;
    let mut out = Vec::new();
    for (i, c) in s.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => {
                depth -= 1;
                if depth < 0 {
                    return Err(Error::invalid(format!("unbalanced `)` in `{s}`")));
                }
            }
            c if c == sep && depth == 0 => {
                out.push(&s[start..i]);
                start = i + c.len_utf8();
            }
            _ => {}
        }
    }
    if depth != 0 {
        return Err(Error::invalid(format!("unbalanced `(` in `{s}`")));
    }
    out.push(&s[start..]);
    Ok(out)
}

fn event(text: &str) -> Result<(GroundAtom, String)> {
    let (atom, value) = text
        .rsplit_once('=')
        .ok_or_else(|| Error::invalid(format!("expected `atom=value`, found `{}`", text.trim())))?;
    let value = value.trim();
    if value.is_empty() {
        return Err(Error::invalid(format!(
            "missing value in `{}`",
            text.trim()
        )));
    }
    Ok((atom.trim().parse()?, value.to_string()))
}

/// Parse `P(A, B | C=v, D=w)`.
pub fn parse_query(text: &str) -> Result<QuerySpec> {
    let t = text.trim();
    let inner = t
        .strip_prefix("P(")
        .and_then(|r| r.strip_suffix(')'))
        .ok_or_else(|| Error::invalid(format!("a query looks like `P(A | B=b)`, found `{t}`")))?;
    let parts = split_top(inner, '|')?;
    if parts.len() > 2 {
        return Err(Error::invalid(format!("more than one `|` in `{t}`")));
    }
    if parts[0].trim().is_empty() {
        return Err(Error::invalid("a query needs at least one target"));
    }
    let targets = split_top(parts[0], ',')?
        .into_iter()
        .map(|a| a.trim().parse::<GroundAtom>())
        .collect::<Result<Vec<_>>>()?;
    let evidence = match parts.get(1) {
        Some(ev) => Evidence::new(
            split_top(ev, ',')?
                .into_iter()
                .map(event)
                .collect::<Result<Vec<_>>>()?,
        )?,
        None => Evidence::default(),
    };
    QuerySpec::new(targets, evidence)
}

impl std::str::FromStr for EventProbe {
    type Err = Error;

    /// `Sick(x1)=true`
    fn from_str(s: &str) -> Result<Self> {
        let (atom, value) = event(s)?;
        Ok(EventProbe::new(atom, value))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_queries() {
        let q = parse_query("P(Sick(x1))").unwrap();
        assert_eq!(q.targets().len(), 1);
        assert!(q.evidence().is_empty());
        let q =
            parse_query(" P(Epid, Treat(x1, t2) | Sick(x1)=true, Travel(x2) = false) ").unwrap();
        assert_eq!(q.targets()[1].to_string(), "Treat(x1, t2)");
        assert_eq!(q.evidence().len(), 2);
        assert_eq!(
            q.to_string(),
            "P(Epid, Treat(x1, t2) | Sick(x1)=true, Travel(x2)=false)"
        );
    }

    #[test]
    fn rejects_malformed_queries() {
        for bad in [
            "",
            "P()",
            "P( | A=true)",
            "Q(A)",
            "P(A | B)",
            "P(A | B=)",
            "P(A(x)",
            "P(A | B=1 | C=2)",
            "P(A, A)",
        ] {
            assert!(parse_query(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn parses_probes() {
        let e: EventProbe = "Sick(x1)=true".parse().unwrap();
        assert_eq!(e.atom().to_string(), "Sick(x1)");
        assert_eq!(e.value(), "true");
        assert!("Sick(x1)".parse::<EventProbe>().is_err());
    }
}
