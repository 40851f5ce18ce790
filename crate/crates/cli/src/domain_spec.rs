use std::fs;
use std::path::PathBuf;

use seglab::lattice::Domain;

use crate::error::{CliError, CliResult};

/// Largest side accepted in `chain:` and `box:` specs.
pub const MAX_SIDE: usize = 4096;

/// `chain:L`, `box:AxB[xC]` or `file:path`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DomainSpec {
    Box(Vec<usize>),
    File(PathBuf),
}

impl DomainSpec {
    pub fn parse(text: &str) -> CliResult<Self> {
        let text = text.trim();
        let bad = |msg: &str| CliError::Config(format!("domain `{text}`: {msg}; use chain:L, box:AxB or file:path"));
        let (kind, rest) = text.split_once(':').ok_or_else(|| bad("missing kind"))?;
        let side = |s: &str| {
            s.trim()
                .parse::<usize>()
                .ok()
                .filter(|&n| (1..=MAX_SIDE).contains(&n))
                .ok_or_else(|| bad("sides must be integers in 1..=4096"))
        };
        match kind.trim() {
            "chain" => Ok(DomainSpec::Box(vec![side(rest)?])),
            "box" => {
                let sides = rest.split('x').map(side).collect::<CliResult<Vec<_>>>()?;
                if sides.len() > 3 {
                    return Err(bad("at most three sides"));
                }
                Ok(DomainSpec::Box(sides))
            }
            "file" if !rest.trim().is_empty() => Ok(DomainSpec::File(PathBuf::from(rest.trim()))),
            _ => Err(bad("unknown kind")),
        }
    }

    pub fn resolve(&self) -> CliResult<Domain> {
        match self {
            DomainSpec::Box(sides) => Ok(Domain::boxed(sides)?),
            DomainSpec::File(path) => {
                let text = fs::read_to_string(path).map_err(|e| CliError::Io(path.display().to_string(), e))?;
                Ok(Domain::from_text(&text)?)
            }
        }
    }
}
