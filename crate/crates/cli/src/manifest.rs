// SPDX-License-Identifier: Apache-2.0

//! Run parameters, recorded as `# key=value` header lines of every output
//! table so that a run can be repeated from its output alone.

use std::fmt;
use std::str::FromStr;

use anyhow::{anyhow, bail, Result};
use clap::ValueEnum;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Direction {
    /// Distances towards each node (run on the transpose).
    Negative,
    /// Distances from each node (run on the graph as given).
    Positive,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Negative => "negative",
            Direction::Positive => "positive",
        })
    }
}

impl FromStr for Direction {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        <Direction as ValueEnum>::from_str(s, false).map_err(|e| anyhow!(e))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Mode {
    Hyperball {
        log2m: u32,
        register_width: u32,
        seed: u64,
        runs: usize,
    },
    Exact {
        budget: Option<u128>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunManifest {
    pub graph: String,
    pub direction: Direction,
    pub weights: Option<String>,
    pub discounts: Vec<String>,
    /// `-` for standard output.
    pub output: String,
    pub mode: Mode,
}

impl RunManifest {
    pub fn to_comments(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        let mut push = |k: &str, v: String| out.push((k.to_string(), v));
        match &self.mode {
            Mode::Hyperball { .. } => push("command", "hyperball".into()),
            Mode::Exact { .. } => push("command", "exact".into()),
        }
        push("graph", self.graph.clone());
        push("direction", self.direction.to_string());
        push("weights", self.weights.clone().unwrap_or_default());
        for d in &self.discounts {
            push("discount", d.clone());
        }
        match &self.mode {
            Mode::Hyperball {
                log2m,
                register_width,
                seed,
                runs,
            } => {
                push("log2m", log2m.to_string());
                push("register_width", register_width.to_string());
                push("seed", seed.to_string());
                push("runs", runs.to_string());
            }
            Mode::Exact { budget } => {
                push("budget", budget.map(|b| b.to_string()).unwrap_or_default());
            }
        }
        push("output", self.output.clone());
        out
    }

    pub fn from_comments(comments: &[(String, String)]) -> Result<Self> {
        let get = |key: &str| -> Result<&str> {
            comments
                .iter()
                .find(|(k, _)| k == key)
                .map(|(_, v)| v.as_str())
                .ok_or_else(|| anyhow!("header lacks {key}="))
        };
        let parse = |key: &str| -> Result<u64> {
            get(key)?
                .parse()
                .map_err(|e| anyhow!("bad {key} in header: {e}"))
        };
        let mode = match get("command")? {
            "hyperball" => Mode::Hyperball {
                log2m: parse("log2m")? as u32,
                register_width: parse("register_width")? as u32,
                seed: parse("seed")?,
                runs: parse("runs")? as usize,
            },
            "exact" => Mode::Exact {
                budget: match get("budget")? {
                    "" => None,
                    b => Some(
                        b.parse()
                            .map_err(|e| anyhow!("bad budget in header: {e}"))?,
                    ),
                },
            },
            other => bail!("unknown command {other:?} in header"),
        };
        let weights = get("weights")?;
        Ok(Self {
            graph: get("graph")?.to_string(),
            direction: get("direction")?.parse()?,
            weights: (!weights.is_empty()).then(|| weights.to_string()),
            discounts: comments
                .iter()
                .filter(|(k, _)| k == "discount")
                .map(|(_, v)| v.clone())
                .collect(),
            output: get("output")?.to_string(),
            mode,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let m = RunManifest {
            graph: "g.bin".into(),
            direction: Direction::Negative,
            weights: Some("w.txt".into()),
            discounts: vec!["log".into(), "table:t.txt".into()],
            output: "out.tsv".into(),
            mode: Mode::Hyperball {
                log2m: 6,
                register_width: 5,
                seed: 3,
                runs: 10,
            },
        };
        assert_eq!(RunManifest::from_comments(&m.to_comments()).unwrap(), m);

        let e = RunManifest {
            weights: None,
            discounts: vec![],
            direction: Direction::Positive,
            mode: Mode::Exact { budget: Some(5) },
            ..m
        };
        assert_eq!(RunManifest::from_comments(&e.to_comments()).unwrap(), e);
    }
}
