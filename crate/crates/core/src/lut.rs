//! Sequence-length lookup table for recurrent models.
//!
//! Seq2seq-style models unroll a data-dependent number of recurrent steps.
//! The unroll count is predicted from a profile of observed
//! (input length, output length) pairs: the table maps each profiled input
//! length to the geometric mean of its observed output lengths, and keeps the
//! observed multiset so simulated "actual" lengths can be drawn from it.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Raw profile observations, one `(input_len, output_len)` pair per entry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeqLenProfile {
    pub name: String,
    pub entries: Vec<(u64, u64)>,
}

impl SeqLenProfile {
    /// Parse the delimited profile format: a `# profile: <name>` header,
    /// `#` comment lines, and one `input_len,output_len` pair per line.
    pub fn parse(text: &str) -> Result<Self> {
        let mut name = None;
        let mut entries = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let rest = rest.trim();
                if let Some(n) = rest.strip_prefix("profile:") {
                    name = Some(n.trim().to_string());
                }
                continue;
            }
            let (a, b) = line.split_once(',').ok_or_else(|| {
                Error::Profile(format!("line {}: expected `input,output`", lineno + 1))
            })?;
            let parse = |s: &str| -> Result<u64> {
                s.trim()
                    .parse::<u64>()
                    .map_err(|e| Error::Profile(format!("line {}: {e}", lineno + 1)))
            };
            let (input, output) = (parse(a)?, parse(b)?);
            if input == 0 || output == 0 {
                return Err(Error::Profile(format!(
                    "line {}: lengths must be >= 1",
                    lineno + 1
                )));
            }
            entries.push((input, output));
        }
        let name = name.ok_or_else(|| Error::Profile("missing `# profile: <name>` header".into()))?;
        if entries.is_empty() {
            return Err(Error::Profile(format!("profile `{name}` has no entries")));
        }
        Ok(Self { name, entries })
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("# profile: {}\n", self.name);
        for (i, o) in &self.entries {
            out.push_str(&format!("{i},{o}\n"));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
struct LutEntry {
    geomean: f64,
    observed: Vec<u64>, // sorted
}

/// Immutable lookup table built from a profile.
#[derive(Debug, Clone, PartialEq)]
pub struct SeqLenLut {
    name: String,
    table: BTreeMap<u64, LutEntry>,
}

/// Group profile observations by input length and compute per-key geometric
/// means. Order-insensitive: shuffled profiles build identical tables.
pub fn build_lut(profile: &SeqLenProfile) -> Result<SeqLenLut> {
    if profile.entries.is_empty() {
        return Err(Error::Profile(format!(
            "profile `{}` is empty",
            profile.name
        )));
    }
    let mut grouped: BTreeMap<u64, Vec<u64>> = BTreeMap::new();
    for &(input, output) in &profile.entries {
        grouped.entry(input).or_default().push(output);
    }
    let table = grouped
        .into_iter()
        .map(|(input, mut outs)| {
            outs.sort_unstable();
            let log_sum: f64 = outs.iter().map(|&o| (o as f64).ln()).sum();
            let geomean = (log_sum / outs.len() as f64).exp();
            (
                input,
                LutEntry {
                    geomean,
                    observed: outs,
                },
            )
        })
        .collect();
    Ok(SeqLenLut {
        name: profile.name.clone(),
        table,
    })
}

impl SeqLenLut {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn input_lengths(&self) -> Vec<u64> {
        self.table.keys().copied().collect()
    }

    pub fn geomean(&self, input_len: u64) -> f64 {
        self.table[&self.resolve_key(input_len)].geomean
    }

    pub fn observed(&self, input_len: u64) -> &[u64] {
        &self.table[&self.resolve_key(input_len)].observed
    }

    /// Nearest profiled key; ties go to the smaller key.
    fn resolve_key(&self, input_len: u64) -> u64 {
        if self.table.contains_key(&input_len) {
            return input_len;
        }
        let below = self.table.range(..=input_len).next_back().map(|(&k, _)| k);
        let above = self.table.range(input_len..).next().map(|(&k, _)| k);
        match (below, above) {
            (Some(b), Some(a)) => {
                if input_len - b <= a - input_len {
                    b
                } else {
                    a
                }
            }
            (Some(b), None) => b,
            (None, Some(a)) => a,
            (None, None) => unreachable!("lut is never empty"),
        }
    }

    /// Predicted unroll length: the resolved key's geometric mean rounded to
    /// the nearest integer (halves round up), never below 1.
    pub fn predict_unroll(&self, input_len: u64) -> u64 {
        round_half_up(self.geomean(input_len))
    }

    /// Uniform draw from the resolved key's observed output lengths.
    pub fn sample_actual<R: Rng>(&self, input_len: u64, rng: &mut R) -> u64 {
        let obs = self.observed(input_len);
        obs[rng.random_range(0..obs.len())]
    }
}

/// Unroll counts are whole steps: round to nearest, halves up, at least 1.
fn round_half_up(v: f64) -> u64 {
    ((v + 0.5).floor() as u64).max(1)
}
