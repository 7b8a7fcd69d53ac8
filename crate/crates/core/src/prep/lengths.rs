use serde::{Deserialize, Serialize};

use crate::codec::{serialize_json, serialize_toon};
use crate::error::{Error, Result};
use crate::graph::SceneGraph;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LengthMeasure {
    Chars,
    Bytes,
    /// Pieces left after splitting on whitespace with every ASCII punctuation
    /// character counted as its own piece.
    Whitespace,
}

impl std::str::FromStr for LengthMeasure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "chars" => Ok(Self::Chars),
            "bytes" => Ok(Self::Bytes),
            "ws" | "whitespace" => Ok(Self::Whitespace),
            other => Err(Error::InvalidConfig(format!(
                "unknown length measure `{other}`"
            ))),
        }
    }
}

pub fn measure_text(text: &str, m: LengthMeasure) -> usize {
    match m {
        LengthMeasure::Chars => text.chars().count(),
        LengthMeasure::Bytes => text.len(),
        LengthMeasure::Whitespace => {
            let mut n = 0;
            let mut in_word = false;
            for c in text.chars() {
                if c.is_whitespace() {
                    in_word = false;
                } else if c.is_ascii_punctuation() {
                    n += 1;
                    in_word = false;
                } else if !in_word {
                    n += 1;
                    in_word = true;
                }
            }
            n
        }
    }
}

/// Order statistics of a sample. The median of an even-sized sample is the
/// lower of the two middle values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub min: f64,
    pub mean: f64,
    pub median: f64,
    pub max: f64,
}

impl Summary {
    pub fn of(values: &[u64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptySamples);
        }
        let mut v = values.to_vec();
        v.sort_unstable();
        let sum: u128 = v.iter().map(|&x| u128::from(x)).sum();
        Ok(Self {
            min: v[0] as f64,
            mean: sum as f64 / v.len() as f64,
            median: v[(v.len() - 1) / 2] as f64,
            max: v[v.len() - 1] as f64,
        })
    }

    fn zip(a: &Self, b: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        Self {
            min: f(a.min, b.min),
            mean: f(a.mean, b.mean),
            median: f(a.median, b.median),
            max: f(a.max, b.max),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthStats {
    /// `chars`, `bytes`, `whitespace` or `external`.
    pub measure: String,
    pub samples: usize,
    pub json: Summary,
    pub toon: Summary,
    /// JSON over TOON per statistic; above 1 means TOON is shorter.
    pub compression: Summary,
    /// `100 · (toon − json) / json` per statistic.
    pub change_pct: Summary,
}

impl LengthStats {
    fn from_lengths(measure: String, json: &[u64], toon: &[u64]) -> Result<Self> {
        let (j, t) = (Summary::of(json)?, Summary::of(toon)?);
        Ok(Self {
            measure,
            samples: json.len(),
            compression: Summary::zip(&j, &t, |a, b| a / b),
            change_pct: Summary::zip(&j, &t, |a, b| 100.0 * (b - a) / a),
            json: j,
            toon: t,
        })
    }
}

/// Serializes every graph in both formats and summarizes the lengths.
pub fn length_stats<'a, T: Scalar + 'a>(
    graphs: impl IntoIterator<Item = &'a SceneGraph<T>>,
    measure: LengthMeasure,
) -> Result<LengthStats> {
    let mut json = Vec::new();
    let mut toon = Vec::new();
    for g in graphs {
        json.push(measure_text(&serialize_json(g)?, measure) as u64);
        toon.push(measure_text(&serialize_toon(g)?.raw_text, measure) as u64);
    }
    let name = serde_json::to_value(measure)?
        .as_str()
        .unwrap_or_default()
        .to_string();
    LengthStats::from_lengths(name, &json, &toon)
}

/// One line of an external token-count file:
/// `{"sample_id":"psg/1","json_tokens":412,"toon_tokens":330}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TokenCounts {
    pub sample_id: String,
    pub json_tokens: u64,
    pub toon_tokens: u64,
}

/// Reads a JSONL token-count file; blank lines are skipped.
pub fn read_token_counts(text: &str) -> Result<Vec<TokenCounts>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| {
            serde_json::from_str(l)
                .map_err(|e| Error::Dataset(format!("counts line {}: {e}", n + 1)))
        })
        .collect()
}

/// Summarizes token counts produced out of band (e.g. by a model tokenizer).
pub fn length_stats_from_counts(counts: &[TokenCounts]) -> Result<LengthStats> {
    let json: Vec<u64> = counts.iter().map(|c| c.json_tokens).collect();
    let toon: Vec<u64> = counts.iter().map(|c| c.toon_tokens).collect();
    LengthStats::from_lengths("external".into(), &json, &toon)
}
