//! Instance files: JSON with every rational written as a string (`"3"`,
//! `"-3"`, `"3/4"`), rows and k 1-based.

use std::path::Path;

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use rankexplain::{
    parse_rational, ColumnDistribution, Direction, EffectKind, EffectSpec, Matrix, ProductDistribution, RankingSpec,
    Rational, Score, WeightVector,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankingJson {
    pub score: String,
    #[serde(default = "default_direction")]
    pub direction: String,
}

fn default_direction() -> String {
    "asc".to_string()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EffectJson {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub row: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceFile {
    pub matrix: Vec<Vec<String>>,
    pub ranking: RankingJson,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub effect: Option<EffectJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<String>>,
    /// Per column: `[value, probability]` pairs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distributions: Option<Vec<Vec<(String, String)>>>,
}

/// Parsed instance; rows inside `effect` are 0-based.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub matrix: Matrix,
    pub spec: RankingSpec,
    pub effect: Option<EffectSpec>,
    pub weights: Option<WeightVector>,
    pub dist: Option<ProductDistribution>,
}

pub fn parse_ranking(text: &str) -> anyhow::Result<RankingSpec> {
    let (score, direction) = text.split_once('-').unwrap_or((text, "asc"));
    Ok(RankingSpec::new(score.parse::<Score>()?, direction.parse::<Direction>()?)?)
}

/// Builds an effect from a kind name and 1-based row / k.
pub fn parse_effect(kind: &str, row: Option<usize>, k: Option<usize>) -> anyhow::Result<EffectSpec> {
    let kind: EffectKind = kind.parse()?;
    let row = match row {
        Some(0) => bail!("rows are numbered from 1"),
        Some(r) => Some(r - 1),
        None => None,
    };
    Ok(EffectSpec { kind, row, k })
}

fn rationals(values: &[String], what: &str) -> anyhow::Result<Vec<Rational>> {
    values
        .iter()
        .map(|v| parse_rational(v).with_context(|| format!("in {what}")))
        .collect()
}

fn render(values: &[Rational]) -> Vec<String> {
    values.iter().map(|v| v.to_string()).collect()
}

impl Instance {
    pub fn from_file(file: &InstanceFile) -> anyhow::Result<Self> {
        let rows = file
            .matrix
            .iter()
            .enumerate()
            .map(|(i, r)| rationals(r, &format!("matrix row {}", i + 1)))
            .collect::<anyhow::Result<Vec<_>>>()?;
        let matrix = Matrix::from_rows(rows)?;
        let spec = RankingSpec::new(file.ranking.score.parse()?, file.ranking.direction.parse()?)?;
        let effect = file.effect.as_ref().map(|e| parse_effect(&e.kind, e.row, e.k)).transpose()?;
        if let Some(effect) = &effect {
            effect.validate(matrix.n())?;
        }
        let weights = file.weights.as_ref().map(|w| rationals(w, "weights").map(WeightVector::new)).transpose()?;
        if let Some(w) = &weights {
            if w.len() != matrix.m() {
                bail!("{} weights for {} columns", w.len(), matrix.m());
            }
        }
        let dist = file
            .distributions
            .as_ref()
            .map(|cols| -> anyhow::Result<ProductDistribution> {
                let columns = cols
                    .iter()
                    .enumerate()
                    .map(|(j, col)| {
                        let support = col
                            .iter()
                            .map(|(v, p)| Ok((parse_rational(v)?, parse_rational(p)?)))
                            .collect::<rankexplain::Result<Vec<_>>>()
                            .with_context(|| format!("in distribution of column {}", j + 1))?;
                        ColumnDistribution::new(support).with_context(|| format!("distribution of column {}", j + 1))
                    })
                    .collect::<anyhow::Result<Vec<_>>>()?;
                let dist = ProductDistribution::new(columns)?;
                dist.check_width(matrix.m())?;
                Ok(dist)
            })
            .transpose()?;
        Ok(Instance { matrix, spec, effect, weights, dist })
    }

    pub fn to_file(&self) -> InstanceFile {
        let spec = self.spec.to_string();
        let (score, direction) = spec.split_once('-').unwrap_or((&spec, "asc"));
        InstanceFile {
            matrix: self.matrix.rows().map(render).collect(),
            ranking: RankingJson { score: score.to_string(), direction: direction.to_string() },
            effect: self.effect.map(|e| EffectJson { kind: e.kind.name().to_string(), row: e.row.map(|r| r + 1), k: e.k }),
            weights: self.weights.as_ref().map(|w| render(w.values())),
            distributions: self.dist.as_ref().map(|d| {
                d.columns()
                    .iter()
                    .map(|c| c.support().iter().map(|(v, p)| (v.to_string(), p.to_string())).collect())
                    .collect()
            }),
        }
    }

    pub fn from_json(text: &str) -> anyhow::Result<Self> {
        let file: InstanceFile = serde_json::from_str(text).context("malformed instance JSON")?;
        Self::from_file(&file)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_json(&text).with_context(|| format!("in {}", path.display()))
    }
}

/// Matrix alone from a headerless CSV of rationals.
pub fn read_matrix_csv(path: &Path) -> anyhow::Result<Matrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.with_context(|| format!("{} line {}", path.display(), i + 1))?;
        let row: Vec<String> = record.iter().map(str::to_string).collect();
        rows.push(rationals(&row, &format!("CSV row {}", i + 1))?);
    }
    Ok(Matrix::from_rows(rows)?)
}
