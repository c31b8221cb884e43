//! Anomaly scores from a trained model: the squared distance of each latent
//! code to its closest prior mode (MD), the mean squared reconstruction
//! difference (RE), both min-max normalised within the entry's closest-mode
//! group, and their blend `AS = alpha * RE + (1 - alpha) * MD`.
//!
//! MD uses the squared norm. Argmin and within-group ranking are the same
//! as for the plain Euclidean distance; only the spacing differs.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aae::{decode, encode, AaeModel, LATENT_DIM};
use crate::ledger::{EncodedMatrix, EntryLabel};
use crate::nn::NnError;

pub const DEFAULT_ALPHA: f64 = 0.8;

#[derive(Debug, Error, PartialEq)]
pub enum ScoringError {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("matrix was encoded with spec {actual}, model expects {expected}")]
    Compatibility { expected: String, actual: String },
    #[error(transparent)]
    Nn(#[from] NnError),
}

/// Population over which MD and RE are min-max normalised.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizationScope {
    /// Within each closest-mode group.
    #[default]
    PerMode,
    /// Over all scored entries at once.
    Global,
}

impl fmt::Display for NormalizationScope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NormalizationScope::PerMode => "per-mode",
            NormalizationScope::Global => "global",
        })
    }
}

impl FromStr for NormalizationScope {
    type Err = ScoringError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "per-mode" | "per_mode" => Ok(NormalizationScope::PerMode),
            "global" => Ok(NormalizationScope::Global),
            other => Err(ScoringError::Argument(format!("unknown normalization {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub id: u64,
    /// 1-based index of the closest mode.
    pub closest_mode: usize,
    /// Raw squared distance to the closest mode.
    pub divergence: f64,
    pub md: f64,
    /// Raw mean squared reconstruction difference.
    pub error: f64,
    pub re: f64,
    pub score: f64,
    pub latent: [f64; LATENT_DIM],
    pub label: Option<EntryLabel>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTable {
    pub alpha: f64,
    pub scope: NormalizationScope,
    pub tau: usize,
    pub records: Vec<ScoreRecord>,
}

impl ScoreTable {
    /// Same entries with AS recomputed for another `alpha`.
    pub fn with_alpha(&self, alpha: f64) -> Result<Self, ScoringError> {
        check_alpha(alpha)?;
        let records = self
            .records
            .iter()
            .map(|r| ScoreRecord {
                score: blend(r.re, r.md, alpha),
                ..r.clone()
            })
            .collect();
        Ok(Self {
            alpha,
            records,
            ..*self
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Squared distance from each latent row to its closest center and that
/// center's 1-based index. Ties go to the lowest index.
pub fn mode_divergence(
    z: ArrayView2<f64>,
    centers: &[[f64; LATENT_DIM]],
) -> Result<(Vec<f64>, Vec<usize>), ScoringError> {
    if centers.is_empty() {
        return Err(ScoringError::Argument("no mode centers".into()));
    }
    if z.ncols() != LATENT_DIM {
        return Err(ScoringError::Argument(format!(
            "latent width {}, expected {LATENT_DIM}",
            z.ncols()
        )));
    }
    let mut divergence = Vec::with_capacity(z.nrows());
    let mut closest = Vec::with_capacity(z.nrows());
    for row in z.rows() {
        let mut best = (f64::INFINITY, 0);
        for (i, c) in centers.iter().enumerate() {
            let d = (row[0] - c[0]).powi(2) + (row[1] - c[1]).powi(2);
            if d < best.0 {
                best = (d, i);
            }
        }
        divergence.push(best.0);
        closest.push(best.1 + 1);
    }
    Ok((divergence, closest))
}

/// `(1/k) * sum_j (x_j - x_hat_j)^2` per row over all k dimensions.
pub fn reconstruction_error(x: ArrayView2<f64>, x_hat: ArrayView2<f64>) -> Result<Vec<f64>, ScoringError> {
    if x.dim() != x_hat.dim() {
        return Err(ScoringError::Argument(format!(
            "inputs {:?} vs reconstructions {:?}",
            x.dim(),
            x_hat.dim()
        )));
    }
    let k = x.ncols().max(1) as f64;
    Ok(x.rows()
        .into_iter()
        .zip(x_hat.rows())
        .map(|(a, b)| a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum::<f64>() / k)
        .collect())
}

/// Min-max normalisation within each group of equal `closest` values.
/// A group whose values are all equal maps to 0.
pub fn normalize_per_mode(values: &[f64], closest: &[usize]) -> Result<Vec<f64>, ScoringError> {
    if values.len() != closest.len() {
        return Err(ScoringError::Argument(format!(
            "{} values for {} mode assignments",
            values.len(),
            closest.len()
        )));
    }
    let mut bounds: BTreeMap<usize, (f64, f64)> = BTreeMap::new();
    for (&v, &g) in values.iter().zip(closest) {
        let b = bounds.entry(g).or_insert((v, v));
        b.0 = b.0.min(v);
        b.1 = b.1.max(v);
    }
    Ok(values
        .iter()
        .zip(closest)
        .map(|(&v, g)| rescale(v, bounds[g]))
        .collect())
}

/// Min-max normalisation over the whole vector.
pub fn normalize_global(values: &[f64]) -> Vec<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    values.iter().map(|&v| rescale(v, (lo, hi))).collect()
}

fn rescale(v: f64, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        (v - lo) / (hi - lo)
    } else {
        0.0
    }
}

pub fn anomaly_score(re: &[f64], md: &[f64], alpha: f64) -> Result<Vec<f64>, ScoringError> {
    check_alpha(alpha)?;
    if re.len() != md.len() {
        return Err(ScoringError::Argument(format!("{} RE values vs {} MD values", re.len(), md.len())));
    }
    Ok(re.iter().zip(md).map(|(&r, &m)| blend(r, m, alpha)).collect())
}

fn check_alpha(alpha: f64) -> Result<(), ScoringError> {
    if (0.0..=1.0).contains(&alpha) {
        Ok(())
    } else {
        Err(ScoringError::Argument(format!("alpha {alpha} outside [0, 1]")))
    }
}

fn blend(re: f64, md: f64, alpha: f64) -> f64 {
    (alpha * re + (1.0 - alpha) * md).clamp(0.0, 1.0)
}

/// Encodes, decodes and scores every row of `matrix`.
pub fn score_table(
    model: &AaeModel,
    matrix: &EncodedMatrix,
    alpha: f64,
    scope: NormalizationScope,
) -> Result<ScoreTable, ScoringError> {
    check_alpha(alpha)?;
    let actual = matrix.spec.digest();
    if actual != model.spec_digest {
        return Err(ScoringError::Compatibility {
            expected: model.spec_digest.clone(),
            actual,
        });
    }
    let z = encode(model, matrix.rows.view())?;
    let x_hat = decode(model, z.view())?;
    let error = reconstruction_error(matrix.rows.view(), x_hat.view())?;
    let (divergence, closest) = mode_divergence(z.view(), model.prior.centers())?;
    let (re, md) = match scope {
        NormalizationScope::PerMode => (
            normalize_per_mode(&error, &closest)?,
            normalize_per_mode(&divergence, &closest)?,
        ),
        NormalizationScope::Global => (normalize_global(&error), normalize_global(&divergence)),
    };
    let records = (0..matrix.len())
        .map(|i| ScoreRecord {
            id: matrix.ids[i],
            closest_mode: closest[i],
            divergence: divergence[i],
            md: md[i],
            error: error[i],
            re: re[i],
            score: blend(re[i], md[i], alpha),
            latent: [z[[i, 0]], z[[i, 1]]],
            label: matrix.labels.as_ref().map(|l| l[i]),
        })
        .collect();
    Ok(ScoreTable {
        alpha,
        scope,
        tau: model.prior.tau(),
        records,
    })
}
