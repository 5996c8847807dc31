//! Multiple-testing engines: Benjamini-Hochberg, conditional calibration with
//! randomized pruning, and null-proportion estimators.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{EcotError, Result};
use crate::problem::RejectionReport;
use crate::pvalues::{count_at_least, modified_from_sorted, rank_pvalue, sorted, ModifiedForm, ScoreProvider};
use crate::rng::{stream, Stream};

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(EcotError::Parameter(format!("alpha = {alpha} must lie in (0, 1)")))
    }
}

/// BH step-up threshold `α·k/m`.
fn threshold(alpha: f64, k: usize, m: usize) -> f64 {
    (alpha * k as f64) / m as f64
}

/// `k* = max{k : p_(k) ≤ αk/m}`, or 0.
pub fn bh_count(pvalues: &[f64], alpha: f64) -> usize {
    let m = pvalues.len();
    let p = sorted(pvalues);
    (1..=m).rev().find(|&k| p[k - 1] <= threshold(alpha, k, m)).unwrap_or(0)
}

/// Benjamini-Hochberg at level `alpha`: positions `j` with `p_j ≤ α·k*/m`, ascending.
pub fn bh(pvalues: &[f64], alpha: f64) -> Vec<usize> {
    let k = bh_count(pvalues, alpha);
    if k == 0 {
        return Vec::new();
    }
    let t = threshold(alpha, k, pvalues.len());
    (0..pvalues.len()).filter(|&j| pvalues[j] <= t).collect()
}

/// Diagnostics of the randomized pruning pass. Indices are global test indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruningTrace {
    /// `ε_j` for `j ∈ R_init`, ascending in `j`.
    pub epsilons: Vec<f64>,
    /// `|R_j| / |R_init|` for `j ∈ R_init`.
    pub threshold_ratio: Vec<f64>,
    pub final_kept: Vec<usize>,
}

/// Outcome of conditional calibration, in test positions `0..m`.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationOutcome {
    pub rejected: Vec<usize>,
    pub r_init: Vec<usize>,
    pub r_sizes: Vec<usize>,
    pub pruned: bool,
    pub epsilons: Vec<f64>,
}

impl CalibrationOutcome {
    /// Converts positions to global indices (offset `n`).
    pub fn into_report(self, n: usize, seed: u64, null_prop_estimate: Option<f64>) -> RejectionReport {
        let global = |v: &[usize]| v.iter().map(|t| t + n).collect::<Vec<_>>();
        let pruning = (!self.epsilons.is_empty()).then(|| PruningTrace {
            threshold_ratio: self.r_init.iter().map(|&t| self.r_sizes[t] as f64 / self.r_init.len() as f64).collect(),
            epsilons: self.epsilons.clone(),
            final_kept: global(&self.rejected),
        });
        RejectionReport {
            rejected: global(&self.rejected),
            r_init: global(&self.r_init),
            r_j_sizes: self.r_sizes,
            pruned: self.pruned,
            null_prop_estimate,
            seed,
            pruning,
        }
    }
}

/// The testing step given p-values `p_j` and candidate sizes `|R_j|`:
///
/// `R_init = {j : π̂_j p_j ≤ α|R_j|/m}`; if some `j ∈ R_init` has
/// `|R_j| > |R_init|`, draws `ε_j ~ U(0,1)` in ascending `j` from the pruning
/// stream of `seed` and keeps the BH(1) rejections of `ε_j|R_j|/|R_init|`.
pub fn calibrate(pvalues: &[f64], r_sizes: &[usize], alpha: f64, seed: u64, pi: Option<&[f64]>) -> CalibrationOutcome {
    let m = pvalues.len();
    let weight = |t: usize| pi.map_or(1.0, |w| w[t]);
    let r_init: Vec<usize> =
        (0..m).filter(|&t| weight(t) * pvalues[t] <= threshold(alpha, r_sizes[t], m)).collect();
    let mut out = CalibrationOutcome {
        rejected: r_init.clone(),
        r_init,
        r_sizes: r_sizes.to_vec(),
        pruned: false,
        epsilons: Vec::new(),
    };
    let size = out.r_init.len();
    if size == 0 || out.r_init.iter().all(|&t| size >= r_sizes[t]) {
        return out;
    }
    let mut rng = stream(seed, Stream::Pruning);
    out.epsilons = out.r_init.iter().map(|_| rng.random::<f64>()).collect();
    let scaled: Vec<f64> =
        out.r_init.iter().zip(&out.epsilons).map(|(&t, e)| e * r_sizes[t] as f64 / size as f64).collect();
    let keep = bh(&scaled, 1.0);
    out.rejected = keep.iter().map(|&i| out.r_init[i]).collect();
    out.pruned = true;
    out
}

/// Conditional calibration over the scores of `provider`.
///
/// For each `j`, `|R_j|` is the BH count of `{π̂_j·p̃^(j)_ℓ}` at level `α`,
/// where the modified p-values come from `S^(j)` in the reduced form.
/// Returns the outcome together with the p-values `p_j`.
pub fn conditional_calibration(
    provider: &dyn ScoreProvider,
    alpha: f64,
    seed: u64,
    form: ModifiedForm,
    pi: Option<&[f64]>,
) -> Result<(CalibrationOutcome, Vec<f64>)> {
    check_alpha(alpha)?;
    let m = provider.m();
    if let Some(w) = pi {
        if w.len() != m || w.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
            return Err(EcotError::Parameter("null-proportion weights must be m positive finite values".into()));
        }
    }
    let per_j: Vec<(f64, usize)> = (0..m)
        .into_par_iter()
        .map(|t| {
            let s = provider.scores(t)?;
            let sc = sorted(&s.calib);
            let p = rank_pvalue(&sc, s.test[t]);
            let mut modified = modified_from_sorted(&sc, &s.test, t, s.test[t], form);
            if let Some(w) = pi {
                modified.iter_mut().for_each(|x| *x *= w[t]);
            }
            Ok((p, bh_count(&modified, alpha)))
        })
        .collect::<Result<_>>()?;
    let (p, r): (Vec<f64>, Vec<usize>) = per_j.into_iter().unzip();
    Ok((calibrate(&p, &r, alpha, seed, pi), p))
}

/// BH over reduced p-values from `provider` with a shared score.
pub fn bh_report(pvalues: &[f64], alpha: f64, n: usize, seed: u64) -> Result<RejectionReport> {
    check_alpha(alpha)?;
    Ok(RejectionReport::from_bh(bh(pvalues, alpha).into_iter().map(|t| t + n).collect(), seed))
}

/// Storey-type `π̂_j = (1 + #{ℓ ≠ j : p̃^(j),join_ℓ ≥ λ}) / (m(1−λ))`, with the
/// auxiliary modified p-values from a joint-symmetric `S^join` evaluated on
/// `C` (`calib`) and `U` (`test`). Not clipped at 1.
pub fn storey_null_proportion(calib: &[f64], test: &[f64], j_position: usize, lambda: f64) -> Result<f64> {
    storey_all(calib, test, lambda).map(|v| v[j_position])
}

/// [`storey_null_proportion`] for every test position.
pub fn storey_all(calib: &[f64], test: &[f64], lambda: f64) -> Result<Vec<f64>> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(EcotError::Parameter(format!("lambda = {lambda} must lie in (0, 1)")));
    }
    let m = test.len();
    let sc = sorted(calib);
    let den = (calib.len() + 1) as f64;
    Ok((0..m)
        .map(|j| {
            let sj = test[j];
            let count = (0..m)
                .filter(|&l| l != j)
                .filter(|&l| {
                    let c = count_at_least(&sc, test[l]) + usize::from(test[l] <= sj);
                    c as f64 / den >= lambda
                })
                .count();
            (1 + count) as f64 / (m as f64 * (1.0 - lambda))
        })
        .collect())
}

/// Label-assisted `π̂ = (1 + |C0|) / (1 + |C0| + |C1|)`.
pub fn label_assisted_null_proportion(c0_size: usize, c1_size: usize) -> f64 {
    (1 + c0_size) as f64 / (1 + c0_size + c1_size) as f64
}
