use crate::error::{EcotError, Result};
use crate::problem::{CalibrationSet, TestingProblem};
use crate::scorers::{DataView, ScoreFactory};

/// Hard cap on the number of free indices `|C ∪ {j}|` for full enumeration.
pub const ENUMERATION_CAP: usize = 8;

/// `Ω_j`: all arrangements of the free indices `C ∪ {j}` with every other
/// global index fixed.
#[derive(Debug, Clone)]
pub struct PermutationFamily {
    total: usize,
    free: Vec<usize>,
}

impl PermutationFamily {
    pub fn new(total: usize, free: Vec<usize>) -> Result<Self> {
        Self::with_cap(total, free, ENUMERATION_CAP)
    }

    pub fn with_cap(total: usize, mut free: Vec<usize>, cap: usize) -> Result<Self> {
        if free.len() > cap {
            return Err(EcotError::BudgetExceeded { free: free.len(), cap });
        }
        free.sort_unstable();
        if free.windows(2).any(|w| w[0] == w[1]) || free.last().is_some_and(|&i| i >= total) {
            return Err(EcotError::Domain("free indices must be distinct and in range".into()));
        }
        Ok(Self { total, free })
    }

    /// `Ω_j` for the calibration set `C` and test index `j`.
    pub fn for_test(problem: &TestingProblem, calibration: &CalibrationSet, j: usize) -> Result<Self> {
        problem.test_position(j)?;
        let mut free = calibration.indices().to_vec();
        free.push(j);
        Self::new(problem.total(), free)
    }

    pub fn free(&self) -> &[usize] {
        &self.free
    }

    /// `|Ω_j| = |free|!`.
    pub fn len(&self) -> usize {
        (1..=self.free.len()).product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Calls `f` once per arrangement with the source map `source[k] = σ(k)`,
    /// i.e. the original index whose features sit at position `k`.
    ///
    /// Arrangements are visited in lexicographic order of the free images, or
    /// in reverse lexicographic order when `reverse` is set.
    pub fn for_each(&self, reverse: bool, mut f: impl FnMut(&[usize])) {
        let k = self.free.len();
        let mut perm: Vec<usize> = (0..k).collect();
        if reverse {
            perm.reverse();
        }
        let mut source: Vec<usize> = (0..self.total).collect();
        loop {
            for (a, &b) in perm.iter().enumerate() {
                source[self.free[a]] = self.free[b];
            }
            f(&source);
            let more = if reverse { prev_permutation(&mut perm) } else { next_permutation(&mut perm) };
            if !more {
                break;
            }
        }
    }
}

fn next_permutation(p: &mut [usize]) -> bool {
    let n = p.len();
    if n < 2 {
        return false;
    }
    let Some(i) = (0..n - 1).rev().find(|&i| p[i] < p[i + 1]) else {
        return false;
    };
    let k = (i + 1..n).rev().find(|&k| p[k] > p[i]).unwrap();
    p.swap(i, k);
    p[i + 1..].reverse();
    true
}

fn prev_permutation(p: &mut [usize]) -> bool {
    let n = p.len();
    if n < 2 {
        return false;
    }
    let Some(i) = (0..n - 1).rev().find(|&i| p[i] > p[i + 1]) else {
        return false;
    };
    let k = (i + 1..n).rev().find(|&k| p[k] < p[i]).unwrap();
    p.swap(i, k);
    p[i + 1..].reverse();
    true
}

/// Everything the full-permutation p-value and its modified p-values need
/// from one enumeration of `Ω_j`.
#[derive(Debug, Clone)]
pub struct FullPermutationScores {
    /// `S^(j)(X_j)` under the identity arrangement.
    pub observed: f64,
    /// `S^(j)_σ(X_σ(j))` per arrangement.
    pub at_j: Vec<f64>,
    /// `S^(j)_σ(X_ℓ)` per test position `ℓ`, per arrangement.
    pub at_test: Vec<Vec<f64>>,
}

impl FullPermutationScores {
    /// Enumerates `Ω_j`, rebuilding `S^(j)_σ` for every arrangement.
    pub fn enumerate(
        problem: &TestingProblem,
        calibration: &CalibrationSet,
        j: usize,
        factory: &dyn ScoreFactory,
        reverse: bool,
    ) -> Result<Self> {
        let family = PermutationFamily::for_test(problem, calibration, j)?;
        let observed = factory.build(&DataView::identity(problem), j)?.evaluate(problem.row(j));
        let mut at_j = Vec::with_capacity(family.len());
        let mut at_test = vec![Vec::with_capacity(family.len()); problem.m()];
        let mut err = None;
        family.for_each(reverse, |source| {
            if err.is_some() {
                return;
            }
            let view = DataView::permuted(problem, source);
            match factory.build(&view, j) {
                Ok(model) => {
                    at_j.push(model.evaluate(view.row(j)));
                    for (t, l) in problem.test_indices().enumerate() {
                        at_test[t].push(model.evaluate(problem.row(l)));
                    }
                }
                Err(e) => err = Some(e),
            }
        });
        match err {
            Some(e) => Err(e),
            None => Ok(Self { observed, at_j, at_test }),
        }
    }

    pub fn pvalue(&self) -> f64 {
        let count = self.at_j.iter().filter(|&&s| self.observed <= s).count();
        count as f64 / self.at_j.len() as f64
    }

    /// Modified p-values over `U` for the test at position `j_position`, with
    /// `S̃^(j)(X_ℓ)` the lower median of `S^(j)_σ(X_ℓ)` over `Ω_j`.
    pub fn modified(&self, j_position: usize) -> Vec<f64> {
        self.at_test
            .iter()
            .enumerate()
            .map(|(t, values)| {
                if t == j_position {
                    return 0.0;
                }
                let tilde = lower_median(values);
                let count = self.at_j.iter().filter(|&&s| tilde <= s).count();
                count as f64 / self.at_j.len() as f64
            })
            .collect()
    }
}

/// Lower of the two central order statistics (the median for odd sizes).
pub fn lower_median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    let mid = (v.len() - 1) / 2;
    let (_, m, _) = v.select_nth_unstable_by(mid, |a, b| a.total_cmp(b));
    *m
}

/// `p_j = (1/|Ω_j|) Σ_σ 1{S^(j)(X_j) ≤ S^(j)_σ(X_σ(j))}`.
pub fn pvalue_full_permutation(
    problem: &TestingProblem,
    calibration: &CalibrationSet,
    j: usize,
    factory: &dyn ScoreFactory,
) -> Result<f64> {
    Ok(FullPermutationScores::enumerate(problem, calibration, j, factory, false)?.pvalue())
}

/// Modified p-values `p̃^(j)_ℓ` over `U` in the full-permutation form.
pub fn modified_pvalues_full(
    problem: &TestingProblem,
    calibration: &CalibrationSet,
    j: usize,
    factory: &dyn ScoreFactory,
) -> Result<Vec<f64>> {
    let t = problem.test_position(j)?;
    Ok(FullPermutationScores::enumerate(problem, calibration, j, factory, false)?.modified(t))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enumerates_every_arrangement_once() {
        let fam = PermutationFamily::new(6, vec![4, 1, 2]).unwrap();
        assert_eq!(fam.len(), 6);
        for reverse in [false, true] {
            let mut seen = Vec::new();
            fam.for_each(reverse, |s| {
                assert_eq!((s[0], s[3], s[5]), (0, 3, 5));
                seen.push(vec![s[1], s[2], s[4]]);
            });
            let mut sorted = seen.clone();
            sorted.sort();
            sorted.dedup();
            assert_eq!(sorted.len(), 6);
            assert_eq!(seen[0], if reverse { vec![4, 2, 1] } else { vec![1, 2, 4] });
        }
    }

    #[test]
    fn cap_is_enforced() {
        assert_eq!(
            PermutationFamily::new(20, (0..9).collect()).unwrap_err(),
            EcotError::BudgetExceeded { free: 9, cap: 8 }
        );
        assert_eq!(PermutationFamily::new(20, (0..8).collect()).unwrap().len(), 40_320);
    }

    #[test]
    fn lower_median_picks_attained_value() {
        assert_eq!(lower_median(&[3.0, 1.0, 2.0, 4.0]), 2.0);
        assert_eq!(lower_median(&[5.0]), 5.0);
    }
}
