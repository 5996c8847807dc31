use super::ScoreModel;
use crate::error::Result;
use crate::problem::TestingProblem;

/// The problem's data as seen after a permutation of global positions.
///
/// `row(k)` returns the features now sitting at position `k`, i.e. `X_{σ(k)}`.
#[derive(Debug, Clone, Copy)]
pub struct DataView<'a> {
    problem: &'a TestingProblem,
    source: Option<&'a [usize]>,
}

impl<'a> DataView<'a> {
    pub fn identity(problem: &'a TestingProblem) -> Self {
        Self { problem, source: None }
    }

    /// `source[k]` is the original global index placed at position `k`.
    pub fn permuted(problem: &'a TestingProblem, source: &'a [usize]) -> Self {
        debug_assert_eq!(source.len(), problem.total());
        Self { problem, source: Some(source) }
    }

    pub fn problem(&self) -> &'a TestingProblem {
        self.problem
    }

    pub fn source_of(&self, position: usize) -> usize {
        match self.source {
            Some(s) => s[position],
            None => position,
        }
    }

    pub fn row(&self, position: usize) -> &'a [f64] {
        self.problem.row(self.source_of(position))
    }

    pub fn rows(&self, positions: impl IntoIterator<Item = usize>) -> Vec<&'a [f64]> {
        positions.into_iter().map(|k| self.row(k)).collect()
    }
}

/// Rebuilds the score function `S^(j)` from (possibly permuted) data.
///
/// Full-permutation p-values call `build` once per arrangement of `C ∪ {j}`;
/// implementations must be deterministic functions of the view.
pub trait ScoreFactory: Sync {
    fn build(&self, data: &DataView<'_>, j: usize) -> Result<ScoreModel>;
}

impl<F> ScoreFactory for F
where
    F: Fn(&DataView<'_>, usize) -> Result<ScoreModel> + Sync,
{
    fn build(&self, data: &DataView<'_>, j: usize) -> Result<ScoreModel> {
        self(data, j)
    }
}
