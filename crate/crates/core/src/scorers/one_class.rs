use super::{sq_dist, ScoreFn};

/// Mean Euclidean distance to the `k` nearest pool rows.
#[derive(Debug, Clone)]
pub struct KnnScorer {
    pool: Vec<f64>,
    d: usize,
    k: usize,
}

impl KnnScorer {
    pub fn new(rows: &[&[f64]], k: usize) -> Self {
        let d = rows[0].len();
        let pool = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Self { pool, d, k }
    }

    pub fn k(&self) -> usize {
        self.k
    }
}

impl ScoreFn for KnnScorer {
    fn score(&self, x: &[f64]) -> f64 {
        let mut dist: Vec<f64> = self.pool.chunks_exact(self.d).map(|r| sq_dist(r, x).sqrt()).collect();
        let k = self.k.min(dist.len());
        dist.select_nth_unstable_by(k - 1, |a, b| a.total_cmp(b));
        let nearest = &mut dist[..k];
        nearest.sort_unstable_by(|a, b| a.total_cmp(b));
        nearest.iter().sum::<f64>() / k as f64
    }
}

/// Negative Gaussian kernel density estimate.
#[derive(Debug, Clone)]
pub struct KdeScorer {
    pool: Vec<f64>,
    d: usize,
    bandwidth: f64,
}

impl KdeScorer {
    pub fn new(rows: &[&[f64]], bandwidth: f64) -> Self {
        let d = rows[0].len();
        let pool = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Self { pool, d, bandwidth }
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }
}

impl ScoreFn for KdeScorer {
    fn score(&self, x: &[f64]) -> f64 {
        let two_h2 = 2.0 * self.bandwidth * self.bandwidth;
        let rows = self.pool.chunks_exact(self.d);
        let n = rows.len() as f64;
        -rows.map(|r| (-sq_dist(r, x) / two_h2).exp()).sum::<f64>() / n
    }
}
