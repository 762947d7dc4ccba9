//! Hard rank statistics, their histogram, the divergence `d_K` and the Pearson
//! chi-squared uniformity test.

use serde::{Deserialize, Serialize};

use crate::error::{IslError, Result};
use crate::rng::RandomSource;
use crate::special::chi2_sf;

/// Number of `fake` values at or below `y`. Ties count as "at or below".
pub fn hard_rank(y: f64, fake: &[f64]) -> Result<usize> {
    if y.is_nan() || fake.iter().any(|f| f.is_nan()) {
        return Err(IslError::NonFinite("NaN in hard_rank input".into()));
    }
    Ok(fake.iter().filter(|&&f| f <= y).count())
}

/// Counts of the rank statistic over `{0, ..., K}`.
///
/// Histograms over the same `K` merge by adding counts, so shards can be
/// accumulated independently and combined with [`RankHistogram::merge`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankHistogram {
    k: usize,
    counts: Vec<u64>,
}

impl RankHistogram {
    pub fn new(k: usize) -> Self {
        RankHistogram {
            k,
            counts: vec![0; k + 1],
        }
    }

    pub fn from_counts(counts: Vec<u64>) -> Result<Self> {
        if counts.is_empty() {
            return Err(IslError::Empty("rank histogram needs K + 1 >= 1 bins".into()));
        }
        Ok(RankHistogram {
            k: counts.len() - 1,
            counts,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn n_total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn record(&mut self, rank: usize) {
        self.counts[rank] += 1;
    }

    /// Empirical pmf `counts[n] / n_total`.
    pub fn pmf(&self) -> Vec<f64> {
        let n = self.n_total() as f64;
        self.counts.iter().map(|&c| c as f64 / n).collect()
    }

    /// True when every bin holds exactly `n_total / (K + 1)` (exact integer check).
    pub fn is_exactly_uniform(&self) -> bool {
        let n = self.n_total();
        let bins = self.k as u64 + 1;
        self.counts.iter().all(|&c| c * bins == n)
    }

    pub fn merge(&mut self, other: &RankHistogram) -> Result<()> {
        if other.k != self.k {
            return Err(IslError::shape(format!("K = {}", self.k), format!("K = {}", other.k)));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        Ok(())
    }
}

/// Build a rank histogram: for every real datum draw `k` fresh fakes from
/// `fake_sampler` and record the datum's hard rank among them.
pub fn rank_histogram<F>(
    real_data: &[f64],
    mut fake_sampler: F,
    k: usize,
    rng: &mut RandomSource,
) -> Result<RankHistogram>
where
    F: FnMut(usize, &mut RandomSource) -> Result<Vec<f64>>,
{
    if real_data.is_empty() {
        return Err(IslError::Empty("rank_histogram needs at least one datum".into()));
    }
    if k == 0 {
        return Err(IslError::Domain("rank_histogram needs K >= 1".into()));
    }
    let mut hist = RankHistogram::new(k);
    for &y in real_data {
        let fakes = fake_sampler(k, rng)?;
        if fakes.len() != k {
            return Err(IslError::shape(format!("{k} fakes"), fakes.len()));
        }
        hist.record(hard_rank(y, &fakes)?);
    }
    Ok(hist)
}

/// Empirical `d_K = 1/(K+1) * sum_n |1/(K+1) - Q(n)|`.
pub fn empirical_dk(hist: &RankHistogram) -> Result<f64> {
    let n = hist.n_total();
    if n == 0 {
        return Err(IslError::Empty("empirical_dk on an empty histogram".into()));
    }
    let bins = hist.k as f64 + 1.0;
    let u = 1.0 / bins;
    let l1: f64 = hist.pmf().iter().map(|q| (u - q).abs()).sum();
    Ok(l1 / bins)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Chi2Outcome {
    pub statistic: f64,
    pub p_value: f64,
    pub accept: bool,
}

/// Pearson chi-squared test of the rank histogram against the discrete uniform
/// law on `{0, ..., K}` with `K` degrees of freedom.
pub fn chi2_uniformity(hist: &RankHistogram, alpha: f64) -> Result<Chi2Outcome> {
    let n = hist.n_total();
    if n == 0 {
        return Err(IslError::Empty("chi2_uniformity on an empty histogram".into()));
    }
    let bins = hist.k as u64 + 1;
    if n < 5 * bins {
        log::warn!(
            "chi-squared test with {n} observations over {bins} bins; expected counts are below 5"
        );
    }
    let expected = n as f64 / bins as f64;
    let statistic: f64 = hist
        .counts
        .iter()
        .map(|&c| {
            let d = c as f64 - expected;
            d * d / expected
        })
        .sum();
    let p_value = if hist.k == 0 { 1.0 } else { chi2_sf(statistic, hist.k as f64) };
    Ok(Chi2Outcome {
        statistic,
        p_value,
        accept: p_value > alpha,
    })
}
