//! Parameter sweeps over random instances, producing flat rows for CSV.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::canonical::{canonicalize, CanonicalBlock};
use crate::config::Config;
use crate::error::{Error, Result};
use crate::expander::injectivity_survey;
use crate::mps::random_tensor;
use crate::par::*;
use crate::truncation::{verify_truncation, TruncationReport};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TruncationCase {
    pub seed: u64,
    pub d: usize,
    pub dim: usize,
    pub d_tilde: usize,
    pub l: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct TruncationRow {
    pub seed: u64,
    #[serde(rename = "D")]
    pub dim: usize,
    #[serde(rename = "D_tilde")]
    pub d_tilde: usize,
    #[serde(rename = "L")]
    pub l: usize,
    pub d: usize,
    pub delta: f64,
    pub bound1: f64,
    pub actual1: f64,
    pub bound2: f64,
    pub actual2: f64,
    pub lemma9_lhs: f64,
    pub lemma9_rhs: f64,
}

impl TruncationRow {
    pub fn from_report(case: &TruncationCase, r: &TruncationReport) -> Self {
        TruncationRow {
            seed: case.seed,
            dim: case.dim,
            d_tilde: case.d_tilde,
            l: case.l,
            d: case.d,
            delta: r.delta,
            bound1: r.bound_1,
            actual1: r.actual_1,
            bound2: r.bound_2,
            actual2: r.actual_2,
            lemma9_lhs: r.intermediate.lemma9_lhs,
            lemma9_rhs: r.intermediate.lemma9_rhs,
        }
    }
}

/// Every `(d, D, D̃ < D, L)` combination with `per_cell` seeds each, in
/// lexicographic order; seeds count up from `seed`.
pub fn truncation_grid(ds: &[usize], dims: &[usize], ls: &[usize], per_cell: usize, seed: u64) -> Vec<TruncationCase> {
    let mut out = Vec::new();
    let mut s = seed;
    for &d in ds {
        for &dim in dims {
            for d_tilde in 1..dim {
                for &l in ls {
                    for _ in 0..per_cell {
                        out.push(TruncationCase { seed: s, d, dim, d_tilde, l });
                        s = s.wrapping_add(1);
                    }
                }
            }
        }
    }
    out
}

/// `count` cases with `2 ≤ D ≤ max_dim`, `1 ≤ D̃ < D`, `1 ≤ L ≤ max_l` and
/// `d` drawn from `ds`.
pub fn random_truncation_cases(count: usize, max_dim: usize, max_l: usize, ds: &[usize], seed: u64) -> Vec<TruncationCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|k| {
            let dim = rng.random_range(2..=max_dim.max(2));
            TruncationCase {
                seed: seed.wrapping_add(k as u64),
                d: ds[rng.random_range(0..ds.len())],
                dim,
                d_tilde: rng.random_range(1..dim),
                l: rng.random_range(1..=max_l.max(1)),
            }
        })
        .collect()
}

/// Canonical block of the Gaussian random tensor drawn from `seed`.
pub fn random_injective_block(d: usize, dim: usize, seed: u64, cfg: &Config) -> Result<CanonicalBlock> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cf = canonicalize(&random_tensor(d, dim, &mut rng), cfg)?;
    if !cf.is_injective() {
        return Err(Error::Precondition(format!("random tensor from seed {seed} is not injective")));
    }
    Ok(cf.blocks.into_iter().next().expect("one block"))
}

pub fn run_truncation_cases(cases: &[TruncationCase], cfg: &Config) -> Result<Vec<(TruncationRow, TruncationReport)>> {
    cases
        .par_iter()
        .map(|case| {
            let block = random_injective_block(case.d, case.dim, case.seed, cfg)?;
            let report = verify_truncation(&block, case.d_tilde, case.l, cfg)?;
            Ok((TruncationRow::from_report(case, &report), report))
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct InjectivityRow {
    #[serde(rename = "D")]
    pub dim: usize,
    pub d: usize,
    pub trials: usize,
    pub seed: u64,
    #[serde(rename = "L_min")]
    pub l_min: usize,
    #[serde(rename = "L_log_ratio")]
    pub l_log_ratio: f64,
    /// Empty for trials that never became injective within the cap.
    pub length: Option<usize>,
    pub count: usize,
}

/// One row per observed injectivity length for each `(D, d)` pair.
pub fn injectivity_rows(dims: &[usize], ds: &[usize], trials: usize, seed: u64, cfg: &Config) -> Result<Vec<InjectivityRow>> {
    let mut rows = Vec::new();
    for &d in ds {
        for &dim in dims {
            let r = injectivity_survey(dim, d, trials, seed, cfg)?;
            let base = |length, count| InjectivityRow {
                dim,
                d,
                trials,
                seed,
                l_min: r.l_min,
                l_log_ratio: r.l_log_ratio,
                length,
                count,
            };
            rows.extend(r.histogram.iter().map(|(&l, &n)| base(Some(l), n)));
            if r.not_injective > 0 {
                rows.push(base(None, r.not_injective));
            }
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_order_and_size() {
        let g = truncation_grid(&[2], &[3, 4], &[3, 4], 1, 10);
        assert_eq!(g.len(), (2 + 3) * 2);
        assert_eq!(g[0], TruncationCase { seed: 10, d: 2, dim: 3, d_tilde: 1, l: 3 });
        assert!(truncation_grid(&[2], &[], &[3], 1, 0).is_empty());
    }

    #[test]
    fn random_cases_respect_ranges() {
        for c in random_truncation_cases(100, 6, 6, &[2, 3], 1) {
            assert!((2..=6).contains(&c.dim) && c.d_tilde < c.dim && (1..=6).contains(&c.l));
        }
        assert_eq!(random_truncation_cases(5, 6, 6, &[2], 1), random_truncation_cases(5, 6, 6, &[2], 1));
    }

    #[test]
    fn small_sweep_has_no_violations() {
        let cfg = Config::default();
        let rows = run_truncation_cases(&truncation_grid(&[2], &[3], &[2, 3], 2, 0), &cfg).unwrap();
        assert!(rows.iter().all(|(_, r)| r.pass()));
    }

    #[test]
    fn injectivity_rows_cover_trials() {
        let rows = injectivity_rows(&[2, 3], &[2], 10, 0, &Config::default()).unwrap();
        for dim in [2, 3] {
            assert_eq!(rows.iter().filter(|r| r.dim == dim).map(|r| r.count).sum::<usize>(), 10);
        }
    }
}
