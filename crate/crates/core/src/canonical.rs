//! Canonical form of a translation-invariant tensor.
//!
//! The bond space is split recursively along invariant subspaces found from
//! positive fixed points of the transfer map and its dual. Each irreducible
//! piece is then brought to `Σ A_i A_i† = 1`, `Σ A_i† Λ A_i = Λ` with `Λ`
//! diagonal, positive, sorted and of unit trace.

use serde::Serialize;

use crate::config::Config;
use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, CVec};
use crate::mps::SiteTensor;
use crate::transfer::{self, transfer_operator};

/// Relative threshold below which a piece's spectral radius counts as zero.
const NEGLIGIBLE_RADIUS: f64 = 1e-10;
/// Relative threshold for the kernel of `𝔼 - r`.
const FIXED_SPACE_TOL: f64 = 1e-9;
/// Squarings used to project onto the dominant eigenspace.
pub(crate) const POWER_SQUARINGS: usize = 60;

#[derive(Clone, Debug, PartialEq)]
pub struct CanonicalBlock {
    pub tensor: SiteTensor,
    /// Diagonal of `Λ`, descending, trace one.
    pub lambda: Vec<f64>,
    pub period: usize,
    pub weight: f64,
    /// Spectral radius of the original transfer map on this block.
    pub radius: f64,
    /// How many equivalent copies of the block were merged into this one.
    pub multiplicity: usize,
}

impl CanonicalBlock {
    pub fn dim(&self) -> usize {
        self.tensor.bond_dim()
    }

    pub fn lambda_matrix(&self) -> CMat {
        CMat::from_diagonal(&CVec::from_iterator(self.lambda.len(), self.lambda.iter().map(|&v| c(v, 0.0))))
    }

    /// `max(‖Σ A A† - 1‖, ‖Σ A† Λ A - Λ‖)` entrywise.
    pub fn residual(&self) -> f64 {
        canonical_residual(self.tensor.kraus(), &self.lambda_matrix())
    }

    pub fn is_injective(&self) -> bool {
        self.period == 1
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CanonicalForm {
    pub blocks: Vec<CanonicalBlock>,
    /// `G` such that `G A_i G⁻¹` is block upper triangular with diagonal
    /// blocks `√r_k C_k`.
    pub gauge: CMat,
    pub residual: f64,
}

impl CanonicalForm {
    pub fn periods(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.period).collect()
    }

    /// A single block of period one.
    pub fn is_injective(&self) -> bool {
        self.blocks.len() == 1 && self.blocks[0].period == 1 && self.blocks[0].multiplicity == 1
    }

    pub fn summary(&self) -> CanonicalSummary {
        CanonicalSummary {
            blocks: self
                .blocks
                .iter()
                .map(|b| BlockSummary {
                    dim: b.dim(),
                    period: b.period,
                    weight: b.weight,
                    multiplicity: b.multiplicity,
                    lambda: b.lambda.clone(),
                })
                .collect(),
            residual: self.residual,
            injective: self.is_injective(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BlockSummary {
    #[serde(rename = "D")]
    pub dim: usize,
    pub period: usize,
    pub weight: f64,
    pub multiplicity: usize,
    pub lambda: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CanonicalSummary {
    pub blocks: Vec<BlockSummary>,
    pub residual: f64,
    pub injective: bool,
}

pub fn canonical_residual(kraus: &[CMat], lambda: &CMat) -> f64 {
    let dim = lambda.nrows();
    let mut right = -linalg::identity(dim);
    let mut left = -lambda.clone();
    for k in kraus {
        right += k * k.adjoint();
        left += k.adjoint() * lambda * k;
    }
    let r = right.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let l = left.iter().map(|z| z.norm()).fold(0.0, f64::max);
    r.max(l)
}

/// An irreducible piece before normalization: its Kraus restriction and the
/// isometry embedding it into the full bond space.
struct Piece {
    kraus: Vec<CMat>,
    embed: CMat,
    radius: f64,
    /// Dropped pieces have negligible radius and keep an identity gauge.
    negligible: bool,
}

fn spectral_radius(kraus: &[CMat]) -> Result<f64> {
    let t = SiteTensor::new(kraus.to_vec())?;
    let e = transfer_operator(&t, None)?;
    Ok(linalg::eigenvalues(&e.matrix)?.iter().map(|z| z.norm()).fold(0.0, f64::max))
}

fn transfer_matrix(kraus: &[CMat]) -> CMat {
    let dim = kraus[0].nrows();
    let mut m = CMat::zeros(dim * dim, dim * dim);
    for k in kraus {
        m += linalg::kron(k, &k.map(|z| z.conj()));
    }
    m
}

/// PSD eigenvector of a positive map for its spectral radius `r`, obtained
/// by projecting `vec(1)` onto the dominant eigenspace of `(𝔼 + r)/2r` and
/// then onto the kernel of `𝔼 - r`.
fn positive_fixed_point(e: &CMat, r: f64, kernel: &CMat) -> CMat {
    let dim = (e.nrows() as f64).sqrt().round() as usize;
    let m = linalg::dominant_projector(e, r, POWER_SQUARINGS);
    let mut v = m * linalg::vec_row(&linalg::identity(dim));
    if kernel.ncols() > 0 {
        v = kernel * (kernel.adjoint() * v);
    }
    let x = linalg::hermitian_part(&linalg::unvec_row(&v, dim, dim));
    let tr = linalg::trace(&x).re;
    if tr != 0.0 {
        x / c(tr, 0.0)
    } else {
        x
    }
}

/// Orthonormal basis of eigenvectors of a PSD matrix with eigenvalue above
/// `rel_tol` times the largest.
fn support(x: &CMat, rel_tol: f64) -> CMat {
    let (vals, vecs) = linalg::hermitian_eigh(x);
    let top = vals.first().copied().unwrap_or(0.0).max(0.0);
    let keep: Vec<usize> = (0..vals.len()).filter(|&k| top > 0.0 && vals[k] > rel_tol * top).collect();
    CMat::from_fn(x.nrows(), keep.len(), |r, j| vecs[(r, keep[j])])
}

/// A rank-deficient positive fixed point built from a degenerate fixed
/// space and a full-rank fixed point `x`.
fn degenerate_fixed_point(x: &CMat, kernel: &CMat, dim: usize, rank_tol: f64) -> Option<CMat> {
    let xn = x.norm();
    let mut best: Option<(f64, CMat)> = None;
    for j in 0..kernel.ncols() {
        let k = linalg::unvec_row(&kernel.column(j).into_owned(), dim, dim);
        for h in [linalg::hermitian_part(&k), linalg::hermitian_part(&(k * c(0.0, 1.0)))] {
            let proj = linalg::trace(&(x.adjoint() * &h)).re / (xn * xn);
            let h = h - x * c(proj, 0.0);
            let n = h.norm();
            if best.as_ref().is_none_or(|(bn, _)| n > *bn) {
                best = Some((n, h));
            }
        }
    }
    let (n, h) = best?;
    if n < 1e-8 * xn {
        return None;
    }
    let inv_sqrt = linalg::hermitian_fn(x, |v| if v > 0.0 { 1.0 / v.sqrt() } else { 0.0 });
    let z = &inv_sqrt * &h * &inv_sqrt;
    let vals = linalg::hermitian_eigenvalues(&z);
    let (hi, lo) = (vals[0], vals[vals.len() - 1]);
    let (h, mu) = if hi >= -lo { (h, hi) } else { (-h, -lo) };
    if mu <= rank_tol {
        return None;
    }
    let candidate = x - h / c(mu, 0.0);
    Some(linalg::hermitian_part(&candidate))
}

fn restrict(kraus: &[CMat], q: &CMat) -> Vec<CMat> {
    kraus.iter().map(|k| q.adjoint() * k * q).collect()
}

/// Split `kraus` (already expressed in the coordinates of `embed`) into
/// irreducible pieces.
fn split(kraus: Vec<CMat>, embed: CMat, scale: f64, cfg: &Config, out: &mut Vec<Piece>) -> Result<()> {
    let dim = kraus[0].nrows();
    let r = spectral_radius(&kraus)?;
    if r <= NEGLIGIBLE_RADIUS * scale {
        out.push(Piece { kraus, embed, radius: r, negligible: true });
        return Ok(());
    }
    if dim == 1 {
        out.push(Piece { kraus, embed, radius: r, negligible: false });
        return Ok(());
    }
    let e = transfer_matrix(&kraus);
    let shifted = &e - CMat::identity(dim * dim, dim * dim) * c(r, 0.0);
    let kernel = linalg::null_space(&shifted, FIXED_SPACE_TOL);
    let kernel_dual = linalg::null_space(&shifted.adjoint(), FIXED_SPACE_TOL);

    let rank_tol = cfg.tol.rank;
    let x = positive_fixed_point(&e, r, &kernel);
    let supp = support(&x, rank_tol);
    let invariant = if supp.ncols() < dim {
        Some(supp)
    } else {
        let y = positive_fixed_point(&e.adjoint(), r, &kernel_dual);
        let supp_y = support(&y, rank_tol);
        if supp_y.ncols() < dim {
            Some(linalg::orthogonal_complement(&supp_y))
        } else if kernel.ncols() >= 2 {
            degenerate_fixed_point(&x, &kernel, dim, rank_tol).map(|xp| support(&xp, rank_tol))
        } else {
            None
        }
    };

    match invariant {
        Some(v) if v.ncols() > 0 && v.ncols() < dim => {
            let w = linalg::orthogonal_complement(&v);
            if v.ncols() + w.ncols() != dim {
                return Err(Error::Convergence("invariant subspace split lost dimensions".into()));
            }
            let (kv, kw) = (restrict(&kraus, &v), restrict(&kraus, &w));
            split(kv, &embed * &v, scale, cfg, out)?;
            split(kw, &embed * &w, scale, cfg, out)
        }
        _ => {
            out.push(Piece { kraus, embed, radius: r, negligible: false });
            Ok(())
        }
    }
}

/// Canonical tensor `C` and gauge `G` (with `C_i = G a_i G⁻¹ / √r`) for an
/// irreducible piece.
fn normalize_piece(kraus: &[CMat], r: f64, cfg: &Config) -> Result<(Vec<CMat>, Vec<f64>, CMat)> {
    let dim = kraus[0].nrows();
    let scaled: Vec<CMat> = kraus.iter().map(|k| k / c(r.sqrt(), 0.0)).collect();
    let mut current = scaled;
    let mut gauge = linalg::identity(dim);
    let mut lambda = vec![1.0 / dim as f64; dim];
    for _pass in 0..cfg.caps.canonical_iterations.max(1) {
        let (next, lam, g) = normalize_once(&current)?;
        gauge = &g * &gauge;
        current = next;
        lambda = lam;
        let lam_mat = CMat::from_diagonal(&CVec::from_iterator(dim, lambda.iter().map(|&v| c(v, 0.0))));
        if canonical_residual(&current, &lam_mat) <= cfg.tol.canonical * 1e-3 {
            break;
        }
    }
    let lam_mat = CMat::from_diagonal(&CVec::from_iterator(dim, lambda.iter().map(|&v| c(v, 0.0))));
    let res = canonical_residual(&current, &lam_mat);
    if !(res <= cfg.tol.canonical) {
        return Err(Error::Convergence(format!("canonical residual {res:e} above {:e}", cfg.tol.canonical)));
    }
    Ok((current, lambda, gauge))
}

fn normalize_once(kraus: &[CMat]) -> Result<(Vec<CMat>, Vec<f64>, CMat)> {
    let dim = kraus[0].nrows();
    let e = transfer_matrix(kraus);
    let r = linalg::eigenvalues(&e)?.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if r <= 0.0 {
        return Err(Error::Precondition("block transfer map is nilpotent".into()));
    }
    let shifted = &e - CMat::identity(dim * dim, dim * dim) * c(r, 0.0);
    let x = positive_fixed_point(&e, r, &linalg::null_space(&shifted, FIXED_SPACE_TOL));
    let y = positive_fixed_point(&e.adjoint(), r, &linalg::null_space(&shifted.adjoint(), FIXED_SPACE_TOL));
    let xs = linalg::psd_sqrt(&x);
    let xis = linalg::hermitian_fn(&x, |v| if v > 0.0 { 1.0 / v.sqrt() } else { 0.0 });
    let lam0 = &xs * &y * &xs;
    let (vals, w) = linalg::hermitian_eigh(&lam0);
    let total: f64 = vals.iter().sum();
    if !(total > 0.0) || vals.last().is_some_and(|&v| v <= 0.0) {
        return Err(Error::Singular("left fixed point is not positive definite".into()));
    }
    let lambda: Vec<f64> = vals.iter().map(|v| v / total).collect();
    let g = w.adjoint() * &xis;
    let g_inv = &xs * &w;
    let scale = c(1.0 / r.sqrt(), 0.0);
    let next = kraus.iter().map(|k| &g * k * &g_inv * scale).collect();
    Ok((next, lambda, g))
}

pub fn canonicalize(tensor: &SiteTensor, cfg: &Config) -> Result<CanonicalForm> {
    if tensor.is_zero() {
        return Err(Error::InvalidArgument("tensor is identically zero".into()));
    }
    let dim = tensor.bond_dim();
    let scale = spectral_radius(tensor.kraus())?;
    if scale == 0.0 {
        return Err(Error::Precondition("transfer map is nilpotent; the state vanishes for large N".into()));
    }
    let mut pieces = Vec::new();
    split(tensor.kraus().to_vec(), linalg::identity(dim), scale, cfg, &mut pieces)?;

    let mut u_total = CMat::zeros(dim, dim);
    let mut g_blocks = CMat::zeros(dim, dim);
    let mut raw_blocks = Vec::new();
    let mut offsets = Vec::new();
    let mut at = 0;
    for piece in &pieces {
        let k = piece.embed.ncols();
        u_total.view_mut((0, at), (dim, k)).copy_from(&piece.embed);
        offsets.push((at, k));
        if piece.negligible {
            g_blocks.view_mut((at, at), (k, k)).copy_from(&linalg::identity(k));
        } else {
            let (ck, lambda, gk) = normalize_piece(&piece.kraus, piece.radius, cfg)?;
            g_blocks.view_mut((at, at), (k, k)).copy_from(&gk);
            raw_blocks.push((SiteTensor::new(ck)?, lambda, piece.radius));
        }
        at += k;
    }
    let gauge = g_blocks * u_total.adjoint();
    let leakage = lower_block_leakage(tensor, &gauge, &offsets, scale, cfg)?;

    let mut blocks = Vec::with_capacity(raw_blocks.len());
    for (t, lambda, radius) in raw_blocks {
        let period = transfer::tensor_spectrum(&t, cfg.tol.peripheral)?.period;
        blocks.push(CanonicalBlock { tensor: t, lambda, period, weight: 0.0, radius, multiplicity: 1 });
    }
    let blocks = merge_equivalent(blocks, cfg)?;
    let blocks = assign_weights(blocks, cfg.tol.peripheral);
    let residual = blocks.iter().map(|b| b.residual()).fold(leakage, f64::max);
    Ok(CanonicalForm { blocks, gauge, residual })
}

/// Largest entry below the block diagonal of `G A_i G⁻¹`, relative to `√r`.
fn lower_block_leakage(tensor: &SiteTensor, gauge: &CMat, offsets: &[(usize, usize)], scale: f64, cfg: &Config) -> Result<f64> {
    let cond = linalg::condition_number(gauge);
    if !(cond <= cfg.tol.gauge_condition) {
        return Err(Error::Singular(format!("canonical gauge condition number {cond:e}")));
    }
    let inv = gauge.clone().try_inverse().ok_or_else(|| Error::Singular("canonical gauge is singular".into()))?;
    let mut worst: f64 = 0.0;
    for k in tensor.kraus() {
        let m = gauge * k * &inv;
        for (bi, &(ri, ni)) in offsets.iter().enumerate() {
            for &(cj, nj) in &offsets[..bi] {
                for r in ri..ri + ni {
                    for cc in cj..cj + nj {
                        worst = worst.max(m[(r, cc)].norm());
                    }
                }
            }
        }
    }
    Ok(worst / scale.sqrt())
}

/// Merge blocks that describe the same state up to gauge and phase.
fn merge_equivalent(blocks: Vec<CanonicalBlock>, cfg: &Config) -> Result<Vec<CanonicalBlock>> {
    let mut out: Vec<CanonicalBlock> = Vec::new();
    for b in blocks {
        let mut merged = false;
        for existing in out.iter_mut() {
            if existing.dim() != b.dim() || existing.period != b.period {
                continue;
            }
            if blocks_equivalent(&existing.tensor, &b.tensor, b.period, cfg)? {
                existing.multiplicity += b.multiplicity;
                merged = true;
                break;
            }
        }
        if !merged {
            out.push(b);
        }
    }
    Ok(out)
}

/// Normalized overlap at `N ≥ distinct_length` (a multiple of the period)
/// above the distinctness threshold.
pub fn blocks_equivalent(a: &SiteTensor, b: &SiteTensor, period: usize, cfg: &Config) -> Result<bool> {
    let n = cfg.caps.distinct_length.max(1).div_ceil(period) * period;
    Ok(transfer::tensor_fidelity(a, b, n)? >= cfg.tol.distinct_overlap)
}

/// `μ_k ∝ m_k² β_k` over blocks at the maximal radius, zero elsewhere.
fn assign_weights(mut blocks: Vec<CanonicalBlock>, tol: f64) -> Vec<CanonicalBlock> {
    let rmax = blocks.iter().map(|b| b.radius).fold(0.0, f64::max);
    let raw: Vec<f64> = blocks
        .iter()
        .map(|b| {
            if b.radius >= (1.0 - tol) * rmax {
                (b.multiplicity * b.multiplicity * b.period) as f64
            } else {
                0.0
            }
        })
        .collect();
    let total: f64 = raw.iter().sum();
    for (b, w) in blocks.iter_mut().zip(raw) {
        b.weight = w / total;
    }
    blocks
}

/// Eigenvalues of `Λ ⊗ Λ`, descending.
pub fn asymptotic_spectrum(block: &CanonicalBlock) -> Vec<f64> {
    let mut out: Vec<f64> = block.lambda.iter().flat_map(|&a| block.lambda.iter().map(move |&b| a * b)).collect();
    out.sort_by(|a, b| b.total_cmp(a));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mps::{ghz_tensor, random_tensor, toy_fractional_tensor};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg() -> Config {
        Config::default()
    }

    #[test]
    fn random_tensor_is_single_injective_block() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let t = random_tensor(2, 3, &mut rng);
        let cf = canonicalize(&t, &cfg()).unwrap();
        assert_eq!(cf.blocks.len(), 1);
        assert!(cf.is_injective());
        assert!(cf.residual < 1e-10, "residual {}", cf.residual);
        let b = &cf.blocks[0];
        assert!((b.lambda.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(b.lambda.windows(2).all(|w| w[0] >= w[1]));
        assert!((b.weight - 1.0).abs() < 1e-15);
    }

    #[test]
    fn gauge_maps_tensor_to_block() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let t = random_tensor(3, 2, &mut rng);
        let cf = canonicalize(&t, &cfg()).unwrap();
        let inv = cf.gauge.clone().try_inverse().unwrap();
        let r = cf.blocks[0].radius;
        for (a, cb) in t.kraus().iter().zip(cf.blocks[0].tensor.kraus()) {
            let g = &cf.gauge * a * &inv / c(r.sqrt(), 0.0);
            assert!(linalg::max_abs_diff(&g, cb) < 1e-10);
        }
    }

    #[test]
    fn canonicalization_is_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let once = canonicalize(&random_tensor(2, 2, &mut rng), &cfg()).unwrap();
        let twice = canonicalize(&once.blocks[0].tensor, &cfg()).unwrap();
        assert_eq!(twice.blocks.len(), 1);
        assert!(twice.residual < 1e-10);
        for (a, b) in once.blocks[0].lambda.iter().zip(&twice.blocks[0].lambda) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn ghz_splits_into_two_equal_blocks() {
        let cf = canonicalize(&ghz_tensor(2), &cfg()).unwrap();
        assert_eq!(cf.blocks.len(), 2);
        for b in &cf.blocks {
            assert_eq!(b.dim(), 1);
            assert_eq!(b.period, 1);
            assert!((b.weight - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn toy_model_is_one_periodic_block() {
        for (p, q) in [(3, 1), (4, 1), (5, 2)] {
            let cf = canonicalize(&toy_fractional_tensor(p, q).unwrap(), &cfg()).unwrap();
            assert_eq!(cf.periods(), vec![p]);
            assert!((cf.blocks[0].weight - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn identical_copies_are_merged() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let a = random_tensor(2, 2, &mut rng);
        let doubled = a.direct_sum(&a).unwrap();
        let cf = canonicalize(&doubled, &cfg()).unwrap();
        assert_eq!(cf.blocks.len(), 1);
        assert_eq!(cf.blocks[0].multiplicity, 2);
    }

    #[test]
    fn distinct_blocks_with_unequal_radius() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let a = random_tensor(2, 2, &mut rng);
        let b = random_tensor(2, 2, &mut rng).scaled(0.3);
        let cf = canonicalize(&a.direct_sum(&b).unwrap(), &cfg()).unwrap();
        assert_eq!(cf.blocks.len(), 2);
        let weights: Vec<f64> = cf.blocks.iter().map(|b| b.weight).collect();
        assert!(weights.contains(&1.0) && weights.contains(&0.0));
    }

    #[test]
    fn triangular_coupling_is_split() {
        // upper triangular: the off-diagonal part does not change the state
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut kraus = Vec::new();
        for _ in 0..2 {
            let mut m = linalg::random_gaussian_matrix(3, 3, &mut rng);
            m[(1, 0)] = linalg::ZERO;
            m[(2, 0)] = linalg::ZERO;
            kraus.push(m);
        }
        let cf = canonicalize(&SiteTensor::new(kraus).unwrap(), &cfg()).unwrap();
        assert_eq!(cf.blocks.len(), 2);
        assert!(cf.residual < 1e-8);
    }

    #[test]
    fn asymptotic_spectrum_outer_product() {
        let b = CanonicalBlock {
            tensor: ghz_tensor(2),
            lambda: vec![0.7, 0.3],
            period: 1,
            weight: 1.0,
            radius: 1.0,
            multiplicity: 1,
        };
        let s = asymptotic_spectrum(&b);
        let expect = [0.49, 0.21, 0.21, 0.09];
        for (a, e) in s.iter().zip(expect) {
            assert!((a - e).abs() < 1e-15);
        }
    }
}
