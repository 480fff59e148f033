//! Operators on a block of `L` consecutive sites, kept in factorized form.
//!
//! Every region operator used here has the shape `X = V K V†`, where the
//! rows of `V` (a `d^L × D²` matrix) are the vectorized words
//! `T_w = A_{w₁} ⋯ A_{w_L}` and `K` is a `D² × D²` core. Sums of such terms
//! are handled through the Gram matrix of the stacked `V`s: the nonzero
//! eigenvalues of `Σ_t V_t K_t V_t†` are those of `𝒢^{1/2} 𝓜 𝒢^{1/2}` with
//! `𝓜 = ⊕ K_t`. Nothing of size `d^L` is formed.

use crate::canonical::POWER_SQUARINGS;
use crate::error::{check_cap, Error, Result};
use crate::linalg::{self, c, CMat};
use crate::mps::{word_products, Mps, SiteTensor};
use crate::transfer::transfer_operator;

#[derive(Clone, Debug)]
pub struct RegionTerm {
    pub sites: Vec<SiteTensor>,
    pub core: CMat,
}

impl RegionTerm {
    pub fn new(sites: Vec<SiteTensor>, core: CMat) -> Result<Self> {
        let dim = sites.first().map_or(0, |s| s.bond_dim());
        if sites.iter().any(|s| s.bond_dim() != dim) {
            return Err(Error::Shape("region sites must share a bond dimension".into()));
        }
        if core.nrows() != dim * dim || core.ncols() != dim * dim {
            return Err(Error::Shape(format!("core must be {0}x{0}", dim * dim)));
        }
        Ok(RegionTerm { sites, core })
    }

    pub fn bond_dim(&self) -> usize {
        (self.core.nrows() as f64).sqrt().round() as usize
    }

    pub fn scaled(&self, factor: f64) -> RegionTerm {
        RegionTerm { sites: self.sites.clone(), core: &self.core * c(factor, 0.0) }
    }

    /// `tr(V K V†) = tr(K V†V)`.
    pub fn trace(&self) -> f64 {
        let g = gram(&self.sites, &self.sites, self.bond_dim(), self.bond_dim());
        linalg::trace(&(&self.core * g)).re
    }

    /// Dense `V K V†`; requires `d^L` within `cap`.
    pub fn dense(&self, cap: usize) -> Result<CMat> {
        let v = words_matrix(&self.sites, self.bond_dim(), cap)?;
        Ok(&v * &self.core * v.adjoint())
    }
}

/// `V†_S V_T` for two site sequences of equal length and physical dimension:
/// the reshuffle of `Π_n Σ_i conj(S_{n,i}) ⊗ T_{n,i}`.
pub fn gram(s: &[SiteTensor], t: &[SiteTensor], ds: usize, dt: usize) -> CMat {
    assert_eq!(s.len(), t.len(), "region lengths differ");
    let mut f = linalg::identity(ds * dt);
    for (sn, tn) in s.iter().zip(t) {
        let mut step = CMat::zeros(ds * dt, ds * dt);
        for (a, b) in sn.kraus().iter().zip(tn.kraus()) {
            step += linalg::kron(&a.map(|z| z.conj()), b);
        }
        f *= step;
    }
    // G[(αβ),(γδ)] = F[(αγ),(βδ)]
    CMat::from_fn(ds * ds, dt * dt, |row, col| {
        let (a, b) = (row / ds, row % ds);
        let (g, d) = (col / dt, col % dt);
        f[(a * dt + g, b * dt + d)]
    })
}

/// `d^L × D²` matrix whose rows are the row-major vectorized words.
pub fn words_matrix(sites: &[SiteTensor], dim: usize, cap: usize) -> Result<CMat> {
    let d = sites.first().map_or(1, |s| s.phys_dim());
    check_cap("region", d, sites.len(), cap)?;
    let words = if sites.is_empty() { vec![linalg::identity(dim)] } else { word_products(sites) };
    let mut v = CMat::zeros(words.len(), dim * dim);
    for (r, w) in words.iter().enumerate() {
        for (k, z) in w.transpose().iter().enumerate() {
            // column-major iteration of the transpose is row-major order of w
            v[(r, k)] = *z;
        }
    }
    Ok(v)
}

/// Core `K[(αβ),(γδ)] = Env[(βδ),(αγ)]` for an environment matrix given in
/// transfer-operator index order.
pub fn core_from_environment(env: &CMat, dim: usize) -> CMat {
    CMat::from_fn(dim * dim, dim * dim, |row, col| {
        let (a, b) = (row / dim, row % dim);
        let (g, d) = (col / dim, col % dim);
        env[(b * dim + d, a * dim + g)]
    })
}

/// Core of `(i, j) ↦ tr(T_j† L T_i R)`, namely `L^T ⊗ R`.
pub fn fixed_point_core(left: &CMat, right: &CMat) -> CMat {
    linalg::kron(&left.transpose(), right)
}

/// Product of transfer matrices over sites `L..N` (the complement of the
/// region `0..L`), rescaled; identity when the region is the whole chain.
pub fn exact_environment(mps: &Mps, region_len: usize) -> Result<CMat> {
    let n = mps.n_sites();
    let dim = mps.bond_dim();
    if let Some(t) = mps.uniform_tensor() {
        let e = transfer_operator(t, None)?.matrix;
        return Ok(linalg::mat_pow_normalized(&e, n - region_len));
    }
    let mut env = linalg::identity(dim * dim);
    for k in region_len..n {
        env = linalg::normalize_max(env * transfer_operator(mps.site(k), None)?.matrix);
    }
    Ok(env)
}

/// Limit of the rescaled environment for an infinitely long complement:
/// the spectral projector of the transfer map onto its dominant fixed
/// space. For periodic tensors this averages over the residues of `N`.
pub fn thermodynamic_environment(tensor: &SiteTensor) -> Result<CMat> {
    let e = transfer_operator(tensor, None)?.matrix;
    let r = linalg::eigenvalues(&e)?.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if r == 0.0 {
        return Err(Error::ZeroNorm);
    }
    Ok(linalg::dominant_projector(&e, r, POWER_SQUARINGS))
}

/// Sums the cores of terms built on identical site sequences. Stacking
/// equal word matrices makes the Gram matrix singular, and its square root
/// would then lift roundoff to `√ε`.
pub fn merge_terms(terms: &[RegionTerm]) -> Vec<RegionTerm> {
    let mut out: Vec<RegionTerm> = Vec::with_capacity(terms.len());
    for t in terms {
        match out.iter_mut().find(|o| o.sites == t.sites) {
            Some(o) => o.core += &t.core,
            None => out.push(t.clone()),
        }
    }
    out
}

/// Nonzero spectrum (padded with zeros to `Σ D_t²` over distinct site
/// sequences) of `Σ_t V_t K_t V_t†`.
pub fn factorized_eigenvalues(terms: &[RegionTerm]) -> Vec<f64> {
    let terms = merge_terms(terms);
    let dims: Vec<usize> = terms.iter().map(|t| t.bond_dim()).collect();
    let sizes: Vec<usize> = dims.iter().map(|d| d * d).collect();
    let total: usize = sizes.iter().sum();
    let mut g = CMat::zeros(total, total);
    let mut m = CMat::zeros(total, total);
    let mut r0 = 0;
    for (i, ti) in terms.iter().enumerate() {
        let mut c0 = 0;
        for (j, tj) in terms.iter().enumerate() {
            if j >= i {
                let block = gram(&ti.sites, &tj.sites, dims[i], dims[j]);
                g.view_mut((r0, c0), (sizes[i], sizes[j])).copy_from(&block);
                if j > i {
                    g.view_mut((c0, r0), (sizes[j], sizes[i])).copy_from(&block.adjoint());
                }
            }
            c0 += sizes[j];
        }
        m.view_mut((r0, r0), (sizes[i], sizes[i])).copy_from(&ti.core);
        r0 += sizes[i];
    }
    let gs = linalg::psd_sqrt(&g);
    let h = &gs * linalg::hermitian_part(&m) * &gs;
    linalg::hermitian_eigenvalues(&h)
}

/// `‖X − Y‖₁` and `‖X − Y‖₂` for two factorized operators.
pub fn distance(x: &RegionTerm, y: &RegionTerm) -> (f64, f64) {
    let ev = factorized_eigenvalues(&[x.clone(), y.scaled(-1.0)]);
    (ev.iter().map(|v| v.abs()).sum(), ev.iter().map(|v| v * v).sum::<f64>().sqrt())
}

/// `tr(X_a X_b)` for two factorized operators.
pub fn cross_trace(a: &RegionTerm, b: &RegionTerm) -> f64 {
    let (da, db) = (a.bond_dim(), b.bond_dim());
    let gab = gram(&a.sites, &b.sites, da, db);
    let gba = gram(&b.sites, &a.sites, db, da);
    linalg::trace(&(&a.core * gab * &b.core * gba)).re
}
