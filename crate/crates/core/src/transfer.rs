//! Transfer operators, their spectra, overlaps and injectivity lengths.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::canonical::CanonicalForm;
use crate::error::{Error, Result};
use crate::linalg::{self, CMat, ZERO};
use crate::mps::{Mps, SiteTensor};

/// Matrix of `X ↦ Σ A_i X B_i†` acting on row-major `vec(X)`,
/// i.e. `Σ A_i ⊗ conj(B_i)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TransferOperator {
    pub matrix: CMat,
    pub left_dim: usize,
    pub right_dim: usize,
}

impl TransferOperator {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// `X ↦ Σ A_i X B_i†` applied directly.
    pub fn apply(&self, x: &CMat) -> CMat {
        let v = &self.matrix * linalg::vec_row(x);
        linalg::unvec_row(&v, self.left_dim, self.right_dim)
    }
}

pub fn transfer_operator(a: &SiteTensor, b: Option<&SiteTensor>) -> Result<TransferOperator> {
    let b = b.unwrap_or(a);
    if a.phys_dim() != b.phys_dim() {
        return Err(Error::Shape(format!(
            "transfer operator needs equal physical dimensions, got {} and {}",
            a.phys_dim(),
            b.phys_dim()
        )));
    }
    let (da, db) = (a.bond_dim(), b.bond_dim());
    let mut m = CMat::zeros(da * db, da * db);
    for (ka, kb) in a.kraus().iter().zip(b.kraus()) {
        m += linalg::kron(ka, &kb.map(|z| z.conj()));
    }
    Ok(TransferOperator { matrix: m, left_dim: da, right_dim: db })
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransferSpectrum {
    /// All eigenvalues, by descending modulus.
    pub eigenvalues: Vec<C64>,
    pub peripheral: Vec<C64>,
    /// Spectral radius `ρ`.
    pub radius: f64,
    /// `1 - |λ₂|/ρ`; zero when the peripheral spectrum is degenerate.
    pub gap: f64,
    pub period: usize,
    pub peripheral_tol: f64,
}

impl TransferSpectrum {
    /// Second largest modulus relative to the spectral radius.
    pub fn second_modulus(&self) -> f64 {
        match self.eigenvalues.get(1) {
            Some(z) if self.radius > 0.0 => z.norm() / self.radius,
            _ => 0.0,
        }
    }

    pub fn report(&self) -> SpectrumReport {
        SpectrumReport {
            eigenvalues: self.eigenvalues.iter().map(|z| [z.re, z.im]).collect(),
            gap: self.gap,
            period: self.period,
            peripheral_tol: self.peripheral_tol,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub eigenvalues: Vec<[f64; 2]>,
    pub gap: f64,
    pub period: usize,
    pub peripheral_tol: f64,
}

/// Eigenvalues are counted as peripheral when `|λ| > (1 - tol) ρ`.
pub fn spectrum(t: &TransferOperator, tol: f64) -> Result<TransferSpectrum> {
    let mut eigenvalues = linalg::eigenvalues(&t.matrix)?;
    linalg::sort_by_modulus_desc(&mut eigenvalues);
    let radius = eigenvalues.first().map_or(0.0, |z| z.norm());
    let peripheral: Vec<C64> = if radius > 0.0 {
        eigenvalues.iter().copied().filter(|z| z.norm() > (1.0 - tol) * radius).collect()
    } else {
        Vec::new()
    };
    let period = peripheral.len().max(1);
    let gap = match eigenvalues.get(1) {
        _ if radius == 0.0 => 0.0,
        Some(z) if peripheral.len() <= 1 => 1.0 - z.norm() / radius,
        Some(_) => 0.0,
        None => 1.0,
    };
    Ok(TransferSpectrum { eigenvalues, peripheral, radius, gap, period, peripheral_tol: tol })
}

pub fn tensor_spectrum(a: &SiteTensor, tol: f64) -> Result<TransferSpectrum> {
    spectrum(&transfer_operator(a, None)?, tol)
}

/// `⟨ψ_B|ψ_A⟩ = tr(Π_n 𝔼_{A[n],B[n]})`. Uniform inputs use a matrix power.
pub fn overlap(a: &Mps, b: &Mps) -> Result<C64> {
    if a.n_sites() != b.n_sites() {
        return Err(Error::Shape(format!("overlap needs equal N, got {} and {}", a.n_sites(), b.n_sites())));
    }
    if a.phys_dim() != b.phys_dim() {
        return Err(Error::Shape("overlap needs equal physical dimensions".into()));
    }
    if let (Some(ta), Some(tb)) = (a.uniform_tensor(), b.uniform_tensor()) {
        let e = transfer_operator(ta, Some(tb))?;
        return Ok(linalg::trace(&linalg::mat_pow(&e.matrix, a.n_sites())));
    }
    let mut acc: Option<CMat> = None;
    for n in 0..a.n_sites() {
        let e = transfer_operator(a.site(n), Some(b.site(n)))?.matrix;
        acc = Some(match acc {
            None => e,
            Some(m) => m * e,
        });
    }
    Ok(acc.map_or(ZERO, |m| linalg::trace(&m)))
}

/// `|⟨ψ_B|ψ_A⟩| / (‖ψ_A‖ ‖ψ_B‖)`.
pub fn normalized_overlap(a: &Mps, b: &Mps) -> Result<f64> {
    let ab = overlap(a, b)?.norm();
    let aa = overlap(a, a)?.norm();
    let bb = overlap(b, b)?.norm();
    if aa == 0.0 || bb == 0.0 {
        return Err(Error::ZeroNorm);
    }
    Ok(ab / (aa * bb).sqrt())
}

/// Normalized overlap of the uniform states of two tensors on `n` sites.
pub fn tensor_fidelity(a: &SiteTensor, b: &SiteTensor, n: usize) -> Result<f64> {
    normalized_overlap(&Mps::uniform(a.clone(), n)?, &Mps::uniform(b.clone(), n)?)
}

fn radius(m: &CMat) -> Result<f64> {
    Ok(linalg::eigenvalues(m)?.iter().map(|z| z.norm()).fold(0.0, f64::max))
}

#[derive(Clone, Debug, Serialize)]
pub struct OverlapDecay {
    pub lengths: Vec<usize>,
    pub overlaps: Vec<f64>,
    /// Slope of `log |⟨ψ_B|ψ_A⟩|` (normalized) against `N`.
    pub fitted: f64,
    /// `log ρ(𝔼_{A,B}) − (log ρ(𝔼_A) + log ρ(𝔼_B))/2`.
    pub predicted: f64,
    pub rel_error: f64,
}

/// Exponential decay of the normalized overlap of two uniform states.
pub fn overlap_decay(a: &SiteTensor, b: &SiteTensor, lengths: &[usize]) -> Result<OverlapDecay> {
    if lengths.len() < 2 {
        return Err(Error::InvalidArgument("need at least two lengths".into()));
    }
    let overlaps = lengths.iter().map(|&n| tensor_fidelity(a, b, n)).collect::<Result<Vec<_>>>()?;
    if overlaps.iter().any(|&o| !(o > 0.0)) {
        return Err(Error::ZeroNorm);
    }
    let xs: Vec<f64> = lengths.iter().map(|&n| n as f64).collect();
    let ys: Vec<f64> = overlaps.iter().map(|o| o.ln()).collect();
    let fitted = linalg::linear_fit(&xs, &ys).0;
    let rab = radius(&transfer_operator(a, Some(b))?.matrix)?;
    let raa = radius(&transfer_operator(a, None)?.matrix)?;
    let rbb = radius(&transfer_operator(b, None)?.matrix)?;
    let predicted = rab.ln() - 0.5 * (raa.ln() + rbb.ln());
    Ok(OverlapDecay { lengths: lengths.to_vec(), overlaps, fitted, predicted, rel_error: (fitted - predicted).abs() / predicted.abs() })
}

/// Spectral radius of `𝔼_{A,B}`.
pub fn mixed_radius(a: &SiteTensor, b: &SiteTensor) -> Result<f64> {
    radius(&transfer_operator(a, Some(b))?.matrix)
}

/// Smallest `L ≤ l_max` at which the length-`L` products span all of `M_D`.
///
/// The span is propagated as an orthonormal basis: the length-`L+1` span is
/// spanned by `A_i B_k` for a basis `B_k` of the length-`L` span, which
/// avoids forming `d^L` words.
pub fn injectivity_length(a: &SiteTensor, l_max: usize, rank_tol: f64) -> Option<usize> {
    let dim = a.bond_dim();
    let full = dim * dim;
    let vecs: Vec<CMat> = a.kraus().iter().map(|k| to_column(k)).collect();
    let mut basis = linalg::column_space(&hstack(&vecs), rank_tol);
    let mut length = 1;
    loop {
        if basis.ncols() == full {
            return Some(length);
        }
        if length >= l_max || basis.ncols() == 0 {
            return None;
        }
        let mut cols = Vec::with_capacity(a.phys_dim() * basis.ncols());
        for k in a.kraus() {
            for j in 0..basis.ncols() {
                let b = linalg::unvec_row(&basis.column(j).into_owned(), dim, dim);
                cols.push(to_column(&(k * b)));
            }
        }
        basis = linalg::column_space(&hstack(&cols), rank_tol);
        length += 1;
    }
}

fn to_column(m: &CMat) -> CMat {
    let v = linalg::vec_row(m);
    CMat::from_column_slice(v.len(), 1, v.as_slice())
}

fn hstack(cols: &[CMat]) -> CMat {
    let rows = cols.first().map_or(0, |c| c.nrows());
    let total: usize = cols.iter().map(|c| c.ncols()).sum();
    let mut out = CMat::zeros(rows, total);
    let mut at = 0;
    for c in cols {
        out.view_mut((0, at), (rows, c.ncols())).copy_from(c);
        at += c.ncols();
    }
    out
}

/// Per-block periods of a canonical form.
pub fn detect_period(cf: &CanonicalForm) -> Vec<usize> {
    cf.blocks.iter().map(|b| b.period).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, ONE};
    use crate::mps::{ghz_tensor, random_tensor, toy_fractional_tensor};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn scalar_transfer_operator() {
        let t = SiteTensor::new(vec![CMat::from_element(1, 1, c(0.6, 0.0)), CMat::from_element(1, 1, c(0.0, 0.8))]).unwrap();
        let e = transfer_operator(&t, None).unwrap();
        assert!((e.matrix[(0, 0)] - ONE).norm() < 1e-15);
    }

    #[test]
    fn transfer_matrix_realizes_the_map() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_tensor(2, 3, &mut rng);
        let b = random_tensor(2, 2, &mut rng);
        let x = linalg::random_gaussian_matrix(3, 2, &mut rng);
        let e = transfer_operator(&a, Some(&b)).unwrap();
        let direct: CMat = a.kraus().iter().zip(b.kraus()).map(|(p, q)| p * &x * q.adjoint()).sum();
        assert!(linalg::max_abs_diff(&e.apply(&x), &direct) < 1e-12);
    }

    #[test]
    fn ghz_spectrum() {
        let e = transfer_operator(&ghz_tensor(2), None).unwrap();
        let s = spectrum(&e, 1e-8).unwrap();
        assert_eq!(s.period, 2);
        let mods: Vec<f64> = s.eigenvalues.iter().map(|z| z.norm()).collect();
        assert!((mods[0] - 1.0).abs() < 1e-12 && (mods[1] - 1.0).abs() < 1e-12);
        assert!(mods[2] < 1e-12 && mods[3] < 1e-12);
    }

    #[test]
    fn identity_channel_is_fully_peripheral() {
        let t = SiteTensor::new(vec![linalg::identity(2)]).unwrap();
        let s = tensor_spectrum(&t, 1e-8).unwrap();
        assert_eq!(s.period, 4);
        assert_eq!(s.gap, 0.0);
    }

    #[test]
    fn toy_peripheral_roots_of_unity() {
        let s = tensor_spectrum(&toy_fractional_tensor(3, 1).unwrap(), 1e-8).unwrap();
        assert_eq!(s.period, 3);
        for k in 0..3 {
            let w = C64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / 3.0);
            assert!(s.peripheral.iter().any(|z| (z - w).norm() < 1e-10), "missing root {k}");
        }
    }

    #[test]
    fn ghz_overlap_with_product_state() {
        let n = 6;
        let ghz = Mps::uniform(ghz_tensor(2), n).unwrap();
        let up = Mps::uniform(crate::mps::product_tensor(&[ONE, ZERO]).unwrap(), n).unwrap();
        let f = normalized_overlap(&ghz, &up).unwrap();
        assert!((f - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-14);
    }

    #[test]
    fn nonuniform_overlap_matches_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = Mps::uniform(random_tensor(2, 2, &mut rng), 5).unwrap();
        let b = Mps::uniform(random_tensor(2, 3, &mut rng), 5).unwrap();
        let u = overlap(&a, &b).unwrap();
        let v = overlap(&a.expanded(), &b.expanded()).unwrap();
        assert!((u - v).norm() < 1e-10 * u.norm().max(1.0));
    }

    #[test]
    fn injectivity_lengths() {
        let one = SiteTensor::new(vec![CMat::from_element(1, 1, ONE), CMat::from_element(1, 1, c(0.5, 0.0))]).unwrap();
        assert_eq!(injectivity_length(&one, 5, 1e-10), Some(1));
        assert_eq!(injectivity_length(&ghz_tensor(2), 12, 1e-10), None);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        assert_eq!(injectivity_length(&random_tensor(2, 4, &mut rng), 10, 1e-10), Some(4));
    }
}
