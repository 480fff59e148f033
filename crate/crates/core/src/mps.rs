//! Periodic matrix product states.
//!
//! A state on `N` sites has amplitudes `⟨i₁…i_N|ψ⟩ = tr(A_{i₁}[1] ⋯ A_{i_N}[N])`.
//! Basis states are ordered big-endian: site 1 is the most significant digit.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_cap, Error, Result};
use crate::linalg::{self, c, CMat, CVec, ONE, ZERO};

/// The `d` Kraus matrices attached to one site, all `D × D`.
#[derive(Clone, Debug, PartialEq)]
pub struct SiteTensor {
    kraus: Vec<CMat>,
}

impl SiteTensor {
    pub fn new(kraus: Vec<CMat>) -> Result<Self> {
        let first = kraus
            .first()
            .ok_or_else(|| Error::Shape("a site tensor needs at least one Kraus matrix".into()))?;
        let dim = first.nrows();
        if dim == 0 {
            return Err(Error::Shape("bond dimension must be positive".into()));
        }
        for (i, k) in kraus.iter().enumerate() {
            if k.nrows() != dim || k.ncols() != dim {
                return Err(Error::Shape(format!(
                    "Kraus matrix {i} is {}x{}, expected {dim}x{dim}",
                    k.nrows(),
                    k.ncols()
                )));
            }
        }
        Ok(SiteTensor { kraus })
    }

    pub fn kraus(&self) -> &[CMat] {
        &self.kraus
    }

    pub fn phys_dim(&self) -> usize {
        self.kraus.len()
    }

    pub fn bond_dim(&self) -> usize {
        self.kraus[0].nrows()
    }

    pub fn is_zero(&self) -> bool {
        self.kraus.iter().all(|k| k.iter().all(|z| *z == ZERO))
    }

    /// `A_i ↦ X A_i Y`.
    pub fn sandwich(&self, left: &CMat, right: &CMat) -> SiteTensor {
        SiteTensor { kraus: self.kraus.iter().map(|k| left * k * right).collect() }
    }

    pub fn scaled(&self, factor: f64) -> SiteTensor {
        SiteTensor { kraus: self.kraus.iter().map(|k| k * c(factor, 0.0)).collect() }
    }

    /// Block-diagonal tensor `A_i ⊕ B_i`.
    pub fn direct_sum(&self, other: &SiteTensor) -> Result<SiteTensor> {
        if self.phys_dim() != other.phys_dim() {
            return Err(Error::Shape("direct sum needs equal physical dimensions".into()));
        }
        let (da, db) = (self.bond_dim(), other.bond_dim());
        let kraus = self
            .kraus
            .iter()
            .zip(&other.kraus)
            .map(|(a, b)| {
                let mut m = CMat::zeros(da + db, da + db);
                m.view_mut((0, 0), (da, da)).copy_from(a);
                m.view_mut((da, da), (db, db)).copy_from(b);
                m
            })
            .collect();
        SiteTensor::new(kraus)
    }

    /// Kraus matrices of `p` consecutive copies: all products
    /// `A_{i₁} ⋯ A_{i_p}` indexed big-endian by `(i₁ … i_p)`.
    pub fn power(&self, p: usize) -> SiteTensor {
        let seq = vec![self.clone(); p];
        SiteTensor { kraus: word_products(&seq) }
    }
}

/// All products `T₁[i₁] ⋯ T_L[i_L]` in big-endian word order. The empty
/// sequence yields the single identity (bond dimension taken as 1).
pub fn word_products(seq: &[SiteTensor]) -> Vec<CMat> {
    let Some(first) = seq.first() else {
        return vec![linalg::identity(1)];
    };
    let mut words: Vec<CMat> = first.kraus.clone();
    for t in &seq[1..] {
        let mut next = Vec::with_capacity(words.len() * t.phys_dim());
        for w in &words {
            for k in &t.kraus {
                next.push(w * k);
            }
        }
        words = next;
    }
    words
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mps {
    sites: Vec<SiteTensor>,
    n_sites: usize,
}

impl Mps {
    /// Translation-invariant state: one tensor replicated on `n` sites.
    pub fn uniform(tensor: SiteTensor, n: usize) -> Result<Self> {
        if n < 1 {
            return Err(Error::InvalidArgument("an MPS needs at least one site".into()));
        }
        Ok(Mps { sites: vec![tensor], n_sites: n })
    }

    pub fn from_sites(sites: Vec<SiteTensor>) -> Result<Self> {
        let first = sites.first().ok_or_else(|| Error::InvalidArgument("an MPS needs at least one site".into()))?;
        let (d, dim) = (first.phys_dim(), first.bond_dim());
        for (n, s) in sites.iter().enumerate() {
            if s.bond_dim() != dim {
                return Err(Error::Shape(format!("site {n} has bond dimension {}, expected {dim}", s.bond_dim())));
            }
            if s.phys_dim() != d {
                return Err(Error::Shape(format!("site {n} has physical dimension {}, expected {d}", s.phys_dim())));
            }
        }
        let n_sites = sites.len();
        Ok(Mps { sites, n_sites })
    }

    pub fn is_uniform(&self) -> bool {
        self.sites.len() == 1
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn phys_dim(&self) -> usize {
        self.sites[0].phys_dim()
    }

    pub fn bond_dim(&self) -> usize {
        self.sites[0].bond_dim()
    }

    /// Tensor on site `n` (0-based).
    pub fn site(&self, n: usize) -> &SiteTensor {
        assert!(n < self.n_sites, "site index out of range");
        if self.is_uniform() {
            &self.sites[0]
        } else {
            &self.sites[n]
        }
    }

    pub fn stored_sites(&self) -> &[SiteTensor] {
        &self.sites
    }

    /// The uniform tensor, if the state is translation invariant.
    pub fn uniform_tensor(&self) -> Option<&SiteTensor> {
        self.is_uniform().then(|| &self.sites[0])
    }

    /// Site tensors for the range `[start, end)`.
    pub fn site_range(&self, start: usize, end: usize) -> Vec<SiteTensor> {
        (start..end).map(|n| self.site(n).clone()).collect()
    }

    /// Same state, explicitly listing all `N` tensors.
    pub fn expanded(&self) -> Mps {
        Mps { sites: self.site_range(0, self.n_sites), n_sites: self.n_sites }
    }
}

pub fn build_uniform(kraus: Vec<CMat>, n: usize) -> Result<Mps> {
    if kraus.iter().all(|k| k.iter().all(|z| *z == ZERO)) && !kraus.is_empty() {
        return Err(Error::InvalidArgument("all Kraus matrices vanish".into()));
    }
    Mps::uniform(SiteTensor::new(kraus)?, n)
}

/// Dense amplitudes `tr(A_{i₁}[1] ⋯ A_{i_N}[N])`, evaluated word by word.
pub fn to_state_vector(mps: &Mps, cap: usize) -> Result<CVec> {
    let (d, n) = (mps.phys_dim(), mps.n_sites());
    let len = check_cap("state vector", d, n, cap)?;
    let mut out = vec![ZERO; len];
    let dim = mps.bond_dim();
    // depth-first over words keeping prefix products
    let mut stack: Vec<CMat> = Vec::with_capacity(n);
    stack.push(linalg::identity(dim));
    fill_amplitudes(mps, 0, &mut stack, 0, &mut out);
    Ok(CVec::from_vec(out))
}

fn fill_amplitudes(mps: &Mps, site: usize, stack: &mut Vec<CMat>, index: usize, out: &mut [C64Slot]) {
    let t = mps.site(site);
    let d = t.phys_dim();
    let last = site + 1 == mps.n_sites();
    for (i, k) in t.kraus().iter().enumerate() {
        let idx = index * d + i;
        let prefix = stack.last().expect("prefix stack is never empty");
        if last {
            // tr(P K) without forming the product
            let mut acc = ZERO;
            for a in 0..k.nrows() {
                for b in 0..k.ncols() {
                    acc += prefix[(a, b)] * k[(b, a)];
                }
            }
            out[idx] = acc;
        } else {
            let next = prefix * k;
            stack.push(next);
            fill_amplitudes(mps, site + 1, stack, idx, out);
            stack.pop();
        }
    }
}

type C64Slot = num_complex::Complex64;

/// `A_i ↦ X A_i X⁻¹` on every site; leaves the periodic state unchanged.
pub fn apply_gauge(mps: &Mps, x: &CMat, max_condition: f64) -> Result<Mps> {
    let dim = mps.bond_dim();
    if x.nrows() != dim || x.ncols() != dim {
        return Err(Error::Shape(format!("gauge must be {dim}x{dim}")));
    }
    let cond = linalg::condition_number(x);
    if !(cond <= max_condition) {
        return Err(Error::Singular(format!("gauge condition number {cond:e} exceeds {max_condition:e}")));
    }
    let inv = x.clone().try_inverse().ok_or_else(|| Error::Singular("gauge is not invertible".into()))?;
    let sites = mps.stored_sites().iter().map(|s| s.sandwich(x, &inv)).collect();
    Ok(Mps { sites, n_sites: mps.n_sites })
}

/// `ln ‖ψ‖` from a QR sweep over the open-chain form of the periodic state.
///
/// The running partial products `M = A_{i₁} ⋯ A_{i_n}` are kept as rows of
/// `R` in `Ψ_n = Q_n R_n` with `Q_n` an isometry, so the final norm
/// `‖R_N vec(1)‖` carries an absolute error of order `ε ‖ψ‖` rather than
/// `ε ‖ψ‖²`. This keeps norms of nearly cancelling states accurate.
pub fn log_norm(mps: &Mps) -> f64 {
    let dim = mps.bond_dim();
    let dd = dim * dim;
    let mut r = CMat::from_row_slice(1, dd, linalg::vec_row(&linalg::identity(dim)).as_slice());
    let mut log_scale = 0.0;
    for n in 0..mps.n_sites() {
        let t = mps.site(n);
        let rows = r.nrows();
        let mut w = CMat::zeros(rows * t.phys_dim(), dd);
        for (i, k) in t.kraus().iter().enumerate() {
            for row in 0..rows {
                let m = CMat::from_fn(dim, dim, |a, b| r[(row, a * dim + b)]);
                let mk = m * k;
                for a in 0..dim {
                    for b in 0..dim {
                        w[(i * rows + row, a * dim + b)] = mk[(a, b)];
                    }
                }
            }
        }
        r = w.qr().r();
        let s = r.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if s == 0.0 {
            return f64::NEG_INFINITY;
        }
        r /= c(s, 0.0);
        log_scale += s.ln();
    }
    let tail = r * linalg::vec_row(&linalg::identity(dim));
    tail.norm().ln() + log_scale
}

/// Group `p` consecutive sites into one site of physical dimension `d^p`.
pub fn block_sites(mps: &Mps, p: usize) -> Result<Mps> {
    let n = mps.n_sites();
    if p == 0 || n % p != 0 {
        return Err(Error::InvalidArgument(format!("block size {p} does not divide N = {n}")));
    }
    if let Some(t) = mps.uniform_tensor() {
        return Mps::uniform(t.power(p), n / p);
    }
    let sites = (0..n / p)
        .map(|b| SiteTensor { kraus: word_products(&mps.site_range(b * p, (b + 1) * p)) })
        .collect();
    Mps::from_sites(sites)
}

/// Cyclic shift tensors of the fractional-magnetization toy model. Physical
/// index 0 is spin up and 1 is spin down; `A_↓ = Σ_{i≤q} |i⟩⟨i+1|` and
/// `A_↑ = Σ_{q<i≤p} |i⟩⟨i+1|` with `p + 1 ≡ 1`.
pub fn toy_fractional_tensor(p: usize, q: usize) -> Result<SiteTensor> {
    if !(1 <= q && q < p) {
        return Err(Error::InvalidArgument(format!("toy model needs 1 <= q < p, got p={p}, q={q}")));
    }
    if num_integer::gcd(p, q) != 1 {
        return Err(Error::InvalidArgument(format!("p={p} and q={q} are not coprime")));
    }
    let mut up = CMat::zeros(p, p);
    let mut down = CMat::zeros(p, p);
    for i in 0..p {
        let target = if i < q { &mut down } else { &mut up };
        target[(i, (i + 1) % p)] = ONE;
    }
    SiteTensor::new(vec![up, down])
}

pub fn toy_fractional_mps(p: usize, q: usize, n: usize) -> Result<Mps> {
    let t = toy_fractional_tensor(p, q)?;
    if n == 0 || n % p != 0 {
        return Err(Error::InvalidArgument(format!("p={p} must divide N={n}")));
    }
    Mps::uniform(t, n)
}

/// `A_i = |i⟩⟨i|`: the GHZ state `Σ_i |i…i⟩`.
pub fn ghz_tensor(d: usize) -> SiteTensor {
    let kraus = (0..d)
        .map(|i| {
            let mut m = CMat::zeros(d, d);
            m[(i, i)] = ONE;
            m
        })
        .collect();
    SiteTensor { kraus }
}

/// Bond dimension one tensor producing the product state `|v⟩^{⊗N}`.
pub fn product_tensor(v: &[num_complex::Complex64]) -> Result<SiteTensor> {
    SiteTensor::new(v.iter().map(|&z| CMat::from_element(1, 1, z)).collect())
}

/// Tensor with i.i.d. complex Gaussian entries.
pub fn random_tensor<R: Rng + ?Sized>(d: usize, dim: usize, rng: &mut R) -> SiteTensor {
    SiteTensor { kraus: (0..d).map(|_| linalg::random_gaussian_matrix(dim, dim, rng)).collect() }
}

/// On-disk layout: `sites[site][kraus][row][col] = [re, im]`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MpsFile {
    pub d: usize,
    #[serde(rename = "D")]
    pub bond_dim: usize,
    #[serde(rename = "N")]
    pub n_sites: usize,
    pub uniform: bool,
    pub sites: Vec<Vec<Vec<Vec<[f64; 2]>>>>,
}

impl MpsFile {
    pub fn from_mps(mps: &Mps) -> Self {
        let sites = mps
            .stored_sites()
            .iter()
            .map(|s| {
                s.kraus()
                    .iter()
                    .map(|m| (0..m.nrows()).map(|r| (0..m.ncols()).map(|col| [m[(r, col)].re, m[(r, col)].im]).collect()).collect())
                    .collect()
            })
            .collect();
        MpsFile { d: mps.phys_dim(), bond_dim: mps.bond_dim(), n_sites: mps.n_sites(), uniform: mps.is_uniform(), sites }
    }

    pub fn to_mps(&self) -> Result<Mps> {
        let expected_sites = if self.uniform { 1 } else { self.n_sites };
        if self.sites.len() != expected_sites {
            return Err(Error::Format(format!("expected {expected_sites} stored sites, found {}", self.sites.len())));
        }
        let mut tensors = Vec::with_capacity(self.sites.len());
        for (n, site) in self.sites.iter().enumerate() {
            if site.len() != self.d {
                return Err(Error::Format(format!("site {n} has {} Kraus matrices, expected d = {}", site.len(), self.d)));
            }
            let mut kraus = Vec::with_capacity(self.d);
            for (i, rows) in site.iter().enumerate() {
                if rows.len() != self.bond_dim || rows.iter().any(|r| r.len() != self.bond_dim) {
                    return Err(Error::Format(format!("site {n} Kraus {i} is not {0}x{0}", self.bond_dim)));
                }
                kraus.push(CMat::from_fn(self.bond_dim, self.bond_dim, |r, col| c(rows[r][col][0], rows[r][col][1])));
            }
            tensors.push(SiteTensor::new(kraus)?);
        }
        if self.uniform {
            Mps::uniform(tensors.pop().expect("one site"), self.n_sites)
        } else {
            Mps::from_sites(tensors)
        }
    }
}

pub fn read_mps_json(text: &str) -> Result<Mps> {
    let file: MpsFile = serde_json::from_str(text)?;
    file.to_mps()
}

pub fn write_mps_json(mps: &Mps) -> Result<String> {
    Ok(serde_json::to_string(&MpsFile::from_mps(mps))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs_diff;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn basis_index(bits: &[usize], d: usize) -> usize {
        bits.iter().fold(0, |acc, &b| acc * d + b)
    }

    #[test]
    fn product_state_contracts_to_single_basis_vector() {
        let mps = build_uniform(vec![CMat::from_element(1, 1, ONE), CMat::from_element(1, 1, ZERO)], 4).unwrap();
        let psi = to_state_vector(&mps, 1 << 20).unwrap();
        assert_eq!(psi[0], ONE);
        assert!(psi.iter().skip(1).all(|z| *z == ZERO));
    }

    #[test]
    fn ghz_contracts_to_two_strings() {
        let mps = Mps::uniform(ghz_tensor(2), 3).unwrap();
        let psi = to_state_vector(&mps, 1 << 20).unwrap();
        for (k, z) in psi.iter().enumerate() {
            let expect = if k == 0 || k == 7 { ONE } else { ZERO };
            assert_eq!(*z, expect, "index {k}");
        }
    }

    #[test]
    fn toy_p2_is_neel_superposition() {
        let mps = toy_fractional_mps(2, 1, 4).unwrap();
        let psi = to_state_vector(&mps, 1 << 20).unwrap();
        // up = 0, down = 1
        let a = basis_index(&[0, 1, 0, 1], 2);
        let b = basis_index(&[1, 0, 1, 0], 2);
        for (k, z) in psi.iter().enumerate() {
            let expect = if k == a || k == b { ONE } else { ZERO };
            assert_eq!(*z, expect);
        }
    }

    #[test]
    fn toy_rejects_bad_arguments() {
        assert!(toy_fractional_mps(4, 2, 8).is_err());
        assert!(toy_fractional_mps(3, 1, 7).is_err());
        assert!(toy_fractional_mps(3, 3, 6).is_err());
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let r = SiteTensor::new(vec![CMat::zeros(2, 2), CMat::zeros(3, 3)]);
        assert!(matches!(r, Err(Error::Shape(_))));
        assert!(Mps::uniform(ghz_tensor(2), 0).is_err());
    }

    #[test]
    fn state_vector_cap_is_enforced() {
        let mps = Mps::uniform(ghz_tensor(2), 21).unwrap();
        assert!(matches!(to_state_vector(&mps, 1 << 20), Err(Error::CapExceeded { .. })));
    }

    #[test]
    fn identity_gauge_is_noop_and_singular_gauge_fails() {
        let mps = Mps::uniform(ghz_tensor(2), 4).unwrap();
        assert_eq!(apply_gauge(&mps, &linalg::identity(2), 1e12).unwrap(), mps);
        let singular = CMat::from_row_slice(2, 2, &[ONE, ONE, ONE, ONE]);
        assert!(matches!(apply_gauge(&mps, &singular, 1e12), Err(Error::Singular(_))));
    }

    #[test]
    fn random_gauge_preserves_ghz_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mps = Mps::uniform(ghz_tensor(2), 4).unwrap();
        let x = linalg::random_gaussian_matrix(2, 2, &mut rng);
        let gauged = apply_gauge(&mps, &x, 1e12).unwrap();
        let a = to_state_vector(&mps, 1 << 20).unwrap();
        let b = to_state_vector(&gauged, 1 << 20).unwrap();
        assert!((a - b).norm() < 1e-10);
    }

    #[test]
    fn blocking_ghz_by_two() {
        let blocked = block_sites(&Mps::uniform(ghz_tensor(2), 4).unwrap(), 2).unwrap();
        let t = blocked.uniform_tensor().unwrap();
        assert_eq!(t.phys_dim(), 4);
        assert_eq!(blocked.n_sites(), 2);
        let g = ghz_tensor(2);
        assert_eq!(t.kraus()[0], g.kraus()[0]);
        assert_eq!(t.kraus()[1], CMat::zeros(2, 2));
        assert_eq!(t.kraus()[2], CMat::zeros(2, 2));
        assert_eq!(t.kraus()[3], g.kraus()[1]);
        assert!(block_sites(&Mps::uniform(ghz_tensor(2), 5).unwrap(), 2).is_err());
        let same = block_sites(&Mps::uniform(ghz_tensor(2), 5).unwrap(), 1).unwrap();
        assert_eq!(same.uniform_tensor().unwrap(), &ghz_tensor(2));
    }

    #[test]
    fn log_norm_matches_state_vector() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mps = Mps::uniform(random_tensor(2, 3, &mut rng), 7).unwrap();
        let psi = to_state_vector(&mps, 1 << 20).unwrap();
        assert!((log_norm(&mps) - psi.norm().ln()).abs() < 1e-12);
        let zero = toy_fractional_mps(3, 1, 6).map(|m| Mps::uniform(m.site(0).clone(), 7).unwrap()).unwrap();
        assert!(log_norm(&zero) < (1e-12f64).ln());
    }

    #[test]
    fn json_round_trip_preserves_tensors() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mps = Mps::uniform(random_tensor(2, 3, &mut rng), 6).unwrap();
        let back = read_mps_json(&write_mps_json(&mps).unwrap()).unwrap();
        assert_eq!(back.n_sites(), 6);
        for (a, b) in mps.site(0).kraus().iter().zip(back.site(0).kraus()) {
            assert_eq!(max_abs_diff(a, b), 0.0);
        }
    }

    #[test]
    fn json_rejects_ragged_input() {
        let bad = r#"{"d":2,"D":1,"N":3,"uniform":true,"sites":[[[[[1,0]]]]]}"#;
        assert!(matches!(read_mps_json(bad), Err(Error::Format(_))));
    }
}
