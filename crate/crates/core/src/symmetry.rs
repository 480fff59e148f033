//! U(1) symmetry generated by `J_z = Σ_n s_z^{(n)}`, magnetization, and the
//! arithmetic linking fractional magnetization to block periods.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64 as C64;
use num_rational::Rational64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::canonical::canonicalize;
use crate::config::Config;
use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat};
use crate::mps::{log_norm, Mps, SiteTensor};
use crate::transfer::transfer_operator;

/// Spin quantum number `J`, stored as `2J`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Spin {
    twice: u32,
}

impl Spin {
    pub const HALF: Spin = Spin { twice: 1 };

    pub fn from_twice(twice: u32) -> Self {
        Spin { twice }
    }

    pub fn twice(self) -> u32 {
        self.twice
    }

    pub fn value(self) -> f64 {
        self.twice as f64 / 2.0
    }

    pub fn rational(self) -> Rational64 {
        Rational64::new(self.twice as i64, 2)
    }

    /// Local dimension `2J + 1`.
    pub fn dim(self) -> usize {
        self.twice as usize + 1
    }

    /// `s_z` eigenvalue of basis state `k`, which is `J - k`.
    pub fn sz(self, k: usize) -> f64 {
        self.value() - k as f64
    }

    /// `J_z` on one site made of `block` spins, per physical index
    /// (big-endian digits).
    pub fn site_charges(self, block: usize) -> Vec<f64> {
        let d = self.dim();
        let len = d.pow(block as u32);
        (0..len)
            .map(|mut idx| {
                let mut total = 0.0;
                for _ in 0..block {
                    total += self.sz(idx % d);
                    idx /= d;
                }
                total
            })
            .collect()
    }
}

impl fmt::Display for Spin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.twice % 2 == 0 {
            write!(f, "{}", self.twice / 2)
        } else {
            write!(f, "{}/2", self.twice)
        }
    }
}

impl FromStr for Spin {
    type Err = Error;

    /// Accepts `1/2`, `3/2`, `1`, `0.5`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("`{s}` is not a spin (use 1/2, 1, 3/2, ...)"));
        let twice = if let Some((num, den)) = s.split_once('/') {
            let num: u32 = num.trim().parse().map_err(|_| bad())?;
            match den.trim() {
                "2" => num,
                "1" => 2 * num,
                _ => return Err(bad()),
            }
        } else {
            let v: f64 = s.trim().parse().map_err(|_| bad())?;
            let t = (2.0 * v).round();
            if (2.0 * v - t).abs() > 1e-12 || t < 0.0 {
                return Err(bad());
            }
            t as u32
        };
        if twice == 0 {
            return Err(bad());
        }
        Ok(Spin { twice })
    }
}

fn check_dim(mps: &Mps, spin: Spin, block: usize) -> Result<Vec<f64>> {
    let charges = spin.site_charges(block);
    if mps.phys_dim() != charges.len() {
        return Err(Error::InvalidArgument(format!(
            "physical dimension {} does not match (2J+1)^{block} = {} for J = {spin}",
            mps.phys_dim(),
            charges.len()
        )));
    }
    Ok(charges)
}

fn charged_transfer(t: &SiteTensor, charges: &[f64]) -> CMat {
    let dim = t.bond_dim();
    let mut m = CMat::zeros(dim * dim, dim * dim);
    for (k, z) in t.kraus().iter().zip(charges) {
        m += linalg::kron(k, &k.map(|v| v.conj())) * c(*z, 0.0);
    }
    m
}

/// Magnetization per spin `⟨J_z⟩ / (N b ⟨ψ|ψ⟩)` for sites made of `block`
/// spins, from a single `s_z` insertion in the transfer contraction.
pub fn magnetization(mps: &Mps, spin: Spin, block: usize) -> Result<f64> {
    let charges = check_dim(mps, spin, block)?;
    let n = mps.n_sites();
    let spins = (n * block) as f64;
    if let Some(t) = mps.uniform_tensor() {
        let e = transfer_operator(t, None)?.matrix;
        let ez = charged_transfer(t, &charges);
        let rest = linalg::mat_pow_normalized(&e, n - 1);
        let den = linalg::trace(&(&e * &rest));
        let num = linalg::trace(&(&ez * &rest));
        check_nonzero(den, &(&e * &rest))?;
        return Ok((num / den).re * n as f64 / spins);
    }
    // prefix/suffix products with separate log scales
    let es: Vec<CMat> = (0..n).map(|k| transfer_operator(mps.site(k), None).map(|t| t.matrix)).collect::<Result<_>>()?;
    let dd = es[0].nrows();
    let mut suffix = vec![(linalg::identity(dd), 0.0); n + 1];
    for k in (0..n).rev() {
        let (m, l) = scaled(&es[k] * &suffix[k + 1].0);
        suffix[k] = (m, l + suffix[k + 1].1);
    }
    let total = linalg::trace(&suffix[0].0);
    check_nonzero(total, &suffix[0].0)?;
    let mut prefix = (linalg::identity(dd), 0.0);
    let mut acc = 0.0;
    for k in 0..n {
        let ez = charged_transfer(mps.site(k), &charges);
        let term = linalg::trace(&(&prefix.0 * ez * &suffix[k + 1].0));
        let log_ratio = prefix.1 + suffix[k + 1].1 - suffix[0].1;
        acc += (term / total).re * log_ratio.exp();
        let (m, l) = scaled(&prefix.0 * &es[k]);
        prefix = (m, l + prefix.1);
    }
    Ok(acc / spins)
}

fn scaled(m: CMat) -> (CMat, f64) {
    let s = m.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if s > 0.0 {
        (m / c(s, 0.0), s.ln())
    } else {
        (m, 0.0)
    }
}

fn check_nonzero(value: C64, reference: &CMat) -> Result<()> {
    if value.norm() <= 1e-12 * reference.norm() || value.norm() == 0.0 {
        return Err(Error::ZeroNorm);
    }
    Ok(())
}

/// Twenty stratified samples of `g` in `(0, 2π)`.
pub fn default_g_samples(seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let count = 20;
    (0..count).map(|k| 2.0 * PI * (k as f64 + rng.random_range(0.05..0.95)) / count as f64).collect()
}

/// `max_g ‖u_g^{⊗N}ψ − e^{igNm}ψ‖ / ‖ψ‖` with `u_g = e^{ig s_z}`.
///
/// The difference of the two states is itself a periodic MPS of bond
/// dimension `2D` (a direct sum with one sign flip), and its norm is taken
/// with the QR sweep of [`log_norm`], which stays accurate when the
/// difference nearly vanishes.
pub fn u1_invariance(mps: &Mps, spin: Spin, block: usize, g_samples: &[f64]) -> Result<f64> {
    let charges = check_dim(mps, spin, block)?;
    let m = magnetization(mps, spin, block)?;
    let base = log_norm(mps);
    let mut worst: f64 = 0.0;
    for &g in g_samples {
        let sites = (0..mps.n_sites())
            .map(|n| {
                let t = mps.site(n);
                let rotated = phased(t, |k| C64::from_polar(1.0, g * charges[k]));
                let sign = if n == 0 { -1.0 } else { 1.0 };
                let target = phased(t, |_| C64::from_polar(sign, g * m * block as f64));
                rotated.direct_sum(&target)
            })
            .collect::<Result<Vec<_>>>()?;
        let diff = Mps::from_sites(sites)?;
        worst = worst.max((log_norm(&diff) - base).exp());
    }
    Ok(worst)
}

/// The same residual from the overlap `⟨ψ|u_g^{⊗N}|ψ⟩` of a mixed transfer
/// operator: `√(2 − 2 Re e^{−igNm}⟨u⟩/⟨ψ|ψ⟩)`. Cancellation limits it to
/// about `√ε`.
pub fn u1_invariance_overlap(mps: &Mps, spin: Spin, block: usize, g_samples: &[f64]) -> Result<f64> {
    let charges = check_dim(mps, spin, block)?;
    let m = magnetization(mps, spin, block)?;
    let norm = crate::transfer::overlap(mps, mps)?;
    let mut worst: f64 = 0.0;
    for &g in g_samples {
        let sites: Vec<SiteTensor> =
            (0..mps.n_sites()).map(|n| phased(mps.site(n), |k| C64::from_polar(1.0, g * charges[k]))).collect();
        let rotated = Mps::from_sites(sites)?;
        let ov = crate::transfer::overlap(&rotated, mps)? / norm;
        let phase = C64::from_polar(1.0, -g * m * (mps.n_sites() * block) as f64);
        let sq = (2.0 - 2.0 * (phase * ov).re).max(0.0);
        worst = worst.max(sq.sqrt());
    }
    Ok(worst)
}

fn phased(t: &SiteTensor, f: impl Fn(usize) -> C64) -> SiteTensor {
    let kraus = t.kraus().iter().enumerate().map(|(k, a)| a * f(k)).collect();
    SiteTensor::new(kraus).expect("same shapes")
}

/// Continued-fraction reconstruction of `J − m = q/p` with `p ≤ max_den`
/// and `|J − m − q/p| < tol`.
pub fn fractionalize(m: f64, spin: Spin, max_den: u64, tol: f64) -> Result<(u64, u64)> {
    let j = spin.value();
    let x = j - m;
    if !x.is_finite() || x < -tol || x > 2.0 * j + tol {
        return Err(Error::InvalidArgument(format!("J - m = {x} lies outside [0, 2J]")));
    }
    let x = x.clamp(0.0, 2.0 * j);
    let no_rational = || Error::NoRational { value: x, max_den, tol };
    // convergents h/k
    let (mut h_prev, mut h) = (1u64, x.floor() as u64);
    let (mut k_prev, mut k) = (0u64, 1u64);
    let mut rem = x - x.floor();
    loop {
        if k > max_den {
            return Err(no_rational());
        }
        if (x - h as f64 / k as f64).abs() < tol {
            let g = num_integer::gcd(h, k).max(1);
            return Ok((k / g, h / g));
        }
        if rem < 1e-15 {
            return Err(no_rational());
        }
        let inv = 1.0 / rem;
        let a = inv.floor();
        rem = inv - a;
        let a = a as u64;
        let h_next = a.checked_mul(h).and_then(|v| v.checked_add(h_prev)).ok_or_else(no_rational)?;
        let k_next = a.checked_mul(k).and_then(|v| v.checked_add(k_prev)).ok_or_else(no_rational)?;
        (h_prev, h, k_prev, k) = (h, h_next, k, k_next);
    }
}

/// Whether `p (J − m)` is an integer.
pub fn lsm_check(spin: Spin, m: Rational64, p: u64) -> bool {
    ((spin.rational() - m) * Rational64::from_integer(p as i64)).is_integer()
}

/// Smallest `γ` with every period dividing `γp`, and whether every period is
/// a multiple of `p`.
pub fn period_consistency(periods: &[usize], p: usize) -> (usize, bool) {
    let p = p.max(1);
    let l = periods.iter().fold(p, |acc, &b| num_integer::lcm(acc, b.max(1)));
    let ok = periods.iter().all(|&b| b % p == 0);
    (l / p, ok)
}

#[derive(Clone, Debug, Serialize)]
pub struct SymmetryReport {
    #[serde(rename = "J")]
    pub j: f64,
    pub m: f64,
    pub m_rational: String,
    pub p: u64,
    pub q: u64,
    pub gamma: usize,
    pub residual: f64,
    pub symmetric: bool,
    /// Block periods measured in spins.
    pub periods: Vec<usize>,
    pub periods_consistent: bool,
}

/// Magnetization, fractionalization, invariance residual and block periods
/// of a uniform state whose sites hold `block` spins each.
pub fn analyze_symmetry(mps: &Mps, spin: Spin, block: usize, cfg: &Config, seed: u64) -> Result<SymmetryReport> {
    let tensor = mps
        .uniform_tensor()
        .ok_or_else(|| Error::InvalidArgument("symmetry analysis needs a uniform MPS".into()))?;
    let m = magnetization(mps, spin, block)?;
    let residual = u1_invariance(mps, spin, block, &default_g_samples(seed))?;
    let (p, q) = fractionalize(m, spin, cfg.caps.max_denominator, cfg.tol.rational)?;
    let cf = canonicalize(tensor, cfg)?;
    let periods: Vec<usize> = cf.periods().iter().map(|b| b * block).collect();
    let (gamma, periods_consistent) = period_consistency(&periods, p as usize);
    let m_exact = spin.rational() - Rational64::new(q as i64, p as i64);
    Ok(SymmetryReport {
        j: spin.value(),
        m,
        m_rational: m_exact.to_string(),
        p,
        q,
        gamma,
        residual,
        symmetric: residual <= cfg.tol.symmetry,
        periods,
        periods_consistent,
    })
}
