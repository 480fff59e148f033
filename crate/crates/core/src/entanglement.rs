//! Reduced density matrices of the first `L` sites, their spectra and
//! entropies, and the entropy bound for fractionally magnetized states.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::canonical::canonicalize;
use crate::config::Config;
use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat};
use crate::mps::Mps;
use crate::par::*;
use crate::region::{self, RegionTerm};
use crate::symmetry::{self, Spin};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum LogBase {
    #[default]
    #[serde(rename = "e")]
    E,
    #[serde(rename = "2")]
    Two,
}

impl LogBase {
    /// Converts a natural-log quantity to this base.
    pub fn convert(self, nats: f64) -> f64 {
        match self {
            LogBase::E => nats,
            LogBase::Two => nats / std::f64::consts::LN_2,
        }
    }
}

impl fmt::Display for LogBase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LogBase::E => "e",
            LogBase::Two => "2",
        })
    }
}

impl FromStr for LogBase {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "e" => Ok(LogBase::E),
            "2" => Ok(LogBase::Two),
            _ => Err(Error::InvalidArgument(format!("log base must be `e` or `2`, got `{s}`"))),
        }
    }
}

/// Factorized `ρ_L = V K V†` of the first `L` sites, with the core scaled so
/// that the trace is one. `thermodynamic` replaces the exact environment
/// by its infinite-length limit.
pub fn region_term(mps: &Mps, region_len: usize, thermodynamic: bool) -> Result<RegionTerm> {
    let n = mps.n_sites();
    if region_len > n {
        return Err(Error::InvalidArgument(format!("region length {region_len} exceeds N = {n}")));
    }
    let env = if thermodynamic {
        let t = mps
            .uniform_tensor()
            .ok_or_else(|| Error::InvalidArgument("the thermodynamic environment needs a uniform MPS".into()))?;
        region::thermodynamic_environment(t)?
    } else {
        region::exact_environment(mps, region_len)?
    };
    let core = region::core_from_environment(&env, mps.bond_dim());
    let term = RegionTerm::new(mps.site_range(0, region_len), core)?;
    let tr = term.trace();
    if !(tr.abs() > 0.0) || !tr.is_finite() {
        return Err(Error::ZeroNorm);
    }
    Ok(term.scaled(1.0 / tr))
}

/// Eigenvalues sorted descending, with negatives in `[-clip, 0)` and
/// positives at the eigensolver's roundoff floor set to zero. Anything more
/// negative than `-clip` is an error. Small-index Renyi entropies amplify
/// the floor, which is why it is removed.
pub fn clip_spectrum(mut values: Vec<f64>, clip: f64) -> Result<Vec<f64>> {
    values.sort_by(|a, b| b.total_cmp(a));
    let floor = values.first().map_or(0.0, |m| m.abs()) * values.len() as f64 * f64::EPSILON;
    for v in values.iter_mut() {
        if *v < -clip {
            return Err(Error::NegativeEigenvalue(*v));
        }
        if *v < floor {
            *v = 0.0;
        }
    }
    Ok(values)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegionSpectrum {
    pub eigenvalues: Vec<f64>,
    pub region_len: usize,
    pub n_sites: usize,
    pub thermodynamic: bool,
}

/// Spectrum of `ρ_L` from the bond-space Gram matrix, without forming the
/// `d^L × d^L` matrix. Zeros are padded up to `D²` entries.
pub fn region_spectrum(mps: &Mps, region_len: usize, cfg: &Config, thermodynamic: bool) -> Result<RegionSpectrum> {
    let term = region_term(mps, region_len, thermodynamic)?;
    let eigenvalues = clip_spectrum(region::factorized_eigenvalues(std::slice::from_ref(&term)), cfg.tol.clip)?;
    Ok(RegionSpectrum { eigenvalues, region_len, n_sites: mps.n_sites(), thermodynamic })
}

#[derive(Clone, Debug)]
pub struct ReducedDensity {
    pub matrix: CMat,
    pub region_len: usize,
    pub n_sites: usize,
    pub eigenvalues: Vec<f64>,
    pub thermodynamic: bool,
}

impl ReducedDensity {
    pub fn spectrum(&self) -> RegionSpectrum {
        RegionSpectrum {
            eigenvalues: self.eigenvalues.clone(),
            region_len: self.region_len,
            n_sites: self.n_sites,
            thermodynamic: self.thermodynamic,
        }
    }
}

/// Dense `ρ_L` on `d^L` states, trace one.
pub fn reduced_density(mps: &Mps, region_len: usize, cfg: &Config, thermodynamic: bool) -> Result<ReducedDensity> {
    let term = region_term(mps, region_len, thermodynamic)?;
    let matrix = linalg::hermitian_part(&term.dense(cfg.caps.region)?);
    let tr = linalg::trace(&matrix).re;
    let matrix = matrix / c(tr, 0.0);
    let eigenvalues = clip_spectrum(linalg::hermitian_eigenvalues(&matrix), cfg.tol.clip)?;
    Ok(ReducedDensity { matrix, region_len, n_sites: mps.n_sites(), eigenvalues, thermodynamic })
}

/// `tr(r s)`.
pub fn cross_purity(r: &ReducedDensity, s: &ReducedDensity) -> Result<f64> {
    if r.matrix.shape() != s.matrix.shape() {
        return Err(Error::Shape("cross purity needs equal region dimensions".into()));
    }
    Ok(linalg::trace(&(&r.matrix * &s.matrix)).re)
}

/// `S = −Σ λ log λ` in nats.
pub fn von_neumann(eigenvalues: &[f64]) -> f64 {
    eigenvalues.iter().filter(|&&v| v > 0.0).map(|&v| -v * v.ln()).sum()
}

/// `S_α = log(Σ λ^α) / (1 − α)` in nats.
pub fn renyi(eigenvalues: &[f64], alpha: f64) -> Result<f64> {
    if !(alpha > 0.0) || alpha == 1.0 || !alpha.is_finite() {
        return Err(Error::InvalidArgument(format!("Renyi index must be positive and not 1, got {alpha}")));
    }
    let s: f64 = eigenvalues.iter().filter(|&&v| v > 0.0).map(|&v| v.powf(alpha)).sum();
    Ok(s.ln() / (1.0 - alpha))
}

#[derive(Clone, Debug, Serialize)]
pub struct EntropyReport {
    #[serde(rename = "S")]
    pub s: f64,
    pub renyi: BTreeMap<String, f64>,
    pub log_base: LogBase,
    #[serde(rename = "L")]
    pub region_len: usize,
    #[serde(rename = "N")]
    pub n_sites: usize,
    pub thermodynamic: bool,
}

pub fn entropy(spectrum: &RegionSpectrum, alphas: &[f64], base: LogBase) -> Result<EntropyReport> {
    let mut map = BTreeMap::new();
    for &a in alphas {
        map.insert(format!("{a}"), base.convert(renyi(&spectrum.eigenvalues, a)?));
    }
    Ok(EntropyReport {
        s: base.convert(von_neumann(&spectrum.eigenvalues)),
        renyi: map,
        log_base: base,
        region_len: spectrum.region_len,
        n_sites: spectrum.n_sites,
        thermodynamic: spectrum.thermodynamic,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct Theorem1Entry {
    /// Region length in spins.
    #[serde(rename = "L")]
    pub spins: usize,
    #[serde(rename = "S")]
    pub s: f64,
    pub log_p: f64,
    pub margin: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct Theorem1Report {
    pub symmetry: symmetry::SymmetryReport,
    pub entries: Vec<Theorem1Entry>,
    pub pass: bool,
}

/// Checks `S(ρ_L) ≥ log p` for a U(1)-symmetric uniform state whose sites
/// hold `block` spins. Region lengths are given in spins and must be
/// multiples of `γp` and of `block`.
pub fn theorem1_verify(mps: &Mps, spin: Spin, block: usize, spins: &[usize], cfg: &Config, seed: u64) -> Result<Theorem1Report> {
    let sym = symmetry::analyze_symmetry(mps, spin, block, cfg, seed)?;
    if !sym.symmetric {
        return Err(Error::Precondition(format!(
            "state is not U(1) symmetric: residual {:e} above {:e}",
            sym.residual, cfg.tol.symmetry
        )));
    }
    let unit = sym.gamma * sym.p as usize;
    for &l in spins {
        if l == 0 || l % unit != 0 || l % block != 0 {
            return Err(Error::InvalidArgument(format!(
                "region of {l} spins is not a multiple of gamma*p = {unit} and of the block size {block}"
            )));
        }
    }
    let log_p = (sym.p as f64).ln();
    let entries = spins
        .par_iter()
        .map(|&l| {
            let spec = region_spectrum(mps, l / block, cfg, false)?;
            let s = von_neumann(&spec.eigenvalues);
            Ok(Theorem1Entry { spins: l, s, log_p, margin: s - log_p, pass: s >= log_p - cfg.tol.theorem1 })
        })
        .collect::<Result<Vec<_>>>()?;
    let pass = entries.iter().all(|e| e.pass) && sym.periods_consistent;
    Ok(Theorem1Report { symmetry: sym, entries, pass })
}

/// Canonical blocks of a uniform MPS must be checked for injectivity before
/// the asymptotic spectrum applies; this returns the `Λ ⊗ Λ` spectrum of the
/// single block.
pub fn injective_asymptotic_spectrum(mps: &Mps, cfg: &Config) -> Result<Vec<f64>> {
    let t = mps
        .uniform_tensor()
        .ok_or_else(|| Error::InvalidArgument("asymptotic spectrum needs a uniform MPS".into()))?;
    let cf = canonicalize(t, cfg)?;
    if !cf.is_injective() {
        return Err(Error::Precondition("state is not injective".into()));
    }
    Ok(crate::canonical::asymptotic_spectrum(&cf.blocks[0]))
}
