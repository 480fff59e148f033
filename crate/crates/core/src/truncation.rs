//! Bond truncation `Ã_i = P A_i P`, `Λ̃ = P Λ P` onto the `D̃` largest
//! fixed-point weights, the distance bounds it satisfies, and the pipeline
//! that turns a small Renyi entropy into a nearby boundary-injective state.

use serde::Serialize;

use crate::canonical::{canonicalize, CanonicalBlock};
use crate::config::Config;
use crate::entanglement::{region_spectrum, region_term, renyi};
use crate::error::{check_cap, Error, Result};
use crate::expander::{build_boundary_state, make_boundary_channel};
use crate::linalg::{self, c, CMat, CVec};
use crate::mps::{Mps, SiteTensor};
use crate::region::{distance, fixed_point_core, RegionTerm};

/// Renyi index at which the entropy hypothesis is evaluated.
pub const ALPHA: f64 = 1.0 / 6.0;
/// Slack on the ordering between the fixed-point tail and the tail of the
/// long-region spectrum, which only agree up to finite-region corrections.
const ORDERING_SLACK: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct TruncationResult {
    /// `P A_i P` restricted to the kept subspace.
    pub tensor: SiteTensor,
    /// The `D̃` largest entries of `Λ`, not renormalized.
    pub lambda: Vec<f64>,
    pub delta: f64,
    pub d_tilde: usize,
}

impl TruncationResult {
    pub fn lambda_matrix(&self) -> CMat {
        diag(&self.lambda)
    }

    pub fn tr_sqrt_lambda(&self) -> f64 {
        self.lambda.iter().map(|v| v.max(0.0).sqrt()).sum()
    }
}

fn diag(values: &[f64]) -> CMat {
    CMat::from_diagonal(&CVec::from_iterator(values.len(), values.iter().map(|&v| c(v, 0.0))))
}

pub fn project_bond(block: &CanonicalBlock, d_tilde: usize) -> Result<TruncationResult> {
    let dim = block.dim();
    if d_tilde == 0 || d_tilde > dim {
        return Err(Error::InvalidArgument(format!("truncated dimension must lie in 1..={dim}, got {d_tilde}")));
    }
    if block.lambda.windows(2).any(|w| w[0] < w[1]) {
        return Err(Error::Precondition("fixed point must be sorted descending".into()));
    }
    let kraus = block.tensor.kraus().iter().map(|k| k.view((0, 0), (d_tilde, d_tilde)).into_owned()).collect();
    Ok(TruncationResult {
        tensor: SiteTensor::new(kraus)?,
        lambda: block.lambda[..d_tilde].to_vec(),
        delta: block.lambda[d_tilde..].iter().sum(),
        d_tilde,
    })
}

/// `(bound_2, bound_1)` on `‖ρ_A − ρ_Ã‖` in the Schatten 2- and 1-norms.
pub fn bounds(delta: f64, l: usize, d_tilde: usize, tr_sqrt_lambda: f64) -> (f64, f64) {
    let root = (l as f64).sqrt() * delta.powf(0.25);
    let tail = (2 * l + 3) as f64 * delta;
    (2.0 * tr_sqrt_lambda * root + tail, 2.0 * 2f64.sqrt() * d_tilde as f64 * root + tail)
}

/// `((1 − α)/α) (S_α − log(D̃/(1 − α)))`, an upper bound on the log of the
/// spectral weight beyond the `D̃` largest eigenvalues.
pub fn log_delta_bound(s_alpha: f64, alpha: f64, d_tilde: usize) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Ok((1.0 - alpha) / alpha * (s_alpha - (d_tilde as f64 / (1.0 - alpha)).ln()))
}

#[derive(Clone, Debug, Serialize)]
pub struct Intermediates {
    /// `‖ρ_A − σ_A‖₁`, equal to `δ`.
    pub rho_sigma_1: f64,
    /// `‖σ_A − σ_{A,P}‖₁ ≤ 2δ`.
    pub sigma_sigmap_1: f64,
    pub sigmap_phi_2: f64,
    pub sigmap_phi_1: f64,
    /// `2 tr(Λ̃^{1/2}) √L δ^{1/4}`, the bound on `‖σ_{A,P} − φ_Ã‖₂`.
    pub sigmap_phi_2_bound: f64,
    /// `‖φ_Ã − ρ_Ã‖₁ = 1 − tr Ẽ^L(Λ)`.
    pub phi_rho_1: f64,
    /// `‖Ẽ^L(Λ) − Λ‖₁`.
    pub lemma9_lhs: f64,
    /// `2Lδ`.
    pub lemma9_rhs: f64,
    /// `tr Ẽ^L(Λ)` from direct iteration of the map.
    pub lemma9_trace: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct TruncationReport {
    #[serde(rename = "D")]
    pub bond_dim: usize,
    #[serde(rename = "D_tilde")]
    pub d_tilde: usize,
    #[serde(rename = "L")]
    pub region_len: usize,
    pub delta: f64,
    pub bound_2: f64,
    pub bound_1: f64,
    pub actual_2: f64,
    pub actual_1: f64,
    /// Trace of the unnormalized `φ_Ã`, from its Gram matrix.
    pub trace_phi: f64,
    pub intermediate: Intermediates,
    pub bounds_hold: bool,
    pub lemma9_holds: bool,
    pub lemma10_holds: bool,
}

impl TruncationReport {
    pub fn pass(&self) -> bool {
        self.bounds_hold && self.lemma9_holds && self.lemma10_holds
    }
}

/// `Ẽ^L(Λ)` for `Ẽ(X) = Σ Ã† X Ã`, embedded back into the full bond space.
fn heisenberg_power(trunc: &TruncationResult, dim: usize, l: usize) -> CMat {
    let mut x = trunc.lambda_matrix();
    for _ in 0..l {
        x = trunc.tensor.kraus().iter().map(|a| a.adjoint() * &x * a).fold(CMat::zeros(x.nrows(), x.ncols()), |s, t| s + t);
    }
    let mut out = CMat::zeros(dim, dim);
    out.view_mut((0, 0), (trunc.d_tilde, trunc.d_tilde)).copy_from(&x);
    out
}

/// Distances between the thermodynamic reduced densities of the block and
/// of its truncation on `l` sites, the two bounds, and the intermediate
/// quantities of the proof.
pub fn verify_truncation(block: &CanonicalBlock, d_tilde: usize, l: usize, cfg: &Config) -> Result<TruncationReport> {
    if l == 0 {
        return Err(Error::InvalidArgument("region length must be positive".into()));
    }
    check_cap("region", block.tensor.phys_dim(), l, cfg.caps.region)?;
    let dim = block.dim();
    let trunc = project_bond(block, d_tilde)?;
    let delta = trunc.delta;

    let lambda = block.lambda_matrix();
    let mut padded = trunc.lambda.clone();
    padded.resize(dim, 0.0);
    let lambda_t = diag(&padded);
    let proj = diag(&(0..dim).map(|k| if k < d_tilde { 1.0 } else { 0.0 }).collect::<Vec<_>>());
    let id = linalg::identity(dim);

    let a_sites = vec![block.tensor.clone(); l];
    let rho_a = RegionTerm::new(a_sites.clone(), fixed_point_core(&lambda, &id))?;
    let rho_a = rho_a.scaled(1.0 / rho_a.trace());
    let sigma_a = RegionTerm::new(a_sites.clone(), fixed_point_core(&lambda_t, &id))?;
    let sigma_ap = RegionTerm::new(a_sites, fixed_point_core(&lambda_t, &proj))?;
    let phi = RegionTerm::new(vec![trunc.tensor.clone(); l], fixed_point_core(&trunc.lambda_matrix(), &linalg::identity(d_tilde)))?;
    let trace_phi = phi.trace();
    if !(trace_phi > 0.0) {
        return Err(Error::ZeroNorm);
    }
    let rho_t = phi.scaled(1.0 / trace_phi);

    let (actual_1, actual_2) = distance(&rho_a, &rho_t);
    let (sigmap_phi_1, sigmap_phi_2) = distance(&sigma_ap, &phi);
    let (bound_2, bound_1) = bounds(delta, l, d_tilde, trunc.tr_sqrt_lambda());
    let e_l = heisenberg_power(&trunc, dim, l);
    let lemma9_trace = linalg::trace(&e_l).re;
    let intermediate = Intermediates {
        rho_sigma_1: distance(&rho_a, &sigma_a).0,
        sigma_sigmap_1: distance(&sigma_a, &sigma_ap).0,
        sigmap_phi_2,
        sigmap_phi_1,
        sigmap_phi_2_bound: 2.0 * trunc.tr_sqrt_lambda() * (l as f64).sqrt() * delta.powf(0.25),
        phi_rho_1: (1.0 - trace_phi).abs(),
        lemma9_lhs: linalg::trace_norm_hermitian(&linalg::hermitian_part(&(e_l - &lambda))),
        lemma9_rhs: 2.0 * l as f64 * delta,
        lemma9_trace,
    };
    let slack = cfg.tol.inequality;
    let tail = (2 * l + 3) as f64 * delta;
    Ok(TruncationReport {
        bond_dim: dim,
        d_tilde,
        region_len: l,
        delta,
        bound_2,
        bound_1,
        actual_2,
        actual_1,
        trace_phi,
        bounds_hold: actual_2 <= bound_2 + slack && actual_1 <= bound_1 + slack,
        lemma9_holds: intermediate.lemma9_lhs <= intermediate.lemma9_rhs + slack
            && lemma9_trace >= 1.0 - intermediate.lemma9_rhs - slack,
        lemma10_holds: actual_2 <= sigmap_phi_2 + tail + slack && actual_1 <= sigmap_phi_1 + tail + slack,
        intermediate,
    })
}

#[derive(Clone, Debug)]
pub struct Theorem2Params {
    /// Region length `L` of the target interaction.
    pub region_len: usize,
    pub epsilon: f64,
    /// Length of the long region whose Renyi entropy is measured.
    pub renyi_region: usize,
    /// Overrides the default `D̃ = min(D, ⌊d^{(L−1)/2}⌋)`.
    pub d_tilde: Option<usize>,
    /// Also run the pipeline at `D̃ = 1`, where the truncation is never trivial.
    pub force_unit: bool,
    pub seed: u64,
}

impl Theorem2Params {
    pub fn new(region_len: usize, epsilon: f64, seed: u64) -> Self {
        Theorem2Params { region_len, epsilon, renyi_region: 40, d_tilde: None, force_unit: true, seed }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Theorem2Run {
    #[serde(rename = "D_tilde")]
    pub d_tilde: usize,
    /// `tr(Λ − Λ̃)`.
    pub delta: f64,
    /// Weight of the long-region spectrum beyond its `D̃` largest values.
    pub delta_region: f64,
    pub ordering_holds: bool,
    pub log_delta_bound: f64,
    pub log_delta_region: f64,
    pub log_delta_holds: bool,
    /// `4√2 d^{L/2} √L δ^{1/4}`.
    pub epsilon_prime: f64,
    /// `2√2 D̃ √L δ^{1/4} + (2L+3)δ`.
    pub appendix_bound_1: f64,
    pub epsilon_prime_le_epsilon: bool,
    #[serde(rename = "N")]
    pub n_sites: usize,
    pub channel_lambda2: f64,
    /// `‖ρ_{1..L}(boundary state) − ρ_Ã‖₁`.
    pub boundary_residual: f64,
    /// `‖ρ_A^L − ρ_{1..L}(boundary state)‖₁`.
    pub measured: f64,
    pub measured_le_epsilon_prime: bool,
    pub measured_lt_epsilon: bool,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct Theorem2Report {
    #[serde(rename = "L")]
    pub region_len: usize,
    pub d: usize,
    #[serde(rename = "D")]
    pub bond_dim: usize,
    pub epsilon: f64,
    pub alpha: f64,
    #[serde(rename = "R")]
    pub renyi_region: usize,
    pub s_alpha: f64,
    /// Right-hand side of the entropy hypothesis.
    pub hypothesis_rhs: f64,
    pub hypothesis_holds: bool,
    pub runs: Vec<Theorem2Run>,
    pub seed: u64,
    pub pass: bool,
}

/// `min(D, ⌊d^{(L−1)/2}⌋)`, at least one.
pub fn default_d_tilde(dim: usize, d: usize, l: usize) -> usize {
    let Some(pow) = (d as u128).checked_pow(l.saturating_sub(1) as u32) else {
        return dim;
    };
    let mut k = (pow as f64).sqrt() as u128;
    while k * k > pow {
        k -= 1;
    }
    while (k + 1) * (k + 1) <= pow {
        k += 1;
    }
    (k.min(dim as u128) as usize).max(1)
}

/// Right-hand side of the entropy hypothesis:
/// `(4/5) log ε + (1/10)(L log d − log L) − log(d/4)`.
pub fn hypothesis_rhs(epsilon: f64, l: usize, d: usize) -> f64 {
    let (l, d) = (l as f64, d as f64);
    0.8 * epsilon.ln() + 0.1 * (l * d.ln() - l.ln()) - (d / 4.0).ln()
}

fn trivial_channel(d: usize) -> Result<SiteTensor> {
    let mut kraus = vec![linalg::identity(1)];
    kraus.extend((1..d).map(|_| CMat::zeros(1, 1)));
    SiteTensor::new(kraus)
}

fn run_at(
    block: &CanonicalBlock,
    spectrum: &[f64],
    s_alpha: f64,
    d_tilde: usize,
    params: &Theorem2Params,
    cfg: &Config,
) -> Result<Theorem2Run> {
    let l = params.region_len;
    let d = block.tensor.phys_dim();
    let trunc = project_bond(block, d_tilde)?;
    let delta = trunc.delta;
    let delta_region: f64 = spectrum.iter().skip(d_tilde).sum();
    let log_bound = log_delta_bound(s_alpha, ALPHA, d_tilde)?;
    let log_delta_region = if delta_region > 0.0 { delta_region.ln() } else { f64::NEG_INFINITY };
    let root = (l as f64).sqrt() * delta.powf(0.25);
    let epsilon_prime = 4.0 * 2f64.sqrt() * (d as f64).powf(l as f64 / 2.0) * root;
    let appendix_bound_1 = bounds(delta, l, d_tilde, trunc.tr_sqrt_lambda()).1;

    let (channel, lambda2) = if d_tilde == 1 {
        (trivial_channel(d)?, 0.0)
    } else {
        let ch = make_boundary_channel(d_tilde, d, params.seed, cfg)?;
        (ch.tensor, ch.lambda2)
    };
    let tail = if lambda2 > 0.0 { (cfg.tol.boundary.ln() / lambda2.ln()).ceil() as usize + 1 } else { 1 };
    if tail > cfg.caps.boundary_tail {
        return Err(Error::CapExceeded { what: "boundary_tail", required: tail as u128, cap: cfg.caps.boundary_tail });
    }
    let n = l + tail + 1;
    let state = build_boundary_state(&trunc.tensor, &trunc.lambda_matrix(), l, n, &channel)?;
    let rho_state = region_term(&state, l, false)?;

    let id = linalg::identity(block.dim());
    let rho_a = RegionTerm::new(vec![block.tensor.clone(); l], fixed_point_core(&block.lambda_matrix(), &id))?;
    let rho_a = rho_a.scaled(1.0 / rho_a.trace());
    let phi = RegionTerm::new(
        vec![trunc.tensor.clone(); l],
        fixed_point_core(&trunc.lambda_matrix(), &linalg::identity(d_tilde)),
    )?;
    let rho_t = phi.scaled(1.0 / phi.trace());
    let measured = distance(&rho_a, &rho_state).0;
    let boundary_residual = distance(&rho_t, &rho_state).0;

    let ordering_holds = delta <= delta_region + ORDERING_SLACK;
    let log_delta_holds = log_delta_region <= log_bound;
    let measured_le_epsilon_prime = measured <= epsilon_prime + cfg.tol.finite_size;
    Ok(Theorem2Run {
        d_tilde,
        delta,
        delta_region,
        ordering_holds,
        log_delta_bound: log_bound,
        log_delta_region,
        log_delta_holds,
        epsilon_prime,
        appendix_bound_1,
        epsilon_prime_le_epsilon: epsilon_prime <= params.epsilon,
        n_sites: n,
        channel_lambda2: lambda2,
        boundary_residual,
        measured,
        measured_le_epsilon_prime,
        measured_lt_epsilon: measured < params.epsilon,
        pass: ordering_holds && log_delta_holds && measured_le_epsilon_prime,
    })
}

/// Evaluates the entropy hypothesis at `α = 1/6`, truncates the bond,
/// realizes the truncated reduced density on a boundary-injective chain,
/// and compares the measured distance with `ε′` and `ε`. A failed
/// hypothesis is reported, not raised.
pub fn theorem2_pipeline(mps: &Mps, params: &Theorem2Params, cfg: &Config) -> Result<Theorem2Report> {
    let tensor = mps
        .uniform_tensor()
        .ok_or_else(|| Error::InvalidArgument("the pipeline needs a uniform MPS".into()))?;
    let l = params.region_len;
    if l == 0 || !(params.epsilon > 0.0) {
        return Err(Error::InvalidArgument("need L >= 1 and epsilon > 0".into()));
    }
    if params.renyi_region == 0 {
        return Err(Error::InvalidArgument("the Renyi region must be nonempty".into()));
    }
    let cf = canonicalize(tensor, cfg)?;
    if !cf.is_injective() {
        return Err(Error::Precondition("the pipeline needs an injective state".into()));
    }
    let block = &cf.blocks[0];
    let d = tensor.phys_dim();
    let long = Mps::uniform(block.tensor.clone(), params.renyi_region)?;
    let spectrum = region_spectrum(&long, params.renyi_region, cfg, true)?.eigenvalues;
    let s_alpha = renyi(&spectrum, ALPHA)?;
    let rhs = hypothesis_rhs(params.epsilon, l, d);

    let chosen = params.d_tilde.unwrap_or_else(|| default_d_tilde(block.dim(), d, l));
    let mut dims = vec![chosen];
    if params.force_unit && chosen != 1 {
        dims.push(1);
    }
    let runs = dims
        .into_iter()
        .map(|k| run_at(block, &spectrum, s_alpha, k, params, cfg))
        .collect::<Result<Vec<_>>>()?;
    Ok(Theorem2Report {
        region_len: l,
        d,
        bond_dim: block.dim(),
        epsilon: params.epsilon,
        alpha: ALPHA,
        renyi_region: params.renyi_region,
        s_alpha,
        hypothesis_rhs: rhs,
        hypothesis_holds: s_alpha <= rhs,
        pass: runs.iter().all(|r| r.pass),
        runs,
        seed: params.seed,
    })
}
