//! Injectivity of random tensors, Gram deviation of Hermitian channels, and
//! the primitive boundary channel used to realize a prescribed reduced
//! density matrix on the first sites of a non-uniform chain.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::Config;
use crate::entanglement::region_term;
use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat};
use crate::mps::{random_tensor, Mps, SiteTensor};
use crate::par::*;
use crate::region::{self, RegionTerm};
use crate::transfer::{injectivity_length, tensor_spectrum, transfer_operator};

/// Smallest entry modulus accepted in the dense unitary of a boundary channel.
const MIN_ENTRY: f64 = 1e-12;
/// Largest admissible deviation from trace preservation and unitality.
const CHANNEL_TOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct BoundaryChannel {
    pub tensor: SiteTensor,
    pub seed: u64,
    /// Number of dense unitaries drawn before a primitive channel was found.
    pub attempts: usize,
    pub lambda2: f64,
}

impl BoundaryChannel {
    pub fn dim(&self) -> usize {
        self.tensor.bond_dim()
    }
}

/// First `n` primes.
fn primes(n: usize) -> Vec<u64> {
    let mut out: Vec<u64> = Vec::with_capacity(n);
    let mut k = 2u64;
    while out.len() < n {
        if out.iter().take_while(|&&p| p * p <= k).all(|&p| k % p != 0) {
            out.push(k);
        }
        k += 1;
    }
    out
}

/// `max ‖Σ V†V − 1‖`, `max ‖Σ VV† − 1‖` entrywise.
fn channel_defects(t: &SiteTensor) -> (f64, f64) {
    let dim = t.bond_dim();
    let mut tp = -linalg::identity(dim);
    let mut un = -linalg::identity(dim);
    for k in t.kraus() {
        tp += k.adjoint() * k;
        un += k * k.adjoint();
    }
    let m = |x: &CMat| x.iter().map(|z| z.norm()).fold(0.0, f64::max);
    (m(&tp), m(&un))
}

#[derive(Clone, Debug, Serialize)]
pub struct PrimitivityReport {
    pub peripheral_count: usize,
    pub leading: [f64; 2],
    pub lambda2: f64,
    pub gap: f64,
    /// `|E(1) − 1|` and `|E*(1) − 1|` in max norm.
    pub fixed_point_defect: f64,
    pub primitive: bool,
}

/// Unique peripheral eigenvalue equal to one, fixed by the identity in both
/// directions, with a positive gap.
pub fn check_primitive(t: &SiteTensor, cfg: &Config) -> Result<PrimitivityReport> {
    let spec = tensor_spectrum(t, cfg.tol.peripheral)?;
    let (tp, un) = channel_defects(t);
    let lead = spec.eigenvalues[0];
    let lambda2 = spec.eigenvalues.get(1).map_or(0.0, |z| z.norm());
    let fixed_point_defect = tp.max(un);
    let primitive = spec.peripheral.len() == 1
        && (lead - linalg::ONE).norm() < cfg.tol.peripheral
        && fixed_point_defect < CHANNEL_TOL
        && spec.gap > 0.0;
    Ok(PrimitivityReport {
        peripheral_count: spec.peripheral.len(),
        leading: [lead.re, lead.im],
        lambda2,
        gap: spec.gap,
        fixed_point_defect,
        primitive,
    })
}

/// Channel with Kraus operators `V₀ = diag(e^{2πi frac√p_k})/√2`,
/// `V₁ = U/√2` for a Haar unitary `U` without vanishing entries, and zeros
/// for the remaining `d − 2` physical values.
pub fn make_boundary_channel(dim: usize, d: usize, seed: u64, cfg: &Config) -> Result<BoundaryChannel> {
    if dim < 2 {
        return Err(Error::InvalidArgument("boundary channel needs D >= 2".into()));
    }
    if d < 2 {
        return Err(Error::InvalidArgument("boundary channel needs d >= 2".into()));
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let phases = primes(dim)
        .iter()
        .map(|&p| {
            let theta = 2.0 * std::f64::consts::PI * (p as f64).sqrt().fract();
            c(theta.cos() * s, theta.sin() * s)
        })
        .collect::<Vec<_>>();
    let v0 = CMat::from_diagonal(&linalg::CVec::from_vec(phases));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for attempt in 1..=cfg.caps.channel_retries {
        let u = linalg::random_unitary(dim, &mut rng);
        if u.iter().any(|z| z.norm() < MIN_ENTRY) {
            continue;
        }
        let mut kraus = vec![v0.clone(), u * c(s, 0.0)];
        kraus.extend((2..d).map(|_| CMat::zeros(dim, dim)));
        let tensor = SiteTensor::new(kraus)?;
        let report = check_primitive(&tensor, cfg)?;
        if report.primitive {
            return Ok(BoundaryChannel { tensor, seed, attempts: attempt, lambda2: report.lambda2 });
        }
    }
    Err(Error::Convergence(format!(
        "no primitive boundary channel for D = {dim} after {} attempts (seed {seed})",
        cfg.caps.channel_retries
    )))
}

/// Non-uniform chain of `n` sites: `a` on the first `l`, the channel on the
/// following ones, and `V_i √Λ` on the last. Tracing out the tail leaves
/// `ρ_{ij} ∝ tr(T_j† Λ T_i)` on the first `l` sites, up to the channel's
/// mixing error `|λ₂|^{n−l}`.
pub fn build_boundary_state(a: &SiteTensor, lambda: &CMat, l: usize, n: usize, channel: &SiteTensor) -> Result<Mps> {
    let dim = a.bond_dim();
    if channel.bond_dim() != dim || lambda.nrows() != dim || lambda.ncols() != dim {
        return Err(Error::Shape(format!(
            "boundary channel and fixed point must act on the bond space of dimension {dim}"
        )));
    }
    if channel.phys_dim() != a.phys_dim() {
        return Err(Error::Shape("boundary channel must share the physical dimension".into()));
    }
    if n < l + 2 {
        return Err(Error::InvalidArgument(format!("need N > L + 1, got N = {n}, L = {l}")));
    }
    let root = linalg::psd_sqrt(&linalg::hermitian_part(lambda));
    let last = SiteTensor::new(channel.kraus().iter().map(|v| v * &root).collect())?;
    let mut sites = vec![a.clone(); l];
    sites.extend(std::iter::repeat_n(channel.clone(), n - l - 1));
    sites.push(last);
    Mps::from_sites(sites)
}

/// Trace-one target `ρ_{ij} = tr(T_j† Λ T_i)` on `l` sites.
pub fn boundary_target(a: &SiteTensor, lambda: &CMat, l: usize) -> Result<RegionTerm> {
    let term = RegionTerm::new(vec![a.clone(); l], region::fixed_point_core(lambda, &linalg::identity(a.bond_dim())))?;
    let tr = term.trace();
    Ok(term.scaled(1.0 / tr))
}

/// `‖ρ_{1..l} − target‖₁` for the boundary state of `n` sites.
pub fn boundary_density_error(state: &Mps, l: usize, target: &RegionTerm) -> Result<f64> {
    if l == 0 {
        return Ok(0.0);
    }
    let rho = region_term(state, l, false)?;
    Ok(region::distance(&rho, target).0)
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundaryReport {
    #[serde(rename = "L")]
    pub region_len: usize,
    /// `(N, ‖ρ − target‖₁)` pairs.
    pub errors: Vec<(usize, f64)>,
    pub predicted_rate: f64,
    pub fitted_rate: f64,
    pub rate_rel_error: f64,
    pub final_error: f64,
}

/// Chain lengths at which the predicted error `|λ₂|^{N−L}` runs from `1e-2`
/// down to `1e-10`, with `points` samples.
pub fn boundary_sweep_lengths(lambda2: f64, l: usize, points: usize, cfg: &Config) -> Result<Vec<usize>> {
    if !(lambda2 > 0.0 && lambda2 < 1.0) {
        return Err(Error::InvalidArgument(format!("decay rate must lie in (0, 1), got {lambda2}")));
    }
    let start = ((1e-2f64).ln() / lambda2.ln()).ceil().max(1.0) as usize;
    let stop = ((1e-10f64).ln() / lambda2.ln()).ceil() as usize;
    if stop > cfg.caps.boundary_tail {
        return Err(Error::CapExceeded { what: "boundary_tail", required: stop as u128, cap: cfg.caps.boundary_tail });
    }
    let points = points.max(2);
    let mut tails: Vec<usize> = (0..points).map(|k| start + (stop - start) * k / (points - 1)).collect();
    tails.dedup();
    Ok(tails.into_iter().map(|m| l + m.max(2)).collect())
}

/// Errors over an `N` sweep and the per-site decay factor fitted to them.
/// Points below the roundoff floor are left out of the fit.
pub fn verify_boundary_density(
    a: &SiteTensor,
    lambda: &CMat,
    l: usize,
    channel: &BoundaryChannel,
    lengths: &[usize],
) -> Result<BoundaryReport> {
    let target = boundary_target(a, lambda, l)?;
    let errors = lengths
        .par_iter()
        .map(|&n| {
            let state = build_boundary_state(a, lambda, l, n, &channel.tensor)?;
            Ok((n, boundary_density_error(&state, l, &target)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let fit: Vec<(f64, f64)> = errors.iter().filter(|(_, e)| *e > 1e-13).map(|&(n, e)| (n as f64, e.ln())).collect();
    let fitted_rate = if fit.len() >= 2 {
        let (xs, ys): (Vec<f64>, Vec<f64>) = fit.into_iter().unzip();
        linalg::linear_fit(&xs, &ys).0.exp()
    } else {
        f64::NAN
    };
    let predicted_rate = channel.lambda2;
    Ok(BoundaryReport {
        region_len: l,
        final_error: errors.last().map_or(0.0, |e| e.1),
        errors,
        predicted_rate,
        fitted_rate,
        rate_rel_error: (fitted_rate - predicted_rate).abs() / predicted_rate,
    })
}

/// Kraus set `{U/2, U†/2, V/2, V†/2}` for Haar unitaries `U, V`: closed
/// under adjoints, unital and trace preserving.
pub fn hermitian_expander_tensor<R: rand::Rng + ?Sized>(dim: usize, rng: &mut R) -> SiteTensor {
    let u = linalg::random_unitary(dim, rng);
    let v = linalg::random_unitary(dim, rng);
    let h = c(0.5, 0.0);
    SiteTensor::new(vec![&u * h, u.adjoint() * h, &v * h, v.adjoint() * h]).expect("equal shapes")
}

#[derive(Clone, Debug, Serialize)]
pub struct GramDeviation {
    pub n: usize,
    pub deviation: f64,
    pub bound: f64,
    pub lambda2: f64,
    pub pass: bool,
}

/// Second largest eigenvalue modulus of a Hermitian channel's transfer
/// matrix, after checking that it is Hermitian, unital and trace preserving.
pub fn hermitian_lambda2(a: &SiteTensor) -> Result<f64> {
    let e = transfer_operator(a, None)?.matrix;
    let asym = linalg::max_abs_diff(&e, &e.adjoint());
    let (tp, un) = channel_defects(a);
    if asym > CHANNEL_TOL || tp > CHANNEL_TOL || un > CHANNEL_TOL {
        return Err(Error::InvalidArgument(format!(
            "channel is not Hermitian and doubly stochastic (asymmetry {asym:e}, defects {tp:e}, {un:e})"
        )));
    }
    let mut ev: Vec<f64> = linalg::hermitian_eigenvalues(&linalg::hermitian_part(&e)).iter().map(|v| v.abs()).collect();
    ev.sort_by(|x, y| y.total_cmp(x));
    Ok(ev.get(1).copied().unwrap_or(0.0))
}

fn deviation_from_power(en: &CMat, dim: usize) -> f64 {
    // ⟨Γ(Y), Γ(X)⟩ for X = |a⟩⟨c|, Y = |a'⟩⟨c'| is ℰⁿ[(c,c'),(a,a')]
    let g = CMat::from_fn(dim * dim, dim * dim, |row, col| {
        let (a1, c1) = (row / dim, row % dim);
        let (a0, c0) = (col / dim, col % dim);
        en[(c0 * dim + c1, a0 * dim + a1)]
    });
    linalg::op_norm(&(g - linalg::identity(dim * dim) * c(1.0 / dim as f64, 0.0)))
}

/// Operator norm of `Γ_n*Γ_n − 1/D` on `M_D`, where
/// `Γ_n(X) = Σ_w tr(X T_w) |w⟩`, against the bound `D |λ₂|ⁿ`.
pub fn gram_deviation(a: &SiteTensor, n: usize, cfg: &Config) -> Result<GramDeviation> {
    let lambda2 = hermitian_lambda2(a)?;
    let dim = a.bond_dim();
    let en = linalg::mat_pow(&transfer_operator(a, None)?.matrix, n);
    let deviation = deviation_from_power(&en, dim);
    let bound = dim as f64 * lambda2.powi(n as i32);
    Ok(GramDeviation { n, deviation, bound, lambda2, pass: deviation <= bound + cfg.tol.gram })
}

#[derive(Clone, Debug, Serialize)]
pub struct InjectivityThreshold {
    pub lambda2: f64,
    /// First `n` with `D |λ₂|ⁿ < 1/D²`.
    pub n_bound: usize,
    /// First `n` with `|λ₂|ⁿ < 1/D²`.
    pub n_spectral: usize,
    /// First `n` with measured deviation below `1/D²`.
    pub n_deviation: Option<usize>,
    pub injectivity_length: Option<usize>,
    pub pass: bool,
}

/// Compares the spectral injectivity thresholds with the measured
/// injectivity length of a Hermitian-channel tensor.
pub fn injectivity_threshold(a: &SiteTensor, cfg: &Config) -> Result<InjectivityThreshold> {
    let lambda2 = hermitian_lambda2(a)?;
    let dim = a.bond_dim() as f64;
    let target = 1.0 / (dim * dim);
    // first n with scale·λ₂ⁿ < 1/D²
    let first = |scale: f64| -> usize {
        if lambda2 == 0.0 {
            return 1;
        }
        let x = (target / scale).ln() / lambda2.ln();
        (x.floor() as usize + 1).max(1)
    };
    let n_bound = first(dim);
    let n_spectral = first(1.0);
    let e = transfer_operator(a, None)?.matrix;
    let mut en = linalg::identity(e.nrows());
    let mut n_deviation = None;
    for n in 1..=n_bound {
        en = &e * en;
        if deviation_from_power(&en, a.bond_dim()) < target {
            n_deviation = Some(n);
            break;
        }
    }
    let inj = injectivity_length(a, cfg.caps.injectivity_length, cfg.tol.rank);
    let within = |n: usize| inj.is_some_and(|l| l <= n);
    let pass = within(n_bound) && within(n_spectral) && n_deviation.is_none_or(within);
    Ok(InjectivityThreshold { lambda2, n_bound, n_spectral, n_deviation, injectivity_length: inj, pass })
}

#[derive(Clone, Debug, Serialize)]
pub struct InjectivityReport {
    #[serde(rename = "D")]
    pub bond_dim: usize,
    pub d: usize,
    pub trials: usize,
    pub seed: u64,
    /// `⌈log_d D²⌉`, the dimension-counting minimum.
    #[serde(rename = "L_min")]
    pub l_min: usize,
    /// `2 log D / log d`.
    #[serde(rename = "L_log_ratio")]
    pub l_log_ratio: f64,
    pub histogram: BTreeMap<usize, usize>,
    /// Trials not injective within the length cap.
    pub not_injective: usize,
    /// Seeds of trials not injective at `L_min`.
    pub failures: Vec<u64>,
}

impl InjectivityReport {
    pub fn fraction_at_l_min(&self) -> f64 {
        (self.trials - self.failures.len()) as f64 / self.trials as f64
    }
}

/// Smallest `L ≥ 1` with `d^L ≥ D²`.
pub fn dimension_counting_length(dim: usize, d: usize) -> usize {
    let target = (dim * dim) as u128;
    let mut l = 1;
    let mut pow = d as u128;
    while pow < target {
        pow *= d as u128;
        l += 1;
    }
    l
}

/// Injectivity lengths of i.i.d. complex Gaussian tensors; trial `t` uses
/// seed `seed + t`.
pub fn injectivity_survey(dim: usize, d: usize, trials: usize, seed: u64, cfg: &Config) -> Result<InjectivityReport> {
    if trials == 0 || dim == 0 || d < 2 {
        return Err(Error::InvalidArgument("survey needs trials >= 1, D >= 1 and d >= 2".into()));
    }
    let l_min = dimension_counting_length(dim, d);
    let lengths: Vec<(u64, Option<usize>)> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let s = seed.wrapping_add(t);
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            (s, injectivity_length(&random_tensor(d, dim, &mut rng), cfg.caps.injectivity_length, cfg.tol.rank))
        })
        .collect();
    let mut histogram = BTreeMap::new();
    let mut not_injective = 0;
    let mut failures = Vec::new();
    for (s, len) in lengths {
        match len {
            Some(l) => *histogram.entry(l).or_insert(0) += 1,
            None => not_injective += 1,
        }
        if len.is_none_or(|l| l > l_min) {
            failures.push(s);
        }
    }
    Ok(InjectivityReport {
        bond_dim: dim,
        d,
        trials,
        seed,
        l_min,
        l_log_ratio: 2.0 * (dim as f64).ln() / (d as f64).ln(),
        histogram,
        not_injective,
        failures,
    })
}
