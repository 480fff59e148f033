//! Acceptance criteria AC1-AC11. Each criterion prints one line; the process
//! exits nonzero if any criterion fails.

use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use mpsent::canonical::canonicalize;
use mpsent::config::Config;
use mpsent::entanglement::{reduced_density, region_spectrum, theorem1_verify, von_neumann};
use mpsent::expander::{
    boundary_sweep_lengths, build_boundary_state, check_primitive, gram_deviation,
    hermitian_expander_tensor, injectivity_survey, injectivity_threshold, make_boundary_channel,
    verify_boundary_density,
};
use mpsent::mps::{
    apply_gauge, block_sites, ghz_tensor, random_tensor, to_state_vector, toy_fractional_mps, word_products, Mps,
    SiteTensor,
};
use mpsent::suite::{run_suite, SuiteOptions};
use mpsent::sweep::{random_injective_block, random_truncation_cases, run_truncation_cases};
use mpsent::symmetry::{magnetization, Spin};
use mpsent::transfer::overlap_decay;
use mpsent::truncation::{project_bond, theorem2_pipeline, Theorem2Params};

type C = Complex64;
type M = DMatrix<C>;

const TOYS: [(usize, usize); 4] = [(2, 1), (3, 1), (3, 2), (4, 1)];
const STATE_CAP: usize = 1 << 20;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

// ---------- independent oracles ----------

/// `ρ = tr_{L..N} |ψ⟩⟨ψ| / ⟨ψ|ψ⟩` for a big-endian amplitude vector.
fn partial_trace(psi: &[C], d: usize, n: usize, l: usize) -> M {
    let rest = d.pow((n - l) as u32);
    let m = M::from_fn(d.pow(l as u32), rest, |a, b| psi[a * rest + b]);
    let rho = &m * m.adjoint();
    let tr: f64 = (0..rho.nrows()).map(|i| rho[(i, i)].re).sum();
    rho / C::new(tr, 0.0)
}

fn entropy_dense(rho: &M) -> f64 {
    let h = (rho + rho.adjoint()) * C::new(0.5, 0.0);
    h.symmetric_eigen().eigenvalues.iter().filter(|&&v| v > 1e-15).map(|&v| -v * v.ln()).sum()
}

/// Per-spin `⟨S_z⟩` of a spin-1/2 state vector; index 0 is spin up.
fn magnetization_dense(psi: &[C], n: usize) -> f64 {
    let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
    let total: f64 = psi
        .iter()
        .enumerate()
        .map(|(idx, z)| {
            let downs = idx.count_ones() as f64;
            z.norm_sqr() * 0.5 * (n as f64 - 2.0 * downs)
        })
        .sum();
    total / (norm * n as f64)
}

fn state(mps: &Mps) -> Vec<C> {
    to_state_vector(mps, STATE_CAP).expect("state vector within cap").iter().copied().collect()
}

/// Spectral radius of `X ↦ Σ A X B†` by power iteration on the map itself.
fn mixed_radius_power(a: &SiteTensor, b: &SiteTensor) -> f64 {
    let (da, db) = (a.bond_dim(), b.bond_dim());
    let apply = |x: &M| a.kraus().iter().zip(b.kraus()).fold(M::zeros(da, db), |s, (ai, bi)| s + ai * x * bi.adjoint());
    let mut x = M::from_fn(da, db, |i, j| C::new(1.0 + 0.1 * i as f64, 0.3 * j as f64 - 0.2));
    let mut log_growth = Vec::new();
    for _ in 0..4000 {
        let y = apply(&x);
        let n = y.norm();
        log_growth.push(n.ln());
        x = y / C::new(n, 0.0);
    }
    // complex peripheral pairs make single-step ratios oscillate; average
    let tail = &log_growth[2000..];
    (tail.iter().sum::<f64>() / tail.len() as f64).exp()
}

/// `Γ_n*Γ_n` for `Γ_n(X) = Σ_w tr(X T_w)|w⟩`, from explicit words.
fn gram_from_words(a: &SiteTensor, n: usize) -> M {
    let dim = a.bond_dim();
    let words = word_products(&vec![a.clone(); n]);
    // row w, column (i,j): coefficient of X_{ij} in tr(X T_w) is T_w[j,i]
    let g = M::from_fn(words.len(), dim * dim, |w, k| words[w][(k % dim, k / dim)]);
    g.adjoint() * g
}

fn op_norm(m: &M) -> f64 {
    m.clone().svd(false, false).singular_values.iter().copied().fold(0.0, f64::max)
}

fn word_rank(a: &SiteTensor, l: usize) -> usize {
    let dim = a.bond_dim();
    let words = word_products(&vec![a.clone(); l]);
    let m = M::from_fn(dim * dim, words.len(), |k, w| words[w][(k / dim, k % dim)]);
    let sv = m.svd(false, false).singular_values;
    let top = sv.iter().copied().fold(0.0, f64::max);
    sv.iter().filter(|&&s| s > 1e-10 * top).count()
}

// ---------- criteria ----------

fn ac1(cfg: &Config) -> Outcome {
    let t0 = Instant::now();
    let mut worst_s: f64 = 0.0;
    let mut worst_m: f64 = 0.0;
    for &(p, q) in &TOYS {
        let n = 4 * p;
        let mps = toy_fractional_mps(p, q, n).unwrap();
        let psi = state(&mps);
        let m_exact = 0.5 - q as f64 / p as f64;
        worst_m = worst_m
            .max((magnetization(&mps, Spin::HALF, 1).unwrap() - m_exact).abs())
            .max((magnetization_dense(&psi, n) - m_exact).abs());
        for l in [p, 2 * p] {
            let lib = von_neumann(&region_spectrum(&mps, l, cfg, false).unwrap().eigenvalues);
            let oracle = entropy_dense(&partial_trace(&psi, 2, n, l));
            let log_p = (p as f64).ln();
            worst_s = worst_s.max((lib - log_p).abs()).max((oracle - log_p).abs());
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    outcome(
        worst_s <= 1e-9 && worst_m <= 1e-9 && secs < 10.0,
        format!("max|S-log p|={worst_s:.3e} max|m-m0|={worst_m:.3e} (tol 1e-9) runtime={secs:.2}s (<10s)"),
    )
}

fn random_gauge(dim: usize, seed: u64) -> M {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = random_tensor(1, dim, &mut rng).kraus()[0].clone();
    M::identity(dim, dim) + noise * C::new(0.3, 0.0)
}

fn ac2(cfg: &Config) -> Outcome {
    let t0 = Instant::now();
    let mut min_margin = f64::INFINITY;
    let mut all = true;
    for (k, &(p, q)) in TOYS.iter().enumerate() {
        let n = 4 * p;
        let mps = toy_fractional_mps(p, q, n).unwrap();
        let gauged = apply_gauge(&mps, &random_gauge(p, 100 + k as u64), cfg.tol.gauge_condition).unwrap();
        let blocked = block_sites(&mps, p).unwrap();
        for (st, block) in [(&gauged, 1), (&blocked, p)] {
            let r = theorem1_verify(st, Spin::HALF, block, &[p, 2 * p], cfg, 7).unwrap();
            all &= r.pass;
            for e in &r.entries {
                min_margin = min_margin.min(e.margin);
            }
        }
        // the gauged state vector must give the same entropies
        let psi = state(&gauged);
        for l in [p, 2 * p] {
            min_margin = min_margin.min(entropy_dense(&partial_trace(&psi, 2, n, l)) - (p as f64).ln());
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    outcome(
        all && min_margin >= -1e-6 && secs < 30.0,
        format!("min(S-log p)={min_margin:.3e} (>= -1e-6) runtime={secs:.2}s (<30s)"),
    )
}

fn ac3(cfg: &Config) -> Outcome {
    let cf = canonicalize(&ghz_tensor(2), cfg).unwrap();
    let weights: Vec<f64> = cf.blocks.iter().map(|b| b.weight).collect();
    let blocks_ok = cf.blocks.len() == 2 && weights.iter().all(|w| (w - 0.5).abs() < 1e-9);
    let n = 8;
    let mps = Mps::uniform(ghz_tensor(2), n).unwrap();
    let psi = state(&mps);
    let mut worst: f64 = 0.0;
    for l in 1..n {
        let lib = von_neumann(&region_spectrum(&mps, l, cfg, false).unwrap().eigenvalues);
        let oracle = entropy_dense(&partial_trace(&psi, 2, n, l));
        worst = worst.max((lib - 2f64.ln()).abs()).max((oracle - 2f64.ln()).abs());
    }
    outcome(blocks_ok && worst <= 1e-9, format!("blocks={} mu={weights:?} max|S-log 2|={worst:.3e} (tol 1e-9)", cf.blocks.len()))
}

fn ac4(cfg: &Config) -> Outcome {
    let mut worst: f64 = 0.0;
    for seed in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dim = 1 + (seed % 4) as usize;
        let n = 6 + (seed % 7) as usize;
        let l = 1 + (seed as usize % 6).min(n - 1);
        let mps = Mps::uniform(random_tensor(2, dim, &mut rng), n).unwrap();
        let lib = reduced_density(&mps, l, cfg, false).unwrap().matrix;
        let oracle = partial_trace(&state(&mps), 2, n, l);
        worst = worst.max((lib - oracle).iter().map(|z| z.norm()).fold(0.0, f64::max));
    }
    outcome(worst <= 1e-10, format!("max entrywise diff={worst:.3e} over 50 states (tol 1e-10)"))
}

fn ac5(cfg: &Config) -> Outcome {
    let lengths: Vec<usize> = (10..=40).collect();
    let mut worst_fit: f64 = 0.0;
    let mut worst_radius: f64 = 0.0;
    for k in 0..20u64 {
        let (da, db) = (1 + (k % 3) as usize, 1 + ((k / 3) % 3) as usize);
        let a = random_injective_block(2, da, 9000 + 2 * k, cfg).unwrap();
        let b = random_injective_block(2, db, 9001 + 2 * k, cfg).unwrap();
        let r = overlap_decay(&a.tensor, &b.tensor, &lengths).unwrap();
        worst_fit = worst_fit.max(r.rel_error);
        // canonical tensors have ρ(𝔼_A) = ρ(𝔼_B) = 1, so the predicted rate is log ρ(𝔼_{A,B})
        let oracle = mixed_radius_power(&a.tensor, &b.tensor).ln();
        worst_radius = worst_radius.max((oracle - r.predicted).abs() / oracle.abs());
    }
    outcome(
        worst_fit <= 0.05 && worst_radius <= 1e-3,
        format!("max rate rel error={worst_fit:.4} (<=0.05) predicted vs power-iteration rel diff={worst_radius:.2e}"),
    )
}

fn ac6(cfg: &Config) -> Outcome {
    let t0 = Instant::now();
    let cases = random_truncation_cases(200, 6, 6, &[2, 3], 2024);
    let rows = run_truncation_cases(&cases, cfg).unwrap();
    let slack = cfg.tol.inequality;
    let v1 = rows.iter().filter(|(_, r)| r.actual_1 > r.bound_1 + slack).count();
    let v2 = rows.iter().filter(|(_, r)| r.actual_2 > r.bound_2 + slack).count();
    let v9 = rows.iter().filter(|(_, r)| !r.lemma9_holds).count();
    // iterate Ẽ directly for each instance as the second route to Lemma 9
    let mut v9_oracle = 0;
    for (case, r) in cases.iter().zip(&rows) {
        let block = random_injective_block(case.d, case.dim, case.seed, cfg).unwrap();
        let tr = project_bond(&block, case.d_tilde).unwrap();
        let mut x = tr.lambda_matrix();
        for _ in 0..case.l {
            x = tr.tensor.kraus().iter().fold(M::zeros(x.nrows(), x.ncols()), |s, a| s + a.adjoint() * &x * a);
        }
        let mut diff = -block.lambda_matrix();
        let mut top = diff.view_mut((0, 0), (case.d_tilde, case.d_tilde));
        top += &x;
        let lhs: f64 = diff.symmetric_eigen().eigenvalues.iter().map(|v| v.abs()).sum();
        if lhs > 2.0 * case.l as f64 * r.1.delta + slack {
            v9_oracle += 1;
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    outcome(
        v1 + v2 + v9 + v9_oracle == 0 && secs < 120.0,
        format!("violations: norm1={v1} norm2={v2} lemma9={v9} lemma9_direct={v9_oracle} over 200 runtime={secs:.2}s (<120s)"),
    )
}

fn ac7(cfg: &Config) -> Outcome {
    let mut violations = 0;
    let mut threshold_failures = 0;
    let mut oracle_diff: f64 = 0.0;
    for dim in [2usize, 3, 4, 6] {
        for seed in 0..50u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 1000 * dim as u64);
            let a = hermitian_expander_tensor(dim, &mut rng);
            for n in 1..=10 {
                let g = gram_deviation(&a, n, cfg).unwrap();
                if !g.pass {
                    violations += 1;
                }
                if dim <= 3 && n <= 4 && seed < 5 {
                    let m = gram_from_words(&a, n) - M::identity(dim * dim, dim * dim) * C::new(1.0 / dim as f64, 0.0);
                    oracle_diff = oracle_diff.max((op_norm(&m) - g.deviation).abs());
                }
            }
            if !injectivity_threshold(&a, cfg).unwrap().pass {
                threshold_failures += 1;
            }
        }
    }
    outcome(
        violations == 0 && threshold_failures == 0 && oracle_diff < 1e-10,
        format!("deviation violations={violations} threshold failures={threshold_failures} explicit-word diff={oracle_diff:.2e}"),
    )
}

fn ac8(cfg: &Config) -> Outcome {
    let t0 = Instant::now();
    let mut parts = Vec::new();
    let mut pass = true;
    for (dim, d) in [(4usize, 2usize), (8, 2), (9, 3)] {
        let r = injectivity_survey(dim, d, 100, 31, cfg).unwrap();
        let frac = r.fraction_at_l_min();
        pass &= frac == 1.0;
        // full word rank at L_min recomputed from the explicit words
        for t in 0..5u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(31 + t);
            pass &= word_rank(&random_tensor(d, dim, &mut rng), r.l_min) == dim * dim;
        }
        parts.push(format!("(D={dim},d={d}) L_min={} frac={frac:.2}", r.l_min));
    }
    let secs = t0.elapsed().as_secs_f64();
    outcome(pass && secs < 60.0, format!("{} runtime={secs:.2}s (<60s)", parts.join(" ")))
}

fn ac9(cfg: &Config) -> Outcome {
    let l = 4;
    let mut pass = true;
    let mut worst_rate: f64 = 0.0;
    let mut worst_final: f64 = 0.0;
    for dim in [2usize, 3] {
        for seed in 0..3u64 {
            let block = random_injective_block(2, dim, 500 + seed, cfg).unwrap();
            let ch = make_boundary_channel(dim, 2, 600 + seed, cfg).unwrap();
            pass &= check_primitive(&ch.tensor, cfg).unwrap().primitive;
            let lengths = boundary_sweep_lengths(ch.lambda2, l, 6, cfg).unwrap();
            let r = verify_boundary_density(&block.tensor, &block.lambda_matrix(), l, &ch, &lengths).unwrap();
            worst_rate = worst_rate.max(r.rate_rel_error);
            worst_final = worst_final.max(r.final_error);
        }
    }
    // a short boundary chain checked against its state vector
    let block = random_injective_block(2, 2, 500, cfg).unwrap();
    let ch = make_boundary_channel(2, 2, 600, cfg).unwrap();
    let n = 12;
    let st = build_boundary_state(&block.tensor, &block.lambda_matrix(), l, n, &ch.tensor).unwrap();
    let lib = mpsent::entanglement::region_term(&st, l, false).unwrap().dense(1 << 12).unwrap();
    let lib = &lib / C::new((0..lib.nrows()).map(|i| lib[(i, i)].re).sum::<f64>(), 0.0);
    let oracle = partial_trace(&state(&st), 2, n, l);
    let dense_diff = (lib - &oracle).iter().map(|z| z.norm()).fold(0.0, f64::max);
    pass &= worst_rate <= 0.10 && worst_final < 1e-6 && dense_diff < 1e-10;
    outcome(
        pass,
        format!(
            "max rate rel error={worst_rate:.4} (<=0.10) max final error={worst_final:.3e} (<1e-6) state-vector diff={dense_diff:.2e}"
        ),
    )
}

fn ac10(cfg: &Config) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let t = loop {
        let t = random_tensor(2, 2, &mut rng);
        if canonicalize(&t, cfg).unwrap().is_injective() {
            break t;
        }
    };
    let mps = Mps::uniform(t, 64).unwrap();
    let r = theorem2_pipeline(&mps, &Theorem2Params::new(8, 0.5, 77), cfg).unwrap();
    let mut pass = r.pass;
    let mut parts = Vec::new();
    for run in &r.runs {
        let eps_prime = 4.0 * 2f64.sqrt() * 2f64.powf(4.0) * 8f64.sqrt() * run.delta.powf(0.25);
        pass &= (eps_prime - run.epsilon_prime).abs() <= 1e-12 * eps_prime.max(1.0);
        pass &= run.measured <= eps_prime + cfg.tol.finite_size && run.log_delta_holds;
        parts.push(format!(
            "D~={} measured={:.3e} eps'={:.3e} log_delta={:.3} <= {:.3}",
            run.d_tilde, run.measured, eps_prime, run.log_delta_region, run.log_delta_bound
        ));
    }
    outcome(pass, parts.join("; "))
}

fn ac11(cfg: &Config) -> Outcome {
    let opts = SuiteOptions::default();
    let t0 = Instant::now();
    let first = run_suite(&opts, cfg).unwrap();
    let elapsed = t0.elapsed();
    let second = run_suite(&opts, cfg).unwrap();
    let identical = first.to_string() == second.to_string();
    outcome(
        first.pass() && identical && elapsed < Duration::from_secs(300),
        format!(
            "checks={} failed={} runtime={:.2}s (<300s) byte-identical rerun={identical}",
            first.checks.len(),
            first.failures(),
            elapsed.as_secs_f64()
        ),
    )
}

fn main() {
    let cfg = Config::default();
    let criteria: [(&str, fn(&Config) -> Outcome); 11] = [
        ("AC1 toy model entropy and magnetization", ac1),
        ("AC2 entropy bound under gauge and blocking", ac2),
        ("AC3 GHZ blocks and entropy", ac3),
        ("AC4 reduced density oracle", ac4),
        ("AC5 overlap decay rate", ac5),
        ("AC6 truncation bounds sweep", ac6),
        ("AC7 gram deviation and threshold", ac7),
        ("AC8 injectivity survey", ac8),
        ("AC9 boundary state convergence", ac9),
        ("AC10 truncation pipeline", ac10),
        ("AC11 suite runtime and determinism", ac11),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let o = f(&cfg);
        failed += usize::from(!o.pass);
        println!("{} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    println!("acceptance: {}/{} passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
