//! Numerical tolerances and resource caps.
//!
//! Every threshold used by the library is a field here. The defaults are the
//! documented values; the CLI overrides them with `--tolerance key=value` and
//! `--cap key=value`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Eigenvalues with `|λ| > (1 - peripheral) ρ` count as peripheral.
    pub peripheral: f64,
    /// Relative singular-value threshold for ranks, supports and kernels.
    pub rank: f64,
    /// Density eigenvalues in `[-clip, 0)` are set to zero.
    pub clip: f64,
    /// Absolute error gate for rational reconstruction of `J - m`.
    pub rational: f64,
    /// Maximum U(1) residual for a state to count as symmetric.
    pub symmetry: f64,
    /// Largest admissible condition number of a gauge matrix.
    pub gauge_condition: f64,
    /// Normalized overlap above which two canonical blocks are the same state.
    pub distinct_overlap: f64,
    /// Required accuracy of the canonical-form conditions.
    pub canonical: f64,
    /// Slack on `S(ρ_L) >= log p`.
    pub theorem1: f64,
    /// Slack on `deviation <= D |λ₂|ⁿ`.
    pub gram: f64,
    /// Floor for comparisons against bounds that vanish exactly while the
    /// measured quantity carries exponentially small finite-size terms.
    pub finite_size: f64,
    /// Absolute slack on exact inequalities evaluated in floating point.
    pub inequality: f64,
    /// Required decay of the boundary-channel correction before the
    /// boundary state is considered converged.
    pub boundary: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            peripheral: 1e-8,
            rank: 1e-10,
            clip: 1e-10,
            rational: 1e-9,
            symmetry: 1e-9,
            gauge_condition: 1e12,
            distinct_overlap: 0.99,
            canonical: 1e-8,
            theorem1: 1e-6,
            gram: 1e-8,
            finite_size: 1e-10,
            inequality: 1e-10,
            boundary: 1e-14,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Caps {
    /// Largest `d^N` for which a full state vector is built.
    pub state_vector: usize,
    /// Largest `d^L` for a dense reduced density matrix.
    pub region: usize,
    /// Denominator cap for rational reconstruction.
    pub max_denominator: u64,
    /// Refinement passes allowed in canonicalization.
    pub canonical_iterations: usize,
    /// Attempts at drawing a primitive boundary channel.
    pub channel_retries: usize,
    /// Longest word length explored when searching for injectivity.
    pub injectivity_length: usize,
    /// System size used by the block-distinctness overlap test.
    pub distinct_length: usize,
    /// Longest boundary tail (number of channel sites) ever built.
    pub boundary_tail: usize,
}

impl Default for Caps {
    fn default() -> Self {
        Caps {
            state_vector: 1 << 20,
            region: 1 << 14,
            max_denominator: 64,
            canonical_iterations: 8,
            channel_retries: 16,
            injectivity_length: 32,
            distinct_length: 50,
            boundary_tail: 4096,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Config {
    pub tol: Tolerances,
    pub caps: Caps,
}

impl Config {
    pub fn set_tolerance(&mut self, key: &str, value: f64) -> Result<()> {
        let t = &mut self.tol;
        let slot = match key {
            "peripheral" => &mut t.peripheral,
            "rank" => &mut t.rank,
            "clip" => &mut t.clip,
            "rational" => &mut t.rational,
            "symmetry" => &mut t.symmetry,
            "gauge_condition" => &mut t.gauge_condition,
            "distinct_overlap" => &mut t.distinct_overlap,
            "canonical" => &mut t.canonical,
            "theorem1" => &mut t.theorem1,
            "gram" => &mut t.gram,
            "finite_size" => &mut t.finite_size,
            "inequality" => &mut t.inequality,
            "boundary" => &mut t.boundary,
            _ => return Err(Error::InvalidArgument(format!("unknown tolerance `{key}`"))),
        };
        if !(value.is_finite() && value >= 0.0) {
            return Err(Error::InvalidArgument(format!("tolerance `{key}` must be finite and nonnegative")));
        }
        *slot = value;
        Ok(())
    }

    pub fn set_cap(&mut self, key: &str, value: u64) -> Result<()> {
        let c = &mut self.caps;
        match key {
            "state_vector" => c.state_vector = value as usize,
            "region" => c.region = value as usize,
            "max_denominator" => c.max_denominator = value,
            "canonical_iterations" => c.canonical_iterations = value as usize,
            "channel_retries" => c.channel_retries = value as usize,
            "injectivity_length" => c.injectivity_length = value as usize,
            "distinct_length" => c.distinct_length = value as usize,
            "boundary_tail" => c.boundary_tail = value as usize,
            _ => return Err(Error::InvalidArgument(format!("unknown cap `{key}`"))),
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_by_name() {
        let mut cfg = Config::default();
        cfg.set_tolerance("peripheral", 1e-6).unwrap();
        cfg.set_cap("region", 256).unwrap();
        assert_eq!(cfg.tol.peripheral, 1e-6);
        assert_eq!(cfg.caps.region, 256);
        assert!(cfg.set_tolerance("nope", 1.0).is_err());
        assert!(cfg.set_tolerance("rank", -1.0).is_err());
    }
}
