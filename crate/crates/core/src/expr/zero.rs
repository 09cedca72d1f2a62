use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::eval::{Bindings, Compiled, SlotLayout};
use super::{ExprError, QFunction};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroMethod {
    /// Decided from the canonical form.
    Symbolic,
    /// Decided by evaluation at random points.
    Probabilistic,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ZeroCheck {
    pub is_zero: bool,
    pub method: ZeroMethod,
    /// Sample points at which the value was within tolerance of zero.
    pub agreeing: usize,
    /// Finite sample points evaluated.
    pub sampled: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct ZeroTestConfig {
    pub samples: usize,
    pub tolerance: f64,
    pub max_batches: usize,
    pub seed: u64,
    pub range: (f64, f64),
}

impl Default for ZeroTestConfig {
    fn default() -> Self {
        ZeroTestConfig {
            samples: 20,
            tolerance: 1e-9,
            max_batches: 5,
            seed: 0x51_c0_4e,
            range: (0.1, 3.0),
        }
    }
}

/// Layout treating every leaf (x, jets, parameters, opaque derivatives) as free.
pub(crate) fn free_layout(f: &QFunction) -> SlotLayout {
    let jets = f.order().map_or(1, |o| o as usize + 1);
    let params: Vec<String> = f.params().iter().map(|p| p.to_string()).collect();
    let mut free_funcs = Vec::new();
    for (name, max) in f.opaque_symbols() {
        for d in 0..=max {
            free_funcs.push((name.to_string(), d));
        }
    }
    SlotLayout {
        jets,
        params,
        free_funcs,
    }
}

impl QFunction {
    pub fn is_zero(&self) -> Result<ZeroCheck, ExprError> {
        self.is_zero_with(&ZeroTestConfig::default())
    }

    /// Canonical-form zero test with a random-evaluation fallback for
    /// expressions holding logarithm, exponential or non-monomial base atoms.
    pub fn is_zero_with(&self, cfg: &ZeroTestConfig) -> Result<ZeroCheck, ExprError> {
        if self.is_literal_zero() {
            return Ok(ZeroCheck {
                is_zero: true,
                method: ZeroMethod::Symbolic,
                agreeing: 0,
                sampled: 0,
            });
        }
        if !self.has_transcendental() {
            return Ok(ZeroCheck {
                is_zero: false,
                method: ZeroMethod::Symbolic,
                agreeing: 0,
                sampled: 0,
            });
        }
        let layout = free_layout(self);
        let compiled = Compiled::new(self, &layout, &Bindings::new())?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut slots = vec![0.0; layout.len()];
        let (mut agreeing, mut sampled) = (0, 0);
        for _ in 0..cfg.max_batches {
            for _ in 0..cfg.samples {
                if sampled == cfg.samples {
                    break;
                }
                for s in slots.iter_mut() {
                    *s = rng.gen_range(cfg.range.0..cfg.range.1);
                }
                match compiled.eval_with_magnitude(&slots) {
                    Ok((v, mag)) if v.is_finite() && mag.is_finite() => {
                        sampled += 1;
                        if v.abs() < cfg.tolerance * (1.0 + mag) {
                            agreeing += 1;
                        }
                    }
                    _ => {}
                }
            }
            if sampled == cfg.samples {
                break;
            }
        }
        if sampled == 0 {
            return Err(ExprError::SingularSamples);
        }
        Ok(ZeroCheck {
            is_zero: agreeing == sampled,
            method: ZeroMethod::Probabilistic,
            agreeing,
            sampled,
        })
    }

    /// `true` when the expression is (possibly probabilistically) zero.
    pub fn vanishes(&self) -> bool {
        self.is_zero().map(|z| z.is_zero).unwrap_or(false)
    }
}
