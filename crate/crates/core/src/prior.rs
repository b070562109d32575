//! Switching-time stochastics: the a-priori distribution of the green switching
//! step, the crop-and-scale conditional switching probability, and the
//! realized switching process used by closed-loop simulation.

use serde::{Deserialize, Serialize};

use crate::error::{GlosaError, Result};

const SUM_TOLERANCE: f64 = 1e-12;

/// How the probability mass over the switching window is given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PriorMass {
    /// Equal mass on every step of the window. Conditional probabilities are
    /// evaluated from the step counts directly, with no accumulated rounding.
    Uniform,
    /// Explicit mass per step `k_min..=k_max`, renormalized at construction.
    Explicit(Vec<f64>),
}

/// A-priori distribution `P(k)` of the discrete switching step `k1` over
/// `[k_min, k_max]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwitchingPrior {
    k_min: usize,
    k_max: usize,
    mass: PriorMass,
}

impl SwitchingPrior {
    pub fn uniform(k_min: usize, k_max: usize) -> Result<Self> {
        Self::check_window(k_min, k_max)?;
        Ok(Self {
            k_min,
            k_max,
            mass: PriorMass::Uniform,
        })
    }

    /// Builds a prior from explicit per-step weights for `k_min..=k_max`.
    ///
    /// Weights must be non-negative with a positive total; they are
    /// renormalized so that the stored vector sums to one.
    pub fn explicit(k_min: usize, weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(GlosaError::InvalidPrior("empty probability vector".into()));
        }
        let k_max = k_min + weights.len() - 1;
        Self::check_window(k_min, k_max)?;
        if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(GlosaError::InvalidPrior(format!(
                "probability {w} is negative or not finite"
            )));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(GlosaError::InvalidPrior("total probability mass is zero".into()));
        }
        let probs = weights.iter().map(|w| w / total).collect();
        Ok(Self {
            k_min,
            k_max,
            mass: PriorMass::Explicit(probs),
        })
    }

    /// All mass on a single known switching step.
    pub fn certain(k1: usize) -> Result<Self> {
        Self::explicit(k1, vec![1.0])
    }

    fn check_window(k_min: usize, k_max: usize) -> Result<()> {
        if k_min < 1 {
            return Err(GlosaError::InvalidPrior("k_min must be at least 1".into()));
        }
        if k_max < k_min {
            return Err(GlosaError::InvalidPrior(format!(
                "k_max ({k_max}) must not be below k_min ({k_min})"
            )));
        }
        Ok(())
    }

    pub fn k_min(&self) -> usize {
        self.k_min
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn mass(&self) -> &PriorMass {
        &self.mass
    }

    /// `P(k)`; zero outside the window.
    pub fn probability(&self, k: usize) -> f64 {
        if k < self.k_min || k > self.k_max {
            return 0.0;
        }
        match &self.mass {
            PriorMass::Uniform => 1.0 / (self.k_max - self.k_min + 1) as f64,
            PriorMass::Explicit(p) => p[k - self.k_min],
        }
    }

    /// `Σ_{κ ≥ k} P(κ)`, the mass not yet excluded when no switch happened before `k`.
    fn tail_mass(&self, k: usize) -> f64 {
        match &self.mass {
            PriorMass::Uniform => {
                let first = k.max(self.k_min);
                if first > self.k_max {
                    0.0
                } else {
                    (self.k_max - first + 1) as f64 / (self.k_max - self.k_min + 1) as f64
                }
            }
            PriorMass::Explicit(p) => {
                let first = k.max(self.k_min);
                if first > self.k_max {
                    0.0
                } else {
                    // summed from the back so small tails keep their precision
                    p[first - self.k_min..].iter().rev().sum()
                }
            }
        }
    }

    /// Conditional switching probability `p(0|k)`: the probability that the
    /// light switches at `k + 1` given that it has not switched up to `k`.
    ///
    /// Zero before `k_min - 1`; crop-and-scale from `k_min - 1` on, reaching
    /// exactly one at `k_max - 1`.
    pub fn switch_probability(&self, k: usize) -> Result<f64> {
        if k >= self.k_max {
            return Err(GlosaError::OutOfWindow { k, k_max: self.k_max });
        }
        if k + 1 < self.k_min {
            return Ok(0.0);
        }
        if k + 1 == self.k_max {
            return Ok(1.0);
        }
        Ok(match &self.mass {
            PriorMass::Uniform => 1.0 / (self.k_max - k) as f64,
            PriorMass::Explicit(_) => {
                let tail = self.tail_mass(k + 1);
                if tail <= 0.0 {
                    // remaining window carries no mass; treat as certain switching
                    1.0
                } else {
                    (self.probability(k + 1) / tail).min(1.0)
                }
            }
        })
    }

    /// `p(0|k)` for every `k` in `0..k_max`.
    pub fn switch_probabilities(&self) -> Vec<f64> {
        (0..self.k_max)
            .map(|k| self.switch_probability(k).expect("k < k_max"))
            .collect()
    }

    /// Distribution of the switching step given that no switch occurred up to
    /// and including `k_now`.
    pub fn condition_on_no_switch(&self, k_now: usize) -> Result<Self> {
        if k_now >= self.k_max {
            return Err(GlosaError::OutOfWindow {
                k: k_now,
                k_max: self.k_max,
            });
        }
        if k_now < self.k_min {
            return Ok(self.clone());
        }
        let k_min = k_now + 1;
        match &self.mass {
            PriorMass::Uniform => Self::uniform(k_min, self.k_max),
            PriorMass::Explicit(p) => {
                let rest = p[k_min - self.k_min..].to_vec();
                if rest.iter().sum::<f64>() <= 0.0 {
                    // all remaining mass was excluded: switching is certain at the last step
                    let mut w = vec![0.0; rest.len()];
                    *w.last_mut().expect("non-empty") = 1.0;
                    return Self::explicit(k_min, w);
                }
                Self::explicit(k_min, rest)
            }
        }
    }

    /// The same distribution expressed relative to a clock started `shift`
    /// steps later. Used when re-solving from an intermediate step.
    pub fn shifted(&self, shift: usize) -> Result<Self> {
        if shift >= self.k_min {
            return Err(GlosaError::InvalidPrior(format!(
                "cannot shift by {shift}: window starts at {}",
                self.k_min
            )));
        }
        Ok(Self {
            k_min: self.k_min - shift,
            k_max: self.k_max - shift,
            mass: self.mass.clone(),
        })
    }

    /// Checks the stored mass sums to one.
    pub fn validate(&self) -> Result<()> {
        Self::check_window(self.k_min, self.k_max)?;
        if let PriorMass::Explicit(p) = &self.mass {
            if p.len() != self.k_max - self.k_min + 1 {
                return Err(GlosaError::InvalidPrior("vector length does not match window".into()));
            }
            let total: f64 = p.iter().sum();
            if (total - 1.0).abs() > SUM_TOLERANCE || p.iter().any(|q| *q < 0.0) {
                return Err(GlosaError::InvalidPrior(format!("probabilities sum to {total}")));
            }
        }
        Ok(())
    }
}

/// A realized switching process: the no-switch indicators `z(k)` and the
/// virtual state `x̃(k)` for one sampled switching step.
#[derive(Debug, Clone, PartialEq)]
pub struct SwitchingProcess {
    realized_k1: usize,
}

impl SwitchingProcess {
    /// Samples the switching step by walking `k = 0, 1, ...` and drawing one
    /// uniform number per step (also where `p(0|k) = 0`); the light switches
    /// at `k + 1` as soon as the draw falls below `p(0|k)`.
    pub fn sample(prior: &SwitchingPrior, mut draw: impl FnMut() -> f64) -> Self {
        for k in 0..prior.k_max() {
            let p = prior.switch_probability(k).expect("k < k_max");
            if draw() < p {
                return Self { realized_k1: k + 1 };
            }
        }
        Self {
            realized_k1: prior.k_max(),
        }
    }

    pub fn with_switch_at(realized_k1: usize) -> Self {
        Self { realized_k1 }
    }

    pub fn realized_k1(&self) -> usize {
        self.realized_k1
    }

    /// `z(k)`: zero exactly at `k = k1 - 1`.
    pub fn no_switch(&self, k: usize) -> bool {
        k + 1 != self.realized_k1
    }

    /// `x̃(k)`: one while the light has not yet switched.
    pub fn virtual_state(&self, k: usize) -> bool {
        k < self.realized_k1
    }
}
