//! Memoized escape cost.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::deterministic::{escape_value, HorizonSearch};
use crate::error::Result;
use crate::model::{expected_cost, EscapeConvention, Scenario, Trajectory, VehicleState};

/// Escape costs keyed by the exact bit pattern of the state.
///
/// The cost depends on the state only, so one cache serves every stage.
#[derive(Debug, Clone)]
pub struct EscapeCache {
    target: VehicleState,
    w: f64,
    convention: EscapeConvention,
    search: HorizonSearch,
    map: HashMap<(u64, u64), f64>,
    evaluations: usize,
}

impl EscapeCache {
    pub fn new(scenario: &Scenario) -> Self {
        Self {
            target: scenario.target(),
            w: scenario.w,
            convention: scenario.escape,
            search: HorizonSearch::default(),
            map: HashMap::new(),
            evaluations: 0,
        }
    }

    fn key(s: VehicleState) -> (u64, u64) {
        (s.x.to_bits(), s.v.to_bits())
    }

    /// Uncached evaluation.
    pub fn compute(&self, s: VehicleState) -> Result<f64> {
        escape_value(s, self.target, self.w, self.convention, &self.search)
    }

    pub fn get(&mut self, s: VehicleState) -> Result<f64> {
        if let Some(c) = self.map.get(&Self::key(s)) {
            return Ok(*c);
        }
        let c = self.compute(s)?;
        self.evaluations += 1;
        self.map.insert(Self::key(s), c);
        Ok(c)
    }

    /// Evaluates every missing state, concurrently for large batches.
    pub fn fill(&mut self, states: &[VehicleState]) -> Result<()> {
        let missing: Vec<VehicleState> = states
            .iter()
            .copied()
            .filter(|s| !self.map.contains_key(&Self::key(*s)))
            .collect();
        let computed: Vec<Result<f64>> = if missing.len() > 4096 {
            missing.par_iter().map(|s| self.compute(*s)).collect()
        } else {
            missing.iter().map(|s| self.compute(*s)).collect()
        };
        self.evaluations += missing.len();
        for (s, c) in missing.into_iter().zip(computed) {
            self.map.insert(Self::key(s), c?);
        }
        Ok(())
    }

    /// Cached value; panics when the state was never filled.
    pub fn cached(&self, s: VehicleState) -> f64 {
        self.map[&Self::key(s)]
    }

    /// Expected cost of a no-switch trajectory with escape costs from the cache.
    pub fn expected_cost(&mut self, traj: &Trajectory, switch_probs: &[f64]) -> Result<f64> {
        expected_cost(traj, switch_probs, |s| self.get(s))
    }

    pub fn evaluations(&self) -> usize {
        self.evaluations
    }

    pub fn clear(&mut self) {
        self.map.clear();
        self.evaluations = 0;
    }
}
