//! Seeded Monte-Carlo estimators with additive (ε, δ) guarantees.
//!
//! Samples are drawn in fixed-size batches; batch b uses its own ChaCha8
//! stream `b` under the plan's seed, so results do not depend on how the
//! batches are scheduled. Sampled effects are integers and are summed
//! exactly, so the estimate is an exact rational.

use std::collections::HashMap;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive};
use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::attribution::ShapInstance;
use crate::domain::{apply_weights, restrict_columns, ColumnDistribution, ColumnSet, Matrix, ProductDistribution, Rational};
use crate::error::{Error, Result};
use crate::expectation::ExpInstance;
use crate::ranking::{effect_range, rank_matrix, EffectContext, EffectSpec, RankingSpec};

/// Generator identifier recorded with every sampled result.
pub const RNG_ALGORITHM: &str = "ChaCha8Rng(rand_chacha 0.3), seed_from_u64(seed), stream = batch index";
/// Samples per batch; part of the reproducibility contract.
pub const BATCH_SIZE: u64 = 1024;
/// Refuse plans beyond this many samples.
pub const MAX_SAMPLES: u64 = 1 << 36;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SamplingPlan {
    pub epsilon: Rational,
    pub delta: Rational,
    pub seed: u64,
    pub samples: u64,
    /// Width of the range of a single sampled value.
    pub range_width: Rational,
    /// Whether `samples` came from the Hoeffding bound or an override.
    pub derived: bool,
}

impl SamplingPlan {
    /// Smallest sample count with `2·exp(−2·s·ε²/W²) ≤ δ`.
    pub fn derive(epsilon: Rational, delta: Rational, seed: u64, range_width: Rational) -> Result<Self> {
        if !epsilon.is_positive() {
            return Err(Error::invalid("epsilon must be positive"));
        }
        if !delta.is_positive() || delta >= Rational::one() {
            return Err(Error::invalid("delta must lie in (0, 1)"));
        }
        let samples = hoeffding_samples(&range_width, &epsilon, &delta)?;
        Ok(SamplingPlan { epsilon, delta, seed, samples, range_width, derived: true })
    }

    /// Same plan with an explicit sample count.
    pub fn with_samples(mut self, samples: u64) -> Result<Self> {
        if samples == 0 || samples > MAX_SAMPLES {
            return Err(Error::invalid(format!("sample count must lie in 1..={MAX_SAMPLES}")));
        }
        self.samples = samples;
        self.derived = false;
        Ok(self)
    }

    pub fn rng_algorithm(&self) -> &'static str {
        RNG_ALGORITHM
    }
}

pub fn hoeffding_samples(width: &Rational, epsilon: &Rational, delta: &Rational) -> Result<u64> {
    let f = |r: &Rational| r.to_f64().unwrap_or(f64::INFINITY);
    let (w, e, d) = (f(width), f(epsilon), f(delta));
    let s = (w * w * (2.0 / d).ln() / (2.0 * e * e)).ceil();
    if !s.is_finite() || s > MAX_SAMPLES as f64 {
        return Err(Error::ResourceCap {
            cap: "max_samples",
            detail: format!("Hoeffding bound asks for {s} samples, cap is {MAX_SAMPLES}"),
        });
    }
    Ok((s as u64).max(1))
}

/// A Monte-Carlo estimate and the plan that produced it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct McEstimate {
    pub value: Rational,
    pub plan: SamplingPlan,
}

/// Per-column sampler: exact integer weights over a common denominator
/// when they fit in 64 bits.
enum ColumnSampler {
    Point,
    Exact(WeightedIndex<u64>),
    Float(WeightedIndex<f64>),
}

impl ColumnSampler {
    fn new(col: &ColumnDistribution) -> Self {
        if col.len() == 1 {
            return ColumnSampler::Point;
        }
        let denom = col.support().iter().fold(BigInt::one(), |acc, (_, p)| acc.lcm(p.denom()));
        let ints: Option<Vec<u64>> = col
            .support()
            .iter()
            .map(|(_, p)| (p.numer() * (&denom / p.denom())).to_u64())
            .collect();
        match ints.and_then(|w| WeightedIndex::new(w).ok()) {
            Some(w) => ColumnSampler::Exact(w),
            None => {
                let w: Vec<f64> = col.support().iter().map(|(_, p)| p.to_f64().unwrap_or(0.0)).collect();
                ColumnSampler::Float(WeightedIndex::new(w).expect("positive probabilities"))
            }
        }
    }

    fn sample(&self, rng: &mut impl Rng) -> usize {
        match self {
            ColumnSampler::Point => 0,
            ColumnSampler::Exact(w) => w.sample(rng),
            ColumnSampler::Float(w) => w.sample(rng),
        }
    }
}

struct WeightSampler {
    columns: Vec<ColumnSampler>,
    radices: Vec<usize>,
    keyed: bool,
}

impl WeightSampler {
    fn new(dist: &ProductDistribution) -> Self {
        WeightSampler {
            columns: dist.columns().iter().map(ColumnSampler::new).collect(),
            radices: dist.columns().iter().map(|c| c.len()).collect(),
            keyed: dist.space_size() < u128::MAX,
        }
    }

    fn draw(&self, rng: &mut impl Rng, out: &mut [usize]) {
        for (slot, c) in out.iter_mut().zip(&self.columns) {
            *slot = c.sample(rng);
        }
    }

    /// Mixed-radix key of a weight vector, for memoizing effects.
    fn key(&self, idx: &[usize]) -> Option<u128> {
        self.keyed.then(|| idx.iter().zip(&self.radices).rev().fold(0u128, |acc, (&i, &r)| acc * r as u128 + i as u128))
    }
}

/// Runs `plan.samples` draws of `sample` in seeded batches and returns the
/// exact mean.
fn run_batches<F>(plan: &SamplingPlan, sample: F) -> Rational
where
    F: Fn(&mut ChaCha8Rng, &mut HashMap<u128, i64>) -> i64 + Sync,
{
    let batches = plan.samples.div_ceil(BATCH_SIZE);
    let total: i128 = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
            rng.set_stream(b);
            let mut memo = HashMap::new();
            let count = BATCH_SIZE.min(plan.samples - b * BATCH_SIZE);
            (0..count).map(|_| sample(&mut rng, &mut memo) as i128).sum::<i128>()
        })
        .sum();
    Rational::new(BigInt::from(total), BigInt::from(plan.samples))
}

fn memoized(memo: &mut HashMap<u128, i64>, key: Option<u128>, eval: impl FnOnce() -> i64) -> i64 {
    match key {
        Some(k) => *memo.entry(k).or_insert_with(eval),
        None => eval(),
    }
}

/// Plan for the expected effect of `inst`, with width from the effect range.
pub fn expectation_plan(inst: &ExpInstance, epsilon: Rational, delta: Rational, seed: u64) -> Result<SamplingPlan> {
    let (lo, hi) = effect_range(&inst.effect, inst.matrix.n());
    SamplingPlan::derive(epsilon, delta, seed, hi - lo)
}

/// Plan for SHAP or Shapley: a marginal contribution is a difference of two
/// effect values, so its range is twice the effect range.
pub fn attribution_plan(effect: &EffectSpec, n: usize, epsilon: Rational, delta: Rational, seed: u64) -> Result<SamplingPlan> {
    let (lo, hi) = effect_range(effect, n);
    SamplingPlan::derive(epsilon, delta, seed, (hi - lo) * Rational::from_integer(BigInt::from(2)))
}

/// Mean effect over i.i.d. draws `u ∼ Π`.
pub fn mc_expectation(inst: &ExpInstance, plan: &SamplingPlan) -> Result<McEstimate> {
    let sampler = WeightSampler::new(&inst.dist);
    let ctx = EffectContext::new(inst.base.clone(), inst.effect)?;
    let m = inst.matrix.m();
    let value = run_batches(plan, |rng, memo| {
        let mut idx = vec![0; m];
        sampler.draw(rng, &mut idx);
        memoized(memo, sampler.key(&idx), || {
            let weighted = apply_weights(&inst.matrix, &inst.dist.weights_at(&idx)).expect("width checked");
            ctx.eval(&rank_matrix(&weighted, inst.spec))
        })
    });
    Ok(McEstimate { value, plan: plan.clone() })
}

/// Permutation-sampling estimate of the SHAP score of weight `j`: draw a
/// player order and a full weight vector, pin the players before `j` to
/// the reference, and record `f(with j pinned) − f(without)`.
pub fn mc_shap(inst: &ShapInstance, j: usize, plan: &SamplingPlan) -> Result<McEstimate> {
    let m = inst.matrix.m();
    if j >= m {
        return Err(Error::invalid(format!("column {} out of range for {m} columns", j + 1)));
    }
    let sampler = WeightSampler::new(&inst.dist);
    let reference: Vec<usize> = (0..m)
        .map(|l| inst.dist.column(l).index_of(&inst.weights.values()[l]).expect("validated reference"))
        .collect();
    let ctx = EffectContext::new(inst.base(), inst.effect)?;
    let effect_at = |idx: &[usize]| {
        let weighted = apply_weights(&inst.matrix, &inst.dist.weights_at(idx)).expect("width checked");
        ctx.eval(&rank_matrix(&weighted, inst.spec))
    };
    let value = run_batches(plan, |rng, memo| {
        let mut order: Vec<usize> = (0..m).collect();
        order.shuffle(rng);
        let mut idx = vec![0; m];
        sampler.draw(rng, &mut idx);
        for &l in order.iter().take_while(|&&l| l != j) {
            idx[l] = reference[l];
        }
        let without = memoized(memo, sampler.key(&idx), || effect_at(&idx));
        idx[j] = reference[j];
        let with = memoized(memo, sampler.key(&idx), || effect_at(&idx));
        // f = −e
        without - with
    });
    Ok(McEstimate { value, plan: plan.clone() })
}

/// Permutation-sampling estimate of the Shapley value of column `j`.
pub fn mc_shapley(matrix: &Matrix, spec: RankingSpec, effect: EffectSpec, j: usize, plan: &SamplingPlan) -> Result<McEstimate> {
    let m = matrix.m();
    if j >= m {
        return Err(Error::invalid(format!("column {} out of range for {m} columns", j + 1)));
    }
    let ctx = EffectContext::new(rank_matrix(matrix, spec), effect)?;
    let effect_of = |cols: &[usize]| {
        let restricted = restrict_columns(matrix, &ColumnSet::new(cols.to_vec())).expect("columns in range");
        ctx.eval(&rank_matrix(&restricted, spec))
    };
    let keyed = m < 128;
    let value = run_batches(plan, |rng, memo| {
        let mut order: Vec<usize> = (0..m).collect();
        order.shuffle(rng);
        let mut cols: Vec<usize> = order.iter().copied().take_while(|&l| l != j).collect();
        let mask = |c: &[usize]| keyed.then(|| c.iter().fold(0u128, |acc, &l| acc | 1 << l));
        let without = memoized(memo, mask(&cols), || effect_of(&cols));
        cols.push(j);
        let with = memoized(memo, mask(&cols), || effect_of(&cols));
        without - with
    });
    Ok(McEstimate { value, plan: plan.clone() })
}
