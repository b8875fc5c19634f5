//! Exact expected effects of randomized column weights.
//!
//! Kendall tau and position decompose into pairwise precedence
//! probabilities. Top-k effects under Max descending use inclusion–exclusion
//! over merged competitor rows. Everything else is served by the two
//! bounded-dimension methods (enumerate the weight space, or enumerate the
//! row permutations) or refused as intractable.

use std::collections::HashMap;
use std::fmt;

use num_integer::binomial;
use num_traits::{One, Zero};
use rayon::prelude::*;

use crate::domain::{apply_weights, int, Matrix, Permutation, ProductDistribution, Rational};
use crate::error::{Error, Hardness, Result};
use crate::pairwise::{
    canonical_selection, integer_supports, intersect_selections, max_beats, merged_table, prec_sum_dp_with_cap,
    selection_probability, sum_dp_stats, to_i64, weighted_table, Encoding, TieOrientation, WeightSelection,
};
use crate::ranking::{normalize, rank_matrix, CanonicalRanking, EffectContext, EffectKind, EffectSpec, RankingSpec};

/// One expected-effect problem: `E_{u∼Π}[e(r(M∘u))]` against `base`.
#[derive(Debug, Clone)]
pub struct ExpInstance {
    pub matrix: Matrix,
    pub dist: ProductDistribution,
    pub spec: RankingSpec,
    pub effect: EffectSpec,
    pub base: Permutation,
    pub encoding: Encoding,
}

impl ExpInstance {
    /// Instance with base permutation `r(M)` and unary encoding.
    pub fn new(matrix: Matrix, dist: ProductDistribution, spec: RankingSpec, effect: EffectSpec) -> Result<Self> {
        let base = rank_matrix(&matrix, spec);
        Self::with_base(matrix, dist, spec, effect, base)
    }

    pub fn with_base(
        matrix: Matrix,
        dist: ProductDistribution,
        spec: RankingSpec,
        effect: EffectSpec,
        base: Permutation,
    ) -> Result<Self> {
        dist.check_width(matrix.m())?;
        if base.n() != matrix.n() {
            return Err(Error::invalid(format!(
                "base permutation over {} rows for a matrix with {}",
                base.n(),
                matrix.n()
            )));
        }
        effect.validate(matrix.n())?;
        Ok(ExpInstance { matrix, dist, spec, effect, base, encoding: Encoding::Unary })
    }

    pub fn encoded(mut self, encoding: Encoding) -> Self {
        self.encoding = encoding;
        self
    }

    /// Same problem under a different weight distribution.
    pub fn with_dist(&self, dist: ProductDistribution) -> Self {
        ExpInstance { dist, ..self.clone() }
    }

    fn context(&self) -> EffectContext {
        EffectContext { base: self.base.clone(), spec: self.effect }
    }

    fn is_sum(&self) -> bool {
        self.spec.canonical().0 == CanonicalRanking::Sum
    }
}

/// Exact method that produced a value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MethodTag {
    PairwiseLinearity,
    InclusionExclusion,
    EnumerateWeights,
    EnumeratePermutations,
    PermutationDp,
}

impl MethodTag {
    pub const ALL: [MethodTag; 5] = [
        MethodTag::PairwiseLinearity,
        MethodTag::InclusionExclusion,
        MethodTag::EnumerateWeights,
        MethodTag::EnumeratePermutations,
        MethodTag::PermutationDp,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MethodTag::PairwiseLinearity => "pairwise-linearity",
            MethodTag::InclusionExclusion => "inclusion-exclusion",
            MethodTag::EnumerateWeights => "enumerate-weights",
            MethodTag::EnumeratePermutations => "enumerate-permutations",
            MethodTag::PermutationDp => "permutation-dp",
        }
    }

    /// Compact name used in composite method labels.
    pub fn short(self) -> &'static str {
        match self {
            MethodTag::PairwiseLinearity => "pairwise",
            other => other.as_str(),
        }
    }
}

impl fmt::Display for MethodTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Specialized polynomial methods, bounded-dimension methods for hard
    /// cells, otherwise refuse.
    Exact,
    /// Like `Exact`, but a specialized method that hits a cap or an input
    /// it cannot handle falls back to the bounded-dimension methods.
    Auto,
}

/// Resource guards for the exact methods.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Caps {
    /// Largest weight space enumerated point by point.
    pub max_weight_points: u128,
    /// Largest n for which all n! permutations are enumerated.
    pub max_perm_rows: usize,
    /// Largest k treated as a fixed parameter by the top-k methods.
    pub max_topk_k: usize,
    /// Largest state count of a Sum dynamic program.
    pub max_dp_states: usize,
}

impl Default for Caps {
    fn default() -> Self {
        Caps { max_weight_points: 1 << 20, max_perm_rows: 8, max_topk_k: 3, max_dp_states: 10_000_000 }
    }
}

fn cell(inst: &ExpInstance) -> String {
    let mut s = format!("{} × {}", inst.spec, inst.effect.kind);
    if let Some(k) = inst.effect.k {
        s.push_str(&format!(" (k = {k})"));
    }
    if inst.encoding == Encoding::Binary {
        s.push_str(", binary encoding");
    }
    s
}

/// The specialized method for the instance's cell, or why there is none.
pub fn specialized_method(inst: &ExpInstance, caps: &Caps) -> std::result::Result<MethodTag, Hardness> {
    let canonical = inst.spec.canonical().0;
    if canonical == CanonicalRanking::Sum && inst.encoding == Encoding::Binary {
        return Err(Hardness::SumBinary);
    }
    match inst.effect.kind {
        EffectKind::KendallTau | EffectKind::Position => Ok(MethodTag::PairwiseLinearity),
        EffectKind::MaxDisplacement | EffectKind::Hamming => Err(Hardness::DisplacementOrHamming),
        EffectKind::TopkMembership | EffectKind::TopkDifference | EffectKind::TopkAnyChange => {
            if canonical != CanonicalRanking::MaxDsc {
                Err(Hardness::TopkRanking)
            } else if inst.effect.k_unchecked() > caps.max_topk_k {
                Err(Hardness::TopkGivenK)
            } else {
                Ok(MethodTag::InclusionExclusion)
            }
        }
    }
}

/// Bounded-dimension method whose precondition holds, if any.
pub fn bounded_method(inst: &ExpInstance, caps: &Caps) -> Option<MethodTag> {
    if inst.dist.space_size() <= caps.max_weight_points {
        return Some(MethodTag::EnumerateWeights);
    }
    if inst.matrix.n() <= caps.max_perm_rows {
        if !inst.is_sum() {
            return Some(MethodTag::EnumeratePermutations);
        }
        if inst.encoding == Encoding::Unary && inst.matrix.is_integral() && inst.dist.is_integral() {
            return Some(MethodTag::PermutationDp);
        }
    }
    None
}

/// Expected effect with the method chosen by the tractability frontier.
pub fn expect_effect(inst: &ExpInstance, mode: Mode, caps: &Caps) -> Result<(Rational, MethodTag)> {
    match specialized_method(inst, caps) {
        Ok(method) => match expect_by_method(inst, method, caps) {
            Ok(v) => Ok((v, method)),
            Err(err) if mode == Mode::Auto => match bounded_method(inst, caps) {
                Some(fallback) => expect_by_method(inst, fallback, caps).map(|v| (v, fallback)),
                None => Err(err),
            },
            Err(err) => Err(err),
        },
        Err(hardness) => match bounded_method(inst, caps) {
            Some(method) => expect_by_method(inst, method, caps).map(|v| (v, method)),
            None => Err(Error::ExactIntractable { cell: cell(inst), hardness }),
        },
    }
}

/// Runs one specific method; fails if its preconditions do not hold.
pub fn expect_by_method(inst: &ExpInstance, method: MethodTag, caps: &Caps) -> Result<Rational> {
    match method {
        MethodTag::PairwiseLinearity => match inst.effect.kind {
            EffectKind::KendallTau => expect_kendall_tau(inst, caps),
            EffectKind::Position => expect_position(inst, inst.effect.row_unchecked(), caps),
            kind => Err(Error::invalid(format!("pairwise linearity does not apply to {kind}"))),
        },
        MethodTag::InclusionExclusion => match inst.effect.kind {
            EffectKind::TopkMembership => {
                expect_topk_membership_maxdsc(inst, inst.effect.row_unchecked(), inst.effect.k_unchecked())
            }
            EffectKind::TopkDifference => {
                expect_topk_set_maxdsc(inst, inst.effect.k_unchecked(), TopkSetVariant::Difference)
            }
            EffectKind::TopkAnyChange => {
                expect_topk_set_maxdsc(inst, inst.effect.k_unchecked(), TopkSetVariant::AnyChange)
            }
            kind => Err(Error::invalid(format!("inclusion–exclusion does not apply to {kind}"))),
        },
        MethodTag::EnumerateWeights => expect_enumerate_weights(inst, caps),
        MethodTag::EnumeratePermutations | MethodTag::PermutationDp => {
            if inst.is_sum() != (method == MethodTag::PermutationDp) {
                return Err(Error::invalid(format!(
                    "{method} does not apply to {}; use {}",
                    inst.spec,
                    if inst.is_sum() { "permutation-dp" } else { "enumerate-permutations" }
                )));
            }
            expect_enumerate_permutations(inst, caps)
        }
    }
}

fn sum_binary_refusal(inst: &ExpInstance) -> Result<()> {
    if inst.is_sum() && inst.encoding == Encoding::Binary {
        return Err(Error::ExactIntractable { cell: cell(inst), hardness: Hardness::SumBinary });
    }
    Ok(())
}

/// Pairwise precedence on the normalized matrix, ties broken by row index.
struct Precedence<'a> {
    canonical: CanonicalRanking,
    matrix: Matrix,
    dist: &'a ProductDistribution,
    state_cap: usize,
}

impl<'a> Precedence<'a> {
    fn new(inst: &'a ExpInstance, caps: &Caps) -> Result<Self> {
        sum_binary_refusal(inst)?;
        let (canonical, matrix) = normalize(&inst.matrix, inst.spec);
        Ok(Precedence { canonical, matrix, dist: &inst.dist, state_cap: caps.max_dp_states })
    }

    /// P(row a precedes row b).
    fn prob(&self, a: usize, b: usize) -> Result<Rational> {
        let tie = TieOrientation::by_index(a, b);
        let (x, y) = (self.matrix.row(a), self.matrix.row(b));
        match self.canonical {
            CanonicalRanking::Sum => prec_sum_dp_with_cap(x, y, self.dist, tie, self.state_cap).map(|r| r.0),
            c => Ok(selection_probability(&canonical_selection(c, x, y, tie, self.dist), self.dist)),
        }
    }
}

fn sum_results(parts: Vec<Result<Rational>>) -> Result<Rational> {
    parts.into_iter().try_fold(Rational::zero(), |acc, p| Ok(acc + p?))
}

/// Σ over base-ordered pairs of the probability that the later row jumps
/// ahead of the earlier one.
pub fn expect_kendall_tau(inst: &ExpInstance, caps: &Caps) -> Result<Rational> {
    let prec = Precedence::new(inst, caps)?;
    let n = inst.matrix.n();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect();
    let parts = pairs
        .par_iter()
        .map(|&(a, b)| prec.prob(inst.base.row_at(b), inst.base.row_at(a)))
        .collect();
    sum_results(parts)
}

/// Expected rank of `row` minus its base rank; the expected rank is the
/// expected number of rows ahead of it.
pub fn expect_position(inst: &ExpInstance, row: usize, caps: &Caps) -> Result<Rational> {
    let prec = Precedence::new(inst, caps)?;
    let parts = (0..inst.matrix.n())
        .into_par_iter()
        .filter(|&j| j != row)
        .map(|j| prec.prob(j, row))
        .collect();
    Ok(sum_results(parts)? - int(inst.base.rank_of(row) as i64))
}

fn require_max_dsc(inst: &ExpInstance) -> Result<Matrix> {
    let (canonical, matrix) = normalize(&inst.matrix, inst.spec);
    if canonical != CanonicalRanking::MaxDsc {
        return Err(Error::ExactIntractable { cell: cell(inst), hardness: Hardness::TopkRanking });
    }
    Ok(matrix)
}

/// Weights under which `row` precedes every row of `others` by Max
/// descending. Competitors are merged into two per-column maxima: those
/// with a smaller index win ties, so `row` must beat them strictly.
fn beats_all(matrix: &Matrix, dist: &ProductDistribution, row: usize, others: &[usize]) -> WeightSelection {
    let own = weighted_table(matrix.row(row), dist);
    let mut sel = WeightSelection::full(dist);
    for strict in [true, false] {
        let rows: Vec<&[Rational]> = others
            .iter()
            .filter(|&&l| if strict { l < row } else { l > row })
            .map(|&l| matrix.row(l))
            .collect();
        if rows.is_empty() {
            continue;
        }
        let rival = merged_table(&rows, dist);
        sel = intersect_selections(&sel, &max_beats(&own, &rival, strict, dist));
        if sel.is_empty() {
            break;
        }
    }
    sel
}

/// Calls `f` on every subset of `items` with at most `max_len` elements.
fn for_small_subsets(items: &[usize], max_len: usize, f: &mut impl FnMut(&[usize])) {
    fn go(items: &[usize], start: usize, max_len: usize, cur: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
        f(cur);
        if cur.len() == max_len {
            return;
        }
        for i in start..items.len() {
            cur.push(items[i]);
            go(items, i + 1, max_len, cur, f);
            cur.pop();
        }
    }
    go(items, 0, max_len, &mut Vec::new(), f);
}

/// P(row i ends in the top k) under Max descending.
fn topk_probability(matrix: &Matrix, dist: &ProductDistribution, i: usize, k: usize) -> Rational {
    let n = matrix.n();
    if k >= n {
        return Rational::one();
    }
    // i is in the top k iff it beats at least q = n − k of the other rows.
    // P(at least q of N events) = Σ_{d≥q} (−1)^{d−q} C(d−1, q−1) S_d, with
    // S_d summing the joint probability over event sets of size d; those
    // sets are the complements of the at most k − 1 rows i may lose to.
    let others: Vec<usize> = (0..n).filter(|&l| l != i).collect();
    let q = n - k;
    let mut complements = Vec::new();
    for_small_subsets(&others, k - 1, &mut |lost: &[usize]| complements.push(lost.to_vec()));
    let terms: Vec<Rational> = complements
        .par_iter()
        .map(|lost| {
            let beaten: Vec<usize> = others.iter().copied().filter(|l| !lost.contains(l)).collect();
            let d = beaten.len();
            let coeff = binomial(d as i64 - 1, q as i64 - 1);
            let p = selection_probability(&beats_all(matrix, dist, i, &beaten), dist);
            if (d - q) % 2 == 0 { p * int(coeff) } else { -p * int(coeff) }
        })
        .collect();
    terms.into_iter().sum()
}

/// Expected change of top-k membership of row `i` under Max descending.
pub fn expect_topk_membership_maxdsc(inst: &ExpInstance, i: usize, k: usize) -> Result<Rational> {
    let matrix = require_max_dsc(inst)?;
    let base_in = int((inst.base.rank_of(i) < k) as i64);
    Ok(topk_probability(&matrix, &inst.dist, i, k) - base_in)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TopkSetVariant {
    Difference,
    AnyChange,
}

/// Expected top-k set difference or any-change probability under Max
/// descending.
pub fn expect_topk_set_maxdsc(inst: &ExpInstance, k: usize, variant: TopkSetVariant) -> Result<Rational> {
    let matrix = require_max_dsc(inst)?;
    let n = matrix.n();
    let top: Vec<usize> = (0..k).map(|r| inst.base.row_at(r)).collect();
    match variant {
        TopkSetVariant::Difference => {
            let kept: Rational = top.par_iter().map(|&t| topk_probability(&matrix, &inst.dist, t, k)).sum();
            Ok(int(2 * k as i64) - kept * int(2))
        }
        TopkSetVariant::AnyChange => {
            if k >= n {
                return Ok(Rational::zero());
            }
            // the sets agree iff every base top-k row beats every other row
            let rest: Vec<usize> = (0..n).filter(|r| !top.contains(r)).collect();
            let mut sel = WeightSelection::full(&inst.dist);
            for &t in &top {
                sel = intersect_selections(&sel, &beats_all(&matrix, &inst.dist, t, &rest));
                if sel.is_empty() {
                    break;
                }
            }
            Ok(Rational::one() - selection_probability(&sel, &inst.dist))
        }
    }
}

/// Mixed-radix decoding of a flat index into per-column support indices.
fn decode(mut flat: u128, radices: &[usize], out: &mut [usize]) {
    for (slot, &r) in out.iter_mut().zip(radices) {
        *slot = (flat % r as u128) as usize;
        flat /= r as u128;
    }
}

/// Weighted sum of the effect over every point of the weight space.
pub fn expect_enumerate_weights(inst: &ExpInstance, caps: &Caps) -> Result<Rational> {
    let size = inst.dist.space_size();
    if size > caps.max_weight_points {
        return Err(Error::ResourceCap {
            cap: "max_weight_points",
            detail: format!("weight space has {size} points, cap is {}", caps.max_weight_points),
        });
    }
    let radices: Vec<usize> = inst.dist.columns().iter().map(|c| c.len()).collect();
    let ctx = inst.context();
    const CHUNK: u128 = 1024;
    let chunks = size.div_ceil(CHUNK) as u64;
    let partial: Vec<HashMap<i64, Rational>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc: HashMap<i64, Rational> = HashMap::new();
            let mut idx = vec![0; radices.len()];
            let start = c as u128 * CHUNK;
            for flat in start..(start + CHUNK).min(size) {
                decode(flat, &radices, &mut idx);
                let weighted = apply_weights(&inst.matrix, &inst.dist.weights_at(&idx)).expect("width checked");
                let e = ctx.eval(&rank_matrix(&weighted, inst.spec));
                if e != 0 {
                    *acc.entry(e).or_insert_with(Rational::zero) += inst.dist.probability_at(&idx);
                }
            }
            acc
        })
        .collect();
    let mut by_value: HashMap<i64, Rational> = HashMap::new();
    for part in partial {
        for (e, p) in part {
            *by_value.entry(e).or_insert_with(Rational::zero) += p;
        }
    }
    Ok(by_value.into_iter().map(|(e, p)| p * int(e)).sum())
}

fn factorial_within(n: usize, cap: usize) -> Result<()> {
    if n > cap {
        return Err(Error::ResourceCap {
            cap: "max_perm_rows",
            detail: format!("{n}! permutations exceed the cap of {cap} rows"),
        });
    }
    Ok(())
}

/// Σ_π P(π)·e(π) over every row permutation of positive probability.
pub fn expect_enumerate_permutations(inst: &ExpInstance, caps: &Caps) -> Result<Rational> {
    let dist = permutation_distribution(inst, caps)?;
    let ctx = inst.context();
    Ok(dist.into_iter().map(|(pi, p)| p * int(ctx.eval(&pi))).sum())
}

/// Distribution over ranked outcomes, listing only permutations of positive
/// probability.
pub fn permutation_distribution(inst: &ExpInstance, caps: &Caps) -> Result<Vec<(Permutation, Rational)>> {
    let n = inst.matrix.n();
    factorial_within(n, caps.max_perm_rows)?;
    sum_binary_refusal(inst)?;
    let (canonical, matrix) = normalize(&inst.matrix, inst.spec);
    if canonical == CanonicalRanking::Sum {
        return permutations_sum(&matrix, &inst.dist, caps.max_dp_states);
    }
    // pair[a][b]: weights under which a precedes b
    let pair: Vec<Vec<WeightSelection>> = (0..n)
        .into_par_iter()
        .map(|a| {
            (0..n)
                .map(|b| {
                    if a == b {
                        WeightSelection::empty()
                    } else {
                        canonical_selection(canonical, matrix.row(a), matrix.row(b), TieOrientation::by_index(a, b), &inst.dist)
                    }
                })
                .collect()
        })
        .collect();
    let mut out = Vec::new();
    let mut prefix = Vec::with_capacity(n);
    let mut used = vec![false; n];
    permutations_dfs(&pair, &inst.dist, &WeightSelection::full(&inst.dist), &mut prefix, &mut used, &mut out);
    Ok(out)
}

fn permutations_dfs(
    pair: &[Vec<WeightSelection>],
    dist: &ProductDistribution,
    sel: &WeightSelection,
    prefix: &mut Vec<usize>,
    used: &mut [bool],
    out: &mut Vec<(Permutation, Rational)>,
) {
    let n = used.len();
    if prefix.len() == n {
        let pi = Permutation::from_ranked_rows(prefix.clone()).expect("prefix is a permutation");
        out.push((pi, selection_probability(sel, dist)));
        return;
    }
    for r in 0..n {
        if used[r] {
            continue;
        }
        let next = match prefix.last() {
            Some(&last) => intersect_selections(sel, &pair[last][r]),
            None => sel.clone(),
        };
        if next.is_empty() {
            continue;
        }
        used[r] = true;
        prefix.push(r);
        permutations_dfs(pair, dist, &next, prefix, used, out);
        prefix.pop();
        used[r] = false;
    }
}

fn permutations_sum(matrix: &Matrix, dist: &ProductDistribution, state_cap: usize) -> Result<Vec<(Permutation, Rational)>> {
    let n = matrix.n();
    let mut rows: Vec<usize> = (0..n).collect();
    let mut out = Vec::new();
    let mut err = None;
    heap_permutations(&mut rows, n, &mut |perm| {
        if err.is_some() {
            return;
        }
        let pi = Permutation::from_ranked_rows(perm.to_vec()).expect("permutation");
        match ranked_probability_sum(matrix, dist, &pi, state_cap) {
            Ok(p) if !p.is_zero() => out.push((pi, p)),
            Ok(_) => {}
            Err(e) => err = Some(e),
        }
    });
    match err {
        Some(e) => Err(e),
        None => Ok(out),
    }
}

fn heap_permutations(items: &mut [usize], len: usize, f: &mut impl FnMut(&[usize])) {
    if len <= 1 {
        f(items);
        return;
    }
    for i in 0..len - 1 {
        heap_permutations(items, len - 1, f);
        if len % 2 == 0 {
            items.swap(i, len - 1);
        } else {
            items.swap(0, len - 1);
        }
    }
    heap_permutations(items, len - 1, f);
}

/// Probability that Sum ranking of `matrix` yields exactly `pi`, by a
/// dynamic program over the vector of score differences between
/// consecutive rows of `pi`.
pub fn permutation_probability_sum_dp(
    matrix: &Matrix,
    dist: &ProductDistribution,
    spec: RankingSpec,
    pi: &Permutation,
    state_cap: usize,
) -> Result<Rational> {
    let (canonical, normalized) = normalize(matrix, spec);
    if canonical != CanonicalRanking::Sum {
        return Err(Error::invalid(format!("the permutation DP applies to Sum rankings, not {spec}")));
    }
    dist.check_width(matrix.m())?;
    if pi.n() != matrix.n() {
        return Err(Error::invalid("permutation size does not match the matrix"));
    }
    ranked_probability_sum(&normalized, dist, pi, state_cap)
}

/// Sum ascending: consecutive rows a, b of `pi` need `s_ab = Σ u_j (b[j] − a[j])`
/// to be ≥ 0 when a has the smaller index, > 0 otherwise.
fn ranked_probability_sum(matrix: &Matrix, dist: &ProductDistribution, pi: &Permutation, state_cap: usize) -> Result<Rational> {
    let n = matrix.n();
    if n == 1 {
        return Ok(Rational::one());
    }
    let weights = integer_supports(dist)?;
    let ints: Vec<Vec<i64>> = matrix
        .rows()
        .map(|r| r.iter().map(|v| to_i64(v, "matrix entry")).collect::<Result<_>>())
        .collect::<Result<_>>()?;
    let order = pi.ranked_rows();
    let axes: Vec<(Vec<i64>, bool)> = order
        .windows(2)
        .map(|w| {
            let (a, b) = (w[0], w[1]);
            let diffs = (0..matrix.m()).map(|j| ints[b][j] - ints[a][j]).collect();
            (diffs, a < b)
        })
        .collect();
    // each axis alone must fit, and so must their joint table
    let mut budget: usize = 1;
    for (diffs, _) in &axes {
        let stats = sum_dp_stats(diffs, &weights)?;
        budget = budget.saturating_mul(stats.states);
    }
    let exceeds = || Error::ResourceCap {
        cap: "max_dp_states",
        detail: format!("permutation DP over {} axes exceeds {state_cap} states", axes.len()),
    };
    let mut table: HashMap<Vec<i64>, Rational> = HashMap::new();
    table.insert(vec![0; axes.len()], Rational::one());
    for (j, ws) in weights.iter().enumerate() {
        let col = dist.column(j);
        let mut next: HashMap<Vec<i64>, Rational> = HashMap::with_capacity(table.len() * ws.len());
        for (state, p) in &table {
            for (a, w) in ws.iter().enumerate() {
                let key: Vec<i64> = state.iter().zip(&axes).map(|(s, (d, _))| s + w * d[j]).collect();
                *next.entry(key).or_insert_with(Rational::zero) += p * col.probability(a);
            }
        }
        if next.len() > state_cap && budget > state_cap {
            return Err(exceeds());
        }
        table = next;
    }
    Ok(table
        .into_iter()
        .filter(|(s, _)| s.iter().zip(&axes).all(|(v, (_, ties_ok))| if *ties_ok { *v >= 0 } else { *v > 0 }))
        .map(|(_, p)| p)
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{rat, WeightVector};

    fn golden_matrix() -> Matrix {
        Matrix::from_i64(&[[20, 26], [30, 13], [40, 0], [0, 39]]).unwrap()
    }

    fn golden(effect: EffectSpec) -> ExpInstance {
        let dist = ProductDistribution::uniform_i64(2, &[1, 2]).unwrap();
        ExpInstance::new(golden_matrix(), dist, RankingSpec::SUM_DSC, effect).unwrap()
    }

    #[test]
    fn golden_kendall_tau_all_methods() {
        let inst = golden(EffectSpec::kendall_tau());
        let caps = Caps::default();
        assert_eq!(expect_effect(&inst, Mode::Exact, &caps).unwrap(), (rat(3, 2), MethodTag::PairwiseLinearity));
        assert_eq!(expect_enumerate_weights(&inst, &caps).unwrap(), rat(3, 2));
        assert_eq!(expect_enumerate_permutations(&inst, &caps).unwrap(), rat(3, 2));
    }

    #[test]
    fn golden_position_of_row_four() {
        let inst = golden(EffectSpec::position(3));
        let caps = Caps::default();
        assert_eq!(expect_position(&inst, 3, &caps).unwrap(), rat(-3, 4));
        assert_eq!(expect_enumerate_weights(&inst, &caps).unwrap(), rat(-3, 4));
    }

    #[test]
    fn golden_permutation_probabilities() {
        let m = golden_matrix();
        let dist = ProductDistribution::uniform_i64(2, &[1, 2]).unwrap();
        let cap = 1_000_000;
        let swapped = Permutation::from_ranked_rows(vec![3, 0, 1, 2]).unwrap();
        assert_eq!(permutation_probability_sum_dp(&m, &dist, RankingSpec::SUM_DSC, &swapped, cap).unwrap(), rat(1, 4));
        let base = Permutation::identity(4);
        assert_eq!(permutation_probability_sum_dp(&m, &dist, RankingSpec::SUM_DSC, &base, cap).unwrap(), rat(1, 2));
        let inst = golden(EffectSpec::kendall_tau());
        let all = permutation_distribution(&inst, &Caps::default()).unwrap();
        assert_eq!(all.iter().map(|(_, p)| p.clone()).sum::<Rational>(), int(1));
    }

    #[test]
    fn point_mass_gives_zero() {
        let dist = ProductDistribution::point_masses(&WeightVector::from_i64(&[1, 1])).unwrap();
        for kind in EffectKind::ALL {
            let effect = EffectSpec { kind, row: Some(1), k: Some(2) };
            for spec in RankingSpec::all() {
                let inst = ExpInstance::new(golden_matrix(), dist.clone(), spec, effect).unwrap();
                let (v, _) = expect_effect(&inst, Mode::Exact, &Caps::default()).unwrap();
                assert_eq!(v, int(0), "{spec} {kind}");
            }
        }
    }

    #[test]
    fn top1_membership_of_row_four() {
        let m = Matrix::from_i64(&[[3, 1, 0], [1, 0, 4], [0, 1, 1], [2, 2, 2]]).unwrap();
        let dist = ProductDistribution::uniform_i64(3, &[0, 1]).unwrap();
        let inst = ExpInstance::new(m, dist, RankingSpec::MAX_DSC, EffectSpec::topk_membership(3, 1)).unwrap();
        assert_eq!(inst.base.rank_of(3), 2);
        assert_eq!(expect_topk_membership_maxdsc(&inst, 3, 1).unwrap(), rat(1, 8));
        assert_eq!(expect_enumerate_weights(&inst, &Caps::default()).unwrap(), rat(1, 8));
    }

    #[test]
    fn topk_with_k_equal_n() {
        let dist = ProductDistribution::uniform_i64(2, &[0, 1, 3]).unwrap();
        for kind in [EffectKind::TopkMembership, EffectKind::TopkDifference, EffectKind::TopkAnyChange] {
            let inst =
                ExpInstance::new(golden_matrix(), dist.clone(), RankingSpec::MAX_DSC, EffectSpec { kind, row: Some(0), k: Some(4) })
                    .unwrap();
            let caps = Caps { max_topk_k: 4, ..Caps::default() };
            assert_eq!(expect_effect(&inst, Mode::Exact, &caps).unwrap(), (int(0), MethodTag::InclusionExclusion));
        }
    }

    #[test]
    fn topk_set_matches_enumeration_on_golden_matrix() {
        let dist = ProductDistribution::uniform_i64(2, &[1, 2]).unwrap();
        for kind in [EffectKind::TopkDifference, EffectKind::TopkAnyChange] {
            for k in 1..=3 {
                let inst =
                    ExpInstance::new(golden_matrix(), dist.clone(), RankingSpec::MAX_DSC, EffectSpec::with_k(kind, k)).unwrap();
                let caps = Caps::default();
                assert_eq!(
                    expect_by_method(&inst, MethodTag::InclusionExclusion, &caps).unwrap(),
                    expect_enumerate_weights(&inst, &caps).unwrap(),
                    "{kind} k={k}"
                );
            }
        }
    }

    #[test]
    fn dispatch_refuses_hard_cells() {
        let m = Matrix::from_i64(&[[1, 0], [0, 1], [1, 1]]).unwrap();
        let dist = ProductDistribution::uniform_i64(2, &[0, 1]).unwrap();
        let tight = Caps { max_weight_points: 1, max_perm_rows: 1, ..Caps::default() };
        let hard = |spec, effect, encoding| {
            let inst = ExpInstance::new(m.clone(), dist.clone(), spec, effect).unwrap().encoded(encoding);
            match expect_effect(&inst, Mode::Exact, &tight) {
                Err(Error::ExactIntractable { hardness, .. }) => Some(hardness),
                _ => None,
            }
        };
        assert_eq!(hard(RankingSpec::SUM_ASC, EffectSpec::kendall_tau(), Encoding::Binary), Some(Hardness::SumBinary));
        assert_eq!(hard(RankingSpec::SUM_ASC, EffectSpec::kendall_tau(), Encoding::Unary), None);
        assert_eq!(
            hard(RankingSpec::LEX, EffectSpec::new(EffectKind::Hamming), Encoding::Unary),
            Some(Hardness::DisplacementOrHamming)
        );
        assert_eq!(
            hard(RankingSpec::MAX_ASC, EffectSpec::topk_membership(0, 1), Encoding::Unary),
            Some(Hardness::TopkRanking)
        );
        assert_eq!(hard(RankingSpec::MIN_ASC, EffectSpec::topk_membership(0, 1), Encoding::Unary), None);
        // with roomy caps the hard cells fall back to enumeration
        let inst = ExpInstance::new(m, dist, RankingSpec::LEX, EffectSpec::new(EffectKind::Hamming)).unwrap();
        assert_eq!(expect_effect(&inst, Mode::Exact, &Caps::default()).unwrap().1, MethodTag::EnumerateWeights);
    }

    #[test]
    fn auto_falls_back_on_dp_cap() {
        let m = Matrix::from_i64(&[[0, 500], [500, 0]]).unwrap();
        let dist = ProductDistribution::uniform_i64(2, &[0, 1]).unwrap();
        let inst = ExpInstance::new(m, dist, RankingSpec::SUM_ASC, EffectSpec::kendall_tau()).unwrap();
        let caps = Caps { max_dp_states: 10, ..Caps::default() };
        assert!(matches!(expect_effect(&inst, Mode::Exact, &caps), Err(Error::ResourceCap { .. })));
        assert_eq!(expect_effect(&inst, Mode::Auto, &caps).unwrap(), (rat(1, 4), MethodTag::EnumerateWeights));
    }

    #[test]
    fn inclusion_exclusion_coefficients_sum_to_one() {
        // with every event certain, P(at least q of N) must be 1
        for n in 2..8i64 {
            for k in 1..n {
                let q = n - k;
                let total: i64 = (q..n)
                    .map(|d| {
                        let sign = if (d - q) % 2 == 0 { 1 } else { -1 };
                        sign * binomial(d - 1, q - 1) * binomial(n - 1, d)
                    })
                    .sum();
                assert_eq!(total, 1, "n={n} k={k}");
            }
        }
    }
}
