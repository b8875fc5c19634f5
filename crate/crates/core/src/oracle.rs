//! Brute-force references. Ranking and effect evaluation are re-implemented
//! here from their definitions; only the data types are shared with the
//! modules under test.

use std::cmp::Ordering;

use num_bigint::BigInt;
use num_traits::{One, Zero};

use crate::attribution::ShapInstance;
use crate::domain::{Matrix, ProductDistribution, Rational};
use crate::error::{Error, Result};
use crate::expectation::ExpInstance;
use crate::ranking::{Direction, EffectKind, EffectSpec, RankingSpec, Score};

/// Largest weight space the oracle will walk.
pub const ORACLE_SPACE_CAP: u128 = 1 << 16;
/// Largest number of players in the attribution oracles.
pub const ORACLE_MAX_PLAYERS: usize = 8;
/// Largest number of variables or items the counters enumerate.
pub const ORACLE_MAX_VARIABLES: usize = 20;

/// Ranked row sequence of `rows` scaled by `w`.
fn order(rows: &[Vec<Rational>], w: &[Rational], spec: RankingSpec) -> Vec<usize> {
    let scaled: Vec<Vec<Rational>> = rows
        .iter()
        .map(|r| r.iter().zip(w).map(|(a, b)| a * b).collect())
        .collect();
    let cmp_scores = |a: &Vec<Rational>, b: &Vec<Rational>| -> Ordering {
        if a.is_empty() {
            return Ordering::Equal;
        }
        match spec.score() {
            Score::Sum => a.iter().sum::<Rational>().cmp(&b.iter().sum::<Rational>()),
            Score::Max => a.iter().max().cmp(&b.iter().max()),
            Score::Min => a.iter().min().cmp(&b.iter().min()),
            Score::Lex => a.cmp(b),
        }
    };
    let mut idx: Vec<usize> = (0..rows.len()).collect();
    idx.sort_by(|&i, &j| {
        let c = cmp_scores(&scaled[i], &scaled[j]);
        let c = if spec.direction() == Direction::Dsc { c.reverse() } else { c };
        c.then(i.cmp(&j))
    });
    idx
}

fn positions(seq: &[usize]) -> Vec<usize> {
    let mut pos = vec![0; seq.len()];
    for (r, &row) in seq.iter().enumerate() {
        pos[row] = r;
    }
    pos
}

/// Effect of ranked sequence `seq` against base sequence `base`.
fn effect(spec: &EffectSpec, base: &[usize], seq: &[usize]) -> i64 {
    let n = base.len();
    let (p0, p) = (positions(base), positions(seq));
    let top = |s: &[usize], k: usize| -> Vec<usize> {
        let mut t = s[..k].to_vec();
        t.sort();
        t
    };
    match spec.kind {
        EffectKind::KendallTau => {
            let mut c = 0;
            for i in 0..n {
                for j in 0..n {
                    if p0[i] < p0[j] && p[i] > p[j] {
                        c += 1;
                    }
                }
            }
            c
        }
        EffectKind::MaxDisplacement => (0..n).map(|i| (p[i] as i64 - p0[i] as i64).abs()).max().unwrap_or(0),
        EffectKind::Hamming => (0..n).filter(|&i| p[i] != p0[i]).count() as i64,
        EffectKind::Position => {
            let i = spec.row.expect("row");
            p[i] as i64 - p0[i] as i64
        }
        EffectKind::TopkMembership => {
            let (i, k) = (spec.row.expect("row"), spec.k.expect("k"));
            i64::from(p[i] < k) - i64::from(p0[i] < k)
        }
        EffectKind::TopkDifference => {
            let k = spec.k.expect("k");
            let (t, t0) = (top(seq, k), top(base, k));
            let union = t.iter().chain(t0.iter().filter(|x| !t.contains(x))).count();
            let inter = t.iter().filter(|x| t0.contains(x)).count();
            (union - inter) as i64
        }
        EffectKind::TopkAnyChange => i64::from(top(seq, spec.k.expect("k")) != top(base, spec.k.expect("k"))),
    }
}

/// Every weight vector of `dist` with its probability.
fn weight_space(dist: &ProductDistribution) -> Result<Vec<(Vec<Rational>, Rational)>> {
    let size = dist.space_size();
    if size > ORACLE_SPACE_CAP {
        return Err(Error::ResourceCap {
            cap: "oracle_space",
            detail: format!("{size} weight vectors, oracle cap is {ORACLE_SPACE_CAP}"),
        });
    }
    let mut out = vec![(Vec::new(), Rational::one())];
    for col in dist.columns() {
        out = out
            .into_iter()
            .flat_map(|(w, p)| {
                col.support().iter().map(move |(v, q)| {
                    let mut w = w.clone();
                    w.push(v.clone());
                    (w, &p * q)
                })
            })
            .collect();
    }
    Ok(out)
}

fn expectation_over(
    rows: &[Vec<Rational>],
    dist: &ProductDistribution,
    spec: RankingSpec,
    eff: &EffectSpec,
    base: &[usize],
) -> Result<Rational> {
    Ok(weight_space(dist)?
        .into_iter()
        .map(|(w, p)| p * Rational::from_integer(BigInt::from(effect(eff, base, &order(rows, &w, spec)))))
        .sum())
}

/// Expected effect by walking the whole weight space.
pub fn brute_expectation(inst: &ExpInstance) -> Result<Rational> {
    let rows = inst.matrix.to_rows();
    expectation_over(&rows, &inst.dist, inst.spec, &inst.effect, inst.base.ranked_rows())
}

fn factorial(n: usize) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, i| acc * i)
}

/// Σ over coalitions C ∌ j of |C|!(m−|C|−1)!/m! · (ν(C∪{j}) − ν(C)).
fn shapley_formula(m: usize, j: usize, mut nu: impl FnMut(u32) -> Result<Rational>) -> Result<Rational> {
    if m > ORACLE_MAX_PLAYERS {
        return Err(Error::ResourceCap {
            cap: "oracle_players",
            detail: format!("{m} players, oracle cap is {ORACLE_MAX_PLAYERS}"),
        });
    }
    let mut total = Rational::zero();
    for mask in 0u32..1 << m {
        if mask >> j & 1 == 1 {
            continue;
        }
        let c = mask.count_ones() as usize;
        let weight = Rational::new(factorial(c) * factorial(m - c - 1), factorial(m));
        total += weight * (nu(mask | 1 << j)? - nu(mask)?);
    }
    Ok(total)
}

/// SHAP score of weight `j` straight from the definition, with coalition
/// values computed by conditioning the enumeration.
pub fn brute_shap(inst: &ShapInstance, j: usize) -> Result<Rational> {
    let rows = inst.matrix.to_rows();
    let w = inst.weights.values();
    let base = order(&rows, w, inst.spec);
    let m = inst.matrix.m();
    shapley_formula(m, j, |mask| {
        let columns = (0..m)
            .map(|l| {
                if mask >> l & 1 == 1 {
                    crate::domain::ColumnDistribution::point_mass(w[l].clone())
                } else {
                    inst.dist.column(l).clone()
                }
            })
            .collect();
        let cond = ProductDistribution::new(columns)?;
        Ok(-expectation_over(&rows, &cond, inst.spec, &inst.effect, &base)?)
    })
}

/// Shapley value of column `j` from the definition: coalition value is the
/// negated effect of ranking by the coalition's columns alone.
pub fn brute_shapley(matrix: &Matrix, spec: RankingSpec, eff: EffectSpec, j: usize) -> Result<Rational> {
    let rows = matrix.to_rows();
    let m = matrix.m();
    let ones = vec![Rational::one(); m];
    let base = order(&rows, &ones, spec);
    shapley_formula(m, j, |mask| {
        let kept: Vec<Vec<Rational>> = rows
            .iter()
            .map(|r| (0..m).filter(|l| mask >> l & 1 == 1).map(|l| r[l].clone()).collect())
            .collect();
        let width = kept[0].len();
        let seq = order(&kept, &vec![Rational::one(); width], spec);
        Ok(Rational::from_integer(BigInt::from(-effect(&eff, &base, &seq))))
    })
}

/// Model count of a positive CNF over `variables` variables; clauses list
/// 0-based variable indices.
pub fn count_sat_positive_cnf(variables: usize, clauses: &[Vec<usize>]) -> Result<u64> {
    if variables > ORACLE_MAX_VARIABLES {
        return Err(Error::ResourceCap {
            cap: "oracle_variables",
            detail: format!("{variables} variables, oracle cap is {ORACLE_MAX_VARIABLES}"),
        });
    }
    Ok((0u64..1 << variables)
        .filter(|a| clauses.iter().all(|c| c.iter().any(|&x| a >> x & 1 == 1)))
        .count() as u64)
}

/// Number of subsets of `b` with total at most `d`.
pub fn count_knapsack(b: &[u64], d: u64) -> Result<u64> {
    if b.len() > ORACLE_MAX_VARIABLES {
        return Err(Error::ResourceCap {
            cap: "oracle_variables",
            detail: format!("{} items, oracle cap is {ORACLE_MAX_VARIABLES}", b.len()),
        });
    }
    Ok((0u64..1 << b.len())
        .filter(|s| {
            let total: u128 = (0..b.len()).filter(|i| s >> i & 1 == 1).map(|i| b[i] as u128).sum();
            total <= d as u128
        })
        .count() as u64)
}
