//! SHAP scores of weight parameters and Shapley values of columns.
//!
//! Both reduce to expected effects. Mixing every other column's law with a
//! point mass at its reference weight, `θ·δ_w + (1−θ)·Π`, turns the
//! difference between "target free" and "target fixed" into a polynomial
//! `Σ_k Δ_k θ^k (1−θ)^{m−1−k}` whose coefficients are the coalition-size
//! strata of marginal contributions. Evaluating at m points and solving
//! recovers them exactly.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use rayon::prelude::*;

use crate::domain::{
    apply_weights, int, rat, ColumnDistribution, Matrix, ProductDistribution, Rational, WeightVector,
};
use crate::error::{Error, Result};
use crate::expectation::{expect_effect, Caps, ExpInstance, MethodTag, Mode};
use crate::pairwise::Encoding;
use crate::ranking::{normalize, rank_matrix, CanonicalRanking, EffectSpec, RankingSpec};

/// A SHAP problem: the players are the m weight parameters, the reference
/// point is `weights`, and coalition values are conditional expectations of
/// `f(u) = −e(r(M∘u))` against `π₀ = r(M∘w)`.
#[derive(Debug, Clone)]
pub struct ShapInstance {
    pub matrix: Matrix,
    pub dist: ProductDistribution,
    pub weights: WeightVector,
    pub spec: RankingSpec,
    pub effect: EffectSpec,
    pub encoding: Encoding,
}

impl ShapInstance {
    pub fn new(
        matrix: Matrix,
        dist: ProductDistribution,
        weights: WeightVector,
        spec: RankingSpec,
        effect: EffectSpec,
    ) -> Result<Self> {
        dist.check_width(matrix.m())?;
        if weights.len() != matrix.m() {
            return Err(Error::invalid(format!(
                "reference weights have length {} but the matrix has {} columns",
                weights.len(),
                matrix.m()
            )));
        }
        for (j, w) in weights.values().iter().enumerate() {
            if dist.column(j).index_of(w).is_none() {
                return Err(Error::invalid(format!(
                    "reference weight {w} of column {} has probability zero",
                    j + 1
                )));
            }
        }
        effect.validate(matrix.n())?;
        Ok(ShapInstance { matrix, dist, weights, spec, effect, encoding: Encoding::Unary })
    }

    pub fn encoded(mut self, encoding: Encoding) -> Self {
        self.encoding = encoding;
        self
    }

    /// `π₀ = r(M∘w)`.
    pub fn base(&self) -> crate::domain::Permutation {
        rank_matrix(&apply_weights(&self.matrix, &self.weights).expect("width checked"), self.spec)
    }
}

/// An attribution value with the exact methods that produced it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Attribution {
    pub value: Rational,
    pub methods: Vec<MethodTag>,
    /// Constant added to every entry to make a Max matrix non-negative.
    pub shift: Option<Rational>,
}

impl Attribution {
    /// Label such as `interpolation+pairwise`.
    pub fn method_label(&self) -> String {
        let parts: Vec<&str> = self.methods.iter().map(|m| m.short()).collect();
        format!("interpolation+{}", parts.join("+"))
    }
}

fn default_grid(m: usize) -> Vec<Rational> {
    (1..=m).map(|t| rat(t as i64, m as i64 + 1)).collect()
}

/// Shared reduction: one column game evaluated through expected effects.
struct Game<'a> {
    matrix: &'a Matrix,
    spec: RankingSpec,
    effect: EffectSpec,
    encoding: Encoding,
    base: crate::domain::Permutation,
    /// Column laws when a player is absent from the coalition.
    background: Vec<ColumnDistribution>,
    /// Values a present player is pinned to.
    reference: Vec<Rational>,
}

impl Game<'_> {
    fn expectation(&self, columns: Vec<ColumnDistribution>, mode: Mode, caps: &Caps) -> Result<(Rational, MethodTag)> {
        let dist = ProductDistribution::new(columns)?;
        let inst = ExpInstance::with_base(self.matrix.clone(), dist, self.spec, self.effect, self.base.clone())?
            .encoded(self.encoding);
        expect_effect(&inst, mode, caps)
    }

    /// Shapley value of player `j` using the interpolation points `grid`.
    fn value(&self, j: usize, grid: &[Rational], mode: Mode, caps: &Caps) -> Result<(Rational, Vec<MethodTag>)> {
        let m = self.reference.len();
        if grid.len() != m {
            return Err(Error::invalid(format!("interpolation needs {m} points, got {}", grid.len())));
        }
        let evals: Vec<Result<(Rational, Vec<MethodTag>)>> = grid
            .par_iter()
            .map(|theta| {
                let mixed: Vec<ColumnDistribution> = (0..m)
                    .map(|l| self.background[l].mix_with_point(&self.reference[l], theta))
                    .collect();
                let mut fixed = mixed.clone();
                fixed[j] = ColumnDistribution::point_mass(self.reference[j].clone());
                let mut free = mixed;
                free[j] = self.background[j].clone();
                let (e_fixed, a) = self.expectation(fixed, mode, caps)?;
                let (e_free, b) = self.expectation(free, mode, caps)?;
                // ν = −E[e], so the marginal contribution is E_free − E_fixed
                Ok((e_free - e_fixed, vec![a, b]))
            })
            .collect();
        let mut rhs = Vec::with_capacity(m);
        let mut methods = Vec::new();
        for e in evals {
            let (g, used) = e?;
            rhs.push(g);
            for t in used {
                if !methods.contains(&t) {
                    methods.push(t);
                }
            }
        }
        let system: Vec<Vec<Rational>> = grid
            .iter()
            .map(|theta| {
                let rest = Rational::one() - theta;
                (0..m).map(|k| pow(theta, k) * pow(&rest, m - 1 - k)).collect()
            })
            .collect();
        let deltas = solve(system, rhs)?;
        let value = deltas
            .iter()
            .enumerate()
            .map(|(k, d)| d * coalition_weight(k, m))
            .sum();
        Ok((value, methods))
    }
}

fn pow(x: &Rational, e: usize) -> Rational {
    (0..e).fold(Rational::one(), |acc, _| acc * x)
}

fn factorial(n: usize) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, i| acc * i)
}

/// `k!(m−1−k)!/m!`, the weight of one coalition of size k.
fn coalition_weight(k: usize, m: usize) -> Rational {
    Rational::new(factorial(k) * factorial(m - 1 - k), factorial(m))
}

/// Exact Gaussian elimination with partial pivoting on non-zero entries.
fn solve(mut a: Vec<Vec<Rational>>, mut b: Vec<Rational>) -> Result<Vec<Rational>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .find(|&r| !a[r][col].is_zero())
            .ok_or_else(|| Error::invalid("interpolation system is singular"))?;
        a.swap(col, pivot);
        b.swap(col, pivot);
        let inv = a[col][col].recip();
        for r in col + 1..n {
            if a[r][col].is_zero() {
                continue;
            }
            let factor = &a[r][col] * &inv;
            for c in col..n {
                let sub = &factor * &a[col][c];
                a[r][c] -= sub;
            }
            let sub = &factor * &b[col];
            b[r] -= sub;
        }
    }
    let mut x = vec![Rational::zero(); n];
    for r in (0..n).rev() {
        let tail: Rational = (r + 1..n).map(|c| &a[r][c] * &x[c]).sum();
        x[r] = (&b[r] - tail) / &a[r][r];
    }
    Ok(x)
}

fn shap_game(inst: &ShapInstance) -> Game<'_> {
    Game {
        matrix: &inst.matrix,
        spec: inst.spec,
        effect: inst.effect,
        encoding: inst.encoding,
        base: inst.base(),
        background: inst.dist.columns().to_vec(),
        reference: inst.weights.values().to_vec(),
    }
}

fn check_column(j: usize, m: usize) -> Result<()> {
    if j >= m {
        return Err(Error::invalid(format!("column {} out of range for {m} columns", j + 1)));
    }
    Ok(())
}

/// SHAP score of weight parameter `j`.
pub fn shap_score(inst: &ShapInstance, j: usize, mode: Mode, caps: &Caps) -> Result<Attribution> {
    shap_score_on_grid(inst, j, &default_grid(inst.matrix.m()), mode, caps)
}

/// SHAP score using caller-chosen distinct interpolation points in (0, 1).
pub fn shap_score_on_grid(
    inst: &ShapInstance,
    j: usize,
    grid: &[Rational],
    mode: Mode,
    caps: &Caps,
) -> Result<Attribution> {
    check_column(j, inst.matrix.m())?;
    check_grid(grid)?;
    let (value, methods) = shap_game(inst).value(j, grid, mode, caps)?;
    Ok(Attribution { value, methods, shift: None })
}

fn check_grid(grid: &[Rational]) -> Result<()> {
    for (i, t) in grid.iter().enumerate() {
        if !t.is_positive() || *t >= Rational::one() || grid[..i].contains(t) {
            return Err(Error::invalid("interpolation points must be distinct and inside (0, 1)"));
        }
    }
    Ok(())
}

/// SHAP scores of every weight parameter.
pub fn shap_all(inst: &ShapInstance, mode: Mode, caps: &Caps) -> Result<Vec<Attribution>> {
    let game = shap_game(inst);
    let grid = default_grid(inst.matrix.m());
    (0..inst.matrix.m())
        .map(|j| game.value(j, &grid, mode, caps).map(|(value, methods)| Attribution { value, methods, shift: None }))
        .collect()
}

/// Matrix on which column restriction equals multiplying by the column's
/// incidence vector, with the spec to rank it by and the shift applied.
fn shapley_matrix(matrix: &Matrix, spec: RankingSpec) -> (Matrix, RankingSpec, Option<Rational>) {
    let (canonical, normalized) = normalize(matrix, spec);
    let (mut m, spec, shift) = match canonical {
        CanonicalRanking::MaxAsc | CanonicalRanking::MaxDsc => {
            // zeroed columns must never exceed a real entry
            let low = normalized.min_entry().cloned().unwrap_or_else(Rational::zero);
            if low.is_negative() {
                let shift = -low;
                (normalized.map(|v| v + &shift), canonical.spec(), Some(shift))
            } else {
                (normalized, canonical.spec(), None)
            }
        }
        _ => (normalized, canonical.spec(), None),
    };
    // positive rescaling keeps every ranking and makes Sum entries integral
    let lcm = m.rows().flatten().fold(BigInt::one(), |acc, v| acc.lcm(v.denom()));
    if !lcm.is_one() {
        let factor = Rational::from_integer(lcm);
        m = m.map(|v| v * &factor);
    }
    (m, spec, shift)
}

/// Shapley value of column `j` in the game `ν(C) = −e(r(M|_C))` against
/// `π₀ = r(M)`.
pub fn shapley_column(matrix: &Matrix, spec: RankingSpec, effect: EffectSpec, j: usize, mode: Mode, caps: &Caps) -> Result<Attribution> {
    check_column(j, matrix.m())?;
    effect.validate(matrix.n())?;
    let (shifted, canon_spec, shift) = shapley_matrix(matrix, spec);
    let m = matrix.m();
    let game = Game {
        matrix: &shifted,
        spec: canon_spec,
        effect,
        encoding: Encoding::Unary,
        base: rank_matrix(matrix, spec),
        background: vec![ColumnDistribution::point_mass(int(0)); m],
        reference: vec![int(1); m],
    };
    let (value, methods) = game.value(j, &default_grid(m), mode, caps)?;
    Ok(Attribution { value, methods, shift })
}

/// Shapley values of every column.
pub fn shapley_all(matrix: &Matrix, spec: RankingSpec, effect: EffectSpec, mode: Mode, caps: &Caps) -> Result<Vec<Attribution>> {
    (0..matrix.m()).map(|j| shapley_column(matrix, spec, effect, j, mode, caps)).collect()
}
