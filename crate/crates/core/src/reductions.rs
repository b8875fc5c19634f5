//! Instance generators from the hardness constructions: counting knapsack
//! solutions through Sum precedence, and counting positive-CNF models
//! through top-k membership and through displacement differences.

use crate::domain::{int, Matrix, Rational};
use crate::error::{Error, Result};
use crate::ranking::{RankingSpec, Score};

/// Positive CNF over variables `0..variables`; each clause lists variable
/// indices (sorted, no repeats).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PositiveCnf {
    variables: usize,
    clauses: Vec<Vec<usize>>,
}

impl PositiveCnf {
    pub fn new(variables: usize, clauses: Vec<Vec<usize>>) -> Result<Self> {
        if variables == 0 {
            return Err(Error::invalid("a formula needs at least one variable"));
        }
        let mut normalized = Vec::with_capacity(clauses.len());
        for (i, mut clause) in clauses.into_iter().enumerate() {
            clause.sort_unstable();
            clause.dedup();
            if clause.is_empty() {
                return Err(Error::invalid(format!("clause {} is empty", i + 1)));
            }
            if let Some(&v) = clause.iter().find(|&&v| v >= variables) {
                return Err(Error::invalid(format!("clause {} mentions variable {} of {variables}", i + 1, v + 1)));
            }
            normalized.push(clause);
        }
        Ok(PositiveCnf { variables, clauses: normalized })
    }

    pub fn variables(&self) -> usize {
        self.variables
    }

    pub fn clauses(&self) -> &[Vec<usize>] {
        &self.clauses
    }

    /// Whether the assignment setting exactly the variables in `mask` to
    /// true satisfies every clause.
    pub fn satisfied_by(&self, mask: u64) -> bool {
        self.clauses.iter().all(|c| c.iter().any(|&v| mask >> v & 1 == 1))
    }

    fn incidence(&self, clause: &[usize]) -> Vec<Rational> {
        (0..self.variables).map(|v| int(clause.contains(&v) as i64)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KnapsackInstance {
    pub b: Vec<u64>,
    pub d: u64,
}

/// Rows `(0,…,0,d+1)` and `(b_1,…,b_ℓ,0)`. Under Sum ascending with 0/1
/// weights on a column set C, the second row overtakes the first iff the
/// last column is in C and the items of C fit into the budget d.
pub fn gen_knapsack_matrix(inst: &KnapsackInstance) -> Result<Matrix> {
    let budget = inst.d.checked_add(1).ok_or_else(|| Error::invalid("budget too large"))?;
    let to_i64 = |v: u64| i64::try_from(v).map_err(|_| Error::invalid(format!("value {v} does not fit in 64 bits")));
    let mut first: Vec<Rational> = vec![int(0); inst.b.len()];
    first.push(int(to_i64(budget)?));
    let mut second = inst.b.iter().map(|&v| to_i64(v).map(int)).collect::<Result<Vec<_>>>()?;
    second.push(int(0));
    Matrix::from_rows(vec![first, second])
}

/// `k−1` zero rows, the clause incidence rows, then one more zero row. The
/// last row makes the top k exactly when the columns kept satisfy φ.
pub fn gen_cnf_topk_matrix(phi: &PositiveCnf, k: usize) -> Result<Matrix> {
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    let zero = vec![int(0); phi.variables];
    let mut rows = vec![zero.clone(); k - 1];
    rows.extend(phi.clauses.iter().map(|c| phi.incidence(c)));
    rows.push(zero);
    Matrix::from_rows(rows)
}

/// Matrices with `ℓ+1` and `ℓ+2` trailing zero rows after the clause rows.
/// Clause rows are sorted into their order under the ranking: index order
/// for Max, by clause size for Sum, lexicographically for Lex.
pub fn gen_md_matrix_pair(phi: &PositiveCnf, spec: RankingSpec) -> Result<(Matrix, Matrix)> {
    let allowed = [RankingSpec::MAX_ASC, RankingSpec::SUM_ASC, RankingSpec::LEX];
    if !allowed.contains(&spec) {
        return Err(Error::invalid(format!(
            "the displacement construction is defined for max-asc, sum and lex, not {spec}"
        )));
    }
    let mut seen = phi.clauses.clone();
    seen.sort();
    if seen.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::invalid("duplicate clauses make the clause-row order ambiguous"));
    }
    let mut rows: Vec<Vec<Rational>> = phi.clauses.iter().map(|c| phi.incidence(c)).collect();
    match spec.score() {
        Score::Sum => rows.sort_by_key(|r| r.iter().filter(|v| **v != int(0)).count()),
        Score::Lex => rows.sort(),
        _ => {}
    }
    let ell = rows.len();
    let zero = vec![int(0); phi.variables];
    let build = |extra: usize| {
        let mut all = rows.clone();
        all.extend(std::iter::repeat_n(zero.clone(), ell + extra));
        Matrix::from_rows(all)
    };
    Ok((build(1)?, build(2)?))
}
