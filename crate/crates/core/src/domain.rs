//! Exact numeric and combinatorial foundations shared by every module:
//! rationals, matrices, permutations, weight vectors and finite per-column
//! weight distributions.
//!
//! Rows and columns are 0-indexed inside the library. The CLI translates to
//! and from the 1-indexed convention used in instance files.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};

/// Exact arbitrary-precision fraction, always kept in canonical form.
pub type Rational = BigRational;

pub fn rat(numer: i64, denom: i64) -> Rational {
    Rational::new(BigInt::from(numer), BigInt::from(denom))
}

pub fn int(value: i64) -> Rational {
    Rational::from_integer(BigInt::from(value))
}

/// Parses `"a"`, `"-a"` or `"a/b"`.
pub fn parse_rational(text: &str) -> Result<Rational> {
    let text = text.trim();
    let (num, den) = match text.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (text, "1"),
    };
    let num: BigInt = num
        .parse()
        .map_err(|_| Error::invalid(format!("malformed rational `{text}`")))?;
    let den: BigInt = den
        .parse()
        .map_err(|_| Error::invalid(format!("malformed rational `{text}`")))?;
    if den.is_zero() {
        return Err(Error::invalid(format!("zero denominator in `{text}`")));
    }
    Ok(Rational::new(num, den))
}

/// Row-major n×m matrix of rationals. The rows are the ranked tuples.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    entries: Vec<Rational>,
}

impl Matrix {
    /// Builds a matrix with at least one row and one column.
    pub fn from_rows(rows: Vec<Vec<Rational>>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::invalid("matrix needs at least one row"));
        }
        let cols = rows[0].len();
        if cols == 0 {
            return Err(Error::invalid("matrix needs at least one column"));
        }
        if let Some(bad) = rows.iter().position(|r| r.len() != cols) {
            return Err(Error::invalid(format!(
                "row {} has {} entries, expected {cols}",
                bad + 1,
                rows[bad].len()
            )));
        }
        let n = rows.len();
        Ok(Matrix {
            rows: n,
            cols,
            entries: rows.into_iter().flatten().collect(),
        })
    }

    pub fn from_i64<R: AsRef<[i64]>>(rows: &[R]) -> Result<Self> {
        Self::from_rows(
            rows.iter()
                .map(|r| r.as_ref().iter().map(|&v| int(v)).collect())
                .collect(),
        )
    }

    /// n×0 matrix; every ranking of it is the identity.
    pub fn empty_columns(rows: usize) -> Self {
        Matrix {
            rows,
            cols: 0,
            entries: Vec::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.rows
    }

    pub fn m(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> &Rational {
        &self.entries[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &[Rational] {
        &self.entries[row * self.cols..(row + 1) * self.cols]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[Rational]> + '_ {
        (0..self.rows).map(move |i| self.row(i))
    }

    pub fn to_rows(&self) -> Vec<Vec<Rational>> {
        self.rows().map(|r| r.to_vec()).collect()
    }

    pub fn map(&self, f: impl Fn(&Rational) -> Rational) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(f).collect(),
        }
    }

    pub fn negated(&self) -> Matrix {
        self.map(|v| -v)
    }

    pub fn min_entry(&self) -> Option<&Rational> {
        self.entries.iter().min()
    }

    pub fn is_integral(&self) -> bool {
        self.entries.iter().all(|v| v.is_integer())
    }
}

/// Subset of column indices, sorted and duplicate free.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct ColumnSet(Vec<usize>);

impl ColumnSet {
    pub fn new(mut members: Vec<usize>) -> Self {
        members.sort_unstable();
        members.dedup();
        ColumnSet(members)
    }

    pub fn all(m: usize) -> Self {
        ColumnSet((0..m).collect())
    }

    pub fn from_mask(mask: u64, m: usize) -> Self {
        ColumnSet((0..m).filter(|j| mask >> j & 1 == 1).collect())
    }

    pub fn members(&self) -> &[usize] {
        &self.0
    }

    pub fn contains(&self, col: usize) -> bool {
        self.0.binary_search(&col).is_ok()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// The 0/1 weight vector selecting exactly these columns.
    pub fn incidence(&self, m: usize) -> WeightVector {
        WeightVector::new(
            (0..m)
                .map(|j| if self.contains(j) { int(1) } else { int(0) })
                .collect(),
        )
    }
}

/// Bijection between rows and ranks, stored in both directions.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Permutation {
    rank_of_row: Vec<usize>,
    row_at_rank: Vec<usize>,
}

impl Permutation {
    pub fn identity(n: usize) -> Self {
        Permutation {
            rank_of_row: (0..n).collect(),
            row_at_rank: (0..n).collect(),
        }
    }

    /// Builds the permutation whose ranks, in order, hold the given rows.
    pub fn from_ranked_rows(row_at_rank: Vec<usize>) -> Result<Self> {
        let n = row_at_rank.len();
        let mut rank_of_row = vec![usize::MAX; n];
        for (rank, &row) in row_at_rank.iter().enumerate() {
            if row >= n || rank_of_row[row] != usize::MAX {
                return Err(Error::invalid(format!(
                    "not a permutation of 0..{n}: {row_at_rank:?}"
                )));
            }
            rank_of_row[row] = rank;
        }
        Ok(Permutation {
            rank_of_row,
            row_at_rank,
        })
    }

    pub fn from_rank_of_row(rank_of_row: Vec<usize>) -> Result<Self> {
        let inverse = Self::from_ranked_rows(rank_of_row)?;
        Ok(Permutation {
            rank_of_row: inverse.row_at_rank,
            row_at_rank: inverse.rank_of_row,
        })
    }

    pub fn n(&self) -> usize {
        self.rank_of_row.len()
    }

    pub fn rank_of(&self, row: usize) -> usize {
        self.rank_of_row[row]
    }

    pub fn row_at(&self, rank: usize) -> usize {
        self.row_at_rank[rank]
    }

    pub fn rank_of_row(&self) -> &[usize] {
        &self.rank_of_row
    }

    pub fn ranked_rows(&self) -> &[usize] {
        &self.row_at_rank
    }

    /// Ranked row sequence with 1-based row labels, e.g. `[4, 1, 2, 3]`.
    pub fn display_sequence(&self) -> Vec<usize> {
        self.row_at_rank.iter().map(|r| r + 1).collect()
    }
}

impl fmt::Display for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let labels: Vec<String> = self.display_sequence().iter().map(|r| r.to_string()).collect();
        write!(f, "({})", labels.join(","))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct WeightVector(Vec<Rational>);

impl WeightVector {
    pub fn new(weights: Vec<Rational>) -> Self {
        WeightVector(weights)
    }

    pub fn ones(m: usize) -> Self {
        WeightVector(vec![int(1); m])
    }

    pub fn from_i64(weights: &[i64]) -> Self {
        WeightVector(weights.iter().map(|&w| int(w)).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[Rational] {
        &self.0
    }
}

/// Finite distribution of one column weight: distinct values, each with a
/// strictly positive probability, summing to exactly one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnDistribution {
    support: Vec<(Rational, Rational)>,
}

impl ColumnDistribution {
    pub fn new(support: Vec<(Rational, Rational)>) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::invalid("distribution with empty support"));
        }
        let mut total = Rational::zero();
        for (i, (value, p)) in support.iter().enumerate() {
            if !p.is_positive() {
                return Err(Error::invalid(format!(
                    "support value {value} has non-positive probability {p}"
                )));
            }
            if support[..i].iter().any(|(v, _)| v == value) {
                return Err(Error::invalid(format!("duplicate support value {value}")));
            }
            total += p;
        }
        if !total.is_one() {
            return Err(Error::invalid(format!(
                "probabilities sum to {total}, expected exactly 1"
            )));
        }
        Ok(ColumnDistribution { support })
    }

    pub fn point_mass(value: Rational) -> Self {
        ColumnDistribution {
            support: vec![(value, Rational::one())],
        }
    }

    pub fn uniform(values: Vec<Rational>) -> Result<Self> {
        let p = Rational::new(BigInt::one(), BigInt::from(values.len().max(1)));
        Self::new(values.into_iter().map(|v| (v, p.clone())).collect())
    }

    pub fn uniform_i64(values: &[i64]) -> Result<Self> {
        Self::uniform(values.iter().map(|&v| int(v)).collect())
    }

    /// `theta·δ(value) + (1−theta)·self`, merging the point mass into an
    /// existing support entry when `value` is already in the support.
    pub fn mix_with_point(&self, value: &Rational, theta: &Rational) -> Self {
        if theta.is_one() {
            return Self::point_mass(value.clone());
        }
        let rest = Rational::one() - theta;
        let mut support: Vec<(Rational, Rational)> = self
            .support
            .iter()
            .map(|(v, p)| (v.clone(), p * &rest))
            .collect();
        match support.iter_mut().find(|(v, _)| v == value) {
            Some(entry) => entry.1 += theta,
            None => support.push((value.clone(), theta.clone())),
        }
        support.retain(|(_, p)| p.is_positive());
        ColumnDistribution { support }
    }

    pub fn support(&self) -> &[(Rational, Rational)] {
        &self.support
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn value(&self, index: usize) -> &Rational {
        &self.support[index].0
    }

    pub fn probability(&self, index: usize) -> &Rational {
        &self.support[index].1
    }

    pub fn index_of(&self, value: &Rational) -> Option<usize> {
        self.support.iter().position(|(v, _)| v == value)
    }

    pub fn values(&self) -> impl Iterator<Item = &Rational> + '_ {
        self.support.iter().map(|(v, _)| v)
    }

    pub fn is_integral(&self) -> bool {
        self.support.iter().all(|(v, _)| v.is_integer())
    }
}

/// Fully factorized distribution: one independent finite law per column.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProductDistribution {
    columns: Vec<ColumnDistribution>,
}

impl ProductDistribution {
    pub fn new(columns: Vec<ColumnDistribution>) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::invalid("product distribution needs at least one column"));
        }
        Ok(ProductDistribution { columns })
    }

    pub fn uniform_i64(m: usize, values: &[i64]) -> Result<Self> {
        Self::new(
            (0..m)
                .map(|_| ColumnDistribution::uniform_i64(values))
                .collect::<Result<_>>()?,
        )
    }

    pub fn point_masses(weights: &WeightVector) -> Result<Self> {
        Self::new(
            weights
                .values()
                .iter()
                .map(|w| ColumnDistribution::point_mass(w.clone()))
                .collect(),
        )
    }

    pub fn m(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, j: usize) -> &ColumnDistribution {
        &self.columns[j]
    }

    pub fn columns(&self) -> &[ColumnDistribution] {
        &self.columns
    }

    /// Total number of value/probability pairs.
    pub fn total_pairs(&self) -> usize {
        self.columns.iter().map(|c| c.len()).sum()
    }

    /// Number of weight vectors in the product support, saturating.
    pub fn space_size(&self) -> u128 {
        self.columns
            .iter()
            .try_fold(1u128, |acc, c| acc.checked_mul(c.len() as u128))
            .unwrap_or(u128::MAX)
    }

    pub fn with_column(&self, j: usize, column: ColumnDistribution) -> Self {
        let mut columns = self.columns.clone();
        columns[j] = column;
        ProductDistribution { columns }
    }

    pub fn is_integral(&self) -> bool {
        self.columns.iter().all(|c| c.is_integral())
    }

    pub fn check_width(&self, m: usize) -> Result<()> {
        if self.m() != m {
            return Err(Error::invalid(format!(
                "distribution has {} columns but the matrix has {m}",
                self.m()
            )));
        }
        Ok(())
    }

    /// The weight vector selected by one support index per column.
    pub fn weights_at(&self, indices: &[usize]) -> WeightVector {
        WeightVector(
            indices
                .iter()
                .enumerate()
                .map(|(j, &a)| self.columns[j].value(a).clone())
                .collect(),
        )
    }

    pub fn probability_at(&self, indices: &[usize]) -> Rational {
        indices
            .iter()
            .enumerate()
            .fold(Rational::one(), |acc, (j, &a)| acc * self.columns[j].probability(a))
    }
}

/// `M ∘ u`: column j scaled by `u[j]`.
pub fn apply_weights(matrix: &Matrix, weights: &WeightVector) -> Result<Matrix> {
    if weights.len() != matrix.m() {
        return Err(Error::invalid(format!(
            "weight vector has length {} but the matrix has {} columns",
            weights.len(),
            matrix.m()
        )));
    }
    let w = weights.values();
    Ok(Matrix {
        rows: matrix.rows,
        cols: matrix.cols,
        entries: matrix
            .entries
            .iter()
            .enumerate()
            .map(|(idx, v)| v * &w[idx % matrix.cols])
            .collect(),
    })
}

/// Keeps only the columns in `columns`, preserving their order.
pub fn restrict_columns(matrix: &Matrix, columns: &ColumnSet) -> Result<Matrix> {
    if let Some(&bad) = columns.members().iter().find(|&&c| c >= matrix.m()) {
        return Err(Error::invalid(format!(
            "column {} out of range for a matrix with {} columns",
            bad + 1,
            matrix.m()
        )));
    }
    if columns.is_empty() {
        return Ok(Matrix::empty_columns(matrix.n()));
    }
    Ok(Matrix {
        rows: matrix.rows,
        cols: columns.len(),
        entries: matrix
            .rows()
            .flat_map(|row| columns.members().iter().map(move |&c| row[c].clone()))
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn golden() -> Matrix {
        Matrix::from_i64(&[[20, 26], [30, 13], [40, 0], [0, 39]]).unwrap()
    }

    #[test]
    fn weights_scale_columns() {
        let weighted = apply_weights(&golden(), &WeightVector::from_i64(&[1, 2])).unwrap();
        let sums: Vec<Rational> = weighted.rows().map(|r| r.iter().sum()).collect();
        assert_eq!(sums, vec![int(72), int(56), int(40), int(78)]);
    }

    #[test]
    fn identity_and_zero_weights() {
        let m = golden();
        assert_eq!(apply_weights(&m, &WeightVector::ones(2)).unwrap(), m);
        let zero = apply_weights(&m, &WeightVector::from_i64(&[0, 0])).unwrap();
        assert!(zero.rows().flatten().all(|v| v.is_zero()));
    }

    #[test]
    fn weight_length_mismatch_rejected() {
        assert!(apply_weights(&golden(), &WeightVector::from_i64(&[1])).is_err());
    }

    #[test]
    fn restriction() {
        let m = Matrix::from_i64(&[[1, 2, 3], [4, 5, 6]]).unwrap();
        let r = restrict_columns(&m, &ColumnSet::new(vec![0, 2])).unwrap();
        assert_eq!(r, Matrix::from_i64(&[[1, 3], [4, 6]]).unwrap());
        assert_eq!(restrict_columns(&m, &ColumnSet::all(3)).unwrap(), m);
        let empty = restrict_columns(&m, &ColumnSet::default()).unwrap();
        assert_eq!((empty.n(), empty.m()), (2, 0));
        assert!(restrict_columns(&m, &ColumnSet::new(vec![3])).is_err());
    }

    #[test]
    fn parse_forms() {
        assert_eq!(parse_rational("3").unwrap(), int(3));
        assert_eq!(parse_rational("-3").unwrap(), int(-3));
        assert_eq!(parse_rational("6/8").unwrap(), rat(3, 4));
        assert_eq!(parse_rational("-1/2").unwrap(), rat(-1, 2));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("x").is_err());
        assert!(parse_rational("0.5").is_err());
    }

    #[test]
    fn distribution_validation() {
        assert!(ColumnDistribution::new(vec![(int(1), rat(1, 2)), (int(2), rat(1, 2))]).is_ok());
        // zero-probability entries are rejected rather than dropped
        assert!(ColumnDistribution::new(vec![(int(1), int(1)), (int(2), int(0))]).is_err());
        assert!(ColumnDistribution::new(vec![(int(1), rat(1, 2)), (int(2), rat(1, 3))]).is_err());
        assert!(ColumnDistribution::new(vec![(int(1), rat(1, 2)), (int(1), rat(1, 2))]).is_err());
        assert!(ColumnDistribution::new(vec![]).is_err());
    }

    #[test]
    fn mixing_merges_masses() {
        let d = ColumnDistribution::uniform_i64(&[1, 2]).unwrap();
        let mixed = d.mix_with_point(&int(1), &rat(1, 3));
        assert_eq!(mixed.len(), 2);
        assert_eq!(mixed.probability(0), &rat(2, 3));
        assert_eq!(mixed.probability(1), &rat(1, 3));
        let fresh = ColumnDistribution::point_mass(int(0)).mix_with_point(&int(1), &rat(1, 4));
        assert_eq!(fresh.support(), &[(int(0), rat(3, 4)), (int(1), rat(1, 4))]);
    }

    #[test]
    fn incidence_zeroes_outside_columns() {
        let m = Matrix::from_i64(&[[1, 2, 3], [4, 5, 6]]).unwrap();
        let c = ColumnSet::new(vec![1]);
        let w = apply_weights(&m, &c.incidence(3)).unwrap();
        assert_eq!(w, Matrix::from_i64(&[[0, 2, 0], [0, 5, 0]]).unwrap());
    }

    proptest! {
        #[test]
        fn permutation_inverse_roundtrip(seq in Just((0..7usize).collect::<Vec<_>>()).prop_shuffle()) {
            let p = Permutation::from_ranked_rows(seq.clone()).unwrap();
            for i in 0..seq.len() {
                prop_assert_eq!(p.row_at(p.rank_of(i)), i);
                prop_assert_eq!(p.rank_of(p.row_at(i)), i);
            }
            let q = Permutation::from_rank_of_row(p.rank_of_row().to_vec()).unwrap();
            prop_assert_eq!(p, q);
        }

        #[test]
        fn rational_sums_are_order_independent(
            xs in proptest::collection::vec((-50i64..50, 1i64..20), 1..12)
        ) {
            let values: Vec<Rational> = xs.iter().map(|&(a, b)| rat(a, b)).collect();
            let forward: Rational = values.iter().sum();
            let backward: Rational = values.iter().rev().sum();
            prop_assert_eq!(&forward, &backward);
            let text = forward.to_string();
            prop_assert_eq!(parse_rational(&text).unwrap(), forward);
        }
    }
}
