//! Precedence probabilities for two rows under random column weights, and
//! the weight-selection algebra used to intersect precedence events.
//!
//! For Max and Lex the event "x precedes y" is decomposed into disjoint
//! boxes of the weight space: each box fixes, per column, a subset of that
//! column's support. Sum is handled by a pseudo-polynomial dynamic program
//! over the running score difference.

use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::domain::{ProductDistribution, Rational};
use crate::error::{Error, Hardness, Result};
use crate::ranking::{CanonicalRanking, Direction, RankingSpec};

/// Which of the two compared rows precedes when their scores tie.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TieOrientation {
    FirstRow,
    SecondRow,
}

impl TieOrientation {
    /// Orientation implied by index tie-breaking for rows `first`, `second`.
    pub fn by_index(first: usize, second: usize) -> Self {
        if first <= second {
            TieOrientation::FirstRow
        } else {
            TieOrientation::SecondRow
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            TieOrientation::FirstRow => TieOrientation::SecondRow,
            TieOrientation::SecondRow => TieOrientation::FirstRow,
        }
    }
}

/// How integers in the input are encoded. Only unary inputs admit the
/// pseudo-polynomial Sum algorithms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Encoding {
    #[default]
    Unary,
    Binary,
}

/// Subset of one column's support, as a bitset over support indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SupportSet {
    bits: Vec<u64>,
    len: usize,
}

impl SupportSet {
    pub fn empty(len: usize) -> Self {
        SupportSet { bits: vec![0; len.div_ceil(64)], len }
    }

    pub fn full(len: usize) -> Self {
        let mut s = Self::empty(len);
        for i in 0..len {
            s.insert(i);
        }
        s
    }

    pub fn singleton(len: usize, index: usize) -> Self {
        let mut s = Self::empty(len);
        s.insert(index);
        s
    }

    pub fn from_fn(len: usize, mut keep: impl FnMut(usize) -> bool) -> Self {
        let mut s = Self::empty(len);
        for i in (0..len).filter(|&i| keep(i)) {
            s.insert(i);
        }
        s
    }

    pub fn insert(&mut self, index: usize) {
        self.bits[index / 64] |= 1 << (index % 64);
    }

    pub fn contains(&self, index: usize) -> bool {
        index < self.len && self.bits[index / 64] >> (index % 64) & 1 == 1
    }

    pub fn is_empty(&self) -> bool {
        self.bits.iter().all(|&w| w == 0)
    }

    pub fn intersect(&self, other: &SupportSet) -> SupportSet {
        SupportSet {
            bits: self.bits.iter().zip(&other.bits).map(|(a, b)| a & b).collect(),
            len: self.len,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len).filter(move |&i| self.contains(i))
    }

    pub fn count(&self) -> usize {
        self.bits.iter().map(|w| w.count_ones() as usize).sum()
    }
}

/// One box `×_j per_column[j]` of weight vectors.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct WeightTerm {
    pub per_column: Vec<SupportSet>,
}

impl WeightTerm {
    pub fn full(dist: &ProductDistribution) -> Self {
        WeightTerm {
            per_column: dist.columns().iter().map(|c| SupportSet::full(c.len())).collect(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.per_column.iter().any(|s| s.is_empty())
    }

    pub fn contains(&self, indices: &[usize]) -> bool {
        self.per_column.iter().zip(indices).all(|(s, &a)| s.contains(a))
    }

    pub fn intersect(&self, other: &WeightTerm) -> WeightTerm {
        WeightTerm {
            per_column: self
                .per_column
                .iter()
                .zip(&other.per_column)
                .map(|(a, b)| a.intersect(b))
                .collect(),
        }
    }

    pub fn probability(&self, dist: &ProductDistribution) -> Rational {
        let mut p = Rational::one();
        for (j, set) in self.per_column.iter().enumerate() {
            let mass: Rational = set.iter().map(|a| dist.column(j).probability(a)).sum();
            if mass.is_zero() {
                return mass;
            }
            p *= mass;
        }
        p
    }
}

/// Disjoint union of weight boxes, representing an event over weight
/// vectors.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct WeightSelection {
    pub terms: Vec<WeightTerm>,
}

impl WeightSelection {
    pub fn empty() -> Self {
        WeightSelection { terms: Vec::new() }
    }

    pub fn full(dist: &ProductDistribution) -> Self {
        WeightSelection { terms: vec![WeightTerm::full(dist)] }
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    fn push(&mut self, term: WeightTerm) {
        if !term.is_empty() {
            self.terms.push(term);
        }
    }

    /// Number of terms containing the weight vector given by support
    /// indices. At most one for a well-formed selection.
    pub fn matches(&self, indices: &[usize]) -> usize {
        self.terms.iter().filter(|t| t.contains(indices)).count()
    }

    pub fn contains(&self, indices: &[usize]) -> bool {
        self.terms.iter().any(|t| t.contains(indices))
    }
}

/// All pairwise box intersections, empty boxes dropped.
pub fn intersect_selections(a: &WeightSelection, b: &WeightSelection) -> WeightSelection {
    let mut out = WeightSelection::empty();
    for ta in &a.terms {
        for tb in &b.terms {
            out.push(ta.intersect(tb));
        }
    }
    out
}

pub fn selection_probability(selection: &WeightSelection, dist: &ProductDistribution) -> Rational {
    selection.terms.iter().map(|t| t.probability(dist)).sum()
}

/// Weighted value of a row (or a merged group of rows) per column and
/// support index: `table[j][a]`.
pub(crate) type WeightedTable = Vec<Vec<Rational>>;

pub(crate) fn weighted_table(row: &[Rational], dist: &ProductDistribution) -> WeightedTable {
    row.iter()
        .enumerate()
        .map(|(j, x)| dist.column(j).values().map(|v| v * x).collect())
        .collect()
}

/// Per-column maximum weighted value over a group of rows. For a
/// non-negative weight this is the weight times the column maximum, for a
/// negative one the weight times the column minimum.
pub(crate) fn merged_table(rows: &[&[Rational]], dist: &ProductDistribution) -> WeightedTable {
    let m = dist.m();
    (0..m)
        .map(|j| {
            let hi = rows.iter().map(|r| &r[j]).max().expect("non-empty group");
            let lo = rows.iter().map(|r| &r[j]).min().expect("non-empty group");
            dist.column(j)
                .values()
                .map(|v| if v.is_negative() { v * lo } else { v * hi })
                .collect()
        })
        .collect()
}

/// Event `max_j a_j(u_j) > max_j b_j(u_j)` (or `>=` when `strict` is false).
///
/// Split by the first column j attaining the maximum of `a` and its weight
/// v: earlier columns of `a` must stay strictly below, later ones at most
/// equal, and every column of `b` below (or equal to) the maximum.
pub(crate) fn max_beats(
    a: &WeightedTable,
    b: &WeightedTable,
    strict: bool,
    dist: &ProductDistribution,
) -> WeightSelection {
    let beats = |lhs: &Rational, rhs: &Rational| if strict { lhs > rhs } else { lhs >= rhs };
    let m = dist.m();
    let mut out = WeightSelection::empty();
    for j in 0..m {
        let len_j = dist.column(j).len();
        for v in 0..len_j {
            let top = &a[j][v];
            if !beats(top, &b[j][v]) {
                continue;
            }
            let mut per_column = Vec::with_capacity(m);
            let mut dead = false;
            for k in 0..m {
                let set = if k == j {
                    SupportSet::singleton(len_j, v)
                } else {
                    SupportSet::from_fn(dist.column(k).len(), |w| {
                        let own_ok = if k < j { top > &a[k][w] } else { top >= &a[k][w] };
                        own_ok && beats(top, &b[k][w])
                    })
                };
                if set.is_empty() {
                    dead = true;
                    break;
                }
                per_column.push(set);
            }
            if !dead {
                out.push(WeightTerm { per_column });
            }
        }
    }
    out
}

/// Selection of weights under which `x` precedes `y` by Max in the given
/// direction.
pub(crate) fn max_selection(
    x: &WeightedTable,
    y: &WeightedTable,
    direction: Direction,
    tie: TieOrientation,
    dist: &ProductDistribution,
) -> WeightSelection {
    // x first wins ties, so x needs only a non-strict win
    let strict = tie == TieOrientation::SecondRow;
    match direction {
        Direction::Asc => max_beats(y, x, strict, dist),
        Direction::Dsc => max_beats(x, y, strict, dist),
    }
}

/// Lexicographic (ascending) precedence of `x` over `y`: the first column
/// whose weighted entries differ decides; if none does, the tie winner.
pub(crate) fn lex_selection(
    x: &[Rational],
    y: &[Rational],
    tie: TieOrientation,
    dist: &ProductDistribution,
) -> WeightSelection {
    let m = dist.m();
    let tied: Vec<SupportSet> = (0..m)
        .map(|k| {
            let col = dist.column(k);
            SupportSet::from_fn(col.len(), |w| col.value(w) * &x[k] == col.value(w) * &y[k])
        })
        .collect();
    let mut out = WeightSelection::empty();
    for j in 0..m {
        let col = dist.column(j);
        if tied[..j].iter().any(|s| s.is_empty()) {
            break;
        }
        for v in 0..col.len() {
            let value = col.value(v);
            if value * &x[j] >= value * &y[j] {
                continue;
            }
            let per_column = (0..m)
                .map(|k| match k.cmp(&j) {
                    std::cmp::Ordering::Less => tied[k].clone(),
                    std::cmp::Ordering::Equal => SupportSet::singleton(col.len(), v),
                    std::cmp::Ordering::Greater => SupportSet::full(dist.column(k).len()),
                })
                .collect();
            out.push(WeightTerm { per_column });
        }
    }
    if tie == TieOrientation::FirstRow {
        out.push(WeightTerm { per_column: tied });
    }
    out
}

/// Selection for canonical Max or Lex rankings (rows already normalized).
pub(crate) fn canonical_selection(
    ranking: CanonicalRanking,
    x: &[Rational],
    y: &[Rational],
    tie: TieOrientation,
    dist: &ProductDistribution,
) -> WeightSelection {
    match ranking {
        CanonicalRanking::MaxAsc | CanonicalRanking::MaxDsc => {
            let dir = if ranking == CanonicalRanking::MaxAsc { Direction::Asc } else { Direction::Dsc };
            max_selection(&weighted_table(x, dist), &weighted_table(y, dist), dir, tie, dist)
        }
        CanonicalRanking::Lex => lex_selection(x, y, tie, dist),
        CanonicalRanking::Sum => unreachable!("Sum precedence has no weight-selection form"),
    }
}

fn check_rows(x: &[Rational], y: &[Rational], dist: &ProductDistribution) -> Result<()> {
    if x.len() != y.len() || x.len() != dist.m() {
        return Err(Error::invalid(format!(
            "rows of length {} and {} against a distribution over {} columns",
            x.len(),
            y.len(),
            dist.m()
        )));
    }
    Ok(())
}

/// Probability that `x` precedes `y` under Max in the given direction, with
/// the disjoint weight selection on request.
pub fn prec_max(
    x: &[Rational],
    y: &[Rational],
    dist: &ProductDistribution,
    direction: Direction,
    tie: TieOrientation,
    want_weights: bool,
) -> Result<(Rational, Option<WeightSelection>)> {
    check_rows(x, y, dist)?;
    let sel = max_selection(&weighted_table(x, dist), &weighted_table(y, dist), direction, tie, dist);
    let p = selection_probability(&sel, dist);
    Ok((p, want_weights.then_some(sel)))
}

/// Probability that `x` precedes `y` under ascending lexicographic order.
pub fn prec_lex(
    x: &[Rational],
    y: &[Rational],
    dist: &ProductDistribution,
    tie: TieOrientation,
    want_weights: bool,
) -> Result<(Rational, Option<WeightSelection>)> {
    check_rows(x, y, dist)?;
    let sel = lex_selection(x, y, tie, dist);
    let p = selection_probability(&sel, dist);
    Ok((p, want_weights.then_some(sel)))
}

/// Default bound on the number of score-difference states of the Sum DP.
pub const DEFAULT_DP_STATE_CAP: usize = 10_000_000;

/// Size of a Sum dynamic program, reported before allocation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SumDpStats {
    /// Largest absolute running score difference.
    pub bound: i64,
    /// Distinct score-difference values, `2·bound + 1`.
    pub states: usize,
    /// Table cells over all columns, `m · states`.
    pub cells: usize,
}

pub(crate) fn to_i64(v: &Rational, what: &str) -> Result<i64> {
    if !v.is_integer() {
        return Err(Error::invalid(format!(
            "{what} {v} is not an integer; the unary Sum algorithms need integer entries and weights"
        )));
    }
    v.to_integer()
        .to_i64()
        .ok_or_else(|| Error::invalid(format!("{what} {v} does not fit in 64 bits")))
}

/// Integer weights per column, checked for the unary regime.
pub(crate) fn integer_supports(dist: &ProductDistribution) -> Result<Vec<Vec<i64>>> {
    dist.columns()
        .iter()
        .map(|c| c.values().map(|v| to_i64(v, "weight")).collect())
        .collect()
}

/// Work out the table size of the Sum DP for per-column coefficient `diffs`.
pub(crate) fn sum_dp_stats(diffs: &[i64], weights: &[Vec<i64>]) -> Result<SumDpStats> {
    let overflow = || Error::ResourceCap {
        cap: "max_dp_states",
        detail: "score-difference range overflows 64 bits".into(),
    };
    let mut bound: i64 = 0;
    for (d, ws) in diffs.iter().zip(weights) {
        let widest = ws
            .iter()
            .map(|w| w.checked_mul(*d).map(|p| p.checked_abs()))
            .try_fold(0i64, |acc, p| p.flatten().map(|p| acc.max(p)))
            .ok_or_else(overflow)?;
        bound = bound.checked_add(widest).ok_or_else(overflow)?;
    }
    let states = usize::try_from(bound)
        .ok()
        .and_then(|b| b.checked_mul(2))
        .and_then(|b| b.checked_add(1))
        .ok_or_else(overflow)?;
    Ok(SumDpStats { bound, states, cells: states.saturating_mul(diffs.len()) })
}

/// Probability that `x` precedes `y` under Sum ascending, by a dynamic
/// program over the running difference `Σ u_j (y[j] − x[j])`: `x` precedes
/// iff the final difference is positive, or zero with `x` winning the tie.
pub fn prec_sum_dp(
    x: &[Rational],
    y: &[Rational],
    dist: &ProductDistribution,
    tie: TieOrientation,
) -> Result<Rational> {
    prec_sum_dp_with_cap(x, y, dist, tie, DEFAULT_DP_STATE_CAP).map(|(p, _)| p)
}

pub fn prec_sum_dp_with_cap(
    x: &[Rational],
    y: &[Rational],
    dist: &ProductDistribution,
    tie: TieOrientation,
    state_cap: usize,
) -> Result<(Rational, SumDpStats)> {
    check_rows(x, y, dist)?;
    let weights = integer_supports(dist)?;
    let diffs: Vec<i64> = x
        .iter()
        .zip(y)
        .map(|(a, b)| Ok(to_i64(b, "matrix entry")? - to_i64(a, "matrix entry")?))
        .collect::<Result<_>>()?;
    let stats = sum_dp_stats(&diffs, &weights)?;
    if stats.states > state_cap {
        return Err(Error::ResourceCap {
            cap: "max_dp_states",
            detail: format!("Sum DP needs {} states, cap is {state_cap}", stats.states),
        });
    }
    let offset = stats.bound;
    let mut table = vec![Rational::zero(); stats.states];
    table[offset as usize] = Rational::one();
    // reachable window, to skip the zero tails
    let (mut lo, mut hi) = (0i64, 0i64);
    for (j, d) in diffs.iter().enumerate() {
        let col = dist.column(j);
        let mut next = vec![Rational::zero(); stats.states];
        let (mut nlo, mut nhi) = (i64::MAX, i64::MIN);
        for s in lo..=hi {
            let cur = &table[(s + offset) as usize];
            if cur.is_zero() {
                continue;
            }
            for (a, w) in weights[j].iter().enumerate() {
                let t = s + w * d;
                next[(t + offset) as usize] += cur * col.probability(a);
                nlo = nlo.min(t);
                nhi = nhi.max(t);
            }
        }
        table = next;
        lo = nlo;
        hi = nhi;
    }
    let threshold = match tie {
        TieOrientation::FirstRow => 0,
        TieOrientation::SecondRow => 1,
    };
    let p = (threshold.max(lo)..=hi)
        .map(|s| &table[(s + offset) as usize])
        .sum();
    Ok((p, stats))
}

/// Probability that row `x` precedes row `y` under `spec`, dispatching to
/// the Sum DP, the Max decomposition or the Lex decomposition.
pub fn prec_probability(
    x: &[Rational],
    y: &[Rational],
    dist: &ProductDistribution,
    spec: RankingSpec,
    tie: TieOrientation,
    encoding: Encoding,
) -> Result<Rational> {
    check_rows(x, y, dist)?;
    let (canonical, negate) = spec.canonical();
    let (x, y): (Vec<Rational>, Vec<Rational>) = if negate {
        (x.iter().map(|v| -v).collect(), y.iter().map(|v| -v).collect())
    } else {
        (x.to_vec(), y.to_vec())
    };
    match canonical {
        CanonicalRanking::Sum => {
            if encoding == Encoding::Binary {
                return Err(Error::ExactIntractable {
                    cell: format!("{spec} with binary encoding, precedence"),
                    hardness: Hardness::SumBinary,
                });
            }
            prec_sum_dp(&x, &y, dist, tie)
        }
        CanonicalRanking::MaxAsc => prec_max(&x, &y, dist, Direction::Asc, tie, false).map(|r| r.0),
        CanonicalRanking::MaxDsc => prec_max(&x, &y, dist, Direction::Dsc, tie, false).map(|r| r.0),
        CanonicalRanking::Lex => prec_lex(&x, &y, dist, tie, false).map(|r| r.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{int, rat, ColumnDistribution, Matrix, WeightVector};
    use crate::ranking::rank_matrix;
    use proptest::prelude::*;

    fn row(v: &[i64]) -> Vec<Rational> {
        v.iter().map(|&x| int(x)).collect()
    }

    fn binary(m: usize) -> ProductDistribution {
        ProductDistribution::uniform_i64(m, &[0, 1]).unwrap()
    }

    /// Brute-force precedence by full enumeration, with rows 0 = x, 1 = y.
    fn enumerate(x: &[Rational], y: &[Rational], dist: &ProductDistribution, spec: RankingSpec, tie: TieOrientation) -> Rational {
        let matrix = match tie {
            TieOrientation::FirstRow => Matrix::from_rows(vec![x.to_vec(), y.to_vec()]).unwrap(),
            TieOrientation::SecondRow => Matrix::from_rows(vec![y.to_vec(), x.to_vec()]).unwrap(),
        };
        let x_row = match tie {
            TieOrientation::FirstRow => 0,
            TieOrientation::SecondRow => 1,
        };
        let mut total = Rational::zero();
        for_each_index(dist, |idx| {
            let w = dist.weights_at(idx);
            let weighted = crate::domain::apply_weights(&matrix, &w).unwrap();
            if rank_matrix(&weighted, spec).rank_of(x_row) == 0 {
                total += dist.probability_at(idx);
            }
        });
        total
    }

    fn for_each_index(dist: &ProductDistribution, mut f: impl FnMut(&[usize])) {
        let m = dist.m();
        let mut idx = vec![0usize; m];
        loop {
            f(&idx);
            let mut j = 0;
            while j < m {
                idx[j] += 1;
                if idx[j] < dist.column(j).len() {
                    break;
                }
                idx[j] = 0;
                j += 1;
            }
            if j == m {
                return;
            }
        }
    }

    #[test]
    fn max_asc_worked_example() {
        let (x, y) = (row(&[3, 5, 2]), row(&[4, 1, 6]));
        let dist = binary(3);
        let (p, sel) = prec_max(&x, &y, &dist, Direction::Asc, TieOrientation::SecondRow, true).unwrap();
        assert_eq!(p, rat(5, 8));
        let sel = sel.unwrap();
        let masses: Vec<Rational> = sel.terms.iter().map(|t| t.probability(&dist)).collect();
        assert_eq!(masses, vec![rat(1, 8), rat(4, 8)]);
        let sets = |t: &WeightTerm| t.per_column.iter().map(|s| s.iter().collect::<Vec<_>>()).collect::<Vec<_>>();
        assert_eq!(sets(&sel.terms[0]), vec![vec![1], vec![0], vec![0]]);
        assert_eq!(sets(&sel.terms[1]), vec![vec![0, 1], vec![0, 1], vec![1]]);
        assert_eq!(selection_probability(&sel, &dist), rat(5, 8));
    }

    #[test]
    fn max_dsc_worked_example() {
        let (x, y) = (row(&[3, 5, 2]), row(&[4, 1, 6]));
        let (p, _) = prec_max(&x, &y, &binary(3), Direction::Dsc, TieOrientation::FirstRow, false).unwrap();
        assert_eq!(p, rat(3, 8));
    }

    #[test]
    fn identical_rows_follow_tie() {
        let x = row(&[2, -1, 3]);
        let dist = ProductDistribution::uniform_i64(3, &[-1, 0, 2]).unwrap();
        for spec in RankingSpec::all() {
            let p = prec_probability(&x, &x, &dist, spec, TieOrientation::FirstRow, Encoding::Unary).unwrap();
            assert_eq!(p, int(1), "{spec}");
        }
    }

    #[test]
    fn dominance_under_positive_weights() {
        let dist = ProductDistribution::uniform_i64(2, &[1, 2]).unwrap();
        let (p, _) = prec_max(&row(&[5, 6]), &row(&[1, 2]), &dist, Direction::Dsc, TieOrientation::FirstRow, false).unwrap();
        assert_eq!(p, int(1));
    }

    #[test]
    fn sum_dp_examples() {
        let dist = binary(2);
        let p = prec_sum_dp(&row(&[1, 2]), &row(&[2, 1]), &dist, TieOrientation::FirstRow).unwrap();
        assert_eq!(p, rat(3, 4));
        // knapsack layout b = (1, 2), d = 2: row 2 before row 1 (row 1 wins ties)
        let p = prec_sum_dp(&row(&[1, 2, 0]), &row(&[0, 0, 3]), &binary(3), TieOrientation::SecondRow).unwrap();
        assert_eq!(p, rat(3, 8));
        let x = row(&[4, -2]);
        assert_eq!(prec_sum_dp(&x, &x, &dist, TieOrientation::FirstRow).unwrap(), int(1));
        assert_eq!(prec_sum_dp(&x, &x, &dist, TieOrientation::SecondRow).unwrap(), int(0));
    }

    #[test]
    fn sum_dp_cap_and_integrality() {
        let dist = binary(2);
        let err = prec_sum_dp_with_cap(&row(&[0, 0]), &row(&[100, 100]), &dist, TieOrientation::FirstRow, 10).unwrap_err();
        assert!(matches!(err, Error::ResourceCap { .. }));
        let frac = vec![rat(1, 2), int(0)];
        assert!(matches!(prec_sum_dp(&frac, &row(&[0, 1]), &dist, TieOrientation::FirstRow), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn sum_binary_is_refused() {
        let err = prec_probability(&row(&[1]), &row(&[2]), &binary(1), RankingSpec::SUM_ASC, TieOrientation::FirstRow, Encoding::Binary).unwrap_err();
        assert!(matches!(err, Error::ExactIntractable { hardness: Hardness::SumBinary, .. }));
    }

    #[test]
    fn lex_examples() {
        let dist = binary(2);
        let (p, _) = prec_lex(&row(&[1, 5]), &row(&[2, 0]), &dist, TieOrientation::FirstRow, false).unwrap();
        assert_eq!(p, rat(3, 4));
        let x = row(&[7, 7]);
        assert_eq!(prec_lex(&x, &x, &dist, TieOrientation::FirstRow, false).unwrap().0, int(1));
        // one column: ties only at weight 0
        let d = ProductDistribution::new(vec![ColumnDistribution::new(vec![(int(0), rat(1, 3)), (int(2), rat(2, 3))]).unwrap()]).unwrap();
        let (p, _) = prec_lex(&row(&[0]), &row(&[1]), &d, TieOrientation::SecondRow, false).unwrap();
        assert_eq!(p, rat(2, 3));
    }

    #[test]
    fn selection_algebra() {
        let dist = binary(3);
        let full = WeightSelection::full(&dist);
        assert_eq!(selection_probability(&full, &dist), int(1));
        assert_eq!(selection_probability(&WeightSelection::empty(), &dist), int(0));
        let (_, sel) = prec_max(&row(&[3, 5, 2]), &row(&[4, 1, 6]), &dist, Direction::Asc, TieOrientation::SecondRow, true).unwrap();
        let sel = sel.unwrap();
        assert_eq!(intersect_selections(&full, &sel), sel);
        let a = WeightSelection { terms: vec![WeightTerm { per_column: vec![SupportSet::singleton(2, 0), SupportSet::full(2), SupportSet::full(2)] }] };
        let b = WeightSelection { terms: vec![WeightTerm { per_column: vec![SupportSet::singleton(2, 1), SupportSet::full(2), SupportSet::full(2)] }] };
        assert!(intersect_selections(&a, &b).is_empty());
        let c = WeightSelection { terms: vec![WeightTerm { per_column: vec![SupportSet::full(2), SupportSet::singleton(2, 1), SupportSet::full(2)] }] };
        let ac = intersect_selections(&a, &c);
        assert_eq!(ac.len(), 1);
        assert_eq!(selection_probability(&ac, &dist), rat(1, 4));
    }

    #[test]
    fn weighted_wrapper_agrees() {
        // the public wrapper negates rows for Min rankings
        let dist = ProductDistribution::uniform_i64(2, &[-1, 1, 2]).unwrap();
        let (x, y) = (row(&[1, -3]), row(&[0, 2]));
        for spec in RankingSpec::all() {
            for tie in [TieOrientation::FirstRow, TieOrientation::SecondRow] {
                let p = prec_probability(&x, &y, &dist, spec, tie, Encoding::Unary).unwrap();
                assert_eq!(p, enumerate(&x, &y, &dist, spec, tie), "{spec} {tie:?}");
            }
        }
        let _ = WeightVector::ones(2);
    }

    fn instance() -> impl Strategy<Value = (Vec<Rational>, Vec<Rational>, ProductDistribution)> {
        (1usize..=5).prop_flat_map(|m| {
            let rows = (proptest::collection::vec(-5i64..=5, m), proptest::collection::vec(-5i64..=5, m));
            let cols = proptest::collection::vec(
                (proptest::sample::subsequence((-3i64..=3).collect::<Vec<_>>(), 1..=3), proptest::collection::vec(1i64..4, 3)),
                m,
            );
            (rows, cols).prop_map(|((x, y), cols)| {
                let dist = ProductDistribution::new(
                    cols.into_iter()
                        .map(|(vals, ws)| {
                            let total: i64 = ws[..vals.len()].iter().sum();
                            ColumnDistribution::new(vals.iter().zip(&ws).map(|(&v, &w)| (int(v), rat(w, total))).collect()).unwrap()
                        })
                        .collect(),
                )
                .unwrap();
                (row(&x), row(&y), dist)
            })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn matches_enumeration((x, y, dist) in instance()) {
            for spec in RankingSpec::all() {
                for tie in [TieOrientation::FirstRow, TieOrientation::SecondRow] {
                    let p = prec_probability(&x, &y, &dist, spec, tie, Encoding::Unary).unwrap();
                    prop_assert_eq!(&p, &enumerate(&x, &y, &dist, spec, tie), "{} {:?}", spec, tie);
                    let q = prec_probability(&y, &x, &dist, spec, tie.flipped(), Encoding::Unary).unwrap();
                    prop_assert_eq!(p + q, int(1));
                }
            }
        }

        #[test]
        fn selections_are_exact_and_disjoint((x, y, dist) in instance()) {
            for tie in [TieOrientation::FirstRow, TieOrientation::SecondRow] {
                let mut sels = Vec::new();
                for dir in [Direction::Asc, Direction::Dsc] {
                    let (p, s) = prec_max(&x, &y, &dist, dir, tie, true).unwrap();
                    let s = s.unwrap();
                    prop_assert_eq!(selection_probability(&s, &dist), p);
                    let spec = if dir == Direction::Asc { RankingSpec::MAX_ASC } else { RankingSpec::MAX_DSC };
                    sels.push((spec, s));
                }
                let (p, s) = prec_lex(&x, &y, &dist, tie, true).unwrap();
                let s = s.unwrap();
                prop_assert_eq!(selection_probability(&s, &dist), p);
                sels.push((RankingSpec::LEX, s));

                let matrix = Matrix::from_rows(vec![x.clone(), y.clone()]).unwrap();
                for (spec, sel) in &sels {
                    let mut failed = None;
                    for_each_index(&dist, |idx| {
                        let hits = sel.matches(idx);
                        let w = dist.weights_at(idx);
                        let weighted = crate::domain::apply_weights(&matrix, &w).unwrap();
                        let sx: Vec<Rational> = weighted.row(0).to_vec();
                        let sy: Vec<Rational> = weighted.row(1).to_vec();
                        let tied = match spec.score() {
                            crate::ranking::Score::Lex => sx == sy,
                            _ => sx.iter().max() == sy.iter().max(),
                        };
                        let strict = {
                            let m2 = Matrix::from_rows(vec![sx.clone(), sy.clone()]).unwrap();
                            rank_matrix(&m2, *spec).rank_of(0) == 0 && !tied
                        };
                        let holds = strict || (tied && tie == TieOrientation::FirstRow);
                        if hits > 1 || (hits == 1) != holds {
                            failed = Some((idx.to_vec(), hits, holds));
                        }
                    });
                    prop_assert!(failed.is_none(), "{}: {:?}", spec, failed);
                }
            }
        }
    }
}
