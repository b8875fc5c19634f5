//! Ranking functions with row-index tie-breaking, and the effect functions
//! that measure how far a permutation moved from a base permutation.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use crate::domain::{int, Matrix, Permutation, Rational};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Score {
    Sum,
    Max,
    Min,
    Lex,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Asc,
    Dsc,
}

impl Direction {
    pub fn flipped(self) -> Self {
        match self {
            Direction::Asc => Direction::Dsc,
            Direction::Dsc => Direction::Asc,
        }
    }
}

/// A ranking function as requested by a caller. Lexicographic ranking is
/// only offered in ascending order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RankingSpec {
    score: Score,
    direction: Direction,
}

/// The four rankings every other one normalizes to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CanonicalRanking {
    /// Sum ascending.
    Sum,
    MaxAsc,
    MaxDsc,
    /// Lexicographic, ascending in every column.
    Lex,
}

impl CanonicalRanking {
    pub fn spec(self) -> RankingSpec {
        match self {
            CanonicalRanking::Sum => RankingSpec::SUM_ASC,
            CanonicalRanking::MaxAsc => RankingSpec::MAX_ASC,
            CanonicalRanking::MaxDsc => RankingSpec::MAX_DSC,
            CanonicalRanking::Lex => RankingSpec::LEX,
        }
    }
}

impl RankingSpec {
    pub const SUM_ASC: RankingSpec = RankingSpec { score: Score::Sum, direction: Direction::Asc };
    pub const SUM_DSC: RankingSpec = RankingSpec { score: Score::Sum, direction: Direction::Dsc };
    pub const MAX_ASC: RankingSpec = RankingSpec { score: Score::Max, direction: Direction::Asc };
    pub const MAX_DSC: RankingSpec = RankingSpec { score: Score::Max, direction: Direction::Dsc };
    pub const MIN_ASC: RankingSpec = RankingSpec { score: Score::Min, direction: Direction::Asc };
    pub const MIN_DSC: RankingSpec = RankingSpec { score: Score::Min, direction: Direction::Dsc };
    pub const LEX: RankingSpec = RankingSpec { score: Score::Lex, direction: Direction::Asc };

    pub fn new(score: Score, direction: Direction) -> Result<Self> {
        if score == Score::Lex && direction == Direction::Dsc {
            return Err(Error::invalid(
                "lexicographic ranking is only supported in ascending order",
            ));
        }
        Ok(RankingSpec { score, direction })
    }

    pub fn score(&self) -> Score {
        self.score
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    /// Canonical ranking plus whether the matrix must be negated entrywise
    /// for the canonical ranking to agree with this one.
    pub fn canonical(&self) -> (CanonicalRanking, bool) {
        match (self.score, self.direction) {
            (Score::Sum, Direction::Asc) => (CanonicalRanking::Sum, false),
            (Score::Sum, Direction::Dsc) => (CanonicalRanking::Sum, true),
            (Score::Max, Direction::Asc) => (CanonicalRanking::MaxAsc, false),
            (Score::Max, Direction::Dsc) => (CanonicalRanking::MaxDsc, false),
            (Score::Min, Direction::Asc) => (CanonicalRanking::MaxDsc, true),
            (Score::Min, Direction::Dsc) => (CanonicalRanking::MaxAsc, true),
            (Score::Lex, _) => (CanonicalRanking::Lex, false),
        }
    }

    pub fn all() -> [RankingSpec; 7] {
        [
            Self::SUM_ASC,
            Self::SUM_DSC,
            Self::MAX_ASC,
            Self::MAX_DSC,
            Self::MIN_ASC,
            Self::MIN_DSC,
            Self::LEX,
        ]
    }
}

impl fmt::Display for RankingSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let score = match self.score {
            Score::Sum => "sum",
            Score::Max => "max",
            Score::Min => "min",
            Score::Lex => "lex",
        };
        let dir = match self.direction {
            Direction::Asc => "asc",
            Direction::Dsc => "dsc",
        };
        write!(f, "{score}-{dir}")
    }
}

impl FromStr for Score {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sum" => Ok(Score::Sum),
            "max" => Ok(Score::Max),
            "min" => Ok(Score::Min),
            "lex" => Ok(Score::Lex),
            other => Err(Error::invalid(format!("unknown score `{other}`"))),
        }
    }
}

impl FromStr for Direction {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "asc" => Ok(Direction::Asc),
            "dsc" | "desc" => Ok(Direction::Dsc),
            other => Err(Error::invalid(format!("unknown direction `{other}`"))),
        }
    }
}

/// Rewrites `(matrix, spec)` into an equivalent canonical ranking problem.
pub fn normalize(matrix: &Matrix, spec: RankingSpec) -> (CanonicalRanking, Matrix) {
    let (canonical, negate) = spec.canonical();
    let m = if negate { matrix.negated() } else { matrix.clone() };
    (canonical, m)
}

fn row_max(row: &[Rational]) -> Option<&Rational> {
    row.iter().max()
}

fn row_min(row: &[Rational]) -> Option<&Rational> {
    row.iter().min()
}

/// Orders rows `a` and `b` (`Less` means `a` comes first) ignoring ties.
fn score_order(spec: RankingSpec, a: &[Rational], b: &[Rational]) -> Ordering {
    let ord = match spec.score {
        Score::Sum => a.iter().sum::<Rational>().cmp(&b.iter().sum::<Rational>()),
        Score::Max => row_max(a).cmp(&row_max(b)),
        Score::Min => row_min(a).cmp(&row_min(b)),
        Score::Lex => a.cmp(b),
    };
    match spec.direction {
        Direction::Asc => ord,
        Direction::Dsc => ord.reverse(),
    }
}

/// Ranks the rows of `matrix`: better score first, lower row index first on
/// ties. An n×0 matrix yields the identity.
pub fn rank_matrix(matrix: &Matrix, spec: RankingSpec) -> Permutation {
    let mut order: Vec<usize> = (0..matrix.n()).collect();
    if matrix.m() > 0 {
        match spec.score {
            // precompute scores so the sort does not re-sum rows
            Score::Sum => {
                let sums: Vec<Rational> = matrix.rows().map(|r| r.iter().sum()).collect();
                order.sort_by(|&a, &b| {
                    let ord = sums[a].cmp(&sums[b]);
                    let ord = if spec.direction == Direction::Dsc { ord.reverse() } else { ord };
                    ord.then(a.cmp(&b))
                });
            }
            _ => order.sort_by(|&a, &b| {
                score_order(spec, matrix.row(a), matrix.row(b)).then(a.cmp(&b))
            }),
        }
    }
    Permutation::from_ranked_rows(order).expect("sorted indices form a permutation")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EffectKind {
    KendallTau,
    MaxDisplacement,
    Hamming,
    Position,
    TopkMembership,
    TopkDifference,
    TopkAnyChange,
}

impl EffectKind {
    pub const ALL: [EffectKind; 7] = [
        EffectKind::KendallTau,
        EffectKind::MaxDisplacement,
        EffectKind::Hamming,
        EffectKind::Position,
        EffectKind::TopkMembership,
        EffectKind::TopkDifference,
        EffectKind::TopkAnyChange,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EffectKind::KendallTau => "kendall_tau",
            EffectKind::MaxDisplacement => "max_displacement",
            EffectKind::Hamming => "hamming",
            EffectKind::Position => "position",
            EffectKind::TopkMembership => "topk_membership",
            EffectKind::TopkDifference => "topk_difference",
            EffectKind::TopkAnyChange => "topk_anychange",
        }
    }

    pub fn needs_row(self) -> bool {
        matches!(self, EffectKind::Position | EffectKind::TopkMembership)
    }

    pub fn needs_k(self) -> bool {
        matches!(
            self,
            EffectKind::TopkMembership | EffectKind::TopkDifference | EffectKind::TopkAnyChange
        )
    }

    pub fn is_topk(self) -> bool {
        self.needs_k()
    }
}

impl fmt::Display for EffectKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EffectKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        EffectKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown effect kind `{s}`")))
    }
}

/// Effect function plus its parameters. `row` is 0-based; `k` counts ranks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EffectSpec {
    pub kind: EffectKind,
    pub row: Option<usize>,
    pub k: Option<usize>,
}

impl EffectSpec {
    pub fn new(kind: EffectKind) -> Self {
        EffectSpec { kind, row: None, k: None }
    }

    pub fn kendall_tau() -> Self {
        Self::new(EffectKind::KendallTau)
    }

    pub fn position(row: usize) -> Self {
        EffectSpec { kind: EffectKind::Position, row: Some(row), k: None }
    }

    pub fn topk_membership(row: usize, k: usize) -> Self {
        EffectSpec { kind: EffectKind::TopkMembership, row: Some(row), k: Some(k) }
    }

    pub fn with_k(kind: EffectKind, k: usize) -> Self {
        EffectSpec { kind, row: None, k: Some(k) }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.kind.needs_row() {
            match self.row {
                Some(r) if r < n => {}
                Some(r) => {
                    return Err(Error::invalid(format!(
                        "row {} out of range for {n} rows",
                        r + 1
                    )))
                }
                None => return Err(Error::invalid(format!("effect {} needs a row", self.kind))),
            }
        }
        if self.kind.needs_k() {
            match self.k {
                Some(k) if (1..=n).contains(&k) => {}
                Some(k) => return Err(Error::invalid(format!("k = {k} outside 1..={n}"))),
                None => return Err(Error::invalid(format!("effect {} needs k", self.kind))),
            }
        }
        Ok(())
    }

    pub(crate) fn row_unchecked(&self) -> usize {
        self.row.expect("validated effect has a row")
    }

    pub(crate) fn k_unchecked(&self) -> usize {
        self.k.expect("validated effect has k")
    }
}

/// Base permutation plus the effect measured against it.
#[derive(Debug, Clone)]
pub struct EffectContext {
    pub base: Permutation,
    pub spec: EffectSpec,
}

impl EffectContext {
    pub fn new(base: Permutation, spec: EffectSpec) -> Result<Self> {
        spec.validate(base.n())?;
        Ok(EffectContext { base, spec })
    }

    /// Integer-valued effect of `pi` relative to the base permutation.
    pub fn eval(&self, pi: &Permutation) -> i64 {
        let base = &self.base;
        let n = base.n();
        match self.spec.kind {
            EffectKind::KendallTau => {
                let mut count = 0i64;
                for a in 0..n {
                    for b in a + 1..n {
                        let (ra, rb) = (base.row_at(a), base.row_at(b));
                        if pi.rank_of(ra) > pi.rank_of(rb) {
                            count += 1;
                        }
                    }
                }
                count
            }
            EffectKind::MaxDisplacement => (0..n)
                .map(|i| (pi.rank_of(i) as i64 - base.rank_of(i) as i64).abs())
                .max()
                .unwrap_or(0),
            EffectKind::Hamming => (0..n).filter(|&i| pi.rank_of(i) != base.rank_of(i)).count() as i64,
            EffectKind::Position => {
                let i = self.spec.row_unchecked();
                pi.rank_of(i) as i64 - base.rank_of(i) as i64
            }
            EffectKind::TopkMembership => {
                let (i, k) = (self.spec.row_unchecked(), self.spec.k_unchecked());
                (pi.rank_of(i) < k) as i64 - (base.rank_of(i) < k) as i64
            }
            EffectKind::TopkDifference => {
                let k = self.spec.k_unchecked();
                let common = topk_overlap(base, pi, k);
                2 * k as i64 - 2 * common as i64
            }
            EffectKind::TopkAnyChange => {
                let k = self.spec.k_unchecked();
                (topk_overlap(base, pi, k) != k) as i64
            }
        }
    }
}

fn topk_overlap(a: &Permutation, b: &Permutation, k: usize) -> usize {
    (0..k).filter(|&r| b.rank_of(a.row_at(r)) < k).count()
}

pub fn effect_value(ctx: &EffectContext, pi: &Permutation) -> Result<Rational> {
    if pi.n() != ctx.base.n() {
        return Err(Error::invalid(format!(
            "permutation over {} rows compared with a base over {}",
            pi.n(),
            ctx.base.n()
        )));
    }
    ctx.spec.validate(pi.n())?;
    Ok(int(ctx.eval(pi)))
}

/// Inclusive range of values the effect can take over permutations of n rows.
pub fn effect_range(spec: &EffectSpec, n: usize) -> (Rational, Rational) {
    let n = n as i64;
    let (lo, hi) = match spec.kind {
        EffectKind::KendallTau => (0, n * (n - 1) / 2),
        EffectKind::MaxDisplacement => (0, n - 1),
        EffectKind::Hamming => (0, n),
        EffectKind::Position => (-(n - 1), n - 1),
        EffectKind::TopkMembership => (-1, 1),
        EffectKind::TopkDifference => (0, 2 * spec.k.unwrap_or(0) as i64),
        EffectKind::TopkAnyChange => (0, 1),
    };
    (int(lo), int(hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{apply_weights, WeightVector};
    use proptest::prelude::*;

    fn golden() -> Matrix {
        Matrix::from_i64(&[[20, 26], [30, 13], [40, 0], [0, 39]]).unwrap()
    }

    fn seq(p: &Permutation) -> Vec<usize> {
        p.display_sequence()
    }

    #[test]
    fn golden_rankings() {
        let m = golden();
        let spec = RankingSpec::SUM_DSC;
        let expected = [([1, 1], [1, 2, 3, 4]), ([1, 2], [4, 1, 2, 3]), ([2, 1], [3, 2, 1, 4]), ([2, 2], [1, 2, 3, 4])];
        for (w, order) in expected {
            let weighted = apply_weights(&m, &WeightVector::from_i64(&w)).unwrap();
            assert_eq!(seq(&rank_matrix(&weighted, spec)), order.to_vec(), "weights {w:?}");
        }
    }

    #[test]
    fn identical_rows_keep_index_order() {
        let m = Matrix::from_i64(&[[3, 1], [3, 1], [3, 1]]).unwrap();
        for spec in RankingSpec::all() {
            assert_eq!(rank_matrix(&m, spec), Permutation::identity(3));
        }
    }

    #[test]
    fn empty_columns_rank_identity() {
        let m = Matrix::empty_columns(4);
        assert_eq!(rank_matrix(&m, RankingSpec::MAX_DSC), Permutation::identity(4));
    }

    #[test]
    fn lex_dsc_rejected() {
        assert!(RankingSpec::new(Score::Lex, Direction::Dsc).is_err());
    }

    #[test]
    fn golden_effects() {
        let base = Permutation::from_ranked_rows(vec![0, 1, 2, 3]).unwrap();
        let pi = Permutation::from_ranked_rows(vec![3, 0, 1, 2]).unwrap();
        let kt = EffectContext::new(base.clone(), EffectSpec::kendall_tau()).unwrap();
        assert_eq!(effect_value(&kt, &pi).unwrap(), int(3));
        let pos = EffectContext::new(base.clone(), EffectSpec::position(3)).unwrap();
        assert_eq!(effect_value(&pos, &pi).unwrap(), int(-3));
        for kind in EffectKind::ALL {
            let spec = EffectSpec { kind, row: Some(1), k: Some(2) };
            let ctx = EffectContext::new(base.clone(), spec).unwrap();
            assert_eq!(effect_value(&ctx, &base).unwrap(), int(0), "{kind}");
        }
    }

    #[test]
    fn missing_parameters_rejected() {
        let base = Permutation::identity(3);
        assert!(EffectContext::new(base.clone(), EffectSpec::new(EffectKind::Position)).is_err());
        assert!(EffectContext::new(base.clone(), EffectSpec::new(EffectKind::TopkDifference)).is_err());
        assert!(EffectContext::new(base, EffectSpec::with_k(EffectKind::TopkDifference, 4)).is_err());
    }

    #[test]
    fn ranges() {
        assert_eq!(effect_range(&EffectSpec::kendall_tau(), 4), (int(0), int(6)));
        assert_eq!(effect_range(&EffectSpec::topk_membership(0, 2), 9), (int(-1), int(1)));
        assert_eq!(effect_range(&EffectSpec::position(0), 4), (int(-3), int(3)));
    }

    fn small_matrix() -> impl Strategy<Value = Matrix> {
        (1usize..6, 1usize..5).prop_flat_map(|(n, m)| {
            proptest::collection::vec(proptest::collection::vec(-4i64..5, m), n)
                .prop_map(|rows| Matrix::from_i64(&rows).unwrap())
        })
    }

    fn permutation(n: usize) -> impl Strategy<Value = Permutation> {
        Just((0..n).collect::<Vec<_>>())
            .prop_shuffle()
            .prop_map(|v| Permutation::from_ranked_rows(v).unwrap())
    }

    proptest! {
        #[test]
        fn ranking_is_bijection(m in small_matrix()) {
            for spec in RankingSpec::all() {
                let p = rank_matrix(&m, spec);
                let mut seen = p.ranked_rows().to_vec();
                seen.sort_unstable();
                prop_assert_eq!(seen, (0..m.n()).collect::<Vec<_>>());
            }
        }

        #[test]
        fn min_is_negated_max(m in small_matrix()) {
            let neg = m.negated();
            prop_assert_eq!(rank_matrix(&m, RankingSpec::MIN_ASC), rank_matrix(&neg, RankingSpec::MAX_DSC));
            prop_assert_eq!(rank_matrix(&m, RankingSpec::MIN_DSC), rank_matrix(&neg, RankingSpec::MAX_ASC));
            prop_assert_eq!(rank_matrix(&m, RankingSpec::SUM_DSC), rank_matrix(&neg, RankingSpec::SUM_ASC));
            for spec in RankingSpec::all() {
                let (canon, normalized) = normalize(&m, spec);
                prop_assert_eq!(rank_matrix(&m, spec), rank_matrix(&normalized, canon.spec()));
            }
        }

        #[test]
        fn effects_stay_in_range(
            (base, pi, row, k) in (1usize..7).prop_flat_map(|n| (permutation(n), permutation(n), 0..n, 1..=n))
        ) {
            let n = base.n();
            for kind in EffectKind::ALL {
                let spec = EffectSpec { kind, row: Some(row), k: Some(k) };
                let ctx = EffectContext::new(base.clone(), spec).unwrap();
                let v = effect_value(&ctx, &pi).unwrap();
                let (lo, hi) = effect_range(&spec, n);
                prop_assert!(lo <= v && v <= hi, "{} = {} outside [{}, {}]", kind, v, lo, hi);
            }
            let kt = EffectContext::new(base.clone(), EffectSpec::kendall_tau()).unwrap();
            prop_assert_eq!(kt.eval(&pi) == 0, pi == base);

            // direct set computation of the symmetric difference
            let top = |p: &Permutation| (0..k).map(|r| p.row_at(r)).collect::<std::collections::BTreeSet<_>>();
            let (t, t0) = (top(&pi), top(&base));
            let direct = t.union(&t0).count() as i64 - t.intersection(&t0).count() as i64;
            let diff = EffectContext::new(base.clone(), EffectSpec::with_k(EffectKind::TopkDifference, k)).unwrap();
            prop_assert_eq!(diff.eval(&pi), direct);
            prop_assert_eq!(direct, 2 * k as i64 - 2 * t.intersection(&t0).count() as i64);
        }
    }
}
