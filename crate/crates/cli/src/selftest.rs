//! Golden values and oracle cross-checks run by `rankexplain selftest`.

use serde_json::{json, Value};

use rankexplain::oracle::{brute_expectation, brute_shap, brute_shapley, count_knapsack, count_sat_positive_cnf};
use rankexplain::pairwise::prec_probability;
use rankexplain::reductions::{gen_cnf_topk_matrix, gen_knapsack_matrix, KnapsackInstance, PositiveCnf};
use rankexplain::*;

use crate::instance::Instance;

pub const GOLDEN_INSTANCE: &str = include_str!("../instances/golden_sum_example.json");

struct Check {
    name: String,
    expected: Rational,
    got: Result<Rational>,
}

impl Check {
    fn ok(&self) -> bool {
        matches!(&self.got, Ok(v) if *v == self.expected)
    }

    fn to_json(&self) -> Value {
        json!({
            "check": self.name,
            "expected": self.expected.to_string(),
            "got": match &self.got {
                Ok(v) => v.to_string(),
                Err(e) => format!("error: {e}"),
            },
            "ok": self.ok(),
        })
    }
}

fn check(name: impl Into<String>, expected: Rational, got: Result<Rational>) -> Check {
    Check { name: name.into(), expected, got }
}

fn golden_checks(out: &mut Vec<Check>) {
    let golden = Instance::from_json(GOLDEN_INSTANCE).expect("bundled instance parses");
    let caps = Caps::default();
    let dist = golden.dist.clone().unwrap();
    let weights = golden.weights.clone().unwrap();
    let shap = |effect: EffectSpec, j: usize| {
        let inst = ShapInstance::new(golden.matrix.clone(), dist.clone(), weights.clone(), golden.spec, effect)?;
        shap_score(&inst, j, Mode::Exact, &caps).map(|a| a.value)
    };
    let tau = EffectSpec::kendall_tau();
    let pos4 = EffectSpec::position(3);
    out.push(check("golden: SHAP kendall_tau, column 1", rat(3, 4), shap(tau, 0)));
    out.push(check("golden: SHAP kendall_tau, column 2", rat(3, 4), shap(tau, 1)));
    out.push(check("golden: SHAP position of row 4, column 1", rat(3, 8), shap(pos4, 0)));
    out.push(check("golden: SHAP position of row 4, column 2", rat(-9, 8), shap(pos4, 1)));
    let exp = ExpInstance::new(golden.matrix.clone(), dist.clone(), golden.spec, tau);
    out.push(check(
        "golden: E[kendall_tau]",
        rat(3, 2),
        exp.and_then(|e| expect_effect(&e, Mode::Exact, &caps)).map(|r| r.0),
    ));

    let x: Vec<Rational> = [3, 5, 2].into_iter().map(int).collect();
    let y: Vec<Rational> = [4, 1, 6].into_iter().map(int).collect();
    let p = ProductDistribution::uniform_i64(3, &[0, 1])
        .and_then(|d| prec_probability(&x, &y, &d, RankingSpec::MAX_ASC, TieOrientation::SecondRow, Encoding::Unary));
    out.push(check("max-asc precedence of (3,5,2) over (4,1,6)", rat(5, 8), p));

    let phi = PositiveCnf::new(4, vec![vec![0, 1, 3], vec![0, 2], vec![1, 2, 3]]).unwrap();
    let models = count_sat_positive_cnf(4, phi.clauses()).unwrap() as i64;
    for spec in [RankingSpec::MAX_ASC, RankingSpec::SUM_ASC, RankingSpec::LEX] {
        let p = gen_cnf_topk_matrix(&phi, 1).and_then(|m| {
            let t = m.n() - 1;
            let inst = ExpInstance::new(m, ProductDistribution::uniform_i64(4, &[0, 1])?, spec, EffectSpec::topk_membership(t, 1))?;
            let held = int((inst.base.rank_of(t) == 0) as i64);
            Ok(expect_effect(&inst, Mode::Exact, &caps)?.0 + held)
        });
        out.push(check(format!("cnf top-1 probability ({spec})"), rat(models, 16), p));
    }

    let b = [1u64, 2];
    let count = count_knapsack(&b, 2).unwrap() as i64;
    let p = gen_knapsack_matrix(&KnapsackInstance { b: b.to_vec(), d: 2 }).and_then(|m| {
        let dist = ProductDistribution::uniform_i64(3, &[0, 1])?;
        prec_probability(m.row(1), m.row(0), &dist, RankingSpec::SUM_ASC, TieOrientation::SecondRow, Encoding::Unary)
    });
    out.push(check("knapsack b=(1,2), d=2: precedence × 8", int(count), p.map(|p| p * int(8))));
}

/// Every ranking and effect on two small instances, against brute force.
fn oracle_checks(out: &mut Vec<Check>) {
    let caps = Caps::default();
    let instances = [
        (
            Matrix::from_i64(&[[20, 26], [30, 13], [40, 0], [0, 39]]).unwrap(),
            ProductDistribution::uniform_i64(2, &[1, 2]).unwrap(),
            WeightVector::from_i64(&[1, 1]),
        ),
        (
            Matrix::from_i64(&[[3, 1, 0], [1, 0, 4], [0, 1, 1], [2, 2, 2]]).unwrap(),
            ProductDistribution::uniform_i64(3, &[0, 1]).unwrap(),
            WeightVector::from_i64(&[1, 0, 1]),
        ),
    ];
    for (idx, (matrix, dist, weights)) in instances.iter().enumerate() {
        for spec in RankingSpec::all() {
            for kind in EffectKind::ALL {
                let effect = EffectSpec {
                    kind,
                    row: kind.needs_row().then_some(3),
                    k: kind.needs_k().then_some(2),
                };
                let label = format!("instance {} {spec} {kind}", idx + 1);
                let exp = ExpInstance::new(matrix.clone(), dist.clone(), spec, effect).unwrap();
                let truth = brute_expectation(&exp).unwrap();
                out.push(check(format!("{label}: expectation"), truth, expect_effect(&exp, Mode::Exact, &caps).map(|r| r.0)));
                let shap_inst = ShapInstance::new(matrix.clone(), dist.clone(), weights.clone(), spec, effect).unwrap();
                for j in 0..matrix.m() {
                    out.push(check(
                        format!("{label}: SHAP column {}", j + 1),
                        brute_shap(&shap_inst, j).unwrap(),
                        shap_score(&shap_inst, j, Mode::Exact, &caps).map(|a| a.value),
                    ));
                    out.push(check(
                        format!("{label}: Shapley column {}", j + 1),
                        brute_shapley(matrix, spec, effect, j).unwrap(),
                        shapley_column(matrix, spec, effect, j, Mode::Exact, &caps).map(|a| a.value),
                    ));
                }
            }
        }
    }
}

/// Runs every check; returns the report and whether all passed.
pub fn run() -> (Value, bool) {
    let mut checks = Vec::new();
    golden_checks(&mut checks);
    oracle_checks(&mut checks);
    let failed = checks.iter().filter(|c| !c.ok()).count();
    for c in &checks {
        let got = c.got.as_ref().map(|v| v.to_string()).unwrap_or_else(|e| e.to_string());
        eprintln!("{:<4} {:<60} expected {:<8} got {}", if c.ok() { "ok" } else { "FAIL" }, c.name, c.expected, got);
    }
    let report = json!({
        "checks": checks.iter().map(Check::to_json).collect::<Vec<_>>(),
        "passed": checks.len() - failed,
        "failed": failed,
    });
    (report, failed == 0)
}
