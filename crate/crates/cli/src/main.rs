mod instance;
mod output;
mod selftest;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use rankexplain::approx::{attribution_plan, expectation_plan, mc_expectation, mc_shap, mc_shapley, SamplingPlan};
use rankexplain::pairwise::prec_probability;
use rankexplain::reductions::{gen_cnf_topk_matrix, gen_knapsack_matrix, gen_md_matrix_pair, KnapsackInstance, PositiveCnf};
use rankexplain::*;

use instance::{parse_effect, parse_ranking, read_matrix_csv, Instance};
use output::{exact_result, sampled_result, with};

#[derive(Parser)]
#[command(name = "rankexplain", version, about = "Explain rankings under uncertain column weights")]
struct Cli {
    /// Maximum number of worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the ranking of the matrix, optionally under weights.
    Rank {
        #[command(flatten)]
        input: InputArgs,
        /// Comma-separated weights; defaults to the instance weights, then to ones.
        #[arg(long)]
        weights: Option<String>,
    },
    /// Probability that one row precedes another.
    Prec {
        #[command(flatten)]
        input: InputArgs,
        /// Row whose precedence is measured (1-based).
        #[arg(long)]
        first: usize,
        /// Row it is compared against (1-based).
        #[arg(long)]
        second: usize,
        #[arg(long, value_enum, default_value_t = EncodingArg::Unary)]
        encoding: EncodingArg,
    },
    /// Expected effect of the random weights.
    Expect(ComputeArgs),
    /// SHAP scores of the weight parameters.
    Shap(ComputeArgs),
    /// Shapley values of whole columns.
    Shapley(ComputeArgs),
    /// Monte-Carlo estimate, regardless of tractability.
    Sample {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, value_enum, default_value_t = Target::Expect)]
        target: Target,
        /// Column (1-based) for shap and shapley targets.
        #[arg(long)]
        column: Option<usize>,
        #[command(flatten)]
        sampling: SamplingArgs,
    },
    /// Two-row Sum instance whose precedence probability counts knapsack solutions.
    GenKnapsack {
        /// Comma-separated item sizes.
        #[arg(long, value_delimiter = ',')]
        b: Vec<u64>,
        #[arg(long)]
        d: u64,
    },
    /// Top-k instance whose membership probability counts models of a positive CNF.
    GenCnf {
        #[command(flatten)]
        cnf: CnfArgs,
        #[arg(long, default_value_t = 1)]
        k: usize,
        #[arg(long, default_value = "max-asc")]
        ranking: String,
    },
    /// One of the two displacement instances whose difference counts non-models.
    GenMd {
        #[command(flatten)]
        cnf: CnfArgs,
        #[arg(long, default_value = "max-asc")]
        ranking: String,
        /// max_displacement or hamming.
        #[arg(long, default_value = "max_displacement")]
        effect: String,
        /// 1 for ℓ+1 trailing zero rows, 2 for ℓ+2.
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=2))]
        copy: u8,
    },
    /// Golden values and brute-force cross-checks.
    Selftest,
}

#[derive(Args, Clone)]
struct InputArgs {
    /// Instance JSON file.
    #[arg(long)]
    instance: Option<PathBuf>,
    /// Headerless CSV replacing the instance matrix.
    #[arg(long)]
    matrix_csv: Option<PathBuf>,
    /// Ranking override, e.g. sum-dsc, max-asc, lex.
    #[arg(long)]
    ranking: Option<String>,
    /// Effect kind override, e.g. kendall_tau, position.
    #[arg(long)]
    effect: Option<String>,
    /// Row of position and top-k membership effects (1-based).
    #[arg(long)]
    row: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
}

#[derive(Args, Clone)]
struct ComputeArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, value_enum, default_value_t = ModeArg::Exact)]
    mode: ModeArg,
    #[arg(long, value_enum, default_value_t = EncodingArg::Unary)]
    encoding: EncodingArg,
    /// Column (1-based); all columns when omitted. Ignored by expect.
    #[arg(long)]
    column: Option<usize>,
    #[command(flatten)]
    caps: CapArgs,
    #[command(flatten)]
    sampling: SamplingArgs,
}

#[derive(Args, Clone)]
struct CapArgs {
    #[arg(long)]
    max_weight_points: Option<u128>,
    #[arg(long)]
    max_perm_rows: Option<usize>,
    #[arg(long)]
    max_topk_k: Option<usize>,
    #[arg(long)]
    max_dp_states: Option<usize>,
}

#[derive(Args, Clone)]
struct SamplingArgs {
    #[arg(long, default_value = "1/20")]
    epsilon: String,
    #[arg(long, default_value = "1/100")]
    delta: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Fixed sample count instead of the Hoeffding bound.
    #[arg(long)]
    samples: Option<u64>,
}

#[derive(Args, Clone)]
struct CnfArgs {
    #[arg(long)]
    variables: usize,
    /// Clauses separated by `;`, variables (1-based) by `,`, e.g. "1,2,4;1,3".
    #[arg(long, default_value = "")]
    clauses: String,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Exact,
    Auto,
    Approx,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EncodingArg {
    Unary,
    Binary,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Target {
    Expect,
    Shap,
    Shapley,
}

impl From<EncodingArg> for Encoding {
    fn from(e: EncodingArg) -> Self {
        match e {
            EncodingArg::Unary => Encoding::Unary,
            EncodingArg::Binary => Encoding::Binary,
        }
    }
}

impl CapArgs {
    fn caps(&self) -> Caps {
        let d = Caps::default();
        Caps {
            max_weight_points: self.max_weight_points.unwrap_or(d.max_weight_points),
            max_perm_rows: self.max_perm_rows.unwrap_or(d.max_perm_rows),
            max_topk_k: self.max_topk_k.unwrap_or(d.max_topk_k),
            max_dp_states: self.max_dp_states.unwrap_or(d.max_dp_states),
        }
    }
}

impl SamplingArgs {
    fn rationals(&self) -> anyhow::Result<(Rational, Rational)> {
        Ok((
            parse_rational(&self.epsilon).context("--epsilon")?,
            parse_rational(&self.delta).context("--delta")?,
        ))
    }

    fn finish(&self, plan: SamplingPlan) -> anyhow::Result<SamplingPlan> {
        Ok(match self.samples {
            Some(s) => plan.with_samples(s)?,
            None => plan,
        })
    }
}

impl InputArgs {
    fn load(&self) -> anyhow::Result<Instance> {
        let mut inst = match (&self.instance, &self.matrix_csv) {
            (Some(path), _) => Instance::load(path)?,
            (None, Some(_)) => {
                let ranking = self.ranking.as_deref().ok_or_else(|| anyhow!("--matrix-csv without --instance needs --ranking"))?;
                Instance {
                    matrix: Matrix::empty_columns(0),
                    spec: parse_ranking(ranking)?,
                    effect: None,
                    weights: None,
                    dist: None,
                }
            }
            (None, None) => bail!("an --instance file or a --matrix-csv is required"),
        };
        if let Some(path) = &self.matrix_csv {
            inst.matrix = read_matrix_csv(path)?;
            if let Some(w) = &inst.weights {
                if w.len() != inst.matrix.m() {
                    bail!("instance has {} weights but the CSV has {} columns", w.len(), inst.matrix.m());
                }
            }
            if let Some(d) = &inst.dist {
                d.check_width(inst.matrix.m())?;
            }
        }
        if let Some(r) = &self.ranking {
            inst.spec = parse_ranking(r)?;
        }
        if self.effect.is_some() || self.row.is_some() || self.k.is_some() {
            let base = inst.effect;
            let kind = match (&self.effect, base) {
                (Some(k), _) => k.clone(),
                (None, Some(e)) => e.kind.name().to_string(),
                (None, None) => bail!("--row/--k given without an effect"),
            };
            let row = self.row.or(base.and_then(|e| e.row.map(|r| r + 1)));
            let k = self.k.or(base.and_then(|e| e.k));
            inst.effect = Some(parse_effect(&kind, row, k)?);
        }
        if let Some(effect) = &inst.effect {
            effect.validate(inst.matrix.n())?;
        }
        Ok(inst)
    }
}

fn need_effect(inst: &Instance) -> anyhow::Result<EffectSpec> {
    inst.effect.ok_or_else(|| anyhow!("no effect: give one in the instance or with --effect"))
}

fn need_dist(inst: &Instance) -> anyhow::Result<ProductDistribution> {
    inst.dist.clone().ok_or_else(|| anyhow!("the instance has no weight distributions"))
}

fn need_weights(inst: &Instance) -> anyhow::Result<WeightVector> {
    inst.weights.clone().ok_or_else(|| anyhow!("SHAP needs reference weights in the instance"))
}

fn columns(requested: Option<usize>, m: usize) -> anyhow::Result<Vec<usize>> {
    match requested {
        None => Ok((0..m).collect()),
        Some(c) if (1..=m).contains(&c) => Ok(vec![c - 1]),
        Some(c) => bail!("--column {c} out of range 1..={m}"),
    }
}

/// One result per column, wrapped unless a single column was asked for.
fn per_column(single: bool, results: Vec<(usize, Value)>) -> Value {
    let mut tagged: Vec<Value> = results.into_iter().map(|(j, r)| with(r, "column", json!(j + 1))).collect();
    if single {
        tagged.pop().unwrap()
    } else {
        json!({ "results": tagged })
    }
}

fn attribution_json(a: &Attribution) -> Value {
    let r = exact_result(&a.value, &a.method_label());
    match &a.shift {
        Some(s) => with(r, "shift", json!(s.to_string())),
        None => r,
    }
}

fn run_expect(args: &ComputeArgs) -> anyhow::Result<Value> {
    let inst = args.input.load()?;
    let exp = ExpInstance::new(inst.matrix.clone(), need_dist(&inst)?, inst.spec, need_effect(&inst)?)?
        .encoded(args.encoding.into());
    let caps = args.caps.caps();
    let approx = |exp: &ExpInstance| -> anyhow::Result<Value> {
        let (eps, delta) = args.sampling.rationals()?;
        let plan = args.sampling.finish(expectation_plan(exp, eps, delta, args.sampling.seed)?)?;
        Ok(sampled_result(&mc_expectation(exp, &plan)?))
    };
    match args.mode {
        ModeArg::Approx => approx(&exp),
        ModeArg::Exact => {
            let (v, m) = expect_effect(&exp, Mode::Exact, &caps)?;
            Ok(exact_result(&v, m.as_str()))
        }
        ModeArg::Auto => match expect_effect(&exp, Mode::Auto, &caps) {
            Ok((v, m)) => Ok(exact_result(&v, m.as_str())),
            Err(Error::ExactIntractable { .. } | Error::ResourceCap { .. }) => approx(&exp),
            Err(e) => Err(e.into()),
        },
    }
}

fn run_shap(args: &ComputeArgs) -> anyhow::Result<Value> {
    let inst = args.input.load()?;
    let shap = ShapInstance::new(inst.matrix.clone(), need_dist(&inst)?, need_weights(&inst)?, inst.spec, need_effect(&inst)?)?
        .encoded(args.encoding.into());
    let caps = args.caps.caps();
    let cols = columns(args.column, inst.matrix.m())?;
    let mut results = Vec::new();
    for &j in &cols {
        let sampled = || -> anyhow::Result<Value> {
            let (eps, delta) = args.sampling.rationals()?;
            let plan = attribution_plan(&shap.effect, shap.matrix.n(), eps, delta, args.sampling.seed)?;
            Ok(sampled_result(&mc_shap(&shap, j, &args.sampling.finish(plan)?)?))
        };
        let r = match args.mode {
            ModeArg::Approx => sampled()?,
            ModeArg::Exact => attribution_json(&shap_score(&shap, j, Mode::Exact, &caps)?),
            ModeArg::Auto => match shap_score(&shap, j, Mode::Auto, &caps) {
                Ok(a) => attribution_json(&a),
                Err(Error::ExactIntractable { .. } | Error::ResourceCap { .. }) => sampled()?,
                Err(e) => return Err(e.into()),
            },
        };
        results.push((j, r));
    }
    Ok(per_column(args.column.is_some(), results))
}

fn run_shapley(args: &ComputeArgs) -> anyhow::Result<Value> {
    let inst = args.input.load()?;
    let effect = need_effect(&inst)?;
    effect.validate(inst.matrix.n())?;
    let caps = args.caps.caps();
    let cols = columns(args.column, inst.matrix.m())?;
    let mut results = Vec::new();
    for &j in &cols {
        let sampled = || -> anyhow::Result<Value> {
            let (eps, delta) = args.sampling.rationals()?;
            let plan = attribution_plan(&effect, inst.matrix.n(), eps, delta, args.sampling.seed)?;
            Ok(sampled_result(&mc_shapley(&inst.matrix, inst.spec, effect, j, &args.sampling.finish(plan)?)?))
        };
        let r = match args.mode {
            ModeArg::Approx => sampled()?,
            ModeArg::Exact => attribution_json(&shapley_column(&inst.matrix, inst.spec, effect, j, Mode::Exact, &caps)?),
            ModeArg::Auto => match shapley_column(&inst.matrix, inst.spec, effect, j, Mode::Auto, &caps) {
                Ok(a) => attribution_json(&a),
                Err(Error::ExactIntractable { .. } | Error::ResourceCap { .. }) => sampled()?,
                Err(e) => return Err(e.into()),
            },
        };
        results.push((j, r));
    }
    Ok(per_column(args.column.is_some(), results))
}

fn parse_cnf(args: &CnfArgs) -> anyhow::Result<PositiveCnf> {
    let clauses = args
        .clauses
        .split(';')
        .map(str::trim)
        .filter(|c| !c.is_empty())
        .map(|c| {
            c.split(',')
                .map(|v| match v.trim().parse::<usize>() {
                    Ok(0) | Err(_) => bail!("bad variable `{}` in clause `{c}` (variables are numbered from 1)", v.trim()),
                    Ok(v) => Ok(v - 1),
                })
                .collect::<anyhow::Result<Vec<_>>>()
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    Ok(PositiveCnf::new(args.variables, clauses)?)
}

fn binary_instance(matrix: Matrix, spec: RankingSpec, effect: EffectSpec) -> anyhow::Result<Value> {
    let m = matrix.m();
    let inst = Instance {
        matrix,
        spec,
        effect: Some(effect),
        weights: Some(WeightVector::ones(m)),
        dist: Some(ProductDistribution::uniform_i64(m, &[0, 1])?),
    };
    Ok(serde_json::to_value(inst.to_file())?)
}

fn run(cli: Cli) -> anyhow::Result<(Value, bool)> {
    let value = match cli.command {
        Command::Rank { input, weights } => {
            let inst = input.load()?;
            let w = match weights {
                Some(text) => WeightVector::new(text.split(',').map(parse_rational).collect::<rankexplain::Result<_>>()?),
                None => inst.weights.clone().unwrap_or_else(|| WeightVector::ones(inst.matrix.m())),
            };
            let pi = rank_matrix(&apply_weights(&inst.matrix, &w)?, inst.spec);
            json!({
                "ranking": inst.spec.to_string(),
                "weights": w.values().iter().map(|v| v.to_string()).collect::<Vec<_>>(),
                "ranked_rows": pi.display_sequence(),
                "rank_of_row": pi.rank_of_row().iter().map(|r| r + 1).collect::<Vec<_>>(),
            })
        }
        Command::Prec { input, first, second, encoding } => {
            let inst = input.load()?;
            let n = inst.matrix.n();
            for r in [first, second] {
                if !(1..=n).contains(&r) {
                    bail!("row {r} out of range 1..={n}");
                }
            }
            if first == second {
                bail!("--first and --second must differ");
            }
            let (x, y) = (first - 1, second - 1);
            let p = prec_probability(
                inst.matrix.row(x),
                inst.matrix.row(y),
                &need_dist(&inst)?,
                inst.spec,
                TieOrientation::by_index(x, y),
                encoding.into(),
            )?;
            with(exact_result(&p, "pairwise"), "rows", json!([first, second]))
        }
        Command::Expect(args) => run_expect(&args)?,
        Command::Shap(args) => run_shap(&args)?,
        Command::Shapley(args) => run_shapley(&args)?,
        Command::Sample { input, target, column, sampling } => {
            let args = ComputeArgs {
                input,
                mode: ModeArg::Approx,
                encoding: EncodingArg::Unary,
                column,
                caps: CapArgs { max_weight_points: None, max_perm_rows: None, max_topk_k: None, max_dp_states: None },
                sampling,
            };
            match target {
                Target::Expect => run_expect(&args)?,
                Target::Shap => run_shap(&args)?,
                Target::Shapley => run_shapley(&args)?,
            }
        }
        Command::GenKnapsack { b, d } => {
            let matrix = gen_knapsack_matrix(&KnapsackInstance { b, d })?;
            // P(row 2 reaches the top) = P(row 2 precedes row 1)
            binary_instance(matrix, RankingSpec::SUM_ASC, EffectSpec::topk_membership(1, 1))?
        }
        Command::GenCnf { cnf, k, ranking } => {
            let phi = parse_cnf(&cnf)?;
            let matrix = gen_cnf_topk_matrix(&phi, k)?;
            let t = matrix.n() - 1;
            binary_instance(matrix, parse_ranking(&ranking)?, EffectSpec::topk_membership(t, k))?
        }
        Command::GenMd { cnf, ranking, effect, copy } => {
            let phi = parse_cnf(&cnf)?;
            let spec = parse_ranking(&ranking)?;
            let kind: EffectKind = effect.parse()?;
            if !matches!(kind, EffectKind::MaxDisplacement | EffectKind::Hamming) {
                bail!("gen-md builds max_displacement or hamming instances, not {kind}");
            }
            let (first, second) = gen_md_matrix_pair(&phi, spec)?;
            binary_instance(if copy == 1 { first } else { second }, spec, EffectSpec::new(kind))?
        }
        Command::Selftest => return Ok(selftest::run()),
    };
    Ok((value, true))
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.chain().find_map(|e| e.downcast_ref::<Error>()) {
        Some(Error::ExactIntractable { .. }) => 3,
        Some(Error::ResourceCap { .. }) => 4,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: --threads: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli) {
        Ok((value, ok)) => {
            println!("{}", serde_json::to_string_pretty(&value).expect("results serialize"));
            if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
