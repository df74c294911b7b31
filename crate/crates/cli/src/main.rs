use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use srlab::analysis::Domain;
use srlab::classes::{sample_class, ClassSpec};
use srlab::dictionary::{Dictionary, DictionarySpec};
use srlab::discretization::{
    find_universal_points, verify_universal_discretization, DiscretizationOptions, PointLaw, SearchSpec, Side,
    DEFAULT_SUBSET_CAP,
};
use srlab::experiments::{derive_seed, run_experiment, ExperimentConfig};
use srlab::lower_bounds::{check_sampling_condition, hidden_mass_witness, SamplingCheckOptions};
use srlab::oracles::{oga_approximate, sigma_v, Certification, SigmaOptions};
use srlab::recovery::{ideal_projection_recover, lebesgue_factor, sparse_ls_recover, SearchOptions, Strategy};
use srlab::report::{to_csv, to_json, Premise, Record, Summary};
use srlab::workspace::{
    Expansion, HilbertNorm, Norm, PerturbedExpansion, PointSet, Provenance, Target, Workspace, WorkspaceOptions,
};
use srlab::C64;

#[derive(Parser)]
#[command(name = "srlab", version, about = "Sampling discretization and sparse recovery experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Certify the discretization constants of a point set.
    Verify(Common),
    /// Search for a point set with a certified lower constant.
    FindPoints(Common),
    /// Recover a function from its samples by a sparse approximant.
    Recover(Common),
    /// Best v-term approximation error of a function.
    Sigma(Common),
    /// Build a function that vanishes on the sample points but has large norm.
    LowerBound(Common),
    /// Run a named experiment.
    Experiment(Common),
}

#[derive(Args)]
struct Common {
    /// TOML configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the seed of the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Adds the wall time to the report (the output is then not reproducible).
    #[arg(long)]
    timing: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

/// Where sample points come from.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
enum PointsSpec {
    Equispaced { per_dim: usize },
    Chebyshev { m: usize },
    Random { m: usize },
    Explicit {
        points: Vec<Vec<f64>>,
        #[serde(default)]
        weights: Option<Vec<f64>>,
    },
}

impl PointsSpec {
    fn build(&self, dict: &Dictionary, seed: u64) -> srlab::Result<PointSet> {
        match self {
            PointsSpec::Equispaced { per_dim } => match dict.domain() {
                Domain::Torus { dim } => PointSet::equispaced_torus(dim, *per_dim),
                Domain::Interval => PointSet::chebyshev_nodes(*per_dim),
            },
            PointsSpec::Chebyshev { m } => PointSet::chebyshev_nodes(*m),
            PointsSpec::Random { m } => {
                let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
                PointSet::random(dict, *m, &mut rng)
            }
            PointsSpec::Explicit { points, weights } => match weights {
                Some(w) => PointSet::weighted(points.clone(), w.clone(), Provenance::User),
                None => PointSet::uniform(points.clone(), Provenance::User),
            },
        }
    }
}

/// The function to approximate.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
enum TargetSpec {
    /// Dictionary coefficients plus optional exponentials `a e^{i k·x}`.
    Expansion {
        coefficients: Vec<C64>,
        #[serde(default)]
        exponentials: Vec<(Vec<i64>, C64)>,
    },
    /// A seeded sample of a function class.
    Class { class: ClassSpec },
}

impl TargetSpec {
    fn build(&self, dict: &Dictionary, seed: u64) -> srlab::Result<PerturbedExpansion> {
        Ok(match self {
            TargetSpec::Expansion {
                coefficients,
                exponentials,
            } => PerturbedExpansion {
                base: Expansion {
                    coefficients: coefficients.clone(),
                },
                exponentials: exponentials.clone(),
            },
            TargetSpec::Class { class } => {
                let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
                PerturbedExpansion {
                    base: Expansion {
                        coefficients: sample_class(class, dict, &mut rng)?,
                    },
                    exponentials: Vec::new(),
                }
            }
        })
    }
}

fn default_cap() -> u64 {
    DEFAULT_SUBSET_CAP
}

fn default_oversample() -> usize {
    16
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VerifyConfig {
    #[serde(default)]
    seed: u64,
    dictionary: DictionarySpec,
    points: PointsSpec,
    v: usize,
    /// When set, asserts `C1 >= target_c1`.
    #[serde(default)]
    target_c1: Option<f64>,
    #[serde(default = "two_sided")]
    side: Side,
    #[serde(default = "default_cap")]
    cap: u64,
}

fn two_sided() -> Side {
    Side::TwoSided
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FindPointsConfig {
    #[serde(default)]
    seed: u64,
    dictionary: DictionarySpec,
    v: usize,
    m: usize,
    target_c1: f64,
    #[serde(default = "default_attempts")]
    max_attempts: usize,
    #[serde(default = "reference_law")]
    law: PointLaw,
    #[serde(default = "default_cap")]
    cap: u64,
}

fn default_attempts() -> usize {
    20
}

fn reference_law() -> PointLaw {
    PointLaw::Reference
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum RecoverAlgorithm {
    SparseLs,
    SparseLsGreedy,
    IdealProjection,
    Oga,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RecoverConfig {
    #[serde(default)]
    seed: u64,
    dictionary: DictionarySpec,
    points: PointsSpec,
    target: TargetSpec,
    v: usize,
    #[serde(default = "sparse_ls")]
    algorithm: RecoverAlgorithm,
    /// Also certifies the points and asserts the Lebesgue-type inequalities.
    #[serde(default)]
    check: bool,
    #[serde(default)]
    quadrature_resolution: Option<usize>,
    #[serde(default = "default_oversample")]
    oversample: usize,
    #[serde(default = "default_cap")]
    cap: u64,
}

fn sparse_ls() -> RecoverAlgorithm {
    RecoverAlgorithm::SparseLs
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SigmaConfig {
    #[serde(default)]
    seed: u64,
    dictionary: DictionarySpec,
    points: PointsSpec,
    target: TargetSpec,
    v: usize,
    norm: Norm,
    #[serde(default)]
    quadrature_resolution: Option<usize>,
    #[serde(default = "default_oversample")]
    oversample: usize,
    #[serde(default = "default_cap")]
    cap: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LowerBoundConfig {
    #[serde(default)]
    seed: u64,
    dictionary: DictionarySpec,
    /// Points of the two-sided sampling condition.
    test_points: PointsSpec,
    /// Points the witness must vanish on.
    points: PointsSpec,
    #[serde(default = "two")]
    p: f64,
    #[serde(default)]
    quadrature_resolution: Option<usize>,
    #[serde(default = "default_restarts")]
    restarts: usize,
}

fn two() -> f64 {
    2.0
}

fn default_restarts() -> usize {
    200
}

/// Output of every subcommand except `experiment`.
#[derive(Serialize)]
struct CommandReport<C, R> {
    command: &'static str,
    seed: u64,
    config: C,
    result: R,
    premise: Premise,
    records: Vec<Record>,
    summary: Summary,
    derived: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    wall_time_seconds: Option<f64>,
}

struct Output {
    json: String,
    records: Vec<Record>,
    all_pass: bool,
}

#[allow(clippy::too_many_arguments)]
fn command_output<C: Serialize, R: Serialize>(
    command: &'static str,
    seed: u64,
    config: C,
    result: R,
    premise: Premise,
    mut records: Vec<Record>,
    derived: BTreeMap<String, f64>,
    wall_time_seconds: Option<f64>,
) -> anyhow::Result<Output> {
    records.sort_by(|a, b| a.key.cmp(&b.key));
    let summary = Summary::of(&premise, &records);
    let all_pass = summary.all_pass;
    let report = CommandReport {
        command,
        seed,
        config,
        result,
        premise,
        records: records.clone(),
        summary,
        derived,
        wall_time_seconds,
    };
    Ok(Output {
        json: to_json(&report)?,
        records,
        all_pass,
    })
}

fn read_config<T: DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn no_premise() -> Premise {
    Premise {
        description: "none".into(),
        certified: true,
        constant: None,
        points: None,
    }
}

fn verify(cfg: VerifyConfig, timer: Option<Instant>) -> anyhow::Result<Output> {
    let dict = cfg.dictionary.build()?;
    let xi = cfg.points.build(&dict, derive_seed(cfg.seed, 0))?;
    let opts = DiscretizationOptions {
        side: cfg.side,
        cap: cfg.cap,
        ..Default::default()
    };
    let report = verify_universal_discretization(&dict, &xi, cfg.v, &opts)?;
    let mut records = Vec::new();
    if let Some(t) = cfg.target_c1 {
        records.push(Record::check("c1", "target <= C1", t, report.c1, 1.0, 0.0, report.certified));
    }
    let result = serde_json::json!({ "points": xi, "report": report });
    command_output("verify", cfg.seed, cfg, result, no_premise(), records, BTreeMap::new(), elapsed(timer))
}

fn find_points(cfg: FindPointsConfig, timer: Option<Instant>) -> anyhow::Result<Output> {
    let dict = cfg.dictionary.build()?;
    let spec = SearchSpec {
        v: cfg.v,
        target_c1: cfg.target_c1,
        m: cfg.m,
        seed: cfg.seed,
        max_attempts: cfg.max_attempts,
        law: cfg.law,
    };
    let opts = DiscretizationOptions {
        cap: cfg.cap,
        ..Default::default()
    };
    let search = find_universal_points(&dict, &spec, &opts)?;
    let records = vec![Record::check(
        "c1",
        "target <= C1",
        cfg.target_c1,
        search.report.c1,
        1.0,
        0.0,
        search.report.certified,
    )];
    command_output("find-points", cfg.seed, cfg, search, no_premise(), records, BTreeMap::new(), elapsed(timer))
}

fn recover(cfg: RecoverConfig, timer: Option<Instant>) -> anyhow::Result<Output> {
    let dict = cfg.dictionary.build()?;
    let xi = cfg.points.build(&dict, derive_seed(cfg.seed, 0))?;
    let target = cfg.target.build(&dict, derive_seed(cfg.seed, 1))?;
    let ws = Workspace::new(
        dict.clone(),
        xi.clone(),
        WorkspaceOptions {
            quadrature_resolution: cfg.quadrature_resolution,
            oversample: cfg.oversample,
        },
    )?;
    let f = target.sample(&ws)?;
    let search = SearchOptions { cap: cfg.cap };
    let approx = match cfg.algorithm {
        RecoverAlgorithm::SparseLs => sparse_ls_recover(&ws, &f, cfg.v, Strategy::Exhaustive, &search)?,
        RecoverAlgorithm::SparseLsGreedy => sparse_ls_recover(&ws, &f, cfg.v, Strategy::Greedy, &search)?,
        RecoverAlgorithm::IdealProjection => ideal_projection_recover(&ws, &f, cfg.v, &search)?,
        RecoverAlgorithm::Oga => oga_approximate(&ws, &f, cfg.v, HilbertNorm::L2Mu)?,
    };
    let mut records = Vec::new();
    let mut derived = BTreeMap::new();
    let mut premise = no_premise();
    if cfg.check {
        let disc = verify_universal_discretization(
            &dict,
            &xi,
            cfg.v,
            &DiscretizationOptions {
                cap: cfg.cap,
                side: Side::OneSided,
                ..Default::default()
            },
        )?;
        premise = Premise {
            description: format!("one-sided universal discretization for v = {}", cfg.v),
            certified: disc.certified && disc.c1 > 0.0,
            constant: Some(disc.c1),
            points: Some(xi.len()),
        };
        if premise.certified {
            let k = lebesgue_factor(disc.c1)?;
            derived.insert("lebesgue_factor".into(), k);
            let sigma_opts = SigmaOptions {
                cap: cfg.cap,
                ..Default::default()
            };
            let s_inf = sigma_v(&ws, &f, cfg.v, Norm::Uniform, &sigma_opts)?;
            let s_mix = sigma_v(&ws, &f, cfg.v, Norm::L2MuXi, &sigma_opts)?;
            let exact = matches!(
                s_mix.certification,
                Certification::ExactExhaustive | Certification::ExactThreshold
            );
            records.push(Record::check(
                "mixed",
                "|f - LS f|_2 <= sqrt(2) K sigma_v(f)_{L2(mu_xi)}",
                approx.residual_l2_mu,
                std::f64::consts::SQRT_2 * k * s_mix.value,
                std::f64::consts::SQRT_2 * k,
                1e-8,
                exact && !approx.heuristic,
            ));
            records.push(Record::check(
                "uniform",
                "|f - LS f|_2 <= K sigma_v(f)_inf (grid)",
                approx.residual_l2_mu,
                k * s_inf.value,
                k,
                1e-8,
                false,
            ));
        }
    }
    command_output("recover", cfg.seed, cfg, approx, premise, records, derived, elapsed(timer))
}

fn sigma(cfg: SigmaConfig, timer: Option<Instant>) -> anyhow::Result<Output> {
    let dict = cfg.dictionary.build()?;
    let xi = cfg.points.build(&dict, derive_seed(cfg.seed, 0))?;
    let target = cfg.target.build(&dict, derive_seed(cfg.seed, 1))?;
    let ws = Workspace::new(
        dict,
        xi,
        WorkspaceOptions {
            quadrature_resolution: cfg.quadrature_resolution,
            oversample: cfg.oversample,
        },
    )?;
    let f = target.sample(&ws)?;
    let opts = SigmaOptions {
        cap: cfg.cap,
        ..Default::default()
    };
    let result = sigma_v(&ws, &f, cfg.v, cfg.norm, &opts)?;
    command_output("sigma", cfg.seed, cfg, result, no_premise(), Vec::new(), BTreeMap::new(), elapsed(timer))
}

fn lower_bound(cfg: LowerBoundConfig, timer: Option<Instant>) -> anyhow::Result<Output> {
    let dict = cfg.dictionary.build()?;
    let q = dict.quadrature(cfg.quadrature_resolution)?;
    let x = cfg.test_points.build(&dict, derive_seed(cfg.seed, 0))?;
    let xi = cfg.points.build(&dict, derive_seed(cfg.seed, 1))?;
    let opts = SamplingCheckOptions {
        restarts: cfg.restarts,
        seed: derive_seed(cfg.seed, 2),
        ..Default::default()
    };
    let cert = check_sampling_condition(&dict, &x, cfg.p, &q, &opts)?;
    let premise = Premise {
        description: format!("two-sided 1/2, 3/2 sampling of the L{} and L2 norms", cfg.p),
        certified: cert.pass && cert.lp_certified,
        constant: Some(cert.l2_lower),
        points: Some(x.len()),
    };
    let mut records = Vec::new();
    let witness = if cert.pass {
        let w = hidden_mass_witness(&dict, &xi.points, &x, &q, &cert, derive_seed(cfg.seed, 3))?;
        if let Some(norm) = w.tau_lower {
            records.push(Record::check(
                "bound",
                "(1/3) sqrt((D - m)/M) <= |g|_2",
                w.bound,
                norm,
                1.0,
                0.0,
                w.certified,
            ));
        }
        records.push(Record::check(
            "vanishing",
            "max |g(xi)| <= 1e-10",
            w.max_at_points.unwrap_or(f64::MAX),
            0.0,
            1.0,
            1e-10,
            true,
        ));
        Some(w)
    } else {
        None
    };
    let result = serde_json::json!({ "certificate": cert, "witness": witness });
    command_output("lower-bound", cfg.seed, cfg, result, premise, records, BTreeMap::new(), elapsed(timer))
}

fn experiment(cfg: ExperimentConfig, timer: Option<Instant>) -> anyhow::Result<Output> {
    let mut report = run_experiment(&cfg)?;
    report.wall_time_seconds = elapsed(timer);
    Ok(Output {
        json: to_json(&report)?,
        all_pass: report.summary.all_pass,
        records: report.records,
    })
}

fn elapsed(timer: Option<Instant>) -> Option<f64> {
    timer.map(|t| t.elapsed().as_secs_f64())
}

macro_rules! with_seed {
    ($cfg:expr, $seed:expr) => {{
        let mut cfg = $cfg;
        if let Some(s) = $seed {
            cfg.seed = s;
        }
        cfg
    }};
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    let common = match &cli.command {
        Command::Verify(c)
        | Command::FindPoints(c)
        | Command::Recover(c)
        | Command::Sigma(c)
        | Command::LowerBound(c)
        | Command::Experiment(c) => c,
    };
    let timer = common.timing.then(Instant::now);
    let path = common.config.as_path();
    let seed = common.seed;
    let out = match &cli.command {
        Command::Verify(_) => verify(with_seed!(read_config::<VerifyConfig>(path)?, seed), timer)?,
        Command::FindPoints(_) => find_points(with_seed!(read_config::<FindPointsConfig>(path)?, seed), timer)?,
        Command::Recover(_) => recover(with_seed!(read_config::<RecoverConfig>(path)?, seed), timer)?,
        Command::Sigma(_) => sigma(with_seed!(read_config::<SigmaConfig>(path)?, seed), timer)?,
        Command::LowerBound(_) => lower_bound(with_seed!(read_config::<LowerBoundConfig>(path)?, seed), timer)?,
        Command::Experiment(_) => experiment(with_seed!(read_config::<ExperimentConfig>(path)?, seed), timer)?,
    };
    let text = match common.format {
        Format::Json => out.json,
        Format::Csv => to_csv(&out.records)?,
    };
    match &common.out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{text}"),
    }
    Ok(out.all_pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_specs_parse() {
        let p: PointsSpec = toml::from_str("kind = \"random\"\nm = 5").unwrap();
        assert!(matches!(p, PointsSpec::Random { m: 5 }));
        let p: PointsSpec = toml::from_str("kind = \"explicit\"\npoints = [[0.0], [1.0]]").unwrap();
        assert!(matches!(p, PointsSpec::Explicit { ref points, weights: None } if points.len() == 2));
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let text = r#"
            v = 1
            bogus = 3
            dictionary = { kind = "trig", frequencies = { kind = "range", lo = 0, hi = 2 } }
            points = { kind = "equispaced", per_dim = 3 }
        "#;
        assert!(toml::from_str::<VerifyConfig>(text).is_err());
    }
}
