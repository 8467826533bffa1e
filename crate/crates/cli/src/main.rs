use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use nll_core::bounds::{audit_validation_bound, generalization_gap_bound, validation_gap_bound, BoundParams};
use nll_core::classifier::{train_mlp, MlpParams, TrainConfig};
use nll_core::data::{
    make_circles, make_moons, sample_iid, split, tabular_world, tabular_world_refined, DiscreteDistribution,
    LabeledDataset, CIRCLES_SIGMA, MOONS_SIGMA,
};
use nll_core::experiments::{
    emit_report, run_bound_audit_suite, run_regime_sweep, run_tabular_demo, Report, ReportFormat, SweepConfig,
};
use nll_core::noise::{corrupt_labels, pair_noise, uniform_noise, TransitionMatrix};
use nll_core::nts::run_nts;
use nll_core::oracle::{enumerate_best, DiscreteClassifier, Objective};
use nll_core::{Error, Result};

#[derive(Parser)]
#[command(name = "nll", version, about = "Class-conditional label noise toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Transition matrices.
    #[command(subcommand)]
    Noise(NoiseCmd),
    /// Datasets and worlds.
    #[command(subcommand)]
    Data(DataCmd),
    /// Train an MLP with SGD.
    Train(TrainArgs),
    /// Evaluate accuracy bounds.
    #[command(subcommand)]
    Bounds(BoundsCmd),
    /// Exhaustive search on a discrete world.
    #[command(subcommand)]
    Oracle(OracleCmd),
    /// Noisy-best teacher and student.
    Nts(NtsArgs),
    /// Training-size sweep.
    Sweep(SweepArgs),
    /// Scripted demonstrations.
    #[command(subcommand)]
    Demo(DemoCmd),
    /// Scripted audits.
    #[command(subcommand)]
    Audit(AuditCmd),
}

#[derive(Clone, Copy, ValueEnum)]
enum NoiseKind {
    Uniform,
    Pair,
}

#[derive(Subcommand)]
enum NoiseCmd {
    /// Write a transition matrix.
    Make {
        #[arg(long, env = "NLL_KIND")]
        kind: NoiseKind,
        #[arg(long, env = "NLL_K")]
        k: usize,
        #[arg(long, env = "NLL_RATE")]
        rate: f64,
        #[arg(long, env = "NLL_OUT")]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum DataKind {
    Tabular,
    Circles,
    Moons,
}

#[derive(Subcommand)]
enum DataCmd {
    /// Sample a clean dataset.
    Make {
        #[arg(long, env = "NLL_KIND")]
        kind: DataKind,
        #[arg(long, env = "NLL_M")]
        m: usize,
        /// Feature noise (circles/moons); the generator default when omitted.
        #[arg(long, env = "NLL_SIGMA")]
        sigma: Option<f64>,
        #[arg(long, env = "NLL_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long, env = "NLL_OUT")]
        out: PathBuf,
    },
    /// Replace labels by draws from a transition matrix.
    Corrupt {
        #[arg(long, env = "NLL_NOISE")]
        noise: PathBuf,
        #[arg(long, env = "NLL_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long = "in", env = "NLL_IN")]
        input: PathBuf,
        #[arg(long, env = "NLL_OUT")]
        out: PathBuf,
    },
    /// Random train/validation partition.
    Split {
        #[arg(long, env = "NLL_VAL_FRAC")]
        val_frac: f64,
        #[arg(long, env = "NLL_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long = "in", env = "NLL_IN")]
        input: PathBuf,
        #[arg(long, env = "NLL_TRAIN_OUT")]
        train_out: PathBuf,
        #[arg(long, env = "NLL_VAL_OUT")]
        val_out: PathBuf,
        #[command(flatten)]
        classes: Classes,
    },
    /// Write the 8-point tabular world (optionally refined) as JSON.
    World {
        /// Distinct points per original support point.
        #[arg(long, env = "NLL_REFINE", default_value_t = 1)]
        refine: usize,
        #[arg(long, env = "NLL_OUT")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct Classes {
    /// Number of classes; inferred from the labels when omitted.
    #[arg(long, env = "NLL_CLASSES")]
    classes: Option<usize>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long, env = "NLL_DATA")]
    data: PathBuf,
    /// Noisy validation set scored at each checkpoint.
    #[arg(long, env = "NLL_VAL")]
    val: Option<PathBuf>,
    /// TrainConfig JSON; defaults when omitted.
    #[arg(long, env = "NLL_CONFIG")]
    config: Option<PathBuf>,
    #[arg(long, env = "NLL_OUT")]
    out: PathBuf,
    #[arg(long, env = "NLL_CHECKPOINTS")]
    checkpoints: Option<PathBuf>,
    #[command(flatten)]
    classes: Classes,
}

#[derive(Subcommand)]
enum BoundsCmd {
    /// Training-to-noisy-distribution gap bound.
    Gen {
        #[arg(long, env = "NLL_M")]
        m: u64,
        #[arg(long, env = "NLL_DVC")]
        dvc: f64,
        #[arg(long, env = "NLL_DELTA")]
        delta: f64,
    },
    /// Noisy-validation gap bound.
    Val {
        #[arg(long, env = "NLL_N")]
        n: u64,
        #[arg(long, env = "NLL_DELTA")]
        delta: f64,
    },
    /// Monte Carlo audit of the validation bound on a discrete world.
    Audit {
        /// Discrete classifier or MLP parameters (JSON).
        #[arg(long, env = "NLL_MODEL")]
        model: PathBuf,
        #[arg(long, env = "NLL_WORLD")]
        world: PathBuf,
        #[arg(long, env = "NLL_NOISE")]
        noise: PathBuf,
        #[arg(long, env = "NLL_N")]
        n: u64,
        #[arg(long, env = "NLL_DELTA")]
        delta: f64,
        #[arg(long, env = "NLL_TRIALS")]
        trials: usize,
        #[arg(long, env = "NLL_SEED", default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Subcommand)]
enum OracleCmd {
    /// Best classifier under one objective.
    Best {
        #[arg(long, env = "NLL_WORLD")]
        world: PathBuf,
        #[arg(long, env = "NLL_NOISE", group = "objective")]
        noise: Option<PathBuf>,
        #[arg(long, env = "NLL_CLEAN", group = "objective")]
        clean: bool,
        #[arg(long, env = "NLL_SAMPLE", group = "objective")]
        sample: Option<PathBuf>,
    },
}

#[derive(Args)]
struct NtsArgs {
    #[arg(long, env = "NLL_TRAIN")]
    train: PathBuf,
    #[arg(long, env = "NLL_VAL")]
    val: PathBuf,
    /// Clean test set for diagnostic accuracies.
    #[arg(long, env = "NLL_TEST")]
    test: Option<PathBuf>,
    #[arg(long, env = "NLL_CONFIG")]
    config: Option<PathBuf>,
    #[arg(long, env = "NLL_REPORT")]
    report: PathBuf,
    #[command(flatten)]
    classes: Classes,
}

#[derive(Args)]
struct SweepArgs {
    /// SweepConfig JSON; defaults when omitted.
    #[arg(long, env = "NLL_CONFIG")]
    config: Option<PathBuf>,
    #[arg(long, env = "NLL_OUT")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum DemoCmd {
    /// The 8-point world under 25% uniform noise.
    Tabular {
        #[arg(long, env = "NLL_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long, env = "NLL_OUT")]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum AuditCmd {
    /// Validation and generalization bound audits.
    Bounds {
        #[arg(long, env = "NLL_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long, env = "NLL_OUT")]
        out: PathBuf,
    },
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_str(&read_text(path)?).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &(serde_json::to_string_pretty(value)? + "\n"))
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

/// Reads datasets that must share one class count: `--classes`, else the
/// largest label seen across all of them plus one.
fn read_datasets(paths: &[&Path], classes: &Classes) -> Result<Vec<LabeledDataset>> {
    let raw = paths
        .iter()
        .map(|p| LabeledDataset::read_csv(p, None))
        .collect::<Result<Vec<_>>>()?;
    let k = classes
        .classes
        .unwrap_or_else(|| raw.iter().map(LabeledDataset::k).max().unwrap_or(1).max(2));
    raw.into_iter()
        .map(|ds| LabeledDataset::new(ds.dim(), ds.features().to_vec(), ds.labels().to_vec(), k))
        .collect()
}

fn train_config(path: Option<&Path>) -> Result<TrainConfig> {
    let cfg = match path {
        Some(p) => read_json(p)?,
        None => TrainConfig::default(),
    };
    cfg.validate()?;
    Ok(cfg)
}

fn load_model(path: &Path, world: &DiscreteDistribution) -> Result<DiscreteClassifier> {
    let text = read_text(path)?;
    if let Ok(h) = serde_json::from_str::<DiscreteClassifier>(&text) {
        return Ok(h);
    }
    let params: MlpParams =
        serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: not a model file: {e}", path.display())))?;
    DiscreteClassifier::from_classifier(&params, world)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Noise(NoiseCmd::Make { kind, k, rate, out }) => {
            let t = match kind {
                NoiseKind::Uniform => uniform_noise(k, rate)?,
                NoiseKind::Pair => pair_noise(k, rate)?,
            };
            write_json(&out, &t)
        }
        Command::Data(cmd) => match cmd {
            DataCmd::Make {
                kind,
                m,
                sigma,
                seed,
                out,
            } => {
                let ds = match kind {
                    DataKind::Moons => make_moons(m, sigma.unwrap_or(MOONS_SIGMA), seed)?,
                    DataKind::Circles => make_circles(m, sigma.unwrap_or(CIRCLES_SIGMA), seed)?,
                    DataKind::Tabular => {
                        if sigma.is_some() {
                            return Err(Error::InvalidArgument(
                                "--sigma does not apply to the tabular world".into(),
                            ));
                        }
                        sample_iid(&tabular_world(), m, &TransitionMatrix::identity(2)?, seed)?
                    }
                };
                ds.write_csv(&out)
            }
            DataCmd::Corrupt {
                noise,
                seed,
                input,
                out,
            } => {
                let t: TransitionMatrix = read_json(&noise)?;
                let ds = LabeledDataset::read_csv(&input, Some(t.k()))?;
                ds.with_labels(corrupt_labels(ds.labels(), &t, seed)?)?.write_csv(&out)
            }
            DataCmd::Split {
                val_frac,
                seed,
                input,
                train_out,
                val_out,
                classes,
            } => {
                let ds = read_datasets(&[&input], &classes)?.remove(0);
                let (train, val) = split(&ds, val_frac, seed)?;
                train.write_csv(&train_out)?;
                val.write_csv(&val_out)
            }
            DataCmd::World { refine, out } => {
                if refine == 0 {
                    return Err(Error::InvalidArgument("--refine must be at least 1".into()));
                }
                let world = if refine == 1 {
                    tabular_world()
                } else {
                    tabular_world_refined(refine)
                };
                write_json(&out, &world)
            }
        },
        Command::Train(a) => {
            let cfg = train_config(a.config.as_deref())?;
            let mut paths = vec![a.data.as_path()];
            paths.extend(a.val.as_deref());
            let sets = read_datasets(&paths, &a.classes)?;
            let (params, ckpts) = train_mlp(&sets[0], &cfg, sets.get(1))?;
            write_json(&a.out, &params)?;
            if let Some(path) = a.checkpoints {
                let mut csv = String::from("step,train_acc,val_acc\n");
                for c in &ckpts {
                    let val = c.noisy_val_acc.map(|v| v.to_string()).unwrap_or_default();
                    csv.push_str(&format!("{},{},{}\n", c.step, c.train_acc, val));
                }
                write_text(&path, &csv)?;
            }
            Ok(())
        }
        Command::Bounds(cmd) => match cmd {
            BoundsCmd::Gen { m, dvc, delta } => {
                let bound = generalization_gap_bound(&BoundParams {
                    d_vc: dvc,
                    delta,
                    m,
                    n: 1,
                })?;
                print_json(&json!({"bound": bound, "inputs": {"m": m, "d_vc": dvc, "delta": delta}}))
            }
            BoundsCmd::Val { n, delta } => {
                let bound = validation_gap_bound(n, delta)?;
                print_json(&json!({"bound": bound, "inputs": {"n": n, "delta": delta}}))
            }
            BoundsCmd::Audit {
                model,
                world,
                noise,
                n,
                delta,
                trials,
                seed,
            } => {
                let world: DiscreteDistribution = read_json(&world)?;
                let t: TransitionMatrix = read_json(&noise)?;
                let h = load_model(&model, &world)?;
                let r = audit_validation_bound(&h.bind(&world), &world, &t, n, delta, trials, seed)?;
                print_json(&json!({
                    "bound": r.bound,
                    "inputs": {"n": n, "delta": delta, "trials": trials, "seed": seed},
                    "exact_noisy_accuracy": r.exact_noisy_accuracy,
                    "violations": r.violations,
                    "violation_frequency": r.violation_frequency,
                }))
            }
        },
        Command::Oracle(OracleCmd::Best {
            world,
            noise,
            clean,
            sample,
        }) => {
            let world: DiscreteDistribution = read_json(&world)?;
            let best = match (noise, clean, sample) {
                (Some(p), false, None) => {
                    let t: TransitionMatrix = read_json(&p)?;
                    enumerate_best(&world, Objective::Noisy(&t))?
                }
                (None, true, None) => enumerate_best(&world, Objective::Clean)?,
                (None, false, Some(p)) => {
                    let s = LabeledDataset::read_csv(&p, Some(world.k()))?;
                    enumerate_best(&world, Objective::Empirical(&s))?
                }
                _ => {
                    return Err(Error::InvalidArgument(
                        "exactly one of --noise, --clean, --sample is required".into(),
                    ))
                }
            };
            print_json(&json!({
                "value": best.value,
                "assignment": best.classifier.assignment(),
                "unique": best.unique,
            }))
        }
        Command::Nts(a) => {
            let cfg = train_config(a.config.as_deref())?;
            let mut paths = vec![a.train.as_path(), a.val.as_path()];
            paths.extend(a.test.as_deref());
            let sets = read_datasets(&paths, &a.classes)?;
            let report = run_nts(&sets[0], &sets[1], &cfg, sets.get(2))?;
            report.write_json(&a.report)
        }
        Command::Sweep(a) => {
            let cfg: SweepConfig = match &a.config {
                Some(p) => read_json(p)?,
                None => SweepConfig::default(),
            };
            let result = Report::Sweep(run_regime_sweep(&cfg)?);
            create_dir(&a.out)?;
            for (format, name) in [
                (ReportFormat::Csv, "sweep.csv"),
                (ReportFormat::Json, "sweep.json"),
                (ReportFormat::Svg, "sweep.svg"),
            ] {
                emit_report(&result, format, a.out.join(name))?;
            }
            Ok(())
        }
        Command::Demo(DemoCmd::Tabular { seed, out }) => {
            create_dir(&out)?;
            emit_report(
                &Report::Tabular(run_tabular_demo(seed)?),
                ReportFormat::Json,
                out.join("tabular.json"),
            )
        }
        Command::Audit(AuditCmd::Bounds { seed, out }) => {
            create_dir(&out)?;
            let suite = run_bound_audit_suite(seed)?;
            let holds = suite.all_hold;
            emit_report(&Report::Audit(suite), ReportFormat::Json, out.join("audit.json"))?;
            if !holds {
                eprintln!("warning: at least one audited bound was violated beyond its tolerance");
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::InvalidArgument(_) | Error::AssumptionViolated(_) | Error::Capacity { .. } => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
