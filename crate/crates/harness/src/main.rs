use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use css_core::css::css_threshold;
use css_core::data::{beta14, sample_calibration, train_logistic, GroupSpec, GroupedNoisyWorld, LabeledRow, NoisyClassifierWorld, TrainConfig};
use css_core::policies::{ScreeningPolicy, ThresholdPolicy};
use css_core::{derive_stream, GroupId, GuaranteeConfig, Membership, RandomSource, ScoredExample};
use css_harness::diversity_exp::{emit_diversity_csv, run_diversity, DiversityConfig, MAJORITY, MINORITY};
use css_harness::experiment::{emit_csv, run_sweep, ExperimentConfig, Method, Sweep, SweepAxis};
use css_harness::io::{fmt17, read_feature_csv, read_model, read_pool_csv, read_scored_csv, write_features_csv, write_model, write_scored_csv};
use css_harness::svg::{emit_svg_lines, Metric};
use css_harness::{HarnessError, Result};

#[derive(Parser)]
#[command(name = "css", version, about = "Calibrated candidate screening experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Scored,
    Features,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic scored or feature CSV.
    Generate {
        #[arg(long, value_enum, default_value = "scored")]
        kind: Kind,
        #[arg(long, default_value_t = 10_000)]
        n: usize,
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        /// Per-group noise, e.g. `majority=0,minority=0.5`; shares follow `--group-share`.
        #[arg(long)]
        group_noise: Option<String>,
        /// Share of the first group when `--group-noise` is given.
        #[arg(long, default_value_t = 0.7)]
        group_share: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a logistic model on a feature CSV.
    Train {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 500)]
        epochs: usize,
        #[arg(long, default_value_t = 0.1)]
        learning_rate: f64,
    },
    /// Score a feature CSV with a saved model, writing `score,label[,group]`.
    Score {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the calibrated threshold for a scored calibration CSV.
    Calibrate {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 5.0)]
        k: f64,
        #[arg(long, default_value_t = 100)]
        m: usize,
        #[arg(long, default_value_t = 0.1)]
        alpha: f64,
    },
    /// Apply a threshold to a pool CSV, writing `index,score,selected`.
    Shortlist {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        threshold: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Repeated trials over a sweep, written as CSV and optionally SVG.
    Experiment {
        #[command(flatten)]
        common: Common,
        /// Comma-separated methods; `umb` expands to one variant per `--bins` value.
        #[arg(long, default_value = "css,umb,uncalibrated,platt,isotonic")]
        method: String,
        #[arg(long, default_value = "2,5,10")]
        bins: String,
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        /// `axis=v1,v2,...` with axis one of noise, n, k, alpha.
        #[arg(long)]
        sweep: Option<String>,
        /// Chart path; writes `<stem>-eq.<ext>` and `<stem>-ss.<ext>`.
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// The two-group experiment sweeping minority noise.
    DiversityExperiment {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "css-div,css,uncalibrated,platt,isotonic")]
        method: String,
        /// `noise=v1,v2,...` over the minority group's noise.
        #[arg(long)]
        sweep: Option<String>,
        /// Fixed noise per group, e.g. `majority=0,minority=0.4`.
        #[arg(long)]
        group_noise: Option<String>,
    },
}

#[derive(clap::Args)]
struct Common {
    #[arg(long, default_value_t = 5.0)]
    k: f64,
    #[arg(long, default_value_t = 100)]
    m: usize,
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
    #[arg(long, default_value_t = 10_000)]
    n_cal: usize,
    #[arg(long, default_value_t = 100)]
    runs: usize,
    #[arg(long, default_value_t = 1000)]
    test_pools: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Run cells one at a time.
    #[arg(long)]
    serial: bool,
}

fn config_err(msg: impl Into<String>) -> HarnessError {
    HarnessError::Config(msg.into())
}

fn parse_group_noise(spec: &str) -> Result<BTreeMap<String, f64>> {
    spec.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|pair| {
            let (g, r) = pair.split_once('=').ok_or_else(|| config_err(format!("`{pair}` is not group=noise")))?;
            let r: f64 = r.trim().parse().map_err(|_| config_err(format!("bad noise `{r}`")))?;
            Ok((g.trim().to_string(), r))
        })
        .collect()
}

fn parse_methods(list: &str, bins: &str) -> Result<Vec<Method>> {
    let mut out = Vec::new();
    for name in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        if name == "umb" {
            for b in bins.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                out.push(format!("umb-{b}").parse()?);
            }
        } else {
            out.push(name.parse()?);
        }
    }
    Ok(out)
}

fn svg_paths(path: &Path) -> (PathBuf, PathBuf) {
    let stem = path.file_stem().map_or_else(|| "chart".into(), |s| s.to_string_lossy().into_owned());
    let ext = path.extension().map_or_else(|| "svg".into(), |s| s.to_string_lossy().into_owned());
    (path.with_file_name(format!("{stem}-eq.{ext}")), path.with_file_name(format!("{stem}-ss.{ext}")))
}

fn standard_normal(rng: &mut RandomSource) -> f64 {
    let u1 = 1.0 - rng.uniform();
    let u2 = rng.uniform();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Feature rows whose label probability is a Beta(1, 4) draw `p`: two noisy
/// views of `p` and one pure-noise column.
fn feature_rows(n: usize, rng: &mut RandomSource) -> Vec<LabeledRow> {
    (0..n)
        .map(|_| {
            let p = beta14(rng.uniform());
            let label = rng.bernoulli(p);
            let features = vec![p + 0.1 * standard_normal(rng), 0.5 * p + 0.3 * standard_normal(rng), standard_normal(rng)];
            LabeledRow { features, label, groups: Membership::none() }
        })
        .collect()
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate { kind, n, noise, group_noise, group_share, seed, out } => {
            let mut rng = derive_stream(seed, 0);
            match kind {
                Kind::Features => {
                    if n == 0 {
                        return Err(config_err("n must be at least 1"));
                    }
                    write_features_csv(&out, &feature_rows(n, &mut rng))
                }
                Kind::Scored => {
                    let cal = match group_noise {
                        Some(spec) => {
                            let groups: Vec<(String, f64)> = parse_group_noise(&spec)?.into_iter().collect();
                            if groups.len() != 2 {
                                return Err(config_err("--group-noise needs exactly two groups"));
                            }
                            let specs = vec![
                                GroupSpec { id: GroupId::new(&groups[0].0), share: group_share, r_noise: groups[0].1 },
                                GroupSpec { id: GroupId::new(&groups[1].0), share: 1.0 - group_share, r_noise: groups[1].1 },
                            ];
                            sample_calibration(&GroupedNoisyWorld::new(specs)?, n, &mut rng)?
                        }
                        None => sample_calibration(&NoisyClassifierWorld::new(noise)?, n, &mut rng)?,
                    };
                    write_scored_csv(&out, cal.examples())
                }
            }
        }
        Command::Train { input, out, epochs, learning_rate } => {
            let rows = read_feature_csv(&input)?;
            let model = train_logistic(&rows, &TrainConfig { epochs, learning_rate, ..TrainConfig::default() })?;
            write_model(&out, &model)
        }
        Command::Score { model, input, out } => {
            let model = read_model(&model)?;
            let rows = read_feature_csv(&input)?;
            let scored = rows
                .iter()
                .map(|r| Ok(ScoredExample { score: model.predict(&r.features)?, label: r.label, groups: r.groups.clone() }))
                .collect::<Result<Vec<_>>>()?;
            write_scored_csv(&out, &scored)
        }
        Command::Calibrate { input, k, m, alpha } => {
            let cal = read_scored_csv(&input)?;
            let r = css_threshold(&cal, &GuaranteeConfig::new(k, m as f64, alpha)?);
            println!("threshold={}", fmt17(r.threshold()));
            println!("epsilon={}", fmt17(r.epsilon()));
            println!("delta={}", fmt17(r.delta_at_threshold()));
            println!("feasible={}", r.is_feasible());
            Ok(())
        }
        Command::Shortlist { input, threshold, out } => {
            let pool = read_pool_csv(&input)?;
            let policy = ThresholdPolicy::new(threshold)?;
            let mut text = String::from("index,score,selected\n");
            for (i, &s) in pool.scores().iter().enumerate() {
                let selected = policy.selection_probability(s) >= 1.0;
                text.push_str(&format!("{i},{},{}\n", fmt17(s), u8::from(selected)));
            }
            match out {
                Some(path) => std::fs::write(&path, text).map_err(|e| HarnessError::Io { path, source: e }),
                None => std::io::stdout().write_all(text.as_bytes()).map_err(|e| HarnessError::Io { path: "<stdout>".into(), source: e }),
            }
        }
        Command::Experiment { common, method, bins, noise, sweep, svg } => {
            let sweep: Option<Sweep> = sweep.map(|s| s.parse()).transpose()?;
            let cfg = ExperimentConfig {
                methods: parse_methods(&method, &bins)?,
                k: common.k,
                m: common.m,
                alpha: common.alpha,
                n_cal: common.n_cal,
                r_noise: noise,
                runs: common.runs,
                test_pools: common.test_pools,
                master_seed: common.seed,
                sweep,
                parallel: !common.serial,
                ..ExperimentConfig::default()
            };
            let table = run_sweep(&cfg)?;
            emit_csv(&table, &common.out)?;
            if let Some(path) = svg {
                let (eq, ss) = svg_paths(&path);
                emit_svg_lines(&table, Metric::Eq, &eq)?;
                emit_svg_lines(&table, Metric::Ss, &ss)?;
            }
            Ok(())
        }
        Command::DiversityExperiment { common, method, sweep, group_noise } => {
            let mut cfg = DiversityConfig {
                methods: parse_methods(&method, "")?,
                k: common.k,
                m: common.m,
                alpha: common.alpha,
                n_cal: common.n_cal,
                runs: common.runs,
                test_pools: common.test_pools,
                master_seed: common.seed,
                parallel: !common.serial,
                ..DiversityConfig::default()
            };
            if let Some(spec) = group_noise {
                for (g, r) in parse_group_noise(&spec)? {
                    match g.as_str() {
                        MAJORITY => cfg.majority_noise = r,
                        MINORITY => cfg.minority_noise = vec![r],
                        other => return Err(config_err(format!("unknown group `{other}`"))),
                    }
                }
            }
            if let Some(s) = sweep {
                let s: Sweep = s.parse()?;
                if s.axis != SweepAxis::Noise {
                    return Err(config_err("the diversity experiment sweeps minority noise only"));
                }
                if !s.values.is_empty() {
                    cfg.minority_noise = s.values;
                }
            }
            emit_diversity_csv(&run_diversity(&cfg)?, &common.out)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
