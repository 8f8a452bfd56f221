//! Command-line entry point: train, eval, enumerate, gradcheck, export-plots.
//!
//! Exit codes: 0 success, 1 contract violation, 2 I/O trouble.

use clap::{Parser, Subcommand};
use objnav::evalsuite::TestSetKind;
use objnav::harness::{
    cmd_enumerate, cmd_eval, cmd_export_plots, cmd_gradcheck, cmd_train, ExperimentConfig,
    HarnessError, PolicyKind,
};
use objnav::world::RoomKind;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "objnav", about = "Object-goal navigation laboratory", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train an agent; resumes from <out-dir>/last.json when present.
    Train {
        /// Experiment config JSON; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override schedule.total_steps.
        #[arg(long)]
        total_steps: Option<u64>,
        /// Override paths.out_dir.
        #[arg(long)]
        out_dir: Option<String>,
        /// Override master_seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override augmentation.enabled.
        #[arg(long)]
        augment: Option<bool>,
    },
    /// Evaluate a policy on held-out layouts.
    Eval {
        /// Checkpoint JSON (required for --policy net).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Config JSON when running without a checkpoint.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Comma-separated test sets: zero,one,two,three.
        #[arg(long, default_value = "zero,one,two,three")]
        test_sets: String,
        /// Episodes per test set.
        #[arg(long, default_value_t = 1080)]
        episodes: usize,
        /// net | oracle | random | never-done.
        #[arg(long, default_value = "net")]
        policy: String,
        #[arg(long, default_value = "eval-out")]
        out_dir: PathBuf,
    },
    /// Print the color assignments of a test set with deception labels.
    Enumerate {
        /// kitchen | bedroom | living-room.
        #[arg(long)]
        room: String,
        /// zero | one | two | three.
        #[arg(long)]
        test_set: String,
    },
    /// Check analytic PPO gradients against finite differences.
    Gradcheck {
        /// Perturb the analytic gradient to prove the check can fail.
        #[arg(long, default_value_t = false)]
        corrupt: bool,
    },
    /// Convert an eval report JSON into the flat plot CSV.
    ExportPlots {
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_test_set(s: &str) -> Result<TestSetKind, HarnessError> {
    match s.trim() {
        "zero" => Ok(TestSetKind::Zero),
        "one" => Ok(TestSetKind::One),
        "two" => Ok(TestSetKind::Two),
        "three" => Ok(TestSetKind::Three),
        other => Err(HarnessError::BadArg(format!("unknown test set {other:?}"))),
    }
}

fn parse_room(s: &str) -> Result<RoomKind, HarnessError> {
    match s {
        "kitchen" => Ok(RoomKind::Kitchen),
        "bedroom" => Ok(RoomKind::Bedroom),
        "living-room" => Ok(RoomKind::LivingRoom),
        other => Err(HarnessError::BadArg(format!("unknown room {other:?}"))),
    }
}

fn load_config(path: Option<&PathBuf>) -> Result<ExperimentConfig, HarnessError> {
    match path {
        Some(p) => Ok(ExperimentConfig::from_json(&std::fs::read_to_string(p)?)?),
        None => Ok(ExperimentConfig::default()),
    }
}

fn apply_env_overrides(config: &mut ExperimentConfig) {
    if let Ok(dir) = std::env::var("OBJNAV_OUT_DIR") {
        config.paths.out_dir = dir;
    }
}

fn init_threads() {
    #[cfg(feature = "parallel")]
    if let Ok(n) = std::env::var("OBJNAV_THREADS") {
        if let Ok(n) = n.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, HarnessError> {
    match cli.command {
        Command::Train { config, total_steps, out_dir, seed, augment } => {
            let mut cfg = load_config(config.as_ref())?;
            if let Some(n) = total_steps {
                cfg.schedule.total_steps = n;
            }
            if let Some(d) = out_dir {
                cfg.paths.out_dir = d;
            }
            if let Some(s) = seed {
                cfg.master_seed = s;
            }
            if let Some(a) = augment {
                cfg.augmentation.enabled = a;
            }
            apply_env_overrides(&mut cfg);
            let manifest = cmd_train(&cfg)?;
            println!(
                "trained {} frames in {:.1}s; best validation spl {:?}",
                manifest.frames,
                manifest.wall_clock_seconds,
                manifest.best.map(|b| b.spl)
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Eval { checkpoint, config, test_sets, episodes, policy, out_dir } => {
            let sets = test_sets
                .split(',')
                .map(parse_test_set)
                .collect::<Result<Vec<_>, _>>()?;
            let policy_kind = PolicyKind::parse(&policy)
                .ok_or_else(|| HarnessError::BadArg(format!("unknown policy {policy:?}")))?;
            let mut fallback = load_config(config.as_ref())?;
            apply_env_overrides(&mut fallback);
            let out = std::env::var("OBJNAV_OUT_DIR")
                .map(PathBuf::from)
                .unwrap_or(out_dir);
            let (_, report) = cmd_eval(
                checkpoint.as_deref(),
                Some(fallback),
                &sets,
                episodes,
                policy_kind,
                &out,
            )?;
            for (set, sr) in &report.sets {
                println!(
                    "{:>6}: success {:.3}  spl {:.3}  dtt {:.2}  steps {:.1}  (n={})",
                    set.name(),
                    sr.overall.success_rate,
                    sr.overall.spl,
                    sr.overall.mean_dtt,
                    sr.overall.mean_episode_length,
                    sr.overall.episodes
                );
            }
            println!("artifacts written to {}", out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Enumerate { room, test_set } => {
            let room = parse_room(&room)?;
            let set = parse_test_set(&test_set)?;
            println!("{:<10} {:<10} {:<12} {}", "kitchen", "bedroom", "living_room", "deception");
            for (a, label) in cmd_enumerate(room, set) {
                println!(
                    "{:<10} {:<10} {:<12} {:?}",
                    format!("{:?}", a.kitchen),
                    format!("{:?}", a.bedroom),
                    format!("{:?}", a.living_room),
                    label
                );
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Gradcheck { corrupt } => {
            let err = cmd_gradcheck(corrupt)?;
            println!("max relative gradient error: {err:.3e}");
            if err < 1e-4 {
                Ok(ExitCode::SUCCESS)
            } else {
                Ok(ExitCode::FAILURE)
            }
        }
        Command::ExportPlots { report, out } => {
            cmd_export_plots(&report, &out)?;
            println!("wrote {}", out.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    init_threads();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
