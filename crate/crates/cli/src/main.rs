//! `ndigo` — experiment driver for the intrinsic-motivation laboratory.
//!
//! Subcommands: `run` (train + evaluate), `compare` (merge run summaries),
//! `oracle-verify` (check the NDIGO/information-gain identity on a tabular
//! world), `render` (replay a checkpoint and draw the world).

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use ndigo_core::agent::QNet;
use ndigo_core::checkpoint;
use ndigo_core::config::RunConfig;
use ndigo_core::env::{EnvConfig, GridWorld, ObjectKind};
use ndigo_core::harness::{self, ActorPolicy, EpsSchedule, PredictorModel};
use ndigo_core::oracle::verify::{verify_ndigo_identity, VerifyPolicy};
use ndigo_core::oracle::worlds::{builtin, WorldFile};
use ndigo_core::oracle::TabularPomdp;
use ndigo_core::rng::{derive_seed, stream};
use ndigo_core::world_model::WorldModel;

#[derive(Parser)]
#[command(name = "ndigo", version, about = "intrinsic-motivation gridworld laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train and evaluate one configuration (all seeds in the config, or
    /// one seed via --seed).
    Run {
        /// TOML run configuration.
        #[arg(long)]
        config: PathBuf,
        /// Override the config's seed list with a single seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output root; defaults to $NDIGO_OUT or ./runs.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the training-step budget.
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Merge run summaries into comparison tables (markdown + CSV).
    Compare {
        /// Run directories (each holding summary.json).
        dirs: Vec<PathBuf>,
        /// Where to write comparison.md / comparison.csv; defaults to the
        /// first run directory's parent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte-Carlo check that exact-predictor NDIGO rewards equal the
    /// information-gain difference.
    OracleVerify {
        /// World JSON path, or builtin:<name> (e.g. builtin:three_state,
        /// builtin:white_noise_32, builtin:two_room, builtin:noisy_cycle_6).
        #[arg(long)]
        world: String,
        #[arg(long)]
        horizon: usize,
        #[arg(long)]
        episodes: usize,
        /// Actions per episode.
        #[arg(long, default_value_t = 5)]
        steps: usize,
        /// `script` cycles the action set; `random` draws uniformly.
        #[arg(long, default_value = "script")]
        policy: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Report JSON destination (stdout summary always printed).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Replay an evaluation episode from a saved checkpoint and render
    /// top-down views (text + PNG).
    Render {
        /// Path to a saved Q-network blob (e.g. runs/exp1-pe/seed0/qnet.bin).
        #[arg(long)]
        checkpoint: PathBuf,
        /// Evaluation episode index to replay.
        #[arg(long, default_value_t = 0)]
        episode: usize,
        /// Output directory; defaults to the checkpoint's directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn out_root(cli_out: Option<PathBuf>) -> PathBuf {
    cli_out
        .or_else(|| std::env::var_os("NDIGO_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("runs"))
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run {
            config,
            seed,
            out,
            steps,
        } => cmd_run(&config, seed, out, steps),
        Command::Compare { dirs, out } => cmd_compare(&dirs, out),
        Command::OracleVerify {
            world,
            horizon,
            episodes,
            steps,
            policy,
            seed,
            out,
        } => cmd_oracle_verify(&world, horizon, episodes, steps, &policy, seed, out),
        Command::Render {
            checkpoint,
            episode,
            out,
        } => cmd_render(&checkpoint, episode, out),
    }
}

fn cmd_run(
    config_path: &Path,
    seed: Option<u64>,
    out: Option<PathBuf>,
    steps: Option<usize>,
) -> Result<()> {
    let text = fs::read_to_string(config_path)
        .with_context(|| format!("reading {}", config_path.display()))?;
    let mut config = RunConfig::from_toml_str(&text)?;
    if let Some(s) = seed {
        config.seeds = vec![s];
    }
    if let Some(n) = steps {
        config.train_steps = n;
    }
    let root = out_root(out);
    let (run_dir, summary) = harness::run(&config, &root)?;
    println!("run complete: {}", run_dir.display());
    for a in &summary.aggregate {
        println!(
            "  {:<22} discovery {:.3} ± {:.3}  visits {:.1} ± {:.1}  first {:.1} ± {:.1}",
            a.aspect,
            a.discovery_mean,
            a.discovery_std,
            a.visit_mean,
            a.visit_std,
            a.first_visit_mean,
            a.first_visit_std
        );
    }
    Ok(())
}

fn cmd_compare(dirs: &[PathBuf], out: Option<PathBuf>) -> Result<()> {
    if dirs.is_empty() {
        bail!("compare needs at least one run directory");
    }
    let (md, csv) = harness::compare(dirs)?;
    let out_dir = out.unwrap_or_else(|| {
        dirs[0]
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."))
    });
    fs::create_dir_all(&out_dir)?;
    fs::write(out_dir.join("comparison.md"), &md)?;
    fs::write(out_dir.join("comparison.csv"), &csv)?;
    println!("{md}");
    println!("wrote {}", out_dir.join("comparison.md").display());
    Ok(())
}

fn load_world(spec: &str) -> Result<TabularPomdp<f64>> {
    if let Some(name) = spec.strip_prefix("builtin:") {
        return builtin::<f64>(name).with_context(|| format!("unknown builtin world `{name}`"));
    }
    let text = fs::read_to_string(spec).with_context(|| format!("reading {spec}"))?;
    let wf: WorldFile = serde_json::from_str(&text)?;
    Ok(wf.into_pomdp::<f64>()?)
}

fn cmd_oracle_verify(
    world: &str,
    horizon: usize,
    episodes: usize,
    steps: usize,
    policy: &str,
    seed: u64,
    out: Option<PathBuf>,
) -> Result<()> {
    let m = load_world(world)?;
    let policy = match policy {
        "random" => VerifyPolicy::UniformRandom,
        "script" => VerifyPolicy::Script((0..m.n_actions).collect()),
        other => bail!("unknown policy `{other}` (expected script or random)"),
    };
    let report = verify_ndigo_identity(&m, &policy, horizon, episodes, steps, seed)?;
    println!(
        "H = {}  episodes = {}  samples = {}",
        report.horizon, report.episodes, report.reward_samples
    );
    println!(
        "mean reward     {:+.6e}\nmean IG diff    {:+.6e}\nresidual        {:+.6e} (se {:.3e})\n|error| <= 3 se {}",
        report.mean_reward, report.mean_ig_diff, report.residual_mean, report.residual_se,
        if report.within_3_se { "PASS" } else { "FAIL" }
    );
    if let Some(path) = out {
        fs::write(&path, serde_json::to_string_pretty(&report)?)?;
        println!("report written to {}", path.display());
    }
    if !report.within_3_se {
        bail!("identity check failed");
    }
    Ok(())
}

fn kind_color(kind: ObjectKind) -> [u8; 3] {
    match kind {
        ObjectKind::Fixed => [31, 119, 180],
        ObjectKind::Bouncing => [44, 160, 44],
        ObjectKind::Brownian => [148, 103, 189],
        ObjectKind::WhiteNoise => [214, 39, 40],
        ObjectKind::Movable => [255, 127, 14],
    }
}

fn draw_png(world: &GridWorld, path: &Path) -> Result<()> {
    const SCALE: u32 = 16;
    let (w, h) = (world.layout.width as u32, world.layout.height as u32);
    let mut img = image::RgbImage::new(w * SCALE, h * SCALE);
    for r in 0..h {
        for c in 0..w {
            let cell = ndigo_core::env::Cell::new(r as usize, c as usize);
            let color = if world.layout.is_wall(cell) {
                [64u8, 64, 64]
            } else {
                [235, 235, 235]
            };
            for dr in 0..SCALE {
                for dc in 0..SCALE {
                    img.put_pixel(c * SCALE + dc, r * SCALE + dr, image::Rgb(color));
                }
            }
        }
    }
    let mut blot = |cell: ndigo_core::env::Cell, color: [u8; 3]| {
        let (r0, c0) = (cell.row as u32 * SCALE, cell.col as u32 * SCALE);
        for dr in 2..SCALE - 2 {
            for dc in 2..SCALE - 2 {
                img.put_pixel(c0 + dc, r0 + dr, image::Rgb(color));
            }
        }
    };
    for obj in &world.objects {
        blot(obj.pos, kind_color(obj.kind));
    }
    blot(world.agent, [0, 0, 0]);
    img.save(path)?;
    Ok(())
}

fn cmd_render(checkpoint_path: &Path, episode: usize, out: Option<PathBuf>) -> Result<()> {
    let base = checkpoint_path.with_extension("");
    let seed_dir = base
        .parent()
        .context("checkpoint has no parent directory")?
        .to_path_buf();
    let run_dir = seed_dir.parent().context("seed dir has no parent")?;
    let manifest_text = fs::read_to_string(run_dir.join("manifest.json"))
        .context("manifest.json not found next to the seed directory")?;
    let manifest: serde_json::Value = serde_json::from_str(&manifest_text)?;
    let config: RunConfig = serde_json::from_value(manifest["config"].clone())?;
    let env_cfg: EnvConfig = config.env_config()?;
    let ckpt = checkpoint::read_manifest(&base)?;

    let mut qnet = QNet::<f64>::new(ckpt.seed, ckpt.dims.clone());
    checkpoint::load(&base, &mut qnet)?;
    // the belief model is only needed for reward bookkeeping; renders use
    // a fresh one when the world-model blob is absent
    let wm_base = seed_dir.join("world_model");
    let mut wm = WorldModel::<f64>::new(ckpt.seed, ckpt.dims.clone());
    if wm_base.with_extension("bin").exists() {
        checkpoint::load(&wm_base, &mut wm)?;
    }
    let model = PredictorModel::Frames(wm);

    let out_dir = out.unwrap_or(seed_dir);
    fs::create_dir_all(&out_dir)?;
    let episode_seed = derive_seed(ckpt.seed, &format!("eval/{episode}"));
    let mut act_rng = stream(ckpt.seed, "render_act");
    let policy = ActorPolicy::EpsilonGreedy {
        qnet: &qnet,
        schedule: EpsSchedule::constant(config.eval_epsilon),
    };
    // re-roll the episode, capturing frames
    let reward = ndigo_core::rewards::RewardSpec::simple(ndigo_core::rewards::RewardKind::Pe);
    let outp = harness::run_actor(
        &env_cfg,
        episode_seed,
        &model,
        None,
        &reward,
        &policy,
        None,
        usize::MAX / 2,
        &mut act_rng,
    )?;
    // text frames every 20 steps by replaying the action sequence
    let (mut world, _) = GridWorld::reset(&env_cfg, episode_seed)?;
    let mut frames = vec![format!("t = 0\n{}\n", world.render_global().join("\n"))];
    for (t, a) in outp.actions.iter().enumerate() {
        world.step(*a)?;
        if (t + 1) % 20 == 0 || t + 1 == outp.actions.len() {
            frames.push(format!("t = {}\n{}\n", t + 1, world.render_global().join("\n")));
        }
    }
    let text_path = out_dir.join(format!("render_ep{episode}.txt"));
    fs::write(&text_path, frames.join("\n"))?;
    let png_path = out_dir.join(format!("render_ep{episode}.png"));
    draw_png(&world, &png_path)?;
    println!("wrote {}", text_path.display());
    println!("wrote {}", png_path.display());
    Ok(())
}
