use ndigo_core::config::{RunConfig, TrainParams};
use ndigo_core::harness;
use ndigo_core::rewards::{RewardKind, RewardSpec};
use std::time::Instant;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let steps: usize = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(10_000);
    let kind = args.get(2).map(|s| s.as_str()).unwrap_or("pe");
    let seed: u64 = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(0);
    let reward = match kind {
        "pe" => RewardSpec::simple(RewardKind::Pe),
        "ndigo4" => RewardSpec::ndigo(4),
        "ndigo1" => RewardSpec::ndigo(1),
        "icm" => RewardSpec::simple(RewardKind::Icm),
        _ => panic!("kind"),
    };
    let config = RunConfig {
        experiment: "exp1".into(),
        reward,
        model_preset: "tiny".into(),
        train_steps: steps,
        seeds: vec![seed],
        env: None,
        eval_episodes: 30,
        eval_epsilon: 0.05,
        k_horizons: Some(5),
        train: {
            let mut t = TrainParams::desk_recipe();
            t.segment_len = 400;
            t.model_updates_per_episode = 32;
            t.model_batch_segments = 1;
            t.wm_lr_final = Some(5e-4);
            t.q_updates_per_episode = 20;
            t.q_batch_traces = 2;
            t.q_lr = 1.5e-3;
            t.returns.target_update_period = 48;
            t.eps_fraction = 0.5;
            t.eps_end = 0.2;
            t.replay_capacity = 200;
            t.probe_updates_per_episode = 12;
            t.probe_lr = 1e-3;
            t
        },
    };
    let t0 = Instant::now();
    let out: std::path::PathBuf = args.get(4).map(|s| s.into()).unwrap_or_else(|| {
        tempfile::tempdir().unwrap().keep()
    });
    let (_, summary) = harness::run(&config, &out).unwrap();
    println!("out: {}", out.display());
    println!("kind={kind} steps={steps} seed={seed} wall={:.1}s", t0.elapsed().as_secs_f64());
    for a in &summary.aggregate {
        println!(
            "  {:<22} discovery {:.3}  visits {:>6.1}  first {:>6.1}",
            a.aspect, a.discovery_mean, a.visit_mean, a.first_visit_mean
        );
    }
    // room occupancy of the trained greedy policy
    use ndigo_core::agent::QNet;
    use ndigo_core::checkpoint;
    use ndigo_core::env::GridWorld;
    use ndigo_core::harness::{run_actor, ActorPolicy, EpsSchedule, PredictorModel};
    use ndigo_core::rng::{derive_seed, stream};
    use ndigo_core::world_model::WorldModel;
    let seed_dir = out.join(config.run_name()).join(format!("seed{seed}"));
    let ck = checkpoint::read_manifest(&seed_dir.join("qnet")).unwrap();
    let mut qnet = QNet::<f64>::new(ck.seed, ck.dims.clone());
    checkpoint::load(&seed_dir.join("qnet"), &mut qnet).unwrap();
    let mut wm = WorldModel::<f64>::new(ck.seed, ck.dims.clone());
    checkpoint::load(&seed_dir.join("world_model"), &mut wm).unwrap();
    let model = PredictorModel::Frames(wm);
    let env_cfg = config.env_config().unwrap();
    let (w0, _) = GridWorld::reset(&env_cfg, 0).unwrap();
    let layout = w0.layout.clone();
    let mut occupancy = vec![0usize; layout.rooms.len() + 1];
    let mut rng = stream(123, "census");
    for e in 0..10u64 {
        let policy = ActorPolicy::EpsilonGreedy { qnet: &qnet, schedule: EpsSchedule::constant(0.05) };
        let o = run_actor(&env_cfg, derive_seed(seed, &format!("census/{e}")), &model, None,
                          &config.reward, &policy, None, usize::MAX / 2, &mut rng).unwrap();
        for label in &o.labels {
            let cell = ndigo_core::env::Cell::new(label.agent / layout.width, label.agent % layout.width);
            let mut room = layout.rooms.len(); // corridors
            for (i, r) in layout.rooms.iter().enumerate() {
                if r.cells.contains(&cell) { room = i; break; }
            }
            occupancy[room] += 1;
        }
    }
    let names: Vec<String> = layout.rooms.iter().map(|r| r.label.clone()).chain(["corridor".into()]).collect();
    println!("  occupancy: {}", names.iter().zip(&occupancy).map(|(n, c)| format!("{n}={c}")).collect::<Vec<_>>().join(" "));
}
