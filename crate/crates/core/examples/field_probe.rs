// measure the live PE / NDIGO reward field of a trained checkpoint:
// park the agent adjacent to each room and average rewards over steps
use ndigo_core::checkpoint;
use ndigo_core::config::preset_env;
use ndigo_core::env::{Action, GridWorld};
use ndigo_core::harness::{run_actor, ActorPolicy, PredictorModel};
use ndigo_core::rewards::{RewardSpec, RewardKind};
use ndigo_core::rng::stream;
use ndigo_core::world_model::WorldModel;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let base = std::path::PathBuf::from(&args[1]); // .../seed0/world_model
    let kind = args.get(2).map(|s| s.as_str()).unwrap_or("pe");
    let manifest = checkpoint::read_manifest(&base).unwrap();
    let mut wm = WorldModel::<f64>::new(manifest.seed, manifest.dims.clone());
    checkpoint::load(&base, &mut wm).unwrap();
    let model = PredictorModel::Frames(wm);
    let env_cfg = preset_env("exp1").unwrap();
    let reward = match kind {
        "pe" => RewardSpec::simple(RewardKind::Pe),
        "ndigo4" => RewardSpec::ndigo(4),
        "ndigo1" => RewardSpec::ndigo(1),
        _ => panic!(),
    };

    // scripted policies: walk to a spot, then hold
    // up room: go up 5 (into room edge), hold. down: go down 5. center: stay.
    let scripts: Vec<(&str, Box<dyn Fn(usize) -> Action>)> = vec![
        ("hold_center", Box::new(|_| Action::Stay)),
        ("park_upper", Box::new(|t| if t < 6 { Action::Up } else { Action::Stay })),
        ("park_lower", Box::new(|t| if t < 6 { Action::Down } else { Action::Stay })),
        ("sweep_upper", Box::new(|t| {
            if t < 6 { Action::Up }
            else if (t / 11) % 2 == 0 { Action::Left } else { Action::Right }
        })),
        ("sweep_lower", Box::new(|t| {
            if t < 6 { Action::Down }
            else if (t / 11) % 2 == 0 { Action::Left } else { Action::Right }
        })),
    ];
    println!("reward field for {kind} ({})", base.display());
    for (name, script) in &scripts {
        let mut total = 0.0;
        let mut late = 0.0;
        let mut fixed_seen = 0.0;
        let mut noise_seen = 0.0;
        let n_ep = 40;
        let mut rng = stream(500, "probe");
        for ep in 0..n_ep {
            let policy = ActorPolicy::Scripted(script.as_ref());
            let out = run_actor(&env_cfg, 9000 + ep, &model, None, &reward, &policy, None, usize::MAX/2, &mut rng).unwrap();
            total += out.rewards.iter().sum::<f64>();
            late += out.rewards[200..].iter().sum::<f64>();
            fixed_seen += out.metrics.visit_count[0] as f64;
            noise_seen += out.metrics.visit_count[1] as f64;
        }
        let n = n_ep as f64;
        println!("  {name:<12} reward/ep {:8.2}  late200/ep {:8.2}  fixed_vis {:6.1} noise_vis {:6.1}",
                 total / n, late / n, fixed_seen / n, noise_seen / n);
    }

    // world-model quality: mean 1-step loss under a random policy
    let (mut world, obs0) = GridWorld::reset(&env_cfg, 31).unwrap();
    let wm = match &model { PredictorModel::Frames(m) => m, _ => unreachable!() };
    let mut b = wm.initial_belief(&obs0).unwrap();
    let mut rng = stream(32, "loss");
    let mut loss1 = 0.0;
    use rand::Rng;
    for _ in 0..world.episode_len {
        let a = Action::from_index(rng.gen_range(0..5));
        let pred = wm.predict(&b, &[a], 1).unwrap();
        let next = world.step(a).unwrap();
        loss1 += ndigo_core::world_model::frame_loss(&pred, &next);
        b = wm.encode_step(&b, &next, a).unwrap();
    }
    println!("  mean 1-step loss under random walk: {:.3}", loss1 / 400.0);
}
