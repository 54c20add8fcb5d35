// does b_t carry the fixed object's position after a sighting?
// roll "find then park" episodes with a trained model, then train a fresh
// probe to convergence on (b_t, label) pairs, splitting pre/post sighting.
use ndigo_core::checkpoint;
use ndigo_core::config::preset_env;
use ndigo_core::env::{Action, GridWorld};
use ndigo_core::eval::Probe;
use ndigo_core::harness::{run_actor, ActorPolicy, PredictorModel};
use ndigo_core::nn::Adam;
use ndigo_core::rewards::{RewardKind, RewardSpec};
use ndigo_core::rng::stream;
use ndigo_core::world_model::WorldModel;
use rand::Rng;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let base = std::path::PathBuf::from(&args[1]);
    let manifest = checkpoint::read_manifest(&base).unwrap();
    let mut wm = WorldModel::<f64>::new(manifest.seed, manifest.dims.clone());
    checkpoint::load(&base, &mut wm).unwrap();
    let env_cfg = preset_env("exp1").unwrap();
    let reward = RewardSpec::simple(RewardKind::Pe);

    // sweep the upper room rows until the object is in view, then hold
    let mut pairs: Vec<(Vec<f64>, usize, bool)> = Vec::new(); // (belief, cell, seen_yet)
    let mut first_sights = Vec::new();
    for ep in 0..120u64 {
        // the sweep: up 5, then serpentine across the room
        let (world0, _) = GridWorld::reset(&env_cfg, 40_000 + ep).unwrap();
        let obj = world0.objects[0].pos;
        let model = PredictorModel::Frames(wm.clone());
        let script = move |t: usize| -> Action {
            if t < 5 { return Action::Up; }
            let t = t - 5;
            // serpentine: rows 4,3,2,1 sweeping cols
            let phase = t % 60;
            if phase < 11 { Action::Left }
            else if phase == 11 { Action::Up }
            else if phase < 23 { Action::Right }
            else if phase == 23 { Action::Up }
            else if phase < 35 { Action::Left }
            else if phase == 35 { Action::Up }
            else if phase < 47 { Action::Right }
            else { Action::Stay }
        };
        let policy = ActorPolicy::Scripted(&script);
        let mut arng = stream(ep, "a");
        let out = run_actor(&env_cfg, 40_000 + ep, &model, None, &reward, &policy, None, 0, &mut arng).unwrap();
        let mut seen = false;
        let mut first = None;
        for (t, (b, l)) in out.beliefs.iter().zip(&out.labels).enumerate() {
            if t > 0 && out.obs[t].object_local_cell(0).is_some() && !seen {
                seen = true;
                first = Some(t);
            }
            pairs.push((b.clone(), l.objects[0], seen));
        }
        first_sights.push(first.unwrap_or(9999));
        let _ = obj;
    }
    let found: Vec<&usize> = first_sights.iter().filter(|t| **t < 9000).collect();
    println!("episodes: 120, found object in {} episodes, median first sight {:?}",
             found.len(), found.get(found.len()/2));
    let post: usize = pairs.iter().filter(|(_, _, s)| *s).count();
    println!("pairs: {} total, {} post-sighting", pairs.len(), post);

    // fresh probe trained to convergence
    let mut probe = Probe::<f64>::new(99, 32, 32, 361, 2); // aspect 0 = object, aspect 1 = agent (ignored)
    let mut opt = Adam::new(2e-3);
    let mut rng = stream(5, "probe");
    use ndigo_core::env::StateLabel;
    let labels: Vec<StateLabel> = pairs.iter().map(|(_, c, _)| StateLabel { agent: 0, objects: vec![*c] }).collect();
    for step in 0..12_000 {
        let batch: Vec<(&[f64], &StateLabel)> = (0..64).map(|_| {
            let i = rng.gen_range(0..pairs.len());
            (pairs[i].0.as_slice(), &labels[i])
        }).collect();
        probe.train_step(&batch, &mut opt);
        if step == 8000 { opt.lr = 5e-4; }
    }
    let mut pre_loss = 0.0; let mut pre_n = 0.0;
    let mut post_loss = 0.0; let mut post_n = 0.0;
    for (i, (b, _, seen)) in pairs.iter().enumerate() {
        let l = probe.discovery_loss(b, &labels[i])[0];
        if *seen { post_loss += l; post_n += 1.0; } else { pre_loss += l; pre_n += 1.0; }
    }
    println!("converged probe: pre-sighting {:.3} ({} pairs), post-sighting {:.3} ({} pairs)",
             pre_loss / pre_n, pre_n, post_loss / post_n, post_n);
}
