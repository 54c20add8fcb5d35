// capacity probe: how low does the tiny model's loss go on exp1 data?
use ndigo_core::config::preset_env;
use ndigo_core::env::{Action, GridWorld, NUM_ACTIONS};
use ndigo_core::harness::{chunk_segments, run_actor, ActorPolicy, PredictorModel};
use ndigo_core::nn::Adam;
use ndigo_core::rewards::{RewardKind, RewardSpec};
use ndigo_core::rng::stream;
use ndigo_core::world_model::{ModelDims, Segment, WorldModel};
use rand::Rng;
use std::collections::VecDeque;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let updates: usize = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(4000);
    let lr: f64 = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(2e-3);
    let seg_len: usize = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(100);
    let env_cfg = preset_env("exp1").unwrap();
    let mut wm = WorldModel::<f64>::new(1, ModelDims::tiny(3, 10));
    let mut opt = Adam::new(lr);
    let mut pool: VecDeque<Segment<f64>> = VecDeque::new();
    let mut rng = stream(7, "cap");
    let reward = RewardSpec::simple(RewardKind::Pe);
    let mut ep = 0u64;
    let mut refresh = |pool: &mut VecDeque<Segment<f64>>, wm: &WorldModel<f64>, ep: &mut u64, n: usize| {
        for _ in 0..n {
            let model = PredictorModel::Frames(wm.clone());
            let mut arng = stream(*ep, "a");
            let script = |_t: usize| Action::Stay; // placeholder
            let _ = script;
            // random walk policy via scripted closure with its own rng is awkward;
            // use epsilon-greedy with a zeroed q-net? simplest: scripted random from pre-drawn seq
            let mut wrng = stream(1000 + *ep, "walk");
            let seq: Vec<Action> = (0..env_cfg.episode_len).map(|_| Action::from_index(wrng.gen_range(0..NUM_ACTIONS))).collect();
            let script = move |t: usize| seq[t];
            let policy = ActorPolicy::Scripted(&script);
            let out = run_actor(&env_cfg, *ep, &model, None, &reward, &policy, None, 0, &mut arng).unwrap();
            for seg in chunk_segments(&out, 100) {
                if pool.len() == 200 { pool.pop_front(); }
                pool.push_back(seg);
            }
            *ep += 1;
        }
    };
    refresh(&mut pool, &wm, &mut ep, 10);
    for u in 0..updates {
        // resample fresh episodes periodically so beliefs stay on-model
        if (u + 1) % 50 == 0 { refresh(&mut pool, &wm, &mut ep, 2); }
        let batch: Vec<Segment<f64>> = (0..4).map(|_| {
            let mut s = pool[rng.gen_range(0..pool.len())].clone();
            if seg_len < 100 {
                // re-chunk to the requested BPTT length
                let start = rng.gen_range(0..(s.obs.len() - seg_len));
                let sub = Segment {
                    obs: s.obs[start..=start + seg_len].to_vec(),
                    actions: s.actions[start..start + seg_len].to_vec(),
                    prev_action: if start == 0 { s.prev_action } else { s.actions[start - 1] },
                    b_prev: vec![0.0; 32], // zero seed: crude but consistent
                    start_t: s.start_t + start,
                };
                s = sub;
            }
            s
        }).collect();
        let stats = wm.train_step(&batch, &mut opt).unwrap();
        if (u + 1) % 500 == 0 {
            println!("update {:>5} mean loss {:.3}", u + 1, stats.mean);
        }
    }
    // final: loss breakdown on fresh episodes
    let model = PredictorModel::Frames(wm.clone());
    let mut wall = 0.0; let mut objs = 0.0; let mut steps = 0.0;
    for e in 0..5 {
        let mut wrng = stream(5000 + e, "walk");
        let seq: Vec<Action> = (0..env_cfg.episode_len).map(|_| Action::from_index(wrng.gen_range(0..NUM_ACTIONS))).collect();
        let script = move |t: usize| seq[t];
        let policy = ActorPolicy::Scripted(&script);
        let mut arng = stream(99, "a");
        let out = run_actor(&env_cfg, 7777 + e, &model, None, &reward, &policy, None, 0, &mut arng).unwrap();
        // per-step 1-step losses split into wall and object parts
        for t in 0..out.actions.len() {
            let b = ndigo_core::world_model::BeliefState { b: out.beliefs[t].clone(), t };
            let pred = wm.predict(&b, &out.actions[t..], 1).unwrap();
            let target = &out.obs[t + 1];
            let full = ndigo_core::world_model::frame_loss(&pred, target);
            // wall-only loss: replace object cats with exact
            let mut pw = pred.clone();
            for (j, cat) in pw.object_p.iter_mut().enumerate() {
                let class = target.object_local_cell(j).unwrap_or(ndigo_core::world_model::ABSENT);
                cat.iter_mut().for_each(|p| *p = 1e-12);
                cat[class] = 1.0;
            }
            let wall_l = ndigo_core::world_model::frame_loss(&pw, target);
            wall += wall_l; objs += full - wall_l; steps += 1.0;
        }
    }
    println!("final: wall {:.3} objects {:.3} per step", wall / steps, objs / steps);
}
