use opdq::agent::AgentConfig;
use opdq::env::EnvConfig;
use opdq::observe::{MaskFamily, MaskId, FRAME_SIZE};
use opdq::toolkit::{decode, encode};
use opdq::agent::QNetwork;
use opdq::trainer::{run_training, CurriculumConfig, CurriculumTrigger, Phase, TrainConfig, Trainer};

fn configs(total: u64, trigger: CurriculumTrigger) -> (EnvConfig, AgentConfig, CurriculumConfig, TrainConfig) {
    let env = EnvConfig {
        points_to_win: 1,
        ..EnvConfig::default()
    };
    let agent = AgentConfig {
        batch_size: 4,
        learn_start: 16,
        learn_every: 4,
        target_sync: 32,
        epsilon_decay_steps: 200,
        replay_capacity: 5_000,
        ..AgentConfig::default()
    };
    let train = TrainConfig {
        total_episodes: total,
        eval_every: 1_000,
        mask_family: MaskFamily::Vertical,
        ..TrainConfig::default()
    };
    let curriculum = CurriculumConfig {
        enabled: true,
        trigger,
    };
    (env, agent, curriculum, train)
}

#[test]
fn phase_switches_after_episode_count_and_masks_follow() {
    let (env, agent, curriculum, train) = configs(5, CurriculumTrigger::EpisodeCount(2));
    let mut t = Trainer::new(env, agent, curriculum, train).unwrap();
    let log = run_training(&mut t, |_| Ok(())).unwrap();
    let phases: Vec<Phase> = log.metrics.iter().map(|r| r.phase).collect();
    use Phase::*;
    assert_eq!(phases, [FullyObservable, FullyObservable, Occluded, Occluded, Occluded]);

    let masks = MaskFamily::Vertical.masks();
    let mut index = 0;
    let mut occluded_masks = [0usize; 3];
    for row in &log.metrics {
        for _ in 0..row.steps {
            let tr = t.buffer().get(index).unwrap();
            index += 1;
            let newest = tr.next_obs.provenance()[3];
            match row.phase {
                FullyObservable => {
                    assert!(tr.next_obs.provenance().iter().all(|&m| m == MaskId::Identity));
                }
                Occluded => {
                    assert_eq!(newest, masks[tr.action.mask_index]);
                    occluded_masks[tr.action.mask_index] += 1;
                    if newest == MaskId::VRight {
                        let f = tr.next_obs.newest();
                        assert!((0..FRAME_SIZE).all(|r| (0..56).all(|c| f.get(r, c) == 0.0)));
                    }
                }
            }
        }
    }
    assert_eq!(index, t.buffer().len());
    assert!(occluded_masks.iter().all(|&n| n > 0));
}

#[test]
fn disabled_curriculum_is_occluded_throughout() {
    let (env, agent, mut curriculum, train) = configs(2, CurriculumTrigger::EpisodeCount(0));
    curriculum.enabled = false;
    let mut t = Trainer::new(env, agent, curriculum, train).unwrap();
    let log = run_training(&mut t, |_| Ok(())).unwrap();
    assert!(log.metrics.iter().all(|r| r.phase == Phase::Occluded));
}

#[test]
fn unreachable_threshold_keeps_full_observability() {
    let trigger = CurriculumTrigger::ScoreThreshold {
        threshold: 21.0,
        window: 1,
    };
    let (env, agent, curriculum, mut train) = configs(3, trigger);
    train.eval_every = 1;
    train.eval_episodes = 1;
    let mut t = Trainer::new(env, agent, curriculum, train).unwrap();
    let log = run_training(&mut t, |_| Ok(())).unwrap();
    assert_eq!(log.evals.len(), 3);
    assert!(log.metrics.iter().all(|r| r.phase == Phase::FullyObservable));
}

#[test]
fn resume_from_decoded_checkpoint_matches_in_memory() {
    let (env, agent, curriculum, train) = configs(3, CurriculumTrigger::EpisodeCount(1));
    let mut first = Trainer::new(env.clone(), agent.clone(), curriculum, train.clone()).unwrap();
    first.run_episode().unwrap();
    first.run_episode().unwrap();
    let blob = first.checkpoint();
    let decoded = decode(&encode(&blob), &QNetwork::dqn()).unwrap();

    let mut a = Trainer::resume(env.clone(), agent.clone(), curriculum, train.clone(), blob).unwrap();
    let mut b = Trainer::resume(env, agent, curriculum, train, decoded).unwrap();
    let ra = a.run_episode().unwrap();
    let rb = b.run_episode().unwrap();
    assert_eq!(ra.row.episode, 3);
    assert_eq!(ra.row.phase, Phase::Occluded);
    assert_eq!(format!("{:?}", ra.row), format!("{:?}", rb.row));
    assert_eq!(a.checkpoint(), b.checkpoint());
    assert_eq!(encode(&a.checkpoint()), encode(&b.checkpoint()));
}
