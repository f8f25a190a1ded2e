use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use opdq::agent::{Agent, AgentConfig, CombineMode, CombinedAction, QNetwork, ReplayBuffer, Transition};
use opdq::env::{EnvConfig, GameAction, Pong};
use opdq::observe::{apply_mask, preprocess, Frame84, MaskId, ObsStack, FRAME_PIXELS};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_stack(rng: &mut ChaCha8Rng) -> ObsStack {
    let mut s = ObsStack::zeros();
    for _ in 0..4 {
        s.push(
            Frame84::from_pixels((0..FRAME_PIXELS).map(|_| rng.gen::<f32>()).collect()),
            MaskId::Identity,
        );
    }
    s
}

fn env(c: &mut Criterion) {
    c.bench_function("env_step", |b| {
        b.iter_batched(
            || Pong::reset(EnvConfig::default(), 7).unwrap().0,
            |mut pong| {
                for i in 0..64 {
                    if pong.step(GameAction::ALL[i % 3]).unwrap().done {
                        break;
                    }
                }
            },
            BatchSize::SmallInput,
        )
    });
    let (_, raw) = Pong::reset(EnvConfig::default(), 7).unwrap();
    c.bench_function("preprocess", |b| b.iter(|| preprocess(&raw)));
    let frame = preprocess(&raw);
    c.bench_function("apply_mask", |b| b.iter(|| apply_mask(&frame, MaskId::VLeft)));
}

fn network(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let net = QNetwork::dqn();
    let params = net.init::<f32>(0);
    let obs = random_stack(&mut rng);
    c.bench_function("q_forward", |b| b.iter(|| net.q_forward(&params, &obs).unwrap()));

    let config = AgentConfig::default();
    let mut buffer = ReplayBuffer::new(256);
    for i in 0..64 {
        buffer.store(&Transition {
            obs: random_stack(&mut rng),
            action: CombinedAction::from_flat(i % 9).unwrap(),
            reward: (i % 3) as i32 - 1,
            next_obs: random_stack(&mut rng),
            done: i % 17 == 0,
        });
    }
    let mut group = c.benchmark_group("learn");
    group.sample_size(10);
    for mode in [CombineMode::FlattenSum, CombineMode::IndependentBranch] {
        let mut agent = Agent::new(QNetwork::dqn(), config.clone(), mode, 1).unwrap();
        let batch = buffer.sample_batch(config.batch_size, &mut rng).unwrap();
        group.bench_function(format!("{mode:?}"), |b| b.iter(|| agent.learn_on(&batch).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, env, network);
criterion_main!(benches);
