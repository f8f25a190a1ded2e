use std::collections::VecDeque;

use rand::Rng;

use super::action::CombinedAction;
use crate::error::{Error, Result};
use crate::observe::{Frame84, MaskId, ObsStack, FRAME_PIXELS, STACK_DEPTH};

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub obs: ObsStack,
    pub action: CombinedAction,
    pub reward: i32,
    pub next_obs: ObsStack,
    pub done: bool,
}

/// Lossless sparse encoding of a frame; rendered frames are mostly background.
#[derive(Debug, Clone)]
struct SparseFrame {
    index: Vec<u16>,
    value: Vec<f32>,
}

impl SparseFrame {
    fn encode(frame: &Frame84) -> Self {
        let mut index = Vec::new();
        let mut value = Vec::new();
        for (i, &v) in frame.pixels().iter().enumerate() {
            if v != 0.0 {
                index.push(i as u16);
                value.push(v);
            }
        }
        Self { index, value }
    }

    fn scatter(&self, out: &mut [f32]) {
        out.fill(0.0);
        for (&i, &v) in self.index.iter().zip(&self.value) {
            out[i as usize] = v;
        }
    }

    fn decode(&self) -> Frame84 {
        let mut f = Frame84::zeros();
        self.scatter(f.pixels_mut());
        f
    }
}

/// `next_obs` shares the last three frames of `obs`, so only the newest
/// next frame is stored.
#[derive(Debug, Clone)]
struct Stored {
    frames: [SparseFrame; STACK_DEPTH + 1],
    masks: [MaskId; STACK_DEPTH + 1],
    action: CombinedAction,
    reward: i32,
    done: bool,
}

/// A sampled minibatch laid out for the network.
#[derive(Debug, Clone)]
pub struct Batch {
    /// `[N, 4, 84, 84]` channel-major stacks.
    pub obs: Vec<f32>,
    pub next_obs: Vec<f32>,
    pub actions: Vec<CombinedAction>,
    pub rewards: Vec<f32>,
    pub dones: Vec<bool>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

/// Bounded FIFO of transitions with uniform sampling with replacement.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    storage: VecDeque<Stored>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            capacity,
            storage: VecDeque::with_capacity(capacity.min(1 << 16)),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.storage.len()
    }

    pub fn is_empty(&self) -> bool {
        self.storage.is_empty()
    }

    /// Panics if `t.next_obs` is not `t.obs` advanced by one frame.
    pub fn store(&mut self, t: &Transition) {
        debug_assert_eq!(
            &t.next_obs.frames()[..STACK_DEPTH - 1],
            &t.obs.frames()[1..],
            "next_obs must extend obs by one frame"
        );
        let frames = std::array::from_fn(|i| {
            if i < STACK_DEPTH {
                SparseFrame::encode(&t.obs.frames()[i])
            } else {
                SparseFrame::encode(t.next_obs.newest())
            }
        });
        let masks = std::array::from_fn(|i| {
            if i < STACK_DEPTH {
                t.obs.provenance()[i]
            } else {
                t.next_obs.provenance()[STACK_DEPTH - 1]
            }
        });
        if self.storage.len() == self.capacity {
            self.storage.pop_front();
        }
        self.storage.push_back(Stored {
            frames,
            masks,
            action: t.action,
            reward: t.reward,
            done: t.done,
        });
    }

    fn indices<R: Rng>(&self, batch_size: usize, rng: &mut R) -> Result<Vec<usize>> {
        if batch_size == 0 || self.storage.len() < batch_size {
            return Err(Error::Usage(format!(
                "cannot sample {batch_size} transitions from a buffer of {}",
                self.storage.len()
            )));
        }
        Ok((0..batch_size)
            .map(|_| rng.gen_range(0..self.storage.len()))
            .collect())
    }

    pub fn get(&self, index: usize) -> Option<Transition> {
        self.storage.get(index).map(decode)
    }

    pub fn sample<R: Rng>(&self, batch_size: usize, rng: &mut R) -> Result<Vec<Transition>> {
        Ok(self
            .indices(batch_size, rng)?
            .into_iter()
            .map(|i| decode(&self.storage[i]))
            .collect())
    }

    /// Same draws as [`ReplayBuffer::sample`], written straight into network input layout.
    pub fn sample_batch<R: Rng>(&self, batch_size: usize, rng: &mut R) -> Result<Batch> {
        let idx = self.indices(batch_size, rng)?;
        let block = STACK_DEPTH * FRAME_PIXELS;
        let mut obs = vec![0.0; batch_size * block];
        let mut next_obs = vec![0.0; batch_size * block];
        let mut batch = Batch {
            obs: Vec::new(),
            next_obs: Vec::new(),
            actions: Vec::with_capacity(batch_size),
            rewards: Vec::with_capacity(batch_size),
            dones: Vec::with_capacity(batch_size),
        };
        for (b, &i) in idx.iter().enumerate() {
            let s = &self.storage[i];
            let o = &mut obs[b * block..(b + 1) * block];
            for (k, chunk) in o.chunks_exact_mut(FRAME_PIXELS).enumerate() {
                s.frames[k].scatter(chunk);
            }
            let n = &mut next_obs[b * block..(b + 1) * block];
            for (k, chunk) in n.chunks_exact_mut(FRAME_PIXELS).enumerate() {
                s.frames[k + 1].scatter(chunk);
            }
            batch.actions.push(s.action);
            batch.rewards.push(s.reward as f32);
            batch.dones.push(s.done);
        }
        batch.obs = obs;
        batch.next_obs = next_obs;
        Ok(batch)
    }
}

fn decode(s: &Stored) -> Transition {
    let obs = ObsStack::from_parts(
        std::array::from_fn(|i| s.frames[i].decode()),
        std::array::from_fn(|i| s.masks[i]),
    );
    let next_obs = ObsStack::from_parts(
        std::array::from_fn(|i| s.frames[i + 1].decode()),
        std::array::from_fn(|i| s.masks[i + 1]),
    );
    Transition {
        obs,
        action: s.action,
        reward: s.reward,
        next_obs,
        done: s.done,
    }
}
