use crate::agent::two_head_grad_check;
use crate::error::Result;
use crate::nn::gradcheck::{grad_check, reference_chains};

/// Worst relative error accepted by [`gradcheck_suite`].
pub const GRADCHECK_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckEntry {
    pub name: String,
    pub seed: u64,
    pub max_rel_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckReport {
    pub entries: Vec<GradcheckEntry>,
}

impl GradcheckReport {
    pub fn worst(&self) -> f64 {
        self.entries.iter().map(|e| e.max_rel_error).fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.worst() <= GRADCHECK_TOLERANCE
    }
}

/// Finite-difference checks of every reference chain and the two-head
/// network, once per seed.
pub fn gradcheck_suite(seeds: impl IntoIterator<Item = u64>) -> Result<GradcheckReport> {
    let chains = reference_chains();
    let mut entries = Vec::new();
    for seed in seeds {
        for (name, chain) in &chains {
            entries.push(GradcheckEntry {
                name: name.to_string(),
                seed,
                max_rel_error: grad_check(chain, seed)?,
            });
        }
        entries.push(GradcheckEntry {
            name: "two-head".into(),
            seed,
            max_rel_error: two_head_grad_check(seed)?,
        });
    }
    Ok(GradcheckReport { entries })
}
