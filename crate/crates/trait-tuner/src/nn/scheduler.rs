//! Learning-rate schedules over a fixed step horizon.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleKind {
    Constant,
    LinearWarmupDecay,
    CosineWarmup,
}

/// Learning rate for 0-based `step` out of `total_steps`. Warmup ramps
/// linearly from 0 over `floor(warmup_fraction * total_steps)` steps; decay
/// then runs to 0 at `total_steps` (so the last executed step sits one
/// step's granularity above 0).
pub fn lr_at(
    kind: ScheduleKind,
    base_lr: f64,
    warmup_fraction: f64,
    step: usize,
    total_steps: usize,
) -> f64 {
    debug_assert!(step < total_steps.max(1));
    if let ScheduleKind::Constant = kind {
        return base_lr;
    }
    let total = total_steps.max(1);
    let warmup = ((warmup_fraction * total as f64).floor() as usize).min(total - 1);
    if step < warmup {
        return base_lr * step as f64 / warmup as f64;
    }
    let progress = (step - warmup) as f64 / (total - warmup) as f64;
    match kind {
        ScheduleKind::Constant => unreachable!(),
        ScheduleKind::LinearWarmupDecay => base_lr * (1.0 - progress),
        ScheduleKind::CosineWarmup => {
            base_lr * 0.5 * (1.0 + (std::f64::consts::PI * progress).cos())
        }
    }
}
