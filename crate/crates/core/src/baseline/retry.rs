use std::fmt;

use serde::{Deserialize, Serialize};

/// When retry seeds are spent.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RetryPolicy {
    /// One retry seed per failed attempt, in order.
    #[default]
    OnFailure,
    /// Every seed and every retry seed is run regardless of outcome.
    FullSchedule,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedSchedule {
    pub seeds: Vec<u64>,
    pub retry_seeds: Vec<u64>,
    pub failure_threshold: f64,
    pub policy: RetryPolicy,
}

/// One training attempt.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedRun<O> {
    pub seed: u64,
    pub output: O,
    pub best_f1: f64,
    pub failed: bool,
    /// True for attempts drawn from the retry list.
    pub is_retry: bool,
}

/// Trains one model for a seed and reports its best validation F1.
pub trait SeedTrainer {
    type Output;
    type Error;

    fn train_seed(&mut self, seed: u64) -> Result<(Self::Output, f64), Self::Error>;
}

impl<F, O, E> SeedTrainer for F
where
    F: FnMut(u64) -> Result<(O, f64), E>,
{
    type Output = O;
    type Error = E;

    fn train_seed(&mut self, seed: u64) -> Result<(O, f64), E> {
        self(seed)
    }
}

#[derive(Debug)]
pub enum RetryError<O, E> {
    /// A failure needed a retry seed but none was left. Carries every attempt made.
    RetrySeedsExhausted { attempts: Vec<SeedRun<O>> },
    Trainer { seed: u64, source: E },
}

impl<O, E: fmt::Display> fmt::Display for RetryError<O, E> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RetryError::RetrySeedsExhausted { attempts } => {
                let failed = attempts.iter().filter(|a| a.failed).count();
                write!(f, "retry seeds exhausted after {} attempts ({failed} failed)", attempts.len())
            }
            RetryError::Trainer { seed, source } => write!(f, "training with seed {seed} failed: {source}"),
        }
    }
}

impl<O: fmt::Debug, E: std::error::Error + 'static> std::error::Error for RetryError<O, E> {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            RetryError::Trainer { source, .. } => Some(source),
            RetryError::RetrySeedsExhausted { .. } => None,
        }
    }
}

/// Runs every primary seed, then retry seeds according to the policy.
/// An attempt fails when its best F1 is below the threshold.
pub fn train_with_retry<T: SeedTrainer>(
    schedule: &SeedSchedule,
    trainer: &mut T,
) -> Result<Vec<SeedRun<T::Output>>, RetryError<T::Output, T::Error>> {
    let mut attempts = Vec::new();
    let mut run = |seed: u64, is_retry: bool, attempts: &mut Vec<SeedRun<T::Output>>| {
        let (output, best_f1) = trainer
            .train_seed(seed)
            .map_err(|source| RetryError::Trainer { seed, source })?;
        let failed = !(best_f1 >= schedule.failure_threshold);
        attempts.push(SeedRun {
            seed,
            output,
            best_f1,
            failed,
            is_retry,
        });
        Ok(failed)
    };

    match schedule.policy {
        RetryPolicy::FullSchedule => {
            for &seed in &schedule.seeds {
                run(seed, false, &mut attempts)?;
            }
            for &seed in &schedule.retry_seeds {
                run(seed, true, &mut attempts)?;
            }
        }
        RetryPolicy::OnFailure => {
            let mut pending = 0usize;
            for &seed in &schedule.seeds {
                pending += usize::from(run(seed, false, &mut attempts)?);
            }
            let mut retries = schedule.retry_seeds.iter();
            while pending > 0 {
                let Some(&seed) = retries.next() else {
                    return Err(RetryError::RetrySeedsExhausted { attempts });
                };
                pending -= 1;
                pending += usize::from(run(seed, true, &mut attempts)?);
            }
        }
    }
    Ok(attempts)
}
