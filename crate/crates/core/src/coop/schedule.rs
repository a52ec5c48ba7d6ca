//! Alternating restorer/measurer step schedule. Only the trace is produced;
//! no gradients are computed.

use serde::{Deserialize, Serialize};

use super::estimate::InputMode;
use super::mixing::{data_mixing, ModeAssignment};
use crate::error::Result;
use crate::rng::sub_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Role {
    #[serde(rename = "R")]
    Restorer,
    #[serde(rename = "M")]
    Measurer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub step: usize,
    pub role: Role,
    /// Mode the measurer ran in to produce the restorer's prior (R steps).
    pub prior_mode: Option<InputMode>,
    /// The mixed batch handed to the measurer (M steps).
    pub batch: Vec<ModeAssignment>,
}

/// Callbacks for the two roles.
pub trait ScheduleHooks {
    /// One restorer step; the prior comes from a measurement in `prior_mode`.
    fn restorer_step(&mut self, step: usize, prior_mode: InputMode) -> Result<()>;
    /// One measurer step over a mode-mixed batch.
    fn measurer_step(&mut self, step: usize, batch: &[ModeAssignment]) -> Result<()>;
}

/// Run `steps` alternating steps starting with the restorer. Even steps are
/// restorer steps fed single-mode priors; odd steps are measurer steps over
/// `batch_ids` mixed with a per-step seed.
pub fn alternating_schedule(
    steps: usize,
    batch_ids: &[u64],
    seed: u64,
    hooks: &mut dyn ScheduleHooks,
) -> Result<Vec<TraceEntry>> {
    let mut trace = Vec::with_capacity(steps);
    for step in 0..steps {
        let entry = if step % 2 == 0 {
            hooks
                .restorer_step(step, InputMode::Single)
                .map_err(|e| e.in_stage(format!("restorer step {step}")))?;
            TraceEntry {
                step,
                role: Role::Restorer,
                prior_mode: Some(InputMode::Single),
                batch: Vec::new(),
            }
        } else {
            let batch = data_mixing(batch_ids, sub_seed(seed, &[step as u64]));
            hooks
                .measurer_step(step, &batch)
                .map_err(|e| e.in_stage(format!("measurer step {step}")))?;
            TraceEntry {
                step,
                role: Role::Measurer,
                prior_mode: None,
                batch,
            }
        };
        trace.push(entry);
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    #[derive(Default)]
    struct Recorder {
        calls: Vec<Role>,
        fail_at: Option<usize>,
    }

    impl ScheduleHooks for Recorder {
        fn restorer_step(&mut self, step: usize, _m: InputMode) -> Result<()> {
            self.calls.push(Role::Restorer);
            match self.fail_at {
                Some(s) if s == step => Err(Error::Domain("boom".into())),
                _ => Ok(()),
            }
        }
        fn measurer_step(&mut self, step: usize, _b: &[ModeAssignment]) -> Result<()> {
            self.calls.push(Role::Measurer);
            match self.fail_at {
                Some(s) if s == step => Err(Error::Domain("boom".into())),
                _ => Ok(()),
            }
        }
    }

    #[test]
    fn four_steps_alternate() {
        let mut hooks = Recorder::default();
        let ids: Vec<u64> = (0..8).collect();
        let trace = alternating_schedule(4, &ids, 1, &mut hooks).unwrap();
        let roles: Vec<Role> = trace.iter().map(|e| e.role).collect();
        assert_eq!(roles, [Role::Restorer, Role::Measurer, Role::Restorer, Role::Measurer]);
        assert_eq!(hooks.calls, roles);
        for e in &trace {
            match e.role {
                Role::Restorer => assert_eq!(e.prior_mode, Some(InputMode::Single)),
                Role::Measurer => {
                    let s = e.batch.iter().filter(|a| a.mode == InputMode::Single).count();
                    assert_eq!((s, e.batch.len() - s), (4, 4));
                }
            }
        }
    }

    #[test]
    fn failure_names_step() {
        let mut hooks = Recorder {
            fail_at: Some(1),
            ..Default::default()
        };
        let err = alternating_schedule(4, &[1, 2], 1, &mut hooks).unwrap_err();
        assert!(err.to_string().contains("measurer step 1"), "{err}");
        assert_eq!(hooks.calls.len(), 2);
    }
}
