//! The shared per-turn reward.

use serde::{Deserialize, Serialize};

use crate::acts::{SystemAct, SystemActType};
use crate::simulator::UserTurnOutcome;
use crate::tracker::DialogueState;

pub const TASK_COMPLETION_REWARD: i32 = 100;
pub const SOCIAL_PENALTY: i32 = -5;
pub const TURN_PENALTY: i32 = -1;
pub const UNSIGNALLED_PROBLEM_PENALTY: i32 = -25;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub task_completion: i32,
    pub social_penalty: i32,
    pub turn_penalty: i32,
    pub unsignalled_problem_penalty: i32,
    pub total: i32,
}

impl RewardBreakdown {
    pub fn is_consistent(&self) -> bool {
        self.total
            == self.task_completion + self.social_penalty + self.turn_penalty + self.unsignalled_problem_penalty
    }
}

/// Reward for one system turn. `state` is the tracker state the system acted
/// on, `outcome` the user's reaction to `system_acts`.
pub fn turn_reward(outcome: &UserTurnOutcome, state: &DialogueState, system_acts: &[SystemAct]) -> RewardBreakdown {
    let task_completion = if outcome.task_completed_now {
        TASK_COMPLETION_REWARD
    } else {
        0
    };
    let social_penalty = SOCIAL_PENALTY * outcome.social_penalty_events as i32;
    let signalled = system_acts.iter().any(|a| a.kind == SystemActType::AutoNegative);
    let unsignalled_problem_penalty = if state.processing_problem && !signalled {
        UNSIGNALLED_PROBLEM_PENALTY
    } else {
        0
    };
    RewardBreakdown {
        task_completion,
        social_penalty,
        turn_penalty: TURN_PENALTY,
        unsignalled_problem_penalty,
        total: task_completion + social_penalty + TURN_PENALTY + unsignalled_problem_penalty,
    }
}
