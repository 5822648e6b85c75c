use super::oracle::OracleSuite;
use super::trajectory::{Origin, Trajectory, TrajectorySet};
use serde::{Deserialize, Serialize};

/// A step whose missing action could not be filled.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PendingGap {
    pub trajectory: String,
    pub step: usize,
    pub reason: String,
}

/// Asks the action completer for every step that has a successor but no
/// action. Filled steps are marked [`Origin::Auto`]; recorded actions are
/// never touched. Returns the gaps left open.
pub fn complete_actions(t: &mut Trajectory, ts: &TrajectorySet, suite: &OracleSuite) -> Vec<PendingGap> {
    let mut pending = Vec::new();
    let n = t.steps.len();
    for i in 0..n.saturating_sub(1) {
        if t.steps[i].action.is_some() {
            continue;
        }
        let before = ts.screen(&t.steps[i].screen).expect("registered screen");
        let after = ts.screen(&t.steps[i + 1].screen).expect("registered screen");
        let gap = |reason: String| PendingGap { trajectory: t.id.clone(), step: i, reason };
        match suite.complete_action(before, after) {
            Ok(Some(a)) => match a.coordinate() {
                Some(p) if !before.dims().contains(p) => {
                    pending.push(gap(format!("completer proposed {a}, outside {}", before.dims())));
                }
                _ => {
                    t.steps[i].action = Some(a);
                    t.steps[i].action_origin = Origin::Auto;
                }
            },
            Ok(None) => pending.push(gap("completer could not name the action".into())),
            Err(e) => pending.push(gap(e.to_string())),
        }
    }
    pending
}

/// [`complete_actions`] over a whole set.
pub fn complete_all(ts: &mut TrajectorySet, suite: &OracleSuite) -> Vec<PendingGap> {
    let mut trajectories = std::mem::take(&mut ts.trajectories);
    let pending = trajectories.iter_mut().flat_map(|t| complete_actions(t, ts, suite)).collect();
    ts.trajectories = trajectories;
    pending
}
