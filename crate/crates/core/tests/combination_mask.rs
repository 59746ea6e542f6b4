use mdim_core::actions::{combination_mask, combine, ActionSet, AgentKind, Candidates, CombinationSelection, Scenario};
use mdim_core::acts::{Arg, Dimension, SystemAct, SystemActType};
use mdim_core::ontology::Ontology;

fn act(dimension: Dimension, kind: SystemActType) -> SystemAct {
    let args = match kind {
        SystemActType::Offer | SystemActType::Answer => vec![Arg::pair("name", "Rice Boat")],
        SystemActType::Request => vec![Arg::slot("food")],
        SystemActType::ImplConfirm | SystemActType::ExplConfirm => vec![Arg::pair("food", "indian")],
        _ => vec![],
    };
    SystemAct::new(dimension, kind, args).unwrap()
}

/// Candidate act types per dimension, derived from the scenario's action sets.
fn candidate_types(scenario: Scenario) -> [Vec<SystemActType>; 3] {
    use mdim_core::actions::{AbstractAction, FeedbackAction, SocialAction, TaskAction};
    let o = Ontology::restaurant();
    let mut task: Vec<SystemActType> = ActionSet::new(AgentKind::Task, scenario, &o)
        .actions
        .iter()
        .map(|a| match a {
            AbstractAction::Task(TaskAction::Offer) => SystemActType::Offer,
            AbstractAction::Task(TaskAction::Answer) => SystemActType::Answer,
            AbstractAction::Task(TaskAction::None) => SystemActType::None,
            AbstractAction::Task(_) => SystemActType::Request,
            other => panic!("foreign task action {other:?}"),
        })
        .collect();
    task.dedup();
    let feedback = ActionSet::new(AgentKind::AutoFeedback, scenario, &o)
        .actions
        .iter()
        .map(|a| match a {
            AbstractAction::Feedback(FeedbackAction::ImplConfirm) => SystemActType::ImplConfirm,
            AbstractAction::Feedback(FeedbackAction::ExplConfirm) => SystemActType::ExplConfirm,
            AbstractAction::Feedback(FeedbackAction::AutoNegative) => SystemActType::AutoNegative,
            AbstractAction::Feedback(FeedbackAction::None) => SystemActType::None,
            other => panic!("foreign feedback action {other:?}"),
        })
        .collect();
    let social = ActionSet::new(AgentKind::Som, scenario, &o)
        .actions
        .iter()
        .map(|a| match a {
            AbstractAction::Social(SocialAction::AcceptThanking) => SystemActType::AcceptThanking,
            AbstractAction::Social(SocialAction::ReturnGoodbye) => SystemActType::ReturnGoodbye,
            AbstractAction::Social(SocialAction::None) => SystemActType::None,
            other => panic!("foreign social action {other:?}"),
        })
        .collect();
    [task, feedback, social]
}

/// Legal selections written out from the combination rules: any single
/// non-none candidate, task+feedback for an implicit confirmation on an
/// offer or request, and the empty selection only when nothing is proposed.
fn oracle(t: SystemActType, f: SystemActType, s: SystemActType) -> Vec<Vec<Dimension>> {
    let mut out = Vec::new();
    if t != SystemActType::None {
        out.push(vec![Dimension::Task]);
    }
    if f != SystemActType::None {
        out.push(vec![Dimension::AutoFeedback]);
    }
    if s != SystemActType::None {
        out.push(vec![Dimension::Som]);
    }
    if f == SystemActType::ImplConfirm && matches!(t, SystemActType::Offer | SystemActType::Request) {
        out.push(vec![Dimension::Task, Dimension::AutoFeedback]);
    }
    if out.is_empty() {
        out.push(vec![]);
    }
    out
}

pub fn exhaustive_mask_in_both_scenarios() {
    let mut checked = 0;
    for scenario in [Scenario::Source, Scenario::Target] {
        let [tasks, feedbacks, socials] = candidate_types(scenario);
        for &t in &tasks {
            for &f in &feedbacks {
                for &s in &socials {
                    let c = Candidates {
                        task: act(Dimension::Task, t),
                        feedback: act(Dimension::AutoFeedback, f),
                        social: act(Dimension::Som, s),
                    };
                    let mut expected: Vec<CombinationSelection> =
                        oracle(t, f, s).iter().map(|d| CombinationSelection::of(d)).collect();
                    expected.sort();
                    let got = combination_mask(&c);
                    assert_eq!(got, expected, "{t:?}/{f:?}/{s:?}");
                    for sel in CombinationSelection::all() {
                        let res = combine(sel, &c);
                        if expected.contains(&sel) {
                            let acts = res.unwrap();
                            assert_eq!(acts.len(), sel.len().min(acts.len()));
                            assert!(acts.iter().all(|a| sel.contains(a.dimension)));
                            if acts.len() == 2 {
                                assert_eq!(acts[0].dimension, Dimension::AutoFeedback, "feedback is realised first");
                            }
                        } else {
                            assert!(res.is_err(), "{t:?}/{f:?}/{s:?} allowed {}", sel.label());
                        }
                    }
                    checked += 1;
                }
            }
        }
    }
    assert_eq!(checked, 2 * 4 * 4 * 3);
}

pub fn action_set_cardinalities() {
    let o = Ontology::restaurant();
    let len = |k, s| ActionSet::new(k, s, &o).len();
    assert_eq!(len(AgentKind::Task, Scenario::Source), 4);
    assert_eq!(len(AgentKind::Task, Scenario::Target), 6);
    assert_eq!(len(AgentKind::AutoFeedback, Scenario::Source), 4);
    assert_eq!(len(AgentKind::AutoFeedback, Scenario::Target), 4);
    assert_eq!(len(AgentKind::Som, Scenario::Source), 3);
    assert_eq!(len(AgentKind::Som, Scenario::Target), 3);
    assert_eq!(len(AgentKind::OneDim, Scenario::Source), 9);
    assert_eq!(len(AgentKind::OneDim, Scenario::Target), 13);
    assert_eq!(len(AgentKind::Evaluation, Scenario::Source), 8);
    assert_eq!(len(AgentKind::Evaluation, Scenario::Target), 8);
}

/// Runs every check in this file; used by the acceptance runner.
#[allow(dead_code)]
pub fn suite() {
    exhaustive_mask_in_both_scenarios();
    action_set_cardinalities();
}

#[cfg(test)]
mod tests {
    #[test]
    fn exhaustive_mask_in_both_scenarios() {
        super::exhaustive_mask_in_both_scenarios()
    }

    #[test]
    fn action_set_cardinalities() {
        super::action_set_cardinalities()
    }
}
