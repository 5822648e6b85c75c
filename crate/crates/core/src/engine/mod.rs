//! The deterministic environment: sessions over a benchmark graph.

mod log;
mod replay;
mod resolve;
mod session;

pub use log::{EpisodeLog, LogError, LogFooter, LogHeader, LogWriter, StepRecord, LOG_FORMAT};
pub use replay::{replay, ReplayError, ReplayVerdict};
pub use resolve::resolve_transition;
pub use session::{EngineError, GlobalAction, Observation, Session, SessionStatus, StepOutcome, Transition};

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::action::ActionSpec;
    use crate::graph::{AssetCheck, GraphBenchmark, NodeId};

    fn screens(tag: u32, n: u32) -> String {
        (0..n)
            .map(|i| format!(r#"{{"image":"s{tag}_{i}.png","sha256":"{:064x}","width":100,"height":200}}"#, tag * 16 + i))
            .collect::<Vec<_>>()
            .join(",")
    }

    /// Small graph with nested and tied boxes, a swipe, a regex type edge and
    /// an annotation-only back edge.
    pub(crate) fn toy() -> GraphBenchmark {
        let src = format!(
            r#"{{"version":1,"home":"home","apps":{{"A":"a0"}},
            "nodes":[
              {{"id":"home","app":"system","screens":[{}]}},
              {{"id":"a0","app":"A","screens":[{}]}},
              {{"id":"a1","app":"A","screens":[{}]}},
              {{"id":"a2","app":"A","screens":[{}]}},
              {{"id":"a3","app":"A","screens":[{}]}}],
            "edges":[
              {{"src":"home","dst":"a0","action":"click","bbox":[0,0,50,50]}},
              {{"src":"a0","dst":"a1","action":"click","bbox":[0,0,99,199]}},
              {{"src":"a0","dst":"a2","action":"click","bbox":[10,10,30,30]}},
              {{"src":"a0","dst":"a3","action":"click","bbox":[40,40,60,60]}},
              {{"src":"a0","dst":"a1","action":"click","bbox":[50,50,70,70]}},
              {{"src":"a1","dst":"a2","action":"swipe","direction":"up"}},
              {{"src":"a2","dst":"a3","action":"type","match":"regex","text":"(?i)hello"}},
              {{"src":"a3","dst":"a2","action":"navigate_back"}}],
            "tasks":[
              {{"id":"t","instruction":"reach a1 then a3","kind":"single_app","max_steps":10,
                "milestones":[{{"id":"m1","accept":["a1"],"capability":"search"}},
                              {{"id":"m2","accept":["a3"],"capability":"send"}}]}},
              {{"id":"ans","instruction":"open A and answer","kind":"single_app","max_steps":4,
                "milestones":[{{"id":"m","accept":["a0"],"capability":"find"}}],
                "answer_rule":{{"match":"exact","text":"yes"}}}}]}}"#,
            screens(0, 2),
            screens(1, 3),
            screens(2, 1),
            screens(3, 1),
            screens(4, 1)
        );
        GraphBenchmark::from_manifest_str(&src, AssetCheck::Skip).unwrap()
    }

    fn n(s: &str) -> NodeId {
        NodeId::from(s)
    }

    #[test]
    fn smallest_box_wins_and_ties_go_to_manifest_order() {
        let g = toy();
        assert_eq!(resolve_transition(&g, &n("a0"), &ActionSpec::click(20, 20)), Some(2));
        assert_eq!(resolve_transition(&g, &n("a0"), &ActionSpec::click(55, 55)), Some(3));
        assert_eq!(resolve_transition(&g, &n("a0"), &ActionSpec::click(65, 65)), Some(4));
        assert_eq!(resolve_transition(&g, &n("a0"), &ActionSpec::click(90, 150)), Some(1));
        // Box edges are inclusive.
        assert_eq!(resolve_transition(&g, &n("home"), &ActionSpec::click(50, 50)), Some(0));
        assert_eq!(resolve_transition(&g, &n("home"), &ActionSpec::click(51, 50)), None);
        assert_eq!(resolve_transition(&g, &n("a0"), &ActionSpec::long_press(20, 20)), None);
        assert_eq!(resolve_transition(&g, &n("a2"), &ActionSpec::type_text("well HELLO")), Some(6));
        assert_eq!(resolve_transition(&g, &n("a2"), &ActionSpec::type_text("bye")), None);
        assert_eq!(resolve_transition(&g, &n("a3"), &ActionSpec::NavigateBack), None);
    }

    #[test]
    fn milestones_respect_requires_and_stick() {
        let g = toy();
        let mut s = Session::start(&g, "t", 7).unwrap();
        s.step(&ActionSpec::click(5, 5)).unwrap();
        s.step(&ActionSpec::click(20, 20)).unwrap();
        let o = s.step(&ActionSpec::type_text("hello")).unwrap();
        assert_eq!(o.new_node, n("a3"));
        assert!(o.milestones_newly_reached.is_empty(), "m2 needs m1 first");
        s.step(&ActionSpec::NavigateBack).unwrap();
        assert_eq!(s.current(), &n("a2"));
        s.step(&ActionSpec::NavigateBack).unwrap();
        let o = s.step(&ActionSpec::click(90, 150)).unwrap();
        assert_eq!(o.milestones_newly_reached, vec!["m1".to_string()]);
        assert_eq!(s.status(), SessionStatus::Running);
        s.step(&ActionSpec::swipe(crate::Direction::Up)).unwrap();
        let o = s.step(&ActionSpec::type_text("HeLLo there")).unwrap();
        assert_eq!(o.milestones_newly_reached, vec!["m2".to_string()]);
        assert_eq!(o.status_after, SessionStatus::Completed);
        assert_eq!(s.reached(), ["m1", "m2"]);
        assert!(s.log().footer.is_some());
        assert!(matches!(s.step(&ActionSpec::NavigateHome), Err(EngineError::NotRunning(_))));
    }

    #[test]
    fn global_actions_and_stack() {
        let g = toy();
        let mut s = Session::start(&g, "t", 1).unwrap();
        let o = s.step(&ActionSpec::NavigateBack).unwrap();
        assert_eq!(o.new_node, n("home"));
        assert_eq!(s.nav_stack(), [n("home")]);
        let o = s.step(&ActionSpec::open("Nope")).unwrap();
        assert_eq!(o.transition, Transition::NoOp);
        let o = s.step(&ActionSpec::open("A")).unwrap();
        assert_eq!(o.transition, Transition::Global { action: GlobalAction::Open });
        s.step(&ActionSpec::click(20, 20)).unwrap();
        assert_eq!(s.nav_stack(), [n("home"), n("a0"), n("a2")]);
        s.step(&ActionSpec::NavigateHome).unwrap();
        assert_eq!(s.nav_stack(), [n("home")]);
        assert_eq!(s.step_count(), 5);
    }

    #[test]
    fn no_ops_consume_budget() {
        let g = toy();
        let mut s = Session::start(&g, "t", 1).unwrap();
        for i in 0..10 {
            let o = s.step(&ActionSpec::Wait { coordinate: Some(crate::Point::new(20, 20)) }).unwrap();
            assert_eq!(o.transition, Transition::NoOp);
            let expect = if i == 9 { SessionStatus::FailedMaxSteps } else { SessionStatus::Running };
            assert_eq!(o.status_after, expect);
        }
        assert!(s.observe().is_err());
    }

    #[test]
    fn answer_tasks_only_end_on_complete() {
        let g = toy();
        let mut s = Session::start(&g, "ans", 1).unwrap();
        let o = s.step(&ActionSpec::click(5, 5)).unwrap();
        assert_eq!(o.milestones_newly_reached, vec!["m".to_string()]);
        assert_eq!(o.status_after, SessionStatus::Running);
        let o = s.step(&ActionSpec::complete("yes")).unwrap();
        assert_eq!(o.transition, Transition::Terminal);
        assert_eq!(o.status_after, SessionStatus::TerminatedByAgent);
        assert_eq!(s.answer(), Some("yes"));
    }

    #[test]
    fn coordinates_must_fit_the_screen() {
        let g = toy();
        let mut s = Session::start(&g, "t", 1).unwrap();
        let err = s.step(&ActionSpec::click(100, 5)).unwrap_err();
        assert!(matches!(err, EngineError::NotNormalized { .. }));
        assert_eq!(s.step_count(), 0);
        assert!(matches!(Session::start(&g, "zz", 1), Err(EngineError::UnknownTask(_))));
    }

    #[test]
    fn screens_are_redrawn_only_on_node_change() {
        let g = toy();
        let trace = |seed| {
            let mut s = Session::start(&g, "t", seed).unwrap();
            let mut hashes = vec![s.observe().unwrap().hash()];
            let mut idx = vec![s.screen_index()];
            for a in [ActionSpec::click(5, 5), ActionSpec::Wait { coordinate: None }, ActionSpec::NavigateHome] {
                let before = s.screen_index();
                let o = s.step(&a).unwrap();
                if o.transition == Transition::NoOp {
                    assert_eq!(s.screen_index(), before);
                }
                hashes.push(s.observe().unwrap().hash());
                idx.push(s.screen_index());
            }
            (hashes, idx)
        };
        assert_eq!(trace(11), trace(11));
        let draws: std::collections::BTreeSet<_> = (0..32).map(|seed| trace(seed).1).collect();
        assert!(draws.len() > 1, "seed should affect screen choice");
    }

    #[test]
    fn log_round_trips_and_replays() {
        let g = toy();
        let mut s = Session::start(&g, "t", 3).unwrap();
        s.step(&ActionSpec::click(5, 5)).unwrap();
        s.step_with(&ActionSpec::Wait { coordinate: None }, None, Some("unparseable".into())).unwrap();
        s.step(&ActionSpec::click(90, 150)).unwrap();
        let partial = s.log().clone();
        assert!(partial.is_partial());
        assert_eq!(replay(&g, &partial).unwrap(), ReplayVerdict::Identical);

        s.fail_agent("timeout");
        let log = s.into_log();
        let text = log.to_jsonl();
        assert_eq!(text.lines().count(), 5);
        let back = EpisodeLog::from_jsonl(&text).unwrap();
        assert_eq!(back, log);
        assert_eq!(replay(&g, &back).unwrap(), ReplayVerdict::Identical);

        let mut tampered = back.clone();
        tampered.steps[1].action = ActionSpec::click(20, 20);
        match replay(&g, &tampered).unwrap() {
            ReplayVerdict::Diverged { step, field, .. } => assert_eq!((step, field.as_str()), (1, "outcome")),
            v => panic!("{v:?}"),
        }

        let mut other = back;
        other.header.manifest_digest = "0".repeat(64);
        assert!(matches!(replay(&g, &other), Err(ReplayError::DigestMismatch { .. })));
    }

    #[test]
    fn malformed_logs_are_rejected() {
        assert!(matches!(EpisodeLog::from_jsonl(""), Err(LogError::Empty)));
        let g = toy();
        let s = Session::start(&g, "t", 3).unwrap();
        let text = s.log().to_jsonl();
        let twice = format!("{text}{text}");
        assert!(matches!(EpisodeLog::from_jsonl(&twice), Err(LogError::Malformed { line: 2, .. })));
    }
}
