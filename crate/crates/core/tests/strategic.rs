use std::path::PathBuf;
use std::sync::Arc;

use harmonic_core::bus::{Command, Report, ReportKind, Verb};
use harmonic_core::kb::{analyze, load_kb, Addressee, AgentKind, Kb, Vmr, VmrObject};
use harmonic_core::sim::{CellIndex, Room, CELL_SIZE};
use harmonic_core::strategic::{
    explain, select, CycleInput, Decision, Event, GoalStatus, Heard, PlanLibrary, PlanTemplate,
    Rendered, StepState, StepTemplate, StrategicCore, StrategicError, TeamContext, ThoughtKind,
    UtilityScore, Weights,
};
use harmonic_core::types::{AgentId, Params, Point, Pose, Value};
use proptest::prelude::*;

fn asset(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../assets")
        .join(rel)
}

fn kb() -> Arc<Kb> {
    Arc::new(
        load_kb(
            asset("kb/apartment.onto"),
            asset("kb/apartment.lex"),
            asset("kb/team.profiles"),
        )
        .expect("kb loads"),
    )
}

fn library(kb: &Kb) -> Arc<PlanLibrary> {
    let text = std::fs::read_to_string(asset("plans/search.plans")).unwrap();
    Arc::new(PlanLibrary::parse(&text, &kb.ontology).expect("plans load"))
}

fn room(name: &str, c0: i32, r0: i32, c1: i32, r1: i32) -> Room {
    Room {
        name: name.into(),
        min: CellIndex { col: c0, row: r0 },
        max: CellIndex { col: c1, row: r1 },
    }
}

fn team() -> TeamContext {
    TeamContext::new(
        vec![
            (AgentId::new("ugv-1"), AgentKind::Ugv),
            (AgentId::new("drone-1"), AgentKind::Drone),
        ],
        vec![
            room("kitchen", 0, 0, 15, 11),
            room("living-room", 16, 0, 39, 11),
            room("bedroom", 0, 12, 19, 23),
            room("bathroom", 20, 12, 39, 23),
        ],
        10.0,
        6.0,
    )
}

fn core(id: &str, kb: &Arc<Kb>, lib: &Arc<PlanLibrary>) -> StrategicCore {
    StrategicCore::new(AgentId::new(id), kb.clone(), lib.clone(), team())
}

fn heard(text: &str, kb: &Kb, n: u32) -> Event {
    let mut tmr = analyze(text, &AgentId::new("danny"), kb).expect("parses");
    tmr.tmr_id = format!("tmr-{n:06}");
    tmr.source_text = text.into();
    Event::Heard(Heard::Tmr(tmr))
}

fn report(robot: &str, cmd: &Command, kind: ReportKind, tick: u64) -> Report {
    Report {
        report_id: format!("{robot}-r{tick}"),
        robot_id: AgentId::new(robot),
        command_id: Some(cmd.command_id.clone()),
        kind,
        tick,
    }
}

/// Deliberate and render once, expecting a command.
fn issue(c: &mut StrategicCore, tick: u64) -> Command {
    let Decision::Step { goal_id, step, .. } = c.deliberate(tick).unwrap() else {
        panic!("expected a step")
    };
    match c.render_action(&goal_id, step, tick).unwrap() {
        Rendered::Command(cmd) => cmd,
        other => panic!("expected a command, got {other:?}"),
    }
}

#[test]
fn attend_nothing_changes_nothing() {
    let kb = kb();
    let lib = library(&kb);
    let mut c = core("drone-1", &kb, &lib);
    let before = c.agenda().clone();
    c.attend(&[], 0);
    assert_eq!(c.agenda(), &before);
    assert!(c.drain_thoughts().is_empty());
}

#[test]
fn attend_request_adopts_goal() {
    let kb = kb();
    let lib = library(&kb);
    let mut c = core("drone-1", &kb, &lib);
    c.attend(&[heard("Find my keys", &kb, 1)], 3);
    assert_eq!(c.agenda().len(), 1);
    let e = &c.agenda().entries()[0];
    assert_eq!(e.goal.status, GoalStatus::Pending);
    assert_eq!(e.goal.concept, "FIND-OBJECT");
    assert_eq!(e.goal.priority, 0.8);
    let t = c.drain_thoughts();
    assert_eq!(t.len(), 1);
    assert_eq!(t[0].kind, ThoughtKind::GoalAdopted);
    assert_eq!(t[0].goal_id.as_deref(), Some("goal-tmr-000001"));
}

#[test]
fn attend_failure_report_flags_goal() {
    let kb = kb();
    let lib = library(&kb);
    let mut c = core("drone-1", &kb, &lib);
    c.attend(&[heard("Find my keys", &kb, 1)], 0);
    let cmd = issue(&mut c, 0);
    assert_eq!(cmd.verb, Verb::SearchArea);
    c.drain_thoughts();
    c.attend(
        &[Event::Report(report(
            "drone-1",
            &cmd,
            ReportKind::Failure("not-found".into()),
            40,
        ))],
        40,
    );
    let e = &c.agenda().entries()[0];
    assert!(e.flagged);
    assert_eq!(e.plan.as_ref().unwrap().steps[0].state, StepState::Failed);
    let t = c.drain_thoughts();
    assert_eq!(t.len(), 1);
    assert_eq!(t[0].kind, ThoughtKind::ReportProcessed);
}

#[test]
fn deliberate_on_empty_agenda_is_idle() {
    let kb = kb();
    let lib = library(&kb);
    let mut c = core("ugv-1", &kb, &lib);
    assert_eq!(c.deliberate(0), Ok(Decision::Idle));
}

#[test]
fn singleton_plan_wins_whatever_the_weights() {
    let kb = kb();
    let lib = library(&kb);
    for w in [(0.5, 0.3, 0.2), (0.01, 5.0, 9.0), (3.0, 0.001, 100.0)] {
        let weights = Weights::new(w.0, w.1, w.2).unwrap();
        let mut c = core("drone-1", &kb, &lib).with_weights(weights);
        c.attend(&[heard("Go to the kitchen", &kb, 1)], 0);
        let d = c.deliberate(0).unwrap();
        assert!(
            matches!(d, Decision::Step { ref plan_id, .. } if plan_id == "go-to-place"),
            "{d:?}"
        );
        let conf = c
            .thoughts()
            .iter()
            .find(|t| t.kind == ThoughtKind::ConfidenceAssessed)
            .unwrap();
        assert_eq!(conf.structured_cause["confidence"], 1.0);
    }
}

fn template(id: &str, success: f64, cost: f64) -> PlanTemplate {
    PlanTemplate {
        plan_id: id.into(),
        goal_concept: "FIND-OBJECT".into(),
        est_success: success,
        est_cost: cost,
        steps: vec![StepTemplate {
            role: "drone".into(),
            concept: "SCAN".into(),
            concurrent: false,
            optional: false,
            params: Params::new(),
        }],
    }
}

#[test]
fn higher_utility_plan_is_selected() {
    let kb = kb();
    let lib = Arc::new(PlanLibrary::from_templates(vec![
        template("B", 0.6, 0.1),
        template("A", 0.9, 0.5),
    ]));
    let mut c = core("drone-1", &kb, &lib);
    c.attend(&[heard("Find my keys", &kb, 1)], 0);
    let d = c.deliberate(0).unwrap();
    assert!(matches!(d, Decision::Step { ref plan_id, .. } if plan_id == "A"));
    // Independent evaluation of the linear utility.
    let oracle = |p: f64, s: f64, cst: f64| 0.5 * p + 0.3 * s - 0.2 * cst;
    let e = &c.agenda().entries()[0];
    let total = |id: &str| e.candidates.iter().find(|s| s.plan_id == id).unwrap().total;
    assert!((total("A") - oracle(0.8, 0.9, 0.5)).abs() < 1e-12);
    assert!((total("B") - oracle(0.8, 0.6, 0.1)).abs() < 1e-12);
    assert!((total("A") - 0.57).abs() < 1e-9 && (total("B") - 0.56).abs() < 1e-9);
    let sel = c
        .thoughts()
        .iter()
        .find(|t| t.kind == ThoughtKind::PlanSelected)
        .unwrap();
    assert_eq!(sel.structured_cause["runner_up"], "B");
}

#[test]
fn goal_without_plans_is_abandoned() {
    let kb = kb();
    let lib = library(&kb);
    let mut c = core("ugv-1", &kb, &lib);
    c.attend(&[heard("Bring my wallet to me", &kb, 1)], 0);
    let id = c.agenda().entries()[0].goal.goal_id.clone();
    assert_eq!(
        c.deliberate(0),
        Err(StrategicError::NoPlanAvailable(id.clone()))
    );
    assert_eq!(c.agenda().entries()[0].goal.status, GoalStatus::Abandoned);
    let t = c.thoughts().last().unwrap();
    assert_eq!(t.kind, ThoughtKind::GoalAbandoned);
    let text = explain(&id, c.thoughts(), &kb).unwrap();
    assert!(
        text.contains("abandoned: no plan in the library can achieve FETCH"),
        "{text}"
    );
}

#[test]
fn move_to_room_targets_its_centroid() {
    let kb = kb();
    let lib = library(&kb);
    let mut c = core("drone-1", &kb, &lib);
    c.attend(&[heard("Go to the kitchen", &kb, 1)], 0);
    let cmd = issue(&mut c, 7);
    assert_eq!(cmd.verb, Verb::MoveTo);
    assert_eq!(cmd.robot_id, AgentId::new("drone-1"));
    assert_eq!(cmd.issued_tick, 7);
    // Kitchen covers cells 0..=15 by 0..=11: centre of that cell block.
    let (cx, cy) = (16.0 * CELL_SIZE / 2.0, 12.0 * CELL_SIZE / 2.0);
    assert_eq!(cmd.params["target"], Value::Pose(Pose::new(cx, cy, 0.0)));
}

#[test]
fn report_step_becomes_team_utterance() {
    let kb = kb();
    let lib = library(&kb);
    let mut c = core("drone-1", &kb, &lib);
    c.attend(&[heard("Find my keys", &kb, 1)], 0);
    let cmd = issue(&mut c, 0);
    let keys = VmrObject {
        instance_id: "keys-1".into(),
        concept: "KEY-SET".into(),
        position: Point::new(1.0, 1.0),
        confidence: 0.9,
    };
    let vmr = Vmr {
        vmr_id: "vmr-drone-1-30".into(),
        robot_id: AgentId::new("drone-1"),
        objects: vec![keys],
        tick: 30,
    };
    c.attend(
        &[
            Event::Vmr(vmr),
            Event::Report(report("drone-1", &cmd, ReportKind::Success, 31)),
        ],
        31,
    );
    let Decision::Step { goal_id, step, .. } = c.deliberate(31).unwrap() else {
        panic!()
    };
    assert_eq!(step, 1);
    let Rendered::Utterance(u) = c.render_action(&goal_id, step, 31).unwrap() else {
        panic!()
    };
    assert_eq!(u.addressee, Addressee::Team);
    assert_eq!(u.text, "I found Danny's keys in the kitchen.");
}

#[test]
fn step_without_rendering_rule_is_unrenderable() {
    let onto = std::fs::read_to_string(asset("kb/apartment.onto")).unwrap()
        + "concept TELEPORT is-a ACTION\n";
    let lex = std::fs::read_to_string(asset("kb/apartment.lex")).unwrap();
    let prof = std::fs::read_to_string(asset("kb/team.profiles"))
        .unwrap()
        .replace(
            "skills MOVE-TO SEARCH-AREA SCAN HOVER",
            "skills TELEPORT MOVE-TO SEARCH-AREA SCAN HOVER",
        );
    let kb = Arc::new(Kb::from_texts(&onto, &lex, &prof).unwrap());
    let mut t = template("teleport-there", 0.9, 0.1);
    t.steps[0].concept = "TELEPORT".into();
    let lib = Arc::new(PlanLibrary::from_templates(vec![t]));
    let mut c = core("drone-1", &kb, &lib);
    c.attend(&[heard("Find my keys", &kb, 1)], 0);
    let Decision::Step { goal_id, step, .. } = c.deliberate(0).unwrap() else {
        panic!()
    };
    let err = c.render_action(&goal_id, step, 0).unwrap_err();
    assert!(
        matches!(err, StrategicError::UnrenderableStep { ref plan_id, step: 0, .. } if plan_id == "teleport-there")
    );
    assert!(c.agenda().entries()[0].flagged);
}

#[test]
fn success_on_last_step_achieves_goal() {
    let kb = kb();
    let lib = library(&kb);
    let mut c = core("drone-1", &kb, &lib);
    c.attend(&[heard("Go to the kitchen", &kb, 1)], 0);
    let cmd = issue(&mut c, 0);
    c.monitor(&[report("drone-1", &cmd, ReportKind::Success, 50)], 50);
    assert_eq!(c.agenda().entries()[0].goal.status, GoalStatus::Achieved);
    assert_eq!(c.thoughts().last().unwrap().kind, ThoughtKind::GoalAchieved);
}

#[test]
fn expired_command_fails_step() {
    let kb = kb();
    let lib = library(&kb);
    let mut c = core("drone-1", &kb, &lib);
    c.attend(&[heard("Go to the kitchen", &kb, 1)], 0);
    let cmd = issue(&mut c, 0);
    c.monitor(&[report("drone-1", &cmd, ReportKind::Expired, 3000)], 3000);
    let e = &c.agenda().entries()[0];
    assert_eq!(e.plan.as_ref().unwrap().steps[0].state, StepState::Failed);
    assert!(e.flagged);
}

#[test]
fn unknown_command_id_is_an_anomaly() {
    let kb = kb();
    let lib = library(&kb);
    let mut c = core("drone-1", &kb, &lib);
    c.attend(&[heard("Go to the kitchen", &kb, 1)], 0);
    let _ = issue(&mut c, 0);
    let before = c.agenda().clone();
    c.drain_thoughts();
    let bogus = Report {
        report_id: "r-x".into(),
        robot_id: AgentId::new("drone-1"),
        command_id: Some("drone-1-c999".into()),
        kind: ReportKind::Success,
        tick: 5,
    };
    c.monitor(&[bogus], 5);
    assert_eq!(c.agenda(), &before);
    let t = c.drain_thoughts();
    assert_eq!(t.len(), 1);
    assert_eq!(t[0].kind, ThoughtKind::Anomaly);
}

#[test]
fn explanation_names_requester_and_action() {
    let kb = kb();
    let lib = library(&kb);
    let mut c = core("drone-1", &kb, &lib);
    c.attend(&[heard("Find my keys", &kb, 1)], 0);
    let _ = issue(&mut c, 0);
    let text = explain("goal-tmr-000001", c.thoughts(), &kb).unwrap();
    assert!(text.contains("Danny") && text.contains("search"), "{text}");
    assert!(text.contains("drone-overview-then-ugv-check"), "{text}");
    let via_thought = explain(&c.thoughts()[1].thought_id, c.thoughts(), &kb).unwrap();
    assert_eq!(via_thought, text);
    assert_eq!(
        explain("goal-nope", c.thoughts(), &kb),
        Err(StrategicError::UnknownTarget("goal-nope".into()))
    );
}

#[test]
fn unintelligible_request_leads_to_question() {
    let kb = kb();
    let lib = library(&kb);
    let mut c = core("drone-1", &kb, &lib);
    let err = analyze("Blorp the flarn", &AgentId::new("danny"), &kb).unwrap_err();
    let h = Heard::Failed {
        utterance_id: "u-000003".into(),
        speaker: AgentId::new("danny"),
        text: "Blorp the flarn".into(),
        error: err,
    };
    let out = c.cycle(CycleInput {
        tick: 10,
        heard: vec![h],
        ..Default::default()
    });
    assert_eq!(out.utterances.len(), 1);
    assert_eq!(out.utterances[0].text, "What do you mean?");
    assert_eq!(
        out.utterances[0].addressee,
        Addressee::Agent(AgentId::new("danny"))
    );
    assert_eq!(c.agenda().entries()[0].goal.status, GoalStatus::Achieved);
}

#[test]
fn robots_coordinate_through_team_updates() {
    let kb = kb();
    let lib = library(&kb);
    let mut drone = core("drone-1", &kb, &lib);
    let mut ugv = core("ugv-1", &kb, &lib);
    let Event::Heard(h) = heard("Find my keys", &kb, 1) else {
        unreachable!()
    };
    let d0 = drone.cycle(CycleInput {
        tick: 0,
        heard: vec![h.clone()],
        ..Default::default()
    });
    let u0 = ugv.cycle(CycleInput {
        tick: 0,
        heard: vec![h],
        ..Default::default()
    });
    assert_eq!(d0.commands.len(), 1);
    assert!(u0.commands.is_empty());
    let search = &d0.commands[0];
    assert_eq!(search.params["rooms"].as_id_list().unwrap().len(), 4);
    assert_eq!(search.params["label"], Value::Id("keys".into()));

    let keys = VmrObject {
        instance_id: "keys-1".into(),
        concept: "KEY-SET".into(),
        position: Point::new(1.0, 1.0),
        confidence: 0.9,
    };
    let vmr = Vmr {
        vmr_id: "v".into(),
        robot_id: AgentId::new("drone-1"),
        objects: vec![keys],
        tick: 20,
    };
    drone.attend(&[Event::Vmr(vmr)], 20);
    let d1 = drone.cycle(CycleInput {
        tick: 25,
        reports: vec![report("drone-1", search, ReportKind::Success, 24)],
        ..Default::default()
    });
    assert_eq!(d1.utterances.len(), 1);
    let u1 = ugv.cycle(CycleInput {
        tick: 30,
        team: d1.team,
        ..Default::default()
    });
    assert_eq!(u1.commands.len(), 1, "{:?}", ugv.agenda());
    assert_eq!(u1.commands[0].verb, Verb::SearchArea);
    assert_eq!(u1.commands[0].params["room"], Value::Id("kitchen".into()));
}

#[test]
fn stop_request_preempts_search() {
    let kb = kb();
    let lib = library(&kb);
    let mut drone = core("drone-1", &kb, &lib);
    let Event::Heard(find) = heard("Find my keys", &kb, 1) else {
        unreachable!()
    };
    let Event::Heard(stop) = heard("Stop", &kb, 2) else {
        unreachable!()
    };
    let d0 = drone.cycle(CycleInput {
        tick: 0,
        heard: vec![find],
        ..Default::default()
    });
    assert_eq!(d0.commands[0].verb, Verb::SearchArea);
    let d1 = drone.cycle(CycleInput {
        tick: 5,
        heard: vec![stop],
        ..Default::default()
    });
    // Both goals share a priority; the earlier one stays first, so the
    // search keeps going.
    assert!(d1.commands.is_empty(), "{:?}", d1.commands);
}

fn arb_score() -> impl Strategy<Value = (f64, f64, f64)> {
    (0.0..=1.0f64, 0.0..=1.0f64, 0.0..=1.0f64)
}

proptest! {
    #[test]
    fn argmax_is_invariant_under_weight_scaling(
        plans in prop::collection::vec(arb_score(), 1..8),
        k in 0.01..100.0f64,
        priority in 0.0..=1.0f64,
    ) {
        let w = Weights::default();
        let score = |w: Weights| -> Vec<UtilityScore> {
            plans.iter().enumerate().map(|(i, (_, s, c))| UtilityScore::compute(&format!("p{i}"), priority, *s, *c, w)).collect()
        };
        let a = score(w);
        let b = score(w.scaled(k));
        let (ia, ib) = (select(&a).unwrap(), select(&b).unwrap());
        // Scaling can only move totals that were equal to within rounding.
        prop_assert!(ia == ib || (a[ia].total - a[ib].total).abs() < 1e-12);
    }

    #[test]
    fn agenda_stays_ordered(priorities in prop::collection::vec(0u8..5, 0..20)) {
        let kb = kb();
        let prof = std::fs::read_to_string(asset("kb/team.profiles")).unwrap();
        let mut people = String::new();
        for i in 0..5 {
            people.push_str(&format!("agent p{i}\n  kind human\n  pref priority {}\n", i as f64 / 4.0));
        }
        let kb2 = Arc::new(Kb::from_texts(
            &std::fs::read_to_string(asset("kb/apartment.onto")).unwrap(),
            &std::fs::read_to_string(asset("kb/apartment.lex")).unwrap(),
            &(prof + &people),
        ).unwrap());
        let lib = library(&kb);
        let mut c = core("drone-1", &kb2, &lib);
        for (n, p) in priorities.iter().enumerate() {
            let mut tmr = analyze("Go to the kitchen", &AgentId::new(format!("p{p}")), &kb2).unwrap();
            tmr.tmr_id = format!("tmr-{n:06}");
            c.attend(&[Event::Heard(Heard::Tmr(tmr))], n as u64);
            prop_assert!(c.agenda().is_ordered());
        }
        prop_assert_eq!(c.agenda().len(), priorities.len());
    }

    #[test]
    fn cycles_are_deterministic(texts in prop::collection::vec(prop::sample::select(vec![
        "Find my keys", "Stop", "Go to the bedroom", "Where are my keys?", "Search the kitchen", "Blorp", "Thanks!",
    ]), 1..5)) {
        let kb = kb();
        let lib = library(&kb);
        let run = || {
            let mut c = core("ugv-1", &kb, &lib);
            let mut outs = Vec::new();
            for (n, t) in texts.iter().enumerate() {
                let h = match analyze(t, &AgentId::new("danny"), &kb) {
                    Ok(mut tmr) => { tmr.tmr_id = format!("tmr-{n:06}"); tmr.source_text = t.to_string(); Heard::Tmr(tmr) }
                    Err(error) => Heard::Failed { utterance_id: format!("u-{n}"), speaker: AgentId::new("danny"), text: t.to_string(), error },
                };
                outs.push(c.cycle(CycleInput { tick: n as u64 * 5, heard: vec![h], ..Default::default() }));
            }
            outs
        };
        let a = run();
        prop_assert_eq!(&a, &run());
        // Every thought comes from a template, not the fallback.
        for o in &a {
            for t in &o.thoughts {
                prop_assert!(!t.rendered_text.is_empty());
                prop_assert!(!t.rendered_text.starts_with(&format!("{}:", t.kind)), "{}", t.rendered_text);
            }
        }
    }
}
