use std::collections::BTreeMap;
use std::path::PathBuf;

use harmonic_core::kb::{
    analyze, generate, generate_thought, interpret_percept, load_kb, Addressee, AnalysisError,
    Filler, FillerType, Frame, GenerateError, Kb, Ontology, SpeechAct, Tmr,
};
use harmonic_core::sim::{Detection, RelativePosition};
use harmonic_core::types::{AgentId, Pose};
use proptest::prelude::*;

fn kb_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../assets/kb")
}

fn shipped() -> Kb {
    let d = kb_dir();
    load_kb(
        d.join("apartment.onto"),
        d.join("apartment.lex"),
        d.join("team.profiles"),
    )
    .expect("shipped KB loads")
}

fn danny() -> AgentId {
    AgentId::new("danny")
}

/// Count block heads starting with `keyword`, straight from the file text.
fn count_heads(file: &str, keyword: &str) -> usize {
    std::fs::read_to_string(kb_dir().join(file))
        .unwrap()
        .lines()
        .filter(|l| l.split_whitespace().next() == Some(keyword) && !l.starts_with(' '))
        .count()
}

#[test]
fn shipped_kb_counts_match_files() {
    let kb = shipped();
    let concepts = count_heads("apartment.onto", "concept");
    let senses = count_heads("apartment.lex", "sense");
    assert_eq!(kb.ontology.len(), concepts);
    assert_eq!(kb.lexicon.entries().len(), senses);
    assert!((50..=100).contains(&concepts), "{concepts} concepts");
    assert!((100..=200).contains(&senses), "{senses} senses");
}

#[test]
fn minimal_kb_and_missing_concept() {
    let onto = "concept ALL\nconcept OBJECT is-a ALL\n";
    assert!(Kb::from_texts(onto, "", "").is_ok());
    let err = Kb::from_texts(onto, "sense box-n1 noun \"box\" BOX\n", "").unwrap_err();
    assert_eq!(err.file, "lexicon");
    assert_eq!(err.entry, "box-n1");
    assert_eq!(err.line, 1);
}

#[test]
fn find_my_keys() {
    let kb = shipped();
    let tmr = analyze("Find my keys", &danny(), &kb).unwrap();
    let mut want = Tmr::new(
        SpeechAct::RequestAction,
        "FIND-OBJECT",
        danny(),
        Addressee::Team,
    )
    .with("theme", Filler::Concept("KEY-SET".into()))
    .with("owner", Filler::Agent(danny()));
    want.source_text = "Find my keys".into();
    assert_eq!(tmr, want);
    assert!(kb.validate_tmr(&tmr).is_ok());
}

#[test]
fn analysis_errors() {
    let kb = shipped();
    assert_eq!(analyze("", &danny(), &kb), Err(AnalysisError::Empty));
    assert!(matches!(
        analyze("Flibber the wug", &danny(), &kb),
        Err(AnalysisError::Unparsed { .. })
    ));
    assert_eq!(
        analyze("Get the keys", &danny(), &kb),
        Err(AnalysisError::AmbiguousSense {
            lemma: "get".into(),
            candidates: vec!["FETCH".into(), "FIND-OBJECT".into()]
        })
    );
    assert_eq!(
        analyze("find my keys", &AgentId::new("ghost"), &kb),
        Err(AnalysisError::UnknownSpeaker("ghost".into()))
    );
    // Selectional restriction: you cannot search a mug.
    assert!(matches!(
        analyze("search the mug", &danny(), &kb),
        Err(AnalysisError::Unparsed { .. })
    ));
}

#[test]
fn other_shapes() {
    let kb = shipped();
    let t = analyze(
        "drone-1, search the kitchen for Danny's keys.",
        &danny(),
        &kb,
    )
    .unwrap();
    assert_eq!(t.addressee, Addressee::Agent(AgentId::new("drone-1")));
    assert_eq!(t.head, "SEARCH-AREA");
    assert_eq!(t.bindings["theme"], Filler::Concept("KITCHEN".into()));
    assert_eq!(t.bindings["target"], Filler::Concept("KEY-SET".into()));

    let t = analyze("Where are my glasses?", &danny(), &kb).unwrap();
    assert_eq!(
        (t.speech_act, t.head.as_str()),
        (SpeechAct::RequestInfo, "LOCATED")
    );
    assert_eq!(t.bindings["owner"], Filler::Agent(danny()));

    let t = analyze(
        "I found the keys in the kitchen.",
        &AgentId::new("ugv-1"),
        &kb,
    )
    .unwrap();
    assert_eq!(
        (t.speech_act, t.head.as_str()),
        (SpeechAct::Inform, "FOUND")
    );
    assert_eq!(t.bindings["agent"], Filler::Agent(AgentId::new("ugv-1")));
    assert_eq!(t.bindings["location"], Filler::Concept("KITCHEN".into()));

    let t = analyze("Okay, thanks!", &danny(), &kb);
    assert!(t.is_err(), "two phrases do not make a sentence: {t:?}");
    let t = analyze("Thanks!", &danny(), &kb).unwrap();
    assert_eq!((t.speech_act, t.head.as_str()), (SpeechAct::Ack, "THANK"));
    let t = analyze(
        "Could you please look for my phone in the bedroom",
        &danny(),
        &kb,
    )
    .unwrap();
    assert_eq!(t.head, "FIND-OBJECT");
    assert_eq!(t.bindings["location"], Filler::Concept("BEDROOM".into()));
    let t = analyze("Bring my wallet to me", &danny(), &kb).unwrap();
    assert_eq!(t.bindings["beneficiary"], Filler::Agent(danny()));
}

#[test]
fn generation_examples() {
    let kb = shipped();
    let ugv = AgentId::new("ugv-1");
    let found = Tmr::new(SpeechAct::Inform, "FOUND", ugv.clone(), Addressee::Team)
        .with("theme", Filler::Concept("KEY-SET".into()))
        .with("location", Filler::Concept("KITCHEN".into()));
    assert_eq!(
        generate(&found, &kb).unwrap(),
        "I found the keys in the kitchen."
    );
    let owned = found.clone().with("owner", Filler::Agent(danny()));
    assert_eq!(
        generate(&owned, &kb).unwrap(),
        "I found Danny's keys in the kitchen."
    );
    let no_template = Tmr::new(SpeechAct::Inform, "HOVER", ugv, Addressee::Team);
    assert!(matches!(
        generate(&no_template, &kb),
        Err(GenerateError::NoTemplate(_))
    ));

    let slots: BTreeMap<String, String> = [
        ("plan", "drone-overview-then-ugv-check"),
        ("goal", "g-1"),
        ("total", "0.570"),
        ("component", "priority"),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v.to_string()))
    .collect();
    let text = generate_thought("PlanSelected", &slots, &kb).unwrap();
    assert!(
        text.contains("drone-overview-then-ugv-check") && text.contains("priority"),
        "{text}"
    );
    assert!(matches!(
        generate_thought("Daydream", &slots, &kb),
        Err(GenerateError::NoTemplate(_))
    ));
}

/// A filler for `role` of `head`: the first noun concept in lexicon order
/// satisfying the constraint, or the first human for agent roles.
fn sample_filler(kb: &Kb, head: &str, role: &str) -> Filler {
    match kb
        .ontology
        .property(head, role)
        .expect("template roles exist")
    {
        FillerType::Agent => Filler::Agent(danny()),
        FillerType::Concept(c) => {
            let noun = kb
                .lexicon
                .entries()
                .iter()
                .find(|e| e.pos == harmonic_core::kb::Pos::Noun && kb.ontology.is_a(&e.concept, c))
                .unwrap_or_else(|| panic!("no noun for {c}"));
            Filler::Concept(noun.concept.clone())
        }
        other => panic!("literal role {other:?} in a template"),
    }
}

#[test]
fn round_trip_every_template() {
    let kb = shipped();
    let robot = AgentId::new("ugv-1");
    assert!(kb.lexicon.templates().len() >= 15);
    for t in kb.lexicon.templates() {
        let mut tmr = Tmr::new(t.act, t.head.clone(), robot.clone(), Addressee::Team);
        for role in t.placeholders() {
            if role != "be" {
                tmr.bindings
                    .insert(role.to_string(), sample_filler(&kb, &t.head, role));
            }
        }
        let text = generate(&tmr, &kb).unwrap();
        let back = analyze(&text, &robot, &kb).unwrap_or_else(|e| panic!("{text:?}: {e}"));
        assert_eq!(back.speech_act, tmr.speech_act, "{text}");
        assert_eq!(back.head, tmr.head, "{text}");
        assert_eq!(back.theme(), tmr.theme(), "{text}");
    }
}

fn detection(
    label: &str,
    conf: f64,
    range: f64,
    bearing: f64,
    instance: Option<&str>,
) -> Detection {
    Detection {
        class_label: label.into(),
        confidence: conf,
        relative_position: RelativePosition { range, bearing },
        tick: 7,
        instance: instance.map(str::to_string),
    }
}

fn frame() -> Frame {
    Frame {
        pose: Pose::new(2.0, 2.0, 0.0),
        tick: 7,
        width: 10.0,
        height: 10.0,
    }
}

#[test]
fn percept_examples() {
    let kb = shipped();
    let r = AgentId::new("ugv-1");
    let empty = interpret_percept(&[], &r, &kb, &frame());
    assert!(empty.vmr.objects.is_empty());
    assert_eq!(empty.vmr.vmr_id, "vmr-ugv-1-7");

    let one = interpret_percept(
        &[detection("keys", 0.9, 1.0, 0.0, Some("keys-1"))],
        &r,
        &kb,
        &frame(),
    );
    let o = &one.vmr.objects[0];
    assert_eq!(o.concept, "KEY-SET");
    // Oracle: rotate (1, 0) by theta = 0 and translate by (2, 2).
    let (theta, rx, ry) = (0.0f64, 1.0, 0.0);
    let want = (
        2.0 + rx * theta.cos() - ry * theta.sin(),
        2.0 + rx * theta.sin() + ry * theta.cos(),
    );
    assert!((o.position.x - want.0).abs() < 1e-12 && (o.position.y - want.1).abs() < 1e-12);
    assert_eq!(o.confidence, 0.9);

    let weak = interpret_percept(&[detection("keys", 0.1, 1.0, 0.0, None)], &r, &kb, &frame());
    assert!(weak.vmr.objects.is_empty());
    let floor = interpret_percept(&[detection("keys", 0.2, 1.0, 0.0, None)], &r, &kb, &frame());
    assert_eq!(floor.vmr.objects.len(), 1);

    let dup = interpret_percept(
        &[
            detection("keys", 0.5, 1.0, 0.0, Some("k")),
            detection("keys", 0.8, 1.1, 0.0, Some("k")),
        ],
        &r,
        &kb,
        &frame(),
    );
    assert_eq!(dup.vmr.objects.len(), 1);
    assert_eq!(dup.vmr.objects[0].confidence, 0.8);

    let unknown = interpret_percept(
        &[detection("unicorn", 0.9, 1.0, 0.0, None)],
        &r,
        &kb,
        &frame(),
    );
    assert!(unknown.vmr.objects.is_empty());
    assert_eq!(unknown.unknown_labels, ["unicorn"]);

    let outside = interpret_percept(
        &[detection("keys", 0.9, 5.0, std::f64::consts::PI, None)],
        &r,
        &kb,
        &frame(),
    );
    assert!(outside.vmr.objects.is_empty());
}

proptest! {
    #[test]
    fn raising_confidence_never_removes(
        confs in prop::collection::vec(0.0f64..=1.0, 1..6),
        which in 0usize..6,
        bump in 0.0f64..=1.0,
    ) {
        let kb = shipped();
        let r = AgentId::new("ugv-1");
        let labels = ["keys", "phone", "mug"];
        let dets: Vec<Detection> = confs
            .iter()
            .enumerate()
            .map(|(i, c)| detection(labels[i % 3], *c, 1.0, 0.1 * i as f64, Some(&format!("o{}", i % 4))))
            .collect();
        let before = interpret_percept(&dets, &r, &kb, &frame()).vmr;
        let mut raised = dets.clone();
        let i = which % raised.len();
        raised[i].confidence = (raised[i].confidence + bump).min(1.0);
        let after = interpret_percept(&raised, &r, &kb, &frame()).vmr;
        for o in &before.objects {
            prop_assert!(after.objects.iter().any(|a| a.instance_id == o.instance_id));
        }
        for o in &after.objects {
            prop_assert!((0.0..=1.0).contains(&o.confidence));
        }
    }

    #[test]
    fn analysis_is_deterministic(words in prop::collection::vec(
        prop::sample::select(vec!["find", "my", "keys", "the", "kitchen", "in", "search", "for", "get", "where", "are", "i", "found", "please", "bring", "to", "me", ","]),
        0..7,
    )) {
        let kb = shipped();
        let text = words.join(" ");
        prop_assert_eq!(analyze(&text, &danny(), &kb), analyze(&text, &danny(), &kb));
    }

    /// Random parent graphs where every parent comes earlier always load;
    /// adding a back edge from an ancestor to a descendant never does.
    #[test]
    fn ontology_acyclicity(
        parents in prop::collection::vec(prop::collection::vec(any::<prop::sample::Index>(), 1..3), 1..20),
        back in any::<prop::sample::Index>(),
    ) {
        let n = parents.len();
        let name = |i: usize| if i == 0 { "ALL".to_string() } else { format!("C{i}") };
        let mut text = String::from("concept ALL\n");
        let mut edges: Vec<Vec<usize>> = vec![vec![]];
        for (i, picks) in parents.iter().enumerate().skip(1) {
            let mut ps: Vec<usize> = picks.iter().map(|ix| ix.index(i)).collect();
            ps.sort();
            ps.dedup();
            text += &format!("concept {} is-a {}\n", name(i), ps.iter().map(|p| name(*p)).collect::<Vec<_>>().join(" "));
            edges.push(ps);
        }
        let onto = Ontology::parse(&text);
        prop_assert!(onto.is_ok());
        let onto = onto.unwrap();
        for i in 0..n {
            prop_assert!(onto.is_a(&name(i), "ALL"));
        }
        if n > 2 {
            // Make some non-root ancestor a child of one of its descendants.
            let d = 1 + back.index(n - 1);
            let anc = edges[d].iter().copied().find(|p| *p != 0);
            if let Some(a) = anc {
                let patched = text.replacen(
                    &format!("concept {} is-a ", name(a)),
                    &format!("concept {} is-a {} ", name(a), name(d)),
                    1,
                );
                prop_assert!(Ontology::parse(&patched).is_err());
            }
        }
    }
}
