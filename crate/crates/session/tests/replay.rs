// SPDX-License-Identifier: Apache-2.0

use std::sync::Arc;

use proptest::prelude::*;

use pvil_core::datasets::{generate, make_split, Dataset};
use pvil_session::eventlog::{append_events, read_event_file, read_events, write_events, Event};
use pvil_session::geometry::{bounding_box, circle_polygon, Point};
use pvil_session::oracle::{run_headless, AnnotatorPolicy};
use pvil_session::{LabelStatus, Outcome, SelectionRegion, Session, SessionConfig, SessionError};

fn dataset() -> Arc<Dataset> {
    Arc::new(generate("four_gaussians", 240, None, 7).unwrap())
}

fn fresh(ds: &Arc<Dataset>, seed: u64) -> Session {
    let split = make_split(ds, 0.9, seed).unwrap();
    Session::create("replay", ds.clone(), SessionConfig::default(), split).unwrap()
}

#[derive(Debug, Clone)]
enum Action {
    /// Circle at fractions of the view box, radius as a fraction of its span.
    Commit { cx: f64, cy: f64, r: f64, proposed: Option<usize> },
    Reproject { lo: f64, hi: f64 },
    Back,
}

fn action() -> impl Strategy<Value = Action> {
    prop_oneof![
        6 => (0.0f64..1.0, 0.0f64..1.0, 0.05f64..0.6, prop::option::weighted(0.2, 0usize..4))
            .prop_map(|(cx, cy, r, proposed)| Action::Commit { cx, cy, r, proposed }),
        1 => (0.0f64..0.5, 0.5f64..1.0).prop_map(|(lo, hi)| Action::Reproject { lo, hi }),
        1 => Just(Action::Back),
    ]
}

fn apply(s: &mut Session, a: &Action) {
    let view = &s.active_view().embedding;
    let pts: Vec<Point> = (0..view.len()).map(|r| view.point(r)).collect();
    let (lo, hi) = bounding_box(&pts);
    let span = (hi[0] - lo[0]).max(hi[1] - lo[1]);
    match *a {
        Action::Commit { cx, cy, r, proposed } => {
            let c = [lo[0] + cx * (hi[0] - lo[0]), lo[1] + cy * (hi[1] - lo[1])];
            let region = SelectionRegion::new(circle_polygon(c, r * span, 24)).unwrap();
            match s.commit_selection(region, proposed) {
                Ok(_) | Err(SessionError::EmptySelection(_)) => {}
                Err(e) => panic!("{e}"),
            }
        }
        Action::Reproject { lo: a, hi: b } => {
            let scope = s.active_view().scope().to_vec();
            let (i, j) = ((a * scope.len() as f64) as usize, (b * scope.len() as f64) as usize);
            match s.reproject_subset(&scope[i..j]) {
                Ok(_) | Err(SessionError::SubsetTooSmall { .. }) => {}
                Err(e) => panic!("{e}"),
            }
        }
        Action::Back => {
            let _ = s.back();
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, ..ProptestConfig::default() })]

    #[test]
    fn session_invariants_hold_and_replay_is_exact(
        seed in 0u64..1000,
        actions in prop::collection::vec(action(), 1..14),
    ) {
        let ds = dataset();
        let mut s = fresh(&ds, seed);
        let seeds: Vec<(usize, LabelStatus)> = s.split().labeled.iter().map(|&i| (i, s.ledger().status(i))).collect();
        let mut labeled = s.ledger().labeled_count();
        for a in &actions {
            apply(&mut s, a);
            // Seeds never change.
            for &(i, st) in &seeds {
                prop_assert_eq!(s.ledger().status(i), st);
            }
            // Labeled count never shrinks.
            prop_assert!(s.ledger().labeled_count() >= labeled);
            labeled = s.ledger().labeled_count();
        }
        for rec in s.history() {
            let scope = s.view(rec.view).unwrap().scope();
            prop_assert!(rec.members.iter().all(|m| scope.binary_search(m).is_ok()));
            if let Outcome::Labeled { class, overridden: false, .. } = rec.outcome {
                let total: usize = rec.seed_histogram.iter().sum();
                prop_assert!(rec.seed_histogram[class] as f64 >= s.config().eta * total as f64);
            }
        }
        for v in s.views() {
            if let Some(p) = v.parent {
                let parent = s.view(p).unwrap().scope();
                prop_assert!(v.scope().iter().all(|i| parent.binary_search(i).is_ok()));
            }
        }
        s.finish();

        let mut buf = Vec::new();
        write_events(&mut buf, s.events()).unwrap();
        let events = read_events(&buf[..]).unwrap();
        prop_assert_eq!(&events[..], s.events());
        let r = Session::replay(&events, ds.clone()).unwrap();
        prop_assert_eq!(r.ledger(), s.ledger());
        prop_assert_eq!(r.history(), s.history());
        prop_assert_eq!(r.views().len(), s.views().len());
        for (a, b) in r.views().iter().zip(s.views()) {
            prop_assert_eq!(&a.embedding, &b.embedding);
            prop_assert_eq!(a.parent, b.parent);
        }
        prop_assert_eq!(r.export_labels().unwrap(), s.export_labels().unwrap());
    }
}

#[test]
fn oracle_transcript_replays_to_the_same_ledger() {
    let ds = Arc::new(generate("four_gaussians", 800, None, 1).unwrap());
    let split = make_split(&ds, 0.99, 2).unwrap();
    let mut s = Session::create("o", ds.clone(), SessionConfig::default(), split).unwrap();
    let report = run_headless(&mut s, &AnnotatorPolicy::default()).unwrap();
    assert!(report.commits > 0);
    assert!(s.views().len() > 1, "the overlapped pair should be reprojected");
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("session.jsonl");
    append_events(&path, &report.transcript[..2]).unwrap();
    append_events(&path, &report.transcript[2..]).unwrap();
    let events = read_event_file(&path).unwrap();
    assert_eq!(events, report.transcript);
    let r = Session::replay(&events, ds).unwrap();
    assert_eq!(r.ledger(), s.ledger());
    assert_eq!(r.export_labels().unwrap(), s.export_labels().unwrap());
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), events.len());
    assert!(text.lines().next().unwrap().contains("\"event\":\"create\""));
}

#[test]
fn tampered_log_is_detected() {
    let ds = dataset();
    let mut s = fresh(&ds, 0);
    run_headless(&mut s, &AnnotatorPolicy::default()).unwrap();
    let mut events = s.events().to_vec();
    let k = events.iter().position(|e| matches!(e, Event::Commit { outcome: Outcome::Labeled { .. }, .. })).unwrap();
    if let Event::Commit { outcome, .. } = &mut events[k] {
        *outcome = Outcome::Labeled {
            class: 3,
            newly_labeled: 0,
            overridden: true,
        };
    }
    assert!(matches!(Session::replay(&events, ds.clone()), Err(SessionError::ReplayMismatch { event, .. }) if event == k));
    let other = Arc::new(generate("two_moons", 240, None, 0).unwrap());
    assert!(matches!(Session::replay(s.events(), other), Err(SessionError::ReplayMismatch { event: 0, .. })));
    assert!(matches!(Session::replay(&s.events()[1..], ds), Err(SessionError::EventLog(_))));
}

#[test]
fn malformed_lines_name_their_position() {
    let text = "{\"event\":\"back\",\"view\":0}\n\nnot json\n";
    let err = read_events(text.as_bytes()).unwrap_err();
    assert!(err.to_string().contains("line 3"), "{err}");
}
