use std::collections::HashSet;
use bodyprompt_core::session::{
    CodeError, CodeGenerator, Event, Phase, PickupCode, SessionState, SessionTimings, Wordlists,
};
use bodyprompt_core::{Booth, Timestamp};
use proptest::prelude::*;

const S: u64 = 1000;

fn fresh() -> SessionState {
    SessionState::new("st", Booth::Private, SessionTimings::default(), 11)
}

fn code() -> PickupCode {
    PickupCode::new("kuu", "otter", Timestamp(0))
}

fn go(s: &SessionState, e: Event, now: u64) -> SessionState {
    let a = s.advance(e, Timestamp(now));
    assert_eq!(a.rejection, None);
    a.state
}

#[test]
fn countdown_and_reset_fire_on_the_exact_millisecond() {
    let s = go(&fresh(), Event::ConsentGiven, 500);
    let s = go(&s, Event::ArtworkSelected("dancers".into()), 1_000);
    let s = go(&s, Event::StartCountdown, 3_217);
    assert_eq!(go(&s, Event::Tick, 3_217 + 10 * S - 1).phase(), Phase::Countdown);
    let s = go(&s, Event::Tick, 3_217 + 10 * S);
    assert_eq!(s.phase(), Phase::Capturing);
    let s = go(&s, Event::CaptureTaken(code()), 20_000);
    assert_eq!(s.reset_deadline(), Some(Timestamp(80_000)));
    assert_eq!(go(&s, Event::Tick, 79_999).phase(), Phase::Submitted);
    let a = s.advance(Event::Tick, Timestamp(80_000));
    assert_eq!(a.entered, [Phase::Reset, Phase::Consent]);
    assert_eq!(a.state, go(&a.state, Event::Tick, 80_000));
}

#[test]
fn late_tick_catches_up_through_every_deadline() {
    let s = go(&fresh(), Event::ConsentGiven, 0);
    let s = go(&s, Event::ArtworkSelected("a".into()), 0);
    let s = go(&s, Event::StartCountdown, 0);
    let a = s.advance(Event::Tick, Timestamp(500 * S));
    assert_eq!(a.entered, [Phase::Capturing, Phase::Consent]);
    assert_eq!(a.state.error(), Some("capture timed out"));
}

#[derive(Debug, Clone)]
enum Step {
    Consent,
    Select,
    Countdown,
    Capture,
    NoPose,
    Ack,
    Fail,
    Tick,
}

fn arb_step() -> impl Strategy<Value = (Step, u64)> {
    let step = prop_oneof![
        1 => Just(Step::Consent),
        1 => Just(Step::Select),
        1 => Just(Step::Countdown),
        1 => Just(Step::Capture),
        1 => Just(Step::NoPose),
        1 => Just(Step::Ack),
        1 => Just(Step::Fail),
        3 => Just(Step::Tick),
    ];
    (step, prop_oneof![Just(0u64), 0..2_000u64, 0..70_000u64])
}

fn event(step: &Step, i: usize) -> Event {
    match step {
        Step::Consent => Event::ConsentGiven,
        Step::Select => Event::ArtworkSelected(format!("art-{}", i % 3)),
        Step::Countdown => Event::StartCountdown,
        Step::Capture => Event::CaptureTaken(PickupCode::new("a", format!("b{i}"), Timestamp(0))),
        Step::NoPose => Event::PoseNotFound,
        Step::Ack => Event::SubmissionAcked(format!("job-{i}")),
        Step::Fail => Event::SubmissionFailed("backend down".into()),
        Step::Tick => Event::Tick,
    }
}

/// Drives a state back to Consent with the fewest legal moves: ticks for
/// timed phases, a selection then ticks for the gallery.
fn drive_home(mut s: SessionState, mut now: u64) -> Result<u64, String> {
    let t = s.timings();
    let horizon = (t.countdown + t.capture_timeout + t.reset).as_millis() as u64;
    for _ in 0..4 {
        match s.phase() {
            Phase::Consent => return Ok(now),
            Phase::Gallery => {
                s = s.advance(Event::ArtworkSelected("x".into()), Timestamp(now)).state;
                s = s.advance(Event::StartCountdown, Timestamp(now)).state;
            }
            _ => {
                now += horizon;
                s = s.advance(Event::Tick, Timestamp(now)).state;
            }
        }
    }
    Err(format!("stuck in {}", s.phase()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn random_schedules_keep_invariants_and_never_stick(steps in proptest::collection::vec(arb_step(), 1..60)) {
        let timings = SessionTimings::default();
        let mut s = fresh();
        let mut now = 0u64;
        for (i, (step, dt)) in steps.iter().enumerate() {
            now += dt;
            let before = s.clone();
            let a = s.advance(event(step, i), Timestamp(now));
            if a.rejection.is_some() {
                // A refused event still lets time pass, exactly like a tick.
                let ticked = before.advance(Event::Tick, Timestamp(now));
                prop_assert_eq!(a.state.phase(), ticked.state.phase());
                prop_assert_eq!(&a.entered, &ticked.entered);
            }
            s = a.state;
            prop_assert!(s.check_invariants().is_ok(), "{:?}", s.check_invariants());
            if a.entered.last() == Some(&Phase::Countdown) {
                prop_assert_eq!(s.countdown_deadline(), Some(Timestamp(now).saturating_add(timings.countdown)));
            }
            if matches!(step, Step::Capture) && a.rejection.is_none() {
                prop_assert_eq!(s.reset_deadline(), Some(Timestamp(now).saturating_add(timings.reset)));
            }
            if let Some(d) = s.countdown_deadline() {
                prop_assert!(Timestamp(now) < d, "countdown overdue after {:?}", step);
            }
            if let Some(d) = s.reset_deadline() {
                prop_assert!(Timestamp(now) < d, "reset overdue after {:?}", step);
            }
            if let Some(d) = s.capture_deadline() {
                prop_assert!(Timestamp(now) < d, "capture overdue after {:?}", step);
            }
        }
        prop_assert!(drive_home(s, now).is_ok());
        let back = fresh().advance(Event::Tick, Timestamp(now)).state;
        prop_assert_eq!(back.phase(), Phase::Consent);
    }

    #[test]
    fn clock_regression_is_rejected_without_change(back in 1u64..10_000) {
        let s = go(&fresh(), Event::ConsentGiven, 20_000);
        let a = s.advance(Event::Tick, Timestamp(20_000 - back));
        prop_assert!(a.rejection.is_some());
        prop_assert_eq!(a.state, s);
    }
}

fn words(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

#[test]
fn ten_thousand_codes_from_200_by_200_lists_are_distinct() {
    let mut g = CodeGenerator::new(Wordlists::new(words("k", 200), words("o", 200)).unwrap(), 42);
    let mut seen = HashSet::new();
    for i in 0..10_000u64 {
        let c = g.issue(Timestamp(i)).unwrap();
        assert!(seen.insert(c.text()), "duplicate {}", c.text());
    }
    assert_eq!(g.issued_count(), 10_000);
}

#[test]
fn two_by_two_lists_exhaust_at_exactly_four() {
    let mut g = CodeGenerator::new(Wordlists::new(words("a", 2), words("b", 2)).unwrap(), 7);
    let issued: HashSet<String> = (0..4).map(|i| g.issue(Timestamp(i)).unwrap().text()).collect();
    assert_eq!(issued.len(), 4);
    assert!(matches!(g.issue(Timestamp(5)), Err(CodeError::Exhausted { capacity: 4 })));
}

#[test]
fn reserved_codes_are_never_reissued() {
    let lists = Wordlists::new(words("a", 3), words("b", 3)).unwrap();
    let mut g = CodeGenerator::new(lists, 1);
    assert_eq!(g.reserve_where(|t| t.starts_with("a0-") || t == "a1-b1"), 4);
    let rest: HashSet<String> = (0..5).map(|i| g.issue(Timestamp(i)).unwrap().text()).collect();
    assert!(rest.iter().all(|t| !t.starts_with("a0-") && t != "a1-b1"));
    assert!(g.issue(Timestamp(9)).is_err());
}

#[test]
fn capture_after_the_timeout_is_refused() {
    let s = go(&fresh(), Event::ConsentGiven, 0);
    let s = go(&s, Event::ArtworkSelected("a".into()), 0);
    let s = go(&s, Event::StartCountdown, 0);
    let a = s.advance(Event::CaptureTaken(code()), Timestamp(40 * S));
    assert!(a.rejection.is_some());
    assert_eq!(a.entered, [Phase::Capturing, Phase::Consent]);
    assert_eq!(a.state.code(), None);
    assert!(a.state.check_invariants().is_ok());
}
