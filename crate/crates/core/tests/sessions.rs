use std::time::Duration;

use sqlclarify_core::orchestrator::session::{Phase, SessionState, SessionStore, SessionView};
use sqlclarify_core::orchestrator::{Config, OrchestratorError, Pipeline};
use sqlclarify_core::question_gen::{Answer, MultiChoiceQuestion, OptionKind};
use sqlclarify_core::sql::{canonical_equal, parse_sql};

const PETS_QUESTION: &str = "find the lname of student who has a cat aged 3";
const PETS_GOLD: &str = "SELECT T1.lname FROM student AS T1 JOIN has_pet AS T2 ON T1.stuid = T2.stuid \
     JOIN pet AS T3 ON T2.petid = T3.petid WHERE T3.pettype = 'cat' AND T3.pet_age = 3";

fn pipeline() -> Pipeline {
    Pipeline::from_config(&Config::default()).expect("bundled artifacts load")
}

fn option_of(q: &MultiChoiceQuestion, pick: impl Fn(&sqlclarify_core::question_gen::CandidateOption) -> bool) -> usize {
    q.options.iter().position(pick).unwrap_or_else(|| panic!("no such option for {:?}", q.token))
}

fn none_of(q: &MultiChoiceQuestion) -> usize {
    option_of(q, |o| o.kind == OptionKind::None)
}

fn started(p: &Pipeline, question: &str) -> SessionState {
    let mut s = SessionState::new("t", "pets", question);
    s.start(p).unwrap();
    s
}

#[test]
fn pets_question_is_repaired_by_two_answers() {
    let p = pipeline();
    let mut s = started(&p, PETS_QUESTION);
    assert_eq!(s.phase, Phase::Asking);
    let tokens: Vec<&str> = s.questions.iter().map(|q| q.token.as_str()).collect();
    assert_eq!(tokens, ["cat", "aged"]);

    let value = option_of(&s.questions[0], |o| o.kind == OptionKind::Value);
    s.submit_answer(&p, Answer { question: 0, option: value }).unwrap();
    assert_eq!(s.phase, Phase::Asking);
    assert!(s.sql_after.is_none());

    let pet_age = option_of(&s.questions[1], |o| o.schema_name() == Some("pet_age"));
    s.submit_answer(&p, Answer { question: 1, option: pet_age }).unwrap();
    assert_eq!(s.phase, Phase::Finalized);
    assert_eq!(s.modified_question.as_deref(), Some("find the lname of student who has a 'cat' whose pet_age is 3"));
    let schema = p.schema("pets").unwrap();
    assert!(canonical_equal(s.sql_after.as_ref().unwrap(), &parse_sql(PETS_GOLD, schema).unwrap()));
}

#[test]
fn all_none_keeps_question_and_sql() {
    let p = pipeline();
    let mut s = started(&p, PETS_QUESTION);
    while let Some((i, q)) = s.current() {
        let answer = Answer { question: i, option: none_of(q) };
        s.submit_answer(&p, answer).unwrap();
    }
    assert_eq!(s.modified_question.as_deref(), Some(PETS_QUESTION));
    assert!(canonical_equal(s.sql_after.as_ref().unwrap(), s.sql_before.as_ref().unwrap()));
}

#[test]
fn covering_answer_skips_the_other_question() {
    let p = pipeline();
    let mut s = started(&p, PETS_QUESTION);
    let pet_age = option_of(&s.questions[0], |o| o.schema_name() == Some("pet_age"));
    s.submit_answer(&p, Answer { question: 0, option: pet_age }).unwrap();
    assert_eq!(s.skipped, [1]);
    assert_eq!(s.phase, Phase::Finalized);
    let view = SessionView::from(&s);
    assert_eq!((view.answered, view.total), (1, 1));
}

#[test]
fn no_uncertain_tokens_finalizes_at_once() {
    let mut p = pipeline();
    p.artifacts.threshold = f64::NEG_INFINITY;
    let s = started(&p, PETS_QUESTION);
    assert_eq!(s.phase, Phase::Finalized);
    assert!(s.questions.is_empty());
    assert_eq!(s.modified_question.as_deref(), Some(PETS_QUESTION));
    assert_eq!(s.sql_after, s.sql_before);
}

#[test]
fn invalid_answers_are_rejected_without_change() {
    let p = pipeline();
    let mut s = started(&p, PETS_QUESTION);
    let before = s.clone();
    assert!(matches!(
        s.submit_answer(&p, Answer { question: 1, option: 0 }),
        Err(OrchestratorError::WrongQuestion { given: 1, expected: Some(0) })
    ));
    assert!(matches!(s.submit_answer(&p, Answer { question: 0, option: 99 }), Err(OrchestratorError::BadOption { index: 99, .. })));
    assert_eq!(s, before);

    while let Some((i, q)) = s.current() {
        let answer = Answer { question: i, option: none_of(q) };
        s.submit_answer(&p, answer).unwrap();
    }
    assert!(matches!(s.submit_answer(&p, Answer { question: 0, option: 0 }), Err(OrchestratorError::Finalized(_))));
    assert!(matches!(s.start(&p), Err(OrchestratorError::Finalized(_))));
}

#[test]
fn same_answers_same_result() {
    let p = pipeline();
    let run = |choice: usize| {
        let mut s = started(&p, PETS_QUESTION);
        while let Some((i, q)) = s.current() {
            let answer = Answer { question: i, option: choice.min(q.options.len() - 1) };
            s.submit_answer(&p, answer).unwrap();
        }
        (s.modified_question, s.sql_after)
    };
    for choice in 0..5 {
        assert_eq!(run(choice), run(choice));
    }
}

#[test]
fn unknown_database_fails_the_session() {
    let p = pipeline();
    let mut s = SessionState::new("t", "nowhere", "how many students");
    assert!(matches!(s.start(&p), Err(OrchestratorError::Gateway(_))));
    assert_eq!(s.phase, Phase::Created);
}

#[test]
fn store_round_trip_and_log_replay() {
    let p = pipeline();
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("sessions.jsonl");
    let id = {
        let store = SessionStore::open(Duration::from_secs(60), &log).unwrap();
        let s = store.create(&p, "pets", PETS_QUESTION).unwrap();
        assert_eq!(store.get(&s.id).unwrap(), s);
        let none = none_of(&s.questions[0]);
        let after = store.answer(&p, &s.id, Answer { question: 0, option: none }).unwrap();
        assert_eq!(after.answers.len(), 1);
        assert!(store.answer(&p, &s.id, Answer { question: 0, option: 0 }).is_err());
        assert!(matches!(store.get("missing"), Err(OrchestratorError::UnknownSession(_))));
        s.id
    };
    let store = SessionStore::open(Duration::from_secs(60), &log).unwrap();
    assert_eq!(store.len(), 1);
    let restored = store.get(&id).unwrap();
    assert_eq!(restored.answers.len(), 1);
    assert_eq!(restored.current().map(|(i, _)| i), Some(1));
    let none = none_of(&restored.questions[1]);
    let done = store.answer(&p, &id, Answer { question: 1, option: none }).unwrap();
    assert_eq!(done.phase, Phase::Finalized);
}

#[test]
fn sessions_expire() {
    let p = pipeline();
    let store = SessionStore::new(Duration::from_millis(20));
    let s = store.create(&p, "pets", PETS_QUESTION).unwrap();
    std::thread::sleep(Duration::from_millis(40));
    assert!(matches!(store.get(&s.id), Err(OrchestratorError::UnknownSession(_))));
    assert!(store.is_empty());
}
