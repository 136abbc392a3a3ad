//! Interactive repair of text-to-SQL predictions: restate the predicted
//! query, align it with the question, ask about the tokens the parser
//! missed, rewrite the question from the answers and parse again.

pub mod aligner;
pub mod encoder;
pub mod gateway;
pub mod nl_modifier;
pub mod orchestrator;
pub mod question_gen;
pub mod restater;
pub mod schema;
pub mod sql;
pub mod text;
