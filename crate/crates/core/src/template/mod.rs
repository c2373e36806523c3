//! The any-to-many instruction template: tokenizer, parsers, canonical
//! serializers, and task-mode validation.
//!
//! Questions look like
//! `[INPUT] [SMARTMULTIMODAL] Please generate ...`, optionally wrapping
//! one input asset as `<IMAGE>{asset:img_0007}</IMAGE>`. Answers look
//! like `[OUT] text <IMAGE> caption [IMAGE_0] </IMAGE> ... [END]`, where
//! each begin-end pair forms one modality group carrying a T-Prompt and
//! an M-Prompt; groups concatenate in any order and multiplicity.

pub mod error;
pub mod parser;
pub mod serialize;
pub mod tokenizer;
pub mod types;
pub mod validate;

pub use error::{ParseError, ParseErrorKind};
pub use parser::{parse_answer, parse_question};
pub use serialize::{serialize_answer, serialize_question, EmptyTPrompt};
pub use tokenizer::{tokenize, Signal, Token, TokenKind};
pub use types::{AnswerMessage, InputAsset, Modality, ModalityGroup, QuestionMessage, TaskPrompt};
pub use validate::{validate_answer_against_task, TaskViolation};
