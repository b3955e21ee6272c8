//! Prompt templates and the parsers for LVLM replies.

use serde::{Deserialize, Serialize};

pub const SYSTEM_PROMPT: &str =
    "You are an advanced image understanding assistant. You will be given an image and a question about it.";

pub const DECOMPOSITION_TEMPLATE: &str = "Task: List objects mentioned in text in List format.\n\
Input text: {question}\n\
Action: What objects are mentioned in original text? List separated by commas. For example, from \"person with white trousers on the left or right side of the person in blue\", output \"[\"person with white trousers\", \"person in blue\"]\".";

pub const EVIDENCE_JUDGMENT_TEMPLATE: &str = "I will provide you an image and a **question**:\n\
{question}, please firstly determine whether the image contains the clues for answering the question or not (answer with **Yes** or **No**); then give the evidence of your decision.";

pub const VIEW_COMPLETENESS_TEMPLATE: &str = "Question: Does the image fully contain every object in the list {target_list}? Please treat \"fully contain\" as entirely within the frame (not truncated by image boundaries). Please firstly answer the question with **Yes** or **No**; then give the evidence of your decision. For example, if yes, list the evidence of each object (e.g., object: bbox [x1, y1, x2, y2] or a clear region description); if no, list the missing objects by name.";

pub const REASONING_TEMPLATE: &str = "Question: {question}\nAnswer with the option letter.";

/// Tokens inspected when reading a Yes/No verdict.
pub const VERDICT_WINDOW: usize = 10;

pub fn decomposition_prompt(question: &str) -> String {
    DECOMPOSITION_TEMPLATE.replace("{question}", question)
}

pub fn evidence_judgment_prompt(question: &str) -> String {
    EVIDENCE_JUDGMENT_TEMPLATE.replace("{question}", question)
}

pub fn view_completeness_prompt(targets: &[String]) -> String {
    VIEW_COMPLETENESS_TEMPLATE.replace("{target_list}", &format_object_list(targets))
}

/// `question` is the full multiple-choice text, options included.
pub fn reasoning_prompt(question: &str) -> String {
    REASONING_TEMPLATE.replace("{question}", question)
}

/// `["a", "b"]`, the same list shape the decomposition prompt asks for.
pub fn format_object_list(items: &[String]) -> String {
    let quoted: Vec<String> = items.iter().map(|s| format!("\"{s}\"")).collect();
    format!("[{}]", quoted.join(", "))
}

/// Parse a bracketed, comma-separated object list. Quotes and surrounding
/// whitespace are stripped from each entry. `None` if there is no bracket
/// pair or the list is empty.
pub fn parse_object_list(text: &str) -> Option<Vec<String>> {
    let open = text.find('[')?;
    let close = open + text[open..].rfind(']')?;
    let inner = &text[open + 1..close];
    let quote_chars: &[char] = &['"', '\'', '`', '“', '”', '‘', '’', '[', ']'];
    let items: Vec<String> = inner
        .split(',')
        .map(|s| s.trim().trim_matches(quote_chars).trim().to_string())
        .filter(|s| !s.is_empty())
        .collect();
    (!items.is_empty()).then_some(items)
}

/// A binary LVLM judgment.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgeVerdict {
    pub affirmed: bool,
    /// Neither "yes" nor "no" was found in the verdict window.
    pub malformed: bool,
    pub rationale: String,
}

/// Affirmed iff a "yes" token comes before any "no" token among the first
/// [`VERDICT_WINDOW`] whitespace-separated tokens (case-insensitive,
/// punctuation ignored). Anything else reads as "no".
pub fn parse_verdict(text: &str) -> JudgeVerdict {
    let mut affirmed = None;
    for token in text.split_whitespace().take(VERDICT_WINDOW) {
        let word: String = token
            .chars()
            .filter(|c| c.is_alphanumeric())
            .flat_map(char::to_lowercase)
            .collect();
        match word.as_str() {
            "yes" => {
                affirmed = Some(true);
                break;
            }
            "no" => {
                affirmed = Some(false);
                break;
            }
            _ => {}
        }
    }
    JudgeVerdict {
        affirmed: affirmed.unwrap_or(false),
        malformed: affirmed.is_none(),
        rationale: text.to_string(),
    }
}

/// First standalone option letter A–D (case-insensitive), uppercased.
pub fn extract_option_letter(text: &str) -> Option<char> {
    let chars: Vec<char> = text.chars().collect();
    for (i, &c) in chars.iter().enumerate() {
        let upper = c.to_ascii_uppercase();
        if !('A'..='D').contains(&upper) {
            continue;
        }
        let before_ok = i == 0 || !chars[i - 1].is_alphanumeric();
        let after_ok = i + 1 == chars.len() || !chars[i + 1].is_alphanumeric();
        if before_ok && after_ok {
            return Some(upper);
        }
    }
    None
}
