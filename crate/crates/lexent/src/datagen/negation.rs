//! Rule-based negation for label-flipping augmentation.
//!
//! Rules live in an editable JSON-lines data file. The first matching rule
//! in priority order is applied exactly once, at its leftmost match; the
//! caller flips the pair label on success. De-negation rules ("may not" ->
//! "may") take the low priorities so that an already negated sentence is
//! un-negated rather than doubled.

use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::DatagenError;
use crate::corpus::Language;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NegationRule {
    pub priority: i32,
    pub language: Language,
    pub pattern: String,
    pub replacement: String,
}

fn parse_rules(text: &str, origin: &str) -> Result<Vec<NegationRule>, DatagenError> {
    let mut rules = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rule: NegationRule = serde_json::from_str(line)
            .map_err(|e| DatagenError::BadRuleFile(format!("{origin}:{}: {e}", i + 1)))?;
        if rule.pattern.is_empty() {
            return Err(DatagenError::BadRuleFile(format!(
                "{origin}:{}: empty pattern",
                i + 1
            )));
        }
        rules.push(rule);
    }
    let mut seen: Vec<(Language, i32)> = rules.iter().map(|r| (r.language, r.priority)).collect();
    seen.sort();
    for w in seen.windows(2) {
        if w[0] == w[1] {
            return Err(DatagenError::BadRuleFile(format!(
                "{origin}: duplicate priority {} for {:?}",
                w[0].1, w[0].0
            )));
        }
    }
    rules.sort_by_key(|r| r.priority);
    Ok(rules)
}

/// Load rules from a JSON-lines file and sort them by priority.
pub fn load_negation_rules(path: &Path) -> Result<Vec<NegationRule>, DatagenError> {
    let text = std::fs::read_to_string(path).map_err(|source| DatagenError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_rules(&text, &path.display().to_string())
}

/// The bundled starter rule set (English).
pub fn builtin_negation_rules() -> &'static [NegationRule] {
    static RULES: OnceLock<Vec<NegationRule>> = OnceLock::new();
    RULES.get_or_init(|| {
        parse_rules(include_str!("../../data/negation_rules.jsonl"), "builtin")
            .expect("bundled rule file is valid")
    })
}

/// Rules for one language, still in priority order.
pub fn rules_for(rules: &[NegationRule], language: Language) -> Vec<NegationRule> {
    rules
        .iter()
        .filter(|r| r.language == language)
        .cloned()
        .collect()
}

/// A character that extends a space-delimited word. CJK characters do not
/// count: unsegmented Japanese has no word boundaries, so CJK-edged
/// patterns match literally.
fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() && !crate::lexical::is_cjk(c)
}

/// Leftmost occurrence of `pattern` in `text` whose Latin-script word
/// edges sit at word boundaries.
fn find_bounded(text: &str, pattern: &str) -> Option<usize> {
    let first_word = is_word_char(pattern.chars().next()?);
    let last_word = is_word_char(pattern.chars().last()?);
    let mut from = 0;
    while let Some(off) = text[from..].find(pattern) {
        let at = from + off;
        let end = at + pattern.len();
        let before_ok =
            !first_word || text[..at].chars().next_back().is_none_or(|c| !is_word_char(c));
        let after_ok =
            !last_word || text[end..].chars().next().is_none_or(|c| !is_word_char(c));
        if before_ok && after_ok {
            return Some(at);
        }
        from = at
            + text[at..]
                .chars()
                .next()
                .map(char::len_utf8)
                .unwrap_or(1);
    }
    None
}

/// Apply the first matching rule (lowest priority number, leftmost match)
/// exactly once. Returns the rewritten text and the priority of the rule
/// used, or `None` when no rule matches. `rules` must be sorted by
/// priority, as produced by the loaders here.
pub fn negate(text: &str, rules: &[NegationRule]) -> Option<(String, i32)> {
    for rule in rules {
        if let Some(at) = find_bounded(text, &rule.pattern) {
            let mut out = String::with_capacity(text.len());
            out.push_str(&text[..at]);
            out.push_str(&rule.replacement);
            out.push_str(&text[at + rule.pattern.len()..]);
            return Some((out, rule.priority));
        }
    }
    None
}
