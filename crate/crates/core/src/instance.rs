//! Parsing of model completions against the prompt text protocol.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::prompt::{INPUT_LABEL, INSTRUCTION_LABEL, OUTPUT_LABEL, STOP_SEQUENCE};
use crate::task::TaskType;

/// Why a completion did not yield a usable instance. Exactly one per rejection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectionReason {
    MissingOutput,
    MissingInput,
    EmptyField,
    StrayInputInTypeB,
    Truncated,
    LabelOrderViolation,
}

impl RejectionReason {
    pub const ALL: [RejectionReason; 6] = [
        RejectionReason::MissingOutput,
        RejectionReason::MissingInput,
        RejectionReason::EmptyField,
        RejectionReason::StrayInputInTypeB,
        RejectionReason::Truncated,
        RejectionReason::LabelOrderViolation,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RejectionReason::MissingOutput => "missing_output",
            RejectionReason::MissingInput => "missing_input",
            RejectionReason::EmptyField => "empty_field",
            RejectionReason::StrayInputInTypeB => "stray_input_in_type_b",
            RejectionReason::Truncated => "truncated",
            RejectionReason::LabelOrderViolation => "label_order_violation",
        }
    }
}

impl fmt::Display for RejectionReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A well-formed instance. Type A instances always carry a nonempty input;
/// type B instances never do. The output is never blank.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedInstance {
    pub instruction: String,
    pub input: Option<String>,
    pub output: String,
    pub raw: String,
}

impl ParsedInstance {
    pub fn task_type(&self) -> TaskType {
        TaskType::of_input(self.input.as_deref())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Label {
    Instruction,
    Input,
    Output,
}

/// Returns the label a line starts with (case-insensitive, leading
/// whitespace ignored) and the text after it.
fn split_label(line: &str) -> Option<(Label, &str)> {
    let trimmed = line.trim_start();
    [
        (Label::Instruction, INSTRUCTION_LABEL),
        (Label::Input, INPUT_LABEL),
        (Label::Output, OUTPUT_LABEL),
    ]
    .into_iter()
    .find_map(|(label, text)| {
        let head = trimmed.get(..text.len())?;
        head.eq_ignore_ascii_case(text)
            .then(|| (label, &trimmed[text.len()..]))
    })
}

fn before_stop(raw: &str) -> &str {
    raw.find(STOP_SEQUENCE).map_or(raw, |i| &raw[..i])
}

fn join_trimmed(first: &str, rest: &[&str]) -> String {
    let mut out = String::from(first);
    for line in rest {
        out.push('\n');
        out.push_str(line);
    }
    out.trim().to_string()
}

/// Parses the completion of an instance cue.
///
/// For type A the cue ends at `input:`: everything before the first line that
/// starts with `output:` is the input and the rest is the output. For type B
/// the cue ends at `output:` and the whole completion is the output. Text
/// after the stop sequence is ignored.
pub fn parse_instance(
    instruction: &str,
    raw: &str,
    task_type: TaskType,
) -> Result<ParsedInstance, RejectionReason> {
    let body = before_stop(raw);
    let lines: Vec<&str> = body.split('\n').collect();
    let labels: Vec<Option<(Label, &str)>> = lines.iter().map(|l| split_label(l)).collect();

    let (input, output) = match task_type {
        TaskType::A => {
            let out_idx = labels
                .iter()
                .position(|l| matches!(l, Some((Label::Output, _))))
                .ok_or(RejectionReason::MissingOutput)?;
            if labels[..out_idx].iter().skip(1).any(Option::is_some)
                || labels[out_idx + 1..].iter().any(Option::is_some)
            {
                return Err(RejectionReason::LabelOrderViolation);
            }
            let input = match out_idx {
                0 => String::new(),
                _ => join_trimmed(lines[0], &lines[1..out_idx]),
            };
            let (_, first_out) = labels[out_idx].expect("position found a label");
            let output = join_trimmed(first_out, &lines[out_idx + 1..]);
            if input.is_empty() {
                return Err(RejectionReason::MissingInput);
            }
            (Some(input), output)
        }
        TaskType::B => {
            if labels.iter().any(|l| matches!(l, Some((Label::Input, _)))) {
                return Err(RejectionReason::StrayInputInTypeB);
            }
            if labels.iter().any(Option::is_some) {
                return Err(RejectionReason::LabelOrderViolation);
            }
            (None, body.trim().to_string())
        }
    };
    if output.is_empty() {
        return Err(RejectionReason::EmptyField);
    }
    Ok(ParsedInstance {
        instruction: instruction.trim().to_string(),
        input,
        output,
        raw: raw.to_string(),
    })
}

/// Pulls one candidate instruction out of an instruction-generation completion.
///
/// The candidate ends at the stop sequence, the first blank line, or the next
/// line that starts a new `instruction:` record. A leading `instruction:` label
/// is stripped. Returns `None` when nothing is left.
pub fn extract_instruction(completion: &str) -> Option<String> {
    let body = before_stop(completion);
    let mut kept: Vec<&str> = Vec::new();
    for (i, line) in body.split('\n').enumerate() {
        let label = split_label(line);
        let text = match label {
            Some((Label::Instruction, rest)) if i == 0 => rest,
            Some((Label::Instruction, _)) => break,
            _ if line.trim().is_empty() && !kept.is_empty() => break,
            _ => line,
        };
        if !(kept.is_empty() && text.trim().is_empty()) {
            kept.push(text);
        }
    }
    let candidate = kept.join("\n").trim().to_string();
    (!candidate.is_empty()).then_some(candidate)
}
