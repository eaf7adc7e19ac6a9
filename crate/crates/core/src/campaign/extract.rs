// SPDX-License-Identifier: Apache-2.0

//! Pulling Verilog out of free-form model responses.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Extraction {
    Code { text: String },
    Failed { reason: String },
}

const VERILOG_LABELS: &[&str] = &["verilog", "systemverilog", "sv", "v"];

struct Fence<'a> {
    label: &'a str,
    body: &'a str,
}

/// Complete ``` fences in order of appearance. An unclosed fence ends the scan.
fn fences(text: &str) -> Vec<Fence<'_>> {
    let mut out = Vec::new();
    let mut rest = text;
    while let Some(open) = rest.find("```") {
        let after = &rest[open + 3..];
        let Some(eol) = after.find('\n') else { break };
        let label = after[..eol].trim();
        let body_start = &after[eol + 1..];
        let close = if body_start.starts_with("```") {
            Some(0)
        } else {
            body_start.find("\n```").map(|i| i + 1)
        };
        let Some(close) = close else { break };
        out.push(Fence {
            label,
            body: &body_start[..close],
        });
        rest = &body_start[close + 3..];
    }
    out
}

fn word_at(text: &str, at: usize, word: &str) -> bool {
    let bytes = text.as_bytes();
    let ident = |b: u8| b.is_ascii_alphanumeric() || b == b'_' || b == b'$';
    text[at..].starts_with(word)
        && (at == 0 || !ident(bytes[at - 1]))
        && bytes.get(at + word.len()).is_none_or(|&b| !ident(b))
}

fn find_word(text: &str, word: &str, from_end: bool) -> Option<usize> {
    let hits = text.match_indices(word).map(|(i, _)| i).filter(|&i| word_at(text, i, word));
    if from_end {
        hits.last()
    } else {
        hits.into_iter().next()
    }
}

/// First Verilog-labelled fence, else first fence of any label, else the
/// span from the first `module` to the last `endmodule`.
pub fn extract_code(raw: &str) -> Extraction {
    let fs = fences(raw);
    let labelled = fs.iter().find(|f| {
        let l = f.label.to_ascii_lowercase();
        VERILOG_LABELS.contains(&l.as_str())
    });
    if let Some(f) = labelled.or(fs.first()) {
        return Extraction::Code {
            text: f.body.to_string(),
        };
    }
    if let (Some(start), Some(end)) = (find_word(raw, "module", false), find_word(raw, "endmodule", true)) {
        if end > start {
            return Extraction::Code {
                text: raw[start..end + "endmodule".len()].to_string(),
            };
        }
    }
    Extraction::Failed {
        reason: "no code found".into(),
    }
}
