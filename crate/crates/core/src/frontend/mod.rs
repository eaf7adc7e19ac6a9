// SPDX-License-Identifier: Apache-2.0

//! Lexical-level Verilog handling: comment stripping, module enumeration,
//! top-module resolution and the dependency-edge proxy used for task
//! complexity weights.
//!
//! Nothing here is a full parser. Everything operates on tokens, which is
//! enough for the harness and keeps behavior identical across generate
//! blocks and plain module bodies.

mod edges;
mod lexer;

use std::collections::BTreeMap;
use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use lexer::TokKind;

pub use edges::count_dependency_edges;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FrontendError {
    #[error("unterminated block comment opened at byte {offset}")]
    UnterminatedComment { offset: usize },
    #[error("unterminated attribute opened at byte {offset}")]
    UnterminatedAttribute { offset: usize },
    #[error("unterminated string literal at byte {offset}")]
    UnterminatedString { offset: usize },
    #[error("`module` keyword at byte {offset} is not followed by an identifier")]
    MalformedDeclaration { offset: usize },
    #[error("malformed source at byte {offset}: {reason}")]
    Malformed { offset: usize, reason: String },
    #[error("no module declaration found")]
    NoTopModule,
    #[error("cannot normalize an empty set of tasks")]
    EmptyCorpus,
}

/// A piece of Verilog text plus a label saying where it came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerilogSource {
    pub text: String,
    pub origin: String,
}

impl VerilogSource {
    pub fn new(text: impl Into<String>, origin: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            origin: origin.into(),
        }
    }

    /// Sources admitted to the gate pipeline must contain something other
    /// than whitespace.
    pub fn is_blank(&self) -> bool {
        self.text.trim().is_empty()
    }

    fn with_text(&self, text: String) -> Self {
        Self {
            text,
            origin: self.origin.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModuleDecl {
    pub name: String,
    /// Byte range of `module ... endmodule` in the stripped text.
    pub span: Range<usize>,
}

impl ModuleDecl {
    pub fn canonical_name(&self) -> &str {
        canonical_identifier(&self.name)
    }
}

/// `\foo` and `foo` name the same object when `foo` is a legal simple name.
pub fn canonical_identifier(name: &str) -> &str {
    name.strip_prefix('\\').unwrap_or(name).trim_end()
}

/// True for simple (`[A-Za-z_][A-Za-z0-9_$]*`) or escaped (`\` followed by
/// printable non-whitespace) identifiers.
pub fn is_identifier(name: &str) -> bool {
    if let Some(rest) = name.strip_prefix('\\') {
        return !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_graphic());
    }
    let mut bytes = name.bytes();
    match bytes.next() {
        Some(b) if b.is_ascii_alphabetic() || b == b'_' => {}
        _ => return false,
    }
    bytes.all(|b| b.is_ascii_alphanumeric() || b == b'_' || b == b'$')
}

/// Removes `//` and `/* */` comments.
///
/// Each comment region is replaced by a single space unless it already
/// touches whitespace (or the start/end of text), in which case it is
/// dropped outright. Token boundaries survive either way and stripping is
/// idempotent. String literals and escaped identifiers are copied verbatim.
pub fn strip_comments(src: &VerilogSource) -> Result<VerilogSource, FrontendError> {
    let text = &src.text;
    let bytes = text.as_bytes();
    let mut out = String::with_capacity(text.len());
    let mut i = 0;
    let mut copied_from = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'"' => i = skip_string(bytes, i),
            b'\\' => i = skip_escaped(bytes, i),
            b'/' if bytes.get(i + 1) == Some(&b'/') => {
                out.push_str(&text[copied_from..i]);
                let end = memchr(bytes, i, b'\n').unwrap_or(bytes.len());
                push_separator(&mut out, bytes.get(end).copied());
                i = end;
                copied_from = i;
            }
            b'/' if bytes.get(i + 1) == Some(&b'*') => {
                out.push_str(&text[copied_from..i]);
                let end = find(bytes, i + 2, b"*/")
                    .ok_or(FrontendError::UnterminatedComment { offset: i })?
                    + 2;
                push_separator(&mut out, bytes.get(end).copied());
                i = end;
                copied_from = i;
            }
            _ => i += 1,
        }
    }
    out.push_str(&text[copied_from..]);
    Ok(src.with_text(out))
}

/// Strips `(* ... *)` attribute instances using the same replacement rule as
/// comments. `@(*)` and `(*)` are sensitivity lists, not attributes.
pub fn strip_attributes(src: &VerilogSource) -> Result<VerilogSource, FrontendError> {
    let text = &src.text;
    let bytes = text.as_bytes();
    let mut out = String::with_capacity(text.len());
    let mut i = 0;
    let mut copied_from = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'"' => i = skip_string(bytes, i),
            b'\\' => i = skip_escaped(bytes, i),
            b'(' if bytes.get(i + 1) == Some(&b'*')
                && bytes.get(i + 2) != Some(&b')')
                && !preceded_by_at(bytes, i) =>
            {
                out.push_str(&text[copied_from..i]);
                let end = find(bytes, i + 2, b"*)")
                    .ok_or(FrontendError::UnterminatedAttribute { offset: i })?
                    + 2;
                push_separator(&mut out, bytes.get(end).copied());
                i = end;
                copied_from = i;
            }
            _ => i += 1,
        }
    }
    out.push_str(&text[copied_from..]);
    Ok(src.with_text(out))
}

/// Comments and attributes removed; the form every scanner below expects.
pub fn scrub(src: &VerilogSource) -> Result<VerilogSource, FrontendError> {
    strip_attributes(&strip_comments(src)?)
}

fn push_separator(out: &mut String, next: Option<u8>) {
    let prev_ws = out.as_bytes().last().is_none_or(u8::is_ascii_whitespace);
    let next_ws = next.is_none_or(|b| b.is_ascii_whitespace());
    if !prev_ws && !next_ws {
        out.push(' ');
    }
}

fn preceded_by_at(bytes: &[u8], i: usize) -> bool {
    bytes[..i]
        .iter()
        .rev()
        .find(|b| !b.is_ascii_whitespace())
        .is_some_and(|b| *b == b'@')
}

// Strings end at the closing quote or, unterminated, at end of line.
fn skip_string(bytes: &[u8], start: usize) -> usize {
    let mut i = start + 1;
    while i < bytes.len() {
        match bytes[i] {
            b'\\' => i += 2,
            b'"' => return i + 1,
            b'\n' => return i,
            _ => i += 1,
        }
    }
    bytes.len()
}

fn skip_escaped(bytes: &[u8], start: usize) -> usize {
    let mut i = start + 1;
    while i < bytes.len() && !bytes[i].is_ascii_whitespace() {
        i += 1;
    }
    i
}

fn memchr(bytes: &[u8], from: usize, needle: u8) -> Option<usize> {
    bytes[from..].iter().position(|b| *b == needle).map(|p| p + from)
}

fn find(bytes: &[u8], from: usize, needle: &[u8]) -> Option<usize> {
    if from > bytes.len() {
        return None;
    }
    bytes[from..]
        .windows(needle.len())
        .position(|w| w == needle)
        .map(|p| p + from)
}

/// Enumerates `module` declarations in textual order. Expects scrubbed text.
pub fn list_modules(src: &VerilogSource) -> Result<Vec<ModuleDecl>, FrontendError> {
    let lexed = lexer::lex(&src.text);
    let toks = &lexed.tokens;
    let keyword_positions: Vec<usize> = toks
        .iter()
        .enumerate()
        .filter(|(_, t)| t.kind == TokKind::Ident && t.text == "module")
        .map(|(i, _)| i)
        .collect();

    let mut decls = Vec::with_capacity(keyword_positions.len());
    for (n, &kw) in keyword_positions.iter().enumerate() {
        let mut j = kw + 1;
        while toks
            .get(j)
            .is_some_and(|t| t.kind == TokKind::Ident && matches!(t.text, "automatic" | "static"))
        {
            j += 1;
        }
        let name = match toks.get(j) {
            Some(t) if t.is_name() => t.text.to_string(),
            _ => {
                return Err(FrontendError::MalformedDeclaration {
                    offset: toks[kw].start,
                })
            }
        };
        let limit = keyword_positions.get(n + 1).copied().unwrap_or(toks.len());
        let end = toks[j..limit]
            .iter()
            .find(|t| t.kind == TokKind::Ident && t.text == "endmodule")
            .map(|t| t.end())
            .unwrap_or_else(|| toks.get(limit).map_or(src.text.len(), |t| t.start));
        decls.push(ModuleDecl {
            name,
            span: toks[kw].start..end,
        });
    }
    Ok(decls)
}

/// Picks the synthesis top: the expected name when declared, else the first
/// declared module. Works on raw source; comments are stripped first so
/// commented-out decoys never win.
pub fn resolve_top_module(src: &VerilogSource, expected: &str) -> Result<String, FrontendError> {
    let modules = list_modules(&scrub(src)?)?;
    let wanted = canonical_identifier(expected);
    if modules.iter().any(|m| m.canonical_name() == wanted) {
        return Ok(expected.to_string());
    }
    modules
        .into_iter()
        .next()
        .map(|m| m.name)
        .ok_or(FrontendError::NoTopModule)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexityWeight {
    pub raw_edges: u64,
    pub weight: f64,
}

pub const MIN_WEIGHT: f64 = 1.0;
pub const MAX_WEIGHT: f64 = 24.0;

/// Linear map of raw edge counts onto `[1, 24]`; a corpus where every task
/// has the same count gets uniform weight 1.
pub fn normalize_complexity(
    raw: &BTreeMap<String, u64>,
) -> Result<BTreeMap<String, ComplexityWeight>, FrontendError> {
    let e_min = *raw.values().min().ok_or(FrontendError::EmptyCorpus)?;
    let e_max = *raw.values().max().ok_or(FrontendError::EmptyCorpus)?;
    let range = (e_max - e_min) as f64;
    Ok(raw
        .iter()
        .map(|(task, &edges)| {
            let weight = if e_max == e_min {
                MIN_WEIGHT
            } else {
                MIN_WEIGHT + (MAX_WEIGHT - MIN_WEIGHT) * (edges - e_min) as f64 / range
            };
            (
                task.clone(),
                ComplexityWeight {
                    raw_edges: edges,
                    weight,
                },
            )
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn src(text: &str) -> VerilogSource {
        VerilogSource::new(text, "test")
    }

    fn stripped(text: &str) -> String {
        strip_comments(&src(text)).unwrap().text
    }

    #[test]
    fn line_comment_removed() {
        assert_eq!(stripped("assign y = a; // note"), "assign y = a; ");
    }

    #[test]
    fn block_comment_between_spaces_removed() {
        assert_eq!(stripped("a /* x */ b"), "a  b");
    }

    #[test]
    fn block_comment_between_tokens_becomes_space() {
        assert_eq!(stripped("a/* x */b"), "a b");
        assert_eq!(stripped("mod/**/ule"), "mod ule");
    }

    #[test]
    fn string_literal_preserved() {
        let s = "x = \"//not a comment\";";
        assert_eq!(stripped(s), s);
        let s = "$display(\"/* nope */\");";
        assert_eq!(stripped(s), s);
    }

    #[test]
    fn escaped_identifier_may_contain_slashes() {
        let s = "wire \\a//b ;";
        assert_eq!(stripped(s), s);
    }

    #[test]
    fn unterminated_block_comment_names_offset() {
        let err = strip_comments(&src("a; /* open")).unwrap_err();
        assert_eq!(err, FrontendError::UnterminatedComment { offset: 3 });
    }

    #[test]
    fn attributes_are_stripped_but_star_sensitivity_is_not() {
        let out = strip_attributes(&src("(* keep *) wire a; always @(*) x = a; always @( * ) y = a;")).unwrap();
        assert_eq!(out.text, " wire a; always @(*) x = a; always @( * ) y = a;");
    }

    #[test]
    fn modules_in_textual_order() {
        let mods = list_modules(&src("module helper(); endmodule module top_module(); endmodule")).unwrap();
        let names: Vec<_> = mods.iter().map(|m| m.name.as_str()).collect();
        assert_eq!(names, ["helper", "top_module"]);
        assert_eq!(mods[0].span, 0..26);
    }

    #[test]
    fn zero_modules() {
        assert!(list_modules(&src("wire a;")).unwrap().is_empty());
    }

    #[test]
    fn module_inside_identifier_is_not_a_keyword() {
        assert!(list_modules(&src("wire my_module_x; assign my_module_x = 1;")).unwrap().is_empty());
    }

    #[test]
    fn module_without_name_is_malformed() {
        let err = list_modules(&src("wire a;\nmodule (a);")).unwrap_err();
        assert_eq!(err, FrontendError::MalformedDeclaration { offset: 8 });
    }

    #[test]
    fn resolves_expected_after_helpers() {
        let s = src("module helper(input a, output y); assign y = a; endmodule\nmodule top_module(input a, output y); helper h(.a(a), .y(y)); endmodule");
        assert_eq!(resolve_top_module(&s, "top_module").unwrap(), "top_module");
    }

    #[test]
    fn resolves_identity_and_fallback() {
        assert_eq!(resolve_top_module(&src("module adder(); endmodule"), "adder").unwrap(), "adder");
        assert_eq!(
            resolve_top_module(&src("module my_adder(); endmodule"), "top_module").unwrap(),
            "my_adder"
        );
    }

    #[test]
    fn commented_out_module_is_ignored() {
        let s = src("// module top_module();\n/* module top_module(); endmodule */\nmodule impl(); endmodule");
        assert_eq!(resolve_top_module(&s, "top_module").unwrap(), "impl");
    }

    #[test]
    fn escaped_name_matches_simple_name() {
        let s = src("module helper(); endmodule module \\top_module (); endmodule");
        assert_eq!(resolve_top_module(&s, "top_module").unwrap(), "top_module");
        let s = src("module \\weird+name (); endmodule");
        assert_eq!(resolve_top_module(&s, "top_module").unwrap(), "\\weird+name");
    }

    #[test]
    fn no_module_is_an_error() {
        assert_eq!(
            resolve_top_module(&src("assign y = a;"), "top_module").unwrap_err(),
            FrontendError::NoTopModule
        );
    }

    #[test]
    fn identifier_rules() {
        assert!(is_identifier("top_module"));
        assert!(is_identifier("_a$b1"));
        assert!(is_identifier("\\a+b"));
        assert!(!is_identifier("1abc"));
        assert!(!is_identifier(""));
        assert!(!is_identifier("a b"));
    }

    fn weights(pairs: &[(&str, u64)]) -> BTreeMap<String, f64> {
        let raw = pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        normalize_complexity(&raw)
            .unwrap()
            .into_iter()
            .map(|(k, w)| (k, w.weight))
            .collect()
    }

    #[test]
    fn degenerate_range_is_uniform() {
        let w = weights(&[("t1", 5), ("t2", 5), ("t3", 5)]);
        assert!(w.values().all(|v| *v == 1.0));
    }

    #[test]
    fn endpoints_and_midpoint() {
        let w = weights(&[("t1", 0), ("t2", 10), ("t3", 20)]);
        assert_eq!(w["t1"], 1.0);
        assert_eq!(w["t2"], 12.5);
        assert_eq!(w["t3"], 24.0);
        let w = weights(&[("t1", 3), ("t2", 97)]);
        assert_eq!((w["t1"], w["t2"]), (1.0, 24.0));
    }

    #[test]
    fn empty_corpus_rejected() {
        assert_eq!(
            normalize_complexity(&BTreeMap::new()).unwrap_err(),
            FrontendError::EmptyCorpus
        );
    }
}
