// SPDX-License-Identifier: Apache-2.0

//! A small, total Verilog tokenizer. It runs on comment-stripped text and
//! never fails; lexical problems are reported through [`Lexed`] flags.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum TokKind {
    /// Simple identifier or keyword.
    Ident,
    /// `\name` escaped identifier (text includes the backslash).
    Escaped,
    /// `$display` and friends.
    System,
    /// `` `NAME `` macro reference.
    Macro,
    Number,
    Str,
    Punct,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Token<'a> {
    pub kind: TokKind,
    pub text: &'a str,
    pub start: usize,
}

impl<'a> Token<'a> {
    pub fn is(&self, s: &str) -> bool {
        matches!(self.kind, TokKind::Ident | TokKind::Punct) && self.text == s
    }

    pub fn end(&self) -> usize {
        self.start + self.text.len()
    }

    /// Identifier that is not a reserved word.
    pub fn is_name(&self) -> bool {
        match self.kind {
            TokKind::Escaped => true,
            TokKind::Ident => !is_keyword(self.text),
            _ => false,
        }
    }
}

pub(crate) struct Lexed<'a> {
    pub tokens: Vec<Token<'a>>,
    pub unterminated_string: Option<usize>,
}

// Directives whose remainder of line is not part of the token stream.
const LINE_DIRECTIVES: &[&str] = &[
    "define",
    "undef",
    "undefineall",
    "timescale",
    "include",
    "default_nettype",
    "resetall",
    "celldefine",
    "endcelldefine",
    "unconnected_drive",
    "nounconnected_drive",
    "pragma",
    "line",
    "begin_keywords",
    "end_keywords",
    "ifdef",
    "ifndef",
    "elsif",
    "else",
    "endif",
];

const PUNCT: &[&str] = &[
    "<<<=", ">>>=", "===", "!==", "<<<", ">>>", "<<=", ">>=", "==?", "!=?", "<=", ">=", "==", "!=",
    "&&", "||", "<<", ">>", "**", "->", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "::",
    "++", "--", "~&", "~|", "~^", "^~", "+:", "-:", "'{", ".*",
];

pub(crate) fn lex(text: &str) -> Lexed<'_> {
    let bytes = text.as_bytes();
    let mut tokens = Vec::new();
    let mut unterminated_string = None;
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let kind = match c {
            b'"' => {
                i += 1;
                loop {
                    match bytes.get(i) {
                        None | Some(b'\n') => {
                            unterminated_string.get_or_insert(start);
                            break;
                        }
                        Some(b'\\') => i += 2,
                        Some(b'"') => {
                            i += 1;
                            break;
                        }
                        Some(_) => i += 1,
                    }
                }
                i = i.min(bytes.len());
                TokKind::Str
            }
            b'\\' => {
                i += 1;
                while i < bytes.len() && !bytes[i].is_ascii_whitespace() {
                    i += 1;
                }
                TokKind::Escaped
            }
            b'$' => {
                i += 1;
                while i < bytes.len() && is_ident_byte(bytes[i]) {
                    i += 1;
                }
                TokKind::System
            }
            b'`' => {
                i += 1;
                while i < bytes.len() && is_ident_byte(bytes[i]) {
                    i += 1;
                }
                let name = &text[start + 1..i];
                if LINE_DIRECTIVES.contains(&name) {
                    i = skip_directive_line(bytes, i);
                    continue;
                }
                TokKind::Macro
            }
            b'\'' => {
                if let Some(end) = based_literal(bytes, i) {
                    i = end;
                    TokKind::Number
                } else if bytes.get(i + 1) == Some(&b'{') {
                    i += 2;
                    TokKind::Punct
                } else {
                    i += 1;
                    TokKind::Punct
                }
            }
            b'0'..=b'9' => {
                i = decimal_literal(bytes, i);
                // `8'hff`: size prefix glued to the based part.
                let mut j = i;
                while j < bytes.len() && bytes[j] == b' ' {
                    j += 1;
                }
                if bytes.get(j) == Some(&b'\'') {
                    if let Some(end) = based_literal(bytes, j) {
                        i = end;
                    }
                }
                TokKind::Number
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && is_ident_byte(bytes[i]) {
                    i += 1;
                }
                TokKind::Ident
            }
            _ => {
                let rest = &text[i..];
                let len = PUNCT
                    .iter()
                    .find(|p| rest.starts_with(*p))
                    .map(|p| p.len())
                    .unwrap_or_else(|| rest.chars().next().map_or(1, char::len_utf8));
                i += len;
                TokKind::Punct
            }
        };
        tokens.push(Token {
            kind,
            text: &text[start..i],
            start,
        });
    }
    Lexed {
        tokens,
        unterminated_string,
    }
}

fn is_ident_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_' || b == b'$'
}

fn skip_directive_line(bytes: &[u8], mut i: usize) -> usize {
    while i < bytes.len() && bytes[i] != b'\n' {
        // backslash-newline continues a macro body
        if bytes[i] == b'\\' && bytes.get(i + 1) == Some(&b'\n') {
            i += 2;
            continue;
        }
        i += 1;
    }
    i
}

fn decimal_literal(bytes: &[u8], mut i: usize) -> usize {
    while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'_') {
        i += 1;
    }
    if bytes.get(i) == Some(&b'.') && bytes.get(i + 1).is_some_and(u8::is_ascii_digit) {
        i += 1;
        while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'_') {
            i += 1;
        }
    }
    if matches!(bytes.get(i), Some(b'e' | b'E')) {
        let mut j = i + 1;
        if matches!(bytes.get(j), Some(b'+' | b'-')) {
            j += 1;
        }
        if bytes.get(j).is_some_and(u8::is_ascii_digit) {
            i = j;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
        }
    }
    i
}

/// `'[s]b101`, `'hFF`, and the unbased `'0 '1 'x 'z` forms. `i` points at
/// the apostrophe.
fn based_literal(bytes: &[u8], i: usize) -> Option<usize> {
    let mut j = i + 1;
    if matches!(bytes.get(j), Some(b's' | b'S')) {
        j += 1;
    }
    match bytes.get(j) {
        Some(b'b' | b'B' | b'o' | b'O' | b'd' | b'D' | b'h' | b'H') => {
            j += 1;
            while bytes.get(j) == Some(&b' ') {
                j += 1;
            }
            let digits = j;
            while j < bytes.len()
                && (bytes[j].is_ascii_hexdigit() || matches!(bytes[j], b'_' | b'x' | b'X' | b'z' | b'Z' | b'?'))
            {
                j += 1;
            }
            (j > digits).then_some(j)
        }
        Some(b'0' | b'1' | b'x' | b'X' | b'z' | b'Z') if j == i + 1 => {
            let next = bytes.get(j + 1);
            if next.is_some_and(|b| is_ident_byte(*b)) {
                None
            } else {
                Some(j + 1)
            }
        }
        _ => None,
    }
}

pub(crate) fn is_keyword(word: &str) -> bool {
    KEYWORDS.binary_search(&word).is_ok()
}

// Sorted; Verilog-2005 reserved words plus the SystemVerilog ones that show
// up in synthesizable RTL.
const KEYWORDS: &[&str] = &[
    "always", "always_comb", "always_ff", "always_latch", "and", "assert", "assign", "assume",
    "automatic", "begin", "bit", "break", "buf", "bufif0", "bufif1", "byte", "case", "casex", "casez",
    "cell", "cmos", "config", "const", "continue", "cover", "deassign", "default", "defparam",
    "design", "disable", "do", "edge", "else", "end", "endcase", "endconfig", "endfunction",
    "endgenerate", "endmodule", "endprimitive", "endspecify", "endtable", "endtask", "enum",
    "event", "final", "for", "force", "forever", "fork", "function", "generate", "genvar",
    "highz0", "highz1", "if", "ifnone", "incdir", "include", "initial", "inout", "input",
    "inside", "instance", "int", "integer", "join", "join_any", "join_none", "large", "liblist",
    "library", "localparam", "logic", "longint", "macromodule", "medium", "module", "nand",
    "negedge", "nmos", "nor", "noshowcancelled", "not", "notif0", "notif1", "or", "output",
    "packed", "parameter", "pmos", "posedge", "primitive", "priority", "pull0", "pull1",
    "pulldown", "pullup", "pulsestyle_ondetect", "pulsestyle_onevent", "rcmos", "real",
    "realtime", "reg", "release", "repeat", "return", "rnmos", "rpmos", "rtran", "rtranif0",
    "rtranif1", "scalared", "shortint", "showcancelled", "signed", "small", "specify",
    "specparam", "static", "strong0", "strong1", "struct", "supply0", "supply1", "table", "task",
    "time", "tran", "tranif0", "tranif1", "tri", "tri0", "tri1", "triand", "trior", "trireg",
    "typedef", "union", "unique", "unique0", "unsigned", "use", "uwire", "vectored", "void",
    "wait", "wand", "weak0", "weak1", "while", "wire", "wor", "xnor", "xor",
];
