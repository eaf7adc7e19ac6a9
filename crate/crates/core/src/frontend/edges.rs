// SPDX-License-Identifier: Apache-2.0

//! Dependency-edge proxy for design complexity.
//!
//! Edges counted per module body:
//! - continuous `assign`: distinct (rhs identifier, lhs identifier) pairs per
//!   assignment;
//! - procedural `=` / `<=` inside `always*` / `initial` / `final`: same rule,
//!   per statement (including `for` header assignments);
//! - instantiations (modules and gate primitives): one edge per connected
//!   port.
//!
//! Identifiers inside `[...]` on the left-hand side are index expressions and
//! do not count as targets. Function-call names on the right-hand side are not
//! dependencies.

use std::collections::BTreeSet;

use super::lexer::{self, TokKind, Token};
use super::{scrub, FrontendError, VerilogSource};

/// Counts dependency edges over every module in `src`.
pub fn count_dependency_edges(src: &VerilogSource) -> Result<u64, FrontendError> {
    let clean = scrub(src)?;
    let lexed = lexer::lex(&clean.text);
    if let Some(offset) = lexed.unterminated_string {
        return Err(FrontendError::UnterminatedString { offset });
    }
    let mut p = Parser {
        toks: &lexed.tokens,
        pos: 0,
        eof_offset: clean.text.len(),
    };
    let mut total = 0;
    let mut modules = 0;
    while let Some(t) = p.peek() {
        if t.kind == TokKind::Ident && matches!(t.text, "module" | "macromodule") {
            modules += 1;
            total += p.module()?;
        } else {
            p.pos += 1;
        }
    }
    if modules == 0 {
        return Err(FrontendError::NoTopModule);
    }
    Ok(total)
}

const NET_AND_VAR_DECLS: &[&str] = &[
    "input", "output", "inout", "wire", "reg", "logic", "bit", "byte", "int", "integer", "shortint",
    "longint", "real", "realtime", "time", "tri", "tri0", "tri1", "triand", "trior", "trireg",
    "wand", "wor", "uwire", "supply0", "supply1", "genvar", "parameter", "localparam",
    "specparam", "defparam", "event", "typedef", "enum", "struct", "union", "signed", "unsigned",
];

const GATE_PRIMITIVES: &[&str] = &[
    "and", "nand", "or", "nor", "xor", "xnor", "not", "buf", "bufif0", "bufif1", "notif0",
    "notif1", "pullup", "pulldown", "nmos", "pmos", "cmos", "rnmos", "rpmos", "rcmos", "tran",
    "tranif0", "tranif1", "rtran", "rtranif0", "rtranif1",
];

const ASSIGN_OPS: &[&str] = &[
    "=", "<=", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "<<=", ">>=", "<<<=", ">>>=",
];

struct Parser<'t, 'a> {
    toks: &'t [Token<'a>],
    pos: usize,
    eof_offset: usize,
}

type Edges = Result<u64, FrontendError>;

impl<'a> Parser<'_, 'a> {
    fn peek(&self) -> Option<Token<'a>> {
        self.toks.get(self.pos).copied()
    }

    fn peek_is(&self, s: &str) -> bool {
        self.peek().is_some_and(|t| t.is(s))
    }

    fn bump(&mut self) -> Result<Token<'a>, FrontendError> {
        let t = self.peek().ok_or_else(|| self.eof("unexpected end of input"))?;
        self.pos += 1;
        Ok(t)
    }

    fn eat(&mut self, s: &str) -> bool {
        if self.peek_is(s) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn eof(&self, reason: &str) -> FrontendError {
        FrontendError::Malformed {
            offset: self.eof_offset,
            reason: reason.to_string(),
        }
    }

    /// Skips a balanced `(...)`, `[...]` or `{...}` group starting at the
    /// current opener. Returns the tokens strictly inside.
    fn group(&mut self) -> Result<&'_ [Token<'a>], FrontendError> {
        let open = self.bump()?;
        let start = self.pos;
        let mut depth = 1usize;
        while depth > 0 {
            let t = self
                .peek()
                .ok_or_else(|| FrontendError::Malformed {
                    offset: open.start,
                    reason: format!("unbalanced `{}`", open.text),
                })?;
            self.pos += 1;
            if t.kind == TokKind::Punct {
                match t.text {
                    "(" | "[" | "{" | "'{" => depth += 1,
                    ")" | "]" | "}" => depth -= 1,
                    _ => {}
                }
            }
        }
        Ok(&self.toks[start..self.pos - 1])
    }

    /// Collects tokens up to (not including) the next depth-0 `;` and
    /// consumes the `;`.
    fn until_semicolon(&mut self) -> Result<&'_ [Token<'a>], FrontendError> {
        let start = self.pos;
        let mut depth = 0usize;
        loop {
            let t = self.peek().ok_or_else(|| self.eof("missing `;`"))?;
            if t.kind == TokKind::Ident && t.text == "endmodule" {
                // Never run past the module end looking for a terminator.
                if depth > 0 {
                    return Err(FrontendError::Malformed {
                        offset: self.toks[start].start,
                        reason: "unbalanced brackets".into(),
                    });
                }
                return Ok(&self.toks[start..self.pos]);
            }
            self.pos += 1;
            if t.kind == TokKind::Punct {
                match t.text {
                    "(" | "[" | "{" | "'{" => depth += 1,
                    ")" | "]" | "}" => depth = depth.saturating_sub(1),
                    ";" if depth == 0 => return Ok(&self.toks[start..self.pos - 1]),
                    _ => {}
                }
            }
        }
    }

    fn skip_to_keyword(&mut self, end: &str) -> Result<(), FrontendError> {
        while let Some(t) = self.peek() {
            self.pos += 1;
            if t.kind == TokKind::Ident && t.text == end {
                return Ok(());
            }
        }
        Err(self.eof(&format!("missing `{end}`")))
    }

    fn module(&mut self) -> Edges {
        let kw = self.bump()?;
        // header: name, optional parameter and port lists, `;`
        self.until_semicolon()?;
        let mut edges = 0;
        loop {
            let Some(t) = self.peek() else {
                return Err(FrontendError::Malformed {
                    offset: kw.start,
                    reason: "module without `endmodule`".into(),
                });
            };
            if t.kind == TokKind::Ident && t.text == "endmodule" {
                self.pos += 1;
                if self.eat(":") {
                    self.pos += 1;
                }
                return Ok(edges);
            }
            edges += self.module_item()?;
        }
    }

    fn module_item(&mut self) -> Edges {
        let t = self.peek().expect("caller checked");
        if t.kind == TokKind::Ident {
            match t.text {
                "assign" => {
                    self.pos += 1;
                    return self.continuous_assign();
                }
                "always" | "always_comb" | "always_ff" | "always_latch" | "initial" | "final" => {
                    self.pos += 1;
                    return self.statement();
                }
                "function" => return self.skip_to_keyword("endfunction").map(|_| 0),
                "task" => return self.skip_to_keyword("endtask").map(|_| 0),
                "specify" => return self.skip_to_keyword("endspecify").map(|_| 0),
                "generate" | "endgenerate" | "else" | "endcase" => {
                    self.pos += 1;
                    return Ok(0);
                }
                "begin" | "end" => {
                    self.pos += 1;
                    self.label();
                    return Ok(0);
                }
                "for" | "if" | "case" => {
                    // generate constructs: the header is not a dependency
                    self.pos += 1;
                    if self.peek_is("(") {
                        self.group()?;
                    }
                    return Ok(0);
                }
                "default" => {
                    self.pos += 1;
                    self.eat(":");
                    return Ok(0);
                }
                _ => {}
            }
            if GATE_PRIMITIVES.contains(&t.text) {
                self.pos += 1;
                return self.instantiation(true);
            }
            if NET_AND_VAR_DECLS.contains(&t.text) {
                self.until_semicolon()?;
                return Ok(0);
            }
        }
        if t.is_name() {
            let save = self.pos;
            self.pos += 1;
            if let Some(edges) = self.try_instantiation()? {
                return Ok(edges);
            }
            self.pos = save;
        }
        if t.is(";") {
            self.pos += 1;
            return Ok(0);
        }
        self.until_semicolon()?;
        Ok(0)
    }

    fn label(&mut self) {
        if self.peek_is(":") && self.toks.get(self.pos + 1).is_some_and(|t| t.is_name()) {
            self.pos += 2;
        }
    }

    /// After a module-type name: `[#(...)] inst [range] (...) {, inst (...)} ;`
    fn try_instantiation(&mut self) -> Result<Option<u64>, FrontendError> {
        if self.peek_is("#") {
            self.pos += 1;
            if self.peek_is("(") {
                self.group()?;
            } else {
                self.pos += 1;
            }
        }
        if !self.peek().is_some_and(|t| t.is_name()) {
            return Ok(None);
        }
        self.instantiation(false).map(Some)
    }

    fn instantiation(&mut self, primitive: bool) -> Edges {
        // primitives may carry strength/delay and may omit the instance name
        if primitive {
            if self.peek_is("(") && self.strength_list_ahead() {
                self.group()?;
            }
            if self.eat("#") {
                if self.peek_is("(") {
                    self.group()?;
                } else {
                    self.pos += 1;
                }
            }
        }
        let mut edges = 0;
        loop {
            if self.peek().is_some_and(|t| t.is_name()) {
                self.pos += 1;
            }
            while self.peek_is("[") {
                self.group()?;
            }
            if !self.peek_is("(") {
                self.until_semicolon()?;
                return Ok(edges);
            }
            edges += count_ports(self.group()?);
            if self.eat(",") {
                continue;
            }
            self.until_semicolon()?;
            return Ok(edges);
        }
    }

    fn strength_list_ahead(&self) -> bool {
        self.toks.get(self.pos + 1).is_some_and(|t| {
            t.kind == TokKind::Ident
                && matches!(
                    t.text,
                    "supply0" | "supply1" | "strong0" | "strong1" | "pull0" | "pull1" | "weak0"
                        | "weak1" | "highz0" | "highz1"
                )
        })
    }

    fn continuous_assign(&mut self) -> Edges {
        if self.peek_is("(") {
            self.group()?; // drive strength
        }
        if self.eat("#") {
            if self.peek_is("(") {
                self.group()?;
            } else {
                self.pos += 1;
            }
        }
        let body = self.until_semicolon()?;
        Ok(split_depth0(body, ",")
            .into_iter()
            .map(assignment_edges)
            .sum())
    }

    fn statement(&mut self) -> Edges {
        let Some(t) = self.peek() else {
            return Err(self.eof("missing statement"));
        };
        if t.kind == TokKind::System {
            self.until_semicolon()?;
            return Ok(0);
        }
        if t.kind == TokKind::Punct {
            return match t.text {
                ";" => {
                    self.pos += 1;
                    Ok(0)
                }
                "@" => {
                    self.pos += 1;
                    if self.peek_is("(") {
                        self.group()?;
                    } else {
                        self.pos += 1;
                    }
                    self.statement()
                }
                "#" => {
                    self.pos += 1;
                    if self.peek_is("(") {
                        self.group()?;
                    } else {
                        self.pos += 1;
                    }
                    self.statement()
                }
                _ => self.simple_statement(),
            };
        }
        if t.kind != TokKind::Ident {
            return self.simple_statement();
        }
        match t.text {
            "begin" | "fork" => {
                self.pos += 1;
                self.label();
                let closers: &[&str] = if t.text == "begin" {
                    &["end"]
                } else {
                    &["join", "join_any", "join_none"]
                };
                let mut edges = 0;
                loop {
                    let Some(n) = self.peek() else {
                        return Err(FrontendError::Malformed {
                            offset: t.start,
                            reason: format!("unclosed `{}`", t.text),
                        });
                    };
                    if n.kind == TokKind::Ident && closers.contains(&n.text) {
                        self.pos += 1;
                        self.label();
                        return Ok(edges);
                    }
                    if n.kind == TokKind::Ident && n.text == "endmodule" {
                        return Err(FrontendError::Malformed {
                            offset: t.start,
                            reason: format!("unclosed `{}`", t.text),
                        });
                    }
                    edges += self.statement()?;
                }
            }
            "if" => {
                self.pos += 1;
                if self.peek_is("(") {
                    self.group()?;
                }
                let mut edges = self.statement()?;
                if self.eat("else") {
                    edges += self.statement()?;
                }
                Ok(edges)
            }
            "unique" | "unique0" | "priority" => {
                self.pos += 1;
                self.statement()
            }
            "case" | "casex" | "casez" => {
                self.pos += 1;
                if self.peek_is("(") {
                    self.group()?;
                }
                self.eat("inside");
                let mut edges = 0;
                loop {
                    let Some(n) = self.peek() else {
                        return Err(FrontendError::Malformed {
                            offset: t.start,
                            reason: "missing `endcase`".into(),
                        });
                    };
                    if n.is("endcase") {
                        self.pos += 1;
                        return Ok(edges);
                    }
                    if n.is("endmodule") {
                        return Err(FrontendError::Malformed {
                            offset: t.start,
                            reason: "missing `endcase`".into(),
                        });
                    }
                    if n.is("default") {
                        self.pos += 1;
                        self.eat(":");
                    } else {
                        self.case_label()?;
                    }
                    edges += self.statement()?;
                }
            }
            "for" => {
                self.pos += 1;
                let mut edges = 0;
                if self.peek_is("(") {
                    let header = self.group()?;
                    // init and step clauses; the condition is not an assignment
                    for clause in split_depth0(header, ";").into_iter().step_by(2) {
                        for part in split_depth0(clause, ",") {
                            edges += assignment_edges(part);
                        }
                    }
                }
                Ok(edges + self.statement()?)
            }
            "while" | "repeat" | "wait" => {
                self.pos += 1;
                if self.peek_is("(") {
                    self.group()?;
                }
                self.statement()
            }
            "forever" => {
                self.pos += 1;
                self.statement()
            }
            "do" => {
                self.pos += 1;
                let edges = self.statement()?;
                if self.eat("while") {
                    self.until_semicolon()?;
                }
                Ok(edges)
            }
            "disable" | "return" | "break" | "continue" | "assert" | "assume" | "cover"
            | "force" | "release" | "assign" | "deassign" => {
                self.until_semicolon()?;
                Ok(0)
            }
            w if NET_AND_VAR_DECLS.contains(&w) => {
                self.until_semicolon()?;
                Ok(0)
            }
            _ => {
                // `label: statement`
                if t.is_name() && self.toks.get(self.pos + 1).is_some_and(|n| n.is(":")) {
                    self.pos += 2;
                    return self.statement();
                }
                self.simple_statement()
            }
        }
    }

    /// Consumes `expr {, expr} :` of a case item.
    fn case_label(&mut self) -> Result<(), FrontendError> {
        let mut depth = 0usize;
        loop {
            let t = self.bump()?;
            if t.kind == TokKind::Punct {
                match t.text {
                    "(" | "[" | "{" | "'{" => depth += 1,
                    ")" | "]" | "}" => depth = depth.saturating_sub(1),
                    ":" if depth == 0 => return Ok(()),
                    _ => {}
                }
            }
        }
    }

    fn simple_statement(&mut self) -> Edges {
        let body = self.until_semicolon()?;
        Ok(assignment_edges(body))
    }
}

fn split_depth0<'t, 'a>(toks: &'t [Token<'a>], sep: &str) -> Vec<&'t [Token<'a>]> {
    let mut parts = Vec::new();
    let mut depth = 0usize;
    let mut start = 0;
    for (i, t) in toks.iter().enumerate() {
        if t.kind != TokKind::Punct {
            continue;
        }
        match t.text {
            "(" | "[" | "{" | "'{" => depth += 1,
            ")" | "]" | "}" => depth = depth.saturating_sub(1),
            s if s == sep && depth == 0 => {
                parts.push(&toks[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    parts.push(&toks[start..]);
    parts
}

/// Distinct rhs→lhs identifier pairs of one `lhs op rhs` fragment; zero when
/// the fragment is not an assignment.
fn assignment_edges(toks: &[Token<'_>]) -> u64 {
    let mut depth = 0usize;
    let mut split = None;
    for (i, t) in toks.iter().enumerate() {
        if t.kind != TokKind::Punct {
            continue;
        }
        match t.text {
            "(" | "[" | "{" | "'{" => depth += 1,
            ")" | "]" | "}" => depth = depth.saturating_sub(1),
            op if depth == 0 && ASSIGN_OPS.contains(&op) => {
                split = Some((i, op));
                break;
            }
            _ => {}
        }
    }
    let Some((at, op)) = split else { return 0 };
    let lhs = target_names(&toks[..at]);
    let mut rhs = source_names(&toks[at + 1..]);
    if op != "=" && op != "<=" {
        // compound `x op= y` reads x as well
        rhs.extend(lhs.iter().cloned());
    }
    (lhs.len() * rhs.len()) as u64
}

fn target_names<'a>(toks: &[Token<'a>]) -> BTreeSet<&'a str> {
    let mut names = BTreeSet::new();
    let mut bracket = 0usize;
    for t in toks {
        match t.text {
            "[" if t.kind == TokKind::Punct => bracket += 1,
            "]" if t.kind == TokKind::Punct => bracket = bracket.saturating_sub(1),
            _ if bracket == 0 && t.is_name() => {
                names.insert(super::canonical_identifier(t.text));
            }
            _ => {}
        }
    }
    names
}

fn source_names<'a>(toks: &[Token<'a>]) -> BTreeSet<&'a str> {
    toks.iter()
        .enumerate()
        .filter(|(i, t)| t.is_name() && !toks.get(i + 1).is_some_and(|n| n.is("(")))
        .map(|(_, t)| super::canonical_identifier(t.text))
        .collect()
}

fn count_ports(inner: &[Token<'_>]) -> u64 {
    if inner.is_empty() {
        return 0;
    }
    split_depth0(inner, ",")
        .into_iter()
        .filter(|port| match port.first() {
            None => false,
            Some(t) if t.is(".*") => true,
            Some(t) if t.is(".") => match port.get(2) {
                // `.name(expr)`: connected unless the parentheses are empty
                Some(open) if open.is("(") => port.len() > 4,
                _ => true,
            },
            Some(_) => true,
        })
        .count() as u64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn edges(text: &str) -> u64 {
        count_dependency_edges(&VerilogSource::new(text, "test")).unwrap()
    }

    #[test]
    fn single_assign() {
        assert_eq!(edges("module m(input a, output y); assign y = a; endmodule"), 1);
    }

    #[test]
    fn two_operand_assign() {
        assert_eq!(edges("module m(input a, b, output y); assign y = a & b; endmodule"), 2);
    }

    #[test]
    fn empty_module() {
        assert_eq!(edges("module m(input a, output y); wire w; endmodule"), 0);
    }

    #[test]
    fn repeated_operands_collapse() {
        assert_eq!(edges("module m; assign y = a & a | a; endmodule"), 1);
    }

    #[test]
    fn concatenated_target_and_indexed_target() {
        // {c, s} <- a, b : 4 pairs; y[i] <- d : index i is not a target
        assert_eq!(
            edges("module m; assign {c, s} = a + b; assign y[i] = d; endmodule"),
            5
        );
    }

    #[test]
    fn comma_separated_continuous_assigns() {
        assert_eq!(edges("module m; assign x = a, y = b & c; endmodule"), 3);
    }

    #[test]
    fn procedural_assignments() {
        let text = "module m(input clk, input [1:0] s, input a, b, output reg q, output reg [3:0] r);
            always @(posedge clk) begin
                if (s == 2'b00) q <= a;
                else q <= a ^ b;
                case (s)
                    2'b01: r <= {a, b, a, b};
                    default: r <= 4'h0;
                endcase
            end
            endmodule";
        // q<-a, q<-{a,b} (second statement), r<-{a,b}
        assert_eq!(edges(text), 1 + 2 + 2);
    }

    #[test]
    fn for_header_assignments_count() {
        let text = "module m; integer i; always @* begin for (i = 0; i < 4; i = i + 1) y[i] = a[i]; end endmodule";
        // i<-i (step), y<-{a,i}
        assert_eq!(edges(text), 1 + 2);
    }

    #[test]
    fn instantiation_ports() {
        let text = "module top(input a, b, output y);
            wire t;
            helper #(.W(4)) u0 (.a(a), .b(b), .y(t), .unused());
            helper u1 (t, b, y);
            endmodule";
        assert_eq!(edges(text), 3 + 3);
    }

    #[test]
    fn gate_primitives_count_as_instances() {
        assert_eq!(edges("module m(input a, b, output y); and g0(y, a, b); not (z, a); endmodule"), 5);
    }

    #[test]
    fn generate_bodies_are_scanned() {
        let text = "module m; genvar i;
            generate for (i = 0; i < 4; i = i + 1) begin : g
                assign y[i] = a[i] & b[i];
            end endgenerate
            endmodule";
        assert_eq!(edges(text), 3);
    }

    #[test]
    fn system_tasks_and_function_calls_are_not_edges() {
        let text = "module m; initial begin $display(\"%d\", a); x = f(a); end endmodule";
        assert_eq!(edges(text), 1);
    }

    #[test]
    fn edges_sum_over_modules() {
        let text = "module h(input a, output y); assign y = ~a; endmodule
                    module t(input a, output y); h u(.a(a), .y(y)); endmodule";
        assert_eq!(edges(text), 1 + 2);
    }

    #[test]
    fn missing_endmodule_is_an_error() {
        let err = count_dependency_edges(&VerilogSource::new("module m; assign y = a;", "t")).unwrap_err();
        assert!(matches!(err, FrontendError::Malformed { offset: 0, .. }));
    }

    #[test]
    fn unbalanced_group_is_an_error() {
        let err = count_dependency_edges(&VerilogSource::new("module m; assign y = (a; endmodule", "t"))
            .unwrap_err();
        assert!(matches!(err, FrontendError::Malformed { .. }), "{err:?}");
    }

    #[test]
    fn no_module_is_an_error() {
        let err = count_dependency_edges(&VerilogSource::new("assign y = a;", "t")).unwrap_err();
        assert_eq!(err, FrontendError::NoTopModule);
    }
}
