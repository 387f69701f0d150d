//! Recursive-descent parser for the OpenQASM 2.0 subset the allocator needs:
//! register declarations, named one-qubit gates, `cx`/`cz`/`swap`, and the
//! usual no-op statements (`barrier`, `measure`, `reset`, gate definitions).

use std::fmt;

use thiserror::Error;

use super::{Gate, ProgramProfile};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("{line}:{column}: {kind}")]
pub struct QasmError {
    pub line: usize,
    pub column: usize,
    pub kind: QasmErrorKind,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum QasmErrorKind {
    Syntax(String),
    /// Gates on three or more qubits must be decomposed before parsing.
    UnsupportedArity {
        gate: String,
        arity: usize,
    },
    UnsupportedGate(String),
    UnknownRegister(String),
    IndexOutOfBounds {
        register: String,
        index: usize,
        size: usize,
    },
    RepeatedOperand(String),
    NoQubits,
}

impl fmt::Display for QasmErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QasmErrorKind::Syntax(m) => write!(f, "syntax error: {m}"),
            QasmErrorKind::UnsupportedArity { gate, arity } => write!(
                f,
                "`{gate}` acts on {arity} qubits; pre-decompose required (only 1- and 2-qubit gates are accepted)"
            ),
            QasmErrorKind::UnsupportedGate(g) => {
                write!(f, "two-qubit gate `{g}` is not supported; use cx, cz or swap")
            }
            QasmErrorKind::UnknownRegister(r) => write!(f, "unknown register `{r}`"),
            QasmErrorKind::IndexOutOfBounds { register, index, size } => {
                write!(f, "index {index} out of bounds for {register}[{size}]")
            }
            QasmErrorKind::RepeatedOperand(g) => write!(f, "`{g}` uses the same qubit twice"),
            QasmErrorKind::NoQubits => write!(f, "program declares no qubits"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Int(usize),
    Real,
    Str,
    Sym(&'static str),
    Eof,
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

const SYMBOLS: [&str; 16] = [
    "->", "==", ";", ",", "(", ")", "[", "]", "{", "}", "+", "-", "*", "/", "^", ">",
];

fn lex(text: &str) -> Result<Vec<Token>, QasmError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0, 1, 1);
    let err = |line, column, m: String| QasmError {
        line,
        column,
        kind: QasmErrorKind::Syntax(m),
    };
    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            col += i - start;
            out.push(Token {
                tok: Tok::Ident(chars[start..i].iter().collect()),
                line: tl,
                column: tc,
            });
            continue;
        }
        if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let start = i;
            let mut real = false;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            if i < chars.len() && chars[i] == '.' {
                real = true;
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                real = true;
                i += 1;
                if i < chars.len() && (chars[i] == '+' || chars[i] == '-') {
                    i += 1;
                }
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
            }
            let s: String = chars[start..i].iter().collect();
            col += i - start;
            let tok = if real {
                Tok::Real
            } else {
                Tok::Int(s.parse().map_err(|_| err(tl, tc, format!("integer `{s}` too large")))?)
            };
            out.push(Token {
                tok,
                line: tl,
                column: tc,
            });
            continue;
        }
        if c == '"' {
            i += 1;
            col += 1;
            while i < chars.len() && chars[i] != '"' {
                if chars[i] == '\n' {
                    return Err(err(tl, tc, "unterminated string".into()));
                }
                i += 1;
                col += 1;
            }
            if i == chars.len() {
                return Err(err(tl, tc, "unterminated string".into()));
            }
            i += 1;
            col += 1;
            out.push(Token {
                tok: Tok::Str,
                line: tl,
                column: tc,
            });
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 2)].iter().collect();
        match SYMBOLS.iter().find(|s| rest.starts_with(*s)) {
            Some(s) => {
                i += s.len();
                col += s.len();
                out.push(Token {
                    tok: Tok::Sym(s),
                    line: tl,
                    column: tc,
                });
            }
            None => return Err(err(tl, tc, format!("unexpected character `{c}`"))),
        }
    }
    out.push(Token {
        tok: Tok::Eof,
        line,
        column: col,
    });
    Ok(out)
}

struct Register {
    name: String,
    offset: usize,
    size: usize,
}

/// An operand: a whole register or one element of it.
enum Arg {
    Whole { offset: usize, size: usize },
    Bit(usize),
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    qregs: Vec<Register>,
    cregs: Vec<Register>,
    gates: Vec<Gate>,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn next(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if t.tok != Tok::Eof {
            self.pos += 1;
        }
        t
    }

    fn fail<T>(&self, at: &Token, kind: QasmErrorKind) -> Result<T, QasmError> {
        Err(QasmError {
            line: at.line,
            column: at.column,
            kind,
        })
    }

    fn syntax<T>(&self, at: &Token, msg: impl Into<String>) -> Result<T, QasmError> {
        self.fail(at, QasmErrorKind::Syntax(msg.into()))
    }

    fn expect(&mut self, sym: &'static str) -> Result<(), QasmError> {
        let t = self.next();
        if t.tok == Tok::Sym(sym) {
            Ok(())
        } else {
            self.syntax(&t, format!("expected `{sym}`, found {}", describe(&t.tok)))
        }
    }

    fn ident(&mut self) -> Result<(String, Token), QasmError> {
        let t = self.next();
        match &t.tok {
            Tok::Ident(s) => Ok((s.clone(), t.clone())),
            other => self.syntax(&t, format!("expected identifier, found {}", describe(other))),
        }
    }

    fn int(&mut self) -> Result<usize, QasmError> {
        let t = self.next();
        match t.tok {
            Tok::Int(n) => Ok(n),
            ref other => self.syntax(&t, format!("expected integer, found {}", describe(other))),
        }
    }

    fn eat(&mut self, sym: &'static str) -> bool {
        if self.peek().tok == Tok::Sym(sym) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    /// Skips a parenthesised parameter list; parameter values are not needed.
    fn skip_params(&mut self) -> Result<(), QasmError> {
        if !self.eat("(") {
            return Ok(());
        }
        let mut depth = 1;
        while depth > 0 {
            let t = self.next();
            match t.tok {
                Tok::Sym("(") => depth += 1,
                Tok::Sym(")") => depth -= 1,
                Tok::Sym(";") | Tok::Eof => return self.syntax(&t, "unbalanced parentheses"),
                _ => {}
            }
        }
        Ok(())
    }

    fn program(mut self) -> Result<(usize, Vec<Gate>), QasmError> {
        if let Tok::Ident(s) = &self.peek().tok {
            if s == "OPENQASM" {
                self.next();
                let t = self.next();
                if !matches!(t.tok, Tok::Real | Tok::Int(_)) {
                    return self.syntax(&t, "expected version number");
                }
                self.expect(";")?;
            }
        }
        while self.peek().tok != Tok::Eof {
            self.statement()?;
        }
        let width: usize = self.qregs.iter().map(|r| r.size).sum();
        if width == 0 {
            let t = self.peek().clone();
            return self.fail(&t, QasmErrorKind::NoQubits);
        }
        Ok((width, self.gates))
    }

    fn statement(&mut self) -> Result<(), QasmError> {
        let (word, at) = self.ident()?;
        match word.as_str() {
            "include" => {
                let t = self.next();
                if t.tok != Tok::Str {
                    return self.syntax(&t, "expected file name string");
                }
                self.expect(";")
            }
            "qreg" | "creg" => {
                let (name, _) = self.ident()?;
                self.expect("[")?;
                let size = self.int()?;
                self.expect("]")?;
                self.expect(";")?;
                if self.qregs.iter().chain(&self.cregs).any(|r| r.name == name) {
                    return self.syntax(&at, format!("register `{name}` declared twice"));
                }
                let regs = if word == "qreg" {
                    &mut self.qregs
                } else {
                    &mut self.cregs
                };
                let offset = regs.iter().map(|r| r.size).sum();
                regs.push(Register { name, offset, size });
                Ok(())
            }
            "gate" => self.skip_gate_definition(),
            "opaque" => {
                while !self.eat(";") {
                    if self.next().tok == Tok::Eof {
                        return self.syntax(&at, "unterminated opaque declaration");
                    }
                }
                Ok(())
            }
            "barrier" => {
                self.qargs()?;
                self.expect(";")
            }
            "reset" => {
                self.qargs()?;
                self.expect(";")
            }
            "measure" => {
                let q = self.qarg()?;
                self.expect("->")?;
                let c = self.arg(false)?;
                let (qs, cs) = (arg_width(&q), arg_width(&c));
                if qs != cs {
                    return self.syntax(&at, "measure operands have different widths");
                }
                self.expect(";")
            }
            "if" => self.syntax(&at, "classically controlled operations are not supported"),
            _ => self.gate_call(word, at),
        }
    }

    fn skip_gate_definition(&mut self) -> Result<(), QasmError> {
        let start = self.peek().clone();
        while !self.eat("{") {
            if self.next().tok == Tok::Eof {
                return self.syntax(&start, "gate definition without body");
            }
        }
        let mut depth = 1;
        while depth > 0 {
            let t = self.next();
            match t.tok {
                Tok::Sym("{") => depth += 1,
                Tok::Sym("}") => depth -= 1,
                Tok::Eof => return self.syntax(&start, "unterminated gate body"),
                _ => {}
            }
        }
        Ok(())
    }

    fn gate_call(&mut self, name: String, at: Token) -> Result<(), QasmError> {
        self.skip_params()?;
        let args = self.qargs()?;
        self.expect(";")?;
        match args.len() {
            1 => {
                for q in expand(&args[0]) {
                    self.gates.push(Gate::Single(q));
                }
                Ok(())
            }
            2 => {
                if !matches!(name.as_str(), "cx" | "CX" | "cz" | "swap") {
                    return self.fail(&at, QasmErrorKind::UnsupportedGate(name));
                }
                let pairs = broadcast(&args[0], &args[1]).ok_or_else(|| QasmError {
                    line: at.line,
                    column: at.column,
                    kind: QasmErrorKind::Syntax(format!("`{name}` operands have different widths")),
                })?;
                for (a, b) in pairs {
                    if a == b {
                        return self.fail(&at, QasmErrorKind::RepeatedOperand(name));
                    }
                    self.gates.push(Gate::Two(a, b));
                }
                Ok(())
            }
            n => self.fail(&at, QasmErrorKind::UnsupportedArity { gate: name, arity: n }),
        }
    }

    fn qargs(&mut self) -> Result<Vec<Arg>, QasmError> {
        let mut args = vec![self.qarg()?];
        while self.eat(",") {
            args.push(self.qarg()?);
        }
        Ok(args)
    }

    fn qarg(&mut self) -> Result<Arg, QasmError> {
        self.arg(true)
    }

    fn arg(&mut self, quantum: bool) -> Result<Arg, QasmError> {
        let (name, at) = self.ident()?;
        let regs = if quantum { &self.qregs } else { &self.cregs };
        let Some(reg) = regs.iter().find(|r| r.name == name) else {
            return self.fail(&at, QasmErrorKind::UnknownRegister(name));
        };
        let (offset, size) = (reg.offset, reg.size);
        if !self.eat("[") {
            return Ok(Arg::Whole { offset, size });
        }
        let idx_tok = self.peek().clone();
        let index = self.int()?;
        self.expect("]")?;
        if index >= size {
            return self.fail(
                &idx_tok,
                QasmErrorKind::IndexOutOfBounds {
                    register: name,
                    index,
                    size,
                },
            );
        }
        Ok(Arg::Bit(offset + index))
    }
}

fn arg_width(a: &Arg) -> usize {
    match a {
        Arg::Whole { size, .. } => *size,
        Arg::Bit(_) => 1,
    }
}

fn expand(a: &Arg) -> Vec<usize> {
    match *a {
        Arg::Whole { offset, size } => (offset..offset + size).collect(),
        Arg::Bit(q) => vec![q],
    }
}

fn broadcast(a: &Arg, b: &Arg) -> Option<Vec<(usize, usize)>> {
    match (a, b) {
        (Arg::Bit(x), Arg::Bit(y)) => Some(vec![(*x, *y)]),
        (Arg::Whole { .. }, Arg::Bit(y)) => Some(expand(a).into_iter().map(|x| (x, *y)).collect()),
        (Arg::Bit(x), Arg::Whole { .. }) => Some(expand(b).into_iter().map(|y| (*x, y)).collect()),
        (Arg::Whole { size: s1, .. }, Arg::Whole { size: s2, .. }) => {
            (s1 == s2).then(|| expand(a).into_iter().zip(expand(b)).collect())
        }
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(s) => format!("`{s}`"),
        Tok::Int(n) => format!("`{n}`"),
        Tok::Real => "a real number".into(),
        Tok::Str => "a string".into(),
        Tok::Sym(s) => format!("`{s}`"),
        Tok::Eof => "end of input".into(),
    }
}

/// Parses OpenQASM 2.0 text into a profile named `name`.
pub fn parse_qasm_named(name: &str, text: &str) -> Result<ProgramProfile, QasmError> {
    let parser = Parser {
        toks: lex(text)?,
        pos: 0,
        qregs: Vec::new(),
        cregs: Vec::new(),
        gates: Vec::new(),
    };
    let (width, gates) = parser.program()?;
    Ok(ProgramProfile::from_gates(name, width, gates))
}

pub fn parse_qasm(text: &str) -> Result<ProgramProfile, QasmError> {
    parse_qasm_named("program", text)
}
