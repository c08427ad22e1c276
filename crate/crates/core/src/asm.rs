//! Textual assembly (`.mvm`) reader and canonical writer.
//!
//! ```text
//! .class Chars
//!   .method static bool isSpace(int)
//!     .local 0 c int
//!     line 20
//!     load 0
//!     const int 32
//!     cmp eq
//!     return bool
//!   .end
//! .test "space" Tests.space expect bool true
//! ```
//!
//! One item per line. `;` starts a comment. An instruction row may carry a
//! `/*N*/` prefix, which behaves like a `line N` directive.

use std::fmt::{self, Write as _};

use thiserror::Error;

use crate::ir::{
    ArithOp, ClassDef, Constant, Descriptor, FieldDef, FieldRef, Instruction, Label, LocalSlot, MethodDef,
    MethodRef, Program, Relation, Scope, TypeTag, Visibility, OBJECT,
};
use crate::testing::{Entry, Expectation, TestCase, TestSuite};
use crate::verify::verify;

/// A parsed `.mvm` file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceUnit {
    pub path: String,
    pub program: Program,
    pub suite: TestSuite,
    /// Mutant keys declared equivalent to the original program.
    pub equivalents: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.column, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct ParseError {
    pub diagnostics: Vec<Diagnostic>,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, d) in self.diagnostics.iter().enumerate() {
            if i > 0 {
                f.write_str("\n")?;
            }
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

impl ParseError {
    fn single(line: usize, column: usize, message: impl Into<String>) -> Self {
        ParseError {
            diagnostics: vec![Diagnostic {
                line,
                column,
                message: message.into(),
            }],
        }
    }
}

/// Parses and verifies a unit, resolving every test entry.
pub fn parse(text: &str) -> Result<SourceUnit, ParseError> {
    parse_named(text, "<input>")
}

pub fn parse_named(text: &str, path: &str) -> Result<SourceUnit, ParseError> {
    let unit = parse_syntax_named(text, path)?;
    if let Err(e) = verify(&unit.program) {
        let line = e.location.as_ref().map(|l| l.line as usize).unwrap_or(0);
        return Err(ParseError::single(line, 1, format!("verification failed: {e}")));
    }
    let mut diagnostics = Vec::new();
    for (t, &line) in unit.suite.tests.iter().zip(&unit.suite.decl_lines) {
        if let Err(msg) = unit.suite.check_entry(&unit.program, t) {
            diagnostics.push(Diagnostic {
                line,
                column: 1,
                message: msg,
            });
        }
    }
    if diagnostics.is_empty() {
        Ok(unit)
    } else {
        Err(ParseError { diagnostics })
    }
}

/// Syntax-only parse; the resulting program may not verify.
pub fn parse_syntax(text: &str) -> Result<SourceUnit, ParseError> {
    parse_syntax_named(text, "<input>")
}

pub fn parse_syntax_named(text: &str, path: &str) -> Result<SourceUnit, ParseError> {
    let mut p = Parser::default();
    for (n, raw) in text.lines().enumerate() {
        let lineno = n + 1;
        if let Err(d) = p.line(lineno, raw) {
            p.diagnostics.push(d);
        }
    }
    if let Some(m) = &p.method {
        p.diagnostics.push(Diagnostic {
            line: m.start_line,
            column: 1,
            message: format!("method `{}` is missing `.end`", m.def.name),
        });
    }
    if !p.diagnostics.is_empty() {
        return Err(ParseError {
            diagnostics: p.diagnostics,
        });
    }
    p.flush_class();
    Ok(SourceUnit {
        path: path.to_string(),
        program: Program { classes: p.classes },
        suite: p.suite,
        equivalents: p.equivalents,
    })
}

#[derive(Debug, Clone)]
struct Token<'a> {
    text: &'a str,
    col: usize,
}

fn tokenize(line: &str) -> Result<Vec<Token<'_>>, (usize, String)> {
    let mut out = Vec::new();
    let bytes = line.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c == b';' {
            break;
        }
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if c == b'"' {
            i += 1;
            while i < bytes.len() && bytes[i] != b'"' {
                i += 1;
            }
            if i == bytes.len() {
                return Err((start + 1, "unterminated string".into()));
            }
            i += 1;
        } else {
            while i < bytes.len() && !bytes[i].is_ascii_whitespace() && bytes[i] != b';' {
                i += 1;
            }
        }
        out.push(Token {
            text: &line[start..i],
            col: start + 1,
        });
    }
    Ok(out)
}

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' || c == '$' || c == '<' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '$' | '<' | '>'))
}

pub fn parse_type(s: &str) -> Result<TypeTag, String> {
    Ok(match s {
        "int" => TypeTag::Int,
        "bool" => TypeTag::Bool,
        "void" => TypeTag::Void,
        _ if is_ident(s) => TypeTag::Ref(s.to_string()),
        _ => return Err(format!("invalid type `{s}`")),
    })
}

/// Parses `(t1,t2)ret`.
pub fn parse_descriptor(s: &str) -> Result<Descriptor, String> {
    let rest = s
        .strip_prefix('(')
        .ok_or_else(|| format!("descriptor `{s}` must start with `(`"))?;
    let close = rest
        .find(')')
        .ok_or_else(|| format!("descriptor `{s}` is missing `)`"))?;
    let params_text = &rest[..close];
    let params = if params_text.trim().is_empty() {
        Vec::new()
    } else {
        params_text
            .split(',')
            .map(|p| parse_type(p.trim()))
            .collect::<Result<_, _>>()?
    };
    Ok(Descriptor::new(params, parse_type(rest[close + 1..].trim())?))
}

/// Parses `Class.name(params)ret`.
pub fn parse_method_ref(s: &str) -> Result<MethodRef, String> {
    let paren = s
        .find('(')
        .ok_or_else(|| format!("method reference `{s}` lacks `(`"))?;
    let (head, desc) = s.split_at(paren);
    let dot = head
        .find('.')
        .ok_or_else(|| format!("method reference `{s}` lacks a class"))?;
    let (class, name) = (&head[..dot], &head[dot + 1..]);
    if !is_ident(class) || !is_ident(name) {
        return Err(format!("malformed method reference `{s}`"));
    }
    Ok(MethodRef {
        class: class.to_string(),
        name: name.to_string(),
        descriptor: parse_descriptor(desc)?,
    })
}

fn parse_field_ref(owner: &str, ty: &str) -> Result<FieldRef, String> {
    let (class, name) = owner
        .split_once('.')
        .ok_or_else(|| format!("field reference `{owner}` lacks a class"))?;
    if !is_ident(class) || !is_ident(name) {
        return Err(format!("malformed field reference `{owner}`"));
    }
    Ok(FieldRef {
        class: class.to_string(),
        name: name.to_string(),
        ty: parse_type(ty)?,
    })
}

fn parse_int(s: &str) -> Result<i64, String> {
    s.parse::<i64>().map_err(|_| format!("invalid integer `{s}`"))
}

fn parse_slot(s: &str) -> Result<usize, String> {
    s.parse::<usize>()
        .map_err(|_| format!("invalid local slot `{s}`"))
}

fn parse_label(s: &str) -> Result<String, String> {
    if is_ident(s) {
        Ok(s.to_string())
    } else {
        Err(format!("invalid label `{s}`"))
    }
}

/// Parses one instruction from its mnemonic and operand words.
pub fn parse_instruction_words(words: &[&str]) -> Result<Instruction, String> {
    use Instruction as I;
    let (op, args) = words
        .split_first()
        .ok_or_else(|| "empty instruction".to_string())?;
    let arity = |n: usize| -> Result<(), String> {
        if args.len() == n {
            Ok(())
        } else {
            Err(format!("`{op}` takes {n} operand(s), found {}", args.len()))
        }
    };
    if let Some(a) = ArithOp::from_mnemonic(op) {
        arity(0)?;
        return Ok(I::Arith(a));
    }
    Ok(match *op {
        "const" => match args {
            ["int", n] => I::Const(Constant::Int(parse_int(n)?)),
            ["bool", "true"] => I::Const(Constant::Bool(true)),
            ["bool", "false"] => I::Const(Constant::Bool(false)),
            ["null"] => I::Const(Constant::Null),
            _ => return Err("expected `const int N`, `const bool B` or `const null`".into()),
        },
        "load" => {
            arity(1)?;
            I::Load(parse_slot(args[0])?)
        }
        "store" => {
            arity(1)?;
            I::Store(parse_slot(args[0])?)
        }
        "inc" => {
            arity(2)?;
            I::Inc(parse_slot(args[0])?, parse_int(args[1])?)
        }
        "neg" => {
            arity(0)?;
            I::Neg
        }
        "not" => {
            arity(0)?;
            I::Not
        }
        "cmp" => {
            arity(1)?;
            I::Cmp(Relation::from_mnemonic(args[0]).ok_or_else(|| format!("unknown relation `{}`", args[0]))?)
        }
        "jmp" => {
            arity(1)?;
            I::Jmp(parse_label(args[0])?)
        }
        "jmpif" => {
            arity(1)?;
            I::JmpIf(parse_label(args[0])?)
        }
        "switch" => {
            let mut cases = Vec::new();
            let mut default = None;
            for a in args.iter() {
                let (k, l) = a
                    .split_once(':')
                    .ok_or_else(|| format!("switch arm `{a}` must be `value:label`"))?;
                if k == "default" {
                    default = Some(parse_label(l)?);
                } else {
                    cases.push((parse_int(k)?, parse_label(l)?));
                }
            }
            I::Switch {
                cases,
                default: default.ok_or("switch requires a default arm")?,
            }
        }
        "new" => {
            arity(1)?;
            if !is_ident(args[0]) {
                return Err(format!("invalid class name `{}`", args[0]));
            }
            I::New(args[0].to_string())
        }
        "getfield" | "putfield" | "getstatic" | "putstatic" => {
            arity(2)?;
            let f = parse_field_ref(args[0], args[1])?;
            match *op {
                "getfield" => I::GetField(f),
                "putfield" => I::PutField(f),
                "getstatic" => I::GetStatic(f),
                _ => I::PutStatic(f),
            }
        }
        "invoke" | "invokestatic" => {
            let joined = args.concat();
            let m = parse_method_ref(&joined)?;
            if *op == "invoke" {
                I::Invoke(m)
            } else {
                I::InvokeStatic(m)
            }
        }
        "return" => {
            arity(1)?;
            I::Return(parse_type(args[0])?)
        }
        "pop" => {
            arity(0)?;
            I::Pop
        }
        "swap" => {
            arity(0)?;
            I::Swap
        }
        "dup" => {
            arity(0)?;
            I::Dup
        }
        "fail" => {
            arity(0)?;
            I::Fail
        }
        other => return Err(format!("unknown opcode `{other}`")),
    })
}

/// Parses a single instruction written in canonical form.
pub fn parse_instruction(text: &str) -> Result<Instruction, String> {
    let words: Vec<&str> = text.split_whitespace().collect();
    parse_instruction_words(&words)
}

struct OpenMethod {
    def: MethodDef,
    start_line: usize,
    current_line: Option<u32>,
}

#[derive(Default)]
struct Parser {
    classes: Vec<ClassDef>,
    class: Option<ClassDef>,
    method: Option<OpenMethod>,
    suite: TestSuite,
    equivalents: Vec<String>,
    diagnostics: Vec<Diagnostic>,
}

impl Parser {
    fn flush_class(&mut self) {
        if let Some(c) = self.class.take() {
            self.classes.push(c);
        }
    }

    fn line(&mut self, lineno: usize, raw: &str) -> Result<(), Diagnostic> {
        let diag = |col: usize, msg: String| Diagnostic {
            line: lineno,
            column: col,
            message: msg,
        };
        let mut toks = tokenize(raw).map_err(|(c, m)| diag(c, m))?;
        if toks.is_empty() {
            return Ok(());
        }
        // `/*N*/` annotation
        if let Some(inner) = toks[0].text.strip_prefix("/*").and_then(|t| t.strip_suffix("*/")) {
            let col = toks[0].col;
            let n: u32 = inner
                .trim()
                .parse()
                .map_err(|_| diag(col, format!("invalid line annotation `{}`", toks[0].text)))?;
            let m = self
                .method
                .as_mut()
                .ok_or_else(|| diag(col, "line annotation outside a method".into()))?;
            m.current_line = Some(n);
            toks.remove(0);
            if toks.is_empty() {
                return Ok(());
            }
        }
        let head = toks[0].text;
        let col = toks[0].col;
        let words: Vec<&str> = toks.iter().map(|t| t.text).collect();
        let err = |m: String| diag(col, m);

        match head {
            ".class" => {
                if self.method.is_some() {
                    return Err(err("`.class` inside a method".into()));
                }
                self.flush_class();
                let (name, sup) = match words.as_slice() {
                    [_, name] => (*name, None),
                    [_, name, "extends", sup] => (*name, Some(*sup)),
                    _ => return Err(err("expected `.class Name [extends Super]`".into())),
                };
                if !is_ident(name) {
                    return Err(err(format!("invalid class name `{name}`")));
                }
                if self.classes.iter().any(|c| c.name == name) {
                    return Err(err(format!("duplicate class `{name}`")));
                }
                self.class = Some(ClassDef {
                    name: name.to_string(),
                    super_name: sup.filter(|s| *s != OBJECT).map(str::to_string),
                    fields: Vec::new(),
                    methods: Vec::new(),
                });
            }
            ".field" => {
                if self.method.is_some() {
                    return Err(err("`.field` inside a method".into()));
                }
                let class = self
                    .class
                    .as_mut()
                    .ok_or_else(|| err("`.field` outside a class".into()))?;
                let mut rest = &words[1..];
                let is_static = rest.first() == Some(&"static");
                if is_static {
                    rest = &rest[1..];
                }
                let visibility = match rest.first() {
                    Some(&"public") => {
                        rest = &rest[1..];
                        Visibility::Public
                    }
                    Some(&"private") => {
                        rest = &rest[1..];
                        Visibility::Private
                    }
                    _ => Visibility::Public,
                };
                let [ty, name] = rest else {
                    return Err(err("expected `.field [static] [public|private] type name`".into()));
                };
                if !is_ident(name) {
                    return Err(err(format!("invalid field name `{name}`")));
                }
                if class.field(name).is_some() {
                    return Err(err(format!("duplicate field `{name}`")));
                }
                class.fields.push(FieldDef {
                    name: name.to_string(),
                    ty: parse_type(ty).map_err(err)?,
                    is_static,
                    visibility,
                });
            }
            ".method" => {
                if self.method.is_some() {
                    return Err(err("nested `.method`".into()));
                }
                if self.class.is_none() {
                    return Err(err("`.method` outside a class".into()));
                }
                let mut rest = &words[1..];
                let is_static = rest.first() == Some(&"static");
                if is_static {
                    rest = &rest[1..];
                }
                if rest.len() < 2 {
                    return Err(err("expected `.method [static] ret name(params)`".into()));
                }
                let ret = parse_type(rest[0]).map_err(err)?;
                let sig = rest[1..].concat();
                let paren = sig
                    .find('(')
                    .ok_or_else(|| err("method signature lacks `(`".into()))?;
                let name = &sig[..paren];
                if !is_ident(name) {
                    return Err(err(format!("invalid method name `{name}`")));
                }
                let params = parse_descriptor(&format!("{}void", &sig[paren..]))
                    .map_err(err)?
                    .params;
                let descriptor = Descriptor::new(params, ret);
                let class = self.class.as_ref().expect("checked above");
                if class.method(name, &descriptor).is_some() {
                    return Err(err(format!("duplicate method `{name}{descriptor}`")));
                }
                self.method = Some(OpenMethod {
                    def: MethodDef {
                        name: name.to_string(),
                        descriptor,
                        is_static,
                        locals: Vec::new(),
                        body: Vec::new(),
                        labels: Vec::new(),
                        line_map: Vec::new(),
                    },
                    start_line: lineno,
                    current_line: None,
                });
            }
            ".local" => {
                let m = self
                    .method
                    .as_mut()
                    .ok_or_else(|| err("`.local` outside a method".into()))?;
                let (idx, name, ty, scope) = match words.as_slice() {
                    [_, idx, name, ty] => (idx, name, ty, Scope::Whole),
                    [_, idx, name, ty, s, e] => (
                        idx,
                        name,
                        ty,
                        Scope::Labels {
                            start: parse_label(s).map_err(err)?,
                            end: parse_label(e).map_err(err)?,
                        },
                    ),
                    _ => return Err(err("expected `.local idx name type [start end]`".into())),
                };
                if !is_ident(name) {
                    return Err(err(format!("invalid local name `{name}`")));
                }
                let slot = LocalSlot {
                    index: parse_slot(idx).map_err(err)?,
                    name: name.to_string(),
                    ty: parse_type(ty).map_err(err)?,
                    scope,
                };
                let pos = m.def.locals.partition_point(|l| l.index <= slot.index);
                m.def.locals.insert(pos, slot);
            }
            ".end" => {
                let m = self
                    .method
                    .take()
                    .ok_or_else(|| err("`.end` without an open method".into()))?;
                self.class
                    .as_mut()
                    .expect("methods live inside classes")
                    .methods
                    .push(m.def);
            }
            ".test" => {
                if self.method.is_some() {
                    return Err(err("`.test` inside a method".into()));
                }
                let (name, entry, exp) = match words.as_slice() {
                    [_, name, entry, "expect", rest @ ..] => (*name, *entry, rest),
                    _ => {
                        return Err(err(
                            "expected `.test \"name\" Class.method expect <int N|bool B|fail>`".into(),
                        ))
                    }
                };
                let name = name
                    .strip_prefix('"')
                    .and_then(|n| n.strip_suffix('"'))
                    .ok_or_else(|| err("test name must be quoted".into()))?;
                let (class, method) = entry
                    .split_once('.')
                    .filter(|(c, m)| is_ident(c) && is_ident(m))
                    .ok_or_else(|| err(format!("invalid test entry `{entry}`")))?;
                let expectation = match exp {
                    ["int", n] => Expectation::Int(parse_int(n).map_err(err)?),
                    ["bool", "true"] => Expectation::Bool(true),
                    ["bool", "false"] => Expectation::Bool(false),
                    ["fail"] => Expectation::Fail,
                    _ => return Err(err("expected `int N`, `bool B` or `fail`".into())),
                };
                if self.suite.tests.iter().any(|t| t.name == name) {
                    return Err(err(format!("duplicate test `{name}`")));
                }
                self.suite.push(
                    TestCase {
                        name: name.to_string(),
                        entry: Entry {
                            class: class.to_string(),
                            method: method.to_string(),
                        },
                        expectation,
                    },
                    lineno,
                );
            }
            ".equivalent" => {
                let [_, key] = words.as_slice() else {
                    return Err(err("expected `.equivalent \"key\"`".into()));
                };
                let key = key
                    .strip_prefix('"')
                    .and_then(|n| n.strip_suffix('"'))
                    .ok_or_else(|| err("equivalent key must be quoted".into()))?;
                self.equivalents.push(key.to_string());
            }
            "line" => {
                let m = self
                    .method
                    .as_mut()
                    .ok_or_else(|| err("`line` outside a method".into()))?;
                let [_, n] = words.as_slice() else {
                    return Err(err("expected `line N`".into()));
                };
                let n: u32 = n
                    .parse()
                    .ok()
                    .filter(|&n| n >= 1)
                    .ok_or_else(|| err(format!("invalid line number `{n}`")))?;
                m.current_line = Some(n);
            }
            _ if head.starts_with('.') => return Err(err(format!("unknown directive `{head}`"))),
            _ => {
                let m = self
                    .method
                    .as_mut()
                    .ok_or_else(|| err(format!("instruction `{head}` outside a method")))?;
                let mut words = words.as_slice();
                if let Some(label) = words[0].strip_suffix(':') {
                    let label = parse_label(label).map_err(err)?;
                    if m.def.labels.iter().any(|l| l.name == label) {
                        return Err(err(format!("duplicate label `{label}`")));
                    }
                    m.def.labels.push(Label {
                        name: label,
                        index: m.def.body.len(),
                    });
                    words = &words[1..];
                    if words.is_empty() {
                        return Ok(());
                    }
                }
                let ins = parse_instruction_words(words).map_err(|e| {
                    let c = toks.iter().find(|t| t.text == words[0]).map_or(col, |t| t.col);
                    diag(c, format!("{e} (line {lineno})"))
                })?;
                let line = m.current_line.unwrap_or(lineno as u32);
                m.def.body.push(ins);
                m.def.line_map.push(line);
            }
        }
        Ok(())
    }
}

impl fmt::Display for Instruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Instruction as I;
        match self {
            I::Const(Constant::Int(n)) => write!(f, "const int {n}"),
            I::Const(Constant::Bool(b)) => write!(f, "const bool {b}"),
            I::Const(Constant::Null) => f.write_str("const null"),
            I::Load(s) => write!(f, "load {s}"),
            I::Store(s) => write!(f, "store {s}"),
            I::Inc(s, d) => write!(f, "inc {s} {d}"),
            I::Arith(op) => f.write_str(op.mnemonic()),
            I::Neg => f.write_str("neg"),
            I::Not => f.write_str("not"),
            I::Cmp(r) => write!(f, "cmp {}", r.mnemonic()),
            I::Jmp(l) => write!(f, "jmp {l}"),
            I::JmpIf(l) => write!(f, "jmpif {l}"),
            I::Switch { cases, default } => {
                f.write_str("switch")?;
                for (k, l) in cases {
                    write!(f, " {k}:{l}")?;
                }
                write!(f, " default:{default}")
            }
            I::New(c) => write!(f, "new {c}"),
            I::GetField(r) => write!(f, "getfield {}.{} {}", r.class, r.name, r.ty),
            I::PutField(r) => write!(f, "putfield {}.{} {}", r.class, r.name, r.ty),
            I::GetStatic(r) => write!(f, "getstatic {}.{} {}", r.class, r.name, r.ty),
            I::PutStatic(r) => write!(f, "putstatic {}.{} {}", r.class, r.name, r.ty),
            I::Invoke(m) => write!(f, "invoke {m}"),
            I::InvokeStatic(m) => write!(f, "invokestatic {m}"),
            I::Return(t) => write!(f, "return {t}"),
            I::Pop => f.write_str("pop"),
            I::Swap => f.write_str("swap"),
            I::Dup => f.write_str("dup"),
            I::Fail => f.write_str("fail"),
        }
    }
}

fn method_header(m: &MethodDef) -> String {
    let params: Vec<String> = m.descriptor.params.iter().map(ToString::to_string).collect();
    format!(
        ".method {}{} {}({})",
        if m.is_static { "static " } else { "" },
        m.descriptor.ret,
        m.name,
        params.join(",")
    )
}

/// Canonical rendering of one method, one row per item, with a `/*line*/`
/// annotation on every instruction row. `indent` is prefixed to every row.
pub fn render_method_lines(m: &MethodDef, indent: &str) -> Vec<String> {
    let mut out = vec![format!("{indent}{}", method_header(m))];
    for l in &m.locals {
        let scope = match &l.scope {
            Scope::Whole => String::new(),
            Scope::Labels { start, end } => format!(" {start} {end}"),
        };
        out.push(format!("{indent}  .local {} {} {}{scope}", l.index, l.name, l.ty));
    }
    let mut labels = m.labels.iter().peekable();
    for (i, ins) in m.body.iter().enumerate() {
        while let Some(l) = labels.next_if(|l| l.index == i) {
            out.push(format!("{indent}{}:", l.name));
        }
        out.push(format!("{indent}  /*{}*/ {ins}", m.line_map[i]));
    }
    for l in labels {
        out.push(format!("{indent}{}:", l.name));
    }
    out.push(format!("{indent}.end"));
    out
}

/// Canonical text of a program.
pub fn render(program: &Program) -> String {
    let mut out = String::new();
    for (ci, c) in program.classes.iter().enumerate() {
        if ci > 0 {
            out.push('\n');
        }
        match &c.super_name {
            Some(s) => writeln!(out, ".class {} extends {s}", c.name).unwrap(),
            None => writeln!(out, ".class {}", c.name).unwrap(),
        }
        for f in &c.fields {
            writeln!(
                out,
                "  .field {}{} {} {}",
                if f.is_static { "static " } else { "" },
                match f.visibility {
                    Visibility::Public => "public",
                    Visibility::Private => "private",
                },
                f.ty,
                f.name
            )
            .unwrap();
        }
        for m in &c.methods {
            for row in render_method_lines(m, "  ") {
                out.push_str(&row);
                out.push('\n');
            }
        }
    }
    out
}

/// Canonical text of a whole unit: program, then tests and equivalents.
pub fn render_unit(unit: &SourceUnit) -> String {
    let mut out = render(&unit.program);
    if !unit.suite.tests.is_empty() || !unit.equivalents.is_empty() {
        out.push('\n');
    }
    for t in &unit.suite.tests {
        let exp = match t.expectation {
            Expectation::Int(n) => format!("int {n}"),
            Expectation::Bool(b) => format!("bool {b}"),
            Expectation::Fail => "fail".to_string(),
        };
        writeln!(
            out,
            ".test \"{}\" {}.{} expect {exp}",
            t.name, t.entry.class, t.entry.method
        )
        .unwrap();
    }
    for e in &unit.equivalents {
        writeln!(out, ".equivalent \"{e}\"").unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "\
.class Main
.method static int main()
  const int 0
  return int
.end
.test \"zero\" Main.main expect int 0
";

    #[test]
    fn parses_minimal_unit() {
        let u = parse(MINIMAL).unwrap();
        assert_eq!(u.program.classes.len(), 1);
        assert_eq!(u.suite.tests.len(), 1);
        assert_eq!(u.suite.tests[0].expectation, Expectation::Int(0));
        // physical line numbers when no directive is active
        assert_eq!(u.program.classes[0].methods[0].line_map, vec![3, 4]);
    }

    #[test]
    fn line_directive_sets_line_map() {
        let u =
            parse(".class Main\n.method static int main()\n  line 307\n  const int 0\n  return int\n.end\n")
                .unwrap();
        assert_eq!(u.program.classes[0].methods[0].line_map, vec![307, 307]);
    }

    #[test]
    fn malformed_opcode_names_line() {
        let err = parse(".class Main\n.method static int main()\n  frobnicate 3\n  return int\n.end\n")
            .unwrap_err();
        assert_eq!(err.diagnostics[0].line, 3);
        assert!(err.diagnostics[0].message.contains("frobnicate"));
        assert!(err.to_string().contains("line 3"));
    }

    #[test]
    fn reports_duplicates() {
        let err = parse_syntax(".class A\n.class A\n").unwrap_err();
        assert!(err.diagnostics[0].message.contains("duplicate class"));
        let err = parse_syntax(".class A\n.field int x\n.field bool x\n").unwrap_err();
        assert!(err.diagnostics[0].message.contains("duplicate field"));
    }

    #[test]
    fn unresolved_reference_is_a_verification_diagnostic() {
        let err = parse(".class Main\n.method static int main()\n  line 9\n  getstatic Main.nope int\n  return int\n.end\n")
            .unwrap_err();
        assert_eq!(err.diagnostics[0].line, 9);
        assert!(err.diagnostics[0].message.contains("verification failed"));
    }

    #[test]
    fn unresolved_test_entry() {
        let err = parse(".class Main\n.method static int main()\n  const int 0\n  return int\n.end\n.test \"t\" Main.other expect int 0\n")
            .unwrap_err();
        assert_eq!(err.diagnostics[0].line, 6);
    }

    #[test]
    fn render_annotates_every_row_and_is_idempotent() {
        let src = "\
.class Box extends Object
.field private int v
.method int get()
  .local 0 this Box
  line 10
  load 0
  getfield Box.v int
  return int
.end
.method static int pick(int)
  .local 0 k int
  .local 1 r int S E
  load 0
  switch 1:ONE default:OTHER
ONE:
S:
  const int 10
  store 1
  load 1
  return int
E:
OTHER:
  const int -1
  return int
.end
";
        let once = render(&parse(src).unwrap().program);
        let twice = render(&parse(&once).unwrap().program);
        assert_eq!(once, twice);
        for row in once.lines().filter(|r| {
            let t = r.trim_start();
            !t.starts_with('.') && !t.ends_with(':')
        }) {
            assert!(row.trim_start().starts_with("/*"), "unannotated row {row}");
        }
        assert!(once.contains("/*10*/ getfield Box.v int"));
        assert!(!once.contains("extends Object"));
    }

    #[test]
    fn instruction_text_round_trips() {
        for text in [
            "const int -4",
            "const bool true",
            "const null",
            "inc 2 -1",
            "switch -1:A 3:B default:C",
            "invoke Box.get()int",
            "invokestatic Main.f(int,Box)bool",
            "putstatic Main.count int",
            "ushr",
        ] {
            let ins = parse_instruction(text).unwrap();
            assert_eq!(ins.to_string(), text);
        }
    }
}
