//! Line-oriented rule file format.
//!
//! ```text
//! # comment
//! rule donation:
//!   source "audit 2023-04, finding 3"
//!   call approve(contract-address(deposit), amount(0.1-1))
//!   call deposit(token(same), amount(same), flag(false))
//!   loop 1-3 {
//!     call mint(attacker-address, amount(50-100)) as attacker
//!   }
//! ```
//!
//! Statements may also be separated by `;`, and `call` is optional, so
//! `rule r: deposit; withdraw; loop 1-3 { mint; withdraw }` is one rule.

use thiserror::Error;

use crate::ratio::{self, Rational};
use crate::world::Role;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("line {line}: {message}")]
pub struct RuleParseError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Hint {
    SelfAddress,
    AttackerAddress,
    BenignAddress,
    /// A contract exposing the named abstract function, or any contract.
    ContractAddress(Option<String>),
    Amount(Rational, Rational),
    SameAmount,
    AnyToken,
    NamedToken(String),
    SameToken,
    Flag(bool),
}

impl Hint {
    pub fn kind(&self) -> crate::world::ParamKind {
        use crate::world::ParamKind::*;
        match self {
            Hint::SelfAddress | Hint::AttackerAddress | Hint::BenignAddress | Hint::ContractAddress(_) => {
                Address
            }
            Hint::Amount(..) | Hint::SameAmount => Amount,
            Hint::AnyToken | Hint::NamedToken(_) | Hint::SameToken => Token,
            Hint::Flag(_) => Flag,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleStep {
    pub function: String,
    pub hints: Vec<Hint>,
    /// Sender role override; the rule's attacker actor otherwise.
    pub sender: Option<Role>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub steps: Vec<RuleStep>,
    /// Inclusive repeat bounds for `loop a-b { … }` blocks.
    pub repeat: Option<(u32, u32)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rule {
    pub name: String,
    pub source: String,
    pub blocks: Vec<Block>,
}

impl Rule {
    /// Abstract steps in order, loop bodies counted once.
    pub fn steps(&self) -> impl Iterator<Item = &RuleStep> {
        self.blocks.iter().flat_map(|b| b.steps.iter())
    }

    pub fn len(&self) -> usize {
        self.blocks.iter().map(|b| b.steps.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, PartialEq)]
enum Piece {
    Stmt(String),
    Open(String),
    Close,
}

fn split_pieces(text: &str) -> Vec<(usize, Piece)> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let body = match raw.find('#') {
            Some(i) => &raw[..i],
            None => raw,
        };
        let mut buf = String::new();
        let mut depth = 0i32;
        let mut in_quote = false;
        let flush = |buf: &mut String, out: &mut Vec<(usize, Piece)>| {
            let s = buf.trim();
            if !s.is_empty() {
                out.push((line, Piece::Stmt(s.to_string())));
            }
            buf.clear();
        };
        for c in body.chars() {
            match c {
                '"' => {
                    in_quote = !in_quote;
                    buf.push(c);
                }
                _ if in_quote => buf.push(c),
                '(' => {
                    depth += 1;
                    buf.push(c);
                }
                ')' => {
                    depth -= 1;
                    buf.push(c);
                }
                ';' if depth == 0 => flush(&mut buf, &mut out),
                '{' if depth == 0 => {
                    out.push((line, Piece::Open(buf.trim().to_string())));
                    buf.clear();
                }
                '}' if depth == 0 => {
                    flush(&mut buf, &mut out);
                    out.push((line, Piece::Close));
                }
                _ => buf.push(c),
            }
        }
        flush(&mut buf, &mut out);
    }
    out
}

fn err<T>(line: usize, message: impl Into<String>) -> Result<T, RuleParseError> {
    Err(RuleParseError {
        line,
        message: message.into(),
    })
}

fn is_ident(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

fn parse_bounds(text: &str, line: usize) -> Result<(u32, u32), RuleParseError> {
    let (a, b) = text
        .split_once('-')
        .ok_or_else(|| RuleParseError { line, message: format!("expected `a-b`, got `{text}`") })?;
    let a: u32 = a.trim().parse().or_else(|_| err(line, format!("bad loop bound `{a}`")))?;
    let b: u32 = b.trim().parse().or_else(|_| err(line, format!("bad loop bound `{b}`")))?;
    if a < 1 || a > b {
        return err(line, format!("loop bounds must satisfy 1 <= a <= b, got {a}-{b}"));
    }
    Ok((a, b))
}

fn parse_range(text: &str, line: usize) -> Result<(Rational, Rational), RuleParseError> {
    let (lo, hi) = text
        .split_once('-')
        .ok_or_else(|| RuleParseError { line, message: format!("expected `lo-hi`, got `{text}`") })?;
    let lo = ratio::parse(lo).or_else(|e| err(line, e.to_string()))?;
    let hi = ratio::parse(hi).or_else(|e| err(line, e.to_string()))?;
    if lo <= ratio::zero() || lo > hi {
        return err(line, format!("amount range must satisfy 0 < lo <= hi, got `{text}`"));
    }
    Ok((lo, hi))
}

fn parse_hint(text: &str, line: usize) -> Result<Hint, RuleParseError> {
    let text = text.trim();
    let (head, arg) = match text.find('(') {
        Some(i) if text.ends_with(')') => (&text[..i], Some(text[i + 1..text.len() - 1].trim())),
        Some(_) => return err(line, format!("unbalanced hint `{text}`")),
        None => (text, None),
    };
    let hint = match (head.trim(), arg) {
        ("self-address", None) => Hint::SelfAddress,
        ("attacker-address", None) => Hint::AttackerAddress,
        ("benign-address", None) => Hint::BenignAddress,
        ("contract-address", None) => Hint::ContractAddress(None),
        ("contract-address", Some(f)) if is_ident(f) => Hint::ContractAddress(Some(f.to_string())),
        ("amount", Some("same")) => Hint::SameAmount,
        ("amount", Some(r)) => {
            let (lo, hi) = parse_range(r, line)?;
            Hint::Amount(lo, hi)
        }
        ("token", Some("any")) => Hint::AnyToken,
        ("token", Some("same")) => Hint::SameToken,
        ("token", Some(s)) if is_ident(s) => Hint::NamedToken(s.to_string()),
        ("flag", Some("true")) => Hint::Flag(true),
        ("flag", Some("false")) => Hint::Flag(false),
        _ => return err(line, format!("unknown hint `{text}`")),
    };
    Ok(hint)
}

fn split_top_level(args: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut depth = 0;
    let mut start = 0;
    for (i, c) in args.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                out.push(&args[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    out.push(&args[start..]);
    out.into_iter().filter(|s| !s.trim().is_empty()).collect()
}

fn parse_call(stmt: &str, line: usize) -> Result<RuleStep, RuleParseError> {
    let stmt = stmt.strip_prefix("call ").unwrap_or(stmt).trim();
    let (call, sender) = match stmt.rfind(" as ") {
        Some(i) if !stmt[i..].contains(')') => {
            let role = match stmt[i + 4..].trim() {
                "benign" => Role::BenignUser,
                "attacker" => Role::Attacker,
                "owner" => Role::Owner,
                other => return err(line, format!("unknown sender role `{other}`")),
            };
            (stmt[..i].trim(), Some(role))
        }
        _ => (stmt, None),
    };
    let (name, hints) = match call.find('(') {
        Some(i) => {
            if !call.ends_with(')') {
                return err(line, format!("unbalanced call `{call}`"));
            }
            let inner = &call[i + 1..call.len() - 1];
            let hints = split_top_level(inner)
                .into_iter()
                .map(|h| parse_hint(h, line))
                .collect::<Result<Vec<_>, _>>()?;
            (call[..i].trim(), hints)
        }
        None => (call, Vec::new()),
    };
    if !is_ident(name) {
        return err(line, format!("bad function name `{name}`"));
    }
    Ok(RuleStep {
        function: name.to_string(),
        hints,
        sender,
    })
}

pub fn parse_rules(text: &str) -> Result<Vec<Rule>, RuleParseError> {
    let mut rules: Vec<Rule> = Vec::new();
    let mut header_line = 0;
    let mut open_loop: Option<(usize, Block)> = None;

    let finish = |rules: &mut Vec<Rule>, line: usize| -> Result<(), RuleParseError> {
        match rules.last() {
            Some(r) if r.is_empty() => err(line, format!("rule `{}` has no steps", r.name)),
            _ => Ok(()),
        }
    };

    for (line, piece) in split_pieces(text) {
        match piece {
            Piece::Stmt(s) if s.starts_with("rule ") => {
                if let Some((l, _)) = open_loop {
                    return err(l, "unclosed loop");
                }
                finish(&mut rules, header_line)?;
                let rest = s[5..].trim();
                let (name, tail) = match rest.split_once(':') {
                    Some((n, t)) => (n.trim(), t.trim()),
                    None => return err(line, "expected `rule <name>:`"),
                };
                if !is_ident(name) {
                    return err(line, format!("bad rule name `{name}`"));
                }
                header_line = line;
                rules.push(Rule {
                    name: name.to_string(),
                    source: String::new(),
                    blocks: Vec::new(),
                });
                if !tail.is_empty() {
                    let step = parse_call(tail, line)?;
                    rules.last_mut().unwrap().blocks.push(Block { steps: vec![step], repeat: None });
                }
            }
            Piece::Stmt(s) if s.starts_with("source ") => {
                let rule = match rules.last_mut() {
                    Some(r) => r,
                    None => return err(line, "`source` outside a rule"),
                };
                rule.source = s[7..].trim().trim_matches('"').to_string();
            }
            Piece::Stmt(s) => {
                let step = parse_call(&s, line)?;
                if let Some((_, block)) = open_loop.as_mut() {
                    block.steps.push(step);
                } else {
                    match rules.last_mut() {
                        Some(r) => r.blocks.push(Block { steps: vec![step], repeat: None }),
                        None => return err(line, "step outside a rule"),
                    }
                }
            }
            Piece::Open(head) => {
                if open_loop.is_some() {
                    return err(line, "nested loops are not supported");
                }
                let bounds = match head.strip_prefix("loop") {
                    Some(b) => parse_bounds(b.trim(), line)?,
                    None => return err(line, format!("expected `loop a-b {{`, got `{head}`")),
                };
                if rules.is_empty() {
                    return err(line, "loop outside a rule");
                }
                open_loop = Some((line, Block { steps: Vec::new(), repeat: Some(bounds) }));
            }
            Piece::Close => match open_loop.take() {
                Some((l, block)) => {
                    if block.steps.is_empty() {
                        return err(l, "empty loop");
                    }
                    rules.last_mut().unwrap().blocks.push(block);
                }
                None => return err(line, "unmatched `}`"),
            },
        }
    }
    if let Some((l, _)) = open_loop {
        return err(l, "unclosed loop");
    }
    finish(&mut rules, header_line)?;
    Ok(rules)
}
