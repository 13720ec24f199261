//! Bracketed L-system strings, `F(len)[+(a)F(..)][-(a)F(..)]`.

use crate::growth::{BranchNode, CoralTree};
use crate::io::svg::child_turn;
use thiserror::Error;

pub fn emit(tree: &CoralTree, angle_deg: f64) -> String {
    let mut out = String::new();
    write_node(&tree.root, angle_deg, &mut out);
    out
}

fn write_node(node: &BranchNode, angle: f64, out: &mut String) {
    out.push_str(&format!("F({})", node.lifetime));
    let p = node.children.len();
    for (c, child) in node.children.iter().enumerate() {
        let turn = child_turn(c, p, angle);
        let (sign, mag) = if turn < 0.0 { ('-', -turn) } else { ('+', turn) };
        out.push_str(&format!("[{sign}({mag})"));
        write_node(child, angle, out);
        out.push(']');
    }
}

/// Parsed bracketed string: segment length, turn relative to the parent
/// in degrees, and sub-branches.
#[derive(Debug, Clone, PartialEq)]
pub struct LNode {
    pub length: f64,
    pub turn: f64,
    pub children: Vec<LNode>,
}

impl LNode {
    pub fn count(&self) -> usize {
        1 + self.children.iter().map(LNode::count).sum::<usize>()
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("L-system parse error at byte {pos}: {message}")]
pub struct LsysError {
    pub pos: usize,
    pub message: String,
}

struct Parser<'a> {
    s: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn err<T>(&self, message: &str) -> Result<T, LsysError> {
        Err(LsysError {
            pos: self.pos,
            message: message.to_string(),
        })
    }

    fn expect(&mut self, c: u8) -> Result<(), LsysError> {
        if self.s.get(self.pos) == Some(&c) {
            self.pos += 1;
            Ok(())
        } else {
            self.err(&format!("expected `{}`", c as char))
        }
    }

    fn number(&mut self) -> Result<f64, LsysError> {
        self.expect(b'(')?;
        let start = self.pos;
        while self.pos < self.s.len() && self.s[self.pos] != b')' {
            self.pos += 1;
        }
        let text = std::str::from_utf8(&self.s[start..self.pos]).unwrap_or("");
        let value = text.trim().parse::<f64>().or_else(|_| self.err("invalid number"))?;
        self.expect(b')')?;
        Ok(value)
    }

    fn node(&mut self, turn: f64) -> Result<LNode, LsysError> {
        self.expect(b'F')?;
        let length = self.number()?;
        let mut children = Vec::new();
        while self.s.get(self.pos) == Some(&b'[') {
            self.pos += 1;
            let sign = match self.s.get(self.pos) {
                Some(b'+') => 1.0,
                Some(b'-') => -1.0,
                _ => return self.err("expected `+` or `-`"),
            };
            self.pos += 1;
            let a = self.number()?;
            children.push(self.node(sign * a)?);
            self.expect(b']')?;
        }
        Ok(LNode { length, turn, children })
    }
}

pub fn parse(text: &str) -> Result<LNode, LsysError> {
    let mut p = Parser {
        s: text.trim().as_bytes(),
        pos: 0,
    };
    let root = p.node(0.0)?;
    if p.pos != p.s.len() {
        return p.err("trailing input");
    }
    Ok(root)
}

/// True when brackets are balanced and never close below depth zero.
pub fn brackets_balanced(text: &str) -> bool {
    let mut depth = 0i64;
    for c in text.chars() {
        match c {
            '[' => depth += 1,
            ']' => {
                depth -= 1;
                if depth < 0 {
                    return false;
                }
            }
            _ => {}
        }
    }
    depth == 0
}
