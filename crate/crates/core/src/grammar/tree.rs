//! Syntax trees and their bracketed text form.
//!
//! `(S#0[0,12] (N#2[0,6] "Chopin") (VP#1[7,12] (V#4[7,12] "plays")))`
//!
//! Rule ids (`#n`) and spans (`[a,b]`) are optional when reading. Spaces the
//! grammar inserts between symbols are not written.

use serde::{Deserialize, Serialize};

use super::{Grammar, GrammarError, NtId, Symbol};

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SyntaxTree {
    /// Nonterminal name, or the text of a terminal leaf.
    pub label: String,
    /// Rule id at nonterminal nodes; `None` at terminal leaves.
    pub rule: Option<usize>,
    pub start: usize,
    pub end: usize,
    pub children: Vec<SyntaxTree>,
    pub implicit: bool,
}

impl SyntaxTree {
    pub fn leaf(text: &str, start: usize, implicit: bool) -> SyntaxTree {
        SyntaxTree {
            label: text.to_string(),
            rule: None,
            start,
            end: start + text.chars().count(),
            children: Vec::new(),
            implicit,
        }
    }

    pub fn is_terminal(&self) -> bool {
        self.rule.is_none()
    }

    /// Concatenated terminal text.
    pub fn yield_text(&self) -> String {
        let mut out = String::new();
        self.collect_yield(&mut out);
        out
    }

    fn collect_yield(&self, out: &mut String) {
        if self.is_terminal() {
            out.push_str(&self.label);
        }
        for c in &self.children {
            c.collect_yield(out);
        }
    }

    /// True if children tile each node's span and leaves match their text.
    pub fn spans_tile(&self) -> bool {
        if self.is_terminal() {
            return self.end - self.start == self.label.chars().count() && self.children.is_empty();
        }
        let mut pos = self.start;
        for c in &self.children {
            if c.start != pos || !c.spans_tile() {
                return false;
            }
            pos = c.end;
        }
        pos == self.end
    }

    pub fn to_text(&self, spans: bool) -> String {
        let mut out = String::new();
        self.write(&mut out, spans);
        out
    }

    fn write(&self, out: &mut String, spans: bool) {
        if self.is_terminal() {
            out.push_str(&format!("{:?}", self.label));
            return;
        }
        out.push('(');
        out.push_str(&self.label);
        if let Some(r) = self.rule {
            out.push_str(&format!("#{r}"));
        }
        if spans {
            out.push_str(&format!("[{},{}]", self.start, self.end));
        }
        for c in self.children.iter().filter(|c| !c.implicit) {
            out.push(' ');
            c.write(out, spans);
        }
        out.push(')');
    }

    /// Number of nonterminal nodes.
    pub fn size(&self) -> usize {
        usize::from(!self.is_terminal()) + self.children.iter().map(SyntaxTree::size).sum::<usize>()
    }
}

/// A tree as written, before rules are resolved against a grammar.
#[derive(Clone, Debug, PartialEq)]
pub enum RawTree {
    Node {
        label: String,
        rule: Option<usize>,
        children: Vec<RawTree>,
    },
    Text(String),
}

impl RawTree {
    pub fn parse(s: &str) -> Result<RawTree, GrammarError> {
        let chars: Vec<char> = s.chars().collect();
        let mut pos = 0;
        let t = parse_node(&chars, &mut pos)?;
        skip_ws(&chars, &mut pos);
        if pos != chars.len() {
            return Err(GrammarError::Tree(format!("trailing input at offset {pos}")));
        }
        Ok(t)
    }
}

fn skip_ws(c: &[char], pos: &mut usize) {
    while *pos < c.len() && c[*pos].is_whitespace() {
        *pos += 1;
    }
}

fn parse_node(c: &[char], pos: &mut usize) -> Result<RawTree, GrammarError> {
    let bad = |m: &str, p: usize| GrammarError::Tree(format!("{m} at offset {p}"));
    skip_ws(c, pos);
    match c.get(*pos) {
        Some('"') => {
            let rest: String = c[*pos..].iter().collect();
            let (text, tail) = crate::ontology::parse_quoted(&rest).ok_or_else(|| bad("unterminated string", *pos))?;
            *pos = c.len() - tail.chars().count();
            Ok(RawTree::Text(text))
        }
        Some('(') => {
            *pos += 1;
            let start = *pos;
            while *pos < c.len() && !c[*pos].is_whitespace() && !"()#[\"".contains(c[*pos]) {
                *pos += 1;
            }
            let label: String = c[start..*pos].iter().collect();
            if label.is_empty() {
                return Err(bad("missing label", start));
            }
            let mut rule = None;
            if c.get(*pos) == Some(&'#') {
                *pos += 1;
                let s = *pos;
                while *pos < c.len() && c[*pos].is_ascii_digit() {
                    *pos += 1;
                }
                let digits: String = c[s..*pos].iter().collect();
                rule = Some(digits.parse().map_err(|_| bad("bad rule id", s))?);
            }
            if c.get(*pos) == Some(&'[') {
                while *pos < c.len() && c[*pos] != ']' {
                    *pos += 1;
                }
                *pos += 1;
            }
            let mut children = Vec::new();
            loop {
                skip_ws(c, pos);
                match c.get(*pos) {
                    Some(')') => {
                        *pos += 1;
                        break;
                    }
                    Some(_) => children.push(parse_node(c, pos)?),
                    None => return Err(bad("unclosed node", *pos)),
                }
            }
            Ok(RawTree::Node { label, rule, children })
        }
        _ => Err(bad("expected `(` or a string", *pos)),
    }
}

impl Grammar {
    /// Matches a written tree against the grammar's rules, restoring
    /// implicit spaces and computing spans.
    pub fn resolve_tree(&self, raw: &RawTree) -> Result<SyntaxTree, GrammarError> {
        let mut pos = 0;
        let t = self.resolve_node(raw, &mut pos)?;
        Ok(t)
    }

    fn resolve_node(&self, raw: &RawTree, pos: &mut usize) -> Result<SyntaxTree, GrammarError> {
        let RawTree::Node { label, rule, children } = raw else {
            return Err(GrammarError::Tree("a tree must start with a nonterminal".into()));
        };
        let nt = self
            .nt(label)
            .ok_or_else(|| GrammarError::Tree(format!("unknown nonterminal `{label}`")))?;
        let matches = |r: &super::AugmentedRule| {
            let explicit: Vec<&super::RhsItem> = r.rhs.iter().filter(|i| !i.implicit).collect();
            explicit.len() == children.len()
                && explicit.iter().zip(children).all(|(it, ch)| match (&it.symbol, ch) {
                    (Symbol::Terminal(t), RawTree::Text(s)) => t == s,
                    (Symbol::Nonterminal(b), RawTree::Node { label, .. }) => self.nt_name(*b) == label,
                    _ => false,
                })
        };
        let rule_id = match rule {
            Some(id) => {
                let r = self.rules[nt]
                    .get(*id)
                    .ok_or_else(|| GrammarError::Tree(format!("`{label}` has no rule #{id}")))?;
                if !matches(r) {
                    return Err(GrammarError::Tree(format!(
                        "rule #{id} of `{label}` does not match its children"
                    )));
                }
                *id
            }
            None => {
                let cands: Vec<usize> = self.rules[nt].iter().filter(|r| matches(r)).map(|r| r.id).collect();
                match cands.as_slice() {
                    [one] => *one,
                    [] => {
                        return Err(GrammarError::Tree(format!(
                            "no rule of `{label}` matches its children"
                        )))
                    }
                    _ => {
                        return Err(GrammarError::Tree(format!(
                            "several rules of `{label}` match; add a #id"
                        )))
                    }
                }
            }
        };
        let start = *pos;
        let mut out = Vec::new();
        let mut kids = children.iter();
        for item in &self.rules[nt][rule_id].rhs {
            if item.implicit {
                let Symbol::Terminal(t) = &item.symbol else { unreachable!() };
                out.push(SyntaxTree::leaf(t, *pos, true));
                *pos += t.chars().count();
                continue;
            }
            let child = kids.next().expect("matched above");
            match &item.symbol {
                Symbol::Terminal(t) => {
                    out.push(SyntaxTree::leaf(t, *pos, false));
                    *pos += t.chars().count();
                }
                Symbol::Nonterminal(_) => out.push(self.resolve_node(child, pos)?),
            }
        }
        Ok(SyntaxTree {
            label: label.clone(),
            rule: Some(rule_id),
            start,
            end: *pos,
            children: out,
            implicit: false,
        })
    }

    pub fn parse_tree_text(&self, text: &str) -> Result<SyntaxTree, GrammarError> {
        self.resolve_tree(&RawTree::parse(text)?)
    }

    pub(crate) fn tree_nt(&self, t: &SyntaxTree) -> Result<NtId, GrammarError> {
        self.nt(&t.label)
            .ok_or_else(|| GrammarError::Tree(format!("unknown nonterminal `{}`", t.label)))
    }
}
