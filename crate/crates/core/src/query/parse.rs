use crate::error::{CctError, Result};

use super::{CmpOp, PathPattern, Predicate, Quantifier, Query, Step};

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Slash,
    Star,
    Plus,
    Dot,
    LBracket,
    RBracket,
    Comma,
    LParen,
    RParen,
    Bang,
    Match,
    Cmp(CmpOp),
    Str(String),
    Num(f64),
    And,
    Or,
    Not,
    End,
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Slash => "`/`".into(),
        Tok::Star => "`*`".into(),
        Tok::Plus => "`+`".into(),
        Tok::Dot => "`.`".into(),
        Tok::LBracket => "`[`".into(),
        Tok::RBracket => "`]`".into(),
        Tok::Comma => "`,`".into(),
        Tok::LParen => "`(`".into(),
        Tok::RParen => "`)`".into(),
        Tok::Bang => "`!`".into(),
        Tok::Match => "`=~`".into(),
        Tok::Cmp(op) => format!("`{}`", op.symbol()),
        Tok::Str(_) => "string".into(),
        Tok::Num(_) => "number".into(),
        Tok::And => "AND".into(),
        Tok::Or => "OR".into(),
        Tok::Not => "NOT".into(),
        Tok::End => "end of input".into(),
    }
}

fn syntax(position: usize, expected: &[&str]) -> CctError {
    CctError::QuerySyntax {
        position,
        expected: expected.iter().map(|s| s.to_string()).collect(),
    }
}

fn lex(text: &str) -> Result<Vec<(usize, Tok)>> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let two = |s: &str| text[i..].starts_with(s);
        let tok = match c {
            b'/' => Tok::Slash,
            b'*' => Tok::Star,
            b'+' => Tok::Plus,
            b'.' => Tok::Dot,
            b'[' => Tok::LBracket,
            b']' => Tok::RBracket,
            b',' => Tok::Comma,
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b'=' if two("=~") => {
                i += 1;
                Tok::Match
            }
            b'=' if two("==") => {
                i += 1;
                Tok::Cmp(CmpOp::Eq)
            }
            b'<' if two("<=") => {
                i += 1;
                Tok::Cmp(CmpOp::Le)
            }
            b'>' if two(">=") => {
                i += 1;
                Tok::Cmp(CmpOp::Ge)
            }
            b'<' => Tok::Cmp(CmpOp::Lt),
            b'>' => Tok::Cmp(CmpOp::Gt),
            b'!' => Tok::Bang,
            b'"' => {
                let mut s = String::new();
                let mut chars = text[i + 1..].char_indices();
                let mut closed = None;
                while let Some((off, ch)) = chars.next() {
                    match ch {
                        '"' => {
                            closed = Some(i + 1 + off);
                            break;
                        }
                        '\\' => match chars.next() {
                            Some((_, '"')) => s.push('"'),
                            Some((_, '\\')) => s.push('\\'),
                            Some((_, 'n')) => s.push('\n'),
                            Some((_, 't')) => s.push('\t'),
                            Some((_, 'r')) => s.push('\r'),
                            Some((_, other)) => {
                                s.push('\\');
                                s.push(other);
                            }
                            None => break,
                        },
                        other => s.push(other),
                    }
                }
                let Some(end) = closed else {
                    return Err(syntax(text.len(), &["closing `\"`"]));
                };
                i = end;
                Tok::Str(s)
            }
            b'-' | b'0'..=b'9' => {
                let mut j = i + 1;
                let digits = |j: &mut usize| {
                    let s = *j;
                    while *j < bytes.len() && bytes[*j].is_ascii_digit() {
                        *j += 1;
                    }
                    *j > s
                };
                if c == b'-' && !digits(&mut j) {
                    return Err(syntax(start, &["number"]));
                }
                digits(&mut j);
                if j + 1 < bytes.len() && bytes[j] == b'.' && bytes[j + 1].is_ascii_digit() {
                    j += 1;
                    digits(&mut j);
                }
                if j < bytes.len() && (bytes[j] == b'e' || bytes[j] == b'E') {
                    let mut k = j + 1;
                    if k < bytes.len() && (bytes[k] == b'+' || bytes[k] == b'-') {
                        k += 1;
                    }
                    if digits(&mut k) {
                        j = k;
                    }
                }
                let v: f64 = text[start..j].parse().map_err(|_| syntax(start, &["number"]))?;
                if !v.is_finite() {
                    return Err(syntax(start, &["finite number"]));
                }
                i = j - 1;
                Tok::Num(v)
            }
            c if c.is_ascii_alphabetic() => {
                let mut j = i;
                while j < bytes.len() && bytes[j].is_ascii_alphanumeric() {
                    j += 1;
                }
                let word = &text[i..j];
                i = j - 1;
                match word.to_ascii_uppercase().as_str() {
                    "AND" => Tok::And,
                    "OR" => Tok::Or,
                    "NOT" => Tok::Not,
                    _ => return Err(syntax(start, &["AND", "OR", "NOT", "path step"])),
                }
            }
            _ => return Err(syntax(start, &["path step", "AND", "OR", "NOT", "`(`"])),
        };
        out.push((start, tok));
        i += 1;
    }
    out.push((text.len(), Tok::End));
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].1
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].0
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].1.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok) -> Result<()> {
        if *self.peek() == want {
            self.bump();
            Ok(())
        } else {
            Err(syntax(self.offset(), &[&describe(&want)]))
        }
    }

    fn query(&mut self) -> Result<Query> {
        let mut q = self.conjunction()?;
        while *self.peek() == Tok::Or {
            self.bump();
            q = q.or(self.conjunction()?);
        }
        Ok(q)
    }

    fn conjunction(&mut self) -> Result<Query> {
        let mut q = self.unary()?;
        while *self.peek() == Tok::And {
            self.bump();
            q = q.and(self.unary()?);
        }
        Ok(q)
    }

    fn unary(&mut self) -> Result<Query> {
        match self.peek() {
            Tok::Not => {
                self.bump();
                Ok(self.unary()?.not())
            }
            Tok::LParen => {
                self.bump();
                let q = self.query()?;
                self.expect(Tok::RParen)?;
                Ok(q)
            }
            _ => Ok(Query::Pattern(self.pattern()?)),
        }
    }

    fn pattern(&mut self) -> Result<PathPattern> {
        let mut steps = vec![self.step()?];
        while *self.peek() == Tok::Slash {
            self.bump();
            steps.push(self.step()?);
        }
        PathPattern::new(steps)
    }

    fn step(&mut self) -> Result<Step> {
        let at = self.offset();
        let prefix = match self.peek() {
            Tok::Dot => {
                self.bump();
                return Ok(Step::any(Quantifier::One));
            }
            Tok::Star => Some(Quantifier::Star),
            Tok::Plus => Some(Quantifier::Plus),
            Tok::LBracket => None,
            _ => return Err(syntax(at, &["`.`", "`*`", "`+`", "`[`", "NOT", "`(`"])),
        };
        if let Some(q) = prefix {
            self.bump();
            if *self.peek() != Tok::LBracket {
                return Ok(Step::any(q));
            }
        }
        self.expect(Tok::LBracket)?;
        let mut predicates = Vec::new();
        if *self.peek() != Tok::RBracket {
            predicates.push(self.predicate()?);
            while *self.peek() == Tok::Comma {
                self.bump();
                predicates.push(self.predicate()?);
            }
        }
        self.expect(Tok::RBracket)?;
        let postfix = match self.peek() {
            Tok::Star => Some(Quantifier::Star),
            Tok::Plus => Some(Quantifier::Plus),
            _ => None,
        };
        let quantifier = match (prefix, postfix) {
            (Some(_), Some(_)) => return Err(syntax(self.offset(), &["`/`", "end of step"])),
            (Some(q), None) => q,
            (None, Some(q)) => {
                self.bump();
                q
            }
            (None, None) => Quantifier::One,
        };
        Ok(Step { quantifier, predicates })
    }

    fn int_operand(&mut self) -> Result<(CmpOp, i64)> {
        let op = self.cmp_op()?;
        let at = self.offset();
        match self.bump() {
            Tok::Num(v) if v.fract() == 0.0 && v.abs() < 9.0e15 => Ok((op, v as i64)),
            _ => Err(syntax(at, &["integer"])),
        }
    }

    fn cmp_op(&mut self) -> Result<CmpOp> {
        let at = self.offset();
        match self.bump() {
            Tok::Cmp(op) => Ok(op),
            _ => Err(syntax(at, &["`<`", "`<=`", "`==`", "`>=`", "`>`"])),
        }
    }

    fn predicate(&mut self) -> Result<Predicate> {
        let at = self.offset();
        let negated = if *self.peek() == Tok::Bang {
            self.bump();
            true
        } else {
            false
        };
        let key = match self.bump() {
            Tok::Str(s) => s,
            _ => return Err(syntax(self.toks[self.pos.saturating_sub(1)].0, &["string"])),
        };
        if negated {
            return if key == "leaf" {
                Ok(Predicate::Leaf(false))
            } else {
                Err(syntax(at, &["`!\"leaf\"`"]))
            };
        }
        match key.as_str() {
            "leaf" => Ok(Predicate::Leaf(true)),
            "name" => {
                let at = self.offset();
                let regex = match self.bump() {
                    Tok::Match => true,
                    Tok::Cmp(CmpOp::Eq) => false,
                    _ => return Err(syntax(at, &["`=~`", "`==`"])),
                };
                let at = self.offset();
                let Tok::Str(s) = self.bump() else {
                    return Err(syntax(at, &["string"]));
                };
                if regex {
                    Predicate::name_regex(s)
                } else {
                    Ok(Predicate::NameEq(s))
                }
            }
            "depth" => {
                let (op, value) = self.int_operand()?;
                Ok(Predicate::Depth { op, value })
            }
            "child_index" => {
                let (op, value) = self.int_operand()?;
                Ok(Predicate::ChildIndex { op, value })
            }
            _ => {
                let op = self.cmp_op()?;
                let at = self.offset();
                match self.bump() {
                    Tok::Num(v) => Predicate::metric(key, op, v),
                    _ => Err(syntax(at, &["number"])),
                }
            }
        }
    }
}

/// Parses query text. Keywords are case-insensitive; whitespace between
/// tokens is ignored.
pub fn parse(text: &str) -> Result<Query> {
    let mut p = Parser {
        toks: lex(text)?,
        pos: 0,
    };
    let q = p.query()?;
    if *p.peek() != Tok::End {
        return Err(syntax(p.offset(), &["AND", "OR", "`/`", "end of input"]));
    }
    Ok(q)
}
