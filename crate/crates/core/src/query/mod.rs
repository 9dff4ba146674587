//! Call-path queries.
//!
//! A query is a boolean combination of anchored path patterns. A pattern is
//! a sequence of steps; each step matches one node (`.`/no prefix), zero or
//! more nodes (`*`) or one or more nodes (`+`) that satisfy a conjunction of
//! predicates:
//!
//! ```text
//! */["name"=~"MPI_.*"]
//! NOT (*/["depth">=5]+)
//! ["name"=="main"]/*["time (inc)">=1.5,!"leaf"]/.
//! ```
//!
//! A pattern selects every node on every root-to-node path that can be
//! segmented to satisfy the steps, so pattern selections are always
//! ancestor-closed.

mod eval;
mod export;
mod parse;

use std::fmt;

use regex::Regex;

use crate::error::{CctError, Result};

pub use eval::{apply, select, select_mask};
pub use export::from_view;
pub use parse::parse;

/// Attribute names that predicates reserve; they cannot be used as metric names.
pub const RESERVED: [&str; 4] = ["name", "depth", "leaf", "child_index"];

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Lt,
    Le,
    Eq,
    Ge,
    Gt,
}

impl CmpOp {
    pub fn eval<T: PartialOrd>(self, lhs: T, rhs: T) -> bool {
        match self {
            CmpOp::Lt => lhs < rhs,
            CmpOp::Le => lhs <= rhs,
            CmpOp::Eq => lhs == rhs,
            CmpOp::Ge => lhs >= rhs,
            CmpOp::Gt => lhs > rhs,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Eq => "==",
            CmpOp::Ge => ">=",
            CmpOp::Gt => ">",
        }
    }

    pub const ALL: [CmpOp; 5] = [CmpOp::Lt, CmpOp::Le, CmpOp::Eq, CmpOp::Ge, CmpOp::Gt];
}

/// A compiled name regex. Matches the whole name. Equality is by pattern text.
#[derive(Clone, Debug)]
pub struct NameRegex {
    pattern: String,
    regex: Regex,
}

impl NameRegex {
    pub fn new(pattern: impl Into<String>) -> Result<Self> {
        let pattern = pattern.into();
        let regex = Regex::new(&format!("^(?:{pattern})$"))
            .map_err(|e| CctError::InvalidPredicate(format!("bad regex `{pattern}`: {e}")))?;
        Ok(NameRegex { pattern, regex })
    }

    pub fn pattern(&self) -> &str {
        &self.pattern
    }

    pub fn is_match(&self, name: &str) -> bool {
        self.regex.is_match(name)
    }
}

impl PartialEq for NameRegex {
    fn eq(&self, other: &Self) -> bool {
        self.pattern == other.pattern
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Predicate {
    NameRegex(NameRegex),
    NameEq(String),
    Metric {
        metric: String,
        op: CmpOp,
        value: f64,
    },
    Depth {
        op: CmpOp,
        value: i64,
    },
    /// Position among the parent's children (or among the roots).
    ChildIndex {
        op: CmpOp,
        value: i64,
    },
    Leaf(bool),
}

impl Predicate {
    pub fn name_regex(pattern: impl Into<String>) -> Result<Self> {
        NameRegex::new(pattern).map(Predicate::NameRegex)
    }

    pub fn metric(metric: impl Into<String>, op: CmpOp, value: f64) -> Result<Self> {
        let metric = metric.into();
        if metric.is_empty() || RESERVED.contains(&metric.as_str()) {
            return Err(CctError::InvalidPredicate(format!(
                "`{metric}` cannot be used as a metric name"
            )));
        }
        if !value.is_finite() {
            return Err(CctError::InvalidPredicate(format!("non-finite value {value}")));
        }
        Ok(Predicate::Metric { metric, op, value })
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Quantifier {
    One,
    Star,
    Plus,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Step {
    pub quantifier: Quantifier,
    /// Conjunction; empty matches any node.
    pub predicates: Vec<Predicate>,
}

impl Step {
    pub fn any(quantifier: Quantifier) -> Self {
        Step {
            quantifier,
            predicates: Vec::new(),
        }
    }

    pub fn one(predicates: Vec<Predicate>) -> Self {
        Step {
            quantifier: Quantifier::One,
            predicates,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PathPattern {
    steps: Vec<Step>,
}

impl PathPattern {
    pub fn new(steps: Vec<Step>) -> Result<Self> {
        if steps.is_empty() {
            return Err(CctError::InvalidPredicate(
                "a path pattern needs at least one step".into(),
            ));
        }
        Ok(PathPattern { steps })
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Query {
    Pattern(PathPattern),
    And(Box<Query>, Box<Query>),
    Or(Box<Query>, Box<Query>),
    Not(Box<Query>),
}

impl Query {
    /// `*`: selects every node.
    pub fn all() -> Query {
        Query::Pattern(PathPattern {
            steps: vec![Step::any(Quantifier::Star)],
        })
    }

    pub fn and(self, other: Query) -> Query {
        Query::And(Box::new(self), Box::new(other))
    }

    pub fn or(self, other: Query) -> Query {
        Query::Or(Box::new(self), Box::new(other))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(self) -> Query {
        Query::Not(Box::new(self))
    }

    /// Balanced disjunction of `parts`, so nesting depth stays logarithmic;
    /// `None` when empty.
    pub fn any_of(parts: impl IntoIterator<Item = Query>) -> Option<Query> {
        let mut level: Vec<Query> = parts.into_iter().collect();
        while level.len() > 1 {
            let mut next = Vec::with_capacity(level.len().div_ceil(2));
            let mut it = level.into_iter();
            while let Some(a) = it.next() {
                next.push(match it.next() {
                    Some(b) => a.or(b),
                    None => a,
                });
            }
            level = next;
        }
        level.pop()
    }
}

fn write_string(f: &mut fmt::Formatter<'_>, s: &str) -> fmt::Result {
    f.write_str("\"")?;
    for ch in s.chars() {
        match ch {
            '"' => f.write_str("\\\"")?,
            '\\' => f.write_str("\\\\")?,
            '\n' => f.write_str("\\n")?,
            '\t' => f.write_str("\\t")?,
            '\r' => f.write_str("\\r")?,
            c => write!(f, "{c}")?,
        }
    }
    f.write_str("\"")
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Predicate::NameRegex(r) => {
                f.write_str("\"name\"=~")?;
                write_string(f, r.pattern())
            }
            Predicate::NameEq(name) => {
                f.write_str("\"name\"==")?;
                write_string(f, name)
            }
            Predicate::Metric { metric, op, value } => {
                write_string(f, metric)?;
                write!(f, "{}{}", op.symbol(), value)
            }
            Predicate::Depth { op, value } => write!(f, "\"depth\"{}{}", op.symbol(), value),
            Predicate::ChildIndex { op, value } => write!(f, "\"child_index\"{}{}", op.symbol(), value),
            Predicate::Leaf(true) => f.write_str("\"leaf\""),
            Predicate::Leaf(false) => f.write_str("!\"leaf\""),
        }
    }
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.predicates.is_empty() {
            return f.write_str(match self.quantifier {
                Quantifier::One => ".",
                Quantifier::Star => "*",
                Quantifier::Plus => "+",
            });
        }
        f.write_str(match self.quantifier {
            Quantifier::One => "",
            Quantifier::Star => "*",
            Quantifier::Plus => "+",
        })?;
        f.write_str("[")?;
        for (i, p) in self.predicates.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{p}")?;
        }
        f.write_str("]")
    }
}

impl fmt::Display for PathPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, s) in self.steps.iter().enumerate() {
            if i > 0 {
                f.write_str("/")?;
            }
            write!(f, "{s}")?;
        }
        Ok(())
    }
}

struct Operand<'a>(&'a Query);

impl fmt::Display for Operand<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Query::Pattern(p) => write!(f, "{p}"),
            q => write!(f, "({q})"),
        }
    }
}

impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Query::Pattern(p) => write!(f, "{p}"),
            Query::And(a, b) => write!(f, "{} AND {}", Operand(a), Operand(b)),
            Query::Or(a, b) => write!(f, "{} OR {}", Operand(a), Operand(b)),
            Query::Not(q) => write!(f, "NOT {}", Operand(q)),
        }
    }
}
