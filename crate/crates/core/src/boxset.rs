//! Coordinate-wise box constraints and their interval taxonomy.

use std::fmt;
use std::str::FromStr;

use serde::ser::{Serialize, SerializeTuple, Serializer};

use crate::error::{check_len, Error, Result};

/// A closed interval of the extended real line. Either endpoint may be infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    lower: f64,
    upper: f64,
}

/// Sign of the endpoint nearest zero in a sign-definite interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Negative,
    Positive,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Negative => -1.0,
            Sign::Positive => 1.0,
        }
    }
}

/// Interval classes.
///
/// `SignDefinite` intervals exclude zero and have a finite endpoint `c`
/// nearest zero (`[c, inf)`, `[c, d]` with `0 < c`, and their mirror
/// images). `Straddling` intervals are finite with zero strictly inside.
/// Everything else (an endpoint exactly at zero, or an interval unbounded on
/// the side that contains zero, e.g. the whole line) is `Boundary`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntervalClass {
    SignDefinite { anchor: Sign },
    Straddling,
    Boundary,
}

impl Interval {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if lower.is_nan()
            || upper.is_nan()
            || lower > upper
            || lower == f64::INFINITY
            || upper == f64::NEG_INFINITY
        {
            return Err(Error::InvalidInterval { lower, upper });
        }
        Ok(Self { lower, upper })
    }

    pub fn whole_line() -> Self {
        Self {
            lower: f64::NEG_INFINITY,
            upper: f64::INFINITY,
        }
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn classify(&self) -> IntervalClass {
        let (l, u) = (self.lower, self.upper);
        if l > 0.0 {
            IntervalClass::SignDefinite {
                anchor: Sign::Positive,
            }
        } else if u < 0.0 {
            IntervalClass::SignDefinite {
                anchor: Sign::Negative,
            }
        } else if l < 0.0 && u > 0.0 && l.is_finite() && u.is_finite() {
            IntervalClass::Straddling
        } else {
            IntervalClass::Boundary
        }
    }

    /// Euclidean projection of `w` onto the interval.
    #[inline]
    pub fn project(&self, w: f64) -> f64 {
        w.max(self.lower).min(self.upper)
    }

    pub fn contains(&self, w: f64) -> bool {
        self.lower <= w && w <= self.upper
    }

    /// `I / tau`.
    pub fn scale(&self, tau: f64) -> Result<Self> {
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(Error::InvalidParameter {
                name: "tau",
                value: tau,
                reason: "must be positive and finite",
            });
        }
        Ok(Self {
            lower: self.lower / tau,
            upper: self.upper / tau,
        })
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", fmt_bound(self.lower), fmt_bound(self.upper))
    }
}

pub(crate) fn fmt_bound(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".to_string()
    } else if v == f64::NEG_INFINITY {
        "-inf".to_string()
    } else {
        format!("{v:?}")
    }
}

pub(crate) fn parse_bound(tok: &str) -> Option<f64> {
    match tok {
        "inf" | "+inf" => Some(f64::INFINITY),
        "-inf" => Some(f64::NEG_INFINITY),
        _ => {
            let v = f64::from_str(tok).ok()?;
            v.is_finite().then_some(v)
        }
    }
}

impl Serialize for Interval {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut t = serializer.serialize_tuple(2)?;
        t.serialize_element(&fmt_bound(self.lower))?;
        t.serialize_element(&fmt_bound(self.upper))?;
        t.end()
    }
}

/// The product set `I_1 x ... x I_n`.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
#[serde(transparent)]
pub struct BoxSet {
    intervals: Vec<Interval>,
}

impl BoxSet {
    pub fn new(intervals: Vec<Interval>) -> Result<Self> {
        if intervals.is_empty() {
            return Err(Error::Other("box must have at least one coordinate".into()));
        }
        Ok(Self { intervals })
    }

    /// `I^n`.
    pub fn uniform(interval: Interval, n: usize) -> Result<Self> {
        Self::new(vec![interval; n])
    }

    pub fn symmetric(radius: f64, n: usize) -> Result<Self> {
        Self::uniform(Interval::new(-radius, radius)?, n)
    }

    /// The unconstrained box `R^n`.
    pub fn whole_space(n: usize) -> Result<Self> {
        Self::uniform(Interval::whole_line(), n)
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    pub fn project(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len("box projection operand", self.len(), v.len())?;
        Ok(self
            .intervals
            .iter()
            .zip(v)
            .map(|(i, &w)| i.project(w))
            .collect())
    }

    pub fn contains(&self, x: &[f64]) -> Result<bool> {
        check_len("box membership operand", self.len(), x.len())?;
        Ok(self.intervals.iter().zip(x).all(|(i, &w)| i.contains(w)))
    }

    /// Parses the text box format: one `lower upper` pair per line.
    pub fn parse(text: &str) -> Result<Self> {
        let mut intervals = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let toks: Vec<&str> = line.split_whitespace().collect();
            if toks.len() != 2 {
                return Err(Error::Other(format!(
                    "line {lineno}: expected 2 tokens, found {}",
                    toks.len()
                )));
            }
            let lo = parse_bound(toks[0])
                .ok_or_else(|| Error::Other(format!("line {lineno}: bad bound {:?}", toks[0])))?;
            let hi = parse_bound(toks[1])
                .ok_or_else(|| Error::Other(format!("line {lineno}: bad bound {:?}", toks[1])))?;
            let iv =
                Interval::new(lo, hi).map_err(|e| Error::Other(format!("line {lineno}: {e}")))?;
            intervals.push(iv);
        }
        Self::new(intervals)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for i in &self.intervals {
            s.push_str(&fmt_bound(i.lower));
            s.push(' ');
            s.push_str(&fmt_bound(i.upper));
            s.push('\n');
        }
        s
    }
}
