//! Text dump of both boxes.
//!
//! ```text
//! DSKE-BOX v1 q=29
//! 5 9 16 22 23 28        <- six lines of residues
//! ...
//! 1a 2a 3a 4a 5a 6a      <- six lines of labels
//! ...
//! ```

use thiserror::Error;

use crate::sbox::{Label, Residue, SBoxS1, SBoxS2, GRID};

pub const HEADER_PREFIX: &str = "DSKE-BOX v1 q=";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DumpError {
    #[error("line {0}: expected header `DSKE-BOX v1 q=<q>`")]
    BadHeader(usize),
    #[error("expected {expected} lines, found {found}")]
    LineCount { expected: usize, found: usize },
    #[error("line {line}: expected 6 fields, found {found}")]
    FieldCount { line: usize, found: usize },
    #[error("line {line}: bad residue {token:?}")]
    BadResidue { line: usize, token: String },
    #[error("line {line}: bad label {token:?}")]
    BadLabel { line: usize, token: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoxDump {
    pub q: u32,
    pub s1: [[Residue; GRID]; GRID],
    pub s2: [[Label; GRID]; GRID],
}

impl BoxDump {
    pub fn new(s1: &SBoxS1, s2: &SBoxS2) -> Self {
        Self {
            q: s1.params().q(),
            s1: *s1.cells(),
            s2: *s2.cells(),
        }
    }

    pub fn render(&self) -> String {
        let mut out = format!("{HEADER_PREFIX}{}\n", self.q);
        for row in &self.s1 {
            out += &join(row);
        }
        for row in &self.s2 {
            out += &join(row);
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, DumpError> {
        let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
        let expected = 1 + 2 * GRID;
        if lines.len() != expected {
            return Err(DumpError::LineCount {
                expected,
                found: lines.len(),
            });
        }
        let q: u32 = lines[0]
            .trim()
            .strip_prefix(HEADER_PREFIX)
            .and_then(|q| q.parse().ok())
            .filter(|&q| q > 0)
            .ok_or(DumpError::BadHeader(1))?;

        let mut s1 = [[0; GRID]; GRID];
        for (r, line) in lines[1..=GRID].iter().enumerate() {
            let lineno = r + 2;
            for (c, tok) in fields(line, lineno)?.into_iter().enumerate() {
                s1[r][c] = tok
                    .parse::<Residue>()
                    .ok()
                    .filter(|&v| v < q)
                    .ok_or_else(|| DumpError::BadResidue {
                        line: lineno,
                        token: tok.to_string(),
                    })?;
            }
        }
        let mut s2 = [[Label::for_cell(0, 0); GRID]; GRID];
        for (r, line) in lines[GRID + 1..].iter().enumerate() {
            let lineno = r + GRID + 2;
            for (c, tok) in fields(line, lineno)?.into_iter().enumerate() {
                s2[r][c] = tok.parse().map_err(|_| DumpError::BadLabel {
                    line: lineno,
                    token: tok.to_string(),
                })?;
            }
        }
        Ok(Self { q, s1, s2 })
    }

    /// Whether the label block is the standard public box.
    pub fn has_standard_s2(&self) -> bool {
        &self.s2 == SBoxS2::standard().cells()
    }
}

fn join<T: ToString>(row: &[T]) -> String {
    let parts: Vec<String> = row.iter().map(T::to_string).collect();
    parts.join(" ") + "\n"
}

fn fields(line: &str, lineno: usize) -> Result<Vec<&str>, DumpError> {
    let f: Vec<&str> = line.split_whitespace().collect();
    if f.len() != GRID {
        return Err(DumpError::FieldCount {
            line: lineno,
            found: f.len(),
        });
    }
    Ok(f)
}
