//! Positionwise pairing of a secret residue window with a public label window.

use thiserror::Error;

use crate::sbox::{Label, Residue, SubBoxSelection, Window};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodebookError {
    #[error("window sizes differ: {s1}x{s1} residues against {s2}x{s2} labels")]
    DimensionMismatch { s1: usize, s2: usize },
    #[error("residue window repeats a value, so the mapping would not be invertible")]
    DuplicateValues,
    #[error("residue {0} is not in the session window")]
    ValueNotInWindow(Residue),
    #[error("label {0} is not in the session window")]
    LabelNotInWindow(Label),
}

/// The per-session substitution table. Cell `(i, j)` of the residue window is
/// sent as the label at cell `(i, j)` of the label window.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Codebook {
    s1: Window<Residue>,
    s2: Window<Label>,
}

impl Codebook {
    pub fn pair(s1: Window<Residue>, s2: Window<Label>) -> Result<Self, CodebookError> {
        if s1.k() != s2.k() {
            return Err(CodebookError::DimensionMismatch {
                s1: s1.k(),
                s2: s2.k(),
            });
        }
        if !s1.is_duplicate_free() {
            return Err(CodebookError::DuplicateValues);
        }
        Ok(Self { s1, s2 })
    }

    pub fn k(&self) -> usize {
        self.s1.k()
    }

    pub fn s1_window(&self) -> &Window<Residue> {
        &self.s1
    }

    pub fn s2_window(&self) -> &Window<Label> {
        &self.s2
    }

    pub fn s1_origin(&self) -> SubBoxSelection {
        self.s1.origin()
    }

    pub fn s2_origin(&self) -> SubBoxSelection {
        self.s2.origin()
    }

    pub fn encode(&self, value: Residue) -> Result<Label, CodebookError> {
        let pos = self
            .s1
            .values()
            .iter()
            .position(|&v| v == value)
            .ok_or(CodebookError::ValueNotInWindow(value))?;
        Ok(self.s2.values()[pos])
    }

    pub fn decode(&self, label: Label) -> Result<Residue, CodebookError> {
        let pos = self
            .s2
            .values()
            .iter()
            .position(|&l| l == label)
            .ok_or(CodebookError::LabelNotInWindow(label))?;
        Ok(self.s1.values()[pos])
    }

    /// Residue and label at window cell `(i, j)`.
    pub fn entry(&self, i: usize, j: usize) -> (Residue, Label) {
        (self.s1.get(i, j), self.s2.get(i, j))
    }

    pub fn entries(&self) -> impl Iterator<Item = (Residue, Label)> + '_ {
        self.s1
            .values()
            .iter()
            .copied()
            .zip(self.s2.values().iter().copied())
    }
}

pub fn pair(s1w: Window<Residue>, s2w: Window<Label>) -> Result<Codebook, CodebookError> {
    Codebook::pair(s1w, s2w)
}

pub fn encode(cb: &Codebook, value: Residue) -> Result<Label, CodebookError> {
    cb.encode(value)
}

pub fn decode(cb: &Codebook, label: Label) -> Result<Residue, CodebookError> {
    cb.decode(label)
}
