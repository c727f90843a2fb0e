//! The two 6×6 boxes: the secret residue box generated from `(p, q, n)` and
//! the public label box, plus k×k window extraction over either.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::numtheory::{is_prime, mod_pow, residue};

/// Side length of both boxes.
pub const GRID: usize = 6;

/// Window sizes a session may use.
pub const WINDOW_SIZES: [usize; 3] = [3, 4, 5];

/// Exclusive upper bound on `q`.
pub const Q_LIMIT: u64 = 1 << 31;

/// A value of the secret box, always reduced into `[0, q)`.
pub type Residue = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Param {
    P,
    Q,
}

impl fmt::Display for Param {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Param::P => "p",
            Param::Q => "q",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SboxError {
    #[error("{0} is not prime")]
    NonPrime(Param),
    #[error("parameter out of range: {0}")]
    OutOfRange(&'static str),
    #[error("window size {0} is not one of 3, 4, 5")]
    InvalidWindowSize(usize),
    #[error("window ({row},{col},{k}) does not fit in the 6x6 box")]
    OutOfBounds { row: usize, col: usize, k: usize },
    #[error("start index {index} is outside [0, {count})")]
    StartIndexOutOfRange { index: usize, count: usize },
    #[error("every {k}x{k} window of the box repeats a value")]
    NoDuplicateFreeWindow { k: usize },
}

/// The long-lived shared secret `(p, q, n)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct SecretParams {
    p: u32,
    q: u32,
    n: u32,
}

impl SecretParams {
    /// Checks `p, q` prime, `1 < p < q < 2^31` and `1 <= n < q`.
    pub fn new(p: i64, q: i64, n: i64) -> Result<Self, SboxError> {
        if q >= Q_LIMIT as i64 {
            return Err(SboxError::OutOfRange("q must be below 2^31"));
        }
        if p < 2 || !is_prime(p as u64) {
            return Err(SboxError::NonPrime(Param::P));
        }
        if q < 2 || !is_prime(q as u64) {
            return Err(SboxError::NonPrime(Param::Q));
        }
        if p >= q {
            return Err(SboxError::OutOfRange("p must be smaller than q"));
        }
        if n < 1 {
            return Err(SboxError::OutOfRange("n must be at least 1"));
        }
        if n >= q {
            return Err(SboxError::OutOfRange("n must be smaller than q"));
        }
        Ok(Self {
            p: p as u32,
            q: q as u32,
            n: n as u32,
        })
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn q(&self) -> u32 {
        self.q
    }

    pub fn n(&self) -> u32 {
        self.n
    }
}

impl fmt::Display for SecretParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(p={}, q={}, n={})", self.p, self.q, self.n)
    }
}

pub fn validate_params(p: i64, q: i64, n: i64) -> Result<SecretParams, SboxError> {
    SecretParams::new(p, q, n)
}

/// Read access to a 6×6 box, so windows can be cut from either box or from a
/// parsed dump.
pub trait BoxGrid {
    type Cell: Copy;

    fn cell(&self, row: usize, col: usize) -> Self::Cell;
}

impl<T: Copy> BoxGrid for [[T; GRID]; GRID] {
    type Cell = T;

    fn cell(&self, row: usize, col: usize) -> T {
        self[row][col]
    }
}

/// The secret box.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SBoxS1 {
    cells: [[Residue; GRID]; GRID],
    params: SecretParams,
}

impl SBoxS1 {
    /// Builds the box row by row:
    ///
    /// | row | col 0        | col c ≥ 1               |
    /// |-----|--------------|-------------------------|
    /// | 0   | p            | p^(n+c−1)               |
    /// | 1   | p − (c+1)·n  | (same)                  |
    /// | 2   | p + (c+1)·n  |                         |
    /// | 3   | p·(c+2) − n  |                         |
    /// | 4   | p + (c+2) − n|                         |
    /// | 5   | p·(c+2) + n  |                         |
    ///
    /// with every entry reduced to its least non-negative residue mod q.
    pub fn generate(params: SecretParams) -> Self {
        let (p, q, n) = (params.p as i64, params.q as u64, params.n as i64);
        let mut cells = [[0; GRID]; GRID];
        for (c, cell) in cells[0].iter_mut().enumerate() {
            *cell = if c == 0 {
                residue(p, q)
            } else {
                mod_pow(p as u64, params.n as u64 + c as u64 - 1, q)
            } as Residue;
        }
        for c in 0..GRID {
            let c = c as i64;
            cells[1][c as usize] = residue(p - (c + 1) * n, q) as Residue;
            cells[2][c as usize] = residue(p + (c + 1) * n, q) as Residue;
            cells[3][c as usize] = residue(p * (c + 2) - n, q) as Residue;
            cells[4][c as usize] = residue(p + (c + 2) - n, q) as Residue;
            cells[5][c as usize] = residue(p * (c + 2) + n, q) as Residue;
        }
        Self { cells, params }
    }

    pub fn params(&self) -> SecretParams {
        self.params
    }

    pub fn cells(&self) -> &[[Residue; GRID]; GRID] {
        &self.cells
    }
}

impl BoxGrid for SBoxS1 {
    type Cell = Residue;

    fn cell(&self, row: usize, col: usize) -> Residue {
        self.cells[row][col]
    }
}

pub fn generate_s1(params: SecretParams) -> SBoxS1 {
    SBoxS1::generate(params)
}

const LABEL_DIGITS: &[u8; 11] = b"123456789ab";
const LABEL_LETTERS: &[u8; GRID] = b"abcdef";

/// A two-byte ASCII token as carried on the wire. Any two ASCII graphic bytes
/// form a `Label`; only 36 of them belong to the public box.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Label([u8; 2]);

impl Label {
    pub fn from_bytes(bytes: [u8; 2]) -> Option<Self> {
        bytes
            .iter()
            .all(|b| b.is_ascii_graphic())
            .then_some(Self(bytes))
    }

    pub fn as_bytes(&self) -> [u8; 2] {
        self.0
    }

    pub fn as_str(&self) -> &str {
        // Constructors only admit ASCII.
        std::str::from_utf8(&self.0).expect("label is ASCII")
    }

    /// Public-box label at `(row, col)`.
    pub fn for_cell(row: usize, col: usize) -> Self {
        assert!(row < GRID && col < GRID);
        Self([LABEL_DIGITS[row + col], LABEL_LETTERS[row]])
    }

    /// Position of this label in the public box, if it is one of its 36 labels.
    pub fn s2_position(&self) -> Option<(usize, usize)> {
        let row = LABEL_LETTERS.iter().position(|&b| b == self.0[1])?;
        let sum = LABEL_DIGITS.iter().position(|&b| b == self.0[0])?;
        let col = sum.checked_sub(row)?;
        (col < GRID).then_some((row, col))
    }

    pub fn is_s2_label(&self) -> bool {
        self.s2_position().is_some()
    }
}

impl fmt::Debug for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.as_str())
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("not a two-character ASCII label: {0:?}")]
pub struct ParseLabelError(pub String);

impl FromStr for Label {
    type Err = ParseLabelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.as_bytes() {
            &[a, b] => Label::from_bytes([a, b]).ok_or_else(|| ParseLabelError(s.to_string())),
            _ => Err(ParseLabelError(s.to_string())),
        }
    }
}

impl Serialize for Label {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

/// The public label box.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SBoxS2 {
    cells: [[Label; GRID]; GRID],
}

impl SBoxS2 {
    pub fn standard() -> Self {
        let mut cells = [[Label(*b"1a"); GRID]; GRID];
        for (r, row) in cells.iter_mut().enumerate() {
            for (c, cell) in row.iter_mut().enumerate() {
                *cell = Label::for_cell(r, c);
            }
        }
        Self { cells }
    }

    pub fn cells(&self) -> &[[Label; GRID]; GRID] {
        &self.cells
    }
}

impl Default for SBoxS2 {
    fn default() -> Self {
        Self::standard()
    }
}

impl BoxGrid for SBoxS2 {
    type Cell = Label;

    fn cell(&self, row: usize, col: usize) -> Label {
        self.cells[row][col]
    }
}

pub fn generate_s2() -> SBoxS2 {
    SBoxS2::standard()
}

/// Origin and size of a k×k window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct SubBoxSelection {
    pub row: usize,
    pub col: usize,
    pub k: usize,
}

impl SubBoxSelection {
    pub fn new(row: usize, col: usize, k: usize) -> Result<Self, SboxError> {
        let sel = Self { row, col, k };
        sel.validate()?;
        Ok(sel)
    }

    pub fn validate(&self) -> Result<(), SboxError> {
        check_window_size(self.k)?;
        if self.row + self.k > GRID || self.col + self.k > GRID {
            return Err(SboxError::OutOfBounds {
                row: self.row,
                col: self.col,
                k: self.k,
            });
        }
        Ok(())
    }

    /// Origins per axis for window size `k`.
    pub fn span(k: usize) -> usize {
        GRID - k + 1
    }

    /// Number of distinct origins for window size `k`.
    pub fn origin_count(k: usize) -> usize {
        Self::span(k) * Self::span(k)
    }

    /// Origin at row-major position `index` among the `origin_count(k)` origins.
    pub fn from_index(index: usize, k: usize) -> Result<Self, SboxError> {
        check_window_size(k)?;
        let count = Self::origin_count(k);
        if index >= count {
            return Err(SboxError::StartIndexOutOfRange { index, count });
        }
        let m = Self::span(k);
        Ok(Self {
            row: index / m,
            col: index % m,
            k,
        })
    }

    pub fn index(&self) -> usize {
        self.row * Self::span(self.k) + self.col
    }

    /// All origins for `k` in row-major order.
    pub fn all(k: usize) -> impl Iterator<Item = SubBoxSelection> {
        let m = Self::span(k);
        (0..m * m).map(move |i| SubBoxSelection {
            row: i / m,
            col: i % m,
            k,
        })
    }

    pub fn contains(&self, row: usize, col: usize) -> bool {
        (self.row..self.row + self.k).contains(&row) && (self.col..self.col + self.k).contains(&col)
    }
}

impl fmt::Display for SubBoxSelection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.row, self.col, self.k)
    }
}

pub fn check_window_size(k: usize) -> Result<(), SboxError> {
    if WINDOW_SIZES.contains(&k) {
        Ok(())
    } else {
        Err(SboxError::InvalidWindowSize(k))
    }
}

/// A k×k excerpt of a box, stored row-major.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Window<T> {
    origin: SubBoxSelection,
    values: Vec<T>,
}

impl<T: Copy> Window<T> {
    pub fn origin(&self) -> SubBoxSelection {
        self.origin
    }

    pub fn k(&self) -> usize {
        self.origin.k
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        assert!(i < self.k() && j < self.k());
        self.values[i * self.k() + j]
    }

    /// Row-major values.
    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn rows(&self) -> Vec<Vec<T>> {
        self.values.chunks(self.k()).map(<[T]>::to_vec).collect()
    }
}

impl<T: Copy + PartialEq> Window<T> {
    pub fn is_duplicate_free(&self) -> bool {
        self.values
            .iter()
            .enumerate()
            .all(|(i, v)| !self.values[i + 1..].contains(v))
    }
}

pub fn extract_window<B: BoxGrid + ?Sized>(
    grid: &B,
    sel: SubBoxSelection,
) -> Result<Window<B::Cell>, SboxError> {
    sel.validate()?;
    let mut values = Vec::with_capacity(sel.k * sel.k);
    for i in 0..sel.k {
        for j in 0..sel.k {
            values.push(grid.cell(sel.row + i, sel.col + j));
        }
    }
    Ok(Window {
        origin: sel,
        values,
    })
}

pub fn is_duplicate_free(w: &Window<Residue>) -> bool {
    w.is_duplicate_free()
}

/// Scans origins in row-major order starting at `start_index`, wrapping
/// around, and returns the first whose window has no repeated residue.
pub fn find_duplicate_free_selection<B: BoxGrid<Cell = Residue> + ?Sized>(
    grid: &B,
    k: usize,
    start_index: usize,
) -> Result<SubBoxSelection, SboxError> {
    check_window_size(k)?;
    let count = SubBoxSelection::origin_count(k);
    if start_index >= count {
        return Err(SboxError::StartIndexOutOfRange {
            index: start_index,
            count,
        });
    }
    for offset in 0..count {
        let sel = SubBoxSelection::from_index((start_index + offset) % count, k)?;
        if extract_window(grid, sel)?.is_duplicate_free() {
            return Ok(sel);
        }
    }
    Err(SboxError::NoDuplicateFreeWindow { k })
}
