//! Per-session state machine.
//!
//! Both peers hold the same `SecretParams`. For each session the initiator
//! picks a public nonce; each side then derives the residue window and the
//! label window from `(params, nonce)` alone, so no selection data is ever
//! transmitted. The initiator draws `L` window cells, sends their labels, and
//! the responder decodes them and echoes the labels in reverse order.

use std::fmt;

use rand::Rng;
use thiserror::Error;

use crate::codebook::{Codebook, CodebookError};
use crate::numtheory::mod_pow;
use crate::sbox::{
    check_window_size, extract_window, find_duplicate_free_selection, generate_s1, generate_s2,
    Label, Residue, SboxError, SecretParams, SubBoxSelection, Window,
};

pub const DEFAULT_KEY_LEN: usize = 8;
pub const MAX_KEY_LEN: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SessionError {
    #[error(transparent)]
    Sbox(#[from] SboxError),
    #[error(transparent)]
    Codebook(#[from] CodebookError),
    #[error("key length {0} is outside [1, {MAX_KEY_LEN}]")]
    InvalidKeyLength(usize),
    #[error("expected {expected} key symbols, got {got}")]
    KeyLengthMismatch { expected: usize, got: usize },
    #[error("operation not allowed in phase {actual:?} (needs {expected:?})")]
    InvalidPhase { expected: Phase, actual: Phase },
    #[error("operation not allowed for the {0} role")]
    WrongRole(Role),
    #[error("cell ({0},{1}) is outside the session window")]
    PositionOutOfWindow(usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SessionConfig {
    pub params: SecretParams,
    key_len: usize,
    requested_k: Option<usize>,
}

impl SessionConfig {
    pub fn new(params: SecretParams) -> Self {
        Self {
            params,
            key_len: DEFAULT_KEY_LEN,
            requested_k: None,
        }
    }

    pub fn with_key_len(mut self, key_len: usize) -> Result<Self, SessionError> {
        if !(1..=MAX_KEY_LEN).contains(&key_len) {
            return Err(SessionError::InvalidKeyLength(key_len));
        }
        self.key_len = key_len;
        Ok(self)
    }

    /// Fix the window size instead of deriving it from the nonce.
    pub fn with_window_size(mut self, k: Option<usize>) -> Result<Self, SessionError> {
        if let Some(k) = k {
            check_window_size(k)?;
        }
        self.requested_k = k;
        Ok(self)
    }

    pub fn key_len(&self) -> usize {
        self.key_len
    }

    pub fn requested_k(&self) -> Option<usize> {
        self.requested_k
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Initiator,
    Responder,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Initiator => "initiator",
            Role::Responder => "responder",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Hello,
    KeySent,
    Confirmed,
    Failed,
}

/// The per-session window origins. Both share the same `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Selections {
    pub s1: SubBoxSelection,
    pub s2: SubBoxSelection,
}

impl Selections {
    pub fn k(&self) -> usize {
        self.s1.k
    }
}

/// The nonce-dependent seed `p^((nonce mod (q-1)) + n) mod q`.
pub fn selection_seed(params: SecretParams, nonce: u64) -> u64 {
    let q = params.q() as u64;
    mod_pow(params.p() as u64, nonce % (q - 1) + params.n() as u64, q)
}

/// Derives both window origins from the shared secret and the public nonce.
///
/// With seed `t`: `k` is `requested_k` or `3 + t mod 3`; the residue window is
/// the first duplicate-free origin scanning from `t mod m²`; the label window
/// is origin `(t + n) mod m²`. When no duplicate-free window of size `k`
/// exists, smaller sizes are tried down to 3.
pub fn derive_selections(
    params: SecretParams,
    nonce: u64,
    requested_k: Option<usize>,
) -> Result<Selections, SboxError> {
    if let Some(k) = requested_k {
        check_window_size(k)?;
    }
    let t = selection_seed(params, nonce);
    let k = requested_k.unwrap_or(3 + (t % 3) as usize);
    let s1_box = generate_s1(params);
    for k in (3..=k).rev() {
        let count = SubBoxSelection::origin_count(k) as u64;
        match find_duplicate_free_selection(&s1_box, k, (t % count) as usize) {
            Ok(s1) => {
                let s2 =
                    SubBoxSelection::from_index(((t + params.n() as u64) % count) as usize, k)?;
                return Ok(Selections { s1, s2 });
            }
            Err(SboxError::NoDuplicateFreeWindow { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(SboxError::NoDuplicateFreeWindow { k: 3 })
}

/// The transferred key: `L` residues, serialized as 4-byte big-endian words.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SessionKey {
    residues: Vec<Residue>,
}

impl SessionKey {
    pub fn new(residues: Vec<Residue>) -> Self {
        Self { residues }
    }

    pub fn residues(&self) -> &[Residue] {
        &self.residues
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        derive_key_bytes(self)
    }
}

pub fn derive_key_bytes(key: &SessionKey) -> Vec<u8> {
    key.residues.iter().flat_map(|r| r.to_be_bytes()).collect()
}

/// Everything secret about one session: what a compromised layer would reveal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionSecrets {
    pub params: SecretParams,
    pub s1_window: Window<Residue>,
    pub s2_origin: SubBoxSelection,
}

#[derive(Debug, Clone)]
pub struct SessionState {
    role: Role,
    nonce: u64,
    key_len: usize,
    params: SecretParams,
    selections: Selections,
    codebook: Codebook,
    phase: Phase,
    sent: Vec<Label>,
}

impl SessionState {
    pub fn new(config: &SessionConfig, role: Role, nonce: u64) -> Result<Self, SessionError> {
        let selections = derive_selections(config.params, nonce, config.requested_k)?;
        Self::with_selections(config, role, nonce, selections)
    }

    /// A session over explicitly chosen windows, bypassing nonce derivation.
    pub fn with_selections(
        config: &SessionConfig,
        role: Role,
        nonce: u64,
        selections: Selections,
    ) -> Result<Self, SessionError> {
        let s1 = extract_window(&generate_s1(config.params), selections.s1)?;
        let s2 = extract_window(&generate_s2(), selections.s2)?;
        Ok(Self {
            role,
            nonce,
            key_len: config.key_len,
            params: config.params,
            selections,
            codebook: Codebook::pair(s1, s2)?,
            phase: Phase::Hello,
            sent: Vec::new(),
        })
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn nonce(&self) -> u64 {
        self.nonce
    }

    pub fn key_len(&self) -> usize {
        self.key_len
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn selections(&self) -> Selections {
        self.selections
    }

    pub fn codebook(&self) -> &Codebook {
        &self.codebook
    }

    pub fn secrets(&self) -> SessionSecrets {
        SessionSecrets {
            params: self.params,
            s1_window: self.codebook.s1_window().clone(),
            s2_origin: self.selections.s2,
        }
    }

    pub fn fail(&mut self) {
        self.phase = Phase::Failed;
    }

    fn expect(&self, role: Role, phase: Phase) -> Result<(), SessionError> {
        if self.role != role {
            return Err(SessionError::WrongRole(self.role));
        }
        if self.phase != phase {
            return Err(SessionError::InvalidPhase {
                expected: phase,
                actual: self.phase,
            });
        }
        Ok(())
    }

    /// Draws `L` cells uniformly with replacement and returns their labels.
    pub fn initiator_pick_key<R: Rng + ?Sized>(
        &mut self,
        rng: &mut R,
    ) -> Result<(Vec<Label>, SessionKey), SessionError> {
        self.expect(Role::Initiator, Phase::Hello)?;
        let k = self.codebook.k();
        let positions: Vec<(usize, usize)> = (0..self.key_len)
            .map(|_| {
                let cell = rng.gen_range(0..k * k);
                (cell / k, cell % k)
            })
            .collect();
        self.initiator_send_positions(&positions)
    }

    /// Like [`initiator_pick_key`](Self::initiator_pick_key) with the cells given
    /// explicitly. The number of positions must equal the key length.
    pub fn initiator_send_positions(
        &mut self,
        positions: &[(usize, usize)],
    ) -> Result<(Vec<Label>, SessionKey), SessionError> {
        self.expect(Role::Initiator, Phase::Hello)?;
        if positions.len() != self.key_len {
            return Err(SessionError::KeyLengthMismatch {
                expected: self.key_len,
                got: positions.len(),
            });
        }
        let k = self.codebook.k();
        let mut labels = Vec::with_capacity(positions.len());
        let mut residues = Vec::with_capacity(positions.len());
        for &(i, j) in positions {
            if i >= k || j >= k {
                return Err(SessionError::PositionOutOfWindow(i, j));
            }
            let (value, label) = self.codebook.entry(i, j);
            labels.push(label);
            residues.push(value);
        }
        self.sent = labels.clone();
        self.phase = Phase::KeySent;
        Ok((labels, SessionKey::new(residues)))
    }

    /// Decodes the received labels into the key and returns the confirmation
    /// (the labels in reverse order).
    pub fn responder_receive(
        &mut self,
        labels: &[Label],
    ) -> Result<(SessionKey, Vec<Label>), SessionError> {
        self.expect(Role::Responder, Phase::Hello)?;
        if labels.len() != self.key_len {
            self.phase = Phase::Failed;
            return Err(SessionError::KeyLengthMismatch {
                expected: self.key_len,
                got: labels.len(),
            });
        }
        let residues = labels
            .iter()
            .map(|&l| self.codebook.decode(l))
            .collect::<Result<Vec<_>, _>>()
            .inspect_err(|_| self.phase = Phase::Failed)?;
        self.phase = Phase::Confirmed;
        Ok((
            SessionKey::new(residues),
            labels.iter().rev().copied().collect(),
        ))
    }

    pub fn initiator_verify_confirm(&mut self, confirm: &[Label]) -> Result<bool, SessionError> {
        self.expect(Role::Initiator, Phase::KeySent)?;
        let ok = confirm.len() == self.sent.len() && confirm.iter().eq(self.sent.iter().rev());
        self.phase = if ok { Phase::Confirmed } else { Phase::Failed };
        Ok(ok)
    }
}
