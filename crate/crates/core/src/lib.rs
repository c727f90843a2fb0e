//! Dynamic session key exchange over two substitution boxes.
//!
//! Two peers share a long-lived secret `(p, q, n)` from which each builds the
//! same 6×6 box of residues mod `q`. A second 6×6 box of two-character labels
//! is public. Every session, both peers derive a k×k window in each box from
//! a public nonce and pair the windows cell by cell; key residues are then
//! transmitted as the labels they pair with.
//!
//! - [`sbox`]: box generation and window extraction
//! - [`codebook`]: the per-session residue/label pairing
//! - [`session`]: the handshake state machine and key serialization
//! - [`wire`]: frame codec and TCP endpoints
//! - [`attack`]: candidate-key enumeration under partial compromise
//! - [`dump`]: text format for box dumps

pub mod attack;
pub mod codebook;
pub mod dump;
pub mod exec;
pub mod numtheory;
pub mod sbox;
pub mod session;
pub mod wire;

pub use attack::{
    build_attacker_view, case_report, enumerate_candidate_keys, enumerate_consistent_params,
    simulate_session, AttackError, AttackerKnowledge, Case, CompromiseReport, LayerState,
    ParamBounds, Scenario, SearchOptions,
};
pub use codebook::{Codebook, CodebookError};
pub use exec::Execution;
pub use sbox::{
    extract_window, find_duplicate_free_selection, generate_s1, generate_s2, is_duplicate_free,
    validate_params, Label, Residue, SBoxS1, SBoxS2, SboxError, SecretParams, SubBoxSelection,
    Window,
};
pub use session::{
    derive_key_bytes, derive_selections, Phase, Role, SessionConfig, SessionError, SessionKey,
    SessionState,
};
