//! Layered-compromise analysis.
//!
//! Security rests on three layers: the long-lived `(p, q, n)` (layer 1), the
//! per-session residue window (layer 2) and the per-session label window
//! origin (layer 3). An attacker holds the public label box, the session
//! transcript and whichever layers have been broken. This module enumerates
//! every session key consistent with that knowledge; the size of the set is
//! the measure of what remains secret.
//!
//! Each observed label pins one absolute cell of the public box because its 36
//! labels are distinct. Candidate label-window origins are the k×k windows
//! covering all observed cells; candidate residue windows are the
//! duplicate-free windows of every candidate residue box. `k` is assumed known.
//!
//! Selections are treated as independent secrets here. The nonce derivation in
//! [`crate::session`] makes them a function of layer 1, which this model does
//! not exploit.

use std::collections::{BTreeSet, HashSet};
use std::fmt;

use rand::Rng;
use thiserror::Error;

use crate::exec::{map_reduce, Execution};
use crate::numtheory::is_prime;
use crate::sbox::{
    extract_window, generate_s1, generate_s2, Label, Residue, SBoxS2, SecretParams,
    SubBoxSelection, Window, Q_LIMIT,
};
use crate::session::{Role, SessionConfig, SessionError, SessionKey, SessionSecrets, SessionState};
use crate::wire::{SessionTranscript, WireFrame};

pub const DEFAULT_SEARCH_CAP: u64 = 10_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AttackError {
    #[error("malformed transcript: {0}")]
    MalformedTranscript(&'static str),
    #[error("a known layer needs the session's ground truth")]
    MissingGroundTruth,
    #[error("parameter bounds are required when neither layer 1 nor layer 2 is known")]
    BoundsRequired,
    #[error("the residue window (layer 2) must be known")]
    Layer2Required,
    #[error("invalid bounds: {0}")]
    InvalidBounds(&'static str),
    #[error("search space exceeds {cap} assignments")]
    SearchSpaceTooLarge { cap: u64 },
    #[error(transparent)]
    Session(#[from] SessionError),
}

/// Which layers the attacker has broken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct LayerState {
    pub layer1: bool,
    pub layer2: bool,
    pub layer3: bool,
}

impl LayerState {
    pub const NONE: LayerState = LayerState {
        layer1: false,
        layer2: false,
        layer3: false,
    };

    /// From a list of broken layer numbers (1..=3); other numbers are ignored.
    pub fn from_layers(layers: &[u8]) -> Self {
        Self {
            layer1: layers.contains(&1),
            layer2: layers.contains(&2),
            layer3: layers.contains(&3),
        }
    }

    /// All eight combinations.
    pub fn all() -> impl Iterator<Item = LayerState> {
        (0u8..8).map(|bits| LayerState {
            layer1: bits & 1 != 0,
            layer2: bits & 2 != 0,
            layer3: bits & 4 != 0,
        })
    }

    pub fn known(&self) -> Vec<u8> {
        [(1, self.layer1), (2, self.layer2), (3, self.layer3)]
            .into_iter()
            .filter_map(|(n, k)| k.then_some(n))
            .collect()
    }

    /// True when every layer known here is also known in `other`.
    pub fn is_subset_of(&self, other: &LayerState) -> bool {
        (!self.layer1 || other.layer1)
            && (!self.layer2 || other.layer2)
            && (!self.layer3 || other.layer3)
    }
}

impl fmt::Display for LayerState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let known = self.known();
        if known.is_empty() {
            return f.write_str("none");
        }
        let parts: Vec<String> = known.iter().map(u8::to_string).collect();
        f.write_str(&parts.join(","))
    }
}

/// Inclusive upper bounds for a parameter search.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamBounds {
    pub p_max: u32,
    pub q_max: u32,
    pub n_max: u32,
}

impl ParamBounds {
    pub fn new(p_max: u32, q_max: u32, n_max: u32) -> Self {
        Self {
            p_max,
            q_max,
            n_max,
        }
    }

    /// Every valid `(p, q, n)` within the bounds, ordered by `(q, p, n)`.
    /// Stops with `SearchSpaceTooLarge` once more than `limit` are found.
    pub fn params(&self, limit: u64) -> Result<Vec<SecretParams>, AttackError> {
        if self.q_max as u64 >= Q_LIMIT {
            return Err(AttackError::InvalidBounds("q bound must be below 2^31"));
        }
        let mut primes: Vec<u32> = Vec::new();
        let mut out = Vec::new();
        for q in 2..=self.q_max {
            if !is_prime(q as u64) {
                continue;
            }
            for &p in primes.iter().take_while(|&&p| p <= self.p_max) {
                for n in 1..=self.n_max.min(q - 1) {
                    out.push(SecretParams::new(p as i64, q as i64, n as i64).expect("in range"));
                    if out.len() as u64 > limit {
                        return Err(AttackError::SearchSpaceTooLarge { cap: limit });
                    }
                }
            }
            primes.push(q);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchOptions {
    /// Maximum number of (params, residue window, label origin) assignments.
    pub cap: u64,
    pub execution: Execution,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            cap: DEFAULT_SEARCH_CAP,
            execution: Execution::default(),
        }
    }
}

/// The public transcript plus whatever the broken layers reveal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttackerKnowledge {
    layers: LayerState,
    k: usize,
    nonce: u64,
    labels: Vec<Label>,
    cells: Vec<(usize, usize)>,
    s2: SBoxS2,
    params: Option<SecretParams>,
    s1_window: Option<Window<Residue>>,
    s2_origin: Option<SubBoxSelection>,
}

impl AttackerKnowledge {
    pub fn layers(&self) -> LayerState {
        self.layers
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn nonce(&self) -> u64 {
        self.nonce
    }

    /// Observed key labels in wire order.
    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    /// Absolute public-box cell of each observed label.
    pub fn cells(&self) -> &[(usize, usize)] {
        &self.cells
    }

    pub fn s2_box(&self) -> &SBoxS2 {
        &self.s2
    }

    pub fn params(&self) -> Option<SecretParams> {
        self.params
    }

    pub fn s1_window(&self) -> Option<&Window<Residue>> {
        self.s1_window.as_ref()
    }

    pub fn s2_origin(&self) -> Option<SubBoxSelection> {
        self.s2_origin
    }

    /// Label-window origins of size `k` that cover every observed cell,
    /// restricted to the known origin when layer 3 is broken.
    pub fn candidate_s2_origins(&self) -> Vec<SubBoxSelection> {
        SubBoxSelection::all(self.k)
            .filter(|o| self.s2_origin.is_none_or(|known| known == *o))
            .filter(|o| self.cells.iter().all(|&(r, c)| o.contains(r, c)))
            .collect()
    }
}

pub fn build_attacker_view(
    transcript: &SessionTranscript,
    layers: LayerState,
    k: usize,
    ground_truth: Option<&SessionSecrets>,
) -> Result<AttackerKnowledge, AttackError> {
    crate::sbox::check_window_size(k)
        .map_err(|_| AttackError::MalformedTranscript("window size is not 3, 4 or 5"))?;
    let (nonce, key_len) = transcript
        .hello()
        .ok_or(AttackError::MalformedTranscript("no Hello frame"))?;
    let labels = transcript
        .labels()
        .ok_or(AttackError::MalformedTranscript("no Labels frame"))?;
    if labels.len() != key_len as usize {
        return Err(AttackError::MalformedTranscript(
            "label count differs from the announced key length",
        ));
    }
    let cells = labels
        .iter()
        .map(|l| l.s2_position())
        .collect::<Option<Vec<_>>>()
        .ok_or(AttackError::MalformedTranscript(
            "label outside the public box",
        ))?;

    let truth = || ground_truth.ok_or(AttackError::MissingGroundTruth);
    if let Some(t) = ground_truth {
        if t.s1_window.k() != k || t.s2_origin.k != k {
            return Err(AttackError::MalformedTranscript(
                "ground truth window size differs from k",
            ));
        }
    }
    Ok(AttackerKnowledge {
        layers,
        k,
        nonce,
        labels,
        cells,
        s2: generate_s2(),
        params: if layers.layer1 {
            Some(truth()?.params)
        } else {
            None
        },
        s1_window: if layers.layer2 {
            Some(truth()?.s1_window.clone())
        } else {
            None
        },
        s2_origin: if layers.layer3 {
            Some(truth()?.s2_origin)
        } else {
            None
        },
    })
}

/// Key bytes for one assignment: each observed cell is read at its offset
/// inside `origin` and looked up in the row-major residue window.
fn assemble_key(
    values: &[Residue],
    k: usize,
    origin: SubBoxSelection,
    cells: &[(usize, usize)],
) -> Vec<u8> {
    cells
        .iter()
        .flat_map(|&(r, c)| values[(r - origin.row) * k + (c - origin.col)].to_be_bytes())
        .collect()
}

fn duplicate_free_windows(params: SecretParams, k: usize) -> Vec<Vec<Residue>> {
    let grid = generate_s1(params);
    SubBoxSelection::all(k)
        .map(|sel| extract_window(&grid, sel).expect("origin in range"))
        .filter(Window::is_duplicate_free)
        .map(|w| w.values().to_vec())
        .collect()
}

/// Lists the parameter sets in `bounds`, failing if they would need more than
/// `cap` assignments at `per_params` each.
fn params_within(
    bounds: &ParamBounds,
    per_params: u64,
    cap: u64,
) -> Result<Vec<SecretParams>, AttackError> {
    let all = bounds.params(cap / per_params).map_err(|e| match e {
        AttackError::SearchSpaceTooLarge { .. } => AttackError::SearchSpaceTooLarge { cap },
        e => e,
    })?;
    check_cap(all.len() as u64 * per_params, cap)?;
    Ok(all)
}

fn check_cap(size: u64, cap: u64) -> Result<(), AttackError> {
    if size > cap {
        Err(AttackError::SearchSpaceTooLarge { cap })
    } else {
        Ok(())
    }
}

/// Every distinct key (as serialized bytes) consistent with `knowledge`.
///
/// `bounds` is needed only when neither layer 1 nor layer 2 is known.
pub fn enumerate_candidate_keys(
    knowledge: &AttackerKnowledge,
    bounds: Option<ParamBounds>,
    opts: &SearchOptions,
) -> Result<BTreeSet<Vec<u8>>, AttackError> {
    let k = knowledge.k;
    let origins = knowledge.candidate_s2_origins();
    let per_window = origins.len() as u64;
    let keys_for = |values: &[Residue], out: &mut HashSet<Vec<u8>>| {
        for &o in &origins {
            out.insert(assemble_key(values, k, o, &knowledge.cells));
        }
    };

    let mut keys = HashSet::new();
    if let Some(w) = &knowledge.s1_window {
        check_cap(per_window, opts.cap)?;
        keys_for(w.values(), &mut keys);
    } else if let Some(params) = knowledge.params {
        check_cap(
            SubBoxSelection::origin_count(k) as u64 * per_window,
            opts.cap,
        )?;
        for values in duplicate_free_windows(params, k) {
            keys_for(&values, &mut keys);
        }
    } else {
        let bounds = bounds.ok_or(AttackError::BoundsRequired)?;
        let per_params = (SubBoxSelection::origin_count(k) as u64 * per_window).max(1);
        let all = params_within(&bounds, per_params, opts.cap)?;
        keys = map_reduce(
            &all,
            opts.execution,
            |&params| {
                let mut local = HashSet::new();
                for values in duplicate_free_windows(params, k) {
                    keys_for(&values, &mut local);
                }
                local
            },
            HashSet::new,
            |mut a, b| {
                if a.len() < b.len() {
                    return union_into(b, a);
                }
                a.extend(b);
                a
            },
        );
    }
    Ok(keys.into_iter().collect())
}

fn union_into(mut big: HashSet<Vec<u8>>, small: HashSet<Vec<u8>>) -> HashSet<Vec<u8>> {
    big.extend(small);
    big
}

/// Every `(p, q, n)` within `bounds` whose residue box shows the known window
/// at the known origin.
pub fn enumerate_consistent_params(
    knowledge: &AttackerKnowledge,
    bounds: ParamBounds,
    opts: &SearchOptions,
) -> Result<Vec<SecretParams>, AttackError> {
    let window = knowledge
        .s1_window
        .as_ref()
        .ok_or(AttackError::Layer2Required)?;
    let all = params_within(&bounds, 1, opts.cap)?;
    let origin = window.origin();
    let mut found = map_reduce(
        &all,
        opts.execution,
        |&params| {
            let grid = generate_s1(params);
            let w = extract_window(&grid, origin).expect("origin in range");
            if w.values() == window.values() {
                vec![params]
            } else {
                Vec::new()
            }
        },
        Vec::new,
        |mut a, b| {
            a.extend(b);
            a
        },
    );
    found.sort();
    Ok(found)
}

/// One in-memory session: what was sent, and what was secret.
#[derive(Debug, Clone)]
pub struct SimulatedSession {
    pub transcript: SessionTranscript,
    pub secrets: SessionSecrets,
    pub key: SessionKey,
}

impl SimulatedSession {
    pub fn k(&self) -> usize {
        self.secrets.s1_window.k()
    }
}

/// Runs initiator and responder state machines against each other without a
/// transport, recording the frames an eavesdropper would see.
pub fn simulate_session<R: Rng + ?Sized>(
    config: &SessionConfig,
    nonce: u64,
    rng: &mut R,
) -> Result<SimulatedSession, SessionError> {
    let mut initiator = SessionState::new(config, Role::Initiator, nonce)?;
    let mut responder = SessionState::new(config, Role::Responder, nonce)?;
    let mut transcript = SessionTranscript::new();
    transcript.push(WireFrame::hello(nonce, config.key_len() as u8));
    let (labels, key) = initiator.initiator_pick_key(rng)?;
    transcript.push(WireFrame::labels(&labels));
    let (responder_key, confirm) = responder.responder_receive(&labels)?;
    transcript.push(WireFrame::confirm(&confirm));
    let confirmed = initiator.initiator_verify_confirm(&confirm)?;
    debug_assert!(confirmed && responder_key == key);
    Ok(SimulatedSession {
        transcript,
        secrets: initiator.secrets(),
        key,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Case {
    /// Layers 2 and 3 broken.
    I,
    /// Layers 1 and 2 broken.
    II,
    /// A single broken layer (1, 2 or 3).
    III(u8),
}

impl Case {
    pub fn layers(&self) -> LayerState {
        match *self {
            Case::I => LayerState::from_layers(&[2, 3]),
            Case::II => LayerState::from_layers(&[1, 2]),
            Case::III(layer) => LayerState::from_layers(&[layer]),
        }
    }
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Case::I => f.write_str("I"),
            Case::II => f.write_str("II"),
            Case::III(layer) => write!(f, "III/layer{layer}"),
        }
    }
}

/// The scripted sessions a case report runs against.
#[derive(Debug, Clone, Copy)]
pub struct Scenario {
    pub params: SecretParams,
    pub nonce: u64,
    pub next_nonce: u64,
    pub seed: u64,
    pub key_len: usize,
    pub k: Option<usize>,
    pub bounds: ParamBounds,
    pub options: SearchOptions,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            params: SecretParams::new(5, 29, 3).expect("valid"),
            nonce: 0,
            next_nonce: 1,
            seed: 0,
            key_len: 8,
            k: Some(3),
            bounds: ParamBounds::new(31, 31, 5),
            options: SearchOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NextSessionReport {
    /// Layers still valid after rotation: layer 1, plus any window whose
    /// selection happened not to change.
    pub layers: LayerState,
    pub candidate_key_count: usize,
    pub true_key_is_candidate: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompromiseReport {
    pub case: Case,
    pub layers: LayerState,
    pub candidate_key_count: usize,
    pub current_session_unique: bool,
    pub true_key_is_candidate: bool,
    pub next_session: Option<NextSessionReport>,
}

impl CompromiseReport {
    pub fn next_session_unique_under_fresh_layers(&self) -> Option<bool> {
        self.next_session
            .as_ref()
            .map(|n| n.candidate_key_count == 1)
    }

    /// `key=value` lines; `next_session_*` lines appear only when a follow-up
    /// session was run.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "case={}\nknown_layers={}\ncandidate_key_count={}\ncurrent_session_unique={}\ntrue_key_is_candidate={}\n",
            self.case,
            self.layers,
            self.candidate_key_count,
            self.current_session_unique,
            self.true_key_is_candidate
        );
        if let Some(next) = &self.next_session {
            out += &format!(
                "next_session_known_layers={}\nnext_session_candidate_count={}\nnext_session_true_key_is_candidate={}\nnext_session_unique_under_fresh_layers={}\n",
                next.layers,
                next.candidate_key_count,
                next.true_key_is_candidate,
                next.candidate_key_count == 1
            );
        }
        out
    }
}

fn seeded(seed: u64) -> rand_chacha::ChaCha8Rng {
    use rand::SeedableRng;
    rand_chacha::ChaCha8Rng::seed_from_u64(seed)
}

/// Runs the scripted session, applies the case's broken layers and counts the
/// keys the attacker cannot rule out. With `fresh_session_demo`, a second
/// session under `next_nonce` is attacked with whatever knowledge survives
/// the per-session rotation.
pub fn case_report(
    case: Case,
    fresh_session_demo: bool,
    scenario: &Scenario,
) -> Result<CompromiseReport, AttackError> {
    let config = SessionConfig::new(scenario.params)
        .with_key_len(scenario.key_len)?
        .with_window_size(scenario.k)?;
    let mut rng = seeded(scenario.seed);
    let first = simulate_session(&config, scenario.nonce, &mut rng)?;
    let layers = case.layers();
    let view = build_attacker_view(&first.transcript, layers, first.k(), Some(&first.secrets))?;
    let keys = enumerate_candidate_keys(&view, Some(scenario.bounds), &scenario.options)?;

    let next_session = if fresh_session_demo {
        let second = simulate_session(&config, scenario.next_nonce, &mut rng)?;
        let same_s1 = second.secrets.s1_window.origin() == first.secrets.s1_window.origin();
        let same_s2 = second.secrets.s2_origin == first.secrets.s2_origin;
        let surviving = LayerState {
            layer1: layers.layer1,
            layer2: layers.layer2 && same_s1,
            layer3: layers.layer3 && same_s2,
        };
        let view = build_attacker_view(
            &second.transcript,
            surviving,
            second.k(),
            Some(&second.secrets),
        )?;
        let next_keys = enumerate_candidate_keys(&view, Some(scenario.bounds), &scenario.options)?;
        Some(NextSessionReport {
            layers: surviving,
            candidate_key_count: next_keys.len(),
            true_key_is_candidate: next_keys.contains(&second.key.to_bytes()),
        })
    } else {
        None
    };

    Ok(CompromiseReport {
        case,
        layers,
        candidate_key_count: keys.len(),
        current_session_unique: keys.len() == 1,
        true_key_is_candidate: keys.contains(&first.key.to_bytes()),
        next_session,
    })
}
