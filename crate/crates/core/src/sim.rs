//! Deterministic discrete-event simulation of one authentication round trip
//! for a one-hop wireless group.
//!
//! Nodes run the real protocol code with per-node operation counters; compute
//! time is the counted `T_mul,q` divided by the node's compute rate. Frames are
//! the real wire encodings and occupy a single shared channel one at a time.
//! Simulated time is integer nanoseconds; ties are broken by insertion order.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, VecDeque};
use std::fmt;
use std::str::FromStr;

use num_bigint::{BigUint, RandBigInt};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::cost::{
    CsvRow, EnergyModel, TmulqConversion, DEFAULT_RX_JOULES_PER_BYTE, DEFAULT_TX_JOULES_PER_BYTE,
};
use crate::ec::CurveParams;
use crate::field::{FieldElement, OpCounter};
use crate::harn::{harn_init, harn_release, harn_verify, HarnGroup, HarnParams, HarnToken, Released};
use crate::protocol::{
    gm_init, gm_verify_one, make_public_share, DecentralizedVerifier, GroupConfig, PublicShare,
};
use crate::sss::{MemberId, Share};
use crate::wire::Frame;

/// Compute rate in `T_mul,q` per second, fitted so that the proposed
/// centralized scheme with 10 members authenticates in 1.3 s.
pub const DEFAULT_COMPUTE_RATE: f64 = 10_093.690_189_541_272;
/// Joules per `T_mul,q`, fitted so that a proposed-scheme member at m = 10
/// spends 0.014 J including radio.
pub const DEFAULT_JOULES_PER_TMULQ: f64 = 1.168_544_995_794_785_5e-5;
pub const DEFAULT_BITRATE_BPS: f64 = 1_000_000.0;

pub const ANCHOR_M: usize = 10;
pub const ANCHOR_AUTH_TIME_S: f64 = 1.3;
pub const ANCHOR_ENERGY_J: f64 = 0.014;

const GM_ID: &str = "GM";
const NS_PER_S: f64 = 1e9;
const MAX_BACKOFF_DOUBLINGS: u32 = 4;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scenario: {}", .0.join("; "))]
    Invalid(Vec<String>),
    #[error("protocol setup failed: {0}")]
    Setup(String),
    #[error("scenario JSON: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, SimError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SimScheme {
    Harn,
    ProposedCentralized,
    ProposedDecentralized,
}

impl SimScheme {
    pub const ALL: [SimScheme; 3] = [
        SimScheme::Harn,
        SimScheme::ProposedCentralized,
        SimScheme::ProposedDecentralized,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SimScheme::Harn => "harn",
            SimScheme::ProposedCentralized => "proposed-centralized",
            SimScheme::ProposedDecentralized => "proposed-decentralized",
        }
    }
}

impl fmt::Display for SimScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SimScheme {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        SimScheme::ALL
            .into_iter()
            .find(|scheme| scheme.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = SimScheme::ALL.iter().map(|s| s.name()).collect();
                format!("unknown scheme {s:?}; expected one of {}", names.join(", "))
            })
    }
}

/// Medium access model. Only one frame is on air at a time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mac {
    #[default]
    SerializedBroadcast,
}

/// When members compute and send their shares.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Schedule {
    /// Slotted: each member starts once the previous member's frame is off the air.
    #[default]
    Staggered,
    /// Every member starts at the beginning of the round.
    Simultaneous,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VerifierPolicy {
    Gm,
    Fixed(MemberId),
    MaxBattery,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verifier {
    Gm,
    Member(MemberId),
}

impl fmt::Display for Verifier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verifier::Gm => f.write_str(GM_ID),
            Verifier::Member(id) => write!(f, "{id}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeStatus {
    pub member_id: MemberId,
    pub battery: f64,
}

/// Deterministic verifier choice; `max-battery` ties go to the lowest id.
pub fn select_verifier(policy: &VerifierPolicy, nodes: &[NodeStatus]) -> Verifier {
    match policy {
        VerifierPolicy::Gm => Verifier::Gm,
        VerifierPolicy::Fixed(id) => Verifier::Member(id.clone()),
        VerifierPolicy::MaxBattery => {
            let best = nodes
                .iter()
                .max_by(|a, b| {
                    a.battery
                        .total_cmp(&b.battery)
                        .then_with(|| b.member_id.cmp(&a.member_id))
                })
                .expect("nonempty group");
            Verifier::Member(best.member_id.clone())
        }
    }
}

fn default_bitrate() -> f64 {
    DEFAULT_BITRATE_BPS
}
fn default_compute_rate() -> f64 {
    DEFAULT_COMPUTE_RATE
}
fn default_jpt() -> f64 {
    DEFAULT_JOULES_PER_TMULQ
}
fn default_tx() -> f64 {
    DEFAULT_TX_JOULES_PER_BYTE
}
fn default_rx() -> f64 {
    DEFAULT_RX_JOULES_PER_BYTE
}
fn default_retransmit_delay() -> f64 {
    0.1
}
fn default_max_retransmits() -> u32 {
    32
}
fn default_round_timeout() -> f64 {
    1.0
}
fn default_max_restarts() -> u32 {
    3
}
fn default_curve() -> String {
    "builtin:secp160r1".to_string()
}
fn default_harn_group() -> String {
    "builtin:1024-160".to_string()
}

/// One simulation run. Every field except `scheme`, `m` and `t` has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub scheme: SimScheme,
    pub m: usize,
    pub t: usize,
    #[serde(default = "default_bitrate")]
    pub bitrate_bps: f64,
    /// `T_mul,q` per second on every node.
    #[serde(default = "default_compute_rate")]
    pub compute_rate: f64,
    #[serde(default = "default_jpt")]
    pub joules_per_tmulq: f64,
    #[serde(default = "default_tx")]
    pub tx_joules_per_byte: f64,
    #[serde(default = "default_rx")]
    pub rx_joules_per_byte: f64,
    #[serde(default)]
    pub mac: Mac,
    #[serde(default)]
    pub loss_probability: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub schedule: Schedule,
    /// Defaults to the GM for centralized schemes and `max-battery` otherwise.
    #[serde(default)]
    pub verifier_policy: Option<VerifierPolicy>,
    #[serde(default)]
    pub battery_levels: Option<Vec<f64>>,
    /// The last `attackers` members submit random values instead of shares.
    #[serde(default)]
    pub attackers: usize,
    /// Verifier receive queue bound; unbounded when absent.
    #[serde(default)]
    pub queue_capacity: Option<usize>,
    #[serde(default = "default_retransmit_delay")]
    pub retransmit_delay_s: f64,
    #[serde(default = "default_max_retransmits")]
    pub max_retransmits: u32,
    /// Idle time after which an incomplete round is restarted.
    #[serde(default = "default_round_timeout")]
    pub round_timeout_s: f64,
    #[serde(default = "default_max_restarts")]
    pub max_restarts: u32,
    #[serde(default = "default_curve")]
    pub curve: String,
    #[serde(default = "default_harn_group")]
    pub harn_group: String,
}

impl Scenario {
    pub fn new(scheme: SimScheme, m: usize, t: usize) -> Self {
        Scenario {
            scheme,
            m,
            t,
            bitrate_bps: default_bitrate(),
            compute_rate: default_compute_rate(),
            joules_per_tmulq: default_jpt(),
            tx_joules_per_byte: default_tx(),
            rx_joules_per_byte: default_rx(),
            mac: Mac::SerializedBroadcast,
            loss_probability: 0.0,
            seed: 0,
            schedule: Schedule::Staggered,
            verifier_policy: None,
            battery_levels: None,
            attackers: 0,
            queue_capacity: None,
            retransmit_delay_s: default_retransmit_delay(),
            max_retransmits: default_max_retransmits(),
            round_timeout_s: default_round_timeout(),
            max_restarts: default_max_restarts(),
            curve: default_curve(),
            harn_group: default_harn_group(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn energy_model(&self) -> EnergyModel {
        EnergyModel {
            joules_per_tmulq: self.joules_per_tmulq,
            tx_joules_per_byte: self.tx_joules_per_byte,
            rx_joules_per_byte: self.rx_joules_per_byte,
        }
    }

    pub fn verifier_policy(&self) -> VerifierPolicy {
        self.verifier_policy.clone().unwrap_or(match self.scheme {
            SimScheme::ProposedDecentralized => VerifierPolicy::MaxBattery,
            _ => VerifierPolicy::Gm,
        })
    }

    pub fn member_ids(&self) -> Vec<MemberId> {
        (1..=self.m).map(|i| MemberId::indexed(i, self.m)).collect()
    }

    /// Reports every problem at once.
    pub fn validate(&self) -> Result<()> {
        let mut errors = Vec::new();
        if self.m == 0 {
            errors.push("m must be at least 1".to_string());
        }
        if self.t == 0 || self.t > self.m {
            errors.push(format!("t must satisfy 1 <= t <= m (t={}, m={})", self.t, self.m));
        }
        let positive = [
            ("bitrate_bps", self.bitrate_bps),
            ("compute_rate", self.compute_rate),
            ("joules_per_tmulq", self.joules_per_tmulq),
            ("round_timeout_s", self.round_timeout_s),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                errors.push(format!("{name} must be positive, got {value}"));
            }
        }
        let non_negative = [
            ("tx_joules_per_byte", self.tx_joules_per_byte),
            ("rx_joules_per_byte", self.rx_joules_per_byte),
            ("retransmit_delay_s", self.retransmit_delay_s),
        ];
        for (name, value) in non_negative {
            if !(value >= 0.0 && value.is_finite()) {
                errors.push(format!("{name} must be non-negative, got {value}"));
            }
        }
        if !(0.0..=1.0).contains(&self.loss_probability) {
            errors.push(format!("loss_probability must be in [0, 1], got {}", self.loss_probability));
        }
        if self.attackers > self.m {
            errors.push(format!("attackers ({}) exceeds m ({})", self.attackers, self.m));
        }
        if self.queue_capacity == Some(0) {
            errors.push("queue_capacity must be at least 1".to_string());
        }
        if let Some(levels) = &self.battery_levels {
            if levels.len() != self.m {
                errors.push(format!("battery_levels has {} entries for m={}", levels.len(), self.m));
            }
        }
        match (self.scheme, self.verifier_policy()) {
            (SimScheme::ProposedDecentralized, VerifierPolicy::Gm) => {
                errors.push("the GM takes no part in decentralized verification".to_string())
            }
            (SimScheme::ProposedDecentralized, VerifierPolicy::Fixed(id)) => {
                if !self.member_ids().contains(&id) {
                    errors.push(format!("fixed verifier {id} is not a member"));
                }
            }
            (SimScheme::ProposedDecentralized, VerifierPolicy::MaxBattery) => {}
            (_, VerifierPolicy::Gm) => {}
            (scheme, _) => errors.push(format!("{scheme} is verified by the GM")),
        }
        match self.scheme {
            SimScheme::Harn => match HarnGroup::load(&self.harn_group) {
                Ok(group) if BigUint::from(self.m) >= *group.q().value() => {
                    errors.push(format!("m={} does not fit below q", self.m))
                }
                Ok(_) => {}
                Err(e) => errors.push(format!("harn_group: {e}")),
            },
            _ => match CurveParams::load(&self.curve) {
                Ok(curve) => match curve.subgroup_order() {
                    Some(r) if BigUint::from(self.m) < *r.value() => {}
                    Some(_) => errors.push(format!("m={} does not fit below the subgroup order", self.m)),
                    None => errors.push("curve has no prime subgroup order".to_string()),
                },
                Err(e) => errors.push(format!("curve: {e}")),
            },
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(SimError::Invalid(errors))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FailureReason {
    /// Rounds kept timing out with shares missing.
    NoProgress,
    /// Every round completed but verification rejected.
    DenialOfAuthentication,
    /// Too few honest members remained after excluding culprits.
    BelowThreshold,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "status", content = "reason")]
pub enum Outcome {
    Authenticated,
    Failed(FailureReason),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    Gm,
    Verifier,
    Member,
    Attacker,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeReport {
    pub member_id: String,
    pub role: Role,
    pub tmulq_count: u64,
    #[serde(rename = "compute_J")]
    pub compute_j: f64,
    #[serde(rename = "radio_J")]
    pub radio_j: f64,
    #[serde(rename = "total_J")]
    pub total_j: f64,
    pub bytes_tx: u64,
    pub bytes_rx: u64,
    /// Frames transmitted, retransmissions included.
    pub messages: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimEvent {
    pub t_ns: u64,
    pub node: String,
    pub kind: String,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub scheme: SimScheme,
    pub m: usize,
    pub t: usize,
    pub seed: u64,
    pub outcome: Outcome,
    pub auth_time_s: f64,
    pub rounds: u32,
    pub verifier: Verifier,
    pub excluded: Vec<MemberId>,
    pub max_queue_len: usize,
    pub queue_drops: u64,
    pub retransmissions: u64,
    pub lost_frames: u64,
    pub channel_bytes_tx: u64,
    pub channel_bytes_delivered: u64,
    pub per_node: Vec<NodeReport>,
    pub events: Vec<SimEvent>,
}

impl SimReport {
    pub fn authenticated(&self) -> bool {
        self.outcome == Outcome::Authenticated
    }

    pub fn node(&self, id: &str) -> Option<&NodeReport> {
        self.per_node.iter().find(|n| n.member_id == id)
    }

    /// The first honest member that is not the verifier.
    pub fn representative(&self) -> Option<&NodeReport> {
        self.per_node.iter().find(|n| n.role == Role::Member)
    }

    pub fn csv_row(&self) -> CsvRow {
        let node = self.representative().or_else(|| self.per_node.last());
        let (tmulq, compute_j, radio_j, total_j) = node
            .map(|n| (n.tmulq_count, n.compute_j, n.radio_j, n.total_j))
            .unwrap_or_default();
        CsvRow {
            scheme: self.scheme.name().to_string(),
            m: self.m as u64,
            tmulq,
            compute_j,
            radio_j,
            total_j,
            auth_time_s: Some(self.auth_time_s),
        }
    }

    pub fn events_json(&self) -> String {
        serde_json::to_string_pretty(&self.events).expect("events serialize")
    }
}

fn seconds_to_ns(seconds: f64) -> u64 {
    (seconds * NS_PER_S).round() as u64
}

enum Crypto {
    Proposed {
        config: GroupConfig,
        shares: Vec<Share>,
    },
    Harn {
        params: HarnParams,
        tokens: Vec<HarnToken>,
    },
}

struct Node {
    id: String,
    role: Role,
    counter: OpCounter,
    busy_until: u64,
    bytes_tx: u64,
    bytes_rx: u64,
    messages: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum Ev {
    SenderStart { node: usize },
    SenderComputed { node: usize, frame: Vec<u8> },
    TxDone { from: usize, frame: Vec<u8>, attempt: u32 },
    Retransmit { from: usize, frame: Vec<u8>, attempt: u32 },
    VerifierReady,
    VerifierProcessed,
    RoundTimeout,
}

/// Node index 0 is the GM; members are 1..=m.
struct Sim<'a> {
    sc: &'a Scenario,
    crypto: Crypto,
    conversion: TmulqConversion,
    nodes: Vec<Node>,
    verifier: usize,
    verifier_choice: Verifier,
    attackers_from: usize,
    rng: ChaCha20Rng,
    channel_rng: ChaCha20Rng,
    queue: BinaryHeap<Reverse<(u64, u64, u32, Ev)>>,
    seq: u64,
    channel_free: u64,
    events: Vec<SimEvent>,
    // round state
    round: u32,
    participants: Vec<usize>,
    senders: Vec<usize>,
    next_sender: usize,
    outstanding: usize,
    inbox: VecDeque<(usize, Vec<u8>)>,
    verifier_ready: bool,
    verifier_busy: bool,
    processed: usize,
    timeout_armed: bool,
    last_round_timed_out: bool,
    verdicts: BTreeMap<usize, bool>,
    decentralized: Option<DecentralizedVerifier>,
    decentralized_ok: bool,
    released: Vec<Released>,
    harn_product: Option<FieldElement>,
    // results
    excluded: Vec<MemberId>,
    outcome: Option<(Outcome, u64)>,
    max_queue_len: usize,
    queue_drops: u64,
    retransmissions: u64,
    lost_frames: u64,
    channel_bytes_tx: u64,
    channel_bytes_delivered: u64,
}

impl<'a> Sim<'a> {
    fn new(sc: &'a Scenario) -> Result<Self> {
        let mut rng = ChaCha20Rng::seed_from_u64(sc.seed);
        let mut channel_rng = ChaCha20Rng::seed_from_u64(sc.seed);
        channel_rng.set_stream(1);
        let ids = sc.member_ids();
        let (crypto, conversion) = match sc.scheme {
            SimScheme::Harn => {
                let group = HarnGroup::load(&sc.harn_group).map_err(|e| SimError::Setup(e.to_string()))?;
                let (params, tokens) =
                    harn_init(sc.t, sc.m, &group, &mut rng).map_err(|e| SimError::Setup(e.to_string()))?;
                let conversion = TmulqConversion::new().with_weight(group.p(), crate::cost::TMULP_IN_TMULQ);
                (Crypto::Harn { params, tokens }, conversion)
            }
            _ => {
                let curve = CurveParams::load(&sc.curve).map_err(|e| SimError::Setup(e.to_string()))?;
                let (config, shares) =
                    gm_init(sc.t, sc.m, &curve, &mut rng).map_err(|e| SimError::Setup(e.to_string()))?;
                (Crypto::Proposed { config, shares }, TmulqConversion::new())
            }
        };
        let statuses: Vec<NodeStatus> = ids
            .iter()
            .enumerate()
            .map(|(i, id)| NodeStatus {
                member_id: id.clone(),
                battery: sc.battery_levels.as_ref().map(|b| b[i]).unwrap_or(1.0),
            })
            .collect();
        let verifier_choice = select_verifier(&sc.verifier_policy(), &statuses);
        let verifier = match &verifier_choice {
            Verifier::Gm => 0,
            Verifier::Member(id) => 1 + ids.iter().position(|x| x == id).expect("validated member"),
        };
        let attackers_from = sc.m + 1 - sc.attackers;
        let mut nodes = vec![Node::new(GM_ID.to_string(), Role::Gm)];
        for (i, id) in ids.iter().enumerate() {
            let idx = i + 1;
            let role = if idx == verifier {
                Role::Verifier
            } else if idx >= attackers_from {
                Role::Attacker
            } else {
                Role::Member
            };
            nodes.push(Node::new(id.to_string(), role));
        }
        Ok(Sim {
            sc,
            crypto,
            conversion,
            nodes,
            verifier,
            verifier_choice,
            attackers_from,
            rng,
            channel_rng,
            queue: BinaryHeap::new(),
            seq: 0,
            channel_free: 0,
            events: Vec::new(),
            round: 0,
            participants: (1..=sc.m).collect(),
            senders: Vec::new(),
            next_sender: 0,
            outstanding: 0,
            inbox: VecDeque::new(),
            verifier_ready: false,
            verifier_busy: false,
            processed: 0,
            timeout_armed: false,
            last_round_timed_out: false,
            verdicts: BTreeMap::new(),
            decentralized: None,
            decentralized_ok: true,
            released: Vec::new(),
            harn_product: None,
            excluded: Vec::new(),
            outcome: None,
            max_queue_len: 0,
            queue_drops: 0,
            retransmissions: 0,
            lost_frames: 0,
            channel_bytes_tx: 0,
            channel_bytes_delivered: 0,
        })
    }

    fn log(&mut self, t: u64, node: usize, kind: &str, detail: String) {
        self.events.push(SimEvent {
            t_ns: t,
            node: self.nodes[node].id.clone(),
            kind: kind.to_string(),
            detail,
        });
    }

    fn schedule(&mut self, at: u64, ev: Ev) {
        self.seq += 1;
        self.queue.push(Reverse((at, self.seq, self.round, ev)));
    }

    fn tmulq(&self, node: usize) -> u64 {
        self.conversion.tmulq(&self.nodes[node].counter.snapshot())
    }

    /// Runs `work` on `node`'s counter and returns the completion time.
    fn compute<T>(&mut self, node: usize, now: u64, work: impl FnOnce(&mut Self, &OpCounter) -> T) -> (T, u64) {
        let before = self.tmulq(node);
        let counter = std::mem::take(&mut self.nodes[node].counter);
        let out = work(self, &counter);
        self.nodes[node].counter = counter;
        let spent = self.tmulq(node) - before;
        let start = now.max(self.nodes[node].busy_until);
        let done = start + seconds_to_ns(spent as f64 / self.sc.compute_rate);
        self.nodes[node].busy_until = done;
        (out, done)
    }

    fn run(mut self) -> SimReport {
        self.start_round(0);
        while let Some(Reverse((t, _, round, ev))) = self.queue.pop() {
            if self.outcome.is_some() {
                break;
            }
            if round != self.round {
                continue;
            }
            self.handle(t, ev);
        }
        let (outcome, end) = self.outcome.unwrap_or((Outcome::Failed(FailureReason::NoProgress), 0));
        self.report(outcome, end)
    }

    fn finish(&mut self, now: u64, outcome: Outcome) {
        let node = self.verifier;
        let detail = match outcome {
            Outcome::Authenticated => "Authentication is complete".to_string(),
            Outcome::Failed(reason) => format!("{reason:?}"),
        };
        self.log(now, node, "outcome", detail);
        self.outcome = Some((outcome, now));
    }

    fn start_round(&mut self, now: u64) {
        self.round += 1;
        if self.round > 1 + self.sc.max_restarts {
            self.finish(now, Outcome::Failed(self.exhausted_reason()));
            return;
        }
        self.senders = self
            .participants
            .iter()
            .copied()
            .filter(|&i| i != self.verifier)
            .collect();
        self.next_sender = 0;
        self.outstanding = self.senders.len();
        self.inbox.clear();
        self.verifier_busy = false;
        self.verifier_ready = false;
        self.processed = 0;
        self.timeout_armed = false;
        self.verdicts.clear();
        self.decentralized = None;
        self.decentralized_ok = true;
        self.released.clear();
        self.harn_product = None;
        let detail = format!("round {} with {} participants", self.round, self.participants.len());
        self.log(now, self.verifier, "round-start", detail);
        self.prepare_verifier(now);
        match self.sc.schedule {
            Schedule::Staggered => self.start_next_sender(now),
            Schedule::Simultaneous => {
                for k in 0..self.senders.len() {
                    let node = self.senders[k];
                    self.schedule(now, Ev::SenderStart { node });
                }
                self.next_sender = self.senders.len();
            }
        }
    }

    fn exhausted_reason(&self) -> FailureReason {
        if self.last_round_timed_out {
            FailureReason::NoProgress
        } else {
            FailureReason::DenialOfAuthentication
        }
    }

    fn start_next_sender(&mut self, now: u64) {
        if let Some(&node) = self.senders.get(self.next_sender) {
            self.next_sender += 1;
            self.schedule(now, Ev::SenderStart { node });
        }
    }

    fn participant_ids(&self) -> Vec<MemberId> {
        let ids = self.sc.member_ids();
        self.participants.iter().map(|&i| ids[i - 1].clone()).collect()
    }

    fn prepare_verifier(&mut self, now: u64) {
        let v = self.verifier;
        let ready_at = match &self.crypto {
            Crypto::Harn { params, .. } => {
                self.harn_product = Some(FieldElement::one(params.group().p()));
                now
            }
            Crypto::Proposed { .. } if v == 0 => now,
            Crypto::Proposed { .. } => {
                let ids = self.participant_ids();
                let ((), done) = self.compute(v, now, |sim, ctx| {
                    let Crypto::Proposed { config, shares } = &sim.crypto else { unreachable!() };
                    let mut verifier = DecentralizedVerifier::new(config, &ids, ctx).expect("participants >= t");
                    let own = make_public_share(&shares[v - 1], config, ctx).expect("nonzero share");
                    verifier.absorb(&own, ctx).expect("own share is well formed");
                    sim.decentralized = Some(verifier);
                });
                done
            }
        };
        self.schedule(ready_at, Ev::VerifierReady);
    }

    fn handle(&mut self, now: u64, ev: Ev) {
        match ev {
            Ev::SenderStart { node } => self.sender_start(now, node),
            Ev::SenderComputed { node, frame } => {
                self.log(now, node, "computed", format!("{} byte frame", frame.len()));
                self.transmit(now, node, frame, 0);
            }
            Ev::TxDone { from, frame, attempt } => self.deliver(now, from, frame, attempt),
            Ev::Retransmit { from, frame, attempt } => {
                self.retransmissions += 1;
                self.transmit(now, from, frame, attempt);
            }
            Ev::VerifierReady => {
                self.verifier_ready = true;
                self.log(now, self.verifier, "verifier-ready", String::new());
                self.try_process(now);
                self.check_round(now);
            }
            Ev::VerifierProcessed => {
                self.verifier_busy = false;
                self.processed += 1;
                self.try_process(now);
                self.check_round(now);
            }
            Ev::RoundTimeout => {
                self.log(now, self.verifier, "timeout", format!("{} of {} shares", self.processed, self.senders.len()));
                self.last_round_timed_out = true;
                self.start_round(now);
            }
        }
    }

    fn sender_start(&mut self, now: u64, node: usize) {
        let attacker = node >= self.attackers_from;
        let id = self.sc.member_ids()[node - 1].clone();
        let (frame, done) = self.compute(node, now, |sim, ctx| match &sim.crypto {
            Crypto::Proposed { config, shares } => {
                let ps = if attacker {
                    let r = config.scalar_field().expect("subgroup").value().clone();
                    let k = sim.rng.gen_biguint_range(&BigUint::from(1u8), &r);
                    let point = config.curve().scalar_mul(&k, config.generator(), ctx).expect("generator");
                    PublicShare { member_id: id, point }
                } else {
                    make_public_share(&shares[node - 1], config, ctx).expect("nonzero share")
                };
                ps.to_frame(config.epoch()).expect("affine point").encode()
            }
            Crypto::Harn { params, tokens } => {
                let e = if attacker {
                    let q = params.group().q().value().clone();
                    let k = sim.rng.gen_biguint_range(&BigUint::from(1u8), &q);
                    ctx.pow_ladder(params.group().g(), &k, params.group().q().bits())
                } else {
                    let xs: Vec<FieldElement> = sim.participants.iter().map(|&i| tokens[i - 1].x.clone()).collect();
                    harn_release(&tokens[node - 1], &xs, params, ctx).expect("participant")
                };
                Released { member_id: id, e }.to_frame(0).expect("scalar frame").encode()
            }
        });
        let kind = if attacker { "forge" } else { "compute" };
        self.log(now, node, kind, format!("done at {done} ns"));
        self.schedule(done, Ev::SenderComputed { node, frame });
    }

    fn transmit(&mut self, now: u64, from: usize, frame: Vec<u8>, attempt: u32) {
        let bytes = frame.len() as u64;
        let airtime = seconds_to_ns(bytes as f64 * 8.0 / self.sc.bitrate_bps);
        let start = now.max(self.channel_free);
        let end = start + airtime;
        self.channel_free = end;
        self.channel_bytes_tx += bytes;
        let node = &mut self.nodes[from];
        node.bytes_tx += bytes;
        node.messages += 1;
        self.log(start, from, "tx", format!("{bytes} bytes, attempt {attempt}"));
        self.schedule(end, Ev::TxDone { from, frame, attempt });
    }

    fn deliver(&mut self, now: u64, from: usize, frame: Vec<u8>, attempt: u32) {
        if attempt == 0 && self.sc.schedule == Schedule::Staggered {
            self.start_next_sender(now);
        }
        let v = self.verifier;
        if self.channel_rng.gen::<f64>() < self.sc.loss_probability {
            self.lost_frames += 1;
            self.outstanding -= 1;
            self.log(now, from, "lost", String::new());
            self.check_round(now);
            return;
        }
        let bytes = frame.len() as u64;
        self.channel_bytes_delivered += bytes;
        self.nodes[v].bytes_rx += bytes;
        let full = self.sc.queue_capacity.is_some_and(|cap| self.inbox.len() >= cap);
        if full {
            self.queue_drops += 1;
            self.log(now, v, "drop", format!("queue full, from {}", self.nodes[from].id));
            if attempt < self.sc.max_retransmits {
                let backoff = self.sc.retransmit_delay_s * f64::from(1u32 << attempt.min(MAX_BACKOFF_DOUBLINGS));
                self.schedule(
                    now + seconds_to_ns(backoff),
                    Ev::Retransmit {
                        from,
                        frame,
                        attempt: attempt + 1,
                    },
                );
            } else {
                self.outstanding -= 1;
                self.check_round(now);
            }
            return;
        }
        self.outstanding -= 1;
        self.inbox.push_back((from, frame));
        self.max_queue_len = self.max_queue_len.max(self.inbox.len());
        self.log(now, v, "rx", format!("from {}, queue {}", self.nodes[from].id, self.inbox.len()));
        self.try_process(now);
        self.check_round(now);
    }

    fn try_process(&mut self, now: u64) {
        if !self.verifier_ready || self.verifier_busy {
            return;
        }
        let Some((from, bytes)) = self.inbox.pop_front() else {
            return;
        };
        let v = self.verifier;
        let (verdict, done) = self.compute(v, now, |sim, ctx| sim.process_frame(from, &bytes, ctx));
        self.verifier_busy = true;
        self.log(now, v, "verify", format!("{} -> {verdict}", self.nodes[from].id));
        self.schedule(done, Ev::VerifierProcessed);
    }

    /// Runs the protocol's own check on one received frame.
    fn process_frame(&mut self, from: usize, bytes: &[u8], ctx: &OpCounter) -> bool {
        let frame = match Frame::decode(bytes) {
            Ok(frame) => frame,
            Err(_) => {
                self.verdicts.insert(from, false);
                self.decentralized_ok = false;
                return false;
            }
        };
        match &self.crypto {
            Crypto::Proposed { config, shares } => {
                let parsed = PublicShare::from_frame(&frame, config.curve());
                if self.verifier == 0 {
                    let ok = parsed
                        .map(|ps| gm_verify_one(config, &shares[from - 1], &ps, ctx).unwrap_or(false))
                        .unwrap_or(false);
                    self.verdicts.insert(from, ok);
                    ok
                } else {
                    let verifier = self.decentralized.as_mut().expect("prepared");
                    let ok = parsed
                        .map(|ps| verifier.absorb(&ps, ctx).unwrap_or(false))
                        .unwrap_or(false);
                    self.decentralized_ok &= ok;
                    ok
                }
            }
            Crypto::Harn { params, .. } => match Released::from_frame(&frame, params.group()) {
                Ok(released) => {
                    let product = self.harn_product.take().expect("prepared");
                    self.harn_product = Some(ctx.mul(&product, &released.e).expect("same modulus"));
                    self.released.push(released);
                    true
                }
                Err(_) => {
                    self.decentralized_ok = false;
                    false
                }
            },
        }
    }

    fn check_round(&mut self, now: u64) {
        if self.outcome.is_some() || !self.verifier_ready || self.verifier_busy {
            return;
        }
        if self.processed == self.senders.len() {
            self.conclude_round(now);
        } else if self.outstanding == 0 && self.inbox.is_empty() && !self.timeout_armed {
            self.timeout_armed = true;
            let at = now + seconds_to_ns(self.sc.round_timeout_s);
            self.schedule(at, Ev::RoundTimeout);
        }
    }

    fn conclude_round(&mut self, now: u64) {
        self.last_round_timed_out = false;
        let v = self.verifier;
        match &self.crypto {
            Crypto::Proposed { .. } if v == 0 => {
                let culprits: Vec<usize> = self.verdicts.iter().filter(|(_, ok)| !**ok).map(|(&i, _)| i).collect();
                if culprits.is_empty() {
                    self.finish(now, Outcome::Authenticated);
                    return;
                }
                let ids = self.sc.member_ids();
                for &c in &culprits {
                    self.excluded.push(ids[c - 1].clone());
                }
                self.log(now, v, "culprits", format!("{:?}", culprits.iter().map(|&c| &ids[c - 1]).collect::<Vec<_>>()));
                self.participants.retain(|i| !culprits.contains(i));
                if self.participants.len() < self.sc.t {
                    self.finish(now, Outcome::Failed(FailureReason::BelowThreshold));
                    return;
                }
            }
            Crypto::Proposed { .. } => {
                let ok = self.decentralized_ok && self.decentralized.as_ref().is_some_and(|d| d.finish());
                if ok {
                    self.finish(now, Outcome::Authenticated);
                    return;
                }
                self.log(now, v, "reject", "sum of C_i differs from Q".to_string());
            }
            Crypto::Harn { params, .. } => {
                let ok = self.decentralized_ok
                    && harn_verify(&self.released, params, &OpCounter::disabled()).unwrap_or(false);
                if ok {
                    self.finish(now, Outcome::Authenticated);
                    return;
                }
                self.log(now, v, "reject", "product of e_i differs from g^s".to_string());
            }
        }
        self.start_round(now);
    }

    fn report(self, outcome: Outcome, end: u64) -> SimReport {
        let model = self.sc.energy_model();
        let include_gm = self.verifier == 0;
        let per_node = self
            .nodes
            .iter()
            .enumerate()
            .filter(|(i, _)| *i > 0 || include_gm)
            .map(|(_, node)| {
                let tmulq = self.conversion.tmulq(&node.counter.snapshot());
                let e = model.energy(tmulq, node.bytes_tx, node.bytes_rx);
                NodeReport {
                    member_id: node.id.clone(),
                    role: node.role,
                    tmulq_count: tmulq,
                    compute_j: e.compute_j,
                    radio_j: e.radio_j,
                    total_j: e.total_j,
                    bytes_tx: node.bytes_tx,
                    bytes_rx: node.bytes_rx,
                    messages: node.messages,
                }
            })
            .collect();
        SimReport {
            scheme: self.sc.scheme,
            m: self.sc.m,
            t: self.sc.t,
            seed: self.sc.seed,
            outcome,
            auth_time_s: end as f64 / NS_PER_S,
            rounds: self.round.min(1 + self.sc.max_restarts),
            verifier: self.verifier_choice,
            excluded: self.excluded,
            max_queue_len: self.max_queue_len,
            queue_drops: self.queue_drops,
            retransmissions: self.retransmissions,
            lost_frames: self.lost_frames,
            channel_bytes_tx: self.channel_bytes_tx,
            channel_bytes_delivered: self.channel_bytes_delivered,
            per_node,
            events: self.events,
        }
    }
}

impl Node {
    fn new(id: String, role: Role) -> Self {
        Node {
            id,
            role,
            counter: OpCounter::new(),
            busy_until: 0,
            bytes_tx: 0,
            bytes_rx: 0,
            messages: 0,
        }
    }
}

/// Executes one scenario. Identical scenarios give identical reports.
pub fn run(scenario: &Scenario) -> Result<SimReport> {
    scenario.validate()?;
    Ok(Sim::new(scenario)?.run())
}

/// Seed for one `(scheme, m)` point of a sweep.
pub fn derive_seed(base: u64, scheme: SimScheme, m: usize) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(b"sweep");
    hasher.update(base.to_be_bytes());
    hasher.update(scheme.name().as_bytes());
    hasher.update((m as u64).to_be_bytes());
    u64::from_be_bytes(hasher.finalize()[..8].try_into().expect("8 bytes"))
}

/// One scenario per `(scheme, m)` pair, in input order. The threshold is
/// capped at `m` and the seed derived from the base seed.
pub fn sweep_plan(schemes: &[SimScheme], ms: &[usize], base: &Scenario) -> Vec<Scenario> {
    let mut plan = Vec::with_capacity(schemes.len() * ms.len());
    for &scheme in schemes {
        for &m in ms {
            let mut sc = base.clone();
            sc.scheme = scheme;
            sc.m = m;
            sc.t = base.t.min(m).max(1);
            sc.seed = derive_seed(base.seed, scheme, m);
            if sc.battery_levels.as_ref().is_some_and(|b| b.len() != m) {
                sc.battery_levels = None;
            }
            plan.push(sc);
        }
    }
    plan
}

/// Runs [`sweep_plan`] sequentially and returns one CSV row per run.
pub fn sweep(schemes: &[SimScheme], ms: &[usize], base: &Scenario) -> Result<Vec<CsvRow>> {
    sweep_plan(schemes, ms, base)
        .iter()
        .map(|sc| run(sc).map(|r| r.csv_row()))
        .collect()
}

/// Compute rate and energy constant fitted to the single anchor point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub compute_rate: f64,
    pub joules_per_tmulq: f64,
}

/// Fits both constants on proposed-centralized at `m = 10`. Authentication
/// time is affine in `1 / rate` for a loss-free run, so two probe runs
/// determine the rate exactly.
pub fn calibrate(base: &Scenario) -> Result<Calibration> {
    let mut sc = base.clone();
    sc.scheme = SimScheme::ProposedCentralized;
    sc.m = ANCHOR_M;
    sc.t = base.t.clamp(1, ANCHOR_M);
    sc.loss_probability = 0.0;
    sc.attackers = 0;
    sc.verifier_policy = None;
    sc.battery_levels = None;
    let (r1, r2) = (1.0e4, 2.0e4);
    sc.compute_rate = r1;
    let t1 = run(&sc)?.auth_time_s;
    sc.compute_rate = r2;
    let t2 = run(&sc)?.auth_time_s;
    let slope = (t1 - t2) / (1.0 / r1 - 1.0 / r2);
    let intercept = t1 - slope / r1;
    let compute_rate = slope / (ANCHOR_AUTH_TIME_S - intercept);
    sc.compute_rate = compute_rate;
    let report = run(&sc)?;
    let node = report.representative().expect("honest member");
    let radio = node.bytes_tx as f64 * sc.tx_joules_per_byte + node.bytes_rx as f64 * sc.rx_joules_per_byte;
    Ok(Calibration {
        compute_rate,
        joules_per_tmulq: (ANCHOR_ENERGY_J - radio) / node.tmulq_count as f64,
    })
}

/// Named scenario sets.
pub fn preset(name: &str) -> Option<Vec<Scenario>> {
    let m = match name {
        "compare-m10" => 10,
        "compare-m50" => 50,
        _ => return None,
    };
    Some(
        SimScheme::ALL
            .iter()
            .map(|&scheme| {
                let mut sc = Scenario::new(scheme, m, m / 2);
                sc.seed = 1;
                sc
            })
            .collect(),
    )
}

pub const PRESETS: [&str; 2] = ["compare-m10", "compare-m50"];
