//! Threshold group authentication over an elliptic curve.
//!
//! The group manager (GM) hides a secret `s` in a Shamir polynomial over the
//! curve's prime subgroup order and publishes `Q = s·P` plus `H(s)`. Members
//! prove possession of a share by broadcasting `f(x_i)·P`; the GM, or any
//! member, checks the broadcasts. Members then agree on `s` over pairwise ECDH
//! channels and accept it when its hash matches the published commitment.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use chacha20poly1305::aead::{Aead, KeyInit, Payload};
use chacha20poly1305::{ChaCha20Poly1305, Key, Nonce};
use num_bigint::BigUint;
use rand::{CryptoRng, RngCore};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use subtle::ConstantTimeEq;
use thiserror::Error;

use crate::ec::{CurveParams, CurvePoint, EcError};
use crate::field::{lagrange_coeff_at_zero, FieldElement, FieldError, OpCounter, Prime};
use crate::sss::{
    commit, default_roster, issue_shares, reconstruct, sample_polynomial, verify_commitment,
    MemberId, RosterEntry, SecretCommitment, SecretPolynomial, Share, SssError,
};
use crate::wire::{self, Frame, MessageType, SealedPayload, WireError, NONCE_LEN};

pub const CIPHER_SUITE_ID: &str = "ECDH-SHA256-CHACHA20POLY1305";

const PAIRWISE_LABEL: &[u8] = b"gas/pairwise/v1";
const SHARE_AAD_LABEL: &[u8] = b"gas/share/v1";
const ROTATE_LABEL: &[u8] = b"gas/rotate/v1";

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("invalid group size: t={t}, n={n}")]
    InvalidSize { t: usize, n: usize },
    #[error("curve has no declared prime subgroup order")]
    NoSubgroup,
    #[error("group of {n} members does not fit below subgroup order {order}")]
    GroupTooLarge { n: usize, order: BigUint },
    #[error("{0} is not in the roster")]
    UnknownMember(MemberId),
    #[error("{0} appears more than once")]
    DuplicateMember(MemberId),
    #[error("m must be equal or larger than t (m={m}, t={t})")]
    BelowThreshold { m: usize, t: usize },
    #[error("public share of {0} is the point at infinity")]
    InfinityShare(MemberId),
    #[error("shared point with {0} is the point at infinity")]
    InfinitySharedPoint(MemberId),
    #[error("no pairwise key with {0}")]
    MissingKey(MemberId),
    #[error("authentication tag from {0} did not verify")]
    TagFailure(MemberId),
    #[error("recovered secret does not match the published commitment")]
    CommitmentMismatch,
    #[error("message for {recipient} delivered to {actual}")]
    Misdelivered { recipient: MemberId, actual: MemberId },
    #[error("share does not match the roster entry for {0}")]
    RosterMismatch(MemberId),
    #[error("epoch {got} does not match the group epoch {expected}")]
    WrongEpoch { expected: u32, got: u32 },
    #[error("bad group config: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Curve(#[from] EcError),
    #[error(transparent)]
    Sss(#[from] SssError),
    #[error(transparent)]
    Wire(#[from] WireError),
}

pub type Result<T> = std::result::Result<T, ProtocolError>;

/// Public group parameters. The secret `s` is not part of the config.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroupConfig {
    curve: CurveParams,
    curve_ref: String,
    q_point: CurvePoint,
    commitment: SecretCommitment,
    threshold: usize,
    roster: Vec<RosterEntry>,
    cipher_suite_id: String,
    epoch: u32,
}

impl GroupConfig {
    fn new(
        curve: &CurveParams,
        poly: &SecretPolynomial,
        roster: Vec<RosterEntry>,
        epoch: u32,
        ctx: &OpCounter,
    ) -> Result<Self> {
        let q_point = curve.scalar_mul_fe(poly.secret(), curve.generator(), ctx)?;
        let config = GroupConfig {
            curve: curve.clone(),
            curve_ref: curve_ref_for(curve),
            q_point,
            commitment: commit(poly.secret()),
            threshold: poly.threshold(),
            roster,
            cipher_suite_id: CIPHER_SUITE_ID.to_string(),
            epoch,
        };
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<()> {
        if !self.curve.is_on_curve(&self.q_point) {
            return Err(ProtocolError::BadConfig("Q is not on the curve".into()));
        }
        if self.threshold == 0 || self.threshold > self.roster.len() {
            return Err(ProtocolError::InvalidSize {
                t: self.threshold,
                n: self.roster.len(),
            });
        }
        let field = self.scalar_field()?;
        let mut xs = HashSet::new();
        let mut ids = HashSet::new();
        for entry in &self.roster {
            if entry.x.modulus() != &field || entry.x.is_zero() || !xs.insert(entry.x.clone()) {
                return Err(ProtocolError::BadConfig(format!(
                    "roster x for {} must be distinct, nonzero and in the scalar field",
                    entry.member_id
                )));
            }
            if !ids.insert(entry.member_id.clone()) {
                return Err(ProtocolError::DuplicateMember(entry.member_id.clone()));
            }
        }
        Ok(())
    }

    pub fn curve(&self) -> &CurveParams {
        &self.curve
    }

    pub fn curve_ref(&self) -> &str {
        &self.curve_ref
    }

    /// The base point `P`.
    pub fn generator(&self) -> &CurvePoint {
        self.curve.generator()
    }

    /// `Q = s·P`.
    pub fn q_point(&self) -> &CurvePoint {
        &self.q_point
    }

    pub fn commitment(&self) -> &SecretCommitment {
        &self.commitment
    }

    pub fn threshold(&self) -> usize {
        self.threshold
    }

    pub fn roster(&self) -> &[RosterEntry] {
        &self.roster
    }

    pub fn cipher_suite_id(&self) -> &str {
        &self.cipher_suite_id
    }

    pub fn epoch(&self) -> u32 {
        self.epoch
    }

    /// Shares and scalars live modulo the prime subgroup order.
    pub fn scalar_field(&self) -> Result<Prime> {
        self.curve.subgroup_order().cloned().ok_or(ProtocolError::NoSubgroup)
    }

    pub fn x_of(&self, member: &MemberId) -> Result<&FieldElement> {
        self.roster
            .iter()
            .find(|e| &e.member_id == member)
            .map(|e| &e.x)
            .ok_or_else(|| ProtocolError::UnknownMember(member.clone()))
    }

    pub fn export(&self) -> GroupConfigExport {
        GroupConfigExport {
            curve_ref: self.curve_ref.clone(),
            p: ExportPoint::from_point(self.generator()),
            q: ExportPoint::from_point(&self.q_point),
            h_s: self.commitment.to_hex(),
            t: self.threshold,
            roster: self
                .roster
                .iter()
                .map(|e| ExportRosterEntry {
                    member_id: e.member_id.clone(),
                    x: e.x.to_string(),
                })
                .collect(),
            cipher_suite_id: self.cipher_suite_id.clone(),
            epoch: self.epoch,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.export()).expect("config serializes")
    }

    /// Rebuilds a config from its export. `curve` must match `curve_ref` and
    /// the exported `P`.
    pub fn import(export: &GroupConfigExport, curve: &CurveParams) -> Result<Self> {
        let bad = |what: &str| ProtocolError::BadConfig(what.to_string());
        if export.p.to_point(curve)? != *curve.generator() {
            return Err(bad("P does not match the curve generator"));
        }
        let field = curve.subgroup_order().cloned().ok_or(ProtocolError::NoSubgroup)?;
        let roster = export
            .roster
            .iter()
            .map(|e| {
                let x = BigUint::parse_bytes(e.x.as_bytes(), 10)
                    .filter(|x| x < field.value())
                    .ok_or_else(|| bad("roster x is not a reduced decimal"))?;
                Ok(RosterEntry {
                    member_id: e.member_id.clone(),
                    x: FieldElement::new(x, &field),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let config = GroupConfig {
            curve: curve.clone(),
            curve_ref: export.curve_ref.clone(),
            q_point: export.q.to_point(curve)?,
            commitment: SecretCommitment::from_hex(&export.h_s).ok_or_else(|| bad("H_s is not 32 hex bytes"))?,
            threshold: export.t,
            roster,
            cipher_suite_id: export.cipher_suite_id.clone(),
            epoch: export.epoch,
        };
        config.validate()?;
        Ok(config)
    }
}

fn curve_ref_for(curve: &CurveParams) -> String {
    for name in ["test2017", "secp160r1"] {
        if CurveParams::builtin(name).map(|b| &b == curve).unwrap_or(false) {
            return format!("builtin:{name}");
        }
    }
    "custom".to_string()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportPoint {
    pub x: String,
    pub y: String,
}

impl ExportPoint {
    fn from_point(point: &CurvePoint) -> Self {
        match point {
            CurvePoint::Affine { x, y } => ExportPoint {
                x: x.to_string(),
                y: y.to_string(),
            },
            CurvePoint::Infinity => ExportPoint {
                x: String::new(),
                y: String::new(),
            },
        }
    }

    fn to_point(&self, curve: &CurveParams) -> Result<CurvePoint> {
        let parse = |s: &str| {
            BigUint::parse_bytes(s.as_bytes(), 10)
                .ok_or_else(|| ProtocolError::BadConfig(format!("{s:?} is not a decimal coordinate")))
        };
        Ok(curve.point_from_biguints(parse(&self.x)?, parse(&self.y)?)?)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportRosterEntry {
    pub member_id: MemberId,
    pub x: String,
}

/// JSON form of a [`GroupConfig`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupConfigExport {
    pub curve_ref: String,
    #[serde(rename = "P")]
    pub p: ExportPoint,
    #[serde(rename = "Q")]
    pub q: ExportPoint,
    #[serde(rename = "H_s")]
    pub h_s: String,
    pub t: usize,
    pub roster: Vec<ExportRosterEntry>,
    pub cipher_suite_id: String,
    pub epoch: u32,
}

fn check_sizes(t: usize, n: usize, curve: &CurveParams) -> Result<Prime> {
    if t == 0 || t > n {
        return Err(ProtocolError::InvalidSize { t, n });
    }
    let order = curve.subgroup_order().cloned().ok_or(ProtocolError::NoSubgroup)?;
    if BigUint::from(n) >= *order.value() {
        return Err(ProtocolError::GroupTooLarge {
            n,
            order: order.value().clone(),
        });
    }
    Ok(order)
}

/// GM initialization for `n` members with the default roster `x_i = i`.
pub fn gm_init<R: RngCore + CryptoRng>(
    t: usize,
    n: usize,
    curve: &CurveParams,
    rng: &mut R,
) -> Result<(GroupConfig, Vec<Share>)> {
    let field = check_sizes(t, n, curve)?;
    let roster = default_roster(n, &field);
    let poly = sample_usable_polynomial(t, &roster, rng)?;
    gm_init_with(&poly, roster, curve, 0)
}

/// A share `y = 0` maps to the point at infinity and can never be broadcast,
/// so the polynomial is re-drawn until every roster share is nonzero.
fn sample_usable_polynomial<R: RngCore + CryptoRng>(
    t: usize,
    roster: &[RosterEntry],
    rng: &mut R,
) -> Result<SecretPolynomial> {
    let field = roster[0].x.modulus().clone();
    let ctx = OpCounter::disabled();
    loop {
        let secret = FieldElement::random(rng, &field);
        let poly = sample_polynomial(t, &secret, rng)?;
        let mut usable = true;
        for entry in roster {
            if poly.evaluate(&entry.x, &ctx)?.is_zero() {
                usable = false;
                break;
            }
        }
        if usable {
            return Ok(poly);
        }
    }
}

/// GM initialization from a chosen polynomial and roster.
pub fn gm_init_with(
    poly: &SecretPolynomial,
    roster: Vec<RosterEntry>,
    curve: &CurveParams,
    epoch: u32,
) -> Result<(GroupConfig, Vec<Share>)> {
    let field = check_sizes(poly.threshold(), roster.len(), curve)?;
    if poly.field() != &field {
        return Err(ProtocolError::BadConfig(
            "polynomial must be over the subgroup order".into(),
        ));
    }
    let shares = issue_shares(poly, &roster)?;
    let config = GroupConfig::new(curve, poly, roster, epoch, &OpCounter::disabled())?;
    Ok((config, shares))
}

/// `f(x_i)·P` together with the sender's identity.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PublicShare {
    pub member_id: MemberId,
    pub point: CurvePoint,
}

impl PublicShare {
    pub fn to_frame(&self, epoch: u32) -> Result<Frame> {
        Ok(Frame::new(
            MessageType::PublicShare,
            epoch,
            self.member_id.clone(),
            wire::encode_point(&self.point)?,
        ))
    }

    pub fn from_frame(frame: &Frame, curve: &CurveParams) -> Result<Self> {
        let point = wire::decode_point(frame.expect(MessageType::PublicShare)?, curve)?;
        Ok(PublicShare {
            member_id: frame.member_id.clone(),
            point,
        })
    }
}

/// The member's whole authentication computation: one scalar multiplication.
pub fn make_public_share(share: &Share, config: &GroupConfig, ctx: &OpCounter) -> Result<PublicShare> {
    let point = config.curve.scalar_mul_fe(&share.y, config.generator(), ctx)?;
    if point.is_infinity() {
        return Err(ProtocolError::InfinityShare(share.member_id.clone()));
    }
    Ok(PublicShare {
        member_id: share.member_id.clone(),
        point,
    })
}

/// Per-member confirmation result.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Verdicts {
    pub verdicts: Vec<(MemberId, bool)>,
}

impl Verdicts {
    /// Authentication completes only when every received share is valid.
    pub fn accepted(&self) -> bool {
        self.verdicts.iter().all(|(_, ok)| *ok)
    }

    pub fn culprits(&self) -> Vec<MemberId> {
        self.verdicts
            .iter()
            .filter(|(_, ok)| !ok)
            .map(|(id, _)| id.clone())
            .collect()
    }
}

/// Checks one received point against the GM's copy of the member's share.
pub fn gm_verify_one(
    config: &GroupConfig,
    gm_share: &Share,
    received: &PublicShare,
    ctx: &OpCounter,
) -> Result<bool> {
    let x = config.x_of(&received.member_id)?;
    if gm_share.member_id != received.member_id || &gm_share.x != x {
        return Err(ProtocolError::RosterMismatch(received.member_id.clone()));
    }
    if !config.curve.is_on_curve(&received.point) {
        return Ok(false);
    }
    let expected = config.curve.scalar_mul_fe(&gm_share.y, config.generator(), ctx)?;
    Ok(expected == received.point)
}

/// Centralized confirmation: the GM recomputes `f(x_i)·P` for each sender.
pub fn gm_verify(
    config: &GroupConfig,
    gm_shares: &[Share],
    received: &[PublicShare],
    ctx: &OpCounter,
) -> Result<Verdicts> {
    let by_id: BTreeMap<&MemberId, &Share> = gm_shares.iter().map(|s| (&s.member_id, s)).collect();
    let mut seen = HashSet::new();
    let mut verdicts = Vec::with_capacity(received.len());
    for ps in received {
        if !seen.insert(&ps.member_id) {
            return Err(ProtocolError::DuplicateMember(ps.member_id.clone()));
        }
        let share = by_id
            .get(&ps.member_id)
            .ok_or_else(|| ProtocolError::UnknownMember(ps.member_id.clone()))?;
        verdicts.push((ps.member_id.clone(), gm_verify_one(config, share, ps, ctx)?));
    }
    Ok(Verdicts { verdicts })
}

/// Incremental decentralized check of `sum_i L_i(0)·f(x_i)P = Q` for a fixed
/// participant set, absorbing public shares as they arrive.
#[derive(Debug, Clone)]
pub struct DecentralizedVerifier {
    config: GroupConfig,
    weights: BTreeMap<MemberId, FieldElement>,
    absorbed: BTreeSet<MemberId>,
    acc: CurvePoint,
}

impl DecentralizedVerifier {
    pub fn new(config: &GroupConfig, participants: &[MemberId], ctx: &OpCounter) -> Result<Self> {
        let t = config.threshold();
        if participants.len() < t {
            return Err(ProtocolError::BelowThreshold {
                m: participants.len(),
                t,
            });
        }
        let mut seen = HashSet::new();
        let mut xs = Vec::with_capacity(participants.len());
        for id in participants {
            if !seen.insert(id) {
                return Err(ProtocolError::DuplicateMember(id.clone()));
            }
            xs.push(config.x_of(id)?.clone());
        }
        let weights = participants
            .iter()
            .enumerate()
            .map(|(i, id)| Ok((id.clone(), lagrange_coeff_at_zero(i, &xs, ctx)?)))
            .collect::<Result<_>>()?;
        Ok(DecentralizedVerifier {
            config: config.clone(),
            weights,
            absorbed: BTreeSet::new(),
            acc: CurvePoint::Infinity,
        })
    }

    /// Adds `C_i = L_i(0)·(f(x_i)P)` to the running sum. Returns `Ok(false)` for a
    /// point that is not on the curve; such a share can never verify.
    pub fn absorb(&mut self, share: &PublicShare, ctx: &OpCounter) -> Result<bool> {
        let weight = self
            .weights
            .get(&share.member_id)
            .ok_or_else(|| ProtocolError::UnknownMember(share.member_id.clone()))?;
        if !self.absorbed.insert(share.member_id.clone()) {
            return Err(ProtocolError::DuplicateMember(share.member_id.clone()));
        }
        let curve = &self.config.curve;
        if !curve.is_on_curve(&share.point) {
            self.acc = CurvePoint::Infinity;
            self.weights.clear();
            return Ok(false);
        }
        let c_i = curve.scalar_mul_fe(weight, &share.point, ctx)?;
        self.acc = curve.add(&self.acc, &c_i, ctx)?;
        Ok(true)
    }

    pub fn is_complete(&self) -> bool {
        !self.weights.is_empty() && self.absorbed.len() == self.weights.len()
    }

    /// True iff every participant was absorbed and the sum equals `Q`.
    pub fn finish(&self) -> bool {
        self.is_complete() && self.acc == *self.config.q_point()
    }
}

/// Decentralized confirmation over exactly the received shares.
pub fn decentralized_verify(
    config: &GroupConfig,
    received: &[PublicShare],
    ctx: &OpCounter,
) -> Result<bool> {
    let ids: Vec<MemberId> = received.iter().map(|ps| ps.member_id.clone()).collect();
    let mut verifier = DecentralizedVerifier::new(config, &ids, ctx)?;
    for ps in received {
        if !verifier.absorb(ps, ctx)? {
            return Ok(false);
        }
    }
    Ok(verifier.finish())
}

/// 32-byte symmetric key. Never serialized; compares in constant time.
#[derive(Clone)]
pub struct SymmetricKey([u8; 32]);

impl SymmetricKey {
    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    fn cipher(&self) -> ChaCha20Poly1305 {
        ChaCha20Poly1305::new(Key::from_slice(&self.0))
    }
}

impl PartialEq for SymmetricKey {
    fn eq(&self, other: &Self) -> bool {
        self.0.ct_eq(&other.0).into()
    }
}

impl Eq for SymmetricKey {}

impl fmt::Debug for SymmetricKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SymmetricKey(..)")
    }
}

fn hash_prefixed(hasher: &mut Sha256, bytes: &[u8]) {
    hasher.update((bytes.len() as u32).to_be_bytes());
    hasher.update(bytes);
}

/// `SHA-256(label | x(S) | sorted id pair)` for a shared point `S`.
pub fn kdf_pairwise(shared: &CurvePoint, a: &MemberId, b: &MemberId) -> Option<SymmetricKey> {
    let x = shared.x()?;
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    let mut hasher = Sha256::new();
    hash_prefixed(&mut hasher, PAIRWISE_LABEL);
    hash_prefixed(&mut hasher, &x.to_bytes_be());
    hash_prefixed(&mut hasher, lo.as_bytes());
    hash_prefixed(&mut hasher, hi.as_bytes());
    Some(SymmetricKey(hasher.finalize().into()))
}

/// ECDH: `K = KDF(y_i·(y_j·P))`.
pub fn derive_pairwise_key(
    own: &Share,
    peer: &PublicShare,
    config: &GroupConfig,
    ctx: &OpCounter,
) -> Result<SymmetricKey> {
    if peer.point.is_infinity() {
        return Err(ProtocolError::InfinityShare(peer.member_id.clone()));
    }
    let shared = config.curve.scalar_mul_fe(&own.y, &peer.point, ctx)?;
    kdf_pairwise(&shared, &own.member_id, &peer.member_id)
        .ok_or_else(|| ProtocolError::InfinitySharedPoint(peer.member_id.clone()))
}

fn share_aad(epoch: u32, sender: &MemberId, recipient: &MemberId) -> Vec<u8> {
    let mut aad = Vec::new();
    aad.extend_from_slice(SHARE_AAD_LABEL);
    aad.extend_from_slice(&epoch.to_be_bytes());
    aad.push(sender.as_bytes().len() as u8);
    aad.extend_from_slice(sender.as_bytes());
    aad.push(recipient.as_bytes().len() as u8);
    aad.extend_from_slice(recipient.as_bytes());
    aad
}

fn seal<R: RngCore + CryptoRng>(key: &SymmetricKey, plaintext: &[u8], aad: &[u8], rng: &mut R) -> SealedPayload {
    let mut nonce = [0u8; NONCE_LEN];
    rng.fill_bytes(&mut nonce);
    let ciphertext = key
        .cipher()
        .encrypt(Nonce::from_slice(&nonce), Payload { msg: plaintext, aad })
        .expect("in-memory encryption");
    SealedPayload { nonce, ciphertext }
}

fn open(key: &SymmetricKey, sealed: &SealedPayload, aad: &[u8]) -> Option<Vec<u8>> {
    key.cipher()
        .decrypt(
            Nonce::from_slice(&sealed.nonce),
            Payload {
                msg: &sealed.ciphertext,
                aad,
            },
        )
        .ok()
}

/// `E_K[f(x_i)]` addressed to one peer. The recipient travels in the link
/// layer and is bound into the associated data.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncryptedShare {
    pub sender: MemberId,
    pub recipient: MemberId,
    pub epoch: u32,
    pub sealed: SealedPayload,
}

impl EncryptedShare {
    pub fn to_frame(&self) -> Result<Frame> {
        Ok(Frame::new(
            MessageType::EncryptedShare,
            self.epoch,
            self.sender.clone(),
            self.sealed.encode()?,
        ))
    }

    pub fn from_frame(frame: &Frame, recipient: &MemberId) -> Result<Self> {
        Ok(EncryptedShare {
            sender: frame.member_id.clone(),
            recipient: recipient.clone(),
            epoch: frame.epoch,
            sealed: SealedPayload::decode(frame.expect(MessageType::EncryptedShare)?)?,
        })
    }
}

/// One member's view of the protocol.
#[derive(Debug, Clone)]
pub struct MemberState {
    share: Share,
    config: GroupConfig,
    received_public_shares: BTreeMap<MemberId, PublicShare>,
    pairwise_keys: BTreeMap<MemberId, SymmetricKey>,
    peer_shares: BTreeMap<MemberId, Share>,
    group_key: Option<FieldElement>,
}

impl MemberState {
    pub fn new(share: Share, config: GroupConfig) -> Result<Self> {
        if config.x_of(&share.member_id)? != &share.x {
            return Err(ProtocolError::RosterMismatch(share.member_id.clone()));
        }
        Ok(MemberState {
            share,
            config,
            received_public_shares: BTreeMap::new(),
            pairwise_keys: BTreeMap::new(),
            peer_shares: BTreeMap::new(),
            group_key: None,
        })
    }

    pub fn member_id(&self) -> &MemberId {
        &self.share.member_id
    }

    pub fn share(&self) -> &Share {
        &self.share
    }

    pub fn config(&self) -> &GroupConfig {
        &self.config
    }

    pub fn group_key(&self) -> Option<&FieldElement> {
        self.group_key.as_ref()
    }

    pub fn pairwise_key(&self, peer: &MemberId) -> Option<&SymmetricKey> {
        self.pairwise_keys.get(peer)
    }

    pub fn make_public_share(&self, ctx: &OpCounter) -> Result<PublicShare> {
        make_public_share(&self.share, &self.config, ctx)
    }

    pub fn receive_public_share(&mut self, ps: PublicShare) -> Result<()> {
        self.config.x_of(&ps.member_id)?;
        if ps.member_id != self.share.member_id {
            self.received_public_shares.insert(ps.member_id.clone(), ps);
        }
        Ok(())
    }

    /// One ECDH per peer whose public share has been received.
    pub fn derive_keys(&mut self, ctx: &OpCounter) -> Result<()> {
        for (id, ps) in &self.received_public_shares {
            if !self.pairwise_keys.contains_key(id) {
                let key = derive_pairwise_key(&self.share, ps, &self.config, ctx)?;
                self.pairwise_keys.insert(id.clone(), key);
            }
        }
        Ok(())
    }

    pub fn encrypt_share_for<R: RngCore + CryptoRng>(
        &self,
        peer: &MemberId,
        rng: &mut R,
    ) -> Result<EncryptedShare> {
        let key = self
            .pairwise_keys
            .get(peer)
            .ok_or_else(|| ProtocolError::MissingKey(peer.clone()))?;
        let epoch = self.config.epoch;
        let aad = share_aad(epoch, &self.share.member_id, peer);
        Ok(EncryptedShare {
            sender: self.share.member_id.clone(),
            recipient: peer.clone(),
            epoch,
            sealed: seal(key, &self.share.y.to_bytes_be(), &aad, rng),
        })
    }

    /// Fresh-nonce ciphertexts for every peer with a derived key.
    pub fn outgoing_shares<R: RngCore + CryptoRng>(&self, rng: &mut R) -> Result<Vec<EncryptedShare>> {
        self.pairwise_keys
            .keys()
            .map(|peer| self.encrypt_share_for(peer, rng))
            .collect()
    }

    pub fn receive_encrypted_share(&mut self, msg: &EncryptedShare) -> Result<()> {
        if msg.recipient != self.share.member_id {
            return Err(ProtocolError::Misdelivered {
                recipient: msg.recipient.clone(),
                actual: self.share.member_id.clone(),
            });
        }
        if msg.epoch != self.config.epoch {
            return Err(ProtocolError::WrongEpoch {
                expected: self.config.epoch,
                got: msg.epoch,
            });
        }
        let key = self
            .pairwise_keys
            .get(&msg.sender)
            .ok_or_else(|| ProtocolError::MissingKey(msg.sender.clone()))?;
        let aad = share_aad(msg.epoch, &msg.sender, &msg.recipient);
        let tag_failure = || ProtocolError::TagFailure(msg.sender.clone());
        let plaintext = open(key, &msg.sealed, &aad).ok_or_else(tag_failure)?;
        let field = self.config.scalar_field()?;
        let y = FieldElement::from_bytes_be(&plaintext, &field).map_err(|_| tag_failure())?;
        let x = self.config.x_of(&msg.sender)?.clone();
        self.peer_shares.insert(
            msg.sender.clone(),
            Share {
                member_id: msg.sender.clone(),
                x,
                y,
            },
        );
        Ok(())
    }

    /// Interpolates over own plus received shares and accepts the result only
    /// if it matches `H(s)`.
    pub fn finish(&mut self, ctx: &OpCounter) -> Result<FieldElement> {
        let mut shares = vec![self.share.clone()];
        shares.extend(self.peer_shares.values().cloned());
        let candidate = reconstruct(&shares, self.config.threshold, ctx)?;
        if !verify_commitment(&candidate, &self.config.commitment) {
            return Err(ProtocolError::CommitmentMismatch);
        }
        self.group_key = Some(candidate.clone());
        Ok(candidate)
    }
}

/// Runs key agreement among `participants` (already confirmed). Every member
/// must recover the same committed secret.
pub fn run_key_agreement<R: RngCore + CryptoRng>(
    config: &GroupConfig,
    participants: &[Share],
    rng: &mut R,
) -> Result<BTreeMap<MemberId, FieldElement>> {
    if participants.len() < config.threshold() {
        return Err(ProtocolError::BelowThreshold {
            m: participants.len(),
            t: config.threshold(),
        });
    }
    let ctx = OpCounter::disabled();
    let mut members = participants
        .iter()
        .map(|s| MemberState::new(s.clone(), config.clone()))
        .collect::<Result<Vec<_>>>()?;
    let public = members
        .iter()
        .map(|m| m.make_public_share(&ctx))
        .collect::<Result<Vec<_>>>()?;
    for member in &mut members {
        for ps in &public {
            member.receive_public_share(ps.clone())?;
        }
        member.derive_keys(&ctx)?;
    }
    let mut outbox = Vec::new();
    for member in &members {
        outbox.extend(member.outgoing_shares(rng)?);
    }
    for member in &mut members {
        let own = member.member_id().clone();
        for msg in outbox.iter().filter(|msg| msg.recipient == own) {
            member.receive_encrypted_share(msg)?;
        }
    }
    members
        .iter_mut()
        .map(|m| Ok((m.member_id().clone(), m.finish(&ctx)?)))
        .collect()
}

/// A new share for one member, sealed under a key derived from the group key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RotatedShare {
    pub member_id: MemberId,
    pub epoch: u32,
    pub sealed: SealedPayload,
}

impl RotatedShare {
    pub fn to_frame(&self) -> Result<Frame> {
        Ok(Frame::new(
            MessageType::RotatedShare,
            self.epoch,
            self.member_id.clone(),
            self.sealed.encode()?,
        ))
    }
}

/// Output of a credential rotation.
#[derive(Debug, Clone)]
pub struct Rotation {
    pub config: GroupConfig,
    pub bundle: Vec<RotatedShare>,
    /// GM-side copy of the new shares, retained for centralized confirmation.
    pub gm_shares: Vec<Share>,
}

fn rotation_key(group_key: &FieldElement, member: &MemberId, epoch: u32) -> SymmetricKey {
    let mut hasher = Sha256::new();
    hash_prefixed(&mut hasher, ROTATE_LABEL);
    hash_prefixed(&mut hasher, &group_key.to_bytes_be());
    hash_prefixed(&mut hasher, member.as_bytes());
    hasher.update(epoch.to_be_bytes());
    SymmetricKey(hasher.finalize().into())
}

/// Issues a fresh polynomial to every roster member not in `exclude` and seals
/// each new share under a key derived from the current group key. The new
/// config has the next epoch.
pub fn rotate_credentials<R: RngCore + CryptoRng>(
    config: &GroupConfig,
    group_key: &FieldElement,
    exclude: &[MemberId],
    rng: &mut R,
) -> Result<Rotation> {
    let roster: Vec<RosterEntry> = config
        .roster
        .iter()
        .filter(|e| !exclude.contains(&e.member_id))
        .cloned()
        .collect();
    let t = config.threshold.min(roster.len());
    check_sizes(t, roster.len(), &config.curve)?;
    let poly = sample_usable_polynomial(t, &roster, rng)?;
    let epoch = config.epoch.wrapping_add(1);
    let (new_config, shares) = gm_init_with(&poly, roster, &config.curve, epoch)?;
    let bundle = shares
        .iter()
        .map(|share| {
            let key = rotation_key(group_key, &share.member_id, epoch);
            let mut plaintext = share.x.to_bytes_be();
            plaintext.extend_from_slice(&share.y.to_bytes_be());
            RotatedShare {
                member_id: share.member_id.clone(),
                epoch,
                sealed: seal(&key, &plaintext, &share_aad(epoch, &share.member_id, &share.member_id), rng),
            }
        })
        .collect();
    Ok(Rotation {
        config: new_config,
        bundle,
        gm_shares: shares,
    })
}

/// Member side of rotation: opens the member's entry of the bundle with the
/// group key it recovered in the previous epoch.
pub fn accept_rotation(
    member: &MemberId,
    group_key: &FieldElement,
    new_config: &GroupConfig,
    bundle: &[RotatedShare],
) -> Result<Share> {
    let entry = bundle
        .iter()
        .find(|r| &r.member_id == member)
        .ok_or_else(|| ProtocolError::UnknownMember(member.clone()))?;
    if entry.epoch != new_config.epoch {
        return Err(ProtocolError::WrongEpoch {
            expected: new_config.epoch,
            got: entry.epoch,
        });
    }
    let key = rotation_key(group_key, member, entry.epoch);
    let aad = share_aad(entry.epoch, member, member);
    let plaintext = open(&key, &entry.sealed, &aad).ok_or_else(|| ProtocolError::TagFailure(member.clone()))?;
    let field = new_config.scalar_field()?;
    let width = field.byte_len();
    if plaintext.len() != 2 * width {
        return Err(ProtocolError::TagFailure(member.clone()));
    }
    let x = FieldElement::from_bytes_be(&plaintext[..width], &field)?;
    let y = FieldElement::from_bytes_be(&plaintext[width..], &field)?;
    if new_config.x_of(member)? != &x {
        return Err(ProtocolError::RosterMismatch(member.clone()));
    }
    Ok(Share {
        member_id: member.clone(),
        x,
        y,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ec::brute_force_dlog;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn test_curve() -> CurveParams {
        CurveParams::builtin("test2017").unwrap()
    }

    fn rng(seed: u64) -> ChaCha20Rng {
        ChaCha20Rng::seed_from_u64(seed)
    }

    fn publics(config: &GroupConfig, shares: &[Share]) -> Vec<PublicShare> {
        let ctx = OpCounter::disabled();
        shares.iter().map(|s| make_public_share(s, config, &ctx).unwrap()).collect()
    }

    #[test]
    fn init_publishes_q_and_commitment() {
        let curve = test_curve();
        let (config, shares) = gm_init(3, 5, &curve, &mut rng(1)).unwrap();
        assert_eq!(shares.len(), 5);
        let ctx = OpCounter::disabled();
        let s = reconstruct(&shares[1..4], 3, &ctx).unwrap();
        assert_eq!(*config.q_point(), curve.scalar_mul_fe(&s, curve.generator(), &ctx).unwrap());
        assert!(verify_commitment(&s, config.commitment()));
        assert_eq!(config.curve_ref(), "builtin:test2017");
    }

    #[test]
    fn init_rejects_bad_sizes() {
        let curve = test_curve();
        assert!(matches!(gm_init(6, 5, &curve, &mut rng(1)), Err(ProtocolError::InvalidSize { .. })));
        assert!(matches!(gm_init(0, 5, &curve, &mut rng(1)), Err(ProtocolError::InvalidSize { .. })));
        assert!(matches!(gm_init(2, 37, &curve, &mut rng(1)), Err(ProtocolError::GroupTooLarge { .. })));
        assert!(gm_init(2, 36, &curve, &mut rng(1)).is_ok());
        let no_subgroup = CurveParams::new(
            Prime::from_u64(2017).unwrap(),
            6u8.into(),
            36u8.into(),
            (0u8.into(), 6u8.into()),
            None,
            None,
        )
        .unwrap();
        assert!(matches!(gm_init(1, 2, &no_subgroup, &mut rng(1)), Err(ProtocolError::NoSubgroup)));
    }

    #[test]
    fn threshold_one_means_every_share_is_the_secret() {
        let (config, shares) = gm_init(1, 4, &test_curve(), &mut rng(3)).unwrap();
        let ctx = OpCounter::disabled();
        for share in &shares {
            assert_eq!(make_public_share(share, &config, &ctx).unwrap().point, *config.q_point());
        }
    }

    #[test]
    fn public_share_is_one_scalar_mul_of_y() {
        let curve = test_curve();
        let field = curve.subgroup_order().unwrap().clone();
        let poly = SecretPolynomial::from_coefficients(vec![
            FieldElement::from_u64(5, &field),
            FieldElement::from_u64(3, &field),
        ])
        .unwrap();
        let (config, shares) = gm_init_with(&poly, default_roster(2, &field), &curve, 0).unwrap();
        assert_eq!(shares[0].y, FieldElement::from_u64(8, &field));
        let ctx = OpCounter::new();
        let ps = make_public_share(&shares[0], &config, &ctx).unwrap();
        assert_eq!(ctx.snapshot().scalar_muls, 1);
        let mut expected = CurvePoint::Infinity;
        for _ in 0..8 {
            expected = curve.add(&expected, curve.generator(), &OpCounter::disabled()).unwrap();
        }
        assert_eq!(ps.point, expected);
    }

    #[test]
    fn zero_share_is_rejected() {
        let curve = test_curve();
        let field = curve.subgroup_order().unwrap().clone();
        // f(x) = 36 + x vanishes at x = 1
        let poly = SecretPolynomial::from_coefficients(vec![
            FieldElement::from_u64(36, &field),
            FieldElement::from_u64(1, &field),
        ])
        .unwrap();
        let (config, shares) = gm_init_with(&poly, default_roster(3, &field), &curve, 0).unwrap();
        assert!(matches!(
            make_public_share(&shares[0], &config, &OpCounter::disabled()),
            Err(ProtocolError::InfinityShare(_))
        ));
    }

    #[test]
    fn centralized_verdicts() {
        let curve = test_curve();
        let (config, shares) = gm_init(3, 5, &curve, &mut rng(4)).unwrap();
        let mut received = publics(&config, &shares);
        let ctx = OpCounter::disabled();
        assert!(gm_verify(&config, &shares, &received, &ctx).unwrap().accepted());
        received[2].point = curve.point(1513, 246);
        let verdicts = gm_verify(&config, &shares, &received, &ctx).unwrap();
        assert!(!verdicts.accepted());
        assert_eq!(verdicts.culprits(), vec![received[2].member_id.clone()]);
        let mut stranger = received[0].clone();
        stranger.member_id = MemberId::new("X").unwrap();
        assert!(matches!(
            gm_verify(&config, &shares, &[stranger], &ctx),
            Err(ProtocolError::UnknownMember(_))
        ));
    }

    #[test]
    fn decentralized_over_and_at_threshold() {
        let curve = test_curve();
        let (config, shares) = gm_init(3, 6, &curve, &mut rng(5)).unwrap();
        let received = publics(&config, &shares);
        let ctx = OpCounter::disabled();
        assert!(decentralized_verify(&config, &received[..3], &ctx).unwrap());
        assert!(decentralized_verify(&config, &received[1..], &ctx).unwrap());
        assert!(matches!(
            decentralized_verify(&config, &received[..2], &ctx),
            Err(ProtocolError::BelowThreshold { m: 2, t: 3 })
        ));
        let mut corrupted = received.clone();
        corrupted[0].point = curve.add(&corrupted[0].point, curve.generator(), &ctx).unwrap();
        assert!(!decentralized_verify(&config, &corrupted, &ctx).unwrap());
    }

    #[test]
    fn pairwise_keys_are_symmetric_and_match_dlog_oracle() {
        let curve = test_curve();
        let (config, shares) = gm_init(2, 4, &curve, &mut rng(6)).unwrap();
        let public = publics(&config, &shares);
        let ctx = OpCounter::disabled();
        let k01 = derive_pairwise_key(&shares[0], &public[1], &config, &ctx).unwrap();
        let k10 = derive_pairwise_key(&shares[1], &public[0], &config, &ctx).unwrap();
        assert_eq!(k01, k10);
        // recover y_1 from its public point by exhaustive search
        let y1 = brute_force_dlog(&curve, curve.generator(), &public[1].point, 37).unwrap().scalar.unwrap();
        let shared = curve.scalar_mul(&y1, &public[0].point, &ctx).unwrap();
        assert_eq!(kdf_pairwise(&shared, &shares[0].member_id, &shares[1].member_id).unwrap(), k01);
        let naive = curve.add(&public[0].point, &public[1].point, &ctx).unwrap();
        if let Some(k) = kdf_pairwise(&naive, &shares[0].member_id, &shares[1].member_id) {
            assert_ne!(k, k01);
        }
    }

    #[test]
    fn honest_key_agreement_recovers_secret() {
        let curve = test_curve();
        let mut r = rng(7);
        let (config, shares) = gm_init(3, 5, &curve, &mut r).unwrap();
        let keys = run_key_agreement(&config, &shares[..3], &mut r).unwrap();
        let ctx = OpCounter::disabled();
        let s = reconstruct(&shares, 3, &ctx).unwrap();
        assert_eq!(keys.len(), 3);
        assert!(keys.values().all(|k| *k == s));
        assert!(matches!(
            run_key_agreement(&config, &shares[..2], &mut r),
            Err(ProtocolError::BelowThreshold { .. })
        ));
    }

    #[test]
    fn garbage_ciphertext_names_sender() {
        let curve = test_curve();
        let mut r = rng(8);
        let (config, shares) = gm_init(2, 3, &curve, &mut r).unwrap();
        let ctx = OpCounter::disabled();
        let public = publics(&config, &shares);
        let mut a = MemberState::new(shares[0].clone(), config.clone()).unwrap();
        let mut b = MemberState::new(shares[1].clone(), config.clone()).unwrap();
        a.receive_public_share(public[1].clone()).unwrap();
        b.receive_public_share(public[0].clone()).unwrap();
        a.derive_keys(&ctx).unwrap();
        b.derive_keys(&ctx).unwrap();
        let mut msg = b.encrypt_share_for(a.member_id(), &mut r).unwrap();
        msg.sealed.ciphertext[0] ^= 1;
        match a.receive_encrypted_share(&msg) {
            Err(ProtocolError::TagFailure(id)) => assert_eq!(&id, b.member_id()),
            other => panic!("expected tag failure, got {other:?}"),
        }
        assert!(matches!(a.finish(&ctx), Err(ProtocolError::Sss(SssError::BelowThreshold { .. }))));
        assert!(a.group_key().is_none());
    }

    #[test]
    fn encrypted_share_frame_round_trip() {
        let curve = test_curve();
        let mut r = rng(9);
        let (config, shares) = gm_init(2, 2, &curve, &mut r).unwrap();
        let ctx = OpCounter::disabled();
        let public = publics(&config, &shares);
        let mut a = MemberState::new(shares[0].clone(), config.clone()).unwrap();
        a.receive_public_share(public[1].clone()).unwrap();
        a.derive_keys(&ctx).unwrap();
        let msg = a.encrypt_share_for(&shares[1].member_id, &mut r).unwrap();
        let frame = Frame::decode(&msg.to_frame().unwrap().encode()).unwrap();
        assert_eq!(EncryptedShare::from_frame(&frame, &shares[1].member_id).unwrap(), msg);
    }

    #[test]
    fn rotation_invalidates_old_shares() {
        let curve = test_curve();
        let mut r = rng(10);
        let (config, shares) = gm_init(2, 4, &curve, &mut r).unwrap();
        let old_public = publics(&config, &shares);
        let s = run_key_agreement(&config, &shares, &mut r).unwrap()[&shares[0].member_id].clone();
        let rotation = rotate_credentials(&config, &s, &[], &mut r).unwrap();
        assert_eq!(rotation.config.epoch(), 1);
        let ctx = OpCounter::disabled();
        let verdicts = gm_verify(&rotation.config, &rotation.gm_shares, &old_public, &ctx).unwrap();
        assert!(verdicts.verdicts.iter().all(|(_, ok)| !ok));
        let new_share = accept_rotation(&shares[0].member_id, &s, &rotation.config, &rotation.bundle).unwrap();
        assert_eq!(new_share, rotation.gm_shares[0]);
        let wrong_key = s.add(&FieldElement::one(s.modulus())).unwrap();
        assert!(matches!(
            accept_rotation(&shares[0].member_id, &wrong_key, &rotation.config, &rotation.bundle),
            Err(ProtocolError::TagFailure(_))
        ));
    }

    #[test]
    fn rotation_is_deterministic_and_can_exclude() {
        let curve = test_curve();
        let (config, shares) = gm_init(2, 4, &curve, &mut rng(11)).unwrap();
        let s = reconstruct(&shares, 2, &OpCounter::disabled()).unwrap();
        let a = rotate_credentials(&config, &s, &[], &mut rng(12)).unwrap();
        let b = rotate_credentials(&config, &s, &[], &mut rng(12)).unwrap();
        assert_eq!(a.config, b.config);
        let excluded = shares[3].member_id.clone();
        let c = rotate_credentials(&config, &s, &[excluded.clone()], &mut rng(12)).unwrap();
        assert_eq!(c.config.roster().len(), 3);
        assert!(accept_rotation(&excluded, &s, &c.config, &c.bundle).is_err());
    }

    #[test]
    fn config_json_round_trip() {
        let curve = test_curve();
        let (config, _) = gm_init(2, 3, &curve, &mut rng(13)).unwrap();
        let json = config.to_json();
        let value: serde_json::Value = serde_json::from_str(&json).unwrap();
        for key in ["curve_ref", "P", "Q", "H_s", "t", "roster", "cipher_suite_id", "epoch"] {
            assert!(value.get(key).is_some(), "missing {key}");
        }
        let export: GroupConfigExport = serde_json::from_str(&json).unwrap();
        assert_eq!(GroupConfig::import(&export, &curve).unwrap(), config);
        let mut bad = export.clone();
        bad.t = 9;
        assert!(GroupConfig::import(&bad, &curve).is_err());
    }
}
