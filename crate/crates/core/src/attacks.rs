//! Adversary scenarios. Each returns findings pairing the expected outcome
//! with the observed one; `matched` is true when they agree.

use std::collections::BTreeMap;

use num_bigint::BigUint;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::ec::{brute_force_dlog, CurveParams};
use crate::field::{FieldElement, OpCounter, Prime};
use crate::harn::{harn_coefficient, harn_init, harn_release, HarnGroup, Released};
use crate::protocol::{
    accept_rotation, gm_init, gm_verify, kdf_pairwise, make_public_share, rotate_credentials,
    run_key_agreement, EncryptedShare, GroupConfig, MemberState, ProtocolError, PublicShare,
};
use crate::sim::{self, FailureReason, Outcome, Scenario, Schedule, SimScheme};
use crate::sss::{reconstruct, MemberId, Share, SssError};
use crate::wire::{self, Frame, MessageType};

pub const SCENARIOS: [&str; 5] = ["replay", "dos-invalid-share", "node-compromise", "eavesdrop", "flooding"];

#[derive(Debug, Error)]
pub enum AttackError {
    #[error("unknown scenario {0:?}; valid names: {}", SCENARIOS.join(", "))]
    UnknownScenario(String),
    #[error("adversary script: {0}")]
    Script(String),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Curve(#[from] crate::ec::EcError),
    #[error(transparent)]
    Harn(#[from] crate::harn::HarnError),
    #[error(transparent)]
    Sim(#[from] sim::SimError),
    #[error(transparent)]
    Wire(#[from] wire::WireError),
}

pub type Result<T> = std::result::Result<T, AttackError>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Capability {
    Eavesdrop,
    Inject,
    Replay,
    Compromise(MemberId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProtocolStep {
    Confirmation,
    KeyAgreement,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Action {
    Observe(ProtocolStep),
    InjectRandomPoint { as_member: MemberId },
    ReplayPublicShare { member: MemberId, from_epoch: u32 },
    UseShareOf(MemberId),
}

/// What the adversary may do and the ordered actions it takes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdversaryScript {
    pub capability: Capability,
    pub actions: Vec<Action>,
}

impl AdversaryScript {
    /// Every action must be within the capability.
    pub fn validate(&self) -> Result<()> {
        for action in &self.actions {
            let allowed = match (&self.capability, action) {
                (_, Action::Observe(_)) => true,
                (Capability::Inject, Action::InjectRandomPoint { .. }) => true,
                (Capability::Replay, Action::ReplayPublicShare { .. }) => true,
                (Capability::Compromise(victim), Action::UseShareOf(id)) => victim == id,
                (Capability::Compromise(_), Action::InjectRandomPoint { .. } | Action::ReplayPublicShare { .. }) => true,
                _ => false,
            };
            if !allowed {
                return Err(AttackError::Script(format!(
                    "{action:?} exceeds capability {:?}",
                    self.capability
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub check: String,
    pub expected: String,
    pub observed: String,
    pub matched: bool,
}

impl Finding {
    fn boolean(check: &str, expected: bool, observed: bool) -> Self {
        Finding {
            check: check.to_string(),
            expected: expected.to_string(),
            observed: observed.to_string(),
            matched: expected == observed,
        }
    }

    fn text(check: &str, expected: impl ToString, observed: impl ToString) -> Self {
        let (expected, observed) = (expected.to_string(), observed.to_string());
        Finding {
            check: check.to_string(),
            matched: expected == observed,
            expected,
            observed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackReport {
    pub scenario: String,
    pub findings: Vec<Finding>,
    pub all_matched: bool,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub metrics: BTreeMap<String, serde_json::Value>,
}

impl AttackReport {
    fn new(scenario: &str, findings: Vec<Finding>) -> Self {
        AttackReport {
            scenario: scenario.to_string(),
            all_matched: findings.iter().all(|f| f.matched),
            findings,
            metrics: BTreeMap::new(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Shared knobs for the CLI-facing scenarios.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackOptions {
    pub curve: CurveParams,
    pub seed: u64,
    pub t: usize,
    pub n: usize,
    pub rotate: bool,
    pub centralized: bool,
    pub attackers: usize,
    pub queue_capacity: usize,
}

impl AttackOptions {
    pub fn new(seed: u64) -> Self {
        AttackOptions {
            curve: CurveParams::builtin("secp160r1").expect("builtin curve"),
            seed,
            t: 3,
            n: 5,
            rotate: false,
            centralized: false,
            attackers: 1,
            queue_capacity: 4,
        }
    }
}

pub fn run_scenario(name: &str, opts: &AttackOptions) -> Result<AttackReport> {
    match name {
        "replay" => replay_attack(opts),
        "dos-invalid-share" => dos_invalid_share(opts),
        "node-compromise" => node_compromise(opts),
        "eavesdrop" => eavesdrop_secrecy_check(opts),
        "flooding" => flooding(opts),
        other => Err(AttackError::UnknownScenario(other.to_string())),
    }
}

fn publics(config: &GroupConfig, shares: &[Share]) -> Result<Vec<PublicShare>> {
    let ctx = OpCounter::disabled();
    Ok(shares
        .iter()
        .map(|s| make_public_share(s, config, &ctx))
        .collect::<std::result::Result<_, _>>()?)
}

/// Outcome of an impostor taking part in key agreement without the share
/// behind the public point it claims.
struct ImpostorResult {
    honest_rejections: usize,
    impostor_decryptions: usize,
    honest_keys_agree: bool,
}

/// The impostor claims `victim`'s public point but only knows public values.
/// It guesses pairwise keys from `f(x_i)P + f(x_j)P`, which is all it can form.
fn impostor_key_agreement(
    config: &GroupConfig,
    honest: &[Share],
    victim_public: &PublicShare,
    rng: &mut ChaCha20Rng,
) -> Result<ImpostorResult> {
    let ctx = OpCounter::disabled();
    let curve = config.curve();
    let mut members = honest
        .iter()
        .map(|s| MemberState::new(s.clone(), config.clone()))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let honest_publics = publics(config, honest)?;
    for member in &mut members {
        for ps in honest_publics.iter().chain(std::iter::once(victim_public)) {
            member.receive_public_share(ps.clone())?;
        }
        member.derive_keys(&ctx)?;
    }
    let victim = &victim_public.member_id;
    let field = config.scalar_field()?;
    let mut honest_rejections = 0;
    let mut impostor_decryptions = 0;
    for (member, ps) in members.iter_mut().zip(&honest_publics) {
        let guess_point = curve.add(&ps.point, &victim_public.point, &ctx)?;
        let guess = kdf_pairwise(&guess_point, victim, &ps.member_id);
        // the impostor's ciphertext under its guessed key
        let forged = forge_with_guess(guess.as_ref(), config, victim, &ps.member_id, &field, rng);
        match member.receive_encrypted_share(&forged) {
            Err(ProtocolError::TagFailure(id)) if &id == victim => honest_rejections += 1,
            Err(ProtocolError::TagFailure(_)) | Ok(()) => {}
            Err(e) => return Err(e.into()),
        }
        // an honest ciphertext addressed to the victim, tried with the guess
        let outgoing = member.encrypt_share_for(victim, rng)?;
        if guess.is_some_and(|g| try_open(&g, &outgoing)) {
            impostor_decryptions += 1;
        }
    }
    // honest members still exchange among themselves
    let mut outbox = Vec::new();
    for member in &members {
        for peer in honest.iter().map(|s| &s.member_id).filter(|id| *id != member.member_id()) {
            outbox.push(member.encrypt_share_for(peer, rng)?);
        }
    }
    let mut keys = Vec::new();
    for member in &mut members {
        let own = member.member_id().clone();
        for msg in outbox.iter().filter(|m| m.recipient == own) {
            member.receive_encrypted_share(msg)?;
        }
        keys.push(member.finish(&ctx).ok());
    }
    let honest_keys_agree = keys.iter().all(|k| k.is_some() && *k == keys[0]);
    Ok(ImpostorResult {
        honest_rejections,
        impostor_decryptions,
        honest_keys_agree,
    })
}

fn forge_with_guess(
    guess: Option<&crate::protocol::SymmetricKey>,
    config: &GroupConfig,
    sender: &MemberId,
    recipient: &MemberId,
    field: &Prime,
    rng: &mut ChaCha20Rng,
) -> EncryptedShare {
    use chacha20poly1305::aead::{Aead, KeyInit, Payload};
    use chacha20poly1305::{ChaCha20Poly1305, Key, Nonce};
    use rand::RngCore;
    let mut nonce = [0u8; wire::NONCE_LEN];
    rng.fill_bytes(&mut nonce);
    let fake_y = FieldElement::random(rng, field).to_bytes_be();
    let key_bytes = guess.map(|g| *g.as_bytes()).unwrap_or([0u8; 32]);
    let mut aad = b"gas/share/v1".to_vec();
    aad.extend_from_slice(&config.epoch().to_be_bytes());
    aad.push(sender.as_bytes().len() as u8);
    aad.extend_from_slice(sender.as_bytes());
    aad.push(recipient.as_bytes().len() as u8);
    aad.extend_from_slice(recipient.as_bytes());
    let ciphertext = ChaCha20Poly1305::new(Key::from_slice(&key_bytes))
        .encrypt(Nonce::from_slice(&nonce), Payload { msg: &fake_y, aad: &aad })
        .expect("in-memory encryption");
    EncryptedShare {
        sender: sender.clone(),
        recipient: recipient.clone(),
        epoch: config.epoch(),
        sealed: wire::SealedPayload { nonce, ciphertext },
    }
}

fn try_open(key: &crate::protocol::SymmetricKey, msg: &EncryptedShare) -> bool {
    use chacha20poly1305::aead::{Aead, KeyInit, Payload};
    use chacha20poly1305::{ChaCha20Poly1305, Key, Nonce};
    let mut aad = b"gas/share/v1".to_vec();
    aad.extend_from_slice(&msg.epoch.to_be_bytes());
    aad.push(msg.sender.as_bytes().len() as u8);
    aad.extend_from_slice(msg.sender.as_bytes());
    aad.push(msg.recipient.as_bytes().len() as u8);
    aad.extend_from_slice(msg.recipient.as_bytes());
    ChaCha20Poly1305::new(Key::from_slice(key.as_bytes()))
        .decrypt(
            Nonce::from_slice(&msg.sealed.nonce),
            Payload {
                msg: &msg.sealed.ciphertext,
                aad: &aad,
            },
        )
        .is_ok()
}

/// Replays a recorded public share in a later session, with or without a
/// credential rotation in between.
pub fn replay_attack(opts: &AttackOptions) -> Result<AttackReport> {
    let script = AdversaryScript {
        capability: Capability::Replay,
        actions: vec![
            Action::Observe(ProtocolStep::Confirmation),
            Action::ReplayPublicShare {
                member: MemberId::indexed(opts.n, opts.n),
                from_epoch: 0,
            },
        ],
    };
    script.validate()?;
    let mut rng = ChaCha20Rng::seed_from_u64(opts.seed);
    let ctx = OpCounter::disabled();
    let (config, shares) = gm_init(opts.t, opts.n, &opts.curve, &mut rng)?;
    // epoch 0: the eavesdropper records every public share frame
    let recorded: Vec<Vec<u8>> = publics(&config, &shares)?
        .iter()
        .map(|ps| ps.to_frame(config.epoch()).map(|f| f.encode()))
        .collect::<std::result::Result<_, _>>()?;
    let group_key = run_key_agreement(&config, &shares, &mut rng)?
        .into_values()
        .next()
        .expect("at least one member");

    let (target_config, target_shares) = if opts.rotate {
        let rotation = rotate_credentials(&config, &group_key, &[], &mut rng)?;
        let accepted = rotation
            .gm_shares
            .iter()
            .map(|s| accept_rotation(&s.member_id, &group_key, &rotation.config, &rotation.bundle))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        (rotation.config, accepted)
    } else {
        (config.clone(), shares.clone())
    };

    let victim_index = opts.n - 1;
    let mut replayed_frame = Frame::decode(recorded.last().expect("recorded frames"))?;
    replayed_frame.epoch = target_config.epoch();
    let replayed = PublicShare::from_frame(&replayed_frame, &opts.curve)?;
    let honest = &target_shares[..victim_index];
    let mut received = publics(&target_config, honest)?;
    received.push(replayed.clone());
    let verdicts = gm_verify(&target_config, &target_shares, &received, &ctx)?;
    let replay_accepted = verdicts.verdicts.last().map(|(_, ok)| *ok).unwrap_or(false);

    let mut findings = vec![Finding::boolean(
        "confirmation accepts replayed public share",
        !opts.rotate,
        replay_accepted,
    )];
    if replay_accepted {
        let result = impostor_key_agreement(&target_config, honest, &replayed, &mut rng)?;
        findings.push(Finding::text(
            "honest members reject the impostor's ciphertexts",
            honest.len(),
            result.honest_rejections,
        ));
        findings.push(Finding::text(
            "impostor decrypts honest ciphertexts",
            0,
            result.impostor_decryptions,
        ));
        findings.push(Finding::boolean(
            "honest members still agree on the group key",
            honest.len() >= opts.t,
            result.honest_keys_agree,
        ));
    } else {
        findings.push(Finding::boolean("key agreement reached by replayed share", false, false));
    }

    let mut random_point = received.clone();
    let k = BigUint::from(123_456_789u64);
    random_point.last_mut().expect("victim").point = opts.curve.scalar_mul(&k, opts.curve.generator(), &ctx)?;
    let random_verdicts = gm_verify(&target_config, &target_shares, &random_point, &ctx)?;
    findings.push(Finding::boolean(
        "confirmation accepts attacker-generated point",
        false,
        random_verdicts.verdicts.last().map(|(_, ok)| *ok).unwrap_or(true),
    ));
    let mut report = AttackReport::new("replay", findings);
    report.metrics.insert("rotated".into(), json!(opts.rotate));
    report.metrics.insert("epoch".into(), json!(target_config.epoch()));
    Ok(report)
}

fn dos_scenario(opts: &AttackOptions, centralized: bool, m: usize) -> Scenario {
    let scheme = if centralized {
        SimScheme::ProposedCentralized
    } else {
        SimScheme::ProposedDecentralized
    };
    let mut sc = Scenario::new(scheme, m, opts.t.min(m));
    sc.attackers = opts.attackers.min(m);
    sc.seed = opts.seed;
    sc.curve = curve_ref(&opts.curve);
    sc
}

fn curve_ref(curve: &CurveParams) -> String {
    for name in ["test2017", "secp160r1"] {
        if CurveParams::builtin(name).map(|b| &b == curve).unwrap_or(false) {
            return format!("builtin:{name}");
        }
    }
    "builtin:secp160r1".to_string()
}

/// Members submitting invalid public shares.
pub fn dos_invalid_share(opts: &AttackOptions) -> Result<AttackReport> {
    let m = opts.n;
    let sc = dos_scenario(opts, opts.centralized, m);
    let report = sim::run(&sc)?;
    let attackers: Vec<MemberId> = (m + 1 - sc.attackers..=m).map(|i| MemberId::indexed(i, m)).collect();
    let mut findings = Vec::new();
    let expected = if sc.attackers == 0 {
        Outcome::Authenticated
    } else if !opts.centralized {
        Outcome::Failed(FailureReason::DenialOfAuthentication)
    } else if m - sc.attackers >= sc.t {
        Outcome::Authenticated
    } else {
        Outcome::Failed(FailureReason::BelowThreshold)
    };
    findings.push(Finding::text(
        "outcome",
        format!("{expected:?}"),
        format!("{:?}", report.outcome),
    ));
    if opts.centralized {
        findings.push(Finding::text(
            "culprits identified",
            format!("{attackers:?}"),
            format!("{:?}", report.excluded),
        ));
    }
    let mut out = AttackReport::new("dos-invalid-share", findings);
    out.metrics.insert("mode".into(), json!(if opts.centralized { "centralized" } else { "decentralized" }));
    out.metrics.insert("rounds".into(), json!(report.rounds));
    out.metrics.insert("auth_time_s".into(), json!(report.auth_time_s));
    Ok(out)
}

/// Counts of an exhaustive search over all polynomials consistent with
/// `t - 1` known shares.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThresholdEnumeration {
    pub q: u64,
    pub t: usize,
    pub known_shares: usize,
    /// Candidate secrets with at least one consistent polynomial of degree <= t-1.
    pub consistent_any_degree: u64,
    pub min_completions: u64,
    pub max_completions: u64,
    /// Candidate secrets consistent with a polynomial of exact degree t-1.
    pub consistent_exact_degree: u64,
    /// Values at a fresh x consistent with the known shares.
    pub fresh_point_values: u64,
}

/// Enumerates all `q^t` polynomials over `F_q` (`q <= 257`, `t <= 3`) and counts
/// how many pass through the shares `(1, y_1), ..., (t-1, y_{t-1})`.
pub fn threshold_enumeration(q: u64, t: usize, known: &[u64]) -> ThresholdEnumeration {
    assert!(q <= 257 && (1..=3).contains(&t) && known.len() == t - 1, "small parameters only");
    let eval = |coeffs: &[u64], x: u64| coeffs.iter().rev().fold(0u64, |acc, c| (acc * x + c) % q);
    let mut per_secret = vec![0u64; q as usize];
    let mut exact = vec![false; q as usize];
    let mut fresh = vec![false; q as usize];
    let fresh_x = t as u64;
    let total = q.pow(t as u32);
    let mut coeffs = vec![0u64; t];
    for index in 0..total {
        let mut rest = index;
        for c in coeffs.iter_mut() {
            *c = rest % q;
            rest /= q;
        }
        let consistent = known
            .iter()
            .enumerate()
            .all(|(i, &y)| eval(&coeffs, i as u64 + 1) == y % q);
        if consistent {
            per_secret[coeffs[0] as usize] += 1;
            if coeffs[t - 1] != 0 || t == 1 {
                exact[coeffs[0] as usize] = true;
            }
            fresh[eval(&coeffs, fresh_x) as usize] = true;
        }
    }
    ThresholdEnumeration {
        q,
        t,
        known_shares: t - 1,
        consistent_any_degree: per_secret.iter().filter(|&&c| c > 0).count() as u64,
        min_completions: *per_secret.iter().min().expect("q > 0"),
        max_completions: *per_secret.iter().max().expect("q > 0"),
        consistent_exact_degree: exact.iter().filter(|&&e| e).count() as u64,
        fresh_point_values: fresh.iter().filter(|&&f| f).count() as u64,
    }
}

/// An attacker holding one member's share.
pub fn node_compromise(opts: &AttackOptions) -> Result<AttackReport> {
    let victim = MemberId::indexed(2.min(opts.n), opts.n);
    let script = AdversaryScript {
        capability: Capability::Compromise(victim.clone()),
        actions: vec![Action::UseShareOf(victim.clone())],
    };
    script.validate()?;
    let mut rng = ChaCha20Rng::seed_from_u64(opts.seed);
    let ctx = OpCounter::disabled();
    let (config, shares) = gm_init(opts.t, opts.n, &opts.curve, &mut rng)?;
    let stolen = shares.iter().find(|s| s.member_id == victim).expect("victim in roster").clone();

    // the attacker runs the victim's code path with the stolen share
    let attacker = MemberState::new(stolen.clone(), config.clone())?;
    let mut received = publics(&config, &shares)?;
    let forged = attacker.make_public_share(&ctx)?;
    for ps in received.iter_mut().filter(|ps| ps.member_id == victim) {
        *ps = forged.clone();
    }
    let confirmed = gm_verify(&config, &shares, &received, &ctx)?.accepted();
    let keys = run_key_agreement(&config, &shares, &mut rng)?;
    let s = reconstruct(&shares, opts.t, &ctx).map_err(ProtocolError::from)?;
    let attacker_has_key = keys.get(&victim) == Some(&s);

    let mut findings = vec![
        Finding::boolean("impersonation passes confirmation", true, confirmed),
        Finding::boolean("impersonator recovers the group key", true, attacker_has_key),
    ];

    if opts.n > opts.t {
        let rotation = rotate_credentials(&config, &s, std::slice::from_ref(&victim), &mut rng)?;
        let replayed_after = gm_verify(&rotation.config, &rotation.gm_shares, std::slice::from_ref(&forged), &ctx);
        let rejected = !matches!(replayed_after, Ok(ref v) if v.accepted());
        findings.push(Finding::boolean("impersonation rejected after rotation excluding victim", true, rejected));
        let opened = accept_rotation(&victim, &s, &rotation.config, &rotation.bundle).is_ok();
        findings.push(Finding::boolean("excluded victim obtains a new share", false, opened));
    }

    let enumeration = threshold_enumeration(17, 3, &[5, 11]);
    findings.push(Finding::text(
        "t-1 shares leave every secret consistent (degree <= t-1)",
        enumeration.q,
        enumeration.consistent_any_degree,
    ));
    findings.push(Finding::text(
        "t-1 shares leave every fresh share value consistent",
        enumeration.q,
        enumeration.fresh_point_values,
    ));
    let below = reconstruct(&shares[..opts.t - 1], opts.t, &ctx);
    findings.push(Finding::boolean(
        "reconstruction from t-1 shares is rejected",
        true,
        matches!(below, Err(SssError::BelowThreshold { .. })),
    ));
    let mut report = AttackReport::new("node-compromise", findings);
    report.metrics.insert("victim".into(), json!(victim.as_str()));
    report.metrics.insert("enumeration".into(), serde_json::to_value(&enumeration).expect("plain data"));
    Ok(report)
}

/// Every frame an eavesdropper sees, in order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Transcript {
    pub frames: Vec<Vec<u8>>,
}

impl Transcript {
    fn push(&mut self, frame: Frame) {
        self.frames.push(frame.encode());
    }

    pub fn total_bytes(&self) -> usize {
        self.frames.iter().map(Vec::len).sum()
    }
}

/// Byte strings that must never appear on the wire.
#[derive(Debug, Clone, Default)]
pub struct SecretMaterial {
    pub items: Vec<(String, Vec<u8>)>,
}

/// Runs confirmation and key agreement and records the public transcript.
/// `leak_raw_shares` adds a frame carrying each member's share in the clear,
/// as a deliberately broken build would.
pub fn record_proposed_run(
    curve: &CurveParams,
    t: usize,
    n: usize,
    seed: u64,
    leak_raw_shares: bool,
) -> Result<(Transcript, SecretMaterial)> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let ctx = OpCounter::disabled();
    let (config, shares) = gm_init(t, n, curve, &mut rng)?;
    let mut transcript = Transcript::default();
    let mut secrets = SecretMaterial::default();
    let mut members = shares
        .iter()
        .map(|s| MemberState::new(s.clone(), config.clone()))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let public = publics(&config, &shares)?;
    for ps in &public {
        transcript.push(ps.to_frame(config.epoch())?);
    }
    if leak_raw_shares {
        for share in &shares {
            transcript.push(Frame::new(
                MessageType::PublicShare,
                config.epoch(),
                share.member_id.clone(),
                wire::encode_scalar(&share.y)?,
            ));
        }
    }
    for member in &mut members {
        for ps in &public {
            member.receive_public_share(ps.clone())?;
        }
        member.derive_keys(&ctx)?;
    }
    let mut outbox = Vec::new();
    for member in &members {
        outbox.extend(member.outgoing_shares(&mut rng)?);
    }
    for msg in &outbox {
        transcript.push(msg.to_frame()?);
    }
    for member in &mut members {
        let own = member.member_id().clone();
        for msg in outbox.iter().filter(|m| m.recipient == own) {
            member.receive_encrypted_share(msg)?;
        }
        member.finish(&ctx)?;
    }
    for (share, member) in shares.iter().zip(&members) {
        secrets.items.push((format!("f(x) of {}", share.member_id), share.y.to_bytes_be()));
        for peer in &shares {
            if let Some(key) = member.pairwise_key(&peer.member_id) {
                secrets.items.push((
                    format!("pairwise key {}-{}", share.member_id, peer.member_id),
                    key.as_bytes().to_vec(),
                ));
            }
        }
    }
    let s = members[0].group_key().expect("finished").clone();
    secrets.items.push(("group secret s".to_string(), s.to_bytes_be()));
    Ok((transcript, secrets))
}

/// Labels of every secret found verbatim in any frame.
pub fn secrecy_scan(transcript: &Transcript, secrets: &SecretMaterial) -> Vec<String> {
    secrets
        .items
        .iter()
        .filter(|(_, bytes)| {
            !bytes.is_empty()
                && transcript
                    .frames
                    .iter()
                    .any(|frame| frame.windows(bytes.len()).any(|w| w == bytes.as_slice()))
        })
        .map(|(label, _)| label.clone())
        .collect()
}

/// Mean number of group additions a brute-force search needs to recover `k`
/// from `kG`, over every `k` in a subgroup of the given order on `test2017`.
pub fn dlog_cost_growth() -> Result<Vec<(u64, f64)>> {
    let curve = CurveParams::builtin("test2017")?;
    let ctx = OpCounter::disabled();
    let base = curve.point(0, 6);
    let mut out = Vec::new();
    for (order, cofactor) in [(5u64, 407u64), (11, 185), (37, 55)] {
        let g = curve.scalar_mul(&BigUint::from(cofactor), &base, &ctx)?;
        let mut steps = 0u64;
        for k in 1..order {
            let target = curve.scalar_mul(&BigUint::from(k), &g, &ctx)?;
            let found = brute_force_dlog(&curve, &g, &target, order)?;
            debug_assert_eq!(found.scalar, Some(BigUint::from(k)));
            steps += found.steps;
        }
        out.push((order, steps as f64 / (order - 1) as f64));
    }
    Ok(out)
}

/// Structural audit of public transcripts for secret material.
pub fn eavesdrop_secrecy_check(opts: &AttackOptions) -> Result<AttackReport> {
    let (honest, secrets) = record_proposed_run(&opts.curve, opts.t, opts.n, opts.seed, false)?;
    let leaks = secrecy_scan(&honest, &secrets);
    let (broken, broken_secrets) = record_proposed_run(&opts.curve, opts.t, opts.n, opts.seed, true)?;
    let control = secrecy_scan(&broken, &broken_secrets);
    let mut findings = vec![
        Finding::text("secret leaks in honest transcript", 0, leaks.len()),
        Finding::boolean("negative control leak detected", true, !control.is_empty()),
    ];

    let group = HarnGroup::builtin("1024-160")?;
    let mut rng = ChaCha20Rng::seed_from_u64(opts.seed);
    let (params, tokens) = harn_init(opts.t, opts.n, &group, &mut rng)?;
    let ctx = OpCounter::disabled();
    let xs: Vec<FieldElement> = tokens.iter().map(|t| t.x.clone()).collect();
    let mut harn_transcript = Transcript::default();
    let mut e_values = SecretMaterial::default();
    let mut c_values = SecretMaterial::default();
    for token in &tokens {
        let e = harn_release(token, &xs, &params, &ctx)?;
        let c = harn_coefficient(token, &xs, &params, &ctx)?;
        harn_transcript.push(
            Released {
                member_id: token.member_id.clone(),
                e: e.clone(),
            }
            .to_frame(0)?,
        );
        e_values.items.push((format!("e of {}", token.member_id), e.to_bytes_be()));
        c_values.items.push((format!("c of {}", token.member_id), c.to_bytes_be()));
        c_values.items.push((format!("f1 of {}", token.member_id), token.f1.to_bytes_be()));
        c_values.items.push((format!("f2 of {}", token.member_id), token.f2.to_bytes_be()));
    }
    findings.push(Finding::text(
        "harn e_i values present in transcript",
        tokens.len(),
        secrecy_scan(&harn_transcript, &e_values).len(),
    ));
    findings.push(Finding::text(
        "harn c_i or f_j(x_i) present in transcript",
        0,
        secrecy_scan(&harn_transcript, &c_values).len(),
    ));

    let growth = dlog_cost_growth()?;
    let increasing = growth.windows(2).all(|w| w[1].1 > w[0].1);
    findings.push(Finding::boolean("dlog search cost grows with subgroup order", true, increasing));

    let mut report = AttackReport::new("eavesdrop", findings);
    report.metrics.insert("honest_frames".into(), json!(honest.frames.len()));
    report.metrics.insert("honest_bytes".into(), json!(honest.total_bytes()));
    report.metrics.insert("control_leaks".into(), json!(control));
    report.metrics.insert("dlog_mean_steps".into(), json!(growth));
    Ok(report)
}

/// Every member sending at once into a bounded verifier queue, compared with
/// the staggered schedule.
pub fn flooding(opts: &AttackOptions) -> Result<AttackReport> {
    // below a few times the capacity the backlog drains without inflation
    let m = opts.n.max(5 * opts.queue_capacity);
    let mut base = Scenario::new(SimScheme::ProposedCentralized, m, opts.t.min(m));
    base.seed = opts.seed;
    base.curve = curve_ref(&opts.curve);
    base.queue_capacity = Some(opts.queue_capacity);
    let staggered = sim::run(&base)?;
    let mut flood = base.clone();
    flood.schedule = Schedule::Simultaneous;
    let flooded = sim::run(&flood)?;
    let inflation = flooded.auth_time_s / staggered.auth_time_s;
    let findings = vec![
        Finding::boolean("staggered schedule stays within queue", true, staggered.queue_drops == 0),
        Finding::boolean(
            "simultaneous sends saturate the verifier queue",
            true,
            flooded.max_queue_len == opts.queue_capacity && flooded.queue_drops > 0,
        ),
        Finding::boolean("authentication time inflated", true, inflation > 1.0),
        Finding::boolean("authentication still completes", true, flooded.authenticated()),
    ];
    let mut report = AttackReport::new("flooding", findings);
    report.metrics.insert("m".into(), json!(m));
    report.metrics.insert("queue_capacity".into(), json!(opts.queue_capacity));
    report.metrics.insert("staggered_auth_time_s".into(), json!(staggered.auth_time_s));
    report.metrics.insert("flooded_auth_time_s".into(), json!(flooded.auth_time_s));
    report.metrics.insert("inflation".into(), json!(inflation));
    report.metrics.insert("max_queue_len".into(), json!(flooded.max_queue_len));
    report.metrics.insert("queue_drops".into(), json!(flooded.queue_drops));
    report.metrics.insert("retransmissions".into(), json!(flooded.retransmissions));
    Ok(report)
}
