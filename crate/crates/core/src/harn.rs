//! Harn's asynchronous group authentication, two-polynomial variant.
//!
//! The dealer picks polynomials `f_1, f_2` over `F_q`, public points `w_j` and
//! mixing constants `d_j`, and publishes `g^s` with `s = sum_j d_j f_j(w_j)`.
//! Member `i` releases `e_i = g^{c_i}` where
//! `c_i = sum_j d_j f_j(x_i) prod_{r != i} (w_j - x_r)/(x_i - x_r)`; the product of
//! all released values equals `g^s` exactly when every member is honest.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::One;
use num_bigint::RandBigInt;
use rand::{CryptoRng, Rng, RngCore};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::{is_probable_prime, lagrange_coeff_at, random_prime, FieldElement, FieldError, OpCounter, Prime};
use crate::sss::{default_roster, sample_polynomial, MemberId, RosterEntry, SecretPolynomial, SssError};
use crate::wire::{self, Frame, MessageType, WireError};

/// Base whose `(p-1)/q`-th power is the default subgroup generator.
pub const DEFAULT_GENERATOR_BASE: u64 = 7;

#[derive(Debug, Error)]
pub enum HarnError {
    #[error("invalid group size: t={t}, n={n}")]
    InvalidSize { t: usize, n: usize },
    #[error("bad group parameters: {0}")]
    BadGroup(String),
    #[error("d_1 = d_2 = 0 makes the secret degenerate")]
    DegenerateMixing,
    #[error("public point w collides with roster x = {0}")]
    EvaluationPointCollision(BigUint),
    #[error("member x = {0} is not among the participants")]
    NotParticipant(BigUint),
    #[error("need at least {needed} released values, got {got}")]
    BelowThreshold { needed: usize, got: usize },
    #[error("{0} released more than once")]
    Duplicate(MemberId),
    #[error("{0} is not in the roster")]
    UnknownMember(MemberId),
    #[error("unknown builtin group {0:?}")]
    UnknownBuiltin(String),
    #[error("cannot read group file: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot parse group file: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Sss(#[from] SssError),
    #[error(transparent)]
    Wire(#[from] WireError),
}

pub type Result<T> = std::result::Result<T, HarnError>;

/// `(p, q, g)` with `q | p - 1` and `g` of order `q` modulo `p`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HarnGroup {
    p: Prime,
    q: Prime,
    g: FieldElement,
}

/// On-disk group description, decimal strings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HarnGroupFile {
    pub p: String,
    pub q: String,
    pub g: String,
}

impl HarnGroup {
    pub fn new(p: BigUint, q: BigUint, g: BigUint) -> Result<Self> {
        let p = Prime::new(p)?;
        let q = Prime::new(q)?;
        if !(p.value() - 1u8).is_multiple_of(q.value()) {
            return Err(HarnError::BadGroup("q does not divide p - 1".into()));
        }
        let g = FieldElement::new(g, &p);
        if g.is_one() || g.is_zero() || !g.pow(q.value()).is_one() {
            return Err(HarnError::BadGroup("g does not generate the order-q subgroup".into()));
        }
        Ok(HarnGroup { p, q, g })
    }

    /// Derives `g = base^((p-1)/q)`, trying successive bases until `g != 1`.
    pub fn with_default_generator(p: BigUint, q: BigUint) -> Result<Self> {
        let cofactor = (&p - 1u8) / &q;
        let mut base = BigUint::from(DEFAULT_GENERATOR_BASE);
        loop {
            let g = base.modpow(&cofactor, &p);
            if !g.is_one() {
                return Self::new(p, q, g);
            }
            base += 1u8;
            if base >= p {
                return Err(HarnError::BadGroup("no generator found".into()));
            }
        }
    }

    /// Random `q` of `q_bits` bits and `p = kq + 1` of `p_bits` bits.
    pub fn generate<R: Rng + ?Sized>(rng: &mut R, p_bits: u64, q_bits: u64) -> Result<Self> {
        if q_bits < 2 || p_bits <= q_bits + 1 {
            return Err(HarnError::BadGroup(format!(
                "need p_bits > q_bits + 1 >= 3, got {p_bits}/{q_bits}"
            )));
        }
        let q = random_prime(rng, q_bits);
        let low = BigUint::one() << (p_bits - 1);
        let high = BigUint::one() << p_bits;
        loop {
            let k_bits = p_bits - q_bits;
            let mut k = rng.gen_biguint(k_bits) | (BigUint::one() << (k_bits - 1));
            k.set_bit(0, false);
            let p = &k * &q + 1u8;
            if p < low || p >= high {
                continue;
            }
            if is_probable_prime(&p) {
                return Self::with_default_generator(p, q);
            }
        }
    }

    pub fn from_file_format(file: &HarnGroupFile) -> Result<Self> {
        let parse = |name: &str, text: &str| {
            BigUint::parse_bytes(text.trim().as_bytes(), 10)
                .ok_or_else(|| HarnError::BadGroup(format!("{name} = {text:?} is not decimal")))
        };
        Self::new(parse("p", &file.p)?, parse("q", &file.q)?, parse("g", &file.g)?)
    }

    pub fn to_file_format(&self) -> HarnGroupFile {
        HarnGroupFile {
            p: self.p.to_string(),
            q: self.q.to_string(),
            g: self.g.to_string(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_file_format(&serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file_format()).expect("group serializes")
    }

    /// `tiny` (p = 23, q = 11) or `1024-160`.
    pub fn builtin(name: &str) -> Result<Self> {
        let text = match name {
            "tiny" | "23-11" => include_str!("../fixtures/harn_23_11.json"),
            "1024-160" => include_str!("../fixtures/harn_1024_160.json"),
            other => return Err(HarnError::UnknownBuiltin(other.to_string())),
        };
        Self::from_json(text)
    }

    /// `builtin:NAME` or a path to a JSON group file.
    pub fn load(reference: &str) -> Result<Self> {
        match reference.strip_prefix("builtin:") {
            Some(name) => Self::builtin(name),
            None => Self::from_json(&std::fs::read_to_string(Path::new(reference))?),
        }
    }

    pub fn p(&self) -> &Prime {
        &self.p
    }

    pub fn q(&self) -> &Prime {
        &self.q
    }

    pub fn g(&self) -> &FieldElement {
        &self.g
    }
}

/// A member's private material `(x_i, f_1(x_i), f_2(x_i))`.
#[derive(Clone, PartialEq, Eq)]
pub struct HarnToken {
    pub member_id: MemberId,
    pub x: FieldElement,
    pub f1: FieldElement,
    pub f2: FieldElement,
}

impl fmt::Debug for HarnToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HarnToken")
            .field("member_id", &self.member_id)
            .field("x", &self.x)
            .finish_non_exhaustive()
    }
}

/// Dealer state plus the public values every member needs.
#[derive(Clone, Debug)]
pub struct HarnParams {
    group: HarnGroup,
    roster: Vec<RosterEntry>,
    polys: [SecretPolynomial; 2],
    w: [FieldElement; 2],
    d: [FieldElement; 2],
    s: FieldElement,
    target: FieldElement,
}

impl HarnParams {
    /// Validates the pieces and derives `s` and `g^s`.
    pub fn from_parts(
        group: HarnGroup,
        polys: [SecretPolynomial; 2],
        w: [FieldElement; 2],
        d: [FieldElement; 2],
        roster: Vec<RosterEntry>,
    ) -> Result<Self> {
        let q = group.q().clone();
        let t = polys[0].threshold();
        if t == 0 || t > roster.len() || polys[1].threshold() != t {
            return Err(HarnError::InvalidSize { t, n: roster.len() });
        }
        let in_q = |fe: &FieldElement| fe.modulus() == &q;
        if !polys.iter().all(|p| p.field() == &q) || !w.iter().all(in_q) || !d.iter().all(in_q) {
            return Err(HarnError::BadGroup("all scalars must live in F_q".into()));
        }
        if d.iter().all(FieldElement::is_zero) {
            return Err(HarnError::DegenerateMixing);
        }
        let mut xs = HashSet::new();
        for entry in &roster {
            if !in_q(&entry.x) || entry.x.is_zero() || !xs.insert(entry.x.residue().clone()) {
                return Err(HarnError::BadGroup(format!(
                    "roster x for {} must be distinct, nonzero and in F_q",
                    entry.member_id
                )));
            }
        }
        for wj in &w {
            if xs.contains(wj.residue()) {
                return Err(HarnError::EvaluationPointCollision(wj.residue().clone()));
            }
        }
        let ctx = OpCounter::disabled();
        let mut s = FieldElement::zero(&q);
        for j in 0..2 {
            let fw = polys[j].evaluate(&w[j], &ctx)?;
            s = s.add(&d[j].mul(&fw)?)?;
        }
        let target = group.g().pow(s.residue());
        Ok(HarnParams {
            group,
            roster,
            polys,
            w,
            d,
            s,
            target,
        })
    }

    pub fn group(&self) -> &HarnGroup {
        &self.group
    }

    pub fn threshold(&self) -> usize {
        self.polys[0].threshold()
    }

    pub fn roster(&self) -> &[RosterEntry] {
        &self.roster
    }

    pub fn w(&self) -> &[FieldElement; 2] {
        &self.w
    }

    pub fn d(&self) -> &[FieldElement; 2] {
        &self.d
    }

    pub fn polynomials(&self) -> &[SecretPolynomial; 2] {
        &self.polys
    }

    pub fn secret(&self) -> &FieldElement {
        &self.s
    }

    /// `g^s mod p`, the public verification target.
    pub fn target(&self) -> &FieldElement {
        &self.target
    }

    pub fn x_of(&self, member: &MemberId) -> Result<&FieldElement> {
        self.roster
            .iter()
            .find(|e| &e.member_id == member)
            .map(|e| &e.x)
            .ok_or_else(|| HarnError::UnknownMember(member.clone()))
    }

    /// Token for one roster entry.
    pub fn token_for(&self, entry: &RosterEntry) -> Result<HarnToken> {
        let ctx = OpCounter::disabled();
        Ok(HarnToken {
            member_id: entry.member_id.clone(),
            x: entry.x.clone(),
            f1: self.polys[0].evaluate(&entry.x, &ctx)?,
            f2: self.polys[1].evaluate(&entry.x, &ctx)?,
        })
    }
}

/// Dealer setup for `n` members with roster `x_i = i`.
pub fn harn_init<R: RngCore + CryptoRng>(
    t: usize,
    n: usize,
    group: &HarnGroup,
    rng: &mut R,
) -> Result<(HarnParams, Vec<HarnToken>)> {
    if t == 0 || t > n || BigUint::from(n) >= *group.q().value() {
        return Err(HarnError::InvalidSize { t, n });
    }
    let q = group.q().clone();
    let roster = default_roster(n, &q);
    let taken: HashSet<&BigUint> = roster.iter().map(|e| e.x.residue()).collect();
    let draw_w = |rng: &mut R| loop {
        let w = FieldElement::random(rng, &q);
        if !taken.contains(w.residue()) {
            break w;
        }
    };
    let w = [draw_w(rng), draw_w(rng)];
    let d = [FieldElement::random_nonzero(rng, &q), FieldElement::random_nonzero(rng, &q)];
    let polys = [
        sample_polynomial(t, &FieldElement::random(rng, &q), rng)?,
        sample_polynomial(t, &FieldElement::random(rng, &q), rng)?,
    ];
    let params = HarnParams::from_parts(group.clone(), polys, w, d, roster)?;
    let tokens = params
        .roster
        .iter()
        .map(|e| params.token_for(e))
        .collect::<Result<Vec<_>>>()?;
    Ok((params, tokens))
}

/// `c_i = sum_j d_j f_j(x_i) prod_{r != i} (w_j - x_r)/(x_i - x_r) mod q`.
pub fn harn_coefficient(
    token: &HarnToken,
    participants: &[FieldElement],
    params: &HarnParams,
    ctx: &OpCounter,
) -> Result<FieldElement> {
    if participants.len() < params.threshold() {
        return Err(HarnError::BelowThreshold {
            needed: params.threshold(),
            got: participants.len(),
        });
    }
    let i = participants
        .iter()
        .position(|x| x == &token.x)
        .ok_or_else(|| HarnError::NotParticipant(token.x.residue().clone()))?;
    let values = [&token.f1, &token.f2];
    let mut c = FieldElement::zero(params.group.q());
    for j in 0..2 {
        let basis = lagrange_coeff_at(i, participants, &params.w[j], ctx)?;
        let term = ctx.mul(&ctx.mul(&params.d[j], values[j])?, &basis)?;
        c = c.add(&term)?;
    }
    Ok(c)
}

/// `e_i = g^{c_i} mod p`, exponentiating over the full bit length of `q`.
pub fn harn_release(
    token: &HarnToken,
    participants: &[FieldElement],
    params: &HarnParams,
    ctx: &OpCounter,
) -> Result<FieldElement> {
    let c = harn_coefficient(token, participants, params, ctx)?;
    let q_bits = params.group.q().bits();
    Ok(ctx.pow_ladder(params.group.g(), c.residue(), q_bits))
}

/// A member's released value `e_i`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Released {
    pub member_id: MemberId,
    pub e: FieldElement,
}

impl Released {
    pub fn to_frame(&self, epoch: u32) -> Result<Frame> {
        Ok(Frame::new(
            MessageType::HarnToken,
            epoch,
            self.member_id.clone(),
            wire::encode_scalar(&self.e)?,
        ))
    }

    pub fn from_frame(frame: &Frame, group: &HarnGroup) -> Result<Self> {
        Ok(Released {
            member_id: frame.member_id.clone(),
            e: wire::decode_scalar(frame.expect(MessageType::HarnToken)?, group.p())?,
        })
    }
}

/// True iff `prod e_i = g^s mod p`.
pub fn harn_verify(released: &[Released], params: &HarnParams, ctx: &OpCounter) -> Result<bool> {
    if released.len() < params.threshold() {
        return Err(HarnError::BelowThreshold {
            needed: params.threshold(),
            got: released.len(),
        });
    }
    let mut seen = HashSet::new();
    let mut product = FieldElement::one(params.group.p());
    for r in released {
        params.x_of(&r.member_id)?;
        if !seen.insert(&r.member_id) {
            return Err(HarnError::Duplicate(r.member_id.clone()));
        }
        product = ctx.mul(&product, &r.e)?;
    }
    Ok(&product == params.target())
}
