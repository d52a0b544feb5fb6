//! Shamir secret sharing over a prime field.

use std::collections::HashSet;
use std::fmt;
use std::io::{BufRead, Write};

use num_bigint::BigUint;
use rand::{CryptoRng, RngCore};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use subtle::ConstantTimeEq;
use thiserror::Error;

use crate::field::{lagrange_coeff_at_zero, FieldElement, FieldError, OpCounter, Prime};

#[derive(Debug, Error)]
pub enum SssError {
    #[error("threshold must be at least 1")]
    ZeroThreshold,
    #[error("threshold {t} needs {t} distinct nonzero x-coordinates but the field has only {available}")]
    ThresholdExceedsField { t: usize, available: BigUint },
    #[error("x = 0 would reveal the secret")]
    ZeroAbscissa,
    #[error("duplicate x-coordinate {0}")]
    DuplicateAbscissa(BigUint),
    #[error("need at least {needed} shares, got {got}")]
    BelowThreshold { needed: usize, got: usize },
    #[error("member id must be 1..=255 bytes")]
    BadMemberId,
    #[error("malformed share record: {0}")]
    BadRecord(String),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, SssError>;

/// Group member identifier, carried on the wire as 1..=255 raw bytes.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MemberId(String);

impl MemberId {
    pub fn new(id: impl Into<String>) -> Result<Self> {
        let id = id.into();
        if id.is_empty() || id.len() > 255 {
            return Err(SssError::BadMemberId);
        }
        Ok(MemberId(id))
    }

    /// `U1`, `U2`, ... zero-padded to the width of `n` so that lexicographic and
    /// numeric order agree.
    pub fn indexed(index: usize, n: usize) -> Self {
        let width = n.max(1).to_string().len();
        MemberId(format!("U{:0width$}", index, width = width))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn as_bytes(&self) -> &[u8] {
        self.0.as_bytes()
    }
}

impl fmt::Debug for MemberId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for MemberId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A public roster entry: who holds the share at `x`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RosterEntry {
    pub member_id: MemberId,
    pub x: FieldElement,
}

/// Default roster: member `i` (1-based) gets `x_i = i`.
pub fn default_roster(n: usize, field: &Prime) -> Vec<RosterEntry> {
    (1..=n)
        .map(|i| RosterEntry {
            member_id: MemberId::indexed(i, n),
            x: FieldElement::from_u64(i as u64, field),
        })
        .collect()
}

/// Roster with random distinct nonzero x-coordinates.
pub fn random_roster<R: RngCore + CryptoRng>(
    n: usize,
    field: &Prime,
    rng: &mut R,
) -> Result<Vec<RosterEntry>> {
    check_capacity(n, field)?;
    let mut seen = HashSet::new();
    let mut roster = Vec::with_capacity(n);
    while roster.len() < n {
        let x = FieldElement::random_nonzero(rng, field);
        if seen.insert(x.residue().clone()) {
            roster.push(RosterEntry {
                member_id: MemberId::indexed(roster.len() + 1, n),
                x,
            });
        }
    }
    Ok(roster)
}

fn check_capacity(count: usize, field: &Prime) -> Result<()> {
    let available = field.value() - 1u8;
    if BigUint::from(count) > available {
        return Err(SssError::ThresholdExceedsField { t: count, available });
    }
    Ok(())
}

#[derive(Clone, PartialEq, Eq)]
pub struct SecretPolynomial {
    coefficients: Vec<FieldElement>,
}

impl fmt::Debug for SecretPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SecretPolynomial(degree {})", self.coefficients.len() - 1)
    }
}

impl SecretPolynomial {
    /// Builds a polynomial from coefficients, constant term first.
    pub fn from_coefficients(coefficients: Vec<FieldElement>) -> Result<Self> {
        let first = coefficients.first().ok_or(SssError::ZeroThreshold)?;
        let field = first.modulus().clone();
        check_capacity(coefficients.len(), &field)?;
        if coefficients.iter().any(|c| c.modulus() != &field) {
            return Err(SssError::Field(FieldError::ModulusMismatch {
                left: field.value().clone(),
                right: coefficients
                    .iter()
                    .find(|c| c.modulus() != &field)
                    .map(|c| c.modulus().value().clone())
                    .unwrap_or_default(),
            }));
        }
        Ok(SecretPolynomial { coefficients })
    }

    pub fn threshold(&self) -> usize {
        self.coefficients.len()
    }

    pub fn secret(&self) -> &FieldElement {
        &self.coefficients[0]
    }

    pub fn field(&self) -> &Prime {
        self.coefficients[0].modulus()
    }

    pub fn coefficients(&self) -> &[FieldElement] {
        &self.coefficients
    }

    /// Horner evaluation.
    pub fn evaluate(&self, x: &FieldElement, ctx: &OpCounter) -> Result<FieldElement> {
        let mut acc = FieldElement::zero(self.field());
        for c in self.coefficients.iter().rev() {
            acc = ctx.mul(&acc, x)?.add(c)?;
        }
        Ok(acc)
    }
}

/// Samples a degree `t - 1` polynomial with the given constant term. The
/// leading coefficient is re-drawn until nonzero, so the degree is exact.
pub fn sample_polynomial<R: RngCore + CryptoRng>(
    t: usize,
    secret: &FieldElement,
    rng: &mut R,
) -> Result<SecretPolynomial> {
    if t == 0 {
        return Err(SssError::ZeroThreshold);
    }
    let field = secret.modulus();
    check_capacity(t, field)?;
    let mut coefficients = Vec::with_capacity(t);
    coefficients.push(secret.clone());
    for i in 1..t {
        let c = if i == t - 1 {
            FieldElement::random_nonzero(rng, field)
        } else {
            FieldElement::random(rng, field)
        };
        coefficients.push(c);
    }
    Ok(SecretPolynomial { coefficients })
}

#[derive(Clone, PartialEq, Eq)]
pub struct Share {
    pub member_id: MemberId,
    /// Public evaluation point `x_i`.
    pub x: FieldElement,
    /// Private value `f(x_i)`.
    pub y: FieldElement,
}

impl fmt::Debug for Share {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // the private value stays out of logs
        f.debug_struct("Share")
            .field("member_id", &self.member_id)
            .field("x", &self.x)
            .finish_non_exhaustive()
    }
}

fn ensure_distinct_nonzero<'a>(xs: impl IntoIterator<Item = &'a FieldElement>) -> Result<()> {
    let mut seen = HashSet::new();
    for x in xs {
        if x.is_zero() {
            return Err(SssError::ZeroAbscissa);
        }
        if !seen.insert(x.residue().clone()) {
            return Err(SssError::DuplicateAbscissa(x.residue().clone()));
        }
    }
    Ok(())
}

/// Evaluates the polynomial at every roster x.
pub fn issue_shares(poly: &SecretPolynomial, roster: &[RosterEntry]) -> Result<Vec<Share>> {
    ensure_distinct_nonzero(roster.iter().map(|e| &e.x))?;
    let ctx = OpCounter::disabled();
    roster
        .iter()
        .map(|entry| {
            Ok(Share {
                member_id: entry.member_id.clone(),
                x: entry.x.clone(),
                y: poly.evaluate(&entry.x, &ctx)?,
            })
        })
        .collect()
}

/// Lagrange interpolation at zero over all supplied shares (at least `t`).
pub fn reconstruct(shares: &[Share], t: usize, ctx: &OpCounter) -> Result<FieldElement> {
    if t == 0 {
        return Err(SssError::ZeroThreshold);
    }
    if shares.len() < t {
        return Err(SssError::BelowThreshold {
            needed: t,
            got: shares.len(),
        });
    }
    ensure_distinct_nonzero(shares.iter().map(|s| &s.x))?;
    let xs: Vec<FieldElement> = shares.iter().map(|s| s.x.clone()).collect();
    let mut secret = FieldElement::zero(xs[0].modulus());
    for (i, share) in shares.iter().enumerate() {
        let weight = lagrange_coeff_at_zero(i, &xs, ctx)?;
        secret = secret.add(&ctx.mul(&share.y, &weight)?)?;
    }
    Ok(secret)
}

/// `H(s)`: SHA-256 over the fixed-width big-endian encoding of the secret.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct SecretCommitment([u8; 32]);

impl fmt::Debug for SecretCommitment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SecretCommitment({})", hex::encode(self.0))
    }
}

impl SecretCommitment {
    pub fn from_bytes(bytes: [u8; 32]) -> Self {
        SecretCommitment(bytes)
    }

    pub fn from_hex(text: &str) -> Option<Self> {
        let bytes = hex::decode(text).ok()?;
        Some(SecretCommitment(bytes.try_into().ok()?))
    }

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

pub fn commit(secret: &FieldElement) -> SecretCommitment {
    let digest = Sha256::digest(secret.to_bytes_be());
    SecretCommitment(digest.into())
}

pub fn verify_commitment(candidate: &FieldElement, commitment: &SecretCommitment) -> bool {
    commit(candidate).0.ct_eq(&commitment.0).into()
}

/// One JSON-lines record of the share export.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShareRecord {
    pub member_id: MemberId,
    pub x: String,
    pub y: String,
}

impl ShareRecord {
    pub fn from_share(share: &Share) -> Self {
        ShareRecord {
            member_id: share.member_id.clone(),
            x: share.x.to_string(),
            y: share.y.to_string(),
        }
    }

    pub fn into_share(self, field: &Prime) -> Result<Share> {
        let parse = |text: &str| -> Result<FieldElement> {
            let value = BigUint::parse_bytes(text.as_bytes(), 10)
                .ok_or_else(|| SssError::BadRecord(format!("{text:?} is not decimal")))?;
            if value >= *field.value() {
                return Err(SssError::BadRecord(format!("{text} is not reduced")));
            }
            Ok(FieldElement::new(value, field))
        };
        Ok(Share {
            member_id: self.member_id,
            x: parse(&self.x)?,
            y: parse(&self.y)?,
        })
    }
}

pub fn write_shares<W: Write>(mut out: W, shares: &[Share]) -> Result<()> {
    for share in shares {
        let line = serde_json::to_string(&ShareRecord::from_share(share))
            .map_err(|e| SssError::BadRecord(e.to_string()))?;
        writeln!(out, "{line}")?;
    }
    Ok(())
}

pub fn read_shares<R: BufRead>(input: R, field: &Prime) -> Result<Vec<Share>> {
    let mut shares = Vec::new();
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: ShareRecord =
            serde_json::from_str(&line).map_err(|e| SssError::BadRecord(e.to_string()))?;
        shares.push(record.into_share(field)?);
    }
    Ok(shares)
}
