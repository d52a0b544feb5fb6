//! Prime-field arithmetic over arbitrary-precision residues.
//!
//! Every value carries its modulus, so elements of different fields can never
//! be mixed silently. Multiplication counting is explicit: the plain methods on
//! [`FieldElement`] never count, the methods on [`OpCounter`] do.

use std::cell::{Cell, RefCell};
use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_bigint::{BigUint, RandBigInt};
use num_traits::{One, Zero};
use rand::{CryptoRng, Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

const MILLER_RABIN_ROUNDS: usize = 64;

const SMALL_PRIMES: [u32; 25] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97,
];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FieldError {
    #[error("modulus mismatch: {left} vs {right}")]
    ModulusMismatch { left: BigUint, right: BigUint },
    #[error("zero has no multiplicative inverse")]
    InverseOfZero,
    #[error("{0} is not prime")]
    NotPrime(BigUint),
    #[error("modulus must be at least 3, got {0}")]
    ModulusTooSmall(BigUint),
    #[error("duplicate x-coordinate {0}")]
    DuplicateAbscissa(BigUint),
    #[error("index {index} out of range for {len} points")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("encoding of {got} bytes does not fit a {width}-byte field element")]
    BadEncoding { got: usize, width: usize },
}

pub type Result<T> = std::result::Result<T, FieldError>;

/// A validated odd prime modulus. Cloning is cheap.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Prime(Arc<BigUint>);

impl Prime {
    pub fn new(value: BigUint) -> Result<Self> {
        if value < BigUint::from(3u8) {
            return Err(FieldError::ModulusTooSmall(value));
        }
        if !is_probable_prime(&value) {
            return Err(FieldError::NotPrime(value));
        }
        Ok(Prime(Arc::new(value)))
    }

    pub fn from_u64(value: u64) -> Result<Self> {
        Self::new(BigUint::from(value))
    }

    pub fn value(&self) -> &BigUint {
        &self.0
    }

    pub fn bits(&self) -> u64 {
        self.0.bits()
    }

    /// Width of the canonical big-endian encoding of residues.
    pub fn byte_len(&self) -> usize {
        self.bits().div_ceil(8) as usize
    }

    pub fn to_u64(&self) -> Option<u64> {
        u64::try_from(&*self.0).ok()
    }
}

impl fmt::Debug for Prime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Prime({})", self.0)
    }
}

impl fmt::Display for Prime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Miller-Rabin with fixed small-prime bases followed by seeded random bases.
pub fn is_probable_prime(n: &BigUint) -> bool {
    let two = BigUint::from(2u8);
    if *n < two {
        return false;
    }
    for &p in SMALL_PRIMES.iter() {
        let p = BigUint::from(p);
        if *n == p {
            return true;
        }
        if (n % &p).is_zero() {
            return false;
        }
    }
    let n_minus_one = n - 1u8;
    let trailing = n_minus_one.trailing_zeros().unwrap_or(0);
    let odd = &n_minus_one >> trailing;

    let witness = |a: &BigUint| -> bool {
        let mut x = a.modpow(&odd, n);
        if x.is_one() || x == n_minus_one {
            return true;
        }
        for _ in 1..trailing {
            x = (&x * &x) % n;
            if x == n_minus_one {
                return true;
            }
        }
        false
    };

    // Bases are deterministic per candidate so primality verdicts are reproducible.
    let mut seed = [0u8; 32];
    for (slot, byte) in seed.iter_mut().zip(n.to_bytes_le()) {
        *slot = byte;
    }
    let mut rng = ChaCha20Rng::from_seed(seed);
    for round in 0..MILLER_RABIN_ROUNDS {
        let a = if round < SMALL_PRIMES.len() {
            BigUint::from(SMALL_PRIMES[round])
        } else if *n > BigUint::from(4u8) {
            rng.gen_biguint_range(&two, &(n - 2u8))
        } else {
            continue;
        };
        if a >= *n {
            continue;
        }
        if !witness(&a) {
            return false;
        }
    }
    true
}

/// A residue modulo a [`Prime`].
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct FieldElement {
    residue: BigUint,
    modulus: Prime,
}

impl FieldElement {
    /// Reduces `value` into the field.
    pub fn new(value: BigUint, modulus: &Prime) -> Self {
        FieldElement {
            residue: value % modulus.value(),
            modulus: modulus.clone(),
        }
    }

    pub fn from_u64(value: u64, modulus: &Prime) -> Self {
        Self::new(BigUint::from(value), modulus)
    }

    /// Maps a signed integer into the field, so `from_i64(-1, q)` is `q - 1`.
    pub fn from_i64(value: i64, modulus: &Prime) -> Self {
        let magnitude = Self::from_u64(value.unsigned_abs(), modulus);
        if value < 0 {
            magnitude.neg()
        } else {
            magnitude
        }
    }

    pub fn zero(modulus: &Prime) -> Self {
        Self::new(BigUint::zero(), modulus)
    }

    pub fn one(modulus: &Prime) -> Self {
        Self::new(BigUint::one(), modulus)
    }

    pub fn random<R: RngCore + CryptoRng>(rng: &mut R, modulus: &Prime) -> Self {
        let residue = rng.gen_biguint_below(modulus.value());
        FieldElement {
            residue,
            modulus: modulus.clone(),
        }
    }

    pub fn random_nonzero<R: RngCore + CryptoRng>(rng: &mut R, modulus: &Prime) -> Self {
        let residue = rng.gen_biguint_range(&BigUint::one(), modulus.value());
        FieldElement {
            residue,
            modulus: modulus.clone(),
        }
    }

    pub fn residue(&self) -> &BigUint {
        &self.residue
    }

    pub fn modulus(&self) -> &Prime {
        &self.modulus
    }

    pub fn is_zero(&self) -> bool {
        self.residue.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.residue.is_one()
    }

    fn check(&self, other: &Self) -> Result<()> {
        if self.modulus == other.modulus {
            Ok(())
        } else {
            Err(FieldError::ModulusMismatch {
                left: self.modulus.value().clone(),
                right: other.modulus.value().clone(),
            })
        }
    }

    fn with_residue(&self, residue: BigUint) -> Self {
        FieldElement {
            residue,
            modulus: self.modulus.clone(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check(other)?;
        let mut sum = &self.residue + &other.residue;
        if sum >= *self.modulus.value() {
            sum -= self.modulus.value();
        }
        Ok(self.with_residue(sum))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check(other)?;
        let residue = if self.residue >= other.residue {
            &self.residue - &other.residue
        } else {
            self.modulus.value() - &other.residue + &self.residue
        };
        Ok(self.with_residue(residue))
    }

    pub fn neg(&self) -> Self {
        if self.is_zero() {
            self.clone()
        } else {
            self.with_residue(self.modulus.value() - &self.residue)
        }
    }

    pub fn double(&self) -> Self {
        self.add(self).expect("same modulus")
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check(other)?;
        Ok(self.with_residue((&self.residue * &other.residue) % self.modulus.value()))
    }

    pub fn square(&self) -> Self {
        self.with_residue((&self.residue * &self.residue) % self.modulus.value())
    }

    /// Multiplicative inverse as `a^(p-2)`; the modulus is prime. Faster than
    /// the generic extended Euclid on `BigInt` at these sizes.
    pub fn inv(&self) -> Result<Self> {
        if self.is_zero() {
            return Err(FieldError::InverseOfZero);
        }
        let p = self.modulus.value();
        Ok(self.with_residue(self.residue.modpow(&(p - 2u8), p)))
    }

    pub fn div(&self, other: &Self) -> Result<Self> {
        self.mul(&other.inv()?)
    }

    /// Square-and-multiply exponentiation without counting.
    pub fn pow(&self, exp: &BigUint) -> Self {
        OpCounter::disabled().pow(self, exp)
    }

    /// Big-endian encoding padded to the modulus byte length.
    pub fn to_bytes_be(&self) -> Vec<u8> {
        let width = self.modulus.byte_len();
        let raw = self.residue.to_bytes_be();
        let mut out = vec![0u8; width];
        if !self.residue.is_zero() {
            out[width - raw.len()..].copy_from_slice(&raw);
        }
        out
    }

    /// Inverse of [`FieldElement::to_bytes_be`]; rejects wrong widths and
    /// non-canonical residues.
    pub fn from_bytes_be(bytes: &[u8], modulus: &Prime) -> Result<Self> {
        let width = modulus.byte_len();
        if bytes.len() != width {
            return Err(FieldError::BadEncoding {
                got: bytes.len(),
                width,
            });
        }
        let residue = BigUint::from_bytes_be(bytes);
        if residue >= *modulus.value() {
            return Err(FieldError::BadEncoding {
                got: bytes.len(),
                width,
            });
        }
        Ok(FieldElement {
            residue,
            modulus: modulus.clone(),
        })
    }

    /// Re-interprets the residue in another field.
    pub fn reduce_into(&self, modulus: &Prime) -> Self {
        Self::new(self.residue.clone(), modulus)
    }
}

impl fmt::Debug for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} mod {}", self.residue, self.modulus)
    }
}

impl fmt::Display for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.residue)
    }
}

/// Per-context operation counts. Not shared between threads: one counter per
/// simulated node or per measured call.
#[derive(Debug)]
pub struct OpCounter {
    enabled: bool,
    muls: RefCell<BTreeMap<BigUint, u64>>,
    inversions: Cell<u64>,
    scalar_muls: Cell<u64>,
    curve_muls_in_scalar: Cell<u64>,
    curve_muls_outside: Cell<u64>,
    scalar_depth: Cell<u32>,
}

impl Default for OpCounter {
    fn default() -> Self {
        Self::new()
    }
}

/// Immutable copy of an [`OpCounter`]'s tallies.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct OpCounts {
    /// Stand-alone field multiplications, keyed by modulus.
    pub muls: BTreeMap<BigUint, u64>,
    pub inversions: u64,
    /// Elliptic-curve scalar multiplications (TEM events).
    pub scalar_muls: u64,
    /// Field multiplications performed inside scalar multiplications.
    pub curve_muls_in_scalar: u64,
    /// Field multiplications performed by point additions outside scalar multiplications.
    pub curve_muls_outside: u64,
}

impl OpCounts {
    pub fn muls_mod(&self, modulus: &Prime) -> u64 {
        self.muls.get(modulus.value()).copied().unwrap_or(0)
    }

    pub fn total_field_muls(&self) -> u64 {
        self.muls.values().sum::<u64>() + self.curve_muls_in_scalar + self.curve_muls_outside
    }
}

impl OpCounter {
    pub fn new() -> Self {
        OpCounter {
            enabled: true,
            muls: RefCell::new(BTreeMap::new()),
            inversions: Cell::new(0),
            scalar_muls: Cell::new(0),
            curve_muls_in_scalar: Cell::new(0),
            curve_muls_outside: Cell::new(0),
            scalar_depth: Cell::new(0),
        }
    }

    pub fn disabled() -> Self {
        OpCounter {
            enabled: false,
            ..Self::new()
        }
    }

    pub fn is_enabled(&self) -> bool {
        self.enabled
    }

    pub fn snapshot(&self) -> OpCounts {
        OpCounts {
            muls: self.muls.borrow().clone(),
            inversions: self.inversions.get(),
            scalar_muls: self.scalar_muls.get(),
            curve_muls_in_scalar: self.curve_muls_in_scalar.get(),
            curve_muls_outside: self.curve_muls_outside.get(),
        }
    }

    pub fn reset(&self) {
        self.muls.borrow_mut().clear();
        self.inversions.set(0);
        self.scalar_muls.set(0);
        self.curve_muls_in_scalar.set(0);
        self.curve_muls_outside.set(0);
    }

    fn bump(cell: &Cell<u64>, by: u64) {
        cell.set(cell.get() + by);
    }

    fn record_muls(&self, modulus: &Prime, count: u64) {
        if self.enabled && count > 0 {
            *self
                .muls
                .borrow_mut()
                .entry(modulus.value().clone())
                .or_insert(0) += count;
        }
    }

    pub(crate) fn record_inversion(&self) {
        if self.enabled {
            Self::bump(&self.inversions, 1);
        }
    }

    pub(crate) fn record_curve_mul(&self) {
        if !self.enabled {
            return;
        }
        if self.scalar_depth.get() > 0 {
            Self::bump(&self.curve_muls_in_scalar, 1);
        } else {
            Self::bump(&self.curve_muls_outside, 1);
        }
    }

    pub(crate) fn enter_scalar_mul(&self) {
        if self.enabled {
            Self::bump(&self.scalar_muls, 1);
        }
        self.scalar_depth.set(self.scalar_depth.get() + 1);
    }

    pub(crate) fn leave_scalar_mul(&self) {
        self.scalar_depth.set(self.scalar_depth.get() - 1);
    }

    pub fn mul(&self, a: &FieldElement, b: &FieldElement) -> Result<FieldElement> {
        let product = a.mul(b)?;
        self.record_muls(&a.modulus, 1);
        Ok(product)
    }

    pub fn inv(&self, a: &FieldElement) -> Result<FieldElement> {
        let inverse = a.inv()?;
        self.record_inversion();
        Ok(inverse)
    }

    /// Left-to-right square-and-multiply. Records one multiplication per
    /// squaring and per conditional multiply.
    pub fn pow(&self, base: &FieldElement, exp: &BigUint) -> FieldElement {
        let modulus = base.modulus.value();
        if exp.is_zero() {
            return FieldElement::one(&base.modulus);
        }
        let bits = exp.bits();
        let mut acc = base.residue.clone();
        let mut count = 0u64;
        for bit in (0..bits - 1).rev() {
            acc = (&acc * &acc) % modulus;
            count += 1;
            if exp.bit(bit) {
                acc = (&acc * &base.residue) % modulus;
                count += 1;
            }
        }
        self.record_muls(&base.modulus, count);
        base.with_residue(acc)
    }

    /// Montgomery ladder over exactly `bits` exponent bits: two multiplications
    /// per bit whatever the exponent's value. `exp` must fit in `bits` bits.
    pub fn pow_ladder(&self, base: &FieldElement, exp: &BigUint, bits: u64) -> FieldElement {
        assert!(exp.bits() <= bits, "exponent wider than the ladder");
        let modulus = base.modulus.value();
        let mut r0 = BigUint::one() % modulus;
        let mut r1 = base.residue.clone();
        for bit in (0..bits).rev() {
            if exp.bit(bit) {
                r0 = (&r0 * &r1) % modulus;
                r1 = (&r1 * &r1) % modulus;
            } else {
                r1 = (&r0 * &r1) % modulus;
                r0 = (&r0 * &r0) % modulus;
            }
        }
        self.record_muls(&base.modulus, 2 * bits);
        base.with_residue(r0)
    }
}

/// `prod_{r != i} (at - x_r) / (x_i - x_r)`: the Lagrange basis polynomial for
/// node `i` evaluated at `at`. `i` is a zero-based index into `xs`.
pub fn lagrange_coeff_at(
    i: usize,
    xs: &[FieldElement],
    at: &FieldElement,
    ctx: &OpCounter,
) -> Result<FieldElement> {
    let xi = xs.get(i).ok_or(FieldError::IndexOutOfRange {
        index: i,
        len: xs.len(),
    })?;
    let mut numerator = FieldElement::one(xi.modulus());
    let mut denominator = FieldElement::one(xi.modulus());
    for (r, xr) in xs.iter().enumerate() {
        if r == i {
            continue;
        }
        let diff = xi.sub(xr)?;
        if diff.is_zero() {
            return Err(FieldError::DuplicateAbscissa(xr.residue.clone()));
        }
        numerator = ctx.mul(&numerator, &at.sub(xr)?)?;
        denominator = ctx.mul(&denominator, &diff)?;
    }
    ctx.mul(&numerator, &ctx.inv(&denominator)?)
}

/// `prod_{r != i} (-x_r) / (x_i - x_r)`, the weight of share `i` when
/// interpolating at zero.
pub fn lagrange_coeff_at_zero(
    i: usize,
    xs: &[FieldElement],
    ctx: &OpCounter,
) -> Result<FieldElement> {
    let xi = xs.get(i).ok_or(FieldError::IndexOutOfRange {
        index: i,
        len: xs.len(),
    })?;
    lagrange_coeff_at(i, xs, &FieldElement::zero(xi.modulus()), ctx)
}

/// Random prime with exactly `bits` bits.
pub fn random_prime<R: Rng + ?Sized>(rng: &mut R, bits: u64) -> BigUint {
    assert!(bits >= 2, "primes need at least two bits");
    loop {
        let mut candidate = rng.gen_biguint(bits);
        candidate.set_bit(bits - 1, true);
        candidate.set_bit(0, true);
        if bits == 2 {
            return BigUint::from(3u8);
        }
        if is_probable_prime(&candidate) {
            return candidate;
        }
    }
}
