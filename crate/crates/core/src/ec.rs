//! Short-Weierstrass curves `y^2 = x^3 + Ax + B` over prime fields, in affine
//! coordinates.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::{FieldElement, FieldError, OpCounter, Prime};

/// Largest modulus [`brute_force_order`] will enumerate.
pub const BRUTE_FORCE_LIMIT: u64 = 1_000_000;

#[derive(Debug, Error)]
pub enum EcError {
    #[error("curve is singular (4A^3 + 27B^2 = 0)")]
    Singular,
    #[error("curves over characteristic 2 or 3 are not supported")]
    SmallCharacteristic,
    #[error("point is not on the curve")]
    NotOnCurve,
    #[error("generator does not have the declared order {0}")]
    WrongGeneratorOrder(BigUint),
    #[error("modulus {0} too large for exhaustive enumeration")]
    ModulusTooLarge(BigUint),
    #[error("unknown builtin curve {0:?}")]
    UnknownBuiltin(String),
    #[error("bad curve parameter {field}: {reason}")]
    BadParameter { field: &'static str, reason: String },
    #[error("cannot read curve file: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot parse curve file: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Field(#[from] FieldError),
}

pub type Result<T> = std::result::Result<T, EcError>;

#[derive(Clone, PartialEq, Eq, Hash)]
pub enum CurvePoint {
    Infinity,
    Affine { x: FieldElement, y: FieldElement },
}

impl CurvePoint {
    pub fn affine(x: FieldElement, y: FieldElement) -> Self {
        CurvePoint::Affine { x, y }
    }

    pub fn is_infinity(&self) -> bool {
        matches!(self, CurvePoint::Infinity)
    }

    pub fn x(&self) -> Option<&FieldElement> {
        match self {
            CurvePoint::Infinity => None,
            CurvePoint::Affine { x, .. } => Some(x),
        }
    }

    pub fn y(&self) -> Option<&FieldElement> {
        match self {
            CurvePoint::Infinity => None,
            CurvePoint::Affine { y, .. } => Some(y),
        }
    }

    pub fn negate(&self) -> Self {
        match self {
            CurvePoint::Infinity => CurvePoint::Infinity,
            CurvePoint::Affine { x, y } => CurvePoint::Affine {
                x: x.clone(),
                y: y.neg(),
            },
        }
    }
}

impl fmt::Debug for CurvePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CurvePoint::Infinity => write!(f, "Infinity"),
            CurvePoint::Affine { x, y } => write!(f, "({x}, {y})"),
        }
    }
}

/// On-disk curve description. All integers are decimal strings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CurveFile {
    pub p: String,
    #[serde(rename = "A")]
    pub a: String,
    #[serde(rename = "B")]
    pub b: String,
    #[serde(rename = "Gx")]
    pub gx: String,
    #[serde(rename = "Gy")]
    pub gy: String,
    #[serde(default)]
    pub order: Option<String>,
    #[serde(default)]
    pub subgroup_order: Option<String>,
}

fn parse_decimal(field: &'static str, text: &str) -> Result<BigUint> {
    BigUint::parse_bytes(text.trim().as_bytes(), 10).ok_or_else(|| EcError::BadParameter {
        field,
        reason: format!("{text:?} is not a decimal integer"),
    })
}

#[derive(Debug)]
struct CurveInner {
    modulus: Prime,
    a: FieldElement,
    b: FieldElement,
    generator: CurvePoint,
    order: Option<BigUint>,
    subgroup_order: Option<Prime>,
}

/// Curve parameters with a distinguished generator. Cloning is cheap.
#[derive(Clone, Debug)]
pub struct CurveParams(Arc<CurveInner>);

impl PartialEq for CurveParams {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
            || (self.0.modulus == other.0.modulus
                && self.0.a == other.0.a
                && self.0.b == other.0.b
                && self.0.generator == other.0.generator
                && self.0.order == other.0.order
                && self.0.subgroup_order == other.0.subgroup_order)
    }
}

impl Eq for CurveParams {}

impl CurveParams {
    /// Validates non-singularity and that the generator lies on the curve. When
    /// `subgroup_order` is given it must be prime and annihilate the generator;
    /// when `order` is given it must annihilate the generator too.
    pub fn new(
        modulus: Prime,
        a: BigUint,
        b: BigUint,
        generator: (BigUint, BigUint),
        order: Option<BigUint>,
        subgroup_order: Option<BigUint>,
    ) -> Result<Self> {
        if modulus.value() <= &BigUint::from(3u8) {
            return Err(EcError::SmallCharacteristic);
        }
        let a = FieldElement::new(a, &modulus);
        let b = FieldElement::new(b, &modulus);
        let four_a3 = FieldElement::from_u64(4, &modulus).mul(&a.square().mul(&a)?)?;
        let twenty_seven_b2 = FieldElement::from_u64(27, &modulus).mul(&b.square())?;
        if four_a3.add(&twenty_seven_b2)?.is_zero() {
            return Err(EcError::Singular);
        }
        let generator = CurvePoint::affine(
            FieldElement::new(generator.0, &modulus),
            FieldElement::new(generator.1, &modulus),
        );
        let subgroup_order = subgroup_order.map(Prime::new).transpose()?;
        let curve = CurveParams(Arc::new(CurveInner {
            modulus,
            a,
            b,
            generator,
            order,
            subgroup_order,
        }));
        if !curve.is_on_curve(curve.generator()) {
            return Err(EcError::NotOnCurve);
        }
        let ctx = OpCounter::disabled();
        if let Some(r) = curve.subgroup_order() {
            if !curve.scalar_mul(r.value(), curve.generator(), &ctx)?.is_infinity() {
                return Err(EcError::WrongGeneratorOrder(r.value().clone()));
            }
        }
        if let Some(n) = curve.order() {
            if !curve.scalar_mul(n, curve.generator(), &ctx)?.is_infinity() {
                return Err(EcError::WrongGeneratorOrder(n.clone()));
            }
        }
        Ok(curve)
    }

    pub fn from_file_format(file: &CurveFile) -> Result<Self> {
        let modulus = Prime::new(parse_decimal("p", &file.p)?)?;
        let order = file
            .order
            .as_deref()
            .map(|o| parse_decimal("order", o))
            .transpose()?;
        let subgroup = file
            .subgroup_order
            .as_deref()
            .map(|o| parse_decimal("subgroup_order", o))
            .transpose()?;
        Self::new(
            modulus,
            parse_decimal("A", &file.a)?,
            parse_decimal("B", &file.b)?,
            (parse_decimal("Gx", &file.gx)?, parse_decimal("Gy", &file.gy)?),
            order,
            subgroup,
        )
    }

    pub fn to_file_format(&self) -> CurveFile {
        let (gx, gy) = match self.generator() {
            CurvePoint::Affine { x, y } => (x.to_string(), y.to_string()),
            CurvePoint::Infinity => unreachable!("generator is affine by construction"),
        };
        CurveFile {
            p: self.modulus().to_string(),
            a: self.a().to_string(),
            b: self.b().to_string(),
            gx,
            gy,
            order: self.order().map(|o| o.to_string()),
            subgroup_order: self.subgroup_order().map(|o| o.to_string()),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_file_format(&serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file_format()).expect("curve file serializes")
    }

    /// Builtin parameter sets: `test2017` (`y^2 = x^3 + 6x + 36 mod 2017`,
    /// generator of its order-37 subgroup) and `secp160r1`.
    pub fn builtin(name: &str) -> Result<Self> {
        match name {
            "test2017" => Self::from_json(include_str!("../fixtures/test2017.json")),
            "secp160r1" => Self::from_json(include_str!("../fixtures/secp160r1.json")),
            other => Err(EcError::UnknownBuiltin(other.to_string())),
        }
    }

    /// Resolves `builtin:<name>` or a path to a curve JSON file.
    pub fn load(reference: &str) -> Result<Self> {
        match reference.strip_prefix("builtin:") {
            Some(name) => Self::builtin(name),
            None => Self::from_json(&std::fs::read_to_string(Path::new(reference))?),
        }
    }

    pub fn modulus(&self) -> &Prime {
        &self.0.modulus
    }

    pub fn a(&self) -> &FieldElement {
        &self.0.a
    }

    pub fn b(&self) -> &FieldElement {
        &self.0.b
    }

    pub fn generator(&self) -> &CurvePoint {
        &self.0.generator
    }

    pub fn order(&self) -> Option<&BigUint> {
        self.0.order.as_ref()
    }

    pub fn subgroup_order(&self) -> Option<&Prime> {
        self.0.subgroup_order.as_ref()
    }

    /// Modulus of the scalar ring: the prime subgroup order when known, else the
    /// full group order.
    pub fn scalar_modulus(&self) -> Option<BigUint> {
        self.subgroup_order()
            .map(|r| r.value().clone())
            .or_else(|| self.order().cloned())
    }

    pub fn point(&self, x: u64, y: u64) -> CurvePoint {
        CurvePoint::affine(
            FieldElement::from_u64(x, self.modulus()),
            FieldElement::from_u64(y, self.modulus()),
        )
    }

    pub fn point_from_biguints(&self, x: BigUint, y: BigUint) -> Result<CurvePoint> {
        if x >= *self.modulus().value() || y >= *self.modulus().value() {
            return Err(EcError::NotOnCurve);
        }
        let pt = CurvePoint::affine(
            FieldElement::new(x, self.modulus()),
            FieldElement::new(y, self.modulus()),
        );
        if self.is_on_curve(&pt) {
            Ok(pt)
        } else {
            Err(EcError::NotOnCurve)
        }
    }

    /// Right-hand side `x^3 + Ax + B`.
    pub fn rhs(&self, x: &FieldElement) -> FieldElement {
        let x3 = x.square().mul(x).expect("same field");
        let ax = self.a().mul(x).expect("same field");
        x3.add(&ax).and_then(|s| s.add(self.b())).expect("same field")
    }

    pub fn is_on_curve(&self, pt: &CurvePoint) -> bool {
        match pt {
            CurvePoint::Infinity => true,
            CurvePoint::Affine { x, y } => {
                x.modulus() == self.modulus()
                    && y.modulus() == self.modulus()
                    && y.square() == self.rhs(x)
            }
        }
    }

    fn ensure_on_curve(&self, pt: &CurvePoint) -> Result<()> {
        if self.is_on_curve(pt) {
            Ok(())
        } else {
            Err(EcError::NotOnCurve)
        }
    }

    fn mul(&self, a: &FieldElement, b: &FieldElement, ctx: &OpCounter) -> FieldElement {
        ctx.record_curve_mul();
        a.mul(b).expect("curve field")
    }

    fn inv(&self, a: &FieldElement, ctx: &OpCounter) -> FieldElement {
        ctx.record_inversion();
        a.inv().expect("nonzero denominator")
    }

    fn add_unchecked(&self, p1: &CurvePoint, p2: &CurvePoint, ctx: &OpCounter) -> CurvePoint {
        let (x1, y1, x2, y2) = match (p1, p2) {
            (CurvePoint::Infinity, _) => return p2.clone(),
            (_, CurvePoint::Infinity) => return p1.clone(),
            (CurvePoint::Affine { x: x1, y: y1 }, CurvePoint::Affine { x: x2, y: y2 }) => {
                (x1, y1, x2, y2)
            }
        };
        if x1 == x2 {
            if y1 == y2 && !y1.is_zero() {
                return self.double_unchecked(p1, ctx);
            }
            // P + (-P), including the 2-torsion case y = 0
            return CurvePoint::Infinity;
        }
        let slope = self.mul(
            &y2.sub(y1).expect("curve field"),
            &self.inv(&x2.sub(x1).expect("curve field"), ctx),
            ctx,
        );
        let x3 = self
            .mul(&slope, &slope, ctx)
            .sub(x1)
            .and_then(|v| v.sub(x2))
            .expect("curve field");
        let y3 = self
            .mul(&slope, &x1.sub(&x3).expect("curve field"), ctx)
            .sub(y1)
            .expect("curve field");
        CurvePoint::Affine { x: x3, y: y3 }
    }

    fn double_unchecked(&self, pt: &CurvePoint, ctx: &OpCounter) -> CurvePoint {
        let (x, y) = match pt {
            CurvePoint::Infinity => return CurvePoint::Infinity,
            CurvePoint::Affine { x, y } => (x, y),
        };
        if y.is_zero() {
            return CurvePoint::Infinity;
        }
        let x_sq = self.mul(x, x, ctx);
        let numerator = x_sq
            .add(&x_sq)
            .and_then(|v| v.add(&x_sq))
            .and_then(|v| v.add(self.a()))
            .expect("curve field");
        let slope = self.mul(&numerator, &self.inv(&y.double(), ctx), ctx);
        let x3 = self
            .mul(&slope, &slope, ctx)
            .sub(&x.double())
            .expect("curve field");
        let y3 = self
            .mul(&slope, &x.sub(&x3).expect("curve field"), ctx)
            .sub(y)
            .expect("curve field");
        CurvePoint::Affine { x: x3, y: y3 }
    }

    /// Chord-and-tangent addition.
    pub fn add(&self, p1: &CurvePoint, p2: &CurvePoint, ctx: &OpCounter) -> Result<CurvePoint> {
        self.ensure_on_curve(p1)?;
        self.ensure_on_curve(p2)?;
        Ok(self.add_unchecked(p1, p2, ctx))
    }

    pub fn double(&self, pt: &CurvePoint, ctx: &OpCounter) -> Result<CurvePoint> {
        self.ensure_on_curve(pt)?;
        Ok(self.double_unchecked(pt, ctx))
    }

    /// Left-to-right double-and-add. Counts as one scalar multiplication.
    pub fn scalar_mul(&self, k: &BigUint, pt: &CurvePoint, ctx: &OpCounter) -> Result<CurvePoint> {
        self.ensure_on_curve(pt)?;
        ctx.enter_scalar_mul();
        let mut acc = CurvePoint::Infinity;
        for bit in (0..k.bits()).rev() {
            acc = self.double_unchecked(&acc, ctx);
            if k.bit(bit) {
                acc = self.add_unchecked(&acc, pt, ctx);
            }
        }
        ctx.leave_scalar_mul();
        Ok(acc)
    }

    /// Scalar multiplication by a field element's residue.
    pub fn scalar_mul_fe(
        &self,
        k: &FieldElement,
        pt: &CurvePoint,
        ctx: &OpCounter,
    ) -> Result<CurvePoint> {
        self.scalar_mul(k.residue(), pt, ctx)
    }

    /// Sum of points, counted as point additions.
    pub fn sum<'a, I>(&self, points: I, ctx: &OpCounter) -> Result<CurvePoint>
    where
        I: IntoIterator<Item = &'a CurvePoint>,
    {
        let mut acc = CurvePoint::Infinity;
        for pt in points {
            acc = self.add(&acc, pt, ctx)?;
        }
        Ok(acc)
    }
}

fn small_modulus(curve: &CurveParams) -> Result<u64> {
    curve
        .modulus()
        .to_u64()
        .filter(|&p| p <= BRUTE_FORCE_LIMIT)
        .ok_or_else(|| EcError::ModulusTooLarge(curve.modulus().value().clone()))
}

/// Counts every affine solution plus the point at infinity.
pub fn brute_force_order(curve: &CurveParams) -> Result<BigUint> {
    let p = small_modulus(curve)?;
    let a = curve.a().to_string().parse::<u64>().expect("small field");
    let b = curve.b().to_string().parse::<u64>().expect("small field");
    let mut roots = vec![0u64; p as usize];
    for y in 0..p {
        roots[(y * y % p) as usize] += 1;
    }
    let mut count = 1u64;
    for x in 0..p {
        let rhs = ((x * x % p) * x % p + a * x % p + b) % p;
        count += roots[rhs as usize];
    }
    Ok(BigUint::from(count))
}

/// Every affine point of a small curve, in `(x, y)` order.
pub fn enumerate_points(curve: &CurveParams) -> Result<Vec<CurvePoint>> {
    let p = small_modulus(curve)?;
    let mut points = Vec::new();
    for x in 0..p {
        let xf = FieldElement::from_u64(x, curve.modulus());
        let rhs = curve.rhs(&xf);
        for y in 0..p {
            let yf = FieldElement::from_u64(y, curve.modulus());
            if yf.square() == rhs {
                points.push(CurvePoint::affine(xf.clone(), yf));
            }
        }
    }
    Ok(points)
}

/// Order of a point by repeated addition, bounded by `limit` steps.
pub fn brute_force_point_order(curve: &CurveParams, pt: &CurvePoint, limit: u64) -> Option<u64> {
    let ctx = OpCounter::disabled();
    let mut acc = pt.clone();
    for k in 1..=limit {
        if acc.is_infinity() {
            return Some(k);
        }
        acc = curve.add(&acc, pt, &ctx).ok()?;
    }
    None
}

/// Outcome of an exhaustive discrete-logarithm search.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DlogSearch {
    pub scalar: Option<BigUint>,
    /// Group operations spent before the answer (or the bound) was reached.
    pub steps: u64,
}

/// Finds `k < bound` with `k * base = target` by walking `0, base, 2 base, ...`.
pub fn brute_force_dlog(
    curve: &CurveParams,
    base: &CurvePoint,
    target: &CurvePoint,
    bound: u64,
) -> Result<DlogSearch> {
    curve.ensure_on_curve(base)?;
    curve.ensure_on_curve(target)?;
    let ctx = OpCounter::disabled();
    let mut acc = CurvePoint::Infinity;
    for k in 0..bound {
        if &acc == target {
            return Ok(DlogSearch {
                scalar: Some(BigUint::from(k)),
                steps: k,
            });
        }
        acc = curve.add_unchecked(&acc, base, &ctx);
    }
    Ok(DlogSearch {
        scalar: None,
        steps: bound,
    })
}

/// True when `k * pt` is the identity for the scalar ring modulus.
pub fn has_scalar_order(curve: &CurveParams, pt: &CurvePoint) -> Result<bool> {
    let Some(order) = curve.scalar_modulus() else {
        return Ok(false);
    };
    Ok(curve
        .scalar_mul(&order, pt, &OpCounter::disabled())?
        .is_infinity())
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::{One, Zero};
    use proptest::prelude::*;

    fn test_curve() -> CurveParams {
        CurveParams::builtin("test2017").unwrap()
    }

    /// Same curve with (0, 6) as generator, which generates the full group.
    fn full_group_curve() -> CurveParams {
        CurveParams::new(
            Prime::from_u64(2017).unwrap(),
            6u8.into(),
            36u8.into(),
            (0u8.into(), 6u8.into()),
            None,
            None,
        )
        .unwrap()
    }

    fn toy_mod5() -> CurveParams {
        CurveParams::new(
            Prime::from_u64(5).unwrap(),
            0u8.into(),
            1u8.into(),
            (0u8.into(), 1u8.into()),
            None,
            None,
        )
        .unwrap()
    }

    fn repeated_addition(curve: &CurveParams, k: u64, pt: &CurvePoint) -> CurvePoint {
        let ctx = OpCounter::disabled();
        let mut acc = CurvePoint::Infinity;
        for _ in 0..k {
            acc = curve.add(&acc, pt, &ctx).unwrap();
        }
        acc
    }

    #[test]
    fn on_curve_examples() {
        let c = test_curve();
        assert!(c.is_on_curve(&c.point(0, 6)));
        assert!(!c.is_on_curve(&c.point(0, 7)));
        assert!(c.is_on_curve(&CurvePoint::Infinity));
    }

    #[test]
    fn doubling_matches_hand_computation() {
        // lambda = (3*0 + 6) / 12 = 1/2 = 1009 mod 2017
        // x3 = lambda^2 - 0 = 1009^2 mod 2017 = 1513, y3 = lambda*(0 - 1513) - 6 = 246
        let c = test_curve();
        let ctx = OpCounter::disabled();
        let p = c.point(0, 6);
        assert_eq!(c.add(&p, &p, &ctx).unwrap(), c.point(1513, 246));
    }

    #[test]
    fn identity_and_inverse() {
        let c = test_curve();
        let ctx = OpCounter::disabled();
        let p = c.point(0, 6);
        assert_eq!(c.add(&p, &CurvePoint::Infinity, &ctx).unwrap(), p);
        assert_eq!(c.add(&CurvePoint::Infinity, &p, &ctx).unwrap(), p);
        assert!(c.add(&p, &p.negate(), &ctx).unwrap().is_infinity());
        assert!(matches!(c.add(&p, &c.point(0, 7), &ctx), Err(EcError::NotOnCurve)));
        assert!(matches!(
            c.scalar_mul(&BigUint::from(3u8), &c.point(0, 7), &ctx),
            Err(EcError::NotOnCurve)
        ));
    }

    #[test]
    fn group_orders_by_enumeration() {
        let full = full_group_curve();
        let order = brute_force_order(&full).unwrap();
        assert_eq!(order, BigUint::from(2035u32));
        assert_eq!(enumerate_points(&full).unwrap().len() + 1, 2035);
        let ctx = OpCounter::disabled();
        assert!(full.scalar_mul(&order, full.generator(), &ctx).unwrap().is_infinity());
        assert_eq!(brute_force_point_order(&full, &full.point(0, 6), 5000), Some(2035));
        assert_eq!(brute_force_order(&toy_mod5()).unwrap(), BigUint::from(6u8));

        let c = test_curve();
        assert_eq!(c.order(), Some(&BigUint::from(2035u32)));
        assert_eq!(c.subgroup_order().unwrap().to_u64(), Some(37));
        assert_eq!(brute_force_point_order(&c, c.generator(), 100), Some(37));
    }

    #[test]
    fn singular_and_bad_generators_rejected() {
        let p = Prime::from_u64(2017).unwrap();
        let singular = CurveParams::new(p.clone(), 0u8.into(), 0u8.into(), (1u8.into(), 1u8.into()), None, None);
        assert!(matches!(singular, Err(EcError::Singular)));
        let off = CurveParams::new(p.clone(), 6u8.into(), 36u8.into(), (0u8.into(), 7u8.into()), None, None);
        assert!(matches!(off, Err(EcError::NotOnCurve)));
        let wrong = CurveParams::new(p, 6u8.into(), 36u8.into(), (0u8.into(), 6u8.into()), None, Some(37u8.into()));
        assert!(matches!(wrong, Err(EcError::WrongGeneratorOrder(_))));
    }

    #[test]
    fn brute_force_refuses_large_fields() {
        let c = CurveParams::builtin("secp160r1").unwrap();
        assert!(matches!(brute_force_order(&c), Err(EcError::ModulusTooLarge(_))));
    }

    #[test]
    fn closure_exhaustive_on_toy_curve() {
        let c = toy_mod5();
        let ctx = OpCounter::disabled();
        let mut points = enumerate_points(&c).unwrap();
        points.push(CurvePoint::Infinity);
        for a in &points {
            for b in &points {
                let s = c.add(a, b, &ctx).unwrap();
                assert!(c.is_on_curve(&s));
                assert_eq!(s, c.add(b, a, &ctx).unwrap());
            }
        }
    }

    #[test]
    fn scalar_mul_matches_repeated_addition_up_to_50() {
        let c = full_group_curve();
        let ctx = OpCounter::disabled();
        for k in 0..=50u64 {
            assert_eq!(
                c.scalar_mul(&BigUint::from(k), c.generator(), &ctx).unwrap(),
                repeated_addition(&c, k, c.generator()),
                "k = {k}"
            );
        }
        assert!(c.scalar_mul(&BigUint::zero(), c.generator(), &ctx).unwrap().is_infinity());
        assert_eq!(&c.scalar_mul(&BigUint::one(), c.generator(), &ctx).unwrap(), c.generator());
    }

    #[test]
    fn secp160r1_generator_has_prime_order() {
        let c = CurveParams::builtin("secp160r1").unwrap();
        let r = c.subgroup_order().unwrap().clone();
        assert_eq!(r.bits(), 161);
        assert!(has_scalar_order(&c, c.generator()).unwrap());
    }

    #[test]
    fn scalar_mul_counts_one_event() {
        let c = CurveParams::builtin("secp160r1").unwrap();
        let ctx = OpCounter::new();
        let k = c.subgroup_order().unwrap().value() - 12345u32;
        c.scalar_mul(&k, c.generator(), &ctx).unwrap();
        let counts = ctx.snapshot();
        assert_eq!(counts.scalar_muls, 1);
        assert!(counts.curve_muls_in_scalar > 0);
        assert_eq!(counts.curve_muls_outside, 0);
    }

    #[test]
    fn dlog_search_finds_small_scalars() {
        let c = test_curve();
        let ctx = OpCounter::disabled();
        let target = c.scalar_mul(&BigUint::from(23u8), c.generator(), &ctx).unwrap();
        let found = brute_force_dlog(&c, c.generator(), &target, 37).unwrap();
        assert_eq!(found.scalar, Some(BigUint::from(23u8)));
        assert_eq!(found.steps, 23);
    }

    #[test]
    fn curve_file_round_trip() {
        let c = test_curve();
        let again = CurveParams::from_json(&c.to_json()).unwrap();
        assert_eq!(c, again);
        assert!(matches!(CurveParams::load("builtin:nope"), Err(EcError::UnknownBuiltin(_))));
        assert!(matches!(
            CurveParams::from_json(r#"{"p":"2017","A":"x","B":"36","Gx":"0","Gy":"6"}"#),
            Err(EcError::BadParameter { field: "A", .. })
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]
        #[test]
        fn group_law_on_random_triples(a in 0u64..2035, b in 0u64..2035, k in 0u64..2035) {
            let c = full_group_curve();
            let ctx = OpCounter::disabled();
            let g = c.generator();
            let pa = c.scalar_mul(&BigUint::from(a), g, &ctx).unwrap();
            let pb = c.scalar_mul(&BigUint::from(b), g, &ctx).unwrap();
            let pk = c.scalar_mul(&BigUint::from(k), g, &ctx).unwrap();
            let left = c.add(&c.add(&pa, &pb, &ctx).unwrap(), &pk, &ctx).unwrap();
            let right = c.add(&pa, &c.add(&pb, &pk, &ctx).unwrap(), &ctx).unwrap();
            prop_assert_eq!(&left, &right);
            prop_assert!(c.is_on_curve(&left));
            prop_assert_eq!(c.add(&pa, &pb, &ctx).unwrap(), c.add(&pb, &pa, &ctx).unwrap());
            let sum = c.scalar_mul(&BigUint::from(a + b), g, &ctx).unwrap();
            prop_assert_eq!(sum, c.add(&pa, &pb, &ctx).unwrap());
        }
    }
}
