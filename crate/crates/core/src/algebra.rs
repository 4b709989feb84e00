//! Bilinear-group layer.
//!
//! The schemes in this crate are written against a symmetric pairing
//! `e: G1 x G1 -> GT`. BLS12-381 is asymmetric, so a [`G1Element`] is stored
//! as a mirrored pair `(g1^a, g2^a)` and `pair(x, y) := e(x.left, y.right)`.
//! Every group operation goes through a [`PairingContext`], which counts it
//! in an [`OpCounter`].
//!
//! With the `oracle` feature each element also carries its discrete log with
//! respect to `g` (or `e(g, g)`) whenever that log is derivable from the
//! scalars that produced it. Tests use this to check scheme equations by
//! plain arithmetic mod q.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::atomic::{AtomicU64, Ordering};

use bls12_381_plus::{
    multi_miller_loop, pairing, G1Affine, G1Projective, G2Affine, G2Prepared, G2Projective, Gt,
};
use rand::{CryptoRng, RngCore};
use sha2::{Digest, Sha512};

use crate::error::{Error, Result};

/// Domain tag prepended to every `hash_to_scalar` input.
pub const H1_DOMAIN_TAG: &[u8] = b"RBE-H1-v1";

/// Security levels this build can instantiate.
pub const SUPPORTED_SECURITY_LEVELS: &[u32] = &[128];

/// Big-endian encoding of the group order q of BLS12-381.
pub const GROUP_ORDER_BE: [u8; 32] = [
    0x73, 0xed, 0xa7, 0x53, 0x29, 0x9d, 0x7d, 0x48, 0x33, 0x39, 0xd8, 0x08, 0x09, 0xa1, 0xd8, 0x05,
    0x53, 0xbd, 0xa4, 0x02, 0xff, 0xfe, 0x5b, 0xfe, 0xff, 0xff, 0xff, 0xff, 0x00, 0x00, 0x00, 0x01,
];

pub const SCALAR_BYTES: usize = 32;
pub const G1_BYTES: usize = 48 + 96;
pub const GT_BYTES: usize = 576;

pub const TAG_G1: u8 = 0x01;
pub const TAG_GT: u8 = 0x02;
pub const TAG_SCALAR: u8 = 0x03;

static NEXT_CONTEXT_ID: AtomicU64 = AtomicU64::new(1);

/// Element of Z_q.
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct Scalar(bls12_381_plus::Scalar);

impl Scalar {
    pub const ZERO: Scalar = Scalar(bls12_381_plus::Scalar::ZERO);
    pub const ONE: Scalar = Scalar(bls12_381_plus::Scalar::ONE);

    pub fn from_u64(v: u64) -> Self {
        Scalar(bls12_381_plus::Scalar::from(v))
    }

    pub fn is_zero(&self) -> bool {
        *self == Scalar::ZERO
    }

    pub fn invert(&self) -> Option<Scalar> {
        Option::from(self.0.invert()).map(Scalar)
    }

    pub fn to_be_bytes(&self) -> [u8; SCALAR_BYTES] {
        self.0.to_be_bytes()
    }

    pub fn from_be_bytes(bytes: &[u8]) -> Result<Scalar> {
        let arr: [u8; SCALAR_BYTES] = bytes
            .try_into()
            .map_err(|_| Error::Decode(format!("scalar needs {SCALAR_BYTES} bytes")))?;
        Option::from(bls12_381_plus::Scalar::from_be_bytes(&arr))
            .map(Scalar)
            .ok_or_else(|| Error::Decode("scalar is not reduced mod q".into()))
    }

    /// Reduces 64 uniformly random bytes mod q.
    pub fn from_wide(bytes: &[u8; 64]) -> Scalar {
        Scalar(bls12_381_plus::Scalar::from_bytes_wide(bytes))
    }

    /// Uniform draw from [1, q-1].
    pub fn random_nonzero<R: RngCore + CryptoRng>(rng: &mut R) -> Scalar {
        loop {
            let mut wide = [0u8; 64];
            rng.fill_bytes(&mut wide);
            let s = Scalar::from_wide(&wide);
            if !s.is_zero() {
                return s;
            }
        }
    }

    pub fn sum<'a, I: IntoIterator<Item = &'a Scalar>>(items: I) -> Scalar {
        items.into_iter().fold(Scalar::ZERO, |acc, s| acc + *s)
    }
}

impl Add for Scalar {
    type Output = Scalar;
    fn add(self, rhs: Scalar) -> Scalar {
        Scalar(self.0 + rhs.0)
    }
}

impl Sub for Scalar {
    type Output = Scalar;
    fn sub(self, rhs: Scalar) -> Scalar {
        Scalar(self.0 - rhs.0)
    }
}

impl Mul for Scalar {
    type Output = Scalar;
    fn mul(self, rhs: Scalar) -> Scalar {
        Scalar(self.0 * rhs.0)
    }
}

impl Neg for Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        Scalar(-self.0)
    }
}

impl fmt::Debug for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Scalar({})", hex::encode(self.to_be_bytes()))
    }
}

/// Uniform nonzero scalar; free-function form of [`Scalar::random_nonzero`].
pub fn rand_nonzero_scalar<R: RngCore + CryptoRng>(rng: &mut R) -> Scalar {
    Scalar::random_nonzero(rng)
}

/// Discrete-log annotation. Zero-sized unless the `oracle` feature is on.
#[derive(Clone, Copy, Default)]
struct Dlog {
    #[cfg(feature = "oracle")]
    value: Option<Scalar>,
}

#[allow(unused_variables)]
impl Dlog {
    fn known(s: Scalar) -> Self {
        Dlog {
            #[cfg(feature = "oracle")]
            value: Some(s),
        }
    }

    fn unknown() -> Self {
        Dlog::default()
    }

    fn lift2(a: Dlog, b: Dlog, f: impl Fn(Scalar, Scalar) -> Scalar) -> Dlog {
        #[cfg(feature = "oracle")]
        {
            Dlog {
                value: a.value.zip(b.value).map(|(x, y)| f(x, y)),
            }
        }
        #[cfg(not(feature = "oracle"))]
        Dlog {}
    }

    fn scale(self, s: Scalar) -> Dlog {
        Dlog::lift2(self, Dlog::known(s), |x, y| x * y)
    }
}

/// Element of the (symmetric-contract) source group.
#[derive(Clone)]
pub struct G1Element {
    left: G1Projective,
    right: G2Projective,
    ctx: u64,
    dlog: Dlog,
}

/// Element of the target group.
#[derive(Clone)]
pub struct GtElement {
    value: Gt,
    ctx: u64,
    dlog: Dlog,
}

impl PartialEq for G1Element {
    fn eq(&self, other: &Self) -> bool {
        self.left == other.left && self.right == other.right
    }
}
impl Eq for G1Element {}

impl PartialEq for GtElement {
    fn eq(&self, other: &Self) -> bool {
        self.value == other.value
    }
}
impl Eq for GtElement {}

impl G1Element {
    /// Compressed left half followed by compressed right half.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(G1_BYTES);
        out.extend_from_slice(&G1Affine::from(self.left).to_compressed());
        out.extend_from_slice(&G2Affine::from(self.right).to_compressed());
        out
    }

    pub fn is_identity(&self) -> bool {
        bool::from(self.left.is_identity())
    }

    pub fn fingerprint(&self) -> String {
        fingerprint(&self.to_bytes())
    }

    /// Discrete log w.r.t. the generator, when derivable.
    #[cfg(feature = "oracle")]
    pub fn dlog(&self) -> Option<Scalar> {
        self.dlog.value
    }
}

impl GtElement {
    pub fn to_bytes(&self) -> Vec<u8> {
        self.value.to_bytes().to_vec()
    }

    pub fn is_identity(&self) -> bool {
        self.value == Gt::IDENTITY
    }

    pub fn fingerprint(&self) -> String {
        fingerprint(&self.to_bytes())
    }

    /// Discrete log w.r.t. `e(g, g)`, when derivable.
    #[cfg(feature = "oracle")]
    pub fn dlog(&self) -> Option<Scalar> {
        self.dlog.value
    }
}

impl fmt::Debug for G1Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "G1({})", self.fingerprint())
    }
}

impl fmt::Debug for GtElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GT({})", self.fingerprint())
    }
}

pub(crate) fn fingerprint(bytes: &[u8]) -> String {
    let digest = sha2::Sha256::digest(bytes);
    hex::encode(&digest[..8])
}

/// Counts of group operations. Plain values; see [`OpCounter`] for the live
/// counters.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize)]
pub struct OpCounts {
    pub exp_g1: u64,
    pub exp_gt: u64,
    pub pairings: u64,
    pub mul_g1: u64,
    pub mul_gt: u64,
    pub hashes: u64,
}

impl Sub for OpCounts {
    type Output = OpCounts;
    fn sub(self, rhs: OpCounts) -> OpCounts {
        OpCounts {
            exp_g1: self.exp_g1 - rhs.exp_g1,
            exp_gt: self.exp_gt - rhs.exp_gt,
            pairings: self.pairings - rhs.pairings,
            mul_g1: self.mul_g1 - rhs.mul_g1,
            mul_gt: self.mul_gt - rhs.mul_gt,
            hashes: self.hashes - rhs.hashes,
        }
    }
}

impl Add for OpCounts {
    type Output = OpCounts;
    fn add(self, rhs: OpCounts) -> OpCounts {
        OpCounts {
            exp_g1: self.exp_g1 + rhs.exp_g1,
            exp_gt: self.exp_gt + rhs.exp_gt,
            pairings: self.pairings + rhs.pairings,
            mul_g1: self.mul_g1 + rhs.mul_g1,
            mul_gt: self.mul_gt + rhs.mul_gt,
            hashes: self.hashes + rhs.hashes,
        }
    }
}

impl fmt::Display for OpCounts {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "exp_g1={} exp_gt={} pairings={} mul_g1={} mul_gt={} hashes={}",
            self.exp_g1, self.exp_gt, self.pairings, self.mul_g1, self.mul_gt, self.hashes
        )
    }
}

/// Live operation counters. Diffs are exact only when a single thread uses
/// the context during the measured scope.
#[derive(Debug, Default)]
pub struct OpCounter {
    exp_g1: AtomicU64,
    exp_gt: AtomicU64,
    pairings: AtomicU64,
    mul_g1: AtomicU64,
    mul_gt: AtomicU64,
    hashes: AtomicU64,
}

impl OpCounter {
    pub fn snapshot(&self) -> OpCounts {
        OpCounts {
            exp_g1: self.exp_g1.load(Ordering::SeqCst),
            exp_gt: self.exp_gt.load(Ordering::SeqCst),
            pairings: self.pairings.load(Ordering::SeqCst),
            mul_g1: self.mul_g1.load(Ordering::SeqCst),
            mul_gt: self.mul_gt.load(Ordering::SeqCst),
            hashes: self.hashes.load(Ordering::SeqCst),
        }
    }

    fn bump(field: &AtomicU64) {
        field.fetch_add(1, Ordering::SeqCst);
    }
}

/// A tagged element record as it appears on the wire.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum WireElement {
    G1(G1Element),
    Gt(GtElement),
    Scalar(Scalar),
}

impl WireElement {
    /// `tag || u16 BE length || canonical bytes`
    pub fn encode_into(&self, out: &mut Vec<u8>) {
        let (tag, bytes) = match self {
            WireElement::G1(e) => (TAG_G1, e.to_bytes()),
            WireElement::Gt(e) => (TAG_GT, e.to_bytes()),
            WireElement::Scalar(s) => (TAG_SCALAR, s.to_be_bytes().to_vec()),
        };
        out.push(tag);
        out.extend_from_slice(&(bytes.len() as u16).to_be_bytes());
        out.extend_from_slice(&bytes);
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.encode_into(&mut out);
        out
    }

    pub fn into_g1(self) -> Result<G1Element> {
        match self {
            WireElement::G1(e) => Ok(e),
            _ => Err(Error::Decode("expected a G1 record".into())),
        }
    }

    pub fn into_gt(self) -> Result<GtElement> {
        match self {
            WireElement::Gt(e) => Ok(e),
            _ => Err(Error::Decode("expected a GT record".into())),
        }
    }

    pub fn into_scalar(self) -> Result<Scalar> {
        match self {
            WireElement::Scalar(s) => Ok(s),
            _ => Err(Error::Decode("expected a scalar record".into())),
        }
    }
}

/// Group parameters plus the operation counters.
pub struct PairingContext {
    id: u64,
    security_level: u32,
    generator: G1Element,
    gt_generator: GtElement,
    counter: OpCounter,
}

impl fmt::Debug for PairingContext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PairingContext")
            .field("id", &self.id)
            .field("security_level", &self.security_level)
            .finish()
    }
}

/// Instantiates the pairing for a security level in
/// [`SUPPORTED_SECURITY_LEVELS`].
pub fn setup_pairing(security_level: u32) -> Result<PairingContext> {
    if !SUPPORTED_SECURITY_LEVELS.contains(&security_level) {
        return Err(Error::UnsupportedSecurityLevel(security_level));
    }
    let id = NEXT_CONTEXT_ID.fetch_add(1, Ordering::Relaxed);
    let generator = G1Element {
        left: G1Projective::GENERATOR,
        right: G2Projective::GENERATOR,
        ctx: id,
        dlog: Dlog::known(Scalar::ONE),
    };
    let gt_generator = GtElement {
        value: pairing(&G1Affine::generator(), &G2Affine::generator()),
        ctx: id,
        dlog: Dlog::known(Scalar::ONE),
    };
    Ok(PairingContext {
        id,
        security_level,
        generator,
        gt_generator,
        counter: OpCounter::default(),
    })
}

impl PairingContext {
    pub fn security_level(&self) -> u32 {
        self.security_level
    }

    /// Bit length of the group order q.
    pub fn order_bits(&self) -> u32 {
        let lead = GROUP_ORDER_BE.iter().position(|b| *b != 0).unwrap_or(32);
        ((32 - lead) * 8) as u32 - GROUP_ORDER_BE[lead].leading_zeros()
    }

    /// Width of H1's input domain in bits; `None` means arbitrary-length
    /// byte strings.
    pub fn hash_width(&self) -> Option<u32> {
        None
    }

    pub fn generator(&self) -> &G1Element {
        &self.generator
    }

    /// `e(g, g)`
    pub fn gt_generator(&self) -> &GtElement {
        &self.gt_generator
    }

    pub fn counter(&self) -> &OpCounter {
        &self.counter
    }

    /// Runs `f` and returns its result with the operation counts it caused.
    pub fn measure<T>(&self, f: impl FnOnce() -> T) -> (T, OpCounts) {
        let before = self.counter.snapshot();
        let out = f();
        (out, self.counter.snapshot() - before)
    }

    pub fn identity_g1(&self) -> G1Element {
        G1Element {
            left: G1Projective::IDENTITY,
            right: G2Projective::IDENTITY,
            ctx: self.id,
            dlog: Dlog::known(Scalar::ZERO),
        }
    }

    pub fn identity_gt(&self) -> GtElement {
        GtElement {
            value: Gt::IDENTITY,
            ctx: self.id,
            dlog: Dlog::known(Scalar::ZERO),
        }
    }

    fn check_g1(&self, x: &G1Element) -> Result<()> {
        if x.ctx == self.id {
            Ok(())
        } else {
            Err(Error::ContextMismatch)
        }
    }

    fn check_gt(&self, x: &GtElement) -> Result<()> {
        if x.ctx == self.id {
            Ok(())
        } else {
            Err(Error::ContextMismatch)
        }
    }

    pub fn exp_g1(&self, x: &G1Element, s: &Scalar) -> Result<G1Element> {
        self.check_g1(x)?;
        OpCounter::bump(&self.counter.exp_g1);
        Ok(G1Element {
            left: x.left * s.0,
            right: x.right * s.0,
            ctx: self.id,
            dlog: x.dlog.scale(*s),
        })
    }

    /// `g^s`
    pub fn g_pow(&self, s: &Scalar) -> Result<G1Element> {
        self.exp_g1(&self.generator, s)
    }

    pub fn exp_gt(&self, x: &GtElement, s: &Scalar) -> Result<GtElement> {
        self.check_gt(x)?;
        OpCounter::bump(&self.counter.exp_gt);
        Ok(GtElement {
            value: x.value * s.0,
            ctx: self.id,
            dlog: x.dlog.scale(*s),
        })
    }

    pub fn mul_g1(&self, x: &G1Element, y: &G1Element) -> Result<G1Element> {
        self.check_g1(x)?;
        self.check_g1(y)?;
        OpCounter::bump(&self.counter.mul_g1);
        Ok(G1Element {
            left: x.left + y.left,
            right: x.right + y.right,
            ctx: self.id,
            dlog: Dlog::lift2(x.dlog, y.dlog, |a, b| a + b),
        })
    }

    /// `x / y`, counted as one multiplication.
    pub fn div_g1(&self, x: &G1Element, y: &G1Element) -> Result<G1Element> {
        self.check_g1(x)?;
        self.check_g1(y)?;
        OpCounter::bump(&self.counter.mul_g1);
        Ok(G1Element {
            left: x.left - y.left,
            right: x.right - y.right,
            ctx: self.id,
            dlog: Dlog::lift2(x.dlog, y.dlog, |a, b| a - b),
        })
    }

    pub fn mul_gt(&self, x: &GtElement, y: &GtElement) -> Result<GtElement> {
        self.check_gt(x)?;
        self.check_gt(y)?;
        OpCounter::bump(&self.counter.mul_gt);
        Ok(GtElement {
            value: x.value + y.value,
            ctx: self.id,
            dlog: Dlog::lift2(x.dlog, y.dlog, |a, b| a + b),
        })
    }

    /// `x / y`, counted as one multiplication.
    pub fn div_gt(&self, x: &GtElement, y: &GtElement) -> Result<GtElement> {
        self.check_gt(x)?;
        self.check_gt(y)?;
        OpCounter::bump(&self.counter.mul_gt);
        Ok(GtElement {
            value: x.value - y.value,
            ctx: self.id,
            dlog: Dlog::lift2(x.dlog, y.dlog, |a, b| a - b),
        })
    }

    pub fn pair(&self, x: &G1Element, y: &G1Element) -> Result<GtElement> {
        self.check_g1(x)?;
        self.check_g1(y)?;
        OpCounter::bump(&self.counter.pairings);
        Ok(GtElement {
            value: pairing(&G1Affine::from(x.left), &G2Affine::from(y.right)),
            ctx: self.id,
            dlog: Dlog::lift2(x.dlog, y.dlog, |a, b| a * b),
        })
    }

    /// H1: byte strings to nonzero scalars. SHA-512 over
    /// `tag || counter || data`, reduced mod q; the counter only advances on
    /// the (negligible) zero outcome.
    pub fn hash_to_scalar(&self, data: &[u8]) -> Result<Scalar> {
        if data.is_empty() {
            return Err(Error::EmptyHashInput);
        }
        OpCounter::bump(&self.counter.hashes);
        let mut counter: u32 = 0;
        loop {
            let mut h = Sha512::new();
            h.update(H1_DOMAIN_TAG);
            h.update(counter.to_be_bytes());
            h.update(data);
            let wide: [u8; 64] = h.finalize().into();
            let s = Scalar::from_wide(&wide);
            if !s.is_zero() {
                return Ok(s);
            }
            counter += 1;
        }
    }

    /// Uniform element of GT. This samples a message, not a scheme step, so
    /// it is not counted as an exponentiation.
    pub fn random_gt<R: RngCore + CryptoRng>(&self, rng: &mut R) -> GtElement {
        let k = Scalar::random_nonzero(rng);
        GtElement {
            value: self.gt_generator.value * k.0,
            ctx: self.id,
            dlog: Dlog::known(k),
        }
    }

    /// Parses and validates a G1 element. Both halves must be valid subgroup
    /// points carrying the same exponent.
    pub fn g1_from_bytes(&self, bytes: &[u8]) -> Result<G1Element> {
        if bytes.len() != G1_BYTES {
            return Err(Error::Decode(format!(
                "G1 element needs {G1_BYTES} bytes, got {}",
                bytes.len()
            )));
        }
        let left: [u8; 48] = bytes[..48].try_into().expect("length checked");
        let right: [u8; 96] = bytes[48..].try_into().expect("length checked");
        let left: G1Affine = Option::from(G1Affine::from_compressed(&left))
            .ok_or_else(|| Error::Decode("invalid G1 point".into()))?;
        let right: G2Affine = Option::from(G2Affine::from_compressed(&right))
            .ok_or_else(|| Error::Decode("invalid G2 point".into()))?;
        // e(left, h) * e(-g, right) == 1 iff both halves share the exponent
        let mirrored = multi_miller_loop(&[
            (&left, &G2Prepared::from(G2Affine::generator())),
            (&-G1Affine::generator(), &G2Prepared::from(right)),
        ])
        .final_exponentiation();
        if mirrored != Gt::IDENTITY {
            return Err(Error::Decode("G1 halves are not mirrored".into()));
        }
        Ok(G1Element {
            left: left.into(),
            right: right.into(),
            ctx: self.id,
            dlog: Dlog::unknown(),
        })
    }

    pub fn gt_from_bytes(&self, bytes: &[u8]) -> Result<GtElement> {
        let arr: [u8; GT_BYTES] = bytes
            .try_into()
            .map_err(|_| Error::Decode(format!("GT element needs {GT_BYTES} bytes")))?;
        let value: Gt = Option::from(Gt::from_bytes(&arr))
            .ok_or_else(|| Error::Decode("invalid GT element".into()))?;
        Ok(GtElement {
            value,
            ctx: self.id,
            dlog: Dlog::unknown(),
        })
    }

    /// Reads one wire record starting at `*pos` and advances `*pos`.
    pub fn decode_record(&self, buf: &[u8], pos: &mut usize) -> Result<WireElement> {
        let header = buf
            .get(*pos..*pos + 3)
            .ok_or_else(|| Error::Decode("truncated element record".into()))?;
        let tag = header[0];
        let len = u16::from_be_bytes([header[1], header[2]]) as usize;
        let body = buf
            .get(*pos + 3..*pos + 3 + len)
            .ok_or_else(|| Error::Decode("truncated element body".into()))?;
        let element = match tag {
            TAG_G1 => WireElement::G1(self.g1_from_bytes(body)?),
            TAG_GT => WireElement::Gt(self.gt_from_bytes(body)?),
            TAG_SCALAR => WireElement::Scalar(Scalar::from_be_bytes(body)?),
            other => return Err(Error::Decode(format!("unknown element tag 0x{other:02x}"))),
        };
        *pos += 3 + len;
        Ok(element)
    }

    /// Ledger soundness: the element equals `g^dlog`. Uncounted.
    #[cfg(feature = "oracle")]
    pub fn ledger_sound_g1(&self, x: &G1Element) -> bool {
        match x.dlog.value {
            Some(d) => self.raw_g_pow(&d).to_bytes() == x.to_bytes(),
            None => false,
        }
    }

    /// Ledger soundness: the element equals `e(g, g)^dlog`. Uncounted.
    #[cfg(feature = "oracle")]
    pub fn ledger_sound_gt(&self, x: &GtElement) -> bool {
        match x.dlog.value {
            Some(d) => self.raw_gt_pow(&d).to_bytes() == x.to_bytes(),
            None => false,
        }
    }

    /// `g^s` without touching the counters; for test oracles.
    pub fn raw_g_pow(&self, s: &Scalar) -> G1Element {
        G1Element {
            left: G1Projective::GENERATOR * s.0,
            right: G2Projective::GENERATOR * s.0,
            ctx: self.id,
            dlog: Dlog::known(*s),
        }
    }

    /// `e(g, g)^s` without touching the counters; for test oracles.
    pub fn raw_gt_pow(&self, s: &Scalar) -> GtElement {
        GtElement {
            value: self.gt_generator.value * s.0,
            ctx: self.id,
            dlog: Dlog::known(*s),
        }
    }
}
