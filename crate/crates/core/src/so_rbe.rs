//! Single-organization role-based encryption.
//!
//! A ciphertext for role `r_i` can be opened by any user holding a role in
//! `A_{r_i}`. Decryption is split three ways: the user blinds their role key
//! ([`transform_role_key`]), the public cloud computes the two pairings
//! ([`cloud_partial_dec`]), and the user finishes with two GT
//! exponentiations ([`user_finalize`]).

use std::collections::BTreeMap;
use std::fmt;

use rand::{CryptoRng, RngCore};

use crate::algebra::{G1Element, GtElement, PairingContext, Scalar};
use crate::board::BulletinBoard;
use crate::error::{Error, Result};
use crate::hierarchy::{RoleHierarchy, RoleId};

/// Bytes fed to H1 for a user identity.
pub fn identity_bytes(org: &str, user: &str) -> Vec<u8> {
    format!("{org}:{user}").into_bytes()
}

/// `MSK = <y, δ, σ, η>`. σ and η also live in the private cloud.
#[derive(Clone)]
pub struct MasterSecret {
    org: String,
    y: Scalar,
    delta: Scalar,
    sigma: Scalar,
    eta: Scalar,
}

impl MasterSecret {
    pub fn from_parts(org: &str, y: Scalar, delta: Scalar, sigma: Scalar, eta: Scalar) -> Result<Self> {
        if [y, delta, sigma, eta].iter().any(Scalar::is_zero) {
            return Err(Error::KeyMismatch("master secret scalars must be nonzero".into()));
        }
        Ok(MasterSecret {
            org: org.to_string(),
            y,
            delta,
            sigma,
            eta,
        })
    }

    pub fn org(&self) -> &str {
        &self.org
    }
    pub fn y(&self) -> Scalar {
        self.y
    }
    pub fn delta(&self) -> Scalar {
        self.delta
    }
    pub fn sigma(&self) -> Scalar {
        self.sigma
    }
    pub fn eta(&self) -> Scalar {
        self.eta
    }
}

impl fmt::Debug for MasterSecret {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MasterSecret({}, <redacted>)", self.org)
    }
}

/// `PK_SA = <Y = e(g,g)^y, V = e(g,g)^δ, h = g^η>` plus the organization id.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PublicParams {
    org: String,
    y_pub: GtElement,
    v_pub: GtElement,
    h: G1Element,
}

impl PublicParams {
    pub fn from_parts(org: &str, y_pub: GtElement, v_pub: GtElement, h: G1Element) -> Self {
        PublicParams {
            org: org.to_string(),
            y_pub,
            v_pub,
            h,
        }
    }
    pub fn org(&self) -> &str {
        &self.org
    }
    pub fn y_pub(&self) -> &GtElement {
        &self.y_pub
    }
    pub fn v_pub(&self) -> &GtElement {
        &self.v_pub
    }
    pub fn h(&self) -> &G1Element {
        &self.h
    }
}

/// Secret role parameters `t_r`, one per role.
#[derive(Clone)]
pub struct RoleParams {
    org: String,
    t: BTreeMap<RoleId, Scalar>,
}

impl RoleParams {
    pub fn from_parts(org: &str, t: BTreeMap<RoleId, Scalar>) -> Self {
        RoleParams {
            org: org.to_string(),
            t,
        }
    }
    pub fn org(&self) -> &str {
        &self.org
    }
    pub fn t(&self) -> &BTreeMap<RoleId, Scalar> {
        &self.t
    }
    /// `Σ_{j ∈ set} t_j`
    pub fn sum_over<'a>(&self, set: impl IntoIterator<Item = &'a RoleId>) -> Scalar {
        set.into_iter()
            .fold(Scalar::ZERO, |acc, r| acc + self.t.get(r).copied().unwrap_or(Scalar::ZERO))
    }
}

impl fmt::Debug for RoleParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "RoleParams({}, {} roles, <redacted>)", self.org, self.t.len())
    }
}

/// `<PK_i = g^{Σ_{Ā_i} t}, {AR_l = g^{t_l} | l ∈ A_i}, r_i>`
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RolePublicKey {
    role: RoleId,
    pk: G1Element,
    ar: BTreeMap<RoleId, G1Element>,
}

impl RolePublicKey {
    pub fn from_parts(role: RoleId, pk: G1Element, ar: BTreeMap<RoleId, G1Element>) -> Self {
        RolePublicKey { role, pk, ar }
    }
    pub fn role(&self) -> &RoleId {
        &self.role
    }
    pub fn pk(&self) -> &G1Element {
        &self.pk
    }
    pub fn ar(&self) -> &BTreeMap<RoleId, G1Element> {
        &self.ar
    }
}

/// `RS_i = 1 / Σ_{Ā_i} t`, held by the role's manager.
#[derive(Clone)]
pub struct RoleSecret {
    role: RoleId,
    rs: Scalar,
}

impl RoleSecret {
    pub fn from_parts(role: RoleId, rs: Scalar) -> Self {
        RoleSecret { role, rs }
    }
    pub fn role(&self) -> &RoleId {
        &self.role
    }
    pub fn value(&self) -> Scalar {
        self.rs
    }
}

impl fmt::Debug for RoleSecret {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "RoleSecret({}, <redacted>)", self.role)
    }
}

/// Output of [`priv_key_gen`]: private key `u`, public key
/// `Pub = g^{(u + H1(id))δ/η}` and user secret `US = g^{y·u}`.
#[derive(Clone)]
pub struct UserCredential {
    org: String,
    id: String,
    private_key: Scalar,
    public_key: G1Element,
    user_secret: G1Element,
}

impl UserCredential {
    pub fn from_parts(org: &str, id: &str, private_key: Scalar, public_key: G1Element, user_secret: G1Element) -> Self {
        UserCredential {
            org: org.to_string(),
            id: id.to_string(),
            private_key,
            public_key,
            user_secret,
        }
    }
    pub fn org(&self) -> &str {
        &self.org
    }
    pub fn id(&self) -> &str {
        &self.id
    }
    pub fn private_key(&self) -> Scalar {
        self.private_key
    }
    pub fn public_key(&self) -> &G1Element {
        &self.public_key
    }
    pub fn user_secret(&self) -> &G1Element {
        &self.user_secret
    }
}

impl fmt::Debug for UserCredential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "UserCredential({}:{}, <redacted>)", self.org, self.id)
    }
}

/// `RK = g^{(y·u + H1(id)·δ) / Σ_{Ā_m} t}`
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RoleKey {
    role: RoleId,
    user: String,
    rk: G1Element,
}

impl RoleKey {
    pub fn from_parts(role: RoleId, user: &str, rk: G1Element) -> Self {
        RoleKey {
            role,
            user: user.to_string(),
            rk,
        }
    }
    pub fn role(&self) -> &RoleId {
        &self.role
    }
    pub fn user(&self) -> &str {
        &self.user
    }
    pub fn element(&self) -> &G1Element {
        &self.rk
    }
}

/// Components bound to one role's key: `C_role = PK^d` and
/// `{C3_l = AR_l^d | l ∈ A_role}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RoleComponents {
    pub role: RoleId,
    pub c_role: G1Element,
    pub c3: BTreeMap<RoleId, G1Element>,
}

impl RoleComponents {
    fn encrypt(ctx: &PairingContext, rpk: &RolePublicKey, d: &Scalar) -> Result<Self> {
        let c3 = rpk
            .ar
            .iter()
            .map(|(l, ar)| Ok((l.clone(), ctx.exp_g1(ar, d)?)))
            .collect::<Result<BTreeMap<_, _>>>()?;
        Ok(RoleComponents {
            role: rpk.role.clone(),
            c_role: ctx.exp_g1(&rpk.pk, d)?,
            c3,
        })
    }

    /// `C_role · Π_{l ∈ Γ(held, role)} C3_l`
    fn retarget(&self, ctx: &PairingContext, h: &RoleHierarchy, held: &RoleId) -> Result<G1Element> {
        let mut acc = self.c_role.clone();
        for l in h.gamma(held, &self.role)? {
            let c = self
                .c3
                .get(&l)
                .ok_or_else(|| Error::MissingComponent(l.to_string()))?;
            acc = ctx.mul_g1(&acc, c)?;
        }
        Ok(acc)
    }
}

/// `<C1, C2, {C3_l}, C_role, r_i>`; the DEM payload lives in the envelope.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KemCiphertext {
    pub c1: GtElement,
    pub c2: G1Element,
    pub components: RoleComponents,
}

impl KemCiphertext {
    pub fn role(&self) -> &RoleId {
        &self.components.role
    }
    pub fn org(&self) -> &str {
        self.components.role.org()
    }
    pub fn g1_count(&self) -> usize {
        2 + self.components.c3.len()
    }
    pub fn gt_count(&self) -> usize {
        1
    }
}

/// `TRK = RK^v` plus the request metadata (who is asking, with which role).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TransformedRoleKey {
    pub role: RoleId,
    pub user: String,
    pub trk: G1Element,
}

/// The blinding exponent `v`. Single use: [`user_finalize`] consumes it.
pub struct Blinding(Scalar);

impl Blinding {
    pub fn from_scalar(v: Scalar) -> Self {
        Blinding(v)
    }
    pub fn value(&self) -> Scalar {
        self.0
    }
}

impl fmt::Debug for Blinding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Blinding(<redacted>)")
    }
}

/// `P` and `Q` from the outsourced decryption step.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartialDecryption {
    pub p: GtElement,
    pub q: GtElement,
}

/// Generates the master secret and public parameters of an organization.
/// Also returns `g^δ`, which goes to the role managers.
pub fn init<R: RngCore + CryptoRng>(
    ctx: &PairingContext,
    org: &str,
    rng: &mut R,
) -> Result<(MasterSecret, PublicParams, G1Element)> {
    let msk = MasterSecret {
        org: org.to_string(),
        y: Scalar::random_nonzero(rng),
        delta: Scalar::random_nonzero(rng),
        sigma: Scalar::random_nonzero(rng),
        eta: Scalar::random_nonzero(rng),
    };
    let pp = PublicParams {
        org: org.to_string(),
        y_pub: ctx.exp_gt(ctx.gt_generator(), &msk.y)?,
        v_pub: ctx.exp_gt(ctx.gt_generator(), &msk.delta)?,
        h: ctx.g_pow(&msk.eta)?,
    };
    let g_delta = ctx.g_pow(&msk.delta)?;
    Ok((msk, pp, g_delta))
}

/// Draws `t_r` for every role and derives the role public keys and role
/// secrets. The whole vector is redrawn if some `Σ_{Ā_r} t` vanishes.
#[allow(clippy::type_complexity)]
pub fn role_para_gen<R: RngCore + CryptoRng>(
    ctx: &PairingContext,
    pp: &PublicParams,
    h: &RoleHierarchy,
    rng: &mut R,
) -> Result<(
    RoleParams,
    BTreeMap<RoleId, RolePublicKey>,
    BTreeMap<RoleId, RoleSecret>,
)> {
    if h.org() != pp.org() {
        return Err(Error::KeyMismatch(format!(
            "hierarchy of {} used with parameters of {}",
            h.org(),
            pp.org()
        )));
    }
    if h.is_empty() {
        return Err(Error::EmptyHierarchy);
    }
    let complements = h
        .roles()
        .iter()
        .map(|r| Ok((r.clone(), h.non_ancestors(r)?)))
        .collect::<Result<BTreeMap<_, _>>>()?;
    if let Some((r, _)) = complements.iter().find(|(_, c)| c.is_empty()) {
        return Err(Error::DegenerateRole(r.to_string()));
    }

    let (params, sums) = loop {
        let t: BTreeMap<RoleId, Scalar> = h
            .roles()
            .iter()
            .map(|r| (r.clone(), Scalar::random_nonzero(rng)))
            .collect();
        let params = RoleParams {
            org: pp.org().to_string(),
            t,
        };
        let sums: BTreeMap<RoleId, Scalar> = complements
            .iter()
            .map(|(r, c)| (r.clone(), params.sum_over(c)))
            .collect();
        if sums.values().all(|s| !s.is_zero()) {
            break (params, sums);
        }
    };

    let ar = params
        .t
        .iter()
        .map(|(r, t)| Ok((r.clone(), ctx.g_pow(t)?)))
        .collect::<Result<BTreeMap<_, _>>>()?;
    let mut public = BTreeMap::new();
    let mut secrets = BTreeMap::new();
    for (role, sum) in &sums {
        let ancestors = h.ancestors(role)?;
        public.insert(
            role.clone(),
            RolePublicKey {
                role: role.clone(),
                pk: ctx.g_pow(sum)?,
                ar: ancestors
                    .iter()
                    .map(|l| (l.clone(), ar[l].clone()))
                    .collect(),
            },
        );
        secrets.insert(
            role.clone(),
            RoleSecret {
                role: role.clone(),
                rs: sum.invert().expect("nonzero sum"),
            },
        );
    }
    Ok((params, public, secrets))
}

/// Issues a user's private key, public key and user secret. `u` is redrawn
/// while `u + H1(id) = 0`.
pub fn priv_key_gen<R: RngCore + CryptoRng>(
    ctx: &PairingContext,
    pp: &PublicParams,
    msk: &MasterSecret,
    id: &str,
    rng: &mut R,
) -> Result<UserCredential> {
    if pp.org() != msk.org() {
        return Err(Error::KeyMismatch("public parameters and master secret differ in organization".into()));
    }
    let h1 = ctx.hash_to_scalar(&identity_bytes(msk.org(), id))?;
    let u = loop {
        let u = Scalar::random_nonzero(rng);
        if !(u + h1).is_zero() {
            break u;
        }
    };
    let eta_inv = msk.eta.invert().expect("eta is nonzero");
    let public_key = ctx.g_pow(&((u + h1) * msk.delta * eta_inv))?;
    let user_secret = ctx.g_pow(&(msk.y * u))?;
    Ok(UserCredential {
        org: msk.org().to_string(),
        id: id.to_string(),
        private_key: u,
        public_key,
        user_secret,
    })
}

/// `RK = (US · (g^δ)^{H1(id)})^{RS_m}`, computed by the role manager of
/// `role`.
pub fn role_key_gen(
    ctx: &PairingContext,
    pp: &PublicParams,
    rs: &RoleSecret,
    g_delta: &G1Element,
    user_secret: &G1Element,
    id: &str,
    role: &RoleId,
) -> Result<RoleKey> {
    if rs.role() != role {
        return Err(Error::KeyMismatch(format!(
            "role secret for {} used to issue {}",
            rs.role(),
            role
        )));
    }
    if role.org() != pp.org() {
        return Err(Error::KeyMismatch(format!("role {role} is not managed by {}", pp.org())));
    }
    let h1 = ctx.hash_to_scalar(&identity_bytes(role.org(), id))?;
    let base = ctx.mul_g1(user_secret, &ctx.exp_g1(g_delta, &h1)?)?;
    Ok(RoleKey {
        role: role.clone(),
        user: id.to_string(),
        rk: ctx.exp_g1(&base, &rs.rs)?,
    })
}

/// Draws a fresh session key `K ∈ GT` and encapsulates it for the role.
pub fn kem_encrypt<R: RngCore + CryptoRng>(
    ctx: &PairingContext,
    pp: &PublicParams,
    rpk: &RolePublicKey,
    rng: &mut R,
) -> Result<(GtElement, KemCiphertext)> {
    if rpk.role().org() != pp.org() {
        return Err(Error::KeyMismatch(format!(
            "role {} is not published by {}",
            rpk.role(),
            pp.org()
        )));
    }
    let key = ctx.random_gt(rng);
    let d = Scalar::random_nonzero(rng);
    let ratio = ctx.div_gt(pp.y_pub(), pp.v_pub())?;
    let c1 = ctx.mul_gt(&key, &ctx.exp_gt(&ratio, &d)?)?;
    let c2 = ctx.exp_g1(pp.h(), &d)?;
    let components = RoleComponents::encrypt(ctx, rpk, &d)?;
    Ok((key, KemCiphertext { c1, c2, components }))
}

/// `TRK = RK^v` with a fresh `v`, which the caller keeps until finalize.
pub fn transform_role_key<R: RngCore + CryptoRng>(
    ctx: &PairingContext,
    rk: &RoleKey,
    rng: &mut R,
) -> Result<(TransformedRoleKey, Blinding)> {
    let v = Scalar::random_nonzero(rng);
    let trk = ctx.exp_g1(&rk.rk, &v)?;
    Ok((
        TransformedRoleKey {
            role: rk.role.clone(),
            user: rk.user.clone(),
            trk,
        },
        Blinding(v),
    ))
}

/// Public-cloud half of decryption:
/// `P = e(C_role · Π_{Γ} C3_l, TRK)` and `Q = e(C2, Pub)`.
///
/// Fails with `RevokedUser` when the requester's public key is gone from the
/// board and with `UnauthorizedRole` when the requested role is not an
/// ancestor of the ciphertext's role. Both checks run before any pairing.
pub fn cloud_partial_dec(
    ctx: &PairingContext,
    board: &BulletinBoard,
    ct: &KemCiphertext,
    trk: &TransformedRoleKey,
    h: &RoleHierarchy,
) -> Result<PartialDecryption> {
    let public_key = board.user_public_key(trk.role.org(), &trk.user)?;
    if !h.is_ancestor(&trk.role, ct.role())? {
        return Err(Error::UnauthorizedRole {
            held: trk.role.to_string(),
            target: ct.role().to_string(),
        });
    }
    partial(ctx, ct, trk, public_key, h)
}

/// [`cloud_partial_dec`] without the role gate, for white-box tests of what
/// an unqualified role would compute.
#[cfg(feature = "oracle")]
pub fn cloud_partial_dec_ungated(
    ctx: &PairingContext,
    board: &BulletinBoard,
    ct: &KemCiphertext,
    trk: &TransformedRoleKey,
    h: &RoleHierarchy,
) -> Result<PartialDecryption> {
    let public_key = board.user_public_key(trk.role.org(), &trk.user)?;
    partial(ctx, ct, trk, public_key, h)
}

fn partial(
    ctx: &PairingContext,
    ct: &KemCiphertext,
    trk: &TransformedRoleKey,
    public_key: &G1Element,
    h: &RoleHierarchy,
) -> Result<PartialDecryption> {
    let retargeted = ct.components.retarget(ctx, h, &trk.role)?;
    Ok(PartialDecryption {
        p: ctx.pair(&retargeted, &trk.trk)?,
        q: ctx.pair(&ct.c2, public_key)?,
    })
}

/// `K = C1 / (P^{1/v} / Q)^{1/u}`. A wrong key is not detectable here; it
/// shows up as an authentication failure when the payload is opened.
pub fn user_finalize(
    ctx: &PairingContext,
    c1: &GtElement,
    pd: &PartialDecryption,
    blinding: Blinding,
    private_key: &Scalar,
) -> Result<GtElement> {
    let v_inv = blinding
        .0
        .invert()
        .ok_or_else(|| Error::KeyMismatch("zero blinding".into()))?;
    let u_inv = private_key
        .invert()
        .ok_or_else(|| Error::KeyMismatch("zero private key".into()))?;
    let unblinded = ctx.div_gt(&ctx.exp_gt(&pd.p, &v_inv)?, &pd.q)?;
    let mask = ctx.exp_gt(&unblinded, &u_inv)?;
    ctx.div_gt(c1, &mask)
}

/// Revokes a user by removing their public key from the board.
pub fn u_revoke(board: &mut BulletinBoard, org: &str, id: &str) -> Result<()> {
    board.remove_user(org, id).map(|_| ())
}
