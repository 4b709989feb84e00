//! Multi-organization extension.
//!
//! Organization `k` (the host) encrypts for one of its roles and one role of
//! a partner `k′` (the guest) under a single `d`. Host users decrypt through
//! the single-organization path. Guest users need the host's private cloud
//! to translate `C1` with a re-encryption key, which exists only after the
//! guest shared its long-term secret with the host.

use std::collections::BTreeMap;
use std::fmt;

use rand::{CryptoRng, RngCore};

use crate::algebra::{G1Element, GtElement, PairingContext, Scalar};
use crate::board::BulletinBoard;
use crate::error::{Error, Result};
use crate::hierarchy::{RoleHierarchy, RoleId};
use crate::so_rbe::{
    KemCiphertext, MasterSecret, PartialDecryption, PublicParams, RoleComponents, RolePublicKey,
    TransformedRoleKey,
};

/// Public keys of a host role and a guest role, host side first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct JointRolePublicKey {
    host: RolePublicKey,
    guest: RolePublicKey,
}

impl JointRolePublicKey {
    pub fn host(&self) -> &RolePublicKey {
        &self.host
    }
    pub fn guest(&self) -> &RolePublicKey {
        &self.guest
    }
}

/// `<C1, C2 = h_k^d, C′2 = h_{k′}^d, host components, guest components>`
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MultiKemCiphertext {
    pub c1: GtElement,
    pub c2: G1Element,
    pub c2_guest: G1Element,
    pub host: RoleComponents,
    pub guest: RoleComponents,
}

impl MultiKemCiphertext {
    pub fn host_org(&self) -> &str {
        self.host.role.org()
    }
    pub fn guest_org(&self) -> &str {
        self.guest.role.org()
    }

    /// The host half as a single-organization ciphertext.
    pub fn host_view(&self) -> KemCiphertext {
        KemCiphertext {
            c1: self.c1.clone(),
            c2: self.c2.clone(),
            components: self.host.clone(),
        }
    }

    pub fn g1_count(&self) -> usize {
        4 + self.host.c3.len() + self.guest.c3.len()
    }
    pub fn gt_count(&self) -> usize {
        1
    }
}

/// `LTS = g^{(y−δ)σ}` of the issuing organization.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LongTermSecret {
    pub org: String,
    pub lts: G1Element,
}

/// `rk_{k,k′} = LTS_{k′} / g^{y_k − δ_k}`, kept in the host's private cloud.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReKey {
    pub host: String,
    pub guest: String,
    pub rk: G1Element,
}

/// `TDK = TRK^{σ_{k′}}` and `Pub^{σ_{k′}}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TemporaryDecryptionKey {
    pub role: RoleId,
    pub user: String,
    pub tdk: G1Element,
    pub blinded_pub: G1Element,
}

/// Re-encryption keys held by one organization's private cloud.
#[derive(Clone, Default)]
pub struct ReKeyStore {
    host: String,
    keys: BTreeMap<String, ReKey>,
}

impl ReKeyStore {
    pub fn new(host: &str) -> Self {
        ReKeyStore {
            host: host.to_string(),
            keys: BTreeMap::new(),
        }
    }

    pub fn host(&self) -> &str {
        &self.host
    }

    /// Stores a key. Returns true when it replaces an earlier one for the
    /// same guest.
    pub fn insert(&mut self, rekey: ReKey) -> Result<bool> {
        if rekey.host != self.host {
            return Err(Error::KeyMismatch(format!(
                "re-encryption key for {} offered to {}",
                rekey.host, self.host
            )));
        }
        let reissued = self.keys.insert(rekey.guest.clone(), rekey).is_some();
        if reissued {
            log::warn!("re-encryption key for {} re-issued", self.host);
        }
        Ok(reissued)
    }

    pub fn get(&self, guest: &str) -> Result<&ReKey> {
        self.keys.get(guest).ok_or_else(|| Error::MissingReKey {
            host: self.host.clone(),
            guest: guest.to_string(),
        })
    }

    pub fn guests(&self) -> impl Iterator<Item = &str> {
        self.keys.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = &ReKey> {
        self.keys.values()
    }
}

impl fmt::Debug for ReKeyStore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ReKeyStore({}, guests={:?})", self.host, self.keys.keys().collect::<Vec<_>>())
    }
}

pub fn role_pub_key_update(host: &RolePublicKey, guest: &RolePublicKey) -> Result<JointRolePublicKey> {
    if host.role().org() == guest.role().org() {
        return Err(Error::SameOrganization(host.role().org().to_string()));
    }
    Ok(JointRolePublicKey {
        host: host.clone(),
        guest: guest.clone(),
    })
}

pub fn multi_kem_encrypt<R: RngCore + CryptoRng>(
    ctx: &PairingContext,
    pp_host: &PublicParams,
    pp_guest: &PublicParams,
    joint: &JointRolePublicKey,
    rng: &mut R,
) -> Result<(GtElement, MultiKemCiphertext)> {
    if joint.host.role().org() != pp_host.org() || joint.guest.role().org() != pp_guest.org() {
        return Err(Error::KeyMismatch("joint key does not match the public parameters".into()));
    }
    let key = ctx.random_gt(rng);
    let d = Scalar::random_nonzero(rng);
    let ratio = ctx.div_gt(pp_host.y_pub(), pp_host.v_pub())?;
    let c1 = ctx.mul_gt(&key, &ctx.exp_gt(&ratio, &d)?)?;
    let c2 = ctx.exp_g1(pp_host.h(), &d)?;
    let c2_guest = ctx.exp_g1(pp_guest.h(), &d)?;
    let host = components(ctx, &joint.host, &d)?;
    let guest = components(ctx, &joint.guest, &d)?;
    Ok((
        key,
        MultiKemCiphertext {
            c1,
            c2,
            c2_guest,
            host,
            guest,
        },
    ))
}

fn components(ctx: &PairingContext, rpk: &RolePublicKey, d: &Scalar) -> Result<RoleComponents> {
    let c3 = rpk
        .ar()
        .iter()
        .map(|(l, ar)| Ok((l.clone(), ctx.exp_g1(ar, d)?)))
        .collect::<Result<BTreeMap<_, _>>>()?;
    Ok(RoleComponents {
        role: rpk.role().clone(),
        c_role: ctx.exp_g1(rpk.pk(), d)?,
        c3,
    })
}

/// Run by the guest's administrator.
pub fn long_key_share(ctx: &PairingContext, msk_guest: &MasterSecret) -> Result<LongTermSecret> {
    let e = (msk_guest.y() - msk_guest.delta()) * msk_guest.sigma();
    Ok(LongTermSecret {
        org: msk_guest.org().to_string(),
        lts: ctx.g_pow(&e)?,
    })
}

/// Run by the host's administrator on a received long-term secret.
pub fn make_rekey(ctx: &PairingContext, msk_host: &MasterSecret, lts: &LongTermSecret) -> Result<ReKey> {
    if lts.org == msk_host.org() {
        return Err(Error::SameOrganization(lts.org.clone()));
    }
    let own = ctx.g_pow(&(msk_host.y() - msk_host.delta()))?;
    Ok(ReKey {
        host: msk_host.org().to_string(),
        guest: lts.org.clone(),
        rk: ctx.div_g1(&lts.lts, &own)?,
    })
}

/// Host private cloud: `C1′ = C1 · e(rk, C2^{1/η_k})`.
pub fn translate_c1(
    ctx: &PairingContext,
    store: &ReKeyStore,
    guest: &str,
    c1: &GtElement,
    c2: &G1Element,
    eta: &Scalar,
) -> Result<GtElement> {
    let rekey = store.get(guest)?;
    let eta_inv = eta
        .invert()
        .ok_or_else(|| Error::KeyMismatch("zero eta".into()))?;
    let g_d = ctx.exp_g1(c2, &eta_inv)?;
    ctx.mul_gt(c1, &ctx.pair(&rekey.rk, &g_d)?)
}

/// Guest private cloud: raises the blinded role key and the user's public
/// key to `σ_{k′}`. Refuses users whose key is gone from the board.
pub fn make_tdk(
    ctx: &PairingContext,
    board: &BulletinBoard,
    trk: &TransformedRoleKey,
    sigma: &Scalar,
) -> Result<TemporaryDecryptionKey> {
    let public_key = board.user_public_key(trk.role.org(), &trk.user)?;
    Ok(TemporaryDecryptionKey {
        role: trk.role.clone(),
        user: trk.user.clone(),
        tdk: ctx.exp_g1(&trk.trk, sigma)?,
        blinded_pub: ctx.exp_g1(public_key, sigma)?,
    })
}

/// Public cloud: `P = e(C′_role · Π_{Γ} C′3_l, TDK)`, `Q = e(C′2, Pub^{σ})`.
pub fn multi_cloud_partial_dec(
    ctx: &PairingContext,
    mct: &MultiKemCiphertext,
    tdk: &TemporaryDecryptionKey,
    h_guest: &RoleHierarchy,
) -> Result<PartialDecryption> {
    if !h_guest.is_ancestor(&tdk.role, &mct.guest.role)? {
        return Err(Error::UnauthorizedRole {
            held: tdk.role.to_string(),
            target: mct.guest.role.to_string(),
        });
    }
    multi_partial(ctx, mct, tdk, h_guest)
}

/// [`multi_cloud_partial_dec`] without the role gate.
#[cfg(feature = "oracle")]
pub fn multi_cloud_partial_dec_ungated(
    ctx: &PairingContext,
    mct: &MultiKemCiphertext,
    tdk: &TemporaryDecryptionKey,
    h_guest: &RoleHierarchy,
) -> Result<PartialDecryption> {
    multi_partial(ctx, mct, tdk, h_guest)
}

fn multi_partial(
    ctx: &PairingContext,
    mct: &MultiKemCiphertext,
    tdk: &TemporaryDecryptionKey,
    h_guest: &RoleHierarchy,
) -> Result<PartialDecryption> {
    let mut acc = mct.guest.c_role.clone();
    for l in h_guest.gamma(&tdk.role, &mct.guest.role)? {
        let c = mct
            .guest
            .c3
            .get(&l)
            .ok_or_else(|| Error::MissingComponent(l.to_string()))?;
        acc = ctx.mul_g1(&acc, c)?;
    }
    Ok(PartialDecryption {
        p: ctx.pair(&acc, &tdk.tdk)?,
        q: ctx.pair(&mct.c2_guest, &tdk.blinded_pub)?,
    })
}

/// Same arithmetic as the single-organization finalize, applied to `C1′`.
pub use crate::so_rbe::user_finalize as multi_user_finalize;
