//! Key-file container.
//!
//! ```text
//! "RBE1" | kind u8 | str org | str id | u16 n | n * (str label | record)
//! ```
//!
//! Labels name each element (`y`, `t:<role>`, `ar:<role>`, ...). Role labels
//! carry the role name only; the organization is the file's org field.

use std::collections::BTreeMap;

use crate::algebra::{G1Element, GtElement, PairingContext, Scalar, WireElement};
use crate::codec::{put_str, put_u16, Reader};
use crate::error::{Error, Result};
use crate::hierarchy::RoleId;
use crate::mo_rbe::{LongTermSecret, ReKey};
use crate::so_rbe::{MasterSecret, PublicParams, RoleKey, RoleParams, RolePublicKey, RoleSecret};

pub const MAGIC: &[u8; 4] = b"RBE1";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum Kind {
    /// y, δ, σ, η and every t_r
    MasterSecret = 0x01,
    PublicParams = 0x02,
    RolePublicKey = 0x03,
    RoleSecret = 0x04,
    /// g^δ as handed to role managers
    GDelta = 0x05,
    /// σ and η as held by the private cloud
    CloudSecrets = 0x06,
    UserPrivateKey = 0x07,
    UserPublicKey = 0x08,
    UserSecret = 0x09,
    RoleKey = 0x0a,
    LongTermSecret = 0x0b,
    ReKey = 0x0c,
}

impl Kind {
    fn from_byte(b: u8) -> Result<Self> {
        use Kind::*;
        Ok(match b {
            0x01 => MasterSecret,
            0x02 => PublicParams,
            0x03 => RolePublicKey,
            0x04 => RoleSecret,
            0x05 => GDelta,
            0x06 => CloudSecrets,
            0x07 => UserPrivateKey,
            0x08 => UserPublicKey,
            0x09 => UserSecret,
            0x0a => RoleKey,
            0x0b => LongTermSecret,
            0x0c => ReKey,
            _ => return Err(Error::Decode(format!("unknown key-file kind {b:#04x}"))),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KeyFile {
    pub kind: Kind,
    pub org: String,
    pub id: String,
    pub entries: Vec<(String, WireElement)>,
}

impl KeyFile {
    pub fn new(kind: Kind, org: &str, id: &str) -> Self {
        KeyFile {
            kind,
            org: org.to_string(),
            id: id.to_string(),
            entries: Vec::new(),
        }
    }

    fn with(mut self, label: impl Into<String>, e: WireElement) -> Self {
        self.entries.push((label.into(), e));
        self
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = MAGIC.to_vec();
        out.push(self.kind as u8);
        put_str(&mut out, &self.org);
        put_str(&mut out, &self.id);
        put_u16(&mut out, self.entries.len());
        for (label, e) in &self.entries {
            put_str(&mut out, label);
            e.encode_into(&mut out);
        }
        out
    }

    pub fn decode(ctx: &PairingContext, bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        r.expect(MAGIC)?;
        let kind = Kind::from_byte(r.u8()?)?;
        let org = r.str()?;
        let id = r.str()?;
        let n = r.u16()?;
        let mut entries = Vec::with_capacity(n);
        for _ in 0..n {
            let label = r.str()?;
            entries.push((label, r.record(ctx)?));
        }
        r.finish()?;
        Ok(KeyFile {
            kind,
            org,
            id,
            entries,
        })
    }

    pub fn expect_kind(&self, kind: Kind) -> Result<&Self> {
        if self.kind != kind {
            return Err(Error::Decode(format!("expected a {kind:?} file, found {:?}", self.kind)));
        }
        Ok(self)
    }

    fn get(&self, label: &str) -> Result<&WireElement> {
        self.entries
            .iter()
            .find(|(l, _)| l == label)
            .map(|(_, e)| e)
            .ok_or_else(|| Error::Decode(format!("missing entry {label}")))
    }

    fn scalar(&self, label: &str) -> Result<Scalar> {
        self.get(label)?.clone().into_scalar()
    }

    fn g1(&self, label: &str) -> Result<G1Element> {
        self.get(label)?.clone().into_g1()
    }

    fn gt(&self, label: &str) -> Result<GtElement> {
        self.get(label)?.clone().into_gt()
    }

    fn prefixed<'a>(&'a self, prefix: &'a str) -> impl Iterator<Item = (&'a str, &'a WireElement)> + 'a {
        self.entries
            .iter()
            .filter_map(move |(l, e)| l.strip_prefix(prefix).map(|rest| (rest, e)))
    }

    /// Counts of (scalar, G1, GT) records.
    pub fn element_counts(&self) -> (usize, usize, usize) {
        self.entries.iter().fold((0, 0, 0), |(s, g, t), (_, e)| match e {
            WireElement::Scalar(_) => (s + 1, g, t),
            WireElement::G1(_) => (s, g + 1, t),
            WireElement::Gt(_) => (s, g, t + 1),
        })
    }
}

pub fn master_secret_file(msk: &MasterSecret, params: &RoleParams) -> KeyFile {
    let mut f = KeyFile::new(Kind::MasterSecret, msk.org(), "sa")
        .with("y", WireElement::Scalar(msk.y()))
        .with("delta", WireElement::Scalar(msk.delta()))
        .with("sigma", WireElement::Scalar(msk.sigma()))
        .with("eta", WireElement::Scalar(msk.eta()));
    for (role, t) in params.t() {
        f = f.with(format!("t:{}", role.name()), WireElement::Scalar(*t));
    }
    f
}

pub fn read_master_secret(f: &KeyFile) -> Result<(MasterSecret, RoleParams)> {
    f.expect_kind(Kind::MasterSecret)?;
    let msk = MasterSecret::from_parts(
        &f.org,
        f.scalar("y")?,
        f.scalar("delta")?,
        f.scalar("sigma")?,
        f.scalar("eta")?,
    )?;
    let t = f
        .prefixed("t:")
        .map(|(name, e)| Ok((RoleId::new(&f.org, name), e.clone().into_scalar()?)))
        .collect::<Result<BTreeMap<_, _>>>()?;
    Ok((msk, RoleParams::from_parts(&f.org, t)))
}

pub fn public_params_file(pp: &PublicParams) -> KeyFile {
    KeyFile::new(Kind::PublicParams, pp.org(), "board")
        .with("Y", WireElement::Gt(pp.y_pub().clone()))
        .with("V", WireElement::Gt(pp.v_pub().clone()))
        .with("h", WireElement::G1(pp.h().clone()))
}

pub fn read_public_params(f: &KeyFile) -> Result<PublicParams> {
    f.expect_kind(Kind::PublicParams)?;
    Ok(PublicParams::from_parts(&f.org, f.gt("Y")?, f.gt("V")?, f.g1("h")?))
}

pub fn role_public_key_file(rpk: &RolePublicKey) -> KeyFile {
    let mut f = KeyFile::new(Kind::RolePublicKey, rpk.role().org(), rpk.role().name())
        .with("pk", WireElement::G1(rpk.pk().clone()));
    for (l, ar) in rpk.ar() {
        f = f.with(format!("ar:{}", l.name()), WireElement::G1(ar.clone()));
    }
    f
}

pub fn read_role_public_key(f: &KeyFile) -> Result<RolePublicKey> {
    f.expect_kind(Kind::RolePublicKey)?;
    let ar = f
        .prefixed("ar:")
        .map(|(name, e)| Ok((RoleId::new(&f.org, name), e.clone().into_g1()?)))
        .collect::<Result<BTreeMap<_, _>>>()?;
    Ok(RolePublicKey::from_parts(RoleId::new(&f.org, &f.id), f.g1("pk")?, ar))
}

pub fn role_secret_file(rs: &RoleSecret) -> KeyFile {
    KeyFile::new(Kind::RoleSecret, rs.role().org(), rs.role().name()).with("rs", WireElement::Scalar(rs.value()))
}

pub fn read_role_secret(f: &KeyFile) -> Result<RoleSecret> {
    f.expect_kind(Kind::RoleSecret)?;
    Ok(RoleSecret::from_parts(RoleId::new(&f.org, &f.id), f.scalar("rs")?))
}

pub fn g_delta_file(org: &str, g_delta: &G1Element) -> KeyFile {
    KeyFile::new(Kind::GDelta, org, "role-managers").with("g_delta", WireElement::G1(g_delta.clone()))
}

pub fn read_g_delta(f: &KeyFile) -> Result<G1Element> {
    f.expect_kind(Kind::GDelta)?.g1("g_delta")
}

pub fn cloud_secrets_file(msk: &MasterSecret) -> KeyFile {
    KeyFile::new(Kind::CloudSecrets, msk.org(), "private-cloud")
        .with("sigma", WireElement::Scalar(msk.sigma()))
        .with("eta", WireElement::Scalar(msk.eta()))
}

/// `(σ, η)`
pub fn read_cloud_secrets(f: &KeyFile) -> Result<(Scalar, Scalar)> {
    f.expect_kind(Kind::CloudSecrets)?;
    Ok((f.scalar("sigma")?, f.scalar("eta")?))
}

pub fn user_private_key_file(org: &str, id: &str, u: &Scalar) -> KeyFile {
    KeyFile::new(Kind::UserPrivateKey, org, id).with("u", WireElement::Scalar(*u))
}

pub fn read_user_private_key(f: &KeyFile) -> Result<Scalar> {
    f.expect_kind(Kind::UserPrivateKey)?.scalar("u")
}

pub fn user_public_key_file(org: &str, id: &str, public_key: &G1Element) -> KeyFile {
    KeyFile::new(Kind::UserPublicKey, org, id).with("pub", WireElement::G1(public_key.clone()))
}

pub fn read_user_public_key(f: &KeyFile) -> Result<G1Element> {
    f.expect_kind(Kind::UserPublicKey)?.g1("pub")
}

pub fn user_secret_file(org: &str, id: &str, us: &G1Element) -> KeyFile {
    KeyFile::new(Kind::UserSecret, org, id).with("us", WireElement::G1(us.clone()))
}

pub fn read_user_secret(f: &KeyFile) -> Result<G1Element> {
    f.expect_kind(Kind::UserSecret)?.g1("us")
}

pub fn role_key_file(rk: &RoleKey) -> KeyFile {
    KeyFile::new(Kind::RoleKey, rk.role().org(), rk.user())
        .with(format!("rk:{}", rk.role().name()), WireElement::G1(rk.element().clone()))
}

pub fn read_role_key(f: &KeyFile) -> Result<RoleKey> {
    f.expect_kind(Kind::RoleKey)?;
    let (name, e) = f
        .prefixed("rk:")
        .next()
        .ok_or_else(|| Error::Decode("role key file without an rk entry".into()))?;
    Ok(RoleKey::from_parts(RoleId::new(&f.org, name), &f.id, e.clone().into_g1()?))
}

pub fn long_term_secret_file(lts: &LongTermSecret) -> KeyFile {
    KeyFile::new(Kind::LongTermSecret, &lts.org, "sa").with("lts", WireElement::G1(lts.lts.clone()))
}

pub fn read_long_term_secret(f: &KeyFile) -> Result<LongTermSecret> {
    f.expect_kind(Kind::LongTermSecret)?;
    Ok(LongTermSecret {
        org: f.org.clone(),
        lts: f.g1("lts")?,
    })
}

/// Org field is the host, id is the guest.
pub fn rekey_file(rk: &ReKey) -> KeyFile {
    KeyFile::new(Kind::ReKey, &rk.host, &rk.guest).with("rekey", WireElement::G1(rk.rk.clone()))
}

pub fn read_rekey(f: &KeyFile) -> Result<ReKey> {
    f.expect_kind(Kind::ReKey)?;
    Ok(ReKey {
        host: f.org.clone(),
        guest: f.id.clone(),
        rk: f.g1("rekey")?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::setup_pairing;
    use crate::hierarchy::build_hierarchy;
    use crate::so_rbe;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn round_trips() {
        let ctx = setup_pairing(128).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let h = build_hierarchy("acme", ["a", "b", "c", "d"], [("a", "b"), ("a", "c")]).unwrap();
        let (msk, pp, g_delta) = so_rbe::init(&ctx, "acme", &mut rng).unwrap();
        let (params, rpks, rss) = so_rbe::role_para_gen(&ctx, &pp, &h, &mut rng).unwrap();
        let cred = so_rbe::priv_key_gen(&ctx, &pp, &msk, "alice", &mut rng).unwrap();
        let b = h.role("b").unwrap();
        let rk = so_rbe::role_key_gen(&ctx, &pp, &rss[&b], &g_delta, cred.user_secret(), "alice", &b).unwrap();

        let rt = |f: KeyFile| KeyFile::decode(&ctx, &f.encode()).unwrap();

        let f = rt(master_secret_file(&msk, &params));
        assert_eq!(f.element_counts(), (4 + 4, 0, 0));
        let (msk2, params2) = read_master_secret(&f).unwrap();
        assert_eq!((msk2.y(), msk2.eta()), (msk.y(), msk.eta()));
        assert_eq!(params2.t(), params.t());

        assert_eq!(read_public_params(&rt(public_params_file(&pp))).unwrap(), pp);
        assert_eq!(read_role_public_key(&rt(role_public_key_file(&rpks[&b]))).unwrap(), rpks[&b]);
        assert_eq!(read_role_secret(&rt(role_secret_file(&rss[&b]))).unwrap().value(), rss[&b].value());
        assert_eq!(read_g_delta(&rt(g_delta_file("acme", &g_delta))).unwrap(), g_delta);
        assert_eq!(read_cloud_secrets(&rt(cloud_secrets_file(&msk))).unwrap(), (msk.sigma(), msk.eta()));
        assert_eq!(
            read_user_private_key(&rt(user_private_key_file("acme", "alice", &cred.private_key()))).unwrap(),
            cred.private_key()
        );
        assert_eq!(
            read_user_public_key(&rt(user_public_key_file("acme", "alice", cred.public_key()))).unwrap(),
            *cred.public_key()
        );
        assert_eq!(
            read_user_secret(&rt(user_secret_file("acme", "alice", cred.user_secret()))).unwrap(),
            *cred.user_secret()
        );
        assert_eq!(read_role_key(&rt(role_key_file(&rk))).unwrap(), rk);
    }

    #[test]
    fn wrong_kind_and_garbage_rejected() {
        let ctx = setup_pairing(128).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let (msk, _, _) = so_rbe::init(&ctx, "acme", &mut rng).unwrap();
        let f = cloud_secrets_file(&msk);
        assert!(read_user_private_key(&f).is_err());
        let mut bytes = f.encode();
        bytes.push(0);
        assert!(KeyFile::decode(&ctx, &bytes).is_err());
        bytes.pop();
        bytes[4] = 0x7f;
        assert!(KeyFile::decode(&ctx, &bytes).is_err());
        assert!(KeyFile::decode(&ctx, b"RBE2").is_err());
    }

    #[test]
    fn long_term_secret_holds_one_element() {
        let ctx = setup_pairing(128).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let (msk, _, _) = so_rbe::init(&ctx, "b", &mut rng).unwrap();
        let lts = crate::mo_rbe::long_key_share(&ctx, &msk).unwrap();
        let f = long_term_secret_file(&lts);
        assert_eq!(f.element_counts(), (0, 1, 0));
        assert_eq!(read_long_term_secret(&KeyFile::decode(&ctx, &f.encode()).unwrap()).unwrap(), lts);
        let (msk_a, _, _) = so_rbe::init(&ctx, "a", &mut rng).unwrap();
        let rk = crate::mo_rbe::make_rekey(&ctx, &msk_a, &lts).unwrap();
        assert_eq!(read_rekey(&KeyFile::decode(&ctx, &rekey_file(&rk).encode()).unwrap()).unwrap(), rk);
    }
}
