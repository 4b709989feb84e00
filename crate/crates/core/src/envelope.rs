//! Symmetric payload layer and the ciphertext container.
//!
//! The payload key is derived from the KEM key `K` with HKDF-SHA256 and the
//! payload is sealed with AES-256-GCM. Every container byte before the nonce
//! is authenticated as associated data.
//!
//! Container layout:
//!
//! ```text
//! "RBEC" | suite u8 | mode u8 (1 single, 2 multi)
//! | str org [| str guest org] | str role [| str guest role]
//! | C1 | C2 [| C'2] | C_role [| C'_role]
//! | u16 n | n * (str role | C3) [| u16 n' | n' * (str role | C'3)]
//! | nonce[12] | body
//! ```
//!
//! Strings are a big-endian u16 length followed by UTF-8. Element records use
//! the algebra wire format.

use std::collections::BTreeMap;

use aes_gcm::aead::{Aead, KeyInit, Payload};
use aes_gcm::{Aes256Gcm, Nonce};
use hkdf::Hkdf;
use rand::{CryptoRng, RngCore};
use sha2::Sha256;

use crate::algebra::{GtElement, PairingContext, WireElement};
use crate::codec::{put_str, put_u16, Reader};
use crate::error::{Error, Result};
use crate::hierarchy::RoleId;
use crate::mo_rbe::MultiKemCiphertext;
use crate::so_rbe::{KemCiphertext, RoleComponents};

pub const MAGIC: &[u8; 4] = b"RBEC";
/// HKDF-SHA256 key derivation with AES-256-GCM.
pub const SUITE_HKDF_SHA256_AES256GCM: u8 = 0x01;
pub const MODE_SINGLE: u8 = 0x01;
pub const MODE_MULTI: u8 = 0x02;
pub const KDF_INFO: &[u8] = b"RBE-DEM-v1";
pub const NONCE_BYTES: usize = 12;
pub const TAG_BYTES: usize = 16;

pub fn derive_dek(key: &GtElement) -> [u8; 32] {
    let hk = Hkdf::<Sha256>::new(None, &key.to_bytes());
    let mut out = [0u8; 32];
    hk.expand(KDF_INFO, &mut out)
        .expect("32 bytes is a valid HKDF-SHA256 output length");
    out
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SealedPayload {
    pub nonce: [u8; NONCE_BYTES],
    pub body: Vec<u8>,
}

pub fn seal<R: RngCore + CryptoRng>(key: &GtElement, msg: &[u8], aad: &[u8], rng: &mut R) -> SealedPayload {
    let mut nonce = [0u8; NONCE_BYTES];
    rng.fill_bytes(&mut nonce);
    let cipher = Aes256Gcm::new(&derive_dek(key).into());
    let body = cipher
        .encrypt(Nonce::from_slice(&nonce), Payload { msg, aad })
        .expect("AES-GCM encryption of an in-memory buffer");
    SealedPayload { nonce, body }
}

/// Fails with `AuthFailure` on a wrong key or any modified byte.
pub fn open(key: &GtElement, sp: &SealedPayload, aad: &[u8]) -> Result<Vec<u8>> {
    let cipher = Aes256Gcm::new(&derive_dek(key).into());
    cipher
        .decrypt(
            Nonce::from_slice(&sp.nonce),
            Payload {
                msg: &sp.body,
                aad,
            },
        )
        .map_err(|_| Error::AuthFailure)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Kem {
    Single(KemCiphertext),
    Multi(MultiKemCiphertext),
}

impl Kem {
    pub fn c1(&self) -> &GtElement {
        match self {
            Kem::Single(ct) => &ct.c1,
            Kem::Multi(ct) => &ct.c1,
        }
    }

    /// Number of G1 and GT elements carried.
    pub fn element_counts(&self) -> (usize, usize) {
        match self {
            Kem::Single(ct) => (ct.g1_count(), ct.gt_count()),
            Kem::Multi(ct) => (ct.g1_count(), ct.gt_count()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Container {
    pub suite: u8,
    pub kem: Kem,
    pub payload: SealedPayload,
}

impl Container {
    /// Encapsulation and seal in one step; `key` is the KEM output for `kem`.
    pub fn seal<R: RngCore + CryptoRng>(kem: Kem, key: &GtElement, msg: &[u8], rng: &mut R) -> Self {
        let aad = header_bytes(SUITE_HKDF_SHA256_AES256GCM, &kem);
        let payload = seal(key, msg, &aad, rng);
        Container {
            suite: SUITE_HKDF_SHA256_AES256GCM,
            kem,
            payload,
        }
    }

    pub fn open(&self, key: &GtElement) -> Result<Vec<u8>> {
        open(key, &self.payload, &self.header())
    }

    pub fn header(&self) -> Vec<u8> {
        header_bytes(self.suite, &self.kem)
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = self.header();
        out.extend_from_slice(&self.payload.nonce);
        out.extend_from_slice(&self.payload.body);
        out
    }

    pub fn decode(ctx: &PairingContext, bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        r.expect(MAGIC)?;
        let suite = r.u8()?;
        if suite != SUITE_HKDF_SHA256_AES256GCM {
            return Err(Error::Decode(format!("unknown suite {suite:#04x}")));
        }
        let kem = match r.u8()? {
            MODE_SINGLE => {
                let org = r.str()?;
                let role = RoleId::new(&org, &r.str()?);
                let c1 = r.record(ctx)?.into_gt()?;
                let c2 = r.record(ctx)?.into_g1()?;
                let c_role = r.record(ctx)?.into_g1()?;
                let c3 = read_c3(ctx, &mut r, &org)?;
                Kem::Single(KemCiphertext {
                    c1,
                    c2,
                    components: RoleComponents { role, c_role, c3 },
                })
            }
            MODE_MULTI => {
                let org = r.str()?;
                let guest_org = r.str()?;
                let role = RoleId::new(&org, &r.str()?);
                let guest_role = RoleId::new(&guest_org, &r.str()?);
                let c1 = r.record(ctx)?.into_gt()?;
                let c2 = r.record(ctx)?.into_g1()?;
                let c2_guest = r.record(ctx)?.into_g1()?;
                let c_role = r.record(ctx)?.into_g1()?;
                let c_role_guest = r.record(ctx)?.into_g1()?;
                let c3 = read_c3(ctx, &mut r, &org)?;
                let c3_guest = read_c3(ctx, &mut r, &guest_org)?;
                Kem::Multi(MultiKemCiphertext {
                    c1,
                    c2,
                    c2_guest,
                    host: RoleComponents { role, c_role, c3 },
                    guest: RoleComponents {
                        role: guest_role,
                        c_role: c_role_guest,
                        c3: c3_guest,
                    },
                })
            }
            m => return Err(Error::Decode(format!("unknown mode {m:#04x}"))),
        };
        let nonce: [u8; NONCE_BYTES] = r.take(NONCE_BYTES)?.try_into().expect("length checked");
        let body = r.rest().to_vec();
        if body.len() < TAG_BYTES {
            return Err(Error::Decode("payload shorter than the authentication tag".into()));
        }
        Ok(Container {
            suite,
            kem,
            payload: SealedPayload { nonce, body },
        })
    }
}

fn header_bytes(suite: u8, kem: &Kem) -> Vec<u8> {
    let mut out = MAGIC.to_vec();
    out.push(suite);
    match kem {
        Kem::Single(ct) => {
            out.push(MODE_SINGLE);
            put_str(&mut out, ct.org());
            put_str(&mut out, ct.role().name());
            WireElement::Gt(ct.c1.clone()).encode_into(&mut out);
            WireElement::G1(ct.c2.clone()).encode_into(&mut out);
            WireElement::G1(ct.components.c_role.clone()).encode_into(&mut out);
            write_c3(&mut out, &ct.components.c3);
        }
        Kem::Multi(ct) => {
            out.push(MODE_MULTI);
            put_str(&mut out, ct.host_org());
            put_str(&mut out, ct.guest_org());
            put_str(&mut out, ct.host.role.name());
            put_str(&mut out, ct.guest.role.name());
            WireElement::Gt(ct.c1.clone()).encode_into(&mut out);
            WireElement::G1(ct.c2.clone()).encode_into(&mut out);
            WireElement::G1(ct.c2_guest.clone()).encode_into(&mut out);
            WireElement::G1(ct.host.c_role.clone()).encode_into(&mut out);
            WireElement::G1(ct.guest.c_role.clone()).encode_into(&mut out);
            write_c3(&mut out, &ct.host.c3);
            write_c3(&mut out, &ct.guest.c3);
        }
    }
    out
}

fn write_c3(out: &mut Vec<u8>, c3: &BTreeMap<RoleId, crate::algebra::G1Element>) {
    put_u16(out, c3.len());
    for (role, c) in c3 {
        put_str(out, role.name());
        WireElement::G1(c.clone()).encode_into(out);
    }
}

fn read_c3(
    ctx: &PairingContext,
    r: &mut Reader<'_>,
    org: &str,
) -> Result<BTreeMap<RoleId, crate::algebra::G1Element>> {
    let n = r.u16()?;
    let mut out = BTreeMap::new();
    let mut last: Option<String> = None;
    for _ in 0..n {
        let name = r.str()?;
        if last.as_deref().is_some_and(|l| l >= name.as_str()) {
            return Err(Error::Decode("C3 entries out of order".into()));
        }
        let c = r.record(ctx)?.into_g1()?;
        out.insert(RoleId::new(org, &name), c);
        last = Some(name);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::setup_pairing;
    use crate::hierarchy::build_hierarchy;
    use crate::mo_rbe;
    use crate::so_rbe;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn dek_is_deterministic_and_key_dependent() {
        let ctx = setup_pairing(128).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        for _ in 0..20 {
            let k = ctx.random_gt(&mut rng);
            let k2 = ctx.random_gt(&mut rng);
            assert_eq!(derive_dek(&k), derive_dek(&k));
            assert_ne!(derive_dek(&k), derive_dek(&k2));
            assert_eq!(derive_dek(&k).len(), 32);
        }
    }

    #[test]
    fn seal_open() {
        let ctx = setup_pairing(128).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let k = ctx.random_gt(&mut rng);
        for msg in [&b""[..], b"x", &[7u8; 1000]] {
            let sp = seal(&k, msg, b"hdr", &mut rng);
            assert_eq!(sp.body.len(), msg.len() + TAG_BYTES);
            assert_eq!(open(&k, &sp, b"hdr").unwrap(), msg);
            assert_eq!(open(&k, &sp, b"hdX").unwrap_err(), Error::AuthFailure);
            let other = ctx.random_gt(&mut rng);
            assert_eq!(open(&other, &sp, b"hdr").unwrap_err(), Error::AuthFailure);
        }
        let a = seal(&k, b"m", b"", &mut rng);
        let b = seal(&k, b"m", b"", &mut rng);
        assert_ne!(a.nonce, b.nonce);
    }

    #[test]
    fn any_flipped_byte_fails() {
        let ctx = setup_pairing(128).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let k = ctx.random_gt(&mut rng);
        let sp = seal(&k, b"payload", b"aad", &mut rng);
        for i in 0..sp.body.len() {
            let mut bad = sp.clone();
            bad.body[i] ^= 0x01;
            assert_eq!(open(&k, &bad, b"aad").unwrap_err(), Error::AuthFailure);
        }
        for i in 0..NONCE_BYTES {
            let mut bad = sp.clone();
            bad.nonce[i] ^= 0x80;
            assert!(open(&k, &bad, b"aad").is_err());
        }
    }

    fn setup(seed: u64) -> (PairingContext, ChaCha20Rng, Vec<(so_rbe::PublicParams, BTreeMap<RoleId, so_rbe::RolePublicKey>)>) {
        let ctx = setup_pairing(128).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut orgs = Vec::new();
        for org in ["a", "b"] {
            let h = build_hierarchy(org, ["p", "q", "s"], [("p", "q")]).unwrap();
            let (_, pp, _) = so_rbe::init(&ctx, org, &mut rng).unwrap();
            let (_, rpks, _) = so_rbe::role_para_gen(&ctx, &pp, &h, &mut rng).unwrap();
            orgs.push((pp, rpks));
        }
        (ctx, rng, orgs)
    }

    #[test]
    fn single_container_round_trip_and_layout() {
        let (ctx, mut rng, orgs) = setup(4);
        let (pp, rpks) = &orgs[0];
        let rpk = &rpks[&RoleId::new("a", "q")];
        let (k, kem) = so_rbe::kem_encrypt(&ctx, pp, rpk, &mut rng).unwrap();
        let c = Container::seal(Kem::Single(kem), &k, b"hello", &mut rng);
        let bytes = c.encode();
        assert_eq!(&bytes[..6], b"RBEC\x01\x01");
        let header = 6 + (2 + 1) + (2 + 1) + (3 + 576) + 2 * (3 + 144) + 2 + 2 * (2 + 1 + 3 + 144);
        assert_eq!(bytes.len(), header + NONCE_BYTES + 5 + TAG_BYTES);
        let back = Container::decode(&ctx, &bytes).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.open(&k).unwrap(), b"hello");
        assert_eq!(back.kem.element_counts(), (4, 1));
        for cut in [0, 5, 20, header, header + 11, header + NONCE_BYTES + TAG_BYTES - 1] {
            assert!(Container::decode(&ctx, &bytes[..cut]).is_err(), "cut {cut}");
        }
        let short = Container::decode(&ctx, &bytes[..bytes.len() - 1]).unwrap();
        assert_eq!(short.open(&k).unwrap_err(), Error::AuthFailure);
    }

    #[test]
    fn header_tampering_is_detected() {
        let (ctx, mut rng, orgs) = setup(5);
        let (pp, rpks) = &orgs[0];
        let (k, kem) = so_rbe::kem_encrypt(&ctx, pp, &rpks[&RoleId::new("a", "s")], &mut rng).unwrap();
        let c = Container::seal(Kem::Single(kem), &k, b"hello", &mut rng);
        let mut bytes = c.encode();
        // rename the role "s" -> "t"; still parses, fails authentication
        bytes[11] = b't';
        let bad = Container::decode(&ctx, &bytes).unwrap();
        assert_eq!(bad.open(&k).unwrap_err(), Error::AuthFailure);
    }

    #[test]
    fn multi_container_round_trip() {
        let (ctx, mut rng, orgs) = setup(6);
        let joint = mo_rbe::role_pub_key_update(
            &orgs[0].1[&RoleId::new("a", "q")],
            &orgs[1].1[&RoleId::new("b", "p")],
        )
        .unwrap();
        let (k, kem) = mo_rbe::multi_kem_encrypt(&ctx, &orgs[0].0, &orgs[1].0, &joint, &mut rng).unwrap();
        let c = Container::seal(Kem::Multi(kem), &k, b"", &mut rng);
        let bytes = c.encode();
        assert_eq!(bytes[5], MODE_MULTI);
        let back = Container::decode(&ctx, &bytes).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.open(&k).unwrap(), b"");
        assert_eq!(back.kem.element_counts(), (4 + 2 + 1, 1));
    }
}
