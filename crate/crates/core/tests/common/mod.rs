#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use rand::{CryptoRng, Rng, RngCore};
use rbe_core::algebra::{G1Element, GtElement, PairingContext, Scalar};
use rbe_core::bench::OrgFixture;
use rbe_core::board::BulletinBoard;
use rbe_core::hierarchy::{build_hierarchy, RoleHierarchy, RoleId};
use rbe_core::mo_rbe::{self, ReKeyStore};
use rbe_core::so_rbe::{self, identity_bytes};

/// Ancestor sets of the eight-role example hierarchy, written out by hand
/// from its edge list.
pub const FIG1_ANCESTORS: [(&str, &[&str]); 8] = [
    ("r1", &["r1"]),
    ("r2", &["r1", "r2"]),
    ("r3", &["r1", "r3"]),
    ("r4", &["r1", "r4"]),
    ("r5", &["r1", "r2", "r5"]),
    ("r6", &["r1", "r2", "r4", "r6"]),
    ("r7", &["r1", "r4", "r7"]),
    ("r8", &["r1", "r2", "r4", "r5", "r6", "r7", "r8"]),
];

pub fn fig1_authorized(held: &str, target: &str) -> bool {
    FIG1_ANCESTORS
        .iter()
        .find(|(r, _)| *r == target)
        .map(|(_, a)| a.contains(&held))
        .expect("fig1 role")
}

pub fn fig1(org: &str) -> RoleHierarchy {
    RoleHierarchy::parse(org, rbe_core::actors::FIG1_HIERARCHY).unwrap()
}

/// Random DAG on at most `max` roles with every complement set non-empty.
/// Edges only run from lower to higher index, so the result is acyclic;
/// role names are shuffled so index order is not name order.
pub fn random_dag<R: RngCore>(rng: &mut R, org: &str, max: usize) -> RoleHierarchy {
    loop {
        let n = rng.gen_range(2..=max);
        let density: f64 = rng.gen_range(0.1..0.6);
        let mut labels: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            labels.swap(i, rng.gen_range(0..=i));
        }
        let names: Vec<String> = labels.iter().map(|l| format!("q{l}")).collect();
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if rng.gen_bool(density) {
                    edges.push((names[i].as_str(), names[j].as_str()));
                }
            }
        }
        let h = build_hierarchy(org, names.iter().map(String::as_str), edges).unwrap();
        if h.roles().iter().all(|r| !h.non_ancestors(r).unwrap().is_empty()) {
            return h;
        }
    }
}

/// Reference ancestor closure by repeated edge relaxation.
pub fn naive_ancestors(h: &RoleHierarchy, r: &RoleId) -> BTreeSet<RoleId> {
    let mut set: BTreeSet<RoleId> = [r.clone()].into();
    loop {
        let before = set.len();
        for (p, c) in h.edges() {
            if set.contains(c) {
                set.insert(p.clone());
            }
        }
        if set.len() == before {
            return set;
        }
    }
}

pub fn complement(h: &RoleHierarchy, set: &BTreeSet<RoleId>) -> BTreeSet<RoleId> {
    h.roles().iter().filter(|r| !set.contains(*r)).cloned().collect()
}

/// Ledger check: the element's bytes equal `g^expected`, computed without
/// counting.
pub fn g1_is(ctx: &PairingContext, x: &G1Element, expected: Scalar, what: &str) -> Result<(), String> {
    if !ctx.ledger_sound_g1(x) {
        return Err(format!("{what}: ledger does not match the element"));
    }
    if ctx.raw_g_pow(&expected).to_bytes() != x.to_bytes() {
        return Err(format!("{what}: element differs from g^expected"));
    }
    Ok(())
}

pub fn gt_is(ctx: &PairingContext, x: &GtElement, expected: Scalar, what: &str) -> Result<(), String> {
    if !ctx.ledger_sound_gt(x) {
        return Err(format!("{what}: ledger does not match the element"));
    }
    if ctx.raw_gt_pow(&expected).to_bytes() != x.to_bytes() {
        return Err(format!("{what}: element differs from e(g,g)^expected"));
    }
    Ok(())
}

fn inv(s: Scalar) -> Scalar {
    s.invert().expect("nonzero")
}

fn sum_t(fx: &OrgFixture, set: &BTreeSet<RoleId>) -> Scalar {
    Scalar::sum(set.iter().map(|r| &fx.params.t()[r]))
}

fn check_org(ctx: &PairingContext, fx: &OrgFixture) -> Result<usize, String> {
    let (y, delta, eta) = (fx.msk.y(), fx.msk.delta(), fx.msk.eta());
    let mut n = 0;
    gt_is(ctx, fx.pp.y_pub(), y, "Y")?;
    gt_is(ctx, fx.pp.v_pub(), delta, "V")?;
    g1_is(ctx, fx.pp.h(), eta, "h")?;
    g1_is(ctx, &fx.g_delta, delta, "g^delta")?;
    n += 4;
    for r in fx.hierarchy.roles() {
        let abar = complement(&fx.hierarchy, &naive_ancestors(&fx.hierarchy, r));
        let s = sum_t(fx, &abar);
        let rpk = &fx.rpks[r];
        g1_is(ctx, rpk.pk(), s, &format!("PK {r}"))?;
        for (l, ar) in rpk.ar() {
            g1_is(ctx, ar, fx.params.t()[l], &format!("AR {l}"))?;
        }
        if fx.rss[r].value() * s != Scalar::ONE {
            return Err(format!("RS {r} is not the inverse of the complement sum"));
        }
        n += 2 + rpk.ar().len();
    }
    Ok(n)
}

/// Runs the single-organization pipeline for every role pair of `fx` with
/// ledger checks on each produced element. Returns the number of elements
/// checked.
pub fn ledger_so<R: RngCore + CryptoRng>(ctx: &PairingContext, fx: &OrgFixture, rng: &mut R) -> Result<usize, String> {
    let org = fx.hierarchy.org().to_string();
    let (y, delta, eta) = (fx.msk.y(), fx.msk.delta(), fx.msk.eta());
    let mut n = check_org(ctx, fx)?;
    let mut board = BulletinBoard::new();
    let roles: Vec<RoleId> = fx.hierarchy.roles().iter().cloned().collect();
    let mut users = Vec::new();
    for (i, r) in roles.iter().enumerate() {
        let id = format!("u{i}");
        let (cred, rk) = fx.enroll(ctx, &mut board, &id, r, rng).map_err(|e| e.to_string())?;
        let u = cred.private_key();
        let h1 = ctx.hash_to_scalar(&identity_bytes(&org, &id)).unwrap();
        g1_is(ctx, cred.public_key(), (u + h1) * delta * inv(eta), "Pub")?;
        g1_is(ctx, cred.user_secret(), y * u, "US")?;
        let abar = complement(&fx.hierarchy, &naive_ancestors(&fx.hierarchy, r));
        g1_is(ctx, rk.element(), (y * u + delta * h1) * inv(sum_t(fx, &abar)), "RK")?;
        n += 3;
        users.push((r.clone(), cred, rk, u, h1));
    }
    for target in &roles {
        let (key, ct) = fx.encrypt(ctx, target, rng).map_err(|e| e.to_string())?;
        let k = key.dlog().ok_or("K has no ledger entry")?;
        let d = ct.c2.dlog().ok_or("C2 has no ledger entry")? * inv(eta);
        g1_is(ctx, &ct.c2, eta * d, "C2")?;
        gt_is(ctx, &ct.c1, k + (y - delta) * d, "C1")?;
        let abar = complement(&fx.hierarchy, &naive_ancestors(&fx.hierarchy, target));
        g1_is(ctx, &ct.components.c_role, d * sum_t(fx, &abar), "C_role")?;
        for (l, c) in &ct.components.c3 {
            g1_is(ctx, c, d * fx.params.t()[l], "C3")?;
        }
        n += 3 + ct.components.c3.len();
        for (held, cred, rk, u, h1) in &users {
            if !naive_ancestors(&fx.hierarchy, target).contains(held) {
                continue;
            }
            let (trk, v) = so_rbe::transform_role_key(ctx, rk, rng).map_err(|e| e.to_string())?;
            let vv = v.value();
            let abar_x = complement(&fx.hierarchy, &naive_ancestors(&fx.hierarchy, held));
            g1_is(ctx, &trk.trk, vv * (y * *u + delta * *h1) * inv(sum_t(fx, &abar_x)), "TRK")?;
            let pd = so_rbe::cloud_partial_dec(ctx, &board, &ct, &trk, &fx.hierarchy).map_err(|e| e.to_string())?;
            gt_is(ctx, &pd.p, d * vv * (y * *u + delta * *h1), "P")?;
            gt_is(ctx, &pd.q, d * (*u + *h1) * delta, "Q")?;
            let got = so_rbe::user_finalize(ctx, &ct.c1, &pd, v, &cred.private_key()).map_err(|e| e.to_string())?;
            gt_is(ctx, &got, k, "K")?;
            n += 4;
        }
    }
    Ok(n)
}

/// Two organizations, guest linked to host; joint ciphertexts for a sample
/// of role pairs, decrypted by every qualified guest user, with ledger checks
/// on every produced element.
pub fn ledger_mo<R: RngCore + CryptoRng>(
    ctx: &PairingContext,
    host: &OrgFixture,
    guest: &OrgFixture,
    pairs: &[(RoleId, RoleId)],
    rng: &mut R,
) -> Result<usize, String> {
    let (yh, dh, eh) = (host.msk.y(), host.msk.delta(), host.msk.eta());
    let (yg, dg, eg, sg) = (guest.msk.y(), guest.msk.delta(), guest.msk.eta(), guest.msk.sigma());
    let mut n = check_org(ctx, host)? + check_org(ctx, guest)?;
    let lts = mo_rbe::long_key_share(ctx, &guest.msk).map_err(|e| e.to_string())?;
    g1_is(ctx, &lts.lts, (yg - dg) * sg, "LTS")?;
    let rekey = mo_rbe::make_rekey(ctx, &host.msk, &lts).map_err(|e| e.to_string())?;
    g1_is(ctx, &rekey.rk, (yg - dg) * sg - (yh - dh), "ReKey")?;
    n += 2;
    let mut store = ReKeyStore::new(host.hierarchy.org());
    store.insert(rekey).map_err(|e| e.to_string())?;

    let mut board = BulletinBoard::new();
    let gorg = guest.hierarchy.org().to_string();
    let mut users = Vec::new();
    for (i, r) in guest.hierarchy.roles().iter().enumerate() {
        let id = format!("g{i}");
        let (cred, rk) = guest.enroll(ctx, &mut board, &id, r, rng).map_err(|e| e.to_string())?;
        let h1 = ctx.hash_to_scalar(&identity_bytes(&gorg, &id)).unwrap();
        users.push((r.clone(), cred, rk, h1));
    }
    for (hr, gr) in pairs {
        let joint = mo_rbe::role_pub_key_update(&host.rpks[hr], &guest.rpks[gr]).map_err(|e| e.to_string())?;
        let (key, mct) = mo_rbe::multi_kem_encrypt(ctx, &host.pp, &guest.pp, &joint, rng).map_err(|e| e.to_string())?;
        let k = key.dlog().ok_or("K has no ledger entry")?;
        let d = mct.c2.dlog().ok_or("C2 has no ledger entry")? * inv(eh);
        gt_is(ctx, &mct.c1, k + (yh - dh) * d, "C1")?;
        g1_is(ctx, &mct.c2_guest, eg * d, "C2'")?;
        for (fx, comps, role) in [(host, &mct.host, hr), (guest, &mct.guest, gr)] {
            let abar = complement(&fx.hierarchy, &naive_ancestors(&fx.hierarchy, role));
            g1_is(ctx, &comps.c_role, d * sum_t(fx, &abar), "C_role")?;
            for (l, c) in &comps.c3 {
                g1_is(ctx, c, d * fx.params.t()[l], "C3")?;
            }
            n += 1 + comps.c3.len();
        }
        let c1p = mo_rbe::translate_c1(ctx, &store, &gorg, &mct.c1, &mct.c2, &eh).map_err(|e| e.to_string())?;
        gt_is(ctx, &c1p, k + (yg - dg) * sg * d, "C1'")?;
        n += 3;
        for (held, cred, rk, h1) in &users {
            if !naive_ancestors(&guest.hierarchy, gr).contains(held) {
                continue;
            }
            let u = cred.private_key();
            let (trk, v) = so_rbe::transform_role_key(ctx, rk, rng).map_err(|e| e.to_string())?;
            let vv = v.value();
            let tdk = mo_rbe::make_tdk(ctx, &board, &trk, &sg).map_err(|e| e.to_string())?;
            let abar_x = complement(&guest.hierarchy, &naive_ancestors(&guest.hierarchy, held));
            g1_is(ctx, &tdk.tdk, sg * vv * (yg * u + dg * *h1) * inv(sum_t(guest, &abar_x)), "TDK")?;
            g1_is(ctx, &tdk.blinded_pub, sg * (u + *h1) * dg * inv(eg), "Pub^sigma")?;
            let pd = mo_rbe::multi_cloud_partial_dec(ctx, &mct, &tdk, &guest.hierarchy).map_err(|e| e.to_string())?;
            gt_is(ctx, &pd.p, d * vv * sg * (yg * u + dg * *h1), "P'")?;
            gt_is(ctx, &pd.q, d * sg * (u + *h1) * dg, "Q'")?;
            let got = mo_rbe::multi_user_finalize(ctx, &c1p, &pd, v, &u).map_err(|e| e.to_string())?;
            gt_is(ctx, &got, k, "K")?;
            n += 5;
        }
    }
    Ok(n)
}

/// Every `(held, target)` pair of a hierarchy.
pub fn role_pairs(h: &RoleHierarchy) -> Vec<(RoleId, RoleId)> {
    let roles: Vec<RoleId> = h.roles().iter().cloned().collect();
    roles
        .iter()
        .flat_map(|a| roles.iter().map(move |b| (a.clone(), b.clone())))
        .collect()
}

pub fn by_name(h: &RoleHierarchy) -> BTreeMap<String, RoleId> {
    h.roles().iter().map(|r| (r.name().to_string(), r.clone())).collect()
}
