mod common;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rbe_core::actors::{run_scenario, Outcome};
use rbe_core::algebra::setup_pairing;
use rbe_core::bench::OrgFixture;
use rbe_core::board::BulletinBoard;
use rbe_core::envelope::{Container, Kem};
use rbe_core::error::Error;
use rbe_core::mo_rbe::{self, ReKeyStore};
use rbe_core::so_rbe;

use common::*;

#[test]
fn fig1_oracle_agrees_with_listed_sets_and_closure() {
    let h = fig1("A");
    for (role, ancestors) in FIG1_ANCESTORS {
        let r = h.role(role).unwrap();
        let names: Vec<&str> = h.ancestors(&r).unwrap().iter().map(|x| x.name()).collect();
        assert_eq!(names, ancestors, "{role}");
    }
    // Independently listed sets for three roles.
    let a = |r| FIG1_ANCESTORS.iter().find(|(n, _)| *n == r).unwrap().1;
    assert_eq!(a("r8"), ["r1", "r2", "r4", "r5", "r6", "r7", "r8"]);
    assert_eq!(a("r5"), ["r1", "r2", "r5"]);
    assert_eq!(a("r6"), ["r1", "r2", "r4", "r6"]);
}

#[test]
fn so_container_round_trip_for_every_qualified_holder() {
    let ctx = setup_pairing(128).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let fx = OrgFixture::new(&ctx, fig1("A"), &mut rng).unwrap();
    let mut board = BulletinBoard::new();
    let names = by_name(&fx.hierarchy);
    let users: Vec<_> = names
        .values()
        .map(|r| (r.clone(), fx.enroll(&ctx, &mut board, &format!("u-{}", r.name()), r, &mut rng).unwrap()))
        .collect();
    let target = &names["r6"];
    let (key, kem) = fx.encrypt(&ctx, target, &mut rng).unwrap();
    let bytes = Container::seal(Kem::Single(kem), &key, b"minutes of the board meeting", &mut rng).encode();
    let container = Container::decode(&ctx, &bytes).unwrap();
    let Kem::Single(ct) = &container.kem else { panic!("single") };
    for (held, (cred, rk)) in &users {
        let (trk, v) = so_rbe::transform_role_key(&ctx, rk, &mut rng).unwrap();
        let res = so_rbe::cloud_partial_dec(&ctx, &board, ct, &trk, &fx.hierarchy);
        if fig1_authorized(held.name(), "r6") {
            let k = so_rbe::user_finalize(&ctx, &ct.c1, &res.unwrap(), v, &cred.private_key()).unwrap();
            assert_eq!(container.open(&k).unwrap(), b"minutes of the board meeting");
        } else {
            assert!(matches!(res, Err(Error::UnauthorizedRole { .. })), "{held}");
        }
    }
}

#[test]
fn revoked_user_is_refused_by_both_clouds() {
    let ctx = setup_pairing(128).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(2);
    let guest = OrgFixture::new(&ctx, fig1("B"), &mut rng).unwrap();
    let mut board = BulletinBoard::new();
    let r1 = guest.role("r1").unwrap();
    let (_, rk) = guest.enroll(&ctx, &mut board, "eve", &r1, &mut rng).unwrap();
    let (_, ct) = guest.encrypt(&ctx, &guest.role("r8").unwrap(), &mut rng).unwrap();
    so_rbe::u_revoke(&mut board, "B", "eve").unwrap();
    let (trk, _) = so_rbe::transform_role_key(&ctx, &rk, &mut rng).unwrap();
    let before = ctx.counter().snapshot();
    assert!(matches!(
        so_rbe::cloud_partial_dec(&ctx, &board, &ct, &trk, &guest.hierarchy),
        Err(Error::RevokedUser(_))
    ));
    assert!(matches!(
        mo_rbe::make_tdk(&ctx, &board, &trk, &guest.msk.sigma()),
        Err(Error::RevokedUser(_))
    ));
    assert_eq!(ctx.counter().snapshot() - before, Default::default());
    assert!(matches!(so_rbe::u_revoke(&mut board, "B", "eve"), Err(Error::UnknownUser(_))));
}

#[test]
fn multi_org_decrypts_for_guest_and_host_and_refuses_unlinked() {
    let ctx = setup_pairing(128).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    let a = OrgFixture::new(&ctx, fig1("A"), &mut rng).unwrap();
    let b = OrgFixture::new(&ctx, fig1("B"), &mut rng).unwrap();
    let c = OrgFixture::new(&ctx, fig1("C"), &mut rng).unwrap();
    let mut board = BulletinBoard::new();
    let mut store = ReKeyStore::new("A");
    store
        .insert(mo_rbe::make_rekey(&ctx, &a.msk, &mo_rbe::long_key_share(&ctx, &b.msk).unwrap()).unwrap())
        .unwrap();

    let joint = mo_rbe::role_pub_key_update(&a.rpks[&a.role("r7").unwrap()], &b.rpks[&b.role("r5").unwrap()]).unwrap();
    let (key, mct) = mo_rbe::multi_kem_encrypt(&ctx, &a.pp, &b.pp, &joint, &mut rng).unwrap();

    let (bob, bob_rk) = b.enroll(&ctx, &mut board, "bob", &b.role("r2").unwrap(), &mut rng).unwrap();
    let c1p = mo_rbe::translate_c1(&ctx, &store, "B", &mct.c1, &mct.c2, &a.msk.eta()).unwrap();
    let (trk, v) = so_rbe::transform_role_key(&ctx, &bob_rk, &mut rng).unwrap();
    let tdk = mo_rbe::make_tdk(&ctx, &board, &trk, &b.msk.sigma()).unwrap();
    let pd = mo_rbe::multi_cloud_partial_dec(&ctx, &mct, &tdk, &b.hierarchy).unwrap();
    assert_eq!(mo_rbe::multi_user_finalize(&ctx, &c1p, &pd, v, &bob.private_key()).unwrap(), key);

    // Host users go through the single-organization path.
    let (alice, alice_rk) = a.enroll(&ctx, &mut board, "alice", &a.role("r4").unwrap(), &mut rng).unwrap();
    let view = mct.host_view();
    let (trk, v) = so_rbe::transform_role_key(&ctx, &alice_rk, &mut rng).unwrap();
    let pd = so_rbe::cloud_partial_dec(&ctx, &board, &view, &trk, &a.hierarchy).unwrap();
    assert_eq!(so_rbe::user_finalize(&ctx, &view.c1, &pd, v, &alice.private_key()).unwrap(), key);

    // Guest role not above the joint key's guest role.
    let (_, r3_rk) = b.enroll(&ctx, &mut board, "b3", &b.role("r3").unwrap(), &mut rng).unwrap();
    let (trk, _) = so_rbe::transform_role_key(&ctx, &r3_rk, &mut rng).unwrap();
    let tdk = mo_rbe::make_tdk(&ctx, &board, &trk, &b.msk.sigma()).unwrap();
    assert!(matches!(
        mo_rbe::multi_cloud_partial_dec(&ctx, &mct, &tdk, &b.hierarchy),
        Err(Error::UnauthorizedRole { .. })
    ));

    let joint_c = mo_rbe::role_pub_key_update(&a.rpks[&a.role("r7").unwrap()], &c.rpks[&c.role("r5").unwrap()]).unwrap();
    let (_, mct_c) = mo_rbe::multi_kem_encrypt(&ctx, &a.pp, &c.pp, &joint_c, &mut rng).unwrap();
    assert!(matches!(
        mo_rbe::translate_c1(&ctx, &store, "C", &mct_c.c1, &mct_c.c2, &a.msk.eta()),
        Err(Error::MissingReKey { .. })
    ));
}

#[test]
fn exponent_ledger_few_seeds() {
    let ctx = setup_pairing(128).unwrap();
    for seed in 0..3 {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let a = OrgFixture::new(&ctx, fig1("A"), &mut rng).unwrap();
        let b = OrgFixture::new(&ctx, random_dag(&mut rng, "B", 6), &mut rng).unwrap();
        assert!(ledger_so(&ctx, &a, &mut rng).unwrap() > 0);
        let pairs: Vec<_> = b.hierarchy.roles().iter().take(3).map(|g| (a.role("r8").unwrap(), g.clone())).collect();
        assert!(ledger_mo(&ctx, &a, &b, &pairs, &mut rng).unwrap() > 0);
    }
}

#[test]
fn canned_scenarios_decrypt_and_are_deterministic() {
    for name in rbe_core::actors::canned_scenario_names() {
        let script = rbe_core::actors::canned_scenario(name).unwrap();
        let t1 = run_scenario(script, 5).map_err(|(_, e)| e).unwrap();
        let t2 = run_scenario(script, 5).map_err(|(_, e)| e).unwrap();
        assert_eq!(t1.to_text(), t2.to_text(), "{name}");
        assert!(t1.steps.iter().any(|s| matches!(s.outcome, Outcome::Plaintext { .. })), "{name}");
        assert!(rbe_core::actors::audit_secret_residency(&t1).is_empty(), "{name}");
        let t3 = run_scenario(script, 6).map_err(|(_, e)| e).unwrap();
        assert_ne!(t1.to_text(), t3.to_text(), "{name}");
    }
}
