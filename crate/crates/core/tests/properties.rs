mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rbe_core::algebra::{setup_pairing, PairingContext};
use rbe_core::bench::OrgFixture;
use rbe_core::board::BulletinBoard;
use rbe_core::envelope::{Container, Kem};
use rbe_core::error::Error;
use rbe_core::hierarchy::{build_hierarchy, RoleHierarchy};
use rbe_core::so_rbe;

use common::*;

/// Role count plus a strictly upper-triangular adjacency bitmap.
fn dag() -> impl Strategy<Value = RoleHierarchy> {
    (2usize..=12)
        .prop_flat_map(|n| (Just(n), proptest::collection::vec(any::<bool>(), n * (n - 1) / 2)))
        .prop_map(|(n, bits)| {
            let names: Vec<String> = (0..n).map(|i| format!("p{i}")).collect();
            let mut edges = Vec::new();
            let mut k = 0;
            for i in 0..n {
                for j in i + 1..n {
                    if bits[k] {
                        edges.push((names[i].as_str(), names[j].as_str()));
                    }
                    k += 1;
                }
            }
            build_hierarchy("P", names.iter().map(String::as_str), edges).unwrap()
        })
        .prop_filter("complement sets must be non-empty", |h| {
            h.roles().iter().all(|r| !h.non_ancestors(r).unwrap().is_empty())
        })
}

thread_local! {
    static CTX: PairingContext = setup_pairing(128).unwrap();
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn closure_matches_naive_relaxation(h in dag()) {
        for r in h.roles() {
            let fast: BTreeSet<_> = h.ancestors(r).unwrap().iter().cloned().collect();
            prop_assert_eq!(fast, naive_ancestors(&h, r));
        }
    }

    #[test]
    fn gamma_telescopes(h in dag()) {
        for (x, i) in role_pairs(&h) {
            let ai = naive_ancestors(&h, &i);
            if !ai.contains(&x) {
                prop_assert!(h.gamma(&x, &i).is_err() || !h.is_ancestor(&x, &i).unwrap());
                continue;
            }
            let gamma: BTreeSet<_> = h.gamma(&x, &i).unwrap().iter().cloned().collect();
            let abar_i = complement(&h, &ai);
            let abar_x = complement(&h, &naive_ancestors(&h, &x));
            prop_assert!(gamma.is_disjoint(&abar_i));
            let union: BTreeSet<_> = abar_i.union(&gamma).cloned().collect();
            prop_assert_eq!(union, abar_x);
        }
    }

    #[test]
    fn text_form_round_trips(h in dag()) {
        let back = RoleHierarchy::parse("P", &h.to_text()).unwrap();
        prop_assert_eq!(back.to_text(), h.to_text());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn kem_correct_iff_qualified(h in dag(), seed in any::<u64>(), msg in proptest::collection::vec(any::<u8>(), 0..200)) {
        CTX.with(|ctx| {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let fx = OrgFixture::new(ctx, h, &mut rng).unwrap();
            let mut board = BulletinBoard::new();
            let roles: Vec<_> = fx.hierarchy.roles().iter().cloned().collect();
            let target = roles[(seed as usize) % roles.len()].clone();
            let (key, kem) = fx.encrypt(ctx, &target, &mut rng).unwrap();
            prop_assert_eq!(kem.g1_count(), naive_ancestors(&fx.hierarchy, &target).len() + 2);
            let container = Container::seal(Kem::Single(kem.clone()), &key, &msg, &mut rng);
            for held in &roles {
                let (cred, rk) = fx.enroll(ctx, &mut board, &format!("u-{}", held.name()), held, &mut rng).unwrap();
                let (trk, v) = so_rbe::transform_role_key(ctx, &rk, &mut rng).unwrap();
                let qualified = naive_ancestors(&fx.hierarchy, &target).contains(held);
                let gated = so_rbe::cloud_partial_dec(ctx, &board, &kem, &trk, &fx.hierarchy);
                prop_assert_eq!(gated.is_ok(), qualified);
                let pd = so_rbe::cloud_partial_dec_ungated(ctx, &board, &kem, &trk, &fx.hierarchy).unwrap();
                let k = so_rbe::user_finalize(ctx, &kem.c1, &pd, v, &cred.private_key()).unwrap();
                if qualified {
                    prop_assert_eq!(&k, &key);
                    prop_assert_eq!(container.open(&k).unwrap(), msg.clone());
                } else {
                    prop_assert!(k != key);
                    prop_assert_eq!(container.open(&k), Err(Error::AuthFailure));
                }
            }
            Ok(())
        })?;
    }
}
