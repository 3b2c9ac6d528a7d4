use proptest::prelude::*;

use twd_core::augment::{apply_fixed_drop, twd, twd_multi, DropConfig};
use twd_core::config::Config;
use twd_core::data_io::{decode_dataset, encode_dataset};
use twd_core::metrics::{ade, fde, rd_percent};
use twd_core::predictors::{Hyper, Network};
use twd_core::types::{Dataset, FutureWindow, ObservedWindow, Scene, Split, Tracks, Waypoint};
use twd_core::RandomSource;

fn tracks(agents: usize, len: usize) -> impl Strategy<Value = Tracks> {
    prop::collection::vec((-100.0f64..100.0, -100.0f64..100.0), agents * len)
        .prop_map(move |xy| Tracks::from_flat(agents, len, xy.into_iter().map(Waypoint::from).collect()).unwrap())
}

fn scene_with(agents: usize, n: usize, m: usize) -> impl Strategy<Value = Scene> {
    (tracks(agents, n), tracks(agents, m))
        .prop_map(|(o, f)| Scene::new(ObservedWindow::anonymous(o), FutureWindow::new(f), 0.4).unwrap())
}

fn scene() -> impl Strategy<Value = Scene> {
    (1usize..5, 2usize..10, 1usize..6).prop_flat_map(|(a, n, m)| scene_with(a, n, m))
}

proptest! {
    #[test]
    fn drops_restore_length_and_keep_future(s in scene(), seed in any::<u64>(), d in 0usize..4) {
        let n = s.observed().len();
        prop_assume!(d < n);
        let (out, rec) = twd(&s, &mut RandomSource::new(seed), DropConfig::new(d)).unwrap();
        prop_assert_eq!(out.observed().len(), n);
        prop_assert_eq!(out.observed().agents(), s.observed().agents());
        prop_assert_eq!(out.future(), s.future());
        prop_assert_eq!(rec.dropped_indices.len(), d);
    }

    #[test]
    fn multi_drop_keeps_survivors_in_order(s in scene(), seed in any::<u64>(), d in 1usize..4) {
        let n = s.observed().len();
        prop_assume!(d < n);
        let (out, rec) = twd_multi(&s, &mut RandomSource::new(seed), DropConfig::new(d)).unwrap();
        let mut dropped = rec.dropped_indices.clone();
        dropped.sort_unstable();
        dropped.dedup();
        prop_assert_eq!(dropped.len(), d);
        prop_assert!(dropped.iter().all(|&k| (1..=n).contains(&k)));
        for a in 0..s.observed().agents() {
            let survivors: Vec<Waypoint> = s.observed().agent(a).iter().enumerate()
                .filter(|(t, _)| !dropped.contains(&(t + 1)))
                .map(|(_, p)| *p)
                .collect();
            let got = out.observed().agent(a);
            prop_assert_eq!(&got[d..], survivors.as_slice());
            prop_assert!(got[..d].iter().all(|p| *p == survivors[0]));
        }
    }

    #[test]
    fn fixed_drop_preserves_suffix(s in scene(), k_raw in any::<usize>()) {
        let n = s.observed().len();
        let k = 1 + k_raw % n;
        let out = apply_fixed_drop(&s, k).unwrap();
        for a in 0..s.observed().agents() {
            prop_assert_eq!(&out.observed().agent(a)[k..], &s.observed().agent(a)[k..]);
            prop_assert_eq!(&out.observed().agent(a)[1..k], &s.observed().agent(a)[..k - 1]);
        }
    }

    #[test]
    fn ade_fde_symmetric_and_translation_invariant(
        (a, b) in (1usize..4, 1usize..8).prop_flat_map(|(n, l)| (tracks(n, l), tracks(n, l))),
        dx in -50.0f64..50.0, dy in -50.0f64..50.0,
    ) {
        prop_assert_eq!(ade(&a, &b).unwrap(), ade(&b, &a).unwrap());
        prop_assert_eq!(fde(&a, &b).unwrap(), fde(&b, &a).unwrap());
        let off = Waypoint::new(dx, dy);
        let moved = ade(&a.translated(off), &b.translated(off)).unwrap();
        prop_assert!((moved - ade(&a, &b).unwrap()).abs() < 1e-9);
        prop_assert!(fde(&a, &b).unwrap() <= a.iter_agents().zip(b.iter_agents())
            .map(|(p, g)| p.iter().zip(g).map(|(x, y)| x.distance(y)).fold(0.0, f64::max))
            .sum::<f64>() / a.agents() as f64 + 1e-12);
    }

    #[test]
    fn rd_symmetric_and_bounded(x in 0.0f64..100.0, y in 1e-6f64..100.0) {
        let r = rd_percent(x, y).unwrap();
        prop_assert_eq!(r, rd_percent(y, x).unwrap());
        prop_assert!((0.0..=200.0).contains(&r));
    }

    #[test]
    fn container_round_trip(
        scenes in (1usize..4, 2usize..6, 1usize..5)
            .prop_flat_map(|(a, n, m)| prop::collection::vec(scene_with(a, n, m), 1..5)),
    ) {
        let ds = Dataset::new(scenes, Split::Validation).unwrap();
        let back = decode_dataset(&encode_dataset(&ds)).unwrap();
        prop_assert_eq!(back, ds);
    }

    #[test]
    fn config_render_round_trip(entries in prop::collection::btree_map("[a-z][a-z0-9_.]{0,12}", "[A-Za-z0-9_.,-]{0,10}", 0..8)) {
        let mut cfg = Config::new();
        for (k, v) in &entries {
            cfg.set(k, v.as_str());
        }
        prop_assert_eq!(Config::parse(&cfg.render()).unwrap(), cfg);
    }

    #[test]
    fn forward_translation_equivariant(o in tracks(2, 6), seed in any::<u64>(), dx in -20.0f64..20.0, dy in -20.0f64..20.0) {
        let net = Network::init(Hyper::new(6, 4, 8, 2).unwrap(), &mut RandomSource::new(seed)).unwrap();
        let off = Waypoint::new(dx, dy);
        let base = net.forward(&ObservedWindow::anonymous(o.clone())).unwrap();
        let moved = net.forward(&ObservedWindow::anonymous(o.translated(off))).unwrap();
        for (p, q) in base.samples().iter().zip(moved.samples()) {
            for (u, v) in p.points().iter().zip(q.points()) {
                prop_assert!((*u + off).distance(v) < 1e-9);
            }
        }
    }
}
