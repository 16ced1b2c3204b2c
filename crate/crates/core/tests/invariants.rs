//! Per-sample implications between events on shared configurations.

use percolab::explorer::Explorer;
use percolab::{Domain, EventKind, EventSpec, Point, SampleKey};
use proptest::prelude::*;

const MESH: f64 = 1.0 / 24.0;

fn hit(kind: EventKind, key: SampleKey, ex: &mut Explorer) -> bool {
    EventSpec::new(MESH, kind).compile().unwrap().evaluate(ex, &key.field()).hit
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn one_arm_is_monotone_in_radius(seed: u64, sample in 0u64..1 << 40, a in 0.05f64..0.6, b in 0.05f64..0.6) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let key = SampleKey::new(seed, sample);
        let mut ex = Explorer::new();
        let kinds: [fn(f64) -> EventKind; 2] = [|eps| EventKind::OneArm { z: Point::ORIGIN, eps }, |eps| EventKind::BoundaryArm { eps }];
        for kind in kinds {
            if hit(kind(hi), key, &mut ex) {
                prop_assert!(hit(kind(lo), key, &mut ex));
            }
        }
    }

    #[test]
    fn anchored_implies_both_arms(seed: u64, sample in 0u64..1 << 40, x in -0.4f64..0.4, y in 0.15f64..0.5) {
        let z = Point::new(x, y);
        let key = SampleKey::new(seed, sample);
        let mut ex = Explorer::new();
        if hit(EventKind::Anchored { z, box_factor: 4.0 }, key, &mut ex) {
            let eps = 0.45 * y;
            let arm = hit(EventKind::OneArm { z, eps }, key, &mut ex);
            prop_assert!(arm);
            let boundary = hit(EventKind::BoundaryArm { eps }, key, &mut ex);
            prop_assert!(boundary);
            let wider = hit(EventKind::Anchored { z, box_factor: 8.0 }, key, &mut ex);
            prop_assert!(wider);
        }
    }

    #[test]
    fn gasket_implies_one_arm(seed: u64, sample in 0u64..1 << 40, r in 0.0f64..0.8, th in 0.0f64..std::f64::consts::TAU) {
        let z = Point::polar(r, th);
        let key = SampleKey::new(seed, sample);
        let mut ex = Explorer::new();
        if hit(EventKind::Gasket { z, domain: Domain::unit_disk() }, key, &mut ex) {
            let eps = (1.0 - r - MESH) / 2.0;
            let arm = hit(EventKind::OneArm { z, eps }, key, &mut ex);
            prop_assert!(arm);
        }
    }

    #[test]
    fn images_event_implies_upper_event(seed: u64, sample in 0u64..1 << 40, x in -0.3f64..0.3, y in 0.15f64..0.4) {
        let z = Point::new(x, y);
        let key = SampleKey::new(seed, sample);
        let mut ex = Explorer::new();
        if hit(EventKind::Images { z, box_factor: 4.0 }, key, &mut ex) {
            let upper = hit(EventKind::Anchored { z, box_factor: 4.0 }, key, &mut ex);
            prop_assert!(upper);
        }
    }
}
