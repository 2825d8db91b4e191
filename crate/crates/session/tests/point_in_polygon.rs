// SPDX-License-Identifier: Apache-2.0

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pvil_session::geometry::{convex_hull, dilated_hull, Point};
use pvil_session::SelectionRegion;

/// Crossing-number test casting a ray toward +x.
fn ray_cast(poly: &[Point], p: Point) -> bool {
    let mut inside = false;
    let n = poly.len();
    let mut j = n - 1;
    for i in 0..n {
        let (xi, yi) = (poly[i][0], poly[i][1]);
        let (xj, yj) = (poly[j][0], poly[j][1]);
        if (yi > p[1]) != (yj > p[1]) && p[0] < (xj - xi) * (p[1] - yi) / (yj - yi) + xi {
            inside = !inside;
        }
        j = i;
    }
    inside
}

/// A star-shaped polygon: sorted angles with random radii never self-cross.
fn random_star(rng: &mut impl Rng) -> Vec<Point> {
    let m = rng.gen_range(3..40);
    let mut angles: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..std::f64::consts::TAU)).collect();
    angles.sort_by(f64::total_cmp);
    angles.dedup();
    let c = [rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)];
    angles
        .iter()
        .map(|&a| {
            let r = rng.gen_range(0.2..3.0);
            [c[0] + r * a.cos(), c[1] + r * a.sin()]
        })
        .collect()
}

#[test]
fn matches_ray_casting_on_ten_thousand_cases() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut cases = 0;
    let mut inside = 0;
    while cases < 10_000 {
        let poly = random_star(&mut rng);
        let Ok(region) = SelectionRegion::new(poly.clone()) else {
            continue;
        };
        let (lo, hi) = region.bounding_box();
        for _ in 0..10 {
            let p = [rng.gen_range(lo[0] - 0.5..hi[0] + 0.5), rng.gen_range(lo[1] - 0.5..hi[1] + 0.5)];
            let expected = ray_cast(&poly, p);
            assert_eq!(region.contains(p), expected, "polygon {poly:?} point {p:?}");
            inside += expected as usize;
            cases += 1;
        }
    }
    // Both branches are exercised.
    assert!(inside > 1_000 && inside < 9_000, "{inside}");
}

#[test]
fn boundary_points_count_as_inside() {
    let sq = SelectionRegion::new(vec![[0.0, 0.0], [2.0, 0.0], [2.0, 2.0], [0.0, 2.0]]).unwrap();
    for p in [[0.0, 0.0], [1.0, 0.0], [2.0, 1.0], [2.0, 2.0], [0.0, 1.5], [1.0, 2.0]] {
        assert!(sq.contains(p), "{p:?}");
    }
    assert!(!sq.contains([2.0 + 1e-9, 1.0]));
}

#[test]
fn self_crossing_polygons_are_refused() {
    let bowtie = vec![[0.0, 0.0], [1.0, 1.0], [1.0, 0.0], [0.0, 1.0]];
    assert!(SelectionRegion::new(bowtie).is_err());
    assert!(SelectionRegion::new(vec![[0.0, 0.0], [1.0, 0.0]]).is_err());
    assert!(SelectionRegion::new(vec![[0.0, 0.0], [1.0, f64::NAN], [0.0, 1.0]]).is_err());
}

proptest! {
    #[test]
    fn dilated_hull_is_valid_and_covers_its_points(
        pts in prop::collection::vec((-50.0f64..50.0, -50.0f64..50.0), 1..60),
        radius in 0.01f64..5.0,
    ) {
        let pts: Vec<Point> = pts.into_iter().map(|(x, y)| [x, y]).collect();
        let poly = dilated_hull(&pts, radius);
        let region = SelectionRegion::new(poly).unwrap();
        for p in &pts {
            prop_assert!(region.contains(*p));
        }
    }

    #[test]
    fn convex_hull_contains_every_input_point(
        pts in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 3..50),
    ) {
        let pts: Vec<Point> = pts.into_iter().map(|(x, y)| [x, y]).collect();
        let hull = convex_hull(&pts);
        if let Ok(region) = SelectionRegion::new(hull) {
            for p in &pts {
                prop_assert!(region.contains(*p));
            }
        }
    }
}
