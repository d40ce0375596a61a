use packer_core::geometry::{
    actual_angle, convex_hull, grasp_points, mask_to_polygon, min_area_rect, plan_grasp,
};
use packer_core::{line_angle_distance, normalize_line_angle, Mask, Point, Polygon};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Convex polygon: sorted angles on a circle, then a random linear stretch.
fn random_convex(rng: &mut ChaCha8Rng, n: usize) -> Polygon {
    let mut angles: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..360.0)).collect();
    angles.sort_by(f64::total_cmp);
    angles.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
    let sx = rng.random_range(5.0..200.0);
    let sy = rng.random_range(5.0..200.0);
    let rot = rng.random_range(0.0..180.0);
    let c = Point::new(rng.random_range(-500.0..500.0), rng.random_range(-500.0..500.0));
    let pts: Vec<Point> = angles
        .iter()
        .map(|a| {
            let (s, co) = a.to_radians().sin_cos();
            Point::new(sx * co, sy * s).rotated_about(Point::default(), rot) + c
        })
        .collect();
    Polygon::new(pts).unwrap()
}

/// Smallest enclosing-rectangle area over the directions of every polygon edge.
fn sweep_min_area(poly: &Polygon) -> f64 {
    let v = poly.vertices();
    let mut best = f64::INFINITY;
    for i in 0..v.len() {
        let e = v[(i + 1) % v.len()] - v[i];
        let u = e * (1.0 / e.norm());
        let w = Point::new(-u.y, u.x);
        let (mut lo_u, mut hi_u, mut lo_w, mut hi_w) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
        for p in v {
            let (a, b) = (p.dot(u), p.dot(w));
            lo_u = lo_u.min(a);
            hi_u = hi_u.max(a);
            lo_w = lo_w.min(b);
            hi_w = hi_w.max(b);
        }
        best = best.min((hi_u - lo_u) * (hi_w - lo_w));
    }
    best
}

fn rectangle(center: Point, long: f64, short: f64, rot: f64) -> Polygon {
    let pts = [(1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (1.0, -1.0)]
        .iter()
        .map(|&(a, b)| Point::new(a * long / 2.0, b * short / 2.0).rotated_about(Point::default(), rot) + center)
        .collect();
    Polygon::new(pts).unwrap()
}

#[test]
fn min_area_rect_matches_edge_sweep() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let polys: Vec<Polygon> = (0..1000)
        .map(|_| {
            let n = rng.random_range(8..=64);
            random_convex(&mut rng, n)
        })
        .collect();
    let start = std::time::Instant::now();
    let mut worst = 0.0f64;
    for p in &polys {
        let got = min_area_rect(p).unwrap().area();
        let want = sweep_min_area(p);
        worst = worst.max((got - want).abs() / want);
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(worst <= 1e-6, "worst relative difference {worst:e}");
    assert!(elapsed < 5.0, "{elapsed} s");
}

#[test]
fn case_rule_matches_shorter_edge_direction() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let short = rng.random_range(1.0..100.0);
        let long = short * rng.random_range(1.05..5.0);
        let rot = rng.random_range(-180.0..180.0);
        let c = Point::new(rng.random_range(-300.0..300.0), rng.random_range(-300.0..300.0));
        let rect = min_area_rect(&rectangle(c, long, short, rot)).unwrap();
        // The short side of the generating rectangle runs along rot + 90.
        let want = normalize_line_angle(rot + 90.0);
        worst = worst.max(line_angle_distance(actual_angle(&rect), want));
    }
    assert!(worst < 1e-9, "worst {worst:e} deg");
}

#[test]
fn grasp_width_of_vector_rectangles() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..2000 {
        let short = rng.random_range(2.0..150.0);
        let long = short * rng.random_range(1.05..4.0);
        let rot = rng.random_range(-180.0..180.0);
        let c = Point::new(rng.random_range(-300.0..300.0), rng.random_range(-300.0..300.0));
        let (_, g) = plan_grasp(&rectangle(c, long, short, rot)).unwrap();
        assert!((g.width_px - short).abs() < 1e-6, "{} vs {short}", g.width_px);
        assert!(g.center.distance(c) < 1e-6);
    }
}

#[test]
fn grasp_width_of_rasterized_rectangles() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut worst = 0.0f64;
    for _ in 0..40 {
        let short = rng.random_range(100.0..160.0);
        let long = short * rng.random_range(1.2..2.0);
        let rot = rng.random_range(-90.0..90.0);
        let c = Point::new(rng.random_range(200.0..220.0), rng.random_range(200.0..220.0));
        let mask = Mask::from_polygon(420, 420, &rectangle(c, long, short, rot));
        let poly = mask_to_polygon(&mask).unwrap();
        let (_, g) = plan_grasp(&poly).unwrap();
        worst = worst.max((g.width_px - short).abs());
    }
    assert!(worst <= 2.0, "worst width error {worst} px");
}

/// Outer disk minus an offset inner disk, as a polygon.
fn crescent(rng: &mut ChaCha8Rng) -> Polygon {
    let r_outer: f64 = rng.random_range(40.0..200.0);
    let r_inner = r_outer * rng.random_range(0.85..0.95);
    let d = r_outer * rng.random_range(0.2..0.3);
    let rot = rng.random_range(0.0..360.0);
    let c = Point::new(rng.random_range(-100.0..100.0), rng.random_range(-100.0..100.0));
    // Circle intersection along the offset axis.
    let xi = (r_outer * r_outer - r_inner * r_inner + d * d) / (2.0 * d);
    let yi = (r_outer * r_outer - xi * xi).sqrt();
    let a_outer = yi.atan2(xi);
    let a_inner = yi.atan2(xi - d);
    let k = 48;
    let mut pts = Vec::new();
    for i in 0..=k {
        let a = a_outer + (2.0 * std::f64::consts::PI - 2.0 * a_outer) * i as f64 / k as f64;
        pts.push(Point::new(r_outer * a.cos(), r_outer * a.sin()));
    }
    // Back along the part of the inner circle that lies inside the outer one.
    for i in 1..k {
        let a = 2.0 * std::f64::consts::PI - a_inner - (2.0 * std::f64::consts::PI - 2.0 * a_inner) * i as f64 / k as f64;
        pts.push(Point::new(d + r_inner * a.cos(), r_inner * a.sin()));
    }
    let pts = pts
        .into_iter()
        .map(|p| p.rotated_about(Point::default(), rot) + c)
        .collect();
    Polygon::new(pts).unwrap()
}

#[test]
fn crescent_grasp_center_stays_on_the_object() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let (mut grasp_inside, mut bbox_outside) = (0, 0);
    for _ in 0..100 {
        let poly = crescent(&mut rng);
        let (_, g) = plan_grasp(&poly).unwrap();
        let (lo, hi) = poly.bounding_box();
        grasp_inside += usize::from(poly.contains(g.center));
        bbox_outside += usize::from(!poly.contains(lo.midpoint(hi)));
    }
    assert_eq!(grasp_inside, 100);
    assert_eq!(bbox_outside, 100);
}

#[test]
fn disk_contour_area_equals_pixel_count() {
    for (r, cx, cy) in [(50.0, 64.3, 70.1), (17.5, 30.0, 30.0), (3.2, 8.5, 8.5)] {
        let size = 160;
        let mut mask = Mask::new(size, size);
        let mut count = 0usize;
        for y in 0..size {
            for x in 0..size {
                let dx = x as f64 + 0.5 - cx;
                let dy = y as f64 + 0.5 - cy;
                if dx * dx + dy * dy < r * r {
                    mask.set(x, y, true);
                    count += 1;
                }
            }
        }
        let poly = mask_to_polygon(&mask).unwrap();
        assert_eq!(poly.area(), count as f64, "r = {r}");
    }
}

/// Hull edges by brute force: pairs with every other point strictly on one side.
fn brute_hull_vertices(pts: &[Point]) -> Vec<Point> {
    let mut out: Vec<Point> = Vec::new();
    for i in 0..pts.len() {
        for j in 0..pts.len() {
            if i == j {
                continue;
            }
            let e = pts[j] - pts[i];
            if pts.iter().all(|&p| e.cross(p - pts[i]) > 0.0 || p == pts[i] || p == pts[j]) {
                for p in [pts[i], pts[j]] {
                    if !out.contains(&p) {
                        out.push(p);
                    }
                }
            }
        }
    }
    out
}

#[test]
fn hull_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    for _ in 0..300 {
        let n = rng.random_range(3..40);
        let pts: Vec<Point> = (0..n)
            .map(|_| Point::new(rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0)))
            .collect();
        let hull = convex_hull(&pts).unwrap();
        let mut got: Vec<Point> = hull.vertices().to_vec();
        let mut want = brute_hull_vertices(&pts);
        let key = |p: &Point| (p.x.to_bits(), p.y.to_bits());
        got.sort_by_key(key);
        want.sort_by_key(key);
        assert_eq!(got, want);
    }
}

fn polygon_strategy() -> impl Strategy<Value = Polygon> {
    (any::<u64>(), 8usize..40).prop_map(|(seed, n)| random_convex(&mut ChaCha8Rng::seed_from_u64(seed), n))
}

proptest! {
    #[test]
    fn rect_encloses_and_is_no_larger_than_the_hull_bbox(poly in polygon_strategy()) {
        let rect = min_area_rect(&poly).unwrap();
        let a = rect.corners[3] - rect.corners[0];
        let b = rect.corners[1] - rect.corners[0];
        let tol = 1e-7 * rect.longer_edge();
        for &p in poly.vertices() {
            let d = p - rect.corners[0];
            let (s, t) = (d.dot(a) / a.norm(), d.dot(b) / b.norm());
            prop_assert!(s >= -tol && s <= a.norm() + tol && t >= -tol && t <= b.norm() + tol);
        }
        let (lo, hi) = poly.bounding_box();
        prop_assert!(rect.area() <= (hi.x - lo.x) * (hi.y - lo.y) * (1.0 + 1e-12));
        prop_assert!((-90.0..90.0).contains(&rect.gamma));
    }

    #[test]
    fn translation_invariance(poly in polygon_strategy(), dx in -400.0f64..400.0, dy in -400.0f64..400.0) {
        let moved = poly.translated(Point::new(dx, dy));
        let (r0, g0) = plan_grasp(&poly).unwrap();
        let (r1, g1) = plan_grasp(&moved).unwrap();
        prop_assert!((r0.area() - r1.area()).abs() <= 1e-9 * r0.area());
        prop_assert!((g0.width_px - g1.width_px).abs() <= 1e-6);
    }

    #[test]
    fn rotation_equivariance_of_rectangles(
        short in 2.0f64..100.0,
        ratio in 1.1f64..4.0,
        rot in -180.0f64..180.0,
        turn in -180.0f64..180.0,
    ) {
        let poly = rectangle(Point::new(3.0, -7.0), short * ratio, short, rot);
        let pivot = Point::new(1.0, 2.0);
        let turned = poly.rotated_about(pivot, turn);
        let (r0, g0) = plan_grasp(&poly).unwrap();
        let (r1, g1) = plan_grasp(&turned).unwrap();
        prop_assert!(line_angle_distance(actual_angle(&r1), actual_angle(&r0) + turn) < 1e-9);
        prop_assert!((g0.width_px - g1.width_px).abs() < 1e-9 * short.max(1.0) * 10.0);
        prop_assert!(g0.center.rotated_about(pivot, turn).distance(g1.center) < 1e-8);
    }

    #[test]
    fn grasp_points_lie_on_the_boundary(poly in polygon_strategy()) {
        let rect = min_area_rect(&poly).unwrap();
        let g = grasp_points(&poly, &rect).unwrap();
        let on_boundary = |p: Point| {
            poly.edges().any(|(a, b)| {
                let e = b - a;
                let t = ((p - a).dot(e) / e.dot(e)).clamp(0.0, 1.0);
                (a + e * t).distance(p) < 1e-7
            })
        };
        prop_assert!(on_boundary(g.p1) && on_boundary(g.p2));
        prop_assert!((g.center.distance(g.p1.midpoint(g.p2))) < 1e-12);
        prop_assert!(g.width_px <= rect.longer_edge() + 1e-9);
    }
}
