//! Seeded stratified Monte Carlo area estimation.
//!
//! Each estimate draws from its own ChaCha stream keyed by `(seed, key)`, so
//! results do not depend on evaluation order or worker count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::{Polygon, Rect, Vec2};

/// SplitMix64 finalizer; decorrelates consecutive keys.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub(crate) fn substream(seed: u64, key_a: u64, key_b: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(mix(seed ^ mix(key_a)) ^ key_b))
}

/// Jittered `m × m` grid points in the unit square, `m = ceil(sqrt(n))`,
/// truncated to `n` points in a stratum-balanced order.
fn jittered_unit_points(n: usize, rng: &mut ChaCha8Rng) -> Vec<(f64, f64)> {
    let m = (n as f64).sqrt().ceil().max(1.0) as usize;
    let h = 1.0 / m as f64;
    let mut pts = Vec::with_capacity(m * m);
    for j in 0..m {
        for i in 0..m {
            let u = (i as f64 + rng.random::<f64>()) * h;
            let v = (j as f64 + rng.random::<f64>()) * h;
            pts.push((u, v));
        }
    }
    if pts.len() > n {
        // keep a random subset so the dropped strata are not spatially biased
        for k in 0..n {
            let r = rng.random_range(k..pts.len());
            pts.swap(k, r);
        }
        pts.truncate(n);
    }
    pts
}

/// Area of `{x ∈ rect : pred(x)}`.
pub(crate) fn rect_area_where<F: Fn(Vec2) -> bool>(
    rect: &Rect,
    samples: usize,
    rng: &mut ChaCha8Rng,
    pred: F,
) -> f64 {
    let pts = jittered_unit_points(samples.max(1), rng);
    let hits = pts
        .iter()
        .filter(|(u, v)| pred(Vec2::new(rect.x0 + u * rect.width(), rect.y0 + v * rect.height())))
        .count();
    rect.area() * hits as f64 / pts.len() as f64
}

/// Area of `{x ∈ poly : pred(x)}`. The polygon is fan-triangulated and the
/// sample budget split by triangle area; each triangle is sampled through the
/// folded unit-square map.
pub(crate) fn polygon_area_where<F: Fn(Vec2) -> bool>(
    poly: &Polygon,
    samples: usize,
    rng: &mut ChaCha8Rng,
    pred: F,
) -> f64 {
    let vs = poly.vertices();
    let total = poly.area();
    let mut acc = 0.0;
    for k in 1..vs.len() - 1 {
        let (a, b, c) = (vs[0], vs[k], vs[k + 1]);
        let area = 0.5 * (b - a).cross(c - a);
        if area <= 0.0 {
            continue;
        }
        let n = ((samples as f64 * area / total).round() as usize).max(1);
        let pts = jittered_unit_points(n, rng);
        let hits = pts
            .iter()
            .filter(|&&(mut u, mut v)| {
                if u + v > 1.0 {
                    u = 1.0 - u;
                    v = 1.0 - v;
                }
                pred(a + (b - a).scale(u) + (c - a).scale(v))
            })
            .count();
        acc += area * hits as f64 / pts.len() as f64;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disc_area_in_square() {
        let mut rng = substream(7, 1, 2);
        let r = Rect::new(-1.0, 1.0, -1.0, 1.0);
        let a = rect_area_where(&r, 200_000, &mut rng, |p| p.norm() <= 1.0);
        assert!((a - std::f64::consts::PI).abs() < 2e-3, "{a}");
    }

    #[test]
    fn triangle_half_plane_fraction() {
        let poly = Polygon::new(vec![Vec2::new(0.0, 0.0), Vec2::new(2.0, 0.0), Vec2::new(0.0, 2.0)]).unwrap();
        let mut rng = substream(3, 0, 0);
        // {x <= 1} ∩ triangle has area 2 - 0.5 = 1.5
        let a = polygon_area_where(&poly, 100_000, &mut rng, |p| p.x <= 1.0);
        assert!((a - 1.5).abs() < 5e-3, "{a}");
    }

    #[test]
    fn substreams_are_reproducible() {
        let mut a = substream(1, 2, 3);
        let mut b = substream(1, 2, 3);
        let mut c = substream(1, 2, 4);
        let (x, y, z): (u64, u64, u64) = (a.random(), b.random(), c.random());
        assert_eq!(x, y);
        assert_ne!(x, z);
    }
}
