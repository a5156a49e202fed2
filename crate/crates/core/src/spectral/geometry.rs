//! Planar helpers on sampled complex curves.

use faer::c64;

/// Distance from `p` to the segment `a`–`b`.
pub fn distance_to_segment(p: c64, a: c64, b: c64) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_sqr();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = ((p - a).re * ab.re + (p - a).im * ab.im) / len2;
    let t = t.clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

/// Smallest distance from `p` to any edge of the polyline.
pub fn distance_to_polyline(p: c64, poly: &[c64]) -> f64 {
    match poly.len() {
        0 => f64::INFINITY,
        1 => (p - poly[0]).norm(),
        _ => poly
            .windows(2)
            .map(|w| distance_to_segment(p, w[0], w[1]))
            .fold(f64::INFINITY, f64::min),
    }
}

/// Smallest distance from `p` to any vertex.
pub fn distance_to_points(p: c64, points: &[c64]) -> f64 {
    points.iter().map(|&q| (p - q).norm()).fold(f64::INFINITY, f64::min)
}

/// Even–odd ray-crossing test. The polygon is implicitly closed; a repeated
/// final vertex is harmless. Points on an edge get an unspecified answer, so
/// callers should check [`distance_to_polyline`] first.
pub fn point_in_polygon(p: c64, poly: &[c64]) -> bool {
    let n = poly.len();
    if n < 3 {
        return false;
    }
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (poly[i], poly[j]);
        if (a.im > p.im) != (b.im > p.im) {
            let x = a.re + (p.im - a.im) * (b.re - a.re) / (b.im - a.im);
            if p.re < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

pub fn centroid(points: &[c64]) -> c64 {
    let sum: c64 = points.iter().sum();
    sum / points.len() as f64
}

/// Centroid of the region enclosed by a closed polygon (shoelace formula).
/// Segments traced back and forth enclose no area and so carry no weight.
/// Falls back to the vertex mean for polygons of vanishing area.
pub fn area_centroid(poly: &[c64]) -> c64 {
    let (mut area2, mut cx, mut cy) = (0.0, 0.0, 0.0);
    for (i, a) in poly.iter().enumerate() {
        let b = poly[(i + 1) % poly.len()];
        let cross = a.re * b.im - b.re * a.im;
        area2 += cross;
        cx += (a.re + b.re) * cross;
        cy += (a.im + b.im) * cross;
    }
    let scale = poly.iter().map(|z| z.norm_sqr()).fold(0.0, f64::max);
    if area2.abs() <= 1e-12 * scale.max(f64::MIN_POSITIVE) {
        return centroid(poly);
    }
    c64::new(cx / (3.0 * area2), cy / (3.0 * area2))
}
