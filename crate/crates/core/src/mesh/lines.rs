//! One-dimensional point distributions used to build tensor-product meshes.

use crate::error::{Error, Result};

/// How a uniform segment is divided.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subdivision {
    /// `ceil(length / h)` pieces.
    Ceil,
    /// Next power of two above `ceil(length / h)`; refinement `h -> h/2`
    /// then produces nested point sets.
    Dyadic,
}

/// A knot of a graded line: a mandatory point with the element size
/// requested next to it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Knot {
    pub x: f64,
    pub size: f64,
}

impl Knot {
    pub fn new(x: f64, size: f64) -> Self {
        Knot { x, size }
    }
}

fn piece_count(length: f64, h: f64, rule: Subdivision) -> usize {
    let n = ((length / h) - 1e-9).ceil().max(1.0) as usize;
    match rule {
        Subdivision::Ceil => n,
        Subdivision::Dyadic => n.next_power_of_two(),
    }
}

/// Interior and end points of `[a, b]`, uniformly divided. Points in the
/// left half are measured from `a`, points in the right half from `b`, so a
/// mirrored segment yields exactly negated points.
fn uniform_points(a: f64, b: f64, n: usize) -> Vec<f64> {
    let len = b - a;
    (0..=n)
        .map(|i| {
            if 2 * i == n {
                0.5 * (a + b)
            } else if 2 * i < n {
                a + len * (i as f64 / n as f64)
            } else {
                b - len * ((n - i) as f64 / n as f64)
            }
        })
        .collect()
}

/// Offsets from one end of a segment, growing geometrically from `h0` by
/// `growth` up to `cap`, scaled so the last offset lands exactly on `half`.
fn graded_offsets(half: f64, h0: f64, cap: f64, growth: f64) -> Vec<f64> {
    let mut offsets = Vec::new();
    let mut s = h0.min(cap);
    let mut total = 0.0;
    while total < half * (1.0 - 1e-12) {
        total += s;
        offsets.push(total);
        s = (s * growth).min(cap);
    }
    let scale = half / total;
    for o in offsets.iter_mut() {
        *o *= scale;
    }
    offsets
}

/// Points of one segment including both ends.
pub fn segment_points(
    a: f64,
    b: f64,
    h_a: f64,
    h_b: f64,
    cap: f64,
    growth: f64,
    rule: Subdivision,
) -> Result<Vec<f64>> {
    if !(b > a) {
        return Err(Error::Mesh(format!("empty segment [{a}, {b}]")));
    }
    if !(h_a > 0.0 && h_b > 0.0 && cap > 0.0) {
        return Err(Error::Mesh("element sizes must be positive".into()));
    }
    if h_a >= cap && h_b >= cap {
        return Ok(uniform_points(a, b, piece_count(b - a, cap, rule)));
    }
    if !(growth > 1.0) {
        return Err(Error::Mesh(format!("grading ratio must exceed 1, got {growth}")));
    }
    let half = 0.5 * (b - a);
    let from_a = graded_offsets(half, h_a, cap, growth);
    let from_b = graded_offsets(half, h_b, cap, growth);
    let mut pts = Vec::with_capacity(from_a.len() + from_b.len() + 1);
    pts.push(a);
    pts.extend(from_a[..from_a.len() - 1].iter().map(|o| a + o));
    pts.push(0.5 * (a + b));
    pts.extend(from_b[..from_b.len() - 1].iter().rev().map(|o| b - o));
    pts.push(b);
    Ok(pts)
}

/// Concatenates segments between consecutive knots. `caps[i]` bounds the
/// element size on segment `i`; sizes grow from the knot sizes by `growth`.
pub fn graded_line(
    knots: &[Knot],
    caps: &[f64],
    growth: f64,
    rule: Subdivision,
) -> Result<Vec<f64>> {
    if knots.len() < 2 || caps.len() + 1 != knots.len() {
        return Err(Error::Mesh("graded line needs n knots and n-1 caps".into()));
    }
    let mut pts = vec![knots[0].x];
    for (w, &cap) in knots.windows(2).zip(caps) {
        let seg = segment_points(w[0].x, w[1].x, w[0].size, w[1].size, cap, growth, rule)?;
        pts.extend_from_slice(&seg[1..]);
    }
    Ok(pts)
}

/// Uniform line through all `breaks` (sorted, deduplicated by the caller).
pub fn uniform_line(breaks: &[f64], h: f64, rule: Subdivision) -> Result<Vec<f64>> {
    let knots: Vec<Knot> = breaks.iter().map(|&x| Knot::new(x, h)).collect();
    let caps = vec![h; knots.len().saturating_sub(1)];
    graded_line(&knots, &caps, 2.0, rule)
}

/// Points of `[a, b]` graded towards the flagged ends: the distance from a
/// graded end grows like `s^beta` in a uniform parameter `s`. The piece
/// count is dyadic with the largest spacing at most `h`, so halving `h`
/// nests the point sets. Points are measured from the nearer graded end,
/// so mirrored segments give exactly negated points.
pub fn power_graded_segment(
    a: f64,
    b: f64,
    grade_a: bool,
    grade_b: bool,
    h: f64,
    beta: f64,
) -> Result<Vec<f64>> {
    if !(b > a) || !(h > 0.0) {
        return Err(Error::Mesh(format!("bad graded segment [{a}, {b}] with h = {h}")));
    }
    if !(beta >= 1.0) {
        return Err(Error::Mesh(format!("grading exponent must be at least 1, got {beta}")));
    }
    let len = b - a;
    if !(grade_a || grade_b) || beta == 1.0 {
        return Ok(uniform_points(a, b, piece_count(len, h, Subdivision::Dyadic)));
    }
    let n = piece_count(beta * len, h, Subdivision::Dyadic).max(2);
    let nf = n as f64;
    let pts = (0..=n)
        .map(|i| {
            let fi = i as f64;
            let fr = (n - i) as f64;
            match (grade_a, grade_b) {
                (true, true) => {
                    if 2 * i == n {
                        0.5 * (a + b)
                    } else if 2 * i < n {
                        a + 0.5 * len * (2.0 * fi / nf).powf(beta)
                    } else {
                        b - 0.5 * len * (2.0 * fr / nf).powf(beta)
                    }
                }
                (true, false) => {
                    if i == n {
                        b
                    } else {
                        a + len * (fi / nf).powf(beta)
                    }
                }
                _ => {
                    if i == 0 {
                        a
                    } else {
                        b - len * (fr / nf).powf(beta)
                    }
                }
            }
        })
        .collect();
    Ok(pts)
}

/// Line through sorted `breaks`, graded towards the flagged breaks.
pub fn power_graded_line(breaks: &[f64], graded: &[bool], h: f64, beta: f64) -> Result<Vec<f64>> {
    if breaks.len() < 2 || graded.len() != breaks.len() {
        return Err(Error::Mesh("graded line needs matching breaks and flags".into()));
    }
    let mut pts = vec![breaks[0]];
    for k in 0..breaks.len() - 1 {
        let seg = power_graded_segment(breaks[k], breaks[k + 1], graded[k], graded[k + 1], h, beta)?;
        pts.extend_from_slice(&seg[1..]);
    }
    Ok(pts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_segment_counts() {
        let p = segment_points(0.0, 1.0, 0.1, 0.1, 0.1, 2.0, Subdivision::Ceil).unwrap();
        assert_eq!(p.len(), 11);
        let p = segment_points(0.0, 0.05, 0.04, 0.04, 0.04, 2.0, Subdivision::Dyadic).unwrap();
        assert_eq!(p.len(), 3);
        let p = segment_points(0.0, 0.05, 0.02, 0.02, 0.02, 2.0, Subdivision::Dyadic).unwrap();
        assert_eq!(p.len(), 5);
    }

    #[test]
    fn dyadic_refinement_is_nested() {
        let coarse = uniform_line(&[-0.5, -0.45, 0.15, 0.5], 0.04, Subdivision::Dyadic).unwrap();
        let fine = uniform_line(&[-0.5, -0.45, 0.15, 0.5], 0.02, Subdivision::Dyadic).unwrap();
        assert_eq!(fine.len(), 2 * coarse.len() - 1);
        for (i, x) in coarse.iter().enumerate() {
            assert!((fine[2 * i] - x).abs() < 1e-15);
        }
    }

    #[test]
    fn graded_segment_is_monotone_and_bounded() {
        let p = segment_points(0.0, 1.0, 1e-4, 0.1, 0.1, 2.0, Subdivision::Ceil).unwrap();
        assert_eq!(p[0], 0.0);
        assert_eq!(*p.last().unwrap(), 1.0);
        for w in p.windows(2) {
            assert!(w[1] > w[0]);
            assert!(w[1] - w[0] <= 0.1 + 1e-12);
        }
        assert!(p[1] - p[0] <= 1e-4 + 1e-15);
        for w in p.windows(3) {
            let r = (w[2] - w[1]) / (w[1] - w[0]);
            assert!(r <= 2.0 + 1e-9, "growth {r}");
        }
    }

    #[test]
    fn mirrored_segments_give_negated_points() {
        let p = segment_points(0.001, 0.15, 2.5e-4, 0.04, 0.04, 2.0, Subdivision::Ceil).unwrap();
        let q = segment_points(-0.15, -0.001, 0.04, 2.5e-4, 0.04, 2.0, Subdivision::Ceil).unwrap();
        assert_eq!(p.len(), q.len());
        for (a, b) in p.iter().zip(q.iter().rev()) {
            assert_eq!(*a, -*b);
        }
    }

    #[test]
    fn power_grading_nests_and_mirrors() {
        let c = power_graded_line(&[-0.5, -0.2, 0.2, 0.5], &[false, true, true, false], 0.04, 2.0).unwrap();
        let f = power_graded_line(&[-0.5, -0.2, 0.2, 0.5], &[false, true, true, false], 0.02, 2.0).unwrap();
        assert_eq!(f.len(), 2 * c.len() - 1);
        for (i, x) in c.iter().enumerate() {
            assert!((f[2 * i] - x).abs() < 1e-15);
        }
        for (x, y) in c.iter().zip(c.iter().rev()) {
            assert_eq!(*x, -*y);
        }
        for w in c.windows(2) {
            assert!(w[1] > w[0] && w[1] - w[0] <= 0.04 + 1e-12);
        }
    }
}
