//! 2D phase unwrapping by reliability-sorted region merging
//! (Herraez et al., Appl. Opt. 41, 2002).

use std::f64::consts::PI;

use crate::image::RealImage;

const TWO_PI: f64 = 2.0 * PI;

fn wrap(v: f64) -> f64 {
    v - TWO_PI * ((v + PI) / TWO_PI).floor()
}

/// Second-difference reliability; border pixels get 0 and are merged last.
fn reliability(phi: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut rel = vec![0.0; rows * cols];
    let at = |r: usize, c: usize| phi[r * cols + c];
    for r in 1..rows.saturating_sub(1) {
        for c in 1..cols.saturating_sub(1) {
            let centre = at(r, c);
            let second = |a: f64, b: f64| wrap(a - centre) - wrap(centre - b);
            let h = second(at(r, c - 1), at(r, c + 1));
            let v = second(at(r - 1, c), at(r + 1, c));
            let d1 = second(at(r - 1, c - 1), at(r + 1, c + 1));
            let d2 = second(at(r - 1, c + 1), at(r + 1, c - 1));
            let d = (h * h + v * v + d1 * d1 + d2 * d2).sqrt();
            rel[r * cols + c] = if d > 0.0 { 1.0 / d } else { f64::MAX / 8.0 };
        }
    }
    rel
}

/// Unwraps `phi`. The output differs from the input by an integer multiple
/// of `2 pi` at every pixel; the global offset is that of the first group
/// seeded by the most reliable edge.
pub fn unwrap_phase(phi: &RealImage) -> RealImage {
    let (rows, cols) = phi.dims();
    let input = phi.as_slice();
    let n = rows * cols;
    let wrapped: Vec<f64> = input.iter().map(|&v| wrap(v)).collect();
    let rel = reliability(&wrapped, rows, cols);

    // Edges: (reliability, a, b); horizontal then vertical, in index order.
    let mut edges: Vec<(f64, usize, usize)> = Vec::with_capacity(2 * n);
    for r in 0..rows {
        for c in 0..cols {
            let i = r * cols + c;
            if c + 1 < cols {
                edges.push((rel[i] + rel[i + 1], i, i + 1));
            }
            if r + 1 < rows {
                edges.push((rel[i] + rel[i + cols], i, i + cols));
            }
        }
    }
    // Stable sort keeps ties in index order.
    edges.sort_by(|a, b| b.0.total_cmp(&a.0));

    let mut out = wrapped.clone();
    let mut group: Vec<usize> = (0..n).collect();
    let mut members: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    for &(_, a, b) in &edges {
        let (ga, gb) = (group[a], group[b]);
        if ga == gb {
            continue;
        }
        let k = ((out[a] - out[b]) / TWO_PI).round();
        // Move the smaller group onto the larger one.
        let (keep, moved, shift) = if members[ga].len() >= members[gb].len() {
            (ga, gb, TWO_PI * k)
        } else {
            (gb, ga, -TWO_PI * k)
        };
        let moved_members = std::mem::take(&mut members[moved]);
        for &m in &moved_members {
            out[m] += shift;
            group[m] = keep;
        }
        members[keep].extend(moved_members);
    }

    // Carry the input's own 2 pi offsets so the output - input is exact.
    for (o, (&w, &i)) in out.iter_mut().zip(wrapped.iter().zip(input)) {
        *o = i + (*o - w);
    }
    RealImage::new(rows, cols, out).expect("unwrapping preserves finiteness")
}
