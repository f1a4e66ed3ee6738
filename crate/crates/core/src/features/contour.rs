//! Intervening-contour affinity: high when no edge crosses the straight
//! line between two pixels.

/// Pixels of the Bresenham line from `a` to `b`, both endpoints included.
pub fn bresenham(a: (usize, usize), b: (usize, usize)) -> Vec<(usize, usize)> {
    let (mut x0, mut y0) = (a.0 as isize, a.1 as isize);
    let (x1, y1) = (b.0 as isize, b.1 as isize);
    let dx = (x1 - x0).abs();
    let dy = -(y1 - y0).abs();
    let sx = if x0 < x1 { 1 } else { -1 };
    let sy = if y0 < y1 { 1 } else { -1 };
    let mut err = dx + dy;
    let mut out = Vec::with_capacity((dx - dy) as usize + 1);
    loop {
        out.push((x0 as usize, y0 as usize));
        if x0 == x1 && y0 == y1 {
            return out;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x0 += sx;
        }
        if e2 <= dx {
            err += dx;
            y0 += sy;
        }
    }
}

/// `1 - max p_con` over the line between `p1` and `p2`.
pub fn intervening_contour_affinity(
    edges: &[f64],
    width: usize,
    p1: (usize, usize),
    p2: (usize, usize),
) -> f64 {
    let peak = bresenham(p1, p2)
        .into_iter()
        .map(|(x, y)| edges[y * width + x])
        .fold(0.0, f64::max);
    1.0 - peak
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_endpoints_and_length() {
        let l = bresenham((0, 0), (5, 2));
        assert_eq!(l.first(), Some(&(0, 0)));
        assert_eq!(l.last(), Some(&(5, 2)));
        assert_eq!(l.len(), 6);
        assert_eq!(bresenham((3, 3), (3, 3)), vec![(3, 3)]);
        assert_eq!(bresenham((4, 0), (0, 0)).len(), 5);
    }

    #[test]
    fn affinity_cases() {
        let w = 6;
        let mut e = vec![0.0; 36];
        assert_eq!(intervening_contour_affinity(&e, w, (1, 1), (1, 1)), 1.0);
        assert_eq!(intervening_contour_affinity(&e, w, (0, 0), (5, 5)), 1.0);
        e[3 * w + 3] = 0.9;
        assert!((intervening_contour_affinity(&e, w, (0, 0), (5, 5)) - 0.1).abs() < 1e-12);
        assert_eq!(intervening_contour_affinity(&e, w, (0, 5), (5, 5)), 1.0);
    }
}
