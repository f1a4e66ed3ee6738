//! Geodesic distance on the 8-connected pixel grid.
//!
//! A step between neighbors `a -> b` costs
//! `sqrt((1 - gamma) * |a - b|^2 + gamma * (L(b) - L(a))^2)`, where `L` is
//! the luminance channel (CIE L*, 0..100) and `|a - b|` is 1 or sqrt(2).
//! The distance of a pixel is the cheapest path cost from any seed.

#[inline]
pub fn step_cost(luminance: &[f64], a: usize, b: usize, diagonal: bool, gamma: f64) -> f64 {
    let d2 = if diagonal { 2.0 } else { 1.0 };
    let dl = luminance[b] - luminance[a];
    ((1.0 - gamma) * d2 + gamma * dl * dl).sqrt()
}

const ABSENT: u32 = u32::MAX;
const DONE: u32 = u32::MAX - 1;

/// Binary min-heap over pixel indices keyed by `dist`, with decrease-key.
struct IndexedHeap {
    heap: Vec<u32>,
    /// Heap slot of each pixel, or `ABSENT` / `DONE`.
    slot: Vec<u32>,
}

impl IndexedHeap {
    fn new(n: usize) -> Self {
        Self {
            heap: Vec::new(),
            slot: vec![ABSENT; n],
        }
    }

    fn is_done(&self, i: usize) -> bool {
        self.slot[i] == DONE
    }

    fn swap(&mut self, a: usize, b: usize) {
        self.heap.swap(a, b);
        self.slot[self.heap[a] as usize] = a as u32;
        self.slot[self.heap[b] as usize] = b as u32;
    }

    fn sift_up(&mut self, mut pos: usize, dist: &[f64]) {
        while pos > 0 {
            let parent = (pos - 1) / 2;
            if dist[self.heap[parent] as usize] <= dist[self.heap[pos] as usize] {
                break;
            }
            self.swap(pos, parent);
            pos = parent;
        }
    }

    fn sift_down(&mut self, mut pos: usize, dist: &[f64]) {
        let len = self.heap.len();
        loop {
            let l = 2 * pos + 1;
            if l >= len {
                break;
            }
            let r = l + 1;
            let child = if r < len && dist[self.heap[r] as usize] < dist[self.heap[l] as usize] {
                r
            } else {
                l
            };
            if dist[self.heap[pos] as usize] <= dist[self.heap[child] as usize] {
                break;
            }
            self.swap(pos, child);
            pos = child;
        }
    }

    /// Inserts `i` or restores order after its key decreased.
    fn push_or_decrease(&mut self, i: usize, dist: &[f64]) {
        let pos = match self.slot[i] {
            ABSENT => {
                self.heap.push(i as u32);
                let pos = self.heap.len() - 1;
                self.slot[i] = pos as u32;
                pos
            }
            pos => pos as usize,
        };
        self.sift_up(pos, dist);
    }

    fn pop(&mut self, dist: &[f64]) -> Option<usize> {
        let top = *self.heap.first()? as usize;
        let last = self.heap.pop().expect("nonempty");
        if !self.heap.is_empty() {
            self.heap[0] = last;
            self.slot[last as usize] = 0;
            self.sift_down(0, dist);
        }
        self.slot[top] = DONE;
        Some(top)
    }
}

/// Exact geodesic distance field (Dijkstra). `luminance` is row-major
/// with `width * height` entries.
pub fn geodesic_distance_field(
    luminance: &[f64],
    width: usize,
    height: usize,
    seeds: &[usize],
    gamma: f64,
) -> Vec<f64> {
    assert_eq!(luminance.len(), width * height);
    assert!((0.0..=1.0).contains(&gamma), "gamma must lie in [0, 1]");
    assert!(luminance.len() < DONE as usize, "image too large");
    let mut dist = vec![f64::INFINITY; luminance.len()];
    let mut heap = IndexedHeap::new(luminance.len());
    for &s in seeds {
        dist[s] = 0.0;
        heap.push_or_decrease(s, &dist);
    }
    let (w, h) = (width as isize, height as isize);
    while let Some(i) = heap.pop(&dist) {
        let d = dist[i];
        let (x, y) = ((i % width) as isize, (i / width) as isize);
        for dy in -1..=1isize {
            let ny = y + dy;
            if ny < 0 || ny >= h {
                continue;
            }
            for dx in -1..=1isize {
                let nx = x + dx;
                if (dx == 0 && dy == 0) || nx < 0 || nx >= w {
                    continue;
                }
                let j = (ny * w + nx) as usize;
                if heap.is_done(j) {
                    continue;
                }
                let nd = d + step_cost(luminance, i, j, dx != 0 && dy != 0, gamma);
                if nd < dist[j] {
                    dist[j] = nd;
                    heap.push_or_decrease(j, &dist);
                }
            }
        }
    }
    dist
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_image_is_octile_distance() {
        let lum = vec![50.0; 10 * 10];
        let d = geodesic_distance_field(&lum, 10, 10, &[0], 0.0);
        let want = 3.0 * 2f64.sqrt() + 1.0;
        assert!((d[4 * 10 + 3] - want).abs() < 1e-12);
        assert_eq!(d[0], 0.0);
    }

    #[test]
    fn gradient_raises_cost() {
        let lum: Vec<f64> = (0..20).map(|i| if i % 5 < 2 { 0.0 } else { 80.0 }).collect();
        let flat = geodesic_distance_field(&vec![0.0; 20], 5, 4, &[0], 0.5);
        let edged = geodesic_distance_field(&lum, 5, 4, &[0], 0.5);
        assert!(edged[4] > flat[4] + 10.0);
        assert!((edged[1] - flat[1]).abs() < 1e-12);
    }

    #[test]
    fn extra_seed_never_increases() {
        let lum: Vec<f64> = (0..64).map(|i| ((i * 37) % 17) as f64 * 3.0).collect();
        let a = geodesic_distance_field(&lum, 8, 8, &[3], 0.5);
        let b = geodesic_distance_field(&lum, 8, 8, &[3, 60], 0.5);
        assert!(a.iter().zip(&b).all(|(a, b)| b <= a));
    }
}
