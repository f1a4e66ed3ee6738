//! Binary-raster helpers: 8-connected component labelling and the
//! chessboard distance transform.

use std::collections::VecDeque;

pub(crate) const NEIGHBORS_8: [(isize, isize); 8] = [
    (-1, -1),
    (0, -1),
    (1, -1),
    (-1, 0),
    (1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Component {
    /// Pixel indices in BFS order from the component's first scan pixel.
    pub pixels: Vec<usize>,
    pub min_x: usize,
    pub min_y: usize,
    pub touches_border: bool,
}

impl Component {
    pub fn area(&self) -> usize {
        self.pixels.len()
    }
}

#[inline]
pub(crate) fn neighbor(
    x: usize,
    y: usize,
    (dx, dy): (isize, isize),
    width: usize,
    height: usize,
) -> Option<(usize, usize)> {
    let nx = x as isize + dx;
    let ny = y as isize + dy;
    if nx < 0 || ny < 0 || nx >= width as isize || ny >= height as isize {
        None
    } else {
        Some((nx as usize, ny as usize))
    }
}

/// 8-connected components of the pixels where `member` is true, ordered
/// by their first pixel in scan order.
pub fn components_8(member: &[bool], width: usize, height: usize) -> Vec<Component> {
    assert_eq!(member.len(), width * height);
    let mut seen = vec![false; member.len()];
    let mut out = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..member.len() {
        if !member[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        queue.push_back(start);
        let mut comp = Component {
            pixels: Vec::new(),
            min_x: usize::MAX,
            min_y: usize::MAX,
            touches_border: false,
        };
        while let Some(i) = queue.pop_front() {
            let (x, y) = (i % width, i / width);
            comp.pixels.push(i);
            comp.min_x = comp.min_x.min(x);
            comp.min_y = comp.min_y.min(y);
            if x == 0 || y == 0 || x + 1 == width || y + 1 == height {
                comp.touches_border = true;
            }
            for d in NEIGHBORS_8 {
                if let Some((nx, ny)) = neighbor(x, y, d, width, height) {
                    let j = ny * width + nx;
                    if member[j] && !seen[j] {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                }
            }
        }
        out.push(comp);
    }
    out
}

/// Chessboard (8-connected, unit step) distance from every member pixel
/// to the nearest non-member pixel. Pixels beyond the image border count
/// as non-members, so a member on the border has distance 1.
pub fn chessboard_distance(member: &[bool], width: usize, height: usize) -> Vec<u32> {
    assert_eq!(member.len(), width * height);
    let mut dist = vec![u32::MAX; member.len()];
    let mut queue = VecDeque::new();
    for y in 0..height {
        for x in 0..width {
            let i = y * width + x;
            if !member[i] {
                dist[i] = 0;
                queue.push_back(i);
            } else if x == 0 || y == 0 || x + 1 == width || y + 1 == height {
                dist[i] = 1;
                queue.push_back(i);
            }
        }
    }
    while let Some(i) = queue.pop_front() {
        let (x, y) = (i % width, i / width);
        let next = dist[i] + 1;
        for d in NEIGHBORS_8 {
            if let Some((nx, ny)) = neighbor(x, y, d, width, height) {
                let j = ny * width + nx;
                if dist[j] > next {
                    dist[j] = next;
                    queue.push_back(j);
                }
            }
        }
    }
    dist
}
