//! Scribble strokes as sent by the browser and their rasterization onto the
//! indexed mask.

use serde::{Deserialize, Serialize};

/// A polyline painted with a round brush. Points are `[x, y]` pixel
/// coordinates; label 0 erases.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Stroke {
    pub label: u8,
    #[serde(default)]
    pub radius: u32,
    pub points: Vec<[i64; 2]>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrokeList {
    pub strokes: Vec<Stroke>,
    /// Start from an empty mask instead of painting over the current one.
    #[serde(default)]
    pub clear: bool,
}

fn stamp(mask: &mut [u8], width: usize, height: usize, cx: i64, cy: i64, radius: i64, label: u8) {
    let r2 = radius * radius;
    for dy in -radius..=radius {
        let y = cy + dy;
        if y < 0 || y >= height as i64 {
            continue;
        }
        for dx in -radius..=radius {
            let x = cx + dx;
            if x >= 0 && x < width as i64 && dx * dx + dy * dy <= r2 {
                mask[y as usize * width + x as usize] = label;
            }
        }
    }
}

/// Bresenham segment from `a` to `b`, both ends included.
fn line(a: [i64; 2], b: [i64; 2], mut visit: impl FnMut(i64, i64)) {
    let (mut x, mut y) = (a[0], a[1]);
    let (dx, dy) = ((b[0] - x).abs(), -(b[1] - y).abs());
    let (sx, sy) = (if x < b[0] { 1 } else { -1 }, if y < b[1] { 1 } else { -1 });
    let mut err = dx + dy;
    loop {
        visit(x, y);
        if x == b[0] && y == b[1] {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
}

/// Paints `stroke` onto the row-major `mask`; parts outside the image are
/// clipped.
pub fn rasterize(mask: &mut [u8], width: usize, height: usize, stroke: &Stroke) {
    let r = i64::from(stroke.radius);
    match stroke.points.as_slice() {
        [] => {}
        [p] => stamp(mask, width, height, p[0], p[1], r, stroke.label),
        pts => {
            for pair in pts.windows(2) {
                line(pair[0], pair[1], |x, y| stamp(mask, width, height, x, y, r, stroke.label));
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn marked(mask: &[u8], width: usize) -> Vec<(usize, usize)> {
        mask.iter().enumerate().filter(|(_, &v)| v != 0).map(|(i, _)| (i % width, i / width)).collect()
    }

    #[test]
    fn axis_aligned_stroke() {
        let mut mask = vec![0u8; 16];
        rasterize(&mut mask, 4, 4, &Stroke { label: 1, radius: 0, points: vec![[0, 0], [0, 2]] });
        assert_eq!(marked(&mask, 4), vec![(0, 0), (0, 1), (0, 2)]);
    }

    #[test]
    fn click_is_a_disc() {
        let mut mask = vec![0u8; 25];
        rasterize(&mut mask, 5, 5, &Stroke { label: 2, radius: 1, points: vec![[2, 2]] });
        assert_eq!(marked(&mask, 5), vec![(2, 1), (1, 2), (2, 2), (3, 2), (2, 3)]);
        assert!(mask.iter().all(|&v| v == 0 || v == 2));
    }

    #[test]
    fn diagonal_is_connected_and_clipped() {
        let mut mask = vec![0u8; 9];
        rasterize(&mut mask, 3, 3, &Stroke { label: 1, radius: 0, points: vec![[-1, -1], [5, 5]] });
        assert_eq!(marked(&mask, 3), vec![(0, 0), (1, 1), (2, 2)]);
    }

    #[test]
    fn eraser() {
        let mut mask = vec![3u8; 4];
        rasterize(&mut mask, 2, 2, &Stroke { label: 0, radius: 0, points: vec![[1, 0]] });
        assert_eq!(mask, vec![3, 0, 3, 3]);
    }
}
