//! Connected-component filtering on binary masks.

use serde::{Deserialize, Serialize};

use super::BinaryMask;

/// Pixel neighborhood used when growing components.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Connectivity {
    #[serde(rename = "4")]
    Four,
    #[serde(rename = "8")]
    Eight,
}

impl Connectivity {
    fn offsets(self) -> &'static [(i32, i32)] {
        match self {
            Connectivity::Four => &[(-1, 0), (1, 0), (0, -1), (0, 1)],
            Connectivity::Eight => &[
                (-1, -1),
                (-1, 0),
                (-1, 1),
                (0, -1),
                (0, 1),
                (1, -1),
                (1, 0),
                (1, 1),
            ],
        }
    }
}

/// Removes every foreground component with pixel count strictly below
/// `min_fraction * H * W`. Background is untouched.
pub fn remove_small_components(
    mask: &BinaryMask,
    min_fraction: f64,
    connectivity: Connectivity,
) -> BinaryMask {
    assert!((0.0..1.0).contains(&min_fraction), "min_fraction in [0, 1)");
    let (h, w) = (mask.height(), mask.width());
    let threshold = min_fraction * (h * w) as f64;
    let offsets = connectivity.offsets();

    let mut out = mask.clone();
    let mut visited = vec![false; h * w];
    let mut stack: Vec<(usize, usize)> = Vec::new();
    let mut component: Vec<(usize, usize)> = Vec::new();

    for si in 0..h {
        for sj in 0..w {
            if mask.data()[[si, sj]] == 0 || visited[si * w + sj] {
                continue;
            }
            component.clear();
            stack.push((si, sj));
            visited[si * w + sj] = true;
            while let Some((i, j)) = stack.pop() {
                component.push((i, j));
                for &(di, dj) in offsets {
                    let ni = i as i32 + di;
                    let nj = j as i32 + dj;
                    if ni < 0 || nj < 0 || ni >= h as i32 || nj >= w as i32 {
                        continue;
                    }
                    let (ni, nj) = (ni as usize, nj as usize);
                    if mask.data()[[ni, nj]] == 1 && !visited[ni * w + nj] {
                        visited[ni * w + nj] = true;
                        stack.push((ni, nj));
                    }
                }
            }
            if (component.len() as f64) < threshold {
                for &(i, j) in &component {
                    out.data_mut()[[i, j]] = 0;
                }
            }
        }
    }
    out
}
