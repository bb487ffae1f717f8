use momt_core::grid::Grid;
use nalgebra::DVector;
use serde::Serialize;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Peak {
    pub index: usize,
    pub point: Vec<f64>,
    pub mass: f64,
}

fn chebyshev(a: &[usize], b: &[usize]) -> usize {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.abs_diff(*y))
        .max()
        .unwrap_or(0)
}

fn is_local_max(spectrum: &DVector<f64>, grid: &Grid, idx: usize) -> bool {
    let shape = grid.shape();
    let center = grid.multi_index(idx);
    let v = spectrum[idx];
    let d = shape.len();
    let mut neighbor = center.clone();
    for code in 0..3usize.pow(d as u32) {
        let mut c = code;
        let mut inside = true;
        for k in 0..d {
            let off = (c % 3) as isize - 1;
            c /= 3;
            let n = center[k] as isize + off;
            if n < 0 || n >= shape[k] as isize {
                inside = false;
                break;
            }
            neighbor[k] = n as usize;
        }
        if inside && spectrum[grid.linear_index(&neighbor)] > v {
            return false;
        }
    }
    true
}

/// Up to `k` strongest positive local maxima, each at least
/// `min_separation + 1` cells (Chebyshev) from every stronger accepted peak.
/// Equal values are ranked by lowest linear index.
pub fn peak_extract(
    spectrum: &DVector<f64>,
    grid: &Grid,
    k: usize,
    min_separation: usize,
) -> Vec<Peak> {
    let mut candidates: Vec<usize> = (0..spectrum.len())
        .filter(|&i| spectrum[i] > 0.0 && is_local_max(spectrum, grid, i))
        .collect();
    candidates.sort_by(|&a, &b| spectrum[b].total_cmp(&spectrum[a]).then(a.cmp(&b)));
    let mut accepted: Vec<(usize, Vec<usize>)> = Vec::new();
    for i in candidates {
        if accepted.len() == k {
            break;
        }
        let mi = grid.multi_index(i);
        if accepted
            .iter()
            .all(|(_, m)| chebyshev(m, &mi) > min_separation)
        {
            accepted.push((i, mi));
        }
    }
    accepted
        .into_iter()
        .map(|(i, _)| Peak {
            index: i,
            point: grid.point(i),
            mass: spectrum[i],
        })
        .collect()
}
