//! Local maxima with topographic prominence.

/// A local maximum of a sampled curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub index: usize,
    pub value: f64,
    /// Height above the higher of the two lowest points separating it from
    /// higher ground (or the curve ends).
    pub prominence: f64,
}

/// All interior local maxima. A flat top counts once, at its middle.
pub fn find_peaks(y: &[f64]) -> Vec<Peak> {
    let n = y.len();
    let mut out = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        if y[i] > y[i - 1] {
            let mut j = i;
            while j + 1 < n && y[j + 1] == y[i] {
                j += 1;
            }
            if j + 1 < n && y[j + 1] < y[i] {
                let index = (i + j) / 2;
                out.push(Peak { index, value: y[index], prominence: prominence(y, i, j) });
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    out
}

fn prominence(y: &[f64], left_edge: usize, right_edge: usize) -> f64 {
    let top = y[left_edge];
    let mut left_min = top;
    for k in (0..left_edge).rev() {
        if y[k] > top {
            break;
        }
        left_min = left_min.min(y[k]);
    }
    let mut right_min = top;
    for &v in &y[right_edge + 1..] {
        if v > top {
            break;
        }
        right_min = right_min.min(v);
    }
    top - left_min.max(right_min)
}

/// Peaks whose prominence is at least `fraction` of the global maximum.
pub fn prominent_peaks(y: &[f64], fraction: f64) -> Vec<Peak> {
    let ymax = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    find_peaks(y).into_iter().filter(|p| p.prominence >= fraction * ymax).collect()
}
