//! Projection-pursuit first principal direction with the MAD index.
//!
//! A simplified comparator: the index is evaluated on directions through the
//! data points plus the classical PC, and the best of those are refined by a
//! plane-wise grid search.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{classical_first_pc, DataMatrix, UnitDirection};
use crate::prep::lower_median;

/// Number of top-ranked candidates that get refined. One is not enough in
/// low dimension, where the index has many local maxima.
pub const PP_REFINED_CANDIDATES: usize = 5;
/// Grid sweeps per refinement; each halves the angular range.
pub const PP_GRID_CYCLES: usize = 8;
/// Grid angles on each side of the current direction.
const GRID_HALF_POINTS: usize = 5;
const MAD_CONSISTENCY: f64 = 1.4826;

/// Median with the two middle values averaged, so that it is odd under
/// negation and the index does not depend on the sign of `u`. Reorders `c`.
fn median_in_place(c: &mut [f64]) -> f64 {
    let n = c.len();
    if n == 0 {
        return f64::NAN;
    }
    let (lo, hi, _) = c.select_nth_unstable_by(n / 2, f64::total_cmp);
    let upper = *hi;
    if n % 2 == 1 {
        upper
    } else {
        let lower = lo.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower + upper)
    }
}

fn mad_of(c: &mut [f64], buf: &mut Vec<f64>) -> f64 {
    let m = median_in_place(c);
    buf.clear();
    buf.extend(c.iter().map(|v| (v - m).abs()));
    MAD_CONSISTENCY * median_in_place(buf)
}

/// `1.4826 * median |c_i - median(c)|` of the projections `x u`.
pub fn mad_index(x: &DMatrix<f64>, u: &DVector<f64>) -> f64 {
    let mut c: Vec<f64> = (x * u).iter().copied().collect();
    let mut buf = Vec::with_capacity(c.len());
    mad_of(&mut c, &mut buf)
}

/// Coordinate-plane grid search: for each axis `e_j`, tries
/// `cos(t) u + sin(t) e_j` (normalised) on a grid of `t` and moves to the
/// best. The range of `t` starts at `pi/2` and halves after each sweep.
fn grid_refine(x: &DMatrix<f64>, u: DVector<f64>) -> (f64, DVector<f64>) {
    let (n, p) = x.shape();
    let mut u = u;
    let mut xu = x * &u;
    let mut buf = Vec::with_capacity(n);
    let mut work = vec![0.0; n];
    let mut best = mad_of(&mut xu.as_slice().to_vec(), &mut buf);
    let mut range = std::f64::consts::FRAC_PI_2;
    for _ in 0..PP_GRID_CYCLES {
        for j in 0..p {
            let col = x.column(j);
            let mut pick: Option<(f64, f64, f64)> = None;
            for k in 1..=GRID_HALF_POINTS {
                for t in [
                    range * k as f64 / GRID_HALF_POINTS as f64,
                    -range * k as f64 / GRID_HALF_POINTS as f64,
                ] {
                    let (s, c) = t.sin_cos();
                    let norm = (1.0 + 2.0 * s * c * u[j]).max(0.0).sqrt();
                    if norm < 1e-12 {
                        continue;
                    }
                    for i in 0..n {
                        work[i] = c * xu[i] + s * col[i];
                    }
                    let idx = mad_of(&mut work, &mut buf) / norm;
                    if idx > best && pick.is_none_or(|(b, _, _)| idx > b) {
                        pick = Some((idx, t, norm));
                    }
                }
            }
            if let Some((idx, t, norm)) = pick {
                let (s, c) = t.sin_cos();
                u *= c / norm;
                u[j] += s / norm;
                xu = x * &u;
                best = idx;
            }
        }
        range /= 2.0;
    }
    (best, u)
}

/// Projection-pursuit first PC with the MAD index.
///
/// Candidates are the normalised, median-centred data rows and the classical
/// PC. The [`PP_REFINED_CANDIDATES`] best are refined by [`grid_refine`]
/// and the best result wins. Deterministic.
pub fn pp_first_pc(x: &DataMatrix) -> Result<UnitDirection> {
    let n = x.nrows();
    let p = x.ncols();
    if n < 3 {
        return Err(Error::invalid(
            "projection pursuit needs at least 3 samples",
        ));
    }
    let v = x.values();
    let center = DVector::from_fn(p, |j, _| {
        lower_median(&v.column(j).iter().copied().collect::<Vec<_>>())
    });
    let centered = DMatrix::from_fn(n, p, |i, j| v[(i, j)] - center[j]);

    let mut candidates: Vec<DVector<f64>> = (0..n)
        .filter_map(|i| {
            let r = centered.row(i).transpose();
            let norm = r.norm();
            (norm > 0.0).then(|| r / norm)
        })
        .collect();
    if let Ok((pc, _)) = classical_first_pc(x) {
        candidates.push(pc.into_vector());
    }

    let mut scored: Vec<(f64, DVector<f64>)> = candidates
        .into_iter()
        .map(|c| (mad_index(&centered, &c), c))
        .collect();
    // Stable sort: equal indices keep candidate order.
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    if scored.first().is_none_or(|(idx, _)| *idx <= 0.0) {
        return Err(Error::DegenerateSample("all projection scales are zero"));
    }

    let mut best_idx = f64::NEG_INFINITY;
    let mut best_u = scored[0].1.clone();
    for (_, u) in scored.into_iter().take(PP_REFINED_CANDIDATES) {
        let (idx, u) = grid_refine(&centered, u);
        if idx > best_idx {
            best_idx = idx;
            best_u = u;
        }
    }
    UnitDirection::new(best_u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::angle_degrees;

    #[test]
    fn pp_on_rank_one() {
        let v = DVector::from_vec(vec![0.3, -1.0, 0.6]).normalize();
        let rows: Vec<Vec<f64>> = (0..15)
            .map(|i| {
                (&v * ((i as f64) - 7.0 + 0.1 * (i % 3) as f64))
                    .iter()
                    .cloned()
                    .collect()
            })
            .collect();
        let x = DataMatrix::from_rows(&rows).unwrap();
        let u = pp_first_pc(&x).unwrap();
        assert!(angle_degrees(&u, &UnitDirection::new(v).unwrap()) <= 1e-6);
    }
}
