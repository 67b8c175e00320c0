//! Robust centring and scaling applied before any Cauchy fit.
//!
//! Three column scales are available:
//!
//! * [`ScaleMode::MedianAbsDeviation`] (default): `1.4826 median_i |x_ij - m_j|`
//!   with `m_j` the column median;
//! * [`ScaleMode::MeanAbsAboutMedian`]: `mean_i |x_ij - m_j|`, see [`mad_scale`];
//! * [`ScaleMode::MeanAbsAboutMean`]: `mean_i |x_ij - xbar_j|`.
//!
//! The two mean-based scales are not robust: a handful of far outliers
//! inflate every column they touch.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::DataMatrix;

pub const WEISZFELD_TOL: f64 = 1e-8;
pub const WEISZFELD_MAX_ITERS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CenteringMode {
    #[default]
    ColumnMedian,
    SpatialMedian,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScaleMode {
    #[default]
    MedianAbsDeviation,
    MeanAbsAboutMedian,
    MeanAbsAboutMean,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CenteringSpec {
    pub mode: CenteringMode,
    pub scale: ScaleMode,
}

impl FromStr for CenteringMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "column" | "column-median" => Ok(Self::ColumnMedian),
            "spatial" | "spatial-median" => Ok(Self::SpatialMedian),
            "none" => Ok(Self::None),
            other => Err(Error::invalid(format!(
                "unknown centering '{other}' (expected column, spatial or none)"
            ))),
        }
    }
}

impl FromStr for ScaleMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "mad" | "median-ad" => Ok(Self::MedianAbsDeviation),
            "mean-ad" => Ok(Self::MeanAbsAboutMedian),
            "mean-ad-about-mean" => Ok(Self::MeanAbsAboutMean),
            "none" => Ok(Self::None),
            other => Err(Error::invalid(format!(
                "unknown scaling '{other}' (expected mad, mean-ad, mean-ad-about-mean or none)"
            ))),
        }
    }
}

impl fmt::Display for CenteringMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::ColumnMedian => "column",
            Self::SpatialMedian => "spatial",
            Self::None => "none",
        })
    }
}

impl fmt::Display for ScaleMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::MedianAbsDeviation => "mad",
            Self::MeanAbsAboutMedian => "mean-ad",
            Self::MeanAbsAboutMean => "mean-ad-about-mean",
            Self::None => "none",
        })
    }
}

/// Lower median: element `(n - 1) / 2` of the sorted values.
pub fn lower_median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    let mid = (v.len() - 1) / 2;
    let (_, m, _) = v.select_nth_unstable_by(mid, f64::total_cmp);
    *m
}

fn column(x: &DMatrix<f64>, j: usize) -> Vec<f64> {
    x.column(j).iter().copied().collect()
}

/// Subtracts the per-column lower median.
pub fn column_median_center(x: &DataMatrix) -> (DataMatrix, DVector<f64>) {
    let v = x.values();
    let center = DVector::from_fn(v.ncols(), |j, _| lower_median(&column(v, j)));
    let out = DMatrix::from_fn(v.nrows(), v.ncols(), |i, j| v[(i, j)] - center[j]);
    (DataMatrix::new(out).expect("shape preserved"), center)
}

/// Geometric median by Weiszfeld iteration with the Vardi-Zhang correction
/// at data points.
///
/// Stops when the (sub)gradient of `sum ||x_i - m||` has norm at most
/// [`WEISZFELD_TOL`]. Two rows give the midpoint.
pub fn spatial_median(x: &DataMatrix) -> Result<DVector<f64>> {
    let n = x.nrows();
    let rows: Vec<DVector<f64>> = (0..n).map(|i| x.row(i)).collect();
    if n == 2 {
        return Ok((&rows[0] + &rows[1]) * 0.5);
    }
    if rows.iter().all(|r| r == &rows[0]) {
        return Ok(rows[0].clone());
    }
    let scale = rows
        .iter()
        .map(|r| (r - &rows[0]).norm())
        .fold(0.0, f64::max);
    let coincide = 1e-12 * scale.max(1.0);

    let mut m = column_median_center(x).1;
    for _ in 0..WEISZFELD_MAX_ITERS {
        let mut num = DVector::zeros(x.ncols());
        let mut den = 0.0;
        let mut resid = DVector::zeros(x.ncols());
        let mut at_point = 0usize;
        for r in &rows {
            let d = (r - &m).norm();
            if d <= coincide {
                at_point += 1;
                continue;
            }
            num += r / d;
            den += 1.0 / d;
            resid += (r - &m) / d;
        }
        let r_norm = resid.norm();
        // subgradient condition: at a data point of multiplicity k the
        // point is optimal when ||R|| <= k
        if (r_norm - at_point as f64).max(0.0) <= WEISZFELD_TOL {
            return Ok(m);
        }
        let t = num / den;
        let next = if at_point == 0 {
            t
        } else {
            let gamma = (at_point as f64 / r_norm).min(1.0);
            t * (1.0 - gamma) + &m * gamma
        };
        let step = (&next - &m).norm();
        m = next;
        if step <= 1e-15 * scale {
            return Ok(m);
        }
    }
    Err(Error::FailedConvergence {
        what: "Weiszfeld spatial median",
        iterations: WEISZFELD_MAX_ITERS,
    })
}

/// Mean absolute deviation of `values` about `center`.
pub fn mean_abs_deviation(values: &[f64], center: f64) -> f64 {
    values.iter().map(|v| (v - center).abs()).sum::<f64>() / values.len() as f64
}

/// `1.4826` times the lower median of `|v - median(v)|`.
pub fn median_abs_deviation(values: &[f64]) -> f64 {
    let m = lower_median(values);
    let dev: Vec<f64> = values.iter().map(|v| (v - m).abs()).collect();
    1.4826 * lower_median(&dev)
}

/// Divides each column by its mean absolute deviation about the median.
pub fn mad_scale(x: &DataMatrix) -> Result<(DataMatrix, DVector<f64>)> {
    scale_columns(x, ScaleMode::MeanAbsAboutMedian)
}

pub fn scale_columns(x: &DataMatrix, mode: ScaleMode) -> Result<(DataMatrix, DVector<f64>)> {
    let v = x.values();
    let p = v.ncols();
    let mut scales = DVector::from_element(p, 1.0);
    if mode == ScaleMode::None {
        return Ok((x.clone(), scales));
    }
    for j in 0..p {
        let col = column(v, j);
        let s = match mode {
            ScaleMode::MeanAbsAboutMedian => mean_abs_deviation(&col, lower_median(&col)),
            ScaleMode::MeanAbsAboutMean => {
                mean_abs_deviation(&col, col.iter().sum::<f64>() / col.len() as f64)
            }
            _ => median_abs_deviation(&col),
        };
        if s.is_nan() || s <= 0.0 {
            return Err(Error::ZeroScale(j));
        }
        scales[j] = s;
    }
    let out = DMatrix::from_fn(v.nrows(), p, |i, j| v[(i, j)] / scales[j]);
    Ok((DataMatrix::new(out)?, scales))
}

/// Data after centring and scaling, with the transforms applied.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub data: DataMatrix,
    pub center: DVector<f64>,
    pub scales: DVector<f64>,
}

/// Centres, then scales, according to `spec`.
pub fn preprocess(x: &DataMatrix, spec: CenteringSpec) -> Result<Prepared> {
    let (centered, center) = match spec.mode {
        CenteringMode::ColumnMedian => column_median_center(x),
        CenteringMode::SpatialMedian => {
            let m = spatial_median(x)?;
            let v = x.values();
            let out = DMatrix::from_fn(v.nrows(), v.ncols(), |i, j| v[(i, j)] - m[j]);
            (DataMatrix::new(out)?, m)
        }
        CenteringMode::None => (x.clone(), DVector::zeros(x.ncols())),
    };
    let (data, scales) = scale_columns(&centered, spec.scale)?;
    Ok(Prepared {
        data,
        center,
        scales,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn dm(rows: &[&[f64]]) -> DataMatrix {
        DataMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn column_median_examples() {
        let (c, center) =
            column_median_center(&dm(&[&[1.0, 1.0, 5.0], &[2.0, 3.0, 5.0], &[3.0, 2.0, 5.0]]));
        assert_eq!(center.as_slice(), &[2.0, 2.0, 5.0]);
        assert_eq!(c.values().column(0).as_slice(), &[-1.0, 0.0, 1.0]);
        assert!(c.values().column(2).iter().all(|v| *v == 0.0));

        let (c, center) = column_median_center(&dm(&[&[1.0], &[3.0]]));
        assert_eq!(center[0], 1.0);
        assert_eq!(c.values().column(0).as_slice(), &[0.0, 2.0]);
    }

    #[test]
    fn mad_examples() {
        let (s, scales) = mad_scale(&dm(&[&[-1.0], &[0.0], &[1.0]])).unwrap();
        assert_relative_eq!(scales[0], 2.0 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(s.values()[(0, 0)], -1.5, epsilon = 1e-14);
        assert_relative_eq!(s.values()[(2, 0)], 1.5, epsilon = 1e-14);
        assert_eq!(
            mad_scale(&dm(&[&[1.0, 5.0], &[2.0, 5.0], &[3.0, 5.0]])).unwrap_err(),
            Error::ZeroScale(1)
        );
    }

    #[test]
    fn spatial_median_triangle_is_centroid() {
        let h = 3f64.sqrt() / 2.0;
        let x = dm(&[&[0.0, 0.0], &[1.0, 0.0], &[0.5, h]]);
        let m = spatial_median(&x).unwrap();
        assert_relative_eq!(m[0], 0.5, epsilon = 1e-8);
        assert_relative_eq!(m[1], h / 3.0, epsilon = 1e-8);
    }

    #[test]
    fn spatial_median_two_points_is_midpoint() {
        let m = spatial_median(&dm(&[&[0.0, 2.0], &[4.0, 0.0]])).unwrap();
        assert_eq!(m.as_slice(), &[2.0, 1.0]);
    }

    #[test]
    fn spatial_median_majority_point() {
        let x = dm(&[&[1.0, 2.0], &[1.0, 2.0], &[1.0, 2.0], &[7.0, -3.0]]);
        let m = spatial_median(&x).unwrap();
        assert_relative_eq!(m[0], 1.0, epsilon = 1e-10);
        assert_relative_eq!(m[1], 2.0, epsilon = 1e-10);
    }

    #[test]
    fn parse_modes() {
        assert_eq!(
            "column".parse::<CenteringMode>().unwrap(),
            CenteringMode::ColumnMedian
        );
        assert_eq!(
            "spatial".parse::<CenteringMode>().unwrap(),
            CenteringMode::SpatialMedian
        );
        assert_eq!(
            "mad".parse::<ScaleMode>().unwrap(),
            ScaleMode::MedianAbsDeviation
        );
        assert_eq!(
            "mean-ad".parse::<ScaleMode>().unwrap(),
            ScaleMode::MeanAbsAboutMedian
        );
        assert!("bogus".parse::<ScaleMode>().is_err());
    }
}
