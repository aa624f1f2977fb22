//! The bi-dimensional representation (cumulative loss, event count) and
//! neighbourhood density within a disk of radius `r`.
//!
//! Density of a sample is the number of samples (itself included) within
//! the closed disk of radius `r` around it, divided by `pi r^2`. Distances
//! are Euclidean on the raw coordinates.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::trace::{MeanRecord, RegularityRecord};

/// One sample placed at (cumulative loss, event count).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RepresentationPoint {
    pub sample_id: usize,
    pub x: f64,
    pub y: f64,
}

impl From<&RegularityRecord> for RepresentationPoint {
    fn from(r: &RegularityRecord) -> Self {
        Self {
            sample_id: r.sample_id,
            x: r.cumulative_loss as f64,
            y: r.event_count as f64,
        }
    }
}

impl From<&MeanRecord> for RepresentationPoint {
    fn from(r: &MeanRecord) -> Self {
        Self {
            sample_id: r.sample_id,
            x: r.cumulative_loss,
            y: r.event_count,
        }
    }
}

pub fn points_from_records<'a, R>(records: &'a [R]) -> Vec<RepresentationPoint>
where
    &'a R: Into<RepresentationPoint>,
{
    records.iter().map(Into::into).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMap {
    pub radius: f64,
    /// Neighbour count per sample, self included.
    pub counts: Vec<usize>,
    /// Samples per unit area, `counts / (pi r^2)`.
    pub values: Vec<f64>,
}

impl DensityMap {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Radius from the axis ranges of the representation:
/// `sqrt((x_range / 30)^2 + (y_range / 30)^2)`.
pub fn default_radius(x_range: f64, y_range: f64) -> Result<f64> {
    if x_range < 0.0 || y_range < 0.0 || !x_range.is_finite() || !y_range.is_finite() {
        return Err(Error::argument("axis ranges must be finite and >= 0"));
    }
    if x_range == 0.0 && y_range == 0.0 {
        return Err(Error::argument("both axis ranges are zero"));
    }
    Ok(((x_range / 30.0).powi(2) + (y_range / 30.0).powi(2)).sqrt())
}

/// `(max - min)` along each axis.
pub fn axis_ranges(points: &[RepresentationPoint]) -> (f64, f64) {
    let span = |f: fn(&RepresentationPoint) -> f64| {
        let (lo, hi) = points
            .iter()
            .map(f)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        if points.is_empty() {
            0.0
        } else {
            hi - lo
        }
    };
    (span(|p| p.x), span(|p| p.y))
}

/// Counts neighbours with a uniform grid.
///
/// Cells are a hair wider than `r`, so any pair within distance `r` lies in
/// the same or an adjacent cell even after rounding of `coord / cell`.
pub fn neighbor_counts(points: &[RepresentationPoint], r: f64) -> Vec<usize> {
    let cell = r * (1.0 + 1e-9);
    let key = |p: &RepresentationPoint| ((p.x / cell).floor() as i64, (p.y / cell).floor() as i64);
    let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for (i, p) in points.iter().enumerate() {
        grid.entry(key(p)).or_default().push(i);
    }
    points
        .par_iter()
        .map(|p| {
            let (cx, cy) = key(p);
            let mut count = 0;
            for gx in cx - 1..=cx + 1 {
                for gy in cy - 1..=cy + 1 {
                    if let Some(bucket) = grid.get(&(gx, gy)) {
                        count += bucket
                            .iter()
                            .filter(|&&j| {
                                let (dx, dy) = (points[j].x - p.x, points[j].y - p.y);
                                (dx * dx + dy * dy).sqrt() <= r
                            })
                            .count();
                    }
                }
            }
            count
        })
        .collect()
}

pub fn density_map(points: &[RepresentationPoint], r: f64) -> Result<DensityMap> {
    if !r.is_finite() || r <= 0.0 {
        return Err(Error::argument(format!("radius must be > 0, got {r}")));
    }
    if points.is_empty() {
        return Err(Error::argument("density needs at least one point"));
    }
    let counts = neighbor_counts(points, r);
    let area = std::f64::consts::PI * r * r;
    let values = counts.iter().map(|&c| c as f64 / area).collect();
    Ok(DensityMap {
        radius: r,
        counts,
        values,
    })
}

/// Density values scaled to unit Euclidean norm, order preserved.
pub fn normalized_density_vector(map: &DensityMap) -> Result<Vec<f64>> {
    if map.is_empty() {
        return Err(Error::argument("empty density map"));
    }
    let norm = map.values.iter().map(|v| v * v).sum::<f64>().sqrt();
    Ok(map.values.iter().map(|v| v / norm).collect())
}

/// Density report CSV: `sample_id,x,y,density`.
pub fn density_csv(points: &[RepresentationPoint], map: &DensityMap) -> String {
    let mut out = String::from("sample_id,x,y,density\n");
    for (p, v) in points.iter().zip(&map.values) {
        out.push_str(&format!(
            "{},{},{},{}\n",
            p.sample_id,
            crate::fmt_num(p.x),
            crate::fmt_num(p.y),
            crate::fmt_num(*v)
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn pts(coords: &[(f64, f64)]) -> Vec<RepresentationPoint> {
        coords
            .iter()
            .enumerate()
            .map(|(sample_id, &(x, y))| RepresentationPoint { sample_id, x, y })
            .collect()
    }

    fn brute_counts(points: &[RepresentationPoint], r: f64) -> Vec<usize> {
        points
            .iter()
            .map(|p| {
                points
                    .iter()
                    .filter(|q| ((q.x - p.x).powi(2) + (q.y - p.y).powi(2)).sqrt() <= r)
                    .count()
            })
            .collect()
    }

    #[test]
    fn radius_formula() {
        assert_eq!(default_radius(30.0, 0.0).unwrap(), 1.0);
        assert!((default_radius(30.0, 30.0).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        assert!(default_radius(0.0, 0.0).is_err());
        assert!(default_radius(-1.0, 3.0).is_err());
    }

    #[test]
    fn single_point_density() {
        let m = density_map(&pts(&[(3.0, 1.0)]), 1.0).unwrap();
        assert!((m.values[0] - 1.0 / PI).abs() < 1e-15);
    }

    #[test]
    fn coincident_points() {
        let m = density_map(&pts(&[(2.0, 2.0), (2.0, 2.0)]), 1.0).unwrap();
        assert_eq!(m.counts, vec![2, 2]);
        assert!((m.values[0] - 2.0 / PI).abs() < 1e-15);
    }

    #[test]
    fn line_of_five() {
        let p = pts(&[(0.0, 0.0), (1.0, 0.0), (2.0, 0.0), (3.0, 0.0), (4.0, 0.0)]);
        let m = density_map(&p, 1.5).unwrap();
        assert_eq!(m.counts, brute_counts(&p, 1.5));
        assert_eq!(m.counts[2], 3);
        assert!((m.values[2] - 3.0 / (PI * 2.25)).abs() < 1e-15);
    }

    #[test]
    fn closed_disk_boundary() {
        let m = density_map(&pts(&[(0.0, 0.0), (3.0, 4.0)]), 5.0).unwrap();
        assert_eq!(m.counts, vec![2, 2]);
    }

    #[test]
    fn bad_inputs() {
        assert!(density_map(&pts(&[(0.0, 0.0)]), 0.0).is_err());
        assert!(density_map(&[], 1.0).is_err());
    }

    #[test]
    fn normalization() {
        let m = DensityMap { radius: 1.0, counts: vec![3, 4], values: vec![3.0, 4.0] };
        let v = normalized_density_vector(&m).unwrap();
        assert!((v[0] - 0.6).abs() < 1e-15 && (v[1] - 0.8).abs() < 1e-15);
        let m = DensityMap { radius: 1.0, counts: vec![1; 9], values: vec![2.5; 9] };
        let v = normalized_density_vector(&m).unwrap();
        assert!(v.iter().all(|x| (x - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn ranges() {
        let p = pts(&[(1.0, 0.0), (7.0, 3.0), (4.0, 1.0)]);
        assert_eq!(axis_ranges(&p), (6.0, 3.0));
    }

    fn integer_points() -> impl Strategy<Value = Vec<RepresentationPoint>> {
        prop::collection::vec((0u32..60, 0u32..20), 1..300).prop_map(|v| {
            v.into_iter()
                .enumerate()
                .map(|(i, (x, y))| RepresentationPoint { sample_id: i, x: x as f64, y: y as f64 })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn grid_equals_brute_force(p in integer_points(), r in 0.1f64..8.0) {
            prop_assert_eq!(neighbor_counts(&p, r), brute_counts(&p, r));
        }

        #[test]
        fn unit_norm(values in prop::collection::vec(0.01f64..100.0, 1..50)) {
            let m = DensityMap { radius: 1.0, counts: vec![1; values.len()], values };
            let v = normalized_density_vector(&m).unwrap();
            let n: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            prop_assert!((n - 1.0).abs() < 1e-12);
        }

        #[test]
        fn larger_radius_never_loses_neighbours(p in integer_points(), r in 0.5f64..4.0, c in 1.0f64..3.0) {
            let small = density_map(&p, r).unwrap();
            let big = density_map(&p, r * c).unwrap();
            for i in 0..p.len() {
                prop_assert!(big.counts[i] >= small.counts[i]);
                let ratio = big.values[i] / small.values[i];
                let expect = big.counts[i] as f64 / (c * c * small.counts[i] as f64);
                prop_assert!((ratio - expect).abs() < 1e-9 * expect);
            }
        }

        #[test]
        fn disk_membership_is_symmetric(p in integer_points(), r in 0.5f64..6.0) {
            let r2 = r * r;
            for a in &p {
                for b in &p {
                    let ab = (a.x - b.x).powi(2) + (a.y - b.y).powi(2) <= r2;
                    let ba = (b.x - a.x).powi(2) + (b.y - a.y).powi(2) <= r2;
                    prop_assert_eq!(ab, ba);
                }
            }
        }
    }
}
