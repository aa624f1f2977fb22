//! Training-set pruning and angular-bin test-set compression.

use std::collections::BTreeSet;
use std::fmt;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dataset::{round_half_up, LabeledDataset, Split};
use crate::density::{density_map, points_from_records, DensityMap, RepresentationPoint};
use crate::error::{Error, Result};
use crate::stats::spearman;
use crate::trace::RegularityRecord;
use crate::trainer::{fit, ModelSpec, RunBundle, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PruneStrategy {
    /// Highest neighbourhood density first.
    DensityDesc { radius: f64 },
    /// Highest cumulative loss (easiest) first.
    CbtlDesc,
    /// Lowest cumulative loss first; the reverse direction, for sensitivity checks.
    CbtlAsc,
    /// Fewest forgetting events first.
    ForgettingAsc,
    /// Uniform without replacement.
    Random { seed: u64 },
}

impl PruneStrategy {
    pub fn name(&self) -> &'static str {
        match self {
            PruneStrategy::DensityDesc { .. } => "density",
            PruneStrategy::CbtlDesc => "cbtl",
            PruneStrategy::CbtlAsc => "cbtl_asc",
            PruneStrategy::ForgettingAsc => "forgetting",
            PruneStrategy::Random { .. } => "random",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            PruneStrategy::DensityDesc { radius } if !radius.is_finite() || radius <= 0.0 => {
                Err(Error::argument(format!("density radius must be > 0, got {radius}")))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for PruneStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PruneStrategy::DensityDesc { radius } => write!(f, "density_r{radius}"),
            other => f.write_str(other.name()),
        }
    }
}

/// Removes `round(fraction * N)` samples by `strategy` and returns the
/// retained sample ids, ascending. Ties go to the lower sample id first.
pub fn prune(
    records: &[RegularityRecord],
    density: Option<&DensityMap>,
    strategy: PruneStrategy,
    fraction: f64,
) -> Result<Vec<usize>> {
    strategy.validate()?;
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::argument(format!("prune fraction {fraction} outside [0, 1)")));
    }
    let n = records.len();
    let n_remove = round_half_up(fraction * n as f64).min(n);

    let removed: Vec<usize> = match strategy {
        PruneStrategy::Random { seed } => {
            if density.is_some() {
                return Err(Error::argument("density map given for a non-density strategy"));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            index::sample(&mut rng, n, n_remove).into_iter().collect()
        }
        _ => {
            let mut order: Vec<usize> = (0..n).collect();
            match strategy {
                PruneStrategy::DensityDesc { .. } => {
                    let map = density.ok_or_else(|| Error::argument("density strategy needs a density map"))?;
                    if map.len() != n {
                        return Err(Error::argument(format!(
                            "density map has {} values for {n} records",
                            map.len()
                        )));
                    }
                    order.sort_by(|&a, &b| {
                        map.values[b]
                            .total_cmp(&map.values[a])
                            .then(records[a].sample_id.cmp(&records[b].sample_id))
                    });
                }
                _ if density.is_some() => {
                    return Err(Error::argument("density map given for a non-density strategy"));
                }
                PruneStrategy::CbtlDesc => order.sort_by_key(|&i| (std::cmp::Reverse(records[i].cumulative_loss), records[i].sample_id)),
                PruneStrategy::CbtlAsc => order.sort_by_key(|&i| (records[i].cumulative_loss, records[i].sample_id)),
                PruneStrategy::ForgettingAsc => order.sort_by_key(|&i| (records[i].event_count, records[i].sample_id)),
                PruneStrategy::Random { .. } => unreachable!(),
            }
            order.truncate(n_remove);
            order
        }
    };

    let removed: BTreeSet<usize> = removed.into_iter().map(|i| records[i].sample_id).collect();
    let mut kept: Vec<usize> = records
        .iter()
        .map(|r| r.sample_id)
        .filter(|id| !removed.contains(id))
        .collect();
    kept.sort_unstable();
    Ok(kept)
}

/// Prune-manifest CSV: `sample_id,retained`.
pub fn prune_manifest_csv(records: &[RegularityRecord], retained: &[usize]) -> String {
    let keep: BTreeSet<usize> = retained.iter().copied().collect();
    let mut out = String::from("sample_id,retained\n");
    for r in records {
        out.push_str(&format!("{},{}\n", r.sample_id, u8::from(keep.contains(&r.sample_id))));
    }
    out
}

/// Retrains on the retained train rows and returns the final test accuracy.
///
/// `retained` indexes rows of the train trace, i.e. positions within
/// `dataset.indices_of(Split::Train)`.
pub fn retrain_accuracy(dataset: &LabeledDataset, retained: &[usize], spec: &ModelSpec, config: &TrainConfig) -> Result<f64> {
    let train_ids = dataset.indices_of(Split::Train);
    let global: Vec<usize> = retained
        .iter()
        .map(|&i| {
            train_ids
                .get(i)
                .copied()
                .ok_or_else(|| Error::Range(format!("train row {i} out of range")))
        })
        .collect::<Result<_>>()?;
    let train = dataset.view(&global);
    let test = dataset.view_of(Split::Test);
    if test.is_empty() {
        return Err(Error::argument("dataset has no test split"));
    }
    let model = fit(&train, spec, config)?;
    let correct: usize = model.correctness(&test.features, &test.labels).iter().map(|&b| b as usize).sum();
    Ok(correct as f64 / test.len() as f64)
}

/// Test accuracy after density pruning for every (radius, fraction) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub radii: Vec<f64>,
    pub fractions: Vec<f64>,
    /// `accuracy[r][f]`
    pub accuracy: Vec<Vec<f64>>,
}

impl SweepTable {
    /// Radii as rows, fractions as columns.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("radius");
        for f in &self.fractions {
            out.push_str(&format!(",{}", crate::fmt_num(*f)));
        }
        out.push('\n');
        for (r, row) in self.radii.iter().zip(&self.accuracy) {
            out.push_str(&crate::fmt_num(*r));
            for a in row {
                out.push(',');
                out.push_str(&crate::fmt_num(*a));
            }
            out.push('\n');
        }
        out
    }
}

/// Prunes the run's training set by density at each radius and fraction,
/// retrains from scratch with `eval_config`, and records test accuracy.
pub fn radius_sweep(
    dataset: &LabeledDataset,
    run: &RunBundle,
    radii: &[f64],
    fractions: &[f64],
    spec: &ModelSpec,
    eval_config: &TrainConfig,
) -> Result<SweepTable> {
    if let Some(r) = radii.iter().find(|&&r| r.is_nan() || r <= 0.0) {
        return Err(Error::argument(format!("radius must be > 0, got {r}")));
    }
    let records = run.train_trace.regularity_records();
    let points = points_from_records(&records);
    let maps: Vec<DensityMap> = radii.iter().map(|&r| density_map(&points, r)).collect::<Result<_>>()?;

    let cells: Vec<(usize, usize)> = (0..radii.len())
        .flat_map(|ri| (0..fractions.len()).map(move |fi| (ri, fi)))
        .collect();
    let results: Vec<f64> = cells
        .par_iter()
        .map(|&(ri, fi)| {
            let kept = prune(&records, Some(&maps[ri]), PruneStrategy::DensityDesc { radius: radii[ri] }, fractions[fi])?;
            retrain_accuracy(dataset, &kept, spec, eval_config)
        })
        .collect::<Result<_>>()?;
    Ok(SweepTable {
        radii: radii.to_vec(),
        fractions: fractions.to_vec(),
        accuracy: results.chunks(fractions.len().max(1)).map(<[f64]>::to_vec).collect(),
    })
}

/// Assignment of representation points to angular difficulty bins.
///
/// Angles are measured at `(center_x, 0)` from the negative-x direction
/// (hard side, angle 0) round to the positive-x direction (angle 180).
/// Bin 0 holds points exactly on the left half-axis, bins
/// `1..=180/sector_deg` the sectors `(0, s], (s, 2s], ...` and the last bin
/// the right half-axis (and the centre itself).
#[derive(Debug, Clone, PartialEq)]
pub struct AngularBinning {
    pub center_x: f64,
    pub sector_deg: f64,
    pub sample_ids: Vec<usize>,
    pub bins: Vec<usize>,
}

impl AngularBinning {
    pub fn n_sectors(&self) -> usize {
        (180.0 / self.sector_deg).round() as usize
    }

    pub fn n_bins(&self) -> usize {
        self.n_sectors() + 2
    }

    pub fn bin_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.n_bins()];
        for &b in &self.bins {
            sizes[b] += 1;
        }
        sizes
    }

    /// Sample ids per bin, each list ascending.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_bins()];
        for (&id, &b) in self.sample_ids.iter().zip(&self.bins) {
            out[b].push(id);
        }
        for m in &mut out {
            m.sort_unstable();
        }
        out
    }

    /// Compression-manifest CSV: `sample_id,bin,selected`.
    pub fn manifest_csv(&self, selected: &[usize]) -> String {
        let chosen: BTreeSet<usize> = selected.iter().copied().collect();
        let mut out = String::from("sample_id,bin,selected\n");
        for (&id, &b) in self.sample_ids.iter().zip(&self.bins) {
            out.push_str(&format!("{id},{b},{}\n", u8::from(chosen.contains(&id))));
        }
        out
    }
}

/// Snaps a sector quotient within 1e-9 of an integer onto it, so points
/// built on a ray land deterministically despite rounding in `atan2`.
fn snap(q: f64) -> f64 {
    let r = q.round();
    if (q - r).abs() < 1e-9 {
        r
    } else {
        q
    }
}

pub fn angular_bins(points: &[RepresentationPoint], sector_deg: f64) -> Result<AngularBinning> {
    if points.is_empty() {
        return Err(Error::argument("angular binning needs at least one point"));
    }
    let n_sectors = 180.0 / sector_deg;
    if sector_deg.is_nan() || sector_deg <= 0.0 || sector_deg > 180.0 || (n_sectors - n_sectors.round()).abs() > 1e-9 {
        return Err(Error::argument(format!("sector angle {sector_deg} does not divide 180")));
    }
    let n_sectors = n_sectors.round() as usize;
    let (lo, hi) = points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.x), hi.max(p.x)));
    let center_x = (lo + hi) / 2.0;

    let bins = points
        .iter()
        .map(|p| {
            let dx = p.x - center_x;
            if p.y == 0.0 {
                return if dx < 0.0 { 0 } else { n_sectors + 1 };
            }
            let theta = p.y.atan2(-dx).to_degrees();
            let q = snap(theta / sector_deg);
            (q.ceil() as usize).clamp(1, n_sectors)
        })
        .collect();
    Ok(AngularBinning {
        center_x,
        sector_deg,
        sample_ids: points.iter().map(|p| p.sample_id).collect(),
        bins,
    })
}

/// Every member of the `take_all` bins plus up to `n_per_bin` uniformly drawn
/// members of each other bin. Returns sample ids, ascending.
pub fn stratified_sample(binning: &AngularBinning, n_per_bin: usize, take_all: &BTreeSet<usize>, seed: u64) -> Result<Vec<usize>> {
    if n_per_bin == 0 {
        return Err(Error::argument("n_per_bin must be >= 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for (b, members) in binning.members().into_iter().enumerate() {
        if take_all.contains(&b) || members.len() <= n_per_bin {
            out.extend(members);
        } else {
            out.extend(index::sample(&mut rng, members.len(), n_per_bin).into_iter().map(|i| members[i]));
        }
    }
    out.sort_unstable();
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fidelity {
    pub spearman: f64,
    pub map_at_k: f64,
}

/// Indices sorted best first; equal scores keep the lower index first.
fn ranking(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order
}

/// `(1/K) sum_i |top_i(compressed) ∩ top_i(full)| / i` over all prefix lengths.
pub fn map_at_k(full: &[f64], compressed: &[f64]) -> Result<f64> {
    if full.len() != compressed.len() || full.is_empty() {
        return Err(Error::argument("score lists must be nonempty and of equal length"));
    }
    let (a, b) = (ranking(full), ranking(compressed));
    let k = full.len();
    let mut seen_a = vec![false; k];
    let mut seen_b = vec![false; k];
    let mut overlap = 0usize;
    let mut total = 0.0;
    for i in 0..k {
        seen_a[a[i]] = true;
        if seen_b[a[i]] {
            overlap += 1;
        }
        seen_b[b[i]] = true;
        if seen_a[b[i]] {
            overlap += 1;
        }
        total += overlap as f64 / (i + 1) as f64;
    }
    Ok(total / k as f64)
}

/// Ranking agreement of per-algorithm accuracies on the full and the
/// compressed test set.
pub fn compression_fidelity(full: &[f64], compressed: &[f64]) -> Result<Fidelity> {
    if full.len() != compressed.len() {
        return Err(Error::argument(format!(
            "{} full scores vs {} compressed scores",
            full.len(),
            compressed.len()
        )));
    }
    if full.len() < 3 {
        return Err(Error::argument("fidelity needs at least 3 algorithms"));
    }
    Ok(Fidelity {
        spearman: spearman(full, compressed)?,
        map_at_k: map_at_k(full, compressed)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn recs(cbtl: &[usize], events: &[usize]) -> Vec<RegularityRecord> {
        cbtl.iter()
            .zip(events)
            .enumerate()
            .map(|(i, (&c, &e))| RegularityRecord { sample_id: i, cumulative_loss: c, event_count: e, at_epoch: 10 })
            .collect()
    }

    fn pt(id: usize, x: f64, y: f64) -> RepresentationPoint {
        RepresentationPoint { sample_id: id, x, y }
    }

    #[test]
    fn zero_fraction_is_identity() {
        let r = recs(&[1, 2, 3], &[0, 1, 0]);
        for s in [PruneStrategy::CbtlDesc, PruneStrategy::ForgettingAsc, PruneStrategy::Random { seed: 3 }] {
            assert_eq!(prune(&r, None, s, 0.0).unwrap(), vec![0, 1, 2]);
        }
    }

    #[test]
    fn random_prune_count_and_repeatability() {
        let r = recs(&[5; 10], &[0; 10]);
        let a = prune(&r, None, PruneStrategy::Random { seed: 8 }, 0.3).unwrap();
        assert_eq!(a.len(), 7);
        assert_eq!(a, prune(&r, None, PruneStrategy::Random { seed: 8 }, 0.3).unwrap());
        assert!(a.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn cbtl_desc_with_ties() {
        let r = recs(&[5, 9, 9, 1], &[0; 4]);
        assert_eq!(prune(&r, None, PruneStrategy::CbtlDesc, 0.5).unwrap(), vec![0, 3]);
        assert_eq!(prune(&r, None, PruneStrategy::CbtlAsc, 0.5).unwrap(), vec![1, 2]);
    }

    #[test]
    fn forgetting_asc_removes_calmest() {
        let r = recs(&[3, 3, 3, 3], &[2, 0, 1, 0]);
        assert_eq!(prune(&r, None, PruneStrategy::ForgettingAsc, 0.5).unwrap(), vec![0, 2]);
    }

    #[test]
    fn density_prune_removes_densest() {
        let r = recs(&[10, 10, 10, 2], &[0, 0, 0, 1]);
        let pts = points_from_records(&r);
        let map = density_map(&pts, 1.0).unwrap();
        let s = PruneStrategy::DensityDesc { radius: 1.0 };
        assert_eq!(prune(&r, Some(&map), s, 0.5).unwrap(), vec![2, 3]);
        assert!(prune(&r, None, s, 0.5).is_err());
        assert!(prune(&r, Some(&map), PruneStrategy::CbtlDesc, 0.5).is_err());
    }

    #[test]
    fn prune_fraction_bounds() {
        let r = recs(&[1, 2], &[0, 0]);
        assert!(prune(&r, None, PruneStrategy::CbtlDesc, 1.0).is_err());
        assert!(prune(&r, None, PruneStrategy::CbtlDesc, -0.1).is_err());
        assert!(prune(&r, None, PruneStrategy::DensityDesc { radius: 0.0 }, 0.1).is_err());
    }

    #[test]
    fn non_random_prune_ignores_seed_and_random_depends_on_it() {
        let r = recs(&(0..40).map(|i| i % 7).collect::<Vec<_>>(), &(0..40).map(|i| i % 3).collect::<Vec<_>>());
        let a = prune(&r, None, PruneStrategy::Random { seed: 1 }, 0.5).unwrap();
        let b = prune(&r, None, PruneStrategy::Random { seed: 2 }, 0.5).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn axis_bins() {
        let p = vec![pt(0, 0.0, 0.0), pt(1, 20.0, 0.0), pt(2, 5.0, 0.0), pt(3, 15.0, 0.0), pt(4, 10.0, 7.0)];
        let b = angular_bins(&p, 18.0).unwrap();
        assert_eq!(b.center_x, 10.0);
        assert_eq!(b.n_bins(), 12);
        assert_eq!(b.bins, vec![0, 11, 0, 11, 5]);
    }

    #[test]
    fn center_point_goes_to_last_bin() {
        let p = vec![pt(0, 0.0, 0.0), pt(1, 10.0, 0.0), pt(2, 20.0, 0.0)];
        assert_eq!(angular_bins(&p, 45.0).unwrap().bins, vec![0, 5, 5]);
    }

    #[test]
    fn boundary_points_take_the_lower_sector() {
        // centre (10, 0); rays at 45, 90 and 135 degrees
        let p = vec![pt(0, 0.0, 0.0), pt(1, 20.0, 0.0), pt(2, 6.0, 4.0), pt(3, 10.0, 3.0), pt(4, 13.0, 3.0)];
        let b = angular_bins(&p, 45.0).unwrap();
        assert_eq!(&b.bins[2..], &[1, 2, 3]);
        // just past each ray
        let p = vec![pt(0, 0.0, 0.0), pt(1, 20.0, 0.0), pt(2, 6.01, 4.0), pt(3, 10.01, 3.0), pt(4, 13.01, 3.0)];
        let b = angular_bins(&p, 45.0).unwrap();
        assert_eq!(&b.bins[2..], &[2, 3, 4]);
    }

    #[test]
    fn sector_must_divide_180() {
        let p = vec![pt(0, 1.0, 1.0)];
        assert!(angular_bins(&p, 50.0).is_err());
        assert!(angular_bins(&p, 0.0).is_err());
        assert!(angular_bins(&[], 18.0).is_err());
    }

    fn binning_with_sizes(sizes: &[usize]) -> AngularBinning {
        let mut sample_ids = Vec::new();
        let mut bins = Vec::new();
        for (b, &n) in sizes.iter().enumerate() {
            for _ in 0..n {
                bins.push(b);
                sample_ids.push(sample_ids.len());
            }
        }
        AngularBinning { center_x: 0.0, sector_deg: 180.0 / (sizes.len() - 2) as f64, sample_ids, bins }
    }

    #[test]
    fn eleven_n_plus_three() {
        let mut sizes = vec![3];
        sizes.extend([50, 49, 60, 70, 80, 90, 55, 65, 75, 85, 95]);
        let b = binning_with_sizes(&sizes);
        assert_eq!(b.n_bins(), 12);
        let take = BTreeSet::from([0]);
        let s = stratified_sample(&b, 30, &take, 1).unwrap();
        assert_eq!(s.len(), 333);
        assert_eq!(s, stratified_sample(&b, 30, &take, 1).unwrap());
        assert!(s.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn oversized_n_returns_everything() {
        let b = binning_with_sizes(&[2, 4, 3, 1]);
        let s = stratified_sample(&b, 100, &BTreeSet::new(), 0).unwrap();
        assert_eq!(s, (0..10).collect::<Vec<_>>());
        assert!(stratified_sample(&b, 0, &BTreeSet::new(), 0).is_err());
    }

    #[test]
    fn fidelity_examples() {
        let full = [0.9, 0.8, 0.7, 0.6, 0.5];
        let f = compression_fidelity(&full, &full).unwrap();
        assert_eq!((f.spearman, f.map_at_k), (1.0, 1.0));
        let rev = [0.5, 0.6, 0.7, 0.8, 0.9];
        assert!((compression_fidelity(&full, &rev).unwrap().spearman + 1.0).abs() < 1e-12);
        let m = map_at_k(&[0.9, 0.8, 0.7, 0.6], &[0.8, 0.9, 0.7, 0.6]).unwrap();
        assert!((m - 0.75).abs() < 1e-15);
        assert!(compression_fidelity(&[1.0, 2.0], &[1.0, 2.0]).is_err());
        assert!(compression_fidelity(&[1.0, 2.0, 3.0], &[1.0, 2.0]).is_err());
    }

    // Direct set-intersection evaluation of the prefix-overlap definition.
    fn map_oracle(full: &[f64], comp: &[f64]) -> f64 {
        let (a, b) = (ranking(full), ranking(comp));
        let k = a.len();
        (1..=k)
            .map(|i| {
                let sa: BTreeSet<_> = a[..i].iter().collect();
                let sb: BTreeSet<_> = b[..i].iter().collect();
                sa.intersection(&sb).count() as f64 / i as f64
            })
            .sum::<f64>()
            / k as f64
    }

    proptest! {
        #[test]
        fn map_matches_set_oracle(scores in prop::collection::vec((0u8..10, 0u8..10), 3..12)) {
            let full: Vec<f64> = scores.iter().map(|s| s.0 as f64).collect();
            let comp: Vec<f64> = scores.iter().map(|s| s.1 as f64).collect();
            prop_assert!((map_at_k(&full, &comp).unwrap() - map_oracle(&full, &comp)).abs() < 1e-12);
        }

        #[test]
        fn every_point_gets_one_bin(
            coords in prop::collection::vec((0u32..100, 0u32..30), 1..400),
            sector in prop::sample::select(vec![18.0, 45.0, 30.0, 90.0, 180.0]),
        ) {
            let p: Vec<_> = coords.iter().enumerate().map(|(i, &(x, y))| pt(i, x as f64, y as f64)).collect();
            let b = angular_bins(&p, sector).unwrap();
            prop_assert_eq!(b.bins.len(), p.len());
            prop_assert!(b.bins.iter().all(|&x| x < b.n_bins()));
            prop_assert_eq!(b.bin_sizes().iter().sum::<usize>(), p.len());
        }
    }
}
