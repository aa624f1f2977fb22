//! `prune-eval`, `radius-sweep` and `compress-test`.

use std::collections::BTreeSet;
use std::path::Path;

use rayon::prelude::*;

use sample_regularity::dataset::Split;
use sample_regularity::density::{density_map, points_from_records};
use sample_regularity::fmt_num;
use sample_regularity::selection::{
    angular_bins, compression_fidelity, prune, radius_sweep as sweep, retrain_accuracy, stratified_sample,
    PruneStrategy, SweepTable,
};
use sample_regularity::trainer::train_and_trace;
use sample_regularity::trainer::zoo::{zoo_predict, ZooAlgorithm};

use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::output::{finite_mean, pool, write_text};

/// Test accuracy of one pruning cell.
#[derive(Debug, Clone, PartialEq)]
pub struct PruneCell {
    pub seed: u64,
    pub strategy: String,
    pub fraction: f64,
    pub retained: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PruneTable {
    pub strategies: Vec<String>,
    pub fractions: Vec<f64>,
    /// `mean[strategy][fraction]`, averaged over seeds.
    pub mean: Vec<Vec<f64>>,
    pub cells: Vec<PruneCell>,
}

impl PruneTable {
    pub fn get(&self, strategy: &str, fraction: f64) -> Option<f64> {
        let s = self.strategies.iter().position(|n| n == strategy)?;
        let f = self.fractions.iter().position(|&x| x == fraction)?;
        Some(self.mean[s][f])
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("strategy");
        for f in &self.fractions {
            out.push(',');
            out.push_str(&fmt_num(*f));
        }
        out.push('\n');
        for (name, row) in self.strategies.iter().zip(&self.mean) {
            out.push_str(name);
            for a in row {
                out.push(',');
                out.push_str(&fmt_num(*a));
            }
            out.push('\n');
        }
        out
    }

    pub fn cells_csv(&self) -> String {
        let mut out = String::from("seed,strategy,fraction,retained,accuracy\n");
        for c in &self.cells {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                c.seed,
                c.strategy,
                fmt_num(c.fraction),
                c.retained,
                fmt_num(c.accuracy)
            ));
        }
        out
    }
}

/// For each training seed: trace a run, prune its train split with every
/// strategy at every fraction, retrain from scratch under the same seed and
/// record test accuracy. The random strategy draws with `base_seed + i` for
/// the `i`-th training seed, so only its row depends on `base_seed`.
pub fn prune_eval(cfg: &ExperimentConfig, out: &Path) -> Result<PruneTable> {
    let ds = cfg.dataset()?;
    let (_, spec) = cfg.primary_model()?;
    let p = &cfg.prune;
    let base = cfg.experiment.base_seed;
    let workers = pool(cfg.experiment.workers)?;

    let cbtl = if p.cbtl_direction == "asc" { PruneStrategy::CbtlAsc } else { PruneStrategy::CbtlDesc };
    let strategies = |i: usize| {
        [
            PruneStrategy::DensityDesc { radius: p.radius },
            cbtl,
            PruneStrategy::ForgettingAsc,
            PruneStrategy::Random { seed: base.wrapping_add(i as u64) },
        ]
    };
    let names: Vec<String> = strategies(0).iter().map(ToString::to_string).collect();

    let cells: Vec<PruneCell> = workers.install(|| {
        let runs = p
            .seeds
            .par_iter()
            .map(|&seed| {
                let tc = cfg.train_config(seed)?;
                let bundle = train_and_trace(&ds, &spec, &tc)?;
                let records = bundle.train_trace.regularity_records();
                let map = density_map(&points_from_records(&records), p.radius)?;
                Ok((tc, records, map))
            })
            .collect::<Result<Vec<_>>>()?;

        let jobs: Vec<(usize, usize, usize)> = (0..p.seeds.len())
            .flat_map(|i| (0..names.len()).flat_map(move |s| (0..p.fractions.len()).map(move |f| (i, s, f))))
            .collect();
        jobs.par_iter()
            .map(|&(i, s, f)| {
                let (tc, records, map) = &runs[i];
                let strategy = strategies(i)[s];
                let density = matches!(strategy, PruneStrategy::DensityDesc { .. }).then_some(map);
                let kept = prune(records, density, strategy, p.fractions[f])?;
                let accuracy = retrain_accuracy(&ds, &kept, &spec, tc)?;
                Ok(PruneCell {
                    seed: p.seeds[i],
                    strategy: names[s].clone(),
                    fraction: p.fractions[f],
                    retained: kept.len(),
                    accuracy,
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let mean = names
        .iter()
        .map(|name| {
            p.fractions
                .iter()
                .map(|&f| {
                    let accs = cells.iter().filter(|c| &c.strategy == name && c.fraction == f);
                    let (sum, n) = accs.fold((0.0, 0usize), |(s, n), c| (s + c.accuracy, n + 1));
                    sum / n as f64
                })
                .collect()
        })
        .collect();
    let table = PruneTable {
        strategies: names,
        fractions: p.fractions.clone(),
        mean,
        cells,
    };
    write_text(&out.join("prune_eval.csv"), &table.to_csv())?;
    write_text(&out.join("prune_eval_cells.csv"), &table.cells_csv())?;
    Ok(table)
}

/// Density pruning over every (radius, fraction) pair, averaged over the
/// configured training seeds.
pub fn radius_sweep(cfg: &ExperimentConfig, out: &Path) -> Result<SweepTable> {
    let ds = cfg.dataset()?;
    let (_, spec) = cfg.primary_model()?;
    let p = &cfg.prune;
    let tables: Vec<SweepTable> = pool(cfg.experiment.workers)?.install(|| {
        p.seeds
            .par_iter()
            .map(|&seed| {
                let tc = cfg.train_config(seed)?;
                let bundle = train_and_trace(&ds, &spec, &tc)?;
                Ok(sweep(&ds, &bundle, &p.radii, &p.fractions, &spec, &tc)?)
            })
            .collect::<Result<_>>()
    })?;
    let n = tables.len() as f64;
    let accuracy = (0..p.radii.len())
        .map(|r| {
            (0..p.fractions.len())
                .map(|f| tables.iter().map(|t| t.accuracy[r][f]).sum::<f64>() / n)
                .collect()
        })
        .collect();
    let table = SweepTable {
        radii: p.radii.clone(),
        fractions: p.fractions.clone(),
        accuracy,
    };
    write_text(&out.join("radius_sweep.csv"), &table.to_csv())?;
    Ok(table)
}

/// Fidelity of one compressed test set against the full one.
#[derive(Debug, Clone, PartialEq)]
pub struct FidelityCell {
    pub seed: u64,
    pub n_per_bin: usize,
    pub size: usize,
    /// NaN when the compressed accuracies have no spread to rank.
    pub spearman: f64,
    pub map_at_k: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompressReport {
    pub algorithms: Vec<String>,
    pub n_per_bin: Vec<usize>,
    /// Seed-averaged accuracy on the full test set, per algorithm.
    pub full_accuracy: Vec<f64>,
    /// `compressed_accuracy[algorithm][n_per_bin]`, seed-averaged.
    pub compressed_accuracy: Vec<Vec<f64>>,
    pub cells: Vec<FidelityCell>,
    pub test_size: usize,
}

/// Seed-averaged fidelity at one `n_per_bin`: `(spearman, map_at_k, defined seeds)`.
pub fn mean_fidelity(cells: &[FidelityCell], n_per_bin: usize) -> (f64, f64, usize) {
    let mine: Vec<&FidelityCell> = cells.iter().filter(|c| c.n_per_bin == n_per_bin).collect();
    let (s, n) = finite_mean(mine.iter().map(|c| c.spearman));
    let (m, _) = finite_mean(mine.iter().filter(|c| c.spearman.is_finite()).map(|c| c.map_at_k));
    (s, m, n)
}

impl CompressReport {
    pub fn accuracy_csv(&self) -> String {
        let mut out = String::from("algorithm,full");
        for n in &self.n_per_bin {
            out.push_str(&format!(",n_per_bin_{n}"));
        }
        out.push('\n');
        for (i, name) in self.algorithms.iter().enumerate() {
            out.push_str(name);
            out.push(',');
            out.push_str(&fmt_num(self.full_accuracy[i]));
            for a in &self.compressed_accuracy[i] {
                out.push(',');
                out.push_str(&fmt_num(*a));
            }
            out.push('\n');
        }
        out
    }

    pub fn fidelity_csv(&self) -> String {
        let mut out = String::from("n_per_bin,mean_size,spearman,map_at_k,defined_seeds\n");
        for &n in &self.n_per_bin {
            let (s, m, defined) = mean_fidelity(&self.cells, n);
            let (size, _) = finite_mean(self.cells.iter().filter(|c| c.n_per_bin == n).map(|c| c.size as f64));
            out.push_str(&format!("{n},{},{},{},{defined}\n", fmt_num(size), fmt_num(s), fmt_num(m)));
        }
        out
    }

    pub fn cells_csv(&self) -> String {
        let mut out = String::from("seed,n_per_bin,size,spearman,map_at_k\n");
        for c in &self.cells {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                c.seed,
                c.n_per_bin,
                c.size,
                fmt_num(c.spearman),
                fmt_num(c.map_at_k)
            ));
        }
        out
    }
}

struct SeedResult {
    full: Vec<f64>,
    compressed: Vec<Vec<f64>>,
    cells: Vec<FidelityCell>,
    manifests: Vec<String>,
}

/// For each seed: trace a run to place test samples in angular bins, fit
/// the zoo once, and compare its accuracy ranking on the full test set with
/// the ranking on each stratified compressed subset.
pub fn compress_test(cfg: &ExperimentConfig, out: &Path) -> Result<CompressReport> {
    let ds = cfg.dataset()?;
    let (_, spec) = cfg.primary_model()?;
    let c = &cfg.compress;
    let zoo = ZooAlgorithm::default_zoo(c.knn_k);
    let take_all: BTreeSet<usize> = c.take_all.iter().copied().collect();
    let train = ds.view_of(Split::Train);
    let test = ds.view_of(Split::Test);

    let results: Vec<SeedResult> = pool(cfg.experiment.workers)?.install(|| {
        c.seeds
            .par_iter()
            .map(|&seed| {
                let bundle = train_and_trace(&ds, &spec, &cfg.train_config(seed)?)?;
                let records = bundle.test_trace.regularity_records();
                let binning = angular_bins(&points_from_records(&records), c.sector_deg)?;
                let bits: Vec<Vec<u8>> = zoo
                    .par_iter()
                    .map(|&alg| zoo_predict(alg, &train, &test, seed))
                    .collect::<sample_regularity::Result<_>>()?;
                let accuracy = |ids: &[usize], b: &[u8]| ids.iter().map(|&i| b[i] as f64).sum::<f64>() / ids.len() as f64;
                let all: Vec<usize> = (0..test.len()).collect();
                let full: Vec<f64> = bits.iter().map(|b| accuracy(&all, b)).collect();
                let mut compressed = vec![Vec::new(); zoo.len()];
                let mut cells = Vec::new();
                let mut manifests = Vec::new();
                for &n in &c.n_per_bin {
                    let ids = stratified_sample(&binning, n, &take_all, seed)?;
                    let comp: Vec<f64> = bits.iter().map(|b| accuracy(&ids, b)).collect();
                    let (spearman, map_at_k) = match compression_fidelity(&full, &comp) {
                        Ok(f) => (f.spearman, f.map_at_k),
                        Err(sample_regularity::Error::UndefinedCorrelation(_)) => (f64::NAN, f64::NAN),
                        Err(e) => return Err(e.into()),
                    };
                    for (a, v) in compressed.iter_mut().zip(&comp) {
                        a.push(*v);
                    }
                    cells.push(FidelityCell { seed, n_per_bin: n, size: ids.len(), spearman, map_at_k });
                    manifests.push(binning.manifest_csv(&ids));
                }
                Ok(SeedResult { full, compressed, cells, manifests })
            })
            .collect::<Result<_>>()
    })?;

    let k = results.len() as f64;
    let full_accuracy = (0..zoo.len())
        .map(|a| results.iter().map(|r| r.full[a]).sum::<f64>() / k)
        .collect();
    let compressed_accuracy = (0..zoo.len())
        .map(|a| {
            (0..c.n_per_bin.len())
                .map(|j| results.iter().map(|r| r.compressed[a][j]).sum::<f64>() / k)
                .collect()
        })
        .collect();
    let report = CompressReport {
        algorithms: zoo.iter().map(ToString::to_string).collect(),
        n_per_bin: c.n_per_bin.clone(),
        full_accuracy,
        compressed_accuracy,
        cells: results.iter().flat_map(|r| r.cells.clone()).collect(),
        test_size: test.len(),
    };
    write_text(&out.join("zoo_accuracy.csv"), &report.accuracy_csv())?;
    write_text(&out.join("fidelity.csv"), &report.fidelity_csv())?;
    write_text(&out.join("fidelity_cells.csv"), &report.cells_csv())?;
    for (n, manifest) in c.n_per_bin.iter().zip(&results[0].manifests) {
        write_text(&out.join(format!("manifest_n{n}.csv")), manifest)?;
    }
    Ok(report)
}
