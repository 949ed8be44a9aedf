//! Fidelity sweeps: generate data, train the NDO and the maximum-likelihood
//! baseline, and collect fidelities over a grid of noise levels, sample
//! counts and auxiliary-layer sizes.
//!
//! Seeds: repeat `r` of a sweep with seed `s` uses row seed `s + r`; its
//! data, NDO and baseline seeds are `derive_seed(row, "gen" | "train" |
//! "maxlik")`, which is exactly what `gen`, `train` and `maxlik` do with
//! `--seed row`. All cells of one repeat share that seed, so runs at
//! different settings see common random numbers.

use ndo_core::datagen::{sample_dataset, MeasurementProtocol};
use ndo_core::maxlik::{maxlik_fit, MaxLikConfig};
use ndo_core::qcore::{depolarize_density, Basis, DensityMatrix};
use ndo_core::rng::derive_seed;
use ndo_core::train::{train, TrainConfig};
use rayon::prelude::*;

use crate::error::{Result, TomoError};

pub const VERSION_TAG: &str = "ndo-sweep v1";
pub const COLUMNS: [&str; 16] = [
    "kind",
    "p_dep",
    "n_s",
    "n_aux",
    "repeat",
    "seed",
    "fidelity_ndo",
    "fidelity_maxlik",
    "nll_best",
    "fidelity_ndo_std",
    "fidelity_maxlik_std",
    "nll_best_std",
    "fidelity_ndo_median",
    "fidelity_maxlik_median",
    "n_ok",
    "error",
];

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub target: DensityMatrix,
    pub bases: Vec<Basis>,
    pub p_dep: Vec<f64>,
    pub n_samples: Vec<usize>,
    pub n_aux: Vec<usize>,
    pub repeats: usize,
    pub seed: u64,
    /// Template for every NDO run; `n_aux`, `seed`, `reference` and (when
    /// `updates` is set) `epochs` are filled in per cell.
    pub train: TrainConfig,
    /// Total minibatch updates per run; epochs are derived from it.
    pub updates: Option<usize>,
    pub maxlik: Option<MaxLikConfig>,
    pub jobs: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub p_dep: f64,
    pub n_s: usize,
    pub n_aux: usize,
    pub repeat: usize,
    pub seed: u64,
    pub fidelity_ndo: Option<f64>,
    pub fidelity_maxlik: Option<f64>,
    pub nll_best: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Stats {
    pub mean: f64,
    pub std: f64,
    pub median: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub p_dep: f64,
    pub n_s: usize,
    pub n_aux: usize,
    pub n_ok: usize,
    pub fidelity_ndo: Option<Stats>,
    pub fidelity_maxlik: Option<Stats>,
    pub nll_best: Option<Stats>,
}

/// `ceil(updates / batches per epoch)`, at least one epoch.
pub fn epochs_for_updates(n_records: usize, batch_size: usize, updates: usize) -> usize {
    let per_epoch = n_records.div_ceil(batch_size.max(1)).max(1);
    updates.div_ceil(per_epoch).max(1)
}

/// Sample statistics; the standard deviation uses `n - 1`.
pub fn stats(values: &[f64]) -> Option<Stats> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m = sorted.len();
    let median = if m % 2 == 1 {
        sorted[m / 2]
    } else {
        0.5 * (sorted[m / 2 - 1] + sorted[m / 2])
    };
    Some(Stats { mean, std, median })
}

impl SweepConfig {
    fn validate(&self) -> Result<()> {
        let usage = |m: &str| Err(TomoError::Usage(m.to_string()));
        if self.p_dep.is_empty() || self.n_samples.is_empty() || self.n_aux.is_empty() {
            return usage("sweep grids must be non-empty");
        }
        if self.p_dep.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return usage("depolarizing strengths must lie in [0, 1]");
        }
        if self.n_samples.contains(&0) {
            return usage("sample counts must be positive");
        }
        if self.repeats == 0 {
            return usage("repeats must be at least 1");
        }
        if self.bases.iter().any(|b| b.len() != self.target.n_qubits()) {
            return usage("bases do not match the target's qubit count");
        }
        Ok(())
    }
}

/// One repeat at one `(p_dep, N_S)`: a shared dataset, one NDO per `n_aux`
/// and a single baseline fit.
fn run_unit(cfg: &SweepConfig, p_dep: f64, n_s: usize, repeat: usize) -> Vec<SweepRow> {
    let seed = cfg.seed.wrapping_add(repeat as u64);
    let row = |n_aux: usize| SweepRow {
        p_dep,
        n_s,
        n_aux,
        repeat,
        seed,
        fidelity_ndo: None,
        fidelity_maxlik: None,
        nll_best: None,
        error: None,
    };
    let prepared = depolarize_density(&cfg.target, p_dep).and_then(|target| {
        let protocol = MeasurementProtocol {
            bases: cfg.bases.clone(),
            samples_per_basis: n_s,
            seed: derive_seed(seed, "gen"),
        };
        sample_dataset(&target, &protocol).map(|ds| (target, ds))
    });
    let (target, dataset) = match prepared {
        Ok(x) => x,
        Err(e) => {
            return cfg
                .n_aux
                .iter()
                .map(|&a| SweepRow {
                    error: Some(format!("data generation: {e}")),
                    ..row(a)
                })
                .collect();
        }
    };
    let (fid_ml, ml_error) = match &cfg.maxlik {
        None => (None, None),
        Some(ml) => {
            let ml = MaxLikConfig {
                seed: derive_seed(seed, "maxlik"),
                ..*ml
            };
            match maxlik_fit(&dataset, &ml).and_then(|fit| fit.rho.fidelity(&target)) {
                Ok(f) => (Some(f), None),
                Err(e) => (None, Some(format!("maxlik: {e}"))),
            }
        }
    };
    cfg.n_aux
        .iter()
        .map(|&n_aux| {
            let mut tc = cfg.train.clone();
            tc.n_aux = n_aux;
            tc.seed = derive_seed(seed, "train");
            tc.reference = Some(target.clone());
            if let Some(u) = cfg.updates {
                tc.epochs = epochs_for_updates(dataset.n_records(), tc.batch_size, u);
            }
            let mut r = SweepRow {
                fidelity_maxlik: fid_ml,
                error: ml_error.clone(),
                ..row(n_aux)
            };
            match train(&dataset, &tc) {
                Ok(rep) => {
                    let best = rep.best();
                    r.fidelity_ndo = best.fidelity;
                    r.nll_best = best.nll;
                }
                Err(e) => {
                    let msg = format!("train: {e}");
                    r.error = Some(match r.error {
                        Some(prev) => format!("{prev}; {msg}"),
                        None => msg,
                    });
                }
            }
            r
        })
        .collect()
}

/// Runs every cell (on up to `jobs` threads) and returns rows ordered by
/// `p_dep`, `N_S`, `n_aux`, repeat. Failed runs carry an error message and the
/// sweep continues. `progress` is called once per finished unit.
pub fn run_sweep<F>(cfg: &SweepConfig, progress: F) -> Result<Vec<SweepRow>>
where
    F: Fn(&[SweepRow]) + Sync,
{
    cfg.validate()?;
    let units: Vec<(f64, usize, usize)> = cfg
        .p_dep
        .iter()
        .flat_map(|&p| {
            cfg.n_samples
                .iter()
                .flat_map(move |&n| (0..cfg.repeats).map(move |r| (p, n, r)))
        })
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs.max(1))
        .build()
        .map_err(|e| TomoError::Usage(format!("cannot start worker pool: {e}")))?;
    let results: Vec<Vec<SweepRow>> = pool.install(|| {
        units
            .par_iter()
            .map(|&(p, n, r)| {
                let rows = run_unit(cfg, p, n, r);
                progress(&rows);
                rows
            })
            .collect()
    });
    let mut rows: Vec<SweepRow> = results.into_iter().flatten().collect();
    let order = |x: &SweepRow| {
        (
            cfg.p_dep.iter().position(|&p| p == x.p_dep),
            cfg.n_samples.iter().position(|&n| n == x.n_s),
            cfg.n_aux.iter().position(|&a| a == x.n_aux),
            x.repeat,
        )
    };
    rows.sort_by_key(order);
    Ok(rows)
}

/// One summary per `(p_dep, N_S, n_aux)` cell, in row order.
pub fn summarize(rows: &[SweepRow]) -> Vec<CellSummary> {
    let mut out: Vec<CellSummary> = Vec::new();
    let mut start = 0;
    while start < rows.len() {
        let key = (rows[start].p_dep, rows[start].n_s, rows[start].n_aux);
        let end = rows[start..]
            .iter()
            .position(|r| (r.p_dep, r.n_s, r.n_aux) != key)
            .map_or(rows.len(), |k| start + k);
        let cell = &rows[start..end];
        let col = |f: fn(&SweepRow) -> Option<f64>| stats(&cell.iter().filter_map(f).collect::<Vec<_>>());
        out.push(CellSummary {
            p_dep: key.0,
            n_s: key.1,
            n_aux: key.2,
            n_ok: cell.iter().filter(|r| r.error.is_none()).count(),
            fidelity_ndo: col(|r| r.fidelity_ndo),
            fidelity_maxlik: col(|r| r.fidelity_maxlik),
            nll_best: col(|r| r.nll_best),
        });
        start = end;
    }
    out
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// CSV with every run row followed by its cell's summary row.
pub fn format_csv(rows: &[SweepRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(COLUMNS)?;
    let summaries = summarize(rows);
    let mut i = 0;
    for s in &summaries {
        while i < rows.len() && (rows[i].p_dep, rows[i].n_s, rows[i].n_aux) == (s.p_dep, s.n_s, s.n_aux) {
            let r = &rows[i];
            w.write_record([
                "run".to_string(),
                r.p_dep.to_string(),
                r.n_s.to_string(),
                r.n_aux.to_string(),
                r.repeat.to_string(),
                r.seed.to_string(),
                opt(r.fidelity_ndo),
                opt(r.fidelity_maxlik),
                opt(r.nll_best),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                r.error.clone().unwrap_or_default(),
            ])?;
            i += 1;
        }
        let get = |x: Option<Stats>, f: fn(Stats) -> f64| opt(x.map(f));
        w.write_record([
            "summary".to_string(),
            s.p_dep.to_string(),
            s.n_s.to_string(),
            s.n_aux.to_string(),
            String::new(),
            String::new(),
            get(s.fidelity_ndo, |t| t.mean),
            get(s.fidelity_maxlik, |t| t.mean),
            get(s.nll_best, |t| t.mean),
            get(s.fidelity_ndo, |t| t.std),
            get(s.fidelity_maxlik, |t| t.std),
            get(s.nll_best, |t| t.std),
            get(s.fidelity_ndo, |t| t.median),
            get(s.fidelity_maxlik, |t| t.median),
            s.n_ok.to_string(),
            String::new(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| TomoError::Csv(e.into_error().into()))?;
    Ok(format!(
        "# {VERSION_TAG}\n# summary rows: mean in the value columns, sample std and median alongside\n{}",
        String::from_utf8(bytes).expect("csv output is utf-8")
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn epoch_budget() {
        assert_eq!(epochs_for_updates(9000, 10, 200_000), 223);
        assert_eq!(epochs_for_updates(90_000, 10, 200_000), 23);
        assert_eq!(epochs_for_updates(5, 10, 0), 1);
    }

    #[test]
    fn summary_statistics() {
        let s = stats(&[1.0, 2.0, 4.0]).unwrap();
        assert!((s.mean - 7.0 / 3.0).abs() < 1e-15);
        assert_eq!(s.median, 2.0);
        assert!((s.std - (7.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert_eq!(stats(&[3.0, 1.0]).unwrap().median, 2.0);
        assert!(stats(&[]).is_none());
    }
}
