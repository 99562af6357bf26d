//! Random correlation matrices, synthetic datasets with planted multipoles,
//! and empirical significance tests.

use std::io::Write;

use rand::seq::{index, SliceRandom};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{correlation_of_standardized, CorrelationMatrix, TimeSeriesDataset};
use crate::error::{Error, Result};
use crate::linalg::{self, SymMatrix};
use crate::measures;
use crate::rng;

/// Eigenvalue tolerance for accepting a uniform draw as PSD.
pub const PSD_TOL: f64 = 1e-10;
/// Smallest p-value resolution (`1 / (samples + 1)`) accepted by the tests.
pub const MIN_NULL_RESOLUTION: usize = 1000;
pub const MIN_REPEATS: usize = 100;
pub const DEFAULT_ALPHA: f64 = 0.01;

/// Unit-diagonal matrix whose upper-triangle entries are drawn i.i.d.
/// uniform on `[-1, 1]` in row-major order.
pub fn draw_uniform_candidate<R: Rng>(k: usize, rng: &mut R) -> SymMatrix {
    let mut m = SymMatrix::identity(k);
    for i in 0..k {
        for j in (i + 1)..k {
            let r: f64 = rng.random_range(-1.0..=1.0);
            m.set(i, j, r);
            m.set(j, i, r);
        }
    }
    m
}

/// Rejection rule of the sampler.
pub fn accept_candidate(m: &SymMatrix) -> bool {
    linalg::is_psd(m, PSD_TOL)
}

/// Draws uniform candidates from `rng` until one is PSD.
pub fn sample_one<R: Rng>(k: usize, rng: &mut R) -> CorrelationMatrix {
    loop {
        let m = draw_uniform_candidate(k, rng);
        if accept_candidate(&m) {
            if let Ok(c) = CorrelationMatrix::new(m) {
                return c;
            }
        }
    }
}

/// `count` accepted random correlation matrices of size `k`. Matrix `i` is
/// drawn from stream `(seed, i)`, so output is independent of threading.
pub fn sample_correlation_matrices(
    k: usize,
    count: usize,
    seed: u64,
) -> Result<Vec<CorrelationMatrix>> {
    if !(2..=8).contains(&k) {
        return Err(Error::InvalidArgument("k must be between 2 and 8".into()));
    }
    Ok((0..count as u64)
        .into_par_iter()
        .map(|i| sample_one(k, &mut rng::stream(seed, i)))
        .collect())
}

/// Linear gain against self-canceling maximum correlation for one matrix.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScatterSample {
    pub k: usize,
    pub gain: f64,
    pub rho_s: f64,
}

pub fn scatter_sample(a: &CorrelationMatrix) -> Result<ScatterSample> {
    let all: Vec<usize> = (0..a.dim()).collect();
    Ok(ScatterSample {
        k: a.dim(),
        gain: measures::linear_gain(a, &all)?,
        rho_s: measures::self_canceling_form(a, &all)?.rho_s,
    })
}

pub fn scatter_of(matrices: &[CorrelationMatrix]) -> Result<Vec<ScatterSample>> {
    matrices.par_iter().map(scatter_sample).collect()
}

pub fn scatter(k: usize, count: usize, seed: u64) -> Result<Vec<ScatterSample>> {
    if k < 3 {
        return Err(Error::InvalidArgument("scatter needs k >= 3".into()));
    }
    scatter_of(&sample_correlation_matrices(k, count, seed)?)
}

pub fn write_scatter_csv<W: Write>(samples: &[ScatterSample], mut w: W) -> std::io::Result<()> {
    writeln!(w, "k,gain,rho_s")?;
    for s in samples {
        writeln!(w, "{},{},{}", s.k, s.gain, s.rho_s)?;
    }
    Ok(())
}

/// Acceptance rule for planted matrices.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlantCriteria {
    pub min_sigma: f64,
    pub min_gain: f64,
    /// When set, off-diagonals are drawn uniform on `[-1, max_rho]` and then
    /// conjugated by a random sign pattern, so every planted set is a
    /// pseudo negative-equivalent clique at this threshold.
    pub max_rho: Option<f64>,
}

fn draw_plant_candidate<R: Rng>(k: usize, max_rho: Option<f64>, rng: &mut R) -> SymMatrix {
    let Some(hi) = max_rho else {
        return draw_uniform_candidate(k, rng);
    };
    let signs: Vec<f64> = (0..k)
        .map(|i| {
            if i > 0 && rng.random_bool(0.5) {
                -1.0
            } else {
                1.0
            }
        })
        .collect();
    let mut m = SymMatrix::identity(k);
    for i in 0..k {
        for j in (i + 1)..k {
            let r: f64 = rng.random_range(-1.0..=hi) * signs[i] * signs[j];
            m.set(i, j, r);
            m.set(j, i, r);
        }
    }
    m
}

fn meets_criteria(m: &SymMatrix, criteria: &PlantCriteria) -> bool {
    let Ok(c) = CorrelationMatrix::new(m.clone()) else {
        return false;
    };
    let Ok(lambda) = linalg::min_eigenvalue(m) else {
        return false;
    };
    if lambda <= 1e-6 || 1.0 - lambda < criteria.min_sigma {
        return false;
    }
    let all: Vec<usize> = (0..m.dim()).collect();
    if !measures::linear_gain(&c, &all).is_ok_and(|g| g >= criteria.min_gain) {
        return false;
    }
    criteria.max_rho.is_none_or(|rho| {
        measures::negative_equivalent_witness(&c, &all, rho).is_ok_and(|w| w.is_some())
    })
}

/// Random correlation matrices to plant as multipoles. Sizes cycle through
/// `sizes`; matrix `i` is rejection-sampled from stream `(seed, i)` until it
/// is strictly positive definite and meets `criteria`.
pub fn plant_matrices(
    count: usize,
    sizes: &[usize],
    criteria: &PlantCriteria,
    seed: u64,
) -> Result<Vec<CorrelationMatrix>> {
    if sizes.is_empty() || sizes.iter().any(|&k| !(3..=8).contains(&k)) {
        return Err(Error::InvalidArgument(
            "planted sizes must be between 3 and 8".into(),
        ));
    }
    if sizes
        .iter()
        .any(|&k| criteria.min_gain > 1.0 / (k as f64 - 1.0))
    {
        return Err(Error::InvalidArgument(
            "min_gain exceeds the largest gain reachable at some planted size".into(),
        ));
    }
    if criteria.max_rho.is_some_and(|r| !(-1.0..=1.0).contains(&r)) {
        return Err(Error::InvalidArgument("max_rho must be in [-1,1]".into()));
    }
    Ok((0..count)
        .into_par_iter()
        .map(|i| {
            let k = sizes[i % sizes.len()];
            let mut rng = rng::stream(seed, i as u64);
            loop {
                let m = draw_plant_candidate(k, criteria.max_rho, &mut rng);
                if meets_criteria(&m, criteria) {
                    return CorrelationMatrix::new(m).expect("validated");
                }
            }
        })
        .collect())
}

fn generate_block<R: Rng>(l: &linalg::Cholesky, t: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let k = l.dim();
    let mut cols = vec![Vec::with_capacity(t); k];
    let mut z = vec![0.0; k];
    for _ in 0..t {
        z.iter_mut().for_each(|x| *x = rng.sample(StandardNormal));
        for (col, x) in cols.iter_mut().zip(l.apply(&z)) {
            col.push(x);
        }
    }
    cols
}

fn factor_planted(planted: &[CorrelationMatrix], t: usize) -> Result<Vec<linalg::Cholesky>> {
    let max_k = planted
        .iter()
        .map(CorrelationMatrix::dim)
        .max()
        .unwrap_or(1);
    if t < 50 * max_k {
        return Err(Error::InvalidArgument(format!(
            "T = {t} is below 50 times the largest planted size ({max_k})"
        )));
    }
    planted
        .iter()
        .map(|sigma| {
            if linalg::min_eigenvalue(sigma.matrix())? <= 1e-6 {
                return Err(Error::InvalidArgument(
                    "planted matrices must be strictly positive definite".into(),
                ));
            }
            linalg::cholesky(sigma.matrix())
        })
        .collect()
}

/// Appends noise columns to the planted blocks, shuffles, and names columns.
fn assemble(
    blocks: Vec<Vec<Vec<f64>>>,
    noise_count: usize,
    t: usize,
    seed: u64,
) -> Result<(TimeSeriesDataset, Vec<Vec<usize>>)> {
    let first_noise_stream = blocks.len();
    let noise: Vec<Vec<f64>> = (0..noise_count)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng::stream(seed, (first_noise_stream + i) as u64);
            (0..t).map(|_| rng.sample(StandardNormal)).collect()
        })
        .collect();

    let block_count = blocks.len();
    let mut columns: Vec<Vec<f64>> = Vec::new();
    let mut origin: Vec<Option<usize>> = Vec::new();
    for (b, cols) in blocks.into_iter().enumerate() {
        origin.extend(std::iter::repeat_n(Some(b), cols.len()));
        columns.extend(cols);
    }
    origin.extend(std::iter::repeat_n(None, noise.len()));
    columns.extend(noise);

    let mut perm: Vec<usize> = (0..columns.len()).collect();
    perm.shuffle(&mut rng::stream(rng::derive(seed, 0x5348_5546), 0));
    let mut slots: Vec<Option<Vec<f64>>> = columns.into_iter().map(Some).collect();
    let shuffled: Vec<Vec<f64>> = perm
        .iter()
        .map(|&p| slots[p].take().expect("unique"))
        .collect();
    let mut truth = vec![Vec::new(); block_count];
    for (new_index, &p) in perm.iter().enumerate() {
        if let Some(b) = origin[p] {
            truth[b].push(new_index);
        }
    }
    let width = shuffled.len().to_string().len();
    let names = (0..shuffled.len())
        .map(|i| format!("x{i:0width$}"))
        .collect();
    Ok((TimeSeriesDataset::from_columns(names, shuffled)?, truth))
}

/// Synthetic dataset with planted correlation structure. Each planted Σ of
/// size k contributes k columns `L·z` with `Σ = L·Lᵀ` and `z` standard
/// normal per timestamp; `noise_count` independent standard normal columns
/// follow. Columns are then shuffled. Returns the (unstandardized) dataset
/// and the shuffled column indices of every planted block, each sorted.
pub fn synth_dataset(
    planted: &[CorrelationMatrix],
    noise_count: usize,
    t: usize,
    seed: u64,
) -> Result<(TimeSeriesDataset, Vec<Vec<usize>>)> {
    let factors = factor_planted(planted, t)?;
    let blocks = factors
        .par_iter()
        .enumerate()
        .map(|(b, l)| generate_block(l, t, &mut rng::stream(seed, b as u64)))
        .collect();
    assemble(blocks, noise_count, t, seed)
}

/// Planted-multipole benchmark dataset.
#[derive(Clone, Debug)]
pub struct Benchmark {
    pub dataset: TimeSeriesDataset,
    /// Column indices of each planted multipole, sorted.
    pub truth: Vec<Vec<usize>>,
    pub planted: Vec<CorrelationMatrix>,
}

const BLOCK_ATTEMPTS: u64 = 1000;

/// Like [`synth_dataset`] with matrices from [`plant_matrices`], but every
/// planted block is redrawn until its sample correlation matrix itself
/// meets `criteria`, so each ground-truth set is a multipole of the
/// generated data. `total_width` is the final number of columns.
pub fn planted_benchmark(
    count: usize,
    sizes: &[usize],
    criteria: &PlantCriteria,
    total_width: usize,
    t: usize,
    seed: u64,
) -> Result<Benchmark> {
    let planted = plant_matrices(count, sizes, criteria, rng::derive(seed, 1))?;
    let planted_width: usize = planted.iter().map(CorrelationMatrix::dim).sum();
    let noise_count = total_width.checked_sub(planted_width).ok_or_else(|| {
        Error::InvalidArgument(format!(
            "total width {total_width} is smaller than the {planted_width} planted series"
        ))
    })?;
    let factors = factor_planted(&planted, t)?;
    let blocks = factors
        .par_iter()
        .enumerate()
        .map(|(b, l)| {
            for attempt in 0..BLOCK_ATTEMPTS {
                let mut rng = rng::stream(rng::derive(seed, 2 + attempt), b as u64);
                let cols = generate_block(l, t, &mut rng);
                let names = (0..cols.len()).map(|i| i.to_string()).collect();
                let sample = TimeSeriesDataset::from_columns(names, cols.clone())?
                    .standardize(false)?
                    .correlation_matrix()?;
                if meets_criteria(sample.matrix(), criteria) {
                    return Ok(cols);
                }
            }
            Err(Error::InvalidArgument(format!(
                "planted block {b} missed the criteria in {BLOCK_ATTEMPTS} draws"
            )))
        })
        .collect::<Result<Vec<_>>>()?;
    let (dataset, truth) = assemble(blocks, noise_count, t, seed)?;
    Ok(Benchmark {
        dataset,
        truth,
        planted,
    })
}

fn check_pool(pool: &[TimeSeriesDataset], len: usize) -> Result<()> {
    if pool.is_empty() {
        return Err(Error::InvalidArgument("significance pool is empty".into()));
    }
    for d in pool {
        if !d.is_standardized() {
            return Err(Error::NotStandardized);
        }
        if d.len() != len {
            return Err(Error::InvalidArgument(format!(
                "pool datasets must all have {len} timestamps, found {}",
                d.len()
            )));
        }
    }
    Ok(())
}

/// `(1 + #{values >= observed}) / (n + 1)` over ascending `sorted`.
pub fn upper_tail_p(sorted: &[f64], observed: f64) -> f64 {
    let below = sorted.partition_point(|&x| x < observed);
    (1 + sorted.len() - below) as f64 / (sorted.len() + 1) as f64
}

/// Linear dependence of random k-sets drawn from independent datasets.
#[derive(Clone, Debug, PartialEq)]
pub struct NullDistribution {
    pub set_size: usize,
    pub sorted_sigmas: Vec<f64>,
}

impl NullDistribution {
    /// Sample `j` (stream `(seed, j)`) picks `k` distinct pool datasets and
    /// one uniformly random variable from each.
    pub fn build(k: usize, pool: &[TimeSeriesDataset], samples: usize, seed: u64) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidArgument("set size must be at least 2".into()));
        }
        if pool.len() < k {
            return Err(Error::InvalidArgument(format!(
                "pool of {} datasets is smaller than the set size {k}",
                pool.len()
            )));
        }
        if samples + 1 < MIN_NULL_RESOLUTION {
            return Err(Error::InvalidArgument(format!(
                "need at least {} null samples",
                MIN_NULL_RESOLUTION - 1
            )));
        }
        check_pool(pool, pool[0].len())?;
        let mut sorted_sigmas = (0..samples as u64)
            .into_par_iter()
            .map(|j| {
                let mut rng = rng::stream(seed, j);
                let windows = index::sample(&mut rng, pool.len(), k).into_vec();
                let cols: Vec<&[f64]> = windows
                    .iter()
                    .map(|&w| pool[w].column(rng.random_range(0..pool[w].width())))
                    .collect();
                measures::dependence_of(&correlation_of_standardized(&cols))
            })
            .collect::<Result<Vec<f64>>>()?;
        sorted_sigmas.sort_by(f64::total_cmp);
        Ok(Self {
            set_size: k,
            sorted_sigmas,
        })
    }

    pub fn sample_count(&self) -> usize {
        self.sorted_sigmas.len()
    }

    /// Add-one corrected upper-tail p-value of an observed dependence.
    pub fn p_value(&self, sigma: f64) -> f64 {
        upper_tail_p(&self.sorted_sigmas, sigma)
    }
}

pub fn significance_sigma(
    sigma: f64,
    k: usize,
    pool: &[TimeSeriesDataset],
    samples: usize,
    seed: u64,
) -> Result<f64> {
    Ok(NullDistribution::build(k, pool, samples, seed)?.p_value(sigma))
}

fn set_sigma(cols: &[&[f64]]) -> Result<f64> {
    measures::dependence_of(&correlation_of_standardized(cols))
}

/// Tests whether member `position` of `members` contributes to the set's
/// dependence: each repeat replaces it with a random pool series and the
/// p-value is the add-one corrected fraction of replaced sets whose
/// dependence reaches the original.
pub fn member_contribution(
    d: &TimeSeriesDataset,
    members: &[usize],
    position: usize,
    pool: &[TimeSeriesDataset],
    repeats: usize,
    seed: u64,
) -> Result<f64> {
    if !d.is_standardized() {
        return Err(Error::NotStandardized);
    }
    if repeats < MIN_REPEATS {
        return Err(Error::InvalidArgument(format!(
            "need at least {MIN_REPEATS} repeats"
        )));
    }
    if members.len() < 2 || position >= members.len() || members.iter().any(|&m| m >= d.width()) {
        return Err(Error::InvalidSubset(
            "invalid member set or position".into(),
        ));
    }
    check_pool(pool, d.len())?;
    let cols: Vec<&[f64]> = members.iter().map(|&m| d.column(m)).collect();
    let original = set_sigma(&cols)?;
    let at_least = (0..repeats as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng::stream(seed, r);
            let w = rng.random_range(0..pool.len());
            let v = rng.random_range(0..pool[w].width());
            let mut replaced = cols.clone();
            replaced[position] = pool[w].column(v);
            set_sigma(&replaced).map(|s| usize::from(s >= original))
        })
        .collect::<Result<Vec<usize>>>()?
        .into_iter()
        .sum::<usize>();
    Ok((1 + at_least) as f64 / (repeats + 1) as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignificanceSettings {
    pub alpha: f64,
    pub null_samples: usize,
    pub repeats: usize,
}

impl Default for SignificanceSettings {
    fn default() -> Self {
        Self {
            alpha: DEFAULT_ALPHA,
            null_samples: 10_000,
            repeats: 1000,
        }
    }
}

/// Significance of one multipole in one dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSignificance {
    pub sigma: f64,
    pub p_sigma: f64,
    pub member_pvalues: Vec<f64>,
    pub reproducible: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignificanceReport {
    /// Member names.
    pub multipole: Vec<String>,
    /// Per-dataset results, in input order.
    pub datasets: Vec<DatasetSignificance>,
    pub reproducible_count: usize,
}

/// Evaluates a multipole (given by member names) in every dataset: it is
/// reproducible in a dataset when both its dependence and every member's
/// contribution are significant at `settings.alpha`.
pub fn reproducibility(
    multipole: &[String],
    datasets: &[TimeSeriesDataset],
    pool: &[TimeSeriesDataset],
    settings: &SignificanceSettings,
    seed: u64,
) -> Result<SignificanceReport> {
    let k = multipole.len();
    let null = NullDistribution::build(k, pool, settings.null_samples, rng::derive(seed, 0))?;
    let mut results = Vec::with_capacity(datasets.len());
    for (di, d) in datasets.iter().enumerate() {
        let members = multipole
            .iter()
            .map(|name| {
                d.index_of(name).ok_or_else(|| {
                    Error::InvalidArgument(format!("member {name:?} missing from dataset {di}"))
                })
            })
            .collect::<Result<Vec<usize>>>()?;
        if !d.is_standardized() {
            return Err(Error::NotStandardized);
        }
        let cols: Vec<&[f64]> = members.iter().map(|&m| d.column(m)).collect();
        let sigma = set_sigma(&cols)?;
        let p_sigma = null.p_value(sigma);
        let member_pvalues = (0..k)
            .map(|pos| {
                let s = rng::derive(seed, 1 + (di * k + pos) as u64);
                member_contribution(d, &members, pos, pool, settings.repeats, s)
            })
            .collect::<Result<Vec<f64>>>()?;
        let reproducible =
            p_sigma <= settings.alpha && member_pvalues.iter().all(|&p| p <= settings.alpha);
        results.push(DatasetSignificance {
            sigma,
            p_sigma,
            member_pvalues,
            reproducible,
        });
    }
    Ok(SignificanceReport {
        multipole: multipole.to_vec(),
        reproducible_count: results.iter().filter(|r| r.reproducible).count(),
        datasets: results,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn noise_pool(count: usize, width: usize, t: usize, seed: u64) -> Vec<TimeSeriesDataset> {
        (0..count)
            .map(|w| {
                let (d, _) = synth_dataset(&[], width, t, rng::derive(seed, w as u64)).unwrap();
                d.standardize(false).unwrap()
            })
            .collect()
    }

    #[test]
    fn two_by_two_draws_are_always_accepted() {
        let mut r = rng::stream(1, 0);
        for _ in 0..1000 {
            assert!(accept_candidate(&draw_uniform_candidate(2, &mut r)));
        }
        assert!(!accept_candidate(&SymMatrix::equicorrelated(3, -0.9)));
        assert_eq!(sample_correlation_matrices(2, 10, 0).unwrap().len(), 10);
    }

    #[test]
    fn sampler_is_deterministic() {
        let a = sample_correlation_matrices(4, 100, 9).unwrap();
        let b = sample_correlation_matrices(4, 100, 9).unwrap();
        assert_eq!(a, b);
        assert!(a
            .iter()
            .all(|m| linalg::min_eigenvalue(m.matrix()).unwrap() >= -PSD_TOL));
        assert!(sample_correlation_matrices(9, 1, 0).is_err());
    }

    #[test]
    fn p_value_rank_arithmetic() {
        let null: Vec<f64> = (0..999).map(|i| i as f64 / 1000.0).collect();
        assert_eq!(upper_tail_p(&null, 2.0), 1.0 / 1000.0);
        assert_eq!(upper_tail_p(&null, 0.0), 1.0);
        let weaker = vec![0.1; 100];
        assert_eq!(upper_tail_p(&weaker, 0.5), 1.0 / 101.0);
    }

    #[test]
    fn identity_plant_is_uncorrelated() {
        let (d, truth) = synth_dataset(&[CorrelationMatrix::identity(3)], 0, 10_000, 5).unwrap();
        assert_eq!(truth, vec![vec![0, 1, 2]]);
        let c = d.standardize(false).unwrap().correlation_matrix().unwrap();
        for i in 0..3 {
            for j in (i + 1)..3 {
                assert!(c.get(i, j).abs() < 0.05);
            }
        }
    }

    #[test]
    fn planted_block_correlations() {
        let sigma = CorrelationMatrix::equicorrelated(3, -0.45).unwrap();
        let (d, truth) = synth_dataset(&[sigma], 4, 10_000, 11).unwrap();
        assert_eq!(d.width(), 7);
        let c = d.standardize(false).unwrap().correlation_matrix().unwrap();
        let t = &truth[0];
        for i in 0..3 {
            for j in (i + 1)..3 {
                assert!((c.get(t[i], t[j]) + 0.45).abs() < 0.05);
            }
        }
    }

    #[test]
    fn synth_rejects_singular_and_short() {
        let singular = CorrelationMatrix::equicorrelated(3, -0.5).unwrap();
        assert!(synth_dataset(&[singular], 0, 1000, 0).is_err());
        assert!(synth_dataset(&[CorrelationMatrix::identity(3)], 0, 100, 0).is_err());
    }

    #[test]
    fn plant_matrices_meet_thresholds() {
        let criteria = PlantCriteria {
            min_sigma: 0.7,
            min_gain: 0.1,
            max_rho: None,
        };
        let planted = plant_matrices(6, &[3, 4], &criteria, 2).unwrap();
        assert_eq!(
            planted.iter().map(|m| m.dim()).collect::<Vec<_>>(),
            vec![3, 4, 3, 4, 3, 4]
        );
        for m in &planted {
            let all: Vec<usize> = (0..m.dim()).collect();
            assert!(measures::linear_dependence(m, &all).unwrap() >= 0.7);
            assert!(measures::linear_gain(m, &all).unwrap() >= 0.1);
        }
        let greedy = PlantCriteria {
            min_gain: 0.3,
            ..criteria
        };
        assert!(plant_matrices(1, &[5], &greedy, 0).is_err());
    }

    #[test]
    fn planted_region_yields_witnesses() {
        let criteria = PlantCriteria {
            min_sigma: 0.7,
            min_gain: 0.1,
            max_rho: Some(-0.1),
        };
        for m in plant_matrices(4, &[3, 4], &criteria, 8).unwrap() {
            let all: Vec<usize> = (0..m.dim()).collect();
            assert!(measures::negative_equivalent_witness(&m, &all, -0.1)
                .unwrap()
                .is_some());
        }
    }

    #[test]
    fn benchmark_blocks_meet_criteria_in_sample() {
        let criteria = PlantCriteria {
            min_sigma: 0.7,
            min_gain: 0.1,
            max_rho: Some(-0.1),
        };
        let b = planted_benchmark(3, &[3, 4], &criteria, 30, 500, 4).unwrap();
        assert_eq!(b.dataset.width(), 30);
        let c = b
            .dataset
            .standardize(false)
            .unwrap()
            .correlation_matrix()
            .unwrap();
        for set in &b.truth {
            assert!(measures::linear_dependence(&c, set).unwrap() >= 0.7);
            assert!(measures::linear_gain(&c, set).unwrap() >= 0.1);
            assert!(measures::negative_equivalent_witness(&c, set, -0.1)
                .unwrap()
                .is_some());
        }
        assert!(planted_benchmark(3, &[3], &criteria, 5, 500, 4).is_err());
    }

    #[test]
    fn null_distribution_requirements() {
        let pool = noise_pool(3, 4, 200, 1);
        assert!(NullDistribution::build(4, &pool, 999, 0).is_err());
        assert!(NullDistribution::build(3, &pool, 500, 0).is_err());
        let null = NullDistribution::build(3, &pool, 999, 0).unwrap();
        assert_eq!(null.sample_count(), 999);
        assert!(null.sorted_sigmas.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(null.p_value(0.0), 1.0);
        assert_eq!(null.p_value(1.5), 1.0 / 1000.0);
    }

    #[test]
    fn member_contribution_requirements() {
        let pool = noise_pool(2, 3, 200, 2);
        let d = &pool[0];
        assert!(member_contribution(d, &[0, 1, 2], 0, &pool, 50, 0).is_err());
        assert!(member_contribution(d, &[0, 1, 2], 3, &pool, 100, 0).is_err());
        let p = member_contribution(d, &[0, 1, 2], 1, &pool, 100, 0).unwrap();
        assert!(p > 0.0 && p <= 1.0);
    }

    #[test]
    fn missing_member_is_an_error() {
        let pool = noise_pool(3, 3, 200, 3);
        let names = vec!["x0".to_owned(), "nope".to_owned(), "x1".to_owned()];
        let settings = SignificanceSettings {
            alpha: 0.01,
            null_samples: 999,
            repeats: 100,
        };
        assert!(reproducibility(&names, &pool[..1], &pool, &settings, 0).is_err());
    }
}
