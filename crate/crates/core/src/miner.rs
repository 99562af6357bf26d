//! The clique-based multipole mining pipeline and its exhaustive and random
//! reference searches.
//!
//! Mining runs in three stages: maximal cliques of the signed correlation
//! graph become candidate sets; each candidate is broken down into the
//! multipoles it contains; duplicates and non-maximal sets are removed.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::time::{Duration, Instant};

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::max_size_for_gain;
use crate::dataset::{CorrelationMatrix, TimeSeriesDataset};
use crate::error::{Error, Result};
use crate::graph::{self, CliqueOptions, DEFAULT_CLIQUE_BUDGET};
use crate::linalg::SymMatrix;
use crate::measures::{self, MultipoleRecord, SignedSet};
use crate::rng;

/// Thresholds and limits that fully determine a mining run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinerConfig {
    /// Minimum linear dependence σ.
    pub sigma: f64,
    /// Minimum linear gain δ.
    pub delta: f64,
    /// Correlation threshold of the candidate graph; 0 gives the plain
    /// negative / negative-equivalent clique search, 1 is exhaustive.
    pub rho: f64,
    /// Largest multipole size considered.
    pub max_size: usize,
    pub seed: u64,
    pub clique_budget: u64,
}

impl MinerConfig {
    /// Config with `rho = 0` and `max_size` derived from `delta`.
    pub fn new(sigma: f64, delta: f64) -> Result<Self> {
        let cfg = Self {
            sigma,
            delta,
            rho: 0.0,
            max_size: max_size_for_gain(delta)?.max(3),
            seed: 0,
            clique_budget: DEFAULT_CLIQUE_BUDGET,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_rho(mut self, rho: f64) -> Self {
        self.rho = rho;
        self
    }

    pub fn with_max_size(mut self, max_size: usize) -> Self {
        self.max_size = max_size;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_clique_budget(mut self, budget: u64) -> Self {
        self.clique_budget = budget;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |msg: &str| Err(Error::InvalidArgument(msg.into()));
        if !(0.0..=1.0).contains(&self.sigma) {
            return invalid("sigma must be in [0,1]");
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return invalid("delta must be in (0,1]");
        }
        if !(-1.0..=1.0).contains(&self.rho) {
            return invalid("rho must be in [-1,1]");
        }
        if self.max_size < 3 {
            return invalid("max_size must be at least 3");
        }
        Ok(())
    }

    fn accepts(&self, sigma: f64, gain: f64) -> bool {
        sigma >= self.sigma && gain >= self.delta
    }
}

impl Default for MinerConfig {
    fn default() -> Self {
        Self::new(0.5, 0.15).expect("default thresholds are valid")
    }
}

/// Mines a standardized dataset.
pub fn mine(d: &TimeSeriesDataset, cfg: &MinerConfig) -> Result<Vec<MultipoleRecord>> {
    mine_matrix(&d.correlation_matrix()?, cfg)
}

/// Maximal promising candidates of the signed graph at `cfg.rho`, one per
/// mirror pair, in canonical order. The `bool` is false when clique
/// enumeration hit its budget and the list is partial.
pub fn promising_candidates(
    a: &CorrelationMatrix,
    cfg: &MinerConfig,
) -> Result<(Vec<SignedSet>, bool)> {
    cfg.validate()?;
    let g = graph::build_graph(a, cfg.rho)?;
    let opts = CliqueOptions {
        budget: cfg.clique_budget,
        cancel: None,
    };
    let (cliques, complete) = match g.maximal_cliques(3, &opts) {
        Ok(c) => (c, true),
        Err(interrupted) => (interrupted.partial, false),
    };
    let signed = cliques
        .iter()
        .map(|c| graph::clique_to_signed_set(&g, c))
        .collect::<Result<BTreeSet<_>>>()?;
    Ok((signed.into_iter().collect(), complete))
}

pub fn mine_matrix(a: &CorrelationMatrix, cfg: &MinerConfig) -> Result<Vec<MultipoleRecord>> {
    let (candidates, complete) = promising_candidates(a, cfg)?;
    // Extraction only depends on the member set, and many signed candidates
    // can share one (every sign pattern at rho = 1).
    let member_sets: BTreeSet<Vec<usize>> =
        candidates.iter().map(|c| c.members().to_vec()).collect();
    let found = member_sets
        .par_iter()
        .map(|members| extract_members(a, members, cfg))
        .collect::<Result<Vec<_>>>()?;
    let records = remove_non_maximal(found.into_iter().flatten().collect());
    if complete {
        Ok(records)
    } else {
        Err(Error::PartialResult {
            budget: cfg.clique_budget,
            records,
        })
    }
}

/// Multipoles contained in one candidate set: the candidate itself when it
/// meets both thresholds; otherwise, if its dependence reaches σ, every
/// qualifying subset of size 3 to `max_size`; otherwise nothing.
pub fn extract_from_candidate(
    a: &CorrelationMatrix,
    candidate: &SignedSet,
    cfg: &MinerConfig,
) -> Result<Vec<MultipoleRecord>> {
    extract_members(a, candidate.members(), cfg)
}

const MAX_CANDIDATE: usize = 64;

fn extract_members(
    a: &CorrelationMatrix,
    members: &[usize],
    cfg: &MinerConfig,
) -> Result<Vec<MultipoleRecord>> {
    let k = members.len();
    if k < 3 {
        return Err(Error::InvalidSubset(
            "candidates need at least 3 members".into(),
        ));
    }
    if k > MAX_CANDIDATE {
        return Err(Error::InvalidSubset(format!(
            "candidate of {k} members exceeds the limit of {MAX_CANDIDATE}"
        )));
    }
    let mut memo = SubsetMemo::new(a.submatrix(members));
    let full: u64 = if k == 64 { u64::MAX } else { (1u64 << k) - 1 };
    let full_sigma = memo.sigma(full)?;
    if full_sigma < cfg.sigma {
        return Ok(Vec::new());
    }
    if k <= cfg.max_size && cfg.accepts(full_sigma, memo.gain(full)?) {
        return Ok(vec![MultipoleRecord::evaluate(a, members)?]);
    }

    let mut weak: HashSet<u64> = HashSet::new();
    let mut out = Vec::new();
    for size in (3..=k.min(cfg.max_size)).rev() {
        for mask in masks_of_size(k, size) {
            if mask == full {
                continue;
            }
            // a weak superset means this subset is weak too
            let has_weak_superset = (0..k)
                .filter(|b| mask & (1 << b) == 0)
                .any(|b| weak.contains(&(mask | (1 << b))));
            if has_weak_superset {
                weak.insert(mask);
                continue;
            }
            let sigma = memo.sigma(mask)?;
            if sigma < cfg.sigma {
                weak.insert(mask);
                continue;
            }
            if cfg.accepts(sigma, memo.gain(mask)?) {
                let subset: Vec<usize> = (0..k)
                    .filter(|b| mask & (1 << b) != 0)
                    .map(|b| members[b])
                    .collect();
                out.push(MultipoleRecord::evaluate(a, &subset)?);
            }
        }
    }
    Ok(out)
}

/// Per-candidate cache of subset dependences keyed by position bitmask.
struct SubsetMemo {
    sub: SymMatrix,
    sigma: HashMap<u64, f64>,
}

impl SubsetMemo {
    fn new(sub: SymMatrix) -> Self {
        Self {
            sub,
            sigma: HashMap::new(),
        }
    }

    fn positions(&self, mask: u64) -> Vec<usize> {
        (0..self.sub.dim())
            .filter(|b| mask & (1 << b) != 0)
            .collect()
    }

    fn sigma(&mut self, mask: u64) -> Result<f64> {
        if let Some(&s) = self.sigma.get(&mask) {
            return Ok(s);
        }
        let s = measures::dependence_of(&self.sub.principal(&self.positions(mask)))?;
        self.sigma.insert(mask, s);
        Ok(s)
    }

    fn gain(&mut self, mask: u64) -> Result<f64> {
        let sigma = self.sigma(mask)?;
        let mut best = f64::NEG_INFINITY;
        for b in self.positions(mask) {
            best = best.max(self.sigma(mask & !(1 << b))?);
        }
        Ok(measures::gain_from_dependences(sigma, &[best]))
    }
}

/// All `size`-bit masks below `1 << k`, ascending (Gosper's hack).
fn masks_of_size(k: usize, size: usize) -> impl Iterator<Item = u64> {
    let first = if size == 0 {
        0
    } else {
        u64::MAX >> (64 - size)
    };
    let limit = if k == 64 { None } else { Some(1u64 << k) };
    std::iter::successors(Some(first), move |&m| {
        if m == 0 {
            return None;
        }
        let c = m & m.wrapping_neg();
        let r = m.checked_add(c)?;
        let next = (((r ^ m) >> 2) / c) | r;
        Some(next)
    })
    .take_while(move |&m| limit.is_none_or(|l| m < l))
}

/// Keeps each distinct member set once and drops every set that is a strict
/// subset of another. Sets are visited largest first, then in canonical
/// member order; an unseen set is accepted and all of its subsets are
/// recorded as covered. Output is sorted by descending gain, descending
/// dependence, then members, with `maximal` set.
pub fn remove_non_maximal(mut records: Vec<MultipoleRecord>) -> Vec<MultipoleRecord> {
    const HASHED_LIMIT: usize = 16;
    records.sort_by(|a, b| {
        b.len()
            .cmp(&a.len())
            .then_with(|| a.members().cmp(b.members()))
    });
    let mut covered: HashSet<Vec<usize>> = HashSet::new();
    let mut large: Vec<Vec<usize>> = Vec::new();
    let mut out: Vec<MultipoleRecord> = Vec::new();
    for mut r in records {
        let members = r.members();
        let is_covered =
            covered.contains(members) || large.iter().any(|big| is_subset(members, big));
        if is_covered {
            continue;
        }
        if members.len() <= HASHED_LIMIT {
            let k = members.len();
            for mask in 1u64..(1 << k) {
                let subset: Vec<usize> = (0..k)
                    .filter(|b| mask & (1 << b) != 0)
                    .map(|b| members[b])
                    .collect();
                covered.insert(subset);
            }
        } else {
            large.push(members.to_vec());
        }
        r.maximal = true;
        out.push(r);
    }
    sort_records(&mut out);
    out
}

/// Descending gain, descending dependence, then canonical member order.
pub fn sort_records(records: &mut [MultipoleRecord]) {
    records.sort_by(|a, b| {
        b.gain
            .total_cmp(&a.gain)
            .then_with(|| b.sigma.total_cmp(&a.sigma))
            .then_with(|| a.members().cmp(b.members()))
    });
}

fn is_subset(small: &[usize], big: &[usize]) -> bool {
    small.iter().all(|x| big.binary_search(x).is_ok())
}

pub(crate) fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Number of subsets of sizes 3 through `max_size` among `n` variables.
pub fn subset_count(n: usize, max_size: usize) -> u128 {
    (3..=max_size.min(n)).map(|s| binomial(n, s)).sum()
}

fn next_combination(c: &mut [usize], n: usize) -> bool {
    let k = c.len();
    for i in (0..k).rev() {
        if c[i] < n - k + i {
            c[i] += 1;
            for j in (i + 1)..k {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

fn evaluate_if_multipole(
    a: &CorrelationMatrix,
    members: &[usize],
    cfg: &MinerConfig,
) -> Result<Option<MultipoleRecord>> {
    let sub = a.submatrix(members);
    let sigma = measures::dependence_of(&sub)?;
    if sigma < cfg.sigma {
        return Ok(None);
    }
    if !cfg.accepts(sigma, measures::gain_of(&sub)?) {
        return Ok(None);
    }
    MultipoleRecord::evaluate(a, members).map(Some)
}

/// Exhaustive search over every subset of sizes 3 through `max_size`.
/// Fails without doing any work when that count exceeds `subset_budget`.
pub fn brute_force(
    a: &CorrelationMatrix,
    cfg: &MinerConfig,
    subset_budget: u64,
) -> Result<Vec<MultipoleRecord>> {
    cfg.validate()?;
    let n = a.dim();
    if subset_count(n, cfg.max_size) > u128::from(subset_budget) {
        return Err(Error::BudgetExceeded {
            what: "brute-force subsets",
            budget: subset_budget,
        });
    }
    let mut found = Vec::new();
    for size in 3..=cfg.max_size.min(n) {
        // Split on the first member so work spreads across threads while
        // each task walks its combinations in order.
        let chunks = (0..=n - size)
            .into_par_iter()
            .map(|first| -> Result<Vec<MultipoleRecord>> {
                let mut out = Vec::new();
                let mut rest: Vec<usize> = ((first + 1)..(first + size)).collect();
                loop {
                    let mut members = Vec::with_capacity(size);
                    members.push(first);
                    members.extend_from_slice(&rest);
                    if let Some(r) = evaluate_if_multipole(a, &members, cfg)? {
                        out.push(r);
                    }
                    if rest.is_empty() || !next_in_tail(&mut rest, first + 1, n) {
                        break;
                    }
                }
                Ok(out)
            })
            .collect::<Result<Vec<_>>>()?;
        found.extend(chunks.into_iter().flatten());
    }
    Ok(remove_non_maximal(found))
}

/// Advances a combination drawn from `start..n`.
fn next_in_tail(c: &mut [usize], start: usize, n: usize) -> bool {
    c.iter_mut().for_each(|x| *x -= start);
    let more = next_combination(c, n - start);
    c.iter_mut().for_each(|x| *x += start);
    more
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RandomBudget {
    Trials(u64),
    /// Runs batches of trials until the wall-clock limit passes. Output
    /// depends on machine speed.
    Duration(Duration),
}

const RANDOM_BATCH: u64 = 4096;

/// Evaluates uniformly random subsets (size uniform in `3..=max_size`) and
/// keeps the distinct ones meeting both thresholds. Trial `i` draws from
/// stream `(cfg.seed, i)`.
pub fn random_search(
    a: &CorrelationMatrix,
    cfg: &MinerConfig,
    budget: RandomBudget,
) -> Result<Vec<MultipoleRecord>> {
    cfg.validate()?;
    let n = a.dim();
    let top = cfg.max_size.min(n);
    if top < 3 {
        return Ok(Vec::new());
    }
    let trial = |i: u64| -> Result<Option<MultipoleRecord>> {
        let mut rng = rng::stream(cfg.seed, i);
        let size = rng.random_range(3..=top);
        let mut members = index::sample(&mut rng, n, size).into_vec();
        members.sort_unstable();
        evaluate_if_multipole(a, &members, cfg)
    };
    let mut found: BTreeMap<Vec<usize>, MultipoleRecord> = BTreeMap::new();
    let mut collect = |range: std::ops::Range<u64>| -> Result<()> {
        let batch = range
            .into_par_iter()
            .map(trial)
            .collect::<Result<Vec<_>>>()?;
        for r in batch.into_iter().flatten() {
            found.entry(r.members().to_vec()).or_insert(r);
        }
        Ok(())
    };
    match budget {
        RandomBudget::Trials(t) => collect(0..t)?,
        RandomBudget::Duration(limit) => {
            let start = Instant::now();
            let mut next = 0;
            while start.elapsed() < limit {
                collect(next..next + RANDOM_BATCH)?;
                next += RANDOM_BATCH;
            }
        }
    }
    let mut out: Vec<MultipoleRecord> = found.into_values().collect();
    sort_records(&mut out);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(members: &[usize], gain: f64) -> MultipoleRecord {
        MultipoleRecord {
            signed: SignedSet::unsigned(members.to_vec()).unwrap(),
            sigma: 0.9,
            gain,
            weights: vec![0.0; members.len()],
            maximal: false,
            degenerate: false,
        }
    }

    fn member_sets(records: &[MultipoleRecord]) -> Vec<Vec<usize>> {
        let mut v: Vec<Vec<usize>> = records.iter().map(|r| r.members().to_vec()).collect();
        v.sort();
        v
    }

    #[test]
    fn config_validation() {
        assert!(MinerConfig::new(0.5, 0.0).is_err());
        let err = MinerConfig::new(0.5, 0.0).unwrap_err().to_string();
        assert!(err.contains("delta must be in (0,1]"), "{err}");
        assert!(MinerConfig::new(1.5, 0.1).is_err());
        assert!(MinerConfig::default().with_rho(2.0).validate().is_err());
        assert!(MinerConfig::default().with_max_size(2).validate().is_err());
        let cfg = MinerConfig::default();
        assert_eq!((cfg.max_size, cfg.rho), (7, 0.0));
        // a gain threshold above 1/2 still allows triples
        assert_eq!(MinerConfig::new(0.5, 1.0).unwrap().max_size, 3);
    }

    #[test]
    fn masks_enumerate_combinations() {
        let masks: Vec<u64> = masks_of_size(4, 2).collect();
        assert_eq!(masks, vec![0b0011, 0b0101, 0b0110, 0b1001, 0b1010, 0b1100]);
        assert_eq!(masks_of_size(10, 3).count(), 120);
        assert_eq!(masks_of_size(64, 63).count(), 64);
    }

    #[test]
    fn remove_non_maximal_cases() {
        let out = remove_non_maximal(vec![record(&[1, 2, 3], 0.3), record(&[1, 2, 3, 4], 0.2)]);
        assert_eq!(member_sets(&out), vec![vec![1, 2, 3, 4]]);
        assert!(out[0].maximal);

        let out = remove_non_maximal(vec![record(&[1, 2, 3], 0.3), record(&[1, 2, 3], 0.3)]);
        assert_eq!(out.len(), 1);

        let out = remove_non_maximal(vec![record(&[1, 2, 3], 0.3), record(&[2, 3, 4], 0.4)]);
        assert_eq!(member_sets(&out), vec![vec![1, 2, 3], vec![2, 3, 4]]);
        // gain-descending output
        assert_eq!(out[0].members(), &[2, 3, 4]);
    }

    #[test]
    fn remove_non_maximal_large_sets() {
        let big: Vec<usize> = (0..20).collect();
        let out = remove_non_maximal(vec![
            record(&big, 0.1),
            record(&[3, 7, 19], 0.2),
            record(&[3, 7, 25], 0.2),
        ]);
        assert_eq!(member_sets(&out), vec![big.clone(), vec![3, 7, 25]]);
    }

    #[test]
    fn counting() {
        assert_eq!(binomial(10, 3), 120);
        assert_eq!(binomial(3, 5), 0);
        assert_eq!(subset_count(5, 7), 10 + 5 + 1);
        let mut c = vec![0, 1, 2];
        let mut count = 1;
        while next_combination(&mut c, 5) {
            count += 1;
        }
        assert_eq!(count, 10);
    }

    #[test]
    fn extraction_branches() {
        let cfg = MinerConfig::new(0.5, 0.15).unwrap();
        // sigma 1, gain 0.5: the candidate itself
        let e = CorrelationMatrix::equicorrelated(3, -0.5).unwrap();
        let cand = SignedSet::unsigned(vec![0, 1, 2]).unwrap();
        let out = extract_from_candidate(&e, &cand, &cfg).unwrap();
        assert_eq!(member_sets(&out), vec![vec![0, 1, 2]]);

        // sigma below threshold: nothing
        let weak = CorrelationMatrix::equicorrelated(3, -0.1).unwrap();
        assert!(extract_from_candidate(&weak, &cand, &cfg)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn brute_force_on_orthogonal_variables_is_empty() {
        let cfg = MinerConfig::default();
        let a = CorrelationMatrix::identity(5);
        assert!(brute_force(&a, &cfg, 1_000).unwrap().is_empty());
        assert!(matches!(
            brute_force(&a, &cfg, 3),
            Err(Error::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn random_search_zero_trials() {
        let a = CorrelationMatrix::equicorrelated(4, -0.3).unwrap();
        let out = random_search(&a, &MinerConfig::default(), RandomBudget::Trials(0)).unwrap();
        assert!(out.is_empty());
    }
}
