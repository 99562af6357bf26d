//! Linear dependence, linear gain and the signed-set predicates used to
//! characterize promising candidates.
//!
//! For a set `S` of standardized variables with correlation submatrix `A_S`,
//! the least variant normalized linear combination (LVNLC) is the unit-norm
//! weight vector minimizing the variance of the combination; its variance is
//! `λ_min(A_S)` and its weights are the matching eigenvector. Linear
//! dependence is `1 - λ_min` and linear gain is the drop in dependence caused
//! by removing the most dispensable member.

use crate::dataset::CorrelationMatrix;
use crate::error::{Error, Result};
use crate::linalg::{self, SymMatrix};

/// LVNLC weights in `[-1e-10, 0]` count as non-negative and are not flipped.
pub const WEIGHT_FLIP_TOL: f64 = 1e-10;
/// Smallest-eigenvalue gaps below this mark the LVNLC as non-unique.
pub const DEGENERACY_TOL: f64 = 1e-8;
/// Largest set accepted by the exhaustive sign-pattern search.
pub const MAX_WITNESS_SIZE: usize = 25;

/// Variable indices with one `±1` sign per member, in canonical orientation:
/// members strictly increasing and the lowest member positive.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SignedSet {
    members: Vec<usize>,
    signs: Vec<i8>,
}

impl SignedSet {
    /// Validates and canonically orients (flipping all signs if needed).
    pub fn new(members: Vec<usize>, mut signs: Vec<i8>) -> Result<Self> {
        if members.len() < 2 {
            return Err(Error::InvalidSubset(
                "a signed set needs at least 2 members".into(),
            ));
        }
        if members.len() != signs.len() {
            return Err(Error::InvalidSubset("one sign per member required".into()));
        }
        if members.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidSubset(
                "members must be strictly increasing".into(),
            ));
        }
        if signs.iter().any(|&s| s != 1 && s != -1) {
            return Err(Error::InvalidSubset("signs must be +1 or -1".into()));
        }
        if signs[0] < 0 {
            signs.iter_mut().for_each(|s| *s = -*s);
        }
        Ok(Self { members, signs })
    }

    /// Same as [`SignedSet::new`] but accepts members in any order.
    pub fn from_pairs(mut pairs: Vec<(usize, i8)>) -> Result<Self> {
        pairs.sort_unstable();
        let (members, signs) = pairs.into_iter().unzip();
        Self::new(members, signs)
    }

    pub fn unsigned(members: Vec<usize>) -> Result<Self> {
        let signs = vec![1; members.len()];
        Self::new(members, signs)
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn signs(&self) -> &[i8] {
        &self.signs
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

fn check_subset(a: &CorrelationMatrix, subset: &[usize], min_len: usize) -> Result<()> {
    if subset.len() < min_len {
        return Err(Error::InvalidSubset(format!(
            "need at least {min_len} members, got {}",
            subset.len()
        )));
    }
    if let Some(&bad) = subset.iter().find(|&&i| i >= a.dim()) {
        return Err(Error::InvalidSubset(format!(
            "index {bad} out of range for {} variables",
            a.dim()
        )));
    }
    let mut sorted = subset.to_vec();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidSubset("duplicate member".into()));
    }
    Ok(())
}

/// Least variant normalized linear combination of a subset.
#[derive(Clone, Debug, PartialEq)]
pub struct Lvnlc {
    pub variance: f64,
    pub weights: Vec<f64>,
    /// True when the two smallest eigenvalues are within 1e-8, so the
    /// weights are one of several equally good combinations.
    pub degenerate: bool,
}

pub fn lvnlc(a: &CorrelationMatrix, subset: &[usize]) -> Result<Lvnlc> {
    check_subset(a, subset, 2)?;
    let pair = linalg::min_eigenpair(&a.submatrix(subset))?;
    Ok(Lvnlc {
        variance: pair.lambda_min,
        weights: pair.vector,
        degenerate: pair.gap < DEGENERACY_TOL,
    })
}

/// `1 - λ_min` of a correlation (sub)matrix, clamped to `[0, 1]`.
pub fn dependence_of(sub: &SymMatrix) -> Result<f64> {
    Ok((1.0 - linalg::min_eigenvalue(sub)?).clamp(0.0, 1.0))
}

/// Dependence of `sub` minus the largest dependence among its
/// single-deletion principal submatrices.
pub fn gain_of(sub: &SymMatrix) -> Result<f64> {
    let sigma = dependence_of(sub)?;
    let mut best = f64::NEG_INFINITY;
    for j in 0..sub.dim() {
        best = best.max(dependence_of(&sub.without(j))?);
    }
    Ok(gain_from_dependences(sigma, &[best]))
}

/// `sigma - max(deletion_dependences)`.
pub fn gain_from_dependences(sigma: f64, deletion_dependences: &[f64]) -> f64 {
    sigma
        - deletion_dependences
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
}

pub fn linear_dependence(a: &CorrelationMatrix, subset: &[usize]) -> Result<f64> {
    check_subset(a, subset, 2)?;
    dependence_of(&a.submatrix(subset))
}

pub fn linear_gain(a: &CorrelationMatrix, subset: &[usize]) -> Result<f64> {
    check_subset(a, subset, 3)?;
    gain_of(&a.submatrix(subset))
}

/// A subset in self-canceling form: signs flip exactly the members with
/// negative LVNLC weight, so every adjusted weight is non-negative.
#[derive(Clone, Debug, PartialEq)]
pub struct CanonicalForm {
    pub signed: SignedSet,
    /// Largest pairwise correlation of the sign-adjusted submatrix.
    pub rho_s: f64,
    /// Unit-norm LVNLC weights after sign adjustment (all >= -1e-10).
    pub weights: Vec<f64>,
}

pub fn self_canceling_form(a: &CorrelationMatrix, subset: &[usize]) -> Result<CanonicalForm> {
    let l = lvnlc(a, subset)?;
    self_canceling_from_weights(a, subset, &l.weights)
}

/// Self-canceling form for a given LVNLC weight vector, in either eigenvector
/// orientation. `subset` may be in any order; `weights` follows it.
pub fn self_canceling_from_weights(
    a: &CorrelationMatrix,
    subset: &[usize],
    weights: &[f64],
) -> Result<CanonicalForm> {
    check_subset(a, subset, 2)?;
    if weights.len() != subset.len() {
        return Err(Error::InvalidSubset(
            "one weight per member required".into(),
        ));
    }
    let mut entries: Vec<(usize, i8, f64)> = subset
        .iter()
        .zip(weights)
        .map(|(&m, &w)| (m, if w < -WEIGHT_FLIP_TOL { -1 } else { 1 }, w))
        .collect();
    entries.sort_unstable_by_key(|e| e.0);
    let signed = SignedSet::from_pairs(entries.iter().map(|e| (e.0, e.1)).collect())?;

    // SignedSet orientation may have negated every sign; adjust weights with
    // the final signs and then make them non-negative as a whole.
    let mut adjusted: Vec<f64> = entries
        .iter()
        .zip(signed.signs())
        .map(|(e, &s)| e.2 * f64::from(s))
        .collect();
    if adjusted.iter().sum::<f64>() < 0.0 {
        adjusted.iter_mut().for_each(|w| *w = -*w);
    }
    let norm = adjusted.iter().map(|w| w * w).sum::<f64>().sqrt();
    if norm > 0.0 {
        adjusted.iter_mut().for_each(|w| *w /= norm);
    }

    let rho_s = max_off_diagonal(&a.sign_adjusted(signed.members(), signed.signs()));
    Ok(CanonicalForm {
        signed,
        rho_s,
        weights: adjusted,
    })
}

pub(crate) fn max_off_diagonal(m: &SymMatrix) -> f64 {
    let mut best = f64::NEG_INFINITY;
    for i in 0..m.dim() {
        for j in (i + 1)..m.dim() {
            best = best.max(m.get(i, j));
        }
    }
    best
}

/// True iff every sign-adjusted pairwise correlation is at most `rho`.
pub fn is_negative_clique(a: &CorrelationMatrix, signed: &SignedSet, rho: f64) -> bool {
    let (m, s) = (signed.members(), signed.signs());
    (0..m.len())
        .all(|i| ((i + 1)..m.len()).all(|j| f64::from(s[i] * s[j]) * a.get(m[i], m[j]) <= rho))
}

/// Searches the canonical sign patterns (lowest member fixed positive) for
/// one that turns `subset` into a negative clique at threshold `rho`.
/// Patterns are explored with `+1` before `-1` for each member in index
/// order, so the returned witness is the first such pattern.
pub fn negative_equivalent_witness(
    a: &CorrelationMatrix,
    subset: &[usize],
    rho: f64,
) -> Result<Option<SignedSet>> {
    check_subset(a, subset, 2)?;
    if subset.len() > MAX_WITNESS_SIZE {
        return Err(Error::InvalidSubset(format!(
            "exhaustive sign search limited to {MAX_WITNESS_SIZE} members"
        )));
    }
    let mut members = subset.to_vec();
    members.sort_unstable();
    let mut signs = vec![1i8; members.len()];
    if assign_signs(a, &members, &mut signs, 1, rho) {
        Ok(Some(SignedSet::new(members, signs)?))
    } else {
        Ok(None)
    }
}

fn assign_signs(
    a: &CorrelationMatrix,
    members: &[usize],
    signs: &mut [i8],
    at: usize,
    rho: f64,
) -> bool {
    if at == members.len() {
        return true;
    }
    for s in [1i8, -1] {
        signs[at] = s;
        let consistent =
            (0..at).all(|i| f64::from(signs[i] * s) * a.get(members[i], members[at]) <= rho);
        if consistent && assign_signs(a, members, signs, at + 1, rho) {
            return true;
        }
    }
    signs[at] = 1;
    false
}

/// A discovered multipole with its self-canceling signs and LVNLC weights.
#[derive(Clone, Debug, PartialEq)]
pub struct MultipoleRecord {
    pub signed: SignedSet,
    /// Linear dependence `1 - λ_min`.
    pub sigma: f64,
    /// Linear gain.
    pub gain: f64,
    pub weights: Vec<f64>,
    pub maximal: bool,
    pub degenerate: bool,
}

impl MultipoleRecord {
    /// Evaluates a member set of size >= 3 from scratch.
    pub fn evaluate(a: &CorrelationMatrix, members: &[usize]) -> Result<Self> {
        check_subset(a, members, 3)?;
        let mut sorted = members.to_vec();
        sorted.sort_unstable();
        let l = lvnlc(a, &sorted)?;
        let sigma = (1.0 - l.variance).clamp(0.0, 1.0);
        let gain = gain_of(&a.submatrix(&sorted))?;
        let form = self_canceling_from_weights(a, &sorted, &l.weights)?;
        Ok(Self {
            signed: form.signed,
            sigma,
            gain,
            weights: form.weights,
            maximal: false,
            degenerate: l.degenerate,
        })
    }

    pub fn members(&self) -> &[usize] {
        self.signed.members()
    }

    pub fn len(&self) -> usize {
        self.signed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signed.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    /// Correlations (0,1) = -0.6, (0,2) = 0.5, (1,2) = 0.3.
    fn mixed_triple() -> CorrelationMatrix {
        CorrelationMatrix::new(
            SymMatrix::from_rows(&[
                vec![1.0, -0.6, 0.5],
                vec![-0.6, 1.0, 0.3],
                vec![0.5, 0.3, 1.0],
            ])
            .unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn signed_set_orientation() {
        let s = SignedSet::new(vec![1, 4, 7], vec![-1, 1, -1]).unwrap();
        assert_eq!(s.signs(), &[1, -1, 1]);
        assert!(SignedSet::new(vec![3, 2], vec![1, 1]).is_err());
        assert!(SignedSet::new(vec![3], vec![1]).is_err());
        assert!(SignedSet::new(vec![1, 2], vec![1, 0]).is_err());
    }

    #[test]
    fn lvnlc_cases() {
        let a = CorrelationMatrix::equicorrelated(2, -1.0).unwrap();
        let l = lvnlc(&a, &[0, 1]).unwrap();
        let h = 1.0 / 2f64.sqrt();
        assert!(close(l.variance, 0.0, 1e-12));
        assert!(close(l.weights[0], h, 1e-12) && close(l.weights[1], h, 1e-12));

        let i = CorrelationMatrix::identity(4);
        assert!(close(lvnlc(&i, &[0, 2, 3]).unwrap().variance, 1.0, 1e-12));

        let e = CorrelationMatrix::equicorrelated(3, -0.5).unwrap();
        let l = lvnlc(&e, &[0, 1, 2]).unwrap();
        assert!(close(l.variance, 0.0, 1e-12));
        let third = 1.0 / 3f64.sqrt();
        assert!(l.weights.iter().all(|w| close(*w, third, 1e-9)));

        assert!(lvnlc(&e, &[0]).is_err());
        assert!(lvnlc(&e, &[0, 0]).is_err());
        assert!(lvnlc(&e, &[0, 5]).is_err());
    }

    #[test]
    fn dependence_cases() {
        let a = CorrelationMatrix::equicorrelated(2, -1.0).unwrap();
        assert!(close(linear_dependence(&a, &[0, 1]).unwrap(), 1.0, 1e-12));
        let i = CorrelationMatrix::identity(3);
        assert!(close(
            linear_dependence(&i, &[0, 1, 2]).unwrap(),
            0.0,
            1e-12
        ));
        let e = CorrelationMatrix::equicorrelated(3, -0.4).unwrap();
        assert!(close(
            linear_dependence(&e, &[0, 1, 2]).unwrap(),
            0.8,
            1e-12
        ));
    }

    #[test]
    fn gain_cases() {
        assert!(close(
            gain_from_dependences(0.92, &[0.67, 0.42, 0.26]),
            0.25,
            1e-12
        ));
        let e = CorrelationMatrix::equicorrelated(3, -0.5).unwrap();
        assert!(close(linear_gain(&e, &[0, 1, 2]).unwrap(), 0.5, 1e-9));
        let i = CorrelationMatrix::identity(3);
        assert!(close(linear_gain(&i, &[0, 1, 2]).unwrap(), 0.0, 1e-12));
        assert!(linear_gain(&e, &[0, 1]).is_err());
    }

    #[test]
    fn self_canceling_flips_negative_weight() {
        let a = mixed_triple();
        let expected = SignedSet::new(vec![0, 1, 2], vec![1, 1, -1]).unwrap();
        let f = self_canceling_from_weights(&a, &[0, 1, 2], &[0.6, 0.65, -0.47]).unwrap();
        assert_eq!(f.signed, expected);
        let g = self_canceling_from_weights(&a, &[0, 1, 2], &[-0.6, -0.65, 0.47]).unwrap();
        assert_eq!(g, f);
        assert!(f.weights.iter().all(|w| *w >= 0.0));
        assert!(close(
            f.weights.iter().map(|w| w * w).sum::<f64>(),
            1.0,
            1e-12
        ));
    }

    #[test]
    fn zero_weight_is_not_flipped() {
        let a = CorrelationMatrix::identity(3);
        let f = self_canceling_from_weights(&a, &[0, 1, 2], &[0.8, -5e-11, 0.6]).unwrap();
        assert_eq!(f.signed.signs(), &[1, 1, 1]);
    }

    #[test]
    fn self_canceling_all_positive_weights() {
        let e = CorrelationMatrix::equicorrelated(4, -0.3).unwrap();
        let f = self_canceling_form(&e, &[0, 1, 2, 3]).unwrap();
        assert_eq!(f.signed.signs(), &[1, 1, 1, 1]);
        assert!(close(f.rho_s, -0.3, 1e-12));
    }

    #[test]
    fn self_canceling_preserves_spectrum() {
        let a = mixed_triple();
        let f = self_canceling_form(&a, &[0, 1, 2]).unwrap();
        let before = linalg::eigenvalues(&a.submatrix(&[0, 1, 2])).unwrap();
        let after =
            linalg::eigenvalues(&a.sign_adjusted(f.signed.members(), f.signed.signs())).unwrap();
        for (x, y) in before.iter().zip(&after) {
            assert!(close(*x, *y, 1e-10));
        }
    }

    #[test]
    fn negative_clique_predicate() {
        let e = CorrelationMatrix::equicorrelated(3, -0.2).unwrap();
        assert!(is_negative_clique(
            &e,
            &SignedSet::unsigned(vec![0, 1, 2]).unwrap(),
            0.0
        ));
        let a = mixed_triple();
        assert!(!is_negative_clique(
            &a,
            &SignedSet::unsigned(vec![0, 1, 2]).unwrap(),
            0.0
        ));
        let flipped = SignedSet::new(vec![0, 1, 2], vec![1, 1, -1]).unwrap();
        assert!(is_negative_clique(&a, &flipped, 0.0));
    }

    #[test]
    fn witness_cases() {
        let a = mixed_triple();
        let w = negative_equivalent_witness(&a, &[2, 0, 1], 0.0)
            .unwrap()
            .unwrap();
        assert_eq!(w.signs(), &[1, 1, -1]);

        let pos = CorrelationMatrix::equicorrelated(3, 0.5).unwrap();
        assert_eq!(
            negative_equivalent_witness(&pos, &[0, 1, 2], 0.0).unwrap(),
            None
        );

        let neg = CorrelationMatrix::equicorrelated(3, -0.3).unwrap();
        let w = negative_equivalent_witness(&neg, &[0, 1, 2], 0.0)
            .unwrap()
            .unwrap();
        assert_eq!(w.signs(), &[1, 1, 1]);

        let big = CorrelationMatrix::identity(30);
        let all: Vec<usize> = (0..30).collect();
        assert!(negative_equivalent_witness(&big, &all, 0.0).is_err());
    }

    #[test]
    fn record_evaluation() {
        let e = CorrelationMatrix::equicorrelated(3, -0.5).unwrap();
        let r = MultipoleRecord::evaluate(&e, &[2, 0, 1]).unwrap();
        assert_eq!(r.members(), &[0, 1, 2]);
        assert!(close(r.sigma, 1.0, 1e-9));
        assert!(close(r.gain, 0.5, 1e-9));
        assert!(!r.degenerate);
    }
}
