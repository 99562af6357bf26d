//! Upper bounds on linear gain and a validator that checks them against
//! direct eigen-decomposition.
//!
//! Write a k×k correlation matrix in block form around column `j` as
//! `[[Ā_jj, C_j], [C_jᵀ, 1]]`. With `λ` the smallest eigenvalue of the whole
//! matrix and `μ_j` that of `Ā_jj`, the eigengap `Δλ_j = μ_j - λ` satisfies
//! `Δλ_j <= ‖C_j‖₂ <= ‖C_j‖₁`. The linear gain is `min_j Δλ_j`, which is in
//! turn bounded by the two aggregate forms computed in [`BoundReport`].

use std::io::Write;

use rayon::prelude::*;

use crate::dataset::CorrelationMatrix;
use crate::error::{Error, Result};
use crate::linalg;
use crate::measures;

/// Tolerance used when comparing computed quantities against their bounds.
pub const BOUND_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct ColumnBound {
    pub column: usize,
    pub c_norm2: f64,
    pub c_norm1: f64,
    /// `μ_j - λ`: rise of the smallest eigenvalue when column `j` is deleted.
    pub delta_lambda: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundReport {
    pub columns: Vec<ColumnBound>,
    pub lambda: f64,
    /// `min_j delta_lambda`.
    pub gain: f64,
    pub corollary1_bound: f64,
    pub corollary2_bound: f64,
    /// Empirical cap `1 / (k - 1)`.
    pub size_cap_bound: f64,
}

pub fn bound_report(a: &CorrelationMatrix) -> Result<BoundReport> {
    let k = a.dim();
    if k < 3 {
        return Err(Error::InvalidArgument(format!(
            "bound report needs k >= 3, got {k}"
        )));
    }
    let m = a.matrix();
    let lambda = linalg::min_eigenvalue(m)?;
    let mut columns = Vec::with_capacity(k);
    let mut total_sq = 0.0;
    for j in 0..k {
        let sq: f64 = (0..k)
            .filter(|&i| i != j)
            .map(|i| m.get(i, j).powi(2))
            .sum();
        let abs: f64 = (0..k).filter(|&i| i != j).map(|i| m.get(i, j).abs()).sum();
        total_sq += sq;
        let mu = linalg::min_eigenvalue(&m.without(j))?;
        columns.push(ColumnBound {
            column: j,
            c_norm2: sq.sqrt(),
            c_norm1: abs,
            delta_lambda: mu - lambda,
        });
    }
    let gain = columns
        .iter()
        .map(|c| c.delta_lambda)
        .fold(f64::INFINITY, f64::min);
    // Σ_i A_ij² - 1 is the squared off-diagonal norm of column j.
    let corollary2_bound = columns
        .iter()
        .map(|c| (c.c_norm2 * c.c_norm2 / (k as f64 - 1.0)).sqrt())
        .fold(f64::INFINITY, f64::min);
    Ok(BoundReport {
        columns,
        lambda,
        gain,
        corollary1_bound: (total_sq / k as f64).sqrt(),
        corollary2_bound,
        size_cap_bound: 1.0 / (k as f64 - 1.0),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ViolationKind {
    /// `Δλ_j > ‖C_j‖₂`.
    EigengapExceedsColumnNorm,
    /// `‖C_j‖₂ > ‖C_j‖₁`.
    NormOrder,
    /// Gain above the root-mean-square-over-columns bound.
    Corollary1,
    /// Gain above the per-column root-mean-square bound.
    Corollary2,
    /// Gain above `1 / (k - 1)`; an empirical observation, not a theorem.
    SizeCap,
}

impl ViolationKind {
    /// Whether the relation is a proved bound (as opposed to an empirical
    /// observation that is only reported).
    pub fn is_proven(self) -> bool {
        !matches!(self, ViolationKind::SizeCap)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub kind: ViolationKind,
    pub column: Option<usize>,
    pub value: f64,
    pub bound: f64,
}

pub fn violations(report: &BoundReport) -> Vec<Violation> {
    let mut out = Vec::new();
    for c in &report.columns {
        if c.delta_lambda > c.c_norm2 + BOUND_TOL {
            out.push(Violation {
                kind: ViolationKind::EigengapExceedsColumnNorm,
                column: Some(c.column),
                value: c.delta_lambda,
                bound: c.c_norm2,
            });
        }
        if c.c_norm2 > c.c_norm1 + BOUND_TOL {
            out.push(Violation {
                kind: ViolationKind::NormOrder,
                column: Some(c.column),
                value: c.c_norm2,
                bound: c.c_norm1,
            });
        }
    }
    let aggregate = [
        (ViolationKind::Corollary1, report.corollary1_bound),
        (ViolationKind::Corollary2, report.corollary2_bound),
        (ViolationKind::SizeCap, report.size_cap_bound),
    ];
    for (kind, bound) in aggregate {
        if report.gain > bound + BOUND_TOL {
            out.push(Violation {
                kind,
                column: None,
                value: report.gain,
                bound,
            });
        }
    }
    out
}

pub fn check_bounds(a: &CorrelationMatrix) -> Result<Vec<Violation>> {
    Ok(violations(&bound_report(a)?))
}

/// Largest multipole size that can still reach linear gain `delta`:
/// `⌊(1 + δ) / δ⌋`, evaluated as `⌊1/δ⌋ + 1` so that exact reciprocals such
/// as δ = 0.2 are not lost to rounding.
pub fn max_size_for_gain(delta: f64) -> Result<usize> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::InvalidArgument("delta must be in (0,1]".into()));
    }
    Ok((1.0 / delta + 1e-9).floor() as usize + 1)
}

/// One row of the bound validator's CSV report.
#[derive(Clone, Debug, PartialEq)]
pub struct ValidationRow {
    pub k: usize,
    pub gain: f64,
    pub rho_s: f64,
    pub corollary1_bound: f64,
    pub corollary2_bound: f64,
    pub size_cap_bound: f64,
    pub eigengap_violations: usize,
    pub norm_order_violations: usize,
    pub corollary1_violated: bool,
    pub corollary2_violated: bool,
    pub size_cap_exceeded: bool,
}

impl ValidationRow {
    pub fn proven_violations(&self) -> usize {
        self.eigengap_violations
            + self.norm_order_violations
            + usize::from(self.corollary1_violated)
            + usize::from(self.corollary2_violated)
    }
}

pub fn validation_row(a: &CorrelationMatrix) -> Result<ValidationRow> {
    let report = bound_report(a)?;
    let all: Vec<usize> = (0..a.dim()).collect();
    let rho_s = measures::self_canceling_form(a, &all)?.rho_s;
    let v = violations(&report);
    let count = |kind| v.iter().filter(|x| x.kind == kind).count();
    Ok(ValidationRow {
        k: a.dim(),
        gain: report.gain,
        rho_s,
        corollary1_bound: report.corollary1_bound,
        corollary2_bound: report.corollary2_bound,
        size_cap_bound: report.size_cap_bound,
        eigengap_violations: count(ViolationKind::EigengapExceedsColumnNorm),
        norm_order_violations: count(ViolationKind::NormOrder),
        corollary1_violated: count(ViolationKind::Corollary1) > 0,
        corollary2_violated: count(ViolationKind::Corollary2) > 0,
        size_cap_exceeded: count(ViolationKind::SizeCap) > 0,
    })
}

/// Validates every matrix in parallel; rows come back in input order.
pub fn validate_all(matrices: &[CorrelationMatrix]) -> Result<Vec<ValidationRow>> {
    matrices.par_iter().map(validation_row).collect()
}

pub fn write_validation_csv<W: Write>(rows: &[ValidationRow], mut w: W) -> std::io::Result<()> {
    writeln!(
        w,
        "k,gain,rho_s,corollary1_bound,corollary2_bound,size_cap_bound,\
         eigengap_violations,norm_order_violations,corollary1_violated,\
         corollary2_violated,size_cap_exceeded"
    )?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.k,
            r.gain,
            r.rho_s,
            r.corollary1_bound,
            r.corollary2_bound,
            r.size_cap_bound,
            r.eigengap_violations,
            r.norm_order_violations,
            u8::from(r.corollary1_violated),
            u8::from(r.corollary2_violated),
            u8::from(r.size_cap_exceeded),
        )?;
    }
    Ok(())
}
