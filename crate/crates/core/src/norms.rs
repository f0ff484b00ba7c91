//! Floating-point cross-checks of two trace inequalities on H-module
//! matrices, evaluated on the scalar image.
//!
//! Everything else in the crate is exact; this corner is deliberately not.
//! Absolute values of operators need spectral data, so the checks run in f64
//! with an explicit tolerance scaled to the right-hand side. `tr_H` of a
//! scalar matrix is its ordinary trace divided by |H|, and tr_H|X| is the
//! singular value sum normalized the same way.

use nalgebra::{Complex, DMatrix};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::index::HModuleMatrix;

const REL_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum NormsError {
    #[error("{context} inequality failed numerically: lhs {lhs} > rhs {rhs} + tol {tol}")]
    NumericalFailure {
        context: &'static str,
        lhs: f64,
        rhs: f64,
        tol: f64,
    },
    #[error("operands disagree in shape or group")]
    ShapeMismatch,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InequalityCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub tol: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub triangle: InequalityCheck,
    pub product: InequalityCheck,
}

pub(crate) fn to_complex(m: &HModuleMatrix) -> DMatrix<Complex<f64>> {
    let rows = m.scalar_matrix();
    let dim = rows.dim();
    DMatrix::from_fn(dim, dim, |r, c| {
        let (re, im) = rows.entry(r, c).to_f64_pair();
        Complex::new(re, im)
    })
}

fn singular_values(m: &DMatrix<Complex<f64>>) -> Vec<f64> {
    m.clone().singular_values().iter().copied().collect()
}

fn trace_norm(m: &DMatrix<Complex<f64>>) -> f64 {
    singular_values(m).iter().sum()
}

pub(crate) fn operator_norm(m: &DMatrix<Complex<f64>>) -> f64 {
    singular_values(m).iter().fold(0.0, |a, &b| a.max(b))
}

fn check(context: &'static str, lhs: f64, rhs: f64) -> Result<InequalityCheck, NormsError> {
    let tol = REL_TOL * rhs.abs().max(1.0);
    if lhs <= rhs + tol {
        Ok(InequalityCheck { lhs, rhs, tol })
    } else {
        Err(NormsError::NumericalFailure {
            context,
            lhs,
            rhs,
            tol,
        })
    }
}

/// Checks |tr_H(A + B)| <= tr_H|A| + tr_H|B| and
/// tr_H|CAB| <= opnorm(C) * opnorm(B) * tr_H|A| on the scalar images of the
/// three matrices. Both inequalities are theorems, so a failure beyond the
/// scaled tolerance signals numerical breakdown rather than a counterexample;
/// it surfaces as `NumericalFailure`.
pub fn norm_inequalities_check(
    a: &HModuleMatrix,
    b: &HModuleMatrix,
    c: &HModuleMatrix,
) -> Result<NormReport, NormsError> {
    if a.group().as_ref() != b.group().as_ref()
        || a.group().as_ref() != c.group().as_ref()
        || a.size() != b.size()
        || a.size() != c.size()
    {
        return Err(NormsError::ShapeMismatch);
    }
    let order = a.group().order() as f64;
    let fa = to_complex(a);
    let fb = to_complex(b);
    let fc = to_complex(c);

    let sum_trace = (&fa + &fb).trace().norm() / order;
    let triangle = check("triangle", sum_trace, (trace_norm(&fa) + trace_norm(&fb)) / order)?;

    let cab = &fc * &fa * &fb;
    let product = check(
        "product",
        trace_norm(&cab) / order,
        operator_norm(&fc) * operator_norm(&fb) * trace_norm(&fa) / order,
    )?;

    Ok(NormReport { triangle, product })
}
