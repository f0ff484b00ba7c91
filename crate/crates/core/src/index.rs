//! Finite H-module matrices over group algebras and the trace-versus-index
//! comparison for pairs of exact projections.
//!
//! Modules here have the shape (CH)^(n*m) for a finite group H: m truncation
//! summands amplified n times. Matrices keep entries in CH. Dimension counts
//! are taken on the scalar image under the left regular representation, where
//! the H-invariant dimension of a subspace is its ordinary rank divided by
//! |H|. Ranks are exact: rows are cleared of denominators and eliminated
//! fraction-free over the Gaussian integers.

use std::fmt;
use std::sync::Arc;

use num::{BigInt, BigRational, Integer, One, Zero};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algebra::AlgebraElem;
use crate::group::{all_subgroups, FiniteGroup, Subgroup};
use crate::scalar::{format_big_rational, Gaussian};

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("matrix {which} is not a projection, first bad entry at ({row}, {col})")]
    NotAProjection {
        which: &'static str,
        row: usize,
        col: usize,
    },
    #[error("scalar matrix does not commute with the right regular action")]
    NotHEquivariant,
    #[error("scalar dimension {needed} exceeds budget {budget}")]
    BudgetExceeded { needed: usize, budget: usize },
    #[error("operands disagree in shape or group")]
    ShapeMismatch,
}

/// Square matrix over CH acting on (CH)^(n*m), stored dense row-major.
#[derive(Clone, PartialEq)]
pub struct HModuleMatrix {
    group: Arc<FiniteGroup>,
    m: usize,
    n: usize,
    entries: Vec<AlgebraElem>,
}

impl HModuleMatrix {
    pub fn zero(group: Arc<FiniteGroup>, m: usize, n: usize) -> Self {
        let size = m * n;
        let entries = vec![AlgebraElem::zero(group.clone()); size * size];
        Self {
            group,
            m,
            n,
            entries,
        }
    }

    pub fn identity(group: Arc<FiniteGroup>, m: usize, n: usize) -> Self {
        let mut out = Self::zero(group.clone(), m, n);
        for i in 0..out.size() {
            out.set(i, i, AlgebraElem::one(group.clone()));
        }
        out
    }

    pub fn group(&self) -> &Arc<FiniteGroup> {
        &self.group
    }

    pub fn truncation(&self) -> usize {
        self.m
    }

    pub fn amplification(&self) -> usize {
        self.n
    }

    pub fn size(&self) -> usize {
        self.m * self.n
    }

    pub fn entry(&self, row: usize, col: usize) -> &AlgebraElem {
        &self.entries[row * self.size() + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: AlgebraElem) {
        debug_assert!(value.group().as_ref() == self.group.as_ref());
        let size = self.size();
        self.entries[row * size + col] = value;
    }

    fn assert_compatible(&self, other: &Self) {
        assert!(
            self.size() == other.size() && self.group.as_ref() == other.group.as_ref(),
            "H-module matrices must share size and group"
        );
    }

    pub fn add(&self, other: &Self) -> Self {
        self.assert_compatible(other);
        let mut out = self.clone();
        for (a, b) in out.entries.iter_mut().zip(&other.entries) {
            *a = a.add(b);
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.assert_compatible(other);
        let mut out = self.clone();
        for (a, b) in out.entries.iter_mut().zip(&other.entries) {
            *a = a.sub(b);
        }
        out
    }

    pub fn scale(&self, s: &Gaussian) -> Self {
        let mut out = self.clone();
        for a in out.entries.iter_mut() {
            *a = a.scale(s);
        }
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        self.assert_compatible(other);
        let size = self.size();
        let mut out = Self::zero(self.group.clone(), self.m, self.n);
        for r in 0..size {
            for k in 0..size {
                let a = self.entry(r, k);
                if a.is_zero() {
                    continue;
                }
                for c in 0..size {
                    let b = other.entry(k, c);
                    if b.is_zero() {
                        continue;
                    }
                    let sum = out.entry(r, c).add(&a.mul(b));
                    out.set(r, c, sum);
                }
            }
        }
        out
    }

    pub fn adjoint(&self) -> Self {
        let size = self.size();
        let mut out = Self::zero(self.group.clone(), self.m, self.n);
        for r in 0..size {
            for c in 0..size {
                out.set(r, c, self.entry(c, r).star());
            }
        }
        out
    }

    /// Sum of canonical traces down the diagonal. No |H| normalization:
    /// h_trace of the identity on (CH)^k is k.
    pub fn h_trace(&self) -> Gaussian {
        let mut acc = Gaussian::zero();
        for i in 0..self.size() {
            acc += &self.entry(i, i).trace();
        }
        acc
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(AlgebraElem::is_zero)
    }

    /// Exact check that the matrix is a self-adjoint idempotent. The error
    /// carries the coordinates of the first entry where either identity
    /// fails, scanning the idempotency defect first.
    pub fn check_projection(&self, which: &'static str) -> Result<(), IndexError> {
        let size = self.size();
        let sq = self.mul(self);
        for r in 0..size {
            for c in 0..size {
                if sq.entry(r, c) != self.entry(r, c) {
                    return Err(IndexError::NotAProjection { which, row: r, col: c });
                }
            }
        }
        let adj = self.adjoint();
        for r in 0..size {
            for c in 0..size {
                if adj.entry(r, c) != self.entry(r, c) {
                    return Err(IndexError::NotAProjection { which, row: r, col: c });
                }
            }
        }
        Ok(())
    }

    /// Reinterprets the module as a plain truncation (n = 1) and appends
    /// `extra_summands` zero copies of CH. The original matrix sits in the
    /// top-left block.
    pub fn pad_truncation(&self, extra_summands: usize) -> Self {
        let old = self.size();
        let mut out = Self::zero(self.group.clone(), old + extra_summands, 1);
        for r in 0..old {
            for c in 0..old {
                out.set(r, c, self.entry(r, c).clone());
            }
        }
        out
    }

    pub fn direct_sum(&self, other: &Self) -> Self {
        assert!(
            self.group.as_ref() == other.group.as_ref(),
            "direct sum needs a common group"
        );
        let (s1, s2) = (self.size(), other.size());
        let mut out = Self::zero(self.group.clone(), s1 + s2, 1);
        for r in 0..s1 {
            for c in 0..s1 {
                out.set(r, c, self.entry(r, c).clone());
            }
        }
        for r in 0..s2 {
            for c in 0..s2 {
                out.set(s1 + r, s1 + c, other.entry(r, c).clone());
            }
        }
        out
    }

    /// Expands every entry through the left regular representation into one
    /// scalar matrix of side size * |H|.
    pub fn scalar_matrix(&self) -> ScalarMatrix {
        let h = self.group.order();
        let size = self.size();
        let dim = size * h;
        let mut rows = vec![vec![Gaussian::zero(); dim]; dim];
        for br in 0..size {
            for bc in 0..size {
                let e = self.entry(br, bc);
                if e.is_zero() {
                    continue;
                }
                let block = regular_representation(e);
                for (r, block_row) in block.iter().enumerate() {
                    for (c, v) in block_row.iter().enumerate() {
                        rows[br * h + r][bc * h + c] = v.clone();
                    }
                }
            }
        }
        ScalarMatrix {
            group: self.group.clone(),
            rows,
        }
    }
}

impl fmt::Debug for HModuleMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "HModuleMatrix {}x{} over |H| = {}",
            self.size(),
            self.size(),
            self.group.order()
        )?;
        for r in 0..self.size() {
            let row: Vec<_> = (0..self.size()).map(|c| self.entry(r, c)).collect();
            writeln!(f, "  {row:?}")?;
        }
        Ok(())
    }
}

/// Matrix of left multiplication by `x` on CH in the group-element basis:
/// out[r][c] is the coefficient of r * c^-1 in x.
pub fn regular_representation(x: &AlgebraElem) -> Vec<Vec<Gaussian>> {
    let g = x.group();
    let h = g.order();
    (0..h)
        .map(|r| (0..h).map(|c| x.coeff(g.mul(r, g.inv(c))).clone()).collect())
        .collect()
}

/// Plain matrix over Q(i) whose side is a multiple of |H|, viewed in
/// |H| x |H| blocks.
#[derive(Clone, PartialEq)]
pub struct ScalarMatrix {
    group: Arc<FiniteGroup>,
    rows: Vec<Vec<Gaussian>>,
}

impl ScalarMatrix {
    pub fn from_rows(
        group: Arc<FiniteGroup>,
        rows: Vec<Vec<Gaussian>>,
    ) -> Result<Self, IndexError> {
        let dim = rows.len();
        if rows.iter().any(|r| r.len() != dim) || dim % group.order() != 0 {
            return Err(IndexError::ShapeMismatch);
        }
        Ok(Self { group, rows })
    }

    pub fn group(&self) -> &Arc<FiniteGroup> {
        &self.group
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[Vec<Gaussian>] {
        &self.rows
    }

    pub fn entry(&self, r: usize, c: usize) -> &Gaussian {
        &self.rows[r][c]
    }

    /// A block matrix commutes with the right regular action exactly when
    /// every |H| x |H| block B satisfies B[r][c] = B[r * c^-1][identity],
    /// i.e. each block is itself a regular-representation image.
    pub fn is_h_equivariant(&self) -> bool {
        let h = self.group.order();
        let blocks = self.dim() / h;
        for bi in 0..blocks {
            for bj in 0..blocks {
                for r in 0..h {
                    for c in 0..h {
                        let key = self.group.mul(r, self.group.inv(c));
                        if self.rows[bi * h + r][bj * h + c] != self.rows[bi * h + key][bj * h] {
                            return false;
                        }
                    }
                }
            }
        }
        true
    }

    pub fn rank(&self) -> usize {
        exact_rank(&self.rows)
    }
}

impl fmt::Debug for ScalarMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ScalarMatrix {}x{}", self.dim(), self.dim())?;
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Gaussian::to_display_string).collect();
            writeln!(f, "  [{}]", cells.join(", "))?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Subspace {
    Kernel,
    Image,
}

/// H-invariant dimension of the kernel or image of an equivariant scalar
/// matrix: ordinary rank (or corank) divided by |H|.
pub fn vn_dimension(s: &ScalarMatrix, part: Subspace) -> Result<BigRational, IndexError> {
    if !s.is_h_equivariant() {
        return Err(IndexError::NotHEquivariant);
    }
    let h = BigInt::from(s.group().order());
    let rank = BigInt::from(s.rank());
    let num = match part {
        Subspace::Image => rank,
        Subspace::Kernel => BigInt::from(s.dim()) - rank,
    };
    Ok(BigRational::new(num, h))
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct Zi {
    re: BigInt,
    im: BigInt,
}

impl Zi {
    fn zero() -> Self {
        Zi {
            re: BigInt::zero(),
            im: BigInt::zero(),
        }
    }

    fn one() -> Self {
        Zi {
            re: BigInt::one(),
            im: BigInt::zero(),
        }
    }

    fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    fn mul(&self, o: &Self) -> Self {
        Zi {
            re: &self.re * &o.re - &self.im * &o.im,
            im: &self.re * &o.im + &self.im * &o.re,
        }
    }

    fn sub(&self, o: &Self) -> Self {
        Zi {
            re: &self.re - &o.re,
            im: &self.im - &o.im,
        }
    }

    fn conj(&self) -> Self {
        Zi {
            re: self.re.clone(),
            im: -self.im.clone(),
        }
    }

    fn norm(&self) -> BigInt {
        &self.re * &self.re + &self.im * &self.im
    }
}

fn zi_div_exact(num: &Zi, den: &Zi) -> Zi {
    let scaled = num.mul(&den.conj());
    let d = den.norm();
    let (qr, rr) = scaled.re.div_rem(&d);
    let (qi, ri) = scaled.im.div_rem(&d);
    assert!(
        rr.is_zero() && ri.is_zero(),
        "fraction-free elimination step must divide exactly"
    );
    Zi { re: qr, im: qi }
}

fn integer_rows(rows: &[Vec<Gaussian>]) -> Vec<Vec<Zi>> {
    rows.iter()
        .map(|row| {
            let mut l = BigInt::one();
            for e in row {
                l = l.lcm(e.re.denom());
                l = l.lcm(e.im.denom());
            }
            row.iter()
                .map(|e| Zi {
                    re: e.re.numer() * (&l / e.re.denom()),
                    im: e.im.numer() * (&l / e.im.denom()),
                })
                .collect()
        })
        .collect()
}

/// Exact rank over Q(i) by one-step fraction-free (Bareiss) elimination on
/// denominator-cleared rows, with full pivot search. Intermediate entries are
/// minors of the integer matrix, so every interior division is exact.
pub fn exact_rank(rows: &[Vec<Gaussian>]) -> usize {
    if rows.is_empty() || rows[0].is_empty() {
        return 0;
    }
    let mut m = integer_rows(rows);
    let nrows = m.len();
    let ncols = m[0].len();
    let mut prev = Zi::one();
    let mut rank = 0;
    for k in 0..nrows.min(ncols) {
        let mut pivot = None;
        'search: for i in k..nrows {
            for j in k..ncols {
                if !m[i][j].is_zero() {
                    pivot = Some((i, j));
                    break 'search;
                }
            }
        }
        let Some((pi, pj)) = pivot else { break };
        m.swap(k, pi);
        if pj != k {
            for row in m.iter_mut() {
                row.swap(k, pj);
            }
        }
        let pivot_row = m[k].clone();
        for row in m.iter_mut().skip(k + 1) {
            let lead = row[k].clone();
            for j in (k + 1)..ncols {
                let t = pivot_row[k].mul(&row[j]).sub(&lead.mul(&pivot_row[j]));
                row[j] = zi_div_exact(&t, &prev);
            }
            row[k] = Zi::zero();
        }
        prev = pivot_row[k].clone();
        rank += 1;
    }
    rank
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntermediateTraces {
    pub trace_p_minus_pqp: String,
    pub trace_q_minus_qpq: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexReport {
    pub trace_diff: String,
    pub dim_ker: String,
    pub dim_coker: String,
    pub index: String,
    pub equal: bool,
    pub intermediate: IntermediateTraces,
}

pub(crate) struct IndexData {
    pub trace_diff: Gaussian,
    pub dim_ker: BigRational,
    pub dim_coker: BigRational,
    pub index: BigRational,
    pub trace_p_minus_pqp: Gaussian,
    pub trace_q_minus_qpq: Gaussian,
    pub equal: bool,
}

fn gaussian_from_rational(r: &BigRational) -> Gaussian {
    Gaussian {
        re: r.clone(),
        im: BigRational::zero(),
    }
}

pub(crate) fn h_index_data(
    p: &HModuleMatrix,
    q: &HModuleMatrix,
) -> Result<IndexData, IndexError> {
    if p.group().as_ref() != q.group().as_ref() || p.size() != q.size() {
        return Err(IndexError::ShapeMismatch);
    }
    p.check_projection("P")?;
    q.check_projection("Q")?;
    let pq = p.mul(q);
    let qp = q.mul(p);
    let pqp = pq.mul(p);
    let qpq = qp.mul(q);

    // QP kills (1 - P)E and lands in QE, so its rank is the dimension of the
    // image of QP restricted to PE; the kernel there has whatever is left of
    // PE. Same with the roles swapped for the cokernel, realized as the
    // kernel of PQ on QE.
    let h = BigInt::from(p.group().order());
    let rank_p = p.scalar_matrix().rank();
    let rank_q = q.scalar_matrix().rank();
    let rank_qp = qp.scalar_matrix().rank();
    let rank_pq = pq.scalar_matrix().rank();
    let dim_ker = BigRational::new(
        BigInt::from(rank_p) - BigInt::from(rank_qp),
        h.clone(),
    );
    let dim_coker = BigRational::new(BigInt::from(rank_q) - BigInt::from(rank_pq), h);
    let index = &dim_ker - &dim_coker;

    let trace_diff = p.h_trace() - q.h_trace();
    let trace_p_minus_pqp = p.sub(&pqp).h_trace();
    let trace_q_minus_qpq = q.sub(&qpq).h_trace();
    let equal = trace_diff == gaussian_from_rational(&index)
        && trace_diff == trace_p_minus_pqp.clone() - trace_q_minus_qpq.clone();

    Ok(IndexData {
        trace_diff,
        dim_ker,
        dim_coker,
        index,
        trace_p_minus_pqp,
        trace_q_minus_qpq,
        equal,
    })
}

/// Compares h_trace(P) - h_trace(Q) against the Fredholm-style index of
/// QP: PE -> QE, both computed exactly. `equal` also demands the
/// intermediate identity through the traces of P - PQP and Q - QPQ.
pub fn h_index(p: &HModuleMatrix, q: &HModuleMatrix) -> Result<IndexReport, IndexError> {
    let d = h_index_data(p, q)?;
    Ok(IndexReport {
        trace_diff: d.trace_diff.to_display_string(),
        dim_ker: format_big_rational(&d.dim_ker),
        dim_coker: format_big_rational(&d.dim_coker),
        index: format_big_rational(&d.index),
        equal: d.equal,
        intermediate: IntermediateTraces {
            trace_p_minus_pqp: d.trace_p_minus_pqp.to_display_string(),
            trace_q_minus_qpq: d.trace_q_minus_qpq.to_display_string(),
        },
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KasparovReport {
    pub identity_ok: bool,
    pub rank_p_defect: usize,
    pub rank_q_defect: usize,
    pub rank_difference: usize,
    pub rank_bound_ok: bool,
    pub ok: bool,
}

/// Assembles F = offdiag(PQ, QP) on PE + QE and checks, exactly, that
/// F*F = F^2 = FF* = diag(PQP, QPQ), then that the compact defects P - PQP
/// and Q - QPQ have scalar rank bounded by the scalar rank of P - Q.
pub fn kasparov_compactness_check(
    p: &HModuleMatrix,
    q: &HModuleMatrix,
) -> Result<KasparovReport, IndexError> {
    if p.group().as_ref() != q.group().as_ref() || p.size() != q.size() {
        return Err(IndexError::ShapeMismatch);
    }
    p.check_projection("P")?;
    q.check_projection("Q")?;
    let size = p.size();
    let pq = p.mul(q);
    let qp = q.mul(p);
    let pqp = pq.mul(p);
    let qpq = qp.mul(q);

    let mut f = HModuleMatrix::zero(p.group().clone(), 2 * size, 1);
    let mut diag = HModuleMatrix::zero(p.group().clone(), 2 * size, 1);
    for r in 0..size {
        for c in 0..size {
            f.set(r, size + c, pq.entry(r, c).clone());
            f.set(size + r, c, qp.entry(r, c).clone());
            diag.set(r, c, pqp.entry(r, c).clone());
            diag.set(size + r, size + c, qpq.entry(r, c).clone());
        }
    }
    let fstar = f.adjoint();
    let ff = f.mul(&f);
    let identity_ok = fstar.mul(&f) == ff && f.mul(&fstar) == ff && ff == diag;

    let rank_p_defect = p.sub(&pqp).scalar_matrix().rank();
    let rank_q_defect = q.sub(&qpq).scalar_matrix().rank();
    let rank_difference = p.sub(q).scalar_matrix().rank();
    let rank_bound_ok = rank_p_defect <= rank_difference && rank_q_defect <= rank_difference;

    Ok(KasparovReport {
        identity_ok,
        rank_p_defect,
        rank_q_defect,
        rank_difference,
        rank_bound_ok,
        ok: identity_ok && rank_bound_ok,
    })
}

fn random_monomial_unitary(
    group: &Arc<FiniteGroup>,
    m: usize,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> HModuleMatrix {
    let size = m * n;
    let mut perm: Vec<usize> = (0..size).collect();
    perm.shuffle(rng);
    let mut w = HModuleMatrix::zero(group.clone(), m, n);
    for (i, &target) in perm.iter().enumerate() {
        let elem = rng.gen_range(0..group.order());
        let mut cell = AlgebraElem::basis(group.clone(), elem);
        if rng.gen_bool(0.5) {
            cell = cell.neg();
        }
        w.set(i, target, cell);
    }
    w
}

fn random_projection(
    group: &Arc<FiniteGroup>,
    subgroups: &[Subgroup],
    m: usize,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> HModuleMatrix {
    let size = m * n;
    let mut diag = HModuleMatrix::zero(group.clone(), m, n);
    for i in 0..size {
        let choice = rng.gen_range(0..=subgroups.len());
        if choice == 0 {
            continue;
        }
        let sub = &subgroups[choice - 1];
        diag.set(
            i,
            i,
            AlgebraElem::averaging_idempotent(group.clone(), sub.members()),
        );
    }
    let w = random_monomial_unitary(group, m, n, rng);
    w.mul(&diag).mul(&w.adjoint())
}

/// Draws a pair of distinct exact projections: averaging idempotents over
/// random subgroups on the diagonal, conjugated by random monomial unitaries
/// (signed permutations with group-element phases). Truncation and
/// amplification sizes are sampled up to the given caps; the scalar side
/// n * m * |H| must stay within `scalar_budget`.
pub fn generate_projection_pair(
    group: &Arc<FiniteGroup>,
    max_truncation: usize,
    max_amplification: usize,
    seed: u64,
    scalar_budget: usize,
) -> Result<(HModuleMatrix, HModuleMatrix), IndexError> {
    assert!(max_truncation >= 1 && max_amplification >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = rng.gen_range(1..=max_truncation);
    let n = rng.gen_range(1..=max_amplification);
    let needed = m * n * group.order();
    if needed > scalar_budget {
        return Err(IndexError::BudgetExceeded {
            needed,
            budget: scalar_budget,
        });
    }
    let subgroups = all_subgroups(group);
    for _ in 0..4096 {
        let p = random_projection(group, &subgroups, m, n, &mut rng);
        let q = random_projection(group, &subgroups, m, n, &mut rng);
        if p != q {
            p.check_projection("P")?;
            q.check_projection("Q")?;
            return Ok((p, q));
        }
    }
    unreachable!("the sampler kept producing identical projections");
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c2() -> Arc<FiniteGroup> {
        Arc::new(FiniteGroup::from_table(vec![vec![0, 1], vec![1, 0]]).unwrap())
    }

    fn s3() -> Arc<FiniteGroup> {
        Arc::new(FiniteGroup::from_permutations(&[vec![1, 0, 2], vec![1, 2, 0]]).unwrap())
    }

    fn gaussian_inv(z: &Gaussian) -> Gaussian {
        let n = z.norm_sqr();
        z.conj().scale_rational(&(BigRational::one() / n))
    }

    fn naive_rank(rows: &[Vec<Gaussian>]) -> usize {
        if rows.is_empty() || rows[0].is_empty() {
            return 0;
        }
        let mut m: Vec<Vec<Gaussian>> = rows.to_vec();
        let (nr, nc) = (m.len(), m[0].len());
        let mut rank = 0;
        for col in 0..nc {
            let Some(pr) = (rank..nr).find(|&i| !m[i][col].is_zero()) else {
                continue;
            };
            m.swap(rank, pr);
            let inv = gaussian_inv(&m[rank][col]);
            for i in 0..nr {
                if i == rank || m[i][col].is_zero() {
                    continue;
                }
                let f = m[i][col].clone() * inv.clone();
                for j in col..nc {
                    m[i][j] = m[i][j].clone() - m[rank][j].clone() * f.clone();
                }
            }
            rank += 1;
            if rank == nr {
                break;
            }
        }
        rank
    }

    fn random_gaussian(rng: &mut ChaCha8Rng) -> Gaussian {
        Gaussian::complex_ratio(
            rng.gen_range(-3..=3),
            rng.gen_range(1..=3),
            rng.gen_range(-2..=2),
            rng.gen_range(1..=2),
        )
    }

    fn random_elem(group: &Arc<FiniteGroup>, rng: &mut ChaCha8Rng) -> AlgebraElem {
        let coeffs = (0..group.order())
            .map(|_| {
                if rng.gen_bool(0.5) {
                    Gaussian::zero()
                } else {
                    random_gaussian(rng)
                }
            })
            .collect();
        AlgebraElem::from_coeffs(group.clone(), coeffs)
    }

    fn matmul(a: &[Vec<Gaussian>], b: &[Vec<Gaussian>]) -> Vec<Vec<Gaussian>> {
        let n = a.len();
        let mut out = vec![vec![Gaussian::zero(); n]; n];
        for r in 0..n {
            for k in 0..n {
                if a[r][k].is_zero() {
                    continue;
                }
                for c in 0..n {
                    out[r][c] += &(a[r][k].clone() * b[k][c].clone());
                }
            }
        }
        out
    }

    #[test]
    fn regular_rep_of_identity_is_identity_matrix() {
        let g = s3();
        let rep = regular_representation(&AlgebraElem::one(g.clone()));
        for r in 0..6 {
            for c in 0..6 {
                let expect = if r == c {
                    Gaussian::one()
                } else {
                    Gaussian::zero()
                };
                assert_eq!(rep[r][c], expect);
            }
        }
    }

    #[test]
    fn regular_rep_of_averaging_idempotent_on_c2() {
        let g = c2();
        let avg = AlgebraElem::averaging_idempotent(g.clone(), &[0, 1]);
        let rep = regular_representation(&avg);
        let half = Gaussian::ratio(1, 2);
        assert_eq!(rep, vec![vec![half.clone(), half.clone()], vec![half.clone(), half]]);
    }

    #[test]
    fn regular_rep_is_multiplicative() {
        let g = s3();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let x = random_elem(&g, &mut rng);
            let y = random_elem(&g, &mut rng);
            let lhs = regular_representation(&x.mul(&y));
            let rhs = matmul(&regular_representation(&x), &regular_representation(&y));
            assert_eq!(lhs, rhs);
        }
    }

    #[test]
    fn exact_rank_agrees_with_naive_elimination() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for trial in 0..60 {
            let nr = rng.gen_range(1..=6);
            let nc = rng.gen_range(1..=7);
            let mut rows: Vec<Vec<Gaussian>> = (0..nr)
                .map(|_| {
                    (0..nc)
                        .map(|_| {
                            if rng.gen_bool(0.35) {
                                Gaussian::zero()
                            } else {
                                random_gaussian(&mut rng)
                            }
                        })
                        .collect()
                })
                .collect();
            if nr >= 2 && rng.gen_bool(0.3) {
                rows[1] = rows[0].clone();
            }
            if nr >= 3 && rng.gen_bool(0.2) {
                rows[2] = vec![Gaussian::zero(); nc];
            }
            assert_eq!(
                exact_rank(&rows),
                naive_rank(&rows),
                "trial {trial} disagreed"
            );
        }
    }

    #[test]
    fn exact_rank_pinned_values() {
        let half = Gaussian::ratio(1, 2);
        let avg = vec![
            vec![half.clone(), half.clone()],
            vec![half.clone(), half],
        ];
        assert_eq!(exact_rank(&avg), 1);
        let zero = vec![vec![Gaussian::zero(); 3]; 2];
        assert_eq!(exact_rank(&zero), 0);
        let eye: Vec<Vec<Gaussian>> = (0..4)
            .map(|r| {
                (0..4)
                    .map(|c| if r == c { Gaussian::one() } else { Gaussian::zero() })
                    .collect()
            })
            .collect();
        assert_eq!(exact_rank(&eye), 4);
        let complex = vec![
            vec![Gaussian::one(), Gaussian::i()],
            vec![Gaussian::i(), -Gaussian::one()],
        ];
        assert_eq!(exact_rank(&complex), 1);
    }

    #[test]
    fn vn_dimension_of_averaging_projection_on_c2() {
        let g = c2();
        let mut p = HModuleMatrix::zero(g.clone(), 1, 1);
        p.set(0, 0, AlgebraElem::averaging_idempotent(g.clone(), &[0, 1]));
        let s = p.scalar_matrix();
        assert!(s.is_h_equivariant());
        let half = BigRational::new(BigInt::from(1), BigInt::from(2));
        assert_eq!(vn_dimension(&s, Subspace::Kernel).unwrap(), half);
        assert_eq!(vn_dimension(&s, Subspace::Image).unwrap(), half);
    }

    #[test]
    fn vn_dimension_of_identity_and_zero() {
        let g = s3();
        let id = HModuleMatrix::identity(g.clone(), 3, 1).scalar_matrix();
        assert_eq!(
            vn_dimension(&id, Subspace::Image).unwrap(),
            BigRational::from_integer(BigInt::from(3))
        );
        let zero = HModuleMatrix::zero(g, 2, 1).scalar_matrix();
        assert_eq!(
            vn_dimension(&zero, Subspace::Kernel).unwrap(),
            BigRational::from_integer(BigInt::from(2))
        );
    }

    #[test]
    fn vn_dimension_rejects_non_equivariant_matrix() {
        let g = c2();
        let rows = vec![
            vec![Gaussian::one(), Gaussian::zero()],
            vec![Gaussian::zero(), Gaussian::zero()],
        ];
        let s = ScalarMatrix::from_rows(g, rows).unwrap();
        assert!(!s.is_h_equivariant());
        assert!(matches!(
            vn_dimension(&s, Subspace::Image),
            Err(IndexError::NotHEquivariant)
        ));
    }

    #[test]
    fn h_trace_of_identity_counts_summands() {
        let g = s3();
        let id = HModuleMatrix::identity(g, 3, 2);
        assert_eq!(id.h_trace(), Gaussian::from_int(6));
    }

    #[test]
    fn h_trace_is_cyclic() {
        let g = s3();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..5 {
            let mut a = HModuleMatrix::zero(g.clone(), 2, 1);
            let mut b = HModuleMatrix::zero(g.clone(), 2, 1);
            for r in 0..2 {
                for c in 0..2 {
                    a.set(r, c, random_elem(&g, &mut rng));
                    b.set(r, c, random_elem(&g, &mut rng));
                }
            }
            assert_eq!(a.mul(&b).h_trace(), b.mul(&a).h_trace());
        }
    }

    #[test]
    fn projection_check_reports_first_bad_entry() {
        let g = c2();
        // Idempotent but not self-adjoint.
        let mut upper = HModuleMatrix::zero(g.clone(), 2, 1);
        upper.set(0, 0, AlgebraElem::one(g.clone()));
        upper.set(0, 1, AlgebraElem::one(g.clone()));
        match upper.check_projection("A") {
            Err(IndexError::NotAProjection { which: "A", row: 0, col: 1 }) => {}
            other => panic!("unexpected {other:?}"),
        }
        // Self-adjoint but not idempotent.
        let mut flip = HModuleMatrix::zero(g.clone(), 1, 1);
        flip.set(0, 0, AlgebraElem::basis(g, 1));
        match flip.check_projection("B") {
            Err(IndexError::NotAProjection { which: "B", row: 0, col: 0 }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn h_index_of_equal_projections_is_zero() {
        let g = s3();
        let (p, _) = generate_projection_pair(&g, 2, 1, 42, 512).unwrap();
        let report = h_index(&p, &p).unwrap();
        assert!(report.equal);
        assert_eq!(report.trace_diff, "0");
        assert_eq!(report.index, "0");
        assert_eq!(report.dim_ker, "0");
        assert_eq!(report.dim_coker, "0");
    }

    #[test]
    fn h_index_rank_one_against_zero() {
        let g = c2();
        let p = HModuleMatrix::identity(g.clone(), 1, 1);
        let q = HModuleMatrix::zero(g, 1, 1);
        let report = h_index(&p, &q).unwrap();
        assert_eq!(report.trace_diff, "1");
        assert_eq!(report.dim_ker, "1");
        assert_eq!(report.dim_coker, "0");
        assert_eq!(report.index, "1");
        assert!(report.equal);
        assert_eq!(report.intermediate.trace_p_minus_pqp, "1");
        assert_eq!(report.intermediate.trace_q_minus_qpq, "0");
    }

    #[test]
    fn h_index_is_conjugation_invariant() {
        let g = s3();
        let mut rng = ChaCha8Rng::seed_from_u64(1234);
        let subgroups = all_subgroups(&g);
        let p = random_projection(&g, &subgroups, 2, 1, &mut rng);
        let w = random_monomial_unitary(&g, 2, 1, &mut rng);
        let q = w.mul(&p).mul(&w.adjoint());
        let report = h_index(&p, &q).unwrap();
        assert_eq!(report.trace_diff, "0");
        assert_eq!(report.index, "0");
        assert!(report.equal);
    }

    #[test]
    fn h_index_adds_across_direct_sums() {
        let g = s3();
        let (p1, q1) = generate_projection_pair(&g, 2, 1, 11, 512).unwrap();
        let (p2, q2) = generate_projection_pair(&g, 2, 1, 12, 512).unwrap();
        let d1 = h_index_data(&p1, &q1).unwrap();
        let d2 = h_index_data(&p2, &q2).unwrap();
        let total = h_index_data(&p1.direct_sum(&p2), &q1.direct_sum(&q2)).unwrap();
        assert_eq!(total.index, &d1.index + &d2.index);
        assert_eq!(total.dim_ker, &d1.dim_ker + &d2.dim_ker);
        assert_eq!(total.dim_coker, &d1.dim_coker + &d2.dim_coker);
        assert_eq!(total.trace_diff, d1.trace_diff + d2.trace_diff);
        assert!(total.equal);
    }

    #[test]
    fn generated_pairs_satisfy_trace_equals_index() {
        let g = s3();
        for seed in 0..20 {
            let (p, q) = generate_projection_pair(&g, 4, 2, seed, 512).unwrap();
            assert_ne!(p, q);
            let report = h_index(&p, &q).unwrap();
            assert!(report.equal, "seed {seed}: {report:?}");
        }
    }

    #[test]
    fn kasparov_check_on_orthogonal_projections() {
        let g = c2();
        let mut p = HModuleMatrix::zero(g.clone(), 2, 1);
        p.set(0, 0, AlgebraElem::one(g.clone()));
        let mut q = HModuleMatrix::zero(g.clone(), 2, 1);
        q.set(1, 1, AlgebraElem::one(g));
        let report = kasparov_compactness_check(&p, &q).unwrap();
        assert!(report.identity_ok);
        assert_eq!(report.rank_p_defect, 2);
        assert_eq!(report.rank_q_defect, 2);
        assert_eq!(report.rank_difference, 4);
        assert!(report.ok);
    }

    #[test]
    fn kasparov_check_on_generated_pairs() {
        let g = s3();
        for seed in 100..110 {
            let (p, q) = generate_projection_pair(&g, 3, 1, seed, 512).unwrap();
            let report = kasparov_compactness_check(&p, &q).unwrap();
            assert!(report.ok, "seed {seed}: {report:?}");
        }
    }

    #[test]
    fn padding_the_truncation_leaves_the_report_unchanged() {
        let g = s3();
        for seed in [3, 8, 21] {
            let (p, q) = generate_projection_pair(&g, 2, 2, seed, 512).unwrap();
            let extra = p.size();
            let padded = h_index(&p.pad_truncation(extra), &q.pad_truncation(extra)).unwrap();
            assert_eq!(padded, h_index(&p, &q).unwrap());
        }
    }

    #[test]
    fn budget_is_enforced() {
        let g = s3();
        match generate_projection_pair(&g, 4, 2, 1, 6) {
            Err(IndexError::BudgetExceeded { needed, budget: 6 }) => assert!(needed > 6),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn index_report_serializes_with_exact_fractions() {
        let g = c2();
        let mut p = HModuleMatrix::zero(g.clone(), 1, 1);
        p.set(0, 0, AlgebraElem::averaging_idempotent(g.clone(), &[0, 1]));
        let q = HModuleMatrix::zero(g, 1, 1);
        let report = h_index(&p, &q).unwrap();
        assert_eq!(report.trace_diff, "1/2");
        assert_eq!(report.dim_ker, "1/2");
        assert_eq!(report.index, "1/2");
        assert!(report.equal);
        let json = serde_json::to_string(&report).unwrap();
        assert!(json.contains("\"trace_diff\":\"1/2\""));
        assert!(json.contains("\"intermediate\""));
        let back: IndexReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, report);
    }

    #[test]
    fn scalar_expansion_is_always_equivariant() {
        let g = s3();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mut a = HModuleMatrix::zero(g.clone(), 2, 1);
        for r in 0..2 {
            for c in 0..2 {
                a.set(r, c, random_elem(&g, &mut rng));
            }
        }
        assert!(a.scalar_matrix().is_h_equivariant());
    }

    #[test]
    fn vn_dimension_of_order_three_averaging_is_a_third() {
        let g = s3();
        let mut p = HModuleMatrix::zero(g.clone(), 1, 1);
        p.set(0, 0, AlgebraElem::averaging_idempotent(g.clone(), &[0, 3, 4]));
        let s = p.scalar_matrix();
        let dim = vn_dimension(&s, Subspace::Image).unwrap();
        assert_eq!(dim, BigRational::new(BigInt::from(1), BigInt::from(3)));
    }
}
