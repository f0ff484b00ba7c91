//! Operators on the two tree modules and the trace-transfer identity.
//!
//! The vertex module is the free module over the finite-group algebra of H
//! with one generator per tree vertex; the edge module has one generator per
//! edge plus a formal star point. A group-ring element a lifts to both: on
//! vertices (g, v) -> g·v with coefficient at alpha(g); on edges likewise,
//! except the star column is sent to zero. The vertex-to-edge matching phi
//! identifies the two modules (base vertex to star, any other vertex to the
//! last edge on its base path), and the defect
//!
//! ```text
//! D(a) = a_Delta - phi^* a_Omega phi
//! ```
//!
//! is finitely supported: its nonzero columns sit on the geodesics from the
//! base vertex to its translates under supp(a). Summing the canonical trace
//! of the diagonal recovers the group-ring trace: tr_H D(a) = tr_G(a).
//!
//! Everything here is exact; the only approximation anywhere is the choice
//! of which columns to materialize, and that set is always a proven superset
//! of the support.

use crate::algebra::{AlgebraElem, GroupRingElement};
use crate::group::FiniteGroup;
use crate::scalar::Gaussian;
use crate::tree::{JvImage, Tree, TreeEdge, TreeError, TreeVertex};
use crate::words::WordError;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Debug;
use std::sync::Arc;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OperatorError {
    #[error("operators live over different coefficient groups")]
    GroupMismatch,
    #[error("replication factor must be at least 1")]
    ZeroReplication,
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Word(#[from] WordError),
}

/// Generator index of the edge module: the formal star point, then edges.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum OmegaKey {
    Star,
    Edge(TreeEdge),
}

/// Finitely supported vector with coefficients in a finite-group algebra.
#[derive(Clone, PartialEq, Eq)]
pub struct HVector<K: Ord + Clone> {
    group: Arc<FiniteGroup>,
    entries: BTreeMap<K, AlgebraElem>,
}

impl<K: Ord + Clone + Debug> Debug for HVector<K> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:?}", self.entries)
    }
}

impl<K: Ord + Clone + Debug> HVector<K> {
    pub fn zero(group: Arc<FiniteGroup>) -> Self {
        HVector { group, entries: BTreeMap::new() }
    }

    pub fn basis(group: Arc<FiniteGroup>, key: K) -> Self {
        let mut v = Self::zero(group.clone());
        v.accumulate(key, AlgebraElem::one(group));
        v
    }

    pub fn group(&self) -> &Arc<FiniteGroup> {
        &self.group
    }

    pub fn accumulate(&mut self, key: K, value: AlgebraElem) {
        if value.is_zero() {
            return;
        }
        match self.entries.entry(key) {
            std::collections::btree_map::Entry::Vacant(slot) => {
                slot.insert(value);
            }
            std::collections::btree_map::Entry::Occupied(mut slot) => {
                let sum = slot.get().add(&value);
                if sum.is_zero() {
                    slot.remove();
                } else {
                    *slot.get_mut() = sum;
                }
            }
        }
    }

    pub fn entry(&self, key: &K) -> Option<&AlgebraElem> {
        self.entries.get(key)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&K, &AlgebraElem)> {
        self.entries.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (k, v) in &other.entries {
            out.accumulate(k.clone(), v.clone());
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (k, v) in &other.entries {
            out.accumulate(k.clone(), v.neg());
        }
        out
    }

    pub fn scale(&self, s: &Gaussian) -> Self {
        let mut out = Self::zero(self.group.clone());
        for (k, v) in &self.entries {
            out.accumulate(k.clone(), v.scale(s));
        }
        out
    }

    /// Algebra-valued inner product, conjugate-linear in the left slot:
    /// sum over keys of x(k)^* · y(k).
    pub fn inner(&self, other: &Self) -> AlgebraElem {
        let mut acc = AlgebraElem::zero(self.group.clone());
        for (k, x) in &self.entries {
            if let Some(y) = other.entries.get(k) {
                acc = acc.add(&x.star().mul(y));
            }
        }
        acc
    }
}

/// Sparse column-major operator with entries in a finite-group algebra.
#[derive(Clone, PartialEq, Eq)]
pub struct HOperator<K: Ord + Clone> {
    group: Arc<FiniteGroup>,
    cols: BTreeMap<K, BTreeMap<K, AlgebraElem>>,
}

impl<K: Ord + Clone + Debug> HOperator<K> {
    pub fn zero(group: Arc<FiniteGroup>) -> Self {
        HOperator { group, cols: BTreeMap::new() }
    }

    pub fn group(&self) -> &Arc<FiniteGroup> {
        &self.group
    }

    pub fn accumulate(&mut self, row: K, col: K, value: AlgebraElem) {
        if value.is_zero() {
            return;
        }
        let column = self.cols.entry(col.clone()).or_default();
        match column.entry(row) {
            std::collections::btree_map::Entry::Vacant(slot) => {
                slot.insert(value);
            }
            std::collections::btree_map::Entry::Occupied(mut slot) => {
                let sum = slot.get().add(&value);
                if sum.is_zero() {
                    slot.remove();
                } else {
                    *slot.get_mut() = sum;
                }
            }
        }
        if column.is_empty() {
            self.cols.remove(&col);
        }
    }

    pub fn entry(&self, row: &K, col: &K) -> Option<&AlgebraElem> {
        self.cols.get(col).and_then(|c| c.get(row))
    }

    pub fn column(&self, col: &K) -> Option<&BTreeMap<K, AlgebraElem>> {
        self.cols.get(col)
    }

    pub fn columns(&self) -> impl Iterator<Item = (&K, &BTreeMap<K, AlgebraElem>)> {
        self.cols.iter()
    }

    pub fn column_keys(&self) -> impl Iterator<Item = &K> {
        self.cols.keys()
    }

    pub fn is_zero(&self) -> bool {
        self.cols.values().all(BTreeMap::is_empty)
    }

    pub fn nnz(&self) -> usize {
        self.cols.values().map(BTreeMap::len).sum()
    }

    pub fn add(&self, other: &Self) -> Result<Self, OperatorError> {
        self.check_group(other)?;
        let mut out = self.clone();
        for (c, col) in &other.cols {
            for (r, v) in col {
                out.accumulate(r.clone(), c.clone(), v.clone());
            }
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self, OperatorError> {
        self.check_group(other)?;
        let mut out = self.clone();
        for (c, col) in &other.cols {
            for (r, v) in col {
                out.accumulate(r.clone(), c.clone(), v.neg());
            }
        }
        Ok(out)
    }

    pub fn scale(&self, s: &Gaussian) -> Self {
        let mut out = Self::zero(self.group.clone());
        for (c, col) in &self.cols {
            for (r, v) in col {
                out.accumulate(r.clone(), c.clone(), v.scale(s));
            }
        }
        out
    }

    /// Composition self ∘ other (other applied first). Exact whenever every
    /// nonzero column of `self` needed here is materialized, which holds for
    /// the finitely supported operators built in this module.
    pub fn compose(&self, other: &Self) -> Result<Self, OperatorError> {
        self.check_group(other)?;
        let mut out = Self::zero(self.group.clone());
        for (c, col) in &other.cols {
            for (k, inner) in col {
                if let Some(self_col) = self.cols.get(k) {
                    for (r, outer) in self_col {
                        out.accumulate(r.clone(), c.clone(), outer.mul(inner));
                    }
                }
            }
        }
        Ok(out)
    }

    /// Adjoint for the algebra-valued inner product: transpose plus the
    /// *-involution on every entry.
    pub fn adjoint(&self) -> Self {
        let mut out = Self::zero(self.group.clone());
        for (c, col) in &self.cols {
            for (r, v) in col {
                out.accumulate(c.clone(), r.clone(), v.star());
            }
        }
        out
    }

    pub fn apply(&self, x: &HVector<K>) -> HVector<K> {
        let mut out = HVector::zero(self.group.clone());
        for (k, xv) in x.iter() {
            if let Some(col) = self.cols.get(k) {
                for (r, m) in col {
                    out.accumulate(r.clone(), m.mul(xv));
                }
            }
        }
        out
    }

    /// Sum of the canonical traces of the diagonal entries.
    pub fn trace(&self) -> Gaussian {
        let mut acc = Gaussian::zero();
        for (c, col) in &self.cols {
            if let Some(d) = col.get(c) {
                acc = acc + d.trace();
            }
        }
        acc
    }

    pub fn restrict_columns(&self, keys: &BTreeSet<K>) -> Self {
        let mut out = Self::zero(self.group.clone());
        for (c, col) in &self.cols {
            if keys.contains(c) {
                for (r, v) in col {
                    out.accumulate(r.clone(), c.clone(), v.clone());
                }
            }
        }
        out
    }

    fn check_group(&self, other: &Self) -> Result<(), OperatorError> {
        if self.group.as_ref() != other.group.as_ref() {
            return Err(OperatorError::GroupMismatch);
        }
        Ok(())
    }
}

impl<K: Ord + Clone + Debug> Debug for HOperator<K> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "operator ({} nonzero entries)", self.nnz())?;
        for (c, col) in &self.cols {
            for (r, v) in col {
                writeln!(f, "  [{r:?}, {c:?}] = {v:?}")?;
            }
        }
        Ok(())
    }
}

/// r parallel copies of an operator, keyed by (copy index, original key).
pub fn replicate<K: Ord + Clone + Debug>(
    op: &HOperator<K>,
    r: usize,
) -> Result<HOperator<(usize, K)>, OperatorError> {
    if r == 0 {
        return Err(OperatorError::ZeroReplication);
    }
    let mut out = HOperator::zero(op.group().clone());
    for copy in 0..r {
        for (c, col) in op.columns() {
            for (row, v) in col {
                out.accumulate((copy, row.clone()), (copy, c.clone()), v.clone());
            }
        }
    }
    Ok(out)
}

/// One application of the vertex lift of a: (a_Delta x)(g·v) += a(g)·x(v),
/// with the group-ring coefficient pushed to alpha(g).
pub fn apply_delta(
    tree: &Tree,
    a: &GroupRingElement,
    x: &HVector<TreeVertex>,
) -> Result<HVector<TreeVertex>, OperatorError> {
    let h = tree.spec().h().clone();
    let mut out = HVector::zero(h.clone());
    for (g, coeff) in a.terms() {
        let alpha = AlgebraElem::basis(h.clone(), tree.spec().alpha(g)?).scale(coeff);
        for (v, xv) in x.iter() {
            out.accumulate(tree.act(g, v)?, alpha.mul(xv));
        }
    }
    Ok(out)
}

/// One application of the edge lift of a. The star generator is annihilated:
/// the lift is deliberately non-unital there.
pub fn apply_omega(
    tree: &Tree,
    a: &GroupRingElement,
    x: &HVector<OmegaKey>,
) -> Result<HVector<OmegaKey>, OperatorError> {
    let h = tree.spec().h().clone();
    let mut out = HVector::zero(h.clone());
    for (g, coeff) in a.terms() {
        let alpha = AlgebraElem::basis(h.clone(), tree.spec().alpha(g)?).scale(coeff);
        for (k, xv) in x.iter() {
            match k {
                OmegaKey::Star => {}
                OmegaKey::Edge(e) => {
                    out.accumulate(OmegaKey::Edge(tree.act_edge(g, e)?), alpha.mul(xv));
                }
            }
        }
    }
    Ok(out)
}

/// The matching as a module map: base vertex to star, any other vertex to
/// the last edge on its base path.
pub fn apply_phi(tree: &Tree, x: &HVector<TreeVertex>) -> HVector<OmegaKey> {
    let mut out = HVector::zero(x.group().clone());
    for (v, xv) in x.iter() {
        let key = match tree.jv_image(v) {
            JvImage::Star => OmegaKey::Star,
            JvImage::Edge(e) => OmegaKey::Edge(e),
        };
        out.accumulate(key, xv.clone());
    }
    out
}

/// Inverse of the matching: star to the base vertex, an edge to its far
/// endpoint.
pub fn apply_phi_star(tree: &Tree, x: &HVector<OmegaKey>) -> HVector<TreeVertex> {
    let mut out = HVector::zero(x.group().clone());
    for (k, xv) in x.iter() {
        let v = match k {
            OmegaKey::Star => tree.base_vertex(),
            OmegaKey::Edge(e) => tree.oriented_endpoints(e).1,
        };
        out.accumulate(v, xv.clone());
    }
    out
}

/// Superset of the nonzero columns of D(a): the base vertex together with
/// the geodesics to its translates under the inverses of supp(a).
pub fn defect_columns(
    tree: &Tree,
    a: &GroupRingElement,
) -> Result<BTreeSet<TreeVertex>, OperatorError> {
    let mut cols = BTreeSet::new();
    cols.insert(tree.base_vertex());
    for (g, _) in a.terms() {
        for v in tree.defect_candidates(g)? {
            cols.insert(v);
        }
    }
    Ok(cols)
}

/// Column of D(a) at v, computed directly from the two lifts.
fn defect_column(
    tree: &Tree,
    a: &GroupRingElement,
    v: &TreeVertex,
) -> Result<HVector<TreeVertex>, OperatorError> {
    let h = tree.spec().h().clone();
    let mut out = HVector::zero(h.clone());
    let matched = tree.jv_image(v);
    for (g, coeff) in a.terms() {
        let alpha = AlgebraElem::basis(h.clone(), tree.spec().alpha(g)?).scale(coeff);
        out.accumulate(tree.act(g, v)?, alpha.clone());
        if let JvImage::Edge(e) = &matched {
            let moved = tree.act_edge(g, e)?;
            let (_, far) = tree.oriented_endpoints(&moved);
            out.accumulate(far, alpha.neg());
        }
    }
    Ok(out)
}

/// The defect operator D(a) = a_Delta - phi^* a_Omega phi as a finite matrix.
/// Materialized on the candidate columns, which contain the support.
pub fn defect_operator(
    tree: &Tree,
    a: &GroupRingElement,
) -> Result<HOperator<TreeVertex>, OperatorError> {
    let h = tree.spec().h().clone();
    let mut op = HOperator::zero(h);
    for v in defect_columns(tree, a)? {
        let col = defect_column(tree, a, &v)?;
        for (w, entry) in col.iter() {
            op.accumulate(w.clone(), v.clone(), entry.clone());
        }
    }
    Ok(op)
}

/// Result of one trace-transfer verification.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct TransferReport {
    pub element: String,
    pub lhs: String,
    pub rhs: String,
    pub r: u64,
    pub equal: bool,
    pub support: usize,
    pub ms: u64,
}

/// Check tr_G(a) = tr_H(D(a)) exactly.
pub fn verify_transfer(
    tree: &Tree,
    a: &GroupRingElement,
    timing: bool,
) -> Result<TransferReport, OperatorError> {
    verify_transfer_replicated(tree, a, 1, timing)
}

/// Check tr_G(a) = (1/r)·tr_H(D_r(a)) where D_r acts on r parallel copies
/// of the vertex module.
pub fn verify_transfer_replicated(
    tree: &Tree,
    a: &GroupRingElement,
    r: usize,
    timing: bool,
) -> Result<TransferReport, OperatorError> {
    let start = Instant::now();
    let lhs = a.canonical_trace();
    let defect = defect_operator(tree, a)?;
    let total = if r == 1 {
        defect.trace()
    } else {
        replicate(&defect, r)?.trace()
    };
    let rhs = total.scale_ratio(1, r as i64);
    let equal = lhs == rhs;
    let ms = if timing { start.elapsed().as_millis() as u64 } else { 0 };
    Ok(TransferReport {
        element: a.display(),
        lhs: lhs.to_display_string(),
        rhs: rhs.to_display_string(),
        r: r as u64,
        equal,
        support: a.support_size(),
        ms,
    })
}

/// Result of one dual-route polynomial-calculus verification.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct PolyReport {
    pub element: String,
    pub poly: String,
    pub routes_match: bool,
    pub boundary_zero: bool,
    pub trace_lhs: String,
    pub trace_rhs: String,
    pub equal: bool,
    pub ms: u64,
}

fn poly_display(coeffs: &[Gaussian]) -> String {
    let mut parts = Vec::new();
    for (k, c) in coeffs.iter().enumerate() {
        if c.is_zero() {
            continue;
        }
        let body = match k {
            0 => c.to_display_string(),
            1 => format!("({})·x", c.to_display_string()),
            _ => format!("({})·x^{k}", c.to_display_string()),
        };
        parts.push(body);
    }
    if parts.is_empty() {
        "0".to_string()
    } else {
        parts.join(" + ")
    }
}

/// Compare two routes to the defect of p(a).
///
/// Route one evaluates p inside the group ring and takes the defect of the
/// result (its constant term removed, since the edge lift is non-unital at
/// the star point). Route two runs the functional calculus through the
/// lifts: p(a_Delta) - phi^* p(a_Omega) phi, column by column via repeated
/// application. The two must agree entry-for-entry, vanish on the boundary
/// of the candidate set, and their trace must equal tr_G(p(a)) - p(0).
pub fn polynomial_defect_check(
    tree: &Tree,
    a: &GroupRingElement,
    coeffs: &[Gaussian],
    timing: bool,
) -> Result<PolyReport, OperatorError> {
    let start = Instant::now();
    let spec = tree.spec().clone();
    let pa = a.eval_polynomial(coeffs)?;
    let c0 = coeffs.first().cloned().unwrap_or_else(Gaussian::zero);
    let shifted = pa.sub(&GroupRingElement::one(spec.clone()).scale(&c0));

    // route one: group-ring calculus, then one defect
    let route_one = defect_operator(tree, &shifted)?;

    // candidate columns for p(a) (they contain the support of both routes)
    let cols = defect_columns(tree, &pa)?;

    // route two: functional calculus through the lifts
    let h = tree.spec().h().clone();
    let mut route_two: HOperator<TreeVertex> = HOperator::zero(h.clone());
    for v in &cols {
        let col = route_two_column(tree, a, coeffs, v)?;
        for (w, entry) in col.iter() {
            route_two.accumulate(w.clone(), v.clone(), entry.clone());
        }
    }

    let routes_match = route_one == route_two;

    // the functional-calculus route must vanish just outside the candidates
    let mut boundary_zero = true;
    let mut boundary: BTreeSet<TreeVertex> = BTreeSet::new();
    for v in &cols {
        for n in tree.neighbors(v) {
            if !cols.contains(&n) {
                boundary.insert(n);
            }
        }
    }
    for v in &boundary {
        if !route_two_column(tree, a, coeffs, v)?.is_zero() {
            boundary_zero = false;
            break;
        }
    }

    let trace_lhs = route_two.trace() + c0.clone();
    let trace_rhs = pa.canonical_trace();
    let equal = routes_match && boundary_zero && trace_lhs == trace_rhs;
    let ms = if timing { start.elapsed().as_millis() as u64 } else { 0 };
    Ok(PolyReport {
        element: a.display(),
        poly: poly_display(coeffs),
        routes_match,
        boundary_zero,
        trace_lhs: trace_lhs.to_display_string(),
        trace_rhs: trace_rhs.to_display_string(),
        equal,
        ms,
    })
}

fn route_two_column(
    tree: &Tree,
    a: &GroupRingElement,
    coeffs: &[Gaussian],
    v: &TreeVertex,
) -> Result<HVector<TreeVertex>, OperatorError> {
    let h = tree.spec().h().clone();
    // p(a_Delta)·delta_v by repeated application
    let mut delta_acc = HVector::zero(h.clone());
    let mut delta_pow = HVector::basis(h.clone(), v.clone());
    for (k, c) in coeffs.iter().enumerate() {
        if k > 0 {
            delta_pow = apply_delta(tree, a, &delta_pow)?;
        }
        delta_acc = delta_acc.add(&delta_pow.scale(c));
    }
    // phi^*·p(a_Omega)·phi·delta_v the same way
    let mut omega_acc = HVector::zero(h.clone());
    let mut omega_pow = apply_phi(tree, &HVector::basis(h.clone(), v.clone()));
    for (k, c) in coeffs.iter().enumerate() {
        if k > 0 {
            omega_pow = apply_omega(tree, a, &omega_pow)?;
        }
        omega_acc = omega_acc.add(&omega_pow.scale(c));
    }
    Ok(delta_acc.sub(&apply_phi_star(tree, &omega_acc)))
}

/// Vertex lift of a as a finite matrix on the given columns.
pub fn delta_lift_on(
    tree: &Tree,
    a: &GroupRingElement,
    cols: &BTreeSet<TreeVertex>,
) -> Result<HOperator<TreeVertex>, OperatorError> {
    let h = tree.spec().h().clone();
    let mut op = HOperator::zero(h.clone());
    for v in cols {
        let col = apply_delta(tree, a, &HVector::basis(h.clone(), v.clone()))?;
        for (w, entry) in col.iter() {
            op.accumulate(w.clone(), v.clone(), entry.clone());
        }
    }
    Ok(op)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Gaussian;
    use crate::words::tests::{c2_z_spec, dihedral_spec, s3_fold_spec, s3_hnn_spec};
    use crate::words::{GroupSpec, Letter};

    fn tree_of(spec: GroupSpec) -> Tree {
        Tree::new(Arc::new(spec))
    }

    fn delta(tree: &Tree, letters: &[Letter]) -> GroupRingElement {
        let g = tree.spec().normalize(letters).unwrap();
        GroupRingElement::delta(tree.spec().clone(), g)
    }

    #[test]
    fn defect_of_identity_is_rank_one_at_the_base() {
        let tree = tree_of(dihedral_spec());
        let one = GroupRingElement::one(tree.spec().clone());
        let d = defect_operator(&tree, &one).unwrap();
        let v0 = tree.base_vertex();
        assert_eq!(d.nnz(), 1);
        assert_eq!(
            d.entry(&v0, &v0),
            Some(&AlgebraElem::one(tree.spec().h().clone()))
        );
        assert_eq!(d.trace(), Gaussian::one());
    }

    #[test]
    fn defect_of_the_stable_letter_has_trace_zero() {
        // H = C2, U = H, trivial conjugator: the tree is a line and t shifts it
        let tree = tree_of(c2_z_spec());
        let spec = tree.spec().clone();
        let a = delta(&tree, &[Letter::Stable]);
        let d = defect_operator(&tree, &a).unwrap();

        let one_h = AlgebraElem::one(spec.h().clone());
        let v0 = tree.base_vertex();
        let t = spec.normalize(&[Letter::Stable]).unwrap();
        let t_inv = spec.invert(&t).unwrap();
        let v_fwd = tree.act(&t, &v0).unwrap(); // t·H
        let v_back = tree.act(&t_inv, &v0).unwrap(); // t^-1·H

        assert_eq!(d.entry(&v_fwd, &v0), Some(&one_h));
        assert_eq!(d.entry(&v0, &v_back), Some(&one_h));
        assert_eq!(d.entry(&v_fwd, &v_back), Some(&one_h.neg()));
        assert_eq!(d.nnz(), 3);
        assert_eq!(d.trace(), Gaussian::zero());
    }

    #[test]
    fn defect_of_the_reflection_matches_the_hand_computation() {
        // infinite dihedral: a = delta_b, alpha(b) = s in H = C2
        let tree = tree_of(dihedral_spec());
        let spec = tree.spec().clone();
        let a = delta(&tree, &[Letter::B(1)]);
        let d = defect_operator(&tree, &a).unwrap();

        let h = spec.h().clone();
        let ds = AlgebraElem::basis(h.clone(), 1);
        let v0 = tree.base_vertex();
        let b = spec.normalize(&[Letter::B(1)]).unwrap();
        let v_b = tree
            .vertex(crate::tree::VertexKind::B, &spec.identity())
            .unwrap();
        let v_ba = tree.act(&b, &v0).unwrap();

        assert_eq!(d.entry(&v_ba, &v0), Some(&ds));
        assert_eq!(d.entry(&v_b, &v_b), Some(&ds));
        assert_eq!(d.entry(&v_ba, &v_b), Some(&ds.neg()));
        assert_eq!(d.entry(&v0, &v_ba), Some(&ds));
        assert_eq!(d.entry(&v_b, &v_ba), Some(&ds.neg()));
        assert_eq!(d.nnz(), 5);
        assert_eq!(d.trace(), Gaussian::zero());
        // this defect is self-adjoint, matching D(a)* = D(a*) with a* = a
        assert_eq!(d.adjoint(), d);
    }

    #[test]
    fn averaged_reflection_has_trace_one_half() {
        let tree = tree_of(dihedral_spec());
        let spec = tree.spec().clone();
        let half = Gaussian::ratio(1, 2);
        let a = GroupRingElement::one(spec.clone())
            .add(&delta(&tree, &[Letter::B(1)]))
            .scale(&half);
        let report = verify_transfer(&tree, &a, false).unwrap();
        assert!(report.equal);
        assert_eq!(report.lhs, "1/2");
        assert_eq!(report.rhs, "1/2");
        assert_eq!(report.r, 1);
        assert_eq!(report.ms, 0);
    }

    #[test]
    fn transfer_holds_for_random_words_on_both_shapes() {
        for spec in [s3_fold_spec(), s3_hnn_spec()] {
            let tree = Tree::new(Arc::new(spec));
            let ball = tree.spec().enumerate_ball(2, 100_000).unwrap();
            for (i, g) in ball.iter().enumerate().step_by(9) {
                let coeff = Gaussian::complex_ratio(i as i64 % 5 - 2, 3, i as i64 % 3, 2);
                let a = GroupRingElement::delta(tree.spec().clone(), g.clone())
                    .scale(&coeff)
                    .add(&GroupRingElement::one(tree.spec().clone()).scale(&Gaussian::ratio(1, 7)));
                let report = verify_transfer(&tree, &a, false).unwrap();
                assert!(report.equal, "transfer failed on {}", report.element);
                // tr_G picks out the identity coefficient
                assert_eq!(
                    report.lhs,
                    if g.is_identity() {
                        (coeff + Gaussian::ratio(1, 7)).to_display_string()
                    } else {
                        "1/7".to_string()
                    }
                );
            }
        }
    }

    #[test]
    fn replicated_defect_scales_the_trace() {
        let tree = tree_of(s3_hnn_spec());
        let a = delta(&tree, &[Letter::Stable])
            .add(&GroupRingElement::one(tree.spec().clone()).scale(&Gaussian::ratio(2, 3)));
        let d = defect_operator(&tree, &a).unwrap();
        let d3 = replicate(&d, 3).unwrap();
        assert_eq!(d3.trace(), d.trace().scale_ratio(3, 1));
        let report = verify_transfer_replicated(&tree, &a, 3, false).unwrap();
        assert!(report.equal);
        assert_eq!(report.r, 3);
        assert_eq!(report.lhs, "2/3");
    }

    #[test]
    fn defect_columns_really_contain_the_support() {
        let tree = tree_of(s3_fold_spec());
        let a = delta(&tree, &[Letter::A(3), Letter::B(2)])
            .add(&delta(&tree, &[Letter::B(4)]).scale(&Gaussian::i()));
        let cols = defect_columns(&tree, &a).unwrap();
        // columns on the boundary of the candidate set must be zero
        let mut checked = 0;
        for v in &cols {
            for n in tree.neighbors(v) {
                if !cols.contains(&n) {
                    assert!(defect_column(&tree, &a, &n).unwrap().is_zero());
                    checked += 1;
                }
            }
        }
        assert!(checked > 0);
    }

    #[test]
    fn matching_is_unitary_on_vectors() {
        let tree = tree_of(s3_hnn_spec());
        let h = tree.spec().h().clone();
        let ball = tree.ball(2, 10_000).unwrap();
        let mut x = HVector::zero(h.clone());
        let mut y = HVector::zero(h.clone());
        for (i, (v, _)) in ball.iter().enumerate() {
            x.accumulate(
                v.clone(),
                AlgebraElem::basis(h.clone(), i % h.order()).scale(&Gaussian::ratio(i as i64 + 1, 3)),
            );
            y.accumulate(
                v.clone(),
                AlgebraElem::basis(h.clone(), (i + 2) % h.order())
                    .scale(&Gaussian::complex_ratio(1, 2, i as i64 % 4, 5)),
            );
        }
        let phix = apply_phi(&tree, &x);
        let phiy = apply_phi(&tree, &y);
        assert_eq!(phix.inner(&phiy), x.inner(&y));
        // and phi^* phi is the identity on vectors
        assert_eq!(apply_phi_star(&tree, &phix), x);
    }

    #[test]
    fn vertex_lift_is_a_star_homomorphism_on_sampled_columns() {
        let tree = tree_of(s3_hnn_spec());
        let a = delta(&tree, &[Letter::Stable]).add(&delta(&tree, &[Letter::H(2)]));
        let b = delta(&tree, &[Letter::StableInv]).scale(&Gaussian::complex_ratio(1, 2, 1, 3));
        let ab = a.mul(&b).unwrap();

        let mut cols: BTreeSet<TreeVertex> = BTreeSet::new();
        for (v, _) in tree.ball(1, 1_000).unwrap() {
            cols.insert(v);
        }
        // widen so the composition is exact over the sampled columns
        let mut widened = cols.clone();
        for (g, _) in b.terms() {
            for v in &cols {
                widened.insert(tree.act(g, v).unwrap());
            }
        }
        let mat_a = delta_lift_on(&tree, &a, &widened).unwrap();
        let mat_b = delta_lift_on(&tree, &b, &cols).unwrap();
        let mat_ab = delta_lift_on(&tree, &ab, &cols).unwrap();
        assert_eq!(mat_a.compose(&mat_b).unwrap(), mat_ab);

        // adjoint compatibility through vectors: <a x, y> = <x, a* y>
        let h = tree.spec().h().clone();
        let x = HVector::basis(h.clone(), tree.base_vertex());
        let mut y = HVector::zero(h.clone());
        for (v, _) in tree.ball(2, 1_000).unwrap() {
            y.accumulate(v, AlgebraElem::basis(h.clone(), 3).scale(&Gaussian::ratio(1, 2)));
        }
        let astar = a.star().unwrap();
        let lhs = apply_delta(&tree, &a, &x).unwrap().inner(&y);
        let rhs = x.inner(&apply_delta(&tree, &astar, &y).unwrap());
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn defect_trace_is_cyclic() {
        let tree = tree_of(s3_fold_spec());
        let a = delta(&tree, &[Letter::A(3)])
            .add(&delta(&tree, &[Letter::B(2)]).scale(&Gaussian::ratio(1, 2)));
        let b = delta(&tree, &[Letter::B(4), Letter::A(2)])
            .add(&GroupRingElement::one(tree.spec().clone()).scale(&Gaussian::i()));
        let da = defect_operator(&tree, &a).unwrap();
        let db = defect_operator(&tree, &b).unwrap();
        assert_eq!(
            da.compose(&db).unwrap().trace(),
            db.compose(&da).unwrap().trace()
        );
    }

    #[test]
    fn polynomial_routes_agree_on_both_shapes() {
        for spec in [s3_fold_spec(), s3_hnn_spec()] {
            let tree = Tree::new(Arc::new(spec));
            let a = match tree.spec().as_ref() {
                GroupSpec::Amalgam(_) => delta(&tree, &[Letter::A(3), Letter::B(2)])
                    .add(&delta(&tree, &[Letter::B(4)]))
                    .scale(&Gaussian::ratio(1, 2)),
                GroupSpec::Hnn(_) => delta(&tree, &[Letter::Stable])
                    .add(&delta(&tree, &[Letter::StableInv]))
                    .scale(&Gaussian::ratio(1, 2)),
            };
            // p(x) = 1/3 - x + 2x^2
            let coeffs = [
                Gaussian::ratio(1, 3),
                Gaussian::from_int(-1),
                Gaussian::from_int(2),
            ];
            let report = polynomial_defect_check(&tree, &a, &coeffs, false).unwrap();
            assert!(report.routes_match, "routes disagree: {report:?}");
            assert!(report.boundary_zero);
            assert!(report.equal, "trace identity failed: {report:?}");
        }
    }

    #[test]
    fn transfer_report_serializes_with_stable_field_names() {
        let tree = tree_of(c2_z_spec());
        let a = GroupRingElement::one(tree.spec().clone());
        let report = verify_transfer(&tree, &a, false).unwrap();
        let json = serde_json::to_string(&report).unwrap();
        let mut last = 0;
        for field in ["\"element\"", "\"lhs\"", "\"rhs\"", "\"r\"", "\"equal\"", "\"support\"", "\"ms\""] {
            let at = json.find(field).unwrap_or_else(|| panic!("missing {field}"));
            assert!(at > last || last == 0, "field {field} out of order in {json}");
            last = at;
        }
        assert!(json.contains("\"lhs\":\"1\""));
        assert!(json.contains("\"equal\":true"));
        let back: TransferReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, report);
    }
}
