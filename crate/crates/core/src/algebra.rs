//! Group-algebra arithmetic with Gaussian-rational coefficients.
//!
//! Two flavours: [`AlgebraElem`] over a finite group (dense coefficient
//! vector, used as the matrix-entry algebra for operators and the index
//! checks) and [`GroupRingElement`] over an infinite spec group (finitely
//! supported map keyed by normal forms). Both carry the canonical trace,
//! the coefficient of the identity, which is what every verification in
//! this crate bottoms out in.

use crate::group::{Elem, FiniteGroup};
use crate::scalar::Gaussian;
use crate::words::{GroupSpec, NormalForm, WordError};
use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

/// Element of the group algebra of a finite group.
#[derive(Clone, PartialEq, Eq)]
pub struct AlgebraElem {
    group: Arc<FiniteGroup>,
    coeffs: Vec<Gaussian>,
}

impl AlgebraElem {
    pub fn zero(group: Arc<FiniteGroup>) -> Self {
        let coeffs = vec![Gaussian::zero(); group.order()];
        AlgebraElem { group, coeffs }
    }

    pub fn one(group: Arc<FiniteGroup>) -> Self {
        Self::basis(group, 0)
    }

    pub fn basis(group: Arc<FiniteGroup>, x: Elem) -> Self {
        let mut e = Self::zero(group);
        e.coeffs[x] = Gaussian::one();
        e
    }

    pub fn from_coeffs(group: Arc<FiniteGroup>, coeffs: Vec<Gaussian>) -> Self {
        assert_eq!(coeffs.len(), group.order());
        AlgebraElem { group, coeffs }
    }

    pub fn group(&self) -> &Arc<FiniteGroup> {
        &self.group
    }

    pub fn coeff(&self, x: Elem) -> &Gaussian {
        &self.coeffs[x]
    }

    pub fn coeffs(&self) -> &[Gaussian] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(Gaussian::is_zero)
    }

    pub fn support(&self) -> impl Iterator<Item = Elem> + '_ {
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(x, _)| x)
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.group.as_ref(), other.group.as_ref());
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a.clone() + b.clone())
            .collect();
        AlgebraElem { group: self.group.clone(), coeffs }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.group.as_ref(), other.group.as_ref());
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a.clone() - b.clone())
            .collect();
        AlgebraElem { group: self.group.clone(), coeffs }
    }

    pub fn neg(&self) -> Self {
        AlgebraElem {
            group: self.group.clone(),
            coeffs: self.coeffs.iter().map(|c| -c.clone()).collect(),
        }
    }

    pub fn scale(&self, s: &Gaussian) -> Self {
        AlgebraElem {
            group: self.group.clone(),
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    /// Convolution product.
    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.group.as_ref(), other.group.as_ref());
        let mut out = Self::zero(self.group.clone());
        for (x, cx) in self.coeffs.iter().enumerate() {
            if cx.is_zero() {
                continue;
            }
            for (y, cy) in other.coeffs.iter().enumerate() {
                if cy.is_zero() {
                    continue;
                }
                let z = self.group.mul(x, y);
                let add = cx * cy;
                out.coeffs[z] = out.coeffs[z].clone() + add;
            }
        }
        out
    }

    /// The *-involution: x -> x^-1 on the group, conjugation on coefficients.
    pub fn star(&self) -> Self {
        let mut out = Self::zero(self.group.clone());
        for (x, c) in self.coeffs.iter().enumerate() {
            out.coeffs[self.group.inv(x)] = c.conj();
        }
        out
    }

    /// Canonical normalized trace: the coefficient of the identity.
    pub fn trace(&self) -> Gaussian {
        self.coeffs[0].clone()
    }

    /// Averaging idempotent of a subgroup (given by its member list).
    pub fn averaging_idempotent(group: Arc<FiniteGroup>, members: &[Elem]) -> Self {
        let weight = Gaussian::ratio(1, members.len() as i64);
        let mut out = Self::zero(group);
        for &m in members {
            out.coeffs[m] = weight.clone();
        }
        out
    }
}

impl fmt::Debug for AlgebraElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (x, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "({})·{}", c.to_display_string(), self.group.label(x))?;
        }
        Ok(())
    }
}

/// Finitely supported element of the group ring of a spec group.
#[derive(Clone)]
pub struct GroupRingElement {
    spec: Arc<GroupSpec>,
    terms: BTreeMap<NormalForm, Gaussian>,
}

impl PartialEq for GroupRingElement {
    fn eq(&self, other: &Self) -> bool {
        self.spec.id() == other.spec.id() && self.terms == other.terms
    }
}

impl Eq for GroupRingElement {}

impl GroupRingElement {
    pub fn zero(spec: Arc<GroupSpec>) -> Self {
        GroupRingElement { spec, terms: BTreeMap::new() }
    }

    pub fn one(spec: Arc<GroupSpec>) -> Self {
        let e = spec.identity();
        Self::delta(spec, e)
    }

    pub fn delta(spec: Arc<GroupSpec>, g: NormalForm) -> Self {
        spec.check_form(&g).expect("form belongs to the spec");
        let mut terms = BTreeMap::new();
        terms.insert(g, Gaussian::one());
        GroupRingElement { spec, terms }
    }

    pub fn spec(&self) -> &Arc<GroupSpec> {
        &self.spec
    }

    pub fn terms(&self) -> impl Iterator<Item = (&NormalForm, &Gaussian)> {
        self.terms.iter()
    }

    pub fn support_size(&self) -> usize {
        self.terms.len()
    }

    pub fn coeff(&self, g: &NormalForm) -> Gaussian {
        self.terms.get(g).cloned().unwrap_or_else(Gaussian::zero)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    fn insert(&mut self, g: NormalForm, c: Gaussian) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(g) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let sum = o.get().clone() + c;
                if sum.is_zero() {
                    o.remove();
                } else {
                    *o.get_mut() = sum;
                }
            }
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.spec.id(), other.spec.id(), "group ring spec mismatch");
        let mut out = self.clone();
        for (g, c) in &other.terms {
            out.insert(g.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.spec.id(), other.spec.id(), "group ring spec mismatch");
        let mut out = self.clone();
        for (g, c) in &other.terms {
            out.insert(g.clone(), -c.clone());
        }
        out
    }

    pub fn scale(&self, s: &Gaussian) -> Self {
        if s.is_zero() {
            return Self::zero(self.spec.clone());
        }
        GroupRingElement {
            spec: self.spec.clone(),
            terms: self.terms.iter().map(|(g, c)| (g.clone(), c * s)).collect(),
        }
    }

    pub fn mul(&self, other: &Self) -> Result<Self, WordError> {
        assert_eq!(self.spec.id(), other.spec.id(), "group ring spec mismatch");
        let mut out = Self::zero(self.spec.clone());
        for (g1, c1) in &self.terms {
            for (g2, c2) in &other.terms {
                let g = self.spec.multiply(g1, g2)?;
                out.insert(g, c1 * c2);
            }
        }
        Ok(out)
    }

    pub fn star(&self) -> Result<Self, WordError> {
        let mut out = Self::zero(self.spec.clone());
        for (g, c) in &self.terms {
            out.insert(self.spec.invert(g)?, c.conj());
        }
        Ok(out)
    }

    /// Canonical trace on the group ring: the coefficient of the identity.
    pub fn canonical_trace(&self) -> Gaussian {
        self.coeff(&self.spec.identity())
    }

    /// Largest word length in the support.
    pub fn max_word_length(&self) -> usize {
        self.terms.keys().map(NormalForm::len).max().unwrap_or(0)
    }

    /// Evaluate a polynomial with Gaussian coefficients at this element:
    /// coefficients are listed from the constant term up.
    pub fn eval_polynomial(&self, coeffs: &[Gaussian]) -> Result<Self, WordError> {
        let mut out = Self::zero(self.spec.clone());
        let mut power = Self::one(self.spec.clone());
        for (k, c) in coeffs.iter().enumerate() {
            if k > 0 {
                power = power.mul(self)?;
            }
            out = out.add(&power.scale(c));
        }
        Ok(out)
    }

    pub fn display(&self) -> String {
        if self.terms.is_empty() {
            return "0".to_string();
        }
        self.terms
            .iter()
            .map(|(g, c)| format!("({})·{}", c.to_display_string(), self.spec.format_word(g)))
            .collect::<Vec<_>>()
            .join(" + ")
    }
}

impl fmt::Debug for GroupRingElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.display())
    }
}
