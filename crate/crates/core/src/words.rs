//! Normal forms for the two graph-of-groups shapes: a segment (amalgamated
//! free product A *_U B) and a loop (HNN extension of H over U).
//!
//! Amalgam elements are written u·t_1···t_k with u in the abstract edge group
//! U and the t_i alternating non-identity right-transversal reps of the two
//! vertex groups. HNN elements are written h_0·t^{e_1}·r_1···t^{e_k}·r_k with
//! r_i a right-transversal rep of U (after t) or of phi(U) (after t^-1), and
//! no pinch: the stable-letter relation is fixed as t·u·t^-1 = phi(u), so the
//! reducible subwords are t·u·t^-1 (u in U) and t^-1·v·t (v in phi(U)).
//!
//! Both normal forms are canonicalized by prepending letters on the left,
//! which touches only the head region and never cascades; a raw word of
//! length n normalizes in O(n) coset-table lookups.

use crate::group::{CosetTable, Elem, FiniteGroup, GroupError, GroupHom, Subgroup};
use std::cmp::Ordering;
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering as AtomicOrdering};
use std::sync::Arc;
use thiserror::Error;

static NEXT_SPEC_ID: AtomicU64 = AtomicU64::new(1);

fn fresh_spec_id() -> u64 {
    NEXT_SPEC_ID.fetch_add(1, AtomicOrdering::Relaxed)
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum WordError {
    #[error("letter {position} does not belong to this kind of spec")]
    LetterKindMismatch { position: usize },
    #[error("letter {position} references element {value}, out of range (order {order})")]
    LetterOutOfRange { position: usize, value: usize, order: usize },
    #[error("normal form belongs to a different spec")]
    SpecMismatch,
    #[error("ball of {needed} normal forms exceeds budget {budget}")]
    BudgetExceeded { needed: usize, budget: usize },
    #[error("cannot parse word token `{token}`")]
    BadToken { token: String },
    #[error("token `{token}` is ambiguous; prefix it with a:/b:/u:/h:")]
    AmbiguousToken { token: String },
    #[error(transparent)]
    Group(#[from] GroupError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Side {
    A,
    B,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::A => Side::B,
            Side::B => Side::A,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum StableSign {
    Pos,
    Neg,
}

impl StableSign {
    pub fn flip(self) -> StableSign {
        match self {
            StableSign::Pos => StableSign::Neg,
            StableSign::Neg => StableSign::Pos,
        }
    }
}

/// Raw word letter. A/B letters are arbitrary vertex-group elements of an
/// amalgam spec; H letters and stable letters belong to an HNN spec.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Letter {
    A(Elem),
    B(Elem),
    H(Elem),
    Stable,
    StableInv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AmalgamLetter {
    pub side: Side,
    pub rep: Elem,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HnnLetter {
    pub sign: StableSign,
    pub rep: Elem,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub(crate) enum WordRepr {
    Amalgam { head: Elem, letters: Vec<AmalgamLetter> },
    Hnn { head: Elem, letters: Vec<HnnLetter> },
}

/// Canonical word. Only spec operations construct these, so byte equality is
/// group-element equality (within one spec).
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct NormalForm {
    spec: u64,
    pub(crate) repr: WordRepr,
}

impl NormalForm {
    pub fn spec_id(&self) -> u64 {
        self.spec
    }

    /// Letter count (amalgam) or stable-letter count (HNN); both are the
    /// tree-distance-controlling quantity.
    pub fn len(&self) -> usize {
        match &self.repr {
            WordRepr::Amalgam { letters, .. } => letters.len(),
            WordRepr::Hnn { letters, .. } => letters.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_identity(&self) -> bool {
        match &self.repr {
            WordRepr::Amalgam { head, letters } => *head == 0 && letters.is_empty(),
            WordRepr::Hnn { head, letters } => *head == 0 && letters.is_empty(),
        }
    }
}

impl Ord for NormalForm {
    fn cmp(&self, other: &Self) -> Ordering {
        self.spec
            .cmp(&other.spec)
            .then(self.len().cmp(&other.len()))
            .then_with(|| match (&self.repr, &other.repr) {
                (
                    WordRepr::Amalgam { head: h1, letters: l1 },
                    WordRepr::Amalgam { head: h2, letters: l2 },
                ) => h1.cmp(h2).then_with(|| l1.cmp(l2)),
                (
                    WordRepr::Hnn { head: h1, letters: l1 },
                    WordRepr::Hnn { head: h2, letters: l2 },
                ) => h1.cmp(h2).then_with(|| l1.cmp(l2)),
                (WordRepr::Amalgam { .. }, WordRepr::Hnn { .. }) => Ordering::Less,
                (WordRepr::Hnn { .. }, WordRepr::Amalgam { .. }) => Ordering::Greater,
            })
    }
}

impl PartialOrd for NormalForm {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for NormalForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.repr {
            WordRepr::Amalgam { head, letters } => {
                write!(f, "u{head}")?;
                for l in letters {
                    write!(f, "·{}{}", if l.side == Side::A { 'a' } else { 'b' }, l.rep)?;
                }
            }
            WordRepr::Hnn { head, letters } => {
                write!(f, "h{head}")?;
                for l in letters {
                    write!(f, "·t{}r{}", if l.sign == StableSign::Pos { "" } else { "⁻" }, l.rep)?;
                }
            }
        }
        Ok(())
    }
}

/// Amalgam A *_U B together with the target group H of a homomorphism that is
/// injective on both vertex groups (alpha_a and alpha_b, agreeing on U).
pub struct AmalgamSpec {
    id: u64,
    u: Arc<FiniteGroup>,
    a: Arc<FiniteGroup>,
    b: Arc<FiniteGroup>,
    h: Arc<FiniteGroup>,
    embed_a: GroupHom,
    embed_b: GroupHom,
    alpha_a: GroupHom,
    alpha_b: GroupHom,
    cosets_a: CosetTable,
    cosets_b: CosetTable,
    left_reps_a: Vec<Elem>,
    left_reps_b: Vec<Elem>,
    embed_a_inv: Vec<Option<Elem>>,
    embed_b_inv: Vec<Option<Elem>>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SpecError {
    #[error("embedding into vertex group {side:?} is not injective: elements {w0} and {w1} collide")]
    EmbeddingNotInjective { side: Side, w0: Elem, w1: Elem },
    #[error("alpha is not injective on vertex group {side:?}: elements {w0} and {w1} collide")]
    AlphaNotInjective { side: Side, w0: Elem, w1: Elem },
    #[error("alpha_a∘embed_a and alpha_b∘embed_b disagree at edge-group element {witness}")]
    AlphaIncompatible { witness: Elem },
    #[error("hom has wrong source or target group")]
    HomShapeMismatch,
    #[error("conjugator {0} out of range")]
    ConjugatorOutOfRange(Elem),
    #[error("phi image list disagrees with conjugation by the conjugator at element {witness}")]
    PhiNotConjugation { witness: Elem },
    #[error(transparent)]
    Group(#[from] GroupError),
}

impl AmalgamSpec {
    pub fn new(
        u: Arc<FiniteGroup>,
        a: Arc<FiniteGroup>,
        b: Arc<FiniteGroup>,
        h: Arc<FiniteGroup>,
        embed_a: GroupHom,
        embed_b: GroupHom,
        alpha_a: GroupHom,
        alpha_b: GroupHom,
    ) -> Result<Self, SpecError> {
        for (hom, src, tgt) in [
            (&embed_a, &u, &a),
            (&embed_b, &u, &b),
            (&alpha_a, &a, &h),
            (&alpha_b, &b, &h),
        ] {
            if hom.source().as_ref() != src.as_ref() || hom.target().as_ref() != tgt.as_ref() {
                return Err(SpecError::HomShapeMismatch);
            }
        }
        if let Some((w0, w1)) = embed_a.injective() {
            return Err(SpecError::EmbeddingNotInjective { side: Side::A, w0, w1 });
        }
        if let Some((w0, w1)) = embed_b.injective() {
            return Err(SpecError::EmbeddingNotInjective { side: Side::B, w0, w1 });
        }
        // the vertex-stabilizer injectivity condition, checked on the whole
        // vertex groups (stabilizers are their conjugates)
        if let Some((w0, w1)) = alpha_a.injective() {
            return Err(SpecError::AlphaNotInjective { side: Side::A, w0, w1 });
        }
        if let Some((w0, w1)) = alpha_b.injective() {
            return Err(SpecError::AlphaNotInjective { side: Side::B, w0, w1 });
        }
        for x in u.elements() {
            if alpha_a.apply(embed_a.apply(x)) != alpha_b.apply(embed_b.apply(x)) {
                return Err(SpecError::AlphaIncompatible { witness: x });
            }
        }
        let image_a = Subgroup::from_members(a.clone(), embed_a.images())?;
        let image_b = Subgroup::from_members(b.clone(), embed_b.images())?;
        let left_reps_a = image_a.left_transversal();
        let left_reps_b = image_b.left_transversal();
        let cosets_a = image_a.coset_table();
        let cosets_b = image_b.coset_table();
        let mut embed_a_inv = vec![None; a.order()];
        for x in u.elements() {
            embed_a_inv[embed_a.apply(x)] = Some(x);
        }
        let mut embed_b_inv = vec![None; b.order()];
        for x in u.elements() {
            embed_b_inv[embed_b.apply(x)] = Some(x);
        }
        Ok(AmalgamSpec {
            id: fresh_spec_id(),
            u,
            a,
            b,
            h,
            embed_a,
            embed_b,
            alpha_a,
            alpha_b,
            cosets_a,
            cosets_b,
            left_reps_a,
            left_reps_b,
            embed_a_inv,
            embed_b_inv,
        })
    }

    /// Fold shape H *_U H: both vertex groups are `h`, both embeddings are the
    /// subgroup inclusion, and alpha is the identity on each factor.
    pub fn fold(h: Arc<FiniteGroup>, u_members_in_h: &[Elem]) -> Result<Self, SpecError> {
        let sub = Subgroup::from_members(h.clone(), u_members_in_h)?;
        let u_table: Vec<Vec<usize>> = sub
            .members()
            .iter()
            .map(|&x| {
                sub.members()
                    .iter()
                    .map(|&y| {
                        let prod = h.mul(x, y);
                        sub.members().binary_search(&prod).expect("closed")
                    })
                    .collect()
            })
            .collect();
        let u = Arc::new(FiniteGroup::from_table(u_table)?);
        let embed = GroupHom::new(u.clone(), h.clone(), sub.members().to_vec())?;
        let alpha = GroupHom::identity(h.clone());
        AmalgamSpec::new(
            u,
            h.clone(),
            h.clone(),
            h,
            embed.clone(),
            embed,
            alpha.clone(),
            alpha,
        )
    }

    fn group(&self, side: Side) -> &Arc<FiniteGroup> {
        match side {
            Side::A => &self.a,
            Side::B => &self.b,
        }
    }

    fn cosets(&self, side: Side) -> &CosetTable {
        match side {
            Side::A => &self.cosets_a,
            Side::B => &self.cosets_b,
        }
    }

    fn embed(&self, side: Side, x: Elem) -> Elem {
        match side {
            Side::A => self.embed_a.apply(x),
            Side::B => self.embed_b.apply(x),
        }
    }

    fn pull_back(&self, side: Side, x: Elem) -> Elem {
        let inv = match side {
            Side::A => &self.embed_a_inv,
            Side::B => &self.embed_b_inv,
        };
        inv[x].expect("coset sub-part lies in the embedded edge group")
    }

    pub fn edge_group(&self) -> &Arc<FiniteGroup> {
        &self.u
    }

    /// Image of an edge-group element in the chosen vertex group.
    pub fn embed_elem(&self, side: Side, u: Elem) -> Elem {
        self.embed(side, u)
    }

    pub fn vertex_group(&self, side: Side) -> &Arc<FiniteGroup> {
        self.group(side)
    }

    /// Right-coset reps (the letters of normal forms).
    pub fn transversal(&self, side: Side) -> &[Elem] {
        &self.cosets(side).reps
    }

    /// Left-coset reps (indexing the edges at a vertex of the tree).
    pub fn left_transversal(&self, side: Side) -> &[Elem] {
        match side {
            Side::A => &self.left_reps_a,
            Side::B => &self.left_reps_b,
        }
    }
}

/// HNN extension of H over U ≤ H with phi(u) = g·u·g^-1 for a fixed
/// conjugator g; relation t·u·t^-1 = phi(u).
pub struct HnnSpec {
    id: u64,
    h: Arc<FiniteGroup>,
    u: Subgroup,
    conjugator: Elem,
    phi: Vec<Option<Elem>>,
    phi_inv: Vec<Option<Elem>>,
    cosets_u: CosetTable,
    cosets_phi: CosetTable,
    left_reps_u: Vec<Elem>,
    left_reps_phi: Vec<Elem>,
}

impl HnnSpec {
    pub fn new(
        h: Arc<FiniteGroup>,
        u_members: &[Elem],
        conjugator: Elem,
    ) -> Result<Self, SpecError> {
        if conjugator >= h.order() {
            return Err(SpecError::ConjugatorOutOfRange(conjugator));
        }
        let u = Subgroup::from_members(h.clone(), u_members)?;
        let mut phi = vec![None; h.order()];
        let mut phi_inv = vec![None; h.order()];
        let mut phi_members = Vec::with_capacity(u.order());
        for &x in u.members() {
            let y = h.conjugate(conjugator, x);
            phi[x] = Some(y);
            phi_inv[y] = Some(x);
            phi_members.push(y);
        }
        let phi_image = Subgroup::from_members(h.clone(), &phi_members)?;
        let left_reps_u = u.left_transversal();
        let left_reps_phi = phi_image.left_transversal();
        let cosets_u = u.coset_table();
        let cosets_phi = phi_image.coset_table();
        Ok(HnnSpec {
            id: fresh_spec_id(),
            h,
            u,
            conjugator,
            phi,
            phi_inv,
            cosets_u,
            cosets_phi,
            left_reps_u,
            left_reps_phi,
        })
    }

    pub fn base_group(&self) -> &Arc<FiniteGroup> {
        &self.h
    }

    pub fn edge_subgroup(&self) -> &Subgroup {
        &self.u
    }

    /// Validates an externally supplied list of phi values, one per element
    /// of the paired iterator, against conjugation by the stable letter.
    pub fn check_phi_images(
        &self,
        pairs: impl IntoIterator<Item = (Elem, Elem)>,
    ) -> Result<(), SpecError> {
        for (x, given) in pairs {
            if self.phi(x) != Some(given) {
                return Err(SpecError::PhiNotConjugation { witness: x });
            }
        }
        Ok(())
    }

    pub fn conjugator(&self) -> Elem {
        self.conjugator
    }

    pub fn phi(&self, x: Elem) -> Option<Elem> {
        self.phi.get(x).copied().flatten()
    }

    /// Right-coset reps (the letters of normal forms): of U after t, of
    /// phi(U) after t^-1.
    pub fn transversal(&self, sign: StableSign) -> &[Elem] {
        match sign {
            StableSign::Pos => &self.cosets_u.reps,
            StableSign::Neg => &self.cosets_phi.reps,
        }
    }

    /// Left-coset reps (indexing the edges at a vertex of the tree).
    pub fn left_transversal(&self, sign: StableSign) -> &[Elem] {
        match sign {
            StableSign::Pos => &self.left_reps_u,
            StableSign::Neg => &self.left_reps_phi,
        }
    }
}

pub enum GroupSpec {
    Amalgam(AmalgamSpec),
    Hnn(HnnSpec),
}

impl GroupSpec {
    pub fn id(&self) -> u64 {
        match self {
            GroupSpec::Amalgam(s) => s.id,
            GroupSpec::Hnn(s) => s.id,
        }
    }

    /// Target group of alpha (the trace home).
    pub fn h(&self) -> &Arc<FiniteGroup> {
        match self {
            GroupSpec::Amalgam(s) => &s.h,
            GroupSpec::Hnn(s) => &s.h,
        }
    }

    pub fn identity(&self) -> NormalForm {
        match self {
            GroupSpec::Amalgam(_) => NormalForm {
                spec: self.id(),
                repr: WordRepr::Amalgam { head: 0, letters: Vec::new() },
            },
            GroupSpec::Hnn(_) => NormalForm {
                spec: self.id(),
                repr: WordRepr::Hnn { head: 0, letters: Vec::new() },
            },
        }
    }

    pub fn check_form(&self, x: &NormalForm) -> Result<(), WordError> {
        if x.spec != self.id() {
            return Err(WordError::SpecMismatch);
        }
        Ok(())
    }

    fn validate_letter(&self, position: usize, l: &Letter) -> Result<(), WordError> {
        match (self, l) {
            (GroupSpec::Amalgam(s), Letter::A(x)) => {
                if *x >= s.a.order() {
                    return Err(WordError::LetterOutOfRange {
                        position,
                        value: *x,
                        order: s.a.order(),
                    });
                }
            }
            (GroupSpec::Amalgam(s), Letter::B(x)) => {
                if *x >= s.b.order() {
                    return Err(WordError::LetterOutOfRange {
                        position,
                        value: *x,
                        order: s.b.order(),
                    });
                }
            }
            (GroupSpec::Hnn(s), Letter::H(x)) => {
                if *x >= s.h.order() {
                    return Err(WordError::LetterOutOfRange {
                        position,
                        value: *x,
                        order: s.h.order(),
                    });
                }
            }
            (GroupSpec::Hnn(_), Letter::Stable | Letter::StableInv) => {}
            _ => return Err(WordError::LetterKindMismatch { position }),
        }
        Ok(())
    }

    /// Normalize a raw word (letters are multiplied left to right).
    pub fn normalize(&self, word: &[Letter]) -> Result<NormalForm, WordError> {
        for (i, l) in word.iter().enumerate() {
            self.validate_letter(i, l)?;
        }
        let mut form = self.identity();
        for l in word.iter().rev() {
            self.prepend(&mut form, l);
        }
        Ok(form)
    }

    /// Left-multiply the canonical form by a single validated letter.
    fn prepend(&self, form: &mut NormalForm, letter: &Letter) {
        match (self, letter, &mut form.repr) {
            (GroupSpec::Amalgam(s), Letter::A(x), WordRepr::Amalgam { head, letters }) => {
                prepend_amalgam(s, Side::A, *x, head, letters)
            }
            (GroupSpec::Amalgam(s), Letter::B(x), WordRepr::Amalgam { head, letters }) => {
                prepend_amalgam(s, Side::B, *x, head, letters)
            }
            (GroupSpec::Hnn(s), Letter::H(x), WordRepr::Hnn { head, .. }) => {
                *head = s.h.mul(*x, *head);
            }
            (GroupSpec::Hnn(s), Letter::Stable, WordRepr::Hnn { head, letters }) => {
                prepend_stable(s, StableSign::Pos, head, letters)
            }
            (GroupSpec::Hnn(s), Letter::StableInv, WordRepr::Hnn { head, letters }) => {
                prepend_stable(s, StableSign::Neg, head, letters)
            }
            _ => unreachable!("letters validated against spec kind"),
        }
    }

    pub fn multiply(&self, x: &NormalForm, y: &NormalForm) -> Result<NormalForm, WordError> {
        self.check_form(x)?;
        self.check_form(y)?;
        let mut out = y.clone();
        match &x.repr {
            WordRepr::Amalgam { head, letters } => {
                for l in letters.iter().rev() {
                    let letter = match l.side {
                        Side::A => Letter::A(l.rep),
                        Side::B => Letter::B(l.rep),
                    };
                    self.prepend(&mut out, &letter);
                }
                if *head != 0 {
                    let s = match self {
                        GroupSpec::Amalgam(s) => s,
                        _ => unreachable!(),
                    };
                    self.prepend(&mut out, &Letter::A(s.embed(Side::A, *head)));
                }
            }
            WordRepr::Hnn { head, letters } => {
                for l in letters.iter().rev() {
                    if l.rep != 0 {
                        self.prepend(&mut out, &Letter::H(l.rep));
                    }
                    let letter = match l.sign {
                        StableSign::Pos => Letter::Stable,
                        StableSign::Neg => Letter::StableInv,
                    };
                    self.prepend(&mut out, &letter);
                }
                if *head != 0 {
                    self.prepend(&mut out, &Letter::H(*head));
                }
            }
        }
        Ok(out)
    }

    pub fn invert(&self, x: &NormalForm) -> Result<NormalForm, WordError> {
        self.check_form(x)?;
        let mut raw: Vec<Letter> = Vec::new();
        match (&x.repr, self) {
            (WordRepr::Amalgam { head, letters }, GroupSpec::Amalgam(s)) => {
                for l in letters.iter().rev() {
                    let g = s.group(l.side);
                    raw.push(match l.side {
                        Side::A => Letter::A(g.inv(l.rep)),
                        Side::B => Letter::B(g.inv(l.rep)),
                    });
                }
                raw.push(Letter::A(s.embed(Side::A, s.u.inv(*head))));
            }
            (WordRepr::Hnn { head, letters }, GroupSpec::Hnn(s)) => {
                for l in letters.iter().rev() {
                    raw.push(Letter::H(s.h.inv(l.rep)));
                    raw.push(match l.sign {
                        StableSign::Pos => Letter::StableInv,
                        StableSign::Neg => Letter::Stable,
                    });
                }
                raw.push(Letter::H(s.h.inv(*head)));
            }
            _ => unreachable!("check_form guarantees matching kinds"),
        }
        self.normalize(&raw)
    }

    /// Image of a word under the homomorphism to H determined by alpha on the
    /// vertex groups (amalgam) or by the identity on H plus stable letter ->
    /// conjugator (HNN).
    pub fn alpha(&self, x: &NormalForm) -> Result<Elem, WordError> {
        self.check_form(x)?;
        Ok(match (&x.repr, self) {
            (WordRepr::Amalgam { head, letters }, GroupSpec::Amalgam(s)) => {
                let mut acc = s.alpha_a.apply(s.embed(Side::A, *head));
                for l in letters {
                    let img = match l.side {
                        Side::A => s.alpha_a.apply(l.rep),
                        Side::B => s.alpha_b.apply(l.rep),
                    };
                    acc = s.h.mul(acc, img);
                }
                acc
            }
            (WordRepr::Hnn { head, letters }, GroupSpec::Hnn(s)) => {
                let mut acc = *head;
                for l in letters {
                    let g = match l.sign {
                        StableSign::Pos => s.conjugator,
                        StableSign::Neg => s.h.inv(s.conjugator),
                    };
                    acc = s.h.mul(s.h.mul(acc, g), l.rep);
                }
                acc
            }
            _ => unreachable!(),
        })
    }

    /// All normal forms with len ≤ max_length, sorted. Errors if the exact
    /// count exceeds `budget`.
    pub fn enumerate_ball(
        &self,
        max_length: usize,
        budget: usize,
    ) -> Result<Vec<NormalForm>, WordError> {
        let needed = self.ball_count(max_length);
        if needed > budget {
            return Err(WordError::BudgetExceeded { needed, budget });
        }
        let mut out: Vec<NormalForm> = Vec::with_capacity(needed);
        match self {
            GroupSpec::Amalgam(s) => {
                let heads: Vec<Elem> = s.u.elements().collect();
                let mut letters: Vec<AmalgamLetter> = Vec::new();
                for &head in &heads {
                    self.gen_amalgam(s, head, &mut letters, max_length, &mut out);
                }
            }
            GroupSpec::Hnn(s) => {
                let heads: Vec<Elem> = s.h.elements().collect();
                let mut letters: Vec<HnnLetter> = Vec::new();
                for &head in &heads {
                    self.gen_hnn(s, head, &mut letters, max_length, &mut out);
                }
            }
        }
        debug_assert_eq!(out.len(), needed);
        out.sort();
        Ok(out)
    }

    fn gen_amalgam(
        &self,
        s: &AmalgamSpec,
        head: Elem,
        letters: &mut Vec<AmalgamLetter>,
        remaining: usize,
        out: &mut Vec<NormalForm>,
    ) {
        out.push(NormalForm {
            spec: self.id(),
            repr: WordRepr::Amalgam { head, letters: letters.clone() },
        });
        if remaining == 0 {
            return;
        }
        for side in [Side::A, Side::B] {
            if let Some(last) = letters.last() {
                if last.side == side {
                    continue;
                }
            }
            for &rep in &s.cosets(side).reps {
                if rep == 0 {
                    continue;
                }
                letters.push(AmalgamLetter { side, rep });
                self.gen_amalgam(s, head, letters, remaining - 1, out);
                letters.pop();
            }
        }
    }

    fn gen_hnn(
        &self,
        s: &HnnSpec,
        head: Elem,
        letters: &mut Vec<HnnLetter>,
        remaining: usize,
        out: &mut Vec<NormalForm>,
    ) {
        out.push(NormalForm {
            spec: self.id(),
            repr: WordRepr::Hnn { head, letters: letters.clone() },
        });
        if remaining == 0 {
            return;
        }
        for sign in [StableSign::Pos, StableSign::Neg] {
            if let Some(last) = letters.last() {
                // Britton: a rep of 1 between opposite-sign stable letters pinches
                if last.rep == 0 && last.sign != sign {
                    continue;
                }
            }
            for &rep in s.transversal(sign) {
                letters.push(HnnLetter { sign, rep });
                self.gen_hnn(s, head, letters, remaining - 1, out);
                letters.pop();
            }
        }
    }

    /// Exact number of normal forms with len ≤ max_length.
    pub fn ball_count(&self, max_length: usize) -> usize {
        match self {
            GroupSpec::Amalgam(s) => {
                let na = s.cosets_a.reps.len() - 1;
                let nb = s.cosets_b.reps.len() - 1;
                // suffix counts by first side
                let mut start_a: usize = 1; // empty
                let mut start_b: usize = 1;
                let mut total: usize = 1;
                let mut last_a = 1usize; // sequences of current length starting with A
                let mut last_b = 1usize;
                for k in 1..=max_length {
                    let new_a = if k == 1 { na } else { na.saturating_mul(last_b) };
                    let new_b = if k == 1 { nb } else { nb.saturating_mul(last_a) };
                    last_a = new_a;
                    last_b = new_b;
                    total = total.saturating_add(new_a).saturating_add(new_b);
                    start_a = start_a.saturating_add(new_a);
                    start_b = start_b.saturating_add(new_b);
                }
                let _ = (start_a, start_b);
                s.u.order().saturating_mul(total)
            }
            GroupSpec::Hnn(s) => {
                let npos = s.cosets_u.reps.len();
                let nneg = s.cosets_phi.reps.len();
                // states: (sign, rep==identity?)
                let mut pos_id = 0usize;
                let mut pos_other = 0usize;
                let mut neg_id = 0usize;
                let mut neg_other = 0usize;
                let mut total = 1usize;
                for k in 1..=max_length {
                    let (p_id, p_other, n_id, n_other) = if k == 1 {
                        (1, npos - 1, 1, nneg - 1)
                    } else {
                        // appending Pos forbidden after (Neg, id); Neg forbidden after (Pos, id)
                        let from_pos_ok = pos_id + pos_other + neg_other;
                        let from_neg_ok = neg_id + neg_other + pos_other;
                        (
                            from_pos_ok,
                            from_pos_ok.saturating_mul(npos - 1),
                            from_neg_ok,
                            from_neg_ok.saturating_mul(nneg - 1),
                        )
                    };
                    pos_id = p_id;
                    pos_other = p_other;
                    neg_id = n_id;
                    neg_other = n_other;
                    total = total
                        .saturating_add(pos_id)
                        .saturating_add(pos_other)
                        .saturating_add(neg_id)
                        .saturating_add(neg_other);
                }
                s.h.order().saturating_mul(total)
            }
        }
    }

    /// Displayable token string for a normal form; round-trips through
    /// [`GroupSpec::parse_word`] + [`GroupSpec::normalize`].
    pub fn format_word(&self, x: &NormalForm) -> String {
        if x.is_identity() {
            return "e".to_string();
        }
        let mut tokens: Vec<String> = Vec::new();
        match (&x.repr, self) {
            (WordRepr::Amalgam { head, letters }, GroupSpec::Amalgam(s)) => {
                if *head != 0 {
                    tokens.push(format!("u:{}", s.u.label(*head)));
                }
                for l in letters {
                    let (prefix, g) = match l.side {
                        Side::A => ("a", &s.a),
                        Side::B => ("b", &s.b),
                    };
                    tokens.push(format!("{prefix}:{}", g.label(l.rep)));
                }
            }
            (WordRepr::Hnn { head, letters }, GroupSpec::Hnn(s)) => {
                if *head != 0 {
                    tokens.push(format!("h:{}", s.h.label(*head)));
                }
                for l in letters {
                    tokens.push(match l.sign {
                        StableSign::Pos => "t".to_string(),
                        StableSign::Neg => "t^-1".to_string(),
                    });
                    if l.rep != 0 {
                        tokens.push(format!("h:{}", s.h.label(l.rep)));
                    }
                }
            }
            _ => unreachable!(),
        }
        tokens.join(" ")
    }

    /// Parse a whitespace-separated word. Tokens: `e`; `t`, `t^-1` (HNN);
    /// `a:x`, `b:x`, `u:x`, `h:x` where x is a label or an element index;
    /// bare labels are accepted when they resolve in exactly one group.
    pub fn parse_word(&self, input: &str) -> Result<Vec<Letter>, WordError> {
        let mut letters = Vec::new();
        for token in input.split_whitespace() {
            if token == "e" {
                continue;
            }
            match self {
                GroupSpec::Hnn(s) => match token {
                    "t" => letters.push(Letter::Stable),
                    "t^-1" | "t^-" | "t-" => letters.push(Letter::StableInv),
                    _ => {
                        let body = token.strip_prefix("h:").unwrap_or(token);
                        let x = lookup(&s.h, body)
                            .ok_or_else(|| WordError::BadToken { token: token.into() })?;
                        letters.push(Letter::H(x));
                    }
                },
                GroupSpec::Amalgam(s) => {
                    if let Some(body) = token.strip_prefix("a:") {
                        let x = lookup(&s.a, body)
                            .ok_or_else(|| WordError::BadToken { token: token.into() })?;
                        letters.push(Letter::A(x));
                    } else if let Some(body) = token.strip_prefix("b:") {
                        let x = lookup(&s.b, body)
                            .ok_or_else(|| WordError::BadToken { token: token.into() })?;
                        letters.push(Letter::B(x));
                    } else if let Some(body) = token.strip_prefix("u:") {
                        let x = lookup(&s.u, body)
                            .ok_or_else(|| WordError::BadToken { token: token.into() })?;
                        letters.push(Letter::A(s.embed(Side::A, x)));
                    } else {
                        // bare label: must resolve on exactly one side
                        let in_a = lookup_label(&s.a, token);
                        let in_b = lookup_label(&s.b, token);
                        match (in_a, in_b) {
                            (Some(x), None) => letters.push(Letter::A(x)),
                            (None, Some(x)) => letters.push(Letter::B(x)),
                            (Some(_), Some(_)) => {
                                return Err(WordError::AmbiguousToken { token: token.into() })
                            }
                            (None, None) => {
                                return Err(WordError::BadToken { token: token.into() })
                            }
                        }
                    }
                }
            }
        }
        Ok(letters)
    }

    /// Prefix of a canonical form (first `j` letters), itself canonical.
    pub(crate) fn prefix_form(&self, x: &NormalForm, j: usize) -> NormalForm {
        match &x.repr {
            WordRepr::Amalgam { head, letters } => NormalForm {
                spec: x.spec,
                repr: WordRepr::Amalgam { head: *head, letters: letters[..j].to_vec() },
            },
            WordRepr::Hnn { head, letters } => NormalForm {
                spec: x.spec,
                repr: WordRepr::Hnn { head: *head, letters: letters[..j].to_vec() },
            },
        }
    }

}

fn lookup(g: &FiniteGroup, token: &str) -> Option<Elem> {
    lookup_label(g, token).or_else(|| {
        // bare index, or the default g{n} label of an unlabeled group
        let body = token.strip_prefix('g').unwrap_or(token);
        let idx: usize = body.parse().ok()?;
        (idx < g.order()).then_some(idx)
    })
}

fn lookup_label(g: &FiniteGroup, token: &str) -> Option<Elem> {
    g.labels()?.iter().position(|l| l == token)
}

/// Left-multiply u·t_1···t_k by an element x of one vertex group.
fn prepend_amalgam(
    s: &AmalgamSpec,
    side: Side,
    x: Elem,
    head: &mut Elem,
    letters: &mut Vec<AmalgamLetter>,
) {
    let g = s.group(side);
    let cosets = s.cosets(side);
    // x·i(head) = i(u')·t' in the vertex group
    let prod = g.mul(x, s.embed(side, *head));
    let t = cosets.rep_of[prod];
    let u_new = s.pull_back(side, cosets.sub_part[prod]);
    if t == 0 {
        *head = u_new;
        return;
    }
    match letters.first() {
        Some(first) if first.side == side => {
            // merge t'·t_1 = i(w)·t'' within the same vertex group
            let merged = g.mul(t, first.rep);
            let t2 = cosets.rep_of[merged];
            let w = s.pull_back(side, cosets.sub_part[merged]);
            *head = s.u.mul(u_new, w);
            if t2 == 0 {
                letters.remove(0);
            } else {
                letters[0].rep = t2;
            }
        }
        _ => {
            *head = u_new;
            letters.insert(0, AmalgamLetter { side, rep: t });
        }
    }
}

/// Left-multiply h_0·t^{e_1}r_1··· by t or t^-1.
fn prepend_stable(
    s: &HnnSpec,
    sign: StableSign,
    head: &mut Elem,
    letters: &mut Vec<HnnLetter>,
) {
    match sign {
        StableSign::Pos => {
            // t·h = phi(u)·t·r with h = u·r, u in U, r in the U-transversal
            let r = s.cosets_u.rep_of[*head];
            let u = s.cosets_u.sub_part[*head];
            let moved = s.phi[u].expect("sub_part lies in U");
            match letters.first() {
                Some(first) if r == 0 && first.sign == StableSign::Neg => {
                    // t·t^-1 cancels; the popped letter's rep joins the head
                    let rep = first.rep;
                    letters.remove(0);
                    *head = s.h.mul(moved, rep);
                }
                _ => {
                    *head = moved;
                    letters.insert(0, HnnLetter { sign, rep: r });
                }
            }
        }
        StableSign::Neg => {
            // t^-1·h = u·t^-1·r with h = phi(u)·r, r in the phi(U)-transversal
            let r = s.cosets_phi.rep_of[*head];
            let v = s.cosets_phi.sub_part[*head];
            let moved = s.phi_inv[v].expect("sub_part lies in phi(U)");
            match letters.first() {
                Some(first) if r == 0 && first.sign == StableSign::Pos => {
                    let rep = first.rep;
                    letters.remove(0);
                    *head = s.h.mul(moved, rep);
                }
                _ => {
                    *head = moved;
                    letters.insert(0, HnnLetter { sign, rep: r });
                }
            }
        }
    }
}
