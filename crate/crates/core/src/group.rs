//! Finite groups as validated Cayley tables.
//!
//! Convention fixed across the crate: element 0 is the identity. Tables whose
//! identity sits elsewhere are relabeled on ingestion by swapping index 0 with
//! the identity. `table[a][b]` stores a·b.

use std::collections::{BTreeSet, VecDeque};
use std::sync::Arc;
use thiserror::Error;

pub type Elem = usize;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GroupError {
    #[error("table is not square: row {row} has length {len}, expected {order}")]
    NotSquare { row: usize, len: usize, order: usize },
    #[error("entry out of range at ({a}, {b}): {value} >= {order}")]
    EntryOutOfRange { a: Elem, b: Elem, value: usize, order: usize },
    #[error("no two-sided identity element")]
    NoIdentity,
    #[error("element {0} has no inverse")]
    NoInverse(Elem),
    #[error("not associative at ({a}, {b}, {c}): ({a}·{b})·{c} != {a}·({b}·{c})")]
    NotAssociative { a: Elem, b: Elem, c: Elem },
    #[error("empty table")]
    Empty,
    #[error("element index {0} out of range for group of order {1}")]
    ElementOutOfRange(Elem, usize),
    #[error("set {{{witness}, ...}} is not closed under the group operation")]
    NotClosed { witness: Elem },
    #[error("permutation {index} is not a bijection on {degree} points")]
    BadPermutation { index: usize, degree: usize },
    #[error("permutation generators have mismatched degrees")]
    MixedDegrees,
    #[error("label list has length {got}, expected {want}")]
    BadLabels { got: usize, want: usize },
    #[error("map image {value} out of range for target of order {order}")]
    ImageOutOfRange { value: Elem, order: usize },
    #[error("map is not a homomorphism at ({a}, {b})")]
    NotHomomorphism { a: Elem, b: Elem },
    #[error("map has wrong domain length {got}, expected {want}")]
    BadDomain { got: usize, want: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiniteGroup {
    order: usize,
    table: Vec<Elem>,
    inverses: Vec<Elem>,
    labels: Option<Vec<String>>,
}

impl FiniteGroup {
    /// Validate a Cayley table: square, in-range, two-sided identity, inverses,
    /// associativity on all triples. If the identity is not at index 0 the
    /// whole table is relabeled so that it is.
    pub fn from_table(rows: Vec<Vec<usize>>) -> Result<Self, GroupError> {
        let order = rows.len();
        if order == 0 {
            return Err(GroupError::Empty);
        }
        for (row, r) in rows.iter().enumerate() {
            if r.len() != order {
                return Err(GroupError::NotSquare { row, len: r.len(), order });
            }
            for (b, &v) in r.iter().enumerate() {
                if v >= order {
                    return Err(GroupError::EntryOutOfRange { a: row, b, value: v, order });
                }
            }
        }
        let mut rows = rows;
        let identity = (0..order)
            .find(|&e| (0..order).all(|a| rows[e][a] == a && rows[a][e] == a))
            .ok_or(GroupError::NoIdentity)?;
        if identity != 0 {
            let perm: Vec<usize> = (0..order)
                .map(|x| if x == 0 { identity } else if x == identity { 0 } else { x })
                .collect();
            // perm is an involution, so it is its own inverse relabeling
            let old = rows;
            rows = vec![vec![0; order]; order];
            for a in 0..order {
                for b in 0..order {
                    rows[a][b] = perm[old[perm[a]][perm[b]]];
                }
            }
        }
        let mut inverses = vec![usize::MAX; order];
        for a in 0..order {
            match (0..order).find(|&b| rows[a][b] == 0 && rows[b][a] == 0) {
                Some(b) => inverses[a] = b,
                None => return Err(GroupError::NoInverse(a)),
            }
        }
        for a in 0..order {
            for b in 0..order {
                let ab = rows[a][b];
                for c in 0..order {
                    if rows[ab][c] != rows[a][rows[b][c]] {
                        return Err(GroupError::NotAssociative { a, b, c });
                    }
                }
            }
        }
        let table = rows.into_iter().flatten().collect();
        Ok(FiniteGroup { order, table, inverses, labels: None })
    }

    /// Close a set of permutations (one-line notation, all of the same degree)
    /// under composition and return the resulting group. Elements are ordered
    /// lexicographically by one-line notation, which puts the identity at 0.
    /// Composition convention: (p·q)(x) = p(q(x)).
    pub fn from_permutations(gens: &[Vec<usize>]) -> Result<Self, GroupError> {
        let degree = gens.first().map(|g| g.len()).unwrap_or(0);
        if degree == 0 {
            return Err(GroupError::Empty);
        }
        for (index, g) in gens.iter().enumerate() {
            if g.len() != degree {
                return Err(GroupError::MixedDegrees);
            }
            let mut seen = vec![false; degree];
            for &x in g {
                if x >= degree || seen[x] {
                    return Err(GroupError::BadPermutation { index, degree });
                }
                seen[x] = true;
            }
        }
        let identity: Vec<usize> = (0..degree).collect();
        let mut elements: BTreeSet<Vec<usize>> = BTreeSet::new();
        elements.insert(identity.clone());
        let mut queue: VecDeque<Vec<usize>> = VecDeque::new();
        queue.push_back(identity);
        while let Some(p) = queue.pop_front() {
            for g in gens {
                let composed: Vec<usize> = (0..degree).map(|x| g[p[x]]).collect();
                if elements.insert(composed.clone()) {
                    queue.push_back(composed);
                }
            }
        }
        let elements: Vec<Vec<usize>> = elements.into_iter().collect();
        let index_of = |p: &[usize]| elements.binary_search_by(|e| e.as_slice().cmp(p)).unwrap();
        let order = elements.len();
        let mut rows = vec![vec![0usize; order]; order];
        for (a, pa) in elements.iter().enumerate() {
            for (b, pb) in elements.iter().enumerate() {
                let composed: Vec<usize> = (0..degree).map(|x| pa[pb[x]]).collect();
                rows[a][b] = index_of(&composed);
            }
        }
        FiniteGroup::from_table(rows)
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self, GroupError> {
        if labels.len() != self.order {
            return Err(GroupError::BadLabels { got: labels.len(), want: self.order });
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn mul(&self, a: Elem, b: Elem) -> Elem {
        self.table[a * self.order + b]
    }

    pub fn inv(&self, a: Elem) -> Elem {
        self.inverses[a]
    }

    pub fn identity(&self) -> Elem {
        0
    }

    pub fn elements(&self) -> impl Iterator<Item = Elem> {
        0..self.order
    }

    pub fn label(&self, a: Elem) -> String {
        match &self.labels {
            Some(l) => l[a].clone(),
            None => format!("g{a}"),
        }
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn element_order(&self, a: Elem) -> usize {
        let mut x = a;
        let mut n = 1;
        while x != 0 {
            x = self.mul(x, a);
            n += 1;
        }
        n
    }

    pub fn conjugate(&self, g: Elem, x: Elem) -> Elem {
        self.mul(self.mul(g, x), self.inv(g))
    }
}

/// Subgroup of a shared parent group, stored as a sorted member list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Subgroup {
    parent: Arc<FiniteGroup>,
    members: Vec<Elem>,
}

impl Subgroup {
    /// Closure of `generators` inside `parent`. Empty input gives the trivial
    /// subgroup.
    pub fn generated(parent: Arc<FiniteGroup>, generators: &[Elem]) -> Result<Self, GroupError> {
        for &g in generators {
            if g >= parent.order() {
                return Err(GroupError::ElementOutOfRange(g, parent.order()));
            }
        }
        let mut members: BTreeSet<Elem> = BTreeSet::new();
        members.insert(0);
        let mut queue: VecDeque<Elem> = VecDeque::new();
        queue.push_back(0);
        while let Some(x) = queue.pop_front() {
            for &g in generators {
                for y in [parent.mul(x, g), parent.mul(x, parent.inv(g))] {
                    if members.insert(y) {
                        queue.push_back(y);
                    }
                }
            }
        }
        Ok(Subgroup { parent, members: members.into_iter().collect() })
    }

    /// Validate that a given member list is a subgroup (contains identity,
    /// closed under the operation; inverses follow by finiteness).
    pub fn from_members(parent: Arc<FiniteGroup>, members: &[Elem]) -> Result<Self, GroupError> {
        let mut sorted: Vec<Elem> = members.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        for &m in &sorted {
            if m >= parent.order() {
                return Err(GroupError::ElementOutOfRange(m, parent.order()));
            }
        }
        if sorted.first() != Some(&0) {
            return Err(GroupError::NoIdentity);
        }
        for &a in &sorted {
            for &b in &sorted {
                if sorted.binary_search(&parent.mul(a, b)).is_err() {
                    return Err(GroupError::NotClosed { witness: parent.mul(a, b) });
                }
            }
        }
        Ok(Subgroup { parent, members: sorted })
    }

    pub fn parent(&self) -> &Arc<FiniteGroup> {
        &self.parent
    }

    pub fn members(&self) -> &[Elem] {
        &self.members
    }

    pub fn order(&self) -> usize {
        self.members.len()
    }

    pub fn contains(&self, x: Elem) -> bool {
        self.members.binary_search(&x).is_ok()
    }

    /// Right-coset transversal: parent = ⊔ S·t over returned reps. Each rep is
    /// the minimal element of its coset, so reps[0] = 0, and the output is
    /// deterministic. Errors are impossible here because Lagrange holds by
    /// construction; the index is members-checked instead.
    pub fn right_transversal(&self) -> Vec<Elem> {
        self.coset_table().reps
    }

    /// Per-element right-coset decomposition data for S ≤ G:
    /// x = sub_part[x] · rep_of[x] with sub_part[x] ∈ S.
    pub fn coset_table(&self) -> CosetTable {
        let g = &self.parent;
        let n = g.order();
        let mut rep_of = vec![usize::MAX; n];
        let mut sub_part = vec![usize::MAX; n];
        let mut reps = Vec::new();
        for x in 0..n {
            if rep_of[x] != usize::MAX {
                continue;
            }
            // x is minimal in S·x since smaller elements are already claimed
            reps.push(x);
            for &s in &self.members {
                let m = g.mul(s, x);
                rep_of[m] = x;
                sub_part[m] = s;
            }
        }
        debug_assert_eq!(reps.len() * self.members.len(), n);
        CosetTable { rep_of, sub_part, reps }
    }

    /// Left-coset transversal: parent = ⊔ t·S, each rep minimal in its coset.
    pub fn left_transversal(&self) -> Vec<Elem> {
        let g = &self.parent;
        let mut claimed = vec![false; g.order()];
        let mut reps = Vec::new();
        for x in 0..g.order() {
            if claimed[x] {
                continue;
            }
            reps.push(x);
            for &s in &self.members {
                claimed[g.mul(x, s)] = true;
            }
        }
        debug_assert_eq!(reps.len(), self.index());
        reps
    }

    pub fn index(&self) -> usize {
        self.parent.order() / self.members.len()
    }
}

/// Right-coset decomposition of a parent group by a subgroup S:
/// every x factors uniquely as sub_part[x]·rep_of[x].
#[derive(Debug, Clone)]
pub struct CosetTable {
    pub rep_of: Vec<Elem>,
    pub sub_part: Vec<Elem>,
    pub reps: Vec<Elem>,
}

/// Total map between finite groups given by an image array, validated to be a
/// homomorphism on construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupHom {
    source: Arc<FiniteGroup>,
    target: Arc<FiniteGroup>,
    images: Vec<Elem>,
}

impl GroupHom {
    pub fn new(
        source: Arc<FiniteGroup>,
        target: Arc<FiniteGroup>,
        images: Vec<Elem>,
    ) -> Result<Self, GroupError> {
        if images.len() != source.order() {
            return Err(GroupError::BadDomain { got: images.len(), want: source.order() });
        }
        for &v in &images {
            if v >= target.order() {
                return Err(GroupError::ImageOutOfRange { value: v, order: target.order() });
            }
        }
        for a in source.elements() {
            for b in source.elements() {
                if images[source.mul(a, b)] != target.mul(images[a], images[b]) {
                    return Err(GroupError::NotHomomorphism { a, b });
                }
            }
        }
        Ok(GroupHom { source, target, images })
    }

    pub fn identity(group: Arc<FiniteGroup>) -> Self {
        let images = (0..group.order()).collect();
        GroupHom { source: group.clone(), target: group, images }
    }

    pub fn apply(&self, a: Elem) -> Elem {
        self.images[a]
    }

    pub fn source(&self) -> &Arc<FiniteGroup> {
        &self.source
    }

    pub fn target(&self) -> &Arc<FiniteGroup> {
        &self.target
    }

    pub fn images(&self) -> &[Elem] {
        &self.images
    }

    /// None if the map is injective on the given subgroup of the source;
    /// otherwise a witness pair (a, b), a != b, with equal images.
    pub fn injective_on(&self, sub: &Subgroup) -> Option<(Elem, Elem)> {
        let mut seen: Vec<Option<Elem>> = vec![None; self.target.order()];
        for &a in sub.members() {
            let v = self.images[a];
            if let Some(b) = seen[v] {
                return Some((b, a));
            }
            seen[v] = Some(a);
        }
        None
    }

    pub fn injective(&self) -> Option<(Elem, Elem)> {
        let full = Subgroup {
            parent: self.source.clone(),
            members: (0..self.source.order()).collect(),
        };
        self.injective_on(&full)
    }
}

/// All subgroups of `group`, each as a sorted member list, ordered by
/// (order, members). BFS over one-generator extensions; fine at desk scale.
pub fn all_subgroups(group: &Arc<FiniteGroup>) -> Vec<Subgroup> {
    let mut found: BTreeSet<Vec<Elem>> = BTreeSet::new();
    let trivial = vec![0];
    found.insert(trivial.clone());
    let mut queue: VecDeque<Vec<Elem>> = VecDeque::new();
    queue.push_back(trivial);
    while let Some(members) = queue.pop_front() {
        for x in group.elements() {
            if members.binary_search(&x).is_ok() {
                continue;
            }
            let mut gens = members.clone();
            gens.push(x);
            let bigger = Subgroup::generated(group.clone(), &gens).expect("in-range");
            if found.insert(bigger.members.clone()) {
                queue.push_back(bigger.members);
            }
        }
    }
    let mut subs: Vec<Vec<Elem>> = found.into_iter().collect();
    subs.sort_by_key(|m| (m.len(), m.clone()));
    subs.into_iter()
        .map(|members| Subgroup { parent: group.clone(), members })
        .collect()
}
