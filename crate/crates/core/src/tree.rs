//! Bass-Serre tree of a group spec, with the natural left action.
//!
//! Amalgam A *_U B: vertices are cosets gA and gB, the edge gU joins gA and
//! gB. HNN over U ≤ H with stable letter t: vertices are cosets gH, the edge
//! gU joins gH and g·t^-1·H (this is the orientation compatible with the
//! relation t·u·t^-1 = phi(u): u·t^-1 = t^-1·phi(u) keeps the far endpoint
//! well defined).
//!
//! Cosets are stored by their minimal representative in length-then-lex
//! order, so vertex and edge equality is plain struct equality. Base paths
//! are read off the letters of the minimal representative directly; no
//! search is involved, and geodesics between arbitrary vertices come from
//! splicing two base paths at their last common vertex.

use crate::words::{GroupSpec, Letter, NormalForm, Side, StableSign, WordError};
use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt::Write as _;
use std::sync::{Arc, RwLock};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TreeError {
    #[error("radius {given} is too small: the translated base vertex sits at distance {needed}")]
    RadiusTooSmall { needed: usize, given: usize },
    #[error("ball has more than {budget} vertices")]
    BudgetExceeded { budget: usize },
    #[error(transparent)]
    Word(#[from] WordError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum VertexKind {
    A,
    B,
    Base,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TreeVertex {
    pub kind: VertexKind,
    rep: NormalForm,
}

impl TreeVertex {
    pub fn rep(&self) -> &NormalForm {
        &self.rep
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TreeEdge {
    rep: NormalForm,
}

impl TreeEdge {
    pub fn rep(&self) -> &NormalForm {
        &self.rep
    }
}

/// Value of the vertex-to-edge matching: the base vertex goes to the formal
/// star point, every other vertex to the last edge on its base path.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum JvImage {
    Star,
    Edge(TreeEdge),
}

#[derive(Debug, Clone)]
pub struct GeodesicPath {
    pub vertices: Vec<TreeVertex>,
    pub edges: Vec<TreeEdge>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum CosetKind {
    VertexA,
    VertexB,
    VertexBase,
    Edge,
}

pub struct Tree {
    spec: Arc<GroupSpec>,
    elems_a: Vec<NormalForm>,
    elems_b: Vec<NormalForm>,
    elems_base: Vec<NormalForm>,
    elems_edge: Vec<NormalForm>,
    t_form: Option<NormalForm>,
    t_inv_form: Option<NormalForm>,
    canon: RwLock<HashMap<(CosetKind, NormalForm), NormalForm>>,
}

impl Tree {
    pub fn new(spec: Arc<GroupSpec>) -> Self {
        let mut elems_a = Vec::new();
        let mut elems_b = Vec::new();
        let mut elems_base = Vec::new();
        let mut elems_edge = Vec::new();
        let mut t_form = None;
        let mut t_inv_form = None;
        match spec.as_ref() {
            GroupSpec::Amalgam(s) => {
                for x in s.vertex_group(Side::A).elements() {
                    elems_a.push(spec.normalize(&[Letter::A(x)]).unwrap());
                }
                for x in s.vertex_group(Side::B).elements() {
                    elems_b.push(spec.normalize(&[Letter::B(x)]).unwrap());
                }
                for u in s.edge_group().elements() {
                    elems_edge.push(
                        spec.normalize(&[Letter::A(s.embed_elem(Side::A, u))]).unwrap(),
                    );
                }
            }
            GroupSpec::Hnn(s) => {
                for x in s.base_group().elements() {
                    elems_base.push(spec.normalize(&[Letter::H(x)]).unwrap());
                }
                for &u in s.edge_subgroup().members() {
                    elems_edge.push(spec.normalize(&[Letter::H(u)]).unwrap());
                }
                t_form = Some(spec.normalize(&[Letter::Stable]).unwrap());
                t_inv_form = Some(spec.normalize(&[Letter::StableInv]).unwrap());
            }
        }
        Tree {
            spec,
            elems_a,
            elems_b,
            elems_base,
            elems_edge,
            t_form,
            t_inv_form,
            canon: RwLock::new(HashMap::new()),
        }
    }

    pub fn spec(&self) -> &Arc<GroupSpec> {
        &self.spec
    }

    pub fn base_vertex(&self) -> TreeVertex {
        let kind = match self.spec.as_ref() {
            GroupSpec::Amalgam(_) => VertexKind::A,
            GroupSpec::Hnn(_) => VertexKind::Base,
        };
        TreeVertex { kind, rep: self.canonical(coset_kind(kind), self.spec.identity()) }
    }

    fn coset_elems(&self, kind: CosetKind) -> &[NormalForm] {
        match kind {
            CosetKind::VertexA => &self.elems_a,
            CosetKind::VertexB => &self.elems_b,
            CosetKind::VertexBase => &self.elems_base,
            CosetKind::Edge => &self.elems_edge,
        }
    }

    /// Minimal representative of g·S where S is the coset's stabilizing set.
    fn canonical(&self, kind: CosetKind, g: NormalForm) -> NormalForm {
        if let Some(hit) = self.canon.read().unwrap().get(&(kind, g.clone())) {
            return hit.clone();
        }
        let best = self
            .coset_elems(kind)
            .iter()
            .map(|f| self.spec.multiply(&g, f).unwrap())
            .min()
            .expect("coset element lists are nonempty");
        self.canon.write().unwrap().insert((kind, g), best.clone());
        best
    }

    pub fn vertex(&self, kind: VertexKind, g: &NormalForm) -> Result<TreeVertex, TreeError> {
        self.spec.check_form(g)?;
        let expected = match self.spec.as_ref() {
            GroupSpec::Amalgam(_) => matches!(kind, VertexKind::A | VertexKind::B),
            GroupSpec::Hnn(_) => kind == VertexKind::Base,
        };
        assert!(expected, "vertex kind does not match the spec shape");
        Ok(TreeVertex { kind, rep: self.canonical(coset_kind(kind), g.clone()) })
    }

    pub fn edge(&self, g: &NormalForm) -> Result<TreeEdge, TreeError> {
        self.spec.check_form(g)?;
        Ok(TreeEdge { rep: self.canonical(CosetKind::Edge, g.clone()) })
    }

    pub fn act(&self, g: &NormalForm, v: &TreeVertex) -> Result<TreeVertex, TreeError> {
        let moved = self.spec.multiply(g, &v.rep)?;
        Ok(TreeVertex { kind: v.kind, rep: self.canonical(coset_kind(v.kind), moved) })
    }

    pub fn act_edge(&self, g: &NormalForm, e: &TreeEdge) -> Result<TreeEdge, TreeError> {
        let moved = self.spec.multiply(g, &e.rep)?;
        Ok(TreeEdge { rep: self.canonical(CosetKind::Edge, moved) })
    }

    /// Both endpoints: (gA, gB) for an amalgam edge gU, (gH, g·t^-1·H) for an
    /// HNN edge.
    pub fn endpoints(&self, e: &TreeEdge) -> (TreeVertex, TreeVertex) {
        match self.spec.as_ref() {
            GroupSpec::Amalgam(_) => (
                TreeVertex {
                    kind: VertexKind::A,
                    rep: self.canonical(CosetKind::VertexA, e.rep.clone()),
                },
                TreeVertex {
                    kind: VertexKind::B,
                    rep: self.canonical(CosetKind::VertexB, e.rep.clone()),
                },
            ),
            GroupSpec::Hnn(_) => {
                let shifted = self
                    .spec
                    .multiply(&e.rep, self.t_inv_form.as_ref().unwrap())
                    .unwrap();
                (
                    TreeVertex {
                        kind: VertexKind::Base,
                        rep: self.canonical(CosetKind::VertexBase, e.rep.clone()),
                    },
                    TreeVertex {
                        kind: VertexKind::Base,
                        rep: self.canonical(CosetKind::VertexBase, shifted),
                    },
                )
            }
        }
    }

    /// Endpoints ordered by distance from the base vertex: (near, far).
    pub fn oriented_endpoints(&self, e: &TreeEdge) -> (TreeVertex, TreeVertex) {
        let (x, y) = self.endpoints(e);
        let dx = self.base_path(&x).edges.len();
        let dy = self.base_path(&y).edges.len();
        debug_assert!(dx.abs_diff(dy) == 1, "edge endpoints differ by one in depth");
        if dx < dy { (x, y) } else { (y, x) }
    }

    pub fn edges_at(&self, v: &TreeVertex) -> Vec<TreeEdge> {
        let mut out = Vec::new();
        match (self.spec.as_ref(), v.kind) {
            (GroupSpec::Amalgam(s), VertexKind::A) => {
                // the [A:U] edges at gA are the left cosets g·a·U, a ∈ A/U
                for &a in s.left_transversal(Side::A) {
                    let g = self
                        .spec
                        .multiply(&v.rep, &self.spec.normalize(&[Letter::A(a)]).unwrap())
                        .unwrap();
                    out.push(TreeEdge { rep: self.canonical(CosetKind::Edge, g) });
                }
            }
            (GroupSpec::Amalgam(s), VertexKind::B) => {
                for &b in s.left_transversal(Side::B) {
                    let g = self
                        .spec
                        .multiply(&v.rep, &self.spec.normalize(&[Letter::B(b)]).unwrap())
                        .unwrap();
                    out.push(TreeEdge { rep: self.canonical(CosetKind::Edge, g) });
                }
            }
            (GroupSpec::Hnn(s), VertexKind::Base) => {
                // [H:U] edges g·h·U plus [H:phi(U)] edges g·h·t·U, where
                // h·t·U = h'·t·U exactly when h and h' share a phi(U) coset
                for &h in s.left_transversal(StableSign::Pos) {
                    let g = self
                        .spec
                        .multiply(&v.rep, &self.spec.normalize(&[Letter::H(h)]).unwrap())
                        .unwrap();
                    out.push(TreeEdge { rep: self.canonical(CosetKind::Edge, g) });
                }
                for &h in s.left_transversal(StableSign::Neg) {
                    let with_t = self
                        .spec
                        .normalize(&[Letter::H(h), Letter::Stable])
                        .unwrap();
                    let g = self.spec.multiply(&v.rep, &with_t).unwrap();
                    out.push(TreeEdge { rep: self.canonical(CosetKind::Edge, g) });
                }
            }
            _ => unreachable!("vertex kind checked at construction"),
        }
        out.sort();
        out.dedup();
        out
    }

    pub fn neighbors(&self, v: &TreeVertex) -> Vec<TreeVertex> {
        let mut out: Vec<TreeVertex> = self
            .edges_at(v)
            .iter()
            .map(|e| {
                let (x, y) = self.endpoints(e);
                if &x == v { y } else { x }
            })
            .collect();
        out.sort();
        out.dedup();
        out
    }

    pub fn degree(&self, v: &TreeVertex) -> usize {
        self.edges_at(v).len()
    }

    /// Geodesic from the base vertex to v, read off the letters of the
    /// minimal coset representative.
    pub fn base_path(&self, v: &TreeVertex) -> GeodesicPath {
        let mut vertices = vec![self.base_vertex()];
        let mut edges = Vec::new();
        match (self.spec.as_ref(), &v.rep.repr) {
            (GroupSpec::Amalgam(_), crate::words::WordRepr::Amalgam { head, letters }) => {
                let target_side = match v.kind {
                    VertexKind::A => Side::A,
                    VertexKind::B => Side::B,
                    VertexKind::Base => unreachable!(),
                };
                let mut side = Side::A;
                let mut taken = 0usize;
                for (j, l) in letters.iter().enumerate() {
                    if l.side != side {
                        let prefix = self.spec.prefix_form(&v.rep, j);
                        edges.push(TreeEdge {
                            rep: self.canonical(CosetKind::Edge, prefix),
                        });
                        side = side.other();
                        let incl = self.spec.prefix_form(&v.rep, j + 1);
                        let kind = side_kind(side);
                        vertices.push(TreeVertex {
                            kind,
                            rep: self.canonical(coset_kind(kind), incl),
                        });
                    }
                    taken = j + 1;
                }
                let _ = (head, taken);
                if side != target_side {
                    edges.push(TreeEdge {
                        rep: self.canonical(CosetKind::Edge, v.rep.clone()),
                    });
                    vertices.push(v.clone());
                }
                debug_assert_eq!(vertices.last().unwrap(), v);
            }
            (GroupSpec::Hnn(_), crate::words::WordRepr::Hnn { head: _, letters }) => {
                for (j, l) in letters.iter().enumerate() {
                    let prefix = self.spec.prefix_form(&v.rep, j);
                    let edge_rep = match l.sign {
                        StableSign::Neg => prefix.clone(),
                        StableSign::Pos => self
                            .spec
                            .multiply(&prefix, self.t_form.as_ref().unwrap())
                            .unwrap(),
                    };
                    edges.push(TreeEdge {
                        rep: self.canonical(CosetKind::Edge, edge_rep),
                    });
                    let incl = self.spec.prefix_form(&v.rep, j + 1);
                    vertices.push(TreeVertex {
                        kind: VertexKind::Base,
                        rep: self.canonical(CosetKind::VertexBase, incl),
                    });
                }
                debug_assert_eq!(vertices.last().unwrap(), v);
            }
            _ => unreachable!(),
        }
        GeodesicPath { vertices, edges }
    }

    pub fn depth(&self, v: &TreeVertex) -> usize {
        self.base_path(v).edges.len()
    }

    /// Geodesic between two vertices: splice the base paths at the last
    /// vertex they share.
    pub fn geodesic(&self, from: &TreeVertex, to: &TreeVertex) -> GeodesicPath {
        let pu = self.base_path(from);
        let pw = self.base_path(to);
        let mut c = 0usize;
        while c < pu.vertices.len()
            && c < pw.vertices.len()
            && pu.vertices[c] == pw.vertices[c]
        {
            c += 1;
        }
        debug_assert!(c >= 1, "both base paths start at the base vertex");
        let mut vertices: Vec<TreeVertex> = pu.vertices[c - 1..].iter().rev().cloned().collect();
        vertices.extend(pw.vertices[c..].iter().cloned());
        let mut edges: Vec<TreeEdge> = pu.edges[c - 1..].iter().rev().cloned().collect();
        edges.extend(pw.edges[c - 1..].iter().cloned());
        GeodesicPath { vertices, edges }
    }

    pub fn distance(&self, from: &TreeVertex, to: &TreeVertex) -> usize {
        self.geodesic(from, to).edges.len()
    }

    /// The vertex-to-edge matching: base vertex to the star point, any other
    /// vertex to the last edge on its base path.
    pub fn jv_image(&self, v: &TreeVertex) -> JvImage {
        let path = self.base_path(v);
        match path.edges.last() {
            None => JvImage::Star,
            Some(e) => JvImage::Edge(e.clone()),
        }
    }

    /// All vertices within the given distance of the base vertex, paired
    /// with their depth, in breadth-first order.
    pub fn ball(&self, radius: usize, budget: usize) -> Result<Vec<(TreeVertex, usize)>, TreeError> {
        let base = self.base_vertex();
        let mut seen: HashSet<TreeVertex> = HashSet::new();
        let mut out = Vec::new();
        let mut queue = VecDeque::new();
        seen.insert(base.clone());
        queue.push_back((base, 0usize));
        while let Some((v, d)) = queue.pop_front() {
            out.push((v.clone(), d));
            if out.len() > budget {
                return Err(TreeError::BudgetExceeded { budget });
            }
            if d == radius {
                continue;
            }
            for n in self.neighbors(&v) {
                if seen.insert(n.clone()) {
                    queue.push_back((n, d + 1));
                }
            }
        }
        Ok(out)
    }

    /// Vertices where the matching fails to commute with the action of g,
    /// found by scanning the full ball. The radius must reach the translated
    /// base vertex, which guarantees the scan sees every defect.
    pub fn defect_set(
        &self,
        g: &NormalForm,
        radius: usize,
        budget: usize,
    ) -> Result<Vec<TreeVertex>, TreeError> {
        self.spec.check_form(g)?;
        let g_inv = self.spec.invert(g)?;
        let pulled = self.act(&g_inv, &self.base_vertex())?;
        let needed = self.depth(&pulled);
        if radius < needed {
            return Err(TreeError::RadiusTooSmall { needed, given: radius });
        }
        let mut defects = Vec::new();
        for (v, _) in self.ball(radius, budget)? {
            if self.is_defect(g, &v)? {
                defects.push(v);
            }
        }
        defects.sort();
        Ok(defects)
    }

    pub fn is_defect(&self, g: &NormalForm, v: &TreeVertex) -> Result<bool, TreeError> {
        let lhs = self.jv_image(&self.act(g, v)?);
        let rhs = match self.jv_image(v) {
            JvImage::Star => JvImage::Star,
            JvImage::Edge(e) => JvImage::Edge(self.act_edge(g, &e)?),
        };
        Ok(lhs != rhs)
    }

    /// Superset of the defect vertices of g: the geodesic from the base
    /// vertex to its g^-1-translate. Defects at v mean g·v lies on the
    /// geodesic [base, g·base], so v lies on [g^-1·base, base].
    pub fn defect_candidates(&self, g: &NormalForm) -> Result<Vec<TreeVertex>, TreeError> {
        let g_inv = self.spec.invert(g)?;
        let pulled = self.act(&g_inv, &self.base_vertex())?;
        let mut vs = self.base_path(&pulled).vertices;
        vs.sort();
        vs.dedup();
        Ok(vs)
    }

    pub fn vertex_label(&self, v: &TreeVertex) -> String {
        let kind = match v.kind {
            VertexKind::A => "A",
            VertexKind::B => "B",
            VertexKind::Base => "H",
        };
        format!("{}·{}", self.spec.format_word(&v.rep), kind)
    }

    pub fn edge_label(&self, e: &TreeEdge) -> String {
        format!("{}·U", self.spec.format_word(&e.rep))
    }

    /// Graphviz rendering of the ball.
    pub fn export_dot(&self, radius: usize, budget: usize) -> Result<String, TreeError> {
        let (verts, edges) = self.ball_graph(radius, budget)?;
        let index: HashMap<&TreeVertex, usize> =
            verts.iter().enumerate().map(|(i, (v, _))| (v, i)).collect();
        let mut out = String::from("graph tree {\n  node [shape=circle];\n");
        for (i, (v, d)) in verts.iter().enumerate() {
            let _ = writeln!(
                out,
                "  n{i} [label=\"{}\", tooltip=\"depth {d}\"];",
                self.vertex_label(v).replace('"', "'")
            );
        }
        for e in &edges {
            let (x, y) = self.endpoints(e);
            if let (Some(&ix), Some(&iy)) = (index.get(&x), index.get(&y)) {
                let _ = writeln!(
                    out,
                    "  n{ix} -- n{iy} [label=\"{}\"];",
                    self.edge_label(e).replace('"', "'")
                );
            }
        }
        out.push_str("}\n");
        Ok(out)
    }

    /// Plain-text rendering of the ball: one line per vertex, one per edge.
    pub fn export_text(&self, radius: usize, budget: usize) -> Result<String, TreeError> {
        let (verts, edges) = self.ball_graph(radius, budget)?;
        let mut out = String::new();
        let _ = writeln!(out, "vertices: {}", verts.len());
        for (v, d) in &verts {
            let _ = writeln!(out, "  [{d}] {}", self.vertex_label(v));
        }
        let _ = writeln!(out, "edges: {}", edges.len());
        for e in &edges {
            let (x, y) = self.endpoints(e);
            let _ = writeln!(
                out,
                "  {}  ({} -- {})",
                self.edge_label(e),
                self.vertex_label(&x),
                self.vertex_label(&y)
            );
        }
        Ok(out)
    }

    /// Ball vertices plus every edge with both endpoints inside the ball.
    pub fn ball_graph(
        &self,
        radius: usize,
        budget: usize,
    ) -> Result<(Vec<(TreeVertex, usize)>, Vec<TreeEdge>), TreeError> {
        let verts = self.ball(radius, budget)?;
        let inside: HashSet<&TreeVertex> = verts.iter().map(|(v, _)| v).collect();
        let mut edges = Vec::new();
        for (v, _) in &verts {
            for e in self.edges_at(v) {
                let (x, y) = self.endpoints(&e);
                if inside.contains(&x) && inside.contains(&y) {
                    edges.push(e);
                }
            }
        }
        edges.sort();
        edges.dedup();
        Ok((verts, edges))
    }
}

fn coset_kind(kind: VertexKind) -> CosetKind {
    match kind {
        VertexKind::A => CosetKind::VertexA,
        VertexKind::B => CosetKind::VertexB,
        VertexKind::Base => CosetKind::VertexBase,
    }
}

fn side_kind(side: Side) -> VertexKind {
    match side {
        Side::A => VertexKind::A,
        Side::B => VertexKind::B,
    }
}
