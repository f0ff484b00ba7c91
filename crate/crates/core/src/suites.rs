//! Named verification suites over a scenario, with seeded trials and a
//! JSON-stable report.
//!
//! Every suite derives its per-trial randomness from the scenario seed via
//! `mix_seed`, so a report depends only on the scenario and the selected
//! suites. Trials are independent and run through `map_trials`; the report
//! never records the execution mode, and the sequential and parallel runs
//! of the same scenario serialize to identical bytes.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algebra::{AlgebraElem, GroupRingElement};
use crate::exec::{map_trials, mix_seed, ExecMode};
use crate::group::{all_subgroups, FiniteGroup};
use crate::index::{
    generate_projection_pair, h_index, kasparov_compactness_check, HModuleMatrix, IndexError,
};
use crate::norms::{norm_inequalities_check, NormsError};
use crate::operator::{
    apply_delta, defect_operator, delta_lift_on, verify_transfer, polynomial_defect_check,
    HVector, OperatorError,
};
use crate::scalar::Gaussian;
use crate::scenario::{Payload, RunParams, Scenario};
use crate::tree::{JvImage, Tree, TreeError, TreeVertex};
use crate::words::{GroupSpec, Letter, NormalForm, Side, WordError};

/// The six suites, in report order (alphabetical by name).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SuiteId {
    Cyclicity,
    Index,
    JulgValette,
    NormInequalities,
    Polynomial,
    Transfer,
}

impl SuiteId {
    pub fn all() -> [SuiteId; 6] {
        [
            SuiteId::Cyclicity,
            SuiteId::Index,
            SuiteId::JulgValette,
            SuiteId::NormInequalities,
            SuiteId::Polynomial,
            SuiteId::Transfer,
        ]
    }

    pub fn name(self) -> &'static str {
        match self {
            SuiteId::Cyclicity => "cyclicity",
            SuiteId::Index => "index",
            SuiteId::JulgValette => "julg-valette",
            SuiteId::NormInequalities => "norm-inequalities",
            SuiteId::Polynomial => "polynomial",
            SuiteId::Transfer => "transfer",
        }
    }

    /// Decorrelates the per-suite seed streams.
    fn salt(self) -> u64 {
        match self {
            SuiteId::Cyclicity => 0x6379_636c,
            SuiteId::Index => 0x696e_6478,
            SuiteId::JulgValette => 0x6a76_6a76,
            SuiteId::NormInequalities => 0x6e6f_726d,
            SuiteId::Polynomial => 0x706f_6c79,
            SuiteId::Transfer => 0x7472_6e73,
        }
    }

    fn trial_seed(self, params: &RunParams, trial: usize) -> u64 {
        mix_seed(params.seed ^ self.salt(), trial as u64)
    }
}

impl fmt::Display for SuiteId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SuiteId {
    type Err = SuiteSelectionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cyclicity" => Ok(SuiteId::Cyclicity),
            "index" => Ok(SuiteId::Index),
            "jv" | "julg-valette" => Ok(SuiteId::JulgValette),
            "norms" | "norm-inequalities" => Ok(SuiteId::NormInequalities),
            "poly" | "polynomial" => Ok(SuiteId::Polynomial),
            "transfer" => Ok(SuiteId::Transfer),
            other => Err(SuiteSelectionError(format!("unknown suite '{other}'"))),
        }
    }
}

#[derive(Debug, Error)]
#[error("{0}")]
pub struct SuiteSelectionError(pub String);

/// Parse a comma-separated suite list. An empty string selects no suites.
pub fn parse_suite_set(s: &str) -> Result<BTreeSet<SuiteId>, SuiteSelectionError> {
    let mut out = BTreeSet::new();
    for part in s.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        out.insert(part.parse()?);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Counterexample {
    pub trial: usize,
    pub detail: String,
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: String,
    pub trials: usize,
    pub failures: usize,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "is_false")]
    pub budget_exceeded: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub counterexamples: Vec<Counterexample>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elapsed_ms: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioEcho {
    pub name: String,
    pub kind: String,
    pub params: RunParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: ScenarioEcho,
    pub suites: Vec<SuiteReport>,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elapsed_ms: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Pass,
    Counterexample,
    Budget,
}

impl RunStatus {
    pub fn exit_code(self) -> i32 {
        match self {
            RunStatus::Pass => 0,
            RunStatus::Counterexample => 1,
            RunStatus::Budget => 3,
        }
    }
}

impl RunReport {
    /// Budget exhaustion dominates: partial runs are not counterexamples.
    pub fn status(&self) -> RunStatus {
        if self.suites.iter().any(|s| s.budget_exceeded) {
            RunStatus::Budget
        } else if self.passed {
            RunStatus::Pass
        } else {
            RunStatus::Counterexample
        }
    }
}

/// Outcome of one trial. `Fail` is a counterexample to the property under
/// test; `Error` is a malfunction (bad input, internal mismatch); `Budget`
/// is a resource cap, reported separately so callers can distinguish
/// "false" from "gave up".
enum TrialResult {
    Pass,
    Fail(String),
    Error(String),
    Budget(String),
}

fn from_word_err(e: WordError) -> TrialResult {
    match e {
        WordError::BudgetExceeded { .. } => TrialResult::Budget(e.to_string()),
        _ => TrialResult::Error(e.to_string()),
    }
}

fn from_tree_err(e: TreeError) -> TrialResult {
    match e {
        TreeError::BudgetExceeded { .. } => TrialResult::Budget(e.to_string()),
        TreeError::Word(w) => from_word_err(w),
        _ => TrialResult::Error(e.to_string()),
    }
}

fn from_op_err(e: OperatorError) -> TrialResult {
    match e {
        OperatorError::Tree(t) => from_tree_err(t),
        OperatorError::Word(w) => from_word_err(w),
        _ => TrialResult::Error(e.to_string()),
    }
}

fn from_index_err(e: IndexError) -> TrialResult {
    match e {
        IndexError::BudgetExceeded { .. } => TrialResult::Budget(e.to_string()),
        _ => TrialResult::Error(e.to_string()),
    }
}

const MAX_COUNTEREXAMPLES: usize = 5;

fn aggregate(suite: SuiteId, outcomes: Vec<TrialResult>, elapsed_ms: Option<u64>) -> SuiteReport {
    let trials = outcomes.len();
    let mut failures = 0;
    let mut counterexamples = Vec::new();
    let mut error = None;
    let mut budget_exceeded = false;
    for (trial, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            TrialResult::Pass => {}
            TrialResult::Fail(detail) => {
                failures += 1;
                if counterexamples.len() < MAX_COUNTEREXAMPLES {
                    counterexamples.push(Counterexample { trial, detail });
                }
            }
            TrialResult::Error(msg) => {
                failures += 1;
                error.get_or_insert(msg);
            }
            TrialResult::Budget(msg) => {
                failures += 1;
                budget_exceeded = true;
                error.get_or_insert(msg);
            }
        }
    }
    SuiteReport {
        suite: suite.name().to_string(),
        trials,
        failures,
        passed: failures == 0,
        error,
        budget_exceeded,
        counterexamples,
        elapsed_ms,
    }
}

fn stopwatch(start: Instant, timing: bool) -> Option<u64> {
    timing.then(|| start.elapsed().as_millis() as u64)
}

// Shortcut for trial bodies: unwrap or classify the error.
macro_rules! try_op {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(err) => return from_op_err(err.into()),
        }
    };
}

fn small_gaussian(rng: &mut ChaCha8Rng) -> Gaussian {
    Gaussian::complex_ratio(
        rng.gen_range(-3..=3),
        rng.gen_range(1..=3),
        rng.gen_range(-2..=2),
        rng.gen_range(1..=2),
    )
}

fn random_word(
    spec: &Arc<GroupSpec>,
    rng: &mut ChaCha8Rng,
    max_len: usize,
) -> Result<NormalForm, WordError> {
    let len = rng.gen_range(0..=max_len);
    let mut letters = Vec::with_capacity(len);
    for _ in 0..len {
        let letter = match spec.as_ref() {
            GroupSpec::Amalgam(am) => {
                if rng.gen_bool(0.5) {
                    Letter::A(rng.gen_range(0..am.vertex_group(Side::A).order()))
                } else {
                    Letter::B(rng.gen_range(0..am.vertex_group(Side::B).order()))
                }
            }
            GroupSpec::Hnn(hnn) => match rng.gen_range(0..4u8) {
                0 | 1 => Letter::H(rng.gen_range(0..hnn.base_group().order())),
                2 => Letter::Stable,
                _ => Letter::StableInv,
            },
        };
        letters.push(letter);
    }
    spec.normalize(&letters)
}

fn random_ring_element(
    spec: &Arc<GroupSpec>,
    rng: &mut ChaCha8Rng,
    max_support: usize,
    max_len: usize,
) -> Result<GroupRingElement, WordError> {
    let terms = rng.gen_range(1..=max_support.max(1));
    let mut acc = GroupRingElement::zero(spec.clone());
    for _ in 0..terms {
        let g = random_word(spec, rng, max_len)?;
        let coeff = small_gaussian(rng);
        acc = acc.add(&GroupRingElement::delta(spec.clone(), g).scale(&coeff));
    }
    Ok(acc)
}

fn random_vector(
    tree: &Tree,
    rng: &mut ChaCha8Rng,
    budget: usize,
) -> Result<HVector<TreeVertex>, TreeError> {
    let ball = tree.ball(2, budget)?;
    let h = tree.spec().h().clone();
    let mut x = HVector::zero(h.clone());
    for _ in 0..3 {
        let (v, _) = &ball[rng.gen_range(0..ball.len())];
        let coeffs = (0..h.order())
            .map(|_| {
                if rng.gen_bool(0.5) {
                    Gaussian::zero()
                } else {
                    small_gaussian(rng)
                }
            })
            .collect();
        x.accumulate(v.clone(), AlgebraElem::from_coeffs(h.clone(), coeffs));
    }
    Ok(x)
}

fn random_module_matrix(
    group: &Arc<FiniteGroup>,
    size: usize,
    rng: &mut ChaCha8Rng,
) -> HModuleMatrix {
    let mut out = HModuleMatrix::zero(group.clone(), size, 1);
    for r in 0..size {
        for c in 0..size {
            let coeffs = (0..group.order()).map(|_| small_gaussian(rng)).collect();
            out.set(r, c, AlgebraElem::from_coeffs(group.clone(), coeffs));
        }
    }
    out
}

// ---------------------------------------------------------------------------
// transfer

fn transfer_trial(tree: &Tree, params: &RunParams, trial: usize) -> TrialResult {
    let mut rng = ChaCha8Rng::seed_from_u64(SuiteId::Transfer.trial_seed(params, trial));
    let a = try_op!(random_ring_element(
        tree.spec(),
        &mut rng,
        params.max_support,
        params.max_word_length
    ));
    let report = try_op!(verify_transfer(tree, &a, false));
    if report.equal {
        TrialResult::Pass
    } else {
        TrialResult::Fail(format!(
            "element {} has group trace {} but transferred trace {}",
            report.element, report.lhs, report.rhs
        ))
    }
}

/// One deterministic check per subgroup K of a vertex group: the averaging
/// projection over K must transfer to exactly 1/|K| on both sides, and |K|
/// must divide the vertex group order (so the value sits in (1/|H|)·Z).
fn averaging_checks(tree: &Tree) -> Vec<TrialResult> {
    let spec = tree.spec().clone();
    type Mk = fn(usize) -> Letter;
    let sides: Vec<(Arc<FiniteGroup>, Mk)> = match spec.as_ref() {
        GroupSpec::Amalgam(am) => vec![
            (am.vertex_group(Side::A).clone(), Letter::A as Mk),
            (am.vertex_group(Side::B).clone(), Letter::B as Mk),
        ],
        GroupSpec::Hnn(hnn) => vec![(hnn.base_group().clone(), Letter::H as Mk)],
    };
    let mut out = Vec::new();
    for (group, mk) in sides {
        let order = group.order();
        for sub in all_subgroups(&group) {
            out.push(averaging_check(tree, &spec, sub.members(), mk, order));
        }
    }
    out
}

fn averaging_check(
    tree: &Tree,
    spec: &Arc<GroupSpec>,
    members: &[usize],
    mk: fn(usize) -> Letter,
    vertex_order: usize,
) -> TrialResult {
    let k = members.len();
    if vertex_order % k != 0 {
        return TrialResult::Fail(format!(
            "subgroup of size {k} does not divide the vertex group order {vertex_order}"
        ));
    }
    let mut acc = GroupRingElement::zero(spec.clone());
    for &x in members {
        let form = try_op!(spec.normalize(&[mk(x)]));
        acc = acc.add(&GroupRingElement::delta(spec.clone(), form));
    }
    let acc = acc.scale(&Gaussian::ratio(1, k as i64));
    let report = try_op!(verify_transfer(tree, &acc, false));
    let want = Gaussian::ratio(1, k as i64).to_display_string();
    if report.equal && report.lhs == want && report.rhs == want {
        TrialResult::Pass
    } else {
        TrialResult::Fail(format!(
            "averaging projection over {k} elements traced to {} / {}, want {}",
            report.lhs, report.rhs, want
        ))
    }
}

fn transfer_suite(tree: &Tree, params: &RunParams, mode: ExecMode, timing: bool) -> SuiteReport {
    let start = Instant::now();
    let mut outcomes = map_trials(mode, params.trials, |t| transfer_trial(tree, params, t));
    outcomes.extend(averaging_checks(tree));
    aggregate(SuiteId::Transfer, outcomes, stopwatch(start, timing))
}

// ---------------------------------------------------------------------------
// julg-valette

/// Ball-exhaustive half: the matching sends the base vertex to the star
/// point and every other in-ball vertex to a distinct in-ball edge, hitting
/// all of them.
fn jv_exhaustive(tree: &Tree, params: &RunParams) -> TrialResult {
    let (vertices, edges) = match tree.ball_graph(params.radius, params.ball_budget) {
        Ok(pair) => pair,
        Err(e) => return from_tree_err(e),
    };
    let base = tree.base_vertex();
    if tree.jv_image(&base) != JvImage::Star {
        return TrialResult::Fail("base vertex is not matched to the star point".to_string());
    }
    let mut images = BTreeSet::new();
    for (v, _) in &vertices {
        if *v == base {
            continue;
        }
        match tree.jv_image(v) {
            JvImage::Star => {
                return TrialResult::Fail(format!(
                    "vertex {} is matched to the star point",
                    tree.vertex_label(v)
                ));
            }
            JvImage::Edge(e) => {
                if !images.insert(e.clone()) {
                    return TrialResult::Fail(format!(
                        "two vertices are matched to edge {}",
                        tree.edge_label(&e)
                    ));
                }
            }
        }
    }
    let in_ball: BTreeSet<_> = edges.iter().cloned().collect();
    if images != in_ball {
        return TrialResult::Fail(format!(
            "matching covers {} of {} in-ball edges",
            images.intersection(&in_ball).count(),
            in_ball.len()
        ));
    }
    TrialResult::Pass
}

/// Random half: the matching defect of g stays on the geodesic from the
/// base vertex to its g^-1 translate.
fn jv_defect_trial(tree: &Tree, params: &RunParams, trial: usize) -> TrialResult {
    let mut rng = ChaCha8Rng::seed_from_u64(SuiteId::JulgValette.trial_seed(params, trial));
    let spec = tree.spec();
    let max_len = params.max_word_length.min(params.radius);
    let g = try_op!(random_word(spec, &mut rng, max_len));
    let defect = match tree.defect_set(&g, params.radius, params.ball_budget) {
        Ok(d) => d,
        Err(e) => return from_tree_err(e),
    };
    let g_inv = try_op!(spec.invert(&g));
    let base = tree.base_vertex();
    let pulled = try_op!(tree.act(&g_inv, &base));
    let allowed: BTreeSet<TreeVertex> = tree.geodesic(&base, &pulled).vertices.into_iter().collect();
    for v in &defect {
        if !allowed.contains(v) {
            return TrialResult::Fail(format!(
                "defect vertex {} of {} lies off the geodesic",
                tree.vertex_label(v),
                spec.format_word(&g)
            ));
        }
    }
    TrialResult::Pass
}

fn jv_suite(tree: &Tree, params: &RunParams, mode: ExecMode, timing: bool) -> SuiteReport {
    let start = Instant::now();
    let mut outcomes = vec![jv_exhaustive(tree, params)];
    outcomes.extend(map_trials(mode, params.trials, |t| {
        jv_defect_trial(tree, params, t)
    }));
    aggregate(SuiteId::JulgValette, outcomes, stopwatch(start, timing))
}

// ---------------------------------------------------------------------------
// index

fn index_trial(groups: &[Arc<FiniteGroup>], params: &RunParams, trial: usize) -> TrialResult {
    let group = &groups[trial % groups.len()];
    let seed = SuiteId::Index.trial_seed(params, trial);
    let (p, q) = match generate_projection_pair(
        group,
        params.max_truncation,
        params.max_amplification,
        seed,
        params.scalar_budget,
    ) {
        Ok(pair) => pair,
        Err(e) => return from_index_err(e),
    };
    let report = match h_index(&p, &q) {
        Ok(r) => r,
        Err(e) => return from_index_err(e),
    };
    if !report.equal {
        return TrialResult::Fail(format!(
            "pair over a group of order {}: trace difference {} vs index {} (ker {}, coker {})",
            group.order(),
            report.trace_diff,
            report.index,
            report.dim_ker,
            report.dim_coker
        ));
    }
    match kasparov_compactness_check(&p, &q) {
        Ok(k) if k.ok => {}
        Ok(k) => {
            return TrialResult::Fail(format!(
                "compactness check failed: identity_ok={}, ranks {}/{} vs difference {}",
                k.identity_ok, k.rank_p_defect, k.rank_q_defect, k.rank_difference
            ));
        }
        Err(e) => return from_index_err(e),
    }
    let extra = p.size();
    let padded = match h_index(&p.pad_truncation(extra), &q.pad_truncation(extra)) {
        Ok(r) => r,
        Err(e) => return from_index_err(e),
    };
    if padded == report {
        TrialResult::Pass
    } else {
        TrialResult::Fail("padding the module changed the report".to_string())
    }
}

fn index_suite(
    groups: &[Arc<FiniteGroup>],
    params: &RunParams,
    mode: ExecMode,
    timing: bool,
) -> SuiteReport {
    let start = Instant::now();
    let outcomes = map_trials(mode, params.trials, |t| index_trial(groups, params, t));
    aggregate(SuiteId::Index, outcomes, stopwatch(start, timing))
}

// ---------------------------------------------------------------------------
// cyclicity

/// Per trial: trace cyclicity of two defect operators, multiplicativity and
/// adjoint compatibility of the vertex lift, and invariance of the
/// H-valued inner product under the unitary action.
fn cyclicity_trial(tree: &Tree, params: &RunParams, trial: usize) -> TrialResult {
    let mut rng = ChaCha8Rng::seed_from_u64(SuiteId::Cyclicity.trial_seed(params, trial));
    let spec = tree.spec().clone();
    let a = try_op!(random_ring_element(
        &spec,
        &mut rng,
        params.max_support.min(4),
        params.max_word_length.min(3)
    ));
    let b = try_op!(random_ring_element(
        &spec,
        &mut rng,
        params.max_support.min(4),
        params.max_word_length.min(3)
    ));

    // Both defect operators vanish outside their candidate columns, so the
    // sparse compositions are the true products and the traces must agree.
    let da = try_op!(defect_operator(tree, &a));
    let db = try_op!(defect_operator(tree, &b));
    let ab_trace = try_op!(da.compose(&db)).trace();
    let ba_trace = try_op!(db.compose(&da)).trace();
    if ab_trace != ba_trace {
        return TrialResult::Fail(format!(
            "tr D(a)D(b) = {} but tr D(b)D(a) = {}",
            ab_trace.to_display_string(),
            ba_trace.to_display_string()
        ));
    }

    // The vertex lift is multiplicative once the left factor is materialized
    // on columns wide enough to cover the right factor's image.
    let prod = try_op!(a.mul(&b));
    let mut cols = BTreeSet::new();
    cols.insert(tree.base_vertex());
    let g = try_op!(random_word(&spec, &mut rng, params.max_word_length.min(params.radius)));
    cols.insert(try_op!(tree.act(&g, &tree.base_vertex())));
    let mut widened = cols.clone();
    for (w, _) in b.terms() {
        for v in &cols {
            widened.insert(try_op!(tree.act(w, v)));
        }
    }
    let lift_b = try_op!(delta_lift_on(tree, &b, &cols));
    let lift_a = try_op!(delta_lift_on(tree, &a, &widened));
    let lift_ab = try_op!(delta_lift_on(tree, &prod, &cols));
    if try_op!(lift_a.compose(&lift_b)) != lift_ab {
        return TrialResult::Fail(format!(
            "vertex lift of ({})·({}) is not the composite of the lifts",
            a.display(),
            b.display()
        ));
    }

    // Adjoint through the H-valued inner product, on random vectors.
    let x = match random_vector(tree, &mut rng, params.ball_budget) {
        Ok(v) => v,
        Err(e) => return from_tree_err(e),
    };
    let y = match random_vector(tree, &mut rng, params.ball_budget) {
        Ok(v) => v,
        Err(e) => return from_tree_err(e),
    };
    let a_star = try_op!(a.star());
    let lhs = try_op!(apply_delta(tree, &a, &x)).inner(&y);
    let rhs = x.inner(&try_op!(apply_delta(tree, &a_star, &y)));
    if lhs != rhs {
        return TrialResult::Fail(format!(
            "<a·x, y> differs from <x, a*·y> for a = {}",
            a.display()
        ));
    }

    // The action of a single group element is unitary for the inner product.
    let u = GroupRingElement::delta(spec.clone(), g);
    let ux = try_op!(apply_delta(tree, &u, &x));
    let uy = try_op!(apply_delta(tree, &u, &y));
    if ux.inner(&uy) != x.inner(&y) {
        return TrialResult::Fail("inner product moved under the group action".to_string());
    }
    TrialResult::Pass
}

fn cyclicity_suite(tree: &Tree, params: &RunParams, mode: ExecMode, timing: bool) -> SuiteReport {
    let start = Instant::now();
    let outcomes = map_trials(mode, params.trials, |t| cyclicity_trial(tree, params, t));
    aggregate(SuiteId::Cyclicity, outcomes, stopwatch(start, timing))
}

// ---------------------------------------------------------------------------
// polynomial

fn polynomial_trial(tree: &Tree, params: &RunParams, trial: usize) -> TrialResult {
    let mut rng = ChaCha8Rng::seed_from_u64(SuiteId::Polynomial.trial_seed(params, trial));
    let a = try_op!(random_ring_element(
        tree.spec(),
        &mut rng,
        params.max_support.min(4),
        params.max_word_length.min(3)
    ));
    let degree = rng.gen_range(0..=3usize);
    let coeffs: Vec<Gaussian> = (0..=degree).map(|_| small_gaussian(&mut rng)).collect();
    let report = try_op!(polynomial_defect_check(tree, &a, &coeffs, false));
    if report.equal {
        TrialResult::Pass
    } else {
        TrialResult::Fail(format!(
            "p = {} at a = {}: routes_match={}, boundary_zero={}, traces {} vs {}",
            report.poly,
            report.element,
            report.routes_match,
            report.boundary_zero,
            report.trace_lhs,
            report.trace_rhs
        ))
    }
}

fn polynomial_suite(tree: &Tree, params: &RunParams, mode: ExecMode, timing: bool) -> SuiteReport {
    let start = Instant::now();
    let outcomes = map_trials(mode, params.trials, |t| polynomial_trial(tree, params, t));
    aggregate(SuiteId::Polynomial, outcomes, stopwatch(start, timing))
}

// ---------------------------------------------------------------------------
// norm-inequalities

fn norms_trial(groups: &[Arc<FiniteGroup>], params: &RunParams, trial: usize) -> TrialResult {
    let group = &groups[trial % groups.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(SuiteId::NormInequalities.trial_seed(params, trial));
    let a = random_module_matrix(group, 2, &mut rng);
    let b = random_module_matrix(group, 2, &mut rng);
    let c = random_module_matrix(group, 2, &mut rng);
    match norm_inequalities_check(&a, &b, &c) {
        Ok(_) => TrialResult::Pass,
        Err(e @ NormsError::NumericalFailure { .. }) => TrialResult::Fail(e.to_string()),
        Err(e) => TrialResult::Error(e.to_string()),
    }
}

fn norms_suite(
    groups: &[Arc<FiniteGroup>],
    params: &RunParams,
    mode: ExecMode,
    timing: bool,
) -> SuiteReport {
    let start = Instant::now();
    let outcomes = map_trials(mode, params.trials, |t| norms_trial(groups, params, t));
    aggregate(SuiteId::NormInequalities, outcomes, stopwatch(start, timing))
}

// ---------------------------------------------------------------------------
// driver

/// The suites that make sense for a scenario's payload.
pub fn applicable_suites(scenario: &Scenario) -> Vec<SuiteId> {
    match &scenario.payload {
        Payload::Tree(_) => vec![
            SuiteId::Cyclicity,
            SuiteId::JulgValette,
            SuiteId::NormInequalities,
            SuiteId::Polynomial,
            SuiteId::Transfer,
        ],
        Payload::Index(_) => vec![SuiteId::Index, SuiteId::NormInequalities],
    }
}

/// Run the selected suites (all applicable ones when `enabled` is None) and
/// assemble the report in fixed suite order.
pub fn run_suites(
    scenario: &Scenario,
    enabled: Option<&BTreeSet<SuiteId>>,
    mode: ExecMode,
    timing: bool,
) -> Result<RunReport, SuiteSelectionError> {
    let start = Instant::now();
    let applicable = applicable_suites(scenario);
    let selected: BTreeSet<SuiteId> = match enabled {
        Some(set) => {
            for id in set {
                if !applicable.contains(id) {
                    return Err(SuiteSelectionError(format!(
                        "suite '{}' does not apply to a {} scenario",
                        id.name(),
                        scenario.kind
                    )));
                }
            }
            set.clone()
        }
        None => applicable.iter().copied().collect(),
    };

    let tree = scenario.tree_spec().map(|spec| Tree::new(spec.clone()));
    let norm_groups = scenario.norm_groups();
    let params = &scenario.params;
    let mut suites = Vec::new();
    for id in SuiteId::all() {
        if !selected.contains(&id) {
            continue;
        }
        let report = match id {
            SuiteId::Cyclicity => cyclicity_suite(tree.as_ref().unwrap(), params, mode, timing),
            SuiteId::Index => {
                let Payload::Index(groups) = &scenario.payload else {
                    unreachable!("validated against applicable suites");
                };
                index_suite(groups, params, mode, timing)
            }
            SuiteId::JulgValette => jv_suite(tree.as_ref().unwrap(), params, mode, timing),
            SuiteId::NormInequalities => norms_suite(&norm_groups, params, mode, timing),
            SuiteId::Polynomial => polynomial_suite(tree.as_ref().unwrap(), params, mode, timing),
            SuiteId::Transfer => transfer_suite(tree.as_ref().unwrap(), params, mode, timing),
        };
        suites.push(report);
    }
    let passed = suites.iter().all(|s| s.passed);
    Ok(RunReport {
        scenario: ScenarioEcho {
            name: scenario.name.clone(),
            kind: scenario.kind.to_string(),
            params: params.clone(),
        },
        suites,
        passed,
        elapsed_ms: stopwatch(start, timing),
    })
}
