//! Scenario files: JSON descriptions of verification runs.
//!
//! A scenario names a group construction (amalgam over a common subgroup,
//! HNN extension, or a synthetic batch of projection pairs) plus the run
//! parameters. Parsing is strict: unknown fields are rejected, and every
//! group-theoretic invariant is re-checked at load so a corrupted file fails
//! here with a witness instead of deep inside a suite.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::group::{FiniteGroup, GroupHom};
use crate::words::{AmalgamSpec, GroupSpec, HnnSpec};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{path}: parse error at line {line}, column {column}: {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{path}: {message}")]
    Validation { path: String, message: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn invalid(path: &str, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Validation {
        path: path.to_string(),
        message: message.into(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupDesc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cayley_table: Option<Vec<Vec<usize>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub permutation_generators: Option<Vec<Vec<usize>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
}

impl GroupDesc {
    fn build(&self, ctx: &str, path: &str) -> Result<Arc<FiniteGroup>, ScenarioError> {
        let base = match (&self.cayley_table, &self.permutation_generators) {
            (Some(t), None) => FiniteGroup::from_table(t.clone()),
            (None, Some(g)) => FiniteGroup::from_permutations(g),
            _ => {
                return Err(invalid(
                    path,
                    format!("{ctx}: give exactly one of cayley_table or permutation_generators"),
                ))
            }
        }
        .map_err(|e| invalid(path, format!("{ctx}: {e}")))?;
        let built = match &self.labels {
            Some(l) => base
                .with_labels(l.clone())
                .map_err(|e| invalid(path, format!("{ctx}: {e}")))?,
            None => base,
        };
        Ok(Arc::new(built))
    }
}

fn default_trials() -> usize {
    500
}
fn default_radius() -> usize {
    5
}
fn default_max_support() -> usize {
    8
}
fn default_max_word_length() -> usize {
    4
}
fn default_ball_budget() -> usize {
    200_000
}
fn default_scalar_budget() -> usize {
    512
}
fn default_max_truncation() -> usize {
    4
}
fn default_max_amplification() -> usize {
    2
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunParams {
    pub seed: u64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_radius")]
    pub radius: usize,
    #[serde(default = "default_max_support")]
    pub max_support: usize,
    #[serde(default = "default_max_word_length")]
    pub max_word_length: usize,
    #[serde(default = "default_ball_budget")]
    pub ball_budget: usize,
    #[serde(default = "default_scalar_budget")]
    pub scalar_budget: usize,
    #[serde(default = "default_max_truncation")]
    pub max_truncation: usize,
    #[serde(default = "default_max_amplification")]
    pub max_amplification: usize,
}

impl RunParams {
    fn validate(&self, path: &str) -> Result<(), ScenarioError> {
        for (name, v) in [
            ("trials", self.trials),
            ("radius", self.radius),
            ("max_support", self.max_support),
            ("max_word_length", self.max_word_length),
            ("ball_budget", self.ball_budget),
            ("scalar_budget", self.scalar_budget),
            ("max_truncation", self.max_truncation),
            ("max_amplification", self.max_amplification),
        ] {
            if v == 0 {
                return Err(invalid(path, format!("params.{name} must be positive")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GeneralAmalgamDesc {
    group_u: GroupDesc,
    group_a: GroupDesc,
    group_b: GroupDesc,
    group_h: GroupDesc,
    embed_a: Vec<usize>,
    embed_b: Vec<usize>,
    alpha_a: Vec<usize>,
    alpha_b: Vec<usize>,
}

/// A validated scenario, ready to drive suites.
#[derive(Clone)]
pub struct Scenario {
    pub name: String,
    pub kind: &'static str,
    pub params: RunParams,
    pub payload: Payload,
}

#[derive(Clone)]
pub enum Payload {
    /// Amalgam or HNN construction with its Bass-Serre tree data.
    Tree(Arc<GroupSpec>),
    /// Batch of synthetic projection pairs over the listed groups, cycled
    /// per trial.
    Index(Vec<Arc<FiniteGroup>>),
}

impl std::fmt::Debug for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Scenario({}, kind {})", self.name, self.kind)
    }
}

impl Scenario {
    /// Groups the floating norm suite samples over.
    pub fn norm_groups(&self) -> Vec<Arc<FiniteGroup>> {
        match &self.payload {
            Payload::Tree(spec) => vec![spec.h().clone()],
            Payload::Index(groups) => groups.clone(),
        }
    }

    pub fn tree_spec(&self) -> Option<&Arc<GroupSpec>> {
        match &self.payload {
            Payload::Tree(spec) => Some(spec),
            Payload::Index(_) => None,
        }
    }
}

pub fn parse_scenario(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    let p = path.as_ref();
    let shown = p.display().to_string();
    let text = std::fs::read_to_string(p).map_err(|source| ScenarioError::Io {
        path: shown.clone(),
        source,
    })?;
    parse_scenario_str(&text, &shown)
}

pub fn parse_scenario_str(text: &str, path: &str) -> Result<Scenario, ScenarioError> {
    let value: Value = serde_json::from_str(text).map_err(|e| ScenarioError::Parse {
        path: path.to_string(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let obj = value
        .as_object()
        .ok_or_else(|| invalid(path, "top level must be a JSON object"))?;

    let kind = obj
        .get("kind")
        .and_then(Value::as_str)
        .ok_or_else(|| invalid(path, "missing string field \"kind\""))?;
    let allowed: &[&str] = match kind {
        "amalgam" => &["name", "kind", "params", "group_h", "subgroup_u", "general"],
        "hnn" => &[
            "name",
            "kind",
            "params",
            "group_h",
            "subgroup_u",
            "conjugator",
            "phi_images",
        ],
        "synthetic_index" => &["name", "kind", "params", "groups_h"],
        other => {
            return Err(invalid(
                path,
                format!("unknown kind {other:?}; expected amalgam, hnn, or synthetic_index"),
            ))
        }
    };
    for key in obj.keys() {
        if !allowed.contains(&key.as_str()) {
            return Err(invalid(
                path,
                format!("unexpected field {key:?} for kind {kind:?}"),
            ));
        }
    }

    let name: String = field(obj, "name", path)?;
    let params: RunParams = field(obj, "params", path)?;
    params.validate(path)?;

    let (kind, payload) = match kind {
        "amalgam" => {
            if let Some(general) = obj.get("general") {
                if obj.contains_key("group_h") || obj.contains_key("subgroup_u") {
                    return Err(invalid(
                        path,
                        "a general amalgam carries its own groups; drop group_h and subgroup_u",
                    ));
                }
                let desc: GeneralAmalgamDesc = from_value(general, "general", path)?;
                let spec = build_general_amalgam(&desc, path)?;
                ("amalgam", Payload::Tree(Arc::new(GroupSpec::Amalgam(spec))))
            } else {
                let group_h: GroupDesc = field(obj, "group_h", path)?;
                let subgroup_u: Vec<usize> = field(obj, "subgroup_u", path)?;
                let h = group_h.build("group_h", path)?;
                let spec = AmalgamSpec::fold(h, &subgroup_u)
                    .map_err(|e| invalid(path, e.to_string()))?;
                ("amalgam", Payload::Tree(Arc::new(GroupSpec::Amalgam(spec))))
            }
        }
        "hnn" => {
            let group_h: GroupDesc = field(obj, "group_h", path)?;
            let subgroup_u: Vec<usize> = field(obj, "subgroup_u", path)?;
            let conjugator: usize = field(obj, "conjugator", path)?;
            let h = group_h.build("group_h", path)?;
            let spec = HnnSpec::new(h, &subgroup_u, conjugator)
                .map_err(|e| invalid(path, e.to_string()))?;
            if let Some(images) = obj.get("phi_images") {
                let images: Vec<usize> = from_value(images, "phi_images", path)?;
                if images.len() != subgroup_u.len() {
                    return Err(invalid(
                        path,
                        format!(
                            "phi_images has {} entries but subgroup_u has {}",
                            images.len(),
                            subgroup_u.len()
                        ),
                    ));
                }
                spec.check_phi_images(subgroup_u.iter().copied().zip(images))
                    .map_err(|e| invalid(path, e.to_string()))?;
            }
            ("hnn", Payload::Tree(Arc::new(GroupSpec::Hnn(spec))))
        }
        "synthetic_index" => {
            let descs: Vec<GroupDesc> = field(obj, "groups_h", path)?;
            if descs.is_empty() {
                return Err(invalid(path, "groups_h must list at least one group"));
            }
            let groups = descs
                .iter()
                .enumerate()
                .map(|(i, d)| d.build(&format!("groups_h[{i}]"), path))
                .collect::<Result<Vec<_>, _>>()?;
            ("synthetic_index", Payload::Index(groups))
        }
        _ => unreachable!(),
    };

    Ok(Scenario {
        name,
        kind,
        params,
        payload,
    })
}

fn field<T: serde::de::DeserializeOwned>(
    obj: &serde_json::Map<String, Value>,
    key: &str,
    path: &str,
) -> Result<T, ScenarioError> {
    let v = obj
        .get(key)
        .ok_or_else(|| invalid(path, format!("missing field {key:?}")))?;
    from_value(v, key, path)
}

fn from_value<T: serde::de::DeserializeOwned>(
    v: &Value,
    key: &str,
    path: &str,
) -> Result<T, ScenarioError> {
    serde_json::from_value(v.clone()).map_err(|e| invalid(path, format!("field {key:?}: {e}")))
}

fn build_general_amalgam(
    desc: &GeneralAmalgamDesc,
    path: &str,
) -> Result<AmalgamSpec, ScenarioError> {
    let u = desc.group_u.build("general.group_u", path)?;
    let a = desc.group_a.build("general.group_a", path)?;
    let b = desc.group_b.build("general.group_b", path)?;
    let h = desc.group_h.build("general.group_h", path)?;
    let hom = |name: &str, src: &Arc<FiniteGroup>, tgt: &Arc<FiniteGroup>, images: &[usize]| {
        GroupHom::new(src.clone(), tgt.clone(), images.to_vec())
            .map_err(|e| invalid(path, format!("general.{name}: {e}")))
    };
    let embed_a = hom("embed_a", &u, &a, &desc.embed_a)?;
    let embed_b = hom("embed_b", &u, &b, &desc.embed_b)?;
    let alpha_a = hom("alpha_a", &a, &h, &desc.alpha_a)?;
    let alpha_b = hom("alpha_b", &b, &h, &desc.alpha_b)?;
    AmalgamSpec::new(u, a, b, h, embed_a, embed_b, alpha_a, alpha_b)
        .map_err(|e| invalid(path, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s3_amalgam_json() -> String {
        r#"{
            "name": "s3-amalgam-c2",
            "kind": "amalgam",
            "group_h": {
                "permutation_generators": [[1, 0, 2], [1, 2, 0]],
                "labels": ["e", "s12", "s01", "r", "rr", "s02"]
            },
            "subgroup_u": [0, 1],
            "params": { "seed": 1729 }
        }"#
        .to_string()
    }

    #[test]
    fn amalgam_fold_scenario_parses() {
        let sc = parse_scenario_str(&s3_amalgam_json(), "inline").unwrap();
        assert_eq!(sc.kind, "amalgam");
        assert_eq!(sc.params.seed, 1729);
        assert_eq!(sc.params.trials, 500);
        assert_eq!(sc.params.radius, 5);
        let spec = sc.tree_spec().unwrap();
        assert_eq!(spec.h().order(), 6);
        assert_eq!(spec.h().label(3), "r");
    }

    #[test]
    fn minimal_hnn_scenario_is_the_smallest_loop() {
        let text = r#"{
            "name": "c2-z",
            "kind": "hnn",
            "group_h": { "cayley_table": [[0, 1], [1, 0]] },
            "subgroup_u": [0, 1],
            "conjugator": 0,
            "params": { "seed": 7, "trials": 50 }
        }"#;
        let sc = parse_scenario_str(text, "inline").unwrap();
        assert_eq!(sc.kind, "hnn");
        let spec = sc.tree_spec().unwrap();
        assert_eq!(spec.h().order(), 2);
        // the tree of C2 x Z is a line: the identity vertex has degree 2
        let tree = crate::tree::Tree::new(spec.clone());
        assert_eq!(tree.degree(&tree.base_vertex()), 2);
    }

    #[test]
    fn hnn_phi_images_must_match_conjugation() {
        let text = r#"{
            "name": "bad",
            "kind": "hnn",
            "group_h": { "permutation_generators": [[1, 0, 2], [1, 2, 0]] },
            "subgroup_u": [0, 3, 4],
            "conjugator": 1,
            "phi_images": [0, 3, 4],
            "params": { "seed": 1 }
        }"#;
        let err = parse_scenario_str(text, "inline").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("conjugation"), "got: {msg}");
    }

    #[test]
    fn hnn_phi_images_accepted_when_consistent() {
        let text = r#"{
            "name": "good",
            "kind": "hnn",
            "group_h": { "permutation_generators": [[1, 0, 2], [1, 2, 0]] },
            "subgroup_u": [0, 3, 4],
            "conjugator": 1,
            "phi_images": [0, 4, 3],
            "params": { "seed": 1 }
        }"#;
        assert!(parse_scenario_str(text, "inline").is_ok());
    }

    #[test]
    fn general_amalgam_rejects_non_injective_alpha() {
        let text = r#"{
            "name": "bad-alpha",
            "kind": "amalgam",
            "general": {
                "group_u": { "cayley_table": [[0]] },
                "group_a": { "cayley_table": [[0, 1], [1, 0]] },
                "group_b": { "cayley_table": [[0, 1], [1, 0]] },
                "group_h": { "cayley_table": [[0, 1], [1, 0]] },
                "embed_a": [0],
                "embed_b": [0],
                "alpha_a": [0, 1],
                "alpha_b": [0, 0]
            },
            "params": { "seed": 3 }
        }"#;
        let err = parse_scenario_str(text, "inline").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("alpha is not injective on vertex group B"), "got: {msg}");
    }

    #[test]
    fn general_amalgam_with_injective_alphas_parses() {
        let text = r#"{
            "name": "c2-star-c2",
            "kind": "amalgam",
            "general": {
                "group_u": { "cayley_table": [[0]] },
                "group_a": { "cayley_table": [[0, 1], [1, 0]] },
                "group_b": { "cayley_table": [[0, 1], [1, 0]] },
                "group_h": { "cayley_table": [[0, 1], [1, 0]] },
                "embed_a": [0],
                "embed_b": [0],
                "alpha_a": [0, 1],
                "alpha_b": [0, 1]
            },
            "params": { "seed": 3 }
        }"#;
        let sc = parse_scenario_str(text, "inline").unwrap();
        assert_eq!(sc.tree_spec().unwrap().h().order(), 2);
    }

    #[test]
    fn synthetic_index_scenario_parses() {
        let text = r#"{
            "name": "index-mixed",
            "kind": "synthetic_index",
            "groups_h": [
                { "cayley_table": [[0, 1], [1, 0]] },
                { "cayley_table": [[0, 1, 2], [1, 2, 0], [2, 0, 1]] },
                { "permutation_generators": [[1, 0, 2], [1, 2, 0]] }
            ],
            "params": { "seed": 404, "trials": 200 }
        }"#;
        let sc = parse_scenario_str(text, "inline").unwrap();
        match &sc.payload {
            Payload::Index(groups) => {
                assert_eq!(groups.len(), 3);
                assert_eq!(groups[0].order(), 2);
                assert_eq!(groups[1].order(), 3);
                assert_eq!(groups[2].order(), 6);
            }
            _ => panic!("wrong payload"),
        }
        assert_eq!(sc.norm_groups().len(), 3);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let text = s3_amalgam_json().replace("\"subgroup_u\"", "\"subgroup_v\"");
        let err = parse_scenario_str(&text, "inline").unwrap_err();
        assert!(err.to_string().contains("unexpected field \"subgroup_v\""));
    }

    #[test]
    fn unknown_kind_is_rejected() {
        let text = s3_amalgam_json().replace("\"amalgam\"", "\"graph\"");
        let err = parse_scenario_str(&text, "inline").unwrap_err();
        assert!(err.to_string().contains("unknown kind"));
    }

    #[test]
    fn syntax_errors_carry_a_position() {
        let err = parse_scenario_str("{\n  \"name\": ,\n}", "broken.json").unwrap_err();
        match err {
            ScenarioError::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_subgroup_u_is_rejected() {
        let text = s3_amalgam_json().replace("[0, 1]", "[0, 1, 3]");
        let err = parse_scenario_str(&text, "inline").unwrap_err();
        assert!(err.to_string().contains("closed"), "got: {err}");
    }

    #[test]
    fn zero_params_are_rejected() {
        let text = s3_amalgam_json().replace("{ \"seed\": 1729 }", "{ \"seed\": 1729, \"trials\": 0 }");
        let err = parse_scenario_str(&text, "inline").unwrap_err();
        assert!(err.to_string().contains("params.trials"));
    }

    #[test]
    fn bad_labels_are_rejected() {
        let text = s3_amalgam_json().replace("\"e\", ", "");
        let err = parse_scenario_str(&text, "inline").unwrap_err();
        assert!(err.to_string().contains("group_h"), "got: {err}");
    }

    #[test]
    fn shipped_scenarios_parse() {
        let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
        let mut seen = 0;
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.extension() != Some("json".as_ref())
                || path.file_name() == Some("scenario.schema.json".as_ref())
            {
                continue;
            }
            let scenario = parse_scenario(&path).unwrap();
            assert!(!scenario.name.is_empty());
            seen += 1;
        }
        assert_eq!(seen, 4);
    }
}
