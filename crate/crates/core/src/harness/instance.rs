//! Versioned JSON instance files.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Distribution, WeightedGraph};
use crate::instances::Problem;

pub const INSTANCE_VERSION: u32 = 1;

const KNOWN_FIELDS: [&str; 6] = ["version", "vertices", "edges", "marked", "sigma", "C"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub version: u32,
    pub vertices: Vec<String>,
    pub edges: Vec<(String, String, f64)>,
    pub marked: Vec<String>,
    pub sigma: BTreeMap<String, f64>,
    #[serde(rename = "C", default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct LoadedInstance {
    pub file: InstanceFile,
    pub problem: Problem,
    pub budget: Option<f64>,
    /// Marked set empty: only detection makes sense.
    pub detect_mode: bool,
    pub warnings: Vec<String>,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Instance(msg.into())
}

fn json_error(e: serde_json::Error) -> Error {
    bad(format!("line {} column {}: {e}", e.line(), e.column()))
}

/// Parses and validates; in lenient mode unknown top-level fields become warnings.
pub fn parse_instance(text: &str, name: &str, lenient: bool) -> Result<LoadedInstance> {
    let mut warnings = Vec::new();
    let file: InstanceFile = if lenient {
        let mut v: serde_json::Value = serde_json::from_str(text).map_err(json_error)?;
        if let Some(obj) = v.as_object_mut() {
            let unknown: Vec<String> = obj.keys().filter(|k| !KNOWN_FIELDS.contains(&k.as_str())).cloned().collect();
            for k in unknown {
                warnings.push(format!("ignoring unknown field `{k}`"));
                obj.remove(&k);
            }
        }
        serde_json::from_value(v).map_err(|e| bad(e.to_string()))?
    } else {
        serde_json::from_str(text).map_err(json_error)?
    };
    let (problem, mut more) = file.to_problem(name)?;
    warnings.append(&mut more);
    Ok(LoadedInstance {
        detect_mode: problem.marked.is_empty(),
        budget: file.budget,
        problem,
        file,
        warnings,
    })
}

pub fn load_instance(path: &Path, lenient: bool) -> Result<LoadedInstance> {
    let text = std::fs::read_to_string(path).map_err(|e| bad(format!("{}: {e}", path.display())))?;
    let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("instance");
    parse_instance(&text, name, lenient)
}

impl InstanceFile {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance serializes")
    }

    /// Vertices are named by index.
    pub fn from_problem(p: &Problem, budget: Option<f64>) -> Self {
        let n = p.graph.n();
        let name = |u: usize| u.to_string();
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u..n {
                let w = p.graph.weight(u, v);
                if w > 0.0 {
                    edges.push((name(u), name(v), w));
                }
            }
        }
        InstanceFile {
            version: INSTANCE_VERSION,
            vertices: (0..n).map(name).collect(),
            edges,
            marked: p.marked.iter().map(|&m| name(m)).collect(),
            sigma: p.sigma.support().into_iter().map(|u| (name(u), p.sigma.get(u))).collect(),
            budget,
        }
    }

    pub fn to_problem(&self, name: &str) -> Result<(Problem, Vec<String>)> {
        let mut warnings = Vec::new();
        if self.version != INSTANCE_VERSION {
            return Err(bad(format!("version {} is not supported (expected {INSTANCE_VERSION})", self.version)));
        }
        if self.vertices.is_empty() {
            return Err(bad("vertices: list is empty"));
        }
        let mut index = HashMap::new();
        for (i, v) in self.vertices.iter().enumerate() {
            if index.insert(v.as_str(), i).is_some() {
                return Err(bad(format!("vertices[{i}]: duplicate name `{v}`")));
            }
        }
        let lookup = |field: &str, v: &str| -> Result<usize> {
            index.get(v).copied().ok_or_else(|| bad(format!("{field}: unknown vertex `{v}`")))
        };
        let n = self.vertices.len();
        let mut seen: HashMap<(usize, usize), (usize, f64)> = HashMap::new();
        let mut edges = Vec::new();
        for (i, (a, b, w)) in self.edges.iter().enumerate() {
            let field = format!("edges[{i}] ({a}, {b})");
            let u = lookup(&field, a)?;
            let v = lookup(&field, b)?;
            if !w.is_finite() || *w < 0.0 {
                return Err(bad(format!("{field}: weight {w} must be a nonnegative number")));
            }
            let key = (u.min(v), u.max(v));
            if let Some(&(j, w0)) = seen.get(&key) {
                if w0 != *w {
                    return Err(bad(format!("{field}: asymmetric weights, edges[{j}] has {w0} and this entry {w}")));
                }
                warnings.push(format!("{field}: repeats edges[{j}], counted once"));
                continue;
            }
            seen.insert(key, (i, *w));
            if *w > 0.0 {
                edges.push((u, v, *w));
            }
        }
        let graph = WeightedGraph::from_edges(n, &edges).map_err(|e| bad(format!("edges: {e}")))?;
        let mut marked = Vec::new();
        for (i, m) in self.marked.iter().enumerate() {
            let u = lookup(&format!("marked[{i}]"), m)?;
            if marked.contains(&u) {
                return Err(bad(format!("marked[{i}]: duplicate vertex `{m}`")));
            }
            marked.push(u);
        }
        marked.sort_unstable();
        let mut probs = vec![0.0; n];
        for (k, &p) in &self.sigma {
            let field = format!("sigma[{k}]");
            let u = lookup(&field, k)?;
            if !p.is_finite() || p < 0.0 {
                return Err(bad(format!("{field}: probability {p} must be a nonnegative number")));
            }
            if p > 0.0 && marked.contains(&u) {
                return Err(bad(format!("{field}: σ must vanish on the marked set")));
            }
            probs[u] = p;
        }
        let sigma = Distribution::with_tolerance(probs, 1e-9).map_err(|e| bad(format!("sigma: {e}")))?;
        if let Some(c) = self.budget {
            if !(c > 0.0) || !c.is_finite() {
                return Err(bad(format!("C: budget {c} must be positive")));
            }
        }
        Ok((Problem { name: name.into(), graph, sigma, marked }, warnings))
    }
}
