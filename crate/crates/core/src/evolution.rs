//! The per-strategy evolution tree of algorithm instances and the data
//! derived from it for the evolution view: glyph rings, radar scores,
//! parent deltas and parallel-coordinates rows.

use std::collections::HashMap;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::metrics::{normalize_scores, CategoryScores, InstanceScores, MetricValue, MetricVector, OrientationTable, PARALLEL_AXES};
use crate::models::{ModelKind, ModelParams, ParamValue};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvolutionError {
    #[error("unknown parent instance `{0}`")]
    UnknownParent(String),
    #[error("unknown instance `{0}`")]
    UnknownInstance(String),
    #[error("the tree already has a root; new instances need a parent")]
    SecondRoot,
    #[error("model kind `{got}` does not match the strategy's `{expected}`")]
    ModelKindMismatch { expected: ModelKind, got: ModelKind },
    #[error("instance belongs to strategy `{got}`, not `{expected}`")]
    StrategyMismatch { expected: String, got: String },
    #[error("instance id `{0}` already exists")]
    DuplicateId(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmInstance {
    pub id: String,
    pub strategy_id: String,
    pub parent_id: Option<String>,
    pub label: String,
    pub params: ModelParams,
    pub record_ref: String,
    pub metrics: MetricVector,
    pub created_at: DateTime<Utc>,
}

/// Everything needed to append an instance; `label` is auto-assigned when absent.
#[derive(Debug, Clone)]
pub struct NewInstance {
    pub id: String,
    pub parent_id: Option<String>,
    pub label: Option<String>,
    pub params: ModelParams,
    pub record_ref: String,
    pub metrics: MetricVector,
    pub created_at: DateTime<Utc>,
}

const GREEK: [&str; 24] = [
    "α", "β", "γ", "δ", "ε", "ζ", "η", "θ", "ι", "κ", "λ", "μ", "ν", "ξ", "ο", "π", "ρ", "σ", "τ", "υ", "φ", "χ", "ψ", "ω",
];

fn branch_letter(branch: usize) -> String {
    GREEK[branch % GREEK.len()].repeat(branch / GREEK.len() + 1)
}

/// Append-only tree for one strategy. Nodes are kept in insertion order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TreeFile", into = "TreeFile")]
pub struct EvolutionTree {
    strategy_id: String,
    model_kind: ModelKind,
    nodes: Vec<AlgorithmInstance>,
    index: HashMap<String, usize>,
    children: HashMap<String, Vec<usize>>,
    /// Branch number (label letter) and depth per node.
    lineage: Vec<(usize, usize)>,
    branches: usize,
}

#[derive(Serialize, Deserialize)]
struct TreeFile {
    strategy_id: String,
    model_kind: ModelKind,
    root: Option<String>,
    nodes: Vec<AlgorithmInstance>,
}

impl TryFrom<TreeFile> for EvolutionTree {
    type Error = EvolutionError;

    fn try_from(file: TreeFile) -> Result<Self, Self::Error> {
        let mut tree = EvolutionTree::new(file.strategy_id, file.model_kind);
        for node in file.nodes {
            tree.add_instance(NewInstance {
                id: node.id,
                parent_id: node.parent_id,
                label: Some(node.label),
                params: node.params,
                record_ref: node.record_ref,
                metrics: node.metrics,
                created_at: node.created_at,
            })?;
        }
        if tree.root().map(|r| r.id.clone()) != file.root {
            return Err(EvolutionError::UnknownInstance(file.root.unwrap_or_default()));
        }
        Ok(tree)
    }
}

impl From<EvolutionTree> for TreeFile {
    fn from(tree: EvolutionTree) -> Self {
        TreeFile {
            strategy_id: tree.strategy_id.clone(),
            model_kind: tree.model_kind,
            root: tree.root().map(|r| r.id.clone()),
            nodes: tree.nodes,
        }
    }
}

impl EvolutionTree {
    pub fn new(strategy_id: impl Into<String>, model_kind: ModelKind) -> Self {
        EvolutionTree {
            strategy_id: strategy_id.into(),
            model_kind,
            nodes: Vec::new(),
            index: HashMap::new(),
            children: HashMap::new(),
            lineage: Vec::new(),
            branches: 0,
        }
    }

    /// A tree keyed by the strategy the parameters belong to.
    pub fn for_params(params: &ModelParams) -> Self {
        EvolutionTree::new(params.strategy_id(), params.kind())
    }

    pub fn strategy_id(&self) -> &str {
        &self.strategy_id
    }

    pub fn model_kind(&self) -> ModelKind {
        self.model_kind
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn root(&self) -> Option<&AlgorithmInstance> {
        self.nodes.first()
    }

    /// Instances in insertion order.
    pub fn nodes(&self) -> &[AlgorithmInstance] {
        &self.nodes
    }

    pub fn get(&self, id: &str) -> Result<&AlgorithmInstance, EvolutionError> {
        self.index.get(id).map(|&i| &self.nodes[i]).ok_or_else(|| EvolutionError::UnknownInstance(id.to_string()))
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    pub fn parent_of(&self, id: &str) -> Result<Option<&AlgorithmInstance>, EvolutionError> {
        let node = self.get(id)?;
        Ok(node.parent_id.as_deref().map(|p| &self.nodes[self.index[p]]))
    }

    pub fn children_of(&self, id: &str) -> Result<Vec<&AlgorithmInstance>, EvolutionError> {
        self.get(id)?;
        Ok(self.children.get(id).map(|c| c.iter().map(|&i| &self.nodes[i]).collect()).unwrap_or_default())
    }

    /// Checks an insertion without performing it.
    pub fn check_insert(&self, params: &ModelParams, parent_id: Option<&str>) -> Result<(), EvolutionError> {
        if params.kind() != self.model_kind {
            return Err(EvolutionError::ModelKindMismatch { expected: self.model_kind, got: params.kind() });
        }
        if params.strategy_id() != self.strategy_id {
            return Err(EvolutionError::StrategyMismatch { expected: self.strategy_id.clone(), got: params.strategy_id() });
        }
        match parent_id {
            Some(p) if !self.index.contains_key(p) => Err(EvolutionError::UnknownParent(p.to_string())),
            None if !self.nodes.is_empty() => Err(EvolutionError::SecondRoot),
            _ => Ok(()),
        }
    }

    pub fn add_instance(&mut self, new: NewInstance) -> Result<&AlgorithmInstance, EvolutionError> {
        self.check_insert(&new.params, new.parent_id.as_deref())?;
        if self.index.contains_key(&new.id) {
            return Err(EvolutionError::DuplicateId(new.id));
        }
        let (branch, depth) = match new.parent_id.as_deref() {
            None => (0, 0),
            Some(p) => {
                let pi = self.index[p];
                let (parent_branch, parent_depth) = self.lineage[pi];
                let first_child = self.children.get(p).is_none_or(|c| c.is_empty());
                let branch = if first_child {
                    parent_branch
                } else {
                    self.branches += 1;
                    self.branches
                };
                (branch, parent_depth + 1)
            }
        };
        let label = new.label.unwrap_or_else(|| format!("{}{}", branch_letter(branch), depth + 1));
        let idx = self.nodes.len();
        if let Some(p) = &new.parent_id {
            self.children.entry(p.clone()).or_default().push(idx);
        }
        self.index.insert(new.id.clone(), idx);
        self.lineage.push((branch, depth));
        self.nodes.push(AlgorithmInstance {
            id: new.id,
            strategy_id: self.strategy_id.clone(),
            parent_id: new.parent_id,
            label,
            params: new.params,
            record_ref: new.record_ref,
            metrics: new.metrics,
            created_at: new.created_at,
        });
        Ok(&self.nodes[idx])
    }

    /// Depth-first descendants of `id` (excluding itself), children in insertion order.
    pub fn subtree(&self, id: &str) -> Result<Vec<String>, EvolutionError> {
        let start = *self.index.get(id).ok_or_else(|| EvolutionError::UnknownInstance(id.to_string()))?;
        let mut out = Vec::new();
        let mut stack: Vec<usize> = self.child_indices(start).iter().rev().copied().collect();
        while let Some(i) = stack.pop() {
            out.push(self.nodes[i].id.clone());
            stack.extend(self.child_indices(i).iter().rev());
        }
        Ok(out)
    }

    fn child_indices(&self, idx: usize) -> &[usize] {
        self.children.get(&self.nodes[idx].id).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Normalized scores for every node, in insertion order.
    pub fn scores(&self) -> Vec<InstanceScores> {
        let metrics: Vec<MetricVector> = self.nodes.iter().map(|n| n.metrics).collect();
        normalize_scores(&metrics, &OrientationTable::default()).unwrap_or_default()
    }

    /// Verifies single root, closed parent references, acyclicity and reachability.
    pub fn check_invariants(&self) -> Result<(), String> {
        if self.nodes.is_empty() {
            return Ok(());
        }
        let roots = self.nodes.iter().filter(|n| n.parent_id.is_none()).count();
        if roots != 1 {
            return Err(format!("expected one root, found {roots}"));
        }
        for (i, n) in self.nodes.iter().enumerate() {
            if n.strategy_id != self.strategy_id {
                return Err(format!("node {} belongs to another strategy", n.id));
            }
            if let Some(p) = &n.parent_id {
                let Some(&pi) = self.index.get(p) else {
                    return Err(format!("node {} has dangling parent {p}", n.id));
                };
                if pi >= i {
                    return Err(format!("node {} precedes its parent", n.id));
                }
            }
        }
        let root = self.nodes[0].id.clone();
        let reachable = self.subtree(&root).map_err(|e| e.to_string())?.len() + 1;
        if reachable != self.nodes.len() {
            return Err(format!("{reachable} of {} nodes reachable from the root", self.nodes.len()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RingSegment {
    pub param_name: String,
    pub raw_value: ParamValue,
    /// Position of the value within the strategy's range, in [0, 1].
    pub relative: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamDelta {
    pub param_name: String,
    pub signed_change: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlyphData {
    pub instance_id: String,
    pub label: String,
    pub ring: Vec<RingSegment>,
    pub radar_self: CategoryScores,
    pub radar_parent: Option<CategoryScores>,
    pub deltas: Vec<ParamDelta>,
}

fn numeric_param(params: &ModelParams, name: &str) -> Option<f64> {
    params.segments().into_iter().find(|(n, _)| *n == name).and_then(|(_, v)| v.as_number())
}

pub fn glyph_data(tree: &EvolutionTree, instance_id: &str) -> Result<GlyphData, EvolutionError> {
    let node = tree.get(instance_id)?;
    let idx = tree.index[instance_id];
    let scores = tree.scores();
    let parent = tree.parent_of(instance_id)?;

    let ring = node
        .params
        .segments()
        .into_iter()
        .map(|(name, raw)| {
            let relative = match raw.as_number() {
                None => 0.5,
                Some(v) => {
                    let values: Vec<f64> = tree.nodes.iter().filter_map(|n| numeric_param(&n.params, name)).collect();
                    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
                    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    if hi > lo {
                        ((v - lo) / (hi - lo)).clamp(0.0, 1.0)
                    } else {
                        0.5
                    }
                }
            };
            RingSegment { param_name: name.to_string(), raw_value: raw, relative }
        })
        .collect();

    let deltas = match parent {
        None => Vec::new(),
        Some(p) => node
            .params
            .segments()
            .into_iter()
            .filter_map(|(name, raw)| {
                let child = raw.as_number()?;
                let parent_value = numeric_param(&p.params, name)?;
                Some(ParamDelta { param_name: name.to_string(), signed_change: child - parent_value })
            })
            .collect(),
    };

    Ok(GlyphData {
        instance_id: node.id.clone(),
        label: node.label.clone(),
        ring,
        radar_self: scores[idx].categories,
        radar_parent: parent.map(|p| scores[tree.index[&p.id]].categories),
        deltas,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RowRole {
    Current,
    Parent,
    Other,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParallelRow {
    pub instance_id: String,
    pub label: String,
    pub role: RowRole,
    /// Raw metric values in axis order.
    pub values: Vec<MetricValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParallelCoordinates {
    pub axes: Vec<String>,
    pub rows: Vec<ParallelRow>,
}

pub fn parallel_coordinates(tree: &EvolutionTree, instance_id: &str) -> Result<ParallelCoordinates, EvolutionError> {
    let node = tree.get(instance_id)?;
    let parent_id = node.parent_id.as_deref();
    let row = |n: &AlgorithmInstance, role| ParallelRow {
        instance_id: n.id.clone(),
        label: n.label.clone(),
        role,
        values: PARALLEL_AXES.iter().map(|&m| n.metrics.get(m)).collect(),
    };
    let mut rows = vec![row(node, RowRole::Current)];
    if let Some(p) = tree.parent_of(instance_id)? {
        rows.push(row(p, RowRole::Parent));
    }
    rows.extend(
        tree.nodes
            .iter()
            .filter(|n| n.id != node.id && Some(n.id.as_str()) != parent_id)
            .map(|n| row(n, RowRole::Other)),
    );
    Ok(ParallelCoordinates { axes: PARALLEL_AXES.iter().map(|m| m.label().to_string()).collect(), rows })
}

/// One node of the tree payload served to the evolution view.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeNodeView {
    pub id: String,
    pub label: String,
    pub parent: Option<String>,
    pub params: ModelParams,
    pub metrics: MetricVector,
    pub scores: InstanceScores,
    pub created_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeView {
    pub strategy_id: String,
    pub model_kind: ModelKind,
    pub root: Option<String>,
    pub nodes: Vec<TreeNodeView>,
}

pub fn tree_view(tree: &EvolutionTree) -> TreeView {
    let scores = tree.scores();
    TreeView {
        strategy_id: tree.strategy_id.clone(),
        model_kind: tree.model_kind,
        root: tree.root().map(|r| r.id.clone()),
        nodes: tree
            .nodes
            .iter()
            .zip(scores)
            .map(|(n, s)| TreeNodeView {
                id: n.id.clone(),
                label: n.label.clone(),
                parent: n.parent_id.clone(),
                params: n.params.clone(),
                metrics: n.metrics,
                scores: s,
                created_at: n.created_at,
            })
            .collect(),
    }
}
