//! Generic node/edge form of the graph: the interchange and validation format.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::model::{
    Aog, Category, Part, PartKind, PartTemplate, Patch, PatchAppearance, Pose, RelBox, TemplateAnd,
    TemplateOr,
};
use super::scoring::{Affine, AndParams};

pub const OR_LAYERS: [u8; 5] = [1, 2, 4, 6, 8];
pub const AND_LAYERS: [u8; 3] = [3, 5, 7];
pub const TERMINAL_LAYER: u8 = 9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TerminalNode {
    pub template: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartInfo {
    pub kind: PartKind,
    pub name: String,
    pub aspect: f64,
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrNode {
    pub children: Vec<usize>,
    pub invisible_penalty: Option<f64>,
    /// Present on layer-4 part nodes.
    pub part: Option<PartInfo>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer5Appearance {
    pub appearance: PatchAppearance,
    pub norm: Affine,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AndNode {
    pub children: Vec<usize>,
    pub params: AndParams,
    /// Present on layer-5 patch nodes.
    pub appearance: Option<Layer5Appearance>,
    /// Child boxes relative to this node's box (layers 5 and 7).
    pub layout: Vec<RelBox>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum NodeBody {
    Terminal(TerminalNode),
    Or(OrNode),
    And(AndNode),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphNode {
    pub layer: u8,
    pub label: String,
    pub body: NodeBody,
}

impl GraphNode {
    pub fn children(&self) -> &[usize] {
        match &self.body {
            NodeBody::Terminal(_) => &[],
            NodeBody::Or(o) => &o.children,
            NodeBody::And(a) => &a.children,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AogGraph {
    pub feature_dim: usize,
    pub root: usize,
    pub nodes: Vec<GraphNode>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub node: Option<usize>,
    pub rule: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.node {
            Some(n) => write!(f, "node {n}: {}", self.rule),
            None => write!(f, "{}", self.rule),
        }
    }
}

/// Checks the structural invariants; an empty report means the graph is well formed.
pub fn validate(graph: &AogGraph) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut v = |node: Option<usize>, rule: String| out.push(Violation { node, rule });
    let n = graph.nodes.len();
    match graph.nodes.get(graph.root) {
        None => v(None, format!("root {} does not exist", graph.root)),
        Some(r) if r.layer != 1 => v(Some(graph.root), "root must be in layer 1".into()),
        _ => {}
    }
    let mut parents = vec![0usize; n];
    for (id, node) in graph.nodes.iter().enumerate() {
        let kind_ok = match &node.body {
            NodeBody::Terminal(_) => node.layer == TERMINAL_LAYER,
            NodeBody::Or(_) => OR_LAYERS.contains(&node.layer),
            NodeBody::And(_) => AND_LAYERS.contains(&node.layer),
        };
        if !kind_ok {
            v(
                Some(id),
                format!("node type not allowed in layer {}", node.layer),
            );
        }
        for &c in node.children() {
            match graph.nodes.get(c) {
                None => v(Some(id), format!("child {c} does not exist")),
                Some(child) => {
                    parents[c] += 1;
                    if child.layer != node.layer + 1 {
                        v(
                            Some(id),
                            format!(
                                "edge from layer {} to layer {} skips adjacency",
                                node.layer, child.layer
                            ),
                        );
                    }
                }
            }
        }
        match &node.body {
            NodeBody::Terminal(t) => {
                if t.template.len() != graph.feature_dim {
                    v(
                        Some(id),
                        format!(
                            "terminal template length {} != feature dimension",
                            t.template.len()
                        ),
                    );
                }
            }
            NodeBody::Or(o) => {
                if o.children.is_empty() {
                    v(Some(id), "OR node needs at least one child".into());
                }
                if node.layer == 4 {
                    validate_part(graph, id, o, &mut v);
                } else if o.part.is_some() {
                    v(Some(id), "part info outside layer 4".into());
                }
            }
            NodeBody::And(a) => {
                for p in &a.params.pairs {
                    if p.a >= a.children.len() || p.b >= a.children.len() || p.a == p.b {
                        v(
                            Some(id),
                            format!(
                                "neighbor pair ({}, {}) is not a pair of distinct children",
                                p.a, p.b
                            ),
                        );
                    }
                    if p.weight > 0.0 {
                        v(Some(id), "pair weight must be non-positive".into());
                    }
                }
                if node.layer == 3 {
                    if a.params.has_global_appearance {
                        v(Some(id), "pose nodes carry no global appearance".into());
                    }
                    let k = a.children.len();
                    for i in 0..k {
                        for j in i + 1..k {
                            let c = a
                                .params
                                .pairs
                                .iter()
                                .filter(|p| (p.a == i && p.b == j) || (p.a == j && p.b == i))
                                .count();
                            if c != 1 {
                                v(
                                    Some(id),
                                    format!(
                                        "pose parts {i} and {j} must be neighbors exactly once"
                                    ),
                                );
                            }
                        }
                    }
                }
                if node.layer == 5 && a.appearance.is_none() {
                    v(Some(id), "layer-5 node without appearance model".into());
                }
                if node.layer != 5 && a.appearance.is_some() {
                    v(Some(id), "appearance model outside layer 5".into());
                }
                if !a.layout.is_empty() && a.layout.len() != a.children.len() {
                    v(Some(id), "layout does not match children".into());
                }
                if node.layer != 3 && !a.children.is_empty() && a.layout.len() != a.children.len() {
                    v(Some(id), "sub-part children need a layout".into());
                }
            }
        }
    }
    for (id, &p) in parents.iter().enumerate() {
        if p > 1 {
            v(Some(id), "node has more than one parent".into());
        }
        if p == 0 && id != graph.root {
            v(Some(id), "node unreachable from the root".into());
        }
    }
    out
}

fn validate_part(
    graph: &AogGraph,
    id: usize,
    o: &OrNode,
    v: &mut impl FnMut(Option<usize>, String),
) {
    let Some(info) = &o.part else {
        v(Some(id), "layer-4 node without part info".into());
        return;
    };
    if o.invisible_penalty.is_none() {
        v(Some(id), "part node without invisible child".into());
    }
    if !(info.aspect > 0.0 && info.scale > 0.0) {
        v(Some(id), "part scale and aspect must be positive".into());
    }
    let apps: Vec<&Layer5Appearance> = o
        .children
        .iter()
        .filter_map(|&c| graph.nodes.get(c))
        .filter_map(|n| match &n.body {
            NodeBody::And(a) => a.appearance.as_ref(),
            _ => None,
        })
        .collect();
    match info.kind {
        PartKind::Semantic => {
            if o.children.len() != 1 {
                v(
                    Some(id),
                    format!(
                        "semantic part has {} visible children; only one besides the invisible child is allowed",
                        o.children.len()
                    ),
                );
            }
            if apps
                .iter()
                .any(|a| !matches!(a.appearance, PatchAppearance::Semantic { .. }))
            {
                v(Some(id), "semantic part child without a classifier".into());
            }
        }
        PartKind::Latent => {
            for a in apps {
                match a.appearance {
                    PatchAppearance::Latent { ref mean } => {
                        if mean.len() != graph.feature_dim {
                            v(
                                Some(id),
                                "latent mean appearance has the wrong length".into(),
                            );
                        }
                        if a.norm.w >= 0.0 {
                            v(Some(id), "latent appearance weight must be negative".into());
                        }
                    }
                    PatchAppearance::Semantic { .. } => {
                        v(Some(id), "latent part child with a classifier".into())
                    }
                }
            }
        }
    }
}

struct Builder {
    nodes: Vec<GraphNode>,
}

impl Builder {
    fn push(&mut self, layer: u8, label: String, body: NodeBody) -> usize {
        self.nodes.push(GraphNode { layer, label, body });
        self.nodes.len() - 1
    }

    fn pose(&mut self, pose: &Pose) -> usize {
        let id = self.push(
            3,
            pose.name.clone(),
            NodeBody::Terminal(TerminalNode { template: vec![] }),
        );
        let children: Vec<usize> = pose.parts.iter().map(|p| self.part(p)).collect();
        self.nodes[id].body = NodeBody::And(AndNode {
            children,
            params: pose.and.clone(),
            appearance: None,
            layout: vec![],
        });
        id
    }

    fn part(&mut self, part: &Part) -> usize {
        let id = self.push(
            4,
            part.name.clone(),
            NodeBody::Terminal(TerminalNode { template: vec![] }),
        );
        let children: Vec<usize> = part
            .children
            .iter()
            .enumerate()
            .map(|(i, p)| self.patch(&format!("{}/{i}", part.name), p))
            .collect();
        self.nodes[id].body = NodeBody::Or(OrNode {
            children,
            invisible_penalty: Some(part.invisible_penalty),
            part: Some(PartInfo {
                kind: part.kind,
                name: part.name.clone(),
                aspect: part.aspect,
                scale: part.scale,
            }),
        });
        id
    }

    fn patch(&mut self, label: &str, patch: &Patch) -> usize {
        let id = self.push(
            5,
            label.to_string(),
            NodeBody::Terminal(TerminalNode { template: vec![] }),
        );
        let (children, params, layout) = match &patch.template {
            None => (vec![], AndParams::new(0.0), vec![]),
            Some(t) => {
                let kids = t
                    .halves
                    .iter()
                    .enumerate()
                    .map(|(i, h)| self.template_or(&format!("{label}/{i}"), h))
                    .collect();
                (kids, t.and.clone(), t.layout.to_vec())
            }
        };
        self.nodes[id].body = NodeBody::And(AndNode {
            children,
            params,
            appearance: Some(Layer5Appearance {
                appearance: patch.appearance.clone(),
                norm: patch.norm,
            }),
            layout,
        });
        id
    }

    fn template_or(&mut self, label: &str, or: &TemplateOr) -> usize {
        let id = self.push(
            6,
            label.to_string(),
            NodeBody::Terminal(TerminalNode { template: vec![] }),
        );
        let children = or
            .alternatives
            .iter()
            .enumerate()
            .map(|(i, alt)| {
                let a = self.push(
                    7,
                    format!("{label}/{i}"),
                    NodeBody::Terminal(TerminalNode { template: vec![] }),
                );
                let leaves = alt
                    .leaves
                    .iter()
                    .enumerate()
                    .map(|(j, leaf)| {
                        let o = self.push(
                            8,
                            format!("{label}/{i}/{j}"),
                            NodeBody::Terminal(TerminalNode { template: vec![] }),
                        );
                        let terms = leaf
                            .iter()
                            .enumerate()
                            .map(|(k, t)| {
                                self.push(
                                    9,
                                    format!("{label}/{i}/{j}/{k}"),
                                    NodeBody::Terminal(TerminalNode {
                                        template: t.clone(),
                                    }),
                                )
                            })
                            .collect();
                        self.nodes[o].body = NodeBody::Or(OrNode {
                            children: terms,
                            invisible_penalty: None,
                            part: None,
                        });
                        o
                    })
                    .collect();
                self.nodes[a].body = NodeBody::And(AndNode {
                    children: leaves,
                    params: alt.and.clone(),
                    appearance: None,
                    layout: alt.layout.to_vec(),
                });
                a
            })
            .collect();
        self.nodes[id].body = NodeBody::Or(OrNode {
            children,
            invisible_penalty: None,
            part: None,
        });
        id
    }
}

impl Aog {
    pub fn to_graph(&self) -> AogGraph {
        let mut b = Builder { nodes: Vec::new() };
        let root = b.push(
            1,
            "root".into(),
            NodeBody::Terminal(TerminalNode { template: vec![] }),
        );
        let cats: Vec<usize> = self
            .categories
            .iter()
            .map(|c| {
                b.push(
                    2,
                    c.name.clone(),
                    NodeBody::Terminal(TerminalNode { template: vec![] }),
                )
            })
            .collect();
        let pose_nodes: Vec<usize> = self.poses.iter().map(|p| b.pose(p)).collect();
        for (ci, c) in self.categories.iter().enumerate() {
            b.nodes[cats[ci]].body = NodeBody::Or(OrNode {
                children: c.poses.iter().map(|&p| pose_nodes[p]).collect(),
                invisible_penalty: None,
                part: None,
            });
        }
        b.nodes[root].body = NodeBody::Or(OrNode {
            children: cats,
            invisible_penalty: None,
            part: None,
        });
        AogGraph {
            feature_dim: self.feature_dim,
            root,
            nodes: b.nodes,
        }
    }

    /// Rebuilds the typed model; fails with the validation report on malformed input.
    pub fn from_graph(graph: &AogGraph) -> Result<Aog> {
        let report = validate(graph);
        if !report.is_empty() {
            let msg: Vec<String> = report.iter().map(|v| v.to_string()).collect();
            return Err(Error::MalformedGraph(msg.join("; ")));
        }
        let nodes = &graph.nodes;
        let or = |id: usize| match &nodes[id].body {
            NodeBody::Or(o) => o,
            _ => unreachable!("validated"),
        };
        let and = |id: usize| match &nodes[id].body {
            NodeBody::And(a) => a,
            _ => unreachable!("validated"),
        };
        let mut aog = Aog::new(graph.feature_dim);
        let mut pose_ids: Vec<(usize, usize)> = Vec::new();
        for &c in &or(graph.root).children {
            let ci = aog.categories.len();
            aog.categories.push(Category {
                name: nodes[c].label.clone(),
                poses: vec![],
            });
            for &p in &or(c).children {
                pose_ids.push((p, ci));
            }
        }
        pose_ids.sort();
        let mut index_of = std::collections::HashMap::new();
        for &(node, ci) in &pose_ids {
            let a = and(node);
            let parts = a
                .children
                .iter()
                .map(|&pid| {
                    let o = or(pid);
                    let info = o.part.as_ref().expect("validated");
                    let children = o
                        .children
                        .iter()
                        .map(|&d| {
                            let pa = and(d);
                            let app = pa.appearance.as_ref().expect("validated");
                            let template = if pa.children.is_empty() {
                                None
                            } else {
                                Some(read_template(nodes, pa))
                            };
                            Patch {
                                appearance: app.appearance.clone(),
                                norm: app.norm,
                                template,
                            }
                        })
                        .collect();
                    Part {
                        kind: info.kind,
                        name: info.name.clone(),
                        aspect: info.aspect,
                        scale: info.scale,
                        invisible_penalty: o.invisible_penalty.expect("validated"),
                        children,
                    }
                })
                .collect();
            index_of.insert(node, aog.poses.len());
            aog.poses.push(Pose {
                name: nodes[node].label.clone(),
                category: ci,
                parts,
                and: a.params.clone(),
            });
        }
        for (ci, &c) in or(graph.root).children.iter().enumerate() {
            aog.categories[ci].poses = or(c).children.iter().map(|p| index_of[p]).collect();
        }
        Ok(aog)
    }
}

fn read_template(nodes: &[GraphNode], a: &AndNode) -> PartTemplate {
    let or = |id: usize| match &nodes[id].body {
        NodeBody::Or(o) => o,
        _ => unreachable!("validated"),
    };
    let and = |id: usize| match &nodes[id].body {
        NodeBody::And(a) => a,
        _ => unreachable!("validated"),
    };
    let term = |id: usize| match &nodes[id].body {
        NodeBody::Terminal(t) => t.template.clone(),
        _ => unreachable!("validated"),
    };
    let half = |id: usize| TemplateOr {
        alternatives: or(id)
            .children
            .iter()
            .map(|&s| {
                let sa = and(s);
                TemplateAnd {
                    and: sa.params.clone(),
                    layout: [sa.layout[0], sa.layout[1]],
                    leaves: [
                        or(sa.children[0])
                            .children
                            .iter()
                            .map(|&t| term(t))
                            .collect(),
                        or(sa.children[1])
                            .children
                            .iter()
                            .map(|&t| term(t))
                            .collect(),
                    ],
                }
            })
            .collect(),
    };
    PartTemplate {
        and: a.params.clone(),
        layout: [a.layout[0], a.layout[1]],
        halves: [half(a.children[0]), half(a.children[1])],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aog::model::LinearClassifier;
    use crate::aog::scoring::NeighborPair;

    fn template_and(dim: usize) -> TemplateAnd {
        TemplateAnd {
            and: AndParams::new(-1.0),
            layout: RelBox::halves(2.0, 1.0),
            leaves: [
                vec![vec![0.5; dim]],
                vec![vec![0.25; dim], vec![-0.25; dim]],
            ],
        }
    }

    fn small_aog() -> Aog {
        let dim = 3;
        let latent = Part {
            kind: PartKind::Latent,
            name: "latent-0".into(),
            aspect: 1.0,
            scale: 4.0,
            invisible_penalty: -2.0,
            children: vec![Patch {
                appearance: PatchAppearance::Latent {
                    mean: vec![0.1, 0.2, 1.0],
                },
                norm: Affine { w: -1.5, b: 0.25 },
                template: None,
            }],
        };
        let semantic = Part {
            kind: PartKind::Semantic,
            name: "wheel".into(),
            aspect: 0.75,
            scale: 4.0,
            invisible_penalty: -1.0,
            children: vec![Patch {
                appearance: PatchAppearance::Semantic {
                    classifier: LinearClassifier {
                        weights: vec![1.0, -2.0, 0.5],
                        bias: 0.1,
                    },
                },
                norm: Affine { w: 0.5, b: -0.3 },
                template: Some(PartTemplate {
                    and: AndParams::new(-0.5),
                    layout: RelBox::halves(4.0, 3.0),
                    halves: [
                        TemplateOr {
                            alternatives: vec![template_and(dim)],
                        },
                        TemplateOr {
                            alternatives: vec![template_and(dim), template_and(dim)],
                        },
                    ],
                }),
            }],
        };
        let mut and = AndParams::new(-3.0);
        and.pairs.push(NeighborPair {
            a: 0,
            b: 1,
            weight: -0.7,
            mean_geometry: [0.0, 0.6, 0.8, -0.2],
        });
        let mut aog = Aog::new(dim);
        let c = aog.add_category("car");
        aog.add_pose(Pose {
            name: "car-0".into(),
            category: c,
            parts: vec![latent, semantic],
            and,
        });
        aog
    }

    #[test]
    fn well_formed_graph_has_empty_report() {
        assert!(validate(&small_aog().to_graph()).is_empty());
    }

    #[test]
    fn typed_round_trip() {
        let aog = small_aog();
        assert_eq!(Aog::from_graph(&aog.to_graph()).unwrap(), aog);
    }

    #[test]
    fn semantic_part_with_two_children_is_one_violation() {
        let mut aog = small_aog();
        let extra = aog.poses[0].parts[1].children[0].clone();
        aog.poses[0].parts[1].children.push(extra);
        let report = validate(&aog.to_graph());
        assert_eq!(report.len(), 1, "{report:?}");
        assert!(report[0]
            .rule
            .contains("only one besides the invisible child"));
    }

    #[test]
    fn skipping_a_layer_is_an_adjacency_violation() {
        let mut g = small_aog().to_graph();
        let pose = g.nodes.iter().position(|n| n.layer == 3).unwrap();
        let patch = g.nodes.iter().position(|n| n.layer == 5).unwrap();
        let part = g.nodes.iter().position(|n| n.layer == 4).unwrap();
        // rewire pose -> patch, dropping the part in between from the tree
        if let NodeBody::And(a) = &mut g.nodes[pose].body {
            a.children[0] = patch;
        }
        if let NodeBody::Or(o) = &mut g.nodes[part].body {
            o.children.clear();
        }
        let report = validate(&g);
        assert!(
            report
                .iter()
                .any(|v| v.node == Some(pose) && v.rule.contains("adjacency")),
            "{report:?}"
        );
        assert!(Aog::from_graph(&g).is_err());
    }

    #[test]
    fn positive_latent_weight_is_rejected() {
        let mut aog = small_aog();
        aog.poses[0].parts[0].children[0].norm.w = 0.5;
        assert_eq!(validate(&aog.to_graph()).len(), 1);
    }
}
