//! The nine-layer And-Or graph: typed model, scoring, generic graph form and codec.

pub mod codec;
pub mod graph;
pub mod model;
pub mod scoring;

pub use graph::{validate, AogGraph, GraphNode, NodeBody, Violation};
pub use model::{
    Aog, Category, LinearClassifier, Part, PartKind, PartTemplate, Patch, PatchAppearance, Pose,
    RelBox, TemplateAnd, TemplateOr,
};
pub use scoring::{Affine, AndParams, ChildEval, NeighborPair, OrChoice};
