//! Versioned JSON documents for graphs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::graph::AogGraph;
use super::model::Aog;

pub const GRAPH_FORMAT: &str = "aogqa-graph";
pub const GRAPH_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct GraphDocument {
    format: String,
    version: u32,
    graph: AogGraph,
}

pub fn graph_to_json(graph: &AogGraph) -> Result<String> {
    let doc = GraphDocument {
        format: GRAPH_FORMAT.to_string(),
        version: GRAPH_VERSION,
        graph: graph.clone(),
    };
    Ok(serde_json::to_string_pretty(&doc)?)
}

pub fn graph_from_json(text: &str) -> Result<AogGraph> {
    let doc: GraphDocument = serde_json::from_str(text)?;
    if doc.format != GRAPH_FORMAT {
        return Err(Error::Format(format!(
            "expected format {GRAPH_FORMAT}, found {}",
            doc.format
        )));
    }
    if doc.version != GRAPH_VERSION {
        return Err(Error::Format(format!(
            "unsupported version {}",
            doc.version
        )));
    }
    Ok(doc.graph)
}

impl Aog {
    pub fn to_json(&self) -> Result<String> {
        graph_to_json(&self.to_graph())
    }

    pub fn from_json(text: &str) -> Result<Aog> {
        Aog::from_graph(&graph_from_json(text)?)
    }
}
