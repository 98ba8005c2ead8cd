use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde::Serialize;

use super::{Edge, FlowNetwork, LabelMap, NodeId};
use crate::error::{Error, Result};
use crate::output::write_file;

/// Summary of an edge-list ingestion.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct IngestReport {
    /// Data rows parsed (header, blank and comment lines excluded).
    pub rows_read: usize,
    /// Rows folded into an earlier row with the same ordered pair.
    pub edges_merged: usize,
    /// Blank or `#` comment lines skipped.
    pub rows_dropped: usize,
    pub nodes: usize,
    pub edges: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct LabelReport {
    pub rows_read: usize,
    /// Label rows naming nodes absent from the network; skipped.
    pub unknown_nodes: Vec<String>,
    /// Network nodes that received no label.
    pub unlabeled_nodes: Vec<String>,
}

/// A CSV line split into trimmed fields, with its 1-based line number.
struct Row {
    line: u64,
    fields: Vec<String>,
}

/// Reads a small CSV table, skipping an optional header matching `header`.
/// Returns the data rows and the number of blank/comment lines skipped.
fn read_rows(path: &Path, header: &[&str]) -> Result<(Vec<Row>, usize)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let dropped = text
        .lines()
        .filter(|l| l.trim().is_empty() || l.trim_start().starts_with('#'))
        .count();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let fields: Vec<String> = record.iter().map(str::to_owned).collect();
        if k == 0 && fields.iter().map(String::as_str).eq(header.iter().copied()) {
            continue;
        }
        rows.push(Row { line, fields });
    }
    Ok((rows, dropped))
}

/// Loads an edge list (`src,dst,weight`). Rows with the same ordered pair are
/// merged by summing their weights.
pub fn load_network(path: impl AsRef<Path>) -> Result<(FlowNetwork, IngestReport)> {
    let path = path.as_ref();
    let (rows, dropped) = read_rows(path, &["src", "dst", "weight"])?;
    if rows.is_empty() {
        return Err(Error::EmptyNetwork);
    }
    let mut triples = Vec::with_capacity(rows.len());
    for row in &rows {
        let [src, dst, weight] = row.fields.as_slice() else {
            return Err(Error::Parse {
                line: row.line,
                message: format!("expected 3 fields (src,dst,weight), found {}", row.fields.len()),
            });
        };
        if src.is_empty() || dst.is_empty() {
            return Err(Error::Parse {
                line: row.line,
                message: "empty node id".into(),
            });
        }
        let w: f64 = weight.parse().map_err(|_| Error::Parse {
            line: row.line,
            message: format!("weight {weight:?} is not a number"),
        })?;
        if !(w.is_finite() && w > 0.0) {
            return Err(Error::Validation(format!(
                "line {}: edge weight must be positive, got {weight}",
                row.line
            )));
        }
        triples.push((src.as_str(), dst.as_str(), w));
    }

    let names: BTreeSet<&str> = triples.iter().flat_map(|(s, d, _)| [*s, *d]).collect();
    let nodes: Vec<NodeId> = names
        .iter()
        .map(|n| NodeId::new(*n))
        .collect::<Result<_>>()?;
    let index: std::collections::HashMap<&str, usize> =
        names.iter().enumerate().map(|(i, n)| (*n, i)).collect();
    let edges = triples
        .iter()
        .map(|(s, d, w)| Edge {
            src: index[s],
            dst: index[d],
            weight: *w,
        })
        .collect();
    let (net, merged) = FlowNetwork::from_indexed(nodes, edges);
    let report = IngestReport {
        rows_read: rows.len(),
        edges_merged: merged,
        rows_dropped: dropped,
        nodes: net.n_nodes(),
        edges: net.n_edges(),
    };
    Ok((net, report))
}

/// Writes `src,dst,weight` with shortest round-trip decimal weights.
pub fn write_network(net: &FlowNetwork, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("src,dst,weight\n");
    for (s, d, w) in net.edge_triples() {
        out.push_str(&format!("{s},{d},{w}\n"));
    }
    write_file(path, out.as_bytes())
}

/// Loads `node,label` rows. Rows naming nodes absent from `net` are skipped
/// and reported, as are network nodes left unlabeled.
pub fn load_labels(path: impl AsRef<Path>, net: &FlowNetwork) -> Result<(LabelMap, LabelReport)> {
    let path = path.as_ref();
    let (rows, _) = read_rows(path, &["node", "label"])?;
    let mut map = LabelMap::default();
    let mut unknown = BTreeSet::new();
    for row in &rows {
        let [node, label] = row.fields.as_slice() else {
            return Err(Error::Parse {
                line: row.line,
                message: format!("expected 2 fields (node,label), found {}", row.fields.len()),
            });
        };
        let id = NodeId::new(node.as_str()).map_err(|_| Error::Parse {
            line: row.line,
            message: "empty node id".into(),
        })?;
        if label.is_empty() {
            return Err(Error::Parse {
                line: row.line,
                message: format!("empty label for node {id}"),
            });
        }
        // Conflicts are detected even for unknown nodes.
        map.insert(id, label)?;
    }
    map.retain(|id| {
        let known = net.index_of(id.as_str()).is_some();
        if !known {
            unknown.insert(id.to_string());
        }
        known
    });
    let unlabeled = net
        .nodes()
        .iter()
        .filter(|n| map.get(n.as_str()).is_none())
        .map(|n| n.to_string())
        .collect();
    let report = LabelReport {
        rows_read: rows.len(),
        unknown_nodes: unknown.into_iter().collect(),
        unlabeled_nodes: unlabeled,
    };
    Ok((map, report))
}

pub fn write_labels(labels: &LabelMap, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::from("node,label\n");
    for (n, l) in labels.iter() {
        out.push_str(&format!("{n},{l}\n"));
    }
    write_file(path.as_ref(), out.as_bytes())
}
