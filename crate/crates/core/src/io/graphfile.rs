//! Binary graph files.
//!
//! Layout, all little-endian:
//!
//! | bytes            | content                                         |
//! |------------------|-------------------------------------------------|
//! | 4                | magic `PRDG`                                    |
//! | 4                | format version (`u32`)                          |
//! | 4                | vertex count `N` (`u32`)                        |
//! | 4                | edge count `E` (`u32`)                          |
//! | 4                | `d_max` (`f32`)                                 |
//! | 4 (N + 1)        | per-source offsets into the body (`u32`)        |
//! | 8 E              | `(target: i32, weight: f32)` per edge           |
//!
//! Each undirected edge is stored once, under its smaller endpoint; edges are
//! ordered by source and then by target. Offsets hold `N + 1` entries so the
//! block of source `v` is `offsets[v]..offsets[v + 1]`.

use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::{FinalEdge, FinalGraph, VertexId};

pub const MAGIC: [u8; 4] = *b"PRDG";
pub const FORMAT_VERSION: u32 = 1;
pub const HEADER_BYTES: usize = 20;

/// Size of the file for a graph with `n` vertices and `e` edges.
pub fn file_size(n: usize, e: usize) -> usize {
    HEADER_BYTES + 4 * (n + 1) + 8 * e
}

pub fn graph_to_bytes(graph: &FinalGraph) -> Vec<u8> {
    let n = graph.n_vertices();
    let mut out = Vec::with_capacity(file_size(n, graph.n_edges()));
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(n as u32).to_le_bytes());
    out.extend_from_slice(&(graph.n_edges() as u32).to_le_bytes());
    out.extend_from_slice(&graph.d_max_f32().to_le_bytes());
    // Edges are canonical (a < b) and sorted by (a, b).
    let mut offset = 0u32;
    let mut edges = graph.edges().iter().peekable();
    for v in 0..n {
        out.extend_from_slice(&offset.to_le_bytes());
        while edges.next_if(|e| e.a.index() == v).is_some() {
            offset += 1;
        }
    }
    out.extend_from_slice(&offset.to_le_bytes());
    for e in graph.edges() {
        out.extend_from_slice(&(e.b.0 as i32).to_le_bytes());
        out.extend_from_slice(&e.weight.to_le_bytes());
    }
    out
}

fn format_err(msg: impl Into<String>) -> Error {
    Error::Format(msg.into())
}

fn u32_at(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4-byte slice"))
}

/// Counts read back from a graph file.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct FileSummary {
    pub version: u32,
    pub n_vertices: usize,
    pub n_edges: usize,
    pub d_max: f32,
    /// Offsets stored in the index.
    pub index_entries: usize,
    /// Numbers stored in the body: one target and one weight per edge.
    pub body_numbers: usize,
}

impl FileSummary {
    /// `N + 2|E|`: the index minus its closing sentinel, plus the body.
    pub fn param_count(&self) -> usize {
        self.index_entries - 1 + self.body_numbers
    }
}

/// Validates the header and sizes without decoding the edges.
pub fn inspect_bytes(bytes: &[u8]) -> Result<FileSummary> {
    if bytes.len() < HEADER_BYTES {
        return Err(format_err(format!(
            "truncated header: {} bytes",
            bytes.len()
        )));
    }
    if bytes[..4] != MAGIC {
        return Err(format_err("bad magic"));
    }
    let version = u32_at(bytes, 4);
    if version != FORMAT_VERSION {
        return Err(format_err(format!("unsupported version {version}")));
    }
    let n = u32_at(bytes, 8) as usize;
    let e = u32_at(bytes, 12) as usize;
    let d_max = f32::from_le_bytes(bytes[16..20].try_into().expect("4-byte slice"));
    let expected = file_size(n, e);
    if bytes.len() < expected {
        return Err(format_err(format!(
            "truncated: expected {expected} bytes, found {}",
            bytes.len()
        )));
    }
    if bytes.len() > expected {
        return Err(format_err(format!(
            "{} trailing bytes",
            bytes.len() - expected
        )));
    }
    let index_entries = (bytes.len() - HEADER_BYTES - 8 * e) / 4;
    let body_numbers = (bytes.len() - HEADER_BYTES - 4 * index_entries) / 4;
    Ok(FileSummary {
        version,
        n_vertices: n,
        n_edges: e,
        d_max,
        index_entries,
        body_numbers,
    })
}

pub fn graph_from_bytes(bytes: &[u8]) -> Result<FinalGraph> {
    let summary = inspect_bytes(bytes)?;
    let (n, e) = (summary.n_vertices, summary.n_edges);
    let offsets: Vec<usize> = (0..=n)
        .map(|v| u32_at(bytes, HEADER_BYTES + 4 * v) as usize)
        .collect();
    if offsets[0] != 0 || offsets[n] != e || offsets.windows(2).any(|w| w[0] > w[1]) {
        return Err(format_err("offsets are not a monotone index over the body"));
    }
    let body = HEADER_BYTES + 4 * (n + 1);
    let mut edges = Vec::with_capacity(e);
    for v in 0..n {
        let mut prev = v;
        for k in offsets[v]..offsets[v + 1] {
            let at = body + 8 * k;
            let target = i32::from_le_bytes(bytes[at..at + 4].try_into().expect("4-byte slice"));
            let weight =
                f32::from_le_bytes(bytes[at + 4..at + 8].try_into().expect("4-byte slice"));
            if target < 0 || target as usize >= n || target as usize <= prev {
                return Err(format_err(format!(
                    "edge {k}: target {target} out of order for source {v}"
                )));
            }
            prev = target as usize;
            edges.push(FinalEdge {
                a: VertexId::new(v),
                b: VertexId::new(target as usize),
                weight,
            });
        }
    }
    FinalGraph::new(n, edges, summary.d_max).map_err(|err| format_err(err.to_string()))
}

pub fn save_graph(graph: &FinalGraph, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, graph_to_bytes(graph))?;
    Ok(())
}

pub fn load_graph(path: impl AsRef<Path>) -> Result<FinalGraph> {
    graph_from_bytes(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(i: usize) -> VertexId {
        VertexId::new(i)
    }

    fn sample() -> FinalGraph {
        let edges = vec![
            FinalEdge {
                a: v(2),
                b: v(0),
                weight: 0.25,
            },
            FinalEdge {
                a: v(0),
                b: v(1),
                weight: 1.5,
            },
            FinalEdge {
                a: v(1),
                b: v(3),
                weight: 3.0,
            },
        ];
        FinalGraph::new(4, edges, 12.0).unwrap()
    }

    #[test]
    fn layout_is_as_documented() {
        let bytes = graph_to_bytes(&sample());
        assert_eq!(bytes.len(), 20 + 4 * 5 + 8 * 3);
        assert_eq!(&bytes[..4], b"PRDG");
        let offsets: Vec<u32> = (0..5).map(|k| u32_at(&bytes, 20 + 4 * k)).collect();
        assert_eq!(offsets, vec![0, 2, 3, 3, 3]);
        // first body entry: 0 -> 1
        assert_eq!(i32::from_le_bytes(bytes[40..44].try_into().unwrap()), 1);
        assert_eq!(f32::from_le_bytes(bytes[44..48].try_into().unwrap()), 1.5);
    }

    #[test]
    fn round_trip_is_identity() {
        let g = sample();
        let bytes = graph_to_bytes(&g);
        let back = graph_from_bytes(&bytes).unwrap();
        assert_eq!(back, g);
        assert_eq!(graph_to_bytes(&back), bytes);
        let s = inspect_bytes(&bytes).unwrap();
        assert_eq!((s.index_entries, s.body_numbers), (5, 6));
        assert_eq!(s.param_count(), g.param_count());
    }

    #[test]
    fn empty_graph_round_trips() {
        let g = FinalGraph::empty(3, 1.0).unwrap();
        let bytes = graph_to_bytes(&g);
        assert_eq!(bytes.len(), 20 + 16);
        assert_eq!(graph_from_bytes(&bytes).unwrap(), g);
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let bytes = graph_to_bytes(&sample());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(graph_from_bytes(&bad), Err(Error::Format(_))));
        let mut bad = bytes.clone();
        bad[4] = 9;
        assert!(graph_from_bytes(&bad).is_err());
        assert!(graph_from_bytes(&bytes[..bytes.len() - 1]).is_err());
        assert!(graph_from_bytes(&bytes[..10]).is_err());
        let mut long = bytes.clone();
        long.push(0);
        assert!(graph_from_bytes(&long).is_err());
        let mut bad = bytes;
        bad[40..44].copy_from_slice(&0i32.to_le_bytes());
        assert!(graph_from_bytes(&bad).is_err());
    }
}
