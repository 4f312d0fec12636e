//! Region adjacency graphs for Markov random field effects.
//!
//! Text format, one region per line:
//!
//! ```text
//! # comment
//! NC: NE NW SE SS SW
//! NE: NC NW
//! ```
//!
//! Neighborhoods must be symmetric.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Undirected first-order neighborhood structure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    regions: Vec<String>,
    neighbors: Vec<Vec<usize>>,
}

/// Zone adjacency for Nigeria's six geopolitical zones (reconstruction).
pub const NIGERIA_ZONES: &str = include_str!("../data/nigeria_zones.graph");

impl Graph {
    pub fn parse(text: &str) -> Result<Graph> {
        let mut raw: Vec<(String, Vec<String>)> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (id, rest) = line.split_once(':').ok_or_else(|| {
                Error::Data(format!("graph line {}: expected 'region: neighbors'", lineno + 1))
            })?;
            let id = id.trim();
            if id.is_empty() {
                return Err(Error::Data(format!("graph line {}: empty region id", lineno + 1)));
            }
            if raw.iter().any(|(r, _)| r == id) {
                return Err(Error::Data(format!("graph: region '{id}' listed twice")));
            }
            raw.push((id.to_string(), rest.split_whitespace().map(String::from).collect()));
        }
        let index: BTreeMap<&str, usize> = raw
            .iter()
            .enumerate()
            .map(|(i, (r, _))| (r.as_str(), i))
            .collect();
        let mut neighbors = vec![Vec::new(); raw.len()];
        for (i, (region, adj)) in raw.iter().enumerate() {
            for other in adj {
                let j = *index.get(other.as_str()).ok_or_else(|| {
                    Error::Data(format!("graph: '{region}' lists unknown neighbor '{other}'"))
                })?;
                if j == i {
                    return Err(Error::Data(format!("graph: '{region}' lists itself")));
                }
                if !neighbors[i].contains(&j) {
                    neighbors[i].push(j);
                }
            }
        }
        for i in 0..raw.len() {
            for &j in &neighbors[i] {
                if !neighbors[j].contains(&i) {
                    return Err(Error::Data(format!(
                        "graph is not symmetric: '{}' neighbors '{}' but not vice versa",
                        raw[i].0, raw[j].0
                    )));
                }
            }
            neighbors[i].sort_unstable();
        }
        Ok(Graph {
            regions: raw.into_iter().map(|(r, _)| r).collect(),
            neighbors,
        })
    }

    pub fn load(path: &Path) -> Result<Graph> {
        Graph::parse(&std::fs::read_to_string(path)?)
    }

    pub fn nigeria_zones() -> Graph {
        Graph::parse(NIGERIA_ZONES).expect("bundled graph is valid")
    }

    pub fn regions(&self) -> &[String] {
        &self.regions
    }

    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    pub fn index_of(&self, region: &str) -> Option<usize> {
        self.regions.iter().position(|r| r == region)
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn is_connected(&self) -> bool {
        if self.regions.is_empty() {
            return true;
        }
        let mut seen = vec![false; self.len()];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for &j in &self.neighbors[i] {
                if !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// Graph Laplacian: degree on the diagonal, −1 for neighbors.
    pub fn laplacian(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut k = DMatrix::zeros(n, n);
        for i in 0..n {
            k[(i, i)] = self.neighbors[i].len() as f64;
            for &j in &self.neighbors[i] {
                k[(i, j)] = -1.0;
            }
        }
        k
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_graph_is_a_connected_laplacian() {
        let g = Graph::nigeria_zones();
        assert_eq!(g.len(), 6);
        assert!(g.is_connected());
        let k = g.laplacian();
        for i in 0..6 {
            assert_eq!(k.row(i).sum(), 0.0);
            for j in 0..6 {
                assert_eq!(k[(i, j)], k[(j, i)]);
            }
        }
    }

    #[test]
    fn asymmetric_neighborhoods_are_rejected() {
        let err = Graph::parse("a: b\nb:\n").unwrap_err();
        assert!(err.to_string().contains("not symmetric"));
    }

    #[test]
    fn unknown_neighbor_is_rejected() {
        assert!(Graph::parse("a: c\n").is_err());
        assert!(Graph::parse("a b c\n").is_err());
    }

    #[test]
    fn disconnected_graph_is_detected() {
        let g = Graph::parse("a: b\nb: a\nc: d\nd: c\n").unwrap();
        assert!(!g.is_connected());
    }
}
