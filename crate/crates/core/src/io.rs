//! File formats: chain JSON, graph TSV edge lists, cost CSV, horizon JSON.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::chains::{LabeledGraph, MarkovChain};
use crate::error::{Error, Result};
use crate::otm::HorizonDistribution;

/// `{"kernel": [[...]], "initial": [...], "labels": [[...]]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChainFile {
    pub kernel: Vec<Vec<f64>>,
    pub initial: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<Vec<f64>>>,
}

impl ChainFile {
    pub fn into_chain(self) -> Result<MarkovChain> {
        let kernel = nested_to_array(&self.kernel, "kernel")?;
        MarkovChain::new(kernel, Array1::from(self.initial), self.labels)
    }

    pub fn from_chain(chain: &MarkovChain) -> Self {
        Self {
            kernel: chain
                .kernel()
                .rows()
                .into_iter()
                .map(|r| r.to_vec())
                .collect(),
            initial: chain.initial().to_vec(),
            labels: chain.labels().map(|l| l.to_vec()),
        }
    }
}

#[derive(Debug, Deserialize)]
struct LabelFile {
    labels: Vec<Vec<f64>>,
}

pub fn nested_to_array(rows: &[Vec<f64>], what: &str) -> Result<Array2<f64>> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != m) {
        return Err(Error::DimensionMismatch(format!(
            "{what} row {i} has {} entries, expected {m}",
            r.len()
        )));
    }
    Array2::from_shape_vec((n, m), rows.concat())
        .map_err(|e| Error::DimensionMismatch(format!("{what}: {e}")))
}

pub fn read_chain(path: &Path) -> Result<MarkovChain> {
    let file: ChainFile = serde_json::from_str(&fs::read_to_string(path)?)?;
    file.into_chain()
}

pub fn write_chain(path: &Path, chain: &MarkovChain) -> Result<()> {
    let text = serde_json::to_string_pretty(&ChainFile::from_chain(chain))?;
    fs::write(path, text)?;
    Ok(())
}

/// Edge list with lines `src<TAB>dst[<TAB>weight]`; blank lines and lines
/// starting with `#` are skipped. Node count is one past the largest index,
/// or the number of labels when a label file is given.
pub fn read_graph_tsv(path: &Path, labels: Option<&Path>) -> Result<LabeledGraph> {
    let text = fs::read_to_string(path)?;
    let mut edges = Vec::new();
    let mut max_node = None;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
        let bad = || Error::Parse(format!("{}:{}: '{line}'", path.display(), lineno + 1));
        if !(2..=3).contains(&fields.len()) {
            return Err(bad());
        }
        let src: usize = fields[0].parse().map_err(|_| bad())?;
        let dst: usize = fields[1].parse().map_err(|_| bad())?;
        let weight = match fields.get(2) {
            Some(w) => Some(w.parse::<f64>().map_err(|_| bad())?),
            None => None,
        };
        max_node = max_node.max(Some(src.max(dst)));
        edges.push((src, dst, weight));
    }
    let labels = match labels {
        Some(p) => Some(serde_json::from_str::<LabelFile>(&fs::read_to_string(p)?)?.labels),
        None => None,
    };
    let node_count = match &labels {
        Some(l) => l.len(),
        None => max_node.map_or(0, |n| n + 1),
    };
    let graph = LabeledGraph {
        node_count,
        edges,
        labels,
    };
    graph.validate()?;
    Ok(graph)
}

/// Comma-separated matrix, one row per line.
pub fn read_cost_csv(path: &Path) -> Result<Array2<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| Error::Parse(e.to_string()))?;
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse(e.to_string()))?;
        let row = record
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| Error::Parse(format!("{}: bad number '{f}'", path.display())))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    nested_to_array(&rows, "cost")
}

/// A matrix given either as a JSON array of arrays (`.json`) or as CSV.
pub fn read_matrix(path: &Path) -> Result<Array2<f64>> {
    if path.extension().is_some_and(|e| e == "json") {
        let rows: Vec<Vec<f64>> = serde_json::from_str(&fs::read_to_string(path)?)?;
        nested_to_array(&rows, "matrix")
    } else {
        read_cost_csv(path)
    }
}

pub fn write_cost_csv(path: &Path, cost: &Array2<f64>) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| Error::Parse(e.to_string()))?;
    for row in cost.rows() {
        writer
            .write_record(row.iter().map(|v| v.to_string()))
            .map_err(|e| Error::Parse(e.to_string()))?;
    }
    writer.flush()?;
    Ok(())
}

/// JSON array of probabilities.
pub fn read_horizon(path: &Path) -> Result<HorizonDistribution> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn chain_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.json");
        let chain = MarkovChain::new(
            array![[0.25, 0.75], [1.0, 0.0]],
            array![0.5, 0.5],
            Some(vec![vec![0.0], vec![1.5]]),
        )
        .unwrap();
        write_chain(&path, &chain).unwrap();
        assert_eq!(read_chain(&path).unwrap(), chain);
    }

    #[test]
    fn ragged_kernel_is_rejected() {
        let file: ChainFile =
            serde_json::from_str(r#"{"kernel": [[1.0], [0.5, 0.5]], "initial": [1, 0]}"#).unwrap();
        assert!(matches!(
            file.into_chain(),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn graph_tsv() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.tsv");
        fs::write(&path, "# triangle\n0\t1\n1\t2\t2.5\n2\t0\n").unwrap();
        let g = read_graph_tsv(&path, None).unwrap();
        assert_eq!(g.node_count, 3);
        assert_eq!(g.edges[1], (1, 2, Some(2.5)));
        fs::write(&path, "0 1\n").unwrap();
        assert!(matches!(read_graph_tsv(&path, None), Err(Error::Parse(_))));
    }

    #[test]
    fn cost_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.csv");
        let c = array![[0.0, 1.25], [0.1, 3.0], [2.0, 0.5]];
        write_cost_csv(&path, &c).unwrap();
        assert_eq!(read_cost_csv(&path).unwrap(), c);
        assert_eq!(read_matrix(&path).unwrap(), c);
    }

    #[test]
    fn horizon_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.json");
        fs::write(&path, "[0.5, 0.3, 0.2]").unwrap();
        assert_eq!(read_horizon(&path).unwrap().max_horizon(), 2);
        fs::write(&path, "[0.5, 0.3]").unwrap();
        assert!(read_horizon(&path).is_err());
    }
}
