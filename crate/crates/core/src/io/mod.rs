//! Reading datasets in and writing checkpoints and results out.

mod checkpoint;
mod link;
mod text;

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

pub use checkpoint::{format_checkpoint, load_checkpoint, parse_checkpoint, save_checkpoint, Checkpoint};
pub use link::{link_split, LinkSplit};
pub use text::{
    attributes_or_identity, format_attributes, format_edge_list, format_index_list, load_attributes,
    load_edge_list, load_graph, load_labels, load_split, parse_attributes, parse_edge_list,
    parse_index_list, save_attributes, save_edge_list,
};

use crate::downstream::{Metrics, SplitSpec};
use crate::error::{Error, Result};
use crate::graph::Graph;

/// A graph with optional labels and classification split.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetBundle {
    pub name: String,
    pub graph: Graph,
    pub labels: Option<Vec<usize>>,
    pub split: Option<SplitSpec>,
}

impl DatasetBundle {
    pub fn new(
        name: impl Into<String>,
        graph: Graph,
        labels: Option<Vec<usize>>,
        split: Option<SplitSpec>,
    ) -> Result<Self> {
        if let Some(l) = &labels {
            if l.len() != graph.num_nodes() {
                return Err(Error::shape(format!(
                    "{} labels for {} nodes",
                    l.len(),
                    graph.num_nodes()
                )));
            }
        }
        Ok(Self {
            name: name.into(),
            graph,
            labels,
            split,
        })
    }

    /// `max(label) + 1`, or zero without labels.
    pub fn num_classes(&self) -> usize {
        self.labels
            .as_ref()
            .and_then(|l| l.iter().max())
            .map_or(0, |m| m + 1)
    }
}

/// Short, stable digest of a configuration text (first 16 hex digits of SHA-256).
pub fn config_hash(canonical_config: &str) -> String {
    let digest = Sha256::digest(canonical_config.as_bytes());
    digest[..8].iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

pub fn write_text(path: &Path, contents: &str) -> Result<()> {
    text::write_file(path, contents)
}

pub fn read_text(path: &Path) -> Result<String> {
    text::read_file(path)
}

#[derive(Serialize)]
struct MetricsReport<'a> {
    config_hash: &'a str,
    seed: u64,
    results: &'a [Metrics],
}

/// `{"config_hash", "seed", "results": [{task, dataset, attack, mean, std, per_seed}]}`.
pub fn metrics_json(metrics: &[Metrics], config_hash: &str, seed: u64) -> Result<String> {
    let report = MetricsReport {
        config_hash,
        seed,
        results: metrics,
    };
    serde_json::to_string_pretty(&report)
        .map(|mut s| {
            s.push('\n');
            s
        })
        .map_err(|e| Error::invalid(format!("cannot serialize metrics: {e}")))
}

pub fn parse_metrics_json(text: &str) -> Result<Vec<Metrics>> {
    #[derive(serde::Deserialize)]
    struct Owned {
        results: Vec<Metrics>,
    }
    serde_json::from_str::<Owned>(text)
        .map(|o| o.results)
        .map_err(|e| Error::Parse {
            path: "<metrics json>".into(),
            line: e.line(),
            msg: e.to_string(),
        })
}

/// One CSV row per metric; per-seed values are `;`-separated.
pub fn metrics_csv(metrics: &[Metrics], config_hash: &str, seed: u64) -> String {
    let mut out = format!("# config_hash={config_hash}\n# seed={seed}\ntask,dataset,attack,mean,std,per_seed\n");
    for m in metrics {
        let per_seed: Vec<String> = m.per_seed.iter().map(|v| format!("{v:?}")).collect();
        let _ = writeln!(
            out,
            "{},{},{},{:?},{:?},{}",
            m.task,
            m.dataset,
            m.attack,
            m.mean,
            m.std,
            per_seed.join(";")
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    #[test]
    fn hash_is_stable_and_short() {
        assert_eq!(config_hash("a=1\n"), config_hash("a=1\n"));
        assert_ne!(config_hash("a=1\n"), config_hash("a=2\n"));
        assert_eq!(config_hash("").len(), 16);
    }

    #[test]
    fn metrics_json_round_trips() {
        let m = vec![
            Metrics::from_trials("nodecls", "toy", "mi-pgd", vec![0.1, 0.3, 1.0 / 3.0]).unwrap(),
            Metrics::from_trials("link", "toy", "none", vec![0.9]).unwrap(),
        ];
        let json = metrics_json(&m, "deadbeef", 4).unwrap();
        assert!(json.contains("\"config_hash\": \"deadbeef\""));
        assert_eq!(parse_metrics_json(&json).unwrap(), m);
        assert!(parse_metrics_json("{").is_err());
        let csv = metrics_csv(&m, "deadbeef", 4);
        assert!(csv.starts_with("# config_hash=deadbeef\n# seed=4\n"));
        assert_eq!(csv.lines().count(), 5);
    }

    #[test]
    fn bundle_checks_labels() {
        let g = Graph::new(Array2::zeros((3, 3)), Array2::zeros((3, 1))).unwrap();
        assert!(DatasetBundle::new("x", g.clone(), Some(vec![0, 1]), None).is_err());
        let b = DatasetBundle::new("x", g, Some(vec![0, 2, 1]), None).unwrap();
        assert_eq!(b.num_classes(), 3);
    }
}
