//! Plain-text dataset formats.
//!
//! Edge list:
//! ```text
//! # comment
//! n 4
//! 0 1
//! 2 3
//! ```
//! Attributes (one comma-separated row per node):
//! ```text
//! n 2 c 3
//! 1.0,0.0,0.5
//! 0.0,1.0,0.25
//! ```
//! Labels and split files hold one non-negative integer per line.
//! Blank lines and lines starting with `#` are ignored everywhere.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::graph::Graph;

pub(crate) fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Non-comment, non-blank lines with their 1-based line numbers.
pub(crate) fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

pub(crate) fn parse_error(origin: &str, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: origin.to_string(),
        line,
        msg: msg.into(),
    }
}

/// Parses `key value [key value ...]` and checks the keys.
fn parse_header(origin: &str, line: usize, text: &str, keys: &[&str]) -> Result<Vec<usize>> {
    let tokens: Vec<&str> = text.split_whitespace().collect();
    if tokens.len() != 2 * keys.len() {
        return Err(parse_error(origin, line, format!("expected header \"{}\"", header_hint(keys))));
    }
    let mut values = Vec::with_capacity(keys.len());
    for (pair, key) in tokens.chunks(2).zip(keys) {
        if pair[0] != *key {
            return Err(parse_error(origin, line, format!("expected header \"{}\"", header_hint(keys))));
        }
        values.push(
            pair[1]
                .parse()
                .map_err(|_| parse_error(origin, line, format!("bad value for {key}: {:?}", pair[1])))?,
        );
    }
    Ok(values)
}

fn header_hint(keys: &[&str]) -> String {
    keys.iter().map(|k| format!("{k} <{}>", k.to_uppercase())).collect::<Vec<_>>().join(" ")
}

/// Parses an edge list into a symmetric 0/1 adjacency.
pub fn parse_edge_list(origin: &str, text: &str) -> Result<Array2<f64>> {
    let mut lines = content_lines(text);
    let (line, header) = lines
        .next()
        .ok_or_else(|| parse_error(origin, 1, "missing \"n <N>\" header"))?;
    let n = parse_header(origin, line, header, &["n"])?[0];
    let mut adjacency = Array2::zeros((n, n));
    for (line, text) in lines {
        let tokens: Vec<&str> = text.split_whitespace().collect();
        if tokens.len() != 2 {
            return Err(parse_error(origin, line, format!("expected \"u v\", got {text:?}")));
        }
        let parse = |t: &str| -> Result<usize> {
            t.parse()
                .map_err(|_| parse_error(origin, line, format!("bad node index {t:?}")))
        };
        let (u, v) = (parse(tokens[0])?, parse(tokens[1])?);
        if u >= n || v >= n {
            return Err(parse_error(origin, line, format!("node index out of range for n={n}")));
        }
        if u == v {
            return Err(parse_error(origin, line, format!("self-loop at node {u}")));
        }
        adjacency[[u, v]] = 1.0;
        adjacency[[v, u]] = 1.0;
    }
    Ok(adjacency)
}

pub fn load_edge_list(path: &Path) -> Result<Array2<f64>> {
    parse_edge_list(&path.display().to_string(), &read_file(path)?)
}

/// Serializes the upper-triangle edges of `adjacency`.
pub fn format_edge_list(adjacency: &Array2<f64>) -> String {
    let n = adjacency.nrows();
    let mut out = format!("n {n}\n");
    for i in 0..n {
        for j in (i + 1)..n {
            if adjacency[[i, j]] != 0.0 {
                let _ = writeln!(out, "{i} {j}");
            }
        }
    }
    out
}

pub fn save_edge_list(path: &Path, adjacency: &Array2<f64>) -> Result<()> {
    write_file(path, &format_edge_list(adjacency))
}

pub fn parse_attributes(origin: &str, text: &str) -> Result<Array2<f64>> {
    let mut lines = content_lines(text);
    let (line, header) = lines
        .next()
        .ok_or_else(|| parse_error(origin, 1, "missing \"n <N> c <C>\" header"))?;
    let dims = parse_header(origin, line, header, &["n", "c"])?;
    let (n, c) = (dims[0], dims[1]);
    let mut values = Vec::with_capacity(n * c);
    let mut rows = 0;
    for (line, text) in lines {
        if rows == n {
            return Err(parse_error(origin, line, format!("more than the declared {n} rows")));
        }
        let row: Vec<f64> = text
            .split(',')
            .map(|t| {
                let t = t.trim();
                t.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| parse_error(origin, line, format!("bad attribute value {t:?}")))
            })
            .collect::<Result<_>>()?;
        if row.len() != c {
            return Err(parse_error(origin, line, format!("expected {c} values, got {}", row.len())));
        }
        values.extend(row);
        rows += 1;
    }
    if rows != n {
        return Err(Error::shape(format!("{origin}: {rows} attribute rows but n = {n}")));
    }
    Ok(Array2::from_shape_vec((n, c), values).expect("row count checked"))
}

pub fn load_attributes(path: &Path) -> Result<Array2<f64>> {
    parse_attributes(&path.display().to_string(), &read_file(path)?)
}

/// Attribute CSV with exact (shortest round-trip) float formatting.
pub fn format_attributes(attributes: &Array2<f64>) -> String {
    let (n, c) = attributes.dim();
    let mut out = format!("n {n} c {c}\n");
    for row in attributes.rows() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn save_attributes(path: &Path, attributes: &Array2<f64>) -> Result<()> {
    write_file(path, &format_attributes(attributes))
}

/// Loads attributes, or synthesizes the `n x n` identity for featureless
/// datasets when no attribute file is given.
pub fn attributes_or_identity(path: Option<&Path>, n: usize, featureless: bool) -> Result<Array2<f64>> {
    match (path, featureless) {
        (Some(p), _) => {
            let x = load_attributes(p)?;
            if x.nrows() != n {
                return Err(Error::shape(format!("{} attribute rows for {n} nodes", x.nrows())));
            }
            Ok(x)
        }
        (None, true) => Ok(Array2::eye(n)),
        (None, false) => Err(Error::invalid(
            "no attribute file given and the dataset is not marked featureless",
        )),
    }
}

pub fn parse_index_list(origin: &str, text: &str) -> Result<Vec<usize>> {
    content_lines(text)
        .map(|(line, t)| {
            t.parse::<usize>()
                .map_err(|_| parse_error(origin, line, format!("expected a non-negative integer, got {t:?}")))
        })
        .collect()
}

/// One label per node.
pub fn load_labels(path: &Path, n: usize) -> Result<Vec<usize>> {
    let labels = parse_index_list(&path.display().to_string(), &read_file(path)?)?;
    if labels.len() != n {
        return Err(Error::shape(format!(
            "{}: {} labels for {n} nodes",
            path.display(),
            labels.len()
        )));
    }
    Ok(labels)
}

/// Node indices, each `< n`, without duplicates.
pub fn load_split(path: &Path, n: usize) -> Result<Vec<usize>> {
    let origin = path.display().to_string();
    let text = read_file(path)?;
    let indices = parse_index_list(&origin, &text)?;
    let mut seen = BTreeSet::new();
    for ((line, _), &i) in content_lines(&text).zip(&indices) {
        if i >= n {
            return Err(parse_error(&origin, line, format!("index {i} out of range for n={n}")));
        }
        if !seen.insert(i) {
            return Err(parse_error(&origin, line, format!("duplicate index {i}")));
        }
    }
    Ok(indices)
}

pub fn format_index_list(indices: &[usize]) -> String {
    indices.iter().map(|i| format!("{i}\n")).collect()
}

/// Loads a graph from an edge list plus optional attributes.
pub fn load_graph(edges: &Path, attributes: Option<&Path>, featureless: bool) -> Result<Graph> {
    let adjacency = load_edge_list(edges)?;
    let x = attributes_or_identity(attributes, adjacency.nrows(), featureless)?;
    Graph::new(adjacency, x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from;
    use rand::Rng as _;
    use std::collections::HashSet;

    #[test]
    fn single_edge() {
        let a = parse_edge_list("t", "n 2\n0 1\n").unwrap();
        assert_eq!(a, ndarray::array![[0.0, 1.0], [1.0, 0.0]]);
    }

    #[test]
    fn duplicates_and_reversals_collapse() {
        let a = parse_edge_list("t", "# header next\nn 3\n0 1\n1 0\n\n0 1\n").unwrap();
        assert_eq!(a.sum(), 2.0);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let cases = [
            ("n 3\n0 1\n2 2\n", 3),
            ("n 3\n0 1\n0 x\n", 3),
            ("n 3\n0 5\n", 2),
            ("n 3\n0 1 2\n", 2),
            ("edges 3\n", 1),
        ];
        for (text, want) in cases {
            match parse_edge_list("f", text) {
                Err(Error::Parse { line, .. }) => assert_eq!(line, want, "{text:?}"),
                other => panic!("{text:?}: {other:?}"),
            }
        }
        assert!(parse_edge_list("f", "").is_err());
    }

    #[test]
    fn random_edge_file_matches_set_oracle() {
        let mut rng = rng_from(4);
        let n = 30;
        let mut text = format!("n {n}\n");
        let mut oracle = HashSet::new();
        for _ in 0..100 {
            let u = rng.random_range(0..n);
            let mut v = rng.random_range(0..n);
            while v == u {
                v = rng.random_range(0..n);
            }
            text.push_str(&format!("{u} {v}\n"));
            oracle.insert((u.min(v), u.max(v)));
        }
        let a = parse_edge_list("r", &text).unwrap();
        let g = Graph::new(a.clone(), Array2::zeros((n, 1))).unwrap();
        assert_eq!(g.num_edges(), oracle.len());
        assert_eq!(parse_edge_list("r", &format_edge_list(&a)).unwrap(), a);
    }

    #[test]
    fn attributes_round_trip_exactly() {
        let mut rng = rng_from(5);
        let x = Array2::from_shape_fn((7, 4), |_| rng.random_range(-1e3..1e3) * rng.random::<f64>());
        assert_eq!(parse_attributes("a", &format_attributes(&x)).unwrap(), x);
        let simple = parse_attributes("a", "n 2 c 2\n1.0,2.0\n1.0,2.0\n").unwrap();
        assert_eq!(simple, ndarray::array![[1.0, 2.0], [1.0, 2.0]]);
    }

    #[test]
    fn attribute_errors() {
        assert!(matches!(parse_attributes("a", "n 2 c 2\n1,2\n"), Err(Error::Shape(_))));
        assert!(matches!(
            parse_attributes("a", "n 1 c 2\n1,2\n3,4\n"),
            Err(Error::Parse { line: 3, .. })
        ));
        assert!(matches!(parse_attributes("a", "n 1 c 2\n1\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse_attributes("a", "n 1 c 1\nnan\n"), Err(Error::Parse { .. })));
    }

    #[test]
    fn featureless_identity() {
        assert_eq!(attributes_or_identity(None, 3, true).unwrap(), Array2::<f64>::eye(3));
        assert!(attributes_or_identity(None, 3, false).is_err());
    }

    #[test]
    fn index_lists() {
        assert_eq!(parse_index_list("s", "3\n# c\n1\n").unwrap(), vec![3, 1]);
        assert!(matches!(parse_index_list("s", "3\n-1\n"), Err(Error::Parse { line: 2, .. })));
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("split.txt");
        write_file(&p, "0\n2\n0\n").unwrap();
        assert!(load_split(&p, 3).is_err());
        write_file(&p, "0\n2\n").unwrap();
        assert_eq!(load_split(&p, 3).unwrap(), vec![0, 2]);
        assert!(load_split(&p, 2).is_err());
        assert!(load_labels(&p, 3).is_err());
    }
}
