//! Edge-list text format: a header line `n m`, then `m` lines `u v` with
//! 0-based `u < v`. Node features and labels live next to the edge list in
//! `features.csv` and `labels.csv` (no header).

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use ndarray::Array2;

use super::Graph;
use crate::error::{Error, Result};

pub const FEATURES_FILE: &str = "features.csv";
pub const LABELS_FILE: &str = "labels.csv";

fn companion(path: &Path, name: &str) -> PathBuf {
    path.parent().unwrap_or_else(|| Path::new(".")).join(name)
}

fn parse_usize(tok: Option<&str>, line: usize, what: &str) -> Result<usize> {
    let tok = tok.ok_or_else(|| Error::Parse {
        line,
        msg: format!("missing {what}"),
    })?;
    tok.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("{what} {tok:?} is not a nonnegative integer"),
    })
}

pub fn load_graph(path: impl AsRef<Path>) -> Result<Graph> {
    let path = path.as_ref();
    let reader = BufReader::new(fs::File::open(path)?);
    let mut lines = reader.lines().enumerate().map(|(i, l)| (i + 1, l));

    let (n, m) = loop {
        let Some((no, line)) = lines.next() else {
            return Err(Error::Parse { line: 1, msg: "missing header".into() });
        };
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut toks = line.split_whitespace();
        let n = parse_usize(toks.next(), no, "node count")?;
        let m = parse_usize(toks.next(), no, "edge count")?;
        if toks.next().is_some() {
            return Err(Error::Parse { line: no, msg: "trailing tokens in header".into() });
        }
        break (n, m);
    };

    let mut edges = Vec::with_capacity(m);
    let mut last_line = 1;
    for (no, line) in lines {
        let line = line?;
        last_line = no;
        if line.trim().is_empty() {
            continue;
        }
        let mut toks = line.split_whitespace();
        let u = parse_usize(toks.next(), no, "source")?;
        let v = parse_usize(toks.next(), no, "target")?;
        if toks.next().is_some() {
            return Err(Error::Parse { line: no, msg: "trailing tokens".into() });
        }
        if u >= n || v >= n {
            return Err(Error::Parse {
                line: no,
                msg: format!("index out of range for n = {n}"),
            });
        }
        if u == v {
            return Err(Error::Parse { line: no, msg: format!("self-loop at node {u}") });
        }
        edges.push((u, v));
    }
    if edges.len() != m {
        return Err(Error::Parse {
            line: last_line,
            msg: format!("header declares {m} edges, found {}", edges.len()),
        });
    }
    let (mut graph, duplicates) = Graph::from_edges_counting(n, &edges)?;
    if duplicates > 0 {
        log::warn!("{}: dropped {duplicates} duplicate edge(s)", path.display());
    }

    let labels_path = companion(path, LABELS_FILE);
    if labels_path.exists() {
        graph = graph.with_labels(read_labels(&labels_path, n)?)?;
    }
    let features_path = companion(path, FEATURES_FILE);
    if features_path.exists() {
        graph = graph.with_features(read_features(&features_path, n)?)?;
    }
    Ok(graph)
}

fn read_labels(path: &Path, n: usize) -> Result<Vec<usize>> {
    let text = fs::read_to_string(path)?;
    let labels = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| parse_usize(Some(l.trim()), i + 1, "label"))
        .collect::<Result<Vec<_>>>()?;
    if labels.len() != n {
        return Err(Error::Parse {
            line: labels.len(),
            msg: format!("{} has {} rows, expected {n}", path.display(), labels.len()),
        });
    }
    Ok(labels)
}

fn read_features(path: &Path, n: usize) -> Result<Array2<f64>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).from_path(path)?;
    let mut data = Vec::new();
    let mut width = None;
    let mut rows = 0;
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let line = i + 1;
        if *width.get_or_insert(record.len()) != record.len() {
            return Err(Error::Parse { line, msg: "ragged feature row".into() });
        }
        for field in record.iter() {
            data.push(field.trim().parse::<f64>().map_err(|_| Error::Parse {
                line,
                msg: format!("feature {field:?} is not a number"),
            })?);
        }
        rows += 1;
    }
    if rows != n {
        return Err(Error::Parse {
            line: rows,
            msg: format!("{} has {rows} rows, expected {n}", path.display()),
        });
    }
    Array2::from_shape_vec((n, width.unwrap_or(0)), data)
        .map_err(|e| Error::Parse { line: 0, msg: e.to_string() })
}

/// Writes the edge list, plus `features.csv` / `labels.csv` in the same
/// directory when the graph carries them.
pub fn save_graph(graph: &Graph, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "{} {}", graph.n(), graph.num_edges())?;
    for (u, v) in graph.edges() {
        writeln!(w, "{u} {v}")?;
    }
    w.flush()?;

    if let Some(labels) = &graph.labels {
        let mut w = BufWriter::new(fs::File::create(companion(path, LABELS_FILE))?);
        for y in labels {
            writeln!(w, "{y}")?;
        }
        w.flush()?;
    }
    if let Some(x) = &graph.features {
        let mut w = csv::WriterBuilder::new()
            .has_headers(false)
            .from_path(companion(path, FEATURES_FILE))?;
        for row in x.rows() {
            w.write_record(row.iter().map(|v| v.to_string()))?;
        }
        w.flush()?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{gen_features, sbm_from_homophily, sbm_generate, FeatureGenParams, FeatureMode};

    #[test]
    fn empty_edge_section() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.txt");
        fs::write(&p, "3 0\n").unwrap();
        let g = load_graph(&p).unwrap();
        assert_eq!(g.n(), 3);
        assert_eq!(g.isolated_nodes(), vec![0, 1, 2]);
    }

    #[test]
    fn duplicates_are_dropped() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.txt");
        fs::write(&p, "3 3\n0 1\n1 2\n0 1\n").unwrap();
        let g = load_graph(&p).unwrap();
        assert_eq!(g.num_edges(), 2);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.txt");
        fs::write(&p, "3 2\n0 1\n1 7\n").unwrap();
        assert!(matches!(load_graph(&p), Err(Error::Parse { line: 3, .. })));
        fs::write(&p, "3 x\n").unwrap();
        assert!(matches!(load_graph(&p), Err(Error::Parse { line: 1, .. })));
        fs::write(&p, "3 2\n0 1\n2 2\n").unwrap();
        assert!(matches!(load_graph(&p), Err(Error::Parse { line: 3, .. })));
        fs::write(&p, "3 2\n0 1\n").unwrap();
        assert!(matches!(load_graph(&p), Err(Error::Parse { .. })));
    }

    #[test]
    fn sbm_round_trip_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let params = sbm_from_homophily(200, 2, 6.0, 0.7).unwrap();
        let g = sbm_generate(&params, 4).unwrap();
        let x = gen_features(g.labels.as_ref().unwrap(), &FeatureGenParams::default(), FeatureMode::Binary, 4)
            .unwrap();
        let g = g.with_features(x).unwrap();

        let first = dir.path().join("a").join("g.txt");
        let second = dir.path().join("b").join("g.txt");
        fs::create_dir_all(first.parent().unwrap()).unwrap();
        fs::create_dir_all(second.parent().unwrap()).unwrap();
        save_graph(&g, &first).unwrap();
        let loaded = load_graph(&first).unwrap();
        assert_eq!(loaded, g);
        save_graph(&loaded, &second).unwrap();
        for name in ["g.txt", LABELS_FILE, FEATURES_FILE] {
            let a = fs::read(dir.path().join("a").join(name)).unwrap();
            let b = fs::read(dir.path().join("b").join(name)).unwrap();
            assert_eq!(a, b, "{name} differs");
        }
    }
}
