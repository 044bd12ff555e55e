//! Node CSV (`id,label,f_1,...,f_d`, optional header) and edge-list
//! (`src dst` per line) interchange.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Graph, GraphBuilder};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestOptions {
    /// Emit `j -> i` for every `i -> j` read.
    pub symmetrize: bool,
}

pub fn load_graph(node_path: impl AsRef<Path>, edge_path: impl AsRef<Path>) -> Result<Graph> {
    load_graph_with(node_path, edge_path, IngestOptions::default())
}

pub fn load_graph_with(node_path: impl AsRef<Path>, edge_path: impl AsRef<Path>, opts: IngestOptions) -> Result<Graph> {
    let nodes = read_nodes(File::open(node_path)?)?;
    let edges = read_edges(BufReader::new(File::open(edge_path)?))?;
    assemble(nodes, edges, opts)
}

struct NodeRow {
    id: usize,
    label: usize,
    features: Vec<f64>,
}

fn parse_err(line: u64, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

fn read_nodes(reader: impl std::io::Read) -> Result<Vec<NodeRow>> {
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let mut rows = Vec::new();
    let mut dim: Option<usize> = None;
    for (index, record) in csv.records().enumerate() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map_or(index as u64 + 1, |p| p.line());
        if record.iter().all(str::is_empty) {
            continue;
        }
        if index == 0 && record.get(0).is_some_and(|f| f.parse::<usize>().is_err()) {
            // header row
            continue;
        }
        if record.len() < 2 {
            return Err(parse_err(line, "expected at least `id,label`"));
        }
        let id =
            record[0].parse::<usize>().map_err(|e| parse_err(line, format!("bad node id {:?}: {e}", &record[0])))?;
        let label =
            record[1].parse::<usize>().map_err(|e| parse_err(line, format!("bad label {:?}: {e}", &record[1])))?;
        let features = record
            .iter()
            .skip(2)
            .map(|f| f.parse::<f64>().map_err(|e| parse_err(line, format!("bad feature {f:?}: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        match dim {
            None => dim = Some(features.len()),
            Some(d) if d != features.len() => {
                return Err(parse_err(line, format!("row has {} features, earlier rows have {d}", features.len())))
            }
            _ => {}
        }
        rows.push(NodeRow { id, label, features });
    }
    Ok(rows)
}

fn read_edges(reader: impl BufRead) -> Result<Vec<(usize, usize, u64)>> {
    let mut edges = Vec::new();
    for (index, line) in reader.lines().enumerate() {
        let line_no = index as u64 + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut fields = trimmed.split_whitespace();
        let (Some(a), Some(b), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(parse_err(line_no, format!("expected `src dst`, got {trimmed:?}")));
        };
        let src = a.parse::<usize>().map_err(|e| parse_err(line_no, format!("bad source {a:?}: {e}")))?;
        let dst = b.parse::<usize>().map_err(|e| parse_err(line_no, format!("bad target {b:?}: {e}")))?;
        edges.push((src, dst, line_no));
    }
    Ok(edges)
}

fn assemble(mut nodes: Vec<NodeRow>, edges: Vec<(usize, usize, u64)>, opts: IngestOptions) -> Result<Graph> {
    nodes.sort_by_key(|r| r.id);
    for (expected, row) in nodes.iter().enumerate() {
        if row.id != expected {
            return Err(Error::Integrity(if row.id < expected {
                format!("duplicate node id {}", row.id)
            } else {
                format!("node ids are not dense: missing id {expected}")
            }));
        }
    }
    let dim = nodes.first().map_or(0, |r| r.features.len());
    let classes = nodes.iter().map(|r| r.label + 1).max().unwrap_or(0);
    let n = nodes.len();
    let mut builder = GraphBuilder::new(dim, classes);
    for row in &nodes {
        builder.push_node(&row.features, row.label)?;
    }
    for (src, dst, line) in edges {
        if src >= n || dst >= n {
            return Err(Error::Integrity(format!("edge {src} {dst} on line {line} references a node outside 0..{n}")));
        }
        builder.add_edge(src, dst);
        if opts.symmetrize {
            builder.add_edge(dst, src);
        }
    }
    builder.build()
}

/// Write the node CSV (with header) and the edge list. Floats use Rust's
/// shortest round-trip formatting, so loading the files back is exact.
pub fn save_graph(g: &Graph, node_path: impl AsRef<Path>, edge_path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(node_path)?);
    write!(w, "id,label")?;
    for k in 1..=g.dim() {
        write!(w, ",f_{k}")?;
    }
    writeln!(w)?;
    for id in 0..g.node_count() {
        write!(w, "{id},{}", g.label(id))?;
        for x in g.features(id) {
            write!(w, ",{x:?}")?;
        }
        writeln!(w)?;
    }
    w.flush()?;

    let mut w = BufWriter::new(File::create(edge_path)?);
    for (s, t) in g.edges() {
        writeln!(w, "{s} {t}")?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn load_str(nodes: &str, edges: &str) -> Result<Graph> {
        let n = read_nodes(Cursor::new(nodes))?;
        let e = read_edges(Cursor::new(edges))?;
        assemble(n, e, IngestOptions::default())
    }

    #[test]
    fn three_node_file() {
        let g = load_str("0,0,1.0,2.0\n1,1,0.5,0.5\n2,0,0,0\n", "0 1\n1 2\n").unwrap();
        assert_eq!(g.node_count(), 3);
        assert_eq!(g.dim(), 2);
        assert_eq!(g.num_classes(), 2);
        assert_eq!(g.out_degree(0), 1);
        assert_eq!(g.in_edges(2), &[1]);
    }

    #[test]
    fn header_is_optional() {
        let g = load_str("id,label,f_1\n1,0,2.5\n0,1,1.5\n", "").unwrap();
        assert_eq!(g.features(0), &[1.5]);
        assert_eq!(g.label(1), 0);
        assert_eq!(g.edge_count(), 0);
    }

    #[test]
    fn empty_edge_file_gives_edgeless_graph() {
        let g = load_str("0,0,1\n1,0,1\n", "\n# nothing\n").unwrap();
        assert!((0..2).all(|i| g.out_degree(i) == 0 && g.in_degree(i) == 0));
    }

    #[test]
    fn dangling_edge_is_integrity_error() {
        let err = load_str("0,0,1\n1,0,1\n2,0,1\n", "0 5\n").unwrap_err();
        assert!(matches!(err, Error::Integrity(_)), "{err}");
    }

    #[test]
    fn duplicate_node_id_is_integrity_error() {
        let err = load_str("0,0,1\n0,1,1\n", "").unwrap_err();
        assert!(matches!(err, Error::Integrity(ref m) if m.contains("duplicate")), "{err}");
    }

    #[test]
    fn malformed_rows_report_line_numbers() {
        let err = load_str("0,0,1\n1,x,1\n", "").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = load_str("0,0,1\n1,0,1,2\n", "").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = load_str("0,0,1\n1,0,1\n", "0 1\n\n1 zero\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        let err = load_str("0,0,1\n1,0,1\n", "0 1 2\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }), "{err}");
    }

    #[test]
    fn symmetrize_flag() {
        let nodes = read_nodes(Cursor::new("0,0,1\n1,0,1\n")).unwrap();
        let edges = read_edges(Cursor::new("0 1\n")).unwrap();
        let g = assemble(nodes, edges, IngestOptions { symmetrize: true }).unwrap();
        assert!(g.has_edge(0, 1) && g.has_edge(1, 0));
    }
}
