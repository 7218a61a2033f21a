//! Plain-text edge lists: one `u v` pair per line, `#` comments, and an
//! optional leading `n <count>` header.

use std::fmt::Write as _;
use std::path::Path;

use super::Graph;
use crate::error::{Error, Result};

pub fn parse_edge_list(text: &str) -> Result<Graph> {
    let mut declared_n = None;
    let mut edges = Vec::new();
    let mut first_content = true;
    let mut last_line = 0;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        last_line = line_no;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let parse = |s: &str| {
            s.parse::<usize>().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("`{s}` is not a vertex index"),
            })
        };
        if first_content && fields.first() == Some(&"n") {
            if fields.len() != 2 {
                return Err(Error::Parse {
                    line: line_no,
                    message: "expected `n <count>`".into(),
                });
            }
            declared_n = Some(parse(fields[1])?);
            first_content = false;
            continue;
        }
        first_content = false;
        if fields.len() != 2 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected two vertex indices, found {} fields", fields.len()),
            });
        }
        edges.push((parse(fields[0])?, parse(fields[1])?, line_no));
    }

    let n = match declared_n {
        Some(n) => n,
        None => edges
            .iter()
            .map(|&(u, v, _)| u.max(v) + 1)
            .max()
            .ok_or(Error::Parse {
                line: last_line,
                message: "edge list declares no vertices".into(),
            })?,
    };
    let mut seen = std::collections::BTreeSet::new();
    for &(u, v, line) in &edges {
        let problem = if u >= n || v >= n {
            Some(Error::EndpointOutOfRange { u, v, n })
        } else if u == v {
            Some(Error::SelfLoop { u, v })
        } else if !seen.insert((u.min(v), u.max(v))) {
            Some(Error::DuplicateEdge { u, v })
        } else {
            None
        };
        if let Some(e) = problem {
            return Err(Error::Parse {
                line,
                message: e.to_string(),
            });
        }
    }
    Graph::new(n, edges.into_iter().map(|(u, v, _)| (u, v)))
}

pub fn read_edge_list(path: impl AsRef<Path>) -> Result<Graph> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::Parse {
        line: 0,
        message: format!("cannot read {}: {e}", path.display()),
    })?;
    parse_edge_list(&text)
}

/// Writes the graph in the same format, with an explicit `n` header.
pub fn to_edge_list(g: &Graph) -> String {
    let mut out = format!("n {}\n", g.n());
    for &(u, v) in g.edges() {
        let _ = writeln!(out, "{u} {v}");
    }
    out
}
