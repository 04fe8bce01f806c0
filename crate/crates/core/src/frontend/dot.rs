use crate::ir::{stmt_to_string, Cfa, OccId};
use std::collections::BTreeSet;

/// Rendering options for [`dump_dot`].
#[derive(Clone, Debug, Default)]
pub struct DotStyle {
    /// Graph name; defaults to `cfa`.
    pub name: Option<String>,
    /// Occurrence ids drawn bold (used for accelerator edges).
    pub bold: BTreeSet<OccId>,
}

/// Render a CFA in Graphviz dot syntax. Error vertices are double-circled,
/// the initial vertex is marked with an incoming arrow from a point node.
pub fn dump_dot(cfa: &Cfa, style: &DotStyle) -> String {
    let mut s = String::new();
    let name = style.name.as_deref().unwrap_or("cfa");
    s.push_str(&format!("digraph {} {{\n", name));
    s.push_str("  rankdir=TB;\n");
    s.push_str("  node [shape=circle];\n");
    s.push_str("  __init [shape=point];\n");
    for v in 0..cfa.n_vertices {
        if cfa.errors.contains(&v) {
            s.push_str(&format!("  v{} [shape=doublecircle, label=\"E\"];\n", v));
        } else {
            s.push_str(&format!("  v{} [label=\"{}\"];\n", v, v));
        }
    }
    s.push_str(&format!("  __init -> v{};\n", cfa.v0));
    let mut edges: Vec<_> = cfa.edges.iter().collect();
    edges.sort_by_key(|e| e.id);
    for e in edges {
        let label = escape(&stmt_to_string(cfa, &e.stmt));
        let attrs = if style.bold.contains(&e.id) {
            format!("label=\"{}\", style=bold", label)
        } else {
            format!("label=\"{}\"", label)
        };
        s.push_str(&format!("  v{} -> v{} [{}];\n", e.src, e.tgt, attrs));
    }
    s.push_str("}\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Structural sanity check for dot output produced by [`dump_dot`]: balanced
/// braces, a `digraph` header, and every referenced vertex declared.
pub fn check_dot(text: &str) -> Result<(), String> {
    if !text.trim_start().starts_with("digraph ") {
        return Err("missing digraph header".to_string());
    }
    let opens = text.matches('{').count();
    let closes = text.matches('}').count();
    if opens != closes {
        return Err(format!("unbalanced braces: {} open, {} close", opens, closes));
    }
    let mut declared: BTreeSet<&str> = BTreeSet::new();
    let mut referenced: BTreeSet<&str> = BTreeSet::new();
    for line in text.lines() {
        let t = line.trim().trim_end_matches(';');
        if let Some((lhs, rhs)) = t.split_once("->") {
            referenced.insert(lhs.trim());
            let tgt = rhs.trim().split_whitespace().next().unwrap_or("");
            let tgt = tgt.split('[').next().unwrap_or("").trim();
            referenced.insert(tgt);
        } else if let Some(name) = t.split_whitespace().next() {
            if name.starts_with("v") || name.starts_with("__") {
                declared.insert(name);
            }
        }
    }
    for r in referenced {
        if r.is_empty() {
            return Err("edge with empty endpoint".to_string());
        }
        if !declared.contains(r) {
            return Err(format!("edge references undeclared node `{}`", r));
        }
    }
    Ok(())
}
