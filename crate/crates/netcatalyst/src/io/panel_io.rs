//! Panel ingestion and persistence.
//!
//! Four tab-separated files with header rows describe a panel:
//!
//! * edges: `wave  node_a  node_b`, waves numbered contiguously from 1;
//! * nodes: `node_id  <categorical>  <numeric>...`; the second column, when
//!   present, is categorical (an empty cell is its own level), later columns
//!   are numeric with empty cells as missing values;
//! * composition: `node_id  entry_wave  exit_wave`, inclusive; a node
//!   without a row is present throughout;
//! * membership: `wave  node_id`, one row per member and wave, loaded as a
//!   0/1 numeric covariate named `member`.
//!
//! Node ids may contain spaces but not tabs. A wave with no edge rows
//! cannot be expressed.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use super::{format_sig, IoError};
use crate::attrs::{Covariate, NodeAttributes};
use crate::graph::Graph;
use crate::saom::Panel;

/// A parsed panel plus non-fatal warnings (duplicate rows that were
/// dropped). Callers decide where warnings go.
#[derive(Debug)]
pub struct LoadedPanel {
    pub panel: Panel,
    pub warnings: Vec<String>,
}

struct TsvFile {
    path: String,
    /// (1-based line number, tab-separated fields) for non-empty data rows.
    rows: Vec<(usize, Vec<String>)>,
}

fn read_tsv(path: &Path) -> Result<TsvFile, IoError> {
    let name = path.display().to_string();
    let text = std::fs::read_to_string(path)
        .map_err(|source| IoError::File { path: name.clone(), source })?;
    let mut lines = text.lines().enumerate();
    if lines.next().is_none() {
        return Err(IoError::MissingHeader { path: name });
    }
    let rows = lines
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(idx, l)| (idx + 1, l.split('\t').map(|f| f.trim().to_string()).collect()))
        .collect();
    Ok(TsvFile { path: name, rows })
}

fn header_of(path: &Path) -> Result<Vec<String>, IoError> {
    let name = path.display().to_string();
    let text = std::fs::read_to_string(path)
        .map_err(|source| IoError::File { path: name.clone(), source })?;
    match text.lines().next() {
        None => Err(IoError::MissingHeader { path: name }),
        Some(h) => Ok(h.split('\t').map(|f| f.trim().to_string()).collect()),
    }
}

fn need(file: &TsvFile, line: usize, fields: &[String], expected: usize) -> Result<(), IoError> {
    if fields.len() < expected {
        return Err(IoError::FieldCount {
            path: file.path.clone(),
            line,
            expected,
            got: fields.len(),
        });
    }
    Ok(())
}

fn parse_wave(file: &TsvFile, line: usize, text: &str) -> Result<usize, IoError> {
    text.parse::<usize>().ok().filter(|&w| w >= 1).ok_or_else(|| IoError::BadField {
        path: file.path.clone(),
        line,
        what: "wave number",
        text: text.to_string(),
    })
}

fn node_index(file: &TsvFile, line: usize, ids: &[String], id: &str) -> Result<usize, IoError> {
    ids.iter().position(|x| x == id).ok_or_else(|| IoError::UnknownNode {
        path: file.path.clone(),
        line,
        id: id.to_string(),
    })
}

/// Loads a panel from its TSV files. Composition and membership are
/// optional: without composition every node spans all waves, without
/// membership no `member` covariate is attached.
pub fn load_panel(
    edges_path: &Path,
    nodes_path: &Path,
    composition_path: Option<&Path>,
    membership_path: Option<&Path>,
) -> Result<LoadedPanel, IoError> {
    let mut warnings = Vec::new();

    let header = header_of(nodes_path)?;
    let nodes = read_tsv(nodes_path)?;
    let mut ids: Vec<String> = Vec::new();
    for &(line, ref fields) in &nodes.rows {
        need(&nodes, line, fields, 1)?;
        if ids.contains(&fields[0]) {
            return Err(IoError::DuplicateRow {
                path: nodes.path.clone(),
                line,
                id: fields[0].clone(),
            });
        }
        ids.push(fields[0].clone());
    }
    let n = ids.len();

    let edges = read_tsv(edges_path)?;
    let mut waves_seen = BTreeSet::new();
    let mut rows: Vec<(usize, usize, usize, usize)> = Vec::new();
    for &(line, ref fields) in &edges.rows {
        need(&edges, line, fields, 3)?;
        let w = parse_wave(&edges, line, &fields[0])?;
        if fields[1] == fields[2] {
            return Err(IoError::SelfLoop {
                path: edges.path.clone(),
                line,
                id: fields[1].clone(),
            });
        }
        let a = node_index(&edges, line, &ids, &fields[1])?;
        let b = node_index(&edges, line, &ids, &fields[2])?;
        waves_seen.insert(w);
        rows.push((line, w, a.min(b), a.max(b)));
    }
    let wave_count = waves_seen.iter().next_back().copied().unwrap_or(0);
    for w in 1..=wave_count {
        if !waves_seen.contains(&w) {
            return Err(IoError::WaveGap { path: edges.path.clone(), wave: w });
        }
    }
    if wave_count < 2 {
        return Err(IoError::SpecFile {
            path: edges.path.clone(),
            message: format!("a panel needs at least 2 waves, found {wave_count}"),
        });
    }

    let mut entry = vec![0usize; n];
    let mut exit = vec![wave_count - 1; n];
    if let Some(path) = composition_path {
        let comp = read_tsv(path)?;
        let mut seen = vec![false; n];
        for &(line, ref fields) in &comp.rows {
            need(&comp, line, fields, 3)?;
            let i = node_index(&comp, line, &ids, &fields[0])?;
            if seen[i] {
                return Err(IoError::DuplicateRow {
                    path: comp.path.clone(),
                    line,
                    id: fields[0].clone(),
                });
            }
            seen[i] = true;
            let e = parse_wave(&comp, line, &fields[1])?;
            let x = parse_wave(&comp, line, &fields[2])?;
            for w in [e, x] {
                if w > wave_count {
                    return Err(IoError::WaveRange {
                        path: comp.path.clone(),
                        line,
                        wave: w,
                        waves: wave_count,
                    });
                }
            }
            if e > x {
                return Err(IoError::BadField {
                    path: comp.path.clone(),
                    line,
                    what: "entry/exit order",
                    text: format!("{e} > {x}"),
                });
            }
            entry[i] = e - 1;
            exit[i] = x - 1;
        }
    }

    let mut graphs: Vec<Graph> = (0..wave_count).map(|_| Graph::new(n)).collect();
    for &(line, w, a, b) in &rows {
        for node in [a, b] {
            if entry[node] + 1 > w || exit[node] + 1 < w {
                return Err(IoError::AbsentEdge {
                    path: edges.path.clone(),
                    line,
                    id: ids[node].clone(),
                    wave: w,
                });
            }
        }
        let g = &mut graphs[w - 1];
        if g.has_edge(a, b) {
            warnings.push(format!(
                "{}:{}: duplicate edge {} -- {} in wave {} ignored",
                edges.path, line, ids[a], ids[b], w
            ));
        } else {
            g.add_edge(a, b).expect("distinct valid endpoints");
        }
    }

    let mut base = NodeAttributes::new(n);
    if header.len() >= 2 {
        let name = &header[1];
        let mut levels: Vec<String> = Vec::new();
        let mut values = Vec::with_capacity(n);
        for &(line, ref fields) in &nodes.rows {
            need(&nodes, line, fields, 2)?;
            let cell = fields[1].clone();
            let idx = match levels.iter().position(|l| *l == cell) {
                Some(i) => i,
                None => {
                    levels.push(cell);
                    levels.len() - 1
                }
            };
            values.push(idx as u32);
        }
        base.add_categorical(name, levels, values)?;
    }
    for col in 2..header.len() {
        let name = &header[col];
        let mut values = Vec::with_capacity(n);
        for &(line, ref fields) in &nodes.rows {
            let cell = fields.get(col).map(String::as_str).unwrap_or("");
            if cell.is_empty() {
                values.push(None);
            } else {
                let v = cell.parse::<f64>().map_err(|_| IoError::BadField {
                    path: nodes.path.clone(),
                    line,
                    what: "numeric attribute",
                    text: cell.to_string(),
                })?;
                values.push(Some(v));
            }
        }
        base.add_numeric(name, values)?;
    }

    let mut attrs = vec![base; wave_count];
    if let Some(path) = membership_path {
        let mem = read_tsv(path)?;
        let mut member = vec![vec![0.0f64; n]; wave_count];
        for &(line, ref fields) in &mem.rows {
            need(&mem, line, fields, 2)?;
            let w = parse_wave(&mem, line, &fields[0])?;
            if w > wave_count {
                return Err(IoError::WaveRange {
                    path: mem.path.clone(),
                    line,
                    wave: w,
                    waves: wave_count,
                });
            }
            let i = node_index(&mem, line, &ids, &fields[1])?;
            member[w - 1][i] = 1.0;
        }
        for (w, a) in attrs.iter_mut().enumerate() {
            a.add_numeric("member", member[w].iter().map(|&v| Some(v)).collect())?;
        }
    }

    let panel = Panel::new(ids, graphs, attrs, entry, exit)?;
    Ok(LoadedPanel { panel, warnings })
}

/// Writes a panel back out in canonical form: nodes in roster order, edges
/// sorted by (wave, endpoints), explicit composition rows for every node,
/// and membership rows recovered from the `member` covariate when present.
pub fn save_panel(
    panel: &Panel,
    edges_path: &Path,
    nodes_path: &Path,
    composition_path: &Path,
    membership_path: Option<&Path>,
) -> Result<(), IoError> {
    let n = panel.n();
    let ids = panel.ids();

    let mut edges = String::from("wave\tnode_a\tnode_b\n");
    for w in 0..panel.wave_count() {
        let mut pairs: Vec<(usize, usize)> = panel.wave(w).edges().collect();
        pairs.sort_unstable();
        for (i, j) in pairs {
            let _ = writeln!(edges, "{}\t{}\t{}", w + 1, ids[i], ids[j]);
        }
    }
    write_file(edges_path, &edges)?;

    let attrs0 = panel.attrs(0);
    let columns: Vec<&str> = attrs0.column_names().filter(|&c| c != "member").collect();
    let mut nodes = String::from("node_id");
    for c in &columns {
        nodes.push('\t');
        nodes.push_str(c);
    }
    nodes.push('\n');
    for i in 0..n {
        nodes.push_str(&ids[i]);
        for c in &columns {
            nodes.push('\t');
            match attrs0.get(c)? {
                Covariate::Categorical { levels, values } => {
                    nodes.push_str(&levels[values[i] as usize]);
                }
                Covariate::Numeric { values } => {
                    if let Some(v) = values[i] {
                        nodes.push_str(&format_sig(v, 6));
                    }
                }
            }
        }
        nodes.push('\n');
    }
    write_file(nodes_path, &nodes)?;

    let mut comp = String::from("node_id\tentry_wave\texit_wave\n");
    for i in 0..n {
        let _ =
            writeln!(comp, "{}\t{}\t{}", ids[i], panel.entry_wave(i) + 1, panel.exit_wave(i) + 1);
    }
    write_file(composition_path, &comp)?;

    if let Some(path) = membership_path {
        let mut mem = String::from("wave\tnode_id\n");
        for w in 0..panel.wave_count() {
            if let Ok(Covariate::Numeric { values }) = panel.attrs(w).get("member") {
                for i in 0..n {
                    if values[i] == Some(1.0) {
                        let _ = writeln!(mem, "{}\t{}", w + 1, ids[i]);
                    }
                }
            }
        }
        write_file(path, &mem)?;
    }
    Ok(())
}

fn write_file(path: &Path, content: &str) -> Result<(), IoError> {
    std::fs::write(path, content)
        .map_err(|source| IoError::File { path: path.display().to_string(), source })
}
