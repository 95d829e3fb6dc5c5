//! Text format for clustered instances, and a synthetic instance generator.
//!
//! Files follow TSPLIB conventions: a `KEY : VALUE` header followed by data
//! sections. Vertex ids are 1-based in files and 0-based in memory.
//!
//! ```text
//! NAME : t1
//! TYPE : CluSPT
//! DIMENSION : 4
//! EDGE_WEIGHT_TYPE : EXPLICIT
//! NUMBER_OF_CLUSTERS : 2
//! ROOT : 1
//! EDGE_SECTION
//! 1 2 1
//! 1 4 5
//! 2 3 2
//! 3 4 1
//! CLUSTER_SECTION
//! 1 2 -1
//! 3 4 -1
//! EOF
//! ```
//!
//! `EDGE_WEIGHT_TYPE : EUC_2D_REAL` replaces `EDGE_SECTION` with a
//! `NODE_COORD_SECTION` of `id x y` lines and describes the complete graph
//! with unrounded Euclidean weights. A section ends at the next keyword or
//! at end of input. `COMMENT` header lines are ignored.

use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::WeightedGraph;
use crate::instance::ClusteredInstance;

const TYPE_NAME: &str = "CluSPT";
const EUCLIDEAN: &str = "EUC_2D_REAL";
const EXPLICIT: &str = "EXPLICIT";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    Header,
    Coords,
    Edges,
    Clusters,
    End,
}

struct Token<'a> {
    line: usize,
    column: usize,
    text: &'a str,
}

impl Token<'_> {
    fn error(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            line: self.line,
            column: self.column,
            message: message.into(),
        }
    }

    fn parse<T: FromStr>(&self, what: &str) -> Result<T> {
        self.text
            .parse()
            .map_err(|_| self.error(format!("expected {what}, found `{}`", self.text)))
    }

    /// 1-based id in `[1, n]`, returned 0-based.
    fn vertex(&self, n: usize) -> Result<usize> {
        let id: usize = self.parse("a vertex id")?;
        if id == 0 || id > n {
            return Err(self.error(format!("vertex id {id} outside 1..={n}")));
        }
        Ok(id - 1)
    }
}

fn tokens(line_no: usize, line: &str) -> Vec<Token<'_>> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, ch) in line.char_indices().chain(std::iter::once((line.len(), ' '))) {
        match (ch.is_whitespace(), start) {
            (false, None) => start = Some(i),
            (true, Some(s)) => {
                out.push(Token {
                    line: line_no,
                    column: line[..s].chars().count() + 1,
                    text: &line[s..i],
                });
                start = None;
            }
            _ => {}
        }
    }
    out
}

fn section_keyword(word: &str) -> Option<Section> {
    match word {
        "NODE_COORD_SECTION" => Some(Section::Coords),
        "EDGE_SECTION" => Some(Section::Edges),
        "CLUSTER_SECTION" => Some(Section::Clusters),
        "EOF" => Some(Section::End),
        _ => None,
    }
}

#[derive(Default)]
struct Header {
    name: Option<String>,
    dimension: Option<usize>,
    weight_type: Option<String>,
    clusters: Option<usize>,
    root: Option<usize>,
}

/// Parses and validates an instance.
pub fn parse_instance(text: &str) -> Result<ClusteredInstance> {
    let mut header = Header::default();
    let mut section = Section::Header;
    let mut coords: Vec<Option<[f64; 2]>> = Vec::new();
    let mut edges = Vec::new();
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    let mut open_cluster: Option<Vec<usize>> = None;
    let mut seen_sections = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let toks = tokens(line_no, raw);
        let Some(first) = toks.first() else { continue };

        if let Some(next) = section_keyword(first.text.trim_end_matches(':')) {
            if toks.len() > 1 {
                return Err(toks[1].error("unexpected text after section keyword"));
            }
            if section == Section::End {
                return Err(first.error("content after EOF"));
            }
            if open_cluster.is_some() {
                return Err(first.error("cluster line not terminated by -1"));
            }
            if seen_sections.contains(&next) {
                return Err(first.error(format!("repeated section {}", first.text)));
            }
            if next != Section::End {
                let n = header
                    .dimension
                    .ok_or_else(|| first.error("DIMENSION must precede data sections"))?;
                if next == Section::Coords {
                    coords = vec![None; n];
                }
            }
            seen_sections.push(next);
            section = next;
            continue;
        }

        match section {
            Section::Header => read_header_line(&mut header, raw, &toks)?,
            Section::Coords => {
                let n = coords.len();
                if toks.len() != 3 {
                    return Err(first.error("expected `id x y`"));
                }
                let v = toks[0].vertex(n)?;
                let x: f64 = toks[1].parse("a coordinate")?;
                let y: f64 = toks[2].parse("a coordinate")?;
                if !x.is_finite() || !y.is_finite() {
                    return Err(toks[1].error("coordinates must be finite"));
                }
                if coords[v].replace([x, y]).is_some() {
                    return Err(first.error(format!("vertex {} listed twice", v + 1)));
                }
            }
            Section::Edges => {
                let n = header.dimension.unwrap_or(0);
                if toks.len() != 3 {
                    return Err(first.error("expected `u v w`"));
                }
                let u = toks[0].vertex(n)?;
                let v = toks[1].vertex(n)?;
                let w: f64 = toks[2].parse("a weight")?;
                if !w.is_finite() || w < 0.0 {
                    return Err(toks[2].error("weights must be finite and non-negative"));
                }
                if u == v {
                    return Err(first.error("self-loops are not allowed"));
                }
                edges.push((u, v, w));
            }
            Section::Clusters => {
                let n = header.dimension.unwrap_or(0);
                for tok in &toks {
                    if tok.text == "-1" {
                        let members = open_cluster
                            .take()
                            .ok_or_else(|| tok.error("empty cluster"))?;
                        clusters.push(members);
                    } else {
                        let v = tok.vertex(n)?;
                        open_cluster.get_or_insert_with(Vec::new).push(v);
                    }
                }
            }
            Section::End => return Err(first.error("content after EOF")),
        }
    }
    if open_cluster.is_some() {
        return Err(Error::Validation("last cluster is not terminated by -1".into()));
    }

    let missing = |key: &str| Error::Validation(format!("missing {key} in header"));
    let n = header.dimension.ok_or_else(|| missing("DIMENSION"))?;
    let k = header.clusters.ok_or_else(|| missing("NUMBER_OF_CLUSTERS"))?;
    let root = header.root.ok_or_else(|| missing("ROOT"))?;
    let weight_type = header.weight_type.ok_or_else(|| missing("EDGE_WEIGHT_TYPE"))?;
    if root == 0 || root > n {
        return Err(Error::Validation(format!("ROOT {root} is not a vertex")));
    }
    if clusters.len() != k {
        return Err(Error::Validation(format!(
            "NUMBER_OF_CLUSTERS is {k} but {} clusters are listed",
            clusters.len()
        )));
    }
    let graph = match weight_type.as_str() {
        EUCLIDEAN => {
            if seen_sections.contains(&Section::Edges) {
                return Err(Error::Validation("EDGE_SECTION is not allowed for EUC_2D_REAL".into()));
            }
            if !seen_sections.contains(&Section::Coords) {
                return Err(Error::Validation("missing NODE_COORD_SECTION".into()));
            }
            let coords = coords
                .into_iter()
                .enumerate()
                .map(|(v, c)| c.ok_or_else(|| Error::Validation(format!("vertex {} has no coordinates", v + 1))))
                .collect::<Result<Vec<_>>>()?;
            WeightedGraph::euclidean(coords)?
        }
        EXPLICIT => {
            if seen_sections.contains(&Section::Coords) {
                return Err(Error::Validation("NODE_COORD_SECTION is not allowed for EXPLICIT".into()));
            }
            WeightedGraph::from_edges(n, edges)?
        }
        other => return Err(Error::Validation(format!("unsupported EDGE_WEIGHT_TYPE {other}"))),
    };
    ClusteredInstance::new(header.name.unwrap_or_default(), graph, clusters, root - 1)
}

fn read_header_line(header: &mut Header, raw: &str, toks: &[Token<'_>]) -> Result<()> {
    let first = &toks[0];
    let Some(colon) = raw.find(':') else {
        return Err(first.error("expected `KEY : VALUE`"));
    };
    let (key, value) = (raw[..colon].trim(), raw[colon + 1..].trim());
    let after = &raw[colon + 1..];
    let offset = colon + 1 + (after.len() - after.trim_start().len());
    let value_tok = Token {
        line: first.line,
        column: raw[..offset].chars().count() + 1,
        text: value,
    };
    let number = |what: &str| -> Result<usize> {
        value
            .parse()
            .map_err(|_| value_tok.error(format!("{what} must be a non-negative integer")))
    };
    match key {
        "NAME" => header.name = Some(value.to_string()),
        "COMMENT" => {}
        "TYPE" => {
            if value != TYPE_NAME {
                return Err(value_tok.error(format!("TYPE must be {TYPE_NAME}")));
            }
        }
        "DIMENSION" => header.dimension = Some(number("DIMENSION")?),
        "NUMBER_OF_CLUSTERS" => header.clusters = Some(number("NUMBER_OF_CLUSTERS")?),
        "ROOT" => header.root = Some(number("ROOT")?),
        "EDGE_WEIGHT_TYPE" => {
            if value != EUCLIDEAN && value != EXPLICIT {
                return Err(value_tok.error(format!("EDGE_WEIGHT_TYPE must be {EUCLIDEAN} or {EXPLICIT}")));
            }
            header.weight_type = Some(value.to_string());
        }
        _ => return Err(first.error(format!("unknown header key `{key}`"))),
    }
    Ok(())
}

/// Canonical text form of an instance.
pub fn serialize_instance(inst: &ClusteredInstance) -> String {
    let mut out = String::new();
    let graph = inst.graph();
    let weight_type = if graph.is_complete() { EUCLIDEAN } else { EXPLICIT };
    // Writing to a String cannot fail.
    let _ = writeln!(out, "NAME : {}", inst.name());
    let _ = writeln!(out, "TYPE : {TYPE_NAME}");
    let _ = writeln!(out, "DIMENSION : {}", inst.n());
    let _ = writeln!(out, "EDGE_WEIGHT_TYPE : {weight_type}");
    let _ = writeln!(out, "NUMBER_OF_CLUSTERS : {}", inst.k());
    let _ = writeln!(out, "ROOT : {}", inst.root() + 1);
    if let Some(coords) = graph.coords() {
        out.push_str("NODE_COORD_SECTION\n");
        for (v, [x, y]) in coords.iter().enumerate() {
            let _ = writeln!(out, "{} {x} {y}", v + 1);
        }
    } else {
        out.push_str("EDGE_SECTION\n");
        graph.for_each_edge(|u, v, w| {
            let _ = writeln!(out, "{} {} {w}", u + 1, v + 1);
        });
    }
    out.push_str("CLUSTER_SECTION\n");
    for members in inst.clusters() {
        for v in members {
            let _ = write!(out, "{} ", v + 1);
        }
        out.push_str("-1\n");
    }
    out.push_str("EOF\n");
    out
}

pub fn read_instance(path: impl AsRef<Path>) -> Result<ClusteredInstance> {
    parse_instance(&std::fs::read_to_string(path)?)
}

pub fn write_instance(path: impl AsRef<Path>, inst: &ClusteredInstance) -> Result<()> {
    std::fs::write(path, serialize_instance(inst))?;
    Ok(())
}

/// How generated points are grouped into clusters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    /// Uniform points; each joins the nearest of `k` randomly chosen centres.
    UniformSquare,
    /// The square is cut into an `a x b` grid of `k` cells; a point belongs to
    /// the cell it falls in, and every cell receives at least one point.
    GridCells,
}

impl fmt::Display for Layout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Layout::UniformSquare => "uniform-square",
            Layout::GridCells => "grid-cells",
        })
    }
}

impl FromStr for Layout {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform-square" => Ok(Layout::UniformSquare),
            "grid-cells" => Ok(Layout::GridCells),
            _ => Err(Error::InvalidParameters(format!("unknown layout `{s}`"))),
        }
    }
}

const SIDE: f64 = 1000.0;

fn coordinate(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    let x = rng.random_range(lo..hi);
    ((x * 100.0).round() / 100.0).clamp(lo, hi)
}

/// Complete Euclidean instance with `n` points in a 1000 x 1000 square and
/// `k` clusters. Deterministic per seed.
pub fn generate_instance(n: usize, k: usize, layout: Layout, seed: u64) -> Result<ClusteredInstance> {
    if n == 0 || k == 0 || k > n {
        return Err(Error::InvalidParameters(format!("need 1 <= k <= n, got n = {n}, k = {k}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (coords, cluster_of, name) = match layout {
        Layout::UniformSquare => {
            let coords: Vec<[f64; 2]> = (0..n)
                .map(|_| [coordinate(&mut rng, 0.0, SIDE), coordinate(&mut rng, 0.0, SIDE)])
                .collect();
            let centres = sample(&mut rng, n, k).into_vec();
            let mut cluster_of = vec![0; n];
            for (v, slot) in cluster_of.iter_mut().enumerate() {
                *slot = match centres.iter().position(|&c| c == v) {
                    Some(own) => own,
                    None => {
                        let d = |c: usize| {
                            let [x, y] = coords[centres[c]];
                            (coords[v][0] - x).hypot(coords[v][1] - y)
                        };
                        (0..k).fold(0, |best, c| if d(c) < d(best) { c } else { best })
                    }
                };
            }
            (coords, cluster_of, format!("{k}u{n}-s{seed}"))
        }
        Layout::GridCells => {
            let rows = (1..=k).filter(|a| k % a == 0 && a * a <= k).max().unwrap_or(1);
            let cols = k / rows;
            let (cw, ch) = (SIDE / cols as f64, SIDE / rows as f64);
            let mut coords = Vec::with_capacity(n);
            let mut cluster_of = Vec::with_capacity(n);
            for cell in 0..k {
                let (r, c) = (cell / cols, cell % cols);
                let x = coordinate(&mut rng, c as f64 * cw, (c + 1) as f64 * cw);
                let y = coordinate(&mut rng, r as f64 * ch, (r + 1) as f64 * ch);
                coords.push([x, y]);
                cluster_of.push(cell);
            }
            for _ in k..n {
                let x = coordinate(&mut rng, 0.0, SIDE);
                let y = coordinate(&mut rng, 0.0, SIDE);
                let c = ((x / cw) as usize).min(cols - 1);
                let r = ((y / ch) as usize).min(rows - 1);
                coords.push([x, y]);
                cluster_of.push(r * cols + c);
            }
            (coords, cluster_of, format!("{k}g{n}-{rows}x{cols}-s{seed}"))
        }
    };
    let root = rng.random_range(0..n);
    let mut clusters = vec![Vec::new(); k];
    for (v, &c) in cluster_of.iter().enumerate() {
        clusters[c].push(v);
    }
    ClusteredInstance::new(name, WeightedGraph::euclidean(coords)?, clusters, root)
}
