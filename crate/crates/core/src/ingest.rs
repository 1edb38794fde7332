//! Multi-graph benchmark corpora in the TU text format, and per-graph
//! Kronecker feature extraction.
//!
//! A dataset `DS` is a directory with `DS_A.txt` (one `i, j` edge per line,
//! global 1-based node ids), `DS_graph_indicator.txt` (graph id of each
//! node) and `DS_graph_labels.txt` (label of each graph).

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use crate::error::{KronError, Result};
use crate::kron_model::{checked_size, Adjacency};
use crate::rng::derive_seed;
use crate::solver::{infer, SolverConfig};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    pub nodes: usize,
    /// Directed edges with 1-based local endpoints.
    pub edges: Vec<(usize, usize)>,
    pub label: i64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GraphCorpus {
    pub name: String,
    pub graphs: Vec<Graph>,
}

fn dataset_name(dir: &Path) -> Result<String> {
    let entries = fs::read_dir(dir).map_err(|_| KronError::MissingFile(dir.to_path_buf()))?;
    let mut names: Vec<String> = entries
        .filter_map(|e| e.ok())
        .filter_map(|e| e.file_name().to_str().and_then(|s| s.strip_suffix("_A.txt")).map(str::to_owned))
        .collect();
    names.sort();
    names
        .into_iter()
        .next()
        .ok_or_else(|| KronError::MissingFile(dir.join("DS_A.txt")))
}

fn read_lines(path: &Path) -> Result<Vec<(usize, String)>> {
    let file = fs::File::open(path).map_err(|_| KronError::MissingFile(path.to_path_buf()))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if !t.is_empty() {
            out.push((i + 1, t.to_owned()));
        }
    }
    Ok(out)
}

fn malformed(path: &Path, line: usize, message: impl Into<String>) -> KronError {
    KronError::MalformedLine {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn parse_int<T: std::str::FromStr>(path: &Path, line: usize, s: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| malformed(path, line, format!("expected an integer, found {s:?}")))
}

pub fn parse_tu_dataset(dir: impl AsRef<Path>) -> Result<GraphCorpus> {
    let dir = dir.as_ref();
    let name = dataset_name(dir)?;
    let file = |suffix: &str| -> PathBuf { dir.join(format!("{name}_{suffix}.txt")) };
    let (a_path, ind_path, lab_path) = (file("A"), file("graph_indicator"), file("graph_labels"));

    let labels: Vec<i64> = read_lines(&lab_path)?
        .iter()
        .map(|(ln, s)| parse_int(&lab_path, *ln, s))
        .collect::<Result<_>>()?;
    let indicator: Vec<usize> = read_lines(&ind_path)?
        .iter()
        .map(|(ln, s)| {
            let g: usize = parse_int(&ind_path, *ln, s)?;
            if g == 0 || g > labels.len() {
                return Err(malformed(&ind_path, *ln, format!("graph id {g} outside 1..={}", labels.len())));
            }
            Ok(g - 1)
        })
        .collect::<Result<_>>()?;

    let mut graphs: Vec<Graph> = labels
        .iter()
        .map(|&label| Graph {
            nodes: 0,
            edges: Vec::new(),
            label,
        })
        .collect();
    let mut local = vec![0usize; indicator.len()];
    for (node, &g) in indicator.iter().enumerate() {
        graphs[g].nodes += 1;
        local[node] = graphs[g].nodes;
    }

    for (ln, s) in read_lines(&a_path)? {
        let mut parts = s.split(',');
        let (Some(a), Some(b), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(malformed(&a_path, ln, format!("expected \"i, j\", found {s:?}")));
        };
        let (src, dst): (usize, usize) = (parse_int(&a_path, ln, a)?, parse_int(&a_path, ln, b)?);
        for v in [src, dst] {
            if v == 0 || v > indicator.len() {
                return Err(malformed(&a_path, ln, format!("node {v} outside 1..={}", indicator.len())));
            }
        }
        let (gs, gd) = (indicator[src - 1], indicator[dst - 1]);
        if gs != gd {
            return Err(KronError::CrossGraphEdge {
                src,
                dst,
                src_graph: gs + 1,
                dst_graph: gd + 1,
            });
        }
        graphs[gs].edges.push((local[src - 1], local[dst - 1]));
    }
    Ok(GraphCorpus { name, graphs })
}

/// Writes `corpus` into `dir` using its name as the file prefix.
pub fn write_tu_dataset(corpus: &GraphCorpus, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let open = |suffix: &str| fs::File::create(dir.join(format!("{}_{suffix}.txt", corpus.name))).map(std::io::BufWriter::new);
    let (mut a, mut ind, mut lab) = (open("A")?, open("graph_indicator")?, open("graph_labels")?);
    let mut offset = 0;
    for (g, graph) in corpus.graphs.iter().enumerate() {
        writeln!(lab, "{}", graph.label)?;
        for _ in 0..graph.nodes {
            writeln!(ind, "{}", g + 1)?;
        }
        for &(s, d) in &graph.edges {
            writeln!(a, "{}, {}", s + offset, d + offset)?;
        }
        offset += graph.nodes;
    }
    a.flush()?;
    ind.flush()?;
    lab.flush()?;
    Ok(())
}

/// Zero-pads a graph to `m^K` vertices, `K = ceil(log_m(max(n, m)))`.
pub fn graph_to_adjacency(graph: &Graph, m: usize) -> Result<Adjacency> {
    if m < 2 {
        return Err(KronError::ParameterOutOfRange(format!("initiator side {m} must be at least 2")));
    }
    let target = graph.nodes.max(m);
    let mut k = 0;
    let mut size = 1usize;
    while size < target {
        size = size.saturating_mul(m);
        k += 1;
    }
    let n = checked_size(m, k)?;
    let mut a = Adjacency::zeros(n, true);
    for &(s, d) in &graph.edges {
        if s == 0 || d == 0 || s > graph.nodes || d > graph.nodes {
            return Err(KronError::IndexOutOfRange(format!("edge ({s}, {d}) in a graph with {} nodes", graph.nodes)));
        }
        a.set(s - 1, d - 1, true);
    }
    Ok(a)
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureRow {
    pub p_hat: f64,
    pub x: Vec<f64>,
    pub label: i64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureTable {
    pub m: usize,
    pub standardized: bool,
    pub rows: Vec<FeatureRow>,
}

impl FeatureTable {
    pub fn header(&self) -> String {
        let mut cols = vec!["p_hat".to_owned()];
        cols.extend((1..=self.m * self.m).map(|i| format!("x_{i}")));
        cols.push("label".into());
        cols.join(",")
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{}", self.header())?;
        for row in &self.rows {
            let mut fields = vec![format!("{}", row.p_hat)];
            fields.extend(row.x.iter().map(|v| format!("{v}")));
            fields.push(row.label.to_string());
            writeln!(w, "{}", fields.join(","))?;
        }
        Ok(())
    }
}

/// Graphs whose inference failed; their rows are all zeros.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ExtractionReport {
    pub failures: Vec<(usize, String)>,
}

impl ExtractionReport {
    pub fn warning_count(&self) -> usize {
        self.failures.len()
    }
}

/// Runs inference on every padded graph. Graph `g` uses seed
/// `derive_seed(config.seed, g)`, so rows do not depend on scheduling.
pub fn extract_features(corpus: &GraphCorpus, m: usize, config: &SolverConfig) -> Result<(FeatureTable, ExtractionReport)> {
    if m < 2 {
        return Err(KronError::ParameterOutOfRange(format!("initiator side {m} must be at least 2")));
    }
    let one = |g: usize, graph: &Graph| -> std::result::Result<FeatureRow, String> {
        let a = graph_to_adjacency(graph, m).map_err(|e| e.to_string())?;
        let cfg = SolverConfig {
            seed: derive_seed(config.seed, g as u64),
            block_count: config.block_count.map(|b| b.min(a.n())),
            ..config.clone()
        };
        let res = infer::<f64>(&a, m, &cfg).map_err(|e| e.to_string())?;
        Ok(FeatureRow {
            p_hat: res.p_hat,
            x: res.x_hat.into_vec(),
            label: graph.label,
        })
    };
    let graphs = &corpus.graphs;
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(graphs.len().max(1));
    let mut results: Vec<Option<std::result::Result<FeatureRow, String>>> = vec![None; graphs.len()];
    std::thread::scope(|scope| {
        for (w, chunk) in results.chunks_mut(graphs.len().div_ceil(workers).max(1)).enumerate() {
            let base = w * graphs.len().div_ceil(workers).max(1);
            scope.spawn(move || {
                for (off, slot) in chunk.iter_mut().enumerate() {
                    *slot = Some(one(base + off, &graphs[base + off]));
                }
            });
        }
    });
    let mut report = ExtractionReport::default();
    let rows = results
        .into_iter()
        .enumerate()
        .map(|(g, r)| match r.expect("every graph processed") {
            Ok(row) => row,
            Err(msg) => {
                report.failures.push((g, msg));
                FeatureRow {
                    p_hat: 0.0,
                    x: vec![0.0; m * m],
                    label: graphs[g].label,
                }
            }
        })
        .collect();
    Ok((
        FeatureTable {
            m,
            standardized: false,
            rows,
        },
        report,
    ))
}

/// Per-column z-scores with the population standard deviation; constant
/// columns become zero.
pub fn standardize_features(table: &FeatureTable) -> Result<FeatureTable> {
    let n = table.rows.len();
    if n < 2 {
        return Err(KronError::InvalidConfig(format!("standardizing needs at least 2 rows, found {n}")));
    }
    let width = 1 + table.m * table.m;
    let get = |r: &FeatureRow, c: usize| if c == 0 { r.p_hat } else { r.x[c - 1] };
    let mut out = table.clone();
    for c in 0..width {
        let mean = table.rows.iter().map(|r| get(r, c)).sum::<f64>() / n as f64;
        let var = table.rows.iter().map(|r| (get(r, c) - mean).powi(2)).sum::<f64>() / n as f64;
        let sd = var.sqrt();
        for (dst, src) in out.rows.iter_mut().zip(&table.rows) {
            let z = if sd > 1e-12 * mean.abs().max(1.0) { (get(src, c) - mean) / sd } else { 0.0 };
            if c == 0 {
                dst.p_hat = z;
            } else {
                dst.x[c - 1] = z;
            }
        }
    }
    out.standardized = true;
    Ok(out)
}
