//! Observed dyad data: parsing, validation and adjacency.
//!
//! Undirected data (and dyad-state data) is keyed by `(i, j)` with `i < j`.
//! Directed data is keyed by the ordered pair. Absent keys mean value zero;
//! in the real modality an absent key is a zero-valued observation, so every
//! dyad is scored by the Gaussian blocks either way.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Undirected,
    Directed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    Binary,
    Count,
    Real,
    /// Values in {-1, 0, +1}.
    Signed,
    /// Joint state of an unordered pair: 0 = none, 1 = i→j only, 2 = j→i only,
    /// 3 = mutual, oriented from the smaller node index.
    Dyad4,
}

impl Modality {
    /// Number of categories seen by a Dirichlet-multinomial block.
    pub fn categories(self) -> Option<usize> {
        match self {
            Modality::Binary => Some(2),
            Modality::Signed => Some(3),
            Modality::Dyad4 => Some(4),
            Modality::Count | Modality::Real => None,
        }
    }

    fn check_value(self, v: f64) -> std::result::Result<(), String> {
        let ok = match self {
            Modality::Binary => v == 0.0 || v == 1.0,
            Modality::Count => v.is_finite() && v >= 0.0 && v.fract() == 0.0 && v < 9.0e15,
            Modality::Real => v.is_finite(),
            Modality::Signed => v == -1.0 || v == 0.0 || v == 1.0,
            Modality::Dyad4 => v == 0.0 || v == 1.0 || v == 2.0 || v == 3.0,
        };
        if ok {
            Ok(())
        } else {
            Err(format!("value {v} outside the {self:?} domain"))
        }
    }
}

/// Swap the asymmetric dyad states, i.e. view the pair from the other end.
#[inline]
pub fn flip_state(v: f64) -> f64 {
    if v == 1.0 {
        2.0
    } else if v == 2.0 {
        1.0
    } else {
        v
    }
}

/// One layer of dyad values plus per-node adjacency.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    entries: BTreeMap<(usize, usize), f64>,
    // undirected/dyad4: every neighbour (dyad4 values seen from the row node);
    // directed: out-neighbours
    nbrs: Vec<Vec<(u32, f64)>>,
    in_nbrs: Vec<Vec<(u32, f64)>>,
}

impl Layer {
    pub fn entries(&self) -> &BTreeMap<(usize, usize), f64> {
        &self.entries
    }

    /// Stored value for the canonical key, or 0.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries.get(&(i, j)).copied().unwrap_or(0.0)
    }

    /// Nonzero neighbours of `i`. Out-neighbours for directed data.
    pub fn neighbors(&self, i: usize) -> &[(u32, f64)] {
        &self.nbrs[i]
    }

    /// Nonzero in-neighbours of `i` (directed data only; empty otherwise).
    pub fn in_neighbors(&self, i: usize) -> &[(u32, f64)] {
        &self.in_nbrs[i]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DyadData {
    n: usize,
    kind: Kind,
    modality: Modality,
    layers: Vec<Layer>,
    node_ids: Option<Vec<String>>,
}

impl DyadData {
    /// Builds validated data from canonical per-layer maps.
    pub fn new(
        n: usize,
        kind: Kind,
        modality: Modality,
        layers: Vec<BTreeMap<(usize, usize), f64>>,
    ) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::usage("at least one layer is required"));
        }
        if modality == Modality::Dyad4 && kind != Kind::Directed {
            return Err(Error::config("dyad-state data must be directed"));
        }
        let canonical = kind == Kind::Undirected || modality == Modality::Dyad4;
        let mut built = Vec::with_capacity(layers.len());
        for entries in layers {
            let mut entries = entries;
            for (&(i, j), &v) in &entries {
                if i == j {
                    return Err(Error::domain(format!("self-loop at node {i}")));
                }
                if i >= n || j >= n {
                    return Err(Error::domain(format!(
                        "dyad ({i}, {j}) out of range for n = {n}"
                    )));
                }
                if canonical && i > j {
                    return Err(Error::domain(format!(
                        "dyad ({i}, {j}) is not in i < j form"
                    )));
                }
                modality.check_value(v).map_err(Error::domain)?;
            }
            if modality != Modality::Real {
                entries.retain(|_, v| *v != 0.0);
            }
            let mut nbrs = vec![Vec::new(); n];
            let mut in_nbrs = vec![Vec::new(); n];
            for (&(i, j), &v) in &entries {
                if v == 0.0 {
                    continue;
                }
                match (kind, modality) {
                    (_, Modality::Dyad4) => {
                        nbrs[i].push((j as u32, v));
                        nbrs[j].push((i as u32, flip_state(v)));
                    }
                    (Kind::Undirected, _) => {
                        nbrs[i].push((j as u32, v));
                        nbrs[j].push((i as u32, v));
                    }
                    (Kind::Directed, _) => {
                        nbrs[i].push((j as u32, v));
                        in_nbrs[j].push((i as u32, v));
                    }
                }
            }
            built.push(Layer {
                entries,
                nbrs,
                in_nbrs,
            });
        }
        Ok(DyadData {
            n,
            kind,
            modality,
            layers: built,
            node_ids: None,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> Kind {
        self.kind
    }

    pub fn modality(&self) -> Modality {
        self.modality
    }

    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn layer(&self, l: usize) -> &Layer {
        &self.layers[l]
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn node_ids(&self) -> Option<&[String]> {
        self.node_ids.as_deref()
    }

    pub fn with_node_ids(mut self, ids: Vec<String>) -> Result<Self> {
        if ids.len() != self.n {
            return Err(Error::usage(format!(
                "label map has {} names for {} nodes",
                ids.len(),
                self.n
            )));
        }
        self.node_ids = Some(ids);
        Ok(self)
    }

    /// Keeps only the given layer.
    pub fn single_layer(&self, l: usize) -> DyadData {
        DyadData {
            n: self.n,
            kind: self.kind,
            modality: self.modality,
            layers: vec![self.layers[l].clone()],
            node_ids: self.node_ids.clone(),
        }
    }

    /// Number of dyads per layer.
    pub fn dyad_count(&self) -> u64 {
        let n = self.n as u64;
        let pairs = n * n.saturating_sub(1);
        if self.kind == Kind::Directed && self.modality != Modality::Dyad4 {
            pairs
        } else {
            pairs / 2
        }
    }

    /// Σ of stored values over all layers.
    pub fn total_mass(&self) -> f64 {
        self.layers.iter().flat_map(|l| l.entries.values()).sum()
    }

    /// Σ ln(y!) over every dyad of every layer (count data; 0 otherwise).
    pub fn ln_factorial_sum(&self) -> f64 {
        if self.modality != Modality::Count {
            return 0.0;
        }
        self.layers
            .iter()
            .flat_map(|l| l.entries.values())
            .map(|&v| crate::specfun::lgamma(v + 1.0))
            .sum()
    }
}

/// Node propensities normalized to mean 1.
#[derive(Clone, Debug, PartialEq)]
pub struct DegreePropensity {
    pub theta: Vec<f64>,
}

const PROPENSITY_FLOOR: f64 = 1e-6;

/// θ_i = strength_i / mean strength, with zero-strength nodes floored.
pub fn estimate_propensities(data: &DyadData) -> Result<DegreePropensity> {
    match data.modality {
        Modality::Binary | Modality::Count | Modality::Real => {}
        m => {
            return Err(Error::usage(format!(
                "propensities need binary, count or real data, got {m:?}"
            )))
        }
    }
    if data.n_layers() != 1 {
        return Err(Error::usage(
            "propensities are defined for single-layer data",
        ));
    }
    let n = data.n;
    let mut strength = vec![0.0; n];
    for (&(i, j), &v) in data.layers[0].entries() {
        if v < 0.0 {
            return Err(Error::domain(format!(
                "negative weight {v} on dyad ({i}, {j})"
            )));
        }
        strength[i] += v;
        strength[j] += v;
    }
    let mean = strength.iter().sum::<f64>() / n.max(1) as f64;
    if mean == 0.0 {
        return Ok(DegreePropensity {
            theta: vec![1.0; n],
        });
    }
    let mut theta: Vec<f64> = strength
        .iter()
        .map(|s| (s / mean).max(PROPENSITY_FLOOR))
        .collect();
    let renorm = theta.iter().sum::<f64>() / n as f64;
    for t in &mut theta {
        *t /= renorm;
    }
    Ok(DegreePropensity { theta })
}

struct RawEdge {
    line: usize,
    i: usize,
    j: usize,
    v: f64,
}

fn parse_edges(path: &Path) -> Result<Vec<RawEdge>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let perr = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let fields: Vec<&str> = body.split_whitespace().collect();
        if fields.len() < 2 || fields.len() > 3 {
            return Err(perr(
                line,
                format!("expected `src dst [value]`, got {} fields", fields.len()),
            ));
        }
        let i: usize = fields[0]
            .parse()
            .map_err(|_| perr(line, format!("bad node index `{}`", fields[0])))?;
        let j: usize = fields[1]
            .parse()
            .map_err(|_| perr(line, format!("bad node index `{}`", fields[1])))?;
        let v: f64 = match fields.get(2) {
            Some(s) => s
                .parse()
                .map_err(|_| perr(line, format!("bad value `{s}`")))?,
            None => 1.0,
        };
        if i == j {
            return Err(perr(line, format!("self-loop at node {i}")));
        }
        out.push(RawEdge { line, i, j, v });
    }
    Ok(out)
}

fn merge_edges(
    path: &Path,
    edges: &[RawEdge],
    kind: Kind,
    modality: Modality,
) -> Result<BTreeMap<(usize, usize), f64>> {
    let perr = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut map = BTreeMap::new();
    if modality == Modality::Dyad4 {
        // input is a directed binary edge list; pair A_ij with A_ji
        for e in edges {
            Modality::Binary
                .check_value(e.v)
                .map_err(|m| perr(e.line, m))?;
            if e.v == 0.0 {
                continue;
            }
            let (key, bit) = if e.i < e.j {
                ((e.i, e.j), 1.0)
            } else {
                ((e.j, e.i), 2.0)
            };
            let slot: &mut f64 = map.entry(key).or_insert(0.0);
            if *slot != 3.0 && *slot != bit {
                *slot += bit;
            }
        }
        return Ok(map);
    }
    for e in edges {
        modality.check_value(e.v).map_err(|m| perr(e.line, m))?;
        let key = if kind == Kind::Undirected && e.i > e.j {
            (e.j, e.i)
        } else {
            (e.i, e.j)
        };
        match map.get_mut(&key) {
            None => {
                map.insert(key, e.v);
            }
            Some(old) => match modality {
                Modality::Binary => *old = old.max(e.v),
                Modality::Count | Modality::Real => *old += e.v,
                Modality::Signed => {
                    if *old != e.v {
                        return Err(perr(
                            e.line,
                            format!("conflicting signs for dyad ({}, {})", key.0, key.1),
                        ));
                    }
                }
                Modality::Dyad4 => unreachable!(),
            },
        }
    }
    Ok(map)
}

fn inferred_n(edges: &[RawEdge]) -> usize {
    edges.iter().map(|e| e.i.max(e.j) + 1).max().unwrap_or(0)
}

/// Reads one edge list. `n_hint` fixes the node count (must cover every index).
///
/// Lines are `src dst [value]`; `#` starts a comment; the value defaults to 1.
/// Duplicates are summed for count/real data and OR-ed for binary data. For
/// the dyad-state modality the file is a directed binary edge list.
pub fn load_edge_list(
    path: impl AsRef<Path>,
    kind: Kind,
    modality: Modality,
    n_hint: Option<usize>,
) -> Result<DyadData> {
    let path = path.as_ref();
    let edges = parse_edges(path)?;
    let mut n = inferred_n(&edges);
    if let Some(h) = n_hint {
        if h < n {
            return Err(Error::usage(format!(
                "{}: node index {} exceeds the given node count {h}",
                path.display(),
                n - 1
            )));
        }
        n = h;
    }
    let map = merge_edges(path, &edges, kind, modality)?;
    DyadData::new(n, kind, modality, vec![map])
}

/// Reads one edge list per layer over a shared node set.
pub fn load_multiplex<P: AsRef<Path>>(
    paths: &[P],
    kind: Kind,
    modality: Modality,
    n_hint: Option<usize>,
) -> Result<DyadData> {
    if paths.is_empty() {
        return Err(Error::usage("multiplex data needs at least one layer file"));
    }
    let mut n = 0;
    let mut maps = Vec::with_capacity(paths.len());
    for p in paths {
        let p = p.as_ref();
        let edges = parse_edges(p)?;
        n = n.max(inferred_n(&edges));
        maps.push(merge_edges(p, &edges, kind, modality)?);
    }
    if let Some(h) = n_hint {
        if h < n {
            return Err(Error::usage(format!(
                "node index {} exceeds the given node count {h}",
                n - 1
            )));
        }
        n = h;
    }
    DyadData::new(n, kind, modality, maps)
}

/// Reads an `index<TAB>name` label map.
pub fn load_label_map(path: impl AsRef<Path>, n: usize) -> Result<Vec<String>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut names: Vec<Option<String>> = vec![None; n];
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        if raw.trim().is_empty() || raw.trim_start().starts_with('#') {
            continue;
        }
        let perr = |msg: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            msg,
        };
        let (a, b) = raw
            .split_once('\t')
            .ok_or_else(|| perr("expected `index<TAB>name`".into()))?;
        let i: usize = a
            .trim()
            .parse()
            .map_err(|_| perr(format!("bad index `{a}`")))?;
        if i >= n {
            return Err(perr(format!("index {i} out of range for n = {n}")));
        }
        names[i] = Some(b.to_string());
    }
    Ok(names
        .into_iter()
        .enumerate()
        .map(|(i, s)| s.unwrap_or_else(|| i.to_string()))
        .collect())
}

/// Writes one layer in the edge-list format accepted by [`load_edge_list`].
pub fn write_edge_list_to<W: Write>(
    data: &DyadData,
    layer: usize,
    mut w: W,
) -> std::io::Result<()> {
    for (&(i, j), &v) in data.layers[layer].entries() {
        if data.modality == Modality::Dyad4 {
            if v == 1.0 || v == 3.0 {
                writeln!(w, "{i} {j}")?;
            }
            if v == 2.0 || v == 3.0 {
                writeln!(w, "{j} {i}")?;
            }
        } else {
            writeln!(w, "{i} {j} {v}")?;
        }
    }
    w.flush()
}

pub fn write_edge_list(data: &DyadData, layer: usize, path: impl AsRef<Path>) -> Result<()> {
    let path: PathBuf = path.as_ref().to_path_buf();
    let f = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    write_edge_list_to(data, layer, BufWriter::new(f)).map_err(|e| Error::io(&path, e))
}
