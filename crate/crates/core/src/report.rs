//! Agreement scores, posterior tables and CSV output.

use std::collections::HashMap;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::families::{block_posterior, BlockPosterior, Family, FamilySpec};
use crate::netdata::{DyadData, Kind, Modality};
use crate::partition::{BlockLedger, Mode, Partition};
use crate::sampler::{PsmAccumulator, TraceRow};
use crate::specfun::inv_reg_lower_inc_gamma;
use crate::stats::BlockStats;

#[inline]
fn pairs(n: u64) -> u64 {
    n * n.saturating_sub(1) / 2
}

/// Adjusted Rand index between two labelings of the same nodes. Two
/// labelings with no pair structure to compare (e.g. n < 2, or both a single
/// cluster) score 1.
pub fn ari(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::usage(format!(
            "labelings have lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    let mut cells: HashMap<(usize, usize), u64> = HashMap::new();
    let mut rows: HashMap<usize, u64> = HashMap::new();
    let mut cols: HashMap<usize, u64> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *cells.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let index: u64 = cells.values().map(|&c| pairs(c)).sum();
    let sa: u64 = rows.values().map(|&c| pairs(c)).sum();
    let sb: u64 = cols.values().map(|&c| pairs(c)).sum();
    let total = pairs(a.len() as u64);
    if total == 0 {
        return Ok(1.0);
    }
    let expected = sa as f64 * sb as f64 / total as f64;
    let max = 0.5 * (sa + sb) as f64;
    let denom = max - expected;
    if denom == 0.0 {
        return Ok(1.0);
    }
    Ok((index as f64 - expected) / denom)
}

/// Contingency table between truth (rows) and fitted labels (columns).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Confusion {
    pub truth_labels: Vec<usize>,
    pub fitted_labels: Vec<usize>,
    pub counts: Vec<Vec<u64>>,
}

pub fn confusion(truth: &[usize], fitted: &[usize]) -> Result<Confusion> {
    if truth.len() != fitted.len() {
        return Err(Error::usage(format!(
            "labelings have lengths {} and {}",
            truth.len(),
            fitted.len()
        )));
    }
    let mut tl: Vec<usize> = truth.to_vec();
    tl.sort_unstable();
    tl.dedup();
    let mut fl: Vec<usize> = fitted.to_vec();
    fl.sort_unstable();
    fl.dedup();
    let mut counts = vec![vec![0u64; fl.len()]; tl.len()];
    for (&t, &f) in truth.iter().zip(fitted) {
        let r = tl.binary_search(&t).unwrap();
        let c = fl.binary_search(&f).unwrap();
        counts[r][c] += 1;
    }
    Ok(Confusion {
        truth_labels: tl,
        fitted_labels: fl,
        counts,
    })
}

/// Posterior of one block in one layer. Labels are 0-based.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BlockEntry {
    pub layer: usize,
    pub r: usize,
    pub s: usize,
    pub dyads: u64,
    /// Raw sufficient statistics as `name=value` pairs joined by `;`.
    pub stats: String,
    pub posterior: BlockPosterior,
}

/// Long-format block table: one row per block, layer and quantity.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BlockRow {
    pub layer: usize,
    pub r: usize,
    pub s: usize,
    pub block: &'static str,
    pub family: &'static str,
    pub dyads: u64,
    pub stats: String,
    pub param: String,
    pub mean: f64,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct BlockSummaryTable {
    pub entries: Vec<BlockEntry>,
}

impl BlockSummaryTable {
    pub fn get(&self, layer: usize, r: usize, s: usize) -> Option<&BlockEntry> {
        self.entries
            .iter()
            .find(|e| e.layer == layer && e.r == r && e.s == s)
    }

    /// Rows with 1-based community labels and layers.
    pub fn rows(&self) -> Vec<BlockRow> {
        let mut out = Vec::new();
        for e in &self.entries {
            let row = |param: String, mean: f64, lo: Option<f64>, hi: Option<f64>| BlockRow {
                layer: e.layer + 1,
                r: e.r + 1,
                s: e.s + 1,
                block: if e.r == e.s { "within" } else { "between" },
                family: e.posterior.family,
                dyads: e.dyads,
                stats: e.stats.clone(),
                param,
                mean,
                lo,
                hi,
            };
            for p in &e.posterior.summaries {
                out.push(row(p.name.clone(), p.mean, Some(p.lo), Some(p.hi)));
            }
            if let Some(mu) = e.posterior.mu {
                out.push(row("mu".into(), mu, None, None));
            }
            if let Some(q) = e.posterior.q {
                out.push(row("q".into(), q, None, None));
            }
            if let Some(w) = &e.posterior.type_weights {
                for (t, &v) in w.iter().enumerate() {
                    out.push(row(format!("type_weight_{}", t + 1), v, None, None));
                }
            }
        }
        out
    }
}

fn raw_stats(st: &BlockStats, modality: Modality, zip: bool) -> String {
    match modality {
        Modality::Binary => format!("edges={}", st.edges),
        Modality::Count if zip => format!("m_active={};S_active={}", st.edges, st.total),
        Modality::Count => format!("sum={}", st.total),
        Modality::Real => format!("sum={};sum_sq={}", st.sum.value(), st.sum_sq.value()),
        Modality::Signed => {
            let c = st.categories(3);
            format!("n_0={};n_+={};n_-={}", c[0], c[1], c[2])
        }
        Modality::Dyad4 => {
            let c = st.categories(4);
            format!("n_00={};n_10={};n_01={};n_11={}", c[0], c[1], c[2], c[3])
        }
    }
}

/// Block posteriors read off an existing ledger (which carries the activity
/// indicators under zero inflation). Blocks touching an empty community are
/// skipped.
pub fn block_summary_from_ledger(
    ledger: &BlockLedger,
    part: &Partition,
    spec: &FamilySpec,
    modality: Modality,
    level: f64,
) -> Result<BlockSummaryTable> {
    let nl = part.num_labels();
    let mut entries = Vec::new();
    for l in 0..ledger.n_layers() {
        for (r, s) in ledger.block_keys(nl) {
            if part.sizes()[r] == 0 || part.sizes()[s] == 0 {
                continue;
            }
            let fam: &Family = if r == s { &spec.diag } else { &spec.offdiag };
            let st = ledger.stats(r, s, l);
            entries.push(BlockEntry {
                layer: l,
                r,
                s,
                dyads: st.dyads,
                stats: raw_stats(st, modality, fam.is_zip()),
                posterior: block_posterior(fam, st, modality, level)?,
            });
        }
    }
    Ok(BlockSummaryTable { entries })
}

/// Block posteriors at labels `z`. Zero-inflated specs use inactive
/// indicators for every zero dyad, since `z` alone does not fix them.
pub fn block_summary(
    data: &DyadData,
    z: &[usize],
    spec: &FamilySpec,
    level: f64,
) -> Result<BlockSummaryTable> {
    let k = z.iter().max().map_or(1, |m| m + 1);
    let part = Partition::new(z.to_vec(), Mode::Fixed(k))?;
    let ledger = BlockLedger::new(data, &part, spec)?;
    block_summary_from_ledger(&ledger, &part, spec, data.modality(), level)
}

/// Block rate ω_rs of a degree-corrected Poisson model under a Gamma(a, b)
/// prior, with node propensities held fixed.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OmegaRow {
    pub layer: usize,
    pub r: usize,
    pub s: usize,
    pub observed: f64,
    pub exposure: f64,
    pub mean: f64,
    pub lo: f64,
    pub hi: f64,
}

pub fn degree_corrected_summary(
    data: &DyadData,
    z: &[usize],
    theta: &[f64],
    a: f64,
    b: f64,
    level: f64,
) -> Result<Vec<OmegaRow>> {
    if !matches!(data.modality(), Modality::Binary | Modality::Count) {
        return Err(Error::domain(
            "degree-corrected rates need binary or count data",
        ));
    }
    if z.len() != data.n() || theta.len() != data.n() {
        return Err(Error::usage(
            "labels and propensities must cover every node",
        ));
    }
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::domain(format!(
            "gamma prior needs a, b > 0, got {a}, {b}"
        )));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::domain(format!(
            "credible level must lie in (0, 1), got {level}"
        )));
    }
    let k = z.iter().max().map_or(0, |m| m + 1);
    let mut big = vec![0.0; k];
    let mut sq = vec![0.0; k];
    let mut used = vec![false; k];
    for (i, &r) in z.iter().enumerate() {
        big[r] += theta[i];
        sq[r] += theta[i] * theta[i];
        used[r] = true;
    }
    let directed = data.kind() == Kind::Directed;
    let tail = 0.5 * (1.0 - level);
    let mut out = Vec::new();
    for l in 0..data.n_layers() {
        let mut obs = vec![0.0; k * k];
        for (&(i, j), &v) in data.layer(l).entries() {
            let (r, s) = (z[i], z[j]);
            let (r, s) = if directed || r <= s { (r, s) } else { (s, r) };
            obs[r * k + s] += v;
        }
        for r in 0..k {
            for s in 0..k {
                if !used[r] || !used[s] || (!directed && r > s) {
                    continue;
                }
                let exposure = if r != s {
                    big[r] * big[s]
                } else if directed {
                    big[r] * big[r] - sq[r]
                } else {
                    0.5 * (big[r] * big[r] - sq[r])
                };
                let (pa, pb) = (a + obs[r * k + s], b + exposure);
                out.push(OmegaRow {
                    layer: l,
                    r,
                    s,
                    observed: obs[r * k + s],
                    exposure,
                    mean: pa / pb,
                    lo: inv_reg_lower_inc_gamma(tail, pa)? / pb,
                    hi: inv_reg_lower_inc_gamma(1.0 - tail, pa)? / pb,
                });
            }
        }
    }
    Ok(out)
}

/// Posterior similarity matrix with a display ordering.
#[derive(Clone, Debug, PartialEq)]
pub struct Psm {
    pub n: usize,
    /// Row-major n × n co-clustering fractions.
    pub values: Vec<f64>,
    /// Nodes sorted by (MAP label, index).
    pub order: Vec<usize>,
}

impl Psm {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }
}

pub fn finalize_psm(acc: &PsmAccumulator, z_map: &[usize]) -> Result<Psm> {
    let n = acc.n();
    if z_map.len() != n {
        return Err(Error::usage("MAP labels do not match the PSM size"));
    }
    if acc.samples() == 0 {
        return Err(Error::usage("no retained samples"));
    }
    let m = acc.samples() as f64;
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            values[i * n + j] = acc.count(i, j) as f64 / m;
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| (z_map[i], i));
    Ok(Psm { n, values, order })
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(f))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::io(path, std::io::Error::other(e))
}

fn flush(path: &Path, mut w: csv::Writer<std::fs::File>) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

/// `node,cluster` with 1-based clusters; node names when available.
pub fn write_labels(
    path: impl AsRef<Path>,
    z: &[usize],
    node_ids: Option<&[String]>,
) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv_writer(path)?;
    w.write_record(["node", "cluster"])
        .map_err(|e| csv_err(path, e))?;
    for (i, &k) in z.iter().enumerate() {
        let name = node_ids.map_or_else(|| i.to_string(), |ids| ids[i].clone());
        w.write_record([name, (k + 1).to_string()])
            .map_err(|e| csv_err(path, e))?;
    }
    flush(path, w)
}

pub fn write_trace(path: impl AsRef<Path>, traces: &[Vec<TraceRow>]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv_writer(path)?;
    w.write_record(["chain", "sweep", "log_posterior", "k_active", "ari"])
        .map_err(|e| csv_err(path, e))?;
    for (c, tr) in traces.iter().enumerate() {
        for row in tr {
            w.write_record([
                c.to_string(),
                row.sweep.to_string(),
                row.log_posterior.to_string(),
                row.k_active.to_string(),
                row.ari.map_or_else(String::new, |a| a.to_string()),
            ])
            .map_err(|e| csv_err(path, e))?;
        }
    }
    flush(path, w)
}

/// Full matrix in display order; the header row names the nodes.
pub fn write_psm(path: impl AsRef<Path>, psm: &Psm) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv_writer(path)?;
    let mut header = vec!["node".to_string()];
    header.extend(psm.order.iter().map(|i| i.to_string()));
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for &i in &psm.order {
        let mut rec = vec![i.to_string()];
        rec.extend(psm.order.iter().map(|&j| psm.get(i, j).to_string()));
        w.write_record(&rec).map_err(|e| csv_err(path, e))?;
    }
    flush(path, w)
}

fn write_serialized<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv_writer(path)?;
    for r in rows {
        w.serialize(r).map_err(|e| csv_err(path, e))?;
    }
    flush(path, w)
}

pub fn write_block_summary(path: impl AsRef<Path>, table: &BlockSummaryTable) -> Result<()> {
    write_serialized(path.as_ref(), &table.rows())
}

/// Layers and labels are written 1-based.
pub fn write_omega(path: impl AsRef<Path>, rows: &[OmegaRow]) -> Result<()> {
    let shifted: Vec<OmegaRow> = rows
        .iter()
        .map(|r| OmegaRow {
            layer: r.layer + 1,
            r: r.r + 1,
            s: r.s + 1,
            ..r.clone()
        })
        .collect();
    write_serialized(path.as_ref(), &shifted)
}

pub fn write_select_k(path: impl AsRef<Path>, rows: &[(usize, f64)]) -> Result<()> {
    #[derive(Serialize)]
    struct Row {
        k: usize,
        log_posterior: f64,
    }
    let rows: Vec<Row> = rows
        .iter()
        .map(|&(k, log_posterior)| Row { k, log_posterior })
        .collect();
    write_serialized(path.as_ref(), &rows)
}

pub fn write_confusion(path: impl AsRef<Path>, c: &Confusion) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv_writer(path)?;
    let mut header = vec!["truth".to_string()];
    header.extend(c.fitted_labels.iter().map(|f| format!("fitted_{}", f + 1)));
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for (t, row) in c.truth_labels.iter().zip(&c.counts) {
        let mut rec = vec![(t + 1).to_string()];
        rec.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(|e| csv_err(path, e))?;
    }
    flush(path, w)
}
