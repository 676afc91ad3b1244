//! Label vectors and the incremental block ledger.
//!
//! Moving node `i` touches only the blocks between its community and every
//! other community. At detach time the ledger buckets `i`'s incident dyads by
//! neighbour community ("links"); scoring and attaching to any candidate
//! label then reuse those buckets, so a single-site update costs
//! O(deg(i) + K) block evaluations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::families::{CompiledFamily, FamilySpec};
use crate::netdata::{flip_state, DyadData, Kind, Modality};
use crate::stats::BlockStats;

/// Marker for a node that is currently detached.
pub const UNASSIGNED: usize = usize::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Exactly K labels; empty clusters stay addressable.
    Fixed(usize),
    /// Labels are kept contiguous over the nonempty clusters.
    Open,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Partition {
    z: Vec<usize>,
    sizes: Vec<usize>,
    mode: Mode,
    detached: Option<usize>,
}

impl Partition {
    /// Labels are 0-based. In open mode every label below the maximum must
    /// be used.
    pub fn new(z: Vec<usize>, mode: Mode) -> Result<Self> {
        let nl = match mode {
            Mode::Fixed(0) => return Err(Error::usage("fixed mode needs K >= 1")),
            Mode::Fixed(k) => k,
            Mode::Open => z.iter().max().map_or(0, |m| m + 1),
        };
        let mut sizes = vec![0; nl];
        for (i, &k) in z.iter().enumerate() {
            if k >= nl {
                return Err(Error::usage(format!(
                    "node {i} has label {k} outside 0..{nl}"
                )));
            }
            sizes[k] += 1;
        }
        if mode == Mode::Open && sizes.contains(&0) {
            return Err(Error::usage("open-mode labels must be contiguous"));
        }
        Ok(Partition {
            z,
            sizes,
            mode,
            detached: None,
        })
    }

    /// Relabels by order of first appearance, giving contiguous labels.
    pub fn compact(z: &[usize]) -> Vec<usize> {
        let mut map = std::collections::HashMap::new();
        z.iter()
            .map(|&k| {
                let next = map.len();
                *map.entry(k).or_insert(next)
            })
            .collect()
    }

    pub fn n(&self) -> usize {
        self.z.len()
    }

    pub fn z(&self) -> &[usize] {
        &self.z
    }

    pub fn label(&self, i: usize) -> usize {
        self.z[i]
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// Addressable labels: K in fixed mode, the nonempty clusters in open mode.
    pub fn num_labels(&self) -> usize {
        self.sizes.len()
    }

    /// Number of nonempty clusters.
    pub fn k_active(&self) -> usize {
        self.sizes.iter().filter(|&&s| s > 0).count()
    }

    pub fn detached(&self) -> Option<usize> {
        self.detached
    }

    /// Takes `i` out of its cluster. In open mode an emptied cluster is
    /// filled by renaming the highest label; the rename is returned as
    /// `(from, to)`.
    pub(crate) fn remove(&mut self, i: usize) -> (usize, Option<(usize, usize)>) {
        debug_assert!(self.detached.is_none());
        let r = self.z[i];
        self.z[i] = UNASSIGNED;
        self.sizes[r] -= 1;
        self.detached = Some(i);
        if self.mode == Mode::Open && self.sizes[r] == 0 {
            let last = self.sizes.len() - 1;
            self.sizes.swap(r, last);
            self.sizes.pop();
            if r != last {
                for k in self.z.iter_mut() {
                    if *k == last {
                        *k = r;
                    }
                }
                return (r, Some((last, r)));
            }
        }
        (r, None)
    }

    pub(crate) fn insert(&mut self, i: usize, k: usize) {
        debug_assert_eq!(self.detached, Some(i));
        if k == self.sizes.len() {
            self.sizes.push(0);
        }
        self.z[i] = k;
        self.sizes[k] += 1;
        self.detached = None;
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Layout {
    Undirected,
    Directed,
    /// Unordered blocks whose dyad states are oriented from the smaller
    /// community label (or the smaller node index on the diagonal).
    Dyad4,
}

/// Activity indicators of zero-valued dyads under zero inflation, stored as
/// symmetric bit rows.
#[derive(Clone, Debug, PartialEq)]
pub struct Activity {
    words: usize,
    active: Vec<u64>,
    nonzero: Vec<u64>,
}

impl Activity {
    fn new(data: &DyadData) -> Self {
        let n = data.n();
        let words = n.div_ceil(64).max(1);
        let mut nonzero = vec![0u64; n * words];
        for (&(i, j), &v) in data.layer(0).entries() {
            if v != 0.0 {
                nonzero[i * words + j / 64] |= 1 << (j % 64);
                nonzero[j * words + i / 64] |= 1 << (i % 64);
            }
        }
        Activity {
            words,
            active: vec![0u64; n * words],
            nonzero,
        }
    }

    pub fn is_nonzero(&self, i: usize, j: usize) -> bool {
        self.nonzero[i * self.words + j / 64] >> (j % 64) & 1 == 1
    }

    /// Z_ij. Always true for nonzero dyads.
    pub fn is_active(&self, i: usize, j: usize) -> bool {
        self.is_nonzero(i, j) || self.active[i * self.words + j / 64] >> (j % 64) & 1 == 1
    }

    fn set(&mut self, i: usize, j: usize, on: bool) {
        for (a, b) in [(i, j), (j, i)] {
            let w = &mut self.active[a * self.words + b / 64];
            if on {
                *w |= 1 << (b % 64);
            } else {
                *w &= !(1 << (b % 64));
            }
        }
    }

    /// Zero-valued dyads of `i` that are currently active.
    fn active_zero_partners(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        let row = &self.active[i * self.words..(i + 1) * self.words];
        row.iter().enumerate().flat_map(|(w, &bits)| {
            let mut b = bits;
            std::iter::from_fn(move || {
                if b == 0 {
                    return None;
                }
                let t = b.trailing_zeros() as usize;
                b &= b - 1;
                Some(w * 64 + t)
            })
        })
    }

    pub fn active_zero_count(&self) -> usize {
        self.active
            .iter()
            .map(|w| w.count_ones() as usize)
            .sum::<usize>()
            / 2
    }
}

#[inline]
fn add_value(st: &mut BlockStats, v: f64, modality: Modality) {
    match modality {
        Modality::Binary => st.edges += 1,
        Modality::Count => {
            st.edges += 1;
            st.total += v as u64;
        }
        Modality::Real => {
            st.sum.add(v);
            st.sum_sq.add(v * v);
        }
        Modality::Signed => st.cats[if v > 0.0 { 1 } else { 2 }] += 1,
        Modality::Dyad4 => st.cats[v as usize] += 1,
    }
}

/// Per-block sufficient statistics for every layer, with cached marginals.
#[derive(Clone, Debug)]
pub struct BlockLedger {
    layout: Layout,
    modality: Modality,
    n_layers: usize,
    cap: usize,
    stats: Vec<BlockStats>,
    logm: Vec<f64>,
    diag: CompiledFamily,
    off: CompiledFamily,
    data_const: f64,
    loglik: f64,
    links: Vec<BlockStats>,
    links_node: Option<usize>,
    links_labels: usize,
    cblocks: Vec<usize>,
    cbuf: Vec<BlockStats>,
    activity: Option<Activity>,
}

/// Builds the ledger for a complete partition by scanning every stored dyad.
pub fn init_ledger(data: &DyadData, part: &Partition, spec: &FamilySpec) -> Result<BlockLedger> {
    BlockLedger::new(data, part, spec)
}

impl BlockLedger {
    pub fn new(data: &DyadData, part: &Partition, spec: &FamilySpec) -> Result<Self> {
        spec.validate(data.modality())?;
        let activity = if spec.is_zip() {
            if data.kind() != Kind::Undirected || data.n_layers() != 1 {
                return Err(Error::config(
                    "zero-inflated blocks need single-layer undirected count data",
                ));
            }
            Some(Activity::new(data))
        } else {
            None
        };
        Self::build(data, part, spec, activity)
    }

    fn build(
        data: &DyadData,
        part: &Partition,
        spec: &FamilySpec,
        activity: Option<Activity>,
    ) -> Result<Self> {
        if part.n() != data.n() {
            return Err(Error::usage(format!(
                "partition covers {} nodes but data has {}",
                part.n(),
                data.n()
            )));
        }
        if part.detached().is_some() {
            return Err(Error::usage("cannot build a ledger with a detached node"));
        }
        let layout = match (data.kind(), data.modality()) {
            (_, Modality::Dyad4) => Layout::Dyad4,
            (Kind::Undirected, _) => Layout::Undirected,
            (Kind::Directed, _) => Layout::Directed,
        };
        let data_const = if spec.drop_constants {
            0.0
        } else {
            -data.ln_factorial_sum()
        };
        let cap = match part.mode() {
            Mode::Fixed(k) => k,
            Mode::Open => (part.num_labels() + 1).max(4),
        };
        let n_layers = data.n_layers();
        let mut led = BlockLedger {
            layout,
            modality: data.modality(),
            n_layers,
            cap,
            stats: vec![BlockStats::default(); cap * cap * n_layers],
            logm: vec![0.0; cap * cap],
            diag: CompiledFamily::new(&spec.diag, data.modality())?,
            off: CompiledFamily::new(&spec.offdiag, data.modality())?,
            data_const,
            loglik: 0.0,
            links: vec![BlockStats::default(); 2 * (cap + 1) * n_layers],
            links_node: None,
            links_labels: 0,
            cblocks: Vec::new(),
            cbuf: Vec::new(),
            activity,
        };
        led.fill(data, part)?;
        Ok(led)
    }

    fn fill(&mut self, data: &DyadData, part: &Partition) -> Result<()> {
        let nl = part.num_labels();
        let z = part.z();
        let sizes = part.sizes();
        for s in self.stats.iter_mut() {
            *s = BlockStats::default();
        }
        for r in 0..nl {
            for s in 0..nl {
                let dyads = if r == s {
                    let m = sizes[r] as u64;
                    match self.layout {
                        Layout::Directed => m * m.saturating_sub(1),
                        _ => m * m.saturating_sub(1) / 2,
                    }
                } else {
                    (sizes[r] * sizes[s]) as u64
                };
                if self.layout != Layout::Directed && r > s {
                    continue;
                }
                for l in 0..self.n_layers {
                    let idx = self.sidx(self.key(r, s), l);
                    self.stats[idx].dyads = dyads;
                }
            }
        }
        for l in 0..self.n_layers {
            for (&(i, j), &v) in data.layer(l).entries() {
                if v == 0.0 {
                    continue;
                }
                let (r, s) = (z[i], z[j]);
                let v = if self.layout == Layout::Dyad4 && r > s {
                    flip_state(v)
                } else {
                    v
                };
                let idx = self.sidx(self.key(r, s), l);
                add_value(&mut self.stats[idx], v, self.modality);
            }
        }
        if let Some(act) = &self.activity {
            let n = part.n();
            for i in 0..n {
                for j in act.active_zero_partners(i) {
                    if j > i {
                        let b = self.key(z[i], z[j]);
                        let idx = self.sidx(b, 0);
                        self.stats[idx].edges += 1;
                    }
                }
            }
        }
        self.loglik = self.data_const;
        for r in 0..nl {
            for s in 0..nl {
                if self.layout != Layout::Directed && r > s {
                    continue;
                }
                let b = r * self.cap + s;
                self.logm[b] = self.eval_block(b)?;
                self.loglik += self.logm[b];
            }
        }
        Ok(())
    }

    #[inline]
    fn key(&self, r: usize, s: usize) -> usize {
        if self.layout != Layout::Directed && r > s {
            s * self.cap + r
        } else {
            r * self.cap + s
        }
    }

    #[inline]
    fn sidx(&self, block: usize, layer: usize) -> usize {
        block * self.n_layers + layer
    }

    #[inline]
    fn lidx(&self, slot: usize, label: usize, layer: usize) -> usize {
        (slot * (self.cap + 1) + label) * self.n_layers + layer
    }

    fn family(&self, block: usize) -> &CompiledFamily {
        if block / self.cap == block % self.cap {
            &self.diag
        } else {
            &self.off
        }
    }

    fn eval_block(&self, block: usize) -> Result<f64> {
        let fam = self.family(block);
        let mut v = 0.0;
        for l in 0..self.n_layers {
            v += fam.log_marginal(&self.stats[self.sidx(block, l)])?;
        }
        Ok(v)
    }

    /// Block statistics for `(r, s)` in `layer`. Undirected keys are symmetric.
    pub fn stats(&self, r: usize, s: usize, layer: usize) -> &BlockStats {
        &self.stats[self.sidx(self.key(r, s), layer)]
    }

    /// Cached log marginal of block `(r, s)`, summed over layers.
    pub fn block_log_marginal(&self, r: usize, s: usize) -> f64 {
        self.logm[self.key(r, s)]
    }

    /// ln p(Y | z) (with Z under zero inflation), including pure-data
    /// constants unless they were dropped.
    pub fn log_likelihood(&self) -> f64 {
        self.loglik
    }

    pub fn n_layers(&self) -> usize {
        self.n_layers
    }

    /// True when both endpoints of a block share a label ordering, i.e. the
    /// ledger stores one entry per unordered pair.
    pub fn is_symmetric(&self) -> bool {
        self.layout != Layout::Directed
    }

    pub fn activity(&self) -> Option<&Activity> {
        self.activity.as_ref()
    }

    /// Distinct block keys among the first `nl` labels.
    pub fn block_keys(&self, nl: usize) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for r in 0..nl {
            for s in 0..nl {
                if self.layout == Layout::Directed || r <= s {
                    out.push((r, s));
                }
            }
        }
        out
    }

    fn grow(&mut self, need: usize) {
        if need <= self.cap {
            return;
        }
        let new_cap = need.max(2 * self.cap);
        let l = self.n_layers;
        let mut stats = vec![BlockStats::default(); new_cap * new_cap * l];
        let mut logm = vec![0.0; new_cap * new_cap];
        for r in 0..self.cap {
            for s in 0..self.cap {
                let (ob, nb) = (r * self.cap + s, r * new_cap + s);
                logm[nb] = self.logm[ob];
                stats[nb * l..(nb + 1) * l].copy_from_slice(&self.stats[ob * l..(ob + 1) * l]);
            }
        }
        let mut links = vec![BlockStats::default(); 2 * (new_cap + 1) * l];
        for slot in 0..2 {
            for lab in 0..=self.cap {
                for layer in 0..l {
                    links[(slot * (new_cap + 1) + lab) * l + layer] =
                        self.links[self.lidx(slot, lab, layer)];
                }
            }
        }
        self.cap = new_cap;
        self.stats = stats;
        self.logm = logm;
        self.links = links;
    }

    fn compute_links(&mut self, data: &DyadData, part: &Partition, i: usize) {
        let z = part.z();
        let nl = part.num_labels();
        let r = z[i];
        let l_count = self.n_layers;
        for slot in 0..2 {
            for lab in 0..=nl.min(self.cap) {
                for layer in 0..l_count {
                    let idx = self.lidx(slot, lab, layer);
                    self.links[idx] = BlockStats::default();
                }
            }
        }
        for layer in 0..l_count {
            let lay = data.layer(layer);
            for &(j, v) in lay.neighbors(i) {
                let j = j as usize;
                let slot = if self.layout == Layout::Dyad4 && j < i {
                    1
                } else {
                    0
                };
                let idx = self.lidx(slot, z[j], layer);
                add_value(&mut self.links[idx], v, self.modality);
            }
            if self.layout == Layout::Directed {
                for &(j, v) in lay.in_neighbors(i) {
                    let idx = self.lidx(1, z[j as usize], layer);
                    add_value(&mut self.links[idx], v, self.modality);
                }
            }
        }
        if let Some(act) = &self.activity {
            let partners: Vec<usize> = act.active_zero_partners(i).collect();
            for j in partners {
                let idx = self.lidx(0, z[j], 0);
                self.links[idx].edges += 1;
            }
        }
        for lab in 0..nl {
            let cnt = (part.sizes()[lab] - usize::from(lab == r)) as u64;
            for layer in 0..l_count {
                let a = self.lidx(0, lab, layer);
                self.links[a].dyads = cnt;
                if self.layout == Layout::Directed {
                    let b = self.lidx(1, lab, layer);
                    self.links[b].dyads = cnt;
                }
            }
        }
    }

    /// Fills `cblocks`/`cbuf` with the statistics node `i` adds to each
    /// block when it joins label `k`, given links over `nl` labels.
    fn build_contrib(&mut self, k: usize, nl: usize) {
        self.cblocks.clear();
        self.cbuf.clear();
        let nlay = self.n_layers;
        let upto = nl.max(k + 1);
        for l in 0..upto {
            match self.layout {
                Layout::Undirected => {
                    self.cblocks.push(self.key(k, l));
                    for layer in 0..nlay {
                        self.cbuf.push(self.links[self.lidx(0, l, layer)]);
                    }
                }
                Layout::Directed => {
                    if l == k {
                        self.cblocks.push(self.key(k, k));
                        for layer in 0..nlay {
                            let mut s = self.links[self.lidx(0, k, layer)];
                            s += &self.links[self.lidx(1, k, layer)];
                            self.cbuf.push(s);
                        }
                    } else {
                        self.cblocks.push(self.key(k, l));
                        for layer in 0..nlay {
                            self.cbuf.push(self.links[self.lidx(0, l, layer)]);
                        }
                        self.cblocks.push(self.key(l, k));
                        for layer in 0..nlay {
                            self.cbuf.push(self.links[self.lidx(1, l, layer)]);
                        }
                    }
                }
                Layout::Dyad4 => {
                    self.cblocks.push(self.key(k, l));
                    for layer in 0..nlay {
                        let a = self.links[self.lidx(0, l, layer)];
                        let b = self.links[self.lidx(1, l, layer)];
                        let s = if l == k {
                            let mut s = a;
                            s += &b.swapped();
                            s
                        } else {
                            let mut s = a;
                            s += &b;
                            if l < k {
                                s.swapped()
                            } else {
                                s
                            }
                        };
                        self.cbuf.push(s);
                    }
                }
            }
        }
    }

    /// Removes node `i` from its block statistics and from the partition.
    pub fn detach(&mut self, data: &DyadData, part: &mut Partition, i: usize) -> Result<()> {
        if i >= part.n() {
            return Err(Error::usage(format!("node {i} out of range")));
        }
        if part.detached().is_some() {
            return Err(Error::usage(format!(
                "node {i} cannot be detached: a node is already detached"
            )));
        }
        let r = part.z()[i];
        let nl = part.num_labels();
        self.grow(nl);
        self.compute_links(data, part, i);
        self.build_contrib(r, nl);
        let nlay = self.n_layers;
        for (bi, &b) in self.cblocks.clone().iter().enumerate() {
            for layer in 0..nlay {
                let idx = self.sidx(b, layer);
                self.stats[idx] -= &self.cbuf[bi * nlay + layer];
            }
            let v = self.eval_block(b)?;
            self.loglik += v - self.logm[b];
            self.logm[b] = v;
        }
        let (_, moved) = part.remove(i);
        if let Some((from, to)) = moved {
            self.relabel(from, to, nl)?;
        }
        self.links_node = Some(i);
        self.links_labels = part.num_labels();
        Ok(())
    }

    /// Moves every block of label `from` onto the (empty) label `to`.
    fn relabel(&mut self, from: usize, to: usize, nl: usize) -> Result<()> {
        let nlay = self.n_layers;
        let map = |x: usize| if x == from { to } else { x };
        for r in 0..nl {
            for s in 0..nl {
                // blocks touching the emptied label are all zero already
                if (r != from && s != from) || r == to || s == to {
                    continue;
                }
                if self.layout != Layout::Directed && r > s {
                    continue;
                }
                let ob = r * self.cap + s;
                let nb = self.key(map(r), map(s));
                // dyad states are oriented from the smaller label
                let flip = self.layout == Layout::Dyad4 && (map(r) > map(s)) != (r > s);
                for layer in 0..nlay {
                    let st = self.stats[ob * nlay + layer];
                    self.stats[nb * nlay + layer] = if flip { st.swapped() } else { st };
                    self.stats[ob * nlay + layer] = BlockStats::default();
                }
                let old = self.logm[ob];
                self.logm[ob] = 0.0;
                if flip {
                    // asymmetric concentrations score the swapped block differently
                    let v = self.eval_block(nb)?;
                    self.loglik += v - old;
                    self.logm[nb] = v;
                } else {
                    self.logm[nb] = old;
                }
            }
        }
        for slot in 0..2 {
            for layer in 0..nlay {
                let (a, b) = (self.lidx(slot, from, layer), self.lidx(slot, to, layer));
                self.links[b] = self.links[a];
                self.links[a] = BlockStats::default();
            }
        }
        Ok(())
    }

    fn check_candidate(&self, part: &Partition, i: usize, k: usize) -> Result<()> {
        if part.detached() != Some(i) || self.links_node != Some(i) {
            return Err(Error::usage(format!("node {i} is not detached")));
        }
        let nl = part.num_labels();
        let ok = match part.mode() {
            Mode::Fixed(_) => k < nl,
            Mode::Open => k <= nl,
        };
        if !ok {
            return Err(Error::usage(format!(
                "label {k} out of range ({nl} labels, {:?})",
                part.mode()
            )));
        }
        Ok(())
    }

    /// Change in ln p(Y | z) when the detached node `i` joins label `k`.
    pub fn score_move(&mut self, part: &Partition, i: usize, k: usize) -> Result<f64> {
        self.check_candidate(part, i, k)?;
        self.grow(k + 1);
        self.build_contrib(k, part.num_labels());
        let nlay = self.n_layers;
        let mut delta = 0.0;
        for (bi, &b) in self.cblocks.iter().enumerate() {
            let fam = if b / self.cap == b % self.cap {
                &self.diag
            } else {
                &self.off
            };
            let mut v = 0.0;
            for layer in 0..nlay {
                let mut st = self.stats[b * nlay + layer];
                let c = &self.cbuf[bi * nlay + layer];
                if c.dyads == 0 {
                    // nothing joins this block
                    v += fam.log_marginal(&st)?;
                    continue;
                }
                st += c;
                v += fam.log_marginal(&st)?;
            }
            delta += v - self.logm[b];
        }
        Ok(delta)
    }

    /// Inserts the detached node `i` into label `k`.
    pub fn attach(&mut self, part: &mut Partition, i: usize, k: usize) -> Result<()> {
        self.check_candidate(part, i, k)?;
        self.grow(k + 1);
        self.build_contrib(k, part.num_labels());
        let nlay = self.n_layers;
        for (bi, &b) in self.cblocks.clone().iter().enumerate() {
            for layer in 0..nlay {
                let idx = self.sidx(b, layer);
                self.stats[idx] += &self.cbuf[bi * nlay + layer];
            }
            let v = self.eval_block(b)?;
            self.loglik += v - self.logm[b];
            self.logm[b] = v;
        }
        part.insert(i, k);
        self.links_node = None;
        Ok(())
    }

    /// Log odds of Z_ij = 1 against Z_ij = 0 for a zero-valued dyad under
    /// zero inflation, all else fixed.
    pub fn zip_log_odds(&self, part: &Partition, i: usize, j: usize) -> Result<f64> {
        let act = self
            .activity
            .as_ref()
            .ok_or_else(|| Error::usage("ledger has no activity indicators"))?;
        if act.is_nonzero(i, j) {
            return Ok(f64::INFINITY);
        }
        let b = self.key(part.z()[i], part.z()[j]);
        let fam = self.family(b);
        let mut st = self.stats[self.sidx(b, 0)];
        if act.is_active(i, j) {
            st.edges -= 1;
        }
        let off = fam.log_marginal(&st)?;
        st.edges += 1;
        Ok(fam.log_marginal(&st)? - off)
    }

    /// Sets Z_ij for a zero-valued dyad and updates its block.
    pub fn set_active(&mut self, part: &Partition, i: usize, j: usize, on: bool) -> Result<()> {
        let act = self
            .activity
            .as_mut()
            .ok_or_else(|| Error::usage("ledger has no activity indicators"))?;
        if act.is_nonzero(i, j) {
            if on {
                return Ok(());
            }
            return Err(Error::usage(format!(
                "dyad ({i}, {j}) is nonzero and must stay active"
            )));
        }
        if act.is_active(i, j) == on {
            return Ok(());
        }
        act.set(i, j, on);
        let b = self.key(part.z()[i], part.z()[j]);
        let idx = self.sidx(b, 0);
        if on {
            self.stats[idx].edges += 1;
        } else {
            self.stats[idx].edges -= 1;
        }
        let v = self.eval_block(b)?;
        self.loglik += v - self.logm[b];
        self.logm[b] = v;
        Ok(())
    }

    /// A from-scratch ledger for the same data, partition and indicators.
    pub fn recompute(
        &self,
        data: &DyadData,
        part: &Partition,
        spec: &FamilySpec,
    ) -> Result<BlockLedger> {
        Self::build(data, part, spec, self.activity.clone())
    }

    /// Replaces the accumulated statistics by a fresh scan and returns the
    /// absolute drift of the running log likelihood.
    pub fn resync(&mut self, data: &DyadData, part: &Partition, spec: &FamilySpec) -> Result<f64> {
        let before = self.loglik;
        let fresh = self.recompute(data, part, spec)?;
        let drift = (fresh.loglik - before).abs();
        *self = fresh;
        Ok(drift)
    }

    /// Compares statistics (integers exactly, real sums within `tol`) and
    /// cached marginals (within `tol`) over the first `nl` labels.
    pub fn approx_eq(&self, other: &BlockLedger, nl: usize, tol: f64) -> bool {
        for (r, s) in self.block_keys(nl) {
            for layer in 0..self.n_layers {
                if !self
                    .stats(r, s, layer)
                    .approx_eq(other.stats(r, s, layer), tol)
                {
                    return false;
                }
            }
            let (a, b) = (
                self.block_log_marginal(r, s),
                other.block_log_marginal(r, s),
            );
            if (a - b).abs() > tol * a.abs().max(1.0) {
                return false;
            }
        }
        (self.loglik - other.loglik).abs() <= tol * self.loglik.abs().max(1.0)
    }
}
