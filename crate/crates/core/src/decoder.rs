//! Serial list Viterbi decoding over the dual trellis.
//!
//! A forward add-compare-select pass fills a [`MetricTable`]; the
//! tree-trellis list decoder then pops paths off a min-heap in nondecreasing
//! metric order. Each popped path pushes one detour node per merge point it
//! passes, where the detour swaps in the competing branch and follows the
//! survivor back to the start.
//!
//! Ties are broken deterministically: the ACS keeps the lower predecessor
//! state, then label 0; the heap pops equal metrics in insertion order.

use alloc::collections::BinaryHeap;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::encoder::{systematic_bits, CodeConfig, Mode};
use crate::trellis::DualTrellis;
use crate::Error;

const NO_LABEL: u8 = u8::MAX;

/// Squared Euclidean distance between `received` and the BPSK symbol of `y`
/// (0 maps to `+amplitude`, 1 to `-amplitude`).
#[inline]
pub fn branch_metric(received: f64, y: u8, amplitude: f64) -> f64 {
    let x = if y == 0 { amplitude } else { -amplitude };
    let d = received - x;
    d * d
}

/// Per-stage branch metrics, `[stage][label]`.
fn branch_metrics(received: &[f64], amplitude: f64) -> Vec<[f64; 2]> {
    received
        .iter()
        .map(|&r| [branch_metric(r, 0, amplitude), branch_metric(r, 1, amplitude)])
        .collect()
}

/// Cumulative metrics and survivor labels of a forward pass.
#[derive(Debug, Clone)]
pub struct MetricTable {
    stages: usize,
    states: usize,
    metric: Vec<f64>,
    survivor: Vec<u8>,
}

impl MetricTable {
    /// Number of stages.
    pub fn stages(&self) -> usize {
        self.stages
    }

    /// Best cumulative metric into `state` at `layer` (0..=stages);
    /// infinite when unreachable.
    #[inline]
    pub fn metric(&self, layer: usize, state: usize) -> f64 {
        self.metric[layer * self.states + state]
    }

    /// Label of the survivor branch into `state` at `layer` (1..=stages).
    #[inline]
    pub fn survivor(&self, layer: usize, state: usize) -> Option<u8> {
        let y = self.survivor[layer * self.states + state];
        (y != NO_LABEL).then_some(y)
    }

    /// Follows survivors from `state` at `layer` back to layer 0. Returns
    /// the labels of stages `0..layer` and the states of layers `0..=layer`.
    pub fn traceback(&self, t: &DualTrellis, layer: usize, state: usize) -> (Vec<u8>, Vec<u16>) {
        let mut labels = vec![0u8; layer];
        let mut states = vec![0u16; layer + 1];
        let mut s = state;
        states[layer] = s as u16;
        for b in (1..=layer).rev() {
            let y = self.survivor(b, s).expect("traceback from an unreachable state");
            labels[b - 1] = y;
            s = t.prev(b - 1, s, y as usize).expect("survivor branch exists");
            states[b - 1] = s as u16;
        }
        (labels, states)
    }
}

/// Forward ACS pass over `t`.
///
/// `initial` holds the starting metric of each boundary state (length
/// `2^v`); states the trellis does not allow to start are ignored.
pub fn viterbi_forward(
    t: &DualTrellis,
    received: &[f64],
    initial: &[f64],
    amplitude: f64,
) -> Result<MetricTable, Error> {
    if received.len() != t.stages() {
        return Err(Error::LengthMismatch {
            expected: t.stages(),
            found: received.len(),
        });
    }
    let boundary = t.period().boundary_states();
    if initial.len() != boundary {
        return Err(Error::LengthMismatch {
            expected: boundary,
            found: initial.len(),
        });
    }
    let bm = branch_metrics(received, amplitude);
    Ok(forward_with(t, &bm, initial))
}

fn forward_with(t: &DualTrellis, bm: &[[f64; 2]], initial: &[f64]) -> MetricTable {
    let states = t.num_states();
    let stages = t.stages();
    let mut metric = vec![f64::INFINITY; (stages + 1) * states];
    let mut survivor = vec![NO_LABEL; (stages + 1) * states];
    for s in t.start_states() {
        metric[s] = initial[s];
    }
    for b in 0..stages {
        let (cur, next) = metric.split_at_mut((b + 1) * states);
        let cur = &cur[b * states..];
        let next = &mut next[..states];
        let surv = &mut survivor[(b + 1) * states..(b + 2) * states];
        // Ascending state then label, replacing only on strict improvement,
        // keeps the lower predecessor and then label 0 on ties.
        for (s, &m) in cur.iter().enumerate() {
            if m == f64::INFINITY {
                continue;
            }
            for (y, &w) in bm[b].iter().enumerate() {
                if let Some(nx) = t.next(b, s, y) {
                    let cand = m + w;
                    if cand < next[nx] {
                        next[nx] = cand;
                        surv[nx] = y as u8;
                    }
                }
            }
        }
    }
    MetricTable {
        stages,
        states,
        metric,
        survivor,
    }
}

#[derive(Debug, Clone, Copy)]
enum NodeKind {
    /// The survivor into `state` at the last layer of trellis `trellis`.
    Terminal { trellis: u32, state: u32 },
    /// Path `parent` with its branch into layer `layer` replaced by label
    /// `label` from `pred`, preceded by the survivor into `pred`.
    Detour {
        parent: u32,
        layer: u32,
        pred: u32,
        label: u8,
    },
}

#[derive(Debug, Clone, Copy)]
struct Node {
    metric: f64,
    seq: u64,
    kind: NodeKind,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    // Reversed so that `BinaryHeap` pops the smallest metric, earliest first.
    fn cmp(&self, other: &Self) -> Ordering {
        other.metric.total_cmp(&self.metric).then(other.seq.cmp(&self.seq))
    }
}

/// A path emitted by [`ListDecoder`].
#[derive(Debug, Clone)]
pub struct ListPath {
    /// Output bit of every stage.
    pub labels: Vec<u8>,
    /// Dual state at every layer.
    pub states: Vec<u16>,
    /// Index of the trellis the path lives in.
    pub trellis: usize,
    /// Cumulative metric in table units (initial metric included).
    pub metric: f64,
    /// Layers `1..detour_limit` still carry survivor prefixes and may spawn
    /// detours.
    detour_limit: usize,
}

impl ListPath {
    /// Boundary state at layer 0.
    pub fn start(&self) -> usize {
        self.states[0] as usize
    }

    /// Boundary state at the last layer.
    pub fn end(&self) -> usize {
        self.states[self.states.len() - 1] as usize
    }
}

/// Tree-trellis list decoder over one or more trellises sharing a received
/// vector. Paths come out in nondecreasing metric order.
#[derive(Debug)]
pub struct ListDecoder<'a> {
    trellises: Vec<&'a DualTrellis>,
    tables: Vec<MetricTable>,
    bm: Vec<[f64; 2]>,
    heap: BinaryHeap<Node>,
    paths: Vec<ListPath>,
    seq: u64,
    insertions: u64,
    first: Option<Node>,
}

impl<'a> ListDecoder<'a> {
    /// Seeds the heap with the terminal node of every end state of every
    /// trellis. The best one is kept aside as the first path and is not
    /// counted as an insertion.
    pub fn new(trellises: Vec<&'a DualTrellis>, tables: Vec<MetricTable>, received: &[f64], amplitude: f64) -> Self {
        assert_eq!(trellises.len(), tables.len(), "one metric table per trellis");
        let mut terminals = Vec::new();
        let mut seq = 0;
        for (i, (t, table)) in trellises.iter().zip(&tables).enumerate() {
            for s in t.end_states() {
                let metric = table.metric(t.stages(), s);
                if metric.is_finite() {
                    terminals.push(Node {
                        metric,
                        seq,
                        kind: NodeKind::Terminal {
                            trellis: i as u32,
                            state: s as u32,
                        },
                    });
                    seq += 1;
                }
            }
        }
        let mut heap: BinaryHeap<Node> = terminals.into_iter().collect();
        let first = heap.pop();
        let insertions = heap.len() as u64;
        Self {
            trellises,
            tables,
            bm: branch_metrics(received, amplitude),
            heap,
            paths: Vec::new(),
            seq,
            insertions,
            first,
        }
    }

    /// Heap insertions so far.
    pub fn insertions(&self) -> u64 {
        self.insertions
    }

    /// Paths emitted so far.
    pub fn emitted(&self) -> usize {
        self.paths.len()
    }

    /// Metric table of trellis `i`.
    pub fn table(&self, i: usize) -> &MetricTable {
        &self.tables[i]
    }

    /// Next path in metric order, or `None` once every path is out.
    pub fn next_path(&mut self) -> Option<&ListPath> {
        let node = match self.first.take() {
            Some(n) => n,
            None => self.heap.pop()?,
        };
        let path = self.materialize(node);
        self.push_detours(&path, self.paths.len() as u32);
        self.paths.push(path);
        self.paths.last()
    }

    fn materialize(&self, node: Node) -> ListPath {
        match node.kind {
            NodeKind::Terminal { trellis, state } => {
                let t = self.trellises[trellis as usize];
                let (labels, states) = self.tables[trellis as usize].traceback(t, t.stages(), state as usize);
                ListPath {
                    labels,
                    states,
                    trellis: trellis as usize,
                    metric: node.metric,
                    detour_limit: t.stages() + 1,
                }
            }
            NodeKind::Detour {
                parent,
                layer,
                pred,
                label,
            } => {
                let parent = &self.paths[parent as usize];
                let t = self.trellises[parent.trellis];
                let layer = layer as usize;
                let (mut labels, mut states) = self.tables[parent.trellis].traceback(t, layer - 1, pred as usize);
                labels.push(label);
                labels.extend_from_slice(&parent.labels[layer..]);
                states.extend_from_slice(&parent.states[layer..]);
                ListPath {
                    labels,
                    states,
                    trellis: parent.trellis,
                    metric: node.metric,
                    detour_limit: layer,
                }
            }
        }
    }

    fn push_detours(&mut self, path: &ListPath, id: u32) {
        let t = self.trellises[path.trellis];
        let table = &self.tables[path.trellis];
        for layer in 1..path.detour_limit {
            let s = path.states[layer] as usize;
            let alt = 1 - path.labels[layer - 1];
            let Some(pred) = t.prev(layer - 1, s, alt as usize) else {
                continue;
            };
            let before = table.metric(layer - 1, pred);
            if before == f64::INFINITY {
                continue;
            }
            let metric = path.metric - table.metric(layer, s) + before + self.bm[layer - 1][alt as usize];
            self.heap.push(Node {
                metric,
                seq: self.seq,
                kind: NodeKind::Detour {
                    parent: id,
                    layer: layer as u32,
                    pred: pred as u32,
                    label: alt,
                },
            });
            self.seq += 1;
            self.insertions += 1;
        }
    }
}

/// Options shared by all decoder variants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecodeOptions {
    /// BPSK amplitude used in the branch metric. Path ordering does not
    /// depend on it; reported metrics do.
    pub amplitude: f64,
    /// Maximum number of paths to examine; `None` means unbounded.
    pub list_cap: Option<u64>,
}

impl Default for DecodeOptions {
    fn default() -> Self {
        Self {
            amplitude: 1.0,
            list_cap: None,
        }
    }
}

/// Whether a decode found a valid codeword.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecodeStatus {
    /// A path passed every check.
    Found,
    /// The list cap was reached or every path was examined without success.
    ListExhausted,
}

/// Outcome of one decode.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodeResult {
    /// Decoded `K` information bits when found.
    pub data: Option<Vec<u8>>,
    /// Decoded codeword when found.
    pub codeword: Option<Vec<u8>>,
    /// Found or exhausted.
    pub status: DecodeStatus,
    /// Rank of the accepted path, or the number examined when exhausted.
    pub list_rank: u64,
    /// Heap insertions.
    pub insertions: u64,
    /// Squared Euclidean distance from the received vector to the last
    /// examined path.
    pub final_metric: f64,
    /// Whether the last examined path starts and ends in the same state.
    pub tb_satisfied: bool,
    /// Whether WAVA stopped after its first iteration.
    pub wava_early: bool,
}

fn path_distance(bm: &[[f64; 2]], labels: &[u8]) -> f64 {
    labels.iter().zip(bm).map(|(&y, m)| m[y as usize]).sum()
}

/// CRC-checked data of a codeword, or `None` if the CRC fails.
fn check_crc(cfg: &CodeConfig, codeword: &[u8]) -> Option<Vec<u8>> {
    let mut info = systematic_bits(cfg.parity_check(), codeword, cfg.info_steps());
    if !cfg.crc().check(&info) {
        return None;
    }
    info.truncate(cfg.k());
    Some(info)
}

fn check_len(cfg: &CodeConfig, received: &[f64]) -> Result<(), Error> {
    if received.len() != cfg.blocklength() {
        return Err(Error::LengthMismatch {
            expected: cfg.blocklength(),
            found: received.len(),
        });
    }
    Ok(())
}

fn check_trellis(cfg: &CodeConfig, t: &DualTrellis) -> Result<(), Error> {
    if t.stages() != cfg.blocklength() || t.period().n() != cfg.parity_check().n() {
        return Err(Error::InvalidConfig("trellis does not match the code configuration"));
    }
    Ok(())
}

/// Pops paths until one passes CRC (and, if `need_tb`, starts where it
/// ends) or the cap is hit.
fn run_list(
    mut list: ListDecoder<'_>,
    cfg: &CodeConfig,
    opts: &DecodeOptions,
    need_tb: bool,
    received: &[f64],
) -> DecodeResult {
    let bm = branch_metrics(received, opts.amplitude);
    let cap = opts.list_cap.unwrap_or(u64::MAX);
    let mut rank = 0u64;
    let mut last: Option<(f64, bool)> = None;
    while rank < cap {
        let Some(path) = list.next_path() else {
            break;
        };
        rank += 1;
        let tb = path.start() == path.end();
        let metric = path_distance(&bm, &path.labels);
        last = Some((metric, tb));
        if need_tb && !tb {
            continue;
        }
        if let Some(data) = check_crc(cfg, &path.labels) {
            let codeword = path.labels.clone();
            return DecodeResult {
                data: Some(data),
                codeword: Some(codeword),
                status: DecodeStatus::Found,
                list_rank: rank,
                insertions: list.insertions(),
                final_metric: metric,
                tb_satisfied: tb,
                wava_early: false,
            };
        }
    }
    let (final_metric, tb_satisfied) = last.unwrap_or((f64::NAN, false));
    DecodeResult {
        data: None,
        codeword: None,
        status: DecodeStatus::ListExhausted,
        list_rank: rank,
        insertions: list.insertions(),
        final_metric,
        tb_satisfied,
        wava_early: false,
    }
}

/// Zero-terminated list decoding on the trellis from
/// [`build_zt_trellis`](crate::trellis::build_zt_trellis).
pub fn decode_zt(
    t: &DualTrellis,
    received: &[f64],
    cfg: &CodeConfig,
    opts: &DecodeOptions,
) -> Result<DecodeResult, Error> {
    if cfg.mode() != Mode::ZeroTerminated || t.start() != Some(0) || t.end() != Some(0) {
        return Err(Error::InvalidConfig(
            "decode_zt needs a zero-terminated code and trellis",
        ));
    }
    check_trellis(cfg, t)?;
    check_len(cfg, received)?;
    let initial = vec![0.0; t.period().boundary_states()];
    let table = viterbi_forward(t, received, &initial, opts.amplitude)?;
    let list = ListDecoder::new(vec![t], vec![table], received, opts.amplitude);
    Ok(run_list(list, cfg, opts, false, received))
}

fn check_rooted(cfg: &CodeConfig, t: &DualTrellis) -> Result<(), Error> {
    if cfg.mode() != Mode::TailBiting || !t.has_root() || t.start().is_some() || t.end().is_some() {
        return Err(Error::InvalidConfig(
            "tail-biting decoding needs an unpinned trellis with a root node",
        ));
    }
    check_trellis(cfg, t)
}

/// Tail-biting list decoding on a single unpinned trellis with a root node,
/// skipping paths that do not bite their tail.
pub fn decode_tb_single(
    t: &DualTrellis,
    received: &[f64],
    cfg: &CodeConfig,
    opts: &DecodeOptions,
) -> Result<DecodeResult, Error> {
    check_rooted(cfg, t)?;
    check_len(cfg, received)?;
    let initial = vec![0.0; t.period().boundary_states()];
    let table = viterbi_forward(t, received, &initial, opts.amplitude)?;
    let list = ListDecoder::new(vec![t], vec![table], received, opts.amplitude);
    Ok(run_list(list, cfg, opts, true, received))
}

/// Tail-biting list decoding over the multi-trellis forest: one pinned
/// trellis per state, one shared heap.
pub fn decode_tb_multi(
    forest: &[DualTrellis],
    received: &[f64],
    cfg: &CodeConfig,
    opts: &DecodeOptions,
) -> Result<DecodeResult, Error> {
    if cfg.mode() != Mode::TailBiting {
        return Err(Error::InvalidConfig("decode_tb_multi needs a tail-biting code"));
    }
    let Some(first) = forest.first() else {
        return Err(Error::InvalidConfig("empty trellis forest"));
    };
    if forest.len() != first.period().boundary_states() {
        return Err(Error::InvalidConfig("forest needs one trellis per boundary state"));
    }
    for (sigma, t) in forest.iter().enumerate() {
        check_trellis(cfg, t)?;
        if t.start() != Some(sigma) || t.end() != Some(sigma) {
            return Err(Error::InvalidConfig("forest trellis is not pinned to its own state"));
        }
    }
    check_len(cfg, received)?;
    let bm = branch_metrics(received, opts.amplitude);
    let initial = vec![0.0; first.period().boundary_states()];
    let tables = forest.iter().map(|t| forward_with(t, &bm, &initial)).collect();
    let list = ListDecoder::new(forest.iter().collect(), tables, received, opts.amplitude);
    Ok(run_list(list, cfg, opts, true, received))
}

/// Wrap-around Viterbi preprocessing followed by single-trellis list
/// decoding.
///
/// The first ACS iteration starts from zero metrics. If its best path is
/// tail-biting and passes the CRC it is returned directly. Otherwise the
/// final metrics seed a second iteration, and list decoding runs on that
/// iteration's table. Rank and insertions only count the list stage.
pub fn decode_tb_wava(
    t: &DualTrellis,
    received: &[f64],
    cfg: &CodeConfig,
    opts: &DecodeOptions,
) -> Result<DecodeResult, Error> {
    check_rooted(cfg, t)?;
    check_len(cfg, received)?;
    let bm = branch_metrics(received, opts.amplitude);
    let boundary = t.period().boundary_states();
    let first = forward_with(t, &bm, &vec![0.0; boundary]);
    let n = t.stages();
    let best = t
        .end_states()
        .min_by(|&a, &b| first.metric(n, a).total_cmp(&first.metric(n, b)).then(a.cmp(&b)))
        .expect("trellis has end states");
    let (labels, states) = first.traceback(t, n, best);
    if states[0] as usize == best {
        if let Some(data) = check_crc(cfg, &labels) {
            return Ok(DecodeResult {
                data: Some(data),
                final_metric: path_distance(&bm, &labels),
                codeword: Some(labels),
                status: DecodeStatus::Found,
                list_rank: 1,
                insertions: 0,
                tb_satisfied: true,
                wava_early: true,
            });
        }
    }
    let wrapped: Vec<f64> = (0..boundary).map(|s| first.metric(n, s)).collect();
    let second = forward_with(t, &bm, &wrapped);
    let list = ListDecoder::new(vec![t], vec![second], received, opts.amplitude);
    Ok(run_list(list, cfg, opts, true, received))
}
