//! Distance-spectrum-optimal CRC search.
//!
//! The search works in three phases on the primal state machine:
//!
//! 1. collect irreducible error events (IEEs) whose output weight is below a
//!    threshold `d_tilde`;
//! 2. rebuild every low-weight codeword of the target length from those
//!    events (zero runs between events for zero-terminated codes,
//!    concatenation at a common state plus circular shifts for tail-biting
//!    codes);
//! 3. for each degree-`m` candidate with constant term 1, count the
//!    codewords whose information polynomial is divisible by it and keep the
//!    candidate with the largest minimum undetected distance.
//!
//! Paths are stored as event placements, not bit vectors, so the remainder
//! of a path is the XOR of per-placement remainders.

use alloc::collections::{BTreeMap, BinaryHeap};
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::{Ordering, Reverse};

use crate::algebra::{BinaryPolynomial, Crc};
use crate::encoder::{step_into, Mode, ParityCheck};
use crate::trellis::TerminationTable;
use crate::Error;

#[derive(Debug, Clone, Copy)]
struct Branch {
    next: u32,
    weight: u32,
    outputs: u32,
}

/// The primal trellis section: `2^v` states, `2^(n-1)` branches each.
///
/// Input symbols pack the `n - 1` inputs of a step with input `j` (in
/// information order) at bit `j`; output symbols pack rail `i` at bit `i`.
#[derive(Debug, Clone)]
pub struct PrimalMachine {
    n: usize,
    states: usize,
    branches: Vec<Branch>,
}

impl PrimalMachine {
    /// Tabulates every branch of the encoder.
    pub fn new(pc: &ParityCheck) -> Self {
        let n = pc.n();
        let states = pc.num_states();
        let symbols = 1usize << (n - 1);
        let mut branches = Vec::with_capacity(states * symbols);
        let mut inputs = vec![0u8; n - 1];
        let mut out = vec![0u8; n];
        for s in 0..states {
            for u in 0..symbols {
                for (j, b) in inputs.iter_mut().enumerate() {
                    *b = ((u >> j) & 1) as u8;
                }
                let next = step_into(pc, s as u32, &inputs, &mut out);
                let outputs = out
                    .iter()
                    .enumerate()
                    .fold(0u32, |acc, (i, &b)| acc | (u32::from(b) << i));
                branches.push(Branch {
                    next,
                    weight: outputs.count_ones(),
                    outputs,
                });
            }
        }
        Self { n, states, branches }
    }

    /// Number of states.
    pub fn states(&self) -> usize {
        self.states
    }

    /// Number of input symbols per step.
    pub fn symbols(&self) -> usize {
        1 << (self.n - 1)
    }

    fn branch(&self, state: usize, symbol: usize) -> Branch {
        self.branches[state * self.symbols() + symbol]
    }

    /// Next state, output weight and packed outputs of one branch.
    pub fn step(&self, state: usize, symbol: usize) -> (usize, u32, u32) {
        let b = self.branch(state, symbol);
        (b.next as usize, b.weight, b.outputs)
    }

    /// Minimum output weight of a path from each state to `target` whose
    /// intermediate states all exceed `target`. `u32::MAX` where unreachable.
    fn return_weights(&self, target: usize) -> Vec<u32> {
        // Reverse adjacency restricted to allowed predecessors.
        let mut rev: Vec<Vec<(usize, u32)>> = vec![Vec::new(); self.states];
        for p in (target + 1)..self.states {
            for u in 0..self.symbols() {
                let b = self.branch(p, u);
                let q = b.next as usize;
                if q >= target {
                    rev[q].push((p, b.weight));
                }
            }
        }
        let mut dist = vec![u32::MAX; self.states];
        dist[target] = 0;
        let mut heap = BinaryHeap::new();
        heap.push(Reverse((0u32, target)));
        while let Some(Reverse((d, x))) = heap.pop() {
            if d > dist[x] {
                continue;
            }
            for &(p, w) in &rev[x] {
                let nd = d + w;
                if nd < dist[p] {
                    dist[p] = nd;
                    heap.push(Reverse((nd, p)));
                }
            }
        }
        dist
    }
}

/// An irreducible error event: a path leaving state `start` and first
/// returning to it after `len()` steps, visiting only larger states in
/// between.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct ErrorEvent {
    /// State the event starts and ends in.
    pub start: u32,
    /// Output Hamming weight.
    pub weight: u32,
    /// Input symbol of each step.
    pub inputs: Vec<u32>,
    /// Output symbol of each step.
    pub outputs: Vec<u32>,
}

impl ErrorEvent {
    /// Length in primal steps.
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    /// Whether the event has no steps (never true for collected events).
    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    /// Input bits in information order.
    pub fn input_bits(&self, n: usize) -> Vec<u8> {
        unpack(&self.inputs, n - 1)
    }

    /// Output bits in codeword order.
    pub fn output_bits(&self, n: usize) -> Vec<u8> {
        unpack(&self.outputs, n)
    }
}

fn unpack(symbols: &[u32], width: usize) -> Vec<u8> {
    symbols
        .iter()
        .flat_map(|s| (0..width).map(move |j| ((s >> j) & 1) as u8))
        .collect()
}

fn collect_at(machine: &PrimalMachine, sigma: usize, d_tilde: u32, max_len: usize, out: &mut Vec<ErrorEvent>) {
    struct Walk<'a> {
        machine: &'a PrimalMachine,
        sigma: usize,
        d_tilde: u32,
        max_len: usize,
        back: Vec<u32>,
        inputs: Vec<u32>,
        outputs: Vec<u32>,
    }

    impl Walk<'_> {
        fn go(&mut self, state: usize, weight: u32, out: &mut Vec<ErrorEvent>) {
            if self.inputs.len() == self.max_len {
                return;
            }
            for u in 0..self.machine.symbols() {
                let b = self.machine.branch(state, u);
                let (next, w) = (b.next as usize, weight + b.weight);
                if next == self.sigma {
                    if w > 0 && w < self.d_tilde {
                        let mut inputs = self.inputs.clone();
                        inputs.push(u as u32);
                        let mut outputs = self.outputs.clone();
                        outputs.push(b.outputs);
                        out.push(ErrorEvent {
                            start: self.sigma as u32,
                            weight: w,
                            inputs,
                            outputs,
                        });
                    }
                } else if next > self.sigma && self.back[next] != u32::MAX && w + self.back[next] < self.d_tilde {
                    self.inputs.push(u as u32);
                    self.outputs.push(b.outputs);
                    self.go(next, w, out);
                    self.inputs.pop();
                    self.outputs.pop();
                }
            }
        }
    }

    let mut walk = Walk {
        machine,
        sigma,
        d_tilde,
        max_len,
        back: machine.return_weights(sigma),
        inputs: Vec::new(),
        outputs: Vec::new(),
    };
    walk.go(sigma, 0, out);
}

/// Zero-terminated IEEs: paths that leave state 0 once and rejoin it once,
/// with output weight below `d_tilde` and at most `max_len` steps.
pub fn collect_iee_zt(pc: &ParityCheck, d_tilde: u32, max_len: usize) -> Vec<ErrorEvent> {
    let machine = PrimalMachine::new(pc);
    let mut out = Vec::new();
    collect_at(&machine, 0, d_tilde, max_len, &mut out);
    out.sort();
    out
}

/// Tail-biting IEEs for every state `sigma`: paths from `sigma` back to
/// `sigma` whose intermediate states all exceed `sigma`, with output weight
/// in `1..d_tilde` and at most `max_len` steps.
pub fn collect_iee_tb(pc: &ParityCheck, d_tilde: u32, max_len: usize) -> Vec<ErrorEvent> {
    let machine = PrimalMachine::new(pc);
    let mut out = Vec::new();
    for sigma in 0..machine.states() {
        collect_at(&machine, sigma, d_tilde, max_len, &mut out);
    }
    out.sort();
    out
}

/// Smallest output weight of any nonzero zero-terminated path, i.e. the
/// free distance of the convolutional code.
pub fn free_distance(pc: &ParityCheck) -> u32 {
    let machine = PrimalMachine::new(pc);
    let back = machine.return_weights(0);
    (1..machine.symbols())
        .map(|u| {
            let b = machine.branch(0, u);
            let rest = if b.next == 0 { 0 } else { back[b.next as usize] };
            b.weight.saturating_add(rest)
        })
        .min()
        .unwrap_or(u32::MAX)
}

/// Low-weight codewords of one code length, stored as event placements.
#[derive(Debug, Clone)]
pub struct LowWeightPaths {
    n: usize,
    steps: usize,
    info_steps: usize,
    events: Vec<ErrorEvent>,
    /// `(event, first step)` pairs, concatenated over all paths. Offsets are
    /// circular for tail-biting paths.
    placements: Vec<(u32, u32)>,
    /// `(first placement, placement count, weight)` per path.
    paths: Vec<(u32, u32, u32)>,
    /// Index into `slot_bits` of each entry of `placements`.
    slots: Vec<u32>,
    /// `(first, count)` range of `bit_positions` per distinct placement.
    slot_bits: Vec<(u32, u32)>,
    /// Information-bit indices set by each distinct placement.
    bit_positions: Vec<u32>,
}

impl LowWeightPaths {
    fn new(n: usize, steps: usize, info_steps: usize, events: Vec<ErrorEvent>) -> Self {
        Self {
            n,
            steps,
            info_steps,
            events,
            placements: Vec::new(),
            paths: Vec::new(),
            slots: Vec::new(),
            slot_bits: Vec::new(),
            bit_positions: Vec::new(),
        }
    }

    /// Indexes the distinct placements and the information bits each sets.
    fn finish(mut self) -> Self {
        let k = self.n - 1;
        let mut dense = vec![u32::MAX; self.events.len() * self.steps];
        self.slots = Vec::with_capacity(self.placements.len());
        for &(e, off) in &self.placements {
            let key = e as usize * self.steps + off as usize;
            if dense[key] == u32::MAX {
                dense[key] = self.slot_bits.len() as u32;
                let first = self.bit_positions.len() as u32;
                for (t, &u) in self.events[e as usize].inputs.iter().enumerate() {
                    let step = (off as usize + t) % self.steps;
                    if step >= self.info_steps {
                        continue;
                    }
                    for j in (0..k).filter(|j| (u >> j) & 1 == 1) {
                        self.bit_positions.push((step * k + j) as u32);
                    }
                }
                let count = self.bit_positions.len() as u32 - first;
                self.slot_bits.push((first, count));
            }
            self.slots.push(dense[key]);
        }
        self
    }

    /// Number of paths.
    pub fn len(&self) -> usize {
        self.paths.len()
    }

    /// Whether no path was found.
    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    /// Events the paths are built from.
    pub fn events(&self) -> &[ErrorEvent] {
        &self.events
    }

    /// Primal length of every path.
    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Leading steps whose inputs are protected by the CRC.
    pub fn info_steps(&self) -> usize {
        self.info_steps
    }

    /// Output weight of path `i`.
    pub fn weight(&self, i: usize) -> u32 {
        self.paths[i].2
    }

    fn placements_of(&self, i: usize) -> &[(u32, u32)] {
        let (first, count, _) = self.paths[i];
        &self.placements[first as usize..(first + count) as usize]
    }

    /// Input symbol of every step of path `i`.
    pub fn input_symbols(&self, i: usize) -> Vec<u32> {
        let mut syms = vec![0u32; self.steps];
        for &(e, off) in self.placements_of(i) {
            let ev = &self.events[e as usize];
            for (k, &u) in ev.inputs.iter().enumerate() {
                syms[(off as usize + k) % self.steps] = u;
            }
        }
        syms
    }

    /// Output symbol of every step of path `i`.
    pub fn output_symbols(&self, i: usize) -> Vec<u32> {
        let mut syms = vec![0u32; self.steps];
        for &(e, off) in self.placements_of(i) {
            let ev = &self.events[e as usize];
            for (k, &y) in ev.outputs.iter().enumerate() {
                syms[(off as usize + k) % self.steps] = y;
            }
        }
        syms
    }

    /// CRC-protected input bits of path `i` (`K + m` bits).
    pub fn info_bits(&self, i: usize) -> Vec<u8> {
        let mut bits = unpack(&self.input_symbols(i), self.n - 1);
        bits.truncate(self.info_steps * (self.n - 1));
        bits
    }

    /// Every path as `(info bits, weight)`.
    pub fn to_vec(&self) -> Vec<(Vec<u8>, u32)> {
        (0..self.len()).map(|i| (self.info_bits(i), self.weight(i))).collect()
    }
}

fn events_by_weight(events: &[ErrorEvent]) -> Vec<ErrorEvent> {
    let mut sorted = events.to_vec();
    sorted.sort_by_key(|e| (e.weight, e.len()));
    sorted
}

/// All zero-terminated codewords of `steps` primal steps with output weight
/// below `d_tilde` and nonzero information, built from zero runs and IEEs.
///
/// The final `steps - info_steps` steps are the termination window. With a
/// `table`, only codewords whose termination inputs are the table's for the
/// state entering that window are kept, which is exactly the encoder's
/// codebook. Without one, every path back to zero is kept.
pub fn reconstruct_zt_paths(
    pc: &ParityCheck,
    events: &[ErrorEvent],
    steps: usize,
    info_steps: usize,
    d_tilde: u32,
    table: Option<&TerminationTable>,
) -> LowWeightPaths {
    let events = events_by_weight(events);
    let machine = PrimalMachine::new(pc);
    let k = pc.n() - 1;
    let term_syms: Option<Vec<Vec<u32>>> = table.map(|t| {
        (0..pc.num_states() as u32)
            .map(|s| {
                t.inputs(s)
                    .chunks(k)
                    .map(|c| c.iter().enumerate().fold(0u32, |a, (j, &b)| a | (u32::from(b) << j)))
                    .collect()
            })
            .collect()
    });
    let mut out = LowWeightPaths::new(pc.n(), steps, info_steps, events);

    struct Ctx<'a> {
        machine: &'a PrimalMachine,
        term: Option<&'a [Vec<u32>]>,
        d_tilde: u32,
        stack: Vec<(u32, u32)>,
        syms: Vec<u32>,
    }

    fn keep(ctx: &mut Ctx<'_>, out: &LowWeightPaths) -> bool {
        ctx.syms.iter_mut().for_each(|s| *s = 0);
        for &(e, off) in &ctx.stack {
            let ev = &out.events[e as usize];
            ctx.syms[off as usize..off as usize + ev.len()].copy_from_slice(&ev.inputs);
        }
        if ctx.syms[..out.info_steps].iter().all(|&s| s == 0) {
            return false;
        }
        let Some(term) = ctx.term else {
            return true;
        };
        let mut s = 0usize;
        for &u in &ctx.syms[..out.info_steps] {
            s = ctx.machine.step(s, u as usize).0;
        }
        ctx.syms[out.info_steps..] == term[s][..]
    }

    fn rec(ctx: &mut Ctx<'_>, out: &mut LowWeightPaths, pos: usize, weight: u32) {
        for start in pos..out.steps {
            for e in 0..out.events.len() {
                let (w, len) = (out.events[e].weight, out.events[e].len());
                if weight + w >= ctx.d_tilde {
                    break;
                }
                if start + len > out.steps {
                    continue;
                }
                ctx.stack.push((e as u32, start as u32));
                if keep(ctx, out) {
                    let first = out.placements.len() as u32;
                    out.placements.extend_from_slice(&ctx.stack);
                    out.paths.push((first, ctx.stack.len() as u32, weight + w));
                }
                rec(ctx, out, start + len, weight + w);
                ctx.stack.pop();
            }
        }
    }

    let mut ctx = Ctx {
        machine: &machine,
        term: term_syms.as_deref(),
        d_tilde,
        stack: Vec::new(),
        syms: vec![0; steps],
    };
    rec(&mut ctx, &mut out, 0, 0);
    out.finish()
}

/// All tail-biting codewords of `steps` primal steps with output weight
/// below `d_tilde` and nonzero information.
///
/// Every tail-biting path, rotated to start at its smallest state `sigma`,
/// splits into IEEs at `sigma`. Conversely each sequence of IEEs at `sigma`
/// (with all-zero steps allowed as fillers when `sigma = 0`) of total length
/// `steps`, rotated by every offset inside its first element, yields each
/// distinct path exactly once, so no deduplication pass is needed.
pub fn reconstruct_tb_paths(pc: &ParityCheck, events: &[ErrorEvent], steps: usize, d_tilde: u32) -> LowWeightPaths {
    let events = events_by_weight(events);
    let mut out = LowWeightPaths::new(pc.n(), steps, steps, events);
    let mut by_state: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
    for (i, e) in out.events.iter().enumerate() {
        by_state.entry(e.start).or_default().push(i as u32);
    }

    struct Ctx<'a> {
        group: &'a [u32],
        filler: bool,
        d_tilde: u32,
        /// `(event, offset)` with `u32::MAX` for a filler step.
        stack: Vec<(u32, u32)>,
    }

    fn emit(ctx: &Ctx<'_>, out: &mut LowWeightPaths, weight: u32) {
        let has_input = ctx
            .stack
            .iter()
            .any(|&(e, _)| e != u32::MAX && out.events[e as usize].inputs.iter().any(|&u| u != 0));
        if !has_input {
            return;
        }
        let first_len = match ctx.stack[0].0 {
            u32::MAX => 1,
            e => out.events[e as usize].len(),
        };
        let steps = out.steps as u32;
        for r in 0..first_len as u32 {
            let first = out.placements.len() as u32;
            let mut count = 0;
            for &(e, off) in ctx.stack.iter().filter(|p| p.0 != u32::MAX) {
                out.placements.push((e, (off + steps - r) % steps));
                count += 1;
            }
            out.paths.push((first, count, weight));
        }
    }

    fn rec(ctx: &mut Ctx<'_>, out: &mut LowWeightPaths, pos: usize, weight: u32) {
        if pos == out.steps {
            emit(ctx, out, weight);
            return;
        }
        if ctx.filler {
            ctx.stack.push((u32::MAX, pos as u32));
            rec(ctx, out, pos + 1, weight);
            ctx.stack.pop();
        }
        for &e in ctx.group {
            let ev = &out.events[e as usize];
            let (w, len) = (ev.weight, ev.len());
            if weight + w >= ctx.d_tilde {
                break;
            }
            if pos + len > out.steps {
                continue;
            }
            ctx.stack.push((e, pos as u32));
            rec(ctx, out, pos + len, weight + w);
            ctx.stack.pop();
        }
    }

    for (&sigma, group) in &by_state {
        let mut ctx = Ctx {
            group,
            filler: sigma == 0,
            d_tilde,
            stack: Vec::new(),
        };
        rec(&mut ctx, &mut out, 0, 0);
    }
    out.finish()
}

/// Number of undetected codewords per output weight.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DistanceSpectrum {
    counts: BTreeMap<u32, u64>,
}

impl DistanceSpectrum {
    /// Adds `count` codewords at `distance`.
    pub fn add(&mut self, distance: u32, count: u64) {
        if count > 0 {
            *self.counts.entry(distance).or_default() += count;
        }
    }

    /// Smallest distance with a nonzero count.
    pub fn min_distance(&self) -> Option<u32> {
        self.counts.keys().next().copied()
    }

    /// Count at `distance`.
    pub fn count(&self, distance: u32) -> u64 {
        self.counts.get(&distance).copied().unwrap_or(0)
    }

    /// `(distance, count)` pairs in increasing distance.
    pub fn iter(&self) -> impl Iterator<Item = (u32, u64)> + '_ {
        self.counts.iter().map(|(&d, &c)| (d, c))
    }

    /// Whether no undetected codeword was found.
    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Orders spectra from best to worst: larger minimum distance first,
    /// then fewer codewords at each distance from the smallest up.
    pub fn rank_cmp(&self, other: &Self) -> Ordering {
        match (self.min_distance(), other.min_distance()) {
            (None, None) => return Ordering::Equal,
            (None, Some(_)) => return Ordering::Less,
            (Some(_), None) => return Ordering::Greater,
            (Some(a), Some(b)) if a != b => return b.cmp(&a),
            _ => {}
        }
        let mut a = self.counts.iter();
        let mut b = other.counts.iter();
        loop {
            match (a.next(), b.next()) {
                (None, None) => return Ordering::Equal,
                // Running out means zero at every remaining distance.
                (None, Some(_)) => return Ordering::Less,
                (Some(_), None) => return Ordering::Greater,
                (Some((da, ca)), Some((db, cb))) => {
                    if da != db {
                        // The spectrum with the later entry has a zero here.
                        return db.cmp(da);
                    }
                    if ca != cb {
                        return ca.cmp(cb);
                    }
                }
            }
        }
    }
}

/// Every degree-`m` CRC candidate with constant term 1, in increasing value.
pub fn crc_candidates(m: usize) -> Vec<BinaryPolynomial> {
    assert!((1..=63).contains(&m), "CRC degree must be in 1..=63");
    (0..1u64 << (m - 1))
        .map(|mid| BinaryPolynomial::from_u64((1 << m) | (mid << 1) | 1))
        .collect()
}

/// Spectrum of the codewords in `paths` that `crc` fails to detect.
pub fn evaluate_candidate(paths: &LowWeightPaths, crc: &BinaryPolynomial) -> Result<DistanceSpectrum, Error> {
    let crc = Crc::new(crc)?;
    let info_bits = paths.info_steps * (paths.n - 1);
    let powers = crc.powers(info_bits);
    let rems: Vec<u64> = paths
        .slot_bits
        .iter()
        .map(|&(first, count)| {
            paths.bit_positions[first as usize..(first + count) as usize]
                .iter()
                .fold(0u64, |r, &b| r ^ powers[info_bits - 1 - b as usize])
        })
        .collect();
    let mut counts: Vec<u64> = Vec::new();
    for &(first, count, weight) in &paths.paths {
        let r = paths.slots[first as usize..(first + count) as usize]
            .iter()
            .fold(0u64, |acc, &slot| acc ^ rems[slot as usize]);
        if r == 0 {
            if counts.len() <= weight as usize {
                counts.resize(weight as usize + 1, 0);
            }
            counts[weight as usize] += 1;
        }
    }
    let mut spectrum = DistanceSpectrum::default();
    for (d, &c) in counts.iter().enumerate() {
        spectrum.add(d as u32, c);
    }
    Ok(spectrum)
}

/// Outcome of a CRC search over one path set.
#[derive(Debug, Clone)]
pub struct CrcSearch {
    /// Selected generator.
    pub crc: BinaryPolynomial,
    /// Its undetected-codeword spectrum below the threshold.
    pub spectrum: DistanceSpectrum,
    /// Every candidate whose truncated spectrum ties with the winner,
    /// winner included, in increasing value.
    pub co_winners: Vec<BinaryPolynomial>,
    /// Spectra of all candidates, in increasing value.
    pub candidates: Vec<(BinaryPolynomial, DistanceSpectrum)>,
}

/// Picks the best candidate from precomputed spectra. Ties on the truncated
/// spectrum go to the smallest generator value.
pub fn rank_candidates(spectra: Vec<(BinaryPolynomial, DistanceSpectrum)>, d_tilde: u32) -> Result<CrcSearch, Error> {
    if spectra.iter().any(|(_, s)| s.is_empty()) {
        return Err(Error::InsufficientThreshold {
            d_tilde,
            hint: d_tilde + 1,
        });
    }
    let mut best = 0;
    for i in 1..spectra.len() {
        if spectra[i].1.rank_cmp(&spectra[best].1) == Ordering::Less {
            best = i;
        }
    }
    let co_winners = spectra
        .iter()
        .filter(|(_, s)| s.rank_cmp(&spectra[best].1) == Ordering::Equal)
        .map(|(p, _)| p.clone())
        .collect();
    Ok(CrcSearch {
        crc: spectra[best].0.clone(),
        spectrum: spectra[best].1.clone(),
        co_winners,
        candidates: spectra,
    })
}

/// Searches every degree-`m` candidate against `paths`, one at a time.
pub fn search_dso_crc(paths: &LowWeightPaths, m: usize, d_tilde: u32) -> Result<CrcSearch, Error> {
    let spectra = crc_candidates(m)
        .into_iter()
        .map(|p| evaluate_candidate(paths, &p).map(|s| (p, s)))
        .collect::<Result<Vec<_>, _>>()?;
    rank_candidates(spectra, d_tilde)
}

/// Parameters of a complete CRC design run.
#[derive(Debug, Clone)]
pub struct DesignRequest {
    /// Convolutional code.
    pub pc: ParityCheck,
    /// Termination rule.
    pub mode: Mode,
    /// Information length `K`.
    pub k: usize,
    /// CRC degree `m`.
    pub m: usize,
    /// Fixed threshold; when `None` it starts just above the free distance
    /// and grows until every candidate has an undetected codeword.
    pub d_tilde: Option<u32>,
    /// Extra threshold increments spent trying to break a tie between
    /// co-winners once all candidates are ranked.
    pub tie_break_rounds: u32,
}

/// Result of [`design_dso_crc`].
#[derive(Debug, Clone)]
pub struct Design {
    /// Search outcome at the final threshold.
    pub search: CrcSearch,
    /// Threshold of the final round.
    pub d_tilde: u32,
    /// Number of low-weight codewords examined in the final round.
    pub paths: usize,
}

/// Low-weight codewords of the code described by `req` at threshold
/// `d_tilde`.
pub fn low_weight_paths(req: &DesignRequest, d_tilde: u32) -> Result<LowWeightPaths, Error> {
    let n = req.pc.n();
    let bits = req.k + req.m;
    if !bits.is_multiple_of(n - 1) {
        return Err(Error::NotDivisible { bits, rails: n - 1 });
    }
    let info_steps = bits / (n - 1);
    Ok(match req.mode {
        Mode::ZeroTerminated => {
            let steps = info_steps + crate::encoder::termination_steps(&req.pc);
            let table = crate::trellis::build_termination_table(&req.pc)?;
            let events = collect_iee_zt(&req.pc, d_tilde, steps);
            reconstruct_zt_paths(&req.pc, &events, steps, info_steps, d_tilde, Some(&table))
        }
        Mode::TailBiting => {
            let events = collect_iee_tb(&req.pc, d_tilde, info_steps);
            reconstruct_tb_paths(&req.pc, &events, info_steps, d_tilde)
        }
    })
}

/// Runs collection, reconstruction and search, growing the threshold as
/// needed. `evaluate` maps a path set and a candidate list to spectra in the
/// same order; callers may parallelize it.
pub fn design_dso_crc<F>(req: &DesignRequest, mut evaluate: F) -> Result<Design, Error>
where
    F: FnMut(&LowWeightPaths, &[BinaryPolynomial]) -> Result<Vec<DistanceSpectrum>, Error>,
{
    let candidates = crc_candidates(req.m);
    let mut d_tilde = req.d_tilde.unwrap_or_else(|| free_distance(&req.pc) + 1);
    let mut tie_rounds = 0;
    loop {
        let paths = low_weight_paths(req, d_tilde)?;
        let spectra = evaluate(&paths, &candidates)?;
        let ranked = rank_candidates(candidates.iter().cloned().zip(spectra).collect(), d_tilde);
        match ranked {
            Err(Error::InsufficientThreshold { hint, .. }) if req.d_tilde.is_none() => {
                d_tilde = hint;
            }
            Err(e) => return Err(e),
            Ok(search) => {
                if search.co_winners.len() > 1 && req.d_tilde.is_none() && tie_rounds < req.tie_break_rounds {
                    tie_rounds += 1;
                    d_tilde += 1;
                    continue;
                }
                return Ok(Design {
                    search,
                    d_tilde,
                    paths: paths.len(),
                });
            }
        }
    }
}

/// Sequential evaluator for [`design_dso_crc`].
pub fn evaluate_all(paths: &LowWeightPaths, candidates: &[BinaryPolynomial]) -> Result<Vec<DistanceSpectrum>, Error> {
    candidates.iter().map(|p| evaluate_candidate(paths, p)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::encode_from;

    fn toy() -> ParityCheck {
        ParityCheck::from_octal("2,5,7,6").unwrap()
    }

    fn v4() -> ParityCheck {
        ParityCheck::from_octal("33,25,37,31").unwrap()
    }

    fn replay(pc: &ParityCheck, ev: &ErrorEvent) -> (Vec<u8>, u32) {
        encode_from(pc, ev.start, &ev.input_bits(pc.n()))
    }

    #[test]
    fn unit_threshold_gives_no_events() {
        assert!(collect_iee_zt(&v4(), 1, 32).is_empty());
        assert!(collect_iee_tb(&toy(), 1, 8).is_empty());
    }

    #[test]
    fn events_replay_to_their_outputs() {
        for pc in [toy(), v4()] {
            for ev in collect_iee_tb(&pc, 7, 10) {
                let (out, end) = replay(&pc, &ev);
                assert_eq!(out, ev.output_bits(pc.n()));
                assert_eq!(end, ev.start);
                assert_eq!(out.iter().map(|&b| u32::from(b)).sum::<u32>(), ev.weight);
            }
        }
    }

    #[test]
    fn intermediate_states_exceed_the_start() {
        let pc = v4();
        for ev in collect_iee_tb(&pc, 7, 12) {
            let bits = ev.input_bits(pc.n());
            let mut s = ev.start;
            for step in bits.chunks(pc.n() - 1).take(ev.len() - 1) {
                s = encode_from(&pc, s, step).1;
                assert!(s > ev.start, "event {ev:?} revisits state {s}");
            }
        }
    }

    #[test]
    fn zero_state_events_match_zero_terminated() {
        let pc = v4();
        let zt = collect_iee_zt(&pc, 8, 20);
        let tb: Vec<_> = collect_iee_tb(&pc, 8, 20)
            .into_iter()
            .filter(|e| e.start == 0)
            .collect();
        assert_eq!(zt, tb);
    }

    #[test]
    fn free_distance_of_reference_codes() {
        assert_eq!(free_distance(&v4()), 4);
        let min = collect_iee_zt(&v4(), 10, 40).iter().map(|e| e.weight).min();
        assert_eq!(min, Some(4));
    }

    #[test]
    fn candidates_are_odd_and_full_degree() {
        let c = crc_candidates(4);
        assert_eq!(c.len(), 8);
        assert_eq!(c[0].to_hex(), "0x11");
        assert_eq!(c[7].to_hex(), "0x1F");
        assert!(c.iter().all(|p| p.degree() == Some(4) && p.coeff(0) == 1));
    }

    #[test]
    fn spectrum_ordering() {
        let mut a = DistanceSpectrum::default();
        a.add(6, 3);
        let mut b = DistanceSpectrum::default();
        b.add(5, 1);
        assert_eq!(a.rank_cmp(&b), Ordering::Less);
        let mut c = DistanceSpectrum::default();
        c.add(6, 3);
        c.add(7, 1);
        assert_eq!(a.rank_cmp(&c), Ordering::Less);
        let mut d = DistanceSpectrum::default();
        d.add(6, 3);
        d.add(8, 1);
        assert_eq!(d.rank_cmp(&c), Ordering::Less);
        assert_eq!(a.rank_cmp(&a.clone()), Ordering::Equal);
    }

    #[test]
    fn full_length_event_gives_all_rotations() {
        let pc = v4();
        let steps = 6;
        let events: Vec<_> = collect_iee_zt(&pc, 7, steps)
            .into_iter()
            .filter(|e| e.len() == steps)
            .take(1)
            .collect();
        assert_eq!(events.len(), 1);
        let paths = reconstruct_tb_paths(&pc, &events, steps, 7);
        assert_eq!(paths.len(), steps);
        let mut seen: Vec<Vec<u32>> = (0..paths.len()).map(|i| paths.output_symbols(i)).collect();
        seen.sort();
        seen.dedup();
        assert_eq!(seen.len(), steps);
    }

    #[test]
    fn insufficient_threshold_is_reported() {
        let req = DesignRequest {
            pc: v4(),
            mode: Mode::TailBiting,
            k: 93,
            m: 3,
            d_tilde: Some(5),
            tie_break_rounds: 0,
        };
        let err = design_dso_crc(&req, evaluate_all).unwrap_err();
        assert_eq!(err, Error::InsufficientThreshold { d_tilde: 5, hint: 6 });
    }

    #[test]
    fn reference_designs() {
        for (mode, k, m, want) in [(Mode::TailBiting, 93, 3, "0x9"), (Mode::ZeroTerminated, 87, 3, "0x9")] {
            let req = DesignRequest {
                pc: v4(),
                mode,
                k,
                m,
                d_tilde: None,
                tie_break_rounds: 2,
            };
            let design = design_dso_crc(&req, evaluate_all).unwrap();
            assert_eq!(design.search.crc.to_hex(), want);
        }
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(48))]

        #[test]
        fn undetected_paths_are_exactly_the_divisible_inputs(
            m in 2usize..=5,
            middle in proptest::num::u64::ANY,
            zt in proptest::bool::ANY,
            d_tilde in 5u32..9,
        ) {
            let poly = BinaryPolynomial::from_u64((1 << m) | ((middle << 1) & ((1 << m) - 2)) | 1);
            let crc = Crc::new(&poly).unwrap();
            let req = DesignRequest {
                pc: toy(),
                mode: if zt { Mode::ZeroTerminated } else { Mode::TailBiting },
                k: 12 - m,
                m,
                d_tilde: Some(d_tilde),
                tie_break_rounds: 0,
            };
            let paths = low_weight_paths(&req, d_tilde).unwrap();
            let mut want = DistanceSpectrum::default();
            for i in 0..paths.len() {
                if crc.check(&paths.info_bits(i)) {
                    want.add(paths.weight(i), 1);
                }
            }
            proptest::prop_assert_eq!(evaluate_candidate(&paths, &poly).unwrap(), want);
        }
    }
}
