//! The dual trellis of a rate-(n-1)/n parity-check matrix.
//!
//! Dual states are the `v + 1` partial sums of the observer canonical form,
//! packed with bit `i` = `s_i`. Within a primal step, stage `j` consumes code
//! bit `y^(j)` and adds `y^(j) h^(j)` to the state; the last stage also
//! shifts right by one. At stage `lambda` the only branch is the one that
//! clears `s_0`, which leaves at most two branches out of any state.
//!
//! The structure is time invariant, so it is stored once as a [`Period`] of
//! `n` transition tables. A [`DualTrellis`] adds the length, the start/end
//! pinning, an optional zero-termination restriction and an optional root
//! node on top of a shared period.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::encoder::{termination_steps, ParityCheck};
use crate::Error;

/// Marker for an absent state in transition tables.
pub const NO_STATE: u16 = u16::MAX;
const NO_BRANCH: u8 = u8::MAX;

/// Maximum instant response order: the largest rail index whose parity
/// polynomial has a constant term.
pub fn compute_lambda(pc: &ParityCheck) -> Result<usize, Error> {
    pc.rails()
        .iter()
        .rposition(|h| h & 1 == 1)
        .ok_or(Error::UndefinedDualTrellis)
}

/// One primal step worth of dual-trellis stages.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Period {
    n: usize,
    v: usize,
    lambda: usize,
    rails: Vec<u64>,
    /// `next[(j * S + s) * 2 + y]`: successor at layer `j + 1`.
    next: Vec<u16>,
    /// `prev[(j * S + s) * 2 + y]`: predecessor at layer `j` of state `s` at
    /// layer `j + 1` through the branch labelled `y`.
    prev: Vec<u16>,
    /// `live[j * S + s]`: state `s` occurs at layer `j`.
    live: Vec<bool>,
}

impl Period {
    /// Builds the transition tables for `pc`.
    pub fn new(pc: &ParityCheck) -> Result<Self, Error> {
        let lambda = compute_lambda(pc)?;
        let n = pc.n();
        let v = pc.v();
        let size = 1usize << (v + 1);
        let mut next = vec![NO_STATE; n * size * 2];
        let mut prev = vec![NO_STATE; n * size * 2];
        let mut live = vec![false; (n + 1) * size];
        // Layer 0 holds only the boundary states, those with s_v = 0.
        live[..size / 2].iter_mut().for_each(|l| *l = true);
        for j in 0..n {
            let h = pc.rail(j);
            for s in 0..size {
                if !live[j * size + s] {
                    continue;
                }
                for y in 0..2u64 {
                    if j == lambda && y != s as u64 & 1 {
                        continue;
                    }
                    let mut u = s as u64 ^ (y * h);
                    if j == n - 1 {
                        if u & 1 == 1 {
                            continue;
                        }
                        u >>= 1;
                    }
                    let u = u as usize;
                    next[(j * size + s) * 2 + y as usize] = u as u16;
                    let back = &mut prev[(j * size + u) * 2 + y as usize];
                    debug_assert_eq!(*back, NO_STATE);
                    *back = s as u16;
                    live[(j + 1) * size + u] = true;
                }
            }
        }
        live.truncate(n * size);
        Ok(Self {
            n,
            v,
            lambda,
            rails: pc.rails().to_vec(),
            next,
            prev,
            live,
        })
    }

    /// Stages per primal step.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Overall constraint length.
    pub fn v(&self) -> usize {
        self.v
    }

    /// Stage with forced branches.
    pub fn lambda(&self) -> usize {
        self.lambda
    }

    /// `h^(j)` packed as an integer.
    pub fn rail(&self, j: usize) -> u64 {
        self.rails[j]
    }

    /// Size of the dual state space, `2^(v+1)`.
    pub fn num_states(&self) -> usize {
        1 << (self.v + 1)
    }

    /// Number of boundary states, `2^v`.
    pub fn boundary_states(&self) -> usize {
        1 << self.v
    }

    /// Whether `state` occurs at layer `j` of the period.
    pub fn is_live(&self, j: usize, state: usize) -> bool {
        self.live[j * self.num_states() + state]
    }

    /// Successor of `state` at layer `j` through branch `y`.
    #[inline]
    pub fn next(&self, j: usize, state: usize, y: usize) -> Option<usize> {
        let s = self.next[(j * self.num_states() + state) * 2 + y];
        (s != NO_STATE).then_some(s as usize)
    }

    /// Predecessor at layer `j` of `state` at layer `j + 1` through branch `y`.
    #[inline]
    pub fn prev(&self, j: usize, state: usize, y: usize) -> Option<usize> {
        let s = self.prev[(j * self.num_states() + state) * 2 + y];
        (s != NO_STATE).then_some(s as usize)
    }
}

/// Zero-termination trajectories for every boundary state.
///
/// The trajectory from a state is the lexicographically smallest output
/// sequence (in stage order) that reaches state 0 after exactly
/// `n * ceil(v / (n-1))` stages. Because that choice only depends on the
/// current dual state, it is stored as a per-stage branch policy, which is
/// also what the zero-terminated trellis uses to restrict its tail. The
/// policy is linear in the state, so zero-terminated encoding stays linear.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TerminationTable {
    n: usize,
    steps: usize,
    size: usize,
    /// `policy[o * size + s]`: branch label at termination stage `o`, or
    /// `NO_BRANCH` where state 0 is unreachable.
    policy: Vec<u8>,
    inputs: Vec<Vec<u8>>,
    outputs: Vec<Vec<u8>>,
}

impl TerminationTable {
    /// Primal steps spent terminating.
    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Termination input bits for `state`, `(n-1) * steps` long.
    pub fn inputs(&self, state: u32) -> &[u8] {
        &self.inputs[state as usize]
    }

    /// Termination output bits for `state`, `n * steps` long.
    pub fn outputs(&self, state: u32) -> &[u8] {
        &self.outputs[state as usize]
    }

    /// The single branch allowed out of `state` at termination stage
    /// `offset`, if any.
    #[inline]
    pub fn branch(&self, offset: usize, state: usize) -> Option<usize> {
        let y = self.policy[offset * self.size + state];
        (y != NO_BRANCH).then_some(y as usize)
    }

    /// Number of dual stages covered.
    pub fn stages(&self) -> usize {
        self.steps * self.n
    }
}

/// Builds the zero-termination table by a backward breadth-first sweep from
/// state 0 over the dual stages of the termination window.
pub fn build_termination_table(pc: &ParityCheck) -> Result<TerminationTable, Error> {
    let period = Period::new(pc)?;
    let n = period.n();
    let size = period.num_states();
    let steps = termination_steps(pc);
    let stages = steps * n;
    let mut policy = vec![NO_BRANCH; stages * size];
    let mut reach = vec![false; size];
    reach[0] = true;
    for o in (0..stages).rev() {
        let j = o % n;
        let mut here = vec![false; size];
        for s in (0..size).filter(|&s| period.is_live(j, s)) {
            let choice = (0..2).find(|&y| period.next(j, s, y).is_some_and(|t| reach[t]));
            if let Some(y) = choice {
                policy[o * size + s] = y as u8;
                here[s] = true;
            }
        }
        reach = here;
    }
    let mut inputs = Vec::with_capacity(period.boundary_states());
    let mut outputs = Vec::with_capacity(period.boundary_states());
    for (start, &ok) in reach.iter().enumerate().take(period.boundary_states()) {
        if !ok {
            return Err(Error::Unterminable { state: start as u32 });
        }
        let mut s = start;
        let mut out = Vec::with_capacity(stages);
        for o in 0..stages {
            let y = policy[o * size + s] as usize;
            out.push(y as u8);
            s = period.next(o % n, s, y).expect("policy follows live branches");
        }
        debug_assert_eq!(s, 0);
        inputs.push(crate::encoder::systematic_bits(pc, &out, steps));
        outputs.push(out);
    }
    Ok(TerminationTable {
        n,
        steps,
        size,
        policy,
        inputs,
        outputs,
    })
}

/// A dual trellis of fixed length over a shared [`Period`].
#[derive(Debug, Clone)]
pub struct DualTrellis {
    period: Arc<Period>,
    steps: usize,
    start: Option<usize>,
    end: Option<usize>,
    termination: Option<Arc<TerminationTable>>,
    root: bool,
}

impl DualTrellis {
    /// Shared transition tables.
    pub fn period(&self) -> &Period {
        &self.period
    }

    /// Shared transition tables, as the reference-counted handle.
    pub fn period_handle(&self) -> &Arc<Period> {
        &self.period
    }

    /// Number of dual stages `N`.
    pub fn stages(&self) -> usize {
        self.steps * self.period.n
    }

    /// Number of primal steps `N / n`.
    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Size of the dual state space.
    pub fn num_states(&self) -> usize {
        self.period.num_states()
    }

    /// Pinned start state, if any; otherwise every boundary state may start.
    pub fn start(&self) -> Option<usize> {
        self.start
    }

    /// Pinned end state, if any.
    pub fn end(&self) -> Option<usize> {
        self.end
    }

    /// Whether a root node collects every final boundary state.
    pub fn has_root(&self) -> bool {
        self.root
    }

    /// Zero-termination restriction, if any.
    pub fn termination(&self) -> Option<&TerminationTable> {
        self.termination.as_deref()
    }

    /// States allowed at layer 0.
    pub fn start_states(&self) -> impl Iterator<Item = usize> + '_ {
        let all = 0..self.period.boundary_states();
        all.filter(move |&s| self.start.is_none_or(|p| p == s))
    }

    /// States that terminate a path at layer `N`.
    pub fn end_states(&self) -> impl Iterator<Item = usize> + '_ {
        let all = 0..self.period.boundary_states();
        all.filter(move |&s| self.end.is_none_or(|p| p == s))
    }

    fn termination_offset(&self, branch: usize) -> Option<(usize, &TerminationTable)> {
        let table = self.termination.as_deref()?;
        let first = self.stages() - table.stages();
        (branch >= first).then(|| (branch - first, table))
    }

    /// Successor of `state` at layer `branch` through label `y`.
    #[inline]
    pub fn next(&self, branch: usize, state: usize, y: usize) -> Option<usize> {
        if let Some((o, table)) = self.termination_offset(branch) {
            if table.branch(o, state) != Some(y) {
                return None;
            }
        }
        self.period.next(branch % self.period.n, state, y)
    }

    /// Predecessor at layer `branch` of `state` at layer `branch + 1`
    /// through label `y`.
    #[inline]
    pub fn prev(&self, branch: usize, state: usize, y: usize) -> Option<usize> {
        let p = self.period.prev(branch % self.period.n, state, y)?;
        if let Some((o, table)) = self.termination_offset(branch) {
            if table.branch(o, p) != Some(y) {
                return None;
            }
        }
        Some(p)
    }
}

/// The unconstrained dual trellis of `N` stages: any boundary start state,
/// any boundary end state, no root node.
pub fn build_dual_trellis(pc: &ParityCheck, blocklength: usize) -> Result<DualTrellis, Error> {
    let period = Arc::new(Period::new(pc)?);
    trellis_over(period, blocklength)
}

fn trellis_over(period: Arc<Period>, blocklength: usize) -> Result<DualTrellis, Error> {
    if blocklength == 0 || !blocklength.is_multiple_of(period.n) {
        return Err(Error::InvalidConfig("blocklength must be a positive multiple of n"));
    }
    Ok(DualTrellis {
        steps: blocklength / period.n,
        period,
        start: None,
        end: None,
        termination: None,
        root: false,
    })
}

/// Dual trellis of a zero-terminated code: starts and ends in state 0 and
/// follows `table` through the last `table.steps()` primal steps.
pub fn build_zt_trellis(
    pc: &ParityCheck,
    blocklength: usize,
    table: Arc<TerminationTable>,
) -> Result<DualTrellis, Error> {
    let mut t = build_dual_trellis(pc, blocklength)?;
    if table.stages() > t.stages() {
        return Err(Error::InvalidConfig("blocklength shorter than the termination"));
    }
    t.start = Some(0);
    t.end = Some(0);
    t.termination = Some(table);
    Ok(t)
}

/// Adds a root node fed by zero-metric branches from every final boundary
/// state.
pub fn augment_root_node(t: &DualTrellis) -> Result<DualTrellis, Error> {
    if t.root {
        return Err(Error::InvalidConfig("trellis already has a root node"));
    }
    let mut out = t.clone();
    out.root = true;
    Ok(out)
}

/// One trellis per boundary state `sigma`, each admitting only the paths
/// that start and end in `sigma`. All share a single period.
pub fn build_multi_trellis_forest(pc: &ParityCheck, blocklength: usize) -> Result<Vec<DualTrellis>, Error> {
    let base = build_dual_trellis(pc, blocklength)?;
    Ok((0..base.period.boundary_states())
        .map(|sigma| DualTrellis {
            start: Some(sigma),
            end: Some(sigma),
            ..base.clone()
        })
        .collect())
}

/// Every output sequence of `t` together with its start and end state, by
/// depth-first enumeration. Exponential; for small trellises only.
pub fn enumerate_paths(t: &DualTrellis) -> Vec<(usize, Vec<u8>, usize)> {
    fn walk(
        t: &DualTrellis,
        b: usize,
        s: usize,
        start: usize,
        bits: &mut Vec<u8>,
        out: &mut Vec<(usize, Vec<u8>, usize)>,
    ) {
        if b == t.stages() {
            if t.end.is_none_or(|e| e == s) {
                out.push((start, bits.clone(), s));
            }
            return;
        }
        for y in 0..2 {
            if let Some(nx) = t.next(b, s, y) {
                bits.push(y as u8);
                walk(t, b + 1, nx, start, bits, out);
                bits.pop();
            }
        }
    }
    let mut out = Vec::new();
    let mut bits = Vec::with_capacity(t.stages());
    for s in t.start_states().collect::<Vec<_>>() {
        walk(t, 0, s, s, &mut bits, &mut out);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::BinaryPolynomial;
    use crate::encoder::{encode_from, final_state, zt_encode, CodeConfig, Mode};
    use alloc::collections::BTreeSet;

    fn toy() -> ParityCheck {
        ParityCheck::from_octal("2,5,7,6").unwrap()
    }

    fn v4() -> ParityCheck {
        ParityCheck::from_octal("33,25,37,31").unwrap()
    }

    #[test]
    fn lambda_examples() {
        let pc = ParityCheck::from_octal("17,15,13").unwrap();
        assert_eq!(compute_lambda(&pc).unwrap(), 2);
        assert_eq!(compute_lambda(&toy()).unwrap(), 2);
        assert_eq!(compute_lambda(&ParityCheck::from_octal("2,6,4,3").unwrap()).unwrap(), 0);
        assert_eq!(compute_lambda(&v4()).unwrap(), 3);
    }

    #[test]
    fn toy_period_structure() {
        let p = Period::new(&toy()).unwrap();
        assert_eq!(p.num_states(), 8);
        assert_eq!(p.boundary_states(), 4);
        for j in 0..p.n() {
            for s in (0..8).filter(|&s| p.is_live(j, s)) {
                let out = (0..2).filter(|&y| p.next(j, s, y).is_some()).count();
                if j == p.lambda() {
                    assert_eq!(out, 1, "stage {j} state {s}");
                } else {
                    assert_eq!(out, 2, "stage {j} state {s}");
                }
                // y = 0 leaves the state unchanged before the shift stage.
                if j < p.n() - 1 && j != p.lambda() {
                    assert_eq!(p.next(j, s, 0), Some(s));
                }
            }
        }
        // h^(0) = 110b has s_v terms, so layer 1 reaches all 8 states.
        assert_eq!((0..8).filter(|&s| p.is_live(1, s)).count(), 8);
        // Boundary layer holds exactly the states with s_v = 0.
        assert!((0..8).all(|s| p.is_live(0, s) == (s < 4)));
    }

    #[test]
    fn incoming_degree_at_most_two() {
        for pc in [toy(), v4(), ParityCheck::from_octal("107,135,133,141").unwrap()] {
            let p = Period::new(&pc).unwrap();
            for j in 0..p.n() {
                for s in 0..p.num_states() {
                    for y in 0..2 {
                        if let Some(q) = p.prev(j, s, y) {
                            assert_eq!(p.next(j, q, y), Some(s));
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn termination_table_replays_to_zero() {
        for pc in [toy(), v4(), ParityCheck::from_octal("47,73,57,75").unwrap()] {
            let table = build_termination_table(&pc).unwrap();
            assert_eq!(table.steps(), pc.v().div_ceil(pc.n() - 1));
            for s in 0..pc.num_states() as u32 {
                assert_eq!(table.inputs(s).len(), (pc.n() - 1) * table.steps());
                let (out, end) = encode_from(&pc, s, table.inputs(s));
                assert_eq!(end, 0);
                assert_eq!(out, table.outputs(s));
            }
            assert!(table.outputs(0).iter().all(|&b| b == 0));
        }
        let table = build_termination_table(&v4()).unwrap();
        assert_eq!(table.steps(), 2);
        assert_eq!(table.inputs(5).len(), 6);
    }

    #[test]
    fn termination_is_linear_in_state() {
        let pc = v4();
        let table = build_termination_table(&pc).unwrap();
        for a in 0..16u32 {
            for b in 0..16u32 {
                let sum: Vec<u8> = table
                    .inputs(a)
                    .iter()
                    .zip(table.inputs(b))
                    .map(|(x, y)| x ^ y)
                    .collect();
                assert_eq!(table.inputs(a ^ b), &sum[..]);
            }
        }
    }

    #[test]
    fn root_and_forest_shapes() {
        let t = build_dual_trellis(&toy(), 12).unwrap();
        let rooted = augment_root_node(&t).unwrap();
        assert!(rooted.has_root());
        assert_eq!(rooted.end_states().count(), 4);
        assert!(augment_root_node(&rooted).is_err());
        let forest = build_multi_trellis_forest(&toy(), 12).unwrap();
        assert_eq!(forest.len(), 4);
        for (sigma, tr) in forest.iter().enumerate() {
            assert_eq!(tr.start_states().collect::<Vec<_>>(), vec![sigma]);
            assert!(!tr.has_root());
        }
        assert!(build_dual_trellis(&toy(), 10).is_err());
    }

    #[test]
    fn toy_zt_paths_equal_encoder_codebook() {
        let pc = toy();
        let crc = BinaryPolynomial::from_u64(0b1001);
        // K + m = 6 information bits, two steps plus one termination step.
        let cfg = CodeConfig::new(pc.clone(), 3, &crc, Mode::ZeroTerminated).unwrap();
        let table = Arc::new(build_termination_table(&pc).unwrap());
        let t = build_zt_trellis(&pc, cfg.blocklength(), table.clone()).unwrap();
        let trellis: BTreeSet<Vec<u8>> = enumerate_paths(&t).into_iter().map(|p| p.1).collect();
        let mut codebook = BTreeSet::new();
        for msg in 0..64u32 {
            let info: Vec<u8> = (0..6).map(|i| ((msg >> (5 - i)) & 1) as u8).collect();
            let (mut cw, s) = encode_from(&pc, 0, &info);
            cw.extend_from_slice(table.outputs(s));
            codebook.insert(cw);
        }
        assert_eq!(codebook.len(), 64);
        assert_eq!(trellis, codebook);
        // The CRC subset is what zt_encode produces.
        let data_words: BTreeSet<Vec<u8>> = (0..8u32)
            .map(|d| {
                let data: Vec<u8> = (0..3).map(|i| ((d >> (2 - i)) & 1) as u8).collect();
                zt_encode(&data, &cfg, &table).unwrap()
            })
            .collect();
        assert!(data_words.is_subset(&trellis));
    }

    #[test]
    fn toy_forest_paths_are_tail_biting_codebook() {
        let pc = toy();
        let steps = 2;
        let forest = build_multi_trellis_forest(&pc, steps * 4).unwrap();
        let mut from_forest = BTreeSet::new();
        for (sigma, t) in forest.iter().enumerate() {
            for (s0, bits, s1) in enumerate_paths(t) {
                assert_eq!((s0, s1), (sigma, sigma));
                assert!(from_forest.insert(bits));
            }
        }
        let mut codebook = BTreeSet::new();
        for info in 0..64u32 {
            let info: Vec<u8> = (0..6).map(|i| ((info >> (5 - i)) & 1) as u8).collect();
            for s in 0..4 {
                if final_state(&pc, s, &info) == s {
                    codebook.insert(encode_from(&pc, s, &info).0);
                }
            }
        }
        assert_eq!(from_forest, codebook);
        // All-zero path only in trellis 0.
        for (sigma, t) in forest.iter().enumerate() {
            let has_zero = enumerate_paths(t).iter().any(|p| p.1.iter().all(|&b| b == 0));
            assert_eq!(has_zero, sigma == 0);
        }
    }

    /// Parity-check matrices with n in 2..=4 and v in 1..=3.
    fn parity_checks() -> impl proptest::strategy::Strategy<Value = ParityCheck> {
        use proptest::prelude::*;
        (2usize..=4, 1u32..=3)
            .prop_flat_map(|(n, v)| proptest::collection::vec(0u64..1 << (v + 1), n))
            .prop_filter_map("valid parity check", |rails| {
                let text: alloc::vec::Vec<alloc::string::String> =
                    rails.iter().map(|r| alloc::format!("{r:o}")).collect();
                ParityCheck::from_octal(&text.join(",")).ok()
            })
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(64))]

        #[test]
        fn branch_and_stage_counts(pc in parity_checks(), steps in 1usize..4) {
            let p = Period::new(&pc).unwrap();
            for j in 0..p.n() {
                for s in (0..p.num_states()).filter(|&s| p.is_live(j, s)) {
                    let out = (0..2).filter(|&y| p.next(j, s, y).is_some()).count();
                    proptest::prop_assert_eq!(out, if j == p.lambda() { 1 } else { 2 }, "stage {} state {}", j, s);
                }
            }
            let t = build_dual_trellis(&pc, steps * pc.n()).unwrap();
            proptest::prop_assert_eq!(t.stages(), steps * pc.n());
            proptest::prop_assert_eq!(t.steps(), steps);
        }

        #[test]
        fn zt_paths_equal_primal_codebook(pc in parity_checks(), info_steps in 1usize..=3) {
            let Ok(table) = build_termination_table(&pc) else {
                return Ok(());
            };
            let table = Arc::new(table);
            let bits = info_steps * (pc.n() - 1);
            let t = build_zt_trellis(&pc, (info_steps + table.steps()) * pc.n(), table.clone()).unwrap();
            let mut trellis: alloc::vec::Vec<_> = enumerate_paths(&t).into_iter().map(|p| p.1).collect();
            let mut primal: alloc::vec::Vec<_> = (0..1u32 << bits)
                .map(|x| {
                    let info: alloc::vec::Vec<u8> = (0..bits).map(|i| ((x >> (bits - 1 - i)) & 1) as u8).collect();
                    let (mut cw, s) = encode_from(&pc, 0, &info);
                    cw.extend_from_slice(table.outputs(s));
                    cw
                })
                .collect();
            trellis.sort();
            primal.sort();
            proptest::prop_assert_eq!(trellis, primal);
        }
    }
}
