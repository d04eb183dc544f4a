//! BI-AWGN Monte Carlo evaluation and the closed-form complexity model.
//!
//! Every trial draws its data bits and noise from a ChaCha8 stream keyed by
//! `(seed, trial)`, so a trial is reproducible on its own and decoder
//! variants can be compared on identical noise. Trials run in fixed-size
//! batches on a worker pool and are folded in trial order, which makes the
//! summary independent of the number of workers.

use std::io::Write;
use std::sync::Arc;

use hrcc_core::crcdesign::DistanceSpectrum;
use hrcc_core::decoder::{
    decode_tb_multi, decode_tb_single, decode_tb_wava, decode_zt, DecodeOptions, DecodeResult, DecodeStatus,
};
use hrcc_core::encoder::{zt_encode, CodeConfig, EncoderState, Mode, TailBitingSolver};
use hrcc_core::trellis::{
    augment_root_node, build_dual_trellis, build_multi_trellis_forest, build_termination_table, build_zt_trellis,
    DualTrellis, TerminationTable,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::Error;

/// Trials per batch. Fixed so that results do not depend on worker count.
const BATCH: u64 = 256;

/// Word offset of the noise samples within a trial's stream.
const NOISE_WORD: u128 = 1 << 40;

/// Channel settings: `snr_db = 10 log10(A^2)` with unit-variance noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    pub snr_db: f64,
    pub seed: u64,
}

impl ChannelConfig {
    /// BPSK amplitude `A = 10^(snr_db / 20)`.
    pub fn amplitude(&self) -> f64 {
        amplitude(self.snr_db)
    }
}

/// BPSK amplitude for an SNR in dB.
pub fn amplitude(snr_db: f64) -> f64 {
    10f64.powf(snr_db / 20.0)
}

fn trial_stream(seed: u64, trial: u64, word: u128) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng.set_word_pos(word);
    rng
}

/// The `k` data bits of a trial.
pub fn trial_data(seed: u64, trial: u64, k: usize) -> Vec<u8> {
    let mut rng = trial_stream(seed, trial, 0);
    (0..k).map(|_| rng.gen_range(0..2u8)).collect()
}

/// BPSK-modulates `codeword` (0 maps to `+A`) and adds standard normal
/// noise drawn from the `(seed, trial)` stream.
pub fn channel_transmit(codeword: &[u8], cfg: &ChannelConfig, trial: u64) -> Vec<f64> {
    let a = cfg.amplitude();
    let mut rng = trial_stream(cfg.seed, trial, NOISE_WORD);
    codeword
        .iter()
        .map(|&b| {
            let noise: f64 = rng.sample(StandardNormal);
            if b == 0 {
                a + noise
            } else {
                -a + noise
            }
        })
        .collect()
}

/// Decoder variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Zt,
    TbSingle,
    TbMulti,
    TbWava,
}

impl Variant {
    /// Config-file spelling.
    pub fn name(self) -> &'static str {
        match self {
            Variant::Zt => "zt",
            Variant::TbSingle => "tb_single",
            Variant::TbMulti => "tb_multi",
            Variant::TbWava => "tb_wava",
        }
    }

    /// Termination mode the variant decodes.
    pub fn mode(self) -> Mode {
        match self {
            Variant::Zt => Mode::ZeroTerminated,
            _ => Mode::TailBiting,
        }
    }
}

/// When to stop simulating one SNR point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StopRule {
    #[serde(default = "default_min_errors")]
    pub min_errors: u64,
    #[serde(default = "default_max_trials")]
    pub max_trials: u64,
}

fn default_min_errors() -> u64 {
    100
}

fn default_max_trials() -> u64 {
    10_000_000
}

impl Default for StopRule {
    fn default() -> Self {
        Self {
            min_errors: default_min_errors(),
            max_trials: default_max_trials(),
        }
    }
}

/// Outcome of one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TrialRecord {
    pub trial: u64,
    /// Decoded data differs from the transmitted data, or nothing was found.
    pub error: bool,
    /// A CRC-passing path with wrong data was accepted.
    pub undetected: bool,
    /// The list ran out before a valid path was found.
    pub exhausted: bool,
    #[serde(rename = "L")]
    pub list_rank: u64,
    #[serde(rename = "I")]
    pub insertions: u64,
    pub wava_early: bool,
    pub tb: bool,
}

/// Encoder and decoder structures for one code and variant, shared by all
/// trials.
#[derive(Debug)]
pub struct Simulator {
    cfg: CodeConfig,
    variant: Variant,
    list_cap: Option<u64>,
    table: Option<Arc<TerminationTable>>,
    solver: Option<TailBitingSolver>,
    trellis: Option<DualTrellis>,
    forest: Vec<DualTrellis>,
}

impl Simulator {
    /// Builds the trellises `variant` needs.
    pub fn new(cfg: CodeConfig, variant: Variant, list_cap: Option<u64>) -> Result<Self, Error> {
        if variant.mode() != cfg.mode() {
            return Err(Error::config("decoder", "variant does not match the code mode"));
        }
        let pc = cfg.parity_check().clone();
        let n = cfg.blocklength();
        let mut sim = Self {
            cfg,
            variant,
            list_cap,
            table: None,
            solver: None,
            trellis: None,
            forest: Vec::new(),
        };
        match variant {
            Variant::Zt => {
                let table = Arc::new(build_termination_table(&pc)?);
                sim.trellis = Some(build_zt_trellis(&pc, n, table.clone())?);
                sim.table = Some(table);
            }
            Variant::TbSingle | Variant::TbWava => {
                sim.trellis = Some(augment_root_node(&build_dual_trellis(&pc, n)?)?);
            }
            Variant::TbMulti => {
                sim.forest = build_multi_trellis_forest(&pc, n)?;
            }
        }
        if variant != Variant::Zt {
            sim.solver = Some(TailBitingSolver::new(&pc, sim.cfg.steps()));
        }
        Ok(sim)
    }

    /// Code configuration.
    pub fn code(&self) -> &CodeConfig {
        &self.cfg
    }

    /// Decoder variant.
    pub fn variant(&self) -> Variant {
        self.variant
    }

    /// Encodes `data` (K bits); the start state is 0 for zero-terminated
    /// codes.
    pub fn encode(&self, data: &[u8]) -> Result<(Vec<u8>, EncoderState), Error> {
        match (&self.table, &self.solver) {
            (Some(table), _) => Ok((zt_encode(data, &self.cfg, table)?, EncoderState(0))),
            (None, Some(solver)) => Ok(solver.encode(data, &self.cfg)?),
            (None, None) => unreachable!("simulator has an encoder"),
        }
    }

    /// Decodes a received vector with amplitude `a` in the branch metric.
    pub fn decode(&self, received: &[f64], a: f64) -> Result<DecodeResult, Error> {
        let opts = DecodeOptions {
            amplitude: a,
            list_cap: self.list_cap,
        };
        let res = match self.variant {
            Variant::Zt => decode_zt(self.trellis.as_ref().expect("built"), received, &self.cfg, &opts)?,
            Variant::TbSingle => decode_tb_single(self.trellis.as_ref().expect("built"), received, &self.cfg, &opts)?,
            Variant::TbWava => decode_tb_wava(self.trellis.as_ref().expect("built"), received, &self.cfg, &opts)?,
            Variant::TbMulti => decode_tb_multi(&self.forest, received, &self.cfg, &opts)?,
        };
        Ok(res)
    }

    /// Runs trial `trial`: random data, encoding, channel, decoding.
    pub fn run_trial(&self, channel: &ChannelConfig, trial: u64) -> Result<TrialRecord, Error> {
        let data = trial_data(channel.seed, trial, self.cfg.k());
        let (codeword, _) = self.encode(&data)?;
        let received = channel_transmit(&codeword, channel, trial);
        let res = self.decode(&received, channel.amplitude())?;
        let exhausted = res.status == DecodeStatus::ListExhausted;
        let wrong = res.data.as_ref().is_some_and(|d| *d != data);
        Ok(TrialRecord {
            trial,
            error: exhausted || wrong,
            undetected: wrong,
            exhausted,
            list_rank: res.list_rank,
            insertions: res.insertions,
            wava_early: res.wava_early,
            tb: res.tb_satisfied,
        })
    }
}

/// Complexity components in units of ACS operations.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Complexity {
    pub c_ssv: f64,
    pub c_trace: f64,
    pub c_list: f64,
    /// Second ACS iteration of WAVA; zero for the other variants.
    pub c_wava: f64,
    pub c_slvd: f64,
}

fn x_log_x(x: f64) -> f64 {
    if x > 0.0 {
        x * x.log2()
    } else {
        0.0
    }
}

/// Evaluates the complexity model with unit computer constants.
///
/// `bits` is `K + m`. For WAVA, `e_l` and `e_i` are the means over trials
/// that needed the second iteration and `p_wava` is the fraction of such
/// trials; the other variants ignore `p_wava`.
pub fn complexity_model(variant: Variant, bits: usize, v: usize, e_l: f64, e_i: f64, p_wava: f64) -> Complexity {
    let b = bits as f64;
    let states = 2f64.powi(v as i32 + 1);
    let boundary = 2f64.powi(v as i32);
    let tb_trace = 3.5 * (e_l - 1.0).max(0.0) * b;
    let c_list = x_log_x(e_i);
    match variant {
        Variant::Zt => {
            let vv = v as f64;
            let c_ssv = (states - 2.0) + 1.5 * (states - 2.0) + 1.5 * (b - vv) * states + (2.0 * (b + vv) + 1.5 * b);
            let c_trace = (e_l - 1.0).max(0.0) * (2.0 * (b + vv) + 1.5 * b);
            Complexity {
                c_ssv,
                c_trace,
                c_list,
                c_wava: 0.0,
                c_slvd: c_ssv + c_trace + c_list,
            }
        }
        Variant::TbSingle => {
            let c_ssv = 1.5 * b * states + boundary + 3.5 * b;
            Complexity {
                c_ssv,
                c_trace: tb_trace,
                c_list,
                c_wava: 0.0,
                c_slvd: c_ssv + tb_trace + c_list,
            }
        }
        Variant::TbMulti => {
            let c_ssv = boundary * (1.5 * b * states) + 3.5 * b;
            Complexity {
                c_ssv,
                c_trace: tb_trace,
                c_list,
                c_wava: 0.0,
                c_slvd: c_ssv + tb_trace + c_list,
            }
        }
        Variant::TbWava => {
            let c_ssv = 1.5 * b * states + boundary + 3.5 * b;
            let c_wava = 1.5 * b * states + boundary;
            Complexity {
                c_ssv,
                c_trace: tb_trace,
                c_list,
                c_wava,
                c_slvd: c_ssv + p_wava * (c_wava + tb_trace + c_list),
            }
        }
    }
}

/// Gaussian tail probability `Q(x)`.
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// Truncated union bound on the FER: `sum_d count(d) Q(A sqrt(d))` for
/// unit-variance noise and amplitude `a`.
pub fn union_bound(spectrum: &DistanceSpectrum, a: f64) -> f64 {
    spectrum
        .iter()
        .map(|(d, c)| c as f64 * q_function(a * f64::from(d).sqrt()))
        .sum()
}

/// Aggregated statistics of one SNR point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimSummary {
    pub snr_db: f64,
    pub trials: u64,
    pub errors: u64,
    pub undetected: u64,
    pub list_exhausted: u64,
    pub fer: f64,
    /// 95% half-width (normal approximation), or the rule-of-three upper
    /// bound `3 / trials` when no error occurred.
    pub fer_ci95: f64,
    pub mean_l: f64,
    pub max_l: u64,
    pub mean_i: f64,
    /// Fraction of trials that needed WAVA's second iteration.
    pub p_wava: f64,
    pub complexity: Complexity,
}

#[derive(Debug, Clone, Default)]
struct Tally {
    trials: u64,
    errors: u64,
    undetected: u64,
    exhausted: u64,
    sum_l: u64,
    max_l: u64,
    sum_i: u64,
    late: u64,
    late_l: u64,
    late_i: u64,
}

impl Tally {
    fn add(&mut self, r: &TrialRecord) {
        self.trials += 1;
        self.errors += u64::from(r.error);
        self.undetected += u64::from(r.undetected);
        self.exhausted += u64::from(r.exhausted);
        self.sum_l += r.list_rank;
        self.max_l = self.max_l.max(r.list_rank);
        self.sum_i += r.insertions;
        if !r.wava_early {
            self.late += 1;
            self.late_l += r.list_rank;
            self.late_i += r.insertions;
        }
    }

    fn summary(&self, snr_db: f64, sim: &Simulator) -> SimSummary {
        let n = self.trials.max(1) as f64;
        let fer = self.errors as f64 / n;
        let fer_ci95 = if self.errors == 0 {
            3.0 / n
        } else {
            1.96 * (fer * (1.0 - fer) / n).sqrt()
        };
        let mean_l = self.sum_l as f64 / n;
        let mean_i = self.sum_i as f64 / n;
        let variant = sim.variant();
        let (p_wava, e_l, e_i) = if variant == Variant::TbWava {
            let late = self.late.max(1) as f64;
            (
                self.late as f64 / n,
                self.late_l as f64 / late,
                self.late_i as f64 / late,
            )
        } else {
            (0.0, mean_l, mean_i)
        };
        let code = sim.code();
        let complexity = complexity_model(variant, code.info_bits(), code.parity_check().v(), e_l, e_i, p_wava);
        SimSummary {
            snr_db,
            trials: self.trials,
            errors: self.errors,
            undetected: self.undetected,
            list_exhausted: self.exhausted,
            fer,
            fer_ci95,
            mean_l,
            max_l: self.max_l,
            mean_i,
            p_wava,
            complexity,
        }
    }
}

#[derive(Serialize)]
struct LogLine<'a> {
    snr_db: f64,
    #[serde(flatten)]
    record: &'a TrialRecord,
}

/// Simulates every SNR point until `stop` fires.
///
/// `workers` sets the thread count (0 means one per core). When `log` is
/// given, one JSON object per trial is written to it.
pub fn run_fer_simulation(
    sim: &Simulator,
    seed: u64,
    snr_points: &[f64],
    stop: StopRule,
    workers: usize,
    mut log: Option<&mut dyn Write>,
) -> Result<Vec<SimSummary>, Error> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Input(format!("cannot start worker pool: {e}")))?;
    let mut out = Vec::with_capacity(snr_points.len());
    for &snr_db in snr_points {
        let channel = ChannelConfig { snr_db, seed };
        let mut tally = Tally::default();
        let mut next = 0u64;
        'point: while next < stop.max_trials {
            let end = (next + BATCH).min(stop.max_trials);
            let records: Vec<TrialRecord> = pool.install(|| {
                (next..end)
                    .into_par_iter()
                    .map(|t| sim.run_trial(&channel, t))
                    .collect::<Result<_, _>>()
            })?;
            for r in &records {
                tally.add(r);
                if let Some(w) = log.as_deref_mut() {
                    let line = serde_json::to_string(&LogLine { snr_db, record: r }).expect("record serializes");
                    writeln!(w, "{line}").map_err(|e| Error::io("trial log", e))?;
                }
                if tally.errors >= stop.min_errors {
                    break 'point;
                }
            }
            next = end;
        }
        out.push(tally.summary(snr_db, sim));
    }
    Ok(out)
}

/// Schema line written before the CSV header.
pub const CSV_SCHEMA: &str = "# hrcc-sim-csv v1";

#[derive(Serialize)]
struct CsvRow {
    snr_db: f64,
    trials: u64,
    errors: u64,
    fer: f64,
    fer_ci95: f64,
    #[serde(rename = "mean_L")]
    mean_l: f64,
    #[serde(rename = "max_L")]
    max_l: u64,
    #[serde(rename = "mean_I")]
    mean_i: f64,
    p_wava: f64,
    c_ssv: f64,
    c_trace: f64,
    c_list: f64,
    c_slvd: f64,
    undetected: u64,
    list_exhausted: u64,
}

/// Writes summaries as versioned CSV.
pub fn write_csv<W: Write>(mut w: W, rows: &[SimSummary]) -> Result<(), Error> {
    writeln!(w, "{CSV_SCHEMA}").map_err(|e| Error::io("csv", e))?;
    let mut csv = csv::Writer::from_writer(w);
    for s in rows {
        csv.serialize(CsvRow {
            snr_db: s.snr_db,
            trials: s.trials,
            errors: s.errors,
            fer: s.fer,
            fer_ci95: s.fer_ci95,
            mean_l: s.mean_l,
            max_l: s.max_l,
            mean_i: s.mean_i,
            p_wava: s.p_wava,
            c_ssv: s.complexity.c_ssv,
            c_trace: s.complexity.c_trace,
            c_list: s.complexity.c_list,
            c_slvd: s.complexity.c_slvd,
            undetected: s.undetected,
            list_exhausted: s.list_exhausted,
        })
        .map_err(|e| Error::Input(format!("csv: {e}")))?;
    }
    csv.flush().map_err(|e| Error::io("csv", e))?;
    Ok(())
}
