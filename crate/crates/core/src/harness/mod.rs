//! Seeded Monte Carlo engine: BLER sweeps, SE traces, noiseless recovery
//! tables and bound curves, with CSV emission.
//!
//! Every trial draws its message, fading and noise (in that order) from the
//! stream keyed by `(seed, point, trial)`, so all decoders at a point see the
//! same data and results do not depend on thread count.

mod config;

use std::io::Write;
use std::time::Instant;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

pub use config::{
    ChannelConfig, DecoderKind, DecoderSpec, DictionarySource, SeModeConfig, SimConfig, SweepConfig, SCHEMA_VERSION,
};

use crate::bounds::{coherent_spb, spb_power, SpbConfig};
use crate::channel::{ebn0_to_sigma_v, sample_channel, transmit, ChannelRealization, Observation};
use crate::codec::{encode, to_codeword, SupportSet};
use crate::decoders::{bomp_with, mbomp_with, ml_bruteforce, mlmp_with, pmlmp_with, Correlations, DecoderConfig};
use crate::dictionary::{build_mub_prime, Dictionary};
use crate::error::{Error, Result};
use crate::rng::StreamKey;
use crate::samp::{samp_decode, samp_decode_observed, se_offline, SampParams, SeConfig, SeSchedule};

/// Records with fewer block errors than this are flagged `low_confidence`.
pub const MIN_CONFIDENT_ERRORS: u64 = 10;

/// Trial index reserved for per-point auxiliary streams (offline SE).
const AUX_STREAM: u64 = u64::MAX;

pub const BLER_CSV_HEADER: [&str; 9] = [
    "config_id",
    "decoder",
    "ebn0_db",
    "trials",
    "block_errors",
    "bler",
    "wall_seconds",
    "seed",
    "low_confidence",
];

pub const SE_CSV_HEADER: [&str; 3] = ["t", "tau_sq_predicted", "tau_sq_empirical"];

pub const THEOREM1_CSV_HEADER: [&str; 7] = ["p", "k", "bound", "within_bound", "trials", "failures", "pass"];

pub const BOUND_CSV_HEADER: [&str; 2] = ["ebn0_db", "pe_lower_bound"];

/// Formats a float with 10 significant digits, like C's `%.10g`.
pub fn fmt_float(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".into() } else { x.to_string() };
    }
    let exp = x.abs().log10().floor() as i32;
    let sci = format!("{x:.9e}");
    // Rounding may carry into the next decade; re-read the exponent.
    let exp = sci
        .rsplit_once('e')
        .and_then(|(_, e)| e.parse::<i32>().ok())
        .unwrap_or(exp);
    if (-5..10).contains(&exp) {
        let decimals = (9 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}"))
    } else {
        let (mantissa, e) = sci.split_once('e').expect("scientific format");
        let sign = if e.starts_with('-') { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa), e.trim_start_matches('-').parse::<i32>().unwrap_or(0))
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

/// One transmitted block.
#[derive(Debug, Clone)]
pub struct TrialData {
    pub bits: Vec<bool>,
    pub support: SupportSet,
    pub channel: ChannelRealization,
    pub y: Observation,
}

/// Draws message bits, fading and noise for `key`, in that order.
pub fn generate_trial(
    dict: &Dictionary,
    key: StreamKey,
    antennas: usize,
    sigma_h_sq: f64,
    sigma_v_sq: f64,
) -> Result<TrialData> {
    let mut rng = key.rng();
    let bits: Vec<bool> = (0..dict.plan().total_bits()).map(|_| rng.random()).collect();
    let support = encode(&bits, dict)?;
    let channel = sample_channel(antennas, sigma_h_sq, &mut rng)?;
    let y = transmit(&to_codeword(&support, dict), &channel, sigma_v_sq, &mut rng)?;
    Ok(TrialData {
        bits,
        support,
        channel,
        y,
    })
}

/// Noise variance at `ebn0_db` with the nominal codeword energy `E_s = K`.
pub fn sigma_v_sq_for(dict: &Dictionary, ebn0_db: f64) -> f64 {
    ebn0_to_sigma_v(ebn0_db, dict.plan().total_bits(), dict.n_sections() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlerRecord {
    pub config_id: String,
    pub decoder: String,
    pub ebn0_db: f64,
    pub trials: u64,
    pub block_errors: u64,
    pub bler: f64,
    /// Summed decode time over all trials of this record.
    pub wall_seconds: f64,
    pub seed: u64,
    pub low_confidence: bool,
}

impl BlerRecord {
    pub fn wilson_interval(&self, z: f64) -> (f64, f64) {
        wilson_interval(self.block_errors, self.trials, z)
    }
}

/// Wilson score interval for `errors / trials` at normal quantile `z`.
pub fn wilson_interval(errors: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = errors as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// `Eb/N0` at which a BLER curve crosses `target`, by linear interpolation
/// of `log10(BLER)` between the first bracketing pair of points. Points with
/// zero errors are skipped.
pub fn ebn0_at_bler(curve: &[(f64, f64)], target: f64) -> Option<f64> {
    let mut pts: Vec<(f64, f64)> = curve.iter().copied().filter(|&(_, b)| b > 0.0).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let lt = target.log10();
    pts.windows(2).find_map(|w| {
        let ((x0, b0), (x1, b1)) = (w[0], w[1]);
        let (l0, l1) = (b0.log10(), b1.log10());
        if (l0 - lt) * (l1 - lt) > 0.0 || l0 == l1 {
            return None;
        }
        Some(x0 + (lt - l0) * (x1 - x0) / (l1 - l0))
    })
}

enum Prepared {
    Greedy { kind: DecoderKind, cfg: DecoderConfig },
    Samp { params: SampParams, schedule: SeSchedule },
}

impl Prepared {
    fn new(spec: &DecoderSpec, dict: &Dictionary, cfg: &SimConfig, point: usize, sigma_v_sq: f64) -> Result<Self> {
        let sigma_h_sq = cfg.sigma_h_sq();
        if spec.kind != DecoderKind::Samp {
            return Ok(Prepared::Greedy {
                kind: spec.kind,
                cfg: DecoderConfig::new(sigma_h_sq, sigma_v_sq, spec.paths)?,
            });
        }
        let params = SampParams::new(sigma_h_sq, sigma_v_sq)?;
        let schedule = match spec.se {
            SeModeConfig::Online => SeSchedule::online(spec.t_max, spec.rel_tol)?,
            SeModeConfig::Offline => {
                let se_cfg = SeConfig {
                    n_mc: spec.se_draws,
                    t_max: spec.t_max,
                    rel_tol: spec.rel_tol,
                    ..SeConfig::new(sigma_h_sq, sigma_v_sq, cfg.channel.antennas)
                };
                let mut rng = StreamKey::new(cfg.seed, point as u64, AUX_STREAM).rng();
                se_offline(dict, &se_cfg, &mut rng)?
            }
        };
        let schedule = match spec.iterations {
            Some(it) => schedule.with_forced_iterations(it),
            None => schedule,
        };
        Ok(Prepared::Samp { params, schedule })
    }

    fn is_greedy(&self) -> bool {
        matches!(self, Prepared::Greedy { .. })
    }

    /// Decoded support; SAMP divergence is reported as `None`.
    fn decode(&self, y: &Observation, corr: Option<&Correlations>, dict: &Dictionary) -> Result<Option<SupportSet>> {
        let result = match self {
            Prepared::Greedy { kind, cfg } => {
                let corr = corr.expect("correlations for greedy decoders");
                match kind {
                    DecoderKind::Mlmp if cfg.paths == 1 => mlmp_with(corr, dict, cfg),
                    DecoderKind::Mlmp => pmlmp_with(corr, dict, cfg),
                    DecoderKind::Bomp => bomp_with(corr, dict, cfg),
                    DecoderKind::Mbomp => mbomp_with(corr, dict, cfg),
                    DecoderKind::Bruteforce => ml_bruteforce(y, dict, cfg),
                    DecoderKind::Samp => unreachable!("handled by the Samp variant"),
                }
            }
            Prepared::Samp { params, schedule } => samp_decode(y, dict, params, schedule),
        };
        match result {
            Ok(r) => Ok(Some(r.support)),
            Err(e @ Error::Divergence { .. }) => {
                log::warn!("{e}; counted as a block error");
                Ok(None)
            }
            Err(e) => Err(e),
        }
    }
}

/// Per-decoder outcome of one trial: `(block error, seconds)`, or `None` if
/// the decoder had already stopped when the batch started.
type TrialOutcome = Vec<Option<(bool, f64)>>;

/// Runs the configured sweep on a freshly built dictionary.
pub fn run_bler_sweep(cfg: &SimConfig) -> Result<Vec<BlerRecord>> {
    let dict = cfg.build_dictionary()?;
    run_bler_sweep_on(cfg, &dict)
}

/// Runs the sweep on a prebuilt dictionary. Records are ordered by grid
/// point, then by decoder as listed in the config.
///
/// Each decoder stops independently once it has `min_errors` block errors
/// or `max_trials` trials. Trials run in parallel batches but are
/// aggregated in trial order, so the stopping point is exact and
/// independent of scheduling.
pub fn run_bler_sweep_on(cfg: &SimConfig, dict: &Dictionary) -> Result<Vec<BlerRecord>> {
    cfg.validate()?;
    let d = cfg.channel.antennas;
    let sigma_h_sq = cfg.sigma_h_sq();
    let mut records = Vec::new();
    for (point, &ebn0_db) in cfg.sweep.ebn0_db.iter().enumerate() {
        let sigma_v_sq = sigma_v_sq_for(dict, ebn0_db);
        let decoders = cfg
            .decoders
            .iter()
            .map(|spec| Prepared::new(spec, dict, cfg, point, sigma_v_sq))
            .collect::<Result<Vec<_>>>()?;
        let n_dec = decoders.len();
        let mut trials = vec![0u64; n_dec];
        let mut errors = vec![0u64; n_dec];
        let mut seconds = vec![0f64; n_dec];
        let done = |t: u64, e: u64| t >= cfg.sweep.max_trials || e >= cfg.sweep.min_errors;
        let mut next = 0u64;
        while (0..n_dec).any(|j| !done(trials[j], errors[j])) {
            let active: Vec<bool> = (0..n_dec).map(|j| !done(trials[j], errors[j])).collect();
            let end = (next + cfg.sweep.batch as u64).min(cfg.sweep.max_trials);
            let outcomes: Vec<TrialOutcome> = (next..end)
                .into_par_iter()
                .map(|trial| {
                    let key = StreamKey::new(cfg.seed, point as u64, trial);
                    let data = generate_trial(dict, key, d, sigma_h_sq, sigma_v_sq)?;
                    decode_trial(&decoders, &active, &data, dict)
                })
                .collect::<Result<_>>()?;
            for outcome in outcomes {
                for (j, o) in outcome.into_iter().enumerate() {
                    if let Some((err, secs)) = o {
                        if !done(trials[j], errors[j]) {
                            trials[j] += 1;
                            errors[j] += err as u64;
                            seconds[j] += secs;
                        }
                    }
                }
            }
            next = end;
        }
        for (j, spec) in cfg.decoders.iter().enumerate() {
            records.push(BlerRecord {
                config_id: cfg.config_id.clone(),
                decoder: spec.label(),
                ebn0_db,
                trials: trials[j],
                block_errors: errors[j],
                bler: errors[j] as f64 / trials[j] as f64,
                wall_seconds: seconds[j],
                seed: cfg.seed,
                low_confidence: errors[j] < MIN_CONFIDENT_ERRORS,
            });
            log::info!(
                "{} {} dB: {}/{} block errors",
                spec.label(),
                ebn0_db,
                errors[j],
                trials[j]
            );
        }
    }
    Ok(records)
}

fn decode_trial(decoders: &[Prepared], active: &[bool], data: &TrialData, dict: &Dictionary) -> Result<TrialOutcome> {
    let needs_corr = decoders.iter().zip(active).any(|(p, &a)| a && p.is_greedy());
    let start = Instant::now();
    let corr = needs_corr.then(|| Correlations::new(&data.y, dict));
    // Standalone, every greedy decoder would pay for A^H Y itself.
    let corr_secs = start.elapsed().as_secs_f64();
    decoders
        .iter()
        .zip(active)
        .map(|(p, &a)| {
            if !a {
                return Ok(None);
            }
            let start = Instant::now();
            let support = p.decode(&data.y, corr.as_ref(), dict)?;
            let mut secs = start.elapsed().as_secs_f64();
            if p.is_greedy() {
                secs += corr_secs;
            }
            Ok(Some((support.as_ref() != Some(&data.support), secs)))
        })
        .collect()
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Io(std::io::Error::other(format!("{other:?}"))),
    }
}

fn write_rows<W: Write, const C: usize>(out: W, header: [&str; C], rows: impl Iterator<Item = [String; C]>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header).map_err(csv_error)?;
    for row in rows {
        w.write_record(&row).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes BLER records under [`BLER_CSV_HEADER`]; `include_wall` false
/// blanks the timing column so outputs can be compared byte for byte.
pub fn write_bler_csv<W: Write>(records: &[BlerRecord], out: W, include_wall: bool) -> Result<()> {
    write_rows(
        out,
        BLER_CSV_HEADER,
        records.iter().map(|r| {
            [
                r.config_id.clone(),
                r.decoder.clone(),
                fmt_float(r.ebn0_db),
                r.trials.to_string(),
                r.block_errors.to_string(),
                fmt_float(r.bler),
                if include_wall { fmt_float(r.wall_seconds) } else { String::new() },
                r.seed.to_string(),
                r.low_confidence.to_string(),
            ]
        }),
    )
}

pub fn bler_csv_string(records: &[BlerRecord], include_wall: bool) -> Result<String> {
    let mut buf = Vec::new();
    write_bler_csv(records, &mut buf, include_wall)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}

/// Settings of an SE trace run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeTraceConfig {
    pub ebn0_db: f64,
    pub antennas: usize,
    pub sigma_h_sq: f64,
    pub trials: u64,
    pub se_draws: usize,
    pub t_max: usize,
    pub rel_tol: f64,
    pub seed: u64,
}

impl SeTraceConfig {
    pub fn new(ebn0_db: f64, antennas: usize, trials: u64, seed: u64) -> Self {
        let se = SeConfig::new(1.0 / antennas as f64, 1.0, antennas);
        Self {
            ebn0_db,
            antennas,
            sigma_h_sq: se.sigma_h_sq,
            trials,
            se_draws: se.n_mc,
            t_max: se.t_max,
            rel_tol: se.rel_tol,
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeTraceRow {
    pub t: usize,
    pub tau_sq_predicted: f64,
    pub tau_sq_empirical: f64,
}

impl SeTraceRow {
    pub fn relative_gap(&self) -> f64 {
        (self.tau_sq_empirical - self.tau_sq_predicted).abs() / self.tau_sq_predicted
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeTrace {
    pub rows: Vec<SeTraceRow>,
    /// AMP iterations prescribed by the offline SE (steps to its fixed point).
    pub iterations: usize,
    pub trials: u64,
    pub block_errors: u64,
}

/// Offline SE prediction `tau_t^2` next to the empirical
/// `sigma_v^2 + ||G^t - G||^2 / (N D)` averaged over SAMP runs, for
/// `t = 0..=iterations` (`G^0 = 0`).
pub fn run_se_trace(dict: &Dictionary, cfg: &SeTraceConfig) -> Result<SeTrace> {
    if cfg.trials == 0 || cfg.antennas == 0 {
        return Err(Error::Config("SE trace needs trials >= 1 and antennas >= 1".into()));
    }
    let sigma_v_sq = sigma_v_sq_for(dict, cfg.ebn0_db);
    let se_cfg = SeConfig {
        n_mc: cfg.se_draws,
        t_max: cfg.t_max,
        rel_tol: cfg.rel_tol,
        ..SeConfig::new(cfg.sigma_h_sq, sigma_v_sq, cfg.antennas)
    };
    let schedule = se_offline(dict, &se_cfg, &mut StreamKey::new(cfg.seed, 0, AUX_STREAM).rng())?;
    let iterations = schedule.offline_iterations();
    let forced = schedule.clone().with_forced_iterations(iterations);
    let params = SampParams::new(cfg.sigma_h_sq, sigma_v_sq)?;
    let scale = 1.0 / (dict.n_rows() * cfg.antennas) as f64;
    let per_trial: Vec<(Vec<f64>, bool)> = (0..cfg.trials)
        .into_par_iter()
        .map(|trial| {
            let data = generate_trial(
                dict,
                StreamKey::new(cfg.seed, 0, trial),
                cfg.antennas,
                cfg.sigma_h_sq,
                sigma_v_sq,
            )?;
            let truth = data.support.indices();
            let h = &data.channel.h;
            let mut mse = vec![0.0; iterations + 1];
            mse[0] = data.channel.gain() * truth.len() as f64;
            let result = samp_decode_observed(&data.y, dict, &params, &forced, |state| {
                let g = &state.g_hat;
                let mut err = g.norm_squared();
                for &m in truth {
                    for (i, hi) in h.iter().enumerate() {
                        let est: Complex64 = g[(m, i)];
                        err += (est - hi).norm_sqr() - est.norm_sqr();
                    }
                }
                mse[state.t + 1] = err;
            })?;
            Ok((mse, result.support != data.support))
        })
        .collect::<Result<_>>()?;
    let mut sums = vec![0.0; iterations + 1];
    let mut block_errors = 0;
    for (mse, err) in &per_trial {
        sums.iter_mut().zip(mse).for_each(|(s, m)| *s += m);
        block_errors += *err as u64;
    }
    let rows = sums
        .iter()
        .enumerate()
        .map(|(t, s)| SeTraceRow {
            t,
            tau_sq_predicted: schedule.taus[t.min(schedule.taus.len() - 1)],
            tau_sq_empirical: sigma_v_sq + scale * s / cfg.trials as f64,
        })
        .collect();
    Ok(SeTrace {
        rows,
        iterations,
        trials: cfg.trials,
        block_errors,
    })
}

pub fn write_se_csv<W: Write>(rows: &[SeTraceRow], out: W) -> Result<()> {
    write_rows(
        out,
        SE_CSV_HEADER,
        rows.iter()
            .map(|r| [r.t.to_string(), fmt_float(r.tau_sq_predicted), fmt_float(r.tau_sq_empirical)]),
    )
}

/// Largest section count with guaranteed noiseless recovery on a dictionary
/// of coherence `mu`: `(1 + mu) / (2 mu)`.
pub fn theorem1_bound(mu: f64) -> f64 {
    (1.0 + mu) / (2.0 * mu)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Theorem1Row {
    pub p: usize,
    pub k: usize,
    pub bound: f64,
    pub within_bound: bool,
    pub trials: u64,
    pub failures: u64,
}

impl Theorem1Row {
    pub fn pass(&self) -> bool {
        self.failures == 0
    }
}

/// Noiseless single-path MLMP with `beta = 1, gamma = 0` on the prime-`p`
/// MUB dictionary. Without `k_list`, every `K` from 1 up to the recovery
/// bound is checked.
pub fn run_theorem1_check(
    p_list: &[usize],
    k_list: Option<&[usize]>,
    trials: u64,
    antennas: usize,
    seed: u64,
) -> Result<Vec<Theorem1Row>> {
    if trials == 0 || antennas == 0 {
        return Err(Error::Config("theorem1 check needs trials >= 1 and antennas >= 1".into()));
    }
    let sigma_h_sq = 1.0 / antennas as f64;
    let cfg = DecoderConfig::theorem1(1);
    let mut rows = Vec::new();
    for (pi, &p) in p_list.iter().enumerate() {
        let base = build_mub_prime(p)?;
        let bound = theorem1_bound(1.0 / (p as f64).sqrt());
        let ks: Vec<usize> = match k_list {
            Some(ks) => ks.to_vec(),
            None => (1..=bound.floor() as usize).collect(),
        };
        for k in ks {
            let dict = base.clone().partitioned(k)?;
            let failures: u64 = (0..trials)
                .into_par_iter()
                .map(|trial| {
                    let key = StreamKey::new(seed, (pi * 1000 + k) as u64, trial);
                    let data = generate_trial(&dict, key, antennas, sigma_h_sq, 0.0)?;
                    let corr = Correlations::new(&data.y, &dict);
                    let r = mlmp_with(&corr, &dict, &cfg)?;
                    Ok((r.support != data.support) as u64)
                })
                .collect::<Result<Vec<u64>>>()?
                .into_iter()
                .sum();
            rows.push(Theorem1Row {
                p,
                k,
                bound,
                within_bound: k as f64 <= bound,
                trials,
                failures,
            });
        }
    }
    Ok(rows)
}

pub fn write_theorem1_csv<W: Write>(rows: &[Theorem1Row], out: W) -> Result<()> {
    write_rows(
        out,
        THEOREM1_CSV_HEADER,
        rows.iter().map(|r| {
            [
                r.p.to_string(),
                r.k.to_string(),
                fmt_float(r.bound),
                r.within_bound.to_string(),
                r.trials.to_string(),
                r.failures.to_string(),
                r.pass().to_string(),
            ]
        }),
    )
}

/// Sphere-packing bound for a code with `n_bits` information bits over `N`
/// complex uses, on the simulation `Eb/N0` axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundCurveConfig {
    pub n_complex: usize,
    pub n_bits: usize,
    pub antennas: usize,
    pub sigma_h_sq: f64,
    pub quad_points: usize,
}

pub fn run_bound_curve(cfg: &BoundCurveConfig, ebn0_db: &[f64]) -> Result<Vec<(f64, f64)>> {
    ebn0_db
        .par_iter()
        .map(|&db| {
            let spb = SpbConfig {
                n_complex: cfg.n_complex,
                log2_m: cfg.n_bits as f64,
                power: spb_power(db, cfg.n_bits, cfg.n_complex, cfg.sigma_h_sq),
                antennas: cfg.antennas,
                quad_points: cfg.quad_points,
            };
            Ok((db, coherent_spb(&spb)?))
        })
        .collect()
}

pub fn write_bound_csv<W: Write>(curve: &[(f64, f64)], out: W) -> Result<()> {
    write_rows(out, BOUND_CSV_HEADER, curve.iter().map(|&(db, pe)| [fmt_float(db), fmt_float(pe)]))
}
