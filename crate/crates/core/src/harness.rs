//! Monte Carlo experiment driver.
//!
//! Every trial regenerates the sensing graph, the signal and the noise from a
//! seed derived from `(master seed, cell index, trial index)`, calibrates the
//! noise to the nominal SNR of its cell and runs a full reconstruction.
//! Trials run in parallel; results are reduced in trial order so the emitted
//! CSV does not depend on scheduling.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;

use crate::density::{ConvMode, ValueGrid};
use crate::error::{Error, Result};
use crate::model::{self, derive_seed, PriorParams, SparseSignal};
use crate::reconstruct::{cs_bsd, CsBsdConfig};
use crate::sensing::SensingGraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Ser,
    Mse,
    Iters,
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExperimentKind::Ser => "ser",
            ExperimentKind::Mse => "mse",
            ExperimentKind::Iters => "iters",
        })
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ser" => Ok(ExperimentKind::Ser),
            "mse" => Ok(ExperimentKind::Mse),
            "iters" | "iterations" => Ok(ExperimentKind::Iters),
            other => Err(Error::Parse(format!("unknown experiment kind '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub n: usize,
    pub m_over_n: Vec<f64>,
    pub q: f64,
    pub l: usize,
    pub n_d: usize,
    pub sigma_x: f64,
    pub snr_grid_db: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub conv_mode: ConvMode,
    pub max_iters: usize,
    /// Require the detected support to repeat before the residual test may
    /// stop a reconstruction.
    pub stable_support: bool,
    /// Fraction of diverged trials above which the CLI reports an anomaly.
    pub max_diverged_fraction: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            kind: ExperimentKind::Ser,
            n: 1024,
            m_over_n: vec![0.5],
            q: 0.05,
            l: 4,
            n_d: 64,
            sigma_x: 10.0,
            snr_grid_db: (0..7).map(|k| 26.0 + 2.0 * k as f64).collect(),
            trials: 50,
            seed: 1,
            output: None,
            conv_mode: ConvMode::Circular,
            max_iters: 10,
            stable_support: true,
            max_diverged_fraction: 0.5,
        }
    }
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("bad value '{value}' for key '{key}'")))
}

/// Comma-separated numbers, or an inclusive `start:step:stop` range.
fn parse_list(key: &str, value: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = value.split(':').collect();
    if parts.len() == 3 {
        let (start, step, stop): (f64, f64, f64) =
            (parse_num(key, parts[0])?, parse_num(key, parts[1])?, parse_num(key, parts[2])?);
        if !(step > 0.0) {
            return Err(Error::Parse(format!("range step for '{key}' must be positive")));
        }
        let count = ((stop - start) / step + 1e-9).floor();
        if count < 0.0 {
            return Err(Error::Parse(format!("empty range for '{key}'")));
        }
        return Ok((0..=count as usize).map(|k| start + step * k as f64).collect());
    }
    value
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse_num(key, s))
        .collect()
}

impl ExperimentConfig {
    /// Applies one `key=value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim();
        match key {
            "kind" => self.kind = value.parse()?,
            "n" => self.n = parse_num(key, value)?,
            "m_over_n" => self.m_over_n = parse_list(key, value)?,
            "q" => self.q = parse_num(key, value)?,
            "l" => self.l = parse_num(key, value)?,
            "n_d" => self.n_d = parse_num(key, value)?,
            "sigma_x" => self.sigma_x = parse_num(key, value)?,
            "snr_grid_db" | "snr_db" => self.snr_grid_db = parse_list(key, value)?,
            "trials" => self.trials = parse_num(key, value)?,
            "seed" => self.seed = parse_num(key, value)?,
            "output" => self.output = Some(PathBuf::from(value.trim())),
            "conv_mode" => self.conv_mode = value.parse()?,
            "max_iters" => self.max_iters = parse_num(key, value)?,
            "stable_support" => self.stable_support = parse_num(key, value)?,
            "max_diverged_fraction" => self.max_diverged_fraction = parse_num(key, value)?,
            other => return Err(Error::Parse(format!("unknown config key '{other}'"))),
        }
        Ok(())
    }

    /// Parses `key=value` lines on top of the defaults. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut config = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("line {}: expected key=value", lineno + 1)))?;
            config.set(key, value)?;
        }
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.n == 0 {
            return bad("n must be at least 1".into());
        }
        if self.n_d < 2 || !self.n_d.is_power_of_two() {
            return bad(format!("n_d {} must be a power of two", self.n_d));
        }
        if self.snr_grid_db.is_empty() || self.snr_grid_db.windows(2).any(|w| w[1] <= w[0]) {
            return bad("snr grid must be non-empty and strictly increasing".into());
        }
        if self.snr_grid_db.iter().any(|s| !s.is_finite()) {
            return bad("snr grid values must be finite".into());
        }
        if self.m_over_n.is_empty() {
            return bad("m_over_n list is empty".into());
        }
        for &r in &self.m_over_n {
            let m = self.rows_for(r);
            if !(r > 0.0) || m < self.l || m == 0 {
                return bad(format!("m_over_n {r} gives {m} rows, fewer than column weight {}", self.l));
            }
        }
        if self.l == 0 {
            return bad("column weight must be at least 1".into());
        }
        if self.max_iters == 0 {
            return bad("max_iters must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.max_diverged_fraction) {
            return bad("max_diverged_fraction outside [0,1]".into());
        }
        PriorParams::new(self.q, self.sigma_x, 0.0)?;
        Ok(())
    }

    pub fn rows_for(&self, m_over_n: f64) -> usize {
        (m_over_n * self.n as f64).round() as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SerRow {
    pub m_over_n: f64,
    pub snr_db: f64,
    pub ser: f64,
    pub stderr: f64,
    pub trials: usize,
    pub snr_limit_db: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MseRow {
    pub m_over_n: f64,
    pub snr_db: f64,
    pub mse: f64,
    pub stderr: f64,
    pub mse_star: f64,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterRow {
    pub m_over_n: f64,
    pub snr_db: f64,
    pub iteration: usize,
    pub mse: f64,
    pub stderr: f64,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExperimentRows {
    Ser(Vec<SerRow>),
    Mse(Vec<MseRow>),
    Iters(Vec<IterRow>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub rows: ExperimentRows,
    pub total_trials: usize,
    pub diverged_trials: usize,
}

impl ExperimentOutput {
    pub fn diverged_fraction(&self) -> f64 {
        self.diverged_trials as f64 / self.total_trials.max(1) as f64
    }
}

/// Outcome of one reconstruction trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub ser: f64,
    pub mse: f64,
    pub mse_star: f64,
    pub snr_db: f64,
    pub snr_limit: Option<f64>,
    pub diverged: bool,
    pub iterations_run: usize,
    pub iterate_mse: Vec<f64>,
}

/// Sample mean and standard error of the mean.
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Draws a signal with at least one nonzero element, so the SNR can be
/// calibrated.
fn nonzero_signal(n: usize, prior: &PriorParams, grid: &ValueGrid, seed: u64) -> SparseSignal {
    (0u64..)
        .map(|k| model::generate_signal(n, prior, grid, derive_seed(seed, &[k])))
        .find(|s| s.support_size() > 0)
        .expect("some draw has a nonzero element")
}

/// One trial at the given row count and SNR.
pub fn run_trial(config: &ExperimentConfig, m: usize, snr_db: f64, seed: u64, fixed_iterations: bool) -> Result<TrialOutcome> {
    let base = PriorParams::new(config.q, config.sigma_x, 0.0)?;
    let grid = ValueGrid::for_signal(config.n_d, config.sigma_x)?;
    let graph = SensingGraph::generate(config.n, m, config.l, derive_seed(seed, &[0]))?;
    let signal = nonzero_signal(config.n, &base, &grid, derive_seed(seed, &[1]));
    let sigma_n = model::sigma_for_target_snr(&graph, &signal, snr_db)?;
    let prior = base.with_sigma_n(sigma_n)?;
    let meas = model::sense(&signal, &graph, sigma_n, derive_seed(seed, &[2]))?;
    let recon_config = CsBsdConfig {
        max_iters: config.max_iters,
        n_d: config.n_d,
        conv_mode: config.conv_mode,
        fixed_iterations,
        require_stable_support: config.stable_support,
        record_iterates: fixed_iterations,
        ..CsBsdConfig::default()
    };
    let res = cs_bsd(&meas.z, &graph, &prior, &recon_config)?;

    let support = graph.submatrix_on_support(&signal.states)?;
    let x0_supp = signal.support_values();
    let k = signal.support_size();
    let snr_limit = if k < config.n && m >= k {
        Some(model::snr_limit(config.n, m, k, model::mar(&signal.values)?)?)
    } else {
        None
    };
    let iterate_mse = res
        .iterates
        .iter()
        .map(|x| model::mse(x, &signal.values))
        .collect::<Result<Vec<_>>>()?;
    Ok(TrialOutcome {
        ser: model::ser(&res.states, &signal.states)?,
        mse: model::mse(&res.estimate, &signal.values)?,
        mse_star: model::mse_star(&support.graph, &prior, &x0_supp)?,
        snr_db: model::snr_db(&graph, &signal, sigma_n)?,
        snr_limit,
        diverged: res.diverged,
        iterations_run: res.iterations_run,
        iterate_mse,
    })
}

/// Runs every trial of one `(M/N, SNR)` cell in parallel, in trial order.
pub fn run_cell(
    config: &ExperimentConfig,
    m_index: usize,
    snr_index: usize,
    fixed_iterations: bool,
) -> Result<Vec<TrialOutcome>> {
    let m = config.rows_for(config.m_over_n[m_index]);
    let snr = config.snr_grid_db[snr_index];
    (0..config.trials)
        .into_par_iter()
        .map(|t| {
            let seed = derive_seed(config.seed, &[m_index as u64, snr_index as u64, t as u64]);
            run_trial(config, m, snr, seed, fixed_iterations)
        })
        .collect()
}

/// Builds the worker pool; `BSD_THREADS` caps its size (0 or unset = auto).
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let threads = match std::env::var("BSD_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map_err(|_| Error::Parse(format!("BSD_THREADS '{v}' is not a count")))?,
        Err(_) => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidParameter(e.to_string()))
}

fn cells(config: &ExperimentConfig) -> Vec<(usize, usize)> {
    (0..config.m_over_n.len())
        .flat_map(|mi| (0..config.snr_grid_db.len()).map(move |si| (mi, si)))
        .collect()
}

fn sort_key(a: (f64, f64), b: (f64, f64)) -> std::cmp::Ordering {
    a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1))
}

pub fn run_ser_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    config.validate()?;
    let mut rows = Vec::new();
    let (mut total, mut diverged) = (0, 0);
    for (mi, si) in cells(config) {
        let outcomes = run_cell(config, mi, si, false)?;
        total += outcomes.len();
        diverged += outcomes.iter().filter(|o| o.diverged).count();
        let sers: Vec<f64> = outcomes.iter().map(|o| o.ser).collect();
        let (ser, stderr) = mean_stderr(&sers);
        let limits: Vec<f64> = outcomes.iter().filter_map(|o| o.snr_limit).collect();
        let limit_db = 10.0 * (limits.iter().sum::<f64>() / limits.len() as f64).log10();
        rows.push(SerRow {
            m_over_n: config.m_over_n[mi],
            snr_db: config.snr_grid_db[si],
            ser,
            stderr,
            trials: outcomes.len(),
            snr_limit_db: limit_db,
        });
    }
    rows.sort_by(|a, b| sort_key((a.m_over_n, a.snr_db), (b.m_over_n, b.snr_db)));
    Ok(ExperimentOutput {
        rows: ExperimentRows::Ser(rows),
        total_trials: total,
        diverged_trials: diverged,
    })
}

pub fn run_mse_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    config.validate()?;
    let mut rows = Vec::new();
    let (mut total, mut diverged) = (0, 0);
    for (mi, si) in cells(config) {
        let outcomes = run_cell(config, mi, si, false)?;
        total += outcomes.len();
        diverged += outcomes.iter().filter(|o| o.diverged).count();
        let mses: Vec<f64> = outcomes.iter().map(|o| o.mse).collect();
        let stars: Vec<f64> = outcomes.iter().map(|o| o.mse_star).collect();
        let (mse, stderr) = mean_stderr(&mses);
        rows.push(MseRow {
            m_over_n: config.m_over_n[mi],
            snr_db: config.snr_grid_db[si],
            mse,
            stderr,
            mse_star: mean_stderr(&stars).0,
            trials: outcomes.len(),
        });
    }
    rows.sort_by(|a, b| sort_key((a.m_over_n, a.snr_db), (b.m_over_n, b.snr_db)));
    Ok(ExperimentOutput {
        rows: ExperimentRows::Mse(rows),
        total_trials: total,
        diverged_trials: diverged,
    })
}

/// MSE after each of `1..=max_iters` sweeps with the stopping rule disabled.
pub fn run_iters_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    config.validate()?;
    let mut rows = Vec::new();
    let (mut total, mut diverged) = (0, 0);
    for (mi, si) in cells(config) {
        let outcomes = run_cell(config, mi, si, true)?;
        total += outcomes.len();
        diverged += outcomes.iter().filter(|o| o.diverged).count();
        for it in 0..config.max_iters {
            let mses: Vec<f64> = outcomes.iter().map(|o| o.iterate_mse[it]).collect();
            let (mse, stderr) = mean_stderr(&mses);
            rows.push(IterRow {
                m_over_n: config.m_over_n[mi],
                snr_db: config.snr_grid_db[si],
                iteration: it + 1,
                mse,
                stderr,
                trials: outcomes.len(),
            });
        }
    }
    rows.sort_by(|a, b| {
        sort_key((a.m_over_n, a.snr_db), (b.m_over_n, b.snr_db)).then(a.iteration.cmp(&b.iteration))
    });
    Ok(ExperimentOutput {
        rows: ExperimentRows::Iters(rows),
        total_trials: total,
        diverged_trials: diverged,
    })
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    match config.kind {
        ExperimentKind::Ser => run_ser_experiment(config),
        ExperimentKind::Mse => run_mse_experiment(config),
        ExperimentKind::Iters => run_iters_experiment(config),
    }
}

impl ExperimentRows {
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        match self {
            ExperimentRows::Ser(rows) => {
                writeln!(out, "m_over_n,snr_db,ser,stderr,trials,snr_limit_db")?;
                for r in rows {
                    writeln!(
                        out,
                        "{},{},{},{},{},{}",
                        r.m_over_n, r.snr_db, r.ser, r.stderr, r.trials, r.snr_limit_db
                    )?;
                }
            }
            ExperimentRows::Mse(rows) => {
                writeln!(out, "m_over_n,snr_db,mse,stderr,mse_star,trials")?;
                for r in rows {
                    writeln!(
                        out,
                        "{},{},{},{},{},{}",
                        r.m_over_n, r.snr_db, r.mse, r.stderr, r.mse_star, r.trials
                    )?;
                }
            }
            ExperimentRows::Iters(rows) => {
                writeln!(out, "m_over_n,snr_db,iteration,mse,stderr,trials")?;
                for r in rows {
                    writeln!(
                        out,
                        "{},{},{},{},{},{}",
                        r.m_over_n, r.snr_db, r.iteration, r.mse, r.stderr, r.trials
                    )?;
                }
            }
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("CSV output is ASCII"))
    }
}

/// SNR at which the SER curve of one `M/N` drops below a single observed
/// error, `1/(N·trials)`.
///
/// The curve is interpolated linearly in `log(SER)` between the last grid
/// point still at or above the target and the next one. Cells without any
/// error count as half an error. Returns `None` when the last grid point is
/// still at or above the target, and the first grid SNR when no point is.
pub fn ser_threshold(rows: &[SerRow], m_over_n: f64, n: usize) -> Option<f64> {
    let curve: Vec<&SerRow> = rows.iter().filter(|r| r.m_over_n == m_over_n).collect();
    let first = curve.first()?;
    let target = 1.0 / (n as f64 * first.trials as f64);
    let floor = 0.5 * target;
    let last_above = curve.iter().rposition(|r| r.ser >= target * (1.0 - 1e-9));
    let Some(i) = last_above else {
        return Some(first.snr_db);
    };
    let next = curve.get(i + 1)?;
    let (a, b) = (curve[i].ser.ln(), next.ser.max(floor).ln());
    let frac = (a - target.ln()) / (a - b);
    Some(curve[i].snr_db + frac * (next.snr_db - curve[i].snr_db))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_parsing() {
        let text = "# sweep\nkind = mse\nn=256\nm_over_n=0.3,0.5\nsnr_grid_db=10:5:20 # inline\ntrials=3\nconv_mode=linear\n";
        let c = ExperimentConfig::parse(text).unwrap();
        assert_eq!(c.kind, ExperimentKind::Mse);
        assert_eq!(c.n, 256);
        assert_eq!(c.m_over_n, vec![0.3, 0.5]);
        assert_eq!(c.snr_grid_db, vec![10.0, 15.0, 20.0]);
        assert_eq!(c.trials, 3);
        assert_eq!(c.conv_mode, ConvMode::Linear);
        assert_eq!(c.q, 0.05);
        c.validate().unwrap();

        assert!(ExperimentConfig::parse("bogus=1").is_err());
        assert!(ExperimentConfig::parse("n").is_err());
        assert!(ExperimentConfig::parse("trials=x").is_err());
    }

    #[test]
    fn default_grid() {
        let c = ExperimentConfig::default();
        assert_eq!(c.snr_grid_db, vec![26.0, 28.0, 30.0, 32.0, 34.0, 36.0, 38.0]);
        c.validate().unwrap();
    }

    #[test]
    fn validation() {
        let mut c = ExperimentConfig::default();
        c.trials = 0;
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::default();
        c.snr_grid_db = vec![10.0, 10.0];
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::default();
        c.n_d = 48;
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::default();
        c.q = 1.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn stderr_formula() {
        let (m, s) = mean_stderr(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
        assert_eq!(mean_stderr(&[7.0]), (7.0, 0.0));
    }

    fn row(snr: f64, ser: f64) -> SerRow {
        SerRow {
            m_over_n: 0.5,
            snr_db: snr,
            ser,
            stderr: 0.0,
            trials: 10,
            snr_limit_db: 0.0,
        }
    }

    #[test]
    fn threshold_interpolation() {
        let target = 1.0 / 1000.0;
        // One error exactly at 30 dB, none at 32 dB: crossing at 30 dB.
        let rows = vec![row(28.0, 0.01), row(30.0, target), row(32.0, 0.0)];
        assert_eq!(ser_threshold(&rows, 0.5, 100), Some(30.0));
        // Ten errors then none: log-linear towards half an error.
        let rows = vec![row(28.0, 10.0 * target), row(30.0, 0.0)];
        let expect = 28.0 + 2.0 * 10f64.ln() / 20f64.ln();
        assert!((ser_threshold(&rows, 0.5, 100).unwrap() - expect).abs() < 1e-12);
        // Never reached, or below the whole grid.
        assert_eq!(ser_threshold(&[row(28.0, 0.1)], 0.5, 100), None);
        assert_eq!(ser_threshold(&[row(28.0, 0.0), row(30.0, 0.0)], 0.5, 100), Some(28.0));
    }

    #[test]
    fn small_ser_experiment_is_deterministic() {
        let config = ExperimentConfig {
            n: 64,
            snr_grid_db: vec![20.0, 40.0],
            trials: 4,
            conv_mode: ConvMode::Linear,
            ..ExperimentConfig::default()
        };
        let a = run_ser_experiment(&config).unwrap();
        let b = run_ser_experiment(&config).unwrap();
        assert_eq!(a.rows.to_csv_string().unwrap(), b.rows.to_csv_string().unwrap());
        let ExperimentRows::Ser(rows) = &a.rows else { panic!() };
        assert_eq!(rows.len(), 2);
        assert!(rows.iter().all(|r| r.trials == 4 && (0.0..=1.0).contains(&r.ser)));
    }

    #[test]
    fn trial_calibrates_snr() {
        let config = ExperimentConfig {
            n: 128,
            ..ExperimentConfig::default()
        };
        for snr in [10.0, 30.0] {
            let out = run_trial(&config, 64, snr, 5, false).unwrap();
            assert!((out.snr_db - snr).abs() < 0.01);
        }
    }

    #[test]
    fn iters_rows_cover_every_iteration() {
        let config = ExperimentConfig {
            kind: ExperimentKind::Iters,
            n: 64,
            q: 0.1,
            snr_grid_db: vec![50.0],
            trials: 2,
            max_iters: 5,
            ..ExperimentConfig::default()
        };
        let out = run_experiment(&config).unwrap();
        let ExperimentRows::Iters(rows) = out.rows else { panic!() };
        assert_eq!(rows.iter().map(|r| r.iteration).collect::<Vec<_>>(), vec![1, 2, 3, 4, 5]);
    }
}
