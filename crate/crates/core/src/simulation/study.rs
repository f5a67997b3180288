use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    derive_seed, gen_design_rng, gen_response_rng, signal_positions, DesignScheme, LambdaRule, NoiseScheme, SigmaMode,
    SignalLevel, StudyConfig,
};
use crate::cv::{cv_lambda, CvOptions};
use crate::error::{Error, Result};
use crate::geometry::truncation_set::extended;
use crate::inference::{analyze, bonferroni_cutoff, default_lambda_high, universal_lambda, AnalysisOptions, Method, SigmaSpec};

/// Median and 99th percentile + 0.25 of max_j |x_jᵀy|/n under y ~ N(0, I).
pub fn calibrate_delta(n: usize, p: usize, design: &DesignScheme, reps: usize, seed: u64) -> Result<(f64, f64)> {
    if reps == 0 {
        return Err(Error::Input("reps must be positive".into()));
    }
    let stats: Vec<f64> = (0..reps as u64)
        .into_par_iter()
        .map(|r| -> Result<f64> {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, r));
            let x = gen_design_rng(n, p, design, &mut rng)?;
            let y = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
            Ok(x.matrix().tr_mul(&y).amax() / n as f64)
        })
        .collect::<Result<_>>()?;
    Ok((quantile(&stats, 0.5), quantile(&stats, 0.99) + 0.25))
}

/// Median over `reps` simulated data sets of the 10-fold CV penalty
/// (per-observation scale).
#[allow(clippy::too_many_arguments)]
pub fn calibrate_lambda_cv(
    n: usize,
    p: usize,
    design: &DesignScheme,
    k_signals: usize,
    signal: f64,
    noise: &NoiseScheme,
    reps: usize,
    seed: u64,
) -> Result<f64> {
    if reps == 0 {
        return Err(Error::Input("reps must be positive".into()));
    }
    let lambdas: Vec<f64> = (0..reps as u64)
        .into_par_iter()
        .map(|r| -> Result<f64> {
            let rep_seed = derive_seed(seed, r);
            let mut rng = ChaCha8Rng::seed_from_u64(rep_seed);
            let (x, beta) = draw_problem(n, p, design, k_signals, signal, &mut rng)?;
            let y = gen_response_rng(&x, &beta, noise, &mut rng)?;
            let cv = cv_lambda(x.matrix(), y.values(), &CvOptions { seed: rep_seed, ..CvOptions::default() })?;
            Ok(cv.lambda)
        })
        .collect::<Result<_>>()?;
    Ok(quantile(&lambdas, 0.5))
}

fn draw_problem<R: Rng + ?Sized>(
    n: usize,
    p: usize,
    design: &DesignScheme,
    k: usize,
    signal: f64,
    rng: &mut R,
) -> Result<(crate::lasso::DesignMatrix, DVector<f64>)> {
    let x = gen_design_rng(n, p, design, rng)?;
    let mut beta = DVector::zeros(p);
    if signal != 0.0 {
        for j in signal_positions(p, k, design, rng) {
            beta[j] = signal;
        }
    }
    Ok((x, beta))
}

/// Linear-interpolation quantile; +∞ entries sort last.
fn quantile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let pos = q * (v.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    if lo == hi || v[lo] == v[hi] {
        return v[lo];
    }
    v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    #[serde(with = "extended")]
    pub delta_low: f64,
    #[serde(with = "extended")]
    pub delta_high: f64,
    /// Coefficient value given to each signal variable.
    pub signal: f64,
    /// √(2 log p / n), per observation.
    pub universal_lambda: f64,
    pub lambda_per_obs: f64,
    pub lambda_sum: f64,
    pub lambda_high_sum: Option<f64>,
    pub cutoff: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub intervals: usize,
    pub covered: usize,
    #[serde(with = "extended")]
    pub coverage: f64,
    /// Infinite intervals enter as +∞.
    #[serde(with = "extended")]
    pub median_length: f64,
    #[serde(with = "extended")]
    pub median_length_finite: f64,
    pub infinite_count: usize,
    #[serde(with = "extended")]
    pub infinite_proportion: f64,
    pub failed_intervals: usize,
    /// Five-number summary of the finite lengths, for boxplots.
    pub finite_length_box: LengthBox,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LengthBox {
    #[serde(with = "extended")]
    pub min: f64,
    #[serde(with = "extended")]
    pub q1: f64,
    #[serde(with = "extended")]
    pub median: f64,
    #[serde(with = "extended")]
    pub q3: f64,
    #[serde(with = "extended")]
    pub max: f64,
}

impl LengthBox {
    fn of(v: &[f64]) -> Self {
        Self {
            min: quantile(v, 0.0),
            q1: quantile(v, 0.25),
            median: quantile(v, 0.5),
            q3: quantile(v, 0.75),
            max: quantile(v, 1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub config: StudyConfig,
    pub calibration: Calibration,
    pub replications_run: usize,
    pub failed_replications: usize,
    pub zero_selection_replications: usize,
    pub selected_total: usize,
    #[serde(with = "extended")]
    pub mean_selected: f64,
    pub methods: Vec<MethodSummary>,
    /// First few failure messages, in replication order.
    pub failure_messages: Vec<String>,
    pub conventions: Vec<String>,
}

impl StudyReport {
    pub fn method(&self, m: Method) -> Option<&MethodSummary> {
        self.methods.iter().find(|s| s.method == m)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::Study(e.to_string());
        w.write_record([
            "method",
            "intervals",
            "covered",
            "coverage",
            "median_length",
            "median_length_finite",
            "infinite_count",
            "infinite_proportion",
            "failed_intervals",
            "replications",
            "lambda_per_obs",
            "signal",
        ])
        .map_err(io)?;
        for s in &self.methods {
            w.write_record([
                s.method.to_string(),
                s.intervals.to_string(),
                s.covered.to_string(),
                fmt_num(s.coverage),
                fmt_num(s.median_length),
                fmt_num(s.median_length_finite),
                s.infinite_count.to_string(),
                fmt_num(s.infinite_proportion),
                s.failed_intervals.to_string(),
                self.replications_run.to_string(),
                fmt_num(self.calibration.lambda_per_obs),
                fmt_num(self.calibration.signal),
            ])
            .map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Study(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Study(e.to_string()))
    }
}

pub(crate) fn fmt_num(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v}")
    }
}

#[derive(Default)]
struct RepOutcome {
    /// Per method: (covered, length, infinite).
    intervals: Vec<Vec<(bool, f64, bool)>>,
    failed: Vec<usize>,
    selected: usize,
    error: Option<String>,
}

fn calibrate(cfg: &StudyConfig) -> Result<Calibration> {
    let (n, p) = (cfg.n, cfg.p);
    let need_delta = matches!(cfg.signal_level, SignalLevel::Low | SignalLevel::High);
    let (delta_low, delta_high) = if need_delta {
        calibrate_delta(n, p, &cfg.design, cfg.delta_reps, derive_seed(cfg.seed, u64::MAX))?
    } else {
        (f64::NAN, f64::NAN)
    };
    let signal = match cfg.signal_level {
        SignalLevel::Null => 0.0,
        SignalLevel::Low => delta_low,
        SignalLevel::High => delta_high,
        SignalLevel::Explicit(v) => v,
    };
    let univ = universal_lambda(n, p);
    let lambda_per_obs = match cfg.lambda_rule {
        LambdaRule::Universal => univ,
        LambdaRule::Explicit(v) => v,
        LambdaRule::CvMedian => calibrate_lambda_cv(
            n,
            p,
            &cfg.design,
            cfg.k_signals,
            signal,
            &cfg.noise,
            cfg.cv_reps,
            derive_seed(cfg.seed, u64::MAX - 1),
        )?,
    };
    let lambda_sum = lambda_per_obs * n as f64;
    let lambda_high_sum = cfg.methods.contains(&Method::TzStabL1).then(|| match cfg.lambda_high {
        Some(v) => v * n as f64,
        None => match cfg.lambda_rule {
            LambdaRule::Universal => 1.25 * lambda_sum,
            _ => default_lambda_high(lambda_sum, n, p),
        },
    });
    let cutoff = cfg
        .methods
        .contains(&Method::TzStabT)
        .then(|| cfg.cutoff.unwrap_or_else(|| bonferroni_cutoff(cfg.alpha, p)));
    Ok(Calibration {
        delta_low,
        delta_high,
        signal,
        universal_lambda: univ,
        lambda_per_obs,
        lambda_sum,
        lambda_high_sum,
        cutoff,
    })
}

fn replicate(cfg: &StudyConfig, cal: &Calibration, rep: u64) -> RepOutcome {
    let mut out = RepOutcome {
        intervals: vec![Vec::new(); cfg.methods.len()],
        failed: vec![0; cfg.methods.len()],
        ..RepOutcome::default()
    };
    let seed = derive_seed(cfg.seed, rep);
    let run = || -> Result<(usize, Vec<(Method, String, std::result::Result<(bool, f64, bool), String>)>)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (x, beta) = draw_problem(cfg.n, cfg.p, &cfg.design, cfg.k_signals, cal.signal, &mut rng)?;
        let y = gen_response_rng(&x, &beta, &cfg.noise, &mut rng)?;
        let sigma = match cfg.sigma_mode {
            SigmaMode::Known => SigmaSpec::Known {
                value: cfg.noise.sigma,
            },
            SigmaMode::Reid => SigmaSpec::Reid,
        };
        let opts = AnalysisOptions {
            alpha: cfg.alpha,
            cutoff: cal.cutoff,
            lambda_high: cal.lambda_high_sum,
            seed,
            ..AnalysisOptions::default()
        };
        let analysis = analyze(&x, y.values(), cal.lambda_sum, &cfg.methods, cfg.target_kind, sigma, &opts)?;
        // coverage is judged against the target realized in this replication
        let mu = x.matrix() * &beta;
        let rows = analysis
            .results
            .iter()
            .map(|r| {
                let status = match &r.error {
                    None => {
                        let theta = r.target.value(&mu);
                        let iv = &r.interval;
                        Ok((iv.covers(theta), iv.length(), iv.is_infinite()))
                    }
                    Some(e) => Err(e.clone()),
                };
                (r.method, r.name.clone(), status)
            })
            .collect();
        Ok((analysis.fit.active_set.len(), rows))
    };
    match run() {
        Ok((selected, rows)) => {
            out.selected = selected;
            for (method, name, status) in rows {
                let k = cfg.methods.iter().position(|m| *m == method).unwrap_or(0);
                match status {
                    Ok(t) => out.intervals[k].push(t),
                    Err(e) => {
                        out.failed[k] += 1;
                        out.error.get_or_insert_with(|| format!("replication {rep}, {method} {name}: {e}"));
                    }
                }
            }
        }
        Err(e) => out.error = Some(format!("replication {rep}: {e}")),
    }
    out
}

pub fn run_study(cfg: &StudyConfig) -> Result<StudyReport> {
    run_study_with_threads(cfg, None)
}

/// As [`run_study`], on a dedicated pool of `threads` workers. The report
/// does not depend on the thread count.
pub fn run_study_with_threads(cfg: &StudyConfig, threads: Option<usize>) -> Result<StudyReport> {
    cfg.validate()?;
    let work = || -> Result<StudyReport> {
        let cal = calibrate(cfg)?;
        let outcomes: Vec<RepOutcome> = (0..cfg.replications as u64)
            .into_par_iter()
            .map(|r| replicate(cfg, &cal, r))
            .collect();
        aggregate(cfg, cal, outcomes)
    };
    match threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t.max(1))
            .build()
            .map_err(|e| Error::Study(e.to_string()))?
            .install(work),
        None => work(),
    }
}

fn aggregate(cfg: &StudyConfig, cal: Calibration, outcomes: Vec<RepOutcome>) -> Result<StudyReport> {
    let reps = outcomes.len();
    let failed_reps = outcomes.iter().filter(|o| o.error.is_some()).count();
    let failure_messages: Vec<String> = outcomes.iter().filter_map(|o| o.error.clone()).take(10).collect();
    if failed_reps as f64 > cfg.failure_budget * reps as f64 {
        return Err(Error::Study(format!(
            "{failed_reps} of {reps} replications failed (budget {:.1}%); first: {}",
            100.0 * cfg.failure_budget,
            failure_messages.first().cloned().unwrap_or_default()
        )));
    }
    let methods = cfg
        .methods
        .iter()
        .enumerate()
        .map(|(k, &method)| {
            let all: Vec<&(bool, f64, bool)> = outcomes.iter().flat_map(|o| o.intervals[k].iter()).collect();
            let intervals = all.len();
            let covered = all.iter().filter(|t| t.0).count();
            let lengths: Vec<f64> = all.iter().map(|t| if t.2 { f64::INFINITY } else { t.1 }).collect();
            let finite: Vec<f64> = all.iter().filter(|t| !t.2).map(|t| t.1).collect();
            let infinite_count = intervals - finite.len();
            let ratio = |a: usize| if intervals == 0 { f64::NAN } else { a as f64 / intervals as f64 };
            MethodSummary {
                method,
                intervals,
                covered,
                coverage: ratio(covered),
                median_length: quantile(&lengths, 0.5),
                median_length_finite: quantile(&finite, 0.5),
                infinite_count,
                infinite_proportion: ratio(infinite_count),
                failed_intervals: outcomes.iter().map(|o| o.failed[k]).sum(),
                finite_length_box: LengthBox::of(&finite),
            }
        })
        .collect();
    let selected_total: usize = outcomes.iter().map(|o| o.selected).sum();
    Ok(StudyReport {
        config: cfg.clone(),
        calibration: cal,
        replications_run: reps,
        failed_replications: failed_reps,
        zero_selection_replications: outcomes.iter().filter(|o| o.error.is_none() && o.selected == 0).count(),
        selected_total,
        mean_selected: if reps == 0 { f64::NAN } else { selected_total as f64 / reps as f64 },
        methods,
        failure_messages,
        conventions: vec![
            "coverage is tallied per constructed interval (variable-replication pairs)".into(),
            "infinite intervals count as covering and enter median_length as +inf".into(),
            "median_length_finite uses finite intervals only".into(),
        ],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantile_interpolates_and_handles_infinity() {
        assert_eq!(quantile(&[3.0, 1.0, 2.0], 0.5), 2.0);
        assert_eq!(quantile(&[1.0, 2.0], 0.5), 1.5);
        assert_eq!(quantile(&[1.0, f64::INFINITY, f64::INFINITY], 0.5), f64::INFINITY);
    }

    #[test]
    fn single_variable_null_statistic_is_half_normal() {
        let n = 100;
        let (med, _) = calibrate_delta(n, 1, &DesignScheme::Independent, 4000, 7).unwrap();
        // |x₁ᵀy|/n ≈ ‖x₁‖|Z|/n with ‖x₁‖ ≈ √n
        let want = 0.674_489_75 / (n as f64).sqrt();
        assert!((med - want).abs() < 0.08 * want, "{med} vs {want}");
    }
}
