//! Convergence statistics over seeded random two-component scenarios.
//!
//! Trial `k` uses seed `seed + k`, so every scenario can be regenerated on
//! its own and the report does not depend on scheduling.

use std::collections::BTreeMap;

use cm_core::{
    run_cm_mixture, run_em, Alphabet, Distribution, MixtureModel, MixtureOptions, MixtureTrace,
    RightStepMethod,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::export::fmt_num;
use crate::report::{Check, Report};

/// Seed of the committed trial set.
pub const TRIALS_SEED: u64 = 20_170_901;

pub const DEFAULT_TRIALS: usize = 1000;

const CENTER_RANGE: (f64, f64) = (20.0, 80.0);
const MIN_SEPARATION: f64 = 10.0;
const STDDEV_RANGE: (f64, f64) = (5.0, 15.0);
const WEIGHT_RANGE: (f64, f64) = (0.1, 0.9);
const START_SHIFT: f64 = 5.0;
const START_SCALE: (f64, f64) = (0.6, 1.8);
const START_MIN_STDDEV: f64 = 3.0;
const MAX_THREADS: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct TrialSettings {
    pub count: usize,
    pub seed: u64,
    pub tol: f64,
    pub max_right_steps: usize,
    pub include_em: bool,
    pub threads: Option<usize>,
}

impl Default for TrialSettings {
    fn default() -> Self {
        Self {
            count: DEFAULT_TRIALS,
            seed: TRIALS_SEED,
            tol: cm_core::mixture::DEFAULT_TOL,
            max_right_steps: cm_core::mixture::DEFAULT_MAX_RIGHT_STEPS,
            include_em: false,
            threads: None,
        }
    }
}

impl TrialSettings {
    fn options(&self) -> MixtureOptions {
        MixtureOptions {
            tol: self.tol,
            max_right_steps: self.max_right_steps,
            method: RightStepMethod::ExactGrid,
        }
    }
}

/// True mixture and starting model of one trial, as `(center, stddev,
/// weight)` per component.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialScenario {
    pub seed: u64,
    pub truth: [(f64, f64, f64); 2],
    pub start: [(f64, f64, f64); 2],
}

impl TrialScenario {
    /// Centers uniform on [20, 80] at least 10 apart, stddevs uniform on
    /// [5, 15], first weight uniform on [0.1, 0.9]. The start pushes the
    /// centers 5 outward, scales each stddev by U(0.6, 1.8) with a floor of
    /// 3, and uses equal weights.
    pub fn generate(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c1 = rng.gen_range(CENTER_RANGE.0..=CENTER_RANGE.1);
        let c2 = loop {
            let c = rng.gen_range(CENTER_RANGE.0..=CENTER_RANGE.1);
            if (c - c1).abs() >= MIN_SEPARATION {
                break c;
            }
        };
        let (c1, c2) = if c1 <= c2 { (c1, c2) } else { (c2, c1) };
        let d1 = rng.gen_range(STDDEV_RANGE.0..=STDDEV_RANGE.1);
        let d2 = rng.gen_range(STDDEV_RANGE.0..=STDDEV_RANGE.1);
        let w = rng.gen_range(WEIGHT_RANGE.0..=WEIGHT_RANGE.1);
        let s1 = rng.gen_range(START_SCALE.0..=START_SCALE.1);
        let s2 = rng.gen_range(START_SCALE.0..=START_SCALE.1);
        Self {
            seed,
            truth: [(c1, d1, w), (c2, d2, 1.0 - w)],
            start: [
                (c1 - START_SHIFT, (d1 * s1).max(START_MIN_STDDEV), 0.5),
                (c2 + START_SHIFT, (d2 * s2).max(START_MIN_STDDEV), 0.5),
            ],
        }
    }

    pub fn grid() -> Alphabet {
        Alphabet::integer_grid(1, 100).expect("fixed grid is valid")
    }

    pub fn target(&self) -> cm_core::Result<Distribution> {
        MixtureModel::from_params(Self::grid(), &self.truth)?.mixture()
    }

    pub fn start_model(&self) -> cm_core::Result<MixtureModel> {
        MixtureModel::from_params(Self::grid(), &self.start)
    }

    pub fn run_cm(&self, options: MixtureOptions) -> cm_core::Result<(Distribution, MixtureTrace)> {
        let target = self.target()?;
        let trace = run_cm_mixture(&target, &self.start_model()?, options)?;
        Ok((target, trace))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunCount {
    pub steps: usize,
    pub converged: bool,
    pub final_h: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub scenario: TrialScenario,
    /// `Err` holds the error message of a run that stopped early.
    pub cm: Result<RunCount, String>,
    pub em: Option<Result<RunCount, String>>,
}

impl TrialOutcome {
    pub fn failed(&self) -> bool {
        !matches!(self.cm, Ok(RunCount { converged: true, .. }))
    }
}

fn count(trace: cm_core::Result<MixtureTrace>) -> Result<RunCount, String> {
    trace
        .map(|t| RunCount {
            steps: t.right_steps,
            converged: t.converged,
            final_h: t.final_monitor().h_qp,
        })
        .map_err(|e| e.to_string())
}

pub fn run_one(seed: u64, settings: &TrialSettings) -> TrialOutcome {
    let scenario = TrialScenario::generate(seed);
    let options = settings.options();
    let cm = count(scenario.run_cm(options).map(|(_, t)| t));
    let em = settings.include_em.then(|| {
        count(
            scenario
                .target()
                .and_then(|target| run_em(&target, &scenario.start_model()?, options)),
        )
    });
    TrialOutcome { scenario, cm, em }
}

/// Step-count statistics. Runs that fail count with the step cap.
#[derive(Debug, Clone, PartialEq)]
pub struct StepStats {
    pub histogram: BTreeMap<usize, usize>,
    pub mode: usize,
    pub median: f64,
    pub max: usize,
    pub failures: usize,
}

impl StepStats {
    fn from_counts<'a>(
        counts: impl Iterator<Item = &'a Result<RunCount, String>>,
        cap: usize,
    ) -> Self {
        let mut steps = Vec::new();
        let mut failures = 0;
        for c in counts {
            match c {
                Ok(RunCount {
                    steps: s,
                    converged: true,
                    ..
                }) => steps.push(*s),
                _ => {
                    failures += 1;
                    steps.push(cap);
                }
            }
        }
        steps.sort_unstable();
        let mut histogram = BTreeMap::new();
        for &s in &steps {
            *histogram.entry(s).or_insert(0) += 1;
        }
        let mode = histogram
            .iter()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
            .map_or(0, |(&s, _)| s);
        let median = match steps.len() {
            0 => f64::NAN,
            n if n % 2 == 1 => steps[n / 2] as f64,
            n => (steps[n / 2 - 1] + steps[n / 2]) as f64 / 2.0,
        };
        Self {
            histogram,
            mode,
            median,
            max: steps.last().copied().unwrap_or(0),
            failures,
        }
    }

    pub fn failure_rate(&self) -> f64 {
        let n: usize = self.histogram.values().sum();
        if n == 0 {
            0.0
        } else {
            self.failures as f64 / n as f64
        }
    }

    fn histogram_text(&self) -> String {
        self.histogram
            .iter()
            .map(|(s, n)| format!("{s}:{n}"))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialsSummary {
    pub settings: TrialSettings,
    /// Sorted by seed.
    pub outcomes: Vec<TrialOutcome>,
    pub cm: StepStats,
    pub em: Option<StepStats>,
}

/// Runs every trial on a bounded worker pool.
pub fn run_trials(settings: &TrialSettings) -> TrialsSummary {
    let threads = settings.threads.unwrap_or_else(|| {
        std::thread::available_parallelism()
            .map_or(1, |n| n.get())
            .min(MAX_THREADS)
    });
    let seeds: Vec<u64> = (0..settings.count as u64)
        .map(|k| settings.seed.wrapping_add(k))
        .collect();
    let work = || -> Vec<TrialOutcome> {
        seeds.par_iter().map(|&s| run_one(s, settings)).collect()
    };
    let mut outcomes = match rayon::ThreadPoolBuilder::new().num_threads(threads.max(1)).build() {
        Ok(pool) => pool.install(work),
        Err(_) => seeds.iter().map(|&s| run_one(s, settings)).collect(),
    };
    outcomes.sort_by_key(|o| o.scenario.seed);
    let cm = StepStats::from_counts(outcomes.iter().map(|o| &o.cm), settings.max_right_steps);
    let em = settings.include_em.then(|| {
        StepStats::from_counts(
            outcomes.iter().filter_map(|o| o.em.as_ref()),
            settings.max_right_steps,
        )
    });
    TrialsSummary {
        settings: settings.clone(),
        outcomes,
        cm,
        em,
    }
}

impl TrialsSummary {
    /// Statistics plus the convergence-speed claims as checks: mode 5 ± 1,
    /// median ≤ 10 and at most 2% failures.
    pub fn report(&self) -> Report {
        let mut r = Report::default();
        r.entry("trials", self.outcomes.len().to_string());
        r.entry("seed", self.settings.seed.to_string());
        r.number("tol", self.settings.tol);
        r.entry("mode", self.cm.mode.to_string());
        r.number("median", self.cm.median);
        r.entry("max", self.cm.max.to_string());
        r.entry("failures", self.cm.failures.to_string());
        r.number("failure_rate", self.cm.failure_rate());
        r.entry("histogram", self.cm.histogram_text());
        if let Some(em) = &self.em {
            r.entry("em_mode", em.mode.to_string());
            r.number("em_median", em.median);
            r.entry("em_max", em.max.to_string());
            r.entry("em_failures", em.failures.to_string());
            r.entry("em_histogram", em.histogram_text());
        }
        r.checks.push(Check::near("mode", self.cm.mode as f64, 5.0, 1.0));
        r.checks.push(Check::at_most("median", self.cm.median, 10.0));
        r.checks.push(Check::at_most("failure_rate", self.cm.failure_rate(), 0.02));
        r
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "seed,c1,d1,w1,c2,d2,w2,start_c1,start_d1,start_c2,start_d2,right_steps,converged,final_H_QP",
        );
        if self.settings.include_em {
            out.push_str(",em_steps,em_converged,em_final_H_QP");
        }
        out.push_str(",error\n");
        for o in &self.outcomes {
            let s = &o.scenario;
            let mut row: Vec<String> = vec![s.seed.to_string()];
            for (c, d, w) in s.truth {
                row.extend([c, d, w].map(fmt_num));
            }
            for (c, d, _) in s.start {
                row.extend([c, d].map(fmt_num));
            }
            let mut errors = Vec::new();
            let mut push = |run: &Result<RunCount, String>, row: &mut Vec<String>| match run {
                Ok(c) => row.extend([c.steps.to_string(), c.converged.to_string(), fmt_num(c.final_h)]),
                Err(e) => {
                    row.extend([String::new(), "false".into(), String::new()]);
                    errors.push(e.replace(',', ";"));
                }
            };
            push(&o.cm, &mut row);
            if let Some(em) = &o.em {
                push(em, &mut row);
            }
            row.push(errors.join(" | "));
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> Value {
        let stats = |s: &StepStats| {
            json!({
                "mode": s.mode,
                "median": s.median,
                "max": s.max,
                "failures": s.failures,
                "failure_rate": s.failure_rate(),
                "histogram": s.histogram.iter().map(|(k, v)| (k.to_string(), *v)).collect::<BTreeMap<_, _>>(),
            })
        };
        let trials: Vec<Value> = self
            .outcomes
            .iter()
            .map(|o| {
                let run = |r: &Result<RunCount, String>| match r {
                    Ok(c) => json!({ "steps": c.steps, "converged": c.converged, "final_H_QP": c.final_h }),
                    Err(e) => json!({ "error": e }),
                };
                json!({
                    "seed": o.scenario.seed,
                    "truth": o.scenario.truth.map(|(c, d, w)| [c, d, w]),
                    "start": o.scenario.start.map(|(c, d, w)| [c, d, w]),
                    "cm": run(&o.cm),
                    "em": o.em.as_ref().map(run),
                })
            })
            .collect();
        json!({
            "seed": self.settings.seed,
            "count": self.settings.count,
            "cm": stats(&self.cm),
            "em": self.em.as_ref().map(stats),
            "trials": trials,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scenarios_respect_ranges() {
        for seed in 0..500 {
            let s = TrialScenario::generate(seed);
            let [(c1, d1, w1), (c2, d2, w2)] = s.truth;
            assert!((20.0..=80.0).contains(&c1) && (20.0..=80.0).contains(&c2));
            assert!(c2 - c1 >= 10.0);
            assert!((5.0..=15.0).contains(&d1) && (5.0..=15.0).contains(&d2));
            assert!((0.1..=0.9).contains(&w1));
            assert!((w1 + w2 - 1.0).abs() < 1e-15);
            assert_eq!(s.start[0].0, c1 - 5.0);
            assert_eq!(s.start[1].0, c2 + 5.0);
            assert!(s.start[0].1 >= 3.0 && s.start[1].1 >= 3.0);
        }
    }

    #[test]
    fn same_seed_same_scenario() {
        assert_eq!(TrialScenario::generate(42), TrialScenario::generate(42));
        assert_ne!(TrialScenario::generate(42), TrialScenario::generate(43));
    }

    #[test]
    fn report_is_independent_of_thread_count() {
        let base = TrialSettings {
            count: 12,
            include_em: true,
            ..TrialSettings::default()
        };
        let one = run_trials(&TrialSettings {
            threads: Some(1),
            ..base.clone()
        });
        let four = run_trials(&TrialSettings {
            threads: Some(4),
            ..base
        });
        assert_eq!(one.to_csv(), four.to_csv());
        assert_eq!(one.report(), four.report());
    }

    #[test]
    fn stats_count_failures_at_the_cap() {
        let runs = [
            Ok(RunCount { steps: 4, converged: true, final_h: 0.0 }),
            Ok(RunCount { steps: 4, converged: true, final_h: 0.0 }),
            Ok(RunCount { steps: 6, converged: true, final_h: 0.0 }),
            Ok(RunCount { steps: 200, converged: false, final_h: 0.1 }),
            Err("boom".to_string()),
        ];
        let s = StepStats::from_counts(runs.iter(), 200);
        assert_eq!(s.mode, 4);
        assert_eq!(s.median, 6.0);
        assert_eq!(s.max, 200);
        assert_eq!(s.failures, 2);
        assert!((s.failure_rate() - 0.4).abs() < 1e-15);
    }
}
