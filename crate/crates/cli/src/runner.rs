//! Runs a parsed configuration and collects its summary and trace files.

use std::path::Path;

use cm_core::{
    entropy, rg_curve, run_cm_mixture, run_cm_test, run_em, Alphabet, Channel, Distribution,
    MixtureModel, MixtureOptions, MixtureTrace, NeutralMode, PayoffMatrix, Partition,
    RightStepMethod, SemanticChannel, TestScenario, TestTrace,
};

use crate::config::{
    ExperimentConfig, Format, Kind, MethodConfig, MixtureConfig, NeutralModeConfig, RgConfig,
    TestConfig,
};
use crate::error::CliError;
use crate::export::{self, fmt_num};
use crate::report::{Check, Report};
use crate::trials::{run_trials, TrialSettings};

/// Summary and named output files of one run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: Report,
    pub files: Vec<(String, String)>,
}

impl RunOutput {
    /// Writes every file plus the summary into `dir`.
    pub fn write(&self, dir: &Path, format: Format) -> Result<(), CliError> {
        for (name, contents) in &self.files {
            export::write_file(&dir.join(name), contents)?;
        }
        match format {
            Format::Csv => export::write_file(&dir.join("summary.txt"), &self.report.to_text()),
            Format::Json => export::write_file(
                &dir.join("summary.json"),
                &format!("{:#}\n", self.report.to_json()),
            ),
        }
    }
}

pub fn grid_of(config: &ExperimentConfig) -> Result<Alphabet, CliError> {
    Ok(Alphabet::integer_grid(config.grid.lo, config.grid.hi)?)
}

pub fn run(config: &ExperimentConfig, format: Format) -> Result<RunOutput, CliError> {
    config.validate()?;
    match config.kind {
        Kind::Test | Kind::Estimation => {
            let test = config.test.as_ref().expect("validated");
            let grid = grid_of(config)?;
            let (scenario, trace) = run_test_config(&grid, test)?;
            Ok(test_output(&scenario, &trace, format))
        }
        Kind::Mixture | Kind::Em => {
            let mixture = config.mixture.as_ref().expect("validated");
            let grid = grid_of(config)?;
            let (target, trace) = run_mixture_config(&grid, mixture, config.tol, config.kind == Kind::Em)?;
            Ok(mixture_output(&target, &trace, config.kind == Kind::Em, format))
        }
        Kind::RgCurve => rg_output(config.rg.as_ref().expect("validated"), format),
        Kind::Trials => {
            let trials = config.trials.as_ref().expect("validated");
            let settings = TrialSettings {
                count: trials.count,
                seed: config.seed,
                tol: config.tol,
                max_right_steps: trials.max_right_steps,
                include_em: trials.include_em,
                threads: trials.threads,
            };
            let summary = run_trials(&settings);
            let name = match format {
                Format::Csv => "trials.csv",
                Format::Json => "trials.json",
            };
            let contents = match format {
                Format::Csv => summary.to_csv(),
                Format::Json => format!("{:#}\n", summary.to_json()),
            };
            Ok(RunOutput {
                report: summary.report(),
                files: vec![(name.into(), contents)],
            })
        }
    }
}

pub fn scenario_of(grid: &Alphabet, test: &TestConfig) -> Result<TestScenario, CliError> {
    let mut scenario = TestScenario::gaussian(grid.clone(), &test.prior, &test.centers, &test.stddevs)?;
    if let Some(index) = test.neutral {
        let mode = match test.neutral_mode {
            NeutralModeConfig::Tautology => NeutralMode::Tautology,
            NeutralModeConfig::OwnRow => NeutralMode::OwnRow,
        };
        scenario = scenario.with_neutral(index, mode)?;
    }
    Ok(scenario)
}

pub fn run_test_config(
    grid: &Alphabet,
    test: &TestConfig,
) -> Result<(TestScenario, TestTrace), CliError> {
    let scenario = scenario_of(grid, test)?;
    let init = Partition::from_boundaries(grid, &test.init_boundaries)?;
    let trace = run_cm_test(&scenario, &init)?;
    Ok((scenario, trace))
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| fmt_num(*v)).collect::<Vec<_>>().join(",")
}

pub fn test_output(scenario: &TestScenario, trace: &TestTrace, format: Format) -> RunOutput {
    let mut report = Report::default();
    let grid = scenario.grid();
    report.entry("converged", trace.converged.to_string());
    report.entry("iterations", trace.iterations.to_string());
    report.checks.push(Check::exact("converged", trace.converged, true));
    if let Some(b) = trace.final_partition().boundaries(grid) {
        if b.len() == 1 {
            report.entry("z*", fmt_num(b[0]));
        }
        report.entry("boundaries", join(&b));
    }
    let sequence: Vec<String> = trace
        .steps
        .iter()
        .map(|s| s.boundaries.as_deref().map_or("-".into(), join))
        .collect();
    report.entry("boundary_sequence", sequence.join(" "));
    report.number("H(X)", entropy(scenario.prior()));
    if let Ok(info) = scenario.observation_information() {
        report.number("I(X;Z)", info);
    }
    if let Some(last) = trace.final_step() {
        report.number("I(X;Y)", last.shannon_info);
        report.number("I(X;Theta)", last.semantic_info);
    }
    if let Some((a, b)) = &trace.oscillation {
        let show = |p: &Partition| p.boundaries(grid).map_or("-".into(), |b| join(&b));
        report.entry("oscillation", format!("{} <-> {}", show(a), show(b)));
    }
    let file = match format {
        Format::Csv => ("trace.csv".into(), export::test_csv(trace, grid)),
        Format::Json => (
            "trace.json".into(),
            format!("{:#}\n", export::test_json(trace, grid)),
        ),
    };
    RunOutput {
        report,
        files: vec![file],
    }
}

fn params(rows: &[[f64; 3]]) -> Vec<(f64, f64, f64)> {
    rows.iter().map(|&[c, d, w]| (c, d, w)).collect()
}

pub fn method_of(method: MethodConfig) -> RightStepMethod {
    match method {
        MethodConfig::ExactGrid => RightStepMethod::ExactGrid,
        MethodConfig::WeightedMoments => RightStepMethod::WeightedMoments,
    }
}

pub fn run_mixture_config(
    grid: &Alphabet,
    mixture: &MixtureConfig,
    tol: f64,
    em: bool,
) -> Result<(Distribution, MixtureTrace), CliError> {
    let target = MixtureModel::from_params(grid.clone(), &params(&mixture.truth))?.mixture()?;
    let start = MixtureModel::from_params(grid.clone(), &params(&mixture.start))?;
    let options = MixtureOptions {
        tol,
        max_right_steps: mixture.max_right_steps,
        method: method_of(mixture.method),
    };
    let trace = if em {
        run_em(&target, &start, options)?
    } else {
        run_cm_mixture(&target, &start, options)?
    };
    Ok((target, trace))
}

pub fn mixture_output(
    target: &Distribution,
    trace: &MixtureTrace,
    em: bool,
    format: Format,
) -> RunOutput {
    let mut report = Report::default();
    report.entry("converged", trace.converged.to_string());
    report.checks.push(Check::exact("converged", trace.converged, true));
    report.entry(if em { "em_steps" } else { "right_steps" }, trace.right_steps.to_string());
    report.number("H(X)", entropy(target));
    report.number("start_H_QP", trace.initial_monitor().h_qp);
    report.number("H_QP", trace.final_monitor().h_qp);
    report.number("G", trace.final_monitor().g);
    report.number("R", trace.final_monitor().r);
    if !em {
        report.entry("guard_trips", trace.guard_trips.to_string());
    }
    let model = trace.final_model();
    for (j, (c, py)) in model.components().iter().zip(model.py().mass()).enumerate() {
        report.entry(
            &format!("component{}", j + 1),
            format!("c={} d={} py={}", fmt_num(c.center), fmt_num(c.stddev), fmt_num(*py)),
        );
    }
    for w in &trace.warnings {
        report.entry("warning", w.clone());
    }
    let file = match format {
        Format::Csv => (
            "trace.csv".into(),
            export::mixture_csv(&trace.steps, model.len(), em),
        ),
        Format::Json => (
            "trace.json".into(),
            format!("{:#}\n", export::mixture_json(&trace.steps)),
        ),
    };
    RunOutput {
        report,
        files: vec![file],
    }
}

pub fn payoff_of(rg: &RgConfig, prior: &Distribution) -> Result<PayoffMatrix, CliError> {
    if let Some(p) = &rg.payoff {
        return Ok(PayoffMatrix::new(p.clone())?);
    }
    if let Some(rows) = &rg.channel {
        let channel = Channel::new(
            prior.support().clone(),
            Alphabet::classes(rows.len())?,
            rows.clone(),
        )?;
        let sem = SemanticChannel::matched(&channel)?;
        return Ok(PayoffMatrix::from_semantic(prior, &sem)?);
    }
    let d = rg.distortion.as_ref().expect("validated");
    Ok(PayoffMatrix::from_distortion(d)?)
}

pub fn rg_output(rg: &RgConfig, format: Format) -> Result<RunOutput, CliError> {
    let prior = Distribution::from_weights(Alphabet::classes(rg.prior.len())?, rg.prior.clone())?;
    let payoff = payoff_of(rg, &prior)?;
    let curve = rg_curve(&prior, &payoff, &rg.s_values())?;
    let mut report = Report::default();
    report.entry("points", curve.points.len().to_string());
    if let Some(g) = curve.g_plus {
        report.number("G+", g);
    }
    if let Some(g) = curve.g_minus {
        report.number("G-", g);
    }
    let file = match format {
        Format::Csv => ("rg.csv".into(), export::rg_csv(&curve)),
        Format::Json => ("rg.json".into(), format!("{:#}\n", export::rg_json(&curve))),
    };
    Ok(RunOutput {
        report,
        files: vec![file],
    })
}
