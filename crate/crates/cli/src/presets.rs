//! Named scenarios with their expected results built in.

use cm_core::{entropy, Alphabet, MixtureTrace, TestScenario, TestTrace};

use crate::config::{
    ExperimentConfig, Format, GridConfig, Kind, MethodConfig, MixtureConfig, NeutralModeConfig,
    OutputConfig, TestConfig,
};
use crate::error::CliError;
use crate::report::{Check, Report};
use crate::runner::{self, RunOutput};

pub const PRESETS: [&str; 6] = [
    "test-ex1",
    "test-ex2",
    "test-ex3-good",
    "test-ex3-bad",
    "mix-ex1",
    "mix-ex2",
];

fn base(kind: Kind) -> ExperimentConfig {
    ExperimentConfig {
        kind,
        tol: cm_core::mixture::DEFAULT_TOL,
        seed: 0,
        grid: GridConfig::default(),
        test: None,
        mixture: None,
        rg: None,
        trials: None,
        output: OutputConfig::default(),
    }
}

fn two_class_test(init: &[f64], neutral: Option<usize>) -> TestConfig {
    TestConfig {
        prior: vec![0.8, 0.2],
        centers: vec![30.0, 70.0],
        stddevs: vec![15.0, 10.0],
        init_boundaries: init.to_vec(),
        neutral,
        neutral_mode: NeutralModeConfig::Tautology,
    }
}

fn three_class_test(init: &[f64]) -> TestConfig {
    TestConfig {
        prior: vec![0.5, 0.35, 0.15],
        centers: vec![20.0, 50.0, 80.0],
        stddevs: vec![15.0, 10.0, 10.0],
        init_boundaries: init.to_vec(),
        neutral: None,
        neutral_mode: NeutralModeConfig::Tautology,
    }
}

fn mixture(truth: [[f64; 3]; 2], start: [[f64; 3]; 2]) -> MixtureConfig {
    MixtureConfig {
        truth: truth.to_vec(),
        start: start.to_vec(),
        method: MethodConfig::ExactGrid,
        max_right_steps: cm_core::mixture::DEFAULT_MAX_RIGHT_STEPS,
    }
}

/// Configuration behind a preset, or `None` for an unknown name.
pub fn preset_config(name: &str) -> Option<ExperimentConfig> {
    let mut config = match name {
        "test-ex1" | "test-ex2" | "test-ex3-good" | "test-ex3-bad" => base(Kind::Test),
        "mix-ex1" | "mix-ex2" => base(Kind::Mixture),
        _ => return None,
    };
    match name {
        "test-ex1" => config.test = Some(two_class_test(&[50.0], None)),
        "test-ex2" => config.test = Some(two_class_test(&[50.0, 60.0], Some(1))),
        "test-ex3-good" => config.test = Some(three_class_test(&[50.0, 60.0])),
        "test-ex3-bad" => config.test = Some(three_class_test(&[9.0, 20.0])),
        // The start stddev of the second component is 15, which gives the
        // published starting divergence of 0.410 bit.
        "mix-ex1" => {
            config.mixture = Some(mixture(
                [[35.0, 8.0, 0.7], [65.0, 12.0, 0.3]],
                [[30.0, 15.0, 0.5], [70.0, 15.0, 0.5]],
            ))
        }
        "mix-ex2" => {
            config.mixture = Some(mixture(
                [[35.0, 8.0, 0.1], [65.0, 12.0, 0.9]],
                [[30.0, 8.0, 0.5], [70.0, 8.0, 0.5]],
            ))
        }
        _ => unreachable!("name matched above"),
    }
    Some(config)
}

fn final_boundaries(trace: &TestTrace, grid: &Alphabet) -> Vec<f64> {
    trace.final_partition().boundaries(grid).unwrap_or_default()
}

fn last_shannon(trace: &TestTrace) -> f64 {
    trace.final_step().map_or(f64::NAN, |s| s.shannon_info)
}

fn test_checks(name: &str, scenario: &TestScenario, trace: &TestTrace) -> Result<Vec<Check>, CliError> {
    let grid = scenario.grid();
    let boundaries = final_boundaries(trace, grid);
    let checks = match name {
        "test-ex1" => {
            let sequence: Vec<f64> = trace
                .steps
                .iter()
                .filter_map(|s| s.boundaries.as_ref().map(|b| b[0]))
                .collect();
            vec![
                Check::exact("boundary_sequence", sequence, vec![53.0, 54.0, 54.0]),
                Check::exact("z*", boundaries, vec![54.0]),
                Check::near("H(X)", entropy(scenario.prior()), 0.72, 0.01),
                Check::near("I(X;Z)", scenario.observation_information()?, 0.55, 0.01),
                Check::near("I(X;Y)", last_shannon(trace), 0.47, 0.01),
            ]
        }
        "test-ex2" => {
            let ex1 = preset_config("test-ex1").expect("known preset");
            let (_, ex1_trace) = runner::run_test_config(grid, ex1.test.as_ref().expect("test preset"))?;
            let (i2, i1) = (last_shannon(trace), last_shannon(&ex1_trace));
            vec![
                Check::exact("boundaries", boundaries, vec![47.0, 59.0]),
                Check::near("I(X;Y)", i2, 0.52, 0.01),
                Check::holds(
                    "I(X;Y) above test-ex1",
                    i2 > i1,
                    format!("{} vs {}", crate::export::fmt_num(i2), crate::export::fmt_num(i1)),
                ),
            ]
        }
        "test-ex3-good" => vec![
            Check::exact("boundaries", boundaries, vec![35.0, 66.0]),
            Check::at_most("iterations", trace.iterations as f64, 5.0),
        ],
        "test-ex3-bad" => vec![
            Check::exact("boundaries", boundaries, vec![35.0, 66.0]),
            Check::holds(
                "iterations in 8..=14",
                (8..=14).contains(&trace.iterations),
                trace.iterations.to_string(),
            ),
        ],
        _ => Vec::new(),
    };
    Ok(checks)
}

fn mixture_checks(name: &str, trace: &MixtureTrace) -> Vec<Check> {
    let (start_h, expected, tol) = match name {
        "mix-ex1" => (0.410, [[35.4, 8.3, 0.720], [66.2, 11.4, 0.280]], [0.3, 0.3, 0.01]),
        "mix-ex2" => (0.680, [[38.0, 9.3, 0.134], [65.8, 11.5, 0.866]], [0.4, 0.4, 0.02]),
        _ => return Vec::new(),
    };
    let mut checks = vec![
        Check::near("start_H_QP", trace.initial_monitor().h_qp, start_h, 0.005),
        Check::exact("right_steps", trace.right_steps, 5),
        Check::at_most("H_QP", trace.final_monitor().h_qp, 0.001),
    ];
    let model = trace.final_model();
    for (j, ((comp, py), want)) in model
        .components()
        .iter()
        .zip(model.py().mass())
        .zip(expected)
        .enumerate()
    {
        let k = j + 1;
        checks.push(Check::near(&format!("c{k}"), comp.center, want[0], tol[0]));
        checks.push(Check::near(&format!("d{k}"), comp.stddev, want[1], tol[1]));
        checks.push(Check::near(&format!("py{k}"), *py, want[2], tol[2]));
    }
    checks
}

/// Runs a preset and attaches its checks. `tol` overrides the mixture
/// convergence threshold.
pub fn run_preset(name: &str, format: Format, tol: Option<f64>) -> Result<RunOutput, CliError> {
    let mut config = preset_config(name).ok_or_else(|| {
        CliError::Usage(format!("unknown preset `{name}`; known: {}", PRESETS.join(", ")))
    })?;
    if let Some(tol) = tol {
        config.tol = tol;
    }
    config.validate()?;
    let grid = runner::grid_of(&config)?;
    let mut output = match config.kind {
        Kind::Test => {
            let (scenario, trace) =
                runner::run_test_config(&grid, config.test.as_ref().expect("test preset"))?;
            let mut out = runner::test_output(&scenario, &trace, format);
            out.report.checks.extend(test_checks(name, &scenario, &trace)?);
            out
        }
        _ => {
            let mix = config.mixture.as_ref().expect("mixture preset");
            let (target, trace) = runner::run_mixture_config(&grid, mix, config.tol, false)?;
            let mut out = runner::mixture_output(&target, &trace, false, format);
            out.report.checks.extend(mixture_checks(name, &trace));
            out
        }
    };
    let mut report = Report::default();
    report.entry("preset", name);
    report.entries.append(&mut output.report.entries);
    report.checks = std::mem::take(&mut output.report.checks);
    output.report = report;
    Ok(output)
}
