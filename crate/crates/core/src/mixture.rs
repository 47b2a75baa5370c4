//! Channels' matching for Gaussian mixtures on a grid.
//!
//! Left-step a builds the Shannon channel `P(y_j|x) = P(y_j)P(x|θ_j)/Q(x)`,
//! Left-step b iterates `P(Y)` to the marginal that channel induces, and the
//! Right-step moves each component to maximize the semantic mutual
//! information `G` with the channel fixed. The divergence `H(Q||P) = R_Q - G`
//! of the predicted mixture from the target never increases.

use crate::cm_test::{softmax_decision, FuzzyDecision, Sharpness};
use crate::em::EMObjectives;
use crate::error::{Error, Result};
use crate::prob::{discretized_gaussian, Alphabet, Distribution, PROB_FLOOR};
use crate::semantic::{log2_ratio, SaturatingSum, SATURATED_BITS};

/// Smallest stddev a component may take, in grid units.
pub const D_MIN: f64 = 0.5;

/// Default stopping threshold on `H(Q||P)`, in bits.
pub const DEFAULT_TOL: f64 = 0.001;

/// Default cap on Right-steps.
pub const DEFAULT_MAX_RIGHT_STEPS: usize = 200;

/// Left-step b stops once no weight moves by more than this.
pub const LEFT_B_TOL: f64 = 1e-9;

/// Left-step b inner iteration cap.
pub const LEFT_B_MAX_ITERATIONS: usize = 1000;

/// Until one clean Left-step b, weights below `GUARD_FRACTION / n` abort it.
pub const GUARD_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianComponent {
    pub center: f64,
    pub stddev: f64,
}

impl GaussianComponent {
    pub fn new(center: f64, stddev: f64) -> Result<Self> {
        if !center.is_finite() {
            return Err(Error::InvalidParameter(format!("center {center} is not finite")));
        }
        if !(stddev > 0.0) || !stddev.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "stddev must be positive, got {stddev}"
            )));
        }
        Ok(Self { center, stddev })
    }
}

/// Components `θ_j` with mixing weights `P(Y)` on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureModel {
    grid: Alphabet,
    components: Vec<GaussianComponent>,
    py: Distribution,
}

impl MixtureModel {
    pub fn new(grid: Alphabet, components: Vec<GaussianComponent>, py: Distribution) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidParameter("a mixture needs a component".into()));
        }
        if py.len() != components.len() {
            return Err(Error::SupportMismatch {
                left: components.len(),
                right: py.len(),
            });
        }
        Ok(Self {
            grid,
            components,
            py,
        })
    }

    /// Model from `(center, stddev, weight)` triples.
    pub fn from_params(grid: Alphabet, params: &[(f64, f64, f64)]) -> Result<Self> {
        let components = params
            .iter()
            .map(|&(c, d, _)| GaussianComponent::new(c, d))
            .collect::<Result<Vec<_>>>()?;
        let py = Distribution::new(
            Alphabet::classes(params.len())?,
            params.iter().map(|p| p.2).collect(),
        )?;
        Self::new(grid, components, py)
    }

    pub fn grid(&self) -> &Alphabet {
        &self.grid
    }

    pub fn components(&self) -> &[GaussianComponent] {
        &self.components
    }

    pub fn py(&self) -> &Distribution {
        &self.py
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn with_py(&self, py: Distribution) -> Result<Self> {
        Self::new(self.grid.clone(), self.components.clone(), py)
    }

    pub fn with_components(&self, components: Vec<GaussianComponent>) -> Result<Self> {
        Self::new(self.grid.clone(), components, self.py.clone())
    }

    /// `P(X|θ_j)` for every component.
    pub fn likelihoods(&self) -> Result<Vec<Distribution>> {
        self.components
            .iter()
            .map(|c| discretized_gaussian(&self.grid, c.center, c.stddev))
            .collect()
    }

    /// The predicted mixture `Q(X) = Σ_j P(y_j) P(X|θ_j)`.
    pub fn mixture(&self) -> Result<Distribution> {
        let liks = self.likelihoods()?;
        Distribution::from_weights(self.grid.clone(), mix(self.py.mass(), &liks))
    }

    /// Initialization warnings: all centers on one side of the target mean.
    pub fn init_warnings(&self, target: &Distribution) -> Vec<String> {
        let mean = target.mean();
        let above = self.components.iter().filter(|c| c.center > mean).count();
        let below = self.components.iter().filter(|c| c.center < mean).count();
        if self.len() > 1 && (above == self.len() || below == self.len()) {
            vec![format!(
                "all component centers lie on one side of the target mean {mean:.3}"
            )]
        } else {
            Vec::new()
        }
    }
}

fn mix(py: &[f64], liks: &[Distribution]) -> Vec<f64> {
    let n = liks[0].len();
    (0..n)
        .map(|i| py.iter().zip(liks).map(|(p, l)| p * l.prob(i)).sum())
        .collect()
}

/// Output of Left-step a.
#[derive(Debug, Clone, PartialEq)]
pub struct Responsibilities {
    /// `P(y_j|x_i)` indexed `[j][i]`.
    pub channel: Vec<Vec<f64>>,
    pub q: Distribution,
}

fn responsibilities(target: &Distribution, py: &[f64], liks: &[Distribution]) -> Result<Responsibilities> {
    let grid = liks[0].support();
    if target.support() != grid {
        return Err(Error::SupportMismatch {
            left: target.len(),
            right: grid.len(),
        });
    }
    let q = mix(py, liks);
    let mut channel = vec![vec![0.0; q.len()]; py.len()];
    for (i, &qi) in q.iter().enumerate() {
        if qi > PROB_FLOOR {
            for (j, lik) in liks.iter().enumerate() {
                channel[j][i] = py[j] * lik.prob(i) / qi;
            }
        } else if target.prob(i) > 0.0 {
            return Err(Error::UndefinedResponsibility { index: i });
        } else {
            for (j, &p) in py.iter().enumerate() {
                channel[j][i] = p;
            }
        }
    }
    Ok(Responsibilities {
        channel,
        q: Distribution::from_weights(grid.clone(), q)?,
    })
}

/// Left-step a: the Shannon channel implied by the current model.
pub fn left_step_a(target: &Distribution, model: &MixtureModel) -> Result<Responsibilities> {
    responsibilities(target, model.py().mass(), &model.likelihoods()?)
}

/// Output of Left-step b.
#[derive(Debug, Clone, PartialEq)]
pub struct LeftStepB {
    pub py: Distribution,
    pub iterations: usize,
    /// The loop stopped early because a weight fell below the guard.
    pub guard_tripped: bool,
    pub converged: bool,
}

/// Left-step b: iterates `P(y_j) ← Σ_i P(x_i) P(y_j|x_i)` to its fixed
/// point. With `guard` set, stops before any weight drops below `0.1/n`
/// and returns the last weights above it.
pub fn left_step_b(target: &Distribution, model: &MixtureModel, guard: bool) -> Result<LeftStepB> {
    let liks = model.likelihoods()?;
    let n = model.len();
    let floor = GUARD_FRACTION / n as f64;
    let mut py = model.py().mass().to_vec();
    for iteration in 1..=LEFT_B_MAX_ITERATIONS {
        let resp = responsibilities(target, &py, &liks)?;
        let next = marginal(target, &resp.channel);
        if guard && next.iter().any(|&p| p < floor) {
            return Ok(LeftStepB {
                py: Distribution::from_weights(model.py().support().clone(), py)?,
                iterations: iteration - 1,
                guard_tripped: true,
                converged: false,
            });
        }
        let residual = next
            .iter()
            .zip(&py)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        py = next;
        if residual < LEFT_B_TOL {
            return Ok(LeftStepB {
                py: Distribution::from_weights(model.py().support().clone(), py)?,
                iterations: iteration,
                guard_tripped: false,
                converged: true,
            });
        }
    }
    Ok(LeftStepB {
        py: Distribution::from_weights(model.py().support().clone(), py)?,
        iterations: LEFT_B_MAX_ITERATIONS,
        guard_tripped: false,
        converged: false,
    })
}

/// `P⁺¹(y_j) = Σ_i P(x_i) P(y_j|x_i)`.
fn marginal(target: &Distribution, channel: &[Vec<f64>]) -> Vec<f64> {
    channel
        .iter()
        .map(|row| row.iter().zip(target.mass()).map(|(c, p)| c * p).sum())
        .collect()
}

/// How the Right-step fits each component to its weighted share of the
/// target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RightStepMethod {
    /// Exact maximizer of the weighted log-likelihood of the discretized
    /// Gaussian.
    #[default]
    ExactGrid,
    /// Weighted mean and stddev, exact only for an untruncated Gaussian.
    WeightedMoments,
}

/// Right-step: per component, maximize `Σ_i w_ij log P(x_i|θ_j)` with
/// `w_ij = P(x_i) P(y_j|x_i)`.
pub fn right_step(
    target: &Distribution,
    channel: &[Vec<f64>],
    grid: &Alphabet,
    method: RightStepMethod,
) -> Result<Vec<GaussianComponent>> {
    if target.support() != grid {
        return Err(Error::SupportMismatch {
            left: target.len(),
            right: grid.len(),
        });
    }
    channel
        .iter()
        .enumerate()
        .map(|(j, row)| {
            let w: Vec<f64> = row.iter().zip(target.mass()).map(|(c, p)| c * p).collect();
            let total: f64 = w.iter().sum();
            if !(total > PROB_FLOOR) {
                return Err(Error::ComponentStarved(j));
            }
            let w: Vec<f64> = w.iter().map(|v| v / total).collect();
            let moments = weighted_moments(&w, grid.labels());
            match method {
                RightStepMethod::WeightedMoments => Ok(moments),
                RightStepMethod::ExactGrid => Ok(exact_fit(&w, grid.labels(), moments)),
            }
        })
        .collect()
}

fn weighted_moments(w: &[f64], x: &[f64]) -> GaussianComponent {
    let mean: f64 = w.iter().zip(x).map(|(w, x)| w * x).sum();
    let var: f64 = w.iter().zip(x).map(|(w, x)| w * (x - mean).powi(2)).sum();
    GaussianComponent {
        center: mean,
        stddev: var.sqrt().max(D_MIN),
    }
}

/// `Σ w log p(c, d)` in nats for the discretized Gaussian, on centered
/// coordinates `u`.
fn weighted_log_lik(w: &[f64], u: &[f64], eta1: f64, eta2: f64) -> f64 {
    let a: Vec<f64> = u.iter().map(|u| eta1 * u + eta2 * u * u).collect();
    let shift = a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_z = shift + a.iter().map(|v| (v - shift).exp()).sum::<f64>().ln();
    w.iter().zip(&a).map(|(w, a)| w * (a - log_z)).sum()
}

/// Damped Newton in the natural parameters `(c/d², -1/(2d²))`, matching the
/// grid mean and second moment to the weighted ones.
/// Largest exponent `(z - c)² / 2d²` at the nearest cell that still leaves
/// a nonzero discretized density.
const MAX_NEAREST_EXPONENT: f64 = 700.0;

fn representable(x: &[f64], comp: GaussianComponent) -> bool {
    let nearest = x
        .iter()
        .map(|z| (z - comp.center).abs())
        .fold(f64::INFINITY, f64::min);
    nearest * nearest / (2.0 * comp.stddev * comp.stddev) <= MAX_NEAREST_EXPONENT
}

fn exact_fit(w: &[f64], x: &[f64], start: GaussianComponent) -> GaussianComponent {
    let origin = start.center;
    let u: Vec<f64> = x.iter().map(|x| x - origin).collect();
    let m1: f64 = w.iter().zip(&u).map(|(w, u)| w * u).sum();
    let m2: f64 = w.iter().zip(&u).map(|(w, u)| w * u * u).sum();
    let to_component = |e1: f64, e2: f64| {
        let var = -0.5 / e2;
        GaussianComponent {
            center: origin + e1 * var,
            stddev: var.sqrt(),
        }
    };
    let mut e1 = 0.0;
    let mut e2 = -0.5 / (start.stddev * start.stddev);
    let mut f = weighted_log_lik(w, &u, e1, e2);
    for _ in 0..100 {
        let a: Vec<f64> = u.iter().map(|u| e1 * u + e2 * u * u).collect();
        let shift = a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let p: Vec<f64> = a.iter().map(|v| (v - shift).exp()).collect();
        let z: f64 = p.iter().sum();
        let moment = |k: i32| -> f64 { p.iter().zip(&u).map(|(p, u)| p * u.powi(k)).sum::<f64>() / z };
        let (mu1, mu2, mu3, mu4) = (moment(1), moment(2), moment(3), moment(4));
        let g1 = m1 - mu1;
        let g2 = m2 - mu2;
        if g1.abs().max(g2.abs()) < 1e-10 * (1.0 + m2) {
            break;
        }
        let h11 = mu2 - mu1 * mu1;
        let h12 = mu3 - mu1 * mu2;
        let h22 = mu4 - mu2 * mu2;
        let det = h11 * h22 - h12 * h12;
        if !(det > 0.0) {
            break;
        }
        let s1 = (h22 * g1 - h12 * g2) / det;
        let s2 = (h11 * g2 - h12 * g1) / det;
        let mut t = 1.0;
        let mut accepted = false;
        while t >= 1e-12 {
            let n1 = e1 + t * s1;
            let n2 = e2 + t * s2;
            let candidate = to_component(n1, n2);
            if n2 < 0.0 && candidate.stddev >= D_MIN && representable(x, candidate) {
                let fnew = weighted_log_lik(w, &u, n1, n2);
                if fnew >= f - 1e-15 {
                    e1 = n1;
                    e2 = n2;
                    f = fnew;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    to_component(e1, e2)
}

/// Convergence quantities, all in bits.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureMonitor {
    /// Semantic mutual information `G = Σ w log₂(P(x|θ_j)/P(x))`.
    pub g: f64,
    /// `R = R_Q - H(Y||Y⁺¹)`.
    pub r: f64,
    /// `R_Q = Σ w log₂(P(y_j|x)/P(y_j))`.
    pub r_q: f64,
    /// `H(Q||P) = R_Q - G`.
    pub h_qp: f64,
    pub h_y_yplus: f64,
    pub q: Distribution,
    /// `P⁺¹(Y)`.
    pub py_next: Vec<f64>,
}

/// Monitor of a model with its own Left-step a channel.
pub fn monitor(target: &Distribution, model: &MixtureModel) -> Result<MixtureMonitor> {
    let liks = model.likelihoods()?;
    let resp = responsibilities(target, model.py().mass(), &liks)?;
    evaluate(target, &resp.channel, model.py().mass(), &liks, resp.q)
}

/// Monitor of `model` read through a channel built from an earlier model
/// with weights `py`. `R_Q` and `H(Y||Y⁺¹)` depend on the channel alone, so
/// after a Right-step `ΔH(Q||P) = -ΔG` exactly.
pub fn monitor_with_channel(
    target: &Distribution,
    model: &MixtureModel,
    channel: &[Vec<f64>],
    py: &Distribution,
) -> Result<MixtureMonitor> {
    if channel.len() != model.len() || py.len() != model.len() {
        return Err(Error::SupportMismatch {
            left: model.len(),
            right: channel.len(),
        });
    }
    let q = model.mixture()?;
    evaluate(target, channel, py.mass(), &model.likelihoods()?, q)
}

fn evaluate(
    target: &Distribution,
    channel: &[Vec<f64>],
    py: &[f64],
    liks: &[Distribution],
    q: Distribution,
) -> Result<MixtureMonitor> {
    let mut g = SaturatingSum::default();
    let mut r_q = SaturatingSum::default();
    for (j, row) in channel.iter().enumerate() {
        for (i, &p) in target.mass().iter().enumerate() {
            let w = p * row[i];
            if w <= 0.0 {
                continue;
            }
            g.add(w, log2_ratio(liks[j].prob(i), p));
            r_q.add(w, log2_ratio(row[i], py[j]));
        }
    }
    let py_next = marginal(target, channel);
    let h_y_yplus: f64 = py_next
        .iter()
        .zip(py)
        .filter(|(a, _)| **a > PROB_FLOOR)
        .map(|(a, b)| a * log2_ratio(*a, *b).max(-SATURATED_BITS))
        .sum();
    let g = g.value()?;
    let r_q = r_q.value()?;
    Ok(MixtureMonitor {
        g,
        r: r_q - h_y_yplus,
        r_q,
        h_qp: r_q - g,
        h_y_yplus,
        q,
        py_next,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepKind {
    LeftA,
    LeftB,
    Right,
    Em,
}

impl StepKind {
    pub fn as_str(self) -> &'static str {
        match self {
            StepKind::LeftA => "left_a",
            StepKind::LeftB => "left_b",
            StepKind::Right => "right",
            StepKind::Em => "em",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureStep {
    pub kind: StepKind,
    /// Monitor of the model after this step, with its own channel.
    pub monitor: MixtureMonitor,
    /// For Right-steps, the same model read through the channel the step
    /// held fixed.
    pub held: Option<MixtureMonitor>,
    pub objectives: Option<EMObjectives>,
    pub model: MixtureModel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureTrace {
    pub steps: Vec<MixtureStep>,
    pub converged: bool,
    pub right_steps: usize,
    pub guard_trips: usize,
    pub warnings: Vec<String>,
}

impl MixtureTrace {
    pub fn final_model(&self) -> &MixtureModel {
        &self.steps.last().expect("a trace records its start").model
    }

    pub fn final_monitor(&self) -> &MixtureMonitor {
        &self.steps.last().expect("a trace records its start").monitor
    }

    pub fn initial_monitor(&self) -> &MixtureMonitor {
        &self.steps[0].monitor
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixtureOptions {
    pub tol: f64,
    pub max_right_steps: usize,
    pub method: RightStepMethod,
}

impl Default for MixtureOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_right_steps: DEFAULT_MAX_RIGHT_STEPS,
            method: RightStepMethod::default(),
        }
    }
}

/// Runs Left-steps a and b and Right-steps until `H(Q||P) ≤ tol`.
///
/// The trace starts with the initial model (`LeftA`) and then records every
/// Left-step b and Right-step. The Left-step a that follows a Right-step
/// would repeat the Right record and is not recorded again.
pub fn run_cm_mixture(
    target: &Distribution,
    init: &MixtureModel,
    options: MixtureOptions,
) -> Result<MixtureTrace> {
    let mut model = init.clone();
    let mut steps = vec![MixtureStep {
        kind: StepKind::LeftA,
        monitor: monitor(target, &model)?,
        held: None,
        objectives: None,
        model: model.clone(),
    }];
    let mut right_steps = 0;
    let mut guard_trips = 0;
    let mut clean_pass = false;
    loop {
        let b = left_step_b(target, &model, !clean_pass)?;
        if b.guard_tripped {
            guard_trips += 1;
        } else {
            clean_pass = true;
        }
        model = model.with_py(b.py)?;
        let after_b = monitor(target, &model)?;
        let h = after_b.h_qp;
        steps.push(MixtureStep {
            kind: StepKind::LeftB,
            monitor: after_b,
            held: None,
            objectives: None,
            model: model.clone(),
        });
        if h <= options.tol || right_steps >= options.max_right_steps {
            return Ok(MixtureTrace {
                converged: h <= options.tol,
                steps,
                right_steps,
                guard_trips,
                warnings: init.init_warnings(target),
            });
        }
        let channel = left_step_a(target, &model)?.channel;
        let components = right_step(target, &channel, model.grid(), options.method)?;
        let next = model.with_components(components)?;
        let held = monitor_with_channel(target, &next, &channel, model.py())?;
        model = next;
        right_steps += 1;
        steps.push(MixtureStep {
            kind: StepKind::Right,
            monitor: monitor(target, &model)?,
            held: Some(held),
            objectives: None,
            model: model.clone(),
        });
    }
}

/// Decision function `P(y_j|x) ∝ P(y_j) P(x|θ_j)^s`. The crisp limit picks
/// the largest likelihood, ties to the larger weight and then the lower
/// index.
pub fn decision_rule(model: &MixtureModel, s: Sharpness) -> Result<FuzzyDecision> {
    let liks = model.likelihoods()?;
    let py = model.py().mass();
    match s {
        Sharpness::Finite(s) if s.is_finite() => {
            let scores: Vec<Vec<f64>> = liks
                .iter()
                .map(|l| l.mass().iter().map(|&v| log2_ratio(v, 1.0)).collect())
                .collect();
            Ok(softmax_decision(&scores, py, s))
        }
        Sharpness::Finite(s) => Err(Error::InvalidParameter(format!(
            "sharpness must be finite, got {s}"
        ))),
        Sharpness::Crisp => {
            let cells = model.grid().len();
            let mut table = vec![vec![0.0; cells]; model.len()];
            for i in 0..cells {
                let mut best = 0;
                for j in 1..model.len() {
                    let (a, b) = (liks[j].prob(i), liks[best].prob(i));
                    if a > b || (a == b && py[j] > py[best]) {
                        best = j;
                    }
                }
                table[best][i] = 1.0;
            }
            Ok(FuzzyDecision {
                table,
                fallback_cells: Vec::new(),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::kl_divergence;
    use approx::assert_abs_diff_eq;

    fn grid() -> Alphabet {
        Alphabet::integer_grid(1, 100).unwrap()
    }

    fn model(params: &[(f64, f64, f64)]) -> MixtureModel {
        MixtureModel::from_params(grid(), params).unwrap()
    }

    fn table3() -> (Distribution, MixtureModel) {
        let truth = model(&[(35.0, 8.0, 0.7), (65.0, 12.0, 0.3)]);
        let start = model(&[(30.0, 15.0, 0.5), (70.0, 15.0, 0.5)]);
        (truth.mixture().unwrap(), start)
    }

    fn table4() -> (Distribution, MixtureModel) {
        let truth = model(&[(35.0, 8.0, 0.1), (65.0, 12.0, 0.9)]);
        let start = model(&[(30.0, 8.0, 0.5), (70.0, 8.0, 0.5)]);
        (truth.mixture().unwrap(), start)
    }

    #[test]
    fn single_component_channel() {
        let m = model(&[(50.0, 10.0, 1.0)]);
        let target = m.mixture().unwrap();
        let resp = left_step_a(&target, &m).unwrap();
        assert!(resp.channel[0].iter().all(|&v| (v - 1.0).abs() < 1e-15));
        assert_eq!(resp.q, target);
    }

    #[test]
    fn identical_components_split_evenly() {
        let m = model(&[(50.0, 10.0, 0.5), (50.0, 10.0, 0.5)]);
        let target = m.mixture().unwrap();
        let resp = left_step_a(&target, &m).unwrap();
        assert!(resp.channel.iter().flatten().all(|&v| (v - 0.5).abs() < 1e-15));
    }

    #[test]
    fn undefined_responsibility() {
        let g = Alphabet::integer_grid(1, 3).unwrap();
        let target = Distribution::new(g.clone(), vec![0.0, 0.0, 1.0]).unwrap();
        let m = MixtureModel::from_params(g, &[(1.0, 0.01, 1.0)]).unwrap();
        assert_eq!(
            left_step_a(&target, &m),
            Err(Error::UndefinedResponsibility { index: 2 })
        );
    }

    #[test]
    fn table3_start_divergence() {
        let (target, start) = table3();
        let m = monitor(&target, &start).unwrap();
        assert_abs_diff_eq!(m.h_qp, 0.410, epsilon = 0.005);
        let literal = model(&[(30.0, 15.0, 0.5), (70.0, 10.0, 0.5)]);
        assert_abs_diff_eq!(monitor(&target, &literal).unwrap().h_qp, 0.4717, epsilon = 1e-3);
    }

    #[test]
    fn table3_run() {
        let (target, start) = table3();
        let trace = run_cm_mixture(&target, &start, MixtureOptions::default()).unwrap();
        assert!(trace.converged);
        assert_eq!(trace.right_steps, 5);
        let fin = trace.final_model();
        let c = fin.components();
        assert_abs_diff_eq!(c[0].center, 35.4, epsilon = 0.3);
        assert_abs_diff_eq!(c[0].stddev, 8.3, epsilon = 0.3);
        assert_abs_diff_eq!(c[1].center, 66.2, epsilon = 0.3);
        assert_abs_diff_eq!(c[1].stddev, 11.4, epsilon = 0.3);
        assert_abs_diff_eq!(fin.py().prob(0), 0.720, epsilon = 0.01);
        assert!(trace.final_monitor().h_qp <= 0.001);
        assert!((trace.final_monitor().r - trace.final_monitor().g).abs() <= 0.01);
    }

    #[test]
    fn table4_run() {
        let (target, start) = table4();
        assert_abs_diff_eq!(monitor(&target, &start).unwrap().h_qp, 0.680, epsilon = 0.005);
        let trace = run_cm_mixture(&target, &start, MixtureOptions::default()).unwrap();
        assert!(trace.converged);
        assert_eq!(trace.right_steps, 5);
        let fin = trace.final_model();
        let c = fin.components();
        assert_abs_diff_eq!(c[0].center, 38.0, epsilon = 0.4);
        assert_abs_diff_eq!(c[0].stddev, 9.3, epsilon = 0.4);
        assert_abs_diff_eq!(c[1].center, 65.8, epsilon = 0.4);
        assert_abs_diff_eq!(c[1].stddev, 11.5, epsilon = 0.4);
        assert_abs_diff_eq!(fin.py().prob(0), 0.134, epsilon = 0.02);
    }

    #[test]
    fn monitor_identities_along_runs() {
        for (target, start) in [table3(), table4()] {
            let trace = run_cm_mixture(&target, &start, MixtureOptions::default()).unwrap();
            let mut prev = f64::INFINITY;
            for step in &trace.steps {
                let m = &step.monitor;
                assert!(m.h_qp <= prev + 1e-9);
                prev = m.h_qp;
                assert_abs_diff_eq!(m.h_qp, m.r_q - m.g, epsilon = 1e-9);
                assert_abs_diff_eq!(m.r, m.r_q - m.h_y_yplus, epsilon = 1e-9);
                assert_abs_diff_eq!(m.h_qp, kl_divergence(&target, &m.q).unwrap(), epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn right_step_trades_g_for_divergence() {
        for (target, start) in [table3(), table4()] {
            let trace = run_cm_mixture(&target, &start, MixtureOptions::default()).unwrap();
            for w in trace.steps.windows(2) {
                let Some(held) = &w[1].held else { continue };
                let before = &w[0].monitor;
                assert_abs_diff_eq!(held.g - before.g, before.h_qp - held.h_qp, epsilon = 1e-9);
                assert!(held.g >= before.g - 1e-12);
                assert!(w[1].monitor.h_qp <= held.h_qp + 1e-12);
            }
        }
    }

    #[test]
    fn true_model_needs_no_right_step() {
        let truth = model(&[(35.0, 8.0, 0.7), (65.0, 12.0, 0.3)]);
        let target = truth.mixture().unwrap();
        let m = monitor(&target, &truth).unwrap();
        assert!(m.h_qp.abs() < 1e-9);
        assert_abs_diff_eq!(m.g, m.r, epsilon = 1e-9);
        let trace = run_cm_mixture(&target, &truth, MixtureOptions::default()).unwrap();
        assert!(trace.converged);
        assert_eq!(trace.right_steps, 0);
    }

    #[test]
    fn left_step_b_fixed_points() {
        let (target, _) = table3();
        let sym = model(&[(30.0, 10.0, 0.5), (71.0, 10.0, 0.5)]);
        let sym_target = sym.mixture().unwrap();
        let b = left_step_b(&sym_target, &sym, false).unwrap();
        assert_abs_diff_eq!(b.py.prob(0), 0.5, epsilon = 1e-9);

        let truth = model(&[(35.0, 8.0, 0.7), (65.0, 12.0, 0.3)]);
        let b = left_step_b(&target, &truth, false).unwrap();
        assert_abs_diff_eq!(b.py.prob(0), 0.7, epsilon = 1e-8);

        let start = model(&[(30.0, 15.0, 0.5), (70.0, 15.0, 0.5)]);
        let b = left_step_b(&target, &start, false).unwrap();
        let resp = left_step_a(&target, &start.with_py(b.py.clone()).unwrap()).unwrap();
        let induced = marginal(&target, &resp.channel);
        for j in 0..2 {
            assert!((induced[j] - b.py.prob(j)).abs() < 1e-8);
        }
    }

    #[test]
    fn guard_keeps_weights_above_floor() {
        let truth = model(&[(30.0, 5.0, 0.97), (70.0, 5.0, 0.03)]);
        let target = truth.mixture().unwrap();
        let start = model(&[(30.0, 5.0, 0.5), (70.0, 5.0, 0.5)]);
        let b = left_step_b(&target, &start, true).unwrap();
        assert!(b.guard_tripped);
        assert!(b.py.mass().iter().all(|&p| p >= 0.05));
        let free = left_step_b(&target, &start, false).unwrap();
        assert!(free.py.prob(1) < 0.05);
    }

    #[test]
    fn right_step_on_crisp_channel_gives_region_moments() {
        let g = grid();
        let target = model(&[(30.0, 6.0, 0.5), (70.0, 6.0, 0.5)]).mixture().unwrap();
        let channel: Vec<Vec<f64>> = vec![
            (1..=100).map(|z| if z <= 50 { 1.0 } else { 0.0 }).collect(),
            (1..=100).map(|z| if z <= 50 { 0.0 } else { 1.0 }).collect(),
        ];
        let fit = right_step(&target, &channel, &g, RightStepMethod::WeightedMoments).unwrap();
        let region = |lo: usize, hi: usize| {
            let m: f64 = (lo..hi).map(|i| target.prob(i)).sum();
            let mean: f64 = (lo..hi).map(|i| target.prob(i) * g.labels()[i]).sum::<f64>() / m;
            let var: f64 = (lo..hi)
                .map(|i| target.prob(i) * (g.labels()[i] - mean).powi(2))
                .sum::<f64>()
                / m;
            (mean, var.sqrt())
        };
        let (m0, s0) = region(0, 50);
        assert_abs_diff_eq!(fit[0].center, m0, epsilon = 1e-9);
        assert_abs_diff_eq!(fit[0].stddev, s0, epsilon = 1e-9);
        let (m1, _) = region(50, 100);
        assert_abs_diff_eq!(fit[1].center, m1, epsilon = 1e-9);

        let starved = vec![vec![1.0; 100], vec![0.0; 100]];
        assert_eq!(
            right_step(&target, &starved, &g, RightStepMethod::ExactGrid),
            Err(Error::ComponentStarved(1))
        );
    }

    #[test]
    fn exact_fit_matches_grid_moments() {
        let g = grid();
        let (target, start) = table4();
        let channel = left_step_a(&target, &start).unwrap().channel;
        let fit = right_step(&target, &channel, &g, RightStepMethod::ExactGrid).unwrap();
        for (j, comp) in fit.iter().enumerate() {
            let w: Vec<f64> = channel[j].iter().zip(target.mass()).map(|(c, p)| c * p).collect();
            let total: f64 = w.iter().sum();
            let mean_w: f64 = w.iter().zip(g.labels()).map(|(w, x)| w * x).sum::<f64>() / total;
            let lik = discretized_gaussian(&g, comp.center, comp.stddev).unwrap();
            assert_abs_diff_eq!(lik.mean(), mean_w, epsilon = 1e-6);
        }
    }

    #[test]
    fn decision_rule_limits() {
        let (target, start) = table3();
        let resp = left_step_a(&target, &start).unwrap();
        let d = decision_rule(&start, Sharpness::Finite(1.0)).unwrap();
        for j in 0..2 {
            for i in 0..100 {
                assert_abs_diff_eq!(d.table[j][i], resp.channel[j][i], epsilon = 1e-12);
            }
        }
        let d = decision_rule(&start, Sharpness::Finite(0.0)).unwrap();
        assert!(d.table[0].iter().all(|&v| (v - 0.5).abs() < 1e-15));

        let sym = model(&[(30.5, 10.0, 0.4), (70.5, 10.0, 0.6)]);
        let crisp = decision_rule(&sym, Sharpness::Crisp).unwrap();
        assert_eq!(crisp.table[0][49], 1.0);
        assert_eq!(crisp.table[1][50], 1.0);
        let tie = model(&[(50.0, 10.0, 0.4), (50.0, 10.0, 0.6)]);
        let crisp = decision_rule(&tie, Sharpness::Crisp).unwrap();
        assert!(crisp.table[1].iter().all(|&v| v == 1.0));
    }

    #[test]
    fn init_warning_when_centers_share_a_side() {
        let (target, _) = table3();
        assert_eq!(model(&[(60.0, 10.0, 0.5), (80.0, 10.0, 0.5)]).init_warnings(&target).len(), 1);
        assert!(model(&[(30.0, 10.0, 0.5), (80.0, 10.0, 0.5)]).init_warnings(&target).is_empty());
    }
}
