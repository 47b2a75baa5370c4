//! Standard EM on a discretized target, for comparison with channels'
//! matching.
//!
//! The E-step is Left-step a. The M-step sets `P(Y)` to the marginal of the
//! responsibilities and refits every component with the Right-step fit.

use crate::error::{Error, Result};
use crate::mixture::{
    left_step_a, monitor, right_step, MixtureModel, MixtureOptions, MixtureStep, MixtureTrace,
    RightStepMethod, StepKind,
};
use crate::prob::{Distribution, PROB_FLOOR};
use crate::semantic::{log2_ratio, SaturatingSum};

/// Per-unit-`N` objectives, in bits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EMObjectives {
    /// `Σ_i P(x_i) log₂ Q(x_i)`.
    pub log_l: f64,
    /// `Σ_ij w_ij log₂(P(y_j) P(x_i|θ_j))`.
    pub q_fun: f64,
    /// `-Σ_ij w_ij log₂ P(y_j|x_i)`, non-negative.
    pub h_fun: f64,
    /// `q_fun + h_fun`, a lower bound on `log_l`.
    pub l_fun: f64,
}

/// Objectives with the model's own E-step responsibilities.
pub fn em_objectives(target: &Distribution, model: &MixtureModel) -> Result<EMObjectives> {
    let channel = left_step_a(target, model)?.channel;
    em_objectives_with_channel(target, model, &channel)
}

/// Objectives of `model` with responsibilities `channel` (`[j][i]`) taken
/// from elsewhere, typically the previous E-step.
pub fn em_objectives_with_channel(
    target: &Distribution,
    model: &MixtureModel,
    channel: &[Vec<f64>],
) -> Result<EMObjectives> {
    let liks = model.likelihoods()?;
    let q = model.mixture()?;
    let py = model.py().mass();
    let mut log_l = SaturatingSum::default();
    for (&p, &qi) in target.mass().iter().zip(q.mass()) {
        log_l.add(p, log2_ratio(qi, 1.0));
    }
    let mut q_fun = SaturatingSum::default();
    let mut h_fun = 0.0;
    for (j, row) in channel.iter().enumerate() {
        for (i, &p) in target.mass().iter().enumerate() {
            let w = p * row[i];
            if w <= PROB_FLOOR {
                continue;
            }
            q_fun.add(w, log2_ratio(py[j] * liks[j].prob(i), 1.0));
            if row[i] > PROB_FLOOR {
                h_fun -= w * row[i].log2();
            }
        }
    }
    let q_fun = q_fun.value()?;
    let h_fun = h_fun.max(0.0);
    Ok(EMObjectives {
        log_l: log_l.value()?,
        q_fun,
        h_fun,
        l_fun: q_fun + h_fun,
    })
}

/// Posterior component probabilities `π_j f_j(x) / Σ_k π_k f_k(x)`,
/// indexed `[j][i]`.
pub fn e_step(target: &Distribution, model: &MixtureModel) -> Result<Vec<Vec<f64>>> {
    let liks = model.likelihoods()?;
    let pi = model.py().mass();
    let cells = model.grid().len();
    let mut resp = vec![vec![0.0; cells]; model.len()];
    for i in 0..cells {
        let mut total = 0.0;
        for (p, lik) in pi.iter().zip(&liks) {
            total += p * lik.prob(i);
        }
        for j in 0..model.len() {
            resp[j][i] = if total > PROB_FLOOR {
                pi[j] * liks[j].prob(i) / total
            } else if target.prob(i) > 0.0 {
                return Err(Error::UndefinedResponsibility { index: i });
            } else {
                pi[j]
            };
        }
    }
    Ok(resp)
}

/// One E-step and M-step.
pub fn em_step(
    target: &Distribution,
    model: &MixtureModel,
    method: RightStepMethod,
) -> Result<MixtureModel> {
    if target.support() != model.grid() {
        return Err(Error::SupportMismatch {
            left: target.len(),
            right: model.grid().len(),
        });
    }
    let channel = e_step(target, model)?;
    let py = Distribution::from_weights(
        model.py().support().clone(),
        channel
            .iter()
            .map(|row| row.iter().zip(target.mass()).map(|(c, p)| c * p).sum())
            .collect(),
    )?;
    let components = right_step(target, &channel, model.grid(), method)?;
    MixtureModel::new(model.grid().clone(), components, py)
}

/// Runs EM until `H(Q||P) ≤ tol`; `max_right_steps` caps the EM steps.
pub fn run_em(
    target: &Distribution,
    init: &MixtureModel,
    options: MixtureOptions,
) -> Result<MixtureTrace> {
    let mut model = init.clone();
    let mut steps = vec![MixtureStep {
        kind: StepKind::LeftA,
        monitor: monitor(target, &model)?,
        held: None,
        objectives: Some(em_objectives(target, &model)?),
        model: model.clone(),
    }];
    let mut count = 0;
    loop {
        let h = steps.last().map_or(f64::INFINITY, |s| s.monitor.h_qp);
        if h <= options.tol || count >= options.max_right_steps {
            return Ok(MixtureTrace {
                converged: h <= options.tol,
                steps,
                right_steps: count,
                guard_trips: 0,
                warnings: init.init_warnings(target),
            });
        }
        model = em_step(target, &model, options.method)?;
        count += 1;
        steps.push(MixtureStep {
            kind: StepKind::Em,
            monitor: monitor(target, &model)?,
            held: None,
            objectives: Some(em_objectives(target, &model)?),
            model: model.clone(),
        });
    }
}
