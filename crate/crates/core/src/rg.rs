//! Parametric R(G) and R(D) functions.
//!
//! For a trade-off parameter `s` the minimizing channel has the form
//! `P(y_j|x_i) = P(y_j) 2^{s I_ij} / λ_i`. The solver alternates between that
//! channel and the output marginal it induces until the marginal stops
//! moving, then reads off `G(s)` and `R(s) = s G(s) - Σ_i P(x_i) log₂ λ_i`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::prob::{binary_entropy, entropy, Alphabet, Distribution};
use crate::semantic::{logical_probability, log2_ratio, SemanticChannel};

/// Stop when no output probability moves by more than this.
pub const RG_TOL: f64 = 1e-10;

/// Stop when the objective is provably within this many nats of its
/// maximum, for flat problems where `P(Y)` is poorly determined.
pub const RG_GAP_TOL: f64 = 1e-15;

/// Iteration cap of the alternating solver.
pub const RG_MAX_ITERATIONS: usize = 100_000;

/// Tolerance in R used when locating `G⁺` and `G⁻`.
pub const EXTREME_R_TOL: f64 = 1e-6;

/// Payoffs `I_ij` in bits, indexed `[i][j]` (source symbol, then message).
#[derive(Debug, Clone, PartialEq)]
pub struct PayoffMatrix {
    entries: Vec<Vec<f64>>,
}

impl PayoffMatrix {
    pub fn new(entries: Vec<Vec<f64>>) -> Result<Self> {
        let Some(first) = entries.first() else {
            return Err(Error::InvalidParameter("payoff matrix is empty".into()));
        };
        if first.is_empty() || entries.iter().any(|r| r.len() != first.len()) {
            return Err(Error::InvalidParameter(
                "payoff matrix must be rectangular and non-empty".into(),
            ));
        }
        if entries.iter().flatten().any(|v| v.is_nan()) {
            return Err(Error::InvalidParameter("payoff entry is NaN".into()));
        }
        Ok(Self { entries })
    }

    /// `I_ij = log₂(T(θ_j|x_i)/T(θ_j))`.
    pub fn from_semantic(prior: &Distribution, sem: &SemanticChannel) -> Result<Self> {
        let logical = sem
            .rows()
            .iter()
            .map(|row| match logical_probability(prior, row)? {
                t if t > 0.0 => Ok(t),
                _ => Err(Error::EmptyFuzzySet),
            })
            .collect::<Result<Vec<_>>>()?;
        let entries = (0..prior.len())
            .map(|i| {
                sem.rows()
                    .iter()
                    .zip(&logical)
                    .map(|(row, &t)| log2_ratio(row.value(i), t))
                    .collect()
            })
            .collect();
        Self::new(entries)
    }

    /// Binary payoff with `b` on the diagonal and `a` off it.
    pub fn binary_symmetric(a: f64, b: f64) -> Self {
        Self {
            entries: vec![vec![b, a], vec![a, b]],
        }
    }

    /// Payoff `-d_ij` for a distortion matrix.
    pub fn from_distortion(distortion: &[Vec<f64>]) -> Result<Self> {
        Self::new(
            distortion
                .iter()
                .map(|r| r.iter().map(|d| -d).collect())
                .collect(),
        )
    }

    pub fn entries(&self) -> &[Vec<f64>] {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i][j]
    }

    pub fn n_sources(&self) -> usize {
        self.entries.len()
    }

    pub fn n_messages(&self) -> usize {
        self.entries[0].len()
    }
}

/// One point of the parametric curve.
#[derive(Debug, Clone, PartialEq)]
pub struct RGPoint {
    pub s: f64,
    pub g: f64,
    pub r: f64,
    pub py: Distribution,
    pub lambdas: Vec<f64>,
    pub iterations: usize,
}

/// Points over a range of `s`, plus the extreme `G` values reachable at the
/// largest rate both branches attain.
#[derive(Debug, Clone, PartialEq)]
pub struct RGCurve {
    pub points: Vec<RGPoint>,
    pub g_plus: Option<f64>,
    pub g_minus: Option<f64>,
}

struct Solution {
    channel: Vec<Vec<f64>>,
    py: Vec<f64>,
    ln_lambda: Vec<f64>,
    iterations: usize,
}

/// Alternating solver on natural-log exponents `e_ij`:
/// `P(y_j|x_i) ∝ P(y_j) exp(e_ij)`.
struct Mapped {
    channel: Vec<Vec<f64>>,
    ln_lambda: Vec<f64>,
    next: Vec<f64>,
    objective: f64,
    scale: f64,
}

fn map_once(prior: &[f64], exponents: &[Vec<f64>], py: &[f64]) -> Mapped {
    let m = py.len();
    let mut channel = vec![vec![0.0; m]; prior.len()];
    let mut ln_lambda = vec![0.0; prior.len()];
    for (i, e) in exponents.iter().enumerate() {
        let shift = (0..m)
            .filter(|&j| py[j] > 0.0)
            .map(|j| e[j])
            .fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for j in 0..m {
            let v = if py[j] > 0.0 { py[j] * (e[j] - shift).exp() } else { 0.0 };
            channel[i][j] = v;
            sum += v;
        }
        for v in &mut channel[i] {
            *v /= sum;
        }
        ln_lambda[i] = shift + sum.ln();
    }
    let next = (0..m)
        .map(|j| prior.iter().zip(&channel).map(|(p, row)| p * row[j]).sum())
        .collect();
    let objective = prior.iter().zip(&ln_lambda).map(|(p, l)| p * l).sum();
    let scale = prior.iter().zip(&ln_lambda).map(|(p, l)| (p * l).abs()).sum();
    Mapped {
        channel,
        ln_lambda,
        next,
        objective,
        scale,
    }
}

/// Newton step for `Σ P(x_i) ln λ_i` on the simplex, restricted to the
/// messages with positive probability. `None` if the system is singular.
fn newton_direction(prior: &[f64], py: &[f64], mapped: &Mapped) -> Option<Vec<f64>> {
    let active: Vec<usize> = (0..py.len()).filter(|&j| py[j] > 0.0).collect();
    let k = active.len();
    if k < 2 {
        return None;
    }
    // u_ij = A_ij / λ_i, recovered from the channel as P(y_j|x_i) / P(y_j).
    let u = |i: usize, j: usize| mapped.channel[i][j] / py[j];
    let mut kkt = DMatrix::<f64>::zeros(k + 1, k + 1);
    let mut rhs = DVector::<f64>::zeros(k + 1);
    for (a, &ja) in active.iter().enumerate() {
        rhs[a] = -mapped.next[ja] / py[ja];
        for (b, &jb) in active.iter().enumerate() {
            kkt[(a, b)] = -prior
                .iter()
                .enumerate()
                .map(|(i, p)| p * u(i, ja) * u(i, jb))
                .sum::<f64>();
        }
        kkt[(a, k)] = 1.0;
        kkt[(k, a)] = 1.0;
    }
    let ridge = 1e-14 * (0..k).map(|a| kkt[(a, a)].abs()).sum::<f64>();
    for a in 0..k {
        kkt[(a, a)] -= ridge;
    }
    let step = kkt.lu().solve(&rhs)?;
    if step.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let mut d = vec![0.0; py.len()];
    for (a, &j) in active.iter().enumerate() {
        d[j] = step[a];
    }
    Some(d)
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Blahut-Arimoto style alternation, accelerated by Newton steps and, when
/// those fail, squared extrapolation. Either jump is kept only if it stays
/// inside the simplex and does no worse on `Σ P(x_i) ln λ_i` than two plain
/// updates, which never decrease it. Stops when `P(Y)` moves less than
/// [`RG_TOL`] or when `ln max_j P⁺(y_j)/P(y_j)`, an upper bound on the
/// remaining gain, reaches [`RG_GAP_TOL`].
fn alternate(prior: &[f64], exponents: &[Vec<f64>], py_init: &[f64]) -> Result<Solution> {
    let mut py = py_init.to_vec();
    let mut iterations = 0;
    let mut residual = f64::INFINITY;
    while iterations < RG_MAX_ITERATIONS {
        let first = map_once(prior, exponents, &py);
        iterations += 1;
        residual = max_abs_diff(&first.next, &py);
        let gap = first
            .next
            .iter()
            .zip(&py)
            .filter(|(_, &p)| p > 0.0)
            .map(|(n, p)| (n / p).ln())
            .fold(f64::NEG_INFINITY, f64::max);
        if residual < RG_TOL || gap <= RG_GAP_TOL {
            return Ok(Solution {
                channel: first.channel,
                py: first.next,
                ln_lambda: first.ln_lambda,
                iterations,
            });
        }
        let second = map_once(prior, exponents, &first.next);
        iterations += 1;
        if let Some(d) = newton_direction(prior, &py, &first) {
            let mut t = 1.0;
            let mut accepted = None;
            while t > 1e-3 {
                let candidate: Vec<f64> = py.iter().zip(&d).map(|(p, d)| p + t * d).collect();
                if candidate.iter().zip(&py).all(|(&c, &p)| p <= 0.0 || c > 0.0) {
                    let total: f64 = candidate.iter().sum();
                    let candidate: Vec<f64> = candidate.iter().map(|c| c / total).collect();
                    let check = map_once(prior, exponents, &candidate);
                    iterations += 1;
                    let slack = 16.0 * f64::EPSILON * check.scale.max(second.scale);
                    if check.objective >= second.objective - slack {
                        accepted = Some(candidate);
                        break;
                    }
                }
                t /= 2.0;
            }
            if let Some(candidate) = accepted {
                py = candidate;
                continue;
            }
        }
        let r: Vec<f64> = first.next.iter().zip(&py).map(|(a, b)| a - b).collect();
        let v: Vec<f64> = second
            .next
            .iter()
            .zip(&first.next)
            .zip(&r)
            .map(|((c, b), r)| c - b - r)
            .collect();
        let r_norm = r.iter().map(|x| x * x).sum::<f64>().sqrt();
        let v_norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let mut chosen = second.next;
        if v_norm > 0.0 {
            let mut alpha = (-r_norm / v_norm).min(-1.0);
            while alpha < -1.0 {
                let candidate: Vec<f64> = py
                    .iter()
                    .zip(&r)
                    .zip(&v)
                    .map(|((p, r), v)| p - 2.0 * alpha * r + alpha * alpha * v)
                    .collect();
                if candidate.iter().all(|&p| p > 0.0) {
                    let total: f64 = candidate.iter().sum();
                    let candidate: Vec<f64> = candidate.iter().map(|p| p / total).collect();
                    let check = map_once(prior, exponents, &candidate);
                    iterations += 1;
                    let slack = 16.0 * f64::EPSILON * check.scale.max(second.scale);
                    if check.objective >= second.objective - slack {
                        chosen = candidate;
                        break;
                    }
                }
                alpha = (alpha - 1.0) / 2.0;
                if alpha > -1.0 + 1e-3 {
                    break;
                }
            }
        }
        py = chosen;
    }
    Err(Error::ConvergenceFailure {
        iterations,
        residual,
    })
}

fn check_shapes(prior: &Distribution, rows: usize, cols: usize, py_init: &Distribution) -> Result<()> {
    if prior.len() != rows {
        return Err(Error::SupportMismatch {
            left: prior.len(),
            right: rows,
        });
    }
    if py_init.len() != cols {
        return Err(Error::SupportMismatch {
            left: cols,
            right: py_init.len(),
        });
    }
    if py_init.mass().iter().any(|&p| p <= 0.0) {
        return Err(Error::InvalidParameter(
            "initial P(Y) must be strictly positive".into(),
        ));
    }
    Ok(())
}

fn uniform_messages(n: usize) -> Result<Distribution> {
    Ok(Distribution::uniform(Alphabet::classes(n)?))
}

/// Solves for the point of the R(G) curve with slope `s`. `py_init` defaults
/// to uniform.
pub fn rg_point(
    prior: &Distribution,
    payoff: &PayoffMatrix,
    s: f64,
    py_init: Option<&Distribution>,
) -> Result<RGPoint> {
    if !s.is_finite() {
        return Err(Error::InvalidParameter(format!("s must be finite, got {s}")));
    }
    let default_py;
    let py_init = match py_init {
        Some(py) => py,
        None => {
            default_py = uniform_messages(payoff.n_messages())?;
            &default_py
        }
    };
    check_shapes(prior, payoff.n_sources(), payoff.n_messages(), py_init)?;
    let ln2 = std::f64::consts::LN_2;
    let exponents: Vec<Vec<f64>> = payoff
        .entries()
        .iter()
        .map(|r| r.iter().map(|v| s * v * ln2).collect())
        .collect();
    let sol = alternate(prior.mass(), &exponents, py_init.mass())?;
    let g: f64 = prior
        .mass()
        .iter()
        .zip(&sol.channel)
        .zip(payoff.entries())
        .map(|((p, ch), pay)| p * ch.iter().zip(pay).map(|(c, v)| c * v).sum::<f64>())
        .sum();
    let mean_log_lambda: f64 = prior
        .mass()
        .iter()
        .zip(&sol.ln_lambda)
        .map(|(p, l)| p * l / ln2)
        .sum();
    Ok(RGPoint {
        s,
        g,
        r: (s * g - mean_log_lambda).max(0.0),
        py: Distribution::from_weights(py_init.support().clone(), sol.py)?,
        lambdas: sol.ln_lambda.iter().map(|l| l.exp()).collect(),
        iterations: sol.iterations,
    })
}

/// Classical rate-distortion point for `s ≤ 0`: returns `(D, R)` with `R` in
/// bits.
pub fn rd_point(
    prior: &Distribution,
    distortion: &[Vec<f64>],
    s: f64,
    py_init: Option<&Distribution>,
) -> Result<(f64, f64)> {
    if !(s <= 0.0) {
        return Err(Error::InvalidParameter(format!("s must be ≤ 0, got {s}")));
    }
    if distortion.iter().flatten().any(|&d| d < 0.0 || !d.is_finite()) {
        return Err(Error::InvalidParameter(
            "distortions must be finite and non-negative".into(),
        ));
    }
    let payoff = PayoffMatrix::new(distortion.to_vec())?;
    let default_py;
    let py_init = match py_init {
        Some(py) => py,
        None => {
            default_py = uniform_messages(payoff.n_messages())?;
            &default_py
        }
    };
    check_shapes(prior, payoff.n_sources(), payoff.n_messages(), py_init)?;
    let exponents: Vec<Vec<f64>> = distortion
        .iter()
        .map(|r| r.iter().map(|d| s * d).collect())
        .collect();
    let sol = alternate(prior.mass(), &exponents, py_init.mass())?;
    let d: f64 = prior
        .mass()
        .iter()
        .zip(&sol.channel)
        .zip(distortion)
        .map(|((p, ch), dist)| p * ch.iter().zip(dist).map(|(c, v)| c * v).sum::<f64>())
        .sum();
    let mean_ln_lambda: f64 = prior.mass().iter().zip(&sol.ln_lambda).map(|(p, l)| p * l).sum();
    let r = (s * d - mean_ln_lambda) / std::f64::consts::LN_2;
    Ok((d, r.max(0.0)))
}

/// Closed-form R(G) for a binary source with symmetric payoffs `b` (correct)
/// and `a` (wrong): `R = H(X) - H₂((h - G₁)/(2h))`, where `h = (b-a)/2` and
/// `G₁ = G - (a+b)/2`.
pub fn rg_binary_closed_form(g: f64, a: f64, b: f64, prior: &Distribution) -> Result<f64> {
    if prior.len() != 2 {
        return Err(Error::InvalidParameter("closed form needs a binary source".into()));
    }
    if !(a < g && g < b) {
        return Err(Error::Domain(format!("G = {g} outside ({a}, {b})")));
    }
    let h = (b - a) / 2.0;
    let g1 = g - (a + b) / 2.0;
    Ok(entropy(prior) - binary_entropy((h - g1) / (2.0 * h)))
}

/// `G/R`.
pub fn information_efficiency(g: f64, r: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::UndefinedEfficiency);
    }
    Ok(g / r)
}

/// Evaluates the curve at each `s`. When the range covers both signs, also
/// locates `G⁺` and `G⁻` at the largest rate reached on both branches.
pub fn rg_curve(prior: &Distribution, payoff: &PayoffMatrix, s_values: &[f64]) -> Result<RGCurve> {
    let points = s_values
        .iter()
        .map(|&s| rg_point(prior, payoff, s, None))
        .collect::<Result<Vec<_>>>()?;
    let top = |pos: bool| {
        points
            .iter()
            .filter(|p| if pos { p.s > 0.0 } else { p.s < 0.0 })
            .map(|p| p.r)
            .fold(f64::NAN, f64::max)
    };
    let (r_pos, r_neg) = (top(true), top(false));
    let (g_plus, g_minus) = if r_pos > 0.0 && r_neg > 0.0 {
        let (plus, minus) = g_extremes(prior, payoff, r_pos.min(r_neg))?;
        (Some(plus), Some(minus))
    } else {
        (None, None)
    };
    Ok(RGCurve {
        points,
        g_plus,
        g_minus,
    })
}

/// `(G⁺, G⁻)`: the largest and smallest `G` attainable at rate `r`, found by
/// bisection on `s` along each branch.
pub fn g_extremes(prior: &Distribution, payoff: &PayoffMatrix, r: f64) -> Result<(f64, f64)> {
    if !(r > 0.0) {
        return Err(Error::InvalidParameter(format!("target rate must be positive, got {r}")));
    }
    let branch = |sign: f64| -> Result<f64> {
        let mut lo = 0.0;
        let mut hi = sign;
        let mut point = rg_point(prior, payoff, hi, None)?;
        while point.r < r {
            lo = hi;
            hi *= 2.0;
            if hi.abs() > 1e6 {
                return Err(Error::Domain(format!("rate {r} is not reachable")));
            }
            point = rg_point(prior, payoff, hi, None)?;
        }
        for _ in 0..200 {
            if (point.r - r).abs() <= EXTREME_R_TOL {
                break;
            }
            let mid = 0.5 * (lo + hi);
            point = rg_point(prior, payoff, mid, None)?;
            if point.r < r {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(point.g)
    };
    Ok((branch(1.0)?, branch(-1.0)?))
}
