//! Truth functions, semantic Bayesian inference and semantic information.
//!
//! A truth function `T(θ_j|X)` gives the degree to which hypothesis `y_j` is
//! true of each `x`. Combined with a prior it yields a likelihood through
//! semantic Bayes, and the log of the normalized likelihood is the semantic
//! information a hypothesis conveys.
//!
//! Zero truth values make information negatively infinite. Such values are
//! reported as `-SATURATED_BITS` instead of `-inf` so traces stay totally
//! ordered; use [`is_saturated`] to detect them.

use crate::error::{Error, Result};
use crate::prob::{ensure_same_alphabet, entropy, Alphabet, Channel, Distribution, PROB_FLOOR};

/// Magnitude used in place of an infinite amount of information.
pub const SATURATED_BITS: f64 = 1e12;

/// Tolerance on the unit maximum of an optimized truth row.
pub const OPTIMIZED_MAX_TOL: f64 = 1e-9;

/// True for values produced by the saturating convention.
pub fn is_saturated(bits: f64) -> bool {
    bits.abs() >= 0.5 * SATURATED_BITS
}

/// `log₂(num/den)` with `num = 0` mapped to `-SATURATED_BITS`.
pub(crate) fn log2_ratio(num: f64, den: f64) -> f64 {
    if num <= 0.0 {
        -SATURATED_BITS
    } else {
        (num / den).log2()
    }
}

/// Weighted sum of log terms that collapses to `±SATURATED_BITS` once a
/// positively weighted term is infinite.
#[derive(Debug, Default)]
pub(crate) struct SaturatingSum {
    finite: f64,
    neg_inf: bool,
    pos_inf: bool,
}

impl SaturatingSum {
    pub(crate) fn add(&mut self, weight: f64, bits: f64) {
        if weight <= PROB_FLOOR {
            return;
        }
        if bits <= -0.5 * SATURATED_BITS {
            self.neg_inf = true;
        } else if bits >= 0.5 * SATURATED_BITS {
            self.pos_inf = true;
        } else {
            self.finite += weight * bits;
        }
    }

    pub(crate) fn value(&self) -> Result<f64> {
        match (self.neg_inf, self.pos_inf) {
            (false, false) => Ok(self.finite.clamp(-SATURATED_BITS, SATURATED_BITS)),
            (true, false) => Ok(-SATURATED_BITS),
            (false, true) => Ok(SATURATED_BITS),
            (true, true) => Err(Error::Domain(
                "sum mixes positive and negative infinite information".into(),
            )),
        }
    }
}

/// Truth values `T(θ_j|x)` of one hypothesis over the alphabet of `X`.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthRow {
    support: Alphabet,
    values: Vec<f64>,
}

impl TruthRow {
    pub fn new(support: Alphabet, values: Vec<f64>) -> Result<Self> {
        if values.len() != support.len() {
            return Err(Error::SupportMismatch {
                left: support.len(),
                right: values.len(),
            });
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidParameter(format!(
                "truth value {v} outside [0, 1]"
            )));
        }
        Ok(Self { support, values })
    }

    /// The always-true hypothesis.
    pub fn tautology(support: Alphabet) -> Self {
        let values = vec![1.0; support.len()];
        Self { support, values }
    }

    /// `exp(-(x-center)²/(2·width²))` on the alphabet, not normalized, so it
    /// peaks at 1 when `center` is a grid point.
    pub fn gaussian(support: Alphabet, center: f64, width: f64) -> Result<Self> {
        if !(width > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "width must be positive, got {width}"
            )));
        }
        let values = support
            .labels()
            .iter()
            .map(|x| (-(x - center).powi(2) / (2.0 * width * width)).exp())
            .collect();
        Ok(Self { support, values })
    }

    pub fn support(&self) -> &Alphabet {
        &self.support
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Optimized rows have their maximum at 1.
    pub fn is_optimized(&self) -> bool {
        (self.max() - 1.0).abs() <= OPTIMIZED_MAX_TOL
    }

    /// Multiplies every value by `k ∈ (0, 1]`.
    pub fn scaled(&self, k: f64) -> Result<Self> {
        if !(k > 0.0 && k <= 1.0) {
            return Err(Error::InvalidParameter(format!("scale {k} outside (0, 1]")));
        }
        Ok(Self {
            support: self.support.clone(),
            values: self.values.iter().map(|v| v * k).collect(),
        })
    }
}

/// One truth row per hypothesis. Rows are not normalized across hypotheses.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticChannel {
    rows: Vec<TruthRow>,
}

impl SemanticChannel {
    pub fn new(rows: Vec<TruthRow>) -> Result<Self> {
        let Some(first) = rows.first() else {
            return Err(Error::InvalidParameter(
                "semantic channel needs at least one row".into(),
            ));
        };
        for row in &rows[1..] {
            ensure_same_alphabet(first.support(), row.support())?;
        }
        Ok(Self { rows })
    }

    /// Semantic channel matched to a Shannon channel, row by row.
    pub fn matched(channel: &Channel) -> Result<Self> {
        let rows = channel
            .rows()
            .iter()
            .map(|row| optimize_truth_row_from_channel(channel.input(), row))
            .collect::<Result<Vec<_>>>()?;
        Self::new(rows)
    }

    pub fn rows(&self) -> &[TruthRow] {
        &self.rows
    }

    pub fn row(&self, j: usize) -> &TruthRow {
        &self.rows[j]
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn support(&self) -> &Alphabet {
        self.rows[0].support()
    }
}

/// No-confidence levels `b' = 1 - |b|`, one per hypothesis.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceLevels {
    b_prime: Vec<f64>,
}

impl ConfidenceLevels {
    pub fn from_confidence(b: &[f64]) -> Result<Self> {
        let b_prime = b
            .iter()
            .map(|&b| {
                if b.abs() > 1.0 || !b.is_finite() {
                    Err(Error::InvalidParameter(format!("confidence {b} outside [-1, 1]")))
                } else {
                    Ok(1.0 - b.abs())
                }
            })
            .collect::<Result<_>>()?;
        Ok(Self { b_prime })
    }

    pub fn b_prime(&self) -> &[f64] {
        &self.b_prime
    }
}

/// Counts `N_ij` of symbol `x_i` in the sample that tests hypothesis `y_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleCounts {
    /// `counts[j][i]`.
    counts: Vec<Vec<u64>>,
}

impl SampleCounts {
    pub fn new(counts: Vec<Vec<u64>>) -> Result<Self> {
        let Some(first) = counts.first() else {
            return Err(Error::InvalidParameter("no hypotheses".into()));
        };
        if first.is_empty() || counts.iter().any(|r| r.len() != first.len()) {
            return Err(Error::InvalidParameter(
                "count table must be rectangular and non-empty".into(),
            ));
        }
        Ok(Self { counts })
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn n_hypotheses(&self) -> usize {
        self.counts.len()
    }

    pub fn n_symbols(&self) -> usize {
        self.counts[0].len()
    }

    /// `N_j`.
    pub fn hypothesis_total(&self, j: usize) -> u64 {
        self.counts[j].iter().sum()
    }

    /// `N`.
    pub fn total(&self) -> u64 {
        (0..self.n_hypotheses()).map(|j| self.hypothesis_total(j)).sum()
    }

    /// Empirical `P(X)`.
    pub fn empirical_prior(&self, support: Alphabet) -> Result<Distribution> {
        let weights = (0..self.n_symbols())
            .map(|i| self.counts.iter().map(|r| r[i] as f64).sum())
            .collect();
        Distribution::from_weights(support, weights)
    }

    /// Empirical `P(Y|X)`. Columns of unseen symbols are set uniform.
    pub fn empirical_channel(&self, input: Alphabet, output: Alphabet) -> Result<Channel> {
        let n = self.n_hypotheses();
        let mut rows = vec![vec![0.0; self.n_symbols()]; n];
        for i in 0..self.n_symbols() {
            let col: u64 = self.counts.iter().map(|r| r[i]).sum();
            for j in 0..n {
                rows[j][i] = if col == 0 {
                    1.0 / n as f64
                } else {
                    self.counts[j][i] as f64 / col as f64
                };
            }
        }
        Channel::new(input, output, rows)
    }
}

/// Likelihood and logical probability produced by semantic Bayes.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticBayes {
    /// `P(X|θ_j)`.
    pub likelihood: Distribution,
    /// `T(θ_j) = Σ P(x_i) T(θ_j|x_i)`.
    pub logical_prob: f64,
}

/// Logical probability `T(θ_j)`.
pub fn logical_probability(prior: &Distribution, truth: &TruthRow) -> Result<f64> {
    ensure_same_alphabet(prior.support(), truth.support())?;
    Ok(prior
        .mass()
        .iter()
        .zip(truth.values())
        .map(|(p, t)| p * t)
        .sum())
}

/// `P(X|θ_j) = P(X) T(θ_j|X) / T(θ_j)`.
pub fn semantic_bayes(prior: &Distribution, truth: &TruthRow) -> Result<SemanticBayes> {
    let logical_prob = logical_probability(prior, truth)?;
    if logical_prob <= PROB_FLOOR {
        return Err(Error::EmptyFuzzySet);
    }
    let weights = prior
        .mass()
        .iter()
        .zip(truth.values())
        .map(|(p, t)| p * t)
        .collect();
    Ok(SemanticBayes {
        likelihood: Distribution::from_weights(prior.support().clone(), weights)?,
        logical_prob,
    })
}

/// Semantic information `log₂(T(θ_j|x)/T(θ_j))` conveyed about symbol `index`.
pub fn semantic_info_point(prior: &Distribution, truth: &TruthRow, index: usize) -> Result<f64> {
    let logical_prob = logical_probability(prior, truth)?;
    if logical_prob <= PROB_FLOOR {
        return Err(Error::EmptyFuzzySet);
    }
    if index >= truth.len() {
        return Err(Error::InvalidParameter(format!("symbol {index} out of range")));
    }
    Ok(log2_ratio(truth.value(index), logical_prob))
}

/// Generalized KL information `Σ P(x|y_j) log₂(T(θ_j|x)/T(θ_j))`.
pub fn semantic_kl_info(
    sampling: &Distribution,
    prior: &Distribution,
    truth: &TruthRow,
) -> Result<f64> {
    sampling.ensure_same_support(prior)?;
    let logical_prob = logical_probability(prior, truth)?;
    if logical_prob <= PROB_FLOOR {
        return Err(Error::EmptyFuzzySet);
    }
    let mut sum = SaturatingSum::default();
    for (&w, &t) in sampling.mass().iter().zip(truth.values()) {
        sum.add(w, log2_ratio(t, logical_prob));
    }
    sum.value()
}

/// Semantic mutual information and generalized posterior entropy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SemanticMutualInfo {
    /// `I(X;Θ)` in bits.
    pub info: f64,
    /// `H(X|Θ)` in bits.
    pub cond_entropy: f64,
}

/// `I(X;Θ)` of a prior sent through a Shannon channel and read through a
/// semantic channel.
pub fn semantic_mutual_info(
    prior: &Distribution,
    shannon: &Channel,
    sem: &SemanticChannel,
) -> Result<SemanticMutualInfo> {
    ensure_same_alphabet(prior.support(), shannon.input())?;
    ensure_same_alphabet(prior.support(), sem.support())?;
    if shannon.n_outputs() != sem.len() {
        return Err(Error::SupportMismatch {
            left: shannon.n_outputs(),
            right: sem.len(),
        });
    }
    let mut info = SaturatingSum::default();
    let mut cond = SaturatingSum::default();
    for (j, truth) in sem.rows().iter().enumerate() {
        let row = shannon.row(j);
        let used = row.iter().zip(prior.mass()).any(|(t, p)| t * p > 0.0);
        if !used {
            continue;
        }
        let logical_prob = logical_probability(prior, truth)?;
        if logical_prob <= PROB_FLOOR {
            return Err(Error::EmptyFuzzySet);
        }
        for (i, (&p, &t)) in prior.mass().iter().zip(truth.values()).enumerate() {
            let joint = p * row[i];
            info.add(joint, log2_ratio(t, logical_prob));
            cond.add(joint, -log2_ratio(p * t, logical_prob));
        }
    }
    let info = info.value()?;
    let cond_entropy = cond.value()?;
    // Recompute I from H(X) - H(X|Θ) only as a sanity anchor for finite values.
    debug_assert!(
        is_saturated(info) || (info - (entropy(prior) - cond_entropy)).abs() < 1e-6
    );
    Ok(SemanticMutualInfo { info, cond_entropy })
}

/// Truth row matched to a transition function: `P(y_j|X) / max P(y_j|X)`.
pub fn optimize_truth_row_from_channel(support: &Alphabet, row: &[f64]) -> Result<TruthRow> {
    if row.len() != support.len() {
        return Err(Error::SupportMismatch {
            left: support.len(),
            right: row.len(),
        });
    }
    let max = row.iter().copied().fold(0.0, f64::max);
    if max <= 0.0 {
        return Err(Error::EmptyHypothesis);
    }
    TruthRow::new(
        support.clone(),
        row.iter().map(|v| (v / max).clamp(0.0, 1.0)).collect(),
    )
}

/// Truth row from a sampling distribution and the prior:
/// `[P(x|y_j)/P(x)] / max_x [P(x|y_j)/P(x)]`.
pub fn optimize_truth_row_from_sampling(
    sampling: &Distribution,
    prior: &Distribution,
) -> Result<TruthRow> {
    sampling.ensure_same_support(prior)?;
    let ratios = sampling
        .mass()
        .iter()
        .zip(prior.mass())
        .enumerate()
        .map(|(index, (&s, &p))| {
            if p <= PROB_FLOOR {
                if s > 0.0 {
                    Err(Error::UndefinedRatio { index })
                } else {
                    Ok(0.0)
                }
            } else {
                Ok(s / p)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    optimize_truth_row_from_channel(prior.support(), &ratios)
}

/// `T(θ_j|X) = b' + b·base(X)` with `b' = 1 - |b|`, for a crisp base row.
pub fn confidence_truth(base: &TruthRow, b: f64) -> Result<TruthRow> {
    if !(b.abs() <= 1.0) {
        return Err(Error::InvalidParameter(format!("confidence {b} outside [-1, 1]")));
    }
    if base.values().iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::InvalidParameter(
            "confidence truth needs a {0, 1}-valued base row".into(),
        ));
    }
    let b_prime = 1.0 - b.abs();
    TruthRow::new(
        base.support().clone(),
        base.values()
            .iter()
            .map(|&v| (b_prime + b * v).clamp(0.0, 1.0))
            .collect(),
    )
}

/// Optimized no-confidence levels of a binary test and the matching
/// likelihood ratios.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoConfidence {
    pub b1_prime: f64,
    pub b0_prime: f64,
    /// `LR⁺ = 1/b₁'`, `+inf` for a noiseless positive.
    pub lr_plus: f64,
    /// `LR⁻ = 1/b₀'`, `+inf` for a noiseless negative.
    pub lr_minus: f64,
}

/// No-confidence levels of a 2×2 test channel.
///
/// Input index 0 is the uninfected class `x₀` and 1 the infected class `x₁`;
/// output 0 is the negative result `y₀` and 1 the positive result `y₁`.
pub fn no_confidence_from_channel(channel: &Channel) -> Result<NoConfidence> {
    if channel.n_inputs() != 2 || channel.n_outputs() != 2 {
        return Err(Error::InvalidChannel("a test channel is 2×2".into()));
    }
    let sensitivity = channel.prob(1, 1);
    let specificity = channel.prob(0, 0);
    if sensitivity <= 0.0 || specificity <= 0.0 {
        return Err(Error::UndefinedConfidence);
    }
    let b1_prime = channel.prob(1, 0) / sensitivity;
    let b0_prime = channel.prob(0, 1) / specificity;
    let recip = |b: f64| if b > 0.0 { 1.0 / b } else { f64::INFINITY };
    Ok(NoConfidence {
        b1_prime,
        b0_prime,
        lr_plus: recip(b1_prime),
        lr_minus: recip(b0_prime),
    })
}

/// `Σ_j Σ_i N_ij log₂(P(x_i|θ_j)/P(x_i))`, the log normalized likelihood of
/// a counted sample.
pub fn log_normalized_likelihood(
    counts: &SampleCounts,
    prior: &Distribution,
    sem: &SemanticChannel,
) -> Result<f64> {
    ensure_same_alphabet(prior.support(), sem.support())?;
    if counts.n_hypotheses() != sem.len() || counts.n_symbols() != prior.len() {
        return Err(Error::SupportMismatch {
            left: counts.n_hypotheses() * counts.n_symbols(),
            right: sem.len() * prior.len(),
        });
    }
    let mut sum = SaturatingSum::default();
    for (row, truth) in counts.counts().iter().zip(sem.rows()) {
        if row.iter().all(|&n| n == 0) {
            continue;
        }
        let logical_prob = logical_probability(prior, truth)?;
        if logical_prob <= PROB_FLOOR {
            return Err(Error::EmptyFuzzySet);
        }
        for (&n, &t) in row.iter().zip(truth.values()) {
            sum.add(n as f64, log2_ratio(t, logical_prob));
        }
    }
    sum.value()
}

/// One side of a test without a certain partition: the sampling distribution
/// `P(X|C)` observed in a region and the region's weight `P(C)`.
#[derive(Debug, Clone, Copy)]
pub struct Region<'a> {
    pub sampling: &'a Distribution,
    pub weight: f64,
}

/// `log₂ r_L` of the likelihood-ratio statistic comparing the positive and
/// negative hypotheses over `n` observations.
pub fn log_likelihood_ratio(
    prior: &Distribution,
    positive: Region<'_>,
    negative: Region<'_>,
    sem_pos: &TruthRow,
    sem_neg: &TruthRow,
    n: u64,
) -> Result<f64> {
    if (positive.weight + negative.weight - 1.0).abs() > 1e-9
        || positive.weight < 0.0
        || negative.weight < 0.0
    {
        return Err(Error::InvalidParameter(
            "region weights must be non-negative and sum to 1".into(),
        ));
    }
    positive.sampling.ensure_same_support(prior)?;
    negative.sampling.ensure_same_support(prior)?;
    let lik_pos = semantic_bayes(prior, sem_pos)?.likelihood;
    let lik_neg = semantic_bayes(prior, sem_neg)?.likelihood;
    let n = n as f64;
    let mut sum = SaturatingSum::default();
    for (region, num, den) in [
        (positive, &lik_pos, &lik_neg),
        (negative, &lik_neg, &lik_pos),
    ] {
        for (i, &s) in region.sampling.mass().iter().enumerate() {
            let w = n * region.weight * s;
            if w <= 0.0 {
                continue;
            }
            let (a, b) = (num.prob(i), den.prob(i));
            let bits = match (a > PROB_FLOOR, b > PROB_FLOOR) {
                (true, true) => (a / b).log2(),
                (false, true) => -SATURATED_BITS,
                (true, false) => SATURATED_BITS,
                (false, false) => {
                    return Err(Error::Domain(format!(
                        "both likelihoods vanish at symbol {i}"
                    )))
                }
            };
            sum.add(w, bits);
        }
    }
    sum.value()
}
