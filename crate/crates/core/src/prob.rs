//! Finite discrete probability primitives.
//!
//! Everything here works on dense vectors over a small ordered alphabet: class
//! labels `x_i`, hypothesis labels `y_j`, or grid points `z_k`. Information is
//! always reported in bits and `0 · log 0` is taken to be `0`.

use crate::error::{Error, Result};

/// Masses must sum to one within this tolerance.
pub const NORMALIZATION_TOL: f64 = 1e-9;

/// Probabilities at or below this value are treated as zero inside logarithms.
pub const PROB_FLOOR: f64 = 1e-300;

/// Ordered set of symbols.
///
/// Class alphabets carry arbitrary distinct labels. Grid alphabets carry real
/// observation values and must be strictly increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct Alphabet {
    labels: Vec<f64>,
    grid: bool,
}

impl Alphabet {
    /// Class alphabet `{0, 1, …, n-1}`.
    pub fn classes(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidAlphabet("alphabet must not be empty".into()));
        }
        Ok(Self {
            labels: (0..n).map(|i| i as f64).collect(),
            grid: false,
        })
    }

    /// Class alphabet with explicit labels.
    pub fn with_labels(labels: Vec<f64>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::InvalidAlphabet("alphabet must not be empty".into()));
        }
        for (i, a) in labels.iter().enumerate() {
            if !a.is_finite() {
                return Err(Error::InvalidAlphabet(format!("label {i} is not finite")));
            }
            if labels[..i].contains(a) {
                return Err(Error::InvalidAlphabet(format!("duplicate label {a}")));
            }
        }
        Ok(Self {
            labels,
            grid: false,
        })
    }

    /// Grid alphabet; values must be finite and strictly increasing.
    pub fn grid(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidAlphabet("grid must not be empty".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidAlphabet("grid values must be finite".into()));
        }
        if values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidAlphabet(
                "grid values must be strictly increasing".into(),
            ));
        }
        Ok(Self {
            labels: values,
            grid: true,
        })
    }

    /// Integer grid `lo, lo+1, …, hi`.
    pub fn integer_grid(lo: i64, hi: i64) -> Result<Self> {
        if hi < lo {
            return Err(Error::InvalidAlphabet(format!("empty grid {lo}..={hi}")));
        }
        Self::grid((lo..=hi).map(|v| v as f64).collect())
    }

    /// Uniform grid of `len` points starting at `start`.
    pub fn uniform_grid(start: f64, step: f64, len: usize) -> Result<Self> {
        if !(step > 0.0) {
            return Err(Error::InvalidAlphabet(format!("grid step {step} must be > 0")));
        }
        Self::grid((0..len).map(|k| start + step * k as f64).collect())
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn is_grid(&self) -> bool {
        self.grid
    }

    /// Position of `value` in the alphabet, compared exactly.
    pub fn index_of(&self, value: f64) -> Option<usize> {
        self.labels.iter().position(|&v| v == value)
    }
}

/// Probability vector over an [`Alphabet`].
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    support: Alphabet,
    mass: Vec<f64>,
}

impl Distribution {
    /// Validates non-negativity and normalization.
    pub fn new(support: Alphabet, mass: Vec<f64>) -> Result<Self> {
        if mass.len() != support.len() {
            return Err(Error::SupportMismatch {
                left: support.len(),
                right: mass.len(),
            });
        }
        if let Some(i) = mass.iter().position(|m| !m.is_finite() || *m < 0.0) {
            return Err(Error::InvalidDistribution(format!(
                "mass[{i}] = {} is not a probability",
                mass[i]
            )));
        }
        let total: f64 = mass.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::InvalidDistribution(format!(
                "masses sum to {total}, not 1"
            )));
        }
        Ok(Self { support, mass })
    }

    /// Normalizes non-negative weights.
    pub fn from_weights(support: Alphabet, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != support.len() {
            return Err(Error::SupportMismatch {
                left: support.len(),
                right: weights.len(),
            });
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidDistribution(
                "weights must be finite and non-negative".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::DegenerateDistribution);
        }
        let mass = weights.into_iter().map(|w| w / total).collect();
        Ok(Self { support, mass })
    }

    pub fn uniform(support: Alphabet) -> Self {
        let n = support.len();
        Self {
            mass: vec![1.0 / n as f64; n],
            support,
        }
    }

    pub fn point_mass(support: Alphabet, index: usize) -> Result<Self> {
        if index >= support.len() {
            return Err(Error::InvalidParameter(format!(
                "index {index} outside alphabet of {}",
                support.len()
            )));
        }
        let mut mass = vec![0.0; support.len()];
        mass[index] = 1.0;
        Ok(Self { support, mass })
    }

    pub fn support(&self) -> &Alphabet {
        &self.support
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn prob(&self, i: usize) -> f64 {
        self.mass[i]
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    /// Expected value of the support labels.
    pub fn mean(&self) -> f64 {
        self.support
            .labels()
            .iter()
            .zip(&self.mass)
            .map(|(x, p)| x * p)
            .sum()
    }

    pub(crate) fn ensure_same_support(&self, other: &Distribution) -> Result<()> {
        ensure_same_alphabet(&self.support, &other.support)
    }
}

pub(crate) fn ensure_same_alphabet(a: &Alphabet, b: &Alphabet) -> Result<()> {
    if a != b {
        return Err(Error::SupportMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(())
}

/// Table of transition probability functions `P(y_j|X)`, one row per output.
///
/// Rows are indexed by output symbol and columns by input symbol. Columns sum
/// to one; rows need not.
#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    input: Alphabet,
    output: Alphabet,
    rows: Vec<Vec<f64>>,
}

impl Channel {
    pub fn new(input: Alphabet, output: Alphabet, rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.len() != output.len() {
            return Err(Error::InvalidChannel(format!(
                "{} rows for {} output symbols",
                rows.len(),
                output.len()
            )));
        }
        let mut rows = rows;
        for (j, row) in rows.iter_mut().enumerate() {
            if row.len() != input.len() {
                return Err(Error::InvalidChannel(format!(
                    "row {j} has {} entries for {} inputs",
                    row.len(),
                    input.len()
                )));
            }
            for v in row.iter_mut() {
                if !v.is_finite() || *v < -1e-12 || *v > 1.0 + 1e-12 {
                    return Err(Error::InvalidChannel(format!(
                        "row {j} has entry {v} outside [0, 1]"
                    )));
                }
                *v = v.clamp(0.0, 1.0);
            }
        }
        for i in 0..input.len() {
            let total: f64 = rows.iter().map(|r| r[i]).sum();
            if (total - 1.0).abs() > NORMALIZATION_TOL {
                return Err(Error::InvalidChannel(format!(
                    "column {i} sums to {total}, not 1"
                )));
            }
        }
        Ok(Self {
            input,
            output,
            rows,
        })
    }

    /// Noiseless channel mapping each symbol to itself.
    pub fn identity(alphabet: Alphabet) -> Self {
        let n = alphabet.len();
        let rows = (0..n)
            .map(|j| (0..n).map(|i| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        Self {
            input: alphabet.clone(),
            output: alphabet,
            rows,
        }
    }

    pub fn input(&self) -> &Alphabet {
        &self.input
    }

    pub fn output(&self) -> &Alphabet {
        &self.output
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    /// Transition function `P(y_j|X)`.
    pub fn row(&self, j: usize) -> &[f64] {
        &self.rows[j]
    }

    /// `P(y_j|x_i)`.
    pub fn prob(&self, j: usize, i: usize) -> f64 {
        self.rows[j][i]
    }

    pub fn n_inputs(&self) -> usize {
        self.input.len()
    }

    pub fn n_outputs(&self) -> usize {
        self.output.len()
    }
}

/// Joint, marginal and posterior quantities of a prior pushed through a channel.
#[derive(Debug, Clone, PartialEq)]
pub struct JointStats {
    pub marginal_y: Distribution,
    /// `joint[j][i] = P(x_i, y_j)`.
    pub joint: Vec<Vec<f64>>,
    /// `P(X|y_j)`, or `None` where `P(y_j) = 0`.
    pub posteriors: Vec<Option<Distribution>>,
}

impl JointStats {
    /// Shannon conditional entropy `H(X|Y)` in bits.
    pub fn conditional_entropy(&self) -> f64 {
        let mut h = 0.0;
        for (row, post) in self.joint.iter().zip(&self.posteriors) {
            let Some(post) = post else { continue };
            for (&pj, &q) in row.iter().zip(post.mass()) {
                if pj > PROB_FLOOR && q > PROB_FLOOR {
                    h -= pj * q.log2();
                }
            }
        }
        h.max(0.0)
    }
}

/// Gaussian shape `exp(-(z-c)²/(2σ²))` evaluated on the grid and renormalized.
pub fn discretized_gaussian(grid: &Alphabet, center: f64, stddev: f64) -> Result<Distribution> {
    if !(stddev > 0.0) || !stddev.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "stddev must be positive, got {stddev}"
        )));
    }
    if !center.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "center must be finite, got {center}"
        )));
    }
    let two_var = 2.0 * stddev * stddev;
    let weights: Vec<f64> = grid
        .labels()
        .iter()
        .map(|z| (-(z - center).powi(2) / two_var).exp())
        .collect();
    let total: f64 = weights.iter().sum();
    if total <= 0.0 || !total.is_finite() {
        return Err(Error::DegenerateDistribution);
    }
    Ok(Distribution {
        support: grid.clone(),
        mass: weights.into_iter().map(|w| w / total).collect(),
    })
}

/// Shannon entropy in bits.
pub fn entropy(p: &Distribution) -> f64 {
    entropy_of(p.mass())
}

pub(crate) fn entropy_of(mass: &[f64]) -> f64 {
    let h: f64 = mass
        .iter()
        .filter(|&&m| m > PROB_FLOOR)
        .map(|&m| -m * m.log2())
        .sum();
    h.max(0.0)
}

/// Binary entropy `H₂(p)` in bits.
pub fn binary_entropy(p: f64) -> f64 {
    entropy_of(&[p, 1.0 - p])
}

/// `Σ p log₂(p/q)`, averaging under `p`.
pub fn kl_divergence(p: &Distribution, q: &Distribution) -> Result<f64> {
    p.ensure_same_support(q)?;
    kl_of(p.mass(), q.mass())
}

pub(crate) fn kl_of(p: &[f64], q: &[f64]) -> Result<f64> {
    let mut d = 0.0;
    for (index, (&pi, &qi)) in p.iter().zip(q).enumerate() {
        if pi <= PROB_FLOOR {
            continue;
        }
        if qi <= PROB_FLOOR {
            return Err(Error::DivergenceUndefined { index });
        }
        d += pi * (pi / qi).log2();
    }
    Ok(d.max(0.0))
}

/// Pushes `prior` through `channel` and applies Bayes' rule per output.
pub fn channel_stats(prior: &Distribution, channel: &Channel) -> Result<JointStats> {
    ensure_same_alphabet(prior.support(), channel.input())?;
    let joint: Vec<Vec<f64>> = channel
        .rows()
        .iter()
        .map(|row| row.iter().zip(prior.mass()).map(|(t, p)| t * p).collect())
        .collect();
    let marginal: Vec<f64> = joint.iter().map(|row| row.iter().sum()).collect();
    let total: f64 = marginal.iter().sum();
    let marginal: Vec<f64> = marginal.into_iter().map(|m| m / total).collect();
    let posteriors = joint
        .iter()
        .zip(&marginal)
        .map(|(row, &py)| {
            (py > PROB_FLOOR).then(|| Distribution {
                support: prior.support().clone(),
                mass: row.iter().map(|v| v / py).collect(),
            })
        })
        .collect();
    Ok(JointStats {
        marginal_y: Distribution {
            support: channel.output().clone(),
            mass: marginal,
        },
        joint,
        posteriors,
    })
}

/// Shannon mutual information `I(X;Y)` in bits.
pub fn mutual_information(prior: &Distribution, channel: &Channel) -> Result<f64> {
    let stats = channel_stats(prior, channel)?;
    let mut info = 0.0;
    for (j, row) in stats.joint.iter().enumerate() {
        let py = stats.marginal_y.prob(j);
        for (i, &pxy) in row.iter().enumerate() {
            if pxy > PROB_FLOOR {
                info += pxy * (channel.prob(j, i) / py).log2();
            }
        }
    }
    Ok(info.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn binary(p: f64) -> Distribution {
        Distribution::new(Alphabet::classes(2).unwrap(), vec![p, 1.0 - p]).unwrap()
    }

    fn grid100() -> Alphabet {
        Alphabet::integer_grid(1, 100).unwrap()
    }

    #[test]
    fn alphabet_validation() {
        assert!(Alphabet::classes(0).is_err());
        assert!(Alphabet::grid(vec![1.0, 1.0]).is_err());
        assert!(Alphabet::grid(vec![2.0, 1.0]).is_err());
        assert!(Alphabet::with_labels(vec![3.0, 3.0]).is_err());
        assert!(Alphabet::integer_grid(5, 4).is_err());
        let g = Alphabet::uniform_grid(0.5, 0.25, 4).unwrap();
        assert_eq!(g.labels(), &[0.5, 0.75, 1.0, 1.25]);
        assert!(g.is_grid());
        assert_eq!(g.index_of(1.0), Some(2));
    }

    #[test]
    fn distribution_validation() {
        let a = Alphabet::classes(2).unwrap();
        assert!(Distribution::new(a.clone(), vec![0.6, 0.6]).is_err());
        assert!(Distribution::new(a.clone(), vec![1.2, -0.2]).is_err());
        assert!(Distribution::new(a.clone(), vec![1.0]).is_err());
        assert!(Distribution::from_weights(a.clone(), vec![0.0, 0.0]).is_err());
        let d = Distribution::from_weights(a, vec![1.0, 3.0]).unwrap();
        assert_abs_diff_eq!(d.prob(1), 0.75);
    }

    #[test]
    fn gaussian_mode_at_center() {
        let d = discretized_gaussian(&grid100(), 30.0, 15.0).unwrap();
        assert_abs_diff_eq!(d.mass().iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        let mode = d
            .mass()
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert_eq!(grid100().labels()[mode], 30.0);
    }

    #[test]
    fn gaussian_symmetry_and_ratio() {
        let g = grid100();
        let d = discretized_gaussian(&g, 50.0, 10.0).unwrap();
        assert_abs_diff_eq!(d.prob(39), d.prob(59), epsilon = 1e-15);

        // Unnormalized density ratio: exp(-0) / exp(-100/200) = e^0.5.
        let oracle = (0.0f64).exp() / (-(10.0f64).powi(2) / 200.0).exp();
        let d = discretized_gaussian(&g, 70.0, 10.0).unwrap();
        assert_abs_diff_eq!(d.prob(69) / d.prob(79), oracle, epsilon = 1e-12);
        assert_abs_diff_eq!(oracle, 1.6487, epsilon = 1e-4);
    }

    #[test]
    fn gaussian_errors() {
        let g = grid100();
        assert!(matches!(
            discretized_gaussian(&g, 50.0, 0.0),
            Err(Error::InvalidParameter(_))
        ));
        assert!(matches!(
            discretized_gaussian(&g, 50.0, -1.0),
            Err(Error::InvalidParameter(_))
        ));
        assert_eq!(
            discretized_gaussian(&g, 1e6, 1.0),
            Err(Error::DegenerateDistribution)
        );
    }

    #[test]
    fn entropy_examples() {
        assert_abs_diff_eq!(entropy(&binary(0.5)), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(entropy(&binary(1.0)), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(entropy(&binary(0.8)), 0.72, epsilon = 0.005);
    }

    #[test]
    fn kl_examples() {
        let p = binary(0.8);
        assert_abs_diff_eq!(kl_divergence(&p, &p).unwrap(), 0.0);
        assert_abs_diff_eq!(
            kl_divergence(&binary(1.0), &binary(0.5)).unwrap(),
            1.0,
            epsilon = 1e-12
        );
        // 0.8 log2(1.6) + 0.2 log2(0.4)
        let direct = 0.8 * (0.8f64 / 0.5).log2() + 0.2 * (0.2f64 / 0.5).log2();
        assert_abs_diff_eq!(kl_divergence(&p, &binary(0.5)).unwrap(), direct, epsilon = 1e-12);
        assert_abs_diff_eq!(direct, 0.2781, epsilon = 1e-4);
    }

    #[test]
    fn kl_errors() {
        assert_eq!(
            kl_divergence(&binary(0.5), &binary(1.0)),
            Err(Error::DivergenceUndefined { index: 1 })
        );
        let three = Distribution::uniform(Alphabet::classes(3).unwrap());
        assert!(matches!(
            kl_divergence(&binary(0.5), &three),
            Err(Error::SupportMismatch { .. })
        ));
    }

    #[test]
    fn identity_channel_stats() {
        let a = Alphabet::classes(2).unwrap();
        let prior = Distribution::new(a.clone(), vec![0.3, 0.7]).unwrap();
        let stats = channel_stats(&prior, &Channel::identity(a)).unwrap();
        assert_abs_diff_eq!(stats.marginal_y.prob(0), 0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(stats.marginal_y.prob(1), 0.7, epsilon = 1e-15);
        assert_eq!(stats.posteriors[0].as_ref().unwrap().mass(), &[1.0, 0.0]);
        assert_eq!(stats.posteriors[1].as_ref().unwrap().mass(), &[0.0, 1.0]);
    }

    #[test]
    fn constant_channel_flags_undefined_posteriors() {
        let x = Alphabet::classes(2).unwrap();
        let y = Alphabet::classes(3).unwrap();
        let prior = Distribution::new(x.clone(), vec![0.3, 0.7]).unwrap();
        let ch = Channel::new(x, y, vec![vec![1.0, 1.0], vec![0.0, 0.0], vec![0.0, 0.0]])
            .unwrap();
        let stats = channel_stats(&prior, &ch).unwrap();
        assert_eq!(stats.marginal_y.mass(), &[1.0, 0.0, 0.0]);
        assert_eq!(stats.posteriors[0].as_ref().unwrap(), &prior);
        assert!(stats.posteriors[1].is_none());
        assert!(stats.posteriors[2].is_none());
        assert_abs_diff_eq!(mutual_information(&prior, &ch).unwrap(), 0.0);
    }

    #[test]
    fn channel_validation() {
        let x = Alphabet::classes(2).unwrap();
        assert!(Channel::new(x.clone(), x.clone(), vec![vec![0.5, 0.5], vec![0.4, 0.5]]).is_err());
        assert!(Channel::new(x.clone(), x.clone(), vec![vec![1.5, 0.5], vec![-0.5, 0.5]]).is_err());
        assert!(Channel::new(x.clone(), x, vec![vec![1.0, 1.0]]).is_err());
    }

    #[test]
    fn mutual_information_examples() {
        let a = Alphabet::classes(2).unwrap();
        let mi = mutual_information(&binary(0.5), &Channel::identity(a.clone())).unwrap();
        assert_abs_diff_eq!(mi, 1.0, epsilon = 1e-12);
        let same = Channel::new(a.clone(), a, vec![vec![0.3, 0.3], vec![0.7, 0.7]]).unwrap();
        assert_abs_diff_eq!(mutual_information(&binary(0.8), &same).unwrap(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn example_one_observation_information() {
        // I(X;Z) for the two-population test on 1..100.
        let g = grid100();
        let classes = Alphabet::classes(2).unwrap();
        let prior = Distribution::new(classes.clone(), vec![0.8, 0.2]).unwrap();
        let c0 = discretized_gaussian(&g, 30.0, 15.0).unwrap();
        let c1 = discretized_gaussian(&g, 70.0, 10.0).unwrap();
        let rows = (0..g.len()).map(|k| vec![c0.prob(k), c1.prob(k)]).collect();
        let ch = Channel::new(classes, g, rows).unwrap();
        assert_abs_diff_eq!(mutual_information(&prior, &ch).unwrap(), 0.55, epsilon = 0.01);
    }
}
