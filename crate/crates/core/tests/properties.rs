use cm_core::cm_test::{self, Partition, TestScenario};
use cm_core::mixture::{self, RightStepMethod};
use cm_core::prob::{channel_stats, entropy, kl_divergence, mutual_information};
use cm_core::rg::{rg_point, PayoffMatrix};
use cm_core::semantic::{
    log_normalized_likelihood, optimize_truth_row_from_channel, optimize_truth_row_from_sampling,
    semantic_bayes, semantic_kl_info, semantic_mutual_info, SampleCounts, SemanticChannel,
    TruthRow,
};
use cm_core::{
    discretized_gaussian, e_step, em_objectives, left_step_a, run_cm_mixture, run_em, Alphabet,
    Channel, Distribution, MixtureModel, MixtureOptions,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn classes(n: usize) -> Alphabet {
    Alphabet::classes(n).unwrap()
}

fn weights(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..1.0, n)
}

fn dist_from(w: &[f64]) -> Distribution {
    Distribution::from_weights(classes(w.len()), w.to_vec()).unwrap()
}

/// Column-normalized `rows[j][i]` from raw positive weights.
fn channel_from(raw: &[Vec<f64>]) -> Channel {
    let n_out = raw.len();
    let n_in = raw[0].len();
    let mut rows = raw.to_vec();
    for i in 0..n_in {
        let col: f64 = (0..n_out).map(|j| raw[j][i]).sum();
        for row in rows.iter_mut() {
            row[i] /= col;
        }
    }
    Channel::new(classes(n_in), classes(n_out), rows).unwrap()
}

fn channel_strategy(n_in: usize, n_out: usize) -> impl Strategy<Value = Channel> {
    prop::collection::vec(weights(n_in), n_out).prop_map(|raw| channel_from(&raw))
}

fn truth_strategy(n: usize) -> impl Strategy<Value = TruthRow> {
    prop::collection::vec(0.0f64..=1.0, n)
        .prop_filter("needs a positive value", |v| v.iter().any(|&t| t > 0.01))
        .prop_map(move |v| TruthRow::new(classes(n), v).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn kl_is_non_negative(p in weights(5), q in weights(5)) {
        let (p, q) = (dist_from(&p), dist_from(&q));
        prop_assert!(kl_divergence(&p, &q).unwrap() >= 0.0);
        prop_assert!(kl_divergence(&p, &p).unwrap().abs() < 1e-12);
    }

    #[test]
    fn mutual_information_bounded_by_entropies(p in weights(4), ch in channel_strategy(4, 3)) {
        let prior = dist_from(&p);
        let stats = channel_stats(&prior, &ch).unwrap();
        let total: f64 = stats.joint.iter().flatten().sum();
        prop_assert!((total - 1.0).abs() < 1e-9);
        let mi = mutual_information(&prior, &ch).unwrap();
        prop_assert!(mi >= 0.0);
        prop_assert!(mi <= entropy(&prior).min(entropy(&stats.marginal_y)) + 1e-12);
    }

    #[test]
    fn discretized_gaussians_are_distributions(c in -20.0f64..120.0, d in 0.5f64..40.0) {
        let g = Alphabet::integer_grid(1, 100).unwrap();
        let p = discretized_gaussian(&g, c, d).unwrap();
        prop_assert!(p.mass().iter().all(|&m| m >= 0.0));
        prop_assert!((p.mass().iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn semantic_information_never_exceeds_shannon(
        p in weights(3),
        ch in channel_strategy(3, 3),
        rows in prop::collection::vec(truth_strategy(3), 3),
    ) {
        let prior = dist_from(&p);
        let sem = SemanticChannel::new(rows).unwrap();
        let shannon = mutual_information(&prior, &ch).unwrap();
        let smi = semantic_mutual_info(&prior, &ch, &sem).unwrap();
        prop_assert!(smi.info <= shannon + 1e-9);
        let h_cond = channel_stats(&prior, &ch).unwrap().conditional_entropy();
        prop_assert!(smi.cond_entropy >= h_cond - 1e-9);

        let matched = SemanticChannel::matched(&ch).unwrap();
        let best = semantic_mutual_info(&prior, &ch, &matched).unwrap();
        prop_assert!((best.info - shannon).abs() < 1e-9);
    }

    #[test]
    fn optimized_rows_reproduce_posteriors(p in weights(4), ch in channel_strategy(4, 3)) {
        let prior = dist_from(&p);
        let stats = channel_stats(&prior, &ch).unwrap();
        for j in 0..3 {
            let truth = optimize_truth_row_from_channel(ch.input(), ch.row(j)).unwrap();
            prop_assert!((truth.max() - 1.0).abs() < 1e-9);
            let lik = semantic_bayes(&prior, &truth).unwrap().likelihood;
            let post = stats.posteriors[j].as_ref().unwrap();
            for i in 0..4 {
                prop_assert!((lik.prob(i) - post.prob(i)).abs() < 1e-9);
            }
            let kl_info = semantic_kl_info(post, &prior, &truth).unwrap();
            prop_assert!((kl_info - kl_divergence(post, &prior).unwrap()).abs() < 1e-9);
        }
    }

    #[test]
    fn sampling_and_channel_optimizers_agree(p in weights(4), s in weights(4)) {
        let prior = dist_from(&p);
        let sampling = dist_from(&s);
        let from_sampling = optimize_truth_row_from_sampling(&sampling, &prior).unwrap();
        let reconstructed: Vec<f64> = (0..4).map(|i| sampling.prob(i) / prior.prob(i)).collect();
        let top = reconstructed.iter().copied().fold(0.0, f64::max);
        let row: Vec<f64> = reconstructed.iter().map(|v| v / top * 0.6).collect();
        let from_channel = optimize_truth_row_from_channel(&classes(4), &row).unwrap();
        for i in 0..4 {
            prop_assert!((from_sampling.value(i) - from_channel.value(i)).abs() < 1e-9);
        }
    }

    #[test]
    fn scaling_truth_rows_keeps_likelihood(p in weights(5), t in truth_strategy(5)) {
        let prior = dist_from(&p);
        let a = semantic_bayes(&prior, &t).unwrap().likelihood;
        let b = semantic_bayes(&prior, &t.scaled(0.37).unwrap()).unwrap().likelihood;
        for i in 0..5 {
            prop_assert!((a.prob(i) - b.prob(i)).abs() < 1e-12);
        }
    }

    #[test]
    fn log_likelihood_scales_semantic_information(
        counts in prop::collection::vec(prop::collection::vec(1u64..50, 3), 2),
        rows in prop::collection::vec(truth_strategy(3), 2),
    ) {
        let counts = SampleCounts::new(counts).unwrap();
        let prior = counts.empirical_prior(classes(3)).unwrap();
        let ch = counts.empirical_channel(classes(3), classes(2)).unwrap();
        let sem = SemanticChannel::new(rows).unwrap();
        let n = counts.total() as f64;
        let lnl = log_normalized_likelihood(&counts, &prior, &sem).unwrap();
        let smi = semantic_mutual_info(&prior, &ch, &sem).unwrap().info;
        prop_assert!((lnl - n * smi).abs() <= 1e-6 * n);
    }

    #[test]
    fn matched_payoff_has_unit_lambda_at_slope_one(p in weights(3), ch in channel_strategy(3, 3)) {
        let prior = dist_from(&p);
        let sem = SemanticChannel::matched(&ch).unwrap();
        let payoff = PayoffMatrix::from_semantic(&prior, &sem).unwrap();
        let pt = rg_point(&prior, &payoff, 1.0, None).unwrap();
        prop_assert!((pt.r - pt.g).abs() <= 1e-6);
        for l in &pt.lambdas {
            prop_assert!((l - 1.0).abs() <= 1e-6);
        }
    }

    #[test]
    fn rg_slope_matches_s(p in weights(3), ch in channel_strategy(3, 3), s in 0.4f64..3.0) {
        let prior = dist_from(&p);
        let sem = SemanticChannel::matched(&ch).unwrap();
        let payoff = PayoffMatrix::from_semantic(&prior, &sem).unwrap();
        let h = 0.01;
        let a = rg_point(&prior, &payoff, s - h, None).unwrap();
        let b = rg_point(&prior, &payoff, s + h, None).unwrap();
        prop_assume!((b.g - a.g).abs() > 1e-7);
        let slope = (b.r - a.r) / (b.g - a.g);
        prop_assert!((slope - s).abs() <= 0.05 * s, "slope {} at s {}", slope, s);
    }

    #[test]
    fn left_step_ignores_common_offsets(
        curves in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 20), 3),
        offset in -100.0f64..100.0,
    ) {
        let shifted: Vec<Vec<f64>> = curves
            .iter()
            .map(|c| c.iter().map(|v| v + offset).collect())
            .collect();
        prop_assert_eq!(cm_test::left_step(&curves).unwrap(), cm_test::left_step(&shifted).unwrap());
    }

    #[test]
    fn test_right_step_matches_shannon(
        c0 in 15.0f64..45.0, c1 in 55.0f64..85.0, d0 in 5.0f64..15.0, d1 in 5.0f64..15.0,
        p0 in 0.2f64..0.8, b in 35.0f64..65.0,
    ) {
        let grid = Alphabet::integer_grid(1, 100).unwrap();
        let scenario = TestScenario::gaussian(grid.clone(), &[p0, 1.0 - p0], &[c0, c1], &[d0, d1]).unwrap();
        let part = Partition::from_boundaries(&grid, &[b.floor()]).unwrap();
        let m = cm_test::right_step(&scenario, &part).unwrap();
        let smi = semantic_mutual_info(scenario.prior(), &m.channel, &m.sem).unwrap().info;
        prop_assert!((smi - mutual_information(scenario.prior(), &m.channel).unwrap()).abs() < 1e-9);
    }
}

fn random_model(rng: &mut ChaCha8Rng, grid: &Alphabet, n: usize) -> MixtureModel {
    let params: Vec<(f64, f64, f64)> = (0..n)
        .map(|_| (rng.gen_range(10.0..90.0), rng.gen_range(3.0..20.0), rng.gen_range(0.1..1.0)))
        .collect();
    let total: f64 = params.iter().map(|p| p.2).sum();
    let params: Vec<_> = params.iter().map(|&(c, d, w)| (c, d, w / total)).collect();
    MixtureModel::from_params(grid.clone(), &params).unwrap()
}

#[test]
fn e_step_is_left_step_a() {
    let grid = Alphabet::integer_grid(1, 100).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let n = rng.gen_range(1..=4);
        let target = random_model(&mut rng, &grid, 3).mixture().unwrap();
        let model = random_model(&mut rng, &grid, n);
        let left = left_step_a(&target, &model).unwrap().channel;
        let e = e_step(&target, &model).unwrap();
        assert_eq!(left, e);
    }
}

#[test]
fn em_decomposition_and_jensen_bound_on_random_runs() {
    let grid = Alphabet::integer_grid(1, 100).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let target = random_model(&mut rng, &grid, 2).mixture().unwrap();
        let init = random_model(&mut rng, &grid, 2);
        let hx = entropy(&target);
        let options = MixtureOptions {
            max_right_steps: 60,
            ..MixtureOptions::default()
        };
        let trace = run_em(&target, &init, options).unwrap();
        for step in &trace.steps {
            let obj = step.objectives.unwrap();
            let m = &step.monitor;
            let h_y_gen: f64 = -m
                .py_next
                .iter()
                .zip(step.model.py().mass())
                .map(|(a, b)| a * b.log2())
                .sum::<f64>();
            assert!((obj.q_fun - (m.g - hx - h_y_gen)).abs() < 1e-9);
            assert!(obj.log_l >= obj.l_fun - 1e-9);
        }
        let any = random_model(&mut rng, &grid, 3);
        let obj = em_objectives(&target, &any).unwrap();
        assert!(obj.log_l >= obj.l_fun - 1e-9);
    }
}

#[test]
fn mixture_divergence_never_increases_on_random_runs() {
    let grid = Alphabet::integer_grid(1, 100).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..40 {
        let target = random_model(&mut rng, &grid, 2).mixture().unwrap();
        let init = random_model(&mut rng, &grid, 2);
        let trace = run_cm_mixture(&target, &init, MixtureOptions::default()).unwrap();
        let mut prev = f64::INFINITY;
        for step in &trace.steps {
            let m = &step.monitor;
            assert!(m.h_qp <= prev + 1e-9);
            prev = m.h_qp;
            assert!((m.h_qp - (m.r_q - m.g)).abs() < 1e-9);
            assert!((m.r - (m.r_q - m.h_y_yplus)).abs() < 1e-9);
            assert!((m.h_qp - kl_divergence(&target, &m.q).unwrap()).abs() < 1e-9);
            if let Some(held) = &step.held {
                assert!(m.h_qp <= held.h_qp + 1e-9);
            }
        }
    }
}

/// `Σ_i w_i log₂ P(x_i|c, d)` for one component.
fn component_gain(w: &[f64], grid: &Alphabet, c: f64, d: f64) -> f64 {
    let lik = discretized_gaussian(grid, c, d).unwrap();
    w.iter()
        .zip(lik.mass())
        .filter(|(w, _)| **w > 0.0)
        .map(|(w, l)| w * l.log2())
        .sum()
}

#[test]
fn right_step_beats_grid_search() {
    let grid = Alphabet::integer_grid(1, 100).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let mut cases = vec![
        (
            MixtureModel::from_params(grid.clone(), &[(35.0, 8.0, 0.7), (65.0, 12.0, 0.3)]).unwrap(),
            MixtureModel::from_params(grid.clone(), &[(30.0, 15.0, 0.5), (70.0, 15.0, 0.5)]).unwrap(),
        ),
        (
            MixtureModel::from_params(grid.clone(), &[(35.0, 8.0, 0.1), (65.0, 12.0, 0.9)]).unwrap(),
            MixtureModel::from_params(grid.clone(), &[(30.0, 8.0, 0.5), (70.0, 8.0, 0.5)]).unwrap(),
        ),
    ];
    for _ in 0..3 {
        cases.push((random_model(&mut rng, &grid, 2), random_model(&mut rng, &grid, 2)));
    }
    for (truth, start) in cases {
        let target = truth.mixture().unwrap();
        let channel = left_step_a(&target, &start).unwrap().channel;
        let fit = mixture::right_step(&target, &channel, &grid, RightStepMethod::ExactGrid).unwrap();
        for (j, comp) in fit.iter().enumerate() {
            let w: Vec<f64> = channel[j].iter().zip(target.mass()).map(|(c, p)| c * p).collect();
            let best = component_gain(&w, &grid, comp.center, comp.stddev);
            for a in 0..=80 {
                for b in 0..=80 {
                    let c = comp.center - 2.0 + 0.05 * a as f64;
                    let d = comp.stddev - 2.0 + 0.05 * b as f64;
                    if d < mixture::D_MIN {
                        continue;
                    }
                    assert!(component_gain(&w, &grid, c, d) <= best + 1e-4);
                }
            }
        }
    }
}
