//! Fixtures shared by the benchmarks.

use cm_core::{
    Alphabet, Channel, Distribution, MixtureModel, PayoffMatrix, Partition, SemanticChannel,
    TestScenario,
};

pub fn grid() -> Alphabet {
    Alphabet::integer_grid(0, 100).expect("valid grid")
}

/// Two-class test on the integer grid with the boundary started at 50.
pub fn two_class_test() -> (TestScenario, Partition) {
    let grid = grid();
    let scenario = TestScenario::gaussian(grid.clone(), &[0.8, 0.2], &[30.0, 70.0], &[15.0, 10.0])
        .expect("valid scenario");
    let init = Partition::from_boundaries(&grid, &[50.0]).expect("valid boundary");
    (scenario, init)
}

/// True mixture and starting model of the two-component mixture example.
pub fn two_component_mixture() -> (Distribution, MixtureModel) {
    let target = MixtureModel::from_params(grid(), &[(35.0, 8.0, 0.7), (65.0, 12.0, 0.3)])
        .and_then(|m| m.mixture())
        .expect("valid truth");
    let start = MixtureModel::from_params(grid(), &[(30.0, 15.0, 0.5), (70.0, 15.0, 0.5)])
        .expect("valid start");
    (target, start)
}

/// Uniform binary source with the payoff of a matched symmetric channel.
pub fn binary_payoff() -> (Distribution, PayoffMatrix) {
    let classes = Alphabet::classes(2).expect("two classes");
    let prior = Distribution::from_weights(classes.clone(), vec![0.5, 0.5]).expect("valid prior");
    let channel = Channel::new(classes.clone(), classes, vec![vec![0.8, 0.2], vec![0.2, 0.8]])
        .expect("valid channel");
    let sem = SemanticChannel::matched(&channel).expect("matched channel");
    let payoff = PayoffMatrix::from_semantic(&prior, &sem).expect("valid payoff");
    (prior, payoff)
}
