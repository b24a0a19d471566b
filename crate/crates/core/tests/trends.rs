//! Monte Carlo trends over 500 reference trials.

use jlce::harness::{sweep_detailed, Algorithm, ExperimentConfig, RmseSummary, Sweep, SweepParam, TrialSet};

fn sweep(param: SweepParam, values: Vec<f64>) -> Vec<(f64, TrialSet)> {
    let cfg = ExperimentConfig {
        sweep: Some(Sweep { param, values }),
        ..ExperimentConfig::default()
    };
    sweep_detailed(&cfg).unwrap()
}

fn non_decreasing_within_2se(points: &[RmseSummary]) -> bool {
    points.windows(2).all(|w| w[1].rmse >= w[0].rmse - 2.0 * w[0].se_rmse.max(w[1].se_rmse))
}

fn target(sets: &[(f64, TrialSet)], alg: Algorithm) -> Vec<RmseSummary> {
    sets.iter().map(|(_, s)| s.target_summary(alg, None).unwrap()).collect()
}

#[test]
fn target_rmse_grows_with_reference_noise() {
    let values = [-40.0, -35.0, -30.0, -25.0, -20.0].iter().map(|db: &f64| 10f64.powf(db / 10.0)).collect();
    let sets = sweep(SweepParam::Delta0, values);
    let s = target(&sets, Algorithm::Jlce);
    assert!(non_decreasing_within_2se(&s), "{:?}", s.iter().map(|x| x.rmse).collect::<Vec<_>>());
}

#[test]
fn target_rmse_grows_with_sensor_uncertainty() {
    let sets = sweep(SweepParam::Mu, vec![0.1, 0.5, 1.0]);
    for alg in [Algorithm::Jlce, Algorithm::GaussNewtonMl] {
        let s = target(&sets, alg);
        assert!(non_decreasing_within_2se(&s), "{}: {:?}", alg.name(), s.iter().map(|x| x.rmse).collect::<Vec<_>>());
    }
}

#[test]
fn offset_does_not_help() {
    let sets = sweep(SweepParam::Offset, vec![0.0, 50.0]);
    for alg in [Algorithm::Jlce, Algorithm::GaussNewtonMl] {
        let s = target(&sets, alg);
        assert!(s[1].rmse >= s[0].rmse, "{}: {} vs {}", alg.name(), s[0].rmse, s[1].rmse);
    }
}

#[test]
fn sensor_rmse_after_convergence_not_above_prior() {
    for mu in [0.1, 0.5, 1.0] {
        let cfg = ExperimentConfig {
            mu,
            record_iterations: true,
            algorithms: vec![Algorithm::Jlce],
            ..ExperimentConfig::default()
        };
        let set = jlce::harness::run_trials_detailed(&cfg).unwrap();
        let before = set.summary(Algorithm::Jlce, Some(0)).unwrap()[1].rmse;
        let after = set.summary(Algorithm::Jlce, None).unwrap()[1].rmse;
        assert!(after <= before, "μ = {mu}: {after} > {before}");
    }
}
