use branchlda::slda::m_step;
use branchlda::synth::{generate, SyntheticSpec};

#[test]
fn planted_r2_on_true_proportions() {
    for seed in [0, 1] {
        let spec = SyntheticSpec { docs: 20_000, ..SyntheticSpec::desk(10, seed) };
        let syn = generate(&spec).unwrap();
        let fit = m_step(&syn.truth.zbar(), &syn.corpus.labels()).unwrap();
        assert!((fit.r2_in - 0.25).abs() < 0.02, "seed {seed}: R² {}", fit.r2_in);
    }
}

#[test]
fn labels_follow_the_planted_regression() {
    let spec = SyntheticSpec {
        topics: 3,
        docs: 5000,
        eta_star: Some(vec![-1.0, 0.5, 2.0]),
        target_r2: None,
        sigma_star: Some(0.0),
        ..SyntheticSpec::desk(3, 4)
    };
    let syn = generate(&spec).unwrap();
    for (y, zbar) in syn.corpus.labels().iter().zip(syn.truth.zbar()) {
        let want = -zbar[0] + 0.5 * zbar[1] + 2.0 * zbar[2];
        assert!((y - want).abs() < 1e-12);
    }
    assert!(syn.truth.phi.iter().all(|row| (row.iter().sum::<f64>() - 1.0).abs() < 1e-9));
}
