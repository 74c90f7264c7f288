use super::*;
use crate::corpus::{Document, Split, Vocabulary};
use crate::rng::rng_from_seed;

fn labeled(v: usize, docs: &[(&[u32], f64)]) -> Corpus {
    let documents = docs
        .iter()
        .enumerate()
        .map(|(j, (w, y))| Document {
            id: format!("d{j}"),
            word_ids: w.to_vec(),
            label: *y,
            split: Split::Train,
            meta: None,
        })
        .collect();
    Corpus::new(Vocabulary::synthetic(v), documents).unwrap()
}

/// Two word-blocks; the label is the share of block-A words plus noise.
fn block_corpus(j: usize, n: usize, seed: u64) -> Corpus {
    let mut rng = rng_from_seed(seed);
    let docs: Vec<Document> = (0..j)
        .map(|d| {
            let share: f64 = rng.random();
            let words: Vec<u32> = (0..n)
                .map(|_| if rng.random::<f64>() < share { rng.random_range(0..10) } else { rng.random_range(10..20) })
                .collect();
            let a = words.iter().filter(|&&w| w < 10).count() as f64 / n as f64;
            let y = a + 0.1 * (rng.random::<f64>() - 0.5);
            Document { id: format!("d{d}"), word_ids: words, label: y, split: Split::Train, meta: None }
        })
        .collect();
    Corpus::new(Vocabulary::synthetic(20), docs).unwrap()
}

fn h(k: usize) -> Hyperparams {
    Hyperparams::new(k, 0.5, 0.1).unwrap()
}

#[test]
fn hand_evaluated_two_topic_tilt() {
    let c = labeled(2, &[(&[0, 1, 0], 0.7), (&[1, 1], -0.2)]);
    let s = ChainState::from_assignments(&c, h(2), vec![vec![0, 1, 1], vec![0, 0]], 1).unwrap();
    let eta = [0.2, 1.0];
    let sigma: f64 = 0.3;
    let p = tilted_site_distribution(&s, &c, 0, 0, 0.7, &eta, sigma).unwrap();

    // counts without site (0,0): N_00=0, N_01=1, N_0=2, N_1=2, n_00=0, n_01=2; Vβ = 0.2
    let w0 = 0.1 / 2.2 * 0.5;
    let w1 = 1.1 / 2.2 * 2.5;
    // z̄ with the site on topic 0 is (1/3, 2/3); on topic 1 it is (0, 1)
    let m0 = 0.2 / 3.0 + 2.0 / 3.0;
    let m1 = 1.0;
    let g = |m: f64| (-(0.7 - m) * (0.7 - m) / (2.0 * sigma * sigma)).exp();
    let (a, b) = (w0 * g(m0), w1 * g(m1));
    assert!((p[0] - a / (a + b)).abs() < 1e-14, "{p:?}");
    assert!((p[1] - b / (a + b)).abs() < 1e-14);
}

#[test]
fn distribution_is_normalized() {
    let c = block_corpus(12, 15, 3);
    let s = init_chain(&c, h(4), 9).unwrap();
    let eta = [0.5, -1.0, 2.0, 0.0];
    for sigma in [1e-6, 1e-2, 1.0] {
        for (j, d) in c.documents.iter().enumerate() {
            for i in 0..d.len() {
                let p = tilted_site_distribution(&s, &c, j, i, d.label, &eta, sigma).unwrap();
                assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                assert!(p.iter().all(|x| *x >= 0.0));
            }
        }
    }
}

#[test]
fn huge_sigma_recovers_the_plain_update() {
    let c = block_corpus(20, 12, 5);
    let s = init_chain(&c, h(3), 2).unwrap();
    let eta = [1.0, -3.0, 0.4];
    let sd = sample_sd(&c.labels());
    let mut worst = 0.0f64;
    for (j, d) in c.documents.iter().enumerate() {
        for i in 0..d.len() {
            let tilted = tilted_site_distribution(&s, &c, j, i, d.label, &eta, 1e6 * sd).unwrap();
            let plain = s.conditional(&c, j, i);
            let l1: f64 = tilted.iter().zip(&plain).map(|(a, b)| (a - b).abs()).sum();
            worst = worst.max(l1);
        }
    }
    assert!(worst < 1e-9, "{worst}");
}

#[test]
fn nonpositive_sigma_is_rejected() {
    let c = labeled(2, &[(&[0, 1], 0.1), (&[1], 0.3)]);
    let mut s = init_chain(&c, h(2), 1).unwrap();
    for sigma in [0.0, -1.0, f64::NAN] {
        assert!(matches!(tilted_site_distribution(&s, &c, 0, 0, 0.1, &[0.0, 1.0], sigma), Err(Error::Domain(_))));
        assert!(tilted_sweep(&mut s, &c, &[0.1, 0.3], &[0.0, 1.0], sigma).is_err());
    }
    assert!(tilted_site_update(&mut s, &c, 0, 0, 0.1, &[0.0], 1.0).is_err());
}

#[test]
fn site_update_keeps_counts_and_counts_itself() {
    let c = block_corpus(6, 8, 1);
    let mut s = init_chain(&c, h(3), 4).unwrap();
    for i in 0..8 {
        tilted_site_update(&mut s, &c, 2, i, c.documents[2].label, &[0.0, 1.0, -1.0], 0.05).unwrap();
    }
    s.check_consistency(&c).unwrap();
    assert_eq!(s.tilted_updates(), 8);
}

#[test]
fn sweep_agrees_with_sequential_site_updates() {
    let c = block_corpus(15, 10, 8);
    let labels = c.labels();
    let eta = [0.9, -0.4, 0.2];
    let base = init_chain(&c, h(3), 6).unwrap();
    let mut a = base.fork(42);
    let mut b = base.fork(42);
    tilted_sweep(&mut a, &c, &labels, &eta, 0.05).unwrap();
    for (j, d) in c.documents.iter().enumerate() {
        for i in 0..d.len() {
            tilted_site_update(&mut b, &c, j, i, labels[j], &eta, 0.05).unwrap();
        }
    }
    let agree = a.assignments().iter().flatten().zip(b.assignments().iter().flatten()).filter(|(x, y)| x == y).count();
    assert_eq!(agree, c.total_tokens());
    assert_eq!(a.tilted_updates(), c.total_tokens() as u64);
}

#[test]
fn em_is_deterministic_and_traces_every_round() {
    let c = block_corpus(30, 20, 2);
    let sched = EmSchedule { em_rounds: 3, e_sweeps_per_round: 4, burn_in_sweeps: 5 };
    let a = stochastic_em(&c, h(2), SigmaPolicy::Residual, sched, 17).unwrap();
    let b = stochastic_em(&c, h(2), SigmaPolicy::Residual, sched, 17).unwrap();
    assert_eq!(a.state.assignments(), b.state.assignments());
    assert_eq!(a.trace, b.trace);
    assert_eq!(a.trace.len(), 4);
    assert_eq!(a.trace.iter().map(|r| r.round).collect::<Vec<_>>(), vec![0, 1, 2, 3]);
    let last = a.trace.last().unwrap();
    assert_eq!(last.sigma, a.fit.sigma_hat.max(SIGMA_FLOOR));
    assert_eq!(last.r2_in, a.fit.r2_in);
    assert_eq!(a.state.iteration(), 5 + 12);
    assert_eq!(a.state.tilted_updates(), 12 * c.total_tokens() as u64);
}

#[test]
fn label_sd_policy_uses_the_sample_sd() {
    let c = block_corpus(25, 10, 4);
    let sched = EmSchedule { em_rounds: 2, e_sweeps_per_round: 1, burn_in_sweeps: 1 };
    let out = stochastic_em(&c, h(2), SigmaPolicy::LabelSd, sched, 1).unwrap();
    let sd = sample_sd(&c.labels());
    assert!(out.trace.iter().all(|r| r.sigma == sd));
}

#[test]
fn huge_fixed_sigma_tracks_plain_lda() {
    let c = block_corpus(40, 25, 9);
    let sched = EmSchedule { em_rounds: 3, e_sweeps_per_round: 10, burn_in_sweeps: 10 };
    let sd = sample_sd(&c.labels());
    let em = stochastic_em(&c, h(3), SigmaPolicy::Fixed(1e6 * sd), sched, 77).unwrap();
    let mut plain = init_chain(&c, h(3), 77).unwrap();
    plain.run(&c, 40).unwrap();
    let same = em
        .state
        .assignments()
        .iter()
        .flatten()
        .zip(plain.assignments().iter().flatten())
        .filter(|(x, y)| x == y)
        .count();
    assert!(same as f64 >= 0.99 * c.total_tokens() as f64, "{same} of {}", c.total_tokens());
}

#[test]
fn em_error_paths() {
    let c = block_corpus(3, 5, 1);
    let sched = EmSchedule::default();
    assert!(matches!(stochastic_em(&c, h(3), SigmaPolicy::Residual, sched, 1), Err(Error::Underdetermined { .. })));
    let c = labeled(2, &[(&[0], 1.0), (&[1], 1.0), (&[0, 1], 1.0)]);
    assert!(matches!(stochastic_em(&c, h(1), SigmaPolicy::Residual, sched, 1), Err(Error::ConstantLabels)));
    let bad = EmSchedule { em_rounds: 0, ..sched };
    assert!(stochastic_em(&block_corpus(10, 5, 1), h(2), SigmaPolicy::Residual, bad, 1).is_err());
}

#[test]
fn policy_parsing() {
    assert_eq!("fixed:0.25".parse::<SigmaPolicy>().unwrap(), SigmaPolicy::Fixed(0.25));
    assert_eq!("residual".parse::<SigmaPolicy>().unwrap(), SigmaPolicy::Residual);
    assert_eq!("label-sd".parse::<SigmaPolicy>().unwrap(), SigmaPolicy::LabelSd);
    assert!("fixed:0".parse::<SigmaPolicy>().is_err());
    assert!("fixed:-1".parse::<SigmaPolicy>().is_err());
    assert!("bogus".parse::<SigmaPolicy>().is_err());
    for p in [SigmaPolicy::Fixed(1e-6), SigmaPolicy::Residual, SigmaPolicy::LabelSd] {
        assert_eq!(p.to_string().parse::<SigmaPolicy>().unwrap(), p);
    }
}
