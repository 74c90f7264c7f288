use super::*;
use crate::corpus::{Document, Split, Vocabulary};
use proptest::prelude::*;

fn corpus(v: usize, docs: &[&[u32]]) -> Corpus {
    let documents = docs
        .iter()
        .enumerate()
        .map(|(j, w)| Document {
            id: format!("d{j}"),
            word_ids: w.to_vec(),
            label: 0.0,
            split: Split::Train,
            meta: None,
        })
        .collect();
    Corpus::new(Vocabulary::synthetic(v), documents).unwrap()
}

fn h(k: usize, alpha: f64, beta: f64) -> Hyperparams {
    Hyperparams::new(k, alpha, beta).unwrap()
}

#[test]
fn single_topic_chain() {
    let c = corpus(3, &[&[0, 1, 2, 2], &[1]]);
    let mut s = init_chain(&c, h(1, 0.5, 0.1), 4).unwrap();
    assert!(s.assignments().iter().flatten().all(|&t| t == 0));
    assert_eq!(s.doc_topic_counts(0), &[4]);
    let before = s.clone();
    s.run(&c, 3).unwrap();
    assert!(s.same_assignment(&before));
    assert_eq!(s.topic_proportions(1), vec![1.0]);
}

#[test]
fn init_is_seeded_and_consistent() {
    let c = corpus(5, &[&[0, 1, 2, 3, 4, 0], &[4, 4, 1], &[2]]);
    let a = init_chain(&c, h(3, 0.5, 0.1), 11).unwrap();
    let b = init_chain(&c, h(3, 0.5, 0.1), 11).unwrap();
    assert_eq!(a.assignments(), b.assignments());
    a.check_consistency(&c).unwrap();
}

#[test]
fn hand_evaluated_conditional() {
    // doc = [w0, w1], z(1) = 1, α = β = 0.5, V = K = 2.
    // k=0: (0+.5)/(0+1)·(0+.5) = 0.25;  k=1: (0+.5)/(1+1)·(1+.5) = 0.375
    let c = corpus(2, &[&[0, 1]]);
    let s = ChainState::from_assignments(&c, h(2, 0.5, 0.5), vec![vec![0, 1]], 0).unwrap();
    let p = s.conditional(&c, 0, 0);
    assert_eq!(p, vec![0.25 / 0.625, 0.375 / 0.625]);
    // same distribution whatever the site's own current value
    let s = ChainState::from_assignments(&c, h(2, 0.5, 0.5), vec![vec![1, 1]], 0).unwrap();
    assert_eq!(s.conditional(&c, 0, 0), p);
}

#[test]
fn proportions_examples() {
    let c = corpus(2, &[&[0, 1, 0, 1]]);
    let s = ChainState::from_assignments(&c, h(3, 0.5, 0.5), vec![vec![0, 0, 1, 2]], 0).unwrap();
    assert_eq!(s.topic_proportions(0), vec![0.5, 0.25, 0.25]);
    let s = ChainState::from_assignments(&c, h(4, 0.5, 0.5), vec![vec![3; 4]], 0).unwrap();
    assert_eq!(s.topic_proportions(0), vec![0.0, 0.0, 0.0, 1.0]);
}

#[test]
fn log_likelihood_examples() {
    let empty = corpus(3, &[&[]]);
    assert_eq!(init_chain(&empty, h(2, 0.5, 0.01), 0).unwrap().log_likelihood(), 0.0);

    let one = corpus(1, &[&[0]]);
    assert!(init_chain(&one, h(1, 0.5, 0.01), 0).unwrap().log_likelihood().abs() < 1e-12);

    // V=2: Dirichlet-multinomial probability of a single word is β/(2β) = 1/2
    let two = corpus(2, &[&[0]]);
    let ll = init_chain(&two, h(1, 0.5, 0.01), 0).unwrap().log_likelihood();
    assert!((ll - 0.5f64.ln()).abs() < 1e-10, "{ll}");
}

#[test]
fn log_likelihood_is_label_invariant() {
    let c = corpus(4, &[&[0, 1, 2, 3, 3], &[1, 1, 2]]);
    let z = vec![vec![0, 1, 2, 2, 0], vec![1, 1, 0]];
    let perm = [2u32, 0, 1];
    let zp: Vec<Vec<u32>> = z.iter().map(|d| d.iter().map(|&t| perm[t as usize]).collect()).collect();
    let a = ChainState::from_assignments(&c, h(3, 0.5, 0.1), z, 0).unwrap();
    let b = ChainState::from_assignments(&c, h(3, 0.5, 0.1), zp, 0).unwrap();
    assert!((a.log_likelihood() - b.log_likelihood()).abs() < 1e-12);
}

#[test]
fn fork_is_bit_identical_before_sweeping() {
    let c = corpus(6, &[&[0, 1, 2, 3, 4, 5, 0, 1], &[5, 4, 3, 2]]);
    let mut parent = init_chain(&c, h(3, 0.5, 0.1), 3).unwrap();
    parent.run(&c, 5).unwrap();
    let mut child = parent.fork(99);
    assert!(child.same_assignment(&parent));
    assert_eq!(child.iteration(), parent.iteration());
    child.run(&c, 1).unwrap();
    child.check_consistency(&c).unwrap();
}

#[test]
fn mismatched_corpus_is_rejected() {
    let c = corpus(3, &[&[0, 1]]);
    let other = corpus(3, &[&[0, 1], &[2]]);
    let mut s = init_chain(&c, h(2, 0.5, 0.1), 0).unwrap();
    assert!(s.gibbs_sweep(&other).is_err());
    assert!(init_chain(&corpus(2, &[]), h(2, 0.5, 0.1), 0).is_err());
    assert!(Hyperparams::new(0, 1.0, 1.0).is_err());
    assert!(Hyperparams::new(2, 0.0, 1.0).is_err());
}

#[test]
fn standard_hyperparameters() {
    let hp = Hyperparams::standard(50).unwrap();
    assert_eq!(hp.alpha, 0.1);
    assert_eq!(hp.beta, 0.01);
}

#[test]
fn phi_rows_are_stochastic_and_positive() {
    let c = corpus(7, &[&[0, 1, 2, 3, 4, 5, 6, 6, 6], &[1, 1, 2]]);
    let mut s = init_chain(&c, h(3, 0.5, 0.01), 1).unwrap();
    s.run(&c, 4).unwrap();
    let m = TopicModel::from_chain(&s);
    for k in 0..3 {
        let row = m.topic(k);
        assert!(row.iter().all(|&p| p > 0.0));
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn fold_in_freezes_the_model() {
    let c = corpus(5, &[&[0, 1, 2, 3, 4, 0, 1], &[2, 2, 3]]);
    let mut s = init_chain(&c, h(2, 0.5, 0.1), 1).unwrap();
    s.run(&c, 10).unwrap();
    let m = TopicModel::from_chain(&s);
    let snapshot = m.clone();
    let held = corpus(9, &[&[0, 1, 7], &[8, 8], &[3]]);
    let out = fold_in(&m, &held.documents, 20, 5);
    assert_eq!(m, snapshot);
    assert_eq!(out.excluded, vec![1]);
    assert_eq!(out.oov_dropped, 3);
    assert!(out.proportions[1].is_none());
    for p in out.proportions.iter().flatten() {
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
    assert_eq!(out, fold_in(&m, &held.documents, 20, 5));

    let mut one = init_chain(&c, h(1, 0.5, 0.1), 1).unwrap();
    one.run(&c, 2).unwrap();
    let out = fold_in(&TopicModel::from_chain(&one), &held.documents, 5, 1);
    assert_eq!(out.proportions[0], Some(vec![1.0]));
}

#[test]
fn model_file_round_trip_and_checksum() {
    let c = corpus(4, &[&[0, 1, 2, 3, 3], &[1, 1, 2]]);
    let mut s = init_chain(&c, h(2, 0.5, 0.1), 1).unwrap();
    s.run(&c, 3).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    let file = ModelFile::from_chain(&s, c.vocabulary.digest(), true, None);
    save_model(&path, &file).unwrap();
    let back = load_model(&path).unwrap();
    assert_eq!(back, file);
    assert_eq!(back.topic_model(), TopicModel::from_chain(&s));

    let mut tampered = file.clone();
    tampered.nkv[0][0] += 1;
    save_model(&path, &tampered).unwrap();
    assert!(matches!(load_model(&path), Err(Error::Checksum(_))));
}

fn arb_corpus() -> impl Strategy<Value = (Corpus, usize, u64)> {
    (1usize..6, 1usize..5, any::<u64>()).prop_flat_map(|(v, k, seed)| {
        prop::collection::vec(prop::collection::vec(0..v as u32, 0..12), 1..5).prop_map(move |docs| {
            let refs: Vec<&[u32]> = docs.iter().map(|d| d.as_slice()).collect();
            (corpus(v, &refs), k, seed)
        })
    })
}

proptest! {
    #[test]
    fn sweeps_preserve_counts_and_are_deterministic((c, k, seed) in arb_corpus()) {
        let hp = h(k, 0.3, 0.2);
        let mut a = init_chain(&c, hp, seed).unwrap();
        let mut b = init_chain(&c, hp, seed).unwrap();
        for _ in 0..3 {
            a.gibbs_sweep(&c).unwrap();
            b.gibbs_sweep(&c).unwrap();
            a.check_consistency(&c).unwrap();
        }
        prop_assert!(a.same_assignment(&b));
        for j in 0..c.num_docs() {
            let n = c.documents[j].len() as u32;
            prop_assert_eq!(a.doc_topic_counts(j).iter().sum::<u32>(), n);
            let p = a.topic_proportions(j);
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for i in 0..c.documents[j].len() {
                let q = a.conditional(&c, j, i);
                prop_assert!((q.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }
}
