use std::collections::HashSet;

use branchlda::experiment::top_topics_report;
use branchlda::sampler::{init_chain, Hyperparams, TopicModel};
use branchlda::slda::m_step;
use branchlda::synth::{generate, SyntheticSpec};

#[test]
fn fitted_report_lists_planted_words() {
    let spec = SyntheticSpec { topics: 6, vocab: 120, docs: 800, doc_len: 60, alpha: 0.3, ..SyntheticSpec::desk(6, 2) };
    let syn = generate(&spec).unwrap();
    let c = &syn.corpus;
    let mut state = init_chain(c, Hyperparams::new(6, 0.3, 0.01).unwrap(), 4).unwrap();
    state.run(c, 300).unwrap();
    let fit = m_step(&state.all_proportions(), &c.labels()).unwrap();
    let model = TopicModel::from_chain(&state);
    let report = top_topics_report(&model, &fit.eta_hat, &c.vocabulary, 2, 5).unwrap();
    assert!(report.note.is_none());

    let planted_top = |t: usize| -> Vec<String> {
        let mut w: Vec<usize> = (0..spec.vocab).collect();
        w.sort_by(|&a, &b| syn.truth.phi[t][b].total_cmp(&syn.truth.phi[t][a]));
        w[..5].iter().map(|&v| c.vocabulary.token(v as u32).unwrap().to_string()).collect()
    };
    for s in report.negative.iter().chain(&report.positive) {
        let words: Vec<String> = s.words.iter().map(|(w, _)| w.clone()).collect();
        assert_eq!(words.len(), 5);
        // the fitted topic is matched to the planted topic sharing its first word
        let planted = (0..6).map(planted_top).find(|p| p[0] == words[0]).expect("first word is a planted leader");
        let overlap = words.iter().collect::<HashSet<_>>().intersection(&planted.iter().collect()).count();
        assert!(overlap >= 4, "topic {}: {words:?} vs {planted:?}", s.topic);
    }
}

#[test]
fn constructed_sparse_topics() {
    // topic k puts counts 50, 40, 30, 20, 10 on words 5k..5k+5 and nothing elsewhere
    let (k, v) = (4, 20);
    let mut nkv = vec![0u32; v * k];
    let mut nk = vec![0u32; k];
    for t in 0..k {
        for r in 0..5 {
            nkv[(5 * t + r) * k + t] = 50 - 10 * r as u32;
            nk[t] += 50 - 10 * r as u32;
        }
    }
    let model = TopicModel::from_counts(Hyperparams::new(k, 0.1, 0.01).unwrap(), v, &nkv, &nk);
    let vocab = branchlda::corpus::Vocabulary::synthetic(v);
    let report = top_topics_report(&model, &[0.3, -0.2, 0.9, -0.7], &vocab, 1, 3).unwrap();
    assert_eq!(report.negative[0].topic, 3);
    assert_eq!(report.positive[0].topic, 2);
    let ids = |s: &branchlda::experiment::TopicSummary| -> Vec<u32> {
        s.words.iter().map(|(w, _)| vocab.id(w).unwrap()).collect()
    };
    assert_eq!(ids(&report.negative[0]), [15, 16, 17]);
    assert_eq!(ids(&report.positive[0]), [10, 11, 12]);
}
