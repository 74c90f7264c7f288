use std::fmt;

use serde::{Deserialize, Serialize};

use crate::corpus::Vocabulary;
use crate::error::{Error, Result};
use crate::sampler::TopicModel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicSummary {
    pub topic: usize,
    pub eta: f64,
    pub words: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicReport {
    /// Most negative first.
    pub negative: Vec<TopicSummary>,
    /// Most positive first.
    pub positive: Vec<TopicSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// The `n_topics` topics with the lowest and highest regression coefficient,
/// each with its `n_words` most probable words. Ties in η̂ go to the lower
/// topic id on either side. When there are fewer than `2 · n_topics` topics,
/// each topic is listed once and the positive side gets the extra one.
pub fn top_topics_report(
    model: &TopicModel,
    eta: &[f64],
    vocabulary: &Vocabulary,
    n_topics: usize,
    n_words: usize,
) -> Result<TopicReport> {
    let k = model.topics();
    if eta.len() != k {
        return Err(Error::invalid(format!("{} coefficients for {k} topics", eta.len())));
    }
    if vocabulary.len() != model.vocab_size() {
        return Err(Error::invalid(format!(
            "vocabulary has {} tokens, model has {}",
            vocabulary.len(),
            model.vocab_size()
        )));
    }
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| eta[a].total_cmp(&eta[b]).then(a.cmp(&b)));

    let n_pos = n_topics.min(k.div_ceil(2));
    let n_neg = n_topics.min(k - n_pos);
    let note = (k < 2 * n_topics)
        .then(|| format!("only {k} topics; showing {n_neg} negative and {n_pos} positive instead of {n_topics} each"));

    let negative = &order[..n_neg];
    let mut descending: Vec<usize> = order.iter().copied().filter(|t| !negative.contains(t)).collect();
    descending.sort_by(|&a, &b| eta[b].total_cmp(&eta[a]).then(a.cmp(&b)));

    let summary = |t: usize| TopicSummary {
        topic: t,
        eta: eta[t],
        words: model
            .top_words(t, n_words)
            .into_iter()
            .map(|(w, p)| (vocabulary.token(w).expect("id below V").to_string(), p))
            .collect(),
    };
    Ok(TopicReport {
        negative: negative.iter().map(|&t| summary(t)).collect(),
        positive: descending.iter().take(n_pos).map(|&t| summary(t)).collect(),
        note,
    })
}

impl fmt::Display for TopicReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut side = |title: &str, topics: &[TopicSummary]| -> fmt::Result {
            writeln!(f, "{title}")?;
            for t in topics {
                let words: Vec<&str> = t.words.iter().map(|(w, _)| w.as_str()).collect();
                writeln!(f, "  topic {:>3}  eta {:>+.4}  {}", t.topic, t.eta, words.join(" "))?;
            }
            Ok(())
        };
        side("negative", &self.negative)?;
        side("positive", &self.positive)?;
        if let Some(n) = &self.note {
            writeln!(f, "note: {n}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::Hyperparams;

    fn model(k: usize, v: usize) -> TopicModel {
        // topic t puts most of its mass on word t
        let mut nkv = vec![0u32; k * v];
        for t in 0..k {
            nkv[(t % v) * k + t] = 100;
        }
        TopicModel::from_counts(Hyperparams::new(k, 0.1, 0.01).unwrap(), v, &nkv, &vec![100; k])
    }

    #[test]
    fn extremes_and_word_order() {
        let r = top_topics_report(&model(3, 4), &[-0.1, 0.0, 0.2], &Vocabulary::synthetic(4), 1, 10).unwrap();
        assert_eq!(r.negative[0].topic, 0);
        assert_eq!(r.positive[0].topic, 2);
        assert_eq!(r.positive[0].words.len(), 4);
        assert_eq!(r.positive[0].words[0].0, "w0002");
        // remaining words tie; listed by id
        let rest: Vec<&str> = r.positive[0].words[1..].iter().map(|(w, _)| w.as_str()).collect();
        assert_eq!(rest, ["w0000", "w0001", "w0003"]);
        assert!(r.note.is_none());
    }

    #[test]
    fn truncates_with_note() {
        let r = top_topics_report(&model(3, 5), &[0.5, -1.0, 0.5], &Vocabulary::synthetic(5), 3, 2).unwrap();
        assert_eq!(r.negative.iter().map(|t| t.topic).collect::<Vec<_>>(), [1]);
        assert_eq!(r.positive.iter().map(|t| t.topic).collect::<Vec<_>>(), [0, 2]);
        assert!(r.note.is_some());
        let r = top_topics_report(&model(1, 5), &[0.3], &Vocabulary::synthetic(5), 1, 2).unwrap();
        assert!(r.negative.is_empty());
        assert_eq!(r.positive[0].topic, 0);
    }

    #[test]
    fn rejects_shape_mismatch() {
        assert!(top_topics_report(&model(3, 4), &[0.0; 2], &Vocabulary::synthetic(4), 1, 1).is_err());
        assert!(top_topics_report(&model(3, 4), &[0.0; 3], &Vocabulary::synthetic(5), 1, 1).is_err());
    }
}
