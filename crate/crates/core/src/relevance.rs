//! Topic relevance: a TF-IDF centroid scored by cosine similarity, and a
//! multinomial Naive Bayes alternative.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use crate::phrases::{tokenize, StopList};

pub const DEFAULT_THRESHOLD: f64 = 0.30;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classifier {
    Vsm,
    NaiveBayes,
}

impl std::str::FromStr for Classifier {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "vsm" => Ok(Classifier::Vsm),
            "nb" | "naive_bayes" | "naivebayes" => Ok(Classifier::NaiveBayes),
            other => Err(format!("unknown classifier {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Relevant,
    Irrelevant,
}

#[derive(Debug, thiserror::Error)]
pub enum RelevanceError {
    #[error("topic corpus is empty")]
    EmptyCorpus,
    #[error("naive bayes needs a trained model")]
    ModelRequired,
    #[error("training data lacks the {0:?} class")]
    MissingClass(Label),
    #[error("profile {path} line {line}: {message}")]
    BadProfile { path: String, line: usize, message: String },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

/// Term counts of `text` after stop-word removal.
pub fn term_counts(text: &str, stops: &StopList) -> BTreeMap<String, u32> {
    let mut m = BTreeMap::new();
    for t in tokenize(text) {
        if !stops.contains(&t.normalized) {
            *m.entry(t.normalized).or_insert(0) += 1;
        }
    }
    m
}

/// One document per non-empty line.
pub fn load_corpus(path: &Path) -> Result<Vec<String>, RelevanceError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| RelevanceError::Io { path: path.display().to_string(), message: e.to_string() })?;
    Ok(corpus_lines(&text))
}

pub fn corpus_lines(text: &str) -> Vec<String> {
    text.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from).collect()
}

/// `ln((1 + N) / (1 + df)) + 1`
pub fn smoothed_idf(n_docs: usize, df: usize) -> f64 {
    ((1.0 + n_docs as f64) / (1.0 + df as f64)).ln() + 1.0
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopicProfile {
    /// term -> (idf, centroid weight); the centroid has unit length.
    pub terms: BTreeMap<String, (f64, f64)>,
    pub threshold: f64,
}

impl TopicProfile {
    /// Document frequencies come from `topic ∪ background`; the centroid
    /// is the normalized mean of the topic documents' TF-IDF vectors.
    pub fn build(topic: &[String], background: &[String], stops: &StopList, threshold: f64) -> Result<Self, RelevanceError> {
        if topic.is_empty() || background.is_empty() {
            return Err(RelevanceError::EmptyCorpus);
        }
        let topic_counts: Vec<_> = topic.iter().map(|d| term_counts(d, stops)).collect();
        let bg_counts: Vec<_> = background.iter().map(|d| term_counts(d, stops)).collect();
        let n = topic_counts.len() + bg_counts.len();
        let mut df: HashMap<&str, usize> = HashMap::new();
        for doc in topic_counts.iter().chain(&bg_counts) {
            for term in doc.keys() {
                *df.entry(term.as_str()).or_insert(0) += 1;
            }
        }
        let idf: BTreeMap<String, f64> = df.iter().map(|(t, &d)| (t.to_string(), smoothed_idf(n, d))).collect();

        let mut sum: BTreeMap<&str, f64> = BTreeMap::new();
        for doc in &topic_counts {
            let v = weigh(doc, &idf);
            for (t, w) in v {
                *sum.entry(t).or_insert(0.0) += w;
            }
        }
        let k = topic_counts.len() as f64;
        let norm = sum.values().map(|w| (w / k).powi(2)).sum::<f64>().sqrt();
        let terms = idf
            .iter()
            .map(|(t, &i)| {
                let c = sum.get(t.as_str()).map_or(0.0, |w| if norm > 0.0 { w / k / norm } else { 0.0 });
                (t.clone(), (i, c))
            })
            .collect();
        Ok(TopicProfile { terms, threshold })
    }

    pub fn idf(&self, term: &str) -> Option<f64> {
        self.terms.get(term).map(|p| p.0)
    }

    /// Cosine between `text`'s TF-IDF vector and the centroid, in `[0, 1]`.
    /// Terms outside the vocabulary are ignored.
    pub fn score(&self, text: &str, stops: &StopList) -> f64 {
        let counts = term_counts(text, stops);
        let mut dot = 0.0;
        let mut norm = 0.0;
        for (t, &c) in &counts {
            if let Some(&(idf, cw)) = self.terms.get(t) {
                let w = c as f64 * idf;
                dot += w * cw;
                norm += w * w;
            }
        }
        if norm == 0.0 {
            return 0.0;
        }
        (dot / norm.sqrt()).clamp(0.0, 1.0)
    }

    pub fn is_relevant(&self, score: f64) -> bool {
        score >= self.threshold
    }

    /// First line `threshold\t<v>`, then `term\tidf\tweight` sorted by term.
    pub fn to_text(&self) -> String {
        let mut out = format!("threshold\t{}\n", self.threshold);
        for (t, (i, c)) in &self.terms {
            let _ = writeln!(out, "{t}\t{i}\t{c}");
        }
        out
    }

    pub fn from_text(text: &str, path: &str) -> Result<Self, RelevanceError> {
        let bad = |line: usize, message: String| RelevanceError::BadProfile { path: path.to_string(), line, message };
        let mut lines = text.lines().enumerate();
        let threshold = match lines.next() {
            Some((_, l)) => match l.split_once('\t') {
                Some(("threshold", v)) => v.parse().map_err(|_| bad(1, format!("bad threshold {v:?}")))?,
                _ => return Err(bad(1, "missing threshold line".into())),
            },
            None => return Err(bad(1, "empty profile".into())),
        };
        let mut terms = BTreeMap::new();
        for (i, l) in lines {
            if l.is_empty() {
                continue;
            }
            let f: Vec<&str> = l.split('\t').collect();
            let [t, idf, w] = f.as_slice() else {
                return Err(bad(i + 1, "expected term, idf and weight".into()));
            };
            let idf: f64 = idf.parse().map_err(|_| bad(i + 1, format!("bad idf {idf:?}")))?;
            let w: f64 = w.parse().map_err(|_| bad(i + 1, format!("bad weight {w:?}")))?;
            terms.insert(t.to_string(), (idf, w));
        }
        Ok(TopicProfile { terms, threshold })
    }

    pub fn save(&self, path: &Path) -> Result<(), RelevanceError> {
        std::fs::write(path, self.to_text())
            .map_err(|e| RelevanceError::Io { path: path.display().to_string(), message: e.to_string() })
    }

    pub fn load(path: &Path) -> Result<Self, RelevanceError> {
        let p = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|e| RelevanceError::Io { path: p.clone(), message: e.to_string() })?;
        Self::from_text(&text, &p)
    }
}

fn weigh<'a>(counts: &'a BTreeMap<String, u32>, idf: &BTreeMap<String, f64>) -> impl Iterator<Item = (&'a str, f64)> + 'a {
    let idf: Vec<f64> = counts.keys().map(|t| idf.get(t).copied().unwrap_or(0.0)).collect();
    counts.iter().zip(idf).map(|((t, &c), i)| (t.as_str(), c as f64 * i))
}

#[derive(Debug, Clone, PartialEq)]
pub struct NaiveBayes {
    pub log_prior: [f64; 2],
    /// term -> log P(term | class) for [relevant, irrelevant].
    pub log_likelihood: BTreeMap<String, [f64; 2]>,
}

impl NaiveBayes {
    pub fn train_labeled(labeled: &[(String, Label)], stops: &StopList) -> Result<Self, RelevanceError> {
        let pick = |l: Label| labeled.iter().filter(|d| d.1 == l).map(|d| d.0.clone()).collect::<Vec<_>>();
        Self::train(&pick(Label::Relevant), &pick(Label::Irrelevant), stops)
    }

    /// Multinomial model with add-one smoothing over the union vocabulary.
    pub fn train(relevant: &[String], irrelevant: &[String], stops: &StopList) -> Result<Self, RelevanceError> {
        if relevant.is_empty() {
            return Err(RelevanceError::MissingClass(Label::Relevant));
        }
        if irrelevant.is_empty() {
            return Err(RelevanceError::MissingClass(Label::Irrelevant));
        }
        let mut counts: [BTreeMap<String, u64>; 2] = [BTreeMap::new(), BTreeMap::new()];
        for (class, docs) in [relevant, irrelevant].into_iter().enumerate() {
            for d in docs {
                for (t, c) in term_counts(d, stops) {
                    *counts[class].entry(t).or_insert(0) += c as u64;
                }
            }
        }
        let vocab: BTreeSet<&String> = counts[0].keys().chain(counts[1].keys()).collect();
        let v = vocab.len() as f64;
        let totals = [counts[0].values().sum::<u64>() as f64, counts[1].values().sum::<u64>() as f64];
        let log_likelihood = vocab
            .iter()
            .map(|t| {
                let ll = [0, 1].map(|c| ((counts[c].get(*t).copied().unwrap_or(0) as f64 + 1.0) / (totals[c] + v)).ln());
                ((*t).clone(), ll)
            })
            .collect();
        let n = (relevant.len() + irrelevant.len()) as f64;
        Ok(NaiveBayes {
            log_prior: [(relevant.len() as f64 / n).ln(), (irrelevant.len() as f64 / n).ln()],
            log_likelihood,
        })
    }

    /// Per-class log posteriors up to a shared constant; unseen terms are ignored.
    pub fn log_posteriors(&self, text: &str, stops: &StopList) -> [f64; 2] {
        let mut lp = self.log_prior;
        for (t, c) in term_counts(text, stops) {
            if let Some(ll) = self.log_likelihood.get(&t) {
                lp[0] += c as f64 * ll[0];
                lp[1] += c as f64 * ll[1];
            }
        }
        lp
    }

    /// Winning label and its log-posterior margin over the loser. Ties go
    /// to irrelevant.
    pub fn classify(&self, text: &str, stops: &StopList) -> (Label, f64) {
        let [r, i] = self.log_posteriors(text, stops);
        if r > i {
            (Label::Relevant, r - i)
        } else {
            (Label::Irrelevant, i - r)
        }
    }

    /// Posterior probability of the relevant class.
    pub fn probability(&self, text: &str, stops: &StopList) -> f64 {
        let [r, i] = self.log_posteriors(text, stops);
        1.0 / (1.0 + (i - r).exp())
    }
}

/// The crawler's relevance gate.
#[derive(Debug, Clone)]
pub struct RelevanceModel {
    pub classifier: Classifier,
    pub profile: TopicProfile,
    pub nb: Option<NaiveBayes>,
    pub stops: StopList,
}

impl RelevanceModel {
    pub fn vsm(profile: TopicProfile) -> Self {
        Self { classifier: Classifier::Vsm, profile, nb: None, stops: StopList::english() }
    }

    /// Returns `(score, relevant)`. For Naive Bayes the score is the
    /// relevant-class posterior.
    pub fn judge(&self, text: &str) -> Result<(f64, bool), RelevanceError> {
        match self.classifier {
            Classifier::Vsm => {
                let s = self.profile.score(text, &self.stops);
                Ok((s, self.profile.is_relevant(s)))
            }
            Classifier::NaiveBayes => {
                let nb = self.nb.as_ref().ok_or(RelevanceError::ModelRequired)?;
                Ok((nb.probability(text, &self.stops), nb.classify(text, &self.stops).0 == Label::Relevant))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn docs(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    fn none() -> StopList {
        StopList::from_words([])
    }

    #[test]
    fn idf_formula() {
        assert!((smoothed_idf(3, 1) - (2.0f64.ln() + 1.0)).abs() < 1e-12);
        assert_eq!(smoothed_idf(3, 3), 1.0);
    }

    #[test]
    fn centroid_has_unit_norm() {
        let p = TopicProfile::build(&docs(&["solar storm", "storm front"]), &docs(&["cake recipe"]), &none(), 0.3).unwrap();
        let n: f64 = p.terms.values().map(|(_, w)| w * w).sum();
        assert!((n - 1.0).abs() < 1e-12);
        assert_eq!(p.terms["cake"].1, 0.0);
    }

    #[test]
    fn identical_document_scores_one() {
        let p = TopicProfile::build(&docs(&["solar storm flare"]), &docs(&["cake"]), &none(), 0.3).unwrap();
        assert!((p.score("solar storm flare", &none()) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_vector_scores_zero() {
        let p = TopicProfile::build(&docs(&["solar storm"]), &docs(&["solar storm"]), &none(), 0.3).unwrap();
        assert_eq!(p.score("", &none()), 0.0);
        assert_eq!(p.score("unknown words only", &none()), 0.0);
    }

    #[test]
    fn threshold_is_inclusive() {
        let p = TopicProfile { terms: BTreeMap::new(), threshold: 0.3 };
        assert!(p.is_relevant(0.3));
        assert!(!p.is_relevant(0.2999));
    }

    #[test]
    fn empty_topic_rejected() {
        assert!(matches!(TopicProfile::build(&[], &docs(&["x"]), &none(), 0.3), Err(RelevanceError::EmptyCorpus)));
        assert!(matches!(TopicProfile::build(&docs(&["x"]), &[], &none(), 0.3), Err(RelevanceError::EmptyCorpus)));
    }

    #[test]
    fn profile_text_round_trip() {
        let p = TopicProfile::build(&docs(&["solar storm", "storm front"]), &docs(&["cake recipe"]), &none(), 0.25).unwrap();
        assert_eq!(TopicProfile::from_text(&p.to_text(), "t").unwrap(), p);
        assert!(TopicProfile::from_text("nope\n", "t").is_err());
    }

    #[test]
    fn nb_requires_model() {
        let mut m = RelevanceModel::vsm(TopicProfile { terms: BTreeMap::new(), threshold: 0.3 });
        m.classifier = Classifier::NaiveBayes;
        assert!(matches!(m.judge("x"), Err(RelevanceError::ModelRequired)));
    }

    #[test]
    fn nb_tie_is_irrelevant() {
        let nb = NaiveBayes::train(&docs(&["a b"]), &docs(&["c d"]), &none()).unwrap();
        assert_eq!(nb.classify("zzz", &none()), (Label::Irrelevant, 0.0));
        assert_eq!(nb.classify("a", &none()).0, Label::Relevant);
        assert!(matches!(
            NaiveBayes::train(&docs(&["a"]), &[], &none()),
            Err(RelevanceError::MissingClass(Label::Irrelevant))
        ));
    }
}
