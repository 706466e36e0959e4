//! Key-phrase extraction: tokenize, drop stop words (leaving gaps), count
//! 2- and 3-word n-grams that do not cross a gap, and score them by
//! repetition boosted by the page's link degrees.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use indexmap::IndexMap;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub surface: String,
    pub normalized: String,
    /// A sentence boundary follows this token.
    pub ends_sentence: bool,
}

/// Splits on anything that is not alphanumeric; lowercases.
///
/// A boundary follows a token when the separator up to the next token holds
/// `!`, `?`, `;`, a line break, or a `.` not immediately followed by an
/// alphanumeric character (so `3.5` and `e.g` stay inside a sentence).
pub fn tokenize(text: &str) -> Vec<Token> {
    let mut tokens: Vec<Token> = Vec::new();
    let mut start: Option<usize> = None;
    let mut pending_boundary = false;
    let mut iter = text.char_indices().peekable();
    while let Some((i, c)) = iter.next() {
        if c.is_alphanumeric() {
            if start.is_none() {
                if pending_boundary {
                    if let Some(last) = tokens.last_mut() {
                        last.ends_sentence = true;
                    }
                    pending_boundary = false;
                }
                start = Some(i);
            }
            continue;
        }
        if let Some(s) = start.take() {
            push_token(&mut tokens, &text[s..i]);
        }
        match c {
            '!' | '?' | ';' | '\n' | '\r' => pending_boundary = true,
            '.' => {
                let next_alnum = iter.peek().is_some_and(|&(_, n)| n.is_alphanumeric());
                if !next_alnum {
                    pending_boundary = true;
                }
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        push_token(&mut tokens, &text[s..]);
    }
    if pending_boundary {
        if let Some(last) = tokens.last_mut() {
            last.ends_sentence = true;
        }
    }
    tokens
}

fn push_token(tokens: &mut Vec<Token>, surface: &str) {
    tokens.push(Token {
        surface: surface.to_string(),
        normalized: surface.to_lowercase(),
        ends_sentence: false,
    });
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StopList {
    words: HashSet<String>,
    pub source_path: String,
}

static ENGLISH: &str = include_str!("../data/stopwords_en.txt");

impl StopList {
    /// One word per line, `#` comments, blank lines ignored.
    pub fn parse(text: &str, source_path: &str) -> Self {
        let words = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim().to_lowercase())
            .filter(|w| !w.is_empty())
            .collect();
        Self { words, source_path: source_path.to_string() }
    }

    pub fn load(path: &Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(Self::parse(&text, &path.display().to_string()))
    }

    /// The bundled English list.
    pub fn english() -> Self {
        Self::parse(ENGLISH, "<builtin:english>")
    }

    pub fn english_source() -> &'static str {
        ENGLISH
    }

    pub fn from_words<'a>(words: impl IntoIterator<Item = &'a str>) -> Self {
        Self {
            words: words.into_iter().map(str::to_lowercase).collect(),
            source_path: String::new(),
        }
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Marked {
    Gap,
    Token(Token),
}

/// Removes stop words. Runs of removed words and sentence boundaries between
/// kept tokens collapse into a single [`Marked::Gap`].
pub fn remove_stopwords(tokens: &[Token], stops: &StopList) -> Vec<Marked> {
    let mut out = Vec::with_capacity(tokens.len());
    let mut gap = false;
    for t in tokens {
        if stops.contains(&t.normalized) {
            gap = true;
        } else {
            if gap && out.last() != Some(&Marked::Gap) {
                out.push(Marked::Gap);
            }
            gap = false;
            out.push(Marked::Token(t.clone()));
        }
        if t.ends_sentence {
            gap = true;
        }
    }
    // trailing stop words leave a gap; a trailing sentence end alone does not
    if gap && tokens.last().is_some_and(|t| stops.contains(&t.normalized)) && out.last() != Some(&Marked::Gap) {
        out.push(Marked::Gap);
    }
    out
}

/// A normalized token sequence of length 2 or 3.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Phrase(pub Vec<String>);

impl Phrase {
    pub fn new<S: Into<String>>(words: impl IntoIterator<Item = S>) -> Self {
        Phrase(words.into_iter().map(Into::into).collect())
    }

    pub fn words(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for Phrase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.join(" "))
    }
}

/// Candidate phrases with multiplicities, in first-occurrence order.
pub type Candidates = IndexMap<Phrase, u32>;

pub const MIN_PHRASE_LEN: usize = 2;
pub const MAX_PHRASE_LEN: usize = 3;

pub fn extract_candidates(marked: &[Marked]) -> Candidates {
    let mut out = Candidates::new();
    for run in marked.split(|m| *m == Marked::Gap) {
        let words: Vec<&str> = run
            .iter()
            .filter_map(|m| match m {
                Marked::Token(t) => Some(t.normalized.as_str()),
                Marked::Gap => None,
            })
            .collect();
        for i in 0..words.len() {
            for n in MIN_PHRASE_LEN..=MAX_PHRASE_LEN {
                if i + n <= words.len() {
                    *out.entry(Phrase::new(words[i..i + n].iter().copied())).or_insert(0) += 1;
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct KeyPhrase {
    pub phrase: Phrase,
    pub count: u32,
    pub score: f64,
}

/// Weights of the link-degree boost.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreParams {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for ScoreParams {
    fn default() -> Self {
        Self { alpha: 0.5, beta: 0.1 }
    }
}

/// `count · (1 + α·ln(1+in) + β·ln(1+out))`, highest first; ties keep
/// first-occurrence order.
pub fn score_phrases(candidates: &Candidates, in_degree: usize, out_degree: usize, params: ScoreParams) -> Vec<KeyPhrase> {
    let boost = 1.0 + params.alpha * (in_degree as f64).ln_1p() + params.beta * (out_degree as f64).ln_1p();
    let mut scored: Vec<KeyPhrase> = candidates
        .iter()
        .map(|(p, &count)| KeyPhrase { phrase: p.clone(), count, score: count as f64 * boost })
        .collect();
    // stable sort preserves first-occurrence order among equal scores
    scored.sort_by(|a, b| b.score.total_cmp(&a.score));
    scored
}

pub fn top_k(phrases: &[KeyPhrase], k: usize) -> Vec<KeyPhrase> {
    assert!(k >= 1, "k must be positive");
    phrases.iter().take(k).cloned().collect()
}

/// Settings for running the whole extraction over one document.
#[derive(Debug, Clone)]
pub struct PhraseExtractor {
    pub stops: StopList,
    pub params: ScoreParams,
    pub top_k: usize,
}

impl PhraseExtractor {
    pub fn new(stops: StopList) -> Self {
        Self { stops, params: ScoreParams::default(), top_k: 20 }
    }

    pub fn candidates(&self, text: &str) -> Candidates {
        extract_candidates(&remove_stopwords(&tokenize(text), &self.stops))
    }

    /// Top-k scored phrases of `text`.
    pub fn extract(&self, text: &str, in_degree: usize, out_degree: usize) -> Vec<KeyPhrase> {
        let scored = score_phrases(&self.candidates(text), in_degree, out_degree, self.params);
        top_k(&scored, self.top_k)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn norm(tokens: &[Token]) -> Vec<&str> {
        tokens.iter().map(|t| t.normalized.as_str()).collect()
    }

    fn marked_words(m: &[Marked]) -> Vec<String> {
        m.iter()
            .map(|m| match m {
                Marked::Gap => "|".to_string(),
                Marked::Token(t) => t.normalized.clone(),
            })
            .collect()
    }

    fn toks(words: &[&str]) -> Vec<Token> {
        tokenize(&words.join(" "))
    }

    #[test]
    fn tokenize_examples() {
        assert_eq!(norm(&tokenize("Quick, brown fox!")), ["quick", "brown", "fox"]);
        assert!(tokenize("").is_empty());
        assert_eq!(
            norm(&tokenize("state-of-the-art CPUs (x2)")),
            ["state", "of", "the", "art", "cpus", "x2"]
        );
    }

    #[test]
    fn tokenize_sentence_flags() {
        let t = tokenize("The fox. Dogs bark! 3.5 e.g.x\nnext");
        let ends: Vec<(&str, bool)> = t.iter().map(|t| (t.normalized.as_str(), t.ends_sentence)).collect();
        assert_eq!(
            ends,
            [
                ("the", false),
                ("fox", true),
                ("dogs", false),
                ("bark", true),
                ("3", false),
                ("5", false),
                ("e", false),
                ("g", false),
                ("x", true),
                ("next", false)
            ]
        );
    }

    #[test]
    fn tokenize_unicode() {
        assert_eq!(norm(&tokenize("Ünïcode ÉTÉ—naïve")), ["ünïcode", "été", "naïve"]);
    }

    #[test]
    fn stopword_gaps() {
        let stops = StopList::from_words(["the"]);
        let m = remove_stopwords(&toks(&["the", "quick", "brown", "fox"]), &stops);
        assert_eq!(marked_words(&m), ["|", "quick", "brown", "fox"]);

        let all = remove_stopwords(&toks(&["the", "the", "the"]), &stops);
        assert_eq!(marked_words(&all), ["|"]);

        let m = remove_stopwords(&tokenize("quick brown fox. Dogs run"), &StopList::default());
        assert_eq!(marked_words(&m), ["quick", "brown", "fox", "|", "dogs", "run"]);

        let m = remove_stopwords(&tokenize("fox. The dogs"), &stops);
        assert_eq!(marked_words(&m), ["fox", "|", "dogs"]);
    }

    #[test]
    fn candidate_enumeration() {
        let c = extract_candidates(&remove_stopwords(&toks(&["quick", "brown", "fox"]), &StopList::default()));
        let got: Vec<(String, u32)> = c.iter().map(|(p, n)| (p.to_string(), *n)).collect();
        assert_eq!(
            got,
            [("quick brown".to_string(), 1), ("quick brown fox".to_string(), 1), ("brown fox".to_string(), 1)]
        );
        assert!(extract_candidates(&remove_stopwords(&toks(&["a"]), &StopList::default())).is_empty());
    }

    #[test]
    fn candidates_do_not_cross_gaps() {
        let stops = StopList::from_words(["of"]);
        let c = extract_candidates(&remove_stopwords(&tokenize("bank of england rates"), &stops));
        assert_eq!(c.len(), 1);
        assert_eq!(c[&Phrase::new(["england", "rates"])], 1);
    }

    #[test]
    fn zero_degree_identity() {
        let mut c = Candidates::new();
        c.insert(Phrase::new(["a", "b"]), 4);
        let s = score_phrases(&c, 0, 0, ScoreParams::default());
        assert_eq!(s[0].score, 4.0);
    }

    #[test]
    fn higher_count_ranks_first() {
        let mut c = Candidates::new();
        c.insert(Phrase::new(["a", "b"]), 3);
        c.insert(Phrase::new(["c", "d"]), 5);
        let s = score_phrases(&c, 2, 2, ScoreParams::default());
        assert_eq!(s[0].phrase, Phrase::new(["c", "d"]));
    }

    #[test]
    fn formula_oracle_and_tie_order() {
        let mut c = Candidates::new();
        c.insert(Phrase::new(["a", "b"]), 3);
        c.insert(Phrase::new(["c", "d"]), 3);
        c.insert(Phrase::new(["e", "f"]), 7);
        let s = score_phrases(&c, 10, 2, ScoreParams { alpha: 0.5, beta: 0.1 });
        // independent evaluation: 1 + 0.5 ln 11 + 0.1 ln 3
        let boost = 1.0 + 0.5 * 11f64.ln() + 0.1 * 3f64.ln();
        assert!((boost - 2.308809).abs() < 1e-6);
        let order: Vec<String> = s.iter().map(|k| k.phrase.to_string()).collect();
        assert_eq!(order, ["e f", "a b", "c d"]);
        assert!((s[0].score - 7.0 * boost).abs() < 1e-12);
        assert!((s[1].score - 3.0 * boost).abs() < 1e-12);
        assert!((s[2].score - 3.0 * boost).abs() < 1e-12);
    }

    #[test]
    fn top_k_bounds() {
        let mut c = Candidates::new();
        for i in 0..10u32 {
            c.insert(Phrase::new([format!("w{i}"), "x".into()]), i + 1);
        }
        let s = score_phrases(&c, 0, 0, ScoreParams::default());
        let t = top_k(&s, 3);
        assert_eq!(t.iter().map(|k| k.count).collect::<Vec<_>>(), [10, 9, 8]);
        assert_eq!(top_k(&s[..2], 5).len(), 2);
    }

    #[test]
    #[should_panic]
    fn top_k_rejects_zero() {
        top_k(&[], 0);
    }

    #[test]
    fn stoplist_file_format() {
        let s = StopList::parse("# header\nThe\n\nof # inline\n", "x");
        assert!(s.contains("the") && s.contains("of"));
        assert_eq!(s.len(), 2);
        let en = StopList::english();
        assert!(en.len() >= 300, "{}", en.len());
        assert!(en.contains("the") && !en.contains("climate"));
    }
}
