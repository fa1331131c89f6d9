use std::collections::HashSet;

const BUILTIN_STOPWORDS: &str = include_str!("../../data/stopwords-en-v1.txt");
const BUILTIN_VERSION: &str = "en-v1";

/// Lowercase and split on anything that is not a letter or digit.
///
/// Hyphens split (`state-of-the-art` gives four tokens). An apostrophe is kept
/// only between two alphanumerics, so `don't` stays one token.
pub fn tokenize(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut current = String::new();
    for (i, &c) in chars.iter().enumerate() {
        if c.is_alphanumeric() {
            current.extend(c.to_lowercase());
        } else if is_apostrophe(c)
            && !current.is_empty()
            && chars.get(i + 1).is_some_and(|n| n.is_alphanumeric())
        {
            current.push('\'');
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

fn is_apostrophe(c: char) -> bool {
    c == '\'' || c == '\u{2019}'
}

/// Versioned stopword list. Reports record the version so overlap numbers are reproducible.
#[derive(Debug, Clone)]
pub struct Stopwords {
    version: String,
    words: HashSet<String>,
}

impl Stopwords {
    pub fn builtin() -> Self {
        Self::parse(BUILTIN_VERSION, BUILTIN_STOPWORDS)
    }

    /// One word per line, `#` starts a comment line.
    pub fn parse(version: &str, text: &str) -> Self {
        let words = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_lowercase)
            .collect();
        Stopwords {
            version: version.to_string(),
            words,
        }
    }

    pub fn from_words<I, S>(version: &str, words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Stopwords {
            version: version.to_string(),
            words: words.into_iter().map(|w| w.as_ref().to_lowercase()).collect(),
        }
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn contains(&self, token: &str) -> bool {
        self.words.contains(token)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

pub fn content_words(text: &str, stopwords: &Stopwords) -> Vec<String> {
    tokenize(text)
        .into_iter()
        .filter(|t| t.chars().any(char::is_alphanumeric) && !stopwords.contains(t))
        .collect()
}
