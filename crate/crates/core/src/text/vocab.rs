use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::path::Path;

use super::TextError;

pub const UNK: &str = "[UNK]";
pub const MASK: &str = "[MASK]";
pub const UNK_ID: u32 = 0;
pub const MASK_ID: u32 = 1;

/// Lowercased alphanumeric runs.
pub fn tokens(sentence: &str) -> Vec<String> {
    sentence
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Token to dense index; `[UNK]` is 0 and `[MASK]` is 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
}

impl Default for Vocabulary {
    fn default() -> Self {
        Self::from_tokens(Vec::<String>::new())
    }
}

impl Vocabulary {
    /// Special tokens are prepended; duplicates and specials in `tokens` are skipped.
    pub fn from_tokens<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut v = Self {
            tokens: Vec::new(),
            index: HashMap::new(),
        };
        for t in [UNK.to_owned(), MASK.to_owned()]
            .into_iter()
            .chain(tokens.into_iter().map(Into::into))
        {
            if !v.index.contains_key(&t) {
                v.index.insert(t.clone(), v.tokens.len() as u32);
                v.tokens.push(t);
            }
        }
        v
    }

    /// Tokens seen at least `min_count` times, sorted.
    pub fn build<'a, I>(sentences: I, min_count: usize) -> Self
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for s in sentences {
            for t in tokens(s) {
                *counts.entry(t).or_default() += 1;
            }
        }
        Self::from_tokens(
            counts
                .into_iter()
                .filter(|(_, c)| *c >= min_count)
                .map(|(t, _)| t),
        )
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn id(&self, token: &str) -> u32 {
        self.index.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    /// Token ids of `sentence`; tokens of `mask_surface` become `[MASK]`.
    pub fn tokenize(&self, sentence: &str, mask_surface: Option<&str>) -> Vec<u32> {
        let masked: HashSet<String> = mask_surface.map(tokens).unwrap_or_default().into_iter().collect();
        tokens(sentence)
            .into_iter()
            .map(|t| {
                if masked.contains(&t) {
                    MASK_ID
                } else {
                    self.id(&t)
                }
            })
            .collect()
    }

    /// One token per line; the line number is the index.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), TextError> {
        let mut text = self.tokens.join("\n");
        text.push('\n');
        fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TextError> {
        let text = fs::read_to_string(path)?;
        let tokens: Vec<&str> = text.lines().collect();
        if tokens.first() != Some(&UNK) || tokens.get(1) != Some(&MASK) {
            return Err(TextError::Format(
                "vocabulary must start with [UNK] and [MASK]".into(),
            ));
        }
        let v = Self::from_tokens(tokens.iter().copied());
        if v.len() != tokens.len() {
            return Err(TextError::Format("duplicate token in vocabulary".into()));
        }
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab() -> Vocabulary {
        Vocabulary::from_tokens(["a", "film", "fargo", "is"])
    }

    #[test]
    fn masking_replaces_the_surface() {
        let v = vocab();
        let ids = v.tokenize("Fargo is a film", Some("Fargo"));
        assert_eq!(ids, vec![MASK_ID, v.id("is"), v.id("a"), v.id("film")]);
    }

    #[test]
    fn unknown_words_map_to_unk() {
        assert_eq!(vocab().tokenize("zebra", None), vec![UNK_ID]);
    }

    #[test]
    fn case_is_folded() {
        let v = vocab();
        let ids = v.tokenize("A a A", None);
        assert_eq!(ids, vec![v.id("a"); 3]);
        assert!(v.tokenize("", None).is_empty());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vocab.txt");
        let v = Vocabulary::build(["The cat, the hat."], 1);
        v.save(&path).unwrap();
        assert_eq!(Vocabulary::load(&path).unwrap(), v);
        assert_eq!(v.token(0), Some(UNK));
    }
}
