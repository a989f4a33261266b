//! Loading of pooled feature vectors, story annotations and the word vocabulary.
//!
//! All three inputs are line-delimited JSON. Feature records look like
//! `{"id": "img1", "activation": [0.0, 1.5, ...]}`; annotation records like
//! `{"story_id": "s1", "images": [{"image_id": "img1", "tokens": ["a", "dog"]}, ...]}`
//! with exactly five images per story. An image entry may carry a raw
//! `"sentence"` instead of `"tokens"`; it is then split with [`tokenize`].

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of images in one photo stream.
pub const STREAM_LEN: usize = 5;

/// Default token used for out-of-vocabulary words.
pub const UNK_TOKEN: &str = "<UNK>";

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    feature_dim: usize,
    ids: Vec<String>,
    vectors: Vec<Vec<f32>>,
    index: HashMap<String, usize>,
}

impl FeatureTable {
    pub fn new(feature_dim: usize) -> Self {
        FeatureTable {
            feature_dim,
            ids: Vec::new(),
            vectors: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub fn insert(&mut self, id: String, activation: Vec<f32>) -> Result<()> {
        if activation.len() != self.feature_dim {
            return Err(Error::DimensionMismatch {
                id,
                expected: self.feature_dim,
                found: activation.len(),
            });
        }
        if self.index.contains_key(&id) {
            return Err(Error::DuplicateId(id));
        }
        self.index.insert(id.clone(), self.ids.len());
        self.ids.push(id);
        self.vectors.push(activation);
        Ok(())
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&[f32]> {
        self.index.get(id).map(|&i| self.vectors[i].as_slice())
    }

    /// Entries in file order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f32])> {
        self.ids
            .iter()
            .zip(&self.vectors)
            .map(|(id, v)| (id.as_str(), v.as_slice()))
    }
}

#[derive(Serialize, Deserialize)]
struct FeatureRecord {
    id: String,
    activation: Vec<f32>,
}

pub fn load_features(path: impl AsRef<Path>, feature_dim: usize) -> Result<FeatureTable> {
    let path = path.as_ref();
    if feature_dim == 0 {
        return Err(Error::Config("feature dimension must be positive".into()));
    }
    let mut table = FeatureTable::new(feature_dim);
    for_each_json_line(path, |line_no, record: FeatureRecord| {
        table.insert(record.id, record.activation).map_err(|e| match e {
            Error::DimensionMismatch { .. } | Error::DuplicateId(_) => Error::Parse {
                path: path.to_path_buf(),
                line: line_no,
                msg: e.to_string(),
            },
            other => other,
        })
    })?;
    Ok(table)
}

pub fn save_features(table: &FeatureTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    for (id, activation) in table.iter() {
        let record = FeatureRecord {
            id: id.to_owned(),
            activation: activation.to_vec(),
        };
        write_json_line(&mut out, &record).map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// One image of a story together with its description tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StoryItem {
    pub image_id: String,
    pub tokens: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Story {
    pub story_id: String,
    pub items: Vec<StoryItem>,
}

impl Story {
    pub fn image_ids(&self) -> impl Iterator<Item = &str> {
        self.items.iter().map(|item| item.image_id.as_str())
    }

    pub fn sentences(&self) -> impl Iterator<Item = &[String]> {
        self.items.iter().map(|item| item.tokens.as_slice())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AnnotationTable {
    pub stories: Vec<Story>,
}

impl AnnotationTable {
    pub fn push(&mut self, story: Story) -> Result<()> {
        if story.items.len() != STREAM_LEN {
            return Err(Error::Structure {
                story_id: story.story_id,
                msg: format!(
                    "expected {STREAM_LEN} images, found {}",
                    story.items.len()
                ),
            });
        }
        if let Some(item) = story.items.iter().find(|item| item.tokens.is_empty()) {
            return Err(Error::Structure {
                story_id: story.story_id.clone(),
                msg: format!("sentence for image {:?} has no tokens", item.image_id),
            });
        }
        self.stories.push(story);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.stories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stories.is_empty()
    }
}

#[derive(Deserialize)]
struct AnnotationRecord {
    story_id: String,
    images: Vec<ImageRecord>,
}

#[derive(Deserialize)]
struct ImageRecord {
    image_id: String,
    #[serde(default)]
    tokens: Option<Vec<String>>,
    #[serde(default)]
    sentence: Option<String>,
}

/// Writes one `{"story_id", "images":[{"image_id","tokens"}]}` line per story.
pub fn save_annotations(table: &AnnotationTable, path: impl AsRef<Path>) -> Result<()> {
    #[derive(Serialize)]
    struct Image<'a> {
        image_id: &'a str,
        tokens: &'a [String],
    }
    #[derive(Serialize)]
    struct Record<'a> {
        story_id: &'a str,
        images: Vec<Image<'a>>,
    }
    let path = path.as_ref();
    let mut out = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    for story in &table.stories {
        let record = Record {
            story_id: &story.story_id,
            images: story
                .items
                .iter()
                .map(|item| Image {
                    image_id: &item.image_id,
                    tokens: &item.tokens,
                })
                .collect(),
        };
        write_json_line(&mut out, &record).map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn load_annotations(path: impl AsRef<Path>) -> Result<AnnotationTable> {
    let path = path.as_ref();
    let mut table = AnnotationTable::default();
    for_each_json_line(path, |line_no, record: AnnotationRecord| {
        let story_id = record.story_id;
        let mut items = Vec::with_capacity(record.images.len());
        for image in record.images {
            let tokens = match (image.tokens, image.sentence) {
                (Some(tokens), _) => tokens,
                (None, Some(sentence)) => tokenize(&sentence),
                (None, None) => {
                    return Err(Error::Parse {
                        path: path.to_path_buf(),
                        line: line_no,
                        msg: format!(
                            "story {story_id:?}: image {:?} has neither \"tokens\" nor \"sentence\"",
                            image.image_id
                        ),
                    })
                }
            };
            items.push(StoryItem {
                image_id: image.image_id,
                tokens,
            });
        }
        table.push(Story { story_id, items })
    })?;
    Ok(table)
}

/// Splits raw text on whitespace, strips punctuation and lowercases.
pub fn tokenize(sentence: &str) -> Vec<String> {
    sentence
        .split_whitespace()
        .map(|raw| {
            raw.chars()
                .filter(|c| c.is_alphanumeric())
                .flat_map(char::to_lowercase)
                .collect::<String>()
        })
        .filter(|token| !token.is_empty())
        .collect()
}

/// Word index. Regular words occupy `0..len_words()`; the UNK word sits right
/// after them at index `len_words()`, so the full size is `len_words() + 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    unk: String,
    words: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocabulary {
    pub fn from_words(unk: impl Into<String>, words: Vec<String>) -> Result<Self> {
        let unk = unk.into();
        let mut index = HashMap::with_capacity(words.len());
        for (i, word) in words.iter().enumerate() {
            if *word == unk {
                return Err(Error::Invariant(format!(
                    "vocabulary lists the UNK word {unk:?} as a regular word"
                )));
            }
            let idx = u32::try_from(i).map_err(|_| Error::Config("vocabulary too large".into()))?;
            if index.insert(word.clone(), idx).is_some() {
                return Err(Error::DuplicateId(word.clone()));
            }
        }
        Ok(Vocabulary { unk, words, index })
    }

    /// Size including the UNK word.
    pub fn size(&self) -> usize {
        self.words.len() + 1
    }

    pub fn len_words(&self) -> usize {
        self.words.len()
    }

    pub fn unk_index(&self) -> u32 {
        self.words.len() as u32
    }

    pub fn unk(&self) -> &str {
        &self.unk
    }

    /// Index of a regular word, `None` for anything that maps to UNK.
    pub fn get(&self, word: &str) -> Option<u32> {
        self.index.get(word).copied()
    }

    pub fn lookup(&self, word: &str) -> u32 {
        self.get(word).unwrap_or_else(|| self.unk_index())
    }

    pub fn word(&self, index: u32) -> Option<&str> {
        if index == self.unk_index() {
            Some(&self.unk)
        } else {
            self.words.get(index as usize).map(String::as_str)
        }
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }
}

/// Indexes every token seen at least `min_count` times, most frequent first,
/// equal counts in lexicographic order.
pub fn build_vocabulary(annotations: &AnnotationTable, min_count: usize) -> Result<Vocabulary> {
    if min_count == 0 {
        return Err(Error::Config("min_count must be at least 1".into()));
    }
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for story in &annotations.stories {
        for sentence in story.sentences() {
            for token in sentence {
                *counts.entry(token.as_str()).or_default() += 1;
            }
        }
    }
    let mut kept: Vec<(&str, usize)> = counts
        .into_iter()
        .filter(|&(word, n)| n >= min_count && word != UNK_TOKEN)
        .collect();
    // BTreeMap iteration is already lexicographic; stable sort keeps that for ties.
    kept.sort_by_key(|&(_, n)| std::cmp::Reverse(n));
    Vocabulary::from_words(
        UNK_TOKEN,
        kept.into_iter().map(|(w, _)| w.to_owned()).collect(),
    )
}

#[derive(Serialize, Deserialize)]
struct VocabularyFile {
    unk: String,
    words: Vec<String>,
}

pub fn load_vocabulary(path: impl AsRef<Path>) -> Result<Vocabulary> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let parsed: VocabularyFile =
        serde_json::from_reader(BufReader::new(file)).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            msg: e.to_string(),
        })?;
    Vocabulary::from_words(parsed.unk, parsed.words)
}

pub fn save_vocabulary(vocab: &Vocabulary, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let body = VocabularyFile {
        unk: vocab.unk.clone(),
        words: vocab.words.clone(),
    };
    let mut out = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    write_json_line(&mut out, &body).map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}

pub(crate) fn write_json_line<W: Write, T: Serialize>(out: &mut W, value: &T) -> std::io::Result<()> {
    serde_json::to_writer(&mut *out, value)?;
    out.write_all(b"\n")
}

/// Parses every non-blank line of `path` as JSON and hands it to `f` with a
/// 1-based line number.
pub(crate) fn for_each_json_line<T, F>(path: &Path, mut f: F) -> Result<()>
where
    T: for<'de> Deserialize<'de>,
    F: FnMut(usize, T) -> Result<()>,
{
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: T = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: line_no,
            msg: e.to_string(),
        })?;
        f(line_no, record)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    fn story(id: &str, words: &[&[&str]]) -> Story {
        Story {
            story_id: id.into(),
            items: words
                .iter()
                .enumerate()
                .map(|(i, w)| StoryItem {
                    image_id: format!("{id}-img{i}"),
                    tokens: w.iter().map(|s| s.to_string()).collect(),
                })
                .collect(),
        }
    }

    #[test]
    fn loads_single_zero_record() {
        let zeros = vec!["0"; 2048].join(",");
        let f = write_tmp(&format!("{{\"id\": \"img1\", \"activation\": [{zeros}]}}\n"));
        let table = load_features(f.path(), 2048).unwrap();
        assert_eq!(table.len(), 1);
        assert_eq!(table.get("img1").unwrap().len(), 2048);
    }

    #[test]
    fn short_vector_is_dimension_mismatch() {
        let values = vec!["1"; 2047].join(",");
        let f = write_tmp(&format!("{{\"id\": \"img1\", \"activation\": [{values}]}}\n"));
        let err = load_features(f.path(), 2048).unwrap_err().to_string();
        assert!(err.contains("img1") && err.contains("2047"), "{err}");
    }

    #[test]
    fn duplicate_id_rejected() {
        let f = write_tmp(
            "{\"id\": \"img1\", \"activation\": [1, 2]}\n{\"id\": \"img1\", \"activation\": [3, 4]}\n",
        );
        let err = load_features(f.path(), 2).unwrap_err().to_string();
        assert!(err.contains("duplicate") && err.contains(":2:"), "{err}");
    }

    #[test]
    fn malformed_feature_line_names_line() {
        let f = write_tmp("{\"id\": \"a\", \"activation\": [1, 2]}\n{\"id\": \"b\", \"activation\": [1,\n");
        match load_features(f.path(), 2) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn annotations_one_story() {
        let images: Vec<String> = (0..5)
            .map(|i| format!("{{\"image_id\": \"i{i}\", \"tokens\": [\"w{i}\"]}}"))
            .collect();
        let f = write_tmp(&format!(
            "{{\"story_id\": \"s1\", \"images\": [{}]}}\n",
            images.join(",")
        ));
        let table = load_annotations(f.path()).unwrap();
        assert_eq!(table.len(), 1);
        assert_eq!(table.stories[0].items[3].tokens, vec!["w3"]);
    }

    #[test]
    fn annotations_wrong_arity() {
        let images: Vec<String> = (0..4)
            .map(|i| format!("{{\"image_id\": \"i{i}\", \"tokens\": [\"w\"]}}"))
            .collect();
        let f = write_tmp(&format!(
            "{{\"story_id\": \"short\", \"images\": [{}]}}\n",
            images.join(",")
        ));
        match load_annotations(f.path()) {
            Err(Error::Structure { story_id, .. }) => assert_eq!(story_id, "short"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn annotations_empty_file() {
        let f = write_tmp("");
        assert!(load_annotations(f.path()).unwrap().is_empty());
    }

    #[test]
    fn raw_sentences_are_tokenized() {
        let images: Vec<String> = (0..5)
            .map(|i| format!("{{\"image_id\": \"i{i}\", \"sentence\": \"The Dog, ran!\"}}"))
            .collect();
        let f = write_tmp(&format!("{{\"story_id\": \"s\", \"images\": [{}]}}", images.join(",")));
        let table = load_annotations(f.path()).unwrap();
        assert_eq!(table.stories[0].items[0].tokens, vec!["the", "dog", "ran"]);
    }

    #[test]
    fn vocabulary_threshold_and_unk() {
        let mut ann = AnnotationTable::default();
        ann.push(story(
            "s",
            &[&["dog", "dog", "runs"], &["dog", "runs"], &["dog"], &["dog"], &["x"]],
        ))
        .unwrap();
        let vocab = build_vocabulary(&ann, 3).unwrap();
        assert_eq!(vocab.words(), &["dog".to_string()]);
        assert_eq!(vocab.lookup("runs"), vocab.unk_index());
        assert_eq!(vocab.size(), 2);
    }

    #[test]
    fn vocabulary_min_count_one_keeps_everything() {
        let mut ann = AnnotationTable::default();
        ann.push(story("s", &[&["b"], &["a"], &["c"], &["a"], &["d"]])).unwrap();
        let vocab = build_vocabulary(&ann, 1).unwrap();
        assert_eq!(vocab.words(), &["a", "b", "c", "d"]);
    }

    #[test]
    fn vocabulary_tie_break_is_lexicographic() {
        let mut ann = AnnotationTable::default();
        ann.push(story("s", &[&["b", "a"], &["b", "a"], &["a", "b"], &["z"], &["z"]]))
            .unwrap();
        let vocab = build_vocabulary(&ann, 3).unwrap();
        assert_eq!(vocab.get("a"), Some(0));
        assert_eq!(vocab.get("b"), Some(1));
        assert_eq!(vocab.get("z"), None);
    }

    #[test]
    fn empty_corpus_gives_unk_only() {
        let vocab = build_vocabulary(&AnnotationTable::default(), 3).unwrap();
        assert_eq!(vocab.size(), 1);
        assert_eq!(vocab.word(vocab.unk_index()), Some(UNK_TOKEN));
    }

    #[test]
    fn vocabulary_file_round_trip() {
        let vocab = Vocabulary::from_words(UNK_TOKEN, vec!["dog".into(), "run".into()]).unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        save_vocabulary(&vocab, f.path()).unwrap();
        let text = std::fs::read_to_string(f.path()).unwrap();
        assert_eq!(text, "{\"unk\":\"<UNK>\",\"words\":[\"dog\",\"run\"]}\n");
        assert_eq!(load_vocabulary(f.path()).unwrap(), vocab);
    }
}
