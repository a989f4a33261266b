//! Built-in semantic-word filter: a function-word stoplist and a small
//! suffix-rule lemmatizer with an irregular-form table.
//!
//! This is deliberately crude. Callers with a real tagger and lemmatizer
//! should pre-process upstream and use [`TextMode::Passthrough`].

use std::collections::{BTreeSet, HashMap, HashSet};
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TextMode {
    /// Tokens are used as given.
    Passthrough,
    /// Stopword removal followed by lemmatization.
    #[default]
    Heuristic,
}

impl FromStr for TextMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "passthrough" => Ok(TextMode::Passthrough),
            "heuristic" => Ok(TextMode::Heuristic),
            other => Err(format!(
                "unknown text mode {other:?} (expected passthrough or heuristic)"
            )),
        }
    }
}

/// Reduces a group of sentences to the deduplicated set of words that act as
/// items.
pub fn preprocess_tokens<'a, I, S>(sentences: I, mode: TextMode) -> BTreeSet<String>
where
    I: IntoIterator<Item = S>,
    S: IntoIterator<Item = &'a String>,
{
    let mut words = BTreeSet::new();
    for sentence in sentences {
        for token in sentence {
            match mode {
                TextMode::Passthrough => {
                    words.insert(token.clone());
                }
                TextMode::Heuristic => {
                    if let Some(word) = semantic_lemma(token) {
                        words.insert(word);
                    }
                }
            }
        }
    }
    words
}

/// Lemma of `token`, or `None` when it is a function word.
pub fn semantic_lemma(token: &str) -> Option<String> {
    let lower = token.to_lowercase();
    if lower.is_empty() || is_stopword(&lower) || !lower.chars().any(char::is_alphabetic) {
        return None;
    }
    let lemma = lemmatize(&lower);
    if is_stopword(&lemma) {
        None
    } else {
        Some(lemma)
    }
}

pub fn is_stopword(word: &str) -> bool {
    static SET: OnceLock<HashSet<&'static str>> = OnceLock::new();
    SET.get_or_init(|| STOPWORDS.iter().copied().collect())
        .contains(word)
}

/// Lowercase input expected.
pub fn lemmatize(word: &str) -> String {
    static TABLE: OnceLock<HashMap<&'static str, &'static str>> = OnceLock::new();
    let table = TABLE.get_or_init(|| IRREGULAR.iter().copied().collect());
    if let Some(lemma) = table.get(word) {
        return (*lemma).to_owned();
    }
    if let Some(stem) = strip_plural(word) {
        return stem;
    }
    if let Some(stem) = word.strip_suffix("ing") {
        if stem.len() >= 3 && has_vowel(stem) {
            return undouble(stem);
        }
    }
    if let Some(stem) = word.strip_suffix("ied") {
        if stem.len() >= 2 {
            return format!("{stem}y");
        }
    }
    if let Some(stem) = word.strip_suffix("ed") {
        if stem.len() >= 3 && has_vowel(stem) {
            return undouble(stem);
        }
    }
    word.to_owned()
}

fn strip_plural(word: &str) -> Option<String> {
    if word.len() <= 3 {
        return None;
    }
    if let Some(stem) = word.strip_suffix("ies") {
        if stem.len() >= 2 {
            return Some(format!("{stem}y"));
        }
    }
    for suffix in ["sses", "ches", "shes", "xes", "zes"] {
        if word.ends_with(suffix) {
            return Some(word[..word.len() - 2].to_owned());
        }
    }
    if word.ends_with('s')
        && !word.ends_with("ss")
        && !word.ends_with("us")
        && !word.ends_with("is")
    {
        return Some(word[..word.len() - 1].to_owned());
    }
    None
}

fn has_vowel(s: &str) -> bool {
    s.chars().any(|c| matches!(c, 'a' | 'e' | 'i' | 'o' | 'u' | 'y'))
}

/// "runn" -> "run", "stopp" -> "stop"; l, s and z doubles are left alone
/// ("fall", "pass", "buzz").
fn undouble(stem: &str) -> String {
    let bytes = stem.as_bytes();
    let n = bytes.len();
    if n >= 2 && bytes[n - 1] == bytes[n - 2] {
        let c = bytes[n - 1];
        let consonant = c.is_ascii_alphabetic() && !b"aeiouy".contains(&c);
        if consonant && !b"lsz".contains(&c) {
            return stem[..n - 1].to_owned();
        }
    }
    stem.to_owned()
}

const STOPWORDS: &[&str] = &[
    "a", "about", "above", "across", "after", "against", "all", "along", "also", "am", "among",
    "an", "and", "another", "any", "are", "around", "as", "at", "be", "because", "been",
    "before", "behind", "being", "below", "beside", "between", "both", "but", "by", "can",
    "could", "did", "do", "does", "doing", "down", "during", "each", "either", "every", "few",
    "for", "from", "had", "has", "have", "having", "he", "her", "here", "hers", "herself",
    "him", "himself", "his", "how", "i", "if", "in", "into", "is", "it", "its", "itself",
    "just", "may", "me", "might", "mine", "more", "most", "must", "my", "myself", "near",
    "neither", "no", "nor", "not", "of", "off", "on", "once", "one", "only", "onto", "or",
    "other", "our", "ours", "ourselves", "out", "over", "own", "same", "shall", "she",
    "should", "so", "some", "such", "than", "that", "the", "their", "theirs", "them",
    "themselves", "then", "there", "these", "they", "this", "those", "through", "to", "too",
    "toward", "towards", "under", "until", "up", "upon", "us", "very", "was", "we", "were",
    "what", "when", "where", "whether", "which", "while", "who", "whom", "whose", "why",
    "will", "with", "within", "without", "would", "yet", "you", "your", "yours", "yourself",
    "yourselves", "s", "t", "nt", "ll", "ve", "re", "d", "m",
];

/// Irregular forms the suffix rules would get wrong.
const IRREGULAR: &[(&str, &str)] = &[
    // be / have / do / go
    ("was", "be"), ("were", "be"), ("is", "be"), ("are", "be"), ("am", "be"),
    ("been", "be"), ("being", "be"), ("has", "have"), ("had", "have"), ("having", "have"),
    ("did", "do"), ("does", "do"), ("done", "do"), ("doing", "do"), ("went", "go"),
    ("gone", "go"), ("goes", "go"), ("going", "go"),
    // strong verbs
    ("ran", "run"), ("running", "run"), ("ate", "eat"), ("eaten", "eat"), ("saw", "see"),
    ("seen", "see"), ("sees", "see"), ("came", "come"), ("coming", "come"), ("took", "take"),
    ("taken", "take"), ("taking", "take"), ("made", "make"), ("making", "make"),
    ("gave", "give"), ("given", "give"), ("giving", "give"), ("got", "get"),
    ("gotten", "get"), ("getting", "get"), ("sat", "sit"), ("sitting", "sit"),
    ("stood", "stand"), ("swam", "swim"), ("swum", "swim"), ("swimming", "swim"),
    ("drank", "drink"), ("drunk", "drink"), ("drove", "drive"), ("driven", "drive"),
    ("driving", "drive"), ("rode", "ride"), ("ridden", "ride"), ("riding", "ride"),
    ("wrote", "write"), ("written", "write"), ("writing", "write"), ("spoke", "speak"),
    ("spoken", "speak"), ("sang", "sing"), ("sung", "sing"), ("began", "begin"),
    ("begun", "begin"), ("flew", "fly"), ("flown", "fly"), ("flies", "fly"),
    ("grew", "grow"), ("grown", "grow"), ("threw", "throw"), ("thrown", "throw"),
    ("knew", "know"), ("known", "know"), ("drew", "draw"), ("drawn", "draw"),
    ("wore", "wear"), ("worn", "wear"), ("tore", "tear"), ("torn", "tear"),
    ("broke", "break"), ("broken", "break"), ("chose", "choose"), ("chosen", "choose"),
    ("froze", "freeze"), ("frozen", "freeze"), ("woke", "wake"), ("woken", "wake"),
    ("fell", "fall"), ("fallen", "fall"), ("felt", "feel"), ("left", "leave"),
    ("leaving", "leave"), ("kept", "keep"), ("slept", "sleep"), ("met", "meet"),
    ("led", "lead"), ("fed", "feed"), ("fled", "flee"), ("held", "hold"), ("told", "tell"),
    ("sold", "sell"), ("found", "find"), ("bought", "buy"), ("brought", "bring"),
    ("thought", "think"), ("caught", "catch"), ("taught", "teach"), ("fought", "fight"),
    ("sought", "seek"), ("built", "build"), ("sent", "send"), ("spent", "spend"),
    ("lent", "lend"), ("bent", "bend"), ("lost", "lose"), ("losing", "lose"),
    ("paid", "pay"), ("said", "say"), ("laid", "lay"), ("lay", "lie"), ("lain", "lie"),
    ("lying", "lie"), ("dying", "die"), ("tying", "tie"), ("won", "win"),
    ("winning", "win"), ("hung", "hang"), ("struck", "strike"), ("stuck", "stick"),
    ("dug", "dig"), ("spun", "spin"), ("swung", "swing"), ("shot", "shoot"),
    ("shone", "shine"), ("hid", "hide"), ("hidden", "hide"), ("bit", "bite"),
    ("bitten", "bite"), ("slid", "slide"), ("understood", "understand"),
    ("became", "become"), ("becoming", "become"), ("forgot", "forget"),
    ("forgotten", "forget"), ("heard", "hear"), ("meant", "mean"), ("read", "read"),
    // e-final verbs the -ing/-ed rules would truncate
    ("smiling", "smile"), ("smiled", "smile"), ("dancing", "dance"), ("danced", "dance"),
    ("living", "live"), ("lived", "live"), ("loving", "love"),
    ("loved", "love"), ("hiking", "hike"), ("hiked", "hike"), ("skating", "skate"),
    ("skated", "skate"), ("posing", "pose"), ("posed", "pose"), ("racing", "race"),
    ("raced", "race"), ("celebrating", "celebrate"), ("celebrated", "celebrate"),
    ("decorating", "decorate"), ("decorated", "decorate"), ("arriving", "arrive"),
    ("arrived", "arrive"), ("sharing", "share"), ("shared", "share"), ("exploring", "explore"),
    ("explored", "explore"), ("baking", "bake"), ("baked", "bake"), ("closing", "close"),
    ("closed", "close"), ("excited", "excite"), ("used", "use"), ("using", "use"),
    ("liked", "like"), ("liking", "like"), ("hoped", "hope"), ("hoping", "hope"),
    ("moving", "move"), ("moved", "move"), ("gathering", "gather"), ("gathered", "gather"),
    ("wedding", "wedding"), ("building", "building"), ("ceiling", "ceiling"),
    ("evening", "evening"), ("morning", "morning"), ("nothing", "nothing"),
    ("something", "something"), ("everything", "everything"), ("anything", "anything"),
    ("thing", "thing"), ("things", "thing"), ("king", "king"), ("ring", "ring"),
    ("spring", "spring"), ("string", "string"), ("red", "red"), ("bed", "bed"),
    ("shed", "shed"), ("sled", "sled"), ("seed", "seed"), ("need", "need"),
    ("speed", "speed"), ("hundred", "hundred"),
    // irregular plurals
    ("children", "child"), ("men", "man"), ("women", "woman"), ("people", "person"),
    ("feet", "foot"), ("teeth", "tooth"), ("mice", "mouse"), ("geese", "goose"),
    ("leaves", "leaf"), ("wolves", "wolf"), ("knives", "knife"), ("wives", "wife"),
    ("lives", "life"), ("halves", "half"), ("shelves", "shelf"), ("loaves", "loaf"),
    ("selves", "self"), ("oxen", "ox"), ("fish", "fish"), ("sheep", "sheep"),
    ("deer", "deer"), ("series", "series"), ("species", "species"), ("clothes", "clothes"),
    ("glasses", "glasses"), ("news", "news"), ("bus", "bus"), ("gas", "gas"),
    ("boxes", "box"), ("buses", "bus"), ("dresses", "dress"), ("houses", "house"),
    ("horses", "horse"), ("cheeses", "cheese"), ("places", "place"), ("faces", "face"),
    ("pieces", "piece"), ("races", "race"), ("prizes", "prize"), ("sizes", "size"),
    ("roses", "rose"), ("noses", "nose"), ("cakes", "cake"),
    ("potatoes", "potato"), ("tomatoes", "tomato"), ("heroes", "hero"),
    // comparatives and superlatives
    ("better", "good"), ("best", "good"), ("worse", "bad"), ("worst", "bad"),
    ("bigger", "big"), ("biggest", "big"), ("smaller", "small"), ("smallest", "small"),
    ("larger", "large"), ("largest", "large"), ("older", "old"), ("oldest", "old"),
    ("younger", "young"), ("youngest", "young"), ("taller", "tall"), ("tallest", "tall"),
    ("higher", "high"), ("highest", "high"), ("happier", "happy"), ("happiest", "happy"),
    ("prettier", "pretty"), ("prettiest", "pretty"), ("nicer", "nice"), ("nicest", "nice"),
    ("greater", "great"), ("greatest", "great"), ("longer", "long"), ("longest", "long"),
    ("faster", "fast"), ("fastest", "fast"), ("farther", "far"), ("further", "far"),
    ("less", "little"), ("least", "little"), ("more", "much"), ("most", "much"),
    ("funnier", "funny"), ("funniest", "funny"), ("closer", "close"), ("closest", "close"),
];
