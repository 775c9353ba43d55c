//! Corpus ingestion, tokenization, example construction and the
//! known/hidden splitting protocol used to train surrogates and membership
//! classifiers.
//!
//! A corpus is an ordered list of records read from JSONL (or a directory of
//! plain text files). Records either carry an explicit `input`/`target` pair
//! or a raw `text` that is tokenized and cut into an [`Example`] with a
//! fixed-length suffix target.

mod lexer;
pub(crate) mod split;
pub mod toy;

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use lexer::{lex, strip_long_strings, LexToken, TokenKind};
pub use split::{materialize, plan_splits, DatasetBundle, LabeledExample, SplitPlan};

/// Default number of tokens cut from the end of a document as the target.
pub const DEFAULT_TARGET_LEN: usize = 8;

/// String literals longer than this are blanked by the optional filter.
pub const LONG_STRING_LIMIT: usize = 15;

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: malformed record: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("corpus at {0} contains no records")]
    Empty(PathBuf),
    #[error("duplicate document id {0:?}")]
    DuplicateId(String),
    #[error("empty token in token sequence")]
    EmptyToken,
    #[error("sequence of {len} tokens is too short for a target of {target_len}")]
    TooShort { len: usize, target_len: usize },
    #[error("example {0:?} has an empty target")]
    EmptyTarget(String),
    #[error("known ratio {0} must lie strictly between 0 and 1")]
    RatioOutOfRange(f64),
    #[error("{pool} pool of {available} examples cannot supply two balanced sets of {needed}")]
    PoolTooSmall {
        pool: &'static str,
        available: usize,
        needed: usize,
    },
    #[error("plan expects {expected} {which} examples, got {actual}")]
    SizeMismatch {
        which: &'static str,
        expected: usize,
        actual: usize,
    },
}

pub type Result<T, E = CorpusError> = std::result::Result<T, E>;

/// An ordered list of non-empty tokens.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct TokenSeq(Vec<String>);

impl TokenSeq {
    pub fn new(tokens: Vec<String>) -> Result<Self> {
        if tokens.iter().any(|t| t.is_empty()) {
            return Err(CorpusError::EmptyToken);
        }
        Ok(TokenSeq(tokens))
    }

    pub fn empty() -> Self {
        TokenSeq(Vec::new())
    }

    /// Builds a sequence from string slices, panicking on an empty token.
    /// Meant for literals in tests and examples.
    pub fn from_strs(tokens: &[&str]) -> Self {
        TokenSeq::new(tokens.iter().map(|t| t.to_string()).collect())
            .expect("empty token in literal")
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, String> {
        self.0.iter()
    }

    /// Concatenation `self ⊕ other`.
    pub fn concat(&self, other: &TokenSeq) -> TokenSeq {
        let mut v = self.0.clone();
        v.extend(other.0.iter().cloned());
        TokenSeq(v)
    }

    pub fn push(&mut self, token: String) -> Result<()> {
        if token.is_empty() {
            return Err(CorpusError::EmptyToken);
        }
        self.0.push(token);
        Ok(())
    }

    /// Space-joined rendering, the inverse of whitespace tokenization.
    pub fn detokenize(&self) -> String {
        self.0.join(" ")
    }

    pub fn into_inner(self) -> Vec<String> {
        self.0
    }
}

impl TryFrom<Vec<String>> for TokenSeq {
    type Error = CorpusError;

    fn try_from(v: Vec<String>) -> Result<Self> {
        TokenSeq::new(v)
    }
}

impl From<TokenSeq> for Vec<String> {
    fn from(t: TokenSeq) -> Self {
        t.0
    }
}

impl fmt::Display for TokenSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.detokenize())
    }
}

impl<'a> IntoIterator for &'a TokenSeq {
    type Item = &'a String;
    type IntoIter = std::slice::Iter<'a, String>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TokenScheme {
    #[default]
    Whitespace,
    CodeLexer,
}

/// Splits `text` into tokens.
///
/// `Whitespace` splits on runs of whitespace. `CodeLexer` additionally
/// separates operators and punctuation from identifiers and literals.
pub fn tokenize(text: &str, scheme: TokenScheme) -> TokenSeq {
    match scheme {
        TokenScheme::Whitespace => TokenSeq(text.split_whitespace().map(str::to_owned).collect()),
        TokenScheme::CodeLexer => TokenSeq(lex(text).into_iter().map(|t| t.text).collect()),
    }
}

/// One completion task: an input prefix and the ground-truth continuation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Example {
    pub id: String,
    pub input: TokenSeq,
    pub truth: TokenSeq,
}

impl Example {
    /// The full token stream `input ⊕ truth`.
    pub fn full(&self) -> TokenSeq {
        self.input.concat(&self.truth)
    }
}

/// Cuts the last `target_len` tokens off as the target.
pub fn make_example(
    id: impl Into<String>,
    tokens: &TokenSeq,
    target_len: usize,
) -> Result<Example> {
    if target_len == 0 || tokens.len() <= target_len {
        return Err(CorpusError::TooShort {
            len: tokens.len(),
            target_len,
        });
    }
    let cut = tokens.len() - target_len;
    Ok(Example {
        id: id.into(),
        input: TokenSeq(tokens.0[..cut].to_vec()),
        truth: TokenSeq(tokens.0[cut..].to_vec()),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RecordBody {
    Pair { input: String, target: String },
    Text { text: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    #[serde(flatten)]
    pub body: RecordBody,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorpusFormat {
    #[default]
    Jsonl,
    PlainDir,
}

/// How raw documents become examples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExampleOptions {
    pub scheme: TokenScheme,
    pub target_len: usize,
    /// Blank string literals longer than [`LONG_STRING_LIMIT`] characters.
    pub strip_long_strings: bool,
}

impl Default for ExampleOptions {
    fn default() -> Self {
        ExampleOptions {
            scheme: TokenScheme::Whitespace,
            target_len: DEFAULT_TARGET_LEN,
            strip_long_strings: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    documents: Vec<Document>,
}

impl Corpus {
    pub fn new(documents: Vec<Document>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(documents.len());
        for d in &documents {
            if !seen.insert(d.id.as_str()) {
                return Err(CorpusError::DuplicateId(d.id.clone()));
            }
        }
        Ok(Corpus { documents })
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    /// Converts every record into an [`Example`], in corpus order.
    pub fn examples(&self, opts: &ExampleOptions) -> Result<Vec<Example>> {
        let prep = |s: &str| {
            if opts.strip_long_strings {
                strip_long_strings(s, LONG_STRING_LIMIT)
            } else {
                s.to_owned()
            }
        };
        self.documents
            .iter()
            .map(|doc| match &doc.body {
                RecordBody::Pair { input, target } => {
                    let truth = tokenize(&prep(target), opts.scheme);
                    if truth.is_empty() {
                        return Err(CorpusError::EmptyTarget(doc.id.clone()));
                    }
                    Ok(Example {
                        id: doc.id.clone(),
                        input: tokenize(&prep(input), opts.scheme),
                        truth,
                    })
                }
                RecordBody::Text { text } => make_example(
                    doc.id.clone(),
                    &tokenize(&prep(text), opts.scheme),
                    opts.target_len,
                ),
            })
            .collect()
    }
}

pub fn load_corpus(path: impl AsRef<Path>, format: CorpusFormat) -> Result<Corpus> {
    let path = path.as_ref();
    let docs = match format {
        CorpusFormat::Jsonl => read_jsonl(path)?,
        CorpusFormat::PlainDir => read_plain_dir(path)?,
    };
    if docs.is_empty() {
        return Err(CorpusError::Empty(path.to_owned()));
    }
    Corpus::new(docs)
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io {
        path: path.to_owned(),
        source,
    }
}

fn read_jsonl(path: &Path) -> Result<Vec<Document>> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut docs = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let doc: Document = serde_json::from_str(&line).map_err(|e| CorpusError::Parse {
            path: path.to_owned(),
            line: i + 1,
            message: e.to_string(),
        })?;
        docs.push(doc);
    }
    Ok(docs)
}

// One document per regular file, id = file name, sorted by name.
fn read_plain_dir(path: &Path) -> Result<Vec<Document>> {
    let mut entries = fs::read_dir(path)
        .map_err(io_err(path))?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<Vec<_>>>()
        .map_err(io_err(path))?;
    entries.retain(|p| p.is_file());
    entries.sort();
    entries
        .into_iter()
        .map(|p| {
            let text = fs::read_to_string(&p).map_err(io_err(&p))?;
            let id = p
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default();
            Ok(Document {
                id,
                body: RecordBody::Text { text },
            })
        })
        .collect()
}

/// Writes examples as `{"id","input","target"}` JSONL, the loadable form.
pub fn write_examples_jsonl(path: impl AsRef<Path>, examples: &[Example]) -> std::io::Result<()> {
    let mut out = String::new();
    for ex in examples {
        let doc = Document {
            id: ex.id.clone(),
            body: RecordBody::Pair {
                input: ex.input.detokenize(),
                target: ex.truth.detokenize(),
            },
        };
        out.push_str(&serde_json::to_string(&doc).expect("document serializes"));
        out.push('\n');
    }
    fs::write(path, out)
}
