//! A deterministic generator of small Java-like methods, and the toy corpus
//! built from it that ships with the crate.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Corpus, Document, RecordBody};

pub const TOY_SEED: u64 = 20_240_501;
pub const TOY_TRAIN_SIZE: usize = 300;
pub const TOY_TEST_SIZE: usize = 200;

const TOY_TRAIN: &str = include_str!("../../data/toy/train.jsonl");
const TOY_TEST: &str = include_str!("../../data/toy/test.jsonl");

const VERBS: &[&str] = &[
    "get", "set", "update", "load", "find", "compute", "build", "parse", "check", "create", "read",
    "write", "remove", "add", "merge", "apply", "count", "resolve", "format", "validate",
];
const NOUNS: &[&str] = &[
    "user", "order", "item", "account", "file", "buffer", "node", "price", "total", "name",
    "index", "config", "session", "token", "record", "entry", "cache", "event", "message", "path",
    "value", "key", "list", "result",
];
const TYPES: &[&str] = &["int", "long", "String", "boolean", "double"];
const COLLECTIONS: &[&str] = &["List", "Set", "Queue"];

fn camel(words: &[&str]) -> String {
    let mut s = words[0].to_owned();
    for w in &words[1..] {
        let mut c = w.chars();
        if let Some(first) = c.next() {
            s.extend(first.to_uppercase());
            s.push_str(c.as_str());
        }
    }
    s
}

struct Gen {
    rng: ChaCha8Rng,
}

impl Gen {
    fn pick<'a>(&mut self, xs: &[&'a str]) -> &'a str {
        xs.choose(&mut self.rng).expect("non-empty word list")
    }

    fn var(&mut self) -> String {
        if self.rng.gen_bool(0.7) {
            self.pick(NOUNS).to_owned()
        } else {
            let a = self.pick(NOUNS);
            let b = self.pick(NOUNS);
            camel(&[a, b])
        }
    }

    fn method(&mut self) -> String {
        let v = self.pick(VERBS);
        let n = self.pick(NOUNS);
        camel(&[v, n])
    }

    fn literal(&mut self, ty: &str) -> String {
        match ty {
            "int" | "long" => self.rng.gen_range(0..1000).to_string(),
            "double" => format!(
                "{}.{}",
                self.rng.gen_range(0..100),
                self.rng.gen_range(0..10)
            ),
            "boolean" => if self.rng.gen_bool(0.5) {
                "true"
            } else {
                "false"
            }
            .to_owned(),
            _ => format!("\"{}\"", self.pick(NOUNS)),
        }
    }

    fn statement(&mut self, ty: &str, result: &str, param: &str) -> Vec<String> {
        let line = match self.rng.gen_range(0..7) {
            0 => format!("if ( {param} == null ) {{ return {} ; }}", self.literal(ty)),
            1 => {
                let m = self.method();
                format!("{result} = {param} . {m} ( ) ;")
            }
            2 => {
                let (c, m) = (self.pick(COLLECTIONS), self.method());
                format!("for ( {c} < {ty} > part : {param} . {m} ( ) ) {{ {result} = part ; }}")
            }
            3 => {
                let f = self.var();
                format!("this . {f} = {param} ;")
            }
            4 => format!("log . info ( \"{}\" + {param} ) ;", self.method()),
            5 => {
                let (m, lit) = (self.method(), self.literal(ty));
                format!("{result} = {m} ( {param} , {lit} ) ;")
            }
            _ => {
                let lit = self.literal("int");
                format!(
                    "if ( {param} . size ( ) > {lit} ) {{ throw new IllegalStateException ( ) ; }}"
                )
            }
        };
        line.split_whitespace().map(str::to_owned).collect()
    }

    fn document(&mut self) -> String {
        let ty = self.pick(TYPES);
        let name = self.method();
        let param = self.var();
        let ptype = self.pick(&["Object", "String", "Context", "Request"]);
        let result = format!("{}Result", self.pick(NOUNS));
        let init = self.literal(ty);
        let mut toks: Vec<String> =
            format!("public {ty} {name} ( {ptype} {param} ) {{ {ty} {result} = {init} ;")
                .split_whitespace()
                .map(str::to_owned)
                .collect();
        for _ in 0..self.rng.gen_range(1..=3) {
            toks.extend(self.statement(ty, &result, &param));
        }
        toks.extend(["return", &result, ";", "}"].map(str::to_owned));
        toks.join(" ")
    }
}

/// `n` generated methods with ids `{prefix}{i}`.
pub fn generate_documents(n: usize, seed: u64, prefix: &str) -> Vec<Document> {
    let mut g = Gen {
        rng: ChaCha8Rng::seed_from_u64(seed),
    };
    (0..n)
        .map(|i| Document {
            id: format!("{prefix}{i:04}"),
            body: RecordBody::Text { text: g.document() },
        })
        .collect()
}

/// The toy corpus as (victim training pool, held-out pool).
pub fn generate_toy_corpus(seed: u64) -> (Vec<Document>, Vec<Document>) {
    let mut docs = generate_documents(TOY_TRAIN_SIZE + TOY_TEST_SIZE, seed, "toy-");
    let test = docs.split_off(TOY_TRAIN_SIZE);
    (docs, test)
}

fn parse_bundled(text: &str) -> Corpus {
    let docs = text
        .lines()
        .map(|l| serde_json::from_str(l).expect("bundled toy corpus is valid JSONL"))
        .collect();
    Corpus::new(docs).expect("bundled toy corpus has unique ids")
}

/// The bundled toy corpus as (victim training pool, held-out pool).
pub fn toy_corpus() -> (Corpus, Corpus) {
    (parse_bundled(TOY_TRAIN), parse_bundled(TOY_TEST))
}

pub fn documents_to_jsonl(docs: &[Document]) -> String {
    docs.iter()
        .map(|d| serde_json::to_string(d).expect("documents serialize") + "\n")
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::ExampleOptions;

    #[test]
    fn bundled_files_match_generator() {
        let (train, test) = generate_toy_corpus(TOY_SEED);
        assert_eq!(documents_to_jsonl(&train), TOY_TRAIN);
        assert_eq!(documents_to_jsonl(&test), TOY_TEST);
    }

    #[test]
    fn toy_corpus_shape() {
        let (train, test) = toy_corpus();
        assert_eq!((train.len(), test.len()), (TOY_TRAIN_SIZE, TOY_TEST_SIZE));
        let ex = train.examples(&ExampleOptions::default()).unwrap();
        assert!(ex.iter().all(|e| e.truth.len() == 8 && e.input.len() >= 8));
        assert_eq!(ex[0].truth.tokens().last().map(String::as_str), Some("}"));
    }

    #[test]
    fn generator_is_deterministic() {
        assert_eq!(generate_documents(5, 1, "a"), generate_documents(5, 1, "a"));
        assert_ne!(generate_documents(5, 1, "a"), generate_documents(5, 2, "a"));
    }
}
