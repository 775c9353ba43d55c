//! Regenerates the bundled toy corpus under `data/toy/`.

use mia_lab::corpus::toy::{documents_to_jsonl, generate_toy_corpus, TOY_SEED};

fn main() -> std::io::Result<()> {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("data/toy");
    let (train, test) = generate_toy_corpus(TOY_SEED);
    std::fs::write(dir.join("train.jsonl"), documents_to_jsonl(&train))?;
    std::fs::write(dir.join("test.jsonl"), documents_to_jsonl(&test))?;
    Ok(())
}
