//! Learns a byte-pair vocabulary from the bundled corpus and shows how a
//! headline and its edit become model input.
//!
//! ```text
//! cargo run --example tokenizer
//! ```

use jokemeter::corpus::{parse_task1_file, ParseOptions};
use jokemeter::textprep::{encode_headline, model_input, train_vocab};

fn main() -> jokemeter::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/mini/task1_train.csv");
    let ds = parse_task1_file(path, ParseOptions::default())?;
    let vocab = train_vocab(ds.iter().map(|h| model_input(h, true)), 400)?;
    println!("learned {} tokens from {} headlines", vocab.len(), ds.len());

    for h in ds.iter().take(3) {
        let seq = encode_headline(&vocab, h, true, 48)?;
        let pieces: Vec<&str> = seq.ids[..seq.real_length].iter().map(|&i| vocab.token(i).unwrap_or("?")).collect();
        println!("\n{}", h.original);
        println!("  edit:    {}", h.edit);
        println!("  input:   {}", model_input(h, true));
        println!("  tokens:  {}", pieces.join(" | "));
        println!("  edit at: {:?}", seq.edit_span);
    }
    Ok(())
}
