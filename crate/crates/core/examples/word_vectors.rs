//! Skip-gram word vectors with negative sampling on a synthetic corpus,
//! then nearest neighbours of a planted token.
//!
//!     cargo run --release --example word_vectors

use normlens::corpus::tokenize;
use normlens::embeddings::{train_skipgram, SgnsConfig};
use normlens::synth::{generate_messages, planted_tokens, CorpusSynthConfig};

fn main() -> normlens::Result<()> {
    let cfg = CorpusSynthConfig {
        messages: 20_000,
        ..Default::default()
    };
    let sentences: Vec<Vec<String>> = generate_messages(&cfg)?.iter().map(|m| tokenize(&m.text)).collect();
    let sg = SgnsConfig {
        dim: 32,
        window: 5,
        min_count: 5,
        epochs: 3,
        seed: 1,
        ..Default::default()
    };
    let (emb, trace) = train_skipgram(&sentences, &sg)?;
    println!("{} tokens, dimension {}", emb.len(), emb.dim());
    println!("mean loss per epoch: {:?}", trace.epoch_mean_loss);

    let (fem, mal) = planted_tokens(&cfg);
    for probe in [&fem[0], &mal[0], &"hon".to_string()] {
        let nn = emb.nearest_neighbors(probe, 5)?;
        let shown: Vec<String> = nn.iter().map(|(t, s)| format!("{t} {s:.2}")).collect();
        println!("{probe:>6}: {}", shown.join(", "));
    }

    let path = std::env::temp_dir().join("normlens_vectors.txt");
    emb.save(&path)?;
    println!("saved to {}", path.display());
    Ok(())
}
