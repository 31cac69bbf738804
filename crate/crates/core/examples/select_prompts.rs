//! Attribute mining, neighbour clusters and donor choice on a synthetic
//! embedding set, then the same pipeline on a trained checkpoint if one is
//! given.
//!
//! `cargo run --release --example select_prompts [checkpoint]`

use blendr::selection::{build_prompt_set, mine_novel_attribute, neighbor_cluster, rank_attributes};
use blendr::toymodel::checkpoint::Checkpoint;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn main() -> blendr::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let emb: Vec<Vec<f64>> = (0..12).map(|_| (0..6).map(|_| StandardNormal.sample(&mut rng)).collect()).collect();
    let ranking = rank_attributes(0, &emb)?;
    println!("ranking against attribute 0:");
    for (id, s) in &ranking.ranked {
        println!("  {id:>2}  {s:+.3}");
    }
    let novel = mine_novel_attribute(&ranking, 42)?;
    println!("mined attribute {novel}, cluster {:?}", neighbor_cluster(novel, &emb, 4)?);

    if let Some(path) = std::env::args().nth(1) {
        let ckpt = Checkpoint::load(path.as_ref())?;
        let set = build_prompt_set(0, &ckpt.world, &ckpt.model, 7)?;
        println!("checkpoint selection: {:?}", set.record);
    }
    Ok(())
}
