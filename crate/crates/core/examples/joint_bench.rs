//! Joint evaluation on the synthetic benchmark: hierarchical vs. global
//! alignment, with and without WMD re-scoring.
//!
//! Usage: joint_bench [noise_docs] [seed]

use std::sync::Arc;

use lha::corpus::Tokenizer;
use lha::embeddings::EmbeddingStrategy;
use lha::evaluate::{
    eval_document_alignment, eval_joint, eval_sentence_alignment, DocEvalConfig, DocScoring, JointConfig, JointMode,
    Rescore, SentEvalConfig,
};
use lha::metrics::Scorer;
use lha::synthetic::{generate, SyntheticSpec};

fn main() -> lha::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let mut spec = SyntheticSpec::default();
    if let Some(n) = args.first() {
        spec.noise_docs = n.parse().expect("noise_docs");
    }
    if let Some(s) = args.get(1) {
        spec.seed = s.parse().expect("seed");
    }
    let env = |k: &str| std::env::var(k).ok();
    if let Some(v) = env("P_TEMPLATE") {
        spec.p_template = v.parse().unwrap();
    }
    if let Some(v) = env("TEMPLATES") {
        spec.templates = v.parse().unwrap();
    }
    let search_k: usize = env("SEARCH_K").map_or(6000, |v| v.parse().unwrap());
    let with_wmd = env("NO_WMD").is_none();
    let tok = Tokenizer::default();
    let bench = generate(&spec, &tok)?;
    let ds = &bench.dataset;
    let t = &bench.vectors;
    let avg = || EmbeddingStrategy::Avg(t);
    let wmd = Scorer::Wmd(Arc::new(t.clone()));

    let r = eval_sentence_alignment(
        ds,
        &SentEvalConfig { scorer: Scorer::Cosine, embeddings: Some(avg()), k: Some(1), include_partial: false },
    )?;
    println!("{}", r.table_row());
    let r = eval_sentence_alignment(
        ds,
        &SentEvalConfig { scorer: wmd.clone(), embeddings: None, k: Some(1), include_partial: false },
    )?;
    println!("{} (wmd)", r.table_row());
    let r = eval_document_alignment(
        ds,
        &DocEvalConfig { scoring: DocScoring::Embeddings(avg()), k: Some(1), noise: spec.noise_docs, seed: 1 },
    )?;
    println!("{}", r.table_row());
    for mode in [JointMode::Lha, JointMode::Global] {
        for rescore in [false, true] {
            if rescore && !with_wmd {
                continue;
            }
            let mut cfg = JointConfig::new(mode, avg(), avg());
            cfg.noise = spec.noise_docs;
            cfg.seed = 1;
            cfg.ann.search_k = search_k;
            if rescore {
                cfg.rescore = Some(Rescore { scorer: wmd.clone(), top_n: 50 });
            }
            let r = eval_joint(ds, &cfg)?;
            println!("{}{}  {:.2}s", r.table_row(), if rescore { " (wmd)" } else { "" }, r.elapsed_secs);
        }
    }
    Ok(())
}
