use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use lha::ann_index::{AnnIndex, AnnParams};
use lha::corpus::{Corpus, Tokenizer};
use lha::doc_align::{align_documents, read_doc_pairs, write_doc_pairs};
use lha::embeddings::{embed_corpus, load_embeddings, load_word_vectors, save_embeddings, EmbeddingStrategy, Level, WordVectorTable};
use lha::evaluate::{
    eval_document_alignment, eval_joint, eval_sentence_alignment, read_gold_jsonl, write_gold_jsonl, DocEvalConfig,
    DocScoring, EvalDataset, EvalReport, JointConfig, Rescore, SentEvalConfig,
};
use lha::metrics::{Bm25Stats, Scorer};
use lha::pipeline::{run_pipeline, validate_config, PipelineConfig, Severity};
use lha::sent_align::{
    align_sentences_with_stats, write_groups_jsonl, write_groups_tsv, FilterMode, FilterPolicy, SentAlignConfig,
    SentenceEmbeddings,
};
use lha::synthetic::{generate, write_toy_pipeline, SyntheticSpec};
use log::{info, warn};

use crate::{
    AdaptGoldArgs, AlignDocsArgs, AlignSentsArgs, Cli, Command, EmbedArgs, EvalCommand, EvalCommon, EvalScorerArg,
    FilterModeArg, FixtureArgs, IndexArgs, LevelArg, RunArgs, ScorerArg,
};

pub fn dispatch(cli: Cli) -> Result<ExitCode> {
    let tok = match &cli.stopwords {
        Some(p) => Tokenizer::from_stopword_file(p)?,
        None => Tokenizer::default(),
    };
    match cli.command {
        Command::Run(a) => run(a),
        Command::Embed(a) => embed(a, &tok),
        Command::Index(a) => index(a),
        Command::AlignDocs(a) => align_docs(a),
        Command::AlignSents(a) => align_sents(a, &tok),
        Command::Eval(e) => eval(e, &tok),
        Command::AdaptGold(a) => adapt_gold(a, &tok),
        Command::Fixture(a) => fixture(a, &tok),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

/// Prints to stdout, treating a closed pipe as success.
fn emit(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    match writeln!(out, "{text}").and_then(|_| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn vectors(path: Option<&Path>, what: &str) -> Result<WordVectorTable> {
    let Some(p) = path else {
        bail!("--word-vectors is required for {what}");
    };
    load_word_vectors(p).with_context(|| format!("loading word vectors from {}", p.display()))
}

fn run(a: RunArgs) -> Result<ExitCode> {
    let cfg = PipelineConfig::load(&a.config, &a.overrides)?;
    let findings = validate_config(&cfg);
    let mut errors = 0;
    for f in &findings {
        match f.severity {
            Severity::Error => {
                errors += 1;
                eprintln!("config error: {}: {}", f.field, f.message);
            }
            Severity::Warning => warn!("{}: {}", f.field, f.message),
        }
    }
    if errors > 0 {
        return Ok(ExitCode::from(2));
    }
    if a.check {
        emit(&cfg.to_toml())?;
        return Ok(ExitCode::SUCCESS);
    }
    let summary = run_pipeline(&cfg)?;
    emit(&serde_json::to_string_pretty(&summary)?)?;
    Ok(ExitCode::SUCCESS)
}

fn embed(a: EmbedArgs, tok: &Tokenizer) -> Result<ExitCode> {
    let corpus = Corpus::read(&a.input, "corpus", tok)?;
    let level = match a.level {
        LevelArg::Doc => Level::Document,
        LevelArg::Sent => Level::Sentence,
    };
    let (table, pre);
    let strategy = if a.strategy == "avg" {
        table = vectors(a.word_vectors.as_deref(), "--strategy avg")?;
        EmbeddingStrategy::Avg(&table)
    } else if let Some(p) = a.strategy.strip_prefix("precomputed:") {
        pre = load_embeddings(Path::new(p))?;
        EmbeddingStrategy::Precomputed(&pre)
    } else {
        bail!("unknown strategy {:?}; expected avg or precomputed:<file>", a.strategy);
    };
    let m = embed_corpus(&corpus.documents, level, &strategy, !a.no_normalize)?;
    save_embeddings(&m, &a.out)?;
    info!("wrote {} x {} embeddings to {}", m.len(), m.dim(), a.out.display());
    Ok(ExitCode::SUCCESS)
}

fn index(a: IndexArgs) -> Result<ExitCode> {
    let m = load_embeddings(&a.embeddings)?;
    let params = AnnParams {
        n_trees: a.trees,
        search_k: a.search_k,
        leaf_size: a.leaf_size,
        seed: a.seed,
    };
    let idx = AnnIndex::build(&m, params)?;
    idx.save(&a.out)?;
    info!("indexed {} vectors into {}", idx.len(), a.out.display());
    Ok(ExitCode::SUCCESS)
}

fn align_docs(a: AlignDocsArgs) -> Result<ExitCode> {
    let src = load_embeddings(&a.source)?;
    let idx = AnnIndex::load(&a.index)?;
    let pairs = align_documents(&src, &idx, a.k, a.theta_d)?;
    let mut out = create(&a.out)?;
    write_doc_pairs(&pairs, &mut out)?;
    out.flush()?;
    info!("{} document pairs", pairs.len());
    Ok(ExitCode::SUCCESS)
}

fn bm25_over(units: impl Iterator<Item = Vec<String>>) -> Scorer {
    let docs: Vec<Vec<String>> = units.collect();
    Scorer::Bm25(Arc::new(Bm25Stats::from_collection(docs.iter().map(Vec::as_slice))))
}

fn align_sents(a: AlignSentsArgs, tok: &Tokenizer) -> Result<ExitCode> {
    let source = Corpus::read(&a.source, "source", tok)?;
    let target = Corpus::read(&a.target, "target", tok)?;
    let doc_pairs = read_doc_pairs(BufReader::new(
        File::open(&a.doc_pairs).with_context(|| format!("opening {}", a.doc_pairs.display()))?,
    ))?;
    let table = match (&a.word_vectors, a.scorer) {
        (Some(p), _) => Some(Arc::new(load_word_vectors(p)?)),
        (None, ScorerArg::Wmd | ScorerArg::Rwmd) => bail!("--word-vectors is required for WMD and RWMD"),
        (None, _) => None,
    };
    let scorer = match a.scorer {
        ScorerArg::Cosine => Scorer::Cosine,
        ScorerArg::Overlap => Scorer::Overlap,
        ScorerArg::Bm25 => bm25_over(target.sentences().map(|s| s.content_tokens())),
        ScorerArg::Wmd => Scorer::Wmd(table.clone().unwrap()),
        ScorerArg::Rwmd => Scorer::Rwmd(table.clone().unwrap()),
    };
    let (se, te) = if matches!(a.scorer, ScorerArg::Cosine) {
        match (&a.source_embeddings, &a.target_embeddings, &table) {
            (Some(s), Some(t), _) => (Some(load_embeddings(s)?), Some(load_embeddings(t)?)),
            (None, None, Some(t)) => {
                let avg = EmbeddingStrategy::Avg(t);
                (
                    Some(embed_corpus(&source.documents, Level::Sentence, &avg, true)?),
                    Some(embed_corpus(&target.documents, Level::Sentence, &avg, true)?),
                )
            }
            _ => bail!("the cosine scorer needs --source-embeddings and --target-embeddings, or --word-vectors"),
        }
    } else {
        (None, None)
    };
    let mut policy = FilterPolicy {
        min_overlap: a.min_overlap,
        max_len_ratio: a.max_len_ratio,
        mode: match a.filter_mode {
            FilterModeArg::PerGroup => FilterMode::PerGroup,
            FilterModeArg::PerPair => FilterMode::PerPair,
        },
        ..FilterPolicy::default()
    };
    if let Some(p) = &a.exclude {
        let n = policy.load_exclusions(p)?;
        info!("{n} excluded pairs");
    }
    policy.validate()?;
    let config = SentAlignConfig {
        k: a.k,
        theta_s: a.theta_s,
        policy,
    };
    let emb = SentenceEmbeddings {
        source: se.as_ref(),
        target: te.as_ref(),
    };
    let (groups, stats) = align_sentences_with_stats(&doc_pairs, &source, &target, &scorer, emb, &config, tok);
    let mut out = create(&a.out)?;
    write_groups_jsonl(&groups, &mut out)?;
    out.flush()?;
    if let Some(p) = &a.tsv {
        let mut out = create(p)?;
        write_groups_tsv(&groups, &mut out)?;
        out.flush()?;
    }
    emit(&serde_json::to_string_pretty(&stats)?)?;
    Ok(ExitCode::SUCCESS)
}

fn report(r: &EvalReport, json_only: bool) -> Result<ExitCode> {
    if !json_only {
        emit(&r.table_row())?;
    }
    emit(&serde_json::to_string_pretty(r)?)?;
    Ok(ExitCode::SUCCESS)
}

fn word_scorer(kind: EvalScorerArg, table: Option<&Arc<WordVectorTable>>, collection: impl Iterator<Item = Vec<String>>) -> Result<Scorer> {
    let need = || table.cloned().context("--word-vectors is required for WMD and RWMD");
    Ok(match kind {
        EvalScorerArg::Avg => Scorer::Cosine,
        EvalScorerArg::Overlap => Scorer::Overlap,
        EvalScorerArg::Bm25 => bm25_over(collection),
        EvalScorerArg::Wmd => Scorer::Wmd(need()?),
        EvalScorerArg::Rwmd => Scorer::Rwmd(need()?),
    })
}

fn load_eval(common: &EvalCommon, tok: &Tokenizer) -> Result<(EvalDataset, Option<Arc<WordVectorTable>>)> {
    let ds = EvalDataset::load(&common.data, tok)?;
    let table = common.word_vectors.as_deref().map(load_word_vectors).transpose()?.map(Arc::new);
    Ok((ds, table))
}

fn eval(e: EvalCommand, tok: &Tokenizer) -> Result<ExitCode> {
    match e {
        EvalCommand::Sent { common, scorer, k } => {
            let (ds, table) = load_eval(&common, tok)?;
            let s = word_scorer(scorer, table.as_ref(), ds.target.sentences().map(|s| s.content_tokens()))?;
            let embeddings = match (scorer, &table) {
                (EvalScorerArg::Avg, Some(t)) => Some(EmbeddingStrategy::Avg(t)),
                (EvalScorerArg::Avg, None) => bail!("--word-vectors is required for avg"),
                _ => None,
            };
            let r = eval_sentence_alignment(
                &ds,
                &SentEvalConfig {
                    scorer: s,
                    embeddings,
                    k: (k > 0).then_some(k),
                    include_partial: common.include_partial,
                },
            )?;
            report(&r, common.json)
        }
        EvalCommand::Doc {
            common,
            scorer,
            k,
            noise,
            seed,
        } => {
            let (ds, table) = load_eval(&common, tok)?;
            let scoring = match (scorer, &table) {
                (EvalScorerArg::Avg, Some(t)) => DocScoring::Embeddings(EmbeddingStrategy::Avg(t)),
                (EvalScorerArg::Avg, None) => bail!("--word-vectors is required for avg"),
                _ => DocScoring::Words(word_scorer(
                    scorer,
                    table.as_ref(),
                    ds.target
                        .documents
                        .iter()
                        .map(|d| d.sentences.iter().flat_map(|s| s.content_tokens()).collect()),
                )?),
            };
            let r = eval_document_alignment(
                &ds,
                &DocEvalConfig {
                    scoring,
                    k: (k > 0).then_some(k),
                    noise,
                    seed,
                },
            )?;
            report(&r, common.json)
        }
        EvalCommand::Joint {
            common,
            mode,
            noise,
            seed,
            k_doc,
            k_sent,
            wmd,
            top_n,
            search_k,
        } => {
            let (ds, table) = load_eval(&common, tok)?;
            let t = table.context("--word-vectors is required for joint evaluation")?;
            let mut cfg = JointConfig::new(mode, EmbeddingStrategy::Avg(&t), EmbeddingStrategy::Avg(&t));
            cfg.noise = noise;
            cfg.seed = seed;
            cfg.k_doc = k_doc;
            cfg.k_sent = k_sent;
            cfg.ann.search_k = search_k;
            cfg.include_partial = common.include_partial;
            if wmd {
                cfg.rescore = Some(Rescore {
                    scorer: Scorer::Wmd(t.clone()),
                    top_n,
                });
            }
            let r = eval_joint(&ds, &cfg)?;
            report(&r, common.json)
        }
    }
}

fn adapt_gold(a: AdaptGoldArgs, tok: &Tokenizer) -> Result<ExitCode> {
    let source = Corpus::read(&a.source, "source", tok)?;
    let target = Corpus::read(&a.target, "target", tok)?;
    let input = BufReader::new(File::open(&a.tsv).with_context(|| format!("opening {}", a.tsv.display()))?);
    let labels = lha::evaluate::adapt_gold_tsv(input, &source, &target)?;
    let mut out = create(&a.out)?;
    write_gold_jsonl(&labels, &mut out)?;
    out.flush()?;
    let check = read_gold_jsonl(BufReader::new(File::open(&a.out)?))?;
    info!("wrote {} labels to {}", check.len(), a.out.display());
    Ok(ExitCode::SUCCESS)
}

fn fixture(a: FixtureArgs, tok: &Tokenizer) -> Result<ExitCode> {
    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    if a.toy {
        let mut cfg = write_toy_pipeline(&a.out)?;
        let local = |p: &Path| p.strip_prefix(&a.out).map(Path::to_path_buf).unwrap_or_else(|_| p.to_path_buf());
        cfg.source = local(&cfg.source);
        cfg.target = local(&cfg.target);
        cfg.output_dir = local(&cfg.output_dir);
        cfg.word_vectors = cfg.word_vectors.as_deref().map(local);
        let path = a.out.join("lha.toml");
        std::fs::write(&path, cfg.to_toml())?;
        info!("wrote toy pipeline config {}", path.display());
        return Ok(ExitCode::SUCCESS);
    }
    let spec = SyntheticSpec {
        noise_docs: a.noise,
        seed: a.seed,
        ..SyntheticSpec::default()
    };
    let bench = generate(&spec, tok)?;
    bench.dataset.save(&a.out)?;
    let path = a.out.join("vectors.txt");
    let mut out = create(&path)?;
    bench.vectors.write(&mut out)?;
    out.flush()?;
    info!(
        "wrote {} gold labels, {} noise documents per side and {} word vectors to {}",
        bench.dataset.labels.len(),
        bench.dataset.noise_source.len(),
        bench.vectors.len(),
        a.out.display()
    );
    Ok(ExitCode::SUCCESS)
}
