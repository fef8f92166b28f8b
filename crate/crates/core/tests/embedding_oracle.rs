use lha::corpus::{Document, Tokenizer};
use lha::embeddings::{embed_corpus, EmbeddingStrategy, Level, WordVectorTable};

#[test]
fn avg_equals_scripted_mean() {
    let mut table = WordVectorTable::new(3);
    table.insert("sun", &[1.0, 2.0, 0.0]).unwrap();
    table.insert("moon", &[0.0, -1.0, 4.0]).unwrap();
    table.insert("the", &[0.5, 0.5, 0.5]).unwrap();
    let tok = Tokenizer::default();
    let docs = vec![Document::build(
        "d",
        "x",
        None,
        ["The sun, the SUN and the moon.", "Zzz qqq."],
        &tok,
    )];
    let m = embed_corpus(&docs, Level::Sentence, &EmbeddingStrategy::Avg(&table), false).unwrap();
    // in-vocabulary tokens: the, sun, the, sun, the, moon
    let expected = [
        (3.0 * 0.5 + 2.0 * 1.0 + 0.0) / 6.0,
        (3.0 * 0.5 + 2.0 * 2.0 - 1.0) / 6.0,
        (3.0 * 0.5 + 0.0 + 4.0) / 6.0,
    ];
    for (a, b) in m.row(0).iter().zip(expected) {
        assert!((*a as f64 - b).abs() < 1e-6);
    }
    assert!(m.row(1).iter().all(|&x| x == 0.0));

    let n = embed_corpus(&docs, Level::Sentence, &EmbeddingStrategy::Avg(&table), true).unwrap();
    let norm = expected.iter().map(|x| x * x).sum::<f64>().sqrt();
    for (a, b) in n.row(0).iter().zip(expected) {
        assert!((*a as f64 - b / norm).abs() < 1e-6);
    }
    assert!(n.row(1).iter().all(|&x| x == 0.0));
}
