//! In-memory walkthrough of the retrieval pipeline: index a tiny case
//! corpus, train the built-in scorer on silver pairs, fuse lexical and
//! semantic scores, decide a result set, and print the metrics report.
//!
//! Run: `cargo run --example pipeline`

use std::collections::BTreeSet;

use lexent::corpus::{DocKind, Document};
use lexent::datagen::{build_silver_supporting, SilverOptions};
use lexent::fusion::{decide, rank, DecideStrategy, FusionConfig};
use lexent::harness::metrics::{IdSets, MetricsReport};
use lexent::lexical::{build_bm25, Bm25Params};
use lexent::scorer::{train, ScorerBackend, TrainSchedule, TrainStage};

fn main() {
    let cases = vec![
        Document::from_raw(
            "lease-1",
            DocKind::Case,
            "[1] The tenant paid a deposit under the lease. The landlord withheld it.\n\
             [2] A surveyor priced the kitchen repairs. The court ordered repayment.",
        ),
        Document::from_raw(
            "patent-1",
            DocKind::Case,
            "[1] The patent claims a compression method. The defendant denied infringement.\n\
             [2] Experts compared the devices. The claim was dismissed.",
        ),
        Document::from_raw(
            "lease-2",
            DocKind::Case,
            "[1] The landlord kept the deposit citing carpet damage. The tenant sued.\n\
             [2] Receipts showed the carpets were old. Judgment for the tenant.",
        ),
    ];
    let query = Document::from_raw(
        "query-1",
        DocKind::Case,
        "[1] The tenant seeks return of a deposit withheld by the landlord.",
    );

    // lexical index over whole cases (candidate pre-filtering)
    let tokenized: Vec<(String, Vec<String>)> =
        cases.iter().map(|d| (d.id.clone(), d.tokens())).collect();
    let index = build_bm25(&tokenized, Bm25Params::default()).unwrap();
    println!("BM25 top candidates:");
    for (id, score) in index.top_k(&query.tokens(), 3) {
        println!("  {id}: {score:.3}");
    }

    // semantic scorer trained on silver supporting pairs
    let silver = build_silver_supporting(&cases, &SilverOptions::default(), 42);
    println!("mined {} silver pairs", silver.len());
    let model = train(
        &TrainSchedule {
            stages: vec![TrainStage {
                pairs: silver,
                epochs: 3,
                learning_rate: 0.5,
            }],
        },
        1 << 16,
        42,
    )
    .unwrap();
    let backend = ScorerBackend::Builtin(model);

    // fuse paragraph-level lexical and semantic matrices and decide
    let ranked = rank(
        &query,
        &cases,
        &FusionConfig::default(),
        &backend,
        Bm25Params::default(),
    )
    .unwrap();
    println!("fused ranking:");
    for (id, score) in &ranked {
        println!("  {id}: {score:.3}");
    }
    let selected = decide(&ranked, DecideStrategy::RelativeThreshold(0.95)).unwrap();
    println!("selected: {selected:?}");

    // evaluate against gold
    let mut predictions = IdSets::new();
    predictions.insert(query.id.clone(), selected.into_iter().collect::<BTreeSet<_>>());
    let mut gold = IdSets::new();
    gold.insert(
        query.id.clone(),
        ["lease-1", "lease-2"].iter().map(|s| s.to_string()).collect(),
    );
    let report = MetricsReport::from_sets(&predictions, &gold).unwrap();
    println!("{}", serde_json::to_string_pretty(&report).unwrap());
}
