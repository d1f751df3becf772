//! Library-level tests of the subcommand implementations: multi-bundle
//! evaluation, external score matrices, pair-agreement curves and topic
//! clustering with silhouette selection.

use std::collections::BTreeMap;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use coordmap_cli::cluster::{cmd_cluster, ClusterArgs};
use coordmap_cli::detect::{cmd_detect, DetectArgs, Method};
use coordmap_cli::evaluate::{cmd_eval, EvalArgs};
use coordmap_cli::simulate::{cmd_simulate, SimulateArgs};
use coordmap_core::ingest::Label;
use coordmap_core::synth::ScenarioKind;

fn simulate_args(out: &std::path::Path) -> SimulateArgs {
    SimulateArgs {
        groups: 2,
        group_size: 4,
        normals: 6,
        scenario: ScenarioKind::IrregularLeader,
        duration_days: 20.0,
        duration_secs: None,
        bin_width: 3600,
        leader_rate: 4.0,
        lag_bins: 0,
        jitter_secs: 900,
        noise_rate: 0.0,
        normal_rate: 4.0,
        seed: 5,
        output: out.to_path_buf(),
    }
}

fn detect_args(input: &std::path::Path, out: &std::path::Path, method: Method) -> DetectArgs {
    DetectArgs {
        input: input.to_path_buf(),
        format: None,
        window_start: None,
        window_end: None,
        bin_width: 3600,
        embedding_dim: 10,
        tau: 1,
        theta: 0.5,
        train_ratio: "3:1".parse().unwrap(),
        method,
        topics: 2,
        seed: 5,
        n_coordinated: None,
        n_normal: None,
        max_lag: None,
        alpha: 0.05,
        coordinated_lang: "ru".into(),
        stopwords: None,
        threads: Some(2),
        dump_binned: true,
        output: out.to_path_buf(),
    }
}

#[test]
fn multi_source_eval_with_agreement_and_scores() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    cmd_simulate(&simulate_args(&sim)).unwrap();

    // Attach language metadata so the lang baseline has signal: coordinated
    // users tweet in Russian.
    let events_path = sim.join("events.jsonl");
    let text = std::fs::read_to_string(&events_path).unwrap();
    let mut rewritten = String::new();
    for line in text.lines() {
        let mut event: serde_json::Value = serde_json::from_str(line).unwrap();
        let user = event["user_id"].as_str().unwrap().to_owned();
        event["lang"] = serde_json::Value::String(if user.starts_with('c') {
            "ru".into()
        } else {
            "en".into()
        });
        rewritten.push_str(&serde_json::to_string(&event).unwrap());
        rewritten.push('\n');
    }
    std::fs::write(&events_path, rewritten).unwrap();

    let ccm_out = dir.path().join("ccm");
    let summary = cmd_detect(&detect_args(&events_path, &ccm_out, Method::Ccm)).unwrap();
    assert!(summary.stats.edges > 0);
    assert!(ccm_out.join("binned.csv").exists());

    let gc_out = dir.path().join("gc");
    cmd_detect(&detect_args(&events_path, &gc_out, Method::Gc)).unwrap();
    let lang_out = dir.path().join("lang");
    cmd_detect(&detect_args(&events_path, &lang_out, Method::Lang)).unwrap();

    // External score matrix and a pair-agreement file over all user pairs.
    let users: Vec<String> = (0..2)
        .flat_map(|g| (0..4).map(move |m| format!("c{g:02}_{m:02}")))
        .chain((0..6).map(|i| format!("n{i:03}")))
        .collect();
    let scores_path = dir.path().join("external.csv");
    let agreement_path = dir.path().join("agreement.csv");
    {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut scores = std::fs::File::create(&scores_path).unwrap();
        let mut agreement = std::fs::File::create(&agreement_path).unwrap();
        writeln!(scores, "source,target,score").unwrap();
        writeln!(agreement, "user_a,user_b,agreed").unwrap();
        for (i, a) in users.iter().enumerate() {
            for b in &users[i + 1..] {
                writeln!(scores, "{a},{b},{:.4}", rng.gen_range(0.0..1.0)).unwrap();
                // Same-group pairs agree.
                let agreed = a.starts_with('c') && b.starts_with('c') && a[..3] == b[..3];
                writeln!(agreement, "{a},{b},{agreed}").unwrap();
            }
        }
    }

    let eval_out = dir.path().join("eval");
    let reports = cmd_eval(&EvalArgs {
        bundles: vec![ccm_out.clone(), gc_out.clone(), lang_out.clone()],
        score_matrices: vec![scores_path],
        events: Some(events_path.clone()),
        format: None,
        labels: None,
        pair_agreement: Some(agreement_path),
        histogram_bin_width: 0.005,
        output: eval_out.clone(),
    })
    .unwrap();
    assert_eq!(reports.len(), 4);

    let ccm_report = &reports[0];
    assert_eq!(ccm_report.kind, "bundle");
    let metrics = ccm_report.user_metrics.unwrap();
    assert!(metrics.f1 > 0.9, "ccm f1 {}", metrics.f1);
    assert!(ccm_report.auc.unwrap() > 0.9);
    let breakdown = ccm_report.breakdown.unwrap();
    assert_eq!(breakdown.cc + breakdown.cn + breakdown.nn, ccm_report.detected_pairs.unwrap());

    // Language baseline: perfect by construction, but no scores to sweep.
    let lang_report = reports.iter().find(|r| r.name == "lang").unwrap();
    assert_eq!(lang_report.user_metrics.unwrap().f1, 1.0);
    assert!(lang_report.auc.is_none());

    // Random external scores hover near chance.
    let external = reports.iter().find(|r| r.name == "external").unwrap();
    assert_eq!(external.kind, "scores");
    assert!((external.auc.unwrap() - 0.5).abs() < 0.35);

    assert!(eval_out.join("metrics.json").exists());
    assert!(eval_out.join("agreement_ccm.csv").exists());

    // Labels CSV path yields the same label set as the event log.
    let labels_path = dir.path().join("labels.csv");
    let mut body = String::from("user_id,label\n");
    for u in &users {
        let label = if u.starts_with('c') { Label::Coordinated } else { Label::Normal };
        body.push_str(&format!("{u},{label}\n"));
    }
    std::fs::write(&labels_path, body).unwrap();
    let eval2 = cmd_eval(&EvalArgs {
        bundles: vec![ccm_out],
        score_matrices: vec![],
        events: None,
        format: None,
        labels: Some(labels_path),
        pair_agreement: None,
        histogram_bin_width: 0.01,
        output: dir.path().join("eval2"),
    })
    .unwrap();
    assert_eq!(
        eval2[0].user_metrics.unwrap().f1,
        reports[0].user_metrics.unwrap().f1
    );
}

#[test]
fn cluster_selects_topic_count_and_compares_partitions() {
    let dir = tempfile::tempdir().unwrap();
    let events_path = dir.path().join("events.jsonl");
    let mut file = std::fs::File::create(&events_path).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    // Two vocabulary blocks across 8 users, ~40 tweets each.
    for u in 0..8 {
        let block = u % 2;
        for t in 0..40 {
            let words: Vec<String> = (0..6)
                .map(|_| format!("b{block}w{:02}", rng.gen_range(0..10)))
                .collect();
            writeln!(
                file,
                r#"{{"user_id":"u{u}","timestamp":{},"text":"{}"}}"#,
                1000 + t * 60 + u,
                words.join(" ")
            )
            .unwrap();
        }
    }
    drop(file);

    // Reference partition: the two blocks.
    let reference = dir.path().join("reference.csv");
    let mut body = String::from("user_id,cluster\n");
    for u in 0..8 {
        body.push_str(&format!("u{u},{}\n", u % 2));
    }
    std::fs::write(&reference, body).unwrap();

    let out = dir.path().join("clust");
    let outcome = cmd_cluster(&ClusterArgs {
        input: Some(events_path),
        format: None,
        window_start: None,
        window_end: None,
        topics: None,
        candidates: vec![2, 3, 4],
        seed: 7,
        max_iter: 300,
        tol: 1e-6,
        stopwords: None,
        compare: Some(reference),
        ari: vec![],
        threads: Some(2),
        output: Some(out.clone()),
    })
    .unwrap();
    assert_eq!(outcome.n_topics, Some(2), "scores: {:?}", outcome.silhouette_scores);
    assert_eq!(outcome.ari, Some(1.0));
    assert!(out.join("topics.json").exists());

    let partition = coordmap_core::io::read_partition_csv(&out.join("partition.csv")).unwrap();
    let by_cluster: BTreeMap<&String, Vec<&str>> =
        partition.iter().fold(BTreeMap::new(), |mut acc, (u, c)| {
            acc.entry(c).or_default().push(u);
            acc
        });
    assert_eq!(by_cluster.len(), 2);
}
