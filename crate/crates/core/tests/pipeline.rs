use std::io::Write;

use nestq::columnar::{encode_events, write_events};
use nestq::model::validate_event;
use nestq::queries::run_events;
use nestq::{
    execute, generate, ingest_jsonl, oracle_run, DatasetFile, Event, GenConfig, Query, QueryConfig,
    QueryId,
};
use tempfile::TempDir;

fn events(seed: u64, n: u64) -> Vec<Event> {
    generate(&GenConfig::with_seed(seed, n)).unwrap().collect()
}

#[test]
fn generated_events_are_valid() {
    for e in events(31, 20_000) {
        validate_event(&e).unwrap();
    }
}

#[test]
fn jsonl_ingest_round_trips_through_disk() {
    let dir = TempDir::new().unwrap();
    let src = events(32, 10_000);
    let jsonl = dir.path().join("e.jsonl");
    let mut f = std::io::BufWriter::new(std::fs::File::create(&jsonl).unwrap());
    nestq::model::write_jsonl(&mut f, &src).unwrap();
    f.flush().unwrap();
    drop(f);
    let nf2 = dir.path().join("e.nf2");
    let summary = ingest_jsonl(&jsonl, &nf2, 3000).unwrap();
    assert_eq!(summary.row_groups, 4);
    assert_eq!(summary.events, 10_000);
    let ds = DatasetFile::open(&nf2).unwrap();
    ds.verify_checksum().unwrap();
    assert_eq!(ds.read_all_events().unwrap(), src);
}

#[test]
fn file_and_memory_datasets_agree() {
    let dir = TempDir::new().unwrap();
    let src = events(33, 3000);
    let path = dir.path().join("d.nf2");
    write_events(&path, src.iter().cloned(), 500).unwrap();
    let on_disk = DatasetFile::open(&path).unwrap();
    let in_memory = DatasetFile::from_bytes(encode_events(src, 500).unwrap()).unwrap();
    let cfg = QueryConfig::default();
    for q in Query::ALL {
        let (a, ma) = execute(&on_disk, q, 2, &cfg).unwrap();
        let (b, mb) = execute(&in_memory, q, 2, &cfg).unwrap();
        assert_eq!(a.total.histograms, b.total.histograms);
        assert_eq!(ma.bytes_scanned, mb.bytes_scanned);
    }
}

#[test]
fn results_do_not_depend_on_row_group_size() {
    let src = events(34, 5000);
    let cfg = QueryConfig::default();
    for q in Query::ALL {
        let reference = oracle_run(q, &src, &cfg);
        for rg in [1, 13, 999, 5000, 100_000] {
            let r = run_events(q, &src, &cfg, rg).unwrap();
            assert_eq!(
                r.total.histograms, reference.total.histograms,
                "{q} rg={rg}"
            );
            assert_eq!(r.total_ops(), reference.total_ops(), "{q} rg={rg}");
        }
    }
}

#[test]
fn q4_selection_shrinks_as_jet_threshold_rises() {
    let src = events(35, 10_000);
    let mut counts = Vec::new();
    for threshold in [20.0, 40.0, 60.0] {
        let mut cfg = QueryConfig::default();
        cfg.cuts.q4_jet_pt = threshold;
        counts.push(
            run_events(Query::Q4, &src, &cfg, 1000)
                .unwrap()
                .selected_event_count(),
        );
    }
    assert!(
        counts[0] >= counts[1] && counts[1] >= counts[2],
        "{counts:?}"
    );
    assert!(counts[0] > counts[2]);
}

#[test]
fn default_dataset_exercises_every_query() {
    let src = events(36, 10_000);
    let cfg = QueryConfig::default();
    for q in Query::ALL {
        let r = run_events(q, &src, &cfg, 2000).unwrap();
        assert!(r.selected_event_count() > 0, "{q} selects nothing");
        for id in q.sinks() {
            let h = r.histogram(*id).unwrap();
            let in_range: u64 = h.counts().iter().sum();
            assert!(in_range > 0, "{id} has no in-range entries");
        }
    }
}

#[test]
fn histogram_override_changes_binning_only() {
    let src = events(37, 2000);
    let mut cfg = QueryConfig::default();
    let default_total = run_events(Query::Q1, &src, &cfg, 500)
        .unwrap()
        .histogram(QueryId::Q1)
        .unwrap()
        .total();
    cfg.specs.set(
        QueryId::Q1,
        nestq::HistogramSpec::new(0.0, 50.0, 7).unwrap(),
    );
    let h = run_events(Query::Q1, &src, &cfg, 500)
        .unwrap()
        .histogram(QueryId::Q1)
        .unwrap()
        .clone();
    assert_eq!(h.counts().len(), 7);
    assert_eq!(h.total(), default_total);
    assert!(h.overflow() > 0);
}
