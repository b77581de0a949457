//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any fails.

use std::collections::{BTreeSet, HashMap};
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::body::Body;
use axum::http::{Method, Request};
use http_body_util::BodyExt;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use tower::ServiceExt;

use refspect_core::export::{write_clusters_csv, write_spectrum_csv};
use refspect_core::ingest::{read_corpus_file, CitingRecord, Corpus, ReferenceIndex, ReferenceView};
use refspect_core::reference::{ClusterConfig, ClusterId, ClusterTable};
use refspect_core::session::{load_session, save_session, AnalysisSession, LiveSession};
use refspect_core::spectrum::{
    apply_era_thresholds, cluster_rows, compute_spectrum, detect_peaks, rpys_co, Analysis, ClusterSelection,
    EraThresholdRule, MarkerMode, MarkerSelection, PeakParams, PipelineConfig, Spectrum, YearRange,
};
use refspect_service::{router, AppState};

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures").join(name)
}

fn golden_config() -> PipelineConfig {
    PipelineConfig {
        cutoff_year: Some(1971),
        year_range: Some(YearRange::new(1686, 1970).unwrap()),
        era_rules: Some(vec![
            EraThresholdRule::new(1000, 1900, 10).unwrap(),
            EraThresholdRule::new(1901, 1970, 100).unwrap(),
        ]),
        ..PipelineConfig::default()
    }
}

const GOLDEN_FLAGS: &[&str] = &["--cutoff", "1971", "--range", "1686:1970", "--min-ncr", "1000:1900=10", "--min-ncr", "1901:1970=100"];

// ---------------------------------------------------------------------------
// Synthetic corpora. Every work gets a unique volume/page pair so distinct
// works never link, and a few spellings that normalize to the same fields.

#[derive(Debug, Clone)]
struct Work {
    author: String,
    year: i32,
    source: String,
    volume: u32,
    page: u32,
}

impl Work {
    fn raw(&self, variant: usize) -> String {
        let (a, y, s, v, p) = (&self.author, self.year, &self.source, self.volume, self.page);
        match variant % 3 {
            0 => format!("{a} J, {y}, {s}, V{v}, P{p}"),
            1 => format!("{} J., {y}, {}, V{v}, P{p}", title_case(a), title_case(s)),
            _ => format!("{a}  J, {y}, {s}., V{v}, P{p}"),
        }
    }
}

fn title_case(s: &str) -> String {
    s.split(' ')
        .map(|w| {
            let mut c = w.chars();
            match c.next() {
                Some(f) => f.to_string() + &c.as_str().to_lowercase(),
                None => String::new(),
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn letters(rng: &mut ChaCha8Rng, n: usize) -> String {
    (0..n).map(|_| rng.gen_range(b'A'..=b'Z') as char).collect()
}

fn works(rng: &mut ChaCha8Rng, n: usize, years: std::ops::RangeInclusive<i32>) -> Vec<Work> {
    (0..n)
        .map(|i| Work {
            author: letters(rng, 7),
            year: rng.gen_range(years.clone()),
            source: format!("{} {}", letters(rng, 6), letters(rng, 5)),
            volume: 100 + i as u32,
            page: rng.gen_range(1..900),
        })
        .collect()
}

/// A corpus plus, for each record, the works it cites (with repeats).
struct Synthetic {
    works: Vec<Work>,
    cites: Vec<Vec<usize>>,
    corpus: Corpus,
}

impl Synthetic {
    fn build(rng: &mut ChaCha8Rng, works: Vec<Work>, cites: Vec<Vec<usize>>) -> Synthetic {
        let records = cites
            .iter()
            .enumerate()
            .map(|(i, ws)| CitingRecord {
                record_id: format!("R{i:06}"),
                publication_year: 2000,
                document_type: "Article".into(),
                cited_raw: ws.iter().map(|&w| works[w].raw(rng.gen_range(0..3))).collect(),
            })
            .collect();
        Synthetic {
            works,
            cites,
            corpus: Corpus::new(records).unwrap(),
        }
    }

    fn random(rng: &mut ChaCha8Rng) -> Synthetic {
        let n_works = rng.gen_range(1..=60);
        let ws = works(rng, n_works, 1680..=1970);
        let n_records = rng.gen_range(1..=200);
        let cites = (0..n_records)
            .map(|_| {
                let k = rng.gen_range(0..=50);
                (0..k).map(|_| rng.gen_range(0..n_works)).collect()
            })
            .collect();
        Synthetic::build(rng, ws, cites)
    }

    fn citers(&self, work: usize) -> BTreeSet<usize> {
        (0..self.cites.len()).filter(|&r| self.cites[r].contains(&work)).collect()
    }
}

struct Built {
    view: ReferenceView,
    table: ClusterTable,
    /// Cluster position of every work.
    work_pos: Vec<usize>,
}

fn build(s: &Synthetic) -> Result<Built, String> {
    let index = Arc::new(ReferenceIndex::build(&s.corpus));
    let view = ReferenceView::full(&index);
    let table = ClusterTable::build(index.clone(), &view, &ClusterConfig::<f64>::default());
    let mut work_of_raw: HashMap<String, usize> = HashMap::new();
    for (r, ws) in s.cites.iter().enumerate() {
        for (raw, &w) in s.corpus.records()[r].cited_raw.iter().zip(ws) {
            work_of_raw.insert(raw.clone(), w);
        }
    }
    let mut work_pos = vec![usize::MAX; s.works.len()];
    for (pos, cluster) in table.clusters().iter().enumerate() {
        let mut ws = BTreeSet::new();
        for v in &cluster.variants {
            ws.insert(work_of_raw[&index.get(*v).raw_text]);
        }
        ensure(ws.len() == 1, || format!("cluster {} mixes works {ws:?}", cluster.id))?;
        let w = *ws.first().unwrap();
        ensure(work_pos[w] == usize::MAX, || format!("work {w} split over clusters"))?;
        ensure(cluster.effective_rpy == Some(s.works[w].year), || format!("cluster {} has the wrong year", cluster.id))?;
        work_pos[w] = pos;
    }
    Ok(Built {
        view,
        table,
        work_pos,
    })
}

/// Nested-loop NCR tally over `records` for every year of `range`.
fn oracle_spectrum(s: &Synthetic, records: &BTreeSet<usize>, range: (i32, i32)) -> Vec<i64> {
    let mut out = Vec::new();
    for year in range.0..=range.1 {
        let mut n = 0;
        for (w, work) in s.works.iter().enumerate() {
            if work.year != year {
                continue;
            }
            for &r in records {
                if s.cites[r].contains(&w) {
                    n += 1;
                }
            }
        }
        out.push(n);
    }
    out
}

fn ncr_of(spectrum: &Spectrum<i64>) -> Vec<i64> {
    spectrum.points().iter().map(|p| p.ncr).collect()
}

fn record_set(view: &ReferenceView) -> BTreeSet<usize> {
    view.records().iter().map(|r| r.record as usize).collect()
}

// ---------------------------------------------------------------------------

fn arrhenius_merge() -> Check {
    let start = Instant::now();
    let philos = "ARRHENIUS S, 1896, PHILOS MAG, V41, P237";
    let london = "ARRHENIUS S, 1896, LONDON EDINBURGH DUBL, V41, P237";
    let records: Vec<CitingRecord> = (0..311)
        .map(|i| CitingRecord {
            record_id: format!("A{i}"),
            publication_year: 1990,
            document_type: "Article".into(),
            cited_raw: vec![if i < 279 { philos } else { london }.to_string(), "TYNDALL J, 1861, PHILOS T R SOC LOND, V151, P1".into()],
        })
        .collect();
    let analysis = Analysis::new(Corpus::new(records).unwrap());
    let config = PipelineConfig {
        cutoff_year: Some(1971),
        ..PipelineConfig::default()
    };
    let session = AnalysisSession::new(analysis.fingerprint().clone(), &config, chrono_epoch());
    let mut live = LiveSession::open(analysis, session).map_err(|e| e.to_string())?;
    let ids: Vec<ClusterId> = live
        .table()
        .clusters()
        .iter()
        .filter(|c| live.table().canonical(c).raw_text.starts_with("ARRHENIUS"))
        .map(|c| c.id.clone())
        .collect();
    ensure(ids.len() == 2, || format!("expected two Arrhenius clusters, found {}", ids.len()))?;
    let before: Vec<u64> = ids.iter().map(|id| live.derived().unwrap().counts[live.table().position(id).unwrap()]).collect();
    let merged = live.merge(&ids, chrono_epoch(), "").map_err(|e| e.to_string())?.cluster_id;
    let d = live.derived().map_err(|e| e.to_string())?;
    let ncr = d.counts[live.table().position(&merged).unwrap()];
    let elapsed = start.elapsed();
    ensure(ncr == 311, || format!("merged NCR {ncr}"))?;
    ensure(d.spectrum.get(1896).map(|p| p.ncr) == Some(311), || "spectrum at 1896 is not 311".into())?;
    ensure(elapsed < Duration::from_secs(1), || format!("took {elapsed:?}"))?;
    Ok(format!("{before:?} -> 311 in {elapsed:.1?}"))
}

fn chrono_epoch() -> chrono::DateTime<chrono::Utc> {
    chrono::DateTime::from_timestamp(1_767_225_600, 0).unwrap()
}

fn spectrum_oracle() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let range = YearRange::new(1680, 1970).unwrap();
    for trial in 0..100 {
        let s = Synthetic::random(&mut rng);
        let b = build(&s).map_err(|e| format!("corpus {trial}: {e}"))?;
        let got = ncr_of(&compute_spectrum(&b.view, &b.table, &ClusterSelection::all(&b.table), range));
        let all: BTreeSet<usize> = (0..s.cites.len()).collect();
        let want = oracle_spectrum(&s, &all, (1680, 1970));
        ensure(got == want, || format!("corpus {trial}: spectrum differs from the tally"))?;
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(30), || format!("took {elapsed:?}"))?;
    Ok(format!("100 corpora in {elapsed:.1?}"))
}

fn median_spot_checks() -> Check {
    let start = Instant::now();
    let dev = |start: i32, counts: &[i64]| -> Vec<i64> { Spectrum::from_counts(start, counts).points().iter().map(|p| p.deviation).collect() };
    let hand = Spectrum::from_counts(1894, &[2i64, 3, 10, 3, 2]);
    let p = hand.get(1896).unwrap();
    ensure((p.median5, p.deviation) == (3, 7), || format!("{{2,3,10,3,2}}: median {} deviation {}", p.median5, p.deviation))?;
    // Outside the range counts are zero: {0,0,9,1,1} has median 1.
    ensure(dev(1900, &[9, 1, 1]) == vec![8, 0, 0], || format!("boundary: {:?}", dev(1900, &[9, 1, 1])))?;
    ensure(dev(1900, &[4, 4]) == vec![4, 4], || format!("two-year range: {:?}", dev(1900, &[4, 4])))?;
    let constant = dev(1800, &[7; 40]);
    ensure(constant.iter().all(|d| *d == 0), || format!("constant series: {constant:?}"))?;
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(1), || format!("took {elapsed:?}"))?;
    Ok("hand case, zero extension and constant series exact".into())
}

fn era_thresholds() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(1896);
    let ws = works(&mut rng, 400, 1650..=1990);
    // Heavy-tailed popularity so both thresholds fall inside the NCR range.
    let weights: Vec<f64> = (0..ws.len()).map(|i| 1.0 / (1.0 + i as f64).powf(0.9)).collect();
    let dist = rand::distributions::WeightedIndex::new(&weights).unwrap();
    let cites: Vec<Vec<usize>> = (0..1500)
        .map(|_| {
            let k = rng.gen_range(5..=30);
            (0..k).map(|_| rng.sample(&dist)).collect()
        })
        .collect();
    let s = Synthetic::build(&mut rng, ws, cites);
    let b = build(&s)?;
    let counts = b.table.count_citations(&b.view);
    let rules = golden_config().era_rules.unwrap();
    let selection = apply_era_thresholds(&b.table, &counts, &rules).map_err(|e| e.to_string())?;
    let got: BTreeSet<usize> = (0..s.works.len()).filter(|&w| selection.contains(b.work_pos[w])).collect();
    let want: BTreeSet<usize> = (0..s.works.len())
        .filter(|&w| {
            let n = s.citers(w).len();
            match s.works[w].year {
                1000..=1900 => n >= 10,
                1901..=1970 => n >= 100,
                _ => false,
            }
        })
        .collect();
    ensure(got == want, || format!("retained {} clusters, oracle {}", got.len(), want.len()))?;
    let early = want.iter().filter(|&&w| s.works[w].year <= 1900).count();
    ensure(early > 0 && early < want.len(), || "fixture does not exercise both rules".into())?;
    Ok(format!("{} clusters retained ({} before 1901), equal to oracle", want.len(), early))
}

fn rpys_co_semantics() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(1861);
    let range = YearRange::new(1680, 1970).unwrap();
    for trial in 0..100 {
        let s = Synthetic::random(&mut rng);
        let b = build(&s).map_err(|e| format!("corpus {trial}: {e}"))?;
        let fail = |what: &str| format!("corpus {trial}: {what}");
        let n_markers = rng.gen_range(1..=3.min(s.works.len()));
        let mut pool: Vec<usize> = (0..s.works.len()).collect();
        pool.shuffle(&mut rng);
        let marker_works = &pool[..n_markers];
        let ids = |ws: &[usize]| -> Vec<ClusterId> { ws.iter().map(|&w| b.table.clusters()[b.work_pos[w]].id.clone()).collect() };
        let all = ClusterSelection::all(&b.table);
        let full_counts = b.table.count_citations(&b.view);
        let full_spectrum = ncr_of(&compute_spectrum(&b.view, &b.table, &all, range));

        for mode in [MarkerMode::Or, MarkerMode::And] {
            let red = rpys_co(&b.view, &b.table, &ids(marker_works), mode).map_err(|e| fail(&e.to_string()))?;
            let oracle: BTreeSet<usize> = (0..s.cites.len())
                .filter(|&r| {
                    let hit = |w: &usize| s.cites[r].contains(w);
                    match mode {
                        MarkerMode::Or => marker_works.iter().any(hit),
                        MarkerMode::And => marker_works.iter().all(hit),
                    }
                })
                .collect();
            ensure(record_set(&red.view) == oracle, || fail("retained records differ from brute force"))?;
            let got = ncr_of(&compute_spectrum(&red.view, &b.table, &all, range));
            ensure(got == oracle_spectrum(&s, &oracle, (1680, 1970)), || fail("reduced spectrum differs from brute force"))?;
            ensure(got.iter().zip(&full_spectrum).all(|(a, b)| a <= b), || fail("not a contraction"))?;
            let again = rpys_co(&red.view, &b.table, &ids(marker_works), mode).map_err(|e| fail(&e.to_string()))?;
            ensure(again.view == red.view, || fail("not idempotent"))?;
            if mode == MarkerMode::Or {
                let red_counts = b.table.count_citations(&red.view);
                for &w in marker_works {
                    let pos = b.work_pos[w];
                    ensure(red_counts[pos] == full_counts[pos], || fail("marker NCR changed"))?;
                }
            }
        }

        let split = rng.gen_range(1..=n_markers);
        let (a, c) = (&pool[..split], &pool[split..n_markers.max(split + 1).min(pool.len())]);
        if !c.is_empty() {
            let records = |ws: &[usize]| -> Result<BTreeSet<usize>, String> {
                Ok(record_set(&rpys_co(&b.view, &b.table, &ids(ws), MarkerMode::Or).map_err(|e| fail(&e.to_string()))?.view))
            };
            let union: Vec<usize> = a.iter().chain(c).copied().collect();
            let lhs = records(&union)?;
            let rhs: BTreeSet<usize> = records(a)?.union(&records(c)?).copied().collect();
            ensure(lhs == rhs, || fail("OR over the union differs from the union of ORs"))?;
        }
    }
    Ok("100 corpora: brute force, idempotence, contraction, marker NCR, OR-union".into())
}

fn peak_recovery() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(1941);
    for trial in 0..50 {
        let len = 271;
        let base: i64 = rng.gen_range(0..20);
        let mut counts = vec![base; len];
        let mut planted = BTreeSet::new();
        while planted.len() < 5 {
            let i = rng.gen_range(2..len - 2);
            if planted.iter().all(|&p: &usize| p.abs_diff(i) >= 5) {
                planted.insert(i);
            }
        }
        for &i in &planted {
            counts[i] += rng.gen_range(5..200);
        }
        let spectrum = Spectrum::from_counts(1700, &counts);
        let peaks = detect_peaks(&spectrum, &PeakParams { min_deviation: 1, max_peaks: None });
        let got: BTreeSet<i32> = peaks.iter().map(|p| p.rpy).collect();
        let want: BTreeSet<i32> = planted.iter().map(|&i| 1700 + i as i32).collect();
        ensure(got == want, || format!("trial {trial}: found {got:?}, planted {want:?}"))?;
    }
    Ok("50 synthetic spectra, exactly the 5 planted years each".into())
}

fn table_dump(table: &ClusterTable, index: &ReferenceIndex, view: &ReferenceView) -> Vec<u8> {
    let mut lines: Vec<String> = table
        .clusters()
        .iter()
        .map(|c| {
            let mut raws: Vec<&str> = c.variants.iter().map(|v| index.get(*v).raw_text.as_str()).collect();
            raws.sort_unstable();
            format!("{}|{:?}|{}|{}", c.id, c.effective_rpy, table.canonical(c).raw_text, raws.join("|"))
        })
        .collect();
    lines.sort();
    let mut out = lines.join("\n").into_bytes();
    let counts = table.count_citations(view);
    write_clusters_csv(&cluster_rows(table, &counts, &ClusterSelection::all(table)), &mut out).unwrap();
    out
}

fn clustering_determinism() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(1938);
    let typo = |s: &str, rng: &mut ChaCha8Rng| {
        let mut b = s.as_bytes().to_vec();
        let i = rng.gen_range(0..b.len());
        if b[i] != b' ' {
            b[i] = rng.gen_range(b'A'..=b'Z');
        }
        String::from_utf8(b).unwrap()
    };
    // 1,000 works in 40 years, each written five distinct ways: two clean
    // spellings, a missing page, and typos in author or source that the
    // similarity threshold has to judge.
    let mut raws: Vec<String> = Vec::new();
    for w in works(&mut rng, 1000, 1930..=1969) {
        let mut forms = BTreeSet::from([w.raw(0), w.raw(1), format!("{} J, {}, {}, V{}", w.author, w.year, w.source, w.volume)]);
        while forms.len() < 5 {
            let form = if rng.gen_bool(0.5) {
                format!("{} J, {}, {}, V{}, P{}", typo(&w.author, &mut rng), w.year, w.source, w.volume, w.page)
            } else {
                format!("{} J, {}, {}, V{}, P{}", w.author, w.year, typo(&w.source, &mut rng), w.volume, w.page)
            };
            forms.insert(form);
        }
        raws.extend(forms);
    }
    let n_refs = raws.len();
    let records: Vec<Vec<String>> = raws.chunks(10).map(|c| c.to_vec()).collect();

    let mut reference: Option<Vec<u8>> = None;
    let mut clusters = 0;
    for shuffle in 0..50 {
        let mut order: Vec<usize> = (0..records.len()).collect();
        order.shuffle(&mut rng);
        let corpus = Corpus::new(
            order
                .iter()
                .map(|&i| {
                    let mut refs = records[i].clone();
                    refs.shuffle(&mut rng);
                    CitingRecord {
                        record_id: format!("D{i:05}"),
                        publication_year: 1990,
                        document_type: "Article".into(),
                        cited_raw: refs,
                    }
                })
                .collect(),
        )
        .unwrap();
        let index = Arc::new(ReferenceIndex::build(&corpus));
        let view = ReferenceView::full(&index);
        let table = ClusterTable::build(index.clone(), &view, &ClusterConfig::<f64>::default());
        clusters = table.len();
        let dump = table_dump(&table, &index, &view);
        match &reference {
            None => reference = Some(dump),
            Some(r) => ensure(*r == dump, || format!("shuffle {shuffle} produced a different table"))?,
        }
    }
    Ok(format!("{n_refs} references -> {clusters} clusters, identical over 50 shuffles"))
}

fn live_csvs(live: &LiveSession) -> Result<(Vec<u8>, Vec<u8>), String> {
    let d = live.derived().map_err(|e| e.to_string())?;
    let mut spectrum = Vec::new();
    write_spectrum_csv(&d.spectrum, &mut spectrum).unwrap();
    let mut clusters = Vec::new();
    write_clusters_csv(&cluster_rows(live.table(), &d.counts, &d.selection), &mut clusters).unwrap();
    Ok((spectrum, clusters))
}

fn load_golden() -> Analysis {
    let (_, ingested) = read_corpus_file(fixture("golden_corpus.txt")).unwrap();
    Analysis::new(ingested.into_corpus().unwrap().0)
}

fn ledger_replay() -> Check {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("session.json");
    let analysis = load_golden();
    let session = AnalysisSession::new(analysis.fingerprint().clone(), &golden_config(), chrono_epoch());
    let mut live = LiveSession::open(analysis, session).map_err(|e| e.to_string())?;
    let find = |live: &LiveSession, prefix: &str| -> Vec<ClusterId> {
        live.table()
            .clusters()
            .iter()
            .filter(|c| live.table().canonical(c).raw_text.starts_with(prefix))
            .map(|c| c.id.clone())
            .collect()
    };
    let e = |e: refspect_core::reference::NormalizerError| e.to_string();
    let arrhenius = live.merge(&find(&live, "ARRHENIUS S, 1896"), chrono_epoch(), "journal variants").map_err(e)?.cluster_id;
    let fourier = live.merge(&find(&live, "FOURIER J"), chrono_epoch(), "").map_err(e)?.cluster_id;
    live.correct_year(&fourier, 1824, chrono_epoch(), "").map_err(e)?;
    let raws: Vec<String> = live.table().get(&arrhenius).unwrap().variants.iter().map(|v| live.table().index().get(*v).raw_text.clone()).collect();
    let parts = live.split(&arrhenius, &[vec![raws[0].clone()], raws[1..].to_vec()], chrono_epoch(), "").map_err(e)?;
    live.merge(&parts, chrono_epoch(), "again").map_err(e)?;
    let before = live_csvs(&live)?;
    save_session(live.session(), &path).map_err(|e| e.to_string())?;

    let analysis = load_golden();
    let loaded = load_session(&path, analysis.fingerprint()).map_err(|e| e.to_string())?;
    let replayed = LiveSession::open(analysis, loaded).map_err(|e| e.to_string())?;
    let after = live_csvs(&replayed)?;
    ensure(before.0 == after.0, || "spectrum CSV differs after replay".into())?;
    ensure(before.1 == after.1, || "cluster CSV differs after replay".into())?;
    let text = String::from_utf8_lossy(&after.0).into_owned();
    ensure(text.contains("\n1896,311,") && text.contains("\n1824,25,"), || "edits missing from the replayed spectrum".into())?;
    Ok(format!("{} ledger entries, spectrum and cluster CSVs bit-identical", replayed.session().ledger.len()))
}

fn vm_hwm_kb() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    line.split_whitespace().nth(1)?.parse().ok()
}

/// Writes a field-tagged export with `n_lines` CR lines: 20 per record,
/// popularity heavy-tailed, most references from recent decades, and some
/// citations spelled differently.
fn write_large_export(path: &std::path::Path, n_lines: usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let n_works = 250_000;
    let mut pool = Vec::with_capacity(n_works);
    for i in 0..n_works {
        let year = if rng.gen_bool(0.2) { rng.gen_range(1700..=1970) } else { rng.gen_range(1971..=2014) };
        let len = rng.gen_range(4..10);
        pool.push(Work {
            author: letters(&mut rng, len),
            year,
            source: format!("{} {}", letters(&mut rng, 5), letters(&mut rng, 4)),
            volume: rng.gen_range(1..400),
            page: i as u32,
        });
    }
    let mut out = std::io::BufWriter::new(std::fs::File::create(path).unwrap());
    writeln!(out, "FN Clarivate Analytics Web of Science\nVR 1.0").unwrap();
    let per_record = 20;
    for r in 0..n_lines.div_ceil(per_record) {
        writeln!(out, "PT J\nDT Article\nPY {}", rng.gen_range(1990..=2015)).unwrap();
        for k in 0..per_record {
            let u: f64 = rng.gen();
            let w = &pool[((u * u * u) * n_works as f64) as usize];
            let raw = w.raw(if rng.gen_bool(0.05) { 1 } else { 0 });
            writeln!(out, "{} {raw}", if k == 0 { "CR" } else { "  " }).unwrap();
        }
        writeln!(out, "NR {per_record}\nUT WOS:{r:012}\nER\n").unwrap();
    }
    writeln!(out, "EF").unwrap();
    out.flush().unwrap();
}

fn throughput() -> Check {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("large.txt");
    write_large_export(&path, 1_000_000);

    let start = Instant::now();
    let (_, ingested) = read_corpus_file(&path).map_err(|e| e.to_string())?;
    ensure(ingested.diagnostics.is_empty(), || format!("{} diagnostics", ingested.diagnostics.len()))?;
    let (corpus, _) = ingested.into_corpus().map_err(|e| e.to_string())?;
    let lines = corpus.num_reference_instances();
    let analysis = Analysis::new(corpus);
    let config = PipelineConfig {
        cutoff_year: Some(1971),
        year_range: Some(YearRange::new(1700, 1970).unwrap()),
        ..PipelineConfig::default()
    };
    let base = analysis.base_view(&config);
    let table = analysis.cluster(&base, &config);
    let derived = analysis.derive(&base, &table, &config, &MarkerSelection::default()).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let hwm = vm_hwm_kb().ok_or("VmHWM unavailable")?;

    ensure(lines == 1_000_000, || format!("generated {lines} CR lines"))?;
    ensure(!derived.spectrum.is_empty(), || "empty spectrum".into())?;
    let detail = format!(
        "{lines} CR lines, {} clusters, {elapsed:.1?}, peak RSS {:.2} GB",
        table.len(),
        hwm as f64 / (1024.0 * 1024.0)
    );
    ensure(elapsed < Duration::from_secs(60), || format!("too slow: {detail}"))?;
    ensure(hwm < 4 * 1024 * 1024, || format!("too much memory: {detail}"))?;
    Ok(detail)
}

async fn api_get(app: &axum::Router, method: Method, uri: &str, body: Option<Value>) -> Value {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req.header("content-type", "application/json").body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    serde_json::from_slice(&bytes).unwrap()
}

fn csv_rows(csv: &str) -> Vec<Vec<i64>> {
    csv.lines().skip(1).map(|l| l.split(',').map(|f| f.parse().unwrap()).collect()).collect()
}

fn json_rows(v: &Value) -> Vec<Vec<i64>> {
    v.as_array()
        .unwrap()
        .iter()
        .map(|p| ["rpy", "ncr", "median5", "deviation"].iter().map(|k| p[*k].as_i64().unwrap()).collect())
        .collect()
}

fn cli_api_equivalence() -> Check {
    let cache = tempfile::tempdir().unwrap();
    let corpus = fixture("golden_corpus.txt");
    let corpus = corpus.to_str().unwrap();
    let cli = |extra: &[&str]| -> Result<String, String> {
        let out = Command::new(env!("CARGO_BIN_EXE_refspect"))
            .args(extra)
            .args(GOLDEN_FLAGS)
            .env("REFSPECT_CACHE_DIR", cache.path())
            .output()
            .map_err(|e| e.to_string())?;
        ensure(out.status.success(), || String::from_utf8_lossy(&out.stderr).into_owned())?;
        Ok(String::from_utf8(out.stdout).unwrap())
    };
    let cli_spectrum = csv_rows(&cli(&["spectrum", "--corpus", corpus])?);
    let cli_co = csv_rows(&cli(&["co", "--corpus", corpus, "--marker", "TYNDALL/1861"])?);

    let rt = tokio::runtime::Runtime::new().unwrap();
    let (api_spectrum, api_co) = rt.block_on(async {
        let state = AppState::open(&fixture("golden_corpus.txt"), None, &golden_config()).unwrap();
        let app = router(state);
        let spectrum = api_get(&app, Method::GET, "/spectrum", None).await;
        let top = api_get(&app, Method::GET, "/years/1861/references?k=1", None).await;
        let id = top[0]["cluster_id"].clone();
        api_get(&app, Method::PUT, "/markers", Some(json!({ "cluster_ids": [id], "mode": "or" }))).await;
        let co = api_get(&app, Method::GET, "/spectrum", None).await;
        (json_rows(&spectrum), json_rows(&co))
    });
    ensure(cli_spectrum == api_spectrum, || "spectrum: CLI and API differ".into())?;
    ensure(cli_co == api_co, || "co: CLI and API differ".into())?;
    ensure(cli_co != cli_spectrum, || "co spectrum equals the full spectrum".into())?;
    Ok(format!("spectrum {} rows, co {} rows, field-for-field equal", cli_spectrum.len(), cli_co.len()))
}

fn main() {
    let checks: &[Criterion] = &[
        ("arrhenius merge gives NCR 311 within 1 s", arrhenius_merge),
        ("spectrum equals brute-force tally on 100 random corpora within 30 s", spectrum_oracle),
        ("median/deviation spot checks", median_spot_checks),
        ("era thresholds retain the oracle cluster set", era_thresholds),
        ("RPYS-CO semantics on 100 random corpora", rpys_co_semantics),
        ("5 planted peaks recovered exactly", peak_recovery),
        ("clustering deterministic over 50 shuffles of 5,000 references", clustering_determinism),
        ("ledger replay reproduces spectrum and cluster CSVs", ledger_replay),
        ("1M CR lines in under 60 s and 4 GB", throughput),
        ("CLI and API agree on spectrum and co", cli_api_equivalence),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail} [{:.1?}]", start.elapsed()),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why} [{:.1?}]", start.elapsed());
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", checks.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
