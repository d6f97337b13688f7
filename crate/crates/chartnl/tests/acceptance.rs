//! End-to-end acceptance checks. Each criterion is verified against an
//! oracle written here from scratch (brute force, full scans, hand-computed
//! values), never against the library's own helpers.
//!
//! Run with `cargo test -p chartnl --test acceptance`; prints one
//! PASS/FAIL line per criterion and exits non-zero if any fails.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use chartnl::io;
use chartnl_core::corpus::pairwise_edit_distance;
use chartnl_core::diversity::{frechet_distance, knn_precision_recall, within_metrics, VectorSet};
use chartnl_core::fielddata::{
    evaluate_aggregation, AggValue, AggregateOp, AggregationOutput, AggregationQuery, DataTable, FieldDataError,
};
use chartnl_core::lexical::{lexicon_stats, vocab_diff, Normalizer};
use chartnl_core::pipeline::{chart_histogram, sample_matched_sets, variant_tag, NlRecord, NlType, Provenance, SampleError};
use chartnl_core::promptforge::{
    build_coding_prompt, build_l1_prompt, build_l2_prompts, build_paraphrase_prompt, build_question_prompt,
    build_utterance_prompts, enumerate_paraphrase_variants, L2Stage, ParaphraseMode, UtteranceStage,
};
use chartnl_core::spec_model::{classify_complexity, parse_spec, structural_profile, ComplexityLevel, Vocabulary};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{Map, Value};

type Check = Result<String, String>;
/// Number, name, check, time budget in seconds.
type Criterion = (u32, &'static str, fn() -> Check, u64);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

// ---------------------------------------------------------------------------
// 1. complexity thresholds

fn flat_spec(keys: usize) -> String {
    let body: Vec<String> = (0..keys).map(|i| format!("\"k{}\":{}", i, i)).collect();
    format!("{{{}}}", body.join(","))
}

fn criterion_1() -> Check {
    let cases = [
        (16, ComplexityLevel::Simple),
        (17, ComplexityLevel::Medium),
        (24, ComplexityLevel::Medium),
        (25, ComplexityLevel::Complex),
        (41, ComplexityLevel::Complex),
        (42, ComplexityLevel::ExtraComplex),
    ];
    for (keys, want) in cases {
        let doc = parse_spec(&flat_spec(keys), "flat").map_err(|e| e.to_string())?;
        let p = structural_profile(&doc, None);
        ensure(p.key_count == keys, || format!("{} keys counted as {}", keys, p.key_count))?;
        let got = classify_complexity(&p);
        ensure(got == want, || format!("{} keys: {:?}, expected {:?}", keys, got, want))?;
    }
    Ok(format!("{} boundary cases", cases.len()))
}

// ---------------------------------------------------------------------------
// 2. structural profile against a naive walker

#[derive(Debug, Default, PartialEq)]
struct NaiveProfile {
    keys: usize,
    excluded: usize,
    depth: usize,
    children: usize,
    internal: usize,
    unique: BTreeSet<String>,
}

fn naive_walk(v: &Value, vocab: Option<&Vocabulary>, acc: &mut NaiveProfile) -> usize {
    match v {
        Value::Array(items) => {
            if !items.is_empty() {
                acc.internal += 1;
                acc.children += items.len();
            }
            let mut deepest = 0;
            for item in items {
                deepest = deepest.max(naive_walk(item, vocab, acc));
            }
            deepest + 1
        }
        Value::Object(map) => {
            let kept: Vec<(&String, &Value)> =
                map.iter().filter(|(k, _)| k.as_str() != "values" && k.as_str() != "datasets").collect();
            if !kept.is_empty() {
                acc.internal += 1;
                acc.children += kept.len();
            }
            let mut deepest = 0;
            for (k, child) in kept {
                if vocab.is_none_or(|voc| voc.contains(k)) {
                    acc.keys += 1;
                    acc.unique.insert(k.clone());
                } else {
                    acc.excluded += 1;
                }
                deepest = deepest.max(naive_walk(child, vocab, acc));
            }
            deepest + 1
        }
        _ => 0,
    }
}

const KEY_POOL: [&str; 14] = [
    "mark", "encoding", "x", "y", "field", "type", "values", "datasets", "data", "layer", "title", "foo", "zzz_custom",
    "color",
];

fn random_value(rng: &mut ChaCha8Rng, depth: usize) -> Value {
    let roll = if depth >= 5 { 0 } else { rng.gen_range(0..10) };
    match roll {
        0..=3 => match rng.gen_range(0..4) {
            0 => Value::from(rng.gen_range(-100..100)),
            1 => Value::from("s"),
            2 => Value::Bool(rng.gen()),
            _ => Value::Null,
        },
        4..=5 => Value::Array((0..rng.gen_range(0..4)).map(|_| random_value(rng, depth + 1)).collect()),
        _ => random_object(rng, depth + 1),
    }
}

fn random_object(rng: &mut ChaCha8Rng, depth: usize) -> Value {
    let mut m = Map::new();
    for _ in 0..rng.gen_range(0..5) {
        let k = KEY_POOL.choose(rng).expect("non-empty pool");
        m.insert(k.to_string(), random_value(rng, depth));
    }
    Value::Object(m)
}

fn compare_profile(text: &str, vocab: Option<&Vocabulary>) -> Result<(), String> {
    let v: Value = serde_json::from_str(text).map_err(|e| e.to_string())?;
    let mut want = NaiveProfile::default();
    want.depth = naive_walk(&v, vocab, &mut want);
    let doc = parse_spec(text, "t").map_err(|e| e.to_string())?;
    let p = structural_profile(&doc, vocab);
    let got = NaiveProfile {
        keys: p.key_count,
        excluded: p.excluded_key_count,
        depth: p.max_depth,
        children: p.child_total,
        internal: p.internal_nodes,
        unique: p.unique_keys.clone(),
    };
    ensure(got == want, || format!("{}: got {:?}, expected {:?}", text, got, want))?;
    let bf = if want.internal == 0 { 0.0 } else { want.children as f64 / want.internal as f64 };
    ensure((p.branching_factor - bf).abs() < 1e-12, || {
        format!("{}: branching {} vs {}", text, p.branching_factor, bf)
    })
}

fn criterion_2() -> Check {
    let vocab = Vocabulary::embedded();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..200 {
        let text = random_object(&mut rng, 0).to_string();
        compare_profile(&text, None)?;
        compare_profile(&text, Some(&vocab))?;
    }
    let mut fixtures_checked = 0;
    let dir = fixtures();
    for name in ["corpus/sales_bar.vl.json", "corpus/temp_line.vl.json", "corpus/cars_concat.vl.json", "eight_keys.vl.json"]
    {
        let text = std::fs::read_to_string(dir.join(name)).map_err(|e| e.to_string())?;
        compare_profile(&text, None)?;
        compare_profile(&text, Some(&vocab))?;
        fixtures_checked += 1;
    }
    let inline = [
        r#"{}"#,
        r#"{"data":{"values":[{"a":1},{"a":2}]},"mark":"bar"}"#,
        r#"{"datasets":{"d":[{"a":1}]},"data":{"name":"d"},"mark":"point"}"#,
        r#"{"layer":[{"mark":"line"},{"mark":{"type":"point","filled":true}}]}"#,
        r#"{"hconcat":[{"vconcat":[{"mark":"bar","encoding":{"x":{"field":"a"}}}]}],"resolve":{}}"#,
        r#"{"params":[{"name":"brush","select":{"type":"interval","encodings":["x"]}}],"mark":"area","myExtra":{"q":[]}}"#,
    ];
    for text in inline {
        compare_profile(text, None)?;
        compare_profile(text, Some(&vocab))?;
        fixtures_checked += 1;
    }
    // Hand-checked anchor: eight keys, depth 3.
    let eight = std::fs::read_to_string(dir.join("eight_keys.vl.json")).map_err(|e| e.to_string())?;
    let p = structural_profile(&parse_spec(&eight, "eight").map_err(|e| e.to_string())?, None);
    ensure(p.key_count == 8, || format!("eight-key spec counted {}", p.key_count))?;
    Ok(format!("200 random trees + {} fixtures, with and without vocabulary", fixtures_checked))
}

// ---------------------------------------------------------------------------
// 3. edit distance

/// Serializes with keys in reverse order and a given indent, so the text
/// differs from any canonical form while the content is identical.
fn reordered(v: &Value, indent: usize, level: usize) -> String {
    let pad = |l: usize| " ".repeat(indent * l);
    match v {
        Value::Object(m) => {
            let parts: Vec<String> = m
                .iter()
                .rev()
                .map(|(k, c)| format!("\n{}{}: {}", pad(level + 1), Value::from(k.as_str()), reordered(c, indent, level + 1)))
                .collect();
            format!("{{{}\n{}}}", parts.join(","), pad(level))
        }
        Value::Array(items) => {
            let parts: Vec<String> = items.iter().map(|c| reordered(c, indent, level + 1)).collect();
            format!("[ {} ]", parts.join(" ,\t"))
        }
        other => other.to_string(),
    }
}

fn levenshtein_oracle(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut dp = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in dp.iter_mut().enumerate() {
        row[0] = i;
    }
    dp[0] = (0..=b.len()).collect();
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let sub = dp[i - 1][j - 1] + usize::from(a[i - 1] != b[j - 1]);
            dp[i][j] = sub.min(dp[i - 1][j] + 1).min(dp[i][j - 1] + 1);
        }
    }
    dp[a.len()][b.len()]
}

fn edit(a: &str, b: &str) -> Result<usize, String> {
    let da = parse_spec(a, "a").map_err(|e| e.to_string())?;
    let db = parse_spec(b, "b").map_err(|e| e.to_string())?;
    pairwise_edit_distance(&da, &db, usize::MAX).map_err(|e| e.to_string())
}

fn criterion_3() -> Check {
    let dir = fixtures();
    for name in ["corpus/sales_bar.vl.json", "corpus/temp_line.vl.json", "corpus/cars_concat.vl.json", "eight_keys.vl.json"]
    {
        let text = std::fs::read_to_string(dir.join(name)).map_err(|e| e.to_string())?;
        let v: Value = serde_json::from_str(&text).map_err(|e| e.to_string())?;
        for indent in [0, 3, 8] {
            let copy = reordered(&v, indent, 0);
            let d = edit(&text, &copy)?;
            ensure(d == 0, || format!("{} reordered (indent {}) at distance {}", name, indent, d))?;
        }
    }
    // Hand-computed over the canonical forms (sorted keys, scalars as "",
    // embedded data dropped, no whitespace).
    let hand = [
        (r#"{"mark":"bar"}"#, r#"{"mark":"line"}"#, 0),
        (r#"{"a":1}"#, r#"{"b":1}"#, 1),
        (r#"{"a":1}"#, r#"{"a":[1]}"#, 2),
        (r#"{}"#, r#"{"a":1}"#, 6),
        (r#"{"ab":1,"c":2}"#, r#"{"c":2}"#, 8),
        (r#"{"x":{"values":[1,2,3]}}"#, r#"{"x":{}}"#, 0),
    ];
    for (a, b, want) in hand {
        let got = edit(a, b)?;
        ensure(got == want, || format!("{} vs {}: {} (expected {})", a, b, got, want))?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..1000 {
        let t: Vec<String> = (0..3).map(|_| random_object(&mut rng, 2).to_string()).collect();
        let ab = edit(&t[0], &t[1])?;
        let ba = edit(&t[1], &t[0])?;
        let bc = edit(&t[1], &t[2])?;
        let ac = edit(&t[0], &t[2])?;
        ensure(ab == ba, || format!("asymmetric: {} vs {}", ab, ba))?;
        ensure(ac <= ab + bc, || format!("triangle violated: {} > {} + {}", ac, ab, bc))?;
    }
    // Already canonical (sorted keys, empty scalars): the distance is a plain
    // Levenshtein over the text.
    let a = r#"{"encoding":{"x":""},"mark":""}"#;
    let b = r#"{"encoding":{"color":"","y":""}}"#;
    let want = levenshtein_oracle(a, b);
    let got = edit(a, b)?;
    ensure(got == want, || format!("dp oracle {} vs {}", want, got))?;
    Ok(format!("12 reorderings, {} hand pairs, 1000 triples", hand.len()))
}

// ---------------------------------------------------------------------------
// 4. within-set metrics by brute force

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Minimum spanning tree weight by enumerating every labelled tree through
/// its Prüfer sequence.
fn mst_bruteforce(p: &[Vec<f64>]) -> f64 {
    let n = p.len();
    if n == 2 {
        return dist(&p[0], &p[1]);
    }
    let total = n.pow((n - 2) as u32);
    let mut best = f64::INFINITY;
    for code in 0..total {
        let mut seq = Vec::with_capacity(n - 2);
        let mut c = code;
        for _ in 0..n - 2 {
            seq.push(c % n);
            c /= n;
        }
        let mut degree = vec![1usize; n];
        for &s in &seq {
            degree[s] += 1;
        }
        let mut w = 0.0;
        for &s in &seq {
            let leaf = (0..n).find(|&i| degree[i] == 1).expect("a leaf exists");
            w += dist(&p[leaf], &p[s]);
            degree[leaf] -= 1;
            degree[s] -= 1;
        }
        let rest: Vec<usize> = (0..n).filter(|&i| degree[i] == 1).collect();
        w += dist(&p[rest[0]], &p[rest[1]]);
        best = best.min(w);
    }
    best
}

struct Brute {
    remote_clique: f64,
    chamfer: f64,
    mst: f64,
    span: f64,
    sparseness: f64,
}

fn brute_within(p: &[Vec<f64>], percentile: f64) -> Brute {
    let n = p.len();
    let mut rc = 0.0;
    let mut ch = 0.0;
    let mut sums = vec![0.0; n];
    for i in 0..n {
        let mut s = 0.0;
        let mut m = f64::INFINITY;
        for j in 0..n {
            if i != j {
                let d = dist(&p[i], &p[j]);
                s += d;
                m = m.min(d);
            }
        }
        sums[i] = s;
        rc += s / (n - 1) as f64;
        ch += m;
    }
    let dim = p[0].len();
    let centroid: Vec<f64> = (0..dim).map(|k| p.iter().map(|x| x[k]).sum::<f64>() / n as f64).collect();
    let mut radii: Vec<f64> = p.iter().map(|x| dist(x, &centroid)).collect();
    radii.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let rank = ((percentile / 100.0 * n as f64).ceil() as usize).max(1).min(n);
    let min_sum = sums.iter().cloned().fold(f64::INFINITY, f64::min);
    Brute {
        remote_clique: rc / n as f64,
        chamfer: ch / n as f64,
        mst: mst_bruteforce(p),
        span: radii[rank - 1],
        sparseness: min_sum / n as f64,
    }
}

fn criterion_4() -> Check {
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-9;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for trial in 0..1000 {
        let n = rng.gen_range(2..=6);
        let d = rng.gen_range(1..=4);
        let pts: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let percentile = [50.0, 90.0, 100.0][trial % 3];
        let got = within_metrics(&VectorSet::new(d, pts.clone()).map_err(|e| e.to_string())?, percentile, 10)
            .map_err(|e| e.to_string())?;
        let want = brute_within(&pts, percentile);
        let pairs = [
            ("remote_clique", got.remote_clique, want.remote_clique),
            ("chamfer", got.chamfer, want.chamfer),
            ("mst", got.mst, want.mst),
            ("span", got.span, want.span),
            ("sparseness", got.sparseness, want.sparseness),
        ];
        for (name, g, w) in pairs {
            ensure(close(g, w), || format!("trial {} {}: {} vs {}", trial, name, g, w))?;
        }
        ensure(got.entropy >= -1e-12 && got.entropy <= (n as f64).ln() + 1e-9, || {
            format!("entropy {} outside [0, ln {}]", got.entropy, n)
        })?;
    }
    let h = 3f64.sqrt() / 2.0;
    let tri = within_metrics(
        &VectorSet::from_vectors(vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.5, h]]).map_err(|e| e.to_string())?,
        90.0,
        10,
    )
    .map_err(|e| e.to_string())?;
    for (name, g, w) in [
        ("remote_clique", tri.remote_clique, 1.0),
        ("chamfer", tri.chamfer, 1.0),
        ("mst", tri.mst, 2.0),
        ("sparseness", tri.sparseness, 2.0 / 3.0),
        ("span", tri.span, 1.0 / 3f64.sqrt()),
    ] {
        ensure(close(g, w), || format!("triangle {}: {} vs {}", name, g, w))?;
    }
    let line = within_metrics(
        &VectorSet::from_vectors(vec![vec![0.0], vec![1.0], vec![3.0]]).map_err(|e| e.to_string())?,
        90.0,
        10,
    )
    .map_err(|e| e.to_string())?;
    ensure(close(line.mst, 3.0), || format!("collinear mst {}", line.mst))?;
    ensure(close(line.chamfer, 4.0 / 3.0), || format!("collinear chamfer {}", line.chamfer))?;
    Ok("1000 random sets within 1e-9, triangle and collinear anchors".into())
}

// ---------------------------------------------------------------------------
// 5. cross-set metrics

/// Standard normal draws by Box–Muller.
fn gaussian_set(rng: &mut ChaCha8Rng, n: usize, mean: &[f64]) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            mean.iter()
                .map(|m| {
                    let u1: f64 = 1.0 - rng.gen::<f64>();
                    let u2: f64 = rng.gen();
                    m + (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
                })
                .collect()
        })
        .collect()
}

fn criterion_5() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x = VectorSet::new(4, gaussian_set(&mut rng, 2000, &[0.0; 4])).map_err(|e| e.to_string())?;
    let self_fd = frechet_distance(&x, &x).map_err(|e| e.to_string())?;
    ensure(self_fd <= 1e-6, || format!("FD(X,X) = {}", self_fd))?;
    let delta = [1.0, -1.0, 0.5, 1.5];
    let expected: f64 = delta.iter().map(|d| d * d).sum();
    let y = VectorSet::new(4, gaussian_set(&mut rng, 2000, &delta)).map_err(|e| e.to_string())?;
    let fd = frechet_distance(&x, &y).map_err(|e| e.to_string())?;
    ensure((fd - expected).abs() <= 0.05 * expected, || format!("shifted FD {} vs {}", fd, expected))?;

    let small = VectorSet::new(3, gaussian_set(&mut rng, 200, &[0.0; 3])).map_err(|e| e.to_string())?;
    let (p, r) = knn_precision_recall(&small, &small, 3).map_err(|e| e.to_string())?;
    ensure(p == 1.0 && r == 1.0, || format!("P/R(a,a) = ({}, {})", p, r))?;
    let far = VectorSet::new(3, gaussian_set(&mut rng, 200, &[100.0; 3])).map_err(|e| e.to_string())?;
    let (p, r) = knn_precision_recall(&small, &far, 3).map_err(|e| e.to_string())?;
    ensure(p == 0.0 && r == 0.0, || format!("disjoint P/R = ({}, {})", p, r))?;
    Ok(format!("FD(X,X)={:.2e}, shifted FD {:.4} vs ‖δ‖²={}", self_fd, fd, expected))
}

// ---------------------------------------------------------------------------
// 6. prompt fidelity

enum Piece {
    Literal(String),
    Slot(String),
}

fn template_pieces(golden: &str) -> Vec<Piece> {
    let mut out = Vec::new();
    let mut rest = golden;
    loop {
        let slot = rest.find('{').and_then(|open| {
            let close = rest[open..].find('}')? + open;
            let name = &rest[open + 1..close];
            let ok = !name.is_empty() && name.chars().all(|c| c.is_ascii_alphanumeric() || " _-".contains(c));
            ok.then_some((open, close, name))
        });
        match slot {
            Some((open, close, name)) => {
                out.push(Piece::Literal(rest[..open].to_string()));
                out.push(Piece::Slot(name.to_string()));
                rest = &rest[close + 1..];
            }
            None => {
                out.push(Piece::Literal(rest.to_string()));
                return out;
            }
        }
    }
}

/// Walks the rendered prompt against the golden template: literal text must
/// match byte for byte; each slot must hold exactly the expected value.
fn diff_against_golden(golden: &str, rendered: &str, subs: &BTreeMap<&str, String>) -> Result<(), String> {
    let mut pos = 0;
    for piece in template_pieces(golden) {
        match piece {
            Piece::Literal(lit) => {
                ensure(rendered[pos..].starts_with(&lit), || {
                    let got: String = rendered[pos..].chars().take(60).collect();
                    let want: String = lit.chars().take(60).collect();
                    format!("literal mismatch at byte {}: got {:?}, expected {:?}", pos, got, want)
                })?;
                pos += lit.len();
            }
            Piece::Slot(name) => {
                let value = subs.get(name.as_str()).ok_or_else(|| format!("no value for slot {{{}}}", name))?;
                ensure(rendered[pos..].starts_with(value.as_str()), || format!("slot {{{}}} not filled as expected", name))?;
                pos += value.len();
            }
        }
    }
    ensure(pos == rendered.len(), || format!("{} trailing bytes", rendered.len() - pos))
}

fn golden(name: &str) -> Result<String, String> {
    std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name))
        .map_err(|e| format!("{}: {}", name, e))
}

fn criterion_6() -> Check {
    let vl = r#"{"data":{"url":"c_data_0.csv"},"encoding":{"x":{"field":"a","type":"nominal"}},"mark":"bar"}"#;
    let ftt = "- a (nominal): x, y";
    let s = |pairs: &[(&'static str, &str)]| -> BTreeMap<&'static str, String> {
        pairs.iter().map(|(k, v)| (*k, v.to_string())).collect()
    };
    let mut checked = 0;
    let mut check = |file: &str, rendered: &str, subs: BTreeMap<&str, String>| -> Result<(), String> {
        diff_against_golden(&golden(file)?, rendered, &subs).map_err(|e| format!("{}: {}", file, e))?;
        checked += 1;
        Ok(())
    };
    let e = |e: chartnl_core::promptforge::PromptError| e.to_string();

    let l1 = build_l1_prompt(vl, ftt).map_err(e)?;
    check("l1.txt", &l1.text, s(&[("vl", vl), ("ftt_str", ftt)]))?;
    let feat = build_l2_prompts(vl, ftt, L2Stage::Feature).map_err(e)?;
    check("l2_feature.txt", &feat.text, s(&[("vl", vl)]))?;
    let q = "What is the maximum of a?";
    let ans = build_l2_prompts(vl, ftt, L2Stage::Answer { question: q }).map_err(e)?;
    check("l2_answer.txt", &ans.text, s(&[("ftt_str", ftt), ("prompt", q)]))?;
    let info = "The maximum of a is 3.";
    let cap = build_l2_prompts(vl, ftt, L2Stage::Caption { info }).map_err(e)?;
    check("l2_caption.txt", &cap.text, s(&[("info", info), ("ftt_str", ftt)]))?;
    let ui = build_utterance_prompts(vl, ftt, UtteranceStage::Instructions).map_err(e)?;
    check("utterance_instructions.txt", &ui.text, s(&[("vl", vl), ("ftt_str", ftt)]))?;
    let concat = "Make a bar chart. Put a on x.";
    let uc = build_utterance_prompts(vl, ftt, UtteranceStage::Combine { inst_first_concat: concat }).map_err(e)?;
    check("utterance_combine.txt", &uc.text, s(&[("inst_first_concat", concat)]))?;
    let qp = build_question_prompt(vl).map_err(e)?;
    check("question.txt", &qp.text, s(&[("vl", vl)]))?;
    let sent = "Show sales by region.";
    let cp = build_coding_prompt(sent).map_err(e)?;
    check("coding.txt", &cp.text, s(&[("sent", sent)]))?;

    for spec in enumerate_paraphrase_variants(ParaphraseMode::OneAxis)
        .into_iter()
        .chain(enumerate_paraphrase_variants(ParaphraseMode::TwoAxes))
    {
        let p = build_paraphrase_prompt(sent, &spec).map_err(e)?;
        let axes: Vec<_> = spec.axes.iter().map(|a| a.language_axis()).collect();
        let scores: Vec<String> = spec.scores.iter().map(|x| x.to_string()).collect();
        if axes.len() == 1 {
            check(
                "paraphrase_one_axis.txt",
                &p.text,
                s(&[
                    ("Axis", &axes[0].description),
                    ("Direction-1", &axes[0].direction_low),
                    ("Direction-2", &axes[0].direction_high),
                    ("Example Sentence", sent),
                    ("Score", &scores[0]),
                ]),
            )?;
        } else {
            check(
                "paraphrase_two_axes.txt",
                &p.text,
                s(&[
                    ("Axis-1", &axes[0].description),
                    ("Axis-2", &axes[1].description),
                    ("Direction-1-1", &axes[0].direction_low),
                    ("Direction-1-2", &axes[0].direction_high),
                    ("Direction-2-1", &axes[1].direction_low),
                    ("Direction-2-2", &axes[1].direction_high),
                    ("Example Sentence", sent),
                    ("Score-A", &scores[0]),
                    ("Score-B", &scores[1]),
                ]),
            )?;
        }
    }

    let anchors = [
        (&l1.text, "Let's generate a level 1 NL description step by step."),
        (&ans.text, "Do not draw any charts to answer the question."),
        (
            &cp.text,
            "Let's perform a thematic analysis in the field of human-computer interaction. Generate characteristics of languages leveraged in the given sentence. The total number is five and each of them is separated by semicolons. Do not add numbering or any explanations.",
        ),
    ];
    for (text, line) in anchors {
        ensure(text.lines().any(|l| l == line), || format!("anchor line missing: {}", line))?;
    }
    Ok(format!("{} rendered prompts byte-identical outside slots", checked))
}

// ---------------------------------------------------------------------------
// 7. paraphrase variant enumeration

fn criterion_7() -> Check {
    let one = enumerate_paraphrase_variants(ParaphraseMode::OneAxis);
    let two = enumerate_paraphrase_variants(ParaphraseMode::TwoAxes);
    ensure(one.len() == 20, || format!("one-axis variants: {}", one.len()))?;
    ensure(two.len() == 150, || format!("two-axis variants: {}", two.len()))?;
    for (label, set) in [("one", &one), ("two", &two)] {
        let tags: BTreeSet<String> = set.iter().map(variant_tag).collect();
        ensure(tags.len() == set.len(), || format!("{}-axis tags not distinct", label))?;
        let prompts: BTreeSet<String> = set
            .iter()
            .map(|v| build_paraphrase_prompt("Show sales.", v).map(|p| p.text).unwrap_or_default())
            .collect();
        ensure(prompts.len() == set.len(), || format!("{}-axis prompts not distinct", label))?;
    }
    // Every axis at every score of 1..=5.
    let pairs: BTreeSet<(String, u8)> = one.iter().map(|v| (format!("{:?}", v.axes[0]), v.scores[0])).collect();
    ensure(pairs.len() == 20, || "one-axis (axis, score) pairs not distinct".into())?;
    for v in &two {
        ensure(v.axes.len() == 2 && v.axes[0] != v.axes[1], || format!("bad two-axis variant {:?}", v))?;
    }
    Ok("20 one-axis and 150 two-axis variants, all distinct".into())
}

// ---------------------------------------------------------------------------
// 8. generation and matched sampling

fn run_cli(args: &[&str]) -> Result<String, String> {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut argv = vec!["chartnl"];
    argv.extend_from_slice(args);
    let code = chartnl::cli::run_with(argv, &mut out, &mut err);
    if code != 0 {
        return Err(format!("exit {}: {}", code, String::from_utf8_lossy(&err)));
    }
    Ok(String::from_utf8_lossy(&out).into_owned())
}

fn synthetic(chart: &str, i: usize) -> NlRecord {
    NlRecord {
        id: format!("{}-p{}", chart, i),
        chart_id: chart.to_string(),
        nl_type: NlType::Utterance,
        subtype: None,
        text: format!("paraphrase {} of {}", i, chart),
        provenance: Provenance::Generated,
        model_name: "m".into(),
        created_at: "1970-01-01T00:00:00Z".into(),
        metadata: BTreeMap::new(),
    }
}

fn criterion_8() -> Check {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let manifest = fixtures().join("corpus/manifest.jsonl");
    let out = tmp.path().join("generated.jsonl");
    run_cli(&["generate", manifest.to_str().unwrap(), "--mock", "--out", out.to_str().unwrap()])?;
    let data = io::read_dataset(&out).map_err(|e| e.to_string())?.file;
    let entries = io::read_manifest(&manifest).map_err(|e| e.to_string())?;
    let mut per_chart: BTreeMap<&str, Vec<&NlRecord>> = BTreeMap::new();
    for r in &data.records {
        per_chart.entry(r.chart_id.as_str()).or_default().push(r);
    }
    ensure(per_chart.len() == entries.len(), || format!("{} charts with records", per_chart.len()))?;
    for e in &entries {
        let recs = per_chart.get(e.id.as_str()).cloned().unwrap_or_default();
        ensure(recs.len() == 10, || format!("{}: {} records", e.id, recs.len()))?;
        let count = |t: NlType| recs.iter().filter(|r| r.nl_type == t).count();
        let shape = (count(NlType::CaptionL1), count(NlType::CaptionL2), count(NlType::Utterance), count(NlType::Question));
        ensure(shape == (1, 1, 3, 5), || format!("{}: type counts {:?}", e.id, shape))?;
        let subtypes: BTreeSet<&str> = recs.iter().filter_map(|r| r.subtype.map(|s| s.name())).collect();
        ensure(subtypes.len() == 8, || format!("{}: subtypes {:?}", e.id, subtypes))?;
    }

    // Pool: four paraphrases per generated record; reference: the
    // generated records themselves (10 per chart).
    let mut pool = Vec::new();
    for r in &data.records {
        for i in 0..4 {
            let mut p = r.clone();
            p.id = format!("{}~{}", r.id, i);
            p.text = format!("{} (variant {})", r.text, i);
            pool.push(p);
        }
    }
    let reference = chart_histogram(&data.records);
    let sets = sample_matched_sets(&pool, &reference, 5, 42).map_err(|e| e.to_string())?;
    ensure(sets.len() == 5, || format!("{} sets", sets.len()))?;
    for (k, set) in sets.iter().enumerate() {
        let mut want: BTreeMap<String, usize> = BTreeMap::new();
        for r in &data.records {
            *want.entry(r.chart_id.clone()).or_default() += 1;
        }
        let mut got: BTreeMap<String, usize> = BTreeMap::new();
        for r in set {
            *got.entry(r.chart_id.clone()).or_default() += 1;
        }
        ensure(got == want, || format!("set {} histogram {:?} vs {:?}", k, got, want))?;
        let ids: BTreeSet<&str> = set.iter().map(|r| r.id.as_str()).collect();
        ensure(ids.len() == set.len(), || format!("set {} draws a record twice", k))?;
    }
    let again = sample_matched_sets(&pool, &reference, 5, 42).map_err(|e| e.to_string())?;
    ensure(again == sets, || "same seed gave different sets".into())?;

    let small: Vec<NlRecord> = (0..20).map(|i| synthetic("c", i)).collect();
    match sample_matched_sets(&small, &[("c".to_string(), 30)], 1, 0) {
        Err(SampleError::PoolExhausted { needed: 30, available: 20, .. }) => {}
        other => return Err(format!("expected pool exhaustion, got {:?}", other.map(|s| s.len()))),
    }

    // The CLI path reproduces the same histogram on disk.
    let pool_path = tmp.path().join("pool.jsonl");
    io::write_dataset(&pool_path, &chartnl_core::pipeline::DatasetFile { header: data.header.clone(), records: pool }, &BTreeMap::new())
        .map_err(|e| e.to_string())?;
    let sets_dir = tmp.path().join("sets");
    run_cli(&["match-sample", pool_path.to_str().unwrap(), out.to_str().unwrap(), "--sets", "2", "--out", sets_dir.to_str().unwrap()])?;
    for k in 1..=2 {
        let set = io::read_dataset(&sets_dir.join(format!("set_{}.jsonl", k))).map_err(|e| e.to_string())?.file;
        let mut got = chart_histogram(&set.records);
        let mut want = reference.clone();
        got.sort();
        want.sort();
        ensure(got == want, || format!("set_{}.jsonl histogram {:?}", k, got))?;
    }
    Ok(format!("{} charts × 10 records; 5 matched sets; exhaustion detected", entries.len()))
}

// ---------------------------------------------------------------------------
// 9. aggregation against a full scan

fn oracle_number(cell: &str) -> Option<f64> {
    let t = cell.trim();
    if t.is_empty() || t == "n/a" {
        return None;
    }
    t.parse::<f64>().ok()
}

fn oracle_is_quantitative(table: &[Vec<String>], col: usize) -> bool {
    let non_empty: Vec<&String> = table.iter().map(|r| &r[col]).filter(|c| !c.trim().is_empty()).collect();
    if non_empty.is_empty() {
        return false;
    }
    let numeric = non_empty.iter().filter(|c| oracle_number(c).is_some()).count();
    numeric as f64 / non_empty.len() as f64 >= 0.95
}

#[derive(Debug, PartialEq)]
enum Expect {
    TypeError,
    Empty,
    Scalar(AggValue),
    Groups(Vec<(String, AggValue)>),
}

fn oracle_value(op: AggregateOp, cells: &[&str]) -> Option<AggValue> {
    if op == AggregateOp::Count {
        return Some(AggValue::Int(cells.iter().filter(|c| !c.trim().is_empty()).count() as i128));
    }
    let nums: Vec<&str> = cells.iter().copied().filter(|c| oracle_number(c).is_some()).collect();
    if nums.is_empty() {
        return None;
    }
    let ints: Option<Vec<i128>> = nums.iter().map(|c| c.trim().parse::<i128>().ok()).collect();
    if let Some(ints) = ints {
        let max = *ints.iter().max().unwrap();
        let min = *ints.iter().min().unwrap();
        let sum: i128 = ints.iter().sum();
        return Some(match op {
            AggregateOp::Max => AggValue::Int(max),
            AggregateOp::Min => AggValue::Int(min),
            AggregateOp::Sum => AggValue::Int(sum),
            AggregateOp::Difference => AggValue::Int(max - min),
            AggregateOp::Mean => AggValue::Float(sum as f64 / ints.len() as f64),
            AggregateOp::Count => unreachable!(),
        });
    }
    let xs: Vec<f64> = nums.iter().map(|c| oracle_number(c).unwrap()).collect();
    let max = xs.iter().cloned().fold(f64::MIN, f64::max);
    let min = xs.iter().cloned().fold(f64::MAX, f64::min);
    let sum: f64 = xs.iter().sum();
    Some(AggValue::Float(match op {
        AggregateOp::Max => max,
        AggregateOp::Min => min,
        AggregateOp::Sum => sum,
        AggregateOp::Difference => max - min,
        AggregateOp::Mean => sum / xs.len() as f64,
        AggregateOp::Count => unreachable!(),
    }))
}

fn full_scan(names: &[&str], rows: &[Vec<String>], q: &AggregationQuery) -> Expect {
    let col = |n: &str| names.iter().position(|x| *x == n).expect("known column");
    let target = col(&q.field);
    if q.op != AggregateOp::Count && !oracle_is_quantitative(rows, target) {
        return Expect::TypeError;
    }
    let kept: Vec<&Vec<String>> = rows
        .iter()
        .filter(|r| q.filter.as_ref().is_none_or(|(f, v)| r[col(f)].trim() == v.trim()))
        .collect();
    match &q.group_by {
        None => {
            let cells: Vec<&str> = kept.iter().map(|r| r[target].as_str()).collect();
            match oracle_value(q.op, &cells) {
                Some(v) => Expect::Scalar(v),
                None => Expect::Empty,
            }
        }
        Some(g) => {
            let gi = col(g);
            let mut order: Vec<String> = Vec::new();
            for r in &kept {
                let k = r[gi].trim().to_string();
                if !order.contains(&k) {
                    order.push(k);
                }
            }
            let groups: Vec<(String, AggValue)> = order
                .into_iter()
                .filter_map(|k| {
                    let cells: Vec<&str> =
                        kept.iter().filter(|r| r[gi].trim() == k).map(|r| r[target].as_str()).collect();
                    oracle_value(q.op, &cells).map(|v| (k, v))
                })
                .collect();
            if groups.is_empty() && q.op != AggregateOp::Count {
                Expect::Empty
            } else {
                Expect::Groups(groups)
            }
        }
    }
}

fn same_value(a: AggValue, b: AggValue) -> bool {
    match (a, b) {
        (AggValue::Int(x), AggValue::Int(y)) => x == y,
        (AggValue::Float(x), AggValue::Float(y)) => (x - y).abs() <= 1e-9,
        _ => false,
    }
}

fn random_table(rng: &mut ChaCha8Rng) -> (Vec<&'static str>, Vec<Vec<String>>) {
    let names = vec!["g", "h", "i", "f", "m"];
    let rows = rng.gen_range(1..40);
    let junk_rate = if rng.gen_bool(0.3) { 0.08 } else { 0.0 };
    let cell = |rng: &mut ChaCha8Rng, v: String| -> String {
        if rng.gen_bool(0.1) {
            String::new()
        } else if rng.gen_bool(junk_rate) {
            "n/a".into()
        } else {
            v
        }
    };
    let data = (0..rows)
        .map(|_| {
            let g = ["A", "B", "C", " B"][rng.gen_range(0..4)].to_string();
            let h = ["x", "y"][rng.gen_range(0..2)].to_string();
            let i = rng.gen_range(-1_000_000i64..1_000_000).to_string();
            let f = format!("{:.3}", rng.gen_range(-100.0..100.0));
            let m = if rng.gen_bool(0.8) { rng.gen_range(0..50).to_string() } else { format!("{:.1}", rng.gen_range(0.0..50.0)) };
            vec![g, h, cell(rng, i), cell(rng, f), cell(rng, m)]
        })
        .collect();
    (names, data)
}

fn criterion_9() -> Check {
    let ops = [
        AggregateOp::Max,
        AggregateOp::Min,
        AggregateOp::Sum,
        AggregateOp::Mean,
        AggregateOp::Count,
        AggregateOp::Difference,
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut tallies = BTreeMap::new();
    for trial in 0..500 {
        let (names, rows) = random_table(&mut rng);
        let table = DataTable::new(names.iter().map(|s| s.to_string()).collect(), rows.clone()).map_err(|e| e.to_string())?;
        let q = AggregationQuery {
            op: ops[rng.gen_range(0..ops.len())],
            field: ["i", "f", "m", "i", "f", "m", "g"][rng.gen_range(0..7)].to_string(),
            group_by: [None, Some("g".to_string()), Some("h".to_string())][rng.gen_range(0..3)].clone(),
            filter: if rng.gen_bool(0.3) { Some(("h".to_string(), "x".to_string())) } else { None },
        };
        let want = full_scan(&names, &rows, &q);
        let got = evaluate_aggregation(&table, &q);
        let ok = match (&want, &got) {
            (Expect::TypeError, Err(FieldDataError::TypeError { .. })) => true,
            (Expect::Empty, Err(FieldDataError::EmptyInput(_))) => true,
            (Expect::Scalar(w), Ok(r)) => matches!(r.output, AggregationOutput::Scalar(g) if same_value(g, *w)),
            (Expect::Groups(w), Ok(r)) => match &r.output {
                AggregationOutput::Groups(g) => {
                    g.len() == w.len() && g.iter().zip(w).all(|((ka, va), (kb, vb))| ka == kb && same_value(*va, *vb))
                }
                _ => false,
            },
            _ => false,
        };
        ensure(ok, || format!("trial {} {:?}: expected {:?}, got {:?}", trial, q, want, got))?;
        let kind = match want {
            Expect::TypeError => "type_error",
            Expect::Empty => "empty",
            Expect::Scalar(_) => "scalar",
            Expect::Groups(_) => "groups",
        };
        *tallies.entry(kind).or_insert(0usize) += 1;
    }
    Ok(format!("500 queries {:?}", tallies))
}

// ---------------------------------------------------------------------------
// 10. lexical normalization

const WORDS: [&str; 40] = [
    "The", "charts", "are", "showing", "values", "Boxes", "matches", "stopped", "categories", "cities", "plotted",
    "children", "drew", "axes", "It's", "using", "data", "hoping", "created", "based", "bus", "status", "passes",
    "Temperatures", "2020", "highest", "for", "each", "month", "filled", "dots", "a", "of", "series", "species",
    "indices", "U.S.", "café", "naïve", "running",
];

fn criterion_10() -> Check {
    let n = Normalizer::embedded();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut corpus_a = Vec::new();
    let mut corpus_b = Vec::new();
    for i in 0..1000 {
        let len = rng.gen_range(1..12);
        let mut s: Vec<String> = (0..len).map(|_| WORDS.choose(&mut rng).unwrap().to_string()).collect();
        if rng.gen_bool(0.5) {
            s.push(".".into());
        }
        let text = s.join(if rng.gen_bool(0.5) { " " } else { ", " });
        let once = n.normalize(&text);
        let twice = n.normalize(&once.join(" "));
        ensure(once == twice, || format!("not idempotent: {:?} -> {:?} -> {:?}", text, once, twice))?;
        if i % 2 == 0 { corpus_a.push(once) } else { corpus_b.push(once) }
    }
    let golden: [(&str, &[&str]); 10] = [
        ("The bar chart shows sales by region.", &["bar", "chart", "show", "sale", "region"]),
        ("Boxes and matches were stopping quickly.", &["box", "match", "stop", "quickly"]),
        ("Categories of cities are plotted.", &["category", "city", "plot"]),
        ("Children drew the axes.", &["child", "draw", "axis"]),
        ("It's using U.S. data.", &["use", "u.s", "data"]),
        ("Hoping, creating and based.", &["hope", "create", "base"]),
        ("The bus passes this status.", &["bus", "pass", "status"]),
        ("Temperatures rose in 2020", &["temperature", "rose", "2020"]),
        ("Showing the highest values for each month.", &["show", "highest", "value", "month"]),
        ("Fabricate a line diagram with filled dots", &["fabricate", "line", "diagram", "fill", "dot"]),
    ];
    for (text, want) in golden {
        let got = n.normalize(text);
        ensure(got == want, || format!("{:?}: {:?}, expected {:?}", text, got, want))?;
    }
    let a = lexicon_stats(&corpus_a);
    let b = lexicon_stats(&corpus_b);
    let d = vocab_diff(&a, &b);
    let keys_a: BTreeSet<String> = a.frequency.keys().cloned().collect();
    let keys_b: BTreeSet<String> = b.frequency.keys().cloned().collect();
    let a_side: BTreeSet<String> = d.only_in_a.union(&d.shared).cloned().collect();
    let b_side: BTreeSet<String> = d.only_in_b.union(&d.shared).cloned().collect();
    ensure(a_side == keys_a && b_side == keys_b, || "vocab_diff does not cover both vocabularies".into())?;
    ensure(d.only_in_a.is_disjoint(&d.shared) && d.only_in_b.is_disjoint(&d.shared) && d.only_in_a.is_disjoint(&d.only_in_b), || {
        "vocab_diff parts overlap".into()
    })?;
    let total: usize = corpus_a.iter().map(Vec::len).sum();
    ensure(a.total_tokens == total, || format!("total tokens {} vs {}", a.total_tokens, total))?;
    Ok("1000 idempotent sentences, 10 golden token lists, vocabulary partition".into())
}

// ---------------------------------------------------------------------------

fn main() {
    let criteria: [Criterion; 10] = [
        (1, "complexity thresholds", criterion_1, 10),
        (2, "structural profile", criterion_2, 60),
        (3, "edit distance", criterion_3, 120),
        (4, "within-set metrics", criterion_4, 120),
        (5, "cross-set metrics", criterion_5, 120),
        (6, "prompt fidelity", criterion_6, 10),
        (7, "paraphrase variants", criterion_7, 10),
        (8, "generation and matched sampling", criterion_8, 60),
        (9, "aggregation queries", criterion_9, 60),
        (10, "lexical normalization", criterion_10, 60),
    ];
    let mut failures = 0;
    for (n, name, f, budget) in criteria {
        let start = Instant::now();
        let result = f();
        let elapsed = start.elapsed();
        let over = elapsed > Duration::from_secs(budget);
        let (status, detail) = match (&result, over) {
            (Ok(d), false) => ("PASS", d.clone()),
            (Ok(d), true) => ("FAIL", format!("over time budget; {}", d)),
            (Err(e), _) => ("FAIL", e.clone()),
        };
        if status == "FAIL" {
            failures += 1;
        }
        println!("criterion {} {}: {} ({:.2}s / {}s) {}", n, name, status, elapsed.as_secs_f64(), budget, detail);
    }
    if failures > 0 {
        eprintln!("{} criteria failed", failures);
        std::process::exit(1);
    }
}
