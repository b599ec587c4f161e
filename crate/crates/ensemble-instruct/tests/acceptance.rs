//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Criterion 1 needs the published 175-task seed file, which is not vendored.
//! Point `ENSEMBLE_SEED_TASKS` at it or place it at `data/seed_tasks.jsonl` in
//! the workspace root. Without it the criterion is reported as FAIL with the
//! reason, but does not fail the run.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use ensemble_instruct::config::PipelineConfig;
use ensemble_instruct::dataset_io::read_dataset;
use ensemble_instruct::gateway::MockEntry;
use ensemble_instruct::instructions::generate_instructions;
use ensemble_instruct::pipeline::Pipeline;
use ensemble_instruct::seeds::load_seed_tasks;
use ensemble_instruct_core::consensus::{ensemble_select, CandidateOutputs};
use ensemble_instruct_core::dataset::compute_stats;
use ensemble_instruct_core::eval::{evaluate_records, EvalRecord};
use ensemble_instruct_core::metric::{lcs_length, rouge_l_f1};
use ensemble_instruct_core::prompt::{build_instance_prompt, build_instruction_prompt, STOP_SEQUENCE};
use ensemble_instruct_core::TaskType;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

enum Outcome {
    Pass(String),
    Fail(String),
    /// The criterion's input is not available in this checkout.
    Unavailable(String),
}

type Check = fn() -> Outcome;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn outcome(r: Result<String, String>) -> Outcome {
    match r {
        Ok(s) => Outcome::Pass(s),
        Err(s) => Outcome::Fail(s),
    }
}

// Independent oracles -------------------------------------------------------

/// Plain recursion over prefixes, memoized.
fn lcs_oracle<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    fn go<T: PartialEq>(a: &[T], b: &[T], memo: &mut Vec<Vec<Option<usize>>>) -> usize {
        let (n, m) = (a.len(), b.len());
        if n == 0 || m == 0 {
            return 0;
        }
        if let Some(v) = memo[n][m] {
            return v;
        }
        let v = if a[n - 1] == b[m - 1] {
            1 + go(&a[..n - 1], &b[..m - 1], memo)
        } else {
            go(&a[..n - 1], b, memo).max(go(a, &b[..m - 1], memo))
        };
        memo[n][m] = Some(v);
        v
    }
    let mut memo = vec![vec![None; b.len() + 1]; a.len() + 1];
    go(a, b, &mut memo)
}

fn tokens_oracle(s: &str) -> Vec<String> {
    s.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(String::from)
        .collect()
}

fn f1_oracle(a: &str, b: &str) -> f64 {
    let (ta, tb) = (tokens_oracle(a), tokens_oracle(b));
    if ta.is_empty() || tb.is_empty() {
        return 0.0;
    }
    let l = lcs_oracle(&ta, &tb) as f64;
    if l == 0.0 {
        return 0.0;
    }
    let (p, r) = (l / ta.len() as f64, l / tb.len() as f64);
    2.0 * p * r / (p + r)
}

// Criteria ------------------------------------------------------------------

fn seed_file() -> PathBuf {
    std::env::var_os("ENSEMBLE_SEED_TASKS")
        .map(PathBuf::from)
        .unwrap_or_else(|| {
            let root = Path::new(env!("CARGO_MANIFEST_DIR")).ancestors().nth(2).expect("workspace root");
            root.join("data/seed_tasks.jsonl")
        })
}

fn c1_seed_categorization() -> Outcome {
    let path = seed_file();
    if !path.exists() {
        return Outcome::Unavailable(format!(
            "published seed file not found at {} (set ENSEMBLE_SEED_TASKS)",
            path.display()
        ));
    }
    outcome((|| {
        let pool = load_seed_tasks(&path).map_err(|e| e.to_string())?;
        let got = (pool.type_a().len(), pool.type_b().len());
        ensure(got == (125, 50), || format!("expected 125/50, got {}/{}", got.0, got.1))?;
        Ok("125 type A, 50 type B".into())
    })())
}

fn c2_lcs_oracle() -> Outcome {
    outcome((|| {
        let mut seqs: Vec<Vec<u8>> = vec![vec![]];
        let mut layer: Vec<Vec<u8>> = vec![vec![]];
        for _ in 0..6 {
            layer = layer
                .iter()
                .flat_map(|s| (0..3u8).map(move |c| [s.as_slice(), &[c]].concat()))
                .collect();
            seqs.extend(layer.iter().cloned());
        }
        let mut pairs = 0;
        for a in &seqs {
            for b in &seqs {
                let (got, want) = (lcs_length(a, b), lcs_oracle(a, b));
                ensure(got == want, || format!("{a:?} vs {b:?}: {got} != {want}"))?;
                pairs += 1;
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..1000 {
            let mut draw = || -> Vec<u8> { (0..rng.random_range(0..=10)).map(|_| rng.random_range(0..4)).collect() };
            let (a, b) = (draw(), draw());
            ensure(lcs_length(&a, &b) == lcs_oracle(&a, &b), || format!("{a:?} vs {b:?}"))?;
        }
        Ok(format!("{pairs} exhaustive pairs + 1000 random pairs"))
    })())
}

fn random_text(rng: &mut ChaCha8Rng, vocab: &[&str], max: usize) -> String {
    let n = rng.random_range(0..=max);
    (0..n).map(|_| *vocab.choose(rng).unwrap()).collect::<Vec<_>>().join(" ")
}

fn c3_rouge_properties() -> Outcome {
    outcome((|| {
        let vocab = ["The", "cat", "sat", "on", "mat", "42", "dog,", "ran."];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let a = random_text(&mut rng, &vocab, 12);
            let b = random_text(&mut rng, &vocab, 12);
            let ab = rouge_l_f1(&a, &b);
            ensure(ab == rouge_l_f1(&b, &a), || format!("asymmetric on {a:?} / {b:?}"))?;
            ensure((0.0..=1.0).contains(&ab), || format!("out of bounds: {ab}"))?;
            ensure((ab - f1_oracle(&a, &b)).abs() < 1e-12, || format!("oracle mismatch on {a:?} / {b:?}"))?;
            if !tokens_oracle(&a).is_empty() {
                ensure(rouge_l_f1(&a, &a) == 1.0, || format!("identity fails on {a:?}"))?;
                ensure(rouge_l_f1(&a, "zebra yak") == 0.0, || format!("disjoint fails on {a:?}"))?;
            }
        }
        Ok("1000 random pairs".into())
    })())
}

fn c4_consensus() -> Outcome {
    outcome((|| {
        let sorted = "[-4, 2, 5, 5, 10, 92, 92, 101]";
        let src = ["falcon", "ul2", "neox"].map(String::from);
        let lane = CandidateOutputs::new([sorted.into(), sorted.into(), "[-4, 2, 5, 10, 101, 92, 92]".into()], src.clone());
        let d = ensemble_select(&lane, 0.01);
        ensure(d.selected.as_deref() == Some(sorted) && d.selected_index == Some(1), || format!("{d:?}"))?;

        let vocab = ["a", "b", "c", "d", "e"];
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..1000 {
            let o: [String; 3] = std::array::from_fn(|_| random_text(&mut rng, &vocab, 5));
            let c = CandidateOutputs::new(o.clone(), src.clone());
            let (t1, t2) = (rng.random_range(0.0..1.0), rng.random_range(0.0..1.0));
            let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
            let scores = [(0, 1), (0, 2), (1, 2)].map(|(i, j)| f1_oracle(&o[i], &o[j]));
            let min = scores.iter().cloned().fold(f64::INFINITY, f64::min);
            let d_lo = ensemble_select(&c, lo);
            let d_hi = ensemble_select(&c, hi);
            ensure(d_lo.is_selected() == (min > lo), || format!("threshold law fails on {o:?} at {lo}"))?;
            if let Some(s) = &d_lo.selected {
                ensure(o.contains(s), || format!("selection {s:?} not a candidate"))?;
            }
            ensure(!d_hi.is_selected() || d_lo.is_selected(), || format!("not monotone on {o:?}"))?;
        }
        Ok("sort-lane fixture + 1000 random triples".into())
    })())
}

fn c5_dedup() -> Outcome {
    outcome((|| {
        let pool = common::seed_pool(125, 50);
        let mut responses = Vec::new();
        for i in 0..70 {
            let novel = common::novel_instruction('a', i);
            responses.push(common::instruction_completion(&novel));
            responses.push(common::instruction_completion(&format!("{novel} today")));
            responses.push(common::instruction_completion(&common::seed_instruction('a', i)));
            responses.push(common::instruction_completion(&format!("Please {}", common::seed_instruction('b', i % 50))));
        }
        let backend = common::mock("gen", false, vec![MockEntry::prefix_cycle("", responses)]);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let set = generate_instructions(&backend, &pool, TaskType::A, 60, None, &mut rng).map_err(|e| e.to_string())?;
        let acc: Vec<&str> = set.accepted.iter().map(|a| a.instruction.as_str()).collect();
        ensure(acc.len() >= 50, || format!("only {} accepted", acc.len()))?;
        for (i, a) in acc.iter().enumerate() {
            for b in &acc[i + 1..] {
                let f = f1_oracle(a, b);
                ensure(f < 0.7, || format!("{a:?} / {b:?} at {f}"))?;
            }
            for s in pool.iter() {
                let f = f1_oracle(a, s.instruction());
                ensure(f < 0.7, || format!("{a:?} matches seed {:?} at {f}", s.instruction()))?;
            }
        }
        Ok(format!("{} accepted, {} rejected", acc.len(), set.rejected_count))
    })())
}

fn c6_prompt_plans() -> Outcome {
    outcome((|| {
        let pool = common::seed_pool(125, 50);
        let synthetic: Vec<String> = (0..10).map(|i| common::novel_instruction('s', i)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut seen = Vec::new();
        for (t, want) in [(TaskType::A, 24), (TaskType::B, 10)] {
            let p = build_instruction_prompt(&pool, &synthetic, t, &mut rng).map_err(|e| e.to_string())?;
            ensure(p.demos.len() == want, || format!("instruction {t}: {} demos", p.demos.len()))?;
            let seeds_of_type: Vec<&str> = pool.of_type(t).iter().map(|s| s.instruction()).collect();
            for d in &p.demos {
                let text = d.trim_start_matches("instruction: ").trim_end_matches(STOP_SEQUENCE).trim();
                ensure(seeds_of_type.contains(&text) || synthetic.iter().any(|s| s == text), || {
                    format!("demo of the wrong type: {d:?}")
                })?;
            }
            seen.push(p.demos.len());
        }
        for (t, want) in [(TaskType::A, 18), (TaskType::B, 15)] {
            let p = build_instance_prompt("Sort the given input ascendingly.", &pool, t, &mut rng).map_err(|e| e.to_string())?;
            ensure(p.demos.len() == want, || format!("instance {t}: {} demos", p.demos.len()))?;
            for d in &p.demos {
                ensure(d.ends_with(STOP_SEQUENCE), || format!("unterminated demo {d:?}"))?;
                ensure(d.contains("\ninput: ") == (t == TaskType::A), || format!("impure demo {d:?}"))?;
            }
            seen.push(p.demos.len());
        }
        Ok(format!("demo counts {seen:?}"))
    })())
}

fn c7_stats() -> Outcome {
    outcome((|| {
        let a = compute_stats(100, 72, 49).map_err(|e| e.to_string())?.to_string();
        let b = compute_stats(100, 40, 25).map_err(|e| e.to_string())?.to_string();
        ensure(a == "49 (68%)" && b == "25 (63%)", || format!("got {a:?}, {b:?}"))?;
        Ok(format!("{a}, {b}"))
    })())
}

fn c8_determinism() -> Outcome {
    outcome((|| {
        let mut files = Vec::new();
        for _ in 0..3 {
            let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
            let run = common::table_fixture(dir.path(), 40, 30, 20);
            let cfg = PipelineConfig::load(&run.config).map_err(|e| e.to_string())?;
            let p = Pipeline::new(cfg).map_err(|e| e.to_string())?;
            p.gen_instructions().map_err(|e| e.to_string())?;
            p.gen_instances().map_err(|e| e.to_string())?;
            let out = p.run_ensemble().map_err(|e| e.to_string())?;
            let bytes = std::fs::read(&out.dataset_path).map_err(|e| e.to_string())?;
            let back = read_dataset(&out.dataset_path).map_err(|e| e.to_string())?;
            let expected = out.store.export(p.pool().iter()).map_err(|e| e.to_string())?;
            let got: Vec<_> = back.iter().cloned().collect();
            ensure(got == expected, || "read-back differs from the in-memory store".into())?;
            files.push(bytes);
        }
        ensure(files.windows(2).all(|w| w[0] == w[1]), || "dataset bytes differ between runs".into())?;
        Ok(format!("3 identical files of {} bytes", files[0].len()))
    })())
}

fn c9_evaluator() -> Outcome {
    outcome((|| {
        let rec = |t: &str, i: usize, p: &str, r: &str| EvalRecord {
            task_id: t.into(),
            instance_id: i.to_string(),
            prediction: p.into(),
            references: vec![r.into()],
        };
        let exact: Vec<_> = (0..20).map(|i| rec(["t1", "t2"][i % 2], i, &format!("answer {i}"), &format!("answer {i}"))).collect();
        let r = evaluate_records(&exact).map_err(|e| e.to_string())?;
        ensure(r.overall == 100.0, || format!("exact overall {}", r.overall))?;

        let mut half: Vec<_> = (0..20)
            .map(|i| if i % 4 < 2 { rec(["t1", "t2"][i % 2], i, "blue sky", "blue sky") } else { rec(["t1", "t2"][i % 2], i, "red sea", "blue sky") })
            .collect();
        let r = evaluate_records(&half).map_err(|e| e.to_string())?;
        ensure(r.overall == 50.0, || format!("half overall {}", r.overall))?;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            half.shuffle(&mut rng);
            ensure(evaluate_records(&half).map_err(|e| e.to_string())? == r, || "order changed the report".into())?;
        }
        Ok("100.0 / 50.0 / order-invariant".into())
    })())
}

fn main() -> ExitCode {
    let checks: [(u32, &str, Check, Duration); 9] = [
        (1, "seed categorization 125/50", c1_seed_categorization, Duration::from_secs(1)),
        (2, "lcs matches brute-force oracle", c2_lcs_oracle, Duration::from_secs(10)),
        (3, "rouge-l properties", c3_rouge_properties, Duration::from_secs(5)),
        (4, "consensus fixture and laws", c4_consensus, Duration::from_secs(5)),
        (5, "dedup invariant over >= 50 accepted", c5_dedup, Duration::from_secs(10)),
        (6, "prompt plan 24/10 and 18/15", c6_prompt_plans, Duration::from_secs(1)),
        (7, "statistics rows 49 (68%) and 25 (63%)", c7_stats, Duration::from_secs(1)),
        (8, "end-to-end determinism", c8_determinism, Duration::from_secs(30)),
        (9, "evaluator sanity", c9_evaluator, Duration::from_secs(5)),
    ];
    let mut failed = 0;
    for (n, name, check, budget) in checks {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Outcome::Fail(format!("panicked: {msg}"))
        });
        let elapsed = start.elapsed();
        let result = match result {
            Outcome::Pass(d) if elapsed > budget => Outcome::Fail(format!("{d}; took {elapsed:.2?}, budget {budget:?}")),
            other => other,
        };
        match result {
            Outcome::Pass(d) => println!("PASS criterion {n}: {name} ({d}; {elapsed:.2?})"),
            Outcome::Fail(d) => {
                failed += 1;
                println!("FAIL criterion {n}: {name} ({d})");
            }
            Outcome::Unavailable(d) => println!("FAIL criterion {n}: {name} (input unavailable: {d})"),
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
