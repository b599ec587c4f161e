//! Fixtures shared by the integration tests.
#![allow(dead_code)]

use std::path::{Path, PathBuf};

use ensemble_instruct::gateway::{Backend, BackendDescriptor, MockEntry};
use ensemble_instruct_core::prompt::{INSTANCE_HEADER_A, INSTANCE_HEADER_B, INSTRUCTION_HEADER_A, INSTRUCTION_HEADER_B};
use ensemble_instruct_core::task::{Origin, SeedPool, SeedTask};
use serde_json::json;

const NOUNS: [&str; 12] = [
    "river", "planet", "recipe", "invoice", "poem", "garden", "engine", "market", "violin", "glacier", "ticket", "castle",
];
const VERBS: [&str; 6] = ["Describe", "Classify", "Summarize", "Rewrite", "Translate", "Critique"];

/// Seed instruction `i` of a type; distinct words keep seeds mutually novel.
pub fn seed_instruction(kind: char, i: usize) -> String {
    format!("{} the {} {kind}{i} seedtopic{i}.", VERBS[i % VERBS.len()], NOUNS[i % NOUNS.len()])
}

pub fn seed_pool(a: usize, b: usize) -> SeedPool {
    let ta = (0..a).map(|i| {
        SeedTask::new(format!("seed-a-{i:03}"), &seed_instruction('a', i), Some(&format!("input {i}")), &format!("output {i}"), Origin::Seed)
            .unwrap()
    });
    let tb = (0..b).map(|i| {
        SeedTask::new(format!("seed-b-{i:03}"), &seed_instruction('b', i), None, &format!("output {i}"), Origin::Seed).unwrap()
    });
    SeedPool::from_tasks(ta.chain(tb)).unwrap()
}

/// Seed file in the upstream shape (`instances` list, empty input for type B).
pub fn write_seed_file(path: &Path, a: usize, b: usize) {
    let mut text = String::new();
    for (kind, n) in [('a', a), ('b', b)] {
        for i in 0..n {
            let input = if kind == 'a' { format!("input {i}") } else { String::new() };
            let rec = json!({
                "id": format!("seed-{kind}-{i:03}"),
                "name": format!("task_{kind}{i}"),
                "instruction": seed_instruction(kind, i),
                "instances": [{"input": input, "output": format!("output {i}")}],
                "is_classification": false,
            });
            text.push_str(&rec.to_string());
            text.push('\n');
        }
    }
    std::fs::write(path, text).unwrap();
}

/// Novel synthetic instruction `i`: shares only filler words with others.
pub fn novel_instruction(kind: char, i: usize) -> String {
    format!("Explain gadget{kind}{i} with sample{kind}{i} for reader{kind}{i}")
}

pub fn mock(name: &str, instructed: bool, entries: Vec<MockEntry>) -> Backend {
    Backend::script_mock(BackendDescriptor::mock(name, instructed), entries).unwrap()
}

/// Completion as a model would send it after the `instruction:` cue.
pub fn instruction_completion(text: &str) -> String {
    format!(" {text}\n|EoS|\n\ninstruction: trailing text the stop sequence removes")
}

pub fn write_jsonl(path: &Path, entries: &[MockEntry]) {
    let text: String = entries.iter().map(|e| serde_json::to_string(e).unwrap() + "\n").collect();
    std::fs::write(path, text).unwrap();
}

/// Layout of an all-mock run directory.
pub struct MockRun {
    pub dir: PathBuf,
    pub config: PathBuf,
}

/// Scripts for a run with `n` type-A instructions, of which the first `valid`
/// instances parse and the first `agreed` of those pass the vote.
pub fn table_fixture(dir: &Path, n: usize, valid: usize, agreed: usize) -> MockRun {
    assert!(agreed <= valid && valid <= n);
    write_seed_file(&dir.join("seeds.jsonl"), 30, 20);

    let instructions: Vec<String> = (0..n).map(|i| instruction_completion(&novel_instruction('a', i))).collect();
    let instances: Vec<String> = (0..n)
        .map(|i| match (i < valid, i % 3) {
            (true, _) => format!(" value{i}\noutput: answer{i} alpha beta\n|EoS|"),
            (false, 0) => format!(" value{i} without an output line\n|EoS|"),
            (false, 1) => format!(" \noutput: answer{i}\n|EoS|"),
            (false, _) => format!(" value{i}\noutput: answer{i}\ninput: again\n|EoS|"),
        })
        .collect();
    let aux = |tag: &str| -> Vec<String> {
        (0..valid)
            .map(|i| if i < agreed { format!(" answer{i} alpha beta") } else { format!(" {tag}{i} unrelated") })
            .collect()
    };
    write_jsonl(
        &dir.join("generator.jsonl"),
        &[
            MockEntry::prefix_cycle(INSTRUCTION_HEADER_A, instructions),
            MockEntry::prefix_cycle(INSTRUCTION_HEADER_B, vec![instruction_completion("Unused type B prompt.")]),
            MockEntry::prefix_cycle(INSTANCE_HEADER_A, instances),
            MockEntry::prefix_cycle(INSTANCE_HEADER_B, vec![" unused\n|EoS|".into()]),
        ],
    );
    write_jsonl(&dir.join("aux1.jsonl"), &[MockEntry::prefix_cycle("instruction:", aux("left"))]);
    write_jsonl(&dir.join("aux2.jsonl"), &[MockEntry::prefix_cycle("instruction:", aux("right"))]);

    let config = dir.join("config.toml");
    std::fs::write(
        &config,
        format!(
            r#"seed_path = "seeds.jsonl"
out_dir = "run"
rng_seed = 11

[targets]
a = {n}
b = 0

[roles]
generator = "gen"
aux1 = "ul2"
aux2 = "t5"

[[backends]]
name = "gen"
kind = "mock"
script = "generator.jsonl"

[[backends]]
name = "ul2"
kind = "mock"
script = "aux1.jsonl"
instructed = true

[[backends]]
name = "t5"
kind = "mock"
script = "aux2.jsonl"
instructed = true
"#
        ),
    )
    .unwrap();
    MockRun {
        dir: dir.to_path_buf(),
        config,
    }
}
