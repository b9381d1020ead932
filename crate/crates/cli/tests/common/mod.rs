#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub const FIXTURE_CONLLU: &str = include_str!("../../../core/data/fixtures/fixtures.conllu");
pub const FIXTURE_GOLD: &str = include_str!("../../../core/data/fixtures/gold.tsv");

pub const CONFIG: &str = r#"
seed = 7

[paths]
articles = "articles.jsonl"
parses = "parses.conllu"
annotations = "annotations.csv"
profiles = "profiles.csv"
stance_data = "stance.tsv"

[stance]
test_size = 12
cv_folds = 3

[human_perf]
repeats = 3

[framing]
min_freq = 1
robustness_top_outlets = 1
"#;

/// Workspace with every raw input the pipeline reads.
pub struct Fixture {
    pub dir: tempfile::TempDir,
}

impl Fixture {
    pub fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        write_inputs(dir.path());
        Fixture { dir }
    }

    /// Like [`Fixture::new`] with the parsed documents repeated `copies`
    /// times under fresh ids, spread over left and right outlets.
    pub fn replicated(copies: usize) -> Self {
        let fx = Self::new();
        let mut conllu = String::new();
        let mut articles = String::new();
        let outlets = ["New York Times", "Fox", "Mother Jones", "Breitbart", "Vox", "Daily Caller", "Reuters"];
        for r in 0..copies {
            conllu += &FIXTURE_CONLLU.replace("fx", &format!("r{r}fx"));
            for n in 1..=6 {
                let id = format!("r{r}fx{n}");
                let outlet = outlets[(r * 6 + n) % outlets.len()];
                articles += &article(&id, outlet, &format!("/climate/{id}"), &format!("Story {id} on the climate beat"));
            }
        }
        std::fs::write(fx.path().join("parses.conllu"), conllu).unwrap();
        std::fs::write(fx.path().join("articles.jsonl"), articles).unwrap();
        fx
    }

    pub fn path(&self) -> &Path {
        self.dir.path()
    }

    pub fn config(&self) -> PathBuf {
        self.path().join("config.toml")
    }

    /// Runs the binary with `--config` and `--out-dir` set.
    pub fn run(&self, out: &str, args: &[&str]) -> Output {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_opframe"));
        cmd.arg("--config").arg(self.config()).arg("--out-dir").arg(self.path().join(out));
        cmd.args(args).env("RUST_LOG", "warn");
        cmd.output().unwrap()
    }

    pub fn run_ok(&self, out: &str, args: &[&str]) -> Output {
        let o = self.run(out, args);
        assert!(
            o.status.success(),
            "{args:?} failed: {}",
            String::from_utf8_lossy(&o.stderr)
        );
        o
    }
}

pub const FULL_PIPELINE: &[&[&str]] = &[
    &["corpus"],
    &["extract"],
    &["aggregate"],
    &["demographics"],
    &["human-perf"],
    &["train-stance"],
    &["eval"],
    &["classify"],
    &["framing"],
    &["faithfulness"],
    &["report"],
];

pub fn write_inputs(dir: &Path) {
    std::fs::write(dir.join("config.toml"), CONFIG).unwrap();
    std::fs::write(dir.join("parses.conllu"), FIXTURE_CONLLU).unwrap();
    std::fs::write(dir.join("articles.jsonl"), articles()).unwrap();
    std::fs::write(dir.join("annotations.csv"), annotations()).unwrap();
    std::fs::write(dir.join("profiles.csv"), profiles()).unwrap();
    std::fs::write(dir.join("stance.tsv"), stance_data()).unwrap();
}

fn article(id: &str, outlet: &str, path: &str, title: &str) -> String {
    format!(
        "{{\"article_id\":\"{id}\",\"url\":\"https://news.example.com{path}\",\"title\":\"{title}\",\"outlet\":\"{outlet}\",\"publish_date\":\"2019-05-0{}\"}}\n",
        1 + id.len() % 9
    )
}

fn articles() -> String {
    [
        article("fx1", "New York Times", "/climate/fx1", "Scientists weigh climate action"),
        article("fx2", "Fox", "/politics/fx2", "Carbon tax debate heats up"),
        article("fx3", "Mother Jones", "/environment/fx3", "Activists warn of rising seas"),
        article("fx4", "Breitbart", "/news/fx4", "Senate passes energy bill"),
        article("fx5", "Associated Press", "/science/fx5", "Researchers track ocean heat"),
        article("fx6", "Daily Caller", "/energy/fx6", "EPA weighs pollution rules"),
        article("dup1", "New York Times", "/climate/dup1", "Scientists weigh climate actions"),
        article("biz1", "Fox", "/business/biz1", "Oil prices climb"),
    ]
    .concat()
}

const LABELS: [&str; 3] = ["disagree", "neutral", "agree"];

/// 30 items, 12 workers, 5 responses per item; worker w11 always answers neutral.
fn annotations() -> String {
    let mut s = String::from("item_id,worker_id,response\n");
    for i in 0..30usize {
        let truth = (i * 7 + 1) % 3;
        for k in 0..5usize {
            let j = (i + k) % 12;
            let response = if j == 11 {
                1
            } else if (i * 7 + j * 3) % 5 == 0 {
                (truth + 1) % 3
            } else {
                truth
            };
            writeln!(s, "i{i:02},w{j},{}", LABELS[response]).unwrap();
        }
    }
    s
}

fn profiles() -> String {
    let mut s = String::from("worker_id,republican,female\n");
    for j in 0..12usize {
        writeln!(s, "w{j},{},{}", j % 2, (j / 2) % 2).unwrap();
    }
    s
}

/// Templated sentences with three-way stance votes from five workers.
pub fn stance_data() -> String {
    let topics = [
        "coastal cities", "farmers", "future generations", "the economy", "wildlife", "public health", "island nations",
        "forests", "fisheries", "mountain towns",
    ];
    let templates = [
        ["climate change is a hoax pushed by {}", "global warming fears about {} are exaggerated"],
        ["a report on {} was released on tuesday", "officials met to discuss {} this week"],
        ["climate change is a serious threat to {}", "global warming is real and endangers {}"],
    ];
    let mut s = String::from("guid\tsentence\tworker_0\tworker_1\tworker_2\tworker_3\tworker_4\tleaning\n");
    let mut n = 0;
    for (label, pair) in templates.iter().enumerate() {
        for t in pair {
            for topic in topics {
                let votes: Vec<&str> = (0..5)
                    .map(|w| if (n + w) % 7 == 0 { LABELS[(label + 1) % 3] } else { LABELS[label] })
                    .collect();
                let leaning = if n % 2 == 0 { "left" } else { "right" };
                writeln!(s, "g{n:03}\t{}\t{}\t{leaning}", t.replace("{}", topic), votes.join("\t")).unwrap();
                n += 1;
            }
        }
    }
    s
}

pub fn gold_keep_count() -> usize {
    opframe::extraction::gold::parse_gold(FIXTURE_GOLD).unwrap().iter().filter(|g| g.keep).count()
}

/// Tuple ids from a run directory's tuple file.
pub fn tuple_ids(out: &Path) -> Vec<String> {
    std::fs::read_to_string(out.join("tuples.jsonl"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["tuple_id"].as_str().unwrap().to_string())
        .collect()
}

/// External label file giving every tuple a non-neutral label.
pub fn write_external_labels(out: &Path, path: &Path) {
    let mut s = String::new();
    for (i, id) in tuple_ids(out).iter().enumerate() {
        let label = if (i * 5 + id.len()) % 3 == 0 { "disagree" } else { "agree" };
        writeln!(s, "{id},{label},0.9").unwrap();
    }
    std::fs::write(path, s).unwrap();
}
