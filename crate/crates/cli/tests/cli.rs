//! End-to-end checks of the `fedrecon` binary on a small configuration.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fedrecon::config::{Preset, RunConfig};
use fedrecon::data::{read_archive, read_pgm16};
use fedrecon::fed::parse_csv;
use fedrecon::pipeline::{self, parse_eval_csv};
use fedrecon::recon::ReconNet;
use fedrecon::search::{CostModel, OpKind};

const SMALL: &str = "[data]\nsize = 16\nsamples_per_client = 4\ntest_per_client = 1\n\
                     [net]\nchannels = 2\ncells = 1\nnodes = 2\nunrolls = 1\n\
                     [fed]\nclients = 2\nseed = 5\n[fed.search]\nrounds = 2\nlocal_epochs = 1\n\
                     [fed.train]\nrounds = 2\nlocal_epochs = 1\n";

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fedrecon")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = bin(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    bin(args).status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Run {
    _dir: tempfile::TempDir,
    root: PathBuf,
    config: PathBuf,
}

impl Run {
    fn new(text: &str) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        let config = root.join("small.toml");
        fs::write(&config, text).unwrap();
        Run { _dir: dir, root, config }
    }

    fn p(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    fn make_data(&self) -> PathBuf {
        let d = self.p("data");
        ok(&["make-data", "--config", s(&self.config), "--out", s(&d)]);
        d
    }
}

fn tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().display().to_string(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn desk_make_data_writes_four_clients_reproducibly() {
    let run = Run::new("");
    let (a, b) = (run.p("a"), run.p("b"));
    let text = ok(&["make-data", "--out", s(&a)]);
    ok(&["make-data", "--out", s(&b)]);
    assert!(text.contains("wrote 4 clients"));
    for c in 0..4 {
        assert!(a.join(format!("client_{c:02}")).is_dir());
    }
    let manifest = fs::read_to_string(a.join("manifest.txt")).unwrap();
    assert_eq!(manifest.lines().filter(|l| l.starts_with("client ")).count(), 4);
    assert_eq!(tree(&a), tree(&b));
    // Resolved config is written beside the outputs.
    let cfg = RunConfig::from_toml(&fs::read_to_string(a.join(pipeline::CONFIG_FILE)).unwrap(), Preset::Paper).unwrap();
    assert_eq!(cfg, RunConfig::preset(Preset::Desk));
}

#[test]
fn single_client_config_gives_a_single_client_dir() {
    let run = Run::new(&SMALL.replace("clients = 2", "clients = 1"));
    let d = run.make_data();
    assert!(d.join("client_00").is_dir() && !d.join("client_01").exists());
    assert_eq!(read_archive(&d).unwrap().clients.len(), 1);
}

#[test]
fn force_is_required_to_reuse_an_output_directory() {
    let run = Run::new(SMALL);
    let d = run.make_data();
    let before = tree(&d);
    assert_eq!(code(&["make-data", "--config", s(&run.config), "--out", s(&d)]), 3);
    ok(&["make-data", "--config", s(&run.config), "--out", s(&d), "--force"]);
    assert_eq!(tree(&d), before);
}

#[test]
fn configuration_errors_exit_with_two() {
    let run = Run::new("[fed]\nclinets = 3\n");
    assert_eq!(code(&["make-data", "--config", s(&run.config), "--out", s(&run.p("x"))]), 2);
    let bad = Run::new("[fed.train]\ngamma = 1.5\n");
    assert_eq!(code(&["make-data", "--config", s(&bad.config), "--out", s(&bad.p("x"))]), 2);
    assert_eq!(code(&["make-data", "--rounds", "3", "--out", s(&run.p("y"))]), 2);
    assert_eq!(code(&["make-data", "--preset", "huge"]), 2);
    assert_eq!(code(&["make-data", "--config", s(&run.p("missing.toml")), "--out", s(&run.p("z"))]), 2);
}

#[test]
fn missing_or_corrupt_data_exits_with_three() {
    let run = Run::new(SMALL);
    let args = |d: &Path| {
        vec![
            "search".to_string(),
            "--config".into(),
            s(&run.config).into(),
            "--data".into(),
            s(d).into(),
            "--out".into(),
            s(&run.p("s")).into(),
        ]
    };
    let missing = run.p("nowhere");
    let a = args(&missing);
    assert_eq!(code(&a.iter().map(String::as_str).collect::<Vec<_>>()), 3);
    let d = run.make_data();
    fs::write(d.join("client_00").join("pool_0000.f64"), b"garbage").unwrap();
    let a = args(&d);
    assert_eq!(code(&a.iter().map(String::as_str).collect::<Vec<_>>()), 3);
}

#[test]
fn divergent_training_exits_with_four() {
    let run = Run::new(&SMALL.replace("[fed.train]\n", "[fed.train]\nlr = 1e300\noptimizer = \"sgd\"\n"));
    let d = run.make_data();
    let search = run.p("search");
    ok(&["search", "--config", s(&run.config), "--data", s(&d), "--out", s(&search), "--rounds", "0"]);
    let g = search.join(pipeline::GENOTYPE_FILE);
    let c = code(&["train", "--config", s(&run.config), "--data", s(&d), "--genotype", s(&g), "--out", s(&run.p("t"))]);
    assert_eq!(c, 4);
}

#[test]
fn zero_round_search_emits_the_tie_break_genotype() {
    let run = Run::new(SMALL);
    let d = run.make_data();
    let out = run.p("search");
    let text = ok(&["search", "--config", s(&run.config), "--data", s(&d), "--out", s(&out), "--rounds", "0"]);
    let g = pipeline::read_genotype(&out.join(pipeline::GENOTYPE_FILE)).unwrap();
    assert_eq!(text, g.to_text());
    let log = parse_csv(&fs::read_to_string(out.join(pipeline::SEARCH_LOG)).unwrap()).unwrap();
    assert!(log.is_empty());
    // The initial α is uniform, so every edge keeps the first two canonical ops.
    assert!(g.edges.iter().all(|(_, ops)| *ops == [OpKind::ALL[0], OpKind::ALL[1]]));
}

#[test]
fn full_pipeline_logs_evaluates_and_reports() {
    let run = Run::new(SMALL);
    let d = run.make_data();
    let (search, train) = (run.p("search"), run.p("train"));
    ok(&["search", "--config", s(&run.config), "--data", s(&d), "--out", s(&search)]);
    let g = search.join(pipeline::GENOTYPE_FILE);
    let genotype = pipeline::read_genotype(&g).unwrap();
    assert_eq!(genotype.edges.len(), 5);
    let log = parse_csv(&fs::read_to_string(search.join(pipeline::SEARCH_LOG)).unwrap()).unwrap();
    assert_eq!(log.len(), 2 * 3);

    ok(&["train", "--config", s(&run.config), "--data", s(&d), "--genotype", s(&g), "--out", s(&train)]);
    let log = parse_csv(&fs::read_to_string(train.join(pipeline::TRAIN_LOG)).unwrap()).unwrap();
    assert_eq!(log.len(), 2 * 3);
    let ckpt = train.join(pipeline::MODEL_CKPT);

    let table = ok(&[
        "eval",
        "--config",
        s(&run.config),
        "--data",
        s(&d),
        "--checkpoint",
        s(&ckpt),
        "--genotype",
        s(&g),
        "--out",
        s(&train),
        "--images",
    ]);
    assert!(table.contains("zero_filled") && table.contains("model"));
    let summary = parse_eval_csv(&fs::read_to_string(train.join(pipeline::EVAL_CSV)).unwrap()).unwrap();
    assert!(summary.global("zero_filled").is_some() && summary.global("model").is_some());
    let cost = CostModel::for_genotype(&genotype).unwrap();
    assert_eq!(summary.params, cost.param_count());
    assert_eq!(summary.flops, cost.flops(16, 16));
    assert_eq!(summary.params, ReconNet::from_genotype(&genotype, true, 0).unwrap().weight_count());

    // Image dumps reload within 16-bit quantization.
    let ds = read_archive(&d).unwrap();
    let gt = ds.clients[1].test[0].x_gt.magnitude();
    let scale = gt.iter().cloned().fold(0.0, f64::max);
    let (pix, h, w) = read_pgm16(&train.join("images").join("client01_test0000_gt.pgm"), scale).unwrap();
    assert_eq!((h, w), (16, 16));
    assert!(pix.iter().zip(&gt).all(|(a, b)| (a - b).abs() <= scale / 65535.0));
    for tag in ["zf", "recon"] {
        assert!(train.join("images").join(format!("client01_test0000_{tag}.pgm")).is_file());
    }

    let report = ok(&["report", "--run", s(&run.root)]);
    assert!(report.contains("train"));
    assert!(run.root.join(pipeline::REPORT_CSV).is_file());
}

#[test]
fn commands_are_idempotent_under_force() {
    let run = Run::new(SMALL);
    let d = run.make_data();
    let out = run.p("search");
    let args = ["search", "--config", s(&run.config), "--data", s(&d), "--out", s(&out), "--force"];
    ok(&args);
    let first = tree(&out);
    ok(&args);
    assert_eq!(tree(&out), first);
    // One worker or several: same bytes.
    let mut single = args.to_vec();
    single.extend(["--threads", "1"]);
    ok(&single);
    assert_eq!(tree(&out), first);
}

#[test]
fn report_without_evaluations_is_a_data_error() {
    let run = Run::new(SMALL);
    assert_eq!(code(&["report", "--run", s(&run.root)]), 3);
}
