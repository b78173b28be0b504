//! End-to-end commands: make-data, search, train, eval and report. Each
//! writes its outputs plus the fully resolved configuration into one
//! directory; with a fixed seed every output is byte-reproducible.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::config::RunConfig;
use crate::data::{dataset_digest, partition_clients, read_archive, write_archive, write_pgm16, Dataset, Sample};
use crate::error::{Error, Result};
use crate::fed::{run_search_phase, run_train_phase, to_csv, EmaMode, Phase};
use crate::mri::adjoint_ah;
use crate::par::Execution;
use crate::recon::{checkpoint, evaluate, zero_filled, Metrics, ReconNet};
use crate::search::{CostModel, Genotype};

pub const CONFIG_FILE: &str = "config.toml";
pub const GENOTYPE_FILE: &str = "genotype.txt";
pub const SEARCH_LOG: &str = "search_log.csv";
pub const TRAIN_LOG: &str = "train_log.csv";
pub const SUPERNET_CKPT: &str = "supernet.ckpt";
pub const MODEL_CKPT: &str = "model.ckpt";
pub const EVAL_CSV: &str = "eval.csv";
pub const REPORT_CSV: &str = "report.csv";

/// Creates `dir`, refusing a non-empty one unless `force` (which clears it).
pub fn prepare_out(dir: &Path, force: bool) -> Result<()> {
    if dir.exists() && fs::read_dir(dir)?.next().is_some() {
        if !force {
            return Err(Error::Data(format!("{} exists and is not empty (use --force)", dir.display())));
        }
        fs::remove_dir_all(dir)?;
    }
    fs::create_dir_all(dir)?;
    Ok(())
}

fn write_config(dir: &Path, cfg: &RunConfig) -> Result<()> {
    fs::write(dir.join(CONFIG_FILE), cfg.to_toml())?;
    Ok(())
}

fn load_data(cfg: &RunConfig, dir: &Path) -> Result<Dataset> {
    let ds = read_archive(dir)?;
    if ds.clients.len() != cfg.fed.clients {
        return Err(Error::Config(format!(
            "config asks for {} clients, archive {} has {}",
            cfg.fed.clients,
            dir.display(),
            ds.clients.len()
        )));
    }
    Ok(ds)
}

fn checkpoint_hook<'a>(dir: &'a Path, every: usize) -> impl FnMut(Phase, usize, &ReconNet) -> Result<()> + 'a {
    move |phase, round, net| {
        if every > 0 && round % every == 0 {
            checkpoint::save(&dir.join(format!("{phase}_round{round:04}.ckpt")), &net.params)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct DataSummary {
    pub digest: String,
    pub samples_per_client: Vec<usize>,
}

/// Generates the phantom archive for `cfg` into `out`.
pub fn make_data(cfg: &RunConfig, out: &Path, force: bool) -> Result<DataSummary> {
    cfg.validate()?;
    let ds = partition_clients(&cfg.data, cfg.fed.clients, cfg.fed.seed)?;
    prepare_out(out, force)?;
    write_archive(out, &ds)?;
    write_config(out, cfg)?;
    Ok(DataSummary {
        digest: dataset_digest(out)?,
        samples_per_client: ds.clients.iter().map(|c| c.samples.len()).collect(),
    })
}

/// Federated search; writes the genotype, the global supernet and the round log.
pub fn search(cfg: &RunConfig, data: &Path, out: &Path, force: bool, exec: Execution) -> Result<Genotype> {
    cfg.validate()?;
    let ds = load_data(cfg, data)?;
    prepare_out(out, force)?;
    write_config(out, cfg)?;
    let outcome =
        run_search_phase(&cfg.fed, cfg.net, &ds, exec, &mut checkpoint_hook(out, cfg.output.checkpoint_every))?;
    fs::write(out.join(GENOTYPE_FILE), outcome.genotype.to_text())?;
    fs::write(out.join(SEARCH_LOG), to_csv(&outcome.logs))?;
    checkpoint::save(&out.join(SUPERNET_CKPT), &outcome.net.params)?;
    Ok(outcome.genotype)
}

pub fn read_genotype(path: &Path) -> Result<Genotype> {
    let text =
        fs::read_to_string(path).map_err(|e| Error::Data(format!("cannot read genotype {}: {e}", path.display())))?;
    Genotype::parse(&text)
}

/// Federated training of `genotype`; writes the final model and the round log.
pub fn train(
    cfg: &RunConfig,
    genotype: &Path,
    data: &Path,
    out: &Path,
    force: bool,
    exec: Execution,
) -> Result<ReconNet> {
    cfg.validate()?;
    let g = read_genotype(genotype)?;
    let ds = load_data(cfg, data)?;
    prepare_out(out, force)?;
    write_config(out, cfg)?;
    fs::write(out.join(GENOTYPE_FILE), g.to_text())?;
    let outcome = run_train_phase(
        &cfg.fed,
        &g,
        cfg.net.residual,
        &ds,
        exec,
        &mut checkpoint_hook(out, cfg.output.checkpoint_every),
    )?;
    fs::write(out.join(TRAIN_LOG), to_csv(&outcome.logs))?;
    checkpoint::save(&out.join(MODEL_CKPT), &outcome.net.params)?;
    Ok(outcome.net)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub method: &'static str,
    /// `None` for the pooled (all clients) row.
    pub client: Option<usize>,
    pub metrics: Metrics,
}

#[derive(Debug, Clone)]
pub struct EvalSummary {
    pub rows: Vec<EvalRow>,
    pub params: usize,
    pub flops: u64,
}

impl EvalSummary {
    pub fn global(&self, method: &str) -> Option<Metrics> {
        self.rows.iter().find(|r| r.method == method && r.client.is_none()).map(|r| r.metrics)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("method,client,psnr,ssim,loss\n");
        for r in &self.rows {
            let client = r.client.map_or_else(|| "global".to_string(), |c| c.to_string());
            let _ = writeln!(s, "{},{client},{},{},{}", r.method, r.metrics.psnr, r.metrics.ssim, r.metrics.loss);
        }
        let _ = writeln!(s, "# params={} flops={}", self.params, self.flops);
        s
    }

    pub fn to_table(&self) -> String {
        let mut s = format!("{:<12} {:>7} {:>10} {:>8}\n", "method", "client", "PSNR/dB", "SSIM");
        for r in &self.rows {
            let client = r.client.map_or_else(|| "global".to_string(), |c| c.to_string());
            let _ = writeln!(s, "{:<12} {:>7} {:>10.4} {:>8.4}", r.method, client, r.metrics.psnr, r.metrics.ssim);
        }
        let _ = writeln!(s, "params {}  FLOPs {}", self.params, self.flops);
        s
    }
}

pub fn parse_eval_csv(text: &str) -> Result<EvalSummary> {
    let bad = |l: &str| Error::Format(format!("eval csv: bad line {l:?}"));
    let mut rows = Vec::new();
    let (mut params, mut flops) = (None, None);
    for line in text.lines().skip(1) {
        if let Some(rest) = line.strip_prefix("# ") {
            for kv in rest.split_whitespace() {
                match kv.split_once('=') {
                    Some(("params", v)) => params = v.parse().ok(),
                    Some(("flops", v)) => flops = v.parse().ok(),
                    _ => return Err(bad(line)),
                }
            }
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 5 {
            return Err(bad(line));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad(line));
        rows.push(EvalRow {
            method: match f[0] {
                "zero_filled" => "zero_filled",
                "model" => "model",
                _ => return Err(bad(line)),
            },
            client: if f[1] == "global" { None } else { Some(f[1].parse().map_err(|_| bad(line))?) },
            metrics: Metrics { psnr: num(f[2])?, ssim: num(f[3])?, loss: num(f[4])? },
        });
    }
    Ok(EvalSummary { rows, params: params.ok_or_else(|| bad("params"))?, flops: flops.ok_or_else(|| bad("flops"))? })
}

/// Test-set metrics of the zero-filled baseline and the trained model, per
/// client and pooled, with the model's parameter and FLOP counts.
pub fn eval(
    cfg: &RunConfig,
    checkpoint_path: &Path,
    genotype: &Path,
    data: &Path,
    out: Option<&Path>,
    images: bool,
    exec: Execution,
) -> Result<EvalSummary> {
    let g = read_genotype(genotype)?;
    let ds = load_data(cfg, data)?;
    let mut net = ReconNet::from_genotype(&g, cfg.net.residual, cfg.fed.seed)?;
    checkpoint::load_into(checkpoint_path, &mut net.params)?;
    let cost = CostModel::for_genotype(&g)?;
    let mut rows = Vec::new();
    let per_client: Vec<Vec<&Sample>> = ds.clients.iter().map(|c| c.test.iter().collect()).collect();
    let all: Vec<&Sample> = per_client.iter().flatten().copied().collect();
    for (method, is_model) in [("zero_filled", false), ("model", true)] {
        for (c, samples) in per_client.iter().enumerate() {
            let metrics = if is_model { evaluate(&net, samples, exec)? } else { zero_filled(samples)? };
            rows.push(EvalRow { method, client: Some(c), metrics });
        }
        let metrics = if is_model { evaluate(&net, &all, exec)? } else { zero_filled(&all)? };
        rows.push(EvalRow { method, client: None, metrics });
    }
    let summary = EvalSummary { rows, params: cost.param_count(), flops: cost.flops(cfg.data.size, cfg.data.size) };
    if let Some(out) = out {
        fs::create_dir_all(out)?;
        fs::write(out.join(EVAL_CSV), summary.to_csv())?;
        if images {
            dump_images(&out.join("images"), &net, &ds)?;
        }
    }
    Ok(summary)
}

/// Writes ground truth, zero-filled and reconstructed magnitudes of every
/// test sample as 16-bit graymaps scaled to the ground truth's maximum.
fn dump_images(dir: &Path, net: &ReconNet, ds: &Dataset) -> Result<()> {
    fs::create_dir_all(dir)?;
    for c in &ds.clients {
        for (i, s) in c.test.iter().enumerate() {
            let (h, w) = s.x_gt.dims();
            let gt = s.x_gt.magnitude();
            let scale = gt.iter().cloned().fold(0.0, f64::max).max(f64::MIN_POSITIVE);
            let zf = adjoint_ah(&s.k, &s.mask)?.magnitude();
            let rec = net.reconstruct(&s.k, &s.mask)?.magnitude();
            for (tag, img) in [("gt", &gt), ("zf", &zf), ("recon", &rec)] {
                write_pgm16(&dir.join(format!("client{:02}_test{i:04}_{tag}.pgm", c.id)), img, h, w, scale)?;
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct ReportEntry {
    pub name: String,
    pub ema: Option<EmaMode>,
    pub eval: EvalSummary,
}

/// Collects every subdirectory of `run_dir` holding an eval.csv into one
/// summary (text) and writes report.csv beside them.
pub fn report(run_dir: &Path) -> Result<(String, Vec<ReportEntry>)> {
    let mut dirs: Vec<PathBuf> = fs::read_dir(run_dir)
        .map_err(|e| Error::Data(format!("cannot read run directory {}: {e}", run_dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join(EVAL_CSV).is_file())
        .collect();
    if run_dir.join(EVAL_CSV).is_file() {
        dirs.push(run_dir.to_path_buf());
    }
    dirs.sort();
    if dirs.is_empty() {
        return Err(Error::Data(format!("no {EVAL_CSV} found under {}", run_dir.display())));
    }
    let mut entries = Vec::new();
    for d in dirs {
        let eval = parse_eval_csv(&fs::read_to_string(d.join(EVAL_CSV))?)?;
        let ema = fs::read_to_string(d.join(CONFIG_FILE))
            .ok()
            .and_then(|t| RunConfig::from_toml(&t, crate::config::Preset::Desk).ok())
            .map(|c| c.fed.train.ema);
        let name = d.file_name().map_or_else(|| ".".into(), |n| n.to_string_lossy().into_owned());
        entries.push(ReportEntry { name, ema, eval });
    }
    let mut csv = String::from("run,ema,params,flops,zf_psnr,zf_ssim,psnr,ssim,delta_psnr,delta_ssim\n");
    let mut text = format!(
        "{:<20} {:>7} {:>8} {:>12} {:>9} {:>9} {:>8} {:>8}\n",
        "run", "ema", "params", "FLOPs", "ZF PSNR", "PSNR", "ΔPSNR", "ΔSSIM"
    );
    for e in &entries {
        let (zf, m) = match (e.eval.global("zero_filled"), e.eval.global("model")) {
            (Some(a), Some(b)) => (a, b),
            _ => return Err(Error::Format(format!("{}: eval.csv lacks global rows", e.name))),
        };
        let ema = e.ema.map_or("-".to_string(), |m| format!("{m:?}").to_lowercase());
        let _ = writeln!(
            csv,
            "{},{ema},{},{},{},{},{},{},{},{}",
            e.name,
            e.eval.params,
            e.eval.flops,
            zf.psnr,
            zf.ssim,
            m.psnr,
            m.ssim,
            m.psnr - zf.psnr,
            m.ssim - zf.ssim
        );
        let _ = writeln!(
            text,
            "{:<20} {:>7} {:>8} {:>12} {:>9.3} {:>9.3} {:>+8.3} {:>+8.4}",
            e.name,
            ema,
            e.eval.params,
            e.eval.flops,
            zf.psnr,
            m.psnr,
            m.psnr - zf.psnr,
            m.ssim - zf.ssim
        );
    }
    let psnr_of = |mode: EmaMode| {
        entries.iter().find(|e| e.ema == Some(mode)).and_then(|e| e.eval.global("model")).map(|m| m.psnr)
    };
    if let (Some(on), Some(off)) = (psnr_of(EmaMode::On), psnr_of(EmaMode::Off)) {
        let _ = writeln!(text, "EMA on vs off: {on:.3} dB vs {off:.3} dB ({:+.3} dB)", on - off);
    }
    fs::write(run_dir.join(REPORT_CSV), csv)?;
    Ok((text, entries))
}
