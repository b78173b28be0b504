use std::fmt::{self, Write as _};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Search,
    Train,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Search => "search",
            Phase::Train => "train",
        })
    }
}

/// One CSV row. `client == None` marks the aggregated (global) row.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundLog {
    pub phase: Phase,
    pub round: usize,
    pub client: Option<usize>,
    pub train_loss: f64,
    pub val_loss: f64,
    pub psnr: f64,
    pub ssim: f64,
    pub wall_ms: u64,
}

pub const CSV_HEADER: &str = "phase,round,client,train_loss,val_loss,psnr,ssim,wall_ms";

pub fn to_csv(rows: &[RoundLog]) -> String {
    let mut s = format!("{CSV_HEADER}\n");
    for r in rows {
        let client = r.client.map_or_else(|| "global".to_string(), |c| c.to_string());
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            r.phase, r.round, client, r.train_loss, r.val_loss, r.psnr, r.ssim, r.wall_ms
        );
    }
    s
}

pub fn parse_csv(text: &str) -> Result<Vec<RoundLog>> {
    let mut lines = text.lines();
    if lines.next() != Some(CSV_HEADER) {
        return Err(Error::Format("round log: unexpected header".into()));
    }
    lines
        .map(|line| {
            let bad = || Error::Format(format!("round log: bad row {line:?}"));
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 8 {
                return Err(bad());
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad());
            Ok(RoundLog {
                phase: match f[0] {
                    "search" => Phase::Search,
                    "train" => Phase::Train,
                    _ => return Err(bad()),
                },
                round: f[1].parse().map_err(|_| bad())?,
                client: if f[2] == "global" { None } else { Some(f[2].parse().map_err(|_| bad())?) },
                train_loss: num(f[3])?,
                val_loss: num(f[4])?,
                psnr: num(f[5])?,
                ssim: num(f[6])?,
                wall_ms: f[7].parse().map_err(|_| bad())?,
            })
        })
        .collect()
}
