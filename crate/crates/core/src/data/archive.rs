//! On-disk dataset archive.
//!
//! ```text
//! <dir>/manifest.txt
//! <dir>/client_00/pool_0000.f64   header + gt.re, k.re, k.im planes
//! <dir>/client_00/pool_0000.mask  header + H·W bytes
//! <dir>/client_00/test_0000.f64 ...
//! ```
//! Headers are 16 bytes: magic `FNGD`, then u32 H, W, planes (little-endian).

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::phantom::{ClientData, ClientKnobs, DataConfig, Dataset, MaskPolicy, PhantomSpec, Sample};
use crate::error::{Error, Result};
use crate::mri::{ComplexGrid, SamplingMask};

const MAGIC: &[u8; 4] = b"FNGD";
const MANIFEST: &str = "manifest.txt";
const MANIFEST_VERSION: &str = "fedrecon-dataset 1";

fn header(h: usize, w: usize, planes: u32) -> Vec<u8> {
    let mut out = MAGIC.to_vec();
    for v in [h as u32, w as u32, planes] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn parse_header(bytes: &[u8], path: &Path) -> Result<(usize, usize, u32)> {
    if bytes.len() < 16 || &bytes[..4] != MAGIC {
        return Err(Error::Format(format!("{}: bad raster header", path.display())));
    }
    let u = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().expect("4 bytes"));
    Ok((u(4) as usize, u(8) as usize, u(12)))
}

fn encode_sample(s: &Sample) -> (Vec<u8>, Vec<u8>) {
    let (h, w) = s.x_gt.dims();
    let mut raster = header(h, w, 3);
    for plane in [&s.x_gt.re, &s.k.re, &s.k.im] {
        for v in plane.iter() {
            raster.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut mask = header(h, w, 1);
    mask.extend(s.mask.to_bytes());
    (raster, mask)
}

fn decode_sample(raster_path: &Path, mask_path: &Path, size: usize, record: &SampleRecord) -> Result<Sample> {
    let raster = fs::read(raster_path)?;
    let (h, w, planes) = parse_header(&raster, raster_path)?;
    if (h, w, planes) != (size, size, 3) || raster.len() != 16 + 3 * 8 * h * w {
        return Err(Error::Format(format!("{}: unexpected extents or length", raster_path.display())));
    }
    let vals: Vec<f64> =
        raster[16..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    let n = h * w;
    let x_gt = ComplexGrid::from_real(h, w, vals[..n].to_vec())?;
    let k = ComplexGrid::new(h, w, vals[n..2 * n].to_vec(), vals[2 * n..].to_vec())?;
    let mask_bytes = fs::read(mask_path)?;
    let (mh, mw, mp) = parse_header(&mask_bytes, mask_path)?;
    if (mh, mw, mp) != (h, w, 1) {
        return Err(Error::Format(format!("{}: unexpected extents", mask_path.display())));
    }
    let mut mask = SamplingMask::from_bytes(h, w, &mask_bytes[16..])?;
    mask.acceleration = record.mask_acceleration;
    mask.center_fraction = record.mask_center_fraction;
    mask.seed = record.mask_seed;
    Ok(Sample { seed: record.seed, x_gt, k, mask })
}

#[derive(Debug, Clone, PartialEq)]
struct SampleRecord {
    seed: u64,
    mask_seed: u64,
    mask_acceleration: f64,
    mask_center_fraction: f64,
}

impl SampleRecord {
    fn of(s: &Sample) -> Self {
        SampleRecord {
            seed: s.seed,
            mask_seed: s.mask.seed,
            mask_acceleration: s.mask.acceleration,
            mask_center_fraction: s.mask.center_fraction,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct ClientRecord {
    knobs: ClientKnobs,
    client_mask_seed: u64,
    pool: Vec<SampleRecord>,
    test: Vec<SampleRecord>,
}

/// Text manifest: dataset settings, per-client knobs and every sample seed.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub config: DataConfig,
    pub seed: u64,
    clients: Vec<ClientRecord>,
}

fn policy_name(p: MaskPolicy) -> &'static str {
    match p {
        MaskPolicy::PerSample => "per_sample",
        MaskPolicy::PerClient => "per_client",
    }
}

impl Manifest {
    pub fn of(ds: &Dataset) -> Self {
        let clients = ds
            .clients
            .iter()
            .map(|c| ClientRecord {
                knobs: c.spec.knobs,
                client_mask_seed: c.spec.client_mask_seed,
                pool: c.samples.iter().map(SampleRecord::of).collect(),
                test: c.test.iter().map(SampleRecord::of).collect(),
            })
            .collect();
        Manifest { config: ds.config.clone(), seed: ds.seed, clients }
    }

    pub fn client_count(&self) -> usize {
        self.clients.len()
    }

    /// Pool sample count of each client.
    pub fn samples_per_client(&self) -> Vec<usize> {
        self.clients.iter().map(|c| c.pool.len()).collect()
    }

    pub fn to_text(&self) -> String {
        let c = &self.config;
        let mut s = String::new();
        let _ = writeln!(s, "{MANIFEST_VERSION}");
        let _ = writeln!(s, "seed {}", self.seed);
        let _ = writeln!(s, "size {}", c.size);
        let _ = writeln!(s, "samples_per_client {}", c.samples_per_client);
        let _ = writeln!(s, "test_per_client {}", c.test_per_client);
        let _ = writeln!(s, "ellipses {} {}", c.ellipses_min, c.ellipses_max);
        let _ = writeln!(s, "center_fraction {:?}", c.center_fraction);
        let _ = writeln!(s, "acceleration {:?}", c.acceleration);
        let _ = writeln!(s, "noise_sigma {:?}", c.noise_sigma);
        let _ = writeln!(s, "mask_policy {}", policy_name(c.mask_policy));
        let _ = writeln!(s, "heterogeneous {}", c.heterogeneous);
        let _ = writeln!(s, "clients {}", self.clients.len());
        for (id, cl) in self.clients.iter().enumerate() {
            let _ = writeln!(
                s,
                "client {id} intensity_scale={:?} noise_sigma={:?} acceleration={:?} mask_seed={} samples={} test={}",
                cl.knobs.intensity_scale,
                cl.knobs.noise_sigma,
                cl.knobs.acceleration,
                cl.client_mask_seed,
                cl.pool.len(),
                cl.test.len()
            );
            for (kind, list) in [("pool", &cl.pool), ("test", &cl.test)] {
                for (i, r) in list.iter().enumerate() {
                    let _ = writeln!(
                        s,
                        "{kind} {id} {i} seed={} mask_seed={} mask_acceleration={:?} mask_center_fraction={:?}",
                        r.seed, r.mask_seed, r.mask_acceleration, r.mask_center_fraction
                    );
                }
            }
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let bad = |line: &str| Error::Format(format!("manifest: cannot parse line {line:?}"));
        let mut lines = text.lines();
        if lines.next() != Some(MANIFEST_VERSION) {
            return Err(Error::Format("manifest: missing or unsupported version line".into()));
        }
        let mut header = std::collections::BTreeMap::new();
        let mut clients: Vec<ClientRecord> = Vec::new();
        for line in lines {
            let mut words = line.split_whitespace();
            let key = words.next().ok_or_else(|| bad(line))?;
            let rest: Vec<&str> = words.collect();
            match key {
                "client" | "pool" | "test" => {
                    let kv = |name: &str| -> Result<&str> {
                        rest.iter()
                            .find_map(|w| w.strip_prefix(name).and_then(|v| v.strip_prefix('=')))
                            .ok_or_else(|| bad(line))
                    };
                    let num = |name: &str| -> Result<f64> { kv(name)?.parse().map_err(|_| bad(line)) };
                    let int = |name: &str| -> Result<u64> { kv(name)?.parse().map_err(|_| bad(line)) };
                    let id: usize = rest.first().and_then(|v| v.parse().ok()).ok_or_else(|| bad(line))?;
                    if key == "client" {
                        if id != clients.len() {
                            return Err(bad(line));
                        }
                        clients.push(ClientRecord {
                            knobs: ClientKnobs {
                                intensity_scale: num("intensity_scale")?,
                                noise_sigma: num("noise_sigma")?,
                                acceleration: num("acceleration")?,
                            },
                            client_mask_seed: int("mask_seed")?,
                            pool: Vec::new(),
                            test: Vec::new(),
                        });
                    } else {
                        let record = SampleRecord {
                            seed: int("seed")?,
                            mask_seed: int("mask_seed")?,
                            mask_acceleration: num("mask_acceleration")?,
                            mask_center_fraction: num("mask_center_fraction")?,
                        };
                        if id + 1 != clients.len() {
                            return Err(bad(line));
                        }
                        let client = &mut clients[id];
                        let list = if key == "pool" { &mut client.pool } else { &mut client.test };
                        if rest.get(1).and_then(|v| v.parse::<usize>().ok()) != Some(list.len()) {
                            return Err(bad(line));
                        }
                        list.push(record);
                    }
                }
                _ => {
                    if header.insert(key.to_string(), rest.join(" ")).is_some() {
                        return Err(Error::Format(format!("manifest: duplicate key {key}")));
                    }
                }
            }
        }
        let get =
            |k: &str| header.get(k).map(String::as_str).ok_or_else(|| Error::Format(format!("manifest: missing {k}")));
        fn parse<T: std::str::FromStr>(k: &str, v: &str) -> Result<T> {
            v.parse().map_err(|_| Error::Format(format!("manifest: bad value for {k}: {v:?}")))
        }
        let ellipses: Vec<&str> = get("ellipses")?.split(' ').collect();
        if ellipses.len() != 2 {
            return Err(Error::Format("manifest: ellipses needs two bounds".into()));
        }
        let config = DataConfig {
            size: parse("size", get("size")?)?,
            samples_per_client: parse("samples_per_client", get("samples_per_client")?)?,
            test_per_client: parse("test_per_client", get("test_per_client")?)?,
            ellipses_min: parse("ellipses", ellipses[0])?,
            ellipses_max: parse("ellipses", ellipses[1])?,
            center_fraction: parse("center_fraction", get("center_fraction")?)?,
            acceleration: parse("acceleration", get("acceleration")?)?,
            noise_sigma: parse("noise_sigma", get("noise_sigma")?)?,
            mask_policy: match get("mask_policy")? {
                "per_sample" => MaskPolicy::PerSample,
                "per_client" => MaskPolicy::PerClient,
                other => return Err(Error::Format(format!("manifest: unknown mask policy {other:?}"))),
            },
            heterogeneous: parse("heterogeneous", get("heterogeneous")?)?,
        };
        let count: usize = parse("clients", get("clients")?)?;
        let known = [
            "seed",
            "size",
            "samples_per_client",
            "test_per_client",
            "ellipses",
            "center_fraction",
            "acceleration",
            "noise_sigma",
            "mask_policy",
            "heterogeneous",
            "clients",
        ];
        if let Some(k) = header.keys().find(|k| !known.contains(&k.as_str())) {
            return Err(Error::Format(format!("manifest: unknown key {k}")));
        }
        if count != clients.len() {
            return Err(Error::Format(format!("manifest: header lists {count} clients, found {}", clients.len())));
        }
        Ok(Manifest { config, seed: parse("seed", get("seed")?)?, clients })
    }
}

fn client_dir(root: &Path, id: usize) -> PathBuf {
    root.join(format!("client_{id:02}"))
}

/// Writes `ds` under `dir`, which must be absent or empty.
pub fn write_archive(dir: &Path, ds: &Dataset) -> Result<()> {
    if dir.exists() && fs::read_dir(dir)?.next().is_some() {
        return Err(Error::Data(format!("{} is not empty", dir.display())));
    }
    fs::create_dir_all(dir)?;
    for c in &ds.clients {
        let cd = client_dir(dir, c.id);
        fs::create_dir_all(&cd)?;
        for (kind, list) in [("pool", &c.samples), ("test", &c.test)] {
            for (i, s) in list.iter().enumerate() {
                let (raster, mask) = encode_sample(s);
                fs::write(cd.join(format!("{kind}_{i:04}.f64")), raster)?;
                fs::write(cd.join(format!("{kind}_{i:04}.mask")), mask)?;
            }
        }
    }
    fs::write(dir.join(MANIFEST), Manifest::of(ds).to_text())?;
    Ok(())
}

pub fn read_archive(dir: &Path) -> Result<Dataset> {
    let text = fs::read_to_string(dir.join(MANIFEST))
        .map_err(|e| Error::Data(format!("cannot read manifest in {}: {e}", dir.display())))?;
    let m = Manifest::parse(&text)?;
    let cfg = &m.config;
    let clients = m
        .clients
        .iter()
        .enumerate()
        .map(|(id, rec)| {
            let cd = client_dir(dir, id);
            let load = |kind: &str, list: &[SampleRecord]| -> Result<Vec<Sample>> {
                list.iter()
                    .enumerate()
                    .map(|(i, r)| {
                        let stem = format!("{kind}_{i:04}");
                        decode_sample(&cd.join(format!("{stem}.f64")), &cd.join(format!("{stem}.mask")), cfg.size, r)
                    })
                    .collect()
            };
            let spec = PhantomSpec {
                size: cfg.size,
                ellipses: (cfg.ellipses_min, cfg.ellipses_max),
                center_fraction: cfg.center_fraction,
                mask_policy: cfg.mask_policy,
                knobs: rec.knobs,
                client_mask_seed: rec.client_mask_seed,
                samples: rec.pool.len(),
                test_samples: rec.test.len(),
            };
            Ok(ClientData { id, spec, samples: load("pool", &rec.pool)?, test: load("test", &rec.test)? })
        })
        .collect::<Result<_>>()
        .map_err(|e: Error| match e {
            Error::Io(io) => Error::Data(format!("archive {}: {io}", dir.display())),
            other => other,
        })?;
    Ok(Dataset { config: m.config.clone(), seed: m.seed, clients })
}

/// SHA-256 over every file of the archive (relative path, length, bytes) in
/// sorted path order, as lowercase hex.
pub fn dataset_digest(dir: &Path) -> Result<String> {
    let mut files = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d)? {
            let p = entry?.path();
            if p.is_dir() {
                stack.push(p);
            } else {
                files.push(p);
            }
        }
    }
    let mut rel: Vec<(String, PathBuf)> = files
        .into_iter()
        .map(|p| {
            let r = p.strip_prefix(dir).expect("under root").to_string_lossy().replace('\\', "/");
            (r, p)
        })
        .collect();
    rel.sort();
    let mut h = Sha256::new();
    for (name, path) in rel {
        let bytes = fs::read(&path)?;
        h.update(name.as_bytes());
        h.update([0]);
        h.update((bytes.len() as u64).to_le_bytes());
        h.update(&bytes);
    }
    Ok(h.finalize().iter().map(|b| format!("{b:02x}")).collect())
}
