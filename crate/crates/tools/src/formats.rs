//! On-disk formats: model, policy and initial-law JSON, trajectory CSV and
//! binary, cost vectors, and count tables.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use cmc_core::estimate::{CountTable, EstimatedModel};
use cmc_core::model::StateControl;
use cmc_core::{CmcModel, InitialLaw, LoggingPolicy, Trajectory};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::meta::Meta;

/// Magic bytes of the binary trajectory format.
pub const BINARY_MAGIC: &[u8; 4] = b"CMCT";
/// Version byte written after the magic.
pub const BINARY_VERSION: u8 = 1;

/// Reads any JSON document.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    serde_json::from_reader(BufReader::new(f)).with_context(|| format!("parsing {}", path.display()))
}

/// Writes pretty JSON followed by a newline.
pub fn write_json<T: Serialize>(w: &mut dyn Write, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut *w, value)?;
    writeln!(w)?;
    Ok(())
}

pub fn read_model(path: &Path) -> Result<CmcModel> {
    read_json(path)
}

pub fn read_policy(path: &Path) -> Result<LoggingPolicy> {
    read_json(path)
}

pub fn read_initial_law(path: &Path) -> Result<InitialLaw> {
    read_json(path)
}

/// Output format selector shared by all subcommands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Trajectory CSV: metadata comment lines, then `i,X_i,a_i[,omega_i]`.
pub fn write_trajectory_csv(w: &mut dyn Write, traj: &Trajectory, d: usize, k: usize, meta: &Meta) -> Result<()> {
    meta.write_comments(w)?;
    writeln!(w, "# d: {d}")?;
    writeln!(w, "# k: {k}")?;
    writeln!(w, "# seed: {}", traj.seed)?;
    if let Some(h) = traj.episode_horizon {
        writeln!(w, "# episode_horizon: {h}")?;
    }
    let mut out = csv::Writer::from_writer(w);
    match &traj.greedy_flags {
        Some(flags) => {
            out.write_record(["i", "X_i", "a_i", "omega_i"])?;
            for (i, (p, f)) in traj.pairs.iter().zip(flags).enumerate() {
                out.write_record([
                    i.to_string(),
                    p.state.to_string(),
                    p.control.to_string(),
                    u8::from(*f).to_string(),
                ])?;
            }
        }
        None => {
            out.write_record(["i", "X_i", "a_i"])?;
            for (i, p) in traj.pairs.iter().enumerate() {
                out.write_record([i.to_string(), p.state.to_string(), p.control.to_string()])?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

/// Reads a trajectory CSV. Comment lines start with `#`; `d`, `k`, the seed
/// and the episode horizon are recovered from them when present.
pub fn read_trajectory_csv(r: impl Read) -> Result<(Trajectory, Option<(usize, usize)>)> {
    let mut seed = 0u64;
    let mut horizon = None;
    let (mut d, mut k) = (None, None);
    let mut body = String::new();
    for line in BufReader::new(r).lines() {
        let line = line?;
        if let Some(c) = line.strip_prefix('#') {
            let c = c.trim();
            if let Some(v) = c.strip_prefix("d:") {
                d = Some(v.trim().parse().context("d comment")?);
            } else if let Some(v) = c.strip_prefix("k:") {
                k = Some(v.trim().parse().context("k comment")?);
            } else if let Some(v) = c.strip_prefix("seed:") {
                seed = v.trim().parse().context("seed comment")?;
            } else if let Some(v) = c.strip_prefix("episode_horizon:") {
                horizon = Some(v.trim().parse().context("episode_horizon comment")?);
            }
            continue;
        }
        body.push_str(&line);
        body.push('\n');
    }
    let mut rd = csv::Reader::from_reader(body.as_bytes());
    let headers = rd.headers()?.clone();
    let names: Vec<&str> = headers.iter().collect();
    let with_flags = match names.as_slice() {
        ["i", "X_i", "a_i"] => false,
        ["i", "X_i", "a_i", "omega_i"] => true,
        _ => bail!("unexpected trajectory header {:?}", names),
    };
    let mut pairs = Vec::new();
    let mut flags = Vec::new();
    for (row, rec) in rd.records().enumerate() {
        let rec = rec?;
        let i: usize = rec[0].parse()?;
        ensure!(i == row, "row {row} carries index {i}");
        pairs.push(StateControl::new(rec[1].parse()?, rec[2].parse()?));
        if with_flags {
            flags.push(match &rec[3] {
                "0" => false,
                "1" => true,
                other => bail!("omega_i must be 0 or 1, got {other}"),
            });
        }
    }
    let traj = Trajectory {
        pairs,
        seed,
        greedy_flags: with_flags.then_some(flags),
        episode_horizon: horizon,
    };
    let dims = d.zip(k);
    if let Some((d, k)) = dims {
        traj.validate(d, k)?;
    }
    Ok((traj, dims))
}

/// Header fields of a binary trajectory besides the pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BinaryHeader {
    pub d: usize,
    pub k: usize,
    /// First eight bytes of the SHA-256 of the policy JSON; 0 if unknown.
    pub policy_hash: u64,
}

/// Binary trajectory: `CMCT`, version, flag byte (bit 0: ω present, bit 1:
/// horizon present), then little-endian `d: u32, k: u32, seed: u64,
/// policy_hash: u64, horizon: u64, len: u64`, `len` pairs of `u32` state and
/// control, and `len` ω bytes when present.
pub fn write_trajectory_binary(w: &mut dyn Write, traj: &Trajectory, header: BinaryHeader) -> Result<()> {
    w.write_all(BINARY_MAGIC)?;
    let flags = u8::from(traj.greedy_flags.is_some()) | (u8::from(traj.episode_horizon.is_some()) << 1);
    w.write_all(&[BINARY_VERSION, flags])?;
    w.write_all(&u32::try_from(header.d)?.to_le_bytes())?;
    w.write_all(&u32::try_from(header.k)?.to_le_bytes())?;
    w.write_all(&traj.seed.to_le_bytes())?;
    w.write_all(&header.policy_hash.to_le_bytes())?;
    w.write_all(&(traj.episode_horizon.unwrap_or(0) as u64).to_le_bytes())?;
    w.write_all(&(traj.pairs.len() as u64).to_le_bytes())?;
    for p in &traj.pairs {
        w.write_all(&u32::try_from(p.state)?.to_le_bytes())?;
        w.write_all(&u32::try_from(p.control)?.to_le_bytes())?;
    }
    if let Some(f) = &traj.greedy_flags {
        let bytes: Vec<u8> = f.iter().map(|&b| u8::from(b)).collect();
        w.write_all(&bytes)?;
    }
    Ok(())
}

fn take<const N: usize>(r: &mut impl Read) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b)?;
    Ok(b)
}

/// Reads and validates a binary trajectory.
pub fn read_trajectory_binary(r: impl Read) -> Result<(Trajectory, BinaryHeader)> {
    let mut r = BufReader::new(r);
    ensure!(&take::<4>(&mut r)? == BINARY_MAGIC, "not a CMCT file");
    let [version, flags] = take::<2>(&mut r)?;
    ensure!(version == BINARY_VERSION, "unsupported CMCT version {version}");
    let d = u32::from_le_bytes(take(&mut r)?) as usize;
    let k = u32::from_le_bytes(take(&mut r)?) as usize;
    let seed = u64::from_le_bytes(take(&mut r)?);
    let policy_hash = u64::from_le_bytes(take(&mut r)?);
    let horizon = u64::from_le_bytes(take(&mut r)?) as usize;
    let len = u64::from_le_bytes(take(&mut r)?) as usize;
    let mut pairs = Vec::with_capacity(len.min(1 << 24));
    for _ in 0..len {
        let s = u32::from_le_bytes(take(&mut r)?) as usize;
        let l = u32::from_le_bytes(take(&mut r)?) as usize;
        pairs.push(StateControl::new(s, l));
    }
    let greedy_flags = if flags & 1 == 1 {
        let mut b = vec![0u8; len];
        r.read_exact(&mut b)?;
        ensure!(b.iter().all(|&x| x <= 1), "omega bytes must be 0 or 1");
        Some(b.into_iter().map(|x| x == 1).collect())
    } else {
        None
    };
    let traj = Trajectory {
        pairs,
        seed,
        greedy_flags,
        episode_horizon: (flags & 2 == 2).then_some(horizon),
    };
    traj.validate(d, k)?;
    Ok((traj, BinaryHeader { d, k, policy_hash }))
}

/// Reads a trajectory, choosing the format by the magic bytes. Returns
/// `(d, k)` when the file records them.
pub fn read_trajectory(path: &Path) -> Result<(Trajectory, Option<(usize, usize)>)> {
    let mut f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut head = [0u8; 4];
    let n = f.read(&mut head)?;
    drop(f);
    let f = File::open(path)?;
    if n == 4 && &head == BINARY_MAGIC {
        let (t, h) = read_trajectory_binary(f)?;
        Ok((t, Some((h.d, h.k))))
    } else {
        read_trajectory_csv(f)
    }
}

/// Per-stage costs: either `state,cost` (one row per state) or
/// `state,control,cost` (one row per pair). Returns a `d × k` table; the
/// first form repeats the state cost across controls.
pub fn read_cost_csv(r: impl Read, d: usize, k: usize) -> Result<Vec<Vec<f64>>> {
    let mut rd = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(r);
    let names: Vec<String> = rd.headers()?.iter().map(str::to_owned).collect();
    let mut table = vec![vec![f64::NAN; k]; d];
    let by_pair = match names.iter().map(String::as_str).collect::<Vec<_>>().as_slice() {
        ["state", "cost"] => false,
        ["state", "control", "cost"] => true,
        other => bail!("unexpected cost header {:?}", other),
    };
    for rec in rd.records() {
        let rec = rec?;
        let s: usize = rec[0].parse()?;
        ensure!(s < d, "state {s} out of range");
        if by_pair {
            let l: usize = rec[1].parse()?;
            ensure!(l < k, "control {l} out of range");
            table[s][l] = rec[2].parse()?;
        } else {
            let c: f64 = rec[1].parse()?;
            table[s].fill(c);
        }
    }
    ensure!(
        table.iter().flatten().all(|x| x.is_finite()),
        "cost table is incomplete"
    );
    Ok(table)
}

/// Transition counts and the estimate as
/// `state,control,next_state,count,m_hat`.
pub fn write_estimate_csv(w: &mut dyn Write, counts: &CountTable, est: &EstimatedModel, meta: &Meta) -> Result<()> {
    meta.write_comments(w)?;
    let undefined: Vec<String> = est.undefined_rows.iter().map(|[s, l]| format!("{s}:{l}")).collect();
    writeln!(w, "# undefined_rows: {}", undefined.join(","))?;
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["state", "control", "next_state", "count", "m_hat"])?;
    for s in 0..counts.d {
        for l in 0..counts.k {
            for t in 0..counts.d {
                out.write_record([
                    s.to_string(),
                    l.to_string(),
                    t.to_string(),
                    counts.transition(s, l, t).to_string(),
                    est.model.row(s, l)[t].to_string(),
                ])?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

/// Opens `path` for writing, or stdout for `None` or `-`.
pub fn open_out(path: Option<&Path>) -> Result<Box<dyn Write>> {
    match path {
        Some(p) if p.as_os_str() != "-" => {
            let f = File::create(p).with_context(|| format!("creating {}", p.display()))?;
            Ok(Box::new(BufWriter::new(f)))
        }
        _ => Ok(Box::new(BufWriter::new(std::io::stdout().lock()))),
    }
}

/// Writes rows of a serializable record type as CSV after the metadata.
pub fn write_rows<T: Serialize>(w: &mut dyn Write, rows: &[T], meta: &Meta) -> Result<()> {
    meta.write_comments(w)?;
    write_csv_rows(w, rows)
}

/// Writes a header row and one row per record.
pub fn write_csv_rows<T: Serialize>(w: &mut dyn Write, rows: &[T]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

/// JSON document `{ "meta": …, "result": … }`.
pub fn write_json_with_meta<T: Serialize>(w: &mut dyn Write, result: &T, meta: &Meta) -> Result<()> {
    #[derive(Serialize)]
    struct Doc<'a, T> {
        meta: &'a Meta,
        result: &'a T,
    }
    write_json(w, &Doc { meta, result })
}
