//! Plain-text serialization of skeletons and numeric tables.
//!
//! Every float is written with 17 significant digits (`{:.16e}`), which
//! round-trips `f64` exactly.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::pdmp::{Event, Skeleton, ZigZagState};

/// Formats a float with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Provenance written in the preamble of a skeleton file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SkeletonMeta {
    pub target: String,
    pub refresh: String,
    pub seed: u64,
    pub stream: u64,
}

pub const SKELETON_HEADER: &str = "time,kind,position";

pub fn write_skeleton<W: Write>(mut w: W, skeleton: &Skeleton, meta: &SkeletonMeta) -> Result<()> {
    let initial = skeleton.initial();
    writeln!(w, "# target: {}", meta.target)?;
    writeln!(w, "# refresh: {}", meta.refresh)?;
    writeln!(w, "# seed: {}", meta.seed)?;
    writeln!(w, "# stream: {}", meta.stream)?;
    writeln!(w, "# horizon: {}", fmt_f64(skeleton.horizon()))?;
    writeln!(w, "# initial: {},{}", fmt_f64(initial.x), initial.theta)?;
    writeln!(w, "{SKELETON_HEADER}")?;
    for e in skeleton.events() {
        writeln!(w, "{},{},{}", fmt_f64(e.time), e.kind, fmt_f64(e.position))?;
    }
    w.flush()?;
    Ok(())
}

fn parse_f64(s: &str, line: usize) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::Parse(format!("line {line}: bad number `{s}`")))
}

pub fn read_skeleton<R: BufRead>(r: R) -> Result<(Skeleton, SkeletonMeta)> {
    let mut target = None;
    let mut refresh = None;
    let mut seed = None;
    let mut stream = None;
    let mut horizon = None;
    let mut initial: Option<ZigZagState> = None;
    let mut header_seen = false;
    let mut events = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let n = i + 1;
        if let Some(rest) = line.strip_prefix('#') {
            let (key, value) = rest
                .split_once(':')
                .ok_or_else(|| Error::Parse(format!("line {n}: expected `# key: value`")))?;
            let value = value.trim();
            let int = |v: &str| {
                v.parse::<u64>()
                    .map_err(|_| Error::Parse(format!("line {n}: bad integer `{v}`")))
            };
            match key.trim() {
                "target" => target = Some(value.to_string()),
                "refresh" => refresh = Some(value.to_string()),
                "seed" => seed = Some(int(value)?),
                "stream" => stream = Some(int(value)?),
                "horizon" => horizon = Some(parse_f64(value, n)?),
                "initial" => initial = Some(value.parse()?),
                _ => {}
            }
            continue;
        }
        if !header_seen {
            if line.trim() != SKELETON_HEADER {
                return Err(Error::Parse(format!("line {n}: expected header `{SKELETON_HEADER}`")));
            }
            header_seen = true;
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(Error::Parse(format!("line {n}: expected 3 fields")));
        }
        events.push(Event {
            time: parse_f64(fields[0], n)?,
            kind: fields[1].parse()?,
            position: parse_f64(fields[2], n)?,
        });
    }
    let missing = |what: &str| Error::Parse(format!("skeleton file has no `{what}` entry"));
    if !header_seen {
        return Err(Error::Parse("skeleton file has no header".to_string()));
    }
    let meta = SkeletonMeta {
        target: target.ok_or_else(|| missing("target"))?,
        refresh: refresh.ok_or_else(|| missing("refresh"))?,
        seed: seed.ok_or_else(|| missing("seed"))?,
        stream: stream.unwrap_or(0),
    };
    let skeleton = Skeleton::new(
        initial.ok_or_else(|| missing("initial"))?,
        events,
        horizon.ok_or_else(|| missing("horizon"))?,
    )?;
    Ok((skeleton, meta))
}

/// Writes a CSV table of floats with the given header.
pub fn write_table<W: Write>(mut w: W, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    writeln!(w, "{}", header.join(","))?;
    for row in rows {
        let cells: Vec<String> = row.iter().map(|&v| fmt_f64(v)).collect();
        writeln!(w, "{}", cells.join(","))?;
    }
    w.flush()?;
    Ok(())
}
