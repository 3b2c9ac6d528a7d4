//! Record parsing, sliding-window scene extraction and the binary dataset
//! container.
//!
//! Text records are one `frame agent x y` per line, whitespace separated;
//! lines starting with `#` and blank lines are skipped.
//!
//! Container layout (little-endian):
//!
//! ```text
//! magic        4 bytes  "TWDS"
//! format_version u32
//! n_obs        u32
//! m_pred       u32
//! frame_interval f64
//! scene_count  u64
//! split        u8       0 train, 1 validation, 2 test
//! per scene:
//!   agent_count u32
//!   agent_ids   u64 * N
//!   observed    (f64 x, f64 y) * N * n_obs   agent-major
//!   future      (f64 x, f64 y) * N * m_pred  agent-major
//! ```

use std::collections::BTreeMap;
use std::io::{Cursor, Read};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CoreError, Result};
use crate::types::{AgentId, Dataset, FutureWindow, ObservedWindow, Scene, Split, Tracks, Waypoint};

pub const DATASET_MAGIC: &[u8; 4] = b"TWDS";
pub const DATASET_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RawRecord {
    pub frame_id: i64,
    pub agent_id: u64,
    pub x: f64,
    pub y: f64,
}

/// Sliding-window extraction parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub n_obs: usize,
    pub m_pred: usize,
    pub stride: usize,
    pub frame_interval: f64,
}

impl WindowSpec {
    /// 8 observed, 12 predicted, 0.4 s per step.
    pub const ETH_UCY: WindowSpec = WindowSpec {
        n_obs: 8,
        m_pred: 12,
        stride: 1,
        frame_interval: 0.4,
    };
    /// 5 observed, 10 predicted, 0.4 s per step.
    pub const NBA: WindowSpec = WindowSpec {
        n_obs: 5,
        m_pred: 10,
        stride: 1,
        frame_interval: 0.4,
    };
    /// 9 observed, 12 predicted, 0.4 s per step.
    pub const TRAJNET: WindowSpec = WindowSpec {
        n_obs: 9,
        m_pred: 12,
        stride: 1,
        frame_interval: 0.4,
    };

    pub fn check(&self) -> Result<()> {
        if self.n_obs < 2 || self.m_pred == 0 || self.stride == 0 {
            return Err(CoreError::invalid(format!(
                "window needs n_obs >= 2, m_pred >= 1, stride >= 1 (got {self:?})"
            )));
        }
        if !(self.frame_interval > 0.0 && self.frame_interval.is_finite()) {
            return Err(CoreError::invalid("frame interval must be positive"));
        }
        Ok(())
    }

    pub fn total(&self) -> usize {
        self.n_obs + self.m_pred
    }
}

fn parse_int(tok: &str) -> Option<i64> {
    tok.parse::<i64>().ok().or_else(|| {
        let v: f64 = tok.parse().ok()?;
        (v.is_finite() && v.fract() == 0.0 && v.abs() < 9.0e15).then_some(v as i64)
    })
}

/// Parses `frame agent x y` lines. Integer fields also accept integral
/// decimals such as `780.0`.
pub fn parse_records(text: &str) -> Result<Vec<RawRecord>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let err = |message: String| CoreError::Parse { line: line_no, message };
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(err(format!("expected 4 fields, found {}", fields.len())));
        }
        let frame_id = parse_int(fields[0]).ok_or_else(|| err(format!("bad frame id `{}`", fields[0])))?;
        let agent = parse_int(fields[1]).ok_or_else(|| err(format!("bad agent id `{}`", fields[1])))?;
        let agent_id = u64::try_from(agent).map_err(|_| err(format!("negative agent id {agent}")))?;
        let coord = |tok: &str| -> Result<f64> {
            let v: f64 = tok.parse().map_err(|_| err(format!("bad coordinate `{tok}`")))?;
            if !v.is_finite() {
                return Err(err(format!("non-finite coordinate `{tok}`")));
            }
            Ok(v)
        };
        out.push(RawRecord {
            frame_id,
            agent_id,
            x: coord(fields[2])?,
            y: coord(fields[3])?,
        });
    }
    Ok(out)
}

/// Renders records in the text format accepted by [`parse_records`].
pub fn format_records(records: &[RawRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&format!("{} {} {} {}\n", r.frame_id, r.agent_id, r.x, r.y));
    }
    out
}

/// Cuts records into scenes. A window starts at every `stride`-th frame of the
/// file's frame grid; only agents present at all `n_obs + m_pred` frames of
/// the window are kept, ordered by agent id. Windows without any complete
/// agent are skipped.
pub fn extract_scenes(records: &[RawRecord], spec: &WindowSpec) -> Result<Dataset> {
    spec.check()?;
    let mut frames: BTreeMap<i64, BTreeMap<u64, Waypoint>> = BTreeMap::new();
    for r in records {
        let slot = frames.entry(r.frame_id).or_default();
        if slot.insert(r.agent_id, Waypoint::new(r.x, r.y)).is_some() {
            return Err(CoreError::invalid(format!(
                "duplicate record for agent {} at frame {}",
                r.agent_id, r.frame_id
            )));
        }
    }
    let ids: Vec<i64> = frames.keys().copied().collect();
    if ids.len() < spec.total() {
        return Err(CoreError::EmptyDataset);
    }
    let step = ids.windows(2).map(|w| w[1] - w[0]).min().expect("at least two frames");
    let first = ids[0];
    if let Some(off) = ids.iter().find(|f| (**f - first) % step != 0) {
        return Err(CoreError::invalid(format!(
            "frame {off} is not on the grid {first} + k*{step}"
        )));
    }
    let last = *ids.last().expect("nonempty");
    let grid_len = ((last - first) / step) as usize + 1;
    let total = spec.total();

    let mut scenes = Vec::new();
    let mut start = 0usize;
    while start + total <= grid_len {
        let window: Option<Vec<&BTreeMap<u64, Waypoint>>> = (0..total)
            .map(|j| frames.get(&(first + (start + j) as i64 * step)))
            .collect();
        if let Some(window) = window {
            let complete: Vec<u64> = window[0]
                .keys()
                .copied()
                .filter(|a| window.iter().all(|f| f.contains_key(a)))
                .collect();
            if !complete.is_empty() {
                let track = |range: std::ops::Range<usize>| -> Vec<Vec<Waypoint>> {
                    complete
                        .iter()
                        .map(|a| range.clone().map(|j| window[j][a]).collect())
                        .collect()
                };
                let observed = ObservedWindow::new(
                    complete.iter().copied().map(AgentId).collect(),
                    Tracks::new(track(0..spec.n_obs))?,
                )?;
                let future = FutureWindow::new(Tracks::new(track(spec.n_obs..total))?);
                scenes.push(Scene::new(observed, future, spec.frame_interval)?);
            }
        }
        start += spec.stride;
    }
    Dataset::new(scenes, Split::Train)
}

fn split_code(split: Split) -> u8 {
    match split {
        Split::Train => 0,
        Split::Validation => 1,
        Split::Test => 2,
    }
}

/// Serializes a dataset to container bytes.
pub fn encode_dataset(dataset: &Dataset) -> Vec<u8> {
    let mut buf = Vec::new();
    buf.extend_from_slice(DATASET_MAGIC);
    // Writes into a Vec cannot fail.
    let w = &mut buf;
    w.write_u32::<LittleEndian>(DATASET_VERSION).unwrap();
    w.write_u32::<LittleEndian>(dataset.n_obs() as u32).unwrap();
    w.write_u32::<LittleEndian>(dataset.m_pred() as u32).unwrap();
    w.write_f64::<LittleEndian>(dataset.frame_interval()).unwrap();
    w.write_u64::<LittleEndian>(dataset.len() as u64).unwrap();
    w.write_u8(split_code(dataset.split())).unwrap();
    for scene in dataset.scenes() {
        let obs = scene.observed();
        w.write_u32::<LittleEndian>(obs.agents() as u32).unwrap();
        for id in obs.agent_ids() {
            w.write_u64::<LittleEndian>(id.0).unwrap();
        }
        for p in obs.points().iter().chain(scene.future().points()) {
            w.write_f64::<LittleEndian>(p.x).unwrap();
            w.write_f64::<LittleEndian>(p.y).unwrap();
        }
    }
    buf
}

fn truncated(e: std::io::Error) -> CoreError {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        CoreError::Format("truncated dataset container".into())
    } else {
        CoreError::Io(e)
    }
}

/// Parses container bytes.
pub fn decode_dataset(bytes: &[u8]) -> Result<Dataset> {
    let mut r = Cursor::new(bytes);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(truncated)?;
    if &magic != DATASET_MAGIC {
        return Err(CoreError::Format(format!("bad magic {magic:?}, expected \"TWDS\"")));
    }
    let version = r.read_u32::<LittleEndian>().map_err(truncated)?;
    if version != DATASET_VERSION {
        return Err(CoreError::Format(format!(
            "container version {version} not supported (expected {DATASET_VERSION})"
        )));
    }
    let n = r.read_u32::<LittleEndian>().map_err(truncated)? as usize;
    let m = r.read_u32::<LittleEndian>().map_err(truncated)? as usize;
    let dt = r.read_f64::<LittleEndian>().map_err(truncated)?;
    let count = r.read_u64::<LittleEndian>().map_err(truncated)?;
    let split = match r.read_u8().map_err(truncated)? {
        0 => Split::Train,
        1 => Split::Validation,
        2 => Split::Test,
        other => return Err(CoreError::Format(format!("unknown split code {other}"))),
    };
    if count == 0 {
        return Err(CoreError::EmptyDataset);
    }
    if n < 2 || m == 0 {
        return Err(CoreError::Format(format!("invalid window sizes n={n}, m={m}")));
    }
    let read_points = |r: &mut Cursor<&[u8]>, len: usize| -> Result<Vec<Waypoint>> {
        (0..len)
            .map(|_| {
                let x = r.read_f64::<LittleEndian>().map_err(truncated)?;
                let y = r.read_f64::<LittleEndian>().map_err(truncated)?;
                Ok(Waypoint::new(x, y))
            })
            .collect()
    };
    let mut scenes = Vec::new();
    for _ in 0..count {
        let agents = r.read_u32::<LittleEndian>().map_err(truncated)? as usize;
        if agents == 0 {
            return Err(CoreError::Format("scene with zero agents".into()));
        }
        // Guard against absurd counts before allocating.
        let remaining = bytes.len() as u64 - r.position();
        if (agents as u64) * (8 + 16 * (n + m) as u64) > remaining {
            return Err(CoreError::Format("truncated dataset container".into()));
        }
        let ids = (0..agents)
            .map(|_| r.read_u64::<LittleEndian>().map(AgentId).map_err(truncated))
            .collect::<Result<Vec<_>>>()?;
        let obs = read_points(&mut r, agents * n)?;
        let fut = read_points(&mut r, agents * m)?;
        let observed = ObservedWindow::new(ids, Tracks::from_flat(agents, n, obs)?)?;
        let future = FutureWindow::new(Tracks::from_flat(agents, m, fut)?);
        scenes.push(Scene::new(observed, future, dt)?);
    }
    if (r.position() as usize) != bytes.len() {
        return Err(CoreError::Format("trailing bytes after last scene".into()));
    }
    Dataset::new(scenes, split)
}

pub fn write_dataset(path: &Path, dataset: &Dataset) -> Result<()> {
    std::fs::write(path, encode_dataset(dataset))?;
    Ok(())
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    decode_dataset(&std::fs::read(path)?)
}

/// Hex SHA-256 of the container encoding.
pub fn dataset_digest(dataset: &Dataset) -> String {
    Sha256::digest(encode_dataset(dataset))
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_two_records() {
        let recs = parse_records("0 1 0.0 0.0\n10 1 1.0 0.5").unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(
            recs[1],
            RawRecord {
                frame_id: 10,
                agent_id: 1,
                x: 1.0,
                y: 0.5
            }
        );
    }

    #[test]
    fn comments_and_blank_lines_skipped() {
        assert!(parse_records("# comment").unwrap().is_empty());
        assert_eq!(parse_records("# h\n\n0 1 0 0\n").unwrap().len(), 1);
    }

    #[test]
    fn eth_style_float_ids_accepted() {
        let recs = parse_records("780.0\t1.0\t8.46\t3.59").unwrap();
        assert_eq!(recs[0].frame_id, 780);
        assert_eq!(recs[0].agent_id, 1);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        match parse_records("0 1 abc 0.0") {
            Err(CoreError::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("{other:?}"),
        }
        match parse_records("# x\n0 1 0 0\n1 2 3\n") {
            Err(CoreError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        assert!(parse_records("0 1 inf 0").is_err());
        assert!(parse_records("0 1 NaN 0").is_err());
        assert!(parse_records("0 -1 0 0").is_err());
    }

    fn walker(agent: u64, frames: std::ops::Range<i64>) -> Vec<RawRecord> {
        frames
            .map(|f| RawRecord {
                frame_id: f * 10,
                agent_id: agent,
                x: f as f64 * 0.5,
                y: agent as f64,
            })
            .collect()
    }

    #[test]
    fn twenty_frames_one_scene() {
        let ds = extract_scenes(&walker(1, 0..20), &WindowSpec::ETH_UCY).unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds.scenes()[0].dimensions(), (1, 8, 12));
    }

    #[test]
    fn twenty_five_frames_six_scenes() {
        let ds = extract_scenes(&walker(1, 0..25), &WindowSpec::ETH_UCY).unwrap();
        assert_eq!(ds.len(), 25 - 20 + 1);
        let stride3 = WindowSpec {
            stride: 3,
            ..WindowSpec::ETH_UCY
        };
        // starts 0, 3
        assert_eq!(extract_scenes(&walker(1, 0..25), &stride3).unwrap().len(), 2);
    }

    #[test]
    fn incomplete_agent_excluded() {
        let mut recs = walker(1, 0..20);
        recs.extend(walker(2, 0..20).into_iter().filter(|r| r.frame_id != 70));
        recs.extend(walker(0, 0..20));
        let ds = extract_scenes(&recs, &WindowSpec::ETH_UCY).unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds.scenes()[0].observed().agent_ids(), &[AgentId(0), AgentId(1)]);
    }

    #[test]
    fn nothing_complete_is_empty() {
        assert!(matches!(
            extract_scenes(&walker(1, 0..10), &WindowSpec::ETH_UCY),
            Err(CoreError::EmptyDataset)
        ));
    }

    #[test]
    fn off_grid_frame_rejected() {
        let mut recs = walker(1, 0..20);
        recs.push(RawRecord {
            frame_id: 13,
            agent_id: 2,
            x: 0.0,
            y: 0.0,
        });
        assert!(extract_scenes(&recs, &WindowSpec::ETH_UCY).is_err());
    }

    #[test]
    fn container_round_trip_and_errors() {
        let ds = extract_scenes(&walker(3, 0..22), &WindowSpec::ETH_UCY).unwrap();
        let bytes = encode_dataset(&ds);
        assert_eq!(&bytes[..4], b"TWDS");
        assert_eq!(decode_dataset(&bytes).unwrap(), ds);

        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(decode_dataset(&bad), Err(CoreError::Format(_))));

        let mut wrong_version = bytes.clone();
        wrong_version[4] = 7;
        assert!(matches!(decode_dataset(&wrong_version), Err(CoreError::Format(_))));

        assert!(matches!(
            decode_dataset(&bytes[..bytes.len() - 3]),
            Err(CoreError::Format(_))
        ));

        // Header-only container with zero scenes.
        let mut header = bytes[..4 + 4 + 4 + 4 + 8].to_vec();
        header.extend_from_slice(&0u64.to_le_bytes());
        header.push(0);
        assert!(matches!(decode_dataset(&header), Err(CoreError::EmptyDataset)));
    }

    #[test]
    fn digest_is_stable() {
        let ds = extract_scenes(&walker(3, 0..22), &WindowSpec::ETH_UCY).unwrap();
        assert_eq!(dataset_digest(&ds), dataset_digest(&ds.clone()));
        assert_eq!(dataset_digest(&ds).len(), 64);
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.twds");
        let ds = extract_scenes(&walker(3, 0..22), &WindowSpec::NBA).unwrap();
        write_dataset(&path, &ds).unwrap();
        assert_eq!(read_dataset(&path).unwrap(), ds);
    }
}
