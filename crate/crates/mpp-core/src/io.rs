//! Versioned structured-text formats (schema "v1").
//!
//! Trajectories are line-oriented: a JSON header object followed by one JSON
//! object per event with fields `{t, mark}`. Tuple marks serialize as arrays
//! with the zero symbol as the literal string `"0"`. Compensators and paths
//! are single JSON documents. All numbers round-trip at full double
//! precision (shortest round-trip decimal).

use std::io::{BufRead, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::compensator::{Compensator, MarkCompensator};
use crate::error::{MppError, Result};
use crate::mark::{Mark, MarkSpace};
use crate::path::{Jump, PiecewisePath, Segment};
use crate::trajectory::Trajectory;

pub const TRAJECTORY_SCHEMA: &str = "mpp-trajectory-v1";
pub const COMPENSATOR_SCHEMA: &str = "mpp-compensator-v1";
pub const PATH_SCHEMA: &str = "mpp-path-v1";

#[derive(Serialize, Deserialize)]
struct TrajectoryHeader {
    schema: String,
    horizon: f64,
    marks: Vec<Mark>,
}

#[derive(Serialize, Deserialize)]
struct EventRecord {
    t: f64,
    mark: Mark,
}

pub fn write_trajectory_v1<W: Write>(out: &mut W, traj: &Trajectory) -> Result<()> {
    let header = TrajectoryHeader {
        schema: TRAJECTORY_SCHEMA.to_string(),
        horizon: traj.horizon(),
        marks: traj.mark_space().labels().to_vec(),
    };
    serde_json::to_writer(&mut *out, &header)?;
    out.write_all(b"\n")?;
    for (t, mark) in traj.iter() {
        serde_json::to_writer(
            &mut *out,
            &EventRecord {
                t,
                mark: mark.clone(),
            },
        )?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_trajectory_v1<R: BufRead>(input: R) -> Result<Trajectory> {
    let mut lines = input.lines();
    let header_line = lines
        .next()
        .ok_or_else(|| MppError::Format("empty trajectory file".into()))??;
    let header: TrajectoryHeader = serde_json::from_str(&header_line)?;
    if header.schema != TRAJECTORY_SCHEMA {
        return Err(MppError::Format(format!(
            "expected schema {TRAJECTORY_SCHEMA}, got {}",
            header.schema
        )));
    }
    let space = Arc::new(MarkSpace::new(header.marks)?);
    let mut events = Vec::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: EventRecord = serde_json::from_str(&line)?;
        events.push((record.t, record.mark));
    }
    Trajectory::new(space, events, header.horizon)
}

#[derive(Serialize, Deserialize)]
struct CompensatorDoc {
    schema: String,
    horizon: f64,
    marks: Vec<MarkCompensatorDoc>,
}

#[derive(Serialize, Deserialize)]
struct MarkCompensatorDoc {
    mark: Mark,
    breakpoints: Vec<(f64, f64)>,
    atoms: Vec<(f64, f64)>,
}

pub fn write_compensator_v1<W: Write>(out: &mut W, comp: &Compensator) -> Result<()> {
    let doc = CompensatorDoc {
        schema: COMPENSATOR_SCHEMA.to_string(),
        horizon: comp.horizon(),
        marks: comp
            .mark_space()
            .labels()
            .iter()
            .zip(comp.per_mark())
            .map(|(mark, mc)| MarkCompensatorDoc {
                mark: mark.clone(),
                breakpoints: mc.breakpoints().to_vec(),
                atoms: mc.atoms().to_vec(),
            })
            .collect(),
    };
    serde_json::to_writer_pretty(&mut *out, &doc)?;
    out.write_all(b"\n")?;
    Ok(())
}

pub fn read_compensator_v1<R: BufRead>(mut input: R) -> Result<Compensator> {
    let mut text = String::new();
    input.read_to_string(&mut text)?;
    let doc: CompensatorDoc = serde_json::from_str(&text)?;
    if doc.schema != COMPENSATOR_SCHEMA {
        return Err(MppError::Format(format!(
            "expected schema {COMPENSATOR_SCHEMA}, got {}",
            doc.schema
        )));
    }
    let space = Arc::new(MarkSpace::new(
        doc.marks.iter().map(|m| m.mark.clone()).collect(),
    )?);
    let per_mark = doc
        .marks
        .into_iter()
        .map(|m| MarkCompensator::new(m.breakpoints, m.atoms))
        .collect::<Result<Vec<_>>>()?;
    Compensator::new(space, per_mark, doc.horizon)
}

#[derive(Serialize, Deserialize)]
struct PathDoc {
    schema: String,
    initial: f64,
    segments: Vec<(f64, f64)>,
    jumps: Vec<(f64, f64)>,
}

pub fn write_path_v1<W: Write>(out: &mut W, path: &PiecewisePath) -> Result<()> {
    let doc = PathDoc {
        schema: PATH_SCHEMA.to_string(),
        initial: path.initial(),
        segments: path.segments().iter().map(|s| (s.start, s.slope)).collect(),
        jumps: path.jumps().iter().map(|j| (j.time, j.size)).collect(),
    };
    serde_json::to_writer_pretty(&mut *out, &doc)?;
    out.write_all(b"\n")?;
    Ok(())
}

pub fn read_path_v1<R: BufRead>(mut input: R) -> Result<PiecewisePath> {
    let mut text = String::new();
    input.read_to_string(&mut text)?;
    let doc: PathDoc = serde_json::from_str(&text)?;
    if doc.schema != PATH_SCHEMA {
        return Err(MppError::Format(format!(
            "expected schema {PATH_SCHEMA}, got {}",
            doc.schema
        )));
    }
    PiecewisePath::new(
        doc.initial,
        doc.segments
            .into_iter()
            .map(|(start, slope)| Segment { start, slope })
            .collect(),
        doc.jumps
            .into_iter()
            .map(|(time, size)| Jump { time, size })
            .collect(),
    )
}

/// CSV export of a path sampled at its breakpoints and jump times:
/// columns `time,value,jump` with the post-jump value.
pub fn write_path_csv<W: Write>(out: &mut W, path: &PiecewisePath) -> Result<()> {
    writeln!(out, "time,value,jump")?;
    let mut times: Vec<f64> = std::iter::once(0.0)
        .chain(path.segments().iter().map(|s| s.start))
        .chain(path.jumps().iter().map(|j| j.time))
        .collect();
    times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    times.dedup();
    for t in times {
        writeln!(out, "{},{},{}", t, path.value(t), path.jump_at(t))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{simulate_common_shock, simulate_poisson, CommonShockSpec, PoissonSpec};

    #[test]
    fn trajectory_roundtrip_is_exact() {
        let spec = PoissonSpec::new([("a", 2.0), ("b", 1.0)], 3.0);
        let (traj, _) = simulate_poisson(&spec, 9).unwrap();
        let mut buf = Vec::new();
        write_trajectory_v1(&mut buf, &traj).unwrap();
        let back = read_trajectory_v1(buf.as_slice()).unwrap();
        assert_eq!(back.events(), traj.events());
        assert_eq!(back.horizon(), traj.horizon());
        assert_eq!(back.mark_space().labels(), traj.mark_space().labels());
    }

    #[test]
    fn tuple_marks_serialize_as_arrays() {
        use crate::merge::merge;
        let spec = CommonShockSpec::two_component("1", 1.0, "2", 1.0, 0.7, 4.0);
        let comps = simulate_common_shock(&spec, 3).unwrap();
        let trajs: Vec<Trajectory> = comps.into_iter().map(|(t, _)| t).collect();
        let merged = merge(&trajs).unwrap();
        let mut buf = Vec::new();
        write_trajectory_v1(&mut buf, merged.trajectory()).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(
            text.contains("[\"1\",\"0\"]")
                || text.contains("[\"0\",\"2\"]")
                || text.contains("[\"1\",\"2\"]")
        );
        let back = read_trajectory_v1(buf.as_slice()).unwrap();
        assert_eq!(back.events(), merged.trajectory().events());
    }

    #[test]
    fn compensator_roundtrip_is_exact() {
        let spec = PoissonSpec::new([("a", 0.3)], 2.0);
        let (_, comp) = simulate_poisson(&spec, 1).unwrap();
        let mut buf = Vec::new();
        write_compensator_v1(&mut buf, &comp).unwrap();
        let back = read_compensator_v1(buf.as_slice()).unwrap();
        assert_eq!(back, comp);
    }

    #[test]
    fn path_roundtrip_and_csv_shape() {
        let path = PiecewisePath::new(
            0.25,
            vec![Segment {
                start: 0.0,
                slope: -1.5,
            }],
            vec![Jump {
                time: 0.1234567890123456,
                size: 1.0,
            }],
        )
        .unwrap();
        let mut buf = Vec::new();
        write_path_v1(&mut buf, &path).unwrap();
        let back = read_path_v1(buf.as_slice()).unwrap();
        assert_eq!(back, path);

        let mut csv = Vec::new();
        write_path_csv(&mut csv, &path).unwrap();
        let text = String::from_utf8(csv).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("time,value,jump"));
        for line in lines {
            assert_eq!(line.split(',').count(), 3);
        }
        // shortest round-trip decimal re-parses bitwise
        assert!(text.contains("0.1234567890123456"));
    }
}
