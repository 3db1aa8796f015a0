//! Plain CSV output and replay. Floats are written in shortest round-trip form.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::runner::{GtSample, Method, ResidualRecord, RunReport, Streams};
use crate::error::{Error, Result};
use crate::geom2d::{Point2, Pose2};
use crate::sensor_sim::{FingerReading, TactileSample, VisualSample};

pub const TRAJECTORY_HEADER: &str =
    "t,gt_x,gt_y,gt_theta,est_x,est_y,est_theta,method,n_contacts,visual_available,step_ms";
pub const RESIDUAL_HEADER: &str = "t,kind,component_index,value";

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn parse_err(line: usize, what: &str) -> Error {
    Error::Config(format!("line {line}: {what}"))
}

fn fields(line: &str) -> Vec<&str> {
    line.split(',').map(str::trim).collect()
}

fn num(s: &str, line: usize) -> Result<f64> {
    s.parse().map_err(|_| parse_err(line, &format!("bad number '{s}'")))
}

fn flag(b: bool) -> u8 {
    u8::from(b)
}

/// Reads data lines after checking the header; yields `(line_number, fields)`.
fn rows(path: &Path, header: &str) -> Result<Vec<(usize, Vec<String>)>> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines();
    let first = lines.next().transpose()?.unwrap_or_default();
    if first.trim() != header {
        return Err(Error::Config(format!("{}: unexpected header '{first}'", path.display())));
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push((i + 2, fields(&line).into_iter().map(String::from).collect()));
    }
    Ok(out)
}

pub fn write_trajectory_csv(w: &mut impl Write, report: &RunReport) -> Result<()> {
    writeln!(w, "{TRAJECTORY_HEADER}")?;
    for trace in &report.traces {
        for ((tick, est), ms) in report.ticks.iter().zip(&trace.estimates).zip(&trace.step_ms) {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{}",
                tick.t,
                tick.gt.x,
                tick.gt.y,
                tick.gt.theta,
                est.x,
                est.y,
                est.theta,
                trace.method.as_str(),
                tick.n_contacts,
                flag(tick.visual_available),
                ms
            )?;
        }
    }
    Ok(())
}

pub fn save_trajectory_csv(path: &Path, report: &RunReport) -> Result<()> {
    let mut w = create(path)?;
    write_trajectory_csv(&mut w, report)?;
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryRow {
    pub t: f64,
    pub gt: Pose2,
    pub est: Pose2,
    pub method: Method,
    pub n_contacts: usize,
    pub visual_available: bool,
    pub step_ms: f64,
}

pub fn read_trajectory_csv(path: &Path) -> Result<Vec<TrajectoryRow>> {
    rows(path, TRAJECTORY_HEADER)?
        .into_iter()
        .map(|(ln, f)| {
            if f.len() != 11 {
                return Err(parse_err(ln, "expected 11 fields"));
            }
            let n = |i: usize| num(&f[i], ln);
            Ok(TrajectoryRow {
                t: n(0)?,
                gt: Pose2 { x: n(1)?, y: n(2)?, theta: n(3)? },
                est: Pose2 { x: n(4)?, y: n(5)?, theta: n(6)? },
                method: f[7].parse()?,
                n_contacts: f[8].parse().map_err(|_| parse_err(ln, "bad n_contacts"))?,
                visual_available: f[9] == "1",
                step_ms: n(10)?,
            })
        })
        .collect()
}

pub fn save_residuals_csv(path: &Path, records: &[ResidualRecord]) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "{RESIDUAL_HEADER}")?;
    for r in records {
        for (i, v) in r.values.iter().enumerate() {
            writeln!(w, "{},{},{},{}", r.t, r.kind.as_str(), i, v)?;
        }
    }
    w.flush()?;
    Ok(())
}

const GT_HEADER: &str = "t,x,y,theta,n_contacts";
const VISUAL_HEADER: &str = "t,x,y,theta,available";
const TACTILE_HEADER: &str = "t,finger,fx,fy,px,py,contact";

/// Writes `ground_truth.csv`, `visual.csv` and `tactile.csv` into `dir`.
pub fn save_streams(dir: &Path, streams: &Streams) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut w = create(&dir.join("ground_truth.csv"))?;
    writeln!(w, "{GT_HEADER}")?;
    for g in &streams.gt {
        writeln!(w, "{},{},{},{},{}", g.t, g.pose.x, g.pose.y, g.pose.theta, g.n_contacts)?;
    }
    w.flush()?;
    let mut w = create(&dir.join("visual.csv"))?;
    writeln!(w, "{VISUAL_HEADER}")?;
    for v in &streams.visual {
        writeln!(w, "{},{},{},{},{}", v.t, v.pose.x, v.pose.y, v.pose.theta, flag(v.available))?;
    }
    w.flush()?;
    let mut w = create(&dir.join("tactile.csv"))?;
    writeln!(w, "{TACTILE_HEADER}")?;
    for s in &streams.tactile {
        for (i, f) in s.fingers.iter().enumerate() {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                s.t,
                i,
                f.force.x,
                f.force.y,
                f.position.x,
                f.position.y,
                flag(f.contact)
            )?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Inverse of [`save_streams`].
pub fn load_streams(dir: &Path) -> Result<Streams> {
    let gt = rows(&dir.join("ground_truth.csv"), GT_HEADER)?
        .into_iter()
        .map(|(ln, f)| {
            if f.len() != 5 {
                return Err(parse_err(ln, "expected 5 fields"));
            }
            Ok(GtSample {
                t: num(&f[0], ln)?,
                pose: Pose2 { x: num(&f[1], ln)?, y: num(&f[2], ln)?, theta: num(&f[3], ln)? },
                n_contacts: f[4].parse().map_err(|_| parse_err(ln, "bad n_contacts"))?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let visual = rows(&dir.join("visual.csv"), VISUAL_HEADER)?
        .into_iter()
        .map(|(ln, f)| {
            if f.len() != 5 {
                return Err(parse_err(ln, "expected 5 fields"));
            }
            Ok(VisualSample {
                t: num(&f[0], ln)?,
                pose: Pose2 { x: num(&f[1], ln)?, y: num(&f[2], ln)?, theta: num(&f[3], ln)? },
                available: f[4] == "1",
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut tactile: Vec<TactileSample> = Vec::new();
    for (ln, f) in rows(&dir.join("tactile.csv"), TACTILE_HEADER)? {
        if f.len() != 7 {
            return Err(parse_err(ln, "expected 7 fields"));
        }
        let t = num(&f[0], ln)?;
        let finger: usize = f[1].parse().map_err(|_| parse_err(ln, "bad finger index"))?;
        let reading = FingerReading {
            force: Point2::new(num(&f[2], ln)?, num(&f[3], ln)?),
            position: Point2::new(num(&f[4], ln)?, num(&f[5], ln)?),
            contact: f[6] == "1",
        };
        match tactile.last_mut() {
            Some(s) if s.t == t && finger == s.fingers.len() => s.fingers.push(reading),
            _ if finger == 0 => tactile.push(TactileSample { t, fingers: vec![reading] }),
            _ => return Err(parse_err(ln, "finger rows out of order")),
        }
    }
    Ok(Streams { gt, visual, tactile })
}

/// Recomputes per-method error summaries and timing from trajectory rows.
pub fn summarize_rows(rows: &[TrajectoryRow]) -> Result<Vec<(Method, super::RmseSummary, super::TimingStats)>> {
    let mut out = Vec::new();
    for m in Method::ALL {
        let sel: Vec<&TrajectoryRow> = rows.iter().filter(|r| r.method == m).collect();
        if sel.is_empty() {
            continue;
        }
        let est: Vec<Pose2> = sel.iter().map(|r| r.est).collect();
        let gt: Vec<Pose2> = sel.iter().map(|r| r.gt).collect();
        let ms: Vec<f64> = sel.iter().map(|r| r.step_ms).collect();
        out.push((m, super::rmse(&est, &gt)?, super::TimingStats::from_samples(&ms)));
    }
    Ok(out)
}
