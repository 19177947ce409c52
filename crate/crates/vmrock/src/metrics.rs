//! Trace recording, CSV export, and the quantitative cutting metrics:
//! per-cycle work, force/velocity statistics, cut frequency and
//! slice-thickness accuracy/consistency/evenness.

use std::io::{self, Write};
use std::path::Path;

use nalgebra::Vector3;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("need at least 2 cut-to-raise transitions, got {0}")]
    TooFewSwitches(usize),
    #[error("empty sample set")]
    EmptySamples,
    #[error("slice {0} has {1} readings, expected 4")]
    BadReadingCount(usize, usize),
    #[error("malformed trace csv: {0}")]
    BadTrace(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// One controller-rate sample of the closed loop.
#[derive(Debug, Clone)]
pub struct TraceRow {
    pub t: f64,
    pub q: Vec<f64>,
    pub qd: Vec<f64>,
    pub p1: Vector3<f64>,
    pub p2: Vector3<f64>,
    pub pb: Vector3<f64>,
    /// 0 = cutting, 1 = raising.
    pub phase: u8,
    /// Wrist wrench force component, N.
    pub force: Vector3<f64>,
    pub e_r: f64,
    pub e_vmc: f64,
    pub wdiss_cum: f64,
    pub welast_cum: f64,
    pub k2: f64,
    pub slice_index: usize,
}

#[derive(Debug, Clone, Default)]
pub struct Trace {
    pub ndof: usize,
    pub rows: Vec<TraceRow>,
}

impl Trace {
    pub fn new(ndof: usize) -> Self {
        Trace { ndof, rows: Vec::new() }
    }

    pub fn duration(&self) -> f64 {
        match (self.rows.first(), self.rows.last()) {
            (Some(a), Some(b)) => b.t - a.t,
            _ => 0.0,
        }
    }

    pub fn header(&self) -> String {
        let mut cols = vec!["t".to_string()];
        for i in 0..self.ndof {
            cols.push(format!("q{i}"));
        }
        for i in 0..self.ndof {
            cols.push(format!("qd{i}"));
        }
        for c in [
            "p1_y", "p1_z", "p1_x", "p2_y", "p2_z", "p2_x", "pb_y", "pb_z", "phase", "Fx",
            "Fy", "Fz", "E_R", "E_VMC", "Wdiss_cum", "Welast_cum", "k2", "slice_index",
        ] {
            cols.push(c.to_string());
        }
        cols.join(",")
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), MetricsError> {
        let mut w = io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "{}", self.header())?;
        for r in &self.rows {
            write!(w, "{}", r.t)?;
            for v in r.q.iter().chain(r.qd.iter()) {
                write!(w, ",{v}")?;
            }
            write!(w, ",{},{},{}", r.p1.y, r.p1.z, r.p1.x)?;
            write!(w, ",{},{},{}", r.p2.y, r.p2.z, r.p2.x)?;
            write!(w, ",{},{}", r.pb.y, r.pb.z)?;
            write!(w, ",{}", r.phase)?;
            write!(w, ",{},{},{}", r.force.x, r.force.y, r.force.z)?;
            write!(w, ",{},{}", r.e_r, r.e_vmc)?;
            write!(w, ",{},{}", r.wdiss_cum, r.welast_cum)?;
            writeln!(w, ",{},{}", r.k2, r.slice_index)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Parse a trace back from its own CSV schema.
    pub fn read_csv(path: &Path) -> Result<Self, MetricsError> {
        let text = std::fs::read_to_string(path)?;
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| MetricsError::BadTrace("missing header".into()))?;
        let cols: Vec<&str> = header.split(',').collect();
        let ndof = cols.iter().filter(|c| c.starts_with('q') && !c.starts_with("qd")).count();
        let expected = 1 + 2 * ndof + 18;
        if cols.len() != expected {
            return Err(MetricsError::BadTrace(format!(
                "header has {} columns, expected {expected}",
                cols.len()
            )));
        }
        let mut trace = Trace::new(ndof);
        for (lineno, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let f: Result<Vec<f64>, _> = line.split(',').map(str::parse::<f64>).collect();
            let f = f.map_err(|e| {
                MetricsError::BadTrace(format!("line {}: {e}", lineno + 2))
            })?;
            if f.len() != expected {
                return Err(MetricsError::BadTrace(format!(
                    "line {} has {} fields, expected {expected}",
                    lineno + 2,
                    f.len()
                )));
            }
            let mut i = 0usize;
            let mut take = |n: usize| {
                let s = &f[i..i + n];
                i += n;
                s.to_vec()
            };
            let t = take(1)[0];
            let q = take(ndof);
            let qd = take(ndof);
            let p1v = take(3);
            let p2v = take(3);
            let pbv = take(2);
            let phase = take(1)[0] as u8;
            let fv = take(3);
            let rest = take(6);
            trace.rows.push(TraceRow {
                t,
                q,
                qd,
                p1: Vector3::new(p1v[2], p1v[0], p1v[1]),
                p2: Vector3::new(p2v[2], p2v[0], p2v[1]),
                pb: Vector3::new(0.0, pbv[0], pbv[1]),
                phase,
                force: Vector3::new(fv[0], fv[1], fv[2]),
                e_r: rest[0],
                e_vmc: rest[1],
                wdiss_cum: rest[2],
                welast_cum: rest[3],
                k2: rest[4],
                slice_index: rest[5] as usize,
            });
        }
        Ok(trace)
    }
}

/// Sample index ranges of complete cycles, each spanning one raise-to-cut
/// switch to the next.
pub fn segment_cycles(trace: &Trace) -> Vec<std::ops::Range<usize>> {
    let starts: Vec<usize> = trace
        .rows
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[0].phase == 1 && w[1].phase == 0)
        .map(|(i, _)| i + 1)
        .collect();
    starts.windows(2).map(|w| w[0]..w[1]).collect()
}

/// Discrete force-displacement work over one cycle, wrist position = p2.
pub fn cycle_work(trace: &Trace, cycle: &std::ops::Range<usize>) -> f64 {
    let rows = &trace.rows[cycle.clone()];
    rows.windows(2)
        .map(|w| w[0].force.dot(&(w[1].p2 - w[0].p2)))
        .sum()
}

/// Mean and max force magnitude over the cutting-phase samples of a cycle.
pub fn force_stats(
    trace: &Trace,
    cycle: &std::ops::Range<usize>,
) -> Result<(f64, f64), MetricsError> {
    let norms: Vec<f64> = trace.rows[cycle.clone()]
        .iter()
        .filter(|r| r.phase == 0)
        .map(|r| r.force.norm())
        .collect();
    stats_of(&norms)
}

/// Mean and max wrist speed over the cutting-phase samples of a cycle,
/// speeds by central/one-sided finite difference of p2.
pub fn velocity_stats(
    trace: &Trace,
    cycle: &std::ops::Range<usize>,
) -> Result<(f64, f64), MetricsError> {
    let rows = &trace.rows;
    let mut speeds = Vec::new();
    for i in cycle.clone() {
        if rows[i].phase != 0 {
            continue;
        }
        let (a, b) = if i == 0 {
            (i, i + 1)
        } else if i + 1 == rows.len() {
            (i - 1, i)
        } else {
            (i - 1, i + 1)
        };
        let dt = rows[b].t - rows[a].t;
        if dt > 0.0 {
            speeds.push((rows[b].p2 - rows[a].p2).norm() / dt);
        }
    }
    stats_of(&speeds)
}

fn stats_of(values: &[f64]) -> Result<(f64, f64), MetricsError> {
    if values.is_empty() {
        return Err(MetricsError::EmptySamples);
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let peak = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok((mean, peak))
}

/// Cut frequency from cut-to-raise transition count: (N - 1) / duration.
pub fn cut_frequency(trace: &Trace) -> Result<f64, MetricsError> {
    let n = count_cut_to_raise(trace);
    cut_frequency_from(n, trace.duration())
}

pub fn count_cut_to_raise(trace: &Trace) -> usize {
    trace
        .rows
        .windows(2)
        .filter(|w| w[0].phase == 0 && w[1].phase == 1)
        .count()
}

pub fn cut_frequency_from(n_switch: usize, duration: f64) -> Result<f64, MetricsError> {
    if n_switch < 2 {
        return Err(MetricsError::TooFewSwitches(n_switch));
    }
    Ok((n_switch as f64 - 1.0) / duration)
}

/// Four thickness readings per slice.
#[derive(Debug, Clone)]
pub struct SliceMeasurementSet {
    pub readings: Vec<[f64; 4]>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThicknessStats {
    /// Grand mean thickness, m.
    pub mean: f64,
    /// Variance of per-slice means about the grand mean, m^2.
    pub var_between: f64,
    /// Mean of the per-slice reading variances, m^2.
    pub var_within: f64,
}

pub fn thickness_stats(set: &SliceMeasurementSet) -> Result<ThicknessStats, MetricsError> {
    if set.readings.is_empty() {
        return Err(MetricsError::EmptySamples);
    }
    let n = set.readings.len() as f64;
    let slice_means: Vec<f64> =
        set.readings.iter().map(|r| r.iter().sum::<f64>() / 4.0).collect();
    let mean = slice_means.iter().sum::<f64>() / n;
    let var_between = slice_means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / n;
    let var_within = set
        .readings
        .iter()
        .zip(&slice_means)
        .map(|(r, m)| r.iter().map(|x| (x - m).powi(2)).sum::<f64>() / 4.0)
        .sum::<f64>()
        / n;
    Ok(ThicknessStats { mean, var_between, var_within })
}

/// Per-cycle metric rows plus the run summary, as written to metrics.csv
/// and report.txt.
#[derive(Debug, Clone)]
pub struct MetricsReport {
    pub cycles: Vec<CycleMetrics>,
    pub f_cut: Option<f64>,
    pub thickness: Option<ThicknessStats>,
}

#[derive(Debug, Clone, Copy)]
pub struct CycleMetrics {
    pub index: usize,
    pub f_avg: f64,
    pub f_peak: f64,
    pub v_avg: f64,
    pub v_peak: f64,
    pub work: f64,
}

pub fn compute_report(trace: &Trace, thickness: Option<ThicknessStats>) -> MetricsReport {
    let cycles = segment_cycles(trace);
    let mut out = Vec::new();
    for (index, c) in cycles.iter().enumerate() {
        let (f_avg, f_peak) = force_stats(trace, c).unwrap_or((0.0, 0.0));
        let (v_avg, v_peak) = velocity_stats(trace, c).unwrap_or((0.0, 0.0));
        out.push(CycleMetrics {
            index,
            f_avg,
            f_peak,
            v_avg,
            v_peak,
            work: cycle_work(trace, c),
        });
    }
    MetricsReport { cycles: out, f_cut: cut_frequency(trace).ok(), thickness }
}

impl MetricsReport {
    pub fn write_csv(&self, path: &Path) -> Result<(), MetricsError> {
        let mut w = io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "cycle,F_avg,F_peak,v_avg,v_peak,work")?;
        for c in &self.cycles {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                c.index, c.f_avg, c.f_peak, c.v_avg, c.v_peak, c.work
            )?;
        }
        Ok(())
    }

    pub fn write_report(&self, path: &Path) -> Result<(), MetricsError> {
        let mut w = io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "cycles = {}", self.cycles.len())?;
        match self.f_cut {
            Some(f) => writeln!(w, "f_cut = {f:.4}")?,
            None => writeln!(w, "f_cut = n/a")?,
        }
        if let Some(t) = &self.thickness {
            writeln!(w, "thickness_mean = {}", t.mean)?;
            writeln!(w, "thickness_var_between = {}", t.var_between)?;
            writeln!(w, "thickness_var_within = {}", t.var_within)?;
        }
        if !self.cycles.is_empty() {
            let mean_work =
                self.cycles.iter().map(|c| c.work).sum::<f64>() / self.cycles.len() as f64;
            writeln!(w, "mean_cycle_work = {mean_work}")?;
        }
        Ok(())
    }
}
