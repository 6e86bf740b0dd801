//! Grid sweeps: one run per (spots, redundancy, p_b0, mode, seed) cell,
//! written cell by cell so an interrupted sweep resumes where it stopped.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{fmt_kpi, RunMetrics};
use crate::config::{ScenarioConfig, Spacing, SweepSection};
use crate::sim::{run_scenario, RunOptions};
use crate::trustnet::OperationMode;

/// Minimum yearly STR the service needs.
pub const FEASIBLE_STR: f64 = 0.6;

pub const MESH_HEADER: &str = "spots,redundancy,p_b0,mode,seed,fsr,pdr,str,bnt";

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("invalid sweep grid: {0}")]
    Grid(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("{0} holds results of a different sweep; pass --fresh to discard them")]
    StaleResults(String),
    #[error("worker pool: {0}")]
    Pool(String),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> SweepError + '_ {
    move |source| SweepError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Fault probabilities between `min` and `max` inclusive.
pub fn p_b0_grid(min: f64, max: f64, points: usize, spacing: Spacing) -> Result<Vec<f64>, SweepError> {
    if points == 0 || !(min > 0.0) || !(max >= min) || max > 1.0 {
        return Err(SweepError::Grid(format!(
            "p_b0 range [{min}, {max}] with {points} points"
        )));
    }
    if points == 1 {
        return Ok(vec![min]);
    }
    let step = (points - 1) as f64;
    Ok((0..points)
        .map(|i| {
            let u = i as f64 / step;
            match spacing {
                Spacing::Log => (min.ln() + u * (max.ln() - min.ln())).exp(),
                Spacing::Linear => min + u * (max - min),
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub spots: Vec<usize>,
    pub redundancy: Vec<usize>,
    pub p_b0: Vec<f64>,
    pub modes: Vec<OperationMode>,
    pub seeds: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub index: usize,
    pub spots: usize,
    pub redundancy: usize,
    pub p_index: usize,
    pub p_b0: f64,
    pub mode: OperationMode,
    pub replica: u64,
    /// Seed of the run; shared by all modes of the same point and replica
    /// so modes are compared on identical sensing histories.
    pub seed: u64,
}

impl Cell {
    pub fn key(&self) -> String {
        format!(
            "s{}_n{}_p{}_{}_r{}",
            self.spots, self.redundancy, self.p_index, self.mode, self.replica
        )
    }

    /// Consensus modes are meaningless below four members.
    pub fn applicable(&self) -> bool {
        self.mode.check_group(self.redundancy).is_ok()
    }
}

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn cell_seed(master: u64, spots: usize, redundancy: usize, p_index: usize, replica: u64) -> u64 {
    [spots as u64, redundancy as u64, p_index as u64, replica]
        .into_iter()
        .fold(mix(master), |acc, v| mix(acc ^ v))
}

impl SweepGrid {
    pub fn from_section(s: &SweepSection) -> Result<Self, SweepError> {
        if s.spots.is_empty() || s.redundancy.is_empty() || s.modes.is_empty() || s.seeds == 0 {
            return Err(SweepError::Grid(
                "spots, redundancy, modes and seeds must be non-empty".into(),
            ));
        }
        if s.spots.contains(&0) || s.redundancy.iter().any(|n| !(1..=10).contains(n)) {
            return Err(SweepError::Grid("spots > 0 and redundancy in 1..=10".into()));
        }
        Ok(Self {
            spots: s.spots.clone(),
            redundancy: s.redundancy.clone(),
            p_b0: p_b0_grid(s.p_b0_min, s.p_b0_max, s.p_b0_points, s.spacing)?,
            modes: s.modes.clone(),
            seeds: s.seeds,
        })
    }

    /// Cartesian product in a fixed order.
    pub fn cells(&self, master_seed: u64) -> Vec<Cell> {
        let mut out = Vec::new();
        for &spots in &self.spots {
            for &redundancy in &self.redundancy {
                for (p_index, &p_b0) in self.p_b0.iter().enumerate() {
                    for &mode in &self.modes {
                        for replica in 0..self.seeds {
                            out.push(Cell {
                                index: out.len(),
                                spots,
                                redundancy,
                                p_index,
                                p_b0,
                                mode,
                                replica,
                                seed: cell_seed(master_seed, spots, redundancy, p_index, replica),
                            });
                        }
                    }
                }
            }
        }
        out
    }
}

pub fn cell_config(base: &ScenarioConfig, cell: &Cell) -> ScenarioConfig {
    let mut cfg = base.clone();
    cfg.seed = cell.seed;
    cfg.scenario.spots = cell.spots;
    cfg.scenario.redundancy = cell.redundancy;
    cfg.scenario.p_b0 = cell.p_b0;
    cfg.scenario.mode = cell.mode;
    cfg.scenario.persistent_faults.clear();
    cfg.trust.exclude_pairs.clear();
    cfg
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshRow {
    pub spots: usize,
    pub redundancy: usize,
    pub p_b0: f64,
    pub mode: OperationMode,
    pub seed: u64,
    pub fsr: Option<f64>,
    pub pdr: Option<f64>,
    pub str_: Option<f64>,
    pub bnt: f64,
}

impl MeshRow {
    pub fn new(cell: &Cell, m: &RunMetrics) -> Self {
        Self {
            spots: cell.spots,
            redundancy: cell.redundancy,
            p_b0: cell.p_b0,
            mode: cell.mode,
            seed: cell.seed,
            fsr: m.fsr,
            pdr: m.pdr,
            str_: m.str_,
            bnt: m.bnt,
        }
    }

    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{:.6e},{},{},{},{},{},{:.6}",
            self.spots,
            self.redundancy,
            self.p_b0,
            self.mode,
            self.seed,
            fmt_kpi(self.fsr),
            fmt_kpi(self.pdr),
            fmt_kpi(self.str_),
            self.bnt
        )
    }

    pub fn parse(line: &str) -> Option<Self> {
        let f: Vec<&str> = line.trim().split(',').collect();
        if f.len() != 9 {
            return None;
        }
        let kpi = |s: &str| -> Option<Option<f64>> {
            if s == "NA" {
                Some(None)
            } else {
                s.parse().ok().map(Some)
            }
        };
        Some(Self {
            spots: f[0].parse().ok()?,
            redundancy: f[1].parse().ok()?,
            p_b0: f[2].parse().ok()?,
            mode: f[3].parse().ok()?,
            seed: f[4].parse().ok()?,
            fsr: kpi(f[5])?,
            pdr: kpi(f[6])?,
            str_: kpi(f[7])?,
            bnt: f[8].parse().ok()?,
        })
    }
}

/// Writes through a sibling temp file and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), SweepError> {
    let dir = path.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    {
        let mut f = fs::File::create(&tmp).map_err(io_err(&tmp))?;
        f.write_all(contents).map_err(io_err(&tmp))?;
        f.sync_all().map_err(io_err(&tmp))?;
    }
    fs::rename(&tmp, path).map_err(io_err(path))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub total_cells: usize,
    pub completed: Vec<String>,
    pub skipped: Vec<String>,
    pub failed: Vec<FailedCell>,
    pub pending: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedCell {
    pub key: String,
    pub error: String,
}

#[derive(Debug, Clone, Default)]
pub struct SweepOptions {
    pub jobs: Option<usize>,
    /// Stop after this many new cells, leaving the rest pending.
    pub max_new_cells: Option<usize>,
    /// Discard results left by an earlier, different sweep.
    pub fresh: bool,
    pub progress: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeSummary {
    pub mode: OperationMode,
    pub max: f64,
    pub mean: f64,
    pub std: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointSummary {
    pub spots: usize,
    pub redundancy: usize,
    pub p_b0: f64,
    /// Seed-averaged STR per applicable mode.
    pub str_by_mode: BTreeMap<OperationMode, f64>,
}

impl PointSummary {
    pub fn best(&self) -> Option<(OperationMode, f64)> {
        // ties go to the mode listed first
        self.str_by_mode
            .iter()
            .fold(None, |best: Option<(OperationMode, f64)>, (&m, &v)| match best {
                Some((_, b)) if b >= v => best,
                _ => Some((m, v)),
            })
    }

    pub fn feasible(&self) -> bool {
        self.best().is_some_and(|(_, v)| v >= FEASIBLE_STR)
    }
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub rows: Vec<MeshRow>,
    pub manifest: Manifest,
    pub points: Vec<PointSummary>,
    pub summary: Vec<ModeSummary>,
    pub out_dir: PathBuf,
}

impl SweepOutcome {
    pub fn complete(&self) -> bool {
        self.manifest.pending.is_empty() && self.manifest.failed.is_empty()
    }

    pub fn mode_summary(&self, mode: OperationMode) -> Option<&ModeSummary> {
        self.summary.iter().find(|s| s.mode == mode)
    }
}

/// Runs every cell of the base config's sweep section not already on disk.
pub fn run_sweep(
    base: &ScenarioConfig,
    out_dir: &Path,
    opts: &SweepOptions,
) -> Result<SweepOutcome, SweepError> {
    let grid = SweepGrid::from_section(&base.sweep)?;
    let cells = grid.cells(base.seed);
    let cell_dir = out_dir.join("cells");
    fs::create_dir_all(&cell_dir).map_err(io_err(&cell_dir))?;

    // results are only reusable for the exact same base config
    let fingerprint = base.to_json_pretty();
    let fp_path = out_dir.join("sweep_config.json");
    match fs::read_to_string(&fp_path) {
        Ok(old) if old != fingerprint => {
            if !opts.fresh {
                return Err(SweepError::StaleResults(out_dir.display().to_string()));
            }
            fs::remove_dir_all(&cell_dir).map_err(io_err(&cell_dir))?;
            fs::create_dir_all(&cell_dir).map_err(io_err(&cell_dir))?;
        }
        Ok(_) => {}
        Err(e) if e.kind() == io::ErrorKind::NotFound => {}
        Err(e) => return Err(io_err(&fp_path)(e)),
    }
    write_atomic(&fp_path, fingerprint.as_bytes())?;

    let cell_path = |c: &Cell| cell_dir.join(format!("{}.csv", c.key()));
    let mut todo: Vec<&Cell> = cells
        .iter()
        .filter(|c| c.applicable())
        .filter(|c| {
            fs::read_to_string(cell_path(c))
                .ok()
                .and_then(|s| MeshRow::parse(&s))
                .is_none()
        })
        .collect();
    if let Some(limit) = opts.max_new_cells {
        todo.truncate(limit);
    }

    let pool = {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(j) = opts.jobs {
            b = b.num_threads(j.max(1));
        }
        b.build().map_err(|e| SweepError::Pool(e.to_string()))?
    };
    let done = AtomicUsize::new(0);
    let total = todo.len();
    let failures: Vec<FailedCell> = pool.install(|| {
        todo.par_iter()
            .filter_map(|cell| {
                let res = run_scenario(&cell_config(base, cell), RunOptions::default())
                    .map_err(|e| e.to_string())
                    .and_then(|out| {
                        let row = MeshRow::new(cell, &out.metrics);
                        write_atomic(&cell_path(cell), format!("{}\n", row.to_csv()).as_bytes())
                            .map_err(|e| e.to_string())
                    });
                let k = done.fetch_add(1, Ordering::Relaxed) + 1;
                if opts.progress {
                    eprintln!("[{k}/{total}] {}", cell.key());
                }
                res.err().map(|error| FailedCell {
                    key: cell.key(),
                    error,
                })
            })
            .collect()
    });

    let mut manifest = Manifest {
        total_cells: cells.len(),
        ..Default::default()
    };
    let mut rows = Vec::new();
    for c in &cells {
        if !c.applicable() {
            manifest.skipped.push(c.key());
            continue;
        }
        match fs::read_to_string(cell_path(c))
            .ok()
            .and_then(|s| MeshRow::parse(&s))
        {
            Some(row) => {
                rows.push(row);
                manifest.completed.push(c.key());
            }
            None if failures.iter().any(|f| f.key == c.key()) => {}
            None => manifest.pending.push(c.key()),
        }
    }
    manifest.failed = failures;

    let points = summarize_points(&grid, &rows);
    let summary = summarize(&grid.modes, &points);
    write_outputs(out_dir, &grid, &rows, &points, &summary, &manifest)?;
    Ok(SweepOutcome {
        rows,
        manifest,
        points,
        summary,
        out_dir: out_dir.to_path_buf(),
    })
}

/// Seed-averaged STR of every grid point and mode.
pub fn summarize_points(grid: &SweepGrid, rows: &[MeshRow]) -> Vec<PointSummary> {
    let mut acc: BTreeMap<(usize, usize, usize, OperationMode), (f64, usize)> = BTreeMap::new();
    for r in rows {
        let Some(s) = r.str_ else { continue };
        let Some(p) = grid.p_b0.iter().position(|&p| (p - r.p_b0).abs() <= 1e-6 * p) else {
            continue;
        };
        let e = acc.entry((r.spots, r.redundancy, p, r.mode)).or_default();
        e.0 += s;
        e.1 += 1;
    }
    let mut out = Vec::new();
    for &spots in &grid.spots {
        for &redundancy in &grid.redundancy {
            for (p, &p_b0) in grid.p_b0.iter().enumerate() {
                let str_by_mode: BTreeMap<_, _> = grid
                    .modes
                    .iter()
                    .filter_map(|&m| {
                        acc.get(&(spots, redundancy, p, m))
                            .map(|&(sum, k)| (m, sum / k as f64))
                    })
                    .collect();
                out.push(PointSummary {
                    spots,
                    redundancy,
                    p_b0,
                    str_by_mode,
                });
            }
        }
    }
    out
}

/// Max and mean of the seed-averaged STR over the grid, per mode.
pub fn summarize(modes: &[OperationMode], points: &[PointSummary]) -> Vec<ModeSummary> {
    modes
        .iter()
        .filter_map(|&mode| {
            let v: Vec<f64> = points
                .iter()
                .filter_map(|p| p.str_by_mode.get(&mode).copied())
                .collect();
            if v.is_empty() {
                return None;
            }
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / v.len() as f64;
            Some(ModeSummary {
                mode,
                max: v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                mean,
                std: var.sqrt(),
                points: v.len(),
            })
        })
        .collect()
}

pub fn summary_table(summary: &[ModeSummary]) -> String {
    let width = summary
        .iter()
        .map(|s| s.mode.title().len())
        .max()
        .unwrap_or(4)
        .max(4);
    let mut t = format!("{:<width$}  {:>6}  {:>6}  {:>6}  {:>6}\n", "mode", "max", "avg", "std", "points");
    for s in summary {
        let _ = writeln!(
            t,
            "{:<width$}  {:>6.3}  {:>6.3}  {:>6.3}  {:>6}",
            s.mode.title(),
            s.max,
            s.mean,
            s.std,
            s.points
        );
    }
    t
}

fn write_outputs(
    dir: &Path,
    grid: &SweepGrid,
    rows: &[MeshRow],
    points: &[PointSummary],
    summary: &[ModeSummary],
    manifest: &Manifest,
) -> Result<(), SweepError> {
    let mut mesh = format!("{MESH_HEADER}\n");
    for r in rows {
        mesh.push_str(&r.to_csv());
        mesh.push('\n');
    }
    write_atomic(&dir.join("mesh.csv"), mesh.as_bytes())?;

    let mut csv = String::from("mode,max_str,avg_str,std_str,points\n");
    for s in summary {
        let _ = writeln!(csv, "{},{:.6},{:.6},{:.6},{}", s.mode, s.max, s.mean, s.std, s.points);
    }
    write_atomic(&dir.join("summary.csv"), csv.as_bytes())?;
    write_atomic(&dir.join("summary.txt"), summary_table(summary).as_bytes())?;

    let mut best = String::from("spots,redundancy,p_b0,best_mode,best_str,feasible");
    for m in &grid.modes {
        let _ = write!(best, ",str_{m}");
    }
    best.push('\n');
    for p in points {
        let (mode, v) = match p.best() {
            Some((m, v)) => (m.to_string(), format!("{v:.6}")),
            None => ("NA".into(), "NA".into()),
        };
        let _ = write!(
            best,
            "{},{},{:.6e},{},{},{}",
            p.spots,
            p.redundancy,
            p.p_b0,
            mode,
            v,
            p.feasible()
        );
        for m in &grid.modes {
            let _ = write!(best, ",{}", fmt_kpi(p.str_by_mode.get(m).copied()));
        }
        best.push('\n');
    }
    write_atomic(&dir.join("best_mode.csv"), best.as_bytes())?;

    // gnuplot splot blocks: one per spot count, one scan line per redundancy
    let mut dat = String::from("# redundancy p_b0 best_str best_mode_index (-1 when infeasible)\n");
    for &spots in &grid.spots {
        let _ = writeln!(dat, "# spots {spots}");
        for &n in &grid.redundancy {
            for p in points.iter().filter(|p| p.spots == spots && p.redundancy == n) {
                let (idx, v) = match p.best() {
                    Some((m, v)) if v >= FEASIBLE_STR => (
                        OperationMode::ALL.iter().position(|&x| x == m).unwrap_or(0) as i64,
                        v,
                    ),
                    Some((_, v)) => (-1, v),
                    None => (-1, f64::NAN),
                };
                let _ = writeln!(dat, "{n} {:.6e} {v:.6} {idx}", p.p_b0);
            }
            dat.push('\n');
        }
        dat.push('\n');
    }
    write_atomic(&dir.join("mesh.dat"), dat.as_bytes())?;

    let json = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    write_atomic(&dir.join("manifest.json"), json.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_grid_spans_the_range() {
        let g = p_b0_grid(1e-3, 1e-1, 9, Spacing::Log).unwrap();
        assert_eq!(g.len(), 9);
        assert!((g[0] - 1e-3).abs() < 1e-15);
        assert!((g[8] - 1e-1).abs() < 1e-15);
        assert!((g[4] - 1e-2).abs() < 1e-12);
        for w in g.windows(2) {
            assert!((w[1] / w[0] - 10f64.powf(0.25)).abs() < 1e-12);
        }
    }

    #[test]
    fn linear_grid_is_evenly_spaced() {
        let g = p_b0_grid(0.0 + 1e-3, 0.1, 3, Spacing::Linear).unwrap();
        assert!((g[1] - 0.0505).abs() < 1e-12);
    }

    #[test]
    fn bad_grid_rejected() {
        assert!(p_b0_grid(0.0, 0.1, 9, Spacing::Log).is_err());
        assert!(p_b0_grid(0.1, 0.01, 9, Spacing::Log).is_err());
        assert!(p_b0_grid(0.01, 0.1, 0, Spacing::Log).is_err());
    }

    #[test]
    fn product_is_fully_enumerated() {
        let grid = SweepGrid {
            spots: vec![32, 64],
            redundancy: vec![1, 4],
            p_b0: vec![0.01, 0.1],
            modes: OperationMode::ALL.to_vec(),
            seeds: 3,
        };
        let cells = grid.cells(7);
        assert_eq!(cells.len(), 2 * 2 * 2 * 6 * 3);
        assert!(cells.iter().enumerate().all(|(i, c)| c.index == i));
        let mut keys: Vec<String> = cells.iter().map(Cell::key).collect();
        keys.sort();
        keys.dedup();
        assert_eq!(keys.len(), cells.len());
        // modes of one point and replica share their seed
        let same: Vec<u64> = cells
            .iter()
            .filter(|c| c.spots == 32 && c.redundancy == 4 && c.p_index == 1 && c.replica == 2)
            .map(|c| c.seed)
            .collect();
        assert_eq!(same.len(), 6);
        assert!(same.iter().all(|&s| s == same[0]));
        assert_eq!(cells.iter().filter(|c| !c.applicable()).count(), 2 * 2 * 4 * 3);
    }

    #[test]
    fn mesh_row_round_trips() {
        let row = MeshRow {
            spots: 32,
            redundancy: 4,
            p_b0: 0.0031622776601683794,
            mode: OperationMode::SocialQuantumConsensus,
            seed: 12345678901234,
            fsr: Some(0.003),
            pdr: None,
            str_: Some(0.64),
            bnt: 0.25,
        };
        let back = MeshRow::parse(&row.to_csv()).unwrap();
        assert_eq!(back.to_csv(), row.to_csv());
        assert_eq!(back.pdr, None);
    }

    #[test]
    fn one_point_summary_has_max_equal_mean() {
        let mut str_by_mode = BTreeMap::new();
        str_by_mode.insert(OperationMode::Social, 0.61);
        let points = vec![PointSummary {
            spots: 32,
            redundancy: 2,
            p_b0: 0.01,
            str_by_mode,
        }];
        let s = summarize(&[OperationMode::Social], &points);
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].max, s[0].mean);
        assert!(points[0].feasible());
    }

    #[test]
    fn feasibility_uses_the_best_mode() {
        let mut str_by_mode = BTreeMap::new();
        str_by_mode.insert(OperationMode::Standard, 0.3);
        str_by_mode.insert(OperationMode::Consensus, 0.59);
        let p = PointSummary {
            spots: 64,
            redundancy: 5,
            p_b0: 0.1,
            str_by_mode,
        };
        assert_eq!(p.best(), Some((OperationMode::Consensus, 0.59)));
        assert!(!p.feasible());
    }
}
