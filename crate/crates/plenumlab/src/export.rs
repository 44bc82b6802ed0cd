//! CSV and pixmap exports for plotting tools.

use std::io::Write;
use std::path::Path;

use plenumlab_core::dataprep::MaskSet;
use plenumlab_core::geometry::{Grid15, MAP_SIZE};
use plenumlab_core::meshstudy::ErrorMaps;
use plenumlab_core::metrics::MetricReport;
use plenumlab_core::models::LossCurves;
use plenumlab_core::probes::{FlowDataset, LAYERS};
use plenumlab_core::solver::StepReport;

use crate::error::{Error, Result};

/// Pixels per map cell in exported images.
pub const PIXELS_PER_CELL: usize = 16;
/// Shade of cells outside the geometry.
pub const INVALID_SHADE: u8 = 255;
/// Shade of valid cells without a value (`NaN`).
pub const MISSING_SHADE: u8 = 240;
/// Darkest to lightest shade used for values.
pub const VALUE_SHADES: (u8, u8) = (0, 200);

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(|e| csv_err(path, e))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Format(format!("{}: {other:?}", path.display())),
    }
}

fn finish(mut w: csv::Writer<std::fs::File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

macro_rules! row {
    ($w:expr, $path:expr, [$($x:expr),* $(,)?]) => {
        $w.write_record(&[$($x.to_string()),*]).map_err(|e| csv_err($path, e))?
    };
}

/// One row per valid cell and snapshot: `t, layer, row, col, mdot`.
pub fn dataset_csv(ds: &FlowDataset, path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    row!(w, path, ["t", "layer", "row", "col", "mdot"]);
    for t in 0..ds.t_len {
        let time = ds.time(t);
        for l in 0..LAYERS {
            for r in 0..MAP_SIZE {
                for c in 0..MAP_SIZE {
                    if ds.geom_mask[r][c] {
                        row!(w, path, [time, l, r, c, ds.get(t, l, r, c)]);
                    }
                }
            }
        }
    }
    finish(w, path)
}

/// `row, col, value` for the valid cells of a 15×15 field.
pub fn heatmap_csv(field: &Grid15<f64>, geom: &Grid15<bool>, path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    row!(w, path, ["row", "col", "value"]);
    for r in 0..MAP_SIZE {
        for c in 0..MAP_SIZE {
            if geom[r][c] {
                row!(w, path, [r, c, field[r][c]]);
            }
        }
    }
    finish(w, path)
}

/// Reads a heatmap CSV; cells without a row are `NaN`.
pub fn read_heatmap_csv(path: &Path) -> Result<Grid15<f64>> {
    let mut rd = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let mut out = [[f64::NAN; MAP_SIZE]; MAP_SIZE];
    for rec in rd.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let bad = || Error::Format(format!("{}: malformed heatmap row {:?}", path.display(), rec));
        let r: usize = rec.get(0).and_then(|s| s.parse().ok()).ok_or_else(bad)?;
        let c: usize = rec.get(1).and_then(|s| s.parse().ok()).ok_or_else(bad)?;
        let v: f64 = rec.get(2).and_then(|s| s.parse().ok()).ok_or_else(bad)?;
        if r >= MAP_SIZE || c >= MAP_SIZE {
            return Err(bad());
        }
        out[r][c] = v;
    }
    Ok(out)
}

/// Binary grayscale pixmap (P6) of a 15×15 field scaled between its finite
/// extremes; invalid cells get [`INVALID_SHADE`].
pub fn heatmap_ppm(field: &Grid15<f64>, geom: &Grid15<bool>, path: &Path) -> Result<()> {
    let finite = || (0..MAP_SIZE * MAP_SIZE).map(|i| (i / MAP_SIZE, i % MAP_SIZE)).filter(|(r, c)| geom[*r][*c] && field[*r][*c].is_finite());
    let lo = finite().map(|(r, c)| field[r][c]).fold(f64::INFINITY, f64::min);
    let hi = finite().map(|(r, c)| field[r][c]).fold(f64::NEG_INFINITY, f64::max);
    let shade = |r: usize, c: usize| -> u8 {
        let v = field[r][c];
        if !geom[r][c] {
            INVALID_SHADE
        } else if !v.is_finite() {
            MISSING_SHADE
        } else if hi > lo {
            let (a, b) = (VALUE_SHADES.0 as f64, VALUE_SHADES.1 as f64);
            (a + (v - lo) / (hi - lo) * (b - a)).round() as u8
        } else {
            VALUE_SHADES.0
        }
    };
    let side = MAP_SIZE * PIXELS_PER_CELL;
    let mut bytes = format!("P6\n{side} {side}\n255\n").into_bytes();
    for y in 0..side {
        for x in 0..side {
            let s = shade(y / PIXELS_PER_CELL, x / PIXELS_PER_CELL);
            bytes.extend_from_slice(&[s, s, s]);
        }
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// `scope, layer, metric, value, n, excluded` rows for one report.
pub struct MetricRows<'a> {
    pub scope: &'a str,
    pub layer: Option<usize>,
    pub report: &'a MetricReport,
}

pub fn metrics_csv(rows: &[MetricRows], path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    row!(w, path, ["scope", "layer", "metric", "value", "n", "excluded"]);
    for m in rows {
        let layer = m.layer.map(|l| l.to_string()).unwrap_or_default();
        for (name, v) in [("mae", m.report.mae), ("mape", m.report.mape), ("r2", m.report.r2)] {
            row!(w, path, [m.scope, layer, name, v, m.report.n, m.report.excluded]);
        }
    }
    finish(w, path)
}

/// `row, col, geom, miss, obs` as 0/1 for all 225 cells.
pub fn mask_csv(masks: &MaskSet, path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    row!(w, path, ["row", "col", "geom", "miss", "obs"]);
    for r in 0..MAP_SIZE {
        for c in 0..MAP_SIZE {
            row!(w, path, [r, c, masks.geom[r][c] as u8, masks.miss[r][c] as u8, masks.obs[r][c] as u8]);
        }
    }
    finish(w, path)
}

/// Per-cell maps (`layer, row, col, max_pct, timeavg_pct`, valid cells
/// only) and the per-layer summary (`layer, abs_layer_avg,
/// signed_layer_avg`).
pub fn error_maps_csv(maps: &ErrorMaps, geom: &Grid15<bool>, cells: &Path, summary: &Path) -> Result<()> {
    let mut w = writer(cells)?;
    row!(w, cells, ["layer", "row", "col", "max_pct", "timeavg_pct"]);
    for l in 0..LAYERS {
        for r in 0..MAP_SIZE {
            for c in 0..MAP_SIZE {
                if geom[r][c] {
                    row!(w, cells, [l, r, c, ErrorMaps::at(&maps.max_pct, l, r, c), ErrorMaps::at(&maps.timeavg_pct, l, r, c)]);
                }
            }
        }
    }
    finish(w, cells)?;
    let mut w = writer(summary)?;
    row!(w, summary, ["layer", "abs_layer_avg", "signed_layer_avg"]);
    let signed = maps.signed_layer_avg();
    for l in 0..LAYERS {
        row!(w, summary, [l, maps.abs_layer_avg[l], signed[l]]);
    }
    finish(w, summary)
}

/// One layer of a `[layer][row][col]` map as a grid.
pub fn layer_grid(map: &[f64], layer: usize) -> Grid15<f64> {
    let mut g = [[f64::NAN; MAP_SIZE]; MAP_SIZE];
    for (r, row) in g.iter_mut().enumerate() {
        for (c, v) in row.iter_mut().enumerate() {
            *v = ErrorMaps::at(map, layer, r, c);
        }
    }
    g
}

pub fn curves_csv(curves: &LossCurves, path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    row!(w, path, ["epoch", "train", "val", "lr"]);
    for (i, ((t, v), lr)) in curves.train.iter().zip(&curves.val).zip(&curves.lr).enumerate() {
        row!(w, path, [i + 1, t, v, lr]);
    }
    finish(w, path)
}

/// Streams per-step solver residuals.
pub struct ResidualLog {
    w: csv::Writer<std::fs::File>,
    path: std::path::PathBuf,
}

impl ResidualLog {
    pub fn create(path: &Path) -> Result<Self> {
        let mut w = writer(path)?;
        row!(
            w,
            path,
            ["step", "time", "momentum_x", "momentum_y", "momentum_z", "continuity", "k", "eps", "continuity_after", "inflow", "outflow", "imbalance", "pressure_iterations"]
        );
        Ok(Self { w, path: path.to_path_buf() })
    }

    pub fn push(&mut self, s: &StepReport) -> Result<()> {
        let r = &s.residuals;
        let path = &self.path;
        row!(
            self.w,
            path,
            [s.step, s.time, r.momentum[0], r.momentum[1], r.momentum[2], r.continuity, r.k, r.eps, s.continuity_after, s.inflow, s.outflow, s.global_imbalance(), s.pressure_iterations]
        );
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.w.flush().map_err(|e| Error::io(&self.path, e))
    }
}

/// Writes a plain text report.
pub fn text(path: &Path, body: &str) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(body.as_bytes()).map_err(|e| Error::io(path, e))
}
