//! Individual conditional expectation curves, partial dependence and
//! α-threshold control ranges.

use std::fmt::Write as _;
use std::io::{Read, Write};

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dataset::ProcessDataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::Scorer;

pub const DEFAULT_MAX_INSTANCES: usize = 500;
pub const DEFAULT_ALPHAS: [f64; 3] = [0.05, 0.1, 0.2];

/// Slack on the `pdp ≥ max − α` comparison so that values mathematically
/// equal to the threshold are not lost to rounding in `max − α`.
const RANGE_TOL: f64 = 1e-12;

/// One feature's ICE curves and their pointwise mean.
#[derive(Debug, Clone, PartialEq)]
pub struct IceSurface {
    pub feature: usize,
    pub name: String,
    /// Sorted distinct observed values of the feature.
    pub grid: Vec<f64>,
    /// Probabilities, one row per retained instance and one column per grid value.
    pub curves: Matrix,
    pub pdp: Vec<f64>,
    /// Row index in the source dataset of each curve.
    pub instance_ids: Vec<usize>,
    /// Set when the feature takes a single value, so the surface has width 1.
    pub constant: bool,
}

fn sorted_distinct(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// ICE surface of `feature` over `ds`. At most `max_instances` rows are used,
/// chosen without replacement by `seed` when the dataset is larger.
pub fn ice_surface<M: Scorer + ?Sized>(
    model: &M,
    ds: &ProcessDataset,
    feature: usize,
    max_instances: usize,
    seed: u64,
) -> Result<IceSurface> {
    if ds.is_empty() {
        return Err(Error::InsufficientData("ICE needs at least one row".into()));
    }
    if feature >= ds.n_features() {
        return Err(Error::param(format!(
            "feature index {feature} out of range for {} features",
            ds.n_features()
        )));
    }
    if max_instances == 0 {
        return Err(Error::param("max_instances must be positive"));
    }
    let grid = sorted_distinct(ds.features().column(feature));
    let instance_ids: Vec<usize> = if ds.n_rows() > max_instances {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut idx = index::sample(&mut rng, ds.n_rows(), max_instances).into_vec();
        idx.sort_unstable();
        idx
    } else {
        (0..ds.n_rows()).collect()
    };
    let rows: Vec<Vec<f64>> = instance_ids
        .par_iter()
        .map(|&q| {
            let mut row = ds.row(q).to_vec();
            grid.iter()
                .map(|&p| {
                    row[feature] = p;
                    model.probability(&row)
                })
                .collect()
        })
        .collect();
    let curves = Matrix::from_rows_with_width(&rows, grid.len())?;
    let mut surface = IceSurface {
        feature,
        name: ds.feature_names()[feature].clone(),
        constant: grid.len() == 1,
        grid,
        curves,
        pdp: Vec::new(),
        instance_ids,
    };
    surface.pdp = pdp(&surface);
    Ok(surface)
}

/// Mean of the ICE curves at each grid point. Each column is summed in sorted
/// order, so the result does not depend on the order of the instances.
pub fn pdp(surface: &IceSurface) -> Vec<f64> {
    let n = surface.curves.n_rows();
    (0..surface.curves.n_cols())
        .map(|g| {
            let mut col = surface.curves.column(g);
            col.sort_by(f64::total_cmp);
            col.iter().sum::<f64>() / n as f64
        })
        .collect()
}

/// `[min Q, max Q]` for `Q = {grid[g] : pdp[g] ≥ max(pdp) − alpha}`.
pub fn control_range(pdp: &[f64], grid: &[f64], alpha: f64) -> Result<(f64, f64)> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::param(format!("alpha must be positive, got {alpha}")));
    }
    if grid.is_empty() {
        return Err(Error::InsufficientData("empty grid".into()));
    }
    if pdp.len() != grid.len() {
        return Err(Error::DimensionMismatch {
            expected: grid.len(),
            found: pdp.len(),
        });
    }
    let max = pdp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let cut = max - alpha - RANGE_TOL;
    let mut lower = f64::INFINITY;
    let mut upper = f64::NEG_INFINITY;
    for (&p, &g) in pdp.iter().zip(grid) {
        if p >= cut {
            lower = lower.min(g);
            upper = upper.max(g);
        }
    }
    Ok((lower, upper))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlRange {
    pub feature: usize,
    pub name: String,
    pub alpha: f64,
    pub lower: f64,
    pub upper: f64,
}

impl ControlRange {
    pub fn contains(&self, value: f64) -> bool {
        self.lower <= value && value <= self.upper
    }
}

impl IceSurface {
    pub fn control_range(&self, alpha: f64) -> Result<ControlRange> {
        let (lower, upper) = control_range(&self.pdp, &self.grid, alpha)?;
        Ok(ControlRange {
            feature: self.feature,
            name: self.name.clone(),
            alpha,
            lower,
            upper,
        })
    }
}

/// ICE surfaces for `features` and one range per (feature, alpha), in
/// feature-major order.
pub fn ranges_table<M: Scorer + ?Sized>(
    model: &M,
    ds: &ProcessDataset,
    features: &[usize],
    alphas: &[f64],
    max_instances: usize,
    seed: u64,
) -> Result<(Vec<IceSurface>, Vec<ControlRange>)> {
    let mut surfaces = Vec::with_capacity(features.len());
    let mut ranges = Vec::with_capacity(features.len() * alphas.len());
    for &f in features {
        let s = ice_surface(model, ds, f, max_instances, seed)?;
        for &a in alphas {
            ranges.push(s.control_range(a)?);
        }
        surfaces.push(s);
    }
    Ok((surfaces, ranges))
}

/// Long-format curve export. PDP rows carry `pdp` as their instance id.
pub fn write_curves_csv<W: Write>(surfaces: &[IceSurface], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["feature", "grid_value", "instance_id", "prediction"])?;
    for s in surfaces {
        for (q, id) in s.instance_ids.iter().enumerate() {
            for (g, p) in s.grid.iter().enumerate() {
                w.write_record([
                    s.name.clone(),
                    p.to_string(),
                    id.to_string(),
                    s.curves.get(q, g).to_string(),
                ])?;
            }
        }
        for (p, v) in s.grid.iter().zip(&s.pdp) {
            w.write_record([s.name.clone(), p.to_string(), "pdp".into(), v.to_string()])?;
        }
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

pub fn write_ranges_csv<W: Write>(ranges: &[ControlRange], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["feature_index", "feature", "alpha", "lower", "upper"])?;
    for r in ranges {
        w.write_record([
            r.feature.to_string(),
            r.name.clone(),
            r.alpha.to_string(),
            r.lower.to_string(),
            r.upper.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

pub fn read_ranges_csv<R: Read>(reader: R) -> Result<Vec<ControlRange>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let field = |k: usize| rec.get(k).unwrap_or("").trim();
        let num = |k: usize| -> Result<f64> {
            field(k).parse().map_err(|_| Error::NonNumeric {
                row: i + 1,
                column: ["feature_index", "feature", "alpha", "lower", "upper"][k].into(),
                value: field(k).into(),
            })
        };
        let feature = field(0).parse().map_err(|_| Error::NonNumeric {
            row: i + 1,
            column: "feature_index".into(),
            value: field(0).into(),
        })?;
        out.push(ControlRange {
            feature,
            name: field(1).to_string(),
            alpha: num(2)?,
            lower: num(3)?,
            upper: num(4)?,
        });
    }
    Ok(out)
}

fn distinct_in_order<T: PartialEq + Clone>(items: impl Iterator<Item = T>) -> Vec<T> {
    let mut out: Vec<T> = Vec::new();
    for it in items {
        if !out.contains(&it) {
            out.push(it);
        }
    }
    out
}

/// Aligned text table: one row per feature, one `lower ~ upper` column per alpha.
pub fn ranges_text_table(ranges: &[ControlRange]) -> String {
    let names = distinct_in_order(ranges.iter().map(|r| r.name.clone()));
    let alphas = distinct_in_order(ranges.iter().map(|r| r.alpha));
    let mut header = vec!["Feature".to_string()];
    header.extend(alphas.iter().map(|a| format!("alpha = {a}")));
    let mut rows = vec![header];
    for name in &names {
        let mut row = vec![name.clone()];
        for &a in &alphas {
            let cell = ranges
                .iter()
                .find(|r| &r.name == name && r.alpha == a)
                .map(|r| format!("{:.2} ~ {:.2}", r.lower, r.upper))
                .unwrap_or_else(|| "-".into());
            row.push(cell);
        }
        rows.push(row);
    }
    render_table(&rows)
}

pub(crate) fn render_table(rows: &[Vec<String>]) -> String {
    let n_cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..n_cols)
        .map(|c| {
            rows.iter()
                .filter_map(|r| r.get(c))
                .map(|s| s.chars().count())
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    for (i, r) in rows.iter().enumerate() {
        let cells: Vec<String> = r
            .iter()
            .enumerate()
            .map(|(c, s)| format!("{s:<w$}", w = widths[c]))
            .collect();
        out.push_str(cells.join("  ").trim_end());
        out.push('\n');
        if i == 0 {
            let total = widths.iter().sum::<usize>() + 2 * n_cols.saturating_sub(1);
            out.push_str(&"-".repeat(total));
            out.push('\n');
        }
    }
    out
}

/// SVG plot of the ICE curves (grey), the PDP (orange, dotted) and red
/// horizontal markers at the PDP maximum and minimum.
pub fn plot_svg(surface: &IceSurface) -> String {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const PAD: f64 = 50.0;
    let (g0, g1) = (surface.grid[0], surface.grid[surface.grid.len() - 1]);
    let span = if g1 > g0 { g1 - g0 } else { 1.0 };
    let sx = |v: f64| PAD + (v - g0) / span * (W - 2.0 * PAD);
    let sy = |p: f64| H - PAD - p * (H - 2.0 * PAD);
    let path = |ys: &mut dyn Iterator<Item = f64>| {
        surface
            .grid
            .iter()
            .zip(ys)
            .map(|(&x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect::<Vec<_>>()
            .join(" ")
    };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<g stroke="black" stroke-width="1"><line x1="{PAD}" y1="{b}" x2="{r}" y2="{b}"/><line x1="{PAD}" y1="{PAD}" x2="{PAD}" y2="{b}"/></g>"#,
        b = H - PAD,
        r = W - PAD
    );
    for q in 0..surface.curves.n_rows() {
        let pts = path(&mut surface.curves.row(q).iter().copied());
        let _ = writeln!(
            s,
            r##"<polyline fill="none" stroke="#999999" stroke-opacity="0.3" stroke-width="0.8" points="{pts}"/>"##
        );
    }
    let pts = path(&mut surface.pdp.iter().copied());
    let _ = writeln!(
        s,
        r##"<polyline fill="none" stroke="#ff8c00" stroke-width="2.5" stroke-dasharray="4 3" points="{pts}"/>"##
    );
    let max = surface.pdp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = surface.pdp.iter().copied().fold(f64::INFINITY, f64::min);
    for (v, label) in [(max, "max"), (min, "min")] {
        let y = sy(v);
        let _ = writeln!(
            s,
            r##"<line x1="{PAD}" y1="{y:.2}" x2="{r}" y2="{y:.2}" stroke="red" stroke-width="1"/><text x="{t}" y="{ty:.2}" font-size="11" fill="red">PDP {label} {v:.2}</text>"##,
            r = W - PAD,
            t = W - PAD - 90.0,
            ty = y - 3.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{x}" y="{y}" font-size="13" text-anchor="middle">{name}</text>"#,
        x = W / 2.0,
        y = H - 12.0,
        name = xml_escape(&surface.name)
    );
    let _ = writeln!(
        s,
        r#"<text x="{PAD}" y="{y}" font-size="11" text-anchor="middle">{g0}</text><text x="{r}" y="{y}" font-size="11" text-anchor="middle">{g1}</text>"#,
        y = H - PAD + 16.0,
        r = W - PAD
    );
    s.push_str("</svg>\n");
    s
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
