//! Filtering products by control ranges and comparing defect rates.

use std::fmt;
use std::io::{Read, Write};

use crate::dataset::{ProcessDataset, DEFECTIVE};
use crate::error::{Error, Result};
use crate::ice::{render_table, ControlRange};

/// Rows whose value lies in `[lower, upper]` for every range. Ranges are
/// matched to columns by feature name.
pub fn filter_in_range(ds: &ProcessDataset, ranges: &[ControlRange]) -> Result<ProcessDataset> {
    let resolved: Vec<(usize, f64, f64)> = ranges
        .iter()
        .map(|r| {
            ds.feature_index(&r.name)
                .map(|j| (j, r.lower, r.upper))
                .ok_or_else(|| Error::UnknownFeature(r.name.clone()))
        })
        .collect::<Result<_>>()?;
    Ok(ds.filter_rows(|row, _| {
        resolved
            .iter()
            .all(|&(j, lo, hi)| lo <= row[j] && row[j] <= hi)
    }))
}

/// Share of defective rows in a set; `NotAvailable` for an empty set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DefectRate {
    Rate { defective: usize, total: usize },
    NotAvailable,
}

impl DefectRate {
    pub fn new(defective: usize, total: usize) -> Self {
        if total == 0 {
            DefectRate::NotAvailable
        } else {
            DefectRate::Rate { defective, total }
        }
    }

    /// Unrounded percentage.
    pub fn percent(self) -> Option<f64> {
        match self {
            DefectRate::Rate { defective, total } => Some(100.0 * defective as f64 / total as f64),
            DefectRate::NotAvailable => None,
        }
    }

    /// Percentage in hundredths, rounded half up with integer arithmetic.
    pub fn hundredths(self) -> Option<u64> {
        match self {
            DefectRate::Rate { defective, total } => {
                let (d, n) = (defective as u128, total as u128);
                Some(((20_000 * d + n) / (2 * n)) as u64)
            }
            DefectRate::NotAvailable => None,
        }
    }

    /// Exact comparison of the underlying ratios. `NotAvailable` is never lower.
    pub fn is_lower_than(self, other: DefectRate) -> bool {
        match (self, other) {
            (
                DefectRate::Rate {
                    defective: a,
                    total: n,
                },
                DefectRate::Rate {
                    defective: b,
                    total: m,
                },
            ) => (a as u128) * (m as u128) < (b as u128) * (n as u128),
            _ => false,
        }
    }
}

impl fmt::Display for DefectRate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.hundredths() {
            Some(h) => write!(f, "{}.{:02}", h / 100, h % 100),
            None => f.write_str("N/A"),
        }
    }
}

pub fn defect_rate(ds: &ProcessDataset) -> DefectRate {
    let defective = ds.target().iter().filter(|&&t| t == DEFECTIVE).count();
    DefectRate::new(defective, ds.n_rows())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationRow {
    /// `None` for the unfiltered baseline.
    pub alpha: Option<f64>,
    pub normal: usize,
    pub defective: usize,
    pub rate: DefectRate,
    /// Filtered rate strictly below the baseline; always false for the baseline.
    pub improved: bool,
}

impl ValidationRow {
    pub fn label(&self) -> String {
        match self.alpha {
            Some(a) => format!("alpha = {a}"),
            None => "Original Data".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub baseline: ValidationRow,
    pub rows: Vec<ValidationRow>,
}

fn row_for(ds: &ProcessDataset, alpha: Option<f64>, baseline: Option<DefectRate>) -> ValidationRow {
    let (normal, defective) = ds.class_counts();
    let rate = defect_rate(ds);
    ValidationRow {
        alpha,
        normal,
        defective,
        rate,
        improved: baseline.is_some_and(|b| rate.is_lower_than(b)),
    }
}

/// Baseline row for the whole `test` set plus one filtered row per alpha.
pub fn validation_report(
    test: &ProcessDataset,
    ranges_per_alpha: &[(f64, Vec<ControlRange>)],
) -> Result<ValidationReport> {
    let baseline = row_for(test, None, None);
    let rows = ranges_per_alpha
        .iter()
        .map(|(alpha, ranges)| {
            let kept = filter_in_range(test, ranges)?;
            Ok(row_for(&kept, Some(*alpha), Some(baseline.rate)))
        })
        .collect::<Result<_>>()?;
    Ok(ValidationReport { baseline, rows })
}

/// Groups ranges by alpha, keeping first-seen alpha order.
pub fn group_by_alpha(ranges: &[ControlRange]) -> Vec<(f64, Vec<ControlRange>)> {
    let mut out: Vec<(f64, Vec<ControlRange>)> = Vec::new();
    for r in ranges {
        match out.iter_mut().find(|(a, _)| *a == r.alpha) {
            Some((_, v)) => v.push(r.clone()),
            None => out.push((r.alpha, vec![r.clone()])),
        }
    }
    out
}

const CSV_HEADER: [&str; 7] = [
    "set",
    "alpha",
    "normal",
    "defective",
    "defect_rate_percent",
    "defect_rate_exact",
    "improved",
];

impl ValidationReport {
    fn all_rows(&self) -> impl Iterator<Item = &ValidationRow> {
        std::iter::once(&self.baseline).chain(&self.rows)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(CSV_HEADER)?;
        for r in self.all_rows() {
            w.write_record([
                if r.alpha.is_some() { "filtered" } else { "baseline" }.to_string(),
                r.alpha.map(|a| a.to_string()).unwrap_or_default(),
                r.normal.to_string(),
                r.defective.to_string(),
                r.rate.to_string(),
                r.rate.percent().map(|p| p.to_string()).unwrap_or("N/A".into()),
                u8::from(r.improved).to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    /// Inverse of [`ValidationReport::write_csv`].
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let mut baseline = None;
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let field = |k: usize| rec.get(k).unwrap_or("").trim();
            let bad = |k: usize| Error::NonNumeric {
                row: i + 1,
                column: CSV_HEADER[k].into(),
                value: field(k).into(),
            };
            let normal: usize = field(2).parse().map_err(|_| bad(2))?;
            let defective: usize = field(3).parse().map_err(|_| bad(3))?;
            let row = ValidationRow {
                alpha: match field(0) {
                    "baseline" => None,
                    _ => Some(field(1).parse().map_err(|_| bad(1))?),
                },
                normal,
                defective,
                rate: DefectRate::new(defective, normal + defective),
                improved: field(6) == "1",
            };
            if row.alpha.is_none() {
                baseline = Some(row);
            } else {
                rows.push(row);
            }
        }
        let baseline =
            baseline.ok_or_else(|| Error::InsufficientData("validation file has no baseline".into()))?;
        Ok(ValidationReport { baseline, rows })
    }

    /// Aligned text table with one line per set.
    pub fn text_table(&self) -> String {
        let mut rows = vec![vec![
            "Set".to_string(),
            "Normal".into(),
            "Defect".into(),
            "Defect rate (%)".into(),
        ]];
        for r in self.all_rows() {
            rows.push(vec![
                r.label(),
                r.normal.to_string(),
                r.defective.to_string(),
                r.rate.to_string(),
            ]);
        }
        render_table(&rows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;

    fn rate(d: usize, n: usize) -> String {
        DefectRate::new(d, n).to_string()
    }

    #[test]
    fn rounding_matches_table_arithmetic() {
        assert_eq!(rate(2, 971), "0.21");
        assert_eq!(rate(40, 4035), "0.99");
        assert_eq!(rate(40, 3995), "1.00");
        assert_eq!(rate(20, 2304), "0.87");
        assert_eq!(rate(3, 2317), "0.13");
        assert_eq!(rate(0, 10), "0.00");
        assert_eq!(rate(10, 10), "100.00");
        assert_eq!(rate(0, 0), "N/A");
        // 1/8 = 12.5% exactly; 1/1600 = 0.0625% → half-up gives 0.06
        assert_eq!(rate(1, 8), "12.50");
        assert_eq!(rate(1, 1600), "0.06");
        assert_eq!(rate(1, 400), "0.25");
        assert_eq!(rate(1, 800), "0.13");
    }

    #[test]
    fn ratio_comparison() {
        assert!(DefectRate::new(2, 971).is_lower_than(DefectRate::new(40, 4035)));
        assert!(!DefectRate::NotAvailable.is_lower_than(DefectRate::new(1, 2)));
        assert!(!DefectRate::new(1, 2).is_lower_than(DefectRate::new(2, 4)));
    }

    fn sample() -> ProcessDataset {
        ProcessDataset::new(
            Matrix::from_rows(&[[141.0], [141.6], [142.4], [142.41], [142.0]]).unwrap(),
            vec!["p".into()],
            vec![0, 1, 1, 0, 1],
        )
        .unwrap()
    }

    fn range(alpha: f64, lower: f64, upper: f64) -> ControlRange {
        ControlRange {
            feature: 0,
            name: "p".into(),
            alpha,
            lower,
            upper,
        }
    }

    #[test]
    fn filter_closed_bounds() {
        let ds = sample();
        assert_eq!(filter_in_range(&ds, &[]).unwrap(), ds);
        let kept = filter_in_range(&ds, &[range(0.05, 141.6, 142.4)]).unwrap();
        assert_eq!(kept.features().column(0), vec![141.6, 142.4, 142.0]);
        let mut unknown = range(0.05, 0.0, 1.0);
        unknown.name = "q".into();
        assert!(matches!(
            filter_in_range(&ds, &[unknown]),
            Err(Error::UnknownFeature(_))
        ));
    }

    #[test]
    fn report_rows_and_round_trip() {
        let ds = sample();
        let per_alpha = group_by_alpha(&[
            range(0.05, 141.6, 142.4),
            range(0.1, 200.0, 300.0),
            range(0.2, 141.0, 143.0),
        ]);
        let rep = validation_report(&ds, &per_alpha).unwrap();
        assert_eq!(rep.baseline.rate, DefectRate::new(2, 5));
        assert_eq!(rep.rows.len(), 3);
        assert!(rep.rows[0].improved);
        assert_eq!(rep.rows[1].rate, DefectRate::NotAvailable);
        assert!(!rep.rows[1].improved);
        assert!(!rep.rows[2].improved);
        let mut buf = Vec::new();
        rep.write_csv(&mut buf).unwrap();
        assert_eq!(ValidationReport::read_csv(buf.as_slice()).unwrap(), rep);
        let t = rep.text_table();
        assert!(t.contains("Original Data") && t.contains("N/A") && t.contains("40.00"));
    }
}
