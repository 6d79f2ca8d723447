//! Distribution summaries of feature columns and their spread across
//! databases. NULL cells never enter a statistic.

use serde::Serialize;

use crate::db::{ColumnType, RelationalDatabase};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Moments<T> {
    pub count: usize,
    pub mean: T,
    /// Population variance.
    pub variance: T,
    pub skewness: T,
    pub excess_kurtosis: T,
}

/// Population moments; skewness and kurtosis are 0 for constant samples.
pub fn moments<T: Scalar>(values: &[T]) -> Moments<T> {
    let n = values.len();
    if n == 0 {
        return Moments {
            count: 0,
            mean: T::nan(),
            variance: T::nan(),
            skewness: T::nan(),
            excess_kurtosis: T::nan(),
        };
    }
    let nf = T::of(n as f64);
    let mean = values.iter().fold(T::zero(), |a, v| a + *v) / nf;
    let (mut m2, mut m3, mut m4) = (T::zero(), T::zero(), T::zero());
    for &v in values {
        let d = v - mean;
        let d2 = d * d;
        m2 = m2 + d2;
        m3 = m3 + d2 * d;
        m4 = m4 + d2 * d2;
    }
    let (m2, m3, m4) = (m2 / nf, m3 / nf, m4 / nf);
    let (skewness, excess_kurtosis) = if m2 > T::zero() {
        (m3 / m2.powf(T::of(1.5)), m4 / (m2 * m2) - T::of(3.0))
    } else {
        (T::zero(), T::zero())
    };
    Moments {
        count: n,
        mean,
        variance: m2,
        skewness,
        excess_kurtosis,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<usize>,
}

/// Equal-width histogram over the sample range.
pub fn histogram(values: &[f64], bins: usize) -> Histogram {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut counts = vec![0; bins.max(1)];
    if values.is_empty() {
        return Histogram { lo: 0.0, hi: 0.0, counts };
    }
    let last = counts.len() - 1;
    let width = (hi - lo) / counts.len() as f64;
    for &v in values {
        let k = if width > 0.0 { ((v - lo) / width) as usize } else { 0 };
        counts[k.min(last)] += 1;
    }
    Histogram { lo, hi, counts }
}

/// Two-sample Kolmogorov-Smirnov statistic `sup |F_a - F_b|`.
pub fn ks_statistic<T: Scalar>(a: &[T], b: &[T]) -> T {
    if a.is_empty() || b.is_empty() {
        return T::nan();
    }
    let sort = |v: &[T]| {
        let mut s = v.to_vec();
        s.sort_by(|x, y| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal));
        s
    };
    let (a, b) = (sort(a), sort(b));
    let (na, nb) = (T::of(a.len() as f64), T::of(b.len() as f64));
    let (mut i, mut j) = (0, 0);
    let mut d = T::zero();
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((T::of(i as f64) / na - T::of(j as f64) / nb).abs());
    }
    d
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ColumnSummary {
    pub table: String,
    pub column: String,
    pub dtype: &'static str,
    pub nulls: usize,
    pub moments: Moments<f64>,
    pub histogram: Histogram,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DatabaseSummary {
    pub db: usize,
    pub columns: Vec<ColumnSummary>,
    /// `(table, column)` of the first numeric feature column, if any.
    pub first_numeric: Option<(String, String)>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairwiseKs {
    pub a: usize,
    pub b: usize,
    pub ks: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiversityReport {
    pub databases: Vec<DatabaseSummary>,
    /// KS between the first numeric feature columns of every pair.
    pub pairwise_ks: Vec<PairwiseKs>,
    pub fraction_ks_above_0_1: f64,
    /// Databases whose first numeric column has positive / negative skew.
    pub positive_skew: usize,
    pub negative_skew: usize,
}

const HISTOGRAM_BINS: usize = 20;

/// Non-NULL values of the first numeric feature column in table order.
pub fn first_numeric_column(db: &RelationalDatabase) -> Option<(usize, usize, Vec<f64>)> {
    db.tables.iter().enumerate().find_map(|(t, table)| {
        table
            .features
            .iter()
            .position(|c| c.dtype == ColumnType::Numeric)
            .map(|c| (t, c, table.features[c].present().collect()))
    })
}

pub fn diversity_report(dbs: &[RelationalDatabase]) -> DiversityReport {
    let databases: Vec<DatabaseSummary> = dbs
        .iter()
        .enumerate()
        .map(|(i, db)| {
            let columns = db
                .tables
                .iter()
                .flat_map(|t| t.features.iter().map(move |c| (t, c)))
                .map(|(t, c)| {
                    let values: Vec<f64> = c.present().collect();
                    ColumnSummary {
                        table: t.name.clone(),
                        column: c.name.clone(),
                        dtype: if c.dtype.is_categorical() { "categorical" } else { "numeric" },
                        nulls: c.null_count(),
                        moments: moments(&values),
                        histogram: histogram(&values, HISTOGRAM_BINS),
                    }
                })
                .collect();
            let first_numeric = first_numeric_column(db)
                .map(|(t, c, _)| (db.tables[t].name.clone(), db.tables[t].features[c].name.clone()));
            DatabaseSummary {
                db: i,
                columns,
                first_numeric,
            }
        })
        .collect();

    let firsts: Vec<Option<Vec<f64>>> = dbs.iter().map(|db| first_numeric_column(db).map(|(_, _, v)| v)).collect();
    let mut pairwise_ks = Vec::new();
    for a in 0..dbs.len() {
        for b in a + 1..dbs.len() {
            if let (Some(x), Some(y)) = (&firsts[a], &firsts[b]) {
                pairwise_ks.push(PairwiseKs { a, b, ks: ks_statistic(x, y) });
            }
        }
    }
    let above = pairwise_ks.iter().filter(|p| p.ks > 0.1).count();
    let fraction_ks_above_0_1 = if pairwise_ks.is_empty() { 0.0 } else { above as f64 / pairwise_ks.len() as f64 };
    let skews: Vec<f64> = firsts.iter().flatten().map(|v| moments(v).skewness).collect();
    DiversityReport {
        databases,
        pairwise_ks,
        fraction_ks_above_0_1,
        positive_skew: skews.iter().filter(|s| **s > 0.0).count(),
        negative_skew: skews.iter().filter(|s| **s < 0.0).count(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;
    use proptest::prelude::*;

    #[test]
    fn moments_of_known_samples() {
        let m = moments(&[1.0f64, 2.0, 3.0, 4.0]);
        assert_eq!(m.mean, 2.5);
        assert_eq!(m.variance, 1.25);
        assert!(m.skewness.abs() < 1e-15);
        assert!((m.excess_kurtosis - (-1.36)).abs() < 1e-12);
        let skewed = moments(&[0.0, 0.0, 0.0, 10.0]);
        assert!(skewed.skewness > 0.0);
        assert_eq!(moments(&[5.0f32; 3]).skewness, 0.0);
    }

    #[test]
    fn ks_examples() {
        assert_eq!(ks_statistic(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]), 0.0);
        assert_eq!(ks_statistic(&[1.0, 2.0], &[3.0, 4.0]), 1.0);
        assert_eq!(ks_statistic(&[1.0, 2.0, 3.0, 4.0], &[3.0, 4.0, 5.0, 6.0]), 0.5);
    }

    #[test]
    fn ks_detects_shift() {
        let mut rng = SeededRng::new(0);
        let a: Vec<f64> = (0..5000).map(|_| rng.normal()).collect();
        let b: Vec<f64> = (0..5000).map(|_| rng.normal()).collect();
        let c: Vec<f64> = (0..5000).map(|_| rng.normal() + 1.0).collect();
        assert!(ks_statistic(&a, &b) < 0.05);
        assert!(ks_statistic(&a, &c) > 0.3);
    }

    #[test]
    fn histogram_counts_everything() {
        let h = histogram(&[0.0, 0.5, 1.0, 1.0], 2);
        assert_eq!(h.counts, [1, 3]);
        assert_eq!(histogram(&[2.0; 3], 4).counts, [3, 0, 0, 0]);
    }

    proptest! {
        #[test]
        fn ks_is_symmetric(a in prop::collection::vec(-1e3f64..1e3, 1..40), b in prop::collection::vec(-1e3f64..1e3, 1..40)) {
            prop_assert_eq!(ks_statistic(&a, &b), ks_statistic(&b, &a));
            prop_assert_eq!(ks_statistic(&a, &a), 0.0);
            let d = ks_statistic(&a, &b);
            prop_assert!((0.0..=1.0).contains(&d));
        }
    }
}
