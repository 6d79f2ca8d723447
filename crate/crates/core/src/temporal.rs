//! Temporal exogenous inputs for source nodes: a clipped power-law trend, a
//! clamped sinusoid and clamped Gaussian noise, averaged per row.

use crate::config::GenConfig;
use crate::error::Result;
use crate::rng::SeededRng;
use crate::scalar::Scalar;
use crate::schema::TableKind;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Trend<T> {
    pub exponent: T,
    pub scale: T,
    pub offset: T,
    /// Upper bound.
    pub bound: T,
    pub total_rows: T,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cycle<T> {
    pub period: T,
    pub scale: T,
    pub lower: T,
    pub upper: T,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Fluctuation<T> {
    pub scale: T,
    pub lower: T,
    pub upper: T,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TemporalParams<T> {
    pub trend: Trend<T>,
    pub cycle: Cycle<T>,
    pub fluc: Fluctuation<T>,
}

/// `min(s * (r / R)^alpha + o, b)`.
#[inline]
pub fn trend<T: Scalar>(r: T, p: &Trend<T>) -> T {
    (p.scale * (r / p.total_rows).powf(p.exponent) + p.offset).min(p.bound)
}

/// `min(max(s * sin(pi * r / p), l), b)`.
#[inline]
pub fn cycle<T: Scalar>(r: T, p: &Cycle<T>) -> T {
    let pi = T::of(std::f64::consts::PI);
    (p.scale * (pi * r / p.period).sin()).max(p.lower).min(p.upper)
}

/// Fluctuation for a given standard normal draw `n`.
#[inline]
pub fn fluc_at<T: Scalar>(n: T, p: &Fluctuation<T>) -> T {
    (p.scale * n).max(p.lower).min(p.upper)
}

pub fn fluc<T: Scalar>(p: &Fluctuation<T>, rng: &mut SeededRng) -> T {
    fluc_at(T::of(rng.normal()), p)
}

/// Mean of trend, cycle and the fluctuation for draw `n`.
#[inline]
pub fn temporal_signal_at<T: Scalar>(r: T, p: &TemporalParams<T>, n: T) -> T {
    (trend(r, &p.trend) + cycle(r, &p.cycle) + fluc_at(n, &p.fluc)) / T::of(3.0)
}

pub fn temporal_signal<T: Scalar>(r: T, p: &TemporalParams<T>, rng: &mut SeededRng) -> T {
    temporal_signal_at(r, p, T::of(rng.normal()))
}

/// Numerically stable softmax.
pub fn softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    let max = logits.iter().fold(T::neg_infinity(), |m, v| m.max(*v));
    let exps: Vec<T> = logits.iter().map(|v| (*v - max).exp()).collect();
    let total = exps.iter().fold(T::zero(), |a, b| a + *b);
    exps.into_iter().map(|e| e / total).collect()
}

/// Category in `1..=C` drawn from `Softmax(g_1(r), ..., g_C(r))`.
pub fn categorical_source_sample<T: Scalar>(
    r: T,
    per_category: &[TemporalParams<T>],
    rng: &mut SeededRng,
) -> Result<usize> {
    let logits: Vec<T> = per_category
        .iter()
        .map(|p| temporal_signal(r, p, rng))
        .collect();
    sample_softmax(&logits, rng)
}

/// 1-based category drawn from the softmax of `logits`.
pub fn sample_softmax<T: Scalar>(logits: &[T], rng: &mut SeededRng) -> Result<usize> {
    let probs: Vec<f64> = softmax(logits).into_iter().map(Scalar::to_f64_lossy).collect();
    Ok(rng.categorical(&probs)? + 1)
}

impl TemporalParams<f64> {
    /// Draws the parameters for one source signal of a table with `total_rows`
    /// rows. The cycle period is the frequency times the row span.
    pub fn sample(kind: TableKind, total_rows: usize, config: &GenConfig, rng: &mut SeededRng) -> Result<Self> {
        let (trend_scale, cycle_scale, noise_scale) = match kind {
            TableKind::Activity => (
                &config.trend_scale_activity,
                &config.cycle_scale_activity,
                &config.noise_scale_activity,
            ),
            TableKind::Entity => (
                &config.trend_scale_entity,
                &config.cycle_scale_entity,
                &config.noise_scale_entity,
            ),
        };
        let rows = total_rows.max(1) as f64;
        let trend = Trend {
            exponent: config.trend_exponent.draw(rng)?,
            scale: trend_scale.draw(rng)?,
            offset: config.trend_offset.draw(rng)?,
            bound: config.trend_upper.draw(rng)?,
            total_rows: rows,
        };
        let cycle = Cycle {
            period: rows * config.cycle_frequency.draw(rng)?,
            scale: cycle_scale.draw(rng)?,
            lower: config.cycle_lower.draw(rng)?,
            upper: config.cycle_upper.draw(rng)?,
        };
        let fluc = Fluctuation {
            scale: noise_scale.draw(rng)?,
            lower: config.noise_lower.draw(rng)?,
            upper: config.noise_upper.draw(rng)?,
        };
        Ok(Self { trend, cycle, fluc })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tr(exponent: f64, scale: f64, offset: f64, bound: f64, total_rows: f64) -> Trend<f64> {
        Trend { exponent, scale, offset, bound, total_rows }
    }

    #[test]
    fn trend_examples() {
        assert_eq!(trend(100.0, &tr(1.0, 1.0, 0.0, 2.0, 100.0)), 1.0);
        for r in [1.0, 17.0, 100.0] {
            assert_eq!(trend(r, &tr(0.0, 1.0, 0.5, 10.0, 100.0)), 1.5);
        }
        assert_eq!(trend(100.0, &tr(0.5, 5.0, 0.0, 1.0, 100.0)), 1.0);
    }

    #[test]
    fn cycle_examples() {
        let c = |period, scale, lower, upper| Cycle { period, scale, lower, upper };
        assert_eq!(cycle(0.0, &c(3.0, 1.0, -1.0, 1.0)), 0.0);
        assert!((cycle(1.0f64, &c(2.0, 1.0, -1.0, 1.0)) - 1.0).abs() < 1e-15);
        assert_eq!(cycle(3.0, &c(2.0, 1.0, -0.5, 1.0)), -0.5);
    }

    #[test]
    fn fluc_examples() {
        let f = |scale| Fluctuation { scale, lower: -1.0, upper: 1.0 };
        let mut rng = SeededRng::new(0);
        assert_eq!(fluc(&f(0.0), &mut rng), 0.0);
        assert!((fluc_at(2.0f64, &f(0.05)) - 0.1).abs() < 1e-15);
        assert_eq!(fluc_at(100.0, &f(0.05)), 1.0);
    }

    #[test]
    fn signal_is_the_mean() {
        let p = TemporalParams {
            trend: tr(0.0, 0.0, 0.6, 10.0, 10.0),
            cycle: Cycle { period: 2.0, scale: 0.3, lower: -1.0, upper: 1.0 },
            fluc: Fluctuation { scale: 0.0, lower: -1.0, upper: 1.0 },
        };
        // trend = 0.6, cycle(1) = 0.3 sin(pi/2) = 0.3, fluc = 0.
        assert!((temporal_signal_at(1.0, &p, 0.7) - 0.3).abs() < 1e-15);
        let zero = TemporalParams {
            trend: tr(1.0, 0.0, 0.0, 1.0, 10.0),
            cycle: Cycle { period: 2.0, scale: 0.0, lower: -1.0, upper: 1.0 },
            fluc: Fluctuation { scale: 0.0, lower: -1.0, upper: 1.0 },
        };
        assert_eq!(temporal_signal_at(4.0, &zero, 1.3), 0.0);
    }

    #[test]
    fn entity_signal_is_pure_clamped_noise() {
        let config = GenConfig::default();
        let mut rng = SeededRng::new(8);
        let p = TemporalParams::sample(TableKind::Entity, 700, &config, &mut rng).unwrap();
        for r in [1.0, 350.0, 700.0] {
            assert_eq!(trend(r, &p.trend), 0.0);
            assert_eq!(cycle(r, &p.cycle), 0.0);
        }
        for n in [-5.0f64, -0.3, 0.0, 2.2, 9.0] {
            let expected = n.clamp(-3.0, 3.0) / 3.0;
            assert!((temporal_signal_at(100.0, &p, n) - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn softmax_examples() {
        let p = softmax(&[0.0, 3.0f64.ln()]);
        assert!((p[0] - 0.25).abs() < 1e-15 && (p[1] - 0.75).abs() < 1e-15);
        let q = softmax(&[1000.0f64, 1000.0, 1000.0]);
        assert!(q.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn softmax_sampling_frequencies() {
        let mut rng = SeededRng::new(9);
        let logits = [0.0, 3.0f64.ln()];
        let n = 100_000;
        let twos = (0..n).filter(|_| sample_softmax(&logits, &mut rng).unwrap() == 2).count();
        assert!((twos as f64 / n as f64 - 0.75).abs() < 0.01);
    }

    #[test]
    fn equal_signals_give_uniform_categories() {
        let p = TemporalParams {
            trend: tr(1.0, 0.0, 0.0, 1.0, 10.0),
            cycle: Cycle { period: 2.0, scale: 0.0, lower: -1.0, upper: 1.0 },
            fluc: Fluctuation { scale: 0.0, lower: -1.0, upper: 1.0 },
        };
        let params = vec![p; 4];
        let mut rng = SeededRng::new(10);
        let n = 100_000;
        let mut counts = [0usize; 5];
        for _ in 0..n {
            let c = categorical_source_sample(3.0, &params, &mut rng).unwrap();
            assert!((1..=4).contains(&c));
            counts[c] += 1;
        }
        for c in &counts[1..] {
            assert!((*c as f64 / n as f64 - 0.25).abs() < 0.01);
        }
    }
}
