//! Hyperparameter priors: the "Kind"/"Sampling" columns of the generator's
//! design table.

use std::fmt::Debug;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SeededRng;

/// Exponent used for power-law range priors when none is configured.
pub const DEFAULT_POWER_LAW_EXPONENT: f64 = 2.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Prior<T> {
    Constant { value: T },
    SetUniform { choices: Vec<T> },
    /// Inclusive on integer ranges.
    RangeUniform { range: [T; 2] },
    /// Integer `k` in the range with mass proportional to `k^-exponent`.
    RangePowerLaw { range: [T; 2], exponent: f64 },
}

/// Value types a [`Prior`] can produce. Range kinds are opt-in.
pub trait PriorValue: Clone + Debug {
    fn draw_range(lo: &Self, _hi: &Self, _rng: &mut SeededRng) -> Result<Self> {
        Err(Error::Config(format!(
            "range prior is not supported for values like {lo:?}"
        )))
    }

    fn draw_power_law(lo: &Self, _hi: &Self, _exponent: f64, _rng: &mut SeededRng) -> Result<Self> {
        Err(Error::Config(format!(
            "power-law prior needs a positive integer range, got {lo:?}"
        )))
    }

    fn check_range(lo: &Self, _hi: &Self) -> Result<()> {
        Err(Error::Config(format!(
            "range prior is not supported for values like {lo:?}"
        )))
    }

    fn check_power_law(lo: &Self, _hi: &Self) -> Result<()> {
        Err(Error::Config(format!(
            "power-law prior needs a positive integer range, got {lo:?}"
        )))
    }
}

impl<T: PriorValue> Prior<T> {
    pub fn constant(value: T) -> Self {
        Prior::Constant { value }
    }

    pub fn set(choices: impl IntoIterator<Item = T>) -> Self {
        Prior::SetUniform {
            choices: choices.into_iter().collect(),
        }
    }

    pub fn range(lo: T, hi: T) -> Self {
        Prior::RangeUniform { range: [lo, hi] }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Prior::Constant { .. } => Ok(()),
            Prior::SetUniform { choices } if choices.is_empty() => {
                Err(Error::Config("set prior has no choices".into()))
            }
            Prior::SetUniform { .. } => Ok(()),
            Prior::RangeUniform { range: [lo, hi] } => T::check_range(lo, hi),
            Prior::RangePowerLaw {
                range: [lo, hi],
                exponent,
            } => {
                if !exponent.is_finite() {
                    return Err(Error::Config(format!("power-law exponent {exponent} is not finite")));
                }
                T::check_power_law(lo, hi)
            }
        }
    }

    pub fn draw(&self, rng: &mut SeededRng) -> Result<T> {
        self.validate()?;
        match self {
            Prior::Constant { value } => Ok(value.clone()),
            Prior::SetUniform { choices } => Ok(choices[rng.index(choices.len())].clone()),
            Prior::RangeUniform { range: [lo, hi] } => T::draw_range(lo, hi, rng),
            Prior::RangePowerLaw {
                range: [lo, hi],
                exponent,
            } => T::draw_power_law(lo, hi, *exponent, rng),
        }
    }

    /// Every value the prior can return, for finite-support kinds.
    pub fn choices(&self) -> Option<Vec<T>> {
        match self {
            Prior::Constant { value } => Some(vec![value.clone()]),
            Prior::SetUniform { choices } => Some(choices.clone()),
            _ => None,
        }
    }
}

impl<T: PriorValue + PartialOrd> Prior<T> {
    /// Whether `value` lies in the declared support.
    pub fn contains(&self, value: &T) -> bool {
        match self {
            Prior::Constant { value: v } => v == value,
            Prior::SetUniform { choices } => choices.iter().any(|c| c == value),
            Prior::RangeUniform { range: [lo, hi] } | Prior::RangePowerLaw { range: [lo, hi], .. } => {
                lo <= value && value <= hi
            }
        }
    }

    /// Smallest and largest attainable values.
    pub fn bounds(&self) -> Option<(T, T)> {
        let pick = |items: &[T]| {
            let mut lo = items.first()?.clone();
            let mut hi = lo.clone();
            for x in items {
                if *x < lo {
                    lo = x.clone();
                }
                if *x > hi {
                    hi = x.clone();
                }
            }
            Some((lo, hi))
        };
        match self {
            Prior::Constant { value } => Some((value.clone(), value.clone())),
            Prior::SetUniform { choices } => pick(choices),
            Prior::RangeUniform { range: [lo, hi] } | Prior::RangePowerLaw { range: [lo, hi], .. } => {
                Some((lo.clone(), hi.clone()))
            }
        }
    }
}

impl PriorValue for usize {
    fn draw_range(lo: &Self, hi: &Self, rng: &mut SeededRng) -> Result<Self> {
        Ok(rng.int_inclusive(*lo, *hi))
    }

    fn draw_power_law(lo: &Self, hi: &Self, exponent: f64, rng: &mut SeededRng) -> Result<Self> {
        let weights: Vec<f64> = (*lo..=*hi).map(|k| (k as f64).powf(-exponent)).collect();
        Ok(lo + rng.categorical(&weights)?)
    }

    fn check_range(lo: &Self, hi: &Self) -> Result<()> {
        if lo > hi {
            return Err(Error::Config(format!("range [{lo}, {hi}] has lo > hi")));
        }
        Ok(())
    }

    fn check_power_law(lo: &Self, hi: &Self) -> Result<()> {
        Self::check_range(lo, hi)?;
        if *lo == 0 {
            return Err(Error::Config(format!(
                "power-law range [{lo}, {hi}] must be strictly positive"
            )));
        }
        Ok(())
    }
}

impl PriorValue for f64 {
    fn draw_range(lo: &Self, hi: &Self, rng: &mut SeededRng) -> Result<Self> {
        Ok(rng.uniform_range(*lo, *hi))
    }

    fn check_range(lo: &Self, hi: &Self) -> Result<()> {
        if !(lo.is_finite() && hi.is_finite()) || lo > hi {
            return Err(Error::Config(format!("range [{lo}, {hi}] is not a finite lo <= hi interval")));
        }
        Ok(())
    }
}

impl PriorValue for String {}
impl PriorValue for chrono::NaiveDate {}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn constant_and_singleton() {
        let mut rng = SeededRng::new(0);
        let date = chrono::NaiveDate::from_ymd_opt(1990, 1, 1).unwrap();
        assert_eq!(Prior::constant(date).draw(&mut rng).unwrap(), date);
        assert_eq!(Prior::set(["x".to_string()]).draw(&mut rng).unwrap(), "x");
    }

    #[test]
    fn integer_range_is_inclusive_and_uniform() {
        let mut rng = SeededRng::new(11);
        let prior = Prior::range(3usize, 20);
        let n = 100_000;
        let mut counts = [0usize; 21];
        for _ in 0..n {
            counts[prior.draw(&mut rng).unwrap()] += 1;
        }
        for (k, &c) in counts.iter().enumerate().skip(3) {
            let f = c as f64 / n as f64;
            assert!((f - 1.0 / 18.0).abs() < 0.01, "value {k} frequency {f}");
        }
        assert_eq!(counts[..3].iter().sum::<usize>(), 0);
    }

    #[test]
    fn power_law_matches_discrete_mass() {
        let mut rng = SeededRng::new(12);
        let prior: Prior<usize> = Prior::RangePowerLaw {
            range: [3, 40],
            exponent: 2.0,
        };
        let norm: f64 = (3..=40).map(|k: usize| (k as f64).powi(-2)).sum();
        let n = 100_000;
        let mut counts = [0usize; 41];
        for _ in 0..n {
            counts[prior.draw(&mut rng).unwrap()] += 1;
        }
        for k in [3usize, 4, 10, 40] {
            let expected = (k as f64).powi(-2) / norm;
            let f = counts[k] as f64 / n as f64;
            assert!((f - expected).abs() < 0.01, "k={k}: {f} vs {expected}");
        }
    }

    #[test]
    fn malformed_priors_are_config_errors() {
        let mut rng = SeededRng::new(0);
        assert!(matches!(Prior::<usize>::range(5, 3).draw(&mut rng), Err(Error::Config(_))));
        assert!(matches!(Prior::<usize>::set([]).draw(&mut rng), Err(Error::Config(_))));
        assert!(matches!(Prior::<f64>::range(0.0, f64::NAN).draw(&mut rng), Err(Error::Config(_))));
        let p: Prior<f64> = Prior::RangePowerLaw { range: [1.0, 2.0], exponent: 2.0 };
        assert!(matches!(p.draw(&mut rng), Err(Error::Config(_))));
        let p: Prior<usize> = Prior::RangePowerLaw { range: [0, 2], exponent: 2.0 };
        assert!(matches!(p.draw(&mut rng), Err(Error::Config(_))));
        assert!(Prior::<String>::range("a".into(), "b".into()).draw(&mut rng).is_err());
    }

    fn int_prior() -> impl Strategy<Value = Prior<usize>> {
        prop_oneof![
            (0usize..100).prop_map(Prior::constant),
            proptest::collection::vec(0usize..100, 1..8).prop_map(Prior::set),
            (0usize..50, 0usize..50).prop_map(|(a, b)| Prior::range(a, a + b)),
            (1usize..50, 0usize..50, 0.0f64..4.0).prop_map(|(a, b, e)| Prior::RangePowerLaw {
                range: [a, a + b],
                exponent: e
            }),
        ]
    }

    proptest! {
        #[test]
        fn draws_stay_in_support(prior in int_prior(), seed in any::<u64>()) {
            let mut rng = SeededRng::new(seed);
            for _ in 0..20 {
                let v = prior.draw(&mut rng).unwrap();
                prop_assert!(prior.contains(&v));
            }
        }

        #[test]
        fn real_draws_stay_in_support(lo in -1e3f64..1e3, width in 0.0f64..1e3, seed in any::<u64>()) {
            let prior = Prior::range(lo, lo + width);
            let mut rng = SeededRng::new(seed);
            for _ in 0..20 {
                let v = prior.draw(&mut rng).unwrap();
                prop_assert!(prior.contains(&v));
            }
        }
    }
}
