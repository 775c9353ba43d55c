use std::fmt;

use serde::{Deserialize, Serialize};

use super::{Result, StatsError};

/// `min(1, p · m)` for each of the `m` p-values.
pub fn bonferroni(p_values: &[f64]) -> Result<Vec<f64>> {
    if let Some(&p) = p_values.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(StatsError::ProbabilityOutOfRange(p));
    }
    let m = p_values.len() as f64;
    Ok(p_values.iter().map(|p| (p * m).min(1.0)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Magnitude {
    Negligible,
    Small,
    Medium,
    Large,
}

impl Magnitude {
    pub fn of(d: f64) -> Magnitude {
        match d.abs() {
            x if x < 0.2 => Magnitude::Negligible,
            x if x < 0.5 => Magnitude::Small,
            x if x < 0.8 => Magnitude::Medium,
            _ => Magnitude::Large,
        }
    }
}

impl fmt::Display for Magnitude {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Magnitude::Negligible => "negligible",
            Magnitude::Small => "small",
            Magnitude::Medium => "medium",
            Magnitude::Large => "large",
        })
    }
}

pub(crate) fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Standardized mean difference using the pooled sample standard deviation.
pub fn cohens_d(a: &[f64], b: &[f64]) -> Result<(f64, Magnitude)> {
    if a.len() < 2 || b.len() < 2 {
        return Err(StatsError::TooFewObservations);
    }
    let (ma, mb) = (mean(a), mean(b));
    let ss = |xs: &[f64], m: f64| xs.iter().map(|x| (x - m).powi(2)).sum::<f64>();
    let pooled = (ss(a, ma) + ss(b, mb)) / (a.len() + b.len() - 2) as f64;
    if pooled == 0.0 {
        return Err(StatsError::ZeroVariance);
    }
    let d = (ma - mb) / pooled.sqrt();
    Ok((d, Magnitude::of(d)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bonferroni_examples() {
        assert_eq!(bonferroni(&[0.01]).unwrap(), vec![0.01]);
        assert_eq!(bonferroni(&[0.02, 0.03]).unwrap(), vec![0.04, 0.06]);
        assert_eq!(bonferroni(&[0.9, 0.9, 0.9]).unwrap(), vec![1.0; 3]);
        assert!(matches!(
            bonferroni(&[1.5]),
            Err(StatsError::ProbabilityOutOfRange(_))
        ));
    }

    #[test]
    fn cohens_d_examples() {
        assert_eq!(
            cohens_d(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(),
            (0.0, Magnitude::Negligible)
        );
        // both groups have sample sd 1
        assert_eq!(
            cohens_d(&[2.0, 3.0, 4.0], &[1.0, 2.0, 3.0]).unwrap(),
            (1.0, Magnitude::Large)
        );
        assert!(matches!(
            cohens_d(&[0.0, 0.0], &[0.0, 0.0]),
            Err(StatsError::ZeroVariance)
        ));
        let (d, _) = cohens_d(&[1.0, 5.0, 2.0], &[0.0, 3.0, 1.0, 2.0]).unwrap();
        let (r, _) = cohens_d(&[0.0, 3.0, 1.0, 2.0], &[1.0, 5.0, 2.0]).unwrap();
        assert_eq!(d, -r);
    }

    #[test]
    fn magnitude_bands() {
        assert_eq!(Magnitude::of(0.19), Magnitude::Negligible);
        assert_eq!(Magnitude::of(-0.2), Magnitude::Small);
        assert_eq!(Magnitude::of(0.5), Magnitude::Medium);
        assert_eq!(Magnitude::of(0.8), Magnitude::Large);
    }
}
