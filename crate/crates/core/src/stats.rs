//! Batch-means confidence intervals.

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::spn::Estimate;

/// Two-sided Student-t critical value for `confidence` with `dof` degrees of freedom.
pub fn t_critical(confidence: f64, dof: usize) -> f64 {
    let dist = StudentsT::new(0.0, 1.0, dof as f64).expect("dof >= 1");
    dist.inverse_cdf(0.5 + confidence / 2.0)
}

pub fn mean(samples: &[f64]) -> f64 {
    samples.iter().sum::<f64>() / samples.len() as f64
}

/// Mean and t-based confidence half-width of independent batch values.
/// A single sample yields a zero half-width.
pub fn summarize(samples: &[f64], confidence: f64) -> Estimate {
    let n = samples.len();
    if n == 0 {
        return Estimate {
            value: f64::NAN,
            ci_halfwidth: f64::NAN,
        };
    }
    let m = mean(samples);
    if n < 2 {
        return Estimate::exact(m);
    }
    let var = samples.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
    Estimate {
        value: m,
        ci_halfwidth: t_critical(confidence, n - 1) * (var / n as f64).sqrt(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn t_critical_matches_tables() {
        // Two-sided 95%: 12.706 (1 dof), 2.045 (29), 2.262 (9).
        assert!((t_critical(0.95, 1) - 12.7062).abs() < 1e-3);
        assert!((t_critical(0.95, 29) - 2.0452).abs() < 1e-3);
        assert!((t_critical(0.95, 9) - 2.2622).abs() < 1e-3);
    }

    #[test]
    fn summarize_constant_has_zero_width() {
        let e = summarize(&[2.0; 10], 0.95);
        assert_eq!(e.value, 2.0);
        assert_eq!(e.ci_halfwidth, 0.0);
    }

    #[test]
    fn summarize_two_points() {
        let e = summarize(&[1.0, 3.0], 0.95);
        assert_eq!(e.value, 2.0);
        // s = sqrt(2), s/sqrt(2) = 1
        assert!((e.ci_halfwidth - t_critical(0.95, 1)).abs() < 1e-12);
    }
}
