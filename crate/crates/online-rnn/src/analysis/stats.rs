//! Correlation statistics.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Correlation {
    pub r: f64,
    /// Two-sided p-value of `r = 0` from the t-approximation.
    pub p_value: f64,
    /// Least-squares slope of `y` on `x`.
    pub slope: f64,
    pub n: usize,
}

/// Pearson correlation between `xs` and `ys`.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<Correlation> {
    assert_eq!(xs.len(), ys.len(), "paired samples must have equal length");
    let n = xs.len();
    if n < 3 {
        return Err(HarnessError::Degenerate("correlation needs at least three points"));
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(HarnessError::Degenerate("correlation of a constant sample"));
    }
    let r = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    let dof = nf - 2.0;
    let p_value = if r.abs() == 1.0 {
        0.0
    } else {
        let t = r * (dof / (1.0 - r * r)).sqrt();
        let dist = StudentsT::new(0.0, 1.0, dof).expect("positive degrees of freedom");
        2.0 * dist.cdf(-t.abs())
    };
    Ok(Correlation {
        r,
        p_value,
        slope: sxy / sxx,
        n,
    })
}
