//! Empirical probe of the Gagliardo-Nirenberg interpolation
//! `||f||_q <= C ||f||_{H^1}^theta ||f||_2^{1-theta}`, `theta = n (1/2 - 1/q)`.

use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::fourier::{SpectralField, Transform};
use crate::groups::ModeSet;
use crate::linear::fmt17;
use crate::scalar::Scalar;

/// Largest admissible `q` in dimension `n >= 3`, `2n / (n - 2)`.
pub fn critical_exponent(n: usize) -> Result<f64> {
    if n < 3 {
        return Err(invalid("n", format!("the interpolation needs dimension >= 3, got {n}")));
    }
    Ok(2.0 * n as f64 / (n as f64 - 2.0))
}

/// `theta(n, q) = n (1/2 - 1/q)` for `2 <= q <= 2n/(n-2)`.
pub fn theta(n: usize, q: f64) -> Result<f64> {
    let q_max = critical_exponent(n)?;
    if !(2.0..=q_max).contains(&q) {
        return Err(invalid("q", format!("need 2 <= q <= {q_max} for n = {n}, got {q}")));
    }
    Ok(n as f64 * (0.5 - 1.0 / q))
}

/// `(sum_j w_j |f(x_j)|^q)^{1/q}` on the grid of `transform`.
pub fn lq_norm<T: Scalar>(field: &SpectralField<T>, q: T, transform: &Transform<T>) -> Result<T> {
    let samples = transform.synthesize(field)?;
    let s: T = samples
        .iter()
        .zip(transform.grid().weights())
        .map(|(&v, &w)| w * v.abs().powf(q))
        .sum();
    Ok(s.powf(q.recip()))
}

/// Grid refinement study: doubles the oversampling from `start` until the
/// `L^q` norms of `probe` change by less than `rel_tol` (relative), up to
/// `max_oversample`. Returns the coarser transform of the final pair and the
/// largest relative change seen at that step.
pub fn adequate_transform<T: Scalar>(
    modes: &Arc<ModeSet<T>>,
    probe: &[SpectralField<T>],
    q: T,
    start: u32,
    rel_tol: f64,
    max_oversample: u32,
) -> Result<(Transform<T>, f64)> {
    let mut m = start.max(1);
    let mut coarse = Transform::with_oversample(modes.clone(), m)?;
    loop {
        let fine = Transform::with_oversample(modes.clone(), 2 * m)?;
        let mut change = 0.0f64;
        for f in probe {
            let a = lq_norm(f, q, &coarse)?.as_f64();
            let b = lq_norm(f, q, &fine)?.as_f64();
            if b > 0.0 {
                change = change.max((a - b).abs() / b);
            }
        }
        if change < rel_tol || 2 * m > max_oversample {
            return Ok((coarse, change));
        }
        m *= 2;
        coarse = fine;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GNSample {
    pub lq_norm: f64,
    pub h1_norm: f64,
    pub l2_norm: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GNReport {
    pub n: usize,
    pub q: f64,
    pub theta: f64,
    pub samples: Vec<GNSample>,
    /// Zero fields, for which the ratio is `0/0`.
    pub skipped: usize,
    pub max_ratio: f64,
}

impl GNReport {
    /// CSV with columns `lq_norm, h1_norm, l2_norm, ratio`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["lq_norm", "h1_norm", "l2_norm", "ratio"])?;
        for s in &self.samples {
            w.write_record([fmt17(s.lq_norm), fmt17(s.h1_norm), fmt17(s.l2_norm), fmt17(s.ratio)])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// `||f||_q / (||f||_{H^1}^theta ||f||_2^{1-theta})` for each nonzero field,
/// with spectral `H^1` and `L^2` norms and the `L^q` norm on `transform`'s grid.
pub fn check_gn<T: Scalar>(fields: &[SpectralField<T>], n: usize, q: f64, transform: &Transform<T>) -> Result<GNReport> {
    let th = theta(n, q)?;
    let dim = transform.modes().group().topological_dimension();
    if dim != n {
        return Err(invalid("n", format!("fields live on a group of dimension {dim}, not {n}")));
    }
    let mut samples = Vec::with_capacity(fields.len());
    let mut skipped = 0;
    for f in fields {
        if f.is_zero() {
            skipped += 1;
            continue;
        }
        let lq = lq_norm(f, T::lit(q), transform)?.as_f64();
        let h1 = f.h1_norm().as_f64();
        let l2 = f.plancherel_l2_norm().as_f64();
        samples.push(GNSample {
            lq_norm: lq,
            h1_norm: h1,
            l2_norm: l2,
            ratio: lq / (h1.powf(th) * l2.powf(1.0 - th)),
        });
    }
    let max_ratio = samples.iter().map(|s| s.ratio).fold(0.0, f64::max);
    Ok(GNReport {
        n,
        q,
        theta: th,
        samples,
        skipped,
        max_ratio,
    })
}
