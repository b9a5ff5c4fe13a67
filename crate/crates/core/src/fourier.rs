//! Fields stored as Fourier coefficients, analysis/synthesis against a
//! quadrature grid, and Plancherel-based norms.
//!
//! Every operator in this crate acts on a representation block as a scalar
//! multiple of the identity, so each mode carries one scalar coefficient
//! `c` with `f^(xi) = c I_d`. The series is `f(x) = sum_xi d_xi c_xi chi_xi(x)`
//! and Plancherel reads `||f||^2 = sum_xi d_xi^2 |c_xi|^2`.

use std::sync::Arc;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::groups::{su2_character, GroupSpec, ModeIndex, ModeSet, QuadratureGrid};
use crate::scalar::Scalar;

/// A real field on a group, stored as one complex coefficient per mode in
/// the order of [`ModeSet::modes`].
#[derive(Debug, Clone)]
pub struct SpectralField<T> {
    modes: Arc<ModeSet<T>>,
    coeffs: Vec<Complex<T>>,
}

impl<T: Scalar> SpectralField<T> {
    pub fn zeros(modes: Arc<ModeSet<T>>) -> Self {
        let n = modes.len();
        SpectralField {
            modes,
            coeffs: vec![Complex::new(T::zero(), T::zero()); n],
        }
    }

    /// Builds a field from coefficients in mode order, rejecting data that
    /// does not describe a real function.
    pub fn from_coeffs(modes: Arc<ModeSet<T>>, coeffs: Vec<Complex<T>>) -> Result<Self> {
        if coeffs.len() != modes.len() {
            return Err(Error::DimensionMismatch {
                expected: modes.len(),
                found: coeffs.len(),
            });
        }
        let field = SpectralField { modes, coeffs };
        let residue = field.realness_defect();
        let scale = field.coeffs.iter().map(|c| c.norm()).fold(T::one(), T::max);
        let threshold = T::exactness_tol() * scale;
        if residue > threshold {
            return Err(Error::BrokenHermitianSymmetry {
                residue: residue.as_f64(),
                threshold: threshold.as_f64(),
            });
        }
        Ok(field)
    }

    /// Builds a field from arbitrary coefficients by projecting onto real
    /// functions: `c_k <- (c_k + conj(c_{-k})) / 2` on tori, `Re c` on `SU(2)`.
    pub fn from_coeffs_symmetrized(modes: Arc<ModeSet<T>>, coeffs: Vec<Complex<T>>) -> Result<Self> {
        if coeffs.len() != modes.len() {
            return Err(Error::DimensionMismatch {
                expected: modes.len(),
                found: coeffs.len(),
            });
        }
        let mut field = SpectralField { modes, coeffs };
        field.symmetrize();
        Ok(field)
    }

    /// Field with a single nonzero entry pair: `c` at `index` and `conj(c)` at
    /// its conjugate mode.
    pub fn single_mode(modes: Arc<ModeSet<T>>, index: &ModeIndex, c: Complex<T>) -> Result<Self> {
        let i = modes
            .position(index)
            .ok_or_else(|| Error::UnknownMode(index.to_string()))?;
        let mut field = Self::zeros(modes);
        field.coeffs[i] = c;
        let j = field.modes.conjugate_position(i);
        field.coeffs[j] = c.conj();
        field.symmetrize();
        Ok(field)
    }

    fn symmetrize(&mut self) {
        let half = T::lit(0.5);
        if self.modes.group().central_only() {
            for c in &mut self.coeffs {
                c.im = T::zero();
            }
            return;
        }
        for i in 0..self.coeffs.len() {
            let j = self.modes.conjugate_position(i);
            if j < i {
                continue;
            }
            let avg = (self.coeffs[i] + self.coeffs[j].conj()) * half;
            self.coeffs[i] = avg;
            self.coeffs[j] = avg.conj();
        }
    }

    /// Largest violation of the realness condition.
    pub fn realness_defect(&self) -> T {
        if self.modes.group().central_only() {
            return self.coeffs.iter().map(|c| c.im.abs()).fold(T::zero(), T::max);
        }
        (0..self.coeffs.len())
            .map(|i| (self.coeffs[i] - self.coeffs[self.modes.conjugate_position(i)].conj()).norm())
            .fold(T::zero(), T::max)
    }

    pub fn modes(&self) -> &Arc<ModeSet<T>> {
        &self.modes
    }

    pub fn group(&self) -> GroupSpec {
        self.modes.group()
    }

    pub fn truncation(&self) -> u32 {
        self.modes.truncation()
    }

    pub fn coeffs(&self) -> &[Complex<T>] {
        &self.coeffs
    }

    pub(crate) fn coeffs_mut(&mut self) -> &mut [Complex<T>] {
        &mut self.coeffs
    }

    pub fn coeff(&self, index: &ModeIndex) -> Option<Complex<T>> {
        self.modes.position(index).map(|i| self.coeffs[i])
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.re == T::zero() && c.im == T::zero())
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.modes.same_as(&other.modes) {
            Ok(())
        } else {
            Err(Error::IncompatibleFields(format!(
                "{} K={} vs {} K={}",
                self.group(),
                self.truncation(),
                other.group(),
                other.truncation()
            )))
        }
    }

    pub fn scaled(&self, s: T) -> Self {
        SpectralField {
            modes: self.modes.clone(),
            coeffs: self.coeffs.iter().map(|&c| c * s).collect(),
        }
    }

    /// `self + s * other`.
    pub fn add_scaled(&self, s: T, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        Ok(SpectralField {
            modes: self.modes.clone(),
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(&a, &b)| a + b * s)
                .collect(),
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add_scaled(-T::one(), other)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.add_scaled(T::one(), other)
    }

    /// `sum_xi d_xi^2 lambda_xi^{2s} |c_xi|^2`; `s = 0` gives the squared L2 norm.
    fn weighted_square_sum(&self, s: T) -> T {
        self.modes
            .modes()
            .iter()
            .zip(&self.coeffs)
            .map(|(m, c)| {
                let d = T::from_u32(m.rep_dimension).expect("dimension fits");
                let w = if s == T::zero() {
                    T::one()
                } else if m.eigenvalue_sq == T::zero() {
                    T::zero()
                } else {
                    m.eigenvalue_sq.powf(s)
                };
                d * d * w * c.norm_sqr()
            })
            .sum()
    }

    /// L2 norm from the Plancherel formula.
    pub fn plancherel_l2_norm(&self) -> T {
        self.weighted_square_sum(T::zero()).sqrt()
    }

    /// Homogeneous Sobolev seminorm `||(-L)^{s/2} f||_{L2}`.
    pub fn homogeneous_sobolev_norm(&self, s: T) -> T {
        if s == T::zero() {
            return self.plancherel_l2_norm();
        }
        self.weighted_square_sum(s).sqrt()
    }

    /// Returns `(homogeneous part, full norm)` where the full `H^s` norm is the
    /// sum of the L2 norm and the homogeneous part.
    pub fn sobolev_norm(&self, s: T) -> (T, T) {
        let homogeneous = self.homogeneous_sobolev_norm(s);
        (homogeneous, self.plancherel_l2_norm() + homogeneous)
    }

    /// `||f||_{H^1} = ||f||_{L2} + ||(-L)^{1/2} f||_{L2}`.
    pub fn h1_norm(&self) -> T {
        self.sobolev_norm(T::one()).1
    }

    /// Gradient norm `||(-L)^{1/2} f||_{L2}`.
    pub fn h1_seminorm(&self) -> T {
        self.homogeneous_sobolev_norm(T::one())
    }

    pub fn to_document(&self) -> FieldDocument<T> {
        FieldDocument {
            group: self.group(),
            truncation: self.truncation(),
            entries: self
                .modes
                .modes()
                .iter()
                .zip(&self.coeffs)
                .map(|(m, c)| (m.index.components(), c.re, c.im))
                .collect(),
        }
    }

    /// Rebuilds a field from its serialized form on a shared mode set.
    /// Entries may be listed in any order; missing modes are zero.
    pub fn from_document(doc: &FieldDocument<T>, modes: Arc<ModeSet<T>>) -> Result<Self> {
        if doc.group != modes.group() || doc.truncation != modes.truncation() {
            return Err(Error::IncompatibleFields(format!(
                "document {} K={} vs mode set {} K={}",
                doc.group,
                doc.truncation,
                modes.group(),
                modes.truncation()
            )));
        }
        let mut coeffs = vec![Complex::new(T::zero(), T::zero()); modes.len()];
        for (index, re, im) in &doc.entries {
            let idx = ModeIndex::from_components(doc.group, index)
                .ok_or_else(|| Error::UnknownMode(format!("{index:?}")))?;
            let pos = modes
                .position(&idx)
                .ok_or_else(|| Error::UnknownMode(idx.to_string()))?;
            coeffs[pos] = Complex::new(*re, *im);
        }
        Self::from_coeffs(modes, coeffs)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.to_document())?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: FieldDocument<T> = serde_json::from_str(s)?;
        let modes = Arc::new(ModeSet::new(doc.group, doc.truncation));
        Self::from_document(&doc, modes)
    }
}

/// Serialized form of a [`SpectralField`]:
/// `{"group": ..., "K": ..., "entries": [[index, re, im], ...]}`.
///
/// Floats are written in shortest round-trip form, so decoding reproduces
/// every coefficient bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldDocument<T> {
    pub group: GroupSpec,
    #[serde(rename = "K")]
    pub truncation: u32,
    pub entries: Vec<(Vec<i64>, T, T)>,
}

/// Precomputed analysis and synthesis tables for one `(mode set, grid)` pair.
///
/// Torus transforms are applied axis by axis (sum factorization), so a
/// transform costs `O(N^D (2K+1))` instead of `O(N^D (2K+1)^D)`.
#[derive(Debug, Clone)]
pub struct Transform<T> {
    modes: Arc<ModeSet<T>>,
    grid: Arc<QuadratureGrid<T>>,
    // (2K+1) x N for tori, (K+1) x N for SU(2)
    analysis: Vec<Complex<T>>,
    // N x (2K+1) for tori, N x (K+1) for SU(2)
    synthesis: Vec<Complex<T>>,
    side: usize,
    n_axis: usize,
}

impl<T: Scalar> Transform<T> {
    pub fn new(modes: Arc<ModeSet<T>>, grid: Arc<QuadratureGrid<T>>) -> Result<Self> {
        if modes.group() != grid.group() {
            return Err(Error::IncompatibleFields(format!(
                "modes on {} but grid on {}",
                modes.group(),
                grid.group()
            )));
        }
        if grid.truncation() < modes.truncation() {
            return Err(Error::IncompatibleFields(format!(
                "grid built for K={} cannot resolve K={}",
                grid.truncation(),
                modes.truncation()
            )));
        }
        let k = modes.truncation() as i64;
        let nodes = grid.axis_nodes().to_vec();
        let n_axis = nodes.len();
        let (side, analysis, synthesis) = if modes.group().central_only() {
            let side = k as usize + 1;
            let mut analysis = Vec::with_capacity(side * n_axis);
            let mut synthesis = vec![Complex::new(T::zero(), T::zero()); n_axis * side];
            for level in 0..side {
                let d = T::from_usize_lossy(level + 1);
                for (j, &th) in nodes.iter().enumerate() {
                    let chi = su2_character(level as u32, th);
                    analysis.push(Complex::new(grid.weights()[j] * chi / d, T::zero()));
                    synthesis[j * side + level] = Complex::new(d * chi, T::zero());
                }
            }
            (side, analysis, synthesis)
        } else {
            let side = 2 * k as usize + 1;
            let inv_n = T::one() / T::from_usize_lossy(n_axis);
            let mut analysis = Vec::with_capacity(side * n_axis);
            let mut synthesis = vec![Complex::new(T::zero(), T::zero()); n_axis * side];
            for (r, freq) in (-k..=k).enumerate() {
                let kf = T::from_i64(freq).expect("frequency fits");
                for (j, &x) in nodes.iter().enumerate() {
                    let (s, c) = (kf * x).sin_cos();
                    analysis.push(Complex::new(c * inv_n, -s * inv_n));
                    synthesis[j * side + r] = Complex::new(c, s);
                }
            }
            (side, analysis, synthesis)
        };
        Ok(Transform {
            modes,
            grid,
            analysis,
            synthesis,
            side,
            n_axis,
        })
    }

    /// Convenience constructor building the grid with `oversample`.
    pub fn with_oversample(modes: Arc<ModeSet<T>>, oversample: u32) -> Result<Self> {
        let grid = Arc::new(QuadratureGrid::new(modes.group(), modes.truncation(), oversample));
        Self::new(modes, grid)
    }

    pub fn modes(&self) -> &Arc<ModeSet<T>> {
        &self.modes
    }

    pub fn grid(&self) -> &Arc<QuadratureGrid<T>> {
        &self.grid
    }

    /// Quadrature approximation of the Fourier coefficients of sampled real
    /// data; exact when the data are band-limited to the mode set.
    pub fn analyze(&self, samples: &[T]) -> Result<SpectralField<T>> {
        if samples.len() != self.grid.len() {
            return Err(Error::DimensionMismatch {
                expected: self.grid.len(),
                found: samples.len(),
            });
        }
        let mut tensor: Vec<Complex<T>> = samples.iter().map(|&v| Complex::new(v, T::zero())).collect();
        let mut shape = self.grid.shape().to_vec();
        for axis in 0..shape.len() {
            tensor = apply_along_axis(&tensor, &shape, axis, &self.analysis, self.side, self.n_axis);
            shape[axis] = self.side;
        }
        let coeffs = (0..self.modes.len())
            .map(|i| tensor[self.modes.tensor_offset(i)])
            .collect();
        SpectralField::from_coeffs_symmetrized(self.modes.clone(), coeffs)
    }

    /// Point values of `field` on the grid. Fails if the imaginary residue of
    /// the series exceeds the exactness threshold.
    pub fn synthesize(&self, field: &SpectralField<T>) -> Result<Vec<T>> {
        if !field.modes().same_as(&self.modes) {
            return Err(Error::IncompatibleFields(format!(
                "field on {} K={} vs transform K={}",
                field.group(),
                field.truncation(),
                self.modes.truncation()
            )));
        }
        let rank = self.grid.shape().len();
        let mut shape = vec![self.side; rank];
        let mut tensor = vec![Complex::new(T::zero(), T::zero()); self.side.pow(rank as u32)];
        for (i, &c) in field.coeffs().iter().enumerate() {
            tensor[self.modes.tensor_offset(i)] = c;
        }
        for axis in 0..rank {
            tensor = apply_along_axis(&tensor, &shape, axis, &self.synthesis, self.n_axis, self.side);
            shape[axis] = self.n_axis;
        }
        let residue = tensor.iter().map(|c| c.im.abs()).fold(T::zero(), T::max);
        let scale = field
            .modes()
            .modes()
            .iter()
            .zip(field.coeffs())
            .map(|(m, c)| T::from_u32(m.rep_dimension * m.rep_dimension).unwrap() * c.norm())
            .fold(T::zero(), |a, b| a + b)
            .max(T::one());
        let threshold = T::exactness_tol() * scale;
        if residue > threshold {
            return Err(Error::BrokenHermitianSymmetry {
                residue: residue.as_f64(),
                threshold: threshold.as_f64(),
            });
        }
        Ok(tensor.into_iter().map(|c| c.re).collect())
    }
}

/// Contracts `matrix` (`rows x cols`, row-major) against `axis` of a row-major
/// tensor whose extent along that axis is `cols`.
fn apply_along_axis<T: Scalar>(
    input: &[Complex<T>],
    shape: &[usize],
    axis: usize,
    matrix: &[Complex<T>],
    rows: usize,
    cols: usize,
) -> Vec<Complex<T>> {
    debug_assert_eq!(shape[axis], cols);
    let outer: usize = shape[..axis].iter().product();
    let inner: usize = shape[axis + 1..].iter().product();
    let zero = Complex::new(T::zero(), T::zero());
    let mut out = vec![zero; outer * rows * inner];
    for o in 0..outer {
        let src = &input[o * cols * inner..(o + 1) * cols * inner];
        let dst = &mut out[o * rows * inner..(o + 1) * rows * inner];
        if inner == 1 {
            for r in 0..rows {
                let row = &matrix[r * cols..(r + 1) * cols];
                dst[r] = row.iter().zip(src).fold(zero, |acc, (&m, &v)| acc + m * v);
            }
        } else {
            for r in 0..rows {
                let d = &mut dst[r * inner..(r + 1) * inner];
                for c in 0..cols {
                    let m = matrix[r * cols + c];
                    let s = &src[c * inner..(c + 1) * inner];
                    for (acc, &v) in d.iter_mut().zip(s) {
                        *acc += m * v;
                    }
                }
            }
        }
    }
    out
}

/// Fourier coefficients of grid samples (see [`Transform::analyze`]).
pub fn analyze<T: Scalar>(samples: &[T], transform: &Transform<T>) -> Result<SpectralField<T>> {
    transform.analyze(samples)
}

/// Grid values of a field (see [`Transform::synthesize`]).
pub fn synthesize<T: Scalar>(field: &SpectralField<T>, transform: &Transform<T>) -> Result<Vec<T>> {
    transform.synthesize(field)
}

/// L2 norm of grid samples by quadrature.
pub fn quadrature_l2_norm<T: Scalar>(samples: &[T], grid: &QuadratureGrid<T>) -> T {
    grid.weights()
        .iter()
        .zip(samples)
        .map(|(&w, &v)| w * v * v)
        .sum::<T>()
        .sqrt()
}
