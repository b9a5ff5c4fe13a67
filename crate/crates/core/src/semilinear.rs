//! Mild solutions of `u_tt - L u + b u_t + m^2 u = |u|^p`.
//!
//! The mild-solution operator is
//! `N u(t) = u0 * E0(t) + u1 * E1(t) + int_0^t |u(s)|^p * E1(t - s) ds`.
//! Convolutions with `E0`, `E1` act on each mode as the exact propagator
//! multipliers; the time integral is a composite trapezoid rule on a uniform
//! grid `t_n = n dt`. The trapezoid sums are accumulated with the one-step
//! propagator, `A_{n+1} = S(dt) A_n + dt (0, F_{n+1})`, which is algebraically
//! the same sum as evaluating every `E1(t_n - s_j)` directly but costs
//! `O(steps)` instead of `O(steps^2)` per mode.

use std::io::Write;
use std::sync::Arc;

use log::{debug, warn};
use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fit::linear_fit;
use crate::fourier::{FieldDocument, SpectralField, Transform};
use crate::groups::{dealias_factor, ModeSet};
use crate::linear::{write_decay_samples_csv, DecaySample, EvolutionState};
use crate::propagator::{decay_function, decay_weight, propagate_mode, EvolutionParams, PropagatorMatrix, Regime};
use crate::scalar::Scalar;

/// Parameters of a semilinear run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct SemilinearConfig<T> {
    /// Exponent of `|u|^p`, `p > 1`.
    pub p: T,
    /// Horizon `T`.
    pub horizon: T,
    /// Number of uniform Duhamel steps; `dt = horizon / steps`.
    pub steps: usize,
    pub picard_tol: T,
    pub picard_max_iter: usize,
    pub dealias_oversample: u32,
}

impl<T: Scalar> SemilinearConfig<T> {
    /// Defaults: `dt = T/1024`, tolerance `1e-10`, 50 iterations, and the
    /// dealiasing factor for `p`.
    pub fn new(p: T, horizon: T) -> Self {
        SemilinearConfig {
            p,
            horizon,
            steps: 1024,
            picard_tol: T::lit(1e-10),
            picard_max_iter: 50,
            dealias_oversample: dealias_factor(p.as_f64()),
        }
    }

    pub fn dt(&self) -> T {
        self.horizon / T::from_usize_lossy(self.steps)
    }

    /// Grid time `t_n`.
    pub fn time(&self, n: usize) -> T {
        self.horizon * T::from_usize_lossy(n) / T::from_usize_lossy(self.steps)
    }

    /// Checks the hard constraints and returns warnings for soft ones
    /// (the exponent bound `p <= n/(n-2)` for `n >= 3`).
    pub fn validate(&self, topological_dimension: usize) -> Result<Vec<String>> {
        if !(self.p > T::one() && self.p.is_finite()) {
            return Err(invalid("p", format!("exponent must exceed 1, got {}", self.p)));
        }
        if !(self.horizon > T::zero() && self.horizon.is_finite()) {
            return Err(invalid("T", format!("horizon must be positive, got {}", self.horizon)));
        }
        if self.steps == 0 {
            return Err(invalid("dt", "need at least one time step"));
        }
        if !(self.picard_tol > T::zero()) {
            return Err(invalid("picard_tol", "tolerance must be positive"));
        }
        if self.picard_max_iter == 0 {
            return Err(invalid("picard_max_iter", "need at least one iteration"));
        }
        if self.dealias_oversample == 0 {
            return Err(invalid("dealias_oversample", "oversampling factor must be >= 1"));
        }
        let mut warnings = Vec::new();
        let n = topological_dimension;
        if n >= 3 {
            let bound = n as f64 / (n as f64 - 2.0);
            if self.p.as_f64() > bound {
                warnings.push(format!(
                    "p = {} exceeds n/(n-2) = {bound}; outside the small-data existence regime",
                    self.p
                ));
            }
        } else {
            warnings.push(format!(
                "topological dimension {n} < 3; the Gagliardo-Nirenberg step behind small-data existence does not apply"
            ));
        }
        Ok(warnings)
    }
}

/// Snapshots `(u, u_t)` at `t_n = n dt`, `n = 0..=steps`.
#[derive(Debug, Clone)]
pub struct Trajectory<T> {
    pub states: Vec<EvolutionState<T>>,
    pub dt: T,
}

impl<T: Scalar> Trajectory<T> {
    pub fn new(states: Vec<EvolutionState<T>>, dt: T) -> Result<Self> {
        if states.is_empty() {
            return Err(invalid("trajectory", "no snapshots"));
        }
        if states[0].time != T::zero() {
            return Err(invalid("trajectory", "first snapshot must be at t = 0"));
        }
        let tol = T::lit(1e-9) * dt.max(T::one());
        for (n, s) in states.iter().enumerate() {
            let expect = dt * T::from_usize_lossy(n);
            if (s.time - expect).abs() > tol {
                return Err(invalid("trajectory", format!("snapshot {n} at t = {} is off the dt grid", s.time)));
            }
        }
        Ok(Trajectory { states, dt })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn last(&self) -> &EvolutionState<T> {
        self.states.last().expect("nonempty")
    }

    pub fn params(&self) -> EvolutionParams<T> {
        self.states[0].params
    }

    /// Norm time series with the decay function as envelope column.
    pub fn samples(&self) -> Vec<DecaySample> {
        let params = self.params();
        self.states
            .iter()
            .map(|s| DecaySample {
                t: s.time.as_f64(),
                l2_u: s.l2_u().as_f64(),
                h1dot_u: s.h1dot_u().as_f64(),
                l2_ut: s.l2_ut().as_f64(),
                d_envelope: decay_function(s.time, &params).as_f64(),
            })
            .collect()
    }

    /// CSV with columns `t, l2_u, h1dot_u, l2_ut, d_envelope`.
    pub fn write_norms_csv<W: Write>(&self, out: W) -> Result<()> {
        write_decay_samples_csv(&self.samples(), out)
    }

    pub fn to_document(&self) -> TrajectoryDocument<T> {
        TrajectoryDocument {
            params: self.params(),
            dt: self.dt,
            states: self
                .states
                .iter()
                .map(|s| SnapshotDocument {
                    time: s.time,
                    u: s.u.to_document(),
                    ut: s.ut.to_document(),
                })
                .collect(),
        }
    }

    pub fn from_document(doc: &TrajectoryDocument<T>, modes: Arc<ModeSet<T>>) -> Result<Self> {
        let states = doc
            .states
            .iter()
            .map(|s| {
                EvolutionState::new(
                    SpectralField::from_document(&s.u, modes.clone())?,
                    SpectralField::from_document(&s.ut, modes.clone())?,
                    s.time,
                    doc.params,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Trajectory::new(states, doc.dt)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct SnapshotDocument<T> {
    pub time: T,
    pub u: FieldDocument<T>,
    pub ut: FieldDocument<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct TrajectoryDocument<T> {
    pub params: EvolutionParams<T>,
    pub dt: T,
    pub states: Vec<SnapshotDocument<T>>,
}

/// `sup_n w(t_n)^{-1} (||u|| + ||(-L)^{1/2} u|| + ||u_t||)` with the
/// regularized weight of [`decay_weight`]; the sup runs over snapshot times.
pub fn xt_norm<T: Scalar>(traj: &Trajectory<T>) -> T {
    let params = traj.params();
    traj.states
        .iter()
        .map(|s| s.energy_norm_sum() / decay_weight(s.time, &params))
        .fold(T::zero(), T::max)
}

/// Same sup with the unregularized decay function; snapshots where it
/// vanishes (`t = 0` in the critical regime) are skipped.
pub fn xt_norm_unregularized<T: Scalar>(traj: &Trajectory<T>) -> T {
    let params = traj.params();
    traj.states
        .iter()
        .filter(|s| decay_function(s.time, &params) > T::zero())
        .map(|s| s.energy_norm_sum() / decay_function(s.time, &params))
        .fold(T::zero(), T::max)
}

/// `xt_norm(a - b)` without materializing the difference trajectory.
pub fn xt_distance<T: Scalar>(a: &Trajectory<T>, b: &Trajectory<T>) -> Result<T> {
    if a.len() != b.len() {
        return Err(invalid("trajectory", format!("lengths differ: {} vs {}", a.len(), b.len())));
    }
    let params = a.params();
    let mut sup = T::zero();
    for (x, y) in a.states.iter().zip(&b.states) {
        let du = x.u.sub(&y.u)?;
        let dut = x.ut.sub(&y.ut)?;
        let sum = du.plancherel_l2_norm() + du.h1_seminorm() + dut.plancherel_l2_norm();
        sup = sup.max(sum / decay_weight(x.time, &params));
    }
    Ok(sup)
}

/// `|x|^p` with magnitudes below the underflow cutoff mapped to zero.
#[inline]
pub fn abs_pow<T: Scalar>(x: T, p: T) -> T {
    let a = x.abs();
    if a < T::underflow_cutoff() {
        T::zero()
    } else {
        a.powf(p)
    }
}

/// Pseudospectral `|u|^p`: synthesize on the (oversampled) grid of
/// `transform`, apply the power pointwise, analyze back to the mode set.
pub fn nonlinearity<T: Scalar>(u: &SpectralField<T>, p: T, transform: &Transform<T>) -> Result<SpectralField<T>> {
    let mut samples = transform.synthesize(u)?;
    for v in samples.iter_mut() {
        if !v.is_finite() {
            return Err(Error::BlowUp { time: f64::NAN });
        }
        *v = abs_pow(*v, p);
        if !v.is_finite() {
            return Err(Error::BlowUp { time: f64::NAN });
        }
    }
    transform.analyze(&samples)
}

/// Outcome of a Picard iteration.
#[derive(Debug, Clone)]
pub struct PicardReport<T> {
    pub converged: bool,
    /// Number of applications of `N` performed (including resumed ones).
    pub iterations: usize,
    /// `||u^{(j+1)} - u^{(j)}||_{X(T)}` per iteration.
    pub distances: Vec<T>,
    /// Ratios of consecutive distances.
    pub contraction_factors: Vec<T>,
    pub failure: Option<String>,
    pub blowup_time: Option<f64>,
    /// Last iterate (the fixed point when converged).
    pub trajectory: Trajectory<T>,
}

impl<T: Scalar> PicardReport<T> {
    pub fn summary(&self) -> PicardSummary {
        let params = self.trajectory.params();
        PicardSummary {
            converged: self.converged,
            iterations: self.iterations,
            distances: self.distances.iter().map(|d| d.as_f64()).collect(),
            contraction_factors: self.contraction_factors.iter().map(|d| d.as_f64()).collect(),
            failure: self.failure.clone(),
            blowup_time: self.blowup_time,
            xt_norm: xt_norm(&self.trajectory).as_f64(),
            xt_norm_unregularized: (params.regime() == Regime::Critical)
                .then(|| xt_norm_unregularized(&self.trajectory).as_f64()),
        }
    }

    /// Resumable state after the last completed iteration.
    pub fn checkpoint(&self) -> PicardCheckpoint<T> {
        PicardCheckpoint {
            schema_version: 1,
            iteration: self.iterations,
            distances: self.distances.clone(),
            trajectory: self.trajectory.to_document(),
        }
    }

    /// CSV with columns `iteration, distance, contraction_factor`.
    pub fn write_iterations_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["iteration", "distance", "contraction_factor"])?;
        for (j, d) in self.distances.iter().enumerate() {
            let rho = if j == 0 {
                String::new()
            } else {
                crate::linear::fmt17(self.contraction_factors[j - 1].as_f64())
            };
            w.write_record([(j + 1).to_string(), crate::linear::fmt17(d.as_f64()), rho])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Serializable digest of a [`PicardReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PicardSummary {
    pub converged: bool,
    pub iterations: usize,
    pub distances: Vec<f64>,
    pub contraction_factors: Vec<f64>,
    pub failure: Option<String>,
    pub blowup_time: Option<f64>,
    pub xt_norm: f64,
    /// Critical regime only: the sup with the unregularized `t e^{-bt/2}` weight over `t > 0`.
    pub xt_norm_unregularized: Option<f64>,
}

/// Serialized Picard state: the current iterate and iteration counter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct PicardCheckpoint<T> {
    pub schema_version: u32,
    pub iteration: usize,
    pub distances: Vec<T>,
    pub trajectory: TrajectoryDocument<T>,
}

impl<T: Scalar> PicardCheckpoint<T> {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let c: PicardCheckpoint<T> = serde_json::from_str(s)?;
        if c.schema_version != 1 {
            return Err(Error::Config(format!("unsupported checkpoint schema {}", c.schema_version)));
        }
        Ok(c)
    }
}

/// Data, parameters and precomputed operators of one semilinear problem.
pub struct SemilinearProblem<T> {
    params: EvolutionParams<T>,
    config: SemilinearConfig<T>,
    modes: Arc<ModeSet<T>>,
    transform: Transform<T>,
    u0: SpectralField<T>,
    u1: SpectralField<T>,
    one_step: Vec<PropagatorMatrix<T>>,
    warnings: Vec<String>,
}

impl<T: Scalar> SemilinearProblem<T> {
    pub fn new(
        u0: SpectralField<T>,
        u1: SpectralField<T>,
        params: EvolutionParams<T>,
        config: SemilinearConfig<T>,
    ) -> Result<Self> {
        if !u0.modes().same_as(u1.modes()) {
            return Err(Error::IncompatibleFields("u0 and u1 live on different mode sets".into()));
        }
        let modes = u0.modes().clone();
        let warnings = config.validate(modes.group().topological_dimension())?;
        for w in &warnings {
            warn!("{w}");
        }
        let transform = Transform::with_oversample(modes.clone(), config.dealias_oversample)?;
        Ok(Self::assemble(u0, u1, params, config, transform, warnings))
    }

    /// Reuses an existing transform (and its grid) for new data.
    pub fn with_transform(
        u0: SpectralField<T>,
        u1: SpectralField<T>,
        params: EvolutionParams<T>,
        config: SemilinearConfig<T>,
        transform: Transform<T>,
    ) -> Result<Self> {
        if !u0.modes().same_as(transform.modes()) || !u1.modes().same_as(transform.modes()) {
            return Err(Error::IncompatibleFields("data and transform disagree".into()));
        }
        let warnings = config.validate(transform.modes().group().topological_dimension())?;
        Ok(Self::assemble(u0, u1, params, config, transform, warnings))
    }

    fn assemble(
        u0: SpectralField<T>,
        u1: SpectralField<T>,
        params: EvolutionParams<T>,
        config: SemilinearConfig<T>,
        transform: Transform<T>,
        warnings: Vec<String>,
    ) -> Self {
        let modes = transform.modes().clone();
        let dt = config.dt();
        let one_step = modes
            .modes()
            .iter()
            .map(|m| PropagatorMatrix::new(dt, &params, m.eigenvalue_sq))
            .collect();
        SemilinearProblem {
            params,
            config,
            modes,
            transform,
            u0,
            u1,
            one_step,
            warnings,
        }
    }

    pub fn params(&self) -> EvolutionParams<T> {
        self.params
    }

    pub fn config(&self) -> &SemilinearConfig<T> {
        &self.config
    }

    pub fn transform(&self) -> &Transform<T> {
        &self.transform
    }

    pub fn modes(&self) -> &Arc<ModeSet<T>> {
        &self.modes
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn data(&self) -> (&SpectralField<T>, &SpectralField<T>) {
        (&self.u0, &self.u1)
    }

    /// `||u0||_{H^1} + ||u1||_{L^2}`.
    pub fn data_norm(&self) -> T {
        self.u0.h1_norm() + self.u1.plancherel_l2_norm()
    }

    /// Same problem with data scaled by `s`.
    pub fn rescaled(&self, s: T) -> Self {
        SemilinearProblem {
            params: self.params,
            config: self.config,
            modes: self.modes.clone(),
            transform: self.transform.clone(),
            u0: self.u0.scaled(s),
            u1: self.u1.scaled(s),
            one_step: self.one_step.clone(),
            warnings: self.warnings.clone(),
        }
    }

    pub fn with_config(&self, config: SemilinearConfig<T>) -> Result<Self> {
        if config.dealias_oversample == self.config.dealias_oversample {
            Self::with_transform(self.u0.clone(), self.u1.clone(), self.params, config, self.transform.clone())
        } else {
            Self::new(self.u0.clone(), self.u1.clone(), self.params, config)
        }
    }

    /// `(u^lin(t), u^lin_t(t))` coefficients at `t`.
    fn linear_coeffs(&self, t: T) -> (Vec<Complex<T>>, Vec<Complex<T>>) {
        let mut u = Vec::with_capacity(self.modes.len());
        let mut ut = Vec::with_capacity(self.modes.len());
        for (i, m) in self.modes.modes().iter().enumerate() {
            let (a, b) = propagate_mode(self.u0.coeffs()[i], self.u1.coeffs()[i], t, &self.params, m.eigenvalue_sq);
            u.push(a);
            ut.push(b);
        }
        (u, ut)
    }

    fn state(&self, u: Vec<Complex<T>>, ut: Vec<Complex<T>>, t: T) -> Result<EvolutionState<T>> {
        EvolutionState::new(
            SpectralField::from_coeffs_symmetrized(self.modes.clone(), u)?,
            SpectralField::from_coeffs_symmetrized(self.modes.clone(), ut)?,
            t,
            self.params,
        )
    }

    /// Solution of the homogeneous linear problem on the snapshot grid.
    pub fn linear_trajectory(&self) -> Result<Trajectory<T>> {
        let states = (0..=self.config.steps)
            .map(|n| {
                let t = self.config.time(n);
                let (u, ut) = self.linear_coeffs(t);
                self.state(u, ut, t)
            })
            .collect::<Result<Vec<_>>>()?;
        Trajectory::new(states, self.config.dt())
    }

    /// The zero trajectory on the snapshot grid.
    pub fn zero_trajectory(&self) -> Result<Trajectory<T>> {
        let zero = vec![Complex::new(T::zero(), T::zero()); self.modes.len()];
        let states = (0..=self.config.steps)
            .map(|n| self.state(zero.clone(), zero.clone(), self.config.time(n)))
            .collect::<Result<Vec<_>>>()?;
        Trajectory::new(states, self.config.dt())
    }

    /// `N u` with the power nonlinearity.
    pub fn apply_n(&self, traj: &Trajectory<T>) -> Result<Trajectory<T>> {
        let p = self.config.p;
        self.apply_n_with_source(traj, |u| nonlinearity(u, p, &self.transform))
    }

    /// `N u` with an arbitrary source map `u(s) -> F(s)`.
    pub fn apply_n_with_source<F>(&self, traj: &Trajectory<T>, mut source: F) -> Result<Trajectory<T>>
    where
        F: FnMut(&SpectralField<T>) -> Result<SpectralField<T>>,
    {
        let steps = self.config.steps;
        if traj.len() != steps + 1 {
            return Err(invalid(
                "trajectory",
                format!("expected {} snapshots on the dt grid, got {}", steps + 1, traj.len()),
            ));
        }
        let dt = self.config.dt();
        let half_dt = dt / T::lit(2.0);
        let zero = Complex::new(T::zero(), T::zero());
        let mut acc_u = vec![zero; self.modes.len()];
        let mut acc_v = vec![zero; self.modes.len()];
        let mut states = Vec::with_capacity(steps + 1);
        for n in 0..=steps {
            let t = self.config.time(n);
            let f = source(&traj.states[n].u).map_err(|e| match e {
                Error::BlowUp { .. } => Error::BlowUp { time: t.as_f64() },
                other => other,
            })?;
            if !f.is_finite() {
                return Err(Error::BlowUp { time: t.as_f64() });
            }
            let fc = f.coeffs();
            let weight = if n == 0 { half_dt } else { dt };
            for i in 0..self.modes.len() {
                if n > 0 {
                    let (a, b) = self.one_step[i].apply(acc_u[i], acc_v[i]);
                    acc_u[i] = a;
                    acc_v[i] = b;
                }
                acc_v[i] += fc[i] * weight;
            }
            let (mut u, mut ut) = self.linear_coeffs(t);
            for i in 0..self.modes.len() {
                u[i] += acc_u[i];
                // remove the half-weight endpoint term; E1(0) = 0 leaves u untouched
                ut[i] += acc_v[i] - fc[i] * half_dt;
            }
            if u.iter().chain(&ut).any(|c| !(c.re.is_finite() && c.im.is_finite())) {
                return Err(Error::BlowUp { time: t.as_f64() });
            }
            states.push(self.state(u, ut, t)?);
        }
        Trajectory::new(states, dt)
    }

    /// Picard iteration from the linear solution.
    pub fn picard_iterate(&self) -> Result<PicardReport<T>> {
        let start = self.linear_trajectory()?;
        self.picard_from(start, 0, Vec::new())
    }

    /// Continues a Picard run from a checkpoint.
    pub fn picard_resume(&self, checkpoint: &PicardCheckpoint<T>) -> Result<PicardReport<T>> {
        let traj = Trajectory::from_document(&checkpoint.trajectory, self.modes.clone())?;
        self.picard_from(traj, checkpoint.iteration, checkpoint.distances.clone())
    }

    fn picard_from(&self, start: Trajectory<T>, done: usize, distances: Vec<T>) -> Result<PicardReport<T>> {
        let mut current = start;
        let mut distances = distances;
        let mut factors: Vec<T> = distances.windows(2).map(|w| w[1] / w[0]).collect();
        let mut iterations = done;
        let mut converged = distances.last().is_some_and(|&d| d < self.config.picard_tol);
        let mut failure = None;
        let mut blowup_time = None;
        while !converged && iterations < self.config.picard_max_iter {
            let next = match self.apply_n(&current) {
                Ok(n) => n,
                Err(Error::BlowUp { time }) => {
                    failure = Some(format!("blow-up at t = {time}"));
                    blowup_time = Some(time);
                    break;
                }
                Err(e) => return Err(e),
            };
            iterations += 1;
            let d = xt_distance(&next, &current)?;
            if let Some(&prev) = distances.last() {
                factors.push(if prev > T::zero() { d / prev } else { T::zero() });
            }
            distances.push(d);
            debug!("picard iteration {iterations}: distance {:e}", d.as_f64());
            current = next;
            if !d.is_finite() {
                failure = Some(format!("non-finite X(T) distance at iteration {iterations}"));
                blowup_time = Some(f64::NAN);
                break;
            }
            if d < self.config.picard_tol {
                converged = true;
                break;
            }
            if factors.len() >= 3 && factors[factors.len() - 3..].iter().all(|&r| r >= T::one()) {
                failure = Some(format!("contraction factor >= 1 for 3 consecutive iterations (iteration {iterations})"));
                break;
            }
        }
        if !converged && failure.is_none() {
            failure = Some(format!("no convergence within {} iterations", self.config.picard_max_iter));
        }
        Ok(PicardReport {
            converged,
            iterations,
            distances,
            contraction_factors: factors,
            failure,
            blowup_time,
            trajectory: current,
        })
    }

    /// Discrete convolution `sum_j w_j E1(t_n - s_j) F_j` evaluated term by
    /// term (`O(steps^2)`); the reference for the accumulated form used by
    /// [`apply_n`](Self::apply_n).
    pub fn duhamel_direct(&self, sources: &[SpectralField<T>]) -> Result<Vec<(SpectralField<T>, SpectralField<T>)>> {
        let dt = self.config.dt();
        let half = T::lit(0.5);
        let mut out = Vec::with_capacity(sources.len());
        for n in 0..sources.len() {
            let mut u = vec![Complex::new(T::zero(), T::zero()); self.modes.len()];
            let mut ut = u.clone();
            for (j, f) in sources.iter().enumerate().take(n + 1) {
                let w = if j == 0 || j == n { dt * half } else { dt };
                let lag = self.config.time(n) - self.config.time(j);
                for (i, m) in self.modes.modes().iter().enumerate() {
                    let s = PropagatorMatrix::new(lag, &self.params, m.eigenvalue_sq);
                    u[i] += f.coeffs()[i] * (s.uv * w);
                    ut[i] += f.coeffs()[i] * (s.vv * w);
                }
            }
            if n == 0 {
                u.iter_mut().chain(ut.iter_mut()).for_each(|c| *c = Complex::new(T::zero(), T::zero()));
            }
            out.push((
                SpectralField::from_coeffs_symmetrized(self.modes.clone(), u)?,
                SpectralField::from_coeffs_symmetrized(self.modes.clone(), ut)?,
            ));
        }
        Ok(out)
    }
}

/// Empirical contraction constant
/// `||Nu - Nv||_X / (||u - v||_X (||u||_X^{p-1} + ||v||_X^{p-1}))`.
pub fn contraction_ratio<T: Scalar>(problem: &SemilinearProblem<T>, u: &Trajectory<T>, v: &Trajectory<T>) -> Result<T> {
    let nu = problem.apply_n(u)?;
    let nv = problem.apply_n(v)?;
    let p1 = problem.config().p - T::one();
    let denom = xt_distance(u, v)? * (xt_norm(u).powf(p1) + xt_norm(v).powf(p1));
    Ok(xt_distance(&nu, &nv)? / denom)
}

/// Per-norm constants `sup_t ||.||(t) / (d(t) ||(u0,u1)||)` of a trajectory
/// and the exponential rate fitted to `||u|| + ||(-L)^{1/2}u|| + ||u_t||`
/// over `window`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayInheritance {
    pub constants: [f64; 3],
    pub constant_c: f64,
    pub fitted_rate: f64,
    pub regime_rate: f64,
}

pub fn decay_inheritance<T: Scalar>(traj: &Trajectory<T>, data_norm: T, window: (f64, f64)) -> DecayInheritance {
    let params = traj.params();
    let data = data_norm.as_f64();
    let mut constants = [0.0f64; 3];
    let mut ts = Vec::new();
    let mut logs = Vec::new();
    for s in traj.samples() {
        if s.d_envelope > 0.0 && data > 0.0 {
            for (c, v) in constants.iter_mut().zip([s.l2_u, s.h1dot_u, s.l2_ut]) {
                *c = c.max(v / (s.d_envelope * data));
            }
        }
        if s.t >= window.0 && s.t <= window.1 {
            ts.push(s.t);
            logs.push((s.l2_u + s.h1dot_u + s.l2_ut).ln());
        }
    }
    DecayInheritance {
        constants,
        constant_c: constants.iter().cloned().fold(0.0, f64::max),
        fitted_rate: linear_fit(&ts, &logs).map(|f| f.0).unwrap_or(f64::NAN),
        regime_rate: params.decay_rate().as_f64(),
    }
}

/// Search parameters for [`estimate_epsilon0`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSearch {
    /// Smallest data norm tried.
    pub start: f64,
    /// Factor between successive amplitudes while bracketing.
    pub growth_factor: f64,
    pub max_expansions: usize,
    pub bisection_steps: usize,
}

impl Default for EpsilonSearch {
    fn default() -> Self {
        EpsilonSearch {
            start: 1e-4,
            growth_factor: 4.0,
            max_expansions: 12,
            bisection_steps: 6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsilonProbe {
    pub amplitude: f64,
    pub converged: bool,
    pub iterations: usize,
    pub max_contraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsilonReport {
    /// Largest tested data norm for which Picard converged.
    pub epsilon0: f64,
    /// Smallest tested data norm for which it did not, if any.
    pub first_failure: Option<f64>,
    pub probes: Vec<EpsilonProbe>,
}

/// Brackets and bisects (geometrically) the data amplitude between a
/// converging and a non-converging Picard run.
pub fn estimate_epsilon0<T: Scalar>(base: &SemilinearProblem<T>, search: EpsilonSearch) -> Result<EpsilonReport> {
    let norm = base.data_norm();
    if norm == T::zero() {
        return Err(Error::ZeroData);
    }
    if !(search.growth_factor > 1.0) || !(search.start > 0.0) {
        return Err(invalid("growth_factor", "need start > 0 and growth factor > 1"));
    }
    let mut probes = Vec::new();
    let mut probe = |amp: f64| -> Result<bool> {
        let scaled = base.rescaled(T::lit(amp) / norm);
        let r = scaled.picard_iterate()?;
        probes.push(EpsilonProbe {
            amplitude: amp,
            converged: r.converged,
            iterations: r.iterations,
            max_contraction: r.contraction_factors.iter().map(|x| x.as_f64()).fold(0.0, f64::max),
        });
        Ok(r.converged)
    };
    let mut lo = search.start;
    if !probe(lo)? {
        return Err(Error::Config(format!(
            "Picard iteration diverges already at the smallest amplitude {lo:e}"
        )));
    }
    let mut hi = None;
    for _ in 0..search.max_expansions {
        let next = lo * search.growth_factor;
        if probe(next)? {
            lo = next;
        } else {
            hi = Some(next);
            break;
        }
    }
    if let Some(mut h) = hi {
        for _ in 0..search.bisection_steps {
            let mid = (lo * h).sqrt();
            if probe(mid)? {
                lo = mid;
            } else {
                h = mid;
            }
        }
        hi = Some(h);
    }
    Ok(EpsilonReport {
        epsilon0: lo,
        first_failure: hi,
        probes,
    })
}

// Eight-point Gauss-Legendre rule on [-1, 1].
const GL8_NODES: [f64; 8] = [
    -0.960_289_856_497_536_2,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329_0,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329_0,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_2,
];
const GL8_WEIGHTS: [f64; 8] = [
    0.101_228_536_290_376_3,
    0.222_381_034_453_374_5,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362_0,
    0.362_683_783_378_362_0,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

/// `d(t)^{-1} int_0^t d(t-s) d(s)^p ds` by composite 8-point Gauss-Legendre
/// with `panels_per_unit` panels per unit time. Returns 0 at `t = 0`.
pub fn weighted_integral<T: Scalar>(t: T, params: &EvolutionParams<T>, p: T, panels_per_unit: usize) -> T {
    if t <= T::zero() {
        return T::zero();
    }
    let panels = ((t.as_f64() * panels_per_unit as f64).ceil() as usize).max(1);
    let h = t / T::from_usize_lossy(panels);
    let half = h / T::lit(2.0);
    let mut sum = T::zero();
    for k in 0..panels {
        let mid = h * T::from_usize_lossy(k) + half;
        for (x, w) in GL8_NODES.iter().zip(GL8_WEIGHTS) {
            let s = mid + half * T::lit(*x);
            sum += T::lit(w) * half * decay_function(t - s, params) * decay_function(s, params).powf(p);
        }
    }
    sum / decay_function(t, params)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedIntegralReport {
    pub regime: Regime,
    pub p: f64,
    pub t_max: f64,
    pub sup: f64,
    pub argmax: f64,
    /// Same sup with twice as many quadrature panels.
    pub sup_refined: f64,
    pub relative_change: f64,
    /// Sup over the first half of the interval, for judging saturation.
    pub sup_first_half: f64,
}

/// Sup of [`weighted_integral`] over an evaluation grid of spacing `eval_dt`
/// on `[0, t_max]`, at two quadrature resolutions.
pub fn weighted_integral_sup<T: Scalar>(
    params: &EvolutionParams<T>,
    p: T,
    t_max: T,
    eval_dt: T,
    panels_per_unit: usize,
) -> WeightedIntegralReport {
    let n = (t_max / eval_dt).round().to_usize().unwrap_or(0).max(1);
    let scan = |panels: usize| {
        let mut best = (T::zero(), T::zero());
        let mut half_sup = T::zero();
        for k in 0..=n {
            let t = t_max * T::from_usize_lossy(k) / T::from_usize_lossy(n);
            let v = weighted_integral(t, params, p, panels);
            if v > best.0 {
                best = (v, t);
            }
            if k * 2 <= n {
                half_sup = half_sup.max(v);
            }
        }
        (best, half_sup)
    };
    let ((sup, argmax), half_sup) = scan(panels_per_unit);
    let ((sup_refined, _), _) = scan(panels_per_unit * 2);
    WeightedIntegralReport {
        regime: params.regime(),
        p: p.as_f64(),
        t_max: t_max.as_f64(),
        sup: sup.as_f64(),
        argmax: argmax.as_f64(),
        sup_refined: sup_refined.as_f64(),
        relative_change: ((sup_refined - sup) / sup_refined).abs().as_f64(),
        sup_first_half: half_sup.as_f64(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groups::{GroupKind, GroupSpec, ModeIndex};

    fn small_problem(kind: GroupKind, k: u32, amp: f64, p: f64, horizon: f64, steps: usize) -> SemilinearProblem<f64> {
        let modes = Arc::new(ModeSet::new(GroupSpec::new(kind), k));
        let coeffs: Vec<Complex<f64>> = modes
            .modes()
            .iter()
            .enumerate()
            .map(|(i, m)| Complex::new(((i * 37 % 11) as f64 - 5.0) / 5.0, ((i * 53 % 7) as f64 - 3.0) / 3.0) / (1.0 + m.eigenvalue_sq))
            .collect();
        let u0 = SpectralField::from_coeffs_symmetrized(modes.clone(), coeffs.clone()).unwrap();
        let u1 = SpectralField::from_coeffs_symmetrized(modes.clone(), coeffs.iter().map(|c| c * 0.5).collect()).unwrap();
        let norm = u0.h1_norm() + u1.plancherel_l2_norm();
        let mut cfg = SemilinearConfig::new(p, horizon);
        cfg.steps = steps;
        SemilinearProblem::new(u0.scaled(amp / norm), u1.scaled(amp / norm), EvolutionParams::new(2.0, 2.0).unwrap(), cfg).unwrap()
    }

    #[test]
    fn nonlinearity_examples() {
        let modes = Arc::new(ModeSet::<f64>::new(GroupSpec::new(GroupKind::TorusD1), 3));
        let t = Transform::with_oversample(modes.clone(), 2).unwrap();
        let zero = SpectralField::zeros(modes.clone());
        assert!(nonlinearity(&zero, 2.0, &t).unwrap().is_zero());

        let mut c = SpectralField::zeros(modes.clone());
        c.coeffs_mut()[0] = Complex::new(-1.5, 0.0);
        let sq = nonlinearity(&c, 2.0, &t).unwrap();
        assert!((sq.coeffs()[0].re - 2.25).abs() < 1e-14);
        assert!(sq.coeffs()[1..].iter().all(|z| z.norm() < 1e-14));

        let cos = SpectralField::single_mode(modes.clone(), &ModeIndex::Torus(vec![1]), Complex::new(0.5, 0.0)).unwrap();
        let sq = nonlinearity(&cos, 2.0, &t).unwrap();
        let at = |k: i32| sq.coeff(&ModeIndex::Torus(vec![k])).unwrap();
        assert!((at(0).re - 0.5).abs() < 1e-15);
        assert!((at(2).re - 0.25).abs() < 1e-15 && (at(-2).re - 0.25).abs() < 1e-15);
        assert!(at(1).norm() < 1e-15 && at(3).norm() < 1e-15);
    }

    #[test]
    fn nonlinearity_cos_square_dense_oracle() {
        // Dense midpoint quadrature of cos^2(x) e^{-ikx} / (2 pi).
        let n = 4096;
        let dense = |k: f64| -> f64 {
            (0..n)
                .map(|j| {
                    let x = 2.0 * std::f64::consts::PI * (j as f64 + 0.5) / n as f64;
                    x.cos().powi(2) * (k * x).cos() / n as f64
                })
                .sum()
        };
        assert!((dense(0.0) - 0.5).abs() < 1e-14);
        assert!((dense(2.0) - 0.25).abs() < 1e-14);
    }

    #[test]
    fn abs_pow_handles_zero_and_tiny() {
        assert_eq!(abs_pow(0.0, 1.5), 0.0);
        assert_eq!(abs_pow(1e-301, 1.5), 0.0);
        assert!((abs_pow(-4.0f64, 1.5) - 8.0).abs() < 1e-14);
    }

    #[test]
    fn zero_iterate_gives_linear_solution() {
        let pb = small_problem(GroupKind::TorusD1, 3, 0.1, 2.0, 2.0, 32);
        let zero = pb.zero_trajectory().unwrap();
        let n = pb.apply_n(&zero).unwrap();
        let lin = pb.linear_trajectory().unwrap();
        assert_eq!(xt_distance(&n, &lin).unwrap(), 0.0);
    }

    #[test]
    fn zero_data_converges_in_one_iteration() {
        let pb = small_problem(GroupKind::TorusD1, 3, 0.1, 2.0, 2.0, 16).rescaled(0.0);
        let r = pb.picard_iterate().unwrap();
        assert!(r.converged);
        assert_eq!(r.iterations, 1);
        assert_eq!(xt_norm(&r.trajectory), 0.0);
    }

    #[test]
    fn accumulated_duhamel_matches_direct_sum() {
        let pb = small_problem(GroupKind::TorusD2, 2, 0.5, 2.0, 3.0, 24);
        let lin = pb.linear_trajectory().unwrap();
        let sources: Vec<_> = lin
            .states
            .iter()
            .map(|s| nonlinearity(&s.u, 2.0, pb.transform()).unwrap())
            .collect();
        let direct = pb.duhamel_direct(&sources).unwrap();
        let mut k = 0;
        let n = pb
            .apply_n_with_source(&lin, |_| {
                k += 1;
                Ok(sources[k - 1].clone())
            })
            .unwrap();
        for (state, (du, dut)) in n.states.iter().zip(&direct) {
            let t = state.time;
            let (lu, lut) = pb.linear_coeffs(t);
            for i in 0..pb.modes().len() {
                let a = state.u.coeffs()[i] - lu[i];
                let b = state.ut.coeffs()[i] - lut[i];
                assert!((a - du.coeffs()[i]).norm() < 1e-14, "t={t}");
                assert!((b - dut.coeffs()[i]).norm() < 1e-14, "t={t}");
            }
        }
    }

    #[test]
    fn picard_checkpoint_resume_matches_uninterrupted() {
        let pb = small_problem(GroupKind::TorusD1, 3, 0.2, 2.0, 4.0, 64);
        let full = pb.picard_iterate().unwrap();
        assert!(full.converged);

        let mut cfg = *pb.config();
        cfg.picard_max_iter = 2;
        let partial = pb.with_config(cfg).unwrap().picard_iterate().unwrap();
        assert!(!partial.converged);
        let json = partial.checkpoint().to_json().unwrap();
        let cp = PicardCheckpoint::<f64>::from_json(&json).unwrap();
        let resumed = pb.picard_resume(&cp).unwrap();
        assert!(resumed.converged);
        assert_eq!(resumed.iterations, full.iterations);
        assert_eq!(resumed.distances, full.distances);
        assert_eq!(xt_distance(&resumed.trajectory, &full.trajectory).unwrap(), 0.0);
    }

    #[test]
    fn large_data_fails_to_converge() {
        let pb = small_problem(GroupKind::TorusD3, 1, 200.0, 2.0, 5.0, 32);
        let r = pb.picard_iterate().unwrap();
        assert!(!r.converged);
        assert!(r.failure.is_some());
    }

    #[test]
    fn config_validation() {
        let mut c = SemilinearConfig::new(2.0, 1.0);
        assert!(c.validate(3).unwrap().is_empty());
        c.p = 4.0;
        assert_eq!(c.validate(3).unwrap().len(), 1);
        c.p = 1.0;
        assert!(c.validate(3).is_err());
        let c = SemilinearConfig::new(2.0, -1.0);
        assert!(c.validate(3).is_err());
    }

    #[test]
    fn epsilon_zero_data_is_an_error() {
        let pb = small_problem(GroupKind::TorusD1, 1, 1.0, 2.0, 1.0, 8).rescaled(0.0);
        assert!(matches!(estimate_epsilon0(&pb, EpsilonSearch::default()), Err(Error::ZeroData)));
    }

    #[test]
    fn weighted_integral_underdamped_closed_form() {
        // d = e^{-bt/2}: the integral is (1 - e^{-(p-1) b t / 2}) / ((p-1) b / 2).
        let q = EvolutionParams::new(1.0, 1.0).unwrap();
        for p in [1.5f64, 2.0, 3.0] {
            for t in [0.5f64, 3.0, 20.0] {
                let k = (p - 1.0) * 0.5;
                let exact = (1.0 - (-k * t).exp()) / k;
                assert!((weighted_integral(t, &q, p, 4) - exact).abs() < 1e-12 * exact);
            }
        }
    }
}
