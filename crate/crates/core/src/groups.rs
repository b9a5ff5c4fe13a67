//! Concrete compact groups: mode enumeration, Laplace–Beltrami eigenvalues,
//! quadrature grids and basis evaluation.
//!
//! Supported groups are the flat tori `T^1`, `T^2`, `T^3` (modes are integer
//! frequency vectors, eigenvalue `|k|^2`, dimension 1) and `SU(2)` restricted
//! to central functions (modes are levels `k >= 0`, eigenvalue `k(k+2)`,
//! dimension `k+1`, i.e. the round unit 3-sphere metric). Rescaling the metric
//! rescales every eigenvalue by the same factor.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::scalar::Scalar;

/// Which concrete group a field lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GroupKind {
    #[serde(rename = "torus1")]
    TorusD1,
    #[serde(rename = "torus2")]
    TorusD2,
    #[serde(rename = "torus3")]
    TorusD3,
    /// `SU(2)`, central (conjugation-invariant) functions only.
    #[serde(rename = "su2-central")]
    SU2Central,
}

impl GroupKind {
    pub const ALL: [GroupKind; 4] = [
        GroupKind::TorusD1,
        GroupKind::TorusD2,
        GroupKind::TorusD3,
        GroupKind::SU2Central,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GroupKind::TorusD1 => "torus1",
            GroupKind::TorusD2 => "torus2",
            GroupKind::TorusD3 => "torus3",
            GroupKind::SU2Central => "su2-central",
        }
    }
}

impl fmt::Display for GroupKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A group together with its topological dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "GroupKind", into = "GroupKind")]
pub struct GroupSpec {
    kind: GroupKind,
}

impl From<GroupKind> for GroupSpec {
    fn from(kind: GroupKind) -> Self {
        GroupSpec { kind }
    }
}

impl From<GroupSpec> for GroupKind {
    fn from(g: GroupSpec) -> Self {
        g.kind
    }
}

impl GroupSpec {
    pub fn new(kind: GroupKind) -> Self {
        GroupSpec { kind }
    }

    pub fn kind(&self) -> GroupKind {
        self.kind
    }

    /// Topological dimension `n` of the group manifold.
    pub fn topological_dimension(&self) -> usize {
        match self.kind {
            GroupKind::TorusD1 => 1,
            GroupKind::TorusD2 => 2,
            GroupKind::TorusD3 | GroupKind::SU2Central => 3,
        }
    }

    /// True when fields on this group are restricted to class functions.
    pub fn central_only(&self) -> bool {
        matches!(self.kind, GroupKind::SU2Central)
    }

    pub fn is_torus(&self) -> bool {
        !self.central_only()
    }

    /// Number of coordinates of a grid point: the torus dimension, or the
    /// single class angle for `SU(2)`.
    pub fn grid_rank(&self) -> usize {
        match self.kind {
            GroupKind::TorusD1 => 1,
            GroupKind::TorusD2 => 2,
            GroupKind::TorusD3 => 3,
            GroupKind::SU2Central => 1,
        }
    }
}

impl fmt::Display for GroupSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.kind)
    }
}

/// Label of an irreducible representation.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModeIndex {
    /// Frequency vector `k` of a torus character `e^{i k.x}`.
    Torus(Vec<i32>),
    /// Level `k` of the `(k+1)`-dimensional irreducible representation of `SU(2)`.
    Level(u32),
}

impl ModeIndex {
    /// Flat integer form used by the JSON and CSV encodings.
    pub fn components(&self) -> Vec<i64> {
        match self {
            ModeIndex::Torus(k) => k.iter().map(|&v| v as i64).collect(),
            ModeIndex::Level(l) => vec![*l as i64],
        }
    }

    pub fn from_components(group: GroupSpec, comps: &[i64]) -> Option<ModeIndex> {
        if group.central_only() {
            match comps {
                [l] if *l >= 0 => Some(ModeIndex::Level(*l as u32)),
                _ => None,
            }
        } else if comps.len() == group.topological_dimension() {
            Some(ModeIndex::Torus(comps.iter().map(|&v| v as i32).collect()))
        } else {
            None
        }
    }

    fn eigenvalue_int(&self) -> u64 {
        match self {
            ModeIndex::Torus(k) => k.iter().map(|&v| (v as i64 * v as i64) as u64).sum(),
            ModeIndex::Level(l) => *l as u64 * (*l as u64 + 2),
        }
    }
}

impl fmt::Display for ModeIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModeIndex::Torus(k) => {
                write!(f, "(")?;
                for (i, v) in k.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{v}")?;
                }
                write!(f, ")")
            }
            ModeIndex::Level(l) => write!(f, "{l}"),
        }
    }
}

/// One irreducible representation: index, eigenvalue `lambda^2` of `-L`, and
/// representation dimension `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mode<T> {
    pub index: ModeIndex,
    pub eigenvalue_sq: T,
    pub rep_dimension: u32,
}

/// All modes with max-norm frequency (or level) at most `truncation`, sorted
/// by eigenvalue and then lexicographically by index.
pub fn enumerate_modes<T: Scalar>(group: GroupSpec, truncation: u32) -> Vec<Mode<T>> {
    let k = truncation as i32;
    let mut indices: Vec<ModeIndex> = match group.kind() {
        GroupKind::TorusD1 => (-k..=k).map(|a| ModeIndex::Torus(vec![a])).collect(),
        GroupKind::TorusD2 => (-k..=k)
            .flat_map(|a| (-k..=k).map(move |b| ModeIndex::Torus(vec![a, b])))
            .collect(),
        GroupKind::TorusD3 => (-k..=k)
            .flat_map(|a| {
                (-k..=k).flat_map(move |b| (-k..=k).map(move |c| ModeIndex::Torus(vec![a, b, c])))
            })
            .collect(),
        GroupKind::SU2Central => (0..=truncation).map(ModeIndex::Level).collect(),
    };
    indices.sort_by(|a, b| a.eigenvalue_int().cmp(&b.eigenvalue_int()).then_with(|| a.cmp(b)));
    indices
        .into_iter()
        .map(|index| {
            let eigenvalue_sq = T::from_u64(index.eigenvalue_int()).expect("eigenvalue fits");
            let rep_dimension = match &index {
                ModeIndex::Torus(_) => 1,
                ModeIndex::Level(l) => l + 1,
            };
            Mode {
                index,
                eigenvalue_sq,
                rep_dimension,
            }
        })
        .collect()
}

/// An enumerated mode list with lookup tables, shared by every field built
/// on the same `(group, truncation)`.
#[derive(Debug, Clone)]
pub struct ModeSet<T> {
    group: GroupSpec,
    truncation: u32,
    modes: Vec<Mode<T>>,
    lookup: HashMap<ModeIndex, usize>,
    conjugate: Vec<usize>,
    tensor_offset: Vec<usize>,
}

impl<T: Scalar> ModeSet<T> {
    pub fn new(group: GroupSpec, truncation: u32) -> Self {
        let modes = enumerate_modes::<T>(group, truncation);
        let lookup: HashMap<ModeIndex, usize> = modes
            .iter()
            .enumerate()
            .map(|(i, m)| (m.index.clone(), i))
            .collect();
        let side = 2 * truncation as usize + 1;
        let conjugate = modes
            .iter()
            .map(|m| match &m.index {
                ModeIndex::Torus(k) => {
                    let neg = ModeIndex::Torus(k.iter().map(|v| -v).collect());
                    lookup[&neg]
                }
                ModeIndex::Level(_) => lookup[&m.index],
            })
            .collect();
        let tensor_offset = modes
            .iter()
            .map(|m| match &m.index {
                ModeIndex::Torus(k) => k
                    .iter()
                    .fold(0usize, |acc, &v| acc * side + (v + truncation as i32) as usize),
                ModeIndex::Level(l) => *l as usize,
            })
            .collect();
        ModeSet {
            group,
            truncation,
            modes,
            lookup,
            conjugate,
            tensor_offset,
        }
    }

    pub fn group(&self) -> GroupSpec {
        self.group
    }

    pub fn truncation(&self) -> u32 {
        self.truncation
    }

    pub fn modes(&self) -> &[Mode<T>] {
        &self.modes
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn position(&self, index: &ModeIndex) -> Option<usize> {
        self.lookup.get(index).copied()
    }

    /// Position of the mode carrying the complex-conjugate representation
    /// (`-k` on tori, the mode itself on `SU(2)`).
    pub fn conjugate_position(&self, i: usize) -> usize {
        self.conjugate[i]
    }

    /// Position of the zero mode; always 0 because of the sort order.
    pub fn zero_mode(&self) -> usize {
        0
    }

    /// Row-major offset of mode `i` in a `(2K+1)^D` frequency tensor (tori),
    /// or its level (`SU(2)`).
    pub(crate) fn tensor_offset(&self, i: usize) -> usize {
        self.tensor_offset[i]
    }

    pub fn same_as(&self, other: &ModeSet<T>) -> bool {
        self.group == other.group && self.truncation == other.truncation
    }

    /// Writes the mode table as CSV with columns `index, eigenvalue_sq, rep_dimension`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["index", "eigenvalue_sq", "rep_dimension"])?;
        for m in &self.modes {
            w.write_record([
                m.index.to_string(),
                format!("{:.16e}", m.eigenvalue_sq.as_f64()),
                m.rep_dimension.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Oversampling factor used for a power nonlinearity `|u|^p`.
///
/// `p <= 2` gets 2 (exact for `p = 2`), `p` in `(2, 3]` gets 3, larger `p`
/// gets `ceil((p+1)/2)`. Non-integer `p` cannot be dealiased exactly; the
/// factor only bounds the aliased energy.
pub fn dealias_factor(p: f64) -> u32 {
    if p <= 2.0 {
        2
    } else {
        (((p + 1.0) / 2.0).ceil() as u32).max(3)
    }
}

/// Oversampling used by [`quadrature_grid`] when none is requested.
pub const DEFAULT_OVERSAMPLE: u32 = 2;

/// Spatial sample locations with normalized Haar weights.
///
/// Torus grids are uniform tensor grids on `[0, 2pi)^D`, stored row-major with
/// the last coordinate fastest. The `SU(2)` grid is a midpoint rule in the
/// class angle `theta in (0, pi)` with weights proportional to `sin^2 theta`.
#[derive(Debug, Clone)]
pub struct QuadratureGrid<T> {
    group: GroupSpec,
    truncation: u32,
    oversample: u32,
    axis_nodes: Vec<T>,
    shape: Vec<usize>,
    coords: Vec<T>,
    weights: Vec<T>,
}

/// Grid for `(group, truncation)` with the default oversampling.
pub fn quadrature_grid<T: Scalar>(group: GroupSpec, truncation: u32) -> QuadratureGrid<T> {
    QuadratureGrid::new(group, truncation, DEFAULT_OVERSAMPLE)
}

impl<T: Scalar> QuadratureGrid<T> {
    /// Builds a grid with `oversample`-fold linear oversampling.
    ///
    /// Tori use `2 * oversample * K + 2` points per axis, which integrates
    /// `e^{i m x}` exactly for `|m| < 2 * oversample * K + 2`. `SU(2)` uses
    /// `oversample * (K + 1) + 1` midpoints, which integrates `cos(m theta)`
    /// exactly for `m < 2N`.
    pub fn new(group: GroupSpec, truncation: u32, oversample: u32) -> Self {
        let oversample = oversample.max(1);
        let k = truncation as usize;
        let m = oversample as usize;
        match group.kind() {
            GroupKind::SU2Central => {
                let n = m * (k + 1) + 1;
                let nf = T::from_usize_lossy(n);
                let half = T::lit(0.5);
                let two = T::lit(2.0);
                let axis_nodes: Vec<T> = (0..n)
                    .map(|j| (T::from_usize_lossy(j) + half) * T::PI() / nf)
                    .collect();
                let weights = axis_nodes
                    .iter()
                    .map(|&th| {
                        let s = th.sin();
                        two * s * s / nf
                    })
                    .collect();
                QuadratureGrid {
                    group,
                    truncation,
                    oversample,
                    coords: axis_nodes.clone(),
                    axis_nodes,
                    shape: vec![n],
                    weights,
                }
            }
            _ => {
                let d = group.topological_dimension();
                let n = 2 * m * k + 2;
                let nf = T::from_usize_lossy(n);
                let axis_nodes: Vec<T> = (0..n)
                    .map(|j| T::TAU() * T::from_usize_lossy(j) / nf)
                    .collect();
                let total = n.pow(d as u32);
                let w = T::one() / T::from_usize_lossy(total);
                let mut coords = Vec::with_capacity(total * d);
                for flat in 0..total {
                    let mut rem = flat;
                    let mut idx = vec![0usize; d];
                    for a in (0..d).rev() {
                        idx[a] = rem % n;
                        rem /= n;
                    }
                    coords.extend(idx.iter().map(|&i| axis_nodes[i]));
                }
                QuadratureGrid {
                    group,
                    truncation,
                    oversample,
                    axis_nodes,
                    shape: vec![n; d],
                    coords,
                    weights: vec![w; total],
                }
            }
        }
    }

    pub fn group(&self) -> GroupSpec {
        self.group
    }

    pub fn truncation(&self) -> u32 {
        self.truncation
    }

    pub fn oversample(&self) -> u32 {
        self.oversample
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    /// Coordinates of sample `i` (torus angles, or `[theta]`).
    pub fn point(&self, i: usize) -> &[T] {
        let r = self.group.grid_rank();
        &self.coords[i * r..(i + 1) * r]
    }

    pub fn points(&self) -> impl Iterator<Item = &[T]> {
        self.coords.chunks(self.group.grid_rank())
    }

    pub(crate) fn axis_nodes(&self) -> &[T] {
        &self.axis_nodes
    }

    pub(crate) fn shape(&self) -> &[usize] {
        &self.shape
    }

    /// Quadrature of sampled values against the normalized Haar measure.
    pub fn integrate(&self, values: &[T]) -> T {
        self.weights
            .iter()
            .zip(values)
            .map(|(&w, &v)| w * v)
            .sum()
    }
}

/// `SU(2)` character of level `k` at class angle `theta`:
/// `sin((k+1) theta) / sin theta`, with the limits `k+1` at `theta = 0` and
/// `(-1)^k (k+1)` at `theta = pi`.
pub fn su2_character<T: Scalar>(level: u32, theta: T) -> T {
    let s = theta.sin();
    let kp1 = T::from_u32(level + 1).expect("level fits");
    if s.abs() <= T::epsilon() {
        if theta.cos() < T::zero() && level % 2 == 1 {
            -kp1
        } else {
            kp1
        }
    } else {
        (kp1 * theta).sin() / s
    }
}

/// Basis function of `mode` at `point`: `e^{i k.x}` on tori, the (real)
/// character value at class angle `point[0]` on `SU(2)`.
pub fn evaluate_basis<T: Scalar>(group: GroupSpec, mode: &Mode<T>, point: &[T]) -> Complex<T> {
    match (&mode.index, group.central_only()) {
        (ModeIndex::Level(l), true) => Complex::new(su2_character(*l, point[0]), T::zero()),
        (ModeIndex::Torus(k), false) => {
            let phase = k
                .iter()
                .zip(point)
                .map(|(&ki, &xi)| T::from_i32(ki).expect("frequency fits") * xi)
                .fold(T::zero(), |a, b| a + b);
            Complex::new(phase.cos(), phase.sin())
        }
        _ => panic!("mode {} does not belong to group {}", mode.index, group),
    }
}
