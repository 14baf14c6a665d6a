//! Fourier representation of periodic 3-vector fields on `[0, 2π)³`.
//!
//! A [`SpectralField`] stores the coefficients `ĉ(k)` for every wave index with
//! `|k_i| ≤ N` in a dense `(2N+1)³` cube, so that the represented field is
//! `f(x) = Σ_k ĉ(k) e^{i k·x}`. Real fields satisfy `ĉ(−k) = conj(ĉ(k))`; the
//! redundant half is stored and kept consistent rather than exploited.
//!
//! Quadratic products are formed pseudospectrally on a grid of `3N+1` points
//! per axis, which is the smallest grid on which the aliases of a product of
//! two band-limited fields never fall back inside the truncation.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{HvbkError, Result};
use crate::fft::{plan, Direction};
use crate::vector::{cconj, cnorm, cnorm_sqr, cscale, rcross, rdot, CVec3, Vec3, CZERO3};

/// Relative tolerance used when checking the spectral divergence-free constraint.
pub const DIV_FREE_TOL: f64 = 1e-13;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Integer wave vector `k ∈ Z³`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WaveIndex(pub [i32; 3]);

impl WaveIndex {
    pub const ZERO: WaveIndex = WaveIndex([0, 0, 0]);

    pub fn new(k1: i32, k2: i32, k3: i32) -> Self {
        WaveIndex([k1, k2, k3])
    }

    #[inline]
    pub fn norm_sqr(&self) -> f64 {
        let [a, b, c] = self.0;
        (a * a + b * b + c * c) as f64
    }

    #[inline]
    pub fn as_vec(&self) -> Vec3 {
        [self.0[0] as f64, self.0[1] as f64, self.0[2] as f64]
    }

    #[inline]
    pub fn neg(&self) -> Self {
        WaveIndex([-self.0[0], -self.0[1], -self.0[2]])
    }

    /// Largest absolute component; the mode is retained by `P^N` iff this is `≤ N`.
    #[inline]
    pub fn max_abs(&self) -> u32 {
        self.0.iter().map(|c| c.unsigned_abs()).max().unwrap_or(0)
    }

    #[inline]
    pub fn is_zero(&self) -> bool {
        self.0 == [0, 0, 0]
    }
}

/// Complex Fourier coefficient cube of one real 3-vector field.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField {
    n: usize,
    coeffs: Vec<CVec3>,
    divergence_free: bool,
}

impl SpectralField {
    pub fn zeros(n: usize) -> Self {
        let side = 2 * n + 1;
        SpectralField {
            n,
            coeffs: vec![CZERO3; side * side * side],
            divergence_free: false,
        }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(WaveIndex) -> CVec3) -> Self {
        let mut out = Self::zeros(n);
        for idx in 0..out.coeffs.len() {
            let k = out.wave_index(idx);
            out.coeffs[idx] = f(k);
        }
        out
    }

    /// Constant field `c` (only the mean mode populated).
    pub fn constant(n: usize, c: Vec3) -> Self {
        let mut out = Self::zeros(n);
        out.set(WaveIndex::ZERO, [c[0].into(), c[1].into(), c[2].into()]);
        out
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn side(&self) -> usize {
        2 * self.n + 1
    }

    pub fn coeffs(&self) -> &[CVec3] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [CVec3] {
        self.divergence_free = false;
        &mut self.coeffs
    }

    pub fn is_divergence_free(&self) -> bool {
        self.divergence_free
    }

    /// Mark the field as satisfying `k·ĉ(k) = 0`; refused if the residual exceeds tolerance.
    pub fn mark_divergence_free(&mut self) -> Result<()> {
        let scale = self.max_coeff_norm().max(f64::MIN_POSITIVE);
        let res = self.divergence_residual();
        if res > DIV_FREE_TOL * scale * (self.n.max(1) as f64) {
            return Err(HvbkError::Consistency(format!(
                "divergence residual {res:.3e} exceeds tolerance for max coefficient {scale:.3e}"
            )));
        }
        self.divergence_free = true;
        Ok(())
    }

    #[inline]
    pub fn index_of(&self, k: WaveIndex) -> Option<usize> {
        if k.max_abs() as usize > self.n {
            return None;
        }
        let side = self.side() as i32;
        let n = self.n as i32;
        Some((((k.0[0] + n) * side + (k.0[1] + n)) * side + (k.0[2] + n)) as usize)
    }

    #[inline]
    pub fn wave_index(&self, idx: usize) -> WaveIndex {
        let side = self.side();
        let n = self.n as i32;
        let k3 = (idx % side) as i32 - n;
        let k2 = ((idx / side) % side) as i32 - n;
        let k1 = (idx / (side * side)) as i32 - n;
        WaveIndex([k1, k2, k3])
    }

    /// Coefficient at `k`; zero outside the truncation.
    pub fn get(&self, k: WaveIndex) -> CVec3 {
        self.index_of(k).map_or(CZERO3, |i| self.coeffs[i])
    }

    /// Set one coefficient. Panics if `k` lies outside the truncation.
    pub fn set(&mut self, k: WaveIndex, v: CVec3) {
        let i = self
            .index_of(k)
            .unwrap_or_else(|| panic!("wave index {k:?} outside truncation N={}", self.n));
        self.coeffs[i] = v;
        self.divergence_free = false;
    }

    /// Set `ĉ(k) = v` and `ĉ(−k) = conj(v)`.
    pub fn set_hermitian(&mut self, k: WaveIndex, v: CVec3) {
        self.set(k, v);
        self.set(k.neg(), cconj(&v));
    }

    pub fn iter(&self) -> impl Iterator<Item = (WaveIndex, &CVec3)> + '_ {
        self.coeffs
            .iter()
            .enumerate()
            .map(move |(i, c)| (self.wave_index(i), c))
    }

    pub fn mean(&self) -> CVec3 {
        self.get(WaveIndex::ZERO)
    }

    pub fn max_coeff_norm(&self) -> f64 {
        self.coeffs.iter().map(cnorm).fold(0.0, f64::max)
    }

    /// Coefficient-space ℓ² norm, `(Σ_k |ĉ(k)|²)^{1/2}`.
    pub fn coeff_l2(&self) -> f64 {
        self.coeffs.iter().map(cnorm_sqr).sum::<f64>().sqrt()
    }

    /// `max_k |k·ĉ(k)|`.
    pub fn divergence_residual(&self) -> f64 {
        self.iter()
            .map(|(k, c)| rdot(&k.as_vec(), c).norm())
            .fold(0.0, f64::max)
    }

    /// `max_k |ĉ(−k) − conj(ĉ(k))|`; zero for a real field.
    pub fn hermitian_defect(&self) -> f64 {
        self.iter()
            .map(|(k, c)| {
                let p = self.get(k.neg());
                (0..3)
                    .map(|i| (p[i] - c[i].conj()).norm())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }

    /// Copy into a container of truncation `n`, zero-padding or dropping modes.
    pub fn resized(&self, n: usize) -> SpectralField {
        let mut out = SpectralField::zeros(n);
        for idx in 0..out.coeffs.len() {
            let k = out.wave_index(idx);
            out.coeffs[idx] = self.get(k);
        }
        out.divergence_free = self.divergence_free;
        out
    }

    fn check_same(&self, other: &SpectralField) -> Result<()> {
        if self.n != other.n {
            return Err(HvbkError::TruncationMismatch {
                left: self.n,
                right: other.n,
            });
        }
        Ok(())
    }

    /// `self += a · other`.
    pub fn axpy(&mut self, a: f64, other: &SpectralField) -> Result<()> {
        self.check_same(other)?;
        for (c, o) in self.coeffs.iter_mut().zip(&other.coeffs) {
            for i in 0..3 {
                c[i] += o[i] * a;
            }
        }
        self.divergence_free = self.divergence_free && other.divergence_free;
        Ok(())
    }

    pub fn scaled(&self, a: f64) -> SpectralField {
        let mut out = self.clone();
        for c in &mut out.coeffs {
            for z in c.iter_mut() {
                *z *= a;
            }
        }
        out
    }

    pub fn add(&self, other: &SpectralField) -> Result<SpectralField> {
        let mut out = self.clone();
        out.axpy(1.0, other)?;
        Ok(out)
    }

    pub fn sub(&self, other: &SpectralField) -> Result<SpectralField> {
        let mut out = self.clone();
        out.axpy(-1.0, other)?;
        Ok(out)
    }

    /// Replace every coefficient by `½(ĉ(k) + conj(ĉ(−k)))`, making the field exactly real.
    pub fn symmetrize(&mut self) {
        let orig = self.coeffs.clone();
        for idx in 0..self.coeffs.len() {
            let k = self.wave_index(idx);
            let j = self.index_of(k.neg()).expect("truncation is symmetric");
            let a = orig[idx];
            let b = orig[j];
            for i in 0..3 {
                self.coeffs[idx][i] = (a[i] + b[i].conj()) * 0.5;
            }
        }
    }

    /// Zero the mean mode.
    pub fn zero_mean(&mut self) {
        let i = self.index_of(WaveIndex::ZERO).expect("mean mode always stored");
        self.coeffs[i] = CZERO3;
    }
}

/// Real 3-vector samples on the uniform `M³` lattice `x_j = 2π j / M`.
#[derive(Clone, Debug, PartialEq)]
pub struct PhysicalField {
    m: usize,
    values: Vec<Vec3>,
}

impl PhysicalField {
    pub fn new(m: usize, values: Vec<Vec3>) -> Result<Self> {
        if values.len() != m * m * m {
            return Err(HvbkError::Input(format!(
                "expected {} grid values for M={m}, got {}",
                m * m * m,
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| v.iter().any(|x| !x.is_finite())) {
            return Err(HvbkError::Input(format!(
                "non-finite value at grid node {:?}",
                node_of(m, pos)
            )));
        }
        Ok(PhysicalField { m, values })
    }

    /// Sample a function of position on the lattice.
    pub fn from_fn(m: usize, f: impl Fn(Vec3) -> Vec3) -> Result<Self> {
        let values = (0..m * m * m).map(|i| f(node_position(m, i))).collect();
        Self::new(m, values)
    }

    #[inline]
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn values(&self) -> &[Vec3] {
        &self.values
    }

    pub fn get(&self, node: [usize; 3]) -> Vec3 {
        self.values[(node[0] * self.m + node[1]) * self.m + node[2]]
    }

    pub fn max_abs(&self) -> f64 {
        self.values
            .iter()
            .flat_map(|v| v.iter())
            .fold(0.0_f64, |a, x| a.max(x.abs()))
    }
}

/// Grid coordinates of a flat lattice index.
#[inline]
pub fn node_of(m: usize, idx: usize) -> [usize; 3] {
    [idx / (m * m), (idx / m) % m, idx % m]
}

/// Physical position of a flat lattice index.
#[inline]
pub fn node_position(m: usize, idx: usize) -> Vec3 {
    let h = std::f64::consts::TAU / m as f64;
    let [a, b, c] = node_of(m, idx);
    [a as f64 * h, b as f64 * h, c as f64 * h]
}

/// Grid size on which products of two truncation-`n` fields are alias-free.
#[inline]
pub fn dealiased_grid_size(n: usize) -> usize {
    3 * n + 1
}

fn require_resolution(n: usize, m: usize) -> Result<()> {
    let required = 2 * n + 1;
    if m < required {
        return Err(HvbkError::Resolution { n, m, required });
    }
    Ok(())
}

#[inline]
fn wrap(k: i32, m: usize) -> usize {
    k.rem_euclid(m as i32) as usize
}

/// Evaluate the trigonometric polynomial on the `M³` lattice.
pub fn to_physical(f: &SpectralField, m: usize) -> Result<PhysicalField> {
    require_resolution(f.n, m)?;
    let p = plan(m);
    let mut values = vec![[0.0; 3]; m * m * m];
    let mut buf = vec![Complex64::new(0.0, 0.0); m * m * m];
    for comp in 0..3 {
        buf.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
        for (k, c) in f.iter() {
            let [a, b, d] = k.0;
            buf[(wrap(a, m) * m + wrap(b, m)) * m + wrap(d, m)] = c[comp];
        }
        p.transform(&mut buf, Direction::Inverse);
        for (v, z) in values.iter_mut().zip(&buf) {
            v[comp] = z.re;
        }
    }
    Ok(PhysicalField { m, values })
}

/// Fourier coefficients of the trigonometric interpolant of `g`, truncated to `|k_i| ≤ n`.
pub fn to_spectral(g: &PhysicalField, n: usize) -> Result<SpectralField> {
    let m = g.m;
    require_resolution(n, m)?;
    let p = plan(m);
    let vol = (m * m * m) as f64;
    let mut out = SpectralField::zeros(n);
    let mut buf = vec![Complex64::new(0.0, 0.0); m * m * m];
    for comp in 0..3 {
        for (z, v) in buf.iter_mut().zip(&g.values) {
            *z = Complex64::new(v[comp], 0.0);
        }
        p.transform(&mut buf, Direction::Forward);
        for idx in 0..out.coeffs.len() {
            let k = out.wave_index(idx);
            let [a, b, d] = k.0;
            out.coeffs[idx][comp] = buf[(wrap(a, m) * m + wrap(b, m)) * m + wrap(d, m)] / vol;
        }
    }
    out.symmetrize();
    Ok(out)
}

/// Galerkin truncation `P^{N'}`: zero every mode with some `|k_i| > n_prime`.
pub fn truncate(f: &SpectralField, n_prime: usize) -> Result<SpectralField> {
    if n_prime > f.n {
        return Err(HvbkError::Input(format!(
            "cannot truncate N={} field to larger N'={n_prime}",
            f.n
        )));
    }
    let mut out = f.clone();
    for idx in 0..out.coeffs.len() {
        if out.wave_index(idx).max_abs() as usize > n_prime {
            out.coeffs[idx] = CZERO3;
        }
    }
    Ok(out)
}

/// Leray projection onto divergence-free fields; the mean mode is left unchanged.
pub fn leray_project(f: &SpectralField) -> SpectralField {
    let mut out = f.clone();
    out.coeffs
        .par_iter_mut()
        .enumerate()
        .for_each(|(idx, c)| {
            let k = f.wave_index(idx);
            if k.is_zero() {
                return;
            }
            let kv = k.as_vec();
            let proj = rdot(&kv, c) / k.norm_sqr();
            for i in 0..3 {
                c[i] -= proj * kv[i];
            }
        });
    out.divergence_free = true;
    out
}

/// Spectral curl `ĉ(k) ← i k × ĉ(k)`; the mean mode of the result is zero.
pub fn curl(f: &SpectralField) -> SpectralField {
    let mut out = f.clone();
    for (idx, c) in out.coeffs.iter_mut().enumerate() {
        let k = f.wave_index(idx);
        *c = cscale(I, &rcross(&k.as_vec(), c));
    }
    out.zero_mean();
    out.divergence_free = true;
    out
}

/// Spectral partial derivative `∂_axis`.
pub fn partial(f: &SpectralField, axis: usize) -> SpectralField {
    assert!(axis < 3, "axis must be 0, 1 or 2");
    let mut out = f.clone();
    for (idx, c) in out.coeffs.iter_mut().enumerate() {
        let k = f.wave_index(idx);
        let factor = I * k.0[axis] as f64;
        *c = cscale(factor, c);
    }
    out.divergence_free = f.divergence_free;
    out
}

/// Invert the curl on zero-mean divergence-free vorticity: `û(k) = (i k/|k|²) × ω̂(k)`, `û(0) = mean_u`.
pub fn velocity_from_vorticity(omega: &SpectralField, mean_u: Vec3) -> Result<SpectralField> {
    let m0 = cnorm(&omega.mean());
    let scale = omega.max_coeff_norm();
    if m0 > 1e-12 * scale.max(1.0) {
        return Err(HvbkError::Consistency(format!(
            "vorticity has nonzero mean mode of magnitude {m0:.3e}"
        )));
    }
    let mut out = omega.clone();
    for (idx, c) in out.coeffs.iter_mut().enumerate() {
        let k = omega.wave_index(idx);
        if k.is_zero() {
            *c = [mean_u[0].into(), mean_u[1].into(), mean_u[2].into()];
        } else {
            *c = cscale(I / k.norm_sqr(), &rcross(&k.as_vec(), c));
        }
    }
    out.divergence_free = true;
    Ok(out)
}

/// Apply `f` at every node of a set of co-located grid fields.
///
/// The closure receives the node coordinates and the input values at that node.
/// The first failing node in lattice order determines the returned error.
pub(crate) fn map_nodes<F>(inputs: &[PhysicalField], f: F) -> Result<PhysicalField>
where
    F: Fn([usize; 3], &[Vec3]) -> Result<Vec3> + Sync,
{
    let m = inputs.first().map(|g| g.m).expect("at least one input field");
    assert!(inputs.iter().all(|g| g.m == m), "inputs share one grid");
    let len = m * m * m;
    let results: Vec<Result<Vec3>> = (0..len)
        .into_par_iter()
        .with_min_len(256)
        .map(|idx| {
            let mut vals = [[0.0; 3]; 16];
            let vals = &mut vals[..inputs.len()];
            for (v, g) in vals.iter_mut().zip(inputs) {
                *v = g.values[idx];
            }
            f(node_of(m, idx), vals)
        })
        .collect();
    let mut values = Vec::with_capacity(len);
    for r in results {
        values.push(r?);
    }
    Ok(PhysicalField { m, values })
}

/// Nodewise algebraic combination of several fields on an `m³` grid, analyzed back and
/// truncated to `n_out`. Non-finite output is reported as a singularity at the offending node.
pub fn pointwise_on_grid<F>(
    fs: &[&SpectralField],
    m: usize,
    n_out: usize,
    combine: F,
) -> Result<SpectralField>
where
    F: Fn(&[Vec3]) -> Vec3 + Sync,
{
    if fs.is_empty() || fs.len() > 16 {
        return Err(HvbkError::Input(format!(
            "pointwise combination takes 1..=16 fields, got {}",
            fs.len()
        )));
    }
    let grids = fs
        .iter()
        .map(|f| to_physical(f, m))
        .collect::<Result<Vec<_>>>()?;
    let out = map_nodes(&grids, |node, vals| {
        let v = combine(vals);
        if v.iter().all(|x| x.is_finite()) {
            Ok(v)
        } else {
            Err(HvbkError::Singularity {
                node,
                value: f64::NAN,
                floor: 0.0,
            })
        }
    })?;
    to_spectral(&out, n_out)
}

/// Pseudospectral product with alias-free truncation to `n`.
///
/// All inputs must share the truncation `n`; the combination is exact for rules that are
/// at most quadratic in the inputs.
pub fn pointwise_product_projected<F>(
    fs: &[&SpectralField],
    combine: F,
    n: usize,
) -> Result<SpectralField>
where
    F: Fn(&[Vec3]) -> Vec3 + Sync,
{
    for f in fs {
        if f.n != n {
            return Err(HvbkError::TruncationMismatch { left: f.n, right: n });
        }
    }
    pointwise_on_grid(fs, dealiased_grid_size(n), n, combine)
}
