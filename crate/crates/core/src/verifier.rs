//! Brute-force oracles for the multilinear Gevrey estimate and the reciprocal-magnitude bound.

use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::friction_grid_size;
use crate::error::{HvbkError, Result};
use crate::gevrey::{gevrey_norm, inv_mag_bound_raw, truncated_reciprocal_norm, weight, GevreyParams, VorticityFloorParams};
use crate::random::{analytic_field, analytic_solenoidal, trial_rng};
use crate::spectral::{pointwise_product_projected, SpectralField, WaveIndex};
use crate::vector::{norm, CVec3, Vec3, CZERO3};

/// Largest truncation the direct-summation oracle accepts.
pub const ORACLE_MAX_N: usize = 4;

/// Fourier multiplier `T` with symbol `m(k)` and `|m(k)| ≤ c|k|`.
#[derive(Clone)]
pub struct MultiplierOp {
    symbol: Arc<dyn Fn(WaveIndex) -> Complex64 + Send + Sync>,
    pub growth_bound: f64,
}

impl std::fmt::Debug for MultiplierOp {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MultiplierOp").field("growth_bound", &self.growth_bound).finish()
    }
}

impl MultiplierOp {
    /// Checks the growth bound on every mode of the truncation `n`.
    pub fn new(
        symbol: impl Fn(WaveIndex) -> Complex64 + Send + Sync + 'static,
        growth_bound: f64,
        n: usize,
    ) -> Result<Self> {
        let n = n as i32;
        for k1 in -n..=n {
            for k2 in -n..=n {
                for k3 in -n..=n {
                    let k = WaveIndex::new(k1, k2, k3);
                    let m = symbol(k).norm();
                    if m > growth_bound * k.norm_sqr().sqrt() * (1.0 + 1e-14) {
                        return Err(HvbkError::Input(format!(
                            "multiplier |m({k:?})| = {m} exceeds {growth_bound}|k|"
                        )));
                    }
                }
            }
        }
        Ok(MultiplierOp {
            symbol: Arc::new(symbol),
            growth_bound,
        })
    }

    /// `m(k) = |k|`.
    pub fn magnitude() -> Self {
        MultiplierOp {
            symbol: Arc::new(|k: WaveIndex| Complex64::new(k.norm_sqr().sqrt(), 0.0)),
            growth_bound: 1.0,
        }
    }

    pub fn eval(&self, k: WaveIndex) -> Complex64 {
        (self.symbol)(k)
    }

    pub fn apply(&self, g: &SpectralField) -> SpectralField {
        let mut out = SpectralField::zeros(g.n());
        for (k, c) in g.iter() {
            let m = self.eval(k);
            out.set(k, [c[0] * m, c[1] * m, c[2] * m]);
        }
        out
    }
}

/// Dense coefficient cube of radius `r` used for iterated convolutions.
struct Cube {
    r: i32,
    data: Vec<CVec3>,
}

impl Cube {
    fn side(&self) -> i32 {
        2 * self.r + 1
    }

    fn idx(&self, k: [i32; 3]) -> usize {
        let s = self.side();
        (((k[0] + self.r) * s + (k[1] + self.r)) * s + (k[2] + self.r)) as usize
    }

    fn from_field(f: &SpectralField) -> Self {
        Cube {
            r: f.n() as i32,
            data: f.coeffs().to_vec(),
        }
    }

    fn key(&self, idx: usize) -> [i32; 3] {
        let s = self.side() as usize;
        [
            (idx / (s * s)) as i32 - self.r,
            ((idx / s) % s) as i32 - self.r,
            (idx % s) as i32 - self.r,
        ]
    }

    /// Full componentwise convolution with `f`.
    fn convolve(&self, f: &Cube) -> Cube {
        let r = self.r + f.r;
        let mut out = Cube {
            r,
            data: vec![CZERO3; ((2 * r + 1) as usize).pow(3)],
        };
        let fk: Vec<([i32; 3], CVec3)> = (0..f.data.len())
            .filter(|&j| f.data[j] != CZERO3)
            .map(|j| (f.key(j), f.data[j]))
            .collect();
        for i in 0..self.data.len() {
            let a = self.data[i];
            if a == CZERO3 {
                continue;
            }
            let ka = self.key(i);
            for (kb, b) in &fk {
                let t = out.idx([ka[0] + kb[0], ka[1] + kb[1], ka[2] + kb[2]]);
                for c in 0..3 {
                    out.data[t][c] += a[c] * b[c];
                }
            }
        }
        out
    }
}

/// `Re ⟨Π_i f_i, T g⟩` in `G^{p/2}_σ`, the product taken componentwise, evaluated by direct
/// summation over index tuples `h_1 + … + h_K = k` with `|k|_∞ ≤ N`.
pub fn convolution_inner_product_oracle(
    fs: &[&SpectralField],
    g: &SpectralField,
    op: &MultiplierOp,
    gp: &GevreyParams,
) -> Result<f64> {
    let n = g.n();
    if fs.is_empty() {
        return Err(HvbkError::Input("at least one factor required".into()));
    }
    if n > ORACLE_MAX_N {
        return Err(HvbkError::CostGuard { n, limit: ORACLE_MAX_N });
    }
    for f in fs {
        if f.n() != n {
            return Err(HvbkError::TruncationMismatch { left: f.n(), right: n });
        }
    }
    let (last, head) = fs.split_last().expect("non-empty");
    let prod = if head.is_empty() {
        None
    } else {
        let mut acc = Cube::from_field(head[0]);
        for f in &head[1..] {
            acc = acc.convolve(&Cube::from_field(f));
        }
        Some(acc)
    };
    let mut total = 0.0;
    for (k, gk) in g.iter() {
        let pk: CVec3 = match &prod {
            None => last.get(k),
            Some(acc) => {
                let mut s = CZERO3;
                for (h, fh) in last.iter() {
                    let q = [k.0[0] - h.0[0], k.0[1] - h.0[1], k.0[2] - h.0[2]];
                    if q.iter().any(|c| c.abs() > acc.r) {
                        continue;
                    }
                    let a = acc.data[acc.idx(q)];
                    for c in 0..3 {
                        s[c] += a[c] * fh[c];
                    }
                }
                s
            }
        };
        let w = weight(k, gp)?;
        let tg = op.eval(k);
        let mut term = Complex64::new(0.0, 0.0);
        for c in 0..3 {
            term += pk[c] * (tg * gk[c]).conj();
        }
        total += term.re * w * w;
    }
    Ok(total)
}

/// The same pairing for `K = 2` through the pseudospectral product and `gevrey_inner`.
pub fn quadratic_pairing_spectral(
    f1: &SpectralField,
    f2: &SpectralField,
    g: &SpectralField,
    op: &MultiplierOp,
    gp: &GevreyParams,
) -> Result<f64> {
    let prod = pointwise_product_projected(&[f1, f2], |v| [v[0][0] * v[1][0], v[0][1] * v[1][1], v[0][2] * v[1][2]], g.n())?;
    crate::gevrey::gevrey_inner(&prod, &op.apply(g), gp)
}

/// Right-hand side `Σ_j ‖A^{1/4}f_j‖ Π_{i≠j}‖f_i‖ · ‖A^{1/4}g‖` in `G^{p/2}_σ`.
pub fn nonlinear_estimate_rhs(fs: &[&SpectralField], g: &SpectralField, gp: &GevreyParams) -> Result<f64> {
    let g0 = gp.with_r(0.0);
    let g1 = gp.with_r(0.5);
    let plain = fs.iter().map(|f| gevrey_norm(f, &g0)).collect::<Result<Vec<_>>>()?;
    let lifted = fs.iter().map(|f| gevrey_norm(f, &g1)).collect::<Result<Vec<_>>>()?;
    let mut sum = 0.0;
    for (j, l) in lifted.iter().enumerate() {
        let mut term = *l;
        for (i, p) in plain.iter().enumerate() {
            if i != j {
                term *= p;
            }
        }
        sum += term;
    }
    Ok(sum * gevrey_norm(g, &g1)?)
}

/// `|LHS| / RHS` for one tuple; zero when both sides vanish.
pub fn lemma_ratio(fs: &[&SpectralField], g: &SpectralField, op: &MultiplierOp, gp: &GevreyParams) -> Result<f64> {
    let lhs = convolution_inner_product_oracle(fs, g, op, gp)?.abs();
    let rhs = nonlinear_estimate_rhs(fs, g, gp)?;
    if rhs == 0.0 {
        return if lhs == 0.0 { Ok(0.0) } else { Err(HvbkError::EstimateViolation { lhs }) };
    }
    Ok(lhs / rhs)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    #[serde(rename = "K")]
    pub k: usize,
    pub p: f64,
    pub sigma: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub trials: usize,
    pub seed: u64,
    pub max_ratio: f64,
    pub mean_ratio: f64,
    /// Ratio quantiles at 50%, 90% and 99%.
    pub quantiles: [f64; 3],
    pub frozen_bound: Option<f64>,
    pub pass: bool,
}

fn quantiles(sorted: &[f64]) -> [f64; 3] {
    let at = |q: f64| sorted[((sorted.len() - 1) as f64 * q).round() as usize];
    [at(0.5), at(0.9), at(0.99)]
}

/// Random trials of the `K`-linear estimate with `m(k) = |k|`. Factors and test field are drawn
/// with decay rate `σ + 0.3`. Passes when no ratio exceeds `frozen_bound` (if given).
pub fn verify_nonlinear_estimate(
    k: usize,
    trials: usize,
    gp: &GevreyParams,
    n: usize,
    seed: u64,
    frozen_bound: Option<f64>,
) -> Result<LemmaReport> {
    if !(gp.p > 2.0) {
        return Err(HvbkError::Precondition(format!("p>2 required, got p={}", gp.p)));
    }
    if k == 0 || trials == 0 {
        return Err(HvbkError::Input("K and trials must be positive".into()));
    }
    if n > ORACLE_MAX_N {
        return Err(HvbkError::CostGuard { n, limit: ORACLE_MAX_N });
    }
    let op = MultiplierOp::magnitude();
    let sigma_draw = gp.sigma + 0.3;
    let ratios = (0..trials as u64)
        .into_par_iter()
        .map(|trial| {
            let mut rng = trial_rng(seed, trial);
            let fs: Vec<SpectralField> = (0..k).map(|_| analytic_field(n, sigma_draw, &mut rng)).collect();
            let g = analytic_field(n, sigma_draw, &mut rng);
            let refs: Vec<&SpectralField> = fs.iter().collect();
            lemma_ratio(&refs, &g, &op, gp)
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut sorted = ratios.clone();
    sorted.sort_by(f64::total_cmp);
    let max_ratio = *sorted.last().expect("trials > 0");
    Ok(LemmaReport {
        k,
        p: gp.p,
        sigma: gp.sigma,
        n,
        trials,
        seed,
        max_ratio,
        mean_ratio: ratios.iter().sum::<f64>() / trials as f64,
        quantiles: quantiles(&sorted),
        frozen_bound,
        pass: max_ratio.is_finite() && frozen_bound.is_none_or(|b| max_ratio <= b),
    })
}

/// `‖fg‖ / (‖f‖‖g‖)` for the full (untruncated) componentwise product.
pub fn algebra_ratio(f: &SpectralField, g: &SpectralField, gp: &GevreyParams) -> Result<f64> {
    let n2 = 2 * f.n().max(g.n());
    let prod = pointwise_product_projected(
        &[&f.resized(n2), &g.resized(n2)],
        |v| [v[0][0] * v[1][0], v[0][1] * v[1][1], v[0][2] * v[1][2]],
        n2,
    )?;
    Ok(gevrey_norm(&prod, gp)? / (gevrey_norm(f, gp)? * gevrey_norm(g, gp)?))
}

/// Largest algebra ratio over random analytic pairs drawn at decay rate `σ + 0.3`.
pub fn max_algebra_ratio(trials: usize, gp: &GevreyParams, n: usize, seed: u64) -> Result<f64> {
    let rs = (0..trials as u64)
        .into_par_iter()
        .map(|trial| {
            let mut rng = trial_rng(seed, trial);
            let f = analytic_field(n, gp.sigma + 0.3, &mut rng);
            let g = analytic_field(n, gp.sigma + 0.3, &mut rng);
            algebra_ratio(&f, &g, gp)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(rs.into_iter().fold(0.0, f64::max))
}

/// Beltrami core `(cos z, sin z, 0)` on truncation `n`.
pub fn beltrami_vorticity(n: usize) -> SpectralField {
    let mut w = SpectralField::zeros(n);
    w.set_hermitian(
        WaveIndex::new(0, 0, 1),
        [Complex64::new(0.5, 0.0), Complex64::new(0.0, -0.5), Complex64::new(0.0, 0.0)],
    );
    w.mark_divergence_free().expect("shear vorticity is solenoidal");
    w
}

/// Direct evaluation `Σ_k ĉ(k) e^{ik·x}` at an arbitrary point.
pub fn synthesize_at(f: &SpectralField, x: Vec3) -> Vec3 {
    let mut out = [0.0; 3];
    for (k, c) in f.iter() {
        let kv = k.as_vec();
        let ph = kv[0] * x[0] + kv[1] * x[1] + kv[2] * x[2];
        let e = Complex64::new(ph.cos(), ph.sin());
        for i in 0..3 {
            out[i] += (c[i] * e).re;
        }
    }
    out
}

/// Central differences of orders 1 to 4 with step `h`.
fn central_differences(f: impl Fn(f64) -> f64, h: f64) -> [f64; 4] {
    let (m2, m1, z, p1, p2) = (f(-2.0 * h), f(-h), f(0.0), f(h), f(2.0 * h));
    [
        (p1 - m1) / (2.0 * h),
        (p1 - 2.0 * z + m1) / (h * h),
        (p2 - 2.0 * p1 + 2.0 * m1 - m2) / (2.0 * h.powi(3)),
        (p2 - 4.0 * p1 + 6.0 * z - 4.0 * m1 + m2) / h.powi(4),
    ]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReciprocalMargin {
    pub r: f64,
    pub max_norm: f64,
    pub min_bound: f64,
    /// Smallest `(bound − norm)/bound` over trials.
    pub min_margin: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AppendixReport {
    pub trials: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub p: f64,
    pub sigma: f64,
    #[serde(rename = "C0")]
    pub c0: f64,
    pub sigma0: f64,
    pub m_f: f64,
    pub epsilon: f64,
    pub seed: u64,
    pub min_measured_floor: f64,
    pub redraws: usize,
    pub margins: Vec<ReciprocalMargin>,
    /// Largest `|Dⁿ(1/|ω|)| / (2ⁿ n!/mⁿ)` for `n = 1..=4` over sampled grid lines.
    pub derivative_ratios: [f64; 4],
    pub derivative_tolerance: f64,
    pub pass: bool,
}

/// Finite-difference step for the derivative check.
pub const FD_STEP: f64 = 1e-2;
const MAX_REDRAWS: usize = 20;

/// Draw `ω = (cos z, sin z, 0) + ε·w` with `w` a unit-Wiener-norm analytic solenoidal field,
/// redrawing until the grid minimum is at least `m_f`.
pub fn draw_floor_certified(
    n: usize,
    epsilon: f64,
    sigma_draw: f64,
    m_f: f64,
    oversample: usize,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Result<(SpectralField, f64, usize)> {
    for attempt in 0..MAX_REDRAWS {
        let mut w = beltrami_vorticity(n);
        w.axpy(epsilon, &analytic_solenoidal(n, sigma_draw, rng))?;
        let (m, _) = crate::dynamics::min_vorticity_magnitude(&w, oversample)?;
        if m >= m_f {
            return Ok((w, m, attempt));
        }
    }
    Err(HvbkError::Sampling(format!(
        "no draw with floor >= {m_f} after {MAX_REDRAWS} attempts (epsilon={epsilon})"
    )))
}

/// Truncated reciprocal Gevrey norm against the closed-form bound, and spatial derivatives
/// of `1/|ω|` against `2ⁿ n!/mⁿ`, on random floor-certified vorticities.
pub fn verify_inv_mag_bound(
    trials: usize,
    vf: &VorticityFloorParams,
    gp: &GevreyParams,
    n: usize,
    epsilon: f64,
    seed: u64,
) -> Result<AppendixReport> {
    let beta = 2.0 * vf.c0 * vf.sigma0 / vf.m_f;
    if beta >= 1.0 {
        return Err(HvbkError::DivergentSeries { beta });
    }
    if trials == 0 {
        return Err(HvbkError::Input("trials must be positive".into()));
    }
    let rs = [0.0, 0.5];
    let tol = 0.1;
    let grid = friction_grid_size(n, 4);
    struct Trial {
        m: f64,
        redraws: usize,
        norms: [f64; 2],
        bounds: [f64; 2],
        deriv: [f64; 4],
    }
    let out = (0..trials as u64)
        .into_par_iter()
        .map(|trial| -> Result<Trial> {
            let mut rng = trial_rng(seed, trial);
            let (w, m, redraws) = draw_floor_certified(n, epsilon, gp.sigma + 0.3, vf.m_f, 2, &mut rng)?;
            let mut norms = [0.0; 2];
            let mut bounds = [0.0; 2];
            for (j, r) in rs.iter().enumerate() {
                norms[j] = truncated_reciprocal_norm(&w, &gp.with_r(*r), grid, 0.5 * vf.m_f)?;
                bounds[j] = inv_mag_bound_raw(gp.p, *r, m, vf.c0, vf.sigma0)?;
            }
            let mut deriv = [0.0_f64; 4];
            for _ in 0..8 {
                let x0: Vec3 = std::array::from_fn(|_| rng.random_range(0.0..std::f64::consts::TAU));
                for axis in 0..3 {
                    let g = |s: f64| {
                        let mut x = x0;
                        x[axis] += s;
                        1.0 / norm(&synthesize_at(&w, x))
                    };
                    let ds = central_differences(g, FD_STEP);
                    for (i, dv) in ds.iter().enumerate() {
                        let order = (i + 1) as i32;
                        let fact: f64 = (1..=order).map(f64::from).product();
                        let bound = 2f64.powi(order) * fact / m.powi(order);
                        deriv[i] = deriv[i].max(dv.abs() / bound);
                    }
                }
            }
            Ok(Trial { m, redraws, norms, bounds, deriv })
        })
        .collect::<Result<Vec<Trial>>>()?;

    let margins: Vec<ReciprocalMargin> = rs
        .iter()
        .enumerate()
        .map(|(j, &r)| ReciprocalMargin {
            r,
            max_norm: out.iter().map(|t| t.norms[j]).fold(0.0, f64::max),
            min_bound: out.iter().map(|t| t.bounds[j]).fold(f64::INFINITY, f64::min),
            min_margin: out
                .iter()
                .map(|t| (t.bounds[j] - t.norms[j]) / t.bounds[j])
                .fold(f64::INFINITY, f64::min),
        })
        .collect();
    let derivative_ratios: [f64; 4] = std::array::from_fn(|i| out.iter().map(|t| t.deriv[i]).fold(0.0, f64::max));
    let pass = margins.iter().all(|m| m.min_margin >= 0.0) && derivative_ratios.iter().all(|&r| r <= 1.0 + tol);
    Ok(AppendixReport {
        trials,
        n,
        p: gp.p,
        sigma: gp.sigma,
        c0: vf.c0,
        sigma0: vf.sigma0,
        m_f: vf.m_f,
        epsilon,
        seed,
        min_measured_floor: out.iter().map(|t| t.m).fold(f64::INFINITY, f64::min),
        redraws: out.iter().map(|t| t.redraws).sum(),
        margins,
        derivative_ratios,
        derivative_tolerance: tol,
        pass,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaConstant {
    #[serde(rename = "K")]
    pub k: usize,
    pub p: f64,
    pub sigma: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub observed_max: f64,
    pub bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlgebraConstant {
    pub p: f64,
    pub sigma: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub observed_max: f64,
    pub bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbationConstants {
    pub epsilon: f64,
    pub observed_k: f64,
    pub observed_lambda: f64,
    #[serde(rename = "K")]
    pub k: f64,
    #[serde(rename = "Lambda")]
    pub lambda: f64,
}

/// Constants estimated once on seed 0 at twice the observed maximum and checked in.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrozenConstants {
    pub seed: u64,
    pub trials: usize,
    pub lemma: Vec<LemmaConstant>,
    pub algebra: AlgebraConstant,
    pub perturbation: PerturbationConstants,
}

const FROZEN_JSON: &str = include_str!("../fixtures/frozen_constants.json");

impl FrozenConstants {
    pub fn load() -> Result<Self> {
        Ok(serde_json::from_str(FROZEN_JSON)?)
    }

    pub fn lemma_bound(&self, k: usize, p: f64, sigma: f64) -> Option<f64> {
        self.lemma
            .iter()
            .find(|c| c.k == k && (c.p - p).abs() < 1e-12 && (c.sigma - sigma).abs() < 1e-12)
            .map(|c| c.bound)
    }
}
