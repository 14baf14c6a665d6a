//! Analytic-class (Gevrey) norms built from the inhomogeneous operator `A = I − Δ`.
//!
//! The multiplier `A^{(p+r)/2} e^{σA^{1/2}}` acts on the mode `k` as the scalar
//! `(1+|k|²)^{(p+r)/2} e^{σ(1+|k|²)^{1/2}}`. Norms are coefficient sums with no
//! volume factor, matching the Hilbert-space definition of the class.

use serde::{Deserialize, Serialize};

use crate::error::{HvbkError, Result};
use crate::spectral::{map_nodes, to_physical, to_spectral, PhysicalField, SpectralField, WaveIndex};
use crate::vector::{cdot_conj, cnorm, cscale, norm};

/// Largest exponent `σ(1+|k|²)^{1/2}` accepted before the weight is declared out of range.
pub const MAX_EXPONENT: f64 = 700.0;

/// Index of an analytic class: regularity `p`, radius `sigma`, extra `A`-power `r`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GevreyParams {
    pub p: f64,
    pub sigma: f64,
    #[serde(default)]
    pub r: f64,
}

impl GevreyParams {
    pub fn new(p: f64, sigma: f64, r: f64) -> Result<Self> {
        for (name, v) in [("p", p), ("sigma", sigma), ("r", r)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(HvbkError::Input(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        Ok(GevreyParams { p, sigma, r })
    }

    /// Plain Sobolev index (`σ = 0`, `r = 0`).
    pub fn sobolev(p: f64) -> Self {
        GevreyParams { p, sigma: 0.0, r: 0.0 }
    }

    pub fn with_sigma(self, sigma: f64) -> Self {
        GevreyParams { sigma, ..self }
    }

    pub fn with_r(self, r: f64) -> Self {
        GevreyParams { r, ..self }
    }

    /// Regularity hypothesis of the local existence theorem, `p > 5/2`.
    pub fn check_strict(&self) -> Result<()> {
        if self.p > 2.5 {
            Ok(())
        } else {
            Err(HvbkError::Precondition(format!(
                "p>5/2 required in strict mode, got p={}",
                self.p
            )))
        }
    }
}

/// Scalar weight `(1+|k|²)^{(p+r)/2} e^{σ(1+|k|²)^{1/2}}` of mode `k`.
pub fn weight(k: WaveIndex, gp: &GevreyParams) -> Result<f64> {
    let a = 1.0 + k.norm_sqr();
    let exponent = gp.sigma * a.sqrt();
    if exponent > MAX_EXPONENT {
        return Err(HvbkError::Range { k, exponent });
    }
    Ok(a.powf(0.5 * (gp.p + gp.r)) * exponent.exp())
}

pub fn apply_multiplier(f: &SpectralField, gp: &GevreyParams) -> Result<SpectralField> {
    let mut out = f.clone();
    let n = f.n();
    let mut ws = Vec::with_capacity(out.coeffs().len());
    for idx in 0..out.coeffs().len() {
        ws.push(weight(out.wave_index(idx), gp)?);
    }
    let div_free = f.is_divergence_free();
    for (c, w) in out.coeffs_mut().iter_mut().zip(ws) {
        *c = cscale(w.into(), c);
    }
    debug_assert_eq!(out.n(), n);
    if div_free {
        out.mark_divergence_free().ok();
    }
    Ok(out)
}

/// `(Σ_k x_k²)^{1/2}` evaluated without intermediate overflow.
fn scaled_l2(terms: &[f64]) -> f64 {
    let top = terms.iter().fold(0.0_f64, |a, &t| a.max(t.abs()));
    if top == 0.0 {
        return 0.0;
    }
    top * terms.iter().map(|t| (t / top).powi(2)).sum::<f64>().sqrt()
}

/// `‖f‖_{G^{(p+r)/2}_σ} = (Σ_k |f̂(k)|² (1+|k|²)^{p+r} e^{2σ(1+|k|²)^{1/2}})^{1/2}`.
pub fn gevrey_norm(f: &SpectralField, gp: &GevreyParams) -> Result<f64> {
    let mut terms = Vec::with_capacity(f.coeffs().len());
    for (k, c) in f.iter() {
        let m = cnorm(c);
        if m == 0.0 {
            continue;
        }
        terms.push(m * weight(k, gp)?);
    }
    Ok(scaled_l2(&terms))
}

/// Real part of the weighted Hermitian pairing `Σ_k f̂(k)·conj(ĝ(k)) w(k)²`.
pub fn gevrey_inner(f: &SpectralField, g: &SpectralField, gp: &GevreyParams) -> Result<f64> {
    if f.n() != g.n() {
        return Err(HvbkError::TruncationMismatch {
            left: f.n(),
            right: g.n(),
        });
    }
    let mut acc = 0.0;
    for ((k, a), b) in f.iter().zip(g.coeffs()) {
        let w = weight(k, gp)?;
        acc += cdot_conj(&cscale(w.into(), a), &cscale(w.into(), b)).re;
    }
    Ok(acc)
}

/// Wiener-algebra norm `Σ_k |f̂(k)|`.
pub fn wiener_norm(f: &SpectralField) -> f64 {
    f.coeffs().iter().map(cnorm).sum()
}

/// Pointwise floor data of the superfluid vorticity together with the Poincaré constant
/// and initial analyticity radius.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VorticityFloorParams {
    pub m_i: f64,
    pub m_f: f64,
    pub c0: f64,
    pub sigma0: f64,
}

impl VorticityFloorParams {
    /// Validates `0 < 2·C0·σ0 < m_f < m_i`.
    pub fn new(m_i: f64, m_f: f64, c0: f64, sigma0: f64) -> Result<Self> {
        let vf = VorticityFloorParams { m_i, m_f, c0, sigma0 };
        let violations = vf.violations();
        if violations.is_empty() {
            Ok(vf)
        } else {
            Err(HvbkError::Config { violations })
        }
    }

    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(self.c0 > 0.0) {
            v.push(format!("C0>0 required (got {})", self.c0));
        }
        if !(self.sigma0 > 0.0) {
            v.push(format!("sigma0>0 required (got {})", self.sigma0));
        }
        if !(self.m_f < self.m_i) {
            v.push(format!("m_f<m_i required (m_f={}, m_i={})", self.m_f, self.m_i));
        }
        if !(2.0 * self.c0 * self.sigma0 < self.m_f) {
            v.push(format!(
                "2*C0*sigma0<m_f required (2*C0*sigma0={}, m_f={})",
                2.0 * self.c0 * self.sigma0,
                self.m_f
            ));
        }
        v
    }

    /// Series ratio `β = 2C0σ0/m_f` of the reciprocal-magnitude expansion.
    pub fn beta(&self) -> f64 {
        2.0 * self.c0 * self.sigma0 / self.m_f
    }
}

/// Least integer `≥ x`, treating values within rounding of an integer as that integer.
pub fn ceil_index(x: f64) -> u64 {
    let r = x.round();
    if (x - r).abs() <= 1e-12 * x.abs().max(1.0) {
        r.max(0.0) as u64
    } else {
        x.ceil().max(0.0) as u64
    }
}

/// Exact factorial up to `20!`.
pub fn factorial(n: u64) -> Result<u64> {
    if n > 20 {
        return Err(HvbkError::FactorialOverflow(n));
    }
    Ok((1..=n).product())
}

/// Closed-form bound `e^{σ0} + (⌈p⌉+⌈r⌉)! / (m_f/2 − C0σ0)^{⌈p⌉+⌈r⌉+1}` on
/// `‖A^{r/2}(1/|ω|)‖_{G^{p/2}_σ}`, from explicit floor, Poincaré constant and radius.
pub fn inv_mag_bound_raw(p: f64, r: f64, m_f: f64, c0: f64, sigma0: f64) -> Result<f64> {
    if !(m_f > 0.0) || !(c0 > 0.0) || !(sigma0 >= 0.0) {
        return Err(HvbkError::Input(format!(
            "need m_f>0, C0>0, sigma0>=0 (got m_f={m_f}, C0={c0}, sigma0={sigma0})"
        )));
    }
    let beta = 2.0 * c0 * sigma0 / m_f;
    if beta >= 1.0 {
        return Err(HvbkError::DivergentSeries { beta });
    }
    let n = ceil_index(p) + ceil_index(r);
    let fact = factorial(n)? as f64;
    let base = 0.5 * m_f - c0 * sigma0;
    Ok(sigma0.exp() + fact / base.powi(n as i32 + 1))
}

pub fn inv_mag_bound(p: f64, r: f64, vf: &VorticityFloorParams) -> Result<f64> {
    inv_mag_bound_raw(p, r, vf.m_f, vf.c0, vf.sigma0)
}

/// Nodewise `1/|ω(x)|`, stored in the first component.
pub fn inv_mag_field(omega: &PhysicalField, floor: f64) -> Result<PhysicalField> {
    map_nodes(std::slice::from_ref(omega), |node, v| {
        let mag = norm(&v[0]);
        if mag > floor {
            Ok([1.0 / mag, 0.0, 0.0])
        } else {
            Err(HvbkError::Singularity { node, value: mag, floor })
        }
    })
}

/// Truncated reciprocal norm: `1/|ω|` sampled on an `m³` grid, analyzed, truncated to the
/// field's own `N`, then measured in `G^{(p+r)/2}_σ`. Under-estimates the infinite series.
pub fn truncated_reciprocal_norm(
    omega: &SpectralField,
    gp: &GevreyParams,
    m: usize,
    floor: f64,
) -> Result<f64> {
    let grid = to_physical(omega, m)?;
    let recip = inv_mag_field(&grid, floor)?;
    gevrey_norm(&to_spectral(&recip, omega.n())?, gp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{leray_project, node_position};
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field(n: usize, rng: &mut ChaCha8Rng) -> SpectralField {
        let mut f = SpectralField::from_fn(n, |_| {
            [0, 1, 2].map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        });
        f.symmetrize();
        f
    }

    #[test]
    fn trivial_multiplier_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = random_field(2, &mut rng);
        let g = apply_multiplier(&f, &GevreyParams::sobolev(0.0)).unwrap();
        assert_eq!(f, g);
    }

    #[test]
    fn constant_field_picks_up_e_sigma() {
        let f = SpectralField::constant(2, [1.0, 0.0, 0.0]);
        let gp = GevreyParams::new(3.0, 0.4, 0.5).unwrap();
        let g = apply_multiplier(&f, &gp).unwrap();
        assert!((g.mean()[0].re - 0.4_f64.exp()).abs() < 1e-15);
        let gp = GevreyParams::new(1.0, 0.1, 0.0).unwrap();
        assert!((gevrey_norm(&f, &gp).unwrap() - 0.1_f64.exp()).abs() < 1e-15);
    }

    #[test]
    fn unit_mode_weight() {
        let gp = GevreyParams::new(2.0, 1.0, 0.0).unwrap();
        let w = weight(WaveIndex::new(1, 0, 0), &gp).unwrap();
        assert!((w - 2.0 * 2.0_f64.sqrt().exp()).abs() < 1e-13);
    }

    #[test]
    fn overflowing_weight_is_a_range_error() {
        let gp = GevreyParams::new(0.0, 800.0, 0.0).unwrap();
        let f = SpectralField::constant(2, [1.0, 0.0, 0.0]);
        let err = gevrey_norm(&f, &gp).unwrap_err();
        assert!(matches!(err, HvbkError::Range { .. }));
    }

    #[test]
    fn norm_matches_l2_of_multiplied_field_and_inner_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let f = random_field(3, &mut rng);
        let gp = GevreyParams::new(2.5, 0.3, 0.5).unwrap();
        let direct = gevrey_norm(&f, &gp).unwrap();
        let via = apply_multiplier(&f, &gp).unwrap().coeff_l2();
        assert!((direct - via).abs() <= 1e-12 * via);
        let inner = gevrey_inner(&f, &f, &gp).unwrap();
        assert!((inner - direct * direct).abs() <= 1e-12 * inner);
        assert_eq!(gevrey_norm(&SpectralField::zeros(3), &gp).unwrap(), 0.0);
    }

    #[test]
    fn disjoint_supports_are_orthogonal() {
        let mut f = SpectralField::zeros(2);
        f.set_hermitian(WaveIndex::new(1, 0, 0), [1.0.into(), 0.0.into(), 0.0.into()]);
        let mut g = SpectralField::zeros(2);
        g.set_hermitian(WaveIndex::new(0, 2, 0), [1.0.into(), 0.0.into(), 0.0.into()]);
        let gp = GevreyParams::new(2.0, 0.2, 0.0).unwrap();
        assert_eq!(gevrey_inner(&f, &g, &gp).unwrap(), 0.0);
    }

    #[test]
    fn cauchy_schwarz_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let gp = GevreyParams::new(2.0, 0.1, 0.0).unwrap();
        for _ in 0..100 {
            let f = random_field(2, &mut rng);
            let g = random_field(2, &mut rng);
            let lhs = gevrey_inner(&f, &g, &gp).unwrap().abs();
            let rhs = gevrey_norm(&f, &gp).unwrap() * gevrey_norm(&g, &gp).unwrap();
            assert!(lhs <= rhs * (1.0 + 1e-14));
        }
    }

    #[test]
    fn norm_is_monotone_in_every_index() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let f = random_field(3, &mut rng);
        let base = GevreyParams::new(1.0, 0.1, 0.0).unwrap();
        let n0 = gevrey_norm(&f, &base).unwrap();
        for gp in [
            GevreyParams { p: 1.5, ..base },
            GevreyParams { sigma: 0.2, ..base },
            GevreyParams { r: 0.5, ..base },
        ] {
            assert!(gevrey_norm(&f, &gp).unwrap() >= n0);
        }
    }

    #[test]
    fn wiener_norm_counts_hermitian_partner_and_dominates_sup() {
        let mut f = SpectralField::zeros(2);
        f.set_hermitian(WaveIndex::new(0, 1, 0), [1.0.into(), 0.0.into(), 0.0.into()]);
        assert_eq!(wiener_norm(&f), 2.0);

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 3;
        for _ in 0..50 {
            let f = random_field(n, &mut rng);
            let sup = to_physical(&f, 2 * n + 1)
                .unwrap()
                .values()
                .iter()
                .map(norm)
                .fold(0.0, f64::max);
            assert!(sup <= wiener_norm(&f) * (1.0 + 1e-14));
        }
    }

    #[test]
    fn wiener_norm_is_controlled_by_h2_norm() {
        let n = 4;
        let c: f64 = SpectralField::zeros(n)
            .iter()
            .map(|(k, _)| (1.0 + k.norm_sqr()).powi(-2))
            .sum::<f64>()
            .sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..50 {
            let f = random_field(n, &mut rng);
            let h2 = gevrey_norm(&f, &GevreyParams::sobolev(2.0)).unwrap();
            assert!(wiener_norm(&f) <= c * h2 * (1.0 + 1e-14));
        }
    }

    #[test]
    fn ceil_and_factorial() {
        assert_eq!(ceil_index(3.0), 3);
        assert_eq!(ceil_index(3.0 + 1e-15), 3);
        assert_eq!(ceil_index(2.6), 3);
        assert_eq!(ceil_index(0.5), 1);
        assert_eq!(ceil_index(0.0), 0);
        assert_eq!(factorial(0).unwrap(), 1);
        assert_eq!(factorial(20).unwrap(), 2_432_902_008_176_640_000);
        assert!(factorial(21).is_err());
    }

    #[test]
    fn closed_form_bound_values() {
        let vf = VorticityFloorParams { m_i: 2.0, m_f: 1.0, c0: 1.0, sigma0: 0.1 };
        let b = inv_mag_bound(3.0, 0.0, &vf).unwrap();
        let want = 0.1_f64.exp() + 6.0 / 0.0256;
        assert!((b - want).abs() <= 1e-12 * want);

        // σ0 → 0 limit
        let b0 = inv_mag_bound_raw(2.6, 0.5, 0.8, 1.0, 1e-14).unwrap();
        let n = 3 + 1;
        let want0 = 1.0 + 24.0 * (2.0_f64 / 0.8).powi(n + 1);
        assert!((b0 - want0).abs() <= 1e-10 * want0);

        assert!(matches!(
            inv_mag_bound_raw(3.0, 0.0, 0.2, 1.0, 0.1),
            Err(HvbkError::DivergentSeries { .. })
        ));
    }

    #[test]
    fn bound_is_monotone_in_floor_and_radius() {
        let b = |m_f: f64, s: f64| inv_mag_bound_raw(2.6, 0.0, m_f, 1.0, s).unwrap();
        assert!(b(0.6, 0.1) > b(0.8, 0.1));
        assert!(b(0.6, 0.1) < b(0.6, 0.15));
    }

    #[test]
    fn floor_params_reject_bad_ordering() {
        assert!(VorticityFloorParams::new(1.0, 0.5, 1.0, 0.1).is_ok());
        let err = VorticityFloorParams::new(1.0, 1.5, 1.0, 0.1).unwrap_err();
        assert!(err.to_string().contains("m_f<m_i"));
        let err = VorticityFloorParams::new(1.0, 0.15, 1.0, 0.1).unwrap_err();
        assert!(err.to_string().contains("2*C0*sigma0<m_f"));
    }

    fn helical(n: usize, eps: f64) -> SpectralField {
        // (cos z, sin z, ε cos z) is not divergence-free in general but the magnitude oracle
        // only needs nodewise values.
        let mut w = SpectralField::zeros(n);
        let h = Complex64::new(0.5, 0.0);
        let i = Complex64::new(0.0, 0.5);
        w.set_hermitian(WaveIndex::new(0, 0, 1), [h, -i, h * eps]);
        w
    }

    #[test]
    fn reciprocal_field_nodewise() {
        let n = 2;
        let m = 7;
        let g = to_physical(&helical(n, 0.0), m).unwrap();
        let r = inv_mag_field(&g, 0.5).unwrap();
        assert!(r.values().iter().all(|v| (v[0] - 1.0).abs() < 1e-14));

        let g2 = to_physical(&helical(n, 0.0).scaled(2.0), m).unwrap();
        let r2 = inv_mag_field(&g2, 0.5).unwrap();
        assert!(r2.values().iter().all(|v| (v[0] - 0.5).abs() < 1e-14));

        let eps = 0.3;
        let g3 = to_physical(&helical(n, eps), m).unwrap();
        let r3 = inv_mag_field(&g3, 0.5).unwrap();
        for (idx, v) in r3.values().iter().enumerate() {
            let z = node_position(m, idx)[2];
            let want = 1.0 / (1.0 + eps * eps * z.cos().powi(2)).sqrt();
            assert!((v[0] - want).abs() < 1e-14);
        }

        let err = inv_mag_field(&g, 1.0 + 1e-9).unwrap_err();
        assert!(matches!(err, HvbkError::Singularity { .. }));
    }

    #[test]
    fn unit_magnitude_reciprocal_norm_is_below_bound() {
        let omega = leray_project(&helical(3, 0.0));
        let vf = VorticityFloorParams::new(1.0, 0.9, 1.0, 0.1).unwrap();
        let gp = GevreyParams::new(2.6, 0.1, 0.0).unwrap();
        let got = truncated_reciprocal_norm(&omega, &gp, 14, 0.45).unwrap();
        assert!((got - 0.1_f64.exp()).abs() < 1e-13);
        assert!(got <= inv_mag_bound(gp.p, gp.r, &vf).unwrap());
    }
}
