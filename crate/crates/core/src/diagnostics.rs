//! Energy, momentum, Gevrey ledger and spectral-decay monitors.

use std::f64::consts::TAU;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{dissipation_integrand, friction_grid_size, rhs_vorticity_form, Densities, FluidState, RhsConfig};
use crate::error::{HvbkError, Result};
use crate::gevrey::{gevrey_inner, gevrey_norm, GevreyParams};
use crate::spectral::{to_physical, SpectralField};
use crate::vector::{cnorm, cnorm_sqr, norm, Vec3};

/// Volume of the periodic box, `(2π)³`.
pub const BOX_VOLUME: f64 = TAU * TAU * TAU;

pub const CSV_COLUMNS: [&str; 19] = [
    "t",
    "energy_s",
    "energy_n",
    "dissipation_rate",
    "momentum_x",
    "momentum_y",
    "momentum_z",
    "X",
    "Y",
    "sigma",
    "min_vort",
    "mean_us_x",
    "mean_us_y",
    "mean_us_z",
    "mean_un_x",
    "mean_un_y",
    "mean_un_z",
    "torque_budget_used",
    "sigma_fit",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub energy_s: f64,
    pub energy_n: f64,
    pub dissipation_rate: f64,
    pub momentum: Vec3,
    pub x: f64,
    pub y: f64,
    pub sigma: f64,
    pub min_vort: f64,
    pub mean_u_s: Vec3,
    pub mean_u_n: Vec3,
    pub torque_budget_used: f64,
    /// NaN when the decay fit is degenerate.
    pub sigma_fit: f64,
}

impl DiagnosticsRecord {
    pub fn energy(&self) -> f64 {
        self.energy_s + self.energy_n
    }

    pub fn to_row(&self) -> [f64; 19] {
        let (m, s, n) = (self.momentum, self.mean_u_s, self.mean_u_n);
        [
            self.t,
            self.energy_s,
            self.energy_n,
            self.dissipation_rate,
            m[0],
            m[1],
            m[2],
            self.x,
            self.y,
            self.sigma,
            self.min_vort,
            s[0],
            s[1],
            s[2],
            n[0],
            n[1],
            n[2],
            self.torque_budget_used,
            self.sigma_fit,
        ]
    }

    pub fn from_row(r: &[f64]) -> Result<Self> {
        if r.len() != CSV_COLUMNS.len() {
            return Err(HvbkError::Format(format!("expected {} columns, got {}", CSV_COLUMNS.len(), r.len())));
        }
        Ok(DiagnosticsRecord {
            t: r[0],
            energy_s: r[1],
            energy_n: r[2],
            dissipation_rate: r[3],
            momentum: [r[4], r[5], r[6]],
            x: r[7],
            y: r[8],
            sigma: r[9],
            min_vort: r[10],
            mean_u_s: [r[11], r[12], r[13]],
            mean_u_n: [r[14], r[15], r[16]],
            torque_budget_used: r[17],
            sigma_fit: r[18],
        })
    }

    /// Assemble every monitor for one state. `sigma` is the tracked radius at `state.t`.
    pub fn measure(
        state: &FluidState,
        d: &Densities,
        gp: &GevreyParams,
        sigma: f64,
        oversample: usize,
        torque_budget_used: f64,
    ) -> Result<Self> {
        let (energy_s, energy_n) = energies(state, d)?;
        let dissipation_rate = dissipation_rate(state, d, oversample)?;
        let (x, y) = gevrey_ledger(state, &gp.with_sigma(sigma))?;
        let (min_vort, _) = crate::dynamics::min_vorticity_magnitude(&state.omega_s, oversample)?;
        Ok(DiagnosticsRecord {
            t: state.t,
            energy_s,
            energy_n,
            dissipation_rate,
            momentum: total_momentum(state, d),
            x,
            y,
            sigma,
            min_vort,
            mean_u_s: state.mean_u_s,
            mean_u_n: state.mean_u_n,
            torque_budget_used,
            sigma_fit: sigma_fit(&state.omega_s).unwrap_or(f64::NAN),
        })
    }
}

/// `(½ρ_s‖u_s‖², ½ρ_n‖u_n‖²)` with `‖u‖² = (2π)³ Σ_k |û(k)|²`.
pub fn energies(state: &FluidState, d: &Densities) -> Result<(f64, f64)> {
    let e = |u: &SpectralField, rho: f64| 0.5 * rho * BOX_VOLUME * u.coeffs().iter().map(cnorm_sqr).sum::<f64>();
    Ok((e(&state.velocity_s()?, d.rho_s), e(&state.velocity_n()?, d.rho_n)))
}

/// `ρ_sρ_n ∫ |ω_s||v|² − (ω_s·v)²/|ω_s|` by the equal-weight rule on the friction grid.
pub fn dissipation_rate(state: &FluidState, d: &Densities, oversample: usize) -> Result<f64> {
    let m = friction_grid_size(state.n(), oversample);
    let v = state.velocity_n()?.sub(&state.velocity_s()?)?;
    let w = to_physical(&state.omega_s, m)?;
    let vg = to_physical(&v, m)?;
    let sum: f64 = w
        .values()
        .par_iter()
        .zip(vg.values().par_iter())
        .map(|(a, b)| dissipation_integrand(a, b))
        .sum();
    let h = TAU / m as f64;
    Ok(d.rho_s * d.rho_n * sum * h * h * h)
}

/// Total energy and friction dissipation rate; `dE/dt = −D` for the semi-discrete system.
pub fn energy_balance(state: &FluidState, d: &Densities, oversample: usize) -> Result<(f64, f64)> {
    let (es, en) = energies(state, d)?;
    Ok((es + en, dissipation_rate(state, d, oversample)?))
}

/// `(2π)³(ρ_s ū_s + ρ_n ū_n)`.
pub fn total_momentum(state: &FluidState, d: &Densities) -> Vec3 {
    std::array::from_fn(|i| BOX_VOLUME * (d.rho_s * state.mean_u_s[i] + d.rho_n * state.mean_u_n[i]))
}

/// `X = 1 + ‖ω_s‖² + ‖ω_n‖²` in `G^{p/2}_σ` and `Y`, the same sum with the extra `A^{1/4}`.
pub fn gevrey_ledger(state: &FluidState, gp: &GevreyParams) -> Result<(f64, f64)> {
    let g0 = gp.with_r(0.0);
    let g1 = gp.with_r(0.5);
    let x = 1.0 + gevrey_norm(&state.omega_s, &g0)?.powi(2) + gevrey_norm(&state.omega_n, &g0)?.powi(2);
    let y = gevrey_norm(&state.omega_s, &g1)?.powi(2) + gevrey_norm(&state.omega_n, &g1)?.powi(2);
    Ok((x, y))
}

/// `(⟨ω_s, ∂_tω_s⟩ + ⟨ω_n, ∂_tω_n⟩) / (X(1+Ū)Y)` in `G^{p/2}_σ`, the constant the ledger
/// inequality needs at this state.
pub fn ledger_growth_ratio(
    state: &FluidState,
    d: &Densities,
    gp: &GevreyParams,
    ubar: f64,
    cfg: &RhsConfig,
) -> Result<f64> {
    let r = rhs_vorticity_form(state, d, cfg)?;
    let g0 = gp.with_r(0.0);
    let growth = gevrey_inner(&state.omega_s, &r.d_omega_s, &g0)? + gevrey_inner(&state.omega_n, &r.d_omega_n, &g0)?;
    let (x, y) = gevrey_ledger(state, gp)?;
    if y == 0.0 {
        return Ok(0.0);
    }
    Ok(growth / (x * (1.0 + ubar) * y))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanVelocityReport {
    pub c_mean_s: f64,
    pub c_mean_n: f64,
    /// Smallest `bound − |ū|` over the series and both fluids; negative means violated.
    pub min_slack: f64,
    pub max_slack: f64,
    pub holds: bool,
}

/// Check `|ū(t)| ≤ |ū(0)| + C_mean · sup_{τ≤t}‖ω_s(τ)‖_G · t` along a recorded run.
///
/// `C_mean` comes from Cauchy–Schwarz on the mean-velocity equation and the energy bound:
/// `|∫F| ≤ ‖ω_s‖_{L²}‖v‖_{L²}` and `‖v‖_{L²} ≤ (2E₀/ρ_s)^{1/2} + (2E₀/ρ_n)^{1/2}`.
/// `‖ω_s‖_G` is bounded through the ledger as `(X − 1)^{1/2}`.
pub fn mean_velocity_bound_check(records: &[DiagnosticsRecord], d: &Densities) -> Result<MeanVelocityReport> {
    let first = records
        .first()
        .ok_or_else(|| HvbkError::Input("empty diagnostics series".into()))?;
    let e0 = first.energy();
    let v_l2 = (2.0 * e0 / d.rho_s).sqrt() + (2.0 * e0 / d.rho_n).sqrt();
    let c = BOX_VOLUME.powf(-0.5) * v_l2;
    let c_mean_s = d.rho_n * c;
    let c_mean_n = d.rho_s * c;
    let (us0, un0) = (norm(&first.mean_u_s), norm(&first.mean_u_n));
    let mut sup_w = 0.0_f64;
    let mut min_slack = f64::INFINITY;
    let mut max_slack = f64::NEG_INFINITY;
    for r in records {
        sup_w = sup_w.max((r.x - 1.0).max(0.0).sqrt());
        let t = r.t - first.t;
        for (now, start, cm) in [(norm(&r.mean_u_s), us0, c_mean_s), (norm(&r.mean_u_n), un0, c_mean_n)] {
            let slack = start + cm * sup_w * t - now;
            min_slack = min_slack.min(slack);
            max_slack = max_slack.max(slack);
        }
    }
    Ok(MeanVelocityReport {
        c_mean_s,
        c_mean_n,
        min_slack,
        max_slack,
        holds: min_slack >= -1e-12 * (1.0 + us0.max(un0)),
    })
}

/// Analyticity radius read off the coefficient decay of `f`.
///
/// Least-squares fit of `log|f̂(k)| ≈ a − σ(1+|k|²)^{1/2}` over all nonzero modes, refit once
/// after discarding modes whose residual exceeds four standard deviations. Needs at least
/// four populated shells `⌊|k|⌋`.
pub fn sigma_fit(f: &SpectralField) -> Result<f64> {
    let pts: Vec<(f64, f64, u32)> = f
        .iter()
        .filter_map(|(k, c)| {
            let m = cnorm(c);
            (m > 0.0).then(|| ((1.0 + k.norm_sqr()).sqrt(), m.ln(), k.norm_sqr().sqrt().floor() as u32))
        })
        .collect();
    let mut shells: Vec<u32> = pts.iter().map(|p| p.2).collect();
    shells.sort_unstable();
    shells.dedup();
    if shells.len() < 4 {
        return Err(HvbkError::Fit(format!("{} populated shells, need at least 4", shells.len())));
    }
    let fit = |use_pt: &dyn Fn(&(f64, f64, u32)) -> bool| -> Option<(f64, f64, f64)> {
        let sel: Vec<&(f64, f64, u32)> = pts.iter().filter(|p| use_pt(p)).collect();
        let n = sel.len() as f64;
        let mx = sel.iter().map(|p| p.0).sum::<f64>() / n;
        let my = sel.iter().map(|p| p.1).sum::<f64>() / n;
        let sxx: f64 = sel.iter().map(|p| (p.0 - mx).powi(2)).sum();
        if !(sxx > 0.0) {
            return None;
        }
        let sxy: f64 = sel.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let slope = sxy / sxx;
        let icpt = my - slope * mx;
        let rms = (sel.iter().map(|p| (p.1 - icpt - slope * p.0).powi(2)).sum::<f64>() / n).sqrt();
        Some((slope, icpt, rms))
    };
    let (slope, icpt, rms) = fit(&|_| true).ok_or_else(|| HvbkError::Fit("degenerate abscissae".into()))?;
    if rms == 0.0 {
        return Ok(-slope);
    }
    let (slope, _, _) = fit(&|p| (p.1 - icpt - slope * p.0).abs() <= 4.0 * rms)
        .ok_or_else(|| HvbkError::Fit("degenerate abscissae after outlier rejection".into()))?;
    Ok(-slope)
}

/// `(‖Φ_s‖² + ‖Φ_n‖² + ‖Ω_s‖² + ‖Ω_n‖²)^{1/2}` in `G^{q/2}_σ`, `q = p − ½`, where `Φ` and `Ω`
/// are the velocity and vorticity differences of the two states.
pub fn gevrey_distance(a: &FluidState, b: &FluidState, gp: &GevreyParams) -> Result<f64> {
    let q = GevreyParams {
        p: (gp.p - 0.5).max(0.0),
        r: 0.0,
        ..*gp
    };
    let parts = [
        a.velocity_s()?.sub(&b.velocity_s()?)?,
        a.velocity_n()?.sub(&b.velocity_n()?)?,
        a.omega_s.sub(&b.omega_s)?,
        a.omega_n.sub(&b.omega_n)?,
    ];
    let mut s = 0.0;
    for f in &parts {
        s += gevrey_norm(f, &q)?.powi(2);
    }
    Ok(s.sqrt())
}
