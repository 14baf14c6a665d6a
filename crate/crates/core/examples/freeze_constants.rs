//! Regenerates `fixtures/frozen_constants.json` from seed-0 runs at twice the observed maxima.
//!
//! cargo run --release -p hvbk-core --example freeze_constants > crates/core/fixtures/frozen_constants.json

use hvbk_core::gevrey::GevreyParams;
use hvbk_core::harness::{perturbation_growth, perturbation_reference_config};
use hvbk_core::verifier::{
    max_algebra_ratio, verify_nonlinear_estimate, AlgebraConstant, FrozenConstants, LemmaConstant,
    PerturbationConstants,
};

const SEED: u64 = 0;
const TRIALS: usize = 1000;
const SAFETY: f64 = 2.0;

fn main() -> hvbk_core::Result<()> {
    let (sigma, n) = (0.1, 3);
    let mut lemma = Vec::new();
    for k in [2, 4] {
        for p in [2.5, 3.0] {
            let gp = GevreyParams::new(p, sigma, 0.0)?;
            let rep = verify_nonlinear_estimate(k, TRIALS, &gp, n, SEED, None)?;
            eprintln!("lemma K={k} p={p}: max ratio {:.6e}", rep.max_ratio);
            lemma.push(LemmaConstant { k, p, sigma, n, observed_max: rep.max_ratio, bound: SAFETY * rep.max_ratio });
        }
    }
    let gp = GevreyParams::new(2.0, 0.1, 0.0)?;
    let alg = max_algebra_ratio(TRIALS, &gp, 4, SEED)?;
    eprintln!("algebra: max ratio {alg:.6e}");
    let algebra = AlgebraConstant { p: gp.p, sigma: gp.sigma, n: 4, observed_max: alg, bound: SAFETY * alg };

    let epsilon = 1e-8;
    let pr = perturbation_growth(&perturbation_reference_config()?, epsilon, SEED)?;
    eprintln!(
        "perturbation: K {:.6e}, Lambda {:.6e}, final distance {:.6e}",
        pr.observed_k, pr.observed_lambda, pr.final_distance
    );
    let perturbation = PerturbationConstants {
        epsilon,
        observed_k: pr.observed_k,
        observed_lambda: pr.observed_lambda,
        k: SAFETY * pr.observed_k,
        lambda: SAFETY * pr.observed_lambda,
    };
    let frozen = FrozenConstants { seed: SEED, trials: TRIALS, lemma, algebra, perturbation };
    println!("{}", serde_json::to_string_pretty(&frozen)?);
    Ok(())
}
