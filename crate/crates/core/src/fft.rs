//! Cached 3-D complex FFTs on cubic grids, built from 1-D `rustfft` plans.
//!
//! Data layout is row-major with the first axis slowest:
//! `index = (i1 * m + i2) * m + i3`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

pub(crate) struct GridPlan {
    m: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

static PLANS: OnceLock<Mutex<HashMap<usize, Arc<GridPlan>>>> = OnceLock::new();

pub(crate) fn plan(m: usize) -> Arc<GridPlan> {
    let cache = PLANS.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("fft plan cache poisoned");
    guard
        .entry(m)
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            Arc::new(GridPlan {
                m,
                forward: planner.plan_fft_forward(m),
                inverse: planner.plan_fft_inverse(m),
            })
        })
        .clone()
}

#[derive(Clone, Copy)]
pub(crate) enum Direction {
    /// `X(k) = Σ_j x(j) e^{-2πi jk/m}` (unnormalized)
    Forward,
    /// `x(j) = Σ_k X(k) e^{+2πi jk/m}` (unnormalized)
    Inverse,
}

impl GridPlan {
    pub(crate) fn transform(&self, data: &mut [Complex64], dir: Direction) {
        let m = self.m;
        assert_eq!(data.len(), m * m * m);
        let fft = match dir {
            Direction::Forward => &self.forward,
            Direction::Inverse => &self.inverse,
        };
        let scratch_len = fft.get_inplace_scratch_len();

        // Axis 3: contiguous rows, one slab per task.
        data.par_chunks_mut(m * m).for_each(|slab| {
            let mut scratch = vec![Complex64::new(0.0, 0.0); scratch_len];
            fft.process_with_scratch(slab, &mut scratch);
        });

        // Axis 2: stride m inside each slab.
        data.par_chunks_mut(m * m).for_each(|slab| {
            let mut line = vec![Complex64::new(0.0, 0.0); m];
            let mut scratch = vec![Complex64::new(0.0, 0.0); scratch_len];
            for i3 in 0..m {
                for i2 in 0..m {
                    line[i2] = slab[i2 * m + i3];
                }
                fft.process_with_scratch(&mut line, &mut scratch);
                for i2 in 0..m {
                    slab[i2 * m + i3] = line[i2];
                }
            }
        });

        // Axis 1: stride m², gathered per (i2, i3) column then scattered back.
        let columns: Vec<Vec<Complex64>> = (0..m * m)
            .into_par_iter()
            .map(|col| {
                let mut line: Vec<Complex64> = (0..m).map(|i1| data[i1 * m * m + col]).collect();
                let mut scratch = vec![Complex64::new(0.0, 0.0); scratch_len];
                fft.process_with_scratch(&mut line, &mut scratch);
                line
            })
            .collect();
        for (col, line) in columns.into_iter().enumerate() {
            for (i1, v) in line.into_iter().enumerate() {
                data[i1 * m * m + col] = v;
            }
        }
    }
}
