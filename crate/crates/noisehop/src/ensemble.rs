//! Trajectory ensembles on the rayon pool. Trajectories are generated in
//! parallel chunks but folded into the accumulator in index order, so the
//! result does not depend on the thread count.

use noisehop_core::lindblad::{check_grid, TimeSeries};
use noisehop_core::models::ModelInstance;
use noisehop_core::state::StateVector;
use noisehop_core::stochastic::{
    ensemble_meta, prepare_initial, run_trajectory, steps_per_run, EnsembleAccumulator, TrajectoryConfig,
    TrajectoryKernel,
};
use noisehop_core::Result;
use rayon::prelude::*;

const CHUNK: usize = 256;

#[derive(Clone, Debug)]
pub struct Ensemble {
    pub series: TimeSeries,
    /// Worst `|Tr(N ψψ†) − Tr(N ψ₀ψ₀†)|` over all trajectories and grid points.
    pub max_excitation_drift: f64,
}

pub fn parallel_ensemble(
    psi0: &StateVector,
    model: &ModelInstance,
    times: &[f64],
    cfg: &TrajectoryConfig,
) -> Result<Ensemble> {
    cfg.validate()?;
    check_grid(times)?;
    let psi = prepare_initial(model, psi0)?;
    let kernel = TrajectoryKernel::new(model);
    let mut acc = EnsembleAccumulator::new(kernel.basis().clone(), times.len());
    for start in (0..cfg.count).step_by(CHUNK) {
        let end = (start + CHUNK).min(cfg.count);
        let records: Vec<_> = (start..end)
            .into_par_iter()
            .map(|i| run_trajectory(&kernel, &psi, times, cfg, i as u64))
            .collect();
        for r in &records {
            acc.add(r);
        }
    }
    let mut meta = ensemble_meta(model, cfg);
    meta.steps = steps_per_run(times, cfg.dt);
    let max_excitation_drift = acc.max_excitation_drift();
    Ok(Ensemble {
        series: acc.finish(times, meta)?,
        max_excitation_drift,
    })
}
