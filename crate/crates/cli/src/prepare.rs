//! Building systems and centering observables against them.

use ergomoment::montecarlo::estimate_mean;
use ergomoment::norms::{norm_profile_empirical, norm_profile_quadrature};
use ergomoment::systems::System;
use ergomoment::{center, norm_profile, FiniteMarkovModel, MeanSource, NormProfile, Observable, SystemConfig};
use serde_json::{json, Value};

use crate::error::{CliError, CliResult};

/// Midpoint cells for systems with a closed-form invariant density.
pub const QUADRATURE_RESOLUTION: usize = 1 << 16;
/// Declared accuracy of the quadrature mean.
pub const QUADRATURE_TOLERANCE: f64 = 1e-6;
const MEAN_BATCHES: usize = 100;
const MEAN_BATCH_LEN: usize = 10_000;
const PROFILE_SAMPLES: usize = 100_000;

pub struct Prepared {
    pub system: System,
    pub phi: Observable,
    pub profile: NormProfile,
    /// How the mean was removed, for the report.
    pub centering: Value,
}

pub fn build(config: &SystemConfig) -> CliResult<System> {
    Ok(config.build()?)
}

pub fn require_model<'a>(system: &'a System, task: &str) -> CliResult<&'a FiniteMarkovModel> {
    system.model.as_ref().ok_or_else(|| {
        CliError::input(
            "E_NEEDS_FINITE",
            format!("{task} needs a finite or ulam system; got {}", system.sampler.diagnostics().system),
        )
    })
}

/// Centers `raw` under the stationary law: exactly on finite chains, by
/// quadrature when the invariant density is known, and otherwise by a
/// seeded batch-means pre-pass whose 3-SE band is declared as the centering
/// tolerance.
pub fn prepare(config: &SystemConfig, raw: &Observable) -> CliResult<Prepared> {
    prepare_system(build(config)?, config.seed, raw)
}

/// [`prepare`] for tasks that need the exact finite model.
pub fn prepare_finite(config: &SystemConfig, raw: &Observable, task: &str) -> CliResult<Prepared> {
    let system = build(config)?;
    require_model(&system, task)?;
    prepare_system(system, config.seed, raw)
}

fn prepare_system(system: System, seed: u64, raw: &Observable) -> CliResult<Prepared> {
    raw.check_domain(system.sampler.state_kind())?;
    if let Some(model) = &system.model {
        let phi = center(raw, MeanSource::Finite(model))?;
        let profile = norm_profile(&phi, model, phi.q)?;
        return Ok(Prepared {
            centering: json!({"method": "exact", "offset": phi.offset}),
            system,
            phi,
            profile,
        });
    }
    if let Some(density) = system.density() {
        let phi = center(
            raw,
            MeanSource::Quadrature {
                density: &density,
                resolution: QUADRATURE_RESOLUTION,
                tolerance: QUADRATURE_TOLERANCE,
            },
        )?;
        let profile = norm_profile_quadrature(&phi, &density, QUADRATURE_RESOLUTION, phi.q)?;
        return Ok(Prepared {
            centering: json!({
                "method": "quadrature",
                "offset": phi.offset,
                "resolution": QUADRATURE_RESOLUTION,
                "tolerance": QUADRATURE_TOLERANCE,
            }),
            system,
            phi,
            profile,
        });
    }
    let (mean, se) = estimate_mean(&system.sampler, raw, MEAN_BATCHES, MEAN_BATCH_LEN, seed)?;
    let phi = center(
        raw,
        MeanSource::Declared {
            mean,
            tolerance: 3.0 * se,
        },
    )?;
    let mut w = system.sampler.walker(seed, u64::MAX - 1);
    let values: Vec<f64> = (0..PROFILE_SAMPLES)
        .map(|_| {
            w.step();
            phi.value(w.point())
        })
        .collect();
    let note = format!("empirical moments of {PROFILE_SAMPLES} stationary samples, seed {seed}");
    let profile = norm_profile_empirical(&values, phi.q, phi.banach_norm, note)?;
    Ok(Prepared {
        centering: json!({
            "method": "batch_means",
            "offset": mean,
            "stderr": se,
            "tolerance": 3.0 * se,
            "batches": MEAN_BATCHES,
            "batch_len": MEAN_BATCH_LEN,
        }),
        system,
        phi,
        profile,
    })
}
