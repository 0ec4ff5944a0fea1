//! One run per parameter value, fanned out over the rayon pool, plus a summary
//! table of final-time observables.

use std::path::Path;

use rayon::prelude::*;
use serde_json::Value;

use crate::config::RunConfig;
use crate::error::{RunError, RunResult};
use crate::io::{self, num, opt, Table};
use crate::runner::{run, RunOutcome};

/// Parameters a sweep may touch: numeric chain fields and trajectory settings.
const SWEEPABLE: &[&str] = &["chain", "trajectories"];

/// Returns a copy of `cfg` with the dotted `path` set to `value`.
pub fn with_param(cfg: &RunConfig, path: &str, value: f64) -> RunResult<RunConfig> {
    let mut doc = serde_json::to_value(cfg).expect("config serializes");
    let parts: Vec<&str> = path.split('.').collect();
    if parts.len() < 2 || !SWEEPABLE.contains(&parts[0]) {
        return Err(RunError::config("param", format!("`{path}` is not a chain or trajectories field")));
    }
    let pointer = format!("/{}", parts.join("/"));
    let slot = doc
        .pointer_mut(&pointer)
        .ok_or_else(|| RunError::config("param", format!("unknown parameter `{path}`")))?;
    let numeric = slot.is_number() || slot.as_array().is_some_and(|a| a.iter().all(Value::is_number));
    if !numeric {
        return Err(RunError::config("param", format!("`{path}` is not numeric")));
    }
    *slot = if slot.is_u64() {
        if value < 0.0 || value.fract() != 0.0 {
            return Err(RunError::config("param", format!("`{path}` needs a non-negative integer")));
        }
        Value::from(value as u64)
    } else {
        serde_json::Number::from_f64(value)
            .map(Value::Number)
            .ok_or_else(|| RunError::config("values", "non-finite value"))?
    };
    let text = doc.to_string();
    RunConfig::from_json(&text)
}

#[derive(Clone, Debug)]
pub struct SweepOutcome {
    pub runs: Vec<(f64, RunOutcome)>,
    pub verdict: Option<bool>,
}

pub fn sweep(cfg: &RunConfig, path: &str, values: &[f64], out: &Path) -> RunResult<SweepOutcome> {
    if values.is_empty() {
        return Err(RunError::config("values", "no values given"));
    }
    let configs = values
        .iter()
        .map(|&v| with_param(cfg, path, v))
        .collect::<RunResult<Vec<_>>>()?;
    for c in &configs {
        c.resolve()?;
    }
    let results: Vec<RunResult<RunOutcome>> = configs
        .par_iter()
        .enumerate()
        .map(|(i, c)| run(c, &out.join(format!("run_{i:03}"))))
        .collect();
    let mut runs = Vec::with_capacity(values.len());
    for (v, r) in values.iter().zip(results) {
        runs.push((*v, r?));
    }

    let cols = [
        "index",
        "value",
        "t_final",
        "mean_n_final",
        "max_dev_from_uniform",
        "max_oracle_deviation",
        "max_se",
        "final_distance",
        "verdict",
    ];
    let mut table = Table::new(io::SWEEP_SCHEMA, cols.iter().map(|s| s.to_string()).collect());
    let mut verdict = None;
    for (i, (v, r)) in runs.iter().enumerate() {
        let n = &r.final_populations;
        let mean = n.iter().sum::<f64>() / n.len() as f64;
        let dev = n.iter().map(|x| (x - mean).abs()).fold(0.0, f64::max);
        let get = |k: &str| r.summary.get(k).and_then(Value::as_f64);
        if let Some(p) = r.verdict {
            verdict = Some(verdict.unwrap_or(true) && p);
        }
        table.push(vec![
            i.to_string(),
            num(*v),
            num(r.final_time),
            num(mean),
            num(dev),
            opt(get("max_oracle_deviation")),
            opt(get("max_se")),
            opt(get("final_distance")),
            r.verdict.map(|b| b.to_string()).unwrap_or_default(),
        ]);
    }
    io::write_file(&out.join("summary.csv"), &table.render())?;
    Ok(SweepOutcome { runs, verdict })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> RunConfig {
        RunConfig::from_json(
            r#"{"schema_version": 1, "chain": {"sites": 3, "gamma": 1.0},
                "initial_state": {"type": "single_excitation", "site": 1},
                "engine": "oracle", "time": {"end": 1.0, "points": 3},
                "trajectories": {"count": 10, "dt": 0.01}}"#,
        )
        .unwrap()
    }

    #[test]
    fn sets_numeric_fields() {
        let c = with_param(&base(), "chain.gamma_r", 10.0).unwrap();
        assert_eq!(c.chain.gamma_r, crate::config::Rates::Uniform(10.0));
        let c = with_param(&base(), "trajectories.count", 500.0).unwrap();
        assert_eq!(c.trajectories.unwrap().count, 500);
        let c = with_param(&base(), "chain.sites", 5.0).unwrap();
        assert_eq!(c.chain.sites, 5);
    }

    #[test]
    fn unknown_paths_are_config_errors() {
        for p in ["chain.nope", "engine", "time.end", "trajectories.order", "chain.count.x"] {
            let e = with_param(&base(), p, 1.0).unwrap_err();
            assert_eq!(e.exit_code(), 1, "{p}");
        }
        assert!(with_param(&base(), "trajectories.count", 2.5).is_err());
    }
}
