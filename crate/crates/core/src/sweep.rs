//! One-parameter sweeps: independent runs dispatched in parallel, merged in input order.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Result, SimError};
use crate::scenario::{expand_preset, with_overrides, Override, PresetId, ScenarioConfig, SWEEPABLE};
use crate::sim::{run, RunResult};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesRow {
    pub value: String,
    pub result: RunResult,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Series {
    pub scenario: String,
    pub parameter: String,
    pub rows: Vec<SeriesRow>,
}

/// Source of the per-value configurations.
#[derive(Debug, Clone)]
pub enum SweepBase {
    Preset(PresetId, Vec<Override>),
    Config(Box<ScenarioConfig>),
}

impl SweepBase {
    fn name(&self) -> String {
        match self {
            SweepBase::Preset(p, _) => p.name().to_string(),
            SweepBase::Config(c) => c.name.clone(),
        }
    }

    /// Configuration of one sweep point; the swept value wins over any base override
    /// of the same key.
    pub fn point(&self, parameter: &str, value: &str) -> Result<ScenarioConfig> {
        let ov = Override {
            key: parameter.to_string(),
            value: value.to_string(),
        };
        match self {
            SweepBase::Preset(p, base) => {
                let mut all: Vec<Override> = base.iter().filter(|o| o.key != parameter).cloned().collect();
                all.push(ov);
                expand_preset(*p, &all)
            }
            SweepBase::Config(c) => with_overrides((**c).clone(), &[ov]),
        }
    }
}

pub fn sweep(base: &SweepBase, parameter: &str, values: &[String]) -> Result<Series> {
    let parameter = parameter.trim().replace('-', "_");
    if !SWEEPABLE.contains(&parameter.as_str()) {
        return Err(SimError::config(format!(
            "{parameter:?} is not sweepable; expected one of {}",
            SWEEPABLE.join(", ")
        )));
    }
    if values.is_empty() {
        return Err(SimError::config("sweep needs at least one value"));
    }
    // validate everything before running anything
    let configs = values
        .iter()
        .map(|v| base.point(&parameter, v))
        .collect::<Result<Vec<_>>>()?;
    let results = configs.par_iter().map(run).collect::<Result<Vec<_>>>()?;
    Ok(Series {
        scenario: base.name(),
        parameter,
        rows: values
            .iter()
            .zip(results)
            .map(|(v, result)| SeriesRow {
                value: v.clone(),
                result,
            })
            .collect(),
    })
}
