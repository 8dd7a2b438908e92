use std::ops::Range;

use super::{Mode, SolverConfig};
use crate::error::{Error, Result};

/// Decides which measurement rows feed each Newton iteration.
pub trait IterationSchedule: Send + Sync {
    fn name(&self) -> &'static str;

    /// Row ranges for iterations `0, 1, ...`; the run stops when they run out.
    fn plan(&self, m: usize, config: &SolverConfig) -> Result<Vec<Range<usize>>>;
}

/// Every iteration uses all `m` rows.
#[derive(Clone, Copy, Debug, Default)]
pub struct FullBatch;

impl IterationSchedule for FullBatch {
    fn name(&self) -> &'static str {
        "fullbatch"
    }

    fn plan(&self, m: usize, config: &SolverConfig) -> Result<Vec<Range<usize>>> {
        Ok(vec![0..m; config.max_iters])
    }
}

/// Iteration `k` uses the `k`-th of `T` disjoint equal blocks, each once.
#[derive(Clone, Copy, Debug, Default)]
pub struct Resampled;

impl IterationSchedule for Resampled {
    fn name(&self) -> &'static str {
        "resampled"
    }

    fn plan(&self, m: usize, config: &SolverConfig) -> Result<Vec<Range<usize>>> {
        let mut blocks = partition_blocks(m, config.blocks)?;
        blocks.truncate(config.max_iters);
        Ok(blocks)
    }
}

/// Splits `0..m` into `t` contiguous ranges of size `m / t`.
pub fn partition_blocks(m: usize, t: usize) -> Result<Vec<Range<usize>>> {
    if t == 0 || m == 0 {
        return Err(Error::invalid(format!(
            "cannot partition m = {m} rows into T = {t} blocks"
        )));
    }
    if !m.is_multiple_of(t) {
        let suggestion = (1..=t.min(m)).rev().find(|d| m.is_multiple_of(*d)).unwrap_or(1);
        return Err(Error::invalid(format!(
            "T = {t} does not divide m = {m}; largest T' <= T dividing m is {suggestion}"
        )));
    }
    let size = m / t;
    Ok((0..t).map(|k| k * size..(k + 1) * size).collect())
}

/// Name-keyed collection of iteration schedules.
pub struct ScheduleRegistry {
    schedules: Vec<Box<dyn IterationSchedule>>,
}

impl ScheduleRegistry {
    pub fn builtin() -> Self {
        Self {
            schedules: vec![Box::new(FullBatch), Box::new(Resampled)],
        }
    }

    pub fn register(&mut self, schedule: Box<dyn IterationSchedule>) {
        self.schedules.retain(|s| s.name() != schedule.name());
        self.schedules.push(schedule);
    }

    pub fn get(&self, name: &str) -> Result<&dyn IterationSchedule> {
        self.schedules
            .iter()
            .find(|s| s.name().eq_ignore_ascii_case(name))
            .map(|s| s.as_ref())
            .ok_or_else(|| Error::invalid(format!("unknown iteration schedule `{name}`")))
    }

    pub fn for_mode(&self, mode: Mode) -> Result<&dyn IterationSchedule> {
        self.get(mode.as_str())
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.schedules.iter().map(|s| s.name()).collect()
    }
}

impl Default for ScheduleRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}
