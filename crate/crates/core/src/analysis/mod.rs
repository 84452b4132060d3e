//! Traces, averaging over seeds, and convergence-rate instrumentation.

mod rate;
mod trace;

pub use rate::{
    check_bound, fit_rate, riemannian_envelope_constant, BoundConstant, BoundReport, RateFit, DEFAULT_ANCHOR,
    LOG_FLOOR, MAX_FIT_POINTS,
};
pub use trace::{format_value, Abort, Column, Record, Trace, TraceMeta, CSV_HEADER};

use nalgebra::DVector;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Lyapunov energy `f(x_k) − f(x*) + ½|x_k − x*|²` of one record.
pub fn energy(record: &Record, x_star: &DVector<f64>) -> Result<f64> {
    let gap = record.gap.ok_or(Error::MissingField("gap"))?;
    let x = record.x.as_ref().ok_or(Error::MissingField("x"))?;
    if x.len() != x_star.len() {
        return Err(Error::DimensionMismatch { expected: x_star.len(), found: x.len() });
    }
    Ok(gap + 0.5 * (x - x_star).norm_squared())
}

/// Energy of every record in `trace`, as a `(k, E_k)` series.
pub fn energy_series(trace: &Trace, x_star: &DVector<f64>) -> Result<Vec<(usize, f64)>> {
    trace.records.iter().map(|r| Ok((r.k, energy(r, x_star)?))).collect()
}

/// Running pointwise mean of equally shaped traces.
///
/// Uses the update `m ← m + (v − m)/n`, which leaves the mean of identical
/// inputs bit-identical to the input.
#[derive(Clone, Debug, Default)]
pub struct MeanAccumulator {
    mean: Option<Trace>,
    count: usize,
}

impl MeanAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn add(&mut self, trace: &Trace) -> Result<()> {
        if let Some(abort) = &trace.abort {
            return Err(Error::TraceMismatch(format!(
                "run {:?} aborted at k = {}: {}",
                trace.meta.seeds, abort.k, abort.reason
            )));
        }
        self.count += 1;
        let Some(mean) = self.mean.as_mut() else {
            let mut first = trace.clone();
            for r in &mut first.records {
                r.x = None;
                r.xi = None;
            }
            self.mean = Some(first);
            return Ok(());
        };
        if mean.meta.config != trace.meta.config {
            return Err(Error::TraceMismatch("traces come from different configurations".into()));
        }
        if mean.records.len() != trace.records.len() {
            return Err(Error::TraceMismatch(format!(
                "trace lengths differ: {} vs {}",
                mean.records.len(),
                trace.records.len()
            )));
        }
        let n = self.count as f64;
        let step = |m: &mut f64, v: f64| *m += (v - *m) / n;
        let step_opt = |m: &mut Option<f64>, v: Option<f64>, name: &str| -> Result<()> {
            match (m.as_mut(), v) {
                (Some(m), Some(v)) => {
                    *m += (v - *m) / n;
                    Ok(())
                }
                (None, None) => Ok(()),
                _ => Err(Error::TraceMismatch(format!("{name} is set in some traces only"))),
            }
        };
        for (m, r) in mean.records.iter_mut().zip(&trace.records) {
            if m.k != r.k {
                return Err(Error::TraceMismatch(format!("iteration index differs: {} vs {}", m.k, r.k)));
            }
            step(&mut m.f_value, r.f_value);
            step(&mut m.grad_norm, r.grad_norm);
            step(&mut m.alpha, r.alpha);
            step(&mut m.beta, r.beta);
            step_opt(&mut m.gap, r.gap, "gap")?;
            step_opt(&mut m.dist_to_opt, r.dist_to_opt, "dist_to_opt")?;
        }
        mean.meta.seeds.extend_from_slice(&trace.meta.seeds);
        Ok(())
    }

    pub fn finish(self) -> Result<Trace> {
        self.mean.ok_or_else(|| Error::TraceMismatch("no traces to average".into()))
    }
}

/// Pointwise mean of `traces`, merged in ascending seed order.
pub fn mean_trace(traces: &[Trace]) -> Result<Trace> {
    let mut ordered: Vec<&Trace> = traces.iter().collect();
    ordered.sort_by_key(|t| t.meta.seeds.first().copied());
    let mut acc = MeanAccumulator::new();
    for t in ordered {
        acc.add(t)?;
    }
    acc.finish()
}

/// Runs `run` once per seed, up to `threads` at a time, and hands each trace
/// to `visit` in ascending seed order regardless of scheduling.
pub fn sweep<F, V>(seeds: &[u64], threads: Option<usize>, run: F, mut visit: V) -> Result<()>
where
    F: Fn(u64) -> Result<Trace> + Sync,
    V: FnMut(Trace) -> Result<()>,
{
    let mut seeds = seeds.to_vec();
    seeds.sort_unstable();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n.max(1));
    }
    let pool = builder.build().map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    let batch = pool.current_num_threads() * 4;
    for chunk in seeds.chunks(batch) {
        let traces: Vec<Result<Trace>> = pool.install(|| chunk.par_iter().map(|s| run(*s)).collect());
        for t in traces {
            visit(t?)?;
        }
    }
    Ok(())
}

/// Mean trace over `seeds`; the Monte Carlo estimate of `E[·]` per iterate.
pub fn monte_carlo_mean<F>(seeds: &[u64], threads: Option<usize>, run: F) -> Result<Trace>
where
    F: Fn(u64) -> Result<Trace> + Sync,
{
    let mut acc = MeanAccumulator::new();
    sweep(seeds, threads, run, |t| acc.add(&t))?;
    acc.finish()
}
