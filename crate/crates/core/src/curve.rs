//! Learning curves: per-iteration mean-square deviation, local and global.

use std::io::{self, Write};

use crate::error::{Error, Result};

/// Where a curve came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveSource {
    /// Averaged over `runs` independent simulation runs seeded from `seed`.
    Simulation { runs: usize, seed: u64 },
    /// Iterated moment recursions.
    Theory,
}

/// Per-node MSD trajectories (linear scale) plus their node average.
///
/// Sample `i` is the deviation of the weight state at time `i`; index 0 is
/// the initial condition, so a run of `iters` updates yields `iters + 1`
/// samples.
#[derive(Debug, Clone, PartialEq)]
pub struct LearningCurve {
    pub source: CurveSource,
    local: Vec<Vec<f64>>,
    global: Vec<f64>,
}

impl LearningCurve {
    /// Build from per-node trajectories; the global curve is their average.
    pub fn new(local: Vec<Vec<f64>>, source: CurveSource) -> Self {
        assert!(!local.is_empty(), "curve needs at least one node");
        let samples = local[0].len();
        assert!(local.iter().all(|c| c.len() == samples));
        let n = local.len() as f64;
        let global = (0..samples)
            .map(|i| local.iter().map(|c| c[i]).sum::<f64>() / n)
            .collect();
        Self {
            source,
            local,
            global,
        }
    }

    pub fn node_count(&self) -> usize {
        self.local.len()
    }

    /// Number of recorded samples (`iters + 1`).
    pub fn samples(&self) -> usize {
        self.global.len()
    }

    pub fn local(&self, k: usize) -> &[f64] {
        &self.local[k]
    }

    pub fn global(&self) -> &[f64] {
        &self.global
    }

    /// CSV export: `iter,msd_global_db,msd_node1_db,...`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        write!(w, "iter,msd_global_db")?;
        for k in 0..self.node_count() {
            write!(w, ",msd_node{}_db", k + 1)?;
        }
        writeln!(w)?;
        for i in 0..self.samples() {
            write!(w, "{},{}", i, db(self.global[i]))?;
            for c in &self.local {
                write!(w, ",{}", db(c[i]))?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Linear power to decibels: `10 log10(x)`.
pub fn db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

/// Steady-state MSD estimates from the tail of a learning curve.
#[derive(Debug, Clone, PartialEq)]
pub struct SteadyStateEstimate {
    /// Per-node tail averages (linear).
    pub local: Vec<f64>,
    /// Node average of the locals.
    pub global: f64,
    pub window: usize,
}

/// Average the last `window` samples of each local curve.
pub fn steady_state_estimate(curve: &LearningCurve, window: usize) -> Result<SteadyStateEstimate> {
    if window == 0 {
        return Err(Error::InvalidParameter(
            "steady-state window must be >= 1".into(),
        ));
    }
    let available = curve.samples();
    if window > available {
        return Err(Error::WindowTooLarge { window, available });
    }
    let local: Vec<f64> = (0..curve.node_count())
        .map(|k| {
            let c = curve.local(k);
            c[available - window..].iter().sum::<f64>() / window as f64
        })
        .collect();
    let global = local.iter().sum::<f64>() / local.len() as f64;
    Ok(SteadyStateEstimate {
        local,
        global,
        window,
    })
}
