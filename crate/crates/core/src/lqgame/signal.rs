use crate::error::{GbcsError, Result};
use crate::linalg::grid_time;

/// Scalar input sampled on a uniform grid over `[0, horizon]`, linearly
/// interpolated between nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    horizon: f64,
    samples: Vec<f64>,
}

impl Signal {
    pub fn new(horizon: f64, samples: Vec<f64>) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(GbcsError::InvalidArgument(
                "signal horizon must be positive".into(),
            ));
        }
        if samples.len() < 2 {
            return Err(GbcsError::InvalidArgument(
                "signal needs at least two samples".into(),
            ));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(GbcsError::NonFinite("signal sample".into()));
        }
        Ok(Signal { horizon, samples })
    }

    pub fn constant(horizon: f64, value: f64) -> Result<Self> {
        Signal::new(horizon, vec![value, value])
    }

    pub fn from_fn(horizon: f64, intervals: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let samples = (0..=intervals)
            .map(|k| f(grid_time(0.0, horizon, intervals, k)))
            .collect();
        Signal::new(horizon, samples)
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn intervals(&self) -> usize {
        self.samples.len() - 1
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    /// Value at `t`, clamped to the sampled range.
    pub fn value(&self, t: f64) -> f64 {
        let m = self.intervals();
        let x = (t / self.horizon * m as f64).clamp(0.0, m as f64);
        let k = (x.floor() as usize).min(m - 1);
        let frac = x - k as f64;
        let (a, b) = (self.samples[k], self.samples[k + 1]);
        a + (b - a) * frac
    }

    pub fn is_zero(&self) -> bool {
        self.samples.iter().all(|&v| v == 0.0)
    }
}
