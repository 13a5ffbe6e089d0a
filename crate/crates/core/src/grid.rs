//! Time and epsilon grids used by the sweep operations.

use serde::{Deserialize, Serialize};

use crate::error::{KamError, Result};

/// Golden-ratio conjugate, the classic low-discrepancy increment.
const GOLDEN_FRAC: f64 = 0.618_033_988_749_894_9;

/// A finite set of times approximating `sup_t` from below.
#[derive(Debug, Clone)]
pub struct TimeGrid {
    points: Vec<f64>,
}

impl TimeGrid {
    pub fn from_points(points: Vec<f64>) -> Self {
        Self { points }
    }

    /// `n` uniform points on `[0, t_max]` (endpoints included).
    pub fn uniform(t_max: f64, n: usize) -> Self {
        let points = if n <= 1 {
            vec![0.0]
        } else {
            (0..n).map(|i| t_max * i as f64 / (n - 1) as f64).collect()
        };
        Self { points }
    }

    /// `n` golden-ratio-spaced points on `[0, t_max]`: `t_j = t_max * frac(j*phi)`.
    ///
    /// Low-discrepancy and incommensurate with any uniform step, which keeps
    /// quasi-periodic recurrences from aliasing against the grid.
    pub fn golden(t_max: f64, n: usize) -> Self {
        let points = (1..=n)
            .map(|j| t_max * (j as f64 * GOLDEN_FRAC).fract())
            .collect();
        Self { points }
    }

    /// Union of a uniform and a golden grid, plus `t = 0`.
    pub fn mixed(t_max: f64, n_uniform: usize, n_golden: usize) -> Self {
        let mut points = Vec::with_capacity(n_uniform + n_golden + 1);
        points.push(0.0);
        points.extend(Self::uniform(t_max, n_uniform).points);
        points.extend(Self::golden(t_max, n_golden).points);
        Self { points }
    }

    /// Default horizon for gap `eta`: 2048 uniform + 2048 golden points on
    /// `[0, 200/eta]`.
    pub fn default_for_gap(eta: f64) -> Self {
        let t_max = if eta.is_finite() && eta > 0.0 {
            200.0 / eta
        } else {
            200.0
        };
        Self::mixed(t_max, 2048, 2048)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn max_time(&self) -> f64 {
        self.points.iter().cloned().fold(0.0, f64::max)
    }
}

/// Epsilon sweep specification `start:stop:points[:log]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsGrid {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
    #[serde(default)]
    pub log: bool,
}

impl EpsGrid {
    pub fn new(start: f64, stop: f64, points: usize, log: bool) -> Result<Self> {
        if points == 0 {
            return Err(KamError::EmptyGrid);
        }
        if log && (start <= 0.0 || stop <= 0.0) {
            return Err(KamError::InvalidParameter(
                "log grid requires positive endpoints".into(),
            ));
        }
        Ok(Self {
            start,
            stop,
            points,
            log,
        })
    }

    /// Parse `start:stop:points[:log]`.
    pub fn parse(spec: &str) -> Result<Self> {
        let parts: Vec<&str> = spec.split(':').collect();
        if parts.len() != 3 && parts.len() != 4 {
            return Err(KamError::InvalidParameter(format!(
                "grid spec must be start:stop:points[:log], got {spec:?}"
            )));
        }
        let bad =
            |what: &str| KamError::InvalidParameter(format!("grid spec {spec:?}: bad {what}"));
        let start: f64 = parts[0].parse().map_err(|_| bad("start"))?;
        let stop: f64 = parts[1].parse().map_err(|_| bad("stop"))?;
        let points: usize = parts[2].parse().map_err(|_| bad("points"))?;
        let log = match parts.get(3) {
            None => false,
            Some(&"log") => true,
            Some(&"linear") => false,
            Some(_) => return Err(bad("scale (expected log or linear)")),
        };
        Self::new(start, stop, points, log)
    }

    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.start];
        }
        let n = self.points;
        if self.log {
            let (a, b) = (self.start.ln(), self.stop.ln());
            (0..n)
                .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
                .collect()
        } else {
            (0..n)
                .map(|i| self.start + (self.stop - self.start) * i as f64 / (n - 1) as f64)
                .collect()
        }
    }
}

impl std::fmt::Display for EpsGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{}:{}:{}{}",
            self.start,
            self.stop,
            self.points,
            if self.log { ":log" } else { "" }
        )
    }
}
