//! Statistics over walker ensembles: binned densities, shape comparison,
//! and summary statistics for traversal-time samples.

use crate::dynamics::PathTimes;
use crate::error::{NelsonError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub cells: usize,
}

impl GridSpec {
    pub fn new(lo: f64, hi: f64, cells: usize) -> Result<Self> {
        if !(hi > lo) || cells < 2 {
            return Err(NelsonError::InvalidSpec {
                field: "grid",
                message: format!("bad grid [{lo}, {hi}] with {cells} cells"),
            });
        }
        Ok(GridSpec { lo, hi, cells })
    }

    pub fn cell_width(&self) -> f64 {
        (self.hi - self.lo) / self.cells as f64
    }

    pub fn center(&self, i: usize) -> f64 {
        self.lo + (i as f64 + 0.5) * self.cell_width()
    }

    pub fn cell_of(&self, x: f64) -> Option<usize> {
        if x < self.lo || x >= self.hi {
            return None;
        }
        let i = ((x - self.lo) / self.cell_width()) as usize;
        Some(i.min(self.cells - 1))
    }
}

/// A density tabulated at cell centers, in probability per unit length.
#[derive(Debug, Clone)]
pub struct GridDensity {
    pub grid: GridSpec,
    pub values: Vec<f64>,
}

impl GridDensity {
    /// Bin samples; each sample contributes 1/(n h) to its cell, so the
    /// grid mass equals the fraction of samples inside the window.
    pub fn from_samples(grid: GridSpec, xs: &[f64]) -> Result<Self> {
        if xs.is_empty() {
            return Err(NelsonError::EmptyEnsemble);
        }
        let mut counts = vec![0u64; grid.cells];
        for &x in xs {
            if let Some(i) = grid.cell_of(x) {
                counts[i] += 1;
            }
        }
        let norm = 1.0 / (xs.len() as f64 * grid.cell_width());
        Ok(GridDensity {
            grid,
            values: counts.iter().map(|&c| c as f64 * norm).collect(),
        })
    }

    pub fn from_function(grid: GridSpec, mut f: impl FnMut(f64) -> f64) -> Self {
        GridDensity {
            grid,
            values: (0..grid.cells).map(|i| f(grid.center(i)).max(0.0)).collect(),
        }
    }

    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_width()
    }

    /// Rescale to unit mass. A zero-mass density stays zero.
    pub fn normalized(&self) -> GridDensity {
        let m = self.mass();
        if m <= 0.0 {
            return self.clone();
        }
        GridDensity {
            grid: self.grid,
            values: self.values.iter().map(|v| v / m).collect(),
        }
    }
}

/// L1 distance between the unit-normalized shapes of two densities on the
/// same grid: 0 for identical shapes, 2 for disjoint supports.
pub fn l1_shape_distance(a: &GridDensity, b: &GridDensity) -> Result<f64> {
    if a.grid != b.grid {
        return Err(NelsonError::GridMismatch);
    }
    let (na, nb) = (a.normalized(), b.normalized());
    Ok(na
        .values
        .iter()
        .zip(&nb.values)
        .map(|(x, y)| (x - y).abs())
        .sum::<f64>()
        * a.grid.cell_width())
}

pub fn sample_mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Mean, sample standard deviation, and standard error of the mean.
pub fn mean_std_sem(xs: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mean = sample_mean(xs);
    if xs.len() < 2 {
        return (mean, 0.0, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    let std = var.sqrt();
    (mean, std, std / n.sqrt())
}

/// A grid centered on the sample mean, n_sigma sample deviations wide.
pub fn grid_from_moments(xs: &[f64], cells: usize, n_sigma: f64) -> Result<GridSpec> {
    if xs.is_empty() {
        return Err(NelsonError::EmptyEnsemble);
    }
    let (mean, std, _) = mean_std_sem(xs);
    let half = (n_sigma * std).max(1e-9);
    GridSpec::new(mean - half, mean + half, cells)
}

/// Summary statistics over the crossed paths of a first-passage ensemble.
#[derive(Debug, Clone, Copy)]
pub struct TimeStatistics {
    pub n_total: usize,
    pub n_crossed: usize,
    /// Occupation time to first crossing (the traversal clock).
    pub mean_to_cross: f64,
    pub sem_to_cross: f64,
    /// Total occupation time, re-entries included.
    pub mean_total: f64,
    pub sem_total: f64,
    /// Difference path by path; nonnegative by construction.
    pub mean_reentry: f64,
    pub sem_reentry: f64,
    /// Wall-clock time from release to first crossing.
    pub mean_elapsed: f64,
    pub sem_elapsed: f64,
}

impl TimeStatistics {
    pub fn from_paths(paths: &[PathTimes]) -> Result<Self> {
        let crossed: Vec<&PathTimes> = paths.iter().filter(|p| p.crossed).collect();
        if crossed.is_empty() {
            return Err(NelsonError::EmptyEnsemble);
        }
        let col = |f: fn(&PathTimes) -> f64| -> Vec<f64> { crossed.iter().map(|p| f(p)).collect() };
        let to_cross = col(|p| p.occupation_to_cross);
        let total = col(|p| p.occupation_total);
        let reentry: Vec<f64> = to_cross
            .iter()
            .zip(&total)
            .map(|(a, b)| b - a)
            .collect();
        let elapsed = col(|p| p.elapsed_to_cross);
        let (m1, _, s1) = mean_std_sem(&to_cross);
        let (m2, _, s2) = mean_std_sem(&total);
        let (m3, _, s3) = mean_std_sem(&reentry);
        let (m4, _, s4) = mean_std_sem(&elapsed);
        Ok(TimeStatistics {
            n_total: paths.len(),
            n_crossed: crossed.len(),
            mean_to_cross: m1,
            sem_to_cross: s1,
            mean_total: m2,
            sem_total: s2,
            mean_reentry: m3,
            sem_reentry: s3,
            mean_elapsed: m4,
            sem_elapsed: s4,
        })
    }

    pub fn crossed_fraction(&self) -> f64 {
        self.n_crossed as f64 / self.n_total as f64
    }
}

/// Histogram with the Freedman-Diaconis bin width 2 IQR / n^(1/3),
/// clamped to at most 256 bins.
#[derive(Debug, Clone)]
pub struct TimeHistogram {
    pub lo: f64,
    pub width: f64,
    pub counts: Vec<u64>,
}

pub fn fd_histogram(xs: &[f64]) -> Result<TimeHistogram> {
    if xs.is_empty() {
        return Err(NelsonError::EmptyEnsemble);
    }
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let q = |p: f64| -> f64 {
        let idx = p * (n - 1) as f64;
        let i = idx.floor() as usize;
        let frac = idx - i as f64;
        if i + 1 < n {
            sorted[i] * (1.0 - frac) + sorted[i + 1] * frac
        } else {
            sorted[n - 1]
        }
    };
    let iqr = q(0.75) - q(0.25);
    let span = sorted[n - 1] - sorted[0];
    let width = if iqr > 0.0 {
        2.0 * iqr / (n as f64).cbrt()
    } else if span > 0.0 {
        span / 16.0
    } else {
        1.0
    };
    let bins = ((span / width).ceil() as usize + 1).clamp(1, 256);
    let width = if span > 0.0 { span / bins as f64 } else { width };
    let lo = sorted[0];
    let mut counts = vec![0u64; bins];
    for &x in &sorted {
        let i = (((x - lo) / width) as usize).min(bins - 1);
        counts[i] += 1;
    }
    Ok(TimeHistogram { lo, width, counts })
}

/// Free diffusion time across a length: the time for the process noise
/// variance (hbar/m) t to reach l^2.
pub fn diffusion_time(l: f64, m: f64, hbar: f64) -> f64 {
    l * l * m / hbar
}
