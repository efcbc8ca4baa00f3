//! Composite Simpson quadrature on breakpoint-aligned uniform grids.
//!
//! Each protocol segment gets its own uniform subgrid whose interval count
//! is a multiple of four, so that the same samples also form a valid coarse
//! Simpson grid (every other point). The difference between the two rules
//! gives the Richardson error estimate `|I_h − I_{2h}| / 15`.

use crate::error::{Error, Result};

/// Smallest accepted total interval count.
pub const MIN_GRID: usize = 16;

pub fn check_grid(grid: usize) -> Result<()> {
    if grid < MIN_GRID || !grid.is_power_of_two() {
        return Err(Error::Config(format!("grid must be a power of two >= {MIN_GRID}, got {grid}")));
    }
    Ok(())
}

/// Composite Simpson over equally spaced samples (odd count, at least 3).
pub fn simpson(values: &[f64], step: f64) -> f64 {
    let n = values.len();
    assert!(n >= 3 && n % 2 == 1, "Simpson needs an odd number of samples >= 3, got {n}");
    let mut odd = 0.0;
    let mut even = 0.0;
    for (i, v) in values.iter().enumerate().take(n - 1).skip(1) {
        if i % 2 == 1 {
            odd += v;
        } else {
            even += v;
        }
    }
    step / 3.0 * (values[0] + values[n - 1] + 4.0 * odd + 2.0 * even)
}

/// Uniform subgrid of one segment.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentGrid {
    pub start: f64,
    pub end: f64,
    pub intervals: usize,
}

impl SegmentGrid {
    pub fn step(&self) -> f64 {
        (self.end - self.start) / self.intervals as f64
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        let h = self.step();
        (0..=self.intervals).map(move |i| if i == self.intervals { self.end } else { self.start + h * i as f64 })
    }
}

/// Split `grid` intervals over segments proportionally to their length,
/// rounding each to a multiple of four (at least four).
pub fn segment_grids(bounds: &[(f64, f64)], grid: usize) -> Vec<SegmentGrid> {
    bounds
        .iter()
        .map(|&(start, end)| {
            let share = grid as f64 * (end - start) / 4.0;
            let intervals = 4 * (share.round() as usize).max(1);
            SegmentGrid { start, end, intervals }
        })
        .collect()
}

/// Integral and Richardson error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Integrated {
    pub value: f64,
    pub error: f64,
}

/// Integrate per-segment samples. `samples[k]` holds the values on the
/// points of `grids[k]`.
pub fn integrate(grids: &[SegmentGrid], samples: &[Vec<f64>]) -> Integrated {
    let mut fine = 0.0;
    let mut coarse = 0.0;
    for (g, ys) in grids.iter().zip(samples) {
        debug_assert_eq!(ys.len(), g.intervals + 1);
        fine += simpson(ys, g.step());
        let half: Vec<f64> = ys.iter().step_by(2).copied().collect();
        coarse += simpson(&half, 2.0 * g.step());
    }
    Integrated { value: fine, error: (fine - coarse).abs() / 15.0 }
}
