//! Shared fixtures for the criterion benches in `benches/`.

use bimor_core::examples::{heat_transfer, illustrative_7};
use bimor_core::{BilinearSystem, TimeBand};

pub fn illustrative() -> BilinearSystem {
    illustrative_7()
}

/// Heat model on a `k x k` grid, small enough to iterate on quickly.
pub fn small_heat(k: usize) -> BilinearSystem {
    heat_transfer(k).expect("grid size is valid")
}

pub fn window() -> TimeBand {
    TimeBand::up_to(0.5)
}
