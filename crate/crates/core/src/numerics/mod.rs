//! Small solver toolkit used by the placement and association steps.

mod assignment;
mod discs;
mod fractional;
mod pattern;
mod scalar;

pub use assignment::{hungarian, Assignment};
pub use discs::{maximize_over_discs, project_discs, Ascent, DiscConstraintSet};
pub use fractional::{dinkelbach_select, FractionalInstance, FractionalSolution};
pub use pattern::{pattern_search_max, PatternOptions};
pub use scalar::{bisect_root, golden_section_max, golden_section_trace, grid_max};
