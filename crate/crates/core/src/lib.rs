//! Exact piecewise-linear interval maps, their set-valued compositions, and
//! entropy bounds for maps on inverse limits of intervals.

pub mod branch;
pub mod entropy;
pub mod families;
pub mod invlim;
pub mod plmap;
pub mod relation;
pub mod rat;

pub use plmap::{Interval, PLMap, PlError};
pub use rat::{r, Rat};
