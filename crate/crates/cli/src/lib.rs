//! Report types shared by the `imax` binary and its tests.

pub mod report;
