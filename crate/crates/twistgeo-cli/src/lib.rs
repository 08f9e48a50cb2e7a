//! Geometry-spec ingestion, expression parsing and residual reports for
//! the `twistgeo` command-line tool.

#![allow(clippy::needless_range_loop)]

pub mod expr;
pub mod geofile;
pub mod report;
