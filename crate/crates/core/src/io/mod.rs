//! File output: CSV tables and legacy VTK fields.

mod csv;
mod vtk;

pub use csv::{format_float, Table, Value};
pub use vtk::{render_vtk, write_vtk, VtkField};
