//! Nearest-neighbour ferromagnetic energies on planar Poisson-Voronoi
//! tessellations, and the first-passage hop metric whose linear growth rate
//! gives the surface tension of the limiting perimeter functional.
//!
//! The pipeline is: sample a Poisson point process in a buffered window
//! ([`geometry`]), assign spins and measure interface energies ([`spin`]),
//! measure hop distances on the Voronoi graph and estimate the surface
//! tension ([`metric`]), classify regular cells and their percolation
//! clusters ([`regular`]), compare cell unions with lattice polyominoes and
//! decompose interface contours ([`polyomino`]), and run the end-to-end
//! energy-versus-perimeter experiments ([`gamma`]).

pub mod cli;
pub mod error;
pub mod gamma;
pub mod geom;
pub mod geometry;
pub mod metric;
pub mod polyomino;
pub mod regular;
pub mod spin;
pub mod tess_io;
pub mod util;

pub use error::{Error, Result};
