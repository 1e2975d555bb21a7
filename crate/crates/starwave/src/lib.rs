//! Scattering theory for Schrodinger operators -d^2/dx^2 + V on a star-shaped
//! network with Kirchhoff vertex conditions: Jost functions, generalized
//! eigenfunctions, the resolvent kernel, spectral propagation of e^{itH},
//! the high-frequency Born series and a non-dispersive chain network.

pub mod born;
#[cfg(feature = "cli")]
pub mod cli;
pub mod error;
pub mod jost;
pub mod netmodel;
pub mod neteigen;
pub mod numerics;
pub mod propagate;
pub mod resolvent;
pub mod verify;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;

/// Map over a slice, in parallel when the `parallel` feature is on.
pub fn par_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}
