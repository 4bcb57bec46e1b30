//! Numerical laboratory for the nonlocal reaction-dispersal equations
//!
//! ```text
//! ∂t u = J*u − u + u^{1+p}          (pure growth)
//! ∂t u = J*u − u + u^{1+p}(1 − u)   (weak Allee / logistic)
//! ```
//!
//! on a periodic box `[−L, L]^N` (`N ∈ {1, 2}`), with radial probability
//! kernels `J` whose Fourier transform behaves like `1 − A|ξ|^β` near the
//! origin. The critical exponent separating systematic blow-up from
//! small-data extinction is `p_F = β/N`.
//!
//! Module map:
//!
//! * [`kernels`]: kernel families, Fourier transforms, moments and the
//!   `(A, β)` expansion fit.
//! * [`grid`]: periodic grids, fields, FFT convolution, norms, persistence.
//! * [`semigroup`]: the exact linear flow, its series representation and
//!   the self-similar profile `G_A`.
//! * [`solver`]: Strang-split nonlinear integration with blow-up detection.
//! * [`diagnostics`]: closed-form objects (Kaplan functional and bounds,
//!   ball-shift constant, extinction and hair-trigger certificates).

pub mod diagnostics;
pub mod error;
pub mod grid;
pub mod kernels;
pub mod quadrature;
pub mod semigroup;
pub mod solver;
pub mod special;

pub use error::{Error, Result};
pub use grid::{Field, Grid, Norms};
pub use kernels::{Family, FourierExpansion, KernelSpec, SecondMoment};
pub use semigroup::DiscreteKernel;
pub use solver::{Reaction, SimOutcome, SolverConfig};
