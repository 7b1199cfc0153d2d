//! Chain-level operadic algebra for iterated loop space homology.
//!
//! The crates in this workspace compute the homology of a twisted complex
//! built from filtration stages of the Barratt-Eccles operad acting on a free
//! complete algebra on one generator. The pipeline is:
//!
//! 1. [`symm`]: symmetric group words, block substitution, pair restriction.
//! 2. [`chains`]: exact linear algebra over Z and F_p (Smith normal form,
//!    homology of finitely generated slices, canonical preimages).
//! 3. [`barratt_eccles`]: the filtered chain operads `E_n(r)` with basis
//!    enumeration, differential, translation action, and partial composites.
//! 4. [`power_series`]: order-truncated series in the free complete algebra
//!    on one degree `-m` generator, with the pre-Lie circle product.
//! 5. [`mc_solver`]: order-by-order solutions of the Maurer-Cartan equation
//!    and machine-checkable certificates.
//! 6. [`koszul_complex`]: the twisted complex, its dual, and homology reports.
//! 7. [`oracle`]: slow reference implementations kept independent of the
//!    main code paths, used by the test suite as ground truth.
//! 8. [`pipeline`]: file-producing runs shared by the CLI and the
//!    acceptance suite.

pub mod barratt_eccles;
pub mod chains;
pub mod koszul_complex;
pub mod mc_solver;
pub mod oracle;
pub mod pipeline;
pub mod power_series;
pub mod symm;

/// Bumped whenever a change alters the meaning of cached or serialized data.
pub const DEFINITION_VERSION: u32 = 1;

/// Software version recorded in certificates and reports.
pub const SOFTWARE_VERSION: &str = env!("CARGO_PKG_VERSION");
