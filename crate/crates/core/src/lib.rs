//! Local quasi shift-invariant spaces on product groups.
//!
//! The crate instantiates finite-dimensional spaces spanned by separated
//! translates of compactly supported generators on a product of two
//! concrete groups (real intervals or circles), and provides:
//!
//! * mixed-norm `L^{p,q}` / `ℓ^{p,q}` machinery on uniform grids ([`domain`]);
//! * generators, shift systems, synthesis and stability constants ([`space`]);
//! * average sampling through a kernel `ω` and Young-type verifiers ([`averaging`]);
//! * random sample draws and the centered statistic `Y` ([`sampling`]);
//! * every closed-form constant of the probabilistic sampling bounds ([`bounds`]);
//! * least-squares reconstruction from average samples ([`reconstruction`]);
//! * a seeded, trial-parallel experiment driver ([`harness`]).

pub mod averaging;
pub mod bounds;
pub mod domain;
pub mod error;
pub mod harness;
pub mod reconstruction;
pub mod rng;
pub mod sampling;
pub mod space;

pub use averaging::{AveragedSynthesis, AveragingKernel, Evaluate};
pub use bounds::{BoundInputs, Lemma31Bound, Thm32Report, Thm33Report};
pub use domain::{Axis, AxisKind, AxisRange, GridFunction, MixedExponents, ProductDomain, Region};
pub use error::{Error, Result};
pub use reconstruction::{DualSystem, ReconstructionReport, SampleMatrix};
pub use sampling::{SampleSet, SamplingDensity, SamplingMode};
pub use space::{CoefficientArray, GeneratorSet, QsisSpace, ShiftSystem, SpaceAnalysis};
