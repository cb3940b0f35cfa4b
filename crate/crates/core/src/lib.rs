//! Dense fluid motion estimation from image sequences.
//!
//! A variational optical-flow predictor produces bidirectional flow for each
//! image pair; a physical corrector blends it with an advection-diffusion
//! forecast of the previous velocity. The [`sim`] module generates
//! incompressible ground truth and particle images for evaluation.

pub mod correct;
pub mod error;
pub mod eval;
pub mod fields;
pub mod io;
pub mod optim;
pub mod predict;
pub mod sim;
pub mod warp;

pub use error::{Error, ErrorKind, Result};
pub use fields::{ScalarField2D, VectorField2D};
pub use correct::{correct_step, train_corrector, CorrectorParams, GammaParams, GateParams};
pub use eval::{aae, aepe, MetricReport};
pub use predict::{estimate_variational, FlowPair, PredictorConfig};
pub use sim::{SimConfig, SimState};
pub use warp::{warp_bilinear, warp_gaussian, Direction, WarpConfig};
