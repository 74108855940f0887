//! Dense linear algebra, small MLPs with reverse- and forward-mode
//! derivatives, and a conjugate-gradient solver.

mod cg;
mod dense;
mod mlp;

pub use cg::conjugate_gradient;
pub use dense::DenseMatrix;
pub use mlp::{
    mlp_backward, mlp_forward, mlp_jvp, FlatParams, LayerParams, MlpSpec, MlpWorkspace,
};
