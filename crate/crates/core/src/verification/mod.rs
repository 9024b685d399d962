//! Independent checks of the assembled bounds: explicit instances simulated
//! with real averaging matrices, a scalar-consensus oracle and a direct
//! centralized formulation.

pub mod audit;
pub mod averaging;
pub mod centralized;
pub mod instances;
pub mod oracle;
pub mod simulate;
pub mod soundness;
