//! Global and local explanations of a fitted model.

mod correlation;
mod importance;
mod shap;
mod surface;

pub use correlation::{correlation_matrix, pearson, CorrelationMatrix, TARGET_NAME};
pub use importance::{scale_scores, variable_importance, ImportanceMethod, ImportanceRow, ImportanceTable, PERMUTATION_REPEATS};
pub use shap::{shap_for_table, shap_values, ShapSummary, MAX_BACKGROUND, MAX_INSTANCES, SHAP_SIMULATIONS};
pub use surface::{response_surface, ResponseSurface, SURFACE_GRID};
