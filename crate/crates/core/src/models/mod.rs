//! Synthetic designs, the three model families and their hypothesis tests.

mod design;
mod family;
mod logistic;
mod ols;
mod rmanova;

pub use design::{generate_design, ColumnSpec, DesignName, DesignSpec};
pub use family::{generate_response, ErrorDist, Hypothesis, ModelFamily, Response, TestKind};
pub use logistic::{fit_logistic_irls, wald_test, LogisticFit};
pub use ols::{drop_columns, fit_ols, partial_f_test, t_test, FTest, OlsFit};
pub use rmanova::{rmanova_f_test, Effect, RmAnovaTable};

/// Dense matrix type used by the fitting routines.
pub type Matrix = nalgebra::DMatrix<f64>;
