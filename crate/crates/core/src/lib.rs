//! Exact arithmetic for log differential operators of higher level on monomial
//! charts over F_p, plus the module-level machinery built on them over finite
//! graded modules.

pub mod azumaya;
pub mod cartier;
pub mod chart;
pub mod corpus;
pub mod error;
pub mod fault;
pub mod fp;
pub mod jet;
pub mod linalg;
pub mod mindex;
pub mod module;
pub mod operator;
pub mod report;
pub mod suites;

pub use chart::{AElement, AMonomial, Chart, ChartRole};
pub use error::{Error, Result};
pub use fault::Fault;
pub use jet::PDJet;
pub use linalg::Mat;
pub use mindex::{LevelContext, MultiIndex, SignedMultiIndex};
pub use module::IndexedModule;
pub use operator::TDOperator;
pub use report::{SuiteParams, SuiteReport};
