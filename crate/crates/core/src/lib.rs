//! Component-wise gradient boosting for distributional regression
//! (location, scale and shape), with fixed or adaptively optimized
//! step lengths.

pub mod baselearners;
pub mod boost;
pub mod bspline;
pub mod data;
pub mod distributions;
pub mod error;
pub mod graph;
pub mod sim;
pub mod special;
pub mod steplength;
pub mod tuning;

pub use baselearners::{BaseLearnerSpec, DesignPenalty, LearnerKind};
pub use boost::{Booster, FitState, ModelConfig, StepMode, TraceRecord};
pub use data::{Column, Dataset};
pub use distributions::{Dist, Family, ParamState};
pub use error::{Error, ErrorKind, Result};
pub use graph::Graph;
pub use tuning::{cv_risk, robust_mstop, robust_mstop_with, CvPlan, RiskCurve, StopRule};
