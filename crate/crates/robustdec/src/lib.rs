//! Decision-estimation coefficients, estimation markets and E2D for robust bandits and robust MDPs.

pub mod dec;
pub mod e2d;
pub mod envs;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod linbandit;
pub mod oracle;
pub mod prob;
pub mod rmdp;
pub mod rmdp_estimator;
pub mod solve;
