//! Data valuation with Beta-weighted semivalues.
//!
//! A semivalue scores each training point by a weighted average of its
//! marginal contributions across subset cardinalities; the Beta(alpha, beta)
//! family supplies the weights in closed form, with Beta(1, 1) recovering the
//! uniform (data Shapley) weighting and mass concentrating on the
//! leave-one-out end as beta grows. The crate provides:
//!
//! * [`weights`]: weight schemes on cardinalities, validated against the
//!   admissibility condition.
//! * [`game`]: utility functions U(S) backed by a deterministic model zoo
//!   (logistic regression via IRLS, constant predictors) with subset caching.
//! * [`exact`]: brute-force semivalues by full subset enumeration (n <= 20).
//! * [`mc`]: Monte-Carlo estimation with multi-chain Gelman-Rubin stopping.
//! * [`synth`]: seeded synthetic dataset generators and label-noise
//!   injection.
//! * [`tasks`]: downstream evaluations (noisy-label detection, weighted
//!   subsampling, addition/removal curves, signal-to-noise scans).
//! * [`io`]: CSV and JSON formats for datasets, values, and task reports.
//!
//! Everything random is a pure function of explicit 64-bit seeds; rerunning
//! any computation with the same inputs reproduces its outputs bit for bit,
//! at any thread count.

pub mod dataset;
pub mod error;
pub mod exact;
pub mod game;
pub mod io;
pub mod logistic;
pub mod mc;
pub mod rng;
pub mod synth;
pub mod tasks;
pub mod weights;

pub use dataset::{DataPoint, Dataset, LabelKind, PointId};
pub use error::{Error, Result};
pub use exact::{
    marginal_exact, marginal_profiles, semivalue_exact, shapley_efficiency_check,
    MarginalProfile, ValueEntry, ValueMode, ValueVector, EXACT_MAX_POINTS,
};
pub use game::{
    evaluate_utility, predict_accuracy, Metric, ModelKind, ModelUtility, TableUtility, Utility,
    UtilityCache, UtilitySpec,
};
pub use logistic::{train_logistic, LogisticModel, TrainingConfig};
pub use mc::{gelman_rubin, mc_estimate, McConfig, Termination, ValueReport};
pub use synth::{flip_labels, generate, NoiseRecord, SyntheticKind};
pub use tasks::{
    detect_noisy, point_curve, snr_scan, subsample_train_eval, CurveConfig, CurveDirection,
    CurveResult, DetectionResult, SnrConfig, SnrProfile, SubsampleOutcome,
};
pub use weights::{beta_weight, BetaParams, SchemeOrigin, WeightScheme};
