//! Metric suite: ROUGE-L recall, length-normalized answer probability,
//! normalized truth ratio, subset reports, α sweep, trade-off curve.

pub mod metrics;
pub mod report;

pub use metrics::{
    answer_probability, normalize_truth_ratio, rouge_l_recall, truth_ratio_score,
    AnswerProb, PerturbedMean, TruthRatio, PROB_FLOOR,
};
pub use report::{
    alpha_sweep, evaluate, generate_answer, mean_rouge, subsample, sweep_to_csv,
    tradeoff_curve, trajectory_to_csv, EvalOptions, EvalReport, MetricRow, SweepRow,
    TrajectoryPoint,
};
