//! Classification metrics, dev-set threshold tuning and paired t-tests.
//!
//! Contradict (hallucinated) is the positive class throughout.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::domain::{check_probability, decide, Label};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n: usize,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub threshold_used: f64,
}

impl EvalReport {
    fn from_counts(tp: usize, fp: usize, tn: usize, fn_: usize, threshold_used: f64) -> EvalReport {
        let n = tp + fp + tn + fn_;
        let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        EvalReport {
            n,
            accuracy: ratio(tp + tn, n),
            precision,
            recall,
            f1,
            tp,
            fp,
            tn,
            fn_,
            threshold_used,
        }
    }

    /// Percentages with two decimals, in the order accuracy, precision,
    /// recall, F1.
    pub fn table(&self) -> String {
        let rows = [
            ("Accuracy", self.accuracy),
            ("Precision", self.precision),
            ("Recall", self.recall),
            ("F1", self.f1),
        ];
        let mut out = String::new();
        let header: Vec<String> = rows.iter().map(|(name, _)| format!("{name:>9}")).collect();
        let values: Vec<String> = rows.iter().map(|(_, v)| format!("{:>9.2}", v * 100.0)).collect();
        out.push_str(&header.join(" "));
        out.push('\n');
        out.push_str(&values.join(" "));
        out.push('\n');
        out.push_str(&format!(
            "n={} tp={} fp={} tn={} fn={} threshold={}\n",
            self.n, self.tp, self.fp, self.tn, self.fn_, self.threshold_used
        ));
        out
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.table())
    }
}

fn check_aligned(scores: &[f64], labels: &[Label]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: scores.len(),
            right: labels.len(),
        });
    }
    if scores.is_empty() {
        return Err(Error::EmptyInput);
    }
    for &s in scores {
        check_probability("score", s)?;
    }
    Ok(())
}

fn confusion(scores: &[f64], labels: &[Label], threshold: f64) -> (usize, usize, usize, usize) {
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for (&s, &gold) in scores.iter().zip(labels) {
        match (decide(s, threshold), gold) {
            (Label::Contradict, Label::Contradict) => tp += 1,
            (Label::Contradict, Label::Entail) => fp += 1,
            (Label::Entail, Label::Entail) => tn += 1,
            (Label::Entail, Label::Contradict) => fn_ += 1,
        }
    }
    (tp, fp, tn, fn_)
}

/// Predicts Contradict iff `score >= threshold`.
pub fn compute_metrics(scores: &[f64], labels: &[Label], threshold: f64) -> Result<EvalReport> {
    check_aligned(scores, labels)?;
    check_probability("threshold", threshold)?;
    let (tp, fp, tn, fn_) = confusion(scores, labels, threshold);
    Ok(EvalReport::from_counts(tp, fp, tn, fn_, threshold))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    #[default]
    Accuracy,
    F1,
}

impl Objective {
    pub fn value(self, report: &EvalReport) -> f64 {
        match self {
            Objective::Accuracy => report.accuracy,
            Objective::F1 => report.f1,
        }
    }
}

impl std::str::FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Objective> {
        match s.trim().to_ascii_lowercase().as_str() {
            "accuracy" | "acc" => Ok(Objective::Accuracy),
            "f1" => Ok(Objective::F1),
            other => Err(Error::InvalidConfig(format!("unknown objective {other:?}"))),
        }
    }
}

/// Every threshold that can change a decision: 0, 1 and the midpoints between
/// consecutive distinct scores, ascending.
pub fn candidate_thresholds(scores: &[f64]) -> Vec<f64> {
    let mut sorted: Vec<f64> = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let mut candidates = vec![0.0];
    candidates.extend(sorted.windows(2).map(|w| w[0] + (w[1] - w[0]) / 2.0));
    candidates.push(1.0);
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();
    candidates
}

/// Returns the candidate threshold maximizing `objective`, preferring the
/// smallest on ties.
pub fn tune_threshold(scores: &[f64], labels: &[Label], objective: Objective) -> Result<f64> {
    check_aligned(scores, labels)?;
    let mut best = (f64::NEG_INFINITY, 0.0);
    for t in candidate_thresholds(scores) {
        let (tp, fp, tn, fn_) = confusion(scores, labels, t);
        let value = objective.value(&EvalReport::from_counts(tp, fp, tn, fn_, t));
        if value > best.0 {
            best = (value, t);
        }
    }
    Ok(best.1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignificanceResult {
    pub t_statistic: f64,
    pub degrees_of_freedom: usize,
    pub significant_at_95: bool,
}

/// Two-tailed critical values of Student's t at alpha = 0.05 for df 1..=200.
const T_CRITICAL_95: [f64; 200] = [
    12.706204736, 4.302652730, 3.182446305, 2.776445105, 2.570581836,
    2.446911851, 2.364624252, 2.306004135, 2.262157163, 2.228138852,
    2.200985160, 2.178812830, 2.160368656, 2.144786688, 2.131449546,
    2.119905299, 2.109815578, 2.100922040, 2.093024054, 2.085963447,
    2.079613845, 2.073873068, 2.068657610, 2.063898562, 2.059538553,
    2.055529439, 2.051830516, 2.048407142, 2.045229642, 2.042272456,
    2.039513446, 2.036933343, 2.034515297, 2.032244509, 2.030107928,
    2.028094001, 2.026192463, 2.024394164, 2.022690920, 2.021075390,
    2.019540970, 2.018081703, 2.016692199, 2.015367574, 2.014103389,
    2.012895599, 2.011740514, 2.010634758, 2.009575237, 2.008559112,
    2.007583770, 2.006646805, 2.005745995, 2.004879288, 2.004044783,
    2.003240719, 2.002465459, 2.001717484, 2.000995378, 2.000297822,
    1.999623585, 1.998971517, 1.998340543, 1.997729654, 1.997137908,
    1.996564419, 1.996008354, 1.995468931, 1.994945415, 1.994437112,
    1.993943368, 1.993463567, 1.992997126, 1.992543495, 1.992102154,
    1.991672610, 1.991254395, 1.990847069, 1.990450210, 1.990063421,
    1.989686323, 1.989318557, 1.988959780, 1.988609667, 1.988267907,
    1.987934206, 1.987608282, 1.987289865, 1.986978700, 1.986674541,
    1.986377154, 1.986086317, 1.985801814, 1.985523442, 1.985251004,
    1.984984312, 1.984723186, 1.984467454, 1.984216952, 1.983971518,
    1.983731003, 1.983495258, 1.983264145, 1.983037526, 1.982815274,
    1.982597262, 1.982383370, 1.982173483, 1.981967490, 1.981765282,
    1.981566757, 1.981371815, 1.981180359, 1.980992298, 1.980807541,
    1.980626002, 1.980447599, 1.980272249, 1.980099876, 1.979930405,
    1.979763762, 1.979599878, 1.979438685, 1.979280117, 1.979124109,
    1.978970602, 1.978819535, 1.978670850, 1.978524491, 1.978380405,
    1.978238539, 1.978098842, 1.977961264, 1.977825758, 1.977692277,
    1.977560777, 1.977431212, 1.977303542, 1.977177724, 1.977053720,
    1.976931489, 1.976810994, 1.976692198, 1.976575066, 1.976459563,
    1.976345655, 1.976233309, 1.976122494, 1.976013178, 1.975905331,
    1.975798924, 1.975693928, 1.975590315, 1.975488058, 1.975387131,
    1.975287508, 1.975189163, 1.975092073, 1.974996213, 1.974901560,
    1.974808092, 1.974715786, 1.974624621, 1.974534576, 1.974445630,
    1.974357764, 1.974270957, 1.974185191, 1.974100447, 1.974016708,
    1.973933954, 1.973852169, 1.973771337, 1.973691440, 1.973612462,
    1.973534388, 1.973457202, 1.973380889, 1.973305434, 1.973230823,
    1.973157042, 1.973084077, 1.973011915, 1.972940542, 1.972869946,
    1.972800114, 1.972731033, 1.972662692, 1.972595079, 1.972528182,
    1.972461990, 1.972396491, 1.972331676, 1.972267533, 1.972204051,
    1.972141222, 1.972079034, 1.972017478, 1.971956544, 1.971896224,
];

/// Two-tailed 95% critical value; the normal quantile 1.96 beyond df 200.
pub fn t_critical_95(df: usize) -> f64 {
    match df {
        0 => f64::INFINITY,
        1..=200 => T_CRITICAL_95[df - 1],
        _ => 1.96,
    }
}

/// Two-tailed paired t-test on per-run metric values.
pub fn paired_t_test(runs_a: &[f64], runs_b: &[f64]) -> Result<SignificanceResult> {
    if runs_a.len() != runs_b.len() {
        return Err(Error::LengthMismatch {
            left: runs_a.len(),
            right: runs_b.len(),
        });
    }
    let n = runs_a.len();
    if n < 2 {
        return Err(Error::TooFewRuns(n));
    }
    if let Some(x) = runs_a.iter().chain(runs_b).find(|x| !x.is_finite()) {
        return Err(Error::Invalid(format!("run value {x} is not finite")));
    }
    let diffs: Vec<f64> = runs_a.iter().zip(runs_b).map(|(a, b)| a - b).collect();
    let mean = diffs.iter().sum::<f64>() / n as f64;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let sd = var.sqrt();
    let df = n - 1;
    // Rounding can leave a tiny spread in differences that are equal on paper.
    let constant = sd <= 1e-12 * mean.abs();
    let t_statistic = if constant {
        if mean == 0.0 {
            0.0
        } else {
            f64::INFINITY.copysign(mean)
        }
    } else {
        mean * (n as f64).sqrt() / sd
    };
    Ok(SignificanceResult {
        t_statistic,
        degrees_of_freedom: df,
        significant_at_95: t_statistic.abs() > t_critical_95(df),
    })
}
