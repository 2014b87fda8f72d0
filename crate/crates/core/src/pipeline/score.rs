//! Accuracy under EX, under verification, and under verification with
//! cross-checked counterexamples.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// One method's outcome on one question.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionOutcome {
    pub question_id: String,
    pub method: String,
    /// EX on the static test database; `None` when there is none, in
    /// which case the prediction counts as an EX pass.
    pub ex: Option<bool>,
    /// A validated counterexample from the method's own check.
    pub own_counterexample: bool,
    /// A counterexample adopted from another method.
    pub cross_counterexample: bool,
}

impl QuestionOutcome {
    pub fn ex_pass(&self) -> bool {
        self.ex.unwrap_or(true)
    }

    pub fn verify_pass(&self) -> bool {
        self.ex_pass() && !self.own_counterexample
    }

    pub fn verify_cc_pass(&self) -> bool {
        self.verify_pass() && !self.cross_counterexample
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodScore {
    pub method: String,
    pub questions: usize,
    pub ex_accuracy: f64,
    pub verify_accuracy: f64,
    pub verify_cc_accuracy: f64,
    pub ex_rank: usize,
    pub verify_rank: usize,
    pub verify_cc_rank: usize,
}

fn percent(n: usize, d: usize) -> f64 {
    if d == 0 {
        0.0
    } else {
        100.0 * n as f64 / d as f64
    }
}

/// Ranks by descending accuracy, ties broken by method name, so ranks
/// always form a permutation.
fn ranks(rows: &[MethodScore], acc: impl Fn(&MethodScore) -> f64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..rows.len()).collect();
    idx.sort_by(|&a, &b| {
        acc(&rows[b])
            .total_cmp(&acc(&rows[a]))
            .then_with(|| rows[a].method.cmp(&rows[b].method))
    });
    let mut out = vec![0; rows.len()];
    for (r, i) in idx.into_iter().enumerate() {
        out[i] = r + 1;
    }
    out
}

/// Per-method accuracies and ranks, methods in name order.
pub fn score(outcomes: &[QuestionOutcome]) -> Vec<MethodScore> {
    let mut by_method: BTreeMap<&str, Vec<&QuestionOutcome>> = BTreeMap::new();
    for o in outcomes {
        by_method.entry(&o.method).or_default().push(o);
    }
    let mut rows: Vec<MethodScore> = by_method
        .into_iter()
        .map(|(m, os)| {
            let n = os.len();
            let count = |f: fn(&QuestionOutcome) -> bool| os.iter().filter(|o| f(o)).count();
            MethodScore {
                method: m.to_string(),
                questions: n,
                ex_accuracy: percent(count(QuestionOutcome::ex_pass), n),
                verify_accuracy: percent(count(QuestionOutcome::verify_pass), n),
                verify_cc_accuracy: percent(count(QuestionOutcome::verify_cc_pass), n),
                ex_rank: 0,
                verify_rank: 0,
                verify_cc_rank: 0,
            }
        })
        .collect();
    let ex = ranks(&rows, |r| r.ex_accuracy);
    let v = ranks(&rows, |r| r.verify_accuracy);
    let cc = ranks(&rows, |r| r.verify_cc_accuracy);
    for (i, r) in rows.iter_mut().enumerate() {
        r.ex_rank = ex[i];
        r.verify_rank = v[i];
        r.verify_cc_rank = cc[i];
    }
    rows
}

/// For every question, how many methods passed EX but were refuted, with
/// and without cross-checked counterexamples.
pub fn failure_counts(outcomes: &[QuestionOutcome]) -> BTreeMap<String, (usize, usize)> {
    let mut out: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for o in outcomes {
        let e = out.entry(o.question_id.clone()).or_default();
        if o.ex_pass() && !o.verify_pass() {
            e.0 += 1;
        }
        if o.ex_pass() && !o.verify_cc_pass() {
            e.1 += 1;
        }
    }
    out
}

/// Number of questions per failure count (verification with
/// cross-checking), leaving out questions no method failed.
pub fn failure_histogram(outcomes: &[QuestionOutcome]) -> BTreeMap<usize, usize> {
    let mut h = BTreeMap::new();
    for (_, (_, cc)) in failure_counts(outcomes) {
        if cc > 0 {
            *h.entry(cc).or_insert(0) += 1;
        }
    }
    h
}

/// Accuracy drop, in points, from demoting `demoted` of `total` answers.
pub fn demotion_drop(demoted: usize, total: usize) -> f64 {
    percent(demoted, total)
}
