//! Evaluation summaries.

use alloc::vec::Vec;
use core::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct InvalidInput(pub &'static str);

impl fmt::Display for InvalidInput {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.0)
    }
}

/// Largest test object count over largest training object count, rounded
/// to two decimals.
pub fn generalization_factor(train: &[usize], test: &[usize]) -> Result<f64, InvalidInput> {
    let (tr, te) = match (train.iter().max(), test.iter().max()) {
        (Some(&a), Some(&b)) => (a, b),
        _ => return Err(InvalidInput("train and test object counts must be nonempty")),
    };
    if tr == 0 {
        return Err(InvalidInput("training tasks have no objects"));
    }
    Ok(libm::round(te as f64 / tr as f64 * 100.0) / 100.0)
}

/// Outcome of one evaluated task.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TaskOutcome {
    pub success: bool,
    /// Abstract plan length; only meaningful on success.
    pub plan_length: usize,
    /// Draws spent, failed attempts included.
    pub samples: usize,
    pub objects: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Metrics {
    pub success_rate: f64,
    /// Over successful tasks; 0 if there are none.
    pub mean_plan_length: f64,
    /// Over all tasks.
    pub mean_refine_samples: f64,
    pub generalization_factor: f64,
}

/// Summary of a suite. `train_objects` are the object counts of the training
/// tasks.
pub fn summarize(outcomes: &[TaskOutcome], train_objects: &[usize]) -> Result<Metrics, InvalidInput> {
    if outcomes.is_empty() {
        return Err(InvalidInput("empty task suite"));
    }
    let n = outcomes.len() as f64;
    let ok: Vec<&TaskOutcome> = outcomes.iter().filter(|o| o.success).collect();
    let mean_plan_length =
        if ok.is_empty() { 0.0 } else { ok.iter().map(|o| o.plan_length as f64).sum::<f64>() / ok.len() as f64 };
    let test: Vec<usize> = outcomes.iter().map(|o| o.objects).collect();
    Ok(Metrics {
        success_rate: ok.len() as f64 / n,
        mean_plan_length,
        mean_refine_samples: outcomes.iter().map(|o| o.samples as f64).sum::<f64>() / n,
        generalization_factor: generalization_factor(train_objects, &test)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factor_is_max_ratio() {
        assert_eq!(generalization_factor(&[1], &[1, 2, 3, 4]), Ok(4.0));
        assert_eq!(generalization_factor(&[1, 1], &[18]), Ok(18.0));
        assert_eq!(generalization_factor(&[3], &[3]), Ok(1.0));
        assert_eq!(generalization_factor(&[3], &[4]), Ok(1.33));
    }

    #[test]
    fn factor_rejects_empty_or_zero_training() {
        assert!(generalization_factor(&[0], &[4]).is_err());
        assert!(generalization_factor(&[], &[4]).is_err());
        assert!(generalization_factor(&[1], &[]).is_err());
    }

    #[test]
    fn summary_counts_successes() {
        let o = |success, plan_length, samples| TaskOutcome { success, plan_length, samples, objects: 2 };
        let m = summarize(&[o(true, 4, 10), o(true, 6, 20), o(false, 0, 30), o(false, 0, 40)], &[1]).unwrap();
        assert_eq!(m.success_rate, 0.5);
        assert_eq!(m.mean_plan_length, 5.0);
        assert_eq!(m.mean_refine_samples, 25.0);
        assert_eq!(m.generalization_factor, 2.0);
    }
}
