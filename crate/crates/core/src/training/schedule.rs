use serde::{Deserialize, Serialize};

use crate::training::SchedulerConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EarlyStop {
    Continue,
    Stop,
}

/// Stops once the best value (first occurrence; ties are not improvements)
/// is at least `patience` epochs old.
pub fn early_stop_check(history: &[f64], patience: usize) -> EarlyStop {
    let mut best = 0;
    for (i, &v) in history.iter().enumerate() {
        if v > history[best] {
            best = i;
        }
    }
    if !history.is_empty() && history.len() - 1 - best >= patience {
        EarlyStop::Stop
    } else {
        EarlyStop::Continue
    }
}

/// Learning-rate schedule driven by the validation metric (higher is better).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scheduler {
    pub config: SchedulerConfig,
    pub lr: f64,
    best: Option<f64>,
    bad_epochs: usize,
}

impl Scheduler {
    pub fn new(config: SchedulerConfig, lr: f64) -> Self {
        Self {
            config,
            lr,
            best: None,
            bad_epochs: 0,
        }
    }

    /// Plateau: multiplies the rate by `factor` once more than `patience`
    /// epochs pass without strict improvement, never going below `min_lr`.
    pub fn step(&mut self, metric: f64) -> f64 {
        let SchedulerConfig::Plateau { factor, patience, min_lr } = self.config else {
            return self.lr;
        };
        if self.best.is_none_or(|b| metric > b) {
            self.best = Some(metric);
            self.bad_epochs = 0;
        } else {
            self.bad_epochs += 1;
        }
        if self.bad_epochs > patience {
            self.lr = (self.lr * factor).max(min_lr);
            self.bad_epochs = 0;
        }
        self.lr
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn early_stopping_examples() {
        assert_eq!(early_stop_check(&[0.70, 0.71, 0.72], 2), EarlyStop::Continue);
        assert_eq!(early_stop_check(&[0.72, 0.71, 0.70], 2), EarlyStop::Stop);
        assert_eq!(early_stop_check(&[0.72, 0.72, 0.72], 2), EarlyStop::Stop);
        assert_eq!(early_stop_check(&[0.5, 0.5], 1), EarlyStop::Stop);
        assert_eq!(early_stop_check(&[0.5], 1), EarlyStop::Continue);
    }

    #[test]
    fn plateau_examples() {
        let mut s = Scheduler::new(SchedulerConfig::default(), 1e-3);
        for m in [0.6, 0.7, 0.8] {
            assert_eq!(s.step(m), 1e-3);
        }
        let mut s = Scheduler::new(SchedulerConfig::default(), 1e-3);
        s.step(0.7);
        assert_eq!(s.step(0.7), 1e-3);
        assert_eq!(s.step(0.7), 5e-4);
        for _ in 0..100 {
            assert!(s.step(0.1) >= 1e-6);
        }
        assert_eq!(s.lr, 1e-6);
    }
}
