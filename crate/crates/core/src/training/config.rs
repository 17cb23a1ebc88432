use serde::{Deserialize, Serialize};

use super::TrainError;

/// Optimisation settings shared by training from scratch and fine-tuning.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_steps: usize,
    /// Length of the final coverage phase; derived from `coverage_fraction` when unset.
    pub coverage_phase_steps: Option<usize>,
    pub coverage_fraction: f64,
    pub lambda: f64,
    pub clip_norm: f64,
    pub validate_every: usize,
    pub patience: usize,
    pub seed: u64,
    pub adagrad_epsilon: f64,
    pub adagrad_initial_accumulator: f64,
    pub max_article_len: usize,
    pub max_summary_len: usize,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.15,
            batch_size: 16,
            max_steps: 5_000,
            coverage_phase_steps: None,
            coverage_fraction: 0.2,
            lambda: 1.0,
            clip_norm: 2.0,
            validate_every: 100,
            patience: 5,
            seed: 0,
            adagrad_epsilon: 1e-10,
            adagrad_initial_accumulator: 0.1,
            max_article_len: crate::corpus::DEFAULT_MAX_ARTICLE_LEN,
            max_summary_len: crate::corpus::DEFAULT_MAX_SUMMARY_LEN,
        }
    }
}

/// Smallest derived coverage phase.
pub const MIN_COVERAGE_STEPS: usize = 50;

impl TrainingConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |msg: String| Err(TrainError::Config(msg));
        if !(self.learning_rate > 0.0) {
            return bad(format!("learning rate must be positive, got {}", self.learning_rate));
        }
        if self.batch_size == 0 || self.validate_every == 0 || self.patience == 0 {
            return bad("batch size, validation interval and patience must be positive".into());
        }
        if self.max_article_len == 0 || self.max_summary_len == 0 {
            return bad("length limits must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.coverage_fraction) {
            return bad(format!("coverage fraction must lie in [0, 1], got {}", self.coverage_fraction));
        }
        if !(self.clip_norm > 0.0) || !(self.lambda >= 0.0) {
            return bad("clip norm must be positive and lambda nonnegative".into());
        }
        if !(self.adagrad_epsilon > 0.0) || !(self.adagrad_initial_accumulator >= 0.0) {
            return bad("adagrad epsilon must be positive and the initial accumulator nonnegative".into());
        }
        Ok(())
    }

    /// Steps at the end of a from-scratch run that train with coverage:
    /// `coverage_phase_steps` if set, else `max(ceil(fraction * max_steps), 50)`,
    /// never more than `max_steps`.
    pub fn coverage_steps(&self) -> usize {
        let steps = match self.coverage_phase_steps {
            Some(s) => s,
            None if self.coverage_fraction == 0.0 => 0,
            None => ((self.coverage_fraction * self.max_steps as f64).ceil() as usize).max(MIN_COVERAGE_STEPS),
        };
        steps.min(self.max_steps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coverage_phase_sizing() {
        let mut c = TrainingConfig {
            max_steps: 1000,
            ..Default::default()
        };
        assert_eq!(c.coverage_steps(), 200);
        c.max_steps = 100;
        assert_eq!(c.coverage_steps(), 50);
        c.max_steps = 30;
        assert_eq!(c.coverage_steps(), 30);
        c.coverage_phase_steps = Some(3000);
        c.max_steps = 238_000;
        assert_eq!(c.coverage_steps(), 3000);
        c.coverage_phase_steps = None;
        c.coverage_fraction = 0.0;
        assert_eq!(c.coverage_steps(), 0);
    }

    #[test]
    fn validation_rejects_nonsense() {
        assert!(TrainingConfig::default().validate().is_ok());
        for c in [
            TrainingConfig { learning_rate: 0.0, ..Default::default() },
            TrainingConfig { batch_size: 0, ..Default::default() },
            TrainingConfig { coverage_fraction: 1.5, ..Default::default() },
        ] {
            assert!(c.validate().is_err());
        }
    }

    #[test]
    fn partial_json_uses_defaults() {
        let c: TrainingConfig = serde_json::from_str(r#"{"max_steps": 12, "lambda": 0.5}"#).unwrap();
        assert_eq!(c.max_steps, 12);
        assert_eq!(c.lambda, 0.5);
        assert_eq!(c.batch_size, 16);
    }
}
