//! Shared analysis configuration with a plain `key=value` file format.
//!
//! Every threshold the workflows use is a key with its conventional
//! default: 3/10/120-second interval floors, the six-minute session gap,
//! alpha 0.05 and a four-cluster cut.

use readtrace_core::engagement::EngagementConfig;
use readtrace_core::model::IntervalThresholds;

use crate::error::PipelineError;

#[derive(Debug, Clone)]
pub struct AnalysisConfig {
    pub gap_threshold_ms: u64,
    pub thresholds: IntervalThresholds,
    pub append_terminal_gap: bool,
    pub engagement: EngagementConfig,
    /// Entry threshold for stepwise selection and the significance-star
    /// cutoff base.
    pub alpha: f64,
    /// Cluster count for the strategy clustering.
    pub k: usize,
    /// Metric display names fed to the clustering.
    pub cluster_features: Vec<String>,
    /// Center DECI/DECE before forming interaction terms.
    pub center_traits: bool,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            gap_threshold_ms: 360_000,
            thresholds: IntervalThresholds::default(),
            append_terminal_gap: true,
            engagement: EngagementConfig::default(),
            alpha: 0.05,
            k: 4,
            cluster_features: vec![
                "Stickiness".to_string(),
                "Quickness".to_string(),
                "N_Stops".to_string(),
            ],
            center_traits: false,
        }
    }
}

impl AnalysisConfig {
    /// Applies `key=value` lines onto this config. Blank lines and `#`
    /// comments are skipped; unknown keys are errors.
    pub fn apply_text(&mut self, text: &str) -> Result<(), PipelineError> {
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                PipelineError::Config(format!("line {}: expected key=value, got {raw:?}", idx + 1))
            })?;
            self.set(key.trim(), value.trim())
                .map_err(|e| PipelineError::Config(format!("line {}: {e}", idx + 1)))?;
        }
        self.thresholds
            .validate()
            .map_err(PipelineError::Config)?;
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let parse_u64 = |v: &str| v.parse::<u64>().map_err(|e| format!("bad integer {v:?}: {e}"));
        let parse_bool = |v: &str| match v.to_ascii_lowercase().as_str() {
            "true" | "1" | "yes" => Ok(true),
            "false" | "0" | "no" => Ok(false),
            other => Err(format!("bad boolean {other:?}")),
        };
        let parse_list =
            |v: &str| v.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect();
        match key {
            "gap_threshold_ms" => self.gap_threshold_ms = parse_u64(value)?,
            "short_floor_ms" => self.thresholds.short_floor_ms = parse_u64(value)?,
            "medium_floor_ms" => self.thresholds.medium_floor_ms = parse_u64(value)?,
            "long_floor_ms" => self.thresholds.long_floor_ms = parse_u64(value)?,
            "append_terminal_gap" => self.append_terminal_gap = parse_bool(value)?,
            "tz_offset_minutes" => {
                self.engagement.tz_offset_minutes =
                    value.parse().map_err(|e| format!("bad integer {value:?}: {e}"))?
            }
            "dwell_floor_ms" => self.engagement.dwell_floor_ms = parse_u64(value)?,
            "highlight_labels" => self.engagement.highlight_labels = parse_list(value),
            "note_labels" => self.engagement.note_labels = parse_list(value),
            "alpha" => {
                let a: f64 = value.parse().map_err(|e| format!("bad number {value:?}: {e}"))?;
                if !(0.0..=1.0).contains(&a) {
                    return Err(format!("alpha must be in [0,1], got {a}"));
                }
                self.alpha = a;
            }
            "k" => {
                self.k = value.parse().map_err(|e| format!("bad integer {value:?}: {e}"))?;
                if self.k == 0 {
                    return Err("k must be >= 1".to_string());
                }
            }
            "cluster_features" => self.cluster_features = parse_list(value),
            "center_traits" => self.center_traits = parse_bool(value)?,
            other => return Err(format!("unknown config key {other:?}")),
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_carry_the_conventional_thresholds() {
        let c = AnalysisConfig::default();
        assert_eq!(c.gap_threshold_ms, 360_000);
        assert_eq!(c.thresholds.short_floor_ms, 3_000);
        assert_eq!(c.thresholds.medium_floor_ms, 10_000);
        assert_eq!(c.thresholds.long_floor_ms, 120_000);
        assert_eq!(c.alpha, 0.05);
        assert_eq!(c.k, 4);
    }

    #[test]
    fn text_overrides_apply() {
        let mut c = AnalysisConfig::default();
        c.apply_text("# comment\nk=3\nalpha=0.01\nlong_floor_ms=300000\ncluster_features=Stickiness, N_Jumps\n")
            .unwrap();
        assert_eq!(c.k, 3);
        assert_eq!(c.alpha, 0.01);
        assert_eq!(c.thresholds.long_floor_ms, 300_000);
        assert_eq!(c.cluster_features, vec!["Stickiness", "N_Jumps"]);
    }

    #[test]
    fn unknown_keys_and_bad_values_error() {
        let mut c = AnalysisConfig::default();
        assert!(c.apply_text("nope=1\n").is_err());
        assert!(c.apply_text("alpha=2\n").is_err());
        assert!(c.apply_text("k zero\n").is_err());
        // floors must stay ordered
        assert!(c.apply_text("long_floor_ms=5\n").is_err());
    }
}
