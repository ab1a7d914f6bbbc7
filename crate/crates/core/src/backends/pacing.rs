use std::time::Duration;

use serde::{Deserialize, Serialize};
use tokio::time::Instant;

/// Simulated per-module costs for the stub backends. A zero value disables
/// pacing for that stage (test mode).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StubPacing {
    /// Recognition seconds per second of input audio.
    pub asr_rtf: f64,
    /// Tokens emitted per second.
    pub llm_rate: f64,
    /// Synthesis seconds per second of output audio.
    pub tts_rtf: f64,
    /// Seconds spent driving one video frame.
    pub frame_cost: f64,
    /// Duration of synthesized speech per character.
    pub tts_seconds_per_char: f64,
}

impl Default for StubPacing {
    fn default() -> Self {
        StubPacing {
            asr_rtf: 0.01460,
            llm_rate: 36.79,
            tts_rtf: 0.27448,
            frame_cost: 0.0039,
            tts_seconds_per_char: 0.25,
        }
    }
}

impl StubPacing {
    /// No simulated work anywhere. Speech duration per character is kept.
    pub fn unpaced() -> Self {
        StubPacing {
            asr_rtf: 0.0,
            llm_rate: 0.0,
            tts_rtf: 0.0,
            frame_cost: 0.0,
            ..StubPacing::default()
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [
            ("asr_rtf", self.asr_rtf),
            ("llm_rate", self.llm_rate),
            ("tts_rtf", self.tts_rtf),
            ("frame_cost", self.frame_cost),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(format!("pacing.{name} must be a finite value >= 0, got {v}"));
            }
        }
        if !self.tts_seconds_per_char.is_finite() || self.tts_seconds_per_char <= 0.0 {
            return Err(format!(
                "pacing.tts_seconds_per_char must be > 0, got {}",
                self.tts_seconds_per_char
            ));
        }
        Ok(())
    }
}

/// Sleeps for simulated work while compensating timer overshoot, so that
/// the cumulative time spent tracks the cumulative requested cost even when
/// individual costs are below the timer resolution.
#[derive(Debug, Default)]
pub struct Pacer {
    /// Positive when past sleeps overshot their targets.
    debt: f64,
}

impl Pacer {
    pub fn new() -> Self {
        Self::default()
    }

    pub async fn work(&mut self, cost: Duration) {
        if cost.is_zero() {
            tokio::task::yield_now().await;
            return;
        }
        let target = cost.as_secs_f64();
        let start = Instant::now();
        let adjusted = target - self.debt;
        if adjusted > 0.0 {
            tokio::time::sleep(Duration::from_secs_f64(adjusted)).await;
        } else {
            tokio::task::yield_now().await;
        }
        let actual = start.elapsed().as_secs_f64();
        // only carry a bounded surplus so one long stall cannot zero out a
        // whole stream's pacing
        self.debt = (self.debt + actual - target).clamp(-0.05, 0.05);
    }
}
