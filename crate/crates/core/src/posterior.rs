use serde::{Deserialize, Serialize};

/// Posterior change-point masses given a history, and the resulting intensity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PosteriorResult {
    /// `P(U ≤ t | h_t)`.
    pub prob_after: f64,
    /// `P(U > t | h_t)`.
    pub prob_before: f64,
    /// `λ₁(k)·P(U ≤ t | h_t) + λ₀(k)·P(U > t | h_t)`.
    pub intensity: f64,
}

impl PosteriorResult {
    pub(crate) fn mix(prob_before: f64, rate_before: f64, rate_after: f64) -> Self {
        let prob_after = 1.0 - prob_before;
        let (lo, hi) = (rate_before.min(rate_after), rate_before.max(rate_after));
        Self {
            prob_after,
            prob_before,
            // rounding could otherwise leave the rate interval by an ulp
            intensity: (rate_before + (rate_after - rate_before) * prob_after).clamp(lo, hi),
        }
    }
}
