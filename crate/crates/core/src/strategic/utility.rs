//! Linear plan utility and margin-based decision confidence.

use serde::{Deserialize, Serialize};

/// Utility weights; all strictly positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    pub w_p: f64,
    pub w_s: f64,
    pub w_c: f64,
}

impl Default for Weights {
    fn default() -> Self {
        Weights {
            w_p: 0.5,
            w_s: 0.3,
            w_c: 0.2,
        }
    }
}

impl Weights {
    pub fn new(w_p: f64, w_s: f64, w_c: f64) -> Result<Weights, String> {
        let w = Weights { w_p, w_s, w_c };
        if [w_p, w_s, w_c].iter().all(|v| v.is_finite() && *v > 0.0) {
            Ok(w)
        } else {
            Err(format!(
                "utility weights must be positive, got {w_p}, {w_s}, {w_c}"
            ))
        }
    }

    pub fn scaled(&self, k: f64) -> Weights {
        Weights {
            w_p: self.w_p * k,
            w_s: self.w_s * k,
            w_c: self.w_c * k,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilityScore {
    pub plan_id: String,
    pub priority_term: f64,
    pub success_term: f64,
    pub cost_term: f64,
    pub weights: Weights,
    /// `w_p * priority_term + w_s * success_term - w_c * cost_term`.
    pub total: f64,
}

impl UtilityScore {
    pub fn compute(
        plan_id: &str,
        priority: f64,
        success: f64,
        cost: f64,
        weights: Weights,
    ) -> UtilityScore {
        UtilityScore {
            plan_id: plan_id.to_string(),
            priority_term: priority,
            success_term: success,
            cost_term: cost,
            weights,
            total: weights.w_p * priority + weights.w_s * success - weights.w_c * cost,
        }
    }

    /// Weighted contributions `(name, value)`; cost counts against.
    pub fn contributions(&self) -> [(&'static str, f64); 3] {
        [
            ("priority", self.weights.w_p * self.priority_term),
            ("success", self.weights.w_s * self.success_term),
            ("cost", -self.weights.w_c * self.cost_term),
        ]
    }

    /// Component with the largest absolute weighted contribution; earlier
    /// components win ties.
    pub fn top_component(&self) -> &'static str {
        let c = self.contributions();
        let mut best = c[0];
        for x in &c[1..] {
            if x.1.abs() > best.1.abs() {
                best = *x;
            }
        }
        best.0
    }
}

/// Index of the highest total; equal totals go to the smaller plan id.
pub fn select(scores: &[UtilityScore]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, s) in scores.iter().enumerate() {
        best = match best {
            None => Some(i),
            Some(b) => {
                let cur = &scores[b];
                if s.total > cur.total || (s.total == cur.total && s.plan_id < cur.plan_id) {
                    Some(i)
                } else {
                    Some(b)
                }
            }
        };
    }
    best
}

const EPSILON: f64 = 1e-9;

/// 1 for a single candidate; otherwise the winner's margin over the
/// runner-up relative to the winner's total, clamped to [0, 1].
pub fn assess_confidence(scores: &[UtilityScore]) -> f64 {
    if scores.len() <= 1 {
        return 1.0;
    }
    let mut totals: Vec<f64> = scores.iter().map(|s| s.total).collect();
    totals.sort_by(|a, b| b.total_cmp(a));
    ((totals[0] - totals[1]) / totals[0].abs().max(EPSILON)).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ties_go_to_smaller_id() {
        let w = Weights::default();
        let s = [
            UtilityScore::compute("b", 0.5, 0.5, 0.5, w),
            UtilityScore::compute("a", 0.5, 0.5, 0.5, w),
        ];
        assert_eq!(select(&s), Some(1));
        assert_eq!(select(&[]), None);
    }

    #[test]
    fn weights_must_be_positive() {
        assert!(Weights::new(0.5, 0.0, 0.2).is_err());
        assert!(Weights::new(0.5, 0.3, f64::NAN).is_err());
    }
}
