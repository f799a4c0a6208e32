//! Overhead-budget controller. A periodic timer samples whether the
//! process is currently executing tool code; the controller keeps a
//! sliding window of those samples and, whenever the windowed tool-time
//! share sits below the budget, requests that all disabled code locations
//! be re-enabled for another round of sampling.

use std::collections::VecDeque;

pub const DEFAULT_BUDGET: f64 = 0.05;
pub const DEFAULT_WINDOW: usize = 100;
pub const DEFAULT_CHECK_INTERVAL_MS: u64 = 10;

#[derive(Debug, Clone)]
pub struct SamplingController {
    budget: f64,
    window: VecDeque<bool>,
    window_size: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TickOutcome {
    pub self_fraction: f64,
    /// True when monitoring should be re-enabled for all code locations.
    pub reenable: bool,
}

impl SamplingController {
    pub fn new(budget: f64, window_size: usize) -> Self {
        assert!(budget > 0.0 && budget <= 1.0, "budget must be in (0, 1]");
        assert!(window_size > 0);
        SamplingController { budget, window: VecDeque::with_capacity(window_size), window_size }
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    /// Record one profiling sample; `in_tool_code` is whether the sample
    /// landed in tool code.
    pub fn record_tick(&mut self, in_tool_code: bool) -> TickOutcome {
        if self.window.len() == self.window_size {
            self.window.pop_front();
        }
        self.window.push_back(in_tool_code);
        let self_fraction = self.self_fraction();
        TickOutcome { self_fraction, reenable: self_fraction < self.budget }
    }

    pub fn self_fraction(&self) -> f64 {
        if self.window.is_empty() {
            return 0.0;
        }
        self.window.iter().filter(|b| **b).count() as f64 / self.window.len() as f64
    }
}

impl Default for SamplingController {
    fn default() -> Self {
        SamplingController::new(DEFAULT_BUDGET, DEFAULT_WINDOW)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_target_ticks_drive_fraction_to_zero_and_reenable() {
        let mut c = SamplingController::new(0.05, 100);
        let mut last = TickOutcome { self_fraction: 1.0, reenable: false };
        for _ in 0..100 {
            last = c.record_tick(false);
        }
        assert_eq!(last.self_fraction, 0.0);
        assert!(last.reenable);
    }

    #[test]
    fn sustained_tool_load_blocks_reenable() {
        let mut c = SamplingController::new(0.05, 100);
        for i in 0..200 {
            let out = c.record_tick(i % 2 == 0); // 50% tool ticks
            if i >= 10 {
                assert!(!out.reenable, "tick {i}: fraction {}", out.self_fraction);
            }
        }
        assert!((c.self_fraction() - 0.5).abs() < 0.05);
    }

    #[test]
    fn alternating_ticks_estimate_half_within_window_error() {
        let mut c = SamplingController::new(0.05, 20);
        for i in 0..100 {
            c.record_tick(i % 2 == 0);
        }
        assert!((c.self_fraction() - 0.5).abs() <= 0.05);
    }

    #[test]
    fn window_slides() {
        let mut c = SamplingController::new(0.5, 4);
        for _ in 0..4 {
            c.record_tick(true);
        }
        assert_eq!(c.self_fraction(), 1.0);
        for _ in 0..4 {
            c.record_tick(false);
        }
        assert_eq!(c.self_fraction(), 0.0);
    }

    #[test]
    fn reenable_iff_fraction_below_budget_exhaustive_wnidow_10() {
        // every 10-bit pattern, several budgets; oracle recomputes the
        // windowed mean directly at every step
        for budget_pct in [5u32, 30, 50] {
            let budget = budget_pct as f64 / 100.0;
            for pattern in 0u32..1024 {
                let mut c = SamplingController::new(budget, 10);
                let mut seen: Vec<bool> = Vec::new();
                for bit in 0..10 {
                    let in_tool = (pattern >> bit) & 1 == 1;
                    seen.push(in_tool);
                    let window: Vec<bool> =
                        seen.iter().rev().take(10).copied().collect();
                    let expect_fraction =
                        window.iter().filter(|b| **b).count() as f64 / window.len() as f64;
                    let out = c.record_tick(in_tool);
                    assert_eq!(out.self_fraction, expect_fraction);
                    assert_eq!(out.reenable, expect_fraction < budget, "pattern {pattern:#б} bit {bit}");
                }
            }
        }
    }
}
