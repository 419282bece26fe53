//! Safety monitors evaluated on realized traces.
//!
//! Longitudinal: vehicles sharing a lane keep `|d| >= d^s` of the follower
//! being checked, and a pair sharing the lane at consecutive steps may not
//! swap order (`d(t+1) d(t) >= 0`).
//!
//! Consecutive lanes: two vehicles on adjacent lanes within `d_hat` of each
//! other must not swap lanes in one step.

use std::fmt;

use super::trace::Trace;
use crate::mld_model::VehicleParams;

/// Slack allowed on the distance condition for solver round-off.
pub const SAFETY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ViolationKind {
    /// Same lane with `|d|` below the safety distance; value is `|d| - d^s`.
    Gap,
    /// Same lane at `t` and `t+1` with the order reversed; value is `d(t) d(t+1)`.
    Crossing,
    /// Simultaneous lane swap on adjacent lanes; value is `d(t)`.
    LaneSwap,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub step: usize,
    /// Vehicle ids.
    pub i: usize,
    pub j: usize,
    pub kind: ViolationKind,
    pub value: f64,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let what = match self.kind {
            ViolationKind::Gap => "gap below safety distance by",
            ViolationKind::Crossing => "vehicles crossed in lane, d(t)*d(t+1) =",
            ViolationKind::LaneSwap => "simultaneous lane swap at distance",
        };
        write!(
            f,
            "step {}: vehicles {} and {}: {what} {}",
            self.step, self.i, self.j, self.value
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SafetyReport {
    pub violations: Vec<Violation>,
    /// Smallest `|d| - d^s` over same-lane ordered pairs; `+inf` if lanes were
    /// never shared.
    pub min_margin: f64,
}

impl SafetyReport {
    pub fn is_safe(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn first(&self) -> Option<&Violation> {
        self.violations.first()
    }
}

pub fn check_longitudinal_safety(trace: &Trace, params: &[VehicleParams]) -> SafetyReport {
    let mut report = SafetyReport {
        violations: Vec::new(),
        min_margin: f64::INFINITY,
    };
    let ids = &trace.vehicles;
    for (k, snap) in trace.states.iter().enumerate() {
        for i in 0..snap.len() {
            for j in 0..snap.len() {
                if i == j || snap[i].z != snap[j].z {
                    continue;
                }
                let d = snap[j].pos - snap[i].pos;
                let margin = d.abs() - params[i].safety_distance(snap[i].v);
                report.min_margin = report.min_margin.min(margin);
                if margin < -SAFETY_TOL {
                    report.violations.push(Violation {
                        step: k,
                        i: ids[i],
                        j: ids[j],
                        kind: ViolationKind::Gap,
                        value: margin,
                    });
                }
                if i < j {
                    if let Some(next) = trace.states.get(k + 1) {
                        if next[i].z == next[j].z {
                            let prod = d * (next[j].pos - next[i].pos);
                            if prod < 0.0 {
                                report.violations.push(Violation {
                                    step: k,
                                    i: ids[i],
                                    j: ids[j],
                                    kind: ViolationKind::Crossing,
                                    value: prod,
                                });
                            }
                        }
                    }
                }
            }
        }
    }
    report
}

pub fn check_consecutive_lane_safety(trace: &Trace, d_hat: f64) -> SafetyReport {
    let mut report = SafetyReport {
        violations: Vec::new(),
        min_margin: f64::INFINITY,
    };
    let ids = &trace.vehicles;
    for (k, pair) in trace.states.windows(2).enumerate() {
        let (now, next) = (&pair[0], &pair[1]);
        for i in 0..now.len() {
            for j in (i + 1)..now.len() {
                let d = now[j].pos - now[i].pos;
                if (now[i].z - now[j].z).abs() != 1 || d.abs() > d_hat {
                    continue;
                }
                if next[i].z == now[j].z && next[j].z == now[i].z {
                    report.violations.push(Violation {
                        step: k,
                        i: ids[i],
                        j: ids[j],
                        kind: ViolationKind::LaneSwap,
                        value: d,
                    });
                }
            }
        }
    }
    report
}
