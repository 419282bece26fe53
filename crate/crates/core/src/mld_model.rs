//! Physical and decision quantities of the per-vehicle mixed-logical-dynamical
//! model: vehicle limits, world constants, pair geometry and the per-step
//! feasible sets that precede MILP compilation.
//!
//! Conventions used across the crate:
//! * lanes are numbered `1..=L`, lane 1 is the rightmost; a left indicator
//!   permits a move to `z + 1`;
//! * `d_{i,j} = pos_j - pos_i`, so a positive distance means `j` is ahead of `i`;
//! * a plan covers speeds and lanes at steps `1..=T` and indicators at steps
//!   `0..T`; the indicator at step `t` gates the lane at step `t + 1`.

use serde::{Deserialize, Serialize};

/// Lane index, `1..=L`.
pub type Lane = i64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleParams {
    pub id: usize,
    /// Maximum speed (m/s).
    pub v_max: f64,
    /// Maximum speed change per step (m/s).
    pub delta: f64,
    /// Weight of the lane deviation in the tracking cost.
    pub r: f64,
    /// Standstill safety gap (m).
    pub d0: f64,
    /// Safety headway time (s).
    pub h: f64,
    /// Desired speed at steps `1..=T` (at least `T` entries).
    pub v_ref: Vec<f64>,
    /// Desired lane at steps `1..=T` (at least `T` entries).
    pub z_ref: Vec<Lane>,
}

impl VehicleParams {
    pub fn safety_distance(&self, v: f64) -> f64 {
        safety_distance(v, self.d0, self.h)
    }

    /// Reference profiles restricted to `steps` entries, repeating the last
    /// entry when the stored profile is shorter.
    pub fn window(&self, start: usize, steps: usize) -> VehicleParams {
        let pick_f = |xs: &[f64]| -> Vec<f64> {
            (0..steps)
                .map(|k| xs[(start + k).min(xs.len() - 1)])
                .collect()
        };
        let pick_z = |xs: &[Lane]| -> Vec<Lane> {
            (0..steps)
                .map(|k| xs[(start + k).min(xs.len() - 1)])
                .collect()
        };
        VehicleParams {
            v_ref: pick_f(&self.v_ref),
            z_ref: pick_z(&self.z_ref),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    /// Longitudinal position (m).
    pub pos: f64,
    /// Current speed (m/s).
    pub v: f64,
    /// Current lane.
    pub z: Lane,
    /// Indicators last applied.
    pub a_l: bool,
    pub a_r: bool,
}

/// Which logic rules are compiled into the per-vehicle problems. The
/// safety-distance implication is always active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleSet {
    pub free_space: bool,
    pub lateral: bool,
}

impl Default for RuleSet {
    fn default() -> Self {
        RuleSet {
            free_space: true,
            lateral: true,
        }
    }
}

impl RuleSet {
    pub fn all() -> Self {
        Self::default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldParams {
    /// Number of lanes.
    pub lanes: Lane,
    /// Prediction horizon in steps.
    pub horizon: usize,
    /// Step length (s).
    pub tau: f64,
    /// Interaction distance: vehicles closer than this are neighbors.
    pub d_bar: f64,
    /// Longitudinal distance under which a simultaneous lane swap is a conflict.
    pub d_hat: f64,
    /// Equilibrium tolerance of the game.
    pub eps_game: f64,
    /// Violation threshold for strict inequalities in the big-M patterns.
    pub eps_strict: f64,
    #[serde(default)]
    pub rules: RuleSet,
}

impl WorldParams {
    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if self.lanes < 1 {
            errs.push(format!("world.L must be >= 1, got {}", self.lanes));
        }
        if self.horizon < 1 {
            errs.push("world.T must be >= 1".to_string());
        }
        for (name, value) in [
            ("tau", self.tau),
            ("d_bar", self.d_bar),
            ("d_hat", self.d_hat),
            ("eps_game", self.eps_game),
            ("eps_strict", self.eps_strict),
        ] {
            if !(value.is_finite() && value > 0.0) {
                errs.push(format!("world.{name} must be positive, got {value}"));
            }
        }
        if self.d_hat > self.d_bar {
            errs.push(format!(
                "world.d_hat ({}) must not exceed world.d_bar ({})",
                self.d_hat, self.d_bar
            ));
        }
        errs
    }
}

/// Relative quantities of vehicle `j` seen from vehicle `i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairGeometry {
    pub d: f64,
    pub l: Lane,
    pub v_rel: f64,
}

impl PairGeometry {
    pub fn between(i: &VehicleState, j: &VehicleState) -> Self {
        PairGeometry {
            d: j.pos - i.pos,
            l: j.z - i.z,
            v_rel: j.v - i.v,
        }
    }

    pub fn swapped(self) -> Self {
        PairGeometry {
            d: -self.d,
            l: -self.l,
            v_rel: -self.v_rel,
        }
    }
}

/// Closed speed interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

/// Inclusive lane range.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LaneRange {
    pub lo: Lane,
    pub hi: Lane,
}

impl LaneRange {
    pub fn contains(&self, z: Lane) -> bool {
        self.lo <= z && z <= self.hi
    }

    pub fn lanes(&self) -> impl Iterator<Item = Lane> {
        self.lo..=self.hi
    }

    pub fn len(&self) -> usize {
        (self.hi - self.lo + 1).max(0) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.hi < self.lo
    }
}

/// Euler-forward update of the relative distance between `i` and `j`.
pub fn update_distance(d: f64, v_i: f64, v_j: f64, tau: f64) -> f64 {
    d + tau * (v_j - v_i)
}

/// Affine headway rule `d0 + h v`.
pub fn safety_distance(v: f64, d0: f64, h: f64) -> f64 {
    d0 + h * v
}

/// Speeds reachable at the next step from `v_now`.
pub fn velocity_window(v_now: f64, params: &VehicleParams) -> Interval {
    Interval {
        lo: (v_now - params.delta).max(0.0),
        hi: (v_now + params.delta).min(params.v_max),
    }
}

/// Lanes allowed at the next step given the indicators active now.
pub fn lane_window(z_now: Lane, a_l: bool, a_r: bool, lanes: Lane) -> LaneRange {
    LaneRange {
        lo: (z_now - a_r as Lane).max(1),
        hi: (z_now + a_l as Lane).min(lanes),
    }
}

/// `N_i = { j != i : |pos_j - pos_i| <= d_bar }`, each list sorted ascending.
pub fn compute_neighborhoods(positions: &[f64], d_bar: f64) -> Vec<Vec<usize>> {
    let n = positions.len();
    let mut out = vec![Vec::new(); n];
    for i in 0..n {
        for j in (i + 1)..n {
            if (positions[j] - positions[i]).abs() <= d_bar {
                out[i].push(j);
                out[j].push(i);
            }
        }
    }
    for list in &mut out {
        list.sort_unstable();
    }
    out
}

/// Decision sequence of one vehicle over a horizon of `T` steps.
///
/// `v[t-1]`, `z[t-1]` hold the speed and lane at step `t` for `t` in `1..=T`;
/// `a_l[t]`, `a_r[t]` hold the indicators at step `t` for `t` in `0..T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub v: Vec<f64>,
    pub z: Vec<Lane>,
    pub a_l: Vec<bool>,
    pub a_r: Vec<bool>,
}

impl Plan {
    /// Keep the current lane and speed with both indicators off.
    pub fn hold(state: &VehicleState, horizon: usize) -> Self {
        Plan {
            v: vec![state.v; horizon],
            z: vec![state.z; horizon],
            a_l: vec![false; horizon],
            a_r: vec![false; horizon],
        }
    }

    pub fn horizon(&self) -> usize {
        self.v.len()
    }

    /// The plan as seen `s` steps later: the remaining steps move to the
    /// front and the last lane and speed are held with indicators off.
    pub fn shifted(&self, s: usize) -> Self {
        let n = self.horizon();
        let pick = |t: usize| (t + s).min(n.saturating_sub(1));
        Plan {
            v: (0..n).map(|t| self.v[pick(t)]).collect(),
            z: (0..n).map(|t| self.z[pick(t)]).collect(),
            a_l: (0..n).map(|t| t + s < n && self.a_l[t + s]).collect(),
            a_r: (0..n).map(|t| t + s < n && self.a_r[t + s]).collect(),
        }
    }

    /// Speed at step `t` in `0..=T`, step 0 being the current state.
    pub fn speed_at(&self, state: &VehicleState, t: usize) -> f64 {
        if t == 0 {
            state.v
        } else {
            self.v[t - 1]
        }
    }

    pub fn lane_at(&self, state: &VehicleState, t: usize) -> Lane {
        if t == 0 {
            state.z
        } else {
            self.z[t - 1]
        }
    }

    /// Largest tracking deviation, the epigraph value of the cost.
    pub fn tracking_cost(&self, params: &VehicleParams) -> f64 {
        let mut q: f64 = 0.0;
        for t in 0..self.horizon() {
            q = q.max((self.v[t] - params.v_ref[t]).abs());
            q = q.max(params.r * (self.z[t] - params.z_ref[t]).abs() as f64);
        }
        q
    }

    /// Checks speed, lane and indicator limits against the own constraint set.
    pub fn own_violations(
        &self,
        state: &VehicleState,
        params: &VehicleParams,
        lanes: Lane,
        tol: f64,
    ) -> Vec<String> {
        let mut errs = Vec::new();
        let horizon = self.horizon();
        if self.z.len() != horizon || self.a_l.len() != horizon || self.a_r.len() != horizon {
            errs.push("plan sequences have inconsistent lengths".to_string());
            return errs;
        }
        for t in 0..horizon {
            if self.a_l[t] && self.a_r[t] {
                errs.push(format!("both indicators on at step {t}"));
            }
            let prev_v = self.speed_at(state, t);
            let w = velocity_window(prev_v, params);
            if self.v[t] < w.lo - tol || self.v[t] > w.hi + tol {
                errs.push(format!(
                    "speed {} at step {} outside [{}, {}]",
                    self.v[t],
                    t + 1,
                    w.lo,
                    w.hi
                ));
            }
            let prev_z = self.lane_at(state, t);
            let lw = lane_window(prev_z, self.a_l[t], self.a_r[t], lanes);
            if !lw.contains(self.z[t]) {
                errs.push(format!(
                    "lane {} at step {} outside [{}, {}]",
                    self.z[t],
                    t + 1,
                    lw.lo,
                    lw.hi
                ));
            }
        }
        errs
    }
}

/// Predicted distances `d_{i,j}(t)` for `t` in `0..=T` under both plans.
pub fn predicted_distances(
    own: (&VehicleState, &Plan),
    other: (&VehicleState, &Plan),
    tau: f64,
) -> Vec<f64> {
    let horizon = own.1.horizon();
    let mut d = vec![other.0.pos - own.0.pos];
    for t in 0..horizon {
        let next = update_distance(
            d[t],
            own.1.speed_at(own.0, t),
            other.1.speed_at(other.0, t),
            tau,
        );
        d.push(next);
    }
    d
}
