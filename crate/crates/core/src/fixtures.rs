//! Case files bundled with the crate.

/// Lossless two-bus line with two locally optimal voltage profiles.
pub const TWO_BUS: &str = include_str!("../fixtures/two_bus.m");

/// IEEE 39-bus New England system.
pub const CASE39: &str = include_str!("../fixtures/case39.m");

/// Per-unit constants of the two-bus fixture, shared by the analytic oracles.
pub mod two_bus {
    /// Reference-bus voltage magnitude.
    pub const V1: f64 = 0.9;
    /// Line reactance.
    pub const X: f64 = 0.25;
    /// Active load at bus 2.
    pub const PD: f64 = 3.43;
    /// Capacity of the cheap unit at bus 2.
    pub const PG2_MAX: f64 = 2.5;
    /// Reactive cap of the unit at bus 1.
    pub const QG1_MAX: f64 = 2.2;

    /// `|V₂|` at the two local optima for one reactive load.
    #[derive(Clone, Copy, Debug, PartialEq)]
    pub struct Optima {
        /// Cheap branch: the bus-2 unit at capacity.
        pub vm2_high: f64,
        /// Expensive branch: the bus-1 reactive cap binds.
        pub vm2_low: f64,
        /// Line transfer on the expensive branch, p.u.
        pub line_p_low: f64,
    }
}

impl two_bus::Optima {
    /// Both local optima at reactive load `qd` (p.u.), or `None` outside the
    /// band where both exist.
    pub fn at(qd: f64) -> Option<Self> {
        use two_bus::*;
        let p = PD - PG2_MAX;
        let b = V1 * V1 - 2.0 * qd * X;
        let disc = b * b - 4.0 * X * X * (p * p + qd * qd);
        if disc < 0.0 {
            return None;
        }
        let u_hi = 0.5 * (b + libm::sqrt(disc));
        // low branch: the bus-1 reactive cap binds
        let u_lo = V1 * V1 - X * (QG1_MAX + qd);
        let xp2 = V1 * V1 * u_lo - (u_lo + X * qd) * (u_lo + X * qd);
        if u_lo <= 0.0 || xp2 < 0.0 {
            return None;
        }
        Some(Self {
            vm2_high: libm::sqrt(u_hi),
            vm2_low: libm::sqrt(u_lo),
            line_p_low: libm::sqrt(xp2) / X,
        })
    }
}
