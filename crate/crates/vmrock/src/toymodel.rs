//! Single-mass switching system: a mass-spring-damper whose spring anchor
//! jumps between two references as the mass crosses trigger positions.
//!
//! The switching law is realized as a two-state hysteresis automaton: an
//! upward crossing of `x1` selects `r2`, a downward crossing of `x2` selects
//! `r1`. Along any trajectory this reproduces the region conditions
//! `r = r1` iff `(ẋ ≥ 0 ∧ x ≤ x1) ∨ (ẋ ≤ 0 ∧ x ≤ x2)` and the mirror rule
//! for `r2`, while resolving the overlap band `x2 < x < x1` to the previously
//! held reference.

use thiserror::Error;

#[derive(Debug, Clone, Copy)]
pub struct ToyParams {
    pub m: f64,
    pub c: f64,
    pub k: f64,
    pub r1: f64,
    pub r2: f64,
    /// Upward switch position.
    pub x1: f64,
    /// Downward switch position; `x2 < x1`.
    pub x2: f64,
}

impl ToyParams {
    /// Parameter set used throughout the tests: references at ±1, triggers at
    /// ±0.8, unit mass with light damping.
    pub fn fixture() -> Self {
        ToyParams { m: 1.0, c: 0.5, k: 10.0, r1: 1.0, r2: -1.0, x1: 0.8, x2: -0.8 }
    }

    pub fn validate(&self) -> Result<(), ToyError> {
        if !(self.m > 0.0) || !(self.k > 0.0) || self.c < 0.0 {
            return Err(ToyError::BadParams("need m > 0, k > 0, c >= 0".into()));
        }
        if !(self.x2 < self.x1) {
            return Err(ToyError::BadParams("need x2 < x1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum ToyError {
    #[error("invalid toy parameters: {0}")]
    BadParams(String),
    #[error("need at least {0} initial conditions")]
    TooFewInitialConditions(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ToyRef {
    R1,
    R2,
}

/// Reference selection in the unambiguous regions; `prev` resolves the
/// hysteresis band.
pub fn toy_reference(x: f64, xdot: f64, p: &ToyParams, prev: ToyRef) -> ToyRef {
    if x >= p.x1 {
        ToyRef::R2
    } else if x <= p.x2 {
        ToyRef::R1
    } else if xdot > 0.0 {
        // moving up inside the band always belongs to the r1 region
        ToyRef::R1
    } else {
        prev
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ToySample {
    pub t: f64,
    pub x: f64,
    pub xdot: f64,
    pub r: f64,
    pub energy: f64,
}

#[derive(Debug, Clone)]
pub struct ToyTrace {
    pub samples: Vec<ToySample>,
    /// (time, injected energy) for every reference switch.
    pub switch_events: Vec<(f64, f64)>,
    /// Cumulative damper dissipation, J.
    pub dissipation: f64,
}

pub fn toy_energy(x: f64, xdot: f64, r: f64, p: &ToyParams) -> f64 {
    0.5 * p.m * xdot * xdot + 0.5 * p.k * (x - r) * (x - r)
}

fn ref_value(r: ToyRef, p: &ToyParams) -> f64 {
    match r {
        ToyRef::R1 => p.r1,
        ToyRef::R2 => p.r2,
    }
}

/// Semi-implicit integration with the hysteresis automaton evaluated at every
/// step. Switch events are detected at sample resolution.
pub fn toy_simulate(p: &ToyParams, ic: (f64, f64), duration: f64, dt: f64) -> ToyTrace {
    assert!(dt > 0.0 && duration >= 0.0);
    let (mut x, mut xdot) = ic;
    // initial reference from the region conditions; default r1 inside the band
    let mut r = toy_reference(x, xdot, p, ToyRef::R1);
    let steps = (duration / dt).round() as usize;
    let mut samples = Vec::with_capacity(steps + 1);
    let mut switch_events = Vec::new();
    let mut dissipation = 0.0;
    samples.push(ToySample { t: 0.0, x, xdot, r: ref_value(r, p), energy: toy_energy(x, xdot, ref_value(r, p), p) });
    for i in 0..steps {
        let rv = ref_value(r, p);
        let accel = (-p.c * xdot - p.k * (x - rv)) / p.m;
        xdot += accel * dt;
        x += xdot * dt;
        dissipation += p.c * xdot * xdot * dt;
        let t = (i + 1) as f64 * dt;
        let r_new = toy_reference(x, xdot, p, r);
        if r_new != r {
            let jump = toy_energy(x, xdot, ref_value(r_new, p), p)
                - toy_energy(x, xdot, ref_value(r, p), p);
            switch_events.push((t, jump));
            r = r_new;
        }
        samples.push(ToySample {
            t,
            x,
            xdot,
            r: ref_value(r, p),
            energy: toy_energy(x, xdot, ref_value(r, p), p),
        });
    }
    ToyTrace { samples, switch_events, dissipation }
}

/// Successive ẋ values at upward crossings of the section x = x1, linearly
/// interpolated between samples.
pub fn section_crossings(trace: &ToyTrace, x1: f64) -> Vec<f64> {
    let mut out = Vec::new();
    for w in trace.samples.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        if a.x < x1 && b.x >= x1 && b.xdot > 0.0 {
            let alpha = (x1 - a.x) / (b.x - a.x);
            out.push(a.xdot + alpha * (b.xdot - a.xdot));
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct PoincareReport {
    /// Per initial condition: the full crossing sequence.
    pub sequences: Vec<Vec<f64>>,
    /// Per initial condition: the limit value, None when non-convergent.
    pub limits: Vec<Option<f64>>,
    /// Max spread of the limit values across initial conditions.
    pub spread: Option<f64>,
    pub converged: bool,
}

/// Simulate each initial condition and compare the tails of the Poincaré
/// crossing sequences.
pub fn poincare_convergence(
    p: &ToyParams,
    ics: &[(f64, f64)],
    duration: f64,
    dt: f64,
) -> Result<PoincareReport, ToyError> {
    p.validate()?;
    if ics.len() < 2 {
        return Err(ToyError::TooFewInitialConditions(2));
    }
    let mut sequences = Vec::with_capacity(ics.len());
    let mut limits = Vec::with_capacity(ics.len());
    for &ic in ics {
        let trace = toy_simulate(p, ic, duration, dt);
        let seq = section_crossings(&trace, p.x1);
        // convergent when the last few crossings have settled
        let limit = if seq.len() >= 4 {
            let tail = &seq[seq.len() - 3..];
            let spread = tail.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                - tail.iter().cloned().fold(f64::INFINITY, f64::min);
            if spread < 1e-4 {
                Some(*seq.last().unwrap())
            } else {
                None
            }
        } else {
            None
        };
        sequences.push(seq);
        limits.push(limit);
    }
    let converged = limits.iter().all(|l| l.is_some());
    let spread = if converged {
        let vals: Vec<f64> = limits.iter().map(|l| l.unwrap()).collect();
        Some(
            vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                - vals.iter().cloned().fold(f64::INFINITY, f64::min),
        )
    } else {
        None
    };
    Ok(PoincareReport { sequences, limits, spread, converged })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn reference_regions() {
        let p = ToyParams::fixture();
        assert_eq!(toy_reference(0.0, 1.0, &p, ToyRef::R2), ToyRef::R1);
        assert_eq!(toy_reference(0.9, 1.0, &p, ToyRef::R1), ToyRef::R2);
        // inside the band with xdot < 0 the previous reference is retained
        assert_eq!(toy_reference(0.0, -1.0, &p, ToyRef::R2), ToyRef::R2);
        assert_eq!(toy_reference(0.0, -1.0, &p, ToyRef::R1), ToyRef::R1);
    }

    #[test]
    fn heavy_damping_rest_at_reference() {
        // triggers widened so r1 sits inside the band: true equilibrium
        let mut p = ToyParams::fixture();
        p.c = 500.0;
        p.x1 = 1.5;
        p.x2 = -1.5;
        let trace = toy_simulate(&p, (p.r1, 0.0), 1.0, 1e-4);
        let last = trace.samples.last().unwrap();
        assert_relative_eq!(last.x, p.r1, epsilon = 1e-9);
    }

    #[test]
    fn matches_analytic_damped_oscillator_between_switches() {
        // start inside the band moving slowly: no switch for a while, compare
        // against the closed-form underdamped solution about r1
        let p = ToyParams::fixture();
        let (x0, v0) = (0.5, 0.0);
        let dt = 1e-5;
        let trace = toy_simulate(&p, (x0, v0), 0.3, dt);
        let wn = (p.k / p.m).sqrt();
        let zeta = p.c / (2.0 * (p.k * p.m).sqrt());
        let wd = wn * (1.0 - zeta * zeta).sqrt();
        for s in &trace.samples {
            if s.r != p.r1 {
                break;
            }
            let d0 = x0 - p.r1;
            let env = (-zeta * wn * s.t).exp();
            let analytic = p.r1
                + env
                    * (d0 * (wd * s.t).cos()
                        + (v0 + zeta * wn * d0) / wd * (wd * s.t).sin());
            assert!(
                (s.x - analytic).abs() < 1e-4,
                "t={} x={} analytic={}",
                s.t,
                s.x,
                analytic
            );
        }
    }

    #[test]
    fn sustained_oscillation_crosses_both_triggers() {
        let p = ToyParams::fixture();
        let trace = toy_simulate(&p, (0.0, 0.0), 30.0, 1e-4);
        let tail: Vec<&ToySample> =
            trace.samples.iter().filter(|s| s.t > 20.0).collect();
        let max_x = tail.iter().map(|s| s.x).fold(f64::NEG_INFINITY, f64::max);
        let min_x = tail.iter().map(|s| s.x).fold(f64::INFINITY, f64::min);
        assert!(max_x > p.x1, "oscillation must keep crossing x1, max {max_x}");
        assert!(min_x < p.x2, "oscillation must keep crossing x2, min {min_x}");
    }

    #[test]
    fn energy_rate_between_switches() {
        // dE/dt = -c xdot^2 away from switches
        let p = ToyParams::fixture();
        let dt = 1e-5;
        let trace = toy_simulate(&p, (0.0, 0.0), 5.0, dt);
        let mut checked = 0;
        for w in trace.samples.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            if a.r != b.r {
                continue;
            }
            let de = (b.energy - a.energy) / dt;
            let model = -p.c * b.xdot * b.xdot;
            if de.abs() > 1e-6 || model.abs() > 1e-6 {
                assert!(
                    (de - model).abs() < 5e-3 * (1.0 + model.abs()),
                    "t={} dE/dt={} model={}",
                    b.t,
                    de,
                    model
                );
                checked += 1;
            }
        }
        assert!(checked > 1000);
    }

    #[test]
    fn switch_jump_formula_exact() {
        let p = ToyParams::fixture();
        let trace = toy_simulate(&p, (0.0, 0.0), 10.0, 1e-4);
        assert!(!trace.switch_events.is_empty());
        for &(t, jump) in &trace.switch_events {
            let idx = (t / 1e-4).round() as usize;
            let s = &trace.samples[idx];
            let r_old = if s.r == p.r1 { p.r2 } else { p.r1 };
            let expected = 0.5 * p.k * ((s.x - s.r).powi(2) - (s.x - r_old).powi(2));
            assert_relative_eq!(jump, expected, epsilon = 1e-12);
        }
    }

    #[test]
    fn periodic_balance_on_limit_cycle() {
        // once converged, switch injection balances damper dissipation per period
        let p = ToyParams::fixture();
        let trace = toy_simulate(&p, (0.0, 0.0), 60.0, 1e-4);
        // use the last full period: between the last two upward x1 crossings
        let switches: Vec<&(f64, f64)> =
            trace.switch_events.iter().filter(|(t, _)| *t > 40.0).collect();
        assert!(switches.len() >= 4);
        // one period = two switches; sum injection over the final 2 switches
        let injected: f64 = switches[switches.len() - 2..].iter().map(|(_, j)| j).sum();
        let t_start = switches[switches.len() - 3].0;
        let t_end = switches[switches.len() - 1].0;
        let dissipated: f64 = trace
            .samples
            .windows(2)
            .filter(|w| w[1].t > t_start && w[1].t <= t_end)
            .map(|w| p.c * w[1].xdot * w[1].xdot * 1e-4)
            .sum();
        assert!(
            (injected - dissipated).abs() / dissipated < 0.05,
            "injected {injected} vs dissipated {dissipated}"
        );
    }

    #[test]
    fn poincare_convergence_fixture() {
        let p = ToyParams::fixture();
        let ics = [(0.0, 0.0), (1.5, -1.0), (-1.8, 0.5), (0.3, 1.9), (-0.5, -1.5)];
        let report = poincare_convergence(&p, &ics, 60.0, 1e-4).unwrap();
        assert!(report.converged, "limits: {:?}", report.limits);
        assert!(report.spread.unwrap() < 1e-3, "spread {:?}", report.spread);
    }

    #[test]
    fn idempotent_on_cycle() {
        // start two ics from a converged crossing state: spread stays tiny
        let p = ToyParams::fixture();
        let warm = toy_simulate(&p, (0.0, 0.0), 60.0, 1e-4);
        let last = warm.samples.last().unwrap();
        let ics = [(last.x, last.xdot), (last.x, last.xdot)];
        let report = poincare_convergence(&p, &ics, 30.0, 1e-4).unwrap();
        assert!(report.converged);
        assert!(report.spread.unwrap() < 1e-6);
    }

    #[test]
    fn undamped_flagged_nonconvergent() {
        let mut p = ToyParams::fixture();
        p.c = 0.0;
        let ics = [(0.0, 0.0), (0.5, 0.0)];
        let report = poincare_convergence(&p, &ics, 30.0, 1e-4).unwrap();
        assert!(!report.converged);
    }
}
