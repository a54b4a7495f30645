//! Single-class deflection queue.
//!
//! One egress queue competes for a slotted server with the deflected packets
//! of its own class, which always win arbitration. Packets reaching the sink
//! are deflected with probability `p_d` and re-enter the deflected queue. The
//! coupled system is decomposed into two queue nodes with modified service
//! processes, and the second moment of the deflected stream is found by a
//! damped fixed-point iteration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::traffic::GGeoParams;

/// Mean and SCV of a server's service time, in slots.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ServiceProcess {
    pub mean: f64,
    pub scv: f64,
}

impl ServiceProcess {
    /// One-slot deterministic service, the link occupancy of a single packet.
    pub const UNIT: ServiceProcess = ServiceProcess { mean: 1.0, scv: 0.0 };

    pub fn validate(&self) -> Result<()> {
        if !(self.mean >= 1.0) || !self.mean.is_finite() {
            return Err(Error::invalid(format!(
                "service mean must be >= 1 slot, got {}",
                self.mean
            )));
        }
        if !(self.scv >= 0.0) || !self.scv.is_finite() {
            return Err(Error::invalid(format!("service SCV must be >= 0, got {}", self.scv)));
        }
        Ok(())
    }
}

/// A value that may have been forced into its admissible range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Clamped {
    pub value: f64,
    pub clamped: bool,
}

impl Clamped {
    pub fn floor_zero(raw: f64) -> Self {
        if raw < 0.0 {
            Clamped { value: 0.0, clamped: true }
        } else {
            Clamped { value: raw, clamped: false }
        }
    }
}

/// Number of clamp events, by kind.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClampEvents {
    pub empty_prob: u32,
    pub service_scv: u32,
    pub wait: u32,
}

impl ClampEvents {
    pub fn total(&self) -> u32 {
        self.empty_prob + self.service_scv + self.wait
    }

    pub fn absorb(&mut self, other: ClampEvents) {
        self.empty_prob += other.empty_prob;
        self.service_scv += other.service_scv;
        self.wait += other.wait;
    }

    fn note_empty(&mut self, c: Clamped) -> f64 {
        self.empty_prob += c.clamped as u32;
        c.value
    }

    fn note_scv(&mut self, c: Clamped) -> f64 {
        self.service_scv += c.clamped as u32;
        c.value
    }

    fn note_wait(&mut self, c: Clamped) -> f64 {
        self.wait += c.clamped as u32;
        c.value
    }
}

fn check_prob(p: f64) -> Result<()> {
    if (0.0..1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "deflection probability must lie in [0, 1), got {p}"
        )))
    }
}

fn unstable(server: &str, utilization: f64) -> Error {
    Error::Unstable {
        server: server.to_string(),
        utilization,
    }
}

/// Mean number of deflections before a packet is consumed.
pub fn expected_deflections(p_d: f64) -> Result<f64> {
    check_prob(p_d)?;
    Ok(p_d / (1.0 - p_d))
}

/// Rate of deflection events generated by a stream of rate `rate`.
pub fn deflected_rate(rate: f64, p_d: f64) -> Result<f64> {
    if !(rate >= 0.0) {
        return Err(Error::invalid(format!("rate must be non-negative, got {rate}")));
    }
    Ok(rate * expected_deflections(p_d)?)
}

/// Probability that the class queue and its server are both empty.
pub fn empty_prob(rho_class: f64, rho_defl: f64, occupancy: f64) -> Result<Clamped> {
    let total = rho_class + rho_defl;
    if total >= 1.0 {
        return Err(unstable("canonical server", total));
    }
    let denom = occupancy + total;
    let interference = if denom > 0.0 {
        rho_defl * occupancy / denom
    } else {
        0.0
    };
    let raw = 1.0 - rho_class - interference;
    Ok(if raw < 0.0 {
        Clamped { value: 0.0, clamped: true }
    } else if raw > 1.0 {
        Clamped { value: 1.0, clamped: true }
    } else {
        Clamped { value: raw, clamped: false }
    })
}

/// Mean of the modified service time by Little's law on the server.
pub fn modified_service_mean(p_empty: f64, rate: f64) -> f64 {
    (1.0 - p_empty) / rate
}

/// SCV of the modified service time that reproduces `occupancy` for the
/// given modified utilization and arrival SCV.
pub fn modified_service_scv(occupancy: f64, rho_mod: f64, scv_arrival: f64) -> Clamped {
    let raw = ((1.0 - rho_mod) * (2.0 * occupancy + rho_mod) - rho_mod * scv_arrival)
        / (rho_mod * rho_mod);
    Clamped::floor_zero(raw)
}

/// Two-moment SCV of the stationary inter-departure interval.
pub fn departure_scv(rho: f64, scv_arrival: f64, scv_service: f64) -> f64 {
    let r2 = rho * rho;
    (1.0 - r2) * scv_arrival + r2 * scv_service
}

/// Rate-weighted SCV of two merged streams.
pub fn merge_scv(rate_a: f64, scv_a: f64, rate_b: f64, scv_b: f64) -> f64 {
    let total = rate_a + rate_b;
    if total <= 0.0 {
        return 1.0;
    }
    (rate_a * scv_a + rate_b * scv_b) / total
}

/// SCV of the sub-stream kept with probability `p` by random splitting.
pub fn split_scv(scv_merged: f64, p: f64) -> f64 {
    1.0 + p * (scv_merged - 1.0)
}

/// Mean wait of deflected packets in their (highest priority) queue.
pub fn wait_deflected(
    rho_defl: f64,
    t_defl: f64,
    rho_class: f64,
    t_class: f64,
    scv_defl: f64,
    rate_defl: f64,
) -> Result<Clamped> {
    if rate_defl <= 0.0 {
        return Ok(Clamped { value: 0.0, clamped: false });
    }
    if rho_defl >= 1.0 {
        return Err(unstable("deflected queue", rho_defl));
    }
    let num = rho_defl * (t_defl - 1.0)
        + rho_class * (t_class - 1.0)
        + t_defl * (scv_defl + rate_defl - 1.0);
    Ok(Clamped::floor_zero(num / (2.0 * (1.0 - rho_defl))))
}

/// Mean wait of the class in its egress queue behind the deflected stream.
pub fn wait_class(
    rho_defl: f64,
    t_defl: f64,
    wait_defl: f64,
    rho_class: f64,
    t_class: f64,
    scv_class: f64,
    rate_class: f64,
) -> Result<Clamped> {
    let total = rho_class + rho_defl;
    if total >= 1.0 {
        return Err(unstable("class queue", total));
    }
    let num = rho_defl * (t_defl + 1.0)
        + 2.0 * rho_defl * wait_defl
        + rho_class * (t_class - 1.0)
        + t_class * (scv_class + rate_class - 1.0);
    Ok(Clamped::floor_zero(num / (2.0 * (1.0 - total))))
}

/// Damped fixed-point schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    pub damping: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            damping: 0.5,
            tolerance: 1e-6,
            max_iterations: 1000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CanonicalInput {
    pub arrivals: GGeoParams,
    pub service: ServiceProcess,
    pub deflect_service: ServiceProcess,
    pub deflect_prob: f64,
}

impl CanonicalInput {
    /// Unit-service system, the building block used on every NoC link.
    pub fn unit(arrivals: GGeoParams, deflect_prob: f64) -> Self {
        CanonicalInput {
            arrivals,
            service: ServiceProcess::UNIT,
            deflect_service: ServiceProcess::UNIT,
            deflect_prob,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CanonicalResult {
    pub deflected_rate: f64,
    pub deflected_scv: f64,
    pub empty_prob: f64,
    pub mod_service: ServiceProcess,
    pub mod_service_defl: ServiceProcess,
    pub occupancy: f64,
    pub depart_scv_class: f64,
    pub depart_scv_defl: f64,
    pub merged_scv: f64,
    pub wait_defl: f64,
    pub wait_class: f64,
    pub iterations: usize,
    pub converged: bool,
    pub clamps: ClampEvents,
}

/// Iterated quantities.
#[derive(Debug, Clone, Copy)]
struct State {
    scv_defl: f64,
    wait_defl: f64,
    wait_class: f64,
    occ_class: f64,
    occ_defl: f64,
}

impl State {
    fn blend(&self, target: &State, a: f64) -> State {
        let mix = |x: f64, y: f64| (1.0 - a) * x + a * y;
        State {
            scv_defl: mix(self.scv_defl, target.scv_defl),
            wait_defl: mix(self.wait_defl, target.wait_defl),
            wait_class: mix(self.wait_class, target.wait_class),
            occ_class: mix(self.occ_class, target.occ_class),
            occ_defl: mix(self.occ_defl, target.occ_defl),
        }
    }

    fn max_rel_change(&self, next: &State) -> f64 {
        let rel = |a: f64, b: f64| {
            let d = (a - b).abs();
            if d == 0.0 {
                0.0
            } else {
                d / a.abs().max(b.abs()).max(1e-12)
            }
        };
        rel(self.scv_defl, next.scv_defl)
            .max(rel(self.wait_class, next.wait_class))
            .max(rel(self.wait_defl, next.wait_defl))
            .max(rel(self.occ_class, next.occ_class))
    }
}

/// Everything one pass of the chain produces.
struct Pass {
    next: State,
    empty_prob: f64,
    mod_service: ServiceProcess,
    mod_service_defl: ServiceProcess,
    depart_scv_class: f64,
    depart_scv_defl: f64,
    merged_scv: f64,
    clamps: ClampEvents,
}

struct Chain {
    rate: f64,
    scv: f64,
    t_class: f64,
    scv_service: f64,
    t_defl: f64,
    scv_service_defl: f64,
    p_d: f64,
    rate_defl: f64,
    rho_class: f64,
    rho_defl: f64,
}

impl Chain {
    fn evaluate(&self, x: &State) -> Result<Pass> {
        let mut clamps = ClampEvents::default();

        let p0 = clamps.note_empty(empty_prob(self.rho_class, self.rho_defl, x.occ_class)?);
        let t_mod = modified_service_mean(p0, self.rate);
        let rho_mod = self.rate * t_mod;
        let scv_mod = if rho_mod > 0.0 {
            clamps.note_scv(modified_service_scv(x.occ_class, rho_mod, self.scv))
        } else {
            self.scv_service
        };

        // Mirror image for the deflected node: the class interferes with it.
        let p0_d = clamps.note_empty(empty_prob(self.rho_defl, self.rho_class, x.occ_defl)?);
        let t_mod_d = modified_service_mean(p0_d, self.rate_defl);
        let rho_mod_d = self.rate_defl * t_mod_d;
        let scv_mod_d = if rho_mod_d > 0.0 {
            clamps.note_scv(modified_service_scv(x.occ_defl, rho_mod_d, x.scv_defl))
        } else {
            self.scv_service_defl
        };

        let dep_class = departure_scv(rho_mod.min(1.0), self.scv, scv_mod);
        let dep_defl = departure_scv(rho_mod_d.min(1.0), x.scv_defl, scv_mod_d);
        let merged = merge_scv(self.rate_defl, dep_defl, self.rate, dep_class);
        let scv_defl = split_scv(merged, self.p_d);

        let w_d = clamps.note_wait(wait_deflected(
            self.rho_defl,
            self.t_defl,
            self.rho_class,
            self.t_class,
            scv_defl,
            self.rate_defl,
        )?);
        let w_i = clamps.note_wait(wait_class(
            self.rho_defl,
            self.t_defl,
            w_d,
            self.rho_class,
            self.t_class,
            self.scv,
            self.rate,
        )?);

        Ok(Pass {
            next: State {
                scv_defl,
                wait_defl: w_d,
                wait_class: w_i,
                occ_class: self.rate * (w_i + t_mod),
                occ_defl: self.rate_defl * (w_d + t_mod_d),
            },
            empty_prob: p0,
            mod_service: ServiceProcess { mean: t_mod, scv: scv_mod },
            mod_service_defl: ServiceProcess { mean: t_mod_d, scv: scv_mod_d },
            depart_scv_class: dep_class,
            depart_scv_defl: dep_defl,
            merged_scv: merged,
            clamps,
        })
    }
}

pub fn solve_canonical(input: &CanonicalInput) -> Result<CanonicalResult> {
    solve_canonical_with(input, &SolverOptions::default())
}

pub fn solve_canonical_with(input: &CanonicalInput, opts: &SolverOptions) -> Result<CanonicalResult> {
    input.arrivals.validate()?;
    input.service.validate()?;
    input.deflect_service.validate()?;
    check_prob(input.deflect_prob)?;

    let rate = input.arrivals.rate;
    let rate_defl = deflected_rate(rate, input.deflect_prob)?;
    let chain = Chain {
        rate,
        scv: input.arrivals.scv_arrival,
        t_class: input.service.mean,
        scv_service: input.service.scv,
        t_defl: input.deflect_service.mean,
        scv_service_defl: input.deflect_service.scv,
        p_d: input.deflect_prob,
        rate_defl,
        rho_class: rate * input.service.mean,
        rho_defl: rate_defl * input.deflect_service.mean,
    };
    let total = chain.rho_class + chain.rho_defl;
    if total >= 1.0 {
        return Err(unstable("canonical server", total));
    }

    let mut x = State {
        scv_defl: 1.0,
        wait_defl: 0.0,
        wait_class: 0.0,
        occ_class: chain.rho_class,
        occ_defl: chain.rho_defl,
    };

    if rate_defl == 0.0 {
        // Nothing circulates: the chain has no feedback, one pass is exact.
        let first = chain.evaluate(&x)?;
        // Occupancy from the first pass feeds the service moments once more.
        let pass = chain.evaluate(&first.next)?;
        return Ok(finish(&pass, 0.0, 1, true));
    }

    let mut iterations = 0;
    let mut converged = false;
    let mut pass = chain.evaluate(&x)?;
    while iterations < opts.max_iterations {
        iterations += 1;
        let next = x.blend(&pass.next, opts.damping);
        let delta = x.max_rel_change(&next);
        x = next;
        pass = chain.evaluate(&x)?;
        if delta < opts.tolerance {
            converged = true;
            break;
        }
    }
    let mut out = finish(&pass, rate_defl, iterations, converged);
    // Report the iterate itself, not one extra undamped step past it.
    out.deflected_scv = x.scv_defl;
    out.wait_defl = x.wait_defl;
    out.wait_class = x.wait_class;
    out.occupancy = x.occ_class;
    Ok(out)
}

fn finish(pass: &Pass, rate_defl: f64, iterations: usize, converged: bool) -> CanonicalResult {
    CanonicalResult {
        deflected_rate: rate_defl,
        deflected_scv: pass.next.scv_defl,
        empty_prob: pass.empty_prob,
        mod_service: pass.mod_service,
        mod_service_defl: pass.mod_service_defl,
        occupancy: pass.next.occ_class,
        depart_scv_class: pass.depart_scv_class,
        depart_scv_defl: pass.depart_scv_defl,
        merged_scv: pass.merged_scv,
        wait_defl: pass.next.wait_defl,
        wait_class: pass.next.wait_class,
        iterations,
        converged,
        clamps: pass.clamps,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    #[test]
    fn deflection_counts() {
        close(expected_deflections(0.0).unwrap(), 0.0, 0.0);
        close(expected_deflections(0.5).unwrap(), 1.0, 1e-15);
        close(expected_deflections(0.3).unwrap(), 0.428571, 1e-6);
        assert!(expected_deflections(1.0).is_err());
        close(deflected_rate(0.3, 0.0).unwrap(), 0.0, 0.0);
        close(deflected_rate(0.2, 0.5).unwrap(), 0.2, 1e-15);
        close(deflected_rate(0.33, 0.3).unwrap(), 0.141428, 1e-6);
    }

    #[test]
    fn empty_probability() {
        close(empty_prob(0.0, 0.0, 3.0).unwrap().value, 1.0, 0.0);
        close(empty_prob(0.5, 0.0, 1.0).unwrap().value, 0.5, 1e-15);
        close(empty_prob(0.3, 0.2, 1.0).unwrap().value, 0.56667, 1e-5);
        assert!(matches!(empty_prob(0.6, 0.4, 1.0), Err(Error::Unstable { .. })));
    }

    #[test]
    fn modified_service() {
        close(modified_service_mean(1.0 - 0.2, 0.2), 1.0, 1e-15);
        close(modified_service_mean(0.7, 0.2), 1.5, 1e-15);
        close(modified_service_mean(0.56667, 0.3), 1.44443, 1e-5);
        let s = modified_service_scv(1.0, 0.5, 1.0);
        close(s.value, 3.0, 1e-12);
        assert!(!s.clamped);
        // Numerator exactly zero: (1 - r)(2n + r) = r c.
        let (r, c) = (0.5, 1.0);
        let n = (r * c / (1.0 - r) - r) / 2.0;
        let z = modified_service_scv(n, r, c);
        close(z.value, 0.0, 1e-12);
        assert!(!z.clamped);
        assert!(modified_service_scv(0.0, 0.5, 3.0).clamped);
    }

    #[test]
    fn flow_operations() {
        close(departure_scv(0.0, 1.7, 0.2), 1.7, 1e-15);
        close(departure_scv(1.0, 1.7, 0.2), 0.2, 1e-15);
        close(departure_scv(0.5, 1.0, 0.25), 0.8125, 1e-15);
        close(merge_scv(0.0, 5.0, 0.3, 1.3), 1.3, 1e-15);
        close(merge_scv(0.2, 0.9, 0.2, 0.9), 0.9, 1e-15);
        close(merge_scv(0.1, 2.0, 0.3, 1.0), 1.25, 1e-15);
        close(split_scv(1.8, 1.0), 1.8, 1e-15);
        close(split_scv(1.8, 0.0), 1.0, 1e-15);
        close(split_scv(1.8, 0.3), 1.24, 1e-12);
    }

    #[test]
    fn waiting_times() {
        close(wait_deflected(0.0, 1.0, 0.3, 1.0, 1.0, 0.0).unwrap().value, 0.0, 0.0);
        close(
            wait_deflected(0.25, 1.0, 0.25, 1.0, 1.0, 0.25).unwrap().value,
            0.1667,
            1e-4,
        );
        assert!(wait_deflected(1.0, 1.0, 0.0, 1.0, 1.0, 1.0).is_err());
        close(wait_class(0.0, 1.0, 0.0, 0.3, 1.0, 0.7, 0.3).unwrap().value, 0.0, 1e-15);
        close(wait_class(0.0, 1.0, 0.0, 0.5, 1.0, 1.0, 0.5).unwrap().value, 0.5, 1e-15);
        assert!(wait_class(0.5, 1.0, 0.0, 0.5, 1.0, 1.0, 0.5).is_err());
    }

    #[test]
    fn no_deflection_is_exact_in_one_iteration() {
        let a = GGeoParams::new(0.4, 1.3).unwrap();
        let r = solve_canonical(&CanonicalInput::unit(a, 0.0)).unwrap();
        assert_eq!(r.iterations, 1);
        assert!(r.converged);
        assert_eq!(r.deflected_rate, 0.0);
        let direct = wait_class(0.0, 1.0, 0.0, 0.4, 1.0, 1.3, 0.4).unwrap().value;
        close(r.wait_class, direct, 1e-12);
    }

    #[test]
    fn wait_grows_with_load() {
        let mut last = -1.0;
        for k in 1..=6 {
            let lam = 0.05 * k as f64;
            let a = GGeoParams::geometric(lam).unwrap();
            let r = solve_canonical(&CanonicalInput::unit(a, 0.3)).unwrap();
            assert!(r.converged);
            assert!(r.wait_class > last, "lambda {lam}: {} <= {last}", r.wait_class);
            last = r.wait_class;
        }
    }

    #[test]
    fn solver_is_deterministic() {
        let a = GGeoParams::new(0.2, 2.0).unwrap();
        let i = CanonicalInput::unit(a, 0.4);
        assert_eq!(solve_canonical(&i).unwrap(), solve_canonical(&i).unwrap());
    }

    #[test]
    fn rejects_unstable_input() {
        let a = GGeoParams::geometric(0.6).unwrap();
        assert!(matches!(
            solve_canonical(&CanonicalInput::unit(a, 0.5)),
            Err(Error::Unstable { .. })
        ));
    }
}
