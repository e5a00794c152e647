//! Piecewise-linear transient runs with per-cycle energy bookkeeping.

use std::collections::HashMap;
use std::io::Write;

use serde::Serialize;

use super::integrate::Propagator;
use super::system::{build_phase_system, Drive, PhaseSystem, Powers, SwitchState};
use crate::error::{Error, Result};
use crate::model::CircuitConfig;

/// A switch state that holds from `start` (seconds into the cycle) until
/// the next segment or the end of the cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub start: f64,
    pub switches: SwitchState,
}

/// Switch plan for one clock cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSchedule {
    /// Ordered by start time; the first segment starts at 0.
    pub segments: Vec<Segment>,
    /// When the comparator samples V_m, seconds into the cycle.
    pub sample_time: f64,
}

impl PhaseSchedule {
    /// One segment for the whole cycle.
    pub fn constant(switches: SwitchState, sample_time: f64) -> Self {
        PhaseSchedule {
            segments: vec![Segment { start: 0.0, switches }],
            sample_time,
        }
    }
}

/// One sampled point of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimState {
    pub t: f64,
    #[serde(rename = "I_L")]
    pub i_l: f64,
    #[serde(rename = "V_PC")]
    pub v_pc: f64,
    /// Top plate of the first active group, or of synapse 0 when none is active.
    #[serde(rename = "V_s")]
    pub v_s: f64,
    #[serde(rename = "V_m")]
    pub v_m: f64,
}

/// Samples at a fixed stride plus the sample index at which each cycle starts.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    pub samples: Vec<SimState>,
    pub cycle_starts: Vec<usize>,
    pub stride: usize,
}

impl Trace {
    /// Samples belonging to cycle `k`, including the boundary sample that closes it.
    pub fn cycle(&self, k: usize) -> Result<&[SimState]> {
        let start = *self
            .cycle_starts
            .get(k)
            .ok_or_else(|| Error::OutOfRange(format!("cycle {k} of {}", self.cycle_starts.len())))?;
        let end = self.cycle_starts.get(k + 1).map(|&e| e + 1).unwrap_or(self.samples.len());
        Ok(&self.samples[start..end.min(self.samples.len())])
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for s in &self.samples {
            out.serialize(s)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Energy flows over one cycle (J). Sources are positive when delivering.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct CycleEnergy {
    /// Delivered by V_dc (or the ideal power-clock source).
    pub source: f64,
    /// Delivered by the V_REF reset source.
    pub reference: f64,
    /// Inductor series resistance.
    pub inductor: f64,
    /// Bypass switch R_PC.
    pub bypass: f64,
    /// Synapse transmission gates.
    pub gates: f64,
    /// Reset switch.
    pub reset: f64,
    /// Charge sharing at switch transitions.
    pub switching: f64,
    /// Gate-driver parasitics, C_inv·V_dd² per toggle (outside the network).
    pub driver: f64,
    /// Comparator decisions (outside the network).
    pub soma: f64,
    pub stored_start: f64,
    pub stored_end: f64,
}

impl CycleEnergy {
    /// Dissipation inside the simulated network.
    pub fn network_dissipation(&self) -> f64 {
        self.inductor + self.bypass + self.gates + self.reset + self.switching
    }

    /// Synapse-tree energy per cycle, including power-clock losses and drivers.
    pub fn tree(&self) -> f64 {
        self.network_dissipation() + self.driver
    }

    /// Top-up energy burnt in the bypass switch.
    pub fn e_pcg(&self) -> f64 {
        self.bypass
    }

    /// Energy in minus energy out minus change in storage.
    pub fn residual(&self) -> f64 {
        self.source + self.reference - self.network_dissipation() - (self.stored_end - self.stored_start)
    }

    fn add(&mut self, o: &CycleEnergy) {
        self.source += o.source;
        self.reference += o.reference;
        self.inductor += o.inductor;
        self.bypass += o.bypass;
        self.gates += o.gates;
        self.reset += o.reset;
        self.switching += o.switching;
        self.driver += o.driver;
        self.soma += o.soma;
    }
}

/// Per-cycle and cumulative energy of one run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EnergyLedger {
    pub cycles: Vec<CycleEnergy>,
}

impl EnergyLedger {
    pub fn total(&self) -> CycleEnergy {
        let mut t = CycleEnergy::default();
        for c in &self.cycles {
            t.add(c);
        }
        t.stored_start = self.cycles.first().map_or(0.0, |c| c.stored_start);
        t.stored_end = self.cycles.last().map_or(0.0, |c| c.stored_end);
        t
    }

    /// Tree energy per cycle, in cycle order.
    pub fn tree_series(&self) -> Vec<f64> {
        self.cycles.iter().map(CycleEnergy::tree).collect()
    }

    pub fn book_soma(&mut self, cycle: usize, e: f64) -> Result<()> {
        let n = self.cycles.len();
        let c = self
            .cycles
            .get_mut(cycle)
            .ok_or_else(|| Error::OutOfRange(format!("cycle {cycle} of {n}")))?;
        c.soma += e;
        Ok(())
    }
}

/// Source energy minus dissipation minus the change in stored energy over the run.
pub fn energy_residual(ledger: &EnergyLedger) -> f64 {
    ledger.total().residual()
}

/// Observables of one cycle.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct CycleStats {
    pub cycle: usize,
    /// Maximum V_PC.
    pub v_pk: f64,
    /// V_PC just before the bypass switch closes (minimum V_PC if it never does).
    pub v_x: f64,
    pub v_m_peak: f64,
    /// V_m at the schedule's sample instant.
    pub v_m_sample: f64,
    pub energy: CycleEnergy,
}

/// Statistics of cycle `k` recomputed from a sampled trace.
pub fn cycle_stats(trace: &Trace, ledger: &EnergyLedger, k: usize) -> Result<CycleStats> {
    let samples = trace.cycle(k)?;
    let energy = *ledger
        .cycles
        .get(k)
        .ok_or_else(|| Error::OutOfRange(format!("cycle {k} has no ledger entry")))?;
    if samples.is_empty() {
        return Err(Error::OutOfRange(format!("cycle {k} has no samples")));
    }
    let v_pk = samples.iter().map(|s| s.v_pc).fold(f64::NEG_INFINITY, f64::max);
    let v_m_peak = samples.iter().map(|s| s.v_m).fold(f64::NEG_INFINITY, f64::max);
    let mid = samples[samples.len() / 2].v_m;
    Ok(CycleStats {
        cycle: k,
        v_pk,
        v_x: samples[0].v_pc,
        v_m_peak,
        v_m_sample: mid,
        energy,
    })
}

/// Run controls beyond the circuit config.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    pub drive: Drive,
    pub record_trace: bool,
    /// Overrides `cfg.sim.steps_per_cycle` when set.
    pub steps_per_cycle: Option<usize>,
    /// Initial power-clock node voltage (test harnesses preset V_x here).
    pub initial_v_pc: f64,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            drive: Drive::Resonant,
            record_trace: false,
            steps_per_cycle: None,
            initial_v_pc: 0.0,
        }
    }
}

/// Everything a run produces.
#[derive(Debug, Clone, Default)]
pub struct SimOutput {
    pub cycles: Vec<CycleStats>,
    pub ledger: EnergyLedger,
    pub trace: Option<Trace>,
    /// Final state vector layout-independent summary.
    pub final_state: Option<SimState>,
}

struct Phase {
    sys: PhaseSystem,
    prop: Propagator,
}

struct Runner<'a> {
    cfg: &'a CircuitConfig,
    drive: Drive,
    dt: f64,
    phases: Vec<Phase>,
    index: HashMap<SwitchState, usize>,
    current: SwitchState,
    /// Index of `current` in `phases`.
    cur: usize,
    x: Vec<f64>,
    y: Vec<f64>,
    /// Floating top-plate offsets V_top − V_m, valid for inactive synapses.
    offset: Vec<f64>,
    /// Σ ½·C_s·offset² over inactive synapses.
    floating_energy: f64,
}

impl<'a> Runner<'a> {
    fn new(cfg: &'a CircuitConfig, drive: Drive, dt: f64) -> Result<Self> {
        let n = cfg.tree.n();
        let current = SwitchState::all_off(n);
        let v_ref = cfg.tree.v_ref;
        // Top plates start at 0 V with the membrane at V_REF.
        let offset = vec![-v_ref; n];
        let floating_energy = cfg.tree.c_s.iter().map(|c| 0.5 * c * v_ref * v_ref).sum();
        let mut r = Runner {
            cfg,
            drive,
            dt,
            phases: Vec::new(),
            index: HashMap::new(),
            current: current.clone(),
            cur: 0,
            x: vec![0.0, 0.0, v_ref],
            y: vec![0.0; 3],
            offset,
            floating_energy,
        };
        r.phase(&current)?;
        if let Drive::Source(w) = drive {
            r.x[1] = w.value(0.0);
        }
        Ok(r)
    }

    fn phase(&mut self, sw: &SwitchState) -> Result<usize> {
        if let Some(&k) = self.index.get(sw) {
            return Ok(k);
        }
        let sys = build_phase_system(self.cfg, sw, self.drive)?;
        let prop = Propagator::new(&sys, self.dt)?;
        self.phases.push(Phase { sys, prop });
        self.index.insert(sw.clone(), self.phases.len() - 1);
        Ok(self.phases.len() - 1)
    }

    fn sys(&self) -> &PhaseSystem {
        &self.phases[self.cur].sys
    }

    fn v_m(&self) -> f64 {
        self.x[self.x.len() - 1]
    }

    fn stored(&self) -> f64 {
        self.sys().stored_energy(&self.x) + self.floating_energy
    }

    fn powers(&self, u: f64) -> Powers {
        self.sys().powers(&self.x, u)
    }

    fn snapshot(&self, t: f64) -> SimState {
        let sys = self.sys();
        let v_m = self.v_m();
        let v_s = if sys.groups.is_empty() { v_m + self.offset[0] } else { self.x[2] };
        SimState {
            t,
            i_l: self.x[0],
            v_pc: self.x[1],
            v_s,
            v_m,
        }
    }

    /// Switches to `next`, returning charge-sharing loss and toggled-synapse count.
    fn transition(&mut self, next: &SwitchState, u: f64) -> Result<(f64, usize)> {
        if *next == self.current {
            return Ok((0.0, 0));
        }
        let tree = &self.cfg.tree;
        let n = tree.n();
        if next.synapse_on.len() != n {
            return Err(Error::domain(
                "simulate",
                format!("schedule has {} synapse bits, tree has {n}", next.synapse_on.len()),
            ));
        }
        let old_sys = &self.phases[self.cur].sys;
        let v_m = self.v_m();
        // Per-synapse top-plate voltages.
        let mut top: Vec<f64> = (0..n).map(|i| v_m + self.offset[i]).collect();
        for (k, g) in old_sys.groups.iter().enumerate() {
            for &i in &g.members {
                top[i] = self.x[2 + k];
            }
        }
        let c_old = old_sys.c_pc;
        let (i_l, mut v_pc) = (self.x[0], self.x[1]);
        let mut loss = 0.0;
        let mut toggles = 0;
        for i in 0..n {
            let (was, now) = (self.current.synapse_on[i], next.synapse_on[i]);
            if was != now {
                toggles += 1;
            }
            if was && !now {
                self.offset[i] = top[i] - v_m;
                self.floating_energy += 0.5 * tree.c_s[i] * self.offset[i].powi(2);
            } else if !was && now {
                self.floating_energy -= 0.5 * tree.c_s[i] * self.offset[i].powi(2);
            }
        }
        let sw = next.clone();
        let source_driven = matches!(self.drive, Drive::Source(_));
        let idx = self.phase(&sw)?;
        let new_sys = &self.phases[idx].sys;
        let dim = new_sys.dim();
        let mut x = vec![0.0; dim];
        for (k, g) in new_sys.groups.iter().enumerate() {
            let mean = g.members.iter().map(|&i| top[i]).sum::<f64>() / g.members.len() as f64;
            loss += g.members.iter().map(|&i| 0.5 * g.c_s * (top[i] - mean).powi(2)).sum::<f64>();
            x[2 + k] = mean;
        }
        if !source_driven {
            let c_new = new_sys.c_pc;
            if c_new > c_old {
                loss += 0.5 * v_pc * v_pc * c_old * (c_new - c_old) / c_new;
                v_pc *= c_old / c_new;
            } else {
                loss += 0.5 * (c_old - c_new) * v_pc * v_pc;
            }
        } else {
            v_pc = u;
        }
        x[0] = i_l;
        x[1] = v_pc;
        x[dim - 1] = v_m;
        self.floating_energy = self.floating_energy.max(0.0);
        self.x = x;
        self.y = vec![0.0; dim];
        self.current = sw;
        self.cur = idx;
        Ok((loss, toggles))
    }
}

fn step_index(t: f64, dt: f64) -> usize {
    (t / dt).round().max(0.0) as usize
}

/// Integrates `cfg` through one cycle per schedule entry.
///
/// Initial state: V_PC = 0, I_L = 0, all top plates at 0 V, V_m = V_REF.
pub fn simulate(cfg: &CircuitConfig, schedules: &[PhaseSchedule], opts: &SimOptions) -> Result<SimOutput> {
    cfg.validate()?;
    if schedules.is_empty() {
        return Err(Error::domain("simulate", "schedule covers no cycles"));
    }
    let steps = opts.steps_per_cycle.unwrap_or(cfg.sim.steps_per_cycle);
    if steps < 2 {
        return Err(Error::domain("simulate", "need at least two steps per cycle"));
    }
    let period = cfg.pc.period();
    let dt = period / steps as f64;
    let stride = if opts.record_trace && steps % cfg.sim.trace_stride == 0 {
        cfg.sim.trace_stride
    } else {
        steps.min(cfg.sim.trace_stride.max(1))
    };
    let limit = 5.0 * cfg.dlcc.v_dd;
    let v_dd = cfg.dlcc.v_dd;
    let c_inv = cfg.tree.c_inv;
    let drive = opts.drive;
    let u_at = |t: f64| match drive {
        Drive::Source(w) => w.value(t),
        _ => 0.0,
    };

    let mut r = Runner::new(cfg, drive, dt)?;
    if !matches!(drive, Drive::Source(_)) {
        r.x[1] = opts.initial_v_pc;
    }
    let mut out = SimOutput::default();
    let mut trace = opts.record_trace.then(|| Trace {
        stride,
        ..Trace::default()
    });

    for (k, sched) in schedules.iter().enumerate() {
        if sched.segments.is_empty() || sched.segments[0].start != 0.0 {
            return Err(Error::domain("simulate", format!("cycle {k}: first segment must start at 0")));
        }
        let base = k * steps;
        let t0 = base as f64 * dt;
        let mut bounds: Vec<(usize, &SwitchState)> = Vec::with_capacity(sched.segments.len());
        for seg in &sched.segments {
            let s = step_index(seg.start, dt).min(steps);
            if let Some(&(prev, _)) = bounds.last() {
                if s < prev {
                    return Err(Error::domain("simulate", format!("cycle {k}: segments out of order")));
                }
            }
            bounds.push((s, &seg.switches));
        }
        let sample_step = step_index(sched.sample_time, dt).min(steps);

        let mut ce = CycleEnergy {
            stored_start: r.stored(),
            ..CycleEnergy::default()
        };
        let mut stats = CycleStats {
            cycle: k,
            v_pk: f64::NEG_INFINITY,
            v_x: f64::NAN,
            v_m_peak: f64::NEG_INFINITY,
            v_m_sample: f64::NAN,
            energy: CycleEnergy::default(),
        };
        if let Some(tr) = trace.as_mut() {
            tr.cycle_starts.push(tr.samples.len());
        }
        let mut v_min = f64::INFINITY;
        let mut seg_idx = 0;
        let mut u0 = u_at(t0);
        let mut p0: Option<Powers> = None;

        for s in 0..steps {
            let t = t0 + s as f64 * dt;
            while seg_idx < bounds.len() && bounds[seg_idx].0 == s {
                let sw = bounds[seg_idx].1;
                if sw.bypass_on && !r.current.bypass_on && stats.v_x.is_nan() {
                    stats.v_x = r.x[1];
                }
                let (loss, toggles) = r.transition(sw, u0)?;
                ce.switching += loss;
                ce.driver += toggles as f64 * c_inv * v_dd * v_dd;
                p0 = None;
                seg_idx += 1;
            }
            let vpc = r.x[1];
            stats.v_pk = stats.v_pk.max(vpc);
            v_min = v_min.min(vpc);
            stats.v_m_peak = stats.v_m_peak.max(r.v_m());
            if s == sample_step {
                stats.v_m_sample = r.v_m();
            }
            if let Some(tr) = trace.as_mut() {
                if (base + s) % stride == 0 {
                    tr.samples.push(r.snapshot(t));
                }
            }

            let u1 = u_at(t + dt);
            let pa = match p0 {
                Some(p) => p,
                None => r.powers(u0),
            };
            {
                let phase = &r.phases[r.cur];
                phase.prop.step(&r.x, u0, u1, &mut r.y);
            }
            std::mem::swap(&mut r.x, &mut r.y);
            if matches!(drive, Drive::Source(_)) {
                r.x[1] = u1;
            }
            let vpc = r.x[1];
            if !vpc.is_finite() || vpc.abs() > limit {
                return Err(Error::Diverged {
                    cycle: k,
                    v_pc: vpc,
                    limit,
                });
            }
            let pb = r.powers(u1);
            let h = 0.5 * dt;
            ce.source += h * (pa.source + pb.source);
            ce.reference += h * (pa.reference + pb.reference);
            ce.inductor += h * (pa.inductor + pb.inductor);
            ce.bypass += h * (pa.bypass + pb.bypass);
            ce.gates += h * (pa.gates + pb.gates);
            ce.reset += h * (pa.reset + pb.reset);
            p0 = Some(pb);
            u0 = u1;
        }
        // Closing sample of the cycle.
        let vpc = r.x[1];
        stats.v_pk = stats.v_pk.max(vpc);
        v_min = v_min.min(vpc);
        stats.v_m_peak = stats.v_m_peak.max(r.v_m());
        if sample_step >= steps {
            stats.v_m_sample = r.v_m();
        }
        if stats.v_x.is_nan() {
            stats.v_x = v_min;
        }
        ce.stored_end = r.stored();
        stats.energy = ce;
        out.ledger.cycles.push(ce);
        out.cycles.push(stats);
    }
    let t_end = (schedules.len() * steps) as f64 * dt;
    let last = r.snapshot(t_end);
    if let Some(tr) = trace.as_mut() {
        tr.samples.push(last);
    }
    out.trace = trace;
    out.final_state = Some(last);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::topup_energy_analytic;

    fn idle(n: usize, bypass_window: Option<f64>, period: f64) -> PhaseSchedule {
        let mut segs = Vec::new();
        if let Some(t_on) = bypass_window {
            segs.push(Segment {
                start: 0.0,
                switches: SwitchState {
                    bypass_on: true,
                    ..SwitchState::all_off(n)
                },
            });
            segs.push(Segment {
                start: t_on,
                switches: SwitchState::all_off(n),
            });
        } else {
            segs.push(Segment {
                start: 0.0,
                switches: SwitchState::all_off(n),
            });
        }
        PhaseSchedule {
            segments: segs,
            sample_time: period / 2.0,
        }
    }

    #[test]
    fn lossless_free_oscillation_conserves_energy() {
        let mut cfg = CircuitConfig::default().without_parasitics();
        cfg.pc.q_inductor = 1e300;
        let scheds = vec![idle(4, None, cfg.pc.period()); 10];
        let out = simulate(&cfg, &scheds, &SimOptions::default()).unwrap();
        for c in &out.ledger.cycles {
            assert!(c.residual().abs() < 1e-6 * c.stored_end, "{c:?}");
        }
        let s = &out.cycles[5];
        assert!((s.v_pk - 1.8).abs() < 0.01, "{s:?}");
    }

    #[test]
    fn bypass_off_amplitude_decays() {
        let cfg = CircuitConfig::default();
        let scheds = vec![idle(4, None, cfg.pc.period()); 20];
        let opts = SimOptions {
            record_trace: true,
            ..SimOptions::default()
        };
        let out = simulate(&cfg, &scheds, &opts).unwrap();
        let tr = out.trace.unwrap();
        let c_pc = PhaseSystem::node_capacitance(&cfg, &SwitchState::all_off(4));
        // Oscillation energy about the V_dc equilibrium is a Lyapunov function.
        let osc: Vec<f64> = tr
            .cycle_starts
            .iter()
            .map(|&i| {
                let s = tr.samples[i];
                0.5 * cfg.pc.l_pc * s.i_l * s.i_l + 0.5 * c_pc * (s.v_pc - cfg.pc.v_dc).powi(2)
            })
            .collect();
        for w in osc.windows(2) {
            assert!(w[1] < w[0], "{w:?}");
        }
        for c in &out.ledger.cycles {
            assert!(c.inductor >= 0.0 && c.bypass >= 0.0 && c.gates >= 0.0 && c.reset >= 0.0);
        }
    }

    #[test]
    fn floating_topup_matches_closed_form() {
        let cfg = CircuitConfig::default().without_parasitics();
        let period = cfg.pc.period();
        let t_on = cfg.pc.t_on();
        let sched = idle(4, Some(t_on), period);
        let opts = SimOptions {
            drive: Drive::Floating,
            initial_v_pc: 0.045,
            ..SimOptions::default()
        };
        let out = simulate(&cfg, &[sched], &opts).unwrap();
        let e = out.ledger.cycles[0].bypass;
        let want = topup_energy_analytic(cfg.pc.c_e, 0.045, cfg.r_pc(), t_on).unwrap();
        assert!((e - want).abs() / want < 0.05, "{e} vs {want}");
    }

    #[test]
    fn trace_is_time_ordered() {
        let cfg = CircuitConfig::default();
        let scheds = vec![idle(4, Some(cfg.pc.t_on()), cfg.pc.period()); 3];
        let out = simulate(
            &cfg,
            &scheds,
            &SimOptions {
                record_trace: true,
                ..SimOptions::default()
            },
        )
        .unwrap();
        let tr = out.trace.unwrap();
        assert!(tr.samples.windows(2).all(|w| w[1].t > w[0].t));
        assert_eq!(tr.cycle_starts.len(), 3);
        let cs = cycle_stats(&tr, &out.ledger, 2).unwrap();
        assert!(cs.v_pk >= cs.v_x);
        assert!(cycle_stats(&tr, &out.ledger, 3).is_err());
    }
}
