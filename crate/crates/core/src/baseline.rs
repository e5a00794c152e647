//! Conventional (non-adiabatic) capacitive neuron: the same synapse network
//! with every top plate driven by an inverter from a fixed rail.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::engine::{CycleEnergy, CycleStats, EnergyLedger, Propagator};
use crate::error::{Error, Result};
use crate::model::{CircuitConfig, DlccConfig, SynapseTreeConfig};
use crate::neuron::{dlcc_decide, InputCode, NeuronCycle, NeuronRun};

/// How the inverters follow the input code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DriveMode {
    /// Levels held for the whole cycle; only changed bits switch.
    Nrz,
    /// Active plates driven high for the first three quarters of each cycle, then back to ground.
    Rz,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub tree: SynapseTreeConfig,
    #[serde(rename = "V_dd")]
    pub v_dd: f64,
    /// Inverter output resistance.
    #[serde(rename = "R_drv")]
    pub r_drv: f64,
    pub dlcc: DlccConfig,
    /// Input clock (Hz).
    pub frequency: f64,
    pub mode: DriveMode,
    /// Must be a multiple of 4.
    pub steps_per_cycle: usize,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig::from_circuit(&CircuitConfig::default())
    }
}

impl BaselineConfig {
    /// Baseline matched to an adiabatic design: same tree, comparator and clock.
    pub fn from_circuit(cfg: &CircuitConfig) -> Self {
        BaselineConfig {
            tree: cfg.tree.clone(),
            v_dd: cfg.dlcc.v_dd,
            r_drv: 1e3,
            dlcc: cfg.dlcc.clone(),
            frequency: cfg.pc.f_nominal,
            mode: DriveMode::Nrz,
            steps_per_cycle: 65536,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |field: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::config(field, format!("must be positive and finite, got {v}")))
            }
        };
        positive("baseline.V_dd", self.v_dd)?;
        positive("baseline.R_drv", self.r_drv)?;
        positive("baseline.frequency", self.frequency)?;
        positive("tree.R_reset", self.tree.r_reset)?;
        positive("tree.C_d + tree.C_par", self.tree.membrane_ground_capacitance())?;
        if self.tree.c_s.is_empty() {
            return Err(Error::config("tree.C_s", "needs at least one synapse"));
        }
        for (i, &c) in self.tree.c_s.iter().enumerate() {
            positive(&format!("tree.C_s[{i}]"), c)?;
        }
        if self.steps_per_cycle < 8 || self.steps_per_cycle % 4 != 0 {
            return Err(Error::config(
                "baseline.steps_per_cycle",
                format!("must be a multiple of 4 and at least 8, got {}", self.steps_per_cycle),
            ));
        }
        Ok(())
    }

    pub fn period(&self) -> f64 {
        1.0 / self.frequency
    }
}

/// Supply energy drawn when the inputs switch from `from` to `to`, with the
/// network settled before and after and the reset switch open.
pub fn baseline_transition_energy_analytic(
    tree: &SynapseTreeConfig,
    from: &InputCode,
    to: &InputCode,
    v_dd: f64,
) -> Result<f64> {
    let n = tree.n();
    if from.len() != n || to.len() != n {
        return Err(Error::domain(
            "baseline_transition_energy_analytic",
            format!("codes of length {} and {} for {n} synapses", from.len(), to.len()),
        ));
    }
    let total = tree.total_synapse_capacitance() + tree.membrane_ground_capacitance();
    let dq: f64 = (0..n)
        .map(|i| tree.c_s[i] * v_dd * (to.bits[i] as i8 - from.bits[i] as i8) as f64)
        .sum();
    let dv_m = dq / total;
    // Every plate held high after the switch exchanges C_s·(ΔV_top − ΔV_m)
    // with the supply, including plates that were already high.
    let charge: f64 = (0..n)
        .filter(|&i| to.bits[i])
        .map(|i| {
            let dv_top = if from.bits[i] { 0.0 } else { v_dd };
            tree.c_s[i] * (dv_top - dv_m)
        })
        .sum();
    Ok(v_dd * charge)
}

/// Synapses sharing capacitance, drive level and top-plate voltage evolve
/// identically and are simulated as one lumped branch.
struct Group {
    members: Vec<usize>,
    c: f64,
    g: f64,
    level: bool,
}

/// Voltages closer than this are merged into one group.
const MERGE_QUANTUM: f64 = 1e-9;

struct Network<'a> {
    cfg: &'a BaselineConfig,
    v_top: Vec<f64>,
    level: Vec<bool>,
    v_m: f64,
}

struct SegmentResult {
    v_m_peak: f64,
    v_m_at: Option<f64>,
}

impl Network<'_> {
    fn stored(&self) -> f64 {
        let t = &self.cfg.tree;
        let plates: f64 = self
            .v_top
            .iter()
            .zip(&t.c_s)
            .map(|(&v, &c)| 0.5 * c * (v - self.v_m).powi(2))
            .sum();
        plates + 0.5 * t.membrane_ground_capacitance() * self.v_m * self.v_m
    }

    fn group(&mut self, levels: &[bool], e: &mut CycleEnergy) -> Vec<Group> {
        let t = &self.cfg.tree;
        let mut keyed: BTreeMap<(u64, bool, i64), Vec<usize>> = BTreeMap::new();
        for i in 0..t.n() {
            let q = (self.v_top[i] / MERGE_QUANTUM).round() as i64;
            keyed.entry((t.c_s[i].to_bits(), levels[i], q)).or_default().push(i);
        }
        let mut groups = Vec::with_capacity(keyed.len());
        for ((_, level, _), members) in keyed {
            let c_s = t.c_s[members[0]];
            let mean = members.iter().map(|&i| self.v_top[i]).sum::<f64>() / members.len() as f64;
            for &i in &members {
                e.switching += 0.5 * c_s * (self.v_top[i] - mean).powi(2);
                self.v_top[i] = mean;
            }
            let k = members.len() as f64;
            groups.push(Group {
                c: k * c_s,
                g: k / self.cfg.r_drv,
                level,
                members,
            });
        }
        groups
    }

    /// Drives the plates to `levels` for `steps` steps of `dt`.
    fn segment(
        &mut self,
        levels: &[bool],
        reset: bool,
        steps: usize,
        dt: f64,
        sample_step: Option<usize>,
        e: &mut CycleEnergy,
    ) -> Result<SegmentResult> {
        let cfg = self.cfg;
        let t = &cfg.tree;
        for (i, &l) in levels.iter().enumerate() {
            if l && !self.level[i] {
                e.driver += t.c_inv * cfg.v_dd * cfg.v_dd;
            }
            self.level[i] = l;
        }
        let groups = self.group(levels, e);
        let n = groups.len() + 1;
        let m = n - 1;
        let g_r = if reset { 1.0 / t.r_reset } else { 0.0 };
        // C·dx/dt = −G·x + s over x = [plate groups…, V_m].
        let mut cm = DMatrix::<f64>::zeros(n, n);
        let mut gm = DMatrix::<f64>::zeros(n, n);
        let mut s = DVector::<f64>::zeros(n);
        cm[(m, m)] = t.membrane_ground_capacitance();
        for (k, g) in groups.iter().enumerate() {
            cm[(k, k)] += g.c;
            cm[(k, m)] -= g.c;
            cm[(m, k)] -= g.c;
            cm[(m, m)] += g.c;
            gm[(k, k)] = g.g;
            if g.level {
                s[k] = g.g * cfg.v_dd;
            }
        }
        gm[(m, m)] = g_r;
        s[m] = g_r * t.v_ref;
        let lu = cm.lu();
        let singular = || Error::Singular {
            context: "baseline capacitance matrix".into(),
        };
        let a = lu.solve(&(-gm)).ok_or_else(singular)?;
        let b = lu.solve(&s).ok_or_else(singular)?;
        let prop = Propagator::from_parts(&a, &b, None, dt)?;

        let mut x: Vec<f64> = groups.iter().map(|g| self.v_top[g.members[0]]).collect();
        x.push(self.v_m);
        let mut y = vec![0.0; n];
        let powers = |x: &[f64]| {
            let (mut supply, mut drv) = (0.0, 0.0);
            for (k, g) in groups.iter().enumerate() {
                let target = if g.level { cfg.v_dd } else { 0.0 };
                let i = g.g * (target - x[k]);
                if g.level {
                    supply += cfg.v_dd * i;
                }
                drv += i * (target - x[k]);
            }
            let i_r = g_r * (t.v_ref - x[m]);
            (supply, drv, t.v_ref * i_r, i_r * (t.v_ref - x[m]))
        };
        let mut p0 = powers(&x);
        let mut out = SegmentResult {
            v_m_peak: x[m],
            v_m_at: (sample_step == Some(0)).then_some(x[m]),
        };
        for k in 1..=steps {
            prop.step(&x, 0.0, 0.0, &mut y);
            std::mem::swap(&mut x, &mut y);
            let p1 = powers(&x);
            e.source += 0.5 * dt * (p0.0 + p1.0);
            e.gates += 0.5 * dt * (p0.1 + p1.1);
            e.reference += 0.5 * dt * (p0.2 + p1.2);
            e.reset += 0.5 * dt * (p0.3 + p1.3);
            p0 = p1;
            out.v_m_peak = out.v_m_peak.max(x[m]);
            if sample_step == Some(k) {
                out.v_m_at = Some(x[m]);
            }
        }
        for (k, g) in groups.iter().enumerate() {
            for &i in &g.members {
                self.v_top[i] = x[k];
            }
        }
        self.v_m = x[m];
        Ok(out)
    }
}

/// Simulates `codes` on the inverter-driven network.
///
/// The `gates` entry of each cycle holds the inverter output-resistance loss;
/// the tree energy is the energy drawn from the rail and the V_REF source.
pub fn run_baseline(cfg: &BaselineConfig, codes: &[InputCode]) -> Result<NeuronRun> {
    run_baseline_with_ledger(cfg, codes).map(|(run, _)| run)
}

/// [`run_baseline`] also returning the raw energy ledger.
pub fn run_baseline_with_ledger(cfg: &BaselineConfig, codes: &[InputCode]) -> Result<(NeuronRun, EnergyLedger)> {
    cfg.validate()?;
    if codes.is_empty() {
        return Err(Error::domain("run_baseline", "no input codes"));
    }
    let n = cfg.tree.n();
    if let Some(c) = codes.iter().find(|c| c.len() != n) {
        return Err(Error::domain("run_baseline", format!("code {c} does not match {n} synapses")));
    }
    let steps = cfg.steps_per_cycle;
    let dt = cfg.period() / steps as f64;
    let mut net = Network {
        cfg,
        v_top: vec![0.0; n],
        level: vec![false; n],
        v_m: cfg.tree.v_ref,
    };
    let mut run = NeuronRun::default();
    let mut ledger = EnergyLedger::default();
    let half = steps / 2;
    for (k, code) in codes.iter().enumerate() {
        let reset = code.is_zero();
        let mut e = CycleEnergy {
            stored_start: net.stored(),
            ..CycleEnergy::default()
        };
        let (peak, sample) = match cfg.mode {
            DriveMode::Nrz => {
                let r = net.segment(&code.bits, reset, steps, dt, Some(half), &mut e)?;
                (r.v_m_peak, r.v_m_at)
            }
            DriveMode::Rz => {
                let high = 3 * steps / 4;
                let r1 = net.segment(&code.bits, reset, high, dt, Some(half), &mut e)?;
                let r2 = net.segment(&vec![false; n], reset, steps - high, dt, None, &mut e)?;
                (r1.v_m_peak.max(r2.v_m_peak), r1.v_m_at)
            }
        };
        e.stored_end = net.stored();
        e.soma = cfg.dlcc.e_decision;
        let v_m_sample = sample.expect("sample step lies inside the cycle");
        let stats = CycleStats {
            cycle: k,
            v_pk: cfg.v_dd,
            v_x: 0.0,
            v_m_peak: peak,
            v_m_sample,
            energy: e,
        };
        let decision = dlcc_decide(v_m_sample, &cfg.dlcc)?;
        run.cycles.push(NeuronCycle {
            code: code.clone(),
            stats,
            decision,
            e_tree: e.source + e.reference + e.driver,
        });
        ledger.cycles.push(e);
    }
    Ok((run, ledger))
}
