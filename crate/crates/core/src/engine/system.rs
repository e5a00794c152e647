//! Linear state-space description of one switch configuration.
//!
//! State layout: `[I_L, V_PC, V_s(group 0), .., V_s(group G-1), V_m]`.
//! Active synapses with identical capacitance share one top-plate state
//! (one group); with no active synapse the system has three states.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::CircuitConfig;

/// How the power-clock node is driven.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Drive {
    /// V_dc feeds the node through L_PC (normal operation).
    Resonant,
    /// Inductor removed; the node floats on its capacitance.
    Floating,
    /// The node is an ideal voltage source following `waveform`.
    Source(Waveform),
}

/// `offset − amplitude·cos(2π·frequency·t + phase)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Waveform {
    pub offset: f64,
    pub amplitude: f64,
    pub frequency: f64,
    pub phase: f64,
}

impl Waveform {
    pub fn value(&self, t: f64) -> f64 {
        self.offset - self.amplitude * (2.0 * PI * self.frequency * t + self.phase).cos()
    }
}

/// Switch positions during one phase segment.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SwitchState {
    pub bypass_on: bool,
    pub reset_on: bool,
    pub synapse_on: Vec<bool>,
}

impl SwitchState {
    pub fn all_off(n: usize) -> Self {
        SwitchState {
            bypass_on: false,
            reset_on: false,
            synapse_on: vec![false; n],
        }
    }

    pub fn active_count(&self) -> usize {
        self.synapse_on.iter().filter(|&&x| x).count()
    }
}

/// Active synapses lumped into one branch.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchGroup {
    pub members: Vec<usize>,
    /// Capacitance of one member.
    pub c_s: f64,
}

impl BranchGroup {
    pub fn capacitance(&self) -> f64 {
        self.c_s * self.members.len() as f64
    }
}

/// Partitions the active synapses by capacitance, in index order.
pub fn group_active(c_s: &[f64], on: &[bool]) -> Vec<BranchGroup> {
    let mut groups: Vec<BranchGroup> = Vec::new();
    for (i, (&c, &active)) in c_s.iter().zip(on).enumerate() {
        if !active {
            continue;
        }
        match groups.iter_mut().find(|g| g.c_s.to_bits() == c.to_bits()) {
            Some(g) => g.members.push(i),
            None => groups.push(BranchGroup { members: vec![i], c_s: c }),
        }
    }
    groups
}

/// dx/dt = A·x + b + e·u(t), with element values kept for power bookkeeping.
#[derive(Debug, Clone)]
pub struct PhaseSystem {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    /// Input coupling for a source-driven power-clock node.
    pub input: Option<DVector<f64>>,
    pub drive: Drive,
    pub groups: Vec<BranchGroup>,
    pub l_pc: f64,
    pub r_inductor: f64,
    pub v_dc: f64,
    pub v_ref: f64,
    pub c_pc: f64,
    pub c_m: f64,
    pub g_bypass: f64,
    pub g_reset: f64,
    /// Conductance of each group's parallel gates.
    pub g_branch: Vec<f64>,
}

impl PhaseSystem {
    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn vm_index(&self) -> usize {
        self.dim() - 1
    }

    /// Total capacitance at the power-clock node for a switch state.
    pub fn node_capacitance(cfg: &CircuitConfig, sw: &SwitchState) -> f64 {
        let t = &cfg.tree;
        let n_on = sw.active_count() as f64;
        let n_off = t.n() as f64 - n_on;
        cfg.pc.c_e + cfg.pc.c_node + n_on * (t.c_pl_on + t.c_pr) + n_off * (t.c_pl_off + t.c_sh)
    }

    /// Instantaneous power terms at state `x` with source value `u`.
    pub fn powers(&self, x: &[f64], u: f64) -> Powers {
        let vpc = if matches!(self.drive, Drive::Source(_)) { u } else { x[1] };
        let vm = x[self.vm_index()];
        let mut gates = 0.0;
        let mut branch_current = 0.0;
        for (k, g) in self.g_branch.iter().enumerate() {
            let dv = vpc - x[2 + k];
            gates += g * dv * dv;
            branch_current += g * dv;
        }
        let source = match self.drive {
            Drive::Resonant => self.v_dc * x[0],
            Drive::Floating => 0.0,
            Drive::Source(_) => u * branch_current,
        };
        let dr = vm - self.v_ref;
        Powers {
            source,
            reference: -self.v_ref * self.g_reset * dr,
            inductor: self.r_inductor * x[0] * x[0],
            bypass: if matches!(self.drive, Drive::Source(_)) { 0.0 } else { self.g_bypass * vpc * vpc },
            gates,
            reset: self.g_reset * dr * dr,
        }
    }

    /// Energy held in the network (excluding floating inactive synapses).
    pub fn stored_energy(&self, x: &[f64]) -> f64 {
        let vm = x[self.vm_index()];
        let mut e = 0.5 * self.c_m * vm * vm;
        for (k, g) in self.groups.iter().enumerate() {
            let dv = x[2 + k] - vm;
            e += 0.5 * g.capacitance() * dv * dv;
        }
        match self.drive {
            Drive::Resonant => e + 0.5 * self.l_pc * x[0] * x[0] + 0.5 * self.c_pc * x[1] * x[1],
            Drive::Floating => e + 0.5 * self.c_pc * x[1] * x[1],
            Drive::Source(_) => e,
        }
    }
}

/// Instantaneous power flows (W). Sources are positive when delivering.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Powers {
    pub source: f64,
    pub reference: f64,
    pub inductor: f64,
    pub bypass: f64,
    pub gates: f64,
    pub reset: f64,
}

/// Builds the state-space model for `sw` under `drive`.
pub fn build_phase_system(cfg: &CircuitConfig, sw: &SwitchState, drive: Drive) -> Result<PhaseSystem> {
    let tree = &cfg.tree;
    if sw.synapse_on.len() != tree.n() {
        return Err(Error::domain(
            "build_phase_system",
            format!("switch vector has {} entries, tree has {}", sw.synapse_on.len(), tree.n()),
        ));
    }
    let groups = group_active(&tree.c_s, &sw.synapse_on);
    let n_groups = groups.len();
    let dim = 3 + n_groups;
    let vm = dim - 1;
    // Voltage nodes: PC, s_0..s_{G-1}, m  (offset by one in the state vector).
    let nv = n_groups + 2;
    let vm_node = nv - 1;

    let r_tg = cfg.r_tg();
    let g_branch: Vec<f64> = groups.iter().map(|g| g.members.len() as f64 / r_tg).collect();
    let g_bypass = if sw.bypass_on { 1.0 / cfg.r_pc() } else { 0.0 };
    let g_reset = if sw.reset_on { 1.0 / tree.r_reset } else { 0.0 };
    let c_pc = PhaseSystem::node_capacitance(cfg, sw);
    let c_m = tree.membrane_ground_capacitance();

    let mut cmat = DMatrix::<f64>::zeros(nv, nv);
    let mut gmat = DMatrix::<f64>::zeros(nv, nv);
    let mut src = DVector::<f64>::zeros(nv);
    cmat[(0, 0)] = c_pc;
    cmat[(vm_node, vm_node)] = c_m;
    gmat[(0, 0)] = -g_bypass;
    for (k, g) in groups.iter().enumerate() {
        let s = 1 + k;
        let c = g.capacitance();
        cmat[(s, s)] += c;
        cmat[(s, vm_node)] -= c;
        cmat[(vm_node, s)] -= c;
        cmat[(vm_node, vm_node)] += c;
        let gb = g_branch[k];
        gmat[(0, 0)] -= gb;
        gmat[(0, s)] += gb;
        gmat[(s, 0)] += gb;
        gmat[(s, s)] -= gb;
    }
    gmat[(vm_node, vm_node)] -= g_reset;
    src[vm_node] += g_reset * tree.v_ref;

    let mut a = DMatrix::<f64>::zeros(dim, dim);
    let mut b = DVector::<f64>::zeros(dim);
    let mut input = None;
    let l_pc = cfg.pc.l_pc;
    let r_inductor = match drive {
        Drive::Resonant => cfg.r_inductor(),
        _ => 0.0,
    };

    match drive {
        Drive::Resonant | Drive::Floating => {
            let cinv = cmat.clone().try_inverse().ok_or_else(|| Error::Singular {
                context: "capacitance matrix".into(),
            })?;
            // Node equations: C·dv/dt = G·v + src + (I_L into PC).
            let mut coupling = DMatrix::<f64>::zeros(nv, dim);
            for r in 0..nv {
                for c in 0..nv {
                    coupling[(r, c + 1)] = gmat[(r, c)];
                }
            }
            if drive == Drive::Resonant {
                coupling[(0, 0)] = 1.0;
                a[(0, 0)] = -r_inductor / l_pc;
                a[(0, 1)] = -1.0 / l_pc;
                b[0] = cfg.pc.v_dc / l_pc;
            }
            let rows = &cinv * coupling;
            let srcs = &cinv * src;
            for r in 0..nv {
                for c in 0..dim {
                    a[(r + 1, c)] = rows[(r, c)];
                }
                b[r + 1] = srcs[r];
            }
        }
        Drive::Source(_) => {
            // The PC node is an input: solve the remaining nodes only.
            let inner = nv - 1;
            let csub = cmat.view((1, 1), (inner, inner)).into_owned();
            let cinv = csub.try_inverse().ok_or_else(|| Error::Singular {
                context: "capacitance matrix".into(),
            })?;
            let gsub = gmat.view((1, 1), (inner, inner)).into_owned();
            let gin = gmat.view((1, 0), (inner, 1)).into_owned();
            let rows = &cinv * gsub;
            let e = &cinv * gin;
            let srcs = &cinv * src.rows(1, inner);
            let mut ev = DVector::<f64>::zeros(dim);
            for r in 0..inner {
                for c in 0..inner {
                    a[(r + 2, c + 2)] = rows[(r, c)];
                }
                b[r + 2] = srcs[r];
                ev[r + 2] = e[(r, 0)];
            }
            input = Some(ev);
        }
    }
    debug_assert_eq!(vm, dim - 1);

    Ok(PhaseSystem {
        a,
        b,
        input,
        drive,
        groups,
        l_pc,
        r_inductor,
        v_dc: cfg.pc.v_dc,
        v_ref: tree.v_ref,
        c_pc,
        c_m,
        g_bypass,
        g_reset,
        g_branch,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::resonant_frequency;

    fn cfg4() -> CircuitConfig {
        CircuitConfig::default()
    }

    #[test]
    fn all_off_reduces_to_series_lc() {
        let mut cfg = cfg4().without_parasitics();
        cfg.pc.q_inductor = 1e12;
        let sys = build_phase_system(&cfg, &SwitchState::all_off(4), Drive::Resonant).unwrap();
        assert_eq!(sys.dim(), 3);
        // Eigenvalues of the (I, V) block are ±jω with ω = 1/√(LC).
        let det = sys.a[(0, 1)] * sys.a[(1, 0)];
        let omega = (-det).sqrt();
        let f = resonant_frequency(1e-3, 25e-12).unwrap();
        assert!((omega / (2.0 * PI) - f).abs() / f < 1e-9);
        // V_m row is inert.
        assert!(sys.a.row(2).iter().all(|&v| v == 0.0));
        // Equilibrium at V_PC = V_dc.
        assert!((sys.b[0] * 1e-3 - 0.9).abs() < 1e-12);
    }

    #[test]
    fn equal_weights_lump_into_one_group() {
        let cfg = cfg4();
        let sw = SwitchState {
            bypass_on: false,
            reset_on: false,
            synapse_on: vec![true, false, true, true],
        };
        let sys = build_phase_system(&cfg, &sw, Drive::Resonant).unwrap();
        assert_eq!(sys.dim(), 4);
        assert_eq!(sys.groups[0].members, vec![0, 2, 3]);
        assert!((sys.g_branch[0] - 3.0 / 5e3).abs() < 1e-15);
    }

    #[test]
    fn unequal_weights_use_one_state_per_branch() {
        let mut cfg = cfg4();
        cfg.tree.c_s = vec![1e-12, 2e-12, 4e-12, 8e-12];
        let sw = SwitchState {
            bypass_on: false,
            reset_on: false,
            synapse_on: vec![true; 4],
        };
        let sys = build_phase_system(&cfg, &sw, Drive::Resonant).unwrap();
        assert_eq!(sys.dim(), 7);
    }

    #[test]
    fn membrane_charge_is_conserved_without_reset() {
        // Σ over s and m rows of C·dv/dt equals branch current into the tree;
        // the m-node total charge derivative vanishes when V_s = V_PC.
        let cfg = cfg4();
        let sw = SwitchState {
            bypass_on: false,
            reset_on: false,
            synapse_on: vec![true; 4],
        };
        let sys = build_phase_system(&cfg, &sw, Drive::Resonant).unwrap();
        let x = DVector::from_vec(vec![1e-5, 0.4, 0.4, 0.9]);
        let dx = &sys.a * &x + &sys.b;
        let c = sys.groups[0].capacitance();
        // Charge on the membrane node: C_m·V_m + C·(V_m − V_s).
        let dq = sys.c_m * dx[3] + c * (dx[3] - dx[2]);
        assert!(dq.abs() < 1e-18, "{dq}");
    }

    #[test]
    fn mismatched_switch_vector_rejected() {
        let cfg = cfg4();
        assert!(build_phase_system(&cfg, &SwitchState::all_off(3), Drive::Resonant).is_err());
    }
}
