//! Neuron orchestration: per-cycle schedules, the behavioural comparator
//! and full neuron runs.

use std::fmt;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::engine::{simulate, CycleStats, PhaseSchedule, Segment, SimOptions, SimOutput, SwitchState};
use crate::error::{Error, Result};
use crate::model::{CircuitConfig, DelayModel, DlccConfig, NeuronSpec, SynapseTreeConfig};

/// Binary input vector, most significant bit first.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct InputCode {
    pub bits: Vec<bool>,
}

impl InputCode {
    pub fn new(bits: Vec<bool>) -> Self {
        InputCode { bits }
    }

    /// `value` written as an `n`-bit code.
    pub fn from_value(value: u64, n: usize) -> Self {
        InputCode {
            bits: (0..n).map(|i| (value >> (n - 1 - i)) & 1 == 1).collect(),
        }
    }

    pub fn zeros(n: usize) -> Self {
        InputCode { bits: vec![false; n] }
    }

    pub fn ones(n: usize) -> Self {
        InputCode { bits: vec![true; n] }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn popcount(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_zero(&self) -> bool {
        self.popcount() == 0
    }
}

impl fmt::Display for InputCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// True when cycle `cycle` is a forced membrane recalibration.
pub fn is_recalibration_cycle(tree: &SynapseTreeConfig, cycle: usize) -> bool {
    tree.recalibration_period > 0 && cycle % tree.recalibration_period == 0
}

/// Switch plan for one cycle: top-up on `[0, t_ON)`, synapse bits held for
/// the whole cycle, membrane reset for the whole cycle on an all-zero code
/// and during the top-up window on recalibration cycles.
pub fn make_schedule(cfg: &CircuitConfig, code: &InputCode, cycle: usize) -> Result<PhaseSchedule> {
    if code.len() != cfg.tree.n() {
        return Err(Error::domain(
            "make_schedule",
            format!("code has {} bits, tree has {} synapses", code.len(), cfg.tree.n()),
        ));
    }
    let zero = code.is_zero();
    let recal = is_recalibration_cycle(&cfg.tree, cycle);
    Ok(PhaseSchedule {
        segments: vec![
            Segment {
                start: 0.0,
                switches: SwitchState {
                    bypass_on: true,
                    reset_on: zero || recal,
                    synapse_on: code.bits.clone(),
                },
            },
            Segment {
                start: cfg.pc.t_on(),
                switches: SwitchState {
                    bypass_on: false,
                    reset_on: zero,
                    synapse_on: code.bits.clone(),
                },
            },
        ],
        sample_time: 0.5 * cfg.pc.period(),
    })
}

/// RRAM grid of the offset table (Ω).
pub const OFFSET_GRID: [f64; 5] = [1e3, 3.25e3, 5.5e3, 7.75e3, 10e3];

/// Comparator offset in mV; rows M_L, columns M_R. `None` marks the
/// setting where the comparator never crosses over.
pub const OFFSET_TABLE_MV: [[Option<f64>; 5]; 5] = [
    [Some(0.20), Some(110.0), Some(178.4), Some(225.2), Some(261.2)],
    [Some(-154.6), Some(0.19), Some(90.2), Some(153.2), Some(196.4)],
    [Some(-343.6), Some(-116.8), Some(0.18), Some(77.6), Some(131.6)],
    [Some(-674.8), Some(-233.8), Some(-91.6), Some(0.25), Some(66.8)],
    [None, Some(-397.6), Some(-190.6), Some(-77.2), Some(0.3)],
];

/// Result of an offset lookup.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OffsetLookup {
    /// V_os (V).
    pub offset: f64,
    /// The query touched the no-crossover cell, whose value is a stand-in.
    pub extrapolated: bool,
    /// A resistance lay outside the table and was clamped.
    pub clamped: bool,
}

/// Table value with the no-crossover cell replaced by the most negative of
/// its valid neighbours (mV).
fn table_value(i: usize, j: usize) -> f64 {
    match OFFSET_TABLE_MV[i][j] {
        Some(v) => v,
        None => {
            let mut best = f64::INFINITY;
            for (di, dj) in [(-1i32, 0i32), (1, 0), (0, -1), (0, 1)] {
                let (a, b) = (i as i32 + di, j as i32 + dj);
                if (0..5).contains(&a) && (0..5).contains(&b) {
                    if let Some(v) = OFFSET_TABLE_MV[a as usize][b as usize] {
                        best = best.min(v);
                    }
                }
            }
            best
        }
    }
}

/// Cell index and fractional position of `x` on `grid`.
fn locate(grid: &[f64], x: f64) -> (usize, f64) {
    let last = grid.len() - 2;
    let mut k = 0;
    while k < last && x > grid[k + 1] {
        k += 1;
    }
    (k, (x - grid[k]) / (grid[k + 1] - grid[k]))
}

/// Bilinear interpolation of the offset table in resistance coordinates.
pub fn dlcc_offset(m_l: f64, m_r: f64) -> Result<OffsetLookup> {
    if !(m_l > 0.0 && m_r > 0.0) || !m_l.is_finite() || !m_r.is_finite() {
        return Err(Error::domain("dlcc_offset", format!("resistances must be positive, got {m_l}, {m_r}")));
    }
    let (lo, hi) = (OFFSET_GRID[0], OFFSET_GRID[4]);
    let l = m_l.clamp(lo, hi);
    let r = m_r.clamp(lo, hi);
    let clamped = l != m_l || r != m_r;
    if clamped {
        log::warn!("RRAM pair ({m_l:.0} Ω, {m_r:.0} Ω) outside the offset table; clamped");
    }
    let (i, u) = locate(&OFFSET_GRID, l);
    let (j, v) = locate(&OFFSET_GRID, r);
    let corners = [
        (i, j, (1.0 - u) * (1.0 - v)),
        (i + 1, j, u * (1.0 - v)),
        (i, j + 1, (1.0 - u) * v),
        (i + 1, j + 1, u * v),
    ];
    let mut mv = 0.0;
    let mut extrapolated = false;
    for (a, b, w) in corners {
        if w == 0.0 {
            continue;
        }
        if OFFSET_TABLE_MV[a][b].is_none() {
            extrapolated = true;
        }
        mv += w * table_value(a, b);
    }
    Ok(OffsetLookup {
        offset: mv * 1e-3,
        extrapolated,
        clamped,
    })
}

/// Bilinear interpolation of the anchors' worst-case delays.
fn anchor_delay(model: &DelayModel, m_l: f64, m_r: f64) -> Result<f64> {
    let mut ls: Vec<f64> = model.anchors.iter().map(|a| a.m_l).collect();
    let mut rs: Vec<f64> = model.anchors.iter().map(|a| a.m_r).collect();
    for v in [&mut ls, &mut rs] {
        v.sort_by(f64::total_cmp);
        v.dedup();
    }
    let lookup = |l: f64, r: f64| {
        model
            .anchors
            .iter()
            .find(|a| a.m_l == l && a.m_r == r)
            .map(|a| a.worst_delay)
            .ok_or_else(|| Error::config("dlcc.delay_model.anchors", format!("missing anchor ({l}, {r})")))
    };
    let axis = |g: &[f64], x: f64| -> (usize, f64) {
        if g.len() == 1 {
            return (0, 0.0);
        }
        let x = x.clamp(g[0], g[g.len() - 1]);
        locate(g, x)
    };
    let (i, u) = axis(&ls, m_l);
    let (j, v) = axis(&rs, m_r);
    let li = |k: usize| ls[(i + k).min(ls.len() - 1)];
    let rj = |k: usize| rs[(j + k).min(rs.len() - 1)];
    Ok((1.0 - u) * (1.0 - v) * lookup(li(0), rj(0))?
        + u * (1.0 - v) * lookup(li(1), rj(0))?
        + (1.0 - u) * v * lookup(li(0), rj(1))?
        + u * v * lookup(li(1), rj(1))?)
}

/// Decision delay for input overdrive `overdrive` (V).
///
/// Equal to the anchor's worst-case delay at the minimum overdrive and
/// falling logarithmically until `overdrive_scale`, beyond which it is flat.
pub fn dlcc_delay(dlcc: &DlccConfig, overdrive: f64) -> Result<f64> {
    let m = &dlcc.delay_model;
    let worst = anchor_delay(m, dlcc.m_l, dlcc.m_r)?;
    let od = overdrive.abs().max(m.min_overdrive);
    let floor = worst - m.metastability_slope * (m.overdrive_scale / m.min_overdrive).ln().max(0.0);
    Ok(floor + m.metastability_slope * (m.overdrive_scale / od).ln().max(0.0))
}

/// One comparator decision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Decision {
    pub out_p: bool,
    pub out_n: bool,
    /// Seconds.
    pub delay: f64,
    pub v_m_sampled: f64,
    pub v_os_applied: f64,
}

/// Fires iff `v_m > V_TH − V_os`; a tie does not fire.
pub fn dlcc_decide(v_m: f64, dlcc: &DlccConfig) -> Result<Decision> {
    if !v_m.is_finite() {
        return Err(Error::domain("dlcc_decide", "V_m is not finite"));
    }
    let v_os = dlcc_offset(dlcc.m_l, dlcc.m_r)?.offset;
    let trip = dlcc.v_th - v_os;
    let out_p = v_m > trip;
    Ok(Decision {
        out_p,
        out_n: !out_p,
        delay: dlcc_delay(dlcc, v_m - trip)?,
        v_m_sampled: v_m,
        v_os_applied: v_os,
    })
}

/// How inactive synapses load the membrane node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coupling {
    /// Inactive top plates float (adiabatic tree): only active synapses divide.
    Floating,
    /// Inactive top plates are held at ground (inverter-driven baseline).
    Grounded,
}

/// Weights and threshold of the McCulloch-Pitts neuron realised by `tree`
/// when the power clock peaks at `v_pk`.
///
/// Weights are the synapse capacitances. The comparator trips at
/// V_TH − V_os, i.e. a membrane rise of Δ = V_TH − V_os − V_REF above the
/// baseline; θ is the active capacitance at which the divider delivers Δ.
pub fn neuron_spec(tree: &SynapseTreeConfig, dlcc: &DlccConfig, v_pk: f64, coupling: Coupling) -> Result<NeuronSpec> {
    if !(v_pk > 0.0) {
        return Err(Error::domain("neuron_spec", "V_pk must be positive"));
    }
    let v_os = dlcc_offset(dlcc.m_l, dlcc.m_r)?.offset;
    let delta = dlcc.v_th - v_os - tree.v_ref;
    let ground = tree.membrane_ground_capacitance();
    let theta = if delta <= 0.0 {
        // Any active capacitance (even none) already exceeds the trip point.
        -1.0
    } else {
        match coupling {
            Coupling::Floating if delta >= v_pk => f64::INFINITY,
            Coupling::Floating => ground * delta / (v_pk - delta),
            Coupling::Grounded => (tree.total_synapse_capacitance() + ground) * delta / v_pk,
        }
    };
    Ok(NeuronSpec {
        weights: tree.c_s.clone(),
        theta,
    })
}

/// stp(Σ w_i·x_i − θ) with stp(0) = 0.
pub fn reference_neuron(spec: &NeuronSpec, code: &InputCode) -> Result<bool> {
    if spec.weights.len() != code.len() {
        return Err(Error::domain(
            "reference_neuron",
            format!("{} weights for a {}-bit code", spec.weights.len(), code.len()),
        ));
    }
    let sum: f64 = spec.weights.iter().zip(&code.bits).filter(|(_, &x)| x).map(|(w, _)| w).sum();
    Ok(sum - spec.theta > 0.0)
}

/// Largest fan-in for exhaustive sweeps.
pub const MAX_SWEEP_BITS: usize = 16;

/// Ascending count of all 2^n codes followed by `n_scrambles` seeded permutations.
pub fn input_sweeps(n_bits: usize, n_scrambles: usize, seed: u64) -> Result<Vec<Vec<InputCode>>> {
    if n_bits == 0 || n_bits > MAX_SWEEP_BITS {
        return Err(Error::domain(
            "input_sweeps",
            format!("exhaustive sweeps need 1..={MAX_SWEEP_BITS} bits, got {n_bits}"),
        ));
    }
    let ascending: Vec<InputCode> = (0..1u64 << n_bits).map(|v| InputCode::from_value(v, n_bits)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n_scrambles + 1);
    out.push(ascending.clone());
    for _ in 0..n_scrambles {
        let mut s = ascending.clone();
        s.shuffle(&mut rng);
        out.push(s);
    }
    Ok(out)
}

/// One cycle of a neuron run.
#[derive(Debug, Clone, PartialEq)]
pub struct NeuronCycle {
    pub code: InputCode,
    pub stats: CycleStats,
    pub decision: Decision,
    /// Synapse-tree energy charged to this cycle (J).
    pub e_tree: f64,
}

impl NeuronCycle {
    pub fn tree_energy(&self) -> f64 {
        self.e_tree
    }
}

/// Per-cycle outcome of a neuron run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NeuronRun {
    pub cycles: Vec<NeuronCycle>,
}

#[derive(Serialize)]
struct NeuronRow<'a> {
    cycle: usize,
    code: &'a str,
    #[serde(rename = "V_m_peak")]
    v_m_peak: f64,
    #[serde(rename = "OutP")]
    out_p: u8,
    delay_ns: f64,
    #[serde(rename = "E_tree_pJ")]
    e_tree_pj: f64,
    #[serde(rename = "E_soma_pJ")]
    e_soma_pj: f64,
}

impl NeuronRun {
    pub fn len(&self) -> usize {
        self.cycles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cycles.is_empty()
    }

    pub fn tree_energies(&self) -> Vec<f64> {
        self.cycles.iter().map(NeuronCycle::tree_energy).collect()
    }

    pub fn mean_tree_energy(&self) -> f64 {
        mean(&self.tree_energies())
    }

    pub fn worst_tree_energy(&self) -> f64 {
        self.tree_energies().into_iter().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn total_soma_energy(&self) -> f64 {
        self.cycles.iter().map(|c| c.stats.energy.soma).sum()
    }

    pub fn mean_soma_energy(&self) -> f64 {
        mean(&self.cycles.iter().map(|c| c.stats.energy.soma).collect::<Vec<_>>())
    }

    /// OutP per cycle as a string of 0/1.
    pub fn output_bits(&self) -> String {
        self.cycles.iter().map(|c| if c.decision.out_p { '1' } else { '0' }).collect()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for (k, c) in self.cycles.iter().enumerate() {
            let code = c.code.to_string();
            out.serialize(NeuronRow {
                cycle: k,
                code: &code,
                v_m_peak: c.stats.v_m_peak,
                out_p: c.decision.out_p as u8,
                delay_ns: c.decision.delay * 1e9,
                e_tree_pj: c.tree_energy() * 1e12,
                e_soma_pj: c.stats.energy.soma * 1e12,
            })?;
        }
        out.flush()?;
        Ok(())
    }
}

pub(crate) fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

/// Simulates `codes` back to back and samples the comparator each cycle.
pub fn run_neuron(cfg: &CircuitConfig, codes: &[InputCode]) -> Result<NeuronRun> {
    run_neuron_with(cfg, codes, &SimOptions::default()).map(|(run, _)| run)
}

/// [`run_neuron`] with explicit simulation options; also returns the raw output.
pub fn run_neuron_with(cfg: &CircuitConfig, codes: &[InputCode], opts: &SimOptions) -> Result<(NeuronRun, SimOutput)> {
    if codes.is_empty() {
        return Err(Error::domain("run_neuron", "no input codes"));
    }
    let schedules = codes
        .iter()
        .enumerate()
        .map(|(k, c)| make_schedule(cfg, c, k))
        .collect::<Result<Vec<_>>>()?;
    let mut out = simulate(cfg, &schedules, opts)?;
    let mut run = NeuronRun::default();
    for (k, code) in codes.iter().enumerate() {
        out.ledger.book_soma(k, cfg.dlcc.e_decision)?;
        let mut stats = out.cycles[k];
        stats.energy = out.ledger.cycles[k];
        out.cycles[k] = stats;
        let decision = dlcc_decide(stats.v_m_sample, &cfg.dlcc)?;
        run.cycles.push(NeuronCycle {
            code: code.clone(),
            stats,
            decision,
            e_tree: stats.energy.tree(),
        });
    }
    Ok((run, out))
}
