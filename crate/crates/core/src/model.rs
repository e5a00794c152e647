//! Domain types for one neuron instance and the closed-form parameter algebra.
//!
//! Everything here is evaluable without time integration. The transient
//! engine is checked against these functions, so they double as oracles.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Process corner label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Corner {
    FF,
    TT,
    SS,
    FS,
    SF,
}

impl Corner {
    pub const ALL: [Corner; 5] = [Corner::FF, Corner::TT, Corner::SS, Corner::FS, Corner::SF];
}

impl fmt::Display for Corner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Corner::FF => "FF",
            Corner::TT => "TT",
            Corner::SS => "SS",
            Corner::FS => "FS",
            Corner::SF => "SF",
        };
        f.write_str(s)
    }
}

impl FromStr for Corner {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "FF" => Ok(Corner::FF),
            "TT" => Ok(Corner::TT),
            "SS" => Ok(Corner::SS),
            "FS" => Ok(Corner::FS),
            "SF" => Ok(Corner::SF),
            other => Err(Error::config("env.corner", format!("unknown corner `{other}`"))),
        }
    }
}

/// Process corner and junction temperature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub corner: Corner,
    #[serde(rename = "temperature_C")]
    pub temperature_c: f64,
}

impl Default for Environment {
    fn default() -> Self {
        Environment {
            corner: Corner::TT,
            temperature_c: 25.0,
        }
    }
}

/// Resistance multipliers standing in for foundry corner models.
///
/// Slow devices conduct less, so SS > TT > FF. A transmission gate has one
/// device of each polarity; skewed corners use the geometric mean of the
/// fast and slow multipliers for it. The nMOS bypass switch follows its
/// own polarity (FS is fast-n, SF is slow-n).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProcessModel {
    pub fast: f64,
    pub typical: f64,
    pub slow: f64,
    /// Fractional resistance increase per °C.
    pub temp_coeff: f64,
    #[serde(rename = "reference_temperature_C")]
    pub reference_temperature_c: f64,
}

impl Default for ProcessModel {
    fn default() -> Self {
        ProcessModel {
            fast: 0.85,
            typical: 1.0,
            slow: 1.20,
            temp_coeff: 0.003,
            reference_temperature_c: 25.0,
        }
    }
}

impl ProcessModel {
    fn temperature_factor(&self, env: &Environment) -> f64 {
        1.0 + self.temp_coeff * (env.temperature_c - self.reference_temperature_c)
    }

    /// Multiplier for an nMOS device.
    pub fn nmos_multiplier(&self, env: &Environment) -> f64 {
        let corner = match env.corner {
            Corner::FF | Corner::FS => self.fast,
            Corner::TT => self.typical,
            Corner::SS | Corner::SF => self.slow,
        };
        corner * self.temperature_factor(env)
    }

    /// Multiplier for a complementary transmission gate.
    pub fn tg_multiplier(&self, env: &Environment) -> f64 {
        let corner = match env.corner {
            Corner::FF => self.fast,
            Corner::TT => self.typical,
            Corner::SS => self.slow,
            Corner::FS | Corner::SF => (self.fast * self.slow).sqrt(),
        };
        corner * self.temperature_factor(env)
    }
}

/// Resonant power-clock generator parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerClockConfig {
    #[serde(rename = "L_PC")]
    pub l_pc: f64,
    #[serde(rename = "C_E")]
    pub c_e: f64,
    /// Lumped PC-node wiring, pad and inductor self-capacitance.
    #[serde(rename = "C_node")]
    pub c_node: f64,
    #[serde(rename = "V_dc")]
    pub v_dc: f64,
    /// Bypass switch width (m).
    #[serde(rename = "W_n")]
    pub w_n: f64,
    /// Top-up window as a fraction of the clock period.
    pub duty: f64,
    /// Clock frequency; the cycle period is its reciprocal.
    pub f_nominal: f64,
    /// Bypass on-resistance coefficient, R_PC = K_n / W_n (Ω·m).
    #[serde(rename = "K_n")]
    pub k_n: f64,
    /// Inductor quality factor at the unloaded resonance.
    #[serde(rename = "Q_L")]
    pub q_inductor: f64,
}

impl Default for PowerClockConfig {
    fn default() -> Self {
        PowerClockConfig {
            l_pc: 1e-3,
            c_e: 25e-12,
            c_node: DEFAULT_C_NODE,
            v_dc: 0.9,
            w_n: 30e-6,
            duty: 0.05,
            f_nominal: 1e6,
            k_n: 2400.0 * 1e-6,
            q_inductor: DEFAULT_Q_L,
        }
    }
}

/// Default inductor quality factor. With it the unloaded tank at 1 MHz
/// loses about 0.1 pJ per cycle.
pub const DEFAULT_Q_L: f64 = 600.0;

/// Default PC-node parasitic; places the unloaded energy minimum of the
/// 1 mH / 25 pF tank at 1 MHz.
pub const DEFAULT_C_NODE: f64 = 0.25e-12;

impl PowerClockConfig {
    pub fn period(&self) -> f64 {
        1.0 / self.f_nominal
    }

    pub fn t_on(&self) -> f64 {
        self.duty * self.period()
    }
}

/// Gated capacitive synapse tree and membrane node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynapseTreeConfig {
    /// Per-synapse capacitance; its length is the fan-in.
    #[serde(rename = "C_s")]
    pub c_s: Vec<f64>,
    #[serde(rename = "C_d")]
    pub c_d: f64,
    #[serde(rename = "C_par")]
    pub c_par: f64,
    #[serde(rename = "R_TG")]
    pub r_tg_nominal: f64,
    #[serde(rename = "C_inv")]
    pub c_inv: f64,
    #[serde(rename = "C_sh")]
    pub c_sh: f64,
    #[serde(rename = "C_pl_on")]
    pub c_pl_on: f64,
    #[serde(rename = "C_pl_off")]
    pub c_pl_off: f64,
    #[serde(rename = "C_pr")]
    pub c_pr: f64,
    #[serde(rename = "V_REF")]
    pub v_ref: f64,
    #[serde(rename = "R_reset")]
    pub r_reset: f64,
    /// Force a membrane reset every this many cycles (0 disables).
    pub recalibration_period: usize,
}

impl Default for SynapseTreeConfig {
    fn default() -> Self {
        SynapseTreeConfig::uniform(4, 1e-12)
    }
}

impl SynapseTreeConfig {
    /// `n` equal synapses with the damping capacitor matched to their sum.
    pub fn uniform(n: usize, c_s: f64) -> Self {
        SynapseTreeConfig {
            c_s: vec![c_s; n],
            c_d: c_s * n as f64,
            c_par: 0.5e-12,
            r_tg_nominal: 5e3,
            c_inv: 2e-15,
            c_sh: 1.5e-15,
            c_pl_on: 3e-15,
            c_pl_off: 2e-15,
            c_pr: 3e-15,
            v_ref: 0.7,
            r_reset: 1e3,
            recalibration_period: 16,
        }
    }

    pub fn n(&self) -> usize {
        self.c_s.len()
    }

    pub fn total_synapse_capacitance(&self) -> f64 {
        self.c_s.iter().sum()
    }

    /// Membrane-node capacitance to ground.
    pub fn membrane_ground_capacitance(&self) -> f64 {
        self.c_d + self.c_par
    }

    /// Zeroes every switch parasitic (C_pl, C_pr, C_sh, C_inv and C_par).
    pub fn without_parasitics(mut self) -> Self {
        self.c_par = 0.0;
        self.c_inv = 0.0;
        self.c_sh = 0.0;
        self.c_pl_on = 0.0;
        self.c_pl_off = 0.0;
        self.c_pr = 0.0;
        self
    }

    /// Number of synapses active at loading `alpha`.
    pub fn active_count(&self, alpha: f64) -> usize {
        ((alpha.clamp(0.0, 1.0) * self.n() as f64).round() as usize).min(self.n())
    }

    /// Input code with the first `round(alpha·n)` synapses active.
    pub fn loading_code(&self, alpha: f64) -> Vec<bool> {
        let k = self.active_count(alpha);
        (0..self.n()).map(|i| i < k).collect()
    }
}

/// Worst-case delay of one RRAM setting, reached at the minimum overdrive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayAnchor {
    #[serde(rename = "M_L")]
    pub m_l: f64,
    #[serde(rename = "M_R")]
    pub m_r: f64,
    pub worst_delay: f64,
}

/// Behavioural comparator delay: base delay from the RRAM pair plus a
/// logarithmic metastability term in the input overdrive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayModel {
    /// Corner anchors of a bilinear table over (M_L, M_R).
    pub anchors: Vec<DelayAnchor>,
    /// Extra delay per natural-log unit of overdrive below `overdrive_scale` (s).
    pub metastability_slope: f64,
    /// Overdrive magnitudes below this are clamped (V).
    pub min_overdrive: f64,
    /// Overdrive above which the metastability term vanishes (V).
    pub overdrive_scale: f64,
}

impl Default for DelayModel {
    fn default() -> Self {
        // Fig-style anchors: balanced 1k/1k and 10k/10k, and the fastest
        // unbalanced pair. The (10k, 1k) corner has no crossover and mirrors
        // its opposite.
        DelayModel {
            anchors: vec![
                DelayAnchor { m_l: 1e3, m_r: 1e3, worst_delay: 87e-9 },
                DelayAnchor { m_l: 1e3, m_r: 10e3, worst_delay: 51e-9 },
                DelayAnchor { m_l: 10e3, m_r: 1e3, worst_delay: 51e-9 },
                DelayAnchor { m_l: 10e3, m_r: 10e3, worst_delay: 147e-9 },
            ],
            metastability_slope: 3e-9,
            min_overdrive: 1e-3,
            overdrive_scale: 0.9,
        }
    }
}

/// RRAM-degenerated latched comparator (neuron soma).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DlccConfig {
    #[serde(rename = "M_L")]
    pub m_l: f64,
    #[serde(rename = "M_R")]
    pub m_r: f64,
    #[serde(rename = "V_TH")]
    pub v_th: f64,
    #[serde(rename = "V_dd")]
    pub v_dd: f64,
    #[serde(rename = "E_decision")]
    pub e_decision: f64,
    pub delay_model: DelayModel,
}

impl Default for DlccConfig {
    fn default() -> Self {
        DlccConfig {
            m_l: 10e3,
            m_r: 10e3,
            v_th: 1.1,
            v_dd: 1.8,
            e_decision: 4.49e-12,
            delay_model: DelayModel::default(),
        }
    }
}

/// Integration controls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimControls {
    pub steps_per_cycle: usize,
    pub startup_discard_cycles: usize,
    /// Trace sampling stride in steps; must divide `steps_per_cycle`.
    pub trace_stride: usize,
}

impl Default for SimControls {
    fn default() -> Self {
        SimControls {
            steps_per_cycle: 4096,
            startup_discard_cycles: 32,
            trace_stride: 16,
        }
    }
}

/// Full parameterisation of one neuron instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct CircuitConfig {
    pub pc: PowerClockConfig,
    pub tree: SynapseTreeConfig,
    pub dlcc: DlccConfig,
    pub env: Environment,
    pub process: ProcessModel,
    pub sim: SimControls,
}

impl CircuitConfig {
    /// Checks every type invariant, naming the first offending field.
    pub fn validate(&self) -> Result<()> {
        fn positive(field: &str, v: f64) -> Result<()> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::config(field, format!("must be positive, got {v:e}")))
            }
        }
        fn non_negative(field: &str, v: f64) -> Result<()> {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::config(field, format!("must be non-negative, got {v:e}")))
            }
        }
        let pc = &self.pc;
        positive("pc.L_PC", pc.l_pc)?;
        positive("pc.C_E", pc.c_e)?;
        non_negative("pc.C_node", pc.c_node)?;
        positive("pc.V_dc", pc.v_dc)?;
        positive("pc.W_n", pc.w_n)?;
        positive("pc.f_nominal", pc.f_nominal)?;
        positive("pc.K_n", pc.k_n)?;
        positive("pc.Q_L", pc.q_inductor)?;
        positive("pc.duty", pc.duty)?;
        if pc.duty > 0.5 {
            return Err(Error::config("pc.duty", format!("must be at most 0.5, got {}", pc.duty)));
        }
        let t = &self.tree;
        if t.c_s.is_empty() {
            return Err(Error::config("tree.C_s", "at least one synapse is required"));
        }
        for (i, &c) in t.c_s.iter().enumerate() {
            positive(&format!("tree.C_s[{i}]"), c)?;
        }
        non_negative("tree.C_d", t.c_d)?;
        non_negative("tree.C_par", t.c_par)?;
        if t.c_d + t.c_par <= 0.0 {
            return Err(Error::config("tree.C_d", "C_d + C_par must be positive"));
        }
        positive("tree.R_TG", t.r_tg_nominal)?;
        positive("tree.R_reset", t.r_reset)?;
        non_negative("tree.C_inv", t.c_inv)?;
        non_negative("tree.C_sh", t.c_sh)?;
        non_negative("tree.C_pl_on", t.c_pl_on)?;
        non_negative("tree.C_pl_off", t.c_pl_off)?;
        non_negative("tree.C_pr", t.c_pr)?;
        let d = &self.dlcc;
        positive("dlcc.V_dd", d.v_dd)?;
        if !(0.0..=d.v_dd).contains(&t.v_ref) {
            return Err(Error::config("tree.V_REF", format!("must lie in [0, V_dd], got {}", t.v_ref)));
        }
        positive("dlcc.M_L", d.m_l)?;
        positive("dlcc.M_R", d.m_r)?;
        if !(d.v_th > 0.0 && d.v_th < d.v_dd) {
            return Err(Error::config("dlcc.V_TH", format!("must lie in (0, V_dd), got {}", d.v_th)));
        }
        non_negative("dlcc.E_decision", d.e_decision)?;
        let dm = &d.delay_model;
        if dm.anchors.is_empty() {
            return Err(Error::config("dlcc.delay_model.anchors", "at least one anchor is required"));
        }
        for (i, a) in dm.anchors.iter().enumerate() {
            positive(&format!("dlcc.delay_model.anchors[{i}].worst_delay"), a.worst_delay)?;
        }
        non_negative("dlcc.delay_model.metastability_slope", dm.metastability_slope)?;
        positive("dlcc.delay_model.min_overdrive", dm.min_overdrive)?;
        positive("dlcc.delay_model.overdrive_scale", dm.overdrive_scale)?;
        if !(-40.0..=150.0).contains(&self.env.temperature_c) {
            return Err(Error::config(
                "env.temperature_C",
                format!("must lie in [-40, 150], got {}", self.env.temperature_c),
            ));
        }
        let s = &self.sim;
        if s.steps_per_cycle < 256 {
            return Err(Error::config("sim.steps_per_cycle", "must be at least 256"));
        }
        if s.trace_stride == 0 || s.steps_per_cycle % s.trace_stride != 0 {
            return Err(Error::config("sim.trace_stride", "must divide steps_per_cycle"));
        }
        let period = pc.period();
        if pc.t_on() >= period {
            return Err(Error::config("pc.duty", "t_ON must be shorter than the period"));
        }
        Ok(())
    }

    /// Bypass switch on-resistance at this config's environment.
    pub fn r_pc(&self) -> f64 {
        bypass_resistance(self.pc.w_n, self.pc.k_n, &self.env, &self.process)
    }

    /// Transmission-gate on-resistance at this config's environment.
    pub fn r_tg(&self) -> f64 {
        tg_resistance(self.tree.r_tg_nominal, &self.env, &self.process)
    }

    /// Series resistance of the inductor, fixed by its Q at the unloaded resonance.
    pub fn r_inductor(&self) -> f64 {
        let c0 = effective_pc_capacitance(&self.tree, &self.pc, 0.0, true);
        (self.pc.l_pc / c0).sqrt() / self.pc.q_inductor
    }

    /// Zeroes the PC-node parasitic and every tree switch parasitic.
    pub fn without_parasitics(mut self) -> Self {
        self.pc.c_node = 0.0;
        self.tree = self.tree.without_parasitics();
        self
    }

    /// Chooses L_PC so the unloaded resonance lands on `f`.
    pub fn retune_inductor(&mut self, f: f64) {
        let c0 = effective_pc_capacitance(&self.tree, &self.pc, 0.0, true);
        self.pc.l_pc = 1.0 / ((2.0 * PI * f).powi(2) * c0);
    }
}

/// Weights and bias of the McCulloch-Pitts neuron a tree realises.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuronSpec {
    pub weights: Vec<f64>,
    pub theta: f64,
}

/// Series combination of two capacitances; zero if either is zero.
pub fn series(a: f64, b: f64) -> f64 {
    if a <= 0.0 || b <= 0.0 {
        0.0
    } else {
        a * b / (a + b)
    }
}

/// f = 1 / (2π·√(L·C)).
pub fn resonant_frequency(l: f64, c: f64) -> Result<f64> {
    if !(l > 0.0 && l.is_finite()) {
        return Err(Error::domain("resonant_frequency", format!("L must be positive, got {l}")));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::domain("resonant_frequency", format!("C must be positive, got {c}")));
    }
    Ok(1.0 / (2.0 * PI * (l * c).sqrt()))
}

/// Total capacitance seen at the power-clock node at loading `alpha`.
///
/// C_E and the node parasitic are always present. Active branches contribute their switch parasitics plus the synapse
/// capacitance in series with the membrane node; inactive branches
/// contribute only their off-state parasitics. `all_off` forces α = 0.
pub fn effective_pc_capacitance(
    tree: &SynapseTreeConfig,
    pc: &PowerClockConfig,
    alpha: f64,
    all_off: bool,
) -> f64 {
    let n = tree.n();
    let n_on = if all_off { 0 } else { tree.active_count(alpha) };
    let s_on: f64 = tree.c_s[..n_on].iter().sum();
    pc.c_e
        + pc.c_node
        + n_on as f64 * (tree.c_pl_on + tree.c_pr)
        + (n - n_on) as f64 * (tree.c_pl_off + tree.c_sh)
        + series(s_on, tree.membrane_ground_capacitance())
}

/// Equivalent capacitance charged through the gates at loading `alpha`.
pub fn effective_tree_capacitance(tree: &SynapseTreeConfig, alpha: f64) -> f64 {
    let n_on = tree.active_count(alpha);
    let s_on: f64 = tree.c_s[..n_on].iter().sum();
    n_on as f64 * tree.c_pr + series(s_on, tree.membrane_ground_capacitance())
}

/// Resonant frequency of the configured inductor against the loaded node.
pub fn predicted_optimal_frequency(cfg: &CircuitConfig, alpha: f64) -> Result<f64> {
    resonant_frequency(cfg.pc.l_pc, effective_pc_capacitance(&cfg.tree, &cfg.pc, alpha, false))
}

/// Peak membrane voltage from the n-synapse divider with every synapse in
/// the denominator.
pub fn membrane_peak_closed_form(tree: &SynapseTreeConfig, code: &[bool], v_pk: f64) -> Result<f64> {
    if code.len() != tree.n() {
        return Err(Error::domain(
            "membrane_peak_closed_form",
            format!("code has {} bits, tree has {} synapses", code.len(), tree.n()),
        ));
    }
    if !(v_pk > 0.0) {
        return Err(Error::domain("membrane_peak_closed_form", "V_pk must be positive"));
    }
    let active: f64 = tree.c_s.iter().zip(code).filter(|(_, &x)| x).map(|(c, _)| c).sum();
    let total = tree.total_synapse_capacitance() + tree.c_d + tree.c_par;
    Ok(v_pk * active / total + tree.v_ref)
}

/// Fraction of a power-clock step transmitted onto the membrane node.
pub fn divider_gain(c_s: f64, c_d: f64) -> Result<f64> {
    if !(c_s > 0.0) || c_d < 0.0 {
        return Err(Error::domain("divider_gain", format!("need C_s > 0 and C_d >= 0, got {c_s}, {c_d}")));
    }
    Ok(c_s / (c_s + c_d))
}

/// Adiabatic charging loss of an RC branch under sinusoidal drive, plus the
/// gate-driver switching energy.
pub fn synapse_energy_analytic(c_t: f64, r_tg: f64, t_pc: f64, v_dd: f64, c_inv: f64) -> Result<f64> {
    if !(c_t >= 0.0 && r_tg >= 0.0 && t_pc > 0.0 && v_dd >= 0.0 && c_inv >= 0.0) {
        return Err(Error::domain("synapse_energy_analytic", "arguments must be non-negative and T_PC positive"));
    }
    Ok(adiabatic_loss(c_t, r_tg, t_pc, v_dd) + c_inv * v_dd * v_dd)
}

/// First term of [`synapse_energy_analytic`]: C·V²·(π²/8)·(R·C/T).
pub fn adiabatic_loss(c_t: f64, r_tg: f64, t_pc: f64, v_dd: f64) -> f64 {
    c_t * v_dd * v_dd * (PI * PI / 8.0) * (r_tg * c_t / t_pc)
}

/// Energy dumped by the bypass switch discharging C_PC from V_x for t_ON.
pub fn topup_energy_analytic(c_pc: f64, v_x: f64, r_pc: f64, t_on: f64) -> Result<f64> {
    if !(c_pc >= 0.0 && r_pc >= 0.0 && t_on >= 0.0) {
        return Err(Error::domain("topup_energy_analytic", "arguments must be non-negative"));
    }
    if t_on == 0.0 || c_pc == 0.0 {
        return Ok(0.0);
    }
    let decay = if r_pc == 0.0 { 0.0 } else { (-2.0 * t_on / (r_pc * c_pc)).exp() };
    Ok(0.5 * c_pc * v_x * v_x * (1.0 - decay))
}

/// Bypass switch on-resistance K_n / W_n at the given environment.
pub fn bypass_resistance(w_n: f64, k_n: f64, env: &Environment, process: &ProcessModel) -> f64 {
    k_n / w_n * process.nmos_multiplier(env)
}

/// Transmission-gate on-resistance at the given environment.
pub fn tg_resistance(r_nominal: f64, env: &Environment, process: &ProcessModel) -> f64 {
    r_nominal * process.tg_multiplier(env)
}
