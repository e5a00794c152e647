//! Parametric studies: worst-window energy surfaces, width/duty sweeps,
//! optimal-frequency search, loading scaling, corners and savings reports.

use std::cmp::Ordering;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baseline::{run_baseline, BaselineConfig, DriveMode};
use crate::error::{Error, Result};
use crate::model::{predicted_optimal_frequency, CircuitConfig, Corner, SynapseTreeConfig};
use crate::neuron::{input_sweeps, mean, run_neuron, InputCode, NeuronRun};

/// Clock frequency relative to nominal used for code-sweep studies
/// (the sweep optimum sits slightly below the unloaded resonance).
pub const OPERATING_FREQUENCY_RATIO: f64 = 0.977;

/// Repeats of the five sweep orders in the full width/duty protocol.
pub const FULL_PROTOCOL_REPEATS: usize = 32;

/// Cycle counts of the worst-window metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowProtocol {
    pub cycles: usize,
    pub skip: usize,
    pub window: usize,
}

impl Default for WindowProtocol {
    fn default() -> Self {
        WindowProtocol {
            cycles: 600,
            skip: 200,
            window: 20,
        }
    }
}

impl WindowProtocol {
    pub fn validate(&self) -> Result<()> {
        if self.window == 0 || self.skip + self.window > self.cycles {
            return Err(Error::config(
                "protocol",
                format!(
                    "need window > 0 and skip + window <= cycles, got {}/{}/{}",
                    self.cycles, self.skip, self.window
                ),
            ));
        }
        Ok(())
    }
}

/// Largest mean over sliding windows of `window` entries after dropping the first `skip`.
pub fn worst_window_mean(series: &[f64], skip: usize, window: usize) -> Result<f64> {
    if window == 0 {
        return Err(Error::domain("worst_window_mean", "window must be positive"));
    }
    if series.len() < skip + window {
        return Err(Error::domain(
            "worst_window_mean",
            format!("{} entries cannot hold skip {skip} + window {window}", series.len()),
        ));
    }
    let tail = &series[skip..];
    let mut worst = f64::NEG_INFINITY;
    for w in tail.windows(window) {
        let m = w.iter().sum::<f64>() / window as f64;
        if m > worst || m.is_nan() {
            worst = m;
        }
    }
    Ok(worst)
}

/// Fixed input pattern for frequency and duty sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LoadCase {
    #[serde(rename = "all-0")]
    AllZero,
    #[serde(rename = "all-1")]
    AllOne,
    /// Ascending count over all codes, repeated.
    #[serde(rename = "code-sweep")]
    CodeSweep,
}

impl LoadCase {
    pub fn codes(&self, n: usize, cycles: usize) -> Result<Vec<InputCode>> {
        Ok(match self {
            LoadCase::AllZero => vec![InputCode::zeros(n); cycles],
            LoadCase::AllOne => vec![InputCode::ones(n); cycles],
            LoadCase::CodeSweep => {
                let sweep = input_sweeps(n, 0, 0)?.remove(0);
                sweep.iter().cycle().take(cycles).cloned().collect()
            }
        })
    }
}

impl fmt::Display for LoadCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LoadCase::AllZero => "all-0",
            LoadCase::AllOne => "all-1",
            LoadCase::CodeSweep => "code-sweep",
        })
    }
}

impl FromStr for LoadCase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all-0" | "all0" => Ok(LoadCase::AllZero),
            "all-1" | "all1" => Ok(LoadCase::AllOne),
            "code-sweep" | "sweep" => Ok(LoadCase::CodeSweep),
            other => Err(Error::OutOfRange(format!(
                "unknown load case {other:?} (expected all-0, all-1 or code-sweep)"
            ))),
        }
    }
}

/// Shared knobs of the studies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchOptions {
    pub protocol: WindowProtocol,
    pub seed: u64,
    /// Repeats of the five sweep orders in code-sweep studies.
    pub repeats: usize,
    /// Scrambled orders after the ascending one.
    pub scrambles: usize,
}

impl Default for BenchOptions {
    fn default() -> Self {
        BenchOptions {
            protocol: WindowProtocol::default(),
            seed: 1,
            repeats: 8,
            scrambles: 4,
        }
    }
}

/// Description of a study as read from the command line or a file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub frequencies: Vec<f64>,
    pub duties: Vec<f64>,
    pub widths: Vec<f64>,
    pub c_e: Vec<f64>,
    pub n_synapses: usize,
    pub alphas: Vec<f64>,
    pub load: LoadCase,
    pub protocol: WindowProtocol,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            frequencies: linspace(0.9e6, 1.1e6, 21),
            duties: vec![0.01, 0.02, 0.05, 0.1],
            widths: linspace(10e-6, 100e-6, 10),
            c_e: vec![25e-12, 100e-12, 1000e-12],
            n_synapses: 512,
            alphas: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            load: LoadCase::AllZero,
            protocol: WindowProtocol::default(),
        }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        let grid = |field: &str, g: &[f64]| {
            if g.is_empty() || g.iter().any(|v| !v.is_finite() || *v < 0.0) {
                Err(Error::config(field, "grid must be non-empty with finite non-negative values"))
            } else {
                Ok(())
            }
        };
        grid("frequencies", &self.frequencies)?;
        grid("duties", &self.duties)?;
        grid("widths", &self.widths)?;
        grid("c_e", &self.c_e)?;
        grid("alphas", &self.alphas)?;
        if self.alphas.iter().any(|&a| a > 1.0) {
            return Err(Error::config("alphas", "loading must lie in [0, 1]"));
        }
        if self.n_synapses == 0 {
            return Err(Error::config("n_synapses", "must be positive"));
        }
        self.protocol.validate()
    }
}

/// `n` evenly spaced points from `a` to `b` inclusive.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![a],
        _ => (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect(),
    }
}

fn is_divergence(e: &Error) -> bool {
    matches!(e, Error::Diverged { .. })
}

/// Tree and soma energy per cycle under a fixed load.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LoadEnergy {
    /// Worst-window tree energy (J).
    pub tree: f64,
    /// Mean soma energy per cycle over the same span (J).
    pub soma: f64,
}

impl LoadEnergy {
    const DIVERGED: LoadEnergy = LoadEnergy {
        tree: f64::INFINITY,
        soma: f64::INFINITY,
    };
}

fn load_energy(cfg: &CircuitConfig, codes: &[InputCode], protocol: &WindowProtocol) -> Result<LoadEnergy> {
    match run_neuron(cfg, codes) {
        Ok(run) => {
            let tree = worst_window_mean(&run.tree_energies(), protocol.skip, protocol.window)?;
            let soma: Vec<f64> = run.cycles[protocol.skip..].iter().map(|c| c.stats.energy.soma).collect();
            Ok(LoadEnergy { tree, soma: mean(&soma) })
        }
        Err(e) if is_divergence(&e) => Ok(LoadEnergy::DIVERGED),
        Err(e) => Err(e),
    }
}

/// Worst-window energy under a fixed load; a diverging run scores +∞.
pub fn window_energy(cfg: &CircuitConfig, load: LoadCase, protocol: &WindowProtocol) -> Result<LoadEnergy> {
    protocol.validate()?;
    load_energy(cfg, &load.codes(cfg.tree.n(), protocol.cycles)?, protocol)
}

/// Worst-window energy with the first `round(alpha·n)` synapses held active.
pub fn loading_energy(cfg: &CircuitConfig, alpha: f64, protocol: &WindowProtocol) -> Result<LoadEnergy> {
    protocol.validate()?;
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::domain("loading_energy", format!("alpha must lie in [0, 1], got {alpha}")));
    }
    let code = InputCode::new(cfg.tree.loading_code(alpha));
    load_energy(cfg, &vec![code; protocol.cycles], protocol)
}

/// Which parameter a surface spans besides the duty cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SurfaceAxis {
    Frequency,
    Width,
}

impl SurfaceAxis {
    pub fn header(&self) -> &'static str {
        match self {
            SurfaceAxis::Frequency => "f_Hz",
            SurfaceAxis::Width => "W_um",
        }
    }

    fn to_csv_unit(self, x: f64) -> f64 {
        match self {
            SurfaceAxis::Frequency => x,
            SurfaceAxis::Width => x * 1e6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SurfacePoint {
    /// Frequency (Hz) or width (m).
    pub x: f64,
    pub duty: f64,
    pub energy: f64,
}

/// Energy over an (x, duty) grid; x-major.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Surface {
    pub axis: SurfaceAxis,
    pub xs: Vec<f64>,
    pub duties: Vec<f64>,
    pub energy: Vec<f64>,
    pub arg_min: Option<SurfacePoint>,
}

/// Ascending order on (energy, x, duty); non-finite energies never win.
fn point_order(a: &SurfacePoint, b: &SurfacePoint) -> Ordering {
    a.energy
        .total_cmp(&b.energy)
        .then(a.x.total_cmp(&b.x))
        .then(a.duty.total_cmp(&b.duty))
}

impl Surface {
    pub fn new(axis: SurfaceAxis, xs: Vec<f64>, duties: Vec<f64>, energy: Vec<f64>) -> Result<Self> {
        if energy.len() != xs.len() * duties.len() {
            return Err(Error::domain(
                "Surface",
                format!("{} values for a {}x{} grid", energy.len(), xs.len(), duties.len()),
            ));
        }
        let mut s = Surface {
            axis,
            xs,
            duties,
            energy,
            arg_min: None,
        };
        s.arg_min = s.points().filter(|p| p.energy.is_finite()).min_by(point_order);
        Ok(s)
    }

    pub fn points(&self) -> impl Iterator<Item = SurfacePoint> + '_ {
        self.xs.iter().enumerate().flat_map(move |(i, &x)| {
            self.duties.iter().enumerate().map(move |(j, &duty)| SurfacePoint {
                x,
                duty,
                energy: self.energy[i * self.duties.len() + j],
            })
        })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.energy[i * self.duties.len() + j]
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([self.axis.header(), "duty", "energy_J"])?;
        for p in self.points() {
            out.write_record([
                self.axis.to_csv_unit(p.x).to_string(),
                p.duty.to_string(),
                p.energy.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

fn grid_surface<F>(axis: SurfaceAxis, xs: &[f64], duties: &[f64], eval: F) -> Result<Surface>
where
    F: Fn(f64, f64) -> Result<f64> + Sync,
{
    if xs.is_empty() || duties.is_empty() {
        return Err(Error::domain("sweep", "grids must be non-empty"));
    }
    let cells: Vec<(f64, f64)> = xs.iter().flat_map(|&x| duties.iter().map(move |&d| (x, d))).collect();
    let energy = cells
        .par_iter()
        .map(|&(x, d)| eval(x, d))
        .collect::<Result<Vec<_>>>()?;
    Surface::new(axis, xs.to_vec(), duties.to_vec(), energy)
}

/// Worst-window tree energy over clock frequency × duty with the inductor as configured.
pub fn sweep_freq_duty(
    cfg: &CircuitConfig,
    f_grid: &[f64],
    d_grid: &[f64],
    load: LoadCase,
    opts: &BenchOptions,
) -> Result<Surface> {
    grid_surface(SurfaceAxis::Frequency, f_grid, d_grid, |f, d| {
        let mut c = cfg.clone();
        c.pc.f_nominal = f;
        c.pc.duty = d;
        c.validate()?;
        Ok(window_energy(&c, load, &opts.protocol)?.tree)
    })
}

/// The clock moved to the code-sweep operating point.
pub fn operating_point(cfg: &CircuitConfig) -> CircuitConfig {
    let mut c = cfg.clone();
    c.pc.f_nominal *= OPERATING_FREQUENCY_RATIO;
    c
}

/// Energy statistics of repeated sweep orders.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepEnergy {
    /// Largest per-sweep mean tree energy after the startup cycles.
    pub worst_sweep: f64,
    /// Mean tree energy per cycle after the startup cycles.
    pub late_mean: f64,
    pub late_soma_mean: f64,
    /// Mean tree energy of each repeat that starts after the startup cycles.
    pub repeat_means: Vec<f64>,
    pub run: NeuronRun,
}

impl SweepEnergy {
    /// (max − min) / mean of the late repeat means.
    pub fn repeat_spread(&self) -> f64 {
        let hi = self.repeat_means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = self.repeat_means.iter().copied().fold(f64::INFINITY, f64::min);
        if self.repeat_means.len() < 2 {
            0.0
        } else {
            (hi - lo) / mean(&self.repeat_means)
        }
    }
}

/// Input stream of `repeats` × (ascending + scrambled sweep orders).
pub fn sweep_codes(n_bits: usize, opts: &BenchOptions) -> Result<Vec<InputCode>> {
    let orders = input_sweeps(n_bits, opts.scrambles, opts.seed)?;
    let one: Vec<InputCode> = orders.into_iter().flatten().collect();
    Ok((0..opts.repeats).flat_map(|_| one.iter().cloned()).collect())
}

fn late_sweep_stats(series: &[f64], soma: &[f64], sweep_len: usize, repeat_len: usize, skip: usize) -> Result<(f64, f64, f64, Vec<f64>)> {
    let first_sweep = skip.div_ceil(sweep_len);
    let start = first_sweep * sweep_len;
    if start >= series.len() {
        return Err(Error::domain(
            "sweep_energy",
            format!("{} cycles leave no complete sweep after skipping {skip}", series.len()),
        ));
    }
    let worst = series[start..]
        .chunks_exact(sweep_len)
        .map(mean)
        .fold(f64::NEG_INFINITY, f64::max);
    let first_repeat = skip.div_ceil(repeat_len) * repeat_len;
    let repeats = if first_repeat < series.len() {
        series[first_repeat..].chunks_exact(repeat_len).map(mean).collect()
    } else {
        vec![]
    };
    Ok((worst, mean(&series[start..]), mean(&soma[start..]), repeats))
}

/// Runs the repeated sweep orders on the adiabatic neuron.
pub fn sweep_energy(cfg: &CircuitConfig, opts: &BenchOptions) -> Result<SweepEnergy> {
    let codes = sweep_codes(cfg.tree.n(), opts)?;
    let run = run_neuron(cfg, &codes)?;
    let sweep_len = 1usize << cfg.tree.n();
    let repeat_len = sweep_len * (opts.scrambles + 1);
    let series = run.tree_energies();
    let soma: Vec<f64> = run.cycles.iter().map(|c| c.stats.energy.soma).collect();
    let (worst_sweep, late_mean, late_soma_mean, repeat_means) =
        late_sweep_stats(&series, &soma, sweep_len, repeat_len, opts.protocol.skip)?;
    Ok(SweepEnergy {
        worst_sweep,
        late_mean,
        late_soma_mean,
        repeat_means,
        run,
    })
}

/// Worst sweep-average tree energy over bypass width × duty at the operating frequency.
pub fn sweep_width_duty(cfg: &CircuitConfig, w_grid: &[f64], d_grid: &[f64], opts: &BenchOptions) -> Result<Surface> {
    let op = operating_point(cfg);
    grid_surface(SurfaceAxis::Width, w_grid, d_grid, |w, d| {
        let mut c = op.clone();
        c.pc.w_n = w;
        c.pc.duty = d;
        c.validate()?;
        match sweep_energy(&c, opts) {
            Ok(s) => Ok(s.worst_sweep),
            Err(e) if is_divergence(&e) => Ok(f64::INFINITY),
            Err(e) => Err(e),
        }
    })
}

/// Outcome of the frequency search.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrequencyOptimum {
    pub alpha: f64,
    pub frequency: f64,
    pub energy: LoadEnergy,
    /// Resonance predicted from the loaded node capacitance.
    pub predicted: f64,
    /// False when the coarse grid shows more than one local minimum
    /// (typically a subharmonic valley); the search still refines around
    /// the lowest grid point.
    pub unimodal: bool,
    /// Every (frequency, tree energy) evaluated, coarse grid first.
    pub evaluations: Vec<(f64, f64)>,
}

const COARSE_POINTS: usize = 13;
const COARSE_SPAN: f64 = 0.6;
const REFINE_TOLERANCE: f64 = 1e-3;

fn count_local_minima(e: &[f64]) -> usize {
    let n = e.len();
    (0..n)
        .filter(|&i| {
            e[i].is_finite()
                && (i == 0 || e[i] < e[i - 1])
                && (i + 1 == n || e[i] < e[i + 1])
        })
        .count()
}

/// Clock frequency minimising worst-window tree energy at loading `alpha`.
///
/// A 13-point grid over ±60 % of the predicted resonance brackets the
/// lowest point, then golden-section search narrows it to 0.1 %.
pub fn optimize_frequency(cfg: &CircuitConfig, alpha: f64, opts: &BenchOptions) -> Result<FrequencyOptimum> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::domain("optimize_frequency", format!("alpha must lie in [0, 1], got {alpha}")));
    }
    let predicted = predicted_optimal_frequency(cfg, alpha)?;
    let objective = |f: f64| -> Result<LoadEnergy> {
        let mut c = cfg.clone();
        c.pc.f_nominal = f;
        loading_energy(&c, alpha, &opts.protocol)
    };
    let grid = linspace(predicted * (1.0 - COARSE_SPAN), predicted * (1.0 + COARSE_SPAN), COARSE_POINTS);
    let coarse = grid.par_iter().map(|&f| objective(f)).collect::<Result<Vec<_>>>()?;
    let tree: Vec<f64> = coarse.iter().map(|e| e.tree).collect();
    let unimodal = count_local_minima(&tree) <= 1;
    let mut evaluations: Vec<(f64, f64)> = grid.iter().copied().zip(tree.iter().copied()).collect();
    let k = (0..grid.len())
        .min_by(|&a, &b| tree[a].total_cmp(&tree[b]))
        .expect("non-empty grid");
    if !tree[k].is_finite() {
        return Err(Error::Diverged {
            cycle: 0,
            v_pc: f64::INFINITY,
            limit: 0.0,
        });
    }
    let mut best = (grid[k], coarse[k]);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (grid[k.saturating_sub(1)], grid[(k + 1).min(grid.len() - 1)]);
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let mut e1 = objective(x1)?;
    let mut e2 = objective(x2)?;
    evaluations.push((x1, e1.tree));
    evaluations.push((x2, e2.tree));
    while (b - a) > REFINE_TOLERANCE * 0.5 * (a + b) {
        if e1.tree <= e2.tree {
            b = x2;
            x2 = x1;
            e2 = e1;
            x1 = b - inv_phi * (b - a);
            e1 = objective(x1)?;
            evaluations.push((x1, e1.tree));
        } else {
            a = x1;
            x1 = x2;
            e1 = e2;
            x2 = a + inv_phi * (b - a);
            e2 = objective(x2)?;
            evaluations.push((x2, e2.tree));
        }
    }
    for (x, e) in [(x1, e1), (x2, e2)] {
        if e.tree < best.1.tree {
            best = (x, e);
        }
    }
    Ok(FrequencyOptimum {
        alpha,
        frequency: best.0,
        energy: best.1,
        predicted,
        unimodal,
        evaluations,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingRow {
    pub c_e: f64,
    pub alpha: f64,
    pub f_opt: f64,
    /// Tree energy per cycle at `f_opt`.
    pub s_e: f64,
    /// Soma energy per cycle at `f_opt`.
    pub n_e: f64,
    pub predicted: f64,
    pub unimodal: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingTable {
    pub n: usize,
    pub rows: Vec<ScalingRow>,
}

impl ScalingTable {
    pub fn row(&self, c_e: f64, alpha: f64) -> Option<&ScalingRow> {
        self.rows
            .iter()
            .find(|r| (r.c_e - c_e).abs() <= 1e-9 * c_e.abs() && (r.alpha - alpha).abs() < 1e-12)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["C_E_pF", "alpha", "f_opt_Hz", "S_E_pJ", "N_E_pJ"])?;
        for r in &self.rows {
            out.write_record([
                (r.c_e * 1e12).to_string(),
                r.alpha.to_string(),
                r.f_opt.to_string(),
                (r.s_e * 1e12).to_string(),
                (r.n_e * 1e12).to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// `cfg` with `n` copies of its first synapse and C_d matched to their sum.
pub fn scaled_config(cfg: &CircuitConfig, n: usize) -> Result<CircuitConfig> {
    let c_s = *cfg
        .tree
        .c_s
        .first()
        .ok_or_else(|| Error::config("tree.C_s", "needs at least one synapse"))?;
    let mut c = cfg.clone();
    c.tree = SynapseTreeConfig {
        c_s: vec![c_s; n],
        c_d: c_s * n as f64,
        ..cfg.tree.clone()
    };
    Ok(c)
}

/// Optimal frequency and energies over C_E × loading for an `n`-synapse tree.
///
/// For each C_E the inductor is retuned so the unloaded resonance equals the
/// configured nominal frequency.
pub fn scaling_study(
    cfg: &CircuitConfig,
    n: usize,
    c_e_list: &[f64],
    alpha_list: &[f64],
    opts: &BenchOptions,
) -> Result<ScalingTable> {
    if n == 0 || c_e_list.is_empty() || alpha_list.is_empty() {
        return Err(Error::domain("scaling_study", "need n > 0 and non-empty grids"));
    }
    let base = scaled_config(cfg, n)?;
    let cells: Vec<(f64, f64)> = c_e_list
        .iter()
        .flat_map(|&ce| alpha_list.iter().map(move |&a| (ce, a)))
        .collect();
    let rows = cells
        .par_iter()
        .map(|&(c_e, alpha)| {
            let mut c = base.clone();
            c.pc.c_e = c_e;
            c.retune_inductor(base.pc.f_nominal);
            c.validate()?;
            let opt = optimize_frequency(&c, alpha, opts)?;
            Ok(ScalingRow {
                c_e,
                alpha,
                f_opt: opt.frequency,
                s_e: opt.energy.tree,
                n_e: opt.energy.soma,
                predicted: opt.predicted,
                unimodal: opt.unimodal,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ScalingTable { n, rows })
}

/// Baseline tree energy per cycle with the first `round(alpha·n)` plates
/// recharged every cycle (return-to-zero drive).
pub fn baseline_loading_energy(cfg: &BaselineConfig, alpha: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::domain("baseline_loading_energy", format!("alpha must lie in [0, 1], got {alpha}")));
    }
    let rz = BaselineConfig {
        mode: DriveMode::Rz,
        ..cfg.clone()
    };
    let code = InputCode::new(cfg.tree.loading_code(alpha));
    let run = run_baseline(&rz, &vec![code; 3])?;
    Ok(mean(&run.tree_energies()[1..]))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CornerRow {
    pub corner: Corner,
    pub temperature_c: f64,
    /// Mean tree energy per cycle after startup.
    pub tree: f64,
    pub worst_sweep: f64,
    pub soma: f64,
    /// Comparator output per cycle.
    pub outputs: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CornerTable {
    pub frequency: f64,
    pub rows: Vec<CornerRow>,
}

impl CornerTable {
    /// (max − min) / min of the tree energies.
    pub fn tree_spread(&self) -> f64 {
        let hi = self.rows.iter().map(|r| r.tree).fold(f64::NEG_INFINITY, f64::max);
        let lo = self.rows.iter().map(|r| r.tree).fold(f64::INFINITY, f64::min);
        (hi - lo) / lo
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["corner", "temperature_C", "E_tree_pJ", "E_tree_worst_pJ", "E_soma_pJ", "outputs"])?;
        for r in &self.rows {
            out.write_record([
                r.corner.to_string(),
                r.temperature_c.to_string(),
                (r.tree * 1e12).to_string(),
                (r.worst_sweep * 1e12).to_string(),
                (r.soma * 1e12).to_string(),
                r.outputs.clone(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Repeated sweep orders over every corner × temperature at the operating frequency.
pub fn corner_study(cfg: &CircuitConfig, corners: &[Corner], temps: &[f64], opts: &BenchOptions) -> Result<CornerTable> {
    if corners.is_empty() || temps.is_empty() {
        return Err(Error::domain("corner_study", "need at least one corner and temperature"));
    }
    let op = operating_point(cfg);
    let cells: Vec<(Corner, f64)> = corners.iter().flat_map(|&c| temps.iter().map(move |&t| (c, t))).collect();
    let rows = cells
        .par_iter()
        .map(|&(corner, temperature_c)| {
            let mut c = op.clone();
            c.env.corner = corner;
            c.env.temperature_c = temperature_c;
            c.validate()?;
            let s = sweep_energy(&c, opts)?;
            Ok(CornerRow {
                corner,
                temperature_c,
                tree: s.late_mean,
                worst_sweep: s.worst_sweep,
                soma: s.late_soma_mean,
                outputs: s.run.output_bits(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CornerTable {
        frequency: op.pc.f_nominal,
        rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DesignEnergy {
    /// Mean tree energy per cycle (J).
    pub tree: f64,
    /// Mean soma energy per cycle (J).
    pub soma: f64,
}

impl DesignEnergy {
    pub fn total(&self) -> f64 {
        self.tree + self.soma
    }
}

/// Adiabatic versus conventional neuron on identical inputs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SavingsReport {
    /// Adiabatic clock frequency used for the comparison.
    pub operating_frequency: f64,
    pub nominal_frequency: f64,
    pub adiabatic: DesignEnergy,
    /// The same adiabatic run clocked exactly at the nominal frequency.
    pub adiabatic_at_nominal: DesignEnergy,
    pub baseline: DesignEnergy,
    /// 1 − adiabatic/baseline tree energy.
    pub savings: f64,
    pub savings_total: f64,
    pub cycles: usize,
    pub skip: usize,
    pub outputs_match: bool,
    pub adiabatic_outputs: String,
    pub baseline_outputs: String,
}

/// Runs both designs on the repeated sweep orders and reports late-cycle means.
pub fn compare_designs(cfg: &CircuitConfig, opts: &BenchOptions) -> Result<SavingsReport> {
    let op = operating_point(cfg);
    let (ad, nominal) = rayon::join(|| sweep_energy(&op, opts), || sweep_energy(cfg, opts));
    let (ad, nominal) = (ad?, nominal?);
    let codes = sweep_codes(cfg.tree.n(), opts)?;
    let base = run_baseline(&BaselineConfig::from_circuit(cfg), &codes)?;
    let start = opts.protocol.skip.div_ceil(1 << cfg.tree.n()) << cfg.tree.n();
    let late = &base.cycles[start.min(base.len())..];
    let baseline = DesignEnergy {
        tree: mean(&late.iter().map(|c| c.e_tree).collect::<Vec<_>>()),
        soma: mean(&late.iter().map(|c| c.stats.energy.soma).collect::<Vec<_>>()),
    };
    let adiabatic = DesignEnergy {
        tree: ad.late_mean,
        soma: ad.late_soma_mean,
    };
    let adiabatic_outputs = ad.run.output_bits();
    let baseline_outputs = base.output_bits();
    Ok(SavingsReport {
        operating_frequency: op.pc.f_nominal,
        nominal_frequency: cfg.pc.f_nominal,
        adiabatic,
        adiabatic_at_nominal: DesignEnergy {
            tree: nominal.late_mean,
            soma: nominal.late_soma_mean,
        },
        baseline,
        savings: 1.0 - adiabatic.tree / baseline.tree,
        savings_total: 1.0 - adiabatic.total() / baseline.total(),
        cycles: codes.len(),
        skip: start,
        outputs_match: adiabatic_outputs == baseline_outputs,
        adiabatic_outputs,
        baseline_outputs,
    })
}
