use acan_core::baseline::baseline_transition_energy_analytic;
use acan_core::bench::{worst_window_mean, Surface, SurfaceAxis};
use acan_core::model::{effective_pc_capacitance, predicted_optimal_frequency, CircuitConfig, SynapseTreeConfig};
use acan_core::neuron::{dlcc_offset, input_sweeps, InputCode};
use proptest::prelude::*;

proptest! {
    #[test]
    fn worst_window_bounds(
        series in prop::collection::vec(0.0f64..1e-11, 1..120),
        skip_frac in 0.0f64..1.0,
        window_frac in 0.0f64..1.0,
    ) {
        let window = 1 + (window_frac * (series.len() - 1) as f64) as usize;
        let skip = (skip_frac * (series.len() - window) as f64) as usize;
        let w = worst_window_mean(&series, skip, window).unwrap();
        let tail = &series[skip..];
        let hi = tail.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mean = tail.iter().sum::<f64>() / tail.len() as f64;
        prop_assert!(w <= hi * (1.0 + 1e-12));
        let first = tail[..window].iter().sum::<f64>() / window as f64;
        let last = tail[tail.len() - window..].iter().sum::<f64>() / window as f64;
        prop_assert!(w >= first.max(last));
        // A window as long as the tail is the tail mean.
        let whole = worst_window_mean(&series, skip, series.len() - skip).unwrap();
        prop_assert!((whole - mean).abs() <= 1e-12 * mean.max(1e-30));
    }

    #[test]
    fn surface_arg_min_is_order_invariant(
        energy in prop::collection::vec(prop_oneof![4 => 0.0f64..1.0, 1 => Just(f64::INFINITY)], 12),
        rotate in 0usize..12,
    ) {
        let xs = vec![1.0, 2.0, 3.0, 4.0];
        let duties = vec![0.1, 0.2, 0.3];
        let s = Surface::new(SurfaceAxis::Frequency, xs.clone(), duties.clone(), energy.clone()).unwrap();
        let finite: Vec<f64> = energy.iter().copied().filter(|e| e.is_finite()).collect();
        match s.arg_min {
            None => prop_assert!(finite.is_empty()),
            Some(p) => {
                prop_assert!(finite.iter().all(|&e| p.energy <= e));
                // Same points listed in a different order give the same optimum.
                let mut pts: Vec<_> = s.points().collect();
                pts.rotate_left(rotate);
                let best = pts
                    .iter()
                    .filter(|q| q.energy.is_finite())
                    .min_by(|a, b| a.energy.total_cmp(&b.energy).then(a.x.total_cmp(&b.x)).then(a.duty.total_cmp(&b.duty)))
                    .unwrap();
                prop_assert_eq!(best, &p);
            }
        }
    }

    #[test]
    fn loading_lowers_predicted_frequency(n in 1usize..64, a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let mut cfg = CircuitConfig::default();
        cfg.tree = SynapseTreeConfig::uniform(n, 1e-12);
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let f_lo = predicted_optimal_frequency(&cfg, lo).unwrap();
        let f_hi = predicted_optimal_frequency(&cfg, hi).unwrap();
        prop_assert!(f_hi <= f_lo * (1.0 + 1e-12));
        prop_assert!(effective_pc_capacitance(&cfg.tree, &cfg.pc, hi, false) >= cfg.pc.c_e);
    }

    #[test]
    fn transition_energy_non_negative_and_path_free(n in 1usize..6, from in 0u64..32, to in 0u64..32) {
        let tree = SynapseTreeConfig::uniform(n, 1e-12);
        let mask = (1u64 << n) - 1;
        let (a, b) = (InputCode::from_value(from & mask, n), InputCode::from_value(to & mask, n));
        let e = baseline_transition_energy_analytic(&tree, &a, &b, 1.8).unwrap();
        prop_assert!(e >= 0.0);
        if b.popcount() == 0 || (from & mask) == (to & mask) {
            prop_assert_eq!(e, 0.0);
        }
    }

    #[test]
    fn offset_interpolation_stays_in_range(m_l in 1e3f64..10e3, m_r in 1e3f64..10e3) {
        if let Ok(l) = dlcc_offset(m_l, m_r) {
            prop_assert!(l.offset.is_finite());
            prop_assert!(l.offset > -0.9 && l.offset < 0.27);
        }
    }

    #[test]
    fn sweeps_are_permutations(bits in 1usize..7, scrambles in 0usize..4, seed in any::<u64>()) {
        let sweeps = input_sweeps(bits, scrambles, seed).unwrap();
        prop_assert_eq!(sweeps.len(), scrambles + 1);
        for s in &sweeps {
            let mut v: Vec<String> = s.iter().map(|c| c.to_string()).collect();
            v.sort();
            v.dedup();
            prop_assert_eq!(v.len(), 1 << bits);
        }
        prop_assert_eq!(input_sweeps(bits, scrambles, seed).unwrap(), sweeps);
    }
}
