//! Sweep alpha for HCA2E and the baselines at a common monetization rate and print the
//! revenue/GMV trade-off relative to the fixed-position layout.

use hca2e::simulator::{pareto_front, pareto_sweep, CalibrationConfig, Experiment, GeneratorConfig, StrategyFamily};
use hca2e::{ControllerConfig, SlotExposureModel};

fn main() -> hca2e::Result<()> {
    let gen = GeneratorConfig {
        num_requests: 8000,
        ..GeneratorConfig::default()
    };
    let q = SlotExposureModel::geometric(gen.page_length, 0.95)?;
    let m_star = 0.08;
    let controller = ControllerConfig {
        target_m_star: m_star,
        learning_rate: 0.1,
        window_size: 2000,
        rho_min: 0.0,
        rho_max_factor: 1e6,
    };
    let calibration = CalibrationConfig { requests: 1000, ..CalibrationConfig::default() };
    let exp = Experiment::new(&gen, q, 7, calibration, Some(controller))?;

    let families = [StrategyFamily::Wpo, StrategyFamily::Gea, StrategyFamily::Hca2e { beam_size: 3 }];
    let rows = pareto_sweep(&exp, &[0.2, 0.6, 1.0], &families, m_star, |_, _, _| Ok(()))?;
    for r in &rows {
        println!(
            "{:<10} alpha={:.1}  drev={:+6.2}%  dgmv={:+6.2}%  m={:.4}",
            r.series(),
            r.alpha,
            r.delta_rev_pct,
            r.delta_gmv_pct,
            r.realized_m
        );
    }
    for family in families {
        let points: Vec<(f64, f64)> = rows
            .iter()
            .filter(|r| r.strategy == family.label() && r.beam_size == family.beam_size())
            .map(|r| (r.delta_rev_pct, r.delta_gmv_pct))
            .collect();
        println!("{} front: {:?}", family.label(), pareto_front(&points));
    }
    Ok(())
}
