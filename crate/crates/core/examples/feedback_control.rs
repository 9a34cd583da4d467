//! Closed-loop control of the threshold: a miscalibrated starting rho is pulled toward the
//! target monetization rate window by window.

use hca2e::controller::ControllerConfig;
use hca2e::simulator::{run, GeneratorConfig, RequestSource, RunSettings, Strategy};
use hca2e::SlotExposureModel;

fn main() -> hca2e::Result<()> {
    let gen = GeneratorConfig {
        num_requests: 20_000,
        ..GeneratorConfig::default()
    };
    let q = SlotExposureModel::geometric(gen.page_length, 0.95)?;
    let m_star = 0.10;
    let settings = RunSettings { alpha: 0.5, m_star, user_seed: 7 };

    for rho0 in [0.005, 0.5] {
        let strategy = Strategy::Hca2e {
            beam_size: 3,
            rho_thres: rho0,
            controller: Some(ControllerConfig {
                target_m_star: m_star,
                learning_rate: 0.3,
                window_size: 1000,
                rho_min: 0.0,
                rho_max_factor: 1e6,
            }),
        };
        let out = run(&strategy, gen.open()?, &q, &settings, &mut ())?;
        println!("start rho={rho0}");
        for w in out.windows.iter().step_by(4) {
            println!(
                "  window {:>2}: m={:.4} rho {:.5} -> {:.5}",
                w.window_index, w.realized_m, w.rho_before, w.rho_after
            );
        }
        println!("  overall expected m={:.4}", out.metrics.expected_m);
    }
    Ok(())
}
