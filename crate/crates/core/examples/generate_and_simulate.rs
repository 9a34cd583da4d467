//! Generate a request log, write it to disk, and replay it under a calibrated HCA2E strategy
//! while recording where the ads landed.

use hca2e::io::{write_log, LogFile};
use hca2e::simulator::{
    ad_position_report, CalibrationConfig, Experiment, GeneratorConfig, RequestSource, RunObserver,
    StrategyFamily, UserEvent,
};
use hca2e::simulator::run::ServedRequest;
use hca2e::{ControllerConfig, Request, SlotExposureModel};

#[derive(Default)]
struct Events(Vec<UserEvent>);

impl RunObserver for Events {
    fn on_request(&mut self, _: &Request, served: &ServedRequest) -> hca2e::Result<()> {
        self.0.push(served.event.clone());
        Ok(())
    }
}

fn main() -> hca2e::Result<()> {
    let gen = GeneratorConfig {
        num_requests: 10_000,
        ..GeneratorConfig::default()
    };
    let dir = std::env::temp_dir().join("hca2e-example");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("requests.jsonl");
    let n = write_log(&path, gen.open()?.collect::<hca2e::Result<Vec<_>>>()?)?;
    println!("wrote {n} requests to {}", path.display());

    let log = LogFile::new(&path)?;
    let q = SlotExposureModel::geometric(gen.page_length, 0.95)?;
    let m_star = 0.10;
    let controller = ControllerConfig {
        target_m_star: m_star,
        learning_rate: 0.1,
        window_size: 2000,
        rho_min: 0.0,
        rho_max_factor: 1e6,
    };
    let calibration = CalibrationConfig { requests: 1000, ..CalibrationConfig::default() };
    let exp = Experiment::new(&log, q, 7, calibration, Some(controller))?;

    let mut events = Events::default();
    let out = exp.run_cell(StrategyFamily::Hca2e { beam_size: 5 }, 0.5, m_star, &mut events)?;
    let m = &out.metrics;
    println!(
        "rev={:.4} gmv={:.4} ctr={:.4} realized m={:.4} expected m={:.4}",
        m.rev, m.gmv, m.ctr, m.realized_m, m.expected_m
    );

    let c = &log.head(1)?[0].constraints;
    if let Some(report) = ad_position_report(&events.0, c) {
        println!("average ad position {:.2}", report.average_position);
        for b in &report.buckets {
            println!("  slots {:>2}..={:<2} {:5.1}%", b.start, b.end, 100.0 * b.share);
        }
    }
    Ok(())
}
