//! Calibrating the WPO, GEA and fixed-position baselines to the same monetization rate.

use hca2e::baselines::{calibrate_beta, calibrate_fixed_positions, expected_m, BaselineKind, BaselineConfig};
use hca2e::simulator::{GeneratorConfig, RequestSource};
use hca2e::SlotExposureModel;

fn main() -> hca2e::Result<()> {
    let gen = GeneratorConfig::default();
    let slice = gen.head(2000)?;
    let q = SlotExposureModel::geometric(gen.page_length, 0.95)?;
    let (alpha, m_star) = (0.5, 0.08);

    let positions = calibrate_fixed_positions(&slice[0].constraints, &slice, &q, m_star)?;
    let fixed = BaselineConfig::fixed(positions.clone());
    let m = expected_m(&slice, &q, |r| fixed.template_for(r, alpha))?;
    println!("fixed positions {positions:?}: m={m:.4}");

    for kind in [BaselineKind::Wpo, BaselineKind::Gea] {
        let cal = calibrate_beta(kind, &slice, &q, alpha, 0.8, m_star, 1e-3, 40)?;
        println!(
            "{:<4} beta={:.4} m={:.4} after {} bisection steps",
            kind.label(),
            cal.beta,
            cal.expected_m,
            cal.iterations
        );
        let cfg = match kind {
            BaselineKind::Gea => BaselineConfig::gea(cal.beta, 0.8),
            _ => BaselineConfig::wpo(cal.beta),
        };
        let t = cfg.template_for(&slice[0], alpha)?;
        println!("     first request: ads at {:?}", t.ad_positions());
    }
    Ok(())
}
