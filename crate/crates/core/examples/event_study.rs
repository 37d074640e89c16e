//! Event-study regressions on a synthetic two-year panel with day and user
//! effects and a planted post-event drop of 0.015.
//!
//!     cargo run --release --example event_study

use normlens::econometrics::{estimate_spec, format_regression_table, EstimateOptions, SpecDef, VcovChoice};
use normlens::synth::{generate_panel, PanelSynthConfig};

fn main() -> normlens::Result<()> {
    let panel = generate_panel(&PanelSynthConfig {
        per_day: 40,
        users: 1_500,
        togetherness: true,
        seed: 3,
        ..Default::default()
    })?;
    println!("{} observations\n", panel.len());

    let runs: [(&str, VcovChoice, bool); 6] = [
        ("raw", VcovChoice::Hc1, false),
        ("baseline", "cluster:day".parse()?, false),
        ("baseline", "newey-west:4".parse()?, true),
        ("user_fe", "cluster:user".parse()?, false),
        ("day_user_fe", VcovChoice::TwoWay, false),
        ("placebo_togetherness", "cluster:day".parse()?, false),
    ];
    let mut results = Vec::new();
    for (spec, vcov, aggregate) in runs {
        let opts = EstimateOptions {
            vcov,
            aggregate,
            ..Default::default()
        };
        results.push(estimate_spec(&SpecDef::parse(spec)?, &panel, &opts)?);
    }
    print!("{}", format_regression_table("Follow Norms around the event", &results));

    let trends = SpecDef::parse("time_trends:year2,after;fe=none;years=both")?;
    let r = estimate_spec(&trends, &panel, &EstimateOptions::default())?;
    println!("\nquadratic trends: {}", r.names.join(", "));
    Ok(())
}
