//! Runs every preset over several seeds and prints the ensemble statistics of
//! the coincidence visibility, for tuning the turbulence anchors.
//!
//! Usage: `cargo run --release --example calibrate -- [n_seeds] [sigma_2m sigma_20m sigma_70m]`

use pathid::scenario::presets::{preset_with_anchors, CALIBRATED_ANCHORS, PRESET_NAMES};
use pathid::scenario::{analyze_traces, simulate};
use pathid::turbulence::Anchor;

fn main() -> pathid::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let n_seeds: u64 = args
        .first()
        .map(|s| s.parse().expect("n_seeds"))
        .unwrap_or(8);
    let mut anchors = CALIBRATED_ANCHORS.to_vec();
    if args.len() >= 4 {
        for (a, s) in anchors.iter_mut().zip(&args[1..4]) {
            a.sigma_angle = s.parse::<f64>().expect("sigma");
        }
    }
    let anchors: Vec<Anchor> = anchors;
    for name in PRESET_NAMES {
        let mut scenario = preset_with_anchors(name, &anchors)?.expect("preset");
        scenario.analysis.fit = false;
        scenario.analysis.n_samples = 20_000;
        let reference = scenario.reference.clone().unwrap_or_default();
        let mut stats = vec![Vec::new(); 3];
        for seed in 1..=n_seeds {
            let sim = simulate(&scenario, seed)?;
            let traces: Vec<_> = sim.traces().into_iter().cloned().collect();
            let report = analyze_traces(&scenario, &traces, seed)?;
            for (k, t) in report.traces.iter().enumerate() {
                if let Some(e) = &t.estimate {
                    stats[k].push((
                        e.mean,
                        e.std,
                        t.shot_noise.unwrap_or(f64::NAN),
                        t.max_mean.unwrap_or(0.0),
                    ));
                }
            }
        }
        println!(
            "{name}: sigma {:.2e} rad; reference V = {:.2}% ± {:.2}%",
            scenario.turbulence.model.sigma_angle,
            100.0 * reference.visibility_coincidences.unwrap_or(f64::NAN),
            100.0 * reference.std_coincidences.unwrap_or(f64::NAN)
        );
        for (label, s) in ["coinc", "signal", "idler"].iter().zip(&stats) {
            let n = s.len() as f64;
            let mean = |f: fn(&(f64, f64, f64, f64)) -> f64| s.iter().map(f).sum::<f64>() / n;
            let vm = mean(|x| x.0);
            let spread = (s.iter().map(|x| (x.0 - vm).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
            println!(
                "  {label:<6} V {:6.2}%  std {:5.2}%  shot {:5.2}%  seed spread {:5.2}%  max level {:8.1}",
                100.0 * vm,
                100.0 * mean(|x| x.1),
                100.0 * mean(|x| x.2),
                100.0 * spread,
                mean(|x| x.3)
            );
        }
    }
    Ok(())
}
