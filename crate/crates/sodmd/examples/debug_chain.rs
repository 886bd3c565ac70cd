use sodmd::bench::{experiment1, Experiment1Config};

fn main() {
    for (label, sigma, ridge) in [
        ("noiseless ridge0", 0.0, Some(0.0)),
        ("noiseless default", 0.0, None),
        ("noisy default", 0.01, None),
        ("dense noiseless r0", 0.0, Some(0.0)),
    ] {
        let config = if label.starts_with("dense") {
            Experiment1Config {
                trials: 20,
                sigma,
                ridge,
                train_dt: 0.05,
                train_count: 101,
                ..Default::default()
            }
        } else {
            Experiment1Config { trials: 20, sigma, ridge, ..Default::default() }
        };
        let r = experiment1(&config).unwrap();
        println!(
            "{label}: median {:.5} p95 {:.5} ridge {:.3e} eigs {:?}",
            r.summary.median,
            r.summary.p95,
            r.ridge,
            r.eigenvalues.iter().map(|l| format!("{:.4}{:+.4}i", l.re, l.im)).collect::<Vec<_>>()
        );
    }
}
