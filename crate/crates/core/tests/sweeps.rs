use triple_spread::latin::latin_threshold_sweep;
use triple_spread::pipeline::{threshold_sweep, PipelineParams, SweepMethod};
use triple_spread::sampling::Seed;

#[test]
fn k13_oracle_sweep_rises_through_the_threshold() {
    let grid: Vec<f64> = (0..=20).map(|i| i as f64 / 20.0).collect();
    let rows = threshold_sweep(13, &grid, 100, SweepMethod::Oracle, &PipelineParams::default(), &Seed::new(13)).unwrap();
    // coupled samples make the counts monotone exactly
    for w in rows.windows(2) {
        assert!(w[0].successes <= w[1].successes, "{} > {}", w[0].successes, w[1].successes);
    }
    assert_eq!(rows[0].successes, 0);
    assert_eq!(rows[20].successes, 100);
    let half = rows.iter().find(|r| r.frequency >= 0.5).unwrap();
    assert!((0.25..=0.6).contains(&half.p), "midpoint at {}", half.p);
    for r in &rows {
        assert!(r.ci_low <= r.frequency && r.frequency <= r.ci_high);
    }
}

#[test]
fn pipeline_sweep_on_k21_succeeds_on_full_host() {
    let rows = threshold_sweep(21, &[0.0, 1.0], 20, SweepMethod::Pipeline, &PipelineParams::calibrated_k21(), &Seed::new(1)).unwrap();
    assert_eq!(rows[0].successes, 0);
    assert!(rows[1].successes >= 15, "{}", rows[1].successes);
}

#[test]
fn latin_oracle_sweep_is_monotone() {
    let grid = [0.2, 0.5, 0.8, 1.0];
    let rows = latin_threshold_sweep(5, &grid, 40, SweepMethod::Oracle, &PipelineParams::calibrated_latin(), &Seed::new(3)).unwrap();
    for w in rows.windows(2) {
        assert!(w[0].successes <= w[1].successes);
    }
    assert_eq!(rows[3].successes, 40);
}
