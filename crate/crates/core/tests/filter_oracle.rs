mod common;

use common::grid_filter::{compare, PARTICLES};

#[test]
fn particle_filter_tracks_grid_filter() {
    for seed in 0..3 {
        let (mean_err, sd_err) = compare(seed, PARTICLES);
        assert!(mean_err <= 0.02, "seed {seed}: mean error {mean_err}");
        assert!(sd_err <= 0.05, "seed {seed}: sd error {sd_err}");
    }
}
