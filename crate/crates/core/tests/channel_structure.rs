use irsbeam::channel::{bs_irs_channel, ChannelSet};
use irsbeam::fixtures::{random_channels, small_config};
use irsbeam::model::ConfigDraft;
use irsbeam::{sample_scenario, C64};
use nalgebra::DMatrix;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn singular_values(g: &Array2<C64>) -> Vec<f64> {
    let m = DMatrix::from_fn(g.nrows(), g.ncols(), |i, j| nalgebra::Complex::new(g[[i, j]].re, g[[i, j]].im));
    let mut s: Vec<f64> = m.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap());
    s
}

#[test]
fn bs_irs_channels_are_rank_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..50 {
        let (mx, my, n) = (rng.random_range(1..6), rng.random_range(1..6), rng.random_range(1..16));
        let gamma = C64::from_polar(rng.random_range(0.1..2.0), rng.random_range(0.0..6.0));
        let g = bs_irs_channel(gamma, rng.random_range(-1.5..1.5), rng.random_range(-3.0..3.0), rng.random_range(-1.5..1.5), mx, my, n);
        let s = singular_values(&g);
        let expected = gamma.norm() * ((mx * my * n) as f64).sqrt();
        assert!((s[0] - expected).abs() <= 1e-10 * expected);
        assert!(s.iter().skip(1).all(|v| *v <= 1e-10 * s[0]));
    }
}

#[test]
fn sampled_scenarios_are_rank_one() {
    let mut d = ConfigDraft::default();
    d.system.n_irs = 4;
    d.system.n_users = 3;
    d.system.shadowing_var_db2 = 4.0;
    let cfg = d.validate().unwrap();
    for seed in 0..10 {
        let (_, ch) = sample_scenario(&cfg, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        for l in 0..ch.n_irs() {
            let s = singular_values(ch.bs_irs(l));
            assert!(s.iter().skip(1).all(|v| *v <= 1e-10 * s[0]));
        }
    }
}

#[test]
fn perturbed_channel_is_rejected() {
    let cfg = small_config(1, 2, 2, 1, 4);
    let ch = random_channels(&cfg, 1);
    let mut g = ch.bs_irs(0).clone();
    let bump = g[[0, 0]] * 0.5;
    g[[0, 0]] += bump;
    let h = vec![vec![ch.irs_user(0, 0).clone()]];
    let gammas = vec![ch.bs_irs_gain(0)];
    let rhos = vec![vec![ch.irs_user_gain(0, 0)]];
    assert!(ChannelSet::new(vec![g], h, gammas, rhos, None).is_err());
}
