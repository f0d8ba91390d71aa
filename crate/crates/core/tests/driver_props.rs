use irsbeam::driver::{init_point, matched_filter, random_baseline, solve, solve_seeded, Termination};
use irsbeam::fixtures::{random_beams, random_feasible};
use irsbeam::model::ConfigDraft;
use irsbeam::objective::effective_channels;
use irsbeam::{sample_scenario, weighted_sum_rate, SystemConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn deployment(f: impl FnOnce(&mut ConfigDraft)) -> SystemConfig {
    let mut d = ConfigDraft::default();
    f(&mut d);
    d.validate().unwrap()
}

#[test]
fn matched_filter_beats_random_beams() {
    let cfg = deployment(|d| d.system.n_users = 3);
    let mut wins = 0;
    for seed in 0..100 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (_, ch) = sample_scenario(&cfg, &mut rng).unwrap();
        let init = init_point(&cfg, &ch, &mut rng).unwrap();
        let w_rand = random_beams(cfg.n_users(), cfg.n_bs_antennas(), &mut rng);
        let f_mf = weighted_sum_rate(&init.theta, &init.w, &init.p, &ch, &cfg).unwrap();
        let f_rand = weighted_sum_rate(&init.theta, &w_rand, &init.p, &ch, &cfg).unwrap();
        wins += usize::from(f_mf >= f_rand);
    }
    assert!(wins >= 90, "matched filter won {wins}/100");
}

#[test]
fn matched_filter_rows_align_with_channels() {
    let cfg = deployment(|d| d.system.n_users = 2);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (_, ch) = sample_scenario(&cfg, &mut rng).unwrap();
    let theta = init_point(&cfg, &ch, &mut rng).unwrap().theta;
    let eff = effective_channels(&ch, &theta).unwrap();
    let w = matched_filter(&eff, &mut rng);
    let rows = w.as_array();
    let u = eff.rows();
    let corr: f64 = u.row(0).iter().zip(rows.row(0)).map(|(a, b)| (a * b.conj()).re).sum::<f64>()
        / u.row(0).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    assert!((corr - 1.0).abs() < 1e-12);
}

#[test]
fn solve_beats_random_baseline() {
    let sizes = [(4, 5), (6, 10), (10, 12)];
    let mut wins = 0;
    for trial in 0..100u64 {
        let (mx, my) = sizes[trial as usize % 3];
        let cfg = deployment(|d| {
            d.system.irs_rows = mx;
            d.system.irs_cols = my;
        });
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + trial);
        let (_, ch) = sample_scenario(&cfg, &mut rng).unwrap();
        let sol = solve_seeded(&cfg, &ch, &mut rng).unwrap();
        let base = random_baseline(&cfg, &ch, 50, &mut rng).unwrap();
        wins += usize::from(sol.objective >= base.objective);
    }
    assert!(wins >= 95, "solve won {wins}/100");
}

#[test]
fn single_user_single_surface_dominates_random_points() {
    let cfg = deployment(|d| {
        d.system.n_users = 1;
        d.system.n_irs = 1;
        d.system.n_bs_antennas = 8;
    });
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let (_, ch) = sample_scenario(&cfg, &mut rng).unwrap();
    let sol = solve_seeded(&cfg, &ch, &mut rng).unwrap();
    assert_eq!(sol.p.as_array()[0], cfg.total_power());
    for _ in 0..1000 {
        let (theta, w, p) = random_feasible(&cfg, &mut rng);
        let f = weighted_sum_rate(&theta, &w, &p, &ch, &cfg).unwrap();
        assert!(sol.objective >= f, "{} < {f}", sol.objective);
    }
}

#[test]
fn solve_is_deterministic() {
    let cfg = deployment(|d| d.system.n_users = 3);
    let run = || {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed());
        let (_, ch) = sample_scenario(&cfg, &mut rng).unwrap();
        solve_seeded(&cfg, &ch, &mut rng).unwrap()
    };
    assert_eq!(run(), run());
}

#[test]
fn regression_instance_converges_monotonically() {
    for k in [2, 4, 6] {
        let cfg = deployment(|d| {
            d.system.n_bs_antennas = 20;
            d.system.n_users = k;
        });
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed());
        let (_, ch) = sample_scenario(&cfg, &mut rng).unwrap();
        let sol = solve_seeded(&cfg, &ch, &mut rng).unwrap();
        assert!(sol.is_monotone(), "K={k}: {:?}", sol.objective_trace());
        assert_eq!(sol.termination, Termination::Converged);
        assert!(sol.outer_iterations() <= 10, "K={k}: {} iterations", sol.outer_iterations());
        let f = weighted_sum_rate(&sol.theta, &sol.w, &sol.p, &ch, &cfg).unwrap();
        assert!((f - sol.objective).abs() <= 1e-10);
    }
}

#[test]
fn regression_instance_is_near_stationary() {
    for k in [2, 4, 6] {
        let cfg = deployment(|d| {
            d.system.n_bs_antennas = 20;
            d.system.n_users = k;
            d.solver.theta_tol = 1e-14;
            d.solver.w_tol = 1e-14;
            d.solver.outer_tol = 1e-13;
            d.solver.max_inner_iters = 5000;
            d.solver.power_tol = 1e-12;
        });
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed());
        let (_, ch) = sample_scenario(&cfg, &mut rng).unwrap();
        let init = init_point(&cfg, &ch, &mut rng).unwrap();
        let sol = solve(&cfg, &ch, init).unwrap();
        let s = sol.stationarity.unwrap();
        assert!(s.theta_final < 1e-3 * s.theta_initial, "K={k}: {s:?}");
        assert!(s.w_final < 1e-3 * s.w_initial, "K={k}: {s:?}");
    }
}
