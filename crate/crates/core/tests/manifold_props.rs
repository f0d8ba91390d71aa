use irsbeam::fixtures::{random_beams, random_complex_matrix, random_complex_vector, random_phases};
use irsbeam::manifold::{ambient_inner, Circle, Manifold, Oblique};
use irsbeam::model::{BeamMatrix, PhaseVector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn max_diff<D: ndarray::Dimension>(a: &ndarray::Array<irsbeam::C64, D>, b: &ndarray::Array<irsbeam::C64, D>) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 1000, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn circle_axioms(seed in any::<u64>(), dim in 1usize..24) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = Circle::new(dim).unwrap();
        let x = random_phases(dim, &mut rng).into_inner();
        let g = random_complex_vector(dim, &mut rng);
        let v = m.project(&x, &g).unwrap();
        prop_assert!(max_diff(&m.project(&x, &v).unwrap(), &v) <= 1e-12 * (1.0 + m.norm(&v)));
        prop_assert!(m.is_tangent(&x, &v, 1e-12 * (1.0 + m.norm(&g))));
        // The removed radial part is orthogonal to every tangent vector.
        let w = m.project(&x, &random_complex_vector(dim, &mut rng)).unwrap();
        let radial = &g - &v;
        prop_assert!(ambient_inner(&radial, &w).abs() <= 1e-12 * (1.0 + m.norm(&g) * m.norm(&w)));
        for t in [1e-3, 1e-2, 0.5, 3.0] {
            let r = m.retract(&x, &v, t).unwrap();
            prop_assert!(PhaseVector::new(r).is_ok());
        }
        let e = |t: f64| max_diff(&m.retract(&x, &v, t).unwrap(), &(&x + &v.mapv(|z| z * t)));
        let (e3, e4) = (e(1e-3), e(1e-4));
        let scale = v.iter().map(|z| z.norm_sqr()).fold(0.0, f64::max);
        prop_assert!(e3 <= 1e-6 * scale + 1e-13 && e4 <= 1e-8 * scale + 1e-13, "{e3} {e4}");
        prop_assert!(e4 <= e3 / 50.0 + 1e-13);
    }

    #[test]
    fn oblique_axioms(seed in any::<u64>(), rows in 1usize..7, cols in 1usize..12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = Oblique::new(rows, cols).unwrap();
        let x = random_beams(rows, cols, &mut rng).into_inner();
        let g = random_complex_matrix(rows, cols, &mut rng);
        let v = m.project(&x, &g).unwrap();
        prop_assert!(max_diff(&m.project(&x, &v).unwrap(), &v) <= 1e-12 * (1.0 + m.norm(&v)));
        prop_assert!(m.is_tangent(&x, &v, 1e-12 * (1.0 + m.norm(&g))));
        let w = m.project(&x, &random_complex_matrix(rows, cols, &mut rng)).unwrap();
        let radial = &g - &v;
        prop_assert!(ambient_inner(&radial, &w).abs() <= 1e-12 * (1.0 + m.norm(&g) * m.norm(&w)));
        for t in [1e-3, 1e-2, 0.5, 3.0] {
            let r = m.retract(&x, &v, t).unwrap();
            prop_assert!(BeamMatrix::new(r).is_ok());
        }
        let e = |t: f64| max_diff(&m.retract(&x, &v, t).unwrap(), &(&x + &v.mapv(|z| z * t)));
        let (e3, e4) = (e(1e-3), e(1e-4));
        let scale = v.rows().into_iter().map(|r| r.iter().map(|z| z.norm_sqr()).sum::<f64>()).fold(0.0, f64::max);
        prop_assert!(e3 <= 1e-6 * scale + 1e-13 && e4 <= 1e-8 * scale + 1e-13, "{e3} {e4}");
        prop_assert!(e4 <= e3 / 50.0 + 1e-13);
    }
}
