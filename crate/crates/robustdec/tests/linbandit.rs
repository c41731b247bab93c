use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use robustdec::error::Error;
use robustdec::linbandit::{cover_class, grid_cover, model_from_point, BilinearSpec, HypothesisBox};
use robustdec::prob::Dist;

fn mean_reward_spec(r: &[Vec<f64>]) -> BilinearSpec {
    // F(a, z, mu) = E_mu[r(a, .)] - z
    let n_outcomes = r[0].len();
    BilinearSpec {
        n_actions: r.len(),
        n_outcomes,
        z_dim: 1,
        w_dim: 1,
        coeff: r.iter().map(|_| vec![vec![vec![-1.0; n_outcomes]]]).collect(),
        offset: r.iter().map(|row| vec![row.clone()]).collect(),
    }
}

fn random_dist(rng: &mut ChaCha8Rng, n: usize) -> Dist {
    use rand::Rng;
    let w: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 1e-3).collect();
    Dist::from_weights(&w).unwrap()
}

#[test]
fn zero_point_gives_full_simplex() {
    let spec = BilinearSpec {
        n_actions: 2,
        n_outcomes: 3,
        z_dim: 2,
        w_dim: 1,
        coeff: vec![vec![vec![vec![1.0, -0.5, 0.2], vec![0.3, 0.0, -1.0]]]; 2],
        offset: Vec::new(),
    };
    let m = model_from_point(&spec, &[0.0, 0.0]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for a in 0..2 {
        for _ in 0..200 {
            assert!(m.arm(a).contains(&random_dist(&mut rng, 3)));
        }
        for o in 0..3 {
            assert!(m.arm(a).contains(&Dist::point(3, o)));
        }
    }
}

#[test]
fn mean_reward_membership_matches_expectation() {
    let r = vec![vec![0.0, 0.5, 1.0], vec![1.0, 0.0, 0.25]];
    let spec = mean_reward_spec(&r);
    let z = 0.4;
    let m = model_from_point(&spec, &[z]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for a in 0..2 {
        let mut hits = 0;
        for _ in 0..500 {
            let mu = random_dist(&mut rng, 3);
            let e = mu.expect(&r[a]).unwrap();
            let inside = m.arm(a).contains(&mu);
            if (e - z).abs() > 1e-6 {
                assert!(!inside, "mean {e} accepted");
            }
        }
        // Members drawn from the arm satisfy the equality.
        for _ in 0..200 {
            let mu = m.arm(a).sample_member(&mut rng).unwrap();
            assert!((mu.expect(&r[a]).unwrap() - z).abs() < 1e-6);
            hits += 1;
        }
        assert_eq!(hits, 200);
    }
}

#[test]
fn out_of_range_point_is_infeasible() {
    let spec = mean_reward_spec(&[vec![0.0, 0.5, 1.0]]);
    assert!(matches!(model_from_point(&spec, &[-0.5]), Err(Error::InfeasiblePoint(_))));
    let (class, skipped) = cover_class(&spec, &[vec![-0.5], vec![0.5]], 0.1).unwrap();
    assert_eq!(class.len(), 1);
    assert_eq!(skipped.len(), 1);
}

#[test]
fn cover_examples() {
    let unit = HypothesisBox::new(vec![-1.0], vec![1.0]).unwrap();
    assert_eq!(grid_cover(&unit, 1.0).unwrap(), vec![vec![0.0]]);
    assert_eq!(grid_cover(&unit, 3.0).unwrap(), vec![vec![0.0]]);
    let half = grid_cover(&unit, 0.5).unwrap();
    assert_eq!(half.len(), 2);
    assert!((half[0][0] + 0.5).abs() < 1e-12 && (half[1][0] - 0.5).abs() < 1e-12);
    assert_eq!(grid_cover(&unit, 0.2).unwrap().len(), 5);
    // Z = 2: ceil(sqrt(2) / eps) points per axis.
    let square = HypothesisBox::new(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap();
    assert_eq!(grid_cover(&square, 0.5).unwrap().len(), 9);
    assert!(HypothesisBox::new(vec![-2.0], vec![1.0]).is_err());
    assert!(grid_cover(&unit, 0.0).is_err());
}

#[test]
fn cover_reaches_every_sampled_point() {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for (lo, hi, eps) in [(vec![-1.0, -1.0], vec![1.0, 1.0], 0.5), (vec![-1.0, 0.0, -0.5], vec![1.0, 0.3, 0.5], 0.35)] {
        let b = HypothesisBox::new(lo.clone(), hi.clone()).unwrap();
        let pts = grid_cover(&b, eps).unwrap();
        for _ in 0..1000 {
            let x: Vec<f64> = lo.iter().zip(&hi).map(|(l, h)| rng.random_range(*l..=*h)).collect();
            let best = pts
                .iter()
                .map(|p| p.iter().zip(&x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
                .fold(f64::INFINITY, f64::min);
            assert!(best <= eps + 1e-12, "uncovered point at distance {best}");
        }
    }
}

proptest! {
    #[test]
    fn arms_are_convex(z in -0.9f64..0.9, l in 0.0f64..1.0, seed in 0u64..1000) {
        let spec = BilinearSpec {
            n_actions: 1,
            n_outcomes: 4,
            z_dim: 1,
            w_dim: 1,
            coeff: vec![vec![vec![vec![0.2, -0.4, 0.1, 0.3]]]],
            offset: vec![vec![vec![0.1, 0.0, -0.2, 0.05]]],
        };
        let m = match model_from_point(&spec, &[z]) {
            Ok(m) => m,
            Err(Error::InfeasiblePoint(_)) => return Ok(()),
            Err(e) => panic!("{e}"),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = m.arm(0).sample_member(&mut rng).unwrap();
        let b = m.arm(0).sample_member(&mut rng).unwrap();
        prop_assert!(m.arm(0).contains(&a.mix(&b, l).unwrap()));
    }
}
