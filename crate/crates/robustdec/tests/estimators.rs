use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use robustdec::dec::{Model, ModelClass, RewardFn};
use robustdec::estimators::*;
use robustdec::prob::{hellinger_project, hellinger_sq, Dist, ImpreciseBelief};

fn d(v: &[f64]) -> Dist {
    Dist::new(v.to_vec()).unwrap()
}

fn class(arms: Vec<Vec<ImpreciseBelief>>) -> ModelClass {
    ModelClass::new(arms.into_iter().enumerate().map(|(i, a)| Model::new(format!("m{i}"), a).unwrap()).collect()).unwrap()
}

fn halfspace_class() -> (ModelClass, RewardFn) {
    let r = RewardFn::new(vec![vec![0.0, 0.5, 1.0], vec![1.0, 0.5, 0.0], vec![0.2, 0.8, 0.4]]).unwrap();
    let mk = |cs: [f64; 3]| (0..3).map(|a| ImpreciseBelief::halfspace(r.row(a).to_vec(), cs[a]).unwrap()).collect::<Vec<_>>();
    (class(vec![mk([0.6, 0.3, 0.5]), mk([0.3, 0.6, 0.5]), mk([0.5, 0.5, 0.7]), mk([0.2, 0.2, 0.3])]), r)
}

#[test]
fn prior_matches_closed_form() {
    let (h, _) = halfspace_class();
    let z = build_prior(&h, 0.001, 100).unwrap();
    assert_eq!(z.weights(), &[0.125, 0.125, 0.125, 0.125, 0.499, 0.001]);
    assert!(build_prior(&h, 0.5, 100).is_err());
    let single = class(vec![vec![ImpreciseBelief::full_simplex(2).unwrap()]]);
    assert_eq!(build_prior(&single, 0.001, 1).unwrap().weight(&BettorId::Model("m0".into())), Some(0.5));
    assert_eq!(eps_bet(1), 0.5);
    assert!((eps_bet(400) - (2f64.ln() / 400.0).sqrt()).abs() < 1e-15);
}

#[test]
fn estimate_with_a_dominant_point_bettor_is_close_to_it() {
    let mu = d(&[0.2, 0.3, 0.5]);
    let h = class(vec![vec![ImpreciseBelief::singleton(mu.clone())]]);
    let r = RewardFn::new(vec![vec![0.0, 0.5, 1.0]]).unwrap();
    let z = build_prior(&h, 1e-9, 1_000_000_000).unwrap();
    let e = rue_estimate(&z, &h, 0, &r).unwrap();
    // The pessimism term is tiny at a huge horizon, so the estimate sits near the point.
    assert!(hellinger_sq(&e.dist, &mu).unwrap() < 1e-8);
}

#[test]
fn estimate_matches_grid_on_two_outcomes() {
    let r = RewardFn::new(vec![vec![0.0, 1.0]]).unwrap();
    let h = class(vec![vec![ImpreciseBelief::halfspace(vec![0.0, 1.0], 0.7).unwrap()]]);
    let z = build_prior(&h, 0.001, 4).unwrap();
    let e = rue_estimate(&z, &h, 0, &r).unwrap();
    let w = z.weights();
    let objective = |p: f64| {
        let mu = d(&[1.0 - p, p]);
        let half = ImpreciseBelief::halfspace(vec![0.0, 1.0], 0.7).unwrap();
        w[0] * 2.0 * hellinger_project(&mu, &half).unwrap().dist_sq
            + w[1] * z.eps_bet() * p
            + w[2] * 2.0 * hellinger_sq(&mu, &Dist::uniform(2)).unwrap()
    };
    let best = (1..1000).map(|k| k as f64 / 1000.0).min_by(|a, b| objective(*a).total_cmp(&objective(*b))).unwrap();
    assert!((e.dist.probs()[1] - best).abs() < 2e-3, "{:?} vs {best}", e.dist);
}

#[test]
fn update_factors_match_direct_formula() {
    let r = RewardFn::new(vec![vec![0.0, 1.0]]).unwrap();
    let nu = d(&[0.3, 0.7]);
    let h = class(vec![vec![ImpreciseBelief::singleton(nu.clone())]]);
    let z = build_prior(&h, 0.01, 10).unwrap();
    let e = rue_estimate(&z, &h, 0, &r).unwrap();
    let m = e.dist.probs().to_vec();
    let up = rue_update(&z, &h, &e.dist, 0, 1, &r).unwrap();
    let model_bet = (0.7f64 / m[1]).sqrt() + hellinger_sq(&e.dist, &nu).unwrap();
    let pess_bet = 1.0 + z.eps_bet() * (m[1] - 1.0);
    let unif_bet = (0.5f64 / m[1]).sqrt() + hellinger_sq(&e.dist, &Dist::uniform(2)).unwrap();
    for (got, want) in up.bets.iter().zip([model_bet, pess_bet, unif_bet]) {
        assert!((got - want).abs() < 1e-12);
    }
    assert!((up.star - 1.0).abs() < 1e-9);
}

#[test]
fn wealth_is_conserved_and_log_identity_holds() {
    let (h, r) = halfspace_class();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let truth = [d(&[0.3, 0.4, 0.3]), d(&[0.5, 0.4, 0.1]), d(&[0.1, 0.2, 0.7])];
    let z0 = build_prior(&h, 0.001, 2000).unwrap();
    let mut z = z0.clone();
    let mut log_bets = vec![0.0; z.weights().len()];
    let mut log_star = 0.0;
    for _ in 0..2000 {
        let a = rng.random_range(0..3);
        let e = rue_estimate(&z, &h, a, &r).unwrap();
        assert!(e.residual < 1e-9);
        let o = truth[a].sample_index(rng.random());
        let up = rue_update(&z, &h, &e.dist, a, o, &r).unwrap();
        for (acc, b) in log_bets.iter_mut().zip(&up.bets) {
            *acc += b.ln();
        }
        log_star += up.star.ln();
        z = up.state;
        assert!((z.weights().iter().sum::<f64>() - 1.0).abs() < 1e-6);
        assert!(*z.weights().last().unwrap() > 0.0);
    }
    for i in 0..log_bets.len() {
        let lhs = z.weights()[i].ln() - z0.weights()[i].ln();
        assert!((lhs - (log_bets[i] - log_star)).abs() < 1e-5);
    }
}

#[test]
fn fattening_keeps_the_boundary() {
    let nu = d(&[0.2, 0.5, 0.3]);
    let base = Model::new("n", vec![ImpreciseBelief::singleton(nu.clone())]).unwrap();
    let fat = fatten_model(&base, 0.2).unwrap();
    let zero = fatten_model(&base, 0.0).unwrap();
    assert!(zero.arm(0).contains(&nu) && !zero.arm(0).contains(&d(&[0.25, 0.45, 0.3])));
    // Half the squared radius is inside.
    let far = d(&[0.6, 0.2, 0.2]);
    let mut lo = 0.0;
    let mut hi = 1.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hellinger_sq(&far.mix(&nu, mid).unwrap(), &nu).unwrap() < 0.02 { lo = mid } else { hi = mid }
    }
    assert!(fat.arm(0).contains(&far.mix(&nu, lo).unwrap()));
    // A point on the boundary, found by bisection along the segment from nu to far.
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hellinger_sq(&far.mix(&nu, mid).unwrap(), &nu).unwrap() <= 0.04 { lo = mid } else { hi = mid }
    }
    let edge = far.mix(&nu, lo).unwrap();
    assert!(fat.arm(0).contains(&edge));
    assert!(!fat.arm(0).contains(&far.mix(&nu, (lo + 0.01).min(1.0)).unwrap()));
}
