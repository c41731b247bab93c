mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use robustdec::envs::Environment;
use robustdec::prob::{hellinger_sq, Dist};
use robustdec::rmdp::*;
use robustdec::rmdp_estimator::*;

fn dims222() -> Dims {
    Dims::new(2, 2, 2).unwrap()
}

#[test]
fn bettor_counts_match_closed_forms() {
    assert_eq!(mid_count(1, 1.0, 1.0), 4);
    assert_eq!(mid_count(2, 0.5, 0.5), 27);
    assert_eq!(mid_count(2, 0.1, 0.25), 11 * 11 * 5);
    let (index, state) = BettorIndex::build(dims222(), 0.5, 0.5, 0.001, 100).unwrap();
    assert_eq!(index.counts(), (147, 120, 9));
    assert_eq!(index.hypothesis_counts(), (27, 3));
    assert_eq!(index.bettors().len(), 147 + 120 + 9 + 1);
    assert!((state.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert!((state.weights[index.pessimism()] - 0.499).abs() < 1e-12);
    assert!((state.eps_pess - (1.0f64 / 900.0).sqrt()).abs() < 1e-15);
    // S = 1, unit grids: f in {1, 0}, c in {0, 1}.
    let (small, _) = BettorIndex::build(Dims::new(1, 1, 1).unwrap(), 1.0, 1.0, 0.01, 10).unwrap();
    assert_eq!(small.hypothesis_counts().0, 4);
    let fs: Vec<(Vec<f64>, f64)> = (0..4).map(|i| (small.hypothesis(i).f.clone(), small.hypothesis(i).c)).collect();
    assert_eq!(fs, vec![(vec![1.0], 0.0), (vec![1.0], 1.0), (vec![0.0], 0.0), (vec![0.0], 1.0)]);
    assert!(BettorIndex::build(dims222(), 0.5, 0.5, 0.02, 10).is_err());
    assert!(matches!(
        BettorIndex::build(Dims::new(3, 6, 2).unwrap(), 0.05, 0.05, 0.001, 10),
        Err(robustdec::error::Error::Capacity(_))
    ));
}

fn only_uniform(index: &BettorIndex, state: &RmdpMarketState) -> RmdpMarketState {
    let mut s = state.clone();
    let n = index.counts().2 as f64;
    for (w, b) in s.weights.iter_mut().zip(index.bettors()) {
        *w = if b.kind == BettorKind::Uniform { 1.0 / n } else { 0.0 };
    }
    s
}

#[test]
fn uniform_market_induces_uniform_cells() {
    let (index, state) = BettorIndex::build(dims222(), 0.5, 0.5, 0.001, 100).unwrap();
    let st = only_uniform(&index, &state);
    let pi = Policy::deterministic(dims222(), &[0, 1, 1, 0]).unwrap();
    let m = induce_mdp(&index, &st, &pi).unwrap();
    for c in &m.sel.cells {
        assert!(hellinger_sq(c, &Dist::uniform(c.len())).unwrap() < 1e-12);
    }
    let mut none = st.clone();
    none.weights.iter_mut().zip(index.bettors()).for_each(|(w, b)| {
        if b.kind == BettorKind::Uniform {
            *w = 0.0
        }
    });
    assert!(induce_mdp(&index, &none, &pi).is_err());
}

#[test]
fn terminal_cells_ignore_deeper_policy_rows() {
    let (index, state) = BettorIndex::build(dims222(), 0.5, 0.5, 0.001, 100).unwrap();
    let a = induce_mdp(&index, &state, &Policy::deterministic(dims222(), &[0, 0, 0, 0]).unwrap()).unwrap();
    let b = induce_mdp(&index, &state, &Policy::deterministic(dims222(), &[1, 1, 1, 1]).unwrap()).unwrap();
    let d = dims222();
    for s in 0..2 {
        for act in 0..2 {
            assert_eq!(a.sel.cell(2, s, act).len(), 2);
            assert_eq!(a.sel.cell(2, s, act), b.sel.cell(2, s, act));
        }
    }
    assert!(a.sel.cells.iter().all(|c| c.min_prob() > 0.0));
    assert!(d.n_cells() == a.sel.cells.len());
}

#[test]
fn induced_cell_matches_grid_oracle() {
    // S = 2, H = 1: the initial cell lives on a 4-point simplex. Weight on the
    // initial uniform bettor and one fragment only.
    let dims = Dims::new(1, 2, 1).unwrap();
    let (index, state) = BettorIndex::build(dims, 0.5, 0.5, 0.001, 100).unwrap();
    let frag = index
        .bettors()
        .iter()
        .position(|b| b.kind == BettorKind::Fragment && b.h == 0 && {
            let h = index.hypothesis(b.hyp);
            h.f == vec![0.5, 0.0] && (h.c - 1.0).abs() < 1e-12
        })
        .unwrap();
    let mut st = state.clone();
    for (i, (w, b)) in st.weights.iter_mut().zip(index.bettors()).enumerate() {
        *w = match b.kind {
            BettorKind::Uniform if b.h == 0 => 0.3,
            BettorKind::Uniform => 0.05,
            _ if i == frag => 0.6,
            _ => 0.0,
        };
    }
    let pi = Policy::deterministic(dims, &[0, 0]).unwrap();
    let m = induce_mdp(&index, &st, &pi).unwrap();
    let psi = &index.hypothesis(index.bettors()[frag].hyp).belief;
    let objective = |mu: &Dist| {
        0.3 * 2.0 * hellinger_sq(mu, &Dist::uniform(4)).unwrap() + 0.6 * 2.0 * robustdec::prob::hellinger_project(mu, psi).unwrap().dist_sq
    };
    let got = objective(&m.sel.cells[0]);
    let n = 60;
    let mut best = (f64::INFINITY, Dist::uniform(4));
    for i in 0..=n {
        for j in 0..=n - i {
            for k in 0..=n - i - j {
                let l = n - i - j - k;
                let mu = Dist::from_weights(&[i as f64, j as f64, k as f64, l as f64]).unwrap();
                let v = objective(&mu);
                if v < best.0 {
                    best = (v, mu);
                }
            }
        }
    }
    assert!(got <= best.0 + 1e-9);
    assert!(best.0 - got <= 2e-3, "grid {} vs solver {got}", best.0);
    let gap: f64 = best.1.probs().iter().zip(m.sel.cells[0].probs()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(gap < 0.05, "minimizers differ by {gap}");
}

fn true_kernel(dims: Dims, rng: &mut ChaCha8Rng) -> RmdpKernel {
    common::random_certified_kernel(rng, dims)
}

#[test]
fn market_invariants_hold_over_episodes() {
    let dims = dims222();
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let kernel = true_kernel(dims, &mut rng);
    let policies = Policy::enumerate_deterministic(dims);
    let mut env = RmdpEnv::new(kernel, RmdpEnvMode::RandomVertex, policies.clone()).unwrap();
    let (index, mut state) = BettorIndex::build(dims, 0.5, 0.5, 0.001, 150).unwrap();
    let mut stars = Vec::new();
    for t in 0..150 {
        let k = rng.random_range(0..policies.len());
        let pi = &policies[k];
        env.realize(t, None, &mut rng).unwrap();
        let tr = env.respond(k, &mut rng).unwrap().obs;
        let m = induce_mdp(&index, &state, pi).unwrap();
        assert!(m.sel.cells.iter().all(|c| c.min_prob() > 0.0));
        check_coherence(&m.traj_dist(pi).unwrap(), pi, 1e-9).unwrap();
        let up = market_update(&index, &state, &m, pi, &tr).unwrap();
        assert!(up.bets.iter().all(|b| *b >= 0.0));
        let closed = pessimism_bet_closed_form(&m, &tr, state.eps_pess);
        assert!((up.bets[index.pessimism()] - closed).abs() < 1e-9);
        for (i, b) in index.bettors().iter().enumerate() {
            match b.kind {
                BettorKind::Calibration => {
                    assert!((0.75..=1.25).contains(&up.bets[i]));
                    let c = calibration_bet_closed_form(&index, &m, pi, &tr, i).unwrap();
                    assert!((c - up.bets[i]).abs() < 1e-9, "{c} vs {}", up.bets[i]);
                }
                BettorKind::Fragment | BettorKind::Uniform if b.h > 0 && tr.state_action(b.h) != (b.s, b.a) => {
                    assert_eq!(up.bets[i], 1.0);
                }
                _ => {}
            }
        }
        assert!((up.state.weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(index.bettors().iter().zip(&up.state.weights).filter(|(b, _)| b.kind == BettorKind::Uniform).all(|(_, w)| *w > 0.0));
        stars.push(up.star);
        state = up.state;
    }
    let n = stars.len() as f64;
    let mean = stars.iter().sum::<f64>() / n;
    let sd = (stars.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    assert!((mean - 1.0).abs() <= 3.0 * sd / n.sqrt() + 1e-12, "mean star {mean}, sd {sd}");
}

#[test]
fn expected_star_is_one() {
    // Exact expectation over trajectories for a single update.
    let dims = Dims::new(1, 2, 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(37);
    let kernel = true_kernel(dims, &mut rng);
    let sel = common::random_selection(&mut rng, &kernel);
    let (index, mut state) = BettorIndex::build(dims, 0.5, 0.5, 0.001, 50).unwrap();
    let pi = Policy::new(dims, vec![Dist::new(vec![0.3, 0.7]).unwrap(), Dist::new(vec![0.9, 0.1]).unwrap()]).unwrap();
    for round in 0..5 {
        let m = induce_mdp(&index, &state, &pi).unwrap();
        let td = traj_dist(&sel, &pi).unwrap();
        let mut expected = 0.0;
        for (k, p) in td.probs.iter().enumerate() {
            if *p > 0.0 {
                let tr = Trajectory::from_index(dims, k);
                expected += p * market_update(&index, &state, &m, &pi, &tr).unwrap().star;
            }
        }
        assert!((expected - 1.0).abs() < 1e-7, "round {round}: E[star] = {expected}");
        let tr = rollout(&sel, &pi, &mut rng).unwrap();
        state = market_update(&index, &state, &m, &pi, &tr).unwrap().state;
    }
}
