use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use robustdec::dec::*;
use robustdec::prob::{Dist, ImpreciseBelief};

fn random_arm(rng: &mut ChaCha8Rng, n: usize) -> ImpreciseBelief {
    match rng.random_range(0..3) {
        0 => ImpreciseBelief::singleton(ImpreciseBelief::full_simplex(n).unwrap().sample_member(rng).unwrap()),
        1 => {
            let g: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            let (lo, hi) = g.iter().fold((1.0f64, 0.0f64), |(l, h), x| (l.min(*x), h.max(*x)));
            let c = lo + rng.random::<f64>() * (hi - lo);
            ImpreciseBelief::halfspace(g, c).unwrap()
        }
        _ => {
            let k = rng.random_range(1..=3);
            let full = ImpreciseBelief::full_simplex(n).unwrap();
            ImpreciseBelief::vertex_set((0..k).map(|_| full.sample_member(rng).unwrap()).collect()).unwrap()
        }
    }
}

fn random_instance(seed: u64) -> (ModelClass, Belief, RewardFn) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let na = rng.random_range(2..=3);
    let no = rng.random_range(2..=3);
    let nm = rng.random_range(1..=3);
    let r = RewardFn::new((0..na).map(|_| (0..no).map(|_| rng.random::<f64>()).collect()).collect()).unwrap();
    let models = (0..nm).map(|i| Model::new(format!("m{i}"), (0..na).map(|_| random_arm(&mut rng, no)).collect()).unwrap()).collect();
    let full = ImpreciseBelief::full_simplex(no).unwrap();
    let mbar = Belief::Precise((0..na).map(|_| full.sample_member(&mut rng).unwrap()).collect());
    (ModelClass::new(models).unwrap(), mbar, r)
}

/// All points of the action simplex on a grid with `steps` subdivisions.
fn simplex_grid(na: usize, steps: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    if na == 2 {
        for i in 0..=steps {
            out.push(vec![i as f64 / steps as f64, 1.0 - i as f64 / steps as f64]);
        }
    } else {
        for i in 0..=steps {
            for j in 0..=(steps - i) {
                let (a, b) = (i as f64 / steps as f64, j as f64 / steps as f64);
                out.push(vec![a, b, (1.0 - a - b).max(0.0)]);
            }
        }
    }
    out
}

#[test]
fn offset_dec_matches_grid_search() {
    for seed in 0..200 {
        let (h, mbar, r) = random_instance(seed);
        let table = DecTable::build(&h, &mbar, &LossFn::HellingerSq, &r).unwrap();
        let gamma = [0.0, 0.5, 3.0, 20.0][seed as usize % 4];
        let (v, p) = offset_dec_table(&table, gamma).unwrap();
        let steps = 1000;
        let grid = simplex_grid(table.n_actions(), steps).iter().map(|p| table.offset_objective(p, gamma)).fold(f64::INFINITY, f64::min);
        assert!(v <= grid + 1e-9 && grid - v < 2e-3, "seed {seed}: lp {v} grid {grid}");
        assert!((table.offset_objective(p.probs(), gamma) - v).abs() < 1e-9);
    }
}

#[test]
fn fuzzy_dec_matches_constrained_saddle() {
    for seed in 0..100 {
        let (h, mbar, r) = random_instance(1000 + seed);
        let table = DecTable::build(&h, &mbar, &LossFn::HellingerSq, &r).unwrap();
        let eps = [0.05, 0.1, 0.3][seed as usize % 3];
        let fz = fuzzy_dec_table(&table, eps, GammaBracket::default()).unwrap();
        let steps = if table.n_actions() == 2 { 1000 } else { 200 };
        let grid = simplex_grid(table.n_actions(), steps).iter().map(|p| fuzzy_objective(&table, p, eps)).fold(f64::INFINITY, f64::min);
        assert!((fz.value - grid).abs() < 5e-3, "seed {seed}: scan {} grid {grid}", fz.value);
        // The offset minimizer at the best gamma attains the constrained value.
        assert!(fuzzy_objective(&table, fz.p.probs(), eps) <= fz.value + 1e-6, "seed {seed}");
    }
}

#[test]
fn fuzzy_dec_is_monotone() {
    for seed in 0..40 {
        let (h, mbar, r) = random_instance(2000 + seed);
        let table = DecTable::build(&h, &mbar, &LossFn::HellingerSq, &r).unwrap();
        let mut prev = 0.0;
        for eps in [0.0, 0.02, 0.05, 0.1, 0.2, 0.4, 0.8] {
            let v = fuzzy_dec_table(&table, eps, GammaBracket::default()).unwrap().value;
            assert!(v >= prev - 1e-6, "seed {seed}");
            prev = v;
        }
        // Enlarging the class never lowers the value.
        let sub = DecTable::new(table.maxf[..1].to_vec(), table.fbar.clone(), table.loss[..1].to_vec()).unwrap();
        for eps in [0.05, 0.2] {
            let small = fuzzy_dec_table(&sub, eps, GammaBracket::default()).unwrap().value;
            let big = fuzzy_dec_table(&table, eps, GammaBracket::default()).unwrap().value;
            assert!(small <= big + 1e-6);
        }
        let mut prev = f64::INFINITY;
        for gamma in [0.0, 0.1, 1.0, 10.0, 100.0] {
            let v = offset_dec_table(&table, gamma).unwrap().0;
            assert!(v <= prev + 1e-9);
            prev = v;
        }
    }
}

#[test]
fn reducing_an_imprecise_belief_never_lowers_the_dec() {
    for seed in 0..30 {
        let (h, _, r) = random_instance(3000 + seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let arms: Vec<ImpreciseBelief> = (0..r.n_actions()).map(|_| random_arm(&mut rng, r.n_outcomes())).collect();
        let reduced = reduce_belief(&arms, &r).unwrap();
        for (a, d) in reduced.iter().enumerate() {
            assert!(arms[a].contains(d));
        }
        for eps in [0.05, 0.2] {
            let imprecise = fuzzy_dec(&h, &Belief::Imprecise(arms.clone()), eps, &LossFn::HellingerSq, &r).unwrap().value;
            let precise = fuzzy_dec(&h, &Belief::Precise(reduced.clone()), eps, &LossFn::HellingerSq, &r).unwrap().value;
            assert!(imprecise <= precise + 1e-6, "seed {seed}: {imprecise} > {precise}");
        }
    }
}

#[test]
fn model_values_on_simple_arms() {
    let r = RewardFn::new(vec![vec![0.0, 0.5, 1.0], vec![0.2, 0.9, 0.4]]).unwrap();
    let m = Model::new("m", vec![ImpreciseBelief::halfspace(r.row(0).to_vec(), 0.7).unwrap(), ImpreciseBelief::full_simplex(3).unwrap()]).unwrap();
    let v = model_values(&m, &r).unwrap();
    assert!((v.f[0] - 0.7).abs() < 1e-12 && (v.f[1] - 0.2).abs() < 1e-12);
    assert_eq!(v.argmax, 0);
    let red = reduce_belief(m.arms(), &r).unwrap();
    assert_eq!(red[1], Dist::point(3, 0));
    assert!((red[0].expect(r.row(0)).unwrap() - 0.7).abs() < 1e-12);
}

#[test]
fn dec_edge_cases() {
    let r = RewardFn::new(vec![vec![0.0, 1.0], vec![0.3, 0.6]]).unwrap();
    let nu = [Dist::new(vec![0.4, 0.6]).unwrap(), Dist::new(vec![0.5, 0.5]).unwrap()];
    let m = Model::new("m", nu.iter().cloned().map(ImpreciseBelief::singleton).collect()).unwrap();
    let h = ModelClass::new(vec![m]).unwrap();
    let mbar = Belief::Precise(nu.to_vec());
    let (v, p) = offset_dec(&h, &mbar, 1.0, &LossFn::HellingerSq, &r).unwrap();
    assert!(v.abs() < 1e-12 && p == Dist::point(2, 0));

    let (h, mbar, r) = random_instance(77);
    let table = DecTable::build(&h, &mbar, &LossFn::HellingerSq, &r).unwrap();
    let best_bar = table.fbar.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let best_m = table.maxf.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    assert!((offset_dec_table(&table, 0.0).unwrap().0 - (best_m - best_bar)).abs() < 1e-12);
    let max_loss = table.loss.iter().flatten().cloned().fold(0.0, f64::max);
    let fz = fuzzy_dec_table(&table, max_loss.sqrt() + 1e-9, GammaBracket::default()).unwrap();
    assert!((fz.value - (best_m - best_bar).max(0.0)).abs() < 1e-9 && fz.gamma_star == 0.0);
    let positive = DecTable::new(table.maxf.clone(), table.fbar.clone(), table.loss.iter().map(|r| r.iter().map(|x| x + 0.1).collect()).collect()).unwrap();
    assert!(fuzzy_dec_table(&positive, 0.0, GammaBracket::default()).unwrap().value.abs() < 1e-9);
}

