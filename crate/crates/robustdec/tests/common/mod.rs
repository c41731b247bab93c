#![allow(dead_code)]

use rand::Rng;
use robustdec::prob::{Dist, ImpreciseBelief};
use robustdec::rmdp::{Dims, RmdpKernel};

/// A distribution over a cell whose reward-1 mass is at most `cap`.
pub fn capped_dist<R: Rng>(rng: &mut R, dims: Dims, h: usize, cap: f64) -> Dist {
    let n = dims.cell_dim(h);
    let half = n / 2;
    let mut w: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 0.02).collect();
    let zero: f64 = w[..half].iter().sum();
    let one: f64 = w[half..].iter().sum();
    let target = cap * rng.random::<f64>();
    for x in &mut w[..half] {
        *x *= (1.0 - target) / zero;
    }
    for x in &mut w[half..] {
        *x *= target / one;
    }
    Dist::new(w).unwrap()
}

/// Random kernel whose every cell keeps expected total reward at most 1 under its worst case:
/// a mix of capped vertex sets, capped singletons, halfspaces with `c <= 1`, and full simplices.
pub fn random_certified_kernel<R: Rng>(rng: &mut R, dims: Dims) -> RmdpKernel {
    let cap = 1.0 / (dims.horizon as f64 + 1.0);
    let cells = (0..dims.n_cells())
        .map(|i| {
            let (h, _, _) = dims.cell_coords(i);
            let n = dims.cell_dim(h);
            match rng.random_range(0..4) {
                0 => ImpreciseBelief::singleton(capped_dist(rng, dims, h, cap)),
                1 => {
                    let k = rng.random_range(2..=3);
                    ImpreciseBelief::vertex_set((0..k).map(|_| capped_dist(rng, dims, h, cap)).collect()).unwrap()
                }
                2 => {
                    let f: Vec<f64> = (0..dims.states).map(|_| rng.random::<f64>()).collect();
                    let g = dims.reward_plus(h, &f);
                    ImpreciseBelief::halfspace(g, rng.random::<f64>() * cap).unwrap()
                }
                _ => ImpreciseBelief::full_simplex(n).unwrap(),
            }
        })
        .collect();
    RmdpKernel::new(dims, cells).unwrap()
}

/// Picks a member of every cell.
pub fn random_selection<R: Rng>(rng: &mut R, kernel: &RmdpKernel) -> robustdec::rmdp::CellSelection {
    let cells = kernel.cells().iter().map(|c| c.sample_member(rng).unwrap()).collect();
    robustdec::rmdp::CellSelection::new(kernel.dims(), cells).unwrap()
}
