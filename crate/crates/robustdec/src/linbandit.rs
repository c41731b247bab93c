//! Robust linear bandits: models from points of a bilinear family and grid covers.

use crate::dec::{Model, ModelClass};
use crate::error::{check_dim, Error, Result};
use crate::estimators::fatten_model;
use crate::prob::ImpreciseBelief;
use serde::{Deserialize, Serialize};

/// `F(a, z, mu)_w = sum_o (offset[a][w][o] + sum_j coeff[a][w][j][o] z_j) mu(o)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BilinearSpec {
    pub n_actions: usize,
    pub n_outcomes: usize,
    pub z_dim: usize,
    pub w_dim: usize,
    /// Shape `[action][w][j][outcome]`.
    pub coeff: Vec<Vec<Vec<Vec<f64>>>>,
    /// Shape `[action][w][outcome]`; zero when omitted.
    #[serde(default)]
    pub offset: Vec<Vec<Vec<f64>>>,
}

impl BilinearSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_actions == 0 || self.n_outcomes == 0 || self.z_dim == 0 || self.w_dim == 0 {
            return Err(Error::InvalidParameter("bilinear dimensions must be positive".into()));
        }
        check_dim(self.n_actions, self.coeff.len())?;
        for per_a in &self.coeff {
            check_dim(self.w_dim, per_a.len())?;
            for per_w in per_a {
                check_dim(self.z_dim, per_w.len())?;
                for row in per_w {
                    check_dim(self.n_outcomes, row.len())?;
                    if row.iter().any(|x| !x.is_finite()) {
                        return Err(Error::InvalidParameter("coefficients must be finite".into()));
                    }
                }
            }
        }
        if !self.offset.is_empty() {
            check_dim(self.n_actions, self.offset.len())?;
            for per_a in &self.offset {
                check_dim(self.w_dim, per_a.len())?;
                for row in per_a {
                    check_dim(self.n_outcomes, row.len())?;
                }
            }
        }
        Ok(())
    }

    /// The linear functional `mu -> F(a, z, mu)_w`.
    pub fn row(&self, a: usize, w: usize, z: &[f64]) -> Vec<f64> {
        (0..self.n_outcomes)
            .map(|o| {
                let base = self.offset.get(a).map_or(0.0, |x| x[w][o]);
                base + (0..self.z_dim).map(|j| self.coeff[a][w][j][o] * z[j]).sum::<f64>()
            })
            .collect()
    }
}

pub fn point_label(z: &[f64]) -> String {
    let parts: Vec<String> = z.iter().map(|x| format!("{x}")).collect();
    format!("z=({})", parts.join(","))
}

/// `model(a) = {mu : F(a, z, mu) = 0}`, each equality encoded as a pair of inequalities.
pub fn model_from_point(spec: &BilinearSpec, z: &[f64]) -> Result<Model> {
    spec.validate()?;
    check_dim(spec.z_dim, z.len())?;
    let mut arms = Vec::with_capacity(spec.n_actions);
    for a in 0..spec.n_actions {
        let mut rows = Vec::with_capacity(2 * spec.w_dim);
        for w in 0..spec.w_dim {
            let c = spec.row(a, w, z);
            rows.push((c.iter().map(|x| -x).collect(), 0.0));
            rows.push((c, 0.0));
        }
        let arm = ImpreciseBelief::linear_constraints(spec.n_outcomes, rows).map_err(|e| match e {
            Error::EmptyBelief(_) => Error::InfeasiblePoint(format!("{} leaves action {a} with no consistent distribution", point_label(z))),
            other => other,
        })?;
        arms.push(arm);
    }
    Model::new(point_label(z), arms)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HypothesisBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl HypothesisBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        check_dim(lo.len(), hi.len())?;
        if lo.is_empty() || lo.iter().zip(&hi).any(|(l, h)| !(-1.0 <= *l && l <= h && *h <= 1.0)) {
            return Err(Error::InvalidParameter("box bounds must satisfy -1 <= lo <= hi <= 1".into()));
        }
        Ok(Self { lo, hi })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }
}

/// Cell-centred grid with spacing at most `2 eps / sqrt(Z)`; every box point
/// lies within L2 distance `eps` of a grid point.
pub fn grid_cover(b: &HypothesisBox, eps: f64) -> Result<Vec<Vec<f64>>> {
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter("cover radius must be positive".into()));
    }
    let z = b.dim();
    let spacing = 2.0 * eps / (z as f64).sqrt();
    let axes: Vec<Vec<f64>> = (0..z)
        .map(|j| {
            let len = b.hi[j] - b.lo[j];
            let k = ((len / spacing) - 1e-12).ceil().max(1.0) as usize;
            (0..k).map(|i| b.lo[j] + (i as f64 + 0.5) * len / k as f64).collect()
        })
        .collect();
    let mut points = vec![Vec::new()];
    for axis in &axes {
        points = points.into_iter().flat_map(|p| axis.iter().map(move |x| [p.clone(), vec![*x]].concat())).collect();
    }
    Ok(points)
}

/// The cover models, each fattened by the Hellinger radius `hellinger_eps`.
/// Points whose model would be empty are skipped and reported.
pub fn cover_class(spec: &BilinearSpec, points: &[Vec<f64>], hellinger_eps: f64) -> Result<(ModelClass, Vec<String>)> {
    let mut models = Vec::new();
    let mut skipped = Vec::new();
    for z in points {
        match model_from_point(spec, z) {
            Ok(m) => models.push(fatten_model(&m, hellinger_eps)?),
            Err(Error::InfeasiblePoint(msg)) => skipped.push(msg),
            Err(e) => return Err(e),
        }
    }
    Ok((ModelClass::new(models)?, skipped))
}
