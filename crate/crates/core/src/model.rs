//! Ground-truth regression models `Y = f*(X) + ε` and the model registry.

use std::collections::BTreeMap;

use rand::Rng;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::hypothesis::{Hypothesis, SpaceKind};
use crate::noise::{Input, NoiseFamily};

/// One interval of the input marginal, carrying `mass` spread uniformly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Piece {
    pub lo: f64,
    pub hi: f64,
    pub mass: f64,
}

impl Piece {
    pub fn density(&self) -> f64 {
        self.mass / (self.hi - self.lo)
    }
}

/// Marginal law of `X`: piecewise uniform on disjoint intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct Marginal {
    pieces: Vec<Piece>,
}

impl Marginal {
    pub fn new(pieces: Vec<Piece>) -> Result<Self> {
        if pieces.is_empty() {
            return Err(Error::InvalidModel("marginal needs at least one interval".into()));
        }
        for p in &pieces {
            if !(p.lo.is_finite() && p.hi.is_finite() && p.hi > p.lo && p.mass > 0.0) {
                return Err(Error::InvalidModel(format!("malformed marginal piece {p:?}")));
            }
        }
        if pieces.windows(2).any(|w| w[1].lo < w[0].hi) {
            return Err(Error::InvalidModel("marginal intervals must be sorted and disjoint".into()));
        }
        let total: f64 = pieces.iter().map(|p| p.mass).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidModel(format!("marginal masses sum to {total}, not 1")));
        }
        Ok(Marginal { pieces })
    }

    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        Marginal::new(vec![Piece { lo, hi, mass: 1.0 }])
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn density(&self, x: Input) -> f64 {
        self.pieces
            .iter()
            .find(|p| x >= p.lo && x <= p.hi)
            .map_or(0.0, Piece::density)
    }

    pub fn contains(&self, x: Input) -> bool {
        self.pieces.iter().any(|p| x >= p.lo && x <= p.hi)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Input {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let last = self.pieces.len() - 1;
        for (i, p) in self.pieces.iter().enumerate() {
            acc += p.mass;
            if u < acc || i == last {
                let v: f64 = rng.random();
                return p.lo + v * (p.hi - p.lo);
            }
        }
        unreachable!("marginal has at least one piece")
    }
}

/// A fully specified data-generating model.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionModel {
    pub id: String,
    pub f_star: Hypothesis,
    pub marginal: Marginal,
    pub noise: NoiseFamily,
    /// `M`: the common bound on `f*` and the hypothesis space.
    pub bound: f64,
    /// Default hypothesis space for experiments on this model.
    pub space: SpaceKind,
}

impl RegressionModel {
    pub fn validate(&self) -> Result<()> {
        self.noise.validate()?;
        if self.f_star.space.sup_bound(&self.f_star.theta) > self.bound * (1.0 + 1e-12) {
            return Err(Error::InvalidModel("f* exceeds the model bound".into()));
        }
        Ok(())
    }

    pub fn is_homoskedastic(&self) -> bool {
        self.noise.is_homoskedastic()
    }

    /// Draw `n` observations.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Dataset> {
        let (x, y) = self.sample_pairs(n, rng);
        Dataset::new(x, y)
    }

    /// Like [`sample`](Self::sample) but allows `n = 0`.
    pub fn sample_pairs<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> (Vec<f64>, Vec<f64>) {
        let mut xs = Vec::with_capacity(n);
        let mut ys = Vec::with_capacity(n);
        for _ in 0..n {
            let x = self.marginal.sample(rng);
            let e = self.noise.sample(x, rng);
            xs.push(x);
            ys.push(self.f_star.eval(x) + e);
        }
        (xs, ys)
    }

    /// Hypothesis in the model's default space.
    pub fn hypothesis(&self, theta: Vec<f64>) -> Result<Hypothesis> {
        Hypothesis::new(self.space.clone(), theta, self.bound)
    }
}

/// Identifiers accepted by [`model_by_id`].
pub const MODEL_IDS: &[&str] = &[
    "counterexample",
    "gaussian",
    "laplace",
    "uniform",
    "split_uniform",
    "cauchy",
    "stable",
    "linnik",
];

/// Build a registered model. Unused parameters are rejected.
///
/// * `counterexample`: inputs uniform on `[0, 1/2] ∪ [1, 3/2]`, `f* = 0`,
///   noise [`NoiseFamily::TwoInterval`], space `piecewise_constant(0.75)`.
/// * every other id: inputs uniform on `[0, 1]`, `f*` equal to `-1/4` left
///   of `1/2` and `1/4` right of it, homoskedastic noise of the named family,
///   space `piecewise_constant(0.5)`.
///
/// All models accept `bound` (default 1). Noise parameters: `sigma`
/// (gaussian), `scale` (laplace), `half_width` (uniform), `gamma` (cauchy,
/// stable), `alpha` (stable, linnik), `lambda` (linnik).
pub fn model_by_id(id: &str, params: &BTreeMap<String, f64>) -> Result<RegressionModel> {
    let mut used: Vec<&str> = vec!["bound"];
    let mut get = |name: &'static str, default: f64| {
        used.push(name);
        params.get(name).copied().unwrap_or(default)
    };
    let bound = get("bound", 1.0);
    let model = if id == "counterexample" {
        let marginal = Marginal::new(vec![
            Piece { lo: 0.0, hi: 0.5, mass: 0.5 },
            Piece { lo: 1.0, hi: 1.5, mass: 0.5 },
        ])?;
        let space = SpaceKind::piecewise_constant(&[0.75]);
        RegressionModel {
            id: id.to_string(),
            f_star: Hypothesis::new(space.clone(), vec![0.0, 0.0], bound)?,
            marginal,
            noise: NoiseFamily::TwoInterval,
            bound,
            space,
        }
    } else {
        let noise = match id {
            "gaussian" => NoiseFamily::Gaussian { sigma: get("sigma", 1.0) },
            "laplace" => NoiseFamily::Laplace { scale: get("scale", 1.0) },
            "uniform" => NoiseFamily::Uniform { half_width: get("half_width", 0.5) },
            "split_uniform" => NoiseFamily::SplitUniform,
            "cauchy" => NoiseFamily::Cauchy { gamma: get("gamma", 1.0) },
            "stable" => NoiseFamily::Stable {
                gamma: get("gamma", 1.0),
                alpha: get("alpha", 1.5),
            },
            "linnik" => NoiseFamily::Linnik {
                lambda: get("lambda", 1.0),
                alpha: get("alpha", 1.5),
            },
            _ => return Err(Error::UnknownModel(id.to_string())),
        };
        let space = SpaceKind::piecewise_constant(&[0.5]);
        RegressionModel {
            id: id.to_string(),
            f_star: Hypothesis::new(space.clone(), vec![-0.25, 0.25], bound)
                .map_err(|e| Error::InvalidModel(e.to_string()))?,
            marginal: Marginal::uniform(0.0, 1.0)?,
            noise,
            bound,
            space,
        }
    };
    if let Some(extra) = params.keys().find(|k| !used.contains(&k.as_str())) {
        return Err(Error::field(
            &format!("param.{extra}"),
            format!("model `{id}` has no parameter `{extra}`"),
        ));
    }
    model.validate()?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn registry_builds_every_model() {
        for id in MODEL_IDS {
            let m = model_by_id(id, &BTreeMap::new()).unwrap();
            let total: f64 = m.marginal.pieces().iter().map(|p| p.mass).sum();
            assert!((total - 1.0).abs() < 1e-15);
            for k in 0..=150 {
                assert!(m.f_star.eval(k as f64 / 100.0).abs() <= m.bound);
            }
        }
        assert!(matches!(
            model_by_id("nope", &BTreeMap::new()),
            Err(Error::UnknownModel(_))
        ));
        let mut p = BTreeMap::new();
        p.insert("sigma".to_string(), 2.0);
        assert!(model_by_id("laplace", &p).is_err());
        assert_eq!(
            model_by_id("gaussian", &p).unwrap().noise,
            NoiseFamily::Gaussian { sigma: 2.0 }
        );
    }

    #[test]
    fn counterexample_inputs_land_in_both_intervals() {
        let m = model_by_id("counterexample", &BTreeMap::new()).unwrap();
        let mut rng = stream(0, 0, 0);
        let d = m.sample(2000, &mut rng).unwrap();
        assert!(d.x().iter().all(|&x| (0.0..=0.5).contains(&x) || (1.0..=1.5).contains(&x)));
        let left = d.x().iter().filter(|&&x| x < 0.75).count();
        assert!((left as f64 - 1000.0).abs() < 4.0 * 22.4);
    }
}
