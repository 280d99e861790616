use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::{rng, Level, NodeId, Scalar};

/// Promotion probability and the level safety cap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Params<S> {
    pub p: S,
    /// `None` resolves to (deterministic level of the heaviest node) + 64.
    pub max_level_cap: Option<Level>,
}

pub const DEFAULT_CAP_HEADROOM: Level = 64;

impl<S: Scalar> Params<S> {
    pub fn new(p: S) -> Result<Self> {
        let params = Self { p, max_level_cap: None };
        params.validate()?;
        Ok(params)
    }

    pub fn with_cap(mut self, cap: Level) -> Self {
        self.max_level_cap = Some(cap);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p > S::zero() && self.p < S::one()) {
            return Err(invalid("p", format!("must lie strictly between 0 and 1, got {}", self.p)));
        }
        Ok(())
    }

    pub(crate) fn resolve_cap(&self, max_det: Level) -> Level {
        self.max_level_cap.unwrap_or(max_det.saturating_add(DEFAULT_CAP_HEADROOM))
    }
}

/// Per-node weights `w(u) >= 1`, indexed by node id.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightAssignment<S>(Vec<S>);

impl<S: Scalar> WeightAssignment<S> {
    pub fn new(weights: Vec<S>) -> Result<Self> {
        if let Some(w) = weights.iter().find(|w| !(**w >= S::one()) || !w.is_finite()) {
            return Err(invalid("weight", format!("every weight must be finite and >= 1, got {w}")));
        }
        Ok(Self(weights))
    }

    pub fn unit(n: usize) -> Self {
        Self(vec![S::one(); n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, id: NodeId) -> S {
        self.0[id.index()]
    }

    pub fn as_slice(&self) -> &[S] {
        &self.0
    }
}

/// `⌊log_{1/p} w⌋`, computed exactly at integer powers of `1/p`.
pub fn det_level<S: Scalar>(weight: S, p: S) -> Result<Level> {
    if !(weight >= S::one()) || !weight.is_finite() {
        return Err(invalid("weight", format!("must be finite and >= 1, got {weight}")));
    }
    if !(p > S::zero() && p < S::one()) {
        return Err(invalid("p", format!("must lie strictly between 0 and 1, got {p}")));
    }
    let base = S::one() / p;
    let mut k = (weight.ln() / base.ln()).floor().to_i64().unwrap_or(0).max(0);
    // Correct the floating estimate against repeated multiplication.
    while k > 0 && base.powi(k as i32) > weight {
        k -= 1;
    }
    while base.powi(k as i32 + 1) <= weight {
        k += 1;
    }
    Ok(k as Level)
}

/// Number of probabilistic promotions: Geometric(1 - p) on {0, 1, ...}.
pub fn draw_promotion<S: Scalar, R: Rng + ?Sized>(p: S, base: Level, cap: Level, rng: &mut R) -> Result<Level> {
    let p = p.as_f64();
    let mut promo: Level = 0;
    while rng.random::<f64>() < p {
        promo += 1;
        if base + promo > cap {
            return Err(Error::LevelOverflow { cap });
        }
    }
    Ok(promo)
}

/// Draws `lev_p(u)` for one node of weight `weight`.
pub fn assign_level<S: Scalar, R: Rng + ?Sized>(weight: S, params: &Params<S>, rng: &mut R) -> Result<Level> {
    params.validate()?;
    let det = det_level(weight, params.p)?;
    let cap = params.resolve_cap(det);
    if det > cap {
        return Err(Error::LevelOverflow { cap });
    }
    Ok(det + draw_promotion(params.p, det, cap, rng)?)
}

/// Deterministic and probabilistic parts of every node's level.
///
/// The two parts are kept apart because a battery change only moves the
/// deterministic part.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LevelAssignment {
    det: Vec<Level>,
    promotion: Vec<Level>,
}

impl LevelAssignment {
    pub fn from_parts(det: Vec<Level>, promotion: Vec<Level>) -> Result<Self> {
        if det.len() != promotion.len() {
            return Err(invalid("levels", "deterministic and probabilistic parts differ in length"));
        }
        Ok(Self { det, promotion })
    }

    /// Levels given outright, treated as purely probabilistic promotions.
    pub fn forced(levels: Vec<Level>) -> Self {
        Self { det: vec![0; levels.len()], promotion: levels }
    }

    /// Draws levels for every node in id order from the `levels` stream.
    pub fn draw<S: Scalar>(weights: &WeightAssignment<S>, params: &Params<S>, seed: u64) -> Result<Self> {
        params.validate()?;
        let det = weights.as_slice().iter().map(|w| det_level(*w, params.p)).collect::<Result<Vec<_>>>()?;
        let cap = params.resolve_cap(det.iter().copied().max().unwrap_or(0));
        let mut rng = rng::stream(seed, "levels");
        let promotion =
            det.iter()
                .map(|&d| {
                    if d > cap {
                        Err(Error::LevelOverflow { cap })
                    } else {
                        draw_promotion(params.p, d, cap, &mut rng)
                    }
                })
                .collect::<Result<Vec<_>>>()?;
        Ok(Self { det, promotion })
    }

    pub fn len(&self) -> usize {
        self.det.len()
    }

    pub fn is_empty(&self) -> bool {
        self.det.is_empty()
    }

    pub fn level(&self, id: NodeId) -> Level {
        self.det[id.index()] + self.promotion[id.index()]
    }

    pub fn det_level(&self, id: NodeId) -> Level {
        self.det[id.index()]
    }

    pub fn promotion(&self, id: NodeId) -> Level {
        self.promotion[id.index()]
    }

    pub fn levels(&self) -> Vec<Level> {
        self.det.iter().zip(&self.promotion).map(|(d, q)| d + q).collect()
    }
}
