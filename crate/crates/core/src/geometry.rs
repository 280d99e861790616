//! Planar point sets and the two distance metrics (bounded square, flat torus).

use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{invalid, Result};
use crate::rng;
use crate::{NodeId, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RegionKind {
    Square,
    Torus,
}

impl RegionKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RegionKind::Square => "square",
            RegionKind::Torus => "torus",
        }
    }
}

impl std::str::FromStr for RegionKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "square" => Ok(RegionKind::Square),
            "torus" => Ok(RegionKind::Torus),
            other => Err(invalid("region", format!("unknown region kind `{other}`"))),
        }
    }
}

/// Axis-aligned region `[0, side]²`, optionally with wrap-around.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region<S> {
    kind: RegionKind,
    side: S,
}

impl<S: Scalar> Region<S> {
    pub fn new(kind: RegionKind, side: S) -> Result<Self> {
        if !(side > S::zero()) || !side.is_finite() {
            return Err(invalid("side", format!("must be positive and finite, got {side}")));
        }
        Ok(Self { kind, side })
    }

    pub fn square(side: S) -> Result<Self> {
        Self::new(RegionKind::Square, side)
    }

    pub fn torus(side: S) -> Result<Self> {
        Self::new(RegionKind::Torus, side)
    }

    pub fn kind(&self) -> RegionKind {
        self.kind
    }

    pub fn side(&self) -> S {
        self.side
    }

    pub fn area(&self) -> S {
        self.side * self.side
    }

    pub fn is_torus(&self) -> bool {
        self.kind == RegionKind::Torus
    }

    pub fn contains(&self, p: Point<S>) -> bool {
        let inside = |c: S| c >= S::zero() && c <= self.side;
        inside(p.x) && inside(p.y)
    }

    /// Largest distance two points of the region can be apart.
    pub fn diameter(&self) -> S {
        let d = self.side * S::lit(2.0).sqrt();
        match self.kind {
            RegionKind::Square => d,
            RegionKind::Torus => d / S::lit(2.0),
        }
    }

    /// Distance without the membership check; callers guarantee both points
    /// are inside the region.
    #[inline]
    pub fn dist(&self, a: Point<S>, b: Point<S>) -> S {
        let mut dx = (a.x - b.x).abs();
        let mut dy = (a.y - b.y).abs();
        if self.kind == RegionKind::Torus {
            // Per-axis wrap equals the minimum over the nine images.
            dx = dx.min(self.side - dx);
            dy = dy.min(self.side - dy);
        }
        dx.hypot(dy)
    }

    pub fn distance(&self, a: Point<S>, b: Point<S>) -> Result<S> {
        for p in [a, b] {
            if !self.contains(p) {
                return Err(invalid("point", format!("({}, {}) lies outside the region", p.x, p.y)));
            }
        }
        Ok(self.dist(a, b))
    }

    /// Uniform point in the region.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Point<S> {
        Point::new(self.sample_coord(rng), self.sample_coord(rng))
    }

    fn sample_coord<R: Rng + ?Sized>(&self, rng: &mut R) -> S {
        loop {
            let u: f64 = rng.random();
            let c = S::lit(u) * self.side;
            // f32 rounding can push u·side onto the upper edge.
            if c < self.side {
                return c;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point<S> {
    pub x: S,
    pub y: S,
}

impl<S> Point<S> {
    pub const fn new(x: S, y: S) -> Self {
        Self { x, y }
    }
}

/// Ordered point list; the id of a point is its index.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet<S> {
    points: Vec<Point<S>>,
    region: Region<S>,
    seed: u64,
}

impl<S: Scalar> PointSet<S> {
    /// Wraps explicit coordinates. Every point must lie inside `region`.
    pub fn from_points(region: Region<S>, points: Vec<Point<S>>, seed: u64) -> Result<Self> {
        if let Some(p) = points.iter().find(|p| !region.contains(**p)) {
            return Err(invalid("points", format!("({}, {}) lies outside the region", p.x, p.y)));
        }
        Ok(Self { points, region, seed })
    }

    pub fn empty(region: Region<S>) -> Self {
        Self { points: Vec::new(), region, seed: 0 }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn region(&self) -> &Region<S> {
        &self.region
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn points(&self) -> &[Point<S>] {
        &self.points
    }

    pub fn get(&self, id: NodeId) -> Option<Point<S>> {
        self.points.get(id.index()).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (NodeId, Point<S>)> + '_ {
        self.points.iter().enumerate().map(|(i, p)| (NodeId(i), *p))
    }
}

/// Homogeneous Poisson process of intensity `lambda` (points per unit area).
pub fn poisson_points<S: Scalar>(region: Region<S>, lambda: f64, seed: u64) -> Result<PointSet<S>> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(invalid("lambda", format!("must be positive and finite, got {lambda}")));
    }
    let mean = lambda * region.area().as_f64();
    let mut rng = rng::stream(seed, "points");
    let count = Poisson::new(mean).map_err(|e| invalid("lambda", e.to_string()))?.sample(&mut rng) as usize;
    let points = (0..count).map(|_| region.sample(&mut rng)).collect();
    Ok(PointSet { points, region, seed })
}

/// `n` independent uniform points.
pub fn uniform_points<S: Scalar>(region: Region<S>, n: usize, seed: u64) -> PointSet<S> {
    let mut rng = rng::stream(seed, "points");
    let points = (0..n).map(|_| region.sample(&mut rng)).collect();
    PointSet { points, region, seed }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn nine_image(region: &Region<f64>, a: Point<f64>, b: Point<f64>) -> f64 {
        let s = region.side();
        let mut best = f64::INFINITY;
        for ox in [-s, 0.0, s] {
            for oy in [-s, 0.0, s] {
                best = best.min((a.x - b.x - ox).hypot(a.y - b.y - oy));
            }
        }
        best
    }

    #[test]
    fn distance_examples() {
        let sq = Region::square(10.0).unwrap();
        let a = Point::new(0.0, 0.0);
        assert_eq!(sq.distance(a, a).unwrap(), 0.0);
        assert_eq!(sq.distance(a, Point::new(3.0, 4.0)).unwrap(), 5.0);
        let t = Region::<f64>::torus(10.0).unwrap();
        let d = t.distance(Point::new(0.5, 0.5), Point::new(9.5, 0.5)).unwrap();
        assert!((d - 1.0).abs() < 1e-12);
    }

    #[test]
    fn outside_point_is_rejected() {
        let sq = Region::square(10.0).unwrap();
        assert!(sq.distance(Point::new(0.0, 0.0), Point::new(11.0, 0.0)).is_err());
        assert!(Region::<f64>::square(0.0).is_err());
        assert!(Region::<f64>::torus(f64::INFINITY).is_err());
    }

    #[test]
    fn poisson_rejects_bad_lambda() {
        let sq = Region::square(10.0).unwrap();
        assert!(poisson_points(sq, 0.0, 1).is_err());
        assert!(poisson_points(sq, -1.0, 1).is_err());
    }

    #[test]
    fn poisson_mean_count() {
        // Mean of 1000 Poisson(500) draws: sd of the mean is 0.71.
        let sq = Region::square(10.0).unwrap();
        let total: usize = (0..1000).map(|s| poisson_points::<f64>(sq, 5.0, s).unwrap().len()).sum();
        let mean = total as f64 / 1000.0;
        assert!((480.0..=520.0).contains(&mean), "mean {mean}");
    }

    #[test]
    fn generators_are_deterministic() {
        let sq = Region::square(10.0).unwrap();
        assert_eq!(poisson_points::<f64>(sq, 5.0, 9).unwrap(), poisson_points(sq, 5.0, 9).unwrap());
        assert_eq!(uniform_points::<f64>(sq, 50, 9), uniform_points(sq, 50, 9));
        assert_ne!(uniform_points::<f64>(sq, 50, 9), uniform_points(sq, 50, 10));
    }

    #[test]
    fn uniform_examples() {
        let sq = Region::square(100.0).unwrap();
        assert!(uniform_points::<f64>(sq, 0, 1).is_empty());
        let ps = uniform_points::<f64>(sq, 100, 1);
        assert_eq!(ps.len(), 100);
        assert!(ps.points().iter().all(|p| (0.0..100.0).contains(&p.x) && (0.0..100.0).contains(&p.y)));
        let ps32 = uniform_points::<f32>(Region::square(1.0).unwrap(), 10_000, 3);
        assert!(ps32.points().iter().all(|p| p.x < 1.0 && p.y < 1.0));
    }

    #[test]
    fn torus_distance_bounded_by_half_diagonal() {
        let t = Region::torus(10.0).unwrap();
        let ps = uniform_points::<f64>(t, 200, 4);
        let bound = t.diameter();
        for a in ps.points() {
            for b in ps.points() {
                let d = t.dist(*a, *b);
                assert!(d <= bound + 1e-12);
                assert_eq!(d, nine_image(&t, *a, *b));
            }
        }
    }

    #[test]
    fn poisson_subregion_counts_independent() {
        // 2x2 contingency table of (left count above median, right count
        // above median) over 2000 seeds; chi-square with 1 dof, p = 0.001.
        let sq = Region::square(10.0).unwrap();
        let counts: Vec<(usize, usize)> = (0..2000)
            .map(|s| {
                let ps = poisson_points::<f64>(sq, 1.0, 1000 + s).unwrap();
                let left = ps.points().iter().filter(|p| p.x < 5.0).count();
                (left, ps.len() - left)
            })
            .collect();
        let table = |f: &dyn Fn(usize) -> bool, g: &dyn Fn(usize) -> bool| {
            counts.iter().filter(|(l, r)| f(*l) && g(*r)).count() as f64
        };
        let hi = |c: usize| c > 50;
        let lo = |c: usize| c <= 50;
        let obs = [table(&hi, &hi), table(&hi, &lo), table(&lo, &hi), table(&lo, &lo)];
        let n: f64 = obs.iter().sum();
        let row = [obs[0] + obs[1], obs[2] + obs[3]];
        let col = [obs[0] + obs[2], obs[1] + obs[3]];
        let mut chi2 = 0.0;
        for (k, o) in obs.iter().enumerate() {
            let e = row[k / 2] * col[k % 2] / n;
            chi2 += (o - e).powi(2) / e;
        }
        assert!(chi2 < 10.83, "chi2 {chi2}");
    }

    proptest! {
        #[test]
        fn metric_axioms(ax in 0.0..10.0f64, ay in 0.0..10.0f64, bx in 0.0..10.0f64,
                         by in 0.0..10.0f64, cx in 0.0..10.0f64, cy in 0.0..10.0f64,
                         torus in any::<bool>()) {
            let r = if torus { Region::torus(10.0).unwrap() } else { Region::square(10.0).unwrap() };
            let (a, b, c) = (Point::new(ax, ay), Point::new(bx, by), Point::new(cx, cy));
            prop_assert_eq!(r.dist(a, b), r.dist(b, a));
            prop_assert!(r.dist(a, b) >= 0.0);
            prop_assert_eq!(r.dist(a, a), 0.0);
            prop_assert!(r.dist(a, c) <= r.dist(a, b) + r.dist(b, c) + 1e-12);
        }

        // Two points inside a pi/3 cone at an apex: the nearer one is no
        // farther from the other than the apex is.
        #[test]
        fn sixty_degree_cone(vx in 20.0..80.0f64, vy in 20.0..80.0f64, heading in 0.0..std::f64::consts::TAU,
                             ta in 0.0..1.0f64, tb in 0.0..1.0f64, ra in 0.0..20.0f64, rb in 0.0..20.0f64) {
            let sq = Region::square(100.0).unwrap();
            let width = std::f64::consts::FRAC_PI_3;
            let at = |t: f64, r: f64| {
                let ang = heading + t * width;
                Point::new(vx + r * ang.cos(), vy + r * ang.sin())
            };
            let v = Point::new(vx, vy);
            let (mut a, mut b) = (at(ta, ra), at(tb, rb));
            if sq.dist(v, a) > sq.dist(v, b) {
                std::mem::swap(&mut a, &mut b);
            }
            prop_assert!(sq.dist(a, b) <= sq.dist(v, b) + 1e-9);
        }
    }
}
