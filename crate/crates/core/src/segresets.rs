//! Iterated Segre sets `S^q_j` (Monte-Carlo clouds) and Segre chains between
//! points of `U1 \ X`.

use num_complex::Complex64 as C64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypersurface::{random_in_disc, Hypersurface, Point};

const RESTARTS: usize = 32;

/// Samples of `S^q_0, .., S^q_j`. `parents[d][i]` indexes `levels[d - 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegreCloud {
    pub base: Point,
    pub levels: Vec<Vec<Point>>,
    pub parents: Vec<Vec<usize>>,
    /// Segre-graph solves that failed and were skipped, per level.
    pub failures: Vec<usize>,
}

impl SegreCloud {
    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn level(&self, j: usize) -> &[Point] {
        &self.levels[j]
    }

    /// Max `|rho(P, conj parent)|` over all points, recomputed from scratch.
    pub fn membership_residual(&self, m: &Hypersurface) -> Result<f64> {
        let mut worst = 0.0f64;
        for d in 1..self.levels.len() {
            for (p, &i) in self.levels[d].iter().zip(&self.parents[d]) {
                let parent = &self.levels[d - 1][i];
                worst = worst.max(m.rho(p.coords(), &parent.conj())?.norm());
            }
        }
        Ok(worst)
    }

    /// Rows `depth,parent,re(z1),im(z1),..,re(w),im(w)`.
    pub fn to_csv(&self) -> String {
        let n = self.base.n();
        let mut out = String::from("depth,parent");
        for j in 1..n {
            out += &format!(",re_z{j},im_z{j}");
        }
        out += ",re_w,im_w\n";
        for (d, level) in self.levels.iter().enumerate() {
            for (i, p) in level.iter().enumerate() {
                let parent = if d == 0 { -1 } else { self.parents[d][i] as i64 };
                out += &format!("{d},{parent}");
                for c in p.coords() {
                    out += &format!(",{:?},{:?}", c.re, c.im);
                }
                out.push('\n');
            }
        }
        out
    }
}

fn random_z<R: Rng>(m: &Hypersurface, rng: &mut R, frac: f64) -> Vec<C64> {
    (0..m.n() - 1).map(|_| random_in_disc(rng, frac * m.u1().z)).collect()
}

/// Monte-Carlo cloud of depth `j` with `count` points per level: each point
/// picks a random parent of the previous level and a uniform `z` in `U1`,
/// and is lifted by the parent's Segre graph; points leaving `U1` are
/// discarded. More than half of the solves failing aborts.
pub fn sample_segre_set<R: Rng>(m: &Hypersurface, q: &Point, j: usize, count: usize, rng: &mut R) -> Result<SegreCloud> {
    if !m.u1().contains(q) {
        return Err(Error::OutsideDomain(format!("{:?} not in U1", q.coords())));
    }
    let mut cloud = SegreCloud {
        base: q.clone(),
        levels: vec![vec![q.clone()]],
        parents: vec![vec![]],
        failures: vec![0],
    };
    for _ in 1..=j {
        let prev = cloud.levels.last().expect("nonempty");
        let varieties: Vec<_> = prev.iter().map(|p| m.segre_variety_unchecked(p)).collect();
        let mut pts = Vec::with_capacity(count);
        let mut parents = Vec::with_capacity(count);
        let mut failed = 0;
        let mut attempts = 0;
        while pts.len() < count && attempts < 20 * count {
            attempts += 1;
            let i = rng.gen_range(0..prev.len());
            let z = random_z(m, rng, 1.0);
            match varieties[i].point(&z) {
                Ok(p) if m.u1().contains(&p) => {
                    pts.push(p);
                    parents.push(i);
                }
                Ok(_) => {}
                Err(_) => failed += 1,
            }
            if attempts >= 20 && 2 * failed > attempts {
                return Err(Error::SamplingFailed { failed, attempted: attempts });
            }
        }
        if pts.is_empty() {
            return Err(Error::SamplingFailed { failed, attempted: attempts });
        }
        cloud.levels.push(pts);
        cloud.parents.push(parents);
        cloud.failures.push(failed);
    }
    Ok(cloud)
}

/// Newton on `z1` for `h(z, conj a) = h(z, conj b)` with the other
/// coordinates held at `rest`; returns the intersection point.
pub fn intersect_segre(m: &Hypersurface, a: &Point, b: &Point, z_seed: &[C64]) -> Result<Point> {
    let n = m.n();
    let (aa, bb) = (a.conj(), b.conj());
    let mut z = z_seed.to_vec();
    let (mut wa, mut wb) = (a.w(), b.w());
    for _ in 0..50 {
        wa = m.solve_graph(&z, &aa, wa)?;
        wb = m.solve_graph(&z, &bb, wb)?;
        let g = wa - wb;
        let slope = |anti: &[C64], w: C64| -> Result<C64> {
            let mut hol = z.clone();
            hol.push(w);
            let j = m.rho_jet(&hol, anti, 1)?;
            Ok(-j.partials[0] / j.partials[n - 1])
        };
        let dg = slope(&aa, wa)? - slope(&bb, wb)?;
        if dg.norm() < 1e-14 * (1.0 + g.norm()) {
            return Err(Error::EmptyIntersection("Segre varieties are parallel".into()));
        }
        let step = g / dg;
        z[0] -= step;
        if !z[0].is_finite() || z[0].norm() > 10.0 * m.u2().z {
            return Err(Error::EmptyIntersection("Newton left the domain".into()));
        }
        if step.norm() < 1e-14 * (1.0 + z[0].norm()) {
            let w = m.solve_graph(&z, &aa, wa)?;
            return Ok(Point::from_zw(&z, w));
        }
    }
    Err(Error::NoConvergence { at: "Segre intersection".into() })
}

fn validated(m: &Hypersurface, s: &Point, from: &Point, to: &Point, tol: f64) -> bool {
    m.u1().contains(s)
        && !m.near_x(s)
        && m.rho(s.coords(), &from.conj()).map(|r| r.norm() < tol).unwrap_or(false)
        && m.rho(s.coords(), &to.conj()).map(|r| r.norm() < tol).unwrap_or(false)
}

/// A point of `Q_from ∩ Q_to` inside `U1`, or `None` after the retry budget.
/// The first seed is the midpoint of the two `z`; later seeds are random.
pub fn two_step_reachable<R: Rng>(m: &Hypersurface, from: &Point, to: &Point, rng: &mut R) -> Option<Point> {
    two_step_with_seeds(m, from, to, rng, RESTARTS)
}

pub fn two_step_with_seeds<R: Rng>(m: &Hypersurface, from: &Point, to: &Point, rng: &mut R, restarts: usize) -> Option<Point> {
    let tol = 1e-10;
    if from.dist(to) == 0.0 && m.on_surface(from, tol) {
        return Some(from.clone());
    }
    let mid: Vec<C64> = from.z().iter().zip(to.z()).map(|(a, b)| (a + b) * 0.5).collect();
    let mut best: Option<(f64, Point)> = None;
    for attempt in 0..restarts {
        let seed = if attempt == 0 { mid.clone() } else { random_z(m, rng, 1.0) };
        if let Ok(s) = intersect_segre(m, from, to, &seed) {
            if validated(m, &s, from, to, tol) {
                let d = s.z().iter().zip(&mid).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
                if best.as_ref().map_or(true, |(bd, _)| d < *bd) {
                    best = Some((d, s));
                }
                if attempt == 0 {
                    break;
                }
            }
        }
    }
    best.map(|(_, s)| s)
}

/// `points = [p_0, p_1, .., p_{2j-1}, target]` with `p_k ∈ Q_{p_{k-1}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegreChain {
    pub points: Vec<Point>,
}

impl SegreChain {
    pub fn start(&self) -> &Point {
        &self.points[0]
    }

    pub fn target(&self) -> &Point {
        self.points.last().expect("nonempty")
    }

    /// Number of Segre steps (even).
    pub fn steps(&self) -> usize {
        self.points.len() - 1
    }

    /// Max membership residual of consecutive points.
    pub fn residual(&self, m: &Hypersurface) -> Result<f64> {
        let mut worst = 0.0f64;
        for k in 1..self.points.len() {
            worst = worst.max(m.rho(self.points[k].coords(), &self.points[k - 1].conj())?.norm());
        }
        Ok(worst)
    }

    pub fn to_csv(&self) -> String {
        let n = self.points[0].n();
        let mut out = String::from("index");
        for j in 1..n {
            out += &format!(",re_z{j},im_z{j}");
        }
        out += ",re_w,im_w\n";
        for (i, p) in self.points.iter().enumerate() {
            out += &i.to_string();
            for c in p.coords() {
                out += &format!(",{:?},{:?}", c.re, c.im);
            }
            out.push('\n');
        }
        out
    }
}

/// Where intermediate even waypoints are drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChainSearch {
    /// Uniformly from `U1`.
    Global,
    /// Near the segment from start to target.
    Local,
}

/// Breadth-first search for an even Segre chain from `p` to `target` with at
/// most `max_depth` steps.
pub fn find_chain<R: Rng>(
    m: &Hypersurface,
    p: &Point,
    target: &Point,
    max_depth: usize,
    mode: ChainSearch,
    rng: &mut R,
) -> Result<SegreChain> {
    for (name, pt) in [("start", p), ("target", target)] {
        if m.near_x(pt) {
            return Err(Error::Precondition(format!("{name} lies on X")));
        }
        if !m.u1().contains(pt) {
            return Err(Error::OutsideDomain(format!("{name} {:?} not in U1", pt.coords())));
        }
    }
    if p.dist(target) == 0.0 {
        return Ok(SegreChain { points: vec![p.clone()] });
    }
    // frontier: chains ending at an even waypoint
    let mut frontier: Vec<Vec<Point>> = vec![vec![p.clone()]];
    let mut reached = 0;
    let per_level = 24;
    let mut depth = 2;
    while depth <= max_depth {
        for chain in &frontier {
            let last = chain.last().expect("nonempty");
            if let Some(s) = two_step_with_seeds(m, last, target, rng, 8) {
                let mut pts = chain.clone();
                pts.push(s);
                pts.push(target.clone());
                let out = SegreChain { points: pts };
                if out.residual(m)? < 1e-10 {
                    return Ok(out);
                }
            }
        }
        reached = depth;
        if depth + 2 > max_depth {
            break;
        }
        let mut next = Vec::new();
        for chain in &frontier {
            let last = chain.last().expect("nonempty").clone();
            let mut got = 0;
            let mut tries = 0;
            while got < per_level.max(1) / frontier.len().max(1) + 1 && tries < 4 * per_level {
                tries += 1;
                let e = match mode {
                    ChainSearch::Global => m.random_point(rng, 0.9),
                    ChainSearch::Local => {
                        let t: f64 = rng.gen();
                        let jitter = 0.2 * last.dist(target).max(0.05);
                        let coords: Vec<C64> = last
                            .coords()
                            .iter()
                            .zip(target.coords())
                            .map(|(a, b)| a + (b - a) * t + random_in_disc(rng, jitter))
                            .collect();
                        Point::new(coords)
                    }
                };
                if !m.u1().contains(&e) || m.near_x(&e) {
                    continue;
                }
                if let Some(s) = two_step_with_seeds(m, &last, &e, rng, 4) {
                    let mut pts = chain.clone();
                    pts.push(s);
                    pts.push(e);
                    next.push(pts);
                    got += 1;
                }
            }
        }
        if next.is_empty() {
            break;
        }
        frontier = next;
        depth += 2;
    }
    Err(Error::ChainNotFound { max_depth, reached })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Config;
    use crate::expr::parse;
    use crate::hypersurface::Domain;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn mlog(u1: Domain, u2: Domain) -> Hypersurface {
        Hypersurface::from_exp_form("mlog", 2, parse("2*z1*cz1").unwrap(), u1, u2).unwrap()
    }

    #[test]
    fn first_segre_set_of_base_point() {
        let m = mlog(Domain::new(0.95, 2.0), Domain::new(1.0, 50.0));
        let mut rng = Config::default().rng(20);
        let q = Point::new(vec![c(0.0, 0.0), c(1.0, 0.0)]);
        let cloud = sample_segre_set(&m, &q, 1, 200, &mut rng).unwrap();
        assert!(cloud.level(1).iter().all(|p| (p.w() - 1.0).norm() < 1e-12));
        assert!(cloud.membership_residual(&m).unwrap() < 1e-10);
    }

    #[test]
    fn cloud_from_x_stays_in_x() {
        let m = mlog(Domain::new(0.95, 2.0), Domain::new(1.0, 50.0));
        let mut rng = Config::default().rng(21);
        let q = Point::new(vec![c(0.2, 0.0), c(0.0, 0.0)]);
        let cloud = sample_segre_set(&m, &q, 3, 50, &mut rng).unwrap();
        assert!(cloud.levels.iter().flatten().all(|p| p.w().norm() == 0.0));
    }

    #[test]
    fn depth_bound() {
        let eps = 0.3;
        let m = mlog(Domain::ball(eps), Domain::ball(eps));
        let mut rng = Config::default().rng(22);
        let q = Point::new(vec![c(0.0, 0.0), c(eps / 2.0, 0.0)]);
        let cloud = sample_segre_set(&m, &q, 4, 200, &mut rng).unwrap();
        for j in 0..=4 {
            let bound = 0.5 * eps * (-2.0 * j as f64 * eps * eps).exp();
            assert!(cloud.level(j).iter().all(|p| p.w().norm() >= bound));
        }
    }

    #[test]
    fn two_step_examples() {
        let m = mlog(Domain::new(0.95, 2.0), Domain::new(1.0, 50.0));
        let mut rng = Config::default().rng(23);
        let p = Point::new(vec![c(0.0, 0.0), c(1.0, 0.0)]);
        let to = Point::new(vec![c(0.1, 0.0), C64::from_polar(1.0, 0.02)]);
        assert!(two_step_reachable(&m, &p, &to, &mut rng).is_some());
        let excluded = Point::new(vec![c(0.0, 0.0), c(1.5, 0.0)]);
        assert!(two_step_reachable(&m, &p, &excluded, &mut rng).is_none());
        assert_eq!(two_step_reachable(&m, &p, &p, &mut rng), Some(p.clone()));
    }

    #[test]
    fn chains() {
        let m = mlog(Domain::new(0.95, 2.0), Domain::new(1.0, 50.0));
        let mut rng = Config::default().rng(24);
        let p = Point::new(vec![c(0.0, 0.0), c(1.0, 0.0)]);
        let q = Point::new(vec![c(0.3, -0.2), c(0.4, 0.7)]);
        let chain = find_chain(&m, &p, &q, 4, ChainSearch::Global, &mut rng).unwrap();
        assert!(chain.steps() <= 4 && chain.steps() % 2 == 0);
        assert!(chain.residual(&m).unwrap() < 1e-10);
        assert_eq!(find_chain(&m, &p, &p, 4, ChainSearch::Global, &mut rng).unwrap().steps(), 0);
        let on_x = Point::new(vec![c(0.1, 0.0), c(0.0, 0.0)]);
        assert!(matches!(
            find_chain(&m, &p, &on_x, 4, ChainSearch::Global, &mut rng),
            Err(Error::Precondition(_))
        ));
        // (0, w) with w != 1 needs a longer chain.
        let hard = Point::new(vec![c(0.0, 0.0), c(0.5, 0.0)]);
        let chain = find_chain(&m, &p, &hard, 6, ChainSearch::Global, &mut rng).unwrap();
        assert!(chain.steps() >= 4);
    }
}
