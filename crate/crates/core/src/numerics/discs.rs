use crate::error::{Error, Result};
use crate::model::Vec2;

/// Intersection of closed discs in the plane.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscConstraintSet {
    pub centers: Vec<Vec2>,
    pub radii: Vec<f64>,
}

const SLACK: f64 = 1e-8;

impl DiscConstraintSet {
    pub fn new(centers: Vec<Vec2>, radii: Vec<f64>) -> Result<Self> {
        if centers.is_empty() || centers.len() != radii.len() {
            return Err(Error::Parameter("disc set needs matching, non-empty centers and radii".into()));
        }
        if radii.iter().any(|r| !(*r > 0.0) || !r.is_finite()) {
            return Err(Error::Parameter("disc radii must be positive".into()));
        }
        Ok(DiscConstraintSet { centers, radii })
    }

    /// Largest distance by which `p` lies outside any disc; non-positive when inside all.
    pub fn max_violation(&self, p: &Vec2) -> f64 {
        self.centers
            .iter()
            .zip(&self.radii)
            .map(|(c, r)| (p - c).norm() - r)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn contains(&self, p: &Vec2, tol: f64) -> bool {
        self.max_violation(p) <= tol
    }

    fn project_one(&self, k: usize, p: &Vec2) -> Vec2 {
        let c = self.centers[k];
        let r = self.radii[k];
        let d = p - c;
        let n = d.norm();
        if n <= r {
            *p
        } else {
            c + d * (r / n)
        }
    }
}

/// Crossing points of the boundary circles of discs `a` and `b`.
fn circle_crossings(cs: &DiscConstraintSet, a: usize, b: usize) -> Option<[Vec2; 2]> {
    let (c0, r0) = (cs.centers[a], cs.radii[a]);
    let (c1, r1) = (cs.centers[b], cs.radii[b]);
    let d = (c1 - c0).norm();
    if d == 0.0 || d > r0 + r1 || d < (r0 - r1).abs() {
        return None;
    }
    let along = (d * d + r0 * r0 - r1 * r1) / (2.0 * d);
    let half = (r0 * r0 - along * along).max(0.0).sqrt();
    let u = (c1 - c0) / d;
    let mid = c0 + u * along;
    let perp = Vec2::new(-u.y, u.x) * half;
    Some([mid + perp, mid - perp])
}

/// Euclidean projection of `p` onto the intersection.
///
/// The projection is either the projection onto a single disc or a crossing
/// point of two boundary circles; the nearest feasible candidate is returned.
pub fn project_discs(p: &Vec2, cs: &DiscConstraintSet) -> Result<Vec2> {
    if cs.contains(p, 0.0) {
        return Ok(*p);
    }
    let m = cs.centers.len();
    let scale = cs.radii.iter().fold(1.0f64, |s, r| s.max(*r));
    let tol = 1e-9 * scale;
    let mut best: Option<(f64, Vec2)> = None;
    let mut consider = |q: Vec2| {
        if cs.max_violation(&q) <= tol {
            let d = (q - p).norm_squared();
            if best.is_none_or(|b| d < b.0) {
                best = Some((d, q));
            }
        }
    };
    for k in 0..m {
        consider(cs.project_one(k, p));
    }
    for a in 0..m {
        for b in a + 1..m {
            if let Some(qs) = circle_crossings(cs, a, b) {
                qs.into_iter().for_each(&mut consider);
            }
        }
    }
    match best {
        Some((_, q)) if cs.max_violation(&q) <= SLACK => Ok(q),
        _ => Err(Error::InfeasibleRegion),
    }
}

/// Outcome of [`maximize_over_discs`].
#[derive(Debug, Clone, PartialEq)]
pub struct Ascent {
    pub point: Vec2,
    pub value: f64,
    /// Objective after every accepted step, starting at the projected init.
    pub trace: Vec<f64>,
}

/// Projected gradient ascent of a concave objective over a disc intersection.
///
/// `obj` returns the value and the gradient at a point.
pub fn maximize_over_discs(
    obj: impl Fn(&Vec2) -> (f64, Vec2),
    cs: &DiscConstraintSet,
    init: &Vec2,
) -> Result<Ascent> {
    let mut x = project_discs(init, cs)?;
    let (mut f, mut g) = obj(&x);
    let mut trace = vec![f];
    let mut t = if g.norm() > 0.0 { 1.0 / g.norm() } else { 1.0 };
    let scale = cs.radii.iter().fold(1.0f64, |s, r| s.max(*r));
    for _ in 0..2000 {
        let gn = g.norm();
        if !(gn > 0.0) || !gn.is_finite() {
            break;
        }
        let mut accepted = None;
        while t * gn > 1e-12 {
            let y = project_discs(&(x + g * t), cs)?;
            let step = y - x;
            if step.norm() < 1e-12 {
                break;
            }
            let (fy, gy) = obj(&y);
            if fy >= f + 1e-4 * g.dot(&step) && fy >= f {
                accepted = Some((y, fy, gy));
                break;
            }
            t *= 0.5;
        }
        let Some((y, fy, gy)) = accepted else { break };
        let sx = y - x;
        let sg = gy - g;
        let moved = sx.norm();
        let gain = fy - f;
        x = y;
        f = fy;
        g = gy;
        trace.push(f);
        // Barzilai-Borwein step for the next iteration.
        let curv = -sx.dot(&sg);
        t = if curv > 0.0 { sx.norm_squared() / curv } else { 2.0 * t };
        if moved < 1e-9 * scale || gain <= 1e-15 * f.abs() {
            break;
        }
    }
    Ok(Ascent { point: x, value: f, trace })
}
