use crate::error::{Error, Result};

/// Minimize `(a0 + Σ a_j x_j) / (b0 + Σ b_j x_j)` over binary `x` with at least
/// `min_ones` ones. An infinite `a_j` forbids `x_j = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct FractionalInstance {
    pub a0: f64,
    pub b0: f64,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub min_ones: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FractionalSolution {
    pub selection: Vec<bool>,
    pub ratio: f64,
    /// Optimal value of the parametric subproblem at each Dinkelbach step.
    pub residuals: Vec<f64>,
}

impl FractionalInstance {
    pub fn ratio(&self, x: &[bool]) -> f64 {
        let (num, den) = self.parts(x);
        num / den
    }

    fn parts(&self, x: &[bool]) -> (f64, f64) {
        let mut num = self.a0;
        let mut den = self.b0;
        for j in 0..self.a.len() {
            if x[j] {
                num += self.a[j];
                den += self.b[j];
            }
        }
        (num, den)
    }

    fn allowed(&self) -> Vec<usize> {
        (0..self.a.len()).filter(|&j| self.a[j].is_finite()).collect()
    }

    /// Minimizer of `a0 - r b0 + Σ (a_j - r b_j) x_j`. Ties leave `x_j = 0`.
    fn parametric(&self, r: f64, allowed: &[usize]) -> (Vec<bool>, f64) {
        let mut x = vec![false; self.a.len()];
        let mut value = self.a0 - r * self.b0;
        let mut count = 0;
        let mut rest: Vec<(f64, usize)> = Vec::new();
        for &j in allowed {
            let c = self.a[j] - r * self.b[j];
            if c < 0.0 {
                x[j] = true;
                value += c;
                count += 1;
            } else {
                rest.push((c, j));
            }
        }
        if count < self.min_ones {
            rest.sort_by(|p, q| p.0.total_cmp(&q.0).then(p.1.cmp(&q.1)));
            for &(c, j) in rest.iter().take(self.min_ones - count) {
                x[j] = true;
                value += c;
            }
        }
        (x, value)
    }
}

/// Dinkelbach's method for a single-ratio 0-1 fractional program.
///
/// Fails with [`Error::Coverage`] when fewer than `min_ones` entries are allowed;
/// callers replace the device index in the error.
pub fn dinkelbach_select(inst: &FractionalInstance) -> Result<FractionalSolution> {
    let n = inst.a.len();
    if inst.b.len() != n {
        return Err(Error::Parameter("a and b must have the same length".into()));
    }
    let allowed = inst.allowed();
    if allowed.is_empty() || allowed.len() < inst.min_ones {
        return Err(Error::Coverage { device: usize::MAX });
    }

    // Start from every allowed entry switched on.
    let mut x = vec![false; n];
    for &j in &allowed {
        x[j] = true;
    }
    let mut r = inst.ratio(&x);
    let mut residuals = Vec::new();
    for _ in 0..200 {
        let (cand, value) = inst.parametric(r, &allowed);
        residuals.push(value);
        let (num, den) = inst.parts(&cand);
        let scale = inst.a0.abs()
            + r.abs() * inst.b0.abs()
            + allowed.iter().map(|&j| inst.a[j].abs() + r.abs() * inst.b[j].abs()).sum::<f64>();
        if value >= -1e-13 * scale.max(f64::MIN_POSITIVE) {
            // Prefer the subproblem minimizer when it attains the same ratio with fewer ones.
            if num / den <= r && cand.iter().filter(|&&v| v).count() < x.iter().filter(|&&v| v).count() {
                x = cand;
                r = num / den;
            }
            break;
        }
        x = cand;
        r = num / den;
    }
    if !(inst.parts(&x).1 > 0.0) {
        return Err(Error::Domain("fractional denominator is not positive".into()));
    }
    Ok(FractionalSolution { selection: x, ratio: r, residuals })
}
