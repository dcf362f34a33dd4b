/// Step control for [`pattern_search_max`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatternOptions {
    pub initial_step: f64,
    pub min_step: f64,
    pub max_evals: usize,
}

impl Default for PatternOptions {
    fn default() -> Self {
        PatternOptions { initial_step: 2.0, min_step: 1e-6, max_evals: 20_000 }
    }
}

/// Compass search maximizing `f` over `R^D`.
///
/// `f` returns `None` outside the feasible set. Polls the coordinate
/// directions and the planar diagonals of the first two coordinates, moves to
/// the best improving poll point and halves the step when none improves.
pub fn pattern_search_max<const D: usize>(
    f: impl Fn(&[f64; D]) -> Option<f64>,
    x0: [f64; D],
    opts: PatternOptions,
) -> ([f64; D], f64) {
    let mut x = x0;
    let Some(mut fx) = f(&x) else {
        return (x, f64::NEG_INFINITY);
    };
    let mut dirs: Vec<[f64; D]> = Vec::new();
    for k in 0..D {
        for s in [1.0, -1.0] {
            let mut d = [0.0; D];
            d[k] = s;
            dirs.push(d);
        }
    }
    if D >= 2 {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        for (a, b) in [(h, h), (h, -h), (-h, h), (-h, -h)] {
            let mut d = [0.0; D];
            d[0] = a;
            d[1] = b;
            dirs.push(d);
        }
    }
    let mut step = opts.initial_step;
    let mut evals = 1;
    while step >= opts.min_step && evals < opts.max_evals {
        let mut best: Option<([f64; D], f64)> = None;
        for d in &dirs {
            let mut y = x;
            for k in 0..D {
                y[k] += step * d[k];
            }
            evals += 1;
            if let Some(fy) = f(&y) {
                if fy > fx && best.as_ref().is_none_or(|b| fy > b.1) {
                    best = Some((y, fy));
                }
            }
        }
        match best {
            Some((y, fy)) => {
                x = y;
                fx = fy;
            }
            None => step *= 0.5,
        }
    }
    (x, fx)
}
