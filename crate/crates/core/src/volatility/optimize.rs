//! Quasi-Newton minimization over an unconstrained parameter vector.

/// Outcome of one minimization attempt.
#[derive(Debug, Clone)]
pub(crate) struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub converged: bool,
    /// Final inverse Hessian approximation, row-major.
    pub inverse_hessian: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Settings {
    /// Converged once successive accepted objective values differ by less
    /// than this.
    pub tolerance: f64,
    pub max_evaluations: usize,
}

struct Counted<F> {
    f: F,
    evaluations: usize,
}

impl<F: FnMut(&[f64]) -> f64> Counted<F> {
    fn eval(&mut self, x: &[f64]) -> f64 {
        self.evaluations += 1;
        let v = (self.f)(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    }

    /// Central-difference gradient.
    fn gradient(&mut self, x: &[f64], g: &mut [f64]) {
        let mut probe = x.to_vec();
        for i in 0..x.len() {
            let h = 1e-5 * x[i].abs().max(1.0);
            probe[i] = x[i] + h;
            let up = self.eval(&probe);
            probe[i] = x[i] - h;
            let down = self.eval(&probe);
            probe[i] = x[i];
            g[i] = if up.is_finite() && down.is_finite() {
                (up - down) / (2.0 * h)
            } else {
                0.0
            };
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// BFGS with central-difference gradients and a backtracking Armijo line
/// search. Objective values of `NaN` count as `+∞`.
#[cfg(test)]
pub(crate) fn bfgs<F: FnMut(&[f64]) -> f64>(f: F, start: &[f64], settings: Settings) -> Minimum {
    bfgs_from(f, start, settings, None)
}

/// As [`bfgs`], optionally seeded with an inverse Hessian from a related
/// problem (a warm start).
pub(crate) fn bfgs_from<F: FnMut(&[f64]) -> f64>(
    f: F,
    start: &[f64],
    settings: Settings,
    inverse_hessian: Option<&[f64]>,
) -> Minimum {
    let n = start.len();
    let mut obj = Counted { f, evaluations: 0 };
    let mut x = start.to_vec();
    let mut fx = obj.eval(&x);
    if n == 0 || !fx.is_finite() {
        return Minimum {
            x,
            value: fx,
            evaluations: obj.evaluations,
            converged: n == 0 && fx.is_finite(),
            inverse_hessian: Vec::new(),
        };
    }

    let mut g = vec![0.0; n];
    obj.gradient(&x, &mut g);
    // Inverse Hessian approximation, row-major.
    let mut h = vec![0.0; n * n];
    let gnorm = dot(&g, &g).sqrt();
    let init = if gnorm > 1.0 { 1.0 / gnorm } else { 1.0 };
    for i in 0..n {
        h[i * n + i] = init;
    }
    let mut first_step = true;
    if let Some(seed) = inverse_hessian.filter(|h0| h0.len() == n * n && h0.iter().all(|v| v.is_finite())) {
        h.copy_from_slice(seed);
        first_step = false;
    }

    let mut dir = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut g_new = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut hy = vec![0.0; n];

    while obj.evaluations < settings.max_evaluations {
        for i in 0..n {
            dir[i] = -(0..n).map(|j| h[i * n + j] * g[j]).sum::<f64>();
        }
        let mut slope = dot(&g, &dir);
        if slope >= 0.0 {
            // Lost positive definiteness; restart from steepest descent.
            for i in 0..n {
                for j in 0..n {
                    h[i * n + j] = if i == j { init } else { 0.0 };
                }
                dir[i] = -init * g[i];
            }
            slope = dot(&g, &dir);
            if slope >= 0.0 {
                return Minimum {
                    x,
                    value: fx,
                    evaluations: obj.evaluations,
                    converged: true,
                    inverse_hessian: h,
                };
            }
        }

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            for i in 0..n {
                trial[i] = x[i] + step * dir[i];
            }
            let ft = obj.eval(&trial);
            if ft.is_finite() && ft <= fx + 1e-4 * step * slope {
                accepted = Some(ft);
                break;
            }
            step *= 0.5;
        }
        let Some(f_new) = accepted else {
            // No descent along the quasi-Newton direction: stationary to
            // within numerical resolution.
            return Minimum {
                x,
                value: fx,
                evaluations: obj.evaluations,
                converged: true,
                inverse_hessian: h,
            };
        };

        obj.gradient(&trial, &mut g_new);
        for i in 0..n {
            s[i] = trial[i] - x[i];
            y[i] = g_new[i] - g[i];
        }
        let change = fx - f_new;
        x.copy_from_slice(&trial);
        g.copy_from_slice(&g_new);
        fx = f_new;
        if change.abs() < settings.tolerance {
            return Minimum {
                x,
                value: fx,
                evaluations: obj.evaluations,
                converged: true,
                inverse_hessian: h,
            };
        }

        let sy = dot(&s, &y);
        if sy > 1e-12 {
            if first_step {
                let scale = sy / dot(&y, &y);
                for i in 0..n {
                    for j in 0..n {
                        h[i * n + j] = if i == j { scale } else { 0.0 };
                    }
                }
                first_step = false;
            }
            for i in 0..n {
                hy[i] = (0..n).map(|j| h[i * n + j] * y[j]).sum();
            }
            let yhy = dot(&y, &hy);
            let rho = 1.0 / sy;
            let coef = (1.0 + rho * yhy) * rho;
            for i in 0..n {
                for j in 0..n {
                    h[i * n + j] += coef * s[i] * s[j] - rho * (hy[i] * s[j] + s[i] * hy[j]);
                }
            }
        }
    }
    Minimum {
        x,
        value: fx,
        evaluations: obj.evaluations,
        converged: false,
        inverse_hessian: h,
    }
}
