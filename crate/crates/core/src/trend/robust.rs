//! S-estimator regression with Tukey's biweight ρ.
//!
//! The fit minimises the M-scale `s` solving `mean(ρ(r_i / s)) = k`, with
//! `k = E[ρ(Z)]` for standard normal `Z`. The search follows the Fast-S
//! pattern: random two-point elemental starts, a couple of reweighting steps
//! each, then full refinement of the best few candidates.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use super::{dist, Method, TrendFit};
use crate::error::{Error, Result};

/// Tuning constant giving a 50% breakdown point.
pub const BIWEIGHT_C: f64 = 1.547;

const SCALE_RTOL: f64 = 1e-10;
const PARAM_RTOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct SEstimatorConfig {
    pub tuning: f64,
    /// Random elemental starts.
    pub starts: usize,
    /// Reweighting steps applied to every start before ranking.
    pub initial_steps: usize,
    /// Candidates refined to convergence.
    pub refine_top: usize,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for SEstimatorConfig {
    fn default() -> Self {
        Self {
            tuning: BIWEIGHT_C,
            starts: 50,
            initial_steps: 2,
            refine_top: 5,
            max_iter: 200,
            seed: 0,
        }
    }
}

/// Tukey biweight ρ, normalised so that ρ(u) = 1 for |u| ≥ c.
pub fn biweight_rho(u: f64, c: f64) -> f64 {
    let x = u / c;
    if x.abs() >= 1.0 {
        1.0
    } else {
        1.0 - (1.0 - x * x).powi(3)
    }
}

fn biweight_weight(u: f64, c: f64) -> f64 {
    let x = u / c;
    if x.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - x * x).powi(2)
    }
}

/// ψ up to a constant factor (which cancels in the sandwich variance).
fn biweight_psi(u: f64, c: f64) -> f64 {
    u * biweight_weight(u, c)
}

fn biweight_psi_prime(u: f64, c: f64) -> f64 {
    let x2 = (u / c).powi(2);
    if x2 >= 1.0 {
        0.0
    } else {
        (1.0 - x2) * (1.0 - 5.0 * x2)
    }
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    eps: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * eps {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, eps / 2.0, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, eps / 2.0, depth - 1)
}

fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, eps: f64) -> f64 {
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(&f, a, b, fa, fm, fb, whole, eps, 48)
}

/// `E[ρ(Z)]` for standard normal `Z`: quadrature over `[-c, c]` plus the flat tails.
pub fn biweight_tuning_expectation(c: f64) -> f64 {
    let normal = Normal::new(0.0, 1.0).unwrap();
    let inner = adaptive_simpson(|x| biweight_rho(x, c) * normal.pdf(x), 0.0, c, 1e-14);
    2.0 * inner + 2.0 * normal.sf(c)
}

fn mean_rho(abs_res: &[f64], s: f64, c: f64, n: f64) -> f64 {
    abs_res.iter().map(|r| biweight_rho(r / s, c)).sum::<f64>() / n
}

/// M-scale of a residual vector, by bisection. Returns 0 when so many
/// residuals are exactly zero that no positive scale solves the equation.
pub fn m_scale(residuals: &[f64], c: f64, k: f64) -> f64 {
    let n = residuals.len() as f64;
    let abs_res: Vec<f64> = residuals.iter().map(|r| r.abs()).filter(|r| *r > 0.0).collect();
    if abs_res.len() as f64 / n <= k {
        return 0.0;
    }
    let mut hi = abs_res.iter().copied().fold(0.0, f64::max);
    while mean_rho(&abs_res, hi, c, n) > k {
        hi *= 2.0;
    }
    let mut lo = hi;
    while mean_rho(&abs_res, lo, c, n) <= k {
        lo /= 2.0;
    }
    for _ in 0..400 {
        if hi - lo <= SCALE_RTOL * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mean_rho(&abs_res, mid, c, n) > k {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[derive(Debug, Clone, Copy)]
struct Params {
    intercept: f64,
    slope: f64,
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    params: Params,
    scale: f64,
}

struct Problem<'a> {
    y: &'a [f64],
    c: f64,
    k: f64,
    zero_tol: f64,
}

impl Problem<'_> {
    fn residuals(&self, p: Params) -> Vec<f64> {
        self.y
            .iter()
            .enumerate()
            .map(|(i, y)| {
                let r = y - p.intercept - p.slope * (i + 1) as f64;
                if r.abs() <= self.zero_tol {
                    0.0
                } else {
                    r
                }
            })
            .collect()
    }

    fn scale(&self, p: Params) -> f64 {
        m_scale(&self.residuals(p), self.c, self.k)
    }

    fn elemental(&self, rng: &mut ChaCha8Rng) -> Params {
        let idx = sample(rng, self.y.len(), 2);
        let (i, j) = (idx.index(0), idx.index(1));
        let slope = (self.y[j] - self.y[i]) / (j as f64 - i as f64);
        Params {
            intercept: self.y[i] - slope * (i + 1) as f64,
            slope,
        }
    }

    fn weighted_fit(&self, w: &[f64]) -> Option<Params> {
        let sw: f64 = w.iter().sum();
        if sw <= 0.0 {
            return None;
        }
        let y_bar = w.iter().zip(self.y).map(|(w, y)| w * y).sum::<f64>() / sw;
        let t_bar = w.iter().enumerate().map(|(i, w)| w * (i + 1) as f64).sum::<f64>() / sw;
        let (mut stt, mut sty) = (0.0, 0.0);
        for (i, (wi, yi)) in w.iter().zip(self.y).enumerate() {
            let dt = (i + 1) as f64 - t_bar;
            stt += wi * dt * dt;
            sty += wi * dt * (yi - y_bar);
        }
        if stt <= 1e-12 * sw {
            return None;
        }
        let slope = sty / stt;
        Some(Params {
            intercept: y_bar - slope * t_bar,
            slope,
        })
    }

    /// One reweighting step. `None` when the current fit is exact or the weighted
    /// problem is degenerate.
    fn step(&self, p: Params) -> (Candidate, Option<Params>) {
        let r = self.residuals(p);
        let scale = m_scale(&r, self.c, self.k);
        let current = Candidate { params: p, scale };
        if scale == 0.0 {
            return (current, None);
        }
        let w: Vec<f64> = r.iter().map(|r| biweight_weight(r / scale, self.c)).collect();
        (current, self.weighted_fit(&w))
    }

    /// Reweight until the parameters settle or the scale stops decreasing by
    /// more than the scale solver's own tolerance.
    fn refine(&self, start: Params, max_steps: usize) -> (Candidate, bool) {
        let mut p = start;
        let mut last_scale = f64::INFINITY;
        for _ in 0..max_steps {
            let (current, next) = self.step(p);
            let Some(next) = next else {
                return (current, true);
            };
            let stalled = last_scale - current.scale <= 2.0 * SCALE_RTOL * current.scale;
            let settled = (next.intercept - p.intercept).abs()
                <= PARAM_RTOL * (1.0 + p.intercept.abs())
                && (next.slope - p.slope).abs() <= PARAM_RTOL * (1.0 + p.slope.abs());
            if stalled {
                return (current, true);
            }
            last_scale = current.scale;
            p = next;
            if settled {
                return (
                    Candidate {
                        params: p,
                        scale: self.scale(p),
                    },
                    true,
                );
            }
        }
        (
            Candidate {
                params: p,
                scale: self.scale(p),
            },
            false,
        )
    }

    fn solve(&self, cfg: &SEstimatorConfig) -> Result<Candidate> {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut candidates = Vec::with_capacity(cfg.starts);
        for _ in 0..cfg.starts.max(1) {
            let start = self.elemental(&mut rng);
            let (cand, _) = self.refine(start, cfg.initial_steps);
            if cand.scale == 0.0 {
                return Ok(cand);
            }
            candidates.push(cand);
        }
        candidates.sort_by(|a, b| a.scale.total_cmp(&b.scale));

        let mut best: Option<Candidate> = None;
        for cand in candidates.iter().take(cfg.refine_top.max(1)) {
            let (refined, converged) = self.refine(cand.params, cfg.max_iter);
            if converged && best.is_none_or(|b| refined.scale < b.scale) {
                best = Some(refined);
            }
        }
        best.ok_or_else(|| Error::NonConvergence {
            what: "S-estimator refinement".into(),
            iterations: cfg.max_iter,
        })
    }
}

/// Smallest M-scale over constant fits `y = a`: a grid over the data range
/// (data points included, so exact fits are found), then golden-section search
/// around the best grid point.
fn location_scale(y: &[f64], c: f64, k: f64, zero_tol: f64) -> f64 {
    let scale_at = |a: f64| {
        let r: Vec<f64> = y.iter().map(|v| if (v - a).abs() <= zero_tol { 0.0 } else { v - a }).collect();
        m_scale(&r, c, k)
    };
    let (lo, hi) = y.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(*v), h.max(*v)));
    if hi == lo {
        return 0.0;
    }
    const GRID: usize = 200;
    let step = (hi - lo) / GRID as f64;
    let mut grid: Vec<f64> = (0..=GRID).map(|i| lo + step * i as f64).chain(y.iter().copied()).collect();
    grid.sort_by(f64::total_cmp);
    let scored: Vec<f64> = grid.iter().map(|a| scale_at(*a)).collect();
    let best = (0..grid.len()).min_by(|&i, &j| scored[i].total_cmp(&scored[j])).unwrap();
    if scored[best] == 0.0 {
        return 0.0;
    }
    let (mut a, mut b) = (grid[best.saturating_sub(1)], grid[(best + 1).min(grid.len() - 1)]);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut x1, mut x2) = (b - g * (b - a), a + g * (b - a));
    let (mut f1, mut f2) = (scale_at(x1), scale_at(x2));
    while b - a > SCALE_RTOL * (1.0 + a.abs()) {
        if f1 <= f2 {
            b = x2;
            (x2, f2) = (x1, f1);
            x1 = b - g * (b - a);
            f1 = scale_at(x1);
        } else {
            a = x1;
            (x1, f1) = (x2, f2);
            x2 = a + g * (b - a);
            f2 = scale_at(x2);
        }
    }
    scored[best].min(f1).min(f2)
}

/// Robust line fit. R² is `1 - (s_line / s_location)²` and the slope p-value
/// comes from the asymptotic normal approximation of the estimator.
pub fn s_estimator_trend(values: &[f64], cfg: &SEstimatorConfig) -> Result<TrendFit> {
    let n = values.len();
    if n < 5 {
        return Err(Error::TooFewPoints { needed: 5, got: n });
    }
    if cfg.tuning.is_nan() || cfg.tuning <= 0.0 {
        return Err(Error::InvalidArgument("biweight tuning constant must be positive".into()));
    }
    let c = cfg.tuning;
    let k = biweight_tuning_expectation(c);
    let zero_tol = 1e-10 * values.iter().fold(1.0_f64, |m, v| m.max(v.abs()));

    let line = Problem { y: values, c, k, zero_tol }.solve(cfg)?;
    let location_scale = location_scale(values, c, k, zero_tol);

    let Params { intercept, slope } = line.params;
    let r_squared = if location_scale > 0.0 {
        1.0 - (line.scale / location_scale).powi(2)
    } else {
        0.0
    };

    let p_value = if line.scale == 0.0 {
        if slope == 0.0 { 1.0 } else { 0.0 }
    } else {
        let nf = n as f64;
        let u: Vec<f64> = values
            .iter()
            .enumerate()
            .map(|(i, y)| (y - intercept - slope * (i + 1) as f64) / line.scale)
            .collect();
        let a = u.iter().map(|u| biweight_psi(*u, c).powi(2)).sum::<f64>() / nf;
        let b = u.iter().map(|u| biweight_psi_prime(*u, c)).sum::<f64>() / nf;
        let t_mean = (nf + 1.0) / 2.0;
        let sxx: f64 = (1..=n).map(|t| (t as f64 - t_mean).powi(2)).sum();
        if b <= 0.0 {
            1.0
        } else {
            let var = line.scale.powi(2) * a / (b * b) / sxx * nf / (nf - 2.0);
            dist::normal_two_sided(slope / var.sqrt())
        }
    };
    Ok(TrendFit::new(Method::SEstimator, slope, intercept, r_squared, p_value))
}
