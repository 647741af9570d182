//! Seeded Euler-Maruyama simulation of `(X, Y)` and Monte Carlo estimation of the
//! exponential-quadratic criterion.
//!
//! Path `k` of a run with seed `s` draws from the ChaCha8 stream `k` of key `s`, so
//! every path is a pure function of `(s, k)` and results do not depend on how paths
//! are scheduled. Paths are processed in fixed blocks of [`BLOCK`] whose partial
//! moments are merged in index order.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use rayon::prelude::*;
use statrs::function::erf::erfc_inv;

use crate::cameron_martin::CameronMartin;
use crate::error::{Error, Result};
use crate::filters::{apply_filter, FilterGains};
use crate::grid::ScalarPath;
use crate::model::{SymMat2, ValidatedModel};
use crate::ode::At;
use crate::scalar::{trapezoid, Real};

pub const BLOCK: usize = 1024;

/// Criterion value `mu exp(logmag)` of one path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostSample<R> {
    pub value: R,
    pub logmag: R,
}

impl<R: Real> CostSample<R> {
    pub fn new(mu: R, logmag: R) -> Self {
        Self {
            value: mu * logmag.exp(),
            logmag,
        }
    }
}

/// Random stream for path `index` of the run keyed by `seed`.
pub fn path_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Standard normal draw by inversion of a 53-bit uniform on the open unit interval.
pub fn standard_normal(rng: &mut impl RngCore) -> f64 {
    let u = ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64);
    -std::f64::consts::SQRT_2 * erfc_inv(2.0 * u)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseMode {
    #[default]
    Gaussian,
    /// All Brownian increments forced to zero.
    Zero,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathBundle<R> {
    pub seed: u64,
    pub index: u64,
    pub db: Vec<R>,
    pub dbt: Vec<R>,
    pub dy: Vec<R>,
    pub x: ScalarPath<R>,
    pub y: ScalarPath<R>,
}

/// Simulates path `index`: `X_{i+1} = X_i + a X_i dt + dB_i`, `dY_i = A X_i dt + dB~_i`.
pub fn simulate_path<R: Real>(model: &ValidatedModel<R>, seed: u64, index: u64, mode: NoiseMode) -> PathBundle<R> {
    let grid = *model.grid();
    let n = grid.steps();
    let dt = grid.dt();
    let sd = dt.as_f64().sqrt();
    let mut rng = path_rng(seed, index);
    let mut db = Vec::with_capacity(n);
    let mut dbt = Vec::with_capacity(n);
    let mut dy = Vec::with_capacity(n);
    let mut x = Vec::with_capacity(n + 1);
    let mut y = Vec::with_capacity(n + 1);
    let (mut xs, mut ys) = (R::zero(), R::zero());
    x.push(xs);
    y.push(ys);
    for i in 0..n {
        let (b, bt) = match mode {
            NoiseMode::Gaussian => {
                let b = standard_normal(&mut rng) * sd;
                (R::lit(b), R::lit(standard_normal(&mut rng) * sd))
            }
            NoiseMode::Zero => (R::zero(), R::zero()),
        };
        let d = model.obs_gain(At::Node(i)) * xs * dt + bt;
        xs += model.drift(At::Node(i)) * xs * dt + b;
        ys += d;
        db.push(b);
        dbt.push(bt);
        dy.push(d);
        x.push(xs);
        y.push(ys);
    }
    PathBundle {
        seed,
        index,
        db,
        dbt,
        dy,
        x: ScalarPath::new(grid, x).expect("path length matches grid"),
        y: ScalarPath::new(grid, y).expect("path length matches grid"),
    }
}

/// Paths `0..n` in index order.
pub fn simulate_paths<R: Real>(model: &ValidatedModel<R>, n: usize, seed: u64, mode: NoiseMode) -> Vec<PathBundle<R>> {
    (0..n as u64)
        .into_par_iter()
        .map(|k| simulate_path(model, seed, k, mode))
        .collect()
}

/// `mu exp{(mu/2) int (X, h) L (X, h)^T ds}` by the trapezoid rule.
pub fn path_cost<R: Real>(model: &ValidatedModel<R>, x: &ScalarPath<R>, h: &ScalarPath<R>) -> Result<CostSample<R>> {
    path_cost_terminal(model, x, h, &SymMat2::zero(), R::zero())
}

/// [`path_cost`] with the extra terminal form `(X_T, g) M (X_T, g)^T` in the exponent.
pub fn path_cost_terminal<R: Real>(
    model: &ValidatedModel<R>,
    x: &ScalarPath<R>,
    h: &ScalarPath<R>,
    terminal: &SymMat2<R>,
    g: R,
) -> Result<CostSample<R>> {
    let grid = *model.grid();
    if !x.grid().same_as(&grid) || !h.grid().same_as(&grid) {
        return Err(Error::GridMismatch("signal or estimate is on a different grid".into()));
    }
    let quad: Vec<R> = (0..grid.len())
        .map(|i| model.lambda(i).quad(x.at(i), h.at(i)))
        .collect();
    let mu = model.mu();
    let logmag = R::half() * mu * (trapezoid(&quad, grid.dt()) + terminal.quad(x.last(), g));
    if !logmag.is_finite() {
        return Err(Error::non_finite("path cost", grid.horizon().as_f64()));
    }
    Ok(CostSample::new(mu, logmag))
}

/// Streaming moments, mergeable in a fixed order.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Moments {
    n: u64,
    mean: f64,
    m2: f64,
    sum_abs: f64,
    max_abs: f64,
}

impl Moments {
    pub fn push(&mut self, v: f64) {
        self.n += 1;
        let d = v - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (v - self.mean);
        self.sum_abs += v.abs();
        self.max_abs = self.max_abs.max(v.abs());
    }

    pub fn merge(&mut self, other: &Moments) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        self.mean += d * other.n as f64 / n as f64;
        self.m2 += other.m2 + d * d * (self.n as f64 * other.n as f64 / n as f64);
        self.sum_abs += other.sum_abs;
        self.max_abs = self.max_abs.max(other.max_abs);
        self.n = n;
    }

    pub fn estimate(&self) -> McEstimate {
        let n = self.n as f64;
        let var = if self.n > 1 { self.m2 / (n - 1.0) } else { 0.0 };
        McEstimate {
            mean: self.mean,
            stderr: (var / n).sqrt(),
            n: self.n,
            tail_weight: if self.sum_abs > 0.0 {
                self.max_abs / self.sum_abs
            } else {
                0.0
            },
        }
    }
}

/// Sample mean with its standard error. `tail_weight` is the share of `sum |v|`
/// carried by the single largest sample.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: u64,
    pub tail_weight: f64,
}

#[derive(Debug, Clone)]
pub struct Strategy<R> {
    pub name: String,
    pub gains: FilterGains<R>,
}

impl<R> Strategy<R> {
    pub fn new(name: impl Into<String>, gains: FilterGains<R>) -> Self {
        Self {
            name: name.into(),
            gains,
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct StrategyEstimate {
    pub strategy: String,
    pub estimate: McEstimate,
}

/// Per-path `cost(first) - cost(second)`.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct PairedDifference {
    pub first: String,
    pub second: String,
    pub estimate: McEstimate,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Comparison {
    pub seed: u64,
    pub n: u64,
    pub strategies: Vec<StrategyEstimate>,
    pub paired: Vec<PairedDifference>,
}

impl Comparison {
    pub fn strategy(&self, name: &str) -> Option<&McEstimate> {
        self.strategies.iter().find(|s| s.strategy == name).map(|s| &s.estimate)
    }

    pub fn paired(&self, first: &str, second: &str) -> Option<&McEstimate> {
        self.paired
            .iter()
            .find(|p| p.first == first && p.second == second)
            .map(|p| &p.estimate)
    }
}

/// Runs `n` paths through `k` per-path evaluators producing `k` values each, and
/// returns the moments of every slot merged in path order.
fn run_blocks<F>(n: usize, slots: usize, eval: F) -> Result<Vec<Moments>>
where
    F: Fn(u64, &mut Vec<f64>) -> Result<()> + Sync,
{
    let blocks = n.div_ceil(BLOCK);
    let partial: Vec<Result<Vec<Moments>>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut acc = vec![Moments::default(); slots];
            let mut buf = Vec::with_capacity(slots);
            for k in b * BLOCK..((b + 1) * BLOCK).min(n) {
                buf.clear();
                eval(k as u64, &mut buf)?;
                for (m, &v) in acc.iter_mut().zip(&buf) {
                    m.push(v);
                }
            }
            Ok(acc)
        })
        .collect();
    let mut total = vec![Moments::default(); slots];
    for block in partial {
        for (t, m) in total.iter_mut().zip(&block?) {
            t.merge(m);
        }
    }
    Ok(total)
}

/// Estimates the criterion of every strategy on common simulated paths, with all
/// ordered pairwise paired differences.
pub fn mc_compare<R: Real>(
    model: &ValidatedModel<R>,
    strategies: &[Strategy<R>],
    n: usize,
    seed: u64,
) -> Result<Comparison> {
    if n == 0 {
        return Err(Error::Invalid("number of paths must be at least 1".into()));
    }
    for s in strategies {
        if !s.gains.grid().same_as(model.grid()) {
            return Err(Error::GridMismatch(format!(
                "strategy {} is on a different grid",
                s.name
            )));
        }
    }
    let k = strategies.len();
    let pairs: Vec<(usize, usize)> = (0..k)
        .flat_map(|i| (0..k).filter(move |&j| j != i).map(move |j| (i, j)))
        .collect();
    let moments = run_blocks(n, k + pairs.len(), |idx, out| {
        let path = simulate_path(model, seed, idx, NoiseMode::Gaussian);
        for s in strategies {
            let h = apply_filter(&s.gains, &path.dy)?.h;
            out.push(path_cost(model, &path.x, &h)?.value.as_f64());
        }
        for &(i, j) in &pairs {
            out.push(out[i] - out[j]);
        }
        Ok(())
    })?;
    Ok(Comparison {
        seed,
        n: n as u64,
        strategies: strategies
            .iter()
            .zip(&moments)
            .map(|(s, m)| StrategyEstimate {
                strategy: s.name.clone(),
                estimate: m.estimate(),
            })
            .collect(),
        paired: pairs
            .iter()
            .zip(&moments[k..])
            .map(|(&(i, j), m)| PairedDifference {
                first: strategies[i].name.clone(),
                second: strategies[j].name.clone(),
                estimate: m.estimate(),
            })
            .collect(),
    })
}

/// Monte Carlo check of the unconditional Cameron-Martin identity.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct CmVerification {
    pub seed: u64,
    pub lhs: McEstimate,
    pub rhs: McEstimate,
    pub difference: f64,
    pub pooled_stderr: f64,
}

impl CmVerification {
    pub fn within(&self, sigmas: f64) -> bool {
        self.difference.abs() <= sigmas * self.pooled_stderr
    }
}

/// Estimates both sides of `E[mu exp{...}] = E[I_T]` for the estimate produced by
/// `gains`, with terminal variable `g = h_T`.
pub fn cm_verify<R: Real>(
    model: &ValidatedModel<R>,
    terminal: &SymMat2<R>,
    gains: &FilterGains<R>,
    n: usize,
    seed: u64,
) -> Result<CmVerification> {
    if n == 0 {
        return Err(Error::Invalid("number of paths must be at least 1".into()));
    }
    let cm = CameronMartin::new(model, *terminal)?;
    let horizon = model.horizon();
    let m = run_blocks(n, 2, |idx, out| {
        let path = simulate_path(model, seed, idx, NoiseMode::Gaussian);
        let h = apply_filter(gains, &path.dy)?.h;
        let g = h.last();
        out.push(path_cost_terminal(model, &path.x, &h, terminal, g)?.value.as_f64());
        out.push(cm.evaluate(&h, g, &path.dy, horizon)?.value.as_f64());
        Ok(())
    })?;
    let (lhs, rhs) = (m[0].estimate(), m[1].estimate());
    Ok(CmVerification {
        seed,
        lhs,
        rhs,
        difference: lhs.mean - rhs.mean,
        pooled_stderr: (lhs.stderr * lhs.stderr + rhs.stderr * rhs.stderr).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TimeGrid;
    use crate::model::{validate_model, ModelSpec};

    fn example(n: usize) -> ValidatedModel<f64> {
        validate_model(&ModelSpec::worked_example(1.0), &TimeGrid::new(1.0, n).unwrap()).unwrap()
    }

    #[test]
    fn normal_draws_look_standard() {
        let mut rng = path_rng(7, 0);
        let mut m = Moments::default();
        for _ in 0..200_000 {
            m.push(standard_normal(&mut rng));
        }
        let e = m.estimate();
        assert!(e.mean.abs() < 0.01);
        assert!((e.stderr * e.stderr * 200_000.0 - 1.0).abs() < 0.01);
    }

    #[test]
    fn streams_differ_and_repeat() {
        let a: Vec<u64> = (0..4).map(|_| path_rng(1, 0).next_u64()).collect();
        assert!(a.windows(2).all(|w| w[0] == w[1]));
        assert_ne!(path_rng(1, 0).next_u64(), path_rng(1, 1).next_u64());
        assert_ne!(path_rng(1, 0).next_u64(), path_rng(2, 0).next_u64());
    }

    #[test]
    fn zero_noise_gives_zero_paths() {
        let p = simulate_path(&example(50), 3, 0, NoiseMode::Zero);
        assert!(p.x.values().iter().chain(p.y.values()).all(|&v| v == 0.0));
    }

    #[test]
    fn simulation_starts_at_zero_and_integrates_dy() {
        let p = simulate_path(&example(100), 3, 5, NoiseMode::Gaussian);
        assert_eq!(p.x.at(0), 0.0);
        assert_eq!(p.y.at(0), 0.0);
        let y_end: f64 = p.dy.iter().sum();
        assert!((y_end - p.y.last()).abs() < 1e-12);
    }

    #[test]
    fn cost_of_zero_paths_is_mu() {
        let m = example(20);
        let z = ScalarPath::zeros(*m.grid());
        assert_eq!(path_cost(&m, &z, &z).unwrap().value, -1.0);
    }

    #[test]
    fn singular_cost_with_perfect_estimate() {
        let m = validate_model(&ModelSpec::singular_example(1.0), &TimeGrid::new(1.0, 100).unwrap()).unwrap();
        let p = simulate_path(&m, 1, 0, NoiseMode::Gaussian);
        assert_eq!(path_cost(&m, &p.x, &p.x).unwrap().value, -1.0);
    }

    #[test]
    fn moments_merge_matches_single_pass() {
        let vals: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 / 7.0).collect();
        let mut whole = Moments::default();
        vals.iter().for_each(|&v| whole.push(v));
        let mut parts = Moments::default();
        for chunk in vals.chunks(333) {
            let mut m = Moments::default();
            chunk.iter().for_each(|&v| m.push(v));
            parts.merge(&m);
        }
        let (a, b) = (whole.estimate(), parts.estimate());
        assert_eq!(a.n, b.n);
        assert!((a.mean - b.mean).abs() < 1e-12);
        assert!((a.stderr - b.stderr).abs() < 1e-12);
    }
}
