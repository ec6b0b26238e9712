//! Weighted rate-distortion minimisation over test channels.
//!
//! For a direction `a ≥ 0` the objective is
//! `Σ_{i>J} a_i R_i + Σ_l a_{M+l} D_l`, with `R` the corner rates of a source
//! ordering (identity unless stated). Minimisers are searched by coordinate
//! descent over channels; each step rewrites one channel as the best mixture
//! of candidate points of `Δ_{X_k}` found by a small linear program, whose
//! basic solutions use at most `|X_k|` points. An exhaustive lattice search
//! serves as an independent reference at desk scale.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::augment::{
    attach_channels, check_channels, forward_to_reverse, reverse_to_forward, Channel, ProblemSpec, ReverseChannelPair,
};
use crate::error::{Error, Result};
use crate::evaluate::RdEvaluator;
use crate::functionals::{distortion_component, FunctionalContext};
use crate::lp;
use crate::math;
use crate::region::{corner_point, Permutation, RateVector};
use crate::rng::{derive_seed, nonnegative_unit, seeded, uniform_simplex, SeededRng};

/// Tolerance on the Euclidean norm of a direction.
pub const NORM_TOL: f64 = 1e-12;

/// Slack allowed when accepting a coordinate step.
pub const ACCEPT_TOL: f64 = 1e-12;

/// Default bound on the number of channel tuples the lattice oracle evaluates.
pub const DEFAULT_ORACLE_BUDGET: u128 = 100_000_000;

/// A nonnegative unit normal `(a_{J+1}, ..., a_M, a_{M+1}, ..., a_{M+L})`;
/// the weights of the losslessly coded sources are implicitly zero.
#[derive(Clone, Debug, PartialEq)]
pub struct Direction {
    sources: usize,
    lossless: usize,
    weights: Vec<f64>,
}

impl Direction {
    /// Weights over the channel sources then the distortions, already of unit norm.
    pub fn new(spec: &ProblemSpec, weights: Vec<f64>) -> Result<Self> {
        let d = Self::check(spec, &weights)?;
        let norm = math::sqrt(weights.iter().map(|w| w * w).sum());
        if math::abs(norm - 1.0) > NORM_TOL {
            return Err(Error::InadmissibleDirection(format!("norm is {norm}, expected 1")));
        }
        Ok(d)
    }

    /// Scales nonnegative weights to unit norm.
    pub fn normalized(spec: &ProblemSpec, weights: Vec<f64>) -> Result<Self> {
        let mut d = Self::check(spec, &weights)?;
        let norm = math::sqrt(weights.iter().map(|w| w * w).sum());
        if !(norm > 0.0) {
            return Err(Error::InadmissibleDirection("all weights are zero".into()));
        }
        d.weights.iter_mut().for_each(|w| *w /= norm);
        Ok(d)
    }

    fn check(spec: &ProblemSpec, weights: &[f64]) -> Result<Self> {
        let expected = spec.sources() - spec.lossless() + spec.distortion_count();
        if weights.len() != expected {
            return Err(Error::InadmissibleDirection(format!(
                "expected {expected} weights, got {}",
                weights.len()
            )));
        }
        if let Some(bad) = weights.iter().find(|w| !(**w >= 0.0) || !w.is_finite()) {
            return Err(Error::InadmissibleDirection(format!(
                "weight {bad} is not a nonnegative number"
            )));
        }
        Ok(Direction {
            sources: spec.sources(),
            lossless: spec.lossless(),
            weights: weights.to_vec(),
        })
    }

    /// Uniform on the nonnegative part of the unit sphere.
    pub fn random<R: Rng + ?Sized>(spec: &ProblemSpec, rng: &mut R) -> Self {
        let n = spec.sources() - spec.lossless() + spec.distortion_count();
        Direction {
            sources: spec.sources(),
            lossless: spec.lossless(),
            weights: nonnegative_unit(rng, n),
        }
    }

    /// All weight on the rate of source `i` (a channel source).
    pub fn rate_axis(spec: &ProblemSpec, i: usize) -> Result<Self> {
        spec.check_channel_source(i)?;
        let mut w = vec![0.0; spec.sources() - spec.lossless() + spec.distortion_count()];
        w[i - spec.lossless()] = 1.0;
        Self::new(spec, w)
    }

    /// All weight on distortion `l`.
    pub fn distortion_axis(spec: &ProblemSpec, l: usize) -> Result<Self> {
        if l >= spec.distortion_count() {
            return Err(Error::Index(format!("distortion {l} out of range")));
        }
        let mut w = vec![0.0; spec.sources() - spec.lossless() + spec.distortion_count()];
        w[spec.sources() - spec.lossless() + l] = 1.0;
        Self::new(spec, w)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn sources(&self) -> usize {
        self.sources
    }

    pub fn lossless(&self) -> usize {
        self.lossless
    }

    pub fn distortion_count(&self) -> usize {
        self.weights.len() - (self.sources - self.lossless)
    }

    /// `a_i`, zero for losslessly coded sources.
    pub fn rate_weight(&self, i: usize) -> f64 {
        if i < self.lossless || i >= self.sources {
            0.0
        } else {
            self.weights[i - self.lossless]
        }
    }

    /// `a_{M+l}`
    pub fn distortion_weight(&self, l: usize) -> f64 {
        self.weights[self.sources - self.lossless + l]
    }

    /// Coordinate names matching [`Direction::weights`]: `R{i}` then `D{l}`, 1-based.
    pub fn labels(&self) -> Vec<String> {
        (self.lossless..self.sources)
            .map(|i| format!("R{}", i + 1))
            .chain((0..self.distortion_count()).map(|l| format!("D{}", l + 1)))
            .collect()
    }

    fn dot_raw(&self, rd: &[f64]) -> f64 {
        let m = self.sources;
        let mut total = 0.0;
        for i in self.lossless..m {
            total += self.weights[i - self.lossless] * rd[i];
        }
        for l in 0..self.distortion_count() {
            total += self.weights[m - self.lossless + l] * rd[m + l];
        }
        total
    }

    fn matches(&self, spec: &ProblemSpec) -> Result<()> {
        if self.sources != spec.sources()
            || self.lossless != spec.lossless()
            || self.distortion_count() != spec.distortion_count()
        {
            return Err(Error::InadmissibleDirection(
                "direction does not match the problem dimensions".into(),
            ));
        }
        Ok(())
    }
}

/// Rates in bits and distortions in the units of their measures.
#[derive(Clone, Debug, PartialEq)]
pub struct RdPoint {
    pub rates: RateVector,
    pub distortions: Vec<f64>,
}

impl RdPoint {
    /// `Σ_{i>J} a_i R_i + Σ_l a_{M+l} D_l`
    pub fn objective(&self, a: &Direction) -> f64 {
        let mut v = self.rates.as_slice().to_vec();
        v.extend_from_slice(&self.distortions);
        a.dot_raw(&v)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizeResult {
    pub channels: Vec<Channel>,
    pub objective: f64,
    pub rd_point: RdPoint,
    /// Objective before the first sweep, then after each sweep.
    pub trace: Vec<f64>,
}

/// Corner rates under `perm` and optimal-estimator distortions, from the
/// augmented joint.
pub fn rd_point(spec: &ProblemSpec, channels: &[Channel], perm: &Permutation) -> Result<RdPoint> {
    let aug = attach_channels(spec, channels)?;
    let rates = corner_point(&aug, perm)?;
    let distortions = spec
        .distortions()
        .iter()
        .map(|d| distortion_component(&aug, d).map(|(v, _)| v))
        .collect::<Result<Vec<_>>>()?;
    Ok(RdPoint { rates, distortions })
}

/// The weighted objective with identity-order corner rates.
pub fn weighted_objective(spec: &ProblemSpec, channels: &[Channel], a: &Direction) -> Result<f64> {
    weighted_objective_ordered(spec, channels, a, &Permutation::identity(spec.sources()))
}

pub fn weighted_objective_ordered(
    spec: &ProblemSpec,
    channels: &[Channel],
    a: &Direction,
    perm: &Permutation,
) -> Result<f64> {
    a.matches(spec)?;
    Ok(rd_point(spec, channels, perm)?.objective(a))
}

/// Search parameters for coordinate descent and its restarts.
#[derive(Clone, Debug, PartialEq)]
pub struct SearchConfig {
    /// Random candidate points per single-channel step.
    pub candidates: usize,
    /// Maximum number of sweeps over the channel sources.
    pub sweeps: usize,
    /// A sweep improving the objective by less than this ends the descent.
    pub tol: f64,
    /// Number of initialisations tried by [`multi_start`].
    pub restarts: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            candidates: 64,
            sweeps: 50,
            tol: 1e-9,
            restarts: 8,
        }
    }
}

/// Candidate points of `Δ_n`: vertices, pairwise midpoints, the barycenter,
/// `random` Dirichlet(1) draws and the incumbent columns. When incumbent
/// columns are present, half of the draws are local perturbations of them.
pub fn candidate_pool<R: Rng + ?Sized>(n: usize, incumbent: &[Vec<f64>], random: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let mut pool = Vec::with_capacity(n * (n + 1) / 2 + 1 + random + incumbent.len());
    for x in 0..n {
        let mut e = vec![0.0; n];
        e[x] = 1.0;
        pool.push(e);
    }
    for x in 0..n {
        for y in x + 1..n {
            let mut mid = vec![0.0; n];
            mid[x] = 0.5;
            mid[y] = 0.5;
            pool.push(mid);
        }
    }
    if n > 1 {
        pool.push(vec![1.0 / n as f64; n]);
    }
    let local = if incumbent.is_empty() { 0 } else { random / 2 };
    for _ in 0..random - local {
        pool.push(uniform_simplex(rng, n));
    }
    for idx in 0..local {
        let center = &incumbent[idx % incumbent.len()];
        let eps = 0.3 * rng.gen::<f64>();
        let noise = uniform_simplex(rng, n);
        let mut t: Vec<f64> = center
            .iter()
            .zip(&noise)
            .map(|(c, e)| (1.0 - eps) * c + eps * e)
            .collect();
        let s: f64 = t.iter().sum();
        t.iter_mut().for_each(|v| *v /= s);
        pool.push(t);
    }
    pool.extend(incumbent.iter().cloned());
    pool
}

/// One coordinate step: the best mixture of pool points reproducing `p_k`.
///
/// The returned pair has at most `|X_k|` symbols and, whenever the incumbent
/// is supplied, an objective no larger than the incumbent's.
pub fn optimize_single_channel(
    ctx: &FunctionalContext,
    a: &Direction,
    incumbent: Option<&ReverseChannelPair>,
    candidates: usize,
    seed: u64,
) -> Result<ReverseChannelPair> {
    ctx.check_direction(a)?;
    let p = ctx.marginal();
    let n = p.len();
    let inc: Vec<Vec<f64>> = incumbent
        .map(|pair| {
            pair.weights()
                .iter()
                .zip(pair.columns())
                .filter(|(w, _)| **w > 0.0)
                .map(|(_, c)| c.clone())
                .collect()
        })
        .unwrap_or_default();
    let mut rng = seeded(seed);
    let mut pool = candidate_pool(n, &inc, candidates, &mut rng);
    // the marginal itself, so that the constant channel is always available
    pool.push(p.to_vec());
    let cost: Vec<f64> = pool.iter().map(|t| ctx.theta_unchecked(a, t)).collect();
    if let Some(bad) = cost.iter().find(|c| !c.is_finite()) {
        return Err(Error::NumericIntegrity {
            what: "functional value",
            value: *bad,
        });
    }
    let rows: Vec<Vec<f64>> = (0..n).map(|x| pool.iter().map(|t| t[x]).collect()).collect();
    let sol = match lp::solve(&rows, p, &cost) {
        Ok(sol) => sol,
        Err(Error::Infeasible) => return Err(Error::Internal("candidate pool cannot reproduce the source marginal")),
        Err(e) => return Err(e),
    };
    let support = sol.support();
    if support.len() > n {
        return Err(Error::Internal("basic solution exceeds the support bound"));
    }
    let total: f64 = support.iter().map(|&j| sol.x[j]).sum();
    let weights = support.iter().map(|&j| sol.x[j] / total).collect();
    let columns = support.iter().map(|&j| pool[j].clone()).collect();
    ReverseChannelPair::new(weights, columns)
}

/// Coordinate descent over the channel sources in increasing order, for the
/// objective with corner rates of `perm`.
///
/// A step is kept when it does not raise the objective by more than
/// [`ACCEPT_TOL`]; a step is always kept when the incumbent output alphabet
/// exceeds `|X_k|`, so every channel is capped after the first sweep.
pub fn coordinate_descent(
    spec: &ProblemSpec,
    a: &Direction,
    init: &[Channel],
    perm: &Permutation,
    cfg: &SearchConfig,
    seed: u64,
) -> Result<OptimizeResult> {
    a.matches(spec)?;
    check_channels(spec, init)?;
    if cfg.sweeps == 0 {
        return Err(Error::Shape("at least one sweep is required".into()));
    }
    let j = spec.lossless();
    let mut channels = init.to_vec();
    let mut objective = weighted_objective_ordered(spec, &channels, a, perm)?;
    let mut trace = vec![objective];
    for sweep in 0..cfg.sweeps {
        let before = objective;
        for k in spec.channel_sources() {
            let ctx = FunctionalContext::with_order(spec, &channels, k, perm)?;
            let incumbent = forward_to_reverse(spec, k, &channels[k - j])?;
            let step_seed = derive_seed(seed, (sweep * spec.sources() + k) as u64);
            let pair = optimize_single_channel(&ctx, a, Some(&incumbent), cfg.candidates, step_seed)?;
            let candidate = reverse_to_forward(spec, k, &pair)?.channel;
            let oversized = channels[k - j].output_size() > spec.x_alphabet(k).size();
            let previous = core::mem::replace(&mut channels[k - j], candidate);
            let value = weighted_objective_ordered(spec, &channels, a, perm)?;
            if value <= objective + ACCEPT_TOL || oversized {
                objective = value;
            } else {
                channels[k - j] = previous;
            }
        }
        trace.push(objective);
        if before - objective < cfg.tol {
            break;
        }
    }
    let rd_point = rd_point(spec, &channels, perm)?;
    Ok(OptimizeResult {
        channels,
        objective,
        rd_point,
        trace,
    })
}

/// The initialisations used by [`multi_start`]: identity channels, constant
/// channels, then random channels with `|Z_k| = |X_k|`.
pub fn default_inits(spec: &ProblemSpec, restarts: usize, rng: &mut SeededRng) -> Vec<Vec<Channel>> {
    (0..restarts)
        .map(|r| {
            spec.channel_sources()
                .map(|k| match r {
                    0 => Channel::identity(spec, k),
                    1 => Channel::constant(spec, k),
                    _ => Channel::random(spec, k, spec.x_alphabet(k).size(), rng),
                })
                .collect()
        })
        .collect()
}

/// Best of coordinate descent runs from the default initialisations followed
/// by `extra` ones; ties keep the earliest run.
pub fn multi_start(
    spec: &ProblemSpec,
    a: &Direction,
    perm: &Permutation,
    cfg: &SearchConfig,
    seed: u64,
    extra: &[Vec<Channel>],
) -> Result<OptimizeResult> {
    let mut rng = seeded(derive_seed(seed, u64::MAX));
    let mut inits = default_inits(spec, cfg.restarts, &mut rng);
    inits.extend(extra.iter().cloned());
    if inits.is_empty() {
        return Err(Error::Shape("no initialisation to start from".into()));
    }
    let mut best: Option<OptimizeResult> = None;
    for (r, init) in inits.iter().enumerate() {
        let res = coordinate_descent(spec, a, init, perm, cfg, derive_seed(seed, r as u64))?;
        if best.as_ref().is_none_or(|b| res.objective < b.objective) {
            best = Some(res);
        }
    }
    Ok(best.expect("at least one run"))
}

/// Extreme points of the inner bound for ordering `perm`: for each direction,
/// the best multi-start minimiser of the `perm`-ordered objective.
pub fn trace_inner_bound(
    spec: &ProblemSpec,
    directions: &[Direction],
    perm: &Permutation,
    cfg: &SearchConfig,
    seed: u64,
) -> Result<Vec<(Direction, OptimizeResult)>> {
    directions
        .iter()
        .enumerate()
        .map(|(idx, a)| {
            let res = multi_start(spec, a, perm, cfg, derive_seed(seed, idx as u64), &[])?;
            Ok((a.clone(), res))
        })
        .collect()
}

/// All points of the resolution-`grid` lattice in `Δ_n`, as integer counts,
/// in lexicographically decreasing order.
pub fn lattice_points(n: usize, grid: usize) -> Vec<Vec<usize>> {
    fn rec(n: usize, left: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == n - 1 {
            prefix.push(left);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for c in (0..=left).rev() {
            prefix.push(c);
            rec(n, left - c, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if n > 0 {
        rec(n, grid, &mut Vec::with_capacity(n), &mut out);
    }
    out
}

/// Channels `|X| x |Z|` with rows on the resolution-`grid` lattice, one per
/// class under relabelling of the outputs (columns in non-increasing
/// lexicographic order). Row-major probabilities.
pub fn lattice_channels(nx: usize, nz: usize, grid: usize) -> Vec<Vec<f64>> {
    fn rec(
        nx: usize,
        nz: usize,
        grid: usize,
        remaining: &mut Vec<usize>,
        cols: &mut Vec<Vec<usize>>,
        out: &mut Vec<Vec<f64>>,
    ) {
        if cols.len() == nz - 1 {
            let last = remaining.clone();
            if cols.last().is_none_or(|p| last <= *p) {
                let mut rows = vec![0.0; nx * nz];
                for (z, col) in cols.iter().chain(core::iter::once(&last)).enumerate() {
                    for x in 0..nx {
                        rows[x * nz + z] = col[x] as f64 / grid as f64;
                    }
                }
                out.push(rows);
            }
            return;
        }
        // columns bounded by the remaining row mass, at most the previous column
        let mut col = vec![0usize; nx];
        loop {
            if cols.last().is_none_or(|p| col <= *p) {
                for x in 0..nx {
                    remaining[x] -= col[x];
                }
                cols.push(col.clone());
                rec(nx, nz, grid, remaining, cols, out);
                cols.pop();
                for x in 0..nx {
                    remaining[x] += col[x];
                }
            }
            let mut x = nx;
            loop {
                if x == 0 {
                    return;
                }
                x -= 1;
                if col[x] < remaining[x] {
                    col[x] += 1;
                    break;
                }
                col[x] = 0;
            }
        }
    }
    let mut out = Vec::new();
    if nx == 0 || nz == 0 {
        return out;
    }
    rec(nx, nz, grid, &mut vec![grid; nx], &mut Vec::new(), &mut out);
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct OracleResult {
    pub objective: f64,
    pub channels: Vec<Channel>,
}

/// Number of channel tuples the oracle would evaluate.
pub fn oracle_cost(spec: &ProblemSpec, z_sizes: &[usize], grid: usize) -> Result<u128> {
    if z_sizes.len() != spec.sources() - spec.lossless() {
        return Err(Error::Shape("one output size per channel source required".into()));
    }
    let mut total: u128 = 1;
    for (k, &nz) in spec.channel_sources().zip(z_sizes) {
        let count = lattice_channels(spec.x_alphabet(k).size(), nz, grid).len() as u128;
        total = total.saturating_mul(count);
    }
    Ok(total)
}

/// Exhaustive minimum of the identity-order objective over lattice channels.
pub fn brute_force_oracle(spec: &ProblemSpec, a: &Direction, z_sizes: &[usize], grid: usize) -> Result<OracleResult> {
    brute_force_oracle_many(spec, core::slice::from_ref(a), z_sizes, grid, DEFAULT_ORACLE_BUDGET)
        .map(|mut v| v.remove(0))
}

/// [`brute_force_oracle`] for several directions sharing one enumeration.
/// Ties keep the first tuple in enumeration order.
pub fn brute_force_oracle_many(
    spec: &ProblemSpec,
    directions: &[Direction],
    z_sizes: &[usize],
    grid: usize,
    budget: u128,
) -> Result<Vec<OracleResult>> {
    for a in directions {
        a.matches(spec)?;
    }
    if grid == 0 {
        return Err(Error::Shape("grid resolution must be positive".into()));
    }
    let estimated = oracle_cost(spec, z_sizes, grid)?;
    if estimated > budget {
        return Err(Error::Budget { estimated, budget });
    }
    let lists: Vec<Vec<Vec<f64>>> = spec
        .channel_sources()
        .zip(z_sizes)
        .map(|(k, &nz)| lattice_channels(spec.x_alphabet(k).size(), nz, grid))
        .collect();
    let mut ev = RdEvaluator::new(spec, z_sizes, &Permutation::identity(spec.sources()))?;
    let mut best = vec![(f64::INFINITY, vec![0usize; lists.len()]); directions.len()];
    let mut idx = vec![0usize; lists.len()];
    loop {
        let rows: Vec<&[f64]> = idx.iter().zip(&lists).map(|(&i, l)| l[i].as_slice()).collect();
        let rd = ev.evaluate_rows(&rows);
        for (a, b) in directions.iter().zip(best.iter_mut()) {
            let v = a.dot_raw(rd);
            if v < b.0 {
                *b = (v, idx.clone());
            }
        }
        let mut c = idx.len();
        loop {
            if c == 0 {
                break;
            }
            c -= 1;
            idx[c] += 1;
            if idx[c] < lists[c].len() {
                break;
            }
            idx[c] = 0;
        }
        if idx.iter().all(|&i| i == 0) {
            break;
        }
    }
    best.into_iter()
        .map(|(objective, at)| {
            let channels = spec
                .channel_sources()
                .zip(z_sizes)
                .zip(&at)
                .map(|((k, &nz), &i)| Channel::for_source(spec, k, nz, lists[k - spec.lossless()][i].clone()))
                .collect::<Result<Vec<_>>>()?;
            Ok(OracleResult { objective, channels })
        })
        .collect()
}

/// Outcome of the alphabet-size check for one direction.
#[derive(Clone, Debug, PartialEq)]
pub struct AlphabetBoundReport {
    pub direction: Direction,
    /// Lattice minimum with `|Z_k| = |X_k| + 2`.
    pub enlarged: f64,
    /// Best objective found with `|Z_k| <= |X_k|`.
    pub capped: f64,
    /// Lattice minimum with `|Z_k| = |X_k|` at the finer grid, when within budget.
    pub capped_oracle: Option<f64>,
    /// Coordinate descent started from the enlarged lattice minimiser; its
    /// first sweep caps every alphabet without raising the objective.
    pub reduced: f64,
    pub capped_channels: Vec<Channel>,
    pub grid: usize,
    pub capped_grid: usize,
    pub tol: f64,
}

impl AlphabetBoundReport {
    pub fn passed(&self) -> bool {
        self.capped <= self.enlarged + self.tol
    }
}

/// Finer grid giving `|X|`-symbol lattice channels roughly the resolution of
/// `(|X| + 2)`-symbol channels at `grid`.
pub fn matched_grid(spec: &ProblemSpec, grid: usize) -> usize {
    spec.channel_sources()
        .map(|k| {
            let nx = spec.x_alphabet(k).size();
            (grid * (nx + 2)).div_ceil(nx)
        })
        .max()
        .unwrap_or(grid)
}

/// Compares the best capped-alphabet objective with the enlarged-alphabet
/// lattice minimum, for each direction. The capped side is the minimum of
/// its own lattice oracle, coordinate descent from that oracle's minimiser
/// and multi-start coordinate descent; it does not use the enlarged search.
pub fn verify_alphabet_bound(
    spec: &ProblemSpec,
    directions: &[Direction],
    grid: usize,
    tol: f64,
    cfg: &SearchConfig,
    seed: u64,
    budget: u128,
) -> Result<Vec<AlphabetBoundReport>> {
    let perm = Permutation::identity(spec.sources());
    let enlarged_sizes: Vec<usize> = spec.channel_sources().map(|k| spec.x_alphabet(k).size() + 2).collect();
    let capped_sizes: Vec<usize> = spec.channel_sources().map(|k| spec.x_alphabet(k).size()).collect();
    let enlarged = brute_force_oracle_many(spec, directions, &enlarged_sizes, grid, budget)?;
    let capped_grid = matched_grid(spec, grid);
    let capped_oracle = match brute_force_oracle_many(spec, directions, &capped_sizes, capped_grid, budget) {
        Ok(v) => Some(v),
        Err(Error::Budget { .. }) => None,
        Err(e) => return Err(e),
    };
    directions
        .iter()
        .enumerate()
        .map(|(idx, a)| {
            let dseed = derive_seed(seed, idx as u64);
            let extra: Vec<Vec<Channel>> = capped_oracle
                .as_ref()
                .map(|o| vec![o[idx].channels.clone()])
                .unwrap_or_default();
            let search = multi_start(spec, a, &perm, cfg, dseed, &extra)?;
            let mut capped = search.objective;
            let mut capped_channels = search.channels;
            if let Some(o) = &capped_oracle {
                if o[idx].objective < capped {
                    capped = o[idx].objective;
                    capped_channels = o[idx].channels.clone();
                }
            }
            let reduced = coordinate_descent(spec, a, &enlarged[idx].channels, &perm, cfg, dseed)?.objective;
            Ok(AlphabetBoundReport {
                direction: a.clone(),
                enlarged: enlarged[idx].objective,
                capped,
                capped_oracle: capped_oracle.as_ref().map(|o| o[idx].objective),
                reduced,
                capped_channels,
                grid,
                capped_grid,
                tol,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::augment::tests::two_source_spec;
    use crate::functionals::verify_linear_decomposition;
    use std::vec::Vec;

    fn binomial(n: usize, k: usize) -> usize {
        (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
    }

    #[test]
    fn lattice_counts() {
        assert_eq!(lattice_points(3, 4).len(), binomial(6, 2));
        assert_eq!(lattice_points(1, 5), vec![vec![5]]);
        // |X| = 1: a channel is a lattice point up to ordering, i.e. a partition
        // of the grid into at most nz parts
        assert_eq!(lattice_channels(1, 3, 4).len(), 4);
        // binary input, binary output: unordered pairs of columns {(a, b), (g-a, g-b)}
        let g = 6;
        assert_eq!(lattice_channels(2, 2, g).len(), ((g + 1) * (g + 1)).div_ceil(2));
        // every class representative is stochastic and classes are distinct
        let chans = lattice_channels(2, 3, 3);
        for rows in &chans {
            for row in rows.chunks(3) {
                assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
        let mut seen: Vec<Vec<Vec<u64>>> = Vec::new();
        for rows in &chans {
            let mut cols: Vec<Vec<u64>> = (0..3)
                .map(|z| (0..2).map(|x| (rows[x * 3 + z] * 3.0).round() as u64).collect())
                .collect();
            cols.sort();
            assert!(!seen.contains(&cols));
            seen.push(cols);
        }
        // orbit count check: all 10 x 10 raw channels fall into these classes
        let raw = lattice_points(3, 3).len().pow(2);
        assert!(chans.len() * 6 >= raw && chans.len() <= raw);
    }

    #[test]
    fn direction_validation() {
        let spec = two_source_spec(1, 1);
        assert!(Direction::new(&spec, vec![0.6, 0.8]).is_ok());
        assert!(Direction::new(&spec, vec![0.6, 0.6]).is_err());
        assert!(Direction::new(&spec, vec![-0.6, 0.8]).is_err());
        assert!(Direction::new(&spec, vec![1.0]).is_err());
        assert!(Direction::normalized(&spec, vec![0.0, 0.0]).is_err());
        let d = Direction::normalized(&spec, vec![3.0, 4.0]).unwrap();
        assert!((d.rate_weight(1) - 0.6).abs() < 1e-15);
        assert_eq!(d.rate_weight(0), 0.0);
        assert_eq!(d.labels(), vec!["R2", "D1"]);
        assert!(Direction::rate_axis(&spec, 0).is_err());
    }

    #[test]
    fn objective_examples() {
        let spec = two_source_spec(0, 2);
        let rates = Direction::normalized(&spec, vec![1.0, 1.0, 0.0]).unwrap();
        let constant: Vec<Channel> = (0..2).map(|k| Channel::constant(&spec, k)).collect();
        assert_eq!(weighted_objective(&spec, &constant, &rates).unwrap(), 0.0);
    }

    #[test]
    fn single_channel_step_never_worsens() {
        let spec = two_source_spec(0, 3);
        let mut rng = seeded(4);
        for trial in 0..10 {
            let chans: Vec<Channel> = (0..2).map(|k| Channel::random(&spec, k, 3, &mut rng)).collect();
            let a = Direction::random(&spec, &mut rng);
            let before = weighted_objective(&spec, &chans, &a).unwrap();
            let ctx = FunctionalContext::new(&spec, &chans, 1).unwrap();
            let inc = forward_to_reverse(&spec, 1, &chans[1]).unwrap();
            let pair = optimize_single_channel(&ctx, &a, Some(&inc), 16, trial).unwrap();
            assert!(pair.len() <= 2);
            assert!(pair.mixture_defect(spec.x_marginal(1)) < 1e-9);
            let mut after = chans.clone();
            after[1] = reverse_to_forward(&spec, 1, &pair).unwrap().channel;
            let value = weighted_objective(&spec, &after, &a).unwrap();
            assert!(value <= before + 1e-12, "{value} > {before}");
        }
    }

    #[test]
    fn rate_only_direction_sends_nothing() {
        // all weight on the rate of the only channel source
        let spec = two_source_spec(1, 5);
        let chans = vec![Channel::constant(&spec, 1)];
        let a = Direction::rate_axis(&spec, 1).unwrap();
        let ctx = FunctionalContext::new(&spec, &chans, 1).unwrap();
        let pair = optimize_single_channel(&ctx, &a, None, 8, 0).unwrap();
        let got = ctx.mixture_objective(&a, pair.weights(), pair.columns()).unwrap();
        assert!(got.abs() < 1e-12);
    }

    #[test]
    fn descent_is_monotone_and_capped() {
        let spec = two_source_spec(0, 6);
        let mut rng = seeded(7);
        let cfg = SearchConfig {
            candidates: 24,
            sweeps: 10,
            ..SearchConfig::default()
        };
        for trial in 0..5 {
            let init: Vec<Channel> = (0..2).map(|k| Channel::random(&spec, k, 4, &mut rng)).collect();
            let a = Direction::random(&spec, &mut rng);
            let res = coordinate_descent(&spec, &a, &init, &Permutation::identity(2), &cfg, trial).unwrap();
            for w in res.trace.windows(2) {
                assert!(w[1] <= w[0] + 1e-10);
            }
            for c in &res.channels {
                assert!(c.output_size() <= 2);
            }
            let direct = weighted_objective(&spec, &res.channels, &a).unwrap();
            assert!((direct - res.objective).abs() < 1e-9);
            assert!(verify_linear_decomposition(&spec, &res.channels, &a, 1e-9)
                .unwrap()
                .passed());
        }
    }

    #[test]
    fn oracle_trivial_cases() {
        let spec = two_source_spec(0, 8);
        let mut rng = seeded(9);
        let a = Direction::random(&spec, &mut rng);
        let ones = brute_force_oracle(&spec, &a, &[1, 1], 3).unwrap();
        let constant: Vec<Channel> = (0..2).map(|k| Channel::constant(&spec, k)).collect();
        assert!((ones.objective - weighted_objective(&spec, &constant, &a).unwrap()).abs() < 1e-12);
        let coarse = brute_force_oracle(&spec, &a, &[2, 2], 1).unwrap();
        let fine = brute_force_oracle(&spec, &a, &[2, 2], 4).unwrap();
        assert!(fine.objective <= coarse.objective + 1e-12);
        let check = weighted_objective(&spec, &fine.channels, &a).unwrap();
        assert!((check - fine.objective).abs() < 1e-12);
        assert!(matches!(
            brute_force_oracle_many(&spec, &[a], &[3, 3], 12, 10),
            Err(Error::Budget { .. })
        ));
    }

    #[test]
    fn oracle_matches_unreduced_enumeration() {
        let spec = two_source_spec(1, 10);
        let mut rng = seeded(11);
        let a = Direction::random(&spec, &mut rng);
        let grid = 3;
        let got = brute_force_oracle(&spec, &a, &[3], grid).unwrap().objective;
        let points = lattice_points(3, grid);
        let mut want = f64::INFINITY;
        for r0 in &points {
            for r1 in &points {
                let rows: Vec<f64> = r0.iter().chain(r1).map(|&c| c as f64 / grid as f64).collect();
                let ch = Channel::for_source(&spec, 1, 3, rows).unwrap();
                want = want.min(weighted_objective(&spec, &[ch], &a).unwrap());
            }
        }
        assert!((got - want).abs() < 1e-12);
    }

    #[test]
    fn descent_beats_oracle_when_seeded_with_it() {
        let spec = two_source_spec(0, 12);
        let mut rng = seeded(13);
        let a = Direction::random(&spec, &mut rng);
        let oracle = brute_force_oracle(&spec, &a, &[2, 2], 6).unwrap();
        let cfg = SearchConfig {
            restarts: 2,
            sweeps: 10,
            ..SearchConfig::default()
        };
        let res = multi_start(
            &spec,
            &a,
            &Permutation::identity(2),
            &cfg,
            1,
            core::slice::from_ref(&oracle.channels),
        )
        .unwrap();
        assert!(res.objective <= oracle.objective + 1e-9);
    }
}
