//! Optimal estimators and the per-channel functionals on `Δ_{X_k}`.
//!
//! Fix every test channel except `q_k`, and write `q_k` in reverse form
//! `(p'_k, q'_k)`. Each rate `R_i` (identity or any other source ordering) and
//! each distortion `D_l` is then an average `Σ_z p'_k(z) F(q'_k(·|z))` of a
//! functional `F` of a single point of the source simplex:
//!
//! * `Φ_ki = Φ⁽¹⁾_ki − Φ⁽²⁾_ki`, each a conditional entropy of a mixture,
//! * `Ψ_kl(t) = Σ_u min_v̂ Σ_{v,x} t(x) r(u, v | x) d_l(v, v̂)`,
//! * `Θ = Σ_i a_i Φ_ki + Σ_l a_{M+l} Ψ_kl`.
//!
//! The conditionals `r(· | x_k)` are computed once per [`FunctionalContext`]
//! from the frozen channels.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::augment::{augment_joint, check_channels, AugmentedPmf, Channel, DistortionMeasure, ProblemSpec};
use crate::error::{Error, Result};
use crate::forward_to_reverse;
use crate::math;
use crate::optimize::{weighted_objective, Direction};
use crate::pmf::{JointPmf, VarId, VarSet};
use crate::region::Permutation;

/// Tolerance on the total mass of a simplex point.
pub const SIMPLEX_TOL: f64 = 1e-12;

/// A reconstruction rule `ψ_l(x_{<J}, z_{≥J}, s)`, tabulated.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Estimator {
    vars: Vec<VarId>,
    sizes: Vec<usize>,
    choice: Vec<usize>,
    recon_size: usize,
}

impl Estimator {
    /// `choice` is indexed row-major over `vars` (last variable fastest).
    pub fn new(vars: Vec<VarId>, sizes: Vec<usize>, choice: Vec<usize>, recon_size: usize) -> Result<Self> {
        if vars.len() != sizes.len() {
            return Err(Error::Shape("one size per conditioning variable required".into()));
        }
        let cells: usize = sizes.iter().product();
        if choice.len() != cells {
            return Err(Error::Shape(format!(
                "estimator has {} entries, expected {cells}",
                choice.len()
            )));
        }
        if let Some(bad) = choice.iter().find(|&&c| c >= recon_size) {
            return Err(Error::Index(format!("reconstruction symbol {bad} out of range")));
        }
        Ok(Estimator {
            vars,
            sizes,
            choice,
            recon_size,
        })
    }

    /// The estimator that ignores its input.
    pub fn constant(aug: &AugmentedPmf, measure: &DistortionMeasure, vhat: usize) -> Result<Self> {
        let vars = estimator_vars(aug);
        let sizes = sizes_of(aug.joint(), &vars)?;
        let cells = sizes.iter().product();
        Self::new(vars, sizes, vec![vhat; cells], measure.recon_size())
    }

    /// Conditioning variables in table order: `Z_1..Z_M` (lossless ones are
    /// the sources themselves), then `S`.
    pub fn vars(&self) -> &[VarId] {
        &self.vars
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn choices(&self) -> &[usize] {
        &self.choice
    }

    pub fn len(&self) -> usize {
        self.choice.len()
    }

    pub fn is_empty(&self) -> bool {
        self.choice.is_empty()
    }

    pub fn recon_size(&self) -> usize {
        self.recon_size
    }

    /// `E d(V, ψ(U))` under the augmented joint.
    pub fn expected_distortion(&self, aug: &AugmentedPmf, measure: &DistortionMeasure) -> Result<f64> {
        if self.vars != estimator_vars(aug) || self.recon_size != measure.recon_size() {
            return Err(Error::Shape("estimator does not match the problem".into()));
        }
        let (table, nv) = uv_table(aug, measure)?;
        Ok(table
            .chunks(nv)
            .zip(&self.choice)
            .map(|(row, &c)| row.iter().enumerate().map(|(v, p)| p * measure.get(v, c)).sum::<f64>())
            .sum())
    }
}

fn estimator_vars(aug: &AugmentedPmf) -> Vec<VarId> {
    let mut vars: Vec<VarId> = (0..aug.sources()).map(|k| aug.z_var(k)).collect();
    vars.push(aug.s_var());
    vars
}

fn sizes_of(joint: &JointPmf, vars: &[VarId]) -> Result<Vec<usize>> {
    vars.iter().map(|&v| joint.axis_size(v)).collect()
}

fn uv_table(aug: &AugmentedPmf, measure: &DistortionMeasure) -> Result<(Vec<f64>, usize)> {
    let nv = aug.joint().axis_size(aug.v_var())?;
    if nv != measure.v_size() {
        return Err(Error::AlphabetMismatch(format!(
            "distortion measure expects |V| = {}, joint has {nv}",
            measure.v_size()
        )));
    }
    let mut order = estimator_vars(aug);
    order.push(aug.v_var());
    Ok((aug.joint().table(&order)?, nv))
}

/// Index of the smallest value, lowest index on ties.
fn argmin(values: impl Iterator<Item = f64>) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, v) in values.enumerate() {
        if v < best.1 {
            best = (i, v);
        }
    }
    best
}

/// `D_l = min_ψ E d_l(V, ψ(X_{<J}, Z_{≥J}, S))` together with the minimizing table.
///
/// For each conditioning tuple the estimator picks the lowest-index `v̂`
/// minimizing `Σ_v p(u, v) d(v, v̂)`; tuples of zero probability map to 0.
pub fn distortion_component(aug: &AugmentedPmf, measure: &DistortionMeasure) -> Result<(f64, Estimator)> {
    let (table, nv) = uv_table(aug, measure)?;
    let nr = measure.recon_size();
    let mut total = 0.0;
    let choice = table
        .chunks(nv)
        .map(|row| {
            if row.iter().all(|&p| p == 0.0) {
                return 0;
            }
            let (c, cost) = argmin((0..nr).map(|vh| row.iter().enumerate().map(|(v, p)| p * measure.get(v, vh)).sum()));
            total += cost;
            c
        })
        .collect();
    let vars = estimator_vars(aug);
    let sizes = sizes_of(aug.joint(), &vars)?;
    Ok((total, Estimator::new(vars, sizes, choice, nr)?))
}

/// Conditionals `r(y, u | x_k)` stored `[x_k][y][u]`; rows with `p(x_k) = 0`
/// are zero.
#[derive(Clone, Debug)]
struct MixTable {
    nx: usize,
    ny: usize,
    nu: usize,
    r: Vec<f64>,
}

impl MixTable {
    /// `target = None` is the copy `Y = X_k`.
    fn build(base: &JointPmf, xk: VarId, target: Option<VarId>, u: VarSet) -> Result<Self> {
        let nx = base.axis_size(xk)?;
        let px = base.table(&[xk])?;
        let mut order = vec![xk];
        order.extend(target);
        order.extend(u.iter());
        let joint = base.table(&order)?;
        let nu: usize = u.iter().map(|v| base.axis_size(v)).product::<Result<usize>>()?;
        let ny = match target {
            Some(y) => base.axis_size(y)?,
            None => nx,
        };
        let mut r = vec![0.0; nx * ny * nu];
        for x in 0..nx {
            if px[x] == 0.0 {
                continue;
            }
            match target {
                Some(_) => {
                    for (dst, src) in r[x * ny * nu..(x + 1) * ny * nu]
                        .iter_mut()
                        .zip(&joint[x * ny * nu..(x + 1) * ny * nu])
                    {
                        *dst = src / px[x];
                    }
                }
                None => {
                    for j in 0..nu {
                        r[(x * ny + x) * nu + j] = joint[x * nu + j] / px[x];
                    }
                }
            }
        }
        Ok(MixTable { nx, ny, nu, r })
    }

    /// `H(Y | U)` under `t(x_k) r(y, u | x_k)`.
    fn entropy(&self, t: &[f64]) -> f64 {
        let block = self.ny * self.nu;
        let mut a = vec![0.0; block];
        for x in 0..self.nx {
            if t[x] == 0.0 {
                continue;
            }
            for (acc, r) in a.iter_mut().zip(&self.r[x * block..(x + 1) * block]) {
                *acc += t[x] * r;
            }
        }
        let mut b = vec![0.0; self.nu];
        for row in a.chunks(self.nu) {
            for (acc, v) in b.iter_mut().zip(row) {
                *acc += v;
            }
        }
        let mut h = 0.0;
        for row in a.chunks(self.nu) {
            for (j, &v) in row.iter().enumerate() {
                if v > 0.0 {
                    h -= v * math::log2(v / b[j]);
                }
            }
        }
        h.max(0.0)
    }
}

#[derive(Clone, Debug)]
enum Part {
    Zero,
    Constant(f64),
    Mix(MixTable),
}

impl Part {
    fn eval(&self, t: &[f64]) -> f64 {
        match self {
            Part::Zero => 0.0,
            Part::Constant(c) => *c,
            Part::Mix(m) => m.entropy(t),
        }
    }
}

#[derive(Clone, Debug)]
struct RateTerm {
    first: Part,
    second: Part,
    /// The source precedes `k` in the ordering; its rate does not depend on `q_k`.
    fixed: bool,
}

/// `Ψ_kl` data: `r(u, v | x_k)` stored `[x_k][u][v]`.
#[derive(Clone, Debug)]
struct DistortionTerm {
    nx: usize,
    nu: usize,
    nv: usize,
    r: Vec<f64>,
    measure: DistortionMeasure,
}

impl DistortionTerm {
    fn eval(&self, t: &[f64]) -> f64 {
        let block = self.nu * self.nv;
        let mut a = vec![0.0; block];
        for x in 0..self.nx {
            if t[x] == 0.0 {
                continue;
            }
            for (acc, r) in a.iter_mut().zip(&self.r[x * block..(x + 1) * block]) {
                *acc += t[x] * r;
            }
        }
        let nr = self.measure.recon_size();
        a.chunks(self.nv)
            .filter(|row| row.iter().any(|&p| p > 0.0))
            .map(|row| {
                argmin((0..nr).map(|vh| row.iter().enumerate().map(|(v, p)| p * self.measure.get(v, vh)).sum())).1
            })
            .sum()
    }
}

/// Immutable snapshot of the frozen channels around source `k`.
#[derive(Clone, Debug)]
pub struct FunctionalContext {
    k: usize,
    lossless: usize,
    sources: usize,
    order: Permutation,
    marginal: Vec<f64>,
    rates: Vec<RateTerm>,
    distortions: Vec<DistortionTerm>,
}

impl FunctionalContext {
    /// Functionals for the identity ordering of rates.
    pub fn new(spec: &ProblemSpec, channels: &[Channel], k: usize) -> Result<Self> {
        Self::with_order(spec, channels, k, &Permutation::identity(spec.sources()))
    }

    /// Functionals for the corner rates of ordering `order`. The entry of
    /// `channels` for source `k` is ignored.
    pub fn with_order(spec: &ProblemSpec, channels: &[Channel], k: usize, order: &Permutation) -> Result<Self> {
        spec.check_channel_source(k)?;
        check_channels(spec, channels)?;
        let m = spec.sources();
        if order.len() != m {
            return Err(Error::Shape(format!("ordering of {} sources, M = {m}", order.len())));
        }
        let j = spec.lossless();
        let opts: Vec<Option<&Channel>> = channels
            .iter()
            .zip(spec.channel_sources())
            .map(|(c, kk)| if kk == k { None } else { Some(c) })
            .collect();
        let base = augment_joint(spec, &opts)?;
        let xk = spec.x_var(k);
        let zk = spec.z_var(k);
        let s = VarSet::single(spec.s_var());
        let pos_k = order.position(k);

        let mut rates = Vec::with_capacity(m);
        for i in 0..m {
            let xi = VarSet::single(spec.x_var(i));
            let cond = spec.z_set(order.predecessors(i)).union(s);
            let pos_i = order.position(i);
            let term = if pos_i < pos_k {
                let zi = VarSet::single(spec.z_var(i));
                RateTerm {
                    first: Part::Constant(base.information(xi, zi, cond)?),
                    second: Part::Zero,
                    fixed: true,
                }
            } else if i == k {
                RateTerm {
                    first: Part::Constant(base.entropy(xi, cond)?),
                    second: Part::Mix(MixTable::build(&base, xk, None, cond)?),
                    fixed: false,
                }
            } else {
                let u = cond.without(zk);
                let second = if i < j {
                    Part::Zero
                } else {
                    Part::Mix(MixTable::build(&base, xk, Some(spec.x_var(i)), u.with(spec.z_var(i)))?)
                };
                RateTerm {
                    first: Part::Mix(MixTable::build(&base, xk, Some(spec.x_var(i)), u)?),
                    second,
                    fixed: false,
                }
            };
            rates.push(term);
        }

        let mut u_vars: Vec<VarId> = (0..m).filter(|&i| i != k).map(|i| spec.z_var(i)).collect();
        u_vars.push(spec.s_var());
        let nx = spec.x_alphabet(k).size();
        let nv = spec.v_alphabet().size();
        let nu: usize = u_vars.iter().map(|&v| base.axis_size(v)).product::<Result<usize>>()?;
        let px = spec.x_marginal(k);
        let mut order_vars = vec![xk];
        order_vars.extend(&u_vars);
        order_vars.push(spec.v_var());
        let joint = base.table(&order_vars)?;
        let mut r = vec![0.0; joint.len()];
        for x in 0..nx {
            if px[x] > 0.0 {
                let block = nu * nv;
                for (dst, src) in r[x * block..(x + 1) * block]
                    .iter_mut()
                    .zip(&joint[x * block..(x + 1) * block])
                {
                    *dst = src / px[x];
                }
            }
        }
        let distortions = spec
            .distortions()
            .iter()
            .map(|d| DistortionTerm {
                nx,
                nu,
                nv,
                r: r.clone(),
                measure: d.clone(),
            })
            .collect();

        Ok(FunctionalContext {
            k,
            lossless: j,
            sources: m,
            order: order.clone(),
            marginal: px.to_vec(),
            rates,
            distortions,
        })
    }

    pub fn source(&self) -> usize {
        self.k
    }

    pub fn order(&self) -> &Permutation {
        &self.order
    }

    /// `p_k`, the point every reverse pair must mix to.
    pub fn marginal(&self) -> &[f64] {
        &self.marginal
    }

    pub fn distortion_count(&self) -> usize {
        self.distortions.len()
    }

    fn check_point(&self, t: &[f64]) -> Result<()> {
        if t.len() != self.marginal.len() {
            return Err(Error::Shape(format!(
                "simplex point has {} entries, |X{}| = {}",
                t.len(),
                self.k + 1,
                self.marginal.len()
            )));
        }
        if t.iter().any(|v| !(*v >= 0.0)) || math::abs(t.iter().sum::<f64>() - 1.0) > SIMPLEX_TOL * t.len() as f64 {
            return Err(Error::Probability(format!("{t:?} is not a probability vector")));
        }
        Ok(())
    }

    fn rate_term(&self, i: usize) -> Result<&RateTerm> {
        let term = self
            .rates
            .get(i)
            .ok_or_else(|| Error::Index(format!("source {i} out of range")))?;
        if term.fixed {
            return Err(Error::Index(format!(
                "rate of source {} precedes source {} and does not depend on its channel",
                i + 1,
                self.k + 1
            )));
        }
        Ok(term)
    }

    /// `Φ⁽¹⁾_ki(t)`
    pub fn phi1(&self, i: usize, t: &[f64]) -> Result<f64> {
        self.check_point(t)?;
        Ok(self.rate_term(i)?.first.eval(t))
    }

    /// `Φ⁽²⁾_ki(t)`
    pub fn phi2(&self, i: usize, t: &[f64]) -> Result<f64> {
        self.check_point(t)?;
        Ok(self.rate_term(i)?.second.eval(t))
    }

    /// `Φ_ki(t)`; an error for sources placed before `k`.
    pub fn phi(&self, i: usize, t: &[f64]) -> Result<f64> {
        self.check_point(t)?;
        let term = self.rate_term(i)?;
        Ok(term.first.eval(t) - term.second.eval(t))
    }

    /// Rate of source `i` as a functional of `t`; constant when `i` precedes `k`.
    pub fn rate(&self, i: usize, t: &[f64]) -> Result<f64> {
        self.check_point(t)?;
        let term = self
            .rates
            .get(i)
            .ok_or_else(|| Error::Index(format!("source {i} out of range")))?;
        Ok(term.first.eval(t) - term.second.eval(t))
    }

    /// `Ψ_kl(t)`
    pub fn psi(&self, l: usize, t: &[f64]) -> Result<f64> {
        self.check_point(t)?;
        let term = self
            .distortions
            .get(l)
            .ok_or_else(|| Error::Index(format!("distortion {l} out of range")))?;
        Ok(term.eval(t))
    }

    /// `Θ(t)`, including the `q_k`-independent rates of earlier sources so
    /// that `Σ_z p'(z) Θ(q'(·|z))` is the full weighted objective.
    pub fn theta(&self, a: &Direction, t: &[f64]) -> Result<f64> {
        self.check_point(t)?;
        self.check_direction(a)?;
        Ok(self.theta_unchecked(a, t))
    }

    pub(crate) fn check_direction(&self, a: &Direction) -> Result<()> {
        if a.sources() != self.sources
            || a.lossless() != self.lossless
            || a.distortion_count() != self.distortions.len()
        {
            return Err(Error::InadmissibleDirection(
                "direction does not match the problem dimensions".into(),
            ));
        }
        Ok(())
    }

    pub(crate) fn theta_unchecked(&self, a: &Direction, t: &[f64]) -> f64 {
        let mut total = 0.0;
        for i in self.lossless..self.sources {
            let w = a.rate_weight(i);
            if w != 0.0 {
                let term = &self.rates[i];
                total += w * (term.first.eval(t) - term.second.eval(t));
            }
        }
        for (l, term) in self.distortions.iter().enumerate() {
            let w = a.distortion_weight(l);
            if w != 0.0 {
                total += w * term.eval(t);
            }
        }
        total
    }

    /// `Σ_z p'(z) Θ(q'(·|z))`
    pub fn mixture_objective(&self, a: &Direction, weights: &[f64], columns: &[Vec<f64>]) -> Result<f64> {
        self.check_direction(a)?;
        let mut total = 0.0;
        for (w, col) in weights.iter().zip(columns) {
            if *w > 0.0 {
                self.check_point(col)?;
                total += w * self.theta_unchecked(a, col);
            }
        }
        Ok(total)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecompositionEntry {
    pub source: usize,
    /// `Σ_z p'(z) Θ(q'(·|z))`
    pub functional: f64,
    /// The objective recomputed from the augmented joint.
    pub direct: f64,
}

impl DecompositionEntry {
    pub fn residual(&self) -> f64 {
        math::abs(self.functional - self.direct)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecompositionReport {
    pub tol: f64,
    pub entries: Vec<DecompositionEntry>,
}

impl DecompositionReport {
    pub fn passed(&self) -> bool {
        self.entries.iter().all(|e| e.residual() <= self.tol)
    }

    pub fn max_residual(&self) -> f64 {
        self.entries.iter().map(|e| e.residual()).fold(0.0, f64::max)
    }

    pub fn describe_failures(&self) -> Vec<String> {
        self.entries
            .iter()
            .filter(|e| e.residual() > self.tol)
            .map(|e| {
                format!(
                    "source {}: functional {:.15e} vs direct {:.15e}",
                    e.source + 1,
                    e.functional,
                    e.direct
                )
            })
            .collect()
    }
}

/// Compares, for every channel source `k`, the `p'_k`-weighted functional
/// path with the direct evaluation of the weighted objective.
pub fn verify_linear_decomposition(
    spec: &ProblemSpec,
    channels: &[Channel],
    a: &Direction,
    tol: f64,
) -> Result<DecompositionReport> {
    let direct = weighted_objective(spec, channels, a)?;
    let entries = spec
        .channel_sources()
        .map(|k| {
            let ctx = FunctionalContext::new(spec, channels, k)?;
            let pair = forward_to_reverse(spec, k, &channels[k - spec.lossless()])?;
            let functional = ctx.mixture_objective(a, pair.weights(), pair.columns())?;
            Ok(DecompositionEntry {
                source: k,
                functional,
                direct,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DecompositionReport { tol, entries })
}
