//! Problem definitions, test channels and the augmented joint distribution.
//!
//! Variable ids are fixed per problem with `M` sources:
//! `X_k -> k`, `S -> M`, `V -> M + 1`, `Z_k -> M + 2 + k` (0-based `k`).
//! Sources `k < J` are described losslessly; their auxiliary variable is
//! `X_k` itself and never gets an axis of its own.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use rand::Rng;

use crate::error::{Error, Result};
use crate::math;
use crate::pmf::{Alphabet, Axis, JointPmf, VarId, VarSet};
use crate::rng::uniform_simplex;

/// Row sums of a channel are accepted within this tolerance, then renormalised.
pub const ROW_TOL: f64 = 1e-9;

/// Mixture identity tolerance for reverse pairs.
pub const MIXTURE_TOL: f64 = 1e-9;

/// Sources are limited so that all variable ids fit in a [`VarSet`].
pub const MAX_SOURCES: usize = 20;

/// A bounded distortion measure `d(v, v̂)` with its own reconstruction alphabet.
#[derive(Clone, Debug, PartialEq)]
pub struct DistortionMeasure {
    recon: Alphabet,
    v_size: usize,
    table: Vec<f64>,
    max: f64,
}

impl DistortionMeasure {
    /// `table` is row-major `|V| x |V̂|`.
    pub fn new(v_size: usize, recon: Alphabet, table: Vec<f64>) -> Result<Self> {
        if table.len() != v_size * recon.size() {
            return Err(Error::Shape(format!(
                "distortion table for {} has {} entries, expected {}",
                recon.label(),
                table.len(),
                v_size * recon.size()
            )));
        }
        if let Some(bad) = table.iter().find(|d| !(**d >= 0.0) || !d.is_finite()) {
            return Err(Error::Probability(format!(
                "distortion entries must be finite and nonnegative, found {bad}"
            )));
        }
        let max = table.iter().copied().fold(0.0, f64::max);
        Ok(DistortionMeasure {
            recon,
            v_size,
            table,
            max,
        })
    }

    /// Hamming distortion on a common alphabet.
    pub fn hamming(v_size: usize, recon: Alphabet) -> Result<Self> {
        let n = recon.size();
        let table = (0..v_size * n)
            .map(|i| if i / n == i % n { 0.0 } else { 1.0 })
            .collect();
        Self::new(v_size, recon, table)
    }

    pub fn recon(&self) -> &Alphabet {
        &self.recon
    }

    pub fn recon_size(&self) -> usize {
        self.recon.size()
    }

    pub fn v_size(&self) -> usize {
        self.v_size
    }

    pub fn get(&self, v: usize, vhat: usize) -> f64 {
        self.table[v * self.recon.size() + vhat]
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    /// `d_max`, the largest table entry.
    pub fn max(&self) -> f64 {
        self.max
    }
}

/// A multiterminal problem: `M` sources of which the first `J` are lossless,
/// side information `S`, target `V`, and `L` distortion measures.
#[derive(Clone, Debug, PartialEq)]
pub struct ProblemSpec {
    lossless: usize,
    x_alphabets: Vec<Alphabet>,
    s_alphabet: Alphabet,
    v_alphabet: Alphabet,
    source: JointPmf,
    distortions: Vec<DistortionMeasure>,
    x_marginals: Vec<Vec<f64>>,
}

impl ProblemSpec {
    /// `source_probs` is row-major over `(X_1, ..., X_M, S, V)`.
    pub fn new(
        x_alphabets: Vec<Alphabet>,
        s_alphabet: Alphabet,
        v_alphabet: Alphabet,
        lossless: usize,
        source_probs: Vec<f64>,
        distortions: Vec<DistortionMeasure>,
    ) -> Result<Self> {
        let m = x_alphabets.len();
        if m == 0 || m > MAX_SOURCES {
            return Err(Error::Shape(format!("need 1..={MAX_SOURCES} sources, got {m}")));
        }
        if lossless > m {
            return Err(Error::Shape(format!("J = {lossless} exceeds M = {m}")));
        }
        let mut labels: Vec<&str> = x_alphabets.iter().map(Alphabet::label).collect();
        labels.push(s_alphabet.label());
        labels.push(v_alphabet.label());
        labels.extend(distortions.iter().map(|d| d.recon().label()));
        for (i, a) in labels.iter().enumerate() {
            if labels[..i].contains(a) {
                return Err(Error::Shape(format!("alphabet label {a} is not unique")));
            }
        }
        for d in &distortions {
            if d.v_size() != v_alphabet.size() {
                return Err(Error::AlphabetMismatch(format!(
                    "distortion {} expects |V| = {}, problem has {}",
                    d.recon().label(),
                    d.v_size(),
                    v_alphabet.size()
                )));
            }
        }
        let mut axes: Vec<Axis> = x_alphabets
            .iter()
            .enumerate()
            .map(|(k, a)| Axis::new(k as VarId, a.clone()))
            .collect();
        axes.push(Axis::new(m as VarId, s_alphabet.clone()));
        axes.push(Axis::new(m as VarId + 1, v_alphabet.clone()));
        let source = JointPmf::new(axes, source_probs)?;
        let x_marginals = (0..m)
            .map(|k| source.table(&[k as VarId]))
            .collect::<Result<Vec<_>>>()?;
        Ok(ProblemSpec {
            lossless,
            x_alphabets,
            s_alphabet,
            v_alphabet,
            source,
            distortions,
            x_marginals,
        })
    }

    /// `M`
    pub fn sources(&self) -> usize {
        self.x_alphabets.len()
    }

    /// `J`
    pub fn lossless(&self) -> usize {
        self.lossless
    }

    /// `L`
    pub fn distortion_count(&self) -> usize {
        self.distortions.len()
    }

    /// Sources that carry a test channel, `J..M`.
    pub fn channel_sources(&self) -> Range<usize> {
        self.lossless..self.sources()
    }

    pub fn x_alphabet(&self, k: usize) -> &Alphabet {
        &self.x_alphabets[k]
    }

    pub fn x_alphabets(&self) -> &[Alphabet] {
        &self.x_alphabets
    }

    pub fn s_alphabet(&self) -> &Alphabet {
        &self.s_alphabet
    }

    pub fn v_alphabet(&self) -> &Alphabet {
        &self.v_alphabet
    }

    pub fn source(&self) -> &JointPmf {
        &self.source
    }

    pub fn distortions(&self) -> &[DistortionMeasure] {
        &self.distortions
    }

    /// `p_k(x_k)`
    pub fn x_marginal(&self, k: usize) -> &[f64] {
        &self.x_marginals[k]
    }

    pub fn x_var(&self, k: usize) -> VarId {
        k as VarId
    }

    pub fn s_var(&self) -> VarId {
        self.sources() as VarId
    }

    pub fn v_var(&self) -> VarId {
        self.sources() as VarId + 1
    }

    /// The variable standing for `Z_k`: `X_k` itself when `k < J`.
    pub fn z_var(&self, k: usize) -> VarId {
        if k < self.lossless {
            self.x_var(k)
        } else {
            (self.sources() + 2 + k) as VarId
        }
    }

    /// `X_I` for a set of source indices.
    pub fn x_set(&self, sources: VarSet) -> VarSet {
        sources
    }

    /// `Z_I` for a set of source indices.
    pub fn z_set(&self, sources: VarSet) -> VarSet {
        sources.iter().map(|k| self.z_var(k as usize)).collect()
    }

    /// `{0, ..., M-1}` as a source set.
    pub fn all_sources(&self) -> VarSet {
        VarSet::from_bits((1u64 << self.sources()) - 1)
    }

    /// Source symbols of zero marginal probability, per source.
    pub fn zero_probability_symbols(&self, k: usize) -> Vec<usize> {
        self.x_marginals[k]
            .iter()
            .enumerate()
            .filter(|(_, &p)| p == 0.0)
            .map(|(x, _)| x)
            .collect()
    }

    /// Default label of the auxiliary alphabet for source `k`.
    pub fn z_label(&self, k: usize) -> String {
        format!("Z{}", k + 1)
    }

    pub(crate) fn check_channel_source(&self, k: usize) -> Result<()> {
        if !self.channel_sources().contains(&k) {
            return Err(Error::Index(format!(
                "source {k} has no test channel (channels exist for {}..{})",
                self.lossless,
                self.sources()
            )));
        }
        Ok(())
    }
}

/// A test channel `q(z | x)`, stored row-major `|X| x |Z|`.
#[derive(Clone, Debug, PartialEq)]
pub struct Channel {
    input: Alphabet,
    output: Alphabet,
    rows: Vec<f64>,
}

impl Channel {
    pub fn new(input: Alphabet, output: Alphabet, mut rows: Vec<f64>) -> Result<Self> {
        let (nx, nz) = (input.size(), output.size());
        if rows.len() != nx * nz {
            return Err(Error::Shape(format!(
                "channel has {} entries, expected {nx} x {nz}",
                rows.len()
            )));
        }
        if let Some(bad) = rows.iter().find(|q| !(**q >= 0.0) || !q.is_finite()) {
            return Err(Error::Probability(format!("invalid channel entry {bad}")));
        }
        for row in rows.chunks_mut(nz) {
            let s: f64 = row.iter().sum();
            if math::abs(s - 1.0) > ROW_TOL {
                return Err(Error::Probability(format!("channel row sums to {s}")));
            }
            for q in row {
                *q /= s;
            }
        }
        Ok(Channel { input, output, rows })
    }

    /// `Z = X` for source `k`.
    pub fn identity(spec: &ProblemSpec, k: usize) -> Self {
        let input = spec.x_alphabet(k).clone();
        let n = input.size();
        let rows = (0..n * n).map(|i| if i / n == i % n { 1.0 } else { 0.0 }).collect();
        let output = Alphabet::new(spec.z_label(k), n).expect("nonempty");
        Channel { input, output, rows }
    }

    /// A single-symbol output: `Z` carries no information.
    pub fn constant(spec: &ProblemSpec, k: usize) -> Self {
        let input = spec.x_alphabet(k).clone();
        let rows = vec![1.0; input.size()];
        let output = Alphabet::new(spec.z_label(k), 1).expect("nonempty");
        Channel { input, output, rows }
    }

    /// Rows drawn uniformly from the simplex over `z_size` symbols.
    pub fn random<R: Rng + ?Sized>(spec: &ProblemSpec, k: usize, z_size: usize, rng: &mut R) -> Self {
        let input = spec.x_alphabet(k).clone();
        let rows = (0..input.size()).flat_map(|_| uniform_simplex(rng, z_size)).collect();
        let output = Alphabet::new(spec.z_label(k), z_size).expect("nonempty");
        Channel { input, output, rows }
    }

    /// Builds a channel for source `k` from explicit rows.
    pub fn for_source(spec: &ProblemSpec, k: usize, z_size: usize, rows: Vec<f64>) -> Result<Self> {
        let output = Alphabet::new(spec.z_label(k), z_size)?;
        Self::new(spec.x_alphabet(k).clone(), output, rows)
    }

    pub fn input(&self) -> &Alphabet {
        &self.input
    }

    pub fn output(&self) -> &Alphabet {
        &self.output
    }

    pub fn input_size(&self) -> usize {
        self.input.size()
    }

    pub fn output_size(&self) -> usize {
        self.output.size()
    }

    pub fn rows(&self) -> &[f64] {
        &self.rows
    }

    pub fn row(&self, x: usize) -> &[f64] {
        let nz = self.output_size();
        &self.rows[x * nz..(x + 1) * nz]
    }

    pub fn prob(&self, x: usize, z: usize) -> f64 {
        self.rows[x * self.output_size() + z]
    }

    /// Relabels outputs: new symbol `perm[z]` takes old symbol `z`.
    pub fn permute_outputs(&self, perm: &[usize]) -> Result<Self> {
        let nz = self.output_size();
        if perm.len() != nz || !is_bijection(perm) {
            return Err(Error::Shape("output relabelling is not a bijection".into()));
        }
        let mut rows = vec![0.0; self.rows.len()];
        for x in 0..self.input_size() {
            for z in 0..nz {
                rows[x * nz + perm[z]] = self.prob(x, z);
            }
        }
        Ok(Channel {
            input: self.input.clone(),
            output: self.output.clone(),
            rows,
        })
    }
}

pub(crate) fn is_bijection(perm: &[usize]) -> bool {
    let mut seen = vec![false; perm.len()];
    perm.iter()
        .all(|&p| p < perm.len() && !core::mem::replace(&mut seen[p], true))
}

/// The joint of sources and auxiliaries, `p(x, s, v) · Π_{k ≥ J} q_k(z_k | x_k)`.
#[derive(Clone, Debug, PartialEq)]
pub struct AugmentedPmf {
    joint: JointPmf,
    sources: usize,
    lossless: usize,
    channels: Vec<Channel>,
}

impl AugmentedPmf {
    pub fn joint(&self) -> &JointPmf {
        &self.joint
    }

    pub fn channels(&self) -> &[Channel] {
        &self.channels
    }

    pub fn sources(&self) -> usize {
        self.sources
    }

    pub fn lossless(&self) -> usize {
        self.lossless
    }

    pub fn s_var(&self) -> VarId {
        self.sources as VarId
    }

    pub fn v_var(&self) -> VarId {
        self.sources as VarId + 1
    }

    pub fn z_var(&self, k: usize) -> VarId {
        if k < self.lossless {
            k as VarId
        } else {
            (self.sources + 2 + k) as VarId
        }
    }

    pub fn z_set(&self, sources: VarSet) -> VarSet {
        sources.iter().map(|k| self.z_var(k as usize)).collect()
    }

    pub fn all_sources(&self) -> VarSet {
        VarSet::from_bits((1u64 << self.sources) - 1)
    }

    /// Largest `I(Z_k; everything else | X_k)` over channel sources; zero up
    /// to rounding whenever the product form holds.
    pub fn factorization_defect(&self) -> Result<f64> {
        let all = self.joint.vars();
        let mut worst = 0.0f64;
        for k in self.lossless..self.sources {
            let z = VarSet::single(self.z_var(k));
            let x = VarSet::single(k as VarId);
            let rest = all.difference(z).difference(x);
            if rest.is_empty() {
                continue;
            }
            worst = worst.max(self.joint.cmi(z, rest, x)?);
        }
        Ok(worst)
    }
}

/// Checks channel count and input alphabets against the problem.
pub(crate) fn check_channels(spec: &ProblemSpec, channels: &[Channel]) -> Result<()> {
    let expected = spec.sources() - spec.lossless();
    if channels.len() != expected {
        return Err(Error::Shape(format!(
            "expected {expected} channels (sources {}..{}), got {}",
            spec.lossless() + 1,
            spec.sources(),
            channels.len()
        )));
    }
    for (c, k) in channels.iter().zip(spec.channel_sources()) {
        if c.input() != spec.x_alphabet(k) {
            return Err(Error::AlphabetMismatch(format!(
                "channel {} input is {}({}), source is {}({})",
                k + 1,
                c.input().label(),
                c.input_size(),
                spec.x_alphabet(k).label(),
                spec.x_alphabet(k).size()
            )));
        }
    }
    Ok(())
}

/// Joint of the source with the channels that are present; an absent entry
/// leaves its auxiliary out of the tensor. `channels` is indexed by `k - J`.
pub(crate) fn augment_joint(spec: &ProblemSpec, channels: &[Option<&Channel>]) -> Result<JointPmf> {
    let m = spec.sources();
    let src = spec.source();
    let mut axes: Vec<Axis> = src.axes().to_vec();
    let present: Vec<(usize, &Channel)> = channels
        .iter()
        .zip(spec.channel_sources())
        .filter_map(|(c, k)| c.map(|c| (k, c)))
        .collect();
    for &(k, c) in &present {
        axes.push(Axis::new(spec.z_var(k), c.output().clone()));
    }
    let z_sizes: Vec<usize> = present.iter().map(|(_, c)| c.output_size()).collect();
    let nz: usize = z_sizes.iter().product();
    let src_shape = src.shape();
    let mut probs = vec![0.0; src.probs().len() * nz];
    let mut digits = vec![0usize; src_shape.len()];
    let mut zd = vec![0usize; present.len()];
    for (s_idx, &p) in src.probs().iter().enumerate() {
        if p > 0.0 {
            zd.iter_mut().for_each(|d| *d = 0);
            for z_idx in 0..nz {
                let mut w = p;
                for (j, &(k, c)) in present.iter().enumerate() {
                    w *= c.prob(digits[k], zd[j]);
                }
                probs[s_idx * nz + z_idx] = w;
                for j in (0..zd.len()).rev() {
                    zd[j] += 1;
                    if zd[j] < z_sizes[j] {
                        break;
                    }
                    zd[j] = 0;
                }
            }
        }
        for ax in (0..src_shape.len()).rev() {
            digits[ax] += 1;
            if digits[ax] < src_shape[ax] {
                break;
            }
            digits[ax] = 0;
        }
    }
    debug_assert!(m + 2 <= axes.len());
    JointPmf::new(axes, probs)
}

/// Attaches test channels for sources `J..M` to the source distribution.
pub fn attach_channels(spec: &ProblemSpec, channels: &[Channel]) -> Result<AugmentedPmf> {
    check_channels(spec, channels)?;
    let opts: Vec<Option<&Channel>> = channels.iter().map(Some).collect();
    let joint = augment_joint(spec, &opts)?;
    Ok(AugmentedPmf {
        joint,
        sources: spec.sources(),
        lossless: spec.lossless(),
        channels: channels.to_vec(),
    })
}

/// The reverse parametrisation of a channel: weights `p'(z)` and columns
/// `q'(· | z)` on the source simplex, mixing back to `p_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct ReverseChannelPair {
    weights: Vec<f64>,
    columns: Vec<Vec<f64>>,
}

impl ReverseChannelPair {
    pub fn new(weights: Vec<f64>, columns: Vec<Vec<f64>>) -> Result<Self> {
        if weights.len() != columns.len() || weights.is_empty() {
            return Err(Error::Shape("one column per weight required".into()));
        }
        let nx = columns[0].len();
        for col in &columns {
            if col.len() != nx {
                return Err(Error::Shape("columns differ in length".into()));
            }
            check_simplex(col, "reverse column")?;
        }
        check_simplex(&weights, "reverse weights")?;
        Ok(ReverseChannelPair { weights, columns })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Symbols whose weight is exactly zero; their columns carry no meaning.
    pub fn zero_weight_symbols(&self) -> Vec<usize> {
        (0..self.len()).filter(|&z| self.weights[z] == 0.0).collect()
    }

    /// `Σ_z p'(z) q'(·|z)`
    pub fn mixture(&self) -> Vec<f64> {
        let nx = self.columns[0].len();
        let mut out = vec![0.0; nx];
        for (w, col) in self.weights.iter().zip(&self.columns) {
            for (o, t) in out.iter_mut().zip(col) {
                *o += w * t;
            }
        }
        out
    }

    /// `max_x |Σ_z p'(z) q'(x|z) - p(x)|`
    pub fn mixture_defect(&self, marginal: &[f64]) -> f64 {
        self.mixture()
            .iter()
            .zip(marginal)
            .map(|(a, b)| math::abs(a - b))
            .fold(0.0, f64::max)
    }
}

fn check_simplex(v: &[f64], what: &str) -> Result<()> {
    if let Some(bad) = v.iter().find(|x| !(**x >= 0.0) || !x.is_finite()) {
        return Err(Error::Probability(format!("{what} has entry {bad}")));
    }
    let s: f64 = v.iter().sum();
    if math::abs(s - 1.0) > MIXTURE_TOL {
        return Err(Error::Probability(format!("{what} sums to {s}")));
    }
    Ok(())
}

/// Bayes inversion `p_k(x) q(z|x) = p'(z) q'(x|z)`.
///
/// Output symbols of zero weight get a uniform column; see
/// [`ReverseChannelPair::zero_weight_symbols`].
pub fn forward_to_reverse(spec: &ProblemSpec, k: usize, q: &Channel) -> Result<ReverseChannelPair> {
    spec.check_channel_source(k)?;
    if q.input() != spec.x_alphabet(k) {
        return Err(Error::AlphabetMismatch(format!(
            "channel input differs from X{}",
            k + 1
        )));
    }
    let p = spec.x_marginal(k);
    let (nx, nz) = (q.input_size(), q.output_size());
    let mut weights = vec![0.0; nz];
    let mut columns = vec![vec![0.0; nx]; nz];
    for z in 0..nz {
        for x in 0..nx {
            let joint = p[x] * q.prob(x, z);
            weights[z] += joint;
            columns[z][x] = joint;
        }
        if weights[z] > 0.0 {
            let w = weights[z];
            columns[z].iter_mut().for_each(|t| *t /= w);
        } else {
            columns[z].iter_mut().for_each(|t| *t = 1.0 / nx as f64);
        }
    }
    ReverseChannelPair::new(weights, columns)
}

/// A forward channel recovered from a reverse pair.
#[derive(Clone, Debug, PartialEq)]
pub struct Inversion {
    pub channel: Channel,
    /// Source symbols with `p_k(x) = 0`; their rows are set uniform.
    pub undefined_rows: Vec<usize>,
    /// Reverse symbols dropped for having zero weight.
    pub dropped_symbols: Vec<usize>,
}

/// Weights at or below this are treated as zero and their symbols dropped.
pub const WEIGHT_FLOOR: f64 = 1e-15;

/// `q(z|x) = p'(z) q'(x|z) / p_k(x)`, dropping zero-weight symbols.
pub fn reverse_to_forward(spec: &ProblemSpec, k: usize, pair: &ReverseChannelPair) -> Result<Inversion> {
    spec.check_channel_source(k)?;
    let p = spec.x_marginal(k);
    let nx = p.len();
    if pair.columns()[0].len() != nx {
        return Err(Error::AlphabetMismatch(format!(
            "reverse columns have length {}, |X{}| = {nx}",
            pair.columns()[0].len(),
            k + 1
        )));
    }
    let defect = pair.mixture_defect(p);
    if defect > MIXTURE_TOL {
        return Err(Error::Probability(format!(
            "reverse pair violates the mixture identity by {defect:e}"
        )));
    }
    let kept: Vec<usize> = (0..pair.len()).filter(|&z| pair.weights()[z] > WEIGHT_FLOOR).collect();
    let dropped = (0..pair.len()).filter(|z| !kept.contains(z)).collect();
    let nz = kept.len();
    let mut rows = vec![0.0; nx * nz];
    let mut undefined_rows = Vec::new();
    for x in 0..nx {
        let row = &mut rows[x * nz..(x + 1) * nz];
        if p[x] > 0.0 {
            for (j, &z) in kept.iter().enumerate() {
                row[j] = pair.weights()[z] * pair.columns()[z][x] / p[x];
            }
        }
        let s: f64 = row.iter().sum();
        if p[x] > 0.0 && s > 0.0 {
            row.iter_mut().for_each(|q| *q /= s);
        } else {
            undefined_rows.push(x);
            row.iter_mut().for_each(|q| *q = 1.0 / nz as f64);
        }
    }
    let output = Alphabet::new(spec.z_label(k), nz)?;
    let channel = Channel::new(spec.x_alphabet(k).clone(), output, rows)?;
    Ok(Inversion {
        channel,
        undefined_rows,
        dropped_symbols: dropped,
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::rng::seeded;

    /// Two binary sources, binary side information, binary target `V = X_1`.
    pub(crate) fn two_source_spec(lossless: usize, seed: u64) -> ProblemSpec {
        let mut rng = seeded(seed);
        let m = 2;
        let xs = vec![Alphabet::new("X1", 2).unwrap(), Alphabet::new("X2", 2).unwrap()];
        let s = Alphabet::new("S", 2).unwrap();
        let v = Alphabet::new("V", 2).unwrap();
        let base = uniform_simplex(&mut rng, 8);
        let mut probs = vec![0.0; 16];
        for (i, &w) in base.iter().enumerate() {
            let x1 = i >> 2;
            // V tracks X1 with a little noise so every cell is reachable
            probs[i * 2 + x1] += 0.9 * w;
            probs[i * 2 + (1 - x1)] += 0.1 * w;
        }
        let d = DistortionMeasure::hamming(2, Alphabet::new("Vhat1", 2).unwrap()).unwrap();
        assert_eq!(m, xs.len());
        ProblemSpec::new(xs, s, v, lossless, probs, vec![d]).unwrap()
    }

    #[test]
    fn identity_channels_duplicate_axes() {
        let spec = two_source_spec(0, 1);
        let chans: Vec<Channel> = (0..2).map(|k| Channel::identity(&spec, k)).collect();
        let aug = attach_channels(&spec, &chans).unwrap();
        for k in 0..2 {
            let xz = aug.joint().table(&[k as VarId, aug.z_var(k)]).unwrap();
            let px = spec.x_marginal(k);
            assert!((xz[0] - px[0]).abs() < 1e-15 && (xz[3] - px[1]).abs() < 1e-15);
            assert_eq!(xz[1], 0.0);
            assert_eq!(xz[2], 0.0);
        }
        let back = aug.joint().marginalize(VarSet::from_bits(0b1111)).unwrap();
        assert_eq!(back.probs(), spec.source().probs());
    }

    #[test]
    fn constant_channels_carry_no_information() {
        let spec = two_source_spec(0, 2);
        let chans: Vec<Channel> = (0..2).map(|k| Channel::constant(&spec, k)).collect();
        let aug = attach_channels(&spec, &chans).unwrap();
        for k in 0..2 {
            let i = aug
                .joint()
                .cmi(VarSet::single(k as VarId), VarSet::single(aug.z_var(k)), VarSet::EMPTY)
                .unwrap();
            assert!(i.abs() < 1e-15);
        }
    }

    #[test]
    fn augmented_tensor_matches_nested_product() {
        let spec = two_source_spec(0, 3);
        let mut rng = seeded(4);
        let chans: Vec<Channel> = (0..2).map(|k| Channel::random(&spec, k, 2, &mut rng)).collect();
        let aug = attach_channels(&spec, &chans).unwrap();
        let src = spec.source();
        for x1 in 0..2 {
            for x2 in 0..2 {
                for s in 0..2 {
                    for v in 0..2 {
                        for z1 in 0..2 {
                            for z2 in 0..2 {
                                let want = src.prob(&[x1, x2, s, v]) * chans[0].prob(x1, z1) * chans[1].prob(x2, z2);
                                let got = aug.joint().prob(&[x1, x2, s, v, z1, z2]);
                                assert!((want - got).abs() < 1e-16);
                            }
                        }
                    }
                }
            }
        }
        assert!(aug.factorization_defect().unwrap() < 1e-10);
    }

    #[test]
    fn lossless_sources_get_no_axis() {
        let spec = two_source_spec(1, 5);
        let chans = vec![Channel::identity(&spec, 1)];
        let aug = attach_channels(&spec, &chans).unwrap();
        assert_eq!(aug.joint().axes().len(), 5);
        assert_eq!(aug.z_var(0), 0);
    }

    #[test]
    fn channel_alphabet_mismatch_is_rejected() {
        let spec = two_source_spec(0, 6);
        let bad = Channel::new(
            Alphabet::new("X1", 3).unwrap(),
            Alphabet::new("Z1", 1).unwrap(),
            vec![1.0; 3],
        )
        .unwrap();
        let chans = vec![bad, Channel::constant(&spec, 1)];
        assert!(matches!(
            attach_channels(&spec, &chans),
            Err(Error::AlphabetMismatch(_))
        ));
        assert!(attach_channels(&spec, &chans[1..]).is_err());
    }

    #[test]
    fn bayes_on_identity_and_constant() {
        let xs = vec![Alphabet::new("X1", 2).unwrap()];
        let spec = ProblemSpec::new(
            xs,
            Alphabet::new("S", 1).unwrap(),
            Alphabet::new("V", 1).unwrap(),
            0,
            vec![0.3, 0.7],
            vec![],
        )
        .unwrap();
        let pair = forward_to_reverse(&spec, 0, &Channel::identity(&spec, 0)).unwrap();
        assert_eq!(pair.weights(), &[0.3, 0.7]);
        assert_eq!(pair.columns(), &[vec![1.0, 0.0], vec![0.0, 1.0]]);

        let pair = forward_to_reverse(&spec, 0, &Channel::constant(&spec, 0)).unwrap();
        assert_eq!(pair.weights(), &[1.0]);
        assert_eq!(pair.columns(), &[vec![0.3, 0.7]]);

        let back = reverse_to_forward(&spec, 0, &pair).unwrap();
        assert_eq!(back.channel.rows(), &[1.0, 1.0]);
        let point = ReverseChannelPair::new(vec![0.3, 0.7], vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let back = reverse_to_forward(&spec, 0, &point).unwrap();
        assert_eq!(back.channel.rows(), Channel::identity(&spec, 0).rows());
    }

    #[test]
    fn random_pair_inverts_to_same_joint() {
        let spec = two_source_spec(0, 8);
        let mut rng = seeded(9);
        let p = spec.x_marginal(1);
        // build a valid pair from three random columns mixed to p
        let q = Channel::random(&spec, 1, 3, &mut rng);
        let pair = forward_to_reverse(&spec, 1, &q).unwrap();
        let inv = reverse_to_forward(&spec, 1, &pair).unwrap();
        for x in 0..2 {
            for z in 0..3 {
                let forward = p[x] * inv.channel.prob(x, z);
                let reverse = pair.weights()[z] * pair.columns()[z][x];
                assert!((forward - reverse).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn zero_probability_rows_are_flagged() {
        let xs = vec![Alphabet::new("X1", 3).unwrap()];
        let spec = ProblemSpec::new(
            xs,
            Alphabet::new("S", 1).unwrap(),
            Alphabet::new("V", 1).unwrap(),
            0,
            vec![0.5, 0.0, 0.5],
            vec![],
        )
        .unwrap();
        assert_eq!(spec.zero_probability_symbols(0), vec![1]);
        let pair = ReverseChannelPair::new(
            vec![0.5, 0.5, 0.0],
            vec![vec![1.0, 0.0, 0.0], vec![0.0, 0.0, 1.0], vec![0.0, 1.0, 0.0]],
        )
        .unwrap();
        let inv = reverse_to_forward(&spec, 0, &pair).unwrap();
        assert_eq!(inv.undefined_rows, vec![1]);
        assert_eq!(inv.dropped_symbols, vec![2]);
        assert_eq!(inv.channel.output_size(), 2);
        assert_eq!(inv.channel.row(1), &[0.5, 0.5]);
    }

    #[test]
    fn mixture_violation_is_rejected() {
        let spec = two_source_spec(0, 10);
        let pair = ReverseChannelPair::new(vec![1.0], vec![vec![1.0, 0.0]]).unwrap();
        assert!(reverse_to_forward(&spec, 0, &pair).is_err());
    }
}
