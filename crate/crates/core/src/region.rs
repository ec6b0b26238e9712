//! The rate region of a fixed set of test channels.
//!
//! For channels fixed, a rate vector `R` is admissible iff for every nonempty
//! `I ⊆ {1..M}`
//!
//! ```text
//! I(X_I; Z_I | Z_{I^c}, S) <= Σ_{i ∈ I} R_i .
//! ```
//!
//! The left-hand sides form a contra-polymatroid, so the extreme points are
//! the `M!` greedy corners `R_{π(i)} = I(X_{π(i)}; Z_{π(i)} | Z_{π(1..i-1)}, S)`,
//! one per ordering of the sources. This module evaluates the constraints,
//! enumerates the corners and checks the chain-rule identities the corner
//! structure rests on.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Index;

use rand::Rng;

use crate::augment::{is_bijection, AugmentedPmf};
use crate::error::{Error, Result};
use crate::math;
use crate::pmf::{VarId, VarSet};
use crate::rng::seeded;

/// Default tolerance (bits) for calling a constraint active.
pub const ACTIVE_TOL: f64 = 1e-9;

/// Full corner enumeration is refused above this many sources.
pub const MAX_ENUMERATED_SOURCES: usize = 6;

/// Default threshold below which a dependence is treated as an extraneous
/// Markov chain.
pub const NONDEGENERACY_THRESHOLD: f64 = 1e-7;

/// Rates in bits per source symbol.
#[derive(Clone, Debug, PartialEq)]
pub struct RateVector(Vec<f64>);

impl RateVector {
    pub fn new(rates: Vec<f64>) -> Result<Self> {
        if let Some(bad) = rates.iter().find(|r| !(**r >= 0.0) || !r.is_finite()) {
            return Err(Error::Probability(format!("rate {bad} is not a nonnegative number")));
        }
        Ok(RateVector(rates))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn linf_distance(&self, other: &RateVector) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| math::abs(a - b))
            .fold(0.0, f64::max)
    }
}

impl Index<usize> for RateVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// An ordering of the sources; `order[i]` is the source placed at position `i`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Permutation(Vec<usize>);

impl Permutation {
    pub fn new(order: Vec<usize>) -> Result<Self> {
        if !is_bijection(&order) {
            return Err(Error::Shape(format!("{order:?} is not a permutation")));
        }
        Ok(Permutation(order))
    }

    pub fn identity(m: usize) -> Self {
        Permutation((0..m).collect())
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_identity(&self) -> bool {
        self.0.iter().enumerate().all(|(i, &k)| i == k)
    }

    /// Position of source `k` in the ordering.
    pub fn position(&self, k: usize) -> usize {
        self.0.iter().position(|&s| s == k).expect("source in permutation")
    }

    /// Sources placed strictly before source `k`.
    pub fn predecessors(&self, k: usize) -> VarSet {
        self.0[..self.position(k)].iter().map(|&s| s as VarId).collect()
    }

    /// All `m!` orderings in lexicographic order.
    pub fn all(m: usize) -> Vec<Permutation> {
        let mut current: Vec<usize> = (0..m).collect();
        let mut out = vec![Permutation(current.clone())];
        while next_permutation(&mut current) {
            out.push(Permutation(current.clone()));
        }
        out
    }
}

fn next_permutation(v: &mut [usize]) -> bool {
    if v.len() < 2 {
        return false;
    }
    let mut i = v.len() - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = v.len() - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

/// `I(X_xs; Z_zs | Z_cond, S)` with lossless sources standing for their own `Z`.
fn info(aug: &AugmentedPmf, xs: VarSet, zs: VarSet, cond: VarSet) -> Result<f64> {
    let given = aug.z_set(cond).with(aug.s_var());
    aug.joint().information(xs, aug.z_set(zs), given)
}

/// `I(Z_a; Z_b | Z_cond, S)`
fn z_info(aug: &AugmentedPmf, a: VarSet, b: VarSet, cond: VarSet) -> Result<f64> {
    let given = aug.z_set(cond).with(aug.s_var());
    aug.joint().information(aug.z_set(a), aug.z_set(b), given)
}

fn check_subset(aug: &AugmentedPmf, subset: VarSet) -> Result<()> {
    if subset.is_empty() {
        return Err(Error::EmptySet("rate constraint subset"));
    }
    if !subset.is_subset(aug.all_sources()) {
        return Err(Error::Index(format!("{subset:?} is not a set of sources")));
    }
    Ok(())
}

/// Left-hand side `I(X_I; Z_I | Z_{I^c}, S)` of the constraint for `I`.
pub fn rate_lhs(aug: &AugmentedPmf, subset: VarSet) -> Result<f64> {
    check_subset(aug, subset)?;
    let complement = aug.all_sources().difference(subset);
    info(aug, subset, subset, complement)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConstraintEntry {
    pub subset: VarSet,
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs - lhs`
    pub slack: f64,
    pub active: bool,
}

/// One entry per nonempty subset, in bitmask order.
#[derive(Clone, Debug, PartialEq)]
pub struct ConstraintReport {
    pub entries: Vec<ConstraintEntry>,
    pub tol: f64,
}

impl ConstraintReport {
    pub fn is_member(&self) -> bool {
        self.entries.iter().all(|e| e.slack >= -self.tol)
    }

    pub fn active_subsets(&self) -> Vec<VarSet> {
        self.entries.iter().filter(|e| e.active).map(|e| e.subset).collect()
    }

    pub fn worst_slack(&self) -> f64 {
        self.entries.iter().map(|e| e.slack).fold(f64::INFINITY, f64::min)
    }
}

/// Evaluates every constraint at `rates`; active means `|slack| <= tol`.
pub fn membership(aug: &AugmentedPmf, rates: &RateVector, tol: f64) -> Result<ConstraintReport> {
    let m = aug.sources();
    if rates.len() != m {
        return Err(Error::Shape(format!(
            "rate vector has {} entries, M = {m}",
            rates.len()
        )));
    }
    let entries = (1..1u64 << m)
        .map(|bits| {
            let subset = VarSet::from_bits(bits);
            let lhs = rate_lhs(aug, subset)?;
            let rhs: f64 = subset.iter().map(|i| rates[i as usize]).sum();
            let slack = rhs - lhs;
            Ok(ConstraintEntry {
                subset,
                lhs,
                rhs,
                slack,
                active: math::abs(slack) <= tol,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ConstraintReport { entries, tol })
}

/// The greedy corner for an ordering of the sources.
pub fn corner_point(aug: &AugmentedPmf, perm: &Permutation) -> Result<RateVector> {
    let m = aug.sources();
    if perm.len() != m {
        return Err(Error::Shape(format!("permutation of {} sources, M = {m}", perm.len())));
    }
    let mut rates = vec![0.0; m];
    let mut before = VarSet::EMPTY;
    for &k in perm.as_slice() {
        let single = VarSet::single(k as VarId);
        rates[k] = info(aug, single, single, before)?;
        before = before.with(k as VarId);
    }
    RateVector::new(rates)
}

/// The `M!` corners together with distinctness statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct ExtremePoints {
    /// Corners in lexicographic permutation order.
    pub corners: Vec<(Permutation, RateVector)>,
    /// Number of corners not within `ACTIVE_TOL` (L∞) of an earlier one.
    pub distinct: usize,
    /// Smallest pairwise L∞ distance (infinite for a single corner).
    pub min_gap: f64,
}

pub fn enumerate_extreme_points(aug: &AugmentedPmf) -> Result<ExtremePoints> {
    let m = aug.sources();
    if m > MAX_ENUMERATED_SOURCES {
        return Err(Error::TooLarge(format!(
            "{m}! corners requested; enumeration is limited to M <= {MAX_ENUMERATED_SOURCES}"
        )));
    }
    let corners = Permutation::all(m)
        .into_iter()
        .map(|p| corner_point(aug, &p).map(|r| (p, r)))
        .collect::<Result<Vec<_>>>()?;
    let mut min_gap = f64::INFINITY;
    let mut distinct = 0;
    for (i, (_, r)) in corners.iter().enumerate() {
        let mut fresh = true;
        for (_, earlier) in &corners[..i] {
            let gap = r.linf_distance(earlier);
            min_gap = min_gap.min(gap);
            if gap <= ACTIVE_TOL {
                fresh = false;
            }
        }
        if fresh {
            distinct += 1;
        }
    }
    Ok(ExtremePoints {
        corners,
        distinct,
        min_gap,
    })
}

/// True iff the sets are totally ordered by inclusion.
pub fn is_chain(sets: &[VarSet]) -> bool {
    let mut sorted = sets.to_vec();
    sorted.sort_by_key(|s| s.len());
    sorted.windows(2).all(|w| w[0].is_subset(w[1]))
}

/// Whether the constraints active at a member rate vector are nested.
pub fn verify_noncrossing(aug: &AugmentedPmf, rates: &RateVector, tol: f64) -> Result<bool> {
    let report = membership(aug, rates, tol)?;
    if !report.is_member() {
        return Err(Error::NotMember {
            worst_slack: report.worst_slack(),
        });
    }
    Ok(is_chain(&report.active_subsets()))
}

/// A random member of the region: a Dirichlet mixture of one to three
/// corners, raised on a random set of coordinates half of the time. Small
/// mixtures land on low-dimensional faces, where several constraints are
/// active together.
pub fn random_member<R: Rng + ?Sized>(extreme: &ExtremePoints, rng: &mut R) -> Result<RateVector> {
    let n = extreme.corners.len();
    if n == 0 {
        return Err(Error::Shape("no corners to mix".into()));
    }
    let m = extreme.corners[0].1.len();
    let picks = rng.gen_range(1..=n.min(3));
    let weights = crate::rng::uniform_simplex(rng, picks);
    let mut rates = vec![0.0; m];
    for w in weights {
        let (_, corner) = &extreme.corners[rng.gen_range(0..n)];
        for (r, c) in rates.iter_mut().zip(corner.as_slice()) {
            *r += w * c;
        }
    }
    if rng.gen_bool(0.5) {
        for r in rates.iter_mut() {
            if rng.gen_bool(0.5) {
                *r += rng.gen_range(0.0..0.5);
            }
        }
    }
    RateVector::new(rates)
}

/// A dependence that should be strictly positive but is not.
#[derive(Clone, Debug, PartialEq)]
pub struct Degeneracy {
    pub left: VarSet,
    pub right: VarSet,
    pub given: VarSet,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NondegeneracyReport {
    pub checked: usize,
    pub threshold: f64,
    /// Smallest `I(Z_A; Z_B | Z_C, S)` seen.
    pub min_value: f64,
    pub violations: Vec<Degeneracy>,
}

impl NondegeneracyReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks `I(Z_A; Z_B | Z_C, S) >= threshold` for all disjoint `A, B, C`
/// with `A, B` nonempty (`A` before `B` in bitmask order).
///
/// These are the dependences whose vanishing would merge corners or let two
/// crossing constraints be active together.
pub fn nondegeneracy_preflight(aug: &AugmentedPmf, threshold: f64) -> Result<NondegeneracyReport> {
    let m = aug.sources();
    if m > MAX_ENUMERATED_SOURCES {
        return Err(Error::TooLarge(format!(
            "preflight is limited to M <= {MAX_ENUMERATED_SOURCES}"
        )));
    }
    let all = aug.all_sources().bits();
    let mut report = NondegeneracyReport {
        checked: 0,
        threshold,
        min_value: f64::INFINITY,
        violations: Vec::new(),
    };
    for a in 1..=all {
        for b in (a + 1)..=all {
            if a & b != 0 {
                continue;
            }
            let rest = all & !(a | b);
            // every subset of the remaining sources as conditioning
            let mut c = rest;
            loop {
                let (left, right, given) = (VarSet::from_bits(a), VarSet::from_bits(b), VarSet::from_bits(c));
                let value = z_info(aug, left, right, given)?;
                report.checked += 1;
                report.min_value = report.min_value.min(value);
                if value < threshold {
                    report.violations.push(Degeneracy {
                        left,
                        right,
                        given,
                        value,
                    });
                }
                if c == 0 {
                    break;
                }
                c = (c - 1) & rest;
            }
        }
    }
    Ok(report)
}

/// The chain-rule identities (and one inequality) behind the corner structure.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ChainIdentity {
    /// `I(X_I;Z_I|Z_{(I∪I')^c},S) = I(X_I;Z_I|Z_{I^c},S) + I(Z_I;Z_{I'}|Z_{(I∪I')^c},S)`
    ConditioningSplit,
    /// `I(X_{I∪I'};Z_{I∪I'}|Z_{(I∪I')^c},S) = I(X_I;Z_I|Z_{(I∪I')^c},S) + I(X_{I'};Z_{I'}|Z_{I'^c},S)`
    DisjointUnion,
    /// `DisjointUnion` relative to a ground set `Î ⊇ I ∪ I'`.
    RelativeUnion,
    /// `I(X_I;Z_I|Z_{I^c},S) = Σ_j I(X_{i_j};Z_{i_j}|Z_{[M] \ {i_j..i_m}},S)`
    SingletonDecomposition,
    /// `I(X_{1..m};Z_{1..m}|S) = Σ_{i<=m} I(X_i;Z_i|Z_{1..i-1},S)`
    PrefixChain,
    /// `I(X_{m+1..M};Z_{m+1..M}|Z_{1..m},S) = Σ_{i>m} I(X_i;Z_i|Z_{1..i-1},S)`
    SuffixChain,
    /// `I(X_I;Z_I|Z_{I^c},S) <= Σ_{i∈I} I(X_i;Z_i|Z_{1..i-1},S)`
    SubadditivityBound,
}

impl ChainIdentity {
    pub const ALL: [ChainIdentity; 7] = [
        ChainIdentity::ConditioningSplit,
        ChainIdentity::DisjointUnion,
        ChainIdentity::RelativeUnion,
        ChainIdentity::SingletonDecomposition,
        ChainIdentity::PrefixChain,
        ChainIdentity::SuffixChain,
        ChainIdentity::SubadditivityBound,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ChainIdentity::ConditioningSplit => "conditioning-split",
            ChainIdentity::DisjointUnion => "disjoint-union",
            ChainIdentity::RelativeUnion => "relative-union",
            ChainIdentity::SingletonDecomposition => "singleton-decomposition",
            ChainIdentity::PrefixChain => "prefix-chain",
            ChainIdentity::SuffixChain => "suffix-chain",
            ChainIdentity::SubadditivityBound => "subadditivity-bound",
        }
    }

    pub fn is_inequality(self) -> bool {
        self == ChainIdentity::SubadditivityBound
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IdentityCheck {
    pub identity: ChainIdentity,
    /// The subsets involved, for reproduction.
    pub context: String,
    pub lhs: f64,
    pub rhs: f64,
}

impl IdentityCheck {
    /// `lhs - rhs`; for the inequality, positive residual is a violation.
    pub fn residual(&self) -> f64 {
        self.lhs - self.rhs
    }

    pub fn holds(&self, tol: f64) -> bool {
        if self.identity.is_inequality() {
            self.residual() <= tol
        } else {
            math::abs(self.residual()) <= tol
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IdentityReport {
    pub tol: f64,
    pub checks: usize,
    /// Largest `|lhs - rhs|` (equalities) or `lhs - rhs` (inequality) per identity.
    pub worst: Vec<(ChainIdentity, f64)>,
    pub failures: Vec<IdentityCheck>,
}

impl IdentityReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    fn record(&mut self, check: IdentityCheck) {
        self.checks += 1;
        let r = if check.identity.is_inequality() {
            check.residual()
        } else {
            math::abs(check.residual())
        };
        match self.worst.iter_mut().find(|(id, _)| *id == check.identity) {
            Some((_, w)) => *w = w.max(r),
            None => self.worst.push((check.identity, r)),
        }
        if !check.holds(self.tol) {
            self.failures.push(check);
        }
    }
}

fn prefix(m: usize) -> VarSet {
    VarSet::from_bits((1u64 << m) - 1)
}

/// `Σ_{i∈I} I(X_i; Z_i | Z_{1..i-1}, S)`, the identity-order corner summed over `I`.
fn corner_sum(aug: &AugmentedPmf, subset: VarSet) -> Result<f64> {
    subset
        .iter()
        .map(|i| {
            let s = VarSet::single(i);
            info(aug, s, s, prefix(i as usize))
        })
        .sum()
}

/// Checks every chain identity on `trials` random subset draws, plus the
/// prefix and suffix chains for every split point.
pub fn verify_chain_identities(aug: &AugmentedPmf, trials: usize, tol: f64, seed: u64) -> Result<IdentityReport> {
    let m = aug.sources();
    let all = aug.all_sources();
    let mut report = IdentityReport {
        tol,
        checks: 0,
        worst: Vec::new(),
        failures: Vec::new(),
    };

    for split in 1..=m {
        let head = prefix(split);
        let lhs = info(aug, head, head, VarSet::EMPTY)?;
        let rhs = corner_sum(aug, head)?;
        report.record(IdentityCheck {
            identity: ChainIdentity::PrefixChain,
            context: format!("m={split}"),
            lhs,
            rhs,
        });
        if split < m {
            let tail = all.difference(head);
            let lhs = info(aug, tail, tail, head)?;
            let rhs = corner_sum(aug, tail)?;
            report.record(IdentityCheck {
                identity: ChainIdentity::SuffixChain,
                context: format!("m={split}"),
                lhs,
                rhs,
            });
        }
    }

    let mut rng = seeded(seed);
    for _ in 0..trials {
        let subset = random_nonempty(&mut rng, all);
        let complement = all.difference(subset);
        let own = info(aug, subset, subset, complement)?;

        // singleton decomposition along a random ordering of the subset
        let mut members: Vec<VarId> = subset.iter().collect();
        shuffle(&mut rng, &mut members);
        let mut rhs = 0.0;
        let mut remaining = subset;
        for &i in &members {
            let s = VarSet::single(i);
            rhs += info(aug, s, s, all.difference(remaining))?;
            remaining = remaining.without(i);
        }
        report.record(IdentityCheck {
            identity: ChainIdentity::SingletonDecomposition,
            context: format!("I={subset:?} order={members:?}"),
            lhs: own,
            rhs,
        });
        report.record(IdentityCheck {
            identity: ChainIdentity::SubadditivityBound,
            context: format!("I={subset:?}"),
            lhs: own,
            rhs: corner_sum(aug, subset)?,
        });

        if m < 2 {
            continue;
        }
        let (a, b) = random_disjoint_pair(&mut rng, all);
        let union = a.union(b);
        let outside = all.difference(union);
        let a_outside = info(aug, a, a, outside)?;
        let a_own = info(aug, a, a, all.difference(a))?;
        let b_own = info(aug, b, b, all.difference(b))?;
        report.record(IdentityCheck {
            identity: ChainIdentity::ConditioningSplit,
            context: format!("I={a:?} I'={b:?}"),
            lhs: a_outside,
            rhs: a_own + z_info(aug, a, b, outside)?,
        });
        report.record(IdentityCheck {
            identity: ChainIdentity::DisjointUnion,
            context: format!("I={a:?} I'={b:?}"),
            lhs: info(aug, union, union, outside)?,
            rhs: a_outside + b_own,
        });
        let ground = union.union(VarSet::from_bits(rng.gen::<u64>() & all.bits()));
        let rest = ground.difference(union);
        report.record(IdentityCheck {
            identity: ChainIdentity::RelativeUnion,
            context: format!("I={a:?} I'={b:?} ground={ground:?}"),
            lhs: info(aug, union, union, rest)?,
            rhs: info(aug, a, a, rest)? + info(aug, b, b, ground.difference(b))?,
        });
    }
    Ok(report)
}

fn random_nonempty<R: Rng>(rng: &mut R, all: VarSet) -> VarSet {
    loop {
        let s = VarSet::from_bits(rng.gen::<u64>() & all.bits());
        if !s.is_empty() {
            return s;
        }
    }
}

/// Each source independently goes to `I`, `I'` or neither.
fn random_disjoint_pair<R: Rng>(rng: &mut R, all: VarSet) -> (VarSet, VarSet) {
    loop {
        let (mut a, mut b) = (VarSet::EMPTY, VarSet::EMPTY);
        for k in all.iter() {
            match rng.gen_range(0..3) {
                0 => a = a.with(k),
                1 => b = b.with(k),
                _ => {}
            }
        }
        if !a.is_empty() && !b.is_empty() {
            return (a, b);
        }
    }
}

fn shuffle<R: Rng, T>(rng: &mut R, v: &mut [T]) {
    for i in (1..v.len()).rev() {
        let j = rng.gen_range(0..=i);
        v.swap(i, j);
    }
}
