//! Dense probability tensors over named finite axes.
//!
//! Every random variable in a problem gets a small integer [`VarId`]; a
//! [`JointPmf`] stores one axis per variable it covers, and [`VarSet`] is a
//! bitmask over variable ids used to name marginals and conditioning groups.
//! All information measures are in bits with `0 · log 0 = 0`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::math;

/// Identifier of a random variable within one problem.
pub type VarId = u8;

/// Largest admissible mass defect of a normalised tensor.
pub const MASS_TOL: f64 = 1e-12;

/// Negative conditional mutual information below this magnitude is rounding
/// noise and is clamped to zero; anything more negative is an error.
pub const CMI_CLAMP: f64 = 1e-10;

/// A set of variables, stored as a bitmask over [`VarId`]s.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarSet(u64);

impl VarSet {
    pub const EMPTY: VarSet = VarSet(0);

    pub const fn from_bits(bits: u64) -> Self {
        VarSet(bits)
    }

    pub const fn bits(self) -> u64 {
        self.0
    }

    pub fn single(var: VarId) -> Self {
        debug_assert!(var < 64);
        VarSet(1 << var)
    }

    pub fn contains(self, var: VarId) -> bool {
        var < 64 && self.0 & (1 << var) != 0
    }

    #[must_use]
    pub fn with(self, var: VarId) -> Self {
        VarSet(self.0 | 1 << var)
    }

    #[must_use]
    pub fn without(self, var: VarId) -> Self {
        VarSet(self.0 & !(1 << var))
    }

    #[must_use]
    pub fn union(self, other: VarSet) -> Self {
        VarSet(self.0 | other.0)
    }

    #[must_use]
    pub fn intersection(self, other: VarSet) -> Self {
        VarSet(self.0 & other.0)
    }

    #[must_use]
    pub fn difference(self, other: VarSet) -> Self {
        VarSet(self.0 & !other.0)
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn is_disjoint(self, other: VarSet) -> bool {
        self.0 & other.0 == 0
    }

    pub fn is_subset(self, other: VarSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    /// Members in increasing id order.
    pub fn iter(self) -> impl Iterator<Item = VarId> {
        let bits = self.0;
        (0..64u8).filter(move |&i| bits & (1 << i) != 0)
    }
}

impl FromIterator<VarId> for VarSet {
    fn from_iter<T: IntoIterator<Item = VarId>>(iter: T) -> Self {
        iter.into_iter().fold(VarSet::EMPTY, VarSet::with)
    }
}

impl fmt::Debug for VarSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

/// A finite alphabet: a label and a symbol count.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Alphabet {
    label: String,
    size: usize,
}

impl Alphabet {
    pub fn new(label: impl Into<String>, size: usize) -> Result<Self> {
        let label = label.into();
        if size == 0 {
            return Err(Error::Shape(format!("alphabet {label} has no symbols")));
        }
        Ok(Alphabet { label, size })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn size(&self) -> usize {
        self.size
    }
}

/// One tensor axis: the variable it carries and its alphabet.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Axis {
    pub var: VarId,
    pub alphabet: Alphabet,
}

impl Axis {
    pub fn new(var: VarId, alphabet: Alphabet) -> Self {
        Axis { var, alphabet }
    }

    pub fn size(&self) -> usize {
        self.alphabet.size()
    }
}

/// A normalised, dense, row-major probability tensor (last axis fastest).
#[derive(Clone, Debug, PartialEq)]
pub struct JointPmf {
    axes: Vec<Axis>,
    probs: Vec<f64>,
}

impl JointPmf {
    /// Validates shape, sign and total mass (within [`MASS_TOL`]).
    pub fn new(axes: Vec<Axis>, probs: Vec<f64>) -> Result<Self> {
        let pmf = Self::unchecked_mass(axes, probs)?;
        let total = pmf.total_mass();
        if math::abs(total - 1.0) > MASS_TOL {
            return Err(Error::Probability(format!(
                "total mass {total} differs from 1 by more than {MASS_TOL:e}"
            )));
        }
        Ok(pmf)
    }

    /// Builds a tensor from nonnegative weights, dividing by their sum.
    pub fn from_weights(axes: Vec<Axis>, mut weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::Probability("weights have no positive mass".into()));
        }
        for w in &mut weights {
            *w /= total;
        }
        Self::new(axes, weights)
    }

    fn unchecked_mass(axes: Vec<Axis>, probs: Vec<f64>) -> Result<Self> {
        let mut seen = VarSet::EMPTY;
        for axis in &axes {
            if axis.var >= 64 {
                return Err(Error::Shape(format!("variable id {} out of range", axis.var)));
            }
            if seen.contains(axis.var) {
                return Err(Error::Shape(format!("variable {} appears twice", axis.var)));
            }
            seen = seen.with(axis.var);
        }
        let cells: usize = axes.iter().map(Axis::size).product();
        if cells != probs.len() {
            return Err(Error::Shape(format!(
                "tensor has {} cells but axes require {cells}",
                probs.len()
            )));
        }
        if let Some(bad) = probs.iter().find(|p| !(**p >= 0.0) || !p.is_finite()) {
            return Err(Error::Probability(format!("invalid cell probability {bad}")));
        }
        Ok(JointPmf { axes, probs })
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(Axis::size).collect()
    }

    pub fn vars(&self) -> VarSet {
        self.axes.iter().map(|a| a.var).collect()
    }

    pub fn total_mass(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn axis_position(&self, var: VarId) -> Option<usize> {
        self.axes.iter().position(|a| a.var == var)
    }

    pub fn axis_size(&self, var: VarId) -> Result<usize> {
        self.axis_position(var)
            .map(|p| self.axes[p].size())
            .ok_or(Error::UnknownAxis(var))
    }

    /// Probability of one symbol tuple, given in axis order.
    pub fn prob(&self, symbols: &[usize]) -> f64 {
        debug_assert_eq!(symbols.len(), self.axes.len());
        let idx = symbols
            .iter()
            .zip(&self.axes)
            .fold(0, |acc, (&s, a)| acc * a.size() + s);
        self.probs[idx]
    }

    fn check_known(&self, set: VarSet) -> Result<()> {
        match set.difference(self.vars()).iter().next() {
            Some(var) => Err(Error::UnknownAxis(var)),
            None => Ok(()),
        }
    }

    /// Dense marginal over `order`, laid out row-major in that order.
    ///
    /// An empty `order` yields the single cell `[total mass]`.
    pub fn table(&self, order: &[VarId]) -> Result<Vec<f64>> {
        let mut out_stride = vec![0usize; self.axes.len()];
        let mut stride = 1usize;
        for &var in order.iter().rev() {
            let pos = self.axis_position(var).ok_or(Error::UnknownAxis(var))?;
            if out_stride[pos] != 0 {
                return Err(Error::Overlap("variable listed twice in marginal order"));
            }
            out_stride[pos] = stride;
            stride *= self.axes[pos].size();
        }
        let mut out = vec![0.0; stride];
        let shape = self.shape();
        let mut digits = vec![0usize; shape.len()];
        let mut o = 0usize;
        for &p in &self.probs {
            out[o] += p;
            // odometer increment, last axis fastest
            for ax in (0..shape.len()).rev() {
                digits[ax] += 1;
                o += out_stride[ax];
                if digits[ax] < shape[ax] {
                    break;
                }
                o -= out_stride[ax] * shape[ax];
                digits[ax] = 0;
            }
        }
        Ok(out)
    }

    /// Sums out every axis not in `keep`; kept axes retain their order.
    pub fn marginalize(&self, keep: VarSet) -> Result<JointPmf> {
        if keep.is_empty() {
            return Err(Error::EmptySet("marginal must keep at least one axis"));
        }
        self.check_known(keep)?;
        let axes: Vec<Axis> = self.axes.iter().filter(|a| keep.contains(a.var)).cloned().collect();
        let order: Vec<VarId> = axes.iter().map(|a| a.var).collect();
        let probs = self.table(&order)?;
        Ok(JointPmf { axes, probs })
    }

    /// Joint entropy `H(set)` in bits; `H(∅) = 0`.
    pub fn joint_entropy(&self, set: VarSet) -> Result<f64> {
        self.check_known(set)?;
        if set.is_empty() {
            return Ok(0.0);
        }
        let order: Vec<VarId> = set.iter().collect();
        Ok(math::entropy_bits(&self.table(&order)?))
    }

    /// Conditional entropy `H(of | given)` in bits.
    pub fn entropy(&self, of: VarSet, given: VarSet) -> Result<f64> {
        if of.is_empty() {
            return Err(Error::EmptySet("entropy target"));
        }
        if !of.is_disjoint(given) {
            return Err(Error::Overlap("entropy target and conditioning"));
        }
        let h = self.joint_entropy(of.union(given))? - self.joint_entropy(given)?;
        Ok(h.max(0.0))
    }

    /// Conditional mutual information `I(a; b | given)` in bits.
    ///
    /// Tiny negative rounding residue (above `-CMI_CLAMP`) is clamped to 0.
    pub fn cmi(&self, a: VarSet, b: VarSet, given: VarSet) -> Result<f64> {
        if a.is_empty() || b.is_empty() {
            return Err(Error::EmptySet("mutual information argument"));
        }
        if !a.is_disjoint(b) || !a.is_disjoint(given) || !b.is_disjoint(given) {
            return Err(Error::Overlap("mutual information arguments"));
        }
        let value = self.joint_entropy(a.union(given))? + self.joint_entropy(b.union(given))?
            - self.joint_entropy(a.union(b).union(given))?
            - self.joint_entropy(given)?;
        clamp_information(value)
    }

    /// `I(a; b | given)` where the arguments may share variables.
    ///
    /// Variables already in `given` are dropped from `a` and `b`; a variable
    /// shared by `a` and `b` contributes its conditional entropy, i.e.
    /// `I(A', C; B', C | G) = H(C | G) + I(A'; B' | C, G)`.
    pub fn information(&self, a: VarSet, b: VarSet, given: VarSet) -> Result<f64> {
        let a = a.difference(given);
        let b = b.difference(given);
        let shared = a.intersection(b);
        let mut total = 0.0;
        if !shared.is_empty() {
            total += self.entropy(shared, given)?;
        }
        let a_only = a.difference(shared);
        let b_only = b.difference(shared);
        if !a_only.is_empty() && !b_only.is_empty() {
            total += self.cmi(a_only, b_only, given.union(shared))?;
        }
        Ok(total)
    }

    /// True iff `a → mid → b` holds up to `tol` bits of residual dependence.
    pub fn is_markov(&self, a: VarSet, mid: VarSet, b: VarSet, tol: f64) -> Result<bool> {
        Ok(self.cmi(a, b, mid)? <= tol)
    }
}

pub(crate) fn clamp_information(value: f64) -> Result<f64> {
    if value < -CMI_CLAMP {
        return Err(Error::NumericIntegrity {
            what: "conditional mutual information",
            value,
        });
    }
    Ok(value.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{seeded, uniform_simplex};

    fn axes(sizes: &[usize]) -> Vec<Axis> {
        sizes
            .iter()
            .enumerate()
            .map(|(i, &n)| Axis::new(i as VarId, Alphabet::new(format!("A{i}"), n).unwrap()))
            .collect()
    }

    fn random_pmf(sizes: &[usize], seed: u64) -> JointPmf {
        let cells = sizes.iter().product();
        let mut rng = seeded(seed);
        JointPmf::new(axes(sizes), uniform_simplex(&mut rng, cells)).unwrap()
    }

    fn set(ids: &[VarId]) -> VarSet {
        ids.iter().copied().collect()
    }

    #[test]
    fn uniform_marginal_is_uniform() {
        let p = JointPmf::new(axes(&[2, 2]), vec![0.25; 4]).unwrap();
        let m = p.marginalize(set(&[0])).unwrap();
        assert_eq!(m.probs(), &[0.5, 0.5]);
    }

    #[test]
    fn copied_variable_marginal_matches_original() {
        let p = JointPmf::new(axes(&[2, 2]), vec![0.3, 0.0, 0.0, 0.7]).unwrap();
        assert_eq!(p.marginalize(set(&[0])).unwrap().probs(), &[0.3, 0.7]);
        assert_eq!(p.marginalize(set(&[1])).unwrap().probs(), &[0.3, 0.7]);
    }

    #[test]
    fn marginal_matches_nested_loop_sums() {
        let p = random_pmf(&[3, 2, 2], 7);
        let rows = p.marginalize(set(&[0])).unwrap();
        for x in 0..3 {
            let mut s = 0.0;
            for y in 0..2 {
                for z in 0..2 {
                    s += p.prob(&[x, y, z]);
                }
            }
            assert!((rows.probs()[x] - s).abs() < 1e-15);
        }
        let t = p.table(&[2, 0]).unwrap();
        for z in 0..2 {
            for x in 0..3 {
                let s: f64 = (0..2).map(|y| p.prob(&[x, y, z])).sum();
                assert!((t[z * 3 + x] - s).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn marginalize_rejects_unknown_and_empty() {
        let p = random_pmf(&[2, 2], 1);
        assert_eq!(p.marginalize(set(&[5])), Err(Error::UnknownAxis(5)));
        assert!(matches!(p.marginalize(VarSet::EMPTY), Err(Error::EmptySet(_))));
    }

    #[test]
    fn entropy_reference_values() {
        let uniform = JointPmf::new(axes(&[2]), vec![0.5, 0.5]).unwrap();
        assert!((uniform.entropy(set(&[0]), VarSet::EMPTY).unwrap() - 1.0).abs() < 1e-15);
        let point = JointPmf::new(axes(&[3]), vec![0.0, 1.0, 0.0]).unwrap();
        assert_eq!(point.entropy(set(&[0]), VarSet::EMPTY).unwrap(), 0.0);
        // -(0.25 log2 0.25 + 0.75 log2 0.75)
        let skew = JointPmf::new(axes(&[2]), vec![0.25, 0.75]).unwrap();
        let h = skew.entropy(set(&[0]), VarSet::EMPTY).unwrap();
        assert!((h - 0.811_278_124_459_132_8).abs() < 1e-12, "{h}");
    }

    #[test]
    fn entropy_rejects_overlap() {
        let p = random_pmf(&[2, 2], 3);
        assert!(matches!(p.entropy(set(&[0]), set(&[0, 1])), Err(Error::Overlap(_))));
    }

    #[test]
    fn cmi_reference_values() {
        let indep = JointPmf::new(axes(&[2, 2]), vec![0.06, 0.14, 0.24, 0.56]).unwrap();
        assert!(indep.cmi(set(&[0]), set(&[1]), VarSet::EMPTY).unwrap() < 1e-15);

        let copy = JointPmf::new(axes(&[2, 2]), vec![0.3, 0.0, 0.0, 0.7]).unwrap();
        let h = copy.entropy(set(&[0]), VarSet::EMPTY).unwrap();
        let i = copy.cmi(set(&[0]), set(&[1]), VarSet::EMPTY).unwrap();
        assert!((i - h).abs() < 1e-14);

        // doubly symmetric binary source, crossover 0.1: evaluate the
        // definition Σ p(x,y) log p(x,y)/(p(x)p(y)) cell by cell
        let cells = [0.45, 0.05, 0.05, 0.45];
        let dsbs = JointPmf::new(axes(&[2, 2]), cells.to_vec()).unwrap();
        let direct: f64 = cells.iter().map(|&p| p * libm::log2(p / 0.25)).sum();
        let i = dsbs.cmi(set(&[0]), set(&[1]), VarSet::EMPTY).unwrap();
        assert!((i - direct).abs() < 1e-14);
        assert!((i - 0.531_004_406_410_718_5).abs() < 1e-12, "{i}");
    }

    #[test]
    fn markov_chain_by_construction() {
        // a -> mid -> b from two channel compositions
        let pa = [0.3, 0.7];
        let w1 = [[0.9, 0.1], [0.2, 0.8]];
        let w2 = [[0.6, 0.4], [0.1, 0.9]];
        let mut cells = Vec::new();
        for a in 0..2 {
            for m in 0..2 {
                for b in 0..2 {
                    cells.push(pa[a] * w1[a][m] * w2[m][b]);
                }
            }
        }
        let p = JointPmf::new(axes(&[2, 2, 2]), cells).unwrap();
        assert!(p.is_markov(set(&[0]), set(&[1]), set(&[2]), 1e-12).unwrap());

        let copy = JointPmf::new(axes(&[2, 2, 2]), vec![0.15, 0.0, 0.15, 0.0, 0.0, 0.35, 0.0, 0.35]).unwrap();
        assert!(!copy.is_markov(set(&[0]), set(&[1]), set(&[2]), 1e-6).unwrap());
    }

    #[test]
    fn information_handles_shared_variables() {
        let p = random_pmf(&[2, 3, 2], 11);
        // I(A,B; A | C) = H(A | C)
        let lhs = p.information(set(&[0, 1]), set(&[0]), set(&[2])).unwrap();
        let rhs = p.entropy(set(&[0]), set(&[2])).unwrap();
        assert!((lhs - rhs).abs() < 1e-13);
        // conditioning variables drop out of the arguments
        let lhs = p.information(set(&[0, 2]), set(&[1]), set(&[2])).unwrap();
        let rhs = p.cmi(set(&[0]), set(&[1]), set(&[2])).unwrap();
        assert!((lhs - rhs).abs() < 1e-13);
    }

    #[test]
    fn construction_validates() {
        assert!(JointPmf::new(axes(&[2]), vec![0.5, 0.6]).is_err());
        assert!(JointPmf::new(axes(&[2]), vec![1.5, -0.5]).is_err());
        assert!(JointPmf::new(axes(&[2, 2]), vec![1.0]).is_err());
        assert!(Alphabet::new("X", 0).is_err());
    }
}
