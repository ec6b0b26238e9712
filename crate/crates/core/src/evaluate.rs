//! Fast repeated evaluation of the rate-distortion vector for many channel
//! tuples of fixed output sizes.
//!
//! Every marginal needed by the corner rates and by the optimal estimators is
//! precompiled into a pair of index maps, one over nonzero source cells and
//! one over output tuples, so that a marginal cell index is
//! `src_part[cell] + z_part[z_tuple]`. Marginals that involve no auxiliary
//! variable are evaluated once at construction.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::augment::{Channel, DistortionMeasure, ProblemSpec};
use crate::error::{Error, Result};
use crate::math;
use crate::optimize::RdPoint;
use crate::pmf::{VarId, VarSet};
use crate::region::{Permutation, RateVector};

#[derive(Clone, Debug)]
struct Marginal {
    size: usize,
    src_part: Vec<usize>,
    z_part: Vec<usize>,
}

#[derive(Clone, Copy, Debug)]
enum Entropy {
    Fixed(f64),
    Varying(usize),
}

#[derive(Clone, Debug)]
pub struct RdEvaluator {
    sources: usize,
    lossless: usize,
    z_sizes: Vec<usize>,
    x_sizes: Vec<usize>,
    nz: usize,
    cell_prob: Vec<f64>,
    /// `cell_x[c * channels + j]`: symbol of the `j`-th channel source in cell `c`.
    cell_x: Vec<usize>,
    marginals: Vec<Marginal>,
    /// Per source, signed entropy terms summing to its corner rate.
    rate_terms: Vec<Vec<(Entropy, f64)>>,
    /// Joint of the estimator input and `V`, `V` fastest.
    uv: Marginal,
    nv: usize,
    distortions: Vec<DistortionMeasure>,
    weights: Vec<f64>,
    scratch: Vec<f64>,
    out: Vec<f64>,
}

impl RdEvaluator {
    /// Evaluator for channels with output sizes `z_sizes` (one per channel
    /// source) and corner rates of ordering `perm`.
    pub fn new(spec: &ProblemSpec, z_sizes: &[usize], perm: &Permutation) -> Result<Self> {
        let m = spec.sources();
        let j = spec.lossless();
        if z_sizes.len() != m - j {
            return Err(Error::Shape(format!(
                "expected {} output sizes, got {}",
                m - j,
                z_sizes.len()
            )));
        }
        if z_sizes.contains(&0) {
            return Err(Error::Shape("output alphabets must be nonempty".into()));
        }
        if perm.len() != m {
            return Err(Error::Shape(format!("ordering of {} sources, M = {m}", perm.len())));
        }
        let src = spec.source();
        let shape = src.shape();
        let nz: usize = z_sizes.iter().product();

        let mut cell_prob = Vec::new();
        let mut cell_digits: Vec<Vec<usize>> = Vec::new();
        let mut digits = vec![0usize; shape.len()];
        for &p in src.probs() {
            if p > 0.0 {
                cell_prob.push(p);
                cell_digits.push(digits.clone());
            }
            for ax in (0..shape.len()).rev() {
                digits[ax] += 1;
                if digits[ax] < shape[ax] {
                    break;
                }
                digits[ax] = 0;
            }
        }
        let cell_x = cell_digits.iter().flat_map(|d| d[j..m].to_vec()).collect();

        // z tuple digits, first channel most significant
        let z_digits: Vec<Vec<usize>> = (0..nz)
            .map(|mut idx| {
                let mut d = vec![0; z_sizes.len()];
                for c in (0..z_sizes.len()).rev() {
                    d[c] = idx % z_sizes[c];
                    idx /= z_sizes[c];
                }
                d
            })
            .collect();

        let size_of = |v: VarId| -> usize {
            let v = v as usize;
            if v < m + 2 {
                shape[v]
            } else {
                z_sizes[v - m - 2 - j]
            }
        };
        let compile = |vars: &[VarId]| -> Marginal {
            let mut strides = vec![0usize; vars.len()];
            let mut size = 1;
            for (s, &v) in strides.iter_mut().zip(vars).rev() {
                *s = size;
                size *= size_of(v);
            }
            let src_part = cell_digits
                .iter()
                .map(|d| {
                    vars.iter()
                        .zip(&strides)
                        .filter(|(&v, _)| (v as usize) < m + 2)
                        .map(|(&v, s)| d[v as usize] * s)
                        .sum()
                })
                .collect();
            let z_part = z_digits
                .iter()
                .map(|d| {
                    vars.iter()
                        .zip(&strides)
                        .filter(|(&v, _)| (v as usize) >= m + 2)
                        .map(|(&v, s)| d[v as usize - m - 2 - j] * s)
                        .sum()
                })
                .collect();
            Marginal { size, src_part, z_part }
        };

        let z_vars: VarSet = (j..m).map(|k| spec.z_var(k)).collect();
        let mut seen: Vec<(VarSet, Entropy)> = Vec::new();
        let mut marginals = Vec::new();
        let mut entropy_of = |set: VarSet| -> Result<Entropy> {
            if let Some((_, e)) = seen.iter().find(|(s, _)| *s == set) {
                return Ok(*e);
            }
            let e = if set.is_disjoint(z_vars) {
                Entropy::Fixed(src.joint_entropy(set)?)
            } else {
                let vars: Vec<VarId> = set.iter().collect();
                marginals.push(compile(&vars));
                Entropy::Varying(marginals.len() - 1)
            };
            seen.push((set, e));
            Ok(e)
        };
        let s = VarSet::single(spec.s_var());
        let mut rate_terms = Vec::with_capacity(m);
        for i in 0..m {
            let cond = spec.z_set(perm.predecessors(i)).union(s);
            let xi = cond.with(spec.x_var(i));
            let terms = if i < j {
                vec![(entropy_of(xi)?, 1.0), (entropy_of(cond)?, -1.0)]
            } else {
                let zi = cond.with(spec.z_var(i));
                vec![
                    (entropy_of(zi)?, 1.0),
                    (entropy_of(cond)?, -1.0),
                    (entropy_of(zi.with(spec.x_var(i)))?, -1.0),
                    (entropy_of(xi)?, 1.0),
                ]
            };
            rate_terms.push(terms);
        }

        let mut uv_vars: Vec<VarId> = (0..m).map(|k| spec.z_var(k)).collect();
        uv_vars.push(spec.s_var());
        uv_vars.push(spec.v_var());
        let uv = compile(&uv_vars);
        let nv = spec.v_alphabet().size();

        let scratch = vec![0.0; marginals.iter().map(|mg| mg.size).chain([uv.size]).max().unwrap_or(1)];
        Ok(RdEvaluator {
            sources: m,
            lossless: j,
            z_sizes: z_sizes.to_vec(),
            x_sizes: (j..m).map(|k| spec.x_alphabet(k).size()).collect(),
            nz,
            weights: vec![0.0; cell_prob.len() * nz],
            cell_prob,
            cell_x,
            marginals,
            rate_terms,
            uv,
            nv,
            distortions: spec.distortions().to_vec(),
            scratch,
            out: vec![0.0; m + spec.distortion_count()],
        })
    }

    pub fn z_sizes(&self) -> &[usize] {
        &self.z_sizes
    }

    /// Length of the vector returned by [`RdEvaluator::evaluate_rows`]: `M + L`.
    pub fn output_len(&self) -> usize {
        self.out.len()
    }

    /// Rates `R_1..R_M` followed by `D_1..D_L` for channels given as
    /// row-major `|X_k| x |Z_k|` matrices, one per channel source.
    ///
    /// Rows are trusted to be stochastic and of the compiled sizes.
    pub fn evaluate_rows(&mut self, rows: &[&[f64]]) -> &[f64] {
        let channels = self.z_sizes.len();
        for (c, &p) in self.cell_prob.iter().enumerate() {
            let w = &mut self.weights[c * self.nz..(c + 1) * self.nz];
            w[0] = p;
            let mut len = 1;
            for (jj, (&nzj, row)) in self.z_sizes.iter().zip(rows).enumerate() {
                let x = self.cell_x[c * channels + jj];
                let q = &row[x * nzj..(x + 1) * nzj];
                for idx in (0..len).rev() {
                    let v = w[idx];
                    for z in (0..nzj).rev() {
                        w[idx * nzj + z] = v * q[z];
                    }
                }
                len *= nzj;
            }
        }

        let mut entropies = [0.0f64; 64];
        let mut heap;
        let ent: &mut [f64] = if self.marginals.len() <= 64 {
            &mut entropies[..self.marginals.len()]
        } else {
            heap = vec![0.0; self.marginals.len()];
            &mut heap
        };
        for (e, mg) in ent.iter_mut().zip(&self.marginals) {
            *e = marginal_entropy(mg, &self.weights, self.nz, &mut self.scratch);
        }
        for (i, terms) in self.rate_terms.iter().enumerate() {
            let r: f64 = terms
                .iter()
                .map(|(e, sign)| {
                    sign * match e {
                        Entropy::Fixed(h) => *h,
                        Entropy::Varying(idx) => ent[*idx],
                    }
                })
                .sum();
            self.out[i] = r.max(0.0);
        }

        if !self.distortions.is_empty() {
            accumulate(&self.uv, &self.weights, self.nz, &mut self.scratch);
            let table = &self.scratch[..self.uv.size];
            for (l, d) in self.distortions.iter().enumerate() {
                let nr = d.recon_size();
                let mut total = 0.0;
                for row in table.chunks(self.nv) {
                    if row.iter().all(|&p| p == 0.0) {
                        continue;
                    }
                    let mut best = f64::INFINITY;
                    for vh in 0..nr {
                        let cost: f64 = row.iter().enumerate().map(|(v, p)| p * d.get(v, vh)).sum();
                        if cost < best {
                            best = cost;
                        }
                    }
                    total += best;
                }
                self.out[self.sources + l] = total;
            }
        }
        &self.out
    }

    /// Checked evaluation returning an [`RdPoint`].
    pub fn evaluate(&mut self, channels: &[Channel]) -> Result<RdPoint> {
        if channels.len() != self.z_sizes.len() {
            return Err(Error::Shape(format!("expected {} channels", self.z_sizes.len())));
        }
        for (idx, c) in channels.iter().enumerate() {
            if c.output_size() != self.z_sizes[idx] || c.input_size() != self.x_sizes[idx] {
                return Err(Error::Shape(format!(
                    "channel {} is {}x{}, evaluator compiled for {}x{}",
                    self.lossless + idx + 1,
                    c.input_size(),
                    c.output_size(),
                    self.x_sizes[idx],
                    self.z_sizes[idx]
                )));
            }
        }
        let rows: Vec<&[f64]> = channels.iter().map(Channel::rows).collect();
        let m = self.sources;
        let out = self.evaluate_rows(&rows).to_vec();
        Ok(RdPoint {
            rates: RateVector::new(out[..m].to_vec())?,
            distortions: out[m..].to_vec(),
        })
    }
}

fn accumulate(mg: &Marginal, weights: &[f64], nz: usize, buf: &mut [f64]) {
    let buf = &mut buf[..mg.size];
    buf.iter_mut().for_each(|b| *b = 0.0);
    for (c, &base) in mg.src_part.iter().enumerate() {
        let w = &weights[c * nz..(c + 1) * nz];
        for (wz, &zp) in w.iter().zip(&mg.z_part) {
            buf[base + zp] += wz;
        }
    }
}

fn marginal_entropy(mg: &Marginal, weights: &[f64], nz: usize, buf: &mut [f64]) -> f64 {
    accumulate(mg, weights, nz, buf);
    math::entropy_bits(&buf[..mg.size])
}
