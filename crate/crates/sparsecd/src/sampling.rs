//! Block selection rules and the probability tree behind nonuniform sampling.

use itertools::Itertools;
use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::data::SparseMatrix;
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Sum tree over nonnegative leaf weights. Sampling and updates are O(log n).
#[derive(Clone, Debug)]
pub struct ProbabilityTree {
    len: usize,
    cap: usize,
    // nodes[1] is the root, leaves live at cap..cap+len
    nodes: Vec<f64>,
}

impl ProbabilityTree {
    pub fn new(weights: &[f64]) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Empty);
        }
        if let Some(w) = weights.iter().find(|w| !(**w >= 0.0 && w.is_finite())) {
            return Err(Error::invalid(format!("bad tree weight {w}")));
        }
        let len = weights.len();
        let cap = len.next_power_of_two();
        let mut nodes = vec![0.0; 2 * cap];
        nodes[cap..cap + len].copy_from_slice(weights);
        for k in (1..cap).rev() {
            nodes[k] = nodes[2 * k] + nodes[2 * k + 1];
        }
        if !(nodes[1] > 0.0) {
            return Err(Error::invalid("all tree weights are zero"));
        }
        Ok(Self { len, cap, nodes })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn total(&self) -> f64 {
        self.nodes[1]
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.nodes[self.cap + i]
    }

    pub fn probability(&self, i: usize) -> f64 {
        self.weight(i) / self.total()
    }

    pub fn sample(&self, rng: &mut Rng) -> usize {
        let mut u = rng.random::<f64>() * self.total();
        let mut k = 1;
        while k < self.cap {
            let l = self.nodes[2 * k];
            let r = self.nodes[2 * k + 1];
            if (u < l && l > 0.0) || r <= 0.0 {
                k *= 2;
            } else {
                u -= l;
                k = 2 * k + 1;
            }
        }
        k - self.cap
    }

    pub fn update(&mut self, i: usize, w: f64) -> Result<()> {
        if i >= self.len {
            return Err(Error::invalid(format!("tree index {i} out of range")));
        }
        if !(w >= 0.0 && w.is_finite()) {
            return Err(Error::invalid(format!("bad tree weight {w}")));
        }
        let old = self.weight(i);
        self.set(i, w);
        if !(self.total() > 0.0) {
            self.set(i, old);
            return Err(Error::invalid("update would zero every tree weight"));
        }
        Ok(())
    }

    fn set(&mut self, i: usize, w: f64) {
        let mut k = self.cap + i;
        self.nodes[k] = w;
        while k > 1 {
            k /= 2;
            self.nodes[k] = self.nodes[2 * k] + self.nodes[2 * k + 1];
        }
    }

    /// Every internal node equals the sum of its children.
    pub fn is_consistent(&self) -> bool {
        (1..self.cap).all(|k| self.nodes[k] == self.nodes[2 * k] + self.nodes[2 * k + 1])
    }
}

/// `p_j ~ v_j + nlg`
pub fn importance_probs(v: &[f64], nlg: f64) -> Vec<f64> {
    let s: f64 = v.iter().map(|&x| x + nlg).sum();
    v.iter().map(|&x| (x + nlg) / s).collect()
}

/// Unnormalized optimal adaptive weights `|k_j| sqrt(v_j + nlg)`.
pub fn adasdca_weights(kappa: &[f64], v: &[f64], nlg: f64) -> Vec<f64> {
    kappa
        .iter()
        .zip(v)
        .map(|(&k, &vj)| k.abs() * (vj + nlg).sqrt())
        .collect()
}

/// Optimal adaptive probabilities; `Error::Optimal` when every residue vanishes.
pub fn adasdca_probs(kappa: &[f64], v: &[f64], nlg: f64) -> Result<Vec<f64>> {
    let w = adasdca_weights(kappa, v, nlg);
    let s: f64 = w.iter().sum();
    if s == 0.0 {
        return Err(Error::Optimal);
    }
    Ok(w.into_iter().map(|x| x / s).collect())
}

/// `nlg sum |k_j|^2 / sum p_j^{-1} |k_j|^2 (v_j + nlg)` over the support of `kappa`.
pub fn theta_kappa_p(kappa: &[f64], p: &[f64], v: &[f64], nlg: f64) -> Result<f64> {
    let mut num = 0.0;
    let mut den = 0.0;
    for j in 0..kappa.len() {
        if kappa[j] == 0.0 {
            continue;
        }
        if !(p[j] > 0.0) {
            return Err(Error::invalid(format!(
                "p is not coherent with kappa at {j}"
            )));
        }
        let k2 = kappa[j] * kappa[j];
        num += k2;
        den += k2 * (v[j] + nlg) / p[j];
    }
    if num == 0.0 {
        return Err(Error::Optimal);
    }
    Ok(nlg * num / den)
}

/// Disjoint nonempty groups covering `0..n`.
#[derive(Clone, Debug, PartialEq)]
pub struct Partition {
    groups: Vec<Vec<usize>>,
    owner: Vec<usize>,
}

impl Partition {
    pub fn new(n: usize, groups: Vec<Vec<usize>>) -> Result<Self> {
        let mut owner = vec![usize::MAX; n];
        for (g, grp) in groups.iter().enumerate() {
            if grp.is_empty() {
                return Err(Error::invalid(format!("group {g} is empty")));
            }
            for &j in grp {
                if j >= n || owner[j] != usize::MAX {
                    return Err(Error::invalid(format!(
                        "index {j} out of range or repeated"
                    )));
                }
                owner[j] = g;
            }
        }
        if owner.iter().any(|&o| o == usize::MAX) {
            return Err(Error::invalid("groups do not cover every index"));
        }
        Ok(Self { groups, owner })
    }

    pub fn singletons(n: usize) -> Self {
        Self::new(n, (0..n).map(|j| vec![j]).collect()).expect("singletons")
    }

    pub fn whole(n: usize) -> Self {
        Self::new(n, vec![(0..n).collect()]).expect("one group")
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn n(&self) -> usize {
        self.owner.len()
    }

    pub fn owner(&self, j: usize) -> usize {
        self.owner[j]
    }
}

/// Contiguous chunks whose nnz total stays below the largest single nnz.
pub fn naive_chunks(nnz: &[usize]) -> Result<Partition> {
    if nnz.is_empty() {
        return Err(Error::Empty);
    }
    let m = *nnz.iter().max().unwrap_or(&0);
    let mut groups = vec![vec![0]];
    let mut load = nnz[0];
    for (j, &c) in nnz.iter().enumerate().skip(1) {
        if load + c <= m {
            load += c;
            groups.last_mut().expect("nonempty").push(j);
        } else {
            groups.push(vec![j]);
            load = c;
        }
    }
    Partition::new(nnz.len(), groups)
}

/// `tau` buckets of sizes `floor(n/tau)` or `ceil(n/tau)` from a random permutation.
pub fn random_buckets(n: usize, tau: usize, rng: &mut Rng) -> Result<Partition> {
    if tau == 0 || tau > n {
        return Err(Error::invalid(format!("tau = {tau} must lie in 1..={n}")));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    let (q, r) = (n / tau, n % tau);
    let mut groups = Vec::with_capacity(tau);
    let mut at = 0;
    for l in 0..tau {
        let size = q + usize::from(l < r);
        let mut g = perm[at..at + size].to_vec();
        g.sort_unstable();
        groups.push(g);
        at += size;
    }
    Partition::new(n, groups)
}

/// Within-bucket importance: `p_j ~ nlg + v_j` normalized per bucket.
pub fn bucket_probs_practical(v_unif: &[f64], nlg: f64, buckets: &Partition) -> Vec<f64> {
    let mut p = vec![0.0; v_unif.len()];
    for g in buckets.groups() {
        let s: f64 = g.iter().map(|&j| nlg + v_unif[j]).sum();
        for &j in g {
            p[j] = (nlg + v_unif[j]) / s;
        }
    }
    p
}

#[derive(Clone, Debug)]
pub struct AlternatingResult {
    pub p: Vec<f64>,
    pub v: Vec<f64>,
    /// `max_j |p_new - p_old|` per sweep.
    pub diffs: Vec<f64>,
    pub converged: bool,
}

/// Alternates `v <- v_bucket(p)` and `p <- bucket_probs_practical(v)`.
pub fn bucket_probs_alternating(
    x: &SparseMatrix,
    buckets: &Partition,
    nlg: f64,
    tol: f64,
    max_iter: usize,
) -> AlternatingResult {
    let mut p = vec![0.0; x.n()];
    for g in buckets.groups() {
        for &j in g {
            p[j] = 1.0 / g.len() as f64;
        }
    }
    let mut diffs = Vec::new();
    let mut converged = false;
    for _ in 0..max_iter {
        let v = crate::eso::v_bucket(x, buckets, &p);
        let next = bucket_probs_practical(&v, nlg, buckets);
        let diff = next
            .iter()
            .zip(&p)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        p = next;
        diffs.push(diff);
        if diff <= tol {
            converged = true;
            break;
        }
    }
    let v = crate::eso::v_bucket(x, buckets, &p);
    AlternatingResult {
        p,
        v,
        diffs,
        converged,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Rule {
    /// One coordinate drawn from `p`.
    Serial {
        p: Vec<f64>,
    },
    /// Uniform subset of size `tau`.
    TauNice {
        tau: usize,
    },
    /// One coordinate per bucket, drawn from `p` restricted to the bucket.
    Bucket {
        buckets: Partition,
        p: Vec<f64>,
    },
    /// `tau` groups uniformly without replacement; the block is their union.
    Chunked {
        groups: Partition,
        tau: usize,
    },
    GreedySerial,
    GreedyMinibatch {
        tau: usize,
    },
}

/// An immutable sampling descriptor over `n` coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct Sampling {
    n: usize,
    rule: Rule,
}

fn check_probs(p: &[f64], what: &str) -> Result<()> {
    if p.iter().any(|&x| !(x >= 0.0 && x.is_finite())) {
        return Err(Error::invalid(format!(
            "{what}: negative or non-finite probability"
        )));
    }
    Ok(())
}

impl Sampling {
    pub fn new(n: usize, rule: Rule) -> Result<Self> {
        if n == 0 {
            return Err(Error::Empty);
        }
        match &rule {
            Rule::Serial { p } => {
                if p.len() != n {
                    return Err(Error::invalid("serial p has the wrong length"));
                }
                check_probs(p, "serial")?;
                let s: f64 = p.iter().sum();
                if (s - 1.0).abs() > 1e-9 {
                    return Err(Error::invalid(format!("serial p sums to {s}")));
                }
            }
            Rule::TauNice { tau } | Rule::GreedyMinibatch { tau } => {
                if *tau == 0 || *tau > n {
                    return Err(Error::invalid(format!("tau = {tau} must lie in 1..={n}")));
                }
            }
            Rule::Bucket { buckets, p } => {
                if buckets.n() != n || p.len() != n {
                    return Err(Error::invalid("bucket sampling size mismatch"));
                }
                check_probs(p, "bucket")?;
                for (l, g) in buckets.groups().iter().enumerate() {
                    let s: f64 = g.iter().map(|&j| p[j]).sum();
                    if (s - 1.0).abs() > 1e-9 {
                        return Err(Error::invalid(format!(
                            "bucket {l} probabilities sum to {s}"
                        )));
                    }
                }
            }
            Rule::Chunked { groups, tau } => {
                if groups.n() != n {
                    return Err(Error::invalid("chunk partition size mismatch"));
                }
                if *tau == 0 || *tau > groups.len() {
                    return Err(Error::invalid(format!(
                        "tau = {tau} must lie in 1..={}",
                        groups.len()
                    )));
                }
            }
            Rule::GreedySerial => {}
        }
        Ok(Self { n, rule })
    }

    pub fn uniform(n: usize) -> Self {
        Self::new(
            n,
            Rule::Serial {
                p: vec![1.0 / n as f64; n],
            },
        )
        .expect("uniform")
    }

    pub fn serial(p: Vec<f64>) -> Result<Self> {
        Self::new(p.len(), Rule::Serial { p })
    }

    pub fn tau_nice(n: usize, tau: usize) -> Result<Self> {
        Self::new(n, Rule::TauNice { tau })
    }

    pub fn bucket(buckets: Partition, p: Vec<f64>) -> Result<Self> {
        Self::new(buckets.n(), Rule::Bucket { buckets, p })
    }

    pub fn chunked(groups: Partition, tau: usize) -> Result<Self> {
        Self::new(groups.n(), Rule::Chunked { groups, tau })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rule(&self) -> &Rule {
        &self.rule
    }

    pub fn name(&self) -> &'static str {
        match self.rule {
            Rule::Serial { .. } => "serial",
            Rule::TauNice { .. } => "tau_nice",
            Rule::Bucket { .. } => "bucket",
            Rule::Chunked { .. } => "chunked",
            Rule::GreedySerial => "greedy_serial",
            Rule::GreedyMinibatch { .. } => "greedy_minibatch",
        }
    }

    /// `P(j in S)`; `None` for the greedy rules, which are deterministic.
    pub fn marginals(&self) -> Option<Vec<f64>> {
        let n = self.n;
        match &self.rule {
            Rule::Serial { p } | Rule::Bucket { p, .. } => Some(p.clone()),
            Rule::TauNice { tau } => Some(vec![*tau as f64 / n as f64; n]),
            Rule::Chunked { groups, tau } => Some(vec![*tau as f64 / groups.len() as f64; n]),
            Rule::GreedySerial | Rule::GreedyMinibatch { .. } => None,
        }
    }

    /// `E|S|`
    pub fn expected_size(&self) -> f64 {
        match &self.rule {
            Rule::Serial { .. } | Rule::GreedySerial => 1.0,
            Rule::TauNice { tau } | Rule::GreedyMinibatch { tau } => *tau as f64,
            Rule::Bucket { buckets, .. } => buckets.len() as f64,
            Rule::Chunked { groups, tau } => *tau as f64 * self.n as f64 / groups.len() as f64,
        }
    }
}

/// A sampled block, split into the units a parallel machine would run side by side.
#[derive(Clone, Debug, PartialEq)]
pub struct Block {
    pub units: Vec<Vec<usize>>,
    /// Set when a greedy rule fell back to its heuristic.
    pub heuristic: bool,
}

impl Block {
    fn singletons(ix: Vec<usize>) -> Self {
        Block {
            units: ix.into_iter().map(|j| vec![j]).collect(),
            heuristic: false,
        }
    }

    pub fn indices(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.units.iter().flatten().copied().collect();
        v.sort_unstable();
        v
    }

    pub fn len(&self) -> usize {
        self.units.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Extra state some rules need to pick a block.
#[derive(Clone, Copy, Debug)]
pub enum Context<'a> {
    None,
    /// Per-coordinate scores, e.g. `g_i^2 / M_ii` or `lambda_i(x)`.
    Scores(&'a [f64]),
    /// Gradient and smoothness matrix for the exact smooth greedy block.
    Quadratic {
        grad: &'a [f64],
        m: &'a DMatrix<f64>,
    },
}

/// Above this many subsets the smooth greedy minibatch uses the heuristic.
pub const GREEDY_ENUM_LIMIT: f64 = 1e5;

pub fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k.min(n));
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Indices of the `tau` largest scores, ties to the lowest index.
pub fn top_k(scores: &[f64], tau: usize) -> Vec<usize> {
    let mut ix: Vec<usize> = (0..scores.len()).collect();
    ix.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    ix.truncate(tau);
    ix.sort_unstable();
    ix
}

/// `g_S^T M_S^{-1} g_S`
pub fn block_quadratic(grad: &[f64], m: &DMatrix<f64>, s: &[usize]) -> Option<f64> {
    let ms = DMatrix::from_fn(s.len(), s.len(), |a, b| m[(s[a], s[b])]);
    let gs = nalgebra::DVector::from_iterator(s.len(), s.iter().map(|&i| grad[i]));
    let sol = ms.cholesky()?.solve(&gs);
    Some(gs.dot(&sol))
}

/// Per-run sampling state: probability trees for the nonuniform rules.
#[derive(Clone, Debug)]
pub struct Sampler<'a> {
    sampling: &'a Sampling,
    trees: Vec<ProbabilityTree>,
}

impl<'a> Sampler<'a> {
    pub fn new(sampling: &'a Sampling) -> Result<Self> {
        let trees = match sampling.rule() {
            Rule::Serial { p } => vec![ProbabilityTree::new(p)?],
            Rule::Bucket { buckets, p } => buckets
                .groups()
                .iter()
                .map(|g| ProbabilityTree::new(&g.iter().map(|&j| p[j]).collect::<Vec<_>>()))
                .collect::<Result<_>>()?,
            _ => Vec::new(),
        };
        Ok(Self { sampling, trees })
    }

    pub fn sampling(&self) -> &Sampling {
        self.sampling
    }

    pub fn draw(&mut self, ctx: Context<'_>, rng: &mut Rng) -> Result<Block> {
        let n = self.sampling.n();
        match self.sampling.rule() {
            Rule::Serial { .. } => Ok(Block::singletons(vec![self.trees[0].sample(rng)])),
            Rule::TauNice { tau } => {
                let mut ix = rand::seq::index::sample(rng, n, *tau).into_vec();
                ix.sort_unstable();
                Ok(Block::singletons(ix))
            }
            Rule::Bucket { buckets, .. } => {
                let ix = buckets
                    .groups()
                    .iter()
                    .zip(&self.trees)
                    .map(|(g, t)| g[t.sample(rng)])
                    .collect();
                Ok(Block::singletons(ix))
            }
            Rule::Chunked { groups, tau } => {
                let mut pick = rand::seq::index::sample(rng, groups.len(), *tau).into_vec();
                pick.sort_unstable();
                let units = pick
                    .into_iter()
                    .map(|g| groups.groups()[g].clone())
                    .collect();
                Ok(Block {
                    units,
                    heuristic: false,
                })
            }
            Rule::GreedySerial => {
                let scores = greedy_scores(ctx)?;
                Ok(Block::singletons(top_k(&scores, 1)))
            }
            Rule::GreedyMinibatch { tau } => match ctx {
                Context::Scores(s) => Ok(Block::singletons(top_k(s, *tau))),
                Context::Quadratic { grad, m } => {
                    if binomial(n, *tau) <= GREEDY_ENUM_LIMIT {
                        let mut best: Option<(f64, Vec<usize>)> = None;
                        for s in (0..n).combinations(*tau) {
                            let q = block_quadratic(grad, m, &s).ok_or_else(|| {
                                Error::Numerical("M_S is not positive definite".into())
                            })?;
                            // strict > keeps the lexicographically first maximizer
                            if best.as_ref().is_none_or(|b| q > b.0) {
                                best = Some((q, s));
                            }
                        }
                        Ok(Block::singletons(best.expect("at least one subset").1))
                    } else {
                        let scores = greedy_scores(ctx)?;
                        let mut b = Block::singletons(top_k(&scores, *tau));
                        b.heuristic = true;
                        Ok(b)
                    }
                }
                Context::None => Err(Error::invalid("greedy rule needs scores or a gradient")),
            },
        }
    }
}

fn greedy_scores(ctx: Context<'_>) -> Result<Vec<f64>> {
    match ctx {
        Context::Scores(s) => Ok(s.to_vec()),
        Context::Quadratic { grad, m } => Ok(grad
            .iter()
            .enumerate()
            .map(|(i, g)| g * g / m[(i, i)])
            .collect()),
        Context::None => Err(Error::invalid("greedy rule needs scores or a gradient")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use proptest::prelude::*;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    fn chi2_pvalue(counts: &[usize], probs: &[f64]) -> f64 {
        let total: usize = counts.iter().sum();
        let mut stat = 0.0;
        let mut cells = 0;
        for (&c, &p) in counts.iter().zip(probs) {
            if p == 0.0 {
                assert_eq!(c, 0, "zero-probability index was sampled");
                continue;
            }
            let e = p * total as f64;
            stat += (c as f64 - e).powi(2) / e;
            cells += 1;
        }
        if cells < 2 {
            return 1.0;
        }
        1.0 - ChiSquared::new((cells - 1) as f64).unwrap().cdf(stat)
    }

    fn tally(t: &ProbabilityTree, draws: usize, seed: u64) -> Vec<usize> {
        let mut rng = stream(seed, 1);
        let mut c = vec![0; t.len()];
        for _ in 0..draws {
            c[t.sample(&mut rng)] += 1;
        }
        c
    }

    #[test]
    fn tree_frequencies() {
        let t = ProbabilityTree::new(&[1.0, 0.0, 3.0]).unwrap();
        let c = tally(&t, 100_000, 1);
        assert_eq!(c[1], 0);
        let f = c[0] as f64 / 1e5;
        let sd = (0.25f64 * 0.75 / 1e5).sqrt();
        assert!((f - 0.25).abs() <= 4.0 * sd, "{f}");
        assert!(chi2_pvalue(&c, &[0.25, 0.0, 0.75]) > 1e-3);
    }

    #[test]
    fn tree_update_and_edges() {
        let mut t = ProbabilityTree::new(&[1.0, 0.0, 3.0]).unwrap();
        t.update(0, 3.0).unwrap();
        assert_eq!(t.probability(0), 0.5);
        assert!(t.is_consistent());
        let one = ProbabilityTree::new(&[2.0]).unwrap();
        let mut rng = stream(0, 1);
        assert!((0..100).all(|_| one.sample(&mut rng) == 0));
        assert!(ProbabilityTree::new(&[0.0, 0.0]).is_err());
        assert!(ProbabilityTree::new(&[1.0, -1.0]).is_err());
        let mut t = ProbabilityTree::new(&[1.0, 0.0]).unwrap();
        assert!(t.update(0, 0.0).is_err());
        assert_eq!(t.weight(0), 1.0);
    }

    #[test]
    fn importance_examples() {
        assert_eq!(
            importance_probs(&[1.0, 3.0], 2.0),
            vec![3.0 / 8.0, 5.0 / 8.0]
        );
        assert_eq!(importance_probs(&[2.0; 4], 1.0), vec![0.25; 4]);
        assert_eq!(importance_probs(&[0.0; 5], 0.1), vec![0.2; 5]);
    }

    #[test]
    fn adasdca_examples() {
        assert_eq!(
            adasdca_probs(&[1.0, 0.0], &[5.0, 1.0], 1.0).unwrap(),
            vec![1.0, 0.0]
        );
        let p = adasdca_probs(&[1.0, 1.0], &[0.0, 3.0], 1.0).unwrap();
        assert!((p[0] - 1.0 / 3.0).abs() < 1e-15 && (p[1] - 2.0 / 3.0).abs() < 1e-15);
        let q = adasdca_probs(&[7.0, 7.0], &[0.0, 3.0], 1.0).unwrap();
        assert_eq!(p, q);
        assert!(matches!(
            adasdca_probs(&[0.0, 0.0], &[1.0, 1.0], 1.0),
            Err(Error::Optimal)
        ));
    }

    #[test]
    fn theta_examples() {
        let th = theta_kappa_p(&[2.0, 0.0], &[0.4, 0.6], &[3.0, 1.0], 1.5).unwrap();
        assert!((th - 0.4 * 1.5 / 4.5).abs() < 1e-15);
        let v = [1.0, 4.0, 0.5];
        let nlg = 0.7;
        let p = importance_probs(&v, nlg);
        let want = nlg / v.iter().map(|x| x + nlg).sum::<f64>();
        for kappa in [[1.0, 2.0, 3.0], [0.0, -1.0, 0.1]] {
            assert!((theta_kappa_p(&kappa, &p, &v, nlg).unwrap() - want).abs() < 1e-14);
        }
        assert!(theta_kappa_p(&[1.0, 1.0], &[1.0, 0.0], &[1.0, 1.0], 1.0).is_err());
    }

    #[test]
    fn chunk_examples() {
        let p = naive_chunks(&[3, 1, 1, 1, 3]).unwrap();
        assert_eq!(p.groups(), &[vec![0], vec![1, 2, 3], vec![4]]);
        assert_eq!(naive_chunks(&[2, 2, 2]).unwrap().len(), 3);
        assert_eq!(naive_chunks(&[1, 1, 1, 1]).unwrap().len(), 4);
    }

    #[test]
    fn bucket_examples() {
        let mut rng = stream(3, 4);
        let b = random_buckets(6, 3, &mut rng).unwrap();
        assert!(b.groups().iter().all(|g| g.len() == 2));
        assert_eq!(random_buckets(5, 1, &mut rng).unwrap().len(), 1);
        assert_eq!(random_buckets(5, 5, &mut rng).unwrap().len(), 5);
        assert!(random_buckets(3, 4, &mut rng).is_err());
        let b7 = random_buckets(7, 3, &mut rng).unwrap();
        let mut sizes: Vec<usize> = b7.groups().iter().map(Vec::len).collect();
        sizes.sort();
        assert_eq!(sizes, vec![2, 2, 3]);
    }

    #[test]
    fn practical_probs_examples() {
        let b = Partition::new(2, vec![vec![0, 1]]).unwrap();
        let p = bucket_probs_practical(&[1.0, 3.0], 1.0, &b);
        assert!((p[0] - 1.0 / 3.0).abs() < 1e-15 && (p[1] - 2.0 / 3.0).abs() < 1e-15);
        let b = Partition::new(4, vec![vec![0, 3], vec![1, 2]]).unwrap();
        assert_eq!(bucket_probs_practical(&[2.0; 4], 1.0, &b), vec![0.5; 4]);
        assert_eq!(
            bucket_probs_practical(&[1.0, 5.0, 2.0], 1.0, &Partition::singletons(3)),
            vec![1.0; 3]
        );
    }

    #[test]
    fn alternating_examples() {
        // dense all-ones, equal buckets: uniform is the fixed point
        let ones = SparseMatrix::from_dense(&vec![vec![1.0; 8]; 3]).unwrap();
        let b = Partition::new(8, vec![vec![0, 1, 2, 3], vec![4, 5, 6, 7]]).unwrap();
        let r = bucket_probs_alternating(&ones, &b, 1.0, 1e-12, 50);
        assert!(r.converged);
        assert!(r.p.iter().all(|&x| (x - 0.25).abs() < 1e-12));
        let r = bucket_probs_alternating(&ones, &Partition::singletons(8), 1.0, 1e-12, 50);
        assert_eq!(r.diffs.len(), 1);
        assert!(r.p.iter().all(|&x| x == 1.0));
    }

    #[test]
    fn alternating_decreases() {
        let mut rng = stream(21, 2);
        let mut cols = Vec::new();
        for _ in 0..200 {
            let mut c = Vec::new();
            for i in 0..50 {
                let u: f64 = rng.random();
                if u < 0.1 {
                    c.push((i, rng.random::<f64>() * 3.0 + 0.01));
                }
            }
            if c.is_empty() {
                c.push((rng.random_range(0..50), 1.0));
            }
            cols.push(c);
        }
        let x = SparseMatrix::from_columns(50, cols).unwrap();
        let b = random_buckets(200, 4, &mut rng).unwrap();
        let r = bucket_probs_alternating(&x, &b, 200.0 * 0.01, 0.0, 6);
        assert!(r.diffs.len() >= 5);
        for w in r.diffs.windows(2) {
            assert!(w[1] <= w[0], "{:?}", r.diffs);
        }
    }

    #[test]
    fn draw_examples() {
        let mut rng = stream(1, 1);
        let s = Sampling::tau_nice(5, 5).unwrap();
        let mut sm = Sampler::new(&s).unwrap();
        assert_eq!(
            sm.draw(Context::None, &mut rng).unwrap().indices(),
            vec![0, 1, 2, 3, 4]
        );
        let s = Sampling::bucket(Partition::singletons(4), vec![1.0; 4]).unwrap();
        let mut sm = Sampler::new(&s).unwrap();
        assert_eq!(
            sm.draw(Context::None, &mut rng).unwrap().indices(),
            vec![0, 1, 2, 3]
        );
        let s = Sampling::new(3, Rule::GreedySerial).unwrap();
        let m = DMatrix::identity(3, 3);
        let g = [3.0, -4.0, 1.0];
        let mut sm = Sampler::new(&s).unwrap();
        let b = sm
            .draw(Context::Quadratic { grad: &g, m: &m }, &mut rng)
            .unwrap();
        assert_eq!(b.indices(), vec![1]);
        assert!(sm.draw(Context::None, &mut rng).is_err());
    }

    #[test]
    fn greedy_minibatch_exact_vs_heuristic() {
        let mut rng = stream(1, 1);
        // correlated M where the top-2 diagonal scores are not the best pair
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 0.9, 0.0, 0.9, 1.0, 0.0, 0.0, 0.0, 1.0]);
        let g = [1.0, 1.0, 0.9];
        let s = Sampling::new(3, Rule::GreedyMinibatch { tau: 2 }).unwrap();
        let mut sm = Sampler::new(&s).unwrap();
        let b = sm
            .draw(Context::Quadratic { grad: &g, m: &m }, &mut rng)
            .unwrap();
        assert!(!b.heuristic);
        assert_eq!(b.indices(), vec![0, 2]);
        assert_eq!(top_k(&[1.0, 2.0, 2.0, 0.5], 2), vec![1, 2]);
        assert_eq!(top_k(&[1.0, 1.0, 1.0], 1), vec![0]);
        let n = 40;
        let big = DMatrix::identity(n, n);
        let g: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let s = Sampling::new(n, Rule::GreedyMinibatch { tau: 10 }).unwrap();
        let mut sm = Sampler::new(&s).unwrap();
        let b = sm
            .draw(Context::Quadratic { grad: &g, m: &big }, &mut rng)
            .unwrap();
        assert!(b.heuristic);
        assert_eq!(b.indices(), (30..40).collect::<Vec<_>>());
    }

    fn marginal_check(s: &Sampling, draws: usize, seed: u64) {
        let mut rng = stream(seed, 1);
        let mut sm = Sampler::new(s).unwrap();
        let mut c = vec![0usize; s.n()];
        for _ in 0..draws {
            for j in sm.draw(Context::None, &mut rng).unwrap().indices() {
                c[j] += 1;
            }
        }
        for (j, p) in s.marginals().unwrap().into_iter().enumerate() {
            let f = c[j] as f64 / draws as f64;
            let sd = (p * (1.0 - p) / draws as f64).sqrt();
            assert!((f - p).abs() <= 4.0 * sd + 1e-12, "j={j} f={f} p={p}");
        }
    }

    #[test]
    fn marginals_match() {
        marginal_check(&Sampling::tau_nice(9, 4).unwrap(), 20_000, 2);
        let mut rng = stream(5, 4);
        let b = random_buckets(9, 3, &mut rng).unwrap();
        let v: Vec<f64> = (0..9).map(|j| j as f64).collect();
        let p = bucket_probs_practical(&v, 1.0, &b);
        marginal_check(&Sampling::bucket(b, p).unwrap(), 20_000, 3);
        let g = naive_chunks(&[3, 1, 1, 1, 3, 2, 1]).unwrap();
        marginal_check(&Sampling::chunked(g, 2).unwrap(), 20_000, 4);
        marginal_check(
            &Sampling::serial(importance_probs(&v, 2.0)).unwrap(),
            20_000,
            5,
        );
    }

    #[test]
    fn sampling_validation() {
        assert!(Sampling::serial(vec![0.5, 0.6]).is_err());
        assert!(Sampling::tau_nice(3, 0).is_err());
        let b = Partition::new(3, vec![vec![0, 1], vec![2]]).unwrap();
        assert!(Sampling::bucket(b, vec![0.5, 0.4, 1.0]).is_err());
        assert!(Partition::new(3, vec![vec![0, 1], vec![1, 2]]).is_err());
        assert!(Partition::new(3, vec![vec![0, 1]]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn tree_exact_after_updates(w in proptest::collection::vec(0.0f64..5.0, 1..12),
                                    ups in proptest::collection::vec((0usize..12, 0.0f64..5.0), 0..10),
                                    seed in 0u64..1000) {
            prop_assume!(w.iter().sum::<f64>() > 0.1);
            let mut t = ProbabilityTree::new(&w).unwrap();
            for (i, x) in ups {
                let _ = t.update(i % w.len(), x);
            }
            prop_assert!(t.is_consistent());
            let probs: Vec<f64> = (0..w.len()).map(|i| t.probability(i)).collect();
            let c = tally(&t, 100_000, seed);
            prop_assert!(chi2_pvalue(&c, &probs) > 1e-3);
        }

        #[test]
        fn adaptive_is_coherent(kappa in proptest::collection::vec(prop_oneof![Just(0.0), -3.0f64..3.0], 1..10),
                                vs in proptest::collection::vec(0.0f64..4.0, 10), nlg in 0.01f64..3.0) {
            prop_assume!(kappa.iter().any(|&k| k != 0.0));
            let v = &vs[..kappa.len()];
            let p = adasdca_probs(&kappa, v, nlg).unwrap();
            for (k, q) in kappa.iter().zip(&p) {
                prop_assert_eq!(*k != 0.0, *q > 0.0);
            }
        }

        #[test]
        fn adaptive_probs_maximize_theta(kappa in proptest::collection::vec(-3.0f64..3.0, 2..8),
                                         vs in proptest::collection::vec(0.0f64..4.0, 8),
                                         nlg in 0.01f64..3.0,
                                         raw in proptest::collection::vec(proptest::collection::vec(0.01f64..1.0, 8), 100)) {
            let n = kappa.len();
            let v = &vs[..n];
            let best = theta_kappa_p(&kappa, &adasdca_probs(&kappa, v, nlg).unwrap(), v, nlg).unwrap();
            for r in raw {
                let s: f64 = r[..n].iter().sum();
                let p: Vec<f64> = r[..n].iter().map(|x| x / s).collect();
                prop_assert!(theta_kappa_p(&kappa, &p, v, nlg).unwrap() <= best * (1.0 + 1e-12));
            }
        }

        #[test]
        fn chunks_are_balanced(nnz in proptest::collection::vec(1usize..20, 1..40)) {
            let m = *nnz.iter().max().unwrap();
            let p = naive_chunks(&nnz).unwrap();
            let mut next = 0;
            for g in p.groups() {
                prop_assert_eq!(g[0], next);
                prop_assert!(g.windows(2).all(|w| w[1] == w[0] + 1));
                next = *g.last().unwrap() + 1;
                prop_assert!(g.iter().map(|&j| nnz[j]).sum::<usize>() <= m);
            }
        }
    }
}
