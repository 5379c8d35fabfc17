//! Anisotropic isolation trees and forests.
//!
//! A tree splits its data at each internal node by the hyperplane through the
//! intercept `p` with normal `w`: points with `(x - p)'w <= 0` go left, the
//! rest go right. Normals are drawn from the forest's [`NormalDistribution`],
//! so `N(0, I)` gives the ordinary extended isolation forest and any other
//! covariance or mixture tilts the cuts toward preferred orientations.
//!
//! Trees are built in parallel. Tree `i` draws its subsample and all of its
//! split parameters from `RngStream::new(seed, i)`, which makes the result
//! independent of thread count and scheduling.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{bounding_box, Dataset};
use crate::error::{Error, Result};
use crate::linalg::check_len;
use crate::sampling::{
    apply_extension_mask, sample_intercept, ExtensionLevel, NormalDistribution, RngStream,
};

/// Euler-Mascheroni constant as used by the path-length normalization.
pub const EULER_GAMMA: f64 = 0.5772156649;

/// Masking or sampling failures tolerated before a node becomes a leaf.
pub const MAX_SPLIT_ATTEMPTS: usize = 16;

/// Average path length of an unsuccessful binary-search-tree lookup among `n`
/// points: `2 H(n-1) - 2 (n-1)/n` with `H(m) = ln m + gamma`. Zero for
/// `n < 2`.
pub fn c_factor(n: usize) -> f64 {
    if n < 2 {
        return 0.0;
    }
    let m = (n - 1) as f64;
    2.0 * (m.ln() + EULER_GAMMA) - 2.0 * m / n as f64
}

/// `ceil(log2(subsample))`
pub fn height_limit(subsample: usize) -> usize {
    if subsample <= 1 {
        0
    } else {
        (usize::BITS - (subsample - 1).leading_zeros()) as usize
    }
}

/// `2^(-E(h) / c)`
#[inline]
pub fn anomaly_score(mean_path_length: f64, normalizer: f64) -> f64 {
    (-mean_path_length / normalizer).exp2()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// Which side of the hyperplane `(x - p)'w = 0` the point falls on.
#[inline]
pub fn split_side(x: &[f64], normal: &[f64], intercept: &[f64]) -> Side {
    let s: f64 = x
        .iter()
        .zip(intercept)
        .zip(normal)
        .map(|((xi, pi), wi)| (xi - pi) * wi)
        .sum();
    if s <= 0.0 {
        Side::Left
    } else {
        Side::Right
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Node {
    Split {
        normal: Vec<f64>,
        intercept: Vec<f64>,
        left: usize,
        right: usize,
    },
    Leaf {
        size: usize,
    },
}

/// One isolation tree, stored as a pre-order node arena rooted at index 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TreeRepr")]
pub struct Tree {
    height_limit: usize,
    nodes: Vec<Node>,
}

#[derive(Deserialize)]
struct TreeRepr {
    height_limit: usize,
    nodes: Vec<Node>,
}

impl TryFrom<TreeRepr> for Tree {
    type Error = Error;

    fn try_from(r: TreeRepr) -> Result<Self> {
        Tree::from_nodes(r.nodes, r.height_limit)
    }
}

impl Tree {
    /// Grows a tree on `points` with the given height limit.
    pub fn build<R: AsRef<[f64]>>(
        points: &[R],
        height_limit: usize,
        distribution: &NormalDistribution,
        extension: ExtensionLevel,
        rng: &mut RngStream,
    ) -> Self {
        let mut sampler = |rng: &mut RngStream| distribution.sample(rng);
        Self::build_with(points, height_limit, &mut sampler, extension, rng)
    }

    /// As [`Tree::build`] with an arbitrary normal-vector sampler.
    pub fn build_with<R, F>(
        points: &[R],
        height_limit: usize,
        sampler: &mut F,
        extension: ExtensionLevel,
        rng: &mut RngStream,
    ) -> Self
    where
        R: AsRef<[f64]>,
        F: FnMut(&mut RngStream) -> Vec<f64>,
    {
        let refs: Vec<&[f64]> = points.iter().map(|p| p.as_ref()).collect();
        let mut nodes = Vec::new();
        grow(&mut nodes, refs, 0, height_limit, sampler, extension, rng);
        Self {
            height_limit,
            nodes,
        }
    }

    /// Assembles a tree from a pre-order arena, checking that every node is
    /// reachable exactly once from the root and children follow parents.
    pub fn from_nodes(nodes: Vec<Node>, height_limit: usize) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::EmptyInput);
        }
        let mut seen = vec![false; nodes.len()];
        let mut stack = vec![(0usize, 0usize)];
        let mut dim = None;
        while let Some((i, depth)) = stack.pop() {
            if seen[i] {
                return Err(Error::InvalidParameter(format!("node {i} reached twice")));
            }
            seen[i] = true;
            if let Node::Split {
                normal,
                intercept,
                left,
                right,
            } = &nodes[i]
            {
                let d = *dim.get_or_insert(normal.len());
                check_len(d, normal.len())?;
                check_len(d, intercept.len())?;
                if normal.iter().all(|w| *w == 0.0) {
                    return Err(Error::DegenerateNormal);
                }
                for &child in [left, right] {
                    if child <= i || child >= nodes.len() {
                        return Err(Error::InvalidParameter(format!(
                            "node {i} has invalid child index {child}"
                        )));
                    }
                    stack.push((child, depth + 1));
                }
            }
            if depth > height_limit {
                return Err(Error::InvalidParameter(format!(
                    "node {i} at depth {depth} exceeds height limit {height_limit}"
                )));
            }
        }
        if let Some(orphan) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidParameter(format!(
                "node {orphan} is unreachable"
            )));
        }
        Ok(Self {
            height_limit,
            nodes,
        })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn root(&self) -> &Node {
        &self.nodes[0]
    }

    pub fn height_limit(&self) -> usize {
        self.height_limit
    }

    /// Depth and size of the leaf that `x` falls into.
    pub fn locate(&self, x: &[f64]) -> (usize, usize) {
        let mut i = 0;
        let mut depth = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { size } => return (depth, *size),
                Node::Split {
                    normal,
                    intercept,
                    left,
                    right,
                } => {
                    i = match split_side(x, normal, intercept) {
                        Side::Left => *left,
                        Side::Right => *right,
                    };
                    depth += 1;
                }
            }
        }
    }

    /// Edges from the root to `x`'s leaf, plus `c(size)` at that leaf when
    /// `leaf_adjustment` is on.
    pub fn path_length(&self, x: &[f64], leaf_adjustment: bool) -> f64 {
        let (depth, size) = self.locate(x);
        if leaf_adjustment {
            depth as f64 + c_factor(size)
        } else {
            depth as f64
        }
    }

    /// `(depth, size)` of every leaf, pre-order.
    pub fn leaves(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        let mut stack = vec![(0usize, 0usize)];
        while let Some((i, depth)) = stack.pop() {
            match &self.nodes[i] {
                Node::Leaf { size } => out.push((depth, *size)),
                Node::Split { left, right, .. } => {
                    stack.push((*right, depth + 1));
                    stack.push((*left, depth + 1));
                }
            }
        }
        out
    }

    pub fn max_depth(&self) -> usize {
        self.leaves().iter().map(|(d, _)| *d).max().unwrap_or(0)
    }

    pub fn split_normals(&self) -> impl Iterator<Item = &[f64]> {
        self.nodes.iter().filter_map(|n| match n {
            Node::Split { normal, .. } => Some(normal.as_slice()),
            Node::Leaf { .. } => None,
        })
    }
}

fn grow<F>(
    nodes: &mut Vec<Node>,
    points: Vec<&[f64]>,
    depth: usize,
    limit: usize,
    sampler: &mut F,
    extension: ExtensionLevel,
    rng: &mut RngStream,
) -> usize
where
    F: FnMut(&mut RngStream) -> Vec<f64>,
{
    let index = nodes.len();
    if depth >= limit || points.len() <= 1 {
        nodes.push(Node::Leaf { size: points.len() });
        return index;
    }
    let Some((normal, intercept)) = draw_split(&points, sampler, extension, rng) else {
        nodes.push(Node::Leaf { size: points.len() });
        return index;
    };
    let (left_pts, right_pts): (Vec<&[f64]>, Vec<&[f64]>) = points
        .into_iter()
        .partition(|x| split_side(x, &normal, &intercept) == Side::Left);
    nodes.push(Node::Leaf { size: 0 });
    let left = grow(nodes, left_pts, depth + 1, limit, sampler, extension, rng);
    let right = grow(nodes, right_pts, depth + 1, limit, sampler, extension, rng);
    nodes[index] = Node::Split {
        normal,
        intercept,
        left,
        right,
    };
    index
}

/// Draws `(normal, intercept)` for one node: normal from the sampler, then the
/// intercept from the node's bounding box, then the extension mask. A mask
/// that leaves the normal all-zero is redrawn once on the same normal, then
/// the normal is redrawn; after [`MAX_SPLIT_ATTEMPTS`] failures the node gives
/// up and becomes a leaf.
fn draw_split<F>(
    points: &[&[f64]],
    sampler: &mut F,
    extension: ExtensionLevel,
    rng: &mut RngStream,
) -> Option<(Vec<f64>, Vec<f64>)>
where
    F: FnMut(&mut RngStream) -> Vec<f64>,
{
    let mut omega = sampler(rng);
    let (lo, hi) = bounding_box(points);
    let intercept = sample_intercept(&lo, &hi, rng).ok()?;
    let mut failures = 0;
    loop {
        match apply_extension_mask(&omega, extension, rng) {
            Ok(normal) => return Some((normal, intercept)),
            Err(_) => {
                failures += 1;
                if failures >= MAX_SPLIT_ATTEMPTS {
                    return None;
                }
                if failures % 2 == 0 {
                    omega = sampler(rng);
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForestParams {
    pub trees: usize,
    pub subsample: usize,
    pub extension: ExtensionLevel,
    pub seed: u64,
    pub leaf_adjustment: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            trees: 500,
            subsample: 128,
            extension: ExtensionLevel::Full,
            seed: 0,
            leaf_adjustment: true,
        }
    }
}

/// Per-point mean path length and anomaly score.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreReport {
    pub mean_path_lengths: Vec<f64>,
    pub scores: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ForestRepr")]
pub struct Forest {
    dim: usize,
    subsample: usize,
    height_limit: usize,
    distribution: NormalDistribution,
    extension: ExtensionLevel,
    seed: u64,
    leaf_adjustment: bool,
    trees: Vec<Tree>,
}

#[derive(Deserialize)]
struct ForestRepr {
    dim: usize,
    subsample: usize,
    height_limit: usize,
    distribution: NormalDistribution,
    extension: ExtensionLevel,
    seed: u64,
    leaf_adjustment: bool,
    trees: Vec<Tree>,
}

impl TryFrom<ForestRepr> for Forest {
    type Error = Error;

    fn try_from(r: ForestRepr) -> Result<Self> {
        check_len(r.dim, r.distribution.dim())?;
        r.extension.resolve(r.dim)?;
        if r.subsample < 2 || r.height_limit != height_limit(r.subsample) {
            return Err(Error::InvalidParameter(format!(
                "height limit {} does not match subsample size {}",
                r.height_limit, r.subsample
            )));
        }
        if r.trees.is_empty() {
            return Err(Error::InvalidParameter("forest has no trees".into()));
        }
        for tree in &r.trees {
            if tree.height_limit != r.height_limit {
                return Err(Error::InvalidParameter(
                    "tree height limit differs from forest".into(),
                ));
            }
            if let Some(w) = tree.split_normals().next() {
                check_len(r.dim, w.len())?;
            }
        }
        Ok(Self {
            dim: r.dim,
            subsample: r.subsample,
            height_limit: r.height_limit,
            distribution: r.distribution,
            extension: r.extension,
            seed: r.seed,
            leaf_adjustment: r.leaf_adjustment,
            trees: r.trees,
        })
    }
}

impl Forest {
    /// Fits `params.trees` trees, each on a without-replacement subsample of
    /// `params.subsample` rows.
    pub fn fit(
        data: &Dataset,
        distribution: NormalDistribution,
        params: &ForestParams,
    ) -> Result<Self> {
        let n = data.len();
        let dim = data.dim();
        check_len(dim, distribution.dim())?;
        if params.trees == 0 {
            return Err(Error::InvalidParameter("trees must be at least 1".into()));
        }
        if params.subsample < 2 {
            return Err(Error::InvalidParameter(
                "subsample must be at least 2".into(),
            ));
        }
        if params.subsample > n {
            return Err(Error::SubsampleTooLarge {
                subsample: params.subsample,
                rows: n,
            });
        }
        params.extension.resolve(dim)?;

        let limit = height_limit(params.subsample);
        let trees = (0..params.trees)
            .into_par_iter()
            .map(|i| {
                let mut rng = RngStream::new(params.seed, i as u64);
                let sample: Vec<&[f64]> = rng
                    .choose_indices(n, params.subsample)
                    .into_iter()
                    .map(|r| data.row(r))
                    .collect();
                Tree::build(&sample, limit, &distribution, params.extension, &mut rng)
            })
            .collect();

        Ok(Self {
            dim,
            subsample: params.subsample,
            height_limit: limit,
            distribution,
            extension: params.extension,
            seed: params.seed,
            leaf_adjustment: params.leaf_adjustment,
            trees,
        })
    }

    /// The standard extended isolation forest: [`Forest::fit`] with `N(0, I)`.
    pub fn fit_isotropic(data: &Dataset, params: &ForestParams) -> Result<Self> {
        Self::fit(data, NormalDistribution::isotropic(data.dim()), params)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn subsample(&self) -> usize {
        self.subsample
    }

    pub fn height_limit(&self) -> usize {
        self.height_limit
    }

    pub fn distribution(&self) -> &NormalDistribution {
        &self.distribution
    }

    pub fn extension(&self) -> ExtensionLevel {
        self.extension
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn leaf_adjustment(&self) -> bool {
        self.leaf_adjustment
    }

    /// Switches between adjusted and raw-depth path lengths without refitting.
    pub fn set_leaf_adjustment(&mut self, on: bool) {
        self.leaf_adjustment = on;
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    /// Score normalizer `c(subsample)`.
    pub fn normalizer(&self) -> f64 {
        c_factor(self.subsample)
    }

    /// Mean path length of `x` over all trees.
    ///
    /// Panics if `x` does not have the forest's dimension.
    pub fn mean_path_length(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.dim, "point dimension");
        let total: f64 = self
            .trees
            .iter()
            .map(|t| t.path_length(x, self.leaf_adjustment))
            .sum();
        total / self.trees.len() as f64
    }

    /// Anomaly score `2^(-E(h(x)) / c(subsample))`.
    ///
    /// Panics if `x` does not have the forest's dimension.
    pub fn score(&self, x: &[f64]) -> f64 {
        anomaly_score(self.mean_path_length(x), self.normalizer())
    }

    pub fn score_all(&self, data: &Dataset) -> Result<ScoreReport> {
        check_len(self.dim, data.dim())?;
        let normalizer = self.normalizer();
        let mean_path_lengths: Vec<f64> = (0..data.len())
            .into_par_iter()
            .map(|i| self.mean_path_length(data.row(i)))
            .collect();
        let scores = mean_path_lengths
            .iter()
            .map(|&h| anomaly_score(h, normalizer))
            .collect();
        Ok(ScoreReport {
            mean_path_lengths,
            scores,
        })
    }

    /// Scores for arbitrary points (e.g. grid cells) in parallel.
    pub fn score_points(&self, points: &[Vec<f64>]) -> Vec<f64> {
        points.par_iter().map(|p| self.score(p)).collect()
    }
}
