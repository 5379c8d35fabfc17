//! Experiment-level computations on fitted forests: score maps, ray profiles,
//! top-fraction labeling, two-sample t-tests and partition export.

use rayon::prelude::*;
use statrs::function::beta::beta_reg;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::forest::{Forest, Node, Tree};
use crate::linalg::check_len;
use crate::sampling::RngStream;

pub const DEFAULT_RHO_MIN: f64 = 1.0;
pub const DEFAULT_RHO_MAX: f64 = 4.0;
pub const DEFAULT_RAY_SAMPLES: usize = 200;

fn check_range(name: &str, (lo, hi): (f64, f64)) -> Result<()> {
    if lo.is_finite() && hi.is_finite() && lo < hi {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} must satisfy lo < hi, got ({lo}, {hi})"
        )))
    }
}

/// Scores at the cell centers of a regular 2D grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid2D {
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    pub resolution: (usize, usize),
    /// Row-major in y: `scores[iy * nx + ix]`.
    pub scores: Vec<f64>,
}

impl Grid2D {
    pub fn center(&self, ix: usize, iy: usize) -> [f64; 2] {
        let (nx, ny) = self.resolution;
        let dx = (self.x_range.1 - self.x_range.0) / nx as f64;
        let dy = (self.y_range.1 - self.y_range.0) / ny as f64;
        [
            self.x_range.0 + (ix as f64 + 0.5) * dx,
            self.y_range.0 + (iy as f64 + 0.5) * dy,
        ]
    }

    pub fn get(&self, ix: usize, iy: usize) -> f64 {
        self.scores[iy * self.resolution.0 + ix]
    }

    /// `x, y, score` per cell.
    pub fn table(&self) -> (Vec<String>, Vec<Vec<f64>>) {
        let (nx, ny) = self.resolution;
        let rows = (0..ny)
            .flat_map(|iy| (0..nx).map(move |ix| (ix, iy)))
            .map(|(ix, iy)| {
                let [x, y] = self.center(ix, iy);
                vec![x, y, self.get(ix, iy)]
            })
            .collect();
        (vec!["x".into(), "y".into(), "score".into()], rows)
    }
}

pub fn score_grid(
    forest: &Forest,
    x_range: (f64, f64),
    y_range: (f64, f64),
    resolution: (usize, usize),
) -> Result<Grid2D> {
    check_len(2, forest.dim())?;
    check_range("x range", x_range)?;
    check_range("y range", y_range)?;
    let (nx, ny) = resolution;
    if nx == 0 || ny == 0 {
        return Err(Error::InvalidParameter("grid resolution must be positive".into()));
    }
    let mut grid = Grid2D {
        x_range,
        y_range,
        resolution,
        scores: Vec::new(),
    };
    let points: Vec<Vec<f64>> = (0..ny)
        .flat_map(|iy| (0..nx).map(move |ix| (ix, iy)))
        .map(|(ix, iy)| grid.center(ix, iy).to_vec())
        .collect();
    grid.scores = forest.score_points(&points);
    Ok(grid)
}

/// Mean score along rays `{(rho cos theta, rho sin theta) : rho in [rho_min, rho_max]}`.
#[derive(Debug, Clone, PartialEq)]
pub struct RayProfile {
    pub thetas: Vec<f64>,
    pub mean_scores: Vec<f64>,
    pub rho_min: f64,
    pub rho_max: f64,
    pub samples_per_ray: usize,
}

impl RayProfile {
    pub fn table(&self) -> (Vec<String>, Vec<Vec<f64>>) {
        (
            vec!["theta".into(), "mean_score".into()],
            self.thetas
                .iter()
                .zip(&self.mean_scores)
                .map(|(t, s)| vec![*t, *s])
                .collect(),
        )
    }
}

/// `samples` radii evenly spaced over `[rho_min, rho_max]`, endpoints included.
/// A single sample sits at `rho_min`.
pub fn ray_radii(rho_min: f64, rho_max: f64, samples: usize) -> Vec<f64> {
    if samples == 1 {
        return vec![rho_min];
    }
    let step = (rho_max - rho_min) / (samples - 1) as f64;
    (0..samples).map(|k| rho_min + k as f64 * step).collect()
}

pub fn ray_mean_scores(
    forest: &Forest,
    thetas: &[f64],
    rho_min: f64,
    rho_max: f64,
    samples_per_ray: usize,
) -> Result<RayProfile> {
    check_len(2, forest.dim())?;
    if !(rho_min >= 0.0 && rho_max > rho_min && rho_max.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "ray radii must satisfy 0 <= rho_min < rho_max, got {rho_min}, {rho_max}"
        )));
    }
    if samples_per_ray == 0 || thetas.is_empty() {
        return Err(Error::EmptyInput);
    }
    let radii = ray_radii(rho_min, rho_max, samples_per_ray);
    let mean_scores = thetas
        .par_iter()
        .map(|theta| {
            let (s, c) = theta.sin_cos();
            let total: f64 = radii.iter().map(|r| forest.score(&[r * c, r * s])).sum();
            total / radii.len() as f64
        })
        .collect();
    Ok(RayProfile {
        thetas: thetas.to_vec(),
        mean_scores,
        rho_min,
        rho_max,
        samples_per_ray,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnomalyLabeling {
    pub threshold: f64,
    pub flags: Vec<bool>,
    pub fraction: f64,
}

impl AnomalyLabeling {
    pub fn count(&self) -> usize {
        self.flags.iter().filter(|f| **f).count()
    }
}

/// Flags the top `q` fraction of scores.
///
/// The threshold is the `ceil(q n)`-th largest score, so at least `ceil(q n)`
/// scores are at or above it. Every score equal to the threshold is flagged,
/// which can flag more rows than `ceil(q n)` when scores tie.
pub fn label_top_fraction(scores: &[f64], q: f64) -> Result<AnomalyLabeling> {
    if scores.is_empty() {
        return Err(Error::EmptyInput);
    }
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::InvalidParameter(format!("fraction {q} outside (0, 1)")));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidParameter("NaN score".into()));
    }
    let n = scores.len();
    let k = ((q * n as f64) - 1e-9).ceil().clamp(1.0, n as f64) as usize;
    let mut sorted = scores.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let threshold = sorted[k - 1];
    Ok(AnomalyLabeling {
        threshold,
        flags: scores.iter().map(|s| *s >= threshold).collect(),
        fraction: q,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TTestResult {
    pub t_statistic: f64,
    pub degrees_of_freedom: f64,
    pub p_value: f64,
    pub mean_a: f64,
    pub mean_b: f64,
}

impl TTestResult {
    /// Result reported when both samples are constant: `p = 1` for equal
    /// means, `p = 0` otherwise.
    pub fn degenerate(mean_a: f64, mean_b: f64, degrees_of_freedom: f64) -> Self {
        let (t, p) = if mean_a == mean_b {
            (0.0, 1.0)
        } else {
            ((mean_a - mean_b).signum() * f64::INFINITY, 0.0)
        };
        Self {
            t_statistic: t,
            degrees_of_freedom,
            p_value: p,
            mean_a,
            mean_b,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TTestKind {
    /// Unequal variances, Welch-Satterthwaite degrees of freedom.
    #[default]
    Welch,
    /// Pooled variance, `n_a + n_b - 2` degrees of freedom.
    Pooled,
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Two-sided p-value of Student's t with `df` degrees of freedom:
/// `I_{df/(df+t^2)}(df/2, 1/2)`.
pub fn student_t_two_sided(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    beta_reg(df / 2.0, 0.5, df / (df + t * t)).clamp(0.0, 1.0)
}

/// Two-sided two-sample t-test.
///
/// Fails with `DegenerateVariance` when both samples are constant; see
/// [`TTestResult::degenerate`] for the conventional values in that case.
pub fn ttest(a: &[f64], b: &[f64], kind: TTestKind) -> Result<TTestResult> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "t-test needs at least 2 observations per sample, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mean_a, var_a) = mean_var(a);
    let (mean_b, var_b) = mean_var(b);
    if var_a == 0.0 && var_b == 0.0 {
        return Err(Error::DegenerateVariance);
    }
    let (se2, df) = match kind {
        TTestKind::Welch => {
            let (ua, ub) = (var_a / na, var_b / nb);
            let df = (ua + ub).powi(2) / (ua * ua / (na - 1.0) + ub * ub / (nb - 1.0));
            (ua + ub, df)
        }
        TTestKind::Pooled => {
            let df = na + nb - 2.0;
            let pooled = ((na - 1.0) * var_a + (nb - 1.0) * var_b) / df;
            (pooled * (1.0 / na + 1.0 / nb), df)
        }
    };
    let t = (mean_a - mean_b) / se2.sqrt();
    Ok(TTestResult {
        t_statistic: t,
        degrees_of_freedom: df,
        p_value: student_t_two_sided(t, df),
        mean_a,
        mean_b,
    })
}

pub fn welch_ttest(a: &[f64], b: &[f64]) -> Result<TTestResult> {
    ttest(a, b, TTestKind::Welch)
}

/// Per-feature t-tests between the rows flagged by `flags_a` and by `flags_b`.
/// Features that are constant in both groups get [`TTestResult::degenerate`].
pub fn compare_anomaly_features(
    data: &Dataset,
    flags_a: &[bool],
    flags_b: &[bool],
    kind: TTestKind,
) -> Result<Vec<TTestResult>> {
    check_len(data.len(), flags_a.len())?;
    check_len(data.len(), flags_b.len())?;
    let rows_a = data.select(flags_a);
    let rows_b = data.select(flags_b);
    if rows_a.len() < 2 || rows_b.len() < 2 {
        return Err(Error::TooFewAnomalies {
            first: rows_a.len(),
            second: rows_b.len(),
        });
    }
    (0..data.dim())
        .map(|j| {
            let a: Vec<f64> = rows_a.iter().map(|r| r[j]).collect();
            let b: Vec<f64> = rows_b.iter().map(|r| r[j]).collect();
            match ttest(&a, &b, kind) {
                Err(Error::DegenerateVariance) => Ok(TTestResult::degenerate(
                    a[0],
                    b[0],
                    (a.len() + b.len() - 2) as f64,
                )),
                other => other,
            }
        })
        .collect()
}

/// A piece of a split line inside its node's cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub start: [f64; 2],
    pub end: [f64; 2],
    pub depth: usize,
}

impl Segment {
    /// Angle to the x-axis in degrees, folded into `[0, 90]`.
    pub fn angle_to_x_axis(&self) -> f64 {
        let dx = (self.end[0] - self.start[0]).abs();
        let dy = (self.end[1] - self.start[1]).abs();
        dy.atan2(dx).to_degrees()
    }

    pub fn length(&self) -> f64 {
        (self.end[0] - self.start[0]).hypot(self.end[1] - self.start[1])
    }
}

pub fn segments_table(segments: &[Segment]) -> (Vec<String>, Vec<Vec<f64>>) {
    (
        ["x0", "y0", "x1", "y1", "depth"].map(String::from).to_vec(),
        segments
            .iter()
            .map(|s| vec![s.start[0], s.start[1], s.end[0], s.end[1], s.depth as f64])
            .collect(),
    )
}

/// Half-plane `s * (x - p)'w <= 0`.
#[derive(Clone, Copy)]
struct HalfPlane {
    normal: [f64; 2],
    offset: f64,
}

impl HalfPlane {
    fn new(normal: &[f64], intercept: &[f64], sign: f64) -> Self {
        let w = [sign * normal[0], sign * normal[1]];
        Self {
            normal: w,
            offset: w[0] * intercept[0] + w[1] * intercept[1],
        }
    }
}

/// Split lines of a 2D tree, each clipped to the cell its node owns within
/// `bounds = (lo, hi)`.
pub fn export_tree_partitions(tree: &Tree, bounds: ([f64; 2], [f64; 2])) -> Result<Vec<Segment>> {
    let (lo, hi) = bounds;
    check_range("x bounds", (lo[0], hi[0]))?;
    check_range("y bounds", (lo[1], hi[1]))?;
    if let Some(n) = tree.split_normals().next() {
        check_len(2, n.len())?;
    }
    let cell = vec![
        HalfPlane::new(&[1.0, 0.0], &hi, 1.0),
        HalfPlane::new(&[1.0, 0.0], &lo, -1.0),
        HalfPlane::new(&[0.0, 1.0], &hi, 1.0),
        HalfPlane::new(&[0.0, 1.0], &lo, -1.0),
    ];
    let mut out = Vec::new();
    clip_node(tree.nodes(), 0, 0, cell, &mut out);
    Ok(out)
}

fn clip_node(nodes: &[Node], i: usize, depth: usize, cell: Vec<HalfPlane>, out: &mut Vec<Segment>) {
    let Node::Split {
        normal,
        intercept,
        left,
        right,
    } = &nodes[i]
    else {
        return;
    };
    // Cyrus-Beck: clip p + t v, v perpendicular to the normal
    let v = [-normal[1], normal[0]];
    let (mut t0, mut t1) = (f64::NEG_INFINITY, f64::INFINITY);
    let mut empty = false;
    for h in &cell {
        let at_p = h.normal[0] * intercept[0] + h.normal[1] * intercept[1] - h.offset;
        let rate = h.normal[0] * v[0] + h.normal[1] * v[1];
        if rate.abs() < 1e-300 {
            if at_p > 0.0 {
                empty = true;
                break;
            }
        } else if rate > 0.0 {
            t1 = t1.min(-at_p / rate);
        } else {
            t0 = t0.max(-at_p / rate);
        }
    }
    if !empty && t0 < t1 {
        let at = |t: f64| [intercept[0] + t * v[0], intercept[1] + t * v[1]];
        out.push(Segment {
            start: at(t0),
            end: at(t1),
            depth,
        });
    }
    let mut left_cell = cell.clone();
    left_cell.push(HalfPlane::new(normal, intercept, 1.0));
    clip_node(nodes, *left, depth + 1, left_cell, out);
    let mut right_cell = cell;
    right_cell.push(HalfPlane::new(normal, intercept, -1.0));
    clip_node(nodes, *right, depth + 1, right_cell, out);
}

pub fn mean_angle_to_x_axis(segments: &[Segment]) -> f64 {
    segments.iter().map(Segment::angle_to_x_axis).sum::<f64>() / segments.len() as f64
}

/// Counts of folded segment angles in `bins` equal bins over `[0, 90]`.
pub fn angle_histogram(segments: &[Segment], bins: usize) -> Vec<usize> {
    let mut counts = vec![0; bins];
    for s in segments {
        let b = ((s.angle_to_x_axis() / 90.0 * bins as f64) as usize).min(bins - 1);
        counts[b] += 1;
    }
    counts
}

/// `n` standard Gaussian points in `d` dimensions from stream 0 of `seed`.
pub fn make_blob(n: usize, d: usize, seed: u64) -> Result<Dataset> {
    if n == 0 || d == 0 {
        return Err(Error::InvalidParameter(format!(
            "blob needs n >= 1 and d >= 1, got n = {n}, d = {d}"
        )));
    }
    let mut rng = RngStream::new(seed, 0);
    let values = (0..n).flat_map(|_| rng.standard_normal_vec(d)).collect();
    Dataset::from_flat(d, values)
}

/// Ranks starting at 1, ties sharing their average rank.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&i, &j| x[i].total_cmp(&x[j]));
    let mut ranks = vec![0.0; x.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && x[order[end]] == x[order[start]] {
            end += 1;
        }
        let rank = (start + end + 1) as f64 / 2.0;
        for &k in &order[start..end] {
            ranks[k] = rank;
        }
        start = end;
    }
    ranks
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    check_len(x.len(), y.len())?;
    if x.len() < 2 {
        return Err(Error::EmptyInput);
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::DegenerateVariance);
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    check_len(x.len(), y.len())?;
    pearson(&average_ranks(x), &average_ranks(y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forest::ForestParams;
    use crate::sampling::NormalDistribution;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    /// Two-sided p by quadrature. With `x = sqrt(df) tan(phi)` the tail mass
    /// of Student's t is proportional to the integral of `cos^(df-1)` over
    /// `[atan(|t|/sqrt(df)), pi/2]`.
    fn p_by_quadrature(t: f64, df: f64) -> f64 {
        let simpson = |a: f64, b: f64| {
            let n = 200_000;
            let h = (b - a) / n as f64;
            let f = |phi: f64| phi.cos().max(0.0).powf(df - 1.0);
            let mut s = f(a) + f(b);
            for k in 1..n {
                s += f(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
            }
            s * h / 3.0
        };
        let phi = (t.abs() / df.sqrt()).atan();
        simpson(phi, FRAC_PI_2) / simpson(0.0, FRAC_PI_2)
    }

    #[test]
    fn welch_hand_example() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0];
        let b = [2.0, 3.0, 4.0, 5.0, 6.0];
        let r = welch_ttest(&a, &b).unwrap();
        assert_abs_diff_eq!(r.t_statistic, -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.degrees_of_freedom, 8.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.p_value, 0.3466, epsilon = 1e-4);
        assert_abs_diff_eq!(r.p_value, p_by_quadrature(-1.0, 8.0), epsilon = 1e-9);
        let s = welch_ttest(&b, &a).unwrap();
        assert_eq!(s.t_statistic, -r.t_statistic);
        assert_eq!(s.p_value, r.p_value);
        let pooled = ttest(&a, &b, TTestKind::Pooled).unwrap();
        assert_abs_diff_eq!(pooled.t_statistic, -1.0, epsilon = 1e-12);
        assert_eq!(pooled.degrees_of_freedom, 8.0);
    }

    #[test]
    fn welch_identical_and_degenerate() {
        let a = [0.3, 1.2, -0.4, 2.2];
        let r = welch_ttest(&a, &a).unwrap();
        assert_eq!((r.t_statistic, r.p_value), (0.0, 1.0));
        assert_eq!(welch_ttest(&[1.0, 1.0], &[2.0, 2.0]), Err(Error::DegenerateVariance));
        assert!(welch_ttest(&[1.0], &[2.0, 3.0]).is_err());
        assert_eq!(TTestResult::degenerate(1.0, 1.0, 2.0).p_value, 1.0);
        assert_eq!(TTestResult::degenerate(1.0, 2.0, 2.0).p_value, 0.0);
    }

    #[test]
    fn welch_matches_quadrature_on_random_pairs() {
        let mut rng = RngStream::new(11, 0);
        for _ in 0..50 {
            let na = 5 + rng.below(26);
            let nb = 5 + rng.below(26);
            let shift = 2.0 * rng.uniform() - 1.0;
            let sa = 0.2 + 3.0 * rng.uniform();
            let a: Vec<f64> = (0..na).map(|_| sa * rng.standard_normal()).collect();
            let b: Vec<f64> = (0..nb).map(|_| shift + rng.standard_normal()).collect();
            let r = welch_ttest(&a, &b).unwrap();
            let oracle = p_by_quadrature(r.t_statistic, r.degrees_of_freedom);
            assert!((r.p_value - oracle).abs() < 1e-6, "{r:?} vs {oracle}");
        }
    }

    #[test]
    fn top_fraction_labeling() {
        let scores: Vec<f64> = (0..100).map(|i| i as f64 / 100.0).collect();
        let l = label_top_fraction(&scores, 0.1).unwrap();
        assert_eq!(l.count(), 10);
        assert!(l.flags[90..].iter().all(|f| *f));

        let l = label_top_fraction(&[0.5; 40], 0.1).unwrap();
        assert_eq!(l.count(), 40);

        let scores: Vec<f64> = (1..=1000).map(|i| i as f64 / 1001.0).collect();
        let l = label_top_fraction(&scores, 0.25).unwrap();
        assert_eq!(l.count(), 250);
        assert!(l.flags[750..].iter().all(|f| *f));

        assert_eq!(label_top_fraction(&[], 0.1), Err(Error::EmptyInput));
        assert!(label_top_fraction(&[0.1], 1.0).is_err());
    }

    #[test]
    fn compare_features() {
        let mut rng = RngStream::new(12, 0);
        let n = 400;
        let flags_a: Vec<bool> = (0..n).map(|i| i < 40).collect();
        let flags_b: Vec<bool> = (0..n).map(|i| (40..80).contains(&i)).collect();
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let mut r = rng.standard_normal_vec(3);
                if i < 40 {
                    r[0] += 5.0;
                }
                r
            })
            .collect();
        let data = Dataset::from_rows(&rows).unwrap();
        let res = compare_anomaly_features(&data, &flags_a, &flags_b, TTestKind::Welch).unwrap();
        assert!(res[0].p_value < 1e-3);
        assert!(res[0].mean_a > res[0].mean_b);

        let same = compare_anomaly_features(&data, &flags_a, &flags_a, TTestKind::Welch).unwrap();
        assert!(same.iter().all(|r| r.p_value == 1.0));

        let one: Vec<bool> = (0..n).map(|i| i == 0).collect();
        assert_eq!(
            compare_anomaly_features(&data, &one, &flags_b, TTestKind::Welch),
            Err(Error::TooFewAnomalies { first: 1, second: 40 })
        );
    }

    #[test]
    fn independent_features_mostly_insignificant() {
        let mut hits = 0;
        for seed in 0..40 {
            let mut rng = RngStream::new(seed, 1);
            let rows: Vec<Vec<f64>> = (0..200).map(|_| rng.standard_normal_vec(2)).collect();
            let data = Dataset::from_rows(&rows).unwrap();
            let a: Vec<bool> = (0..200).map(|i| i % 2 == 0).collect();
            let b: Vec<bool> = a.iter().map(|f| !f).collect();
            let res = compare_anomaly_features(&data, &a, &b, TTestKind::Welch).unwrap();
            hits += res.iter().filter(|r| r.p_value > 0.05).count();
        }
        assert!(hits >= 70, "{hits}");
    }

    fn single_split(normal: [f64; 2], intercept: [f64; 2]) -> Tree {
        Tree::from_nodes(
            vec![
                Node::Split {
                    normal: normal.to_vec(),
                    intercept: intercept.to_vec(),
                    left: 1,
                    right: 2,
                },
                Node::Leaf { size: 1 },
                Node::Leaf { size: 1 },
            ],
            1,
        )
        .unwrap()
    }

    #[test]
    fn partition_geometry() {
        let unit = ([0.0, 0.0], [1.0, 1.0]);
        let leaf = Tree::from_nodes(vec![Node::Leaf { size: 3 }], 1).unwrap();
        assert!(export_tree_partitions(&leaf, unit).unwrap().is_empty());

        let segs = export_tree_partitions(&single_split([1.0, 0.0], [0.5, 0.2]), unit).unwrap();
        assert_eq!(segs.len(), 1);
        let s = segs[0];
        assert_abs_diff_eq!(s.start[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(s.end[0], 0.5, epsilon = 1e-15);
        let (y0, y1) = (s.start[1].min(s.end[1]), s.start[1].max(s.end[1]));
        assert_abs_diff_eq!(y0, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(y1, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.angle_to_x_axis(), 90.0, epsilon = 1e-12);

        let diag = export_tree_partitions(&single_split([1.0, 1.0], [0.5, 0.5]), unit).unwrap();
        assert_abs_diff_eq!(diag[0].length(), 2f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(diag[0].angle_to_x_axis(), 45.0, epsilon = 1e-12);

        // a line that misses the box produces nothing
        let miss = export_tree_partitions(&single_split([1.0, 0.0], [3.0, 0.0]), unit).unwrap();
        assert!(miss.is_empty());
    }

    #[test]
    fn child_segments_stay_in_their_cell() {
        let blob = make_blob(256, 2, 5).unwrap();
        let params = ForestParams {
            trees: 3,
            subsample: 64,
            ..ForestParams::default()
        };
        let forest = Forest::fit(&blob, NormalDistribution::isotropic(2), &params).unwrap();
        let bounds = ([-4.0, -4.0], [4.0, 4.0]);
        for tree in forest.trees() {
            let segs = export_tree_partitions(tree, bounds).unwrap();
            assert!(!segs.is_empty());
            for s in &segs {
                for p in [s.start, s.end] {
                    assert!(p[0] >= -4.0 - 1e-9 && p[0] <= 4.0 + 1e-9);
                    assert!(p[1] >= -4.0 - 1e-9 && p[1] <= 4.0 + 1e-9);
                }
            }
            // deeper segments never cross the root split
            let Node::Split { normal, intercept, .. } = tree.root() else { unreachable!() };
            let side = |p: [f64; 2]| (p[0] - intercept[0]) * normal[0] + (p[1] - intercept[1]) * normal[1];
            for s in segs.iter().filter(|s| s.depth >= 1) {
                let (a, b) = (side(s.start), side(s.end));
                let scale = 1e-9 * (1.0 + normal[0].abs() + normal[1].abs()) * 8.0;
                assert!(a.max(b) <= scale || a.min(b) >= -scale, "{s:?}");
            }
        }
    }

    #[test]
    fn angle_hist() {
        let segs = [
            Segment { start: [0.0, 0.0], end: [1.0, 0.0], depth: 0 },
            Segment { start: [0.0, 0.0], end: [1.0, 1.0], depth: 0 },
            Segment { start: [0.0, 0.0], end: [-1.0, 1.0], depth: 0 },
            Segment { start: [0.0, 0.0], end: [0.0, -1.0], depth: 0 },
        ];
        assert_eq!(angle_histogram(&segs, 9), vec![1, 0, 0, 0, 2, 0, 0, 0, 1]);
        assert_abs_diff_eq!(mean_angle_to_x_axis(&segs), 45.0, epsilon = 1e-12);
    }

    #[test]
    fn blob_properties() {
        assert_eq!(make_blob(1, 2, 0).unwrap().len(), 1);
        assert!(make_blob(0, 2, 0).is_err());
        assert_eq!(make_blob(50, 3, 9).unwrap(), make_blob(50, 3, 9).unwrap());
        let b = make_blob(2000, 2, 7).unwrap();
        let (x, y) = (b.column(0), b.column(1));
        let m = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let (mx, my) = (m(&x), m(&y));
        assert!(mx.abs() < 0.1 && my.abs() < 0.1);
        let cov = |u: &[f64], mu: f64, v: &[f64], mv: f64| {
            u.iter().zip(v).map(|(a, b)| (a - mu) * (b - mv)).sum::<f64>() / (u.len() - 1) as f64
        };
        assert!((cov(&x, mx, &x, mx) - 1.0).abs() < 0.1);
        assert!((cov(&y, my, &y, my) - 1.0).abs() < 0.1);
        assert!(cov(&x, mx, &y, my).abs() < 0.1);
    }

    #[test]
    fn grid_and_ray_basics() {
        let blob = make_blob(500, 2, 3).unwrap();
        let params = ForestParams {
            trees: 20,
            subsample: 64,
            ..ForestParams::default()
        };
        let forest = Forest::fit(&blob, NormalDistribution::isotropic(2), &params).unwrap();
        let g = score_grid(&forest, (-1.0, 3.0), (0.0, 2.0), (1, 1)).unwrap();
        assert_eq!(g.scores, vec![forest.score(&[1.0, 1.0])]);
        let g = score_grid(&forest, (-3.0, 3.0), (-3.0, 3.0), (7, 5)).unwrap();
        assert_eq!(g.scores.len(), 35);
        assert!(g.scores.iter().all(|s| *s > 0.0 && *s < 1.0));
        assert_eq!(g.table().1.len(), 35);
        assert!(score_grid(&forest, (1.0, 1.0), (0.0, 1.0), (2, 2)).is_err());

        let r = ray_mean_scores(&forest, &[0.7], 1.5, 4.0, 1).unwrap();
        assert_eq!(r.mean_scores[0], forest.score(&[1.5 * 0.7f64.cos(), 1.5 * 0.7f64.sin()]));
        assert!(ray_mean_scores(&forest, &[0.0], 2.0, 1.0, 10).is_err());
        assert_eq!(ray_radii(1.0, 4.0, 4), vec![1.0, 2.0, 3.0, 4.0]);

        let blob3 = make_blob(100, 3, 3).unwrap();
        let f3 = Forest::fit(&blob3, NormalDistribution::isotropic(3), &params).unwrap();
        assert!(matches!(
            score_grid(&f3, (0.0, 1.0), (0.0, 1.0), (2, 2)),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(ray_mean_scores(&f3, &[0.0], 1.0, 2.0, 2).is_err());
    }

    #[test]
    fn spearman_values() {
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 35.0]).unwrap(), 1.0);
        assert_abs_diff_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap(), -1.0, epsilon = 1e-15);
        assert_eq!(average_ranks(&[5.0, 1.0, 5.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
        assert!(spearman(&[1.0, 1.0], &[1.0, 2.0]).is_err());
    }

    proptest! {
        #[test]
        fn raising_an_unflagged_score_flags_it(
            scores in proptest::collection::vec(0.0f64..1.0, 5..200),
            q in 0.01f64..0.99,
            pick in any::<proptest::sample::Index>(),
        ) {
            let l = label_top_fraction(&scores, q).unwrap();
            let need = (q * scores.len() as f64 - 1e-9).ceil() as usize;
            prop_assert!(l.count() >= need.max(1));
            let i = pick.index(scores.len());
            if !l.flags[i] {
                let mut raised = scores.clone();
                raised[i] = l.threshold + 1e-3;
                let l2 = label_top_fraction(&raised, q).unwrap();
                prop_assert!(l2.flags[i]);
            }
        }

        #[test]
        fn p_value_in_unit_interval(
            a in proptest::collection::vec(-10.0f64..10.0, 2..30),
            b in proptest::collection::vec(-10.0f64..10.0, 2..30),
        ) {
            if let Ok(r) = welch_ttest(&a, &b) {
                prop_assert!((0.0..=1.0).contains(&r.p_value));
                let s = welch_ttest(&b, &a).unwrap();
                prop_assert_eq!(s.p_value, r.p_value);
            }
        }
    }
}
