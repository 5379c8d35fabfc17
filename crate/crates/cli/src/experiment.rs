//! Fixed experiment setups: sensitivity scenarios on the Diabetes data and
//! score maps on a synthetic 2D blob.

use std::path::Path;

use aif_core::analysis::{
    compare_anomaly_features, export_tree_partitions, label_top_fraction, make_blob,
    ray_mean_scores, score_grid, segments_table, TTestKind, TTestResult, DEFAULT_RAY_SAMPLES,
    DEFAULT_RHO_MAX, DEFAULT_RHO_MIN,
};
use aif_core::sensitivity::{alpha_mixture_polar, alpha_polar, polar_grid};
use aif_core::{Forest, ForestParams, MixtureSpec, NormalDistribution, SymMatrix};
use clap::ValueEnum;

use crate::error::Result;
use crate::model::Standardization;
use crate::table::{fmt_f64, write_numeric, write_table, Table};

pub const TREES: usize = 500;
pub const SUBSAMPLE: usize = 128;
pub const ANOMALY_FRACTION: f64 = 0.1;
pub const BLOB_SIZE: usize = 2000;
pub const BLOB_EXTENT: f64 = 4.0;
pub const GRID_RESOLUTION: usize = 100;
pub const RAY_COUNT: usize = 36;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Experiment {
    /// Age and DPF more sensitive than the other features
    #[value(name = "diabetes-a3")]
    DiabetesA3,
    /// Age and DPF less sensitive than the other features
    #[value(name = "diabetes-a4")]
    DiabetesA4,
    /// Age less and DPF more sensitive
    #[value(name = "diabetes-a5")]
    DiabetesA5,
    /// EIF and two diagonal covariances on a 2D blob
    #[value(name = "blob-maps")]
    BlobMaps,
    /// Two Gaussian mixtures on a 2D blob
    #[value(name = "blob-mixtures")]
    BlobMixtures,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    A3,
    A4,
    A5,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Self::A3 => "diabetes-a3",
            Self::A4 => "diabetes-a4",
            Self::A5 => "diabetes-a5",
        }
    }

    /// Diagonal covariance over `features`, keyed by column name so the file's
    /// column order does not matter.
    pub fn covariance(self, features: &[String]) -> Result<SymMatrix> {
        let (age, dpf, rest) = match self {
            Self::A3 => (1.0, 1.0, 0.001),
            Self::A4 => (0.001, 0.001, 1.0),
            Self::A5 => (0.0001, 1.0, 0.01),
        };
        let diag: Vec<f64> = features
            .iter()
            .map(|f| match f.as_str() {
                "Age" => age,
                "DiabetesPedigreeFunction" => dpf,
                _ => rest,
            })
            .collect();
        Ok(SymMatrix::from_diagonal(&diag)?)
    }
}

/// Per-feature comparison of the anomalies flagged by the anisotropic forest
/// (`mean_a`) against the isotropic one (`mean_b`).
#[derive(Debug, Clone)]
pub struct DiabetesOutcome {
    pub features: Vec<String>,
    pub results: Vec<TTestResult>,
}

impl DiabetesOutcome {
    pub fn get(&self, feature: &str) -> Option<&TTestResult> {
        self.features.iter().position(|f| f == feature).map(|i| &self.results[i])
    }
}

/// Fits both forests with the same master seed, flags the top fraction under
/// each and t-tests every feature on the original scale. With `standardize`
/// the forests see z-scored features.
pub fn run_diabetes(table: &Table, scenario: Scenario, seed: u64, standardize: bool) -> Result<DiabetesOutcome> {
    let params = ForestParams {
        trees: TREES,
        subsample: SUBSAMPLE,
        seed,
        ..ForestParams::default()
    };
    let fit_data = if standardize {
        Standardization::fit(&table.data).apply(&table.data)?
    } else {
        table.data.clone()
    };
    let dim = table.data.dim();
    let eif = Forest::fit(&fit_data, NormalDistribution::isotropic(dim), &params)?;
    let aif = Forest::fit(
        &fit_data,
        NormalDistribution::gaussian(scenario.covariance(&table.names)?)?,
        &params,
    )?;
    let flags_eif = label_top_fraction(&eif.score_all(&fit_data)?.scores, ANOMALY_FRACTION)?;
    let flags_aif = label_top_fraction(&aif.score_all(&fit_data)?.scores, ANOMALY_FRACTION)?;
    let results = compare_anomaly_features(&table.data, &flags_aif.flags, &flags_eif.flags, TTestKind::Welch)?;
    Ok(DiabetesOutcome {
        features: table.names.clone(),
        results,
    })
}

pub fn comparison_rows(features: &[String], results: &[TTestResult]) -> Vec<Vec<String>> {
    features
        .iter()
        .zip(results)
        .map(|(f, r)| {
            let mut row = vec![f.clone()];
            row.extend(
                [r.mean_a, r.mean_b, r.t_statistic, r.degrees_of_freedom, r.p_value].map(fmt_f64),
            );
            row
        })
        .collect()
}

pub fn write_diabetes(out_dir: &Path, scenario: Scenario, outcome: &DiabetesOutcome) -> Result<()> {
    let path = out_dir.join(format!("{}.csv", scenario.name()));
    write_table(
        Some(&path),
        &["feature", "mean_aif", "mean_eif", "t", "df", "p"],
        &comparison_rows(&outcome.features, &outcome.results),
    )
}

pub fn blob_mixture_d1() -> MixtureSpec {
    let a = SymMatrix::from_diagonal(&[1.0, 0.01]).unwrap();
    let b = SymMatrix::from_diagonal(&[0.01, 1.0]).unwrap();
    MixtureSpec::new(vec![(0.5, a.scaled(2.0)), (0.5, b.scaled(2.0))], 1.0).unwrap()
}

pub fn blob_mixture_d2() -> MixtureSpec {
    let a = SymMatrix::from_rows(&[[1.0, 0.99], [0.99, 1.0]]).unwrap();
    let b = SymMatrix::from_rows(&[[1.0, -0.99], [-0.99, 1.0]]).unwrap();
    MixtureSpec::new(vec![(0.5, a.scaled(2.0)), (0.5, b.scaled(2.0))], 1.0).unwrap()
}

/// The named 2D models of a blob experiment.
pub fn blob_models(which: Experiment) -> Vec<(&'static str, NormalDistribution)> {
    let diag = |a: f64, b: f64| NormalDistribution::gaussian(SymMatrix::from_diagonal(&[a, b]).unwrap()).unwrap();
    match which {
        Experiment::BlobMaps => vec![
            ("eif", NormalDistribution::isotropic(2)),
            ("a1", diag(1.0, 0.05)),
            ("a2", diag(0.05, 1.0)),
        ],
        Experiment::BlobMixtures => vec![
            ("d1", NormalDistribution::Mixture(blob_mixture_d1())),
            ("d2", NormalDistribution::Mixture(blob_mixture_d2())),
        ],
        _ => Vec::new(),
    }
}

/// Directional sensitivity at polar angle `theta`.
pub fn polar_sensitivity(dist: &NormalDistribution, theta: f64) -> Result<f64> {
    Ok(match dist {
        NormalDistribution::Gaussian(g) => alpha_polar(theta, g.cov())?,
        NormalDistribution::Mixture(m) => alpha_mixture_polar(theta, m)?,
    })
}

/// Writes the blob, then for each model a score grid, a ray profile with the
/// matching sensitivity, and the partition of its first tree.
pub fn run_blob(which: Experiment, blob_seed: u64, seed: u64, out_dir: &Path) -> Result<Vec<String>> {
    let blob = make_blob(BLOB_SIZE, 2, blob_seed)?;
    write_numeric(
        Some(&out_dir.join("blob.csv")),
        &["x1", "x2"],
        blob.rows().map(<[f64]>::to_vec).collect(),
    )?;
    let mut written = vec!["blob.csv".to_string()];
    let params = ForestParams {
        trees: TREES,
        subsample: SUBSAMPLE,
        seed,
        ..ForestParams::default()
    };
    let extent = (-BLOB_EXTENT, BLOB_EXTENT);
    let thetas = polar_grid(RAY_COUNT);
    for (name, dist) in blob_models(which) {
        let forest = Forest::fit(&blob, dist.clone(), &params)?;
        let (header, rows) = score_grid(&forest, extent, extent, (GRID_RESOLUTION, GRID_RESOLUTION))?.table();
        let grid_file = format!("grid_{name}.csv");
        write_numeric(Some(&out_dir.join(&grid_file)), &header, rows)?;

        let profile = ray_mean_scores(&forest, &thetas, DEFAULT_RHO_MIN, DEFAULT_RHO_MAX, DEFAULT_RAY_SAMPLES)?;
        let rows = profile
            .thetas
            .iter()
            .zip(&profile.mean_scores)
            .map(|(t, s)| Ok(vec![*t, *s, polar_sensitivity(&dist, *t)?]))
            .collect::<Result<Vec<_>>>()?;
        let ray_file = format!("rays_{name}.csv");
        write_numeric(Some(&out_dir.join(&ray_file)), &["theta", "mean_score", "sensitivity"], rows)?;

        let segments = export_tree_partitions(
            &forest.trees()[0],
            ([-BLOB_EXTENT, -BLOB_EXTENT], [BLOB_EXTENT, BLOB_EXTENT]),
        )?;
        let (header, rows) = segments_table(&segments);
        let part_file = format!("partitions_{name}.csv");
        write_numeric(Some(&out_dir.join(&part_file)), &header, rows)?;
        written.extend([grid_file, ray_file, part_file]);
    }
    Ok(written)
}

