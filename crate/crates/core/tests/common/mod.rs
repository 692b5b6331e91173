//! Synthetic rating data shared by the integration tests.
#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use riskforge::classifiers::{ForestParams, GbtParams, Hyperparameters, MlpParams, SvmParams, TreeParams};
use riskforge::dataset::{CsvSchema, Dataset};
use riskforge::experiment::ExperimentConfig;
use riskforge::{seed, Matrix};

/// One representative rating per default bucket.
pub const RATINGS: [&str; 4] = ["AA", "BBB", "B", "CCC"];
pub const SECTORS: [&str; 3] = ["Energy", "Finance", "Retail"];

#[derive(Debug, Clone)]
pub struct Synthetic {
    pub per_class: Vec<usize>,
    /// Columns whose mean depends on the class.
    pub signal: usize,
    /// Columns of pure noise.
    pub noise: usize,
    /// Distance between consecutive class means on each signal column.
    pub separation: f64,
    pub seed: u64,
}

impl Synthetic {
    pub fn new(per_class: &[usize], signal: usize, noise: usize, separation: f64, seed: u64) -> Self {
        Synthetic {
            per_class: per_class.to_vec(),
            signal,
            noise,
            separation,
            seed,
        }
    }

    pub fn feature_names(&self) -> Vec<String> {
        let mut names: Vec<String> = (0..self.signal).map(|i| format!("signal{i}")).collect();
        names.extend((0..self.noise).map(|i| format!("noise{i}")));
        names
    }

    /// Rows interleaved across classes; signal column `j` of class `c` is
    /// centred at `separation * c * (j + 1)` with unit noise.
    pub fn rows(&self) -> (Vec<Vec<f64>>, Vec<usize>) {
        let mut rng = seed::rng(self.seed);
        let unit = Normal::new(0.0, 1.0).unwrap();
        let mut remaining = self.per_class.clone();
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        while remaining.iter().any(|&r| r > 0) {
            for (c, left) in remaining.iter_mut().enumerate() {
                if *left == 0 {
                    continue;
                }
                *left -= 1;
                let mut row = Vec::with_capacity(self.signal + self.noise);
                for j in 0..self.signal {
                    let centre = self.separation * c as f64 * (j + 1) as f64 / self.signal as f64;
                    row.push(centre + unit.sample(&mut rng));
                }
                for _ in 0..self.noise {
                    row.push(unit.sample(&mut rng) * rng.random_range(0.5..2.0));
                }
                rows.push(row);
                labels.push(c);
            }
        }
        (rows, labels)
    }

    pub fn dataset(&self) -> Dataset {
        let (rows, labels) = self.rows();
        let k = self.per_class.len();
        let class_names = (0..k).map(|c| format!("class{c}")).collect();
        Dataset::new(
            Matrix::from_rows(&rows).unwrap(),
            self.feature_names(),
            labels,
            class_names,
        )
        .unwrap()
    }

    pub fn schema(&self) -> CsvSchema {
        let mut columns = vec!["Rating".to_string(), "Sector".to_string()];
        columns.extend(self.feature_names());
        CsvSchema {
            columns,
            rating_column: "Rating".into(),
            categorical: vec!["Sector".into()],
            ignored: Vec::new(),
        }
    }

    /// Writes a ratings-style CSV (rating strings from [`RATINGS`], a
    /// sector column, then the features) and returns its path.
    pub fn write_csv(&self, dir: &Path) -> PathBuf {
        assert!(self.per_class.len() <= RATINGS.len());
        let (rows, labels) = self.rows();
        let mut out = String::from("Rating,Sector,");
        out.push_str(&self.feature_names().join(","));
        out.push('\n');
        for (i, (row, &l)) in rows.iter().zip(&labels).enumerate() {
            out.push_str(RATINGS[l]);
            out.push(',');
            out.push_str(SECTORS[i % SECTORS.len()]);
            for v in row {
                out.push_str(&format!(",{v:?}"));
            }
            out.push('\n');
        }
        let path = dir.join("ratings.csv");
        fs::write(&path, out).unwrap();
        path
    }
}

/// Lightweight hyperparameters for all six algorithms.
pub fn fast_classifiers() -> Vec<Hyperparameters> {
    vec![
        Hyperparameters::DT(TreeParams::default()),
        Hyperparameters::RF(ForestParams {
            n_trees: 15,
            ..Default::default()
        }),
        Hyperparameters::GBT(GbtParams {
            n_rounds: 15,
            ..Default::default()
        }),
        Hyperparameters::KNN(Default::default()),
        Hyperparameters::SVM(SvmParams {
            epochs: 10,
            ..Default::default()
        }),
        Hyperparameters::MLP(MlpParams {
            hidden_units: 8,
            epochs: 15,
            ..Default::default()
        }),
    ]
}

/// Config over a CSV written by [`Synthetic::write_csv`], with a small
/// LASSO grid and few importance repeats.
pub fn fast_config(data: &Synthetic, csv: &Path, out: &Path) -> ExperimentConfig {
    let mut c = ExperimentConfig::with_data(csv);
    c.data.schema = Some(data.schema());
    c.classifiers = fast_classifiers();
    c.lasso.grid_size = 12;
    c.pfi.repeats = 3;
    c.output_dir = out.to_path_buf();
    c.seed = 11;
    c
}
