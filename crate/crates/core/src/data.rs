//! Synthetic dataset generators and CSV ingestion.

use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{Coords, Dataset, PointKind};

/// Per-cluster Gaussian spread is drawn uniformly from this range.
pub const DEFAULT_SIGMA_RANGE: (f64, f64) = (0.02, 0.08);
pub const DEFAULT_CLUSTERS: usize = 8;

/// `n` points drawn i.i.d. uniformly from `[0,1]^d`.
pub fn gen_uniform(n: usize, d: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = (0..n).map(|_| (0..d).map(|_| rng.random::<f64>()).collect()).collect();
    Dataset::numeric(rows)
}

/// Gaussian clusters of different sizes and spreads, clipped to `[0,1]^d`.
pub fn gen_clustered(n: usize, d: usize, n_clusters: usize, seed: u64) -> Result<Dataset> {
    gen_clustered_with(n, d, n_clusters, DEFAULT_SIGMA_RANGE, seed)
}

pub fn gen_clustered_with(
    n: usize,
    d: usize,
    n_clusters: usize,
    sigma_range: (f64, f64),
    seed: u64,
) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    if n_clusters == 0 || n_clusters > n {
        return Err(Error::InvalidConfig(format!("{n_clusters} clusters for {n} points")));
    }
    let (lo, hi) = sigma_range;
    if !(lo > 0.0 && hi >= lo) {
        return Err(Error::InvalidConfig(format!("sigma range [{lo}, {hi}]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers: Vec<Vec<f64>> = (0..n_clusters).map(|_| (0..d).map(|_| rng.random::<f64>()).collect()).collect();
    let sigmas: Vec<f64> = (0..n_clusters).map(|_| if hi > lo { rng.random_range(lo..hi) } else { lo }).collect();

    // Relative weights in [0.2, 1) so cluster sizes differ; every cluster gets a point.
    let weights: Vec<f64> = (0..n_clusters).map(|_| rng.random_range(0.2..1.0)).collect();
    let total: f64 = weights.iter().sum();
    let spare = n - n_clusters;
    let mut sizes: Vec<usize> = weights.iter().map(|w| 1 + (w / total * spare as f64) as usize).collect();
    let mut assigned: usize = sizes.iter().sum();
    let mut k = 0;
    while assigned < n {
        sizes[k % n_clusters] += 1;
        assigned += 1;
        k += 1;
    }

    let mut rows = Vec::with_capacity(n);
    for (c, &size) in sizes.iter().enumerate() {
        let normal = Normal::new(0.0, sigmas[c]).expect("positive sigma");
        for _ in 0..size {
            rows.push(centers[c].iter().map(|&m| (m + normal.sample(&mut rng)).clamp(0.0, 1.0)).collect());
        }
    }
    Dataset::numeric(rows)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataDistribution {
    Uniform,
    /// Also accepted as `normal`.
    #[serde(alias = "normal")]
    Clustered,
}

/// Generator parameters, as read from a JSON config.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub distribution: DataDistribution,
    pub n: usize,
    #[serde(default = "default_dim")]
    pub d: usize,
    #[serde(default = "default_clusters")]
    pub clusters: usize,
    #[serde(default = "default_sigma")]
    pub sigma_range: (f64, f64),
    #[serde(default)]
    pub seed: u64,
}

fn default_dim() -> usize {
    2
}

fn default_clusters() -> usize {
    DEFAULT_CLUSTERS
}

fn default_sigma() -> (f64, f64) {
    DEFAULT_SIGMA_RANGE
}

impl GeneratorSpec {
    pub fn uniform(n: usize, d: usize, seed: u64) -> Self {
        GeneratorSpec {
            distribution: DataDistribution::Uniform,
            n,
            d,
            clusters: DEFAULT_CLUSTERS,
            sigma_range: DEFAULT_SIGMA_RANGE,
            seed,
        }
    }

    pub fn clustered(n: usize, d: usize, clusters: usize, seed: u64) -> Self {
        GeneratorSpec { distribution: DataDistribution::Clustered, clusters, ..Self::uniform(n, d, seed) }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        GeneratorSpec { seed, ..self.clone() }
    }

    pub fn generate(&self) -> Result<Dataset> {
        if self.d == 0 {
            return Err(Error::InvalidConfig("dimensionality must be at least 1".into()));
        }
        match self.distribution {
            DataDistribution::Uniform => gen_uniform(self.n, self.d, self.seed),
            DataDistribution::Clustered => {
                gen_clustered_with(self.n, self.d, self.clusters, self.sigma_range, self.seed)
            }
        }
    }
}

/// How to interpret CSV columns.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CsvKind {
    Numeric,
    Categorical,
    /// Numeric if every column parses as a number, categorical if none does.
    #[default]
    Auto,
}

impl std::str::FromStr for CsvKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "numeric" => Ok(CsvKind::Numeric),
            "categorical" => Ok(CsvKind::Categorical),
            "auto" => Ok(CsvKind::Auto),
            other => Err(Error::InvalidConfig(format!("unknown csv kind `{other}`"))),
        }
    }
}

pub fn load_csv(path: impl AsRef<Path>, kind: CsvKind, normalize: bool) -> Result<Dataset> {
    let file = std::fs::File::open(path)?;
    read_csv(file, kind, normalize)
}

/// Parses a comma-separated table with a header row naming the dimensions.
pub fn read_csv<R: Read>(reader: R, kind: CsvKind, normalize: bool) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let columns: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    let mut rows: Vec<Vec<String>> = Vec::new();
    for (line, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| match e.kind() {
            csv::ErrorKind::UnequalLengths { .. } => Error::Malformed(format!("ragged row {}", line + 2)),
            _ => Error::Csv(e),
        })?;
        rows.push(record.iter().map(str::to_owned).collect());
    }
    if rows.is_empty() || columns.is_empty() {
        return Err(Error::EmptyDataset);
    }

    let numeric_cols: Vec<bool> =
        (0..columns.len()).map(|j| rows.iter().all(|r| r[j].parse::<f64>().is_ok_and(f64::is_finite))).collect();
    let resolved = match kind {
        CsvKind::Numeric => {
            if let Some(j) = numeric_cols.iter().position(|&ok| !ok) {
                return Err(Error::Malformed(format!("column `{}` is not numeric", columns[j])));
            }
            PointKind::Numeric
        }
        CsvKind::Categorical => PointKind::Categorical,
        CsvKind::Auto => {
            if numeric_cols.iter().all(|&ok| ok) {
                PointKind::Numeric
            } else if numeric_cols.iter().all(|&ok| !ok) {
                PointKind::Categorical
            } else {
                return Err(Error::Malformed("mixed numeric and categorical columns".into()));
            }
        }
    };

    match resolved {
        PointKind::Categorical => Dataset::categorical_with_columns(&rows, columns),
        PointKind::Numeric => {
            let mut values: Vec<Vec<f64>> =
                rows.iter().map(|r| r.iter().map(|v| v.parse::<f64>().expect("checked numeric")).collect()).collect();
            if normalize {
                normalize_min_max(&mut values);
            }
            Dataset::numeric_with_columns(values, columns)
        }
    }
}

/// Per-dimension min-max scaling into `[0,1]`; constant columns map to 0.
pub fn normalize_min_max(rows: &mut [Vec<f64>]) {
    let Some(d) = rows.first().map(Vec::len) else { return };
    for j in 0..d {
        let (lo, hi) = rows.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(r[j]), hi.max(r[j])));
        let span = hi - lo;
        for r in rows.iter_mut() {
            r[j] = if span > 0.0 { (r[j] - lo) / span } else { 0.0 };
        }
    }
}

pub fn write_csv<W: Write>(data: &Dataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(data.columns())?;
    for p in data.points() {
        match &p.coords {
            Coords::Numeric(v) => w.write_record(v.iter().map(|x| x.to_string()))?,
            Coords::Categorical(_) => w.write_record(data.row_strings(p.id))?,
        }
    }
    w.flush()?;
    Ok(())
}

pub fn save_csv(data: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_csv(data, std::io::BufWriter::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean_per_dim(data: &Dataset) -> Vec<f64> {
        let n = data.len() as f64;
        let mut m = vec![0.0; data.dim()];
        for p in data.points() {
            for (acc, x) in m.iter_mut().zip(p.as_numeric().unwrap()) {
                *acc += x / n;
            }
        }
        m
    }

    /// Mean silhouette coefficient under Euclidean distance for a given labelling.
    fn silhouette(data: &Dataset, labels: &[usize], k: usize) -> f64 {
        let n = data.len();
        let mut total = 0.0;
        for i in 0..n {
            let mut sums = vec![0.0; k];
            let mut counts = vec![0usize; k];
            for j in 0..n {
                if i != j {
                    sums[labels[j]] += data.dist(crate::metrics::Metric::Euclidean, i, j);
                    counts[labels[j]] += 1;
                }
            }
            if counts[labels[i]] == 0 {
                continue;
            }
            let a = sums[labels[i]] / counts[labels[i]] as f64;
            let b = (0..k)
                .filter(|&c| c != labels[i] && counts[c] > 0)
                .map(|c| sums[c] / counts[c] as f64)
                .fold(f64::INFINITY, f64::min);
            total += (b - a) / a.max(b);
        }
        total / n as f64
    }

    /// Labels from a few rounds of Lloyd iterations seeded at the first k points.
    fn lloyd(data: &Dataset, k: usize) -> Vec<usize> {
        let pts: Vec<&[f64]> = data.points().iter().map(|p| p.as_numeric().unwrap()).collect();
        let mut centers: Vec<Vec<f64>> = (0..k).map(|c| pts[c * pts.len() / k].to_vec()).collect();
        let mut labels = vec![0; pts.len()];
        for _ in 0..20 {
            for (i, p) in pts.iter().enumerate() {
                labels[i] = (0..k)
                    .min_by(|&a, &b| {
                        let da: f64 = p.iter().zip(&centers[a]).map(|(x, y)| (x - y).powi(2)).sum();
                        let db: f64 = p.iter().zip(&centers[b]).map(|(x, y)| (x - y).powi(2)).sum();
                        da.total_cmp(&db)
                    })
                    .unwrap();
            }
            for (c, center) in centers.iter_mut().enumerate() {
                let members: Vec<&&[f64]> = pts.iter().zip(&labels).filter(|(_, &l)| l == c).map(|(p, _)| p).collect();
                if !members.is_empty() {
                    for (j, v) in center.iter_mut().enumerate() {
                        *v = members.iter().map(|p| p[j]).sum::<f64>() / members.len() as f64;
                    }
                }
            }
        }
        labels
    }

    #[test]
    fn uniform_basics() {
        let one = gen_uniform(1, 3, 0).unwrap();
        assert_eq!(one.len(), 1);
        assert!(one.points()[0].as_numeric().unwrap().iter().all(|x| (0.0..=1.0).contains(x)));
        let a = gen_uniform(50, 2, 7).unwrap();
        let b = gen_uniform(50, 2, 7).unwrap();
        assert_eq!(a.points(), b.points());
        assert_ne!(a.points(), gen_uniform(50, 2, 8).unwrap().points());
    }

    #[test]
    fn uniform_mean_is_one_half() {
        let data = gen_uniform(10_000, 2, 1).unwrap();
        for m in mean_per_dim(&data) {
            assert!((m - 0.5).abs() < 0.02, "mean {m}");
        }
    }

    #[test]
    fn clustered_is_replayable_and_bounded() {
        let a = gen_clustered(2000, 3, 5, 9).unwrap();
        let b = gen_clustered(2000, 3, 5, 9).unwrap();
        assert_eq!(a.points(), b.points());
        assert_eq!(a.len(), 2000);
        for p in a.points() {
            assert!(p.as_numeric().unwrap().iter().all(|x| (0.0..=1.0).contains(x)));
        }
        let single = gen_clustered(100, 2, 1, 3).unwrap();
        assert_eq!(single.len(), 100);
        assert!(gen_clustered(10, 2, 0, 0).is_err());
        assert!(gen_clustered(10, 2, 11, 0).is_err());
    }

    #[test]
    fn clustered_data_has_higher_silhouette_than_uniform() {
        let clustered = gen_clustered(600, 2, 5, 4).unwrap();
        let uniform = gen_uniform(600, 2, 4).unwrap();
        let sc = silhouette(&clustered, &lloyd(&clustered, 5), 5);
        let su = silhouette(&uniform, &lloyd(&uniform, 5), 5);
        assert!(sc > su, "clustered {sc} vs uniform {su}");
    }

    #[test]
    fn csv_normalization() {
        let csv = "a,b\n0,5\n10,5\n";
        let data = read_csv(csv.as_bytes(), CsvKind::Auto, true).unwrap();
        assert_eq!(data.points()[0].as_numeric(), Some(&[0.0, 0.0][..]));
        assert_eq!(data.points()[1].as_numeric(), Some(&[1.0, 0.0][..]));
        assert_eq!(data.columns(), &["a".to_string(), "b".to_string()]);
        let raw = read_csv(csv.as_bytes(), CsvKind::Numeric, false).unwrap();
        assert_eq!(raw.points()[1].as_numeric(), Some(&[10.0, 5.0][..]));
    }

    #[test]
    fn csv_categorical_labels_preserved() {
        let csv = "brand,zoom\nAcme,3\nAcme,5\nZeta,3\n";
        assert!(matches!(read_csv(csv.as_bytes(), CsvKind::Auto, true), Err(Error::Malformed(_))));
        let data = read_csv(csv.as_bytes(), CsvKind::Categorical, true).unwrap();
        assert_eq!(data.kind(), PointKind::Categorical);
        assert_eq!(data.row_strings(2), vec!["Zeta", "3"]);
        assert_eq!(data.dist(crate::metrics::Metric::Hamming, 0, 1), 1.0);
        assert!(read_csv(csv.as_bytes(), CsvKind::Numeric, true).is_err());
    }

    #[test]
    fn csv_errors() {
        assert!(matches!(read_csv("a,b\n1,2\n3\n".as_bytes(), CsvKind::Auto, false), Err(Error::Malformed(_))));
        assert!(matches!(read_csv("a,b\n".as_bytes(), CsvKind::Auto, false), Err(Error::EmptyDataset)));
        assert!(read_csv("".as_bytes(), CsvKind::Auto, false).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let data = gen_clustered(200, 3, 4, 12).unwrap();
        let mut buf = Vec::new();
        write_csv(&data, &mut buf).unwrap();
        let back = read_csv(buf.as_slice(), CsvKind::Numeric, false).unwrap();
        for (p, q) in data.points().iter().zip(back.points()) {
            for (x, y) in p.as_numeric().unwrap().iter().zip(q.as_numeric().unwrap()) {
                assert!((x - y).abs() <= 1e-12);
            }
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pts.csv");
        save_csv(&data, &path).unwrap();
        assert_eq!(load_csv(&path, CsvKind::Auto, false).unwrap().len(), 200);
    }

    #[test]
    fn generator_spec_json() {
        let spec: GeneratorSpec = serde_json::from_str(r#"{"distribution":"normal","n":30,"seed":2}"#).unwrap();
        assert_eq!(spec.distribution, DataDistribution::Clustered);
        assert_eq!(spec.d, 2);
        assert_eq!(spec.generate().unwrap().len(), 30);
        assert!(serde_json::from_str::<GeneratorSpec>(r#"{"distribution":"uniform","n":3,"bogus":1}"#).is_err());
    }
}
