//! CSV input and output. Output files start with a `# config_hash=<hex>` line.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{ScalarPath, TimeGrid, TriKernel};
use crate::model::CovarianceSpec;

/// Shortest round-trip decimal rendering.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::Io(format!("{}: {e}", path.display()))
}

fn read_rows(path: &Path, header: &[&str]) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let found: Vec<String> = rdr
        .headers()
        .map_err(|e| csv_err(path, e))?
        .iter()
        .map(str::to_owned)
        .collect();
    if found != header {
        return Err(Error::Invalid(format!(
            "{}: expected header {}, found {}",
            path.display(),
            header.join(","),
            found.join(",")
        )));
    }
    let mut rows = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let row = rec
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Invalid(format!("{}: data row {}: {e}", path.display(), line + 1)))?;
        rows.push(row);
    }
    Ok(rows)
}

/// Reads a `t,value` file into `(t, value)` pairs.
pub fn read_series(path: impl AsRef<Path>) -> Result<Vec<(f64, f64)>> {
    Ok(read_rows(path.as_ref(), &["t", "value"])?
        .into_iter()
        .map(|r| (r[0], r[1]))
        .collect())
}

/// Values of a `t,value` series at the first `grid.len()` nodes of `grid`.
pub fn series_on_grid(series: &[(f64, f64)], grid: &TimeGrid<f64>, what: &str) -> Result<ScalarPath<f64>> {
    if series.len() < grid.len() {
        return Err(Error::GridMismatch(format!(
            "{what}: {} samples, grid needs {}",
            series.len(),
            grid.len()
        )));
    }
    let tol = 1e-9 * grid.horizon().max(1.0);
    let mut values = Vec::with_capacity(grid.len());
    for (i, &(t, v)) in series.iter().take(grid.len()).enumerate() {
        if (t - grid.t(i)).abs() > tol {
            return Err(Error::GridMismatch(format!(
                "{what}: sample {i} at t = {t}, grid node is {}",
                grid.t(i)
            )));
        }
        values.push(v);
    }
    ScalarPath::new(*grid, values)
}

/// Reads a covariance from a `t,s,value` file covering every node pair with `s <= t`
/// (pairs with `s > t` are accepted and read as `K(s,t)`), and an optional `t,value`
/// mean file; the mean defaults to zero.
pub fn read_covariance(
    kernel: impl AsRef<Path>,
    mean: Option<&Path>,
    grid: &TimeGrid<f64>,
) -> Result<CovarianceSpec<f64>> {
    let path = kernel.as_ref();
    let rows = read_rows(path, &["t", "s", "value"])?;
    let n = grid.len();
    let mut seen = vec![false; n * (n + 1) / 2];
    let mut values = vec![0.0; n * (n + 1) / 2];
    for r in rows {
        let (i, j) = match (grid.index_of(r[0]), grid.index_of(r[1])) {
            (Some(i), Some(j)) => (i.max(j), i.min(j)),
            _ => {
                return Err(Error::GridMismatch(format!(
                    "{}: ({}, {}) is not a node pair",
                    path.display(),
                    r[0],
                    r[1]
                )))
            }
        };
        let k = i * (i + 1) / 2 + j;
        seen[k] = true;
        values[k] = r[2];
    }
    if let Some(k) = seen.iter().position(|s| !s) {
        let i = ((((8 * k + 1) as f64).sqrt() - 1.0) / 2.0).floor() as usize;
        let j = k - i * (i + 1) / 2;
        return Err(Error::GridMismatch(format!(
            "{}: missing K({}, {})",
            path.display(),
            grid.t(i),
            grid.t(j)
        )));
    }
    let mean = match mean {
        Some(p) => series_on_grid(&read_series(p)?, grid, &p.display().to_string())?,
        None => ScalarPath::zeros(*grid),
    };
    CovarianceSpec::new(mean, TriKernel::from_raw(*grid, values))
}

/// CSV writer whose first line records the configuration hash.
pub struct CsvOut {
    inner: csv::Writer<BufWriter<File>>,
}

impl CsvOut {
    pub fn create(path: impl AsRef<Path>, config_hash: &str, header: &[&str]) -> Result<Self> {
        let path = path.as_ref();
        let mut file = BufWriter::new(File::create(path)?);
        writeln!(file, "# config_hash={config_hash}")?;
        let mut inner = csv::Writer::from_writer(file);
        inner.write_record(header).map_err(|e| csv_err(path, e))?;
        Ok(Self { inner })
    }

    pub fn row<I, S>(&mut self, fields: I) -> Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.inner.write_record(fields).map_err(|e| Error::Io(e.to_string()))
    }

    pub fn numbers(&mut self, values: &[f64]) -> Result<()> {
        self.row(values.iter().map(|&v| fmt_f64(v)))
    }

    pub fn finish(mut self) -> Result<()> {
        self.inner.flush()?;
        Ok(())
    }
}

/// Writes `t,<name>...` columns for paths on a common grid.
pub fn write_paths(
    path: impl AsRef<Path>,
    config_hash: &str,
    names: &[&str],
    paths: &[&ScalarPath<f64>],
) -> Result<()> {
    let grid = *paths
        .first()
        .ok_or_else(|| Error::Invalid("no paths to write".into()))?
        .grid();
    let mut header = vec!["t"];
    header.extend_from_slice(names);
    let mut out = CsvOut::create(path, config_hash, &header)?;
    for i in 0..grid.len() {
        let mut row = vec![grid.t(i)];
        row.extend(paths.iter().map(|p| p.at(i)));
        out.numbers(&row)?;
    }
    out.finish()
}

/// Writes `t,s,value` rows of a kernel, every `stride` nodes in each direction.
pub fn write_kernel(path: impl AsRef<Path>, config_hash: &str, kernel: &TriKernel<f64>, stride: usize) -> Result<()> {
    let stride = stride.max(1);
    let grid = kernel.grid();
    let mut out = CsvOut::create(path, config_hash, &["t", "s", "value"])?;
    for (i, j, v) in kernel.entries() {
        if i % stride == 0 && j % stride == 0 {
            out.numbers(&[grid.t(i), grid.t(j), v])?;
        }
    }
    out.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn series_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let grid = TimeGrid::new(1.0, 4).unwrap();
        let p = ScalarPath::from_fn(grid, |t| t * t);
        let file = dir.path().join("p.csv");
        write_paths(&file, "abc", &["value"], &[&p]).unwrap();
        let text = std::fs::read_to_string(&file).unwrap();
        assert!(text.starts_with("# config_hash=abc\nt,value\n0.0,0.0\n"));
        let back = series_on_grid(&read_series(&file).unwrap(), &grid, "p").unwrap();
        assert_eq!(back, p);
        let short = TimeGrid::new(0.5, 2).unwrap();
        assert_eq!(
            series_on_grid(&read_series(&file).unwrap(), &short, "p")
                .unwrap()
                .values(),
            &[0.0, 0.0625, 0.25]
        );
        assert!(series_on_grid(&read_series(&file).unwrap(), &TimeGrid::new(1.0, 5).unwrap(), "p").is_err());
    }

    #[test]
    fn bad_header() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("x.csv");
        std::fs::write(&file, "time,value\n0,1\n").unwrap();
        assert!(matches!(read_series(&file), Err(Error::Invalid(_))));
    }

    #[test]
    fn covariance_file() {
        let dir = tempfile::tempdir().unwrap();
        let grid = TimeGrid::new(1.0, 2).unwrap();
        let file = dir.path().join("k.csv");
        let mut text = String::from("t,s,value\n");
        for i in 0..3 {
            for j in 0..3 {
                text += &format!("{},{},{}\n", i as f64 / 2.0, j as f64 / 2.0, i.min(j) as f64 / 2.0);
            }
        }
        std::fs::write(&file, &text).unwrap();
        let cov = read_covariance(&file, None, &grid).unwrap();
        assert_eq!(cov.k(2, 1), 0.5);
        assert_eq!(cov.k(1, 2), 0.5);
        std::fs::write(&file, "t,s,value\n0,0,0\n0.5,0,0\n").unwrap();
        assert!(matches!(
            read_covariance(&file, None, &grid),
            Err(Error::GridMismatch(_))
        ));
    }
}
