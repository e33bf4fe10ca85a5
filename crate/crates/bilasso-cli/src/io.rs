//! CSV input/output. All writers emit a header row and full round-trip
//! float precision (shortest representation that parses back exactly).

use std::fs::File;
use std::path::Path;

use anyhow::{bail, Context, Result};
use bilasso::{GroupStructure, ModelState};
use ndarray::Array2;

/// Shortest round-trip decimal form of an f64.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

/// Write a matrix with header `<prefix>1,...,<prefix>m`.
pub fn write_matrix_csv(path: &Path, m: &Array2<f64>, prefix: &str) -> Result<()> {
    let mut w = csv::Writer::from_writer(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    );
    let header: Vec<String> = (1..=m.ncols()).map(|j| format!("{prefix}{j}")).collect();
    w.write_record(&header)?;
    for row in m.rows() {
        w.write_record(row.iter().map(|&v| fmt_f64(v)))?;
    }
    w.flush()?;
    Ok(())
}

/// Read a numeric matrix; a non-numeric first row is treated as a header.
pub fn read_matrix_csv(path: &Path) -> Result<Array2<f64>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, record) in r.records().enumerate() {
        let record = record?;
        let parsed: std::result::Result<Vec<f64>, _> =
            record.iter().map(|f| f.trim().parse::<f64>()).collect();
        match parsed {
            Ok(vals) => rows.push(vals),
            Err(e) => {
                if idx == 0 {
                    continue; // header row
                }
                bail!("{}: row {} is not numeric: {e}", path.display(), idx + 1);
            }
        }
    }
    if rows.is_empty() {
        bail!("{}: no data rows", path.display());
    }
    let ncols = rows[0].len();
    if rows.iter().any(|r| r.len() != ncols) {
        bail!("{}: ragged rows", path.display());
    }
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    Ok(Array2::from_shape_vec((flat.len() / ncols, ncols), flat)?)
}

/// Write the group map as `snp_index,group_id` with 1-based indices.
pub fn write_groups_csv(path: &Path, groups: &GroupStructure) -> Result<()> {
    let mut w = csv::Writer::from_writer(File::create(path)?);
    w.write_record(["snp_index", "group_id"])?;
    for (i, &k) in groups.assignments().iter().enumerate() {
        w.write_record([(i + 1).to_string(), (k + 1).to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Read a `snp_index,group_id` file (1-based); group ids may be arbitrary
/// integers and are mapped to contiguous indices in sorted order.
pub fn read_groups_csv(path: &Path) -> Result<GroupStructure> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let mut pairs: Vec<(usize, i64)> = Vec::new();
    for record in r.records() {
        let record = record?;
        if record.len() != 2 {
            bail!("{}: expected 2 columns", path.display());
        }
        let snp: usize = record[0].trim().parse().context("snp_index")?;
        let gid: i64 = record[1].trim().parse().context("group_id")?;
        if snp == 0 {
            bail!("{}: snp_index is 1-based", path.display());
        }
        pairs.push((snp - 1, gid));
    }
    let d = pairs.len();
    let mut ids: Vec<i64> = pairs.iter().map(|p| p.1).collect();
    ids.sort_unstable();
    ids.dedup();
    let mut group_of = vec![usize::MAX; d];
    for (snp, gid) in pairs {
        if snp >= d {
            bail!("{}: snp_index {} out of range 1..={d}", path.display(), snp + 1);
        }
        if group_of[snp] != usize::MAX {
            bail!("{}: duplicate snp_index {}", path.display(), snp + 1);
        }
        group_of[snp] = ids.binary_search(&gid).unwrap();
    }
    Ok(GroupStructure::from_assignments(group_of)?)
}

/// Scalar chain trace: `draw,sigma2,lambda1_sq,lambda2_sq`.
pub fn write_chain_csv(path: &Path, draws: &[ModelState]) -> Result<()> {
    let mut w = csv::Writer::from_writer(File::create(path)?);
    w.write_record(["draw", "sigma2", "lambda1_sq", "lambda2_sq"])?;
    for (s, state) in draws.iter().enumerate() {
        w.write_record([
            (s + 1).to_string(),
            fmt_f64(state.sigma2),
            fmt_f64(state.lambda1_sq),
            fmt_f64(state.lambda2_sq),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Elementwise truth-vs-estimate pairs: `w_true,w_est`.
pub fn write_scatter_csv(path: &Path, truth: &Array2<f64>, est: &Array2<f64>) -> Result<()> {
    if truth.dim() != est.dim() {
        bail!(
            "truth is {:?} but estimate is {:?}",
            truth.dim(),
            est.dim()
        );
    }
    let mut w = csv::Writer::from_writer(File::create(path)?);
    w.write_record(["w_true", "w_est"])?;
    for (t, e) in truth.iter().zip(est.iter()) {
        w.write_record([fmt_f64(*t), fmt_f64(*e)])?;
    }
    w.flush()?;
    Ok(())
}
