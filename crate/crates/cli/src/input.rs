//! Samples from `u,x,y` CSV files.

use std::path::Path;

use tvkern::{Domain, Error, Result, Sample};

fn csv_error(path: &Path, message: impl ToString) -> Error {
    Error::Csv {
        path: path.to_path_buf(),
        message: message.to_string(),
    }
}

/// Reads columns `u`, `y` and the covariates `x` (or `x1`, `x2`, ...), rows in time order.
pub fn read_sample(path: &Path, domain: Domain) -> Result<Sample> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let u_col = col("u").ok_or_else(|| csv_error(path, "missing `u` column"))?;
    let y_col = col("y").ok_or_else(|| csv_error(path, "missing `y` column"))?;
    let x_cols: Vec<usize> = match col("x") {
        Some(c) => vec![c],
        None => (1..).map_while(|j| col(&format!("x{j}"))).collect(),
    };
    if x_cols.is_empty() {
        return Err(csv_error(path, "missing `x` column"));
    }

    let (mut u, mut x, mut y) = (Vec::new(), Vec::new(), Vec::new());
    for (k, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let field = |c: usize| -> Result<f64> {
            let text = record.get(c).unwrap_or("");
            text.parse()
                .map_err(|_| csv_error(path, format!("line {}: '{text}' is not a number", k + 2)))
        };
        u.push(field(u_col)?);
        y.push(field(y_col)?);
        for &c in &x_cols {
            x.push(field(c)?);
        }
    }
    Sample::from_flat(u, x, x_cols.len(), y, domain)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_named_columns() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        std::fs::write(&path, "y,u,x1,x2\n1.0,0.5,0.1,0.2\n2.0,1.0,0.3,0.4\n").unwrap();
        let s = read_sample(&path, Domain::Target).unwrap();
        assert_eq!(s.dim(), 2);
        assert_eq!(s.x_row(1), &[0.3, 0.4]);
        assert_eq!(s.responses(), &[1.0, 2.0]);

        std::fs::write(&path, "u,x,y\n0.5,0.1,oops\n").unwrap();
        assert!(matches!(
            read_sample(&path, Domain::Target),
            Err(Error::Csv { .. })
        ));
    }
}
