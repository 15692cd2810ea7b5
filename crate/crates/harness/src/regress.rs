//! Regressions of one final metric on another across sweep runs.

use nc_core::stats::{ols_fit, RegressionFit};
use nc_core::Error as CoreError;

use crate::error::{HarnessError, Result};
use crate::sweep::SweepRow;
use crate::trainer::MetricRecord;

/// A logged column of `r` by its CSV name.
pub fn record_value(r: &MetricRecord, name: &str) -> Option<f64> {
    match name {
        "epoch" => Some(r.epoch as f64),
        "lr" => Some(r.lr),
        "train_loss" => Some(r.train_loss),
        "train_acc" => Some(r.train_acc),
        "sigma_min_w" => r.sigma_min_w,
        "sigma_avg_w" => r.sigma_avg_w,
        "sigma_min_m" => r.sigma_min_m,
        "sigma_avg_m" => r.sigma_avg_m,
        metric => r.metrics.get(metric),
    }
}

fn fit_pairs(pairs: Vec<(f64, f64)>) -> Result<RegressionFit> {
    if pairs.len() < 3 {
        return Err(CoreError::Domain(format!(
            "regression needs at least 3 qualifying runs, got {}",
            pairs.len()
        ))
        .into());
    }
    let (x, y): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    Ok(ols_fit(&x, &y)?)
}

/// OLS of `y_metric` on `x_metric` over the kept runs' final records. Runs
/// where either value was skipped are left out.
pub fn regress_runs(rows: &[SweepRow], x_metric: &str, y_metric: &str) -> Result<RegressionFit> {
    let pairs = rows
        .iter()
        .filter(|r| r.kept)
        .filter_map(|r| Some((r.final_value(x_metric)?, r.final_value(y_metric)?)))
        .collect();
    fit_pairs(pairs)
}

/// Regression from CSV text. Without column names a two-column file is read as
/// x then y, and anything wider defaults to `nc3` on `nc0`. A `kept` column,
/// as in sweep summaries, filters rows.
pub fn regress_csv(text: &str, x: Option<&str>, y: Option<&str>) -> Result<RegressionFit> {
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    let headers = rd
        .headers()
        .map_err(|e| HarnessError::csv("<input>", e))?
        .clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| HarnessError::invalid(format!("no column named {name:?}")))
    };
    let (xi, yi) = match (x, y) {
        (Some(x), Some(y)) => (find(x)?, find(y)?),
        (None, None) if headers.len() == 2 => (0, 1),
        (None, None) => (find("nc0")?, find("nc3")?),
        _ => return Err(HarnessError::invalid("pass both --x and --y or neither")),
    };
    let kept = headers.iter().position(|h| h == "kept");
    let mut pairs = Vec::new();
    for (i, row) in rd.records().enumerate() {
        let row = row.map_err(|e| HarnessError::csv("<input>", e))?;
        if kept.is_some_and(|k| row.get(k) != Some("true")) {
            continue;
        }
        let cell = |j: usize| -> Result<Option<f64>> {
            match row.get(j).unwrap_or("").trim() {
                "" => Ok(None),
                s => s.parse().map(Some).map_err(|e| {
                    HarnessError::invalid(format!("row {}: {s:?}: {e}", i + 2))
                }),
            }
        };
        if let (Some(a), Some(b)) = (cell(xi)?, cell(yi)?) {
            pairs.push((a, b));
        }
    }
    fit_pairs(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_proportional_relation() {
        let text = "nc0,nc3\n0.5,0.08\n1,0.16\n2,0.32\n4,0.64\n";
        let f = regress_csv(text, None, None).unwrap();
        assert!((f.slope - 0.16).abs() < 1e-14);
        assert!(f.intercept.abs() < 1e-14);
        assert!((f.r_squared - 1.0).abs() < 1e-14);
    }

    #[test]
    fn named_columns_and_kept_filter() {
        let text = "run,kept,nc0,nc3\n0,true,1,2\n1,false,100,-7\n2,true,2,4.5\n3,true,3,6\n4,true,,1\n";
        let f = regress_csv(text, Some("nc0"), Some("nc3")).unwrap();
        assert_eq!(f.n, 3);
        assert!((f.slope - 2.0).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        assert!(regress_csv("a,b,c\n1,2,3\n", None, None).is_err());
        assert!(regress_csv("a,b\n1,2\n", Some("a"), None).is_err());
        assert!(regress_csv("a,b\n1,2\n2,3\n", None, None).is_err());
        assert!(regress_csv("a,b\n1,2\n", Some("a"), Some("z")).is_err());
        let constant = regress_csv("a,b\n1,2\n1,3\n1,4\n", None, None).unwrap_err();
        assert!(matches!(constant, HarnessError::Core(CoreError::Domain(_))));
    }
}
