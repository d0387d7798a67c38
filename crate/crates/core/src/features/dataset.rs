use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{assemble_features, FeatureSchema, PcaModel};
use crate::error::{invalid, Result};
use crate::power::{ParameterPoint, SimulationSpec};

/// A parameter point with its simulated power.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRow {
    pub point: ParameterPoint,
    pub power: f64,
}

/// Sidecar metadata written next to a dataset CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub simulation: SimulationSpec,
    pub seed: u64,
    pub rows: usize,
    /// `compute_power` invocations spent producing the file.
    pub compute_calls: u64,
    pub pca: PcaModel,
    pub feature_schema: FeatureSchema,
    pub feature_width: usize,
}

/// Decimal text with 10 significant digits.
pub fn format_sig10(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x.is_nan() { "NaN".into() } else if x == 0.0 { "0".into() } else { format!("{x}") };
    }
    let rounded: f64 = format!("{x:.9e}").parse().expect("formatted float parses");
    format!("{rounded}")
}

fn beta_header(k: usize) -> String {
    (1..=k).map(|i| format!("beta_{i}")).collect::<Vec<_>>().join(",")
}

/// Parameter points as `beta_1..beta_k,N` rows.
pub fn write_points_csv(k: usize, points: &[ParameterPoint]) -> String {
    let mut s = format!("{},N\n", beta_header(k));
    for p in points {
        for b in &p.beta {
            s.push_str(&format_sig10(*b));
            s.push(',');
        }
        let _ = writeln!(s, "{}", p.n);
    }
    s
}

struct Columns {
    beta: Vec<usize>,
    n: usize,
    power: Option<usize>,
    width: usize,
}

fn parse_header(line: &str) -> Result<Columns> {
    let names: Vec<&str> = line.trim().split(',').map(str::trim).collect();
    let mut beta = Vec::new();
    let mut n = None;
    let mut power = None;
    for (i, name) in names.iter().enumerate() {
        if let Some(idx) = name.strip_prefix("beta_") {
            let idx: usize = idx.parse().map_err(|_| invalid(format!("bad column name {name}")))?;
            if idx != beta.len() + 1 {
                return Err(invalid(format!("beta columns out of order at {name}")));
            }
            beta.push(i);
        } else if *name == "N" {
            n = Some(i);
        } else if *name == "power" {
            power = Some(i);
        }
    }
    let n = n.ok_or_else(|| invalid("missing N column"))?;
    if beta.is_empty() {
        return Err(invalid("missing beta columns"));
    }
    Ok(Columns { beta, n, power, width: names.len() })
}

fn parse_rows(text: &str, need_power: bool) -> Result<Vec<(ParameterPoint, Option<f64>)>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| invalid("empty CSV"))?;
    let cols = parse_header(header)?;
    if need_power && cols.power.is_none() {
        return Err(invalid("missing power column"));
    }
    let mut out = Vec::new();
    for (lineno, line) in lines {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != cols.width {
            return Err(invalid(format!("line {}: expected {} fields, got {}", lineno + 1, cols.width, fields.len())));
        }
        let num = |i: usize| -> Result<f64> {
            fields[i].parse::<f64>().map_err(|_| invalid(format!("line {}: bad number {:?}", lineno + 1, fields[i])))
        };
        let beta = cols.beta.iter().map(|&i| num(i)).collect::<Result<Vec<_>>>()?;
        let n = num(cols.n)?;
        if n < 1.0 || n.fract() != 0.0 {
            return Err(invalid(format!("line {}: N must be a positive integer", lineno + 1)));
        }
        let power = cols.power.map(num).transpose()?;
        out.push((ParameterPoint::new(beta, n as usize), power));
    }
    Ok(out)
}

/// Read a points CSV (extra columns are ignored).
pub fn parse_points_csv(text: &str) -> Result<Vec<ParameterPoint>> {
    Ok(parse_rows(text, false)?.into_iter().map(|(p, _)| p).collect())
}

/// Read a dataset CSV. Engineered columns are recomputed downstream.
pub fn parse_dataset_csv(text: &str) -> Result<Vec<DatasetRow>> {
    Ok(parse_rows(text, true)?
        .into_iter()
        .map(|(point, power)| DatasetRow { point, power: power.expect("power column checked") })
        .collect())
}

/// Dataset CSV: `beta_1..beta_k,N,scaled_weight,pc_1..pc_r,power`.
pub fn write_dataset_csv(k: usize, rows: &[DatasetRow], pca: &PcaModel) -> Result<String> {
    let schema = FeatureSchema::new(k, pca.n_components());
    let mut s = schema.names().join(",");
    s.push_str(",power\n");
    if rows.is_empty() {
        return Ok(s);
    }
    let fm = assemble_features(rows, pca)?;
    for (row, (features, power)) in rows.iter().zip(fm.rows.iter().zip(&fm.power)) {
        for (j, v) in features.iter().enumerate() {
            if j == schema.n_index() {
                let _ = write!(s, "{},", row.point.n);
            } else {
                s.push_str(&format_sig10(*v));
                s.push(',');
            }
        }
        s.push_str(&format_sig10(*power));
        s.push('\n');
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::pca_fit;
    use proptest::prelude::*;

    #[test]
    fn sig10_format() {
        assert_eq!(format_sig10(0.0), "0");
        assert_eq!(format_sig10(0.125), "0.125");
        assert_eq!(format_sig10(1.0 / 3.0), "0.3333333333");
        assert_eq!(format_sig10(-12345.678901234), "-12345.6789");
    }

    proptest! {
        #[test]
        fn sig10_keeps_ten_digits(x in -1e6f64..1e6) {
            let back: f64 = format_sig10(x).parse().unwrap();
            prop_assert!((back - x).abs() <= 5e-10 * x.abs().max(1e-300));
        }
    }

    #[test]
    fn dataset_round_trip() {
        let rows: Vec<DatasetRow> = (0..6)
            .map(|i| DatasetRow { point: ParameterPoint::new(vec![0.25 * i as f64, 0.5], 20 + i), power: 0.125 * i as f64 })
            .collect();
        let base: Vec<Vec<f64>> = rows.iter().map(|r| super::super::base_features(&r.point)).collect();
        let pca = pca_fit(&base, 0.99).unwrap();
        let text = write_dataset_csv(2, &rows, &pca).unwrap();
        assert!(text.starts_with("beta_1,beta_2,N,scaled_weight,pc_1"));
        assert_eq!(parse_dataset_csv(&text).unwrap(), rows);
        let header_only = write_dataset_csv(2, &[], &pca).unwrap();
        assert_eq!(header_only.lines().count(), 1);
        assert!(parse_dataset_csv(&header_only).unwrap().is_empty());
    }

    #[test]
    fn points_round_trip_and_errors() {
        let pts = vec![ParameterPoint::new(vec![0.5, -0.25], 30)];
        let text = write_points_csv(2, &pts);
        assert_eq!(text, "beta_1,beta_2,N\n0.5,-0.25,30\n");
        assert_eq!(parse_points_csv(&text).unwrap(), pts);
        assert!(parse_points_csv("beta_1,N\n0.1,2.5\n").is_err());
        assert!(parse_points_csv("beta_1,N\n0.1\n").is_err());
        assert!(parse_dataset_csv("beta_1,N\n0.1,3\n").is_err());
    }
}
