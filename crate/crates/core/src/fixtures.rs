//! Published optimized coefficients bundled with the crate, looked up by
//! distance with linear interpolation between tabulated rows.

use crate::error::{Error, Result};
use crate::states::CoefficientVector;

const TABLE2: &str = include_str!("../fixtures/table2_nmax7.csv");
const TABLE3: &str = include_str!("../fixtures/table3_nmax1.csv");
const TABLE4: &str = include_str!("../fixtures/table4_gamma.csv");
const TABLE5: &str = include_str!("../fixtures/table5_detector.csv");

/// Which bundled table to read.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Fixture {
    /// `n_max = 7` coefficients for ideal detectors.
    Table2,
    /// `n_max = 1` coefficients for ideal detectors.
    Table3,
    /// Squeezing parameter of the truncated two-mode squeezed vacuum.
    Table4,
    /// `n_max = 1` coefficients for `η = 0.85`, dark count `5e-8`.
    Table5,
}

impl Fixture {
    pub fn source(self) -> &'static str {
        match self {
            Fixture::Table2 => TABLE2,
            Fixture::Table3 => TABLE3,
            Fixture::Table4 => TABLE4,
            Fixture::Table5 => TABLE5,
        }
    }
}

/// Rows of `(distance_km, values)` sorted by distance.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceTable {
    columns: Vec<String>,
    rows: Vec<(f64, Vec<f64>)>,
}

impl DistanceTable {
    pub fn parse(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
        let headers = reader.headers().map_err(|e| Error::Fixture(e.to_string()))?.clone();
        if headers.get(0) != Some("distance_km") || headers.len() < 2 {
            return Err(Error::Fixture("first column must be distance_km".into()));
        }
        let columns = headers.iter().skip(1).map(str::to_string).collect();
        let mut rows: Vec<(f64, Vec<f64>)> = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| Error::Fixture(e.to_string()))?;
            let values = record
                .iter()
                .map(|f| f.trim().parse::<f64>().map_err(|e| Error::Fixture(format!("{f:?}: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            if let Some((last, _)) = rows.last() {
                if values[0] <= *last {
                    return Err(Error::Fixture("distances must be strictly increasing".into()));
                }
            }
            rows.push((values[0], values[1..].to_vec()));
        }
        if rows.is_empty() {
            return Err(Error::Fixture("table has no rows".into()));
        }
        Ok(Self { columns, rows })
    }

    pub fn load(fixture: Fixture) -> Self {
        Self::parse(fixture.source()).expect("bundled fixtures parse")
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn rows(&self) -> &[(f64, Vec<f64>)] {
        &self.rows
    }

    pub fn distances(&self) -> Vec<f64> {
        self.rows.iter().map(|(d, _)| *d).collect()
    }

    /// Exact tabulated row.
    pub fn at(&self, distance_km: f64) -> Option<&[f64]> {
        self.rows.iter().find(|(d, _)| *d == distance_km).map(|(_, v)| v.as_slice())
    }

    /// Linear interpolation in distance, held constant beyond either end.
    pub fn interpolate(&self, distance_km: f64) -> Vec<f64> {
        let first = &self.rows[0];
        let last = &self.rows[self.rows.len() - 1];
        if distance_km <= first.0 {
            return first.1.clone();
        }
        if distance_km >= last.0 {
            return last.1.clone();
        }
        let hi = self.rows.iter().position(|(d, _)| *d >= distance_km).expect("inside range");
        let (d0, v0) = &self.rows[hi - 1];
        let (d1, v1) = &self.rows[hi];
        let f = (distance_km - d0) / (d1 - d0);
        v0.iter().zip(v1).map(|(a, b)| a + f * (b - a)).collect()
    }

    /// Interpolated row rescaled onto the simplex.
    pub fn coefficients(&self, distance_km: f64) -> Result<CoefficientVector> {
        CoefficientVector::normalized(self.interpolate(distance_km))
    }
}
