//! JSON and CSV file formats.
//!
//! Complex numbers are `[re, im]` pairs and matrices are row-major nested arrays.
//! Data values are written with 17 significant digits.

use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize, Serializer};
use serde_json::value::RawValue;

use crate::error::{Error, Result};
use crate::factor::GaugeTag;
use crate::numeric::{self, c64, CMatrix, CVector};
use crate::simulate::SamplePath;
use crate::spectra::{
    density_from_covariance, density_from_ma, CovarianceSequence, FrequencyGrid, MaSpec, PsdRepair,
    SpectralDensityField,
};
use crate::wold::{PredictionResult, WoldModel};

/// A float written as `{:.16e}` and read as an ordinary JSON number.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(transparent)]
pub struct Sig17(pub f64);

impl Serialize for Sig17 {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if !self.0.is_finite() {
            return Err(serde::ser::Error::custom(format!("non-finite value {}", self.0)));
        }
        let raw = RawValue::from_string(format!("{:.16e}", self.0)).map_err(serde::ser::Error::custom)?;
        raw.serialize(s)
    }
}

pub type JsonMatrix = Vec<Vec<[Sig17; 2]>>;

/// Matrix rows as plain `[re, im]` pairs, for reports.
pub fn matrix_rows(m: &CMatrix) -> Vec<Vec<[f64; 2]>> {
    m.row_iter().map(|r| r.iter().map(|z| [z.re, z.im]).collect()).collect()
}

pub fn matrix_to_json(m: &CMatrix) -> JsonMatrix {
    m.row_iter().map(|r| r.iter().map(|z| [Sig17(z.re), Sig17(z.im)]).collect()).collect()
}

pub fn matrix_from_json(rows: &JsonMatrix, field: &str) -> Result<CMatrix> {
    let cols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || cols == 0 {
        return Err(parse_error(field, "empty matrix"));
    }
    if let Some(i) = rows.iter().position(|r| r.len() != cols) {
        return Err(parse_error(&format!("{field}[{i}]"), &format!("row has {} entries, expected {cols}", rows[i].len())));
    }
    let entries: Vec<Complex64> = rows.iter().flatten().map(|[re, im]| c64(re.0, im.0)).collect();
    numeric::matrix_from_rows(rows.len(), cols, &entries)
}

fn parse_error(field: &str, message: &str) -> Error {
    Error::Parse {
        field: field.to_string(),
        message: message.to_string(),
    }
}

/// Deserializes with the failing field path and source position in the error.
pub fn parse_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::Parse {
            field: if path == "." { "<root>".into() } else { path },
            message: e.into_inner().to_string(),
        }
    })
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))
}

fn matrices_from_json(ms: &[JsonMatrix], field: &str) -> Result<Vec<CMatrix>> {
    ms.iter()
        .enumerate()
        .map(|(i, m)| matrix_from_json(m, &format!("{field}[{i}]")))
        .collect()
}

fn check_shape(ms: &[CMatrix], rows: usize, cols: usize, field: &str) -> Result<()> {
    match ms.iter().position(|m| m.shape() != (rows, cols)) {
        Some(i) => Err(parse_error(
            &format!("{field}[{i}]"),
            &format!("matrix is {}x{}, expected {rows}x{cols}", ms[i].nrows(), ms[i].ncols()),
        )),
        None => Ok(()),
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaFile {
    pub dimension: usize,
    pub rank: usize,
    pub coefficients: Vec<JsonMatrix>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CovarianceFile {
    pub dimension: usize,
    /// `C(0..=H)`.
    pub lags: Vec<JsonMatrix>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampledDensityFile {
    pub dimension: usize,
    pub grid_size: usize,
    /// `f(ω_m)` for `ω_m = −π + 2πm/N`.
    pub values: Vec<JsonMatrix>,
}

pub fn ma_spec_from_file(file: &MaFile) -> Result<MaSpec> {
    let coefficients = matrices_from_json(&file.coefficients, "coefficients")?;
    check_shape(&coefficients, file.dimension, file.rank, "coefficients")?;
    MaSpec::new(coefficients)
}

pub fn read_ma_spec(text: &str) -> Result<MaSpec> {
    ma_spec_from_file(&parse_json(text)?)
}

pub fn write_ma_spec(spec: &MaSpec) -> Result<String> {
    to_json(&MaFile {
        dimension: spec.dimension(),
        rank: spec.rank(),
        coefficients: spec.coefficients().iter().map(matrix_to_json).collect(),
    })
}

pub fn covariance_from_file(file: &CovarianceFile) -> Result<CovarianceSequence> {
    let lags = matrices_from_json(&file.lags, "lags")?;
    check_shape(&lags, file.dimension, file.dimension, "lags")?;
    CovarianceSequence::new(lags)
}

pub fn read_covariance(text: &str) -> Result<CovarianceSequence> {
    covariance_from_file(&parse_json(text)?)
}

pub fn write_covariance(cov: &CovarianceSequence) -> Result<String> {
    to_json(&CovarianceFile {
        dimension: cov.dimension(),
        lags: cov.lags().iter().map(matrix_to_json).collect(),
    })
}

pub fn sampled_density_from_file(file: &SampledDensityFile) -> Result<SpectralDensityField> {
    let grid = FrequencyGrid::new(file.grid_size)?;
    if file.values.len() != file.grid_size {
        return Err(parse_error(
            "values",
            &format!("{} samples for grid_size {}", file.values.len(), file.grid_size),
        ));
    }
    let values = matrices_from_json(&file.values, "values")?;
    check_shape(&values, file.dimension, file.dimension, "values")?;
    SpectralDensityField::new(grid, values)
}

pub fn read_sampled_density(text: &str) -> Result<SpectralDensityField> {
    sampled_density_from_file(&parse_json(text)?)
}

pub fn write_sampled_density(f: &SpectralDensityField) -> Result<String> {
    to_json(&SampledDensityFile {
        dimension: f.dimension(),
        grid_size: f.grid().size(),
        values: f.values().iter().map(matrix_to_json).collect(),
    })
}

/// Any of the three density sources accepted by the factorization commands.
#[derive(Debug, Clone)]
pub enum DensityInput {
    Ma(MaSpec),
    Covariance(CovarianceSequence),
    Sampled(SpectralDensityField),
}

impl DensityInput {
    pub fn kind(&self) -> &'static str {
        match self {
            DensityInput::Ma(_) => "ma",
            DensityInput::Covariance(_) => "covariance",
            DensityInput::Sampled(_) => "sampled-density",
        }
    }

    /// Grid size fixed by the input itself, if any.
    pub fn native_grid(&self) -> Option<usize> {
        match self {
            DensityInput::Sampled(f) => Some(f.grid().size()),
            _ => None,
        }
    }

    /// Samples the density on `grid`; covariance inputs may be repaired to PSD.
    pub fn density(&self, grid: FrequencyGrid, psd_fix: bool) -> Result<(SpectralDensityField, Option<PsdRepair>)> {
        match self {
            DensityInput::Ma(spec) => Ok((density_from_ma(spec, grid)?, None)),
            DensityInput::Covariance(cov) => {
                let (f, repair) = density_from_covariance(cov, grid, psd_fix)?;
                Ok((f, Some(repair)))
            }
            DensityInput::Sampled(f) if f.grid() == grid => Ok((f.clone(), None)),
            DensityInput::Sampled(f) => Err(Error::Dimension(format!(
                "sampled density has {} nodes but the grid has {}",
                f.grid().size(),
                grid.size()
            ))),
        }
    }
}

/// Dispatches on the top-level key: `coefficients`, `lags` or `values`.
pub fn read_density_input(text: &str) -> Result<DensityInput> {
    let value: serde_json::Value = parse_json(text)?;
    let obj = value.as_object().ok_or_else(|| parse_error("<root>", "expected a JSON object"))?;
    if obj.contains_key("coefficients") {
        Ok(DensityInput::Ma(read_ma_spec(text)?))
    } else if obj.contains_key("lags") {
        Ok(DensityInput::Covariance(read_covariance(text)?))
    } else if obj.contains_key("values") {
        Ok(DensityInput::Sampled(read_sampled_density(text)?))
    } else {
        Err(parse_error("<root>", "expected one of the fields \"coefficients\", \"lags\" or \"values\""))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TailEnergyFile {
    pub b: f64,
    pub c_psi: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ModelFile {
    pub dimension: usize,
    pub rank: usize,
    pub grid_size: usize,
    pub gauge: GaugeTag,
    pub b: Vec<JsonMatrix>,
    pub c_psi: Vec<JsonMatrix>,
    pub sigma: JsonMatrix,
    pub tail_energies: TailEnergyFile,
    #[serde(default)]
    pub tolerances: serde_json::Value,
    #[serde(default)]
    pub reports: serde_json::Value,
}

pub fn write_model(model: &WoldModel, tolerances: serde_json::Value, reports: serde_json::Value) -> Result<String> {
    to_json(&ModelFile {
        dimension: model.dimension,
        rank: model.rank,
        grid_size: model.grid_size,
        gauge: model.gauge,
        b: model.b.iter().map(matrix_to_json).collect(),
        c_psi: model.c_psi.iter().map(matrix_to_json).collect(),
        sigma: matrix_to_json(&model.sigma),
        tail_energies: TailEnergyFile {
            b: model.b_tail_energy,
            c_psi: model.c_psi_tail_energy,
        },
        tolerances,
        reports,
    })
}

/// Reads a model; `Σ` is recomputed from `b(0)`.
pub fn read_model(text: &str) -> Result<WoldModel> {
    let file: ModelFile = parse_json(text)?;
    let b = matrices_from_json(&file.b, "b")?;
    let c_psi = matrices_from_json(&file.c_psi, "c_psi")?;
    check_shape(&b, file.dimension, file.rank, "b")?;
    check_shape(&c_psi, file.rank, file.dimension, "c_psi")?;
    WoldModel::new(
        b,
        c_psi,
        file.grid_size,
        file.gauge,
        file.tail_energies.b,
        file.tail_energies.c_psi,
    )
}

pub fn path_csv_header(d: usize) -> String {
    let mut h = String::from("t");
    for i in 1..=d {
        h.push_str(&format!(",x{i}_re,x{i}_im"));
    }
    h
}

fn vector_csv_row(t: usize, v: &CVector) -> String {
    let mut row = t.to_string();
    for z in v.iter() {
        row.push_str(&format!(",{:.16e},{:.16e}", z.re, z.im));
    }
    row
}

pub fn write_path_csv(path: &SamplePath) -> String {
    let mut out = path_csv_header(path.dimension());
    out.push('\n');
    for (i, v) in path.values().iter().enumerate() {
        out.push_str(&vector_csv_row(i + 1, v));
        out.push('\n');
    }
    out
}

/// Reads a path CSV; whitespace around fields is ignored and rows must be numbered `1..=T`.
pub fn read_path_csv(text: &str) -> Result<SamplePath> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| parse_error("header", "empty CSV"))?;
    let columns: Vec<&str> = header.split(',').map(str::trim).collect();
    if columns.len() < 3 || columns.len().is_multiple_of(2) || columns[0] != "t" {
        return Err(parse_error("header", "expected \"t, x1_re, x1_im, ...\""));
    }
    let d = (columns.len() - 1) / 2;
    if columns[1..] != path_csv_header(d).split(',').skip(1).collect::<Vec<_>>()[..] {
        return Err(parse_error("header", &format!("unexpected column names {:?}", &columns[1..])));
    }
    let mut values = Vec::new();
    for (line_no, line) in lines {
        let at = |col: &str| format!("line {} column {col}", line_no + 1);
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != columns.len() {
            return Err(parse_error(&format!("line {}", line_no + 1), &format!("{} fields, expected {}", fields.len(), columns.len())));
        }
        let t: usize = fields[0].parse().map_err(|e| parse_error(&at("t"), &format!("{e}")))?;
        if t != values.len() + 1 {
            return Err(parse_error(&at("t"), &format!("expected time index {}, found {t}", values.len() + 1)));
        }
        let mut nums = Vec::with_capacity(2 * d);
        for (c, f) in columns[1..].iter().zip(&fields[1..]) {
            nums.push(f.parse::<f64>().map_err(|e| parse_error(&at(c), &format!("{e}")))?);
        }
        values.push(CVector::from_fn(d, |i, _| c64(nums[2 * i], nums[2 * i + 1])));
    }
    SamplePath::new(d, values)
}

#[derive(Debug, Serialize)]
pub struct PredictionRecord {
    pub t: usize,
    pub horizon: usize,
    pub value: Vec<[Sig17; 2]>,
    pub error_covariance: JsonMatrix,
}

#[derive(Debug, Serialize)]
pub struct PredictionFile {
    pub origin: usize,
    pub horizon: usize,
    pub truncation_bias: f64,
    pub predictions: Vec<PredictionRecord>,
}

pub fn prediction_file(p: &PredictionResult) -> PredictionFile {
    PredictionFile {
        origin: p.origin,
        horizon: p.horizon,
        truncation_bias: p.truncation_bias,
        predictions: p
            .values
            .iter()
            .zip(&p.error_covariances)
            .enumerate()
            .map(|(s, (v, e))| PredictionRecord {
                t: p.origin + s + 1,
                horizon: s + 1,
                value: v.iter().map(|z| [Sig17(z.re), Sig17(z.im)]).collect(),
                error_covariance: matrix_to_json(e),
            })
            .collect(),
    }
}

pub fn write_prediction_json(p: &PredictionResult) -> Result<String> {
    to_json(&prediction_file(p))
}

/// Same layout as a path CSV, indexed by the predicted time.
pub fn write_prediction_csv(p: &PredictionResult) -> String {
    let d = p.values.first().map_or(0, |v| v.len());
    let mut out = path_csv_header(d);
    out.push('\n');
    for (s, v) in p.values.iter().enumerate() {
        out.push_str(&vector_csv_row(p.origin + s + 1, v));
        out.push('\n');
    }
    out
}
