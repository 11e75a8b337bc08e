//! File artifacts. Every CSV starts with `# key: value` metadata lines
//! (configuration hash, seed, crate version, plus artifact-specific keys),
//! then a header row and the data; every JSON artifact wraps its payload as
//! `{"metadata": …, "result": …}`. Each writer has a matching loader.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use nalgebra::DMatrix;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::benchmarking::{DecayKind, Ecdf, RbDataset, SequenceRecord};
use crate::calibration::ChevronDataset;
use crate::dynamics::{CMatrix, Superoperator};
use crate::error::{Error, Result};
use crate::noise::CoherencePoint;
use crate::pulse::Waveform;

/// Provenance written at the top of every artifact.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Metadata {
    /// SHA-256 of the configuration bytes, lowercase hex.
    pub config_sha256: String,
    pub seed: Option<u64>,
    pub version: String,
    /// Artifact-specific entries (sorted, so output is deterministic).
    #[serde(default)]
    pub extra: BTreeMap<String, String>,
}

impl Metadata {
    pub fn new(config: &[u8], seed: Option<u64>, version: &str) -> Self {
        Self { config_sha256: config_hash(config), seed, version: version.to_string(), extra: BTreeMap::new() }
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.extra.insert(key.to_string(), value.to_string());
        self
    }

    fn extra_f64(&self, key: &str) -> Result<f64> {
        let v = self.extra.get(key).ok_or_else(|| Error::Schema(format!("metadata key `{key}` missing")))?;
        v.parse().map_err(|_| Error::Schema(format!("metadata key `{key}` is not a number: {v:?}")))
    }

    fn write_header<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "# config_sha256: {}", self.config_sha256)?;
        match self.seed {
            Some(s) => writeln!(w, "# seed: {s}")?,
            None => writeln!(w, "# seed: none")?,
        }
        writeln!(w, "# version: {}", self.version)?;
        for (k, v) in &self.extra {
            writeln!(w, "# {k}: {v}")?;
        }
        Ok(())
    }

    fn parse_line(&mut self, line: usize, text: &str) -> Result<()> {
        let (key, value) = text
            .split_once(':')
            .map(|(k, v)| (k.trim(), v.trim()))
            .ok_or_else(|| Error::Parse { line, message: format!("metadata line without `key: value`: {text:?}") })?;
        match key {
            "config_sha256" => self.config_sha256 = value.to_string(),
            "version" => self.version = value.to_string(),
            "seed" if value == "none" => self.seed = None,
            "seed" => {
                self.seed = Some(value.parse().map_err(|_| Error::Parse { line, message: format!("bad seed {value:?}") })?)
            }
            _ => {
                self.extra.insert(key.to_string(), value.to_string());
            }
        }
        Ok(())
    }
}

/// Lowercase hex SHA-256 digest.
pub fn config_hash(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Parsed CSV body: rows of fields with their 1-based file line numbers.
struct Table {
    metadata: Metadata,
    rows: Vec<(usize, Vec<String>)>,
}

impl Table {
    fn column<T: std::str::FromStr>(&self, row: usize, col: usize, name: &str) -> Result<T> {
        let (line, fields) = &self.rows[row];
        fields[col]
            .parse()
            .map_err(|_| Error::Parse { line: *line, message: format!("column `{name}`: cannot parse {:?}", fields[col]) })
    }
}

fn write_table<W: Write>(mut w: W, metadata: &Metadata, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    metadata.write_header(&mut w)?;
    let mut out = csv::WriterBuilder::new().from_writer(w);
    out.write_record(header).map_err(csv_io)?;
    for row in rows {
        out.write_record(row).map_err(csv_io)?;
    }
    out.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}

fn read_table<R: Read>(mut r: R, header: &[&str]) -> Result<Table> {
    let mut text = String::new();
    r.read_to_string(&mut text)?;
    let mut metadata = Metadata::default();
    let mut body_start = 0;
    let mut meta_lines = 0;
    for (k, line) in text.split_inclusive('\n').enumerate() {
        match line.strip_prefix('#') {
            Some(rest) => {
                metadata.parse_line(k + 1, rest.trim())?;
                body_start += line.len();
                meta_lines += 1;
            }
            None => break,
        }
    }
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(false).from_reader(text[body_start..].as_bytes());
    let found: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Parse { line: meta_lines + 1, message: e.to_string() })?
        .iter()
        .map(str::to_string)
        .collect();
    if found != header {
        return Err(Error::Schema(format!("expected columns {header:?}, found {found:?}")));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse {
            line: meta_lines + e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = meta_lines + rec.position().map_or(0, |p| p.line() as usize);
        rows.push((line, rec.iter().map(str::to_string).collect()));
    }
    Ok(Table { metadata, rows })
}

fn num(x: f64) -> String {
    format!("{x}")
}

// ---- JSON -----------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct Envelope<T> {
    metadata: Metadata,
    result: T,
}

/// Pretty JSON `{"metadata": …, "result": …}` with a trailing newline.
pub fn write_json<W: Write, T: Serialize>(mut w: W, metadata: &Metadata, result: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, &Envelope { metadata: metadata.clone(), result })?;
    writeln!(w)?;
    Ok(())
}

pub fn read_json<R: Read, T: DeserializeOwned>(r: R) -> Result<(Metadata, T)> {
    let env: Envelope<T> = serde_json::from_reader(r)?;
    Ok((env.metadata, env.result))
}

// ---- Chevron --------------------------------------------------------------

const CHEVRON_HEADER: [&str; 3] = ["freq", "duration", "population"];

/// One row per grid point, frequency-major; ε and the edge go to metadata.
pub fn write_chevron_csv<W: Write>(w: W, metadata: &Metadata, data: &ChevronDataset) -> Result<()> {
    let meta = metadata.clone().with("epsilon", data.epsilon).with("edge", data.edge);
    let rows: Vec<Vec<String>> = data
        .frequencies
        .iter()
        .zip(&data.population)
        .flat_map(|(f, row)| data.durations.iter().zip(row).map(move |(t, p)| vec![num(*f), num(*t), num(*p)]))
        .collect();
    write_table(w, &meta, &CHEVRON_HEADER, &rows)
}

pub fn read_chevron_csv<R: Read>(r: R) -> Result<(Metadata, ChevronDataset)> {
    let table = read_table(r, &CHEVRON_HEADER)?;
    let (epsilon, edge) = (table.metadata.extra_f64("epsilon")?, table.metadata.extra_f64("edge")?);
    let mut frequencies: Vec<f64> = Vec::new();
    let mut durations: Vec<f64> = Vec::new();
    let mut population: Vec<Vec<f64>> = Vec::new();
    for k in 0..table.rows.len() {
        let (f, t, p): (f64, f64, f64) =
            (table.column(k, 0, "freq")?, table.column(k, 1, "duration")?, table.column(k, 2, "population")?);
        if frequencies.last() != Some(&f) {
            frequencies.push(f);
            population.push(Vec::new());
        }
        if frequencies.len() == 1 {
            durations.push(t);
        }
        let row = population.last_mut().expect("row exists");
        if durations.get(row.len()) != Some(&t) {
            return Err(Error::Parse { line: table.rows[k].0, message: "chevron rows are not a full grid".into() });
        }
        row.push(p);
    }
    if population.iter().any(|r| r.len() != durations.len()) {
        return Err(Error::Schema("chevron rows are not a full grid".into()));
    }
    let data = ChevronDataset { epsilon, edge, frequencies, durations, population, warnings: Vec::new() };
    Ok((table.metadata, data))
}

// ---- Randomized benchmarking ------------------------------------------------

const RB_HEADER: [&str; 7] = ["decay", "kind", "length", "sequence_index", "successes", "shots", "slot"];

pub fn write_rb_csv<W: Write>(w: W, metadata: &Metadata, data: &RbDataset) -> Result<()> {
    let rows: Vec<Vec<String>> = data
        .records
        .iter()
        .map(|r| {
            let kind = match r.kind {
                DecayKind::Reference => "reference",
                DecayKind::Interleaved => "interleaved",
            };
            vec![
                r.decay.to_string(),
                kind.to_string(),
                r.length.to_string(),
                r.sequence.to_string(),
                r.successes.to_string(),
                r.shots.to_string(),
                r.slot.to_string(),
            ]
        })
        .collect();
    write_table(w, metadata, &RB_HEADER, &rows)
}

pub fn read_rb_csv<R: Read>(r: R) -> Result<(Metadata, RbDataset)> {
    let table = read_table(r, &RB_HEADER)?;
    let records = (0..table.rows.len())
        .map(|k| {
            let kind = match table.rows[k].1[1].as_str() {
                "reference" => DecayKind::Reference,
                "interleaved" => DecayKind::Interleaved,
                other => {
                    return Err(Error::Parse { line: table.rows[k].0, message: format!("unknown decay kind {other:?}") })
                }
            };
            let rec = SequenceRecord {
                decay: table.column(k, 0, "decay")?,
                kind,
                length: table.column(k, 2, "length")?,
                sequence: table.column(k, 3, "sequence_index")?,
                successes: table.column(k, 4, "successes")?,
                shots: table.column(k, 5, "shots")?,
                slot: table.column(k, 6, "slot")?,
            };
            if rec.successes > rec.shots {
                return Err(Error::Parse { line: table.rows[k].0, message: "successes exceed shots".into() });
            }
            Ok(rec)
        })
        .collect::<Result<_>>()?;
    Ok((table.metadata, RbDataset { records }))
}

// ---- ECDF -----------------------------------------------------------------

const ECDF_HEADER: [&str; 4] = ["infidelity", "cumulative_probability", "band_low", "band_high"];

pub fn write_ecdf_csv<W: Write>(w: W, metadata: &Metadata, ecdf: &Ecdf) -> Result<()> {
    let meta = metadata.clone().with("band_half_width", ecdf.half_width).with("band_confidence", ecdf.confidence);
    let rows: Vec<Vec<String>> = (0..ecdf.values.len())
        .map(|i| vec![num(ecdf.values[i]), num(ecdf.cumulative[i]), num(ecdf.band_low[i]), num(ecdf.band_high[i])])
        .collect();
    write_table(w, &meta, &ECDF_HEADER, &rows)
}

pub fn read_ecdf_csv<R: Read>(r: R) -> Result<(Metadata, Ecdf)> {
    let table = read_table(r, &ECDF_HEADER)?;
    let col = |c: usize| (0..table.rows.len()).map(|k| table.column::<f64>(k, c, ECDF_HEADER[c])).collect::<Result<Vec<_>>>();
    let ecdf = Ecdf {
        values: col(0)?,
        cumulative: col(1)?,
        band_low: col(2)?,
        band_high: col(3)?,
        half_width: table.metadata.extra_f64("band_half_width")?,
        confidence: table.metadata.extra_f64("band_confidence")?,
    };
    Ok((table.metadata, ecdf))
}

// ---- Matrices ---------------------------------------------------------------

/// Real matrix (e.g. a Pauli transfer matrix), one CSV row per matrix row.
pub fn write_real_matrix_csv<W: Write>(w: W, metadata: &Metadata, m: &DMatrix<f64>) -> Result<()> {
    let header: Vec<String> = (0..m.ncols()).map(|j| format!("c{j}")).collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows: Vec<Vec<String>> = (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| num(m[(i, j)])).collect()).collect();
    write_table(w, metadata, &header, &rows)
}

pub fn read_real_matrix_csv<R: Read>(r: R, cols: usize) -> Result<(Metadata, DMatrix<f64>)> {
    let header: Vec<String> = (0..cols).map(|j| format!("c{j}")).collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let table = read_table(r, &header)?;
    let mut m = DMatrix::zeros(table.rows.len(), cols);
    for i in 0..table.rows.len() {
        for j in 0..cols {
            m[(i, j)] = table.column(i, j, header[j])?;
        }
    }
    Ok((table.metadata, m))
}

/// Complex matrix, one CSV row per matrix row, as (re, im) column pairs.
pub fn write_complex_matrix_csv<W: Write>(w: W, metadata: &Metadata, m: &CMatrix) -> Result<()> {
    let header: Vec<String> = (0..m.ncols()).flat_map(|j| [format!("re{j}"), format!("im{j}")]).collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows: Vec<Vec<String>> = (0..m.nrows())
        .map(|i| (0..m.ncols()).flat_map(|j| [num(m[(i, j)].re), num(m[(i, j)].im)]).collect())
        .collect();
    write_table(w, metadata, &header, &rows)
}

pub fn read_complex_matrix_csv<R: Read>(r: R, cols: usize) -> Result<(Metadata, CMatrix)> {
    let header: Vec<String> = (0..cols).flat_map(|j| [format!("re{j}"), format!("im{j}")]).collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let table = read_table(r, &header)?;
    let mut m = CMatrix::zeros(table.rows.len(), cols);
    for i in 0..table.rows.len() {
        for j in 0..cols {
            let re: f64 = table.column(i, 2 * j, header[2 * j])?;
            let im: f64 = table.column(i, 2 * j + 1, header[2 * j + 1])?;
            m[(i, j)] = num_complex::Complex64::new(re, im);
        }
    }
    Ok((table.metadata, m))
}

pub fn write_superoperator_csv<W: Write>(w: W, metadata: &Metadata, s: &Superoperator) -> Result<()> {
    write_complex_matrix_csv(w, &metadata.clone().with("dim", s.dim), &s.matrix)
}

pub fn read_superoperator_csv<R: Read>(mut r: R) -> Result<(Metadata, Superoperator)> {
    let mut text = String::new();
    r.read_to_string(&mut text)?;
    let cols = text
        .lines()
        .find(|l| !l.starts_with('#'))
        .map_or(0, |h| h.split(',').count() / 2);
    let (meta, m) = read_complex_matrix_csv(text.as_bytes(), cols)?;
    let dim = meta.extra_f64("dim")? as usize;
    Ok((meta, Superoperator::new(dim, m)?))
}

// ---- Detuning curve ---------------------------------------------------------

/// Time-averaged frequency shift versus modulation amplitude, with the
/// located sweet spot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftCurve {
    pub epsilon: Vec<f64>,
    pub shift_mhz: Vec<f64>,
    pub sweet_spot: f64,
}

const SHIFT_HEADER: [&str; 2] = ["epsilon", "shift_mhz"];

pub fn write_shift_csv<W: Write>(w: W, metadata: &Metadata, curve: &ShiftCurve) -> Result<()> {
    let meta = metadata.clone().with("sweet_spot_epsilon", curve.sweet_spot);
    let rows: Vec<Vec<String>> = curve.epsilon.iter().zip(&curve.shift_mhz).map(|(e, s)| vec![num(*e), num(*s)]).collect();
    write_table(w, &meta, &SHIFT_HEADER, &rows)
}

pub fn read_shift_csv<R: Read>(r: R) -> Result<(Metadata, ShiftCurve)> {
    let table = read_table(r, &SHIFT_HEADER)?;
    let col = |c: usize| (0..table.rows.len()).map(|k| table.column::<f64>(k, c, SHIFT_HEADER[c])).collect::<Result<Vec<_>>>();
    let curve = ShiftCurve { epsilon: col(0)?, shift_mhz: col(1)?, sweet_spot: table.metadata.extra_f64("sweet_spot_epsilon")? };
    Ok((table.metadata, curve))
}

// ---- Coherence sweep --------------------------------------------------------

/// Fitted T1 and T2* (µs) with 95% intervals at one modulation amplitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoherenceRow {
    pub epsilon: f64,
    pub t1: f64,
    pub t1_ci_low: f64,
    pub t1_ci_high: f64,
    pub t2_star: f64,
    pub t2_star_ci_low: f64,
    pub t2_star_ci_high: f64,
}

impl From<&CoherencePoint> for CoherenceRow {
    fn from(p: &CoherencePoint) -> Self {
        Self {
            epsilon: p.epsilon,
            t1: p.t1.value,
            t1_ci_low: p.t1.ci_low,
            t1_ci_high: p.t1.ci_high,
            t2_star: p.t2_star.value,
            t2_star_ci_low: p.t2_star.ci_low,
            t2_star_ci_high: p.t2_star.ci_high,
        }
    }
}

const COHERENCE_HEADER: [&str; 7] = ["epsilon", "t1", "t1_ci_low", "t1_ci_high", "t2_star", "t2_star_ci_low", "t2_star_ci_high"];

pub fn write_coherence_csv<W: Write>(w: W, metadata: &Metadata, rows: &[CoherenceRow]) -> Result<()> {
    let rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| [r.epsilon, r.t1, r.t1_ci_low, r.t1_ci_high, r.t2_star, r.t2_star_ci_low, r.t2_star_ci_high].map(num).to_vec())
        .collect();
    write_table(w, metadata, &COHERENCE_HEADER, &rows)
}

pub fn read_coherence_csv<R: Read>(r: R) -> Result<(Metadata, Vec<CoherenceRow>)> {
    let table = read_table(r, &COHERENCE_HEADER)?;
    let rows = (0..table.rows.len())
        .map(|k| {
            let c = |i: usize| table.column::<f64>(k, i, COHERENCE_HEADER[i]);
            Ok(CoherenceRow {
                epsilon: c(0)?,
                t1: c(1)?,
                t1_ci_low: c(2)?,
                t1_ci_high: c(3)?,
                t2_star: c(4)?,
                t2_star_ci_low: c(5)?,
                t2_star_ci_high: c(6)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok((table.metadata, rows))
}

// ---- Waveforms --------------------------------------------------------------

const WAVEFORM_HEADER: [&str; 2] = ["time_ns", "flux"];

pub fn write_waveform_csv<W: Write>(w: W, metadata: &Metadata, wf: &Waveform) -> Result<()> {
    let meta = metadata.clone().with("sample_rate", wf.sample_rate);
    let rows: Vec<Vec<String>> = wf.times().zip(&wf.samples).map(|(t, x)| vec![num(t), num(*x)]).collect();
    write_table(w, &meta, &WAVEFORM_HEADER, &rows)
}

pub fn read_waveform_csv<R: Read>(r: R) -> Result<(Metadata, Waveform)> {
    let table = read_table(r, &WAVEFORM_HEADER)?;
    let samples = (0..table.rows.len()).map(|k| table.column::<f64>(k, 1, "flux")).collect::<Result<_>>()?;
    let sample_rate = table.metadata.extra_f64("sample_rate")?;
    Ok((table.metadata, Waveform { sample_rate, samples }))
}
