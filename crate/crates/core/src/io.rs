//! Text persistence. Every CSV starts with `#` comment lines (at least the
//! config hash), then a header row, then data. Reals are written with 17
//! significant digits so identical runs give identical bytes.

use std::collections::BTreeMap;

use nalgebra::DMatrix;

use crate::dictionary::Dictionary;
use crate::edmd::{KoopmanMatrix, Provenance, ReferenceMethod, Solver};
use crate::error::{Error, Result};
use crate::experiments::{AccuracyRecord, DictSpec, ExponentTable, PowerLawFit};
use crate::generator::GeneratorMatrix;
use crate::mori_zwanzig::GleSolution;
use crate::polynomial::MultiIndex;
use crate::simulate::{SnapshotPairs, TrajectoryDataset};

pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Comment block preceding a CSV table.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CsvHeader {
    pub entries: Vec<(String, String)>,
    /// Comment lines that are not `key=value`, in order.
    pub lines: Vec<String>,
}

impl CsvHeader {
    pub fn new(config_hash: &str) -> Self {
        let mut h = CsvHeader::default();
        h.push("config_hash", config_hash);
        h
    }

    pub fn push(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.entries.push((key.to_string(), value.to_string()));
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    fn require(&self, key: &str) -> Result<&str> {
        self.get(key).ok_or_else(|| Error::Parse {
            line: 0,
            message: format!("missing header entry {key:?}"),
        })
    }

    fn render(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.entries {
            s.push_str(&format!("# {k}={v}\n"));
        }
        for l in &self.lines {
            s.push_str(&format!("# {l}\n"));
        }
        s
    }
}

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    Error::Parse { line, message: e.to_string() }
}

/// Renders a comment header plus a table.
pub fn render_table(header: &CsvHeader, columns: &[String], rows: &[Vec<String>]) -> Result<String> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(columns).map_err(csv_err)?;
    for r in rows {
        w.write_record(r).map_err(csv_err)?;
    }
    let body = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    let body = String::from_utf8(body).map_err(|e| Error::Io(e.to_string()))?;
    Ok(header.render() + &body)
}

/// Splits text into its comment header, column names and data rows.
pub fn parse_table(text: &str) -> Result<(CsvHeader, Vec<String>, Vec<Vec<String>>)> {
    let mut header = CsvHeader::default();
    let mut body_start = 0;
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        let t = line.trim_end();
        if let Some(c) = t.strip_prefix('#') {
            let c = c.trim_start();
            match c.split_once('=') {
                Some((k, v)) if !k.contains(' ') => header.entries.push((k.to_string(), v.to_string())),
                _ => header.lines.push(c.to_string()),
            }
            offset += line.len();
            body_start = offset;
        } else {
            break;
        }
    }
    let comment_lines = text[..body_start].lines().count();
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(text[body_start..].as_bytes());
    let columns = r
        .headers()
        .map_err(csv_err)?
        .iter()
        .map(str::to_string)
        .collect::<Vec<_>>();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize) + comment_lines;
            Error::Parse { line, message: e.to_string() }
        })?;
        rows.push(rec.iter().map(str::to_string).collect());
    }
    Ok((header, columns, rows))
}

fn parse_f64(s: &str, line: usize) -> Result<f64> {
    s.trim().parse().map_err(|_| Error::Parse {
        line,
        message: format!("not a number: {s:?}"),
    })
}

fn parse_usize(s: &str, line: usize) -> Result<usize> {
    s.trim().parse().map_err(|_| Error::Parse {
        line,
        message: format!("not a non-negative integer: {s:?}"),
    })
}

/// `time, traj_id, x_1..x_D`.
pub fn trajectories_csv(ds: &TrajectoryDataset<f64>, config_hash: &str) -> Result<String> {
    let mut h = CsvHeader::new(config_hash);
    h.push("system", &ds.system_name).push("sigma", num(ds.sigma)).push("dt_obs", num(ds.dt_obs));
    let mut cols = vec!["time".to_string(), "traj_id".to_string()];
    cols.extend((1..=ds.dim()).map(|d| format!("x_{d}")));
    let mut rows = Vec::new();
    for (t, traj) in ds.trajectories.iter().enumerate() {
        for k in 0..traj.nrows() {
            let mut r = vec![num(ds.time_of_row(k)), t.to_string()];
            r.extend(traj.row(k).iter().map(|&v| num(v)));
            rows.push(r);
        }
    }
    render_table(&h, &cols, &rows)
}

pub fn read_trajectories_csv(text: &str) -> Result<TrajectoryDataset<f64>> {
    let (h, cols, rows) = parse_table(text)?;
    let d = cols.len().checked_sub(2).filter(|&d| d > 0).ok_or(Error::Parse {
        line: 0,
        message: "expected columns time, traj_id, x_1..".into(),
    })?;
    let mut per: BTreeMap<usize, Vec<Vec<f64>>> = BTreeMap::new();
    let mut t_start = None;
    for (i, r) in rows.iter().enumerate() {
        let id = parse_usize(&r[1], i + 2)?;
        if t_start.is_none() {
            t_start = Some(parse_f64(&r[0], i + 2)?);
        }
        let v = r[2..].iter().map(|s| parse_f64(s, i + 2)).collect::<Result<Vec<_>>>()?;
        per.entry(id).or_default().push(v);
    }
    let trajectories = per
        .into_values()
        .map(|rows| DMatrix::from_fn(rows.len(), d, |i, j| rows[i][j]))
        .collect();
    Ok(TrajectoryDataset {
        system_name: h.require("system")?.to_string(),
        sigma: parse_f64(h.require("sigma")?, 0)?,
        dt_obs: parse_f64(h.require("dt_obs")?, 0)?,
        t_start: t_start.unwrap_or(0.0),
        trajectories,
    })
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<String>> {
    (0..m.nrows()).map(|i| m.row(i).iter().map(|&v| num(v)).collect()).collect()
}

/// Paired `(X, Y)` files with identical layout.
pub fn pairs_csv(pairs: &SnapshotPairs<f64>, config_hash: &str, var: &str) -> Result<(String, String)> {
    let mut h = CsvHeader::new(config_hash);
    h.push("dt_obs", num(pairs.dt_obs)).push("data_hash", pairs.data_hash());
    let cols: Vec<String> = (1..=pairs.dim()).map(|d| format!("{var}_{d}")).collect();
    let mut hx = h.clone();
    hx.push("role", "x");
    let mut hy = h;
    hy.push("role", "y");
    Ok((
        render_table(&hx, &cols, &matrix_rows(&pairs.x))?,
        render_table(&hy, &cols, &matrix_rows(&pairs.y))?,
    ))
}

fn read_matrix_body(cols: &[String], rows: &[Vec<String>], skip: usize) -> Result<DMatrix<f64>> {
    let n = cols.len() - skip;
    let mut m = DMatrix::zeros(rows.len(), n);
    for (i, r) in rows.iter().enumerate() {
        if r.len() != cols.len() {
            return Err(Error::Parse {
                line: i + 2,
                message: format!("expected {} fields, found {}", cols.len(), r.len()),
            });
        }
        for j in 0..n {
            m[(i, j)] = parse_f64(&r[j + skip], i + 2)?;
        }
    }
    Ok(m)
}

pub fn read_pairs_csv(x_text: &str, y_text: &str) -> Result<SnapshotPairs<f64>> {
    let (hx, cx, rx) = parse_table(x_text)?;
    let (_, cy, ry) = parse_table(y_text)?;
    let x = read_matrix_body(&cx, &rx, 0)?;
    let y = read_matrix_body(&cy, &ry, 0)?;
    if x.shape() != y.shape() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            found: y.nrows(),
            context: "paired X/Y files",
        });
    }
    Ok(SnapshotPairs {
        x,
        y,
        dt_obs: parse_f64(hx.require("dt_obs")?, 0)?,
    })
}

fn manifest_from_header(h: &CsvHeader) -> Result<Dictionary> {
    let mut text = String::new();
    for l in &h.lines {
        if l.starts_with("dictionary ") {
            text.push_str(&format!("# {l}\n"));
        } else if let Some(rest) = l.strip_prefix("basis ") {
            text.push_str(rest);
            text.push('\n');
        }
    }
    Dictionary::from_manifest(&text)
}

fn square_csv(h: &CsvHeader, dict: &Dictionary, m: &DMatrix<f64>) -> Result<String> {
    let mut h = h.clone();
    let mut lines = Vec::new();
    for l in dict.to_manifest().lines() {
        if l.starts_with('#') {
            lines.push(l.trim_start_matches('#').trim().to_string());
        } else {
            lines.push(format!("basis {l}"));
        }
    }
    h.lines.extend(lines);
    let labels = dict.labels();
    let mut cols = vec!["row".to_string()];
    cols.extend(labels.iter().cloned());
    let rows: Vec<Vec<String>> = (0..m.nrows())
        .map(|i| {
            let mut r = vec![labels[i].clone()];
            r.extend(m.row(i).iter().map(|&v| num(v)));
            r
        })
        .collect();
    render_table(&h, &cols, &rows)
}

/// Matrix + dictionary manifest + provenance in one file.
pub fn koopman_csv(k: &KoopmanMatrix<f64>, config_hash: &str) -> Result<String> {
    let mut h = CsvHeader::new(config_hash);
    h.push("dt_obs", num(k.dt_obs));
    match &k.provenance {
        Provenance::Estimated { ridge, solver, n_data, data_hash } => {
            h.push("provenance", "estimated")
                .push("ridge", num(*ridge))
                .push("solver", solver_name(*solver))
                .push("n_data", n_data)
                .push("data_hash", data_hash);
        }
        Provenance::Reference { method, system, sigma } => {
            h.push("provenance", "reference").push("system", system).push("sigma", num(*sigma));
            match method {
                ReferenceMethod::CrankNicolson { dt } => h.push("method", "crank_nicolson").push("dt", num(*dt)),
                ReferenceMethod::MatrixExponential => h.push("method", "matrix_exponential"),
            };
        }
    }
    square_csv(&h, &k.dict, &k.k)
}

fn solver_name(s: Solver) -> &'static str {
    match s {
        Solver::OrthogonalDecomposition => "orthogonal_decomposition",
        Solver::NormalEquations => "normal_equations",
    }
}

fn parse_solver(s: &str) -> Result<Solver> {
    match s {
        "orthogonal_decomposition" => Ok(Solver::OrthogonalDecomposition),
        "normal_equations" => Ok(Solver::NormalEquations),
        other => Err(Error::Parse {
            line: 0,
            message: format!("unknown solver {other:?}"),
        }),
    }
}

pub fn read_koopman_csv(text: &str) -> Result<KoopmanMatrix<f64>> {
    let (h, cols, rows) = parse_table(text)?;
    let dict = manifest_from_header(&h)?;
    let k = read_matrix_body(&cols, &rows, 1)?;
    if k.shape() != (dict.len(), dict.len()) {
        return Err(Error::DimensionMismatch {
            expected: dict.len(),
            found: k.nrows(),
            context: "matrix size vs dictionary manifest",
        });
    }
    let provenance = match h.require("provenance")? {
        "estimated" => Provenance::Estimated {
            ridge: parse_f64(h.require("ridge")?, 0)?,
            solver: parse_solver(h.require("solver")?)?,
            n_data: parse_usize(h.require("n_data")?, 0)?,
            data_hash: h.require("data_hash")?.to_string(),
        },
        "reference" => Provenance::Reference {
            method: match h.require("method")? {
                "crank_nicolson" => ReferenceMethod::CrankNicolson {
                    dt: parse_f64(h.require("dt")?, 0)?,
                },
                "matrix_exponential" => ReferenceMethod::MatrixExponential,
                other => {
                    return Err(Error::Parse {
                        line: 0,
                        message: format!("unknown reference method {other:?}"),
                    })
                }
            },
            system: h.require("system")?.to_string(),
            sigma: parse_f64(h.require("sigma")?, 0)?,
        },
        other => {
            return Err(Error::Parse {
                line: 0,
                message: format!("unknown provenance {other:?}"),
            })
        }
    };
    Ok(KoopmanMatrix {
        dict,
        dt_obs: parse_f64(h.require("dt_obs")?, 0)?,
        k,
        provenance,
    })
}

pub fn generator_csv(g: &GeneratorMatrix<f64>, config_hash: &str) -> Result<String> {
    let mut h = CsvHeader::new(config_hash);
    h.push("provenance", "generator").push("system", &g.system).push("sigma", num(g.sigma));
    square_csv(&h, &g.dict, &g.a)
}

/// Reads back `(dictionary, A, system, σ)`.
pub fn read_generator_csv(text: &str) -> Result<(Dictionary, DMatrix<f64>, String, f64)> {
    let (h, cols, rows) = parse_table(text)?;
    if h.get("provenance") != Some("generator") {
        return Err(Error::Parse {
            line: 0,
            message: "not a generator matrix file".into(),
        });
    }
    let dict = manifest_from_header(&h)?;
    let a = read_matrix_body(&cols, &rows, 1)?;
    Ok((dict, a, h.require("system")?.to_string(), parse_f64(h.require("sigma")?, 0)?))
}

/// `time`, then per observed label: `c_`, `markov_`, `memory_`, `noise_`.
pub fn gle_csv(sol: &GleSolution<f64>, labels: &[String], config_hash: &str) -> Result<String> {
    let h = CsvHeader::new(config_hash);
    let mut cols = vec!["time".to_string()];
    for prefix in ["c", "markov", "memory", "noise"] {
        cols.extend(labels.iter().map(|l| format!("{prefix}_{l}")));
    }
    let rows = (0..sol.len())
        .map(|n| {
            let mut r = vec![num(sol.times[n])];
            for part in [&sol.c_o, &sol.markov, &sol.memory, &sol.noise] {
                r.extend(part[n].iter().map(|&v| num(v)));
            }
            r
        })
        .collect::<Vec<_>>();
    render_table(&h, &cols, &rows)
}

const ACCURACY_COLUMNS: [&str; 11] = [
    "system",
    "params",
    "observed_dim",
    "statistic",
    "target",
    "m",
    "degree",
    "sigma",
    "error",
    "n_test",
    "seed",
];

fn params_field(p: &BTreeMap<String, f64>) -> String {
    p.iter().map(|(k, v)| format!("{k}={}", num(*v))).collect::<Vec<_>>().join(";")
}

fn exponents_field(m: &MultiIndex) -> String {
    m.exponents().iter().map(u32::to_string).collect::<Vec<_>>().join(" ")
}

fn statistic_label(m: &MultiIndex) -> String {
    format!("E[{}]", m.label("X"))
}

pub fn accuracy_csv(records: &[AccuracyRecord], config_hash: &str) -> Result<String> {
    let h = CsvHeader::new(config_hash);
    let cols: Vec<String> = ACCURACY_COLUMNS.iter().map(|s| s.to_string()).collect();
    let rows = records
        .iter()
        .map(|r| {
            vec![
                r.system.clone(),
                params_field(&r.params),
                r.observed_dim.to_string(),
                statistic_label(&r.statistic),
                exponents_field(&r.statistic),
                r.dictionary.m.to_string(),
                r.dictionary.degree.to_string(),
                num(r.sigma),
                num(r.error),
                r.n_test.to_string(),
                r.seed.to_string(),
            ]
        })
        .collect::<Vec<_>>();
    render_table(&h, &cols, &rows)
}

pub fn read_accuracy_csv(text: &str) -> Result<Vec<AccuracyRecord>> {
    let (_, cols, rows) = parse_table(text)?;
    if cols != ACCURACY_COLUMNS {
        return Err(Error::Parse {
            line: 0,
            message: format!("unexpected accuracy columns {cols:?}"),
        });
    }
    rows.iter()
        .enumerate()
        .map(|(i, r)| {
            let line = i + 2;
            let mut params = BTreeMap::new();
            for kv in r[1].split(';').filter(|s| !s.is_empty()) {
                let (k, v) = kv.split_once('=').ok_or(Error::Parse {
                    line,
                    message: format!("bad parameter {kv:?}"),
                })?;
                params.insert(k.to_string(), parse_f64(v, line)?);
            }
            let exps = r[4]
                .split_whitespace()
                .map(|e| {
                    e.parse::<u32>().map_err(|_| Error::Parse {
                        line,
                        message: format!("bad exponent {e:?}"),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(AccuracyRecord {
                system: r[0].clone(),
                params,
                observed_dim: parse_usize(&r[2], line)?,
                statistic: MultiIndex::new(exps),
                dictionary: DictSpec {
                    m: parse_usize(&r[5], line)?,
                    degree: parse_usize(&r[6], line)? as u32,
                },
                sigma: parse_f64(&r[7], line)?,
                error: parse_f64(&r[8], line)?,
                n_test: parse_usize(&r[9], line)?,
                seed: r[10].parse().map_err(|_| Error::Parse {
                    line,
                    message: format!("bad seed {:?}", r[10]),
                })?,
            })
        })
        .collect()
}

/// One row per `(variant, observed coordinate)`: α₁ mean and spread.
pub fn exponent_summary_csv(table: &ExponentTable, config_hash: &str) -> Result<String> {
    let mut h = CsvHeader::new(config_hash);
    h.push("table", table.table);
    let cols: Vec<String> = ["variant", "observed_dim", "statistic", "n_reps", "alpha1_mean", "alpha1_std"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let rows = table
        .rows
        .iter()
        .map(|r| {
            vec![
                r.variant.clone(),
                r.observed_dim.to_string(),
                format!("E[X{}]", r.observed_dim),
                r.fits.len().to_string(),
                num(r.alpha1_mean),
                num(r.alpha1_std),
            ]
        })
        .collect::<Vec<_>>();
    render_table(&h, &cols, &rows)
}

/// Every individual fit behind an exponent table.
pub fn exponent_fits_csv(table: &ExponentTable, seeds: &[u64], config_hash: &str) -> Result<String> {
    let mut h = CsvHeader::new(config_hash);
    h.push("table", table.table);
    let cols: Vec<String> = [
        "variant",
        "observed_dim",
        "seed",
        "alpha1",
        "alpha2",
        "alpha3",
        "residual_rms",
        "n_points",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let mut rows = Vec::new();
    for r in &table.rows {
        for (f, seed) in r.fits.iter().zip(seeds) {
            rows.push(vec![
                r.variant.clone(),
                r.observed_dim.to_string(),
                seed.to_string(),
                num(f.alpha1),
                num(f.alpha2),
                num(f.alpha3),
                num(f.residual_rms),
                f.n_points.to_string(),
            ]);
        }
    }
    render_table(&h, &cols, &rows)
}

/// Plot-ready rows: measured `(σ, error)` points and samples of the fitted
/// curve for each named series.
pub fn plot_csv(series: &[(String, Vec<(f64, f64)>, Option<PowerLawFit>)], samples: usize, config_hash: &str) -> Result<String> {
    let h = CsvHeader::new(config_hash);
    let cols: Vec<String> = ["series", "kind", "sigma", "value"].iter().map(|s| s.to_string()).collect();
    let mut rows = Vec::new();
    for (name, pts, fit) in series {
        for &(s, e) in pts {
            rows.push(vec![name.clone(), "data".into(), num(s), num(e)]);
        }
        if let Some(f) = fit {
            let lo = pts.iter().map(|p| p.0).filter(|&s| s > 0.0).fold(f64::INFINITY, f64::min);
            let hi = pts.iter().map(|p| p.0).fold(0.0, f64::max);
            if lo.is_finite() && hi > lo {
                for (s, v) in f.curve(lo, hi, samples) {
                    rows.push(vec![name.clone(), "fit".into(), num(s), num(v)]);
                }
            }
        }
    }
    render_table(&h, &cols, &rows)
}
