//! On-disk formats: model/checkpoint JSON, field and curve CSVs, PPM heatmaps.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::femref::PressureField;
use crate::ffnet::{FrequencyMode, NetworkParams};
use crate::metrics::ComparisonRow;
use crate::trainer::{checkpoint_path, EpochRecord};

pub const MODEL_FORMAT: &str = "lubsim-model";
pub const MODEL_VERSION: u32 = 1;

fn invalid(msg: impl Into<String>) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg.into())
}

/// Writes `bytes` to a sibling temp file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> io::Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(io::Error::other)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> io::Result<T> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    pub frequency_mode: FrequencyMode,
    pub params: NetworkParams,
}

impl ModelFile {
    pub fn new(params: NetworkParams, frequency_mode: FrequencyMode) -> Self {
        Self {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_VERSION,
            frequency_mode,
            params,
        }
    }
}

pub fn save_model(path: &Path, model: &ModelFile) -> io::Result<()> {
    write_json(path, model)
}

pub fn load_model(path: &Path) -> io::Result<ModelFile> {
    let model: ModelFile = read_json(path)?;
    if model.format != MODEL_FORMAT || model.version != MODEL_VERSION {
        return Err(invalid(format!(
            "unsupported model format {} v{}",
            model.format, model.version
        )));
    }
    model
        .params
        .validate()
        .map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    Ok(model)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub epoch: usize,
    pub params: NetworkParams,
}

/// Writes `ckpt_<epoch>.json` under `dir` and returns its path.
pub fn write_checkpoint(dir: &Path, epoch: usize, params: &NetworkParams) -> io::Result<PathBuf> {
    let path = checkpoint_path(dir, epoch);
    write_json(
        &path,
        &Checkpoint {
            epoch,
            params: params.clone(),
        },
    )?;
    Ok(path)
}

// Floats go through `{:?}`, which prints the shortest string that parses back
// to the same bits.

pub fn field_csv(field: &PressureField) -> String {
    let mut s = String::from("x,y,p\n");
    for j in 0..field.ny {
        for i in 0..field.nx {
            let _ = writeln!(s, "{:?},{:?},{:?}", field.x(i), field.y(j), field.get(i, j));
        }
    }
    s
}

/// Parses a `x,y,p` CSV written by [`field_csv`] (row-major, `y` outer).
pub fn parse_field_csv(text: &str) -> io::Result<PressureField> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("x,y,p") {
        return Err(invalid("field CSV must start with header x,y,p"));
    }
    let mut rows = Vec::new();
    for (k, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let cols: Vec<&str> = line.split(',').collect();
        let parse = |c: &str| {
            c.trim()
                .parse::<f64>()
                .map_err(|e| invalid(format!("line {}: {e}", k + 2)))
        };
        if cols.len() != 3 {
            return Err(invalid(format!("line {}: expected 3 columns", k + 2)));
        }
        rows.push((parse(cols[0])?, parse(cols[1])?, parse(cols[2])?));
    }
    let nx = rows.iter().take_while(|r| r.1 == rows[0].1).count();
    if nx < 2 || rows.len() % nx != 0 || rows.len() / nx < 2 {
        return Err(invalid("field CSV is not a rectangular grid"));
    }
    let ny = rows.len() / nx;
    let field = PressureField {
        nx,
        ny,
        values: rows.iter().map(|r| r.2).collect(),
    };
    for (k, r) in rows.iter().enumerate() {
        let (i, j) = (k % nx, k / nx);
        if (r.0 - field.x(i)).abs() > 1e-9 || (r.1 - field.y(j)).abs() > 1e-9 {
            return Err(invalid(format!("line {}: node off the uniform grid", k + 2)));
        }
    }
    Ok(field)
}

pub fn read_field_csv(path: &Path) -> io::Result<PressureField> {
    parse_field_csv(&fs::read_to_string(path)?)
        .map_err(|e| invalid(format!("{}: {e}", path.display())))
}

pub fn surface_csv(nodes: &[(f64, f64, f64)]) -> String {
    let mut s = String::from("x,y,h\n");
    for (x, y, h) in nodes {
        let _ = writeln!(s, "{x:?},{y:?},{h:?}");
    }
    s
}

pub fn loss_csv(history: &[EpochRecord]) -> String {
    let mut s = String::from("epoch,loss_total,loss_r,loss_bc,lr\n");
    for r in history {
        let _ = writeln!(
            s,
            "{},{:?},{:?},{:?},{:?}",
            r.epoch, r.loss_total, r.loss_r, r.loss_bc, r.lr
        );
    }
    s
}

pub fn comparison_csv(rows: &[ComparisonRow]) -> String {
    let mut s = String::from("metric,reference,candidate,rel_error_pct\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{:?},{:?},{:?}",
            r.metric, r.reference, r.candidate, r.rel_error_pct
        );
    }
    s
}

pub fn centerline_csv(rows: &[(f64, f64, f64)]) -> String {
    let mut s = String::from("x,p_ref,p_cand\n");
    for (x, r, c) in rows {
        let _ = writeln!(s, "{x:?},{r:?},{c:?}");
    }
    s
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeatmapRange {
    pub min: f64,
    pub max: f64,
}

/// ASCII PPM (P3), linear grayscale from min (black) to max (white). The top
/// image row is `Y = 1`.
pub fn heatmap_ppm(field: &PressureField) -> (String, HeatmapRange) {
    let min = field.values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = field.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = max - min;
    let mut s = format!("P3\n{} {}\n255\n", field.nx, field.ny);
    for j in (0..field.ny).rev() {
        let row: Vec<String> = (0..field.nx)
            .map(|i| {
                let t = if span > 0.0 { (field.get(i, j) - min) / span } else { 0.0 };
                let g = (t * 255.0).round() as u8;
                format!("{g} {g} {g}")
            })
            .collect();
        s.push_str(&row.join(" "));
        s.push('\n');
    }
    (s, HeatmapRange { min, max })
}

/// Writes `<stem>.ppm` and `<stem>.json` with the value range.
pub fn write_heatmap(dir: &Path, stem: &str, field: &PressureField) -> io::Result<HeatmapRange> {
    let (ppm, range) = heatmap_ppm(field);
    write_atomic(&dir.join(format!("{stem}.ppm")), ppm.as_bytes())?;
    write_json(&dir.join(format!("{stem}.json")), &range)?;
    Ok(range)
}
