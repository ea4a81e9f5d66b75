//! Point-cloud text formats and model checkpoints.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use gsda_core::model::Classifier;
use gsda_core::{Point, PointCloud};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CloudFormat {
    /// One `x y z` triple per line.
    Xyz,
    /// ASCII OFF; faces are ignored.
    Off,
    /// ASCII PLY with `x`, `y`, `z` vertex properties.
    PlyAscii,
}

impl CloudFormat {
    /// Guesses the format from a file extension.
    pub fn from_path(path: &Path) -> Result<Self> {
        let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase();
        match ext.as_str() {
            "xyz" | "txt" => Ok(CloudFormat::Xyz),
            "off" => Ok(CloudFormat::Off),
            "ply" => Ok(CloudFormat::PlyAscii),
            _ => Err(Error::Validation(format!("{}: unknown point cloud extension", path.display()))),
        }
    }
}

impl FromStr for CloudFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "xyz" => Ok(CloudFormat::Xyz),
            "off" => Ok(CloudFormat::Off),
            "ply" | "ply-ascii" => Ok(CloudFormat::PlyAscii),
            other => Err(format!("unknown format '{other}' (expected xyz, off or ply-ascii)")),
        }
    }
}

pub fn load_point_cloud(path: &Path, format: CloudFormat) -> Result<PointCloud> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let points = match format {
        CloudFormat::Xyz => parse_xyz(&text, path)?,
        CloudFormat::Off => parse_off(&text, path)?,
        CloudFormat::PlyAscii => parse_ply(&text, path)?,
    };
    if points.is_empty() {
        return Err(Error::EmptyCloud(path.to_path_buf()));
    }
    let mut cloud = PointCloud::new(points)?;
    if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
        cloud = cloud.with_name(stem);
    }
    Ok(cloud)
}

/// Loads with the format implied by the extension.
pub fn load_any(path: &Path) -> Result<PointCloud> {
    load_point_cloud(path, CloudFormat::from_path(path)?)
}

pub fn save_point_cloud(cloud: &PointCloud, path: &Path, format: CloudFormat) -> Result<()> {
    let pts = cloud.points();
    let mut out = String::with_capacity(pts.len() * 48);
    match format {
        CloudFormat::Xyz => {}
        CloudFormat::Off => {
            let _ = writeln!(out, "OFF\n{} 0 0", pts.len());
        }
        CloudFormat::PlyAscii => {
            let _ = write!(
                out,
                "ply\nformat ascii 1.0\nelement vertex {}\nproperty double x\nproperty double y\nproperty double z\nend_header\n",
                pts.len()
            );
        }
    }
    for p in pts {
        let _ = writeln!(out, "{} {} {}", fmt_coord(p[0]), fmt_coord(p[1]), fmt_coord(p[2]));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Fixed notation with at least 12 significant digits.
pub fn fmt_coord(v: f64) -> String {
    let decimals = if v == 0.0 { 12 } else { (11 - v.abs().log10().floor() as i64).clamp(12, 40) as usize };
    format!("{v:.decimals$}")
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse { path: path.to_path_buf(), line, message: message.into() }
}

/// Non-empty, non-comment lines with 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_point(fields: &[&str], path: &Path, line: usize) -> Result<Point> {
    let mut p = [0.0; 3];
    for (k, f) in fields.iter().take(3).enumerate() {
        let v: f64 = f.parse().map_err(|_| parse_err(path, line, format!("'{f}' is not a number")))?;
        if !v.is_finite() {
            return Err(parse_err(path, line, format!("non-finite coordinate '{f}'")));
        }
        p[k] = v;
    }
    Ok(p)
}

fn parse_xyz(text: &str, path: &Path) -> Result<Vec<Point>> {
    content_lines(text)
        .map(|(line, l)| {
            let fields: Vec<&str> = l.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(parse_err(path, line, format!("expected 3 values, found {}", fields.len())));
            }
            parse_point(&fields, path, line)
        })
        .collect()
}

fn parse_count(tok: Option<&str>, path: &Path, line: usize, what: &str) -> Result<usize> {
    tok.and_then(|t| t.parse().ok()).ok_or_else(|| parse_err(path, line, format!("missing or invalid {what}")))
}

fn parse_off(text: &str, path: &Path) -> Result<Vec<Point>> {
    let mut lines = content_lines(text);
    let (line, header) = lines.next().ok_or_else(|| parse_err(path, 1, "empty file"))?;
    if !header.starts_with("OFF") {
        return Err(parse_err(path, line, "missing OFF header"));
    }
    // Some writers put the counts on the header line.
    let rest = header[3..].trim();
    let (line, counts) = if rest.is_empty() {
        lines.next().ok_or_else(|| parse_err(path, line, "missing counts line"))?
    } else {
        (line, rest)
    };
    let n = parse_count(counts.split_whitespace().next(), path, line, "vertex count")?;
    let mut pts = Vec::with_capacity(n);
    for _ in 0..n {
        let (line, l) = lines.next().ok_or_else(|| parse_err(path, line, format!("expected {n} vertices")))?;
        let fields: Vec<&str> = l.split_whitespace().collect();
        if fields.len() < 3 {
            return Err(parse_err(path, line, "vertex needs 3 coordinates"));
        }
        pts.push(parse_point(&fields, path, line)?);
    }
    Ok(pts)
}

struct PlyElement<'a> {
    name: &'a str,
    count: usize,
    properties: Vec<&'a str>,
}

fn parse_ply(text: &str, path: &Path) -> Result<Vec<Point>> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    match lines.next() {
        Some((_, "ply")) => {}
        _ => return Err(parse_err(path, 1, "missing 'ply' magic")),
    }
    let mut elements: Vec<PlyElement> = Vec::new();
    let mut last_line = 1;
    loop {
        let (line, l) = lines.next().ok_or_else(|| parse_err(path, last_line, "missing end_header"))?;
        last_line = line;
        let tokens: Vec<&str> = l.split_whitespace().collect();
        match tokens.as_slice() {
            ["end_header"] => break,
            ["format", fmt, ..] => {
                if *fmt != "ascii" {
                    return Err(parse_err(path, line, format!("unsupported PLY format '{fmt}'")));
                }
            }
            ["element", name, count] => {
                let count = parse_count(Some(count), path, line, "element count")?;
                elements.push(PlyElement { name, count, properties: Vec::new() });
            }
            ["property", "list", ..] => {
                let el = elements.last_mut().ok_or_else(|| parse_err(path, line, "property before element"))?;
                el.properties.push("list");
            }
            ["property", _ty, name] => {
                let el = elements.last_mut().ok_or_else(|| parse_err(path, line, "property before element"))?;
                el.properties.push(name);
            }
            ["comment", ..] | ["obj_info", ..] | [] => {}
            _ => return Err(parse_err(path, line, format!("unrecognised header line '{l}'"))),
        }
    }
    let mut pts = Vec::new();
    for el in &elements {
        if el.name != "vertex" {
            for _ in 0..el.count {
                lines.next().ok_or_else(|| parse_err(path, last_line, "truncated body"))?;
            }
            continue;
        }
        let pos = |axis: &str| {
            el.properties.iter().position(|p| *p == axis).ok_or_else(|| parse_err(path, last_line, format!("vertex lacks '{axis}'")))
        };
        let idx = [pos("x")?, pos("y")?, pos("z")?];
        for _ in 0..el.count {
            let (line, l) = lines.next().ok_or_else(|| parse_err(path, last_line, "truncated vertex list"))?;
            last_line = line;
            let fields: Vec<&str> = l.split_whitespace().collect();
            if fields.len() < el.properties.len() {
                return Err(parse_err(path, line, "too few vertex values"));
            }
            pts.push(parse_point(&[fields[idx[0]], fields[idx[1]], fields[idx[2]]], path, line)?);
        }
        return Ok(pts);
    }
    Err(parse_err(path, last_line, "no vertex element"))
}

pub fn save_model(model: &Classifier, path: &Path) -> Result<()> {
    fs::write(path, model.to_bytes()).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<Classifier> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Classifier::from_bytes(&bytes).map_err(|source| Error::ModelLoad { path: path.to_path_buf(), source })
}

/// Writes `value` as pretty JSON followed by a newline.
pub fn write_json<T: serde::Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| Error::Json { path: path.to_path_buf(), source })?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| Error::Json { path: path.to_path_buf(), source })
}

pub(crate) fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}
