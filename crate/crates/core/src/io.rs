//! File formats.
//!
//! Images, sinograms and dictionaries are stored as a raw little-endian
//! `f32` raster plus a sidecar text header `<raster>.hdr` of `key=value`
//! lines:
//!
//! ```text
//! kind=image            kind=sinogram            kind=dictionary
//! width=121             n_views=69               n=64
//! height=121            n_bins=172               k=256
//! pixel_size=0.5        bin_spacing=0.5
//!                       mode=ES
//!                       tilt_min=-72.6
//!                       tilt_max=72.6
//!                       angles=-72.6,-70.3,...
//! ```
//!
//! Sinograms are view-major; dictionaries are row-major N×K (atom k is
//! column k). Angle files hold one angle per line with nine significant
//! digits, preceded by a `#` comment line carrying the mode and range.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{de::DeserializeOwned, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ea_angles, AcquisitionMode, AngleSet};
use crate::phantom::AtomSpec;
use crate::projector::{Detector, GridSpec, ImageGrid, Sinogram};
use crate::sparse::Dictionary;

fn format_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

/// Sidecar header path for a raster: `image.f32` -> `image.f32.hdr`.
pub fn header_path(raster: &Path) -> PathBuf {
    let mut s = raster.as_os_str().to_owned();
    s.push(".hdr");
    PathBuf::from(s)
}

fn write_raster(path: &Path, values: impl Iterator<Item = f64>) -> Result<()> {
    let mut bytes = Vec::new();
    for v in values {
        bytes.extend_from_slice(&(v as f32).to_le_bytes());
    }
    fs::write(path, bytes)?;
    Ok(())
}

fn read_raster(path: &Path, expected: usize) -> Result<Vec<f64>> {
    let bytes = fs::read(path)?;
    if bytes.len() != expected * 4 {
        return Err(format_err(
            path,
            format!("expected {} bytes of f32 data, found {}", expected * 4, bytes.len()),
        ));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect())
}

type Header = BTreeMap<String, String>;

fn write_header(path: &Path, entries: &[(&str, String)]) -> Result<()> {
    let mut text = String::new();
    for (k, v) in entries {
        let _ = writeln!(text, "{k}={v}");
    }
    fs::write(header_path(path), text)?;
    Ok(())
}

/// Parses `key=value` lines; blank lines and `#` comments are skipped.
pub fn parse_key_values(text: &str, path: &Path) -> Result<Header> {
    let mut map = Header::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| format_err(path, format!("line {}: expected key=value", n + 1)))?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

fn read_header(raster: &Path, kind: &str) -> Result<Header> {
    let hp = header_path(raster);
    let text = fs::read_to_string(&hp)?;
    let map = parse_key_values(&text, &hp)?;
    match map.get("kind") {
        Some(k) if k == kind => Ok(map),
        other => Err(format_err(&hp, format!("expected kind={kind}, found {other:?}"))),
    }
}

fn field<T: std::str::FromStr>(map: &Header, key: &str, path: &Path) -> Result<T> {
    let raw = map
        .get(key)
        .ok_or_else(|| format_err(path, format!("missing header field {key}")))?;
    raw.parse()
        .map_err(|_| format_err(path, format!("bad value for {key}: {raw:?}")))
}

pub fn write_image(path: &Path, image: &ImageGrid) -> Result<()> {
    let g = image.spec();
    write_header(
        path,
        &[
            ("kind", "image".into()),
            ("width", g.width.to_string()),
            ("height", g.height.to_string()),
            ("pixel_size", g.pixel_size.to_string()),
        ],
    )?;
    write_raster(path, image.values().iter().copied())
}

pub fn read_image(path: &Path) -> Result<ImageGrid> {
    let h = read_header(path, "image")?;
    let grid = GridSpec::new(field(&h, "width", path)?, field(&h, "height", path)?, field(&h, "pixel_size", path)?)?;
    let values = read_raster(path, grid.len())?;
    ImageGrid::from_vec(grid, values)
}

pub fn write_sinogram(path: &Path, sino: &Sinogram) -> Result<()> {
    let a = sino.angles();
    let angles: Vec<String> = a.angles().iter().map(|v| v.to_string()).collect();
    write_header(
        path,
        &[
            ("kind", "sinogram".into()),
            ("n_views", sino.n_views().to_string()),
            ("n_bins", sino.n_bins().to_string()),
            ("bin_spacing", sino.detector().bin_spacing.to_string()),
            ("mode", a.mode().to_string()),
            ("tilt_min", a.tilt_min().to_string()),
            ("tilt_max", a.tilt_max().to_string()),
            ("angles", angles.join(",")),
        ],
    )?;
    write_raster(path, sino.values().iter().copied())
}

pub fn read_sinogram(path: &Path) -> Result<Sinogram> {
    let h = read_header(path, "sinogram")?;
    let n_views: usize = field(&h, "n_views", path)?;
    let det = Detector::new(field(&h, "n_bins", path)?, field(&h, "bin_spacing", path)?)?;
    let mode: AcquisitionMode = field::<String>(&h, "mode", path)?.parse()?;
    let raw: String = field(&h, "angles", path)?;
    let angles = raw
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.trim().parse::<f64>().map_err(|_| format_err(path, format!("bad angle {s:?}"))))
        .collect::<Result<Vec<f64>>>()?;
    if angles.len() != n_views {
        return Err(format_err(path, "angle list length differs from n_views"));
    }
    let set = AngleSet::new(angles, mode, field(&h, "tilt_min", path)?, field(&h, "tilt_max", path)?)?;
    let values = read_raster(path, n_views * det.n_bins)?;
    Sinogram::from_vec(set, det, values)
}

/// Dictionary as a row-major N×K raster.
pub fn write_dictionary(path: &Path, dict: &Dictionary) -> Result<()> {
    let (n, k) = (dict.dim(), dict.n_atoms());
    write_header(path, &[("kind", "dictionary".into()), ("n", n.to_string()), ("k", k.to_string())])?;
    write_raster(path, (0..n * k).map(|i| dict.atom(i % k)[i / k]))
}

/// Reads a dictionary raster; columns are renormalised after the f32 round trip.
pub fn read_dictionary(path: &Path) -> Result<Dictionary> {
    let h = read_header(path, "dictionary")?;
    let n: usize = field(&h, "n", path)?;
    let k: usize = field(&h, "k", path)?;
    let raw = read_raster(path, n * k)?;
    let mut cols = vec![0.0; n * k];
    for (i, v) in raw.into_iter().enumerate() {
        cols[(i % k) * n + i / k] = v;
    }
    Dictionary::normalized(n, cols)
}

/// Decimal rendering with `digits` significant digits.
pub fn format_significant(x: f64, digits: usize) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{:.*}", digits.saturating_sub(1), x);
    }
    let magnitude = x.abs().log10().floor() as i64;
    let decimals = (digits as i64 - 1 - magnitude).max(0) as usize;
    let s = format!("{x:.decimals$}");
    // rounding can carry into a new digit (9.9999 -> 10.000)
    let rounded: f64 = s.parse().unwrap_or(x);
    if rounded != 0.0 && (rounded.abs().log10().floor() as i64) > magnitude && decimals > 0 {
        format!("{x:.*}", decimals - 1)
    } else {
        s
    }
}

pub fn format_angles(set: &AngleSet) -> String {
    let mut out = format!(
        "# mode={} tilt_min={} tilt_max={} n={}\n",
        set.mode(),
        set.tilt_min(),
        set.tilt_max(),
        set.len()
    );
    for &a in set.angles() {
        out.push_str(&format_significant(a, 9));
        out.push('\n');
    }
    out
}

pub fn write_angles(path: &Path, set: &AngleSet) -> Result<()> {
    fs::write(path, format_angles(set))?;
    Ok(())
}

/// Reads an angle file. Without a comment header the set is taken as
/// equally sloped over its own extent. Equally-angled sets are regenerated
/// exactly after checking the file values against them.
pub fn read_angles(path: &Path) -> Result<AngleSet> {
    let text = fs::read_to_string(path)?;
    let mut meta = Header::new();
    let mut values = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if let Some(rest) = line.strip_prefix('#') {
            for tok in rest.split_whitespace() {
                if let Some((k, v)) = tok.split_once('=') {
                    meta.insert(k.to_string(), v.to_string());
                }
            }
        } else if !line.is_empty() {
            values.push(line.parse::<f64>().map_err(|_| format_err(path, format!("bad angle {line:?}")))?);
        }
    }
    let mode: AcquisitionMode = match meta.get("mode") {
        Some(m) => m.parse()?,
        None => AcquisitionMode::EquallySloped,
    };
    let lo = match meta.get("tilt_min") {
        Some(_) => field(&meta, "tilt_min", path)?,
        None => values.first().copied().ok_or_else(|| format_err(path, "no angles"))?,
    };
    let hi = match meta.get("tilt_max") {
        Some(_) => field(&meta, "tilt_max", path)?,
        None => values.last().copied().ok_or_else(|| format_err(path, "no angles"))?,
    };
    if mode == AcquisitionMode::EquallyAngled {
        let exact = ea_angles(values.len(), lo, hi)?;
        let close = exact
            .angles()
            .iter()
            .zip(&values)
            .all(|(a, b)| (a - b).abs() <= 1e-6 * a.abs().max(1.0));
        if !close {
            return Err(format_err(path, "angles are not equally spaced over the stated range"));
        }
        return Ok(exact);
    }
    AngleSet::new(values, mode, lo, hi)
}

/// Atom list, one `x y amplitude sigma` per line; `#` starts a comment.
pub fn read_atom_spec(path: &Path) -> Result<Vec<AtomSpec>> {
    let text = fs::read_to_string(path)?;
    let mut atoms = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let nums = line
            .split_whitespace()
            .map(str::parse::<f64>)
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| format_err(path, format!("line {}: expected numbers", n + 1)))?;
        let [x, y, amplitude, sigma] = nums[..] else {
            return Err(format_err(path, format!("line {}: expected 4 fields, got {}", n + 1, nums.len())));
        };
        atoms.push(AtomSpec::new(x, y, amplitude, sigma));
    }
    Ok(atoms)
}

pub fn write_atom_spec(path: &Path, atoms: &[AtomSpec]) -> Result<()> {
    let mut out = String::from("# x y amplitude sigma\n");
    for a in atoms {
        let _ = writeln!(out, "{} {} {} {}", a.x, a.y, a.amplitude, a.sigma);
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path)?;
    let rows = r.deserialize().collect::<std::result::Result<Vec<T>, _>>()?;
    Ok(rows)
}

/// 8-bit binary PGM of `image`, values clipped to `[lo, hi]`.
pub fn write_pgm(path: &Path, image: &ImageGrid, lo: f64, hi: f64) -> Result<()> {
    let mut bytes = format!("P5\n{} {}\n255\n", image.width(), image.height()).into_bytes();
    let span = if hi > lo { hi - lo } else { 1.0 };
    bytes.extend(image.values().iter().map(|&v| (((v - lo) / span).clamp(0.0, 1.0) * 255.0).round() as u8));
    fs::write(path, bytes)?;
    Ok(())
}

/// Atom mosaic: √N×√N tiles on a ⌈√K⌉-wide grid with one-pixel gaps, each
/// tile stretched to its own range.
pub fn dictionary_mosaic(dict: &Dictionary) -> ImageGrid {
    let edge = (dict.dim() as f64).sqrt().round() as usize;
    let k = dict.n_atoms();
    let per_row = (k as f64).sqrt().ceil() as usize;
    let tile_rows = k.div_ceil(per_row);
    let w = per_row * (edge + 1) + 1;
    let h = tile_rows * (edge + 1) + 1;
    let grid = GridSpec::new(w, h, 1.0).expect("non-empty mosaic");
    let mut img = ImageGrid::zeros(grid);
    for a in 0..k {
        let atom = dict.atom(a);
        let lo = atom.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = atom.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let span = if hi > lo { hi - lo } else { 1.0 };
        let (tr, tc) = (a / per_row, a % per_row);
        for i in 0..edge.min(atom.len() / edge.max(1)) {
            for j in 0..edge {
                let v = (atom[i * edge + j] - lo) / span;
                img.set(1 + tr * (edge + 1) + i, 1 + tc * (edge + 1) + j, v);
            }
        }
    }
    img
}
