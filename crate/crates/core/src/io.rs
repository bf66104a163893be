//! Text formats. Every file opens with a `#tag/version,key=value,...` line so
//! readers can reject foreign or newer files. Numbers are written with 17
//! significant digits, which round-trips every f64.
//!
//! | tag                   | body                                              |
//! |-----------------------|---------------------------------------------------|
//! | `star-field/1`        | `#boundary_rows=0|1`, then one Z row per line     |
//! | `star-image/1`        | one interior Z row per line                       |
//! | `star-ballistic/1`    | `y,projection` header, then one `y,P` per line    |
//! | `star-coefficients/1` | `n,q,re,im` header, then one coefficient per line |
//! | `star-scheme/1`       | one row of c_jk per line, comma or space separated|
//!
//! Graymaps are binary PGM (P5, maxval 255).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64 as C;

use crate::error::{Error, Result};
use crate::grid::{DataField, Grid, ImageGrid, PairwiseField};
use crate::phantom::Phantom;
use crate::spectral::CoefficientTable;

pub const FIELD_FORMAT: &str = "star-field/1";
pub const IMAGE_FORMAT: &str = "star-image/1";
pub const BALLISTIC_FORMAT: &str = "star-ballistic/1";
pub const COEFFICIENTS_FORMAT: &str = "star-coefficients/1";
pub const SCHEME_FORMAT: &str = "star-scheme/1";

/// Display window for graymaps, in units of μL.
pub const PGM_WINDOW: (f64, f64) = (-2.0, 6.0);

/// Largest grid accepted from a file, in samples per axis.
const MAX_AXIS: usize = 1 << 16;
const MAX_SAMPLES: usize = 1 << 26;

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn perr(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

struct Header {
    keys: BTreeMap<String, String>,
}

impl Header {
    fn parse(line: &str, lineno: usize, tag: &str) -> Result<Self> {
        let rest = line.strip_prefix('#').ok_or_else(|| perr(lineno, format!("expected '#{tag}' header")))?;
        let mut parts = rest.split(',');
        let found = parts.next().unwrap_or("").trim();
        if found != tag {
            return Err(perr(lineno, format!("expected format {tag}, found '{found}'")));
        }
        let mut keys = BTreeMap::new();
        for p in parts {
            let (k, v) = p.split_once('=').ok_or_else(|| perr(lineno, format!("malformed header entry '{p}'")))?;
            if keys.insert(k.trim().to_string(), v.trim().to_string()).is_some() {
                return Err(perr(lineno, format!("duplicate header key '{}'", k.trim())));
            }
        }
        Ok(Header { keys })
    }

    fn get<T: std::str::FromStr>(&self, key: &str, lineno: usize) -> Result<T> {
        let v = self.keys.get(key).ok_or_else(|| perr(lineno, format!("missing header key '{key}'")))?;
        v.parse().map_err(|_| perr(lineno, format!("bad value '{v}' for '{key}'")))
    }

    fn grid(&self, lineno: usize) -> Result<Grid> {
        let n: usize = self.get("n", lineno)?;
        let ny: usize = self.get("ny", lineno)?;
        let l: f64 = self.get("strip_width", lineno)?;
        if n > MAX_AXIS || ny > MAX_AXIS || n.saturating_mul(ny) > MAX_SAMPLES {
            return Err(perr(lineno, format!("grid {n}x{ny} is too large")));
        }
        if !l.is_finite() {
            return Err(perr(lineno, "strip width must be finite"));
        }
        Grid::new(n, ny, l).map_err(|e| perr(lineno, e.to_string()))
    }
}

fn grid_header(tag: &str, g: Grid) -> String {
    format!("#{tag},n={},ny={},strip_width={}", g.n, g.ny, g.strip_width)
}

/// Numeric body rows starting at 1-based line `first`, each of exactly
/// `width` fields.
fn numeric_rows(body: &str, first: usize, width: usize) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(body.as_bytes());
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let lineno = rec.as_ref().ok().and_then(|r| r.position()).map_or(first + i, |p| first + p.line() as usize - 1);
        let rec = rec.map_err(|e| perr(lineno, e.to_string()))?;
        if rec.len() == 1 && rec[0].trim().is_empty() {
            continue;
        }
        if rec.len() != width {
            return Err(perr(lineno, format!("expected {width} fields, found {}", rec.len())));
        }
        let row = rec
            .iter()
            .map(|s| {
                let v: f64 = s.trim().parse().map_err(|_| perr(lineno, format!("not a number: '{s}'")))?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(perr(lineno, "non-finite value"))
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

/// First `count` lines and the remaining text.
fn split_lines(text: &str, count: usize) -> Result<(Vec<&str>, &str)> {
    let mut rest = text;
    let mut lines = Vec::with_capacity(count);
    for i in 0..count {
        if rest.is_empty() {
            return Err(perr(i + 1, "unexpected end of file in header"));
        }
        let (line, tail) = rest.split_once('\n').unwrap_or((rest, ""));
        lines.push(line.trim_end_matches('\r'));
        rest = tail;
    }
    Ok((lines, rest))
}

fn write_rows(out: &mut String, values: &[f64], width: usize) {
    for row in values.chunks(width) {
        let line: Vec<String> = row.iter().map(|&v| num(v)).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
}

/// Data field with its boundary rows. `pair` tags pairwise measurements.
pub fn write_field(f: &DataField, pair: Option<(usize, usize)>) -> String {
    let mut out = grid_header(FIELD_FORMAT, f.grid);
    if let Some((j, k)) = pair {
        let _ = write!(out, ",pair={j}-{k}");
    }
    out.push_str("\n#boundary_rows=1\n");
    write_rows(&mut out, &f.values, f.grid.ny);
    out
}

pub fn write_pairwise(p: &PairwiseField) -> String {
    write_field(&p.field, Some((p.j, p.k)))
}

/// Parsed data field and its pair tag, if any. Files without boundary rows
/// get them by linear extrapolation from the two nearest interior rows.
pub fn read_field(text: &str) -> Result<(DataField, Option<(usize, usize)>)> {
    let (head, body) = split_lines(text, 2)?;
    let h = Header::parse(head[0], 1, FIELD_FORMAT)?;
    let grid = h.grid(1)?;
    let pair = match h.keys.get("pair") {
        None => None,
        Some(p) => {
            let bad = || perr(1, format!("bad pair tag '{p}'"));
            let (a, b) = p.split_once('-').ok_or_else(bad)?;
            let (j, k): (usize, usize) = (a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?);
            if j >= k {
                return Err(bad());
            }
            Some((j, k))
        }
    };
    let flag = head[1]
        .strip_prefix("#boundary_rows=")
        .ok_or_else(|| perr(2, "expected '#boundary_rows=0' or '#boundary_rows=1'"))?;
    let with_boundary = match flag.trim() {
        "1" => true,
        "0" => false,
        other => return Err(perr(2, format!("boundary_rows must be 0 or 1, got '{other}'"))),
    };
    let rows = numeric_rows(body, 3, grid.ny)?;
    let expected = if with_boundary { grid.n + 2 } else { grid.n };
    if rows.len() != expected {
        return Err(perr(3 + rows.len(), format!("expected {expected} rows, found {}", rows.len())));
    }
    let mut f = DataField::zeros(grid);
    let offset = usize::from(!with_boundary);
    for (r, row) in rows.iter().enumerate() {
        f.values[(r + offset) * grid.ny..(r + offset + 1) * grid.ny].copy_from_slice(row);
    }
    if !with_boundary {
        let last = grid.n + 1;
        for i in 0..grid.ny {
            f.set(i, 0, 2.0 * f.get(i, 1) - f.get(i, 2));
            f.set(i, last, 2.0 * f.get(i, last - 1) - f.get(i, last - 2));
        }
    }
    Ok((f, pair))
}

pub fn read_pairwise(text: &str) -> Result<PairwiseField> {
    let (field, pair) = read_field(text)?;
    let (j, k) = pair.ok_or_else(|| perr(1, "pairwise field needs a 'pair=j-k' header entry"))?;
    Ok(PairwiseField { j, k, field })
}

pub fn write_image(img: &ImageGrid) -> String {
    let mut out = grid_header(IMAGE_FORMAT, img.grid);
    out.push('\n');
    write_rows(&mut out, &img.values, img.grid.ny);
    out
}

pub fn read_image(text: &str) -> Result<ImageGrid> {
    let (head, body) = split_lines(text, 1)?;
    let grid = Header::parse(head[0], 1, IMAGE_FORMAT)?.grid(1)?;
    let rows = numeric_rows(body, 2, grid.ny)?;
    if rows.len() != grid.n {
        return Err(perr(2 + rows.len(), format!("expected {} rows, found {}", grid.n, rows.len())));
    }
    Ok(ImageGrid { grid, values: rows.concat() })
}

/// Ballistic projections P(Y_i) = ∫_0^L μ(Y_i, z) dz on the grid's Y nodes.
pub fn write_ballistic(grid: Grid, p: &[f64]) -> Result<String> {
    if p.len() != grid.ny {
        return Err(Error::Dimension { expected: grid.ny, got: p.len() });
    }
    let mut out = grid_header(BALLISTIC_FORMAT, grid);
    out.push_str("\ny,projection\n");
    for (i, v) in p.iter().enumerate() {
        let _ = writeln!(out, "{},{}", num(grid.y(i)), num(*v));
    }
    Ok(out)
}

pub fn read_ballistic(text: &str) -> Result<(Grid, Vec<f64>)> {
    let (head, body) = split_lines(text, 2)?;
    let grid = Header::parse(head[0], 1, BALLISTIC_FORMAT)?.grid(1)?;
    if head[1].trim() != "y,projection" {
        return Err(perr(2, "expected column header 'y,projection'"));
    }
    let rows = numeric_rows(body, 3, 2)?;
    if rows.len() != grid.ny {
        return Err(perr(3 + rows.len(), format!("expected {} rows, found {}", grid.ny, rows.len())));
    }
    let tol = 1e-9 * grid.strip_width;
    for (i, r) in rows.iter().enumerate() {
        if (r[0] - grid.y(i)).abs() > tol {
            return Err(perr(3 + i, format!("y = {} does not match grid node {}", r[0], grid.y(i))));
        }
    }
    Ok((grid, rows.into_iter().map(|r| r[1]).collect()))
}

pub fn write_coefficients(t: &CoefficientTable) -> String {
    let mut out = grid_header(COEFFICIENTS_FORMAT, t.grid);
    let _ = write!(out, ",nmax={}\nn,q,re,im\n", t.nmax);
    for (n, q, re, im) in t.to_rows() {
        let _ = writeln!(out, "{n},{},{},{}", num(q), num(re), num(im));
    }
    out
}

pub fn read_coefficients(text: &str) -> Result<CoefficientTable> {
    let (head, body) = split_lines(text, 2)?;
    let h = Header::parse(head[0], 1, COEFFICIENTS_FORMAT)?;
    let grid = h.grid(1)?;
    let nmax: usize = h.get("nmax", 1)?;
    if nmax > MAX_AXIS || grid.ny.saturating_mul(2 * nmax + 1) > MAX_SAMPLES {
        return Err(perr(1, format!("nmax = {nmax} is too large")));
    }
    if head[1].trim() != "n,q,re,im" {
        return Err(perr(2, "expected column header 'n,q,re,im'"));
    }
    let rows = numeric_rows(body, 3, 4)?;
    let mut t = CoefficientTable::zeros(grid, nmax);
    if rows.len() != grid.ny * t.width() {
        return Err(perr(3 + rows.len(), format!("expected {} rows, found {}", grid.ny * t.width(), rows.len())));
    }
    let dq = 2.0 * std::f64::consts::PI / grid.window();
    let mut seen = vec![false; rows.len()];
    for (i, r) in rows.iter().enumerate() {
        let line = 3 + i;
        let n = r[0];
        if n.fract() != 0.0 || n.abs() > nmax as f64 {
            return Err(perr(line, format!("n = {n} outside -{nmax}..={nmax}")));
        }
        let s = (r[1] / dq).round();
        if (r[1] - s * dq).abs() > 1e-6 * dq || s.abs() > ((grid.ny - 1) / 2) as f64 {
            return Err(perr(line, format!("q = {} is not a grid frequency", r[1])));
        }
        let m = t.slot(s as i64);
        let idx = m * t.width() + (n as i64 + nmax as i64) as usize;
        if std::mem::replace(&mut seen[idx], true) {
            return Err(perr(line, "duplicate (n, q) entry"));
        }
        t.set(m, n as i64, C::new(r[2], r[3]));
    }
    Ok(t)
}

/// K×K coefficient table c_jk. Blank lines and `#` comments are skipped;
/// entries are separated by commas and/or whitespace.
pub fn read_scheme(text: &str) -> Result<Vec<Vec<f64>>> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(|s| match s.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(perr(i + 1, format!("not a finite number: '{s}'"))),
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
        if rows.len() > 64 {
            return Err(perr(i + 1, "more than 64 rows"));
        }
    }
    if rows.is_empty() {
        return Err(perr(1, "empty coefficient table"));
    }
    let k = rows.len();
    if let Some(i) = rows.iter().position(|r| r.len() != k) {
        return Err(perr(i + 1, format!("row {} has {} entries, expected {k}", i + 1, rows[i].len())));
    }
    Ok(rows)
}

pub fn write_scheme(c: &[Vec<f64>]) -> String {
    let mut out = format!("# {SCHEME_FORMAT}\n");
    for row in c {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&line.join(", "));
        out.push('\n');
    }
    out
}

/// Phantom as TOML: `strip_width`, then `[[primitives]]` and optional
/// `[[scattering]]` tables with a `shape` tag.
pub fn read_phantom(text: &str) -> Result<Phantom> {
    let p: Phantom = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
    p.validate()?;
    Ok(p)
}

pub fn write_phantom(p: &Phantom) -> Result<String> {
    toml::to_string(p).map_err(|e| Error::Config(e.to_string()))
}

/// 8-bit binary graymap, Z increasing downward, linear on μL over
/// [`PGM_WINDOW`] and clipped outside it.
pub fn write_pgm(img: &ImageGrid) -> Vec<u8> {
    let g = img.grid;
    let (lo, hi) = PGM_WINDOW;
    let mut out = format!("P5\n{} {}\n255\n", g.ny, g.n).into_bytes();
    out.extend(img.values.iter().map(|&v| {
        let t = ((v * g.strip_width - lo) / (hi - lo)).clamp(0.0, 1.0);
        if t.is_nan() {
            0
        } else {
            (255.0 * t).round() as u8
        }
    }));
    out
}

pub fn read_text(path: &Path) -> Result<String> {
    Ok(std::fs::read_to_string(path)?)
}
