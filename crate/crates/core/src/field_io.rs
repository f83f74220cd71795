//! Text format for grid fields.
//!
//! ```text
//! # nx ny h x0 y0
//! v(0,0),v(1,0),...,v(nx-1,0)
//! ...
//! v(0,ny-1),...,v(nx-1,ny-1)
//! ```
//!
//! Rows run bottom to top. Numbers are written with 17 significant digits so
//! a write/read cycle reproduces every `f64` bit for bit.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{DomainMask, GridSpec, ScalarGrid};

/// Refuse to allocate fields larger than this many cells.
pub const MAX_CELLS: usize = 1 << 26;

pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_field_string(field: &ScalarGrid) -> String {
    let g = field.grid;
    let mut out = String::with_capacity(g.len() * 24 + 64);
    let _ = writeln!(
        out,
        "# {} {} {} {} {}",
        g.nx,
        g.ny,
        format_f64(g.h),
        format_f64(g.origin[0]),
        format_f64(g.origin[1])
    );
    for j in 0..g.ny {
        for i in 0..g.nx {
            if i > 0 {
                out.push(',');
            }
            out.push_str(&format_f64(field.at(i, j)));
        }
        out.push('\n');
    }
    out
}

pub fn parse_header(line: &str) -> Result<GridSpec> {
    let body = line
        .trim()
        .strip_prefix('#')
        .ok_or_else(|| Error::parse(1, "header must start with `#`"))?;
    let parts: Vec<&str> = body.split_whitespace().collect();
    if parts.len() != 5 {
        return Err(Error::parse(1, format!("header needs `nx ny h x0 y0`, found {} fields", parts.len())));
    }
    let count = |s: &str| s.parse::<usize>().map_err(|_| Error::parse(1, format!("bad count `{s}`")));
    let real = |s: &str| match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::parse(1, format!("bad number `{s}`"))),
    };
    let (nx, ny) = (count(parts[0])?, count(parts[1])?);
    let h = real(parts[2])?;
    if nx == 0 || ny == 0 || nx.checked_mul(ny).is_none_or(|n| n > MAX_CELLS) {
        return Err(Error::parse(1, format!("unsupported grid size {nx}x{ny}")));
    }
    if h <= 0.0 {
        return Err(Error::parse(1, "cell size must be positive"));
    }
    Ok(GridSpec::new(nx, ny, h, [real(parts[3])?, real(parts[4])?]))
}

pub fn parse_field(text: &str) -> Result<ScalarGrid> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| Error::parse(1, "empty field file"))?;
    let grid = parse_header(header)?;
    let mut values = Vec::with_capacity(grid.len());
    let mut rows = 0;
    for (lineno, line) in lines {
        if rows == grid.ny {
            return Err(Error::parse(lineno + 1, "more rows than declared"));
        }
        let before = values.len();
        for tok in line.split(',') {
            let tok = tok.trim();
            match tok.parse::<f64>() {
                Ok(v) if v.is_finite() => values.push(v),
                _ => return Err(Error::parse(lineno + 1, format!("bad value `{tok}`"))),
            }
            if values.len() - before > grid.nx {
                break;
            }
        }
        if values.len() - before != grid.nx {
            return Err(Error::parse(lineno + 1, format!("row has {} values, expected {}", values.len() - before, grid.nx)));
        }
        rows += 1;
    }
    if rows != grid.ny {
        return Err(Error::parse(rows + 2, format!("found {rows} rows, expected {}", grid.ny)));
    }
    Ok(ScalarGrid { grid, values })
}

/// Parses a 0/1 mask file into a domain mask.
pub fn parse_mask(text: &str) -> Result<DomainMask> {
    let field = parse_field(text)?;
    let mut flags = Vec::with_capacity(field.values.len());
    for (k, v) in field.values.iter().enumerate() {
        flags.push(match *v {
            0.0 => false,
            1.0 => true,
            other => {
                return Err(Error::parse(k / field.grid.nx + 2, format!("mask value {other} not in {{0,1}}")));
            }
        });
    }
    DomainMask::from_flags(field.grid, flags)
}

pub fn mask_to_field(mask: &DomainMask) -> ScalarGrid {
    ScalarGrid { grid: mask.grid, values: mask.interior.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect() }
}

/// Writes via a temporary file in the same directory, then renames.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.tmp-{}", std::process::id()));
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn write_field(path: &Path, field: &ScalarGrid) -> Result<()> {
    write_atomic(path, write_field_string(field).as_bytes())
}

pub fn read_field(path: &Path) -> Result<ScalarGrid> {
    parse_field(&std::fs::read_to_string(path)?)
}

pub fn read_mask(path: &Path) -> Result<DomainMask> {
    parse_mask(&std::fs::read_to_string(path)?)
}
