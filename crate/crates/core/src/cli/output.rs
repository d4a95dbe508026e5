use super::RunConfig;
use crate::error::{Error, Result};
use std::path::{Path, PathBuf};

/// Writes result files: '#' lines echoing the resolved configuration, extra
/// '#' lines, then the CSV body; optionally an SVG of two of its columns.
pub struct Emitter<'a> {
    cfg: &'a RunConfig,
}

impl<'a> Emitter<'a> {
    pub fn new(cfg: &'a RunConfig) -> Self {
        Emitter { cfg }
    }

    /// Output path from the `out` key, or `default`.
    pub fn path(&self, default: &str) -> PathBuf {
        PathBuf::from(self.cfg.get("out").unwrap_or(default))
    }

    /// `path` with `suffix` inserted before the extension: a.csv -> a_suffix.csv.
    pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
        let ext = path.extension().and_then(|s| s.to_str()).unwrap_or("csv");
        path.with_file_name(format!("{stem}_{suffix}.{ext}"))
    }

    pub fn write(&self, path: &Path, body: &str, extra: &[String]) -> Result<()> {
        let mut text = self.cfg.header();
        for e in extra {
            text.push_str(&format!("# {e}\n"));
        }
        text.push_str(body);
        std::fs::write(path, &text).map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))?;
        if self.cfg.flag("svg")? {
            let svg = svg_from_csv(body, self.cfg.get("svg-x"), self.cfg.get("svg-y"))?;
            let p = path.with_extension("svg");
            std::fs::write(&p, svg).map_err(|e| Error::Config(format!("cannot write {}: {e}", p.display())))?;
        }
        Ok(())
    }
}

/// CSV text from a header and rows of preformatted cells.
pub(crate) fn csv(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for r in rows {
        s.push_str(&r.join(","));
        s.push('\n');
    }
    s
}

/// Line plot of column `x` against column `y` (default: the first two).
/// Points are written in data coordinates and mapped by a transform, so the
/// SVG carries every finite CSV value unchanged; non-finite values split the line.
pub fn svg_from_csv(text: &str, x: Option<&str>, y: Option<&str>) -> Result<String> {
    let mut lines = text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty());
    let header: Vec<&str> = lines.next().ok_or_else(|| Error::Config("empty CSV".into()))?.split(',').collect();
    let col = |name: Option<&str>, default: usize| -> Result<usize> {
        match name {
            None => Ok(default),
            Some(n) => header.iter().position(|h| *h == n).ok_or_else(|| Error::Config(format!("no column '{n}' to plot"))),
        }
    };
    let (ix, iy) = (col(x, 0)?, col(y, 1)?);
    if ix.max(iy) >= header.len() {
        return Err(Error::Config("CSV has fewer than two columns to plot".into()));
    }
    let mut segments: Vec<Vec<(f64, f64)>> = vec![vec![]];
    for l in lines {
        let f: Vec<&str> = l.split(',').collect();
        let p = (f.get(ix).and_then(|v| v.parse::<f64>().ok()), f.get(iy).and_then(|v| v.parse::<f64>().ok()));
        match p {
            (Some(a), Some(b)) if a.is_finite() && b.is_finite() => segments.last_mut().unwrap().push((a, b)),
            _ => {
                if !segments.last().unwrap().is_empty() {
                    segments.push(vec![]);
                }
            }
        }
    }
    segments.retain(|s| !s.is_empty());
    let pts = segments.iter().flatten();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(a, b) in pts {
        x0 = x0.min(a);
        x1 = x1.max(a);
        y0 = y0.min(b);
        y1 = y1.max(b);
    }
    if !x0.is_finite() {
        return Err(Error::Config("no finite points to plot".into()));
    }
    if x1 == x0 {
        x1 = x0 + 1.0;
    }
    if y1 == y0 {
        y1 = y0 + 1.0;
    }
    let (w, h, m) = (640.0, 420.0, 50.0);
    let sx = (w - 2.0 * m) / (x1 - x0);
    let sy = (h - 2.0 * m) / (y1 - y0);
    let mut s = format!("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n");
    s.push_str(&format!("<rect x=\"{m}\" y=\"{m}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#888\"/>\n", w - 2.0 * m, h - 2.0 * m));
    s.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\">{} [{x0:.4}, {x1:.4}]</text>\n",
        w / 2.0,
        h - 15.0,
        header[ix]
    ));
    s.push_str(&format!("<text x=\"10\" y=\"30\" font-size=\"12\">{} [{y0:.4}, {y1:.4}]</text>\n", header[iy]));
    s.push_str(&format!("<g transform=\"matrix({sx} 0 0 {} {} {})\">\n", -sy, m - x0 * sx, h - m + y0 * sy));
    for seg in &segments {
        let p: Vec<String> = seg.iter().map(|(a, b)| format!("{a},{b}")).collect();
        s.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"#1f5fa8\" stroke-width=\"1.5\" vector-effect=\"non-scaling-stroke\" points=\"{}\"/>\n",
            p.join(" ")
        ));
    }
    s.push_str("</g>\n</svg>\n");
    Ok(s)
}
