//! Snapshot frames: tab-separated text grids and plain (P2) PGM images.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use dsclust_core::neural::Snapshot;

use crate::{io_err, CliError, Result};

/// Output voltages, one row per evidence and one column per cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
}

impl From<&Snapshot> for Frame {
    fn from(s: &Snapshot) -> Self {
        Self {
            rows: s.rows,
            cols: s.cols,
            values: s.outputs.clone(),
        }
    }
}

impl Frame {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for row in self.values.chunks(self.cols) {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.4}")).collect();
            out.push_str(&cells.join("\t"));
            out.push('\n');
        }
        out
    }

    /// Parses [`to_text`](Self::to_text) output. `path` is only used in errors.
    pub fn parse_text(text: &str, path: &Path) -> Result<Self> {
        let err = |line: usize, message: String| CliError::Frame {
            path: path.to_path_buf(),
            line,
            message,
        };
        let mut values = Vec::new();
        let mut cols = None;
        let mut rows = 0;
        for (i, line) in text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
        {
            let row = line
                .split('\t')
                .map(|cell| {
                    let v: f64 = cell
                        .trim()
                        .parse()
                        .map_err(|_| err(i + 1, format!("not a number: {cell:?}")))?;
                    if (0.0..=1.0).contains(&v) {
                        Ok(v)
                    } else {
                        Err(err(i + 1, format!("voltage {v} outside [0, 1]")))
                    }
                })
                .collect::<Result<Vec<f64>>>()?;
            match cols {
                None => cols = Some(row.len()),
                Some(c) if c != row.len() => {
                    return Err(err(
                        i + 1,
                        format!("expected {c} columns, found {}", row.len()),
                    ))
                }
                Some(_) => {}
            }
            values.extend(row);
            rows += 1;
        }
        let cols = cols.ok_or_else(|| err(0, "empty frame".into()))?;
        Ok(Self { rows, cols, values })
    }

    /// P2 image, `cols` wide and `rows` high, gray level `round(255 * V)`.
    pub fn to_pgm(&self) -> String {
        let mut out = format!("P2\n{} {}\n255\n", self.cols, self.rows);
        for row in self.values.chunks(self.cols) {
            let cells: Vec<String> = row.iter().map(|v| gray(*v).to_string()).collect();
            let _ = writeln!(out, "{}", cells.join(" "));
        }
        out
    }
}

pub fn gray(v: f64) -> u8 {
    (255.0 * v.clamp(0.0, 1.0)).round() as u8
}

/// Checks a P2 image and returns `(width, height, pixels)`.
pub fn parse_pgm(text: &str) -> Option<(usize, usize, Vec<u8>)> {
    let mut tokens = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .flat_map(str::split_whitespace);
    if tokens.next()? != "P2" {
        return None;
    }
    let width: usize = tokens.next()?.parse().ok()?;
    let height: usize = tokens.next()?.parse().ok()?;
    let max: u32 = tokens.next()?.parse().ok()?;
    if max != 255 {
        return None;
    }
    let pixels = tokens
        .map(|t| t.parse::<u8>().ok())
        .collect::<Option<Vec<_>>>()?;
    (pixels.len() == width * height).then_some((width, height, pixels))
}

pub fn frame_stem(iteration: usize) -> String {
    format!("frame_{iteration:05}")
}

/// Writes `frame_NNNNN.tsv` and `frame_NNNNN.pgm` for every snapshot.
pub fn write_snapshots(dir: &Path, snapshots: &[Snapshot]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut written = Vec::new();
    for s in snapshots {
        let frame = Frame::from(s);
        let stem = frame_stem(s.iteration);
        for (ext, body) in [("tsv", frame.to_text()), ("pgm", frame.to_pgm())] {
            let path = dir.join(format!("{stem}.{ext}"));
            fs::write(&path, body).map_err(io_err(&path))?;
            written.push(path);
        }
    }
    Ok(written)
}

/// Converts text frames to PGM images next to `out_dir`, keeping file stems.
pub fn render(inputs: &[PathBuf], out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let mut written = Vec::new();
    for input in inputs {
        let text = fs::read_to_string(input).map_err(io_err(input))?;
        let frame = Frame::parse_text(&text, input)?;
        let stem = input.file_stem().unwrap_or(input.as_os_str());
        let path = out_dir.join(stem).with_extension("pgm");
        fs::write(&path, frame.to_pgm()).map_err(io_err(&path))?;
        written.push(path);
    }
    Ok(written)
}
