//! Polygon and partition files.

use std::fmt;
use std::path::Path;

use equipart::recursive::PartitionTree;
use equipart::{ConvexPolygon, Vec2};
use serde::Deserialize;

#[derive(Debug)]
pub struct InputError(pub String);

impl fmt::Display for InputError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

fn read(path: &Path) -> Result<String, InputError> {
    std::fs::read_to_string(path).map_err(|e| InputError(format!("{}: {e}", path.display())))
}

/// Vertices as `x y` or `x, y` per line, `#` starting a comment, or a JSON
/// array of pairs. Counterclockwise order.
pub fn parse_vertices(text: &str) -> Result<Vec<Vec2>, String> {
    if text.trim_start().starts_with('[') {
        let pairs: Vec<[f64; 2]> = serde_json::from_str(text).map_err(|e| format!("line {}: {e}", e.line()))?;
        return Ok(pairs.into_iter().map(Vec2::from).collect());
    }
    let mut out = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(|c: char| c == ',' || c.is_whitespace()).filter(|s| !s.is_empty()).collect();
        let nums: Vec<f64> = fields
            .iter()
            .map(|s| s.parse::<f64>().ok().filter(|v| v.is_finite()))
            .collect::<Option<_>>()
            .ok_or_else(|| format!("line {}: expected two decimal numbers, found '{line}'", k + 1))?;
        match nums[..] {
            [x, y] => out.push(Vec2::new(x, y)),
            _ => return Err(format!("line {}: expected two decimal numbers, found {}", k + 1, nums.len())),
        }
    }
    Ok(out)
}

pub fn read_polygon(path: &Path) -> Result<ConvexPolygon, InputError> {
    let text = read(path)?;
    let v = parse_vertices(&text).map_err(|e| InputError(format!("{}:{e}", path.display())))?;
    ConvexPolygon::new(v).map_err(|e| InputError(format!("{}: {e}", path.display())))
}

#[derive(Deserialize)]
#[serde(untagged)]
enum PartitionDoc {
    Tree(Box<PartitionTree>),
    Cells(Vec<Vec<Vec2>>),
}

/// Cells of a partition document: a solved tree, whose leaves are taken, or
/// a bare array of vertex lists.
pub fn read_cells(path: &Path) -> Result<Vec<Vec<Vec2>>, InputError> {
    let text = read(path)?;
    let doc: PartitionDoc = serde_json::from_str(&text)
        .map_err(|_| InputError(format!("{}: not a partition tree or an array of cells", path.display())))?;
    Ok(match doc {
        PartitionDoc::Tree(t) => t.leaves().iter().map(|p| p.vertices().to_vec()).collect(),
        PartitionDoc::Cells(c) => c,
    })
}
