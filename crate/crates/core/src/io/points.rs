//! Plain-text point lists (`x y z` per line), as used by part-segmentation datasets.

use thiserror::Error;

use crate::geometry::Vec3;

#[derive(Debug, Error, PartialEq)]
#[error("line {line}: expected three coordinates")]
pub struct PointsParseError {
    pub line: usize,
}

pub fn parse_points(text: &str) -> Result<Vec<Vec3>, PointsParseError> {
    let mut points = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let coords: Vec<f64> = line
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|t| !t.is_empty())
            .take(3)
            .map(str::parse)
            .collect::<Result<_, _>>()
            .map_err(|_| PointsParseError { line: n + 1 })?;
        if coords.len() != 3 {
            return Err(PointsParseError { line: n + 1 });
        }
        points.push([coords[0], coords[1], coords[2]]);
    }
    Ok(points)
}
