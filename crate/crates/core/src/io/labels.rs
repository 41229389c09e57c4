//! Per-point label files: one 1-based integer per line.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
#[error("line {line}: invalid label `{text}`")]
pub struct LabelParseError {
    pub line: usize,
    pub text: String,
}

pub fn read_labels(text: &str) -> Result<Vec<u32>, LabelParseError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| {
            l.trim().parse().map_err(|_| LabelParseError { line: n + 1, text: l.trim().to_string() })
        })
        .collect()
}

pub fn write_labels(labels: &[u32]) -> String {
    let mut out = String::with_capacity(labels.len() * 3);
    for l in labels {
        out.push_str(&l.to_string());
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_and_errors() {
        let labels = vec![1, 4, 2, 2];
        assert_eq!(write_labels(&labels), "1\n4\n2\n2\n");
        assert_eq!(read_labels(&write_labels(&labels)).unwrap(), labels);
        assert_eq!(read_labels("1\r\n2\n\n").unwrap(), vec![1, 2]);
        assert_eq!(read_labels("1\nx\n").unwrap_err().line, 2);
        assert!(read_labels("-1\n").is_err());
    }
}
