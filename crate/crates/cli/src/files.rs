//! Text formats used by the command line: weight vectors, opened values and
//! public keys.

use std::fs;
use std::path::Path;

use bltc::engine::{G2Element, Scalar};
use bltc::WeightVector;

use crate::Failure;

/// Parses a decimal integer (possibly negative) or a `0x`-prefixed
/// big-endian hex scalar.
pub fn parse_scalar(text: &str) -> Result<Scalar, String> {
    let t = text.trim();
    if let Some(h) = t.strip_prefix("0x") {
        if h.is_empty() || h.len() > 64 {
            return Err(format!("hex scalar {t:?} must have 1..=64 digits"));
        }
        let padded = format!("{h:0>64}");
        let bytes = hex::decode(&padded).map_err(|e| format!("{t:?}: {e}"))?;
        return Scalar::from_bytes(&bytes).map_err(|e| format!("{t:?}: {e}"));
    }
    t.parse::<i64>()
        .map(Scalar::from_i64)
        .map_err(|_| format!("not a scalar: {t:?}"))
}

pub fn format_scalar(s: &Scalar) -> String {
    format!("0x{}", hex::encode(s.to_bytes()))
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

pub fn read_text(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>, Failure> {
    fs::read(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

pub fn write(path: &Path, data: impl AsRef<[u8]>) -> Result<(), Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Failure::Io(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, data).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

/// One scalar per line; blank lines and `#` comments are skipped.
pub fn read_weights(path: &Path) -> Result<WeightVector, Failure> {
    let text = read_text(path)?;
    let values = data_lines(&text)
        .map(|(n, l)| {
            parse_scalar(l).map_err(|e| Failure::Parse(format!("{}:{n}: {e}", path.display())))
        })
        .collect::<Result<Vec<_>, _>>()?;
    WeightVector::new(values).map_err(|e| Failure::Parse(format!("{}: {e}", path.display())))
}

pub fn write_weights(path: &Path, w: &WeightVector) -> Result<(), Failure> {
    let mut out = String::new();
    for v in w.values() {
        out.push_str(&format_scalar(v));
        out.push('\n');
    }
    write(path, out)
}

/// `index value` pairs, one per line.
pub fn read_values(path: &Path) -> Result<Vec<(u64, Scalar)>, Failure> {
    let text = read_text(path)?;
    data_lines(&text)
        .map(|(n, l)| {
            let bad = |e: String| Failure::Parse(format!("{}:{n}: {e}", path.display()));
            let mut parts = l.split_whitespace();
            let (Some(i), Some(v), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(bad("expected `index value`".into()));
            };
            let i = i
                .parse::<u64>()
                .map_err(|_| bad(format!("bad index {i:?}")))?;
            Ok((i, parse_scalar(v).map_err(bad)?))
        })
        .collect()
}

pub fn write_values(path: &Path, values: &[(u64, Scalar)]) -> Result<(), Failure> {
    let mut out = String::new();
    for (i, v) in values {
        out.push_str(&format!("{i} {}\n", format_scalar(v)));
    }
    write(path, out)
}

/// Watermark key file written by `mark`.
pub fn key_json(wmk: &Scalar, pvk: &G2Element) -> String {
    serde_json::json!({
        "wmk": hex::encode(wmk.to_bytes()),
        "pvk": hex::encode(pvk.to_bytes()),
    })
    .to_string()
}

fn json_field(text: &str, field: &str) -> Option<String> {
    serde_json::from_str::<serde_json::Value>(text)
        .ok()?
        .get(field)?
        .as_str()
        .map(str::to_string)
}

pub fn read_wmk(path: &Path) -> Result<Scalar, Failure> {
    let text = read_text(path)?;
    let hex_wmk = json_field(&text, "wmk")
        .ok_or_else(|| Failure::Parse(format!("{}: no \"wmk\" field", path.display())))?;
    let bytes = hex::decode(hex_wmk).map_err(|e| Failure::Parse(e.to_string()))?;
    Scalar::from_bytes(&bytes).map_err(|e| Failure::Parse(format!("{}: {e}", path.display())))
}

/// A public key given inline as hex, or as a file holding hex or a key JSON.
pub fn read_pvk(arg: &str) -> Result<G2Element, Failure> {
    let path = Path::new(arg);
    let text = if path.is_file() {
        let t = read_text(path)?;
        json_field(&t, "pvk").unwrap_or(t)
    } else {
        arg.to_string()
    };
    let t = text.trim();
    let t = t.strip_prefix("0x").unwrap_or(t);
    let bytes = hex::decode(t).map_err(|e| Failure::Parse(format!("pvk: {e}")))?;
    G2Element::from_bytes(&bytes).map_err(|e| Failure::Parse(format!("pvk: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalars_in_both_notations() {
        assert_eq!(parse_scalar("-3").unwrap(), Scalar::from_i64(-3));
        assert_eq!(parse_scalar(" 0x0a ").unwrap(), Scalar::from(10u64));
        let s = Scalar::from(123456789u64);
        assert_eq!(parse_scalar(&format_scalar(&s)).unwrap(), s);
        assert!(parse_scalar("0x").is_err());
        assert!(parse_scalar(&format!("0x{}", "f".repeat(64))).is_err());
        assert!(parse_scalar("1.5").is_err());
    }
}
