//! Posterior matrix files.
//!
//! Text: a `T V` header followed by `T` rows of `V` log-probabilities,
//! whitespace-separated. Binary: magic `GTCP`, unsigned 32-bit little-endian
//! `T` and `V`, then `T x V` little-endian 64-bit floats row-major. The
//! format is detected from the magic bytes.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use gtc_core::EmissionMatrix;

const MAGIC: &[u8; 4] = b"GTCP";

pub fn read_posteriors(path: &Path, normalize: bool) -> Result<EmissionMatrix> {
    let bytes = fs::read(path).with_context(|| format!("reading posteriors {}", path.display()))?;
    let (frames, vocab, data) = if bytes.starts_with(MAGIC) {
        parse_binary(&bytes).with_context(|| format!("binary posteriors {}", path.display()))?
    } else {
        let text = std::str::from_utf8(&bytes)
            .with_context(|| format!("posteriors {} are not UTF-8 text", path.display()))?;
        parse_text(text).with_context(|| format!("text posteriors {}", path.display()))?
    };
    let matrix = if normalize {
        EmissionMatrix::from_logits(frames, vocab, data)
    } else {
        EmissionMatrix::new(frames, vocab, data)
    };
    matrix.with_context(|| format!("posteriors {}", path.display()))
}

fn parse_binary(bytes: &[u8]) -> Result<(usize, usize, Vec<f64>)> {
    if bytes.len() < 12 {
        bail!("truncated header");
    }
    let frames = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let vocab = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let body = &bytes[12..];
    let expected = frames
        .checked_mul(vocab)
        .and_then(|n| n.checked_mul(8))
        .context("size overflow")?;
    if body.len() != expected {
        bail!("expected {expected} payload bytes, got {}", body.len());
    }
    let data = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((frames, vocab, data))
}

fn parse_text(text: &str) -> Result<(usize, usize, Vec<f64>)> {
    let mut tokens = text.split_whitespace();
    let frames: usize = tokens.next().context("missing frame count")?.parse()?;
    let vocab: usize = tokens.next().context("missing vocabulary size")?.parse()?;
    let data = tokens
        .map(|t| t.parse::<f64>().with_context(|| format!("bad value {t:?}")))
        .collect::<Result<Vec<f64>>>()?;
    if data.len() != frames * vocab {
        bail!("expected {} values, got {}", frames * vocab, data.len());
    }
    Ok((frames, vocab, data))
}

/// Writes a `T x V` matrix in the text layout; plain float formatting
/// round-trips every digit.
pub fn format_matrix_text(frames: usize, vocab: usize, data: &[f64]) -> String {
    let mut out = format!("{frames} {vocab}\n");
    for t in 0..frames {
        let row: Vec<String> = data[t * vocab..(t + 1) * vocab]
            .iter()
            .map(|x| x.to_string())
            .collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

#[cfg(test)]
pub fn write_binary(path: &Path, frames: usize, vocab: usize, data: &[f64]) -> Result<()> {
    let mut bytes = Vec::with_capacity(12 + data.len() * 8);
    bytes.extend_from_slice(MAGIC);
    bytes.extend_from_slice(&(frames as u32).to_le_bytes());
    bytes.extend_from_slice(&(vocab as u32).to_le_bytes());
    for x in data {
        bytes.extend_from_slice(&x.to_le_bytes());
    }
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}
