use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::{Command, Format};

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut s = String::with_capacity(64);
    for b in digest.iter() {
        let _ = write!(s, "{b:02x}");
    }
    s
}

/// Header shared by every report.
#[derive(Serialize)]
pub struct Meta<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub config_sha256: String,
    pub seed: u64,
    pub tolerances: &'a serde_json::Value,
}

pub fn to_json<T: Serialize>(v: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

/// `# key=value` lines that precede CSV and SVG bodies.
pub fn comment_lines(meta: &Meta, prefix: &str, suffix: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{prefix}{} {}{suffix}", meta.tool, meta.version);
    let _ = writeln!(s, "{prefix}command={}{suffix}", meta.command);
    let _ = writeln!(s, "{prefix}config_sha256={}{suffix}", meta.config_sha256);
    let _ = writeln!(s, "{prefix}seed={}{suffix}", meta.seed);
    let _ = writeln!(s, "{prefix}tolerances={}{suffix}", meta.tolerances);
    s
}

pub fn emit(text: &str, out: Option<&Path>, command: Command, format: Format) -> Result<()> {
    match out {
        Some(dir) => {
            std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
            let path = dir.join(format!("{}.{}", command.name(), format.ext()));
            std::fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))?;
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
        }
    }
    Ok(())
}

/// Polylines in data coordinates, flipped so that `y` points up.
pub fn svg(meta: &Meta, lines: &[Vec<[f64; 2]>], extent: f64, title: &str) -> String {
    let size = 600.0;
    let scale = size / (2.0 * extent);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size:.0}" height="{size:.0}" viewBox="0 0 {size:.0} {size:.0}">"#
    );
    s.push_str("<metadata>\n");
    s.push_str(&comment_lines(meta, "", ""));
    s.push_str("</metadata>\n");
    let _ = writeln!(s, "<title>{title}</title>");
    let _ = writeln!(s, r#"<rect width="{size:.0}" height="{size:.0}" fill="white"/>"#);
    for line in lines {
        s.push_str(r#"<polyline fill="none" stroke="black" stroke-width="0.8" points=""#);
        for (i, [x, y]) in line.iter().enumerate() {
            if i > 0 {
                s.push(' ');
            }
            let px = (x + extent) * scale;
            let py = (extent - y) * scale;
            let _ = write!(s, "{px:.4},{py:.4}");
        }
        s.push_str("\"/>\n");
    }
    s.push_str("</svg>\n");
    s
}
