//! Bit-stable writers: chains to CSV (floats printed with 17 significant
//! digits) and reports to JSON. Partial files are removed when a write
//! fails.

use crate::error::{Error, Result};
use crate::geometry::GroupFlavor;
use crate::samplers::{Chain, ChainState};
use std::fmt::Write as _;
use std::path::Path;

fn fmt_f64(x: f64) -> String {
    format!("{x:.17e}")
}

/// CSV header + rows for a chain: `iter, <state columns>, accepted, delta_H`.
/// State columns by geometry: `x0..` for charts; `g00..` row-major (with
/// `_re`/`_im` pairs on complex groups) plus `v0..` for Lie groups;
/// `q0.., v0..` for spheres; `q0.., p0..` for phase space.
pub fn chain_csv(chain: &Chain, flavor: Option<GroupFlavor>) -> String {
    let mut out = String::new();
    let header: Vec<String> = match chain.samples.first() {
        None => vec!["iter".into(), "accepted".into(), "delta_H".into()],
        Some(state) => {
            let mut cols = vec!["iter".to_string()];
            match state {
                ChainState::Chart(x) => {
                    cols.extend((0..x.len()).map(|i| format!("x{i}")));
                }
                ChainState::Lie { g, v } => {
                    let n = g.nrows();
                    let complex = flavor == Some(GroupFlavor::SUn);
                    for i in 0..n {
                        for j in 0..n {
                            if complex {
                                cols.push(format!("g{i}{j}_re"));
                                cols.push(format!("g{i}{j}_im"));
                            } else {
                                cols.push(format!("g{i}{j}"));
                            }
                        }
                    }
                    cols.extend((0..v.len()).map(|i| format!("v{i}")));
                }
                ChainState::Sphere { q, v } => {
                    cols.extend((0..q.len()).map(|i| format!("q{i}")));
                    cols.extend((0..v.len()).map(|i| format!("v{i}")));
                }
                ChainState::Phase { q, p } => {
                    cols.extend((0..q.len()).map(|i| format!("q{i}")));
                    cols.extend((0..p.len()).map(|i| format!("p{i}")));
                }
            }
            cols.push("accepted".into());
            cols.push("delta_H".into());
            cols
        }
    };
    out.push_str(&header.join(","));
    out.push('\n');

    let config = &chain.meta.config;
    for (row, state) in chain.samples.iter().enumerate() {
        // iteration index at which this state was recorded
        let iter = if config.n_iterations == 0 {
            0
        } else {
            config.burn_in + row * config.thinning
        };
        let (accepted, delta) = if chain.accept_flags.is_empty() {
            (true, 0.0)
        } else {
            (chain.accept_flags[iter.min(chain.accept_flags.len() - 1)],
             chain.energy_errors[iter.min(chain.energy_errors.len() - 1)])
        };
        let mut cols: Vec<String> = vec![iter.to_string()];
        match state {
            ChainState::Chart(x) => cols.extend(x.iter().map(|v| fmt_f64(*v))),
            ChainState::Lie { g, v } => {
                let complex = flavor == Some(GroupFlavor::SUn);
                for i in 0..g.nrows() {
                    for j in 0..g.ncols() {
                        let z = g[(i, j)];
                        if complex {
                            cols.push(fmt_f64(z.re));
                            cols.push(fmt_f64(z.im));
                        } else {
                            cols.push(fmt_f64(z.re));
                        }
                    }
                }
                cols.extend(v.iter().map(|v| fmt_f64(*v)));
            }
            ChainState::Sphere { q, v } => {
                cols.extend(q.iter().map(|v| fmt_f64(*v)));
                cols.extend(v.iter().map(|v| fmt_f64(*v)));
            }
            ChainState::Phase { q, p } => {
                cols.extend(q.iter().map(|v| fmt_f64(*v)));
                cols.extend(p.iter().map(|v| fmt_f64(*v)));
            }
        }
        cols.push(if accepted { "1".into() } else { "0".into() });
        cols.push(fmt_f64(delta));
        let _ = writeln!(out, "{}", cols.join(","));
    }
    out
}

pub fn write_text(path: &Path, content: &str) -> Result<()> {
    std::fs::write(path, content).map_err(|source| {
        let _ = std::fs::remove_file(path);
        Error::Io { path: path.display().to_string(), source }
    })
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: std::io::Error::new(std::io::ErrorKind::InvalidData, e),
    })?;
    write_text(path, &(text + "\n"))
}
