//! Success-probability contours over the `(K, M)` grid.
//!
//! Contours come from marching squares with linear interpolation along cell
//! edges; saddle cells are split using the mean of their four corners.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::{GridResult, HarnessError, Result};

/// Success rates on the sorted `K x M` lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct RateGrid {
    pub ks: Vec<usize>,
    pub ms: Vec<usize>,
    /// `rates[a][b]` is the success rate at `(ks[a], ms[b])`.
    pub rates: Vec<Vec<f64>>,
}

impl RateGrid {
    pub fn from_result(result: &GridResult) -> Result<Self> {
        let mut ks: Vec<usize> = result.cells.iter().map(|c| c.k).collect();
        let mut ms: Vec<usize> = result.cells.iter().map(|c| c.m).collect();
        ks.sort_unstable();
        ks.dedup();
        ms.sort_unstable();
        ms.dedup();
        let mut rates = vec![vec![f64::NAN; ms.len()]; ks.len()];
        for c in &result.cells {
            let a = ks.binary_search(&c.k).expect("collected above");
            let b = ms.binary_search(&c.m).expect("collected above");
            rates[a][b] = c.success_rate();
        }
        if rates.iter().flatten().any(|r| r.is_nan()) {
            return Err(HarnessError::DegenerateGrid("grid has missing (K, M) cells".into()));
        }
        Ok(Self { ks, ms, rates })
    }

    fn require_2d(&self) -> Result<()> {
        if self.ks.len() < 2 || self.ms.len() < 2 {
            return Err(HarnessError::DegenerateGrid(format!(
                "contours need at least 2 distinct K and M values, got {} and {}",
                self.ks.len(),
                self.ms.len()
            )));
        }
        Ok(())
    }
}

/// A polyline in `(K, M)` coordinates at one success level.
#[derive(Debug, Clone, PartialEq)]
pub struct ContourLine {
    pub level: f64,
    pub points: Vec<(f64, f64)>,
}

/// Edge of the lattice: `(a, b, along_k)` starts at node `(a, b)` and runs
/// to `(a + 1, b)` when `along_k`, else to `(a, b + 1)`.
type EdgeKey = (usize, usize, bool);

pub fn contour_lines(grid: &RateGrid, level: f64) -> Vec<ContourLine> {
    let (nk, nm) = (grid.ks.len(), grid.ms.len());
    if nk < 2 || nm < 2 {
        return Vec::new();
    }
    let v = |a: usize, b: usize| grid.rates[a][b];
    let inside = |a: usize, b: usize| v(a, b) >= level;
    let point = |e: EdgeKey| -> (f64, f64) {
        let (a, b, along_k) = e;
        let (a2, b2) = if along_k { (a + 1, b) } else { (a, b + 1) };
        let (v0, v1) = (v(a, b), v(a2, b2));
        let t = ((level - v0) / (v1 - v0)).clamp(0.0, 1.0);
        let lerp = |x0: usize, x1: usize| x0 as f64 + t * (x1 as f64 - x0 as f64);
        (lerp(grid.ks[a], grid.ks[a2]), lerp(grid.ms[b], grid.ms[b2]))
    };

    let mut segments: Vec<(EdgeKey, EdgeKey)> = Vec::new();
    for a in 0..nk - 1 {
        for b in 0..nm - 1 {
            // Corners counter-clockwise from (a, b); edge e_i joins corner i to i + 1.
            let corners = [(a, b), (a + 1, b), (a + 1, b + 1), (a, b + 1)];
            let edges: [EdgeKey; 4] = [(a, b, true), (a + 1, b, false), (a, b + 1, true), (a, b, false)];
            let case = corners.iter().enumerate().fold(0u8, |acc, (i, &(x, y))| acc | ((inside(x, y) as u8) << i));
            match case {
                0 | 15 => {}
                5 | 10 => {
                    let center = corners.iter().map(|&(x, y)| v(x, y)).sum::<f64>() / 4.0;
                    // Separate the corners that are isolated from the center.
                    let isolate_even = (case == 5) != (center >= level);
                    if isolate_even {
                        segments.push((edges[3], edges[0]));
                        segments.push((edges[1], edges[2]));
                    } else {
                        segments.push((edges[0], edges[1]));
                        segments.push((edges[2], edges[3]));
                    }
                }
                _ => {
                    let crossing: Vec<EdgeKey> = (0..4)
                        .filter(|&i| {
                            let (p, q) = (corners[i], corners[(i + 1) % 4]);
                            inside(p.0, p.1) != inside(q.0, q.1)
                        })
                        .map(|i| edges[i])
                        .collect();
                    segments.push((crossing[0], crossing[1]));
                }
            }
        }
    }

    // Stitch segments into polylines through their shared edges.
    let mut by_edge: HashMap<EdgeKey, Vec<usize>> = HashMap::new();
    for (s, &(e0, e1)) in segments.iter().enumerate() {
        by_edge.entry(e0).or_default().push(s);
        by_edge.entry(e1).or_default().push(s);
    }
    let mut used = vec![false; segments.len()];
    let mut lines = Vec::new();
    // Open chains start at boundary edges (touched once); closed loops after.
    let mut starts: Vec<usize> = (0..segments.len())
        .filter(|&s| by_edge[&segments[s].0].len() == 1 || by_edge[&segments[s].1].len() == 1)
        .collect();
    starts.extend(0..segments.len());
    for s0 in starts {
        if used[s0] {
            continue;
        }
        let (e0, e1) = segments[s0];
        let (tail, mut head) = if by_edge[&e1].len() == 1 { (e1, e0) } else { (e0, e1) };
        let mut keys = vec![tail, head];
        used[s0] = true;
        loop {
            let next = by_edge[&head].iter().copied().find(|&s| !used[s]);
            let Some(s) = next else { break };
            used[s] = true;
            let (a, b) = segments[s];
            head = if a == head { b } else { a };
            keys.push(head);
            if head == tail {
                break;
            }
        }
        lines.push(ContourLine { level, points: keys.into_iter().map(point).collect() });
    }
    lines
}

/// For each K, the smallest M at which the success rate first reaches
/// `level`, linearly interpolated between neighbouring M values. `None`
/// when the level is never reached.
pub fn level_crossings(grid: &RateGrid, level: f64) -> Vec<(usize, Option<f64>)> {
    grid.ks
        .iter()
        .zip(&grid.rates)
        .map(|(&k, row)| {
            let crossing = row.iter().position(|&r| r >= level).map(|b| {
                if b == 0 {
                    grid.ms[0] as f64
                } else {
                    let (r0, r1) = (row[b - 1], row[b]);
                    let (m0, m1) = (grid.ms[b - 1] as f64, grid.ms[b] as f64);
                    m0 + (level - r0) / (r1 - r0) * (m1 - m0)
                }
            });
            (k, crossing)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContourFiles {
    pub svg: PathBuf,
    pub data: PathBuf,
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// Writes the contour plot as SVG at `path` and the polyline vertices as
/// `<stem>.contour.csv` next to it.
pub fn emit_contour(result: &GridResult, levels: &[f64], path: impl AsRef<Path>) -> Result<ContourFiles> {
    let grid = RateGrid::from_result(result)?;
    grid.require_2d()?;
    if let Some(l) = levels.iter().find(|l| !(0.0..=1.0).contains(*l)) {
        return Err(HarnessError::InvalidSpec(format!("contour level {l} outside [0, 1]")));
    }
    let lines: Vec<ContourLine> = levels.iter().flat_map(|&l| contour_lines(&grid, l)).collect();

    let svg_path = path.as_ref().to_path_buf();
    let stem = svg_path.file_stem().and_then(|s| s.to_str()).unwrap_or("contour");
    let data_path = svg_path.with_file_name(format!("{stem}.contour.csv"));

    let mut data = String::from("level,line,vertex,K,M\n");
    for (li, line) in lines.iter().enumerate() {
        for (vi, (k, m)) in line.points.iter().enumerate() {
            let _ = writeln!(data, "{},{li},{vi},{k},{m}", line.level);
        }
    }
    std::fs::write(&data_path, data)?;
    std::fs::write(&svg_path, render_svg(&grid, levels, &lines, result))?;
    Ok(ContourFiles { svg: svg_path, data: data_path })
}

fn render_svg(grid: &RateGrid, levels: &[f64], lines: &[ContourLine], result: &GridResult) -> String {
    let (w, h, left, right, top, bottom) = (640.0, 480.0, 70.0, 150.0, 40.0, 60.0);
    let (kmin, kmax) = (grid.ks[0] as f64, *grid.ks.last().unwrap() as f64);
    let (mmin, mmax) = (grid.ms[0] as f64, *grid.ms.last().unwrap() as f64);
    let px = |k: f64| left + (k - kmin) / (kmax - kmin) * (w - left - right);
    let py = |m: f64| h - bottom - (m - mmin) / (mmax - mmin) * (h - top - bottom);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">Success probability, N = {}, {} trials/cell</text>"#,
        (left + w - right) / 2.0,
        result.spec.n,
        result.spec.trials
    );
    let _ = writeln!(
        s,
        r#"<rect x="{left}" y="{top}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        w - left - right,
        h - top - bottom
    );
    for &k in &grid.ks {
        let x = px(k as f64);
        let _ = writeln!(s, r#"<line x1="{x}" y1="{}" x2="{x}" y2="{}" stroke="black"/>"#, h - bottom, h - bottom + 5.0);
        let _ = writeln!(s, r#"<text x="{x}" y="{}" text-anchor="middle">{k}</text>"#, h - bottom + 18.0);
    }
    let step = (grid.ms.len() / 6).max(1);
    for &m in grid.ms.iter().step_by(step) {
        let y = py(m as f64);
        let _ = writeln!(s, r#"<line x1="{}" y1="{y}" x2="{left}" y2="{y}" stroke="black"/>"#, left - 5.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{m}</text>"#, left - 8.0, y + 4.0);
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">K</text>"#, (left + w - right) / 2.0, h - 15.0);
    let _ = writeln!(
        s,
        r#"<text x="18" y="{}" text-anchor="middle" transform="rotate(-90 18 {})">M</text>"#,
        (top + h - bottom) / 2.0,
        (top + h - bottom) / 2.0
    );
    for line in lines {
        let color = levels.iter().position(|&l| l == line.level).map_or(PALETTE[0], |i| PALETTE[i % PALETTE.len()]);
        let pts: Vec<String> = line.points.iter().map(|&(k, m)| format!("{:.2},{:.2}", px(k), py(m))).collect();
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#, pts.join(" "));
    }
    for (i, level) in levels.iter().enumerate() {
        let y = top + 20.0 * i as f64 + 10.0;
        let x = w - right + 15.0;
        let color = PALETTE[i % PALETTE.len()];
        let _ = writeln!(s, r#"<line x1="{x}" y1="{y}" x2="{}" y2="{y}" stroke="{color}" stroke-width="2"/>"#, x + 25.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}">p = {level}</text>"#, x + 32.0, y + 4.0);
    }
    s.push_str("</svg>\n");
    s
}
