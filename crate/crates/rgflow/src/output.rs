//! Diagnostics emission: CSV time series, JSON run summary, binary field
//! snapshots with text sidecars, and self-contained SVG plots (fixed
//! 800x600 viewBox, polyline paths, no external tooling).

use crate::config::RunConfig;
use crate::error::Result;
use crate::flow::Trajectory;
use crate::validation::CheckResult;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

/// Column order is part of the file contract:
/// `t,volume,r,min_R,max_R,entropy_N,max_Q,residual_R,msq_integral`.
/// Optional columns are left empty when unavailable.
pub fn write_diagnostics_csv(path: &Path, traj: &Trajectory) -> Result<()> {
    let mut out = String::new();
    out.push_str("t,volume,r,min_R,max_R,entropy_N,max_Q,residual_R,msq_integral\n");
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for (_, d) in &traj.samples {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            d.t,
            d.volume,
            d.r,
            d.min_r,
            d.max_r,
            opt(d.entropy),
            opt(d.max_q),
            opt(d.residual_r),
            d.msq_integral
        )
        .expect("write to string");
    }
    std::fs::write(path, out)?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RunSummary {
    pub config: RunConfig,
    pub termination: String,
    pub final_time: f64,
    pub final_diagnostics: Option<crate::flow::DiagnosticsRecord>,
    pub battery: Vec<CheckResult>,
    pub wall_seconds: f64,
}

pub fn write_summary_json(path: &Path, summary: &RunSummary) -> Result<()> {
    let text = serde_json::to_string_pretty(summary)
        .map_err(|e| crate::error::Error::Config(format!("summary serialization: {e}")))?;
    std::fs::write(path, text)?;
    Ok(())
}

/// One snapshot pair per sample: `snapshot_NNNNNN.bin` holds the node values
/// of `u` as flat little-endian f64 in node order; the `.txt` sidecar holds
/// `node_count`, `kind` and `time`.
pub fn write_snapshots(dir: &Path, traj: &Trajectory) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for (idx, (state, _)) in traj.samples.iter().enumerate() {
        let bin_path = dir.join(format!("snapshot_{idx:06}.bin"));
        let mut file = std::io::BufWriter::new(std::fs::File::create(&bin_path)?);
        for &v in &state.u {
            file.write_all(&v.to_le_bytes())?;
        }
        file.flush()?;
        let header = format!(
            "node_count = {}\nkind = {}\ntime = {}\n",
            state.u.len(),
            traj.domain.kind().label(),
            state.t
        );
        std::fs::write(dir.join(format!("snapshot_{idx:06}.txt")), header)?;
    }
    Ok(())
}

struct Series<'a> {
    label: &'a str,
    points: Vec<(f64, f64)>,
}

/// Minimal line plot: axes, tick labels at the extremes, one polyline per
/// series with a small legend.
fn svg_line_plot(title: &str, series: &[Series]) -> String {
    const W: f64 = 800.0;
    const H: f64 = 600.0;
    const ML: f64 = 80.0; // left margin
    const MR: f64 = 30.0;
    const MT: f64 = 50.0;
    const MB: f64 = 60.0;
    let colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

    let mut svg = String::new();
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {W} {H}" font-family="monospace">"#
    )
    .unwrap();
    writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#).unwrap();
    writeln!(
        svg,
        r#"<text x="{}" y="30" text-anchor="middle" font-size="18">{}</text>"#,
        W / 2.0,
        title
    )
    .unwrap();

    let all: Vec<(f64, f64)> = series.iter().flat_map(|s| s.points.iter().copied()).collect();
    if all.is_empty() {
        writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="middle" font-size="14">no data</text>"#,
            W / 2.0,
            H / 2.0
        )
        .unwrap();
        svg.push_str("</svg>\n");
        return svg;
    }
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(x, y) in &all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if (y1 - y0).abs() < 1e-300 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    if (x1 - x0).abs() < 1e-300 {
        x1 = x0 + 1.0;
    }
    let sx = |x: f64| ML + (x - x0) / (x1 - x0) * (W - ML - MR);
    let sy = |y: f64| H - MB - (y - y0) / (y1 - y0) * (H - MT - MB);

    // Axes.
    writeln!(
        svg,
        r#"<line x1="{ML}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#,
        H - MB,
        W - MR,
        H - MB
    )
    .unwrap();
    writeln!(
        svg,
        r#"<line x1="{ML}" y1="{MT}" x2="{ML}" y2="{}" stroke="black"/>"#,
        H - MB
    )
    .unwrap();
    for (value, x_pos) in [(x0, ML), (x1, W - MR)] {
        writeln!(
            svg,
            r#"<text x="{x_pos}" y="{}" text-anchor="middle" font-size="12">{value:.4}</text>"#,
            H - MB + 20.0
        )
        .unwrap();
    }
    for (value, y_pos) in [(y0, H - MB), (y1, MT)] {
        writeln!(
            svg,
            r#"<text x="{}" y="{y_pos}" text-anchor="end" font-size="12">{value:.5}</text>"#,
            ML - 8.0
        )
        .unwrap();
    }
    writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="13">t</text>"#,
        (ML + W - MR) / 2.0,
        H - 15.0
    )
    .unwrap();

    for (i, s) in series.iter().enumerate() {
        if s.points.is_empty() {
            continue;
        }
        let color = colors[i % colors.len()];
        let mut path = String::new();
        for &(x, y) in &s.points {
            if !path.is_empty() {
                path.push(' ');
            }
            write!(path, "{:.2},{:.2}", sx(x), sy(y)).unwrap();
        }
        writeln!(
            svg,
            r#"<polyline points="{path}" fill="none" stroke="{color}" stroke-width="1.5"/>"#
        )
        .unwrap();
        writeln!(
            svg,
            r#"<text x="{}" y="{}" font-size="12" fill="{color}">{}</text>"#,
            W - MR - 150.0,
            MT + 18.0 * (i as f64 + 1.0),
            s.label
        )
        .unwrap();
    }
    svg.push_str("</svg>\n");
    svg
}

/// R extrema, volume, entropy and max Q versus time, one SVG per quantity.
pub fn write_svg_plots(dir: &Path, traj: &Trajectory) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let records: Vec<&crate::flow::DiagnosticsRecord> = traj.samples.iter().map(|(_, d)| d).collect();

    let extrema = svg_line_plot(
        "scalar curvature extrema",
        &[
            Series {
                label: "max R",
                points: records.iter().map(|d| (d.t, d.max_r)).collect(),
            },
            Series {
                label: "min R",
                points: records.iter().map(|d| (d.t, d.min_r)).collect(),
            },
        ],
    );
    std::fs::write(dir.join("r_extrema.svg"), extrema)?;

    let volume = svg_line_plot(
        "volume",
        &[Series {
            label: "Vol(t)",
            points: records.iter().map(|d| (d.t, d.volume)).collect(),
        }],
    );
    std::fs::write(dir.join("volume.svg"), volume)?;

    let entropy = svg_line_plot(
        "entropy N",
        &[Series {
            label: "N(t)",
            points: records
                .iter()
                .filter_map(|d| d.entropy.map(|n| (d.t, n)))
                .collect(),
        }],
    );
    std::fs::write(dir.join("entropy.svg"), entropy)?;

    let harnack = svg_line_plot(
        "max Harnack quantity Q",
        &[Series {
            label: "max Q(t)",
            points: records
                .iter()
                .filter_map(|d| d.max_q.map(|q| (d.t, q)))
                .collect(),
        }],
    );
    std::fs::write(dir.join("harnack_max_q.svg"), harnack)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curvature::FlowParams;
    use crate::flow;
    use crate::surface::SurfaceDomain;
    use std::sync::Arc;

    fn tiny_trajectory() -> Trajectory {
        let d = Arc::new(SurfaceDomain::build_sphere(1, 1.0).unwrap());
        let params = FlowParams {
            alpha_prime: 0.3,
            t_end: 0.05,
            sample_stride: 10,
            ..FlowParams::default()
        };
        flow::run(&d, vec![0.0; d.node_count()], &params).unwrap()
    }

    #[test]
    fn csv_columns_and_rows() {
        let traj = tiny_trajectory();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("diagnostics.csv");
        write_diagnostics_csv(&path, &traj).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "t,volume,r,min_R,max_R,entropy_N,max_Q,residual_R,msq_integral"
        );
        let rows: Vec<&str> = lines.collect();
        assert_eq!(rows.len(), traj.samples.len());
        assert_eq!(rows[0].split(',').count(), 9);
    }

    #[test]
    fn snapshots_round_trip() {
        let traj = tiny_trajectory();
        let dir = tempfile::tempdir().unwrap();
        write_snapshots(dir.path(), &traj).unwrap();
        let bin = std::fs::read(dir.path().join("snapshot_000000.bin")).unwrap();
        assert_eq!(bin.len(), traj.samples[0].0.u.len() * 8);
        let header = std::fs::read_to_string(dir.path().join("snapshot_000000.txt")).unwrap();
        assert!(header.contains("node_count = 42"));
        assert!(header.contains("kind = sphere"));
        assert!(header.contains("time = 0"));
        // Payload parses back through the field-file reader.
        let values =
            crate::config::read_field_file(&dir.path().join("snapshot_000000.bin"), 42).unwrap();
        assert_eq!(values, traj.samples[0].0.u);
    }

    #[test]
    fn svg_plots_are_wellformed() {
        let traj = tiny_trajectory();
        let dir = tempfile::tempdir().unwrap();
        write_svg_plots(dir.path(), &traj).unwrap();
        for name in ["r_extrema.svg", "volume.svg", "entropy.svg", "harnack_max_q.svg"] {
            let text = std::fs::read_to_string(dir.path().join(name)).unwrap();
            assert!(text.starts_with("<svg"), "{name}");
            assert!(text.contains("viewBox=\"0 0 800 600\""), "{name}");
            assert!(text.trim_end().ends_with("</svg>"), "{name}");
        }
    }
}
