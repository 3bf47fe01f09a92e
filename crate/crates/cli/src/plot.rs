//! Minimal static SVG plots — a field-modulus heatmap over `(x, t)` and
//! conserved-quantity drift curves.  Hand-rolled on purpose: the artifacts
//! are a few hundred shapes and need no plotting dependency.

use std::fmt::Write as _;
use std::path::Path;

use crate::artifacts;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 48.0;

/// Four-stop dark-to-bright color ramp.
fn ramp(v: f64) -> String {
    const STOPS: [(f64, f64, f64); 4] = [
        (13.0, 8.0, 45.0),
        (126.0, 3.0, 168.0),
        (225.0, 100.0, 98.0),
        (240.0, 249.0, 33.0),
    ];
    let v = v.clamp(0.0, 1.0) * (STOPS.len() - 1) as f64;
    let i = (v.floor() as usize).min(STOPS.len() - 2);
    let f = v - i as f64;
    let mix = |a: f64, b: f64| (a + f * (b - a)).round() as u8;
    let (r, g, b) = (
        mix(STOPS[i].0, STOPS[i + 1].0),
        mix(STOPS[i].1, STOPS[i + 1].1),
        mix(STOPS[i].2, STOPS[i + 1].2),
    );
    format!("#{r:02x}{g:02x}{b:02x}")
}

fn document(body: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"monospace\" font-size=\"11\">\n\
         <rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n{body}</svg>\n"
    )
}

fn axis_labels(body: &mut String, x_range: (f64, f64), y_range: (f64, f64), y_name: &str) {
    let bottom = HEIGHT - MARGIN;
    let _ = writeln!(
        body,
        "<text x=\"{MARGIN}\" y=\"{y}\" fill=\"black\">{:.3}</text>",
        x_range.0,
        y = bottom + 16.0
    );
    let _ = writeln!(
        body,
        "<text x=\"{x}\" y=\"{y}\" fill=\"black\" text-anchor=\"end\">{:.3}</text>",
        x_range.1,
        x = WIDTH - MARGIN,
        y = bottom + 16.0
    );
    let _ = writeln!(
        body,
        "<text x=\"{x}\" y=\"{y}\" fill=\"black\" text-anchor=\"end\">{label}</text>",
        x = MARGIN - 6.0,
        y = MARGIN + 4.0,
        label = format!("{y_name} {:.3}", y_range.1),
    );
    let _ = writeln!(
        body,
        "<text x=\"{x}\" y=\"{y}\" fill=\"black\" text-anchor=\"end\">{:.3}</text>",
        y_range.0,
        x = MARGIN - 6.0,
        y = HEIGHT - MARGIN
    );
}

/// Heatmap of `rows[t][x]` (already nonnegative, e.g. a modulus).  The
/// x-axis is downsampled to at most 256 columns by bin averaging.
pub fn heatmap(
    path: &Path,
    x_range: (f64, f64),
    t_range: (f64, f64),
    rows: &[Vec<f64>],
) -> anyhow::Result<()> {
    let columns = rows.first().map_or(0, Vec::len);
    anyhow::ensure!(
        columns > 0 && rows.iter().all(|r| r.len() == columns),
        "heatmap needs equally sized rows"
    );
    let shrink = columns.div_ceil(256);
    let cells: Vec<Vec<f64>> = rows
        .iter()
        .map(|row| {
            row.chunks(shrink)
                .map(|c| c.iter().sum::<f64>() / c.len() as f64)
                .collect()
        })
        .collect();
    let peak = cells
        .iter()
        .flatten()
        .cloned()
        .fold(f64::MIN_POSITIVE, f64::max);

    let (nx, nt) = (cells[0].len(), cells.len());
    let cell_w = (WIDTH - 2.0 * MARGIN) / nx as f64;
    let cell_h = (HEIGHT - 2.0 * MARGIN) / nt as f64;
    let mut body = String::new();
    for (ti, row) in cells.iter().enumerate() {
        // Time increases upward.
        let y = HEIGHT - MARGIN - (ti + 1) as f64 * cell_h;
        for (xi, &v) in row.iter().enumerate() {
            let x = MARGIN + xi as f64 * cell_w;
            let _ = writeln!(
                body,
                "<rect x=\"{x:.2}\" y=\"{y:.2}\" width=\"{w:.2}\" height=\"{h:.2}\" fill=\"{c}\"/>",
                w = cell_w + 0.5,
                h = cell_h + 0.5,
                c = ramp(v / peak),
            );
        }
    }
    axis_labels(&mut body, x_range, t_range, "t");
    artifacts::write_text(path, &document(&body))
}

/// Labeled curves on a shared time axis.
pub fn curves(
    path: &Path,
    times: &[f64],
    series: &[(String, Vec<f64>)],
    y_name: &str,
) -> anyhow::Result<()> {
    anyhow::ensure!(
        times.len() >= 2 && series.iter().all(|(_, v)| v.len() == times.len()),
        "curves need at least two samples per series"
    );
    let palette = ["#1b6ca8", "#c1403d", "#3a7d44", "#7d3ac1", "#b8860b"];
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in series.iter().flat_map(|(_, v)| v) {
        lo = lo.min(*v);
        hi = hi.max(*v);
    }
    if lo == hi {
        lo -= 1.0;
        hi += 1.0;
    }
    let (t0, t1) = (times[0], *times.last().expect("nonempty"));
    let map_x = |t: f64| MARGIN + (t - t0) / (t1 - t0) * (WIDTH - 2.0 * MARGIN);
    let map_y = |v: f64| HEIGHT - MARGIN - (v - lo) / (hi - lo) * (HEIGHT - 2.0 * MARGIN);

    let mut body = String::new();
    for (i, (label, values)) in series.iter().enumerate() {
        let color = palette[i % palette.len()];
        let points: Vec<String> = times
            .iter()
            .zip(values)
            .map(|(&t, &v)| format!("{:.2},{:.2}", map_x(t), map_y(v)))
            .collect();
        let _ = writeln!(
            body,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>",
            points.join(" ")
        );
        let _ = writeln!(
            body,
            "<text x=\"{x}\" y=\"{y}\" fill=\"{color}\">{label}</text>",
            x = MARGIN + 8.0,
            y = MARGIN + 16.0 * (i + 1) as f64,
        );
    }
    axis_labels(&mut body, (t0, t1), (lo, hi), y_name);
    artifacts::write_text(path, &document(&body))
}
