//! Report tables and the PCC-vs-photons plot.

use std::collections::BTreeMap;
use std::fmt::Write;

use lowlight::{MetricsRecord, NoiseLevel};

pub const SUMMARY_HEADER: &str = "noise_level\tmethod\tmean_pcc\tstd_pcc\tn";
pub const RECORDS_HEADER: &str = "example_id\tsplit\tnoise_level\tmethod\tpcc\tnpcc\tscale_factor";

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub noise_level: u8,
    pub method: String,
    pub mean_pcc: f64,
    pub std_pcc: f64,
    pub n: usize,
}

pub fn summary_tsv(rows: &[Summary]) -> String {
    let mut out = format!("{SUMMARY_HEADER}\n");
    for r in rows {
        writeln!(out, "{}\t{}\t{:.6}\t{:.6}\t{}", r.noise_level, r.method, r.mean_pcc, r.std_pcc, r.n).unwrap();
    }
    out
}

pub fn records_tsv(records: &[MetricsRecord]) -> String {
    let mut out = format!("{RECORDS_HEADER}\n");
    for r in records {
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{:.6}\t{:.6}\t{:.6}",
            r.example_id, r.split, r.noise_level, r.method, r.pcc, r.npcc, r.scale_factor
        )
        .unwrap();
    }
    out
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// Mean PCC with +-1 standard deviation bars against detected photons per
/// pixel on a log axis. The noiseless level has no photon count and is
/// left out.
pub fn pcc_plot(rows: &[Summary]) -> String {
    let (w, h) = (640.0, 420.0);
    let (left, right, top, bottom) = (70.0, 150.0, 30.0, 60.0);
    let (x0, x1) = (-1.0f64, 3.5f64);
    let y_min = rows
        .iter()
        .map(|r| r.mean_pcc - r.std_pcc)
        .fold(0.0f64, f64::min)
        .max(-1.0);
    let y_lo = (y_min * 5.0).floor() / 5.0;
    let y_hi = 1.0;
    let px = |log_n: f64| left + (log_n - x0) / (x1 - x0) * (w - left - right);
    let py = |v: f64| top + (y_hi - v) / (y_hi - y_lo) * (h - top - bottom);

    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#).unwrap();
    let (ax0, ax1, ay0, ay1) = (px(x0), px(x1), py(y_lo), py(y_hi));
    writeln!(
        s,
        r#"<rect x="{ax0:.1}" y="{ay1:.1}" width="{:.1}" height="{:.1}" fill="none" stroke="black"/>"#,
        ax1 - ax0,
        ay0 - ay1
    )
    .unwrap();
    for e in -1..=3 {
        let x = px(e as f64);
        writeln!(s, r#"<line x1="{x:.1}" y1="{ay0:.1}" x2="{x:.1}" y2="{:.1}" stroke="black"/>"#, ay0 + 5.0).unwrap();
        writeln!(s, r#"<text x="{x:.1}" y="{:.1}" text-anchor="middle">1e{e}</text>"#, ay0 + 20.0).unwrap();
    }
    let steps = ((y_hi - y_lo) / 0.2).round() as i32;
    for k in 0..=steps {
        let v = y_lo + 0.2 * k as f64;
        let y = py(v);
        writeln!(s, r##"<line x1="{ax0:.1}" y1="{y:.1}" x2="{ax1:.1}" y2="{y:.1}" stroke="#ddd"/>"##).unwrap();
        writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{v:.1}</text>"#, ax0 - 6.0, y + 4.0).unwrap();
    }
    writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">detected photons per pixel</text>"#,
        (ax0 + ax1) / 2.0,
        h - 15.0
    )
    .unwrap();
    writeln!(
        s,
        r#"<text x="18" y="{:.1}" text-anchor="middle" transform="rotate(-90 18 {:.1})">PCC</text>"#,
        (ay0 + ay1) / 2.0,
        (ay0 + ay1) / 2.0
    )
    .unwrap();

    let mut by_method: BTreeMap<&str, Vec<(f64, &Summary)>> = BTreeMap::new();
    for r in rows {
        if let Ok(level) = NoiseLevel::get(r.noise_level) {
            by_method.entry(&r.method).or_default().push((level.photon_count.log10(), r));
        }
    }
    for (i, (method, mut pts)) in by_method.into_iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let path: Vec<String> = pts
            .iter()
            .map(|(x, r)| format!("{:.1},{:.1}", px(*x), py(r.mean_pcc)))
            .collect();
        writeln!(s, r#"<polyline points="{}" fill="none" stroke="{color}"/>"#, path.join(" ")).unwrap();
        for (x, r) in &pts {
            let (cx, lo, hi) = (px(*x), py(r.mean_pcc - r.std_pcc), py(r.mean_pcc + r.std_pcc));
            writeln!(s, r#"<line x1="{cx:.1}" y1="{lo:.1}" x2="{cx:.1}" y2="{hi:.1}" stroke="{color}"/>"#).unwrap();
            writeln!(s, r#"<circle cx="{cx:.1}" cy="{:.1}" r="3" fill="{color}"/>"#, py(r.mean_pcc)).unwrap();
        }
        let ly = top + 15.0 + 18.0 * i as f64;
        let lx = w - right + 15.0;
        writeln!(s, r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}"/>"#, lx + 20.0).unwrap();
        writeln!(s, r#"<text x="{:.1}" y="{:.1}">{method}</text>"#, lx + 26.0, ly + 4.0).unwrap();
    }
    s.push_str("</svg>\n");
    s
}
