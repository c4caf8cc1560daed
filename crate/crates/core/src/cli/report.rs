//! Text, CSV and SVG renderings of evaluation results.

use std::fmt::Write as _;

use crate::eval::EvalReport;
use crate::pipeline::SweepRow;

pub fn summary_csv(label: &str, r: &EvalReport) -> String {
    let mut s = String::from("pipeline,far,rank1_mean,rank1_std,vr_at_far_mean,vr_at_far_std,separation_mean,auc_mean,train_rank1_mean,train_separation_mean,train_auc_mean,reported_splits\n");
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
    let _ = writeln!(
        s,
        "{label},{},{},{},{},{},{},{},{},{},{},{}",
        r.far_target,
        r.rank1_mean,
        r.rank1_std,
        r.vr_at_far_mean,
        r.vr_at_far_std,
        r.separation_mean,
        r.auc_mean,
        opt(r.train_rank1_mean),
        opt(r.train_separation_mean),
        opt(r.train_auc_mean),
        r.reported.len()
    );
    s
}

pub fn per_split_csv(r: &EvalReport) -> String {
    let mut s = String::from(
        "split,reported,rank1,vr_at_far,separation,auc,train_rank1,train_separation,train_auc\n",
    );
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
    for (i, m) in r.per_split.iter().enumerate() {
        let _ = writeln!(
            s,
            "{i},{},{},{},{},{},{},{},{}",
            r.reported.contains(&i),
            m.rank1,
            m.vr_at_far,
            m.separation,
            m.auc,
            opt(m.train_rank1),
            opt(m.train_separation),
            opt(m.train_auc)
        );
    }
    s
}

pub fn roc_csv(r: &EvalReport) -> String {
    let mut s = String::from("threshold,far,vr\n");
    for p in &r.roc {
        let _ = writeln!(s, "{},{},{}", p.threshold, p.far, p.vr);
    }
    s
}

pub fn cmc_csv(r: &EvalReport) -> String {
    let mut s = String::from("rank,hit_rate\n");
    for (rank, h) in &r.cmc {
        let _ = writeln!(s, "{rank},{h}");
    }
    s
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from(
        "removed_k,rank1_mean,rank1_std,vr_at_far_mean,vr_at_far_std,separation_mean,auc_mean\n",
    );
    for row in rows {
        let r = &row.report;
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            row.removed_k,
            r.rank1_mean,
            r.rank1_std,
            r.vr_at_far_mean,
            r.vr_at_far_std,
            r.separation_mean,
            r.auc_mean
        );
    }
    s
}

pub fn report_text(label: &str, r: &EvalReport, sweep: Option<&[SweepRow]>) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "pipeline: {label}");
    let _ = writeln!(
        s,
        "reported splits: {} of {}",
        r.reported.len(),
        r.per_split.len()
    );
    let _ = writeln!(s, "rank-1: {:.4} +- {:.4}", r.rank1_mean, r.rank1_std);
    let _ = writeln!(
        s,
        "VR@FAR={}: {:.4} +- {:.4}",
        r.far_target, r.vr_at_far_mean, r.vr_at_far_std
    );
    let _ = writeln!(s, "separation (d'): {:.4}", r.separation_mean);
    let _ = writeln!(s, "ROC AUC: {:.4}", r.auc_mean);
    if let (Some(a), Some(b), Some(c)) = (
        r.train_rank1_mean,
        r.train_separation_mean,
        r.train_auc_mean,
    ) {
        let _ = writeln!(
            s,
            "train rank-1: {a:.4}, train d': {b:.4}, train AUC: {c:.4}"
        );
    }
    for (i, m) in r.per_split.iter().enumerate() {
        let tag = if r.reported.contains(&i) {
            ""
        } else {
            " (dev)"
        };
        let _ = writeln!(
            s,
            "  split {i}{tag}: rank-1 {:.4}, VR {:.4}, d' {:.4}, AUC {:.4}",
            m.rank1, m.vr_at_far, m.separation, m.auc
        );
    }
    if let Some(rows) = sweep {
        let _ = writeln!(s, "removed-k sweep:");
        for row in rows {
            let _ = writeln!(
                s,
                "  k={}: rank-1 {:.4}, VR {:.4}",
                row.removed_k, row.report.rank1_mean, row.report.vr_at_far_mean
            );
        }
    }
    s
}

/// Minimal line chart with axes in `[x0, x1] × [y0, y1]`.
pub fn line_svg(
    title: &str,
    x_label: &str,
    y_label: &str,
    points: &[(f64, f64)],
    x_log: bool,
) -> String {
    const W: f64 = 480.0;
    const H: f64 = 360.0;
    const M: f64 = 50.0;
    let tx = |x: f64| if x_log { x.max(1e-6).log10() } else { x };
    let xs: Vec<f64> = points
        .iter()
        .map(|p| tx(p.0))
        .filter(|x| x.is_finite())
        .collect();
    let (mut x0, mut x1) = xs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| {
            (a.min(x), b.max(x))
        });
    if !(x0.is_finite() && x1 > x0) {
        x0 = 0.0;
        x1 = 1.0;
    }
    let (y0, y1) = (0.0, 1.0);
    let px = |x: f64| M + (tx(x) - x0) / (x1 - x0) * (W - 2.0 * M);
    let py = |y: f64| H - M - (y.clamp(y0, y1) - y0) / (y1 - y0) * (H - 2.0 * M);
    let path: Vec<String> = points
        .iter()
        .filter(|p| tx(p.0).is_finite() && p.1.is_finite())
        .map(|p| format!("{:.2},{:.2}", px(p.0), py(p.1)))
        .collect();
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{title}</text>"#,
        W / 2.0
    );
    let _ = writeln!(
        s,
        r#"<path d="M{M},{M} L{M},{b} L{r},{b}" fill="none" stroke="black"/>"#,
        b = H - M,
        r = W - M
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">{x_label}</text>"#,
        W / 2.0,
        H - 12.0
    );
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" text-anchor="middle" font-size="12" transform="rotate(-90 14 {})">{y_label}</text>"#,
        H / 2.0,
        H / 2.0
    );
    let left = if x_log {
        format!("1e{x0:.1}")
    } else {
        format!("{x0}")
    };
    let right = if x_log {
        format!("1e{x1:.1}")
    } else {
        format!("{x1}")
    };
    let _ = writeln!(
        s,
        r#"<text x="{M}" y="{}" font-size="10">{left}</text>"#,
        H - M + 14.0
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="end" font-size="10">{right}</text>"#,
        W - M,
        H - M + 14.0
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="end" font-size="10">1</text>"#,
        M - 4.0,
        M + 4.0
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="end" font-size="10">0</text>"#,
        M - 4.0,
        H - M
    );
    if !path.is_empty() {
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="steelblue" stroke-width="2"/>"#,
            path.join(" ")
        );
    }
    s.push_str("</svg>\n");
    s
}
