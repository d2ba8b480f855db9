//! Static SVG plots of region predictors: sampled poses and 2-sigma ellipses
//! of each mixture component, in the (dx, dy) plane of the pair.

use std::collections::BTreeMap;
use std::fmt::Write;

use rcr_core::rcr::{RcrPredictor, TypePair};
use rcr_core::rng;

const PANEL: f64 = 320.0;
const PAD: f64 = 28.0;
const COLORS: [&str; 6] = ["#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// Axes of the 2-sigma ellipse of a 2x2 covariance: `(rx, ry, angle_deg)`.
pub fn ellipse_2sigma(sxx: f64, sxy: f64, syy: f64) -> (f64, f64, f64) {
    let tr = 0.5 * (sxx + syy);
    let det = (0.25 * (sxx - syy).powi(2) + sxy * sxy).sqrt();
    let (l1, l2) = ((tr + det).max(0.0), (tr - det).max(0.0));
    let angle = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    (2.0 * l1.sqrt(), 2.0 * l2.sqrt(), angle.to_degrees())
}

struct Frame {
    lo: (f64, f64),
    scale: f64,
    origin: (f64, f64),
}

impl Frame {
    fn map(&self, x: f64, y: f64) -> (f64, f64) {
        (self.origin.0 + PAD + (x - self.lo.0) * self.scale, self.origin.1 + PANEL - PAD - (y - self.lo.1) * self.scale)
    }
}

/// One panel per type pair, left to right; `samples` draws per predictor.
pub fn render(predictors: &BTreeMap<TypePair, Vec<RcrPredictor>>, samples: usize, seed: u64) -> String {
    let n = predictors.len();
    let (w, h) = (PANEL * n as f64, if n == 0 { 0.0 } else { PANEL });
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    for (pi, (pair, ps)) in predictors.iter().enumerate() {
        let drawn: Vec<Vec<[f64; 4]>> = ps
            .iter()
            .map(|p| {
                let mut r = rng::stream(seed, &[pi as u64, p.index as u64]);
                (0..samples).map(|_| p.sample(&mut r)).collect()
            })
            .collect();
        let mut lo = (f64::INFINITY, f64::INFINITY);
        let mut hi = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        let mut grow = |x: f64, y: f64| {
            lo = (lo.0.min(x), lo.1.min(y));
            hi = (hi.0.max(x), hi.1.max(y));
        };
        for p in ps {
            for g in &p.mixture.components {
                let (rx, ry, _) = ellipse_2sigma(g.cov[0], g.cov[1], g.cov[5]);
                let r = rx.max(ry);
                grow(g.mean[0] - r, g.mean[1] - r);
                grow(g.mean[0] + r, g.mean[1] + r);
            }
        }
        for x in drawn.iter().flatten() {
            grow(x[0], x[1]);
        }
        if !lo.0.is_finite() {
            lo = (-1.0, -1.0);
            hi = (1.0, 1.0);
        }
        let span = (hi.0 - lo.0).max(hi.1 - lo.1).max(1e-6);
        let frame = Frame { lo, scale: (PANEL - 2.0 * PAD) / span, origin: (PANEL * pi as f64, 0.0) };
        let ox = frame.origin.0;
        let _ = writeln!(
            out,
            r##"<rect x="{}" y="{PAD}" width="{}" height="{}" fill="none" stroke="#888"/>"##,
            ox + PAD,
            PANEL - 2.0 * PAD,
            PANEL - 2.0 * PAD
        );
        let _ = writeln!(out, r#"<text x="{}" y="18">{} / {} (dx, dy)</text>"#, ox + PAD, pair.0, pair.1);
        for (k, (p, pts)) in ps.iter().zip(&drawn).enumerate() {
            let c = COLORS[k % COLORS.len()];
            for x in pts {
                let (sx, sy) = frame.map(x[0], x[1]);
                let _ = writeln!(out, r#"<circle cx="{sx:.2}" cy="{sy:.2}" r="1.5" fill="{c}" fill-opacity="0.5"/>"#);
            }
            for g in &p.mixture.components {
                let (rx, ry, ang) = ellipse_2sigma(g.cov[0], g.cov[1], g.cov[5]);
                let (cx, cy) = frame.map(g.mean[0], g.mean[1]);
                let _ = writeln!(
                    out,
                    r#"<ellipse cx="{cx:.2}" cy="{cy:.2}" rx="{:.2}" ry="{:.2}" transform="rotate({:.2} {cx:.2} {cy:.2})" fill="none" stroke="{c}" stroke-width="1.5"/>"#,
                    (rx * frame.scale).max(0.5),
                    (ry * frame.scale).max(0.5),
                    -ang
                );
            }
            let _ = writeln!(
                out,
                r#"<text x="{}" y="{}" fill="{c}">{}_{}_{}</text>"#,
                ox + PAD + 4.0,
                PAD + 14.0 * (k + 1) as f64,
                pair.0,
                pair.1,
                p.index
            );
        }
    }
    out.push_str("</svg>\n");
    out
}
