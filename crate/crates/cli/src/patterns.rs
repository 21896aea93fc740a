//! Schematic panels of group medians before and after treatment.
//!
//! Four cases, each drawn on the raw scale and on a log scale. The medians are
//! illustrative. Case D uses `m, m*k, m*c, m*k*c` with powers of two, so its
//! base-2 log panel has a differences-in-differences contrast of exactly zero.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{CliError, CliResult};

/// Group medians for one case: `(control pre, control post, treated pre,
/// treated post)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Case {
    pub label: char,
    pub title: &'static str,
    pub control: [f64; 2],
    pub treated: [f64; 2],
}

const M: f64 = 8.0;
const K: f64 = 2.0;
const C: f64 = 4.0;

pub const CASES: [Case; 4] = [
    Case {
        label: 'A',
        title: "parallel, then a jump in the treated group",
        control: [10.0, 12.0],
        treated: [10.0, 16.0],
    },
    Case {
        label: 'B',
        title: "both groups move, the treated group more",
        control: [8.0, 12.0],
        treated: [9.0, 18.0],
    },
    Case {
        label: 'C',
        title: "offset levels, only the treated group moves",
        control: [6.0, 6.0],
        treated: [14.0, 20.0],
    },
    Case {
        label: 'D',
        title: "both groups move from offset levels",
        control: [M, M * K],
        treated: [M * C, M * K * C],
    },
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Raw,
    Log2,
}

impl Scale {
    fn apply(self, x: f64) -> f64 {
        match self {
            Scale::Raw => x,
            Scale::Log2 => x.log2(),
        }
    }

    fn name(self) -> &'static str {
        match self {
            Scale::Raw => "raw",
            Scale::Log2 => "log",
        }
    }
}

/// Plotted values `(control, treated)` of `case` on `scale`.
pub fn plotted(case: &Case, scale: Scale) -> ([f64; 2], [f64; 2]) {
    let f = |v: [f64; 2]| [scale.apply(v[0]), scale.apply(v[1])];
    (f(case.control), f(case.treated))
}

/// `(treated post - treated pre) - (control post - control pre)` of the
/// plotted values.
pub fn plotted_did(case: &Case, scale: Scale) -> f64 {
    let (c, t) = plotted(case, scale);
    (t[1] - t[0]) - (c[1] - c[0])
}

const W: f64 = 320.0;
const H: f64 = 240.0;
const LEFT: f64 = 50.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 40.0;

pub fn render(case: &Case, scale: Scale) -> String {
    let (c, t) = plotted(case, scale);
    let all = [c[0], c[1], t[0], t[1]];
    let lo = all.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = all.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let pad = ((hi - lo) * 0.15).max(0.5);
    let (lo, hi) = (lo - pad, hi + pad);
    let x = |period: usize| LEFT + (W - LEFT - RIGHT) * (0.2 + 0.6 * period as f64);
    let y = |v: f64| TOP + (H - TOP - BOTTOM) * (hi - v) / (hi - lo);
    let axis = match scale {
        Scale::Raw => "median outcome",
        Scale::Log2 => "log2 median outcome",
    };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" data-case="{}" data-scale="{}">"#,
        case.label,
        scale.name()
    );
    let _ = writeln!(
        s,
        "<metadata>illustrative schematic: built-in medians, not estimates from data</metadata>"
    );
    let _ = writeln!(s, "<title>Case {}: {} ({} scale, illustrative)</title>", case.label, case.title, scale.name());
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="20" font-size="12" text-anchor="middle">Case {} ({})</text>"#,
        W / 2.0,
        case.label,
        scale.name()
    );
    let (x0, x1, yb) = (LEFT, W - RIGHT, H - BOTTOM);
    let _ = writeln!(s, r#"<line x1="{x0}" y1="{yb}" x2="{x1}" y2="{yb}" stroke="black"/>"#);
    let _ = writeln!(s, r#"<line x1="{x0}" y1="{TOP}" x2="{x0}" y2="{yb}" stroke="black"/>"#);
    for (p, name) in [(0, "before"), (1, "after")] {
        let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="10" text-anchor="middle">{name}</text>"#, x(p), yb + 15.0);
    }
    let _ = writeln!(
        s,
        r#"<text x="12" y="{}" font-size="10" text-anchor="middle" transform="rotate(-90 12 {})">{axis}</text>"#,
        H / 2.0,
        H / 2.0
    );
    for (group, v, colour, dash) in [("control", c, "#1f77b4", "4 3"), ("treated", t, "#d62728", "none")] {
        let _ = writeln!(
            s,
            r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="{colour}" stroke-width="2" stroke-dasharray="{dash}"/>"#,
            x(0),
            y(v[0]),
            x(1),
            y(v[1])
        );
        for (p, period) in [(0, "pre"), (1, "post")] {
            let _ = writeln!(
                s,
                r#"<circle cx="{}" cy="{}" r="4" fill="{colour}" data-group="{group}" data-period="{period}" data-value="{}"/>"#,
                x(p),
                y(v[p]),
                v[p]
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="10" fill="{colour}">{group}</text>"#,
            x(1) + 6.0,
            y(v[1]) + 4.0
        );
    }
    s.push_str("</svg>\n");
    s
}

pub fn file_name(case: &Case, scale: Scale) -> String {
    format!("case_{}_{}.svg", case.label.to_ascii_lowercase(), scale.name())
}

/// Writes all eight panels into `dir`, creating it if needed.
pub fn write_all(dir: &Path) -> CliResult<Vec<PathBuf>> {
    let err = |p: &Path, e: std::io::Error| CliError::Usage(format!("cannot write {}: {e}", p.display()));
    std::fs::create_dir_all(dir).map_err(|e| err(dir, e))?;
    let mut out = Vec::new();
    for case in &CASES {
        for scale in [Scale::Raw, Scale::Log2] {
            let path = dir.join(file_name(case, scale));
            std::fs::write(&path, render(case, scale)).map_err(|e| err(&path, e))?;
            out.push(path);
        }
    }
    Ok(out)
}
