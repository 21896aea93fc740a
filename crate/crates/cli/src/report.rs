//! Report structures (serialized to JSON) and their human-readable forms.
//!
//! JSON carries full precision; text output rounds to four significant
//! digits. The JSON layout is described by `schema/report.schema.json`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use matched_did::matcher::BalanceReport;

/// Rounds to four significant digits for display.
pub fn sig4(x: f64) -> String {
    if x.is_nan() {
        return "NA".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let mag = x.abs().log10().floor() as i32;
    if !(-4..6).contains(&mag) {
        return format!("{x:.3e}");
    }
    let s = format!("{:.*}", (3 - mag).max(0) as usize, x);
    // rounding can carry into a new leading digit (9.9996 -> 10.000)
    let carried: f64 = s.parse().unwrap_or(x);
    if carried.abs() >= 10f64.powi(mag + 1) && mag < 3 {
        format!("{:.*}", (2 - mag).max(0) as usize, x)
    } else {
        s
    }
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "-".into(), sig4)
}

#[derive(Debug, Clone, Serialize)]
pub struct Ineligible {
    pub count: usize,
    /// Reason to number of quadruples excluded for it.
    pub reasons: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct McNemarSummary {
    pub quadruples: usize,
    pub eligible: usize,
    /// Eligible quadruples with the event in the treated member after
    /// treatment (`s = +1`).
    pub statistic: usize,
    pub ineligible: Ineligible,
}

#[derive(Debug, Clone, Serialize)]
pub struct TestReport {
    pub report: &'static str,
    pub test: &'static str,
    pub method: String,
    pub sided: &'static str,
    pub alpha: f64,
    pub tau0: f64,
    pub quadruples: usize,
    pub n_effective: usize,
    pub statistic: f64,
    pub p_value: f64,
    pub hl_estimate: Option<f64>,
    pub ci: Option<[f64; 2]>,
    pub mcnemar: Option<McNemarSummary>,
}

impl TestReport {
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "test: {} ({})", self.test, self.method);
        let _ = writeln!(s, "alternative: {}, tau0 = {}", self.sided, sig4(self.tau0));
        let _ = writeln!(s, "quadruples: {} (effective {})", self.quadruples, self.n_effective);
        if let Some(m) = &self.mcnemar {
            let _ = writeln!(s, "eligible quadruples J = {}, McNemar T = {}", m.eligible, m.statistic);
            render_ineligible(&mut s, &m.ineligible);
        }
        let _ = writeln!(s, "statistic: {}", sig4(self.statistic));
        let _ = writeln!(s, "p-value: {}", sig4(self.p_value));
        if let Some(e) = self.hl_estimate {
            let _ = writeln!(s, "Hodges-Lehmann estimate: {}", sig4(e));
        }
        if let Some([lo, hi]) = self.ci {
            let _ = writeln!(s, "{}% confidence interval: [{}, {}]", sig4(100.0 * (1.0 - self.alpha)), sig4(lo), sig4(hi));
        }
        s
    }
}

pub fn render_ineligible(s: &mut String, i: &Ineligible) {
    let _ = writeln!(s, "ineligible quadruples: {}", i.count);
    for (reason, n) in &i.reasons {
        let _ = writeln!(s, "  {reason}: {n}");
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GammaRow {
    pub gamma: f64,
    /// Equivalent parameter of the classical paired analysis.
    pub gamma_squared: f64,
    pub p_upper: f64,
    pub p_lower: f64,
    pub estimate_lower: Option<f64>,
    pub estimate_upper: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TwoParamRow {
    pub lambda: f64,
    pub delta: f64,
    pub gamma: f64,
    pub p_upper: f64,
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ChangepointReport {
    /// Not significant even at gamma = 1.
    NoneAtOne { p_at_one: f64 },
    At { gamma: f64, gamma_squared: f64, p_value: f64 },
}

#[derive(Debug, Clone, Serialize)]
pub struct AmplificationEntry {
    pub lambda: f64,
    /// Delta on the differences-in-differences curve; absent when
    /// `lambda <= gamma`.
    pub delta_did: Option<f64>,
    /// Delta on the classical paired-design curve, for contrast.
    pub delta_paired: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AmplificationTable {
    pub gamma: f64,
    pub rows: Vec<AmplificationEntry>,
}

impl AmplificationTable {
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "amplification of gamma = {}:", sig4(self.gamma));
        let _ = writeln!(s, "  {:>10}  {:>10}  {:>10}", "lambda", "delta DID", "delta pair");
        for r in &self.rows {
            let _ = writeln!(s, "  {:>10}  {:>10}  {:>10}", sig4(r.lambda), opt(r.delta_did), opt(r.delta_paired));
        }
        s
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AmplifyReport {
    pub report: &'static str,
    pub tables: Vec<AmplificationTable>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SensReport {
    pub report: &'static str,
    pub test: &'static str,
    pub sided: &'static str,
    pub alpha: f64,
    pub tau0: f64,
    pub quadruples: usize,
    pub grid: Vec<GammaRow>,
    pub changepoint: ChangepointReport,
    pub two_param: Vec<TwoParamRow>,
    pub amplification: Vec<AmplificationTable>,
    pub mcnemar: Option<McNemarSummary>,
}

impl SensReport {
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "sensitivity analysis: {} ({}), tau0 = {}", self.test, self.sided, sig4(self.tau0));
        let _ = writeln!(s, "quadruples: {}", self.quadruples);
        if let Some(m) = &self.mcnemar {
            let _ = writeln!(s, "eligible quadruples J = {}, McNemar T = {}", m.eligible, m.statistic);
            render_ineligible(&mut s, &m.ineligible);
        }
        let _ = writeln!(
            s,
            "{:>8}  {:>10}  {:>10}  {:>10}  {:>10}  {:>10}",
            "gamma", "gamma^2", "p upper", "p lower", "est lower", "est upper"
        );
        for r in &self.grid {
            let _ = writeln!(
                s,
                "{:>8}  {:>10}  {:>10}  {:>10}  {:>10}  {:>10}",
                sig4(r.gamma),
                sig4(r.gamma_squared),
                sig4(r.p_upper),
                sig4(r.p_lower),
                opt(r.estimate_lower),
                opt(r.estimate_upper)
            );
        }
        match self.changepoint {
            ChangepointReport::NoneAtOne { p_at_one } => {
                let _ = writeln!(
                    s,
                    "changepoint: none; p = {} exceeds alpha = {} already at gamma = 1",
                    sig4(p_at_one),
                    sig4(self.alpha)
                );
            }
            ChangepointReport::At {
                gamma,
                gamma_squared,
                p_value,
            } => {
                let _ = writeln!(
                    s,
                    "changepoint: gamma* = {} (internal paired-scale gamma^2 = {}), worst-case p = {}",
                    sig4(gamma),
                    sig4(gamma_squared),
                    sig4(p_value)
                );
            }
        }
        if !self.two_param.is_empty() {
            let _ = writeln!(s, "{:>8}  {:>8}  {:>10}  {:>10}", "lambda", "delta", "gamma", "p upper");
            for r in &self.two_param {
                let _ = writeln!(
                    s,
                    "{:>8}  {:>8}  {:>10}  {:>10}",
                    sig4(r.lambda),
                    sig4(r.delta),
                    sig4(r.gamma),
                    sig4(r.p_upper)
                );
            }
        }
        for t in &self.amplification {
            s.push_str(&t.render());
        }
        s
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MatchCounts {
    pub treated: usize,
    pub controls: usize,
    pub pairs: usize,
    /// Treated units dropped by the matcher, by reason.
    pub removed: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MatchReport {
    pub report: &'static str,
    pub period_1: MatchCounts,
    pub period_2: MatchCounts,
    pub quadruples: usize,
    pub cross_period_removed: BTreeMap<String, usize>,
    /// Within-period reports for periods 1 and 2, then the cross-period
    /// report; each holds before- and after-matching columns.
    pub balance: Vec<BalanceReport>,
}

pub fn render_balance(r: &BalanceReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "balance, {}:", r.stage);
    let _ = writeln!(
        s,
        "  {:<24}  {:>14}  {:>10}  {:>14}  {:>10}",
        "covariate", "before std diff", "before p", "after std diff", "after p"
    );
    for row in &r.rows {
        let name = match &row.category {
            Some(c) => format!("{} [{c}]", row.covariate),
            None => row.covariate.clone(),
        };
        let _ = writeln!(
            s,
            "  {:<24}  {:>14}  {:>10}  {:>14}  {:>10}",
            name,
            sig4(row.before_std_diff),
            sig4(row.before_p),
            sig4(row.after_std_diff),
            sig4(row.after_p)
        );
    }
    for d in &r.diagnostics {
        let _ = writeln!(s, "  note: {d}");
    }
    s
}

impl MatchReport {
    pub fn render(&self) -> String {
        let mut s = String::new();
        for (label, c) in [("period 1", &self.period_1), ("period 2", &self.period_2)] {
            let _ = writeln!(s, "{label}: {} treated, {} controls, {} pairs", c.treated, c.controls, c.pairs);
            for (reason, n) in &c.removed {
                let _ = writeln!(s, "  removed for {reason}: {n}");
            }
        }
        let _ = writeln!(s, "cross-period: {} quadruples", self.quadruples);
        for (reason, n) in &self.cross_period_removed {
            let _ = writeln!(s, "  removed for {reason}: {n}");
        }
        for b in &self.balance {
            s.push_str(&render_balance(b));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn four_significant_digits() {
        assert_eq!(sig4(0.054_687_5), "0.05469");
        assert_eq!(sig4(2.645_751_311), "2.646");
        assert_eq!(sig4(1234.567), "1235");
        assert_eq!(sig4(-12.3456), "-12.35");
        assert_eq!(sig4(9.99996), "10.00");
        assert_eq!(sig4(1.0), "1.000");
        assert_eq!(sig4(0.0), "0");
        assert_eq!(sig4(1.5e-7), "1.500e-7");
        assert_eq!(sig4(f64::NAN), "NA");
    }
}
