//! The six verbs.

use std::path::{Path, PathBuf};

use matched_did::binary::{self, EligibilityReport};
use matched_did::inference::{self, ScoreFunction, Sided};
use matched_did::matcher::{
    balance_report, cross_balance_report, cross_period_match_detailed, within_period_match_detailed, MatchResult,
};
use matched_did::model::QuadrupleSet;
use matched_did::oracle::{level_power_study, StudyAnalysis, StudyGenerator, StudySummary};
use matched_did::sensitivity::{self, Changepoint, Direction};
use matched_did::{Error as CoreError, OutcomeKind, Period, UnitRecord};

use crate::config::{AnalysisConfig, GeneratorChoice, TestChoice};
use crate::data;
use crate::error::{CliError, CliResult};
use crate::patterns;
use crate::report::*;

pub const PAIRS_PERIOD_1: &str = "pairs_period1.csv";
pub const PAIRS_PERIOD_2: &str = "pairs_period2.csv";
pub const QUADRUPLES: &str = "quadruples.csv";
pub const BALANCE: &str = "balance.json";
pub const TEST_REPORT: &str = "test_report.json";
pub const SENS_REPORT: &str = "sens_report.json";
pub const SIMULATION: &str = "simulation.csv";

/// Prefixes a stage name to an error while keeping its class.
fn during(stage: &'static str) -> impl Fn(CoreError) -> CliError {
    move |e| match CliError::from(e) {
        CliError::Usage(m) => CliError::Usage(format!("{stage}: {m}")),
        CliError::Infeasible(m) => CliError::Infeasible(format!("{stage}: {m}")),
        CliError::Data(m) => CliError::Data(format!("{stage}: {m}")),
    }
}

fn create_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Usage(format!("cannot create {}: {e}", dir.display())))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).expect("reports serialize");
    std::fs::write(path, text + "\n").map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))
}

fn counts(records: &[UnitRecord], m: &MatchResult) -> MatchCounts {
    MatchCounts {
        treated: records.iter().filter(|r| r.is_treated()).count(),
        controls: records.iter().filter(|r| !r.is_treated()).count(),
        pairs: m.pairs.len(),
        removed: m.removed.clone(),
    }
}

pub struct Artifacts<R> {
    pub report: R,
    pub files: Vec<PathBuf>,
}

/// Within-period matches, the cross-period match, and balance reports.
pub fn cmd_match(cfg: &AnalysisConfig) -> CliResult<Artifacts<MatchReport>> {
    let input = cfg
        .input
        .as_ref()
        .ok_or_else(|| CliError::Usage("no input file: set `input` in the config or pass --input".into()))?;
    let records = data::read_records_from(input, cfg)?;
    let spec = cfg.balance_spec();
    let split = |p: Period| -> Vec<UnitRecord> { records.iter().filter(|r| r.period() == Some(p)).cloned().collect() };
    let (pre, post) = (split(Period::Pre), split(Period::Post));

    let m1 = within_period_match_detailed(&pre, Period::Pre, &spec, cfg.seed).map_err(during("period 1 match"))?;
    let m2 = within_period_match_detailed(&post, Period::Post, &spec, cfg.seed).map_err(during("period 2 match"))?;
    let cross = cross_period_match_detailed(&m1.pairs, &m2.pairs, &spec, cfg.seed, cfg.outcome_kind.into())
        .map_err(during("cross-period match"))?;

    let b1 = balance_report(&pre, &m1.pairs, "period 1", cfg.seed);
    let b2 = balance_report(&post, &m2.pairs, "period 2", cfg.seed);
    let b3 = cross_balance_report(&m1.pairs, &m2.pairs, &cross.quads, &spec, cfg.seed).map_err(during("cross-period balance"))?;

    let report = MatchReport {
        report: "balance",
        period_1: counts(&pre, &m1),
        period_2: counts(&post, &m2),
        quadruples: cross.quads.len(),
        cross_period_removed: cross.removed.clone(),
        balance: vec![b1, b2, b3],
    };

    let dir = &cfg.output_dir;
    create_dir(dir)?;
    let names: Vec<String> = cfg.covariates.iter().map(|c| c.name.clone()).collect();
    let files = vec![dir.join(PAIRS_PERIOD_1), dir.join(PAIRS_PERIOD_2), dir.join(QUADRUPLES), dir.join(BALANCE)];
    data::write_file(&files[0], |w| data::write_pairs(w, &m1.pairs, &names))?;
    data::write_file(&files[1], |w| data::write_pairs(w, &m2.pairs, &names))?;
    data::write_file(&files[2], |w| data::write_quadruples(w, &cross.quads))?;
    write_json(&files[3], &report)?;
    Ok(Artifacts { report, files })
}

fn quadruple_path(cfg: &AnalysisConfig) -> PathBuf {
    cfg.quadruples.clone().unwrap_or_else(|| cfg.output_dir.join(QUADRUPLES))
}

fn load_quadruples(cfg: &AnalysisConfig) -> CliResult<QuadrupleSet> {
    data::read_quadruples_from(&quadruple_path(cfg), cfg.outcome_kind.into())
}

fn mcnemar_summary(quads: &QuadrupleSet, e: &EligibilityReport) -> McNemarSummary {
    McNemarSummary {
        quadruples: quads.len(),
        eligible: e.eligible.len(),
        statistic: binary::mcnemar_statistic(&e.eligible),
        ineligible: Ineligible {
            count: e.ineligible,
            reasons: e.reasons.iter().map(|(k, v)| (k.clone(), *v)).collect(),
        },
    }
}

/// Eligible quadruples, or a no-information error that lists why each
/// quadruple was excluded.
fn eligible_or_explain(quads: &QuadrupleSet) -> CliResult<(EligibilityReport, McNemarSummary)> {
    let e = binary::eligible_quadruples(quads)?;
    let summary = mcnemar_summary(quads, &e);
    if e.eligible.is_empty() {
        let hist: Vec<String> = summary.ineligible.reasons.iter().map(|(k, v)| format!("{k}: {v}")).collect();
        return Err(CliError::Data(format!(
            "no information: none of the {} quadruples is eligible for McNemar's test (ineligible by reason: {})",
            quads.len(),
            hist.join(", ")
        )));
    }
    Ok((e, summary))
}

fn sided_name(s: Sided) -> &'static str {
    match s {
        Sided::Greater => "greater",
        Sided::Less => "less",
        Sided::TwoSided => "two_sided",
    }
}

/// Point estimate paired with the test's score: the Hodges-Lehmann estimate
/// for signed ranks, the mean for magnitudes.
fn point_estimate(quads: &QuadrupleSet, score: &ScoreFunction) -> CliResult<f64> {
    Ok(match score {
        ScoreFunction::WilcoxonRank => inference::hodges_lehmann(quads)?,
        _ => sensitivity::estimate_bounds(quads, 1.0, score)?.lower,
    })
}

/// Test at gamma = 1 with an estimate and confidence interval.
pub fn cmd_test(cfg: &AnalysisConfig) -> CliResult<Artifacts<TestReport>> {
    let quads = load_quadruples(cfg)?;
    let sided: Sided = cfg.sided.into();
    let score = cfg.test.score();
    let (result, estimate, ci, mcnemar) = match cfg.test {
        TestChoice::McNemar => {
            let (e, summary) = eligible_or_explain(&quads)?;
            let r = binary::mcnemar_sensitivity_pvalue(&e.eligible, 1.0, Direction::Upper, sided)?;
            (r, None, None, Some(summary))
        }
        TestChoice::Sate => {
            let r = sensitivity::sate_pvalue(&quads, cfg.tau0, 1.0, Direction::Upper, sided)?;
            let ci = inference::invert_ci(&quads, cfg.alpha, &score)?;
            (r, Some(point_estimate(&quads, &score)?), Some([ci.lower, ci.upper]), None)
        }
        TestChoice::SignedRank | TestChoice::PermutationalT => {
            let r = inference::randomization_pvalue(&quads, cfg.tau0, &score, sided)?;
            let ci = inference::invert_ci(&quads, cfg.alpha, &score)?;
            (r, Some(point_estimate(&quads, &score)?), Some([ci.lower, ci.upper]), None)
        }
    };
    let report = TestReport {
        report: "test",
        test: cfg.test.name(),
        method: result.method.clone(),
        sided: sided_name(sided),
        alpha: cfg.alpha,
        tau0: cfg.tau0,
        quadruples: quads.len(),
        n_effective: result.n_effective,
        statistic: result.statistic,
        p_value: result.p_value.upper(),
        hl_estimate: estimate,
        ci,
        mcnemar,
    };
    create_dir(&cfg.output_dir)?;
    let path = cfg.output_dir.join(TEST_REPORT);
    write_json(&path, &report)?;
    Ok(Artifacts { report, files: vec![path] })
}

/// Worst-case upper or lower p-value at `gamma` for the configured test.
fn bound_pvalue(
    cfg: &AnalysisConfig,
    quads: &QuadrupleSet,
    eligible: Option<&EligibilityReport>,
    gamma: f64,
    direction: Direction,
) -> matched_did::Result<f64> {
    let sided = cfg.sided.into();
    let r = match (cfg.test, eligible) {
        (TestChoice::McNemar, Some(e)) => binary::mcnemar_sensitivity_pvalue(&e.eligible, gamma, direction, sided)?,
        (TestChoice::Sate, _) => sensitivity::sate_pvalue(quads, cfg.tau0, gamma, direction, sided)?,
        _ => sensitivity::worst_case_pvalue(quads, cfg.tau0, &cfg.test.score(), gamma, direction, sided)?,
    };
    Ok(r.p_value.upper())
}

pub fn amplification(gamma: f64, lambdas: &[f64]) -> CliResult<AmplificationTable> {
    let rows = sensitivity::amplification_table(gamma, lambdas)?;
    Ok(AmplificationTable {
        gamma,
        rows: rows
            .into_iter()
            .map(|r| AmplificationEntry {
                lambda: r.lambda,
                delta_did: r.delta_did,
                delta_paired: r.delta_paired,
            })
            .collect(),
    })
}

/// Sensitivity analysis over the gamma grid and any `(lambda, delta)` pairs.
pub fn cmd_sens(cfg: &AnalysisConfig) -> CliResult<Artifacts<SensReport>> {
    let quads = load_quadruples(cfg)?;
    let score = cfg.test.score();
    let (eligible, mcnemar) = match cfg.test {
        TestChoice::McNemar => {
            let (e, s) = eligible_or_explain(&quads)?;
            (Some(e), Some(s))
        }
        _ => (None, None),
    };
    let grid = cfg.gamma_grid();
    let with_estimates = matches!(cfg.test, TestChoice::SignedRank | TestChoice::PermutationalT);
    let mut rows = Vec::with_capacity(grid.len());
    for &g in &grid {
        let (lo, hi) = if with_estimates {
            let b = sensitivity::estimate_bounds(&quads, g, &score)?;
            (Some(b.lower), Some(b.upper))
        } else {
            (None, None)
        };
        rows.push(GammaRow {
            gamma: g,
            gamma_squared: g * g,
            p_upper: bound_pvalue(cfg, &quads, eligible.as_ref(), g, Direction::Upper)?,
            p_lower: bound_pvalue(cfg, &quads, eligible.as_ref(), g, Direction::Lower)?,
            estimate_lower: lo,
            estimate_upper: hi,
        });
    }
    let cp = sensitivity::changepoint_by(cfg.alpha, |g| bound_pvalue(cfg, &quads, eligible.as_ref(), g, Direction::Upper))?;
    let changepoint = match cp {
        Changepoint::NoneAtOne { p_at_one } => ChangepointReport::NoneAtOne { p_at_one },
        Changepoint::At {
            gamma,
            gamma_squared,
            p_value,
        } => ChangepointReport::At {
            gamma,
            gamma_squared,
            p_value,
        },
    };
    let two_param = cfg
        .lambda_delta
        .iter()
        .map(|&[lambda, delta]| {
            let gamma = sensitivity::did_gamma(lambda, delta)?;
            Ok(TwoParamRow {
                lambda,
                delta,
                gamma,
                p_upper: bound_pvalue(cfg, &quads, eligible.as_ref(), gamma, Direction::Upper)?,
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    let amplification = grid
        .iter()
        .filter(|&&g| g > 1.0)
        .map(|&g| amplification(g, &cfg.amplify_lambdas))
        .collect::<CliResult<Vec<_>>>()?;
    let report = SensReport {
        report: "sens",
        test: cfg.test.name(),
        sided: sided_name(cfg.sided.into()),
        alpha: cfg.alpha,
        tau0: cfg.tau0,
        quadruples: quads.len(),
        grid: rows,
        changepoint,
        two_param,
        amplification,
        mcnemar,
    };
    create_dir(&cfg.output_dir)?;
    let path = cfg.output_dir.join(SENS_REPORT);
    write_json(&path, &report)?;
    Ok(Artifacts { report, files: vec![path] })
}

/// Gamma to `(lambda, delta)` tables; no data involved.
pub fn cmd_amplify(gammas: &[f64], lambdas: &[f64]) -> CliResult<AmplifyReport> {
    if gammas.is_empty() {
        return Err(CliError::Usage("give at least one --gamma".into()));
    }
    let tables = gammas.iter().map(|&g| amplification(g, lambdas)).collect::<CliResult<Vec<_>>>()?;
    Ok(AmplifyReport { report: "amplify", tables })
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(String::new, |v| v.to_string())
}

pub fn simulation_csv(summary: &StudySummary) -> csv::Result<Vec<u8>> {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record([
        "replication",
        "n_effective",
        "statistic",
        "p_value",
        "reject",
        "estimate",
        "bound_lower",
        "bound_upper",
        "changepoint",
        "rejection_rate",
        "standard_error",
        "bound_coverage",
    ])?;
    for r in &summary.rows {
        wtr.write_record([
            r.replication.to_string(),
            r.n_effective.to_string(),
            r.statistic.to_string(),
            r.p_value.to_string(),
            (r.reject as u8).to_string(),
            fmt_opt(r.estimate),
            fmt_opt(r.bound_lower),
            fmt_opt(r.bound_upper),
            fmt_opt(r.changepoint),
            String::new(),
            String::new(),
            String::new(),
        ])?;
    }
    wtr.write_record([
        "summary".to_string(),
        String::new(),
        String::new(),
        String::new(),
        String::new(),
        fmt_opt(summary.mean_estimate),
        String::new(),
        String::new(),
        fmt_opt(summary.median_changepoint),
        summary.rejection_rate.to_string(),
        summary.standard_error.to_string(),
        fmt_opt(summary.bound_coverage),
    ])?;
    wtr.into_inner().map_err(|e| csv::Error::from(e.into_error()))
}

/// Monte Carlo level or power study; writes one CSV row per replication plus
/// a summary row.
pub fn cmd_simulate(cfg: &AnalysisConfig) -> CliResult<Artifacts<StudySummary>> {
    let sim = &cfg.simulate;
    if sim.reps == 0 {
        return Err(CliError::Usage("reps must be at least 1".into()));
    }
    if sim.quads == 0 {
        return Err(CliError::Usage("quads must be at least 1".into()));
    }
    let generator = match sim.generator {
        GeneratorChoice::Continuous => StudyGenerator::Continuous(sim.continuous),
        GeneratorChoice::Binary => StudyGenerator::Binary(sim.binary),
    };
    let analysis = StudyAnalysis {
        test: cfg.test.study(),
        alpha: cfg.alpha,
        gamma: cfg.gamma_grid().first().copied().unwrap_or(1.0),
        tau0: cfg.tau0,
        sided: cfg.sided.into(),
        estimate_gamma: sim.estimate_gamma,
        changepoint: sim.changepoint,
    };
    let kind = match sim.generator {
        GeneratorChoice::Continuous => OutcomeKind::Continuous,
        GeneratorChoice::Binary => OutcomeKind::Binary,
    };
    if (cfg.test == TestChoice::McNemar) != (kind == OutcomeKind::Binary) {
        return Err(CliError::Usage(format!("test {} does not apply to the {:?} generator", cfg.test.name(), kind)));
    }
    let summary = level_power_study(&generator, &analysis, sim.quads, sim.reps, cfg.seed)?;
    let path = sim.output.clone().unwrap_or_else(|| cfg.output_dir.join(SIMULATION));
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    let bytes = simulation_csv(&summary).map_err(|e| CliError::Usage(format!("cannot encode CSV: {e}")))?;
    std::fs::write(&path, bytes).map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))?;
    Ok(Artifacts {
        report: summary,
        files: vec![path],
    })
}

pub fn cmd_patterns(dir: &Path) -> CliResult<Vec<PathBuf>> {
    patterns::write_all(dir)
}
