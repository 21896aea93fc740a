//! Declarative analysis configuration.
//!
//! A single TOML file; every command-line flag overrides the key of the same
//! name. Missing keys take the defaults below.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::Deserialize;

use matched_did::inference::{ScoreFunction, Sided};
use matched_did::matcher::{BalanceSpec, MatchObjective, NominalRule};
use matched_did::oracle::{BinaryWorld, LatentWorld, StudyTest};
use matched_did::OutcomeKind;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, ValueEnum, Default)]
#[serde(rename_all = "snake_case")]
pub enum KindChoice {
    #[default]
    Continuous,
    Binary,
}

impl From<KindChoice> for OutcomeKind {
    fn from(k: KindChoice) -> Self {
        match k {
            KindChoice::Continuous => OutcomeKind::Continuous,
            KindChoice::Binary => OutcomeKind::Binary,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, ValueEnum, Default)]
#[serde(rename_all = "snake_case")]
pub enum TestChoice {
    #[default]
    SignedRank,
    PermutationalT,
    Sate,
    #[value(name = "mcnemar")]
    #[serde(rename = "mcnemar")]
    McNemar,
}

impl TestChoice {
    pub fn study(self) -> StudyTest {
        match self {
            TestChoice::SignedRank => StudyTest::SignedRank,
            TestChoice::PermutationalT => StudyTest::PermutationalT,
            TestChoice::Sate => StudyTest::Sate,
            TestChoice::McNemar => StudyTest::McNemar,
        }
    }

    /// Score function for the rank and t tests; the SATE test uses the
    /// magnitudes for its estimate.
    pub fn score(self) -> ScoreFunction {
        match self {
            TestChoice::SignedRank => ScoreFunction::WilcoxonRank,
            _ => ScoreFunction::AbsoluteValue,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TestChoice::SignedRank => "signed_rank",
            TestChoice::PermutationalT => "permutational_t",
            TestChoice::Sate => "sate",
            TestChoice::McNemar => "mcnemar",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, ValueEnum, Default)]
#[serde(rename_all = "snake_case")]
pub enum SidedChoice {
    #[default]
    Greater,
    Less,
    TwoSided,
}

impl From<SidedChoice> for Sided {
    fn from(s: SidedChoice) -> Self {
        match s {
            SidedChoice::Greater => Sided::Greater,
            SidedChoice::Less => Sided::Less,
            SidedChoice::TwoSided => Sided::TwoSided,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, ValueEnum, Default)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveChoice {
    #[default]
    MaximizePairs,
    MinimizeTotalDistance,
}

impl From<ObjectiveChoice> for MatchObjective {
    fn from(o: ObjectiveChoice) -> Self {
        match o {
            ObjectiveChoice::MaximizePairs => MatchObjective::MaximizePairs,
            ObjectiveChoice::MinimizeTotalDistance => MatchObjective::MinimizeTotalDistance,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, ValueEnum, Default)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorChoice {
    #[default]
    Continuous,
    Binary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovariateKind {
    Continuous,
    Nominal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleName {
    Exact,
    FineBalance,
    NearFine,
    None,
}

/// Role of one covariate column.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CovariateRole {
    pub name: String,
    pub kind: CovariateKind,
    /// Nominal covariates only; defaults to `none`.
    pub rule: Option<RuleName>,
    /// Allowed deviation for `near_fine`.
    pub k: Option<usize>,
    /// Continuous covariates only: threshold on the absolute standardized
    /// difference after matching.
    pub max_std_diff: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeriodLabels {
    pub pre: String,
    pub post: String,
}

impl Default for PeriodLabels {
    fn default() -> Self {
        PeriodLabels {
            pre: "1".into(),
            post: "2".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateConfig {
    pub generator: GeneratorChoice,
    pub quads: usize,
    pub reps: usize,
    pub continuous: LatentWorld,
    pub binary: BinaryWorld,
    /// Gamma at which to compute estimate bounds per replication.
    pub estimate_gamma: Option<f64>,
    pub changepoint: bool,
    pub output: Option<PathBuf>,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig {
            generator: GeneratorChoice::Continuous,
            quads: 100,
            reps: 100,
            continuous: LatentWorld::default(),
            binary: BinaryWorld::default(),
            estimate_gamma: None,
            changepoint: false,
            output: None,
        }
    }
}

pub const DEFAULT_AMPLIFY_LAMBDAS: [f64; 7] = [1.25, 1.5, 2.0, 3.0, 4.0, 5.0, 10.0];

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisConfig {
    pub input: Option<PathBuf>,
    pub id_column: String,
    pub outcome: String,
    pub outcome_kind: KindChoice,
    pub period_column: String,
    pub periods: PeriodLabels,
    pub treatment_column: String,
    pub covariates: Vec<CovariateRole>,
    pub objective: ObjectiveChoice,
    pub caliper: Option<f64>,
    pub quadruples: Option<PathBuf>,
    pub test: TestChoice,
    pub alpha: f64,
    pub sided: SidedChoice,
    pub tau0: f64,
    pub gammas: Vec<f64>,
    /// `(lambda, delta)` pairs analysed through their equivalent gamma.
    pub lambda_delta: Vec<[f64; 2]>,
    pub amplify_lambdas: Vec<f64>,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub simulate: SimulateConfig,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            input: None,
            id_column: "id".into(),
            outcome: "y".into(),
            outcome_kind: KindChoice::Continuous,
            period_column: "period".into(),
            periods: PeriodLabels::default(),
            treatment_column: "treated".into(),
            covariates: Vec::new(),
            objective: ObjectiveChoice::MaximizePairs,
            caliper: None,
            quadruples: None,
            test: TestChoice::SignedRank,
            alpha: 0.05,
            sided: SidedChoice::Greater,
            tau0: 0.0,
            gammas: vec![1.0, 1.05, 1.1, 1.2, 1.5, 2.0],
            lambda_delta: Vec::new(),
            amplify_lambdas: DEFAULT_AMPLIFY_LAMBDAS.to_vec(),
            seed: 0,
            output_dir: PathBuf::from("out"),
            simulate: SimulateConfig::default(),
        }
    }
}

fn parse_pair(s: &str) -> Result<[f64; 2], String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected LAMBDA,DELTA, got {s:?}"))?;
    let f = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("{x:?}: {e}"));
    Ok([f(a)?, f(b)?])
}

/// Command-line overrides. Each flag replaces the config key of the same name.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// Configuration file (TOML).
    #[arg(long, short = 'c')]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub outcome: Option<String>,
    #[arg(long, value_enum)]
    pub outcome_kind: Option<KindChoice>,
    #[arg(long, value_enum)]
    pub objective: Option<ObjectiveChoice>,
    #[arg(long)]
    pub caliper: Option<f64>,
    /// Quadruple file written by `match`.
    #[arg(long)]
    pub quadruples: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub test: Option<TestChoice>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long, value_enum)]
    pub sided: Option<SidedChoice>,
    #[arg(long, allow_hyphen_values = true)]
    pub tau0: Option<f64>,
    /// Replaces the gamma grid; repeat for several values.
    #[arg(long = "gamma")]
    pub gammas: Vec<f64>,
    /// A `LAMBDA,DELTA` pair; repeatable.
    #[arg(long = "lambda-delta", value_parser = parse_pair)]
    pub lambda_delta: Vec<[f64; 2]>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
}

impl AnalysisConfig {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Usage(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Loads the file named by `--config` (or defaults) and applies the flags.
    pub fn resolve(o: &Overrides) -> CliResult<Self> {
        let mut c = match &o.config {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        c.apply(o);
        c.validate()?;
        Ok(c)
    }

    pub fn apply(&mut self, o: &Overrides) {
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = &o.$field {
                    self.$field = v.clone().into();
                }
            )*};
        }
        set!(outcome, outcome_kind, objective, test, alpha, sided, tau0, seed, output_dir);
        if o.input.is_some() {
            self.input = o.input.clone();
        }
        if o.caliper.is_some() {
            self.caliper = o.caliper;
        }
        if o.quadruples.is_some() {
            self.quadruples = o.quadruples.clone();
        }
        if !o.gammas.is_empty() {
            self.gammas = o.gammas.clone();
        }
        if !o.lambda_delta.is_empty() {
            self.lambda_delta = o.lambda_delta.clone();
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: String| Err(CliError::Usage(m));
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        if let Some(g) = self.gammas.iter().find(|g| !(**g >= 1.0) || !g.is_finite()) {
            return bad(format!("gamma values must be finite and >= 1, got {g}"));
        }
        if let Some([l, d]) = self.lambda_delta.iter().find(|p| !(p[0] >= 1.0 && p[1] >= 1.0)) {
            return bad(format!("lambda and delta must be >= 1, got ({l}, {d})"));
        }
        if !self.tau0.is_finite() {
            return bad(format!("tau0 must be finite, got {}", self.tau0));
        }
        if self.periods.pre == self.periods.post {
            return bad(format!("period labels must differ, both are {:?}", self.periods.pre));
        }
        if let Some(c) = self.caliper {
            if !(c > 0.0) {
                return bad(format!("caliper must be positive, got {c}"));
            }
        }
        let kind: OutcomeKind = self.outcome_kind.into();
        let binary_test = self.test == TestChoice::McNemar;
        if binary_test != (kind == OutcomeKind::Binary) {
            return bad(format!(
                "test {} does not apply to {} outcomes",
                self.test.name(),
                match kind {
                    OutcomeKind::Continuous => "continuous",
                    OutcomeKind::Binary => "binary",
                }
            ));
        }
        for c in &self.covariates {
            match c.kind {
                CovariateKind::Continuous if c.rule.is_some() || c.k.is_some() => {
                    return bad(format!("continuous covariate {} cannot take a nominal rule", c.name))
                }
                CovariateKind::Nominal if c.max_std_diff.is_some() => {
                    return bad(format!("nominal covariate {} cannot take max_std_diff", c.name))
                }
                CovariateKind::Nominal if (c.rule == Some(RuleName::NearFine)) != c.k.is_some() => {
                    return bad(format!("covariate {}: k is required with, and only with, near_fine", c.name))
                }
                _ => {}
            }
        }
        self.balance_spec().validate().map_err(CliError::from)
    }

    /// Names of every column the input file must carry.
    pub fn required_columns(&self) -> Vec<&str> {
        let mut cols = vec![
            self.id_column.as_str(),
            self.period_column.as_str(),
            self.treatment_column.as_str(),
            self.outcome.as_str(),
        ];
        cols.extend(self.covariates.iter().map(|c| c.name.as_str()));
        cols
    }

    pub fn balance_spec(&self) -> BalanceSpec {
        let mut spec = BalanceSpec::new(self.objective.into());
        for c in &self.covariates {
            spec = match c.kind {
                CovariateKind::Continuous => spec.continuous(&c.name, c.max_std_diff),
                CovariateKind::Nominal => {
                    let rule = match c.rule.unwrap_or(RuleName::None) {
                        RuleName::Exact => NominalRule::Exact,
                        RuleName::FineBalance => NominalRule::FineBalance,
                        RuleName::NearFine => NominalRule::NearFine(c.k.unwrap_or(0)),
                        RuleName::None => NominalRule::None,
                    };
                    spec.nominal(&c.name, rule)
                }
            };
        }
        if let Some(c) = self.caliper {
            spec = spec.with_caliper(c);
        }
        spec
    }

    /// The gamma grid, sorted and without duplicates.
    pub fn gamma_grid(&self) -> Vec<f64> {
        let mut g = self.gammas.clone();
        g.sort_by(f64::total_cmp);
        g.dedup();
        g
    }
}
