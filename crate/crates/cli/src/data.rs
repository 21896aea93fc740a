//! CSV input and output.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use matched_did::model::{build_quadruple, validate_dataset, MatchedPair, QuadrupleSet};
use matched_did::{CovariateValue, OutcomeKind, Period, UnitRecord};

use crate::config::{AnalysisConfig, CovariateKind};
use crate::error::{CliError, CliResult};

fn data_err(m: impl Into<String>) -> CliError {
    CliError::Data(m.into())
}

fn parse_treatment(raw: &str) -> Option<bool> {
    match raw.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" => Some(true),
        "0" | "false" | "no" => Some(false),
        _ => None,
    }
}

/// Reads unit records. Errors name the offending line and column.
pub fn read_records<R: Read>(reader: R, config: &AnalysisConfig) -> CliResult<Vec<UnitRecord>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| data_err(format!("cannot read header row: {e}")))?.clone();
    let col = |name: &str| -> CliResult<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| data_err(format!("missing column {name:?} in header row")))
    };
    for name in config.required_columns() {
        col(name)?;
    }
    let (id, period, treat, outcome) = (
        col(&config.id_column)?,
        col(&config.period_column)?,
        col(&config.treatment_column)?,
        col(&config.outcome)?,
    );
    let covs = config
        .covariates
        .iter()
        .map(|c| Ok((c, col(&c.name)?)))
        .collect::<CliResult<Vec<_>>>()?;

    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| data_err(format!("malformed CSV: {e}")))?;
        let line = row.position().map_or(0, |p| p.line());
        let field = |i: usize| row.get(i).unwrap_or("");
        let at = |what: String| data_err(format!("line {line}: {what}"));

        let p = match field(period) {
            l if l == config.periods.pre => Period::Pre,
            l if l == config.periods.post => Period::Post,
            l => {
                return Err(at(format!(
                    "period label {l:?} is neither {:?} nor {:?}",
                    config.periods.pre, config.periods.post
                )))
            }
        };
        let z = parse_treatment(field(treat))
            .ok_or_else(|| at(format!("column {:?}: expected 0/1, got {:?}", config.treatment_column, field(treat))))?;
        let y: f64 = field(outcome)
            .parse()
            .map_err(|_| at(format!("column {:?}: not a number: {:?}", config.outcome, field(outcome))))?;
        let mut rec = UnitRecord::new(field(id), p, z, y);
        for (c, i) in &covs {
            let raw = field(*i);
            rec = match c.kind {
                CovariateKind::Continuous => {
                    let v: f64 = raw
                        .parse()
                        .map_err(|_| at(format!("column {:?}: not a number: {raw:?}", c.name)))?;
                    rec.with_real(&c.name, v)
                }
                CovariateKind::Nominal => {
                    if raw.is_empty() {
                        return Err(at(format!("column {:?}: empty category", c.name)));
                    }
                    rec.with_category(&c.name, raw)
                }
            };
        }
        out.push(rec);
    }
    let report = validate_dataset(&out, config.outcome_kind.into());
    if !report.passed {
        let lines: Vec<String> = report
            .diagnostics
            .iter()
            .take(5)
            .map(|d| format!("record {} ({}): {}", d.index + 1, d.record_id, d.message))
            .collect();
        return Err(data_err(format!(
            "{} problem(s) in the input data: {}",
            report.diagnostics.len(),
            lines.join("; ")
        )));
    }
    Ok(out)
}

pub fn read_records_from(path: &Path, config: &AnalysisConfig) -> CliResult<Vec<UnitRecord>> {
    let f = std::fs::File::open(path).map_err(|e| data_err(format!("cannot open {}: {e}", path.display())))?;
    read_records(f, config).map_err(|e| match e {
        CliError::Data(m) => CliError::Data(format!("{}: {m}", path.display())),
        other => other,
    })
}

fn cell(v: Option<&CovariateValue>) -> String {
    match v {
        Some(CovariateValue::Real(x)) => x.to_string(),
        Some(CovariateValue::Category(c)) => c.clone(),
        None => String::new(),
    }
}

fn out_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Usage(format!("cannot write {}: {e}", path.display()))
}

/// One row per pair: ids, outcomes and both members' covariates.
pub fn write_pairs<W: Write>(w: W, pairs: &[MatchedPair], covariates: &[String]) -> csv::Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let mut header = vec!["pair".to_string(), "treated_id".into(), "control_id".into()];
    header.extend(["treated_outcome".into(), "control_outcome".into()]);
    for c in covariates {
        header.push(format!("treated_{c}"));
        header.push(format!("control_{c}"));
    }
    wtr.write_record(&header)?;
    for (i, p) in pairs.iter().enumerate() {
        let mut row = vec![
            (i + 1).to_string(),
            p.treated.id.clone(),
            p.control.id.clone(),
            p.treated.outcome.to_string(),
            p.control.outcome.to_string(),
        ];
        for c in covariates {
            row.push(cell(p.treated.covariates.get(c)));
            row.push(cell(p.control.covariates.get(c)));
        }
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

const QUAD_HEADER: [&str; 10] = [
    "quad",
    "pre_treated_id",
    "pre_control_id",
    "post_treated_id",
    "post_control_id",
    "pre_treated_outcome",
    "pre_control_outcome",
    "post_treated_outcome",
    "post_control_outcome",
    "d",
];

pub fn write_quadruples<W: Write>(w: W, quads: &QuadrupleSet) -> csv::Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(QUAD_HEADER)?;
    for (i, q) in quads.quads.iter().enumerate() {
        wtr.write_record([
            (i + 1).to_string(),
            q.pre.treated.id.clone(),
            q.pre.control.id.clone(),
            q.post.treated.id.clone(),
            q.post.control.id.clone(),
            q.pre.treated.outcome.to_string(),
            q.pre.control.outcome.to_string(),
            q.post.treated.outcome.to_string(),
            q.post.control.outcome.to_string(),
            q.d.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_file(path: &Path, f: impl FnOnce(&mut Vec<u8>) -> csv::Result<()>) -> CliResult<()> {
    let mut buf = Vec::new();
    f(&mut buf).map_err(|e| out_err(path, e))?;
    std::fs::write(path, buf).map_err(|e| out_err(path, e))
}

/// Reads a quadruple file written by `match`. Covariates are not carried.
pub fn read_quadruples<R: Read>(reader: R, kind: OutcomeKind) -> CliResult<QuadrupleSet> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| data_err(format!("cannot read header row: {e}")))?.clone();
    let idx: BTreeMap<&str, usize> = QUAD_HEADER[..9]
        .iter()
        .map(|&name| {
            headers
                .iter()
                .position(|h| h == name)
                .map(|i| (name, i))
                .ok_or_else(|| data_err(format!("missing column {name:?} in quadruple file")))
        })
        .collect::<CliResult<_>>()?;
    let mut quads = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| data_err(format!("malformed CSV: {e}")))?;
        let line = row.position().map_or(0, |p| p.line());
        let get = |name: &str| row.get(idx[name]).unwrap_or("");
        let num = |name: &str| -> CliResult<f64> {
            get(name)
                .parse()
                .map_err(|_| data_err(format!("line {line}: column {name:?}: not a number: {:?}", get(name))))
        };
        let unit = |period: Period, arm: &str| -> CliResult<UnitRecord> {
            let stage = if period == Period::Pre { "pre" } else { "post" };
            Ok(UnitRecord::new(
                get(&format!("{stage}_{arm}_id")),
                period,
                arm == "treated",
                num(&format!("{stage}_{arm}_outcome"))?,
            ))
        };
        let pair = |period: Period| -> CliResult<MatchedPair> {
            MatchedPair::new(period, unit(period, "treated")?, unit(period, "control")?)
                .map_err(|e| data_err(format!("line {line}: {e}")))
        };
        let q = build_quadruple(pair(Period::Pre)?, pair(Period::Post)?).map_err(|e| data_err(format!("line {line}: {e}")))?;
        quads.push(q);
    }
    if quads.is_empty() {
        return Err(data_err("the quadruple file has no rows"));
    }
    QuadrupleSet::new(quads, kind).map_err(CliError::from)
}

pub fn read_quadruples_from(path: &Path, kind: OutcomeKind) -> CliResult<QuadrupleSet> {
    let f = std::fs::File::open(path).map_err(|e| data_err(format!("cannot open {}: {e}", path.display())))?;
    read_quadruples(f, kind).map_err(|e| match e {
        CliError::Data(m) => CliError::Data(format!("{}: {m}", path.display())),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::CovariateRole;

    fn config() -> AnalysisConfig {
        AnalysisConfig {
            covariates: vec![
                CovariateRole {
                    name: "age".into(),
                    kind: CovariateKind::Continuous,
                    rule: None,
                    k: None,
                    max_std_diff: None,
                },
                CovariateRole {
                    name: "sex".into(),
                    kind: CovariateKind::Nominal,
                    rule: None,
                    k: None,
                    max_std_diff: None,
                },
            ],
            ..Default::default()
        }
    }

    const GOOD: &str = "id,period,treated,y,age,sex\na,1,1,2.5,30,f\nb,1,0,1.5,31,m\nc,2,1,3,40,f\nd,2,0,2,41,m\n";

    #[test]
    fn reads_records() {
        let recs = read_records(GOOD.as_bytes(), &config()).unwrap();
        assert_eq!(recs.len(), 4);
        assert_eq!(recs[2].period, 2);
        assert!(recs[0].is_treated() && !recs[1].is_treated());
        assert_eq!(recs[1].covariates["sex"], CovariateValue::Category("m".into()));
    }

    #[test]
    fn errors_name_line_and_column() {
        let e = read_records(GOOD.replace("41", "old").as_bytes(), &config()).unwrap_err();
        assert!(e.to_string().contains("line 5") && e.to_string().contains("age"), "{e}");
        let e = read_records(GOOD.replace(",y,", ",z,").as_bytes(), &config()).unwrap_err();
        assert!(e.to_string().contains("\"y\""), "{e}");
        let e = read_records(GOOD.replace("c,2", "c,7").as_bytes(), &config()).unwrap_err();
        assert!(e.to_string().contains("line 4"), "{e}");
    }

    #[test]
    fn quadruples_round_trip() {
        let recs = read_records(GOOD.as_bytes(), &config()).unwrap();
        let pre = MatchedPair::new(Period::Pre, recs[0].clone(), recs[1].clone()).unwrap();
        let post = MatchedPair::new(Period::Post, recs[2].clone(), recs[3].clone()).unwrap();
        let set = QuadrupleSet::new(vec![build_quadruple(pre, post).unwrap()], OutcomeKind::Continuous).unwrap();
        let mut buf = Vec::new();
        write_quadruples(&mut buf, &set).unwrap();
        let back = read_quadruples(buf.as_slice(), OutcomeKind::Continuous).unwrap();
        assert_eq!(back.contrasts(), set.contrasts());
        assert_eq!(back.quads[0].post.treated.id, "c");
    }
}
