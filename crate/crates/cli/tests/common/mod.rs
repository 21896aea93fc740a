#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub const REGIONS: [&str; 4] = ["north", "south", "east", "west"];

/// One input row.
#[derive(Debug, Clone)]
pub struct Row {
    pub id: String,
    pub period: u8,
    pub treated: bool,
    pub y: f64,
    pub age: f64,
    pub income: f64,
    pub region: String,
    pub sex: String,
}

/// Repeated cross-section with `nt` treated and `nc` controls per period.
/// Treated units are older and skewed towards the first regions; the
/// treatment adds `effect` to period-2 treated outcomes.
pub fn synthetic(nt: usize, nc: usize, effect: f64, seed: u64) -> Vec<Row> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 1.0).unwrap();
    let mut rows = Vec::new();
    for period in [1u8, 2] {
        for (treated, n) in [(true, nt), (false, nc)] {
            for i in 0..n {
                let age = 40.0 + 10.0 * noise.sample(&mut rng) + if treated { 3.0 } else { 0.0 };
                let income = 30.0 + 5.0 * noise.sample(&mut rng);
                let u: f64 = rng.random();
                let region = if treated {
                    match u {
                        u if u < 0.4 => 0,
                        u if u < 0.7 => 1,
                        u if u < 0.9 => 2,
                        _ => 3,
                    }
                } else {
                    (u * 4.0) as usize
                };
                let sex = if rng.random::<bool>() { "1" } else { "0" };
                let y = 0.05 * age + 0.1 * income + region as f64 * 0.5
                    + if treated && period == 2 { effect } else { 0.0 }
                    + noise.sample(&mut rng);
                rows.push(Row {
                    id: format!("{}{period}-{i}", if treated { "t" } else { "c" }),
                    period,
                    treated,
                    y,
                    age,
                    income,
                    region: REGIONS[region].into(),
                    sex: sex.into(),
                });
            }
        }
    }
    rows
}

pub fn write_csv(path: &Path, rows: &[Row]) {
    let mut w = csv::Writer::from_path(path).unwrap();
    w.write_record(["id", "period", "treated", "y", "age", "income", "region", "sex"]).unwrap();
    for r in rows {
        w.write_record([
            r.id.clone(),
            r.period.to_string(),
            (r.treated as u8).to_string(),
            r.y.to_string(),
            r.age.to_string(),
            r.income.to_string(),
            r.region.clone(),
            r.sex.clone(),
        ])
        .unwrap();
    }
    w.flush().unwrap();
}

/// Config for [`synthetic`] data: thresholds on both continuous covariates,
/// fine balance on region, exact matching on sex.
pub fn config_text(input: &Path, out: &Path) -> String {
    format!(
        r#"
input = "{}"
output_dir = "{}"
seed = 11

[[covariates]]
name = "age"
kind = "continuous"
max_std_diff = 0.1

[[covariates]]
name = "income"
kind = "continuous"
max_std_diff = 0.1

[[covariates]]
name = "region"
kind = "nominal"
rule = "fine_balance"

[[covariates]]
name = "sex"
kind = "nominal"
rule = "exact"
"#,
        input.display(),
        out.display()
    )
}

pub fn bin() -> PathBuf {
    PathBuf::from(env!("CARGO_BIN_EXE_matched-did"))
}

pub fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().expect("binary runs")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Rows of a CSV file as header-keyed maps.
pub fn read_csv(path: &Path) -> Vec<BTreeMap<String, String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let headers = r.headers().unwrap().clone();
    r.records()
        .map(|rec| {
            let rec = rec.unwrap();
            headers.iter().map(String::from).zip(rec.iter().map(String::from)).collect()
        })
        .collect()
}

/// `data-value` of the circle for `group` and `period` in an SVG panel.
pub fn plotted_value(svg: &str, group: &str, period: &str) -> f64 {
    let key = format!(r#"data-group="{group}" data-period="{period}" data-value=""#);
    let start = svg.find(&key).unwrap_or_else(|| panic!("no point for {group}/{period}")) + key.len();
    let end = start + svg[start..].find('"').unwrap();
    svg[start..end].parse().unwrap()
}
