//! Three-stage matching: treated to control within each period, then
//! pre-period pairs to post-period pairs.
//!
//! Every stage runs the same solver. Candidate edges join treated and control
//! units in the same exact-match stratum; costs are rank-based Mahalanobis
//! distances. A min-cost flow routes each control through a node for its
//! fine-balance category, whose capacity equals the number of treated units in
//! that category, so a full matching is finely balanced. Near-fine categories
//! get the same capacities plus a penalized overflow.
//!
//! Under [`MatchObjective::MaximizePairs`] treated units that cannot be matched
//! or that break a declared balance threshold are removed one at a time and
//! the flow is solved again; fine-balance categories with more treated units
//! than controls are trimmed before the first solve. The result is the
//! largest pairing this repair loop finds, which is not guaranteed to be the
//! largest feasible pairing.
//! [`MatchObjective::MinimizeTotalDistance`] never drops units and reports
//! infeasibility instead.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{build_quadruple, CovariateValue, MatchedPair, OutcomeKind, Period, QuadrupleSet, UnitRecord};

mod balance;
mod distance;
mod flow;

pub use balance::{pooled_sd, standardized_difference, BalanceReport, BalanceRow, PERMUTATION_DRAWS};

use distance::RankMahalanobis;
use flow::FlowGraph;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

/// How a nominal covariate is handled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum NominalRule {
    Exact,
    FineBalance,
    /// Matched treated and control histograms may differ by at most `k`
    /// units, counted as total variation distance times group size
    /// (`sum |n_T(c) - n_C(c)| / 2`).
    NearFine(usize),
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum MatchObjective {
    #[default]
    MaximizePairs,
    MinimizeTotalDistance,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct ContinuousRule {
    pub name: String,
    /// Bound on the absolute standardized difference after matching.
    pub max_std_diff: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct NominalSpec {
    pub name: String,
    pub rule: NominalRule,
}

/// Declared matching constraints. Continuous covariates enter the distance;
/// nominal covariates are constrained by their rule.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct BalanceSpec {
    pub continuous: Vec<ContinuousRule>,
    pub nominal: Vec<NominalSpec>,
    /// Bound on the pair distance. A hard exclusion when maximizing pairs,
    /// a large additive penalty when minimizing total distance.
    pub caliper: Option<f64>,
    pub objective: MatchObjective,
}

impl BalanceSpec {
    pub fn new(objective: MatchObjective) -> Self {
        BalanceSpec {
            objective,
            ..Default::default()
        }
    }

    pub fn continuous(mut self, name: &str, max_std_diff: Option<f64>) -> Self {
        self.continuous.push(ContinuousRule {
            name: name.into(),
            max_std_diff,
        });
        self
    }

    pub fn nominal(mut self, name: &str, rule: NominalRule) -> Self {
        self.nominal.push(NominalSpec { name: name.into(), rule });
        self
    }

    pub fn with_caliper(mut self, caliper: f64) -> Self {
        self.caliper = Some(caliper);
        self
    }

    pub fn rule_for(&self, name: &str) -> Option<NominalRule> {
        self.nominal.iter().find(|n| n.name == name).map(|n| n.rule)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeMap::new();
        for name in self.continuous.iter().map(|c| &c.name).chain(self.nominal.iter().map(|n| &n.name)) {
            if seen.insert(name.clone(), ()).is_some() {
                return Err(Error::Spec(format!("covariate '{name}' is declared more than once")));
            }
        }
        for c in &self.continuous {
            if let Some(t) = c.max_std_diff {
                if !(t >= 0.0) {
                    return Err(Error::Spec(format!("threshold for '{}' must be >= 0, got {t}", c.name)));
                }
            }
        }
        if let Some(c) = self.caliper {
            if !(c >= 0.0) {
                return Err(Error::Spec(format!("caliper must be >= 0, got {c}")));
            }
        }
        Ok(())
    }

    fn names(&self, rule: fn(NominalRule) -> bool) -> Vec<&str> {
        self.nominal.iter().filter(|n| rule(n.rule)).map(|n| n.name.as_str()).collect()
    }

    fn exact_names(&self) -> Vec<&str> {
        self.names(|r| r == NominalRule::Exact)
    }

    fn fine_names(&self) -> Vec<&str> {
        self.names(|r| r == NominalRule::FineBalance)
    }

    fn near_rules(&self) -> Vec<(&str, usize)> {
        self.nominal
            .iter()
            .filter_map(|n| match n.rule {
                NominalRule::NearFine(k) => Some((n.name.as_str(), k)),
                _ => None,
            })
            .collect()
    }
}

/// A matched pair reduced to pair-level covariates for the cross-period
/// match.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct PairSummary {
    pub pair: MatchedPair,
    /// Within-pair means for real covariates; shared labels for exactly
    /// matched nominal covariates; `"a+b"` (sorted) for fine-balanced
    /// nominal covariates whose labels differ within the pair.
    pub covariates: BTreeMap<String, CovariateValue>,
}

/// Summarizes pairs for cross-period matching. Nominal covariates must be
/// declared exact, fine or near-fine: a mean is not a usable summary for them.
pub fn pair_summaries(pairs: &[MatchedPair], spec: &BalanceSpec) -> Result<Vec<PairSummary>> {
    if pairs.is_empty() {
        return Err(Error::Structural("no pairs to summarize".into()));
    }
    pairs
        .iter()
        .map(|p| {
            let mut covariates = BTreeMap::new();
            for (name, tv) in &p.treated.covariates {
                let cv = p.control.covariates.get(name).ok_or_else(|| {
                    Error::Structural(format!("pair {} lacks covariate '{name}' on its control", p.label()))
                })?;
                let summary = match (tv, cv) {
                    (CovariateValue::Real(a), CovariateValue::Real(b)) => CovariateValue::Real(0.5 * (a + b)),
                    (CovariateValue::Category(a), CovariateValue::Category(b)) => match spec.rule_for(name) {
                        Some(NominalRule::Exact) if a == b => CovariateValue::Category(a.clone()),
                        Some(NominalRule::Exact) => {
                            return Err(Error::Structural(format!(
                                "pair {} is not exactly matched on '{name}' ({a} vs {b})",
                                p.label()
                            )))
                        }
                        Some(NominalRule::FineBalance | NominalRule::NearFine(_)) => {
                            let label = if a == b {
                                a.clone()
                            } else if a < b {
                                format!("{a}+{b}")
                            } else {
                                format!("{b}+{a}")
                            };
                            CovariateValue::Category(label)
                        }
                        _ => {
                            return Err(Error::Spec(format!(
                                "nominal covariate '{name}' has no pair-level summary; declare it exact or fine_balance (or drop it from the covariate list)"
                            )))
                        }
                    },
                    _ => {
                        return Err(Error::Structural(format!(
                            "covariate '{name}' has mixed kinds within pair {}",
                            p.label()
                        )))
                    }
                };
                covariates.insert(name.clone(), summary);
            }
            Ok(PairSummary {
                pair: p.clone(),
                covariates,
            })
        })
        .collect()
}

/// A unit as seen by the solver.
struct Item {
    real: Vec<f64>,
    exact: String,
    fine: String,
    near: Vec<String>,
}

impl Item {
    fn near_key(&self) -> String {
        self.near.join("\u{1f}")
    }
}

fn extract(id: &str, covs: &BTreeMap<String, CovariateValue>, spec: &BalanceSpec) -> Result<Item> {
    let real = spec
        .continuous
        .iter()
        .map(|c| match covs.get(&c.name) {
            Some(CovariateValue::Real(x)) => Ok(*x),
            Some(_) => Err(Error::Spec(format!("covariate '{}' on {id} is not real-valued", c.name))),
            None => Err(Error::Spec(format!("covariate '{}' is missing on {id}", c.name))),
        })
        .collect::<Result<Vec<f64>>>()?;
    let label = |name: &str| -> Result<String> {
        match covs.get(name) {
            Some(CovariateValue::Category(s)) => Ok(s.clone()),
            Some(CovariateValue::Real(x)) => Ok(format!("{x}")),
            None => Err(Error::Spec(format!("covariate '{name}' is missing on {id}"))),
        }
    };
    let join = |names: Vec<&str>| -> Result<String> {
        Ok(names.into_iter().map(label).collect::<Result<Vec<_>>>()?.join("\u{1f}"))
    };
    Ok(Item {
        real,
        exact: join(spec.exact_names())?,
        fine: join(spec.fine_names())?,
        near: spec.near_rules().into_iter().map(|(n, _)| label(n)).collect::<Result<_>>()?,
    })
}

#[derive(Debug, Clone, PartialEq)]
struct Solution {
    pairs: Vec<(usize, usize)>,
    removed: BTreeMap<String, usize>,
    total_distance: f64,
}

const INITIAL_CANDIDATES: usize = 30;

fn binding_name(spec: &BalanceSpec, kind: &str) -> String {
    match kind {
        "exact" => format!("exact match on {}", spec.exact_names().join(", ")),
        "fine" => format!("fine balance on {}", spec.fine_names().join(", ")),
        "near" => format!(
            "near-fine balance on {}",
            spec.near_rules().iter().map(|(n, k)| format!("{n} (k = {k})")).collect::<Vec<_>>().join(", ")
        ),
        "caliper" => format!("caliper {}", spec.caliper.unwrap_or(f64::INFINITY)),
        other => other.to_string(),
    }
}

fn solve(treated: &[Item], control: &[Item], spec: &BalanceSpec, seed: u64) -> Result<Solution> {
    let (nt, nc) = (treated.len(), control.len());
    if nt == 0 || nc == 0 {
        return Err(Error::Structural(format!(
            "matching needs at least one treated and one control unit (got {nt} and {nc})"
        )));
    }
    let maximize = spec.objective == MatchObjective::MaximizePairs;
    let columns: Vec<Vec<f64>> = (0..spec.continuous.len())
        .map(|k| treated.iter().chain(control).map(|it| it.real[k]).collect())
        .collect();
    let scales: Vec<f64> = (0..spec.continuous.len())
        .map(|k| pooled_sd(&columns[k][..nt], &columns[k][nt..]))
        .collect();
    let metric = RankMahalanobis::new(&columns, nt + nc);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shuffled = |n: usize, rng: &mut ChaCha8Rng| {
        let mut v: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = rng.random_range(0..=i);
            v.swap(i, j);
        }
        v
    };
    let t_order = shuffled(nt, &mut rng);
    let c_perm = shuffled(nc, &mut rng);
    let mut priority = vec![0usize; nc];
    for (k, &c) in c_perm.iter().enumerate() {
        priority[c] = k;
    }

    // candidate controls per treated unit, nearest first
    let mut stratum_has_control = vec![false; nt];
    let mut candidates: Vec<Vec<(f64, bool, usize)>> = Vec::with_capacity(nt);
    for (t, item) in treated.iter().enumerate() {
        let mut list = Vec::new();
        for (c, other) in control.iter().enumerate() {
            if other.exact != item.exact {
                continue;
            }
            stratum_has_control[t] = true;
            let d = metric.distance(t, nt + c);
            let outside = spec.caliper.is_some_and(|cal| d > cal);
            if outside && maximize {
                continue;
            }
            list.push((d, outside, c));
        }
        list.sort_by(|a, b| a.0.total_cmp(&b.0).then(priority[a.2].cmp(&priority[b.2])));
        candidates.push(list);
    }
    if candidates.iter().all(Vec::is_empty) {
        let kind = if stratum_has_control.iter().any(|&x| x) { "caliper" } else { "exact" };
        return Err(Error::Infeasible {
            constraint: binding_name(spec, kind),
            detail: "no treated unit has an admissible control".into(),
        });
    }
    let max_d = candidates.iter().flatten().map(|e| e.0).fold(0.0, f64::max);
    let caliper_penalty = (nt as f64 + 1.0) * (max_d + 1.0);
    let edge_cost = |e: &(f64, bool, usize)| e.0 + if e.1 { caliper_penalty } else { 0.0 };
    let overflow_cost = 2.0 * (nt as f64 + 1.0) * (max_d + 1.0 + caliper_penalty);

    let near_rules = spec.near_rules();
    let has_near = !near_rules.is_empty();
    let has_fine = !spec.fine_names().is_empty();
    let thresholds: Vec<(usize, f64)> = spec
        .continuous
        .iter()
        .enumerate()
        .filter_map(|(k, c)| c.max_std_diff.map(|t| (k, t)))
        .collect();

    let mut active = vec![true; nt];
    let mut removed: BTreeMap<String, usize> = BTreeMap::new();
    let remove = |t: usize, why: String, active: &mut Vec<bool>, removed: &mut BTreeMap<String, usize>| {
        active[t] = false;
        *removed.entry(why).or_insert(0) += 1;
    };
    // A finely balanced pairing keeps at most as many treated units in each
    // category as there are controls in it. Trim the excess up front, least
    // matchable first, instead of discovering it one flow at a time.
    if maximize && has_fine {
        let mut room: BTreeMap<&str, usize> = BTreeMap::new();
        for c in control {
            *room.entry(c.fine.as_str()).or_insert(0) += 1;
        }
        let mut by_cat: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for &t in &t_order {
            by_cat.entry(treated[t].fine.as_str()).or_default().push(t);
        }
        let nearest = |t: usize| candidates[t].first().map_or(f64::INFINITY, |e| e.0);
        for (cat, mut ts) in by_cat {
            let keep = room.get(cat).copied().unwrap_or(0);
            if ts.len() > keep {
                // stable sort keeps the shuffled order among ties
                ts.sort_by(|&a, &b| nearest(b).total_cmp(&nearest(a)));
                for &t in &ts[..ts.len() - keep] {
                    remove(t, binding_name(spec, "fine"), &mut active, &mut removed);
                }
            }
        }
    }

    // Edges offered to the flow: the `width` nearest controls overall plus
    // the `width` nearest within each control fine-balance category.
    let offered = |t: usize, width: usize| -> Vec<(f64, bool, usize)> {
        let mut per_cat: BTreeMap<&str, usize> = BTreeMap::new();
        candidates[t]
            .iter()
            .enumerate()
            .filter(|(rank, e)| {
                let n = per_cat.entry(control[e.2].fine.as_str()).or_insert(0);
                *n += 1;
                *rank < width || *n <= width
            })
            .map(|(_, e)| *e)
            .collect()
    };
    let mut width = INITIAL_CANDIDATES;

    loop {
        let act: Vec<usize> = t_order.iter().copied().filter(|&t| active[t]).collect();
        if act.is_empty() {
            let (why, _) = removed
                .iter()
                .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
                .map(|(k, v)| (k.clone(), *v))
                .unwrap_or_else(|| ("pairing".into(), 0));
            return Err(Error::Infeasible {
                constraint: why,
                detail: format!("every treated unit was removed ({removed:?})"),
            });
        }

        // node layout: 0 source, 1 sink, treated, used controls, cells, fine groups
        let mut next = 2usize;
        let mut alloc = || {
            next += 1;
            next - 1
        };
        let t_node: BTreeMap<usize, usize> = act.iter().map(|&t| (t, alloc())).collect();
        let edges: BTreeMap<usize, Vec<(f64, bool, usize)>> = act.iter().map(|&t| (t, offered(t, width))).collect();
        let mut c_node: BTreeMap<usize, usize> = BTreeMap::new();
        for e in edges.values().flatten() {
            c_node.entry(e.2).or_insert_with(&mut alloc);
        }
        let mut t_cell: BTreeMap<(String, String), i64> = BTreeMap::new();
        let mut t_fine: BTreeMap<String, i64> = BTreeMap::new();
        for &t in &act {
            *t_cell.entry((treated[t].fine.clone(), treated[t].near_key())).or_insert(0) += 1;
            *t_fine.entry(treated[t].fine.clone()).or_insert(0) += 1;
        }
        let mut cell_node: BTreeMap<(String, String), usize> = BTreeMap::new();
        let mut fine_node: BTreeMap<String, usize> = BTreeMap::new();
        for &c in c_node.keys() {
            let key = (control[c].fine.clone(), control[c].near_key());
            if !cell_node.contains_key(&key) {
                let id = alloc();
                cell_node.insert(key.clone(), id);
            }
            if !fine_node.contains_key(&key.0) {
                let id = alloc();
                fine_node.insert(key.0, id);
            }
        }
        let nodes = next;
        let mut g = FlowGraph::new(nodes);
        let n_act = act.len() as i64;
        let mut arcs: Vec<(usize, usize, usize)> = Vec::new();
        for &t in &act {
            g.add_edge(0, t_node[&t], 1, 0.0);
            for e in &edges[&t] {
                arcs.push((t, e.2, g.add_edge(t_node[&t], c_node[&e.2], 1, edge_cost(e))));
            }
        }
        for (&c, &node) in &c_node {
            let key = (control[c].fine.clone(), control[c].near_key());
            g.add_edge(node, cell_node[&key], 1, 0.0);
        }
        for (key, &node) in &cell_node {
            let base = if has_near { t_cell.get(key).copied().unwrap_or(0) } else { n_act };
            if base > 0 {
                g.add_edge(node, fine_node[&key.0], base, 0.0);
            }
            if has_near {
                g.add_edge(node, fine_node[&key.0], n_act, overflow_cost);
            }
        }
        for (key, &node) in &fine_node {
            let cap = if has_fine { t_fine.get(key).copied().unwrap_or(0) } else { n_act };
            if cap > 0 {
                g.add_edge(node, 1, cap, 0.0);
            }
        }
        let flow = g.min_cost_max_flow(0, 1);

        let longest = act.iter().map(|&t| candidates[t].len()).max().unwrap_or(0);
        if flow < n_act && width < longest {
            width *= 2;
            continue;
        }

        let mut partner: BTreeMap<usize, (usize, f64)> = BTreeMap::new();
        for &(t, c, id) in &arcs {
            if g.flow(id) == 1 {
                let d = candidates[t].iter().find(|e| e.2 == c).map(|e| e.0).unwrap_or(0.0);
                partner.insert(t, (c, d));
            }
        }

        // unmatched treated units
        let unmatched: Vec<usize> = act.iter().copied().filter(|t| !partner.contains_key(t)).collect();
        if !unmatched.is_empty() {
            let reason = |t: usize| -> String {
                if candidates[t].is_empty() {
                    binding_name(spec, if stratum_has_control[t] { "caliper" } else { "exact" })
                } else if has_fine {
                    binding_name(spec, "fine")
                } else if has_near {
                    binding_name(spec, "near")
                } else {
                    "pairing (not enough controls)".into()
                }
            };
            if !maximize {
                return Err(Error::Infeasible {
                    constraint: reason(unmatched[0]),
                    detail: format!("{} of {} treated units cannot be matched", unmatched.len(), act.len()),
                });
            }
            for t in unmatched {
                let why = reason(t);
                remove(t, why, &mut active, &mut removed);
            }
            continue;
        }

        // near-fine deviation per covariate
        let mut near_violation = None;
        for (j, (name, k)) in near_rules.iter().enumerate() {
            let mut diff: BTreeMap<&str, i64> = BTreeMap::new();
            for (&t, &(c, _)) in &partner {
                *diff.entry(treated[t].near[j].as_str()).or_insert(0) += 1;
                *diff.entry(control[c].near[j].as_str()).or_insert(0) -= 1;
            }
            let dev: i64 = diff.values().map(|v| v.abs()).sum::<i64>() / 2;
            if dev > *k as i64 {
                near_violation = Some((j, name.to_string(), dev, *k, diff.into_iter().map(|(a, b)| (a.to_string(), b)).collect::<BTreeMap<String, i64>>()));
                break;
            }
        }
        if let Some((j, name, dev, k, diff)) = near_violation {
            if !maximize {
                return Err(Error::Infeasible {
                    constraint: binding_name(spec, "near"),
                    detail: format!("deviation {dev} on {name} exceeds {k}"),
                });
            }
            // drop a pair whose treated category is short of controls and whose
            // control category is in excess, farthest first
            let pick = partner
                .iter()
                .filter(|(&t, &(c, _))| diff[&treated[t].near[j]] > 0 && diff[&control[c].near[j]] < 0)
                .max_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
                .or_else(|| partner.iter().max_by(|a, b| a.1 .1.total_cmp(&b.1 .1)))
                .map(|(&t, _)| t)
                .unwrap_or(act[0]);
            remove(pick, binding_name(spec, "near"), &mut active, &mut removed);
            continue;
        }

        // standardized-difference thresholds
        let mut std_violation = None;
        for &(k, limit) in &thresholds {
            let a: Vec<f64> = partner.keys().map(|&t| treated[t].real[k]).collect();
            let b: Vec<f64> = partner.values().map(|&(c, _)| control[c].real[k]).collect();
            let sd = standardized_difference(&a, &b, scales[k]);
            if sd.abs() > limit {
                std_violation = Some((k, sd, limit));
                break;
            }
        }
        if let Some((k, sd, limit)) = std_violation {
            let name = &spec.continuous[k].name;
            let why = format!("standardized difference on {name} <= {limit}");
            if !maximize {
                return Err(Error::Infeasible {
                    constraint: why,
                    detail: format!("matched standardized difference is {sd}"),
                });
            }
            let s = sd.signum();
            let pick = partner
                .iter()
                .max_by(|x, y| {
                    let cx = s * (treated[*x.0].real[k] - control[x.1 .0].real[k]);
                    let cy = s * (treated[*y.0].real[k] - control[y.1 .0].real[k]);
                    cx.total_cmp(&cy)
                })
                .map(|(&t, _)| t)
                .unwrap_or(act[0]);
            remove(pick, why, &mut active, &mut removed);
            continue;
        }

        let mut pairs: Vec<(usize, usize)> = partner.iter().map(|(&t, &(c, _))| (t, c)).collect();
        pairs.sort_unstable();
        let total_distance = partner.values().map(|v| v.1).sum();
        return Ok(Solution {
            pairs,
            removed,
            total_distance,
        });
    }
}

/// Pairs plus an account of the treated units the repair loop removed.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct MatchResult {
    pub pairs: Vec<MatchedPair>,
    /// Removal reason to number of treated units removed for it.
    pub removed: BTreeMap<String, usize>,
    pub total_distance: f64,
}

pub fn within_period_match_detailed(
    records: &[UnitRecord],
    period: Period,
    spec: &BalanceSpec,
    seed: u64,
) -> Result<MatchResult> {
    spec.validate()?;
    if let Some(r) = records.iter().find(|r| r.period != period.index()) {
        return Err(Error::Structural(format!(
            "record {} is from period {}, expected {}",
            r.id,
            r.period,
            period.index()
        )));
    }
    let (t_recs, c_recs): (Vec<&UnitRecord>, Vec<&UnitRecord>) = records.iter().partition(|r| r.is_treated());
    let items = |rs: &[&UnitRecord]| rs.iter().map(|r| extract(&r.id, &r.covariates, spec)).collect::<Result<Vec<_>>>();
    let sol = solve(&items(&t_recs)?, &items(&c_recs)?, spec, seed)?;
    let pairs = sol
        .pairs
        .iter()
        .map(|&(t, c)| MatchedPair::new(period, t_recs[t].clone(), c_recs[c].clone()))
        .collect::<Result<Vec<_>>>()?;
    Ok(MatchResult {
        pairs,
        removed: sol.removed,
        total_distance: sol.total_distance,
    })
}

/// Matches treated to control units within one period.
pub fn within_period_match(records: &[UnitRecord], period: Period, spec: &BalanceSpec, seed: u64) -> Result<Vec<MatchedPair>> {
    within_period_match_detailed(records, period, spec, seed).map(|r| r.pairs)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct CrossMatchResult {
    pub quads: QuadrupleSet,
    pub removed: BTreeMap<String, usize>,
    pub total_distance: f64,
}

fn summary_schema(s: &PairSummary) -> Vec<(String, bool)> {
    s.covariates
        .iter()
        .map(|(k, v)| (k.clone(), matches!(v, CovariateValue::Real(_))))
        .collect()
}

pub fn cross_period_match_detailed(
    pre_pairs: &[MatchedPair],
    post_pairs: &[MatchedPair],
    spec: &BalanceSpec,
    seed: u64,
    kind: OutcomeKind,
) -> Result<CrossMatchResult> {
    spec.validate()?;
    if let Some(p) = pre_pairs.iter().find(|p| p.period != Period::Pre) {
        return Err(Error::Structural(format!("pair {} is not a pre-period pair", p.label())));
    }
    if let Some(p) = post_pairs.iter().find(|p| p.period != Period::Post) {
        return Err(Error::Structural(format!("pair {} is not a post-period pair", p.label())));
    }
    let pre = pair_summaries(pre_pairs, spec)?;
    let post = pair_summaries(post_pairs, spec)?;
    let schema = summary_schema(&pre[0]);
    if let Some(bad) = pre.iter().chain(&post).find(|s| summary_schema(s) != schema) {
        return Err(Error::Structural(format!(
            "pair {} has a different covariate schema from the other pairs",
            bad.pair.label()
        )));
    }
    let items = |ss: &[PairSummary]| {
        ss.iter()
            .map(|s| extract(&s.pair.label(), &s.covariates, spec))
            .collect::<Result<Vec<_>>>()
    };
    let pre_is_treated = pre.len() <= post.len();
    let (a, b) = if pre_is_treated { (&pre, &post) } else { (&post, &pre) };
    let sol = solve(&items(a)?, &items(b)?, spec, seed)?;
    let quads = sol
        .pairs
        .iter()
        .map(|&(i, j)| {
            let (p, q) = if pre_is_treated { (i, j) } else { (j, i) };
            build_quadruple(pre[p].pair.clone(), post[q].pair.clone())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CrossMatchResult {
        quads: QuadrupleSet::new(quads, kind)?,
        removed: sol.removed,
        total_distance: sol.total_distance,
    })
}

/// Matches pre-period pairs to post-period pairs on pair summaries.
pub fn cross_period_match(
    pre_pairs: &[MatchedPair],
    post_pairs: &[MatchedPair],
    spec: &BalanceSpec,
    seed: u64,
    kind: OutcomeKind,
) -> Result<QuadrupleSet> {
    cross_period_match_detailed(pre_pairs, post_pairs, spec, seed, kind).map(|r| r.quads)
}

fn record_covs<'a>(rs: &[&'a UnitRecord]) -> Vec<&'a BTreeMap<String, CovariateValue>> {
    rs.iter().map(|r| &r.covariates).collect()
}

fn summary_covs(ss: &[PairSummary]) -> Vec<&BTreeMap<String, CovariateValue>> {
    ss.iter().map(|s| &s.covariates).collect()
}

/// Balance of treated against control units before matching (all `records`)
/// and after (the units in `pairs`).
pub fn balance_report(records: &[UnitRecord], pairs: &[MatchedPair], stage: &str, seed: u64) -> BalanceReport {
    let (t, c): (Vec<&UnitRecord>, Vec<&UnitRecord>) = records.iter().partition(|r| r.is_treated());
    let at: Vec<_> = pairs.iter().map(|p| &p.treated.covariates).collect();
    let ac: Vec<_> = pairs.iter().map(|p| &p.control.covariates).collect();
    balance::build_report(stage, (&record_covs(&t), &record_covs(&c)), (&at, &ac), seed)
}

/// Balance of pre-period against post-period pair summaries, before the
/// cross-period match (all pairs) and after (the pairs in `quads`).
pub fn cross_balance_report(
    pre_pairs: &[MatchedPair],
    post_pairs: &[MatchedPair],
    quads: &QuadrupleSet,
    spec: &BalanceSpec,
    seed: u64,
) -> Result<BalanceReport> {
    let pre = pair_summaries(pre_pairs, spec)?;
    let post = pair_summaries(post_pairs, spec)?;
    let matched_pre: Vec<MatchedPair> = quads.quads.iter().map(|q| q.pre.clone()).collect();
    let matched_post: Vec<MatchedPair> = quads.quads.iter().map(|q| q.post.clone()).collect();
    let (mpre, mpost) = if quads.is_empty() {
        (Vec::new(), Vec::new())
    } else {
        (pair_summaries(&matched_pre, spec)?, pair_summaries(&matched_post, spec)?)
    };
    Ok(balance::build_report(
        "cross-period",
        (&summary_covs(&pre), &summary_covs(&post)),
        (&summary_covs(&mpre), &summary_covs(&mpost)),
        seed,
    ))
}
