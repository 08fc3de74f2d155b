//! Estimating and applying the performance function
//!
//! ```text
//! performance = α·N(κ) − Σ w_i·N(c_i)
//! ```
//!
//! where N is a Z-score against a stated pool. Weights come from a two-stage
//! standardized regression of user satisfaction on κ and the cost measures:
//! fit everything, drop predictors that are not significant, refit.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::avm::{normalize, Corpus};
use crate::costs::{check_measures, measure_cost, CostMeasure, CostScope};
use crate::error::{Error, Result};
use crate::kappa::{build_confusion, kappa, ScopeFilter};
use crate::segment::{derive_structure, segments_for_attributes};
use crate::stats::{mean, norm_params, ols_standardized, two_sample_t, NormParams, RegressionFit};

pub const KAPPA: &str = "kappa";

/// Default significance threshold for pruning predictors.
pub const DEFAULT_THRESHOLD: f64 = 0.05;

/// One unit of analysis (a dialogue, a user, a strategy) with its measurements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Unit {
    pub id: String,
    /// Comparison group, usually the agent.
    pub group: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub satisfaction: Option<f64>,
    pub kappa: f64,
    #[serde(default)]
    pub costs: BTreeMap<String, f64>,
}

/// Measurement table interchange document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnitTable {
    pub units: Vec<Unit>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Grouping {
    PerDialogue,
    PerUser,
}

/// Units for estimation or evaluation. Each unit gets its own confusion matrix;
/// per-user costs and satisfaction are means over the user's dialogues.
pub fn units_from_corpus(
    corpus: &Corpus,
    measures: &[CostMeasure],
    grouping: Grouping,
) -> Result<Vec<Unit>> {
    check_measures(measures)?;
    let groups: Vec<(String, Vec<usize>)> = match grouping {
        Grouping::PerDialogue => corpus
            .dialogues
            .iter()
            .enumerate()
            .map(|(i, d)| (d.id.clone(), vec![i]))
            .collect(),
        Grouping::PerUser => {
            let mut out: Vec<(String, Vec<usize>)> = Vec::new();
            for (i, d) in corpus.dialogues.iter().enumerate() {
                match out
                    .iter_mut()
                    .find(|(u, _)| normalize(u) == normalize(&d.user))
                {
                    Some((_, members)) => members.push(i),
                    None => out.push((d.user.clone(), vec![i])),
                }
            }
            out
        }
    };

    groups
        .into_iter()
        .map(|(id, members)| {
            let dialogues: Vec<_> = members.iter().map(|&i| &corpus.dialogues[i]).collect();
            let agent = &dialogues[0].agent;
            if dialogues.iter().any(|d| &d.agent != agent) {
                return Err(Error::invalid(format!(
                    "user {id} talked to more than one agent"
                )));
            }
            let scope = ScopeFilter::all().dialogues(dialogues.iter().map(|d| d.id.as_str()));
            let k = kappa(&build_confusion(corpus, &scope)?).map_err(|e| match e {
                Error::DegenerateChance { .. } | Error::UndefinedMeasure(_) => {
                    Error::invalid(format!("unit {id}: kappa undefined ({e})"))
                }
                other => other,
            })?;
            let satisfaction = dialogues
                .iter()
                .map(|d| d.satisfaction)
                .collect::<Option<Vec<f64>>>()
                .map(|v| mean(&v));
            let mut costs = BTreeMap::new();
            for m in measures {
                let values = dialogues
                    .iter()
                    .map(|d| measure_cost(&corpus.schema, d, m, CostScope::Whole))
                    .collect::<Result<Vec<f64>>>()?;
                costs.insert(m.name.clone(), mean(&values));
            }
            Ok(Unit {
                id,
                group: agent.clone(),
                satisfaction,
                kappa: k.kappa,
                costs,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictorStat {
    pub name: String,
    pub coefficient: f64,
    pub std_error: f64,
    pub t: f64,
    pub p: f64,
}

fn predictor_stats(fit: &RegressionFit) -> Vec<PredictorStat> {
    (0..fit.names.len())
        .map(|i| PredictorStat {
            name: fit.names[i].clone(),
            coefficient: fit.coefficients[i],
            std_error: fit.std_errors[i],
            t: fit.t_stats[i],
            p: fit.p_values[i],
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub n: usize,
    pub r_squared: f64,
    pub threshold: f64,
    pub pruned: Vec<String>,
    pub full_model: Vec<PredictorStat>,
    pub final_model: Vec<PredictorStat>,
    pub final_r_squared: f64,
    pub df_residual: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerformanceFunction {
    pub alpha: f64,
    /// Stored positive, subtracted on evaluation.
    pub cost_weights: BTreeMap<String, f64>,
    pub kappa_norm: NormParams,
    pub cost_norms: BTreeMap<String, NormParams>,
    /// How to recompute the costs from an annotated corpus.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub measures: Vec<CostMeasure>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

impl PerformanceFunction {
    pub fn new(
        alpha: f64,
        cost_weights: BTreeMap<String, f64>,
        kappa_norm: NormParams,
        cost_norms: BTreeMap<String, NormParams>,
    ) -> Result<Self> {
        let pf = PerformanceFunction {
            alpha,
            cost_weights,
            kappa_norm,
            cost_norms,
            measures: Vec::new(),
            provenance: None,
        };
        pf.check()?;
        Ok(pf)
    }

    pub fn check(&self) -> Result<()> {
        if !self.alpha.is_finite() || self.cost_weights.values().any(|w| !w.is_finite()) {
            return Err(Error::invalid(
                "performance function weights must be finite",
            ));
        }
        if let Some(name) = self
            .cost_weights
            .keys()
            .find(|k| !self.cost_norms.contains_key(*k))
        {
            return Err(Error::invalid(format!(
                "cost {name} has a weight but no normalization"
            )));
        }
        Ok(())
    }

    /// The pool the function was estimated on.
    pub fn estimation_pool(&self) -> NormalizationPool {
        NormalizationPool {
            pool_id: "estimation".into(),
            members: Vec::new(),
            kappa_norm: Some(self.kappa_norm),
            cost_norms: self.cost_norms.clone(),
        }
    }

    /// Measures in the function, for recomputing costs from a corpus.
    pub fn weighted_measures(&self) -> Result<Vec<CostMeasure>> {
        self.cost_weights
            .keys()
            .map(|name| {
                self.measures
                    .iter()
                    .find(|m| &m.name == name)
                    .cloned()
                    .ok_or_else(|| {
                        Error::usage(format!("function has no definition for measure {name}"))
                    })
            })
            .collect()
    }
}

/// Two-stage estimation from rated units. `costs` names the cost predictors.
pub fn estimate_function(
    units: &[Unit],
    costs: &[String],
    threshold: f64,
) -> Result<PerformanceFunction> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::usage(format!(
            "significance threshold {threshold} outside (0, 1]"
        )));
    }
    let mut seen = BTreeSet::new();
    for c in costs {
        if c == KAPPA || !seen.insert(c) {
            return Err(Error::usage(format!(
                "cost measure name {c:?} is reserved or repeated"
            )));
        }
    }
    let missing: Vec<String> = units
        .iter()
        .filter(|u| u.satisfaction.is_none())
        .map(|u| u.id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingSatisfaction { units: missing });
    }
    let satisfaction: Vec<f64> = units
        .iter()
        .map(|u| u.satisfaction.unwrap_or_default())
        .collect();

    let mut names = vec![KAPPA.to_string()];
    let mut columns = vec![units.iter().map(|u| u.kappa).collect::<Vec<f64>>()];
    for c in costs {
        let col = units
            .iter()
            .map(|u| {
                u.costs
                    .get(c)
                    .copied()
                    .ok_or_else(|| Error::usage(format!("unit {} has no value for {c}", u.id)))
            })
            .collect::<Result<Vec<f64>>>()?;
        names.push(c.clone());
        columns.push(col);
    }

    let full = ols_standardized(&satisfaction, &columns, &names)?;
    let keep: Vec<usize> = (0..names.len())
        .filter(|&i| full.p_values[i] < threshold)
        .collect();
    if keep.is_empty() {
        return Err(Error::EmptyModel { threshold });
    }
    let pruned: Vec<String> = (0..names.len())
        .filter(|i| !keep.contains(i))
        .map(|i| names[i].clone())
        .collect();
    let last = if pruned.is_empty() {
        full.clone()
    } else {
        let cols: Vec<Vec<f64>> = keep.iter().map(|&i| columns[i].clone()).collect();
        let ns: Vec<String> = keep.iter().map(|&i| names[i].clone()).collect();
        ols_standardized(&satisfaction, &cols, &ns)?
    };

    let alpha = last
        .index_of(KAPPA)
        .map(|i| last.coefficients[i])
        .unwrap_or(0.0);
    let kappa_norm = full.predictor_norms[0];
    let mut cost_weights = BTreeMap::new();
    let mut cost_norms = BTreeMap::new();
    for (i, name) in last.names.iter().enumerate() {
        if name != KAPPA {
            cost_weights.insert(name.clone(), -last.coefficients[i]);
            cost_norms.insert(name.clone(), last.predictor_norms[i]);
        }
    }
    Ok(PerformanceFunction {
        alpha,
        cost_weights,
        kappa_norm,
        cost_norms,
        measures: Vec::new(),
        provenance: Some(Provenance {
            n: units.len(),
            r_squared: full.r_squared,
            threshold,
            pruned,
            full_model: predictor_stats(&full),
            final_model: predictor_stats(&last),
            final_r_squared: last.r_squared,
            df_residual: last.df_residual,
        }),
    })
}

/// Estimation straight from a rated corpus.
pub fn estimate_from_corpus(
    corpus: &Corpus,
    measures: &[CostMeasure],
    grouping: Grouping,
    threshold: f64,
) -> Result<PerformanceFunction> {
    let units = units_from_corpus(corpus, measures, grouping)?;
    let names: Vec<String> = measures.iter().map(|m| m.name.clone()).collect();
    let mut pf = estimate_function(&units, &names, threshold)?;
    pf.measures = measures.to_vec();
    Ok(pf)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoolMember {
    /// What the member stands for: a strategy label, a segment, a unit id.
    pub scope: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(default)]
    pub costs: BTreeMap<String, f64>,
}

/// Normalization parameters for κ and each cost, with the members they came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormalizationPool {
    pub pool_id: String,
    #[serde(default)]
    pub members: Vec<PoolMember>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa_norm: Option<NormParams>,
    #[serde(default)]
    pub cost_norms: BTreeMap<String, NormParams>,
}

fn pool_params(what: &str, values: &[f64]) -> Result<Option<NormParams>> {
    if values.len() < 2 {
        return Ok(None);
    }
    norm_params(values)
        .map(Some)
        .map_err(|e| Error::DegeneratePool(format!("{what}: {e}")))
}

impl NormalizationPool {
    /// Computes parameters for every quantity present in at least two members.
    pub fn from_members(pool_id: &str, members: Vec<PoolMember>) -> Result<Self> {
        let kappas: Vec<f64> = members.iter().filter_map(|m| m.kappa).collect();
        let kappa_norm = pool_params(KAPPA, &kappas)?;
        let names: BTreeSet<&String> = members.iter().flat_map(|m| m.costs.keys()).collect();
        let mut cost_norms = BTreeMap::new();
        for name in names {
            let vals: Vec<f64> = members
                .iter()
                .filter_map(|m| m.costs.get(name).copied())
                .collect();
            if let Some(p) = pool_params(name, &vals)? {
                cost_norms.insert(name.clone(), p);
            }
        }
        Ok(NormalizationPool {
            pool_id: pool_id.into(),
            members,
            kappa_norm,
            cost_norms,
        })
    }

    pub fn member(&self, scope: &str) -> Option<&PoolMember> {
        self.members.iter().find(|m| m.scope == scope)
    }

    /// Layers supplied parameters and member values over computed ones.
    pub fn overlay(mut self, other: &NormalizationPool) -> Self {
        if other.kappa_norm.is_some() {
            self.kappa_norm = other.kappa_norm;
        }
        for (k, v) in &other.cost_norms {
            self.cost_norms.insert(k.clone(), *v);
        }
        for m in &other.members {
            match self.members.iter_mut().find(|x| x.scope == m.scope) {
                Some(x) => {
                    if m.kappa.is_some() {
                        x.kappa = m.kappa;
                    }
                    for (k, v) in &m.costs {
                        x.costs.insert(k.clone(), *v);
                    }
                }
                None => self.members.push(m.clone()),
            }
        }
        self
    }

    fn kappa_params(&self) -> Result<NormParams> {
        self.kappa_norm.ok_or_else(|| {
            Error::usage(format!(
                "pool {} has no normalization for kappa",
                self.pool_id
            ))
        })
    }

    fn cost_params(&self, name: &str) -> Result<NormParams> {
        self.cost_norms.get(name).copied().ok_or_else(|| {
            Error::usage(format!(
                "pool {} has no normalization for {name}",
                self.pool_id
            ))
        })
    }
}

/// α·N(κ) − Σ w_i·N(c_i), with N taken from `pool`.
pub fn evaluate(
    pf: &PerformanceFunction,
    kappa: Option<f64>,
    costs: &BTreeMap<String, f64>,
    pool: &NormalizationPool,
) -> Result<f64> {
    let mut total = 0.0;
    if pf.alpha != 0.0 {
        let k = kappa.ok_or_else(|| Error::usage("no kappa value to evaluate"))?;
        total += pf.alpha * pool.kappa_params()?.z(k);
    }
    for (name, w) in &pf.cost_weights {
        let c = costs
            .get(name)
            .ok_or_else(|| Error::usage(format!("no value for cost {name}")))?;
        total -= w * pool.cost_params(name)?.z(*c);
    }
    Ok(total)
}

pub fn evaluate_unit(
    pf: &PerformanceFunction,
    unit: &Unit,
    pool: &NormalizationPool,
) -> Result<f64> {
    evaluate(pf, Some(unit.kappa), &unit.costs, pool)
}

pub fn evaluate_member(
    pf: &PerformanceFunction,
    member: &PoolMember,
    pool: &NormalizationPool,
) -> Result<f64> {
    evaluate(pf, member.kappa, &member.costs, pool).map_err(|e| match e {
        Error::Usage(m) => Error::Usage(format!("{}: {m}", member.scope)),
        other => other,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupComparison {
    pub mean_a: f64,
    pub mean_b: f64,
    pub t: f64,
    pub df: usize,
    pub p: f64,
    pub performance_a: Vec<f64>,
    pub performance_b: Vec<f64>,
}

/// Per-unit performance of two groups under one shared pool, and a pooled t-test.
pub fn compare_groups(
    pf: &PerformanceFunction,
    group_a: &[Unit],
    group_b: &[Unit],
    pool: &NormalizationPool,
) -> Result<GroupComparison> {
    if group_a.is_empty() || group_b.is_empty() {
        return Err(Error::usage("both groups need at least one unit"));
    }
    let score = |units: &[Unit]| {
        units
            .iter()
            .map(|u| evaluate_unit(pf, u, pool))
            .collect::<Result<Vec<f64>>>()
    };
    let performance_a = score(group_a)?;
    let performance_b = score(group_b)?;
    let test = two_sample_t(&performance_a, &performance_b)?;
    if let Some(d) = &test.diagnostic {
        log::warn!("{d}");
    }
    Ok(GroupComparison {
        mean_a: mean(&performance_a),
        mean_b: mean(&performance_b),
        t: test.t,
        df: test.df,
        p: test.p_two_sided,
        performance_a,
        performance_b,
    })
}

/// Which values a cost pool is computed over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CostGranularity {
    /// One value per strategy (its mean over matching segments).
    PerStrategy,
    /// Every matching segment individually.
    #[default]
    PerSegment,
}

/// κ and costs of comparable strategies over the subdialogues about `attributes`.
///
/// Each strategy gets one κ from the attribute-restricted confusion matrix of
/// its agents' dialogues and, per measure, the mean cost of the segments whose
/// attribute set equals `attributes`. κ is normalized across strategies; costs
/// according to `granularity`. Costs for which fewer than two values exist get
/// no parameters and must be supplied with [`NormalizationPool::overlay`].
pub fn subdialogue_units(
    corpus: &Corpus,
    attributes: &BTreeSet<usize>,
    strategy_labels: &BTreeMap<String, String>,
    measures: &[CostMeasure],
    granularity: CostGranularity,
) -> Result<NormalizationPool> {
    check_measures(measures)?;
    let schema = &corpus.schema;
    if attributes.is_empty() || attributes.iter().any(|&a| a >= schema.len()) {
        return Err(Error::usage(
            "subdialogue attribute set must be a nonempty subset of the schema",
        ));
    }
    let mut by_label: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for (agent, label) in strategy_labels {
        by_label
            .entry(label.as_str())
            .or_default()
            .push(agent.as_str());
    }
    if by_label.len() < 2 {
        return Err(Error::DegeneratePool(format!(
            "need at least 2 strategies, got {}",
            by_label.len()
        )));
    }
    let attr_names: Vec<&str> = attributes
        .iter()
        .map(|&a| schema.attribute(a).name.as_str())
        .collect();

    let mut members = Vec::new();
    let mut segment_values: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for (label, agents) in &by_label {
        let agent_set: BTreeSet<String> = agents.iter().map(|a| normalize(a)).collect();
        let dialogues: Vec<_> = corpus
            .dialogues
            .iter()
            .filter(|d| agent_set.contains(&normalize(&d.agent)))
            .collect();
        if dialogues.is_empty() {
            return Err(Error::usage(format!(
                "strategy {label}: no dialogues for agents {}",
                agents.join(", ")
            )));
        }
        let scope = ScopeFilter::all()
            .agents(agents.iter())
            .attributes(attr_names.iter());
        let k = kappa(&build_confusion(corpus, &scope)?)?;

        let mut per_measure: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for d in &dialogues {
            let root = derive_structure(schema, d)?;
            for seg in segments_for_attributes(&root, attributes) {
                for m in measures {
                    let v = measure_cost(schema, d, m, CostScope::Segment(seg))?;
                    per_measure.entry(m.name.clone()).or_default().push(v);
                }
            }
        }
        let mut costs = BTreeMap::new();
        for (name, vals) in per_measure {
            costs.insert(name.clone(), mean(&vals));
            segment_values.entry(name).or_default().extend(vals);
        }
        members.push(PoolMember {
            scope: label.to_string(),
            kappa: Some(k.kappa),
            costs,
        });
    }

    let pool_id = format!(
        "subdialogue:{}",
        attributes
            .iter()
            .map(|&a| schema.attribute(a).abbrev.as_str())
            .collect::<Vec<_>>()
            .join("+")
    );
    let mut pool = NormalizationPool::from_members(&pool_id, members)?;
    if pool.kappa_norm.is_none() {
        return Err(Error::DegeneratePool(
            "fewer than two strategies have a kappa".into(),
        ));
    }
    if granularity == CostGranularity::PerSegment {
        pool.cost_norms.clear();
        for (name, vals) in &segment_values {
            if let Some(p) = pool_params(name, vals)? {
                pool.cost_norms.insert(name.clone(), p);
            }
        }
    }
    Ok(pool)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn user_table_pf() -> PerformanceFunction {
        estimate_function(
            &fixtures::user_units(),
            &["utt".into(), "rep".into()],
            DEFAULT_THRESHOLD,
        )
        .unwrap()
    }

    #[test]
    fn estimation_prunes_utterances() {
        let pf = user_table_pf();
        assert!((pf.alpha - 0.40).abs() < 0.005, "{}", pf.alpha);
        assert!((pf.cost_weights["rep"] - 0.78).abs() < 0.005);
        assert!(!pf.cost_weights.contains_key("utt"));
        let prov = pf.provenance.as_ref().unwrap();
        assert_eq!(prov.pruned, vec!["utt".to_string()]);
        assert!((prov.final_r_squared - 0.92).abs() < 0.005);
    }

    #[test]
    fn estimation_needs_enough_units() {
        let units: Vec<Unit> = fixtures::user_units().into_iter().take(3).collect();
        let err = estimate_function(&units, &["utt".into()], DEFAULT_THRESHOLD).unwrap_err();
        assert!(matches!(err, Error::InsufficientData { .. }));
    }

    #[test]
    fn estimation_needs_satisfaction() {
        let mut units = fixtures::user_units();
        units[2].satisfaction = None;
        units[7].satisfaction = None;
        match estimate_function(&units, &["rep".into()], DEFAULT_THRESHOLD).unwrap_err() {
            Error::MissingSatisfaction { units } => {
                assert_eq!(units, vec!["3".to_string(), "8".to_string()])
            }
            other => panic!("{other}"),
        }
    }

    #[test]
    fn everything_pruned_is_an_empty_model() {
        let units: Vec<Unit> = (0..8)
            .map(|i| Unit {
                id: i.to_string(),
                group: "g".into(),
                satisfaction: Some([3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0, 6.0][i]),
                kappa: [0.2, 0.9, 0.4, 0.4, 0.8, 0.1, 0.5, 0.6][i],
                costs: BTreeMap::new(),
            })
            .collect();
        let err = estimate_function(&units, &[], DEFAULT_THRESHOLD).unwrap_err();
        assert!(matches!(err, Error::EmptyModel { .. }));
    }

    #[test]
    fn depart_city_subdialogue_evaluations() {
        let pf = PerformanceFunction::new(
            0.40,
            [("rep".to_string(), 0.78)].into(),
            NormParams::given(0.0, 1.0).unwrap(),
            [("rep".to_string(), NormParams::given(0.0, 1.0).unwrap())].into(),
        )
        .unwrap();
        // feed the Z-scores directly through unit pools
        let pool = pf.estimation_pool();
        let ra = evaluate(&pf, Some(0.71), &[("rep".to_string(), 0.72)].into(), &pool).unwrap();
        assert!((ra - -0.28).abs() < 0.005, "{ra}");
        let rb = evaluate(
            &pf,
            Some(-0.71),
            &[("rep".to_string(), -0.94)].into(),
            &pool,
        )
        .unwrap();
        assert!((rb - 0.45).abs() < 0.005, "{rb}");
    }

    #[test]
    fn unit_at_pool_means_scores_zero() {
        let pf = user_table_pf();
        let costs: BTreeMap<String, f64> = [("rep".to_string(), pf.cost_norms["rep"].mean)].into();
        assert_eq!(
            evaluate(&pf, Some(pf.kappa_norm.mean), &costs, &pf.estimation_pool()).unwrap(),
            0.0
        );
    }

    #[test]
    fn missing_cost_is_a_usage_error() {
        let pf = user_table_pf();
        let err = evaluate(&pf, Some(1.0), &BTreeMap::new(), &pf.estimation_pool()).unwrap_err();
        assert!(err.is_usage());
    }

    #[test]
    fn agent_comparison_on_user_table() {
        let pf = user_table_pf();
        let units = fixtures::user_units();
        let (a, b): (Vec<Unit>, Vec<Unit>) = units.into_iter().partition(|u| u.group == "A");
        let cmp = compare_groups(&pf, &a, &b, &pf.estimation_pool()).unwrap();
        assert!((cmp.mean_a - -0.44).abs() < 0.01, "{}", cmp.mean_a);
        assert!((cmp.mean_b - 0.44).abs() < 0.01);
        assert!(cmp.p > 0.05 && cmp.p <= 0.10, "{}", cmp.p);
        let same = compare_groups(&pf, &a, &a, &pf.estimation_pool()).unwrap();
        assert_eq!(same.mean_a, same.mean_b);
        assert_eq!(same.p, 1.0);
        assert!(compare_groups(&pf, &a, &[], &pf.estimation_pool())
            .unwrap_err()
            .is_usage());
    }

    #[test]
    fn pool_without_a_quantity_is_a_usage_error() {
        let pf = user_table_pf();
        let units = fixtures::user_units();
        let mut pool = pf.estimation_pool();
        pool.cost_norms.clear();
        assert!(compare_groups(&pf, &units[..8], &units[8..], &pool)
            .unwrap_err()
            .is_usage());
    }

    #[test]
    fn depart_city_strategy_pool() {
        let corpus = fixtures::agent_a_corpus()
            .merge(fixtures::agent_b_corpus())
            .unwrap();
        let labels: BTreeMap<String, String> = [
            ("A".to_string(), "R_A".to_string()),
            ("B".to_string(), "R_B".to_string()),
        ]
        .into();
        let dc: BTreeSet<usize> = [0].into();
        let pool = subdialogue_units(
            &corpus,
            &dc,
            &labels,
            &[CostMeasure::events("rep", "repair")],
            CostGranularity::PerSegment,
        )
        .unwrap();
        let ka = pool.member("R_A").unwrap().kappa.unwrap();
        let kb = pool.member("R_B").unwrap().kappa.unwrap();
        assert!((ka - 0.515 / 0.735).abs() < 1e-12);
        assert!((kb - 0.245 / 0.735).abs() < 1e-12);
        let kn = pool.kappa_norm.unwrap();
        assert!((kn.mean - 0.517).abs() < 5e-4);
        assert!((kn.std - 0.260).abs() < 5e-4);
        assert!((kn.z(ka) - 0.71).abs() < 0.005);
        // matrix fixtures carry no utterances, so no repair segments
        assert!(pool.cost_norms.is_empty());

        let given = fixtures::depart_city_repair_pool();
        let pool = pool.overlay(&given);
        assert!((pool.cost_norms["rep"].z(6.0) - 0.72).abs() < 0.005);
        assert!((pool.cost_norms["rep"].z(1.38) - -0.94).abs() < 0.005);
    }

    #[test]
    fn identical_strategies_are_a_degenerate_pool() {
        let a = fixtures::agent_a_corpus();
        let mut b = fixtures::agent_a_corpus();
        for d in &mut b.dialogues {
            d.agent = "A2".into();
            d.id = format!("copy-{}", d.id);
        }
        let corpus = a.merge(b).unwrap();
        let labels: BTreeMap<String, String> = [
            ("A".to_string(), "x".to_string()),
            ("A2".to_string(), "y".to_string()),
        ]
        .into();
        let err = subdialogue_units(
            &corpus,
            &[0].into(),
            &labels,
            &[],
            CostGranularity::PerSegment,
        )
        .unwrap_err();
        assert!(matches!(err, Error::DegeneratePool(_)));
        let one: BTreeMap<String, String> = [("A".to_string(), "x".to_string())].into();
        let err = subdialogue_units(&corpus, &[0].into(), &one, &[], CostGranularity::PerSegment)
            .unwrap_err();
        assert!(matches!(err, Error::DegeneratePool(_)));
    }

    #[test]
    fn segment_costs_feed_the_pool() {
        // annotated D1/D2 alongside the matrix corpora: only D1 has a {DC}
        // segment (S3, eight repair utterances), so only R_A gets a cost
        let corpus = fixtures::train_dialogues()
            .merge(fixtures::agent_a_corpus())
            .and_then(|c| c.merge(fixtures::agent_b_corpus()))
            .unwrap();
        let labels: BTreeMap<String, String> = [
            ("A".to_string(), "R_A".to_string()),
            ("B".to_string(), "R_B".to_string()),
        ]
        .into();
        let measures = [
            CostMeasure::events("rep", "repair"),
            CostMeasure::utterances("utt"),
        ];
        let pool = subdialogue_units(
            &corpus,
            &[0].into(),
            &labels,
            &measures,
            CostGranularity::PerSegment,
        )
        .unwrap();
        let ra = pool.member("R_A").unwrap();
        assert_eq!(ra.costs["rep"], 8.0);
        assert_eq!(ra.costs["utt"], 8.0);
        assert!(pool.member("R_B").unwrap().costs.is_empty());
        assert!(pool.cost_norms.is_empty());
        assert!(
            pool.member("R_A").unwrap().kappa.unwrap() > pool.member("R_B").unwrap().kappa.unwrap()
        );
    }

    #[test]
    fn per_user_units_from_rated_corpus() {
        let corpus = fixtures::train_dialogues();
        let units = units_from_corpus(
            &corpus,
            &["utt".parse().unwrap(), "rep".parse().unwrap()],
            Grouping::PerUser,
        )
        .unwrap();
        assert_eq!(units.len(), 2);
        assert_eq!(units[0].id, "5");
        assert_eq!(units[0].costs["utt"], 23.0);
        assert_eq!(units[1].costs["rep"], 0.5);
        assert_eq!(units[1].satisfaction, Some(6.0));
        assert_eq!(units[0].kappa, 1.0);
    }
}
