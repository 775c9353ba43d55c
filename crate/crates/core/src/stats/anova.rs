use std::collections::HashMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor};

use super::{Result, StatsError};
use crate::eval::ExperimentRecord;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaRow {
    pub term: String,
    pub ss: f64,
    pub sst_percent: f64,
    pub df: usize,
    /// Absent when the residual has no degrees of freedom.
    pub f: Option<f64>,
    pub p_value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaTable {
    pub terms: Vec<AnovaRow>,
    pub residual: AnovaRow,
    pub total: AnovaRow,
}

impl AnovaTable {
    pub fn term(&self, name: &str) -> Option<&AnovaRow> {
        self.terms.iter().find(|r| r.term == name)
    }

    /// `term,ss,sst_percent,df,f,p_value`, then the residual and total rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["term", "ss", "sst_percent", "df", "f", "p_value"])?;
        for r in self.terms.iter().chain([&self.residual, &self.total]) {
            w.write_record([
                r.term.clone(),
                r.ss.to_string(),
                r.sst_percent.to_string(),
                r.df.to_string(),
                opt(r.f),
                opt(r.p_value),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Fixed-effects ANOVA of a balanced full-factorial design. Every term up to
/// `max_interaction` factors gets its own row; higher-order interactions
/// are left in the residual.
///
/// Each row pairs one level per factor with a response value.
pub fn anova(
    factor_names: &[&str],
    rows: &[(Vec<String>, f64)],
    max_interaction: usize,
) -> Result<AnovaTable> {
    let k = factor_names.len();
    if k == 0 || k > 16 {
        return Err(StatsError::BadDesign(
            "between 1 and 16 factors are supported".into(),
        ));
    }
    if rows.is_empty() {
        return Err(StatsError::EmptySample);
    }
    if let Some((levels, _)) = rows.iter().find(|(l, _)| l.len() != k) {
        return Err(StatsError::BadDesign(format!(
            "row has {} levels for {k} factors",
            levels.len()
        )));
    }
    if rows.iter().any(|(_, y)| !y.is_finite()) {
        return Err(StatsError::NonFinite);
    }

    let mut level_ids: Vec<HashMap<&str, usize>> = vec![HashMap::new(); k];
    let coded: Vec<Vec<usize>> = rows
        .iter()
        .map(|(levels, _)| {
            levels
                .iter()
                .enumerate()
                .map(|(f, l)| {
                    let next = level_ids[f].len();
                    *level_ids[f].entry(l.as_str()).or_insert(next)
                })
                .collect()
        })
        .collect();
    let n_levels: Vec<usize> = level_ids.iter().map(HashMap::len).collect();

    let mut cells: HashMap<&[usize], usize> = HashMap::new();
    for c in &coded {
        *cells.entry(c.as_slice()).or_insert(0) += 1;
    }
    let n_cells: usize = n_levels.iter().product();
    let reps = cells.values().next().copied().unwrap_or(0);
    if cells.len() != n_cells {
        return Err(StatsError::BadDesign(format!(
            "{} of {n_cells} cells observed",
            cells.len()
        )));
    }
    if cells.values().any(|&c| c != reps) {
        return Err(StatsError::BadDesign(
            "cells have unequal replicate counts".into(),
        ));
    }

    let y: Vec<f64> = rows.iter().map(|(_, y)| *y).collect();
    let n = y.len();
    let grand = y.iter().sum::<f64>() / n as f64;
    let sst: f64 = y.iter().map(|v| (v - grand).powi(2)).sum();
    if sst == 0.0 {
        return Err(StatsError::ZeroVariance);
    }

    let max = max_interaction.min(k);
    let subsets: Vec<u32> = {
        let mut s: Vec<u32> = (1u32..1 << k)
            .filter(|m| m.count_ones() as usize <= max)
            .collect();
        s.sort_by_key(|&m| {
            (
                m.count_ones(),
                (0..k).filter(|f| m >> f & 1 == 1).collect::<Vec<_>>(),
            )
        });
        s
    };
    let key = |mask: u32, c: &[usize]| -> Vec<usize> {
        (0..k)
            .filter(|f| mask >> f & 1 == 1)
            .map(|f| c[f])
            .collect()
    };

    // marginal mean of every observed sub-cell, per subset
    let mut marginal: HashMap<u32, HashMap<Vec<usize>, f64>> = HashMap::new();
    for &mask in &subsets {
        let mut acc: HashMap<Vec<usize>, (f64, usize)> = HashMap::new();
        for (c, v) in coded.iter().zip(&y) {
            let e = acc.entry(key(mask, c)).or_insert((0.0, 0));
            e.0 += v;
            e.1 += 1;
        }
        marginal.insert(
            mask,
            acc.into_iter()
                .map(|(kk, (s, c))| (kk, s / c as f64))
                .collect(),
        );
    }
    let mean_of = |mask: u32, c: &[usize]| -> f64 {
        if mask == 0 {
            grand
        } else {
            marginal[&mask][&key(mask, c)]
        }
    };
    // inclusion-exclusion over the sub-terms of `mask`
    let effect = |mask: u32, c: &[usize]| -> f64 {
        let mut e = 0.0;
        let mut sub = mask;
        loop {
            let sign = if (mask.count_ones() - sub.count_ones()).is_multiple_of(2) {
                1.0
            } else {
                -1.0
            };
            e += sign * mean_of(sub, c);
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & mask;
        }
        e
    };

    let mut fitted = vec![grand; n];
    let mut raw_terms = Vec::new();
    for &mask in &subsets {
        let mut ss = 0.0;
        for (i, c) in coded.iter().enumerate() {
            let e = effect(mask, c);
            ss += e * e;
            fitted[i] += e;
        }
        let df: usize = (0..k)
            .filter(|f| mask >> f & 1 == 1)
            .map(|f| n_levels[f] - 1)
            .product();
        let name = (0..k)
            .filter(|f| mask >> f & 1 == 1)
            .map(|f| factor_names[f])
            .collect::<Vec<_>>()
            .join("*");
        raw_terms.push((name, ss, df));
    }
    let ss_res: f64 = y.iter().zip(&fitted).map(|(v, f)| (v - f).powi(2)).sum();
    let df_terms: usize = raw_terms.iter().map(|t| t.2).sum();
    let df_res = n - 1 - df_terms;
    let ms_res = ss_res / df_res as f64;

    let terms = raw_terms
        .into_iter()
        .map(|(term, ss, df)| {
            let (f, p) = if df_res == 0 || df == 0 {
                (None, None)
            } else {
                let f = (ss / df as f64) / ms_res;
                let p = if f.is_infinite() {
                    0.0
                } else {
                    FisherSnedecor::new(df as f64, df_res as f64)
                        .expect("positive degrees of freedom")
                        .sf(f)
                };
                (Some(f), Some(p))
            };
            AnovaRow {
                term,
                ss,
                sst_percent: 100.0 * ss / sst,
                df,
                f,
                p_value: p,
            }
        })
        .collect();
    let plain = |term: &str, ss: f64, df: usize| AnovaRow {
        term: term.into(),
        ss,
        sst_percent: 100.0 * ss / sst,
        df,
        f: None,
        p_value: None,
    };
    Ok(AnovaTable {
        terms,
        residual: plain("residual", ss_res, df_res),
        total: plain("total", sst, n - 1),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Factor {
    Victim,
    Surrogate,
    Epochs,
    Ratio,
}

impl Factor {
    pub const ALL: [Factor; 4] = [
        Factor::Victim,
        Factor::Surrogate,
        Factor::Epochs,
        Factor::Ratio,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Factor::Victim => "victim",
            Factor::Surrogate => "surrogate",
            Factor::Epochs => "epochs",
            Factor::Ratio => "ratio",
        }
    }

    fn level(self, r: &ExperimentRecord) -> String {
        match self {
            Factor::Victim => r.victim_id.clone(),
            Factor::Surrogate => r.surrogate_id.clone(),
            Factor::Epochs => r.epochs.to_string(),
            Factor::Ratio => r.known_ratio.to_string(),
        }
    }
}

impl fmt::Display for Factor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Factor {
    type Err = StatsError;

    fn from_str(s: &str) -> Result<Self> {
        Factor::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| StatsError::BadDesign(format!("unknown factor {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Response {
    Power,
    Error,
    Auc,
}

impl Response {
    fn of(self, r: &ExperimentRecord) -> f64 {
        match self {
            Response::Power => r.power,
            Response::Error => r.error,
            Response::Auc => r.auc,
        }
    }
}

/// ANOVA over the per-seed records of a single attack; seed-mean rows are
/// skipped and the seeds act as replicates.
pub fn factorial_anova(
    records: &[ExperimentRecord],
    response: Response,
    factors: &[Factor],
    max_interaction: usize,
) -> Result<AnovaTable> {
    let per_seed: Vec<&ExperimentRecord> = records.iter().filter(|r| r.seed.is_some()).collect();
    if let Some(first) = per_seed.first() {
        if per_seed.iter().any(|r| r.attack != first.attack) {
            return Err(StatsError::BadDesign("records mix several attacks".into()));
        }
    }
    let names: Vec<&str> = factors.iter().map(|f| f.name()).collect();
    let rows: Vec<(Vec<String>, f64)> = per_seed
        .iter()
        .map(|r| (factors.iter().map(|f| f.level(r)).collect(), response.of(r)))
        .collect();
    anova(&names, &rows, max_interaction)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn row(levels: &[&str], y: f64) -> (Vec<String>, f64) {
        (levels.iter().map(|s| s.to_string()).collect(), y)
    }

    #[test]
    fn single_factor_without_noise() {
        let rows = [
            row(&["a"], 1.0),
            row(&["a"], 1.0),
            row(&["b"], 3.0),
            row(&["b"], 3.0),
        ];
        let t = anova(&["f"], &rows, 3).unwrap();
        assert_eq!(t.terms[0].sst_percent, 100.0);
        assert_eq!(t.residual.ss, 0.0);
        assert_eq!(t.terms[0].f, Some(f64::INFINITY));
        assert_eq!(t.terms[0].p_value, Some(0.0));
    }

    #[test]
    fn constant_response_is_degenerate() {
        let rows = [row(&["a"], 2.0), row(&["b"], 2.0)];
        assert!(matches!(
            anova(&["f"], &rows, 1),
            Err(StatsError::ZeroVariance)
        ));
    }

    #[test]
    fn two_by_two_textbook_decomposition() {
        // cell data (A,B): (1,1)={3,5} (1,2)={6,8} (2,1)={4,6} (2,2)={11,13}
        let rows = [
            row(&["1", "1"], 3.0),
            row(&["1", "1"], 5.0),
            row(&["1", "2"], 6.0),
            row(&["1", "2"], 8.0),
            row(&["2", "1"], 4.0),
            row(&["2", "1"], 6.0),
            row(&["2", "2"], 11.0),
            row(&["2", "2"], 13.0),
        ];
        let t = anova(&["A", "B"], &rows, 2).unwrap();
        // grand 7; A means 5.5/8.5; B means 4.5/9.5; cell means 4,7,5,12
        assert_relative_eq!(t.term("A").unwrap().ss, 18.0, max_relative = 1e-12);
        assert_relative_eq!(t.term("B").unwrap().ss, 50.0, max_relative = 1e-12);
        assert_relative_eq!(t.term("A*B").unwrap().ss, 8.0, max_relative = 1e-12);
        assert_relative_eq!(t.residual.ss, 8.0, max_relative = 1e-12);
        assert_relative_eq!(t.total.ss, 84.0, max_relative = 1e-12);
        assert_eq!(t.residual.df, 4);
        // F(1,4) = 18 / 2 = 9
        assert_relative_eq!(t.term("A").unwrap().f.unwrap(), 9.0, max_relative = 1e-12);
    }

    #[test]
    fn unreplicated_grid_has_no_f_tests() {
        let rows = [
            row(&["1", "1"], 1.0),
            row(&["1", "2"], 2.0),
            row(&["2", "1"], 4.0),
            row(&["2", "2"], 3.0),
        ];
        let t = anova(&["A", "B"], &rows, 2).unwrap();
        assert_eq!(t.residual.df, 0);
        assert!(t.terms.iter().all(|r| r.f.is_none() && r.p_value.is_none()));
        let sum: f64 = t.terms.iter().map(|r| r.sst_percent).sum();
        assert_relative_eq!(sum, 100.0, max_relative = 1e-12);
    }

    #[test]
    fn interactions_above_the_cap_fall_into_the_residual() {
        let mut rows = Vec::new();
        for a in 0..2 {
            for b in 0..2 {
                rows.push(row(
                    &[&a.to_string(), &b.to_string()],
                    if a == b { 1.0 } else { -1.0 },
                ));
            }
        }
        let t = anova(&["A", "B"], &rows, 1).unwrap();
        assert_eq!(t.terms.len(), 2);
        assert_relative_eq!(t.residual.sst_percent, 100.0, max_relative = 1e-12);
    }

    #[test]
    fn incomplete_or_unbalanced_grids_are_rejected() {
        let missing = [
            row(&["1", "1"], 1.0),
            row(&["1", "2"], 2.0),
            row(&["2", "1"], 4.0),
        ];
        assert!(matches!(
            anova(&["A", "B"], &missing, 2),
            Err(StatsError::BadDesign(_))
        ));
        let unbalanced = [row(&["1"], 1.0), row(&["1"], 2.0), row(&["2"], 4.0)];
        assert!(matches!(
            anova(&["A"], &unbalanced, 1),
            Err(StatsError::BadDesign(_))
        ));
    }

    #[test]
    fn term_order_and_names() {
        let mut rows = Vec::new();
        for a in 0..2 {
            for b in 0..3 {
                for c in 0..2 {
                    let y = (a * 7 + b * 3 + c * 5 + a * b * c) as f64;
                    rows.push(row(&[&a.to_string(), &b.to_string(), &c.to_string()], y));
                    rows.push(row(
                        &[&a.to_string(), &b.to_string(), &c.to_string()],
                        y + 0.5 * (b as f64 - 1.0),
                    ));
                }
            }
        }
        let t = anova(&["a", "b", "c"], &rows, 3).unwrap();
        let names: Vec<&str> = t.terms.iter().map(|r| r.term.as_str()).collect();
        assert_eq!(names, ["a", "b", "c", "a*b", "a*c", "b*c", "a*b*c"]);
        assert_eq!(t.term("b").unwrap().df, 2);
        assert_eq!(t.term("a*b*c").unwrap().df, 2);
        assert_eq!(t.residual.df, 12);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 1 + 7 + 2);
    }
}
