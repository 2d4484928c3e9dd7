//! The statistics battery run over a finished study: one repeated-measures
//! ANOVA per outcome, per-condition rank correlations between flight
//! performance and the post-trial ratings, Fisher comparisons between
//! conditions, and a single FDR pass over every p-value.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use super::{
    fdr_adjust, fisher_z_compare, rm_anova_2x2, score_nasa_tlx, score_ssq, score_ues_sf, spearman, AnalysisError,
    AnovaResult, RatingPair, SubjectCells,
};
use crate::adaptation::{Condition, TaskKind};
use crate::session::SessionLog;

/// One scored trial, flattened out of a session log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialObservation {
    pub subject: String,
    pub condition: Condition,
    pub task: TaskKind,
    pub trial: usize,
    pub performance: Option<f64>,
    pub ratings: Option<RatingPair>,
}

pub fn observations_from_log(log: &SessionLog) -> Vec<TrialObservation> {
    log.trials
        .iter()
        .map(|t| TrialObservation {
            subject: log.header.subject.clone(),
            condition: log.header.condition,
            task: log.header.task,
            trial: t.index,
            performance: t.performance.map(|p| p.summed),
            ratings: t.ratings,
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Instrument {
    Tlx,
    Ssq,
    Ues,
}

impl Instrument {
    fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "tlx" | "nasa_tlx" | "nasa-tlx" => Some(Self::Tlx),
            "ssq" => Some(Self::Ssq),
            "ues" | "ues_sf" | "ues-sf" => Some(Self::Ues),
            _ => None,
        }
    }

    fn outcome(self) -> &'static str {
        match self {
            Self::Tlx => "nasa_tlx",
            Self::Ssq => "ssq_total",
            Self::Ues => "ues_overall",
        }
    }
}

/// A scored questionnaire for one subject in one Condition × Task cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuestionnaireEntry {
    pub subject: String,
    pub condition: Condition,
    pub task: TaskKind,
    pub instrument: Instrument,
    pub score: f64,
}

/// Reads `subject,condition,task,instrument,item1,...` rows. Items are raw
/// responses; the score is computed by the instrument's own scoring rule.
/// Blank lines and `#` comments are skipped, as is a header row starting
/// with `subject`.
pub fn read_questionnaires<R: BufRead>(r: R) -> Result<Vec<QuestionnaireEntry>, AnalysisError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') || trimmed.to_ascii_lowercase().starts_with("subject,") {
            continue;
        }
        let bad = |message: String| AnalysisError::Parse { line: lineno, message };
        let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        if fields.len() < 5 {
            return Err(bad(format!("expected at least 5 fields, found {}", fields.len())));
        }
        let condition: Condition = fields[1].parse().map_err(|_| bad(format!("unknown condition {:?}", fields[1])))?;
        let task: TaskKind = fields[2].parse().map_err(|_| bad(format!("unknown task {:?}", fields[2])))?;
        let instrument =
            Instrument::parse(fields[3]).ok_or_else(|| bad(format!("unknown instrument {:?}", fields[3])))?;
        let items = &fields[4..];
        let score = match instrument {
            Instrument::Tlx => {
                let v = items
                    .iter()
                    .map(|s| s.parse::<f64>().map_err(|e| bad(format!("item {s:?}: {e}"))))
                    .collect::<Result<Vec<_>, _>>()?;
                score_nasa_tlx(&v)
            }
            Instrument::Ssq | Instrument::Ues => {
                let v = items
                    .iter()
                    .map(|s| s.parse::<u8>().map_err(|e| bad(format!("item {s:?}: {e}"))))
                    .collect::<Result<Vec<_>, _>>()?;
                if instrument == Instrument::Ssq {
                    score_ssq(&v).map(|s| s.total)
                } else {
                    score_ues_sf(&v).map(|s| s.overall)
                }
            }
        }
        .map_err(|e| bad(e.to_string()))?;
        out.push(QuestionnaireEntry { subject: fields[0].to_string(), condition, task, instrument, score });
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReportRow {
    pub test: String,
    pub outcome: String,
    pub term: String,
    pub statistic_name: &'static str,
    pub statistic: f64,
    pub df1: Option<f64>,
    pub df2: Option<f64>,
    pub n: usize,
    pub p: f64,
    pub p_fdr: f64,
    pub effect_name: &'static str,
    pub effect: f64,
    pub ci: Option<(f64, f64)>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct StudyReport {
    pub rows: Vec<ReportRow>,
    /// Tests that could not be run, and subjects dropped from an ANOVA.
    pub notes: Vec<String>,
}

const CONDITIONS: [Condition; 2] = [Condition::FixedOrder, Condition::Adaptive];
const TASKS: [TaskKind; 2] = [TaskKind::Deceleration, TaskKind::MediumTurn];

fn cell_index(condition: Condition, task: TaskKind) -> (usize, usize) {
    let a = CONDITIONS.iter().position(|&c| c == condition).unwrap_or(0);
    let b = TASKS.iter().position(|&t| t == task).unwrap_or(0);
    (a, b)
}

fn subject_cells(values: impl IntoIterator<Item = (String, Condition, TaskKind, f64)>) -> Vec<SubjectCells> {
    let mut acc: BTreeMap<String, [[(f64, usize); 2]; 2]> = BTreeMap::new();
    for (subject, condition, task, v) in values {
        let (a, b) = cell_index(condition, task);
        let cell = &mut acc.entry(subject).or_default()[a][b];
        cell.0 += v;
        cell.1 += 1;
    }
    acc.into_iter()
        .map(|(subject, c)| SubjectCells {
            subject,
            cells: c.map(|row| row.map(|(sum, k)| (k > 0).then(|| sum / k as f64))),
        })
        .collect()
}

/// Runs the full battery. Trials missing the relevant measurement are left
/// out of that test only.
pub fn study_report(trials: &[TrialObservation], questionnaires: &[QuestionnaireEntry]) -> StudyReport {
    let mut report = StudyReport::default();

    let mut outcomes: Vec<(&str, Vec<SubjectCells>)> = vec![(
        "flight_performance",
        subject_cells(trials.iter().filter_map(|t| t.performance.map(|p| (t.subject.clone(), t.condition, t.task, p)))),
    )];
    for instrument in [Instrument::Tlx, Instrument::Ssq, Instrument::Ues] {
        let rows: Vec<_> = questionnaires.iter().filter(|q| q.instrument == instrument).collect();
        if !rows.is_empty() {
            outcomes.push((
                instrument.outcome(),
                subject_cells(rows.iter().map(|q| (q.subject.clone(), q.condition, q.task, q.score))),
            ));
        }
    }
    for (outcome, cells) in &outcomes {
        match rm_anova_2x2(cells) {
            Ok(table) => {
                if !table.excluded.is_empty() {
                    report.notes.push(format!("{outcome}: excluded subjects {}", table.excluded.join(" ")));
                }
                for (term, res) in
                    [("condition", table.condition), ("task", table.task), ("condition:task", table.interaction)]
                {
                    report.rows.push(anova_row(outcome, term, res, table.n_subjects));
                }
            }
            Err(e) => report.notes.push(format!("rm_anova {outcome}: {e}")),
        }
    }

    for (rating, pick) in [("isa", (|r: RatingPair| r.isa) as fn(RatingPair) -> u8), ("f_isa", |r| r.f_isa)] {
        let outcome = format!("flight_performance~{rating}");
        let mut by_condition = Vec::new();
        for condition in CONDITIONS {
            let (x, y): (Vec<f64>, Vec<f64>) = trials
                .iter()
                .filter(|t| t.condition == condition)
                .filter_map(|t| Some((t.performance?, pick(t.ratings?) as f64)))
                .unzip();
            match spearman(&x, &y) {
                Ok(c) => {
                    report.rows.push(ReportRow {
                        test: "spearman".into(),
                        outcome: outcome.clone(),
                        term: condition.as_str().into(),
                        statistic_name: "rho",
                        statistic: c.rho,
                        df1: Some((c.n - 2) as f64),
                        df2: None,
                        n: c.n,
                        p: c.p,
                        p_fdr: f64::NAN,
                        effect_name: "rho",
                        effect: c.rho,
                        ci: None,
                    });
                    by_condition.push(Some(c));
                }
                Err(e) => {
                    report.notes.push(format!("spearman {outcome} {}: {e}", condition.as_str()));
                    by_condition.push(None);
                }
            }
        }
        if let [Some(fixed), Some(adaptive)] = by_condition[..] {
            match fisher_z_compare(fixed.rho, fixed.n, adaptive.rho, adaptive.n) {
                Ok(z) => report.rows.push(ReportRow {
                    test: "fisher_z".into(),
                    outcome: outcome.clone(),
                    term: "fixed-adaptive".into(),
                    statistic_name: "z",
                    statistic: z.z,
                    df1: None,
                    df2: None,
                    n: fixed.n + adaptive.n,
                    p: z.p,
                    p_fdr: f64::NAN,
                    effect_name: "rho_diff",
                    effect: fixed.rho - adaptive.rho,
                    ci: None,
                }),
                Err(e) => report.notes.push(format!("fisher_z {outcome}: {e}")),
            }
        }
    }

    let raw: Vec<f64> = report.rows.iter().map(|r| r.p).collect();
    if let Ok(adj) = fdr_adjust(&raw) {
        for (row, q) in report.rows.iter_mut().zip(adj) {
            row.p_fdr = q;
        }
    }
    report
}

fn anova_row(outcome: &str, term: &str, res: AnovaResult, n: usize) -> ReportRow {
    ReportRow {
        test: "rm_anova".into(),
        outcome: outcome.into(),
        term: term.into(),
        statistic_name: "F",
        statistic: res.f,
        df1: Some(res.df.0 as f64),
        df2: Some(res.df.1 as f64),
        n,
        p: res.p,
        p_fdr: f64::NAN,
        effect_name: "eta_p2",
        effect: res.eta_p2,
        ci: Some(res.ci),
    }
}

pub const REPORT_HEADER: &str = "test,outcome,term,statistic_name,statistic,df1,df2,n,p,p_fdr,effect_name,effect,ci_low,ci_high";

impl StudyReport {
    /// Comma-delimited table, header first; notes follow as `#` lines.
    pub fn to_delimited(&self) -> String {
        let num = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
        let mut s = String::from(REPORT_HEADER);
        s.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{:.6},{},{},{},{:.6e},{:.6e},{},{:.6},{},{}",
                r.test,
                r.outcome,
                r.term,
                r.statistic_name,
                r.statistic,
                num(r.df1),
                num(r.df2),
                r.n,
                r.p,
                r.p_fdr,
                r.effect_name,
                r.effect,
                num(r.ci.map(|c| c.0)),
                num(r.ci.map(|c| c.1)),
            );
        }
        for note in &self.notes {
            let _ = writeln!(s, "# {note}");
        }
        s
    }
}
