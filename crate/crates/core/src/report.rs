//! Tabular outputs: the per-system EER table and the EER/opinion-score report.

use std::path::Path;

use crate::error::{Error, Result};
use crate::metrics::{compute_mos_for, far_mr_curve, machine_opinion_score, AttackEer, OpinionRecord, ScoreSet};

pub const EER_HEADER: &str = "system_id\teer_percent\tthreshold\tn_bonafide\tn_spoof";
/// System id of the attack-averaged row in an EER table.
pub const AVERAGE_ROW: &str = "average";

fn preamble_lines(preamble: &[String]) -> String {
    preamble.iter().map(|l| format!("# {l}\n")).collect()
}

/// One row per spoof system, then the unweighted average row.
pub fn eer_table_tsv(res: &AttackEer, preamble: &[String]) -> String {
    let mut out = preamble_lines(preamble);
    out.push_str(EER_HEADER);
    out.push('\n');
    let mut n_spoof = 0;
    let mut n_bona = 0;
    for (sys, e) in &res.per_attack {
        out.push_str(&format!(
            "{sys}\t{}\t{}\t{}\t{}\n",
            e.eer_percent, e.threshold, e.n_bonafide, e.n_spoof
        ));
        n_spoof += e.n_spoof;
        n_bona = e.n_bonafide;
    }
    out.push_str(&format!(
        "{AVERAGE_ROW}\t{}\t-\t{n_bona}\t{n_spoof}\n",
        res.average_percent
    ));
    out
}

pub const CURVE_HEADER: &str = "system_id\tthreshold\tfar\tmr";

/// Raw FAR/MR curve of every spoof system against all bona fide trials,
/// sentinel thresholds written as `-inf` and `inf`.
pub fn curve_tsv(scores: &ScoreSet, preamble: &[String]) -> Result<String> {
    let mut out = preamble_lines(preamble);
    out.push_str(CURVE_HEADER);
    out.push('\n');
    let bona = scores.bonafide_scores();
    for sys in scores.spoof_systems() {
        for p in far_mr_curve(&bona, &scores.system_scores(&sys))? {
            out.push_str(&format!("{sys}\t{}\t{}\t{}\n", p.threshold, p.far, p.mr));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EerRow {
    pub system_id: String,
    pub eer_percent: f64,
}

/// Per-system rows of an EER table; the average row is skipped.
pub fn parse_eer_table(text: &str, path: &Path) -> Result<Vec<EerRow>> {
    let err = |line: usize, reason: String| Error::ManifestParse {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let mut rows = Vec::new();
    let mut header_seen = false;
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        if !header_seen {
            if line != EER_HEADER {
                return Err(err(lineno, format!("expected header '{EER_HEADER}'")));
            }
            header_seen = true;
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 5 {
            return Err(err(lineno, format!("expected 5 columns, found {}", cols.len())));
        }
        if cols[0] == AVERAGE_ROW {
            continue;
        }
        let eer_percent: f64 = cols[1]
            .parse()
            .ok()
            .filter(|e| (0.0..=100.0).contains(e))
            .ok_or_else(|| err(lineno, format!("bad eer_percent '{}'", cols[1])))?;
        rows.push(EerRow {
            system_id: cols[0].to_string(),
            eer_percent,
        });
    }
    if !header_seen {
        return Err(err(1, "missing header".into()));
    }
    if rows.is_empty() {
        return Err(Error::NoSpoofSystems(format!("{} lists no systems", path.display())));
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub system_id: String,
    pub eer_percent: f64,
    pub machine_opinion_score: f64,
    pub mos: Option<f64>,
}

/// Join EERs with opinion scores; with opinions, every system needs ratings.
pub fn build_report(eers: &[EerRow], opinions: Option<&[OpinionRecord]>) -> Result<Vec<ReportRow>> {
    let mos = match opinions {
        Some(ops) => {
            let systems: Vec<String> = eers.iter().map(|r| r.system_id.clone()).collect();
            Some(compute_mos_for(ops, &systems)?)
        }
        None => None,
    };
    Ok(eers
        .iter()
        .map(|r| ReportRow {
            system_id: r.system_id.clone(),
            eer_percent: r.eer_percent,
            machine_opinion_score: machine_opinion_score(r.eer_percent),
            mos: mos.as_ref().map(|m| m[&r.system_id]),
        })
        .collect())
}

/// The `mos` column is present only when the rows carry opinion scores.
pub fn report_tsv(rows: &[ReportRow], preamble: &[String]) -> String {
    let with_mos = rows.iter().any(|r| r.mos.is_some());
    let mut out = preamble_lines(preamble);
    out.push_str("system_id\teer_percent\tmachine_opinion_score");
    if with_mos {
        out.push_str("\tmos");
    }
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{}\t{}\t{}",
            r.system_id, r.eer_percent, r.machine_opinion_score
        ));
        if let Some(m) = r.mos {
            out.push_str(&format!("\t{m}"));
        }
        out.push('\n');
    }
    out
}
