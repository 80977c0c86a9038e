//! Detection error metrics over labeled score sets, and opinion-score aggregation.
//!
//! Threshold convention: a spoof trial is (falsely) accepted when its score is
//! `>= t`; a bona fide trial is missed when its score is `< t`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

/// System id carried by bona fide records.
pub const BONAFIDE_SYSTEM: &str = "-";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Bonafide,
    Spoof,
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Bonafide => "bonafide",
            Label::Spoof => "spoof",
        })
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "bonafide" => Ok(Label::Bonafide),
            "spoof" => Ok(Label::Spoof),
            other => Err(format!("unknown label '{other}' (expected bonafide or spoof)")),
        }
    }
}

/// Checks the label/system pairing rule shared by manifests and score files.
pub fn check_system_id(label: Label, system_id: &str) -> std::result::Result<(), String> {
    match label {
        Label::Bonafide if system_id != BONAFIDE_SYSTEM => Err(format!(
            "bonafide rows must use system id '{BONAFIDE_SYSTEM}', got '{system_id}'"
        )),
        Label::Spoof if system_id.is_empty() || system_id == BONAFIDE_SYSTEM => {
            Err("spoof rows need a system id other than '-'".into())
        }
        _ => Ok(()),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRecord {
    pub utt_id: String,
    pub label: Label,
    pub system_id: String,
    pub llr: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScoreSet {
    pub records: Vec<ScoreRecord>,
}

pub const SCORE_HEADER: &str = "utt_id\tlabel\tsystem_id\tllr";

impl ScoreSet {
    pub fn bonafide_scores(&self) -> Vec<f64> {
        self.scores_where(|r| r.label == Label::Bonafide)
    }

    pub fn spoof_scores(&self) -> Vec<f64> {
        self.scores_where(|r| r.label == Label::Spoof)
    }

    pub fn system_scores(&self, system_id: &str) -> Vec<f64> {
        self.scores_where(|r| r.label == Label::Spoof && r.system_id == system_id)
    }

    fn scores_where(&self, keep: impl Fn(&ScoreRecord) -> bool) -> Vec<f64> {
        self.records.iter().filter(|r| keep(r)).map(|r| r.llr).collect()
    }

    /// Spoof system ids in order of first appearance.
    pub fn spoof_systems(&self) -> Vec<String> {
        let mut seen = Vec::<String>::new();
        for r in &self.records {
            if r.label == Label::Spoof && !seen.contains(&r.system_id) {
                seen.push(r.system_id.clone());
            }
        }
        seen
    }

    /// TSV with a header row; `llr` uses the shortest round-trip decimal form.
    pub fn to_tsv(&self, preamble: &[String]) -> String {
        let mut out = String::new();
        for line in preamble {
            out.push_str("# ");
            out.push_str(line);
            out.push('\n');
        }
        out.push_str(SCORE_HEADER);
        out.push('\n');
        for r in &self.records {
            out.push_str(&format!("{}\t{}\t{}\t{}\n", r.utt_id, r.label, r.system_id, r.llr));
        }
        out
    }

    pub fn parse_tsv(text: &str, path: &Path) -> Result<Self> {
        let err = |line: usize, reason: String| Error::ManifestParse {
            path: path.to_path_buf(),
            line,
            reason,
        };
        let mut records = Vec::new();
        let mut header_seen = false;
        for (i, line) in text.lines().enumerate() {
            let lineno = i + 1;
            if line.starts_with('#') || line.trim().is_empty() {
                continue;
            }
            if !header_seen {
                if line != SCORE_HEADER {
                    return Err(err(lineno, format!("expected header '{SCORE_HEADER}'")));
                }
                header_seen = true;
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 4 {
                return Err(err(lineno, format!("expected 4 columns, found {}", cols.len())));
            }
            let label: Label = cols[1].parse().map_err(|e| err(lineno, e))?;
            check_system_id(label, cols[2]).map_err(|e| err(lineno, e))?;
            let llr: f64 = cols[3]
                .parse()
                .map_err(|_| err(lineno, format!("bad score '{}'", cols[3])))?;
            if !llr.is_finite() {
                return Err(err(lineno, "score is not finite".into()));
            }
            records.push(ScoreRecord {
                utt_id: cols[0].to_string(),
                label,
                system_id: cols[2].to_string(),
                llr,
            });
        }
        if !header_seen {
            return Err(err(1, "missing header".into()));
        }
        Ok(Self { records })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub threshold: f64,
    pub far: f64,
    pub mr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EerResult {
    pub eer_percent: f64,
    pub threshold: f64,
    pub n_bonafide: usize,
    pub n_spoof: usize,
}

fn check_populations(bona: &[f64], spoof: &[f64]) -> Result<()> {
    if bona.is_empty() {
        return Err(Error::EmptyPopulation("no bona fide scores".into()));
    }
    if spoof.is_empty() {
        return Err(Error::EmptyPopulation("no spoof scores".into()));
    }
    if bona.iter().chain(spoof).any(|s| s.is_nan()) {
        return Err(Error::Numerical("NaN score".into()));
    }
    Ok(())
}

/// FAR and MR at every distinct score plus the `-inf` / `+inf` sentinels,
/// in increasing threshold order.
pub fn far_mr_curve(bona: &[f64], spoof: &[f64]) -> Result<Vec<CurvePoint>> {
    check_populations(bona, spoof)?;
    let mut b = bona.to_vec();
    let mut s = spoof.to_vec();
    b.sort_by(f64::total_cmp);
    s.sort_by(f64::total_cmp);
    let mut thresholds: Vec<f64> = b.iter().chain(&s).copied().collect();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();

    let nb = b.len() as f64;
    let ns = s.len() as f64;
    let mut curve = Vec::with_capacity(thresholds.len() + 2);
    curve.push(CurvePoint {
        threshold: f64::NEG_INFINITY,
        far: 1.0,
        mr: 0.0,
    });
    // bona below t and spoof below t, advanced monotonically
    let (mut ib, mut is) = (0usize, 0usize);
    for &t in &thresholds {
        while ib < b.len() && b[ib] < t {
            ib += 1;
        }
        while is < s.len() && s[is] < t {
            is += 1;
        }
        curve.push(CurvePoint {
            threshold: t,
            far: (s.len() - is) as f64 / ns,
            mr: ib as f64 / nb,
        });
    }
    curve.push(CurvePoint {
        threshold: f64::INFINITY,
        far: 0.0,
        mr: 1.0,
    });
    Ok(curve)
}

/// Rate where FAR and MR cross on a curve ordered by threshold.
///
/// An exact tie is returned as is; otherwise both rates are linearly
/// interpolated between the two points where `FAR - MR` changes sign.
pub fn eer_from_curve(curve: &[CurvePoint]) -> (f64, f64) {
    for (i, p) in curve.iter().enumerate() {
        let diff = p.far - p.mr;
        if diff == 0.0 {
            return (p.far, p.threshold);
        }
        if diff < 0.0 {
            let q = curve[i - 1];
            let dq = q.far - q.mr;
            let alpha = dq / (dq - diff);
            let rate = q.far + alpha * (p.far - q.far);
            let threshold = match (q.threshold.is_finite(), p.threshold.is_finite()) {
                (true, true) => q.threshold + alpha * (p.threshold - q.threshold),
                (true, false) => q.threshold,
                (false, true) => p.threshold,
                (false, false) => 0.0,
            };
            return (rate, threshold);
        }
    }
    unreachable!("curve ends with FAR=0, MR=1")
}

pub fn compute_eer(bona: &[f64], spoof: &[f64]) -> Result<EerResult> {
    let curve = far_mr_curve(bona, spoof)?;
    let (rate, threshold) = eer_from_curve(&curve);
    Ok(EerResult {
        eer_percent: 100.0 * rate,
        threshold,
        n_bonafide: bona.len(),
        n_spoof: spoof.len(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackEer {
    /// In order of first appearance in the score set.
    pub per_attack: Vec<(String, EerResult)>,
    pub average_percent: f64,
}

/// EER of every spoof system against the shared bona fide population, and
/// their unweighted mean.
pub fn attack_averaged_eer(scores: &ScoreSet) -> Result<AttackEer> {
    let systems = scores.spoof_systems();
    if systems.is_empty() {
        return Err(Error::NoSpoofSystems("score set has no spoof trials".into()));
    }
    attack_averaged_eer_for(scores, &systems)
}

/// Like [`attack_averaged_eer`] over an explicit list of systems; a listed
/// system without trials is an error.
pub fn attack_averaged_eer_for(scores: &ScoreSet, systems: &[String]) -> Result<AttackEer> {
    if systems.is_empty() {
        return Err(Error::NoSpoofSystems("no systems requested".into()));
    }
    let bona = scores.bonafide_scores();
    if bona.is_empty() {
        return Err(Error::EmptyPopulation("no bona fide scores".into()));
    }
    let missing: Vec<&str> = systems
        .iter()
        .filter(|s| scores.system_scores(s).is_empty())
        .map(String::as_str)
        .collect();
    if !missing.is_empty() {
        return Err(Error::NoSpoofSystems(missing.join(", ")));
    }
    let per_attack = systems
        .iter()
        .map(|s| Ok((s.clone(), compute_eer(&bona, &scores.system_scores(s))?)))
        .collect::<Result<Vec<_>>>()?;
    let average_percent =
        per_attack.iter().map(|(_, e)| e.eer_percent).sum::<f64>() / per_attack.len() as f64;
    Ok(AttackEer {
        per_attack,
        average_percent,
    })
}

/// `EER% / 10` on a 0..5 scale, where 5 corresponds to chance-level detection.
pub fn machine_opinion_score(eer_percent: f64) -> f64 {
    if eer_percent > 50.0 {
        log::warn!("EER {eer_percent}% exceeds chance level; the detector is likely misconfigured");
    }
    (eer_percent / 10.0).clamp(0.0, 5.0)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OpinionRecord {
    pub utt_id: String,
    pub system_id: String,
    pub listener_id: String,
    pub score: u8,
}

pub const OPINION_HEADER: &str = "utt_id\tsystem_id\tlistener_id\tscore";

pub fn parse_opinions(text: &str, path: &Path) -> Result<Vec<OpinionRecord>> {
    let err = |line: usize, reason: String| Error::ManifestParse {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let mut out = Vec::new();
    let mut header_seen = false;
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        if !header_seen {
            header_seen = true;
            if line == OPINION_HEADER {
                continue;
            }
            return Err(err(lineno, format!("expected header '{OPINION_HEADER}'")));
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 4 {
            return Err(err(lineno, format!("expected 4 columns, found {}", cols.len())));
        }
        let score: u8 = cols[3]
            .parse()
            .ok()
            .filter(|s| (1..=5).contains(s))
            .ok_or_else(|| err(lineno, format!("score '{}' is not an integer in 1..5", cols[3])))?;
        out.push(OpinionRecord {
            utt_id: cols[0].into(),
            system_id: cols[1].into(),
            listener_id: cols[2].into(),
            score,
        });
    }
    Ok(out)
}

/// Mean opinion score per system over the ratings actually given.
pub fn compute_mos(records: &[OpinionRecord]) -> BTreeMap<String, f64> {
    let mut acc: BTreeMap<String, (u64, usize)> = BTreeMap::new();
    for r in records {
        let e = acc.entry(r.system_id.clone()).or_default();
        e.0 += r.score as u64;
        e.1 += 1;
    }
    acc.into_iter()
        .map(|(k, (sum, n))| (k, sum as f64 / n as f64))
        .collect()
}

/// MOS for the listed systems; any system without ratings is an error.
pub fn compute_mos_for(records: &[OpinionRecord], systems: &[String]) -> Result<BTreeMap<String, f64>> {
    let all = compute_mos(records);
    systems
        .iter()
        .map(|s| {
            all.get(s)
                .map(|&m| (s.clone(), m))
                .ok_or_else(|| Error::NoRatings(s.clone()))
        })
        .collect()
}
