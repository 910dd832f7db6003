//! Detection metrics over scored clips.
//!
//! Scores are fake-class probabilities: higher means more likely fake, and a
//! clip is called fake when its score is at or above the decision threshold.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::augment::SoftLabel;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Bonafide,
    Fake,
}

impl Label {
    /// Hard label from a soft target (fake when `p_fake >= 0.5`).
    pub fn from_soft(label: SoftLabel) -> Self {
        if label.is_fake() {
            Label::Fake
        } else {
            Label::Bonafide
        }
    }

    pub fn soft(self) -> SoftLabel {
        match self {
            Label::Bonafide => SoftLabel::BONAFIDE,
            Label::Fake => SoftLabel::FAKE,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Label::Bonafide => Label::Fake,
            Label::Fake => Label::Bonafide,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Bonafide => "bonafide",
            Label::Fake => "fake",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bonafide" => Ok(Label::Bonafide),
            "fake" | "spoof" => Ok(Label::Fake),
            other => Err(Error::InvalidConfig(format!("unknown label `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredItem {
    pub id: String,
    pub label: Label,
    pub score: f64,
}

/// Scores with their ground-truth labels.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoreSet {
    pub items: Vec<ScoredItem>,
}

impl ScoreSet {
    pub fn new(items: Vec<(String, f64, Label)>) -> Self {
        Self {
            items: items
                .into_iter()
                .map(|(id, score, label)| ScoredItem { id, label, score })
                .collect(),
        }
    }

    /// Anonymous items, ids `0..n`.
    pub fn from_pairs(scores: &[f64], labels: &[Label]) -> Self {
        Self::new(
            scores
                .iter()
                .zip(labels)
                .enumerate()
                .map(|(i, (&s, &l))| (i.to_string(), s, l))
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn counts(&self) -> (usize, usize) {
        let fake = self.items.iter().filter(|i| i.label == Label::Fake).count();
        (self.items.len() - fake, fake)
    }

    pub fn with_flipped_labels(&self) -> Self {
        Self {
            items: self
                .items
                .iter()
                .map(|i| ScoredItem {
                    label: i.label.flipped(),
                    ..i.clone()
                })
                .collect(),
        }
    }

    fn check(&self) -> Result<()> {
        if self.items.is_empty() {
            return Err(Error::EmptyInput("score set"));
        }
        if self.items.iter().any(|i| i.score.is_nan()) {
            return Err(Error::InvalidConfig("NaN score".into()));
        }
        match self.counts() {
            (0, _) => Err(Error::SingleClass("fake")),
            (_, 0) => Err(Error::SingleClass("bonafide")),
            _ => Ok(()),
        }
    }

    /// CSV with header `id,label,score`.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(source) => Error::Unwritable {
                path: path.to_path_buf(),
                source,
            },
            other => Error::InvalidConfig(format!("{other:?}")),
        })?;
        for item in &self.items {
            w.serialize(item)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        let mut r = csv::Reader::from_path(path)?;
        let items = r
            .deserialize()
            .collect::<std::result::Result<Vec<ScoredItem>, _>>()?;
        Ok(Self { items })
    }
}

/// Area under the ROC curve, with ties counted as one half.
///
/// Computed from doubled mid-ranks in integer arithmetic so that flipping
/// every label gives exactly `1 - auc`.
pub fn auc(set: &ScoreSet) -> Result<f64> {
    set.check()?;
    let mut order: Vec<&ScoredItem> = set.items.iter().collect();
    order.sort_by(|a, b| a.score.total_cmp(&b.score));
    let (n_bona, n_fake) = set.counts();
    // Sum over fakes of doubled mid-ranks (1-based ranks i..=j give i + j).
    let mut rank2_sum: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && order[j + 1].score == order[i].score {
            j += 1;
        }
        let doubled = (i + 1 + j + 1) as u128;
        let fakes = order[i..=j]
            .iter()
            .filter(|x| x.label == Label::Fake)
            .count() as u128;
        rank2_sum += doubled * fakes;
        i = j + 1;
    }
    let nf = n_fake as u128;
    let u2 = rank2_sum - nf * (nf + 1);
    let total = 2 * nf * n_bona as u128;
    Ok(if 2 * u2 <= total {
        u2 as f64 / total as f64
    } else {
        1.0 - (total - u2) as f64 / total as f64
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EerPoint {
    pub eer: f64,
    pub threshold: f64,
}

/// Error rates at threshold `t`: (bonafide flagged fake, fakes passed).
pub fn error_rates(set: &ScoreSet, threshold: f64) -> (f64, f64) {
    let (n_bona, n_fake) = set.counts();
    let far = set
        .items
        .iter()
        .filter(|i| i.label == Label::Bonafide && i.score >= threshold)
        .count();
    let frr = set
        .items
        .iter()
        .filter(|i| i.label == Label::Fake && i.score < threshold)
        .count();
    (far as f64 / n_bona as f64, frr as f64 / n_fake as f64)
}

/// Equal error rate.
///
/// Sweeps every distinct score plus one threshold above the maximum, and
/// linearly interpolates between the last threshold where false alarms exceed
/// misses and the first where they do not.
pub fn eer(set: &ScoreSet) -> Result<EerPoint> {
    set.check()?;
    let (n_bona, n_fake) = set.counts();
    let mut order: Vec<&ScoredItem> = set.items.iter().collect();
    order.sort_by(|a, b| a.score.total_cmp(&b.score));

    // Walk thresholds upward; everything before index `i` is below θ.
    let mut bona_below = 0usize;
    let mut fake_below = 0usize;
    let mut prev: Option<(f64, f64, f64)> = None;
    let mut i = 0;
    loop {
        let threshold = if i < order.len() {
            order[i].score
        } else {
            order[order.len() - 1].score.next_up()
        };
        let far = (n_bona - bona_below) as f64 / n_bona as f64;
        let frr = fake_below as f64 / n_fake as f64;
        if far - frr <= 0.0 {
            let Some((t0, far0, frr0)) = prev else {
                return Ok(EerPoint {
                    eer: far,
                    threshold,
                });
            };
            let d0 = far0 - frr0;
            let d1 = far - frr;
            let w = d0 / (d0 - d1);
            return Ok(EerPoint {
                eer: far0 + w * (far - far0),
                threshold: t0 + w * (threshold - t0),
            });
        }
        prev = Some((threshold, far, frr));
        if i >= order.len() {
            unreachable!("false-alarm rate is zero above the maximum score");
        }
        let s = order[i].score;
        while i < order.len() && order[i].score == s {
            match order[i].label {
                Label::Bonafide => bona_below += 1,
                Label::Fake => fake_below += 1,
            }
            i += 1;
        }
    }
}

/// Fraction of items classified correctly with `score >= threshold` as fake.
pub fn accuracy(set: &ScoreSet, threshold: f64) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::EmptyInput("score set"));
    }
    let correct = set
        .items
        .iter()
        .filter(|i| (i.score >= threshold) == (i.label == Label::Fake))
        .count();
    Ok(correct as f64 / set.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n_bonafide: usize,
    pub n_fake: usize,
    pub auc: f64,
    pub eer: f64,
    pub eer_threshold: f64,
    pub accuracy: f64,
    pub threshold: f64,
}

impl MetricsReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain struct")
    }

    /// Two-column table with right-aligned values.
    pub fn to_text(&self) -> String {
        let rows = [
            ("bonafide clips", self.n_bonafide.to_string()),
            ("fake clips", self.n_fake.to_string()),
            ("AUC", format!("{:.4}", self.auc)),
            ("EER", format!("{:.4}", self.eer)),
            ("EER threshold", format!("{:.4}", self.eer_threshold)),
            ("accuracy", format!("{:.4}", self.accuracy)),
            ("decision threshold", format!("{:.4}", self.threshold)),
        ];
        let kw = rows.iter().map(|r| r.0.len()).max().unwrap_or(0);
        let vw = rows.iter().map(|r| r.1.len()).max().unwrap_or(0);
        rows.iter()
            .map(|(k, v)| format!("{k:<kw$}  {v:>vw$}\n"))
            .collect()
    }
}

/// AUC, EER and accuracy at `threshold`.
pub fn report(set: &ScoreSet, threshold: f64) -> Result<MetricsReport> {
    let (n_bonafide, n_fake) = set.counts();
    let e = eer(set)?;
    Ok(MetricsReport {
        n_bonafide,
        n_fake,
        auc: auc(set)?,
        eer: e.eer,
        eer_threshold: e.threshold,
        accuracy: accuracy(set, threshold)?,
        threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn set(scores: &[f64], fakes: &[bool]) -> ScoreSet {
        let labels: Vec<Label> = fakes
            .iter()
            .map(|&f| if f { Label::Fake } else { Label::Bonafide })
            .collect();
        ScoreSet::from_pairs(scores, &labels)
    }

    fn pairwise_auc(s: &ScoreSet) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for f in s.items.iter().filter(|i| i.label == Label::Fake) {
            for b in s.items.iter().filter(|i| i.label == Label::Bonafide) {
                den += 1.0;
                if f.score > b.score {
                    num += 1.0;
                } else if f.score == b.score {
                    num += 0.5;
                }
            }
        }
        num / den
    }

    /// Independent EER: evaluate both error curves by direct counting over
    /// candidate thresholds and locate the sign change.
    fn naive_eer(s: &ScoreSet) -> f64 {
        let mut ts: Vec<f64> = s.items.iter().map(|i| i.score).collect();
        ts.sort_by(f64::total_cmp);
        ts.dedup();
        ts.push(ts[ts.len() - 1] + 1.0);
        let curve: Vec<(f64, f64)> = ts.iter().map(|&t| error_rates(s, t)).collect();
        let k = curve.iter().position(|(a, b)| a - b <= 0.0).unwrap();
        if k == 0 {
            return curve[0].0;
        }
        let (a0, b0) = curve[k - 1];
        let (a1, b1) = curve[k];
        let w = (a0 - b0) / ((a0 - b0) - (a1 - b1));
        a0 + w * (a1 - a0)
    }

    fn scored() -> impl Strategy<Value = ScoreSet> {
        (2usize..40)
            .prop_flat_map(|n| {
                (
                    proptest::collection::vec(0u8..12, n),
                    proptest::collection::vec(any::<bool>(), n),
                )
            })
            .prop_filter("both classes", |(_, f)| {
                f.iter().any(|&x| x) && f.iter().any(|&x| !x)
            })
            .prop_map(|(s, f)| {
                let scores: Vec<f64> = s.iter().map(|&v| f64::from(v) / 11.0).collect();
                set(&scores, &f)
            })
    }

    #[test]
    fn perfect_and_inverted_separation() {
        let s = set(&[0.1, 0.2, 0.8, 0.9], &[false, false, true, true]);
        assert_eq!(auc(&s).unwrap(), 1.0);
        assert_eq!(eer(&s).unwrap().eer, 0.0);
        assert_eq!(accuracy(&s, 0.5).unwrap(), 1.0);
        let inv = s.with_flipped_labels();
        assert_eq!(auc(&inv).unwrap(), 0.0);
        assert_eq!(eer(&inv).unwrap().eer, 1.0);
    }

    #[test]
    fn constant_scores_are_chance() {
        let s = set(&[0.5; 6], &[false, true, false, true, true, false]);
        assert_eq!(auc(&s).unwrap(), 0.5);
        assert!((eer(&s).unwrap().eer - 0.5).abs() < 1e-12);
    }

    #[test]
    fn single_class_and_empty_rejected() {
        assert!(matches!(
            auc(&set(&[0.1, 0.2], &[false, false])),
            Err(Error::SingleClass(_))
        ));
        assert!(matches!(
            eer(&set(&[0.1, 0.2], &[true, true])),
            Err(Error::SingleClass(_))
        ));
        assert!(matches!(
            auc(&ScoreSet::default()),
            Err(Error::EmptyInput(_))
        ));
    }

    #[test]
    fn eer_interpolates_between_thresholds() {
        // One overlap pair: bonafide 0.6 above fake 0.4.
        let s = set(&[0.1, 0.6, 0.4, 0.9], &[false, false, true, true]);
        let e = eer(&s).unwrap();
        assert!((e.eer - naive_eer(&s)).abs() < 1e-12);
        assert!((e.eer - 0.5).abs() < 1e-12);
    }

    #[test]
    fn report_formats() {
        let s = set(&[0.1, 0.6, 0.4, 0.9], &[false, false, true, true]);
        let r = report(&s, 0.5).unwrap();
        let back: MetricsReport = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(back, r);
        let text = r.to_text();
        assert_eq!(text.lines().count(), 7);
        let widths: Vec<usize> = text.lines().map(str::len).collect();
        assert!(widths.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scores.csv");
        let s = ScoreSet::new(vec![
            ("a.wav".into(), 0.25, Label::Bonafide),
            ("b,c.wav".into(), 0.125, Label::Fake),
        ]);
        s.write_csv(&path).unwrap();
        let head = std::fs::read_to_string(&path).unwrap();
        assert!(head.starts_with("id,label,score\n"));
        assert_eq!(ScoreSet::read_csv(&path).unwrap(), s);
    }

    proptest! {
        #[test]
        fn auc_matches_pairwise_count(s in scored()) {
            prop_assert!((auc(&s).unwrap() - pairwise_auc(&s)).abs() < 1e-12);
        }

        #[test]
        fn auc_flip_identity_is_exact(s in scored()) {
            let a = auc(&s).unwrap();
            let b = auc(&s.with_flipped_labels()).unwrap();
            prop_assert_eq!(a + b, 1.0);
        }

        #[test]
        fn metrics_invariant_under_monotone_transform(s in scored()) {
            let mut t = s.clone();
            for i in &mut t.items {
                i.score = (3.0 * i.score + 0.5).exp();
            }
            prop_assert_eq!(auc(&s).unwrap(), auc(&t).unwrap());
            prop_assert!((eer(&s).unwrap().eer - eer(&t).unwrap().eer).abs() < 1e-12);
        }

        #[test]
        fn eer_matches_direct_sweep(s in scored()) {
            let e = eer(&s).unwrap();
            prop_assert!((e.eer - naive_eer(&s)).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&e.eer));
        }

        #[test]
        fn accuracy_matches_naive(s in scored(), t in 0.0f64..1.0) {
            let mut correct = 0;
            for i in &s.items {
                let called_fake = i.score >= t;
                if called_fake == (i.label == Label::Fake) {
                    correct += 1;
                }
            }
            prop_assert_eq!(accuracy(&s, t).unwrap(), correct as f64 / s.len() as f64);
        }
    }
}
