//! Keep/discard decisions from originality scores. Recorded items are always kept.

use std::cmp::Ordering;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Label;
use crate::rank::ScoredItem;

#[derive(Debug, Error)]
pub enum SelectionError {
    #[error("TopK({k}) exceeds the {available} synthetic items")]
    KTooLarge { k: usize, available: usize },
    #[error("need at least {needed} items, got {got}")]
    TooFewItems { got: usize, needed: usize },
    #[error("invalid selection policy: {0}")]
    InvalidPolicy(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum SelectionPolicy {
    TopK { k: usize },
    TopFraction { fraction: f64 },
    Threshold { tau: f64 },
}

impl Default for SelectionPolicy {
    fn default() -> Self {
        SelectionPolicy::TopFraction { fraction: 0.5 }
    }
}

/// `ceil(x)` that ignores representation error just above an integer.
fn ceil_count(x: f64) -> usize {
    (x - 1e-9).ceil().max(0.0) as usize
}

impl SelectionPolicy {
    pub fn validate(&self) -> Result<(), SelectionError> {
        let bad = |m: String| Err(SelectionError::InvalidPolicy(m));
        match *self {
            SelectionPolicy::TopK { k } if k == 0 => bad("k must be at least 1".into()),
            SelectionPolicy::TopFraction { fraction } if !(fraction > 0.0 && fraction <= 1.0) => {
                bad(format!("fraction {fraction} outside (0, 1]"))
            }
            SelectionPolicy::Threshold { tau } if !(0.0..=1.0).contains(&tau) => {
                bad(format!("threshold {tau} outside [0, 1]"))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionEntry {
    pub id: String,
    pub label: Label,
    pub originality: f64,
    pub selected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionManifest {
    /// Sorted by descending originality, then id.
    pub entries: Vec<SelectionEntry>,
    pub policy: SelectionPolicy,
    /// sha256 of the rank model file that produced the scores.
    pub model_sha256: Option<String>,
}

impl SelectionManifest {
    pub fn count(&self, label: Label, selected: bool) -> usize {
        self.entries
            .iter()
            .filter(|e| e.label == label && e.selected == selected)
            .count()
    }

    pub fn scored(&self) -> Vec<ScoredEntry> {
        self.entries
            .iter()
            .map(|e| ScoredEntry {
                id: e.id.clone(),
                label: e.label,
                originality: e.originality,
            })
            .collect()
    }

    pub fn write_csv(&self, out: impl Write) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for e in &self.entries {
            w.serialize(e)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Policy, model hash and counts.
    pub fn sidecar_json(&self) -> String {
        let v = serde_json::json!({
            "policy": self.policy,
            "model_sha256": self.model_sha256,
            "recorded": self.count(Label::Recorded, true),
            "synthetic_selected": self.count(Label::Synthetic, true),
            "synthetic_discarded": self.count(Label::Synthetic, false),
        });
        serde_json::to_string_pretty(&v).expect("sidecar serializes")
    }
}

pub fn read_selection_csv(input: impl Read) -> csv::Result<Vec<SelectionEntry>> {
    csv::Reader::from_reader(input).deserialize().collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredEntry {
    pub id: String,
    pub label: Label,
    pub originality: f64,
}

impl From<&ScoredItem> for ScoredEntry {
    fn from(s: &ScoredItem) -> Self {
        Self {
            id: s.id.clone(),
            label: s.label,
            originality: s.originality,
        }
    }
}

fn by_rank(a: &ScoredEntry, b: &ScoredEntry) -> Ordering {
    b.originality.total_cmp(&a.originality).then_with(|| a.id.cmp(&b.id))
}

pub fn select(
    items: &[ScoredEntry],
    policy: SelectionPolicy,
    model_sha256: Option<&str>,
) -> Result<SelectionManifest, SelectionError> {
    policy.validate()?;
    if let Some(bad) = items.iter().find(|e| !(0.0..=1.0).contains(&e.originality)) {
        return Err(SelectionError::InvalidPolicy(format!(
            "originality {} of {} outside [0, 1]",
            bad.originality, bad.id
        )));
    }
    let mut sorted: Vec<ScoredEntry> = items.to_vec();
    sorted.sort_by(by_rank);
    let n_syn = sorted.iter().filter(|e| e.label == Label::Synthetic).count();
    let quota = match policy {
        SelectionPolicy::TopK { k } if k > n_syn => {
            return Err(SelectionError::KTooLarge { k, available: n_syn });
        }
        SelectionPolicy::TopK { k } => Some(k),
        SelectionPolicy::TopFraction { fraction } => Some(ceil_count(fraction * n_syn as f64)),
        SelectionPolicy::Threshold { .. } => None,
    };
    let mut taken = 0;
    let entries = sorted
        .into_iter()
        .map(|e| {
            let selected = match (e.label, quota, policy) {
                (Label::Recorded, _, _) => true,
                (Label::Synthetic, Some(q), _) => {
                    taken += 1;
                    taken <= q
                }
                (Label::Synthetic, None, SelectionPolicy::Threshold { tau }) => e.originality >= tau,
                (Label::Synthetic, None, _) => unreachable!("only thresholds lack a quota"),
            };
            SelectionEntry {
                id: e.id,
                label: e.label,
                originality: e.originality,
                selected,
            }
        })
        .collect();
    Ok(SelectionManifest {
        entries,
        policy,
        model_sha256: model_sha256.map(str::to_string),
    })
}

/// Top and bottom `ceil(fraction * n)` items by originality (capped at `n / 2`
/// so the groups never overlap). Returned in rank order.
pub fn split_extremes(
    items: &[ScoredEntry],
    fraction: f64,
) -> Result<(Vec<ScoredEntry>, Vec<ScoredEntry>), SelectionError> {
    if !(fraction > 0.0 && fraction <= 0.5) {
        return Err(SelectionError::InvalidPolicy(format!(
            "fraction {fraction} outside (0, 0.5]"
        )));
    }
    let needed = ceil_count(1.0 / fraction);
    if items.len() < needed {
        return Err(SelectionError::TooFewItems {
            got: items.len(),
            needed,
        });
    }
    let mut sorted = items.to_vec();
    sorted.sort_by(by_rank);
    let g = ceil_count(fraction * items.len() as f64).min(items.len() / 2);
    let low = sorted.split_off(sorted.len() - g);
    sorted.truncate(g);
    Ok((sorted, low))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use Label::{Recorded as R, Synthetic as S};

    fn e(id: &str, label: Label, o: f64) -> ScoredEntry {
        ScoredEntry {
            id: id.into(),
            label,
            originality: o,
        }
    }

    fn selected_ids(m: &SelectionManifest) -> Vec<&str> {
        m.entries
            .iter()
            .filter(|x| x.selected && x.label == S)
            .map(|x| x.id.as_str())
            .collect()
    }

    #[test]
    fn top_k_tie_rule() {
        let items = vec![
            e("d", S, 0.1),
            e("c", S, 0.7),
            e("b", S, 0.7),
            e("a", S, 0.9),
            e("r", R, 0.0),
        ];
        let m = select(&items, SelectionPolicy::TopK { k: 2 }, None).unwrap();
        assert_eq!(selected_ids(&m), vec!["a", "b"]);
        assert!(m.entries.iter().find(|x| x.id == "r").unwrap().selected);
        let ids: Vec<&str> = m.entries.iter().map(|x| x.id.as_str()).collect();
        assert_eq!(ids, vec!["a", "b", "c", "d", "r"]);
    }

    #[test]
    fn threshold_zero_keeps_all() {
        let items = vec![e("a", S, 0.0), e("b", S, 0.4), e("c", R, 0.2)];
        let m = select(&items, SelectionPolicy::Threshold { tau: 0.0 }, None).unwrap();
        assert!(m.entries.iter().all(|x| x.selected));
        let m = select(&items, SelectionPolicy::Threshold { tau: 0.4 }, None).unwrap();
        assert_eq!(selected_ids(&m), vec!["b"]);
    }

    #[test]
    fn fraction_rounds_up() {
        let items: Vec<ScoredEntry> = (0..80).map(|i| e(&format!("s{i:02}"), S, i as f64 / 80.0)).collect();
        let m = select(&items, SelectionPolicy::TopFraction { fraction: 0.5 }, Some("abc")).unwrap();
        assert_eq!(m.count(S, true), 40);
        let m = select(&items[..3], SelectionPolicy::TopFraction { fraction: 0.5 }, None).unwrap();
        assert_eq!(m.count(S, true), 2);
        let m = select(&items[..7], SelectionPolicy::TopFraction { fraction: 0.01 }, None).unwrap();
        assert_eq!(m.count(S, true), 1);
        let m = select(&items, SelectionPolicy::TopFraction { fraction: 0.1 }, None).unwrap();
        assert_eq!(m.count(S, true), 8);
    }

    #[test]
    fn errors() {
        let items = vec![e("a", S, 0.5), e("b", R, 0.5)];
        assert!(matches!(
            select(&items, SelectionPolicy::TopK { k: 2 }, None),
            Err(SelectionError::KTooLarge { k: 2, available: 1 })
        ));
        assert!(select(&items, SelectionPolicy::TopK { k: 0 }, None).is_err());
        assert!(select(&items, SelectionPolicy::TopFraction { fraction: 1.5 }, None).is_err());
        assert!(select(&items, SelectionPolicy::Threshold { tau: -0.1 }, None).is_err());
        assert!(select(&[e("a", S, 1.2)], SelectionPolicy::default(), None).is_err());
        assert!(matches!(
            split_extremes(&items, 0.1),
            Err(SelectionError::TooFewItems { got: 2, needed: 10 })
        ));
        assert!(split_extremes(&items, 0.6).is_err());
    }

    #[test]
    fn extremes_of_ten() {
        let items: Vec<ScoredEntry> = (0..10).map(|i| e(&format!("s{i}"), S, i as f64 / 10.0)).collect();
        let (hi, lo) = split_extremes(&items, 0.1).unwrap();
        assert_eq!((hi.len(), lo.len()), (1, 1));
        assert_eq!((hi[0].id.as_str(), lo[0].id.as_str()), ("s9", "s0"));
        let (hi, lo) = split_extremes(&items[..3], 0.5).unwrap();
        assert_eq!((hi.len(), lo.len()), (1, 1));
    }

    #[test]
    fn csv_and_sidecar() {
        let items = vec![e("a", S, 0.25), e("b", R, 0.5)];
        let m = select(&items, SelectionPolicy::TopK { k: 1 }, Some("ff00")).unwrap();
        let mut buf = vec![];
        m.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(
            text,
            "id,label,originality,selected\nb,recorded,0.5,true\na,synthetic,0.25,true\n"
        );
        assert_eq!(read_selection_csv(buf.as_slice()).unwrap(), m.entries);
        let side: serde_json::Value = serde_json::from_str(&m.sidecar_json()).unwrap();
        assert_eq!(side["policy"]["mode"], "top_k");
        assert_eq!(side["model_sha256"], "ff00");
        assert_eq!(side["synthetic_selected"], 1);
    }

    fn arb_items() -> impl Strategy<Value = Vec<ScoredEntry>> {
        proptest::collection::vec((0u8..2, 0u32..20), 1..60).prop_map(|v| {
            v.into_iter()
                .enumerate()
                .map(|(i, (l, o))| e(&format!("u{i:03}"), if l == 0 { R } else { S }, o as f64 / 19.0))
                .collect()
        })
    }

    fn arb_policy() -> impl Strategy<Value = SelectionPolicy> {
        prop_oneof![
            (1usize..5).prop_map(|k| SelectionPolicy::TopK { k }),
            (0.01f64..1.0).prop_map(|fraction| SelectionPolicy::TopFraction { fraction }),
            (0.0f64..1.0).prop_map(|tau| SelectionPolicy::Threshold { tau }),
        ]
    }

    proptest! {
        #[test]
        fn selection_properties(items in arb_items(), policy in arb_policy()) {
            let n_syn = items.iter().filter(|x| x.label == S).count();
            let m = match select(&items, policy, None) {
                Ok(m) => m,
                Err(SelectionError::KTooLarge { .. }) => return Ok(()),
                Err(e) => return Err(TestCaseError::fail(e.to_string())),
            };
            prop_assert!(m.entries.iter().filter(|x| x.label == R).all(|x| x.selected));
            prop_assert_eq!(m.entries.len(), items.len());
            prop_assert_eq!(select(&m.scored(), policy, None).unwrap(), m.clone());
            let sel: Vec<&SelectionEntry> = m.entries.iter().filter(|x| x.label == S && x.selected).collect();
            let dis: Vec<&SelectionEntry> = m.entries.iter().filter(|x| x.label == S && !x.selected).collect();
            match policy {
                SelectionPolicy::TopK { k } => prop_assert_eq!(sel.len(), k),
                SelectionPolicy::TopFraction { fraction } => {
                    prop_assert_eq!(sel.len(), (fraction * n_syn as f64 - 1e-9).ceil() as usize)
                }
                SelectionPolicy::Threshold { tau } => {
                    prop_assert_eq!(sel.len(), items.iter().filter(|x| x.label == S && x.originality >= tau).count())
                }
            }
            if let (Some(lo), Some(hi)) = (sel.iter().map(|x| x.originality).reduce(f64::min), dis.iter().map(|x| x.originality).reduce(f64::max)) {
                prop_assert!(lo >= hi);
            }
        }

        #[test]
        fn extremes_disjoint(items in arb_items(), fraction in 0.05f64..0.5) {
            if let Ok((hi, lo)) = split_extremes(&items, fraction) {
                prop_assert_eq!(hi.len(), lo.len());
                prop_assert!(hi.iter().all(|h| lo.iter().all(|l| l.id != h.id)));
                prop_assert!(hi.iter().map(|x| x.originality).fold(f64::INFINITY, f64::min)
                    >= lo.iter().map(|x| x.originality).fold(f64::NEG_INFINITY, f64::max));
            }
        }
    }
}
