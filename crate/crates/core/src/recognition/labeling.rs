use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::BoundingBox;
use crate::proposal::Proposal;

pub const NORMAL: &str = "normal";

/// Class names with `"normal"` fixed at index 0 and item classes after it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassRegistry {
    names: Vec<String>,
}

impl ClassRegistry {
    pub fn new<S: AsRef<str>>(items: &[S]) -> Result<Self> {
        let mut names = vec![NORMAL.to_string()];
        for s in items {
            let s = s.as_ref();
            if s.is_empty() || names.iter().any(|n| n == s) {
                return Err(Error::InvalidArgument(format!(
                    "class name {s:?} is empty, reserved or repeated"
                )));
            }
            names.push(s.to_string());
        }
        Ok(ClassRegistry { names })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, id: usize) -> Option<&str> {
        self.names.get(id).map(String::as_str)
    }

    pub fn id(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Item classes, without `"normal"`.
    pub fn items(&self) -> &[String] {
        &self.names[1..]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceRule {
    SingleItem,
    LargestOverlap,
    Normal,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledProposal {
    pub proposal: Proposal,
    pub class_id: usize,
    pub source_rule: SourceRule,
}

/// Class id and rule for a box given `(class_id, box)` truths.
///
/// A truth counts as overlapping when its intersection with the box is
/// nonzero and at least `min_overlap_fraction` of the box area. With several
/// overlapping truths the one with the largest intersection wins, ties going
/// to the smaller class id.
pub fn label_for_box(
    bbox: &BoundingBox,
    truths: &[(usize, BoundingBox)],
    min_overlap_fraction: f64,
) -> (usize, SourceRule) {
    let min_area = min_overlap_fraction * bbox.area() as f64;
    let overlapping: Vec<(usize, usize)> = truths
        .iter()
        .map(|(class, t)| (*class, bbox.intersection_area(t)))
        .filter(|&(_, a)| a > 0 && a as f64 >= min_area)
        .collect();
    match overlapping.len() {
        0 => (0, SourceRule::Normal),
        1 => (overlapping[0].0, SourceRule::SingleItem),
        _ => {
            let best = overlapping
                .iter()
                .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
                .map(|&(c, _)| c)
                .unwrap_or(0);
            (best, SourceRule::LargestOverlap)
        }
    }
}

pub fn assign_label(
    proposal: &Proposal,
    truths: &[(usize, BoundingBox)],
    min_overlap_fraction: f64,
) -> LabeledProposal {
    let (class_id, source_rule) = label_for_box(&proposal.bbox, truths, min_overlap_fraction);
    LabeledProposal {
        proposal: proposal.clone(),
        class_id,
        source_rule,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bx(t: usize, l: usize, h: usize, w: usize) -> BoundingBox {
        BoundingBox::new(t, l, h, w).unwrap()
    }

    #[test]
    fn registry_layout() {
        let r = ClassRegistry::new(&["gun", "knife"]).unwrap();
        assert_eq!(r.name(0), Some("normal"));
        assert_eq!(r.id("knife"), Some(2));
        assert_eq!(r.items(), ["gun", "knife"]);
        assert!(ClassRegistry::new(&["normal"]).is_err());
        assert!(ClassRegistry::new(&["a", "a"]).is_err());
    }

    #[test]
    fn rules() {
        let p = bx(0, 0, 10, 10);
        assert_eq!(label_for_box(&p, &[(1, bx(20, 20, 5, 5))], 0.0), (0, SourceRule::Normal));
        // gun overlaps 40 px, knife 90 px.
        let truths = [(1, bx(6, 0, 10, 10)), (2, bx(0, 1, 10, 9))];
        assert_eq!(label_for_box(&p, &truths, 0.0), (2, SourceRule::LargestOverlap));
        assert_eq!(label_for_box(&bx(2, 2, 3, 3), &[(1, p)], 0.0), (1, SourceRule::SingleItem));
        // Equal overlaps: smaller class id.
        let tie = [(2, bx(0, 0, 5, 10)), (1, bx(5, 0, 5, 10))];
        assert_eq!(label_for_box(&p, &tie, 0.0).0, 1);
        // A sliver is ignored with a minimum fraction.
        assert_eq!(label_for_box(&p, &[(1, bx(9, 0, 5, 10))], 0.2).1, SourceRule::Normal);
    }

    proptest! {
        #[test]
        fn order_of_truths_does_not_matter(
            raw in proptest::collection::vec((1usize..4, 0usize..20, 0usize..20, 1usize..12, 1usize..12), 0..6),
            seed in any::<u64>(),
        ) {
            let truths: Vec<(usize, BoundingBox)> =
                raw.iter().map(|&(c, t, l, h, w)| (c, bx(t, l, h, w))).collect();
            let mut shuffled = truths.clone();
            let n = shuffled.len();
            if n > 1 {
                for i in 0..n {
                    shuffled.swap(i, (seed as usize).wrapping_add(i * 7) % n);
                }
            }
            let p = bx(5, 5, 10, 10);
            prop_assert_eq!(label_for_box(&p, &truths, 0.0), label_for_box(&p, &shuffled, 0.0));
        }
    }
}
