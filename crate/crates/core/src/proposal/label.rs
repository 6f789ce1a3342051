//! 8-connected component labeling (two-pass, union-find).

use super::contour::BinaryMap;
use crate::error::{Error, Result};
use crate::geometry::BoundingBox;

/// Component labels: `0` is background, components are `1..=count` in
/// raster order of their first pixel.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelMap {
    rows: usize,
    cols: usize,
    labels: Vec<u32>,
    count: usize,
}

impl LabelMap {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> u32 {
        self.labels[row * self.cols + col]
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.labels
    }

    /// Bounding boxes of all components, indexed by `label - 1`.
    pub fn boxes(&self) -> Vec<BoundingBox> {
        let mut ext = vec![(usize::MAX, usize::MAX, 0usize, 0usize); self.count];
        for r in 0..self.rows {
            for c in 0..self.cols {
                let l = self.get(r, c);
                if l == 0 {
                    continue;
                }
                let e = &mut ext[l as usize - 1];
                e.0 = e.0.min(r);
                e.1 = e.1.min(c);
                e.2 = e.2.max(r);
                e.3 = e.3.max(c);
            }
        }
        ext.into_iter()
            .map(|(r0, c0, r1, c1)| BoundingBox::from_extents(r0, c0, r1, c1))
            .collect()
    }
}

struct DisjointSets {
    parent: Vec<u32>,
}

impl DisjointSets {
    fn new() -> Self {
        // Slot 0 is the background.
        DisjointSets { parent: vec![0] }
    }

    fn make(&mut self) -> u32 {
        let id = self.parent.len() as u32;
        self.parent.push(id);
        id
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let grand = self.parent[self.parent[x as usize] as usize];
            self.parent[x as usize] = grand;
            x = grand;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) -> u32 {
        let (ra, rb) = (self.find(a), self.find(b));
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        self.parent[hi as usize] = lo;
        lo
    }
}

/// Labels the 8-connected foreground components of `binary`.
pub fn label_components(binary: &BinaryMap) -> LabelMap {
    let (rows, cols) = (binary.rows(), binary.cols());
    let mut provisional = vec![0u32; rows * cols];
    let mut sets = DisjointSets::new();

    for r in 0..rows {
        for c in 0..cols {
            if !binary.get(r, c) {
                continue;
            }
            // Already-visited neighbors: W, NW, N, NE.
            let mut current = 0u32;
            let mut visit = |nr: Option<usize>, nc: Option<usize>, current: &mut u32| {
                if let (Some(nr), Some(nc)) = (nr, nc) {
                    if nc < cols {
                        let l = provisional[nr * cols + nc];
                        if l != 0 {
                            *current = if *current == 0 { l } else { sets.union(*current, l) };
                        }
                    }
                }
            };
            visit(Some(r), c.checked_sub(1), &mut current);
            visit(r.checked_sub(1), c.checked_sub(1), &mut current);
            visit(r.checked_sub(1), Some(c), &mut current);
            visit(r.checked_sub(1), Some(c + 1), &mut current);
            if current == 0 {
                current = sets.make();
            }
            provisional[r * cols + c] = current;
        }
    }

    let mut remap = vec![0u32; sets.parent.len()];
    let mut next = 0u32;
    let labels = provisional
        .iter()
        .map(|&l| {
            if l == 0 {
                return 0;
            }
            let root = sets.find(l) as usize;
            if remap[root] == 0 {
                next += 1;
                remap[root] = next;
            }
            remap[root]
        })
        .collect();
    LabelMap {
        rows,
        cols,
        labels,
        count: next as usize,
    }
}

/// Tightest box around the pixels carrying `label`.
pub fn bounding_box(labeled: &LabelMap, label: usize) -> Result<BoundingBox> {
    if label == 0 || label > labeled.count() {
        return Err(Error::InvalidArgument(format!(
            "label {label} not present (map has {} components)",
            labeled.count()
        )));
    }
    Ok(labeled.boxes()[label - 1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn map(rows: &[&str]) -> BinaryMap {
        BinaryMap::from_fn(rows.len(), rows[0].len(), |r, c| rows[r].as_bytes()[c] == b'#')
    }

    /// Flood fill with explicit 8-neighborhood, as an oracle.
    fn flood_count(binary: &BinaryMap) -> usize {
        let (rows, cols) = (binary.rows(), binary.cols());
        let mut seen = vec![false; rows * cols];
        let mut n = 0;
        for r in 0..rows {
            for c in 0..cols {
                if !binary.get(r, c) || seen[r * cols + c] {
                    continue;
                }
                n += 1;
                let mut stack = vec![(r, c)];
                seen[r * cols + c] = true;
                while let Some((y, x)) = stack.pop() {
                    for dy in -1i64..=1 {
                        for dx in -1i64..=1 {
                            let (ny, nx) = (y as i64 + dy, x as i64 + dx);
                            if ny < 0 || nx < 0 || ny >= rows as i64 || nx >= cols as i64 {
                                continue;
                            }
                            let (ny, nx) = (ny as usize, nx as usize);
                            if binary.get(ny, nx) && !seen[ny * cols + nx] {
                                seen[ny * cols + nx] = true;
                                stack.push((ny, nx));
                            }
                        }
                    }
                }
            }
        }
        n
    }

    #[test]
    fn empty_map_has_no_labels() {
        assert_eq!(label_components(&BinaryMap::empty(5, 5)).count(), 0);
    }

    #[test]
    fn disjoint_blobs_and_diagonals() {
        let two = map(&["##...", "##...", ".....", "...##", "...##"]);
        assert_eq!(label_components(&two).count(), 2);
        let diag = map(&["#....", ".#...", "..#..", "...#.", "....#"]);
        assert_eq!(label_components(&diag).count(), 1);
        let anti = map(&["....#", "...#.", "..#..", ".#...", "#...."]);
        assert_eq!(label_components(&anti).count(), 1);
    }

    #[test]
    fn u_shape_merges() {
        let u = map(&["#...#", "#...#", "#####"]);
        let labels = label_components(&u);
        assert_eq!(labels.count(), 1);
        assert!(u.count() == labels.as_slice().iter().filter(|&&l| l == 1).count());
    }

    #[test]
    fn labels_are_raster_ordered() {
        let m = map(&["..#", "#..", "..."]);
        let labels = label_components(&m);
        assert_eq!(labels.get(0, 2), 1);
        assert_eq!(labels.get(1, 0), 2);
    }

    #[test]
    fn box_examples() {
        let pts = map(&[
            "........", "........", "...#....", "....#...", ".....#..", "......#.", "........",
        ]);
        // (2,3) .. (5,6) form one diagonal chain.
        let labels = label_components(&pts);
        assert_eq!(labels.count(), 1);
        assert_eq!(bounding_box(&labels, 1).unwrap(), BoundingBox::new(2, 3, 4, 4).unwrap());

        let single = BinaryMap::from_fn(9, 9, |r, c| r == 4 && c == 4);
        let l = label_components(&single);
        assert_eq!(bounding_box(&l, 1).unwrap(), BoundingBox::new(4, 4, 1, 1).unwrap());

        let full = BinaryMap::from_fn(6, 7, |_, _| true);
        let l = label_components(&full);
        assert_eq!(bounding_box(&l, 1).unwrap(), BoundingBox::new(0, 0, 6, 7).unwrap());
        assert!(bounding_box(&l, 2).is_err());
        assert!(bounding_box(&l, 0).is_err());
    }

    proptest! {
        #[test]
        fn matches_flood_fill_and_naive_extents(bits in proptest::collection::vec(any::<bool>(), 12 * 10)) {
            let binary = BinaryMap::from_fn(12, 10, |r, c| bits[r * 10 + c]);
            let labels = label_components(&binary);
            prop_assert_eq!(labels.count(), flood_count(&binary));
            let boxes = labels.boxes();
            for (i, b) in boxes.iter().enumerate() {
                let l = i as u32 + 1;
                let mut ext = (usize::MAX, usize::MAX, 0, 0);
                for r in 0..12 {
                    for c in 0..10 {
                        if labels.get(r, c) == l {
                            ext = (ext.0.min(r), ext.1.min(c), ext.2.max(r), ext.3.max(c));
                        }
                    }
                }
                prop_assert_eq!(*b, BoundingBox::from_extents(ext.0, ext.1, ext.2, ext.3));
            }
        }
    }
}
