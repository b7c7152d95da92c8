//! Per-pixel integer class masks and their geometric transforms.

use crate::error::{Error, Result};
use ndarray::Array2;

/// Per-pixel class labels in `0..num_classes`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassMask {
    labels: Array2<u8>,
    num_classes: usize,
}

impl ClassMask {
    pub fn new(labels: Array2<u8>, num_classes: usize) -> Result<Self> {
        if num_classes < 2 {
            return Err(Error::Argument(format!("ClassMask: need at least 2 classes, got {num_classes}")));
        }
        if num_classes > u8::MAX as usize + 1 {
            return Err(Error::Argument("ClassMask: too many classes".into()));
        }
        if let Some(bad) = labels.iter().find(|l| **l as usize >= num_classes) {
            return Err(Error::Argument(format!(
                "ClassMask: label {bad} out of range 0..{num_classes}"
            )));
        }
        Ok(ClassMask { labels, num_classes })
    }

    pub fn labels(&self) -> &Array2<u8> {
        &self.labels
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn dim(&self) -> (usize, usize) {
        self.labels.dim()
    }

    /// Pixel count per class.
    pub fn histogram(&self) -> Vec<usize> {
        let mut h = vec![0usize; self.num_classes];
        for l in self.labels.iter() {
            h[*l as usize] += 1;
        }
        h
    }

    /// Fraction of pixels labelled `class`.
    pub fn area_fraction(&self, class: usize) -> f64 {
        let total = self.labels.len();
        self.histogram()[class] as f64 / total as f64
    }

    /// Binary mask for one class.
    pub fn class_mask(&self, class: usize) -> Array2<bool> {
        self.labels.mapv(|l| l as usize == class)
    }

    /// Apply one of the 8 dihedral-group transforms:
    /// 0 identity, 1 rot90, 2 rot180, 3 rot270, 4 horizontal flip,
    /// 5 vertical flip, 6 transpose, 7 anti-transpose.
    ///
    /// Transforms that swap the axes (1, 3, 6, 7) require a square mask.
    pub fn dihedral(&self, k: u8) -> Result<ClassMask> {
        let (h, w) = self.labels.dim();
        if matches!(k, 1 | 3 | 6 | 7) && h != w {
            return Err(Error::Argument(format!(
                "dihedral transform {k} needs a square mask, got {h}x{w}"
            )));
        }
        let labels = apply_dihedral(&self.labels, k)?;
        Ok(ClassMask { labels, num_classes: self.num_classes })
    }

    /// Nearest-neighbor downsampling to `(out_h, out_w)`.
    ///
    /// Each output pixel center is mapped back into the source grid; when the
    /// mapped point lies exactly on a pixel boundary the label is chosen by
    /// majority over the tied neighbors (lowest label wins remaining ties),
    /// so labels stay discrete and boundary behavior is deterministic.
    pub fn downsample(&self, out_h: usize, out_w: usize) -> Result<ClassMask> {
        let (in_h, in_w) = self.labels.dim();
        if out_h == 0 || out_w == 0 || out_h > in_h || out_w > in_w {
            return Err(Error::Argument(format!(
                "downsample: target {out_h}x{out_w} invalid for source {in_h}x{in_w}"
            )));
        }
        let rows: Vec<(usize, usize)> = (0..out_h).map(|i| nearest_candidates(i, in_h, out_h)).collect();
        let cols: Vec<(usize, usize)> = (0..out_w).map(|j| nearest_candidates(j, in_w, out_w)).collect();
        let mut out = Array2::zeros((out_h, out_w));
        let mut counts = vec![0usize; self.num_classes];
        for i in 0..out_h {
            for j in 0..out_w {
                let (r0, r1) = rows[i];
                let (c0, c1) = cols[j];
                counts.iter_mut().for_each(|c| *c = 0);
                for r in r0..=r1 {
                    for c in c0..=c1 {
                        counts[self.labels[[r, c]] as usize] += 1;
                    }
                }
                let best = counts
                    .iter()
                    .enumerate()
                    .max_by_key(|(idx, c)| (**c, std::cmp::Reverse(*idx)))
                    .map(|(idx, _)| idx)
                    .unwrap();
                out[[i, j]] = best as u8;
            }
        }
        Ok(ClassMask { labels: out, num_classes: self.num_classes })
    }
}

/// Source index range nearest to output pixel `i`: a single index, or the
/// two tied indices when the mapped center lies exactly between pixels.
/// Computed in integers: the mapped center is ((2i+1)·n_in − n_out) / (2·n_out).
fn nearest_candidates(i: usize, n_in: usize, n_out: usize) -> (usize, usize) {
    let num = (2 * i + 1) * n_in;
    let den = 2 * n_out;
    // mapped = num/den − 1/2; nearest integer of that is floor(num/den) except
    // on exact half-ties where num/den is an integer... work with pos = num/den.
    // mapped + 1/2 = num/den, so mapped is exactly between k and k+1 iff den | num.
    if num % den == 0 {
        let hi = num / den;
        let lo = hi.saturating_sub(1);
        (lo.min(n_in - 1), hi.min(n_in - 1))
    } else {
        let idx = num / den; // floor(num/den) = round(mapped) off ties
        (idx.min(n_in - 1), idx.min(n_in - 1))
    }
}

fn apply_dihedral(m: &Array2<u8>, k: u8) -> Result<Array2<u8>> {
    let (h, w) = m.dim();
    let out = match k {
        0 => m.clone(),
        // rot90 counter-clockwise: out[i][j] = in[j][w-1-i] on squares
        1 => Array2::from_shape_fn((h, w), |(i, j)| m[[j, w - 1 - i]]),
        2 => Array2::from_shape_fn((h, w), |(i, j)| m[[h - 1 - i, w - 1 - j]]),
        3 => Array2::from_shape_fn((h, w), |(i, j)| m[[h - 1 - j, i]]),
        // horizontal flip (mirror columns)
        4 => Array2::from_shape_fn((h, w), |(i, j)| m[[i, w - 1 - j]]),
        // vertical flip (mirror rows)
        5 => Array2::from_shape_fn((h, w), |(i, j)| m[[h - 1 - i, j]]),
        6 => Array2::from_shape_fn((h, w), |(i, j)| m[[j, i]]),
        7 => Array2::from_shape_fn((h, w), |(i, j)| m[[h - 1 - j, w - 1 - i]]),
        _ => return Err(Error::Argument(format!("dihedral: transform index {k} out of 0..8"))),
    };
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_mask(n: usize, classes: usize, seed: u64) -> ClassMask {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let labels = Array2::from_shape_fn((n, n), |_| rng.random_range(0..classes) as u8);
        ClassMask::new(labels, classes).unwrap()
    }

    #[test]
    fn rejects_out_of_range_labels() {
        let labels = array![[0u8, 1], [2, 0]];
        assert!(ClassMask::new(labels, 2).is_err());
    }

    #[test]
    fn identity_is_bit_identical() {
        let m = random_mask(9, 3, 1);
        assert_eq!(m.dihedral(0).unwrap(), m);
    }

    #[test]
    fn rot180_twice_is_identity() {
        let m = random_mask(8, 2, 2);
        assert_eq!(m.dihedral(2).unwrap().dihedral(2).unwrap(), m);
    }

    #[test]
    fn all_transforms_preserve_histogram() {
        let m = random_mask(16, 4, 3);
        let h = m.histogram();
        for k in 0..8 {
            assert_eq!(m.dihedral(k).unwrap().histogram(), h, "transform {k}");
        }
    }

    #[test]
    fn non_square_rotation_rejected() {
        let labels = Array2::zeros((2, 3));
        let m = ClassMask::new(labels, 2).unwrap();
        assert!(m.dihedral(1).is_err());
        assert!(m.dihedral(3).is_err());
        assert!(m.dihedral(2).is_ok());
        assert!(m.dihedral(4).is_ok());
    }

    #[test]
    fn dihedral_group_is_closed() {
        // Composing any two transforms must equal a single transform; checked
        // exhaustively on an asymmetric mask where the representative is unique.
        let m = random_mask(7, 5, 4);
        for k1 in 0..8u8 {
            for k2 in 0..8u8 {
                let composed = m.dihedral(k1).unwrap().dihedral(k2).unwrap();
                let found = (0..8u8).any(|k3| m.dihedral(k3).unwrap() == composed);
                assert!(found, "composition {k1} then {k2} left the group");
            }
        }
    }

    #[test]
    fn downsample_majority_on_blocks() {
        // 4x4 → 2x2 with factor-2 blocks; centers tie, so 2x2 majority decides.
        let labels = array![
            [0u8, 0, 1, 1],
            [0, 1, 1, 1],
            [1, 1, 0, 0],
            [1, 1, 0, 1],
        ];
        let m = ClassMask::new(labels, 2).unwrap();
        let d = m.downsample(2, 2).unwrap();
        // Blocks: TL {0,0,0,1}→0, TR {1,1,1,1}→1, BL {1,1,1,1}→1, BR {0,0,0,1}→0
        assert_eq!(d.labels(), &array![[0u8, 1], [1, 0]]);
    }

    #[test]
    fn downsample_tie_prefers_lowest_label() {
        let labels = array![[0u8, 1], [1, 0]];
        let m = ClassMask::new(labels, 2).unwrap();
        let d = m.downsample(1, 1).unwrap();
        assert_eq!(d.labels()[[0, 0]], 0);
    }

    #[test]
    fn downsample_identity_when_same_size() {
        let m = random_mask(8, 3, 5);
        let d = m.downsample(8, 8).unwrap();
        assert_eq!(&d, &m);
    }
}
