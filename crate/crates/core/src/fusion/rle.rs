//! COCO-style uncompressed run-length encoding (column-major, runs alternate
//! starting with background).

use serde::{Deserialize, Serialize};

use super::FusionError;

/// Row-major binary mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    pub width: u32,
    pub height: u32,
    pub bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width as usize * height as usize],
        }
    }

    pub fn area(&self) -> u64 {
        self.bits.iter().filter(|&&b| b).count() as u64
    }

    pub fn set(&mut self, x: u32, y: u32) {
        self.bits[y as usize * self.width as usize + x as usize] = true;
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rle {
    /// `[height, width]`
    pub size: [u32; 2],
    pub counts: Vec<u64>,
}

/// Run-length encoded label grid: `values[i]` repeated `counts[i]` times,
/// column-major.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelRle {
    pub size: [u32; 2],
    pub values: Vec<u32>,
    pub counts: Vec<u64>,
}

fn column_major_runs(
    size: [u32; 2],
    runs: impl Iterator<Item = (u32, u64)>,
) -> Result<Vec<u32>, FusionError> {
    let [h, w] = size;
    let (h, w) = (h as usize, w as usize);
    let total = h
        .checked_mul(w)
        .ok_or_else(|| FusionError::Rle("mask size overflows".into()))?;
    let mut out = vec![0u32; total];
    let mut pos = 0usize;
    for (value, run) in runs {
        let run = usize::try_from(run).map_err(|_| FusionError::Rle("run too long".into()))?;
        let end = pos
            .checked_add(run)
            .filter(|&e| e <= total)
            .ok_or_else(|| FusionError::Rle(format!("runs exceed {total} pixels")))?;
        for k in pos..end {
            let (x, y) = (k / h, k % h);
            out[y * w + x] = value;
        }
        pos = end;
    }
    if pos != total {
        return Err(FusionError::Rle(format!("runs cover {pos} of {total} pixels")));
    }
    Ok(out)
}

pub fn decode_mask(rle: &Rle) -> Result<BinaryMask, FusionError> {
    let runs = rle
        .counts
        .iter()
        .enumerate()
        .map(|(i, &c)| (u32::from(i % 2 == 1), c));
    let labels = column_major_runs(rle.size, runs)?;
    Ok(BinaryMask {
        width: rle.size[1],
        height: rle.size[0],
        bits: labels.into_iter().map(|v| v == 1).collect(),
    })
}

pub fn encode_mask(mask: &BinaryMask) -> Rle {
    let (w, h) = (mask.width as usize, mask.height as usize);
    let mut counts = Vec::new();
    let mut current = false;
    let mut run = 0u64;
    for x in 0..w {
        for y in 0..h {
            let b = mask.bits[y * w + x];
            if b != current {
                counts.push(run);
                current = b;
                run = 0;
            }
            run += 1;
        }
    }
    counts.push(run);
    Rle {
        size: [mask.height, mask.width],
        counts,
    }
}

/// Decodes to a row-major label grid.
pub fn decode_labels(rle: &LabelRle) -> Result<Vec<u32>, FusionError> {
    if rle.values.len() != rle.counts.len() {
        return Err(FusionError::Rle(format!(
            "{} values but {} counts",
            rle.values.len(),
            rle.counts.len()
        )));
    }
    column_major_runs(rle.size, rle.values.iter().copied().zip(rle.counts.iter().copied()))
}

pub fn encode_labels(width: u32, height: u32, labels: &[u32]) -> LabelRle {
    let (w, h) = (width as usize, height as usize);
    let mut values: Vec<u32> = Vec::new();
    let mut counts: Vec<u64> = Vec::new();
    for x in 0..w {
        for y in 0..h {
            let v = labels[y * w + x];
            match values.last() {
                Some(&last) if last == v => *counts.last_mut().unwrap() += 1,
                _ => {
                    values.push(v);
                    counts.push(1);
                }
            }
        }
    }
    LabelRle {
        size: [height, width],
        values,
        counts,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn column_major_order() {
        // 2x2, runs: 1 background, 2 foreground, 1 background
        let m = decode_mask(&Rle { size: [2, 2], counts: vec![1, 2, 1] }).unwrap();
        // column-major: (0,0)=bg (0,1)=fg (1,0)=fg (1,1)=bg
        assert_eq!(m.bits, vec![false, true, true, false]);
        assert_eq!(encode_mask(&m).counts, vec![1, 2, 1]);
    }

    #[test]
    fn leading_foreground_uses_zero_run() {
        let mut m = BinaryMask::new(3, 1);
        m.set(0, 0);
        assert_eq!(encode_mask(&m).counts, vec![0, 1, 2]);
    }

    #[test]
    fn bad_totals_rejected() {
        assert!(decode_mask(&Rle { size: [2, 2], counts: vec![1, 2] }).is_err());
        assert!(decode_mask(&Rle { size: [2, 2], counts: vec![3, 3] }).is_err());
        assert!(decode_labels(&LabelRle { size: [1, 2], values: vec![1], counts: vec![1, 1] }).is_err());
    }

    proptest! {
        #[test]
        fn mask_round_trip(w in 1u32..9, h in 1u32..9, bits in prop::collection::vec(any::<bool>(), 64)) {
            let mask = BinaryMask { width: w, height: h, bits: bits[..(w * h) as usize].to_vec() };
            prop_assert_eq!(decode_mask(&encode_mask(&mask)).unwrap(), mask);
        }

        #[test]
        fn label_round_trip(w in 1u32..9, h in 1u32..9, vals in prop::collection::vec(0u32..4, 64)) {
            let labels = vals[..(w * h) as usize].to_vec();
            prop_assert_eq!(decode_labels(&encode_labels(w, h, &labels)).unwrap(), labels);
        }
    }
}
