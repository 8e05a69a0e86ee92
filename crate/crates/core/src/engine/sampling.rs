use rand::Rng;

use super::ProposalRecord;

/// Draws up to `n` in-void proposals with area at least `min_area`, without
/// replacement and with probability proportional to objectness. The result
/// is in draw order.
///
/// Uses exponential keys `ln(u) / w` (Efraimidis–Spirakis); sorting by key is
/// distributed exactly like sequential weighted draws. Zero-weight proposals
/// only fill the tail when fewer than `n` have positive weight.
pub fn sample_proposals<R: Rng + ?Sized>(
    proposals: &[ProposalRecord],
    n: usize,
    min_area: u64,
    rng: &mut R,
) -> Vec<ProposalRecord> {
    let mut keyed: Vec<(f64, usize)> = proposals
        .iter()
        .enumerate()
        .filter(|(_, p)| p.in_void && p.bbox.area() >= min_area)
        .map(|(i, p)| {
            // u in (0, 1]
            let u = 1.0 - rng.random::<f64>();
            let w = f64::from(p.objectness);
            let key = if w > 0.0 { u.ln() / w } else { f64::NEG_INFINITY };
            (key, i)
        })
        .collect();
    keyed.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    keyed
        .into_iter()
        .take(n)
        .map(|(_, i)| proposals[i].clone())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::BoundingBox;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn p(side: u32, obj: f32, in_void: bool) -> ProposalRecord {
        ProposalRecord {
            image_id: 0,
            bbox: BoundingBox::new(0, 0, side, side).unwrap(),
            objectness: obj,
            feature: vec![1.0],
            in_void,
        }
    }

    #[test]
    fn small_boxes_filtered() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let props = vec![p(16, 0.9, true); 10];
        assert!(sample_proposals(&props, 20, 1024, &mut rng).is_empty());
    }

    #[test]
    fn takes_all_when_fewer_than_n() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut props = vec![p(32, 0.5, true); 5];
        props.push(p(64, 0.9, false));
        props[2].objectness = 0.0;
        assert_eq!(sample_proposals(&props, 20, 1024, &mut rng).len(), 5);
    }

    #[test]
    fn first_pick_frequency_follows_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let props = vec![p(40, 0.8, true), p(40, 0.2, true)];
        let trials = 10_000;
        let hits = (0..trials)
            .filter(|_| sample_proposals(&props, 1, 1024, &mut rng)[0].objectness == 0.8)
            .count();
        let freq = hits as f64 / trials as f64;
        assert!((freq - 0.8).abs() < 0.02, "{freq}");
    }

    #[test]
    fn seeded_draws_repeat() {
        let props: Vec<_> = (0..50).map(|i| p(40, (i as f32 + 1.0) / 60.0, true)).collect();
        let a = sample_proposals(&props, 20, 0, &mut ChaCha8Rng::seed_from_u64(3));
        let b = sample_proposals(&props, 20, 0, &mut ChaCha8Rng::seed_from_u64(3));
        assert_eq!(a, b);
        assert_eq!(a.len(), 20);
    }
}
