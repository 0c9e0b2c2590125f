//! Sequential mask-IoU clustering (BSAS) across forward passes.
//!
//! Predictions are visited in pass order, then file order within a pass. A
//! prediction may join a cluster only when its IoU with *every* existing
//! member reaches the threshold and the cluster holds nothing from the same
//! pass; among several eligible clusters the highest mean IoU wins, ties to
//! the lowest cluster id. Otherwise it founds a new cluster.
//!
//! The scan is intentionally a linear sweep over all clusters per prediction:
//! masks carry their bounding windows so far-apart pairs short-circuit to
//! IoU 0, but total work still grows with (predictions x clusters).

use crate::geometry::{iou_mask, BitMask, InstanceMask};

use super::{Cluster, ClusterError, ClusterMember, MemberShape};

fn check_dims(passes: &[Vec<InstanceMask>]) -> Result<(), ClusterError> {
    let mut dims: Option<(u32, u32)> = None;
    for pass in passes {
        for mask in pass {
            match dims {
                None => dims = Some(mask.frame()),
                Some(d) => {
                    if mask.frame() != d {
                        let (w, h) = mask.frame();
                        return Err(ClusterError::DimensionMismatch(d.0, d.1, w, h));
                    }
                }
            }
        }
    }
    Ok(())
}

/// Cluster rasterized predictions with the optimized member scan.
///
/// The sweep works on borrowed masks and flat per-cluster pass sets; member
/// masks are cloned into the output clusters once, at the end.
pub fn cluster_bsas(
    passes: &[Vec<InstanceMask>],
    theta_iou: f64,
) -> Result<Vec<Cluster>, ClusterError> {
    check_dims(passes)?;
    let pass_words = passes.len().div_ceil(64).max(1);
    struct Open<'a> {
        members: Vec<(u32, &'a InstanceMask)>,
        pass_set: Vec<u64>,
    }
    let mut open: Vec<Open> = Vec::new();

    for (pass_idx, pass) in passes.iter().enumerate() {
        let pass_id = pass_idx as u32 + 1;
        let (pass_word, pass_bit) = (pass_idx / 64, 1u64 << (pass_idx % 64));
        for mask in pass {
            let mut best: Option<(f64, usize)> = None;
            for (ci, cluster) in open.iter().enumerate() {
                if cluster.pass_set[pass_word] & pass_bit != 0 {
                    continue;
                }
                let mut sum = 0.0;
                let mut eligible = true;
                for (_, m) in &cluster.members {
                    let iou = mask.iou(m);
                    if iou < theta_iou {
                        eligible = false;
                        break;
                    }
                    sum += iou;
                }
                if eligible {
                    let mean = sum / cluster.members.len() as f64;
                    if best.map_or(true, |(b, _)| mean > b) {
                        best = Some((mean, ci));
                    }
                }
            }
            match best {
                Some((_, ci)) => {
                    open[ci].members.push((pass_id, mask));
                    open[ci].pass_set[pass_word] |= pass_bit;
                }
                None => {
                    let mut pass_set = vec![0u64; pass_words];
                    pass_set[pass_word] = pass_bit;
                    open.push(Open {
                        members: vec![(pass_id, mask)],
                        pass_set,
                    });
                }
            }
        }
    }
    Ok(open
        .into_iter()
        .enumerate()
        .map(|(i, c)| Cluster {
            id: i + 1,
            center: None,
            members: c
                .members
                .into_iter()
                .map(|(pass_id, m)| ClusterMember {
                    pass_id,
                    shape: MemberShape::Mask(m.clone()),
                })
                .collect(),
        })
        .collect())
}

/// Reference implementation: same contract, no pruning or caching.
///
/// Every IoU is recomputed from full-frame masks with plain pixel counting;
/// serves as the oracle the optimized path is checked against.
pub fn cluster_bsas_naive(
    passes: &[Vec<InstanceMask>],
    theta_iou: f64,
) -> Result<Vec<Cluster>, ClusterError> {
    check_dims(passes)?;
    let full: Vec<Vec<BitMask>> = passes
        .iter()
        .map(|p| p.iter().map(|m| m.to_bitmask()).collect())
        .collect();

    let mut clusters: Vec<Cluster> = Vec::new();
    // (pass_idx, pred_idx) per member, resolved through the full-frame masks.
    let mut membership: Vec<Vec<(usize, usize)>> = Vec::new();

    let pair_iou = |a: &BitMask, b: &BitMask| -> f64 {
        if a.is_empty() || b.is_empty() {
            return 0.0;
        }
        iou_mask(a, b).expect("dims checked")
    };

    for (pass_idx, pass) in full.iter().enumerate() {
        let pass_id = pass_idx as u32 + 1;
        for (pred_idx, mask) in pass.iter().enumerate() {
            let mut best: Option<(f64, usize)> = None;
            for (ci, members) in membership.iter().enumerate() {
                if members.iter().any(|&(p, _)| p == pass_idx) {
                    continue;
                }
                let mut sum = 0.0;
                let mut eligible = true;
                for &(p, k) in members {
                    let iou = pair_iou(mask, &full[p][k]);
                    if iou < theta_iou {
                        eligible = false;
                        break;
                    }
                    sum += iou;
                }
                if eligible {
                    let mean = sum / members.len() as f64;
                    if best.map_or(true, |(b, _)| mean > b) {
                        best = Some((mean, ci));
                    }
                }
            }
            let member = ClusterMember {
                pass_id,
                shape: MemberShape::Mask(passes[pass_idx][pred_idx].clone()),
            };
            match best {
                Some((_, ci)) => {
                    clusters[ci].members.push(member);
                    membership[ci].push((pass_idx, pred_idx));
                }
                None => {
                    clusters.push(Cluster {
                        id: clusters.len() + 1,
                        center: None,
                        members: vec![member],
                    });
                    membership.push(vec![(pass_idx, pred_idx)]);
                }
            }
        }
    }
    Ok(clusters)
}
