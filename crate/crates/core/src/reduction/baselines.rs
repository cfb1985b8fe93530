//! Comparison reducers: CLS-attention pruning, greedy similarity merging and
//! 2x2 spatial pooling. Pruning and merging are expressed as reduction
//! matrices `M` so they can be fed straight into the norm checks.

use std::cmp::Ordering;

use crate::error::{shape_err, Error, Result};
use crate::numeric::{dot, Mat};

use super::layout::{Cell, TokenLayout, TokenRole};

/// Binary row-selection keeping the `keep` image tokens that receive the
/// most head-averaged attention from CLS. Rows of the result select kept
/// tokens in their original order; ties go to the lower index.
pub fn baseline_prune_cls(attn: &[Mat], layout: &TokenLayout, keep: usize) -> Result<Mat> {
    let cls = layout.cls_index().ok_or_else(|| Error::Layout("CLS pruning needs a CLS token".into()))?;
    let n = layout.len();
    if attn.is_empty() || attn.iter().any(|a| a.shape() != (n, n)) {
        return Err(shape_err!("attention heads must be {n}x{n}"));
    }
    let candidates = layout.candidate_indices();
    if keep > candidates.len() {
        return Err(Error::InvalidArgument(format!("keep {keep} exceeds {} candidates", candidates.len())));
    }
    let score: Vec<f64> =
        candidates.iter().map(|&k| attn.iter().map(|a| a[(cls, k)]).sum::<f64>() / attn.len() as f64).collect();
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&a, &b| score[b].partial_cmp(&score[a]).unwrap_or(Ordering::Equal).then(a.cmp(&b)));
    let mut kept: Vec<usize> = order[..keep].iter().map(|&p| candidates[p]).collect();
    kept.sort_unstable();
    let mut m = Mat::zeros(keep, n);
    for (row, &k) in kept.iter().enumerate() {
        m[(row, k)] = 1.0;
    }
    Ok(m)
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let na = dot(a, a).sqrt();
    let nb = dot(b, b).sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot(a, b) / (na * nb)
    }
}

/// Greedy merging of all rows of `x` down to `target` rows.
///
/// Each step merges the pair of current clusters whose means have the highest
/// cosine similarity (ties: lexicographically smallest pair). Output rows are
/// uniform averages over original members, ordered by their first member.
pub fn baseline_merge(x: &Mat, target: usize) -> Result<Mat> {
    let n = x.rows();
    if target == 0 {
        return Err(Error::InvalidArgument("merge target must be positive".into()));
    }
    if target > n {
        return Err(Error::InvalidArgument(format!("merge target {target} exceeds {n} tokens")));
    }
    let mut members: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let mut sums: Vec<Vec<f64>> = (0..n).map(|i| x.row(i).to_vec()).collect();
    let mut alive = vec![true; n];
    let mut sim = vec![f64::NEG_INFINITY; n * n];
    for i in 0..n {
        for j in i + 1..n {
            sim[i * n + j] = cosine(&sums[i], &sums[j]);
        }
    }
    for _ in 0..n - target {
        let mut best = (f64::NEG_INFINITY, 0, 0);
        for i in (0..n).filter(|&i| alive[i]) {
            for j in (i + 1..n).filter(|&j| alive[j]) {
                if sim[i * n + j] > best.0 {
                    best = (sim[i * n + j], i, j);
                }
            }
        }
        let (_, i, j) = best;
        alive[j] = false;
        let moved = std::mem::take(&mut members[j]);
        members[i].extend(moved);
        let add = std::mem::take(&mut sums[j]);
        for (s, v) in sums[i].iter_mut().zip(add) {
            *s += v;
        }
        // Cosine is scale-free, so sums stand in for means.
        for k in (0..n).filter(|&k| alive[k] && k != i) {
            let (a, b) = if k < i { (k, i) } else { (i, k) };
            sim[a * n + b] = cosine(&sums[i], &sums[k]);
        }
    }
    let mut clusters: Vec<Vec<usize>> = members.into_iter().filter(|m| !m.is_empty()).collect();
    for c in &mut clusters {
        c.sort_unstable();
    }
    clusters.sort_by_key(|c| c[0]);
    let mut m = Mat::zeros(clusters.len(), n);
    for (row, c) in clusters.iter().enumerate() {
        let w = 1.0 / c.len() as f64;
        for &k in c {
            m[(row, k)] = w;
        }
    }
    Ok(m)
}

/// Applies a candidate-level reduction matrix to the candidate tokens of a
/// layout: CLS passes through, each output row becomes a region token
/// covering the cells of its nonzero members. DC tokens are not allowed.
pub fn apply_candidate_matrix(x: &Mat, layout: &TokenLayout, m: &Mat) -> Result<(Mat, TokenLayout)> {
    if layout.dc_count() > 0 {
        return Err(Error::Layout("baseline reducers do not handle DC tokens".into()));
    }
    let candidates = layout.candidate_indices();
    if m.cols() != candidates.len() {
        return Err(shape_err!("reduction matrix has {} columns for {} candidates", m.cols(), candidates.len()));
    }
    let reduced = m.matmul(&x.select_rows(&candidates))?;
    let mut roles = Vec::with_capacity(m.rows() + 1);
    let mut data = Vec::with_capacity((m.rows() + 1) * x.cols());
    if let Some(c) = layout.cls_index() {
        roles.push(TokenRole::Cls);
        data.extend_from_slice(x.row(c));
    }
    for r in 0..m.rows() {
        let sources: Vec<usize> = (0..m.cols()).filter(|&c| m[(r, c)] != 0.0).collect();
        let role = if let [only] = sources[..] {
            layout.role(candidates[only]).clone()
        } else {
            let mut cells: Vec<Cell> = sources.iter().flat_map(|&c| layout.footprint(candidates[c])).collect();
            cells.sort_unstable();
            TokenRole::Region { cells }
        };
        roles.push(role);
        data.extend_from_slice(reduced.row(r));
    }
    let out = Mat::from_vec(roles.len(), x.cols(), data)?;
    Ok((out, TokenLayout::new(roles, layout.grid_side(), None)?))
}

/// 2x2 mean pooling of a complete image-token grid. `w` is the window count
/// of the step being replaced; the side must be divisible by `2w`.
pub fn baseline_pool(x: &Mat, layout: &TokenLayout, w: usize) -> Result<(Mat, TokenLayout)> {
    let side = layout.grid_side();
    if w == 0 || !side.is_multiple_of(2 * w) {
        return Err(Error::InvalidArgument(format!("grid side {side} not divisible by 2x{w}")));
    }
    if x.rows() != layout.len() {
        return Err(Error::Layout(format!("{} tokens vs layout of {}", x.rows(), layout.len())));
    }
    let mut at = vec![None; side * side];
    for (i, role) in layout.roles().iter().enumerate() {
        match role {
            TokenRole::Image { row, col } => at[row * side + col] = Some(i),
            TokenRole::Cls => {}
            _ => return Err(Error::Layout("pooling needs a plain image-token grid".into())),
        }
    }
    if at.iter().any(Option::is_none) {
        return Err(Error::Layout("pooling needs every grid cell present".into()));
    }
    let half = side / 2;
    let mut m = Mat::zeros(half * half, layout.candidate_count());
    let candidates = layout.candidate_indices();
    let pos: std::collections::HashMap<usize, usize> = candidates.iter().enumerate().map(|(p, &i)| (i, p)).collect();
    for pr in 0..half {
        for pc in 0..half {
            for (dr, dc) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                let tok = at[(2 * pr + dr) * side + 2 * pc + dc].expect("checked above");
                m[(pr * half + pc, pos[&tok])] = 0.25;
            }
        }
    }
    apply_candidate_matrix(x, layout, &m)
}
