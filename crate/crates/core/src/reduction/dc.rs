//! Local DC tokens and the full frequency-aware reduction step.
//!
//! The image grid is split into `w x w` windows. LF tokens of each window are
//! averaged into one DC token; a DC token that already exists for the window
//! counts as one extra member of the average, so it is refreshed rather than
//! replaced. When the window count shrinks between steps, every predecessor
//! DC token joins the new window that encloses it, weighted by the number of
//! image tokens it stands for, so the represented token sum is preserved.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::Mat;

use super::layout::{TokenLayout, TokenRole};
use super::schedule::ReductionStep;
use super::select::{select_hf_lf, token_importance, SelectionMode, SelectionResult};

/// Window group of grid cell `(row, col)`.
#[inline]
pub fn window_group(row: usize, col: usize, side: usize, w: usize) -> usize {
    let span = side / w;
    (row / span) * w + col / span
}

/// Window group of every token; `None` for CLS and DC tokens.
pub fn partition_windows(layout: &TokenLayout, w: usize) -> Result<Vec<Option<usize>>> {
    let side = layout.grid_side();
    if w == 0 || !side.is_multiple_of(w) {
        return Err(Error::InvalidArgument(format!("grid side {side} not divisible by window {w}")));
    }
    Ok((0..layout.len())
        .map(|i| layout.footprint(i).first().map(|&(r, c)| window_group(r, c, side, w)))
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DcToken {
    pub value: Vec<f64>,
    /// Original image tokens folded in so far.
    pub members: usize,
    /// Total weight of the latest average: one per new LF token, plus one per
    /// carried DC token on the same window or its member count after a shrink.
    pub weight: usize,
}

/// One optional DC token per window group.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DcState {
    pub window: usize,
    pub groups: Vec<Option<DcToken>>,
}

impl DcState {
    pub fn present(&self) -> impl Iterator<Item = (usize, &DcToken)> {
        self.groups.iter().enumerate().filter_map(|(g, t)| t.as_ref().map(|t| (g, t)))
    }

    pub fn count(&self) -> usize {
        self.groups.iter().filter(|g| g.is_some()).count()
    }

    /// Collects the DC tokens currently in `x` as a state.
    pub fn from_layout(x: &Mat, layout: &TokenLayout) -> Option<DcState> {
        let window = layout.window()?;
        let mut groups = vec![None; window * window];
        for i in layout.dc_indices() {
            if let TokenRole::Dc { group, members } = layout.role(i) {
                groups[*group] = Some(DcToken { value: x.row(i).to_vec(), members: *members, weight: 1 });
            }
        }
        Some(DcState { window, groups })
    }
}

/// Builds the DC tokens of a `window x window` partition.
///
/// `lf_groups[g]` lists the rows of `x` that are LF members of group `g`.
/// Predecessor tokens in `prev` may live on a finer partition, as long as it
/// nests inside the new one; they then count with their member count instead
/// of one.
pub fn make_dc_tokens(x: &Mat, window: usize, lf_groups: &[Vec<usize>], prev: Option<&DcState>) -> Result<DcState> {
    let groups_n = window * window;
    if lf_groups.len() != groups_n {
        return Err(Error::InvalidArgument(format!("{} LF groups for window {window}", lf_groups.len())));
    }
    let d = x.cols();
    let mut sums: Vec<Vec<f64>> = vec![vec![0.0; d]; groups_n];
    let mut weight = vec![0usize; groups_n];
    let mut members = vec![0usize; groups_n];
    for (g, lf) in lf_groups.iter().enumerate() {
        for &i in lf {
            for (s, v) in sums[g].iter_mut().zip(x.row(i)) {
                *s += v;
            }
        }
        weight[g] += lf.len();
        members[g] += lf.len();
    }
    if let Some(prev) = prev {
        if prev.window < window || prev.window % window != 0 {
            return Err(Error::Schedule(format!(
                "window {} does not nest inside previous window {}",
                window, prev.window
            )));
        }
        let ratio = prev.window / window;
        for (g, tok) in prev.present() {
            let w = if ratio == 1 { 1 } else { tok.members };
            if tok.value.len() != d {
                return Err(Error::Shape(format!("DC token of width {} for {d} features", tok.value.len())));
            }
            let target = (g / prev.window / ratio) * window + (g % prev.window) / ratio;
            for (s, v) in sums[target].iter_mut().zip(&tok.value) {
                *s += w as f64 * v;
            }
            weight[target] += w;
            members[target] += tok.members;
        }
    }
    let groups = (0..groups_n)
        .map(|g| {
            (weight[g] > 0).then(|| DcToken {
                value: sums[g].iter().map(|s| s / weight[g] as f64).collect(),
                members: members[g],
                weight: weight[g],
            })
        })
        .collect();
    Ok(DcState { window, groups })
}

/// Result of one frequency-aware reduction step.
#[derive(Clone, Debug)]
pub struct ReductionOutcome {
    pub tokens: Mat,
    pub layout: TokenLayout,
    pub dc: DcState,
    pub selection: SelectionResult,
}

/// Keeps the top `floor(n_img * (1 - rho))` image tokens by HF importance and
/// folds the rest into per-window DC tokens.
///
/// Output order: CLS, kept image tokens in their input order, DC tokens by
/// group id. CLS and existing DC tokens are never candidates.
pub fn apply_reduction(x: &Mat, attn: &[Mat], layout: &TokenLayout, step: &ReductionStep) -> Result<ReductionOutcome> {
    if x.rows() != layout.len() {
        return Err(Error::Layout(format!("{} tokens vs layout of {}", x.rows(), layout.len())));
    }
    if layout.roles().iter().any(|r| matches!(r, TokenRole::Region { .. })) {
        return Err(Error::Layout("region tokens cannot enter a frequency-aware step".into()));
    }
    let candidates = layout.candidate_indices();
    let r = step.keep_count(candidates.len());
    if r == 0 {
        return Err(Error::InvalidArgument(format!(
            "rho {} keeps no token out of {}",
            step.rho,
            candidates.len()
        )));
    }
    let importance = token_importance(attn, &candidates)?;
    let selection = select_hf_lf(&candidates, &importance, r, SelectionMode::Reduction)?;

    let groups = partition_windows(layout, step.window)?;
    let mut lf_groups = vec![Vec::new(); step.window * step.window];
    for &i in &selection.lf {
        let g = groups[i].expect("image tokens always have a group");
        lf_groups[g].push(i);
    }
    let prev = DcState::from_layout(x, layout);
    let dc = make_dc_tokens(x, step.window, &lf_groups, prev.as_ref())?;

    let mut rows: Vec<usize> = layout.cls_index().into_iter().collect();
    rows.extend(&selection.hf);
    let mut roles: Vec<TokenRole> = rows.iter().map(|&i| layout.role(i).clone()).collect();
    let mut data = x.select_rows(&rows).into_vec();
    for (g, tok) in dc.present() {
        data.extend_from_slice(&tok.value);
        roles.push(TokenRole::Dc { group: g, members: tok.members });
    }
    let tokens = Mat::from_vec(roles.len(), x.cols(), data)?;
    let layout = TokenLayout::new(roles, layout.grid_side(), Some(step.window))?;
    Ok(ReductionOutcome { tokens, layout, dc, selection })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::SeededRng;

    #[test]
    fn window_examples() {
        let l = TokenLayout::grid(4, false);
        let g = partition_windows(&l, 2).unwrap();
        assert_eq!(g[1], Some(0)); // (0,1)
        assert_eq!(g[2], Some(1)); // (0,2)
        assert_eq!(g[15], Some(3)); // (3,3)
        assert!(partition_windows(&l, 1).unwrap().iter().all(|g| *g == Some(0)));
        assert!(partition_windows(&l, 3).is_err());
    }

    #[test]
    fn fourteen_grid_windows_hold_49() {
        let l = TokenLayout::grid(14, true);
        let g = partition_windows(&l, 2).unwrap();
        assert_eq!(g[0], None);
        for group in 0..4 {
            assert_eq!(g.iter().filter(|x| **x == Some(group)).count(), 49);
        }
    }

    #[test]
    fn fresh_dc_is_group_mean() {
        let x = Mat::from_rows(&[vec![0.0, 2.0], vec![2.0, 0.0]]).unwrap();
        let s = make_dc_tokens(&x, 1, &[vec![0, 1]], None).unwrap();
        assert_eq!(s.groups[0].as_ref().unwrap().value, vec![1.0, 1.0]);
    }

    #[test]
    fn update_counts_previous_once() {
        let x = Mat::from_rows(&[vec![3.0]]).unwrap();
        let prev = DcState { window: 1, groups: vec![Some(DcToken { value: vec![0.0], members: 5, weight: 5 })] };
        let s = make_dc_tokens(&x, 1, &[vec![0]], Some(&prev)).unwrap();
        let t = s.groups[0].as_ref().unwrap();
        assert_eq!(t.value, vec![1.5]);
        assert_eq!((t.members, t.weight), (6, 2));
    }

    #[test]
    fn shrink_weights_by_members() {
        let x = Mat::from_rows(&[vec![10.0]]).unwrap();
        let tok = |v: f64, m: usize| Some(DcToken { value: vec![v], members: m, weight: m });
        let prev = DcState { window: 2, groups: vec![tok(1.0, 1), tok(2.0, 1), tok(3.0, 1), tok(4.0, 2)] };
        let s = make_dc_tokens(&x, 1, &[vec![0]], Some(&prev)).unwrap();
        let t = s.groups[0].as_ref().unwrap();
        // (1 + 2 + 3 + 2*4 + 10) / (5 + 1)
        assert_eq!(t.value, vec![4.0]);
        assert_eq!((t.members, t.weight), (6, 6));
    }

    #[test]
    fn empty_lf_carries_or_omits() {
        let x = Mat::zeros(0, 1);
        let prev = DcState { window: 1, groups: vec![Some(DcToken { value: vec![5.0], members: 2, weight: 2 })] };
        let carried = make_dc_tokens(&x, 1, &[vec![]], Some(&prev)).unwrap();
        assert_eq!(carried.groups[0].as_ref().unwrap().value, vec![5.0]);
        let none = make_dc_tokens(&x, 1, &[vec![]], None).unwrap();
        assert!(none.groups[0].is_none());
    }

    #[test]
    fn non_nesting_windows_rejected() {
        let x = Mat::zeros(1, 1);
        let prev = DcState { window: 3, groups: vec![None; 9] };
        assert!(make_dc_tokens(&x, 2, &vec![vec![]; 4], Some(&prev)).is_err());
    }

    fn random_step_input(seed: u64, side: usize) -> (Mat, Vec<Mat>, TokenLayout) {
        let mut rng = SeededRng::new(seed, 0);
        let layout = TokenLayout::grid(side, true);
        let n = layout.len();
        let x = rng.normal_mat(n, 5, 1.0);
        let attn = (0..2).map(|_| rng.softmax_mat(n, n, 1.0)).collect();
        (x, attn, layout)
    }

    #[test]
    fn deit_grid_step_counts() {
        let (x, attn, layout) = random_step_input(1, 14);
        let out = apply_reduction(&x, &attn, &layout, &ReductionStep::new(4, 0.3, 2)).unwrap();
        assert_eq!(out.tokens.rows(), 142);
        assert_eq!(out.layout.candidate_count(), 137);
        assert_eq!(out.layout.dc_count(), 4);
        assert_eq!(out.layout.cls_index(), Some(0));
        assert_eq!(out.layout.represented_mass(), 196);
    }

    #[test]
    fn zero_rho_keeps_everything() {
        let (x, attn, layout) = random_step_input(2, 6);
        let out = apply_reduction(&x, &attn, &layout, &ReductionStep::new(1, 0.0, 2)).unwrap();
        assert_eq!(out.tokens, x);
        assert_eq!(out.layout.dc_count(), 0);
    }

    #[test]
    fn rejects_empty_keep() {
        let (x, attn, layout) = random_step_input(3, 2);
        assert!(apply_reduction(&x, &attn, &layout, &ReductionStep::new(1, 0.9, 1)).is_err());
    }

    #[test]
    fn hf_tokens_keep_relative_order() {
        let (x, attn, layout) = random_step_input(4, 8);
        let out = apply_reduction(&x, &attn, &layout, &ReductionStep::new(1, 0.5, 2)).unwrap();
        let positions: Vec<usize> = out
            .layout
            .roles()
            .iter()
            .filter_map(|r| match r {
                TokenRole::Image { row, col } => Some(row * 8 + col),
                _ => None,
            })
            .collect();
        assert!(positions.windows(2).all(|w| w[0] < w[1]));
    }
}
