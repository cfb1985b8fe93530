use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Grid cell `(row, col)` on the original patch grid.
pub type Cell = (usize, usize);

/// What a token in the current sequence stands for.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TokenRole {
    Cls,
    /// An original patch token at its grid position.
    Image { row: usize, col: usize },
    /// Aggregated DC token of window group `group`. `members` counts the
    /// original image tokens folded into it so far.
    Dc { group: usize, members: usize },
    /// Output of a merge or pooling baseline covering several grid cells.
    Region { cells: Vec<Cell> },
}

impl TokenRole {
    /// Image and region tokens are the reduction candidates.
    pub fn is_candidate(&self) -> bool {
        matches!(self, TokenRole::Image { .. } | TokenRole::Region { .. })
    }
}

/// Roles of the tokens surviving at some layer, plus the grid they came from.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenLayout {
    roles: Vec<TokenRole>,
    grid_side: usize,
    /// Window side count of the DC partition, once one exists.
    window: Option<usize>,
}

impl TokenLayout {
    /// Full `side x side` grid in raster order, optionally preceded by CLS.
    pub fn grid(side: usize, has_cls: bool) -> Self {
        let mut roles = Vec::with_capacity(side * side + has_cls as usize);
        if has_cls {
            roles.push(TokenRole::Cls);
        }
        for row in 0..side {
            for col in 0..side {
                roles.push(TokenRole::Image { row, col });
            }
        }
        Self { roles, grid_side: side, window: None }
    }

    pub fn new(roles: Vec<TokenRole>, grid_side: usize, window: Option<usize>) -> Result<Self> {
        let layout = Self { roles, grid_side, window };
        layout.validate()?;
        Ok(layout)
    }

    /// Checks CLS uniqueness, in-range and unique cells, and DC group ids.
    pub fn validate(&self) -> Result<()> {
        let side = self.grid_side;
        let mut seen = vec![false; side * side];
        let mut cls = 0;
        for role in &self.roles {
            let cells: &[Cell] = match role {
                TokenRole::Cls => {
                    cls += 1;
                    &[]
                }
                TokenRole::Image { row, col } => &[(*row, *col)][..],
                TokenRole::Region { cells } => cells,
                TokenRole::Dc { group, .. } => {
                    let w = self.window.ok_or_else(|| Error::Layout("DC token without a window".into()))?;
                    if *group >= w * w {
                        return Err(Error::Layout(format!("DC group {group} outside {w}x{w} windows")));
                    }
                    &[]
                }
            };
            for &(r, c) in cells {
                if r >= side || c >= side {
                    return Err(Error::Layout(format!("cell ({r},{c}) outside {side}x{side} grid")));
                }
                let k = r * side + c;
                if seen[k] {
                    return Err(Error::Layout(format!("cell ({r},{c}) claimed twice")));
                }
                seen[k] = true;
            }
        }
        if cls > 1 {
            return Err(Error::Layout("more than one CLS token".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.roles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.roles.is_empty()
    }

    pub fn roles(&self) -> &[TokenRole] {
        &self.roles
    }

    pub fn role(&self, i: usize) -> &TokenRole {
        &self.roles[i]
    }

    pub fn grid_side(&self) -> usize {
        self.grid_side
    }

    pub fn window(&self) -> Option<usize> {
        self.window
    }

    pub fn has_cls(&self) -> bool {
        self.cls_index().is_some()
    }

    pub fn cls_index(&self) -> Option<usize> {
        self.roles.iter().position(|r| *r == TokenRole::Cls)
    }

    /// Indices of image and region tokens.
    pub fn candidate_indices(&self) -> Vec<usize> {
        self.indices_where(TokenRole::is_candidate)
    }

    pub fn dc_indices(&self) -> Vec<usize> {
        self.indices_where(|r| matches!(r, TokenRole::Dc { .. }))
    }

    pub fn candidate_count(&self) -> usize {
        self.roles.iter().filter(|r| r.is_candidate()).count()
    }

    pub fn dc_count(&self) -> usize {
        self.roles.iter().filter(|r| matches!(r, TokenRole::Dc { .. })).count()
    }

    /// Grid cells covered by token `i`; empty for CLS and DC tokens.
    pub fn footprint(&self, i: usize) -> Vec<Cell> {
        match &self.roles[i] {
            TokenRole::Image { row, col } => vec![(*row, *col)],
            TokenRole::Region { cells } => cells.clone(),
            TokenRole::Cls | TokenRole::Dc { .. } => Vec::new(),
        }
    }

    /// Original image tokens accounted for: image cells, region cells and DC members.
    pub fn represented_mass(&self) -> usize {
        self.roles
            .iter()
            .map(|r| match r {
                TokenRole::Cls => 0,
                TokenRole::Image { .. } => 1,
                TokenRole::Region { cells } => cells.len(),
                TokenRole::Dc { members, .. } => *members,
            })
            .sum()
    }

    fn indices_where(&self, pred: impl Fn(&TokenRole) -> bool) -> Vec<usize> {
        self.roles.iter().enumerate().filter(|(_, r)| pred(r)).map(|(i, _)| i).collect()
    }
}
