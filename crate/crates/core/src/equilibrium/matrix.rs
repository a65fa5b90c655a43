use std::collections::BTreeSet;
use std::fmt::Write as _;

use num_traits::Zero;
use serde::Serialize;

use crate::engine::Engine;
use crate::error::{Error, Result};
use crate::numeric::{format_fixed, format_rational, parse_rational, Q};
use crate::model::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Orientation {
    /// Lower is better.
    Cost,
    /// Higher is better.
    Payoff,
}

/// Two-player normal-form game; `cells[i][j]` holds (row player, column player).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatrixGame {
    pub row_labels: Vec<String>,
    pub col_labels: Vec<String>,
    pub cells: Vec<Vec<(Q, Q)>>,
    pub orientation: Orientation,
}

impl MatrixGame {
    pub fn new(
        row_labels: Vec<String>,
        col_labels: Vec<String>,
        cells: Vec<Vec<(Q, Q)>>,
        orientation: Orientation,
    ) -> Result<Self> {
        if cells.len() != row_labels.len() || cells.iter().any(|r| r.len() != col_labels.len()) {
            return Err(Error::MatrixGame(format!(
                "cells are not a rectangular {}x{} matrix",
                row_labels.len(),
                col_labels.len()
            )));
        }
        if cells.is_empty() || col_labels.is_empty() {
            return Err(Error::MatrixGame("game has no cells".into()));
        }
        Ok(MatrixGame { row_labels, col_labels, cells, orientation })
    }

    /// Integer game with labels `1..=n` for each player.
    pub fn from_ints(cells: &[&[(i64, i64)]], orientation: Orientation) -> Result<Self> {
        let rows = cells.len();
        let cols = cells.first().map_or(0, |r| r.len());
        MatrixGame::new(
            (1..=rows).map(|i| i.to_string()).collect(),
            (1..=cols).map(|i| i.to_string()).collect(),
            cells
                .iter()
                .map(|r| r.iter().map(|&(a, b)| (Q::from(a as i128), Q::from(b as i128))).collect())
                .collect(),
            orientation,
        )
    }

    /// Parses one row per line with whitespace-separated `a,b` cells;
    /// blank lines and lines starting with `#` are skipped.
    pub fn parse(text: &str, orientation: Orientation) -> Result<Self> {
        let mut cells = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let row = line
                .split_whitespace()
                .map(|cell| {
                    let (a, b) = cell.split_once(',').ok_or_else(|| {
                        Error::MatrixGame(format!("line {}: cell `{cell}` is not `a,b`", n + 1))
                    })?;
                    Ok((parse_rational(a)?, parse_rational(b)?))
                })
                .collect::<Result<Vec<_>>>()?;
            cells.push(row);
        }
        let cols = cells.first().map_or(0, |r: &Vec<(Q, Q)>| r.len());
        MatrixGame::new(
            (1..=cells.len()).map(|i| i.to_string()).collect(),
            (1..=cols).map(|i| i.to_string()).collect(),
            cells,
            orientation,
        )
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.row_labels.len(), self.col_labels.len())
    }

    /// Same game in payoff orientation (costs negated).
    pub fn to_payoffs(&self) -> MatrixGame {
        match self.orientation {
            Orientation::Payoff => self.clone(),
            Orientation::Cost => MatrixGame {
                cells: self
                    .cells
                    .iter()
                    .map(|r| r.iter().map(|(a, b)| (-a, -b)).collect())
                    .collect(),
                orientation: Orientation::Payoff,
                ..self.clone()
            },
        }
    }

    /// Aligned text table, one `a, b` pair per cell.
    pub fn render(&self, decimals: Option<u32>) -> String {
        let fmt = |v: &Q| match decimals {
            Some(d) => format_fixed(v, d),
            None => format_rational(v),
        };
        let mut grid: Vec<Vec<String>> = Vec::new();
        let mut header = vec![String::new()];
        header.extend(self.col_labels.iter().map(|c| format!("t_U2={c}")));
        grid.push(header);
        for (label, row) in self.row_labels.iter().zip(&self.cells) {
            let mut line = vec![format!("t_U1={label}")];
            line.extend(row.iter().map(|(a, b)| format!("{}, {}", fmt(a), fmt(b))));
            grid.push(line);
        }
        let widths: Vec<usize> = (0..grid[0].len())
            .map(|c| grid.iter().map(|r| r[c].len()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for row in &grid {
            let cells: Vec<String> = row
                .iter()
                .zip(&widths)
                .map(|(cell, w)| format!("{cell:>w$}"))
                .collect();
            let _ = writeln!(out, "{}", cells.join(" | ").trim_end());
        }
        out
    }
}

/// Cost matrix of a two-user scenario where each user has one shiftable load.
pub fn build_matrix_game(s: &Scenario) -> Result<MatrixGame> {
    if s.users != 2 {
        return Err(Error::MatrixGame(format!("need exactly 2 users, scenario has {}", s.users)));
    }
    let engine = Engine::new(s)?;
    let own = |k: u32| -> Result<usize> {
        match engine.user_loads(k) {
            [l] => Ok(*l),
            other => Err(Error::MatrixGame(format!(
                "user {k} must own exactly one shiftable load, owns {}",
                other.len()
            ))),
        }
    };
    let (l1, l2) = (own(1)?, own(2)?);
    let starts1 = engine.loads()[l1].starts.clone();
    let starts2 = engine.loads()[l2].starts.clone();
    if starts1.len() * starts2.len() > 10_000 {
        return Err(Error::MatrixGame("action sets too large for an explicit matrix".into()));
    }
    let mut cells = Vec::with_capacity(starts1.len());
    for &a in &starts1 {
        let mut row = Vec::with_capacity(starts2.len());
        for &b in &starts2 {
            let mut starts = vec![0; 2];
            starts[l1] = a;
            starts[l2] = b;
            let st = engine.state_from_starts(&starts);
            row.push((engine.user_bill(&st, 1)?.0, engine.user_bill(&st, 2)?.0));
        }
        cells.push(row);
    }
    MatrixGame::new(
        starts1.iter().map(|t| t.to_string()).collect(),
        starts2.iter().map(|t| t.to_string()).collect(),
        cells,
        Orientation::Cost,
    )
}

/// Cells (1-based `(row, col)`) where neither player gains by a unilateral switch.
pub fn pure_ne_cells(g: &MatrixGame) -> BTreeSet<(usize, usize)> {
    let p = g.to_payoffs();
    let (rows, cols) = p.shape();
    let mut out = BTreeSet::new();
    for i in 0..rows {
        for j in 0..cols {
            let (a, b) = p.cells[i][j];
            let row_ok = (0..rows).all(|k| p.cells[k][j].0 <= a);
            let col_ok = (0..cols).all(|k| p.cells[i][k].1 <= b);
            if row_ok && col_ok {
                out.insert((i + 1, j + 1));
            }
        }
    }
    out
}

/// Cell-wise sum of two payoff-oriented games of identical shape.
pub fn augment_with_valuations(game: &MatrixGame, valuations: &MatrixGame) -> Result<MatrixGame> {
    if game.orientation != Orientation::Payoff || valuations.orientation != Orientation::Payoff {
        return Err(Error::MatrixGame("both games must be in payoff orientation".into()));
    }
    if game.shape() != valuations.shape() {
        return Err(Error::MatrixGame(format!(
            "shape mismatch: {:?} vs {:?}",
            game.shape(),
            valuations.shape()
        )));
    }
    let cells = game
        .cells
        .iter()
        .zip(&valuations.cells)
        .map(|(r1, r2)| r1.iter().zip(r2).map(|((a, b), (c, d))| (a + c, b + d)).collect())
        .collect();
    Ok(MatrixGame { cells, ..game.clone() })
}

/// Pure maximin payoff of each player (cost games are negated first).
pub fn maximin_values(g: &MatrixGame) -> (Q, Q) {
    let p = g.to_payoffs();
    let (rows, cols) = p.shape();
    let row_value = (0..rows)
        .map(|i| (0..cols).map(|j| p.cells[i][j].0).min().unwrap_or_else(Q::zero))
        .max()
        .unwrap_or_else(Q::zero);
    let col_value = (0..cols)
        .map(|j| (0..rows).map(|i| p.cells[i][j].1).min().unwrap_or_else(Q::zero))
        .max()
        .unwrap_or_else(Q::zero);
    (row_value, col_value)
}
