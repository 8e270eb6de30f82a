//! Finite two-player zero-sum games. The row player minimises.
//!
//! Small games are solved exactly: one column by the row minimum, two columns
//! by enumerating supports of size at most two, and anything up to
//! [`SolverSettings::exact_max_dim`] by a dense simplex. Larger games fall
//! back to multiplicative-weights self-play.

use serde::{Deserialize, Serialize};

use super::SolverError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// Points in the learner/adversary grids of non-closed-form games.
    #[serde(default = "default_grid")]
    pub grid: usize,
    #[serde(default = "default_exact")]
    pub exact_max_dim: usize,
    #[serde(default = "default_mw_iter")]
    pub mw_max_iter: usize,
}

fn default_tol() -> f64 {
    1e-4
}
fn default_grid() -> usize {
    101
}
fn default_exact() -> usize {
    256
}
fn default_mw_iter() -> usize {
    100_000
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            tol: default_tol(),
            grid: default_grid(),
            exact_max_dim: default_exact(),
            mw_max_iter: default_mw_iter(),
        }
    }
}

/// Payoffs `u(p_i, y_j)` to the adversary; rows are learner actions.
#[derive(Debug, Clone, PartialEq)]
pub struct GameMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    pub row_labels: Vec<f64>,
    pub col_labels: Vec<f64>,
}

impl GameMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, SolverError> {
        if rows == 0 || cols == 0 || data.len() != rows * cols {
            return Err(SolverError::Shape { rows, cols, len: data.len() });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(SolverError::NonFinite);
        }
        Ok(Self {
            rows,
            cols,
            data,
            row_labels: (0..rows).map(|i| i as f64).collect(),
            col_labels: (0..cols).map(|j| j as f64).collect(),
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, SolverError> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(SolverError::Shape { rows: r, cols: c, len: rows.iter().map(Vec::len).sum() });
        }
        Self::new(r, c, rows.concat())
    }

    /// Fills entry `(i, j)` with `payoff(row_labels[i], col_labels[j])`.
    pub fn from_fn(
        row_labels: Vec<f64>,
        col_labels: Vec<f64>,
        mut payoff: impl FnMut(f64, f64) -> f64,
    ) -> Result<Self, SolverError> {
        let mut data = Vec::with_capacity(row_labels.len() * col_labels.len());
        for &p in &row_labels {
            for &y in &col_labels {
                data.push(payoff(p, y));
            }
        }
        let mut g = Self::new(row_labels.len(), col_labels.len(), data)?;
        g.row_labels = row_labels;
        g.col_labels = col_labels;
        Ok(g)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Worst column payoff `max_j (x^T U)_j` for a row mixture.
    pub fn row_value(&self, x: &[f64]) -> f64 {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| x[i] * self.get(i, j)).sum::<f64>())
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Best row response `min_i (U y)_i` to a column mixture.
    pub fn col_value(&self, y: &[f64]) -> f64 {
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(y).map(|(u, w)| u * w).sum::<f64>())
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GameSolution {
    /// Minimising row mixture.
    pub row: Vec<f64>,
    /// Maximising column mixture.
    pub col: Vec<f64>,
    /// `max_j (x^T U)_j` at the returned row mixture.
    pub value: f64,
    /// Duality gap between `value` and the column mixture's guarantee.
    pub residual: f64,
    pub iterations: usize,
}

pub fn solve_zero_sum(game: &GameMatrix, settings: &SolverSettings) -> Result<GameSolution, SolverError> {
    if !(settings.tol > 0.0) {
        return Err(SolverError::InvalidTolerance(settings.tol));
    }
    if game.cols == 1 {
        return Ok(solve_one_column(game));
    }
    if game.rows == 1 {
        let mut col = vec![0.0; game.cols];
        let (j, _) = argmax(game.row(0));
        col[j] = 1.0;
        return Ok(finish(game, vec![1.0], col, 0));
    }
    if game.cols == 2 {
        return Ok(solve_two_columns(game));
    }
    if game.rows.max(game.cols) <= settings.exact_max_dim {
        return simplex(game);
    }
    multiplicative_weights(game, settings)
}

fn finish(game: &GameMatrix, row: Vec<f64>, col: Vec<f64>, iterations: usize) -> GameSolution {
    let value = game.row_value(&row);
    let lower = game.col_value(&col);
    GameSolution {
        residual: (value - lower).max(0.0),
        row,
        col,
        value,
        iterations,
    }
}

fn argmax(v: &[f64]) -> (usize, f64) {
    v.iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, x)| if x > acc.1 { (i, x) } else { acc })
}

fn solve_one_column(game: &GameMatrix) -> GameSolution {
    let (i, _) = (0..game.rows)
        .map(|i| (i, game.get(i, 0)))
        .fold((0, f64::INFINITY), |acc, (i, x)| if x < acc.1 { (i, x) } else { acc });
    let mut row = vec![0.0; game.rows];
    row[i] = 1.0;
    finish(game, row, vec![1.0], 0)
}

/// With two columns an optimal row mixture has support at most two, and along
/// each row pair the upper envelope is minimised at an end or where the two
/// columns cross.
fn solve_two_columns(game: &GameMatrix) -> GameSolution {
    let n = game.rows;
    let mut best = (f64::INFINITY, 0, 0, 1.0);
    for i in 0..n {
        let v = game.get(i, 0).max(game.get(i, 1));
        if v < best.0 {
            best = (v, i, i, 1.0);
        }
    }
    for i in 0..n {
        let (a0, a1) = (game.get(i, 0), game.get(i, 1));
        for k in (i + 1)..n {
            let (b0, b1) = (game.get(k, 0), game.get(k, 1));
            // weight lam on row i: col0 = b0 + lam (a0 - b0), col1 = b1 + lam (a1 - b1)
            let denom = (a0 - b0) - (a1 - b1);
            if denom.abs() < 1e-300 {
                continue;
            }
            let lam = (b1 - b0) / denom;
            if !(0.0..=1.0).contains(&lam) {
                continue;
            }
            let v0 = b0 + lam * (a0 - b0);
            let v1 = b1 + lam * (a1 - b1);
            let v = v0.max(v1);
            if v < best.0 - 1e-15 {
                best = (v, i, k, lam);
            }
        }
    }
    let (_, i, k, lam) = best;
    let mut row = vec![0.0; n];
    row[i] += lam;
    row[k] += 1.0 - lam;
    let col = two_column_dual(game, &row);
    finish(game, row, col, 0)
}

/// Column mixture equalising the minimising rows, or a pure column if one
/// dominates.
fn two_column_dual(game: &GameMatrix, row: &[f64]) -> Vec<f64> {
    let n = game.rows;
    let mut best = (f64::NEG_INFINITY, vec![0.5, 0.5]);
    let mut consider = |mu: f64| {
        if !(0.0..=1.0).contains(&mu) {
            return;
        }
        let y = vec![mu, 1.0 - mu];
        let v = game.col_value(&y);
        if v > best.0 {
            best = (v, y);
        }
    };
    consider(0.0);
    consider(1.0);
    // the lower envelope peaks where two rows cross; all pairs for small
    // games, otherwise only the pair carrying the row mixture
    let candidates: Vec<usize> = if n <= 64 {
        (0..n).collect()
    } else {
        (0..n).filter(|&i| row[i] > 0.0).collect()
    };
    for (ai, &i) in candidates.iter().enumerate() {
        for &k in &candidates[ai + 1..] {
            let di = game.get(i, 0) - game.get(i, 1);
            let dk = game.get(k, 0) - game.get(k, 1);
            let denom = di - dk;
            if denom.abs() > 1e-300 {
                consider((game.get(k, 1) - game.get(i, 1)) / denom);
            }
        }
    }
    best.1
}

/// Solves `max 1^T z  s.t.  U'^T z <= 1, z >= 0` for the shifted, strictly
/// positive matrix `U' = U - min(U) + 1`. Then `x = z / Σz` and the game
/// value is `1 / Σz - 1 + min(U)`. The origin is feasible, so no phase one.
fn simplex(game: &GameMatrix) -> Result<GameSolution, SolverError> {
    let (n, m) = (game.rows, game.cols);
    let min = game.data.iter().copied().fold(f64::INFINITY, f64::min);
    let shift = 1.0 - min;
    let width = n + m + 1;
    // tableau: m constraint rows then the objective row
    let mut tab = vec![0.0; (m + 1) * width];
    for j in 0..m {
        for i in 0..n {
            tab[j * width + i] = game.get(i, j) + shift;
        }
        tab[j * width + n + j] = 1.0;
        tab[j * width + n + m] = 1.0;
    }
    for i in 0..n {
        tab[m * width + i] = -1.0;
    }
    let mut basis: Vec<usize> = (n..n + m).collect();
    let max_iter = 50 * (n + m) + 1000;
    let eps = 1e-12;
    let mut iterations = 0;
    let mut degenerate_run = 0;
    loop {
        let obj = &tab[m * width..m * width + n + m];
        let bland = degenerate_run > 2 * (n + m);
        let enter = if bland {
            obj.iter().position(|&c| c < -eps)
        } else {
            let (idx, val) = obj
                .iter()
                .copied()
                .enumerate()
                .fold((0, 0.0), |acc, (i, c)| if c < acc.1 { (i, c) } else { acc });
            (val < -eps).then_some(idx)
        };
        let Some(e) = enter else { break };
        let mut leave: Option<(usize, f64)> = None;
        for r in 0..m {
            let a = tab[r * width + e];
            if a > eps {
                let ratio = tab[r * width + n + m] / a;
                leave = match leave {
                    None => Some((r, ratio)),
                    Some((lr, lratio)) => {
                        if ratio < lratio - 1e-15 || (bland && ratio <= lratio + 1e-15 && basis[r] < basis[lr]) {
                            Some((r, ratio))
                        } else {
                            Some((lr, lratio))
                        }
                    }
                };
            }
        }
        // bounded: every column of U' is positive
        let Some((p, ratio)) = leave else {
            return Err(SolverError::Unbounded);
        };
        degenerate_run = if ratio.abs() < 1e-15 { degenerate_run + 1 } else { 0 };
        pivot(&mut tab, width, m, p, e);
        basis[p] = e;
        iterations += 1;
        if iterations > max_iter {
            return Err(SolverError::NoConvergence {
                iterations,
                residual: f64::NAN,
            });
        }
    }
    let mut z = vec![0.0; n];
    for (r, &b) in basis.iter().enumerate() {
        if b < n {
            z[b] = tab[r * width + n + m].max(0.0);
        }
    }
    let total: f64 = z.iter().sum();
    if !(total > 0.0) {
        return Err(SolverError::Degenerate);
    }
    let row: Vec<f64> = z.iter().map(|v| v / total).collect();
    let mut col: Vec<f64> = (0..m).map(|j| tab[m * width + n + j].max(0.0)).collect();
    let cs: f64 = col.iter().sum();
    if cs > 0.0 {
        col.iter_mut().for_each(|v| *v /= cs);
    } else {
        col = vec![1.0 / m as f64; m];
    }
    Ok(finish(game, row, col, iterations))
}

fn pivot(tab: &mut [f64], width: usize, m: usize, p: usize, e: usize) {
    let pv = tab[p * width + e];
    for c in 0..width {
        tab[p * width + c] /= pv;
    }
    let prow: Vec<f64> = tab[p * width..(p + 1) * width].to_vec();
    for r in 0..=m {
        if r == p {
            continue;
        }
        let f = tab[r * width + e];
        if f != 0.0 {
            let row = &mut tab[r * width..(r + 1) * width];
            for (v, pr) in row.iter_mut().zip(&prow) {
                *v -= f * pr;
            }
            row[e] = 0.0;
        }
    }
}

/// Both players run optimistic exponential weights (each step uses twice the
/// latest payoff minus the previous one); the averaged strategies converge to
/// equilibrium at rate O(1/T). Stops once the duality gap is within `tol`.
fn multiplicative_weights(game: &GameMatrix, settings: &SolverSettings) -> Result<GameSolution, SolverError> {
    let (n, m) = (game.rows, game.cols);
    let span = game.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        - game.data.iter().copied().fold(f64::INFINITY, f64::min);
    let span = if span > 0.0 { span } else { 1.0 };
    let eta = 0.25 / span;
    let mut lx = vec![0.0; n];
    let mut ly = vec![0.0; m];
    let mut x = vec![1.0 / n as f64; n];
    let mut y = vec![1.0 / m as f64; m];
    let mut prev_ux = vec![0.0; n];
    let mut prev_uy = vec![0.0; m];
    let mut ax = vec![0.0; n];
    let mut ay = vec![0.0; m];
    let mut residual = f64::INFINITY;
    for it in 1..=settings.mw_max_iter {
        for (a, v) in ax.iter_mut().zip(&x) {
            *a += v;
        }
        for (a, v) in ay.iter_mut().zip(&y) {
            *a += v;
        }
        // row losses U y, column gains x^T U
        for i in 0..n {
            let u: f64 = game.row(i).iter().zip(&y).map(|(a, b)| a * b).sum();
            lx[i] -= eta * (2.0 * u - prev_ux[i]);
            prev_ux[i] = u;
        }
        for j in 0..m {
            let u: f64 = (0..n).map(|i| x[i] * game.get(i, j)).sum();
            ly[j] += eta * (2.0 * u - prev_uy[j]);
            prev_uy[j] = u;
        }
        normalise_exp(&lx, &mut x);
        normalise_exp(&ly, &mut y);
        if it % 100 == 0 || it == settings.mw_max_iter {
            let xa: Vec<f64> = ax.iter().map(|v| v / it as f64).collect();
            let ya: Vec<f64> = ay.iter().map(|v| v / it as f64).collect();
            residual = game.row_value(&xa) - game.col_value(&ya);
            if residual <= settings.tol {
                return Ok(finish(game, xa, ya, it));
            }
        }
    }
    Err(SolverError::NoConvergence {
        iterations: settings.mw_max_iter,
        residual,
    })
}

fn normalise_exp(logw: &[f64], out: &mut [f64]) {
    let max = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut z = 0.0;
    for (o, l) in out.iter_mut().zip(logw) {
        *o = (l - max).exp();
        z += *o;
    }
    out.iter_mut().for_each(|v| *v /= z);
}
