//! Dantzig-selector LP for the decorrelation vector:
//!
//! ```text
//! minimize ||v||_1  subject to  ||h_ag - H_gg v||_inf <= rho
//! ```
//!
//! Solved exactly with a dense two-phase tableau simplex on the split
//! `v = v+ - v-`, `v+- >= 0`. Entering and leaving variables follow Bland's
//! rule (lowest index), so degenerate problems terminate and ties between
//! optimal vertices are broken reproducibly.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};
use crate::loss::l1_norm;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DantzigStatus {
    Optimal,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DantzigResult<T> {
    pub d_hat: Array1<T>,
    pub l1_norm: T,
    /// `rho - ||h_ag - H_gg d_hat||_inf`; nonnegative up to rounding when optimal.
    pub max_slack: T,
    pub status: DantzigStatus,
}

impl<T: Scalar> DantzigResult<T> {
    pub fn is_optimal(&self) -> bool {
        self.status == DantzigStatus::Optimal
    }

    pub fn message(&self) -> String {
        match self.status {
            DantzigStatus::Optimal => format!("optimal, ||d||_1 = {}", self.l1_norm),
            DantzigStatus::Infeasible => {
                "Dantzig selector infeasible: no v satisfies the constraint; increase rho".into()
            }
        }
    }
}

/// Largest violation `||h_ag - h_gg v||_inf`.
pub fn constraint_residual<T: Scalar>(
    h_ag: ArrayView1<'_, T>,
    h_gg: ArrayView2<'_, T>,
    v: ArrayView1<'_, T>,
) -> T {
    h_gg.rows()
        .into_iter()
        .zip(h_ag.iter())
        .map(|(row, &h)| (h - crate::loss::dot(row, v)).abs())
        .fold(T::zero(), T::max)
}

fn result_for<T: Scalar>(
    h_ag: ArrayView1<'_, T>,
    h_gg: ArrayView2<'_, T>,
    rho: T,
    d_hat: Array1<T>,
    status: DantzigStatus,
) -> DantzigResult<T> {
    let max_slack = rho - constraint_residual(h_ag, h_gg, d_hat.view());
    DantzigResult {
        l1_norm: l1_norm(d_hat.view()),
        d_hat,
        max_slack,
        status,
    }
}

/// Solves the Dantzig-selector LP. `h_gg` must be symmetric to `1e-10`
/// (relative to its largest entry) and `rho` positive.
pub fn solve_dantzig<T: Scalar>(
    h_ag: ArrayView1<'_, T>,
    h_gg: ArrayView2<'_, T>,
    rho: T,
) -> Result<DantzigResult<T>> {
    let m = h_ag.len();
    if h_gg.dim() != (m, m) {
        return Err(Error::Input(format!(
            "h_gg has shape {:?}, expected {m}x{m}",
            h_gg.dim()
        )));
    }
    if !(rho > T::zero()) || !rho.is_finite() {
        return Err(Error::Input(format!(
            "rho must be positive and finite, got {rho}"
        )));
    }
    if h_ag.iter().chain(h_gg.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Input(
            "Dantzig inputs contain non-finite entries".into(),
        ));
    }
    let scale = h_gg
        .iter()
        .chain(h_ag.iter())
        .fold(rho, |acc, &v| acc.max(v.abs()));
    let sym_tol = T::of(1e-10) * scale.max(T::one());
    for a in 0..m {
        for b in (a + 1)..m {
            if (h_gg[[a, b]] - h_gg[[b, a]]).abs() > sym_tol {
                return Err(Error::Input(format!("h_gg is not symmetric at ({a}, {b})")));
            }
        }
    }

    if h_ag.iter().all(|h| h.abs() <= rho) {
        return Ok(result_for(
            h_ag,
            h_gg,
            rho,
            Array1::zeros(m),
            DantzigStatus::Optimal,
        ));
    }

    let h = h_gg.mapv(|v| v / scale);
    let g = h_ag.mapv(|v| v / scale);
    let r = rho / scale;

    // Rows: H v <= r + g, then -H v <= r - g; columns v+ (m), v- (m).
    let rows = 2 * m;
    let mut a = Array2::<T>::zeros((rows, 2 * m));
    let mut b = Array1::<T>::zeros(rows);
    for i in 0..m {
        for k in 0..m {
            a[[i, k]] = h[[i, k]];
            a[[i, m + k]] = -h[[i, k]];
            a[[m + i, k]] = -h[[i, k]];
            a[[m + i, m + k]] = h[[i, k]];
        }
        b[i] = r + g[i];
        b[m + i] = r - g[i];
    }
    let cost = Array1::from_elem(2 * m, T::one());

    match Simplex::minimize_leq(a.view(), b.view(), cost.view())? {
        Some(x) => {
            let v = Array1::from_shape_fn(m, |k| x[k] - x[m + k]);
            Ok(result_for(h_ag, h_gg, rho, v, DantzigStatus::Optimal))
        }
        None => Ok(result_for(
            h_ag,
            h_gg,
            rho,
            Array1::zeros(m),
            DantzigStatus::Infeasible,
        )),
    }
}

const DEGENERATE_STREAK: usize = 32;

/// Dense tableau for `min c^T x  s.t.  A x <= b, x >= 0`.
///
/// Column layout: structural variables, one slack per row, then one
/// artificial per row whose right-hand side is negative.
struct Simplex<T> {
    width: usize,
    rows: usize,
    n_struct: usize,
    tab: Vec<T>,
    rhs: Vec<T>,
    basis: Vec<usize>,
    tol: T,
}

impl<T: Scalar> Simplex<T> {
    /// Returns `Ok(None)` when the feasible set is empty.
    fn minimize_leq(
        a: ArrayView2<'_, T>,
        b: ArrayView1<'_, T>,
        c: ArrayView1<'_, T>,
    ) -> Result<Option<Array1<T>>> {
        let (rows, n_struct) = a.dim();
        let negative: Vec<usize> = (0..rows).filter(|&i| b[i] < T::zero()).collect();
        let width = n_struct + rows + negative.len();
        let mut s = Simplex {
            width,
            rows,
            n_struct,
            tab: vec![T::zero(); rows * width],
            rhs: vec![T::zero(); rows],
            basis: vec![0; rows],
            tol: T::epsilon() * T::of(1e5),
        };
        let mut art = 0;
        for i in 0..rows {
            let flip = b[i] < T::zero();
            let sign = if flip { -T::one() } else { T::one() };
            for k in 0..n_struct {
                s.tab[i * width + k] = sign * a[[i, k]];
            }
            s.tab[i * width + n_struct + i] = sign;
            s.rhs[i] = sign * b[i];
            if flip {
                let col = n_struct + rows + art;
                s.tab[i * width + col] = T::one();
                s.basis[i] = col;
                art += 1;
            } else {
                s.basis[i] = n_struct + i;
            }
        }

        if !negative.is_empty() {
            let mut phase1 = vec![T::zero(); width];
            for col in (n_struct + rows)..width {
                phase1[col] = T::one();
            }
            s.run(&phase1, width)?;
            let infeasibility = s
                .basis
                .iter()
                .zip(&s.rhs)
                .filter(|(&col, _)| col >= n_struct + rows)
                .fold(T::zero(), |acc, (_, &v)| acc + v);
            if infeasibility > T::of(1e-9).max(s.tol) {
                return Ok(None);
            }
            s.evict_artificials();
        }

        let mut phase2 = vec![T::zero(); width];
        phase2[..n_struct].copy_from_slice(c.as_slice().expect("contiguous cost"));
        s.run(&phase2, n_struct + rows)?;

        let mut x = Array1::zeros(n_struct);
        for (r, &col) in s.basis.iter().enumerate() {
            if col < n_struct {
                x[col] = s.rhs[r].max(T::zero());
            }
        }
        Ok(Some(x))
    }

    fn pivot(&mut self, p: usize, q: usize) {
        let w = self.width;
        let inv = T::one() / self.tab[p * w + q];
        for k in 0..w {
            self.tab[p * w + k] *= inv;
        }
        self.rhs[p] *= inv;
        self.tab[p * w + q] = T::one();
        let (pivot_row, pivot_rhs) = (self.tab[p * w..(p + 1) * w].to_vec(), self.rhs[p]);
        for r in 0..self.rows {
            if r == p {
                continue;
            }
            let f = self.tab[r * w + q];
            if f.is_zero() {
                continue;
            }
            let row = &mut self.tab[r * w..(r + 1) * w];
            for (x, &pv) in row.iter_mut().zip(&pivot_row) {
                if !pv.is_zero() {
                    *x -= f * pv;
                }
            }
            row[q] = T::zero();
            self.rhs[r] -= f * pivot_rhs;
        }
        self.basis[p] = q;
    }

    /// Primal simplex on the current basis. Only the first `allowed` columns
    /// may enter. The entering column has the most negative reduced cost
    /// until `DEGENERATE_STREAK` consecutive pivots fail to move the
    /// objective; from then until the next nondegenerate pivot Bland's rule
    /// (lowest eligible index) applies, which rules out cycling. The leaving
    /// row always follows the minimum ratio with ties going to the lowest
    /// basic index.
    fn run(&mut self, cost: &[T], allowed: usize) -> Result<()> {
        let w = self.width;
        // Reduced costs z_j = c_j - c_B^T B^-1 A_j, kept in sync through pivots.
        let mut z = cost.to_vec();
        for r in 0..self.rows {
            let cb = cost[self.basis[r]];
            if cb.is_zero() {
                continue;
            }
            for k in 0..w {
                z[k] -= cb * self.tab[r * w + k];
            }
        }
        let max_pivots = 50_000 + 200 * (self.rows + w);
        let mut streak = 0;
        for _ in 0..max_pivots {
            let entering = if streak >= DEGENERATE_STREAK {
                (0..allowed).find(|&j| z[j] < -self.tol)
            } else {
                (0..allowed)
                    .filter(|&j| z[j] < -self.tol)
                    .fold(None, |best: Option<usize>, j| match best {
                        Some(b) if z[b] <= z[j] => Some(b),
                        _ => Some(j),
                    })
            };
            let Some(q) = entering else {
                return Ok(());
            };
            let mut best: Option<(usize, T)> = None;
            for r in 0..self.rows {
                let coef = self.tab[r * w + q];
                if coef > self.tol {
                    let ratio = self.rhs[r].max(T::zero()) / coef;
                    best = match best {
                        None => Some((r, ratio)),
                        Some((br, bratio)) => {
                            if ratio < bratio || (ratio == bratio && self.basis[r] < self.basis[br])
                            {
                                Some((r, ratio))
                            } else {
                                Some((br, bratio))
                            }
                        }
                    };
                }
            }
            let Some((p, step)) = best else {
                return Err(Error::Numerical("linear program is unbounded".into()));
            };
            streak = if step > self.tol { 0 } else { streak + 1 };
            let zq = z[q];
            self.pivot(p, q);
            for k in 0..w {
                let t = self.tab[p * w + k];
                if !t.is_zero() {
                    z[k] -= zq * t;
                }
            }
            z[q] = T::zero();
        }
        Err(Error::Numerical("simplex iteration limit reached".into()))
    }

    /// After phase one, pivots zero-level artificials out of the basis where a
    /// structural or slack column allows it; remaining ones sit on redundant rows.
    fn evict_artificials(&mut self) {
        let w = self.width;
        let first_art = self.n_struct + self.rows;
        for r in 0..self.rows {
            if self.basis[r] < first_art {
                continue;
            }
            let entering = (0..first_art)
                .filter(|&k| !self.basis.contains(&k))
                .find(|&k| self.tab[r * w + k].abs() > self.tol);
            if let Some(q) = entering {
                self.pivot(r, q);
            }
        }
    }
}
