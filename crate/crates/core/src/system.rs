use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{dim_check, Error, Result};
use crate::linalg::check_finite;

/// Linear system `dx = A x dt + B dM`, `y = C x`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpaceSystem {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
}

impl StateSpaceSystem {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        dim_check(n > 0, || "state dimension must be positive".into())?;
        dim_check(a.ncols() == n, || {
            format!("A must be square, got {}x{}", a.nrows(), a.ncols())
        })?;
        dim_check(b.nrows() == n, || {
            format!("B has {} rows, expected {n}", b.nrows())
        })?;
        dim_check(c.ncols() == n, || {
            format!("C has {} columns, expected {n}", c.ncols())
        })?;
        check_finite(&a, "A")?;
        check_finite(&b, "B")?;
        check_finite(&c, "C")?;
        Ok(Self { a, b, c })
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn m(&self) -> usize {
        self.b.ncols()
    }

    pub fn p(&self) -> usize {
        self.c.nrows()
    }

    /// State transformation `x̃ = S x`: `(S A S⁻¹, S B, C S⁻¹)`.
    pub fn transform(&self, s: &DMatrix<f64>, s_inv: &DMatrix<f64>) -> Result<Self> {
        let n = self.n();
        dim_check(s.shape() == (n, n) && s_inv.shape() == (n, n), || {
            format!("transformation must be {n}x{n}")
        })?;
        Self::new(s * &self.a * s_inv, s * &self.b, &self.c * s_inv)
    }

    /// Scales the output matrix by `s`.
    pub fn scale_output(&self, s: f64) -> Self {
        Self {
            a: self.a.clone(),
            b: self.b.clone(),
            c: &self.c * s,
        }
    }

    /// Removes states that the noise cannot reach or the output cannot see, judged on the
    /// sparsity graph of `A`. Rows of `B` and columns of `C` whose largest entry is below
    /// `rel_tol` times the largest entry of the whole matrix count as zero.
    ///
    /// Returns the pruned system and the kept state indices. Zero-initial-state outputs are
    /// unchanged by the pruning.
    pub fn prune_structural(&self, rel_tol: f64) -> (Self, Vec<usize>) {
        let n = self.n();
        let bmax = self.b.amax();
        let cmax = self.c.amax();
        let driven: Vec<bool> = (0..n)
            .map(|i| bmax > 0.0 && self.b.row(i).amax() > rel_tol * bmax)
            .collect();
        let seen: Vec<bool> = (0..n)
            .map(|j| cmax > 0.0 && self.c.column(j).amax() > rel_tol * cmax)
            .collect();

        // x_i depends on x_j when a_ij != 0.
        let reach = graph_closure(n, &driven, |j, i| self.a[(i, j)] != 0.0);
        let obs = graph_closure(n, &seen, |i, j| self.a[(i, j)] != 0.0);
        let keep: Vec<usize> = (0..n).filter(|&i| reach[i] && obs[i]).collect();
        if keep.len() == n {
            return (self.clone(), keep);
        }
        let k = keep.len();
        let a = DMatrix::from_fn(k, k, |i, j| self.a[(keep[i], keep[j])]);
        let b = DMatrix::from_fn(k, self.m(), |i, j| self.b[(keep[i], j)]);
        let c = DMatrix::from_fn(self.p(), k, |i, j| self.c[(i, keep[j])]);
        (Self { a, b, c }, keep)
    }

    pub fn to_record(&self, q_m: Option<&DMatrix<f64>>) -> SystemRecord {
        SystemRecord {
            n: self.n(),
            m: self.m(),
            p: self.p(),
            a: row_major(&self.a),
            b: row_major(&self.b),
            c: row_major(&self.c),
            q_m: q_m.map(row_major),
        }
    }
}

/// Breadth-first closure from `start` along edges `u -> v` where `edge(u, v)` holds.
fn graph_closure(n: usize, start: &[bool], edge: impl Fn(usize, usize) -> bool) -> Vec<bool> {
    let mut mark = start.to_vec();
    let mut stack: Vec<usize> = (0..n).filter(|&i| mark[i]).collect();
    while let Some(u) = stack.pop() {
        for (v, m) in mark.iter_mut().enumerate() {
            if !*m && edge(u, v) {
                *m = true;
                stack.push(v);
            }
        }
    }
    mark
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

/// Flat JSON form of a system: row-major matrices plus the optional noise covariance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemRecord {
    pub n: usize,
    pub m: usize,
    pub p: usize,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_m: Option<Vec<f64>>,
}

impl SystemRecord {
    pub fn to_system(&self) -> Result<StateSpaceSystem> {
        let (n, m, p) = (self.n, self.m, self.p);
        let take = |v: &[f64], r: usize, c: usize, what: &str| -> Result<DMatrix<f64>> {
            if v.len() != r * c {
                return Err(Error::DimensionMismatch(format!(
                    "{what} has {} entries, expected {r}x{c}",
                    v.len()
                )));
            }
            Ok(DMatrix::from_row_slice(r, c, v))
        };
        StateSpaceSystem::new(
            take(&self.a, n, n, "a")?,
            take(&self.b, n, m, "b")?,
            take(&self.c, p, n, "c")?,
        )
    }

    pub fn q_m(&self) -> Result<Option<DMatrix<f64>>> {
        match &self.q_m {
            None => Ok(None),
            Some(v) if v.len() == self.m * self.m => {
                Ok(Some(DMatrix::from_row_slice(self.m, self.m, v)))
            }
            Some(v) => Err(Error::DimensionMismatch(format!(
                "q_m has {} entries, expected {}x{}",
                v.len(),
                self.m,
                self.m
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_shapes() {
        let e = StateSpaceSystem::new(
            DMatrix::identity(2, 2),
            DMatrix::zeros(3, 1),
            DMatrix::zeros(1, 2),
        )
        .unwrap_err();
        assert_eq!(e.kind(), "DimensionMismatch");
    }

    #[test]
    fn pruning_drops_uncoupled_states() {
        // State 1 is unreachable, state 2 unobservable.
        let a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![-1.0, -2.0, -3.0]));
        let b = DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 1.0]);
        let c = DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 0.0]);
        let sys = StateSpaceSystem::new(a, b, c).unwrap();
        let (pruned, keep) = sys.prune_structural(1e-13);
        assert_eq!(keep, vec![0]);
        assert_eq!(pruned.n(), 1);
    }

    #[test]
    fn coupling_keeps_indirectly_driven_states() {
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 1.0, -1.0]);
        let b = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let c = DMatrix::from_row_slice(1, 2, &[0.0, 1.0]);
        let sys = StateSpaceSystem::new(a, b, c).unwrap();
        assert_eq!(sys.prune_structural(1e-13).1, vec![0, 1]);
    }

    #[test]
    fn record_round_trip() {
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 0.3, 0.1, -2.0]);
        let b = DMatrix::from_row_slice(2, 1, &[1.0, 0.5]);
        let c = DMatrix::from_row_slice(1, 2, &[0.25, 1.0 / 3.0]);
        let sys = StateSpaceSystem::new(a, b, c).unwrap();
        let back = sys.to_record(None).to_system().unwrap();
        assert_eq!(back, sys);
    }
}
