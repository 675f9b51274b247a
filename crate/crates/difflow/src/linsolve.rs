//! Direct sparse factorization behind the Newton and sensitivity solves.
//!
//! Wraps faer's sparse LU with partial pivoting. The symbolic analysis is
//! cached and reused whenever the sparsity pattern repeats, which is the case
//! for every Newton iteration within a time step (the convection Jacobian and
//! interpolation matrix keep structural zeros) and across steps while the
//! body mesh does not move.

use faer::linalg::solvers::Solve;
use faer::prelude::Reborrow;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;

use crate::error::{Error, Result};

pub(crate) type Trip = Triplet<usize, usize, f64>;

/// Cached symbolic factorization together with the pattern it was computed
/// for.
#[derive(Clone)]
pub(crate) struct SymbolicCache {
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    symbolic: SymbolicLu<usize>,
}

/// A factorized sparse matrix handle.
#[derive(Clone)]
pub(crate) struct SparseLu {
    lu: Lu<usize, f64>,
    n: usize,
}

impl SparseLu {
    /// Solve for a single right-hand side in place.
    pub fn solve_in_place(&self, rhs: &mut [f64]) {
        assert_eq!(rhs.len(), self.n);
        let m = Mat::from_fn(self.n, 1, |i, _| rhs[i]);
        let x = self.lu.solve(&m);
        for (i, r) in rhs.iter_mut().enumerate() {
            *r = x[(i, 0)];
        }
    }

    /// Solve for several right-hand sides (columns).
    pub fn solve_mat(&self, rhs: &Mat<f64>) -> Mat<f64> {
        assert_eq!(rhs.nrows(), self.n);
        self.lu.solve(rhs)
    }

    pub fn dim(&self) -> usize {
        self.n
    }
}

/// Build the sparse matrix from triplets (duplicates sum, structural zeros
/// are kept) and factorize it, reusing a cached symbolic analysis when the
/// pattern is unchanged.
pub(crate) fn factorize(
    n: usize,
    triplets: &[Trip],
    cache: &mut Option<SymbolicCache>,
) -> Result<SparseLu> {
    let mat = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, triplets)
        .map_err(|e| Error::SingularSystem(format!("matrix creation failed: {e:?}")))?;

    let reusable = cache.as_ref().is_some_and(|c| {
        let sym = mat.symbolic();
        c.col_ptr == sym.col_ptr() && c.row_idx == sym.row_idx()
    });
    if !reusable {
        let symbolic = SymbolicLu::try_new(mat.symbolic())
            .map_err(|e| Error::SingularSystem(format!("symbolic analysis failed: {e:?}")))?;
        *cache = Some(SymbolicCache {
            col_ptr: mat.symbolic().col_ptr().to_vec(),
            row_idx: mat.symbolic().row_idx().to_vec(),
            symbolic,
        });
    }
    let symbolic = cache.as_ref().unwrap().symbolic.clone();
    // the numeric factorization panics on exactly singular input
    let lu = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| {
        Lu::try_new_with_symbolic(symbolic, mat.rb())
    }))
    .map_err(|_| Error::SingularSystem("LU factorization hit a zero pivot".into()))?
    .map_err(|e| Error::SingularSystem(format!("LU factorization failed: {e:?}")))?;
    Ok(SparseLu { lu, n })
}

pub(crate) fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

pub(crate) fn two_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Order-insensitive fingerprint of a float slice, used to detect stale
/// factorizations.
pub(crate) fn fingerprint(slices: &[&[f64]]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for s in slices {
        for (i, v) in s.iter().enumerate() {
            h ^= v.to_bits().wrapping_add(i as u64).wrapping_mul(0x100_0000_01b3);
            h = h.rotate_left(27).wrapping_mul(0x9e37_79b9_7f4a_7c15);
        }
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factorize_and_solve_small_system() {
        // [2 1; 1 3] x = [3; 4] -> x = [1, 1]
        let trips = vec![
            Trip::new(0, 0, 2.0),
            Trip::new(0, 1, 1.0),
            Trip::new(1, 0, 1.0),
            Trip::new(1, 1, 3.0),
        ];
        let mut cache = None;
        let lu = factorize(2, &trips, &mut cache).unwrap();
        let mut rhs = vec![3.0, 4.0];
        lu.solve_in_place(&mut rhs);
        assert!((rhs[0] - 1.0).abs() < 1e-14);
        assert!((rhs[1] - 1.0).abs() < 1e-14);

        // same pattern, new values: symbolic is reused
        let trips2 = vec![
            Trip::new(0, 0, 4.0),
            Trip::new(0, 1, 1.0),
            Trip::new(1, 0, 1.0),
            Trip::new(1, 1, 3.0),
        ];
        let lu2 = factorize(2, &trips2, &mut cache).unwrap();
        let mut rhs2 = vec![5.0, 4.0];
        lu2.solve_in_place(&mut rhs2);
        assert!((rhs2[0] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn singular_matrix_is_reported() {
        let trips = vec![
            Trip::new(0, 0, 1.0),
            Trip::new(1, 0, 1.0),
            Trip::new(0, 1, 1.0),
            Trip::new(1, 1, 1.0),
        ];
        let mut cache = None;
        match factorize(2, &trips, &mut cache) {
            Err(Error::SingularSystem(_)) => {}
            Ok(f) => {
                // some pivoting paths only expose singularity at solve time
                let mut rhs = vec![1.0, 0.0];
                f.solve_in_place(&mut rhs);
                assert!(
                    rhs.iter().any(|v| !v.is_finite()),
                    "singular solve should not silently succeed"
                );
            }
            Err(e) => panic!("unexpected error {e}"),
        }
    }
}
