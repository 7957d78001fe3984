use nalgebra::{DMatrix, DVector, RealField};
use num_traits::{FromPrimitive, ToPrimitive};
use std::fmt::{Debug, Display, LowerExp};

/// Scalar type accepted by every numerical routine in the crate.
///
/// Only `RealField` methods are used on values, so `f32` and `f64` behave
/// identically apart from precision.
pub trait Real:
    RealField + Copy + FromPrimitive + ToPrimitive + Display + LowerExp + Debug + Send + Sync
{
    /// Converts an `f64` literal. Panics only for non-representable values,
    /// which cannot happen for the floating types implementing this trait.
    #[inline]
    fn c(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    #[inline]
    fn f64(self) -> f64 {
        self.to_f64().expect("scalar representable as f64")
    }

    #[inline]
    fn usize(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    /// Dense symmetric eigensolve returning unsorted eigenvalues and the
    /// matching orthonormal eigenvectors as columns.
    fn symmetric_eigen(m: DMatrix<Self>) -> Option<(DVector<Self>, DMatrix<Self>)>;
}

// LAPACK's divide-and-conquer driver; nalgebra's own implicit QR loses
// eigenvector accuracy on some of the generator matrices.
macro_rules! lapack_real {
    ($t:ty, $driver:path) => {
        impl Real for $t {
            fn symmetric_eigen(mut m: DMatrix<Self>) -> Option<(DVector<Self>, DMatrix<Self>)> {
                let n = m.nrows();
                if n == 0 || m.ncols() != n {
                    return None;
                }
                let ni = i32::try_from(n).ok()?;
                let mut w = vec![0.0; n];
                let mut work = vec![0.0; 1];
                let mut iwork = vec![0_i32; 1];
                let mut info = 0;
                // SAFETY: buffers match the sizes LAPACK is told about; the
                // first call only queries the workspace size.
                unsafe { $driver(b'V', b'U', ni, m.as_mut_slice(), ni, &mut w, &mut work, -1, &mut iwork, -1, &mut info) };
                if info != 0 {
                    return None;
                }
                let lwork = work[0] as i32;
                let liwork = iwork[0];
                work = vec![0.0; lwork.max(1) as usize];
                iwork = vec![0; liwork.max(1) as usize];
                unsafe { $driver(b'V', b'U', ni, m.as_mut_slice(), ni, &mut w, &mut work, lwork, &mut iwork, liwork, &mut info) };
                (info == 0).then(|| (DVector::from_vec(w), m))
            }
        }
    };
}

lapack_real!(f32, lapack::ssyevd);
lapack_real!(f64, lapack::dsyevd);

/// Gamma function, evaluated in double precision.
pub fn gamma<T: Real>(x: T) -> T {
    T::c(statrs::function::gamma::gamma(x.f64()))
}

pub(crate) fn max_abs<T: Real>(it: impl IntoIterator<Item = T>) -> T {
    it.into_iter().fold(T::zero(), |m, v| m.max(v.abs()))
}
