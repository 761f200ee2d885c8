//! Data-parallel building blocks.
//!
//! With the `parallel` feature (default) these dispatch onto the rayon pool;
//! without it they run the same chunked loops sequentially. Chunk boundaries
//! never depend on the thread count, so both builds produce bit-identical
//! results.

use ndarray::{s, Array2, ArrayView2};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Rows of the left operand handled per task in [`matmul`].
const ROW_CHUNK: usize = 64;

/// Below this many multiply-adds a product is not worth splitting.
const PAR_MIN_WORK: usize = 1 << 20;

/// `a · b`, splitting the rows of `a` across workers for large products.
pub fn matmul(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Array2<f64> {
    let (m, k) = a.dim();
    let n = b.ncols();
    assert_eq!(k, b.nrows(), "inner dimensions must agree");
    if m.saturating_mul(k).saturating_mul(n) < PAR_MIN_WORK || m <= ROW_CHUNK || n == 0 {
        return a.dot(&b);
    }
    let mut out = Array2::<f64>::zeros((m, n));
    {
        let buf = out
            .as_slice_mut()
            .expect("freshly allocated arrays are contiguous");
        let fill = |(chunk_idx, dst): (usize, &mut [f64])| {
            let r0 = chunk_idx * ROW_CHUNK;
            let r1 = (r0 + ROW_CHUNK).min(m);
            let block = a.slice(s![r0..r1, ..]).dot(&b);
            for (d, v) in dst.iter_mut().zip(block.iter()) {
                *d = *v;
            }
        };
        #[cfg(feature = "parallel")]
        buf.par_chunks_mut(ROW_CHUNK * n).enumerate().for_each(fill);
        #[cfg(not(feature = "parallel"))]
        buf.chunks_mut(ROW_CHUNK * n).enumerate().for_each(fill);
    }
    out
}

/// `aᵀ · b` without materializing the transpose.
pub fn t_matmul(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Array2<f64> {
    matmul(a.t(), b)
}

/// Evaluates `f(0..n)` and returns the results in index order.
pub fn map_indexed<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Whether this build dispatches work onto a thread pool.
pub const fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    #[test]
    fn chunked_product_matches_plain_dot() {
        let a = Array2::from_shape_fn((300, 70), |(i, j)| ((i * 7 + j * 3) % 11) as f64 - 5.0);
        let b = Array2::from_shape_fn((70, 90), |(i, j)| ((i + 2 * j) % 5) as f64 * 0.5);
        let got = matmul(a.view(), b.view());
        let want = a.dot(&b);
        assert_eq!(got, want);
    }

    #[test]
    fn map_keeps_order() {
        let v = map_indexed(100, |i| i * i);
        assert!(v.iter().enumerate().all(|(i, &x)| x == i * i));
    }
}
