use super::SparseMatrix;

/// Fill-reducing symmetric permutation plus the symbolic cost it predicts.
#[derive(Debug, Clone, PartialEq)]
pub struct Ordering {
    /// `perm[k]` is the original index eliminated at step `k`.
    pub perm: Vec<usize>,
    /// Predicted nonzeros of L (diagonal included), assuming diagonal pivots.
    pub fill_nnz: usize,
    /// Predicted multiply-add count of the factorization.
    pub flops: f64,
}

impl Ordering {
    pub fn natural(n: usize) -> Self {
        let nf = n as f64;
        Self {
            perm: (0..n).collect(),
            fill_nnz: n * (n + 1) / 2,
            flops: nf * nf * nf / 3.0,
        }
    }
}

/// Above this size the bitset elimination graph would get too large; the
/// natural order is returned instead.
const MAX_BITSET_DIM: usize = 20_000;

/// Minimum-degree ordering on the pattern of `M + Mᵀ`.
///
/// Runs the elimination game on an explicit bitset graph. That is quadratic
/// in memory, which is fine for the few-thousand-unknown systems seen here and
/// lets fill be tracked exactly. Once the remaining graph is a clique the rest
/// is appended in index order.
pub fn minimum_degree(m: &SparseMatrix) -> Ordering {
    let n = m.nrows().min(m.ncols());
    if n > MAX_BITSET_DIM {
        return Ordering::natural(n);
    }
    let words = n.div_ceil(64).max(1);
    let mut adj = vec![0u64; n * words];
    let set = |adj: &mut [u64], i: usize, j: usize| adj[i * words + j / 64] |= 1 << (j % 64);
    for j in 0..n {
        for p in m.col_ptr()[j]..m.col_ptr()[j + 1] {
            let i = m.row_idx()[p];
            if i != j && i < n {
                set(&mut adj, i, j);
                set(&mut adj, j, i);
            }
        }
    }
    let popcount = |adj: &[u64], i: usize| -> usize {
        adj[i * words..(i + 1) * words]
            .iter()
            .map(|w| w.count_ones() as usize)
            .sum()
    };
    let mut degree: Vec<usize> = (0..n).map(|i| popcount(&adj, i)).collect();
    let mut alive = vec![true; n];
    let mut perm = Vec::with_capacity(n);
    let mut fill_nnz = 0usize;
    let mut flops = 0.0;
    let mut neighbours = Vec::new();
    let mut row_p = vec![0u64; words];

    while perm.len() < n {
        let remaining = n - perm.len();
        let (p, dp) = (0..n)
            .filter(|&i| alive[i])
            .map(|i| (i, degree[i]))
            .min_by_key(|&(i, d)| (d, i))
            .expect("at least one node remains");
        if dp + 1 >= remaining {
            // Clique: every remaining order costs the same.
            for (k, i) in (0..n).filter(|&i| alive[i]).enumerate() {
                let d = (remaining - 1 - k) as f64;
                fill_nnz += remaining - k;
                flops += d * d + d;
                perm.push(i);
            }
            break;
        }
        alive[p] = false;
        perm.push(p);
        fill_nnz += dp + 1;
        flops += (dp * dp + dp) as f64;

        row_p.copy_from_slice(&adj[p * words..(p + 1) * words]);
        neighbours.clear();
        for (w, &bits) in row_p.iter().enumerate() {
            let mut b = bits;
            while b != 0 {
                let t = b.trailing_zeros() as usize;
                neighbours.push(w * 64 + t);
                b &= b - 1;
            }
        }
        for &u in &neighbours {
            let row = &mut adj[u * words..(u + 1) * words];
            for (a, b) in row.iter_mut().zip(&row_p) {
                *a |= *b;
            }
            row[u / 64] &= !(1 << (u % 64));
            row[p / 64] &= !(1 << (p % 64));
            degree[u] = row.iter().map(|w| w.count_ones() as usize).sum();
        }
    }
    Ordering {
        perm,
        fill_nnz,
        flops,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::Triplets;

    fn arrow(n: usize) -> SparseMatrix {
        // Dense first row/column: eliminating node 0 first fills everything.
        let mut t = Triplets::new(n, n);
        for i in 0..n {
            t.push(i, i, 4.0);
            if i > 0 {
                t.push(0, i, 1.0);
                t.push(i, 0, 1.0);
            }
        }
        t.compress().unwrap()
    }

    #[test]
    fn arrow_hub_goes_last() {
        let o = minimum_degree(&arrow(10));
        assert_eq!(o.perm.len(), 10);
        assert!(o.perm[..8].iter().all(|&i| i != 0));
        assert_eq!(o.fill_nnz, 19);
    }

    #[test]
    fn permutation_is_complete() {
        let o = minimum_degree(&arrow(37));
        let mut p = o.perm.clone();
        p.sort_unstable();
        assert_eq!(p, (0..37).collect::<Vec<_>>());
    }

    #[test]
    fn diagonal_matrix_has_no_fill() {
        let o = minimum_degree(&SparseMatrix::identity(5));
        assert_eq!(o.fill_nnz, 5);
        assert_eq!(o.flops, 0.0);
    }
}
