//! Sparse solves of the damped normal equations `(A + μI) h = −g`.
//!
//! `A` is symmetric with a pattern that stays fixed across iterations, so the
//! reverse Cuthill–McKee ordering and the factor's profile are computed once
//! and only numeric refactorizations happen per damping value.

use std::collections::VecDeque;

use nalgebra::DVector;
use nalgebra_sparse::pattern::SparsityPattern;
use nalgebra_sparse::CsrMatrix;

use crate::error::{Error, Result};

/// Relative residual a returned step must reach.
pub const SOLVE_TOL: f64 = 1e-10;
const REFINEMENT_STEPS: usize = 3;

/// `y = M x` for CSR `M`.
pub fn csr_mul_vec(m: &CsrMatrix<f64>, x: &DVector<f64>) -> DVector<f64> {
    let mut y = DVector::zeros(m.nrows());
    for (i, row) in m.row_iter().enumerate() {
        y[i] = row
            .col_indices()
            .iter()
            .zip(row.values())
            .map(|(&c, &v)| v * x[c])
            .sum();
    }
    y
}

/// `y = Mᵀ x` for CSR `M`.
pub fn csr_tr_mul_vec(m: &CsrMatrix<f64>, x: &DVector<f64>) -> DVector<f64> {
    let mut y = DVector::zeros(m.ncols());
    for (i, row) in m.row_iter().enumerate() {
        let xi = x[i];
        if xi == 0.0 {
            continue;
        }
        for (&c, &v) in row.col_indices().iter().zip(row.values()) {
            y[c] += v * xi;
        }
    }
    y
}

/// Builds `JᵀJ` and `Jᵀf` for a fixed Jacobian pattern.
///
/// Consecutive rows with identical column sets (one face's residuals) form a
/// group; each group adds a small dense block into precomputed slots of `A`.
pub struct NormalEquations {
    j_offsets: Vec<usize>,
    j_indices: Vec<usize>,
    /// `(first row, end row, start of the group's slot block)`
    groups: Vec<(usize, usize, usize)>,
    slots: Vec<usize>,
    pattern: SparsityPattern,
}

impl NormalEquations {
    pub fn new(j: &CsrMatrix<f64>) -> Result<Self> {
        let n = j.ncols();
        let (j_offsets, j_indices) = (j.row_offsets().to_vec(), j.col_indices().to_vec());
        let cols = |r: usize| &j_indices[j_offsets[r]..j_offsets[r + 1]];
        let mut group_rows = Vec::new();
        let mut r = 0;
        while r < j.nrows() {
            let mut end = r + 1;
            while end < j.nrows() && cols(end) == cols(r) {
                end += 1;
            }
            group_rows.push((r, end));
            r = end;
        }

        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); n];
        for &(r, _) in &group_rows {
            for &a in cols(r) {
                rows[a].extend_from_slice(cols(r));
            }
        }
        let mut offsets = Vec::with_capacity(n + 1);
        let mut indices = Vec::new();
        offsets.push(0);
        for (i, row) in rows.iter_mut().enumerate() {
            row.push(i);
            row.sort_unstable();
            row.dedup();
            indices.extend_from_slice(row);
            offsets.push(indices.len());
        }
        drop(rows);

        let mut groups = Vec::with_capacity(group_rows.len());
        let mut slots = Vec::new();
        for &(r, end) in &group_rows {
            let c = cols(r);
            groups.push((r, end, slots.len()));
            for &a in c {
                let lane = &indices[offsets[a]..offsets[a + 1]];
                let mut k = 0;
                for &b in c {
                    while lane[k] != b {
                        k += 1;
                    }
                    slots.push(offsets[a] + k);
                }
            }
        }
        let pattern = SparsityPattern::try_from_offsets_and_indices(n, n, offsets, indices)
            .map_err(|e| Error::FactorizationFailure(e.to_string()))?;
        Ok(Self {
            j_offsets,
            j_indices,
            groups,
            slots,
            pattern,
        })
    }

    /// True if `j` has the pattern this assembler was built for.
    pub fn matches(&self, j: &CsrMatrix<f64>) -> bool {
        j.row_offsets() == self.j_offsets.as_slice() && j.col_indices() == self.j_indices.as_slice()
    }

    /// `(JᵀJ, Jᵀf)`.
    pub fn assemble(&self, j: &CsrMatrix<f64>, f: &DVector<f64>) -> (CsrMatrix<f64>, DVector<f64>) {
        let mut values = vec![0.0; self.pattern.nnz()];
        let jv = j.values();
        let mut block = Vec::new();
        for &(r0, r1, s0) in &self.groups {
            let (lo, hi) = (self.j_offsets[r0], self.j_offsets[r0 + 1]);
            let k = hi - lo;
            block.clear();
            block.resize(k * k, 0.0);
            for r in r0..r1 {
                let row = &jv[self.j_offsets[r]..self.j_offsets[r] + k];
                for a in 0..k {
                    let ra = row[a];
                    if ra == 0.0 {
                        continue;
                    }
                    let dst = &mut block[a * k..(a + 1) * k];
                    for (d, &rb) in dst.iter_mut().zip(row) {
                        *d += ra * rb;
                    }
                }
            }
            for (slot, v) in self.slots[s0..s0 + k * k].iter().zip(&block) {
                values[*slot] += v;
            }
        }
        let a = CsrMatrix::try_from_pattern_and_values(self.pattern.clone(), values)
            .expect("values match pattern");
        (a, csr_tr_mul_vec(j, f))
    }
}

/// Reverse Cuthill–McKee ordering of a symmetric pattern; `perm[new] = old`.
pub fn reverse_cuthill_mckee(pattern: &SparsityPattern) -> Vec<usize> {
    let n = pattern.major_dim();
    let degree: Vec<usize> = (0..n).map(|i| pattern.lane(i).len()).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&i| (degree[i], i));
    let mut queue = VecDeque::new();
    let mut neighbors = Vec::new();
    for &start in &by_degree {
        if visited[start] {
            continue;
        }
        visited[start] = true;
        queue.push_back(start);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            neighbors.clear();
            neighbors.extend(pattern.lane(v).iter().copied().filter(|&u| !visited[u]));
            neighbors.sort_by_key(|&u| (degree[u], u));
            for &u in &neighbors {
                visited[u] = true;
                queue.push_back(u);
            }
        }
    }
    order.reverse();
    order
}

/// Lower-triangular profile storage: row `i` holds columns `first[i]..=i`.
#[derive(Debug, Clone)]
struct Envelope {
    first: Vec<usize>,
    start: Vec<usize>,
    values: Vec<f64>,
}

impl Envelope {
    fn row(&self, i: usize) -> &[f64] {
        &self.values[self.start[i]..self.start[i + 1]]
    }

    /// In-place Cholesky `A = L Lᵀ`; fill stays inside the profile.
    fn factor(&mut self) -> Result<()> {
        let n = self.first.len();
        for i in 0..n {
            let fi = self.first[i];
            let si = self.start[i];
            for j in fi..i {
                let fj = self.first[j];
                let k0 = fi.max(fj);
                let sj = self.start[j];
                let (head, tail) = self.values.split_at_mut(si);
                let lj = &head[sj + (k0 - fj)..sj + (j - fj)];
                let li = &tail[k0 - fi..j - fi];
                let dot: f64 = li.iter().zip(lj).map(|(a, b)| a * b).sum();
                let ljj = head[sj + (j - fj)];
                tail[j - fi] = (tail[j - fi] - dot) / ljj;
            }
            let row = &mut self.values[si..self.start[i + 1]];
            let (off, diag) = row.split_at_mut(i - fi);
            let d = diag[0] - off.iter().map(|v| v * v).sum::<f64>();
            if !(d > 0.0 && d.is_finite()) {
                return Err(Error::FactorizationFailure(format!(
                    "matrix is not positive definite (pivot {d:e} at row {i})"
                )));
            }
            diag[0] = d.sqrt();
        }
        Ok(())
    }

    /// Solves `L Lᵀ x = b` in place.
    fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.first.len();
        for i in 0..n {
            let fi = self.first[i];
            let row = self.row(i);
            let dot: f64 = row[..i - fi]
                .iter()
                .zip(&b[fi..i])
                .map(|(l, y)| l * y)
                .sum();
            b[i] = (b[i] - dot) / row[i - fi];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let row = self.row(i);
            b[i] /= row[i - fi];
            let xi = b[i];
            for (y, l) in b[fi..i].iter_mut().zip(&row[..i - fi]) {
                *y -= l * xi;
            }
        }
    }
}

/// Reusable solver for one fixed symmetric sparsity pattern: reverse
/// Cuthill–McKee ordering followed by a profile Cholesky factorization.
pub struct DampedNormalSolver {
    n: usize,
    offsets: Vec<usize>,
    indices: Vec<usize>,
    perm: Vec<usize>,
    /// CSR slot (with diagonal) -> envelope slot, `None` above the diagonal
    dest: Vec<Option<usize>>,
    /// envelope slot of each permuted diagonal entry
    diag_dest: Vec<usize>,
    envelope: Envelope,
}

impl DampedNormalSolver {
    /// Prepares the ordering and profile for `a`'s pattern plus the diagonal.
    pub fn new(a: &CsrMatrix<f64>) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::FactorizationFailure(format!(
                "matrix is {}x{}, expected square",
                a.nrows(),
                a.ncols()
            )));
        }
        let n = a.nrows();
        let (offsets, indices) = with_diagonal(a);
        let pattern =
            SparsityPattern::try_from_offsets_and_indices(n, n, offsets.clone(), indices.clone())
                .map_err(|e| Error::FactorizationFailure(e.to_string()))?;
        let perm = reverse_cuthill_mckee(&pattern);
        let mut inv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }

        let mut first: Vec<usize> = (0..n).collect();
        for i in 0..n {
            for &j in &indices[offsets[i]..offsets[i + 1]] {
                let (pi, pj) = (inv[i], inv[j]);
                let (hi, lo) = if pi >= pj { (pi, pj) } else { (pj, pi) };
                first[hi] = first[hi].min(lo);
            }
        }
        let mut start = Vec::with_capacity(n + 1);
        start.push(0);
        for (i, &fi) in first.iter().enumerate() {
            start.push(start[i] + i - fi + 1);
        }
        let mut dest = Vec::with_capacity(indices.len());
        for i in 0..n {
            for &j in &indices[offsets[i]..offsets[i + 1]] {
                let (pi, pj) = (inv[i], inv[j]);
                dest.push((pj <= pi).then(|| start[pi] + pj - first[pi]));
            }
        }
        let diag_dest = (0..n).map(|i| start[i] + i - first[i]).collect();
        let envelope = Envelope {
            values: vec![0.0; start[n]],
            first,
            start,
        };
        Ok(Self {
            n,
            offsets,
            indices,
            perm,
            dest,
            diag_dest,
            envelope,
        })
    }

    /// True if `a` has the pattern this solver was built for.
    pub fn matches(&self, a: &CsrMatrix<f64>) -> bool {
        if a.nrows() != self.n {
            return false;
        }
        let (o, i) = with_diagonal(a);
        o == self.offsets && i == self.indices
    }

    /// Stored entries of the factor.
    pub fn profile_size(&self) -> usize {
        self.envelope.values.len()
    }

    fn load(&mut self, a: &CsrMatrix<f64>, mu: f64) {
        let env = &mut self.envelope.values;
        env.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..self.n {
            let row = a.row(i);
            let mut slot = self.offsets[i];
            for (&j, &v) in row.col_indices().iter().zip(row.values()) {
                while self.indices[slot] != j {
                    slot += 1;
                }
                if let Some(d) = self.dest[slot] {
                    env[d] += v;
                }
            }
        }
        for &d in &self.diag_dest {
            env[d] += mu;
        }
    }

    fn permuted_solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        let mut b: Vec<f64> = self.perm.iter().map(|&old| rhs[old]).collect();
        self.envelope.solve_in_place(&mut b);
        let mut x = DVector::zeros(self.n);
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = b[new];
        }
        x
    }

    /// Solves `(A + μI) h = −g`.
    pub fn solve(&mut self, a: &CsrMatrix<f64>, mu: f64, g: &DVector<f64>) -> Result<DVector<f64>> {
        if mu < 0.0 || !mu.is_finite() {
            return Err(Error::FactorizationFailure(format!("invalid damping {mu}")));
        }
        if g.len() != self.n {
            return Err(Error::FactorizationFailure("rhs length mismatch".into()));
        }
        self.load(a, mu);
        self.envelope.factor()?;

        let neg_g = -g;
        let mut h = self.permuted_solve(&neg_g);
        let gnorm = g.norm();
        if gnorm == 0.0 {
            return Ok(h);
        }
        let mut rel = f64::INFINITY;
        for _ in 0..=REFINEMENT_STEPS {
            let resid = &neg_g - (csr_mul_vec(a, &h) + &h * mu);
            rel = resid.norm() / gnorm;
            if !rel.is_finite() {
                return Err(Error::FactorizationFailure("non-finite solution".into()));
            }
            if rel < SOLVE_TOL {
                return Ok(h);
            }
            h += self.permuted_solve(&resid);
        }
        Err(Error::FactorizationFailure(format!(
            "relative residual {rel:e} above {SOLVE_TOL:e}"
        )))
    }
}

fn with_diagonal(a: &CsrMatrix<f64>) -> (Vec<usize>, Vec<usize>) {
    let n = a.nrows();
    let mut offsets = Vec::with_capacity(n + 1);
    let mut indices = Vec::with_capacity(a.nnz() + n);
    offsets.push(0);
    for i in 0..n {
        let row = a.row(i);
        let mut placed = false;
        for &j in row.col_indices() {
            if !placed && j >= i {
                if j != i {
                    indices.push(i);
                }
                placed = true;
            }
            indices.push(j);
        }
        if !placed {
            indices.push(i);
        }
        offsets.push(indices.len());
    }
    (offsets, indices)
}

/// One-shot solve of `(A + μI) h = −g`.
pub fn solve_damped_normal_equations(
    a: &CsrMatrix<f64>,
    mu: f64,
    g: &DVector<f64>,
) -> Result<DVector<f64>> {
    DampedNormalSolver::new(a)?.solve(a, mu, g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use nalgebra_sparse::CooMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn identity(n: usize) -> CsrMatrix<f64> {
        CsrMatrix::identity(n)
    }

    #[test]
    fn identity_system() {
        let g = DVector::from_element(5, 1.0);
        let h = solve_damped_normal_equations(&identity(5), 0.0, &g).unwrap();
        assert!((h + &g).norm() < 1e-15);
    }

    #[test]
    fn pure_damping() {
        let zero = CsrMatrix::<f64>::zeros(4, 4);
        let g = DVector::from_vec(vec![1.0, -2.0, 3.0, 0.5]);
        let h = solve_damped_normal_equations(&zero, 2.0, &g).unwrap();
        assert!((h + &g / 2.0).norm() < 1e-15);
    }

    #[test]
    fn indefinite_matrix_fails() {
        let mut coo = CooMatrix::new(2, 2);
        coo.push(0, 0, -1.0);
        coo.push(1, 1, 1.0);
        let a = CsrMatrix::from(&coo);
        let g = DVector::from_vec(vec![1.0, 1.0]);
        assert!(matches!(
            solve_damped_normal_equations(&a, 0.0, &g),
            Err(Error::FactorizationFailure(_))
        ));
    }

    #[test]
    fn random_sparse_spd_matches_dense() {
        let n = 300;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        // B has ~4 entries per row; A = Bᵀ B + 0.1 I is SPD and sparse
        let mut coo = CooMatrix::new(n, n);
        for i in 0..n {
            coo.push(i, i, rng.random_range(0.5..2.0));
            for _ in 0..3 {
                let j = rng.random_range(0..n);
                coo.push(i, j, rng.random_range(-1.0..1.0));
            }
        }
        let b = CsrMatrix::from(&coo);
        let a = &b.transpose() * &b;
        let g = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let mu = 0.1;
        let h = solve_damped_normal_equations(&a, mu, &g).unwrap();

        let mut dense = DMatrix::zeros(n, n);
        for (i, j, v) in a.triplet_iter() {
            dense[(i, j)] += *v;
        }
        for i in 0..n {
            dense[(i, i)] += mu;
        }
        let oracle = dense.cholesky().unwrap().solve(&(-&g));
        let diff = (&h - &oracle).amax();
        assert!(diff < 1e-9, "max abs diff {diff:e}");
    }

    #[test]
    fn rcm_is_a_permutation_and_reduces_bandwidth() {
        // path graph numbered badly: 0-5-1-4-2-3
        let n = 6;
        let chain = [0, 5, 1, 4, 2, 3];
        let mut coo = CooMatrix::new(n, n);
        for i in 0..n {
            coo.push(i, i, 1.0);
        }
        for w in chain.windows(2) {
            coo.push(w[0], w[1], 1.0);
            coo.push(w[1], w[0], 1.0);
        }
        let a = CsrMatrix::from(&coo);
        let perm = reverse_cuthill_mckee(a.pattern());
        let mut sorted = perm.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..n).collect::<Vec<_>>());
        let mut inv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let bw = chain
            .windows(2)
            .map(|w| inv[w[0]].abs_diff(inv[w[1]]))
            .max()
            .unwrap();
        assert_eq!(bw, 1);
    }

    #[test]
    fn normal_equations_match_sparse_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut coo = CooMatrix::new(40, 25);
        // groups of 4 rows sharing a column set, plus single rows
        for g in 0..8 {
            let cols: Vec<usize> = (0..5).map(|_| rng.random_range(0..25)).collect();
            let mut cols = cols;
            cols.sort_unstable();
            cols.dedup();
            for r in 0..4 {
                for &c in &cols {
                    coo.push(4 * g + r, c, rng.random_range(-1.0..1.0));
                }
            }
        }
        for r in 32..40 {
            coo.push(r, rng.random_range(0..25), 1.0);
        }
        let j = CsrMatrix::from(&coo);
        let f = DVector::from_fn(40, |_, _| rng.random_range(-1.0..1.0));
        let ne = NormalEquations::new(&j).unwrap();
        assert!(ne.matches(&j));
        let (a, g) = ne.assemble(&j, &f);
        let oracle = &j.transpose() * &j;
        let dense = |m: &CsrMatrix<f64>| {
            let mut d = DMatrix::<f64>::zeros(m.nrows(), m.ncols());
            for (i, k, v) in m.triplet_iter() {
                d[(i, k)] += *v;
            }
            d
        };
        assert!((dense(&a) - dense(&oracle)).amax() < 1e-12);
        let jd = dense(&j);
        assert!((g - jd.transpose() * &f).amax() < 1e-12);
    }

    #[test]
    fn solver_reuse_across_damping() {
        let mut coo = CooMatrix::new(3, 3);
        coo.push(0, 0, 2.0);
        coo.push(0, 1, 1.0);
        coo.push(1, 0, 1.0);
        coo.push(1, 1, 2.0);
        // row 2 has no diagonal entry: damping alone keeps it solvable
        let a = CsrMatrix::from(&coo);
        let mut s = DampedNormalSolver::new(&a).unwrap();
        assert!(s.matches(&a));
        let g = DVector::from_vec(vec![1.0, 1.0, 1.0]);
        for mu in [1e-3, 1.0, 10.0] {
            let h = s.solve(&a, mu, &g).unwrap();
            let r = csr_mul_vec(&a, &h) + &h * mu + &g;
            assert!(r.norm() < 1e-12);
        }
    }
}
