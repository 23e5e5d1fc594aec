//! Integer solutions of sparse linear systems `D z = b`, where `D` is a
//! boundary matrix. Columns are reduced by unimodular column operations
//! until their lowest nonzero rows are distinct; the operations are
//! recorded so solutions can be mapped back to the original basis.

use num_integer::Integer;

type SparseCol = Vec<(usize, i64)>;

fn axpy(a: &SparseCol, k: i64, b: &SparseCol, l: i64) -> SparseCol {
    // k*a + l*b
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        let (r, v) = if j >= b.len() || (i < a.len() && a[i].0 < b[j].0) {
            i += 1;
            (a[i - 1].0, k * a[i - 1].1)
        } else if i >= a.len() || b[j].0 < a[i].0 {
            j += 1;
            (b[j - 1].0, l * b[j - 1].1)
        } else {
            i += 1;
            j += 1;
            (a[i - 1].0, k * a[i - 1].1 + l * b[j - 1].1)
        };
        if v != 0 {
            out.push((r, v));
        }
    }
    out
}

fn low(c: &SparseCol) -> Option<(usize, i64)> {
    c.last().copied()
}

/// A reduced boundary matrix ready for repeated solves.
#[derive(Clone, Debug)]
pub struct Reduced {
    cols: Vec<SparseCol>,
    transform: Vec<SparseCol>,
    pivot_of_row: std::collections::HashMap<usize, usize>,
}

impl Reduced {
    /// Reduces the matrix given by its sparse columns (row indices sorted).
    pub fn new(columns: Vec<SparseCol>) -> Self {
        let m = columns.len();
        let mut cols = columns;
        let mut transform: Vec<SparseCol> = (0..m).map(|j| vec![(j, 1)]).collect();
        let mut pivot_of_row = std::collections::HashMap::new();
        for j in 0..m {
            while let Some((r, v)) = low(&cols[j]) {
                let Some(&i) = pivot_of_row.get(&r) else {
                    pivot_of_row.insert(r, j);
                    break;
                };
                let p = low(&cols[i]).unwrap().1;
                if v % p == 0 {
                    let q = v / p;
                    cols[j] = axpy(&cols[j], 1, &cols[i], -q);
                    transform[j] = axpy(&transform[j], 1, &transform[i], -q);
                } else {
                    let e = p.extended_gcd(&v);
                    let (g, s, t) = (e.gcd, e.x, e.y);
                    let new_i = axpy(&cols[i], s, &cols[j], t);
                    let new_j = axpy(&cols[j], p / g, &cols[i], -(v / g));
                    let ti = axpy(&transform[i], s, &transform[j], t);
                    let tj = axpy(&transform[j], p / g, &transform[i], -(v / g));
                    cols[i] = new_i;
                    cols[j] = new_j;
                    transform[i] = ti;
                    transform[j] = tj;
                }
            }
        }
        Reduced {
            cols,
            transform,
            pivot_of_row,
        }
    }

    /// An integer solution of `D z = b`, or `None` if there is none.
    pub fn solve(&self, b: &[(usize, i64)]) -> Option<Vec<(usize, i64)>> {
        let mut b: SparseCol = b.to_vec();
        b.sort_unstable();
        let mut y: Vec<(usize, i64)> = Vec::new();
        while let Some((r, v)) = low(&b) {
            let &i = self.pivot_of_row.get(&r)?;
            let p = low(&self.cols[i]).unwrap().1;
            if v % p != 0 {
                return None;
            }
            let q = v / p;
            b = axpy(&b, 1, &self.cols[i], -q);
            y.push((i, q));
        }
        let mut z: SparseCol = Vec::new();
        for (i, q) in y {
            z = axpy(&z, 1, &self.transform[i], q);
        }
        Some(z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_triangle_boundary() {
        // vertices 0,1,2; edges e0=01, e1=12, e2=02; D maps edges to vertices
        let d = Reduced::new(vec![
            vec![(0, -1), (1, 1)],
            vec![(1, -1), (2, 1)],
            vec![(0, -1), (2, 1)],
        ]);
        let z = d.solve(&[(0, -1), (2, 1)]).unwrap();
        let mut acc = vec![0i64; 3];
        let cols = [
            vec![(0, -1), (1, 1)],
            vec![(1, -1), (2, 1)],
            vec![(0, -1), (2, 1)],
        ];
        for (j, c) in z {
            for &(r, v) in &cols[j] {
                acc[r] += c * v;
            }
        }
        assert_eq!(acc, vec![-1, 0, 1]);
        assert!(d.solve(&[(0, 1)]).is_none());
    }

    #[test]
    fn handles_non_unit_pivots() {
        let d = Reduced::new(vec![vec![(0, 2)], vec![(0, 3)]]);
        let z = d.solve(&[(0, 1)]).unwrap();
        let s: i64 = z.iter().map(|&(j, c)| c * [2, 3][j]).sum();
        assert_eq!(s, 1);
        let e = Reduced::new(vec![vec![(0, 2)]]);
        assert!(e.solve(&[(0, 1)]).is_none());
    }
}
