//! Dense helpers for the small symmetric systems of the sparse search.

pub(crate) struct Cholesky {
    k: usize,
    l: Vec<f64>,
}

impl Cholesky {
    /// `None` unless `g` is numerically positive definite.
    pub(crate) fn new(g: &[f64], k: usize) -> Option<Self> {
        let mut l = vec![0.0; k * k];
        let diag_max = (0..k).map(|i| g[i * k + i]).fold(0.0, f64::max);
        for i in 0..k {
            for j in 0..=i {
                let mut s = g[i * k + j];
                for p in 0..j {
                    s -= l[i * k + p] * l[j * k + p];
                }
                if i == j {
                    if s <= 1e-12 * diag_max.max(f64::MIN_POSITIVE) {
                        return None;
                    }
                    l[i * k + i] = s.sqrt();
                } else {
                    l[i * k + j] = s / l[j * k + j];
                }
            }
        }
        Some(Cholesky { k, l })
    }

    pub(crate) fn solve(&self, b: &[f64]) -> Vec<f64> {
        let k = self.k;
        let mut z = b.to_vec();
        for i in 0..k {
            for p in 0..i {
                z[i] -= self.l[i * k + p] * z[p];
            }
            z[i] /= self.l[i * k + i];
        }
        for i in (0..k).rev() {
            for p in i + 1..k {
                z[i] -= self.l[p * k + i] * z[p];
            }
            z[i] /= self.l[i * k + i];
        }
        z
    }

    pub(crate) fn inverse(&self) -> Vec<f64> {
        let k = self.k;
        let mut inv = vec![0.0; k * k];
        for c in 0..k {
            let mut e = vec![0.0; k];
            e[c] = 1.0;
            for (r, v) in self.solve(&e).into_iter().enumerate() {
                inv[r * k + c] = v;
            }
        }
        inv
    }
}

/// For each `i`, the inverse of the leading `(i+1)`-block of `h = G^-1`,
/// which is the quadratic form of `G` minimized over coordinates past `i`.
pub(crate) fn leading_schur_complements(h: &[f64], k: usize) -> Vec<Vec<f64>> {
    (0..k)
        .map(|i| {
            let dim = i + 1;
            let mut block = vec![0.0; dim * dim];
            for r in 0..dim {
                for c in 0..dim {
                    block[r * dim + c] = h[r * k + c];
                }
            }
            match Cholesky::new(&block, dim) {
                Some(ch) => ch.inverse(),
                None => vec![0.0; dim * dim],
            }
        })
        .collect()
}
