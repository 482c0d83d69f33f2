//! Symmetric tridiagonal matrices with an optional corner coupling
//! (cyclic tridiagonal), as produced by three-point operators on open and
//! periodic profiles.

use crate::error::{Error, Result};

/// Symmetric matrix with diagonal `d`, off-diagonal `e` (`e[i]` couples `i`
/// and `i + 1`) and an optional `corner` coupling `0` and `len - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTridiag {
    pub d: Vec<f64>,
    pub e: Vec<f64>,
    pub corner: Option<f64>,
}

const TINY: f64 = 1e-300;

fn guard(q: f64) -> f64 {
    if q == 0.0 {
        TINY
    } else {
        q
    }
}

impl SymTridiag {
    pub fn len(&self) -> usize {
        self.d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d.is_empty()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let m = self.len();
        let mut y: Vec<f64> = (0..m).map(|i| self.d[i] * x[i]).collect();
        for i in 0..m.saturating_sub(1) {
            y[i] += self.e[i] * x[i + 1];
            y[i + 1] += self.e[i] * x[i];
        }
        if let Some(c) = self.corner {
            y[0] += c * x[m - 1];
            y[m - 1] += c * x[0];
        }
        y
    }

    /// Gershgorin interval containing the spectrum.
    pub fn gershgorin(&self) -> (f64, f64) {
        let m = self.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..m {
            let mut rad = 0.0;
            if i > 0 {
                rad += self.e[i - 1].abs();
            }
            if i + 1 < m {
                rad += self.e[i].abs();
            }
            if let Some(c) = self.corner {
                if i == 0 || i + 1 == m {
                    rad += c.abs();
                }
            }
            lo = lo.min(self.d[i] - rad);
            hi = hi.max(self.d[i] + rad);
        }
        (lo, hi)
    }

    /// Pivots of the LDL^T factorization of the leading `k` rows of
    /// `self - sigma I` (tridiagonal part only).
    fn pivots(&self, sigma: f64, k: usize) -> Vec<f64> {
        let mut q = Vec::with_capacity(k);
        for i in 0..k {
            let v = if i == 0 { self.d[0] - sigma } else { self.d[i] - sigma - self.e[i - 1] * self.e[i - 1] / q[i - 1] };
            q.push(guard(v));
        }
        q
    }

    /// Number of eigenvalues strictly below `sigma` (Sylvester inertia).
    pub fn count_below(&self, sigma: f64) -> usize {
        let m = self.len();
        match self.corner {
            None => self.pivots(sigma, m).iter().filter(|q| **q < 0.0).count(),
            Some(c) => {
                // bordered form: leading (m-1) block plus Schur complement of the last row
                let k = m - 1;
                let q = self.pivots(sigma, k);
                let mut count = q.iter().filter(|v| **v < 0.0).count();
                let mut v = vec![0.0; k];
                v[0] += c;
                v[k - 1] += self.e[k - 1];
                // solve T' y = v with the LDL^T factors
                let mut z = v.clone();
                for i in 1..k {
                    z[i] -= self.e[i - 1] / q[i - 1] * z[i - 1];
                }
                let mut y = vec![0.0; k];
                y[k - 1] = z[k - 1] / q[k - 1];
                for i in (0..k - 1).rev() {
                    y[i] = (z[i] - self.e[i] * y[i + 1]) / q[i];
                }
                let schur = self.d[m - 1] - sigma - v.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>();
                if schur < 0.0 {
                    count += 1;
                }
                count
            }
        }
    }

    /// Solves `(self - sigma I) x = b`.
    pub fn solve_shifted(&self, sigma: f64, b: &[f64]) -> Result<Vec<f64>> {
        let m = self.len();
        if b.len() != m {
            return Err(Error::validation(format!("right-hand side has length {}, expected {m}", b.len())));
        }
        let x = match self.corner {
            None => thomas(&self.d, &self.e, sigma, b),
            Some(c) => {
                // Sherman-Morrison: A = T + u v^T with u = (g, 0.., c), v = (1, 0.., c/g)
                let g = -(self.d[0] - sigma);
                let g = if g == 0.0 { 1.0 } else { g };
                let mut dd: Vec<f64> = self.d.clone();
                dd[0] -= g;
                dd[m - 1] -= c * c / g;
                let y = thomas(&dd, &self.e, sigma, b);
                let mut u = vec![0.0; m];
                u[0] = g;
                u[m - 1] = c;
                let z = thomas(&dd, &self.e, sigma, &u);
                let vy = y[0] + c / g * y[m - 1];
                let vz = z[0] + c / g * z[m - 1];
                let f = vy / guard(1.0 + vz);
                y.iter().zip(&z).map(|(a, b)| a - f * b).collect()
            }
        };
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::numerical("tridiagonal solve produced non-finite values"));
        }
        Ok(x)
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        self.solve_shifted(0.0, b)
    }

    /// The `k` smallest eigenpairs (ascending), by Sturm bisection and
    /// inverse iteration. Eigenvectors have unit Euclidean norm.
    pub fn lowest_eigenpairs(&self, k: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        let m = self.len();
        if k > m {
            return Err(Error::validation(format!("requested {k} eigenpairs of a {m}x{m} matrix")));
        }
        let (glo, ghi) = self.gershgorin();
        let scale = glo.abs().max(ghi.abs()).max(1.0);
        let mut values = Vec::with_capacity(k);
        for j in 0..k {
            // smallest sigma with count_below(sigma) > j
            let (mut lo, mut hi) = (glo - 1e-12 * scale, ghi + 1e-12 * scale);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi || hi - lo <= 2.0 * f64::EPSILON * scale {
                    break;
                }
                if self.count_below(mid) > j {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            values.push(0.5 * (lo + hi));
        }
        let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(k);
        for j in 0..k {
            let lam = values[j];
            let shift = lam - 1e-10 * scale;
            let mut x: Vec<f64> = (0..m).map(|i| 1.0 + 0.1 * ((i * 7919 + j * 104729) % 1000) as f64 / 1000.0).collect();
            let mut hits = 0;
            for _ in 0..12 {
                x = self.solve_shifted(shift, &x)?;
                // exact eigenvectors are orthogonal; this also splits clusters
                for _ in 0..2 {
                    for v in &vectors {
                        let p: f64 = v.iter().zip(&x).map(|(a, b)| a * b).sum();
                        x.iter_mut().zip(v).for_each(|(a, b)| *a -= p * b);
                    }
                }
                let nx = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                if !(nx > 0.0 && nx.is_finite()) {
                    return Err(Error::numerical(format!("inverse iteration broke down for eigenvalue {j}")));
                }
                x.iter_mut().for_each(|v| *v /= nx);
                let ax = self.matvec(&x);
                let res = ax.iter().zip(&x).map(|(a, b)| (a - lam * b).powi(2)).sum::<f64>().sqrt();
                if res <= 1e-9 * scale {
                    hits += 1;
                    if hits == 2 {
                        break;
                    }
                }
            }
            if hits == 0 {
                return Err(Error::numerical(format!(
                    "inverse iteration did not converge for eigenvalue {j} (lambda = {lam:.6e})"
                )));
            }
            vectors.push(x);
        }
        // Rayleigh quotients are more accurate than the bisection midpoints
        for (j, v) in vectors.iter().enumerate() {
            let av = self.matvec(v);
            values[j] = av.iter().zip(v).map(|(a, b)| a * b).sum();
        }
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let values = order.iter().map(|&j| values[j]).collect();
        let vectors = order.iter().map(|&j| vectors[j].clone()).collect();
        Ok((values, vectors))
    }
}

/// Thomas algorithm for the tridiagonal system `(T - sigma I) x = b`.
fn thomas(d: &[f64], e: &[f64], sigma: f64, b: &[f64]) -> Vec<f64> {
    let m = d.len();
    let mut c = vec![0.0; m];
    let mut y = vec![0.0; m];
    let mut piv = guard(d[0] - sigma);
    c[0] = if m > 1 { e[0] / piv } else { 0.0 };
    y[0] = b[0] / piv;
    for i in 1..m {
        piv = guard(d[i] - sigma - e[i - 1] * c[i - 1]);
        c[i] = if i + 1 < m { e[i] / piv } else { 0.0 };
        y[i] = (b[i] - e[i - 1] * y[i - 1]) / piv;
    }
    for i in (0..m - 1).rev() {
        y[i] -= c[i] * y[i + 1];
    }
    y
}
