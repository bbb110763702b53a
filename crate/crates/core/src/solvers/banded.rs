//! Banded complex linear systems with constant symmetric off-diagonals,
//! optionally closed periodically.
//!
//! The matrices met here have a positive definite Hermitian part, so LU
//! without pivoting is stable. Periodic corners are handled with the
//! Woodbury identity on top of the banded factorization.

use num_complex::Complex64;

use crate::error::{Error, Result};

struct BandLu {
    n: usize,
    p: usize,
    /// Row-major band storage; `a[i * w + (j + p - i)]` holds entry `(i, j)`.
    a: Vec<Complex64>,
}

impl BandLu {
    fn factor(diag: &[Complex64], off: &[Complex64]) -> Result<Self> {
        let n = diag.len();
        let p = off.len();
        let w = 2 * p + 1;
        let mut a = vec![Complex64::new(0.0, 0.0); n * w];
        for i in 0..n {
            a[i * w + p] = diag[i];
            for (d, v) in off.iter().enumerate() {
                let d = d + 1;
                if i >= d {
                    a[i * w + p - d] = *v;
                }
                if i + d < n {
                    a[i * w + p + d] = *v;
                }
            }
        }
        for k in 0..n {
            let pivot = a[k * w + p];
            if pivot.norm() < 1e-300 {
                return Err(Error::InvalidArgument(format!("singular band matrix at row {k}")));
            }
            for i in k + 1..(k + p + 1).min(n) {
                let l = a[i * w + (k + p - i)] / pivot;
                a[i * w + (k + p - i)] = l;
                for j in k + 1..(k + p + 1).min(n) {
                    let u = a[k * w + (j + p - k)];
                    a[i * w + (j + p - i)] -= l * u;
                }
            }
        }
        Ok(Self { n, p, a })
    }

    fn solve_in_place(&self, x: &mut [Complex64]) {
        let (n, p, w) = (self.n, self.p, 2 * self.p + 1);
        for i in 0..n {
            let mut acc = x[i];
            for k in i.saturating_sub(p)..i {
                acc -= self.a[i * w + (k + p - i)] * x[k];
            }
            x[i] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = x[i];
            for j in i + 1..(i + p + 1).min(n) {
                acc -= self.a[i * w + (j + p - i)] * x[j];
            }
            x[i] = acc / self.a[i * w + p];
        }
    }
}

struct Corners {
    /// Rows carrying wrap-around entries, with those entries as `(column, value)`.
    rows: Vec<(usize, Vec<(usize, Complex64)>)>,
    /// `B⁻¹ e_r` for each corner row `r`.
    z: Vec<Vec<Complex64>>,
    /// LU factors of the capacitance matrix `I + Vᵀ Z`, with row permutation.
    cap: Vec<Vec<Complex64>>,
    perm: Vec<usize>,
}

pub(crate) struct BandedSystem {
    lu: BandLu,
    corners: Option<Corners>,
}

impl BandedSystem {
    /// Matrix with diagonal `diag` and off-diagonal `off[d-1]` at distance
    /// `d` on both sides; wrapped around when `periodic`.
    pub(crate) fn new(diag: &[Complex64], off: &[Complex64], periodic: bool) -> Result<Self> {
        let n = diag.len();
        let p = off.len();
        if n < 2 * p + 1 {
            return Err(Error::InvalidGrid(format!("{n} points is too few for bandwidth {p}")));
        }
        let lu = BandLu::factor(diag, off)?;
        let corners = if periodic { Some(Self::corners(&lu, off)?) } else { None };
        Ok(Self { lu, corners })
    }

    fn corners(lu: &BandLu, off: &[Complex64]) -> Result<Corners> {
        let n = lu.n;
        let p = off.len();
        let mut rows = Vec::new();
        for i in 0..p {
            let entries: Vec<(usize, Complex64)> = (i + 1..=p).map(|d| (i + n - d, off[d - 1])).collect();
            rows.push((i, entries));
        }
        for i in n - p..n {
            let entries = (n - i..=p).map(|d| (i + d - n, off[d - 1])).collect();
            rows.push((i, entries));
        }
        let z: Vec<Vec<Complex64>> = rows
            .iter()
            .map(|(r, _)| {
                let mut e = vec![Complex64::new(0.0, 0.0); n];
                e[*r] = Complex64::new(1.0, 0.0);
                lu.solve_in_place(&mut e);
                e
            })
            .collect();
        let m = rows.len();
        let mut cap = vec![vec![Complex64::new(0.0, 0.0); m]; m];
        for (a, (_, entries)) in rows.iter().enumerate() {
            for (b, zb) in z.iter().enumerate() {
                let dot: Complex64 = entries.iter().map(|(j, v)| v * zb[*j]).sum();
                cap[a][b] = dot + if a == b { 1.0 } else { 0.0 };
            }
        }
        let mut perm: Vec<usize> = (0..m).collect();
        for k in 0..m {
            let pivot_row = (k..m)
                .max_by(|x, y| cap[*x][k].norm().total_cmp(&cap[*y][k].norm()))
                .unwrap_or(k);
            cap.swap(k, pivot_row);
            perm.swap(k, pivot_row);
            if cap[k][k].norm() < 1e-300 {
                return Err(Error::InvalidArgument("singular periodic system".into()));
            }
            for i in k + 1..m {
                let l = cap[i][k] / cap[k][k];
                cap[i][k] = l;
                for j in k + 1..m {
                    let u = cap[k][j];
                    cap[i][j] -= l * u;
                }
            }
        }
        Ok(Corners { rows, z, cap, perm })
    }

    pub(crate) fn solve_in_place(&self, x: &mut [Complex64]) {
        self.lu.solve_in_place(x);
        let Some(c) = &self.corners else { return };
        let m = c.rows.len();
        let rhs: Vec<Complex64> = c
            .rows
            .iter()
            .map(|(_, entries)| entries.iter().map(|(j, v)| v * x[*j]).sum())
            .collect();
        let mut s: Vec<Complex64> = c.perm.iter().map(|&i| rhs[i]).collect();
        for i in 0..m {
            for k in 0..i {
                let l = c.cap[i][k];
                s[i] = s[i] - l * s[k];
            }
        }
        for i in (0..m).rev() {
            for j in i + 1..m {
                let u = c.cap[i][j];
                s[i] = s[i] - u * s[j];
            }
            s[i] /= c.cap[i][i];
        }
        for (zb, sb) in c.z.iter().zip(&s) {
            for (xi, zi) in x.iter_mut().zip(zb) {
                *xi -= zi * sb;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense(diag: &[Complex64], off: &[Complex64], periodic: bool) -> Vec<Vec<Complex64>> {
        let n = diag.len();
        let mut a = vec![vec![Complex64::new(0.0, 0.0); n]; n];
        for i in 0..n {
            a[i][i] = diag[i];
            for (d, v) in off.iter().enumerate() {
                let d = d + 1;
                for j in [i as isize - d as isize, (i + d) as isize] {
                    if (0..n as isize).contains(&j) {
                        a[i][j as usize] += v;
                    } else if periodic {
                        a[i][j.rem_euclid(n as isize) as usize] += v;
                    }
                }
            }
        }
        a
    }

    fn check(periodic: bool, p: usize) {
        let n = 11;
        let diag: Vec<Complex64> = (0..n).map(|i| Complex64::new(3.0 + 0.1 * i as f64, 0.5 - 0.05 * i as f64)).collect();
        let off: Vec<Complex64> = (0..p).map(|d| Complex64::new(0.0, -0.4 / (d + 1) as f64)).collect();
        let sys = BandedSystem::new(&diag, &off, periodic).unwrap();
        let b: Vec<Complex64> = (0..n).map(|i| Complex64::new((i as f64).sin(), (i as f64 * 0.3).cos())).collect();
        let mut x = b.clone();
        sys.solve_in_place(&mut x);
        let a = dense(&diag, &off, periodic);
        for i in 0..n {
            let ax: Complex64 = (0..n).map(|j| a[i][j] * x[j]).sum();
            assert!((ax - b[i]).norm() < 1e-12, "periodic={periodic} p={p} row {i}");
        }
    }

    #[test]
    fn solves_open_and_periodic_bands() {
        for p in [1, 2] {
            check(false, p);
            check(true, p);
        }
    }
}
