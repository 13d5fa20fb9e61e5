//! Hadamard matrix synthesis.
//!
//! Orders are produced by, in order of preference: Sylvester doubling for
//! powers of two, Paley I (`q + 1` with `q ≡ 3 mod 4`), Paley II
//! (`2(q + 1)` with `q ≡ 1 mod 4`), and doubling of any smaller constructible
//! order. `q` ranges over odd prime powers, so the quadratic character is
//! computed in GF(q) rather than modulo `q`. Results are normalized so the
//! first row and first column are all `+1`.

use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, C64};

/// `±1` Hadamard matrix of the given order, normalized.
pub fn hadamard(order: usize) -> Result<ComplexMatrix> {
    let signs = hadamard_signs(order)?;
    Ok(ComplexMatrix::from_fn(order, order, |i, j| {
        C64::new(f64::from(signs[i][j]), 0.0)
    }))
}

/// True if some implemented construction yields this order.
pub fn is_constructible(order: usize) -> bool {
    construct(order).is_some()
}

/// Smallest constructible order in `[min_order, max_order]`.
pub fn smallest_constructible_order(min_order: usize, max_order: usize) -> Option<usize> {
    (min_order.max(1)..=max_order).find(|&l| is_constructible(l))
}

pub fn hadamard_signs(order: usize) -> Result<Vec<Vec<i8>>> {
    let mut h = construct(order).ok_or(Error::UnknownOrder(order))?;
    normalize(&mut h);
    Ok(h)
}

fn construct(order: usize) -> Option<Vec<Vec<i8>>> {
    match order {
        0 => None,
        1 => Some(vec![vec![1]]),
        2 => Some(vec![vec![1, 1], vec![1, -1]]),
        _ if !order.is_multiple_of(4) => None,
        _ if order.is_power_of_two() => construct(order / 2).map(|h| double(&h)),
        _ => {
            if let Some(field) = prime_power(order - 1).filter(|&(p, k)| p.pow(k) % 4 == 3) {
                return Some(paley_one(&GaloisField::new(field.0, field.1)));
            }
            if let Some(field) = prime_power(order / 2 - 1).filter(|&(p, k)| p.pow(k) % 4 == 1) {
                return Some(paley_two(&GaloisField::new(field.0, field.1)));
            }
            construct(order / 2).map(|h| double(&h))
        }
    }
}

fn double(h: &[Vec<i8>]) -> Vec<Vec<i8>> {
    let n = h.len();
    (0..2 * n)
        .map(|i| {
            (0..2 * n)
                .map(|j| {
                    let s = h[i % n][j % n];
                    if i >= n && j >= n {
                        -s
                    } else {
                        s
                    }
                })
                .collect()
        })
        .collect()
}

fn normalize(h: &mut [Vec<i8>]) {
    let first_row = h[0].clone();
    for row in h.iter_mut() {
        for (x, s) in row.iter_mut().zip(&first_row) {
            *x *= s;
        }
    }
    for row in h.iter_mut() {
        let s = row[0];
        for x in row.iter_mut() {
            *x *= s;
        }
    }
}

/// Jacobsthal matrix `Q[a][b] = χ(a − b)` over GF(q).
fn jacobsthal(field: &GaloisField) -> Vec<Vec<i8>> {
    let q = field.order();
    let chi = field.quadratic_character();
    (0..q)
        .map(|a| (0..q).map(|b| chi[field.sub(a, b)]).collect())
        .collect()
}

// H = I + [[0, 1ᵀ], [−1, Q]] with Q skew-symmetric.
fn paley_one(field: &GaloisField) -> Vec<Vec<i8>> {
    let q = field.order();
    let jac = jacobsthal(field);
    let n = q + 1;
    let mut h = vec![vec![0i8; n]; n];
    for i in 0..n {
        for j in 0..n {
            let s = match (i, j) {
                (0, 0) => 0,
                (0, _) => 1,
                (_, 0) => -1,
                _ => jac[i - 1][j - 1],
            };
            h[i][j] = s + i8::from(i == j);
        }
    }
    h
}

// Symmetric conference matrix C = [[0, 1ᵀ], [1, Q]], then
// 0 -> [[1, 1], [1, -1]] and ±1 -> ±[[1, -1], [-1, -1]].
fn paley_two(field: &GaloisField) -> Vec<Vec<i8>> {
    let q = field.order();
    let jac = jacobsthal(field);
    let n = q + 1;
    let conf = |i: usize, j: usize| -> i8 {
        match (i, j) {
            (0, 0) => 0,
            (0, _) | (_, 0) => 1,
            _ => jac[i - 1][j - 1],
        }
    };
    let mut h = vec![vec![0i8; 2 * n]; 2 * n];
    for i in 0..n {
        for j in 0..n {
            let c = conf(i, j);
            let block: [[i8; 2]; 2] = if c == 0 {
                [[1, 1], [1, -1]]
            } else {
                [[c, -c], [-c, -c]]
            };
            for (di, brow) in block.iter().enumerate() {
                for (dj, &v) in brow.iter().enumerate() {
                    h[2 * i + di][2 * j + dj] = v;
                }
            }
        }
    }
    h
}

/// `(p, k)` with `n = p^k`, `p` prime, found by trial division.
pub fn prime_power(n: usize) -> Option<(usize, u32)> {
    if n < 2 {
        return None;
    }
    let p = (2..=n).find(|d| n.is_multiple_of(*d))?;
    let mut rest = n;
    let mut k = 0;
    while rest.is_multiple_of(p) {
        rest /= p;
        k += 1;
    }
    (rest == 1).then_some((p, k))
}

/// GF(p^k) with elements encoded as base-p digit vectors of polynomial
/// coefficients, lowest degree first.
struct GaloisField {
    p: usize,
    k: u32,
    /// Monic irreducible modulus, coefficients lowest degree first.
    modulus: Vec<usize>,
}

impl GaloisField {
    fn new(p: usize, k: u32) -> Self {
        let modulus = if k == 1 {
            vec![0, 1]
        } else {
            find_irreducible(p, k as usize)
        };
        Self { p, k, modulus }
    }

    fn order(&self) -> usize {
        self.p.pow(self.k)
    }

    fn digits(&self, mut a: usize) -> Vec<usize> {
        (0..self.k)
            .map(|_| {
                let d = a % self.p;
                a /= self.p;
                d
            })
            .collect()
    }

    fn encode(&self, digits: &[usize]) -> usize {
        digits.iter().rev().fold(0, |acc, &d| acc * self.p + d)
    }

    fn sub(&self, a: usize, b: usize) -> usize {
        let (da, db) = (self.digits(a), self.digits(b));
        let diff: Vec<usize> = da
            .iter()
            .zip(&db)
            .map(|(x, y)| (x + self.p - y) % self.p)
            .collect();
        self.encode(&diff)
    }

    fn mul(&self, a: usize, b: usize) -> usize {
        let (da, db) = (self.digits(a), self.digits(b));
        let mut prod = vec![0usize; da.len() + db.len()];
        for (i, x) in da.iter().enumerate() {
            for (j, y) in db.iter().enumerate() {
                prod[i + j] = (prod[i + j] + x * y) % self.p;
            }
        }
        self.encode(&poly_rem(&prod, &self.modulus, self.p))
    }

    /// χ(x): 0 at zero, +1 on nonzero squares, −1 otherwise.
    fn quadratic_character(&self) -> Vec<i8> {
        let q = self.order();
        let mut chi = vec![-1i8; q];
        chi[0] = 0;
        for x in 1..q {
            chi[self.mul(x, x)] = 1;
        }
        chi
    }
}

fn trim(mut poly: Vec<usize>) -> Vec<usize> {
    while poly.len() > 1 && *poly.last().unwrap() == 0 {
        poly.pop();
    }
    poly
}

fn mod_inverse(a: usize, p: usize) -> usize {
    (1..p).find(|x| a * x % p == 1).expect("nonzero element of a prime field")
}

/// Remainder of `num` divided by the monic-or-not `den` over GF(p); the
/// result has `deg(den)` coefficients.
fn poly_rem(num: &[usize], den: &[usize], p: usize) -> Vec<usize> {
    let den = trim(den.to_vec());
    let dd = den.len() - 1;
    assert!(dd >= 1, "divisor must have positive degree");
    let lead_inv = mod_inverse(den[dd], p);
    let mut rem = num.to_vec();
    if rem.len() < dd {
        rem.resize(dd, 0);
    }
    for i in (dd..rem.len()).rev() {
        let factor = rem[i] * lead_inv % p;
        if factor == 0 {
            continue;
        }
        for (j, &d) in den.iter().enumerate() {
            let idx = i - dd + j;
            rem[idx] = (rem[idx] + p - factor * d % p) % p;
        }
    }
    rem.truncate(dd);
    rem
}

fn monic_polys(p: usize, degree: usize) -> impl Iterator<Item = Vec<usize>> {
    (0..p.pow(degree as u32)).map(move |mut idx| {
        let mut coeffs: Vec<usize> = (0..degree)
            .map(|_| {
                let d = idx % p;
                idx /= p;
                d
            })
            .collect();
        coeffs.push(1);
        coeffs
    })
}

fn find_irreducible(p: usize, k: usize) -> Vec<usize> {
    monic_polys(p, k)
        .find(|f| {
            (1..=k / 2).all(|d| {
                monic_polys(p, d).all(|g| {
                    let r = poly_rem(f, &g, p);
                    !(r.iter().all(|&c| c == 0))
                })
            })
        })
        .expect("an irreducible polynomial exists for every degree")
}
