//! Independent numerical oracles shared by the integration tests.
//!
//! Matrix elements are recomputed here from scratch by Gauss-Legendre
//! quadrature of spherical-harmonic (linear rotors) and Wigner-d
//! (symmetric tops) integrals; nothing in this module touches the
//! matrix-element code under test.

#![allow(dead_code)]

use std::f64::consts::PI;

/// Gauss-Legendre nodes and weights on [-1, 1]; exact for polynomials of
/// degree ≤ 2n−1.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0_f64, z);
            for k in 2..=n {
                let kk = k as f64;
                let p2 = ((2.0 * kk - 1.0) * z * p1 - (kk - 1.0) * p0) / kk;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p0 = 1.0;
                p1 = z;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Associated Legendre P_l^m(x) for m ≥ 0 (Condon-Shortley phase).
fn assoc_legendre(l: u32, m: u32, x: f64) -> f64 {
    assert!(m <= l);
    let mut pmm = 1.0_f64;
    if m > 0 {
        let somx2 = ((1.0 - x) * (1.0 + x)).sqrt();
        let mut fact = 1.0;
        for _ in 0..m {
            pmm *= -fact * somx2;
            fact += 2.0;
        }
    }
    if l == m {
        return pmm;
    }
    let mut pmmp1 = x * (2.0 * m as f64 + 1.0) * pmm;
    if l == m + 1 {
        return pmmp1;
    }
    let mut pll = 0.0;
    for ll in (m + 2)..=l {
        let llf = ll as f64;
        let mf = m as f64;
        pll = (x * (2.0 * llf - 1.0) * pmmp1 - (llf + mf - 1.0) * pmm) / (llf - mf);
        pmm = pmmp1;
        pmmp1 = pll;
    }
    pll
}

fn factorial(n: i64) -> f64 {
    assert!((0..=20).contains(&n), "factorial out of exact f64 range");
    (1..=n).map(|k| k as f64).product()
}

/// Spherical harmonic Y_lm(θ, φ=0); real with these conventions. Negative m
/// only flips the sign, which cancels in the same-m products used below.
pub fn sph_harm_phi0(l: u32, m: i32, x: f64) -> f64 {
    let ma = m.unsigned_abs();
    let norm = ((2 * l + 1) as f64 / (4.0 * PI) * factorial((l - ma) as i64)
        / factorial((l + ma) as i64))
    .sqrt();
    let p = assoc_legendre(l, ma, x);
    let sign = if m < 0 && ma % 2 == 1 { -1.0 } else { 1.0 };
    sign * norm * p
}

/// Wigner small-d matrix element d^j_{mp,m}(β) by the explicit sum formula.
pub fn wigner_small_d(j: u32, mp: i32, m: i32, beta: f64) -> f64 {
    let jj = j as i64;
    let mp = mp as i64;
    let m = m as i64;
    assert!(mp.abs() <= jj && m.abs() <= jj);
    let cb = (beta / 2.0).cos();
    let sb = (beta / 2.0).sin();
    let pref = (factorial(jj + m) * factorial(jj - m) * factorial(jj + mp) * factorial(jj - mp))
        .sqrt();
    let mut sum = 0.0;
    for s in 0.max(m - mp)..=(jj + m).min(jj - mp) {
        let denom = factorial(jj + m - s)
            * factorial(s)
            * factorial(mp - m + s)
            * factorial(jj - mp - s);
        let sign = if (mp - m + s) % 2 == 0 { 1.0 } else { -1.0 };
        let pc = 2 * jj + m - mp - 2 * s;
        let ps = mp - m + 2 * s;
        sum += sign * cb.powi(pc as i32) * sb.powi(ps as i32) / denom;
    }
    pref * sum
}

/// Quadrature oracle for ⟨j1, m|cosᵖθ|j2, m⟩ on a linear rotor.
pub fn linear_cos_element(j1: u32, j2: u32, m: i32, power: u32) -> f64 {
    let (x, w) = gauss_legendre((j1 + j2 + power + 4) as usize);
    let mut acc = 0.0;
    for (xi, wi) in x.iter().zip(w.iter()) {
        acc += wi
            * sph_harm_phi0(j1, m, *xi)
            * xi.powi(power as i32)
            * sph_harm_phi0(j2, m, *xi);
    }
    2.0 * PI * acc
}

/// Quadrature oracle for ⟨j1, k, m|cosᵖθ|j2, k, m⟩ on a symmetric top:
/// sqrt((2j1+1)(2j2+1))/2 · ∫ d^{j1}_{m k} d^{j2}_{m k} cosᵖβ sinβ dβ.
pub fn symtop_cos_element(j1: u32, j2: u32, k: i32, m: i32, power: u32) -> f64 {
    let (x, w) = gauss_legendre((j1 + j2 + power + 4) as usize);
    let norm = (((2 * j1 + 1) * (2 * j2 + 1)) as f64).sqrt() / 2.0;
    let mut acc = 0.0;
    for (xi, wi) in x.iter().zip(w.iter()) {
        let beta = xi.acos();
        acc += wi
            * wigner_small_d(j1, m, k, beta)
            * wigner_small_d(j2, m, k, beta)
            * xi.powi(power as i32);
    }
    norm * acc
}

/// Composite trapezoid weight helper for closed [0, n] index loops.
pub fn trapezoid(values: &[f64], h: f64) -> f64 {
    let n = values.len();
    assert!(n >= 2);
    let inner: f64 = values[1..n - 1].iter().sum();
    h * (0.5 * values[0] + inner + 0.5 * values[n - 1])
}

#[cfg(test)]
mod self_checks {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(8);
        // ∫ x^10 over [-1,1] needs n ≥ 6; n = 8 is exact
        let got: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(10)).sum();
        assert!((got - 2.0 / 11.0).abs() < 1e-14);
        let total: f64 = w.iter().sum();
        assert!((total - 2.0).abs() < 1e-14);
    }

    #[test]
    fn wigner_d_closed_forms() {
        for &beta in &[0.3_f64, 1.2, 2.7] {
            let c = beta.cos();
            assert!((wigner_small_d(1, 1, 1, beta) - (1.0 + c) / 2.0).abs() < 1e-14);
            assert!((wigner_small_d(1, 0, 0, beta) - c).abs() < 1e-14);
            assert!(
                (wigner_small_d(1, 1, 0, beta) + beta.sin() / 2.0_f64.sqrt()).abs() < 1e-14
            );
        }
    }

    #[test]
    fn harmonics_are_orthonormal() {
        let (x, w) = gauss_legendre(24);
        for m in 0..=2i32 {
            for j1 in (m.unsigned_abs())..=5 {
                for j2 in (m.unsigned_abs())..=5 {
                    let mut acc = 0.0;
                    for (xi, wi) in x.iter().zip(w.iter()) {
                        acc += wi * sph_harm_phi0(j1, m, *xi) * sph_harm_phi0(j2, m, *xi);
                    }
                    acc *= 2.0 * PI;
                    let want = if j1 == j2 { 1.0 } else { 0.0 };
                    assert!((acc - want).abs() < 1e-13, "j1={j1} j2={j2} m={m}");
                }
            }
        }
    }
}
