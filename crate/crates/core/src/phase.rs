//! Accurate evaluation of `e·t mod 2π` for integer frequencies.
//!
//! The product is formed exactly as a sum of doubles (FMA two-product, with
//! frequencies above 2⁵³ split first) and each part is reduced against a
//! three-word `2π`, so the result carries absolute error near 1e−16 even when
//! `e·t` is astronomically large compared with `2π`.

use std::f64::consts::TAU;

// leading word of the three-word split is the nearest double to 2π
const TAU_1: f64 = TAU;
const TAU_2: f64 = 2.4492935982947064e-16;
const TAU_3: f64 = -5.989539619436679e-33;

fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

/// `x mod 2π` in `[-π, π]` up to one ulp of the result; exact reduction for
/// `|x / 2π| < 2⁵³`.
fn reduce(x: f64) -> f64 {
    if x.abs() <= std::f64::consts::PI {
        return x;
    }
    let n = (x / TAU).round();
    let r = (-n).mul_add(TAU_1, x);
    r - n * TAU_2 - n * TAU_3
}

fn wrap(x: f64) -> f64 {
    let r = reduce(x);
    if r > std::f64::consts::PI {
        r - TAU
    } else if r < -std::f64::consts::PI {
        r + TAU
    } else {
        r
    }
}

/// `e·t mod 2π`, returned in `[-π, π]`.
pub fn integer_phase(e: i128, t: f64) -> f64 {
    const LIMIT: i128 = 1 << 53;
    let mut acc = 0.0;
    let mut rest = e;
    // Peel off an exactly representable head until the tail fits in 53 bits.
    while rest.abs() >= LIMIT {
        let head = rest as f64;
        let hi = head as i128;
        let (p, q) = two_prod(head, t);
        acc += reduce(p) + reduce(q);
        rest -= hi;
    }
    let (p, q) = two_prod(rest as f64, t);
    acc += reduce(p) + reduce(q);
    wrap(acc)
}

/// `(cos, sin)` of `−e·t`, i.e. the phasor `e^{−i e t}`.
pub fn phasor(e: i128, t: f64) -> (f64, f64) {
    let (s, c) = integer_phase(e, t).sin_cos();
    (c, -s)
}

/// `e^{−2πi·(e mod q)/q}`: the phasor of `e` over one period `2π/q` of the
/// integer frequency `q > 0`.
pub fn period_phasor(e: i128, q: i128) -> (f64, f64) {
    let r = e.rem_euclid(q);
    let theta = TAU * (r as f64 / q as f64);
    let (s, c) = theta.sin_cos();
    (c, -s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_products_are_plain() {
        for &(e, t) in &[(1i128, 0.5), (-3, 1.25), (7, 0.0)] {
            let want = (e as f64 * t).sin_cos();
            let got = integer_phase(e, t).sin_cos();
            assert!((want.0 - got.0).abs() < 1e-15 && (want.1 - got.1).abs() < 1e-15);
        }
    }

    #[test]
    fn exact_multiples_of_pi_reduce_to_zero() {
        // t = 2π·k / e within one rounding of t, so the phase is within e·ulp(t).
        let e: i128 = 795_600;
        let t = std::f64::consts::PI;
        let ph = integer_phase(e, t);
        // e is even so e·π ≡ e·(π − π_f64) mod 2π
        let err = e as f64 * 1.2246467991473532e-16;
        assert!((ph - (-err)).abs() < 1e-15, "{ph} vs {}", -err);
    }

    #[test]
    fn integer_times_dyadic_time() {
        // t = 0.5 gives e·t = e/2; compare against an exact integer reduction.
        let e: i128 = 123_456_789_012_345;
        let got = integer_phase(e, 0.5);
        let x = (e as f64) / 2.0;
        let n = (x / TAU).round();
        let want = wrap((-n).mul_add(TAU_1, x) - n * TAU_2);
        assert!((got - want).abs() < 1e-12);
    }

    #[test]
    fn additivity_in_frequency() {
        // phase(a + b) = phase(a) + phase(b) mod 2π, with a, b beyond 2^53.
        let a: i128 = 9_007_199_254_740_993 * 3;
        let b: i128 = 12_345_678_901;
        let t = 0.123456789;
        let lhs = integer_phase(a + b, t);
        let rhs = wrap(integer_phase(a, t) + integer_phase(b, t));
        assert!((lhs - rhs).abs() < 1e-9, "{lhs} {rhs}");
    }

    #[test]
    fn period_phasor_matches_direct() {
        let (c, s) = period_phasor(37, 10);
        let th = TAU * 0.7;
        assert!((c - th.cos()).abs() < 1e-15 && (s + th.sin()).abs() < 1e-15);
    }
}
