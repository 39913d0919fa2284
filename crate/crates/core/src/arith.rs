//! Small modular-arithmetic helpers shared by the tableau, Weyl and linear
//! algebra code.

/// Non-negative residue of `a` modulo `m`.
#[inline]
pub fn reduce(a: i64, m: u32) -> u32 {
    a.rem_euclid(m as i64) as u32
}

/// Greatest common divisor; `gcd(0, 0) = 0`.
pub fn gcd(a: u64, b: u64) -> u64 {
    let (mut a, mut b) = (a, b);
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

pub fn lcm(a: u64, b: u64) -> u64 {
    if a == 0 || b == 0 {
        0
    } else {
        a / gcd(a, b) * b
    }
}

/// Extended Euclid over the integers: returns `(g, s, t)` with
/// `s*a + t*b = g = gcd(a, b) >= 0`.
pub fn ext_gcd(a: i128, b: i128) -> (i128, i128, i128) {
    let (mut old_r, mut r) = (a, b);
    let (mut old_s, mut s) = (1i128, 0i128);
    let (mut old_t, mut t) = (0i128, 1i128);
    while r != 0 {
        let q = old_r.div_euclid(r);
        (old_r, r) = (r, old_r - q * r);
        (old_s, s) = (s, old_s - q * s);
        (old_t, t) = (t, old_t - q * t);
    }
    if old_r < 0 {
        (-old_r, -old_s, -old_t)
    } else {
        (old_r, old_s, old_t)
    }
}

/// Multiplicative inverse of `a` modulo `m`, if it exists.
pub fn mod_inverse(a: u32, m: u32) -> Option<u32> {
    let (g, s, _) = ext_gcd(a as i128, m as i128);
    if g != 1 {
        return None;
    }
    Some(s.rem_euclid(m as i128) as u32)
}

pub fn is_prime(d: u32) -> bool {
    if d < 2 {
        return false;
    }
    let mut k = 2u32;
    while (k as u64) * (k as u64) <= d as u64 {
        if d.is_multiple_of(k) {
            return false;
        }
        k += 1;
    }
    true
}

/// `k (k - 1) / 2 mod m`, computed without overflow for any `k < 2^32`.
#[inline]
pub fn binom2_mod(k: u64, m: u32) -> u64 {
    let m = m as u64;
    let (a, b) = if k.is_multiple_of(2) { (k / 2, k.wrapping_sub(1)) } else { (k, (k - 1) / 2) };
    if k == 0 {
        return 0;
    }
    ((a % m) * (b % m)) % m
}

/// Solves `a * x = b (mod m)`; returns the smallest solution and the period
/// `m / gcd(a, m)` of the solution set, or `None` when unsolvable.
pub fn solve_linear_congruence(a: u64, b: u64, m: u64) -> Option<(u64, u64)> {
    let a = a % m;
    let b = b % m;
    let g = gcd(a, m);
    if g == 0 {
        // a = 0 and m = 0 cannot happen for m >= 1.
        return None;
    }
    if !b.is_multiple_of(g) {
        return None;
    }
    let period = m / g;
    if period == 1 {
        return Some((0, 1));
    }
    let inv = mod_inverse(((a / g) % period) as u32, period as u32)? as u64;
    Some((((b / g) % period) * inv % period, period))
}
