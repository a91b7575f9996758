//! Word-sized modular arithmetic, primality and root finding.

/// `a * b mod m` through a 128-bit product.
#[inline]
pub fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

#[inline]
pub fn add_mod(a: u64, b: u64, m: u64) -> u64 {
    let s = a + b;
    if s >= m {
        s - m
    } else {
        s
    }
}

#[inline]
pub fn sub_mod(a: u64, b: u64, m: u64) -> u64 {
    if a >= b {
        a - b
    } else {
        a + m - b
    }
}

#[inline]
pub fn neg_mod(a: u64, m: u64) -> u64 {
    if a == 0 {
        0
    } else {
        m - a
    }
}

pub fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    let mut acc = 1 % m;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    acc
}

/// Inverse modulo a prime.
pub fn inv_mod(a: u64, m: u64) -> u64 {
    pow_mod(a, m - 2, m)
}

/// Precomputed companion `floor(w * 2^64 / m)` for Shoup multiplication.
#[inline]
pub fn shoup(w: u64, m: u64) -> u64 {
    (((w as u128) << 64) / m as u128) as u64
}

/// `a * w mod m` given the Shoup companion of `w`; requires `m < 2^63`.
#[inline]
pub fn mul_shoup(a: u64, w: u64, w_shoup: u64, m: u64) -> u64 {
    let q = ((a as u128 * w_shoup as u128) >> 64) as u64;
    let r = a.wrapping_mul(w).wrapping_sub(q.wrapping_mul(m));
    if r >= m {
        r - m
    } else {
        r
    }
}

/// Deterministic Miller-Rabin for all 64-bit inputs.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    const BASES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    for &b in &BASES {
        if n.is_multiple_of(b) {
            return n == b;
        }
    }
    let mut d = n - 1;
    let mut r = 0;
    while d.is_multiple_of(2) {
        d /= 2;
        r += 1;
    }
    'outer: for &a in &BASES {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..r {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'outer;
            }
        }
        return false;
    }
    true
}

/// Smallest prime strictly above `lower` with `prime ≡ 1 (mod step)`.
pub fn next_ntt_prime(lower: u64, step: u64) -> u64 {
    let mut c = lower - lower % step + 1;
    if c <= lower {
        c += step;
    }
    while !is_prime(c) {
        c += step;
    }
    c
}

/// The `count` largest primes below `2^bits` with `prime ≡ 1 (mod step)`, descending.
pub fn ntt_primes_below(bits: u32, step: u64, count: usize, skip: &[u64]) -> Vec<u64> {
    let top = 1u64 << bits;
    let mut c = top - top % step + 1;
    if c >= top {
        c -= step;
    }
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        if is_prime(c) && !skip.contains(&c) {
            out.push(c);
        }
        c -= step;
    }
    out
}

fn distinct_prime_factors(mut n: u64) -> Vec<u64> {
    let mut fs = Vec::new();
    let mut f = 2;
    while f * f <= n {
        if n.is_multiple_of(f) {
            fs.push(f);
            while n.is_multiple_of(f) {
                n /= f;
            }
        }
        f += if f == 2 { 1 } else { 2 };
        if f > 1 << 20 && is_prime(n) {
            break;
        }
    }
    if n > 1 {
        fs.push(n);
    }
    fs
}

/// A primitive `order`-th root of unity modulo prime `m`; `order` must divide `m - 1`.
pub fn primitive_root_of_unity(order: u64, m: u64) -> Option<u64> {
    if !(m - 1).is_multiple_of(order) {
        return None;
    }
    let cofactor = (m - 1) / order;
    let factors = distinct_prime_factors(order);
    for g in 2..m {
        let w = pow_mod(g, cofactor, m);
        if factors.iter().all(|&f| pow_mod(w, order / f, m) != 1) {
            return Some(w);
        }
    }
    None
}
