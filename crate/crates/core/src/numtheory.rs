//! Small-integer number theory used by box generation.

/// Deterministic primality by trial division. Adequate for anything below 2^32.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n < 4 {
        return true;
    }
    if n.is_multiple_of(2) || n.is_multiple_of(3) {
        return false;
    }
    let mut d = 5u64;
    while d * d <= n {
        if n.is_multiple_of(d) || n.is_multiple_of(d + 2) {
            return false;
        }
        d += 6;
    }
    true
}

/// `base^exp mod modulus` by square-and-multiply. `modulus` must be below 2^32
/// so every intermediate product fits in a `u64`.
pub fn mod_pow(base: u64, mut exp: u64, modulus: u64) -> u64 {
    assert!(modulus > 0 && modulus <= u32::MAX as u64 + 1);
    if modulus == 1 {
        return 0;
    }
    let mut base = base % modulus;
    let mut acc = 1u64;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = acc * base % modulus;
        }
        base = base * base % modulus;
        exp >>= 1;
    }
    acc
}

/// Least non-negative residue of a signed value.
pub fn residue(v: i64, modulus: u64) -> u64 {
    v.rem_euclid(modulus as i64) as u64
}

/// Primes in `[2, limit]`, ascending.
pub fn primes_up_to(limit: u64) -> Vec<u64> {
    (2..=limit).filter(|&x| is_prime(x)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_primes() {
        let got: Vec<u64> = primes_up_to(31);
        assert_eq!(got, vec![2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31]);
        assert!(!is_prime(0));
        assert!(!is_prime(1));
        assert!(!is_prime(25));
        assert!(is_prime(2_147_483_647));
        assert!(!is_prime(2_147_483_649));
    }

    #[test]
    fn mod_pow_matches_repeated_multiplication() {
        for m in 1..60u64 {
            for b in 0..20u64 {
                let mut acc = 1 % m;
                for e in 0..12u64 {
                    assert_eq!(mod_pow(b, e, m), acc, "{b}^{e} mod {m}");
                    acc = acc * b % m;
                }
            }
        }
        // 5^3 = 125 = 9 (mod 29)
        assert_eq!(mod_pow(5, 3, 29), 9);
        assert_eq!(mod_pow(2_147_483_646, 1 << 40, 2_147_483_647), 1);
    }

    #[test]
    fn negative_residues() {
        assert_eq!(residue(-1, 29), 28);
        assert_eq!(residue(-13, 29), 16);
        assert_eq!(residue(32, 29), 3);
    }
}
