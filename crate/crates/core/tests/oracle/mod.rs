//! Brute-force reference implementations. Nothing here calls into the crate's
//! box, window or enumeration code; inputs and outputs are plain integers,
//! strings and byte vectors.
#![allow(dead_code, clippy::needless_range_loop)]

use std::collections::HashSet;

pub const SIDE: usize = 6;

pub fn is_prime_naive(x: u64) -> bool {
    x >= 2
        && (2..x)
            .take_while(|d| d * d <= x)
            .all(|d| !x.is_multiple_of(d))
}

fn pow_naive(base: u64, exp: u64, q: u64) -> u64 {
    let mut acc = 1 % q;
    for _ in 0..exp {
        acc = acc * (base % q) % q;
    }
    acc
}

fn reduce(v: i128, q: u64) -> u64 {
    let q = q as i128;
    (((v % q) + q) % q) as u64
}

/// Evaluates each of the 36 cell formulas one by one.
pub fn grid(p: u64, q: u64, n: u64) -> [[u64; SIDE]; SIDE] {
    let (pi, ni) = (p as i128, n as i128);
    let mut g = [[0u64; SIDE]; SIDE];
    // Row 0: P mod Q, then P^n, P^(n+1), ..., P^(n+4).
    g[0][0] = p % q;
    g[0][1] = pow_naive(p, n, q);
    g[0][2] = pow_naive(p, n + 1, q);
    g[0][3] = pow_naive(p, n + 2, q);
    g[0][4] = pow_naive(p, n + 3, q);
    g[0][5] = pow_naive(p, n + 4, q);
    // Row 1: P - n, P - 2n, ..., P - 6n.
    for (c, mult) in (1..=6).enumerate() {
        g[1][c] = reduce(pi - mult * ni, q);
    }
    // Row 2: P + n, ..., P + 6n.
    for (c, mult) in (1..=6).enumerate() {
        g[2][c] = reduce(pi + mult * ni, q);
    }
    // Row 3: P*2 - n, ..., P*7 - n.
    for (c, f) in (2..=7).enumerate() {
        g[3][c] = reduce(pi * f - ni, q);
    }
    // Row 4: P + 2 - n, ..., P + 7 - n.
    for (c, a) in (2..=7).enumerate() {
        g[4][c] = reduce(pi + a - ni, q);
    }
    // Row 5: P*2 + n, ..., P*7 + n.
    for (c, f) in (2..=7).enumerate() {
        g[5][c] = reduce(pi * f + ni, q);
    }
    g
}

pub fn label(r: usize, c: usize) -> String {
    format!("{:x}{}", r + c + 1, (b'a' + r as u8) as char)
}

pub fn window(g: &[[u64; SIDE]; SIDE], row: usize, col: usize, k: usize) -> Vec<u64> {
    let mut out = Vec::new();
    for r in row..row + k {
        for c in col..col + k {
            out.push(g[r][c]);
        }
    }
    out
}

pub fn distinct(values: &[u64]) -> bool {
    values.iter().collect::<HashSet<_>>().len() == values.len()
}

/// All origins for `k`, row-major.
pub fn origins(k: usize) -> Vec<(usize, usize)> {
    let m = SIDE - k + 1;
    (0..m).flat_map(|r| (0..m).map(move |c| (r, c))).collect()
}

/// Among all duplicate-free origins, the one with the smallest row-major
/// distance from `start` going forward with wraparound.
pub fn first_duplicate_free(
    g: &[[u64; SIDE]; SIDE],
    k: usize,
    start: usize,
) -> Option<(usize, usize)> {
    let all = origins(k);
    let count = all.len();
    all.iter()
        .enumerate()
        .filter(|(_, &(r, c))| distinct(&window(g, r, c, k)))
        .min_by_key(|(i, _)| (i + count - start) % count)
        .map(|(_, &o)| o)
}

/// Every valid `(p, q, n)` with `p <= p_max`, `q <= q_max`, `n <= n_max`.
pub fn params_in(p_max: u64, q_max: u64, n_max: u64) -> Vec<(u64, u64, u64)> {
    let mut out = Vec::new();
    for q in 3..=q_max {
        if !is_prime_naive(q) {
            continue;
        }
        for p in 2..q.min(p_max + 1) {
            if !is_prime_naive(p) {
                continue;
            }
            for n in 1..=n_max.min(q - 1) {
                out.push((p, q, n));
            }
        }
    }
    out
}

/// What the attacker knows, in plain values.
pub struct Knowledge<'a> {
    pub labels: &'a [String],
    pub k: usize,
    pub params: Option<(u64, u64, u64)>,
    pub s1_values: Option<Vec<u64>>,
    pub s2_origin: Option<(usize, usize)>,
    /// Grids of every parameter set the attacker considers possible.
    pub universe: &'a [[[u64; SIDE]; SIDE]],
}

pub fn grids_in(p_max: u64, q_max: u64, n_max: u64) -> Vec<[[u64; SIDE]; SIDE]> {
    params_in(p_max, q_max, n_max)
        .into_iter()
        .map(|(p, q, n)| grid(p, q, n))
        .collect()
}

/// Walks the full assignment space (residue window × label-window origin)
/// and keeps every assignment under which all observed labels decode.
pub fn candidate_keys(kn: &Knowledge) -> HashSet<Vec<u8>> {
    let k = kn.k;
    let s1_windows: Vec<Vec<u64>> = if let Some(v) = &kn.s1_values {
        vec![v.clone()]
    } else {
        let grids: Vec<[[u64; SIDE]; SIDE]> = match kn.params {
            Some((p, q, n)) => vec![grid(p, q, n)],
            None => kn.universe.to_vec(),
        };
        grids
            .iter()
            .flat_map(|g| origins(k).into_iter().map(move |(r, c)| window(g, r, c, k)))
            .filter(|w| distinct(w))
            .collect()
    };
    let s2_origins: Vec<(usize, usize)> = origins(k)
        .into_iter()
        .filter(|o| kn.s2_origin.is_none_or(|t| t == *o))
        .collect();

    let names: Vec<Vec<String>> = (0..SIDE)
        .map(|r| (0..SIDE).map(|c| label(r, c)).collect())
        .collect();
    let mut keys = HashSet::new();
    for w in &s1_windows {
        'origin: for &(or, oc) in &s2_origins {
            let mut key = Vec::new();
            for l in kn.labels {
                let mut hit = None;
                for i in 0..k {
                    for j in 0..k {
                        if names[or + i][oc + j] == *l {
                            hit = Some(w[i * k + j]);
                        }
                    }
                }
                match hit {
                    Some(v) => key.extend_from_slice(&(v as u32).to_be_bytes()),
                    None => continue 'origin,
                }
            }
            keys.insert(key);
        }
    }
    keys
}

/// Triple loop over the bounds, regenerating each grid.
pub fn consistent_params(
    values: &[u64],
    origin: (usize, usize),
    k: usize,
    bounds: (u64, u64, u64),
) -> Vec<(u64, u64, u64)> {
    params_in(bounds.0, bounds.1, bounds.2)
        .into_iter()
        .filter(|&(p, q, n)| window(&grid(p, q, n), origin.0, origin.1, k) == values)
        .collect()
}
