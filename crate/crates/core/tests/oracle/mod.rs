//! Slow, obviously-correct reference implementations used to check `stats`.
//! Nothing here calls into the library.
#![allow(dead_code)]

/// Rank of each value by counting: 1 + #smaller + (#equal - 1) / 2.
pub fn brute_ranks(x: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|&v| {
            let smaller = x.iter().filter(|&&w| w < v).count() as f64;
            let equal = x.iter().filter(|&&w| w == v).count() as f64;
            1.0 + smaller + (equal - 1.0) / 2.0
        })
        .collect()
}

/// Pearson via raw sums.
pub fn sums_pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let sx: f64 = x.iter().sum();
    let sy: f64 = y.iter().sum();
    let sxx: f64 = x.iter().map(|v| v * v).sum();
    let syy: f64 = y.iter().map(|v| v * v).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    (n * sxy - sx * sy) / ((n * sxx - sx * sx).sqrt() * (n * syy - sy * sy).sqrt())
}

pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    sums_pearson(&brute_ranks(x), &brute_ranks(y))
}

/// U for `a` by direct pair comparison; ties count one half.
pub fn pair_count_u(a: &[f64], b: &[f64]) -> f64 {
    let mut u = 0.0;
    for &x in a {
        for &y in b {
            if x > y {
                u += 1.0;
            } else if x == y {
                u += 0.5;
            }
        }
    }
    u
}

fn for_each_subset(n: usize, k: usize, f: &mut impl FnMut(&[usize])) {
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
        if cur.len() == k {
            f(cur);
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            go(i + 1, n, k, cur, f);
            cur.pop();
        }
    }
    go(0, n, k, &mut Vec::with_capacity(k), f);
}

/// Exact null mean and variance of U_a: every way of assigning the pooled
/// midranks to group `a` is enumerated.
pub fn enumerated_u_moments(a: &[f64], b: &[f64]) -> (f64, f64, usize) {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = brute_ranks(&pooled);
    let n1 = a.len();
    let offset = (n1 * (n1 + 1)) as f64 / 2.0;
    let mut us = Vec::new();
    for_each_subset(pooled.len(), n1, &mut |idx| {
        let r: f64 = idx.iter().map(|&i| ranks[i]).sum();
        us.push(r - offset);
    });
    let m = us.len() as f64;
    let mean = us.iter().sum::<f64>() / m;
    let var = us.iter().map(|u| (u - mean) * (u - mean)).sum::<f64>() / m;
    (mean, var, us.len())
}

/// Exact two-sided permutation p-value: share of assignments at least as
/// far from the mean as the observed U.
pub fn enumerated_u_exact_p(a: &[f64], b: &[f64]) -> f64 {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = brute_ranks(&pooled);
    let n1 = a.len();
    let offset = (n1 * (n1 + 1)) as f64 / 2.0;
    let observed = pair_count_u(a, b);
    let mean = (a.len() * b.len()) as f64 / 2.0;
    let (mut hit, mut total) = (0usize, 0usize);
    for_each_subset(pooled.len(), n1, &mut |idx| {
        let u: f64 = idx.iter().map(|&i| ranks[i]).sum::<f64>() - offset;
        total += 1;
        if (u - mean).abs() >= (observed - mean).abs() - 1e-12 {
            hit += 1;
        }
    });
    hit as f64 / total as f64
}

fn pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// P(|Z| >= z) by composite Simpson integration of the density over [0, |z|].
pub fn simpson_two_sided_p(z: f64) -> f64 {
    let z = z.abs();
    if z == 0.0 {
        return 1.0;
    }
    let n = 20_000;
    let h = z / n as f64;
    let mut s = pdf(0.0) + pdf(z);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * pdf(i as f64 * h);
    }
    (1.0 - 2.0 * s * h / 3.0).max(0.0)
}

/// Normal-approximation p for U using enumerated moments and continuity correction.
pub fn mann_whitney_p(a: &[f64], b: &[f64]) -> f64 {
    let u = pair_count_u(a, b);
    let (mean, var, _) = enumerated_u_moments(a, b);
    let dev = (u - mean).abs();
    if var <= 0.0 || dev < 0.5 {
        return 1.0;
    }
    simpson_two_sided_p((dev - 0.5) / var.sqrt())
}

pub fn fisher(r1: f64, n1: usize, r2: f64, n2: usize) -> (f64, f64) {
    let atanh = |r: f64| 0.5 * ((1.0 + r) / (1.0 - r)).ln();
    let se = (1.06 / (n1 as f64 - 3.0) + 1.06 / (n2 as f64 - 3.0)).sqrt();
    let z = (atanh(r1) - atanh(r2)) / se;
    (z, simpson_two_sided_p(z))
}

pub fn bonferroni(p: &[f64], m: usize) -> Vec<f64> {
    let mut out = Vec::new();
    for &x in p {
        let mut adj = x * m as f64;
        if adj > 1.0 {
            adj = 1.0;
        }
        out.push(adj);
    }
    out
}

/// Small deterministic generator so oracle instances need no library RNG.
pub struct Lcg(pub u64);

impl Lcg {
    pub fn next_u32(&mut self) -> u32 {
        self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (self.0 >> 33) as u32
    }

    /// Integer-valued draw in `0..k`, which makes ties common.
    pub fn small(&mut self, k: u32) -> f64 {
        (self.next_u32() % k) as f64
    }

    pub fn unit(&mut self) -> f64 {
        self.next_u32() as f64 / u32::MAX as f64
    }
}
