//! Planted random trees and a brute-force fANOVA oracle by exhaustive cell enumeration.

#![allow(dead_code)]

use dynbias::fanova::{Dim, DimKind, Split, Tree, TreeSpec};
use dynbias::sensors::THERMOCOUPLE_COEFFS;
use num_bigint::BigInt;
use num_rational::BigRational;
use rand::Rng;

/// Resolution of continuous dimensions; planted thresholds are multiples of `1 / STEPS`.
pub const STEPS: usize = 16;
pub const GRID: usize = 64;

/// Random tree with thresholds on the `1 / STEPS` lattice and random subset splits.
pub fn random_tree<R: Rng>(rng: &mut R, dims: &[Dim], max_depth: usize) -> TreeSpec {
    let box_: Vec<(usize, usize, u64)> = dims
        .iter()
        .map(|d| match d.kind {
            DimKind::Continuous => (0, STEPS, 0),
            DimKind::Categorical(n) => (0, 0, (1u64 << n) - 1),
        })
        .collect();
    grow(rng, dims, box_, max_depth)
}

fn grow<R: Rng>(rng: &mut R, dims: &[Dim], b: Vec<(usize, usize, u64)>, depth: usize) -> TreeSpec {
    let splittable: Vec<usize> = (0..dims.len())
        .filter(|&d| match dims[d].kind {
            DimKind::Continuous => b[d].1 - b[d].0 >= 2,
            DimKind::Categorical(_) => b[d].2.count_ones() >= 2,
        })
        .collect();
    if depth == 0 || splittable.is_empty() || rng.gen_bool(0.2) {
        return TreeSpec::leaf(rng.gen_range(-2.0..2.0));
    }
    let d = splittable[rng.gen_range(0..splittable.len())];
    let (mut lb, mut rb) = (b.clone(), b.clone());
    let split = match dims[d].kind {
        DimKind::Continuous => {
            let k = rng.gen_range(b[d].0 + 1..b[d].1);
            lb[d].1 = k;
            rb[d].0 = k;
            Split::Threshold(k as f64 / STEPS as f64)
        }
        DimKind::Categorical(_) => {
            let members: Vec<u32> = (0..64).filter(|i| b[d].2 & (1u64 << i) != 0).collect();
            let mut left = 0u64;
            while left == 0 || left == b[d].2 {
                left = members.iter().filter(|_| rng.gen_bool(0.5)).fold(0, |m, &i| m | (1u64 << i));
            }
            lb[d].2 = left;
            rb[d].2 = b[d].2 & !left;
            Split::Subset(left)
        }
    };
    TreeSpec::Split {
        dim: d,
        split,
        left: Box::new(grow(rng, dims, lb, depth - 1)),
        right: Box::new(grow(rng, dims, rb, depth - 1)),
    }
}

/// Equally weighted representative points of one dimension.
pub fn axis(dim: &Dim) -> Vec<f64> {
    match dim.kind {
        DimKind::Continuous => (0..GRID).map(|i| (i as f64 + 0.5) / GRID as f64).collect(),
        DimKind::Categorical(n) => (0..n).map(|c| c as f64 / (n - 1) as f64).collect(),
    }
}

/// Average of `tree` over the free dimensions with `fixed` coordinates held.
pub fn brute_marginal(tree: &Tree, dims: &[Dim], fixed: &[(usize, f64)]) -> f64 {
    let axes: Vec<Vec<f64>> = dims
        .iter()
        .enumerate()
        .map(|(d, dim)| match fixed.iter().find(|f| f.0 == d) {
            Some(&(_, u)) => vec![u],
            None => axis(dim),
        })
        .collect();
    let mut total = 0.0;
    let mut count = 0usize;
    let mut x = vec![0.0; dims.len()];
    let mut idx = vec![0usize; dims.len()];
    loop {
        for d in 0..dims.len() {
            x[d] = axes[d][idx[d]];
        }
        total += tree.predict(&x, dims);
        count += 1;
        let mut d = 0;
        loop {
            if d == dims.len() {
                return total / count as f64;
            }
            idx[d] += 1;
            if idx[d] < axes[d].len() {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
    }
}

/// Brute-force variance fractions `(individual, pairwise[u][v])`; `None` for a constant tree.
pub fn brute_decomposition(tree: &Tree, dims: &[Dim]) -> Option<(Vec<f64>, Vec<Vec<f64>>)> {
    let axes: Vec<Vec<f64>> = dims.iter().map(axis).collect();
    let n = dims.len();
    let sizes: Vec<usize> = axes.iter().map(Vec::len).collect();
    let total_cells: usize = sizes.iter().product();
    let mut values = Vec::with_capacity(total_cells);
    let mut coords = Vec::with_capacity(total_cells);
    for flat in 0..total_cells {
        let mut rem = flat;
        let mut idx = vec![0; n];
        for d in 0..n {
            idx[d] = rem % sizes[d];
            rem /= sizes[d];
        }
        let x: Vec<f64> = (0..n).map(|d| axes[d][idx[d]]).collect();
        values.push(tree.predict(&x, dims));
        coords.push(idx);
    }
    let mean = values.iter().sum::<f64>() / total_cells as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / total_cells as f64;
    if var <= 1e-24 * (1.0 + mean * mean) {
        return None;
    }
    let mut mains: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut individual = vec![0.0; n];
    for d in 0..n {
        let mut acc = vec![0.0; sizes[d]];
        for (v, c) in values.iter().zip(&coords) {
            acc[c[d]] += v;
        }
        let per = (total_cells / sizes[d]) as f64;
        let f: Vec<f64> = acc.iter().map(|a| a / per - mean).collect();
        individual[d] = f.iter().map(|x| x * x).sum::<f64>() / sizes[d] as f64 / var;
        mains.push(f);
    }
    let mut pairwise = vec![vec![0.0; n]; n];
    for u in 0..n {
        for v in u + 1..n {
            let mut acc = vec![0.0; sizes[u] * sizes[v]];
            for (val, c) in values.iter().zip(&coords) {
                acc[c[u] * sizes[v] + c[v]] += val;
            }
            let per = (total_cells / (sizes[u] * sizes[v])) as f64;
            let mut s = 0.0;
            for i in 0..sizes[u] {
                for j in 0..sizes[v] {
                    let f = acc[i * sizes[v] + j] / per - mains[u][i] - mains[v][j] - mean;
                    s += f * f;
                }
            }
            pairwise[u][v] = s / (sizes[u] * sizes[v]) as f64 / var;
        }
    }
    Some((individual, pairwise))
}

/// Thermocouple polynomial in exact rational arithmetic, millivolts.
pub fn thermocouple_exact(t: f64) -> BigRational {
    let x = BigRational::from_float(t).unwrap();
    let mut acc = BigRational::from_integer(BigInt::from(0));
    let mut pow = x.clone();
    for &c in &THERMOCOUPLE_COEFFS {
        acc += BigRational::from_float(c).unwrap() * &pow;
        pow *= &x;
    }
    acc / BigRational::from_integer(BigInt::from(1000))
}

pub fn rational_to_f64(r: &BigRational) -> f64 {
    // scale to keep 60+ significant bits before the final division
    let scale = BigInt::from(1u64) << 200;
    let q: BigInt = (r.numer() * &scale) / r.denom();
    q.to_string().parse::<f64>().unwrap() / 2f64.powi(200)
}
