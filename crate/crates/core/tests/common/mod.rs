//! Seeded random model instances shared by the integration suites.
#![allow(dead_code)]

use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use dtkernel::filtration::{AdaptedProcess, FiltrationTree, NodeRef};
use dtkernel::kernel::{
    kernel_from_increasing, kernel_rational, PositiveReturnAsset, PricingKernel, DEFAULT_TOLERANCE,
};
use dtkernel::models::gen_binomial_martingale;

pub struct RationalInstance {
    pub seed: u64,
    pub kernel: PricingKernel,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub martingale: AdaptedProcess,
}

pub struct IncreasingInstance {
    pub seed: u64,
    pub kernel: PricingKernel,
    pub g: AdaptedProcess,
    pub asset: PositiveReturnAsset,
}

/// Positive, strictly decreasing deterministic schedule of `len` entries.
fn decreasing_schedule(rng: &mut impl Rng, len: usize) -> Vec<f64> {
    let mut v = Vec::with_capacity(len);
    let mut x: f64 = rng.gen_range(0.5..2.0);
    for _ in 0..len {
        v.push(x);
        x *= rng.gen_range(0.3..0.95);
    }
    v
}

/// Binary rational model with `d = (1 - p u) / (1 - p)` so that `N` is a
/// positive martingale.
pub fn rational_instance(seed: u64) -> RationalInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let depth = rng.gen_range(1..=6);
    let p: f64 = rng.gen_range(0.1..0.9);
    let up = 1.0 + rng.gen_range(0.01..0.99) * (1.0 / p - 1.0);
    let down = (1.0 - p * up) / (1.0 - p);
    let initial = rng.gen_range(0.5..2.0);
    let alpha = decreasing_schedule(&mut rng, depth + 1);
    let beta = decreasing_schedule(&mut rng, depth + 1);

    let tree = Arc::new(FiltrationTree::binomial(depth, p).expect("valid binomial tree"));
    let martingale =
        gen_binomial_martingale(&tree, up, down, p, initial).expect("valid binomial martingale");
    let kernel = kernel_rational(tree, &alpha, &beta, &martingale, DEFAULT_TOLERANCE)
        .expect("decreasing schedules give a strict supermartingale");
    RationalInstance {
        seed,
        kernel,
        alpha,
        beta,
        martingale,
    }
}

/// Irregular tree: every node draws its own child count in `1..=3` and its
/// own transition probabilities.
pub fn random_tree(rng: &mut impl Rng, depth: usize) -> FiltrationTree {
    let mut levels = Vec::with_capacity(depth);
    let mut width = 1;
    for _ in 0..depth {
        let mut level = Vec::with_capacity(width);
        for _ in 0..width {
            let k = rng.gen_range(1..=3);
            let weights: Vec<f64> = (0..k).map(|_| rng.gen_range(0.2..1.0)).collect();
            let total: f64 = weights.iter().sum();
            let mut probs: Vec<f64> = weights.iter().map(|w| w / total).collect();
            // absorb rounding in the last child
            let head: f64 = probs[..k - 1].iter().sum();
            probs[k - 1] = 1.0 - head;
            level.push(probs);
        }
        width = level.iter().map(Vec::len).sum();
        levels.push(level);
    }
    FiltrationTree::from_child_probabilities(levels, None).expect("valid random tree")
}

/// Strictly increasing `G` with `G_0 = 0` on a random tree of depth `2..=6`.
pub fn increasing_instance(seed: u64) -> IncreasingInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let depth = rng.gen_range(2..=6);
    let tree = Arc::new(random_tree(&mut rng, depth));
    let mut values: Vec<Vec<f64>> = vec![vec![0.0]];
    for d in 1..=depth {
        let field = tree
            .nodes(d)
            .map(|node| {
                let parent = tree.parent(node).expect("non-root");
                values[d - 1][parent.index] + rng.gen_range(0.05..1.0)
            })
            .collect();
        values.push(field);
    }
    let g = AdaptedProcess::new(&tree, 0, values).expect("well-shaped G");
    let (kernel, asset) =
        kernel_from_increasing(tree, &g, DEFAULT_TOLERANCE).expect("increasing G gives a kernel");
    IncreasingInstance {
        seed,
        kernel,
        g,
        asset,
    }
}

/// Non-negative dividends on `[1, H]` with a random redemption.
pub fn random_dividends(kernel: &PricingKernel, seed: u64) -> (AdaptedProcess, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let tree = kernel.tree();
    let d = AdaptedProcess::from_fn(tree, 1, kernel.horizon(), |_: NodeRef| {
        rng.gen_range(0.0..2.0)
    });
    (d, rng.gen_range(0.0..2.0))
}

pub fn rational_suite(n: u64) -> Vec<RationalInstance> {
    (0..n).map(rational_instance).collect()
}

pub fn increasing_suite(n: u64) -> Vec<IncreasingInstance> {
    (1000..1000 + n).map(increasing_instance).collect()
}

/// Every kernel from both suites.
pub fn all_kernels(
    rational: &[RationalInstance],
    increasing: &[IncreasingInstance],
) -> Vec<PricingKernel> {
    rational
        .iter()
        .map(|r| r.kernel.clone())
        .chain(increasing.iter().map(|i| i.kernel.clone()))
        .collect()
}

/// Largest relative error between two equally shaped fields.
pub fn max_relative(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| dtkernel::filtration::relative_error(*x, *y))
        .fold(0.0, f64::max)
}
