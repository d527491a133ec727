//! Pricing kernels and their structural decompositions.
//!
//! A [`PricingKernel`] is a strictly positive process `pi` on depths
//! `[0, H]` with `E_i[pi_{i+1}] < pi_i` at every node. From it we extract:
//!
//! * the natural money-market account `B` and the martingale `rho = pi * B`
//!   (multiplicative decomposition);
//! * the previsible increasing compensator `A` with
//!   `pi_i = E_i[A_H] - A_i + E_i[pi_H]` (Doob decomposition on a finite
//!   horizon, the last term being the residual the infinite-horizon version
//!   sends to zero);
//! * positive-return assets `B_bar` whose deflated value `pi * B_bar` is a
//!   martingale, either from a strictly increasing process `G` or from the
//!   Doob compensator.

use std::sync::Arc;

use serde::Serialize;

use crate::bonds::BondSurface;
use crate::error::{Error, Result};
use crate::filtration::{
    is_martingale, is_previsible, is_strict_supermartingale, relative_error, AdaptedProcess,
    CheckReport, FiltrationTree, NodeRef, ViolationTracker,
};
use crate::models::validate_schedule;

/// Default tolerance for identity checks on unit-scale quantities.
pub const DEFAULT_TOLERANCE: f64 = 1e-10;

/// Strictness margins (`pi_i - E_i[pi_{i+1}]`, decay of `E[pi_i]`) must
/// exceed this.
pub const STRICT_MARGIN: f64 = 1e-12;

/// Validated pricing kernel together with its tree.
#[derive(Debug, Clone)]
pub struct PricingKernel {
    tree: Arc<FiltrationTree>,
    values: AdaptedProcess,
    tolerance: f64,
}

impl PricingKernel {
    pub fn tree(&self) -> &FiltrationTree {
        &self.tree
    }

    pub fn shared_tree(&self) -> Arc<FiltrationTree> {
        Arc::clone(&self.tree)
    }

    pub fn values(&self) -> &AdaptedProcess {
        &self.values
    }

    /// Valid horizon `H`.
    pub fn horizon(&self) -> usize {
        self.values.hi()
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    /// `pi_i` as a depth-`i` field. Panics when `i > H`.
    pub fn at(&self, depth: usize) -> &[f64] {
        self.values
            .at(depth)
            .unwrap_or_else(|| panic!("kernel undefined at depth {depth}"))
    }

    /// `E_{i-1}[pi_i]` as a depth-`(i-1)` field.
    pub fn one_step_expectation(&self, depth: usize) -> Vec<f64> {
        self.tree.expect_one_step(self.at(depth), depth)
    }

    /// `E[pi_i]` for `i = 0..=H`.
    pub fn expected_values(&self) -> Vec<f64> {
        (0..=self.horizon())
            .map(|i| self.tree.expect_root(self.at(i), i))
            .collect()
    }

    /// `E_i[pi_H]` for every `i` in `[0, H]`.
    pub fn terminal_residual(&self) -> AdaptedProcess {
        let h = self.horizon();
        let mut fields = vec![self.at(h).to_vec()];
        for d in (1..=h).rev() {
            let prev = self
                .tree
                .expect_one_step(fields.last().expect("non-empty"), d);
            fields.push(prev);
        }
        fields.reverse();
        AdaptedProcess::from_fields(0, fields)
    }

    /// Checks that `E[pi_i]` strictly decreases in `i`.
    pub fn decay_check(&self) -> CheckReport {
        let means = self.expected_values();
        let mut margin = f64::INFINITY;
        let mut witness = None;
        for i in 1..means.len() {
            let m = means[i - 1] - means[i];
            if witness.is_none() || m < margin {
                margin = m;
                witness = Some(NodeRef::new(i, 0));
            }
        }
        CheckReport::from_margin("expected kernel decreasing", margin, witness, STRICT_MARGIN)
    }
}

/// Validates raw kernel values: strict positivity, then the strict
/// supermartingale property with margins above [`STRICT_MARGIN`].
/// `tolerance` is kept for the identity checks run against the kernel.
pub fn kernel_from_process(
    tree: Arc<FiltrationTree>,
    values: AdaptedProcess,
    tolerance: f64,
) -> Result<PricingKernel> {
    values.ensure_fits(&tree)?;
    if values.lo() != 0 {
        return Err(Error::ProcessNotDefinedAtDepth {
            depth: 0,
            lo: values.lo(),
            hi: values.hi(),
        });
    }
    if values.hi() == 0 {
        return Err(Error::HorizonTooShort { horizon: 0 });
    }
    let (node, value) = values.min_node();
    if !(value > 0.0) {
        return Err(Error::NonPositiveKernel { node, value });
    }
    let report = is_strict_supermartingale(&tree, &values, STRICT_MARGIN)?;
    if !report.pass {
        return Err(Error::NotStrictSupermartingale(Box::new(report)));
    }
    Ok(PricingKernel {
        tree,
        values,
        tolerance,
    })
}

/// Checks rational-model inputs on `[0, H]` with `H = martingale.hi()`.
pub(crate) fn validate_rational_inputs(
    tree: &FiltrationTree,
    alpha: &[f64],
    beta: &[f64],
    martingale: &AdaptedProcess,
    tolerance: f64,
) -> Result<usize> {
    martingale.ensure_fits(tree)?;
    if martingale.lo() != 0 {
        return Err(Error::ProcessNotDefinedAtDepth {
            depth: 0,
            lo: martingale.lo(),
            hi: martingale.hi(),
        });
    }
    let horizon = martingale.hi();
    for schedule in [alpha, beta] {
        if schedule.len() < horizon + 1 {
            return Err(Error::ScheduleLength {
                needed: horizon + 1,
                found: schedule.len(),
            });
        }
        validate_schedule(&schedule[..=horizon])?;
    }
    let (node, value) = martingale.min_node();
    if !(value > 0.0) {
        return Err(Error::NonPositiveMartingale { node, value });
    }
    if horizon > 0 {
        let report = is_martingale(tree, martingale, tolerance)?;
        if !report.pass {
            return Err(Error::NotAMartingale(Box::new(report)));
        }
    }
    Ok(horizon)
}

/// Rational kernel `pi_i = alpha_i + beta_i * N_i` on the range of `N`.
pub fn kernel_rational(
    tree: Arc<FiltrationTree>,
    alpha: &[f64],
    beta: &[f64],
    martingale: &AdaptedProcess,
    tolerance: f64,
) -> Result<PricingKernel> {
    validate_rational_inputs(&tree, alpha, beta, martingale, tolerance)?;
    let values = martingale.map(|node, n| alpha[node.depth] + beta[node.depth] * n);
    kernel_from_process(tree, values, tolerance)
}

/// Increasing non-dividend asset whose deflated value is a martingale.
#[derive(Debug, Clone, Serialize)]
pub struct PositiveReturnAsset {
    /// `B_bar` on `[0, H]`, `B_bar_0 = 1`.
    pub value: AdaptedProcess,
    /// One-period return `r_bar` on `[1, H]`.
    pub rate: AdaptedProcess,
    /// `rho_bar = pi * B_bar` on `[0, H]`.
    pub rho: AdaptedProcess,
    pub martingale_check: CheckReport,
}

impl PositiveReturnAsset {
    /// Compounds `rate` into `B_bar` and verifies that `pi * B_bar` is a
    /// martingale.
    pub fn from_rates(kernel: &PricingKernel, rate: AdaptedProcess) -> Result<Self> {
        let tree = kernel.tree();
        let h = kernel.horizon();
        if rate.lo() != 1 || rate.hi() != h {
            return Err(Error::ProcessNotDefinedAtDepth {
                depth: if rate.lo() != 1 { 1 } else { h },
                lo: rate.lo(),
                hi: rate.hi(),
            });
        }
        let mut fields = vec![vec![1.0]];
        for d in 1..=h {
            let r = rate.field(d)?;
            let field = tree
                .nodes(d)
                .map(|node| {
                    let parent = tree.parent(node).expect("non-root");
                    fields[d - 1][parent.index] * (1.0 + r[node.index])
                })
                .collect();
            fields.push(field);
        }
        let value = AdaptedProcess::from_fields(0, fields);
        let (node, r_min) = rate.min_node();
        if !(r_min > 0.0) {
            return Err(Error::NotStrictlyIncreasing { node });
        }
        let rho = kernel.values().zip_with(&value, |p, b| p * b)?;
        let martingale_check =
            is_martingale(tree, &rho, kernel.tolerance())?.named("positive-return rho martingale");
        if !martingale_check.pass {
            return Err(Error::NotAMartingale(Box::new(martingale_check)));
        }
        Ok(Self {
            value,
            rate,
            rho,
            martingale_check,
        })
    }

    /// Cumulative deflated returns `G_i = sum_{n=1}^{i} pi_n r_bar_n`, `G_0 = 0`.
    pub fn gains(&self, kernel: &PricingKernel) -> AdaptedProcess {
        let tree = kernel.tree();
        let mut fields = vec![vec![0.0]];
        for d in 1..=kernel.horizon() {
            let r = self.rate.at(d).expect("rate covers [1, H]");
            let pi = kernel.at(d);
            let field = tree
                .nodes(d)
                .map(|node| {
                    let parent = tree.parent(node).expect("non-root");
                    fields[d - 1][parent.index] + pi[node.index] * r[node.index]
                })
                .collect();
            fields.push(field);
        }
        AdaptedProcess::from_fields(0, fields)
    }
}

/// Kernel `pi_i = E_i[G_N] - G_i` from a strictly increasing `G` with
/// `G_0 = 0` on `[0, N]`, together with the positive-return asset
/// `r_bar_i = (G_i - G_{i-1}) / pi_i`. The valid horizon is `N - 1`, since
/// `pi_N` vanishes.
pub fn kernel_from_increasing(
    tree: Arc<FiltrationTree>,
    g: &AdaptedProcess,
    tolerance: f64,
) -> Result<(PricingKernel, PositiveReturnAsset)> {
    g.ensure_fits(&tree)?;
    if g.lo() != 0 {
        return Err(Error::ProcessNotDefinedAtDepth {
            depth: 0,
            lo: g.lo(),
            hi: g.hi(),
        });
    }
    let terminal = g.hi();
    if terminal < 2 {
        return Err(Error::HorizonTooShort {
            horizon: terminal.saturating_sub(1),
        });
    }
    let g0 = g.field(0)?[0];
    if g0 != 0.0 {
        return Err(Error::InitialValueNotZero { value: g0 });
    }
    for d in 1..=terminal {
        let cur = g.field(d)?;
        let prev = g.field(d - 1)?;
        for node in tree.nodes(d) {
            let parent = tree.parent(node).expect("non-root");
            if !(cur[node.index] > prev[parent.index]) {
                return Err(if d == terminal {
                    Error::ZeroKernelInsideHorizon { node }
                } else {
                    Error::NotStrictlyIncreasing { node }
                });
            }
        }
    }

    // E_i[G_N] by backward induction
    let mut expected = vec![g.field(terminal)?.to_vec()];
    for d in (1..=terminal).rev() {
        let prev = tree.expect_one_step(expected.last().expect("non-empty"), d);
        expected.push(prev);
    }
    expected.reverse();
    let horizon = terminal - 1;
    let pi_fields = (0..=horizon)
        .map(|d| {
            let gd = g.at(d).expect("checked");
            expected[d].iter().zip(gd).map(|(e, x)| e - x).collect()
        })
        .collect();
    let kernel = kernel_from_process(tree, AdaptedProcess::from_fields(0, pi_fields), tolerance)?;

    let rate = AdaptedProcess::from_fn(kernel.tree(), 1, horizon, |node| {
        let parent = kernel.tree().parent(node).expect("non-root");
        let increment = g.get(node).expect("in range") - g.get(parent).expect("in range");
        increment / kernel.at(node.depth)[node.index]
    });
    let asset = PositiveReturnAsset::from_rates(&kernel, rate)?;
    Ok((kernel, asset))
}

/// Broadcasts a depth-`(d-1)` field onto depth `d`: every child inherits its
/// parent's value.
pub(crate) fn spread_to_children(
    tree: &FiltrationTree,
    parent_field: &[f64],
    depth: usize,
) -> Vec<f64> {
    tree.nodes(depth)
        .map(|node| parent_field[tree.parent(node).expect("non-root").index])
        .collect()
}

/// `r_i = pi_{i-1} / E_{i-1}[pi_i] - 1` on `[1, H]`, stored on depth-`i`
/// nodes and constant across siblings.
pub fn short_rate(kernel: &PricingKernel) -> AdaptedProcess {
    let tree = kernel.tree();
    let fields = (1..=kernel.horizon())
        .map(|d| {
            let e = kernel.one_step_expectation(d);
            let at_parent: Vec<f64> = kernel
                .at(d - 1)
                .iter()
                .zip(&e)
                .map(|(p, e)| p / e - 1.0)
                .collect();
            spread_to_children(tree, &at_parent, d)
        })
        .collect();
    AdaptedProcess::from_fields(1, fields)
}

/// Natural money-market account.
#[derive(Debug, Clone, Serialize)]
pub struct MoneyMarketAccount {
    /// `B` on `[0, H]`, `B_0 = 1`.
    pub balance: AdaptedProcess,
    /// Short rate `r` on `[1, H]`.
    pub rate: AdaptedProcess,
}

#[derive(Debug, Clone, Serialize)]
pub struct MultiplicativeDecomposition {
    pub account: MoneyMarketAccount,
    /// `rho = pi * B`, a martingale with `rho_0 = pi_0`.
    pub rho: AdaptedProcess,
}

impl MultiplicativeDecomposition {
    /// Martingale property of `rho`, previsibility and strict growth of `B`,
    /// and the product identity `rho = pi * B`.
    pub fn verify(&self, kernel: &PricingKernel) -> Result<Vec<CheckReport>> {
        let tree = kernel.tree();
        let tol = kernel.tolerance();
        let balance = &self.account.balance;
        let mut reports = vec![
            is_martingale(tree, &self.rho, tol)?.named("rho martingale"),
            is_previsible(tree, &balance.restrict(1, kernel.horizon())?, tol)?
                .named("money-market account previsible"),
        ];
        let mut margin = f64::INFINITY;
        let mut witness = None;
        for d in 1..=kernel.horizon() {
            let cur = balance.field(d)?;
            let prev = balance.field(d - 1)?;
            for node in tree.nodes(d) {
                let parent = tree.parent(node).expect("non-root");
                let m = cur[node.index] - prev[parent.index];
                if witness.is_none() || m < margin {
                    margin = m;
                    witness = Some(node);
                }
            }
        }
        reports.push(CheckReport::from_margin(
            "money-market account increasing",
            margin,
            witness,
            tol,
        ));
        let mut tracker = ViolationTracker::new();
        for (d, rho) in self.rho.fields() {
            let pi = kernel.at(d);
            let b = balance.field(d)?;
            tracker.observe_field(
                d,
                rho.iter()
                    .zip(pi.iter().zip(b))
                    .map(|(r, (p, b))| relative_error(*r, p * b)),
            );
        }
        reports.push(tracker.finish("rho = pi * B", tol));
        Ok(reports)
    }
}

/// `B_i = (pi_{i-1} / E_{i-1}[pi_i]) B_{i-1}` and
/// `rho_i = (pi_i / E_{i-1}[pi_i]) rho_{i-1}`.
pub fn multiplicative_decomposition(kernel: &PricingKernel) -> MultiplicativeDecomposition {
    let tree = kernel.tree();
    let h = kernel.horizon();
    let mut balance = vec![vec![1.0]];
    let mut rho = vec![kernel.at(0).to_vec()];
    let mut rate = Vec::with_capacity(h);
    for d in 1..=h {
        let e = kernel.one_step_expectation(d);
        let prev_pi = kernel.at(d - 1);
        let growth: Vec<f64> = prev_pi.iter().zip(&e).map(|(p, e)| p / e).collect();
        let next_balance: Vec<f64> = balance[d - 1]
            .iter()
            .zip(&growth)
            .map(|(b, g)| b * g)
            .collect();
        balance.push(spread_to_children(tree, &next_balance, d));
        rate.push(spread_to_children(
            tree,
            &growth.iter().map(|g| g - 1.0).collect::<Vec<_>>(),
            d,
        ));
        let pi = kernel.at(d);
        let next_rho = tree
            .nodes(d)
            .map(|node| {
                let parent = tree.parent(node).expect("non-root").index;
                pi[node.index] / e[parent] * rho[d - 1][parent]
            })
            .collect();
        rho.push(next_rho);
    }
    MultiplicativeDecomposition {
        account: MoneyMarketAccount {
            balance: AdaptedProcess::from_fields(0, balance),
            rate: AdaptedProcess::from_fields(1, rate),
        },
        rho: AdaptedProcess::from_fields(0, rho),
    }
}

/// Finite-horizon Doob decomposition of the kernel.
#[derive(Debug, Clone, Serialize)]
pub struct DoobDecomposition {
    /// `A_i = sum_{n<i} (pi_n - E_n[pi_{n+1}])`, previsible, `A_0 = 0`.
    pub compensator: AdaptedProcess,
    /// `E_i[pi_H]`.
    pub residual: AdaptedProcess,
}

impl DoobDecomposition {
    /// Relative check of `pi_i = E_i[A_H] - A_i + E_i[pi_H]`.
    pub fn identity_check(&self, kernel: &PricingKernel, tolerance: f64) -> CheckReport {
        let tree = kernel.tree();
        let h = kernel.horizon();
        let a_h = self.compensator.at(h).expect("A covers [0, H]");
        let mut tracker = ViolationTracker::new();
        for i in 0..=h {
            let e = tree.expect_field(a_h, h, i);
            let a = self.compensator.at(i).expect("A covers [0, H]");
            let res = self.residual.at(i).expect("residual covers [0, H]");
            tracker.observe_field(
                i,
                kernel
                    .at(i)
                    .iter()
                    .enumerate()
                    .map(|(k, &pi)| relative_error(pi, e[k] - a[k] + res[k])),
            );
        }
        tracker.finish("Doob identity", tolerance)
    }

    /// Compares `A` with `sum_{n<i} pi_n r_{n+1} P_{n,n+1}` built from the
    /// short rate and the bond surface.
    pub fn rate_form_check(
        &self,
        kernel: &PricingKernel,
        surface: &BondSurface,
        tolerance: f64,
    ) -> Result<CheckReport> {
        let rate_form = compensator_from_rates(kernel, &short_rate(kernel), surface)?;
        let mut tracker = ViolationTracker::new();
        for (d, a) in self.compensator.fields() {
            let b = rate_form.field(d)?;
            tracker.observe_field(d, a.iter().zip(b).map(|(x, y)| relative_error(*x, *y)));
        }
        Ok(tracker.finish("Doob compensator rate form", tolerance))
    }
}

pub fn doob_decomposition(kernel: &PricingKernel) -> DoobDecomposition {
    let tree = kernel.tree();
    let mut compensator = vec![vec![0.0]];
    for d in 1..=kernel.horizon() {
        let e = kernel.one_step_expectation(d);
        let next: Vec<f64> = compensator[d - 1]
            .iter()
            .zip(kernel.at(d - 1).iter().zip(&e))
            .map(|(a, (p, e))| a + (p - e))
            .collect();
        compensator.push(spread_to_children(tree, &next, d));
    }
    DoobDecomposition {
        compensator: AdaptedProcess::from_fields(0, compensator),
        residual: kernel.terminal_residual(),
    }
}

/// `sum_{n<i} pi_n r_{n+1} P_{n,n+1}` accumulated along each path.
pub fn compensator_from_rates(
    kernel: &PricingKernel,
    rate: &AdaptedProcess,
    surface: &BondSurface,
) -> Result<AdaptedProcess> {
    let tree = kernel.tree();
    let mut fields = vec![vec![0.0]];
    for d in 1..=kernel.horizon() {
        let r = rate.field(d)?;
        let p = surface.get(d - 1, d)?;
        let pi = kernel.at(d - 1);
        let field = tree
            .nodes(d)
            .map(|node| {
                let k = tree.parent(node).expect("non-root").index;
                fields[d - 1][k] + pi[k] * r[node.index] * p[k]
            })
            .collect();
        fields.push(field);
    }
    Ok(AdaptedProcess::from_fields(0, fields))
}

/// Positive-return asset with `r_bar_i = r_i pi_{i-1} P_{i-1,i} / pi_i`,
/// whose cumulative deflated returns reproduce the Doob compensator.
pub fn positive_return_from_doob(
    kernel: &PricingKernel,
    surface: &BondSurface,
) -> Result<PositiveReturnAsset> {
    let tree = kernel.tree();
    let r = short_rate(kernel);
    let mut fields = Vec::with_capacity(kernel.horizon());
    for d in 1..=kernel.horizon() {
        let p = surface.get(d - 1, d)?;
        let prev = kernel.at(d - 1);
        let pi = kernel.at(d);
        let rd = r.field(d)?;
        fields.push(
            tree.nodes(d)
                .map(|node| {
                    let k = tree.parent(node).expect("non-root").index;
                    rd[node.index] * prev[k] * p[k] / pi[node.index]
                })
                .collect(),
        );
    }
    PositiveReturnAsset::from_rates(kernel, AdaptedProcess::from_fields(1, fields))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bonds::bond_surface;
    use crate::models::gen_binomial_martingale;

    fn chain_kernel(h: usize) -> PricingKernel {
        let tree = Arc::new(FiltrationTree::chain(h).unwrap());
        let values: Vec<f64> = (0..=h).map(|i| 0.5f64.powi(i as i32)).collect();
        let pi = AdaptedProcess::deterministic(&tree, 0, &values).unwrap();
        kernel_from_process(tree, pi, DEFAULT_TOLERANCE).unwrap()
    }

    fn r1() -> PricingKernel {
        let tree = Arc::new(FiltrationTree::binomial(2, 0.5).unwrap());
        let n = gen_binomial_martingale(&tree, 1.2, 0.8, 0.5, 1.0).unwrap();
        let s = [1.0, 0.5, 0.25];
        kernel_rational(tree, &s, &s, &n, DEFAULT_TOLERANCE).unwrap()
    }

    fn assert_field(actual: &[f64], expected: &[f64]) {
        assert_eq!(actual.len(), expected.len());
        for (a, e) in actual.iter().zip(expected) {
            assert!((a - e).abs() < 1e-12, "{actual:?} vs {expected:?}");
        }
    }

    #[test]
    fn r1_kernel_values() {
        let k = r1();
        assert_field(k.at(0), &[2.0]);
        assert_field(k.at(1), &[1.1, 0.9]);
        assert_field(k.at(2), &[0.61, 0.49, 0.49, 0.41]);
        assert!(k.decay_check().pass);
    }

    #[test]
    fn constant_kernel_is_rejected() {
        let tree = Arc::new(FiltrationTree::chain(3).unwrap());
        let pi = AdaptedProcess::constant(&tree, 0, 3, 1.0);
        let err = kernel_from_process(tree, pi, DEFAULT_TOLERANCE).unwrap_err();
        match err {
            Error::NotStrictSupermartingale(report) => assert!(report.witness.is_some()),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_positive_kernel_is_rejected() {
        let tree = Arc::new(FiltrationTree::chain(2).unwrap());
        let pi = AdaptedProcess::deterministic(&tree, 0, &[1.0, 0.5, -0.1]).unwrap();
        let err = kernel_from_process(tree, pi, DEFAULT_TOLERANCE).unwrap_err();
        assert!(matches!(
            err,
            Error::NonPositiveKernel {
                node: NodeRef { depth: 2, index: 0 },
                ..
            }
        ));
    }

    #[test]
    fn rational_kernel_special_cases() {
        let tree = Arc::new(FiltrationTree::binomial(3, 0.5).unwrap());
        let alpha = [4.0, 3.0, 2.0, 1.0];
        let beta = [2.0, 1.5, 1.0, 0.5];
        let n = AdaptedProcess::constant(&tree, 0, 3, 2.0);
        let k = kernel_rational(tree.clone(), &alpha, &beta, &n, DEFAULT_TOLERANCE).unwrap();
        for i in 0..=3 {
            assert!(k.at(i).iter().all(|&v| v == alpha[i] + beta[i] * 2.0));
        }
        let one = AdaptedProcess::constant(&tree, 0, 3, 1.0);
        let k = kernel_rational(tree, &alpha, &alpha, &one, DEFAULT_TOLERANCE).unwrap();
        for (i, a) in alpha.iter().enumerate() {
            assert!(k.at(i).iter().all(|&v| v == 2.0 * a));
        }
    }

    #[test]
    fn rational_kernel_input_errors() {
        let tree = Arc::new(FiltrationTree::binomial(1, 0.5).unwrap());
        let n = AdaptedProcess::new(&tree, 0, vec![vec![1.0], vec![1.2, 0.8]]).unwrap();
        let err = kernel_rational(tree.clone(), &[1.0, 1.0], &[1.0, 0.5], &n, 1e-10).unwrap_err();
        assert!(matches!(err, Error::ScheduleNotDecreasing { index: 1 }));
        let bad = AdaptedProcess::new(&tree, 0, vec![vec![1.0], vec![1.2, 0.9]]).unwrap();
        let err = kernel_rational(tree.clone(), &[1.0, 0.5], &[1.0, 0.5], &bad, 1e-10).unwrap_err();
        assert!(matches!(err, Error::NotAMartingale(_)));
        let neg = AdaptedProcess::new(&tree, 0, vec![vec![1.0], vec![2.5, -0.5]]).unwrap();
        let err = kernel_rational(tree, &[1.0, 0.5], &[1.0, 0.5], &neg, 1e-10).unwrap_err();
        assert!(matches!(err, Error::NonPositiveMartingale { .. }));
    }

    #[test]
    fn from_increasing_on_chain() {
        let tree = Arc::new(FiltrationTree::chain(2).unwrap());
        let g = AdaptedProcess::deterministic(&tree, 0, &[0.0, 1.0, 2.0]).unwrap();
        let (k, asset) = kernel_from_increasing(tree, &g, DEFAULT_TOLERANCE).unwrap();
        assert_eq!(k.horizon(), 1);
        assert_field(k.at(0), &[2.0]);
        assert_field(k.at(1), &[1.0]);
        assert_field(asset.rate.at(1).unwrap(), &[1.0]);
        assert_field(asset.value.at(1).unwrap(), &[2.0]);
        assert!(asset.martingale_check.pass);
        assert_field(short_rate(&k).at(1).unwrap(), &[1.0]);
    }

    #[test]
    fn from_increasing_rejects_flat_steps() {
        let tree = Arc::new(FiltrationTree::chain(3).unwrap());
        let g = AdaptedProcess::deterministic(&tree, 0, &[0.0, 1.0, 1.0, 2.0]).unwrap();
        let err = kernel_from_increasing(tree.clone(), &g, DEFAULT_TOLERANCE).unwrap_err();
        assert!(matches!(err, Error::NotStrictlyIncreasing { .. }));
        let g = AdaptedProcess::deterministic(&tree, 0, &[0.0, 1.0, 2.0, 2.0]).unwrap();
        let err = kernel_from_increasing(tree.clone(), &g, DEFAULT_TOLERANCE).unwrap_err();
        assert!(matches!(err, Error::ZeroKernelInsideHorizon { .. }));
        let g = AdaptedProcess::deterministic(&tree, 0, &[0.5, 1.0, 2.0, 3.0]).unwrap();
        let err = kernel_from_increasing(tree, &g, DEFAULT_TOLERANCE).unwrap_err();
        assert!(matches!(err, Error::InitialValueNotZero { .. }));
    }

    #[test]
    fn from_increasing_with_r1_compensator() {
        let k = r1();
        let a = doob_decomposition(&k).compensator;
        let (k2, asset) = kernel_from_increasing(k.shared_tree(), &a, DEFAULT_TOLERANCE).unwrap();
        let res = k.terminal_residual();
        for i in 0..=k2.horizon() {
            let expected: Vec<f64> = k
                .at(i)
                .iter()
                .zip(res.at(i).unwrap())
                .map(|(p, r)| p - r)
                .collect();
            assert_field(k2.at(i), &expected);
        }
        assert!(asset.martingale_check.pass);
    }

    #[test]
    fn short_rate_examples() {
        let r = short_rate(&chain_kernel(3));
        assert!(r.iter().all(|(_, v)| (v - 1.0).abs() < 1e-15));
        let r = short_rate(&r1());
        assert_field(r.at(1).unwrap(), &[1.0, 1.0]);
        assert_field(r.at(2).unwrap(), &[1.0; 4]);
    }

    #[test]
    fn multiplicative_decomposition_examples() {
        let k = chain_kernel(3);
        let dec = multiplicative_decomposition(&k);
        for i in 0..=3 {
            assert_field(dec.account.balance.at(i).unwrap(), &[2f64.powi(i as i32)]);
            assert_field(dec.rho.at(i).unwrap(), &[1.0]);
        }

        let k = r1();
        let dec = multiplicative_decomposition(&k);
        assert_field(dec.account.balance.at(1).unwrap(), &[2.0, 2.0]);
        assert_field(dec.account.balance.at(2).unwrap(), &[4.0; 4]);
        assert_field(dec.rho.at(1).unwrap(), &[2.2, 1.8]);
        assert_field(dec.rho.at(2).unwrap(), &[2.44, 1.96, 1.96, 1.64]);
        for report in dec.verify(&k).unwrap() {
            assert!(report.pass, "{report}");
        }
    }

    #[test]
    fn doob_examples() {
        let k = chain_kernel(2);
        let doob = doob_decomposition(&k);
        assert_field(doob.compensator.at(1).unwrap(), &[0.5]);
        assert_field(doob.compensator.at(2).unwrap(), &[0.75]);
        assert_eq!(doob.identity_check(&k, 1e-15).max_violation, 0.0);

        let k = r1();
        let doob = doob_decomposition(&k);
        assert_field(doob.compensator.at(1).unwrap(), &[1.0, 1.0]);
        assert_field(doob.compensator.at(2).unwrap(), &[1.55, 1.55, 1.45, 1.45]);
        assert_field(doob.residual.at(0).unwrap(), &[0.5]);
        assert!(doob.identity_check(&k, 1e-12).pass);
        let surface = bond_surface(&k);
        assert!(doob.rate_form_check(&k, &surface, 1e-12).unwrap().pass);
    }

    #[test]
    fn positive_return_from_doob_examples() {
        let k = chain_kernel(3);
        let surface = bond_surface(&k);
        let asset = positive_return_from_doob(&k, &surface).unwrap();
        let dec = multiplicative_decomposition(&k);
        for (d, f) in asset.value.fields() {
            assert_field(f, dec.account.balance.at(d).unwrap());
        }

        let k = r1();
        let surface = bond_surface(&k);
        let asset = positive_return_from_doob(&k, &surface).unwrap();
        assert_field(asset.rate.at(1).unwrap(), &[1.0 / 1.1, 1.0 / 0.9]);
        assert!(asset.martingale_check.pass);
        let gains = asset.gains(&k);
        let a = doob_decomposition(&k).compensator;
        for (d, f) in gains.fields() {
            assert_field(f, a.at(d).unwrap());
        }
    }
}
