//! Discount-bond surfaces and the Flesaker-Hughston representation.
//!
//! `P_ij = E_i[pi_j] / pi_i` for `0 <= i < j <= H`, stored densely as one
//! depth-`i` field per maturity pair.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::filtration::{
    is_martingale, relative_error, AdaptedProcess, CheckReport, FiltrationTree, NodeRef,
    ViolationTracker,
};
use crate::kernel::{validate_rational_inputs, PricingKernel};

#[derive(Debug, Clone)]
pub struct BondSurface {
    kernel: PricingKernel,
    /// `prices[i][j - i - 1]` is the depth-`i` field of `P_ij`.
    prices: Vec<Vec<Vec<f64>>>,
}

fn check_pair(i: usize, j: usize, horizon: usize) -> Result<()> {
    if i < j && j <= horizon {
        Ok(())
    } else {
        Err(Error::IndexOutOfRange { i, j, horizon })
    }
}

impl BondSurface {
    pub fn kernel(&self) -> &PricingKernel {
        &self.kernel
    }

    pub fn horizon(&self) -> usize {
        self.kernel.horizon()
    }

    /// `P_ij` as a field over the depth-`i` nodes.
    pub fn get(&self, i: usize, j: usize) -> Result<&[f64]> {
        check_pair(i, j, self.horizon())?;
        Ok(&self.prices[i][j - i - 1])
    }

    /// `(i, j, field)` for every maturity pair, `i` outer.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, &[f64])> {
        self.prices.iter().enumerate().flat_map(|(i, row)| {
            row.iter()
                .enumerate()
                .map(move |(k, f)| (i, i + k + 1, f.as_slice()))
        })
    }

    /// `0 < P_ij < 1` and strict decrease in `j`, as one strictness report
    /// whose margin is the tightest of the three inequalities.
    pub fn bounds_check(&self) -> CheckReport {
        let mut margin = f64::INFINITY;
        let mut witness = None;
        let mut observe = |node: NodeRef, m: f64| {
            if witness.is_none() || m < margin {
                margin = m;
                witness = Some(node);
            }
        };
        for (i, row) in self.prices.iter().enumerate() {
            for (k, field) in row.iter().enumerate() {
                for (n, &p) in field.iter().enumerate() {
                    let node = NodeRef::new(i, n);
                    observe(node, p);
                    observe(node, 1.0 - p);
                    if let Some(next) = row.get(k + 1) {
                        observe(node, p - next[n]);
                    }
                }
            }
        }
        CheckReport::from_margin("bond prices in (0, 1) and decreasing", margin, witness, 0.0)
    }

    /// `P_{i-1,i} = B_{i-1} / B_i` node-wise against a money-market account.
    pub fn previsible_rate_check(
        &self,
        balance: &AdaptedProcess,
        tolerance: f64,
    ) -> Result<CheckReport> {
        let tree = self.kernel.tree();
        let mut tracker = ViolationTracker::new();
        for i in 1..=self.horizon() {
            let p = self.get(i - 1, i)?;
            let prev = balance.field(i - 1)?;
            let cur = balance.field(i)?;
            for node in tree.nodes(i) {
                let k = tree.parent(node).expect("non-root").index;
                tracker.observe(
                    NodeRef::new(i - 1, k),
                    relative_error(p[k], prev[k] / cur[node.index]),
                );
            }
        }
        Ok(tracker.finish("one-period bond = B_{i-1}/B_i", tolerance))
    }
}

pub fn bond_surface(kernel: &PricingKernel) -> BondSurface {
    let tree = kernel.tree();
    let h = kernel.horizon();
    let mut prices: Vec<Vec<Vec<f64>>> = (0..h).map(|i| Vec::with_capacity(h - i)).collect();
    for j in 1..=h {
        let mut e = kernel.at(j).to_vec();
        for i in (0..j).rev() {
            e = tree.expect_one_step(&e, i + 1);
            let field = e.iter().zip(kernel.at(i)).map(|(e, p)| e / p).collect();
            prices[i].push(field);
        }
    }
    // pushed with j increasing, so each row is already ordered by maturity
    let surface = BondSurface {
        kernel: kernel.clone(),
        prices,
    };
    debug_assert!(surface.bounds_check().pass, "{}", surface.bounds_check());
    surface
}

/// Per-period rates `R_ij = 1 / P_ij - 1`, same layout as the bond surface.
#[derive(Debug, Clone)]
pub struct RateSurface {
    horizon: usize,
    rates: Vec<Vec<Vec<f64>>>,
}

impl RateSurface {
    pub fn get(&self, i: usize, j: usize) -> Result<&[f64]> {
        check_pair(i, j, self.horizon)?;
        Ok(&self.rates[i][j - i - 1])
    }
}

pub fn per_period_rate(surface: &BondSurface) -> RateSurface {
    RateSurface {
        horizon: surface.horizon(),
        rates: surface
            .prices
            .iter()
            .map(|row| {
                row.iter()
                    .map(|f| f.iter().map(|p| 1.0 / p - 1.0).collect())
                    .collect()
            })
            .collect(),
    }
}

/// `P_ij = (alpha_j + beta_j N_i) / (alpha_i + beta_i N_i)` over the depth-`i`
/// nodes, with the same input validation as the rational kernel.
pub fn rational_bond_closed_form(
    tree: &FiltrationTree,
    alpha: &[f64],
    beta: &[f64],
    martingale: &AdaptedProcess,
    i: usize,
    j: usize,
    tolerance: f64,
) -> Result<Vec<f64>> {
    let horizon = validate_rational_inputs(tree, alpha, beta, martingale, tolerance)?;
    check_pair(i, j, horizon)?;
    Ok(martingale
        .field(i)?
        .iter()
        .map(|n| (alpha[j] + beta[j] * n) / (alpha[i] + beta[i] * n))
        .collect())
}

/// Positive martingales `m_{i,n}` with `P_ij = sum_{n>j} m_{i,n} / sum_{n>i} m_{i,n}`.
///
/// Column `n` for `1 <= n <= H` is `m_{i,n} = E_i[pi_{n-1} - E_{n-1}[pi_n]]`
/// on `0 <= i <= n - 1`; column `H + 1` is the residual `E_i[pi_H]` on
/// `[0, H]`. The tail sums are then exact at every node.
#[derive(Debug, Clone, Serialize)]
pub struct FhFamily {
    columns: Vec<AdaptedProcess>,
}

impl FhFamily {
    pub fn horizon(&self) -> usize {
        self.columns.len() - 1
    }

    /// Column `n` in `1..=H + 1`.
    pub fn column(&self, n: usize) -> Option<&AdaptedProcess> {
        n.checked_sub(1).and_then(|k| self.columns.get(k))
    }

    pub fn columns(&self) -> impl Iterator<Item = (usize, &AdaptedProcess)> {
        self.columns.iter().enumerate().map(|(k, c)| (k + 1, c))
    }

    /// `sum_{n=from}^{H+1} m_{i,n}` at the depth-`i` nodes.
    fn tail_sum(&self, i: usize, from: usize) -> Vec<f64> {
        let width = self.columns[self.horizon()].at(i).map_or(0, <[f64]>::len);
        let mut acc = vec![0.0; width];
        for n in from..=self.horizon() + 1 {
            let col = self
                .column(n)
                .and_then(|c| c.at(i))
                .expect("column covers i");
            for (a, v) in acc.iter_mut().zip(col) {
                *a += v;
            }
        }
        acc
    }

    /// Column martingale and positivity checks plus the tail-sum identity
    /// `sum_{n>i} m_{i,n} = pi_i`.
    pub fn verify(&self, kernel: &PricingKernel, tolerance: f64) -> Result<Vec<CheckReport>> {
        let tree = kernel.tree();
        let mut reports = Vec::new();
        let mut positivity_margin = f64::INFINITY;
        let mut positivity_witness = None;
        for (n, col) in self.columns() {
            let (node, min) = col.min_node();
            if positivity_witness.is_none() || min < positivity_margin {
                positivity_margin = min;
                positivity_witness = Some(node);
            }
            if col.hi() > col.lo() {
                reports.push(
                    is_martingale(tree, col, tolerance)?.named(format!("FH column {n} martingale")),
                );
            }
        }
        reports.push(CheckReport::from_margin(
            "FH columns positive",
            positivity_margin,
            positivity_witness,
            0.0,
        ));
        let mut tracker = ViolationTracker::new();
        for i in 0..=kernel.horizon() {
            let sum = self.tail_sum(i, i + 1);
            tracker.observe_field(
                i,
                sum.iter()
                    .zip(kernel.at(i))
                    .map(|(s, p)| relative_error(*s, *p)),
            );
        }
        reports.push(tracker.finish("FH tail sum = pi", tolerance));
        Ok(reports)
    }
}

pub fn fh_extract(kernel: &PricingKernel) -> FhFamily {
    let tree = kernel.tree();
    let h = kernel.horizon();
    let mut columns = Vec::with_capacity(h + 1);
    for n in 1..=h {
        let e = kernel.one_step_expectation(n);
        let increment: Vec<f64> = kernel
            .at(n - 1)
            .iter()
            .zip(&e)
            .map(|(p, e)| p - e)
            .collect();
        let mut fields = vec![increment];
        for d in (1..n).rev() {
            let prev = tree.expect_one_step(fields.last().expect("non-empty"), d);
            fields.push(prev);
        }
        fields.reverse();
        columns.push(AdaptedProcess::from_fields(0, fields));
    }
    columns.push(kernel.terminal_residual());
    FhFamily { columns }
}

/// `P_ij` rebuilt from the family: tail sum from `j + 1` over tail sum from
/// `i + 1`, both running through the residual column.
pub fn fh_reconstruct(family: &FhFamily, i: usize, j: usize) -> Result<Vec<f64>> {
    check_pair(i, j, family.horizon())?;
    let num = family.tail_sum(i, j + 1);
    let den = family.tail_sum(i, i + 1);
    Ok(num.iter().zip(&den).map(|(a, b)| a / b).collect())
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::kernel::{
        kernel_from_process, kernel_rational, multiplicative_decomposition, DEFAULT_TOLERANCE,
    };
    use crate::models::gen_binomial_martingale;

    fn r1_parts() -> (Arc<FiltrationTree>, AdaptedProcess, [f64; 3]) {
        let tree = Arc::new(FiltrationTree::binomial(2, 0.5).unwrap());
        let n = gen_binomial_martingale(&tree, 1.2, 0.8, 0.5, 1.0).unwrap();
        (tree, n, [1.0, 0.5, 0.25])
    }

    fn r1() -> PricingKernel {
        let (tree, n, s) = r1_parts();
        kernel_rational(tree, &s, &s, &n, DEFAULT_TOLERANCE).unwrap()
    }

    fn chain_kernel(h: usize) -> PricingKernel {
        let tree = Arc::new(FiltrationTree::chain(h).unwrap());
        let values: Vec<f64> = (0..=h).map(|i| 0.5f64.powi(i as i32)).collect();
        let pi = AdaptedProcess::deterministic(&tree, 0, &values).unwrap();
        kernel_from_process(tree, pi, DEFAULT_TOLERANCE).unwrap()
    }

    fn close(a: &[f64], b: &[f64]) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() < 1e-12, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn chain_surface_is_powers_of_two() {
        let s = bond_surface(&chain_kernel(4));
        for (i, j, f) in s.entries() {
            close(f, &[0.5f64.powi((j - i) as i32)]);
        }
        assert!(s.bounds_check().pass);
    }

    #[test]
    fn r1_surface_and_rates() {
        let s = bond_surface(&r1());
        close(s.get(0, 1).unwrap(), &[0.5]);
        close(s.get(0, 2).unwrap(), &[0.25]);
        close(s.get(1, 2).unwrap(), &[0.5, 0.5]);
        let r = per_period_rate(&s);
        close(r.get(0, 1).unwrap(), &[1.0]);
        close(r.get(0, 2).unwrap(), &[3.0]);
        assert!(matches!(s.get(1, 1), Err(Error::IndexOutOfRange { .. })));
        assert!(matches!(s.get(0, 3), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn rate_near_par() {
        let tree = Arc::new(FiltrationTree::chain(1).unwrap());
        let pi = AdaptedProcess::deterministic(&tree, 0, &[1.0, 0.99]).unwrap();
        let k = kernel_from_process(tree, pi, DEFAULT_TOLERANCE).unwrap();
        let r = per_period_rate(&bond_surface(&k));
        assert!((r.get(0, 1).unwrap()[0] - 1.0 / 99.0).abs() < 1e-14);
    }

    #[test]
    fn frozen_martingale_closed_form() {
        let tree = Arc::new(FiltrationTree::binomial(3, 0.4).unwrap());
        let alpha = [1.0, 0.8, 0.5, 0.1];
        let beta = [2.0, 1.0, 0.6, 0.3];
        let n = AdaptedProcess::constant(&tree, 0, 3, 1.5);
        let k = kernel_rational(tree, &alpha, &beta, &n, DEFAULT_TOLERANCE).unwrap();
        let s = bond_surface(&k);
        for (i, j, f) in s.entries() {
            let want = (alpha[j] + beta[j] * 1.5) / (alpha[i] + beta[i] * 1.5);
            assert!(f.iter().all(|p| relative_error(*p, want) < 1e-14));
        }
    }

    #[test]
    fn closed_form_examples() {
        let (tree, n, s) = r1_parts();
        let up = rational_bond_closed_form(&tree, &s, &s, &n, 1, 2, 1e-10).unwrap();
        assert!((up[0] - 0.5).abs() < 1e-15);
        let one = AdaptedProcess::constant(&tree, 0, 2, 1.0);
        let p = rational_bond_closed_form(&tree, &s, &s, &one, 0, 2, 1e-10).unwrap();
        assert_eq!(p, vec![0.25]);
        let err = rational_bond_closed_form(&tree, &s, &s, &n, 1, 1, 1e-10).unwrap_err();
        assert!(matches!(err, Error::IndexOutOfRange { i: 1, j: 1, .. }));
    }

    #[test]
    fn fh_family_r1() {
        let k = r1();
        let fam = fh_extract(&k);
        assert_eq!(fam.horizon(), 2);
        close(fam.column(1).unwrap().at(0).unwrap(), &[1.0]);
        close(fam.column(2).unwrap().at(0).unwrap(), &[0.5]);
        close(fam.column(3).unwrap().at(0).unwrap(), &[0.5]);
        close(&fh_reconstruct(&fam, 0, 1).unwrap(), &[0.5]);
        close(&fh_reconstruct(&fam, 0, 2).unwrap(), &[0.25]);
        close(&fh_reconstruct(&fam, 1, 2).unwrap(), &[0.5, 0.5]);
        for report in fam.verify(&k, 1e-12).unwrap() {
            assert!(report.pass, "{report}");
        }
        assert!(matches!(
            fh_reconstruct(&fam, 2, 3),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn fh_family_chain() {
        let fam = fh_extract(&chain_kernel(2));
        close(fam.column(1).unwrap().at(0).unwrap(), &[0.5]);
        close(fam.column(2).unwrap().at(0).unwrap(), &[0.25]);
        close(fam.column(3).unwrap().at(0).unwrap(), &[0.25]);
        let m12 = fam.column(2).unwrap().at(1).unwrap()[0];
        let res = fam.column(3).unwrap().at(1).unwrap()[0];
        close(&fh_reconstruct(&fam, 1, 2).unwrap(), &[res / (m12 + res)]);
    }

    #[test]
    fn one_period_bond_matches_account() {
        let k = r1();
        let s = bond_surface(&k);
        let dec = multiplicative_decomposition(&k);
        let report = s
            .previsible_rate_check(&dec.account.balance, 1e-12)
            .unwrap();
        assert!(report.pass, "{report}");
    }
}
