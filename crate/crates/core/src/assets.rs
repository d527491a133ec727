//! Dividend-paying assets: pricing, bubble decomposition, transversality,
//! and the symmetric foreign-exchange form.
//!
//! On a horizon `H` an asset pays `D_n` at depths `1..=H`, plus an optional
//! redemption at `H` which is treated as part of `D_H`. Prices are
//! ex-dividend, so a fundamental price vanishes at `H`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::filtration::{
    is_martingale, is_previsible, AdaptedProcess, CheckReport, FiltrationTree, NodeRef,
};
use crate::kernel::{multiplicative_decomposition, short_rate, PricingKernel};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DividendAsset {
    pub dividends: AdaptedProcess,
    /// Paid at the horizon on top of the last dividend.
    pub redemption: f64,
    /// Quoted value process, required by [`decompose_value`].
    pub value: Option<AdaptedProcess>,
}

fn ensure_non_negative(what: &'static str, p: &AdaptedProcess) -> Result<()> {
    let (node, value) = p.min_node();
    if value < 0.0 {
        return Err(Error::NegativeValue { what, node, value });
    }
    Ok(())
}

impl DividendAsset {
    pub fn new(tree: &FiltrationTree, dividends: AdaptedProcess, redemption: f64) -> Result<Self> {
        dividends.ensure_fits(tree)?;
        ensure_non_negative("dividend", &dividends)?;
        if !(redemption >= 0.0 && redemption.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "redemption {redemption} must be non-negative"
            )));
        }
        Ok(Self {
            dividends,
            redemption,
            value: None,
        })
    }

    pub fn with_value(mut self, tree: &FiltrationTree, value: AdaptedProcess) -> Result<Self> {
        value.ensure_fits(tree)?;
        ensure_non_negative("value", &value)?;
        self.value = Some(value);
        Ok(self)
    }

    /// Pays nothing.
    pub fn zero(kernel: &PricingKernel) -> Self {
        Self {
            dividends: AdaptedProcess::constant(kernel.tree(), 1, kernel.horizon(), 0.0),
            redemption: 0.0,
            value: None,
        }
    }

    /// Pays the short rate each period and redeems at par.
    pub fn floating_rate_note(kernel: &PricingKernel) -> Self {
        Self {
            dividends: short_rate(kernel),
            redemption: 1.0,
            value: None,
        }
    }

    /// The natural money-market account held as a zero-dividend asset.
    pub fn money_market(kernel: &PricingKernel) -> Self {
        let mut asset = Self::zero(kernel);
        asset.value = Some(multiplicative_decomposition(kernel).account.balance);
        asset
    }

    /// `D_n` for `n = 1..=H` with the redemption folded into `D_H`, and `D_0`
    /// when supplied.
    fn cash_flows(&self, kernel: &PricingKernel) -> Result<(f64, Vec<Vec<f64>>)> {
        let h = kernel.horizon();
        let d = &self.dividends;
        d.ensure_fits(kernel.tree())?;
        if d.lo() > 1 || d.hi() != h {
            return Err(Error::DividendOutsideHorizon {
                lo: d.lo(),
                hi: d.hi(),
                horizon: h,
            });
        }
        let d0 = d.at(0).map_or(0.0, |f| f[0]);
        let mut flows: Vec<Vec<f64>> = (1..=h)
            .map(|n| d.field(n).map(<[f64]>::to_vec))
            .collect::<Result<_>>()?;
        if let Some(last) = flows.last_mut() {
            last.iter_mut().for_each(|v| *v += self.redemption);
        }
        Ok((d0, flows))
    }
}

/// `E_i[sum_{n=i+1}^{H} pi_n D_n]` on `[0, H]` by backward induction, where
/// `flows[n - 1]` holds `D_n`.
fn discounted_tail(
    kernel: &PricingKernel,
    flows: &[Vec<f64>],
    terminal: Vec<f64>,
) -> Vec<Vec<f64>> {
    let tree = kernel.tree();
    let h = kernel.horizon();
    let mut out = vec![terminal];
    for n in (1..=h).rev() {
        let pi = kernel.at(n);
        let next = out.last().expect("non-empty");
        let integrand: Vec<f64> = pi
            .iter()
            .zip(&flows[n - 1])
            .zip(next)
            .map(|((p, d), w)| p * d + w)
            .collect();
        out.push(tree.expect_one_step(&integrand, n));
    }
    out.reverse();
    out
}

/// `S_i = E_i[sum_{n=i+1}^{H} pi_n D_n] / pi_i`, with `S_H = 0`.
pub fn price_fundamental(kernel: &PricingKernel, asset: &DividendAsset) -> Result<AdaptedProcess> {
    let (_, flows) = asset.cash_flows(kernel)?;
    let h = kernel.horizon();
    let tail = discounted_tail(kernel, &flows, vec![0.0; kernel.tree().width(h)]);
    Ok(per_unit_kernel(kernel, tail))
}

fn per_unit_kernel(kernel: &PricingKernel, fields: Vec<Vec<f64>>) -> AdaptedProcess {
    AdaptedProcess::from_fields(
        0,
        fields
            .into_iter()
            .enumerate()
            .map(|(i, f)| f.iter().zip(kernel.at(i)).map(|(w, p)| w / p).collect())
            .collect(),
    )
}

/// Cumulative deflated dividends `F_i = sum_{n<=i} pi_n D_n` along each path.
fn deflated_gains(kernel: &PricingKernel, d0: f64, flows: &[Vec<f64>]) -> AdaptedProcess {
    let tree = kernel.tree();
    let mut fields = vec![vec![kernel.at(0)[0] * d0]];
    for n in 1..=kernel.horizon() {
        let pi = kernel.at(n);
        let field = tree
            .nodes(n)
            .map(|node| {
                let k = tree.parent(node).expect("non-root").index;
                fields[n - 1][k] + pi[node.index] * flows[n - 1][node.index]
            })
            .collect();
        fields.push(field);
    }
    AdaptedProcess::from_fields(0, fields)
}

/// `S_i = (E_i[F_H] - F_i) / pi_i`.
pub fn potential_ratio_price(
    kernel: &PricingKernel,
    asset: &DividendAsset,
) -> Result<AdaptedProcess> {
    let (d0, flows) = asset.cash_flows(kernel)?;
    let tree = kernel.tree();
    let h = kernel.horizon();
    let gains = deflated_gains(kernel, d0, &flows);
    let terminal = gains.field(h)?;
    let fields = (0..=h)
        .map(|i| {
            let e = tree.expect_field(terminal, h, i);
            let f = gains.at(i).expect("covers [0, H]");
            e.iter().zip(f).map(|(e, f)| e - f).collect()
        })
        .collect();
    Ok(per_unit_kernel(kernel, fields))
}

/// Split of a quoted value into dividend-backed and never-paid parts.
#[derive(Debug, Clone, Serialize)]
pub struct ValueDecomposition {
    /// `E_i[sum_{n>i} pi_n D_n] / pi_i`.
    pub fundamental: AdaptedProcess,
    /// `m_i = pi_i S_i - E_i[sum_{n>i} pi_n D_n]`; equals `E_i[pi_H S_H]`.
    pub bubble: AdaptedProcess,
    /// `E[pi_H S_H]`.
    pub terminal_value: f64,
    /// `E[pi_j S_j]` for `j = 0..=H`.
    pub transversality: Vec<f64>,
    pub bubble_check: CheckReport,
}

impl ValueDecomposition {
    /// Whether the bubble component vanishes within `tolerance`.
    pub fn is_fundamental(&self, tolerance: f64) -> bool {
        self.bubble.iter().all(|(_, m)| m.abs() <= tolerance)
    }
}

/// Quoted value `S` restricted to `[0, H]`.
fn quoted_value(kernel: &PricingKernel, s: &AdaptedProcess) -> Result<AdaptedProcess> {
    s.ensure_fits(kernel.tree())?;
    s.restrict(0, kernel.horizon())
}

/// Checks that `pi_i S_i + sum_{n<=i} pi_n D_n` is a martingale, then splits
/// `pi_i S_i` into the discounted dividend tail and the bubble martingale.
pub fn decompose_value(
    kernel: &PricingKernel,
    asset: &DividendAsset,
) -> Result<ValueDecomposition> {
    let s = asset.value.as_ref().ok_or(Error::MissingValueProcess)?;
    let s = quoted_value(kernel, s)?;
    ensure_non_negative("value", &s)?;
    let (d0, flows) = asset.cash_flows(kernel)?;
    let tree = kernel.tree();
    let h = kernel.horizon();
    let tol = kernel.tolerance();

    let deflated = kernel.values().zip_with(&s, |p, v| p * v)?;
    let gains = deflated_gains(kernel, d0, &flows);
    let gains_process = deflated.zip_with(&gains, |a, b| a + b)?;
    let axiom = is_martingale(tree, &gains_process, tol)?.named("deflated gains martingale");
    if !axiom.pass {
        return Err(Error::AxiomAViolation(Box::new(axiom)));
    }

    let tail = discounted_tail(kernel, &flows, vec![0.0; tree.width(h)]);
    let bubble = AdaptedProcess::from_fields(
        0,
        (0..=h)
            .map(|i| {
                let pv = deflated.at(i).expect("covers [0, H]");
                pv.iter().zip(&tail[i]).map(|(a, b)| a - b).collect()
            })
            .collect(),
    );
    let fundamental = per_unit_kernel(kernel, tail);
    let mut bubble_check = is_martingale(tree, &bubble, tol)?.named("bubble martingale");
    let (node, min) = bubble.min_node();
    if min < -tol {
        bubble_check.pass = false;
        bubble_check.max_violation = bubble_check.max_violation.max(-min);
        bubble_check.witness = Some(node);
    }
    let transversality: Vec<f64> = (0..=h)
        .map(|j| tree.expect_root(deflated.at(j).expect("covers [0, H]"), j))
        .collect();
    Ok(ValueDecomposition {
        fundamental,
        bubble,
        terminal_value: transversality[h],
        transversality,
        bubble_check,
    })
}

/// Decay of `E[pi_j S_j]` over the horizon.
#[derive(Debug, Clone, Serialize)]
pub struct TransversalityReport {
    /// Passes iff `E[pi_H S_H] <= tolerance`.
    pub report: CheckReport,
    pub sequence: Vec<f64>,
    /// Diagnostic only.
    pub non_increasing: bool,
}

pub fn transversality_check(
    kernel: &PricingKernel,
    s: &AdaptedProcess,
    tolerance: f64,
) -> Result<TransversalityReport> {
    let s = quoted_value(kernel, s)?;
    ensure_non_negative("value", &s)?;
    let tree = kernel.tree();
    let h = kernel.horizon();
    let sequence: Vec<f64> = (0..=h)
        .map(|j| {
            let field: Vec<f64> = kernel
                .at(j)
                .iter()
                .zip(s.at(j).expect("covers [0, H]"))
                .map(|(p, v)| p * v)
                .collect();
            tree.expect_root(&field, j)
        })
        .collect();
    let non_increasing = sequence.windows(2).all(|w| w[1] <= w[0] + tolerance);
    let report = CheckReport::from_violation(
        "transversality",
        sequence[h],
        Some(NodeRef::new(h, 0)),
        tolerance,
    );
    Ok(TransversalityReport {
        report,
        sequence,
        non_increasing,
    })
}

/// `S_i = (E_i[sum_{n>i} pi_n D_n] + c E_i[pi_H]) / (E_i[sum_{n>i} pi_n r_n] + E_i[pi_H])`
/// where `c` is the redemption. The denominator equals `pi_i` when `r` is
/// the kernel's short rate, so `D = r` with `c = 1` prices to one.
pub fn fx_price(
    kernel: &PricingKernel,
    dividends: &AdaptedProcess,
    rate: &AdaptedProcess,
    redemption: f64,
) -> Result<AdaptedProcess> {
    let tree = kernel.tree();
    let h = kernel.horizon();
    let tol = kernel.tolerance();
    let mut legs = Vec::with_capacity(2);
    for p in [dividends, rate] {
        p.ensure_fits(tree)?;
        let p = p
            .restrict(1, h)
            .map_err(|_| Error::DividendOutsideHorizon {
                lo: p.lo(),
                hi: p.hi(),
                horizon: h,
            })?;
        let report = is_previsible(tree, &p, tol)?;
        if !report.pass {
            return Err(Error::NotPrevisible(Box::new(report)));
        }
        ensure_non_negative("dividend", &p)?;
        legs.push(
            (1..=h)
                .map(|n| p.at(n).expect("restricted").to_vec())
                .collect::<Vec<_>>(),
        );
    }
    let terminal = |c: f64| kernel.at(h).iter().map(|p| c * p).collect::<Vec<_>>();
    let num = discounted_tail(kernel, &legs[0], terminal(redemption));
    let den = discounted_tail(kernel, &legs[1], terminal(1.0));
    Ok(AdaptedProcess::from_fields(
        0,
        num.iter()
            .zip(&den)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x / y).collect())
            .collect(),
    ))
}
