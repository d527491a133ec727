//! Batch front end: parse a model configuration, build the model, and run
//! `check`, `curve`, `price` or `decompose`.
//!
//! Exit status: 0 when everything passes, 1 when a check fails or the model
//! is rejected, 2 on usage or configuration errors.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::assets::{
    decompose_value, fx_price, potential_ratio_price, price_fundamental, transversality_check,
    DividendAsset,
};
use crate::bonds::{
    bond_surface, fh_extract, fh_reconstruct, rational_bond_closed_form, BondSurface,
};
use crate::error::Error;
use crate::filtration::{
    is_previsible, is_strict_supermartingale, relative_error, AdaptedProcess, CheckReport,
    FiltrationTree, NodeRef, ViolationTracker,
};
use crate::io::{
    curve_csv, format_number, price_csv, process_to_document, round_json, tree_from_document,
    Decimal, TreeDocument,
};
use crate::kernel::{
    doob_decomposition, kernel_from_increasing, kernel_from_process, kernel_rational,
    multiplicative_decomposition, positive_return_from_doob, short_rate, PositiveReturnAsset,
    PricingKernel, DEFAULT_TOLERANCE, STRICT_MARGIN,
};
use crate::models::{
    gen_binomial_martingale, gen_branching_martingale, gen_schedule, MartingaleSpec, OffspringLaw,
    ScheduleKind, DEFAULT_NODE_CAP,
};

pub const EXIT_OK: u8 = 0;
pub const EXIT_CHECK_FAILED: u8 = 1;
pub const EXIT_USAGE: u8 = 2;

// ---------------------------------------------------------------------------
// Configuration document
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Omitted when the martingale generator builds its own tree.
    #[serde(default)]
    pub tree: Option<TreeSpec>,
    pub kernel: KernelSpec,
    #[serde(default)]
    pub assets: Vec<AssetSpec>,
    #[serde(default)]
    pub tolerance: Option<f64>,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    /// Default valuation depth for `curve`.
    #[serde(default)]
    pub from: Option<usize>,
    /// Default asset for `price`.
    #[serde(default)]
    pub asset: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TreeSpec {
    Binomial {
        depth: usize,
        p: Decimal,
        #[serde(default)]
        times: Option<Vec<f64>>,
    },
    /// Same child count and probabilities for every node of a depth.
    Branching {
        counts: Vec<usize>,
        #[serde(default)]
        probabilities: Option<Vec<Vec<Decimal>>>,
        #[serde(default)]
        times: Option<Vec<f64>>,
    },
    Explicit(TreeDocument),
}

/// Per-depth node values starting at depth `lo`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProcessValues {
    #[serde(default)]
    pub lo: usize,
    pub values: Vec<Vec<f64>>,
}

impl ProcessValues {
    fn build(&self, tree: &FiltrationTree) -> crate::Result<AdaptedProcess> {
        AdaptedProcess::new(tree, self.lo, self.values.clone())
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelSpec {
    Rational {
        alpha: ScheduleKind,
        beta: ScheduleKind,
        martingale: MartingaleSpec,
    },
    FromIncreasing {
        g: ProcessValues,
    },
    Explicit {
        values: ProcessValues,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AssetSpec {
    /// Pays the short rate and redeems at par.
    FloatingRateNote { id: String },
    /// The natural money-market account as a zero-dividend asset.
    MoneyMarket { id: String },
    Dividend {
        id: String,
        dividends: ProcessValues,
        #[serde(default)]
        redemption: f64,
        #[serde(default)]
        value: Option<ProcessValues>,
    },
    /// Foreign leg priced in the symmetric form against the domestic short rate.
    Fx {
        id: String,
        foreign_rate: ProcessValues,
        #[serde(default = "one")]
        redemption: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl AssetSpec {
    pub fn id(&self) -> &str {
        match self {
            Self::FloatingRateNote { id }
            | Self::MoneyMarket { id }
            | Self::Dividend { id, .. }
            | Self::Fx { id, .. } => id,
        }
    }
}

// ---------------------------------------------------------------------------
// Errors and outputs
// ---------------------------------------------------------------------------

#[derive(Debug)]
pub enum CliError {
    /// Unreadable or malformed configuration; exit 2.
    ConfigParse { path: String, message: String },
    /// Bad flag combination or unknown id; exit 2.
    Usage(String),
    /// Model rejected while building; exit 1.
    Model(Error),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::ConfigParse { path, message } => {
                write!(f, "ConfigParseError in {path}: {message}")
            }
            Self::Usage(msg) => write!(f, "usage error: {msg}"),
            Self::Model(e) => write!(f, "model rejected: {e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::ConfigParse { .. } | Self::Usage(_) => EXIT_USAGE,
            Self::Model(_) => EXIT_CHECK_FAILED,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        Self::Model(e)
    }
}

/// Result of a command: the document for `--out`/stdout, summary lines for
/// stderr, and the exit status.
#[derive(Debug, Clone, PartialEq)]
pub struct CommandOutput {
    pub document: String,
    pub summary: Vec<String>,
    pub exit_code: u8,
}

pub fn parse_config(text: &str, path: &str) -> Result<ModelConfig, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::ConfigParse {
        path: path.to_owned(),
        message: e.to_string(),
    })
}

// ---------------------------------------------------------------------------
// Model assembly
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub enum KernelSource {
    Rational {
        alpha: Vec<f64>,
        beta: Vec<f64>,
        martingale: AdaptedProcess,
    },
    FromIncreasing {
        g: AdaptedProcess,
        asset: PositiveReturnAsset,
    },
    Explicit,
}

#[derive(Debug, Clone)]
pub enum ResolvedAsset {
    Dividend(DividendAsset),
    Fx {
        foreign_rate: AdaptedProcess,
        redemption: f64,
    },
}

#[derive(Debug, Clone)]
pub struct Model {
    pub kernel: PricingKernel,
    pub source: KernelSource,
    pub assets: Vec<(String, ResolvedAsset)>,
}

fn build_tree(spec: &TreeSpec) -> crate::Result<FiltrationTree> {
    match spec {
        TreeSpec::Binomial { depth, p, times } => {
            let rows = vec![vec![p.0, 1.0 - p.0]; *depth];
            FiltrationTree::from_branching(&vec![2; *depth], Some(&rows), times.clone())
        }
        TreeSpec::Branching {
            counts,
            probabilities,
            times,
        } => {
            let rows: Option<Vec<Vec<f64>>> = probabilities
                .as_ref()
                .map(|p| p.iter().map(|r| r.iter().map(|d| d.0).collect()).collect());
            FiltrationTree::from_branching(counts, rows.as_deref(), times.clone())
        }
        TreeSpec::Explicit(doc) => tree_from_document(doc),
    }
}

/// Kernel values that failed validation, with the failure as a report.
fn kernel_failure(e: &Error) -> CheckReport {
    match e {
        Error::NotStrictSupermartingale(report) => {
            (**report).clone().named("kernel: NotStrictSupermartingale")
        }
        Error::NonPositiveKernel { node, value } => {
            CheckReport::from_margin("kernel: NonPositiveKernel", *value, Some(*node), 0.0)
        }
        other => CheckReport {
            name: format!("kernel: {other}"),
            pass: false,
            max_violation: f64::INFINITY,
            witness: None,
            tolerance: 0.0,
            margin: None,
        },
    }
}

pub fn build_model(config: &ModelConfig, tolerance: f64) -> Result<Model, CliError> {
    let usage = |m: String| CliError::Usage(m);
    let (tree, source) = match &config.kernel {
        KernelSpec::Rational {
            alpha,
            beta,
            martingale,
        } => {
            martingale.validate()?;
            let (tree, n) =
                match martingale {
                    MartingaleSpec::Branching {
                        offspring,
                        initial,
                        depth,
                    } => {
                        if config.tree.is_some() {
                            return Err(usage(
                                "a branching martingale generates its own tree; omit `tree`".into(),
                            ));
                        }
                        let law = OffspringLaw::new(offspring.iter().map(|(&k, &p)| (k, p)))?;
                        let model =
                            gen_branching_martingale(*depth, &law, *initial, DEFAULT_NODE_CAP)?;
                        (model.tree, model.martingale)
                    }
                    MartingaleSpec::MultiplicativeBinomial {
                        up,
                        down,
                        p,
                        initial,
                    } => {
                        let tree =
                            build_tree(config.tree.as_ref().ok_or_else(|| {
                                usage("`tree` is required for this kernel".into())
                            })?)?;
                        let n = gen_binomial_martingale(&tree, *up, *down, *p, *initial)?;
                        (tree, n)
                    }
                    MartingaleSpec::Constant { value } => {
                        let tree =
                            build_tree(config.tree.as_ref().ok_or_else(|| {
                                usage("`tree` is required for this kernel".into())
                            })?)?;
                        let n = AdaptedProcess::constant(&tree, 0, tree.depth(), *value);
                        (tree, n)
                    }
                };
            let h = n.hi();
            let alpha = gen_schedule(alpha, h)?.values().to_vec();
            let beta = gen_schedule(beta, h)?.values().to_vec();
            (
                tree,
                KernelSource::Rational {
                    alpha,
                    beta,
                    martingale: n,
                },
            )
        }
        KernelSpec::FromIncreasing { g } => {
            let tree = build_tree(
                config
                    .tree
                    .as_ref()
                    .ok_or_else(|| usage("`tree` is required for this kernel".into()))?,
            )?;
            let g = g.build(&tree)?;
            (
                tree,
                KernelSource::FromIncreasing {
                    asset: placeholder_asset(),
                    g,
                },
            )
        }
        KernelSpec::Explicit { .. } => {
            let tree = build_tree(
                config
                    .tree
                    .as_ref()
                    .ok_or_else(|| usage("`tree` is required for this kernel".into()))?,
            )?;
            (tree, KernelSource::Explicit)
        }
    };
    let tree = Arc::new(tree);
    let (kernel, source) = match source {
        KernelSource::Rational {
            alpha,
            beta,
            martingale,
        } => {
            let k = kernel_rational(Arc::clone(&tree), &alpha, &beta, &martingale, tolerance)?;
            (
                k,
                KernelSource::Rational {
                    alpha,
                    beta,
                    martingale,
                },
            )
        }
        KernelSource::FromIncreasing { g, .. } => {
            let (k, asset) = kernel_from_increasing(Arc::clone(&tree), &g, tolerance)?;
            (k, KernelSource::FromIncreasing { g, asset })
        }
        KernelSource::Explicit => {
            let KernelSpec::Explicit { values } = &config.kernel else {
                unreachable!("source matches the kernel config")
            };
            let pi = values.build(&tree)?;
            (
                kernel_from_process(Arc::clone(&tree), pi, tolerance)?,
                KernelSource::Explicit,
            )
        }
    };

    let mut assets = Vec::with_capacity(config.assets.len());
    let mut seen = BTreeMap::new();
    for spec in &config.assets {
        if seen.insert(spec.id().to_owned(), ()).is_some() {
            return Err(usage(format!("duplicate asset id {:?}", spec.id())));
        }
        let resolved = match spec {
            AssetSpec::FloatingRateNote { .. } => {
                ResolvedAsset::Dividend(DividendAsset::floating_rate_note(&kernel))
            }
            AssetSpec::MoneyMarket { .. } => {
                ResolvedAsset::Dividend(DividendAsset::money_market(&kernel))
            }
            AssetSpec::Dividend {
                dividends,
                redemption,
                value,
                ..
            } => {
                let mut asset = DividendAsset::new(&tree, dividends.build(&tree)?, *redemption)?;
                if let Some(v) = value {
                    asset = asset.with_value(&tree, v.build(&tree)?)?;
                }
                ResolvedAsset::Dividend(asset)
            }
            AssetSpec::Fx {
                foreign_rate,
                redemption,
                ..
            } => ResolvedAsset::Fx {
                foreign_rate: foreign_rate.build(&tree)?,
                redemption: *redemption,
            },
        };
        assets.push((spec.id().to_owned(), resolved));
    }
    Ok(Model {
        kernel,
        source,
        assets,
    })
}

// Replaced as soon as the kernel is built.
fn placeholder_asset() -> PositiveReturnAsset {
    let empty = AdaptedProcess::from_fields(0, vec![vec![1.0]]);
    PositiveReturnAsset {
        value: empty.clone(),
        rate: empty.clone(),
        rho: empty,
        martingale_check: CheckReport::from_violation("", 0.0, None, 0.0),
    }
}

// ---------------------------------------------------------------------------
// Check suite
// ---------------------------------------------------------------------------

fn relative_fields(
    name: impl Into<String>,
    pairs: impl IntoIterator<Item = (usize, Vec<f64>, Vec<f64>)>,
    tolerance: f64,
) -> CheckReport {
    let mut tracker = ViolationTracker::new();
    for (depth, a, b) in pairs {
        if a.len() != b.len() {
            tracker.observe(NodeRef::new(depth, 0), f64::INFINITY);
            continue;
        }
        tracker.observe_field(depth, a.iter().zip(&b).map(|(x, y)| relative_error(*x, *y)));
    }
    tracker.finish(name, tolerance)
}

fn failed(name: String, e: &Error) -> CheckReport {
    CheckReport {
        name: format!("{name}: {e}"),
        pass: false,
        max_violation: f64::INFINITY,
        witness: None,
        tolerance: 0.0,
        margin: None,
    }
}

fn push(reports: &mut Vec<CheckReport>, name: &str, result: crate::Result<CheckReport>) {
    match result {
        Ok(r) => reports.push(r.named(name)),
        Err(e) => reports.push(failed(name.to_owned(), &e)),
    }
}

/// Every structural identity for the model's kernel and assets.
pub fn run_checks(model: &Model, tolerance: f64) -> Vec<CheckReport> {
    let k = &model.kernel;
    let tree = k.tree();
    let h = k.horizon();
    let mut reports = Vec::new();

    push(
        &mut reports,
        "kernel: strict supermartingale",
        is_strict_supermartingale(tree, k.values(), STRICT_MARGIN),
    );
    reports.push(k.decay_check().named("kernel: expected value decreasing"));

    let dec = multiplicative_decomposition(k);
    match dec.verify(k) {
        Ok(rs) => {
            for r in rs {
                let name = format!("multiplicative: {}", r.name);
                reports.push(r.named(name));
            }
        }
        Err(e) => reports.push(failed("multiplicative".into(), &e)),
    }
    let rate = short_rate(k);
    let (node, r_min) = rate.min_node();
    reports.push(CheckReport::from_margin(
        "short rate positive",
        r_min,
        Some(node),
        0.0,
    ));

    let surface = bond_surface(k);
    reports.push(
        surface
            .bounds_check()
            .named("bonds: 0 < P < 1, decreasing in maturity"),
    );
    push(
        &mut reports,
        "bonds: P_{i-1,i} = B_{i-1}/B_i",
        surface.previsible_rate_check(&dec.account.balance, tolerance),
    );

    if let KernelSource::Rational {
        alpha,
        beta,
        martingale,
    } = &model.source
    {
        let mut pairs = Vec::new();
        let mut error = None;
        for (i, j, field) in surface.entries() {
            match rational_bond_closed_form(tree, alpha, beta, martingale, i, j, tolerance) {
                Ok(cf) => pairs.push((i, field.to_vec(), cf)),
                Err(e) => error = Some(e),
            }
        }
        reports.push(match error {
            Some(e) => failed("bonds: rational closed form".into(), &e),
            None => relative_fields("bonds: rational closed form", pairs, tolerance),
        });
        // explicit products for B and rho
        let (b_cf, rho_cf) = rational_account_closed_form(tree, alpha, beta, martingale, h);
        reports.push(relative_fields(
            "multiplicative: rational closed-form B",
            (0..=h).map(|d| {
                (
                    d,
                    dec.account.balance.at(d).unwrap_or_default().to_vec(),
                    b_cf.at(d).unwrap_or_default().to_vec(),
                )
            }),
            tolerance,
        ));
        reports.push(relative_fields(
            "multiplicative: rational closed-form rho",
            (0..=h).map(|d| {
                (
                    d,
                    dec.rho.at(d).unwrap_or_default().to_vec(),
                    rho_cf.at(d).unwrap_or_default().to_vec(),
                )
            }),
            tolerance,
        ));
    }

    let family = fh_extract(k);
    match family.verify(k, tolerance) {
        Ok(rs) => reports.extend(rs.into_iter().map(|r| {
            let name = format!("fh: {}", r.name);
            r.named(name)
        })),
        Err(e) => reports.push(failed("fh".into(), &e)),
    }
    let mut pairs = Vec::new();
    for (i, j, field) in surface.entries() {
        if let Ok(p) = fh_reconstruct(&family, i, j) {
            pairs.push((i, p, field.to_vec()));
        }
    }
    reports.push(relative_fields(
        "fh: reconstruction = bond surface",
        pairs,
        tolerance,
    ));

    let doob = doob_decomposition(k);
    reports.push(
        doob.identity_check(k, tolerance)
            .named("doob: finite-horizon identity"),
    );
    push(
        &mut reports,
        "doob: compensator rate form",
        doob.rate_form_check(k, &surface, tolerance),
    );
    if h >= 1 {
        push(
            &mut reports,
            "doob: compensator previsible",
            doob.compensator
                .restrict(1, h)
                .and_then(|a| is_previsible(tree, &a, tolerance)),
        );
    }
    match positive_return_from_doob(k, &surface) {
        Ok(asset) => {
            reports.push(
                asset
                    .martingale_check
                    .clone()
                    .named("doob positive-return: rho_bar martingale"),
            );
            let gains = asset.gains(k);
            reports.push(relative_fields(
                "doob positive-return: gains = compensator",
                (0..=h).map(|d| {
                    (
                        d,
                        gains.at(d).unwrap_or_default().to_vec(),
                        doob.compensator.at(d).unwrap_or_default().to_vec(),
                    )
                }),
                tolerance,
            ));
            reports.push(gains_representation_check(k, &gains, tolerance));
        }
        Err(e) => reports.push(failed("doob positive-return".into(), &e)),
    }

    if let KernelSource::FromIncreasing { g, asset } = &model.source {
        reports.push(
            asset
                .martingale_check
                .clone()
                .named("increasing: rho_bar martingale"),
        );
        let gains = asset.gains(k);
        reports.push(relative_fields(
            "increasing: G roundtrip",
            (0..=h).map(|d| {
                (
                    d,
                    gains.at(d).unwrap_or_default().to_vec(),
                    g.at(d).unwrap_or_default().to_vec(),
                )
            }),
            tolerance,
        ));
    }

    // par floater and FX symmetry hold for every kernel
    let frn = DividendAsset::floating_rate_note(k);
    push(
        &mut reports,
        "frn: unit value",
        price_fundamental(k, &frn)
            .map(|s| unit_value_check(&s, 0, h.saturating_sub(1), 1.0, tolerance)),
    );
    push(
        &mut reports,
        "fx: D = r prices to 1",
        fx_price(k, &rate, &rate, 1.0).map(|s| unit_value_check(&s, 0, h, 1.0, tolerance)),
    );

    for (id, asset) in &model.assets {
        match asset {
            ResolvedAsset::Dividend(asset) => asset_checks(k, id, asset, tolerance, &mut reports),
            ResolvedAsset::Fx {
                foreign_rate,
                redemption,
            } => push(
                &mut reports,
                &format!("asset {id}: fx price"),
                fx_price(k, foreign_rate, &rate, *redemption).map(|s| {
                    let (node, min) = s.min_node();
                    CheckReport::from_margin("", min, Some(node), 0.0)
                }),
            ),
        }
    }
    reports
}

/// `pi_i = E_i[G_H] - G_i + E_i[pi_H]` for cumulative deflated returns `G`.
fn gains_representation_check(
    k: &PricingKernel,
    gains: &AdaptedProcess,
    tolerance: f64,
) -> CheckReport {
    let tree = k.tree();
    let h = k.horizon();
    let residual = k.terminal_residual();
    let g_h = gains.at(h).unwrap_or_default();
    relative_fields(
        "doob positive-return: pi = E[G_H] - G + E[pi_H]",
        (0..=h).map(|i| {
            let e = tree.expect_field(g_h, h, i);
            let g = gains.at(i).unwrap_or_default();
            let res = residual.at(i).unwrap_or_default();
            let rhs = (0..e.len()).map(|n| e[n] - g[n] + res[n]).collect();
            (i, k.at(i).to_vec(), rhs)
        }),
        tolerance,
    )
}

fn unit_value_check(
    s: &AdaptedProcess,
    lo: usize,
    hi: usize,
    target: f64,
    tolerance: f64,
) -> CheckReport {
    let mut tracker = ViolationTracker::new();
    for d in lo..=hi {
        if let Some(f) = s.at(d) {
            tracker.observe_field(d, f.iter().map(|v| (v - target).abs()));
        }
    }
    tracker.finish("", tolerance)
}

/// `B_i = prod (alpha_{n-1} + beta_{n-1} N_{n-1}) / (alpha_n + beta_n N_{n-1})`
/// and `rho_i = rho_0 prod (alpha_n + beta_n N_n) / (alpha_n + beta_n N_{n-1})`
/// along each path.
pub fn rational_account_closed_form(
    tree: &FiltrationTree,
    alpha: &[f64],
    beta: &[f64],
    martingale: &AdaptedProcess,
    horizon: usize,
) -> (AdaptedProcess, AdaptedProcess) {
    let n = |node: NodeRef| martingale.get(node).unwrap_or(f64::NAN);
    let balance = AdaptedProcess::from_fn(tree, 0, horizon, |node| {
        let mut b = 1.0;
        let mut cur = node;
        while let Some(parent) = tree.parent(cur) {
            let d = cur.depth;
            let np = n(parent);
            b *= (alpha[d - 1] + beta[d - 1] * np) / (alpha[d] + beta[d] * np);
            cur = parent;
        }
        b
    });
    let rho = AdaptedProcess::from_fn(tree, 0, horizon, |node| {
        let mut r = alpha[0] + beta[0] * n(NodeRef::ROOT);
        let mut cur = node;
        while let Some(parent) = tree.parent(cur) {
            let d = cur.depth;
            r *= (alpha[d] + beta[d] * n(cur)) / (alpha[d] + beta[d] * n(parent));
            cur = parent;
        }
        r
    });
    (balance, rho)
}

fn asset_checks(
    k: &PricingKernel,
    id: &str,
    asset: &DividendAsset,
    tolerance: f64,
    reports: &mut Vec<CheckReport>,
) {
    let tree = k.tree();
    let fundamental = match price_fundamental(k, asset) {
        Ok(s) => s,
        Err(e) => {
            reports.push(failed(format!("asset {id}: pricing"), &e));
            return;
        }
    };
    match potential_ratio_price(k, asset) {
        Ok(s2) => reports.push(relative_fields(
            format!("asset {id}: fundamental = potential ratio"),
            fundamental
                .fields()
                .map(|(d, f)| (d, f.to_vec(), s2.at(d).unwrap_or_default().to_vec())),
            tolerance,
        )),
        Err(e) => reports.push(failed(format!("asset {id}: potential ratio"), &e)),
    }
    let priced = asset.clone().with_value(tree, fundamental);
    push(
        reports,
        &format!("asset {id}: deflated gains martingale"),
        priced
            .and_then(|a| decompose_value(k, &a))
            .map(|d| d.bubble_check),
    );
    if let Some(value) = &asset.value {
        match decompose_value(k, asset) {
            Ok(dec) => {
                reports.push(
                    dec.bubble_check
                        .clone()
                        .named(format!("asset {id}: bubble martingale")),
                );
                // m vanishes exactly when transversality holds
                let t = transversality_check(k, value, tolerance);
                push(
                    reports,
                    &format!("asset {id}: bubble iff transversality fails"),
                    t.map(|t| {
                        let consistent = dec.is_fundamental(tolerance) == t.report.pass;
                        CheckReport::from_violation(
                            "",
                            if consistent { 0.0 } else { 1.0 },
                            None,
                            0.0,
                        )
                    }),
                );
            }
            Err(e) => reports.push(failed(format!("asset {id}: decomposition"), &e)),
        }
    }
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

fn to_pretty_json(mut value: serde_json::Value) -> String {
    round_json(&mut value);
    let mut s = serde_json::to_string_pretty(&value).expect("serializable");
    s.push('\n');
    s
}

#[derive(Serialize)]
struct CheckDocument<'a> {
    pass: bool,
    passed: usize,
    total: usize,
    checks: &'a [CheckReport],
}

pub fn cmd_check(config: &ModelConfig, tolerance: f64) -> Result<CommandOutput, CliError> {
    let reports = match build_model(config, tolerance) {
        Ok(model) => run_checks(&model, tolerance),
        Err(CliError::Model(e)) => vec![kernel_failure(&e)],
        Err(other) => return Err(other),
    };
    let passed = reports.iter().filter(|r| r.pass).count();
    let all = passed == reports.len();
    let doc = CheckDocument {
        pass: all,
        passed,
        total: reports.len(),
        checks: &reports,
    };
    let document = to_pretty_json(serde_json::to_value(&doc).expect("serializable"));
    let mut summary: Vec<String> = reports.iter().map(ToString::to_string).collect();
    summary.push(format!("{passed}/{} checks passed", reports.len()));
    Ok(CommandOutput {
        document,
        summary,
        exit_code: if all { EXIT_OK } else { EXIT_CHECK_FAILED },
    })
}

pub fn cmd_curve(
    config: &ModelConfig,
    from: Option<usize>,
    tolerance: f64,
) -> Result<CommandOutput, CliError> {
    let model = build_model(config, tolerance)?;
    let from = from.or(config.output.from).unwrap_or(0);
    let surface: BondSurface = bond_surface(&model.kernel);
    Ok(CommandOutput {
        document: curve_csv(&surface, from),
        summary: vec![format!(
            "discount curve from depth {from}, horizon {}",
            surface.horizon()
        )],
        exit_code: EXIT_OK,
    })
}

pub fn cmd_price(
    config: &ModelConfig,
    asset: Option<&str>,
    tolerance: f64,
) -> Result<CommandOutput, CliError> {
    let model = build_model(config, tolerance)?;
    let k = &model.kernel;
    let id = asset
        .map(str::to_owned)
        .or_else(|| config.output.asset.clone())
        .ok_or_else(|| CliError::Usage("--asset is required".into()))?;
    let (_, resolved) = model
        .assets
        .iter()
        .find(|(a, _)| *a == id)
        .ok_or_else(|| CliError::Usage(format!("unknown asset id {id:?}")))?;
    let (price, flag) = match resolved {
        ResolvedAsset::Dividend(asset) => {
            let s = match &asset.value {
                Some(v) => v.restrict(0, k.horizon())?,
                None => price_fundamental(k, asset)?,
            };
            (s, true)
        }
        ResolvedAsset::Fx {
            foreign_rate,
            redemption,
        } => (
            fx_price(k, foreign_rate, &short_rate(k), *redemption)?,
            false,
        ),
    };
    let t = transversality_check(k, &price, tolerance)?;
    let mut summary = vec![format!(
        "asset {id}: E[pi_j S_j] = [{}]",
        t.sequence
            .iter()
            .map(|e| format_number(*e))
            .collect::<Vec<_>>()
            .join(", ")
    )];
    if flag {
        summary.push(if t.report.pass {
            format!("asset {id}: transversality PASS")
        } else {
            format!("asset {id}: transversality FAIL, BUBBLE")
        });
    }
    Ok(CommandOutput {
        document: price_csv(k.tree(), &price, &t.sequence),
        summary,
        exit_code: EXIT_OK,
    })
}

pub fn cmd_decompose(config: &ModelConfig, tolerance: f64) -> Result<CommandOutput, CliError> {
    let model = build_model(config, tolerance)?;
    let k = &model.kernel;
    let tree = k.tree();
    let dec = multiplicative_decomposition(k);
    let checks = dec.verify(k)?;
    let doob = doob_decomposition(k);
    let family = fh_extract(k);
    let doc = |name: &str, p: &AdaptedProcess| {
        serde_json::to_value(process_to_document(tree, Some(name), p)).expect("serializable")
    };
    let fh: Vec<serde_json::Value> = family
        .columns()
        .map(|(n, c)| json!({ "n": n, "column": doc(&format!("m_{n}"), c) }))
        .collect();
    let value = json!({
        "horizon": k.horizon(),
        "kernel": doc("pi", k.values()),
        "money_market": {
            "balance": doc("B", &dec.account.balance),
            "rate": doc("r", &dec.account.rate),
        },
        "rho": doc("rho", &dec.rho),
        "checks": checks,
        "doob": {
            "compensator": doc("A", &doob.compensator),
            "residual": doc("E_i[pi_H]", &doob.residual),
        },
        "fh": fh,
    });
    let all = checks.iter().all(|c| c.pass);
    let mut summary: Vec<String> = checks.iter().map(ToString::to_string).collect();
    summary.push(format!(
        "B at horizon: [{}]",
        dec.account
            .balance
            .at(k.horizon())
            .unwrap_or_default()
            .iter()
            .map(|v| format_number(*v))
            .collect::<Vec<_>>()
            .join(", ")
    ));
    Ok(CommandOutput {
        document: to_pretty_json(value),
        summary,
        exit_code: if all { EXIT_OK } else { EXIT_CHECK_FAILED },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Check,
    Curve,
    Price,
    Decompose,
}

/// Dispatches a command on configuration text.
pub fn execute(
    command: Command,
    config_text: &str,
    config_path: &str,
    from: Option<usize>,
    asset: Option<&str>,
    tolerance: Option<f64>,
) -> Result<CommandOutput, CliError> {
    let config = parse_config(config_text, config_path)?;
    let tolerance = tolerance.or(config.tolerance).unwrap_or(DEFAULT_TOLERANCE);
    if !(tolerance > 0.0 && tolerance.is_finite()) {
        return Err(CliError::Usage(format!(
            "tolerance {tolerance} must be positive"
        )));
    }
    match command {
        Command::Check => cmd_check(&config, tolerance),
        Command::Curve => cmd_curve(&config, from, tolerance),
        Command::Price => cmd_price(&config, asset, tolerance),
        Command::Decompose => cmd_decompose(&config, tolerance),
    }
}
