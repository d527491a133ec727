//! Error type shared by every module of the engine.

use thiserror::Error;

use crate::filtration::{CheckReport, NodeRef};

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    // -- tree construction ------------------------------------------------
    #[error("transition probability {value} at {node} is not strictly positive")]
    NonPositiveProbability { node: NodeRef, value: f64 },

    #[error("child probabilities of {node} sum to {sum}, expected 1")]
    ProbabilitySumMismatch { node: NodeRef, sum: f64 },

    #[error("time labels must be strictly increasing (violated at depth {depth})")]
    NonIncreasingTimes { depth: usize },

    #[error("malformed tree: {0}")]
    MalformedTree(String),

    // -- processes and conditional expectation ----------------------------
    #[error(
        "process shape mismatch at depth {depth}: tree has {expected} nodes, process has {found}"
    )]
    ShapeMismatch {
        depth: usize,
        expected: usize,
        found: usize,
    },

    #[error("non-finite value at {node}")]
    NonFiniteValue { node: NodeRef },

    #[error("conditioning depth {to} exceeds target depth {from}")]
    DepthOrderViolation { from: usize, to: usize },

    #[error("process is defined on depths [{lo}, {hi}], not at depth {depth}")]
    ProcessNotDefinedAtDepth { depth: usize, lo: usize, hi: usize },

    #[error("depth range contains no adjacent pair")]
    EmptyRange,

    #[error("previsibility is vacuous at depth 0; the range must start at depth 1")]
    RangeStartsAtRoot,

    // -- kernels ------------------------------------------------------------
    #[error("pricing kernel value {value} at {node} is not strictly positive")]
    NonPositiveKernel { node: NodeRef, value: f64 },

    #[error("pricing kernel is not a strict supermartingale: {0}")]
    NotStrictSupermartingale(Box<CheckReport>),

    #[error("a pricing kernel needs a valid horizon of at least one period (got {horizon})")]
    HorizonTooShort { horizon: usize },

    #[error("schedule is not strictly decreasing at index {index}")]
    ScheduleNotDecreasing { index: usize },

    #[error("schedule value {value} at index {index} is not strictly positive")]
    NonPositiveSchedule { index: usize, value: f64 },

    #[error("schedule has {found} entries, {needed} required")]
    ScheduleLength { needed: usize, found: usize },

    #[error("process is not a martingale: {0}")]
    NotAMartingale(Box<CheckReport>),

    #[error("martingale value {value} at {node} is not strictly positive")]
    NonPositiveMartingale { node: NodeRef, value: f64 },

    #[error("process must start at 0, found {value} at the root")]
    InitialValueNotZero { value: f64 },

    #[error("process is not strictly increasing at {node}")]
    NotStrictlyIncreasing { node: NodeRef },

    #[error("kernel vanishes inside the horizon: increment at {node} is not positive")]
    ZeroKernelInsideHorizon { node: NodeRef },

    // -- bonds --------------------------------------------------------------
    #[error("maturity pair ({i}, {j}) outside 0 <= i < j <= {horizon}")]
    IndexOutOfRange { i: usize, j: usize, horizon: usize },

    // -- assets -------------------------------------------------------------
    #[error("dividends defined on [{lo}, {hi}] must cover [1, {horizon}] and end at the horizon")]
    DividendOutsideHorizon {
        lo: usize,
        hi: usize,
        horizon: usize,
    },

    #[error("negative {what} {value} at {node}")]
    NegativeValue {
        what: &'static str,
        node: NodeRef,
        value: f64,
    },

    #[error("asset has no value process to decompose")]
    MissingValueProcess,

    #[error("value/dividend pair violates the deflated-gains martingale condition: {0}")]
    AxiomAViolation(Box<CheckReport>),

    #[error("process is not previsible: {0}")]
    NotPrevisible(Box<CheckReport>),

    // -- models -------------------------------------------------------------
    #[error("p*u + (1-p)*d = {expectation}, expected 1")]
    MartingaleConditionViolated { expectation: f64 },

    #[error("tree is not binary at {node}")]
    TreeNotBinary { node: NodeRef },

    #[error("branch probability at {node} is {found}, expected {expected}")]
    BranchProbabilityMismatch {
        node: NodeRef,
        expected: f64,
        found: f64,
    },

    #[error("offspring law puts mass {mass} on zero offspring")]
    ExtinctionMassPresent { mass: f64 },

    #[error("invalid offspring law: {0}")]
    InvalidOffspringLaw(String),

    #[error("population tree would exceed {cap} nodes")]
    SupportTooLarge { cap: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    // -- serialization --------------------------------------------------------
    #[error("invalid document: {0}")]
    InvalidDocument(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
