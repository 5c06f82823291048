use core::fmt;

use alloc::string::String;

/// Errors raised by the synthesis, network and simulation routines.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    ZeroDenominator,
    DegreeOverflow { degree: usize },
    PoleAtQueryPoint,
    InverseOfZero,
    ImproperTransferFunction,
    UnstableDiscretization { magnitude: f64 },
    InvalidTimeStep,
    DimensionMismatch { expected: usize, found: usize },
    InvalidSchedule,
    NonPositiveDroop,
    NegativeInertia,
    InvalidGain { mu: f64 },
    InvalidTimeConstant { tau: f64 },
    InvalidBandSplit { tau_low: f64, tau_high: f64 },
    OverSubscribed { sum: f64 },
    EmptyFleet,
    DuplicateDevice(String),
    MissingFactor(String),
    ChannelMismatch,
    ImproperAfterAugmentation,
    BandwidthViolation { device: String, tau: f64, tau_dc: f64 },
    UnrealizedDevice(String),
    NotAllForming(String),
    DisconnectedGraph,
    InvalidEdge { from: String, to: String },
    UnknownNode(String),
    SingularInteriorBlock,
    ImproperDevice(String),
    DegenerateSum,
    AlgebraicLoopUnstable { loop_gain: f64 },
    ZeroWeightSum,
    AllCapacitiesZero,
    CapacityExceedsRating { p_capacity: f64, s_rating: f64 },
    UnknownDevice(String),
    ZeroImpedance,
    NonPositiveVoltage,
    HeterogeneousRatioWithStrictMode,
    InvalidRange { min: f64, max: f64 },
    NoFormingDevice,
    MultipleFormingAtBus(String),
    MissingChannel(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::ZeroDenominator => write!(f, "denominator is the zero polynomial"),
            Error::DegreeOverflow { degree } => {
                write!(
                    f,
                    "polynomial degree {degree} exceeds the cap of {}",
                    crate::lti::MAX_DEGREE
                )
            }
            Error::PoleAtQueryPoint => write!(f, "transfer function has a pole at the query point"),
            Error::InverseOfZero => write!(f, "cannot invert the zero transfer function"),
            Error::ImproperTransferFunction => {
                write!(f, "transfer function is improper; roll it off before realization")
            }
            Error::UnstableDiscretization { magnitude } => write!(
                f,
                "discretized pole magnitude {magnitude} is outside the unit circle; reduce dt"
            ),
            Error::InvalidTimeStep => write!(f, "time step must be positive and match the input spacing"),
            Error::DimensionMismatch { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
            Error::InvalidSchedule => write!(f, "schedule breakpoints must be strictly increasing"),
            Error::NonPositiveDroop => write!(f, "droop coefficients must be positive"),
            Error::NegativeInertia => write!(f, "inertia constant must be non-negative"),
            Error::InvalidGain { mu } => write!(f, "DC gain {mu} outside [0, 1]"),
            Error::InvalidTimeConstant { tau } => write!(f, "time constant {tau} must be positive"),
            Error::InvalidBandSplit { tau_low, tau_high } => write!(
                f,
                "band-pass split needs tau_low > tau_high (got {tau_low} <= {tau_high})"
            ),
            Error::OverSubscribed { sum } => {
                write!(f, "low-pass DC gains sum to {sum} > 1; DC-gain condition cannot hold")
            }
            Error::EmptyFleet => write!(f, "fleet has no devices"),
            Error::DuplicateDevice(n) => write!(f, "duplicate device name `{n}`"),
            Error::MissingFactor(n) => write!(f, "device `{n}` has no factor for the channel"),
            Error::ChannelMismatch => write!(f, "factors belong to different channels"),
            Error::ImproperAfterAugmentation => {
                write!(f, "reference model is still improper after roll-off augmentation")
            }
            Error::BandwidthViolation { device, tau, tau_dc } => write!(
                f,
                "device `{device}`: participation time constant {tau} is faster than its resource ({tau_dc})"
            ),
            Error::UnrealizedDevice(n) => write!(f, "device `{n}` has no realized reference model"),
            Error::NotAllForming(n) => write!(f, "device `{n}` is not grid-forming"),
            Error::DisconnectedGraph => write!(f, "network graph is not connected"),
            Error::InvalidEdge { from, to } => write!(f, "invalid edge {from} -> {to}"),
            Error::UnknownNode(n) => write!(f, "unknown node `{n}`"),
            Error::SingularInteriorBlock => write!(f, "eliminated block of the network matrix is singular"),
            Error::ImproperDevice(n) => write!(f, "device `{n}` carries an improper reference model"),
            Error::DegenerateSum => write!(f, "aggregate admittance sum is identically zero"),
            Error::AlgebraicLoopUnstable { loop_gain } => {
                write!(f, "static voltage loop gain {loop_gain} has magnitude >= 1")
            }
            Error::ZeroWeightSum => write!(f, "weights sum to zero"),
            Error::AllCapacitiesZero => write!(f, "all low-pass devices report zero capacity"),
            Error::CapacityExceedsRating { p_capacity, s_rating } => {
                write!(f, "active capacity {p_capacity} outside [0, rating {s_rating}]")
            }
            Error::UnknownDevice(n) => write!(f, "unknown device `{n}`"),
            Error::ZeroImpedance => write!(f, "line impedance magnitude is zero"),
            Error::NonPositiveVoltage => write!(f, "voltage magnitudes must be positive"),
            Error::HeterogeneousRatioWithStrictMode => write!(f, "heterogeneous R/X ratios require Monte Carlo mode"),
            Error::InvalidRange { min, max } => write!(f, "invalid range [{min}, {max}]"),
            Error::NoFormingDevice => write!(f, "no forming device present"),
            Error::MultipleFormingAtBus(b) => write!(f, "more than one forming device at bus `{b}`"),
            Error::MissingChannel(c) => write!(f, "missing channel `{c}`"),
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
