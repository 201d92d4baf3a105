use alloc::string::String;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Block of the saddle-point system, used to locate numerical failures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Block {
    DisplacementPlus,
    DisplacementMinus,
    Multiplier,
}

impl fmt::Display for Block {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Block::DisplacementPlus => f.write_str("displacement block A+"),
            Block::DisplacementMinus => f.write_str("displacement block A-"),
            Block::Multiplier => f.write_str("multiplier block (coupling rank deficient)"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    InvalidDomain(&'static str),
    ZeroSubdivisions,
    UnsupportedDegree(u8),
    PointOutsideElement,
    /// The level set does not split the domain into two non-empty sides.
    InvalidCrack(&'static str),
    /// No part of the interface is tagged as the artificial extension.
    EmptyInterface,
    InvalidCouple(String),
    InvalidArgument(String),
    NotPositiveDefinite(Block),
    SingularBlock(Block),
    /// The Uzawa search direction lies in the kernel of the coupling.
    ZeroStepDenominator { iteration: usize },
    Unsupported(&'static str),
    NegativeMetric(f64),
    ZeroNorm(&'static str),
    DegenerateTriangle { index: usize },
    IndexOutOfRange { triangle: usize },
    NonManifoldEdge { a: usize, b: usize },
    NonOrientable { triangle: usize },
    Disconnected { unreached: usize },
    Factorization(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidDomain(why) => write!(f, "invalid domain: {why}"),
            Error::ZeroSubdivisions => f.write_str("mesh needs at least one subdivision per direction"),
            Error::UnsupportedDegree(k) => write!(f, "unsupported element degree {k}"),
            Error::PointOutsideElement => f.write_str("point lies outside the reference triangle"),
            Error::InvalidCrack(why) => write!(f, "invalid crack description: {why}"),
            Error::EmptyInterface => f.write_str("the artificial interface carries no quadrature mass"),
            Error::InvalidCouple(s) => write!(f, "invalid element couple: {s}"),
            Error::InvalidArgument(s) => write!(f, "invalid argument: {s}"),
            Error::NotPositiveDefinite(b) => write!(f, "{b} is not positive definite"),
            Error::SingularBlock(b) => write!(f, "singular saddle-point system: {b}"),
            Error::ZeroStepDenominator { iteration } => {
                write!(f, "zero step-size denominator at Uzawa iteration {iteration}")
            }
            Error::Unsupported(s) => write!(f, "unsupported: {s}"),
            Error::NegativeMetric(v) => write!(f, "negative error metric {v:e}"),
            Error::ZeroNorm(what) => write!(f, "zero reference norm for {what}"),
            Error::DegenerateTriangle { index } => write!(f, "triangle {index} is degenerate"),
            Error::IndexOutOfRange { triangle } => {
                write!(f, "triangle {triangle} references a missing vertex")
            }
            Error::NonManifoldEdge { a, b } => {
                write!(f, "edge ({a}, {b}) is shared by more than two triangles")
            }
            Error::NonOrientable { triangle } => {
                write!(f, "surface is not orientable (conflict at triangle {triangle})")
            }
            Error::Disconnected { unreached } => {
                write!(f, "surface is not edge-connected ({unreached} triangles unreached)")
            }
            Error::Factorization(s) => write!(f, "factorization failed: {s}"),
        }
    }
}

impl core::error::Error for Error {}
