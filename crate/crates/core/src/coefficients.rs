//! Coefficients of the fourth-degree reception polynomials `h_i(xi, phi)`.
//!
//! Each of the four polynomials has one coefficient per exponent pair
//! `(j, k)` with `j + k <= 4`, where `j` is the exponent of the
//! communication density and `k` the exponent of the transmission range.

use alloc::format;
use alloc::string::String;
use core::fmt::Write;

use crate::error::{Error, Result};

/// Number of polynomials `h_1..h_4`.
pub const POLY_COUNT: usize = 4;

/// Number of `(j, k)` terms per polynomial.
pub const TERM_COUNT: usize = 15;

/// Exponent pairs `(density, range)` in the column order used throughout
/// the crate and in the plain-text table format.
pub const TERMS: [(u8, u8); TERM_COUNT] = [
    (0, 0),
    (1, 0),
    (2, 0),
    (3, 0),
    (4, 0),
    (3, 1),
    (2, 1),
    (2, 2),
    (1, 1),
    (1, 2),
    (1, 3),
    (0, 1),
    (0, 2),
    (0, 3),
    (0, 4),
];

const DEFAULT_VALUES: [[f64; TERM_COUNT]; POLY_COUNT] = [
    [
        0.0209865,
        -9.66304e-07,
        -1.72786e-11,
        5.09506e-17,
        -7.91921e-23,
        3.16577e-20,
        2.13587e-14,
        -5.05716e-17,
        4.00928e-09,
        -1.88707e-11,
        3.25406e-14,
        0.000418109,
        -4.30875e-06,
        1.00775e-08,
        -7.32254e-12,
    ],
    [
        2.24743,
        7.84884e-07,
        2.28533e-10,
        -5.89802e-16,
        3.55262e-22,
        4.07120e-19,
        -2.66510e-13,
        8.64273e-17,
        -7.31274e-08,
        2.98549e-10,
        -3.24982e-13,
        0.00498750,
        -7.22232e-06,
        1.69755e-08,
        -2.94381e-11,
    ],
    [
        2.56426,
        2.82287e-05,
        -7.09939e-10,
        1.34371e-15,
        -3.01956e-22,
        -1.85451e-18,
        1.02847e-12,
        1.80250e-16,
        1.56259e-07,
        -8.50944e-10,
        7.59094e-13,
        -0.0227008,
        7.50391e-05,
        -1.81469e-07,
        2.02182e-10,
    ],
    [
        2.41146,
        -9.32859e-05,
        6.77403e-10,
        -9.64188e-16,
        3.69652e-23,
        1.85043e-18,
        -1.13894e-16,
        -4.05333e-16,
        -2.56738e-08,
        6.24415e-10,
        -3.57571e-13,
        0.0191490,
        -6.92678e-05,
        1.79917e-07,
        -2.07263e-10,
    ],
];

/// A coefficient whose exponent was repaired during transcription.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RepairedEntry {
    pub poly: u8,
    pub density_exp: u8,
    pub range_exp: u8,
    pub as_printed: f64,
    pub adopted: f64,
}

/// Entries of the compiled-in table that differ from the printed source.
///
/// `h4 (1,0)` is printed without the minus sign in its exponent. `h4 (0,2)`
/// is printed two decades too small; with the repaired value the `xi = 0`
/// polynomials reduce to the Nakagami m=3 single-sender curve
/// `(h1..h4) ~ (0, 3, 0, 4.5)`.
pub const REPAIRED_ENTRIES: [RepairedEntry; 2] = [
    RepairedEntry {
        poly: 4,
        density_exp: 1,
        range_exp: 0,
        as_printed: -9.32859e05,
        adopted: -9.32859e-05,
    },
    RepairedEntry {
        poly: 4,
        density_exp: 0,
        range_exp: 2,
        as_printed: -6.92678e-07,
        adopted: -6.92678e-05,
    },
];

/// One `(i, j, k) -> value` entry of a [`CoefficientTable`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coefficient {
    pub poly: u8,
    pub density_exp: u8,
    pub range_exp: u8,
    pub value: f64,
}

/// The 4 x 15 coefficient table. Always complete: every `(i, j, k)` with
/// `1 <= i <= 4`, `j + k <= 4` is present exactly once.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoefficientTable {
    values: [[f64; TERM_COUNT]; POLY_COUNT],
}

impl Default for CoefficientTable {
    fn default() -> Self {
        Self::published()
    }
}

/// Column of `(j, k)` in [`TERMS`], if it is a valid exponent pair.
pub fn term_index(density_exp: u8, range_exp: u8) -> Option<usize> {
    TERMS
        .iter()
        .position(|&(j, k)| j == density_exp && k == range_exp)
}

impl CoefficientTable {
    /// The compiled-in fitted coefficients.
    pub const fn published() -> Self {
        Self {
            values: DEFAULT_VALUES,
        }
    }

    pub const fn from_rows(values: [[f64; TERM_COUNT]; POLY_COUNT]) -> Self {
        Self { values }
    }

    pub fn rows(&self) -> &[[f64; TERM_COUNT]; POLY_COUNT] {
        &self.values
    }

    pub fn get(&self, poly: u8, density_exp: u8, range_exp: u8) -> Option<f64> {
        if !(1..=4).contains(&poly) {
            return None;
        }
        term_index(density_exp, range_exp).map(|t| self.values[poly as usize - 1][t])
    }

    /// Copy of the table with one coefficient replaced.
    pub fn with_value(
        &self,
        poly: u8,
        density_exp: u8,
        range_exp: u8,
        value: f64,
    ) -> Result<Self> {
        if !(1..=4).contains(&poly) {
            return Err(Error::InvalidPolynomialIndex(poly));
        }
        let t = term_index(density_exp, range_exp).ok_or_else(|| {
            Error::InvalidParameters(format!("no term ({density_exp},{range_exp})"))
        })?;
        let mut out = *self;
        out.values[poly as usize - 1][t] = value;
        Ok(out)
    }

    /// All 60 entries in row-major `(i, TERMS order)`.
    pub fn entries(&self) -> impl Iterator<Item = Coefficient> + '_ {
        (0..POLY_COUNT).flat_map(move |p| {
            TERMS.iter().enumerate().map(move |(t, &(j, k))| Coefficient {
                poly: p as u8 + 1,
                density_exp: j,
                range_exp: k,
                value: self.values[p][t],
            })
        })
    }

    /// Parses the plain-text format: one `i j k value` row per line,
    /// whitespace or comma separated, `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut values = [[0.0; TERM_COUNT]; POLY_COUNT];
        let mut seen = [[false; TERM_COUNT]; POLY_COUNT];
        let mut count = 0usize;

        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| Error::TableParse {
                line: lineno + 1,
                message,
            };
            let fields: alloc::vec::Vec<&str> = line
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .collect();
            if fields.len() != 4 {
                return Err(err(format!("expected 4 fields, found {}", fields.len())));
            }
            let poly: u8 = fields[0]
                .parse()
                .map_err(|_| err(format!("bad index i `{}`", fields[0])))?;
            let j: u8 = fields[1]
                .parse()
                .map_err(|_| err(format!("bad exponent j `{}`", fields[1])))?;
            let k: u8 = fields[2]
                .parse()
                .map_err(|_| err(format!("bad exponent k `{}`", fields[2])))?;
            let value: f64 = fields[3]
                .parse()
                .map_err(|_| err(format!("bad value `{}`", fields[3])))?;
            if !(1..=4).contains(&poly) {
                return Err(err(format!("index i={poly} outside 1..=4")));
            }
            let t = term_index(j, k).ok_or_else(|| err(format!("no term ({j},{k}); need j+k<=4")))?;
            if !value.is_finite() {
                return Err(err(format!("non-finite value {value}")));
            }
            let p = poly as usize - 1;
            if seen[p][t] {
                return Err(err(format!("duplicate entry ({poly},{j},{k})")));
            }
            seen[p][t] = true;
            values[p][t] = value;
            count += 1;
        }

        if count != POLY_COUNT * TERM_COUNT {
            return Err(Error::TableParse {
                line: 0,
                message: format!("expected 60 entries, found {count}"),
            });
        }
        Ok(Self { values })
    }

    /// Serializes to the format accepted by [`CoefficientTable::parse`].
    /// Values use the shortest round-trip representation.
    pub fn to_text(&self) -> String {
        let mut out = String::from("# i j k value\n");
        for c in self.entries() {
            let _ = writeln!(
                out,
                "{} {} {} {:e}",
                c.poly, c.density_exp, c.range_exp, c.value
            );
        }
        out
    }
}
