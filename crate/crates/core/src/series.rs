//! Price ingestion and the price <-> log-return conversions.

use std::io::Read;

use crate::error::{Error, Result};

/// Ordered, strictly positive price quotes. Index 0 is the origin price.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    quotes: Vec<f64>,
}

/// Ordered log-returns `r(i) = ln(p(i) / p(i-1))`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnsSeries {
    values: Vec<f64>,
}

/// Which column of a delimited file holds the price.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ColumnSelector {
    Index(usize),
    Name(String),
}

impl Default for ColumnSelector {
    fn default() -> Self {
        ColumnSelector::Index(0)
    }
}

impl std::str::FromStr for ColumnSelector {
    type Err = std::convert::Infallible;

    /// Digits select by zero-based index, anything else by header name.
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s.parse::<usize>() {
            Ok(i) => ColumnSelector::Index(i),
            Err(_) => ColumnSelector::Name(s.to_string()),
        })
    }
}

impl PriceSeries {
    /// Validates positivity of every quote. Row numbers in errors are 1-based.
    pub fn new(quotes: Vec<f64>) -> Result<Self> {
        for (i, &q) in quotes.iter().enumerate() {
            if !(q.is_finite() && q > 0.0) {
                return Err(Error::BadRow {
                    row: i + 1,
                    message: format!("price must be a positive number, got {q}"),
                });
            }
        }
        Ok(Self { quotes })
    }

    pub fn quotes(&self) -> &[f64] {
        &self.quotes
    }

    pub fn len(&self) -> usize {
        self.quotes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.quotes.is_empty()
    }

    /// `p(0)`; `None` for an empty series.
    pub fn origin(&self) -> Option<f64> {
        self.quotes.first().copied()
    }
}

impl ReturnsSeries {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteReturn(i));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn sniff_delimiter(text: &str) -> u8 {
    let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
    if first.contains('\t') {
        b'\t'
    } else {
        b','
    }
}

/// Reads one price column from comma- or tab-separated text.
///
/// The delimiter is taken from the first non-empty line. A header row is
/// assumed when the selected field of the first row does not parse as a
/// number. Every other column is ignored.
pub fn parse_price_csv<R: Read>(mut source: R, column: &ColumnSelector) -> Result<PriceSeries> {
    let mut text = String::new();
    source.read_to_string(&mut text)?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(sniff_delimiter(&text))
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let mut quotes = Vec::new();
    let mut index = match column {
        ColumnSelector::Index(i) => Some(*i),
        ColumnSelector::Name(_) => None,
    };
    let mut first = true;
    for record in reader.records() {
        let record = record?;
        let row = record.position().map_or(quotes.len() + 1, |p| p.line() as usize);
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        if first {
            first = false;
            let header_like = match column {
                ColumnSelector::Index(i) => record.get(*i).map_or(true, |f| f.parse::<f64>().is_err()),
                ColumnSelector::Name(_) => true,
            };
            if header_like {
                if let ColumnSelector::Name(name) = column {
                    index = record.iter().position(|f| f.eq_ignore_ascii_case(name));
                    if index.is_none() {
                        return Err(Error::MissingColumn(name.clone()));
                    }
                }
                continue;
            }
        }
        let idx = index.unwrap_or(0);
        let field = record.get(idx).ok_or_else(|| Error::BadRow {
            row,
            message: format!("missing column {idx}"),
        })?;
        let value: f64 = field.parse().map_err(|_| Error::BadRow {
            row,
            message: format!("cannot parse price {field:?}"),
        })?;
        if !(value.is_finite() && value > 0.0) {
            return Err(Error::BadRow {
                row,
                message: format!("price must be positive, got {value}"),
            });
        }
        quotes.push(value);
    }
    if quotes.len() < 2 {
        return Err(Error::SeriesTooShort {
            needed: 2,
            got: quotes.len(),
        });
    }
    Ok(PriceSeries { quotes })
}

pub fn compute_returns(prices: &PriceSeries) -> Result<ReturnsSeries> {
    if prices.len() < 2 {
        return Err(Error::SeriesTooShort {
            needed: 2,
            got: prices.len(),
        });
    }
    let values = prices
        .quotes
        .windows(2)
        .map(|p| (p[1] / p[0]).ln())
        .collect();
    ReturnsSeries::new(values)
}

/// Inverts [`compute_returns`] via `p(i) = p(i-1) exp(r(i))`.
pub fn reconstruct_prices(returns: &ReturnsSeries, origin: f64) -> Result<PriceSeries> {
    if !(origin.is_finite() && origin > 0.0) {
        return Err(Error::NonPositiveOrigin(origin));
    }
    let mut quotes = Vec::with_capacity(returns.len() + 1);
    quotes.push(origin);
    let mut p = origin;
    for r in &returns.values {
        p *= r.exp();
        quotes.push(p);
    }
    PriceSeries::new(quotes)
}
