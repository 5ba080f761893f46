//! Exact decimal amounts stored as scaled integers.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign};

use serde::{Serialize, Serializer};

/// Parses an unsigned-or-signed decimal literal into an integer scaled by
/// `10^decimals`, rounding half away from zero on extra fractional digits.
fn parse_scaled(text: &str, decimals: u32) -> Option<i128> {
    let t = text.trim();
    let (neg, body) = match t.as_bytes().first()? {
        b'-' => (true, &t[1..]),
        b'+' => (false, &t[1..]),
        _ => (false, t),
    };
    let (int_part, frac_part) = match body.split_once('.') {
        Some((i, f)) => (i, f),
        None => (body, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.bytes().all(|b| b.is_ascii_digit()) || !frac_part.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let mut acc: i128 = 0;
    for b in int_part.bytes() {
        acc = acc.checked_mul(10)?.checked_add((b - b'0') as i128)?;
    }
    let frac = frac_part.as_bytes();
    for k in 0..decimals as usize {
        let d = frac.get(k).map(|b| (b - b'0') as i128).unwrap_or(0);
        acc = acc.checked_mul(10)?.checked_add(d)?;
    }
    if let Some(&next) = frac.get(decimals as usize) {
        if next >= b'5' {
            acc = acc.checked_add(1)?;
        }
    }
    Some(if neg { -acc } else { acc })
}

fn format_scaled(v: i128, decimals: u32, trim: bool) -> String {
    let scale = 10i128.pow(decimals);
    let sign = if v < 0 { "-" } else { "" };
    let a = v.unsigned_abs();
    let int = a / scale as u128;
    let frac = a % scale as u128;
    if decimals == 0 {
        return format!("{sign}{int}");
    }
    let mut f = format!("{frac:0width$}", width = decimals as usize);
    if trim {
        while f.ends_with('0') {
            f.pop();
        }
        if f.is_empty() {
            return format!("{sign}{int}");
        }
    }
    format!("{sign}{int}.{f}")
}

/// Monetary amount in integer cents.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Money(i128);

impl Money {
    pub const ZERO: Money = Money(0);

    pub fn from_cents(cents: i128) -> Self {
        Money(cents)
    }

    pub fn cents(self) -> i128 {
        self.0
    }

    pub fn parse(text: &str) -> Option<Self> {
        parse_scaled(text, 2).map(Money)
    }

    /// Rounds a floating amount in USD to the nearest cent.
    pub fn from_usd_f64(usd: f64) -> Self {
        Money((usd * 100.0).round() as i128)
    }

    pub fn to_f64(self) -> f64 {
        self.0 as f64 / 100.0
    }

    pub fn is_negative(self) -> bool {
        self.0 < 0
    }
}

impl fmt::Display for Money {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_scaled(self.0, 2, false))
    }
}

impl Serialize for Money {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl Add for Money {
    type Output = Money;
    fn add(self, rhs: Money) -> Money {
        Money(self.0 + rhs.0)
    }
}

impl AddAssign for Money {
    fn add_assign(&mut self, rhs: Money) {
        self.0 += rhs.0;
    }
}

impl Sum for Money {
    fn sum<I: Iterator<Item = Money>>(iter: I) -> Money {
        iter.fold(Money::ZERO, Add::add)
    }
}

/// Physical quantity in millionths of a unit.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Quantity(i128);

impl Quantity {
    pub const ZERO: Quantity = Quantity(0);
    const DECIMALS: u32 = 6;

    pub fn from_micros(m: i128) -> Self {
        Quantity(m)
    }

    pub fn micros(self) -> i128 {
        self.0
    }

    pub fn parse(text: &str) -> Option<Self> {
        parse_scaled(text, Self::DECIMALS).map(Quantity)
    }

    pub fn from_f64(q: f64) -> Self {
        Quantity((q * 1e6).round() as i128)
    }

    pub fn to_f64(self) -> f64 {
        self.0 as f64 / 1e6
    }

    pub fn is_negative(self) -> bool {
        self.0 < 0
    }

    pub fn is_positive(self) -> bool {
        self.0 > 0
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_scaled(self.0, Self::DECIMALS, true))
    }
}

impl Add for Quantity {
    type Output = Quantity;
    fn add(self, rhs: Quantity) -> Quantity {
        Quantity(self.0 + rhs.0)
    }
}
