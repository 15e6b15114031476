//! Potentials V for tilted entry laws e^{-V} dmu.

use super::jet::Jet;
use crate::error::{invalid, Result};
use std::fmt;
use std::sync::Arc;

#[derive(Clone)]
pub enum Potential {
    /// Coefficients a_0, a_1, ... of sum a_j x^j.
    Polynomial(Vec<f64>),
    Callable(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Potential::Polynomial(c) => write!(f, "Polynomial({c:?})"),
            Potential::Callable(_) => write!(f, "Callable(..)"),
        }
    }
}

impl Potential {
    pub fn zero() -> Self {
        Potential::Polynomial(vec![0.0])
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Potential::Polynomial(c) => c.iter().rev().fold(0.0, |acc, a| acc * x + a),
            Potential::Callable(f) => f(x),
        }
    }

    pub fn jet(&self, x: Jet) -> Option<Jet> {
        match self {
            Potential::Polynomial(c) => Some(
                c.iter()
                    .rev()
                    .fold(Jet::constant(0.0), |acc, a| acc * x + *a),
            ),
            Potential::Callable(_) => None,
        }
    }

    pub fn is_polynomial(&self) -> bool {
        matches!(self, Potential::Polynomial(_))
    }

    /// Parse sums of terms like `x^4/10`, `0.5*x^2`, `-x`, `3`.
    pub fn parse(text: &str) -> Result<Self> {
        let s: String = text.chars().filter(|c| !c.is_whitespace()).collect();
        if s.is_empty() {
            return invalid("empty potential");
        }
        let mut coeffs = vec![0.0; 1];
        let mut terms: Vec<String> = Vec::new();
        let mut cur = String::new();
        let chars: Vec<char> = s.chars().collect();
        for (i, &ch) in chars.iter().enumerate() {
            let exponent_sign = i > 0 && matches!(chars[i - 1], 'e' | 'E');
            if (ch == '+' || ch == '-') && !cur.is_empty() && !exponent_sign {
                terms.push(std::mem::take(&mut cur));
            }
            cur.push(ch);
        }
        terms.push(cur);
        for term in terms {
            let (deg, coef) = parse_term(&term)?;
            if coeffs.len() <= deg {
                coeffs.resize(deg + 1, 0.0);
            }
            coeffs[deg] += coef;
        }
        Ok(Potential::Polynomial(coeffs))
    }
}

fn parse_number(s: &str, term: &str) -> Result<f64> {
    s.parse::<f64>()
        .or_else(|_| invalid(format!("cannot parse `{s}` in potential term `{term}`")))
}

fn parse_term(term: &str) -> Result<(usize, f64)> {
    let (sign, body) = match term.strip_prefix('-') {
        Some(rest) => (-1.0, rest),
        None => (1.0, term.strip_prefix('+').unwrap_or(term)),
    };
    let (num_part, denom) = match body.split_once('/') {
        Some((a, b)) => (a, parse_number(b, term)?),
        None => (body, 1.0),
    };
    if denom == 0.0 {
        return invalid(format!("zero denominator in `{term}`"));
    }
    let (coef, deg) = if let Some(pos) = num_part.find('x') {
        let pre = num_part[..pos].trim_end_matches('*');
        let post = &num_part[pos + 1..];
        let coef = if pre.is_empty() { 1.0 } else { parse_number(pre, term)? };
        let deg = if post.is_empty() {
            1
        } else if let Some(p) = post.strip_prefix('^') {
            p.parse::<usize>()
                .or_else(|_| invalid(format!("bad exponent in `{term}`")))?
        } else {
            return invalid(format!("unexpected `{post}` in `{term}`"));
        };
        (coef, deg)
    } else {
        (parse_number(num_part, term)?, 0)
    };
    Ok((deg, sign * coef / denom))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_common_forms() {
        let p = Potential::parse("x^4/10").unwrap();
        assert!((p.eval(2.0) - 1.6).abs() < 1e-15);
        let q = Potential::parse("0.5*x^2 - x + 3").unwrap();
        assert!((q.eval(2.0) - 3.0).abs() < 1e-15);
        let r = Potential::parse("-x^3/20 + 1e-3").unwrap();
        assert!((r.eval(1.0) + 0.05 - 1e-3).abs() < 1e-15);
        assert!(Potential::parse("x^a").is_err());
        assert!(Potential::parse("").is_err());
    }

    #[test]
    fn jet_matches_value() {
        let p = Potential::parse("x^3/20 + x").unwrap();
        let j = p.jet(Jet::variable(1.5)).unwrap();
        let d = j.derivatives();
        assert!((d[0] - p.eval(1.5)).abs() < 1e-15);
        assert!((d[1] - (3.0 * 2.25 / 20.0 + 1.0)).abs() < 1e-14);
        assert!((d[3] - 6.0 / 20.0).abs() < 1e-14);
    }
}
