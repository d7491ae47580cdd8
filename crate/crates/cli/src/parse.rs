//! Recursive-descent parser for operator and coefficient expressions.
//!
//! ```text
//! expr   := term ('+' term)*
//! term   := factor ('*' factor)*
//! factor := INT | 'd[' ints ']' | 'th^[' ints ']' | 'u^[' ints ']' | '(' expr ')'
//! ```

use std::fmt;

use logdm_core::{AElement, AMonomial, Chart, Error, MultiIndex, Result, SignedMultiIndex, TDOperator};

/// A parsed expression in normal form.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Value {
    Op(TDOperator),
    Elem(AElement),
}

impl Value {
    /// Elements are reported as such when no ∂ survives normalization.
    pub fn from_op(op: TDOperator) -> Value {
        match op_to_element(&op) {
            Some(x) => Value::Elem(x),
            None => Value::Op(op),
        }
    }

    pub fn into_op(self, chart: Chart) -> TDOperator {
        match self {
            Value::Op(op) => op,
            Value::Elem(x) => TDOperator::coeff(chart, &x),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Op(op) => write!(f, "{op}"),
            Value::Elem(x) => write!(f, "{x}"),
        }
    }
}

/// The coefficient part of an operator without ∂'s.
pub fn op_to_element(op: &TDOperator) -> Option<AElement> {
    let chart = op.chart();
    let mut x = chart.zero();
    for (m, k, c) in op.terms() {
        if !k.is_zero() {
            return None;
        }
        x.add_term(m.clone(), c);
    }
    Some(x)
}

pub fn parse_expr(text: &str, chart: Chart) -> Result<Value> {
    Ok(Value::from_op(parse_operator(text, chart)?))
}

pub fn parse_operator(text: &str, chart: Chart) -> Result<TDOperator> {
    let mut p = Parser { src: text.chars().collect(), pos: 0, chart };
    let v = p.expr()?;
    p.skip_ws();
    if p.pos < p.src.len() {
        return Err(p.expected("'+', '*' or end of input"));
    }
    Ok(v)
}

/// Parses a bare coordinate list such as `[1,0]`.
pub fn parse_index(text: &str, r: usize) -> Result<MultiIndex> {
    let mut p = Parser { src: text.chars().collect(), pos: 0, chart: Chart::base(dummy_ctx(r)?) };
    p.skip_ws();
    p.eat('[')?;
    let v = p.naturals(r)?;
    p.skip_ws();
    if p.pos < p.src.len() {
        return Err(p.expected("end of input"));
    }
    Ok(v)
}

fn dummy_ctx(r: usize) -> Result<logdm_core::LevelContext> {
    logdm_core::LevelContext::new(2, 0, r)
}

struct Parser {
    src: Vec<char>,
    pos: usize,
    chart: Chart,
}

impl Parser {
    fn expected(&self, what: &str) -> Error {
        Error::SyntaxError { position: self.pos, expected: what.to_string() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: char) -> Result<()> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.expected(&format!("'{c}'")))
        }
    }

    fn expr(&mut self) -> Result<TDOperator> {
        let mut acc = self.term()?;
        while self.peek() == Some('+') {
            self.pos += 1;
            acc = acc.add(&self.term()?)?;
        }
        Ok(acc)
    }

    fn term(&mut self) -> Result<TDOperator> {
        let mut acc = self.factor()?;
        while self.peek() == Some('*') {
            self.pos += 1;
            acc = acc.mul(&self.factor()?)?;
        }
        Ok(acc)
    }

    fn factor(&mut self) -> Result<TDOperator> {
        let chart = self.chart;
        let r = chart.r();
        match self.peek() {
            Some(c) if c.is_ascii_digit() => {
                let n = self.integer_mod_p();
                Ok(TDOperator::one(chart).scale(n))
            }
            Some('(') => {
                self.pos += 1;
                let v = self.expr()?;
                self.eat(')')?;
                Ok(v)
            }
            Some('d') => {
                self.pos += 1;
                self.eat('[')?;
                let k = self.naturals(r)?;
                Ok(TDOperator::d(chart, &k))
            }
            Some('t') => {
                let start = self.pos;
                self.keyword("th^[")?;
                let j = self.integers(r)?;
                self.monomial(start, AMonomial::theta(j))
            }
            Some('u') => {
                let start = self.pos;
                self.keyword("u^[")?;
                let a = self.naturals(r)?;
                self.monomial(start, AMonomial::u(a))
            }
            _ => Err(self.expected("integer, 'd[', 'th^[', 'u^[' or '('")),
        }
    }

    fn monomial(&self, start: usize, mono: AMonomial) -> Result<TDOperator> {
        if !self.chart.admits(&mono) {
            return Err(Error::SyntaxError {
                position: start,
                expected: "a monomial of this chart".into(),
            });
        }
        Ok(TDOperator::term(self.chart, mono, MultiIndex::zeros(self.chart.r()), 1))
    }

    fn keyword(&mut self, word: &str) -> Result<()> {
        self.skip_ws();
        for c in word.chars() {
            if self.src.get(self.pos) != Some(&c) {
                return Err(self.expected(&format!("'{word}'")));
            }
            self.pos += 1;
        }
        Ok(())
    }

    fn integer_mod_p(&mut self) -> u32 {
        let p = self.chart.p() as u64;
        let mut v = 0u64;
        while let Some(d) = self.src.get(self.pos).and_then(|c| c.to_digit(10)) {
            v = (v * 10 + d as u64) % p;
            self.pos += 1;
        }
        v as u32
    }

    fn signed(&mut self) -> Result<i64> {
        self.skip_ws();
        let neg = self.src.get(self.pos) == Some(&'-');
        if neg {
            self.pos += 1;
        }
        let start = self.pos;
        let mut v: i64 = 0;
        while let Some(d) = self.src.get(self.pos).and_then(|c| c.to_digit(10)) {
            v = match v.checked_mul(10).and_then(|x| x.checked_add(d as i64)) {
                Some(x) if x <= u32::MAX as i64 => x,
                _ => {
                    self.pos = start;
                    return Err(self.expected("an integer of at most 32 bits"));
                }
            };
            self.pos += 1;
        }
        if self.pos == start {
            return Err(self.expected("integer"));
        }
        Ok(if neg { -v } else { v })
    }

    /// Comma-separated list closed by ']' (the '[' is already consumed).
    fn list(&mut self) -> Result<Vec<(usize, i64)>> {
        let mut out = Vec::new();
        if self.peek() == Some(']') {
            self.pos += 1;
            return Ok(out);
        }
        loop {
            self.skip_ws();
            let at = self.pos;
            out.push((at, self.signed()?));
            match self.peek() {
                Some(',') => self.pos += 1,
                Some(']') => {
                    self.pos += 1;
                    return Ok(out);
                }
                _ => return Err(self.expected("',' or ']'")),
            }
        }
    }

    fn integers(&mut self, r: usize) -> Result<SignedMultiIndex> {
        let v = self.list()?;
        if v.len() != r {
            return Err(Error::ArityError { expected: r, found: v.len() });
        }
        Ok(SignedMultiIndex::new(&v.iter().map(|x| x.1).collect::<Vec<_>>()))
    }

    fn naturals(&mut self, r: usize) -> Result<MultiIndex> {
        let v = self.list()?;
        if v.len() != r {
            return Err(Error::ArityError { expected: r, found: v.len() });
        }
        let mut out = Vec::with_capacity(r);
        for (at, x) in v {
            if x < 0 {
                return Err(Error::SyntaxError { position: at, expected: "non-negative integer".into() });
            }
            out.push(x as u32);
        }
        Ok(MultiIndex::new(&out))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use logdm_core::LevelContext;

    fn base(p: u32, m: u32, r: usize) -> Chart {
        Chart::base(LevelContext::new(p, m, r).unwrap())
    }

    #[test]
    fn normalizes_and_reduces() {
        let c = base(2, 1, 1);
        assert_eq!(parse_expr("d[1]*d[1]", c).unwrap().to_string(), "d[1]");
        assert_eq!(parse_expr("th^[0]", c).unwrap().to_string(), "1");
        let v = parse_expr("d[4]*th^[1] + 2*d[3]", base(2, 0, 1)).unwrap();
        assert!(!v.to_string().contains("d[3]"));
    }

    #[test]
    fn positions_and_arity() {
        let c = base(3, 0, 2);
        assert_eq!(
            parse_expr("d[1,0] + ", c),
            Err(Error::SyntaxError { position: 9, expected: "integer, 'd[', 'th^[', 'u^[' or '('".into() })
        );
        assert_eq!(parse_expr("u^[1]", c), Err(Error::ArityError { expected: 2, found: 1 }));
        assert!(matches!(parse_expr("d[-1,0]", c), Err(Error::SyntaxError { position: 2, .. })));
        assert!(matches!(parse_expr("(d[1,0]", c), Err(Error::SyntaxError { position: 7, .. })));
        assert!(matches!(parse_expr("th[1,0]", c), Err(Error::SyntaxError { position: 2, .. })));
    }

    #[test]
    fn whitespace_is_ignored() {
        let c = base(3, 1, 1);
        assert_eq!(parse_expr(" u^[ 2 ] * th^[-1]*d[ 3 ]", c), parse_expr("u^[2]*th^[-1]*d[3]", c));
    }

    #[test]
    fn index_lists() {
        assert_eq!(parse_index("[1, 2]", 2).unwrap(), MultiIndex::new(&[1, 2]));
        assert!(parse_index("[1]", 2).is_err());
    }
}
