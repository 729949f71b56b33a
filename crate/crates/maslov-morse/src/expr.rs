//! Tiny expression language for potential entries.
//!
//! Grammar (standard precedence, `^` right-associative, unary minus binds
//! tighter than the base of `^` so `-2^2 = 4`):
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := power (('*' | '/') power)*
//! power   := unary ('^' power)?
//! unary   := '-' unary | primary
//! primary := number | 'x' | func '(' expr ')' | '(' expr ')'
//! func    := sin | cos | exp | sqrt
//! ```

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Number(f64),
    Variable,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
    Exp(Box<Expr>),
    Sqrt(Box<Expr>),
}

impl Expr {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Expr::Number(v) => *v,
            Expr::Variable => x,
            Expr::Neg(e) => -e.eval(x),
            Expr::Add(a, b) => a.eval(x) + b.eval(x),
            Expr::Sub(a, b) => a.eval(x) - b.eval(x),
            Expr::Mul(a, b) => a.eval(x) * b.eval(x),
            Expr::Div(a, b) => a.eval(x) / b.eval(x),
            Expr::Pow(a, b) => a.eval(x).powf(b.eval(x)),
            Expr::Sin(e) => e.eval(x).sin(),
            Expr::Cos(e) => e.eval(x).cos(),
            Expr::Exp(e) => e.eval(x).exp(),
            Expr::Sqrt(e) => e.eval(x).sqrt(),
        }
    }
}

/// Parse failure with the byte offset of the first offending character and
/// the tokens that would have been accepted there.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntaxError {
    pub offset: usize,
    pub expected: String,
}

impl std::fmt::Display for SyntaxError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "syntax error at byte {}: expected {}",
            self.offset, self.expected
        )
    }
}

impl std::error::Error for SyntaxError {}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

pub fn parse_expression(src: &str) -> Result<Expr, SyntaxError> {
    let mut p = Parser {
        src: src.as_bytes(),
        pos: 0,
    };
    let expr = p.expr()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(SyntaxError {
            offset: p.pos,
            expected: "operator or end of input".into(),
        });
    }
    Ok(expr)
}

impl<'a> Parser<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expr(&mut self) -> Result<Expr, SyntaxError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Some(b'-') => {
                    self.pos += 1;
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, SyntaxError> {
        let mut lhs = self.power()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.power()?));
                }
                Some(b'/') => {
                    self.pos += 1;
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.power()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn power(&mut self) -> Result<Expr, SyntaxError> {
        let base = self.unary()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            // Right associative.
            let exponent = self.power()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn unary(&mut self) -> Result<Expr, SyntaxError> {
        if self.peek() == Some(b'-') {
            self.pos += 1;
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr, SyntaxError> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(SyntaxError {
                        offset: self.pos,
                        expected: "')'".into(),
                    });
                }
                self.pos += 1;
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => self.name(),
            _ => Err(SyntaxError {
                offset: self.pos,
                expected: "number, 'x', function, '-' or '('".into(),
            }),
        }
    }

    fn number(&mut self) -> Result<Expr, SyntaxError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_digit() || self.src[self.pos] == b'.')
        {
            self.pos += 1;
        }
        // Optional exponent.
        if self.pos < self.src.len() && (self.src[self.pos] == b'e' || self.src[self.pos] == b'E') {
            let mark = self.pos;
            self.pos += 1;
            if self.pos < self.src.len()
                && (self.src[self.pos] == b'+' || self.src[self.pos] == b'-')
            {
                self.pos += 1;
            }
            if self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
            } else {
                self.pos = mark;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        text.parse::<f64>()
            .map(Expr::Number)
            .map_err(|_| SyntaxError {
                offset: start,
                expected: "a numeric literal".into(),
            })
    }

    fn name(&mut self) -> Result<Expr, SyntaxError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_alphanumeric() {
            self.pos += 1;
        }
        let word = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        if word == "x" {
            return Ok(Expr::Variable);
        }
        let ctor: fn(Box<Expr>) -> Expr = match word {
            "sin" => Expr::Sin,
            "cos" => Expr::Cos,
            "exp" => Expr::Exp,
            "sqrt" => Expr::Sqrt,
            _ => {
                return Err(SyntaxError {
                    offset: start,
                    expected: "'x' or one of sin, cos, exp, sqrt".into(),
                })
            }
        };
        if self.peek() != Some(b'(') {
            return Err(SyntaxError {
                offset: self.pos,
                expected: "'(' after function name".into(),
            });
        }
        self.pos += 1;
        let inner = self.expr()?;
        if self.peek() != Some(b')') {
            return Err(SyntaxError {
                offset: self.pos,
                expected: "')'".into(),
            });
        }
        self.pos += 1;
        Ok(ctor(Box::new(inner)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eval(src: &str, x: f64) -> f64 {
        parse_expression(src).unwrap().eval(x)
    }

    #[test]
    fn twenty_hand_checked_values() {
        let pi = std::f64::consts::PI;
        let cases: [(&str, f64, f64); 20] = [
            ("-22", 0.3, -22.0),
            ("10*sin(x)", 0.0, 0.0),
            ("-13+12*x^2", 1.0, -1.0),
            ("1+2*3", 0.0, 7.0),
            ("(1+2)*3", 0.0, 9.0),
            ("2^3^2", 0.0, 512.0),
            ("-2^2", 0.0, 4.0),
            ("2^-1", 0.0, 0.5),
            ("7-3-2", 0.0, 2.0),
            ("12/4/3", 0.0, 1.0),
            ("sqrt(49)", 0.0, 7.0),
            ("exp(0)", 0.0, 1.0),
            ("exp(1)", 0.0, std::f64::consts::E),
            ("cos(x)", pi, -1.0),
            ("sin(x)^2+cos(x)^2", 0.7351, 1.0),
            ("1.5e2", 0.0, 150.0),
            ("2.5e-1", 0.0, 0.25),
            ("x*x - 2*x + 1", 3.0, 4.0),
            ("-x^2", 2.0, 4.0),
            ("1/(2+cos(x))", 0.0, 1.0 / 3.0),
        ];
        for (src, x, want) in cases {
            let got = eval(src, x);
            assert!(
                (got - want).abs() <= 1e-12 * (1.0 + want.abs()),
                "{src} at {x}: {got} vs {want}"
            );
        }
    }

    #[test]
    fn error_positions_and_expected_sets() {
        let err = parse_expression("1+").unwrap_err();
        assert_eq!(err.offset, 2);
        assert!(err.expected.contains("number"));

        let err = parse_expression("sin 3").unwrap_err();
        assert_eq!(err.offset, 4);
        assert!(err.expected.contains("("));

        let err = parse_expression("1+tan(x)").unwrap_err();
        assert_eq!(err.offset, 2);
        assert!(err.expected.contains("sin"));

        let err = parse_expression("(1+2").unwrap_err();
        assert_eq!(err.offset, 4);

        let err = parse_expression("1 2").unwrap_err();
        assert_eq!(err.offset, 2);
        assert!(err.expected.contains("operator"));
    }

    #[test]
    fn whitespace_is_insignificant() {
        assert_eq!(eval("  1 +  2 * x ", 4.0), 9.0);
    }
}
