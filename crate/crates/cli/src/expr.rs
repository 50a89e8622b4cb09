//! Closed-form field expressions over `x, y, z, t`.
//!
//! Grammar: numbers, `pi`, the variables, `+ - * /`, unary minus,
//! parentheses, `sin(..)` and `cos(..)`. Expressions are evaluated on dual
//! numbers in `t`, so every field comes with its exact time derivative.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use thermovi_core::Point;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("column {column}: {message}")]
pub struct ExprError {
    pub column: usize,
    pub message: String,
}

/// Value with its derivative in time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dual {
    pub value: f64,
    pub rate: f64,
}

impl Dual {
    fn constant(value: f64) -> Self {
        Self { value, rate: 0.0 }
    }
}

impl Add for Dual {
    type Output = Dual;
    fn add(self, o: Dual) -> Dual {
        Dual {
            value: self.value + o.value,
            rate: self.rate + o.rate,
        }
    }
}

impl Sub for Dual {
    type Output = Dual;
    fn sub(self, o: Dual) -> Dual {
        Dual {
            value: self.value - o.value,
            rate: self.rate - o.rate,
        }
    }
}

impl Mul for Dual {
    type Output = Dual;
    fn mul(self, o: Dual) -> Dual {
        Dual {
            value: self.value * o.value,
            rate: self.rate * o.value + self.value * o.rate,
        }
    }
}

impl Div for Dual {
    type Output = Dual;
    fn div(self, o: Dual) -> Dual {
        Dual {
            value: self.value / o.value,
            rate: (self.rate * o.value - self.value * o.rate) / (o.value * o.value),
        }
    }
}

impl Neg for Dual {
    type Output = Dual;
    fn neg(self) -> Dual {
        Dual {
            value: -self.value,
            rate: -self.rate,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Var {
    X,
    Y,
    Z,
    T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Func {
    Sin,
    Cos,
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    Var(Var),
    Neg(Box<Node>),
    Bin(char, Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

impl Node {
    fn eval(&self, x: &Point, t: f64) -> Dual {
        match self {
            Node::Num(v) => Dual::constant(*v),
            Node::Var(Var::X) => Dual::constant(x.x),
            Node::Var(Var::Y) => Dual::constant(x.y),
            Node::Var(Var::Z) => Dual::constant(x.z),
            Node::Var(Var::T) => Dual {
                value: t,
                rate: 1.0,
            },
            Node::Neg(a) => -a.eval(x, t),
            Node::Bin(op, a, b) => {
                let (a, b) = (a.eval(x, t), b.eval(x, t));
                match op {
                    '+' => a + b,
                    '-' => a - b,
                    '*' => a * b,
                    _ => a / b,
                }
            }
            Node::Call(f, a) => {
                let a = a.eval(x, t);
                let (s, c) = a.value.sin_cos();
                match f {
                    Func::Sin => Dual {
                        value: s,
                        rate: c * a.rate,
                    },
                    Func::Cos => Dual {
                        value: c,
                        rate: -s * a.rate,
                    },
                }
            }
        }
    }
}

/// A parsed scalar expression.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    source: String,
    root: Node,
}

impl Expr {
    pub fn parse(source: &str) -> Result<Self, ExprError> {
        let mut parser = Parser {
            chars: source.char_indices().collect(),
            pos: 0,
        };
        let root = parser.sum()?;
        parser.skip_ws();
        if let Some(&(i, c)) = parser.chars.get(parser.pos) {
            return Err(ExprError {
                column: i + 1,
                message: format!("unexpected `{c}`"),
            });
        }
        Ok(Self {
            source: source.trim().to_string(),
            root,
        })
    }

    pub fn constant(value: f64) -> Self {
        Self {
            source: format!("{value}"),
            root: Node::Num(value),
        }
    }

    pub fn eval(&self, x: &Point, t: f64) -> Dual {
        self.root.eval(x, t)
    }

    pub fn value(&self, x: &Point, t: f64) -> f64 {
        self.eval(x, t).value
    }

    pub fn rate(&self, x: &Point, t: f64) -> f64 {
        self.eval(x, t).rate
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

/// Comma-separated vector expression; missing trailing components are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorExpr {
    components: Vec<Expr>,
}

impl VectorExpr {
    pub fn parse(source: &str, dim: usize) -> Result<Self, ExprError> {
        let mut components = Vec::new();
        let mut offset = 0;
        for part in source.split(',') {
            let expr = Expr::parse(part).map_err(|e| ExprError {
                column: e.column + offset,
                message: e.message,
            })?;
            components.push(expr);
            offset += part.len() + 1;
        }
        if components.len() != dim {
            return Err(ExprError {
                column: 1,
                message: format!("expected {dim} components, found {}", components.len()),
            });
        }
        Ok(Self { components })
    }

    pub fn value(&self, x: &Point, t: f64) -> Point {
        let mut v = Point::zeros();
        for (i, c) in self.components.iter().enumerate() {
            v[i] = c.value(x, t);
        }
        v
    }

    pub fn rate(&self, x: &Point, t: f64) -> Point {
        let mut v = Point::zeros();
        for (i, c) in self.components.iter().enumerate() {
            v[i] = c.rate(x, t);
        }
        v
    }
}

struct Parser {
    chars: Vec<(usize, char)>,
    pos: usize,
}

impl Parser {
    fn skip_ws(&mut self) {
        while self
            .chars
            .get(self.pos)
            .is_some_and(|(_, c)| c.is_whitespace())
        {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.get(self.pos).map(|&(_, c)| c)
    }

    fn column(&self) -> usize {
        self.chars.get(self.pos).map_or_else(
            || self.chars.last().map_or(1, |&(i, c)| i + c.len_utf8() + 1),
            |&(i, _)| i + 1,
        )
    }

    fn error(&self, message: impl Into<String>) -> ExprError {
        ExprError {
            column: self.column(),
            message: message.into(),
        }
    }

    fn sum(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.product()?;
        while let Some(op @ ('+' | '-')) = self.peek() {
            self.pos += 1;
            let rhs = self.product()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn product(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.unary()?;
        while let Some(op @ ('*' | '/')) = self.peek() {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node, ExprError> {
        match self.peek() {
            Some('-') => {
                self.pos += 1;
                Ok(Node::Neg(Box::new(self.unary()?)))
            }
            Some('+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.atom(),
        }
    }

    fn atom(&mut self) -> Result<Node, ExprError> {
        match self.peek() {
            None => Err(self.error("unexpected end of expression")),
            Some('(') => {
                self.pos += 1;
                let inner = self.sum()?;
                self.expect(')')?;
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == '.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                let column = self.column();
                while self
                    .chars
                    .get(self.pos)
                    .is_some_and(|(_, c)| c.is_ascii_alphanumeric() || *c == '_')
                {
                    self.pos += 1;
                }
                let name: String = self.chars[start..self.pos]
                    .iter()
                    .map(|&(_, c)| c)
                    .collect();
                let func = match name.as_str() {
                    "x" => return Ok(Node::Var(Var::X)),
                    "y" => return Ok(Node::Var(Var::Y)),
                    "z" => return Ok(Node::Var(Var::Z)),
                    "t" => return Ok(Node::Var(Var::T)),
                    "pi" => return Ok(Node::Num(std::f64::consts::PI)),
                    "sin" => Func::Sin,
                    "cos" => Func::Cos,
                    _ => {
                        return Err(ExprError {
                            column,
                            message: format!("unknown name `{name}`"),
                        })
                    }
                };
                self.expect('(')?;
                let arg = self.sum()?;
                self.expect(')')?;
                Ok(Node::Call(func, Box::new(arg)))
            }
            Some(c) => Err(self.error(format!("unexpected `{c}`"))),
        }
    }

    fn number(&mut self) -> Result<Node, ExprError> {
        let start = self.pos;
        let column = self.column();
        let mut prev = ' ';
        while let Some(&(_, c)) = self.chars.get(self.pos) {
            let exponent_sign = (c == '+' || c == '-') && (prev == 'e' || prev == 'E');
            if c.is_ascii_digit() || c == '.' || c == 'e' || c == 'E' || exponent_sign {
                prev = c;
                self.pos += 1;
            } else {
                break;
            }
        }
        let text: String = self.chars[start..self.pos]
            .iter()
            .map(|&(_, c)| c)
            .collect();
        text.parse().map(Node::Num).map_err(|_| ExprError {
            column,
            message: format!("invalid number `{text}`"),
        })
    }

    fn expect(&mut self, want: char) -> Result<(), ExprError> {
        if self.peek() == Some(want) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(format!("expected `{want}`")))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn at(x: f64, y: f64, z: f64) -> Point {
        Point::new(x, y, z)
    }

    #[test]
    fn arithmetic_and_precedence() {
        let e = Expr::parse("1 + 2 * 3 - 4 / 2").unwrap();
        assert_eq!(e.value(&Point::zeros(), 0.0), 5.0);
        let e = Expr::parse("-(x - 2*y) * z").unwrap();
        assert_eq!(e.value(&at(1.0, 2.0, 3.0), 0.0), 9.0);
        let e = Expr::parse("1.5e-1 + 2E2").unwrap();
        assert_eq!(e.value(&Point::zeros(), 0.0), 200.15);
    }

    #[test]
    fn time_derivatives_are_exact() {
        let e = Expr::parse("10*t + 40/3*sin(0.3*t)").unwrap();
        for &t in &[0.0, 0.7, 2.0] {
            let d = e.eval(&Point::zeros(), t);
            assert!((d.value - (10.0 * t + 40.0 / 3.0 * (0.3 * t).sin())).abs() < 1e-14);
            assert!((d.rate - (10.0 + 4.0 * (0.3 * t).cos())).abs() < 1e-14);
        }
        let e = Expr::parse("cos(2*x + 3*t) / (1 + t)").unwrap();
        let (x, t) = (0.4, 1.3);
        let h = 1e-6;
        let fd = (e.value(&at(x, 0.0, 0.0), t + h) - e.value(&at(x, 0.0, 0.0), t - h)) / (2.0 * h);
        assert!((fd - e.rate(&at(x, 0.0, 0.0), t)).abs() < 1e-8);
    }

    #[test]
    fn vector_components() {
        let v = VectorExpr::parse("x - 0.25*t, y - 1.5*t, z + 0.8*t", 3).unwrap();
        assert_eq!(v.rate(&Point::zeros(), 1.0), Point::new(-0.25, -1.5, 0.8));
        assert_eq!(v.value(&at(1.0, 1.0, 1.0), 2.0), Point::new(0.5, -2.0, 2.6));
        assert!(VectorExpr::parse("x, y", 3).is_err());
    }

    #[test]
    fn errors_point_at_the_problem() {
        let err = Expr::parse("1 + foo").unwrap_err();
        assert_eq!(err.column, 5);
        assert!(Expr::parse("sin x").is_err());
        assert!(Expr::parse("(1 + 2").is_err());
        assert!(Expr::parse("1 2").is_err());
        assert!(Expr::parse("").is_err());
        let err = VectorExpr::parse("x, y +", 2).unwrap_err();
        assert_eq!(err.column, 7);
    }
}
