//! Arithmetic expressions over named parameters, used for coefficient values
//! in problem configs (`"-d^(r-2)"`, `"2*pi"`).
//!
//! Grammar: `+ - * /`, right-associative `^`, unary minus, parentheses,
//! numbers, identifiers, the constants `pi` and `e`, and the functions
//! `sqrt abs exp ln sin cos`.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("unexpected character '{ch}' at column {col}")]
    BadChar { ch: char, col: usize },
    #[error("unexpected {found} at column {col}")]
    Unexpected { found: String, col: usize },
    #[error("unknown parameter '{0}'")]
    UnknownName(String),
    #[error("unknown function '{0}'")]
    UnknownFunction(String),
    #[error("expression evaluates to a non-finite value")]
    NonFinite,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    End,
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>, ExprError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            let v = text.parse().map_err(|_| ExprError::Unexpected { found: format!("number '{text}'"), col })?;
            out.push((Tok::Num(v), col));
        } else if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push((Tok::Ident(chars[start..i].iter().collect()), col));
        } else if "+-*/^".contains(c) {
            out.push((Tok::Op(c), col));
            i += 1;
        } else if c == '(' {
            out.push((Tok::LParen, col));
            i += 1;
        } else if c == ')' {
            out.push((Tok::RParen, col));
            i += 1;
        } else {
            return Err(ExprError::BadChar { ch: c, col });
        }
    }
    out.push((Tok::End, chars.len() + 1));
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    vars: &'a dyn Fn(&str) -> Option<f64>,
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn unexpected(&self) -> ExprError {
        let (t, col) = &self.toks[self.pos];
        let found = match t {
            Tok::Num(v) => format!("number {v}"),
            Tok::Ident(s) => format!("name '{s}'"),
            Tok::Op(c) => format!("'{c}'"),
            Tok::LParen => "'('".into(),
            Tok::RParen => "')'".into(),
            Tok::End => "end of expression".into(),
        };
        ExprError::Unexpected { found, col: *col }
    }

    fn expr(&mut self) -> Result<f64, ExprError> {
        let mut v = self.term()?;
        while let Tok::Op(c @ ('+' | '-')) = *self.peek() {
            self.pos += 1;
            let r = self.term()?;
            v = if c == '+' { v + r } else { v - r };
        }
        Ok(v)
    }

    fn term(&mut self) -> Result<f64, ExprError> {
        let mut v = self.unary()?;
        while let Tok::Op(c @ ('*' | '/')) = *self.peek() {
            self.pos += 1;
            let r = self.unary()?;
            v = if c == '*' { v * r } else { v / r };
        }
        Ok(v)
    }

    fn unary(&mut self) -> Result<f64, ExprError> {
        match self.peek() {
            Tok::Op('-') => {
                self.pos += 1;
                Ok(-self.unary()?)
            }
            Tok::Op('+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    // `-2^2` is -(2^2); `2^-1` is allowed.
    fn power(&mut self) -> Result<f64, ExprError> {
        let base = self.atom()?;
        if let Tok::Op('^') = self.peek() {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(base.powf(exp));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<f64, ExprError> {
        match self.peek().clone() {
            Tok::Num(v) => {
                self.pos += 1;
                Ok(v)
            }
            Tok::LParen => {
                self.pos += 1;
                let v = self.expr()?;
                if *self.peek() != Tok::RParen {
                    return Err(self.unexpected());
                }
                self.pos += 1;
                Ok(v)
            }
            Tok::Ident(name) => {
                self.pos += 1;
                if *self.peek() == Tok::LParen {
                    self.pos += 1;
                    let arg = self.expr()?;
                    if *self.peek() != Tok::RParen {
                        return Err(self.unexpected());
                    }
                    self.pos += 1;
                    let f: fn(f64) -> f64 = match name.as_str() {
                        "sqrt" => f64::sqrt,
                        "abs" => f64::abs,
                        "exp" => f64::exp,
                        "ln" => f64::ln,
                        "sin" => f64::sin,
                        "cos" => f64::cos,
                        _ => return Err(ExprError::UnknownFunction(name)),
                    };
                    return Ok(f(arg));
                }
                if let Some(v) = (self.vars)(&name) {
                    return Ok(v);
                }
                match name.as_str() {
                    "pi" => Ok(std::f64::consts::PI),
                    "e" => Ok(std::f64::consts::E),
                    _ => Err(ExprError::UnknownName(name)),
                }
            }
            _ => Err(self.unexpected()),
        }
    }
}

/// Evaluates `src`, resolving identifiers through `vars` first.
pub fn eval(src: &str, vars: &dyn Fn(&str) -> Option<f64>) -> Result<f64, ExprError> {
    let mut p = Parser { toks: lex(src)?, pos: 0, vars };
    let v = p.expr()?;
    if *p.peek() != Tok::End {
        return Err(p.unexpected());
    }
    if !v.is_finite() {
        return Err(ExprError::NonFinite);
    }
    Ok(v)
}

/// Identifiers used as variables (not function names) in `src`.
pub fn referenced_names(src: &str) -> Result<Vec<String>, ExprError> {
    let toks = lex(src)?;
    let mut out: Vec<String> = Vec::new();
    for (k, (t, _)) in toks.iter().enumerate() {
        if let Tok::Ident(name) = t {
            let is_call = matches!(toks.get(k + 1), Some((Tok::LParen, _)));
            if !is_call && !out.contains(name) {
                out.push(name.clone());
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn no_vars(_: &str) -> Option<f64> {
        None
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(eval("1 + 2 * 3", &no_vars).unwrap(), 7.0);
        assert_eq!(eval("2 ^ 3 ^ 2", &no_vars).unwrap(), 512.0);
        assert_eq!(eval("-2 ^ 2", &no_vars).unwrap(), -4.0);
        assert_eq!(eval("2 ^ -1", &no_vars).unwrap(), 0.5);
        assert_eq!(eval("(1 + 2) * 3", &no_vars).unwrap(), 9.0);
        assert_eq!(eval("8 / 2 / 2", &no_vars).unwrap(), 2.0);
        assert_eq!(eval("1.5e2 + 2E-1", &no_vars).unwrap(), 150.2);
        assert!((eval("2*pi", &no_vars).unwrap() - std::f64::consts::TAU).abs() < 1e-15);
        assert_eq!(eval("sqrt(16) + abs(-1)", &no_vars).unwrap(), 5.0);
    }

    #[test]
    fn variables() {
        let vars = |n: &str| match n {
            "d" => Some(2.0),
            "r" => Some(3.0),
            _ => None,
        };
        assert_eq!(eval("-d^(r-2)", &vars).unwrap(), -2.0);
        assert_eq!(eval("q + 1", &vars), Err(ExprError::UnknownName("q".into())));
        assert_eq!(referenced_names("-d^(r-2) + sqrt(d)").unwrap(), vec!["d".to_string(), "r".to_string()]);
    }

    #[test]
    fn errors() {
        assert!(matches!(eval("1 +", &no_vars), Err(ExprError::Unexpected { .. })));
        assert!(matches!(eval("(1", &no_vars), Err(ExprError::Unexpected { .. })));
        assert!(matches!(eval("1 $ 2", &no_vars), Err(ExprError::BadChar { ch: '$', col: 3 })));
        assert!(matches!(eval("foo(1)", &no_vars), Err(ExprError::UnknownFunction(_))));
        assert_eq!(eval("1/0", &no_vars), Err(ExprError::NonFinite));
        assert!(matches!(eval("1 2", &no_vars), Err(ExprError::Unexpected { .. })));
    }

    proptest! {
        #[test]
        fn matches_native_arithmetic(a in -100.0f64..100.0, b in -100.0f64..100.0, c in 0.5f64..3.0) {
            let src = format!("({a}) * ({b}) - ({a}) / ({c}) + ({c}) ^ 2");
            let v = eval(&src, &no_vars).unwrap();
            let want = a * b - a / c + c.powi(2);
            prop_assert!((v - want).abs() <= 1e-12 * (1.0 + want.abs()));
        }
    }
}
