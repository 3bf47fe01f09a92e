//! Human-readable text form of differential polynomials.
//!
//! The canonical rendering writes every coefficient parenthesized and every
//! product explicit, e.g. `(-1/8 i) * q * r_xx + (2) * q^2 * r^2`, with terms
//! in the canonical key order. Parsing is deliberately more liberal so that
//! reference tables can be written the way they appear in the literature:
//!
//! ```text
//! 6 q q_x r r_x + q q_xx r^2 - 2 q^3 r^3
//! (1/2) * (2 q^2 r - q_xx)   -- not supported: no parenthesized subexpressions
//! ```
//!
//! Grammar (whitespace-insensitive, `*` optional between factors):
//!
//! ```text
//! poly   := [sign] term { sign term }
//! term   := unit { ["*"] unit }
//! unit   := "(" complex ")" | rational | "i" | symbol ["^" integer]
//! symbol := ("q" | "r" | "u" | "ubar") ["_" "x"^order]
//! complex:= [sign] part { sign part }      e.g. (2), (-1/4), (i), (-1/8 i), (1/2 - 3i)
//! part   := rational ["i" ["/" integer]] | "i" ["/" integer] | rational "i"
//! ```

use super::{Alphabet, DiffPolyError, DiffPolynomial, MonomialKey, Var};
use crate::rational::GaussianRational;
use std::fmt;
use std::str::FromStr;

impl fmt::Display for DiffPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (key, coeff) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "({coeff})")?;
            for (slot, mult) in key.iter() {
                write!(f, " * {}", self.alphabet.var_name(slot.var))?;
                if slot.order > 0 {
                    write!(f, "_")?;
                    for _ in 0..slot.order {
                        write!(f, "x")?;
                    }
                }
                if *mult > 1 {
                    write!(f, "^{mult}")?;
                }
            }
        }
        Ok(())
    }
}

impl DiffPolynomial {
    /// Literature-style rendering: signed integer (or rational) coefficients
    /// leading each space-separated product, e.g. `- q_xx + 2 q^2 r`. Terms
    /// order by ascending factor count (dispersive part first, the way
    /// equations are usually laid out), canonically within a degree. Parses
    /// back to the same polynomial.
    pub fn pretty(&self) -> String {
        use std::fmt::Write as _;
        if self.is_zero() {
            return "0".to_owned();
        }
        let mut ordered: Vec<_> = self.terms.iter().collect();
        ordered.sort_by_key(|(key, _)| (key.degree(), (*key).clone()));
        let mut out = String::new();
        for (idx, (key, coeff)) in ordered.into_iter().enumerate() {
            // Split into sign and magnitude when the coefficient sits on one
            // axis; genuinely complex coefficients stay parenthesized.
            let (negative, magnitude) = if coeff.is_real() {
                (coeff.re() < &num::BigRational::from_integer(0.into()), {
                    let mag = coeff.re().clone();
                    let mag = if mag < num::BigRational::from_integer(0.into()) {
                        -mag
                    } else {
                        mag
                    };
                    if mag == num::BigRational::from_integer(1.into()) && !key.is_constant() {
                        String::new()
                    } else {
                        format!("{mag}")
                    }
                })
            } else if coeff.is_imaginary() {
                (coeff.im() < &num::BigRational::from_integer(0.into()), {
                    let mag = coeff.im().clone();
                    let mag = if mag < num::BigRational::from_integer(0.into()) {
                        -mag
                    } else {
                        mag
                    };
                    if mag == num::BigRational::from_integer(1.into()) {
                        "i".to_owned()
                    } else {
                        format!("{mag} i")
                    }
                })
            } else {
                (false, format!("({coeff})"))
            };
            if idx == 0 {
                if negative {
                    out.push_str("- ");
                }
            } else if negative {
                out.push_str(" - ");
            } else {
                out.push_str(" + ");
            }
            let mut pieces: Vec<String> = Vec::new();
            if !magnitude.is_empty() {
                pieces.push(magnitude);
            }
            for (slot, mult) in key.iter() {
                let mut piece = self.alphabet().var_name(slot.var).to_owned();
                if slot.order > 0 {
                    piece.push('_');
                    for _ in 0..slot.order {
                        piece.push('x');
                    }
                }
                if *mult > 1 {
                    let _ = write!(piece, "^{mult}");
                }
                pieces.push(piece);
            }
            out.push_str(&pieces.join(" "));
        }
        out
    }
}

/// Parse a polynomial, requiring it to fit the given alphabet. Constant-only
/// input parses in any alphabet.
pub fn parse_in_alphabet(s: &str, alphabet: Alphabet) -> Result<DiffPolynomial, DiffPolyError> {
    let (poly, seen) = parse_impl(s)?;
    if let Some(seen) = seen {
        if seen != alphabet {
            return Err(DiffPolyError::AlphabetMismatch {
                expected: alphabet,
                found: seen,
            });
        }
    }
    Ok(reinterpret(poly, alphabet))
}

/// Parse with the alphabet inferred from the variables present; pure-constant
/// input defaults to the `q`/`r` alphabet.
impl FromStr for DiffPolynomial {
    type Err = DiffPolyError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (poly, seen) = parse_impl(s)?;
        Ok(reinterpret(poly, seen.unwrap_or(Alphabet::QR)))
    }
}

fn reinterpret(p: DiffPolynomial, alphabet: Alphabet) -> DiffPolynomial {
    DiffPolynomial { alphabet, ..p }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Plus,
    Minus,
    Star,
    Caret,
    Slash,
    LParen,
    RParen,
    Int(i64),
    Imag,
    Sym { var: Var, order: u32, alphabet: Alphabet },
    End,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn new(s: &'a str) -> Self {
        Self {
            src: s.as_bytes(),
            pos: 0,
        }
    }

    fn error(&self, msg: impl Into<String>) -> DiffPolyError {
        DiffPolyError::Parse {
            pos: self.pos,
            msg: msg.into(),
        }
    }

    fn next_tok(&mut self) -> Result<(usize, Tok), DiffPolyError> {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        let start = self.pos;
        if self.pos >= self.src.len() {
            return Ok((start, Tok::End));
        }
        let c = self.src[self.pos];
        let simple = match c {
            b'+' => Some(Tok::Plus),
            b'-' => Some(Tok::Minus),
            b'*' => Some(Tok::Star),
            b'^' => Some(Tok::Caret),
            b'/' => Some(Tok::Slash),
            b'(' => Some(Tok::LParen),
            b')' => Some(Tok::RParen),
            _ => None,
        };
        if let Some(t) = simple {
            self.pos += 1;
            return Ok((start, t));
        }
        if c.is_ascii_digit() {
            let mut v: i64 = 0;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                v = v
                    .checked_mul(10)
                    .and_then(|v| v.checked_add((self.src[self.pos] - b'0') as i64))
                    .ok_or_else(|| self.error("integer literal overflows i64"))?;
                self.pos += 1;
            }
            return Ok((start, Tok::Int(v)));
        }
        if c.is_ascii_lowercase() {
            let mut end = self.pos;
            while end < self.src.len() && self.src[end].is_ascii_lowercase() {
                end += 1;
            }
            let name = std::str::from_utf8(&self.src[self.pos..end]).expect("ascii");
            let (var, alphabet) = match name {
                "i" => {
                    self.pos = end;
                    return Ok((start, Tok::Imag));
                }
                "q" => (Var::Q, Alphabet::QR),
                "r" => (Var::R, Alphabet::QR),
                "u" => (Var::Q, Alphabet::U),
                "ubar" => (Var::R, Alphabet::U),
                other => return Err(self.error(format!("unknown symbol {other:?}"))),
            };
            self.pos = end;
            let mut order = 0;
            if self.pos < self.src.len() && self.src[self.pos] == b'_' {
                self.pos += 1;
                while self.pos < self.src.len() && self.src[self.pos] == b'x' {
                    order += 1;
                    self.pos += 1;
                }
                if order == 0 {
                    return Err(self.error("expected one or more 'x' after '_'"));
                }
            }
            return Ok((start, Tok::Sym { var, order, alphabet }));
        }
        Err(self.error(format!("unexpected character {:?}", c as char)))
    }
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    tok: Tok,
    tok_pos: usize,
}

impl<'a> Parser<'a> {
    fn new(s: &'a str) -> Result<Self, DiffPolyError> {
        let mut lexer = Lexer::new(s);
        let (tok_pos, tok) = lexer.next_tok()?;
        Ok(Self { lexer, tok, tok_pos })
    }

    fn error(&self, msg: impl Into<String>) -> DiffPolyError {
        DiffPolyError::Parse {
            pos: self.tok_pos,
            msg: msg.into(),
        }
    }

    fn bump(&mut self) -> Result<(), DiffPolyError> {
        let (pos, tok) = self.lexer.next_tok()?;
        self.tok = tok;
        self.tok_pos = pos;
        Ok(())
    }

    fn eat(&mut self, want: Tok, what: &str) -> Result<(), DiffPolyError> {
        if self.tok == want {
            self.bump()
        } else {
            Err(self.error(format!("expected {what}, found {:?}", self.tok)))
        }
    }

    /// `[sign]` returns −1 for a consumed minus, +1 for a consumed plus or
    /// nothing.
    fn optional_sign(&mut self) -> Result<i64, DiffPolyError> {
        match self.tok {
            Tok::Plus => {
                self.bump()?;
                Ok(1)
            }
            Tok::Minus => {
                self.bump()?;
                Ok(-1)
            }
            _ => Ok(1),
        }
    }

    fn integer(&mut self, what: &str) -> Result<i64, DiffPolyError> {
        match self.tok {
            Tok::Int(v) => {
                self.bump()?;
                Ok(v)
            }
            _ => Err(self.error(format!("expected {what}, found {:?}", self.tok))),
        }
    }

    /// `num ["/" den]` as a real rational.
    fn rational(&mut self) -> Result<GaussianRational, DiffPolyError> {
        let num = self.integer("integer")?;
        let den = if self.tok == Tok::Slash {
            self.bump()?;
            let d = self.integer("denominator")?;
            if d == 0 {
                return Err(self.error("zero denominator"));
            }
            d
        } else {
            1
        };
        Ok(GaussianRational::ratio(num, den))
    }

    /// One signed part of a complex literal: `3`, `1/2`, `i`, `i/2`, `3i`,
    /// `3i/2`, `1/16 i`.
    fn complex_part(&mut self) -> Result<GaussianRational, DiffPolyError> {
        let sign = self.optional_sign()?;
        let sign = GaussianRational::from_int(sign);
        if self.tok == Tok::Imag {
            self.bump()?;
            let mut v = GaussianRational::i();
            if self.tok == Tok::Slash {
                self.bump()?;
                let d = self.integer("denominator")?;
                if d == 0 {
                    return Err(self.error("zero denominator"));
                }
                v = v * GaussianRational::ratio(1, d);
            }
            return Ok(sign * v);
        }
        let mut v = self.rational()?;
        if self.tok == Tok::Imag {
            self.bump()?;
            v = v * GaussianRational::i();
            if self.tok == Tok::Slash {
                self.bump()?;
                let d = self.integer("denominator")?;
                if d == 0 {
                    return Err(self.error("zero denominator"));
                }
                v = v * GaussianRational::ratio(1, d);
            }
        }
        Ok(sign * v)
    }

    /// The inside of a parenthesized complex literal.
    fn complex(&mut self) -> Result<GaussianRational, DiffPolyError> {
        let mut acc = self.complex_part()?;
        while matches!(self.tok, Tok::Plus | Tok::Minus) {
            acc = acc + self.complex_part()?;
        }
        Ok(acc)
    }

    fn starts_unit(&self) -> bool {
        matches!(
            self.tok,
            Tok::LParen | Tok::Int(_) | Tok::Imag | Tok::Sym { .. }
        )
    }

    /// One term: a product of units.
    fn term(
        &mut self,
        alphabet_seen: &mut Option<Alphabet>,
    ) -> Result<(GaussianRational, MonomialKey), DiffPolyError> {
        let mut coeff = GaussianRational::one();
        let mut key = MonomialKey::one();
        let mut any = false;
        loop {
            match self.tok.clone() {
                Tok::LParen => {
                    self.bump()?;
                    coeff *= &self.complex()?;
                    self.eat(Tok::RParen, "')'")?;
                }
                Tok::Int(_) => coeff *= &self.rational()?,
                Tok::Imag => {
                    self.bump()?;
                    coeff *= &GaussianRational::i();
                }
                Tok::Sym { var, order, alphabet } => {
                    self.bump()?;
                    match alphabet_seen {
                        None => *alphabet_seen = Some(alphabet),
                        Some(seen) if *seen != alphabet => {
                            return Err(self.error("mixed q/r and u/ubar symbols"))
                        }
                        _ => {}
                    }
                    let mult = if self.tok == Tok::Caret {
                        self.bump()?;
                        let m = self.integer("exponent")?;
                        if !(1..=u32::MAX as i64).contains(&m) {
                            return Err(self.error("exponent out of range"));
                        }
                        m as u32
                    } else {
                        1
                    };
                    key.insert(super::DerivativeSlot::new(var, order), mult);
                }
                _ => break,
            }
            any = true;
            if self.tok == Tok::Star {
                self.bump()?;
                if !self.starts_unit() {
                    return Err(self.error("expected a factor after '*'"));
                }
            }
        }
        if !any {
            return Err(self.error(format!("expected a term, found {:?}", self.tok)));
        }
        Ok((coeff, key))
    }
}

fn parse_impl(s: &str) -> Result<(DiffPolynomial, Option<Alphabet>), DiffPolyError> {
    let mut p = Parser::new(s)?;
    let mut alphabet_seen = None;
    // Alphabet is patched by the caller; QR is a placeholder during collection.
    let mut poly = DiffPolynomial::zero(Alphabet::QR);
    let mut sign = p.optional_sign()?;
    loop {
        let (coeff, key) = p.term(&mut alphabet_seen)?;
        poly.add_term(key, coeff * &GaussianRational::from_int(sign));
        match p.tok {
            Tok::Plus => {
                p.bump()?;
                sign = 1;
            }
            Tok::Minus => {
                p.bump()?;
                sign = -1;
            }
            Tok::End => break,
            _ => return Err(p.error(format!("expected '+', '-' or end, found {:?}", p.tok))),
        }
    }
    Ok((poly, alphabet_seen))
}
