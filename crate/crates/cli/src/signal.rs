//! Input signals: sums of constants and sinusoids, one expression per input
//! channel, channels separated by `;`.
//!
//! ```text
//! channel := term (('+' | '-') term)*
//! term    := number ['*' wave] | wave
//! wave    := ('sin' | 'cos') '(' [number '*'] 't' [('+' | '-') number] ')'
//! ```
//!
//! Example: `0.01*sin(5*t)`, `1 - 0.5*cos(2*t+0.3); 0.2`.

use anyhow::{bail, Context, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
enum Wave {
    Constant,
    Sin { w: f64, phase: f64 },
    Cos { w: f64, phase: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Term {
    amp: f64,
    wave: Wave,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    channels: Vec<Vec<Term>>,
}

impl Signal {
    pub fn parse(text: &str) -> Result<Self> {
        let channels = text
            .split(';')
            .enumerate()
            .map(|(i, c)| parse_channel(c).with_context(|| format!("input channel {}", i + 1)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { channels })
    }

    pub fn channels(&self) -> usize {
        self.channels.len()
    }

    pub fn eval(&self, t: f64, out: &mut [f64]) {
        for (slot, terms) in out.iter_mut().zip(&self.channels) {
            *slot = terms
                .iter()
                .map(|term| {
                    term.amp
                        * match term.wave {
                            Wave::Constant => 1.0,
                            Wave::Sin { w, phase } => (w * t + phase).sin(),
                            Wave::Cos { w, phase } => (w * t + phase).cos(),
                        }
                })
                .sum();
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(char),
}

fn lex(s: &str) -> Result<Vec<Tok>> {
    let chars: Vec<char> = s.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            // exponent, e.g. 1e-3
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
            out.push(Tok::Num(text.parse().with_context(|| format!("bad number '{text}'"))?));
        } else if c.is_ascii_alphabetic() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_alphabetic() {
                i += 1;
            }
            out.push(Tok::Ident(chars[start..i].iter().collect()));
        } else if "+-*()".contains(c) {
            out.push(Tok::Sym(c));
            i += 1;
        } else {
            bail!("unexpected character '{c}'");
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Tok>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Sym(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if !self.eat(c) {
            bail!("expected '{c}'");
        }
        Ok(())
    }

    fn term(&mut self) -> Result<Term> {
        match self.next() {
            Some(Tok::Num(amp)) => {
                if self.eat('*') {
                    Ok(Term { amp, wave: self.wave()? })
                } else {
                    Ok(Term { amp, wave: Wave::Constant })
                }
            }
            Some(Tok::Ident(_)) => {
                self.pos -= 1;
                Ok(Term { amp: 1.0, wave: self.wave()? })
            }
            other => bail!("expected a number or sin/cos, found {other:?}"),
        }
    }

    fn wave(&mut self) -> Result<Wave> {
        let name = match self.next() {
            Some(Tok::Ident(name)) => name,
            other => bail!("expected sin or cos, found {other:?}"),
        };
        self.expect('(')?;
        let w = match self.peek() {
            Some(Tok::Num(w)) => {
                let w = *w;
                self.pos += 1;
                self.expect('*')?;
                w
            }
            _ => 1.0,
        };
        match self.next() {
            Some(Tok::Ident(t)) if t == "t" => {}
            other => bail!("expected 't', found {other:?}"),
        }
        let phase = if self.eat('+') {
            self.number()?
        } else if self.eat('-') {
            -self.number()?
        } else {
            0.0
        };
        self.expect(')')?;
        match name.as_str() {
            "sin" => Ok(Wave::Sin { w, phase }),
            "cos" => Ok(Wave::Cos { w, phase }),
            _ => bail!("unknown function '{name}'"),
        }
    }

    fn number(&mut self) -> Result<f64> {
        match self.next() {
            Some(Tok::Num(x)) => Ok(x),
            other => bail!("expected a number, found {other:?}"),
        }
    }
}

fn parse_channel(s: &str) -> Result<Vec<Term>> {
    let mut p = Parser { toks: lex(s)?, pos: 0 };
    if p.toks.is_empty() {
        bail!("empty expression");
    }
    let negate = |t: Term| Term { amp: -t.amp, ..t };
    let mut terms = Vec::new();
    let first = if p.eat('-') { negate(p.term()?) } else { p.term()? };
    terms.push(first);
    while p.pos < p.toks.len() {
        if p.eat('+') {
            terms.push(p.term()?);
        } else if p.eat('-') {
            terms.push(negate(p.term()?));
        } else {
            bail!("expected '+' or '-', found {:?}", p.peek());
        }
    }
    Ok(terms)
}
