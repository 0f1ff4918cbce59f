//! Line-oriented parser for the scheme DSL.
//!
//! ```text
//! # comments run to end of line
//! scheme seq {
//!     stage a: A from base
//!     stage b: B from base + 1*a
//!     output: base + a + 1/2*b
//! }
//! ```
//!
//! Grammar (one statement per line):
//!
//! ```text
//! scheme <ident> "{"
//!   { "stage" <ident> ":" <ident> "from" "base" { "+" <rational> "*" <ident> } }
//!   [ "output" ":" "base" { "+" [<rational> "*"] <ident> } ]
//! "}"
//! rational := integer | integer "/" positive-integer
//! ```

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::rational::Rational;
use crate::Error;

use super::types::{InputExpr, SchemeSpec, Stage};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Int(i64),
    Sym(char),
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    col: usize,
}

fn err(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        column,
        message: message.into(),
    }
}

fn tokenize_line(line_no: usize, text: &str) -> crate::Result<Vec<Spanned>> {
    let mut toks = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        match c {
            '#' => break,
            c if c.is_whitespace() => i += 1,
            '{' | '}' | ':' | '+' | '*' | '/' => {
                toks.push(Spanned { tok: Tok::Sym(c), col });
                i += 1;
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                let ident: String = chars[start..i].iter().collect();
                toks.push(Spanned {
                    tok: Tok::Ident(ident),
                    col,
                });
            }
            c if c.is_ascii_digit() || c == '-' => {
                let start = i;
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                let text: String = chars[start..i].iter().collect();
                let value = text
                    .parse::<i64>()
                    .map_err(|_| err(line_no, col, format!("bad integer `{text}`")))?;
                toks.push(Spanned {
                    tok: Tok::Int(value),
                    col,
                });
            }
            other => return Err(err(line_no, col, format!("unknown token `{other}`"))),
        }
    }
    Ok(toks)
}

struct Line<'a> {
    no: usize,
    toks: &'a [Spanned],
    pos: usize,
}

impl<'a> Line<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|s| &s.tok)
    }

    fn col(&self) -> usize {
        self.toks
            .get(self.pos)
            .map(|s| s.col)
            .unwrap_or_else(|| self.toks.last().map(|s| s.col + 1).unwrap_or(1))
    }

    fn next(&mut self) -> Option<&Spanned> {
        let s = self.toks.get(self.pos);
        if s.is_some() {
            self.pos += 1;
        }
        s
    }

    fn expect_sym(&mut self, sym: char) -> crate::Result<()> {
        let (no, col) = (self.no, self.col());
        match self.next() {
            Some(Spanned { tok: Tok::Sym(c), .. }) if *c == sym => Ok(()),
            _ => Err(err(no, col, format!("expected `{sym}`"))),
        }
    }

    fn expect_ident(&mut self) -> crate::Result<String> {
        let (no, col) = (self.no, self.col());
        match self.next() {
            Some(Spanned {
                tok: Tok::Ident(name),
                ..
            }) => Ok(name.clone()),
            _ => Err(err(no, col, "expected identifier")),
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> crate::Result<()> {
        let (no, col) = (self.no, self.col());
        let name = self.expect_ident()?;
        if name == kw {
            Ok(())
        } else {
            Err(err(no, col, format!("expected `{kw}`, found `{name}`")))
        }
    }

    fn expect_rational(&mut self) -> crate::Result<Rational> {
        let (no, col) = (self.no, self.col());
        let numer = match self.next() {
            Some(Spanned { tok: Tok::Int(n), .. }) => *n,
            _ => return Err(err(no, col, "expected rational")),
        };
        if let Some(Tok::Sym('/')) = self.peek() {
            self.next();
            let (no, col) = (self.no, self.col());
            let denom = match self.next() {
                Some(Spanned { tok: Tok::Int(d), .. }) if *d > 0 => *d,
                _ => return Err(err(no, col, "expected positive denominator")),
            };
            Rational::new(numer, denom).map_err(|_| err(no, col, "bad rational"))
        } else {
            Ok(Rational::integer(numer))
        }
    }

    fn expect_end(&self) -> crate::Result<()> {
        if self.pos == self.toks.len() {
            Ok(())
        } else {
            Err(err(self.no, self.col(), "unexpected trailing tokens"))
        }
    }
}

/// Parses the scheme DSL into a [`SchemeSpec`]. When the `output` clause is
/// omitted, every stage gets output weight 1.
pub fn parse_scheme(text: &str) -> crate::Result<SchemeSpec> {
    let mut lines = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let toks = tokenize_line(idx + 1, raw)?;
        if !toks.is_empty() {
            lines.push((idx + 1, toks));
        }
    }
    let mut iter = lines.iter();

    let (no, toks) = iter
        .next()
        .ok_or_else(|| err(1, 1, "empty scheme source"))?;
    let mut line = Line {
        no: *no,
        toks,
        pos: 0,
    };
    line.expect_keyword("scheme")?;
    let scheme_name = line.expect_ident()?;
    line.expect_sym('{')?;
    line.expect_end()?;

    let mut stages: Vec<Stage> = Vec::new();
    let mut output: Option<BTreeMap<String, Rational>> = None;
    let mut closed = false;

    for (no, toks) in iter {
        let mut line = Line {
            no: *no,
            toks,
            pos: 0,
        };
        if closed {
            return Err(err(*no, line.col(), "content after closing `}`"));
        }
        match line.peek() {
            Some(Tok::Sym('}')) => {
                line.next();
                line.expect_end()?;
                closed = true;
            }
            Some(Tok::Ident(kw)) if kw == "stage" => {
                if output.is_some() {
                    return Err(err(*no, line.col(), "stage after output clause"));
                }
                line.next();
                let (id_line, id_col) = (line.no, line.col());
                let id = line.expect_ident()?;
                if stages.iter().any(|s| s.id == id) {
                    return Err(err(id_line, id_col, format!("duplicate stage id `{id}`")));
                }
                line.expect_sym(':')?;
                let process = line.expect_ident()?;
                line.expect_keyword("from")?;
                line.expect_keyword("base")?;
                let mut input = InputExpr::base();
                while line.peek().is_some() {
                    line.expect_sym('+')?;
                    let coeff = line.expect_rational()?;
                    line.expect_sym('*')?;
                    let (ref_line, ref_col) = (line.no, line.col());
                    let referenced = line.expect_ident()?;
                    if !stages.iter().any(|s| s.id == referenced) {
                        return Err(err(
                            ref_line,
                            ref_col,
                            format!("forward or unknown stage reference `{referenced}`"),
                        ));
                    }
                    input = input.with_term(referenced, coeff);
                }
                stages.push(Stage::new(id, process, input));
            }
            Some(Tok::Ident(kw)) if kw == "output" => {
                if output.is_some() {
                    return Err(err(*no, line.col(), "duplicate output clause"));
                }
                line.next();
                line.expect_sym(':')?;
                line.expect_keyword("base")?;
                let mut weights = BTreeMap::new();
                while line.peek().is_some() {
                    line.expect_sym('+')?;
                    let weight = if matches!(line.peek(), Some(Tok::Int(_))) {
                        let w = line.expect_rational()?;
                        line.expect_sym('*')?;
                        w
                    } else {
                        Rational::ONE
                    };
                    let (ref_line, ref_col) = (line.no, line.col());
                    let id = line.expect_ident()?;
                    if !stages.iter().any(|s| s.id == id) {
                        return Err(err(
                            ref_line,
                            ref_col,
                            format!("output references unknown stage `{id}`"),
                        ));
                    }
                    weights.insert(id, weight);
                }
                output = Some(weights);
            }
            _ => return Err(err(*no, line.col(), "expected stage, output, or `}`")),
        }
    }

    if !closed {
        return Err(err(
            lines.last().map(|(no, _)| *no).unwrap_or(1),
            1,
            "missing closing `}`",
        ));
    }

    match output {
        Some(weights) => SchemeSpec::with_output_weights(scheme_name, stages, weights),
        None => SchemeSpec::new(scheme_name, stages),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    #[test]
    fn parses_sequential_two_stage() {
        let s = parse_scheme("scheme seq {\n stage a: A from base\n stage b: B from base + 1*a\n}")
            .unwrap();
        assert_eq!(s.name, "seq");
        assert_eq!(s.stage("b").unwrap().input.terms, alloc::vec![(
            "a".to_string(),
            Rational::ONE
        )]);
        assert_eq!(s.output_weight("a"), Rational::ONE);
    }

    #[test]
    fn parses_parallel_with_comments() {
        let src = "# both from base\nscheme par {\n stage a: A from base\n stage b: B from base # isolated\n}";
        let s = parse_scheme(src).unwrap();
        assert!(s.stages().iter().all(|st| st.input.terms.is_empty()));
    }

    #[test]
    fn forward_reference_is_an_error() {
        let e = parse_scheme("scheme bad {\n stage a: A from base + 1*b\n stage b: B from base\n}")
            .unwrap_err();
        match e {
            Error::Parse { line, message, .. } => {
                assert_eq!(line, 2);
                assert!(message.contains('b'), "{message}");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn duplicate_stage_id_is_an_error() {
        let e = parse_scheme("scheme bad {\n stage a: A from base\n stage a: B from base\n}")
            .unwrap_err();
        assert!(matches!(e, Error::Parse { line: 3, .. }));
    }

    #[test]
    fn fractional_coefficients_parse() {
        let src = "scheme half {\n stage a: A from base\n stage b: B from base\n stage c: C from base + 1/2*a + 1/2*b\n}";
        let s = parse_scheme(src).unwrap();
        let half = Rational::new(1, 2).unwrap();
        assert_eq!(s.stage("c").unwrap().input.coeff_of("a"), half);
        assert_eq!(s.stage("c").unwrap().input.coeff_of("b"), half);
    }

    #[test]
    fn output_clause_sets_weights() {
        let src = "scheme w {\n stage a: A from base\n stage b: B from base\n output: base + a + 1/2*b\n}";
        let s = parse_scheme(src).unwrap();
        assert_eq!(s.output_weight("a"), Rational::ONE);
        assert_eq!(s.output_weight("b"), Rational::new(1, 2).unwrap());
    }

    #[test]
    fn unknown_token_reports_position() {
        let e = parse_scheme("scheme x {\n stage a; A from base\n}").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn missing_brace_reported() {
        assert!(parse_scheme("scheme x {\n stage a: A from base\n").is_err());
    }
}
