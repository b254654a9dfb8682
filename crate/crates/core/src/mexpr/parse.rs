use super::{BinOp, Expression, Func, Kind, Node, ParseError, Span};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    Comma,
    LParen,
    RParen,
    End,
}

struct Lexer {
    toks: Vec<(Tok, Span)>,
}

fn line_col(src: &str, pos: usize) -> (usize, usize) {
    let before = &src[..pos.min(src.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rfind('\n').map(|i| pos - i).unwrap_or(pos + 1);
    (line, col)
}

fn syntax(src: &str, pos: usize, msg: impl Into<String>) -> ParseError {
    let (line, col) = line_col(src, pos);
    ParseError::Syntax { line, col, msg: msg.into() }
}

impl Lexer {
    fn run(src: &str) -> Result<Vec<(Tok, Span)>, ParseError> {
        let mut lx = Lexer { toks: Vec::new() };
        let b = src.as_bytes();
        let mut i = 0;
        while i < b.len() {
            let ch = b[i] as char;
            if ch.is_whitespace() {
                i += 1;
                continue;
            }
            let start = i;
            if ch.is_ascii_digit() || (ch == '.' && i + 1 < b.len() && (b[i + 1] as char).is_ascii_digit()) {
                while i < b.len() && ((b[i] as char).is_ascii_digit() || b[i] == b'.') {
                    i += 1;
                }
                if i < b.len() && (b[i] == b'e' || b[i] == b'E') {
                    let mut j = i + 1;
                    if j < b.len() && (b[j] == b'+' || b[j] == b'-') {
                        j += 1;
                    }
                    if j < b.len() && (b[j] as char).is_ascii_digit() {
                        i = j;
                        while i < b.len() && (b[i] as char).is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let text = &src[start..i];
                let v: f64 = text.parse().map_err(|_| syntax(src, start, format!("bad number `{text}`")))?;
                lx.toks.push((Tok::Num(v), Span { start, end: i }));
                continue;
            }
            if ch.is_ascii_alphabetic() || ch == '_' {
                while i < b.len() && ((b[i] as char).is_ascii_alphanumeric() || b[i] == b'_') {
                    i += 1;
                }
                lx.toks.push((Tok::Ident(src[start..i].to_string()), Span { start, end: i }));
                continue;
            }
            let t = match ch {
                '+' | '-' | '*' | '/' => Tok::Op(ch),
                ',' => Tok::Comma,
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                _ => {
                    let c = src[i..].chars().next().unwrap_or('?');
                    return Err(syntax(src, i, format!("unexpected character `{c}`")));
                }
            };
            i += 1;
            lx.toks.push((t, Span { start, end: i }));
        }
        lx.toks.push((Tok::End, Span { start: src.len(), end: src.len() }));
        Ok(lx.toks)
    }
}

struct Parser<'a> {
    src: &'a str,
    toks: Vec<(Tok, Span)>,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn span(&self) -> Span {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> (Tok, Span) {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<Span, ParseError> {
        let (t, s) = self.bump();
        if t == want {
            Ok(s)
        } else {
            Err(syntax(self.src, s.start, format!("expected {what}")))
        }
    }

    fn expr(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.term()?;
        while let Tok::Op(c @ ('+' | '-')) = *self.peek() {
            self.bump();
            let rhs = self.term()?;
            let op = if c == '+' { BinOp::Add } else { BinOp::Sub };
            let span = Span { start: lhs.span.start, end: rhs.span.end };
            lhs = Node { kind: Kind::Bin(op, Box::new(lhs), Box::new(rhs)), span };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.factor()?;
        while let Tok::Op(c @ ('*' | '/')) = *self.peek() {
            self.bump();
            let rhs = self.factor()?;
            let op = if c == '*' { BinOp::Mul } else { BinOp::Div };
            let span = Span { start: lhs.span.start, end: rhs.span.end };
            lhs = Node { kind: Kind::Bin(op, Box::new(lhs), Box::new(rhs)), span };
        }
        Ok(lhs)
    }

    fn factor(&mut self) -> Result<Node, ParseError> {
        if *self.peek() == Tok::Op('-') {
            let (_, s) = self.bump();
            let a = self.atom()?;
            let span = Span { start: s.start, end: a.span.end };
            return Ok(Node { kind: Kind::Neg(Box::new(a)), span });
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<Node, ParseError> {
        let (t, s) = self.bump();
        match t {
            Tok::Num(v) => Ok(Node { kind: Kind::Num(v), span: s }),
            Tok::LParen => {
                let e = self.expr()?;
                let r = self.expect(Tok::RParen, "`)`")?;
                Ok(Node { kind: e.kind, span: Span { start: s.start, end: r.end } })
            }
            Tok::Ident(name) => match name.as_str() {
                "i" => Ok(Node { kind: Kind::Imag, span: s }),
                "pi" => Ok(Node { kind: Kind::Pi, span: s }),
                "x" => Ok(Node { kind: Kind::X, span: s }),
                "h" => Ok(Node { kind: Kind::H, span: s }),
                "u" => Ok(Node { kind: Kind::Var(0), span: s }),
                v if v.len() > 1 && v.starts_with('u') && v[1..].bytes().all(|b| b.is_ascii_digit()) && !v[1..].starts_with('0') => {
                    let k: usize = v[1..].parse().map_err(|_| syntax(self.src, s.start, "variable index out of range"))?;
                    Ok(Node { kind: Kind::Var(k - 1), span: s })
                }
                "pow" => {
                    self.expect(Tok::LParen, "`(` after pow")?;
                    let base = self.expr()?;
                    self.expect(Tok::Comma, "`,` in pow")?;
                    let neg = if *self.peek() == Tok::Op('-') {
                        self.bump();
                        true
                    } else {
                        false
                    };
                    let (t, ks) = self.bump();
                    let k = match t {
                        Tok::Num(v) if v.fract() == 0.0 && v.abs() <= i32::MAX as f64 => v as i32,
                        _ => return Err(syntax(self.src, ks.start, "pow exponent must be an integer")),
                    };
                    let r = self.expect(Tok::RParen, "`)` closing pow")?;
                    let k = if neg { -k } else { k };
                    Ok(Node { kind: Kind::Pow(Box::new(base), k), span: Span { start: s.start, end: r.end } })
                }
                other => match super::Func::from_name(other) {
                    Some(f) => self.call(f, s),
                    None => {
                        let (line, col) = line_col(self.src, s.start);
                        Err(ParseError::UnknownIdentifier { name, line, col })
                    }
                },
            },
            Tok::End => Err(syntax(self.src, s.start, "unexpected end of input")),
            _ => Err(syntax(self.src, s.start, "expected a number, variable, function or `(`")),
        }
    }

    fn call(&mut self, f: Func, s: Span) -> Result<Node, ParseError> {
        self.expect(Tok::LParen, "`(` after function name")?;
        let a = self.expr()?;
        let r = self.expect(Tok::RParen, "`)` closing call")?;
        Ok(Node { kind: Kind::Call(f, Box::new(a)), span: Span { start: s.start, end: r.end } })
    }
}

/// Parses a coefficient expression.
pub fn parse(src: &str) -> Result<Expression, ParseError> {
    let toks = Lexer::run(src)?;
    let mut p = Parser { src, toks, pos: 0 };
    let ast = p.expr()?;
    if *p.peek() != Tok::End {
        return Err(syntax(src, p.span().start, "trailing input"));
    }
    Ok(Expression { ast, source: src.to_string() })
}
