//! Recursive-descent parser for the expression grammar.
//!
//! ```text
//! sum     := product (('+' | '-') product)*
//! product := unary (('*' | '/') unary)*
//! unary   := ('-' | '+') unary | power
//! power   := primary ('^' unary)?
//! primary := number | name | func '(' sum ')' | '(' sum ')'
//! ```
//!
//! `^` binds tighter than unary minus and associates to the right, so
//! `-x^2` is `-(x^2)` and `2^3^2` is `2^(3^2)`.

use super::{BinaryOp, ExprError, Node, UnaryOp};

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Number(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
}

struct Lexer<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn tokenize(text: &'a str) -> Result<Vec<(usize, Token)>, ExprError> {
        let mut lexer = Lexer { text, pos: 0 };
        let mut out = Vec::new();
        while let Some(tok) = lexer.next_token()? {
            out.push(tok);
        }
        Ok(out)
    }

    fn peek(&self) -> Option<char> {
        self.text[self.pos..].chars().next()
    }

    fn next_token(&mut self) -> Result<Option<(usize, Token)>, ExprError> {
        while let Some(c) = self.peek() {
            if c.is_whitespace() {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
        let start = self.pos;
        let Some(c) = self.peek() else {
            return Ok(None);
        };
        let tok = match c {
            '0'..='9' | '.' => self.number()?,
            c if c.is_alphabetic() || c == '_' => {
                while let Some(c) = self.peek() {
                    if c.is_alphanumeric() || c == '_' {
                        self.pos += c.len_utf8();
                    } else {
                        break;
                    }
                }
                Token::Ident(self.text[start..self.pos].to_string())
            }
            '+' | '-' | '*' | '/' | '^' => {
                self.pos += 1;
                Token::Op(c)
            }
            '(' => {
                self.pos += 1;
                Token::LParen
            }
            ')' => {
                self.pos += 1;
                Token::RParen
            }
            other => {
                return Err(ExprError::Syntax {
                    offset: start,
                    message: format!("unexpected character '{other}'"),
                })
            }
        };
        Ok(Some((start, tok)))
    }

    fn number(&mut self) -> Result<Token, ExprError> {
        let start = self.pos;
        let bytes = self.text.as_bytes();
        let digits = |pos: &mut usize| {
            while *pos < bytes.len() && bytes[*pos].is_ascii_digit() {
                *pos += 1;
            }
        };
        digits(&mut self.pos);
        if self.pos < bytes.len() && bytes[self.pos] == b'.' {
            self.pos += 1;
            digits(&mut self.pos);
        }
        if self.pos < bytes.len() && (bytes[self.pos] == b'e' || bytes[self.pos] == b'E') {
            let mut look = self.pos + 1;
            if look < bytes.len() && (bytes[look] == b'+' || bytes[look] == b'-') {
                look += 1;
            }
            if look < bytes.len() && bytes[look].is_ascii_digit() {
                self.pos = look;
                digits(&mut self.pos);
            }
        }
        let lexeme = &self.text[start..self.pos];
        lexeme
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .map(Token::Number)
            .ok_or_else(|| ExprError::Syntax {
                offset: start,
                message: format!("malformed number '{lexeme}'"),
            })
    }
}

pub(super) struct Parser<'a> {
    tokens: Vec<(usize, Token)>,
    cursor: usize,
    end: usize,
    coordinates: &'a [String],
    parameters: &'a [String],
}

impl<'a> Parser<'a> {
    pub(super) fn parse(
        text: &str,
        coordinates: &'a [String],
        parameters: &'a [String],
    ) -> Result<Node, ExprError> {
        let tokens = Lexer::tokenize(text)?;
        if tokens.is_empty() {
            return Err(ExprError::Syntax { offset: 0, message: "empty expression".into() });
        }
        let mut parser = Parser { tokens, cursor: 0, end: text.len(), coordinates, parameters };
        let node = parser.sum()?;
        if let Some((offset, tok)) = parser.tokens.get(parser.cursor) {
            return Err(ExprError::Syntax {
                offset: *offset,
                message: format!("unexpected token {tok:?}"),
            });
        }
        Ok(node)
    }

    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.cursor).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.tokens.get(self.cursor).map_or(self.end, |(o, _)| *o)
    }

    fn bump(&mut self) -> Option<(usize, Token)> {
        let tok = self.tokens.get(self.cursor).cloned();
        self.cursor += 1;
        tok
    }

    fn sum(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.product()?;
        while let Some(Token::Op(c @ ('+' | '-'))) = self.peek() {
            let op = if *c == '+' { BinaryOp::Add } else { BinaryOp::Sub };
            self.bump();
            let rhs = self.product()?;
            lhs = Node::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn product(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.unary()?;
        while let Some(Token::Op(c @ ('*' | '/'))) = self.peek() {
            let op = if *c == '*' { BinaryOp::Mul } else { BinaryOp::Div };
            self.bump();
            let rhs = self.unary()?;
            lhs = Node::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node, ExprError> {
        match self.peek() {
            Some(Token::Op('-')) => {
                self.bump();
                Ok(Node::Unary(UnaryOp::Neg, Box::new(self.unary()?)))
            }
            Some(Token::Op('+')) => {
                self.bump();
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Node, ExprError> {
        let base = self.primary()?;
        if let Some(Token::Op('^')) = self.peek() {
            self.bump();
            let exponent = self.unary()?;
            return Ok(Node::Binary(BinaryOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn expect_rparen(&mut self) -> Result<(), ExprError> {
        let offset = self.offset();
        match self.bump() {
            Some((_, Token::RParen)) => Ok(()),
            _ => Err(ExprError::Syntax { offset, message: "expected ')'".into() }),
        }
    }

    fn primary(&mut self) -> Result<Node, ExprError> {
        let offset = self.offset();
        match self.bump() {
            Some((_, Token::Number(v))) => Ok(Node::Const(v)),
            Some((_, Token::LParen)) => {
                let inner = self.sum()?;
                self.expect_rparen()?;
                Ok(inner)
            }
            Some((_, Token::Ident(name))) => {
                if let Some(func) = UnaryOp::from_name(&name) {
                    if self.peek() == Some(&Token::LParen) {
                        self.bump();
                        let arg = self.sum()?;
                        self.expect_rparen()?;
                        return Ok(Node::Unary(func, Box::new(arg)));
                    }
                }
                if let Some(i) = self.coordinates.iter().position(|c| *c == name) {
                    Ok(Node::Coord(i))
                } else if let Some(i) = self.parameters.iter().position(|p| *p == name) {
                    Ok(Node::Param(i))
                } else if name == "pi" {
                    Ok(Node::Const(std::f64::consts::PI))
                } else {
                    Err(ExprError::UnknownIdentifier { name, offset })
                }
            }
            Some((_, tok)) => Err(ExprError::Syntax {
                offset,
                message: format!("unexpected token {tok:?}"),
            }),
            None => Err(ExprError::Syntax { offset, message: "unexpected end of input".into() }),
        }
    }
}
