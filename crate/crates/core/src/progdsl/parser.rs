use std::collections::HashSet;

use super::ExecError;
use super::ast::{BinOp, Builtin, Expr, Program, Stmt};
use super::lexer::{Tok, Token, tokenize};

/// Deepest expression nesting the parser accepts.
const MAX_DEPTH: usize = 64;

/// Python keywords that may not be used as variable names; rejecting them
/// gives clearer errors for programs that stray outside the language.
const RESERVED: &[&str] = &[
    "and", "as", "assert", "async", "await", "break", "class", "continue", "def", "del", "elif",
    "else", "except", "finally", "for", "from", "global", "if", "import", "in", "is", "lambda",
    "nonlocal", "not", "or", "pass", "raise", "return", "try", "while", "with", "yield", "True",
    "False", "None",
];

/// Parses answer-program source text.
pub fn parse(source: &str) -> Result<Program, ExecError> {
    let tokens = tokenize(source)?;
    Parser {
        tokens,
        pos: 0,
        depth: 0,
    }
    .program()
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    depth: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn advance(&mut self) -> Token {
        let token = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        token
    }

    fn error_at(token: &Token, message: impl Into<String>) -> ExecError {
        ExecError::ParseError {
            line: token.line,
            column: token.column,
            message: message.into(),
        }
    }

    fn unexpected(&self, expected: &str) -> ExecError {
        let token = self.peek();
        Self::error_at(
            token,
            format!("expected {expected}, found {}", token.tok.describe()),
        )
    }

    fn expect(&mut self, tok: Tok, expected: &str) -> Result<Token, ExecError> {
        if self.peek().tok == tok {
            Ok(self.advance())
        } else {
            Err(self.unexpected(expected))
        }
    }

    fn skip_newlines(&mut self) {
        while self.peek().tok == Tok::Newline {
            self.advance();
        }
    }

    fn program(mut self) -> Result<Program, ExecError> {
        let mut statements = Vec::new();
        self.skip_newlines();
        while self.peek().tok != Tok::Eof {
            statements.push(self.statement()?);
            match self.peek().tok {
                Tok::Newline => self.skip_newlines(),
                Tok::Eof => {}
                _ => return Err(self.unexpected("end of line")),
            }
        }
        if statements.is_empty() {
            return Err(Self::error_at(self.peek(), "program has no statements"));
        }
        Ok(Program { statements })
    }

    fn statement(&mut self) -> Result<Stmt, ExecError> {
        let token = self.advance();
        let target = match token.tok {
            Tok::Ident(ref name) => name.clone(),
            _ => {
                return Err(Self::error_at(
                    &token,
                    format!("expected assignment target, found {}", token.tok.describe()),
                ));
            }
        };
        if RESERVED.contains(&target.as_str()) {
            return Err(Self::error_at(
                &token,
                format!("`{target}` is not supported in answer programs"),
            ));
        }
        if Builtin::from_name(&target).is_some() {
            return Err(Self::error_at(
                &token,
                format!("cannot assign to builtin `{target}`"),
            ));
        }
        self.expect(Tok::Assign, "`=`")?;
        let value = self.expr()?;
        Ok(Stmt {
            target,
            value,
            line: token.line,
        })
    }

    fn enter(&mut self) -> Result<(), ExecError> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return Err(Self::error_at(self.peek(), "expression nested too deeply"));
        }
        Ok(())
    }

    fn expr(&mut self) -> Result<Expr, ExecError> {
        self.enter()?;
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek().tok {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => break,
            };
            self.advance();
            let rhs = self.term()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        self.depth -= 1;
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ExecError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek().tok {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => break,
            };
            self.advance();
            let rhs = self.unary()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ExecError> {
        match self.peek().tok {
            Tok::Minus => {
                self.advance();
                self.enter()?;
                let inner = self.unary()?;
                self.depth -= 1;
                Ok(Expr::Neg(Box::new(inner)))
            }
            Tok::Plus => {
                self.advance();
                self.enter()?;
                let inner = self.unary()?;
                self.depth -= 1;
                Ok(inner)
            }
            _ => self.atom(),
        }
    }

    fn atom(&mut self) -> Result<Expr, ExecError> {
        let token = self.advance();
        match token.tok {
            Tok::Number(v) => Ok(Expr::Number(v)),
            Tok::Str(ref s) => Ok(Expr::Str(s.clone())),
            Tok::Ident(ref name) => {
                if self.peek().tok == Tok::LParen {
                    self.call(&token, name)
                } else if RESERVED.contains(&name.as_str()) {
                    Err(Self::error_at(
                        &token,
                        format!("`{name}` is not supported in answer programs"),
                    ))
                } else {
                    Ok(Expr::Var(name.clone()))
                }
            }
            Tok::LParen => {
                let inner = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(inner)
            }
            Tok::LBracket => {
                let items = self.sequence(Tok::RBracket, "`]`", Self::expr)?;
                Ok(Expr::List(items))
            }
            Tok::LBrace => self.dict(),
            ref other => Err(Self::error_at(
                &token,
                format!("expected expression, found {}", other.describe()),
            )),
        }
    }

    fn call(&mut self, name_token: &Token, name: &str) -> Result<Expr, ExecError> {
        let builtin = Builtin::from_name(name)
            .ok_or_else(|| Self::error_at(name_token, format!("unknown function `{name}`")))?;
        self.advance();
        let args = self.sequence(Tok::RParen, "`)`", Self::expr)?;
        if args.len() != builtin.arity() {
            return Err(Self::error_at(
                name_token,
                format!(
                    "`{name}` takes {} argument(s), got {}",
                    builtin.arity(),
                    args.len()
                ),
            ));
        }
        Ok(Expr::Call(builtin, args))
    }

    fn dict(&mut self) -> Result<Expr, ExecError> {
        let mut seen = HashSet::new();
        let entries = self.sequence(Tok::RBrace, "`}`", |p| {
            let key_token = p.advance();
            let key = match key_token.tok {
                Tok::Str(ref s) => s.clone(),
                ref other => {
                    return Err(Self::error_at(
                        &key_token,
                        format!("dict keys must be strings, found {}", other.describe()),
                    ));
                }
            };
            if !seen.insert(key.clone()) {
                return Err(Self::error_at(
                    &key_token,
                    format!("duplicate dict key {key:?}"),
                ));
            }
            p.expect(Tok::Colon, "`:`")?;
            let value = p.expr()?;
            Ok((key, value))
        })?;
        Ok(Expr::Dict(entries))
    }

    /// Comma-separated items up to `close`, allowing a trailing comma.
    fn sequence<T>(
        &mut self,
        close: Tok,
        close_desc: &str,
        mut item: impl FnMut(&mut Self) -> Result<T, ExecError>,
    ) -> Result<Vec<T>, ExecError> {
        self.enter()?;
        let mut items = Vec::new();
        loop {
            if self.peek().tok == close {
                self.advance();
                break;
            }
            items.push(item(self)?);
            match &self.peek().tok {
                Tok::Comma => {
                    self.advance();
                }
                t if *t == close => {
                    self.advance();
                    break;
                }
                _ => return Err(self.unexpected(&format!("`,` or {close_desc}"))),
            }
        }
        self.depth -= 1;
        Ok(items)
    }
}
