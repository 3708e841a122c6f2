use super::ExecError;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Tok {
    Ident(String),
    Number(f64),
    Str(String),
    Assign,
    Plus,
    Minus,
    Star,
    Slash,
    LParen,
    RParen,
    LBracket,
    RBracket,
    LBrace,
    RBrace,
    Comma,
    Colon,
    Newline,
    Eof,
}

impl Tok {
    pub(crate) fn describe(&self) -> String {
        match self {
            Tok::Ident(name) => format!("identifier `{name}`"),
            Tok::Number(v) => format!("number {v}"),
            Tok::Str(s) => format!("string {s:?}"),
            Tok::Assign => "`=`".into(),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Star => "`*`".into(),
            Tok::Slash => "`/`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::LBracket => "`[`".into(),
            Tok::RBracket => "`]`".into(),
            Tok::LBrace => "`{`".into(),
            Tok::RBrace => "`}`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Colon => "`:`".into(),
            Tok::Newline => "end of line".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Token {
    pub tok: Tok,
    pub line: usize,
    pub column: usize,
}

fn error(line: usize, column: usize, message: impl Into<String>) -> ExecError {
    ExecError::ParseError {
        line,
        column,
        message: message.into(),
    }
}

/// Splits source text into tokens. Newlines inside brackets are dropped so
/// list and dict literals may span lines.
pub(crate) fn tokenize(source: &str) -> Result<Vec<Token>, ExecError> {
    let chars: Vec<char> = source.chars().collect();
    let mut tokens = Vec::new();
    let mut depth: usize = 0;
    let (mut line, mut column) = (1usize, 1usize);
    let mut i = 0;

    while i < chars.len() {
        let c = chars[i];
        let (start_line, start_col) = (line, column);
        let mut push = |tok: Tok| {
            tokens.push(Token {
                tok,
                line: start_line,
                column: start_col,
            })
        };
        match c {
            ' ' | '\t' | '\r' => {
                i += 1;
                column += 1;
            }
            '\n' => {
                if depth == 0 {
                    push(Tok::Newline);
                }
                i += 1;
                line += 1;
                column = 1;
            }
            '0'..='9' | '.' => {
                let start = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                if i < chars.len() && chars[i] == '.' {
                    i += 1;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                    let mut j = i + 1;
                    if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                        j += 1;
                    }
                    if j < chars.len() && chars[j].is_ascii_digit() {
                        while j < chars.len() && chars[j].is_ascii_digit() {
                            j += 1;
                        }
                        i = j;
                    }
                }
                let text: String = chars[start..i].iter().collect();
                if i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                    return Err(error(
                        start_line,
                        start_col,
                        format!("malformed number literal `{text}{}`", chars[i]),
                    ));
                }
                let value: f64 = text.parse().map_err(|_| {
                    error(start_line, start_col, format!("malformed number `{text}`"))
                })?;
                push(Tok::Number(value));
                column += i - start;
            }
            c if c.is_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                push(Tok::Ident(chars[start..i].iter().collect()));
                column += i - start;
            }
            '"' | '\'' => {
                let quote = c;
                let start = i;
                i += 1;
                let mut text = String::new();
                loop {
                    match chars.get(i) {
                        None | Some('\n') => {
                            return Err(error(
                                start_line,
                                start_col,
                                "unterminated string literal",
                            ));
                        }
                        Some('\\') => {
                            return Err(error(
                                line,
                                column + (i - start),
                                "escape sequences are not supported",
                            ));
                        }
                        Some(&ch) if ch == quote => {
                            i += 1;
                            break;
                        }
                        Some(&ch) => {
                            text.push(ch);
                            i += 1;
                        }
                    }
                }
                push(Tok::Str(text));
                column += i - start;
            }
            _ => {
                let tok = match c {
                    '=' => Tok::Assign,
                    '+' => Tok::Plus,
                    '-' => Tok::Minus,
                    '*' => Tok::Star,
                    '/' => Tok::Slash,
                    '(' => Tok::LParen,
                    ')' => Tok::RParen,
                    '[' => Tok::LBracket,
                    ']' => Tok::RBracket,
                    '{' => Tok::LBrace,
                    '}' => Tok::RBrace,
                    ',' => Tok::Comma,
                    ':' => Tok::Colon,
                    '#' => return Err(error(line, column, "comments are not allowed")),
                    other => {
                        return Err(error(
                            line,
                            column,
                            format!("unexpected character `{other}`"),
                        ));
                    }
                };
                match tok {
                    Tok::LParen | Tok::LBracket | Tok::LBrace => depth += 1,
                    Tok::RParen | Tok::RBracket | Tok::RBrace => depth = depth.saturating_sub(1),
                    _ => {}
                }
                push(tok);
                i += 1;
                column += 1;
            }
        }
    }
    tokens.push(Token {
        tok: Tok::Eof,
        line,
        column,
    });
    Ok(tokens)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(src: &str) -> Vec<Tok> {
        tokenize(src).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn numbers_accept_decimals_and_exponents() {
        assert_eq!(
            kinds("x=1.5e-3"),
            vec![
                Tok::Ident("x".into()),
                Tok::Assign,
                Tok::Number(0.0015),
                Tok::Eof
            ]
        );
    }

    #[test]
    fn newlines_inside_brackets_are_dropped() {
        let toks = kinds("d={\n\"a\": 1,\n}\n");
        assert_eq!(toks.iter().filter(|t| **t == Tok::Newline).count(), 1);
    }

    #[test]
    fn comment_is_rejected_with_position() {
        let err = tokenize("x=1\n  # hi").unwrap_err();
        assert_eq!(
            err,
            ExecError::ParseError {
                line: 2,
                column: 3,
                message: "comments are not allowed".into()
            }
        );
    }

    #[test]
    fn identifier_glued_to_number_is_rejected() {
        assert!(tokenize("x=12abc").is_err());
    }
}
