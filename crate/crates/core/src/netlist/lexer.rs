// SPDX-License-Identifier: Apache-2.0

//! Tokenizer for the structural Verilog subset.

use super::ParseError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Tok {
    /// Plain or escaped identifier (escape backslash and terminating space stripped).
    Ident(String),
    /// Unsized decimal number.
    Number(u64),
    /// Sized literal such as `1'b0`, kept verbatim.
    Literal(String),
    Punct(char),
}

#[derive(Debug, Clone)]
pub(crate) struct Token {
    pub tok: Tok,
    pub line: usize,
}

pub(crate) fn tokenize(text: &str) -> Result<Vec<Token>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    let mut line = 1;
    while i < bytes.len() {
        let c = bytes[i];
        match c {
            b'\n' => {
                line += 1;
                i += 1;
            }
            c if c.is_ascii_whitespace() => i += 1,
            b'/' if bytes.get(i + 1) == Some(&b'/') => {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
            }
            b'/' if bytes.get(i + 1) == Some(&b'*') => {
                let start = line;
                i += 2;
                loop {
                    if i + 1 >= bytes.len() {
                        return Err(ParseError::syntax(start, "unterminated block comment"));
                    }
                    if bytes[i] == b'\n' {
                        line += 1;
                    }
                    if bytes[i] == b'*' && bytes[i + 1] == b'/' {
                        i += 2;
                        break;
                    }
                    i += 1;
                }
            }
            // `(* attribute *)`
            b'(' if bytes.get(i + 1) == Some(&b'*') && bytes.get(i + 2) != Some(&b')') => {
                let start = line;
                i += 2;
                loop {
                    if i + 1 >= bytes.len() {
                        return Err(ParseError::syntax(start, "unterminated attribute"));
                    }
                    if bytes[i] == b'\n' {
                        line += 1;
                    }
                    if bytes[i] == b'*' && bytes[i + 1] == b')' {
                        i += 2;
                        break;
                    }
                    i += 1;
                }
            }
            // compiler directives such as `timescale run to end of line
            b'`' => {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
            }
            b'\\' => {
                let start = i + 1;
                i = start;
                while i < bytes.len() && !bytes[i].is_ascii_whitespace() {
                    i += 1;
                }
                if i == start {
                    return Err(ParseError::syntax(line, "empty escaped identifier"));
                }
                out.push(Token {
                    tok: Tok::Ident(text[start..i].to_string()),
                    line,
                });
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_' || bytes[i] == b'$') {
                    i += 1;
                }
                out.push(Token {
                    tok: Tok::Ident(text[start..i].to_string()),
                    line,
                });
            }
            c if c.is_ascii_digit() || c == b'\'' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'_') {
                    i += 1;
                }
                if i < bytes.len() && bytes[i] == b'\'' {
                    i += 1;
                    while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                        i += 1;
                    }
                    out.push(Token {
                        tok: Tok::Literal(text[start..i].to_string()),
                        line,
                    });
                } else {
                    let digits: String = text[start..i].chars().filter(|c| *c != '_').collect();
                    let value = digits
                        .parse()
                        .map_err(|_| ParseError::syntax(line, format!("bad number `{digits}`")))?;
                    out.push(Token {
                        tok: Tok::Number(value),
                        line,
                    });
                }
            }
            b'(' | b')' | b'[' | b']' | b':' | b';' | b',' | b'.' | b'=' | b'#' | b'{' | b'}' => {
                out.push(Token {
                    tok: Tok::Punct(c as char),
                    line,
                });
                i += 1;
            }
            _ => {
                let ch = text[i..].chars().next().unwrap_or('?');
                return Err(ParseError::syntax(line, format!("unexpected character `{ch}`")));
            }
        }
    }
    Ok(out)
}
