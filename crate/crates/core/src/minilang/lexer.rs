#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Int(String),
    Kw(&'static str),
    Punct(&'static str),
    Eof,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Spanned {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{line}:{col}: unexpected character `{ch}`")]
pub struct LexError {
    pub line: usize,
    pub col: usize,
    pub ch: char,
}

const KEYWORDS: [&str; 11] = [
    "fn", "var", "if", "else", "while", "return", "true", "false", "int", "bool", "placeholder",
];

// Longest first so `<=` wins over `<`.
const PUNCT: [&str; 22] = [
    "<=", ">=", "==", "!=", "&&", "||", "(", ")", "{", "}", ",", ";", ":", "=", "+", "-", "*", "/",
    "%", "<", ">", "!",
];

pub fn lex(src: &str) -> Result<Vec<Spanned>, LexError> {
    let mut out = Vec::new();
    let mut line = 1;
    let mut col = 1;
    let bytes = src.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        let c = src[i..].chars().next().expect("in bounds");
        if c == '\n' {
            line += 1;
            col = 1;
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            col += 1;
            i += c.len_utf8();
            continue;
        }
        if src[i..].starts_with("//") {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        let (start_line, start_col) = (line, col);
        let tok = if c.is_ascii_alphabetic() || c == '_' {
            let len = src[i..]
                .find(|ch: char| !(ch.is_ascii_alphanumeric() || ch == '_'))
                .unwrap_or(src.len() - i);
            let word = &src[i..i + len];
            i += len;
            col += len;
            match KEYWORDS.iter().find(|k| **k == word) {
                Some(k) => Tok::Kw(k),
                None => Tok::Ident(word.to_string()),
            }
        } else if c.is_ascii_digit() {
            let len = src[i..]
                .find(|ch: char| !ch.is_ascii_digit())
                .unwrap_or(src.len() - i);
            let digits = &src[i..i + len];
            i += len;
            col += len;
            Tok::Int(digits.to_string())
        } else {
            match PUNCT.iter().find(|p| src[i..].starts_with(**p)) {
                Some(p) => {
                    i += p.len();
                    col += p.len();
                    Tok::Punct(p)
                }
                None => return Err(LexError { line, col, ch: c }),
            }
        };
        out.push(Spanned {
            tok,
            line: start_line,
            col: start_col,
        });
    }
    out.push(Spanned {
        tok: Tok::Eof,
        line,
        col,
    });
    Ok(out)
}
