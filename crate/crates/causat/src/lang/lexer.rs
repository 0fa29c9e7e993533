use super::parser::{ParseError, ParseErrorKind};

#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) enum Tok {
    Ident(String),
    Number(String),
    LParen,
    RParen,
    LBracket,
    RBracket,
    LBrace,
    RBrace,
    Comma,
    Colon,
    Semi,
    Tilde,
    Amp,
    Bar,
    Plus,
    Star,
    Slash,
    Ge,
    Le,
    Gt,
    Lt,
    Eq,
}

impl Tok {
    pub(crate) fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Number(s) => format!("number `{s}`"),
            other => format!("`{}`", other.symbol()),
        }
    }

    fn symbol(&self) -> &'static str {
        match self {
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::LBracket => "[",
            Tok::RBracket => "]",
            Tok::LBrace => "{",
            Tok::RBrace => "}",
            Tok::Comma => ",",
            Tok::Colon => ":",
            Tok::Semi => ";",
            Tok::Tilde => "~",
            Tok::Amp => "&",
            Tok::Bar => "|",
            Tok::Plus => "+",
            Tok::Star => "*",
            Tok::Slash => "/",
            Tok::Ge => ">=",
            Tok::Le => "<=",
            Tok::Gt => ">",
            Tok::Lt => "<",
            Tok::Eq => "=",
            Tok::Ident(_) | Tok::Number(_) => "",
        }
    }
}

#[derive(Clone, Debug)]
pub(crate) struct Spanned {
    pub tok: Tok,
    pub offset: usize,
}

fn ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '\''
}

/// Split `src` into tokens. `#` starts a comment running to end of line.
pub(crate) fn lex(src: &str) -> Result<Vec<Spanned>, ParseError> {
    let mut out = Vec::new();
    let mut it = src.char_indices().peekable();
    while let Some(&(i, c)) = it.peek() {
        if c.is_whitespace() {
            it.next();
            continue;
        }
        if c == '#' {
            while let Some(&(_, c)) = it.peek() {
                if c == '\n' {
                    break;
                }
                it.next();
            }
            continue;
        }
        if ident_start(c) || c.is_ascii_digit() {
            let numeric = c.is_ascii_digit();
            let mut end = i;
            while let Some(&(j, d)) = it.peek() {
                let ok = if numeric { d.is_ascii_digit() } else { ident_char(d) };
                if !ok {
                    break;
                }
                end = j + d.len_utf8();
                it.next();
            }
            let text = src[i..end].to_string();
            let tok = if numeric { Tok::Number(text) } else { Tok::Ident(text) };
            out.push(Spanned { tok, offset: i });
            continue;
        }
        it.next();
        let two = |it: &mut std::iter::Peekable<std::str::CharIndices>, next: char, yes: Tok, no: Tok| {
            if it.peek().map(|p| p.1) == Some(next) {
                it.next();
                yes
            } else {
                no
            }
        };
        let tok = match c {
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            '[' => Tok::LBracket,
            ']' => Tok::RBracket,
            '{' => Tok::LBrace,
            '}' => Tok::RBrace,
            ',' => Tok::Comma,
            ':' => Tok::Colon,
            ';' => Tok::Semi,
            '~' => Tok::Tilde,
            '&' => Tok::Amp,
            '|' => Tok::Bar,
            '+' => Tok::Plus,
            '*' => Tok::Star,
            '/' => Tok::Slash,
            '=' => Tok::Eq,
            '>' => two(&mut it, '=', Tok::Ge, Tok::Gt),
            '<' => two(&mut it, '=', Tok::Le, Tok::Lt),
            other => return Err(ParseError::at(src, i, ParseErrorKind::UnexpectedChar(other))),
        };
        out.push(Spanned { tok, offset: i });
    }
    Ok(out)
}
