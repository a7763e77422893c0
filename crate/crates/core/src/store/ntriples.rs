//! Line parser for the N-Triples subset the store exchanges: IRIs, plain,
//! typed and language-tagged literals. Blank nodes are rejected; IRIs under
//! the statement prefix become statement nodes.

use std::iter::Peekable;
use std::str::Chars;

use super::term::{check_iri, valid_language_tag, Iri, Literal, Term, Triple};
use super::StoreError;

/// Parses a whole document. Duplicate lines are accepted.
pub fn parse_document(doc: &[u8], statement_prefix: &str) -> Result<Vec<Triple>, StoreError> {
    let text = match std::str::from_utf8(doc) {
        Ok(text) => text,
        Err(err) => {
            let line = doc[..err.valid_up_to()].iter().filter(|&&b| b == b'\n').count() + 1;
            return Err(StoreError::Parse {
                line,
                message: "invalid UTF-8".to_string(),
            });
        }
    };
    let mut triples = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let parsed =
            parse_line(line, statement_prefix).map_err(|message| StoreError::Parse { line: idx + 1, message })?;
        triples.extend(parsed);
    }
    Ok(triples)
}

/// Parses one line; `Ok(None)` for blank and comment lines.
pub fn parse_line(line: &str, statement_prefix: &str) -> Result<Option<Triple>, String> {
    let mut cur = Cursor {
        chars: line.chars().peekable(),
    };
    cur.skip_ws();
    match cur.peek() {
        None | Some('#') => return Ok(None),
        _ => {}
    }
    let subject = match cur.peek() {
        Some('<') => node(cur.iri()?, statement_prefix),
        Some('_') => return Err("blank nodes are not supported".to_string()),
        Some('"') => return Err("literal in subject position".to_string()),
        _ => return Err("expected IRI in subject position".to_string()),
    };
    cur.skip_ws();
    if cur.peek() != Some('<') {
        return Err("expected IRI in predicate position".to_string());
    }
    let predicate = Iri::new_unchecked(cur.iri()?);
    cur.skip_ws();
    let object = match cur.peek() {
        Some('<') => node(cur.iri()?, statement_prefix),
        Some('"') => Term::Literal(cur.literal()?),
        Some('_') => return Err("blank nodes are not supported".to_string()),
        _ => return Err("expected IRI or literal in object position".to_string()),
    };
    cur.skip_ws();
    if cur.next() != Some('.') {
        return Err("expected '.' at end of triple".to_string());
    }
    cur.skip_ws();
    match cur.peek() {
        None | Some('#') => Ok(Some(Triple::new(subject, predicate, object))),
        Some(c) => Err(format!("unexpected trailing character {c:?}")),
    }
}

fn node(iri: String, statement_prefix: &str) -> Term {
    if iri.starts_with(statement_prefix) {
        Term::Statement(iri)
    } else {
        Term::Iri(iri)
    }
}

struct Cursor<'a> {
    chars: Peekable<Chars<'a>>,
}

impl Cursor<'_> {
    fn peek(&mut self) -> Option<char> {
        self.chars.peek().copied()
    }

    fn next(&mut self) -> Option<char> {
        self.chars.next()
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(' ' | '\t')) {
            self.next();
        }
    }

    fn iri(&mut self) -> Result<String, String> {
        self.next(); // '<'
        let mut out = String::new();
        loop {
            match self.next() {
                None => return Err("unterminated IRI".to_string()),
                Some('>') => break,
                Some('\\') => match self.next() {
                    Some('u') => out.push(self.hex(4)?),
                    Some('U') => out.push(self.hex(8)?),
                    _ => return Err("invalid escape in IRI".to_string()),
                },
                Some(c) => out.push(c),
            }
        }
        check_iri(&out).map_err(|e| e.to_string())?;
        Ok(out)
    }

    fn literal(&mut self) -> Result<Literal, String> {
        self.next(); // '"'
        let mut lexical = String::new();
        loop {
            match self.next() {
                None => return Err("unterminated literal".to_string()),
                Some('"') => break,
                Some('\\') => {
                    let c = match self.next() {
                        Some('t') => '\t',
                        Some('b') => '\u{8}',
                        Some('n') => '\n',
                        Some('r') => '\r',
                        Some('f') => '\u{c}',
                        Some('"') => '"',
                        Some('\'') => '\'',
                        Some('\\') => '\\',
                        Some('u') => self.hex(4)?,
                        Some('U') => self.hex(8)?,
                        _ => return Err("invalid escape in literal".to_string()),
                    };
                    lexical.push(c);
                }
                Some('\n' | '\r') => return Err("raw line break in literal".to_string()),
                Some(c) => lexical.push(c),
            }
        }
        match self.peek() {
            Some('@') => {
                self.next();
                let mut tag = String::new();
                while let Some(c) = self.peek() {
                    if c.is_ascii_alphanumeric() || c == '-' {
                        tag.push(c);
                        self.next();
                    } else {
                        break;
                    }
                }
                if !valid_language_tag(&tag) {
                    return Err(format!("invalid language tag {tag:?}"));
                }
                Ok(Literal::lang(lexical, tag))
            }
            Some('^') => {
                self.next();
                if self.next() != Some('^') || self.peek() != Some('<') {
                    return Err("expected ^^<datatype>".to_string());
                }
                let datatype = self.iri()?;
                Ok(Literal::typed(lexical, &datatype))
            }
            _ => Ok(Literal::plain(lexical)),
        }
    }

    fn hex(&mut self, digits: usize) -> Result<char, String> {
        let mut value = 0u32;
        for _ in 0..digits {
            let d = self
                .next()
                .and_then(|c| c.to_digit(16))
                .ok_or_else(|| "invalid hex escape".to_string())?;
            value = value * 16 + d;
        }
        char::from_u32(value).ok_or_else(|| "escape is not a Unicode scalar".to_string())
    }
}
