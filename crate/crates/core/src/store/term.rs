use std::fmt;

use serde::{Deserialize, Serialize};

use super::StoreError;
use crate::vocab::{RDF_LANG_STRING, XSD_STRING};

/// An absolute IRI.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Iri(String);

impl Iri {
    /// Validates that `value` has a scheme and contains no characters that
    /// N-Triples forbids inside `<...>`.
    pub fn new(value: impl Into<String>) -> Result<Self, StoreError> {
        let value = value.into();
        check_iri(&value)?;
        Ok(Iri(value))
    }

    /// Wraps a value known to be a valid IRI (vocabulary constants, minted IRIs).
    pub fn new_unchecked(value: impl Into<String>) -> Self {
        Iri(value.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn into_string(self) -> String {
        self.0
    }
}

impl fmt::Display for Iri {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{}>", self.0)
    }
}

impl From<Iri> for Term {
    fn from(iri: Iri) -> Self {
        Term::Iri(iri.0)
    }
}

pub(crate) fn check_iri(value: &str) -> Result<(), StoreError> {
    let scheme_end = value
        .find(':')
        .ok_or_else(|| StoreError::InvalidIri(value.to_string()))?;
    let scheme = &value[..scheme_end];
    let valid_scheme = scheme
        .chars()
        .enumerate()
        .all(|(i, c)| c.is_ascii_alphabetic() || (i > 0 && (c.is_ascii_digit() || "+-.".contains(c))));
    if scheme.is_empty() || !valid_scheme {
        return Err(StoreError::InvalidIri(value.to_string()));
    }
    if value.chars().any(|c| c <= ' ' || "<>\"{}|^`\\".contains(c)) {
        return Err(StoreError::InvalidIri(value.to_string()));
    }
    Ok(())
}

/// RDF literal. A literal carries either a language tag or a datatype, never
/// both; `xsd:string` is normalized to the absent datatype.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Literal {
    lexical: String,
    datatype: Option<String>,
    language: Option<String>,
}

impl Literal {
    pub fn plain(lexical: impl Into<String>) -> Self {
        Literal {
            lexical: lexical.into(),
            datatype: None,
            language: None,
        }
    }

    pub fn typed(lexical: impl Into<String>, datatype: &str) -> Self {
        let datatype = if datatype == XSD_STRING {
            None
        } else {
            Some(datatype.to_string())
        };
        Literal {
            lexical: lexical.into(),
            datatype,
            language: None,
        }
    }

    pub fn lang(lexical: impl Into<String>, language: impl Into<String>) -> Self {
        Literal {
            lexical: lexical.into(),
            datatype: None,
            language: Some(language.into()),
        }
    }

    pub fn lexical(&self) -> &str {
        &self.lexical
    }

    pub fn datatype(&self) -> &str {
        match (&self.datatype, &self.language) {
            (Some(dt), _) => dt,
            (None, Some(_)) => RDF_LANG_STRING,
            (None, None) => XSD_STRING,
        }
    }

    pub fn language(&self) -> Option<&str> {
        self.language.as_deref()
    }

    fn validate(&self) -> Result<(), StoreError> {
        if let Some(dt) = &self.datatype {
            check_iri(dt)?;
        }
        if let Some(lang) = &self.language {
            if !valid_language_tag(lang) {
                return Err(StoreError::InvalidLanguageTag(lang.clone()));
            }
        }
        Ok(())
    }
}

pub(crate) fn valid_language_tag(tag: &str) -> bool {
    let mut parts = tag.split('-');
    let first = parts.next().unwrap_or_default();
    !first.is_empty()
        && first.chars().all(|c| c.is_ascii_alphabetic())
        && parts.all(|p| !p.is_empty() && p.chars().all(|c| c.is_ascii_alphanumeric()))
}

/// A node or value of the graph.
///
/// Statement nodes are reified statements; they serialize as IRIs minted
/// under the statement namespace.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Term {
    Iri(String),
    Literal(Literal),
    Statement(String),
}

impl Term {
    pub fn iri(value: impl Into<String>) -> Self {
        Term::Iri(value.into())
    }

    pub fn literal(lexical: impl Into<String>) -> Self {
        Term::Literal(Literal::plain(lexical))
    }

    pub fn typed(lexical: impl Into<String>, datatype: &str) -> Self {
        Term::Literal(Literal::typed(lexical, datatype))
    }

    /// IRI text of an IRI or statement node.
    pub fn as_iri(&self) -> Option<&str> {
        match self {
            Term::Iri(iri) | Term::Statement(iri) => Some(iri),
            Term::Literal(_) => None,
        }
    }

    pub fn as_literal(&self) -> Option<&Literal> {
        match self {
            Term::Literal(lit) => Some(lit),
            _ => None,
        }
    }

    /// IRI text or literal lexical form.
    pub fn value(&self) -> &str {
        match self {
            Term::Iri(iri) | Term::Statement(iri) => iri,
            Term::Literal(lit) => &lit.lexical,
        }
    }

    pub fn is_literal(&self) -> bool {
        matches!(self, Term::Literal(_))
    }

    pub(crate) fn validate(&self) -> Result<(), StoreError> {
        match self {
            Term::Iri(iri) | Term::Statement(iri) => check_iri(iri),
            Term::Literal(lit) => lit.validate(),
        }
    }

    /// N-Triples serialization of the term.
    pub fn canonical(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Iri(iri) | Term::Statement(iri) => write!(f, "<{iri}>"),
            Term::Literal(lit) => {
                f.write_str("\"")?;
                write_escaped(f, &lit.lexical)?;
                f.write_str("\"")?;
                match (&lit.datatype, &lit.language) {
                    (_, Some(lang)) => write!(f, "@{lang}"),
                    (Some(dt), None) => write!(f, "^^<{dt}>"),
                    (None, None) => Ok(()),
                }
            }
        }
    }
}

fn write_escaped(f: &mut fmt::Formatter<'_>, text: &str) -> fmt::Result {
    for c in text.chars() {
        match c {
            '"' => f.write_str("\\\"")?,
            '\\' => f.write_str("\\\\")?,
            '\n' => f.write_str("\\n")?,
            '\r' => f.write_str("\\r")?,
            '\t' => f.write_str("\\t")?,
            '\u{8}' => f.write_str("\\b")?,
            '\u{c}' => f.write_str("\\f")?,
            c if c < ' ' || c == '\u{7f}' => write!(f, "\\u{:04X}", c as u32)?,
            c => write!(f, "{c}")?,
        }
    }
    Ok(())
}

/// A graph edge. Subjects are IRIs or statement nodes.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Triple {
    pub subject: Term,
    pub predicate: Iri,
    pub object: Term,
}

impl Triple {
    pub fn new(subject: Term, predicate: Iri, object: Term) -> Self {
        Triple {
            subject,
            predicate,
            object,
        }
    }

    /// Shorthand for IRI-only triples built from known-good strings.
    pub fn iris(subject: &str, predicate: &str, object: &str) -> Self {
        Triple::new(Term::iri(subject), Iri::new_unchecked(predicate), Term::iri(object))
    }

    pub fn validate(&self) -> Result<(), StoreError> {
        if self.subject.is_literal() {
            return Err(StoreError::LiteralSubject(self.subject.to_string()));
        }
        self.subject.validate()?;
        check_iri(self.predicate.as_str())?;
        self.object.validate()
    }
}

impl fmt::Display for Triple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {} .", self.subject, self.predicate, self.object)
    }
}
