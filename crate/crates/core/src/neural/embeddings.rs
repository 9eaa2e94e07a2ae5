//! Static token vectors in the plain text format: a header line `n dim`,
//! then `n` lines of a token followed by `dim` reals, space separated.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct StaticEmbeddings {
    tokens: Vec<String>,
    dim: usize,
    data: Vec<f64>,
    index: HashMap<String, usize>,
    mean: Vec<f64>,
}

fn format_err(line: usize, message: impl Into<String>) -> Error {
    Error::Format {
        line,
        message: message.into(),
    }
}

impl StaticEmbeddings {
    pub fn new(tokens: Vec<String>, dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || tokens.is_empty() {
            return Err(Error::EmptyInput("embedding table is empty".into()));
        }
        if data.len() != tokens.len() * dim {
            return Err(Error::DimensionMismatch {
                expected: tokens.len() * dim,
                actual: data.len(),
            });
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::Conflict(format!("duplicate token {t:?}")));
            }
        }
        let mut mean = vec![0.0; dim];
        for row in data.chunks(dim) {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        let n = tokens.len() as f64;
        mean.iter_mut().for_each(|m| *m /= n);
        Ok(StaticEmbeddings {
            tokens,
            dim,
            data,
            index,
            mean,
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| format_err(1, "missing header"))?;
        let mut parts = header.split_whitespace();
        let mut num = |what: &str| -> Result<usize> {
            parts
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| format_err(1, format!("header needs `n dim`, bad {what}")))
        };
        let n = num("n")?;
        let dim = num("dim")?;
        if dim == 0 {
            return Err(format_err(1, "dim must be positive"));
        }
        let mut tokens = Vec::with_capacity(n.min(1 << 16));
        let mut data = Vec::new();
        let mut seen = HashMap::new();
        for (i, line) in lines {
            let lineno = i + 1;
            let mut fields = line.split_whitespace();
            let token = fields.next().unwrap_or_default();
            let before = data.len();
            for f in fields {
                let v: f64 = f.parse().map_err(|_| format_err(lineno, format!("not a number: {f:?}")))?;
                if !v.is_finite() {
                    return Err(format_err(lineno, "non-finite value"));
                }
                data.push(v);
            }
            if data.len() - before != dim {
                return Err(format_err(lineno, format!("expected {dim} values, found {}", data.len() - before)));
            }
            if seen.insert(token.to_string(), lineno).is_some() {
                return Err(format_err(lineno, format!("duplicate token {token:?}")));
            }
            tokens.push(token.to_string());
        }
        if tokens.len() != n {
            return Err(format_err(1, format!("header declares {n} rows, found {}", tokens.len())));
        }
        Self::new(tokens, dim, data)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Text form; floats are written in shortest round-trip notation.
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.tokens.len(), self.dim);
        for (t, row) in self.tokens.iter().zip(self.data.chunks(self.dim)) {
            out.push_str(t);
            for v in row {
                let _ = write!(out, " {v:?}");
            }
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        Ok(std::fs::write(path, self.to_text())?)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn rows(&self) -> &[f64] {
        &self.data
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Stored vector, or the table mean for unknown tokens.
    pub fn lookup(&self, token: &str) -> &[f64] {
        match self.index.get(token) {
            Some(&i) => &self.data[i * self.dim..(i + 1) * self.dim],
            None => &self.mean,
        }
    }
}
