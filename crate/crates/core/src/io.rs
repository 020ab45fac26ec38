//! Text formats for problems and dominance certificates.
//!
//! Problem files are line oriented; `#` starts a comment and blank lines
//! are ignored. Node indices are 1-based.
//!
//! ```text
//! format_version 1
//! n 2
//! section quadratic
//! entry 1 1 2        # a_11
//! entry 1 2 1        # a_12 (a_21 is implied; if given it must agree)
//! entry 2 2 2
//! b 1 0
//! ```
//!
//! ```text
//! format_version 1
//! n 3
//! section general
//! node 1 quartic 1 1          # x⁴/4 + c x²/2 − b x   (c b)
//! node 2 quadratic 2 1        # a x²/2 − b x          (a b)
//! node 3 logcosh 1 0.5 0      # s log cosh x + c x²/2 − b x   (s c b)
//! edge 1 2 bilinear 0.3       # a x_i x_j
//! ```
//!
//! A general section must list every node exactly once. Certificate files
//! hold `format_version`, `kind`, `lambda`, `samples` and `w` lines.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::dominance::{CertificateKind, DominanceCertificate};
use crate::error::{Error, Result};
use crate::problem::{EdgeFactor, Graph, NodeFactor, PairwiseObjective, QuadraticProblem};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone)]
pub enum Problem {
    Quadratic(QuadraticProblem),
    General(PairwiseObjective),
}

impl Problem {
    pub fn n(&self) -> usize {
        match self {
            Self::Quadratic(q) => q.n(),
            Self::General(f) => f.n(),
        }
    }

    /// The objective in pairwise form.
    pub fn objective(&self) -> PairwiseObjective {
        match self {
            Self::Quadratic(q) => q.to_pairwise(),
            Self::General(f) => f.clone(),
        }
    }

    /// Quadratic view: the quadratic itself, or a general objective whose
    /// factors all happen to be quadratic/bilinear.
    pub fn quadratic(&self) -> Option<QuadraticProblem> {
        match self {
            Self::Quadratic(q) => Some(q.clone()),
            Self::General(f) => f.as_quadratic(),
        }
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

/// Non-empty lines with comments stripped, as `(line number, tokens)`.
fn tokenise(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(k, line)| {
        let content = line.split('#').next().unwrap_or("");
        let tokens: Vec<&str> = content.split_whitespace().collect();
        (!tokens.is_empty()).then_some((k + 1, tokens))
    })
}

fn number<T: FromStr>(line: usize, token: &str, what: &str) -> Result<T> {
    token
        .parse()
        .map_err(|_| parse_err(line, format!("cannot parse {what} from '{token}'")))
}

fn real(line: usize, token: &str) -> Result<f64> {
    let v: f64 = number(line, token, "a number")?;
    if !v.is_finite() {
        return Err(parse_err(line, format!("non-finite value '{token}'")));
    }
    Ok(v)
}

fn node_index(line: usize, token: &str, n: usize) -> Result<usize> {
    let i: usize = number(line, token, "a node index")?;
    if i == 0 || i > n {
        return Err(parse_err(line, format!("node index {i} outside 1..={n}")));
    }
    Ok(i - 1)
}

fn arity(line: usize, tokens: &[&str], expected: usize) -> Result<()> {
    if tokens.len() != expected {
        return Err(parse_err(
            line,
            format!(
                "'{}' expects {} fields, found {}",
                tokens[0],
                expected - 1,
                tokens.len() - 1
            ),
        ));
    }
    Ok(())
}

/// Attaches a line number to a validation error from problem construction.
fn at_line(line: usize, e: Error) -> Error {
    match e {
        Error::Parse { .. } => e,
        other => parse_err(line, other.to_string()),
    }
}

pub fn parse_problem(text: &str) -> Result<Problem> {
    let mut lines = tokenise(text).peekable();
    let mut version = None;
    let mut n = None;
    while let Some((line, tokens)) = lines.peek().cloned() {
        match tokens[0] {
            "format_version" => {
                arity(line, &tokens, 2)?;
                let v: u32 = number(line, tokens[1], "a format version")?;
                if v != FORMAT_VERSION {
                    return Err(parse_err(line, format!("unsupported format_version {v}")));
                }
                version = Some(v);
            }
            "n" => {
                arity(line, &tokens, 2)?;
                n = Some(number::<usize>(line, tokens[1], "a node count")?);
            }
            _ => break,
        }
        lines.next();
    }
    let first_body = lines.peek().map_or(1, |(l, _)| *l);
    if version.is_none() {
        return Err(parse_err(first_body, "missing 'format_version' header"));
    }
    let n = n.ok_or_else(|| parse_err(first_body, "missing 'n' header"))?;
    if n == 0 {
        return Err(parse_err(first_body, "n must be at least 1"));
    }
    let Some((line, tokens)) = lines.next() else {
        return Err(parse_err(first_body, "missing 'section' line"));
    };
    if tokens[0] != "section" || tokens.len() != 2 {
        return Err(parse_err(line, "expected 'section quadratic' or 'section general'"));
    }
    let body: Vec<(usize, Vec<&str>)> = lines.collect();
    match tokens[1] {
        "quadratic" => parse_quadratic(n, &body, line).map(Problem::Quadratic),
        "general" => parse_general(n, &body, line).map(Problem::General),
        other => Err(parse_err(line, format!("unknown section '{other}'"))),
    }
}

fn parse_quadratic(n: usize, body: &[(usize, Vec<&str>)], section: usize) -> Result<QuadraticProblem> {
    let mut triplets = Vec::new();
    let mut seen = std::collections::BTreeMap::new();
    let mut b = None;
    let mut last = section;
    for (line, tokens) in body {
        let line = *line;
        last = line;
        match tokens[0] {
            "entry" => {
                arity(line, tokens, 4)?;
                let i = node_index(line, tokens[1], n)?;
                let j = node_index(line, tokens[2], n)?;
                let v = real(line, tokens[3])?;
                if seen.insert((i, j), v).is_some() {
                    return Err(parse_err(line, format!("duplicate entry ({}, {})", i + 1, j + 1)));
                }
                if let Some(&mirror) = seen.get(&(j, i)) {
                    if mirror != v {
                        return Err(at_line(
                            line,
                            Error::Asymmetric {
                                i: i.min(j) + 1,
                                j: i.max(j) + 1,
                                a_ij: mirror,
                                a_ji: v,
                            },
                        ));
                    }
                }
                triplets.push((i, j, v));
            }
            "b" => {
                if b.is_some() {
                    return Err(parse_err(line, "duplicate 'b' line"));
                }
                arity(line, tokens, n + 1)?;
                b = Some(
                    tokens[1..]
                        .iter()
                        .map(|t| real(line, t))
                        .collect::<Result<Vec<f64>>>()?,
                );
            }
            other => return Err(parse_err(line, format!("unknown quadratic record '{other}'"))),
        }
    }
    let b = b.ok_or_else(|| parse_err(last, "missing 'b' line"))?;
    QuadraticProblem::from_triplets(n, &triplets, b).map_err(|e| at_line(last, e))
}

fn parse_node_factor(line: usize, tokens: &[&str]) -> Result<NodeFactor> {
    let params = |k: usize| -> Result<Vec<f64>> {
        arity(line, tokens, 3 + k)?;
        tokens[3..].iter().map(|t| real(line, t)).collect()
    };
    let f = match tokens[2] {
        "quadratic" => {
            let p = params(2)?;
            NodeFactor::Quadratic { a: p[0], b: p[1] }
        }
        "quartic" => {
            let p = params(2)?;
            NodeFactor::Quartic { c: p[0], b: p[1] }
        }
        "logcosh" => {
            let p = params(3)?;
            NodeFactor::LogCosh {
                s: p[0],
                c: p[1],
                b: p[2],
            }
        }
        other => return Err(parse_err(line, format!("unknown node factor family '{other}'"))),
    };
    f.validate().map_err(|e| at_line(line, e))?;
    Ok(f)
}

fn parse_general(n: usize, body: &[(usize, Vec<&str>)], section: usize) -> Result<PairwiseObjective> {
    let mut nodes: Vec<Option<NodeFactor>> = vec![None; n];
    let mut pairs = Vec::new();
    let mut factors = Vec::new();
    let mut last = section;
    for (line, tokens) in body {
        let line = *line;
        last = line;
        match tokens[0] {
            "node" => {
                if tokens.len() < 3 {
                    return Err(parse_err(line, "'node' needs an index and a family"));
                }
                let i = node_index(line, tokens[1], n)?;
                if nodes[i].is_some() {
                    return Err(parse_err(line, format!("node {} given twice", i + 1)));
                }
                nodes[i] = Some(parse_node_factor(line, tokens)?);
            }
            "edge" => {
                if tokens.len() < 4 {
                    return Err(parse_err(line, "'edge' needs two indices and a family"));
                }
                let i = node_index(line, tokens[1], n)?;
                let j = node_index(line, tokens[2], n)?;
                let f = match tokens[3] {
                    "bilinear" => {
                        arity(line, tokens, 5)?;
                        EdgeFactor::Bilinear {
                            a: real(line, tokens[4])?,
                        }
                    }
                    other => {
                        return Err(parse_err(line, format!("unknown edge factor family '{other}'")))
                    }
                };
                if i == j {
                    return Err(parse_err(line, "self-loop edge"));
                }
                let key = (i.min(j), i.max(j));
                if pairs.contains(&key) {
                    return Err(parse_err(line, format!("duplicate edge ({}, {})", i + 1, j + 1)));
                }
                pairs.push(key);
                factors.push(f);
            }
            other => return Err(parse_err(line, format!("unknown general record '{other}'"))),
        }
    }
    let nodes = nodes
        .into_iter()
        .enumerate()
        .map(|(i, f)| f.ok_or_else(|| parse_err(last, format!("node {} has no factor", i + 1))))
        .collect::<Result<Vec<_>>>()?;
    let graph = Graph::new(n, &pairs).map_err(|e| at_line(last, e))?;
    // Graph stores edges sorted; reorder the factors to match.
    let mut edges = vec![None; pairs.len()];
    for (&(i, j), f) in pairs.iter().zip(factors) {
        edges[graph.edge_index(i, j).unwrap()] = Some(f);
    }
    let edges = edges.into_iter().map(Option::unwrap).collect();
    PairwiseObjective::new(graph, nodes, edges).map_err(|e| at_line(last, e))
}

pub fn read_problem(path: &Path) -> Result<Problem> {
    parse_problem(&std::fs::read_to_string(path)?)
}

pub fn format_quadratic(q: &QuadraticProblem) -> String {
    let mut s = format!("format_version {FORMAT_VERSION}\nn {}\nsection quadratic\n", q.n());
    for (i, d) in q.diag().iter().enumerate() {
        let _ = writeln!(s, "entry {} {} {d}", i + 1, i + 1);
    }
    for (&(i, j), v) in q.graph().edges().iter().zip(q.off()) {
        let _ = writeln!(s, "entry {} {} {v}", i + 1, j + 1);
    }
    let b: Vec<String> = q.b().iter().map(f64::to_string).collect();
    let _ = writeln!(s, "b {}", b.join(" "));
    s
}

/// Fails for custom factors, which have no text form.
pub fn format_general(f: &PairwiseObjective) -> Result<String> {
    let mut s = format!("format_version {FORMAT_VERSION}\nn {}\nsection general\n", f.n());
    for (i, nf) in f.node_factors().iter().enumerate() {
        let _ = match *nf {
            NodeFactor::Quadratic { a, b } => writeln!(s, "node {} quadratic {a} {b}", i + 1),
            NodeFactor::Quartic { c, b } => writeln!(s, "node {} quartic {c} {b}", i + 1),
            NodeFactor::LogCosh { s: sc, c, b } => {
                writeln!(s, "node {} logcosh {sc} {c} {b}", i + 1)
            }
            NodeFactor::Custom(_) => {
                return Err(Error::InvalidProblem(format!(
                    "node {} has a custom factor with no text form",
                    i + 1
                )))
            }
        };
    }
    for (&(i, j), ef) in f.graph().edges().iter().zip(f.edge_factors()) {
        match *ef {
            EdgeFactor::Bilinear { a } => {
                let _ = writeln!(s, "edge {} {} bilinear {a}", i + 1, j + 1);
            }
            EdgeFactor::Custom(_) => {
                return Err(Error::InvalidProblem(format!(
                    "edge ({}, {}) has a custom factor with no text form",
                    i + 1,
                    j + 1
                )))
            }
        }
    }
    Ok(s)
}

pub fn format_problem(p: &Problem) -> Result<String> {
    match p {
        Problem::Quadratic(q) => Ok(format_quadratic(q)),
        Problem::General(f) => format_general(f),
    }
}

pub fn write_problem(path: &Path, p: &Problem) -> Result<()> {
    std::fs::write(path, format_problem(p)?)?;
    Ok(())
}

pub fn format_certificate(c: &DominanceCertificate) -> String {
    let w: Vec<String> = c.w.iter().map(f64::to_string).collect();
    format!(
        "format_version {FORMAT_VERSION}\nkind {}\nlambda {}\nsamples {}\nw {}\n",
        c.kind.name(),
        c.lambda,
        c.sample_count,
        w.join(" ")
    )
}

pub fn parse_certificate(text: &str) -> Result<DominanceCertificate> {
    let mut kind = None;
    let mut lambda = None;
    let mut samples = None;
    let mut w = None;
    let mut last = 1;
    for (line, tokens) in tokenise(text) {
        last = line;
        match tokens[0] {
            "format_version" => {
                arity(line, &tokens, 2)?;
                let v: u32 = number(line, tokens[1], "a format version")?;
                if v != FORMAT_VERSION {
                    return Err(parse_err(line, format!("unsupported format_version {v}")));
                }
            }
            "kind" => {
                arity(line, &tokens, 2)?;
                kind = Some(CertificateKind::parse(tokens[1]).ok_or_else(|| {
                    parse_err(line, format!("unknown certificate kind '{}'", tokens[1]))
                })?);
            }
            "lambda" => {
                arity(line, &tokens, 2)?;
                let l = real(line, tokens[1])?;
                if !(0.0..1.0).contains(&l) {
                    return Err(parse_err(line, format!("lambda {l} is not in [0, 1)")));
                }
                lambda = Some(l);
            }
            "samples" => {
                arity(line, &tokens, 2)?;
                samples = Some(number(line, tokens[1], "a sample count")?);
            }
            "w" => {
                let v = tokens[1..]
                    .iter()
                    .map(|t| real(line, t))
                    .collect::<Result<Vec<f64>>>()?;
                if v.is_empty() || v.iter().any(|&x| !(x > 0.0)) {
                    return Err(parse_err(line, "w must be a non-empty positive vector"));
                }
                w = Some(v);
            }
            other => return Err(parse_err(line, format!("unknown certificate record '{other}'"))),
        }
    }
    let missing = |what: &str| parse_err(last, format!("certificate is missing '{what}'"));
    Ok(DominanceCertificate {
        kind: kind.ok_or_else(|| missing("kind"))?,
        lambda: lambda.ok_or_else(|| missing("lambda"))?,
        sample_count: samples.unwrap_or(0),
        w: w.ok_or_else(|| missing("w"))?,
    })
}

pub fn read_certificate(path: &Path) -> Result<DominanceCertificate> {
    parse_certificate(&std::fs::read_to_string(path)?)
}

pub fn write_certificate(path: &Path, c: &DominanceCertificate) -> Result<()> {
    std::fs::write(path, format_certificate(c))?;
    Ok(())
}
