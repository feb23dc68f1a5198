//! Line-oriented text format for detector error models.
//!
//! ```text
//! # comment
//! dem v1 detectors 4 observables 1
//! coord D0 0 0 0
//! etype D0-D1 3
//! etype D2-B 1
//! error(0.001) D0 D1
//! channel {
//!     error(0.0033) D0 D1 L0 @row=0
//!     error(0.0033) D0 D1 L0 ^ D2 @row=0
//! }
//! ```
//!
//! `^` separates the components of a decomposed mechanism. A `channel`
//! block groups mutually exclusive `error` lines and may also be written on
//! a single line. The header is optional; without it the detector and
//! observable counts are inferred from the largest index used.
//! Probabilities are written with the shortest decimal that parses back to
//! the same binary value.

use std::fmt::{self, Write as _};

use thiserror::Error;

use super::{
    Component, DetectorErrorModel, ExclusiveChannel, Mechanism, ModelError, ObsMask,
    MAX_OBSERVABLES,
};

#[derive(Debug, Clone, PartialEq, Error)]
#[error("line {line}, column {column}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseErrorKind {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("detector D{index} exceeds the declared detector count {declared}")]
    DetectorOverflow { index: u32, declared: usize },
    #[error("observable L{index} exceeds the declared observable count {declared}")]
    ObservableOverflow { index: u32, declared: usize },
    #[error("probability {0} outside the open interval (0, 1)")]
    ProbabilityRange(f64),
    #[error("invalid model: {0}")]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone)]
struct Token<'a> {
    text: &'a str,
    line: usize,
    column: usize,
}

fn tokenize<'a>(text: &'a str) -> Vec<Vec<Token<'a>>> {
    let mut lines = Vec::new();
    for (li, raw) in text.lines().enumerate() {
        let content = match raw.find('#') {
            Some(i) => &raw[..i],
            None => raw,
        };
        let mut toks = Vec::new();
        let mut start: Option<usize> = None;
        let flush = |toks: &mut Vec<Token<'a>>, s: usize, e: usize| {
            if e > s {
                toks.push(Token {
                    text: &content[s..e],
                    line: li + 1,
                    column: s + 1,
                });
            }
        };
        for (i, ch) in content.char_indices() {
            if ch.is_whitespace() || ch == '{' || ch == '}' {
                if let Some(s) = start.take() {
                    flush(&mut toks, s, i);
                }
                if ch == '{' || ch == '}' {
                    flush(&mut toks, i, i + 1);
                }
            } else if start.is_none() {
                start = Some(i);
            }
        }
        if let Some(s) = start {
            flush(&mut toks, s, content.len());
        }
        lines.push(toks);
    }
    lines
}

struct Parser {
    model: DetectorErrorModel,
    declared: Option<(usize, usize)>,
    max_det: Option<u32>,
    max_obs: Option<u32>,
    seen_content: bool,
}

fn err<T>(tok: &Token<'_>, kind: ParseErrorKind) -> Result<T, ParseError> {
    Err(ParseError {
        line: tok.line,
        column: tok.column,
        kind,
    })
}

fn syntax<T>(tok: &Token<'_>, msg: impl Into<String>) -> Result<T, ParseError> {
    err(tok, ParseErrorKind::Syntax(msg.into()))
}

fn parse_index(tok: &Token<'_>, prefix: char) -> Result<u32, ParseError> {
    tok.text
        .strip_prefix(prefix)
        .and_then(|s| s.parse::<u32>().ok())
        .map_or_else(
            || {
                syntax(
                    tok,
                    format!("expected {prefix}<index>, found `{}`", tok.text),
                )
            },
            Ok,
        )
}

impl Parser {
    fn detector(&mut self, tok: &Token<'_>) -> Result<u32, ParseError> {
        let d = parse_index(tok, 'D')?;
        if let Some((n, _)) = self.declared {
            if d as usize >= n {
                return err(
                    tok,
                    ParseErrorKind::DetectorOverflow {
                        index: d,
                        declared: n,
                    },
                );
            }
        }
        self.max_det = Some(self.max_det.map_or(d, |m| m.max(d)));
        Ok(d)
    }

    fn observable(&mut self, tok: &Token<'_>) -> Result<u32, ParseError> {
        let k = parse_index(tok, 'L')?;
        let limit = self.declared.map_or(MAX_OBSERVABLES, |(_, m)| m);
        if k as usize >= limit {
            return err(
                tok,
                ParseErrorKind::ObservableOverflow {
                    index: k,
                    declared: limit,
                },
            );
        }
        self.max_obs = Some(self.max_obs.map_or(k, |m| m.max(k)));
        Ok(k)
    }

    /// Parses `error(p) targets...` starting at `toks[0]`; returns the mechanism
    /// and the number of tokens consumed.
    fn error_line(&mut self, toks: &[Token<'_>]) -> Result<(Mechanism, usize), ParseError> {
        let head = &toks[0];
        let inner = head
            .text
            .strip_prefix("error(")
            .and_then(|s| s.strip_suffix(')'));
        let Some(inner) = inner else {
            return syntax(
                head,
                format!("expected `error(<p>)`, found `{}`", head.text),
            );
        };
        let p: f64 = match inner.parse() {
            Ok(p) => p,
            Err(_) => return syntax(head, format!("invalid probability `{inner}`")),
        };
        if !(p > 0.0 && p < 1.0) {
            return err(head, ParseErrorKind::ProbabilityRange(p));
        }
        let mut components = Vec::new();
        let mut dets = Vec::new();
        let mut obs: ObsMask = 0;
        let mut row = None;
        let mut used = 1;
        let mut pending_sep: Option<&Token<'_>> = None;
        for tok in &toks[1..] {
            if tok.text == "}" || tok.text.starts_with("error(") {
                break;
            }
            used += 1;
            match tok.text.as_bytes()[0] {
                b'D' => {
                    let d = self.detector(tok)?;
                    if dets.contains(&d) {
                        return syntax(tok, format!("duplicate target D{d}"));
                    }
                    dets.push(d);
                    pending_sep = None;
                }
                b'L' => {
                    let k = self.observable(tok)?;
                    obs ^= 1 << k;
                    pending_sep = None;
                }
                b'^' if tok.text == "^" => {
                    if dets.is_empty() && obs == 0 {
                        return syntax(tok, "empty component before `^`");
                    }
                    components.push(Component::new(std::mem::take(&mut dets), obs));
                    obs = 0;
                    pending_sep = Some(tok);
                }
                b'@' => {
                    let Some(v) = tok.text.strip_prefix("@row=") else {
                        return syntax(tok, format!("unknown annotation `{}`", tok.text));
                    };
                    match v.parse::<u32>() {
                        Ok(r) => row = Some(r),
                        Err(_) => return syntax(tok, format!("invalid row `{v}`")),
                    }
                }
                _ => return syntax(tok, format!("unexpected target `{}`", tok.text)),
            }
        }
        if let Some(sep) = pending_sep {
            return syntax(sep, "dangling `^`");
        }
        if !dets.is_empty() || obs != 0 {
            components.push(Component::new(dets, obs));
        }
        Ok((
            Mechanism {
                probability: p,
                components,
                row,
            },
            used,
        ))
    }
}

/// Parses the text format into a validated [`DetectorErrorModel`].
pub fn parse_dem(text: &str) -> Result<DetectorErrorModel, ParseError> {
    let lines = tokenize(text);
    let mut p = Parser {
        model: DetectorErrorModel::default(),
        declared: None,
        max_det: None,
        max_obs: None,
        seen_content: false,
    };
    // Open channel block and the token that opened it.
    let mut open: Option<(ExclusiveChannel, Token<'_>)> = None;
    let mut channel_origin: Vec<(usize, usize)> = Vec::new();

    for toks in &lines {
        let mut i = 0;
        while i < toks.len() {
            let tok = &toks[i];
            match tok.text {
                "dem" => {
                    if p.seen_content || p.declared.is_some() {
                        return syntax(tok, "header must be the first directive");
                    }
                    let rest: Vec<&str> = toks[i + 1..].iter().map(|t| t.text).collect();
                    let parsed = match rest.as_slice() {
                        ["v1", "detectors", n, "observables", m] => {
                            n.parse::<usize>().ok().zip(m.parse::<usize>().ok())
                        }
                        _ => None,
                    };
                    let Some((n, m)) = parsed else {
                        return syntax(tok, "expected `dem v1 detectors <n> observables <m>`");
                    };
                    if m > MAX_OBSERVABLES {
                        return err(
                            tok,
                            ParseErrorKind::Model(ModelError::TooManyObservables(m)),
                        );
                    }
                    p.declared = Some((n, m));
                    i = toks.len();
                }
                "coord" => {
                    p.seen_content = true;
                    if toks.len() - i != 5 {
                        return syntax(tok, "expected `coord D<i> <x> <y> <t>`");
                    }
                    let d = p.detector(&toks[i + 1])?;
                    let mut xyz = [0.0; 3];
                    for (k, t) in toks[i + 2..i + 5].iter().enumerate() {
                        xyz[k] = match t.text.parse() {
                            Ok(v) => v,
                            Err(_) => return syntax(t, format!("invalid coordinate `{}`", t.text)),
                        };
                    }
                    p.model.layout.coords.insert(d, xyz);
                    i = toks.len();
                }
                "etype" => {
                    p.seen_content = true;
                    if toks.len() - i != 3 {
                        return syntax(tok, "expected `etype D<i>-D<j>|D<i>-B <type>`");
                    }
                    let sig = &toks[i + 1];
                    let Some((a, b)) = sig.text.split_once('-') else {
                        return syntax(sig, format!("invalid edge signature `{}`", sig.text));
                    };
                    let at = Token {
                        text: a,
                        ..sig.clone()
                    };
                    let a = p.detector(&at)?;
                    let b = if b == "B" {
                        None
                    } else {
                        let bt = Token {
                            text: b,
                            ..sig.clone()
                        };
                        Some(p.detector(&bt)?)
                    };
                    let key = match b {
                        Some(b) if b < a => (b, Some(a)),
                        _ => (a, b),
                    };
                    let ty = &toks[i + 2];
                    let Ok(id) = ty.text.parse::<u32>() else {
                        return syntax(ty, format!("invalid type id `{}`", ty.text));
                    };
                    p.model.layout.edge_types.insert(key, id);
                    i = toks.len();
                }
                "channel" => {
                    p.seen_content = true;
                    if open.is_some() {
                        return syntax(tok, "nested channel blocks are not allowed");
                    }
                    if toks.get(i + 1).map(|t| t.text) != Some("{") {
                        return syntax(tok, "expected `{` after `channel`");
                    }
                    open = Some((ExclusiveChannel { mechanisms: vec![] }, tok.clone()));
                    i += 2;
                }
                "}" => {
                    let Some((ch, start)) = open.take() else {
                        return syntax(tok, "unmatched `}`");
                    };
                    if ch.mechanisms.is_empty() {
                        return syntax(&start, "empty channel block");
                    }
                    channel_origin.push((start.line, start.column));
                    p.model.channels.push(ch);
                    i += 1;
                }
                t if t.starts_with("error(") => {
                    p.seen_content = true;
                    let (mech, used) = p.error_line(&toks[i..])?;
                    match open.as_mut() {
                        Some((ch, _)) => ch.mechanisms.push(mech),
                        None => {
                            channel_origin.push((tok.line, tok.column));
                            p.model.channels.push(ExclusiveChannel::single(mech));
                        }
                    }
                    i += used;
                }
                _ => return syntax(tok, format!("unexpected token `{}`", tok.text)),
            }
        }
    }
    if let Some((_, start)) = open {
        return syntax(&start, "unterminated channel block");
    }

    let (n, m) = p.declared.unwrap_or((
        p.max_det.map_or(0, |d| d as usize + 1),
        p.max_obs.map_or(0, |k| k as usize + 1),
    ));
    p.model.num_detectors = n;
    p.model.num_observables = m;
    if let Err(e) = p.model.validate() {
        let (line, column) = match &e {
            ModelError::ChannelOverfull { channel, .. } | ModelError::EmptyChannel { channel } => {
                channel_origin[*channel]
            }
            _ => (1, 1),
        };
        return Err(ParseError {
            line,
            column,
            kind: ParseErrorKind::Model(e),
        });
    }
    Ok(p.model)
}

struct Targets<'a>(&'a Mechanism);

impl fmt::Display for Targets<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (ci, c) in self.0.components.iter().enumerate() {
            if ci > 0 {
                f.write_str(" ^")?;
            }
            for d in &c.detectors {
                write!(f, " D{d}")?;
            }
            let mut obs = c.observables;
            while obs != 0 {
                let k = obs.trailing_zeros();
                write!(f, " L{k}")?;
                obs &= obs - 1;
            }
        }
        if let Some(r) = self.0.row {
            write!(f, " @row={r}")?;
        }
        Ok(())
    }
}

/// Writes the model in the text format accepted by [`parse_dem`].
pub fn serialize_dem(model: &DetectorErrorModel) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "dem v1 detectors {} observables {}",
        model.num_detectors, model.num_observables
    );
    for (d, [x, y, t]) in &model.layout.coords {
        let _ = writeln!(out, "coord D{d} {x} {y} {t}");
    }
    for ((a, b), id) in &model.layout.edge_types {
        match b {
            Some(b) => {
                let _ = writeln!(out, "etype D{a}-D{b} {id}");
            }
            None => {
                let _ = writeln!(out, "etype D{a}-B {id}");
            }
        }
    }
    for ch in &model.channels {
        if let [m] = ch.mechanisms.as_slice() {
            let _ = writeln!(out, "error({}){}", m.probability, Targets(m));
        } else {
            out.push_str("channel {\n");
            for m in &ch.mechanisms {
                let _ = writeln!(out, "    error({}){}", m.probability, Targets(m));
            }
            out.push_str("}\n");
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_error_line() {
        let m = parse_dem("error(0.001) D0 D1").unwrap();
        assert_eq!(m.num_detectors, 2);
        assert_eq!(m.channels.len(), 1);
        assert_eq!(m.channels[0].mechanisms.len(), 1);
        let mech = &m.channels[0].mechanisms[0];
        assert_eq!(mech.probability, 0.001);
        assert_eq!(mech.components, vec![Component::new(vec![0, 1], 0)]);
    }

    #[test]
    fn inline_channel_with_decomposition() {
        let m = parse_dem("channel { error(0.01) D0 ^ D1 D2 L0 }").unwrap();
        assert_eq!(m.channels.len(), 1);
        let mech = &m.channels[0].mechanisms[0];
        assert_eq!(mech.components.len(), 2);
        assert_eq!(mech.components[0], Component::new(vec![0], 0));
        assert_eq!(mech.components[1], Component::new(vec![1, 2], 1));
        assert_eq!(m.num_observables, 1);
    }

    #[test]
    fn probability_out_of_range_has_location() {
        let e = parse_dem("dem v1 detectors 1 observables 0\nerror(1.5) D0").unwrap_err();
        assert_eq!(e.line, 2);
        assert_eq!(e.column, 1);
        assert_eq!(e.kind, ParseErrorKind::ProbabilityRange(1.5));
    }

    #[test]
    fn detector_overflow_has_location() {
        let e = parse_dem("dem v1 detectors 2 observables 0\nerror(0.1) D0 D2").unwrap_err();
        assert_eq!((e.line, e.column), (2, 15));
        assert!(matches!(
            e.kind,
            ParseErrorKind::DetectorOverflow {
                index: 2,
                declared: 2
            }
        ));
    }

    #[test]
    fn syntax_errors() {
        for bad in [
            "error(0.1) X0",
            "error(abc) D0",
            "channel { error(0.1) D0",
            "}",
            "error(0.1) D0 ^",
            "error(0.1) D0 D0",
            "channel { }",
            "error(0.1) D0\ndem v1 detectors 1 observables 0",
            "coord D0 1 2",
        ] {
            assert!(parse_dem(bad).is_err(), "{bad:?} should fail");
        }
    }

    #[test]
    fn overfull_channel_reports_block_line() {
        let e = parse_dem("# x\nchannel {\n error(0.6) D0\n error(0.6) D1\n}").unwrap_err();
        assert_eq!(e.line, 2);
        assert!(matches!(
            e.kind,
            ParseErrorKind::Model(ModelError::ChannelOverfull { .. })
        ));
    }

    #[test]
    fn empty_model_is_header_only() {
        let text = serialize_dem(&DetectorErrorModel::new(0, 0));
        assert_eq!(text, "dem v1 detectors 0 observables 0\n");
        assert_eq!(parse_dem(&text).unwrap(), DetectorErrorModel::new(0, 0));
    }

    #[test]
    fn decomposition_separator_survives_round_trip() {
        let src = "dem v1 detectors 4 observables 1\nerror(0.003) D0 D1 ^ D2 D3 L0 @row=1\n";
        let m = parse_dem(src).unwrap();
        let text = serialize_dem(&m);
        assert!(text.contains("D0 D1 ^ D2 D3 L0 @row=1"));
        assert_eq!(parse_dem(&text).unwrap(), m);
    }

    #[test]
    fn metadata_lines() {
        let src = "coord D0 1 2 3\ncoord D1 1.5 2 3\netype D1-D0 4\netype D1-B 2\nerror(0.1) D0 D1";
        let m = parse_dem(src).unwrap();
        assert_eq!(m.layout.coords[&1], [1.5, 2.0, 3.0]);
        assert_eq!(m.layout.edge_types[&(0, Some(1))], 4);
        assert_eq!(m.layout.edge_types[&(1, None)], 2);
    }

    #[test]
    fn comments_and_blank_lines() {
        let m = parse_dem("# header\n\nerror(0.25) D3 # trailing\n").unwrap();
        assert_eq!(m.num_detectors, 4);
        assert_eq!(m.channels[0].mechanisms[0].probability, 0.25);
    }
}
