//! Line-oriented experiment scripts.
//!
//! ```text
//! # prepare |−⟩ and flag failures
//! load 10 0.6
//! image nondestructive
//! pump 5ms
//! microwave 0.99 DPRIME M_MINUS
//! image error threshold=5.6
//! measure M_MINUS
//! ```
//!
//! Keywords are case-insensitive, `#` starts a comment, durations take an
//! `us`, `ms` or `s` suffix, and `repeat <n>` … `end` unrolls a block.

use std::fmt;

use thiserror::Error;

use super::schedule::{
    Angle, Depth, ImageKind, ImageOverrides, LoadInit, Primitive, Schedule, TimeSpan, TimeUnit, IMAGE_KEYS,
};
use crate::instruments::CompositeMode;
use crate::params::RamanKind;
use crate::state::StateBin;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ParseErrorCode {
    EmptySchedule,
    UnknownPrimitive,
    Arity,
    BadNumber,
    BadDuration,
    UnknownBin,
    UnknownScheme,
    BadOption,
    BadValue,
    LoadPlacement,
    TerminalPlacement,
    Precondition,
    Repeat,
}

impl ParseErrorCode {
    pub fn code(self) -> &'static str {
        match self {
            ParseErrorCode::EmptySchedule => "E001",
            ParseErrorCode::UnknownPrimitive => "E002",
            ParseErrorCode::Arity => "E003",
            ParseErrorCode::BadNumber => "E004",
            ParseErrorCode::BadDuration => "E005",
            ParseErrorCode::UnknownBin => "E006",
            ParseErrorCode::UnknownScheme => "E007",
            ParseErrorCode::BadOption => "E008",
            ParseErrorCode::BadValue => "E009",
            ParseErrorCode::LoadPlacement => "E010",
            ParseErrorCode::TerminalPlacement => "E011",
            ParseErrorCode::Precondition => "E012",
            ParseErrorCode::Repeat => "E013",
        }
    }
}

impl fmt::Display for ParseErrorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}, column {column}: [{code}] {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub code: ParseErrorCode,
    pub message: String,
}

impl ParseError {
    pub fn new(line: usize, column: usize, code: ParseErrorCode, message: String) -> Self {
        ParseError { line, column, code, message }
    }
}

#[derive(Debug, Clone, Copy)]
struct Token<'a> {
    text: &'a str,
    line: usize,
    column: usize,
}

impl<'a> Token<'a> {
    fn err(&self, code: ParseErrorCode, message: impl Into<String>) -> ParseError {
        ParseError::new(self.line, self.column, code, message.into())
    }
}

fn tokenize(line_no: usize, line: &str) -> Vec<Token<'_>> {
    let body = line.split('#').next().unwrap_or("");
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in body.char_indices().chain(std::iter::once((body.len(), ' '))) {
        match (c.is_whitespace(), start) {
            (true, Some(s)) => {
                out.push(Token { text: &body[s..i], line: line_no, column: body[..s].chars().count() + 1 });
                start = None;
            }
            (false, None) => start = Some(i),
            _ => {}
        }
    }
    out
}

fn number(tok: &Token<'_>) -> Result<f64, ParseError> {
    tok.text
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| tok.err(ParseErrorCode::BadNumber, format!("`{}` is not a number", tok.text)))
}

fn probability(tok: &Token<'_>) -> Result<f64, ParseError> {
    let v = number(tok)?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(tok.err(ParseErrorCode::BadValue, format!("{v} is not a probability")))
    }
}

fn duration(tok: &Token<'_>) -> Result<TimeSpan, ParseError> {
    let t = tok.text.to_ascii_lowercase();
    let (digits, unit) = if let Some(d) = t.strip_suffix("us") {
        (d, TimeUnit::Us)
    } else if let Some(d) = t.strip_suffix("ms") {
        (d, TimeUnit::Ms)
    } else if let Some(d) = t.strip_suffix('s') {
        (d, TimeUnit::S)
    } else {
        return Err(tok.err(ParseErrorCode::BadDuration, format!("`{}` needs a unit suffix (us, ms, s)", tok.text)));
    };
    match digits.parse::<f64>() {
        Ok(v) if v.is_finite() && v >= 0.0 => Ok(TimeSpan { value: v, unit }),
        _ => Err(tok.err(ParseErrorCode::BadDuration, format!("`{}` is not a non-negative duration", tok.text))),
    }
}

fn angle(tok: &Token<'_>) -> Result<Angle, ParseError> {
    let t = tok.text.to_ascii_lowercase();
    let bad = || tok.err(ParseErrorCode::BadNumber, format!("`{}` is not an angle", tok.text));
    let Some(pos) = t.find("pi") else {
        return number(tok).map(Angle::Rad);
    };
    let (pre, post) = (&t[..pos], &t[pos + 2..]);
    let mult = match pre {
        "" | "+" => 1.0,
        "-" => -1.0,
        p => p.trim_end_matches('*').parse::<f64>().map_err(|_| bad())?,
    };
    let div = match post {
        "" => 1.0,
        p => p.strip_prefix('/').and_then(|d| d.parse::<f64>().ok()).filter(|d| *d != 0.0).ok_or_else(bad)?,
    };
    Ok(Angle::PiTimes(mult / div))
}

fn bin(tok: &Token<'_>) -> Result<StateBin, ParseError> {
    tok.text.parse().map_err(|_| tok.err(ParseErrorCode::UnknownBin, format!("unknown state bin `{}`", tok.text)))
}

fn scheme(tok: &Token<'_>) -> Result<RamanKind, ParseError> {
    RamanKind::parse(tok.text).ok_or_else(|| {
        tok.err(
            ParseErrorCode::UnknownScheme,
            format!("unknown Raman scheme `{}` (xb, xa-current, xa-optimal)", tok.text),
        )
    })
}

type Split<'a> = (Vec<Token<'a>>, Vec<(String, Token<'a>)>);

/// Split `key=value` options off the positional arguments.
fn split_options<'a>(args: &[Token<'a>]) -> Result<Split<'a>, ParseError> {
    let mut pos = Vec::new();
    let mut opts = Vec::new();
    for tok in args {
        match tok.text.split_once('=') {
            Some((k, v)) if !k.is_empty() && !v.is_empty() => {
                let column = tok.column + k.chars().count() + 1;
                opts.push((k.to_ascii_lowercase(), Token { text: &tok.text[k.len() + 1..], line: tok.line, column }));
            }
            Some(_) => return Err(tok.err(ParseErrorCode::BadOption, format!("malformed option `{}`", tok.text))),
            None if opts.is_empty() => pos.push(*tok),
            None => return Err(tok.err(ParseErrorCode::BadOption, "positional argument after options")),
        }
    }
    Ok((pos, opts))
}

fn arity(head: &Token<'_>, pos: &[Token<'_>], min: usize, max: usize, usage: &str) -> Result<(), ParseError> {
    if pos.len() < min || pos.len() > max {
        return Err(head.err(ParseErrorCode::Arity, format!("expected `{usage}`")));
    }
    Ok(())
}

fn no_options(opts: &[(String, Token<'_>)]) -> Result<(), ParseError> {
    match opts.first() {
        Some((k, tok)) => Err(tok.err(ParseErrorCode::BadOption, format!("unexpected option `{k}`"))),
        None => Ok(()),
    }
}

fn image_overrides(opts: &[(String, Token<'_>)], skip: &[&str]) -> Result<ImageOverrides, ParseError> {
    let mut out = Vec::new();
    for (k, tok) in opts {
        if skip.contains(&k.as_str()) {
            continue;
        }
        if !IMAGE_KEYS.contains(&k.as_str()) {
            return Err(tok.err(ParseErrorCode::BadOption, format!("unknown image option `{k}`")));
        }
        let v = if k == "duration" { duration(tok)?.seconds() } else { number(tok)? };
        out.push((k.clone(), v));
    }
    Ok(out)
}

fn primitive(head: &Token<'_>, args: &[Token<'_>]) -> Result<Primitive, ParseError> {
    let (pos, opts) = split_options(args)?;
    let keyword = head.text.to_ascii_lowercase();
    let prim = match keyword.as_str() {
        "load" => {
            arity(head, &pos, 2, 2, "load <n_sites> <fill_prob> [init=<BIN>]")?;
            let n = pos[0]
                .text
                .parse::<usize>()
                .ok()
                .filter(|&n| n > 0)
                .ok_or_else(|| pos[0].err(ParseErrorCode::BadNumber, "n_sites must be a positive integer"))?;
            let mut init = LoadInit::Detect;
            for (k, tok) in &opts {
                match k.as_str() {
                    "init" if tok.text.eq_ignore_ascii_case("detect") => init = LoadInit::Detect,
                    "init" => init = LoadInit::Bin(bin(tok)?),
                    _ => return Err(tok.err(ParseErrorCode::BadOption, format!("unknown load option `{k}`"))),
                }
            }
            Primitive::Load { n_sites: n, fill_prob: probability(&pos[1])?, init }
        }
        "image" => {
            arity(head, &pos, 1, 1, "image <nondestructive|error|destructive> [key=value ...]")?;
            let kind = match pos[0].text.to_ascii_lowercase().as_str() {
                "nondestructive" => ImageKind::Nondestructive,
                "error" => ImageKind::Error,
                "destructive" => ImageKind::Destructive,
                other => return Err(pos[0].err(ParseErrorCode::BadValue, format!("unknown image kind `{other}`"))),
            };
            Primitive::Image { kind, overrides: image_overrides(&opts, &[])? }
        }
        "pump" => {
            arity(head, &pos, 1, 1, "pump <duration>")?;
            no_options(&opts)?;
            Primitive::Pump { duration: duration(&pos[0])? }
        }
        "microwave" => {
            arity(head, &pos, 3, 3, "microwave <fidelity> <SOURCE> <DEST>")?;
            no_options(&opts)?;
            let (source, dest) = (bin(&pos[1])?, bin(&pos[2])?);
            crate::instruments::check_selection_rule(source, dest)
                .map_err(|e| pos[1].err(ParseErrorCode::Precondition, e.to_string()))?;
            Primitive::Microwave { fidelity: probability(&pos[0])?, source, dest }
        }
        "raman" => {
            arity(head, &pos, 2, 3, "raman <scheme> <angle> [axis_phase]")?;
            no_options(&opts)?;
            let axis_phase = pos.get(2).map(angle).transpose()?.unwrap_or(Angle::Rad(0.0));
            Primitive::Raman { scheme: scheme(&pos[0])?, angle: angle(&pos[1])?, axis_phase }
        }
        "composite_detect" => {
            arity(head, &pos, 1, 1, "composite_detect <scheme> [mode=full|no-image|pi-only] [key=value ...]")?;
            let mut mode = CompositeMode::Full;
            for (k, tok) in &opts {
                if k == "mode" {
                    mode = CompositeMode::parse(tok.text)
                        .ok_or_else(|| tok.err(ParseErrorCode::BadValue, format!("unknown mode `{}`", tok.text)))?;
                }
            }
            let kind = scheme(&pos[0])?;
            if kind == RamanKind::XaCurrent && mode == CompositeMode::Full {
                return Err(pos[0].err(
                    ParseErrorCode::Precondition,
                    "xa-current light is resonant with the detection manifold; use mode=no-image or another scheme",
                ));
            }
            Primitive::CompositeDetect { scheme: kind, mode, overrides: image_overrides(&opts, &["mode"])? }
        }
        "hold" => {
            arity(head, &pos, 1, 1, "hold <duration> [repump=<period>]")?;
            let mut repump_period = None;
            for (k, tok) in &opts {
                match k.as_str() {
                    "repump" => {
                        let p = duration(tok)?;
                        if p.seconds() <= 0.0 {
                            return Err(tok.err(ParseErrorCode::BadDuration, "repump period must be positive"));
                        }
                        repump_period = Some(p);
                    }
                    _ => return Err(tok.err(ParseErrorCode::BadOption, format!("unknown hold option `{k}`"))),
                }
            }
            Primitive::Hold { duration: duration(&pos[0])?, repump_period }
        }
        "ramp" => {
            arity(head, &pos, 1, 1, "ramp <depth_uK|hf|ed>")?;
            no_options(&opts)?;
            let depth = match pos[0].text.to_ascii_lowercase().as_str() {
                "hf" => Depth::Hf,
                "ed" => Depth::Ed,
                _ => {
                    let v = number(&pos[0])?;
                    if v <= 0.0 {
                        return Err(pos[0].err(ParseErrorCode::BadValue, "ramp depth must be positive"));
                    }
                    Depth::Microkelvin(v)
                }
            };
            Primitive::Ramp { depth }
        }
        "convert" => {
            arity(head, &pos, 0, 0, "convert")?;
            no_options(&opts)?;
            Primitive::Convert
        }
        "measure" => {
            arity(head, &pos, 1, 1, "measure <TARGET_BIN>")?;
            no_options(&opts)?;
            Primitive::Measure { target: bin(&pos[0])? }
        }
        other => return Err(head.err(ParseErrorCode::UnknownPrimitive, format!("unknown primitive `{other}`"))),
    };
    Ok(prim)
}

/// Parse a script into a validated schedule.
pub fn parse_script(text: &str) -> Result<Schedule, ParseError> {
    // Each open block: repeat count, (step, script line) so far, and the
    // line and column of its `repeat`.
    type Block = (usize, Vec<(Primitive, usize)>, usize, usize);
    let mut stack: Vec<Block> = vec![(1, Vec::new(), 0, 0)];
    for (i, line) in text.lines().enumerate() {
        let toks = tokenize(i + 1, line);
        let Some(head) = toks.first() else { continue };
        match head.text.to_ascii_lowercase().as_str() {
            "repeat" => {
                if toks.len() != 2 {
                    return Err(head.err(ParseErrorCode::Arity, "expected `repeat <n>`"));
                }
                let n =
                    toks[1].text.parse::<usize>().ok().filter(|&n| n > 0).ok_or_else(|| {
                        toks[1].err(ParseErrorCode::BadNumber, "repeat count must be a positive integer")
                    })?;
                stack.push((n, Vec::new(), head.line, head.column));
            }
            "end" => {
                if toks.len() != 1 || stack.len() == 1 {
                    return Err(head.err(ParseErrorCode::Repeat, "`end` without an open `repeat`"));
                }
                let (n, body, _, _) = stack.pop().expect("open block");
                let parent = &mut stack.last_mut().expect("root block").1;
                for _ in 0..n {
                    parent.extend(body.iter().cloned());
                }
            }
            _ => {
                let prim = primitive(head, &toks[1..])?;
                stack.last_mut().expect("root block").1.push((prim, head.line));
            }
        }
    }
    if stack.len() > 1 {
        let (_, _, line, column) = stack.last().expect("open block");
        return Err(ParseError::new(*line, *column, ParseErrorCode::Repeat, "`repeat` without `end`".into()));
    }
    let (_, steps, _, _) = stack.pop().expect("root block");
    if steps.is_empty() {
        return Err(ParseError::new(1, 1, ParseErrorCode::EmptySchedule, "script has no steps".into()));
    }
    let lines: Vec<usize> = steps.iter().map(|s| s.1).collect();
    Schedule::new(steps.into_iter().map(|s| s.0).collect()).map_err(|mut e| {
        // Map the step number back onto the script line.
        e.line = lines.get(e.line.saturating_sub(1)).copied().unwrap_or(e.line);
        e
    })
}

/// Canonical text of a script: one primitive per line, lower-case keywords,
/// comments and blank lines dropped, repeats unrolled.
pub fn canonical(text: &str) -> Result<String, ParseError> {
    parse_script(text).map(|s| s.to_string())
}
