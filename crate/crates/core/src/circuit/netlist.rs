//! Line-oriented netlist grammar.
//!
//! ```text
//! .title  Common-source amplifier
//! .random vt    gauss(0.5, 0.03)
//! .random temp  beta(2, 3, 17, 30)
//! V1  in  0  SIN(0 0.1 1k) AC 1
//! R1  in  out dist=uniform(800, 1200)
//! M1  out g 0 nmos kp=2e-4 w=1 l=1 vt=vt temp=temp
//! .tran 5m 10u
//! ```
//!
//! Keywords and names are case-insensitive and stored lowercase. Lines
//! starting with `*` are comments, `;` starts an inline comment and a leading
//! `+` continues the previous line. A parameter value is a number, the name of
//! a `.random` parameter, or an inline distribution such as `gauss(1k, 50)`.
//! The principal value of R, C and L may also be written `dist=<...>`.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::units::parse_value;
use super::waveform::Waveform;
use crate::basis::{Distribution, RandomParameter};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.column, self.message)
    }
}

#[derive(Debug, Clone, Error)]
#[error("{}", format_diagnostics(.0))]
pub struct ParseError(pub Vec<Diagnostic>);

fn format_diagnostics(d: &[Diagnostic]) -> String {
    let lines: Vec<String> = d.iter().map(|d| d.to_string()).collect();
    lines.join("\n")
}

/// A device parameter: a constant or a reference into [`Netlist::params`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ParamValue {
    Const(f64),
    Random(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DeviceKind {
    Resistor,
    Capacitor,
    Inductor,
    VoltageSource,
    CurrentSource,
    Diode,
    Mosfet { pmos: bool },
    Bjt { pnp: bool },
}

impl DeviceKind {
    pub fn terminals(self) -> usize {
        match self {
            DeviceKind::Mosfet { .. } | DeviceKind::Bjt { .. } => 3,
            _ => 2,
        }
    }

    /// Option keys each kind understands.
    fn known_options(self) -> &'static [&'static str] {
        match self {
            DeviceKind::Resistor | DeviceKind::Capacitor | DeviceKind::Inductor => &[],
            DeviceKind::VoltageSource | DeviceKind::CurrentSource => &[],
            DeviceKind::Diode => &["is", "n", "temp", "cj"],
            DeviceKind::Mosfet { .. } => &["kp", "w", "l", "vt", "lambda", "tcv", "temp", "cgs", "cgd"],
            DeviceKind::Bjt { .. } => &["is", "bf", "br", "temp", "cbe", "cbc"],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceSpec {
    pub waveform: Waveform,
    /// Small-signal magnitude and phase in degrees.
    pub ac: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceCard {
    pub name: String,
    pub kind: DeviceKind,
    pub nodes: Vec<String>,
    /// Principal value of R, C and L.
    pub value: Option<ParamValue>,
    pub source: Option<SourceSpec>,
    pub options: BTreeMap<String, ParamValue>,
    pub line: usize,
}

impl DeviceCard {
    pub fn option(&self, key: &str) -> Option<ParamValue> {
        self.options.get(key).copied()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum AnalysisSpec {
    Dc,
    DcSweep {
        source: String,
        start: f64,
        stop: f64,
        step: f64,
    },
    Tran {
        tstop: f64,
        hmax: Option<f64>,
    },
    Ac {
        fstart: f64,
        fstop: f64,
        points_per_decade: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Netlist {
    pub title: Option<String>,
    pub devices: Vec<DeviceCard>,
    pub params: Vec<RandomParameter>,
    pub analyses: Vec<AnalysisSpec>,
}

impl Netlist {
    pub fn device(&self, name: &str) -> Option<&DeviceCard> {
        let name = name.to_ascii_lowercase();
        self.devices.iter().find(|d| d.name == name)
    }

    pub fn param_index(&self, name: &str) -> Option<usize> {
        let name = name.to_ascii_lowercase();
        self.params.iter().position(|p| p.name == name)
    }
}

#[derive(Debug, Clone)]
struct Token {
    text: String,
    col: usize,
}

/// Splits on whitespace and commas outside parentheses, then glues
/// `SIN (..)` into `SIN(..)` and `key = value` into `key=value`.
fn tokenize(line: &str) -> Vec<Token> {
    let mut raw: Vec<Token> = Vec::new();
    let mut cur = String::new();
    let mut start = 0;
    let mut depth = 0i32;
    for (i, c) in line.chars().enumerate() {
        let sep = depth == 0 && (c.is_whitespace() || c == ',');
        if sep {
            if !cur.is_empty() {
                raw.push(Token {
                    text: std::mem::take(&mut cur),
                    col: start + 1,
                });
            }
            continue;
        }
        if cur.is_empty() {
            start = i;
        }
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            _ => {}
        }
        cur.push(c);
    }
    if !cur.is_empty() {
        raw.push(Token { text: cur, col: start + 1 });
    }
    let mut out: Vec<Token> = Vec::new();
    for tok in raw {
        if let Some(prev) = out.last_mut() {
            let glue = (tok.text.starts_with('(') && !prev.text.ends_with(')') && !prev.text.contains('('))
                || tok.text.starts_with('=')
                || prev.text.ends_with('=');
            if glue {
                prev.text.push_str(&tok.text);
                continue;
            }
        }
        out.push(tok);
    }
    out
}

/// `name(a b c)` into `("name", ["a","b","c"])`.
fn split_call(text: &str) -> Option<(String, Vec<String>)> {
    let open = text.find('(')?;
    if !text.ends_with(')') {
        return None;
    }
    let name = text[..open].trim().to_ascii_lowercase();
    let inner = &text[open + 1..text.len() - 1];
    let args = inner
        .split(|c: char| c.is_whitespace() || c == ',')
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect();
    Some((name, args))
}

struct Parser {
    diags: Vec<Diagnostic>,
    params: Vec<RandomParameter>,
    param_lookup: HashMap<String, usize>,
}

impl Parser {
    fn err(&mut self, line: usize, col: usize, msg: impl Into<String>) {
        self.diags.push(Diagnostic {
            line,
            column: col,
            message: msg.into(),
        });
    }

    fn number(&mut self, line: usize, tok: &Token, what: &str) -> Option<f64> {
        match parse_value(&tok.text) {
            Some(v) => Some(v),
            None => {
                self.err(line, tok.col, format!("expected a number for {what}, found `{}`", tok.text));
                None
            }
        }
    }

    fn numbers(&mut self, line: usize, col: usize, args: &[String], what: &str) -> Option<Vec<f64>> {
        let mut out = Vec::with_capacity(args.len());
        for a in args {
            match parse_value(a) {
                Some(v) => out.push(v),
                None => {
                    self.err(line, col, format!("bad argument `{a}` in {what}"));
                    return None;
                }
            }
        }
        Some(out)
    }

    /// Builds a random parameter from `kind(args)`.
    fn distribution(&mut self, line: usize, col: usize, name: &str, text: &str) -> Option<RandomParameter> {
        let Some((kind, args)) = split_call(text) else {
            self.err(line, col, format!("malformed distribution `{text}`"));
            return None;
        };
        let vals = self.numbers(line, col, &args, &kind)?;
        let arity = |n: usize, this: &mut Self| {
            if vals.len() != n {
                this.err(
                    line,
                    col,
                    format!("{kind}(...) takes {n} arguments, found {}", vals.len()),
                );
                false
            } else {
                true
            }
        };
        let built = match kind.as_str() {
            "gauss" | "gaussian" | "normal" => {
                if !arity(2, self) {
                    return None;
                }
                RandomParameter::gauss(name, vals[0], vals[1])
            }
            "uniform" => {
                if !arity(2, self) {
                    return None;
                }
                RandomParameter::uniform(name, vals[0], vals[1])
            }
            "gamma" => {
                if !arity(3, self) {
                    return None;
                }
                Distribution::gamma(vals[0]).and_then(|d| RandomParameter::new(name, d, vals[1], vals[2]))
            }
            "beta" => {
                if !arity(4, self) {
                    return None;
                }
                Distribution::beta(vals[0], vals[1])
                    .and_then(|d| RandomParameter::new(name, d, vals[2], vals[3] - vals[2]))
            }
            other => {
                self.err(line, col, format!("unknown distribution `{other}`"));
                return None;
            }
        };
        match built {
            Ok(p) => Some(p),
            Err(e) => {
                self.err(line, col, format!("malformed distribution: {e}"));
                None
            }
        }
    }

    fn declare(&mut self, line: usize, col: usize, p: RandomParameter) -> Option<usize> {
        if self.param_lookup.contains_key(&p.name) {
            self.err(line, col, format!("random parameter `{}` declared twice", p.name));
            return None;
        }
        let idx = self.params.len();
        self.param_lookup.insert(p.name.clone(), idx);
        self.params.push(p);
        Some(idx)
    }

    /// A value that may be a number, a declared parameter or an inline distribution.
    fn param_value(&mut self, line: usize, col: usize, owner: &str, text: &str) -> Option<ParamValue> {
        let lower = text.to_ascii_lowercase();
        if let Some(v) = parse_value(&lower) {
            return Some(ParamValue::Const(v));
        }
        if lower.contains('(') {
            let p = self.distribution(line, col, owner, &lower)?;
            return self.declare(line, col, p).map(ParamValue::Random);
        }
        match self.param_lookup.get(&lower) {
            Some(&i) => Some(ParamValue::Random(i)),
            None => {
                self.err(line, col, format!("undeclared random parameter `{lower}`"));
                None
            }
        }
    }

    fn source(&mut self, line: usize, toks: &[Token]) -> Option<SourceSpec> {
        let mut waveform = None;
        let mut ac = None;
        let mut i = 0;
        while i < toks.len() {
            let t = &toks[i];
            let lower = t.text.to_ascii_lowercase();
            if lower == "dc" {
                let Some(next) = toks.get(i + 1) else {
                    self.err(line, t.col, "DC needs a value");
                    return None;
                };
                waveform = Some(Waveform::Dc(self.number(line, next, "DC value")?));
                i += 2;
            } else if lower == "ac" {
                let Some(next) = toks.get(i + 1) else {
                    self.err(line, t.col, "AC needs a magnitude");
                    return None;
                };
                let mag = self.number(line, next, "AC magnitude")?;
                let mut phase = 0.0;
                i += 2;
                if let Some(ph) = toks.get(i).and_then(|t| parse_value(&t.text)) {
                    phase = ph;
                    i += 1;
                }
                ac = Some((mag, phase));
            } else if let Some((kind, args)) = split_call(&lower) {
                let vals = self.numbers(line, t.col, &args, &kind)?;
                waveform = Some(self.waveform(line, t.col, &kind, &vals)?);
                i += 1;
            } else if let Some(v) = parse_value(&lower) {
                waveform = Some(Waveform::Dc(v));
                i += 1;
            } else {
                self.err(line, t.col, format!("unexpected `{}` in source", t.text));
                return None;
            }
        }
        Some(SourceSpec {
            waveform: waveform.unwrap_or(Waveform::Dc(0.0)),
            ac,
        })
    }

    fn waveform(&mut self, line: usize, col: usize, kind: &str, v: &[f64]) -> Option<Waveform> {
        let get = |i: usize, default: f64| v.get(i).copied().unwrap_or(default);
        match kind {
            "sin" => {
                if v.len() < 3 || v.len() > 5 {
                    self.err(line, col, "SIN(vo va freq [td [theta]]) takes 3 to 5 arguments");
                    return None;
                }
                Some(Waveform::Sin {
                    offset: v[0],
                    amplitude: v[1],
                    freq: v[2],
                    delay: get(3, 0.0),
                    damping: get(4, 0.0),
                })
            }
            "pulse" => {
                if v.len() != 7 {
                    self.err(line, col, "PULSE(v1 v2 td tr tf pw per) takes 7 arguments");
                    return None;
                }
                if v[3] <= 0.0 || v[4] <= 0.0 {
                    self.err(line, col, "PULSE rise and fall times must be positive");
                    return None;
                }
                Some(Waveform::Pulse {
                    v1: v[0],
                    v2: v[1],
                    delay: v[2],
                    rise: v[3],
                    fall: v[4],
                    width: v[5],
                    period: v[6],
                })
            }
            "pwl" => {
                if v.is_empty() || !v.len().is_multiple_of(2) {
                    self.err(line, col, "PWL needs time/value pairs");
                    return None;
                }
                let pts: Vec<(f64, f64)> = v.chunks(2).map(|c| (c[0], c[1])).collect();
                if pts.windows(2).any(|w| w[1].0 < w[0].0) {
                    self.err(line, col, "PWL times must be non-decreasing");
                    return None;
                }
                Some(Waveform::Pwl(pts))
            }
            other => {
                self.err(line, col, format!("unknown waveform `{other}`"));
                None
            }
        }
    }

    fn device(&mut self, line: usize, toks: &[Token]) -> Option<DeviceCard> {
        let name = toks[0].text.to_ascii_lowercase();
        let kind = match name.chars().next() {
            Some('r') => DeviceKind::Resistor,
            Some('c') => DeviceKind::Capacitor,
            Some('l') => DeviceKind::Inductor,
            Some('v') => DeviceKind::VoltageSource,
            Some('i') => DeviceKind::CurrentSource,
            Some('d') => DeviceKind::Diode,
            Some('m') => DeviceKind::Mosfet { pmos: false },
            Some('q') => DeviceKind::Bjt { pnp: false },
            _ => {
                self.err(line, toks[0].col, format!("unknown device kind `{}`", toks[0].text));
                return None;
            }
        };
        let nt = kind.terminals();
        if toks.len() < 1 + nt {
            self.err(
                line,
                toks[0].col,
                format!("{name} needs {nt} nodes, found {}", toks.len() - 1),
            );
            return None;
        }
        let nodes: Vec<String> = toks[1..=nt].iter().map(|t| t.text.to_ascii_lowercase()).collect();
        for (t, n) in toks[1..=nt].iter().zip(&nodes) {
            if n.contains('=') || n.contains('(') {
                self.err(line, t.col, format!("expected a node name, found `{}`", t.text));
                return None;
            }
        }
        let rest = &toks[1 + nt..];
        let mut card = DeviceCard {
            name: name.clone(),
            kind,
            nodes,
            value: None,
            source: None,
            options: BTreeMap::new(),
            line,
        };
        match kind {
            DeviceKind::VoltageSource | DeviceKind::CurrentSource => {
                card.source = Some(self.source(line, rest)?);
                return Some(card);
            }
            DeviceKind::Resistor | DeviceKind::Capacitor | DeviceKind::Inductor => {
                let Some(t) = rest.first() else {
                    self.err(line, toks[0].col, format!("{name} needs a value"));
                    return None;
                };
                if rest.len() > 1 {
                    self.err(line, rest[1].col, format!("unexpected `{}`", rest[1].text));
                    return None;
                }
                let lower = t.text.to_ascii_lowercase();
                let text = lower
                    .strip_prefix("dist=")
                    .or_else(|| lower.strip_prefix("value="))
                    .unwrap_or(&lower);
                card.value = Some(self.param_value(line, t.col, &name, text)?);
                return Some(card);
            }
            _ => {}
        }
        let mut ok = true;
        for t in rest {
            let lower = t.text.to_ascii_lowercase();
            match (kind, lower.as_str()) {
                (DeviceKind::Mosfet { .. }, "nmos") => card.kind = DeviceKind::Mosfet { pmos: false },
                (DeviceKind::Mosfet { .. }, "pmos") => card.kind = DeviceKind::Mosfet { pmos: true },
                (DeviceKind::Bjt { .. }, "npn") => card.kind = DeviceKind::Bjt { pnp: false },
                (DeviceKind::Bjt { .. }, "pnp") => card.kind = DeviceKind::Bjt { pnp: true },
                _ => {
                    let Some((key, val)) = lower.split_once('=') else {
                        self.err(line, t.col, format!("expected key=value, found `{}`", t.text));
                        ok = false;
                        continue;
                    };
                    if !kind.known_options().contains(&key) {
                        self.err(line, t.col, format!("unknown option `{key}` for {name}"));
                        ok = false;
                        continue;
                    }
                    let owner = format!("{name}.{key}");
                    match self.param_value(line, t.col + key.len() + 1, &owner, val) {
                        Some(v) => {
                            card.options.insert(key.to_string(), v);
                        }
                        None => ok = false,
                    }
                }
            }
        }
        ok.then_some(card)
    }

    fn analysis(&mut self, line: usize, toks: &[Token]) -> Option<AnalysisSpec> {
        let card = toks[0].text.to_ascii_lowercase();
        let args = &toks[1..];
        let need = |this: &mut Self, lo: usize, hi: usize| {
            if args.len() < lo || args.len() > hi {
                this.err(line, toks[0].col, format!("{card} takes {lo} to {hi} arguments"));
                false
            } else {
                true
            }
        };
        match card.as_str() {
            ".dc" | ".op" => {
                if !need(self, 0, 0) {
                    return None;
                }
                Some(AnalysisSpec::Dc)
            }
            ".dcsweep" => {
                if !need(self, 4, 4) {
                    return None;
                }
                let start = self.number(line, &args[1], "sweep start")?;
                let stop = self.number(line, &args[2], "sweep stop")?;
                let step = self.number(line, &args[3], "sweep step")?;
                if step <= 0.0 {
                    self.err(line, args[3].col, "sweep step must be positive");
                    return None;
                }
                Some(AnalysisSpec::DcSweep {
                    source: args[0].text.to_ascii_lowercase(),
                    start,
                    stop,
                    step,
                })
            }
            ".tran" => {
                if !need(self, 1, 2) {
                    return None;
                }
                let tstop = self.number(line, &args[0], "tstop")?;
                let hmax = match args.get(1) {
                    Some(t) => Some(self.number(line, t, "hmax")?),
                    None => None,
                };
                if tstop <= 0.0 || hmax.is_some_and(|h| h <= 0.0) {
                    self.err(line, args[0].col, "transient times must be positive");
                    return None;
                }
                Some(AnalysisSpec::Tran { tstop, hmax })
            }
            ".ac" => {
                if !need(self, 3, 3) {
                    return None;
                }
                let fstart = self.number(line, &args[0], "fstart")?;
                let fstop = self.number(line, &args[1], "fstop")?;
                let ppd = self.number(line, &args[2], "points per decade")?;
                if !(fstart > 0.0 && fstop >= fstart && ppd >= 1.0 && ppd.fract() == 0.0) {
                    self.err(line, args[0].col, "need 0 < fstart <= fstop and a positive integer point count");
                    return None;
                }
                Some(AnalysisSpec::Ac {
                    fstart,
                    fstop,
                    points_per_decade: ppd as usize,
                })
            }
            _ => {
                self.err(line, toks[0].col, format!("unknown control card `{}`", toks[0].text));
                None
            }
        }
    }
}

/// Joins continuation lines and strips comments, keeping 1-based line numbers.
fn logical_lines(text: &str) -> Vec<(usize, String)> {
    let mut out: Vec<(usize, String)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let body = raw.split(';').next().unwrap_or("");
        let trimmed = body.trim_start();
        if trimmed.starts_with('*') || trimmed.trim().is_empty() {
            continue;
        }
        if let Some(cont) = trimmed.strip_prefix('+') {
            if let Some(last) = out.last_mut() {
                last.1.push(' ');
                last.1.push_str(cont);
                continue;
            }
        }
        out.push((i + 1, body.to_string()));
    }
    out
}

pub fn parse_netlist(text: &str) -> Result<Netlist, ParseError> {
    let mut p = Parser {
        diags: Vec::new(),
        params: Vec::new(),
        param_lookup: HashMap::new(),
    };
    let mut title = None;
    let mut devices: Vec<DeviceCard> = Vec::new();
    let mut analyses = Vec::new();
    // Random parameters are declared before devices reference them, regardless
    // of where the `.random` card sits in the file.
    let lines = logical_lines(text);
    for (line, body) in &lines {
        let toks = tokenize(body);
        if toks[0].text.eq_ignore_ascii_case(".random") {
            if toks.len() != 3 {
                p.err(*line, toks[0].col, ".random takes a name and a distribution");
                continue;
            }
            let name = toks[1].text.to_ascii_lowercase();
            let spec = toks[2].text.to_ascii_lowercase();
            let spec = spec.strip_prefix("dist=").unwrap_or(&spec).to_string();
            if let Some(param) = p.distribution(*line, toks[2].col, &name, &spec) {
                p.declare(*line, toks[1].col, param);
            }
        }
    }
    for (line, body) in &lines {
        let toks = tokenize(body);
        let head = toks[0].text.to_ascii_lowercase();
        if head == ".random" {
            continue;
        }
        if head == ".title" {
            let rest = body.trim_start();
            title = Some(rest[".title".len()..].trim().to_string());
        } else if head == ".end" {
            break;
        } else if head.starts_with('.') {
            if let Some(a) = p.analysis(*line, &toks) {
                analyses.push(a);
            }
        } else if let Some(card) = p.device(*line, &toks) {
            if devices.iter().any(|d| d.name == card.name) {
                p.err(*line, toks[0].col, format!("device `{}` defined twice", card.name));
            } else {
                devices.push(card);
            }
        }
    }
    let netlist = Netlist {
        title,
        devices,
        params: p.params,
        analyses,
    };
    let mut diags = p.diags;
    if diags.is_empty() {
        diags.extend(structural_checks(&netlist));
    }
    if diags.is_empty() {
        Ok(netlist)
    } else {
        diags.sort_by_key(|d| (d.line, d.column));
        Err(ParseError(diags))
    }
}

/// Node-level checks: a ground node exists and no node dangles from a single
/// terminal; sweep cards name an existing independent source.
fn structural_checks(n: &Netlist) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    if n.devices.is_empty() {
        diags.push(Diagnostic {
            line: 1,
            column: 1,
            message: "netlist has no devices".into(),
        });
        return diags;
    }
    let mut uses: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for d in &n.devices {
        for node in &d.nodes {
            uses.entry(node).or_insert((0, d.line)).0 += 1;
        }
    }
    if !uses.contains_key("0") && !uses.contains_key("gnd") {
        diags.push(Diagnostic {
            line: n.devices[0].line,
            column: 1,
            message: "no ground node `0` in netlist".into(),
        });
    }
    for (node, (count, line)) in &uses {
        if *count < 2 && *node != "0" && *node != "gnd" {
            diags.push(Diagnostic {
                line: *line,
                column: 1,
                message: format!("node `{node}` is connected to only one terminal (undeclared node?)"),
            });
        }
    }
    for a in &n.analyses {
        if let AnalysisSpec::DcSweep { source, .. } = a {
            let ok = n.device(source).is_some_and(|d| {
                matches!(d.kind, DeviceKind::VoltageSource | DeviceKind::CurrentSource)
            });
            if !ok {
                diags.push(Diagnostic {
                    line: 1,
                    column: 1,
                    message: format!("sweep source `{source}` is not an independent source"),
                });
            }
        }
    }
    diags
}

#[cfg(test)]
mod tests {
    use super::*;

    const RC: &str = "\
.title rc
V1 in 0 DC 1 AC 1
R1 in out 1k
C1 out 0 1u
.tran 1m
";

    #[test]
    fn plain_resistor() {
        let n = parse_netlist("R1 1 0 1k\nV1 1 0 1\n").unwrap();
        let r = n.device("R1").unwrap();
        assert_eq!(r.kind, DeviceKind::Resistor);
        assert_eq!(r.nodes, vec!["1", "0"]);
        assert_eq!(r.value, Some(ParamValue::Const(1000.0)));
    }

    #[test]
    fn inline_uniform() {
        let n = parse_netlist("R1 1 0 dist=uniform(800,1200)\nV1 1 0 1\n").unwrap();
        assert_eq!(n.params.len(), 1);
        let p = &n.params[0];
        assert_eq!(p.name, "r1");
        assert_eq!(p.dist, Distribution::Uniform);
        assert_eq!((p.shift, p.scale), (1000.0, 200.0));
        assert_eq!(n.device("r1").unwrap().value, Some(ParamValue::Random(0)));
    }

    #[test]
    fn declared_and_shared_parameters() {
        let text = "\
M1 d g 0 nmos kp=2e-4 vt=vtn temp=t
M2 d g 0 nmos vt=vtn
.random vtn gauss(0.5 30m)
.random t dist=beta(2, 3, 17, 30)
V1 d 0 1
V2 g 0 1
";
        let n = parse_netlist(text).unwrap();
        assert_eq!(n.params.len(), 2);
        let t = &n.params[1];
        assert_eq!(t.dist, Distribution::Beta { alpha: 2.0, beta: 3.0 });
        assert_eq!((t.shift, t.scale), (17.0, 13.0));
        assert_eq!(n.device("m2").unwrap().option("vt"), Some(ParamValue::Random(0)));
    }

    #[test]
    fn sources_and_analyses() {
        let text = "\
V1 a 0 SIN (0 1 1k) AC 2 90
I1 a 0 PULSE(0 1m 0 1n 1n 5u 10u)
V2 b 0 PWL(0 0 1m 1)
R5 a b 1k
R6 b 0 1k
.dcsweep v2 0 1 0.1
.ac 1 1meg 10
";
        let mut full = String::from(RC);
        full.push_str(text.replace("V1", "V9").as_str());
        let n = parse_netlist(&full).unwrap();
        assert_eq!(n.title.as_deref(), Some("rc"));
        let v9 = n.device("v9").unwrap().source.clone().unwrap();
        assert_eq!(v9.ac, Some((2.0, 90.0)));
        assert!(matches!(v9.waveform, Waveform::Sin { freq, .. } if freq == 1e3));
        assert_eq!(n.analyses.len(), 3);
        assert!(matches!(
            n.analyses[2],
            AnalysisSpec::Ac { points_per_decade: 10, .. }
        ));
    }

    #[test]
    fn continuation_and_comments() {
        let n = parse_netlist("* header\nV1 a 0 ; inline\n+ DC 2\nR1 a 0 1k\n").unwrap();
        assert_eq!(
            n.device("v1").unwrap().source.as_ref().unwrap().waveform,
            Waveform::Dc(2.0)
        );
    }

    #[test]
    fn dangling_node_is_named() {
        let err = parse_netlist("V1 a 0 1\nR1 a 0 1k\nR2 a b 1k\n").unwrap_err();
        assert!(err.to_string().contains("`b`"), "{err}");
    }

    #[test]
    fn collects_every_diagnostic() {
        let text = "X1 a 0 1\nR1 a 0 dist=weird(1)\nR2 a 0 dist=nope\n.tran -1\n";
        let err = parse_netlist(text).unwrap_err();
        assert_eq!(err.0.len(), 4, "{err}");
        assert_eq!((err.0[0].line, err.0[0].column), (1, 1));
        assert!(err.0[1].message.contains("unknown distribution"));
        assert!(err.0[2].message.contains("undeclared"));
        assert_eq!(err.0[3].line, 4);
    }

    #[test]
    fn empty_and_groundless() {
        assert!(parse_netlist("* nothing\n").is_err());
        let err = parse_netlist("R1 a b 1k\nR2 a b 1k\n").unwrap_err();
        assert!(err.to_string().contains("ground"));
    }

    #[test]
    fn malformed_distribution_arguments() {
        let err = parse_netlist("R1 a 0 dist=uniform(2, 1)\nV1 a 0 1\n").unwrap_err();
        assert!(err.to_string().contains("malformed"));
        let err = parse_netlist("R1 a 0 dist=gauss(1)\nV1 a 0 1\n").unwrap_err();
        assert!(err.to_string().contains("2 arguments"));
    }
}
