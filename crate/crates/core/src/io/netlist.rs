//! SPICE-flavored netlist text.
//!
//! ```text
//! * comment            # also a comment, anywhere on a line
//! .fref 2.1g
//! .vbias 1.1
//! .model smv cj0=2.35p vj=0.8 gamma=1.1 cpkg=0.4p qv=15 vbi=0.7
//! V1 1 0 1m freq=2.1g z=50
//! A1 1 0 1p freq=1.05g
//! L1 1 2 11n Q=80
//! X1 3 0 model=smv
//! .port 1 0 50
//! ```
//!
//! Element kinds by first letter: R, L, C, X (varactor, cathode first),
//! V (cw drive, value is available power in W), A (auxiliary generator).

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::model::{capacitance_at_bias, ElementKind, Netlist, NodeId, SourceSpec, VaractorModel};

const DEFAULT_SOURCE_Z: f64 = 50.0;

/// Problem found at a 1-based line and column.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl From<Diagnostic> for Error {
    fn from(d: Diagnostic) -> Self {
        Error::Parse {
            line: d.line,
            column: d.column,
            message: d.message,
        }
    }
}

/// Parsed text with every diagnostic; `netlist` holds what parsed cleanly.
#[derive(Debug, Clone)]
pub struct NetlistDocument {
    pub source: String,
    pub netlist: Netlist,
    pub diagnostics: Vec<Diagnostic>,
}

impl NetlistDocument {
    pub fn is_ok(&self) -> bool {
        self.diagnostics.is_empty()
    }
}

#[derive(Debug, Clone, Copy)]
struct Token<'a> {
    text: &'a str,
    col: usize,
}

fn tokenize(line: &str) -> Vec<Token<'_>> {
    let mut out = Vec::new();
    let mut start: Option<(usize, usize)> = None;
    for (col, (byte, ch)) in line.char_indices().enumerate() {
        let col = col + 1;
        if ch == '#' || ch == '*' {
            if let Some((b, c)) = start.take() {
                out.push(Token { text: &line[b..byte], col: c });
            }
            return out;
        }
        if ch.is_whitespace() {
            if let Some((b, c)) = start.take() {
                out.push(Token { text: &line[b..byte], col: c });
            }
        } else if start.is_none() {
            start = Some((byte, col));
        }
    }
    if let Some((b, c)) = start {
        out.push(Token { text: &line[b..], col: c });
    }
    out
}

/// Parses a number with an optional SPICE scale suffix (f p n u m k meg g t,
/// any case) followed by optional unit letters: `11n`, `1.4pF`, `2meg`, `1e-3`.
pub fn parse_value(s: &str) -> Option<f64> {
    let b = s.as_bytes();
    let mut i = 0;
    if i < b.len() && (b[i] == b'+' || b[i] == b'-') {
        i += 1;
    }
    let mut digits = 0;
    while i < b.len() && b[i].is_ascii_digit() {
        i += 1;
        digits += 1;
    }
    if i < b.len() && b[i] == b'.' {
        i += 1;
        while i < b.len() && b[i].is_ascii_digit() {
            i += 1;
            digits += 1;
        }
    }
    if digits == 0 {
        return None;
    }
    let base = &s[..i];
    let mut exp: i32 = 0;
    if i < b.len() && (b[i] == b'e' || b[i] == b'E') {
        let mut j = i + 1;
        if j < b.len() && (b[j] == b'+' || b[j] == b'-') {
            j += 1;
        }
        if j < b.len() && b[j].is_ascii_digit() {
            while j < b.len() && b[j].is_ascii_digit() {
                j += 1;
            }
            exp = s[i + 1..j].parse().ok()?;
            i = j;
        }
    }
    let rest = s[i..].to_ascii_lowercase();
    let (scale, skip) = if rest.starts_with("meg") {
        (6, 3)
    } else {
        match rest.as_bytes().first() {
            Some(b'f') => (-15, 1),
            Some(b'p') => (-12, 1),
            Some(b'n') => (-9, 1),
            Some(b'u') => (-6, 1),
            Some(b'm') => (-3, 1),
            Some(b'k') => (3, 1),
            Some(b'g') => (9, 1),
            Some(b't') => (12, 1),
            _ => (0, 0),
        }
    };
    if !rest[skip..].bytes().all(|c| c.is_ascii_alphabetic()) {
        return None;
    }
    // folding the scale into the exponent keeps `11n` equal to `11e-9`
    let v: f64 = format!("{base}e{}", exp.checked_add(scale)?).parse().ok()?;
    v.is_finite().then_some(v)
}

struct PendingVaractor {
    index: usize,
    line: usize,
    col: usize,
    model: String,
    model_col: usize,
    vbias: Option<f64>,
}

struct ModelDef {
    line: usize,
    model: VaractorModel,
}

struct Parser {
    net: Netlist,
    diags: Vec<Diagnostic>,
    names: HashSet<String>,
    models: BTreeMap<String, ModelDef>,
    vbias: Option<(f64, usize)>,
    varactors: Vec<PendingVaractor>,
    /// (line, column of node, column of reference, node, reference)
    ports: Vec<(usize, usize, usize, NodeId, NodeId)>,
}

type LineResult<T> = std::result::Result<T, Diagnostic>;

fn diag(line: usize, col: usize, message: impl Into<String>) -> Diagnostic {
    Diagnostic {
        line,
        column: col,
        message: message.into(),
    }
}

fn number(line: usize, t: Token<'_>, what: &str) -> LineResult<f64> {
    parse_value(t.text).ok_or_else(|| diag(line, t.col, format!("malformed number '{}' for {what}", t.text)))
}

fn node(line: usize, t: Token<'_>) -> LineResult<NodeId> {
    t.text
        .parse::<NodeId>()
        .map_err(|_| diag(line, t.col, format!("malformed node '{}'", t.text)))
}

/// Splits `key=value`, lowercasing the key.
fn key_value(line: usize, t: Token<'_>) -> LineResult<(String, Token<'_>)> {
    let (k, v) = t
        .text
        .split_once('=')
        .ok_or_else(|| diag(line, t.col, format!("expected key=value, found '{}'", t.text)))?;
    if k.is_empty() || v.is_empty() {
        return Err(diag(line, t.col, format!("incomplete parameter '{}'", t.text)));
    }
    Ok((
        k.to_ascii_lowercase(),
        Token {
            text: v,
            col: t.col + k.chars().count() + 1,
        },
    ))
}

fn missing(line: usize, t: Token<'_>, what: &str) -> Diagnostic {
    diag(line, t.col, format!("'{}' is missing {what}", t.text))
}

impl Parser {
    fn new() -> Self {
        Self {
            net: Netlist::new(),
            diags: Vec::new(),
            names: HashSet::new(),
            models: BTreeMap::new(),
            vbias: None,
            varactors: Vec::new(),
            ports: Vec::new(),
        }
    }

    fn line(&mut self, n: usize, tokens: &[Token<'_>]) -> LineResult<()> {
        let head = tokens[0];
        if head.text.starts_with('.') {
            self.directive(n, tokens)
        } else {
            self.element(n, tokens)
        }
    }

    fn directive(&mut self, n: usize, t: &[Token<'_>]) -> LineResult<()> {
        let name = t[0].text.to_ascii_lowercase();
        let arity = |count: usize| -> LineResult<()> {
            if t.len() != count + 1 {
                return Err(diag(
                    n,
                    t[0].col,
                    format!("{name} takes {count} argument(s), found {}", t.len() - 1),
                ));
            }
            Ok(())
        };
        match name.as_str() {
            ".port" => {
                arity(3)?;
                let (a, b) = (node(n, t[1])?, node(n, t[2])?);
                let z0 = number(n, t[3], "port impedance")?;
                self.ports.push((n, t[1].col, t[2].col, a, b));
                self.net.add_port(a, b, z0);
            }
            ".vbias" => {
                arity(1)?;
                if let Some((_, first)) = self.vbias {
                    return Err(diag(n, t[0].col, format!(".vbias already set on line {first}")));
                }
                self.vbias = Some((number(n, t[1], "bias voltage")?, n));
            }
            ".fref" => {
                arity(1)?;
                self.net.f_ref = Some(number(n, t[1], "reference frequency")?);
            }
            ".model" => {
                if t.len() < 2 {
                    return Err(diag(n, t[0].col, ".model needs a name"));
                }
                let key = t[1].text.to_ascii_lowercase();
                if let Some(prev) = self.models.get(&key) {
                    return Err(diag(
                        n,
                        t[1].col,
                        format!("model '{}' already defined on line {}", t[1].text, prev.line),
                    ));
                }
                let mut m = VaractorModel::default();
                for &tok in &t[2..] {
                    let (k, v) = key_value(n, tok)?;
                    let x = number(n, v, &k)?;
                    let slot = match k.as_str() {
                        "cj0" => &mut m.c_j0,
                        "vj" => &mut m.v_j,
                        "gamma" | "m" => &mut m.gamma,
                        "qv" => &mut m.q_v,
                        "vbi" => &mut m.v_bi,
                        "is" => &mut m.i_s,
                        "n" => &mut m.n_ideality,
                        "cpkg" => &mut m.c_pkg,
                        "vbr" | "bv" => &mut m.v_breakdown,
                        _ => return Err(diag(n, tok.col, format!("unknown model parameter '{k}'"))),
                    };
                    *slot = x;
                }
                self.models.insert(key, ModelDef { line: n, model: m });
            }
            ".end" => {}
            _ => return Err(diag(n, t[0].col, format!("unknown directive '{}'", t[0].text))),
        }
        Ok(())
    }

    fn element(&mut self, n: usize, t: &[Token<'_>]) -> LineResult<()> {
        let name = t[0];
        let kind = name.text.chars().next().map(|c| c.to_ascii_uppercase());
        if !matches!(kind, Some('R' | 'L' | 'C' | 'X' | 'V' | 'A')) {
            return Err(diag(n, name.col, format!("unknown element prefix in '{}'", name.text)));
        }
        if !self.names.insert(name.text.to_ascii_lowercase()) {
            return Err(diag(n, name.col, format!("duplicate element name '{}'", name.text)));
        }
        if t.len() < 3 {
            return Err(missing(n, name, "its nodes"));
        }
        let (a, b) = (node(n, t[1])?, node(n, t[2])?);
        let kind = kind.expect("checked above");
        let (value, params) = match t.get(3) {
            Some(v) if !v.text.contains('=') => (Some(number(n, *v, "element value")?), &t[4..]),
            _ => (None, &t[3.min(t.len())..]),
        };
        let mut kv = BTreeMap::new();
        for &tok in params {
            let (k, v) = key_value(n, tok)?;
            let allowed: &[&str] = match kind {
                'L' | 'C' => &["q"],
                'V' | 'A' => &["freq", "z"],
                'X' => &["model", "vbias"],
                _ => &[],
            };
            if !allowed.contains(&k.as_str()) {
                return Err(diag(n, tok.col, format!("unknown parameter '{k}' for {}", name.text)));
            }
            if kv.insert(k.clone(), (tok, v)).is_some() {
                return Err(diag(n, tok.col, format!("parameter '{k}' given twice")));
            }
        }
        let num = |k: &str| -> LineResult<Option<f64>> {
            kv.get(k).map(|&(_, v)| number(n, v, k)).transpose()
        };
        let need_value = || value.ok_or_else(|| missing(n, name, "a value"));
        let element = match kind {
            'R' => ElementKind::Resistor { ohms: need_value()? },
            'L' => ElementKind::Inductor {
                henries: need_value()?,
                q: num("q")?,
            },
            'C' => ElementKind::Capacitor {
                farads: need_value()?,
                q: num("q")?,
            },
            'V' | 'A' => {
                let spec = SourceSpec {
                    freq: num("freq")?.ok_or_else(|| missing(n, name, "freq="))?,
                    power: need_value()?,
                    z_source: num("z")?.unwrap_or(DEFAULT_SOURCE_Z),
                };
                if kind == 'V' {
                    ElementKind::CwSource(spec)
                } else {
                    ElementKind::PagSource(spec)
                }
            }
            'X' => {
                if let Some(v) = value {
                    return Err(diag(n, t[3].col, format!("varactor takes model=, not a value ({v})")));
                }
                let &(mtok, mval) = kv.get("model").ok_or_else(|| missing(n, name, "model="))?;
                self.varactors.push(PendingVaractor {
                    index: self.net.elements.len(),
                    line: n,
                    col: name.col,
                    model: mval.text.to_string(),
                    model_col: mtok.col,
                    vbias: num("vbias")?,
                });
                // placeholder until models are resolved
                ElementKind::Varactor {
                    model_name: mval.text.to_string(),
                    device: capacitance_at_bias(&VaractorModel::default(), 0.0).expect("default model is valid"),
                }
            }
            _ => unreachable!("prefix checked above"),
        };
        self.net.add(name.text, a, b, element);
        Ok(())
    }

    fn finish(mut self) -> (Netlist, Vec<Diagnostic>) {
        let mut drop = BTreeSet::new();
        for v in std::mem::take(&mut self.varactors) {
            match self.resolve(&v) {
                Ok(kind) => self.net.elements[v.index].kind = kind,
                Err(d) => {
                    self.diags.push(d);
                    drop.insert(v.index);
                }
            }
        }
        if !drop.is_empty() {
            let mut i = 0;
            self.net.elements.retain(|_| {
                i += 1;
                !drop.contains(&(i - 1))
            });
        }
        let used: BTreeSet<NodeId> = self
            .net
            .elements
            .iter()
            .flat_map(|e| [e.node_a, e.node_b])
            .chain([0])
            .collect();
        for &(line, ca, cb, a, b) in &self.ports {
            for (col, id) in [(ca, a), (cb, b)] {
                if !used.contains(&id) {
                    self.diags
                        .push(diag(line, col, format!("port refers to undefined node {id}")));
                }
            }
        }
        self.diags.sort_by_key(|d| (d.line, d.column));
        (self.net, self.diags)
    }

    fn resolve(&self, v: &PendingVaractor) -> LineResult<ElementKind> {
        let def = self
            .models
            .get(&v.model.to_ascii_lowercase())
            .ok_or_else(|| diag(v.line, v.model_col, format!("undefined model '{}'", v.model)))?;
        let bias = v
            .vbias
            .or(self.vbias.map(|b| b.0))
            .ok_or_else(|| diag(v.line, v.col, "varactor bias unknown: add .vbias or vbias="))?;
        let device = capacitance_at_bias(&def.model, bias).map_err(|e| diag(v.line, v.col, e.to_string()))?;
        Ok(ElementKind::Varactor {
            model_name: v.model.clone(),
            device,
        })
    }
}

/// Parses `text`, collecting every diagnostic instead of stopping at the first.
pub fn parse_document(text: &str) -> NetlistDocument {
    let mut p = Parser::new();
    for (i, raw) in text.lines().enumerate() {
        let tokens = tokenize(raw);
        if tokens.is_empty() {
            continue;
        }
        if let Err(d) = p.line(i + 1, &tokens) {
            p.diags.push(d);
        }
    }
    let (netlist, diagnostics) = p.finish();
    NetlistDocument {
        source: text.to_string(),
        netlist,
        diagnostics,
    }
}

/// Parses `text`; the first diagnostic becomes the error.
pub fn parse_netlist(text: &str) -> Result<Netlist> {
    let doc = parse_document(text);
    match doc.diagnostics.into_iter().next() {
        Some(d) => Err(d.into()),
        None => Ok(doc.netlist),
    }
}

/// Like [`parse_netlist`] for raw bytes; invalid UTF-8 is reported where it starts.
pub fn parse_netlist_bytes(bytes: &[u8]) -> Result<Netlist> {
    match std::str::from_utf8(bytes) {
        Ok(text) => parse_netlist(text),
        Err(e) => {
            let good = &bytes[..e.valid_up_to()];
            let line = good.iter().filter(|&&c| c == b'\n').count() + 1;
            let start = good.iter().rposition(|&c| c == b'\n').map_or(0, |p| p + 1);
            let column = std::str::from_utf8(&good[start..]).map_or(1, |s| s.chars().count() + 1);
            Err(Error::Parse {
                line,
                column,
                message: "invalid UTF-8".into(),
            })
        }
    }
}

/// Text form of `net` that parses back to the same structure. Element names
/// whose first letter does not match their kind get the kind letter prepended.
pub fn serialize_netlist(net: &Netlist) -> String {
    let mut out = String::new();
    if let Some(f) = net.f_ref {
        let _ = writeln!(out, ".fref {f:e}");
    }
    let mut models: BTreeMap<String, VaractorModel> = BTreeMap::new();
    let mut model_names = Vec::with_capacity(net.elements.len());
    let mut bias = None;
    for e in &net.elements {
        let ElementKind::Varactor { model_name, device } = &e.kind else {
            model_names.push(None);
            continue;
        };
        bias.get_or_insert(device.v_dc);
        let mut name = model_name.clone();
        let mut k = 2;
        while models.get(&name).is_some_and(|m| *m != device.model) {
            name = format!("{model_name}_{k}");
            k += 1;
        }
        models.insert(name.clone(), device.model);
        model_names.push(Some(name));
    }
    if let Some(v) = bias {
        let _ = writeln!(out, ".vbias {v:e}");
    }
    for (name, m) in &models {
        let _ = writeln!(
            out,
            ".model {name} cj0={:e} vj={:e} gamma={:e} qv={:e} vbi={:e} is={:e} n={:e} cpkg={:e} vbr={:e}",
            m.c_j0, m.v_j, m.gamma, m.q_v, m.v_bi, m.i_s, m.n_ideality, m.c_pkg, m.v_breakdown
        );
    }
    for (e, model) in net.elements.iter().zip(&model_names) {
        let letter = match e.kind {
            ElementKind::Resistor { .. } => 'R',
            ElementKind::Inductor { .. } => 'L',
            ElementKind::Capacitor { .. } => 'C',
            ElementKind::Varactor { .. } => 'X',
            ElementKind::CwSource(_) => 'V',
            ElementKind::PagSource(_) => 'A',
        };
        let name = if e.name.chars().next().map(|c| c.to_ascii_uppercase()) == Some(letter) {
            e.name.clone()
        } else {
            format!("{letter}{}", e.name)
        };
        let _ = write!(out, "{name} {} {}", e.node_a, e.node_b);
        match &e.kind {
            ElementKind::Resistor { ohms } => {
                let _ = write!(out, " {ohms:e}");
            }
            ElementKind::Inductor { henries: v, q } | ElementKind::Capacitor { farads: v, q } => {
                let _ = write!(out, " {v:e}");
                if let Some(q) = q {
                    let _ = write!(out, " q={q:e}");
                }
            }
            ElementKind::Varactor { device, .. } => {
                let _ = write!(out, " model={}", model.as_deref().expect("varactor has a model"));
                if Some(device.v_dc) != bias {
                    let _ = write!(out, " vbias={:e}", device.v_dc);
                }
            }
            ElementKind::CwSource(s) | ElementKind::PagSource(s) => {
                let _ = write!(out, " {:e} freq={:e} z={:e}", s.power, s.freq, s.z_source);
            }
        }
        out.push('\n');
    }
    for p in &net.ports {
        let _ = writeln!(out, ".port {} {} {:e}", p.node, p.reference, p.z0);
    }
    out
}
