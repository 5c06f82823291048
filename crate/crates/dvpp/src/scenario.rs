//! Line-oriented scenario files.
//!
//! ```text
//! preset case1
//! [system]
//! t_end = 20
//! [events]
//! load 1.0 2 -0.28
//! ```

use std::collections::BTreeSet;
use std::fmt;

use dvpp_core::design::{Role, ShapeInput};

use crate::presets;

#[derive(Debug, Clone, PartialEq)]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.column, self.message)
    }
}

impl std::error::Error for ParseError {}

#[derive(Debug, Clone, PartialEq)]
pub struct SemanticError(pub String);

impl fmt::Display for SemanticError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for SemanticError {}

#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioError {
    Parse(ParseError),
    Semantic(SemanticError),
}

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScenarioError::Parse(e) => write!(f, "parse error at {e}"),
            ScenarioError::Semantic(e) => write!(f, "invalid scenario: {e}"),
        }
    }
}

impl std::error::Error for ScenarioError {}

impl From<ParseError> for ScenarioError {
    fn from(e: ParseError) -> Self {
        ScenarioError::Parse(e)
    }
}

impl From<SemanticError> for ScenarioError {
    fn from(e: SemanticError) -> Self {
        ScenarioError::Semantic(e)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct System {
    pub base_mva: f64,
    pub base_kv: f64,
    pub f_base: f64,
    pub dt: f64,
    pub t_end: f64,
    /// Grid-forming share of every device; `None` keeps the fleet as written.
    pub epsilon: Option<f64>,
    pub residual_tol: f64,
    pub trace_tol: f64,
}

impl Default for System {
    fn default() -> Self {
        System {
            base_mva: 100.0,
            base_kv: 230.0,
            f_base: 50.0,
            dt: 1e-3,
            t_end: 10.0,
            epsilon: None,
            residual_tol: 1e-6,
            trace_tol: 0.02,
        }
    }
}

impl System {
    pub fn omega_b(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.f_base
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tdes {
    pub h_p: f64,
    pub d_p: f64,
    pub d_q: f64,
    pub tau_pll: f64,
    pub pll_order: Option<usize>,
    pub tau_aug: f64,
    /// Conservatism of the static `q'` droops in area models (`k / D_q`).
    pub q_droop_factor: f64,
}

impl Default for Tdes {
    fn default() -> Self {
        Tdes {
            h_p: 5.55,
            d_p: 33.33,
            d_q: 0.01,
            tau_pll: 0.01,
            pll_order: None,
            tau_aug: 0.01,
            q_droop_factor: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeviceLine {
    pub name: String,
    pub bus: String,
    pub role: Role,
    pub shape: ShapeInput,
    pub tau: f64,
    pub mu: Option<f64>,
    pub rating: f64,
    pub tau_dc: f64,
    pub p_capacity: Option<f64>,
}

/// Synchronous machine as a swing-equation equivalent on its own rating.
#[derive(Debug, Clone, PartialEq)]
pub struct Machine {
    pub name: String,
    pub bus: String,
    /// Inertia constant (s).
    pub h: f64,
    /// Speed droop (pu/pu).
    pub droop: f64,
    pub rating: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Line {
    pub from: String,
    pub to: String,
    pub b: f64,
    pub rx: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct NetworkSpec {
    pub lines: Vec<Line>,
    pub pcc: Option<String>,
    pub pocs: Vec<String>,
    pub rx: Option<f64>,
}

impl NetworkSpec {
    pub fn buses(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        let mut push = |b: &String| {
            if !out.contains(b) {
                out.push(b.clone());
            }
        };
        if let Some(p) = &self.pcc {
            push(p);
        }
        for p in &self.pocs {
            push(p);
        }
        for l in &self.lines {
            push(&l.from);
            push(&l.to);
        }
        out
    }

    pub fn is_area(&self) -> bool {
        !self.pocs.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Event {
    Load { t: f64, bus: String, dp: f64 },
    Capacity { t: f64, device: String, p_capacity: f64 },
    Outage { t: f64, device: String },
}

impl Event {
    pub fn time(&self) -> f64 {
        match self {
            Event::Load { t, .. } | Event::Capacity { t, .. } | Event::Outage { t, .. } => *t,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarlo {
    pub samples: usize,
    pub min: f64,
    pub max: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Scenario {
    pub preset: Option<String>,
    pub system: System,
    pub tdes: Tdes,
    pub devices: Vec<DeviceLine>,
    pub machines: Vec<Machine>,
    pub network: NetworkSpec,
    pub events: Vec<Event>,
    pub montecarlo: Option<MonteCarlo>,
    /// Requested channels; empty means all.
    pub outputs: Vec<String>,
}

impl Scenario {
    pub fn device(&self, name: &str) -> Option<&DeviceLine> {
        self.devices.iter().find(|d| d.name == name)
    }

    pub fn machine(&self, name: &str) -> Option<&Machine> {
        self.machines.iter().find(|m| m.name == name)
    }

    /// Sum of all load-event steps.
    pub fn total_load_step(&self) -> f64 {
        self.events
            .iter()
            .map(|e| match e {
                Event::Load { dp, .. } => *dp,
                _ => 0.0,
            })
            .sum()
    }
}

#[derive(Clone, Copy)]
struct Tok<'a> {
    text: &'a str,
    col: usize,
}

fn tokens(line: &str) -> Vec<Tok<'_>> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in line.char_indices() {
        match (c.is_whitespace(), start) {
            (true, Some(s)) => {
                out.push(Tok {
                    text: &line[s..i],
                    col: s + 1,
                });
                start = None;
            }
            (false, None) => start = Some(i),
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push(Tok {
            text: &line[s..],
            col: s + 1,
        });
    }
    out
}

struct Cursor {
    line: usize,
}

impl Cursor {
    fn err(&self, col: usize, msg: impl Into<String>) -> ParseError {
        ParseError {
            line: self.line,
            column: col,
            message: msg.into(),
        }
    }

    fn num(&self, t: Tok<'_>, what: &str) -> Result<f64, ParseError> {
        t.text
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| self.err(t.col, format!("expected a number for {what}, found `{}`", t.text)))
    }

    fn opt_num(&self, t: Tok<'_>, what: &str) -> Result<Option<f64>, ParseError> {
        match t.text {
            "-" | "auto" => Ok(None),
            _ => self.num(t, what).map(Some),
        }
    }

    fn count(&self, t: Tok<'_>, what: &str) -> Result<usize, ParseError> {
        t.text
            .parse::<usize>()
            .map_err(|_| self.err(t.col, format!("expected a count for {what}, found `{}`", t.text)))
    }

    fn arity(&self, toks: &[Tok<'_>], n: usize, usage: &str) -> Result<(), ParseError> {
        if toks.len() < n {
            let col = toks.last().map(|t| t.col + t.text.len()).unwrap_or(1);
            return Err(self.err(col, format!("too few fields, expected `{usage}`")));
        }
        if toks.len() > n {
            return Err(self.err(
                toks[n].col,
                format!("unexpected field `{}`, expected `{usage}`", toks[n].text),
            ));
        }
        Ok(())
    }
}

/// Splits `key=value` options.
fn options<'a>(cur: &Cursor, toks: &[Tok<'a>]) -> Result<Vec<(Tok<'a>, Tok<'a>)>, ParseError> {
    toks.iter()
        .map(|t| match t.text.split_once('=') {
            Some((k, v)) if !k.is_empty() && !v.is_empty() => Ok((
                Tok { text: k, col: t.col },
                Tok {
                    text: v,
                    col: t.col + k.len() + 1,
                },
            )),
            _ => Err(cur.err(t.col, format!("expected key=value, found `{}`", t.text))),
        })
        .collect()
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug)]
enum Section {
    System,
    Tdes,
    Devices,
    Network,
    Events,
    Outputs,
}

fn section(name: &str) -> Option<Section> {
    Some(match name {
        "system" => Section::System,
        "tdes" => Section::Tdes,
        "devices" => Section::Devices,
        "network" => Section::Network,
        "events" => Section::Events,
        "outputs" => Section::Outputs,
        _ => return None,
    })
}

fn apply_preset(sc: &mut Scenario, cur: &Cursor, toks: &[Tok<'_>]) -> Result<(), ParseError> {
    if toks.len() < 2 {
        return Err(cur.err(toks[0].col, "`preset` needs a name"));
    }
    let name = toks[1];
    let mut epsilon = None;
    for (k, v) in options(cur, &toks[2..])? {
        match k.text {
            "epsilon" => epsilon = Some(cur.num(v, "epsilon")?),
            _ => return Err(cur.err(k.col, format!("unknown preset option `{}`", k.text))),
        }
    }
    let text = match name.text {
        "case1" => presets::CASE1,
        "case2" => presets::CASE2,
        "case3" => presets::CASE3,
        other => return Err(cur.err(name.col, format!("unknown preset `{other}`"))),
    };
    if epsilon.is_some() && name.text != "case2" {
        return Err(cur.err(toks[2].col, "only case2 takes epsilon"));
    }
    let mut base = parse_sections(text, Scenario::default()).expect("built-in preset parses");
    base.preset = Some(name.text.to_string());
    if name.text == "case2" {
        base.system.epsilon = Some(epsilon.unwrap_or(0.5));
    }
    *sc = base;
    Ok(())
}

fn parse_sections(text: &str, mut sc: Scenario) -> Result<Scenario, ParseError> {
    let mut current: Option<Section> = None;
    let mut seen: BTreeSet<Section> = BTreeSet::new();
    for (i, raw) in text.lines().enumerate() {
        let cur = Cursor { line: i + 1 };
        let line = raw.split('#').next().unwrap_or("");
        let toks = tokens(line);
        let Some(first) = toks.first().copied() else { continue };

        if first.text.starts_with('[') {
            let name = line.trim();
            let inner = name
                .strip_prefix('[')
                .and_then(|s| s.strip_suffix(']'))
                .ok_or_else(|| cur.err(first.col, format!("malformed section header `{name}`")))?;
            let s =
                section(inner.trim()).ok_or_else(|| cur.err(first.col + 1, format!("unknown section `{inner}`")))?;
            if !seen.insert(s) {
                return Err(cur.err(first.col, format!("section `{inner}` appears twice")));
            }
            // A section replaces whatever a preset put there.
            match s {
                Section::Devices => {
                    sc.devices.clear();
                    sc.machines.clear();
                }
                Section::Network => sc.network = NetworkSpec::default(),
                Section::Events => {
                    sc.events.clear();
                    sc.montecarlo = None;
                }
                Section::Outputs => sc.outputs.clear(),
                _ => {}
            }
            current = Some(s);
            continue;
        }

        match current {
            None => {
                if first.text == "preset" {
                    apply_preset(&mut sc, &cur, &toks)?;
                } else {
                    return Err(cur.err(first.col, format!("`{}` outside of any section", first.text)));
                }
            }
            Some(Section::System) => system_line(&mut sc.system, &cur, line)?,
            Some(Section::Tdes) => tdes_line(&mut sc.tdes, &cur, line)?,
            Some(Section::Devices) => device_line(&mut sc, &cur, &toks)?,
            Some(Section::Network) => network_line(&mut sc.network, &cur, &toks)?,
            Some(Section::Events) => event_line(&mut sc, &cur, &toks)?,
            Some(Section::Outputs) => {
                for t in toks {
                    if t.text != "all" {
                        sc.outputs.push(t.text.to_string());
                    }
                }
            }
        }
    }
    Ok(sc)
}

fn key_value<'a>(cur: &Cursor, line: &'a str) -> Result<(Tok<'a>, Tok<'a>), ParseError> {
    let toks = tokens(line);
    let (k, v) = match toks.as_slice() {
        [k, eq, v] if eq.text == "=" => (*k, *v),
        [kv] => match kv.text.split_once('=') {
            Some((k, v)) if !k.is_empty() && !v.is_empty() => (
                Tok { text: k, col: kv.col },
                Tok {
                    text: v,
                    col: kv.col + k.len() + 1,
                },
            ),
            _ => return Err(cur.err(kv.col, "expected `key = value`")),
        },
        [k, v] if k.text.ends_with('=') => (
            Tok {
                text: k.text.trim_end_matches('='),
                col: k.col,
            },
            *v,
        ),
        [k, v] if v.text.starts_with('=') && v.text.len() > 1 => (
            *k,
            Tok {
                text: &v.text[1..],
                col: v.col + 1,
            },
        ),
        _ => return Err(cur.err(toks[0].col, "expected `key = value`")),
    };
    Ok((k, v))
}

fn system_line(s: &mut System, cur: &Cursor, line: &str) -> Result<(), ParseError> {
    let (k, v) = key_value(cur, line)?;
    match k.text {
        "base_mva" => s.base_mva = cur.num(v, "base_mva")?,
        "base_kv" => s.base_kv = cur.num(v, "base_kv")?,
        "f_base" => s.f_base = cur.num(v, "f_base")?,
        "dt" => s.dt = cur.num(v, "dt")?,
        "t_end" => s.t_end = cur.num(v, "t_end")?,
        "epsilon" => s.epsilon = Some(cur.num(v, "epsilon")?),
        "residual_tol" => s.residual_tol = cur.num(v, "residual_tol")?,
        "trace_tol" => s.trace_tol = cur.num(v, "trace_tol")?,
        other => return Err(cur.err(k.col, format!("unknown key `{other}` in [system]"))),
    }
    Ok(())
}

fn tdes_line(t: &mut Tdes, cur: &Cursor, line: &str) -> Result<(), ParseError> {
    let (k, v) = key_value(cur, line)?;
    match k.text {
        "h_p" => t.h_p = cur.num(v, "h_p")?,
        "d_p" => t.d_p = cur.num(v, "d_p")?,
        "d_q" => t.d_q = cur.num(v, "d_q")?,
        "tau_pll" => t.tau_pll = cur.num(v, "tau_pll")?,
        "tau_aug" => t.tau_aug = cur.num(v, "tau_aug")?,
        "q_droop_factor" => t.q_droop_factor = cur.num(v, "q_droop_factor")?,
        "pll_order" => {
            t.pll_order = match v.text {
                "auto" => None,
                _ => Some(cur.count(v, "pll_order")?),
            }
        }
        other => return Err(cur.err(k.col, format!("unknown key `{other}` in [tdes]"))),
    }
    Ok(())
}

const DEVICE_USAGE: &str = "name role kind tau mu rating tau_dc [key=value ...]";

fn device_line(sc: &mut Scenario, cur: &Cursor, toks: &[Tok<'_>]) -> Result<(), ParseError> {
    if toks.len() < 7 {
        cur.arity(toks, 7, DEVICE_USAGE)?;
    }
    let name = toks[0].text.to_string();
    let role = toks[1];
    let kind = toks[2];
    let tau = cur.num(toks[3], "tau")?;
    let opts = options(cur, &toks[7..])?;

    if role.text == "machine" {
        if kind.text != "swing" {
            return Err(cur.err(kind.col, format!("machines use kind `swing`, found `{}`", kind.text)));
        }
        let droop = cur.num(toks[4], "droop")?;
        let rating = cur.num(toks[5], "rating")?;
        let mut bus = name.clone();
        for (k, v) in opts {
            match k.text {
                "bus" => bus = v.text.to_string(),
                other => return Err(cur.err(k.col, format!("unknown machine option `{other}`"))),
            }
        }
        sc.machines.push(Machine {
            name,
            bus,
            h: tau,
            droop,
            rating,
        });
        return Ok(());
    }

    let role = match role.text {
        "forming" => Role::Forming,
        "following" => Role::Following,
        other => return Err(cur.err(role.col, format!("unknown role `{other}`"))),
    };
    let mut tau_high = None;
    let mut bus = name.clone();
    let mut p_capacity = None;
    for (k, v) in opts {
        match k.text {
            "bus" => bus = v.text.to_string(),
            "p_cap" => p_capacity = Some(cur.num(v, "p_cap")?),
            "tau_high" => tau_high = Some(cur.num(v, "tau_high")?),
            other => return Err(cur.err(k.col, format!("unknown device option `{other}`"))),
        }
    }
    let shape = match kind.text {
        "lpf" => ShapeInput::Lpf,
        "hpf" => ShapeInput::Hpf,
        "bpf" => ShapeInput::Bpf {
            tau_high: tau_high.ok_or_else(|| cur.err(kind.col, "bpf devices need tau_high=<s>"))?,
        },
        "complement" => ShapeInput::Complement,
        other => return Err(cur.err(kind.col, format!("unknown kind `{other}`"))),
    };
    let tau_dc = cur.opt_num(toks[6], "tau_dc")?.unwrap_or(0.0);
    sc.devices.push(DeviceLine {
        name,
        bus,
        role,
        shape,
        tau,
        mu: cur.opt_num(toks[4], "mu")?,
        rating: cur.num(toks[5], "rating")?,
        tau_dc,
        p_capacity,
    });
    Ok(())
}

fn network_line(net: &mut NetworkSpec, cur: &Cursor, toks: &[Tok<'_>]) -> Result<(), ParseError> {
    let head = toks[0];
    match head.text {
        "line" => {
            if toks.len() < 4 {
                cur.arity(toks, 4, "line from to b [rx=r]")?;
            }
            let mut rx = None;
            for (k, v) in options(cur, &toks[4..])? {
                match k.text {
                    "rx" => rx = Some(cur.num(v, "rx")?),
                    other => return Err(cur.err(k.col, format!("unknown line option `{other}`"))),
                }
            }
            net.lines.push(Line {
                from: toks[1].text.to_string(),
                to: toks[2].text.to_string(),
                b: cur.num(toks[3], "b")?,
                rx,
            });
        }
        "pcc" => {
            cur.arity(toks, 2, "pcc bus")?;
            net.pcc = Some(toks[1].text.to_string());
        }
        "poc" => {
            if toks.len() < 2 {
                return Err(cur.err(head.col, "`poc` needs at least one bus"));
            }
            net.pocs.extend(toks[1..].iter().map(|t| t.text.to_string()));
        }
        "rx" => {
            cur.arity(toks, 2, "rx ratio")?;
            net.rx = Some(cur.num(toks[1], "rx")?);
        }
        other => return Err(cur.err(head.col, format!("unknown network statement `{other}`"))),
    }
    Ok(())
}

fn event_line(sc: &mut Scenario, cur: &Cursor, toks: &[Tok<'_>]) -> Result<(), ParseError> {
    let head = toks[0];
    match head.text {
        "load" => {
            cur.arity(toks, 4, "load t bus dp")?;
            sc.events.push(Event::Load {
                t: cur.num(toks[1], "t")?,
                bus: toks[2].text.to_string(),
                dp: cur.num(toks[3], "dp")?,
            });
        }
        "capacity" => {
            cur.arity(toks, 4, "capacity t device p_capacity")?;
            sc.events.push(Event::Capacity {
                t: cur.num(toks[1], "t")?,
                device: toks[2].text.to_string(),
                p_capacity: cur.num(toks[3], "p_capacity")?,
            });
        }
        "outage" => {
            cur.arity(toks, 3, "outage t device")?;
            sc.events.push(Event::Outage {
                t: cur.num(toks[1], "t")?,
                device: toks[2].text.to_string(),
            });
        }
        "montecarlo" => {
            cur.arity(toks, 5, "montecarlo samples min max seed")?;
            let seed = toks[4]
                .text
                .parse::<u64>()
                .map_err(|_| cur.err(toks[4].col, format!("expected a seed, found `{}`", toks[4].text)))?;
            sc.montecarlo = Some(MonteCarlo {
                samples: cur.count(toks[1], "samples")?,
                min: cur.num(toks[2], "min")?,
                max: cur.num(toks[3], "max")?,
                seed,
            });
        }
        other => return Err(cur.err(head.col, format!("unknown event `{other}`"))),
    }
    Ok(())
}

fn semantic(msg: impl Into<String>) -> SemanticError {
    SemanticError(msg.into())
}

/// Checks cross references and orderings.
pub fn validate(sc: &Scenario) -> Result<(), SemanticError> {
    let s = &sc.system;
    if !(s.dt > 0.0) {
        return Err(semantic("dt must be positive"));
    }
    if !(s.t_end > 0.0) {
        return Err(semantic("t_end must be positive"));
    }
    if !(s.base_mva > 0.0) || !(s.f_base > 0.0) {
        return Err(semantic("base_mva and f_base must be positive"));
    }
    if let Some(e) = s.epsilon {
        if !(0.0..=1.0).contains(&e) {
            return Err(semantic(format!("epsilon {e} outside [0, 1]")));
        }
    }
    if sc.devices.is_empty() {
        return Err(semantic("no devices"));
    }
    let buses = sc.network.buses();
    let mut names: Vec<&str> = Vec::new();
    for (name, bus) in sc
        .devices
        .iter()
        .map(|d| (&d.name, &d.bus))
        .chain(sc.machines.iter().map(|m| (&m.name, &m.bus)))
    {
        if names.contains(&name.as_str()) {
            return Err(semantic(format!("duplicate device `{name}`")));
        }
        names.push(name);
        if !buses.contains(bus) {
            return Err(semantic(format!("device `{name}` sits at unknown bus `{bus}`")));
        }
    }
    if sc.network.is_area() && !sc.machines.is_empty() {
        return Err(semantic("machines are not supported inside a spatial area"));
    }
    if sc.network.is_area() && sc.network.rx.is_none() {
        return Err(semantic("an area with points of coupling needs a homogeneous `rx`"));
    }
    let mut last = 0.0;
    for e in &sc.events {
        let t = e.time();
        if t < 0.0 {
            return Err(semantic(format!("event at negative time {t}")));
        }
        if t < last {
            return Err(semantic(format!("events are not sorted by time ({t} after {last})")));
        }
        last = t;
        match e {
            Event::Load { bus, .. } if !buses.contains(bus) => {
                return Err(semantic(format!("load event at unknown bus `{bus}`")));
            }
            Event::Capacity { device, .. } if sc.device(device).is_none() => {
                return Err(semantic(format!("capacity event for unknown device `{device}`")));
            }
            Event::Outage { device, .. } if sc.device(device).is_none() && sc.machine(device).is_none() => {
                return Err(semantic(format!("outage of unknown device `{device}`")));
            }
            _ => {}
        }
    }
    if !sc.events.is_empty() && last >= s.t_end {
        return Err(semantic(format!(
            "t_end {} must exceed the last event time {last}",
            s.t_end
        )));
    }
    if let Some(mc) = &sc.montecarlo {
        if mc.samples == 0 {
            return Err(semantic("montecarlo needs at least one sample"));
        }
        if !(mc.min > 0.0 && mc.max >= mc.min) {
            return Err(semantic(format!("invalid R/X range [{}, {}]", mc.min, mc.max)));
        }
    }
    Ok(())
}

pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let sc = parse_sections(text, Scenario::default())?;
    validate(&sc)?;
    Ok(sc)
}
