//! Parametric bracketed L-systems.
//!
//! A grammar over `{F, +, -, [, ]}` is rewritten a fixed number of times and
//! the resulting string is read by a turtle into stroke segments. Every `F`
//! becomes a stroke whose width and length taper geometrically with the
//! bracket depth of the branch it belongs to.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{Segment, TurtleProgram};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Symbol {
    Forward,
    /// Clockwise turn.
    Plus,
    /// Anticlockwise turn.
    Minus,
    Push,
    Pop,
}

impl Symbol {
    pub fn from_char(c: char) -> Option<Symbol> {
        match c {
            'F' => Some(Symbol::Forward),
            '+' => Some(Symbol::Plus),
            // ASCII hyphen and U+2212 MINUS SIGN
            '-' | '\u{2212}' => Some(Symbol::Minus),
            '[' => Some(Symbol::Push),
            ']' => Some(Symbol::Pop),
            _ => None,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Symbol::Forward => 'F',
            Symbol::Plus => '+',
            Symbol::Minus => '-',
            Symbol::Push => '[',
            Symbol::Pop => ']',
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct SymbolString(Vec<Symbol>);

impl SymbolString {
    pub fn new(symbols: Vec<Symbol>) -> Self {
        SymbolString(symbols)
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn forward_count(&self) -> usize {
        self.0.iter().filter(|&&s| s == Symbol::Forward).count()
    }

    /// Checks that every `]` closes an earlier `[` and nothing is left open.
    pub fn check_balanced(&self) -> Result<()> {
        let mut depth = 0usize;
        for (position, sym) in self.0.iter().enumerate() {
            match sym {
                Symbol::Push => depth += 1,
                Symbol::Pop => {
                    depth = depth.checked_sub(1).ok_or(Error::MalformedString {
                        position,
                        reason: "pop on empty stack",
                    })?;
                }
                _ => {}
            }
        }
        if depth != 0 {
            return Err(Error::MalformedString {
                position: self.0.len(),
                reason: "unclosed bracket",
            });
        }
        Ok(())
    }
}

impl FromStr for SymbolString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .filter(|c| !c.is_whitespace())
            .enumerate()
            .map(|(position, c)| {
                Symbol::from_char(c).ok_or(Error::MalformedString {
                    position,
                    reason: "symbol outside {F, +, -, [, ]}",
                })
            })
            .collect::<Result<Vec<_>>>()
            .map(SymbolString)
    }
}

impl fmt::Display for SymbolString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.iter().try_for_each(|s| write!(f, "{}", s.as_char()))
    }
}

/// A production `F -> successor`.
///
/// Parsed from `"F->..."`, `"F→..."`, or a bare successor string.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Rule {
    successor: SymbolString,
}

impl Rule {
    pub fn successor(&self) -> &SymbolString {
        &self.successor
    }
}

impl FromStr for Rule {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let malformed = |reason: &str| Error::MalformedRule {
            rule: text.to_string(),
            reason: reason.to_string(),
        };
        let rhs = match text.split_once("->").or_else(|| text.split_once('→')) {
            Some((lhs, rhs)) => {
                if lhs.trim() != "F" {
                    return Err(malformed("left-hand side must be `F`"));
                }
                rhs
            }
            None => text,
        };
        let successor: SymbolString = rhs.parse().map_err(|e: Error| malformed(&e.to_string()))?;
        if successor.is_empty() {
            return Err(malformed("empty right-hand side"));
        }
        successor
            .check_balanced()
            .map_err(|e| malformed(&e.to_string()))?;
        Ok(Rule { successor })
    }
}

impl TryFrom<String> for Rule {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Rule> for String {
    fn from(r: Rule) -> String {
        format!("F->{}", r.successor)
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "F->{}", self.successor)
    }
}

/// When a production is drawn from the rule set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RuleSelection {
    /// One rule per rewrite pass, shared by every `F` in that pass.
    #[default]
    PerPass,
    /// A fresh rule for every rewritten `F`.
    PerSymbol,
}

/// Concrete parameters for one fractal tree.
#[derive(Debug, Clone, PartialEq)]
pub struct LSystemSpec {
    pub axiom: SymbolString,
    pub ruleset: Vec<Rule>,
    pub iterations: u32,
    pub w_init: f64,
    pub l_init: f64,
    /// Per-depth decay of width and length, in `(0, 1]`.
    pub gamma: f64,
    /// Degrees.
    pub angle_init_range: (f64, f64),
    /// Degrees.
    pub angle_delta_range: (f64, f64),
    /// Inclusive.
    pub intensity_range: (u8, u8),
    pub rule_selection: RuleSelection,
    pub seed: u64,
}

impl LSystemSpec {
    /// The basic branching tree `F -> F[-F][+F]` with mid-range parameters.
    pub fn basic(iterations: u32) -> Self {
        LSystemSpec {
            axiom: SymbolString(vec![Symbol::Forward]),
            ruleset: vec!["F->F[-F][+F]".parse().expect("static rule")],
            iterations,
            w_init: 10.0,
            l_init: 150.0,
            gamma: 0.8,
            angle_init_range: (20.0, 120.0),
            angle_delta_range: (10.0, 40.0),
            intensity_range: (1, 254),
            rule_selection: RuleSelection::PerPass,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations < 1 {
            return Err(Error::param("iterations", "must be at least 1"));
        }
        if self.ruleset.is_empty() {
            return Err(Error::param("ruleset", "must not be empty"));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::param("gamma", format!("{} not in (0, 1]", self.gamma)));
        }
        if !(self.w_init > 0.0 && self.w_init.is_finite()) {
            return Err(Error::param("w_init", "must be positive and finite"));
        }
        if !(self.l_init > 0.0 && self.l_init.is_finite()) {
            return Err(Error::param("l_init", "must be positive and finite"));
        }
        check_range("angle_init_range", self.angle_init_range)?;
        check_range("angle_delta_range", self.angle_delta_range)?;
        if self.intensity_range.0 > self.intensity_range.1 {
            return Err(Error::param("intensity_range", "min exceeds max"));
        }
        self.axiom.check_balanced()?;
        Ok(())
    }
}

fn check_range(name: &'static str, (lo, hi): (f64, f64)) -> Result<()> {
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(Error::param(name, format!("({lo}, {hi}) is not a valid range")));
    }
    Ok(())
}

/// Geometry and shade of the strokes at one branch depth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchParams {
    /// 1 for the trunk, incremented per enclosing bracket.
    pub index: u32,
    pub width: f64,
    pub length: f64,
    pub intensity: u8,
}

/// Rewrites the axiom `iterations - 1` times.
pub fn expand<R: Rng + ?Sized>(spec: &LSystemSpec, rng: &mut R) -> Result<SymbolString> {
    spec.validate()?;
    let mut current = spec.axiom.0.clone();
    for _ in 1..spec.iterations {
        let pass_rule = match spec.rule_selection {
            RuleSelection::PerPass => Some(pick_rule(&spec.ruleset, rng)),
            RuleSelection::PerSymbol => None,
        };
        let mut next = Vec::with_capacity(current.len() * 4);
        for &sym in &current {
            if sym == Symbol::Forward {
                let rule = pass_rule.unwrap_or_else(|| pick_rule(&spec.ruleset, rng));
                next.extend_from_slice(&rule.successor.0);
            } else {
                next.push(sym);
            }
        }
        current = next;
    }
    Ok(SymbolString(current))
}

fn pick_rule<'a, R: Rng + ?Sized>(rules: &'a [Rule], rng: &mut R) -> &'a Rule {
    if rules.len() == 1 {
        &rules[0]
    } else {
        &rules[rng.random_range(0..rules.len())]
    }
}

/// Width and length `x_init * gamma^(i-1)` and a uniform intensity draw.
pub fn schedule_params<R: Rng + ?Sized>(index: u32, spec: &LSystemSpec, rng: &mut R) -> BranchParams {
    assert!(index >= 1, "branch index starts at 1");
    let decay = spec.gamma.powi(index as i32 - 1);
    let (lo, hi) = spec.intensity_range;
    BranchParams {
        index,
        width: spec.w_init * decay,
        length: spec.l_init * decay,
        intensity: rng.random_range(lo..=hi),
    }
}

#[derive(Debug, Clone, Copy)]
struct TurtleState {
    pos: [f64; 2],
    /// Degrees; `(cos, sin)` in image coordinates (x right, y down), so a
    /// positive turn is clockwise on screen.
    heading: f64,
    depth: u32,
}

/// Interprets `s` as turtle commands on a `height x width` canvas.
///
/// The root is placed uniformly in the central half of the canvas with a
/// uniform heading. The base turn angle is drawn once per program; each turn
/// symbol adds a fresh signed perturbation to it.
pub fn build_program<R: Rng + ?Sized>(
    s: &SymbolString,
    spec: &LSystemSpec,
    canvas: (usize, usize),
    rng: &mut R,
) -> Result<TurtleProgram> {
    let (height, width) = canvas;
    let mut program = TurtleProgram::default();
    if s.is_empty() {
        return Ok(program);
    }
    let (h, w) = (height as f64, width as f64);
    let mut state = TurtleState {
        pos: [
            rng.random_range(w * 0.25..=w * 0.75),
            rng.random_range(h * 0.25..=h * 0.75),
        ],
        heading: rng.random_range(0.0..360.0),
        depth: 0,
    };
    let angle_init = uniform(rng, spec.angle_init_range);
    let mut by_depth: Vec<BranchParams> = Vec::new();
    let mut stack: Vec<TurtleState> = Vec::new();

    for (position, &sym) in s.symbols().iter().enumerate() {
        match sym {
            Symbol::Forward => {
                let index = state.depth + 1;
                while by_depth.len() < index as usize {
                    let next = by_depth.len() as u32 + 1;
                    by_depth.push(schedule_params(next, spec, rng));
                }
                let params = by_depth[state.depth as usize];
                let rad = state.heading.to_radians();
                let end = [
                    state.pos[0] + params.length * rad.cos(),
                    state.pos[1] + params.length * rad.sin(),
                ];
                program.segments.push(Segment {
                    start: state.pos,
                    end,
                    width: params.width,
                    intensity: params.intensity,
                    depth: index,
                });
                state.pos = end;
            }
            Symbol::Plus | Symbol::Minus => {
                let delta = uniform(rng, spec.angle_delta_range);
                let turn = if rng.random_bool(0.5) {
                    angle_init + delta
                } else {
                    angle_init - delta
                };
                state.heading += if sym == Symbol::Plus { turn } else { -turn };
            }
            Symbol::Push => {
                stack.push(state);
                state.depth += 1;
            }
            Symbol::Pop => {
                let saved = stack.pop().ok_or(Error::MalformedString {
                    position,
                    reason: "pop on empty stack",
                })?;
                state = saved;
            }
        }
    }
    Ok(program)
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..=hi)
    }
}
