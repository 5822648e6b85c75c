use super::profile::{ParserProfile, ProfileStyle};
use super::{ActionKind, ActionSpec, Direction};
use crate::geometry::{Dims, Point};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use std::ops::Range;

/// Untrusted agent response plus the screen size the agent assumed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawAgentOutput {
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub declared_dims: Option<Dims>,
}

impl RawAgentOutput {
    pub fn new(text: impl Into<String>) -> Self {
        Self { text: text.into(), declared_dims: None }
    }

    pub fn with_dims(text: impl Into<String>, dims: Dims) -> Self {
        Self { text: text.into(), declared_dims: Some(dims) }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "code", content = "detail", rename_all = "kebab-case")]
pub enum ParseErrorKind {
    Unparseable,
    UnknownKind(String),
    MissingParameter(String),
    OutOfRange(String),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error, Serialize, Deserialize)]
#[error("{kind:?} at {span:?}")]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub span: Range<usize>,
}

impl ParseError {
    pub fn code(&self) -> &'static str {
        match self.kind {
            ParseErrorKind::Unparseable => "unparseable",
            ParseErrorKind::UnknownKind(_) => "unknown-kind",
            ParseErrorKind::MissingParameter(_) => "missing-parameter",
            ParseErrorKind::OutOfRange(_) => "out-of-range",
        }
    }
}

/// A successful parse. `ignored` counts further well-formed actions found
/// after the winning one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Parsed {
    pub action: ActionSpec,
    pub span: Range<usize>,
    pub ignored: usize,
}

type Attempt = (Range<usize>, Result<ActionSpec, ParseErrorKind>);

/// Extracts the first well-formed action from `raw` using `profile`.
pub fn parse_action(raw: &RawAgentOutput, profile: &ParserProfile) -> Result<Parsed, ParseError> {
    let text = raw.text.as_str();
    let mut attempts = match profile.style {
        ProfileStyle::Pattern => pattern_attempts(text, profile),
        ProfileStyle::Json => json_attempts(text, profile),
    };
    for (span, result) in attempts.iter_mut() {
        if let Ok(action) = result {
            if let Err(k) = check_range(action, raw.declared_dims) {
                *result = Err(k);
            }
        }
        debug_assert!(span.end <= text.len());
    }
    // Stable sort keeps rule order for attempts starting at the same offset.
    attempts.sort_by_key(|(span, _)| span.start);

    let mut ok = attempts.iter().filter(|(_, r)| r.is_ok());
    if let Some((span, Ok(action))) = ok.next() {
        let ignored = ok.filter(|(s, _)| s.start >= span.end).count();
        if ignored > 0 {
            tracing::debug!(ignored, "additional actions in agent output ignored");
        }
        return Ok(Parsed { action: action.clone(), span: span.clone(), ignored });
    }
    match attempts.into_iter().next() {
        Some((span, Err(kind))) => Err(ParseError { kind, span }),
        _ => Err(ParseError { kind: ParseErrorKind::Unparseable, span: 0..text.len() }),
    }
}

fn check_range(action: &ActionSpec, dims: Option<Dims>) -> Result<(), ParseErrorKind> {
    match (action.coordinate(), dims) {
        (Some(p), Some(d)) if !d.contains(p) => {
            Err(ParseErrorKind::OutOfRange(format!("({},{}) outside {d}", p.x, p.y)))
        }
        _ => Ok(()),
    }
}

fn to_u32(v: i64, what: &str) -> Result<u32, ParseErrorKind> {
    u32::try_from(v).map_err(|_| ParseErrorKind::OutOfRange(format!("{what}={v}")))
}

fn point_from_box(x1: i64, y1: i64, x2: i64, y2: i64) -> Result<Point, ParseErrorKind> {
    let (x1, y1, x2, y2) = (to_u32(x1, "x1")?, to_u32(y1, "y1")?, to_u32(x2, "x2")?, to_u32(y2, "y2")?);
    if x1 > x2 || y1 > y2 {
        return Err(ParseErrorKind::OutOfRange(format!("inverted box [{x1},{y1},{x2},{y2}]")));
    }
    Ok(Point::new(x1 + (x2 - x1) / 2, y1 + (y2 - y1) / 2))
}

/// Assembles an action once its parameters are known.
struct Params {
    point: Option<Result<Point, ParseErrorKind>>,
    direction: Option<String>,
    text: Option<String>,
    app: Option<String>,
}

impl Params {
    fn build(self, kind: ActionKind) -> Result<ActionSpec, ParseErrorKind> {
        let missing = |p: &str| ParseErrorKind::MissingParameter(format!("{kind} requires {p}"));
        let point = self.point.transpose()?;
        Ok(match kind {
            ActionKind::Click => ActionSpec::Click { coordinate: point.ok_or_else(|| missing("coordinate"))? },
            ActionKind::LongPress => ActionSpec::LongPress { coordinate: point.ok_or_else(|| missing("coordinate"))? },
            ActionKind::Wait => ActionSpec::Wait { coordinate: point },
            ActionKind::Swipe => {
                let d = self.direction.ok_or_else(|| missing("direction"))?;
                ActionSpec::Swipe { direction: d.parse::<Direction>().map_err(|_| missing("a direction of up/down/left/right"))? }
            }
            ActionKind::Type => ActionSpec::Type { text: self.text.ok_or_else(|| missing("text"))? },
            ActionKind::Open => {
                let app = self.app.map(|a| a.trim().to_string()).filter(|a| !a.is_empty());
                ActionSpec::Open { app: app.ok_or_else(|| missing("app"))? }
            }
            ActionKind::NavigateBack => ActionSpec::NavigateBack,
            ActionKind::NavigateHome => ActionSpec::NavigateHome,
            ActionKind::Complete => ActionSpec::Complete { text: self.text.unwrap_or_default() },
        })
    }
}

fn unescape(body: &str) -> String {
    serde_json::from_str::<String>(&format!("\"{body}\"")).unwrap_or_else(|_| body.to_string())
}

fn pattern_attempts(text: &str, profile: &ParserProfile) -> Vec<Attempt> {
    let mut out: Vec<Attempt> = Vec::new();
    for rule in &profile.rules {
        for caps in rule.pattern.captures_iter(text) {
            let whole = caps.get(0).expect("group 0");
            let num = |name: &str| -> Option<Result<i64, ParseErrorKind>> {
                caps.name(name).map(|m| {
                    m.as_str()
                        .parse::<i64>()
                        .map_err(|_| ParseErrorKind::OutOfRange(format!("{name}={}", m.as_str())))
                })
            };
            let point = match (num("x"), num("y"), num("x1"), num("y1"), num("x2"), num("y2")) {
                (Some(x), Some(y), ..) => Some(x.and_then(|x| {
                    let y = y?;
                    Ok(Point::new(to_u32(x, "x")?, to_u32(y, "y")?))
                })),
                (_, _, Some(x1), Some(y1), Some(x2), Some(y2)) => {
                    Some((|| point_from_box(x1?, y1?, x2?, y2?))())
                }
                _ => None,
            };
            let text_group = caps.name("text").map(|m| {
                if rule.unescape {
                    unescape(m.as_str())
                } else {
                    m.as_str().to_string()
                }
            });
            let app = caps.name("app").map(|m| if rule.unescape { unescape(m.as_str()) } else { m.as_str().to_string() });
            let params = Params {
                point,
                direction: caps.name("direction").map(|m| m.as_str().to_string()),
                text: text_group,
                app,
            };
            out.push((whole.range(), params.build(rule.kind)));
        }
    }
    // Heads not explained by any rule match are failed attempts.
    if let Some(head) = &profile.head {
        for caps in head.captures_iter(text) {
            let whole = caps.get(0).expect("group 0");
            if out.iter().any(|(span, _)| span.start == whole.start()) {
                continue;
            }
            let surface = caps.name("kind").expect("validated at load").as_str();
            let err = match profile.resolve_kind(surface) {
                None => ParseErrorKind::UnknownKind(surface.to_string()),
                Some(kind) => ParseErrorKind::MissingParameter(format!("malformed parameters for {kind}")),
            };
            out.push((whole.range(), Err(err)));
        }
    }
    out
}

fn json_attempts(text: &str, profile: &ParserProfile) -> Vec<Attempt> {
    let mut out = Vec::new();
    let mut pos = 0;
    while let Some(off) = text[pos..].find('{') {
        let start = pos + off;
        let mut stream = serde_json::Deserializer::from_str(&text[start..]).into_iter::<Value>();
        match stream.next() {
            Some(Ok(Value::Object(obj))) => {
                let end = start + stream.byte_offset();
                if let Some(attempt) = json_object_attempt(&obj, profile) {
                    out.push((start..end, attempt));
                    pos = end;
                    continue;
                }
                pos = start + 1;
            }
            _ => pos = start + 1,
        }
    }
    out
}

fn json_object_attempt(obj: &Map<String, Value>, profile: &ParserProfile) -> Option<Result<ActionSpec, ParseErrorKind>> {
    let surface = profile.kind_keys.iter().find_map(|k| obj.get(k)?.as_str())?;
    let Some(kind) = profile.resolve_kind(surface) else {
        return Some(Err(ParseErrorKind::UnknownKind(surface.to_string())));
    };
    let get = |param: &str| profile.keys_for(param).into_iter().find_map(|k| obj.get(k));
    let as_ints = |v: &Value| -> Option<Vec<i64>> { v.as_array()?.iter().map(Value::as_i64).collect() };

    let point = match (get("coordinate"), get("bbox")) {
        (Some(v), _) => Some(match as_ints(v).as_deref() {
            Some(&[x, y]) => to_u32(x, "x").and_then(|x| Ok(Point::new(x, to_u32(y, "y")?))),
            Some(&[x1, y1, x2, y2]) => point_from_box(x1, y1, x2, y2),
            _ => Err(ParseErrorKind::MissingParameter(format!("{kind}: coordinate must be [x,y]"))),
        }),
        (None, Some(v)) => Some(match as_ints(v).as_deref() {
            Some(&[x1, y1, x2, y2]) => point_from_box(x1, y1, x2, y2),
            _ => Err(ParseErrorKind::MissingParameter(format!("{kind}: bbox must be [x1,y1,x2,y2]"))),
        }),
        (None, None) => None,
    };
    let string = |param: &str| get(param).and_then(Value::as_str).map(str::to_string);
    let params = Params { point, direction: string("direction"), text: string("text"), app: string("app") };
    Some(params.build(kind))
}
