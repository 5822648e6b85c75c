//! The canonical action vocabulary and conversion of free-form agent output
//! into it.
//!
//! Nine kinds exist: `click`, `long_press`, `swipe`, `type`, `wait`, `open`,
//! `navigate_back`, `navigate_home`, `complete`. The wire form is a flat JSON
//! object tagged by `"action"`, e.g. `{"action":"click","coordinate":[10,20]}`.

mod normalize;
mod parse;
mod profile;

pub use normalize::{normalize_coordinates, NormalizeError};
pub use parse::{parse_action, ParseError, ParseErrorKind, Parsed, RawAgentOutput};
pub use profile::{ProfileError, ProfileRegistry, ProfileRule, ProfileStyle, ParserProfile};

use crate::geometry::{Dims, Point};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Up,
    Down,
    Left,
    Right,
}

impl Direction {
    pub const ALL: [Direction; 4] = [Direction::Up, Direction::Down, Direction::Left, Direction::Right];

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Up => "up",
            Direction::Down => "down",
            Direction::Left => "left",
            Direction::Right => "right",
        }
    }
}

impl std::str::FromStr for Direction {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "up" => Ok(Direction::Up),
            "down" => Ok(Direction::Down),
            "left" => Ok(Direction::Left),
            "right" => Ok(Direction::Right),
            _ => Err(()),
        }
    }
}

/// Discriminant of [`ActionSpec`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    Click,
    LongPress,
    Swipe,
    Type,
    Wait,
    Open,
    NavigateBack,
    NavigateHome,
    Complete,
}

impl ActionKind {
    pub const ALL: [ActionKind; 9] = [
        ActionKind::Click,
        ActionKind::LongPress,
        ActionKind::Swipe,
        ActionKind::Type,
        ActionKind::Wait,
        ActionKind::Open,
        ActionKind::NavigateBack,
        ActionKind::NavigateHome,
        ActionKind::Complete,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ActionKind::Click => "click",
            ActionKind::LongPress => "long_press",
            ActionKind::Swipe => "swipe",
            ActionKind::Type => "type",
            ActionKind::Wait => "wait",
            ActionKind::Open => "open",
            ActionKind::NavigateBack => "navigate_back",
            ActionKind::NavigateHome => "navigate_home",
            ActionKind::Complete => "complete",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == name)
    }

    /// Back, home and open are executable on any screen and are not counted
    /// as graph out-degree.
    pub fn is_global(self) -> bool {
        matches!(self, ActionKind::NavigateBack | ActionKind::NavigateHome | ActionKind::Open)
    }
}

impl std::fmt::Display for ActionKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One canonical agent action.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case", deny_unknown_fields, from = "WireAction")]
pub enum ActionSpec {
    Click {
        coordinate: Point,
    },
    LongPress {
        coordinate: Point,
    },
    Swipe {
        direction: Direction,
    },
    Type {
        text: String,
    },
    /// The coordinate is accepted and carried but has no effect on the
    /// environment.
    Wait {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        coordinate: Option<Point>,
    },
    Open {
        app: String,
    },
    NavigateBack,
    NavigateHome,
    Complete {
        #[serde(default)]
        text: String,
    },
}

// Serde ignores `deny_unknown_fields` on unit variants of internally tagged
// enums, so deserialization goes through empty struct variants instead.
#[derive(Deserialize)]
#[serde(tag = "action", rename_all = "snake_case", deny_unknown_fields)]
enum WireAction {
    Click {
        coordinate: Point,
    },
    LongPress {
        coordinate: Point,
    },
    Swipe {
        direction: Direction,
    },
    Type {
        text: String,
    },
    Wait {
        #[serde(default)]
        coordinate: Option<Point>,
    },
    Open {
        app: String,
    },
    NavigateBack {},
    NavigateHome {},
    Complete {
        #[serde(default)]
        text: String,
    },
}

impl From<WireAction> for ActionSpec {
    fn from(w: WireAction) -> Self {
        match w {
            WireAction::Click { coordinate } => ActionSpec::Click { coordinate },
            WireAction::LongPress { coordinate } => ActionSpec::LongPress { coordinate },
            WireAction::Swipe { direction } => ActionSpec::Swipe { direction },
            WireAction::Type { text } => ActionSpec::Type { text },
            WireAction::Wait { coordinate } => ActionSpec::Wait { coordinate },
            WireAction::Open { app } => ActionSpec::Open { app },
            WireAction::NavigateBack {} => ActionSpec::NavigateBack,
            WireAction::NavigateHome {} => ActionSpec::NavigateHome,
            WireAction::Complete { text } => ActionSpec::Complete { text },
        }
    }
}

impl ActionSpec {
    pub fn kind(&self) -> ActionKind {
        match self {
            ActionSpec::Click { .. } => ActionKind::Click,
            ActionSpec::LongPress { .. } => ActionKind::LongPress,
            ActionSpec::Swipe { .. } => ActionKind::Swipe,
            ActionSpec::Type { .. } => ActionKind::Type,
            ActionSpec::Wait { .. } => ActionKind::Wait,
            ActionSpec::Open { .. } => ActionKind::Open,
            ActionSpec::NavigateBack => ActionKind::NavigateBack,
            ActionSpec::NavigateHome => ActionKind::NavigateHome,
            ActionSpec::Complete { .. } => ActionKind::Complete,
        }
    }

    pub fn coordinate(&self) -> Option<Point> {
        match self {
            ActionSpec::Click { coordinate } | ActionSpec::LongPress { coordinate } => Some(*coordinate),
            ActionSpec::Wait { coordinate } => *coordinate,
            _ => None,
        }
    }

    /// Replaces the coordinate of a coordinate-carrying action.
    pub fn with_coordinate(&self, p: Point) -> Option<ActionSpec> {
        match self {
            ActionSpec::Click { .. } => Some(ActionSpec::Click { coordinate: p }),
            ActionSpec::LongPress { .. } => Some(ActionSpec::LongPress { coordinate: p }),
            ActionSpec::Wait { coordinate: Some(_) } => Some(ActionSpec::Wait { coordinate: Some(p) }),
            _ => None,
        }
    }

    /// True when every coordinate lies inside `dims`.
    pub fn fits(&self, dims: Dims) -> bool {
        self.coordinate().map_or(true, |p| dims.contains(p))
    }

    /// Canonical JSON rendering, the inverse of parsing with the `json`
    /// profile.
    pub fn render(&self) -> String {
        serde_json::to_string(self).expect("action serialization is infallible")
    }

    pub fn click(x: u32, y: u32) -> Self {
        ActionSpec::Click { coordinate: Point::new(x, y) }
    }

    pub fn long_press(x: u32, y: u32) -> Self {
        ActionSpec::LongPress { coordinate: Point::new(x, y) }
    }

    pub fn swipe(direction: Direction) -> Self {
        ActionSpec::Swipe { direction }
    }

    pub fn type_text(text: impl Into<String>) -> Self {
        ActionSpec::Type { text: text.into() }
    }

    pub fn open(app: impl Into<String>) -> Self {
        ActionSpec::Open { app: app.into() }
    }

    pub fn complete(text: impl Into<String>) -> Self {
        ActionSpec::Complete { text: text.into() }
    }
}

impl std::fmt::Display for ActionSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ActionSpec::Click { coordinate: p } => write!(f, "click({},{})", p.x, p.y),
            ActionSpec::LongPress { coordinate: p } => write!(f, "long_press({},{})", p.x, p.y),
            ActionSpec::Swipe { direction } => write!(f, "swipe({})", direction.as_str()),
            ActionSpec::Type { text } => write!(f, "type({text:?})"),
            ActionSpec::Wait { coordinate: Some(p) } => write!(f, "wait({},{})", p.x, p.y),
            ActionSpec::Wait { coordinate: None } => f.write_str("wait()"),
            ActionSpec::Open { app } => write!(f, "open({app:?})"),
            ActionSpec::NavigateBack => f.write_str("navigate_back()"),
            ActionSpec::NavigateHome => f.write_str("navigate_home()"),
            ActionSpec::Complete { text } => write!(f, "complete({text:?})"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wire_form() {
        assert_eq!(ActionSpec::click(1, 2).render(), r#"{"action":"click","coordinate":[1,2]}"#);
        assert_eq!(ActionSpec::NavigateBack.render(), r#"{"action":"navigate_back"}"#);
        assert_eq!(ActionSpec::Wait { coordinate: None }.render(), r#"{"action":"wait"}"#);
        let a: ActionSpec = serde_json::from_str(r#"{"action":"swipe","direction":"left"}"#).unwrap();
        assert_eq!(a, ActionSpec::swipe(Direction::Left));
    }

    #[test]
    fn extra_parameters_rejected() {
        let r = serde_json::from_str::<ActionSpec>(r#"{"action":"navigate_home","coordinate":[1,2]}"#);
        assert!(r.is_err());
        let r = serde_json::from_str::<ActionSpec>(r#"{"action":"swipe","direction":"up","text":"x"}"#);
        assert!(r.is_err());
    }

    #[test]
    fn globals() {
        let globals: Vec<_> = ActionKind::ALL.into_iter().filter(|k| k.is_global()).collect();
        assert_eq!(globals, vec![ActionKind::Open, ActionKind::NavigateBack, ActionKind::NavigateHome]);
    }
}
