use super::oracle::{BoxChoice, OracleSuite, Role, Selection};
use super::trajectory::{Origin, ScreenAsset, Trajectory, TrajectorySet};
use crate::action::ActionSpec;
use crate::geometry::{BBox, Point};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoxSource {
    Large,
    Small,
    SelectorFresh,
}

/// Everything the three box oracles said about one point.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BoxProvenance {
    pub large: Option<BBox>,
    pub small: Option<BBox>,
    pub selection: Option<Selection>,
    /// Proposals dropped for missing the point, and oracle errors.
    pub discarded: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoxAnnotation {
    pub bbox: BBox,
    pub source: BoxSource,
    pub provenance: BoxProvenance,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AnnotateError {
    #[error("point ({},{}) is outside the screen", .0.x, .0.y)]
    PointOutside(Point),
    /// No usable box; left for a curator.
    #[error("no box contains the point")]
    Pending(BoxProvenance),
}

/// Large and small boxers each propose a box; proposals not containing the
/// point are dropped; the selector keeps a surviving proposal or draws a
/// fresh box, which must contain the point.
pub fn annotate_bbox(screen: &ScreenAsset, point: Point, suite: &OracleSuite) -> Result<BoxAnnotation, AnnotateError> {
    if !screen.dims().contains(point) {
        return Err(AnnotateError::PointOutside(point));
    }
    let mut prov = BoxProvenance::default();
    let mut propose = |role: Role, label: &str| match suite.propose_box(role, screen, point) {
        Ok(b) if b.contains(point) => (Some(b), Some(b)),
        Ok(b) => {
            prov.discarded.push(format!("{label} {b} misses the point"));
            (Some(b), None)
        }
        Err(e) => {
            prov.discarded.push(format!("{label}: {e}"));
            (None, None)
        }
    };
    let (large_raw, large) = propose(Role::BoxerLarge, "large");
    let (small_raw, small) = propose(Role::BoxerSmall, "small");
    prov.large = large_raw;
    prov.small = small_raw;

    let selection = match suite.select_box(screen, point, large, small) {
        Ok(s) => s,
        Err(e) => {
            prov.discarded.push(format!("selector: {e}"));
            return Err(AnnotateError::Pending(prov));
        }
    };
    prov.selection = Some(selection.clone());
    let picked = match selection {
        Selection::Choice { choice: BoxChoice::Large } => large.map(|b| (b, BoxSource::Large)),
        Selection::Choice { choice: BoxChoice::Small } => small.map(|b| (b, BoxSource::Small)),
        Selection::Fresh { bbox } => bbox.contains(point).then_some((bbox, BoxSource::SelectorFresh)),
    };
    match picked {
        Some((bbox, source)) => Ok(BoxAnnotation { bbox, source, provenance: prov }),
        None => {
            prov.discarded.push("selector picked nothing usable".into());
            Err(AnnotateError::Pending(prov))
        }
    }
}

/// A box annotation attached to a trajectory step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepAnnotation {
    pub trajectory: String,
    pub step: usize,
    pub screen: String,
    pub point: Point,
    pub result: Result<BoxAnnotation, BoxProvenance>,
}

/// Fills in boxes for click and long-press steps recorded without one.
/// Steps whose annotation stays pending keep no box.
pub fn annotate_missing(ts: &mut TrajectorySet, suite: &OracleSuite) -> Vec<StepAnnotation> {
    let mut out = Vec::new();
    let mut trajectories: Vec<Trajectory> = std::mem::take(&mut ts.trajectories);
    for t in &mut trajectories {
        for (i, step) in t.steps.iter_mut().enumerate() {
            let point = match &step.action {
                Some(ActionSpec::Click { coordinate } | ActionSpec::LongPress { coordinate }) if step.bbox.is_none() => {
                    *coordinate
                }
                _ => continue,
            };
            let screen = ts.screen(&step.screen).expect("step screens are registered");
            let result = match annotate_bbox(screen, point, suite) {
                Ok(a) => {
                    step.bbox = Some(a.bbox);
                    step.bbox_origin = Origin::Auto;
                    Ok(a)
                }
                Err(AnnotateError::Pending(p)) => Err(p),
                Err(AnnotateError::PointOutside(_)) => Err(BoxProvenance {
                    discarded: vec!["point outside the screen".into()],
                    ..Default::default()
                }),
            };
            out.push(StepAnnotation { trajectory: t.id.clone(), step: i, screen: step.screen.clone(), point, result });
        }
    }
    ts.trajectories = trajectories;
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builder::oracle::{point_key, StubOracle};
    use serde_json::json;

    fn screen() -> ScreenAsset {
        ScreenAsset { sha256: "s".repeat(64), path: "x.png".into(), width: 400, height: 800, app: None }
    }

    fn suite(large: serde_json::Value, small: serde_json::Value, sel: serde_json::Value) -> OracleSuite {
        let mut t = StubOracle::default();
        let key = point_key(&screen().sha256, Point::new(150, 250));
        t.set(Role::BoxerLarge, key.clone(), large);
        t.set(Role::BoxerSmall, key.clone(), small);
        t.set(Role::BoxSelector, key, sel);
        OracleSuite::stub(t)
    }

    #[test]
    fn selector_keeps_small() {
        let s = suite(json!([90, 190, 310, 410]), json!([140, 240, 160, 260]), json!({"choice": "small"}));
        let a = annotate_bbox(&screen(), Point::new(150, 250), &s).unwrap();
        assert_eq!(a.bbox, BBox::new(140, 240, 160, 260).unwrap());
        assert_eq!(a.source, BoxSource::Small);
        assert!(a.provenance.large.is_some() && a.provenance.small.is_some() && a.provenance.selection.is_some());
        assert_eq!(s.audit().len(), 3);
    }

    #[test]
    fn proposals_missing_the_point_are_dropped() {
        let s = suite(json!([90, 190, 310, 410]), json!([10, 10, 20, 20]), json!({"choice": "small"}));
        let err = annotate_bbox(&screen(), Point::new(150, 250), &s).unwrap_err();
        assert!(matches!(err, AnnotateError::Pending(p) if p.discarded.len() == 2));

        let s = suite(json!([0, 0, 5, 5]), json!([10, 10, 20, 20]), json!({"bbox": [100, 200, 300, 400]}));
        let a = annotate_bbox(&screen(), Point::new(150, 250), &s).unwrap();
        assert_eq!((a.bbox, a.source), (BBox::new(100, 200, 300, 400).unwrap(), BoxSource::SelectorFresh));

        let s = suite(json!([0, 0, 5, 5]), json!([10, 10, 20, 20]), json!({"bbox": [0, 0, 1, 1]}));
        assert!(matches!(annotate_bbox(&screen(), Point::new(150, 250), &s), Err(AnnotateError::Pending(_))));
    }

    #[test]
    fn point_must_be_on_screen() {
        let s = suite(json!(null), json!(null), json!(null));
        let err = annotate_bbox(&screen(), Point::new(400, 5), &s).unwrap_err();
        assert_eq!(err, AnnotateError::PointOutside(Point::new(400, 5)));
    }
}
