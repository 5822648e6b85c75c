use super::ActionSpec;
use crate::geometry::{Dims, Point};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum NormalizeError {
    #[error("action `{0}` carries no coordinate")]
    MissingCoordinate(String),
    #[error("dimensions must be positive (from {from}, to {to})")]
    ZeroDims { from: Dims, to: Dims },
}

/// Rescales `v` from an axis of length `from` to one of length `to`,
/// rounding half up and clamping to `[0, to - 1]`.
fn rescale(v: u32, from: u32, to: u32) -> u32 {
    let num = 2 * u64::from(v) * u64::from(to) + u64::from(from);
    let scaled = num / (2 * u64::from(from));
    scaled.min(u64::from(to) - 1) as u32
}

/// Maps the action's coordinate from `from` dims into `to` dims using
/// independent x/y ratios.
pub fn normalize_coordinates(a: &ActionSpec, from: Dims, to: Dims) -> Result<ActionSpec, NormalizeError> {
    if !from.is_positive() || !to.is_positive() {
        return Err(NormalizeError::ZeroDims { from, to });
    }
    let p = a.coordinate().ok_or_else(|| NormalizeError::MissingCoordinate(a.kind().to_string()))?;
    let q = Point::new(rescale(p.x, from.width, to.width), rescale(p.y, from.height, to.height));
    Ok(a.with_coordinate(q).expect("coordinate-carrying action"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn norm(x: u32, y: u32, from: (u32, u32), to: (u32, u32)) -> (u32, u32) {
        let out = normalize_coordinates(
            &ActionSpec::click(x, y),
            Dims::new(from.0, from.1),
            Dims::new(to.0, to.1),
        )
        .unwrap();
        let p = out.coordinate().unwrap();
        (p.x, p.y)
    }

    #[test]
    fn identity() {
        assert_eq!(norm(500, 500, (1000, 1000), (1000, 1000)), (500, 500));
    }

    #[test]
    fn independent_axes() {
        assert_eq!(norm(500, 500, (1000, 2000), (720, 1440)), (360, 360));
    }

    #[test]
    fn rounds_then_clamps() {
        assert_eq!(norm(999, 10, (1000, 1000), (100, 100)), (99, 1));
    }

    #[test]
    fn half_rounds_up() {
        assert_eq!(rescale(5, 10, 3), 2); // 1.5 -> 2
        assert_eq!(rescale(1, 4, 2), 1); // 0.5 -> 1
        assert_eq!(rescale(3, 8, 4), 2); // 1.5 -> 2
    }

    #[test]
    fn missing_coordinate() {
        let e = normalize_coordinates(&ActionSpec::NavigateBack, Dims::new(1, 1), Dims::new(1, 1));
        assert!(matches!(e, Err(NormalizeError::MissingCoordinate(_))));
        let e = normalize_coordinates(&ActionSpec::Wait { coordinate: None }, Dims::new(1, 1), Dims::new(1, 1));
        assert!(e.is_err());
    }

    proptest! {
        #[test]
        fn same_dims_is_identity(w in 1u32..4000, h in 1u32..4000, fx in 0.0f64..1.0, fy in 0.0f64..1.0) {
            let x = ((w - 1) as f64 * fx) as u32;
            let y = ((h - 1) as f64 * fy) as u32;
            prop_assert_eq!(norm(x, y, (w, h), (w, h)), (x, y));
        }

        #[test]
        fn composition_within_one_pixel(
            a in (1u32..3000, 1u32..3000),
            b in (1u32..3000, 1u32..3000),
            c in (1u32..3000, 1u32..3000),
            fx in 0.0f64..1.0, fy in 0.0f64..1.0,
        ) {
            let x = ((a.0 - 1) as f64 * fx) as u32;
            let y = ((a.1 - 1) as f64 * fy) as u32;
            let mid = norm(x, y, a, b);
            let two = norm(mid.0, mid.1, b, c);
            let one = norm(x, y, a, c);
            // An intermediate grid coarser than the target quantizes more
            // than a pixel; the tolerance holds when the middle step is at
            // least as fine as the destination.
            prop_assume!(b.0 >= c.0 && b.1 >= c.1);
            prop_assert!(two.0.abs_diff(one.0) <= 1, "x {} vs {}", two.0, one.0);
            prop_assert!(two.1.abs_diff(one.1) <= 1, "y {} vs {}", two.1, one.1);
        }
    }
}
