//! Standard facial-point template and the 48 alignment landmarks.
//!
//! The layout is a deterministic grid over a 128×128 template frame,
//! mirror-symmetric about `x = 64`. It is shipped as text data files that
//! [`FacialPointTemplate::builtin`] parses; [`generate_points`] and
//! [`generate_landmarks`] reproduce them.

use crate::data::landmarks::{parse_landmarks, LandmarkSet, LANDMARK_COUNT};
use crate::data::DataError;
use crate::types::Half;

pub const POINTS_PER_HALF: usize = 176;
pub const TEMPLATE_SIZE: f64 = 128.0;
pub const TEMPLATE_CENTER_X: f64 = 64.0;

const GRID_ROWS: usize = 16;
const GRID_COLS: usize = 11;

pub const TEMPLATE_POINTS_V1: &str = include_str!("../../data/template_points_v1.txt");
pub const TEMPLATE_LANDMARKS_V1: &str = include_str!("../../data/template_landmarks_v1.txt");

#[derive(Debug, Clone, PartialEq)]
pub struct FacialPointTemplate {
    /// `points[half.index()][i]`, in template pixels.
    pub points: [Vec<[f64; 2]>; 2],
    pub landmarks: LandmarkSet,
}

impl FacialPointTemplate {
    pub fn builtin() -> Self {
        Self::from_text(TEMPLATE_POINTS_V1, TEMPLATE_LANDMARKS_V1)
            .expect("shipped template files are valid")
    }

    pub fn from_text(points: &str, landmarks: &str) -> Result<Self, DataError> {
        let mut halves: [Vec<[f64; 2]>; 2] = [Vec::new(), Vec::new()];
        let mut seen = false;
        for (lineno, line) in points.lines().enumerate() {
            let line_no = lineno + 1;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if !seen {
                if line != "xmodal-template v1" {
                    return Err(DataError::parse(
                        line_no,
                        "expected header `xmodal-template v1`",
                    ));
                }
                seen = true;
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 4 {
                return Err(DataError::parse(
                    line_no,
                    format!("expected 4 fields, found {}", f.len()),
                ));
            }
            let idx: usize = f[0]
                .parse()
                .map_err(|_| DataError::parse(line_no, "bad point index"))?;
            let half: Half = f[1]
                .parse()
                .map_err(|e: String| DataError::parse(line_no, e))?;
            let x: f64 = f[2]
                .parse()
                .map_err(|_| DataError::parse(line_no, "bad x coordinate"))?;
            let y: f64 = f[3]
                .parse()
                .map_err(|_| DataError::parse(line_no, "bad y coordinate"))?;
            if !(x.is_finite() && y.is_finite()) {
                return Err(DataError::parse(line_no, "non-finite coordinate"));
            }
            let list = &mut halves[half.index()];
            if idx != list.len() {
                return Err(DataError::parse(
                    line_no,
                    format!("expected point index {}, found {idx}", list.len()),
                ));
            }
            list.push([x, y]);
        }
        if !seen {
            return Err(DataError::parse(1, "missing header"));
        }
        for h in &halves {
            if h.len() != POINTS_PER_HALF {
                return Err(DataError::Invalid(format!(
                    "template half has {} points, expected {POINTS_PER_HALF}",
                    h.len()
                )));
            }
        }
        Ok(Self {
            points: halves,
            landmarks: parse_landmarks(landmarks)?,
        })
    }

    /// Left point `i` pairs with right point `i`.
    pub fn symmetry_partner(&self, half: Half, index: usize) -> (Half, usize) {
        let other = match half {
            Half::Left => Half::Right,
            Half::Right => Half::Left,
        };
        (other, index)
    }

    /// All 352 points, left half first.
    pub fn all_points(&self) -> Vec<[f64; 2]> {
        self.points[0]
            .iter()
            .chain(self.points[1].iter())
            .copied()
            .collect()
    }

    /// Largest deviation from mirror symmetry about the template centre line.
    pub fn symmetry_error(&self) -> f64 {
        self.points[0]
            .iter()
            .zip(&self.points[1])
            .map(|(l, r)| ((2.0 * TEMPLATE_CENTER_X - l[0] - r[0]).abs()).max((l[1] - r[1]).abs()))
            .fold(0.0, f64::max)
    }
}

fn mirror(p: [f64; 2]) -> [f64; 2] {
    [2.0 * TEMPLATE_CENTER_X - p[0], p[1]]
}

/// Left-half grid: 16 rows from y = 24 to 114, 11 columns from x = 60
/// outward to x = 10; the right half is its mirror image.
pub fn generate_points() -> [Vec<[f64; 2]>; 2] {
    let mut left = Vec::with_capacity(POINTS_PER_HALF);
    for r in 0..GRID_ROWS {
        for c in 0..GRID_COLS {
            left.push([
                TEMPLATE_CENTER_X - 4.0 - 5.0 * c as f64,
                24.0 + 6.0 * r as f64,
            ]);
        }
    }
    let right = left.iter().map(|&p| mirror(p)).collect();
    [left, right]
}

/// 24 left-side landmarks (eye, brow, nose wing, mouth, jaw) and their
/// mirror images; landmark 0 is the left eye centre, 24 the right one.
pub fn generate_landmarks() -> LandmarkSet {
    let mut left: Vec<[f64; 2]> = vec![[44.0, 50.0]];
    for k in 0..5 {
        let a = std::f64::consts::PI * (0.2 + 0.4 * k as f64);
        left.push([44.0 + 9.0 * a.cos(), 50.0 + 4.0 * a.sin()]);
    }
    for k in 0..4 {
        left.push([
            30.0 + 8.0 * k as f64,
            38.0 - if k == 1 || k == 2 { 3.0 } else { 0.0 },
        ]);
    }
    for k in 0..4 {
        left.push([58.0 - 2.0 * k as f64, 60.0 + 6.0 * k as f64]);
    }
    for k in 0..4 {
        left.push([
            46.0 + 4.0 * k as f64,
            92.0 - if k > 1 { 2.0 } else { 0.0 } + k as f64,
        ]);
    }
    for k in 0..6 {
        let a = std::f64::consts::PI * (0.55 + 0.08 * k as f64);
        left.push([64.0 + 52.0 * a.cos(), 58.0 + 58.0 * a.sin()]);
    }
    debug_assert_eq!(left.len(), LANDMARK_COUNT / 2);
    let mut points = left.clone();
    points.extend(left.iter().map(|&p| mirror(p)));
    LandmarkSet {
        points,
        eye_left: 0,
        eye_right: LANDMARK_COUNT / 2,
    }
}

pub fn points_to_text(points: &[Vec<[f64; 2]>; 2]) -> String {
    let mut out = String::from("xmodal-template v1\n");
    for half in Half::BOTH {
        for (i, p) in points[half.index()].iter().enumerate() {
            out.push_str(&format!("{i} {} {} {}\n", half.as_str(), p[0], p[1]));
        }
    }
    out
}
