use super::DataError;

pub const LANDMARK_COUNT: usize = 48;

/// 48 alignment landmarks in pixels with the indices of the two eye centres.
#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkSet {
    pub points: Vec<[f64; 2]>,
    pub eye_left: usize,
    pub eye_right: usize,
}

impl LandmarkSet {
    pub fn validate(&self) -> Result<(), DataError> {
        if self.points.len() != LANDMARK_COUNT {
            return Err(DataError::Invalid(format!(
                "landmark set has {} points, expected {LANDMARK_COUNT}",
                self.points.len()
            )));
        }
        if self.eye_left == self.eye_right
            || self.eye_left >= LANDMARK_COUNT
            || self.eye_right >= LANDMARK_COUNT
        {
            return Err(DataError::Invalid(format!(
                "eye indices {} and {} must be distinct and below {LANDMARK_COUNT}",
                self.eye_left, self.eye_right
            )));
        }
        if self.points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(DataError::Invalid("non-finite landmark coordinate".into()));
        }
        Ok(())
    }

    pub fn eye_distance(&self) -> f64 {
        let l = self.points[self.eye_left];
        let r = self.points[self.eye_right];
        (l[0] - r[0]).hypot(l[1] - r[1])
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "xmodal-landmarks v1 eye_left={} eye_right={}\n",
            self.eye_left, self.eye_right
        );
        for p in &self.points {
            out.push_str(&format!("{} {}\n", p[0], p[1]));
        }
        out
    }

    /// Apply `p -> s R p + t` with rotation angle `theta` to every point.
    pub fn transformed(&self, scale: f64, theta: f64, t: [f64; 2]) -> Self {
        let (s, c) = theta.sin_cos();
        let points = self
            .points
            .iter()
            .map(|p| {
                [
                    scale * (c * p[0] - s * p[1]) + t[0],
                    scale * (s * p[0] + c * p[1]) + t[1],
                ]
            })
            .collect();
        Self {
            points,
            ..self.clone()
        }
    }
}

fn parse_header(line: &str) -> Result<(usize, usize), String> {
    let mut fields = line.split_whitespace();
    if fields.next() != Some("xmodal-landmarks") || fields.next() != Some("v1") {
        return Err("expected header `xmodal-landmarks v1 eye_left=I eye_right=J`".into());
    }
    let mut eyes = [None, None];
    for f in fields {
        let (key, value) = f
            .split_once('=')
            .ok_or_else(|| format!("bad header field `{f}`"))?;
        let slot = match key {
            "eye_left" => 0,
            "eye_right" => 1,
            _ => return Err(format!("unknown header field `{key}`")),
        };
        if eyes[slot].is_some() {
            return Err(format!("repeated header field `{key}`"));
        }
        eyes[slot] = Some(
            value
                .parse::<usize>()
                .map_err(|_| format!("bad index `{value}` for {key}"))?,
        );
    }
    match eyes {
        [Some(l), Some(r)] => Ok((l, r)),
        _ => Err("header must name eye_left and eye_right".into()),
    }
}

/// Parse a landmark file: a header naming the eye indices followed by 48
/// `x y` lines. Blank lines and `#` comments are ignored.
pub fn parse_landmarks(text: &str) -> Result<LandmarkSet, DataError> {
    let mut header = None;
    let mut points = Vec::with_capacity(LANDMARK_COUNT);
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if header.is_none() {
            header = Some(parse_header(line).map_err(|m| DataError::parse(line_no, m))?);
            continue;
        }
        let mut f = line.split_whitespace();
        let (x, y) = match (f.next(), f.next(), f.next()) {
            (Some(x), Some(y), None) => (x, y),
            _ => return Err(DataError::parse(line_no, "expected `x y`")),
        };
        let x: f64 = x
            .parse()
            .map_err(|_| DataError::parse(line_no, format!("bad x `{x}`")))?;
        let y: f64 = y
            .parse()
            .map_err(|_| DataError::parse(line_no, format!("bad y `{y}`")))?;
        if !(x.is_finite() && y.is_finite()) {
            return Err(DataError::parse(line_no, "non-finite coordinate"));
        }
        if points.len() == LANDMARK_COUNT {
            return Err(DataError::parse(
                line_no,
                format!("more than {LANDMARK_COUNT} landmarks"),
            ));
        }
        points.push([x, y]);
    }
    let (eye_left, eye_right) = header.ok_or_else(|| DataError::parse(1, "missing header"))?;
    let set = LandmarkSet {
        points,
        eye_left,
        eye_right,
    };
    set.validate()?;
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> LandmarkSet {
        LandmarkSet {
            points: (0..48)
                .map(|i| [i as f64 * 1.5, 100.0 - i as f64])
                .collect(),
            eye_left: 3,
            eye_right: 10,
        }
    }

    #[test]
    fn round_trip() {
        let s = sample();
        assert_eq!(parse_landmarks(&s.to_text()).unwrap(), s);
    }

    #[test]
    fn rejects_bad_files() {
        let s = sample();
        let text = s.to_text();
        let short: String = text.lines().take(10).map(|l| format!("{l}\n")).collect();
        assert!(parse_landmarks(&short).is_err());
        assert!(parse_landmarks(&text.replace("eye_right=10", "eye_right=3")).is_err());
        assert!(parse_landmarks(&text.replace("eye_right=10", "eye_right=48")).is_err());
        assert!(parse_landmarks(&text.replace("v1", "v2")).is_err());
        let extra = format!("{text}1 2\n");
        assert!(matches!(
            parse_landmarks(&extra),
            Err(DataError::Parse { line: 50, .. })
        ));
    }

    #[test]
    fn similarity_transform_scales_eye_distance() {
        let s = sample();
        let t = s.transformed(2.0, 0.3, [5.0, -3.0]);
        assert!((t.eye_distance() - 2.0 * s.eye_distance()).abs() < 1e-9);
    }
}
