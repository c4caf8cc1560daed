//! 8-bit grayscale PGM (`P5` binary and `P2` ASCII).

use super::DataError;

/// Row-major grayscale raster with intensities as `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<f64>,
}

/// Upper bound on `width * height` accepted by the parser.
pub const MAX_PIXELS: usize = 1 << 26;

impl GrayImage {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            pixels: vec![0.0; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            pixels,
        }
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.width + x]
    }

    /// Pixel value, zero outside the image.
    pub fn get_padded(&self, x: i64, y: i64) -> f64 {
        if x < 0 || y < 0 || x >= self.width as i64 || y >= self.height as i64 {
            0.0
        } else {
            self.pixels[y as usize * self.width + x as usize]
        }
    }

    /// Left-right mirror image.
    pub fn mirrored(&self) -> Self {
        Self::from_fn(self.width, self.height, |x, y| {
            self.get(self.width - 1 - x, y)
        })
    }

    /// Binary `P5` encoding; values are rounded and clamped to `0..=255`.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(
            self.pixels
                .iter()
                .map(|&v| v.round().clamp(0.0, 255.0) as u8),
        );
        out
    }
}

struct Tokens<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Tokens<'a> {
    fn skip_space(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                b if b.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn token(&mut self) -> Option<&'a [u8]> {
        self.skip_space();
        let start = self.pos;
        while self.pos < self.bytes.len()
            && !self.bytes[self.pos].is_ascii_whitespace()
            && self.bytes[self.pos] != b'#'
        {
            self.pos += 1;
        }
        (self.pos > start).then(|| &self.bytes[start..self.pos])
    }

    fn number(&mut self, what: &str) -> Result<usize, DataError> {
        let t = self
            .token()
            .ok_or_else(|| DataError::Invalid(format!("pgm: missing {what}")))?;
        std::str::from_utf8(t)
            .ok()
            .filter(|s| s.len() <= 9)
            .and_then(|s| s.parse::<usize>().ok())
            .ok_or_else(|| DataError::Invalid(format!("pgm: bad {what}")))
    }
}

pub fn parse_pgm(bytes: &[u8]) -> Result<GrayImage, DataError> {
    let mut t = Tokens { bytes, pos: 0 };
    let magic = t
        .token()
        .ok_or_else(|| DataError::Invalid("pgm: empty input".into()))?;
    let binary = match magic {
        b"P5" => true,
        b"P2" => false,
        _ => return Err(DataError::Invalid("pgm: expected magic P5 or P2".into())),
    };
    let width = t.number("width")?;
    let height = t.number("height")?;
    let maxval = t.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(DataError::Invalid("pgm: zero dimension".into()));
    }
    if width.checked_mul(height).map_or(true, |n| n > MAX_PIXELS) {
        return Err(DataError::Invalid("pgm: image too large".into()));
    }
    if maxval == 0 || maxval > 255 {
        return Err(DataError::Invalid(format!(
            "pgm: maxval {maxval} unsupported (8-bit only)"
        )));
    }
    let n = width * height;
    let scale = 255.0 / maxval as f64;
    let pixels = if binary {
        // exactly one whitespace byte separates the header from the raster
        if t.pos >= bytes.len() || !bytes[t.pos].is_ascii_whitespace() {
            return Err(DataError::Invalid("pgm: missing raster".into()));
        }
        let data = &bytes[t.pos + 1..];
        if data.len() < n {
            return Err(DataError::Invalid(format!(
                "pgm: raster truncated ({} of {n} bytes)",
                data.len()
            )));
        }
        if data.len() > n {
            return Err(DataError::Invalid(
                "pgm: trailing bytes after raster".into(),
            ));
        }
        data.iter()
            .map(|&b| {
                if b as usize > maxval {
                    Err(DataError::Invalid("pgm: sample exceeds maxval".into()))
                } else {
                    Ok(b as f64 * scale)
                }
            })
            .collect::<Result<Vec<_>, _>>()?
    } else {
        let mut px = Vec::with_capacity(n);
        for _ in 0..n {
            let v = t.number("sample")?;
            if v > maxval {
                return Err(DataError::Invalid("pgm: sample exceeds maxval".into()));
            }
            px.push(v as f64 * scale);
        }
        if t.token().is_some() {
            return Err(DataError::Invalid("pgm: trailing data after raster".into()));
        }
        px
    };
    Ok(GrayImage {
        width,
        height,
        pixels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_round_trip() {
        let img = GrayImage::from_fn(5, 3, |x, y| (x * 40 + y * 7) as f64);
        assert_eq!(parse_pgm(&img.to_pgm()).unwrap(), img);
    }

    #[test]
    fn ascii_with_comments() {
        let img = parse_pgm(b"P2\n# note\n2 2\n15\n0 15\n3 # mid\n 5\n").unwrap();
        assert_eq!(img.pixels, vec![0.0, 255.0, 51.0, 85.0]);
    }

    #[test]
    fn rejects_malformed() {
        assert!(parse_pgm(b"").is_err());
        assert!(parse_pgm(b"P6\n1 1\n255\n\0").is_err());
        assert!(parse_pgm(b"P5\n2 2\n255\n\0\0\0").is_err());
        assert!(parse_pgm(b"P5\n1 1\n65535\n\0\0").is_err());
        assert!(parse_pgm(b"P5\n0 1\n255\n").is_err());
        assert!(parse_pgm(b"P5\n99999999 99999999\n255\n").is_err());
        assert!(parse_pgm(b"P2\n1 1\n10\n11\n").is_err());
    }

    #[test]
    fn mirror_and_padding() {
        let img = GrayImage::from_fn(3, 1, |x, _| x as f64);
        assert_eq!(img.mirrored().pixels, vec![2.0, 1.0, 0.0]);
        assert_eq!(img.get_padded(-1, 0), 0.0);
        assert_eq!(img.get_padded(2, 0), 2.0);
        assert_eq!(img.get_padded(0, 1), 0.0);
    }
}
