//! Procedural two-tone image classes for training and testing.
//!
//! Text images share one glyph set (the "font") across seeds, so images
//! generated with different seeds belong to the same class.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::image::Image;

const GLYPH_W: usize = 5;
const GLYPH_H: usize = 7;
const ALPHABET: usize = 26;
const FONT_SEED: u64 = 0x7e57_f0e7;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ImageClass {
    /// Dark glyphs on a white page.
    Text,
    /// Binarized oriented ridge pattern.
    Ridge,
}

impl ImageClass {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "text" => Ok(Self::Text),
            "ridge" => Ok(Self::Ridge),
            other => Err(Error::invalid(format!("unknown image class '{other}' (known: text, ridge)"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Text => "text",
            Self::Ridge => "ridge",
        }
    }

    pub fn generate(&self, height: usize, width: usize, seed: u64) -> Image {
        match self {
            Self::Text => text_image(height, width, seed),
            Self::Ridge => ridge_image(height, width, seed),
        }
    }
}

type Glyph = [[bool; GLYPH_W]; GLYPH_H];

/// Glyphs built from three or four strokes on a 5x7 grid.
fn font() -> Vec<Glyph> {
    let mut rng = ChaCha8Rng::seed_from_u64(FONT_SEED);
    (0..ALPHABET)
        .map(|_| {
            let mut g = [[false; GLYPH_W]; GLYPH_H];
            let strokes = rng.random_range(3..=4);
            for _ in 0..strokes {
                match rng.random_range(0..5) {
                    0 => {
                        let c = [0, GLYPH_W / 2, GLYPH_W - 1][rng.random_range(0..3)];
                        let (a, b) = span(&mut rng, GLYPH_H);
                        (a..b).for_each(|r| g[r][c] = true);
                    }
                    1 => {
                        let r = [0, GLYPH_H / 2, GLYPH_H - 1][rng.random_range(0..3)];
                        let (a, b) = span(&mut rng, GLYPH_W);
                        (a..b).for_each(|c| g[r][c] = true);
                    }
                    2 => (0..GLYPH_H).for_each(|r| g[r][(r * (GLYPH_W - 1)) / (GLYPH_H - 1)] = true),
                    3 => (0..GLYPH_H).for_each(|r| g[r][GLYPH_W - 1 - (r * (GLYPH_W - 1)) / (GLYPH_H - 1)] = true),
                    _ => {
                        // small closed bowl in the lower half
                        for r in GLYPH_H / 2..GLYPH_H {
                            g[r][0] = true;
                            g[r][GLYPH_W - 1] = true;
                        }
                        for c in 0..GLYPH_W {
                            g[GLYPH_H / 2][c] = true;
                            g[GLYPH_H - 1][c] = true;
                        }
                    }
                }
            }
            g
        })
        .collect()
}

fn span(rng: &mut impl Rng, len: usize) -> (usize, usize) {
    let a = rng.random_range(0..len / 2);
    let b = rng.random_range(len / 2 + 1..=len);
    (a, b)
}

/// Lines of random glyphs at 4x scale (strokes 4 px wide) with a random
/// page offset.
pub fn text_image(height: usize, width: usize, seed: u64) -> Image {
    const SCALE: usize = 4;
    const CELL_W: usize = (GLYPH_W + 1) * SCALE;
    const CELL_H: usize = (GLYPH_H + 2) * SCALE;
    let glyphs = font();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let off_r = rng.random_range(0..CELL_H / 2);
    let off_c = rng.random_range(0..CELL_W / 2);
    let mut img = Image::filled(height, width, 1.0);
    let mut top = off_r;
    while top + GLYPH_H * SCALE <= height {
        let mut left = off_c;
        while left + GLYPH_W * SCALE <= width {
            // occasional word gap
            if rng.random_range(0..6) != 0 {
                let g = &glyphs[rng.random_range(0..ALPHABET)];
                for r in 0..GLYPH_H * SCALE {
                    for c in 0..GLYPH_W * SCALE {
                        if g[r / SCALE][c / SCALE] {
                            img.set(top + r, left + c, 0.0);
                        }
                    }
                }
            }
            left += CELL_W;
        }
        top += CELL_H;
    }
    img
}

/// Thresholded sinusoid whose orientation drifts smoothly across the frame.
pub fn ridge_image(height: usize, width: usize, seed: u64) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let theta0: f64 = rng.random_range(0.0..std::f64::consts::PI);
    let bend: f64 = rng.random_range(-1.0..1.0);
    let period: f64 = rng.random_range(6.0..8.0);
    let phase: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let (cy, cx) = (height as f64 / 2.0, width as f64 / 2.0);
    let scale = height.max(width) as f64;
    Image::from_fn(height, width, |r, c| {
        let (y, x) = (r as f64 - cy, c as f64 - cx);
        let theta = theta0 + bend * (x * x + y * y).sqrt() / scale;
        let t = x * theta.cos() + y * theta.sin();
        if (std::f64::consts::TAU * t / period + phase).sin() > 0.0 {
            1.0
        } else {
            0.0
        }
    })
}
