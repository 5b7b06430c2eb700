//! Seeded synthetic scenes: warm upright blobs ("people") in loose groups on
//! a noisy cool background, with one annotation point per blob.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::batch::LoadedItem;
use crate::error::{Error, Result};
use crate::evaluation::GroundTruth;
use crate::image::{save_image, Image, ImagePair};
use crate::metrics::PointAnnotations;
use crate::targets::{surrogate_count, SurrogateCountingParams};

pub const FIXTURE_WIDTH: usize = 224;
pub const FIXTURE_HEIGHT: usize = 176;
const MIN_SPACING: f64 = 20.0;
const MARGIN: f64 = 10.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Fixture {
    pub name: String,
    pub pair: ImagePair,
    pub points: PointAnnotations,
}

impl Fixture {
    pub fn to_item(&self) -> LoadedItem {
        LoadedItem {
            name: self.name.clone(),
            pair: self.pair.clone(),
            truth: GroundTruth::points(self.points.clone()),
        }
    }
}

struct Person {
    x: f64,
    y: f64,
    rx: f64,
    ry: f64,
    heat: f64,
    clothing: [f64; 3],
}

fn place_people(rng: &mut ChaCha8Rng, w: f64, h: f64) -> Vec<Person> {
    let target = rng.gen_range(6..=18);
    let groups: Vec<(f64, f64)> = (0..rng.gen_range(1..=3))
        .map(|_| (rng.gen_range(30.0..w - 30.0), rng.gen_range(30.0..h - 30.0)))
        .collect();
    let mut people: Vec<Person> = Vec::new();
    let mut attempts = 0;
    while people.len() < target && attempts < 2000 {
        attempts += 1;
        let (gx, gy) = groups[rng.gen_range(0..groups.len())];
        let spread = 28.0;
        // Box-Muller
        let (u1, u2): (f64, f64) = (rng.gen_range(1e-9..1.0), rng.gen());
        let rad = (-2.0 * u1.ln()).sqrt() * spread;
        let x = gx + rad * (2.0 * std::f64::consts::PI * u2).cos();
        let y = gy + rad * (2.0 * std::f64::consts::PI * u2).sin();
        if x < MARGIN || y < MARGIN || x > w - MARGIN || y > h - MARGIN {
            continue;
        }
        if people.iter().any(|p| (p.x - x).hypot(p.y - y) < MIN_SPACING) {
            continue;
        }
        people.push(Person {
            x: x.round(),
            y: y.round(),
            rx: rng.gen_range(3.5..5.0),
            ry: rng.gen_range(5.5..7.5),
            heat: rng.gen_range(0.85..0.95),
            clothing: [rng.gen(), rng.gen(), rng.gen()],
        });
    }
    people
}

fn inside(p: &Person, x: usize, y: usize) -> bool {
    let dx = (x as f64 - p.x) / p.rx;
    let dy = (y as f64 - p.y) / p.ry;
    dx * dx + dy * dy <= 1.0
}

fn render(rng: &mut ChaCha8Rng, people: &[Person], w: usize, h: usize) -> ImagePair {
    let tilt: f64 = rng.gen_range(-0.04..0.04);
    let base: f64 = rng.gen_range(0.18..0.22);
    let horizon = rng.gen_range(0.3..0.45) * h as f64;
    let sky = [rng.gen_range(0.45..0.6), rng.gen_range(0.6..0.75), rng.gen_range(0.8..0.95)];
    let ground = [rng.gen_range(0.3..0.45), rng.gen_range(0.35..0.5), rng.gen_range(0.25..0.35)];

    let mut ir = vec![0.0; w * h];
    let mut vis = vec![0.0; w * h * 3];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let owner = people.iter().find(|p| inside(p, x, y));
            let noise: f64 = rng.gen_range(-0.06..0.06);
            ir[i] = match owner {
                Some(p) => p.heat + 0.3 * noise,
                None => base + tilt * (x as f64 / w as f64 - 0.5) + noise,
            };
            let bg = if (y as f64) < horizon { sky } else { ground };
            for c in 0..3 {
                let v = match owner {
                    Some(p) => p.clothing[c],
                    None => bg[c],
                };
                vis[3 * i + c] = v + rng.gen_range(-0.03..0.03);
            }
        }
    }
    // Stored as 8-bit PNGs, so keep exactly what a reload would give.
    let q = |v: f64| (v.clamp(0.0, 1.0) * 255.0).round() / 255.0;
    let vis = Image::from_fn(w, h, 3, |x, y, c| q(vis[3 * (y * w + x) + c]));
    let ir = Image::from_fn(w, h, 1, |x, y, _| q(ir[y * w + x]));
    ImagePair::new(vis, ir).expect("matching dimensions")
}

/// Fixture `index` of the set generated from `seed`. Scenes are redrawn
/// until the surrogate counter reproduces the annotation count exactly, so a
/// clean pair has zero counting error.
pub fn generate_fixture(seed: u64, index: usize) -> Fixture {
    let (w, h) = (FIXTURE_WIDTH, FIXTURE_HEIGHT);
    let params = SurrogateCountingParams::default();
    for attempt in 0u64.. {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(((index as u64) << 16) | attempt);
        let people = place_people(&mut rng, w as f64, h as f64);
        let pair = render(&mut rng, &people, w, h);
        let points: Vec<(f64, f64)> = people.iter().map(|p| (p.x, p.y)).collect();
        let (count, _) = surrogate_count(&pair, &params);
        if count as usize == points.len() && !points.is_empty() {
            return Fixture {
                name: format!("fx{index:03}"),
                points: PointAnnotations::new(points, (w, h)).expect("points inside the image"),
                pair,
            };
        }
    }
    unreachable!()
}

pub fn generate_fixtures(n: usize, seed: u64) -> Vec<Fixture> {
    (0..n).map(|i| generate_fixture(seed, i)).collect()
}

/// Writes `<name>_vis.png`, `<name>_ir.png` and `<name>_points.txt`.
pub fn write_fixtures(dir: &Path, fixtures: &[Fixture]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for f in fixtures {
        save_image(f.pair.visible(), dir.join(format!("{}_vis.png", f.name)))?;
        save_image(f.pair.infrared(), dir.join(format!("{}_ir.png", f.name)))?;
        let p = dir.join(format!("{}_points.txt", f.name));
        fs::write(&p, f.points.to_text()).map_err(|e| Error::io(&p, e))?;
    }
    Ok(())
}
